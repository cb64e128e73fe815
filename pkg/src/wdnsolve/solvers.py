"""Newton solvers for demand-driven network hydraulics.

Four methods share one preprocessing object:

* ``GGA``  - Schur complement on the head unknowns.
* ``NSM1`` - exact null-space Newton; flows move only inside ker(A12^T).
* ``NSM2`` - NSM1 with headlosses refreshed only on the pipes whose flow
  step reached ``epsilon * delta_N`` (inexact Newton).
* ``NSM3`` - NSM2 that skips head solves and residual checks until the
  update set is small or the relative flow change drops below ``delta_N``.
"""

from __future__ import annotations

import enum
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from wdnsolve.errors import AllZeroDiagonal, AllZeroLoop, DimensionMismatch, MaxIterations, NotPositiveDefinite
from wdnsolve.headloss import NU_WATER, HeadlossState, ResistanceModel, regularize, update_GF
from wdnsolve.network import Network
from wdnsolve.nullbasis import NullBasis, build_fundamental_basis
from wdnsolve.sparse.assembly import GramAssembler, assemble_ztfz
from wdnsolve.sparse.cholesky import NumericFactor, SymbolicFactor, numeric_cholesky, solve_factored, symbolic_cholesky

FT_PER_S = 0.3048


class Method(enum.Enum):
    GGA = "gga"
    NSM1 = "nsm1"
    NSM2 = "nsm2"
    NSM3 = "nsm3"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown method {name!r}; choose from gga, nsm1, nsm2, nsm3") from None


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.NSM1
    delta_N: float = 1e-6
    epsilon: float = 1e-3
    k_max: int = 100
    kappa_bar: float = 1e8
    head_delay_fraction: float = 0.5
    gga_flow_floor: float = 1e-6
    symbolic_reuse: bool = True
    record_iterates: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not self.delta_N > 0:
            raise ValueError("delta_N must be positive")
        if not 0 < self.head_delay_fraction <= 1:
            raise ValueError("head_delay_fraction must lie in (0, 1]")
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")
        if not self.kappa_bar > 1:
            raise ValueError("kappa_bar must exceed 1")


BLOCKS = ("linear_solves", "headloss", "matmat", "other")


class _Clock:
    def __init__(self):
        self.ms = dict.fromkeys(BLOCKS, 0.0)
        self._t0 = time.perf_counter()

    @contextmanager
    def block(self, name):
        t = time.perf_counter()
        try:
            yield
        finally:
            self.ms[name] += (time.perf_counter() - t) * 1e3

    def finish(self):
        total = (time.perf_counter() - self._t0) * 1e3
        self.ms["other"] = max(total - sum(self.ms[b] for b in BLOCKS[:3]), 0.0)
        self.ms["total"] = total
        return self.ms


@dataclass(eq=False)
class SolverResult:
    method: Method
    q: np.ndarray
    h: np.ndarray
    iterations: int
    converged: bool
    final_residual: float
    residual_history: list  # entry 0 is the initial guess; NaN where not evaluated
    update_set_sizes: list  # |U^k| per iteration (n_p for GGA, |E2| for NSM1)
    head_solves: int
    headloss_evals: int
    timing: dict
    eval_breakdown: dict = field(default_factory=dict)  # sums to headloss_evals
    iterates: list = field(default_factory=list, repr=False)

    # long-form aliases used in reports
    @property
    def q_star(self):
        return self.q

    @property
    def h_star(self):
        return self.h


@dataclass(frozen=True, eq=False)
class Precomputed:
    """Everything that depends on topology only, built once per network."""

    network_hash: str
    model: ResistanceModel
    basis: NullBasis
    head_factor: NumericFactor  # A12^T A12
    ztfz: GramAssembler
    ztfz_symbolic: SymbolicFactor | None
    schur: GramAssembler  # A12^T D A12 for the GGA head system
    schur_symbolic: SymbolicFactor
    timing: dict

    def check(self, network: Network):
        if network.fingerprint() != self.network_hash:
            raise ValueError("precomputed data belongs to a different network")


def precompute(network: Network, nu: float = NU_WATER) -> Precomputed:
    ms = {}
    t = time.perf_counter()
    model = ResistanceModel.from_network(network, nu)
    ms["resistance"] = (time.perf_counter() - t) * 1e3

    t = time.perf_counter()
    basis = build_fundamental_basis(network.A12, network.A10)
    ms["null_basis"] = (time.perf_counter() - t) * 1e3

    t = time.perf_counter()
    schur = GramAssembler(network.A12)
    schur_symbolic = symbolic_cholesky(schur.pattern)
    head_factor = numeric_cholesky(schur.full(np.ones(network.n_p)), schur_symbolic)
    ms["head_factor"] = (time.perf_counter() - t) * 1e3

    t = time.perf_counter()
    ztfz = GramAssembler(basis.Z)
    ztfz_symbolic = symbolic_cholesky(ztfz.pattern) if basis.n_l else None
    ms["ztfz_symbolic"] = (time.perf_counter() - t) * 1e3
    return Precomputed(network.fingerprint(), model, basis, head_factor, ztfz, ztfz_symbolic,
                       schur, schur_symbolic, ms)


# -- building blocks ---------------------------------------------------------

def initial_flows(network: Network) -> np.ndarray:
    """1 ft/s in every pipe's reference direction."""
    d = network.pipe_array("diameter")
    return math.pi * d ** 2 / 4.0 * FT_PER_S


def initial_heads(network: Network) -> np.ndarray:
    return np.full(network.n_n, float(network.h0.max()))


def residual_vector(q, h, network: Network, G, d=None) -> np.ndarray:
    d = network.demands if d is None else d
    energy = G * q + network.A12.matvec(h) + network.A10.matvec(network.h0)
    continuity = network.A12.rmatvec(q) - d
    return np.concatenate((energy, continuity))


def residual_norm(q, h, network: Network, G, d=None) -> float:
    """Infinity norm of the full nonlinear residual, using the unshifted G."""
    return float(np.abs(residual_vector(q, h, network, G, d)).max())


def particular_solution(precomp: Precomputed, a12, d) -> np.ndarray:
    """x* = A12 w with (A12^T A12) w = d, so A12^T x* = d."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (a12.ncols,):
        raise DimensionMismatch(f"demand vector has shape {d.shape}, expected ({a12.ncols},)")
    w = solve_factored(precomp.head_factor, d)
    return a12.matvec(w)


def update_set(q_next, q_prev, epsilon, delta_N, E2) -> np.ndarray:
    """Loop pipes whose flow step is at least epsilon * delta_N."""
    E2 = np.asarray(E2, dtype=np.int64)
    step = np.abs(np.asarray(q_next)[E2] - np.asarray(q_prev)[E2])
    return E2[step >= epsilon * delta_N]


def _check_demand(network, d):
    d = network.demands if d is None else np.asarray(d, dtype=np.float64)
    if d.shape != (network.n_n,):
        raise DimensionMismatch(f"demand vector has shape {d.shape}, expected ({network.n_n},)")
    return d


def _factor(matrix, symbolic, reuse):
    if not reuse:
        symbolic = symbolic_cholesky(matrix)
    return numeric_cholesky(matrix, symbolic)


def _finish(result: SolverResult, config: SolverConfig):
    if not result.converged:
        raise MaxIterations(
            f"{result.method.value}: residual {result.final_residual:.3e} > {config.delta_N:.1e} "
            f"after {result.iterations} iterations", result)
    return result


# -- Schur / GGA ---------------------------------------------------------------

def solve_gga(network: Network, d=None, config: SolverConfig | None = None,
              precomp: Precomputed | None = None) -> SolverResult:
    config = config or SolverConfig(method=Method.GGA)
    precomp = precomp or precompute(network)
    d = _check_demand(network, d)
    clock = _Clock()
    model = precomp.model
    a12, a10, h0 = network.A12, network.A10, network.h0
    a10h0 = a10.matvec(h0)
    floor = config.gga_flow_floor
    n_p = network.n_p
    tally = {"initial": 0, "updates": 0, "floor": 0}

    def evaluate(q, key):
        # Jacobian data at |q| floored; the true G for the residual where the floor bites
        qf = np.where(np.abs(q) < floor, np.where(q < 0, -floor, floor), q)
        Gf, Ff = model.evaluate(qf)
        G = Gf.copy()
        small = np.flatnonzero(np.abs(q) < floor)
        if small.size:
            G[small], _ = model.evaluate(q, small)
        tally[key] += n_p
        tally["floor"] += small.size
        return Gf, Ff, G

    q = initial_flows(network)
    h = initial_heads(network)
    with clock.block("headloss"):
        Gf, Ff, G = evaluate(q, "initial")
    res = residual_norm(q, h, network, G, d)
    history, sizes, iterates = [res], [], []
    k = 0
    head_solves = 0
    while res > config.delta_N and k < config.k_max:
        inv_f = 1.0 / Ff
        with clock.block("matmat"):
            S = precomp.schur.full(inv_f)
        rhs = -a12.rmatvec(inv_f * (Gf * q + a10h0)) - (d - a12.rmatvec(q))
        with clock.block("linear_solves"):
            fac = _factor(S, precomp.schur_symbolic, config.symbolic_reuse)
            h = solve_factored(fac, rhs)
        head_solves += 1
        q = q - inv_f * (Gf * q + a12.matvec(h) + a10h0)
        k += 1
        with clock.block("headloss"):
            Gf, Ff, G = evaluate(q, "updates")
        res = residual_norm(q, h, network, G, d)
        history.append(res)
        sizes.append(n_p)
        if config.record_iterates:
            iterates.append(q.copy())

    result = SolverResult(Method.GGA, q, h, k, res <= config.delta_N, res, history, sizes,
                          head_solves, sum(tally.values()), clock.finish(), tally, iterates)
    return _finish(result, config)


# -- null-space methods ----------------------------------------------------------

def solve_nsm(network: Network, d=None, config: SolverConfig | None = None,
              precomp: Precomputed | None = None) -> SolverResult:
    config = config or SolverConfig()
    method = config.method
    if method is Method.GGA:
        raise ValueError("solve_nsm handles NSM1, NSM2 and NSM3; use solve_gga for GGA")
    precomp = precomp or precompute(network)
    d = _check_demand(network, d)
    clock = _Clock()
    model, basis = precomp.model, precomp.basis
    Z, E2 = basis.Z, basis.E2
    a12, a10h0 = network.A12, network.A10.matvec(network.h0)
    delta = config.delta_N
    n_p = network.n_p
    head_solves = 0
    tally = {"initial": n_p, "first_pass": 0, "updates": 0, "confirm": 0}

    def heads(q, G):
        nonlocal head_solves
        head_solves += 1
        with clock.block("linear_solves"):
            return solve_factored(precomp.head_factor, a12.rmatvec(-(G * q) - a10h0))

    def confirm(q, h):
        # Partial updates leave some G entries evaluated at older flows. The
        # residual that ends the run must use G at the current q, so refresh
        # those entries (and the heads) before accepting convergence.
        stale = np.flatnonzero(state.q_eval != q)
        if stale.size == 0:
            return residual_norm(q, h, network, state.G, d), h
        with clock.block("headloss"):
            update_GF(state, q, model, stale)
        tally["confirm"] += stale.size
        h = heads(q, state.G)
        return residual_norm(q, h, network, state.G, d), h

    x_star = particular_solution(precomp, a12, d)
    q = initial_flows(network)
    h = initial_heads(network)
    with clock.block("headloss"):
        state = HeadlossState.initial(model, q)
    res = residual_norm(q, h, network, state.G, d)
    history, sizes, iterates = [res], [], []

    if basis.n_l == 0:
        # tree: continuity alone fixes the flows
        q = x_star.copy()
        with clock.block("headloss"):
            update_GF(state, q, model, np.arange(n_p))
        tally["first_pass"] = n_p
        h = heads(q, state.G)
        res = residual_norm(q, h, network, state.G, d)
        history.append(res)
        result = SolverResult(method, q, h, 0, res <= delta, res, history, sizes,
                              head_solves, state.evals, clock.finish(), tally, iterates)
        return _finish(result, config)

    threshold_size = math.ceil(config.head_delay_fraction * E2.size)
    X = None
    f_used = np.zeros(n_p)
    k = 0
    h_current = False  # h belongs to the current q
    while k < config.k_max and not (res <= delta):
        F_loop = state.F[E2]
        try:
            T = regularize(F_loop, config.kappa_bar)
        except AllZeroDiagonal:
            raise AllZeroLoop("every loop pipe carries zero flow; loop system is singular") from None
        f_reg = np.zeros(n_p)
        f_reg[E2] = F_loop + T
        state.T[:] = 0.0
        state.T[E2] = T

        with clock.block("matmat"):
            if X is None or method is Method.NSM1:
                X = assemble_ztfz(precomp.ztfz, f_reg)
            else:
                changed = E2[f_reg[E2] != f_used[E2]]
                X = assemble_ztfz(precomp.ztfz, f_reg, X, changed, f_used)
        f_used = f_reg

        b = Z.rmatvec((f_reg - state.G) * q - a10h0 - f_reg * x_star)
        with clock.block("linear_solves"):
            try:
                fac = _factor(X, precomp.ztfz_symbolic, config.symbolic_reuse)
            except NotPositiveDefinite as exc:
                raise AllZeroLoop(f"loop system not positive definite: {exc}") from exc
            v = solve_factored(fac, b)
        q_new = x_star + Z.matvec(v)

        if k == 0:
            # first pass refreshes every pipe: loop pipes by construction of the
            # base case, the rest because they jumped from q0 to x*
            U = E2
            refresh = np.arange(n_p)
        elif method is Method.NSM1:
            U = refresh = E2
        else:
            U = refresh = update_set(q_new, q, config.epsilon, delta, E2)
        with clock.block("headloss"):
            update_GF(state, q_new, model, refresh)
        sizes.append(int(U.size))
        tally["updates"] += U.size
        tally["first_pass"] += refresh.size - U.size
        step = q_new - q
        q = q_new
        k += 1
        if config.record_iterates:
            iterates.append(q.copy())

        h_current = False
        res = math.nan
        if method is not Method.NSM3 or (
                U.size < threshold_size
                or np.abs(step).sum() <= delta * np.abs(q).sum()):
            h = heads(q, state.G)
            h_current = True
            res = residual_norm(q, h, network, state.G, d)
            if res <= delta:
                res, h = confirm(q, h)
        history.append(res)

    if not h_current:
        h = heads(q, state.G)
        res = residual_norm(q, h, network, state.G, d)
        if res <= delta:
            res, h = confirm(q, h)
    result = SolverResult(method, q, h, k, res <= delta, res, history, sizes,
                          head_solves, state.evals, clock.finish(), tally, iterates)
    return _finish(result, config)


def solve(network: Network, d=None, config: SolverConfig | None = None,
          precomp: Precomputed | None = None) -> SolverResult:
    config = config or SolverConfig()
    if config.method is Method.GGA:
        return solve_gga(network, d, config, precomp)
    return solve_nsm(network, d, config, precomp)
