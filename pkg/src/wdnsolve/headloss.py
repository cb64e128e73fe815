"""Frictional headloss: Hazen-Williams and Darcy-Weisbach pipes.

The headloss across pipe j is ``G_j(q_j) * q_j`` with ``G_j = r_j |q_j|^(n_j-1)``.
``F_j`` is the derivative of that headloss with respect to ``q_j``; for
Hazen-Williams this is exactly ``1.852 * G_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from wdnsolve.errors import AllZeroDiagonal, IndexOutOfRange, NonPositiveGeometry, NonPositiveInput
from wdnsolve.network import HeadlossModel, Network

GRAVITY = 9.81
NU_WATER = 1.004e-6  # m^2/s, water at 20 C
HW_EXPONENT = 1.852
DW_EXPONENT = 2.0
RE_LAMINAR = 2000.0
RE_TURBULENT = 4000.0


def hw_resistance(length, diameter, c):
    """Hazen-Williams resistance r = 10.670 L / (C^1.852 D^4.871), SI units."""
    length, diameter, c = (np.asarray(v, dtype=np.float64) for v in (length, diameter, c))
    if np.any(length <= 0) or np.any(diameter <= 0) or np.any(c <= 0):
        raise NonPositiveInput("length, diameter and C must be positive")
    r = 10.670 * length / (c ** HW_EXPONENT * diameter ** 4.871)
    return float(r) if r.ndim == 0 else r


def _swamee_jain(re, rel_rough):
    u = rel_rough / 3.7 + 5.74 * re ** -0.9
    lg = np.log10(u)
    f = 0.25 / lg ** 2
    du_dre = -0.9 * 5.74 * re ** -1.9
    df = -0.5 / lg ** 3 * du_dre / (u * math.log(10.0))
    return f, df


def friction_factor(re, rel_rough):
    """Darcy friction factor and its derivative with respect to Re.

    Laminar 64/Re below Re=2000, Swamee-Jain above Re=4000, and a cubic
    Hermite blend (matching values and slopes at both ends) in between.
    """
    re = np.atleast_1d(np.asarray(re, dtype=np.float64))
    rel_rough = np.broadcast_to(np.asarray(rel_rough, dtype=np.float64), re.shape)
    f = np.empty_like(re)
    df = np.empty_like(re)

    lam = re < RE_LAMINAR
    f[lam] = 64.0 / re[lam]
    df[lam] = -64.0 / re[lam] ** 2

    turb = re > RE_TURBULENT
    f[turb], df[turb] = _swamee_jain(re[turb], rel_rough[turb])

    mid = ~(lam | turb)
    if np.any(mid):
        x0, x1 = RE_LAMINAR, RE_TURBULENT
        h = x1 - x0
        f0, d0 = 64.0 / x0, -64.0 / x0 ** 2
        f1, d1 = _swamee_jain(np.full(mid.sum(), x1), rel_rough[mid])
        t = (re[mid] - x0) / h
        h00, h10, h01, h11 = 2 * t**3 - 3 * t**2 + 1, t**3 - 2 * t**2 + t, -2 * t**3 + 3 * t**2, t**3 - t**2
        f[mid] = h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1
        dh00, dh10, dh01, dh11 = 6 * t**2 - 6 * t, 3 * t**2 - 4 * t + 1, -6 * t**2 + 6 * t, 3 * t**2 - 2 * t
        df[mid] = (dh00 * f0 + dh10 * h * d0 + dh01 * f1 + dh11 * h * d1) / h
    return f, df


def dw_resistance(q, length, diameter, roughness, nu=NU_WATER):
    """Flow-dependent Darcy-Weisbach resistance r(q) = f(Re) 8L / (pi^2 g D^5).

    r grows without bound as q -> 0 (laminar f ~ 1/Re) while r|q| stays
    finite; use :meth:`ResistanceModel.evaluate` for G and F.
    """
    length, diameter, roughness = (np.asarray(v, dtype=np.float64) for v in (length, diameter, roughness))
    if np.any(length <= 0) or np.any(diameter <= 0) or np.any(roughness <= 0):
        raise NonPositiveGeometry("DW pipe geometry must be positive")
    q = np.abs(np.asarray(q, dtype=np.float64))
    with np.errstate(divide="ignore"):
        re = 4.0 * q / (math.pi * diameter * nu)
        f, _ = friction_factor(re, roughness / diameter)
    r = f * 8.0 * length / (math.pi ** 2 * GRAVITY * diameter ** 5)
    return r.reshape(np.shape(q)) if np.ndim(q) else float(r[0])


@dataclass(frozen=True, eq=False)
class ResistanceModel:
    """Per-pipe constants needed to evaluate G and F."""

    exponent: np.ndarray
    is_dw: np.ndarray
    hw_r: np.ndarray  # nan on DW pipes
    dw_k: np.ndarray  # 8 L / (pi^2 g D^5); nan on HW pipes
    dw_re_per_q: np.ndarray  # Re = dw_re_per_q * |q|
    dw_laminar_fq: np.ndarray  # f |q| in the laminar regime = 16 pi D nu
    dw_rel_rough: np.ndarray

    @classmethod
    def from_network(cls, network: Network, nu: float = NU_WATER):
        n_p = network.n_p
        length = network.pipe_array("length")
        diam = network.pipe_array("diameter")
        rough = network.pipe_array("roughness")
        is_dw = np.array([p.model is HeadlossModel.DARCY_WEISBACH for p in network.pipes], dtype=bool)
        hw_r = np.full(n_p, np.nan)
        if np.any(~is_dw):
            hw_r[~is_dw] = hw_resistance(length[~is_dw], diam[~is_dw], rough[~is_dw])
        nan = np.full(n_p, np.nan)
        dw_k, re_per_q, lam_fq, rel = nan.copy(), nan.copy(), nan.copy(), nan.copy()
        if np.any(is_dw):
            L, D = length[is_dw], diam[is_dw]
            dw_k[is_dw] = 8.0 * L / (math.pi ** 2 * GRAVITY * D ** 5)
            re_per_q[is_dw] = 4.0 / (math.pi * D * nu)
            lam_fq[is_dw] = 16.0 * math.pi * D * nu
            rel[is_dw] = rough[is_dw] / D
        exponent = np.where(is_dw, DW_EXPONENT, HW_EXPONENT)
        return cls(exponent, is_dw, hw_r, dw_k, re_per_q, lam_fq, rel)

    @property
    def n_p(self):
        return self.exponent.size

    def evaluate(self, q, idx=None):
        """Return (G, F) for the pipes ``idx`` (all pipes when None) at flows ``q[idx]``."""
        q = np.asarray(q, dtype=np.float64)
        if idx is None:
            idx = slice(None)
        aq = np.abs(q[idx])
        is_dw = self.is_dw[idx]
        G = np.empty_like(aq)
        F = np.empty_like(aq)

        hw = ~is_dw
        if np.any(hw):
            G[hw] = self.hw_r[idx][hw] * aq[hw] ** (HW_EXPONENT - 1.0)
            F[hw] = HW_EXPONENT * G[hw]
        if np.any(is_dw):
            a = aq[is_dw]
            k = self.dw_k[idx][is_dw]
            re = self.dw_re_per_q[idx][is_dw] * a
            lam_fq = self.dw_laminar_fq[idx][is_dw]
            fq = lam_fq.copy()  # f|q| in the laminar regime, finite at q = 0
            dfq = lam_fq.copy()  # (2 f + Re f') |q|, equal to f|q| when laminar
            nonlam = re >= RE_LAMINAR
            if np.any(nonlam):
                f, df = friction_factor(re[nonlam], self.dw_rel_rough[idx][is_dw][nonlam])
                fq[nonlam] = f * a[nonlam]
                dfq[nonlam] = (2.0 * f + re[nonlam] * df) * a[nonlam]
            G[is_dw] = k * fq
            F[is_dw] = k * dfq
        return G, F

    def headloss(self, q):
        """h_from - h_to for every pipe at flows q."""
        G, _ = self.evaluate(q)
        return G * np.asarray(q, dtype=np.float64)


@dataclass(eq=False)
class HeadlossState:
    """G and F diagonals maintained by one solver run, plus the regularization shift."""

    G: np.ndarray
    F: np.ndarray
    q_eval: np.ndarray  # flow at which each entry was last evaluated
    T: np.ndarray = None
    evals: int = 0  # number of per-pipe headloss evaluations so far
    _model: ResistanceModel = field(default=None, repr=False)

    def __post_init__(self):
        if self.T is None:
            self.T = np.zeros_like(self.F)

    @classmethod
    def initial(cls, model: ResistanceModel, q, subset=None):
        n = model.n_p
        state = cls(np.zeros(n), np.zeros(n), np.full(n, np.nan), _model=model)
        if subset is None:
            subset = np.arange(n)
        return update_GF(state, q, model, subset)

    @property
    def F_reg(self):
        return self.F + self.T


def update_GF(state: HeadlossState, q, model: ResistanceModel, subset) -> HeadlossState:
    """Recompute G and F at ``q`` on ``subset`` only (in place); returns ``state``."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        return state
    if subset.min() < 0 or subset.max() >= model.n_p:
        raise IndexOutOfRange(f"pipe index outside 0..{model.n_p - 1}")
    q = np.asarray(q, dtype=np.float64)
    G, F = model.evaluate(q, subset)
    state.G[subset] = G
    state.F[subset] = F
    state.q_eval[subset] = q[subset]
    state.evals += subset.size
    return state


def regularize(F, kappa_bar: float) -> np.ndarray:
    """Diagonal shift T >= 0 with max(F+T)/min(F+T) <= kappa_bar.

    T_j = max(0, max(F)/kappa_bar - F_j): entries already above the floor
    are left alone.
    """
    F = np.asarray(F, dtype=np.float64)
    if kappa_bar <= 1:
        raise ValueError("kappa_bar must exceed 1")
    if F.size == 0:
        return np.zeros(0)
    if np.any(F < 0):
        raise ValueError("F must be nonnegative")
    fmax = float(F.max())
    if fmax <= 0.0:
        raise AllZeroDiagonal("every diagonal entry is zero (all-zero-flow network?)")
    floor = max(fmax / kappa_bar, math.ulp(0.0))
    while fmax / floor > kappa_bar:  # guard against rounding in the division
        floor = math.nextafter(floor, math.inf)
    T = np.where(F < floor, floor - F, 0.0)
    # make sure rounding of F + T never dips below the floor
    low = (T > 0) & (F + T < floor)
    while np.any(low):
        T[low] = np.nextafter(T[low], np.inf)
        low = (T > 0) & (F + T < floor)
    return T
