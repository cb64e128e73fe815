"""Small synthetic networks for tests and benchmarks.

Every builder takes ``model`` so the same topology can be run with either
headloss law. DW pipes use 0.26 mm absolute roughness (cast iron).
"""

from __future__ import annotations

import numpy as np

from wdnsolve.network import FixedHead, HeadlossModel, Junction, Network, Pipe

HW_C = 100.0
DW_ROUGHNESS = 0.26e-3


def _pipe(pid, a, b, length, diameter, model, c=HW_C):
    model = HeadlossModel(model) if not isinstance(model, HeadlossModel) else model
    rough = c if model is HeadlossModel.HAZEN_WILLIAMS else DW_ROUGHNESS
    return Pipe(pid, a, b, float(length), float(diameter), rough, model)


def single_pipe(model=HeadlossModel.HAZEN_WILLIAMS) -> Network:
    return Network.build(
        [Junction("J1", 0.01)], [FixedHead("R", 50.0)],
        [_pipe("P1", "R", "J1", 1000.0, 0.3, model)], name="single_pipe")


def parallel_pair(model=HeadlossModel.HAZEN_WILLIAMS) -> Network:
    return Network.build(
        [Junction("J1", 0.02)], [FixedHead("R", 50.0)],
        [_pipe("P1", "R", "J1", 1000.0, 0.3, model),
         _pipe("P2", "R", "J1", 800.0, 0.2, model)], name="parallel_pair")


def triangle(model=HeadlossModel.HAZEN_WILLIAMS) -> Network:
    """Reservoir feeding a three-junction ring: 4 pipes, one loop."""
    return Network.build(
        [Junction("A", 0.01), Junction("B", 0.015), Junction("C", 0.02)],
        [FixedHead("R", 60.0)],
        [_pipe("P1", "R", "A", 500.0, 0.35, model),
         _pipe("P2", "A", "B", 400.0, 0.25, model),
         _pipe("P3", "B", "C", 300.0, 0.2, model),
         _pipe("P4", "C", "A", 450.0, 0.3, model)], name="triangle")


def square_loop(model=HeadlossModel.HAZEN_WILLIAMS) -> Network:
    """R - a - b - c - R: one loop through the reservoir."""
    return Network.build(
        [Junction("a", 0.01), Junction("b", 0.02), Junction("c", 0.01)],
        [FixedHead("R", 40.0)],
        [_pipe("P1", "R", "a", 300.0, 0.25, model),
         _pipe("P2", "a", "b", 300.0, 0.2, model),
         _pipe("P3", "b", "c", 300.0, 0.2, model),
         _pipe("P4", "c", "R", 300.0, 0.25, model)], name="square_loop")


def branched(model=HeadlossModel.HAZEN_WILLIAMS) -> Network:
    """A tree: no loops at all."""
    return Network.build(
        [Junction("A", 0.01), Junction("B", 0.005), Junction("C", 0.007)],
        [FixedHead("R", 45.0)],
        [_pipe("P1", "R", "A", 400.0, 0.3, model),
         _pipe("P2", "A", "B", 250.0, 0.15, model),
         _pipe("P3", "A", "C", 250.0, 0.2, model)], name="branched")


def grid(nx=10, ny=10, model=HeadlossModel.HAZEN_WILLIAMS, seed=7, demand=5e-4,
         head=100.0, zero_demand_corner=False) -> Network:
    """nx-by-ny lattice, reservoir at node (0, 0), every other node a junction.

    Pipes are 100 m long with diameters drawn (seeded) from a small
    catalogue. ``zero_demand_corner`` sets the demand of the far corner to
    zero so some pipes carry almost no flow.
    """
    rng = np.random.default_rng(seed)
    catalogue = np.array([0.1, 0.125, 0.15, 0.2, 0.25, 0.3])

    def name(i, j):
        return "R" if (i, j) == (0, 0) else f"N{i}_{j}"

    junctions, pipes = [], []
    for i in range(nx):
        for j in range(ny):
            if (i, j) == (0, 0):
                continue
            dem = 0.0 if zero_demand_corner and (i, j) == (nx - 1, ny - 1) else demand
            junctions.append(Junction(name(i, j), dem))
    k = 0
    for i in range(nx):
        for j in range(ny):
            for di, dj in ((1, 0), (0, 1)):
                a, b = i + di, j + dj
                if a < nx and b < ny:
                    k += 1
                    length = 100.0 * rng.uniform(0.8, 1.2)
                    pipes.append(_pipe(f"P{k}", name(i, j), name(a, b), length,
                                       rng.choice(catalogue), model))
    coords = {name(i, j): (100.0 * i, 100.0 * j) for i in range(nx) for j in range(ny)}
    return Network.build(junctions, [FixedHead("R", head)], pipes, coordinates=coords,
                         name=f"grid{nx}x{ny}")


def random_network(seed, n_junctions=None, n_chords=None, n_fixed=None,
                   model=HeadlossModel.HAZEN_WILLIAMS, max_pipes=500) -> Network:
    """Random connected network: a random spanning tree plus random chords.

    Some chords may join two fixed-head nodes or repeat an existing pair
    (parallel pipes), so degenerate cases turn up in large samples.
    """
    rng = np.random.default_rng(seed)
    n_fixed = int(rng.integers(1, 4)) if n_fixed is None else n_fixed
    if n_junctions is None:
        n_junctions = int(rng.integers(1, max_pipes // 2))
    if n_chords is None:
        n_chords = int(rng.integers(0, max(1, max_pipes - n_junctions - n_fixed + 1)))
    n_total = n_junctions + n_fixed
    names = [f"R{i}" for i in range(n_fixed)] + [f"J{i}" for i in range(n_junctions)]
    order = rng.permutation(n_total)
    edges = []
    for k in range(1, n_total):
        edges.append((int(order[rng.integers(0, k)]), int(order[k])))
    for _ in range(n_chords):
        a, b = rng.choice(n_total, size=2, replace=False)
        edges.append((int(a), int(b)))
    edges = edges[:max_pipes]
    rng.shuffle(edges)
    junctions = [Junction(n, float(rng.uniform(0.0, 0.01))) for n in names[n_fixed:]]
    fixed = [FixedHead(n, float(rng.uniform(40.0, 80.0))) for n in names[:n_fixed]]
    pipes = []
    for k, (a, b) in enumerate(edges):
        if rng.random() < 0.5:
            a, b = b, a
        pipes.append(_pipe(f"P{k}", names[a], names[b], rng.uniform(50.0, 500.0),
                           rng.choice([0.1, 0.15, 0.2, 0.3, 0.4]), model))
    return Network.build(junctions, fixed, pipes, name=f"random{seed}")


SMALL_FIXTURES = {
    "single_pipe": single_pipe,
    "parallel_pair": parallel_pair,
    "triangle": triangle,
    "square_loop": square_loop,
    "grid10": grid,
}
