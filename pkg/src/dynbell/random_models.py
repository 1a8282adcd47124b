"""Seeded random models for property tests and sweeps."""

from __future__ import annotations

import numpy as np

from .core import Distribution, FiniteSpace, StochasticKernel, space
from .models import DynamicalModel, GeneralizedModel


def random_rows(rng: np.random.Generator, n_rows: int, k: int, p_det: float = 0.2) -> np.ndarray:
    """Dirichlet rows, with a fraction replaced by 0/1 rows to hit polytope vertices."""
    rows = rng.dirichlet(np.full(k, 0.7), size=n_rows)
    det = rng.random(n_rows) < p_det
    if det.any():
        rows[det] = np.eye(k)[rng.integers(k, size=int(det.sum()))]
    return rows


def random_kernel(rng, inputs, outputs, p_det: float = 0.2) -> StochasticKernel:
    inputs, outputs = tuple(inputs), tuple(outputs)
    n_rows = int(np.prod([s.size for s in inputs]))
    k = int(np.prod([s.size for s in outputs]))
    return StochasticKernel(inputs, outputs, random_rows(rng, n_rows, k, p_det))


def random_distribution(rng, spaces) -> Distribution:
    spaces = (spaces,) if isinstance(spaces, FiniteSpace) else tuple(spaces)
    k = int(np.prod([s.size for s in spaces]))
    return Distribution(spaces, random_rows(rng, 1, k, p_det=0.1)[0])


def _sizes(rng, max_size: int, n: int) -> list[int]:
    return [int(v) for v in rng.integers(1, max_size + 1, size=n)]


def random_dynamical_model(rng: np.random.Generator, max_size: int = 4, binary: bool = False) -> DynamicalModel:
    """Random model with hidden spaces of size 1..max_size.

    ``binary`` fixes two settings and two outcomes per party (CHSH shape).
    """
    ng, na, nb, nap, nbp, ng0 = _sizes(rng, max_size, 6)
    if binary:
        nx = ny = no_a = no_b = 2
    else:
        nx, ny, no_a, no_b = _sizes(rng, min(max_size, 3), 4)
        nx, ny, no_a, no_b = max(nx, 1), max(ny, 1), max(no_a, 2), max(no_b, 2)
    g, A, B = space("g", ng), space("A", na), space("B", nb)
    Ap, Bp = space("A'", nap), space("B'", nbp)
    x, y = space("x", nx), space("y", ny)
    a, b = space("a", no_a), space("b", no_b)
    init = (space("g0", ng0), space("A0", na), space("B0", nb))
    return DynamicalModel(
        rho0=random_distribution(rng, init),
        evolution=random_kernel(rng, init, (g, A, B)),
        tA=random_kernel(rng, (g, A, B, x), (Ap,)),
        tB=random_kernel(rng, (g, A, B, y), (Bp,)),
        pA=random_kernel(rng, (x, g, Ap), (a,)),
        pB=random_kernel(rng, (y, g, Bp), (b,)),
    )


def random_perturbed_model(rng: np.random.Generator, max_size: int = 3, invisible: bool = False) -> GeneralizedModel:
    """Random global-perturbation model.

    With ``invisible`` the Bob response is constant on random blocks of g and
    Alice's x-dependence only moves mass inside blocks, so the base measure
    on classes is x-independent by construction.
    """
    ng = int(rng.integers(2, max_size + 2))
    na, nb, nap, nbp = _sizes(rng, max_size, 4)
    g, A, B = space("g", ng), space("A", na), space("B", nb)
    Ap, Bp = space("A'", nap), space("B'", nbp)
    x, y, a, b = space("x", 2), space("y", 2), space("a", 2), space("b", 2)
    pB = random_kernel(rng, (y, g, Bp), (b,))
    tA = random_kernel(rng, (g, A, B, x), (Ap, g))
    if invisible:
        labels = rng.integers(0, max(1, ng - 1), size=ng)
        blocks = [np.flatnonzero(labels == c) for c in np.unique(labels)]
        t = pB.table.copy()
        for blk in blocks:
            t[:, blk] = t[:, blk[:1]]
        pB = StochasticKernel(pB.inputs, pB.outputs, t)
        # Class masses from x = 0, redistributed within each block per x.
        ta = tA.table.copy()
        base = ta[:, :, :, 0].sum(axis=3)  # (g, A, B, g')
        for xi in range(2):
            for blk in blocks:
                mass = base[..., blk].sum(axis=-1, keepdims=True)
                within = rng.dirichlet(np.ones(len(blk)), size=base.shape[:3])
                marg = mass * within  # (g, A, B, |blk|)
                split = rng.dirichlet(np.ones(nap), size=base.shape[:3] + (len(blk),))
                ta[:, :, :, xi][..., blk] = np.moveaxis(marg[..., None] * split, -1, 3)
        tA = StochasticKernel(tA.inputs, tA.outputs, ta)
    init = (g, A, B)
    return GeneralizedModel(
        rho0=random_distribution(rng, init),
        evolution=random_kernel(rng, init, init),
        tA=tA,
        tB=random_kernel(rng, (g, A, B, y), (Bp,)),
        pA=random_kernel(rng, (x, g, Ap), (a,)),
        pB=pB,
        global_mode="perturbed",
    )
