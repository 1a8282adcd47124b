"""Multi-start derivative-free search for the largest CHSH value a model family allows.

Parameters are bounded to [-1, 1]. Each kernel row is a block of
parameters mapped to probabilities by ``theta**2 / sum(theta**2)``, so
every parameter vector yields a valid model and 0/1 rows are reachable.

One iteration visits one block and evaluates a few candidates for it:
every one-hot vertex of the block plus a Gaussian perturbation of the whole
block. The best candidate is kept if it improves the objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .chsh import chsh_value
from .core import Distribution, FiniteSpace, StochasticKernel
from .models import (
    DynamicalModel,
    GeneralizedModel,
    behavior_of_dynamical,
    behavior_of_generalized,
)

RNG_ALGORITHM = "numpy.PCG64 via SeedSequence.spawn"
DEFAULT_RESTARTS = 20
DEFAULT_ITERS = 500
DEFAULT_PATIENCE = 50
DEFAULT_MIN_IMPROVEMENT = 1e-10


def rows_from_params(theta: np.ndarray, k: int) -> np.ndarray:
    """Ratio-of-squares normalization; an all-zero row maps to uniform."""
    sq = np.asarray(theta, dtype=float).reshape(-1, k) ** 2
    tot = sq.sum(axis=1, keepdims=True)
    zero = tot[:, 0] == 0
    out = np.where(zero[:, None], 1.0 / k, sq / np.where(tot == 0, 1.0, tot))
    return out


@dataclass(frozen=True)
class Block:
    name: str
    start: int
    n_rows: int
    k: int

    @property
    def size(self) -> int:
        return self.n_rows * self.k


@dataclass
class ModelFamily:
    """Maps a flat parameter vector to a model; ``blocks`` are the kernel rows."""

    name: str
    slots: Sequence[tuple[str, int, int]]  # (table name, rows, outcomes per row)
    build: Callable[[dict[str, np.ndarray]], object]
    evaluate: Callable[[object], object]
    blocks: list[Block] = field(init=False)
    n_params: int = field(init=False)

    def __post_init__(self):
        self.blocks = []
        start = 0
        for name, n_rows, k in self.slots:
            for r in range(n_rows):
                self.blocks.append(Block(f"{name}[{r}]", start, 1, k))
                start += k
        self.n_params = start

    def tables(self, params: np.ndarray) -> dict[str, np.ndarray]:
        out, start = {}, 0
        for name, n_rows, k in self.slots:
            out[name] = rows_from_params(params[start:start + n_rows * k], k)
            start += n_rows * k
        return out

    def model(self, params: np.ndarray):
        return self.build(self.tables(params))

    def chsh(self, params: np.ndarray) -> float:
        return chsh_value(self.evaluate(self.model(params)))


def _bits(name, n):
    return FiniteSpace(name, tuple(str(i) for i in range(n)))


def local_family(n_global: int = 4, n_post: int = 2) -> ModelFamily:
    """DynamicalModel with |L| = n_global (trivial local pre-states), binary settings and outcomes."""
    g = _bits("g", n_global)
    A, B = FiniteSpace("A", ("-",)), FiniteSpace("B", ("-",))
    Ap, Bp = _bits("A'", n_post), _bits("B'", n_post)
    x, y, a, b = _bits("x", 2), _bits("y", 2), _bits("a", 2), _bits("b", 2)
    lam = (g, A, B)
    n = n_global
    slots = [
        ("rho0", 1, n),
        ("evolution", n, n),
        ("tA", n * 2, n_post),
        ("tB", n * 2, n_post),
        ("pA", 2 * n * n_post, 2),
        ("pB", 2 * n * n_post, 2),
    ]

    def build(t):
        return DynamicalModel(
            rho0=Distribution(lam, t["rho0"]),
            evolution=StochasticKernel(lam, lam, t["evolution"]),
            tA=StochasticKernel((g, A, B, x), (Ap,), t["tA"]),
            tB=StochasticKernel((g, A, B, y), (Bp,), t["tB"]),
            pA=StochasticKernel((x, g, Ap), (a,), t["pA"]),
            pB=StochasticKernel((y, g, Bp), (b,), t["pB"]),
        )

    return ModelFamily("local", slots, build, behavior_of_dynamical)


def mi_family(n_global: int = 4, n_post: int = 2) -> ModelFamily:
    """As :func:`local_family` but the pre-measurement distribution is chosen per (x, y)."""
    base = local_family(n_global, n_post)
    n = n_global
    slots = [("rho_xy", 4, n)] + [s for s in base.slots if s[0] not in ("rho0", "evolution")]

    def build(t):
        t = dict(t)
        t["rho0"] = np.full(n, 1.0 / n)
        t["evolution"] = np.eye(n)
        dm = base.build(t)
        x, y = dm.spaces["x"], dm.spaces["y"]
        lam = dm.rho_pre.spaces
        return GeneralizedModel(
            dm.rho0, dm.evolution, dm.tA, dm.tB, dm.pA, dm.pB,
            rho_pre_conditioned=StochasticKernel((x, y), lam, t["rho_xy"]),
        )

    return ModelFamily("mi", slots, build, behavior_of_generalized)


FAMILIES = {"local": local_family, "mi": mi_family}


@dataclass(frozen=True)
class RestartResult:
    restart: int
    params: np.ndarray
    value: float
    trace: tuple[float, ...]  # best-so-far after the initial point and each iteration


@dataclass(frozen=True)
class OptimizeResult:
    family: str
    best_params: np.ndarray
    best_value: float
    best_restart: int
    restarts: tuple[RestartResult, ...]
    seed: int
    iters: int

    @property
    def trace(self) -> list[tuple[int, int, float, float]]:
        """Rows (restart, iteration, restart best, global best so far)."""
        rows, best = [], -np.inf
        for r in self.restarts:
            for it, v in enumerate(r.trace):
                best = max(best, v)
                rows.append((r.restart, it, v, best))
        return rows


def _run_restart(family: ModelFamily, restart: int, seed: np.random.SeedSequence, iters: int,
                 patience: int, min_improvement: float, sigma: float) -> RestartResult:
    rng = np.random.default_rng(seed)
    params = rng.uniform(-1.0, 1.0, family.n_params)
    value = family.chsh(params)
    trace = [value]
    last_gain_at, ref = 0, value
    for it in range(1, iters + 1):
        blk = family.blocks[int(rng.integers(len(family.blocks)))]
        sl = slice(blk.start, blk.start + blk.size)
        candidates = list(np.eye(blk.k))
        candidates.append(np.clip(params[sl] + sigma * rng.standard_normal(blk.size), -1.0, 1.0))
        best_c, best_v = None, value
        for c in candidates:
            trial = params.copy()
            trial[sl] = c
            v = family.chsh(trial)
            if v > best_v:
                best_c, best_v = trial, v
        if best_c is not None:
            params, value = best_c, best_v
        trace.append(value)
        if value - ref >= min_improvement:
            last_gain_at, ref = it, value
        elif it - last_gain_at >= patience:
            break
    return RestartResult(restart, params, value, tuple(trace))


def optimize_chsh(family: ModelFamily | str, restarts: int = DEFAULT_RESTARTS, iters: int = DEFAULT_ITERS,
                  seed: int = 0, patience: int = DEFAULT_PATIENCE,
                  min_improvement: float = DEFAULT_MIN_IMPROVEMENT, sigma: float = 0.3,
                  executor=None) -> OptimizeResult:
    """Maximize CHSH over a family.

    Restart ``i`` uses the ``i``-th child of ``SeedSequence(seed)``, so
    restarts are independent and may be mapped over any ``executor``.
    Ties between restarts go to the lowest restart index.
    """
    if isinstance(family, str):
        family = FAMILIES[family]()
    if restarts < 1:
        raise ValueError("need at least one restart")
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    args = [(family, i, s, iters, patience, min_improvement, sigma) for i, s in enumerate(seeds)]
    if executor is None:
        results = [_run_restart(*a) for a in args]
    else:
        results = list(executor.map(_run_restart, *zip(*args)))
    results.sort(key=lambda r: r.restart)
    best = max(results, key=lambda r: (r.value, -r.restart))
    return OptimizeResult(family.name, best.params, best.value, best.restart, tuple(results), seed, iters)
