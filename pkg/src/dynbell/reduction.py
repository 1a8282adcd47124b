"""Absorb measurement dynamics into static responses, and reduce perturbed
global variables back to the read-only base case."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    TOL_CHECK,
    DynbellError,
    FiniteSpace,
    StochasticKernel,
    product_space,
)
from .models import (
    DynamicalModel,
    GeneralizedModel,
    StaticBellModel,
    behavior_of_dynamical,
    behavior_of_generalized,
    behavior_of_static,
)

NEAR_TIE = 1e-9


class EquivalenceAssertionError(DynbellError, AssertionError):
    """Reduced and original behaviors disagree: an implementation fault."""


class PreconditionError(DynbellError, ValueError):
    pass


class ReductionRefused(DynbellError):
    def __init__(self, message: str, witness: Optional[dict] = None):
        super().__init__(message)
        self.witness = witness or {}


class NearTieWarning(UserWarning):
    pass


def absorb_alice(m: DynamicalModel) -> StochasticKernel:
    """Q_A(a | x, g, A, B) = sum_A' tA(A'|g,A,B,x) pA(a|x,g,A')."""
    s = m.spaces
    # g A B x A' a
    q = np.einsum(m.tA.table, [0, 1, 2, 3, 4], m.pA.table, [3, 0, 4, 5], [3, 0, 1, 2, 5])
    return StochasticKernel((s["x"], s["g"], s["A"], s["B"]), (s["a"],), q)


def absorb_bob(m: DynamicalModel) -> StochasticKernel:
    s = m.spaces
    q = np.einsum(m.tB.table, [0, 1, 2, 3, 4], m.pB.table, [3, 0, 4, 5], [3, 0, 1, 2, 5])
    return StochasticKernel((s["y"], s["g"], s["A"], s["B"]), (s["b"],), q)


def row_normalization_deviation(k: StochasticKernel) -> float:
    sums = k.table.sum(axis=tuple(range(k.n_in, k.n_in + k.n_out)))
    return float(np.max(np.abs(sums - 1.0)))


def reduce_to_static(m: DynamicalModel, tol: float = TOL_CHECK) -> StaticBellModel:
    """Static model (rho_pre, Q_A, Q_B) with the same behavior as ``m``.

    The behavior equality is checked on every call and a discrepancy above
    ``tol`` raises :class:`EquivalenceAssertionError`.
    """
    sm = StaticBellModel(m.rho_pre, absorb_alice(m), absorb_bob(m))
    gap = behavior_of_static(sm).max_diff(behavior_of_dynamical(m))
    if not gap <= tol:
        raise EquivalenceAssertionError(f"static and dynamical behaviors differ by {gap:.3e}")
    return sm


def _require_plain(gm: GeneralizedModel, what: str):
    if gm.distant:
        raise PreconditionError(f"{what}: model declares distant-setting arguments {sorted(gm.distant)}")
    if gm.rho_pre_conditioned is not None:
        raise PreconditionError(f"{what}: model declares a setting-conditioned rho_pre")


def to_dynamical(gm: GeneralizedModel) -> DynamicalModel:
    """Inverse of :meth:`GeneralizedModel.from_dynamical` for read-only models."""
    _require_plain(gm, "to_dynamical")
    if gm.global_mode != "read-only":
        raise PreconditionError(f"to_dynamical: global mode is {gm.global_mode!r}")
    return DynamicalModel(gm.rho0, gm.evolution, gm.tA, gm.tB, gm.pA, gm.pB)


def clone_global_relabel(gm: GeneralizedModel) -> DynamicalModel:
    """Fold Alice's private copy of the global variable into her local variable.

    The new local space is (g_A, A); the shared variable is Bob's copy,
    which nobody perturbs.
    """
    _require_plain(gm, "clone_global_relabel")
    if gm.global_mode == "read-only":
        return to_dynamical(gm)
    if gm.global_mode != "cloned":
        raise PreconditionError("clone_global_relabel: Alice's kernel writes the global copy that Bob reads")
    s = gm.spaces
    g, A, B, Ap = s["g"], s["A"], s["B"], s["A'"]
    gA = FiniteSpace(f"{g.name}_A", g.elements)
    At = product_space(f"({gA.name},{A.name})", (gA, A))
    Apt = product_space(f"({Ap.name},{gA.name}')", (Ap, gA))
    ng, na, nb = g.size, A.size, B.size
    nin = gm.evolution.n_in
    # E(g, (gA, A), B | init) = E(g, A, B | init) [gA == g]
    ev = np.einsum(gm.evolution.table, list(range(nin)) + [nin, nin + 1, nin + 2],
                   np.eye(ng), [nin, nin + 3],
                   list(range(nin)) + [nin, nin + 3, nin + 1, nin + 2])
    ev = ev.reshape(gm.evolution.table.shape[:nin] + (ng, ng * na, nb))
    # tA reads Alice's copy gA.
    ta = np.broadcast_to(gm.tA.table[None], (ng,) + gm.tA.table.shape)
    ta = ta.reshape(ng, ng * na, nb, s["x"].size, Ap.size * ng)
    tb = np.broadcast_to(gm.tB.table[:, None], (ng, ng) + gm.tB.table.shape[1:])
    tb = tb.reshape(ng, ng * na, nb, s["y"].size, s["B'"].size)
    # pA(a | x, g, (A', gA')) = pA(a | x, gA', A')
    pa = np.broadcast_to(np.swapaxes(gm.pA.table, 1, 2)[:, None], (s["x"].size, ng) + (Ap.size, ng, s["a"].size))
    pa = pa.reshape(s["x"].size, ng, Ap.size * ng, s["a"].size)
    return DynamicalModel(
        rho0=gm.rho0,
        evolution=StochasticKernel(gm.evolution.inputs, (g, At, B), ev),
        tA=StochasticKernel((g, At, B, s["x"]), (Apt,), ta),
        tB=StochasticKernel((g, At, B, s["y"]), (s["B'"],), tb),
        pA=StochasticKernel((s["x"], g, Apt), (s["a"],), pa),
        pB=gm.pB,
    )


@dataclass(frozen=True, eq=False)
class QuotientPartition:
    """Classes of global states that Bob's response cannot tell apart.

    ``fingerprints[i]`` is the flattened response vector of class ``i``'s
    first member; ``near_ties`` lists (i, j, deviation) pairs of states whose
    fingerprints differ by more than the merge tolerance but less than 1e-9.
    """

    base: FiniteSpace
    classes: tuple[tuple[int, ...], ...]
    fingerprints: np.ndarray = field(repr=False)
    near_ties: tuple = ()

    def class_of(self) -> np.ndarray:
        out = np.empty(self.base.size, dtype=int)
        for u, members in enumerate(self.classes):
            out[list(members)] = u
        return out

    def labels(self) -> list[list[str]]:
        return [[self.base.elements[i] for i in c] for c in self.classes]

    def fingerprint_rank(self, tol: float = 1e-10) -> int:
        return int(np.linalg.matrix_rank(self.fingerprints, tol=tol))

    @property
    def separating(self) -> bool:
        """True when class fingerprints are linearly independent."""
        return self.fingerprint_rank() == len(self.classes)


def fingerprint_partition(gm: GeneralizedModel, tol: float = TOL_CHECK) -> QuotientPartition:
    ft = gm.full_tables()
    fp = np.moveaxis(np.asarray(ft.pB), 2, 0).reshape(ft.pB.shape[2], -1)
    reps: list[int] = []
    classes: list[list[int]] = []
    ties = []
    for i in range(fp.shape[0]):
        for u, r in enumerate(reps):
            dev = float(np.max(np.abs(fp[i] - fp[r])))
            if dev <= tol:
                classes[u].append(i)
                break
            if dev < NEAR_TIE:
                ties.append((r, i, dev))
        else:
            reps.append(i)
            classes.append([i])
    for r, i, dev in ties:
        warnings.warn(
            f"global states {gm.spaces['g'].elements[r]!r} and {gm.spaces['g'].elements[i]!r} "
            f"have fingerprints {dev:.2e} apart; kept in separate classes",
            NearTieWarning,
            stacklevel=2,
        )
    return QuotientPartition(
        gm.spaces["g"], tuple(tuple(c) for c in classes), fp[reps], tuple(ties)
    )


@dataclass(frozen=True)
class BaseMeasureReport:
    holds: bool
    max_deviation: float
    witness: Optional[dict]


def class_masses(gm: GeneralizedModel, p: QuotientPartition) -> np.ndarray:
    """Mass Bob's readable global variable lands in each class, axes (x, y, g, A, B, u)."""
    M = np.asarray(gm.full_tables().bob_global_kernel())
    onehot = np.eye(len(p.classes))[p.class_of()]  # (g', u)
    return M @ onehot


def check_base_measure_independence(gm: GeneralizedModel, p: QuotientPartition, tol: float = TOL_CHECK) -> BaseMeasureReport:
    """Is the class-level distribution of Alice's global output x-independent?"""
    Mt = class_masses(gm, p)
    spread = Mt.max(axis=0) - Mt.min(axis=0)  # (y, g, A, B, u)
    dev = float(spread.max())
    witness = None
    if dev > tol:
        yi, gi, ai, bi, u = np.unravel_index(int(np.argmax(spread)), spread.shape)
        col = Mt[:, yi, gi, ai, bi, u]
        s = gm.spaces
        witness = {
            "g": s["g"].elements[gi],
            "A": s["A"].elements[ai],
            "B": s["B"].elements[bi],
            "y": s["y"].elements[yi],
            "class": p.labels()[u],
            "x_pair": [s["x"].elements[int(np.argmax(col))], s["x"].elements[int(np.argmin(col))]],
            "masses": [float(col.max()), float(col.min())],
        }
    return BaseMeasureReport(dev <= tol, dev, witness)


def quotient_reduce(gm: GeneralizedModel, tol: float = TOL_CHECK) -> DynamicalModel:
    """Base-case model with global variable := class u and Alice's local := (A', v).

    The original global state moves into Alice's pre-measurement variable
    so that tA and tB keep reading it. Refuses when the class masses depend
    on x.
    """
    _require_plain(gm, "quotient_reduce")
    if gm.global_mode != "perturbed":
        return clone_global_relabel(gm)
    p = fingerprint_partition(gm, tol)
    bm = check_base_measure_independence(gm, p, tol)
    if not bm.holds:
        raise ReductionRefused(
            f"class masses depend on Alice's setting (deviation {bm.max_deviation:.3e})", bm.witness
        )
    s = gm.spaces
    g, A, B, Ap, x = s["g"], s["A"], s["B"], s["A'"], s["x"]
    ng, na, nb, nap, nx = g.size, A.size, B.size, Ap.size, x.size
    U = len(p.classes)
    V = max(len(c) for c in p.classes)
    Uspace = FiniteSpace(f"{g.name}~", tuple("|".join(c) for c in p.labels()))
    Vspace = FiniteSpace("v", tuple(f"v{i}" for i in range(V)))
    At = product_space(f"({g.name},{A.name})", (g, A))
    Apt = product_space(f"({Ap.name},v)", (Ap, Vspace))
    # member[u, v]: global state at fiber v of class u; padded with the class head.
    member = np.array([[c[v] if v < len(c) else c[0] for v in range(V)] for c in p.classes])
    valid = np.array([[v < len(c) for v in range(V)] for c in p.classes])

    Mt = class_masses(gm, p)[:, 0]  # (x, g, A, B, u)
    M0 = Mt[0]
    nin = gm.evolution.n_in
    ev = gm.evolution.table[..., None] * M0  # (init, g, A, B, u)
    ev = np.moveaxis(ev, -1, nin).reshape(gm.evolution.table.shape[:nin] + (U, ng * na, nb))

    ta = np.asarray(gm.tA.table)  # (g, A, B, x, A', g')
    # joint[g, A, B, x, A', u, v]: prob. Alice ends at (A', member[u, v]).
    joint = ta[..., member] * valid
    mass = np.moveaxis(Mt, 0, 3)  # (g, A, B, x, u)
    cond = np.empty_like(joint)
    for u in range(U):
        m = mass[..., u]
        pos = m > 0
        # Unreachable (state, class) rows still need a valid distribution.
        fallback = np.zeros((nap, V))
        fallback[0, 0] = 1.0
        cond[..., u, :] = np.where(
            pos[..., None, None], joint[..., u, :] / np.where(pos, m, 1.0)[..., None, None], fallback
        )
    # (g, A, B, x, A', u, v) -> (u, g, A, B, x, A', v)
    ta_red = np.moveaxis(cond, 5, 0).reshape(U, ng * na, nb, nx, nap * V)

    tb = gm.tB.table
    tb_red = np.broadcast_to(tb, (U,) + tb.shape).reshape(U, ng * na, nb, *tb.shape[3:])
    pa = gm.pA.table  # (x, g, A', a)
    pa_red = pa[:, member]  # (x, u, v, A', a)
    pa_red = np.swapaxes(pa_red, 2, 3).reshape(nx, U, nap * V, pa.shape[-1])
    pb = gm.pB.table  # (y, g, B', b)
    pb_red = pb[:, member[:, 0]]

    return DynamicalModel(
        rho0=gm.rho0,
        evolution=StochasticKernel(gm.evolution.inputs, (Uspace, At, B), ev),
        tA=StochasticKernel((Uspace, At, B, x), (Apt,), ta_red),
        tB=StochasticKernel((Uspace, At, B, s["y"]), (s["B'"],), tb_red),
        pA=StochasticKernel((x, Uspace, Apt), (s["a"],), pa_red),
        pB=StochasticKernel((s["y"], Uspace, s["B'"]), (s["b"],), pb_red),
    )


@dataclass(frozen=True, eq=False)
class ReductionResult:
    dynamical: DynamicalModel
    static: StaticBellModel
    partition: Optional[QuotientPartition]
    discrepancy: float


def reduce_generalized(gm: GeneralizedModel, tol: float = TOL_CHECK) -> ReductionResult:
    """Route a flag-free generalized model to the matching reduction, then to static form."""
    partition = fingerprint_partition(gm, tol) if gm.global_mode == "perturbed" else None
    dm = quotient_reduce(gm, tol)
    sm = reduce_to_static(dm, tol)
    gap = behavior_of_static(sm).max_diff(behavior_of_generalized(gm))
    if not gap <= tol:
        raise EquivalenceAssertionError(f"reduced behavior differs from the original by {gap:.3e}")
    return ReductionResult(dm, sm, partition, gap)
