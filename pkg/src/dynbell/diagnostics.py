"""Normalization, no-signaling, measurement-independence and parameter-independence
checks, and the classifier that combines them."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .core import TOL_CHECK, Behavior, Distribution, StochasticKernel, marginalize_behavior
from .models import GeneralizedModel, behavior_of_generalized
from .reduction import (
    QuotientPartition,
    check_base_measure_independence,
    fingerprint_partition,
    reduce_generalized,
)

BELL_LOCAL = "bell-local-reducible"
VIOLATES_PI = "violates-ontological-PI"
VIOLATES_MI = "violates-measurement-independence"
VIOLATES_LOCALITY = "violates-locality-explicit"
DEGENERATE = "degenerate-separation"
CLASSIFICATIONS = (BELL_LOCAL, VIOLATES_PI, VIOLATES_MI, VIOLATES_LOCALITY, DEGENERATE)


@dataclass(frozen=True)
class CheckReport:
    name: str
    passes: bool
    max_deviation: float
    witness: Optional[dict] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _labels(spaces, idx) -> dict:
    return {s.name: s.elements[int(i)] for s, i in zip(spaces, idx)}


def _spread(arr: np.ndarray, axis: int):
    """Max-minus-min along ``axis`` and the location of its maximum."""
    spread = arr.max(axis=axis) - arr.min(axis=axis)
    if spread.size == 0:
        return 0.0, None
    loc = np.unravel_index(int(np.argmax(spread)), spread.shape)
    return float(spread[loc]), loc


def check_no_signaling(b: Behavior, tol: float = TOL_CHECK) -> CheckReport:
    """Alice's marginal must not move with y, Bob's must not move with x."""
    pa = marginalize_behavior(b, "A")  # (a, x, y)
    pb = marginalize_behavior(b, "B")  # (b, x, y)
    dev_a, loc_a = _spread(pa, 2)
    dev_b, loc_b = _spread(pb, 1)
    witness = None
    if max(dev_a, dev_b) > tol:
        if dev_a >= dev_b:
            ai, xi = loc_a
            col = pa[ai, xi]
            witness = {"party": "A", "a": b.a.elements[ai], "x": b.x.elements[xi],
                       "y_pair": [b.y.elements[int(np.argmax(col))], b.y.elements[int(np.argmin(col))]]}
        else:
            bi, yi = loc_b
            col = pb[bi, :, yi]
            witness = {"party": "B", "b": b.b.elements[bi], "y": b.y.elements[yi],
                       "x_pair": [b.x.elements[int(np.argmax(col))], b.x.elements[int(np.argmin(col))]]}
    dev = max(dev_a, dev_b)
    return CheckReport("no-signaling", dev <= tol, dev, witness,
                       {"alice_y_dependence": dev_a, "bob_x_dependence": dev_b})


def check_normalization(b: Behavior, tol: float = TOL_CHECK) -> CheckReport:
    sums = b.table.sum(axis=(0, 1))
    dev = float(np.max(np.abs(sums - 1.0)))
    neg = float(min(0.0, b.table.min()))
    witness = None
    if dev > tol or neg < 0:
        xi, yi = np.unravel_index(int(np.argmax(np.abs(sums - 1.0))), sums.shape)
        witness = {"x": b.x.elements[xi], "y": b.y.elements[yi], "sum": float(sums[xi, yi])}
    return CheckReport("normalization", dev <= tol and neg >= 0, max(dev, -neg), witness)


def check_measurement_independence(gm: GeneralizedModel, tol: float = TOL_CHECK) -> CheckReport:
    """rho_pre(. | x, y) must be one distribution for all setting pairs."""
    s = gm.spaces
    rho = np.asarray(gm.full_tables().rho)
    nx, ny = rho.shape[:2]
    flat = rho.reshape(nx * ny, -1)
    diff = np.abs(flat[:, None, :] - flat[None, :, :])
    dev = float(diff.max())
    tv = 0.5 * diff.sum(axis=2)
    i, j = np.unravel_index(int(np.argmax(tv)), tv.shape)
    pair = lambda k: [s["x"].elements[k // ny], s["y"].elements[k % ny]]  # noqa: E731
    witness = None
    if dev > tol:
        witness = {"settings": [pair(i), pair(j)], "total_variation": float(tv[i, j])}
    warnings_ = []
    if gm.measurement_dependent and dev <= tol:
        warnings_.append("rho_pre declared setting-conditioned but is constant across settings")
    return CheckReport("measurement-independence", dev <= tol, dev, witness,
                       {"declared": gm.measurement_dependent, "max_total_variation": float(tv.max()),
                        "warnings": warnings_})


# Axis holding the distant setting in each table, when flagged.
_DISTANT_AXIS = {"tA": 4, "tB": 4, "pA": 3, "pB": 3}


def check_explicit_locality(gm: GeneralizedModel, tol: float = TOL_CHECK) -> CheckReport:
    """Numerically test every declared distant-setting argument.

    A declared argument that never changes the table is reported as a
    warning, not a violation.
    """
    deps = {}
    witness = None
    worst = 0.0
    for name in sorted(gm.distant):
        k: StochasticKernel = getattr(gm, name)
        dev, loc = _spread(np.asarray(k.table), _DISTANT_AXIS[name])
        deps[name] = dev
        if dev > worst:
            worst = dev
            spaces = [sp for i, sp in enumerate(k.inputs + k.outputs) if i != _DISTANT_AXIS[name]]
            witness = {"table": name, **_labels(spaces, loc)}
    violating = sorted(n for n, d in deps.items() if d > tol)
    inert = sorted(n for n, d in deps.items() if d <= tol)
    warnings_ = [f"{n} declares the distant setting but does not depend on it" for n in inert]
    return CheckReport("explicit-locality", not violating, worst, witness if violating else None,
                       {"declared": sorted(gm.distant), "dependent": violating, "warnings": warnings_})


def strip_inert(gm: GeneralizedModel, tol: float = TOL_CHECK) -> GeneralizedModel:
    """Drop declared-but-unused setting arguments (distant settings, constant conditioning)."""
    changes = {}
    keep = set(gm.distant)
    for name in sorted(gm.distant):
        k: StochasticKernel = getattr(gm, name)
        ax = _DISTANT_AXIS[name]
        dev, _ = _spread(np.asarray(k.table), ax)
        if dev <= tol:
            inputs = k.inputs[:ax] + k.inputs[ax + 1:]
            changes[name] = StochasticKernel(inputs, k.outputs, np.take(k.table, 0, axis=ax))
            keep.discard(name)
    if gm.rho_pre_conditioned is not None:
        rho = np.asarray(gm.rho_pre_conditioned.table)
        if float(np.max(rho.max(axis=(0, 1)) - rho.min(axis=(0, 1)))) <= tol:
            lam = gm.rho_pre_conditioned.outputs
            changes["rho0"] = Distribution(lam, rho[0, 0])
            changes["evolution"] = StochasticKernel.identity(lam)
            changes["rho_pre_conditioned"] = None
    if not changes:
        return gm
    return replace(gm, distant=frozenset(keep), **changes)


def ontic_bob_response(gm: GeneralizedModel) -> np.ndarray:
    """F(b | x, y, g, A, B, B'): Bob's response at a fixed ontic state, averaged over
    the global value Alice's measurement leaves behind. Axes (x, y, g, A, B, B', b)."""
    ft = gm.full_tables()
    M = np.asarray(ft.bob_global_kernel())  # (x, y, g, A, B, k)
    return np.einsum(M, [0, 1, 2, 3, 4, 5], np.asarray(ft.pB), [0, 1, 5, 6, 7], [0, 1, 2, 3, 4, 6, 7])


def check_ontological_pi(gm: GeneralizedModel, tol: float = TOL_CHECK) -> CheckReport:
    s = gm.spaces
    F = ontic_bob_response(gm)
    dev, loc = _spread(F, 0)
    witness = None
    if dev > tol:
        yi, gi, ai, bi, bpi, oi = loc
        col = F[:, yi, gi, ai, bi, bpi, oi]
        witness = {
            **_labels((s["y"], s["g"], s["A"], s["B"], s["B'"], s["b"]), loc),
            "x_pair": [s["x"].elements[int(np.argmax(col))], s["x"].elements[int(np.argmin(col))]],
            "values": [float(col.max()), float(col.min())],
        }
    explicit = sorted(set(gm.distant) & {"tB", "pB"})
    return CheckReport("ontological-PI", dev <= tol, dev, witness,
                       {"explicit_distant_arguments": explicit})


def check_base_measure(gm: GeneralizedModel, p: Optional[QuotientPartition] = None, tol: float = TOL_CHECK) -> CheckReport:
    p = p if p is not None else fingerprint_partition(gm, tol)
    rep = check_base_measure_independence(gm, p, tol)
    return CheckReport("base-measure-independence", rep.holds, rep.max_deviation, rep.witness,
                       {"classes": p.labels(), "fingerprint_rank": p.fingerprint_rank(),
                        "separating": p.separating})


@dataclass(frozen=True)
class DiagnosisReport:
    classification: str
    evidence: tuple[CheckReport, ...]
    chsh_value: Optional[float]
    warnings: tuple[str, ...] = ()
    reduction_discrepancy: Optional[float] = None

    def check(self, name: str) -> CheckReport:
        for c in self.evidence:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "chsh_value": self.chsh_value,
            "evidence": [c.to_dict() for c in self.evidence],
            "reduction_discrepancy": self.reduction_discrepancy,
            "warnings": list(self.warnings),
        }


def classify_trichotomy(gm: GeneralizedModel, tol: float = TOL_CHECK) -> DiagnosisReport:
    """Run every check and classify with fixed precedence:
    explicit locality, then measurement independence, then PI, then the base-measure condition."""
    from .chsh import NotChshShaped, chsh_value

    behavior = behavior_of_generalized(gm)
    try:
        chsh = chsh_value(behavior)
    except NotChshShaped:
        chsh = None

    evidence = [check_normalization(behavior, tol), check_no_signaling(behavior, tol)]
    loc = check_explicit_locality(gm, tol)
    mi = check_measurement_independence(gm, tol)
    evidence += [loc, mi]
    warnings_ = list(loc.details["warnings"]) + list(mi.details["warnings"])

    def done(cls, discrepancy=None):
        return DiagnosisReport(cls, tuple(evidence), chsh, tuple(warnings_), discrepancy)

    if not loc.passes:
        return done(VIOLATES_LOCALITY)
    if not mi.passes:
        return done(VIOLATES_MI)

    plain = strip_inert(gm, tol)
    pi = check_ontological_pi(plain, tol)
    bm = check_base_measure(plain, tol=tol)
    evidence += [pi, bm]
    if pi.passes and not bm.passes:
        warnings_.append(
            f"PI holds but class masses move with x; fingerprint rank "
            f"{bm.details['fingerprint_rank']} for {len(bm.details['classes'])} classes"
        )
    if not pi.passes:
        return done(VIOLATES_PI)
    if not bm.passes:
        return done(DEGENERATE)
    # Soundness: a bell-local verdict must come with a working reduction.
    result = reduce_generalized(plain, tol)
    return done(BELL_LOCAL, result.discrepancy)
