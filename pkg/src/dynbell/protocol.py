"""Monte Carlo two-node protocol: tabular node programs fed shared randomness.

Rounds are generated in fixed-size batches; batch ``k`` draws from a
Philox generator seeded with ``SeedSequence(master_seed).spawn(...)[k]``,
so logs are reproducible and batches are independent of each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .chsh import DEFAULT_SPEC, ChshSpec, chsh_value, correlators
from .core import Behavior, Distribution, DynbellError, FiniteSpace, product_space
from .models import StaticBellModel

RNG_ALGORITHM = "numpy.Philox4x64; batch k keyed by SeedSequence(master).spawn(n_batches)[k]"
BATCH = 1 << 16
Z99 = 2.5758293035489004


class UnobservedSettings(DynbellError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NodeProgram:
    """Deterministic lookup table: outcome index for (shared, private, own setting[, covert]).

    ``covert`` is the other party's setting space; it only exists when
    ``covert_input_enabled`` is set, and then ``table`` has a fourth axis.
    """

    name: str
    shared: FiniteSpace
    private: Distribution
    settings: FiniteSpace
    outcomes: FiniteSpace
    table: np.ndarray
    covert_input_enabled: bool = False
    covert: Optional[FiniteSpace] = None

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        expected = (self.shared.size, self.private.weights.size, self.settings.size)
        if self.covert_input_enabled:
            if self.covert is None:
                raise ValueError("covert input enabled without a covert space")
            expected += (self.covert.size,)
        elif self.covert is not None:
            raise ValueError("covert space given but covert input disabled")
        if t.shape != expected:
            raise ValueError(f"{self.name}: table shape {t.shape}, expected {expected}")
        if t.min() < 0 or t.max() >= self.outcomes.size:
            raise ValueError(f"{self.name}: outcome index out of range")
        self.private.ensure_valid(what=f"{self.name} private randomness")

    def respond(self, shared: np.ndarray, private: np.ndarray, setting: np.ndarray,
                covert: Optional[np.ndarray] = None) -> np.ndarray:
        if self.covert_input_enabled:
            return self.table[shared, private, setting, covert]
        return self.table[shared, private, setting]


@dataclass(frozen=True)
class RoundLog:
    round: int
    x: str
    y: str
    a: str
    b: str
    seeds: dict


@dataclass(frozen=True, eq=False)
class EstimatedBehavior:
    counts: np.ndarray  # N(a, b, x, y)
    spaces: tuple[FiniteSpace, FiniteSpace, FiniteSpace, FiniteSpace]

    @property
    def rounds_per_setting(self) -> np.ndarray:
        return self.counts.sum(axis=(0, 1))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def frequencies(self) -> Behavior:
        n = self.rounds_per_setting
        if np.any(n == 0):
            raise UnobservedSettings("some setting pair was never observed")
        return Behavior(*self.spaces, self.counts / n)

    def correlator_stderr(self, spec: ChshSpec = DEFAULT_SPEC) -> np.ndarray:
        E = correlators(self.frequencies(), spec)
        return np.sqrt(np.clip(1.0 - E**2, 0.0, None) / self.rounds_per_setting)


@dataclass(frozen=True)
class ChshEstimate:
    value: float
    stderr: float
    interval99: tuple[float, float]


def estimate_chsh(e: EstimatedBehavior, spec: ChshSpec = DEFAULT_SPEC) -> ChshEstimate:
    """Point estimate with per-correlator binomial errors added in quadrature."""
    value = chsh_value(e.frequencies(), spec)
    se = float(np.sqrt(np.sum(e.correlator_stderr(spec) ** 2)))
    return ChshEstimate(value, se, (value - Z99 * se, value + Z99 * se))


@dataclass(frozen=True, eq=False)
class ProtocolRun:
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    shared: np.ndarray
    estimated: EstimatedBehavior
    master_seed: int
    measurement_independent: bool
    spaces: tuple = field(repr=False, default=())

    def logs(self) -> Iterator[RoundLog]:
        sa, sb, sx, sy = self.spaces
        for i in range(len(self.x)):
            yield RoundLog(i, sx.elements[self.x[i]], sy.elements[self.y[i]],
                           sa.elements[self.a[i]], sb.elements[self.b[i]],
                           {"master": self.master_seed, "batch": i // BATCH})

    def log_lines(self) -> Iterator[str]:
        """Tab-separated ``round x y a b`` records, one per round."""
        sa, sb, sx, sy = self.spaces
        X, Y = np.asarray(sx.elements), np.asarray(sy.elements)
        A, B = np.asarray(sa.elements), np.asarray(sb.elements)
        for i, (x, y, a, b) in enumerate(zip(X[self.x], Y[self.y], A[self.a], B[self.b])):
            yield f"{i}\t{x}\t{y}\t{a}\t{b}"


def run_protocol(alice: NodeProgram, bob: NodeProgram, shared: Distribution, rounds: int, seed: int,
                 settings_given_shared: Optional[np.ndarray] = None) -> ProtocolRun:
    """Play ``rounds`` rounds; settings uniform and independent of the shared value.

    ``settings_given_shared`` (shape (shared, x, y)) is the superdeterminism
    switch: settings are then drawn conditioned on the shared value and the
    run is marked as violating measurement independence.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if alice.shared != shared.spaces[0] or bob.shared != shared.spaces[0]:
        raise ValueError("node programs must index the shared distribution's space")
    nx, ny = alice.settings.size, bob.settings.size
    ps = shared.weights.ravel()
    pa, pb = alice.private.weights.ravel(), bob.private.weights.ravel()
    n_batches = -(-rounds // BATCH)
    keys = np.random.SeedSequence(seed).spawn(n_batches)
    cols = {k: [] for k in ("x", "y", "a", "b", "s")}
    for k, ss in enumerate(keys):
        n = min(BATCH, rounds - k * BATCH)
        rng = np.random.Generator(np.random.Philox(ss))
        s = rng.choice(ps.size, size=n, p=ps)
        if settings_given_shared is None:
            x = rng.integers(nx, size=n)
            y = rng.integers(ny, size=n)
        else:
            joint = np.asarray(settings_given_shared).reshape(ps.size, nx * ny)
            u = rng.random(n)
            xy = (u[:, None] > np.cumsum(joint[s], axis=1)).sum(axis=1)
            xy = np.minimum(xy, nx * ny - 1)
            x, y = xy // ny, xy % ny
        ra = rng.choice(pa.size, size=n, p=pa)
        rb = rng.choice(pb.size, size=n, p=pb)
        a = alice.respond(s, ra, x, y if alice.covert_input_enabled else None)
        b = bob.respond(s, rb, y, x if bob.covert_input_enabled else None)
        for key, v in zip(("x", "y", "a", "b", "s"), (x, y, a, b, s)):
            cols[key].append(v)
    x, y, a, b, s = (np.concatenate(cols[k]) for k in ("x", "y", "a", "b", "s"))
    counts = np.zeros((alice.outcomes.size, bob.outcomes.size, nx, ny), dtype=np.int64)
    np.add.at(counts, (a, b, x, y), 1)
    spaces = (alice.outcomes, bob.outcomes, alice.settings, bob.settings)
    return ProtocolRun(x, y, a, b, s, EstimatedBehavior(counts, spaces), seed,
                       settings_given_shared is None, spaces)


def exact_behavior(alice: NodeProgram, bob: NodeProgram, shared: Distribution,
                   settings_given_shared: Optional[np.ndarray] = None) -> Behavior:
    """Enumerate every (shared, private_A, private_B) triple."""
    ps = shared.weights.ravel()
    pa, pb = alice.private.weights.ravel(), bob.private.weights.ravel()
    nx, ny = alice.settings.size, bob.settings.size
    t = np.zeros((alice.outcomes.size, bob.outcomes.size, nx, ny))
    if settings_given_shared is None:
        post = np.broadcast_to(ps[:, None, None], (ps.size, nx, ny))
    else:
        joint = ps[:, None, None] * np.asarray(settings_given_shared)
        post = joint / joint.sum(axis=0, keepdims=True)
    for s in range(ps.size):
        for i in range(pa.size):
            for j in range(pb.size):
                for x in range(nx):
                    for y in range(ny):
                        a = alice.table[s, i, x, y] if alice.covert_input_enabled else alice.table[s, i, x]
                        b = bob.table[s, j, y, x] if bob.covert_input_enabled else bob.table[s, j, y]
                        t[a, b, x, y] += post[s, x, y] * pa[i] * pb[j]
    return Behavior(alice.outcomes, bob.outcomes, alice.settings, bob.settings, t)


def _inverse_cdf_node(name: str, shared: FiniteSpace, settings: FiniteSpace, outcomes: FiniteSpace,
                      rows: np.ndarray) -> NodeProgram:
    """Sample rows[s, x, :] exactly with one private uniform cut into intervals."""
    cdf = np.cumsum(rows, axis=-1)
    cuts = np.unique(np.concatenate([[0.0, 1.0], np.clip(cdf.ravel(), 0.0, 1.0)]))
    widths = np.diff(cuts)
    keep = widths > 0
    lo, widths = cuts[:-1][keep], widths[keep]
    mids = lo + widths / 2
    table = (mids[None, None, :, None] >= cdf[:, :, None, :]).sum(axis=-1)
    table = np.minimum(table, outcomes.size - 1)  # (s, x, private)
    private = Distribution(FiniteSpace(f"{name}_private", tuple(f"u{i}" for i in range(widths.size))),
                           widths / widths.sum())
    return NodeProgram(name, shared, private, settings, outcomes, np.swapaxes(table, 1, 2))


def nodes_from_static(sm: StaticBellModel) -> tuple[NodeProgram, NodeProgram, Distribution]:
    """Honest nodes realizing a static model: shared = hidden state, private = local coin."""
    lam = product_space("shared", sm.rho_pre.spaces)
    shared = Distribution(lam, sm.rho_pre.weights.ravel())
    qa = np.moveaxis(sm.qA.table, 0, -2).reshape(lam.size, sm.qA.inputs[0].size, -1)
    qb = np.moveaxis(sm.qB.table, 0, -2).reshape(lam.size, sm.qB.inputs[0].size, -1)
    alice = _inverse_cdf_node("alice", lam, sm.qA.inputs[0], sm.qA.outputs[0], qa)
    bob = _inverse_cdf_node("bob", lam, sm.qB.inputs[0], sm.qB.outputs[0], qb)
    return alice, bob, shared


def _bits(name: str) -> FiniteSpace:
    return FiniteSpace(name, ("0", "1"))


def _no_private() -> Distribution:
    return Distribution(FiniteSpace("none", ("-",)), [1.0])


def constant_nodes():
    s = FiniteSpace("shared", ("-",))
    t = np.zeros((1, 1, 2), dtype=int)
    return (NodeProgram("alice", s, _no_private(), _bits("x"), _bits("a"), t),
            NodeProgram("bob", s, _no_private(), _bits("y"), _bits("b"), t),
            Distribution(s, [1.0]))


def random_nodes():
    s = FiniteSpace("shared", ("-",))
    coin = Distribution(FiniteSpace("coin", ("0", "1")), [0.5, 0.5])
    t = np.broadcast_to(np.arange(2)[None, :, None], (1, 2, 2))
    return (NodeProgram("alice", s, coin, _bits("x"), _bits("a"), t),
            NodeProgram("bob", s, coin, _bits("y"), _bits("b"), t),
            Distribution(s, [1.0]))


def covert_pr_nodes():
    """a = s, b = s XOR (x AND y) with Bob's covert channel carrying x."""
    s = _bits("shared")
    ta = np.broadcast_to(np.arange(2)[:, None, None], (2, 1, 2))
    tb = np.zeros((2, 1, 2, 2), dtype=int)
    for sv, y, x in np.ndindex(2, 2, 2):
        tb[sv, 0, y, x] = sv ^ (x & y)
    return (NodeProgram("alice", s, _no_private(), _bits("x"), _bits("a"), ta),
            NodeProgram("bob", s, _no_private(), _bits("y"), _bits("b"), tb,
                        covert_input_enabled=True, covert=_bits("x")),
            Distribution(s, [0.5, 0.5]))


def readonly_nodes():
    from .reduction import reduce_to_static
    from .scenarios import readonly_dynamical_model

    return nodes_from_static(reduce_to_static(readonly_dynamical_model()))


STRATEGIES = {
    "constant": constant_nodes,
    "random": random_nodes,
    "readonly": readonly_nodes,
    "covert-pr": covert_pr_nodes,
}
