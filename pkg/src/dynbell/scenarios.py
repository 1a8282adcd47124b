"""Named constructions: read-only, cloned and perturbed global variables,
equilibrium masking, and setting-conditioned preparation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chsh import pr_box_behavior
from .core import Behavior, Distribution, FiniteSpace, StochasticKernel, marginalize_behavior, product_space
from .diagnostics import (
    BELL_LOCAL,
    DEGENERATE,
    VIOLATES_LOCALITY,
    VIOLATES_MI,
    VIOLATES_PI,
)
from .models import DynamicalModel, GeneralizedModel, behavior_of_generalized

BITS = ("0", "1")


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    model: GeneralizedModel
    documented_classification: str
    notes: str


def _settings():
    return FiniteSpace("x", BITS), FiniteSpace("y", BITS)


def _outcomes():
    return FiniteSpace("a", BITS), FiniteSpace("b", BITS)


def _noisy(flip: float) -> np.ndarray:
    return np.array([[1 - flip, flip], [flip, 1 - flip]])


def readonly_dynamical_model() -> DynamicalModel:
    """Shared fair coin g that nobody writes; Alice's measurement disturbs her
    local bit differently for each setting."""
    g, A, B = FiniteSpace("g", BITS), FiniteSpace("A", BITS), FiniteSpace("B", BITS)
    Ap, Bp = FiniteSpace("A'", BITS), FiniteSpace("B'", BITS)
    x, y = _settings()
    a, b = _outcomes()
    init = (FiniteSpace("g0", BITS), FiniteSpace("A0", BITS), FiniteSpace("B0", BITS))
    rho0 = Distribution(init, np.einsum("i,j,k->ijk", [0.5, 0.5], [1.0, 0.0], [1.0, 0.0]))
    # Free evolution: g kept, local bits pick up thermal flips.
    ev = np.einsum("gh,ai,bj->gabhij", np.eye(2), _noisy(0.1), _noisy(0.05))
    evolution = StochasticKernel(init, (g, A, B), ev)
    tA = np.zeros((2, 2, 2, 2, 2))  # g A B x A'
    for gi, ai, bi in np.ndindex(2, 2, 2):
        tA[gi, ai, bi, 0] = np.eye(2)[ai]
        # x = 1 resets the local bit to the coin with probability 0.7.
        tA[gi, ai, bi, 1] = 0.3 * np.eye(2)[ai] + 0.7 * np.eye(2)[gi]
    tB = np.zeros((2, 2, 2, 2, 2))  # g A B y B'
    for gi, ai, bi in np.ndindex(2, 2, 2):
        tB[gi, ai, bi, 0] = np.eye(2)[bi]
        tB[gi, ai, bi, 1] = _noisy(0.2)[bi]
    return DynamicalModel(
        rho0=rho0,
        evolution=evolution,
        tA=StochasticKernel((g, A, B, x), (Ap,), tA),
        tB=StochasticKernel((g, A, B, y), (Bp,), tB),
        pA=StochasticKernel.deterministic((x, g, Ap), (a,), lambda xv, gv, ap: gv if xv == "0" else ap),
        pB=StochasticKernel.deterministic((y, g, Bp), (b,), lambda yv, gv, bp: str(int(gv) ^ int(bp))),
    )


def readonly_global_scenario() -> Scenario:
    return Scenario(
        "readonly-global",
        GeneralizedModel.from_dynamical(readonly_dynamical_model()),
        BELL_LOCAL,
        "Shared coin is a common cause that measurements only read; all disturbance "
        "acts on local bits.",
    )


def cloned_copies_scenario() -> Scenario:
    """Each party holds a copy of a shared coin; Alice scrambles hers per setting."""
    g, A, B = FiniteSpace("g", BITS), FiniteSpace("A", ("-",)), FiniteSpace("B", BITS)
    Ap, Bp = FiniteSpace("A'", ("-",)), FiniteSpace("B'", BITS)
    x, y = _settings()
    a, b = _outcomes()
    init = (g, A, B)
    rho0 = Distribution(init, np.einsum("i,j,k->ijk", [0.6, 0.4], [1.0], [0.5, 0.5]))
    tA = np.zeros((2, 1, 2, 2, 1, 2))  # g A B x A' g_A'
    for gi, bi in np.ndindex(2, 2):
        tA[gi, 0, bi, 0, 0] = np.eye(2)[gi]
        tA[gi, 0, bi, 1, 0] = _noisy(0.8)[gi]
    model = GeneralizedModel(
        rho0=rho0,
        evolution=StochasticKernel.identity(init),
        tA=StochasticKernel((g, A, B, x), (Ap, g), tA),
        tB=StochasticKernel.deterministic((g, A, B, y), (Bp,), lambda gv, av, bv, yv: bv if yv == "0" else gv),
        pA=StochasticKernel.deterministic((x, g, Ap), (a,), lambda xv, gv, ap: gv),
        pB=StochasticKernel.deterministic((y, g, Bp), (b,), lambda yv, gv, bp: gv if yv == "0" else bp),
        global_mode="cloned",
    )
    return Scenario(
        "cloned-copies",
        model,
        BELL_LOCAL,
        "Source hands out equal copies of a coin; Alice's measurement rewrites only her own copy.",
    )


def _ghost_model(bias: float) -> GeneralizedModel:
    lam, imprint = FiniteSpace("l", BITS), FiniteSpace("m", BITS)
    g = product_space("g", (lam, imprint))  # labels "l,m"
    A, B = FiniteSpace("A", ("-",)), FiniteSpace("B", ("-",))
    Ap, Bp = FiniteSpace("A'", ("-",)), FiniteSpace("B'", ("-",))
    x, y = _settings()
    a, b = _outcomes()
    init = (g, A, B)
    w = np.array([bias, 0.0, 1.0 - bias, 0.0]).reshape(4, 1, 1)
    # Alice's setting is written into the imprint half of the global state.
    tA = StochasticKernel.deterministic(
        (g, A, B, x), (Ap, g), lambda gv, av, bv, xv: ("-", f"{gv.split(',')[0]},{xv}")
    )

    def bob(yv, gv, bp):
        l, m = gv.split(",")
        return str(int(l) ^ (int(m) & int(yv)))

    return GeneralizedModel(
        rho0=Distribution(init, w),
        evolution=StochasticKernel.identity(init),
        tA=tA,
        tB=StochasticKernel.deterministic((g, A, B, y), (Bp,), lambda *_: "-"),
        pA=StochasticKernel.deterministic((x, g, Ap), (a,), lambda xv, gv, ap: gv.split(",")[0]),
        pB=StochasticKernel.deterministic((y, g, Bp), (b,), bob),
        global_mode="perturbed",
    )


def nonlocal_ghost_scenario() -> Scenario:
    """Ontic bit l uniform; a = l and b = l XOR (x AND y) via a global imprint of x."""
    return Scenario(
        "nonlocal-ghost",
        _ghost_model(0.5),
        VIOLATES_PI,
        "Alice's measurement imprints her setting on the global state Bob's response "
        "reads; uniform l hides this from Bob's marginals.",
    )


@dataclass(frozen=True)
class MaskingReport:
    bias: float
    bob_marginals: np.ndarray  # P(b | x, y), axes (b, x, y)
    max_x_dependence: float

    def to_dict(self) -> dict:
        return {
            "bias": self.bias,
            "bob_marginals": self.bob_marginals.tolist(),
            "max_x_dependence": self.max_x_dependence,
        }


def equilibrium_masking_demo(bias: float) -> MaskingReport:
    """Bob's marginals in the ghost model when P(l = 0) = bias."""
    if not 0.0 <= bias <= 1.0:
        raise ValueError(f"bias must lie in [0, 1], got {bias}")
    pb = marginalize_behavior(behavior_of_generalized(_ghost_model(bias)), "B")
    dep = float(np.max(pb.max(axis=1) - pb.min(axis=1)))
    return MaskingReport(bias, pb, dep)


def mi_violation_scenario(target: Behavior, name: str = "mi-violation") -> Scenario:
    """Hidden state is the outcome pair itself, drawn from target(., . | x, y)."""
    target.ensure_valid()
    g = product_space("g", (target.a, target.b))
    A, B = FiniteSpace("A", ("-",)), FiniteSpace("B", ("-",))
    Ap, Bp = FiniteSpace("A'", ("-",)), FiniteSpace("B'", ("-",))
    x, y = target.x, target.y
    na, nb = target.a.size, target.b.size
    cond = np.moveaxis(target.table, (2, 3), (0, 1)).reshape(x.size, y.size, na * nb, 1, 1)
    init = (g, A, B)
    model = GeneralizedModel(
        rho0=Distribution.uniform(init),
        evolution=StochasticKernel.identity(init),
        tA=StochasticKernel.deterministic((g, A, B, x), (Ap,), lambda *_: "-"),
        tB=StochasticKernel.deterministic((g, A, B, y), (Bp,), lambda *_: "-"),
        pA=StochasticKernel.deterministic((x, g, Ap), (target.a,), lambda xv, gv, ap: gv.split(",")[0]),
        pB=StochasticKernel.deterministic((y, g, Bp), (target.b,), lambda yv, gv, bp: gv.split(",")[1]),
        rho_pre_conditioned=StochasticKernel((x, y), init, cond),
    )
    constant = np.allclose(cond, cond[:1, :1], rtol=0, atol=1e-12)
    return Scenario(
        name,
        model,
        BELL_LOCAL if constant else VIOLATES_MI,
        "Pre-measurement state equilibrates with the settings before outcomes are read off.",
    )


def within_class_shuffle_scenario() -> Scenario:
    """g2 and g3 look identical to Bob; Alice's x = 1 swaps them, keeping class mass."""
    g = FiniteSpace("g", ("g1", "g2", "g3"))
    A, B = FiniteSpace("A", BITS), FiniteSpace("B", ("-",))
    Ap, Bp = FiniteSpace("A'", BITS), FiniteSpace("B'", ("-",))
    x, y = _settings()
    a, b = _outcomes()
    init = (g, A, B)
    rho0 = Distribution(init, np.einsum("i,j,k->ijk", [0.5, 0.25, 0.25], [0.5, 0.5], [1.0]))
    swap = {"g1": "g1", "g2": "g3", "g3": "g2"}
    tA = np.zeros((3, 2, 1, 2, 2, 3))  # g A B x A' g'
    for gi, ai, xi in np.ndindex(3, 2, 2):
        gl = g.elements[gi]
        target = swap[gl] if (xi == 1 and ai == 1) else gl
        tA[gi, ai, 0, xi, :, g.index(target)] = _noisy(0.1)[ai]
    model = GeneralizedModel(
        rho0=rho0,
        evolution=StochasticKernel.identity(init),
        tA=StochasticKernel((g, A, B, x), (Ap, g), tA),
        tB=StochasticKernel.deterministic((g, A, B, y), (Bp,), lambda *_: "-"),
        pA=StochasticKernel.deterministic(
            (x, g, Ap), (a,), lambda xv, gv, ap: str(int(gv == "g3") ^ (int(xv) & int(ap)))
        ),
        pB=StochasticKernel.deterministic((y, g, Bp), (b,), lambda yv, gv, bp: "0" if gv == "g1" else yv),
        global_mode="perturbed",
    )
    return Scenario(
        "within-class-shuffle",
        model,
        BELL_LOCAL,
        "Alice perturbs the global state, but only inside a class Bob cannot resolve.",
    )


def mi_pr_box_scenario() -> Scenario:
    return mi_violation_scenario(pr_box_behavior(), "mi-pr-box")


def degenerate_separation_fixture() -> Scenario:
    """Bob's fingerprints are linearly dependent (g3 is the average of g1, g2),
    so Alice can move class mass without changing anything Bob can see."""
    g = FiniteSpace("g", ("g1", "g2", "g3"))
    A, B = FiniteSpace("A", ("-",)), FiniteSpace("B", ("-",))
    Ap, Bp = FiniteSpace("A'", ("-",)), FiniteSpace("B'", ("-",))
    x, y = _settings()
    a, b = _outcomes()
    init = (g, A, B)
    tA = np.zeros((3, 1, 1, 2, 1, 3))
    tA[:, 0, 0, 0, 0, 2] = 1.0
    tA[:, 0, 0, 1, 0, :2] = 0.5
    pB = np.zeros((2, 3, 1, 2))  # y g B' b
    pB[:, 0, 0] = [1.0, 0.0]
    pB[:, 1, 0] = [0.0, 1.0]
    pB[:, 2, 0] = [0.5, 0.5]
    model = GeneralizedModel(
        rho0=Distribution.point(init, ("g1", "-", "-")),
        evolution=StochasticKernel.identity(init),
        tA=StochasticKernel((g, A, B, x), (Ap, g), tA),
        tB=StochasticKernel.deterministic((g, A, B, y), (Bp,), lambda *_: "-"),
        pA=StochasticKernel.deterministic((x, g, Ap), (a,), lambda *_: "0"),
        pB=StochasticKernel((y, g, Bp), (b,), pB),
        global_mode="perturbed",
    )
    return Scenario("degenerate-separation", model, DEGENERATE,
                    "Response fingerprints are linearly dependent across classes.")


def explicit_signaling_fixture() -> Scenario:
    """Bob's response table reads x directly: b = x."""
    g, A, B = FiniteSpace("g", ("-",)), FiniteSpace("A", ("-",)), FiniteSpace("B", ("-",))
    Ap, Bp = FiniteSpace("A'", ("-",)), FiniteSpace("B'", ("-",))
    x, y = _settings()
    a, b = _outcomes()
    init = (g, A, B)
    model = GeneralizedModel(
        rho0=Distribution.uniform(init),
        evolution=StochasticKernel.identity(init),
        tA=StochasticKernel.deterministic((g, A, B, x), (Ap,), lambda *_: "-"),
        tB=StochasticKernel.deterministic((g, A, B, y), (Bp,), lambda *_: "-"),
        pA=StochasticKernel.deterministic((x, g, Ap), (a,), lambda *_: "0"),
        pB=StochasticKernel.deterministic((y, g, Bp, x), (b,), lambda yv, gv, bp, xv: xv),
        distant=frozenset({"pB"}),
    )
    return Scenario("explicit-signaling", model, VIOLATES_LOCALITY, "Bob's response reads Alice's setting.")


SCENARIOS: dict[str, Callable[[], Scenario]] = {
    "readonly-global": readonly_global_scenario,
    "cloned-copies": cloned_copies_scenario,
    "nonlocal-ghost": nonlocal_ghost_scenario,
    "within-class-shuffle": within_class_shuffle_scenario,
    "mi-pr-box": mi_pr_box_scenario,
}

FIXTURES: dict[str, Callable[[], Scenario]] = {
    "degenerate-separation": degenerate_separation_fixture,
    "explicit-signaling": explicit_signaling_fixture,
}


def get_scenario(name: str) -> Scenario:
    try:
        return {**SCENARIOS, **FIXTURES}[name]()
    except KeyError:
        known = ", ".join(sorted({**SCENARIOS, **FIXTURES}))
        raise KeyError(f"unknown scenario {name!r}; known: {known}") from None
