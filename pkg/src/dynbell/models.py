"""Hidden-variable model classes and their exact predicted behaviors.

Kernel signatures (input spaces -> output spaces) used throughout:

=========  ===============================  =====================
table      inputs                           outputs
=========  ===============================  =====================
evolution  initial spaces (rho0.spaces)     (g, A, B)
tA         (g, A, B, x)                     (A',) or (A', g')
tB         (g, A, B, y)                     (B',)
pA         (x, g, A')                       (a,)
pB         (y, g, B')                       (b,)
=========  ===============================  =====================

``g`` is the shared global variable, ``A``/``B`` the local ones. A
:class:`GeneralizedModel` may append the distant setting as a final input
to any of tA/tB/pA/pB, but only when that table is listed in ``distant``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    Behavior,
    Distribution,
    FiniteSpace,
    SpaceMismatchError,
    StochasticKernel,
    _require_spaces,
    push_forward,
)

GLOBAL_MODES = ("read-only", "cloned", "perturbed")
DISTANT_TABLES = ("tA", "tB", "pA", "pB")


class FlagError(SpaceMismatchError):
    """A table's signature disagrees with the model's declared flags."""


def _check_sig(k: StochasticKernel, inputs, outputs, what: str):
    _require_spaces(inputs, k.inputs, f"{what} inputs")
    _require_spaces(outputs, k.outputs, f"{what} outputs")


@dataclass(frozen=True, eq=False)
class DynamicalModel:
    """Prepare, evolve, disturb locally, respond.

    ``rho_pre`` (the pushed-forward pre-measurement distribution) is computed
    once at construction; every downstream formula reads it.
    """

    rho0: Distribution
    evolution: StochasticKernel
    tA: StochasticKernel
    tB: StochasticKernel
    pA: StochasticKernel
    pB: StochasticKernel
    rho_pre: Distribution = field(init=False, repr=False)

    def __post_init__(self):
        _require_spaces(self.evolution.inputs, self.rho0.spaces, "evolution inputs")
        if self.evolution.n_out != 3:
            raise SpaceMismatchError("evolution must output the triple (g, A, B)")
        g, A, B = self.evolution.outputs
        if self.tA.n_in != 4 or self.tB.n_in != 4:
            raise SpaceMismatchError("tA/tB must read (g, A, B, own setting) only")
        x, y = self.tA.inputs[3], self.tB.inputs[3]
        _check_sig(self.tA, (g, A, B, x), self.tA.outputs[:1], "tA")
        _check_sig(self.tB, (g, A, B, y), self.tB.outputs[:1], "tB")
        _check_sig(self.pA, (x, g, self.tA.outputs[0]), self.pA.outputs[:1], "pA")
        _check_sig(self.pB, (y, g, self.tB.outputs[0]), self.pB.outputs[:1], "pB")
        self.rho0.ensure_valid(None, "rho0")
        for name in ("evolution", "tA", "tB", "pA", "pB"):
            getattr(self, name).ensure_valid(None, name)
        object.__setattr__(self, "rho_pre", push_forward(self.rho0, self.evolution))

    @property
    def spaces(self) -> dict[str, FiniteSpace]:
        g, A, B = self.evolution.outputs
        return {
            "g": g, "A": A, "B": B,
            "A'": self.tA.outputs[0], "B'": self.tB.outputs[0],
            "x": self.tA.inputs[3], "y": self.tB.inputs[3],
            "a": self.pA.outputs[0], "b": self.pB.outputs[0],
        }


@dataclass(frozen=True, eq=False)
class StaticBellModel:
    """rho_pre over the hidden spaces with effective responses Q_A(a|x,L), Q_B(b|y,L).

    qA has inputs ``(x, *rho_pre.spaces)``; qB has ``(y, *rho_pre.spaces)``.
    """

    rho_pre: Distribution
    qA: StochasticKernel
    qB: StochasticKernel

    def __post_init__(self):
        lam = self.rho_pre.spaces
        if self.qA.n_out != 1 or self.qB.n_out != 1:
            raise SpaceMismatchError("qA/qB must output a single outcome space")
        _check_sig(self.qA, (self.qA.inputs[0], *lam), self.qA.outputs, "qA")
        _check_sig(self.qB, (self.qB.inputs[0], *lam), self.qB.outputs, "qB")
        self.rho_pre.ensure_valid(None, "rho_pre")
        self.qA.ensure_valid(None, "qA")
        self.qB.ensure_valid(None, "qB")


@dataclass(frozen=True, eq=False)
class GeneralizedModel:
    """Superset of :class:`DynamicalModel` used for diagnostic scenarios.

    global_mode
        ``"read-only"``: tA outputs (A',) and nobody changes g.
        ``"cloned"``: tA outputs (A', g') where g' is Alice's private copy;
        pA reads g', pB reads Bob's untouched copy g.
        ``"perturbed"``: tA outputs (A', g') and both pA and pB read g'.
    rho_pre_conditioned
        Optional kernel (x, y) -> (g, A, B). When present it replaces
        ``push_forward(rho0, evolution)``.
    distant
        Tables that carry the other party's setting as a trailing input.
    """

    rho0: Distribution
    evolution: StochasticKernel
    tA: StochasticKernel
    tB: StochasticKernel
    pA: StochasticKernel
    pB: StochasticKernel
    global_mode: str = "read-only"
    rho_pre_conditioned: Optional[StochasticKernel] = None
    distant: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "distant", frozenset(self.distant))
        if self.global_mode not in GLOBAL_MODES:
            raise FlagError(f"unknown global_mode {self.global_mode!r}")
        unknown = self.distant - set(DISTANT_TABLES)
        if unknown:
            raise FlagError(f"unknown distant-setting tables {sorted(unknown)}")
        _require_spaces(self.evolution.inputs, self.rho0.spaces, "evolution inputs")
        if self.evolution.n_out != 3:
            raise SpaceMismatchError("evolution must output the triple (g, A, B)")
        g, A, B = self.evolution.outputs
        x, y = self.tA.inputs[3], self.tB.inputs[3]
        a_out = (self.tA.outputs[0],) if self.global_mode == "read-only" else (self.tA.outputs[0], g)

        def sig(name, base, extra):
            return base + ((extra,) if name in self.distant else ())

        _check_sig(self.tA, sig("tA", (g, A, B, x), y), a_out, "tA")
        _check_sig(self.tB, sig("tB", (g, A, B, y), x), self.tB.outputs[:1], "tB")
        _check_sig(self.pA, sig("pA", (x, g, self.tA.outputs[0]), y), self.pA.outputs[:1], "pA")
        _check_sig(self.pB, sig("pB", (y, g, self.tB.outputs[0]), x), self.pB.outputs[:1], "pB")
        if self.rho_pre_conditioned is not None:
            _check_sig(self.rho_pre_conditioned, (x, y), (g, A, B), "rho_pre_conditioned")
            self.rho_pre_conditioned.ensure_valid(None, "rho_pre_conditioned")
        self.rho0.ensure_valid(None, "rho0")
        for name in ("evolution", "tA", "tB", "pA", "pB"):
            getattr(self, name).ensure_valid(None, name)

    @classmethod
    def from_dynamical(cls, m: DynamicalModel) -> "GeneralizedModel":
        return cls(m.rho0, m.evolution, m.tA, m.tB, m.pA, m.pB)

    @property
    def spaces(self) -> dict[str, FiniteSpace]:
        g, A, B = self.evolution.outputs
        return {
            "g": g, "A": A, "B": B,
            "A'": self.tA.outputs[0], "B'": self.tB.outputs[0],
            "x": self.tA.inputs[3], "y": self.tB.inputs[3],
            "a": self.pA.outputs[0], "b": self.pB.outputs[0],
        }

    @property
    def measurement_dependent(self) -> bool:
        return self.rho_pre_conditioned is not None

    def flags(self) -> dict:
        return {
            "global_mode": self.global_mode,
            "rho_pre_conditioned": self.measurement_dependent,
            "distant": sorted(self.distant),
        }

    def full_tables(self) -> "FullTables":
        return _full_tables(self)


def evolve_initial(m: DynamicalModel) -> Distribution:
    return push_forward(m.rho0, m.evolution)


def behavior_of_dynamical(m: DynamicalModel) -> Behavior:
    """Total-probability sum over (L, A', B') of rho_pre * tA * tB * pA * pB."""
    s = m.spaces
    # g A B x y A' B' a b
    #  0 1 2 3 4  5  6 7 8
    t = np.einsum(
        m.rho_pre.weights, [0, 1, 2],
        m.tA.table, [0, 1, 2, 3, 5],
        m.tB.table, [0, 1, 2, 4, 6],
        m.pA.table, [3, 0, 5, 7],
        m.pB.table, [4, 0, 6, 8],
        [7, 8, 3, 4],
        optimize=True,
    )
    return Behavior(s["a"], s["b"], s["x"], s["y"], t)


def behavior_of_static(sm: StaticBellModel) -> Behavior:
    n = len(sm.rho_pre.spaces)
    lam = list(range(n))
    x, y, a, b = n, n + 1, n + 2, n + 3
    t = np.einsum(
        sm.rho_pre.weights, lam,
        sm.qA.table, [x, *lam, a],
        sm.qB.table, [y, *lam, b],
        [a, b, x, y],
        optimize=True,
    )
    return Behavior(sm.qA.outputs[0], sm.qB.outputs[0], sm.qA.inputs[0], sm.qB.inputs[0], t)


@dataclass(frozen=True)
class FullTables:
    """Every table of a generalized model with explicit leading (x, y) axes.

    rho: (x, y, g, A, B); tA: (x, y, g, A, B, A', h) where h is the global
    value Alice leaves behind; tB: (x, y, g, A, B, B'); pA: (x, y, h, A', a);
    pB: (x, y, k, B', b) where k is h if Bob reads Alice's output, else g.
    """

    rho: np.ndarray
    tA: np.ndarray
    tB: np.ndarray
    pA: np.ndarray
    pB: np.ndarray
    bob_reads_alice_output: bool

    def bob_global_kernel(self) -> np.ndarray:
        """M(k | x, y, g, A, B): distribution of the global value Bob's response reads."""
        if self.bob_reads_alice_output:
            return self.tA.sum(axis=5)
        ng = self.rho.shape[2]
        eye = np.eye(ng)[None, None, :, None, None, :]
        return np.broadcast_to(eye, self.tA.shape[:5] + (ng,))


def _lead_settings(t: np.ndarray, ix, iy, nx: int, ny: int) -> np.ndarray:
    if ix is not None and iy is not None:
        t = np.moveaxis(t, (ix, iy), (0, 1))
    elif ix is not None:
        t = np.moveaxis(t, ix, 0)[:, None]
    elif iy is not None:
        t = np.moveaxis(t, iy, 0)[None, :]
    else:
        t = t[None, None]
    return np.broadcast_to(t, (nx, ny) + t.shape[2:])


def _full_tables(gm: GeneralizedModel) -> FullTables:
    s = gm.spaces
    nx, ny, ng = s["x"].size, s["y"].size, s["g"].size
    d = gm.distant
    if gm.rho_pre_conditioned is not None:
        rho = np.asarray(gm.rho_pre_conditioned.table)
    else:
        rho_pre = push_forward(gm.rho0, gm.evolution).weights
        rho = np.broadcast_to(rho_pre, (nx, ny) + rho_pre.shape)
    tA = _lead_settings(gm.tA.table, 3, 4 if "tA" in d else None, nx, ny)
    if gm.global_mode == "read-only":
        # Alice leaves the global value where it was: h = g.
        eye = np.eye(ng)[None, None, :, None, None, None, :]
        tA = tA[..., None] * eye
    tB = _lead_settings(gm.tB.table, 4 if "tB" in d else None, 3, nx, ny)
    pA = _lead_settings(gm.pA.table, 0, 3 if "pA" in d else None, nx, ny)
    pB = _lead_settings(gm.pB.table, 3 if "pB" in d else None, 0, nx, ny)
    return FullTables(rho, tA, tB, pA, pB, gm.global_mode == "perturbed")


def behavior_of_generalized(gm: GeneralizedModel) -> Behavior:
    """Total-probability sum honoring the declared global mode and flags."""
    s = gm.spaces
    ft = _full_tables(gm)
    # x y g A B A' h B' a b
    # 0 1 2 3 4 5  6 7  8 9
    bob_g = 6 if ft.bob_reads_alice_output else 2
    t = np.einsum(
        ft.rho, [0, 1, 2, 3, 4],
        ft.tA, [0, 1, 2, 3, 4, 5, 6],
        ft.tB, [0, 1, 2, 3, 4, 7],
        ft.pA, [0, 1, 6, 5, 8],
        ft.pB, [0, 1, bob_g, 7, 9],
        [8, 9, 0, 1],
        optimize=True,
    )
    return Behavior(s["a"], s["b"], s["x"], s["y"], t)
