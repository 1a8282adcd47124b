"""Labeled finite spaces, distributions, stochastic kernels and behaviors.

Every table is a numpy array whose axes follow the declared space order.
A kernel table has shape ``inputs + outputs``; a "row" is one input tuple.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence

import numpy as np

TOL_INPUT = 1e-9
TOL_CHECK = 1e-12

_input_tol = contextvars.ContextVar("input_tol", default=TOL_INPUT)


def input_tolerance() -> float:
    """Tolerance applied when validating user-supplied tables."""
    return _input_tol.get()


@contextlib.contextmanager
def using_input_tolerance(tol: float):
    token = _input_tol.set(tol)
    try:
        yield
    finally:
        _input_tol.reset(token)


class DynbellError(Exception):
    """Base class for library errors."""


class SpaceMismatchError(DynbellError, ValueError):
    pass


class ValidationError(DynbellError, ValueError):
    def __init__(self, what: str, report: "ValidationReport"):
        self.what = what
        self.report = report
        super().__init__(f"{what}: {report.summary()}")


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FiniteSpace:
    name: str
    elements: tuple[str, ...]

    def __post_init__(self):
        elements = tuple(str(e) for e in self.elements)
        object.__setattr__(self, "elements", elements)
        if len(elements) < 1:
            raise ValueError(f"space {self.name!r} must have at least one element")
        if len(set(elements)) != len(elements):
            raise ValueError(f"space {self.name!r} has duplicate element labels")

    @property
    def size(self) -> int:
        return len(self.elements)

    def index(self, label: str) -> int:
        try:
            return self.elements.index(str(label))
        except ValueError:
            raise KeyError(f"{label!r} is not an element of {self.name!r}") from None

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


def space(name: str, elements: Sequence | int) -> FiniteSpace:
    """Shorthand: ``space("x", 2)`` gives elements ``("0", "1")``."""
    if isinstance(elements, int):
        elements = [str(i) for i in range(elements)]
    return FiniteSpace(name, tuple(elements))


def product_space(name: str, spaces: Sequence[FiniteSpace]) -> FiniteSpace:
    """Flatten a product of spaces into one space, row-major, labels joined by ','."""
    labels = [",".join(t) for t in product(*(s.elements for s in spaces))]
    return FiniteSpace(name, tuple(labels))


def _shape(spaces: Sequence[FiniteSpace]) -> tuple[int, ...]:
    return tuple(s.size for s in spaces)


@dataclass(frozen=True)
class Violation:
    kind: str  # "negative" | "sum"
    index: tuple[int, ...]
    deviation: float

    def describe(self) -> str:
        if self.kind == "negative":
            return f"negative entry {self.deviation:.3g} at {self.index}"
        return f"row {self.index} sums to 1{self.deviation:+.3g}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_deviation(self) -> float:
        return max((abs(v.deviation) for v in self.violations), default=0.0)

    def summary(self) -> str:
        if self.ok:
            return "ok"
        head = "; ".join(v.describe() for v in self.violations[:5])
        more = len(self.violations) - 5
        return head + (f"; ... {more} more" if more > 0 else "")


def _check_rows(table: np.ndarray, n_out: int, tol: float) -> ValidationReport:
    violations = []
    for idx in np.argwhere(table < 0):
        idx = tuple(int(i) for i in idx)
        violations.append(Violation("negative", idx, float(table[idx])))
    dev = np.asarray(table.sum(axis=tuple(range(table.ndim - n_out, table.ndim)))) - 1.0
    # NaN rows fail the comparison below, so test "not within" instead.
    for idx in np.argwhere(~(np.abs(dev) <= tol)):
        idx = tuple(int(i) for i in idx)
        violations.append(Violation("sum", idx, float(dev[idx])))
    return ValidationReport(tuple(violations))


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability weights over the product of ``spaces`` (one axis per space)."""

    spaces: tuple[FiniteSpace, ...]
    weights: np.ndarray

    def __post_init__(self):
        spaces = (self.spaces,) if isinstance(self.spaces, FiniteSpace) else tuple(self.spaces)
        object.__setattr__(self, "spaces", spaces)
        w = _frozen(self.weights).reshape(_shape(spaces))
        object.__setattr__(self, "weights", w)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    @classmethod
    def uniform(cls, spaces) -> "Distribution":
        spaces = (spaces,) if isinstance(spaces, FiniteSpace) else tuple(spaces)
        shape = _shape(spaces)
        return cls(spaces, np.full(shape, 1.0 / int(np.prod(shape))))

    @classmethod
    def point(cls, spaces, labels: Sequence[str]) -> "Distribution":
        spaces = (spaces,) if isinstance(spaces, FiniteSpace) else tuple(spaces)
        w = np.zeros(_shape(spaces))
        w[tuple(s.index(l) for s, l in zip(spaces, labels))] = 1.0
        return cls(spaces, w)

    def prob(self, *labels: str) -> float:
        return float(self.weights[tuple(s.index(l) for s, l in zip(self.spaces, labels))])

    def ensure_valid(self, tol: Optional[float] = None, what: str = "distribution") -> "Distribution":
        report = validate_distribution(self, input_tolerance() if tol is None else tol)
        if not report.ok:
            raise ValidationError(what, report)
        return self


@dataclass(frozen=True, eq=False)
class StochasticKernel:
    """Conditional probability table ``k(outputs | inputs)``.

    ``table`` has shape ``input sizes + output sizes``; each input tuple
    indexes a row that must be a distribution over the output tuples.
    """

    inputs: tuple[FiniteSpace, ...]
    outputs: tuple[FiniteSpace, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        t = _frozen(self.table).reshape(_shape(self.inputs) + _shape(self.outputs))
        object.__setattr__(self, "table", t)

    @property
    def n_in(self) -> int:
        return len(self.inputs)

    @property
    def n_out(self) -> int:
        return len(self.outputs)

    def rows(self) -> np.ndarray:
        """The table as a 2-D (input tuples x output tuples) matrix."""
        n_rows = int(np.prod(_shape(self.inputs)))
        return self.table.reshape(n_rows, -1)

    def ensure_valid(self, tol: Optional[float] = None, what: str = "kernel") -> "StochasticKernel":
        report = validate_kernel(self, input_tolerance() if tol is None else tol)
        if not report.ok:
            raise ValidationError(what, report)
        return self

    @classmethod
    def identity(cls, spaces: Sequence[FiniteSpace]) -> "StochasticKernel":
        spaces = tuple(spaces)
        n = int(np.prod(_shape(spaces)))
        return cls(spaces, spaces, np.eye(n).reshape(_shape(spaces) * 2))

    @classmethod
    def deterministic(cls, inputs, outputs, fn) -> "StochasticKernel":
        """Build a 0/1 kernel from ``fn(*input_labels) -> output label tuple``."""
        inputs, outputs = tuple(inputs), tuple(outputs)
        t = np.zeros(_shape(inputs) + _shape(outputs))
        for idx in np.ndindex(*_shape(inputs)):
            labels = tuple(s.elements[i] for s, i in zip(inputs, idx))
            out = fn(*labels)
            if not isinstance(out, tuple):
                out = (out,)
            t[idx + tuple(s.index(o) for s, o in zip(outputs, out))] = 1.0
        return cls(inputs, outputs, t)

    @classmethod
    def constant(cls, inputs, dist: Distribution) -> "StochasticKernel":
        """Kernel whose every row equals ``dist``."""
        inputs = tuple(inputs)
        t = np.broadcast_to(dist.weights, _shape(inputs) + dist.shape)
        return cls(inputs, dist.spaces, t)


def validate_distribution(d: Distribution, tol: float = TOL_INPUT) -> ValidationReport:
    return _check_rows(d.weights, d.weights.ndim, tol)


def validate_kernel(k: StochasticKernel, tol: float = TOL_INPUT) -> ValidationReport:
    return _check_rows(k.table, k.n_out, tol)


def _require_spaces(expected, got, what: str):
    if tuple(expected) != tuple(got):
        names = lambda ss: [s.name for s in ss]  # noqa: E731
        raise SpaceMismatchError(f"{what}: expected spaces {names(expected)}, got {names(got)}")


def push_forward(d: Distribution, k: StochasticKernel) -> Distribution:
    """Output weight of o is sum_i d(i) k(o|i)."""
    _require_spaces(k.inputs, d.spaces, "push_forward")
    n_in = len(d.spaces)
    w = np.tensordot(d.weights, k.table, axes=(list(range(n_in)), list(range(n_in))))
    return Distribution(k.outputs, w)


def compose(k1: StochasticKernel, k2: StochasticKernel) -> StochasticKernel:
    """Kernel for "apply k1, then k2"."""
    _require_spaces(k2.inputs, k1.outputs, "compose")
    n = k1.n_out
    t = np.tensordot(k1.table, k2.table, axes=(list(range(k1.n_in, k1.n_in + n)), list(range(n))))
    return StochasticKernel(k1.inputs, k2.outputs, t)


@dataclass(frozen=True, eq=False)
class Behavior:
    """The table P(a, b | x, y), axes ordered (a, b, x, y)."""

    a: FiniteSpace
    b: FiniteSpace
    x: FiniteSpace
    y: FiniteSpace
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = _frozen(self.table).reshape(self.a.size, self.b.size, self.x.size, self.y.size)
        object.__setattr__(self, "table", t)

    def validate(self, tol: float = TOL_INPUT) -> ValidationReport:
        # Reorder so that (x, y) are the row axes.
        return _check_rows(np.moveaxis(self.table, (2, 3), (0, 1)), 2, tol)

    def ensure_valid(self, tol: Optional[float] = None) -> "Behavior":
        report = self.validate(input_tolerance() if tol is None else tol)
        if not report.ok:
            raise ValidationError("behavior", report)
        return self

    def same_spaces(self, other: "Behavior") -> bool:
        return (self.a, self.b, self.x, self.y) == (other.a, other.b, other.x, other.y)

    def max_diff(self, other: "Behavior") -> float:
        if self.table.shape != other.table.shape:
            raise SpaceMismatchError("behaviors have different shapes")
        return float(np.max(np.abs(self.table - other.table)))

    def prob(self, a: str, b: str, x: str, y: str) -> float:
        return float(self.table[self.a.index(a), self.b.index(b), self.x.index(x), self.y.index(y)])


def marginalize_behavior(b: Behavior, party: str) -> np.ndarray:
    """P(a|x,y) with axes (a, x, y) for party "A", or P(b|x,y) with axes (b, x, y) for "B"."""
    party = party.upper()
    if party == "A":
        return b.table.sum(axis=1)
    if party == "B":
        return b.table.sum(axis=0)
    raise ValueError(f"party must be 'A' or 'B', not {party!r}")
