"""JSON model-spec, behavior and report documents.

Model documents look like::

    {
      "format": "dynbell.model/1",
      "kind": "dynamical" | "generalized" | "static",
      "spaces": {"g": ["0", "1"], ...},
      "distributions": {"rho0": {"spaces": [...], "shape": [...], "weights": [...]}},
      "kernels": {"tA": {"inputs": [...], "outputs": [...], "shape": [...], "table": [...]}},
      "model": {"rho0": "rho0", "evolution": "evolution", "tA": "tA", ...},
      "flags": {"global_mode": "read-only", "distant": [], "rho_pre_conditioned": false}
    }

Tables are flattened row-major over ``inputs + outputs``. Documents are
written with sorted keys so that equal models serialize to equal bytes.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from typing import Any, Optional, Union

import numpy as np

from . import __version__
from .core import (
    Behavior,
    Distribution,
    DynbellError,
    FiniteSpace,
    StochasticKernel,
    TOL_CHECK,
    input_tolerance,
)
from .models import DISTANT_TABLES, DynamicalModel, FlagError, GeneralizedModel, StaticBellModel

MODEL_FORMAT = "dynbell.model/1"
BEHAVIOR_FORMAT = "dynbell.behavior/1"
REPORT_FORMAT = "dynbell.report/1"

Model = Union[DynamicalModel, GeneralizedModel, StaticBellModel]

_DYN_ROLES = ("rho0", "evolution", "tA", "tB", "pA", "pB")


class ParseError(DynbellError, ValueError):
    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


def dumps(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def loads(text: str, source: str = "<input>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"{source}:{e.lineno}:{e.colno}") from None


# -- encoding ---------------------------------------------------------------


class _Collector:
    def __init__(self):
        self.spaces: dict[str, tuple[str, ...]] = {}
        self.distributions: dict[str, dict] = {}
        self.kernels: dict[str, dict] = {}

    def space(self, s: FiniteSpace) -> str:
        seen = self.spaces.setdefault(s.name, s.elements)
        if seen != s.elements:
            raise ValueError(f"two different spaces share the name {s.name!r}")
        return s.name

    def distribution(self, name: str, d: Distribution) -> str:
        self.distributions[name] = {
            "spaces": [self.space(s) for s in d.spaces],
            "shape": list(d.shape),
            "weights": d.weights.ravel().tolist(),
        }
        return name

    def kernel(self, name: str, k: StochasticKernel) -> str:
        self.kernels[name] = {
            "inputs": [self.space(s) for s in k.inputs],
            "outputs": [self.space(s) for s in k.outputs],
            "shape": list(k.table.shape),
            "table": k.table.ravel().tolist(),
        }
        return name

    def doc(self, kind: str, wiring: dict, flags: Optional[dict] = None) -> dict:
        out = {
            "format": MODEL_FORMAT,
            "kind": kind,
            "spaces": {k: list(v) for k, v in self.spaces.items()},
            "distributions": self.distributions,
            "kernels": self.kernels,
            "model": wiring,
        }
        if flags is not None:
            out["flags"] = flags
        return out


def model_to_doc(m: Model) -> dict:
    c = _Collector()
    if isinstance(m, StaticBellModel):
        wiring = {"rho_pre": c.distribution("rho_pre", m.rho_pre),
                  "qA": c.kernel("qA", m.qA), "qB": c.kernel("qB", m.qB)}
        return c.doc("static", wiring)
    wiring = {"rho0": c.distribution("rho0", m.rho0)}
    for role in _DYN_ROLES[1:]:
        wiring[role] = c.kernel(role, getattr(m, role))
    if isinstance(m, DynamicalModel):
        return c.doc("dynamical", wiring)
    if m.rho_pre_conditioned is not None:
        wiring["rho_pre_conditioned"] = c.kernel("rho_pre_conditioned", m.rho_pre_conditioned)
    flags = {"global_mode": m.global_mode, "distant": sorted(m.distant),
             "rho_pre_conditioned": m.rho_pre_conditioned is not None}
    return c.doc("generalized", wiring, flags)


def behavior_to_doc(b: Behavior) -> dict:
    return {
        "format": BEHAVIOR_FORMAT,
        "spaces": {"a": list(b.a.elements), "b": list(b.b.elements),
                   "x": list(b.x.elements), "y": list(b.y.elements)},
        "table": b.table.tolist(),
    }


# -- decoding ---------------------------------------------------------------


def _get(doc: dict, key: str, where: str, kind=None):
    if not isinstance(doc, dict) or key not in doc:
        raise ParseError(f"missing key {key!r}", where)
    v = doc[key]
    if kind is not None and not isinstance(v, kind):
        raise ParseError(f"{key!r} must be a {kind.__name__}", f"{where}.{key}")
    return v


def _array(values, shape, where: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("table entries must be numbers", where) from None
    if arr.size != int(np.prod(shape)):
        raise ParseError(f"{arr.size} entries for shape {list(shape)}", where)
    return arr.reshape(shape)


def _resolve(names, spaces, where):
    if not isinstance(names, list):
        raise ParseError("expected a list of space names", where)
    out = []
    for n in names:
        if n not in spaces:
            raise ParseError(f"undeclared space {n!r}", where)
        out.append(spaces[n])
    return tuple(out)


def doc_to_model(doc: dict) -> Model:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object", "$")
    fmt = doc.get("format")
    if fmt != MODEL_FORMAT:
        raise ParseError(f"unsupported format {fmt!r}", "$.format")
    spaces = {}
    for name, elements in _get(doc, "spaces", "$", dict).items():
        if not isinstance(elements, list) or not elements:
            raise ParseError("space needs a non-empty element list", f"$.spaces.{name}")
        try:
            spaces[name] = FiniteSpace(name, tuple(str(e) for e in elements))
        except ValueError as e:
            raise ParseError(str(e), f"$.spaces.{name}") from None
    dists, kernels = {}, {}
    for name, d in doc.get("distributions", {}).items():
        where = f"$.distributions.{name}"
        sp = _resolve(_get(d, "spaces", where), spaces, f"{where}.spaces")
        dists[name] = Distribution(sp, _array(_get(d, "weights", where), [s.size for s in sp], f"{where}.weights"))
    for name, k in doc.get("kernels", {}).items():
        where = f"$.kernels.{name}"
        ins = _resolve(_get(k, "inputs", where), spaces, f"{where}.inputs")
        outs = _resolve(_get(k, "outputs", where), spaces, f"{where}.outputs")
        shape = [s.size for s in ins + outs]
        kernels[name] = StochasticKernel(ins, outs, _array(_get(k, "table", where), shape, f"{where}.table"))

    wiring = _get(doc, "model", "$", dict)

    def role(r, pool, what):
        ref = _get(wiring, r, "$.model")
        if ref not in pool:
            raise ParseError(f"no {what} named {ref!r}", f"$.model.{r}")
        return pool[ref]

    kind = _get(doc, "kind", "$")
    if kind == "static":
        return StaticBellModel(role("rho_pre", dists, "distribution"),
                               role("qA", kernels, "kernel"), role("qB", kernels, "kernel"))
    parts = [role("rho0", dists, "distribution")] + [role(r, kernels, "kernel") for r in _DYN_ROLES[1:]]
    if kind == "dynamical":
        return DynamicalModel(*parts)
    if kind != "generalized":
        raise ParseError(f"unknown model kind {kind!r}", "$.kind")
    flags = doc.get("flags", {})
    declared = bool(flags.get("rho_pre_conditioned", False))
    if declared != ("rho_pre_conditioned" in wiring):
        raise FlagError("rho_pre_conditioned flag and model wiring disagree")
    distant = flags.get("distant", [])
    if not set(distant) <= set(DISTANT_TABLES):
        raise ParseError(f"unknown distant tables {distant}", "$.flags.distant")
    cond = role("rho_pre_conditioned", kernels, "kernel") if declared else None
    return GeneralizedModel(*parts, global_mode=flags.get("global_mode", "read-only"),
                            rho_pre_conditioned=cond, distant=frozenset(distant))


def doc_to_behavior(doc: dict) -> Behavior:
    if doc.get("format") != BEHAVIOR_FORMAT:
        raise ParseError(f"unsupported format {doc.get('format')!r}", "$.format")
    sp = _get(doc, "spaces", "$", dict)
    a, b, x, y = (FiniteSpace(n, tuple(_get(sp, n, "$.spaces", list))) for n in "abxy")
    t = _array(_get(doc, "table", "$"), (a.size, b.size, x.size, y.size), "$.table")
    return Behavior(a, b, x, y, t).ensure_valid()


def load_model(path: str) -> Model:
    with open(path, encoding="utf-8") as fh:
        return doc_to_model(loads(fh.read(), path))


def save_model(m: Model, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model_to_doc(m)))


# -- reports ----------------------------------------------------------------


def digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def make_report(operation: str, results: dict, input_digest: Optional[str] = None,
                parameters: Optional[dict] = None, tol_check: float = TOL_CHECK,
                timestamp: Optional[str] = None) -> dict:
    return {
        "format": REPORT_FORMAT,
        "tool": "dynbell",
        "version": __version__,
        "operation": operation,
        "input_digest": input_digest,
        "parameters": _plain(parameters or {}),
        "tolerances": {"input": input_tolerance(), "check": tol_check},
        "results": _plain(results),
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


# -- node specs -------------------------------------------------------------

NODES_FORMAT = "dynbell.nodes/1"


def _labeled_dist(d: dict, name: str, where: str) -> Distribution:
    labels = _get(d, "labels", where, list)
    w = _array(_get(d, "weights", where), [len(labels)], f"{where}.weights")
    try:
        sp = FiniteSpace(name, tuple(str(l) for l in labels))
    except ValueError as e:
        raise ParseError(str(e), f"{where}.labels") from None
    return Distribution(sp, w).ensure_valid(what=where)


def _node(doc: dict, who: str, shared: Distribution, other_settings: list):
    from .protocol import NodeProgram

    where = f"$.{who}"
    d = _get(doc, who, "$", dict)
    settings = FiniteSpace("x" if who == "alice" else "y", tuple(map(str, _get(d, "settings", where, list))))
    outcomes = FiniteSpace("a" if who == "alice" else "b", tuple(map(str, _get(d, "outcomes", where, list))))
    private = _labeled_dist(d["private"], f"{who}_private", f"{where}.private") if "private" in d \
        else Distribution(FiniteSpace(f"{who}_private", ("-",)), [1.0])
    covert = bool(d.get("covert_input_enabled", False))
    cspace = FiniteSpace("y" if who == "alice" else "x", tuple(map(str, other_settings))) if covert else None
    shape = [shared.weights.size, private.weights.size, settings.size] + ([cspace.size] if covert else [])
    # Outcomes are given by label so node files stay readable.
    raw = np.asarray(_get(d, "table", where), dtype=object)
    if list(raw.shape) != shape:
        raise ParseError(f"table shape {list(raw.shape)}, expected {shape}", f"{where}.table")
    try:
        table = np.vectorize(lambda v: outcomes.index(str(v)), otypes=[np.int64])(raw)
    except KeyError as e:
        raise ParseError(str(e), f"{where}.table") from None
    return NodeProgram(who, shared.spaces[0], private, settings, outcomes, table, covert, cspace)


def doc_to_nodes(doc: dict):
    """Parse a node-spec document into ``(alice, bob, shared, settings_given_shared)``.

    Tables are nested lists indexed [shared][private][own setting] plus a
    trailing [other setting] axis when ``covert_input_enabled`` is true. The
    optional ``settings_given_shared`` (shape shared x X x Y) is the
    superdeterminism switch.
    """
    if not isinstance(doc, dict) or doc.get("format") != NODES_FORMAT:
        raise ParseError(f"unsupported format {doc.get('format') if isinstance(doc, dict) else None!r}", "$.format")
    shared = _labeled_dist(_get(doc, "shared", "$", dict), "shared", "$.shared")
    xs = _get(_get(doc, "alice", "$", dict), "settings", "$.alice", list)
    ys = _get(_get(doc, "bob", "$", dict), "settings", "$.bob", list)
    alice = _node(doc, "alice", shared, ys)
    bob = _node(doc, "bob", shared, xs)
    sgs = doc.get("settings_given_shared")
    if sgs is not None:
        sgs = _array(sgs, [shared.weights.size, len(xs), len(ys)], "$.settings_given_shared")
        dev = np.abs(sgs.sum(axis=(1, 2)) - 1.0)
        if np.any(sgs < 0) or np.any(dev > input_tolerance()):
            raise ParseError("each shared value needs a distribution over (x, y)", "$.settings_given_shared")
    return alice, bob, shared, sgs


def nodes_to_doc(alice, bob, shared: Distribution, settings_given_shared=None) -> dict:
    def node(n):
        out = {
            "settings": list(n.settings.elements),
            "outcomes": list(n.outcomes.elements),
            "private": {"labels": list(n.private.spaces[0].elements),
                        "weights": n.private.weights.ravel().tolist()},
            "covert_input_enabled": n.covert_input_enabled,
            "table": np.asarray(n.outcomes.elements, dtype=object)[n.table].tolist(),
        }
        return out

    doc = {
        "format": NODES_FORMAT,
        "shared": {"labels": list(shared.spaces[0].elements), "weights": shared.weights.ravel().tolist()},
        "alice": node(alice),
        "bob": node(bob),
    }
    if settings_given_shared is not None:
        doc["settings_given_shared"] = np.asarray(settings_given_shared).tolist()
    return doc
