"""Scenario files: JSON description of a background plus probes and runs.

Schema (all blocks except ``name`` and ``metric`` optional)::

    {
      "name": "coupled_weakfield",
      "constants": {"m": 1.3, "e": 0.4, "kappa": 1.0, "params": {"eps": 0.05}},
      "metric": {"catalog": "minkowski"}
              | {"catalog": "weak_field", "phi": "<expr>"}
              | {"components": {"00": "<expr>", "01": ..., "33": ...}}
              | {"components": [[...4 exprs...], ...4 rows...]},
      "potential": ["<expr>", "<expr>", "<expr>", "<expr>"],
      "current": ["<expr>", ...],
      "probes": {"points": [{"x": [...], "y": [...]}, ...]}
              | {"box": {"x": [[lo, hi] ×4], "y": [[lo, hi] ×4]},
                 "count": 100, "seed": 7},
      "geodesics": {"tau_end": 10.0, "rtol": 1e-10, "atol": 1e-10,
                    "initial": [{"x": [...], "y": [...]}, ...]},
      "section": "const:1,0,0,0" | "expr:e0;e1;e2;e3",
      "toggles": ["drop_beta_over_L", ...]
    }

Expressions are strings in the expression language or plain numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import background as bgm
from . import exprlang as ex
from .maxwell import Section, Toggles

__all__ = [
    "ScenarioError",
    "ScenarioFile",
    "ProbeBox",
    "GeodesicSpec",
    "SplitMix64",
    "load_scenario",
    "parse_scenario",
    "sample_probes",
    "shipped_scenarios",
    "SCENARIO_DIR",
]

SCENARIO_DIR = Path(__file__).parent / "scenarios"

_TOP_KEYS = ("name", "description", "constants", "metric", "potential", "current",
             "probes", "geodesics", "section", "toggles")


class ScenarioError(ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class SplitMix64:
    """64-bit splitmix generator; ``random()`` maps the top 53 bits to [0, 1)."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()


@dataclass(frozen=True)
class ProbeBox:
    x: tuple
    y: tuple
    count: int
    seed: int


@dataclass(frozen=True)
class GeodesicSpec:
    initial: tuple
    tau_end: float = 10.0
    rtol: float = 1e-10
    atol: float = 1e-10


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    background: bgm.ScenarioBackground
    probes: tuple = ()
    box: ProbeBox | None = None
    geodesics: GeodesicSpec | None = None
    section: Section = field(default_factory=Section.static)
    toggles: Toggles = field(default_factory=Toggles)
    raw: dict = field(default_factory=dict)
    path: str | None = None

    def probe_points(self, count: int | None = None, seed: int | None = None):
        """Explicit points, or ``count`` samples from the box with ``seed``."""
        if self.box is not None:
            n = self.box.count if count is None else count
            s = self.box.seed if seed is None else seed
            pts = sample_probes(self.background, self.box, n, s)
        else:
            pts = list(self.probes) if count is None else list(self.probes)[:count]
        return [(np.asarray(x, dtype=float), np.asarray(y, dtype=float)) for x, y in pts]

    def to_dict(self):
        """Normalised scenario document (reloads to an equivalent scenario)."""
        return self.raw


def _fail(path, msg):
    raise ScenarioError(path, msg)


def _expr_list(block, path, params, required=False):
    if block is None:
        if required:
            _fail(path, "missing")
        return None
    if not isinstance(block, list) or len(block) != 4:
        _fail(path, "expected a list of four expressions")
    out = []
    for k, e in enumerate(block):
        out.append(_parse(e, f"{path}[{k}]", params))
    return out


def _parse(e, path, params):
    if isinstance(e, bool) or not isinstance(e, (int, float, str)):
        _fail(path, "expected an expression string or number")
    if isinstance(e, (int, float)):
        if not math.isfinite(e):
            _fail(path, "non-finite number")
        return ex.Const(float(e))
    try:
        return ex.parse_expr(e, params)
    except ex.UnknownIdentifier:
        raise
    except ex.ExprSyntaxError as exc:
        raise ex.ExprSyntaxError(f"{path}: {exc.message}", exc.offset, e) from exc


def _vector(v, path, n=4):
    if not isinstance(v, list) or len(v) != n:
        _fail(path, f"expected a list of {n} numbers")
    try:
        out = tuple(float(t) for t in v)
    except (TypeError, ValueError):
        _fail(path, "expected numbers")
    if not all(math.isfinite(t) for t in out):
        _fail(path, "non-finite number")
    return out


def _point(d, path):
    if not isinstance(d, dict) or "x" not in d or "y" not in d:
        _fail(path, "expected an object with 'x' and 'y'")
    return _vector(d["x"], f"{path}.x"), _vector(d["y"], f"{path}.y")


def _metric(block, params, consts):
    if not isinstance(block, dict):
        _fail("metric", "expected an object")
    cat = block.get("catalog")
    if cat == "minkowski":
        return bgm.minkowski(**consts)
    if cat == "weak_field":
        if "phi" not in block:
            _fail("metric.phi", "missing")
        phi = _parse(block["phi"], "metric.phi", params)
        bg = bgm.weak_field(phi, **consts)
        return bg
    if cat not in (None, "general"):
        _fail("metric.catalog", f"unknown catalog {cat!r}")
    comps = block.get("components")
    if isinstance(comps, dict):
        parsed = {}
        for key, val in comps.items():
            if len(key) != 2 or not key.isdigit() or not all(c in "0123" for c in key):
                _fail(f"metric.components.{key}", "keys are index pairs like '01'")
            i, j = sorted((int(key[0]), int(key[1])))
            k2 = f"{i}{j}"
            node = _parse(val, f"metric.components.{key}", params)
            if k2 in parsed and ex.structure(parsed[k2]) != ex.structure(node):
                _fail(f"metric.components.{key}",
                      f"entries ({i},{j}) and ({j},{i}) differ")
            parsed[k2] = node
        return bgm.general(parsed, **consts)
    if isinstance(comps, list):
        if len(comps) != 4 or any(not isinstance(r, list) or len(r) != 4 for r in comps):
            _fail("metric.components", "expected a 4×4 list")
        rows = [[_parse(comps[i][j], f"metric.components[{i}][{j}]", params)
                 for j in range(4)] for i in range(4)]
        for i in range(4):
            for j in range(i + 1, 4):
                if ex.structure(rows[i][j]) != ex.structure(rows[j][i]):
                    _fail(f"metric.components[{i}][{j}]",
                          f"entries ({i},{j}) and ({j},{i}) differ")
        return bgm.general(rows, **consts)
    _fail("metric", "needs a 'catalog' or 'components'")


def parse_scenario(doc: dict, path: str | None = None) -> ScenarioFile:
    """Validate a scenario document and build the background."""
    if not isinstance(doc, dict):
        _fail("$", "scenario must be a JSON object")
    for key in doc:
        if key not in _TOP_KEYS:
            _fail(key, "unknown field")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        _fail("name", "expected a non-empty string")
    c = doc.get("constants", {})
    if not isinstance(c, dict):
        _fail("constants", "expected an object")
    for key in c:
        if key not in ("m", "e", "kappa", "params"):
            _fail(f"constants.{key}", "unknown field")
    params = c.get("params", {})
    if not isinstance(params, dict):
        _fail("constants.params", "expected an object")
    pvals = {}
    for k, v in params.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            _fail(f"constants.params.{k}", "expected a number")
        pvals[k] = float(v)
    consts = {}
    for key, default in (("m", 1.0), ("e", 0.0), ("kappa", 1.0)):
        v = c.get(key, default)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            _fail(f"constants.{key}", "expected a finite number")
        consts[key] = float(v)
    if consts["m"] <= 0:
        _fail("constants.m", "must be positive")
    if consts["kappa"] <= 0:
        _fail("constants.kappa", "must be positive")
    consts["params"] = pvals
    consts["A"] = _expr_list(doc.get("potential"), "potential", pvals)
    consts["J"] = _expr_list(doc.get("current"), "current", pvals)
    if "metric" not in doc:
        _fail("metric", "missing")
    bg = _metric(doc["metric"], pvals, consts)
    bg.sources.update({k: doc[k] for k in ("potential", "current") if k in doc})

    probes, box = (), None
    pb = doc.get("probes")
    if pb is not None:
        if not isinstance(pb, dict):
            _fail("probes", "expected an object")
        if "points" in pb:
            if not isinstance(pb["points"], list):
                _fail("probes.points", "expected a list")
            probes = tuple(_point(p, f"probes.points[{k}]") for k, p in enumerate(pb["points"]))
        if "box" in pb:
            b = pb["box"]
            if not isinstance(b, dict):
                _fail("probes.box", "expected an object")
            ranges = {}
            for key in ("x", "y"):
                r = b.get(key)
                if not isinstance(r, list) or len(r) != 4:
                    _fail(f"probes.box.{key}", "expected four [lo, hi] pairs")
                ranges[key] = tuple(_vector(v, f"probes.box.{key}[{k}]", 2)
                                    for k, v in enumerate(r))
            count = pb.get("count", 100)
            seed = pb.get("seed", 0)
            if not isinstance(count, int) or count < 0:
                _fail("probes.count", "expected a non-negative integer")
            if not isinstance(seed, int) or seed < 0:
                _fail("probes.seed", "expected a non-negative integer")
            box = ProbeBox(ranges["x"], ranges["y"], count, seed)

    geo = None
    gb = doc.get("geodesics")
    if gb is not None:
        if not isinstance(gb, dict):
            _fail("geodesics", "expected an object")
        init = gb.get("initial", [])
        if not isinstance(init, list):
            _fail("geodesics.initial", "expected a list")
        pts = tuple(_point(p, f"geodesics.initial[{k}]") for k, p in enumerate(init))
        kw = {}
        for key in ("tau_end", "rtol", "atol"):
            if key in gb:
                v = gb[key]
                if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
                    _fail(f"geodesics.{key}", "expected a non-negative number")
                kw[key] = float(v)
        geo = GeodesicSpec(pts, **kw)

    section = Section.static()
    if "section" in doc:
        if not isinstance(doc["section"], str):
            _fail("section", "expected 'const:...' or 'expr:...'")
        try:
            section = Section.parse(doc["section"], pvals)
        except (ValueError, ex.ExprError) as exc:
            if isinstance(exc, ex.UnknownIdentifier):
                raise
            _fail("section", str(exc))
    toggles = Toggles()
    tb = doc.get("toggles")
    if tb is not None:
        if isinstance(tb, dict):
            names = [k if v else None for k, v in tb.items()]
            names = [n for n in names if n]
        elif isinstance(tb, list):
            names = tb
        else:
            _fail("toggles", "expected a list of names")
        try:
            toggles = Toggles.from_names(names)
        except ValueError as exc:
            _fail("toggles", str(exc))
    return ScenarioFile(name, bg, probes, box, geo, section, toggles, doc, path)


def load_scenario(path) -> ScenarioFile:
    """Read and validate a scenario file; a bare shipped name is accepted."""
    p = Path(path)
    if not p.exists() and (SCENARIO_DIR / f"{path}.json").exists():
        p = SCENARIO_DIR / f"{path}.json"
    if not p.exists():
        raise FileNotFoundError(f"scenario file not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from exc
    return parse_scenario(doc, str(p))


def shipped_scenarios():
    """Names of the scenario files bundled with the package."""
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))


def sample_probes(bg: bgm.ScenarioBackground, box: ProbeBox, count: int, seed: int,
                  max_attempts: int = 1000):
    """Timelike probes (g̃(y, y) > 0 and L > 0) drawn uniformly from the box.

    Draws x then y coordinate by coordinate from one splitmix stream and
    rejects non-timelike candidates.
    """
    rng = SplitMix64(seed)
    out = []
    attempts = 0
    while len(out) < count:
        if attempts >= max_attempts * max(count, 1):
            raise ScenarioError("probes.box", "could not sample enough timelike probes")
        attempts += 1
        x = np.array([rng.uniform(*r) for r in box.x])
        y = np.array([rng.uniform(*r) for r in box.y])
        try:
            gt = bg.metric(x)
            a2 = float(y @ gt @ y)
            if not a2 > 0:
                continue
            L = bg.m * math.sqrt(a2) + bg.e * float(bg.potential(x) @ y)
        except ArithmeticError:
            continue
        if L > 0:
            out.append((tuple(float(v) for v in x), tuple(float(v) for v in y)))
    return out
