"""Transformer layout templates, parameter spaces and sampling.

A geometry is described by six numbers in a fixed order::

    [turns_primary, turns_secondary, outer_dim, trace_width, trace_spacing, winding_gap]

All lengths are micrometers.  This order is the surrogate input layout and
is part of the dataset file format, so it must not change.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

MAX_TURNS = 4
MIN_TRACE_WIDTH_UM = 1.0
SAMPLE_RETRIES = 1000

FEATURE_NAMES = (
    "turns_primary",
    "turns_secondary",
    "outer_dim",
    "trace_width",
    "trace_spacing",
    "winding_gap",
)
CONTINUOUS_FIELDS = FEATURE_NAMES[2:]


class GeometryError(ValueError):
    """Raised for invalid geometries or parameter spaces."""


class XfmrTemplate(enum.Enum):
    ONE_TO_ONE = "one_to_one"
    M_TO_N = "m_to_n"
    PARALLEL_INDUCTOR = "parallel_inductor"
    EIGHT_SHAPED = "eight_shaped"

    @classmethod
    def parse(cls, text: str) -> "XfmrTemplate":
        key = text.strip().lower()
        if key in _TEMPLATE_ALIASES:
            return _TEMPLATE_ALIASES[key]
        try:
            return cls(key)
        except ValueError:
            names = sorted(set(_TEMPLATE_ALIASES) | {t.value for t in cls})
            raise GeometryError(f"unknown template {text!r}; expected one of {names}") from None

    @property
    def lobes(self) -> int:
        return 2 if self is XfmrTemplate.EIGHT_SHAPED else 1


_TEMPLATE_ALIASES = {
    "11": XfmrTemplate.ONE_TO_ONE,
    "1:1": XfmrTemplate.ONE_TO_ONE,
    "mn": XfmrTemplate.M_TO_N,
    "m:n": XfmrTemplate.M_TO_N,
    "parallel": XfmrTemplate.PARALLEL_INDUCTOR,
    "eight": XfmrTemplate.EIGHT_SHAPED,
    "8shape": XfmrTemplate.EIGHT_SHAPED,
}


@dataclass(frozen=True)
class XfmrGeometry:
    template: XfmrTemplate
    turns_primary: int
    turns_secondary: int
    outer_dim: float
    trace_width: float
    trace_spacing: float
    winding_gap: float

    def __post_init__(self):
        problem = self.violation()
        if problem:
            raise GeometryError(f"invalid geometry: {problem}")

    def violation(self) -> str | None:
        """Return a description of the first violated constraint, or None."""
        m, n = self.turns_primary, self.turns_secondary
        if not (1 <= m <= MAX_TURNS and 1 <= n <= MAX_TURNS):
            return f"turn counts ({m}, {n}) outside 1..{MAX_TURNS}"
        if self.template is XfmrTemplate.ONE_TO_ONE and (m, n) != (1, 1):
            return f"one_to_one template requires 1:1 turns, got {m}:{n}"
        for name in CONTINUOUS_FIELDS:
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                return f"{name} must be a positive finite length, got {value}"
        if self.trace_width < MIN_TRACE_WIDTH_UM:
            return f"trace_width {self.trace_width} below {MIN_TRACE_WIDTH_UM} um"
        return footprint_violation(self.outer_dim, self.trace_width, self.trace_spacing, m, n)

    @property
    def turns(self) -> tuple[int, int]:
        return self.turns_primary, self.turns_secondary

    def to_text(self) -> str:
        lines = [f"template={self.template.value}"]
        lines += [f"{name}={getattr(self, name)!r}" for name in FEATURE_NAMES]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "XfmrGeometry":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise GeometryError(f"line {lineno}: expected key=value, got {raw!r}")
            values[key.strip()] = value.strip()
        expected = {"template", *FEATURE_NAMES}
        if set(values) != expected:
            missing = sorted(expected - set(values))
            extra = sorted(set(values) - expected)
            raise GeometryError(f"geometry block mismatch: missing {missing}, unexpected {extra}")
        return cls(
            template=XfmrTemplate.parse(values["template"]),
            turns_primary=int(values["turns_primary"]),
            turns_secondary=int(values["turns_secondary"]),
            **{name: float(values[name]) for name in CONTINUOUS_FIELDS},
        )


def footprint_violation(outer_dim, width, spacing, m, n) -> str | None:
    # both windings share the footprint, so the larger turn count governs
    turns = max(m, n)
    needed = 2 * turns * (width + spacing)
    if outer_dim <= needed:
        return (
            f"footprint: outer_dim {outer_dim:.4g} um must exceed "
            f"2*{turns}*(trace_width + trace_spacing) = {needed:.4g} um"
        )
    return None


def _default_pairs(template: XfmrTemplate) -> tuple[tuple[int, int], ...]:
    if template is XfmrTemplate.ONE_TO_ONE:
        return ((1, 1),)
    if template is XfmrTemplate.M_TO_N:
        return tuple((m, n) for m in range(1, MAX_TURNS + 1) for n in range(1, MAX_TURNS + 1))
    return ((1, 1), (2, 2))


@dataclass(frozen=True)
class ParamSpace:
    """Closed sampling intervals per continuous field plus allowed turn pairs."""

    outer_dim: tuple[float, float] = (40.0, 200.0)
    trace_width: tuple[float, float] = (2.0, 12.0)
    trace_spacing: tuple[float, float] = (2.0, 10.0)
    winding_gap: tuple[float, float] = (1.0, 6.0)
    turn_pairs: tuple[tuple[int, int], ...] = field(default=())

    @classmethod
    def default(cls, template: XfmrTemplate, **overrides) -> "ParamSpace":
        overrides.setdefault("turn_pairs", _default_pairs(template))
        return cls(**overrides)

    def intervals(self) -> dict[str, tuple[float, float]]:
        return {name: getattr(self, name) for name in CONTINUOUS_FIELDS}

    def validate(self, template: XfmrTemplate) -> None:
        for name, (lo, hi) in self.intervals().items():
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise GeometryError(f"interval for {name} must satisfy lower < upper, got ({lo}, {hi})")
            if lo <= 0:
                raise GeometryError(f"interval for {name} must be positive, got ({lo}, {hi})")
        if self.trace_width[1] < MIN_TRACE_WIDTH_UM:
            raise GeometryError(f"trace_width interval lies below {MIN_TRACE_WIDTH_UM} um")
        if not self.turn_pairs:
            raise GeometryError("no turn pairs allowed")
        for m, n in self.turn_pairs:
            if not (1 <= m <= MAX_TURNS and 1 <= n <= MAX_TURNS):
                raise GeometryError(f"turn pair ({m}, {n}) outside 1..{MAX_TURNS}")
            if template is XfmrTemplate.ONE_TO_ONE and (m, n) != (1, 1):
                raise GeometryError(f"one_to_one template cannot use turn pair ({m}, {n})")

    def with_pairs(self, *pairs: tuple[int, int]) -> "ParamSpace":
        return replace(self, turn_pairs=tuple(pairs))

    @classmethod
    def from_text(cls, text: str) -> "ParamSpace":
        kv = {}
        for line in text.splitlines():
            if line.strip() and not line.startswith("#"):
                key, sep, value = line.partition("=")
                if not sep:
                    raise GeometryError(f"malformed parameter-space line {line!r}")
                kv[key.strip()] = value.strip()
        try:
            fields = {name: tuple(float(v) for v in kv.pop(name).split(",")) for name in CONTINUOUS_FIELDS}
            pairs = tuple(tuple(int(v) for v in p.split(":")) for p in kv.pop("turn_pairs").split(";") if p)
        except (KeyError, ValueError) as exc:
            raise GeometryError(f"incomplete or malformed parameter space: {exc}") from None
        if kv:
            raise GeometryError(f"unknown parameter-space keys: {sorted(kv)}")
        return cls(turn_pairs=pairs, **fields)

    def to_text(self) -> str:
        lines = [f"{name}={lo!r},{hi!r}" for name, (lo, hi) in self.intervals().items()]
        lines.append("turn_pairs=" + ";".join(f"{m}:{n}" for m, n in self.turn_pairs))
        return "\n".join(lines) + "\n"


def sample_geometry(space: ParamSpace, template: XfmrTemplate, rng_seed: int) -> XfmrGeometry:
    """Draw one valid geometry by rejection sampling.

    Turn pairs are uniform over the allowed set and every continuous field is
    uniform on its interval.  The same seed always yields the same geometry.
    """
    space.validate(template)
    rng = np.random.default_rng(rng_seed)
    pairs = space.turn_pairs
    lows = np.array([iv[0] for iv in space.intervals().values()])
    highs = np.array([iv[1] for iv in space.intervals().values()])
    last_problem = None
    for _ in range(SAMPLE_RETRIES):
        m, n = pairs[int(rng.integers(len(pairs)))]
        outer, width, spacing, gap = rng.uniform(lows, highs)
        width = max(width, MIN_TRACE_WIDTH_UM)
        last_problem = footprint_violation(outer, width, spacing, m, n)
        if last_problem is None:
            return XfmrGeometry(template, m, n, float(outer), float(width), float(spacing), float(gap))
    raise GeometryError(f"no feasible geometry after {SAMPLE_RETRIES} draws; last violation: {last_problem}")


def area_mm2(g: XfmrGeometry) -> float:
    """Layout footprint in mm^2; eight-shaped layouts occupy two square lobes."""
    return g.template.lobes * (g.outer_dim * 1e-3) ** 2


def feature_vector(g: XfmrGeometry) -> np.ndarray:
    return np.array([getattr(g, name) for name in FEATURE_NAMES], dtype=float)


def from_features(vec, template: XfmrTemplate) -> XfmrGeometry:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (len(FEATURE_NAMES),):
        raise GeometryError(f"feature vector must have length {len(FEATURE_NAMES)}, got shape {vec.shape}")
    m, n = vec[0], vec[1]
    if m != round(m) or n != round(n):
        raise GeometryError(f"turn counts must be integers, got ({m}, {n})")
    return XfmrGeometry(template, int(m), int(n), *(float(v) for v in vec[2:]))
