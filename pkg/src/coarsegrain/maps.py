"""Piecewise-linear interval maps on [0, 1].

Maps are stored branch by branch.  Rational data is kept as
:class:`fractions.Fraction` so that every downstream computation (images,
preimage measures, transition probabilities) stays exact.  Irrational slopes
cannot be detected from finite data, so they are declared by the caller via
:meth:`SlopeClass.irrational` and carried as floats.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Union

Number = Union[Fraction, float]

# Tolerance used whenever a map carries float data.
FLOAT_TOL = 1e-12


class MapError(ValueError):
    """Raised for structurally invalid maps or out-of-domain arguments."""


class BreakpointError(MapError):
    """Raised when a derivative is requested exactly at a breakpoint."""


def as_fraction(value) -> Fraction:
    """Parse ``"2/3"``, ``3``, or a Fraction into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def _as_number(value) -> Number:
    # JSON strings are exact, JSON floats stay floats.
    if isinstance(value, float):
        return value
    return as_fraction(value)


@dataclass(frozen=True)
class SlopeClass:
    """Magnitude of a slope together with its arithmetic kind.

    ``kind`` is ``"integer"``, ``"rational"`` or ``"irrational"``.  Exact
    kinds carry ``value`` (a reduced Fraction); the irrational kind carries
    ``approx`` and a human-readable ``label``.
    """

    kind: str
    value: Fraction | None = None
    approx: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.kind in ("integer", "rational"):
            if self.value is None or self.value <= 0:
                raise MapError("exact slope magnitude must be a positive rational")
            expected = "integer" if self.value.denominator == 1 else "rational"
            if self.kind != expected:
                raise MapError(f"slope {self.value} is {expected}, not {self.kind}")
            object.__setattr__(self, "approx", float(self.value))
            if not self.label:
                object.__setattr__(self, "label", str(self.value))
        elif self.kind == "irrational":
            if not (self.approx > 0 and math.isfinite(self.approx)):
                raise MapError("irrational slope needs a positive finite approximation")
            if not self.label:
                object.__setattr__(self, "label", repr(self.approx))
        else:
            raise MapError(f"unknown slope kind {self.kind!r}")

    @classmethod
    def exact(cls, value) -> "SlopeClass":
        v = abs(as_fraction(value))
        return cls("integer" if v.denominator == 1 else "rational", value=v)

    @classmethod
    def irrational(cls, approx: float, label: str = "") -> "SlopeClass":
        return cls("irrational", approx=abs(float(approx)), label=label)

    @property
    def is_exact(self) -> bool:
        return self.kind != "irrational"

    @property
    def magnitude(self) -> Number:
        return self.value if self.is_exact else self.approx

    @property
    def p(self) -> int:
        """Reduced denominator of an exact magnitude q/p."""
        if not self.is_exact:
            raise MapError("irrational slope has no denominator")
        return self.value.denominator

    @property
    def q(self) -> int:
        if not self.is_exact:
            raise MapError("irrational slope has no numerator")
        return self.value.numerator

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class Branch:
    """One linear piece ``x -> sign * |slope| * x + intercept``."""

    sign: int
    slope: SlopeClass
    intercept: Number

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise MapError("branch sign must be +1 or -1")
        if self.slope.is_exact:
            if not isinstance(self.intercept, Fraction):
                raise MapError("exact slopes need an exact intercept")
        else:
            object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def coef(self) -> Number:
        return self.sign * self.slope.magnitude

    def __call__(self, x):
        return self.coef * x + self.intercept


@dataclass(frozen=True)
class PiecewiseLinearMap:
    """Interval map that is linear on each ``E_i = (a_{i-1}, a_i)``.

    Branch ``i`` is used on the half-open interval ``[a_{i-1}, a_i)``; the
    last branch also owns ``x = 1``.  Construction only enforces structure
    (ordered breakpoints, images inside [0, 1]); Lebesgue invariance is
    checked separately by :func:`verify_lebesgue_invariance` so that
    non-invariant maps can still be built for negative tests.
    """

    breakpoints: tuple
    branches: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        bps = tuple(_as_number(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "branches", tuple(self.branches))
        if len(bps) < 2 or len(self.branches) != len(bps) - 1:
            raise MapError("need r >= 1 branches and r + 1 breakpoints")
        if bps[0] != 0 or bps[-1] != 1:
            raise MapError("breakpoints must start at 0 and end at 1")
        if any(b >= c for b, c in zip(bps, bps[1:])):
            raise MapError("breakpoints must be strictly increasing")
        tol = 0 if self.is_exact else FLOAT_TOL
        for i, br in enumerate(self.branches):
            lo, hi = self.branch_image(i)
            if lo < -tol or hi > 1 + tol:
                raise MapError(f"branch {i + 1} maps outside [0, 1]: [{lo}, {hi}]")

    @property
    def r(self) -> int:
        return len(self.branches)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(b, Fraction) for b in self.breakpoints) and all(
            br.slope.is_exact for br in self.branches
        )

    def lengths(self) -> list:
        return [b - a for a, b in zip(self.breakpoints, self.breakpoints[1:])]

    def branch_image(self, i: int) -> tuple:
        """Closed hull ``(lo, hi)`` of the image of branch ``i`` (0-based)."""
        br = self.branches[i]
        y0 = br(self.breakpoints[i])
        y1 = br(self.breakpoints[i + 1])
        return (y0, y1) if y0 <= y1 else (y1, y0)

    def branch_index(self, x) -> int:
        """0-based index of the branch owning ``x``."""
        if not 0 <= x <= 1:
            raise MapError(f"x = {x} is outside [0, 1]")
        i = bisect.bisect_right(self.breakpoints, x) - 1
        return min(i, self.r - 1)

    def __call__(self, x):
        return evaluate(self, x)

    def split(self, at) -> "PiecewiseLinearMap":
        """Same map with an extra (collinear) breakpoint at ``at``."""
        at = _as_number(at)
        if at in self.breakpoints or not 0 < at < 1:
            raise MapError(f"cannot split at {at}")
        i = self.branch_index(at)
        bps = list(self.breakpoints)
        bps.insert(i + 1, at)
        brs = list(self.branches)
        brs.insert(i, brs[i])
        return PiecewiseLinearMap(tuple(bps), tuple(brs), name=self.name)

    def float_coefficients(self) -> tuple:
        """(breakpoints, slopes, intercepts) as plain floats, for simulation."""
        return (
            [float(b) for b in self.breakpoints],
            [float(br.coef) for br in self.branches],
            [float(br.intercept) for br in self.branches],
        )

    # -- JSON map-spec -----------------------------------------------------

    def to_dict(self) -> dict:
        def num(v):
            return str(v) if isinstance(v, Fraction) else float(v)

        branches = []
        for br in self.branches:
            if br.slope.is_exact:
                s = br.sign * br.slope.value
                slope = {"kind": "rational", "num": s.numerator, "den": s.denominator}
            else:
                slope = {
                    "kind": "irrational",
                    "approx": br.sign * br.slope.approx,
                    "label": br.slope.label,
                }
            branches.append({"slope": slope, "intercept": num(br.intercept)})
        out = {"breakpoints": [num(b) for b in self.breakpoints], "branches": branches}
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PiecewiseLinearMap":
        branches = []
        for item in data["branches"]:
            slope = item["slope"]
            kind = slope.get("kind", "rational")
            if kind in ("rational", "integer"):
                if "value" in slope:
                    s = as_fraction(slope["value"])
                else:
                    s = Fraction(int(slope["num"]), int(slope.get("den", 1)))
                if s == 0:
                    raise MapError("zero slope")
                sign = 1 if s > 0 else -1
                branches.append(
                    Branch(sign, SlopeClass.exact(s), as_fraction(item["intercept"]))
                )
            elif kind == "irrational":
                approx = float(slope["approx"])
                sign = 1 if approx > 0 else -1
                branches.append(
                    Branch(
                        sign,
                        SlopeClass.irrational(approx, slope.get("label", "")),
                        float(_as_number(item["intercept"])),
                    )
                )
            else:
                raise MapError(f"unknown slope kind {kind!r}")
        return cls(tuple(data["breakpoints"]), tuple(branches), name=data.get("name", ""))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseLinearMap":
        return cls.from_dict(json.loads(text))


def make_map(breakpoints: Sequence, slopes: Sequence, intercepts: Sequence, name="") -> PiecewiseLinearMap:
    """Build an exact map from rational breakpoints, signed slopes and intercepts.

    >>> tent = make_map(["0", "1/2", "1"], [2, -2], [0, 2])
    >>> tent(Fraction(1, 4))
    Fraction(1, 2)
    """
    branches = []
    for s, c in zip(slopes, intercepts):
        s = as_fraction(s)
        if s == 0:
            raise MapError("zero slope")
        branches.append(Branch(1 if s > 0 else -1, SlopeClass.exact(s), as_fraction(c)))
    return PiecewiseLinearMap(tuple(as_fraction(b) for b in breakpoints), tuple(branches), name=name)


def evaluate(f: PiecewiseLinearMap, x):
    """Evaluate ``f`` at ``x`` using the half-open branch convention."""
    return f.branches[f.branch_index(x)](x)


def derivative_magnitude(f: PiecewiseLinearMap, x) -> SlopeClass:
    """``|f'(x)|`` as a SlopeClass.  Undefined at breakpoints."""
    if not 0 <= x <= 1:
        raise MapError(f"x = {x} is outside [0, 1]")
    if x in f.breakpoints:
        raise BreakpointError(f"|f'| is not defined at the breakpoint {x}")
    return f.branches[f.branch_index(x)].slope


def lyapunov_exponent(f: PiecewiseLinearMap) -> float:
    """Lebesgue-average of ``log|f'|``: ``sum_i (a_i - a_{i-1}) log|s_i|``."""
    return math.fsum(
        float(length) * math.log(float(br.slope.magnitude))
        for length, br in zip(f.lengths(), f.branches)
    )


@dataclass(frozen=True)
class InvarianceReport:
    """Result of :func:`verify_lebesgue_invariance`.

    ``witness`` is the first sub-interval of [0, 1] on which the sum of
    ``1/|s_i|`` over covering branches differs from 1, and ``covering_sum``
    the offending sum.  Ergodicity and uniqueness of the invariant measure
    are not decidable here and are listed in ``unchecked``.
    """

    holds: bool
    witness: tuple | None = None
    covering_sum: Number | None = None
    min_slope: Number | None = None
    exact: bool = True
    unchecked: tuple = ("ergodicity", "uniqueness of the a.c. invariant measure")

    def __bool__(self):
        return self.holds


def verify_lebesgue_invariance(f: PiecewiseLinearMap) -> InvarianceReport:
    """Check the transfer-operator identity ``(L1)(y) = 1`` for Lebesgue measure.

    The images of all branch endpoints cut [0, 1] into sub-intervals on which
    the set of covering branches is constant.  On each one the sum of
    ``1/|s_i|`` over covering branches must equal 1 (exactly for rational
    maps, within ``FLOAT_TOL`` otherwise).
    """
    exact = f.is_exact
    images = [f.branch_image(i) for i in range(f.r)]
    cuts = sorted({0, 1, *(y for im in images for y in im)})
    if not exact:
        merged = [cuts[0]]
        for y in cuts[1:]:
            if y - merged[-1] > FLOAT_TOL:
                merged.append(y)
        cuts = merged
    cuts = [y for y in cuts if 0 <= y <= 1]
    inv = [1 / br.slope.magnitude for br in f.branches]
    min_slope = min(br.slope.magnitude for br in f.branches)

    for lo, hi in zip(cuts, cuts[1:]):
        mid = (lo + hi) / 2
        total = sum(
            (w for w, (a, b) in zip(inv, images) if a < mid < b),
            Fraction(0) if exact else 0.0,
        )
        ok = total == 1 if exact else abs(total - 1) <= FLOAT_TOL
        if not ok:
            return InvarianceReport(False, (lo, hi), total, min_slope, exact)
    report = InvarianceReport(True, None, None, min_slope, exact)
    # Invariance forces expansion: every slope magnitude is at least 1.
    assert min_slope >= 1 - (0 if exact else FLOAT_TOL), "invariant map with |f'| < 1"
    return report


def doubling_map() -> PiecewiseLinearMap:
    return make_map(["0", "1/2", "1"], [2, 2], [0, -1], name="doubling")


def random_invariant_map(rng, max_targets: int = 3, max_layers: int = 3, max_den: int = 7) -> PiecewiseLinearMap:
    """Random exact map preserving Lebesgue measure.

    [0, 1] is cut into target intervals ``I_j``.  Each target gets a few
    branches with weights ``w`` summing to 1; a branch maps a domain piece
    of length ``w |I_j|`` onto ``I_j`` with slope ``1/w``, so the
    transfer-operator identity holds by construction.  Domain pieces are
    shuffled and each gets a random orientation.

    ``rng`` is a :class:`numpy.random.Generator`.
    """
    n_targets = int(rng.integers(1, max_targets + 1))
    cuts = sorted({Fraction(int(rng.integers(1, max_den)), max_den) for _ in range(n_targets - 1)})
    edges = [Fraction(0), *cuts, Fraction(1)]
    pieces = []
    for lo, hi in zip(edges, edges[1:]):
        k = int(rng.integers(1, max_layers + 1))
        raw = [int(rng.integers(1, max_den)) for _ in range(k)]
        weights = [Fraction(w, sum(raw)) for w in raw]
        for w in weights:
            pieces.append((w * (hi - lo), lo, hi, 1 / w))
    order = rng.permutation(len(pieces))
    breakpoints = [Fraction(0)]
    slopes, intercepts = [], []
    for idx in order:
        length, lo, hi, m = pieces[int(idx)]
        a = breakpoints[-1]
        if rng.random() < 0.5:
            slopes.append(m)
            intercepts.append(lo - m * a)
        else:
            slopes.append(-m)
            intercepts.append(hi + m * a)
        breakpoints.append(a + length)
    return make_map(breakpoints, slopes, intercepts, name="random")


def map_from_points(breakpoints: Iterable, values: Iterable) -> PiecewiseLinearMap:
    """Continuous exact map through ``(a_i, f(a_i))`` (convenience for tests)."""
    bps = [as_fraction(b) for b in breakpoints]
    vals = [as_fraction(v) for v in values]
    slopes, intercepts = [], []
    for a, b, ya, yb in zip(bps, bps[1:], vals, vals[1:]):
        s = (yb - ya) / (b - a)
        slopes.append(s)
        intercepts.append(ya - s * a)
    return make_map(bps, slopes, intercepts)
