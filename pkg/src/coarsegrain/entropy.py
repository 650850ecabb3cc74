"""Shannon entropy of the induced chain and its fine-graining limit.

All entropies are in nats.  For a map that preserves Lebesgue measure and
is linear on finitely many pieces, the entropy ``H_N`` of the chain induced
on N uniform cells converges to ``lyapunov(f) + defect(f)`` where the
defect is ``2 * sum_i len(E_i) * rho(m_i) / m_i`` and ``rho`` depends only
on the arithmetic nature of the slope magnitude ``m``.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .chain import TransitionMatrix, iter_rows
from .maps import (
    Branch,
    MapError,
    PiecewiseLinearMap,
    SlopeClass,
    as_fraction,
    lyapunov_exponent,
)
from .partition import EquivolumePartition

LOG2 = math.log(2)


def phi(t) -> float:
    """``-t log t`` with ``phi(0) = 0``."""
    if not 0 <= t <= 1:
        raise ValueError(f"phi is defined on [0, 1], got {t}")
    if t == 0:
        return 0.0
    t = float(t)
    return -t * math.log(t)


def row_entropy(row) -> float:
    """``sum phi(p)`` over one sparse row."""
    return math.fsum(phi(p) for _, p in row)


def _exact_mean(values, N: int) -> float:
    """``sum(values) / N`` with the floats summed exactly and rounded once.

    ``fsum(...) / N`` rounds twice, so N equal rows of entropy ``h`` need
    not average back to ``h``; here they always do.
    """
    counts = Counter(values)
    return float(sum(Fraction(v) * c for v, c in counts.items()) / N)


def shannon_entropy(P: TransitionMatrix) -> float:
    """Stationary entropy ``(1/N) sum_n sum_n' phi(p(n'|n))`` of a matrix.

    The uniform distribution is used as the stationary law, which is exact
    for chains induced by Lebesgue-preserving maps.
    """
    return _exact_mean((row_entropy(r) for r in P.rows), P.N)


def streaming_entropy(f: PiecewiseLinearMap, delta: EquivolumePartition, exact: bool | None = None) -> float:
    """Same value as ``shannon_entropy(build_transition_matrix(f, delta))``
    without materialising the matrix."""
    return _exact_mean((row_entropy(row) for _, row, _ in iter_rows(f, delta, exact)), delta.N)


def rho(s: SlopeClass) -> float:
    """Mean boundary-cell entropy for slope magnitude ``m``.

    0 for integer ``m``; ``(1/p) sum_{n=1}^{p-1} phi(n/p)`` for ``m = q/p``
    in lowest terms with ``p >= 2``; ``1/4`` (the integral of ``phi`` over
    [0, 1]) for irrational ``m``.
    """
    if s.magnitude < 1:
        raise MapError(f"rho needs |slope| >= 1, got {s.label}")
    if s.kind == "integer":
        return 0.0
    if s.kind == "rational":
        p = s.p
        w = float(Fraction(1, p))
        return math.fsum(w * phi(Fraction(n, p)) for n in range(1, p))
    return 0.25


def entropy_defect(f: PiecewiseLinearMap) -> float:
    """``2 * sum_i (a_i - a_{i-1}) * rho(|s_i|) / |s_i|``; zero iff all slopes are integers."""
    return math.fsum(
        2 * float(length) * rho(br.slope) / float(br.slope.magnitude)
        for length, br in zip(f.lengths(), f.branches)
    )


def predicted_limit(f: PiecewiseLinearMap) -> float:
    return lyapunov_exponent(f) + entropy_defect(f)


def cell_entropy_closed_form(m, a, b) -> float:
    """Row entropy of a cell inside a branch of slope ``m``: ``log m + (phi(a) + phi(b)) / m``."""
    m = float(m)
    return math.log(m) + (phi(a) + phi(b)) / m


def equidistribution_average(s: SlopeClass, count: int) -> float:
    """``(1/count) sum_{n=1}^{count} phi({m n})`` by direct enumeration.

    Exact slopes enumerate the residues ``q n mod p`` in integer arithmetic
    and reduce with exact multiplicities, so a count that is a multiple of
    ``p`` reproduces ``rho`` to the last bit.  Irrational slopes use the
    float approximation of ``m``.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if s.is_exact:
        q, p = s.q, s.p
        if p == 1:
            return 0.0
        n = np.arange(1, count + 1, dtype=np.int64)
        residues = np.bincount((q % p) * n % p, minlength=p)
        return math.fsum(
            float(Fraction(int(c), count)) * phi(Fraction(r, p))
            for r, c in enumerate(residues)
            if c
        )
    n = np.arange(1, count + 1, dtype=np.float64)
    x = s.approx * n
    frac = x - np.floor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(frac > 0, -frac * np.log(frac), 0.0)
    return math.fsum(vals) / count


def _tent_partner(m: SlopeClass) -> SlopeClass:
    if m.is_exact:
        return SlopeClass.exact(m.value / (m.value - 1))
    label = "2+sqrt2" if m.label in ("sqrt2", "sqrt(2)") else f"{m.label}/({m.label}-1)"
    return SlopeClass.irrational(m.approx / (m.approx - 1), label)


def skew_tent(m) -> PiecewiseLinearMap:
    """Skew tent map with slopes ``+m`` on ``[0, 1/m)`` and ``-l`` after, ``1/m + 1/l = 1``.

    ``m`` is a SlopeClass or anything :func:`as_fraction` accepts.
    """
    if not isinstance(m, SlopeClass):
        m = SlopeClass.exact(as_fraction(m))
    if m.magnitude <= 1:
        raise MapError(f"skew tent needs m > 1, got {m.label}")
    l = _tent_partner(m)
    if m.is_exact:
        c = 1 / m.value
        left = Branch(1, m, Fraction(0))
        right = Branch(-1, l, l.value)
    else:
        c = 1 / m.approx
        left = Branch(1, m, 0.0)
        right = Branch(-1, l, l.approx)
    return PiecewiseLinearMap((Fraction(0), c, Fraction(1)), (left, right), name=f"tent:m={m.label}")


def skew_tent_defect(m) -> float:
    """Closed-form defect of the skew tent map.

    Rational ``m = (p + q)/p``:
    ``2p/(p+q)^2 sum phi(n/p) + 2q/(p+q)^2 sum phi(n/q)``;
    irrational ``m``: ``(m^2 - 2m + 2) / (2 m^2)``.
    """
    if not isinstance(m, SlopeClass):
        m = SlopeClass.exact(as_fraction(m))
    if not m.is_exact:
        x = m.approx
        return (x * x - 2 * x + 2) / (2 * x * x)
    p = m.value.denominator
    q = m.value.numerator - p
    tot = (p + q) ** 2

    def part(k):
        return 2 * k / tot * math.fsum(phi(Fraction(n, k)) for n in range(1, k))

    return part(p) + part(q)


@dataclass(frozen=True)
class EntropyReport:
    N: int
    H_delta: float
    lyapunov: float
    defect: float
    predicted_limit: float
    gap: float

    FIELDS = ("N", "H_delta", "lyapunov", "defect", "predicted_limit", "gap")

    def scaled(self, unit: float) -> "EntropyReport":
        """Entropy columns divided by ``unit`` (``log 2`` for bits)."""
        d = asdict(self)
        for k in self.FIELDS[1:]:
            d[k] = d[k] / unit
        return EntropyReport(**d)

    def as_row(self) -> list:
        return [self.N] + [repr(float(getattr(self, k))) for k in self.FIELDS[1:]]

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(self.as_row())
        return buf.getvalue()


def entropy_report(f: PiecewiseLinearMap, delta: EquivolumePartition, exact: bool | None = None) -> EntropyReport:
    H = streaming_entropy(f, delta, exact)
    lam = lyapunov_exponent(f)
    D = entropy_defect(f)
    limit = lam + D
    return EntropyReport(delta.N, H, lam, D, limit, H - limit)

