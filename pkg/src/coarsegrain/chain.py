"""Exact transition matrices of the coarse-grained Markov chain.

Entry ``(n, n')`` is ``N * Leb(f^{-1}(A(n')) & A(n))``.  Rows of cells whose
closure lies inside a single branch take a closed-form fast path (a run of
``1/m`` entries flanked by ``a/m`` and ``b/m``); the at most ``r - 1`` cells
that straddle an interior breakpoint go through the generic clipping path.
Both paths are exact when the map data are rational.
"""

from __future__ import annotations

import bisect
import csv
import math
import sys
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .maps import MapError, PiecewiseLinearMap
from .partition import EquivolumePartition, Interval, cell

# Intervals shorter than this (in [0, 1] units) count as empty in float mode.
GUARD = 1e-15
DENSE_LIMIT = 2**12
ROW_TOL = 1e-12


@dataclass(frozen=True)
class TransitionMatrix:
    """Sparse row-stochastic N x N matrix.

    ``rows[n - 1]`` is a tuple of ``(n', p)`` pairs with 1-based column
    indices in increasing order.  ``mode`` is ``"exact"`` (Fraction entries)
    or ``"float"``.  ``straddling`` lists the rows built by the generic path.
    """

    N: int
    rows: tuple
    mode: str = "exact"
    straddling: tuple = ()

    def row(self, n: int) -> dict:
        return dict(self.rows[n - 1])

    def entry(self, n: int, n2: int):
        return self.row(n).get(n2, 0)

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def _zero(self):
        return Fraction(0) if self.mode == "exact" else 0.0

    def row_sums(self) -> list:
        if self.mode == "exact":
            return [sum((p for _, p in r), Fraction(0)) for r in self.rows]
        return [math.fsum(p for _, p in r) for r in self.rows]

    def column_sums(self) -> list:
        cols = defaultdict(list)
        for r in self.rows:
            for j, p in r:
                cols[j].append(p)
        if self.mode == "exact":
            return [sum(cols.get(j, ()), Fraction(0)) for j in range(1, self.N + 1)]
        return [math.fsum(cols.get(j, ())) for j in range(1, self.N + 1)]

    def to_float(self) -> "TransitionMatrix":
        if self.mode == "float":
            return self
        rows = tuple(tuple((j, float(p)) for j, p in r) for r in self.rows)
        return TransitionMatrix(self.N, rows, "float", self.straddling)

    def to_dense(self) -> np.ndarray:
        if self.N >= DENSE_LIMIT:
            raise MemoryError(f"dense storage is refused for N >= {DENSE_LIMIT}")
        out = np.zeros((self.N, self.N))
        for i, r in enumerate(self.rows):
            for j, p in r:
                out[i, j - 1] = float(p)
        return out

    @classmethod
    def from_dense(cls, array, mode="float") -> "TransitionMatrix":
        rows = []
        for line in array:
            rows.append(tuple((j + 1, p) for j, p in enumerate(line) if p != 0))
        return cls(len(rows), tuple(rows), mode)

    def write_triplets(self, path) -> None:
        """Sparse dump: ``row,col,numerator,denominator`` (exact) or ``row,col,value``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.mode == "exact":
                w.writerow(["row", "col", "numerator", "denominator"])
                for i, r in enumerate(self.rows, 1):
                    for j, p in r:
                        w.writerow([i, j, p.numerator, p.denominator])
            else:
                w.writerow(["row", "col", "value"])
                for i, r in enumerate(self.rows, 1):
                    for j, p in r:
                        w.writerow([i, j, repr(float(p))])

    @classmethod
    def read_triplets(cls, path, N: int) -> "TransitionMatrix":
        rows = defaultdict(list)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            exact = "numerator" in reader.fieldnames
            for rec in reader:
                p = (
                    Fraction(int(rec["numerator"]), int(rec["denominator"]))
                    if exact
                    else float(rec["value"])
                )
                rows[int(rec["row"])].append((int(rec["col"]), p))
        return cls(N, tuple(tuple(rows.get(i, ())) for i in range(1, N + 1)),
                   "exact" if exact else "float")


def _snap(t, N):
    """Snap a float grid coordinate onto an integer when within rounding noise."""
    if isinstance(t, float):
        r = round(t)
        if abs(t - r) <= GUARD * N + 4 * sys.float_info.epsilon * abs(t):
            return float(r)
    return t


def _overlap(lo1, hi1, lo2, hi2):
    return min(hi1, hi2) - max(lo1, lo2)


def preimage_measure(f: PiecewiseLinearMap, B: Interval, A: Interval):
    """Lebesgue measure of ``f^{-1}(B) & A``.

    Computed branch by branch: clip ``A`` to the branch, take the image of
    the clipped piece, intersect it with ``B`` and divide the length by the
    slope magnitude.  Endpoint openness is irrelevant for the measure.
    """
    exact = f.is_exact and not any(isinstance(v, float) for v in (A.lo, A.hi, B.lo, B.hi))
    total = Fraction(0) if exact else 0.0
    if B.hi <= B.lo or A.hi <= A.lo:
        return total
    guard = 0 if exact else GUARD
    bps = f.breakpoints
    for i, br in enumerate(f.branches):
        lo = max(A.lo, bps[i])
        hi = min(A.hi, bps[i + 1])
        if hi - lo <= guard:
            continue
        y0, y1 = br(lo), br(hi)
        if y0 > y1:
            y0, y1 = y1, y0
        ov = _overlap(y0, y1, B.lo, B.hi)
        if ov > guard:
            total += ov / br.slope.magnitude
    return total


def _fast_row(coef, m, inv_m, Nc, k, N, one):
    """Closed-form row for cell ``k`` (0-based) inside a branch ``s x + c``.

    In grid units ``t = N y`` the image is ``[lo, lo + m]``; the first and
    last cells it touches get ``a/m`` and ``b/m``, the rest ``1/m``.
    """
    t0 = coef * k + Nc
    t1 = t0 + coef
    lo, hi = (t0, t1) if coef > 0 else (t1, t0)
    u = math.floor(lo)
    v = math.ceil(hi) - 1
    if u == v:
        return [(u + 1, one)]
    a = (u + 1) - lo
    b = hi - v
    row = [(u + 1, a / m)]
    row.extend((j + 1, inv_m) for j in range(u + 1, v))
    row.append((v + 1, b / m))
    return row


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    t = 134217729.0 * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _pair_snap(s, e, N):
    r = round(s)
    if abs((s - r) + e) <= GUARD * N + 4 * sys.float_info.epsilon * abs(s):
        return float(r), 0.0
    return s, e


def _fast_row_float(coef, m, inv_m, nc, k, N):
    """Float version of :func:`_fast_row` carrying ``t = N y`` as hi + lo.

    Error-free products and sums keep the fractional parts ``a`` and ``b``
    accurate to an ulp of 1 instead of an ulp of ``N``.
    """
    p, pe = _two_prod(coef, float(k))
    s0, se = _two_sum(p, nc[0])
    s0, e0 = _two_sum(s0, pe + se + nc[1])
    s1, se = _two_sum(s0, coef)
    s1, e1 = _two_sum(s1, e0 + se)
    (ls, le), (hs, he) = ((s0, e0), (s1, e1)) if coef > 0 else ((s1, e1), (s0, e0))
    ls, le = _pair_snap(ls, le, N)
    hs, he = _pair_snap(hs, he, N)
    if ls + le < 0:
        ls, le = 0.0, 0.0
    if hs + he > N:
        hs, he = float(N), 0.0
    u = math.floor(ls) - (1 if ls == math.floor(ls) and le < 0 else 0)
    v = math.ceil(hs) - 1 + (1 if hs == math.ceil(hs) and he > 0 else 0)
    if u == v:
        return [(u + 1, 1.0)]
    a = ((u + 1) - ls) - le
    b = (hs - v) + he
    row = [(u + 1, a / m)]
    row.extend((j + 1, inv_m) for j in range(u + 1, v))
    row.append((v + 1, b / m))
    return row


def _generic_row(f: PiecewiseLinearMap, k: int, N: int, exact: bool):
    """Row for cell ``k`` by clipping against every branch it meets.

    Float data are clipped in rational arithmetic (the float values are
    taken as exact) and the entries rounded once at the end: there are at
    most ``r - 1`` such rows, and rounding ``N y`` would cost ``N`` ulps.
    """
    x0, x1 = Fraction(k, N), Fraction(k + 1, N)
    guard = 0 if exact else Fraction(GUARD)
    bps = [Fraction(a) for a in f.breakpoints]
    first = max(bisect.bisect_right(bps, x0) - 1, 0)
    acc = {}
    for i in range(first, f.r):
        if bps[i] >= x1:
            break
        lo, hi = max(x0, bps[i]), min(x1, bps[i + 1])
        if hi - lo <= guard:
            continue
        br = f.branches[i]
        coef, c = Fraction(br.coef), Fraction(br.intercept)
        t0, t1 = N * (coef * lo + c), N * (coef * hi + c)
        if t0 > t1:
            t0, t1 = t1, t0
        t0, t1 = max(t0, 0), min(t1, N)
        for j in range(math.floor(t0), min(math.ceil(t1), N)):
            ov = _overlap(t0, t1, j, j + 1)
            if ov > guard * N:
                acc[j + 1] = acc.get(j + 1, 0) + ov / abs(coef)
    if exact:
        return sorted(acc.items())
    return [(j, float(p)) for j, p in sorted(acc.items())]


def iter_rows(f: PiecewiseLinearMap, delta: EquivolumePartition, exact: bool | None = None) -> Iterator:
    """Yield ``(n, row, interior)`` for ``n = 1..N`` in order.

    ``interior`` is True when the closed cell lies inside one branch and the
    row came from the closed form.  Rows are produced one at a time so that
    callers reducing over rows never hold the whole matrix.
    """
    if exact is None:
        exact = f.is_exact
    if exact and not f.is_exact:
        raise MapError("exact mode needs rational map data")
    N = delta.N
    one = Fraction(1) if exact else 1.0
    # Per-branch constants in grid units.
    consts = []
    for br in f.branches:
        m = br.slope.magnitude
        nc = N * br.intercept if exact else _two_prod(float(N), float(br.intercept))
        consts.append((br.coef, m, 1 / m, nc))
    fast = _fast_row if exact else _fast_row_float
    extra = (N, one) if exact else (N,)
    edges = [N * a for a in f.breakpoints]
    if not exact:
        edges = [_snap(float(e), N) for e in edges]
    i = 0
    for k in range(N):
        while edges[i + 1] <= k:
            i += 1
        if k + 1 <= edges[i + 1]:
            yield k + 1, fast(*consts[i], k, *extra), True
        else:
            yield k + 1, _generic_row(f, k, N, exact), False


def build_transition_matrix(f: PiecewiseLinearMap, delta: EquivolumePartition, mode: str | None = None) -> TransitionMatrix:
    """Transition matrix of the chain induced by ``f`` on ``delta``.

    ``mode`` defaults to ``"exact"`` for rational maps and ``"float"``
    otherwise.  Float mode on a rational map builds exact rows and converts
    the entries at the end.
    """
    if mode is None:
        mode = "exact" if f.is_exact else "float"
    if mode not in ("exact", "float"):
        raise ValueError(f"unknown mode {mode!r}")
    exact = f.is_exact
    if mode == "exact" and not exact:
        raise MapError("exact mode needs rational map data")
    rows, straddling = [], []
    for n, row, interior in iter_rows(f, delta, exact):
        if not interior:
            straddling.append(n)
        if mode == "float" and exact:
            row = [(j, float(p)) for j, p in row]
        rows.append(tuple(row))
    return TransitionMatrix(delta.N, tuple(rows), mode, tuple(straddling))


def generic_row(f: PiecewiseLinearMap, delta: EquivolumePartition, n: int) -> tuple:
    """Row ``n`` via the generic path regardless of cell position."""
    return tuple(_generic_row(f, n - 1, delta.N, f.is_exact))


def brute_force_row(f: PiecewiseLinearMap, delta: EquivolumePartition, n: int) -> tuple:
    """Row ``n`` from ``N * preimage_measure`` over every target cell (O(N))."""
    A = cell(delta, n)
    out = []
    for j in range(1, delta.N + 1):
        p = delta.N * preimage_measure(f, cell(delta, j), A)
        if p != 0:
            out.append((j, p))
    return tuple(out)


def cell_boundary_fractions(f: PiecewiseLinearMap, delta: EquivolumePartition, n: int) -> tuple:
    """``(m, a, b)`` for a cell inside one branch.

    With ``y_lo < y_hi`` the image endpoints of the cell (taking the branch
    as increasing without loss of generality), ``a = 1 - {N y_lo}`` and
    ``b = {N y_hi}``, ``{.}`` the fractional part.
    """
    A = cell(delta, n)
    i = f.branch_index(A.lo)
    if A.hi > f.breakpoints[i + 1]:
        raise MapError(f"cell {n} straddles a breakpoint")
    br = f.branches[i]
    ys = sorted((delta.N * br(A.lo), delta.N * br(A.hi)))
    frac = lambda t: t - math.floor(t)  # noqa: E731
    return br.slope.magnitude, 1 - frac(ys[0]), frac(ys[1])


def verify_doubly_stochastic(P: TransitionMatrix, tol: float = ROW_TOL) -> bool:
    """True iff all row and column sums are 1 (exactly in exact mode).

    Given row-stochasticity this is the statement that the uniform
    distribution is stationary.
    """
    sums = P.row_sums() + P.column_sums()
    if P.mode == "exact":
        return all(s == 1 for s in sums)
    return all(abs(s - 1) <= tol for s in sums)
