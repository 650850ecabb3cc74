"""Uniform equivolume partitions of [0, 1] and the cell projection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    """Interval ``[lo, hi)``, or ``[lo, hi]`` when ``closed`` is set."""

    lo: object
    hi: object
    closed: bool = False

    @property
    def length(self):
        return self.hi - self.lo

    def __contains__(self, x):
        return self.lo <= x < self.hi or (self.closed and x == self.hi)


@dataclass(frozen=True)
class EquivolumePartition:
    """The N cells ``A(n) = [(n-1)/N, n/N)``, ``n = 1..N``; the last one closed.

    Only the uniform layout is supported: with Lebesgue as the invariant
    measure every other equivolume family is a relabelling of these cells.
    """

    N: int

    def __post_init__(self):
        if not isinstance(self.N, int) or isinstance(self.N, bool) or self.N < 1:
            raise PartitionError(f"N must be a positive integer, got {self.N!r}")

    @property
    def noise_level(self) -> Fraction:
        return Fraction(1, self.N)

    @property
    def cell_endpoints(self) -> tuple:
        return tuple(Fraction(k, self.N) for k in range(self.N + 1))

    def cell(self, n: int) -> Interval:
        return cell(self, n)

    def project(self, x) -> int:
        return project(self, x)


def uniform_partition(N: int) -> EquivolumePartition:
    return EquivolumePartition(N)


def cell(delta: EquivolumePartition, n: int) -> Interval:
    """Exact endpoints of cell ``n`` (1-based)."""
    N = delta.N
    if not 1 <= n <= N:
        raise IndexError(f"cell index {n} outside 1..{N}")
    return Interval(Fraction(n - 1, N), Fraction(n, N), closed=(n == N))


def project(delta: EquivolumePartition, x) -> int:
    """Index of the cell containing ``x``: ``floor(N x) + 1``, with ``x = 1`` in cell N."""
    if not 0 <= x <= 1:
        raise PartitionError(f"x = {x} is outside [0, 1]")
    t = delta.N * x
    if isinstance(x, float) and abs(t - round(t)) < 1e-9:
        # float product may round across a cell boundary
        t = delta.N * Fraction(x)
    return min(math.floor(t) + 1, delta.N)
