"""Topologically conjugate systems ``g = C o f o C^{-1}``.

If ``C`` is a homeomorphism of [0, 1] and ``nu`` the pushforward of
Lebesgue measure under ``C``, then the cells ``C(A(n))`` are
``nu``-equivolume and the chain induced by ``(g, nu)`` on them has exactly
the transition matrix of ``(f, Lebesgue)`` on ``A(n)``.  The exact path here
returns that matrix unchanged; :func:`monte_carlo_conjugate_matrix` checks
it independently by simulating ``g`` directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chain import TransitionMatrix, build_transition_matrix
from .entropy import skew_tent
from .maps import MapError, PiecewiseLinearMap
from .noise import EmpiricalMatrix, make_rng
from .partition import EquivolumePartition, Interval


@dataclass(frozen=True)
class Homeomorphism:
    """Increasing homeomorphism of [0, 1] given in both directions."""

    forward: Callable[[float], float]
    inverse: Callable[[float], float]
    label: str = ""

    def __call__(self, x):
        return self.forward(x)

    def check(self, points: int = 10_000, tol: float = 1e-12) -> bool:
        """Endpoints fixed, strictly increasing and ``forward(inverse(y)) = y`` on a grid."""
        ys = np.linspace(0.0, 1.0, points)
        fw = np.array([self.forward(float(y)) for y in ys])
        if fw[0] != 0 or fw[-1] != 1 or np.any(np.diff(fw) <= 0):
            return False
        back = np.array([self.forward(self.inverse(float(y))) for y in ys])
        return bool(np.max(np.abs(back - ys)) <= tol)


def _sin2(x):
    return np.sin(np.pi * x / 2) ** 2


def _arcsin_sqrt(y):
    return 2 / np.pi * np.arcsin(np.sqrt(np.clip(y, 0.0, 1.0)))


IDENTITY = Homeomorphism(lambda x: x, lambda y: y, "identity")
SINE_SQUARED = Homeomorphism(_sin2, _arcsin_sqrt, "sine-squared")
SQUARE = Homeomorphism(lambda x: x * x, np.sqrt, "square")

HOMEOMORPHISMS = {h.label: h for h in (IDENTITY, SINE_SQUARED, SQUARE)}


def get_homeomorphism(label: str) -> Homeomorphism:
    try:
        return HOMEOMORPHISMS[label]
    except KeyError:
        raise MapError(f"unknown homeomorphism {label!r}; built-ins: {sorted(HOMEOMORPHISMS)}") from None


@dataclass(frozen=True)
class ConjugateSystem:
    """``(g, nu)`` with ``g = C o f o C^{-1}`` and ``nu = Leb o C^{-1}``.

    ``direct`` optionally evaluates ``g`` in closed form (e.g. the logistic
    map); simulation uses it when present so that the Monte Carlo check does
    not go through ``f`` at all.
    """

    base: PiecewiseLinearMap
    hom: Homeomorphism
    direct: Callable[[float], float] | None = None

    def g(self, y):
        return self.direct(y) if self.direct is not None else conjugate_evaluate(self, y)

    def nu_cdf(self, y):
        return self.hom.inverse(y)


def logistic_system() -> ConjugateSystem:
    """Symmetric tent map conjugated by ``sin^2(pi x / 2)`` into ``4y(1 - y)``."""
    return ConjugateSystem(skew_tent(2), SINE_SQUARED, lambda y: 4.0 * y * (1.0 - y))


def conjugate_evaluate(sys: ConjugateSystem, y: float) -> float:
    if not 0 <= y <= 1:
        raise MapError(f"y = {y} is outside [0, 1]")
    x = sys.hom.inverse(y)
    return float(sys.hom.forward(float(sys.base(min(max(float(x), 0.0), 1.0)))))


def pushforward_partition(delta: EquivolumePartition, C: Homeomorphism) -> list:
    """Cells ``[C(x_{n-1}), C(x_n))``, each of ``nu``-measure ``1/N``."""
    N = delta.N
    ends = [C(k / N) for k in range(N + 1)]
    return [Interval(ends[n - 1], ends[n], closed=(n == N)) for n in range(1, N + 1)]


def transition_matrix_conjugate(sys: ConjugateSystem, delta: EquivolumePartition) -> TransitionMatrix:
    """Exact matrix of ``(g, nu)`` on ``C(delta)``: the base matrix itself."""
    return build_transition_matrix(sys.base, delta)


def _vectorized(fn):
    def apply(arr):
        try:
            out = np.asarray(fn(arr), dtype=float)
            if out.shape == arr.shape:
                return out
        except TypeError:
            pass
        return np.fromiter((fn(float(v)) for v in arr), dtype=float, count=len(arr))

    return apply


def _vectorized_base(f: PiecewiseLinearMap):
    bps, slopes, icpts = (np.asarray(v) for v in f.float_coefficients())

    def fx(x):
        i = np.minimum(np.searchsorted(bps, x, side="right") - 1, f.r - 1)
        return np.clip(slopes[i] * x + icpts[i], 0.0, 1.0)

    return fx


def monte_carlo_conjugate_matrix(sys: ConjugateSystem, delta: EquivolumePartition, T: int, seed: int) -> EmpiricalMatrix:
    """Empirical matrix of ``(g, nu)`` on ``C(delta)`` from ``T`` draws per cell.

    For each cell a uniform point of ``A(n)`` is pushed through ``C`` (a
    ``nu``-distributed point of ``C(A(n))``), mapped by ``g`` and located
    among the pushed-forward cell boundaries.  ``g`` is evaluated directly
    when the system provides a closed form, so ``f`` is never consulted.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    N = delta.N
    C = _vectorized(sys.hom.forward)
    if sys.direct is not None:
        g = _vectorized(sys.direct)
    else:
        fx, inv = _vectorized_base(sys.base), _vectorized(sys.hom.inverse)

        def g(y):
            return C(fx(np.clip(inv(y), 0.0, 1.0)))

    bounds = C(np.arange(N + 1) / N)
    rng = make_rng(seed)
    rows, counts, totals = [], {}, []
    for n in range(1, N + 1):
        lo, hi = (n - 1) / N, n / N
        x = np.clip(lo + rng.random(T) / N, lo, np.nextafter(hi, 0.0))
        z = g(C(x))
        idx = np.clip(np.searchsorted(bounds, z, side="right"), 1, N)
        cols, cnt = np.unique(idx, return_counts=True)
        rows.append(tuple((int(j), c / T) for j, c in zip(cols, cnt.tolist())))
        counts.update({(n, int(j)): int(c) for j, c in zip(cols, cnt)})
        totals.append(T)
    return EmpiricalMatrix(N, tuple(rows), "float", (), counts, tuple(totals), ())
