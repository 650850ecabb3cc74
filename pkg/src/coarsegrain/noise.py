"""Monte Carlo realisation of the noisy map and the induced chain.

Randomness comes from numpy's Philox4x64 counter-based generator
(``numpy.random.Generator(numpy.random.Philox(seed))``), so a seed pins a
trajectory bit for bit on every platform numpy supports.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .chain import TransitionMatrix
from .entropy import phi
from .maps import PiecewiseLinearMap
from .partition import EquivolumePartition, project

COUPLINGS = ("marginal", "independent", "shared")
# Irrational per-cell shift used by the shared coupling.
_SHIFT = (math.sqrt(5) - 1) / 2


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _point_in_cell(delta: EquivolumePartition, n: int, u: float) -> float:
    # (n - 1 + u) / N can round onto a neighbouring cell; nudge it back.
    x = (n - 1 + u) / delta.N
    k = project(delta, x)
    while k != n:
        x = math.nextafter(x, math.inf if k < n else -math.inf)
        k = project(delta, x)
    return x


def _float_map(f: PiecewiseLinearMap):
    bps, slopes, icpts = f.float_coefficients()
    last = f.r - 1

    def fx(x):
        i = min(bisect.bisect_right(bps, x) - 1, last)
        y = slopes[i] * x + icpts[i]
        return 0.0 if y < 0 else (1.0 if y > 1 else y)

    return fx


def sample_noise_point(delta: EquivolumePartition, n: int, rng: np.random.Generator) -> float:
    """Uniform point of cell ``n``: ``x_{n-1} + u/N`` with ``u`` uniform on [0, 1)."""
    if not 1 <= n <= delta.N:
        raise IndexError(f"cell index {n} outside 1..{delta.N}")
    return _point_in_cell(delta, n, rng.random())


def step_state(f: PiecewiseLinearMap, delta: EquivolumePartition, n: int, rng) -> int:
    """One move of the chain: ``project(f(U_n))``."""
    return project(delta, _float_map(f)(sample_noise_point(delta, n, rng)))


def step_point(f: PiecewiseLinearMap, delta: EquivolumePartition, x, rng) -> float:
    """One move of the noisy map: ``f(U_{project(x)})``."""
    return _float_map(f)(sample_noise_point(delta, project(delta, x), rng))


@dataclass(frozen=True, eq=False)
class Trajectory:
    N: int
    states: np.ndarray = field(repr=False)
    seed: int | None = None
    coupling: str = "marginal"

    @property
    def T(self) -> int:
        return len(self.states) - 1

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "state"])
            for t, s in enumerate(self.states.tolist()):
                w.writerow([t, s])

    @classmethod
    def read_csv(cls, path, N: int, seed=None) -> "Trajectory":
        with open(path, newline="") as fh:
            states = [int(rec["state"]) for rec in csv.DictReader(fh)]
        return cls(N, np.asarray(states, dtype=np.int64), seed)


def _uniform_source(rng, T, N, coupling, block=1 << 16):
    """Yield the uniform driving step ``t`` as a function of the current cell."""
    if coupling == "marginal":
        for u in rng.random(T).tolist():
            yield lambda n, u=u: u
    elif coupling == "independent":
        # full noise vector U = (U(1), ..., U(N)) with independent components
        done = 0
        while done < T:
            rows = rng.random((min(block, T - done), N))
            for row in rows:
                yield lambda n, row=row: float(row[n - 1])
            done += len(rows)
    elif coupling == "shared":
        # one uniform per step, rotated by an irrational shift per cell
        for u in rng.random(T).tolist():
            yield lambda n, u=u: (u + n * _SHIFT) % 1.0
    else:
        raise ValueError(f"unknown coupling {coupling!r}; choose from {COUPLINGS}")


def simulate_chain(f: PiecewiseLinearMap, delta: EquivolumePartition, T: int, seed: int, coupling: str = "marginal") -> Trajectory:
    """Run the induced chain for ``T`` steps from a uniform initial cell.

    ``coupling`` picks the joint law of the noise vector; only its marginals
    matter for the chain.  With ``"marginal"`` the trajectory matches
    repeated :func:`step_state` calls on the same generator.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    rng = make_rng(seed)
    N = delta.N
    fx = _float_map(f)
    n = int(rng.integers(1, N + 1))
    states = [n]
    for draw in _uniform_source(rng, T, N, coupling):
        n = project(delta, fx(_point_in_cell(delta, n, draw(n))))
        states.append(n)
    return Trajectory(N, np.asarray(states, dtype=np.int64), seed, coupling)


@dataclass(frozen=True)
class EmpiricalMatrix(TransitionMatrix):
    """Row-normalised transition counts.  Unobserved rows are left empty."""

    counts: dict = field(default_factory=dict, repr=False, compare=False)
    row_counts: tuple = ()
    unobserved: tuple = ()


def transition_counts(states, N: int) -> dict:
    s = np.asarray(states, dtype=np.int64)
    if len(s) < 2:
        return {}
    keys, cnt = np.unique((s[:-1] - 1) * N + (s[1:] - 1), return_counts=True)
    return {(int(k) // N + 1, int(k) % N + 1): int(c) for k, c in zip(keys, cnt)}


def empirical_transition_matrix(traj: Trajectory) -> EmpiricalMatrix:
    N = traj.N
    counts = transition_counts(traj.states, N)
    per_row = [dict() for _ in range(N)]
    for (i, j), c in counts.items():
        per_row[i - 1][j] = c
    rows, totals, unobserved = [], [], []
    for n, r in enumerate(per_row, 1):
        tot = sum(r.values())
        totals.append(tot)
        if tot == 0:
            unobserved.append(n)
            rows.append(())
        else:
            rows.append(tuple((j, c / tot) for j, c in sorted(r.items())))
    return EmpiricalMatrix(N, tuple(rows), "float", (), counts, tuple(totals), tuple(unobserved))


@dataclass(frozen=True)
class EmpiricalEntropy:
    """Plug-in entropy.  ``value`` is None when no transition was observed."""

    value: float | None
    row_counts: tuple
    unobserved: tuple


def empirical_entropy(traj: Trajectory) -> EmpiricalEntropy:
    """``(1/N) sum phi(p_hat)`` over observed rows; no bias correction."""
    P = empirical_transition_matrix(traj)
    if traj.T == 0:
        return EmpiricalEntropy(None, P.row_counts, P.unobserved)
    value = math.fsum(phi(p) for r in P.rows for _, p in r) / traj.N
    return EmpiricalEntropy(value, P.row_counts, P.unobserved)


def max_entry_distance(P: TransitionMatrix, Q: TransitionMatrix, rows=None) -> float:
    """``max |P - Q|`` over all entries (optionally restricted to ``rows``)."""
    worst = 0.0
    for n in rows or range(1, P.N + 1):
        a, b = P.row(n), Q.row(n)
        for j in a.keys() | b.keys():
            worst = max(worst, abs(float(a.get(j, 0)) - float(b.get(j, 0))))
    return worst

