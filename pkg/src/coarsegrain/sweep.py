"""Convergence sweeps of the chain entropy over a schedule of cell counts."""

from __future__ import annotations

import csv
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .chain import build_transition_matrix
from .entropy import LOG2, EntropyReport, entropy_report, shannon_entropy, skew_tent
from .maps import InvarianceReport, MapError, PiecewiseLinearMap, SlopeClass, doubling_map, verify_lebesgue_invariance
from .noise import empirical_entropy, empirical_transition_matrix, max_entry_distance, simulate_chain
from .partition import uniform_partition

CSV_COLUMNS = ("N", "H_delta", "lyapunov", "defect", "predicted_limit", "gap", "build_ms", "mode")
MAX_SCHEDULE_TERMS = 31

_NAMED_IRRATIONALS = {
    "pi": (math.pi, "pi"),
    "e": (math.e, "e"),
    "golden": ((1 + math.sqrt(5)) / 2, "golden"),
}


class ValidationFailure(Exception):
    """The map cannot be swept (not Lebesgue-invariant, or wrong mode)."""

    def __init__(self, message, report: InvarianceReport | None = None):
        super().__init__(message)
        self.report = report


def parse_slope(text: str) -> SlopeClass:
    """``"3/2"``, ``"2"``, ``"sqrt2"``, ``"sqrt(7)"``, ``"pi"``, ``"e"`` or ``"golden"``."""
    t = text.strip().replace(" ", "")
    m = re.fullmatch(r"sqrt\(?(\d+)\)?", t)
    if m:
        k = int(m.group(1))
        r = math.isqrt(k)
        if r * r == k:
            return SlopeClass.exact(r)
        return SlopeClass.irrational(math.sqrt(k), f"sqrt{k}")
    if t in _NAMED_IRRATIONALS:
        return SlopeClass.irrational(*_NAMED_IRRATIONALS[t])
    try:
        return SlopeClass.exact(Fraction(t))
    except (ValueError, ZeroDivisionError):
        raise MapError(f"cannot parse slope {text!r}") from None


def load_map(source) -> PiecewiseLinearMap:
    """Map from a JSON map-spec path or a built-in name (``tent:m=3/2``, ``doubling``)."""
    if isinstance(source, PiecewiseLinearMap):
        return source
    s = str(source).strip()
    if s.startswith("tent"):
        m = re.fullmatch(r"tent(?::m=(.+))?", s)
        if not m:
            raise MapError(f"bad built-in map {s!r}; expected tent:m=<slope>")
        return skew_tent(parse_slope(m.group(1) or "2"))
    if s == "doubling":
        return doubling_map()
    if not os.path.exists(s):
        raise MapError(f"no map file or built-in named {s!r}")
    with open(s) as fh:
        return PiecewiseLinearMap.from_json(fh.read())


def parse_schedule(text: str) -> list:
    """``"2x:4..65536"`` -> ``[4, 8, ..., 65536]``."""
    m = re.fullmatch(r"\s*(\d+)x:(\d+)\.\.(\d+)\s*", text)
    if not m:
        raise ValueError(f"bad schedule {text!r}; expected <ratio>x:<start>..<stop>")
    ratio, start, stop = map(int, m.groups())
    if ratio < 2 or start < 1 or stop < start:
        raise ValueError(f"bad schedule {text!r}")
    out = [start]
    while out[-1] * ratio <= stop:
        out.append(out[-1] * ratio)
    if len(out) > MAX_SCHEDULE_TERMS:
        raise ValueError(f"schedule has {len(out)} terms; at most {MAX_SCHEDULE_TERMS} allowed")
    return out


def parse_n_list(text: str) -> list:
    values = [int(v) for v in text.split(",") if v.strip()]
    if not values or min(values) < 1:
        raise ValueError(f"bad N list {text!r}")
    return values


def parse_simulate(text: str) -> tuple:
    """``"T=1000000,seed=42"`` -> ``(1000000, 42)``."""
    opts = dict(kv.split("=", 1) for kv in text.split(","))
    return int(float(opts["T"])), int(opts.get("seed", 0))


@dataclass
class SweepConfig:
    map_source: object
    n_values: Sequence[int]
    mode: str | None = None
    out: str | None = None
    threads: int = 1
    simulate: tuple | None = None
    bits: bool = False
    timing: bool = True

    def __post_init__(self):
        self.n_values = sorted(set(int(n) for n in self.n_values))
        if not self.n_values or self.n_values[0] < 1:
            raise ValueError("all N must be >= 1")
        if self.mode not in (None, "exact", "float"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class SweepRow:
    N: int
    report: EntropyReport | None
    build_ms: float
    mode: str
    error: str | None = None


@dataclass
class SweepResult:
    rows: list
    gap_sup: float | None = None
    gap_inf: float | None = None
    tail_from: int | None = None
    invariance: InvarianceReport | None = field(default=None, repr=False)

    @property
    def failed(self) -> list:
        return [r for r in self.rows if r.error]


def validated_map(cfg: SweepConfig) -> tuple:
    f = load_map(cfg.map_source)
    mode = cfg.mode or ("exact" if f.is_exact else "float")
    if mode == "exact" and not f.is_exact:
        raise ValidationFailure("exact mode needs rational map data; use --mode float")
    report = verify_lebesgue_invariance(f)
    if not report.holds:
        lo, hi = report.witness
        raise ValidationFailure(
            f"Lebesgue measure is not invariant: covering sum {report.covering_sum} != 1 on [{lo}, {hi}]",
            report,
        )
    return f, mode, report


def _sweep_one(f: PiecewiseLinearMap, N: int, mode: str) -> SweepRow:
    start = time.perf_counter()
    try:
        rep = entropy_report(f, uniform_partition(N), exact=f.is_exact)
    except Exception as exc:  # recorded per N; the sweep goes on
        return SweepRow(N, None, (time.perf_counter() - start) * 1e3, mode, f"{type(exc).__name__}: {exc}")
    return SweepRow(N, rep, (time.perf_counter() - start) * 1e3, mode)


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """One entropy report per N, in ascending N whatever the execution order.

    The running sup/inf of the gap over the larger half of the schedule are
    empirical stand-ins for the lim sup and lim inf of the entropy minus the
    predicted limit.
    """
    f, mode, inv = validated_map(cfg)
    ns = list(cfg.n_values)
    if cfg.threads > 1 and len(ns) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(_sweep_one, [f] * len(ns), ns, [mode] * len(ns)))
    else:
        rows = [_sweep_one(f, N, mode) for N in ns]
    result = SweepResult(rows, invariance=inv)
    ok = [r for r in rows if r.report is not None]
    tail = ok[len(ok) // 2:]
    if tail:
        gaps = [r.report.gap for r in tail]
        result.gap_sup, result.gap_inf, result.tail_from = max(gaps), min(gaps), tail[0].N
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            write_sweep_csv(result, fh, bits=cfg.bits, timing=cfg.timing)
    return result


def write_sweep_csv(result: SweepResult, fh=None, bits: bool = False, timing: bool = True) -> None:
    fh = fh or sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    unit = LOG2 if bits else 1.0
    for row in result.rows:
        ms = f"{row.build_ms:.3f}" if timing else ""
        if row.report is None:
            w.writerow([row.N, "", "", "", "", "", ms, f"error: {row.error}"])
        else:
            w.writerow(row.report.scaled(unit).as_row() + [ms, row.mode])
    if result.gap_sup is not None:
        fh.write(
            f"# gap_sup={result.gap_sup / unit!r} gap_inf={result.gap_inf / unit!r} "
            f"over N>={result.tail_from}\n"
        )


@dataclass(frozen=True)
class SimulationCheck:
    N: int
    T: int
    seed: int
    max_entry_distance: float
    H_exact: float
    H_empirical: float | None
    unobserved: tuple
    row_distances: tuple = field(repr=False, default=())

    @property
    def entropy_difference(self) -> float | None:
        return None if self.H_empirical is None else abs(self.H_exact - self.H_empirical)


def simulation_check(f: PiecewiseLinearMap, N: int, T: int, seed: int) -> SimulationCheck:
    delta = uniform_partition(N)
    P = build_transition_matrix(f, delta)
    traj = simulate_chain(f, delta, T, seed)
    Q = empirical_transition_matrix(traj)
    observed = [n for n in range(1, N + 1) if n not in set(Q.unobserved)]
    per_row = tuple(max_entry_distance(P, Q, [n]) for n in observed)
    return SimulationCheck(
        N, T, seed, max(per_row, default=0.0), shannon_entropy(P),
        empirical_entropy(traj).value, Q.unobserved, per_row,
    )


def run_simulation_check(cfg: SweepConfig) -> list:
    """Exact versus empirical matrices and entropies for each N of the sweep."""
    if cfg.simulate is None:
        raise ValueError("the sweep config has no simulation block")
    f, _, _ = validated_map(cfg)
    T, seed = cfg.simulate
    return [simulation_check(f, N, T, seed) for N in cfg.n_values]


def write_simulation_csv(checks: list, fh, bits: bool = False) -> None:
    unit = LOG2 if bits else 1.0
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["N", "T", "seed", "max_entry_distance", "H_exact", "H_empirical", "abs_diff", "unobserved_rows"])
    for c in checks:
        emp = "" if c.H_empirical is None else repr(c.H_empirical / unit)
        diff = "" if c.entropy_difference is None else repr(c.entropy_difference / unit)
        w.writerow([c.N, c.T, c.seed, repr(c.max_entry_distance), repr(c.H_exact / unit), emp, diff, len(c.unobserved)])
