import csv
import io
import json
import math
from fractions import Fraction as F

import pytest

from coarsegrain import cli, sweep
from coarsegrain.chain import TransitionMatrix, build_transition_matrix
from coarsegrain.entropy import skew_tent
from coarsegrain.maps import MapError, make_map
from coarsegrain.partition import uniform_partition
from coarsegrain.sweep import (
    CSV_COLUMNS,
    SweepConfig,
    ValidationFailure,
    load_map,
    parse_n_list,
    parse_schedule,
    parse_simulate,
    parse_slope,
    run_sweep,
    simulation_check,
    write_sweep_csv,
)

LOG2 = math.log(2)


def read_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_parse_schedule():
    assert parse_schedule("2x:4..64") == [4, 8, 16, 32, 64]
    assert parse_schedule("3x:1..10") == [1, 3, 9]
    for bad in ("2x:8..4", "1x:1..4", "x:1..4", "2x:1..4294967296"):
        with pytest.raises(ValueError):
            parse_schedule(bad)


def test_parse_helpers():
    assert parse_n_list("3, 8,16") == [3, 8, 16]
    assert parse_simulate("T=1e6,seed=42") == (1_000_000, 42)
    assert parse_slope("3/2").value == F(3, 2)
    assert parse_slope("sqrt(9)").kind == "integer"
    s = parse_slope("sqrt2")
    assert s.kind == "irrational" and s.approx == math.sqrt(2)
    assert parse_slope("pi").kind == "irrational"
    with pytest.raises(MapError):
        parse_slope("banana")


def test_load_map_sources(tmp_path):
    assert load_map("tent:m=2") == skew_tent(2)
    assert load_map("doubling").r == 2
    path = tmp_path / "m.json"
    path.write_text(skew_tent(F(7, 3)).to_json())
    assert load_map(str(path)) == skew_tent(F(7, 3))
    with pytest.raises(MapError):
        load_map("no/such/file.json")


def test_config_sorts_and_dedupes():
    cfg = SweepConfig("tent:m=2", [16, 4, 16, 8])
    assert cfg.n_values == [4, 8, 16]
    with pytest.raises(ValueError):
        SweepConfig("tent:m=2", [0, 4])


def test_tent_even_N_gap_zero():
    res = run_sweep(SweepConfig("tent:m=2", [2, 4, 8, 16]))
    for row in res.rows:
        assert row.report.H_delta == LOG2
        assert row.report.gap == 0
        assert row.mode == "exact"


def test_tent_odd_N():
    res = run_sweep(SweepConfig("tent:m=2", [3, 10001]))
    small, big = (r.report for r in res.rows)
    assert abs(small.gap) == pytest.approx(LOG2 / 3, abs=1e-15)
    assert abs(big.gap) < 0.01


def test_skew_tent_sweep_point():
    res = run_sweep(SweepConfig("tent:m=3/2", [6144]))
    assert abs(res.rows[0].report.gap) <= 1e-3


def test_row_order_independent_of_threads():
    ns = [50, 7, 300, 12, 129]
    a = run_sweep(SweepConfig("tent:m=7/3", ns, threads=1))
    b = run_sweep(SweepConfig("tent:m=7/3", ns, threads=3))
    assert [r.N for r in a.rows] == sorted(ns)
    assert [r.report for r in a.rows] == [r.report for r in b.rows]


def test_csv_byte_identical_without_timing(tmp_path):
    outs = []
    for threads in (1, 2):
        path = tmp_path / f"s{threads}.csv"
        run_sweep(SweepConfig("tent:m=3/2", [10, 20, 40, 80], out=str(path), threads=threads, timing=False))
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    text = outs[0].decode()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert text.splitlines()[-1].startswith("# gap_sup=")
    rows = read_rows(text)
    assert [int(r["N"]) for r in rows] == [10, 20, 40, 80]
    assert all(r["build_ms"] == "" for r in rows)
    assert float(rows[-1]["predicted_limit"]) == float(rows[-1]["lyapunov"]) + float(rows[-1]["defect"])


def test_bits_rescales():
    res = run_sweep(SweepConfig("tent:m=2", [8]))
    buf = io.StringIO()
    write_sweep_csv(res, buf, bits=True)
    row = read_rows(buf.getvalue())[0]
    assert float(row["H_delta"]) == pytest.approx(1.0, abs=1e-15)


def test_validation_failures(tmp_path):
    bad = make_map(["0", "1/2", "1"], [2, F(-1, 2)], [0, F(1, 2)])
    path = tmp_path / "bad.json"
    path.write_text(bad.to_json())
    with pytest.raises(ValidationFailure) as exc:
        run_sweep(SweepConfig(str(path), [4]))
    assert exc.value.report.witness is not None
    with pytest.raises(ValidationFailure):
        run_sweep(SweepConfig("tent:m=sqrt2", [4], mode="exact"))


def test_exit_codes(tmp_path, monkeypatch, capsys):
    bad = make_map(["0", "1/2", "1"], [2, F(-1, 2)], [0, F(1, 2)])
    path = tmp_path / "bad.json"
    path.write_text(bad.to_json())
    assert cli.main(["sweep", "--map", str(path), "--n-list", "4"]) == 2
    assert cli.main(["sweep", "--map", "tent:m=sqrt2", "--n-list", "4", "--mode", "exact"]) == 2
    assert cli.main(["sweep", "--map", "tent:m=2", "--n-list", "4,8"]) == 0

    real = sweep.entropy_report

    def flaky(f, delta, exact=None):
        if delta.N == 8:
            raise MemoryError("simulated")
        return real(f, delta, exact)

    monkeypatch.setattr(sweep, "entropy_report", flaky)
    out = tmp_path / "partial.csv"
    assert cli.main(["sweep", "--map", "tent:m=2", "--n-list", "4,8,16", "--out", str(out)]) == 3
    rows = read_rows(out.read_text())
    assert [r["mode"] for r in rows] == ["exact", "error: MemoryError: simulated", "exact"]
    assert "N=8" in capsys.readouterr().err


def test_simulation_check_examples():
    chk = simulation_check(skew_tent(2), 1, 1000, 0)
    assert chk.max_entry_distance == 0
    chk = simulation_check(skew_tent(2), 3, 20_000, 1)
    assert chk.row_distances[1] == 0


@pytest.mark.slow
def test_simulation_check_tent_N2():
    chk = simulation_check(skew_tent(2), 2, 10**6, 42)
    assert chk.max_entry_distance <= 3e-3
    assert chk.entropy_difference < 1e-3


def test_sweep_with_simulation_writes_sidecar(tmp_path):
    out = tmp_path / "run.csv"
    code = cli.main(["sweep", "--map", "tent:m=3/2", "--n-list", "4,6", "--out", str(out),
                     "--simulate", "T=20000,seed=3", "--no-timing"])
    assert code == 0
    sim = read_rows((tmp_path / "run_sim.csv").read_text())
    assert [int(r["N"]) for r in sim] == [4, 6]
    assert all(float(r["max_entry_distance"]) < 0.05 for r in sim)


def test_cli_simulate(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    assert cli.main(["simulate", "--map", "tent:m=2", "--N", "4", "--steps", "100", "--seed", "1",
                     "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 102
    summary = json.loads(capsys.readouterr().out)
    assert summary["T"] == 100


def test_cli_matrix(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert cli.main(["matrix", "--map", "tent:m=2", "--N", "3", "--out", str(out)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["straddling_rows"] == [2] and info["doubly_stochastic"]
    P = TransitionMatrix.read_triplets(out, 3)
    assert P.rows == build_transition_matrix(skew_tent(2), uniform_partition(3)).rows


def test_cli_validate(tmp_path, capsys):
    assert cli.main(["validate", "--map", "tent:m=7/3"]) == 0
    assert json.loads(capsys.readouterr().out)["holds"]
    bad = make_map(["0", "1/2", "1"], [2, F(-1, 2)], [0, F(1, 2)])
    path = tmp_path / "bad.json"
    path.write_text(bad.to_json())
    assert cli.main(["validate", "--map", str(path)]) == 2


def test_cli_conjugacy(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["conjugacy", "--n-list", "3,8", "--steps", "20000", "--seed", "42", "--out", str(out)]) == 0
    rows = read_rows(out.read_text())
    assert [r["matrix_identical"] for r in rows] == ["True", "True"]
    assert all(r["H_base"] == r["H_conjugate"] for r in rows)
    assert all(float(r["mc_max_entry_distance"]) < 0.03 for r in rows)


def test_cli_bad_map_exit_code(capsys):
    assert cli.main(["matrix", "--map", "tent:m=banana", "--N", "3"]) == 2
    assert "error" in capsys.readouterr().err
