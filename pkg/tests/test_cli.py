import csv
import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from discagg.cli import main, parse_angle

NS = "{http://www.w3.org/2000/svg}"


def _json(path):
    with open(path) as fh:
        return json.load(fh)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_angle():
    assert parse_angle("0.35pi") == pytest.approx(0.35 * math.pi)
    assert parse_angle("pi") == pytest.approx(math.pi)
    assert parse_angle("1.2") == 1.2


###############################################################################
# simulate-cluster
###############################################################################


def test_cluster_small_run(tmp_path):
    out = tmp_path / "c"
    assert main(["simulate-cluster", "--n", "20", "--seed", "1", "--out", str(out)]) == 0
    for name in ("config.json", "events.jsonl", "summary.json", "metrics.csv", "cluster.svg"):
        assert (out / name).exists()
    root = ET.parse(out / "cluster.svg").getroot()
    # 20 attached discs plus the seed disc
    circles = root.findall(f".//{NS}circle")
    assert len(circles) == 21
    assert len({c.get("fill") for c in circles}) > 10
    hull = root.find(f"{NS}path")
    assert hull.get("stroke") == "#000000" and hull.get("fill") == "none"
    events = (out / "events.jsonl").read_text().splitlines()
    assert len(events) == 20 and json.loads(events[0])["step"] == 1
    cfg = _json(out / "config.json")
    assert cfg["seed"] == 1 and cfg["n"] == 20 and cfg["replica_seeds"] == [1]
    s = _json(out / "summary.json")
    assert s["branches"]["partition_ok"] is True


def test_cluster_rerun_byte_identical(tmp_path):
    args = ["simulate-cluster", "--n", "500", "--seed", "4"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("events.jsonl", "metrics.csv", "branches.csv", "summary.json", "cluster.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cluster_replicas(tmp_path):
    out = tmp_path / "r"
    assert main(["simulate-cluster", "--n", "200", "--replicas", "3", "--no-svg", "--out", str(out)]) == 0
    ens = _json(out / "ensemble.json")
    assert ens["replicas"] == 3 and sum(ens["shape_counts"].values()) == 3
    assert (out / "replica_002" / "summary.json").exists()
    assert not (out / "replica_000" / "cluster.svg").exists()


def test_cluster_usage_errors(tmp_path, capsys):
    assert main(["simulate-cluster", "--n", "0", "--out", str(tmp_path)]) == 2
    assert main(["simulate-cluster", "--n", "2.5", "--out", str(tmp_path)]) == 2
    assert main(["simulate-cluster", "--out", str(tmp_path)]) == 2
    assert main(["no-such-command"]) == 2
    assert "error" in capsys.readouterr().err


def test_large_counts_parse():
    from discagg.cli import build_parser
    args = build_parser().parse_args(["simulate-cluster", "--n", "1e6", "--out", "x"])
    assert args.n == 10**6


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["simulate-cluster", "--n", "5", "--out", str(blocker / "sub")]) == 1


###############################################################################
# simulate-vertex
###############################################################################


def test_vertex_sweep_monotone(tmp_path):
    out = tmp_path / "v"
    assert main(["simulate-vertex", "--sweep", "--a", "1.0", "--replicas", "3e4", "--cap", "1e4",
                 "--seed", "1", "--out", str(out)]) == 0
    fit = _json(out / "fit.json")
    ex = [r["exponent_hat"] for r in fit["runs"]]
    assert fit["monotone_decreasing"] is True and ex[0] > ex[1] > ex[2]
    assert {"theta", "n", "survival"} == set(_rows(out / "tail.csv")[0])
    assert len(_rows(out / "lifetimes.csv")) == 3 * 30_000


def test_vertex_reproducible_and_errors(tmp_path):
    args = ["simulate-vertex", "--theta", "0.4pi", "--replicas", "2000", "--cap", "1000", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "lifetimes.csv").read_bytes() == (tmp_path / "b" / "lifetimes.csv").read_bytes()
    assert main(["simulate-vertex", "--theta", "0.5pi", "--out", str(tmp_path / "c")]) == 2
    assert main(["simulate-vertex", "--theta", "2.0", "--out", str(tmp_path / "c")]) == 2
    assert main(["simulate-vertex", "--out", str(tmp_path / "c")]) == 2


###############################################################################
# escape-tail
###############################################################################


def test_escape_both_methods(tmp_path):
    out = tmp_path / "e"
    assert main(["escape-tail", "--theta", "0.4pi", "--a", "2", "--method", "both", "--replicas", "2e4",
                 "--t-max", "1e4", "--out", str(out)]) == 0
    fit = _json(out / "fit.json")
    assert 0 <= fit["ks_p"] <= 1 and "ks_stat" in fit
    assert set(fit["fits"]) == {"euler", "exact_bridge"}
    rows = _rows(out / "escape_times.csv")
    assert set(rows[0]) == {"mu", "sigma", "a", "method", "T", "censored"}
    assert len(rows) == 40_000
    assert all(float(r["T"]) >= 1 for r in rows[:100])


def test_escape_mu_sigma_and_errors(tmp_path):
    out = tmp_path / "m"
    assert main(["escape-tail", "--mu", "1", "--sigma", "1", "--a", "1", "--replicas", "1e4",
                 "--t-max", "1e3", "--no-samples", "--out", str(out)]) == 0
    assert not (out / "escape_times.csv").exists()
    assert "exact_bridge" in _json(out / "fit.json")["fits"]
    assert main(["escape-tail", "--theta", "0.4pi", "--out", str(out)]) == 2  # missing --a
    assert main(["escape-tail", "--a", "1", "--out", str(out)]) == 2
    assert main(["escape-tail", "--theta", "0.4pi", "--mu", "1", "--a", "1", "--out", str(out)]) == 2
    assert main(["escape-tail", "--mu", "-1", "--sigma", "1", "--a", "1", "--out", str(out)]) == 2


###############################################################################
# polygon-flow
###############################################################################


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_polygon_equilateral_constant_angles(tmp_path):
    f = _write(tmp_path / "tri.txt", "# equilateral\n0 0\n1 0\n0.5 0.8660254037844386\n")
    out = tmp_path / "p"
    assert main(["polygon-flow", "--vertices-file", f, "--steps", "200", "--out", str(out)]) == 0
    rows = _rows(out / "trajectory.csv")
    assert len(rows) == 201
    for r in rows:
        ang = [float(x) for x in r["angles"].split()]
        assert r["vertex_count"] == "3"
        assert max(abs(a - math.pi / 3) for a in ang) < 1e-9
    assert (out / "merges.jsonl").read_text() == ""


def test_polygon_pentagon_merge_logged(tmp_path):
    pts = [(math.cos(t), math.sin(t)) for t in (0.0, 1.0, 2.3, 3.9, 5.0)]
    f = _write(tmp_path / "pent.txt", "\n".join(f"{x!r},{y!r}" for x, y in pts) + "\n")
    out = tmp_path / "p"
    assert main(["polygon-flow", "--vertices-file", f, "--steps", "20000", "--out", str(out)]) == 0
    merges = [json.loads(line) for line in (out / "merges.jsonl").read_text().splitlines()]
    assert merges and merges[0]["vertex_count_after"] == 4
    counts = [int(r["vertex_count"]) for r in _rows(out / "trajectory.csv")]
    assert counts[0] == 5 and 4 in counts


def test_polygon_malformed_file(tmp_path, capsys):
    f = _write(tmp_path / "bad.txt", "0 0\n1 0\n1 oops\n")
    assert main(["polygon-flow", "--vertices-file", f, "--out", str(tmp_path / "p")]) == 2
    assert "bad.txt:3:" in capsys.readouterr().err
    f = _write(tmp_path / "flat.txt", "0 0\n1 0\n2 0\n")
    assert main(["polygon-flow", "--vertices-file", f, "--out", str(tmp_path / "p")]) == 2
    assert main(["polygon-flow", "--vertices-file", str(tmp_path / "missing.txt"),
                 "--out", str(tmp_path / "p")]) == 1


def test_seventeen_digit_output(tmp_path):
    f = _write(tmp_path / "sq.txt", "0 0\n1 0\n1 1\n0 1\n")
    out = tmp_path / "p"
    assert main(["polygon-flow", "--vertices-file", f, "--steps", "3", "--dn", "0.1", "--out", str(out)]) == 0
    row = _rows(out / "trajectory.csv")[1]
    assert row["n"] == "0.10000000000000001"
    assert row["angles"].split()[0] == format(math.pi / 2, ".17g")


###############################################################################
# Golden examples
###############################################################################

GOLDEN = Path(__file__).resolve().parent.parent / "docs" / "golden"


@pytest.mark.parametrize("name,argv,files", [
    ("simulate-cluster", ["simulate-cluster", "--n", "20", "--seed", "1"],
     ["events.jsonl", "metrics.csv", "branches.csv", "summary.json", "cluster.svg"]),
    ("simulate-vertex", ["simulate-vertex", "--theta", "0.4pi", "--replicas", "1000", "--cap", "1000",
                         "--seed", "1"], ["lifetimes.csv", "tail.csv", "fit.json"]),
    ("escape-tail-samples", ["escape-tail", "--theta", "0.4pi", "--a", "2", "--replicas", "50",
                             "--t-max", "100", "--seed", "1"], ["escape_times.csv", "survival.csv"]),
    ("polygon-flow", ["polygon-flow", "--vertices-file", str(GOLDEN / "pentagon.txt"), "--dn", "0.5",
                      "--steps", "300"], ["trajectory.csv", "merges.jsonl"]),
])
def test_golden_examples_reproduce(tmp_path, name, argv, files):
    assert main(argv + ["--out", str(tmp_path)]) == 0
    for f in files:
        assert (tmp_path / f).read_bytes() == (GOLDEN / name / f).read_bytes(), f
