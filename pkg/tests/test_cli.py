import csv
import json

import numpy as np
import pytest

from qmk import __version__
from qmk.bipartite import BipartiteInstance, mk2_value
from qmk.cli import build_parser, config_from_args, main


def write_spec(path, points, hbar=1.0, d=1):
    path.write_text(json.dumps({
        "hbar": hbar,
        "d": d,
        "kind": "coherent_mixture",
        "points": [{"q": list(q), "p": list(p), "w": w} for q, p, w in points],
    }))
    return str(path)


@pytest.fixture
def pair(tmp_path):
    r = write_spec(tmp_path / "r.json", [((1.0,), (0.0,), 0.5), ((-1.0,), (0.0,), 0.5)])
    s = write_spec(tmp_path / "s.json", [((0.5,), (-0.3,), 1.0)])
    return r, s


def run_json(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(argv + ["--output", str(out)])
    return code, json.loads(out.read_text())


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["nonsense"],
    ["distance", "--hbar", "x,y"],
    ["distance", "--format", "xml"],
])
def test_parse_errors_exit_1(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_missing_input_exits_1(tmp_path):
    assert main(["distance", "--input", str(tmp_path / "nope.json")]) == 1


def test_malformed_input_exits_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["distance", "--input", str(bad), "--input2", str(bad)]) == 1
    bad.write_text(json.dumps({"kind": "coherent_mixture"}))
    assert main(["distance", "--input", str(bad), "--input2", str(bad)]) == 1


def test_infeasible_input_exits_2(tmp_path):
    r = write_spec(tmp_path / "r.json", [((0.0,), (0.0,), 1.0)])
    neg = tmp_path / "neg.json"
    neg.write_text(json.dumps({"hbar": 1.0, "d": 1, "kind": "fock_matrix", "matrix": {"re": [[1.5, 0], [0, -0.5]]}}))
    assert main(["distance", "--input", str(neg), "--input2", str(neg)]) == 2
    assert main(["distance", "--input", r, "--input2", str(neg)]) in (1, 2)


def test_not_converged_exits_3_with_report(pair, tmp_path):
    # rank-2 marginals on both sides, so the iterative solver is used
    t = write_spec(tmp_path / "t.json", [((1.0,), (0.0,), 0.75), ((-1.0,), (0.0,), 0.25)])
    code, body = run_json(["distance", "--input", pair[0], "--input2", t, "--max-iter", "2", "--tol", "1e-14"], tmp_path)
    assert code == 3
    assert body["converged"] is False
    assert np.isfinite(body["mk2"])


def test_distance_identical_coherent(tmp_path):
    z = write_spec(tmp_path / "z.json", [((0.3,), (-0.2,), 1.0)], hbar=0.5)
    code, body = run_json(["distance", "--input", z, "--input2", z], tmp_path)
    assert code == 0
    assert body["mk2"] == pytest.approx(2 * 0.5, rel=1e-6)
    assert body["version"] == __version__
    assert len(body["config_hash"]) == 16


@pytest.mark.parametrize("command", ["dual", "certify", "structure", "classical"])
def test_commands_run(command, pair, tmp_path):
    code, body = run_json([command, "--input", pair[0], "--input2", pair[1]], tmp_path)
    assert code == 0
    assert body["command"] == command


def test_dual_and_certify_consistent(pair, tmp_path):
    _, dual = run_json(["dual", "--input", *pair[:1], "--input2", pair[1]], tmp_path, "d.json")
    _, cert = run_json(["certify", "--input", pair[0], "--input2", pair[1]], tmp_path, "c.json")
    assert dual["dual_value"] == pytest.approx(dual["primal_value"], rel=1e-6)
    assert cert["ok"] is True
    A = np.array(dual["A"]["re"]) + 1j * np.array(dual["A"]["im"])
    assert np.allclose(A, A.conj().T)


def test_classical_reports_bound(pair, tmp_path):
    _, body = run_json(["classical", "--input", pair[0], "--input2", pair[1]], tmp_path)
    assert body["classical"] == pytest.approx(0.5 * (0.5**2 + 0.3**2) + 0.5 * (1.5**2 + 0.3**2))
    assert body["bound_slack"] >= -1e-6


def test_bipartite_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["bipartite-sweep", "--a", "1,0.5", "--b", "1", "--hbar", "1,0.5", "--format", "csv", "--output", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == f"# qmk {__version__}"
    assert lines[1].startswith("# config ")
    rows = list(csv.DictReader(lines[2:]))
    assert [(float(r["a"]), float(r["hbar"])) for r in rows] == [(0.5, 0.5), (0.5, 1.0), (1.0, 0.5), (1.0, 1.0)]
    for r in rows:
        oracle = mk2_value(BipartiteInstance(float(r["a"]), float(r["b"]), float(r["hbar"])))
        assert float(r["mk2_oracle"]) == oracle
        assert abs(float(r["mk2_solver"]) - oracle) <= 1e-6 * oracle
        assert float(r["residual_oufder_q"]) < 1e-8


def test_output_is_deterministic(tmp_path):
    argv = ["bipartite-sweep", "--a", "1", "--b", "0.5,2", "--hbar", "1", "--format", "csv"]
    main(argv + ["--output", str(tmp_path / "1.csv")])
    main(argv + ["--output", str(tmp_path / "2.csv")])
    assert (tmp_path / "1.csv").read_bytes() == (tmp_path / "2.csv").read_bytes()


def test_config_hash_tracks_input_contents(pair, tmp_path):
    args = build_parser().parse_args(["distance", "--input", pair[0], "--input2", pair[1]])
    before = config_from_args(args).digest()
    write_spec(tmp_path / "s.json", [((0.6,), (-0.3,), 1.0)])
    assert config_from_args(args).digest() != before


def test_toeplitz_check(tmp_path):
    m = write_spec(tmp_path / "m.json", [((0.5,), (0.0,), 0.6), ((-0.5,), (0.2,), 0.4)])
    code, body = run_json(["toeplitz-check", "--input", m, "--hbar", "1,0.5"], tmp_path)
    assert code == 0
    assert [r["hbar"] for r in body["rows"]] == [0.5, 1.0]
    for r in body["rows"]:
        assert abs(r["delta"]) < 1e-6


def test_spectrum(tmp_path):
    code, body = run_json(["spectrum", "--hbar", "1", "--cutoff", "3", "--dim-d", "1"], tmp_path)
    assert code == 0
    enclosed = [r for r in body["rows"] if r["enclosed"]]
    assert min(r["eigenvalue"] for r in enclosed) == pytest.approx(2.0)
    for r in enclosed:
        assert r["eigenvalue"] == pytest.approx(2 * (2 * r["k"] + 1))


def test_stdout_default(capsys):
    assert main(["spectrum", "--cutoff", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["cutoff"] == 2
