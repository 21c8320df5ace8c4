import argparse
import json

import pytest

from src.cli import main, merge_config, parse_fractions, parse_pair
from src.errors import UsageError

PHI = '{"1": 2, "2": 1}'


def _run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr()


def test_predict_gt(capsys):
    code, captured = _run(capsys, ["predict", "--method", "gt", "--phi", PHI, "--r", "1", "--t", "10"])
    assert code == 0
    report = json.loads(captured.out)
    assert report["method"] == "gt"
    assert report["point"] == pytest.approx(1.0)
    assert report["variance_proxy"] == pytest.approx(4.0)


def test_predict_with_interval(capsys):
    code, captured = _run(
        capsys, ["predict", "--method", "gt", "--phi", PHI, "--r", "1", "--t", "10", "--level", "0.95"]
    )
    assert code == 0
    low, high = json.loads(captured.out)["interval"]
    assert low < 1.0 < high


EXIT_CODES = [
    (["predict", "--method", "gt", "--phi", PHI, "--r", "1", "--bogus"], 1, "unknown flag"),
    (["predict", "--method", "linear", "--phi", PHI, "--r", "1", "--t", "10"], 1, "linear without weights"),
    (["predict", "--method", "gt", "--r", "1", "--t", "10"], 1, "no profile source"),
    (["predict", "--method", "gt", "--phi", '{"0": 1}', "--r", "1", "--t", "10"], 2, "zero multiplicity"),
    (["predict", "--method", "gt", "--phi", "not json", "--r", "1", "--t", "10"], 2, "malformed profile"),
    (["predict", "--method", "gt", "--phi", '{"2000": 1}', "--r", "10", "--t", "10"], 3, "overflow guard"),
    (["predict", "--method", "ratio-alpha", "--phi", "{}", "--r", "1", "--t", "10"], 2, "no species seen"),
    (["--version"], 0, "version"),
]


@pytest.mark.parametrize("argv, expected, msg", EXIT_CODES)
def test_exit_codes(capsys, argv, expected, msg):
    code, _ = _run(capsys, argv)
    assert code == expected, f"unexpected exit code: {msg}"


def test_linear_weights_file(capsys, tmp_path):
    weights = tmp_path / "weights.json"
    weights.write_text("[-1.0, 1.0]", encoding="utf-8")
    code, captured = _run(
        capsys,
        ["predict", "--method", "linear", "--weights", str(weights), "--phi", PHI, "--r", "1", "--t", "10"],
    )
    assert code == 0
    assert json.loads(captured.out)["point"] == pytest.approx(-1.0)


def test_ingest_then_bench(capsys, tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("a b a c d b e a f g h a b i j\n", encoding="utf-8")
    stream_path = tmp_path / "corpus.bin"
    code, captured = _run(
        capsys, ["ingest", "--kind", "tokens", "--input", str(corpus), "--out", str(stream_path)]
    )
    assert code == 0
    assert json.loads(captured.out)["events"] == 15
    assert (tmp_path / "corpus.bin.manifest.json").exists()

    table = tmp_path / "table.csv"
    code, captured = _run(
        capsys,
        [
            "bench", "--input", str(stream_path), "--methods", "gt,null",
            "--fracs", "0.2,0.4", "--seed", "3", "--perms", "4", "--out", str(table),
        ],
    )
    assert code == 0
    assert json.loads(captured.out) == {"out": str(table), "rows": 4, "gaps": 0}
    lines = table.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "fraction_seen,method,mape_mean,mape_sem,n_perms"
    assert len(lines) == 5
    manifest = json.loads((tmp_path / "table.csv.manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 3
    assert manifest["n_perms"] == 4
    assert str(table) in manifest["outputs"]


def test_bench_latex_by_suffix(capsys, tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("x y x z w y v x\n", encoding="utf-8")
    stream_path = tmp_path / "corpus.bin"
    main(["ingest", "--kind", "tokens", "--input", str(corpus), "--out", str(stream_path)])
    table = tmp_path / "table.tex"
    code, _ = _run(capsys, ["bench", "--input", str(stream_path), "--methods", "gt", "--fracs", "0.5", "--out", str(table)])
    assert code == 0
    assert table.read_text(encoding="utf-8").startswith("\\begin{tabular}{lc}")


def test_fit_hstar_writes_artifacts(capsys, tmp_path):
    out = tmp_path / "weights.json"
    code, captured = _run(
        capsys,
        [
            "fit-hstar", "--r", "1", "--t", "10", "--depth", "3", "--grid", "100",
            "--budget", "5", "--cert-grid", "1000", "--no-cache", "--out", str(out),
        ],
    )
    assert code == 0
    weights = json.loads(out.read_text(encoding="utf-8"))
    assert len(weights) == 3
    certificate = json.loads((tmp_path / "weights.json.certificate.json").read_text(encoding="utf-8"))
    assert certificate["cert_grid"] == 1000
    assert certificate["depth"] == 3
    manifest = json.loads((tmp_path / "weights.json.manifest.json").read_text(encoding="utf-8"))
    assert len(manifest["weights_sha256"]) == 64
    assert manifest["depth"] == 3
    assert json.loads(captured.out)["weights"] == weights


def test_config_precedence(capsys, tmp_path):
    config = tmp_path / "unseen.toml"
    config.write_text('r = 5.0\n\n[predict]\nr = 1.0\nt = 10.0\n', encoding="utf-8")

    code, captured = _run(capsys, ["--config", str(config), "predict", "--method", "gt", "--phi", PHI])
    assert code == 0
    assert json.loads(captured.out)["point"] == pytest.approx(1.0)

    code, captured = _run(
        capsys, ["--config", str(config), "predict", "--method", "gt", "--phi", PHI, "--r", "2"]
    )
    assert code == 0
    # -(2 * -2 + 1 * 4)
    assert json.loads(captured.out)["point"] == pytest.approx(0.0)


def test_bad_config_is_usage_error(capsys, tmp_path):
    config = tmp_path / "broken.toml"
    config.write_text("r = [", encoding="utf-8")
    code, _ = _run(capsys, ["--config", str(config), "predict", "--method", "gt", "--phi", PHI])
    assert code == 1


def test_diagnose(capsys, tmp_path):
    sets = tmp_path / "sets.txt"
    sets.write_text("a b\n", encoding="utf-8")
    code, captured = _run(capsys, ["diagnose", "--input", str(sets), "--r", "1"])
    assert code == 0
    report = json.loads(captured.out)
    assert report["epsilon_hat"] == pytest.approx(4.0)
    assert report["arity"] == 2


def test_simulate_mse(capsys, tmp_path):
    model = tmp_path / "model.json"
    model.write_text(json.dumps({"weights": [0.01] * 100}), encoding="utf-8")
    code, captured = _run(
        capsys,
        ["simulate", "--model", str(model), "--r", "0.5", "--t", "50", "--reps", "50", "--seed", "1"],
    )
    assert code == 0
    payload = json.loads(captured.out)
    assert payload["method"] == "gt"
    assert payload["closed_form_mse"] > 0


FRACTION_TESTS = [
    ("0.1..0.5x5", [0.1, 0.2, 0.3, 0.4, 0.5], "range"),
    ("0.25,0.5", [0.25, 0.5], "list"),
]


@pytest.mark.parametrize("spec, expected, msg", FRACTION_TESTS)
def test_parse_fractions(spec, expected, msg):
    assert parse_fractions(spec) == pytest.approx(expected), f"unexpected grid: {msg}"


def test_parse_errors():
    with pytest.raises(UsageError):
        parse_fractions("a..b")
    with pytest.raises(UsageError):
        parse_pair("2")
    assert parse_pair("2,3") == (2, 3)


def test_merge_config_ignores_unknown_keys():
    args = argparse.Namespace(command="predict", r=None, t=3.0)
    applied = merge_config(args, {"r": 2.0, "t": 9.0, "colour": "blue", "bench": {"r": 7.0}})
    assert applied == {"r": 2.0}
    assert args.t == 3.0
