import json

import pytest

from nilwalk.cli import main
from nilwalk.models import bundled_models, resolve_model_path


@pytest.mark.parametrize("name", bundled_models())
def test_check_every_bundled_model(name, tmp_path):
    assert main(["check", name, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "check.json").read_text())
    assert report["stationarity_residual_zero"] and report["centered"]


def test_edgeworth_report(tmp_path):
    assert main(["edgeworth", "skewed_z", "--f", "x^3", "--n", "16..4096", "--N", "3", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "edgeworth.json").read_text())
    assert abs(report["fit"]["xi"][0] - 2) < 1e-10
    assert report["xi_formula"]["1"] == "2"
    assert report["rows"][0]["D"]["rational"] == "1/2"
    row = report["rows"][1]["D"]
    assert (row["rational"], row["inv_sqrt_n"]) == ("0", "2")
    assert row["approx"] == pytest.approx(2 / 32 ** 0.5)


def test_em_check_exit_code(tmp_path):
    assert main(["em-check", "--l", "2", "--s", "3", "--out", str(tmp_path)]) == 0
    # t1^4 has a vanishing n^-3 term, so the ratio is 1/16 instead of 1/8
    assert main(["em-check", "--l", "2", "--s", "3", "--F", "t1^4", "--out", str(tmp_path)]) == 2


def test_invalid_model_exit_code(tmp_path, capsys):
    data = json.loads(resolve_model_path("skewed_z").read_text())
    data["graph"]["edges"][0]["p"] = "1/5"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    assert main(["check", str(path)]) == 1
    assert "vertex v" in capsys.readouterr().err
    assert main(["check", "no_such_model"]) == 1


def test_unknown_command_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["plot", "skewed_z"])
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [
    ["moments", "hexagonal", "--n", "1,5,9", "--dmax", "3", "--verify"],
    ["gaussian-moments", "heisenberg_bouquet", "--dmax", "6"],
    ["trotter", "skewed_z", "--f", "x^3", "--n", "16..256"],
    ["berry-esseen", "hexagonal_flat", "--n", "17,33,65,129"],
    ["ergodic", "cycle3", "--n", "1,20"],
    ["measure", "bipartite"],
    ["harmonic", "hexagonal_flat"],
])
def test_commands_succeed_and_are_deterministic(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    for file in (tmp_path / "a").iterdir():
        assert file.read_bytes() == (tmp_path / "b" / file.name).read_bytes()


def test_monte_carlo_reports_ignore_thread_count(tmp_path):
    base = ["mc", "hexagonal", "--n", "20", "--count", "30000", "--seed", "5"]
    assert main(base + ["--threads", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--threads", "4", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "mc.csv").read_bytes() == (tmp_path / "b" / "mc.csv").read_bytes()


def test_rationals_are_serialized_as_strings(tmp_path):
    assert main(["gaussian-moments", "hexagonal", "--dmax", "2", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "gaussian_moments.csv").read_text()
    assert "2/9" in text and "-1/9" in text
