import json

import numpy as np
import pytest

from cgmatch import TokenMatrix, serialize_embedding_file
from cgmatch.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, run_cli

from conftest import CASE2, sim_from_upper


@pytest.fixture
def case2_file(tmp_path):
    path = tmp_path / "case2.cget"
    path.write_bytes(serialize_embedding_file(sim_from_upper(4, CASE2)))
    return str(path)


@pytest.fixture
def tokens_file(tmp_path):
    rng = np.random.default_rng(5)
    path = tmp_path / "tokens.cget"
    path.write_bytes(serialize_embedding_file(TokenMatrix(rng.normal(size=(8, 4)))))
    return str(path)


@pytest.fixture
def importance_file(tmp_path):
    path = tmp_path / "imp.csv"
    path.write_text("0.9\n0.1\n0.0\n0.2\n")
    return str(path)


def run(capsys, argv):
    code = run_cli(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_match_report(capsys, case2_file):
    code, out, err = run(capsys, ["match", "--input", case2_file, "--method", "cgsm", "--r", "2"])
    assert code == EXIT_OK
    assert err == ""
    report = json.loads(out)
    assert report["pairs"] == [[0, 2], [1, 3]]
    assert abs(report["objective"] - 1.7) < 1e-6  # f32 storage rounding
    assert report["timing_us"] is None
    assert report["schema_version"] == 1


def test_match_with_timings_flag(capsys, case2_file):
    code, out, _ = run(
        capsys, ["match", "--input", case2_file, "--method", "cgsm", "--r", "2", "--timings"]
    )
    assert code == EXIT_OK
    assert json.loads(out)["timing_us"] is not None


def test_match_stdout_is_byte_identical(capsys, case2_file):
    argv = ["match", "--input", case2_file, "--method", "cgsm", "--r", "2"]
    _, first, _ = run(capsys, argv)
    _, second, _ = run(capsys, argv)
    assert first == second


def test_match_guided_via_files(capsys, case2_file, importance_file):
    code, out, _ = run(
        capsys,
        [
            "match",
            "--input",
            case2_file,
            "--method",
            "cgsm-guided",
            "--r",
            "2",
            "--importance",
            importance_file,
        ],
    )
    assert code == EXIT_OK
    assert json.loads(out)["pairs"] == [[1, 3], [2, 3]]


def test_match_protect_list(capsys, tokens_file):
    code, out, _ = run(
        capsys,
        ["match", "--input", tokens_file, "--method", "cgsm", "--r", "2", "--protect", "0,3"],
    )
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["protected"] == [0, 3]
    touched = {i for pair in report["pairs"] for i in pair}
    assert not touched & {0, 3}


def test_match_usage_errors_exit_2(capsys, case2_file):
    with pytest.raises(SystemExit) as exc:
        run_cli(["match", "--input", case2_file, "--method", "nope", "--r", "2"])
    assert exc.value.code == EXIT_USAGE

    with pytest.raises(SystemExit) as exc:
        run_cli(["match", "--input", case2_file, "--method", "cgsm-guided", "--r", "2"])
    assert exc.value.code == EXIT_USAGE

    with pytest.raises(SystemExit) as exc:
        run_cli(
            ["match", "--input", case2_file, "--method", "greedy", "--r", "1", "--protect", "0"]
        )
    assert exc.value.code == EXIT_USAGE
    capsys.readouterr()


def test_match_missing_file_exits_1(capsys):
    code, out, err = run(capsys, ["match", "--input", "/no/such/file", "--method", "cgsm", "--r", "1"])
    assert code == EXIT_DATA
    assert out == ""
    assert "error" in err


def test_match_oversized_r_exits_1(capsys, case2_file):
    code, _, err = run(capsys, ["match", "--input", case2_file, "--method", "cgsm", "--r", "4"])
    assert code == EXIT_DATA
    assert "reduction_too_large" in err


def test_expect_report(capsys):
    code, out, _ = run(capsys, ["expect", "--n", "197", "--layers", "12", "--r", "16"])
    assert code == EXIT_OK
    report = json.loads(out)
    assert abs(report["expectation_complete"] - 0.7833405592482141) < 1e-12
    assert report["expectation_bipartite"] == 0.5


def test_simulate_deterministic(capsys):
    argv = [
        "simulate", "--n", "30", "--layers", "2", "--r", "3",
        "--trials", "4000", "--seed", "9", "--method", "cgsm",
    ]
    code, first, _ = run(capsys, argv)
    assert code == EXIT_OK
    _, second, _ = run(capsys, argv)
    assert first == second
    report = json.loads(first)
    assert 0.0 <= report["rate"] <= 1.0


def test_schedule_report(capsys):
    code, out, _ = run(capsys, ["schedule", "--n0", "100", "--layers", "12"])
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["r_per_layer"] == [8] * 12
    assert report["final_tokens"] == 4


def test_flops_from_config(capsys, tmp_path):
    config = tmp_path / "model.json"
    config.write_text(
        json.dumps(
            {
                "branches": [
                    {"name": "vision", "layers": 12, "width": 768, "tokens": 197, "reduced": True},
                    {"name": "text", "layers": 12, "width": 512, "tokens": 77},
                ]
            }
        )
    )
    code, out, _ = run(capsys, ["flops", "--config", str(config)])
    assert code == EXIT_OK
    report = json.loads(out)
    assert abs(report["total_gflops"] - 11.606636544) < 1e-9
    assert report["reduction_fraction"] > 0.35


def test_flops_bad_config_is_a_data_error(capsys, tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    code, _, err = run(capsys, ["flops", "--config", str(broken)])
    assert code == EXIT_DATA
    assert "invalid JSON" in err

    # schema violations in the config are data errors too, not usage
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"branches": [{"name": "x"}]}))
    code, _, err = run(capsys, ["flops", "--config", str(wrong)])
    assert code == EXIT_DATA


def test_bench_runs_small(capsys):
    code, out, _ = run(capsys, ["bench", "--sizes", "16,32", "--repeats", "2"])
    assert code == EXIT_OK
    report = json.loads(out)
    assert [e["n"] for e in report["entries"]] == [16, 32]
    assert report["log_log_slope"] is not None


def test_bad_protect_value_exits_2(capsys, case2_file):
    with pytest.raises(SystemExit) as exc:
        run_cli(
            ["match", "--input", case2_file, "--method", "cgsm", "--r", "1", "--protect", "a,b"]
        )
    assert exc.value.code == EXIT_USAGE
    capsys.readouterr()
