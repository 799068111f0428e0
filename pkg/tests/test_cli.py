"""CLI surface: subcommands, exit codes, output formats, determinism."""

import json

import pytest
from click.testing import CliRunner

from fairdiv.cli import main

SUBCOMMANDS = (
    "allocate",
    "check",
    "mu-bound",
    "verify",
    "frobenius",
    "cake",
    "greedy",
    "experiment",
)


@pytest.fixture()
def runner():
    return CliRunner()


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def orthogonal_doc(k=8):
    return {
        "kind": "goods",
        "groups": [{"size": 1}, {"size": 1}],
        "types": [
            {"copies": k, "values": ["1", "0"]},
            {"copies": k, "values": ["0", "1"]},
        ],
    }


def test_help_lists_every_subcommand(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for name in SUBCOMMANDS:
        assert name in result.output


# ---------------------------------------------------------------------------
# allocate


def test_allocate_human_output(runner, tmp_path):
    path = write_json(tmp_path / "inst.json", orthogonal_doc())
    result = runner.invoke(main, ["allocate", "--input", path])
    assert result.exit_code == 0
    assert "mechanism relative-norm" in result.output
    assert "group 0: [8, 0]" in result.output
    assert "verified EF: yes" in result.output


def test_allocate_json_output(runner, tmp_path):
    path = write_json(tmp_path / "inst.json", orthogonal_doc())
    result = runner.invoke(main, ["allocate", "--input", path, "--format", "json"])
    assert result.exit_code == 0
    body = json.loads(result.output)
    assert body["allocation"]["counts"] == [[8, 0], [0, 8]]
    assert body["exit_code"] == 0


def test_allocate_precondition_failure_is_an_error(runner, tmp_path):
    doc = {
        "kind": "goods",
        "groups": [{"size": 5}, {"size": 7}],
        "types": [{"copies": 23, "values": ["1", "1"]}],
    }
    path = write_json(tmp_path / "bad.json", doc)
    result = runner.invoke(main, ["allocate", "--input", path])
    assert result.exit_code == 1
    assert "error:" in result.output
    assert "bad_types" in result.output

    forced = runner.invoke(main, ["allocate", "--input", path, "--force"])
    assert forced.exit_code in (0, 2)
    assert "forced best-effort" in forced.output


def test_allocate_missing_file(runner):
    result = runner.invoke(main, ["allocate", "--input", "/nonexistent.json"])
    assert result.exit_code == 1
    assert "cannot read instance file" in result.output


def test_allocate_invalid_json_file(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{nope")
    result = runner.invoke(main, ["allocate", "--input", str(path)])
    assert result.exit_code == 1
    assert "invalid JSON" in result.output


def test_allocate_parse_error_reports_location(runner, tmp_path):
    doc = {
        "kind": "chores",
        "groups": [{"size": 1}, {"size": 1}],
        "types": [{"copies": 2, "values": ["0/1", "1"]}],
    }
    path = write_json(tmp_path / "zero.json", doc)
    result = runner.invoke(main, ["allocate", "--input", path])
    assert result.exit_code == 1
    assert "$.types[0].values[0]" in result.output


# ---------------------------------------------------------------------------
# check and mu-bound


def test_check_exit_code_reflects_verdict(runner, tmp_path):
    good = write_json(tmp_path / "good.json", orthogonal_doc())
    result = runner.invoke(main, ["check", "--input", good])
    assert result.exit_code == 0
    assert "satisfied" in result.output

    identical = {
        "kind": "goods",
        "groups": [{"size": 1}, {"size": 1}],
        "types": [
            {"copies": 4, "values": ["2", "2"]},
            {"copies": 4, "values": ["2", "2"]},
        ],
    }
    bad = write_json(tmp_path / "bad.json", identical)
    result = runner.invoke(main, ["check", "--input", bad])
    assert result.exit_code == 2
    assert "not satisfied" in result.output


def test_mu_bound_human_output(runner, tmp_path):
    doc = {
        "kind": "chores",
        "groups": [{"size": 1}, {"size": 1}],
        "types": [
            {"copies": 1, "values": ["1", "3"]},
            {"copies": 1, "values": ["3", "1"]},
        ],
    }
    path = write_json(tmp_path / "chores.json", doc)
    result = runner.invoke(main, ["mu-bound", "--input", path])
    assert result.exit_code in (0, 2)
    assert "copy threshold" in result.output


# ---------------------------------------------------------------------------
# verify


def test_verify_witness_line(runner, tmp_path):
    doc = {
        "kind": "goods",
        "groups": [{"size": 1}, {"size": 1}],
        "types": [
            {"copies": 1, "values": ["3", "1"]},
            {"copies": 1, "values": ["1", "3"]},
        ],
    }
    inst = write_json(tmp_path / "inst.json", doc)
    bad = write_json(tmp_path / "bad.json", {"counts": [[0, 1], [1, 0]]})
    good = write_json(tmp_path / "good.json", {"counts": [[1, 0], [0, 1]]})

    result = runner.invoke(main, ["verify", "--input", inst, "--allocation", bad])
    assert result.exit_code == 2
    assert "EF: fails" in result.output
    assert "against group" in result.output

    result = runner.invoke(main, ["verify", "--input", inst, "--allocation", good])
    assert result.exit_code == 0
    assert "EF: holds" in result.output


# ---------------------------------------------------------------------------
# frobenius


def test_frobenius_representable_human(runner):
    result = runner.invoke(main, ["frobenius", "--sizes", "5,7", "--k", "24"])
    assert result.exit_code == 0
    assert "g 1" in result.output
    assert "theta 24" in result.output
    assert "24 = 2*5 + 2*7" in result.output


def test_frobenius_gap_and_bad_sizes(runner):
    result = runner.invoke(main, ["frobenius", "--sizes", "5,7", "--k", "23"])
    assert result.exit_code == 2
    assert "not representable" in result.output

    result = runner.invoke(main, ["frobenius", "--sizes", "five", "--k", "3"])
    assert result.exit_code == 1
    assert "error:" in result.output


# ---------------------------------------------------------------------------
# cake


def test_cake_tilted_pair(runner, tmp_path):
    spec = [
        [["0", "0"], ["1", "2"]],
        [["0", "2"], ["1", "0"]],
    ]
    path = write_json(tmp_path / "densities.json", spec)
    result = runner.invoke(main, ["cake", "--input", path])
    assert result.exit_code == 0
    assert "strongly envy-free: yes" in result.output
    assert "agent 0:" in result.output and "agent 1:" in result.output


def test_cake_identical_densities_exit_2(runner, tmp_path):
    spec = [
        [["0", "1"], ["1", "1"]],
        [["0", "1"], ["1", "1"]],
    ]
    path = write_json(tmp_path / "flat.json", spec)
    result = runner.invoke(main, ["cake", "--input", path])
    assert result.exit_code == 2
    assert "strongly envy-free: NO" in result.output
    assert "envy-free: yes" in result.output
    assert "note:" in result.output


# ---------------------------------------------------------------------------
# greedy


def test_greedy_human_output(runner, tmp_path):
    doc = {
        "kind": "goods",
        "groups": [{"size": 1}, {"size": 1}],
        "types": [
            {"copies": 1, "values": ["1", "0"]},
            {"copies": 1, "values": ["0", "1"]},
            {"copies": 1, "values": ["0", "1"]},
        ],
    }
    path = write_json(tmp_path / "inst.json", doc)
    result = runner.invoke(main, ["greedy", "--input", path])
    assert result.exit_code == 0
    assert "recipients [0, 1, 1]" in result.output
    assert "transfer-stable envy-free: yes" in result.output


# ---------------------------------------------------------------------------
# experiment


def experiment_args(fmt):
    return [
        "experiment",
        "--n", "2",
        "--m", "3",
        "--trials", "3",
        "--seed", "11",
        "--kind", "goods",
        "--target", "PROP_CONDITION",
        "--format", fmt,
    ]


def test_experiment_byte_identical_across_runs(runner):
    first = runner.invoke(main, experiment_args("csv"))
    second = runner.invoke(main, experiment_args("csv"))
    assert first.exit_code == 0 and second.exit_code == 0
    assert first.output == second.output
    lines = first.output.splitlines()
    assert lines[0] == "trial,success,quantity,threshold,exact_checked"
    assert len(lines) == 4


def test_experiment_json_parses(runner):
    result = runner.invoke(main, experiment_args("json"))
    assert result.exit_code == 0
    body = json.loads(result.output)
    assert body["config"]["trials"] == 3
    assert len(body["trials_detail"]) == 3


def test_experiment_human_summary(runner):
    result = runner.invoke(main, experiment_args("human"))
    assert result.exit_code == 0
    assert "target PROP_CONDITION" in result.output
    assert "successes" in result.output


def test_experiment_invalid_config_is_an_error(runner):
    args = experiment_args("human")
    args[args.index("--trials") + 1] = "0"
    result = runner.invoke(main, args)
    assert result.exit_code == 1
    assert "error:" in result.output
