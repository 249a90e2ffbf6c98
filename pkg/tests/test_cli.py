import json
from pathlib import Path

import pytest

from sgxchain.cli import EXIT_ACCEPT, EXIT_ERROR, EXIT_REJECT, main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
FIG9 = str(SCENARIOS / "fig9.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_honest_run_accepts(capsys):
    code, out, _ = run(capsys, "run", FIG9)
    assert code == EXIT_ACCEPT
    assert out.startswith("verdict: Accept")


def test_scenario_flag_equivalent(capsys):
    assert run(capsys, "run", "--scenario", FIG9)[1] == run(capsys, "run", FIG9)[1]


def test_attack_rejects(capsys):
    code, out, _ = run(capsys, "run", str(SCENARIOS / "fig9_otm.json"), "--attack", "0")
    assert code == EXIT_REJECT
    assert "Reject (HashMismatch)" in out


def test_several_attacks_need_selection(capsys):
    code, _, err = run(capsys, "run", str(SCENARIOS / "fig9_otm.json"))
    assert code == EXIT_ERROR and "UsageError" in err


def test_replay_demo_rejects(capsys):
    code, out, _ = run(capsys, "run", FIG9, "--replay-demo")
    assert code == EXIT_REJECT and "HashMismatch" in out


def test_save_envelopes(capsys, tmp_path):
    dest = tmp_path / "env.json"
    run(capsys, "run", FIG9, "--save-envelopes", str(dest))
    saved = json.loads(dest.read_text())
    assert set(saved) == {"request_hex", "response_hex", "nonce_hex"}
    assert len(bytes.fromhex(saved["nonce_hex"])) == 16


def test_malformed_json_reports_line(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "enclaves": [1],\n  "nodes": [,]\n}\n')
    code, out, err = run(capsys, "run", str(bad))
    assert code == EXIT_ERROR
    assert "ScenarioParseError" in err and "line 3" in err
    assert out == ""


def test_missing_field_reports_location(capsys, tmp_path):
    obj = json.loads(Path(FIG9).read_text())
    del obj["nodes"][2]["tag_hex"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    code, _, err = run(capsys, "run", str(bad))
    assert code == EXIT_ERROR and "nodes[2]" in err


def test_missing_scenario_is_usage_error(capsys):
    code, _, err = run(capsys, "trace")
    assert code == EXIT_ERROR and "UsageError" in err


def test_trace_lines(capsys):
    code, out, _ = run(capsys, "trace", FIG9, "--side", "user")
    assert code == EXIT_ACCEPT
    lines = out.splitlines()
    assert lines[0] == "[user]"
    assert "H_f1 = r||tag_f1" in lines
    assert lines[-1].startswith("hash_user = hash(")


def test_trace_json(capsys):
    code, out, _ = run(capsys, "trace", FIG9, "--format", "json")
    payload = json.loads(out)
    assert set(payload) == {"nonce_hex", "user", "cloud"}
    assert set(payload["cloud"]["per_node"]) == {f"f{i}" for i in range(1, 8)}
    assert "⊕" in payload["cloud"]["overall"] and "⊕" not in payload["user"]["overall"]


def test_same_seed_same_bytes(capsys):
    first = run(capsys, "campaign", "--random-plans", "--random-ddrc", "5", "--random-otm", "5", "--seed", "3")
    second = run(capsys, "campaign", "--random-plans", "--random-ddrc", "5", "--random-otm", "5", "--seed", "3")
    assert first == second
    assert first[0] == EXIT_ACCEPT
    assert run(capsys, "run", FIG9, "--seed", "8", "--format", "json") == run(
        capsys, "run", FIG9, "--seed", "8", "--format", "json"
    )


def test_campaign_json(capsys):
    code, out, _ = run(capsys, "campaign", str(SCENARIOS / "fig9_ddrc.json"), "--format", "json")
    payload = json.loads(out)
    assert code == EXIT_ACCEPT
    assert payload["baseline"] == "Accept"
    assert payload["attacks"] == payload["detected"] == 4
    assert [r["label"] for r in payload["rows"]] == ["swap", "rewire", "drop", "duplicate"]


def test_scenario_random_campaign(capsys):
    code, out, _ = run(capsys, "campaign", FIG9, "--random-otm", "20", "--random-misroute", "5")
    assert code == EXIT_ACCEPT and out.rstrip().endswith("detected 25/25 (100.0%)")


@pytest.mark.parametrize("reps", ["0", "-3"])
def test_bench_rejects_bad_reps(capsys, reps):
    code, _, err = run(capsys, "bench", "--reps", reps)
    assert code == EXIT_ERROR and "--reps" in err


def test_bench_too_small(capsys):
    code, _, err = run(capsys, "bench", FIG9, "--reps", "1")
    assert code == EXIT_ERROR and "WorkloadTooSmall" in err
