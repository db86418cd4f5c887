import json


from consrep.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_explore_single_agent(capsys):
    code, out, _ = run(capsys, "explore", "--n", "1", "--values", "4")
    assert code == 0
    assert "states: 3" in out
    assert "decided_values: {'4': 1}" in out


def test_explore_json_output(capsys, tmp_path):
    target = tmp_path / "graph.json"
    code, _, _ = run(capsys, "explore", "--n", "1", "--values", "4",
                     "--format", "json", "--output", str(target))
    assert code == 0
    payload = json.loads(target.read_text())
    assert payload["stats"][0]["states"] == 3
    assert len(payload["graph"]["nodes"]) == 3


def test_explore_output_is_byte_stable(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "explore", "--n", "2", "--values", "5,7", "--format", "json",
        "--output", str(a))
    run(capsys, "explore", "--n", "2", "--values", "5,7", "--format", "json",
        "--output", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_explore_dot_output(capsys):
    code, out, _ = run(capsys, "explore", "--n", "1", "--values", "4",
                       "--format", "dot")
    assert code == 0
    assert out.startswith("digraph")
    assert out.rstrip().endswith("}")
    assert out.count("->") == 3


def test_explore_both_modes_agree(capsys):
    code, out, _ = run(capsys, "explore", "--n", "2", "--values", "5,7",
                       "--mode", "both")
    assert code == 0
    assert "modes_agree: True" in out


def test_budget_above_limit_is_a_config_error(capsys):
    code, _, err = run(capsys, "explore", "--n", "2", "--values", "5,7",
                       "--budget", "2")
    assert code == 1
    assert "crash budget" in err


def test_missing_instance_is_a_usage_error(capsys):
    code, _, err = run(capsys, "explore")
    assert code == 1
    assert "--n" in err


def test_bound_exceeded_exit_code(capsys):
    code, _, _ = run(capsys, "explore", "--n", "2", "--values", "5,7",
                     "--max-states", "10")
    assert code == 2


def test_verify_single_agent(capsys):
    code, out, _ = run(capsys, "verify", "--n", "1", "--values", "4")
    assert code == 0
    payload = json.loads(out)
    statuses = {r["check"]: r["status"] for r in payload["reports"]}
    assert statuses == {
        "correspondence": "pass",
        "confluence": "pass",
        "normal-forms": "pass",
        "properties": "pass",
        "bisimulation": "pass",
    }


def test_verify_mutated_system_fails(capsys):
    code, out, _ = run(capsys, "verify", "--n", "2", "--values", "5,7",
                       "--mutate", "no-ti-protection")
    assert code == 3
    payload = json.loads(out)
    statuses = {r["check"]: r["status"] for r in payload["reports"]}
    assert statuses["properties"] == "fail"
    assert statuses["bisimulation"] == "fail"
    assert statuses["correspondence"] == "pass"


def test_trace_empty_schedule_lists_initials(capsys):
    code, out, _ = run(capsys, "trace", "--n", "2", "--values", "5,7")
    assert code == 0
    assert "-- initial after ti=1" in out
    assert "-- initial after ti=2" in out


def test_trace_full_run_to_ok(capsys):
    code, out, _ = run(capsys, "trace", "--n", "1", "--values", "4",
                       "ti=1", "SR2' q=1 p=1", "SRW1 j=1 v=4")
    assert code == 0
    assert "observer ok!" in out
    assert "enabled: Snd ok" in out


def test_trace_rejects_disabled_step(capsys):
    code, _, err = run(capsys, "trace", "--n", "1", "--values", "4",
                       "ti=1", "SR7 p=1")
    assert code == 1
    assert "not enabled" in err
    assert "SR2' q=1 p=1" in err


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"n": 1, "values": [4], "format": "text"}))
    code, out, _ = run(capsys, "explore", "--config", str(cfg))
    assert code == 0
    assert "states: 3" in out
    code, out, _ = run(capsys, "explore", "--config", str(cfg),
                       "--values", "9")
    assert code == 0
    assert "decided_values: {'9': 1}" in out


def test_config_file_rejects_unknown_keys(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"n": 1, "values": [4], "wat": 1}))
    code, _, err = run(capsys, "explore", "--config", str(cfg))
    assert code == 1
    assert "unknown config keys" in err
