"""Command-line surface: subcommands, exit codes, diagnostics, artifacts."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from fleetsim.cli import main, parse_size, replay_final_cells

pytestmark = pytest.mark.sockets  # server tests bind real ports


def run_cli(*argv, timeout=60):
    return subprocess.run([sys.executable, "-m", "fleetsim.cli", *argv],
                          capture_output=True, text=True, timeout=timeout)


def test_parse_size():
    assert parse_size("1k") == 1024
    assert parse_size("10K") == 10240
    assert parse_size("1m") == 1024 * 1024
    assert parse_size("512") == 512


def test_sim_writes_log_and_metrics(tmp_path):
    code = main(["sim", "fig6", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "events.ndjson").exists()
    assert (tmp_path / "metrics.csv").exists()
    assert (tmp_path / "summary.json").exists()
    lines = (tmp_path / "events.ndjson").read_text().strip().split("\n")
    assert json.loads(lines[-1])["event"] == "summary"
    snap = json.loads((tmp_path / "map.json").read_text())
    assert snap == {"width": 8, "height": 8, "blocked": [26],
                    "version": snap["version"]}


def test_sim_determinism_byte_identical(tmp_path):
    main(["sim", "fig6", "--out", str(tmp_path / "a")])
    main(["sim", "fig6", "--out", str(tmp_path / "b")])
    for name in ("events.ndjson", "metrics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_sim_rejects_invalid_scenario(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x", "seed": 1, "topology": "single",
                               "grid": {"width": 8, "height": 8},
                               "durationS": 1.0,
                               "robots": [{"name": "R", "start": 999}]}))
    code = main(["sim", str(bad), "--out", str(tmp_path / "out")])
    assert code == 2


def test_sim_unreachable_goal_still_exits_zero(tmp_path):
    # unreachable is a *resolved* outcome, not a failure
    scenario = tmp_path / "noway.json"
    scenario.write_text(json.dumps({
        "name": "noway", "seed": 7, "topology": "single",
        "grid": {"width": 8, "height": 8, "blocked": [6, 15]},
        "durationS": 5.0,
        "robots": [{"name": "R", "start": 56}],
        "goals": [{"t": 0.5, "robot": "R", "cell": 7}],
    }))
    code = main(["sim", str(scenario), "--out", str(tmp_path / "out")])
    assert code == 0
    log = (tmp_path / "out" / "events.ndjson").read_text()
    assert '"status": "unreachable"' in log


def test_replay_matches_live_run(tmp_path, capsys):
    main(["sim", "fig6", "--out", str(tmp_path)])
    log = tmp_path / "events.ndjson"
    cells = replay_final_cells(log)
    assert cells == {"Robot1": 2, "Robot2": 0, "Robot3": 7}
    code = main(["replay", str(log)])
    assert code == 0
    assert "matches" in capsys.readouterr().out


def test_bench_exp1_all_topologies(tmp_path, capsys):
    code = main(["bench", "exp1", "--topology", "all",
                 "--duration", "10", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "ordering: SMS=" in out
    assert (tmp_path / "metrics.csv").exists()
    assert (tmp_path / "plot.json").exists()


def test_bench_rtt_writes_csv(tmp_path):
    code = main(["bench", "rtt", "--topology", "sms", "--sizes", "1k,4k",
                 "--trials", "3", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "rtt.csv").read_text().strip().split("\n")
    assert lines[0] == "topology,size_bytes,trial,rtt_s"
    assert len(lines) == 1 + 2 * 3


def test_bench_unknown_topology_is_usage_error(tmp_path):
    code = main(["bench", "exp1", "--topology", "mesh",
                 "--out", str(tmp_path)])
    assert code == 2


def test_server_single_readiness_and_clean_exit():
    result = run_cli("server", "--mode", "single", "--port", "0",
                     "--duration", "0.5")
    assert result.returncode == 0
    assert "single-master ready on http://" in result.stdout
    assert "master stopped" in result.stdout


def test_server_single_port_conflict():
    import socket

    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    port = blocker.getsockname()[1]
    try:
        result = run_cli("server", "--mode", "single", "--port", str(port),
                         "--duration", "0.5")
        assert result.returncode == 3
        assert str(port) in result.stderr
    finally:
        blocker.close()


def test_server_multi_domains_discover():
    result = run_cli("server", "--mode", "multi", "--duration", "2")
    assert result.returncode == 0
    assert "domain machine1 ready on udp://" in result.stdout
    assert "domain machine1 discovered machine2" in result.stdout
    assert "domain machine2 discovered machine1" in result.stdout


def test_server_cloud_task_sets_report_ready():
    result = run_cli("server", "--mode", "cloud", "--port", "0",
                     "--ws-port", "0", "--duration", "0.5")
    assert result.returncode == 0
    assert "master task set ready" in result.stdout
    assert "robot task set ready" in result.stdout
    assert "container task set ready" in result.stdout


def test_robot_against_live_cloud_server(tmp_path):
    import re
    import time

    server = subprocess.Popen(
        [sys.executable, "-m", "fleetsim.cli", "server", "--mode", "cloud",
         "--port", "0", "--ws-port", "0", "--duration", "20"],
        stdout=subprocess.PIPE, text=True)
    try:
        ready = {}
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline and "http" not in ready:
            line = server.stdout.readline()
            m = re.search(r"ready on (http://\S+)", line)
            if m:
                ready["http"] = m.group(1)
        assert "http" in ready, "server did not report readiness"
        config = Path(__file__).resolve().parents[1] / "src" / "fleetsim" \
            / "configs" / "robot1.config"
        result = run_cli("robot", "--config", str(config),
                         "--server", ready["http"], "--duration", "1")
        assert result.returncode == 0, result.stderr
        assert "container cTag_01: created" in result.stdout
        assert "pose flowing" in result.stdout
    finally:
        server.terminate()
        server.wait(timeout=10)


def test_robot_unreachable_server_fails_with_connectfailed():
    config = Path(__file__).resolve().parents[1] / "src" / "fleetsim" \
        / "configs" / "robot1.config"
    result = run_cli("robot", "--config", str(config),
                     "--server", "http://127.0.0.1:9/", "--retries", "2")
    assert result.returncode == 3
    assert "handshake" in result.stderr


def test_robot_malformed_config_exit_2(tmp_path):
    bad = tmp_path / "bad.config"
    bad.write_text('{"url": "http://x:9000/", "userID": "u"}')
    result = run_cli("robot", "--config", str(bad))
    assert result.returncode == 2
    assert "password" in result.stderr
