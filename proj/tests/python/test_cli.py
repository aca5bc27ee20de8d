import json
import socket
import subprocess
import time
import urllib.error
import urllib.request

import pytest


def test_plan_lattice(cli):
    plan = json.loads(cli("plan", "--p", "40:190:6", "--h", "2:9:8").stdout)
    assert 0 < len(plan["points"]) <= 48
    assert len(plan["points"]) + len(plan["excluded"]) == 48
    lo, hi = plan["v_bounds"]
    assert all(lo <= p["v_scan_m_s"] <= hi for p in plan["points"])
    assert {p["split"] for p in plan["points"]} == {"train", "validation", "test"}


def test_unknown_subcommand_and_bad_range_fail(cli):
    assert cli("nosuch", check=False).returncode != 0
    bad = cli("plan", "--p", "oops", check=False)
    assert bad.returncode != 0
    assert "range" in bad.stderr


def test_gen_never_leaves_partial_output(cli, tmp_path):
    missing = cli("gen", "--plan", tmp_path / "absent.json", "-o", tmp_path / "data", check=False)
    assert missing.returncode != 0
    assert not (tmp_path / "data").exists()


def test_eval_writes_process_map(cli, tiny_model):
    csv = tiny_model / "map.csv"
    out = json.loads(cli("--json", "eval", "--model", tiny_model / "model", "--data", tiny_model / "data",
                         "--split", "all", "--csv", csv).stdout)
    assert out["samples"] == 9
    lines = csv.read_text().splitlines()
    assert lines[0].startswith("id,power_w,v_scan_m_s,h_star,")
    assert len(lines) == 10


def test_infer_and_bench_json(cli, tiny_model, tmp_path):
    out = json.loads(cli("--json", "infer", "--model", tiny_model / "model", "--p", 100, "--v", 0.5,
                         "-o", tmp_path / "fields").stdout)
    assert out["grid"]["nx"] == 24
    assert (tmp_path / "fields" / "T.f32").stat().st_size == 4 * 24 * 12 * 9
    bench = json.loads(cli("--json", "bench", "--model", tiny_model / "model", "--reps", 1).stdout)
    assert bench["fine"]["grid"]["nx"] == 48
    assert bench["fine_over_coarse"] > 0


def test_kfold_reports_every_fold(cli, tiny_model):
    rep = json.loads(cli("--json", "kfold", "--data", tiny_model / "data", "--k", 3, "--steps", 1,
                         "--modes", 4, 4, 3, "--width", 6, "--padding", 3).stdout)
    assert rep["k"] == 3
    assert len(rep["folds"]) == 3


def test_prep_reduces_sequences(cli, tiny_model, tmp_path):
    cli("gen", "--plan", tiny_model / "plan.json", "--sequences", "-o", tmp_path / "seqs",
        "--grid", 24, 12, 9, "--dx", "3.75e-5")
    out = json.loads(cli("--json", "prep", tmp_path / "seqs" / "h01_p01", tmp_path / "seqs" / "h02_p02",
                         "-o", tmp_path / "prepped", "--window", 5, "--test", "h01_p01").stdout)
    assert [s["split"] for s in out["samples"]] == ["test", "train"]
    manifest = json.loads((tmp_path / "prepped" / "manifest.json").read_text())
    assert len(manifest["samples"]) == 2


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _request(url, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, method="POST" if data else "GET")
    try:
        with urllib.request.urlopen(req, timeout=30) as r:
            return r.status, r.read()
    except urllib.error.HTTPError as e:
        return e.code, e.read()


@pytest.fixture()
def server(cli, tiny_model):
    port = _free_port()
    proc = subprocess.Popen([cli.path, "serve", "--model", tiny_model / "model", "--bind", f"127.0.0.1:{port}"],
                            stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
    base = f"http://127.0.0.1:{port}/v1"
    for _ in range(100):
        try:
            if _request(base + "/healthz")[0] == 200:
                break
        except OSError:
            time.sleep(0.1)
    else:
        proc.kill()
        pytest.fail("server did not start")
    yield base
    proc.terminate()
    proc.wait(timeout=10)


def test_http_v1_contract(server):
    status, body = _request(server + "/model/info")
    assert status == 200
    assert json.loads(body)["parameter_count"] > 0

    req = {"power_w": 100, "v_scan_m_s": 0.5, "fields": ["T", "fl"], "encoding": "base64-f32"}
    s1, b1 = _request(server + "/infer", req)
    s2, b2 = _request(server + "/infer", req)
    assert s1 == s2 == 200
    assert b1 == b2
    reply = json.loads(b1)
    assert reply["fields"]["T"]["length"] == 24 * 12 * 9
    assert "meltpool" in reply and "extrapolation" in reply

    low = json.loads(_request(server + "/infer", {**req, "power_w": 5})[1])
    assert low["extrapolation"] is True

    assert _request(server + "/infer", {"power_w": 100})[0] == 400
    assert _request(server + "/infer", {**req, "grid": {"nx": 0, "ny": 4, "nz": 4, "dx_m": 1e-5}})[0] == 422
    assert _request(server + "/nope")[0] == 404
