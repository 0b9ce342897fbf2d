import json
import subprocess
import sys

import pytest

from msolearn import cli, typeengine

from conftest import EX11_PHI, data_path

FIG1 = data_path("fig1.cwx")
EX11 = data_path("ex11.txt")


@pytest.fixture(autouse=True)
def _restore_type_cap(tmp_path, monkeypatch):
    # default output files land in a scratch directory
    monkeypatch.chdir(tmp_path)
    old = typeengine.STORE.limit
    yield
    typeengine.STORE.limit = old


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def stable(report):
    return report.split("# timings")[0]


def test_learn1d_example(tmp_path, capsys):
    out = tmp_path / "h.json"
    code, text, _ = run(["learn1d", "--expr", FIG1, "--train", EX11, "--q", "3", "--ell", "1",
                         "--set-budget", "1", "--out", str(out)], capsys)
    assert code == 0
    assert "verdict: Hypothesis" in text
    assert "classifications: v1:+ v3:+ v4:- v5:-" in text
    obj = json.loads(out.read_text())
    assert obj["q"] == 3 and obj["ell"] == 1 and obj["setBudget"] == 1


def test_learnhd_contradiction(tmp_path, capsys):
    train = tmp_path / "bad.txt"
    train.write_text("v1 +\nv1 -\n")
    code, text, _ = run(["learnhd", "--expr", FIG1, "--train", str(train), "--q", "1", "--ell", "1"], capsys)
    assert code == 1
    assert "NoConsistent" in text


def test_learnhd_witness_and_nowitness(tmp_path, capsys):
    code, text, _ = run(["learnhd", "--expr", FIG1, "--train", EX11, "--q", "3", "--ell", "1",
                         "--set-budget", "1", "--formula", EX11_PHI], capsys)
    assert code == 0 and "witness: v1" in text
    code, text, _ = run(["learnhd", "--expr", FIG1, "--train", EX11, "--q", "1", "--ell", "1",
                         "--formula", "x1 = y1", "--verify"], capsys)
    assert code == 1
    assert "NoWitness" in text and "verify_bruteforce: none" in text


def test_synth_and_export(tmp_path, capsys):
    code, text, _ = run(["synth", "--expr", FIG1, "--train", EX11, "--q", "1", "--ell", "1",
                         "--set-budget", "0", "--export-formula", "--out", str(tmp_path / "h.json")], capsys)
    assert code == 0
    assert "formula: " in text


def test_mc_both_methods(capsys):
    for method in ("learning", "eval"):
        code, text, _ = run(["mc", "--graph", data_path("fig1.json"), "--method", method,
                             "--formula", "ex x. ex y. E(x,y)"], capsys)
        assert code == 0 and "verdict: true" in text
    code, text, _ = run(["mc", "--expr", FIG1, "--formula", "ex x. all y. E(x,y)", "--verify"], capsys)
    assert code == 1 and "verify_bruteforce: false" in text


def test_graph_input_flag_line(capsys):
    code, text, _ = run(["types", "--graph", data_path("fig1.json"), "--tuple", "v1", "--q", "1"], capsys)
    assert code == 0
    assert "flag: no expression given" in text


def test_types_dp_equals_direct(capsys):
    digests = []
    for via in ("dp", "direct"):
        code, text, _ = run(["types", "--expr", FIG1, "--tuple", "v2", "--q", "2", "--via", via], capsys)
        assert code == 0
        digests.append([l for l in text.splitlines() if l.startswith("digest:")])
    assert digests[0] == digests[1]


def test_pac_requires_seed_and_is_deterministic(tmp_path, capsys):
    dist = tmp_path / "d.json"
    dist.write_text(json.dumps({"support": [
        {"tuple": ["v1"], "label": "+", "weight": "1/4"}, {"tuple": ["v3"], "label": "+", "weight": "1/4"},
        {"tuple": ["v4"], "label": "-", "weight": "1/4"}, {"tuple": ["v5"], "label": "-", "weight": "1/4"}]}))
    base = ["pac", "--expr", FIG1, "--dist", str(dist), "--q", "1", "--ell", "1", "--set-budget", "0",
            "--m-override", "20"]
    code, _, err = run(base, capsys)
    assert code == 2 and "seed" in err
    _, a, _ = run(base + ["--seed", "5"], capsys)
    _, b, _ = run(base + ["--seed", "5"], capsys)
    assert stable(a) == stable(b)
    assert "sample_size: 20" in a


def test_gen_commands(tmp_path, capsys):
    code, text, _ = run(["gen", "--family", "cograph", "--n", "6", "--seed", "1"], capsys)
    assert code == 0 and "(v v" in text
    cnf = tmp_path / "f.cnf"
    cnf.write_text("p cnf 2 2\n1 2 0\n-1 -2 0\n")
    prefix = str(tmp_path / "inst")
    code, text, _ = run(["gen", "--family", "wsat", "--cnf", str(cnf), "--ell", "1", "--out", prefix,
                         "--verify"], capsys)
    assert code == 0 and "wsat_brute: true" in text and "qr: 4" in text
    assert (tmp_path / "inst.train").read_text() == "X1 X2 +\nnX1 nX2 +\n"
    code, _, _ = run(["gen", "--family", "wsat", "--cnf", str(cnf), "--ell", "3"], capsys)
    assert code == 2


def test_vc_and_bench(capsys):
    code, text, _ = run(["vc", "--expr", FIG1, "--formula", "E(x1,y1)"], capsys)
    assert code == 0 and "vc_dimension: " in text
    code, text, _ = run(["bench", "--sizes", "8,16"], capsys)
    assert code == 0
    rows = [l for l in text.splitlines() if l.startswith("row:")]
    assert len(rows) == 2
    for r in rows:
        _, n, size, visits = r.split()[:4]
        assert size == visits


def test_usage_errors(tmp_path, capsys):
    assert run(["types", "--expr", str(tmp_path / "missing.cwx"), "--q", "1"], capsys)[0] == 2
    bad = tmp_path / "bad.cwx"
    bad.write_text("(eta A B (v a A))")
    assert run(["types", "--expr", str(bad), "--q", "1"], capsys)[0] == 2
    assert run(["mc", "--expr", FIG1, "--formula", "ex x. Q(x)"], capsys)[0] == 2
    assert run(["mc", "--expr", FIG1, "--graph", data_path("fig1.json"), "--formula", "true"], capsys)[0] == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["learn1d", "--expr", FIG1])
    assert e.value.code == 2


def test_resource_cap_exit(capsys):
    code, text, _ = run(["learnhd", "--expr", FIG1, "--train", EX11, "--q", "2", "--ell", "2", "--cap", "1"], capsys)
    assert code == 3
    assert "ResourceCapExceeded" in text


def test_env_cap(monkeypatch, capsys):
    monkeypatch.setenv("MSOLEARN_CAP_NODES", "1")
    code, _, _ = run(["learnhd", "--expr", FIG1, "--train", EX11, "--q", "2", "--ell", "2"], capsys)
    assert code == 3
    monkeypatch.setenv("MSOLEARN_CAP_NODES", "lots")
    assert run(["types", "--expr", FIG1, "--q", "1"], capsys)[0] == 2


def test_console_script_subprocess():
    r = subprocess.run([sys.executable, "-m", "msolearn.cli", "learnhd", "--expr", FIG1, "--train", EX11,
                        "--q", "1", "--ell", "1", "--set-budget", "0"],
                       capture_output=True, text=True, timeout=120)
    assert r.returncode == 0
    assert r.stdout.startswith("command: learnhd")
