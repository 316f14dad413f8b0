import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from primeid import cli
from primeid.numtheory import is_prime_det

HAMMING = str(Path(__file__).parent / "data" / "hamming_7_4.txt")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def test_prime_det_trivial(capsys):
    code, out = run_json(capsys, "prime", "--max", "2", "--mode", "det")
    assert code == 0 and out["prime"] == 2
    assert isinstance(out["seed"], int)


def test_prime_mr_seeded(capsys):
    args = ("prime", "--max", "100", "--mode", "mr", "--rounds", "10", "--seed", "1")
    _, a = run_json(capsys, *args)
    _, b = run_json(capsys, *args)
    assert a == b and is_prime_det(a["prime"])


def test_prime_outputs_are_prime(capsys):
    for seed in range(30):
        for mode in ("det", "mr"):
            _, out = run_json(capsys, "prime", "--max", "1000000", "--mode", mode, "--seed", str(seed))
            assert is_prime_det(out["prime"])


def test_prime_budget_error(capsys):
    code, _, err = run(capsys, "prime", "--max", str(10**13), "--mode", "det")
    assert code == 2 and "budget" in err


def test_gmr_metadata(capsys):
    code, out = run_json(capsys, "gmr", "--max", "2048", "--l", "10", "--q", "10", "--seed", "4")
    assert code == 0
    assert (out["s"], out["k"]) == (330, 10)
    assert is_prime_det(out["outcome"])
    assert out["failure_bound"] == pytest.approx(6.8e-4, rel=0.01)
    _, again = run_json(capsys, "gmr", "--max", "2048", "--seed", "4")
    assert again == out


def test_gmr_bottom_exit_status(capsys):
    # one draw from {1..10**30}: a probable prime turns up about once in 70 seeds
    codes = []
    for seed in range(5):
        code, out = run_json(capsys, "gmr", "--max", str(10**30), "--s", "1", "--seed", str(seed))
        codes.append(code)
        assert (code == 1) == (out["outcome"] == "bottom")
    assert 1 in codes


def test_gmr_invalid(capsys):
    code, _, _ = run(capsys, "gmr", "--max", "2")
    assert code == 2


def encode(capsys, m, seed=3, logm=64, alpha="1.5"):
    code, out = run_json(capsys, "encode", "--logm", str(logm), "--alpha", alpha, "--message", format(m, "x"), "--seed", str(seed))
    assert code == 0
    return out


def verify(capsys, word, m, logm=64, alpha="1.5"):
    return run(capsys, "verify", "--logm", str(logm), "--alpha", alpha, "--message", format(m, "x"), "--codeword", word)[0]


def test_encode_verify_round_trip(capsys):
    for seed, m in enumerate([1, 71, 2**63, 2**64, 123456789]):
        out = encode(capsys, m, seed)
        assert len(out["codeword"]) == -(-out["bits"] // 4)
        assert verify(capsys, out["codeword"], m) == 0


def test_encode_verify_false_candidate(capsys):
    out = encode(capsys, 71)
    k, l = out["k"], out["l"]
    tag = lambda m: (m % k + 1) % l + 1
    assert verify(capsys, out["codeword"], 71 + k * l) == 0
    other = next(m for m in range(72, 200) if tag(m) != tag(71))
    assert verify(capsys, out["codeword"], other) == 1


def test_tampered_tag_bit(capsys):
    out = encode(capsys, 71, seed=11)
    value = int(out["codeword"], 16)
    for bit in range(out["layout"]["tag_bits"]):
        tampered = value ^ (1 << bit)
        tag0 = tampered & ((1 << out["layout"]["tag_bits"]) - 1)
        if tag0 < out["l"]:
            word = format(tampered, f"0{len(out['codeword'])}x")
            assert verify(capsys, word, 71) == 1
            return
    pytest.fail("no in-range single-bit tag flip found")


def test_wrong_width_codeword(capsys):
    out = encode(capsys, 71)
    assert verify(capsys, out["codeword"] + "0", 71) == 2
    assert verify(capsys, "zz" + out["codeword"][2:], 71) == 2


def test_message_out_of_range(capsys):
    code, _, _ = run(capsys, "encode", "--logm", "64", "--alpha", "1.5", "--message", format(2**64 + 1, "x"))
    assert code == 2


def test_bound(capsys):
    code, out = run_json(capsys, "bound", "--logm", "1048576", "--alpha", "1.5")
    assert code == 0
    assert out["term_M"] == pytest.approx(0.0088, abs=1e-4)
    code, out = run_json(capsys, "bound", "--logm", "1024", "--alpha", "1.1")
    assert out["block_length"] == 19 and out["K"] == 2048 and out["K_prime"] == 14


def test_bound_original(capsys):
    code, out = run_json(capsys, "bound", "--logm", "12", "--alpha", "1.5", "--original")
    assert code == 0 and out["original_K"] == 42


def test_bound_csv(capsys):
    code, text, _ = run(capsys, "bound", "--logm", "1024", "--alpha", "1.1", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == 0 and rows[0]["block_length"] == "19"


def test_sweep_reproducible(capsys, tmp_path):
    args = ("sweep", "--alpha", "1.5", "--rounds", "5", "--logm", "1024,2048", "--seed", "9", "--format", "csv")
    code, a, _ = run(capsys, *args)
    assert code == 0
    _, b, _ = run(capsys, *args)
    strip = lambda t: [{k: v for k, v in r.items() if k != "time_ms"} for r in csv.DictReader(io.StringIO(t))]
    assert strip(a) == strip(b)
    assert [r["seed"] for r in strip(a)] == ["9", "9"]
    meta = tmp_path / "meta.json"
    out = tmp_path / "sweep.json"
    code, _, _ = run(capsys, "sweep", "--alpha", "1.5", "--rounds", "2", "--logm-exp", "10:10", "--out", str(out), "--metadata", str(meta))
    assert code == 0
    assert json.loads(out.read_text())[0]["logM"] == 1024
    assert json.loads(meta.read_text())["config"]["rounds"] == 2


def test_sweep_unwritable(capsys, tmp_path):
    code, _, _ = run(capsys, "sweep", "--alpha", "1.5", "--rounds", "1", "--logm", "1024", "--out", str(tmp_path / "no" / "x.csv"))
    assert code == 2


def test_hash_code(capsys):
    code, out = run_json(capsys, "hash", "--code", HAMMING)
    assert code == 0
    assert out["epsilon"] == "4/7"
    assert out["certificate"]["ratio"] == "4/7" and out["certificate"]["holds"]
    assert out["round_trip_distance"] == 3


def test_hash_mod_and_double(capsys):
    code, out = run_json(capsys, "hash", "--mod", "10", "--alpha", "2")
    assert code == 0 and out["certificate"]["ratio"] == "4/25"
    code, out = run_json(capsys, "hash", "--double", "4", "--alpha", "2", "--samples", "100000", "--seed", "1")
    assert code == 0 and out["certificate"]["kind"] == "sampled"
    assert out["certificate"]["collision_rate"] <= 0.375


def test_collision(capsys):
    code, out = run_json(capsys, "collision", "--k", "3", "--l", "2", "--logm", "2", "--mode", "exact")
    assert code == 0 and out["p_coll"] == 0.125


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["prime", "--max", "10", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2
    capsys.readouterr()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "primeid.cli", "prime", "--max", "2", "--seed", "0"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["prime"] == 2
