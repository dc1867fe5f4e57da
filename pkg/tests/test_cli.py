import csv
import io
import json
import random

import pytest

from odris.cli import main
from odris.linkrate import DEFAULT_NOISE, link_budgets
from odris.scene import design_example_fixture

FIXTURE_CODES = {"0100001000", "0100101000", "0110101000", "0110001000",
               "1001111000", "1001011000", "1011011000", "1011111000"}


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


@pytest.mark.parametrize("k,n", [(4, 16), (2, 4)])
def test_codebook_entries(tmp_path, capsys, k, n):
    path = tmp_path / "b.json"
    assert run(capsys, "codebook", "--k", str(k), "--out", str(path))[0] == 0
    rows = json.loads(path.read_text())
    assert len(rows) == n
    again = tmp_path / "c.json"
    run(capsys, "codebook", "--k", str(k), "--out", str(again))
    assert again.read_bytes() == path.read_bytes()


def test_codebook_bad_k(capsys):
    rc, out, err = run(capsys, "codebook", "--k", "1")
    assert rc == 1 and out == "" and "k" in err


@pytest.fixture()
def fixture_dir(tmp_path, capsys):
    out = tmp_path / "fx"
    assert run(capsys, "fixture", "--out", str(out))[0] == 0
    return out


def test_decode_with_fixture_codebook(capsys, fixture_dir):
    rc, out, _ = run(capsys, "decode", "0100001000", "--codebook", str(fixture_dir / "codebook.json"))
    assert rc == 0
    assert out.startswith("Reflect (31.22, -27.39)")


def test_decode_odd_length(capsys):
    rc, out, err = run(capsys, "decode", "000")
    assert rc != 0 and out == "" and "odd" in err


def test_encode_decode_roundtrip(capsys):
    rng = random.Random(0)
    for _ in range(50):
        k = rng.randint(1, 8)
        mode = rng.choice(["Reflect", "Refract", "Both"])
        p, c = rng.randrange(1 << k), rng.randrange(1 << k)
        rc, bits, _ = run(capsys, "encode", "--mode", mode, "--phase", str(p), "--coeff", str(c), "--k", str(k))
        assert rc == 0
        rc, out, _ = run(capsys, "decode", bits.strip())
        assert out.strip() == f"{mode} phase_ordinal={p} coeff_ordinal={c} k={k}"


def test_encode_out_of_range(capsys):
    rc, _, err = run(capsys, "encode", "--mode", "Reflect", "--phase", "16", "--k", "4")
    assert rc == 1 and "phase_ordinal" in err


def test_fixture_files(fixture_dir, tmp_path, capsys):
    rows = list(csv.DictReader(io.StringIO((fixture_dir / "codes.csv").read_text())))
    assert len(rows) == 16
    assert {r["code"] for r in rows if r["mode"] != "Off"} == FIXTURE_CODES
    assert sum(r["mode"] == "Off" and r["code"] == "0000000000" for r in rows) == 8
    other = tmp_path / "fx2"
    run(capsys, "fixture", "--out", str(other))
    for name in ("codes.csv", "scene.json", "codebook.json", "states.csv"):
        assert (other / name).read_bytes() == (fixture_dir / name).read_bytes()
    scene, book = design_example_fixture()
    assert [r["code"] for r in rows] == scene.element_codes(book.k)


def test_fixture_without_out(capsys):
    rc, out, _ = run(capsys, "fixture")
    codes = out.split()
    assert rc == 0 and len(codes) == 16 and set(codes) - {"0000000000"} == FIXTURE_CODES


def test_simulate_matches_library(fixture_dir, capsys):
    rc, out, _ = run(capsys, "simulate", "--scene", str(fixture_dir / "scene.json"),
                     "--noise", repr(DEFAULT_NOISE[0].power))
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    scene, book = design_example_fixture()
    expected = link_budgets(scene, book, DEFAULT_NOISE[0])
    assert [r["user_id"] for r in rows] == [b.user_id for b in expected]
    for r, b in zip(rows, expected):
        assert float(r["rate_bps_hz"]) == b.rate_bps_hz
        assert float(r["received_power_w"]) == b.received_power_w
    rc, again, _ = run(capsys, "simulate", "--scene", str(fixture_dir / "scene.json"),
                       "--noise", repr(DEFAULT_NOISE[0].power))
    assert again == out


def test_simulate_zero_power(fixture_dir, tmp_path, capsys):
    doc = json.loads((fixture_dir / "scene.json").read_text())
    doc["source"]["power_w"] = 0.0
    doc["codebook_ref"] = str(fixture_dir / "codebook.json")
    path = tmp_path / "dark.json"
    path.write_text(json.dumps(doc))
    rc, out, _ = run(capsys, "simulate", "--scene", str(path))
    assert rc == 0
    assert all(float(r["rate_bps_hz"]) == 0.0 for r in csv.DictReader(io.StringIO(out)))


def test_simulate_config_error_path(fixture_dir, tmp_path, capsys):
    doc = json.loads((fixture_dir / "scene.json").read_text())
    doc["users"][1]["position"] = "here"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    rc, out, err = run(capsys, "simulate", "--scene", str(path), "--codebook", str(fixture_dir / "codebook.json"))
    assert rc == 1 and out == "" and "users[1].position" in err


def test_sweep_n_prints_argmax(tmp_path, capsys):
    path = tmp_path / "n.csv"
    rc, out, _ = run(capsys, "sweep", "n", "--n-range", "1", "64", "--out", str(path))
    assert rc == 0
    assert out.count("argmax N=8") == 3
    assert path.read_text().startswith("axis_name,")


def test_sweep_single_point_and_empty(capsys):
    rc, out, _ = run(capsys, "sweep", "k", "--k-range", "3", "3")
    assert rc == 0 and len(out.splitlines()) == 1 + 3
    rc, out, err = run(capsys, "sweep", "k", "--k-range", "4", "3")
    assert rc == 1 and "empty" in err


def test_sweep_threads_identical(monkeypatch, capsys):
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("ODRIS_THREADS", threads)
        outs.append(run(capsys, "sweep", "k", "--k-range", "2", "6", "--coupled")[1])
    assert outs[0] == outs[1]


def test_sweep_with_scene(fixture_dir, capsys):
    rc, out, _ = run(capsys, "sweep", "k", "--scene", str(fixture_dir / "scene.json"), "--k-range", "2", "4")
    assert rc == 0 and len(out.splitlines()) == 1 + 3 * 3
