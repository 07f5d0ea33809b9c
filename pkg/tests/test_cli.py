import json

import numpy as np
import pytest

from bergsim import cli
from bergsim.frames import dump_frame, identity_frame

from conftest import one_z


@pytest.fixture
def frames(tmp_path):
    paths = {}
    for name, F in {"identity": identity_frame(2, 2), "one_z": one_z()}.items():
        paths[name] = tmp_path / f"{name}.json"
        paths[name].write_text(dump_frame(F))
    return paths


def run(args, capsys=None):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr() if capsys else None
    return code, out


def test_verify_lemmas_passes(tmp_path, capsys):
    code, out = run(["verify-lemmas", "--out", tmp_path], capsys)
    assert code == 0
    report = json.loads((tmp_path / "lemmas.json").read_text())
    names = [c["name"] for c in report["checks"]]
    assert {"projection identities", "shift bundle curvature", "tensor split"} <= set(names)
    for c in report["checks"]:
        assert {"max_residual", "tolerance", "pass"} <= set(c)
        assert c["name"] in out.out


def test_verify_lemmas_catches_wrong_weight(capsys):
    cfg = cli.config_from_args(["verify-lemmas"])
    cfg.order_offset = 1
    assert cli.run(cfg) == cli.EXIT_FAIL
    assert "FAIL" in capsys.readouterr().out


@pytest.mark.parametrize(
    "args",
    [
        ["bogus"],
        ["green", "--grid", "12"],
        ["green", "--grid", "8x8@1.5"],
        ["carleson", "--levels", "5..2"],
        ["similarity"],
        ["green", "--density", "defect"],
        ["hypercontraction", "--operator", "model"],
        ["verify-lemmas", "--n", "0"],
        ["green", "--degree", "a,b"],
    ],
)
def test_usage_errors_exit_1(args, capsys):
    assert cli.main(args) == cli.EXIT_ERROR


def test_missing_frame_file_exit_1(tmp_path, capsys):
    assert cli.main(["similarity", "--frame", str(tmp_path / "nope.json")]) == cli.EXIT_ERROR


def test_bad_frame_file_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1, "m": 1, "e_dim": 1, "entries": [[{"type": "blaschke", "a": [1.5, 0]}]]}')
    assert cli.main(["curvature", "--frame", str(bad)]) == cli.EXIT_ERROR
    assert "$.entries[0][0].a" in capsys.readouterr().err


def test_curvature_csv(frames, tmp_path, capsys):
    code, _ = run(["curvature", "--frame", frames["identity"], "--grid", "8x16@0.9", "--out", tmp_path], capsys)
    assert code == 0
    lines = (tmp_path / "curvature.csv").read_text().splitlines()
    assert lines[0] == "re_z,im_z,value,rank_deficient"
    assert len(lines) - 1 == 8 * 16
    assert all(float(l.split(",")[2]) == 0 for l in lines[1:])
    run(["curvature", "--frame", frames["one_z"], "--grid", "8x16@0.9", "--out", tmp_path], capsys)
    rows = np.array([[float(x) for x in l.split(",")] for l in (tmp_path / "curvature.csv").read_text().splitlines()[1:]])
    z = rows[:, 0] + 1j * rows[:, 1]
    np.testing.assert_allclose(rows[:, 2], 1 / (1 + np.abs(z) ** 2) ** 2, rtol=1e-14)


def test_green_density_one(tmp_path, capsys):
    code, _ = run(["green", "--grid", "256x256", "--out", tmp_path], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "green.json").read_text())
    assert doc["center_value"] == pytest.approx(-1.0, abs=1e-3)
    first = (tmp_path / "green.csv").read_text().splitlines()[1].split(",")
    assert float(first[0]) == 0 and float(first[2]) == pytest.approx(-1.0, abs=1e-3)
    assert doc["verdict"] == "bounded-looking" and "note" in doc


def test_green_shift_density_fails(capsys):
    assert cli.main(["green", "--density", "shift", "--n", "2", "--grid", "128x128"]) == cli.EXIT_FAIL


def test_carleson_command(frames, tmp_path, capsys):
    code, _ = run(["carleson", "--frame", frames["one_z"], "--grid", "128x128", "--out", tmp_path], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "carleson.json").read_text())
    assert doc["stable"]["value"] and [r["level"] for r in doc["table"]] == list(range(9))


def test_similarity_identity(frames, tmp_path, capsys):
    code, _ = run(["similarity", "--frame", frames["identity"], "--degree", "20,40", "--grid", "64x64", "--out", tmp_path], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert {"frame_bounds", "defect", "carleson", "green", "intertwiner", "hypercontraction", "verdict"} <= set(doc)
    assert doc["verdict"]["overall"] == "pass"


def test_hypercontraction_hardy_level2(tmp_path, capsys):
    code, _ = run(["hypercontraction", "--n", "1", "--k", "2", "--out", tmp_path], capsys)
    assert code == cli.EXIT_FAIL
    doc = json.loads((tmp_path / "hypercontraction.json").read_text())
    assert doc["levels"][1]["min_eigenvalue"] == pytest.approx(-1.0, abs=1e-10)


def test_hypercontraction_model(frames, capsys):
    assert cli.main(["hypercontraction", "--operator", "model", "--frame", str(frames["one_z"]), "--degree", "40"]) == 0


def test_stdout_json_without_out(frames, capsys):
    code, out = run(["hypercontraction", "--n", "2"], capsys)
    assert code == 0
    assert json.loads(out.out)["passed"] is True


def test_determinism(frames, tmp_path, capsys):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        run(["similarity", "--frame", frames["one_z"], "--degree", "20,40", "--grid", "64x64", "--out", d], capsys)
        run(["verify-lemmas", "--seed", "3", "--out", d], capsys)
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]
