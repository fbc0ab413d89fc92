import json

import numpy as np
import pytest

from asw import cli, corpus


@pytest.fixture
def host_png(tmp_path, photos64):
    p = tmp_path / "host.png"
    corpus.save_rgb(p, photos64[0])
    return p


MSG = "101100111000101011110000110011001010"


def test_embed_extract_round_trip(tmp_path, host_png, capsys):
    out = tmp_path / "wm.png"
    rc = cli.main(["embed", "--in", str(host_png), "--out", str(out), "--message", MSG,
                   "--seed", "7", "--bits", "36", "--alpha", "0.75", "--iters", "25",
                   "--eta", "0.05", "--epsilon", "0.005", "--depth", "3", "--stride", "4"])
    info = json.loads(capsys.readouterr().out)
    assert rc == 0 and info["success"]
    assert len(info["weights_digest"]) == 64
    assert cli.main(["extract", "--in", str(out), "--seed", "7", "--bits", "36",
                     "--depth", "3", "--stride", "4"]) == 0
    assert capsys.readouterr().out.strip() == MSG


def test_hex_message(tmp_path, host_png, capsys):
    out = tmp_path / "wm.png"
    assert cli.main(["embed", "--in", str(host_png), "--out", str(out), "--message", "0xbeef",
                     "--seed", "3", "--bits", "16"]) == 0
    capsys.readouterr()
    cli.main(["extract", "--in", str(out), "--seed", "3", "--bits", "16"])
    assert capsys.readouterr().out.strip() == format(0xBEEF, "016b")


def test_distort_resize_passthrough(tmp_path, host_png):
    out = tmp_path / "d.png"
    assert cli.main(["distort", "--in", str(host_png), "--out", str(out),
                     "--kind", "resize", "--level", "1.0"]) == 0
    np.testing.assert_array_equal(corpus.load_rgb(out), corpus.load_rgb(host_png))
    assert cli.main(["distort", "--in", str(host_png), "--out", str(out),
                     "--kind", "gaussian-noise", "--level", "4/255", "--noise-seed", "2"]) == 0


def test_distort_cropout_host(tmp_path, host_png, capsys):
    out = tmp_path / "d.png"
    assert cli.main(["distort", "--in", str(host_png), "--out", str(out),
                     "--kind", "cropout", "--level", "0.5"]) == 2
    assert "host" in capsys.readouterr().err
    assert cli.main(["distort", "--in", str(host_png), "--out", str(out), "--kind", "cropout",
                     "--level", "0.5", "--host", str(host_png)]) == 0


def test_misuse(tmp_path, host_png, capsys):
    assert cli.main(["embed", "--in", str(host_png), "--out", str(tmp_path / "x.png"),
                     "--message", "01x", "--seed", "1"]) == 2
    assert "malformed" in capsys.readouterr().err
    assert cli.main(["extract", "--in", str(tmp_path / "missing.png"), "--seed", "1"]) == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["extract", "--in", str(host_png), "--seed", "1", "--bogus"])
    assert e.value.code != 0


def test_bench_and_probe(tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"n_images": 2, "image_size": 64,
                                "grid": [{"kind": "jpeg", "levels": [90]}],
                                "csv_path": "t.csv", "json_path": "a.json"}))
    assert cli.main(["bench", "--plan", str(plan)]) == 0
    assert json.loads(capsys.readouterr().out)["n_images"] == 2
    assert (tmp_path / "t.csv").exists() and (tmp_path / "a.json").exists()
    assert cli.main(["probe-depth", "--depths", "3,4", "--sigma", "0", "--n", "2",
                     "--size", "64"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("depth") and len(lines) == 3
