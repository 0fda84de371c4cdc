import numpy as np
import pytest
from PIL import Image

from polydither.cli import main
from polydither.halftone import build_threshold_view, dither
from polydither.imageio import read_pbm, write_pgm
from polydither.ranktable import save_table


@pytest.fixture(scope="module")
def table_file(tmp_path_factory, random_table, rule):
    path = tmp_path_factory.mktemp("tab") / "random.txt"
    save_table(random_table, path, rule)
    return path


def _gray(tmp_path, value, w=64, h=48, name="in.pgm"):
    p = tmp_path / name
    write_pgm(p, np.full((h, w), value))
    return p


def test_dither_is_deterministic(tmp_path, table_file):
    rng = np.random.default_rng(0)
    src = tmp_path / "noise.pgm"
    write_pgm(src, rng.random((50, 70)))
    for name in ("a.pbm", "b.pbm"):
        assert main(["dither", str(src), "--table", str(table_file), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.pbm").read_bytes() == (tmp_path / "b.pbm").read_bytes()


def test_dither_matches_library(tmp_path, table_file, random_table, rule, capsys):
    src = _gray(tmp_path, 6 / 255)
    out = tmp_path / "o.pbm"
    assert main(["dither", str(src), "--table", str(table_file), "--offset", "5,3", "--out", str(out)]) == 0
    view = build_threshold_view(64, 48, random_table, rule, (5, 3))
    assert np.array_equal(read_pbm(out), dither(np.full((48, 64), 6 / 255), view))
    assert "size\t64x48" in capsys.readouterr().out


def test_black_input_gives_black_output(tmp_path, table_file):
    out = tmp_path / "o.pbm"
    assert main(["dither", str(_gray(tmp_path, 0.0)), "--table", str(table_file), "--out", str(out)]) == 0
    assert read_pbm(out).all()


def test_png_output_carries_provenance(tmp_path, table_file, random_table):
    out = tmp_path / "o.png"
    assert main(["dither", str(_gray(tmp_path, 0.5)), "--table", str(table_file), "--out", str(out)]) == 0
    with Image.open(out) as im:
        assert im.mode == "1"
        assert im.text["polydither-table"] == random_table.digest()
        assert im.text["polydither-offset"] == "0,0"


def test_ramp(tmp_path, table_file, capsys):
    out = tmp_path / "ramp.pbm"
    assert main(["ramp", "--table", str(table_file), "--width", "256", "--height", "32", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "monotone_blocks32\tTrue" in text
    black = read_pbm(out)
    assert black.shape == (32, 256)
    assert (tmp_path / "ramp_figure.png").exists()


def test_spectrum_of_white_is_zero(tmp_path, table_file, capsys):
    out = tmp_path / "spec"
    args = ["spectrum", "--table", str(table_file), "--level", "1", "--patches", "2", "--size", "64", "--out", str(out)]
    assert main(args) == 0
    assert "total_power\t0" in capsys.readouterr().out
    rows = [ln.split() for ln in (out / "radial.txt").read_text().splitlines() if ln and not ln.startswith("#")]
    assert rows and all(float(r[1]) == 0 for r in rows)
    assert (out / "power.png").exists()


def test_compare_report(tmp_path, table_file, capsys):
    out = tmp_path / "cmp"
    args = ["compare", "--table", str(table_file), "--patches", "2", "--size", "64", "--vnc-size", "16", "--out", str(out)]
    assert main(args) == 0
    report = (out / "report.tsv").read_text()
    for name in ("ours", "void-and-cluster", "white-noise"):
        assert f"\n{name}\t" in report
    assert (out / "compare_figure.png").exists()


def test_missing_table_is_usage_error(tmp_path):
    src = _gray(tmp_path, 0.5)
    assert main(["dither", str(src), "--table", str(tmp_path / "none.txt"), "--out", str(tmp_path / "o.pbm")]) == 2
    assert main(["dither", str(src), "--out", str(tmp_path / "o.pbm")]) == 2


def test_missing_or_bad_input_is_usage_error(tmp_path, table_file):
    out = str(tmp_path / "o.pbm")
    assert main(["dither", str(tmp_path / "none.pgm"), "--table", str(table_file), "--out", out]) == 2
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P2\n1 1\n255\n0\n")
    assert main(["dither", str(bad), "--table", str(table_file), "--out", out]) == 2


def test_bad_shape_is_asset_error(tmp_path):
    shape = tmp_path / "shape.txt"
    for text in ("0 0\n2 0\n", "##\n", "0 0\n1 0\n1 1\n2 1\n"):  # disconnected, malformed, skew tetromino
        shape.write_text(text)
        assert main(["build-tables", "--shape", str(shape), "--out", str(tmp_path / "t.txt")]) == 2
    assert main(["build-tables", "--shape", str(tmp_path / "none.txt"), "--out", str(tmp_path / "t.txt")]) == 2


def test_bad_arguments_exit_2(tmp_path, table_file):
    with pytest.raises(SystemExit) as exc:
        main(["dither", "x.pgm", "--offset", "1;2"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_missing_output_directory_is_usage_error(tmp_path, table_file):
    out = tmp_path / "no" / "such" / "dir" / "o.pbm"
    assert main(["dither", str(_gray(tmp_path, 0.5)), "--table", str(table_file), "--out", str(out)]) == 2


def test_runtime_failure_exits_1(tmp_path, table_file, monkeypatch):
    import polydither.halftone

    def boom(*args, **kwargs):
        raise RuntimeError("injected")

    monkeypatch.setattr(polydither.halftone, "dither", boom)
    out = tmp_path / "o.pbm"
    assert main(["dither", str(_gray(tmp_path, 0.5)), "--table", str(table_file), "--out", str(out)]) == 1
    assert not out.exists()


def test_compare_needs_interior_level(tmp_path, table_file):
    assert main(["compare", "--table", str(table_file), "--level", "0", "--out", str(tmp_path / "c")]) == 2
