import json

import numpy as np
import pytest

from skewfatou.artifacts import Manifest, escape_image, read_csv, stream, write_csv, write_png
from skewfatou.cache import cache_get, cache_key, cache_put, decode, encode
from skewfatou.cli import main
from skewfatou.dynamics import NOT_ESCAPED
from skewfatou.errors import ValidationError


@pytest.fixture(autouse=True)
def _cache(tmp_path, monkeypatch):
    monkeypatch.setenv("SKEWFATOU_CACHE_DIR", str(tmp_path / "cache"))


def test_cache_roundtrip(tmp_path):
    v = np.arange(12, dtype=np.uint32).reshape(3, 4)
    v[0, 0] = NOT_ESCAPED
    key = cache_key("z^2-2", (-1, 1, -1, 1), 4, 30)
    assert cache_get(key) is None
    assert cache_put(key, v)
    assert np.array_equal(cache_get(key), v)
    assert encode(v)[:5] == b"SKFR1"


def test_cache_misses(tmp_path):
    v = np.ones((4, 4), np.uint32)
    key = cache_key("z^2", (-1, 1, -1, 1), 4, 30)
    cache_put(key, v)
    assert cache_key("z^2", (-1, 1, -1, 1), 8, 30) != key
    path = next((tmp_path / "cache").glob("*.skfr"))
    path.write_bytes(path.read_bytes()[:-3])
    assert cache_get(key) is None
    assert decode(b"XXXXX" + encode(v)[5:]) is None


def test_csv_rules(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["m", "x"], [(1, 0.1), (2, True)])
    assert p.read_bytes() == b"m,x\n1,0.1\n2,true\n"
    assert read_csv(p) == (["m", "x"], [["1", "0.1"], ["2", "true"]])
    with pytest.raises(ValidationError):
        write_csv(tmp_path / "b.csv", ["m"], [(float("nan"),)])
    with pytest.raises(ValidationError):
        write_csv(tmp_path / "c.csv", ["m", "x"], [(1,)])


def test_png_and_palette(tmp_path):
    from PIL import Image

    v = np.array([[0, 1], [NOT_ESCAPED, 7]], np.uint32)
    img = escape_image(v)
    # row 0 is drawn at the bottom
    assert tuple(img[0, 0]) == (0, 0, 0) and tuple(img[1, 0]) != (0, 0, 0)
    p = write_png(tmp_path / "v.png", img)
    assert Image.open(p).size == (2, 2)


def test_streams_are_reproducible():
    a = stream(42, "diameter").random(3)
    assert np.array_equal(a, stream(42, "diameter").random(3))
    assert not np.array_equal(a, stream(42, "area").random(3))


def test_manifest(tmp_path):
    out = write_csv(tmp_path / "x.csv", ["a"], [(1,)])
    m = Manifest("demo", {"seed": 1})
    m.stage("raster", 0.5)
    m.output(out)
    data = json.loads(m.write(tmp_path).read_text())
    assert data["command"] == "demo" and len(data["outputs"][0]["sha256"]) == 64


def test_classify_smoke(tmp_path, capsys):
    assert main(["classify", "--map", "z^2+i", "--lambda", "0.25", "--out-dir", str(tmp_path)]) == 0
    assert "preperiodic_to_repelling" in capsys.readouterr().out


def test_parse_error_exit(capsys):
    assert main(["classify", "--map", "z^^2"]) == 1
    err = capsys.readouterr().err
    assert "position 2" in err


def test_sublevel_defaults(tmp_path):
    out = tmp_path / "areas.csv"
    assert main(["sublevel-areas", "--grid", "256", "--out", str(out), "--out-dir", str(tmp_path),
                 "--png", "vm.png", "--quiet"]) == 0
    header, rows = read_csv(out)
    assert header == ["m", "area_sq_units", "pixel_count"] and len(rows) >= 20
    assert (tmp_path / "vm.png").exists() and (tmp_path / "manifest.json").exists()
    # second run hits the cache and gives identical bytes
    first = out.read_bytes()
    assert main(["sublevel-areas", "--grid", "256", "--out", str(out), "--out-dir", str(tmp_path),
                 "--quiet"]) == 0
    assert out.read_bytes() == first


def test_toml_config(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('map = "z^2+i"\n[sublevel-areas]\ngrid = 128\nmmax = 12\n')
    out = tmp_path / "a.csv"
    assert main(["sublevel-areas", "--config", str(cfg), "--out", str(out), "--out-dir", str(tmp_path),
                 "--quiet"]) == 0
    assert len(read_csv(out)[1]) == 13
    bad = tmp_path / "bad.toml"
    bad.write_text("nonsense_key = 3\n")
    assert main(["classify", "--config", str(bad)]) == 1


def test_mmax_beyond_cap_rejected(tmp_path):
    assert main(["sublevel-areas", "--grid", "128", "--cap", "10", "--mmax", "20",
                 "--out-dir", str(tmp_path), "--quiet"]) == 1


def test_resonant_needs_resonance(tmp_path):
    assert main(["resonant", "--lambda", "0.3", "--out-dir", str(tmp_path), "--quiet"]) == 1


@pytest.mark.parametrize("args, header", [
    (["koenigs"], "k,coef_re,coef_im"),
    (["linearize", "--nmax", "12"], "n,t_re,t_im,phi_re,phi_im,cauchy_gap,residual"),
    (["track-critical", "--nmax", "40"], "n,count_Sn"),
    (["resonant", "--nmax", "20", "--mrange", "10"], "n,m,z_re,z_im,w_re,w_im,gap"),
    (["equidistribution", "--n", "2000"], "n,gap"),
    (["disk-bounds", "--trials", "10", "--dmax", "3"], "trial,kind,d,param,measured,bound,pass"),
])
def test_subcommands(tmp_path, args, header):
    out = tmp_path / "o.csv"
    assert main(args + ["--out", str(out), "--out-dir", str(tmp_path), "--quiet"]) == 0
    assert out.read_text().splitlines()[0] == header
