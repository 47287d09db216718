import numpy as np
import pytest
from PIL import Image

from braidrecon import formats
from braidrecon.config import ConfigError, RunConfig
from braidrecon.fit import FitConfig
from braidrecon.losses import LossReport
from braidrecon.raster import ProjectionSpec
from braidrecon.refine import Allocation
from braidrecon.simulate import simulate_coarse, truth_midline, vertical_params
from braidrecon.strands import GrayImage, MidLineAnnotation, Strand, StrandSet, ValidationError
from braidrecon.synth import BraidParams, generate

SMALL = ProjectionSpec(128, 256)


# strand files

def test_empty_roundtrip(tmp_path):
    formats.save_strands(StrandSet(()), tmp_path / "e.strands")
    assert len(formats.load_strands(tmp_path / "e.strands")) == 0


def test_roundtrip(tmp_path, rng):
    strands = StrandSet((
        Strand("a", [[0.1, 0.2, 0.3], [1e-7, 2.5e6, -3.0]]),
        Strand("b-2", rng.normal(size=(40, 3)) * 100),
    ))
    path = tmp_path / "s.strands"
    formats.save_strands(strands, path)
    back = formats.load_strands(path, root_first=False)
    assert back.ids == strands.ids
    for x, y in zip(strands, back):
        np.testing.assert_allclose(y.points, x.points, rtol=0, atol=1e-6)


def test_load_orients_root_first(tmp_path):
    path = tmp_path / "s.strands"
    formats.save_strands(StrandSet((Strand("s", [[0, 10, 0.0], [0, 0, 0.0]]),)), path)
    assert formats.load_strands(path)["s"].points[0, 1] == 0.0
    assert formats.load_strands(path, root_first=False)["s"].points[0, 1] == 10.0


@pytest.mark.parametrize("text, line", [
    ("STRANDS x\n", 1),
    ("", 1),
    ("STRANDS 1\nS a 2\n0 0 0\n", 4),
    ("STRANDS 1\nS a 2\n0 0 0\n1 1\n", 4),
    ("STRANDS 1\nS a\n", 2),
    ("STRANDS 2\nS a 2\n0 0 0\n1 1 1\nS a 2\n0 0 0\n1 1 1\n", 5),
    ("STRANDS 0\nextra\n", 2),
    ("STRANDS 1\nS a 2\n0 0 0\n0 0 0\n", 2),
])
def test_parse_errors_name_line(tmp_path, text, line):
    path = tmp_path / "bad.strands"
    path.write_text(text)
    with pytest.raises(formats.ParseError) as info:
        formats.load_strands(path)
    assert info.value.line == line
    assert f":{line}:" in str(info.value)


def test_save_rejects_whitespace_id(tmp_path):
    with pytest.raises(ValidationError):
        formats.save_strands(StrandSet((Strand("a b", [[0, 0, 0.0], [1, 0, 0.0]]),)), tmp_path / "x")


# masks

def _write_pgm(path, array):
    Image.fromarray(np.asarray(array, dtype=np.uint8), mode="L").save(path)


@pytest.mark.parametrize("value, expected", [(255, 1.0), (0, 0.0)])
def test_uniform_pgm(tmp_path, value, expected):
    _write_pgm(tmp_path / "m.pgm", np.full((4, 5), value))
    mask = formats.load_mask(tmp_path / "m.pgm")
    assert (mask.height, mask.width) == (4, 5)
    assert np.all(mask.pixels == expected)


def test_checkerboard_png(tmp_path):
    _write_pgm(tmp_path / "m.png", [[0, 255], [255, 0]])
    np.testing.assert_array_equal(formats.load_mask(tmp_path / "m.png").pixels, [[0.0, 1.0], [1.0, 0.0]])


def test_mid_gray_scaling(tmp_path):
    _write_pgm(tmp_path / "m.pgm", [[51, 204]])
    np.testing.assert_allclose(formats.load_mask(tmp_path / "m.pgm").pixels, [[0.2, 0.8]])


def test_save_pgm_roundtrip(tmp_path):
    img = GrayImage(np.array([[0.0, 0.5], [1.0, 0.25]]))
    formats.save_pgm(img, tmp_path / "o.pgm")
    assert (tmp_path / "o.pgm").read_bytes().startswith(b"P5\n2 2\n255\n")
    back = formats.load_mask(tmp_path / "o.pgm")
    np.testing.assert_allclose(back.pixels, img.pixels, atol=0.5 / 255)


def test_mask_rejects_jpeg(tmp_path):
    Image.fromarray(np.zeros((4, 4), np.uint8)).save(tmp_path / "m.jpg")
    with pytest.raises(formats.UnsupportedFormatError):
        formats.load_mask(tmp_path / "m.jpg")
    assert formats.load_image(tmp_path / "m.jpg").pixels.shape == (4, 4)


def test_mask_decode_error(tmp_path):
    (tmp_path / "m.png").write_bytes(b"\x89PNG\r\n\x1a\nnot really")
    with pytest.raises(formats.DecodeError):
        formats.load_mask(tmp_path / "m.png")


# PLY

def _ply_body(path):
    lines = path.read_text().splitlines()
    end = lines.index("end_header")
    return lines[:end], [l.split() for l in lines[end + 1:]]


def test_ply_gray_without_allocation(tmp_path):
    formats.export_ply(StrandSet((Strand("s", [[0, 0, 0.0], [1, 0, 0.0], [2, 0, 0.0]]),)), tmp_path / "p.ply")
    header, rows = _ply_body(tmp_path / "p.ply")
    assert "element vertex 3" in header
    assert [r[3:] for r in rows] == [["128", "128", "128"]] * 3


def test_ply_bunch_colors(tmp_path):
    strands = StrandSet(tuple(Strand(f"s{i}", [[i, 0, 0.0], [i, 1, 0.0]]) for i in range(5)))
    alloc = Allocation({"s0": 0, "s1": 1, "s2": 2}, ["s3"])
    formats.export_ply(strands, tmp_path / "p.ply", alloc)
    header, rows = _ply_body(tmp_path / "p.ply")
    assert f"element vertex {strands.n_points}" in header
    assert len(rows) == strands.n_points
    colors = [tuple(map(int, r[3:])) for r in rows[::2]]
    assert colors == [(255, 0, 0), (0, 0, 255), (0, 255, 0), (128, 128, 128), (128, 128, 128)]


# mid-line and params files

def test_midline_roundtrip(tmp_path):
    m = MidLineAnnotation.from_points(np.array([[10.0, 5.0], [12.5, 40.0], [11.0, 90.0]]), 34.5)
    formats.save_midline(m, tmp_path / "m.txt")
    assert (tmp_path / "m.txt").read_text().startswith("MIDLINE 3 width_px=34.5\n")
    back = formats.load_midline(tmp_path / "m.txt")
    np.testing.assert_array_equal(back.polyline, m.polyline)
    assert back.width_px == 34.5


@pytest.mark.parametrize("text", ["MIDLINE 2 width=3\n0 0\n0 1\n", "MIDLINE 3 width_px=3\n0 0\n0 1\n",
                                  "MIDLINE 2 width_px=-1\n0 0\n0 1\n", "MIDLINE 1 width_px=3\n0 0\n"])
def test_midline_errors(tmp_path, text):
    (tmp_path / "m.txt").write_text(text)
    with pytest.raises(ValidationError):
        formats.load_midline(tmp_path / "m.txt")


def test_params_roundtrip(tmp_path, spec):
    p = vertical_params(spec, n_points=20, a=18.5, shift_z=3.25).with_noise(4)
    formats.save_params(p, tmp_path / "p.json")
    q = formats.load_params(tmp_path / "p.json")
    for name in ("a", "b", "w", "t_step", "n_points", "n_bunches", "radius", "t_scale", "shift_z", "noise"):
        assert getattr(q, name) == getattr(p, name)
    np.testing.assert_array_equal(q.shift_y, p.shift_y)


def test_params_bad_json(tmp_path):
    (tmp_path / "p.json").write_text('{"a": 1,\n oops}')
    with pytest.raises(formats.ParseError):
        formats.load_params(tmp_path / "p.json")
    (tmp_path / "q.json").write_text('{"bogus": 1}')
    with pytest.raises(ValidationError):
        formats.load_params(tmp_path / "q.json")


def test_trace_csv_sums(tmp_path):
    class T:
        reports = [LossReport(1.0, 0.5, 20.0, 1.0 + 1e-4 * 0.5 + 1e-3 * 20.0), LossReport(0.9, 0.4, 10.0, 0.91004)]
        lrs = [1e-4, 1e-4]
    formats.save_trace(T, tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "epoch,l_pc,l_proj,l_reg,l_total,lr"
    for row in rows[1:]:
        _, pc, proj, reg, tot, _ = map(float, row.split(","))
        assert pc + 1e-4 * proj + 1e-3 * reg == pytest.approx(tot, abs=1e-9)


# config

def test_config_defaults_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\n\nepochs = 7\nlearnable=a,b\nbalance=off\n")
    cfg = RunConfig.load(path, ["lr=0.5", "coarse=x.strands"])
    fc = cfg.fit_config()
    assert (fc.epochs, fc.lr, fc.learnable) == (7, 0.5, ("a", "b"))
    assert cfg.refine_config().balance is False
    assert cfg["coarse"] == "x.strands"
    assert RunConfig.defaults().fit_config() == FitConfig()
    assert cfg.loss_weights().lambda_reg == 1e-3


def test_config_dump_roundtrip(tmp_path):
    cfg = RunConfig.load(None, ["lr_drop_epochs=10,20", "mask=m.png"])
    (tmp_path / "c.cfg").write_text(cfg.dump())
    assert RunConfig.load(tmp_path / "c.cfg") == cfg


@pytest.mark.parametrize("override", ["nope=1", "epochs=abc", "balance=maybe", "epochs"])
def test_config_errors(override):
    with pytest.raises(ConfigError):
        RunConfig.load(None, [override])


# simulator

def test_simulate_zero_noise_on_tube(truth, spec):
    strands, mask, edges = simulate_coarse(truth, 0.0, 5, seed=1, spec=spec)
    braid = generate(truth)
    assert len(strands) == 15
    for s in strands:
        b = int(s.id[1])
        d = np.linalg.norm(s.points - braid.centerlines[b].points, axis=1)
        np.testing.assert_allclose(d, braid.radius_profile[b], rtol=0, atol=1e-9)
    assert set(np.unique(mask.pixels)) <= {0.0, 1.0}
    assert edges.pixels.max() > 0


def test_simulate_deterministic(truth, spec):
    a = simulate_coarse(truth, 0.5, 3, seed=9, spec=spec)
    b = simulate_coarse(truth, 0.5, 3, seed=9, spec=spec)
    c = simulate_coarse(truth, 0.5, 3, seed=10, spec=spec)
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a[0], b[0]))
    assert np.array_equal(a[1].pixels, b[1].pixels) and np.array_equal(a[2].pixels, b[2].pixels)
    assert not np.array_equal(a[0].points(), c[0].points())


def test_simulate_noise_deviation_monte_carlo(spec):
    """Mean |d - r| in the normal plane against an independent Monte-Carlo draw."""
    sigma, radius = 0.5, 7.0
    truth = vertical_params(spec, n_points=200, radius=radius).with_noise(0)
    braid = generate(truth)
    devs = []
    for seed in range(6):
        strands, _, _ = simulate_coarse(truth, sigma, 6, seed=seed, spec=spec)
        for s in strands:
            b = int(s.id[1])
            centers = braid.centerlines[b].points
            tangent = np.gradient(centers, axis=0)
            tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
            rel = s.points - centers
            rel -= np.sum(rel * tangent, axis=1, keepdims=True) * tangent
            devs.append(np.abs(np.linalg.norm(rel, axis=1) - braid.radius_profile[b]))
    devs = np.concatenate(devs)
    assert len(devs) >= 10_000

    # oracle: a point at distance r in a plane plus 2-D Gaussian noise
    rng = np.random.default_rng(2024)
    n = 10_000
    r_draw = radius * (1.0 + np.array(truth.noise))[rng.integers(0, 3, n)]
    noisy = np.column_stack([r_draw, np.zeros(n)]) + rng.normal(0, sigma, (n, 2))
    oracle = np.abs(np.linalg.norm(noisy, axis=1) - r_draw)
    se = np.hypot(devs.std() / np.sqrt(len(devs)), oracle.std() / np.sqrt(n))
    assert abs(devs.mean() - oracle.mean()) < 4 * se
    # both sit near the half-normal mean for r >> sigma
    assert devs.mean() == pytest.approx(sigma * np.sqrt(2 / np.pi), rel=0.03)


def test_truth_midline_width(truth):
    m = truth_midline(truth)
    assert m.width_px == pytest.approx(35.0)
    assert m.polyline[0, 1] == pytest.approx(0.1 * 512)
