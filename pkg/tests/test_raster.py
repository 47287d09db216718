import numpy as np
import pytest
from skimage.feature import canny as sk_canny

from braidrecon.raster import (
    CannyConfig,
    ProjectionSpec,
    canny,
    edge_image_synthetic,
    mask_strands,
    rasterize_tube,
    real_edges,
)
from braidrecon.strands import GrayImage, Strand, StrandSet, ValidationError
from braidrecon.synth import BraidParams, generate


def _brute_discs(xy, radii, spec, softness):
    rows, cols = np.mgrid[0 : spec.height, 0 : spec.width]
    out = np.zeros((spec.height, spec.width))
    for (x, y), r in zip(xy, radii):
        d = np.hypot(cols - x, rows - y)
        cover = np.clip(1 - (d - r) / softness, 0, 1) if softness > 0 else (d <= r) * 1.0
        out = np.maximum(out, cover)
    return out


def _vertical(x=20.0, rows=range(5, 35)):
    pts = [[x, float(r), 0.0] for r in rows]
    return StrandSet((Strand("v", pts),))


def test_single_disc():
    spec = ProjectionSpec(15, 15)
    img = rasterize_tube(StrandSet((Strand("p", [[7, 7, 0], [7, 7, 1]]),)), 3.0, spec, 0.0)
    rows, cols = np.mgrid[0:15, 0:15]
    expected = (np.hypot(cols - 7, rows - 7) <= 3).astype(float)
    np.testing.assert_array_equal(img.pixels, expected)


def test_empty_set():
    img = rasterize_tube(StrandSet(()), 3.0, ProjectionSpec(8, 6))
    assert img.pixels.sum() == 0 and img.pixels.shape == (6, 8)


@pytest.mark.parametrize("softness", [0.0, 1.0, 2.5])
def test_overlapping_discs_match_brute_force(softness, rng):
    spec = ProjectionSpec(40, 30)
    pts = np.column_stack([rng.uniform(0, 40, 12), rng.uniform(0, 30, 12), np.arange(12.0)])
    radii = rng.uniform(1, 6, 12)
    img = rasterize_tube(StrandSet((Strand("s", pts),)), radii, spec, softness)
    np.testing.assert_allclose(img.pixels, _brute_discs(pts[:, :2], radii, spec, softness), rtol=0, atol=1e-12)
    assert img.pixels.max() <= 1.0


def test_radius_length_mismatch():
    with pytest.raises(ValidationError):
        rasterize_tube(_vertical(), [np.ones(3)], ProjectionSpec(40, 40))


def test_monotone_in_radius(rng):
    spec = ProjectionSpec(50, 50)
    pts = np.column_stack([rng.uniform(0, 50, 8), rng.uniform(0, 50, 8), np.arange(8.0)])
    strands = StrandSet((Strand("s", pts),))
    r1 = rng.uniform(1, 4, 8)
    r2 = r1 + rng.uniform(0, 3, 8)
    a = rasterize_tube(strands, r1, spec).pixels
    b = rasterize_tube(strands, r2, spec).pixels
    assert np.all(a <= b)


def _straight_braid(x=20.0, y0=5.0, n=40):
    # b = a = 0 gives straight vertical centerlines; t_step 1 gives 1 px spacing
    return generate(BraidParams(a=0, b=0, t_step=1.0, n_points=n, shift_x=x, shift_y=y0, noise=(0, 0, 0)))


def test_edge_band_width():
    spec = ProjectionSpec(41, 60)
    img = edge_image_synthetic(_straight_braid(), spec, softness=0.0)
    row = img.pixels[25]
    # 7 / 1.4 = 5 exactly: band covers |dx| in {6, 7}
    assert list(np.flatnonzero(row)) == [13, 14, 26, 27]


def test_edge_band_interior_suppressed(truth, spec):
    braid = generate(truth)
    from braidrecon.raster import rasterize_discs

    edges = edge_image_synthetic(braid, spec).pixels
    xy = braid.centerline_points()[:, :, :2].reshape(-1, 2)
    inner = rasterize_discs(xy, braid.radius_profile.reshape(-1) / 1.4, spec, 1.0)
    assert np.all(edges[inner == 1] == 0)
    assert 0 <= edges.min() and edges.max() <= 1


def test_edge_band_outside_image():
    img = edge_image_synthetic(_straight_braid(x=-500), ProjectionSpec(30, 30))
    assert img.pixels.sum() == 0


def test_canny_constant():
    assert canny(GrayImage(np.full((20, 20), 0.4))).pixels.sum() == 0


def test_canny_step_single_column():
    im = np.zeros((24, 24))
    im[:, 12:] = 1
    edges = canny(GrayImage(im)).pixels
    assert set(np.unique(edges)) <= {0.0, 1.0}
    cols = np.flatnonzero(edges.any(axis=0))
    assert list(cols) == [12]
    assert edges[:, 12].all()
    # reference implementation marks the same step (it splits the tie over both columns)
    ref = sk_canny(im, sigma=1.4, low_threshold=0.1, high_threshold=0.3)
    assert set(cols) <= set(np.flatnonzero(ref.any(axis=0)))
    assert set(np.flatnonzero(ref.any(axis=0))) <= {11, 12}


def test_canny_binary_on_noise(rng):
    edges = canny(GrayImage(rng.uniform(size=(30, 30)))).pixels
    assert set(np.unique(edges)) <= {0.0, 1.0}


def test_canny_on_own_output_stays_local():
    im = np.zeros((32, 32))
    im[:, 16:] = 1
    first = canny(GrayImage(im)).pixels
    second = canny(GrayImage(first)).pixels
    cols = np.flatnonzero(second.any(axis=0))
    assert cols.min() >= 14 and cols.max() <= 18


def test_canny_config_validation():
    with pytest.raises(ValidationError):
        CannyConfig(low_threshold=0.5, high_threshold=0.3)


def test_real_edges_from_mask_and_image():
    mask = np.zeros((20, 20))
    mask[:, 10:] = 1
    e1 = real_edges(GrayImage(mask))
    e2 = real_edges(GrayImage(mask), image=GrayImage(np.ones((20, 20))))
    np.testing.assert_array_equal(e1.pixels, e2.pixels)


def test_mask_strands_all_ones_all_zeros():
    spec = ProjectionSpec(40, 40)
    strands = StrandSet((Strand("a", [[1, 1, 0], [2, 2, 0]]), Strand("b", [[30, 30, 0], [31, 39, 0]])))
    inside, outside = mask_strands(strands, GrayImage(np.ones((40, 40))), spec)
    assert inside.ids == ["a", "b"] and len(outside) == 0
    inside, outside = mask_strands(strands, GrayImage(np.zeros((40, 40))), spec)
    assert len(inside) == 0 and outside.ids == ["a", "b"]


def test_mask_strands_fraction():
    spec = ProjectionSpec(20, 20)
    mask = np.zeros((20, 20))
    mask[:6, :] = 1  # rows 0..5 on the mask
    pts = [[3, float(r), 0] for r in range(10)]  # 6 of 10 hits
    strand = StrandSet((Strand("s", pts),))
    inside, _ = mask_strands(strand, GrayImage(mask), spec, 0.5)
    assert inside.ids == ["s"]
    inside, _ = mask_strands(strand, GrayImage(mask), spec, 0.7)
    assert len(inside) == 0


def test_mask_strands_size_mismatch():
    with pytest.raises(ValidationError):
        mask_strands(_vertical(), GrayImage(np.ones((5, 5))), ProjectionSpec(6, 5))
