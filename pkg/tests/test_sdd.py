"""Surface-scan scoring, scan-time arithmetic, and fixture I/O."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cddsat.estimator import Status
from cddsat.sdd import (
    MODE_CONCURRENT,
    MODE_SEQUENTIAL,
    SCENARIOS,
    ImageRaster,
    ScanPlan,
    SddParams,
    SurfaceMap,
    binarize,
    dump_pgm,
    export_surface,
    generate_scan,
    load_pgm,
    load_surface,
    max_depth,
    roughness,
    scan_time,
    scenario_verdict,
    sdd_score,
    total_scan_seconds,
)


# -- metrics ------------------------------------------------------------------

def test_binarize_counts_bright_pixels():
    image = ImageRaster([[0, 128], [200, 255]])
    mask, fraction = binarize(image, 128)
    assert mask.tolist() == [[False, True], [True, True]]
    assert fraction == 0.75
    _, none_bright = binarize(image, 255)
    assert none_bright == 0.25
    with pytest.raises(ValueError):
        binarize(image, 300)


def test_roughness_is_rms_deviation():
    flat = SurfaceMap([[3.0, 3.0], [3.0, 3.0]])
    assert roughness(flat) == 0.0
    stepped = SurfaceMap([[0.0, 0.0], [2.0, 2.0]])
    assert roughness(stepped) == pytest.approx(1.0)  # mean 1, deviations +-1


def test_max_depth_is_peak_to_valley():
    surface = SurfaceMap([[0.0, -5.0], [2.0, 1.0]])
    assert max_depth(surface) == pytest.approx(7.0)


def test_raster_and_surface_validation():
    with pytest.raises(ValueError):
        ImageRaster([1, 2, 3])  # not 2-D
    with pytest.raises(ValueError):
        ImageRaster([[0, 300]])
    with pytest.raises(ValueError):
        ImageRaster([[-1, 0]])
    with pytest.raises(ValueError):
        SurfaceMap([[0.0, math.inf]])
    with pytest.raises(ValueError):
        SurfaceMap([1.0, 2.0])


def test_sdd_score_weighted_sum():
    params = SddParams()  # 0.5 fraction + 0.25 roughness + 0.25 depth
    clean = sdd_score(
        ImageRaster(np.zeros((4, 4), dtype=int)), SurfaceMap(np.zeros((4, 4)))
    )
    assert clean == 0.0

    bright_only = sdd_score(
        ImageRaster(np.full((4, 4), 255)), SurfaceMap(np.zeros((4, 4))), params
    )
    assert bright_only == pytest.approx(0.5)

    # Saturate every component: full bright fraction, roughness and depth
    # beyond their caps.
    rough = np.zeros((4, 4))
    rough[::2, :] = 25.0
    saturated = sdd_score(ImageRaster(np.full((4, 4), 255)), SurfaceMap(rough), params)
    assert saturated == 1.0


def test_sdd_score_respects_caps():
    params = SddParams(
        threshold=128,
        weight_fraction=0.0,
        weight_roughness=0.0,
        weight_depth=1.0,
        cap_depth_mm=10.0,
    )
    dent = np.zeros((3, 3))
    dent[1, 1] = -5.0
    image = ImageRaster(np.zeros((3, 3), dtype=int))
    assert sdd_score(image, SurfaceMap(dent), params) == pytest.approx(0.5)
    dent[1, 1] = -40.0  # beyond the cap, clamps to 1
    assert sdd_score(image, SurfaceMap(dent), params) == 1.0


def test_sdd_params_validation():
    with pytest.raises(ValueError):
        SddParams(threshold=-1)
    with pytest.raises(ValueError):
        SddParams(weight_fraction=0.9, weight_roughness=0.2, weight_depth=0.2)
    with pytest.raises(ValueError):
        SddParams(weight_fraction=-0.5, weight_roughness=0.75, weight_depth=0.75)
    with pytest.raises(ValueError):
        SddParams(cap_depth_mm=0.0)


# -- scan timing ----------------------------------------------------------------

def test_scan_totals_by_mode():
    assert total_scan_seconds((1.0, 2.0, 3.0), MODE_SEQUENTIAL) == 6.0
    assert total_scan_seconds((1.0, 2.0, 3.0), MODE_CONCURRENT) == 3.0
    # A trailing partial batch costs its own slowest member.
    assert total_scan_seconds((1.0, 2.0, 3.0, 4.0), MODE_CONCURRENT) == 7.0
    assert total_scan_seconds((5.0,), MODE_CONCURRENT) == 5.0
    assert total_scan_seconds((), MODE_SEQUENTIAL) == 0.0
    with pytest.raises(ValueError):
        total_scan_seconds((1.0,), "parallel")


def test_equal_scans_in_batches_of_three_cost_a_third():
    durations = (12.5,) * 9  # dyadic, so the arithmetic below is exact
    seq = total_scan_seconds(durations, MODE_SEQUENTIAL)
    conc = total_scan_seconds(durations, MODE_CONCURRENT)
    assert conc == seq / 3


@given(st.lists(st.floats(min_value=0.01, max_value=1e6), min_size=1, max_size=30))
def test_concurrent_never_beats_its_bounds(durations):
    seq = total_scan_seconds(tuple(durations), MODE_SEQUENTIAL)
    conc = total_scan_seconds(tuple(durations), MODE_CONCURRENT)
    assert conc <= seq + 1e-9
    assert conc >= max(durations) - 1e-9
    # Three lanes can cut at most a factor of three.
    assert conc >= seq / 3 - 1e-9


def test_scan_plan_validation():
    plan = ScanPlan(targets=("A1", "B1"), mode=MODE_SEQUENTIAL, per_scan_seconds=(1.0, 2.0))
    assert scan_time(plan) == 3.0
    with pytest.raises(ValueError):
        ScanPlan(targets=("A1",), mode=MODE_SEQUENTIAL, per_scan_seconds=(1.0, 2.0))
    with pytest.raises(ValueError):
        ScanPlan(targets=("A1",), mode=MODE_SEQUENTIAL, per_scan_seconds=(0.0,))
    with pytest.raises(ValueError):
        ScanPlan(targets=("A1",), mode="warp", per_scan_seconds=(1.0,))


# -- fixture I/O ------------------------------------------------------------------

PGM_SAMPLE = """P2
# synthetic sample
3 2
255
0 10 20
200   255 7
"""


def test_load_pgm_tolerates_comments_and_spacing():
    image = load_pgm(PGM_SAMPLE)
    assert image.pixels.tolist() == [[0, 10, 20], [200, 255, 7]]
    assert (image.width, image.height) == (3, 2)
    again = load_pgm(dump_pgm(image))
    assert np.array_equal(again.pixels, image.pixels)


def test_load_pgm_rejects_bad_input():
    with pytest.raises(ValueError):
        load_pgm("P5\n1 1\n255\n0\n")
    with pytest.raises(ValueError):
        load_pgm("P2\n2 2\n255\n0 0 0\n")  # payload short one value
    with pytest.raises(ValueError):
        load_pgm("P2\n0 2\n255\n")


def test_surface_round_trip():
    surface = SurfaceMap([[0.0, -1.5], [2.25, 0.0]])
    text = export_surface(surface)
    assert text.splitlines()[0] == "2 2"
    again = load_surface(text)
    assert np.allclose(again.heights, surface.heights)
    with pytest.raises(ValueError):
        load_surface("2 2\n1 2\n")  # one row missing
    with pytest.raises(ValueError):
        load_surface("")


# -- scenario simulation -----------------------------------------------------------

def test_generated_scans_are_deterministic():
    img_a, sur_a = generate_scan("rust_oxidation", "B7", seed=3)
    img_b, sur_b = generate_scan("rust_oxidation", "B7", seed=3)
    assert np.array_equal(img_a.pixels, img_b.pixels)
    assert np.array_equal(sur_a.heights, sur_b.heights)
    img_c, _ = generate_scan("rust_oxidation", "B8", seed=3)
    assert not np.array_equal(img_a.pixels, img_c.pixels)
    with pytest.raises(ValueError):
        generate_scan("flood", "A1", seed=0)


def test_scenario_flavours():
    assert set(SCENARIOS) == {"pristine", "rust_oxidation", "puncture"}
    clean = scenario_verdict("pristine", "A1", seed=0)
    assert clean.p == 0.0 and clean.status is Status.GREEN
    hole = scenario_verdict("puncture", "A1", seed=0)
    assert hole.status in (Status.ORANGE, Status.RED)
    # The dent in a punctured surface is far deeper than its noise floor.
    _, surface = generate_scan("puncture", "A1", seed=0)
    assert max_depth(surface) > 13.0
