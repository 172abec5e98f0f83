"""Unit examples for discretization, per-family texture features, first-order
statistics, shape descriptors, extraction contracts, and the feature scaler."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_roi
from panrisk.errors import ValidationError
from panrisk.radiomics import (
    FEATURE_NAMES,
    apply_scaler,
    discretize,
    extract_feature_vector,
    firstorder_features,
    fit_scaler,
    glcm_features,
    glrlm_features,
    glszm_features,
    gldm_features,
    ngtdm_features,
    shape_features,
)
from panrisk.radiomics.discretize import DiscretizedRoi
from panrisk.radiomics.features import COARSENESS_CAP
from panrisk.radiomics.matrices import (
    UNIQUE_OFFSETS,
    dependence_matrix,
    gray_tone_difference_table,
    run_length_matrices,
    size_zone_matrix,
)
from panrisk.volume import Mask, Volume


def cube_roi(values, ng):
    values = np.asarray(values, dtype=np.float64)
    v = Volume(data=values)
    m = Mask(data=np.ones(values.shape, bool))
    return discretize(v, m, ng)


# ------------------------------------------------------------- discretize ----


def test_discretize_four_levels():
    data = np.array([0.0, 1.0, 2.0, 3.0]).reshape(4, 1, 1)
    d = cube_roi(data, ng=4)
    assert d.levels[:, 0, 0].tolist() == [1, 2, 3, 4]


def test_discretize_constant_roi():
    d = cube_roi(np.full((3, 3, 3), 7.0), ng=8)
    assert set(d.levels[d.mask].tolist()) == {1}


def test_discretize_matches_naive_binning(rng):
    v, m = random_roi(rng)
    ng = 8
    d = discretize(v, m, ng)
    vals = v.data[m.data]
    lo, hi = vals.min(), vals.max()
    width = (hi - lo) / ng
    naive = np.clip(np.floor((vals - lo) / width).astype(int) + 1, 1, ng)
    assert np.array_equal(np.bincount(d.levels[d.mask], minlength=ng + 1),
                          np.bincount(naive, minlength=ng + 1))


def test_discretize_rejects_empty_mask():
    v = Volume(data=np.zeros((2, 2, 2)))
    with pytest.raises(ValidationError):
        discretize(v, Mask(data=np.zeros((2, 2, 2), bool)), 4)


# ------------------------------------------------------------------ GLCM ----


def test_glcm_constant_roi():
    d = cube_roi(np.full((3, 3, 3), 5.0), ng=4)
    f = glcm_features(d)
    assert f["Contrast"] == 0.0
    assert f["JointEnergy"] == pytest.approx(1.0)
    assert f["MaximumProbability"] == pytest.approx(1.0)


def test_glcm_checkerboard_axis_contrast():
    """On a 2-level checkerboard, every distance-1 axis pair differs by 1 level."""
    g = np.indices((4, 4, 4)).sum(axis=0)
    levels = (g % 2 + 1).astype(np.int32)
    d = DiscretizedRoi(levels=levels, mask=np.ones((4, 4, 4), bool), ng=2,
                       spacing=(1.0, 1.0, 1.0))
    from panrisk.radiomics.matrices import cooccurrence_matrices
    from panrisk.radiomics.features import _glcm_single

    mats = cooccurrence_matrices(d)
    assert len(mats) == 13
    for off, p in zip(UNIQUE_OFFSETS, mats):
        contrast = _glcm_single(p, 2)["Contrast"]
        parity = sum(abs(c) for c in off) % 2
        assert contrast == pytest.approx(1.0 if parity == 1 else 0.0, abs=1e-12)


# ----------------------------------------------------------------- GLRLM ----


def line_roi(levels_1d, ng):
    n = len(levels_1d)
    levels = np.zeros((n, 3, 3), dtype=np.int32)
    mask = np.zeros((n, 3, 3), bool)
    levels[:, 1, 1] = levels_1d
    mask[:, 1, 1] = True
    return DiscretizedRoi(levels=levels, mask=mask, ng=ng, spacing=(1.0, 1.0, 1.0))


def test_glrlm_single_constant_run():
    d = line_roi([1] * 7, ng=2)
    x_axis = UNIQUE_OFFSETS.index((1, 0, 0))
    mat = run_length_matrices(d)[x_axis]
    assert mat.sum() == 1
    assert mat[0, 6] == 1  # one run of length 7


def test_glrlm_alternating_line_short_run_emphasis():
    d = line_roi([1, 2] * 5, ng=2)
    f = glrlm_features(d)
    assert f["ShortRunEmphasis"] == pytest.approx(1.0)
    assert f["LongRunEmphasis"] == pytest.approx(1.0)


# ----------------------------------------------------------------- GLSZM ----


def test_glszm_constant_roi_single_zone():
    d = cube_roi(np.full((3, 3, 3), 2.0), ng=4)
    mat = size_zone_matrix(d)
    assert mat.sum() == 1
    assert mat[0, 26] == 1  # one zone of 27 voxels at level 1


def test_glszm_two_isolated_voxels():
    levels = np.zeros((5, 5, 5), dtype=np.int32)
    mask = np.zeros((5, 5, 5), bool)
    levels[0, 0, 0] = 1
    levels[4, 4, 4] = 2
    mask[0, 0, 0] = mask[4, 4, 4] = True
    d = DiscretizedRoi(levels=levels, mask=mask, ng=2, spacing=(1.0, 1.0, 1.0))
    f = glszm_features(d)
    assert f["SmallAreaEmphasis"] == pytest.approx(1.0)
    assert f["ZonePercentage"] == pytest.approx(1.0)


# ------------------------------------------------------------------ GLDM ----


def test_gldm_constant_cube_center_dependence():
    d = cube_roi(np.full((3, 3, 3), 1.0), ng=4)
    mat = dependence_matrix(d)
    assert mat[0, 26] == 1      # center voxel has all 26 neighbors equal
    assert mat[0, 7] == 8       # corners
    assert mat[0, 11] == 12     # edges
    assert mat[0, 17] == 6      # face centers
    assert mat.sum() == 27


def test_gldm_isolated_levels_zero_dependence():
    # strictly alternating line: every in-mask neighbor has a different level
    d = line_roi([1, 2] * 4, ng=2)
    mat = dependence_matrix(d)
    assert mat[:, 0].sum() == 8
    assert mat[:, 1:].sum() == 0


# ----------------------------------------------------------------- NGTDM ----


def test_ngtdm_constant_roi_capped_coarseness():
    d = cube_roi(np.full((3, 3, 3), 9.0), ng=4)
    _, s_i, nvp = gray_tone_difference_table(d)
    assert s_i.sum() == 0.0
    f = ngtdm_features(d)
    assert f["Coarseness"] == COARSENESS_CAP


def test_ngtdm_single_bright_voxel_hand_computation():
    levels = np.ones((3, 3, 3), dtype=np.int32)
    levels[1, 1, 1] = 2
    d = DiscretizedRoi(levels=levels, mask=np.ones((3, 3, 3), bool), ng=2,
                       spacing=(1.0, 1.0, 1.0))
    n_i, s_i, nvp = gray_tone_difference_table(d)
    assert nvp == 27
    assert n_i.tolist() == [26.0, 1.0]
    # corners: |1 - (6+2)/7| * 8; edges: |1 - (10+2)/11| * 12; faces: |1 - (16+2)/17| * 6
    expected_s1 = 8 * (1 / 7) + 12 * (1 / 11) + 6 * (1 / 17)
    assert s_i[0] == pytest.approx(expected_s1, rel=1e-12)
    assert s_i[1] == pytest.approx(1.0)  # center: |2 - 1|


# ------------------------------------------------------------ first order ----


def test_firstorder_tiny_roi():
    data = np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1)
    v = Volume(data=data)
    m = Mask(data=np.ones((3, 1, 1), bool))
    f = firstorder_features(v, m, ng=4)
    assert f["Mean"] == pytest.approx(2.0)
    assert f["Energy"] == pytest.approx(14.0)
    assert f["Range"] == pytest.approx(2.0)
    assert f["Median"] == pytest.approx(2.0)


def test_firstorder_constant_degenerate():
    v = Volume(data=np.full((3, 3, 3), 4.0))
    m = Mask(data=np.ones((3, 3, 3), bool))
    f = firstorder_features(v, m)
    assert f["Variance"] == 0.0
    assert f["Skewness"] == 0.0
    assert f["Kurtosis"] == 0.0
    assert f["Uniformity"] == pytest.approx(1.0)


# ----------------------------------------------------------------- shape ----


def test_shape_single_voxel():
    mask = np.zeros((3, 3, 3), bool)
    mask[1, 1, 1] = True
    f = shape_features(Mask(data=mask))
    assert f["VoxelVolume"] == pytest.approx(1.0)
    assert f["MeshVolume"] == pytest.approx(1.0)
    assert f["SurfaceArea"] == pytest.approx(6.0)
    assert f["Maximum3DDiameter"] == 0.0


def test_shape_cube_2x2x2():
    mask = np.zeros((4, 4, 4), bool)
    mask[1:3, 1:3, 1:3] = True
    f = shape_features(Mask(data=mask))
    assert f["VoxelVolume"] == pytest.approx(8.0)
    assert f["SurfaceArea"] == pytest.approx(24.0)
    assert f["Maximum3DDiameter"] == pytest.approx(np.sqrt(3.0))
    # exhaustive pairwise oracle over the 8 voxel centers
    pts = np.argwhere(mask).astype(float)
    best = max(np.linalg.norm(a - b) for a in pts for b in pts)
    assert f["Maximum3DDiameter"] == pytest.approx(best)


def test_shape_digital_ball_regression():
    """Voxel-face surface overestimates a sphere by ~3/2, so the face-convention
    sphericity of a ball sits near 2/3; pinned from the first run."""
    g = np.arange(25) - 12.0
    x, y, z = np.meshgrid(g, g, g, indexing="ij")
    m = Mask(data=x**2 + y**2 + z**2 <= 100.0)
    f = shape_features(m)
    assert f["Sphericity"] == pytest.approx(0.6586098303085809, rel=1e-12)
    assert f["MeshVolume"] == pytest.approx(4169.0)
    assert f["Maximum3DDiameter"] == pytest.approx(20.0)


def test_shape_anisotropic_spacing():
    mask = np.zeros((3, 3, 3), bool)
    mask[1, 1, 1] = True
    f = shape_features(Mask(data=mask, spacing=(2.0, 2.0, 2.0)))
    assert f["VoxelVolume"] == pytest.approx(8.0)
    assert f["SurfaceArea"] == pytest.approx(24.0)


# ------------------------------------------------------------- extraction ----


def test_extract_canonical_names_and_count(rng):
    v, m = random_roi(rng)
    vec = extract_feature_vector(v, m, ng=6)
    assert vec.names == FEATURE_NAMES
    assert len(vec.values) == 107
    assert np.all(np.isfinite(vec.values))
    families = [n.split("_")[0] for n in vec.names]
    counts = {fam: families.count(fam) for fam in dict.fromkeys(families)}
    assert counts == {"shape": 14, "firstorder": 18, "glcm": 24, "glrlm": 16,
                      "glszm": 16, "gldm": 14, "ngtdm": 5}


def test_extract_translation_invariance(rng):
    inner = rng.normal(50, 5, (4, 4, 4))
    big = np.zeros((10, 10, 10))
    mask_a = np.zeros((10, 10, 10), bool)
    mask_b = np.zeros((10, 10, 10), bool)
    big_a = big.copy()
    big_a[1:5, 1:5, 1:5] = inner
    mask_a[1:5, 1:5, 1:5] = True
    big_b = big.copy()
    big_b[5:9, 4:8, 3:7] = inner
    mask_b[5:9, 4:8, 3:7] = True
    va = extract_feature_vector(Volume(data=big_a), Mask(data=mask_a), ng=8)
    vb = extract_feature_vector(Volume(data=big_b), Mask(data=mask_b), ng=8)
    np.testing.assert_allclose(va.values, vb.values, rtol=1e-12, atol=1e-12)


def test_extract_intensity_shift(rng):
    v, m = random_roi(rng, max_dim=5)
    shift = 17.5
    v2 = Volume(data=v.data + shift, spacing=v.spacing)
    a = extract_feature_vector(v, m, ng=6).as_dict()
    b = extract_feature_vector(v2, m, ng=6).as_dict()
    for name in FEATURE_NAMES:
        if name.startswith("shape_"):
            assert a[name] == pytest.approx(b[name], rel=1e-12, abs=1e-12)
    assert b["firstorder_Mean"] == pytest.approx(a["firstorder_Mean"] + shift)


# ----------------------------------------------------------------- scaler ----


def test_scaler_two_point_column():
    vals = np.array([[0.0], [np.e - 1.0]])
    scaler = fit_scaler(vals, ["f"])
    z = apply_scaler(scaler, vals)
    assert scaler.mean[0] == pytest.approx(0.5)
    assert scaler.std[0] == pytest.approx(0.5)
    assert z[:, 0].tolist() == pytest.approx([-1.0, 1.0])


def test_scaler_train_moments(rng):
    vals = rng.normal(3.0, 2.0, size=(40, 6))
    scaler = fit_scaler(vals, [f"f{i}" for i in range(6)])
    z = apply_scaler(scaler, vals)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(z.var(axis=0), 1.0, atol=1e-9)


def test_scaler_constant_column_maps_to_zero():
    vals = np.column_stack([np.full(5, 3.3), np.arange(5.0)])
    scaler = fit_scaler(vals, ["const", "ramp"])
    z = apply_scaler(scaler, vals)
    assert np.all(z[:, 0] == 0.0)


def test_scaler_handles_negative_values():
    vals = np.array([[-5.0], [-1.5], [0.0], [2.0]])
    scaler = fit_scaler(vals, ["f"])
    z = apply_scaler(scaler, vals)
    assert np.all(np.isfinite(z))


@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(-100, 100, allow_nan=False),
    b=st.floats(-100, 100, allow_nan=False),
)
def test_scaler_monotone_per_feature(a, b):
    train = np.array([[-3.0], [0.0], [4.0], [9.0]])
    scaler = fit_scaler(train, ["f"])
    za = apply_scaler(scaler, np.array([a]))[0]
    zb = apply_scaler(scaler, np.array([b]))[0]
    if a <= b:
        assert za <= zb + 1e-12
    else:
        assert za >= zb - 1e-12
