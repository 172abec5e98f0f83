"""Bias correction, median denoising, and landmark standardization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.ndimage import gaussian_filter

from oracles import median_filter_oracle
from panrisk.errors import ValidationError
from panrisk.preprocess import (
    NyulModel,
    correct_bias,
    denoise_median,
    nyul_apply,
    nyul_train,
)
from panrisk.util import percentile
from panrisk.volume import Mask, Volume


def textured_phantom(rng, dims=(32, 32, 32), corr_vox=2.0, mean=60.0, std=8.0):
    tex = gaussian_filter(rng.standard_normal(dims), corr_vox, mode="wrap")
    tex /= tex.std()
    return Volume(data=np.clip(mean + std * tex, 0.0, None))


# ------------------------------------------------------------------- bias ----


def test_bias_constant_passthrough():
    v = Volume(data=np.full((12, 12, 12), 40.0))
    out = correct_bias(v, sigma_mm=8.0)
    np.testing.assert_allclose(out.data, 40.0, rtol=1e-12)


def test_bias_rejects_negative_voxels():
    v = Volume(data=np.full((4, 4, 4), -1.0) + 0.5)
    with pytest.raises(ValidationError):
        correct_bias(v)


def test_bias_free_phantom_nearly_unchanged(rng):
    v = textured_phantom(rng, corr_vox=1.5)
    out = correct_bias(v, sigma_mm=8.0)  # sigma >= 4x texture correlation length
    rms = np.sqrt(np.mean((out.data - v.data) ** 2))
    assert rms <= 0.02 * v.data.mean()


def test_bias_field_removal_reduces_variation(rng):
    ideal = textured_phantom(rng, dims=(48, 48, 48), corr_vox=1.5)
    nx = ideal.dims[0]
    # multiplicative field, smooth at the volume scale, in [0.7, 1.3]
    x = (np.arange(nx) + 0.5) * np.pi / nx
    field = np.exp(np.log(1.3) * np.cos(x))[:, None, None] * np.ones(ideal.dims)
    assert field.min() >= 0.7 and field.max() <= 1.3
    corrupted = Volume(data=ideal.data * field)
    out = correct_bias(corrupted, sigma_mm=10.0)
    cv_before = (corrupted.data / ideal.data).std() / (corrupted.data / ideal.data).mean()
    cv_after = (out.data / ideal.data).std() / (out.data / ideal.data).mean()
    assert cv_after <= 0.5 * cv_before
    # intensity level preserved
    assert abs(out.data.mean() - corrupted.data.mean()) <= 0.05 * corrupted.data.mean()


def test_bias_never_negative(rng):
    v = textured_phantom(rng, mean=5.0, std=4.0)
    out = correct_bias(v, sigma_mm=10.0)
    assert out.data.min() >= 0.0


# ----------------------------------------------------------------- median ----


def test_median_constant_unchanged():
    v = Volume(data=np.full((5, 5, 5), 3.0))
    out = denoise_median(v, radius_vox=1)
    assert np.all(out.data == 3.0)


def test_median_removes_single_impulse():
    data = np.zeros((7, 7, 7))
    data[3, 3, 3] = 100.0
    out = denoise_median(Volume(data=data), radius_vox=1)
    assert out.data[3, 3, 3] == 0.0
    # idempotent on this output
    again = denoise_median(out, radius_vox=1)
    assert np.array_equal(again.data, out.data)


def test_median_matches_bruteforce(rng):
    data = rng.normal(size=(6, 5, 4))
    out = denoise_median(Volume(data=data), radius_vox=1)
    ref = median_filter_oracle(data, 1)
    np.testing.assert_array_equal(out.data, ref)


def test_median_output_values_subset_of_input(rng):
    data = rng.normal(size=(6, 6, 6))
    out = denoise_median(Volume(data=data), radius_vox=1)
    assert set(out.data.ravel()).issubset(set(data.ravel()))


def test_median_radius_validation(rng):
    with pytest.raises(ValidationError):
        denoise_median(Volume(data=np.zeros((3, 3, 3))), radius_vox=0)


# ------------------------------------------------------------------- nyul ----


def uniform_volume(rng, lo, hi, dims=(10, 10, 10)):
    return Volume(data=rng.uniform(lo, hi, dims))


def test_nyul_two_identical_images(rng):
    v = uniform_volume(rng, 0.0, 50.0)
    model = nyul_train([v, Volume(data=v.data.copy())])
    own = percentile(v.data.ravel(), list(model.ranks))
    mapped = (own - own[0]) * 100.0 / (own[-1] - own[0])
    np.testing.assert_allclose(model.standard_landmarks, mapped, atol=1e-9)


def test_nyul_affine_pair_identical_landmarks(rng):
    u = uniform_volume(rng, 0.0, 30.0)
    v = Volume(data=2.0 * u.data + 5.0)
    model = nyul_train([u, v])
    own_u = percentile(u.data.ravel(), list(model.ranks))
    mapped_u = (own_u - own_u[0]) * 100.0 / (own_u[-1] - own_u[0])
    np.testing.assert_allclose(model.standard_landmarks, mapped_u, atol=1e-9)


def test_nyul_constant_image_degenerate(rng):
    with pytest.raises(ValidationError, match="degenerate"):
        nyul_train([uniform_volume(rng, 0, 10), Volume(data=np.full((4, 4, 4), 2.0))])


def test_nyul_needs_two_images(rng):
    with pytest.raises(ValidationError):
        nyul_train([uniform_volume(rng, 0, 1)])


def test_nyul_apply_identity_when_percentiles_match(rng):
    v = uniform_volume(rng, 0.0, 100.0, dims=(16, 16, 16))
    own = percentile(v.data.ravel(), list(NyulModel(
        ranks=(1, 50, 99), standard_landmarks=(0.0, 50.0, 100.0),
        scale_bounds=(0.0, 100.0)).ranks))
    model = NyulModel(ranks=(1, 50, 99), standard_landmarks=tuple(own),
                      scale_bounds=(0.0, 100.0))
    out = nyul_apply(v, model)
    np.testing.assert_allclose(out.data, v.data, atol=1e-9)


def test_nyul_apply_lands_on_standard_landmarks(rng):
    imgs = [uniform_volume(rng, rng.uniform(0, 10), rng.uniform(40, 120)) for _ in range(6)]
    model = nyul_train(imgs)
    for v in imgs:
        out = nyul_apply(v, model)
        got = percentile(out.data.ravel(), list(model.ranks))
        assert np.abs(np.asarray(got) - np.asarray(model.standard_landmarks)).max() <= 0.5


def test_nyul_apply_monotone(rng):
    imgs = [uniform_volume(rng, 0, 50), uniform_volume(rng, 5, 80)]
    model = nyul_train(imgs)
    v = uniform_volume(rng, 0.0, 60.0)
    out = nyul_apply(v, model)
    flat_in = v.data.ravel()
    flat_out = out.data.ravel()
    idx = rng.integers(0, flat_in.size, size=(1000, 2))
    for i, j in idx:
        a, b = (i, j) if flat_in[i] <= flat_in[j] else (j, i)
        assert flat_out[a] <= flat_out[b] + 1e-12


def test_nyul_apply_affine_invariance(rng):
    imgs = [uniform_volume(rng, 0, 50), uniform_volume(rng, 10, 90)]
    model = nyul_train(imgs)
    v = uniform_volume(rng, 0.0, 70.0)
    out1 = nyul_apply(v, model)
    out2 = nyul_apply(Volume(data=3.0 * v.data + 11.0), model)
    np.testing.assert_allclose(out1.data, out2.data, atol=1e-6)


def test_nyul_spread_reduction(rng):
    """Per-rank landmark spread shrinks at least 5x after standardization."""
    base = [uniform_volume(rng, 0.0, 60.0, dims=(12, 12, 12)) for _ in range(8)]
    distorted = [
        Volume(data=base[i].data * rng.uniform(0.6, 1.9) + rng.uniform(-5.0, 25.0))
        for i in range(len(base))
    ]
    ranks = list(NyulModel(ranks=(1, 25, 50, 75, 99),
                           standard_landmarks=(0, 25, 50, 75, 100),
                           scale_bounds=(0, 100)).ranks)
    model = nyul_train(distorted, ranks=tuple(ranks))
    before = np.stack([percentile(v.data.ravel(), ranks) for v in distorted])
    after = np.stack(
        [percentile(nyul_apply(v, model).data.ravel(), ranks) for v in distorted]
    )
    mid = slice(1, -1)  # tail anchors map exactly by construction
    spread_before = before.std(axis=0)[mid].mean()
    spread_after = after.std(axis=0)[mid].mean()
    assert spread_after <= spread_before / 5.0


def test_nyul_model_roundtrip(tmp_path):
    model = NyulModel(ranks=(1, 50, 99), standard_landmarks=(0.0, 40.0, 100.0),
                      scale_bounds=(0.0, 100.0))
    path = tmp_path / "nyul.json"
    model.save(path)
    back = NyulModel.load(path)
    assert back == model


def test_nyul_model_invariants():
    with pytest.raises(ValidationError):
        NyulModel(ranks=(1, 50), standard_landmarks=(0.0, 1.0), scale_bounds=(0, 1))
    with pytest.raises(ValidationError):
        NyulModel(ranks=(1, 50, 99), standard_landmarks=(0.0, 2.0, 1.0),
                  scale_bounds=(0, 100))
    with pytest.raises(ValidationError):
        NyulModel(ranks=(1, 99, 50), standard_landmarks=(0.0, 1.0, 2.0),
                  scale_bounds=(0, 100))


def test_nyul_mask_restricted_training(rng):
    v = uniform_volume(rng, 0.0, 50.0)
    mask = np.zeros(v.dims, bool)
    mask[2:8, 2:8, 2:8] = True
    m = Mask(data=mask)
    model = nyul_train([v, Volume(data=v.data * 1.5)], masks=[m, m])
    own = percentile(v.data[mask], list(model.ranks))
    mapped = (own - own[0]) * 100.0 / (own[-1] - own[0])
    np.testing.assert_allclose(model.standard_landmarks, mapped, atol=1e-9)
