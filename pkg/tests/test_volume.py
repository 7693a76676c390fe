"""Blur, dilation, inversion, and volume file IO."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from crackseg3d import (
    CorruptFileError,
    FormatError,
    ParameterError,
    dilate,
    gaussian_blur,
    invert,
    read_volume,
    write_volume,
)
from crackseg3d.volume import gaussian_kernel1d


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def dense_blur_oracle(vol, sigma):
    """Direct dense 3d convolution with the sampled, truncated kernel."""
    k = gaussian_kernel1d(sigma)
    kernel = k[:, None, None] * k[None, :, None] * k[None, None, :]
    return ndimage.correlate(vol.astype(np.float64), kernel, mode="mirror")


def brute_dilate_oracle(mask, width):
    """Set a voxel if any voxel of the cube neighborhood is set."""
    r = width // 2
    out = np.zeros_like(mask)
    nz, ny, nx = mask.shape
    for z, y, x in np.argwhere(mask):
        out[
            max(0, z - r):min(nz, z + r + 1),
            max(0, y - r):min(ny, y + r + 1),
            max(0, x - r):min(nx, x + r + 1),
        ] = True
    return out


# ---------------------------------------------------------------------------
# Gaussian blur
# ---------------------------------------------------------------------------

def test_blur_matches_dense_convolution():
    rng = np.random.default_rng(0)
    vol = rng.random((9, 10, 11)).astype(np.float32)
    for sigma in (0.5, 1.0, 2.0):
        got = gaussian_blur(vol, sigma)
        want = dense_blur_oracle(vol, sigma)
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-6)


def test_blur_sigma_zero_is_identity_copy():
    vol = np.random.default_rng(1).random((6, 6, 6)).astype(np.float32)
    out = gaussian_blur(vol, 0.0)
    assert out is not vol
    np.testing.assert_array_equal(out, vol)


def test_blur_rejects_sub_half_sigma():
    vol = np.zeros((4, 4, 4), np.float32)
    with pytest.raises(ParameterError):
        gaussian_blur(vol, 0.3)
    with pytest.raises(ParameterError):
        gaussian_blur(vol, -1.0)


def test_kernel_is_normalized_and_symmetric():
    for sigma in (0.5, 1.3, 4.0):
        k = gaussian_kernel1d(sigma)
        assert len(k) == 2 * int(np.ceil(4 * sigma)) + 1
        assert abs(k.sum() - 1.0) < 1e-12
        np.testing.assert_allclose(k, k[::-1])


def test_blur_preserves_constant_volume():
    vol = np.full((8, 8, 8), 3.25, np.float32)
    out = gaussian_blur(vol, 1.5)
    np.testing.assert_allclose(out, vol, rtol=1e-6)


@given(
    sigma=st.sampled_from([1.0, 1.4, 1.7]),
    seed=st.integers(0, 50),
)
@settings(max_examples=20, deadline=None)
def test_blur_semigroup_on_interior(sigma, seed):
    # blur(blur(v, s), s) ~ blur(v, s*sqrt(2)) away from the boundary;
    # only approximate for the sampled kernel, so sigma >= 1 and loose atol
    rng = np.random.default_rng(seed)
    vol = rng.random((24, 24, 24)).astype(np.float32)
    twice = gaussian_blur(gaussian_blur(vol, sigma), sigma)
    once = gaussian_blur(vol, sigma * np.sqrt(2.0))
    pad = int(np.ceil(4 * sigma * np.sqrt(2)))
    core = (slice(pad, -pad),) * 3
    np.testing.assert_allclose(twice[core], once[core], atol=2e-3)


# ---------------------------------------------------------------------------
# Dilation / inversion
# ---------------------------------------------------------------------------

def test_dilate_matches_brute_force():
    rng = np.random.default_rng(2)
    for width in (1, 3, 5):
        mask = rng.random((10, 9, 8)) < 0.05
        np.testing.assert_array_equal(
            dilate(mask, width), brute_dilate_oracle(mask, width)
        )


def test_dilate_width_one_is_identity():
    mask = np.random.default_rng(3).random((7, 7, 7)) < 0.2
    np.testing.assert_array_equal(dilate(mask, 1), mask)


def test_dilate_rejects_even_width():
    with pytest.raises(ParameterError):
        dilate(np.zeros((3, 3, 3), bool), 2)


def test_dilate_single_voxel_gives_full_cube():
    mask = np.zeros((9, 9, 9), bool)
    mask[4, 4, 4] = True
    out = dilate(mask, 5)
    assert out.sum() == 125
    assert out[2:7, 2:7, 2:7].all()


@given(seed=st.integers(0, 100), width=st.sampled_from([3, 5]))
@settings(max_examples=25, deadline=None)
def test_dilate_is_monotone_and_extensive(seed, width):
    rng = np.random.default_rng(seed)
    a = rng.random((8, 8, 8)) < 0.1
    b = a | (rng.random((8, 8, 8)) < 0.05)
    da, db = dilate(a, width), dilate(b, width)
    assert (a <= da).all()            # extensive
    assert (da <= db).all()           # monotone in the input


def test_invert_flips_about_max():
    vol = np.array([[[0.0, 1.0], [2.0, 5.0]]], np.float32)
    out = invert(vol)
    np.testing.assert_array_equal(out, 5.0 - vol)
    # involution up to the (shared) maximum
    np.testing.assert_allclose(invert(out), vol + (out.max() - 5.0))


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

def test_roundtrip_gray_is_bit_exact(tmp_path):
    vol = np.random.default_rng(4).random((5, 6, 7)).astype(np.float32)
    path = tmp_path / "v.raw"
    write_volume(path, vol)
    back = read_volume(path)
    assert back.dtype == np.float32
    assert back.shape == vol.shape
    assert vol.tobytes() == back.tobytes()


def test_roundtrip_mask(tmp_path):
    mask = np.random.default_rng(5).random((4, 5, 6)) < 0.3
    path = tmp_path / "m.raw"
    write_volume(path, mask)
    back = read_volume(path)
    assert back.dtype == np.bool_
    np.testing.assert_array_equal(back, mask)


def test_header_records_xyz_dims_and_order(tmp_path):
    import json

    vol = np.zeros((2, 3, 4), np.float32)  # (nz, ny, nx)
    path = tmp_path / "v.raw"
    write_volume(path, vol)
    header = json.loads((tmp_path / "v.raw.json").read_text())
    assert header["dims"] == [4, 3, 2]     # [nx, ny, nz]
    assert header["order"] == "x-fastest"
    assert header["dtype"] == "f32"
    assert header["kind"] == "gray"


def test_raw_blob_is_x_fastest(tmp_path):
    vol = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    path = tmp_path / "v.raw"
    write_volume(path, vol)
    blob = np.frombuffer(path.read_bytes(), dtype="<f4")
    # C-order ravel of [z][y][x] is x-fastest
    np.testing.assert_array_equal(blob, vol.ravel())


def test_truncated_blob_raises_corrupt(tmp_path):
    vol = np.zeros((4, 4, 4), np.float32)
    path = tmp_path / "v.raw"
    write_volume(path, vol)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(CorruptFileError):
        read_volume(path)


def test_unknown_dtype_raises_format(tmp_path):
    import json

    vol = np.zeros((2, 2, 2), np.float32)
    path = tmp_path / "v.raw"
    write_volume(path, vol)
    header = json.loads((tmp_path / "v.raw.json").read_text())
    header["dtype"] = "f64"
    (tmp_path / "v.raw.json").write_text(json.dumps(header))
    with pytest.raises(FormatError):
        read_volume(path)


def test_missing_sidecar_raises_format(tmp_path):
    path = tmp_path / "v.raw"
    path.write_bytes(b"\x00" * 32)
    with pytest.raises(FormatError):
        read_volume(path)
