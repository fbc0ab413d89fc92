import io

import numpy as np
import pytest
from PIL import Image, JpegImagePlugin
from scipy import ndimage

from asw import distortions as X

S = X.DistortionSpec


@pytest.fixture
def img(photos64):
    return photos64[0]


@pytest.mark.parametrize("spec", [S("gaussian_noise", 0), S("resize", 1.0), S("brightness", 1.0),
                                  S("contrast", 1.0), S("saturation", 1.0), S("cropout", 0.0),
                                  S("rotation", 0), S("salt_pepper", 0.0), S("poisson_noise", 0.0)])
def test_neutral_levels_are_identity(img, spec):
    np.testing.assert_array_equal(X.apply(img, spec, img), img)


def test_salt_pepper_fraction():
    big = np.full((256, 256, 3), 128, np.uint8)
    out = X.apply(big, S("salt_pepper", 0.05, noise_seed=3))
    hit = np.any(out != 128, axis=2)
    assert abs(hit.mean() - 0.05) <= 0.01
    # whole pixels flip together, to 0 or 255
    vals = out[hit]
    assert np.all((vals == 0).all(axis=1) | (vals == 255).all(axis=1))


def test_deterministic_in_seed(img):
    a = X.apply(img, S("gaussian_noise", 8 / 255, 5))
    np.testing.assert_array_equal(a, X.apply(img, S("gaussian_noise", 8 / 255, 5)))
    assert not np.array_equal(a, X.apply(img, S("gaussian_noise", 8 / 255, 6)))


@pytest.mark.parametrize("spec", [S("jpeg", 0), S("jpeg", 50.5), S("gaussian_blur", 4),
                                  S("median_blur", 1), S("salt_pepper", 1.5), S("resize", 0),
                                  S("resize", 2.5), S("cropout", -0.1), S("nope", 1),
                                  S("resize", 0.5, axis="height")])
def test_invalid_parameters(img, spec):
    with pytest.raises(X.DistortionError):
        X.apply(img, spec, img)


def test_cropout_needs_host(img):
    with pytest.raises(X.DistortionError):
        X.apply(img, S("cropout", 0.5))


def test_cropout_area(img):
    host = np.zeros_like(img)
    src = np.full_like(img, 200)
    out = X.apply(src, S("cropout", 0.75, 2), host)
    assert abs((out[..., 0] == 0).mean() - 0.75) < 0.03


def test_jpeg_is_jfif_420(img):
    data = X.jpeg_bytes(img, 50)
    assert data[:2] == b"\xff\xd8" and b"JFIF" in data[:20]
    with Image.open(io.BytesIO(data)) as im:
        assert JpegImagePlugin.get_sampling(im) == 2
    assert np.abs(X.apply(img, S("jpeg", 95)).astype(int) - img).mean() < \
        np.abs(X.apply(img, S("jpeg", 30)).astype(int) - img).mean()


def test_gaussian_blur_reference(img):
    k = 7
    sigma = 0.3 * ((k - 1) / 2 - 1) + 0.8
    g = np.exp(-(np.arange(k) - 3) ** 2 / (2 * sigma ** 2))
    g /= g.sum()
    ref = img.astype(float)
    for ax in (0, 1):
        ref = ndimage.correlate1d(ref, g, axis=ax, mode="reflect")
    np.testing.assert_array_equal(X.apply(img, S("gaussian_blur", 7)), np.floor(ref + 0.5).astype(np.uint8))


def test_median_blur_reference(img):
    out = X.apply(img, S("median_blur", 3))
    y, x = 20, 30
    assert np.array_equal(out[y, x], np.median(img[y - 1:y + 2, x - 1:x + 2].reshape(9, 3), axis=0))


def test_photometric(img):
    np.testing.assert_array_equal(X.apply(img, S("brightness", 0.5)),
                                  np.floor(img * 0.5 + 0.5).astype(np.uint8))
    gray = X.apply(img, S("saturation", 0.0))
    assert np.all(np.abs(gray.astype(int) - gray[..., :1]) <= 1)
    flat = X.apply(img, S("contrast", 0.0))
    assert len(np.unique(flat)) == 1
    assert X.apply(img, S("brightness", 3.0)).max() == 255


def test_resize_width_changes_only_columns():
    ramp = np.tile(np.arange(64, dtype=np.uint8)[None, :, None] * 4, (64, 1, 3))
    out = X.apply(ramp, S("resize", 0.5, axis="width"))
    assert out.shape == ramp.shape
    assert np.all(out == out[:1])


def test_rotation_back_matches_reference():
    from asw import corpus
    img = corpus.desk_corpus(1, 128)[0][1]
    deg = 15.0
    # reference: the same two bilinear rotations done by scipy
    def rot(a, d):
        t = np.radians(d)
        c = (np.array(a.shape[:2]) - 1) / 2
        m = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        off = c - m @ c
        return np.stack([ndimage.affine_transform(a[..., i].astype(float), m, off, order=1,
                                                  mode="constant", cval=0.0) for i in range(3)], -1)
    ref = np.floor(np.clip(rot(np.floor(np.clip(rot(img, deg), 0, 255) + 0.5), -deg), 0, 255) + 0.5)
    out = X.apply(img, S("rotation", deg))
    yy, xx = np.mgrid[:128, :128]
    disk = (yy - 63.5) ** 2 + (xx - 63.5) ** 2 <= (0.4 * 128) ** 2
    assert np.abs(out[disk].astype(int) - ref[disk]).max() <= 2


def test_orthogonal_noise():
    pair = X.make_orthogonal_noise((3, 128, 128), 0.1, 4)
    assert np.vdot(pair.n_plus, pair.n_minus) == 0
    assert np.all(pair.n_plus[~pair.mask] == 0) and np.all(pair.n_minus[pair.mask] == 0)
    nz = pair.n_plus[pair.mask]
    assert nz.size > 10_000 and abs(nz.std() - 0.1) < 0.003
    z = X.make_orthogonal_noise((3, 8, 8), 0.0, 4)
    assert not z.n_plus.any() and not z.n_minus.any()
    with pytest.raises(X.DistortionError):
        X.make_orthogonal_noise((3, 8, 8), -1, 0)
