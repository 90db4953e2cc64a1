import numpy as np
import pytest

from svdeconv.spectral import (
    as_image,
    center_index,
    centered_delta,
    convolve_anisoplanatic,
    convolve_direct,
    convolve_spectral,
    dft2,
    idft2,
    kernel_spectrum,
)


def direct_conv_oracle(obj, kernel):
    """Double-loop circular convolution with a centered kernel."""
    m, n = obj.shape
    c0, c1 = center_index(obj.shape)
    out = np.zeros_like(obj)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for k in range(m):
                for l in range(n):
                    acc += obj[k, l] * kernel[(c0 + i - k) % m, (c1 + j - l) % n]
            out[i, j] = acc
    return out


def anisoplanatic_oracle(obj, psf_at):
    """Quadruple-loop summation over source pixels and their PSFs."""
    m, n = obj.shape
    c0, c1 = center_index(obj.shape)
    out = np.zeros_like(obj)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for k in range(m):
                for l in range(n):
                    acc += obj[k, l] * psf_at(k, l)[(c0 + i - k) % m, (c1 + j - l) % n]
            out[i, j] = acc
    return out


class TestDft:
    @pytest.mark.parametrize("shape", [(8, 8), (16, 16), (17, 19), (64, 64), (8, 19)])
    def test_round_trip(self, shape):
        rng = np.random.default_rng(hash(shape) % 2**32)
        img = rng.random(shape)
        back = idft2(dft2(img)).real
        assert np.linalg.norm(back - img) / np.linalg.norm(img) < 1e-10

    def test_constant_image_dc_bin(self):
        img = np.full((12, 10), 3.5)
        spec = dft2(img)
        assert spec[0, 0] == pytest.approx(3.5 * 12 * 10)
        off_dc = spec.copy()
        off_dc[0, 0] = 0
        assert np.abs(off_dc).max() < 1e-9

    def test_origin_delta_is_flat(self):
        img = np.zeros((9, 7))
        img[0, 0] = 1.0
        assert np.allclose(dft2(img), 1.0)

    def test_rejects_non_finite(self):
        img = np.ones((4, 4))
        img[2, 2] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            dft2(img)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            as_image(np.ones(5))


class TestKernelSpectrum:
    @pytest.mark.parametrize("shape", [(16, 16), (9, 9), (8, 13)])
    def test_centered_delta_gives_unit_spectrum(self, shape):
        spec = kernel_spectrum(centered_delta(shape))
        assert np.abs(spec - 1.0).max() < 1e-12

    def test_shifted_delta_is_pure_phase(self):
        shape = (16, 16)
        kernel = np.zeros(shape)
        c0, c1 = center_index(shape)
        kernel[c0 + 1, c1] = 1.0
        spec = kernel_spectrum(kernel)
        assert np.abs(np.abs(spec) - 1.0).max() < 1e-12
        # one-pixel shift: phase ramp along the row axis only
        expected = np.exp(-2j * np.pi * np.fft.fftfreq(16))[:, None] * np.ones(16)
        assert np.abs(spec - expected).max() < 1e-12

    def test_dc_equals_kernel_sum(self):
        shape = (16, 16)
        c0, c1 = center_index(shape)
        yy, xx = np.indices(shape)
        kernel = np.exp(-((yy - c0) ** 2 + (xx - c1) ** 2) / 4.0)
        spec = kernel_spectrum(kernel)
        assert spec[0, 0] == pytest.approx(kernel.sum(), rel=1e-12)
        assert abs(spec[0, 0].imag) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            convolve_spectral(np.ones((8, 8)), np.ones((8, 9)))


class TestConvolveDirect:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        obj = rng.random((11, 13))
        out = convolve_direct(obj, centered_delta(obj.shape))
        assert np.abs(out - obj).max() < 1e-12

    def test_flux_conservation(self):
        rng = np.random.default_rng(1)
        obj = rng.random((10, 10))
        kernel = rng.random((10, 10))
        out = convolve_direct(obj, kernel)
        assert out.sum() == pytest.approx(obj.sum() * kernel.sum(), rel=1e-12)

    def test_matches_double_loop_oracle_and_spectral_path(self):
        rng = np.random.default_rng(2)
        obj = rng.random((8, 8))
        kernel = rng.random((8, 8))
        direct = convolve_direct(obj, kernel)
        oracle = direct_conv_oracle(obj, kernel)
        spectral = convolve_spectral(obj, kernel)
        assert np.abs(direct - oracle).max() < 1e-10
        assert np.linalg.norm(direct - spectral) / np.linalg.norm(direct) < 1e-8

    def test_linearity(self):
        rng = np.random.default_rng(3)
        o1, o2 = rng.random((9, 9)), rng.random((9, 9))
        kernel = rng.random((9, 9))
        lhs = convolve_direct(2.0 * o1 + 3.0 * o2, kernel)
        rhs = 2.0 * convolve_direct(o1, kernel) + 3.0 * convolve_direct(o2, kernel)
        assert np.abs(lhs - rhs).max() < 1e-10


class TestConvolveAnisoplanatic:
    def test_constant_field_equals_direct(self):
        rng = np.random.default_rng(4)
        obj = rng.random((10, 12))
        kernel = rng.random((10, 12))
        kernel /= kernel.sum()
        aniso = convolve_anisoplanatic(obj, lambda k, l: kernel)
        direct = convolve_direct(obj, kernel)
        assert np.abs(aniso - direct).max() < 1e-10

    def test_pure_translation_field(self):
        rng = np.random.default_rng(5)
        obj = rng.random((8, 8))
        shifted_delta = np.zeros((8, 8))
        c0, c1 = center_index((8, 8))
        shifted_delta[c0, c1 + 1] = 1.0
        out = convolve_anisoplanatic(obj, lambda k, l: shifted_delta)
        assert np.abs(out - np.roll(obj, 1, axis=1)).max() < 1e-12

    def test_two_region_field_matches_quadruple_loop(self):
        rng = np.random.default_rng(6)
        obj = rng.random((8, 8))
        blur_a = rng.random((8, 8))
        blur_a /= blur_a.sum()
        blur_b = rng.random((8, 8))
        blur_b /= blur_b.sum()
        psf_at = lambda k, l: blur_a if l < 4 else blur_b
        out = convolve_anisoplanatic(obj, psf_at)
        oracle = anisoplanatic_oracle(obj, psf_at)
        assert np.abs(out - oracle).max() < 1e-12

    def test_flux_conservation(self):
        rng = np.random.default_rng(7)
        obj = rng.random((8, 8))
        kernels = [rng.random((8, 8)) for _ in range(3)]
        kernels = [k / k.sum() for k in kernels]
        out = convolve_anisoplanatic(obj, lambda k, l: kernels[(k + l) % 3])
        assert out.sum() == pytest.approx(obj.sum(), abs=1e-8)

    def test_rejects_unnormalized_psf(self):
        obj = np.ones((6, 6))
        with pytest.raises(ValueError, match="normalized"):
            convolve_anisoplanatic(obj, lambda k, l: np.full((6, 6), 0.5))
