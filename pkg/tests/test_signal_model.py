import threading

import numpy as np
import pytest

from dyadic_haar.dyadic_core import CubeRef, InvalidCubeError, random_family
from dyadic_haar.families_2d import make_family
from dyadic_haar.signal_model import (
    AnalyticField,
    GeometryError,
    PGMError,
    Signal,
    cube_mean,
    f1_cell_mean,
    image_to_signal,
    load_pgm,
    parse_field,
    sample_field,
)

from oracles import binary_family, f1_exact_mean


class TestFields:
    def test_f1_peak(self):
        assert AnalyticField.F1().pointwise(0.025, 0.3) == pytest.approx(255.0)

    def test_constant_is_exact(self):
        sig = sample_field(AnalyticField.constant(7), make_family("squares", 3), 3, quad=1)
        assert np.all(sig.cell_means == 7.0)

    def test_constant_on_family_without_geometry(self, rng):
        fam = random_family(rng, 3)
        sig = sample_field(AnalyticField.constant(-2), fam, 3)
        assert cube_mean(sig, CubeRef(0, 0)) == pytest.approx(-2)

    def test_closed_form_matches_oracle(self):
        a = np.array([0.0, 0.013, 0.4])
        b = np.array([0.05, 0.2, 0.9])
        for x0, x1, v in zip(a, b, f1_cell_mean(a, b)):
            assert v == pytest.approx(f1_exact_mean(x0, x1), rel=1e-12)

    def test_quadrature_converges(self, rng):
        fam = make_family("squares", 6)
        cells = rng.choice(fam.level_size(6), size=100, replace=False)
        rects = fam.cell_rects(6)[cells]
        exact = np.array([f1_exact_mean(r[0], r[1]) for r in rects])
        errors = []
        for q in (1, 2, 4, 8, 16):
            sig = sample_field(AnalyticField.F1(), fam, 6, q)
            errors.append(np.max(np.abs(sig.cell_means[cells] - exact)))
        assert all(e2 <= e1 * (1 + 1e-9) + 1e-12 for e1, e2 in zip(errors, errors[1:]))
        # second-order rule: four doublings shrink the error about 256-fold
        assert errors[-1] < errors[0] / 100

    def test_rect_path_agrees_with_grid_path(self):
        from dyadic_haar.dyadic_core import family_from_dict, family_to_dict

        grid = make_family("parabolic", 2)
        explicit = family_from_dict(family_to_dict(grid))
        a = sample_field(AnalyticField.F2(), grid, 2, (3, 2))
        b = sample_field(AnalyticField.F2(), explicit, 2, (3, 2))
        np.testing.assert_allclose(a.cell_means, b.cell_means, rtol=1e-12)

    def test_indicator_exact(self):
        fam = binary_family(3)
        sig = sample_field(AnalyticField.indicator(CubeRef(1, 1)), fam, 3)
        np.testing.assert_array_equal(sig.cell_means, [0, 0, 0, 0, 1, 1, 1, 1])
        coarse = sample_field(AnalyticField.indicator(CubeRef(2, 1)), fam, 1)
        np.testing.assert_array_equal(coarse.cell_means, [0.5, 0])

    def test_haar_field_is_its_basis_function(self):
        fam = binary_family(2)
        sig = sample_field(AnalyticField.haar(CubeRef(0, 0)), fam, 2)
        np.testing.assert_allclose(sig.cell_means, [1, 1, -1, -1])

    def test_g_cutoff(self):
        fam = make_family("bands", 3)
        sig = sample_field(AnalyticField.G(3), fam, 3, (4, 1))
        assert np.all(sig.cell_means[4:] == 0.0)
        assert np.any(sig.cell_means[:4] > 0)
        with pytest.raises(ValueError):
            AnalyticField.G(6)

    def test_errors(self, rng):
        with pytest.raises(GeometryError):
            sample_field(AnalyticField.F1(), random_family(rng, 2), 2)
        with pytest.raises(InvalidCubeError):
            sample_field(AnalyticField.F1(), make_family("squares", 2), 3)
        with pytest.raises(ValueError):
            sample_field(AnalyticField.F1(), make_family("squares", 2), 2, 0)

    @pytest.mark.parametrize("spec", ["F1", "F2", "G4", "constant:2.5", "indicator:1:0", "haar:2:3:1"])
    def test_parse_field(self, spec):
        assert parse_field(spec).kind in ("F1", "F2", "G", "constant", "indicator", "haar")

    @pytest.mark.parametrize("spec", ["F3", "G9", "constant:x", "haar:1", "nothing"])
    def test_parse_field_rejects(self, spec):
        with pytest.raises(ValueError):
            parse_field(spec)


class TestSignal:
    def test_cube_mean_examples(self):
        fam = binary_family(1)
        sig = Signal(fam, 1, [1.0, 0.0])
        assert cube_mean(sig, CubeRef(1, 0)) == 1.0
        assert cube_mean(sig, CubeRef(0, 0)) == 0.5

    def test_cube_below_level(self):
        fam = binary_family(3)
        sig = Signal(fam, 2, np.zeros(4))
        with pytest.raises(InvalidCubeError):
            cube_mean(sig, CubeRef(3, 0))

    def test_length_checked(self):
        with pytest.raises(ValueError):
            Signal(binary_family(2), 2, [1.0, 2.0])

    def test_root_integral_invariant(self, rng):
        fam = random_family(rng, 4)
        means = rng.uniform(0, 255, fam.level_size(4))
        sig = Signal(fam, 4, means)
        assert sig.integrals(0)[0] == pytest.approx(np.sum(means * fam.measures(4)), rel=1e-9)

    def test_mean_consistency(self, rng):
        fam = random_family(rng, 4, max_fanout=5)
        sig = Signal(fam, 4, rng.normal(size=fam.level_size(4)))
        for j in range(4):
            kids = fam.children_matrix(j)
            mu = fam.measures(j + 1)
            for k in range(fam.level_size(j)):
                c = kids[k][kids[k] >= 0]
                expected = np.sum(sig.means(j + 1)[c] * mu[c]) / fam.measures(j)[k]
                assert abs(sig.means(j)[k] - expected) < 1e-12

    def test_immutable(self):
        sig = Signal(binary_family(1), 1, [1.0, 2.0])
        with pytest.raises(ValueError):
            sig.cell_means[0] = 3.0

    def test_concurrent_cache_build(self, rng):
        fam = make_family("squares", 6)
        sig = Signal(fam, 6, rng.normal(size=fam.level_size(6)))
        results = []

        def work():
            results.append(sig.integrals(0)[0])

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(set(results)) == 1

    def test_csv_export(self):
        sig = Signal(binary_family(1), 1, [1.0, 0.25])
        assert sig.to_csv() == "index,measure,mean\n0,0.5,1\n1,0.5,0.25\n"


TWO_BY_TWO = [0, 255, 128, 64]


class TestPGM:
    def test_plain_minimal(self):
        img = load_pgm(b"P2 2 2 255 0 255 128 64")
        assert (img.width, img.height, img.maxval) == (2, 2, 255)
        assert list(img.samples) == TWO_BY_TWO

    def test_binary_with_comment(self):
        raw = bytes(TWO_BY_TWO)
        plain = load_pgm(b"P5\n2 2\n255\n" + raw)
        commented = load_pgm(b"P5\n# made by hand\n2 2\n# depth\n255\n" + raw)
        assert list(plain.samples) == list(commented.samples) == TWO_BY_TWO

    def test_truncated_raster(self):
        data = b"P5\n2 2\n255\n" + bytes(TWO_BY_TWO[:3])
        with pytest.raises(PGMError) as exc:
            load_pgm(data)
        assert exc.value.offset == len(data)
        assert "offset" in str(exc.value)

    def test_sixteen_bit_big_endian(self):
        img = load_pgm(b"P5 2 1 65535\n" + bytes([0x01, 0x02, 0xFF, 0xFF]))
        assert list(img.samples) == [0x0102, 0xFFFF]

    def test_bad_magic(self):
        with pytest.raises(PGMError) as exc:
            load_pgm(b"P6 1 1 255 0")
        assert exc.value.offset == 0

    def test_sample_above_maxval(self):
        with pytest.raises(PGMError) as exc:
            load_pgm(b"P2 2 1 10 3 11")
        assert exc.value.offset == len(b"P2 2 1 10 3 ")

    def test_plain_truncated(self):
        with pytest.raises(PGMError):
            load_pgm(b"P2 2 2 255 0 1 2")

    def test_bad_header_token(self):
        with pytest.raises(PGMError):
            load_pgm(b"P2 2 x 255 0 1")


class TestImageToSignal:
    def test_one_pixel_per_cell(self):
        img = load_pgm(b"P2 2 2 255 0 255 128 64")
        sig = image_to_signal(img, make_family("squares", 1), 1)
        np.testing.assert_array_equal(sig.cell_means, TWO_BY_TWO)

    def test_level_zero_mean(self):
        img = load_pgm(b"P2 2 2 255 0 255 128 64")
        sig = image_to_signal(img, make_family("squares", 1), 0)
        assert sig.cell_means[0] == 111.75

    def test_bands_average_their_pixels(self, rng):
        pix = rng.integers(0, 256, size=16)
        img = load_pgm(b"P2 4 4 255 " + " ".join(map(str, pix)).encode())
        sig = image_to_signal(img, make_family("bands", 1), 1)
        grid = pix.reshape(4, 4)
        np.testing.assert_allclose(sig.cell_means, [grid[:, :2].mean(), grid[:, 2:].mean()], rtol=1e-15)

    def test_global_mean(self, rng):
        pix = rng.integers(0, 65536, size=64 * 16)
        img = load_pgm(b"P2 64 16 65535 " + " ".join(map(str, pix)).encode())
        sig = image_to_signal(img, make_family("parabolic", 2), 2)
        assert cube_mean(sig, CubeRef(0, 0)) == pytest.approx(pix.mean(), rel=1e-12)

    def test_non_divisible_names_axis(self):
        img = load_pgm(b"P2 3 2 255 " + b"1 " * 6)
        with pytest.raises(GeometryError, match="x axis"):
            image_to_signal(img, make_family("squares", 1), 1)
        img = load_pgm(b"P2 2 3 255 " + b"1 " * 6)
        with pytest.raises(GeometryError, match="y axis"):
            image_to_signal(img, make_family("squares", 1), 1)

    def test_explicit_geometry(self):
        img = load_pgm(b"P2 4 1 255 0 10 20 30")
        sig = image_to_signal(img, binary_family(2, rects=True), 2)
        np.testing.assert_array_equal(sig.cell_means, [0, 10, 20, 30])
