import numpy as np
import pytest

from swigner.grid import (
    Axis,
    ComplexField1D,
    field_from_callable,
    field_to_csv,
    forward_ft,
    inner_product,
    inverse_ft,
    l2_norm,
    load_field,
    make_axis,
    save_field,
    spectral_derivative,
)


def gaussian_field(n=1024, half=8.0):
    ax = make_axis(-half, 2 * half / n, n)
    return field_from_callable(ax, lambda x: np.exp(-np.pi * x * x))


def test_make_axis_samples():
    ax = make_axis(-1.0, 0.5, 5)
    assert np.allclose(ax.values, [-1.0, -0.5, 0.0, 0.5, 1.0])
    ax2 = make_axis(0.0, 1.0, 2)
    assert np.allclose(ax2.values, [0.0, 1.0])


def test_make_axis_validation():
    with pytest.raises(ValueError):
        make_axis(0.0, 0.0, 8)
    with pytest.raises(ValueError):
        make_axis(0.0, -0.1, 8)
    with pytest.raises(ValueError):
        make_axis(0.0, 1.0, 1)


def test_dual_axis_step():
    ax = make_axis(-8.0, 1.0 / 64, 1024)
    assert ax.dual().step == pytest.approx(1.0 / 16, abs=1e-15)
    # dual of the dual recovers the original spacing
    assert ax.dual().dual().step == pytest.approx(ax.step, abs=1e-15)


def test_forward_ft_self_dual_gaussian():
    f = gaussian_field()
    F = forward_ft(f)
    assert np.max(np.abs(F.values - np.exp(-np.pi * F.axis.values**2))) < 1e-10


def test_forward_ft_zero():
    ax = make_axis(-4.0, 8.0 / 256, 256)
    F = forward_ft(ComplexField1D(ax, np.zeros(256)))
    assert np.max(np.abs(F.values)) == 0.0


def test_forward_ft_modulated_gaussian_vs_quadrature():
    # oracle: direct rectangle-rule sum of the defining integral
    f = gaussian_field()
    mod = ComplexField1D(f.axis, f.values * np.exp(2j * np.pi * 3.0 * f.axis.values))
    F = forward_ft(mod)
    x = f.axis.values
    for k in (-1.0, 0.0, 2.5, 3.0, 4.0):
        direct = f.axis.step * np.sum(mod.values * np.exp(-2j * np.pi * k * x))
        i = F.axis.index_of(k) if abs(k / F.axis.step - round(k / F.axis.step)) < 1e-9 else None
        if i is not None:
            assert abs(F.values[i] - direct) < 1e-8
        # analytic check at arbitrary k
        assert abs(direct - np.exp(-np.pi * (k - 3.0) ** 2)) < 1e-8


def test_round_trip_and_parseval():
    ax = make_axis(-8.0, 16.0 / 1024, 1024)
    f = field_from_callable(
        ax, lambda x: np.exp(-0.7 * np.pi * (x - 0.5) ** 2 + 2j * np.pi * 1.3 * x)
    )
    back = inverse_ft(forward_ft(f), ax)
    rel = l2_norm(ComplexField1D(ax, back.values - f.values)) / l2_norm(f)
    assert rel < 1e-12
    assert abs(l2_norm(forward_ft(f)) - l2_norm(f)) / l2_norm(f) < 1e-10


def test_double_transform_is_parity():
    n = 512
    ax = make_axis(-(n // 2) * (16.0 / n), 16.0 / n, n)
    f = field_from_callable(
        ax, lambda x: np.exp(-np.pi * (x - 0.4) ** 2 + 2j * np.pi * 0.9 * x)
    )
    ff = forward_ft(forward_ft(f))
    reversed_vals = np.roll(f.values[::-1], 1)
    assert np.max(np.abs(ff.values - reversed_vals)) < 1e-10


def test_spectral_derivative_gaussian():
    f = gaussian_field()
    d1 = spectral_derivative(f, 1)
    x = f.axis.values
    assert np.max(np.abs(d1.values - (-2 * np.pi * x) * np.exp(-np.pi * x * x))) < 1e-8


def test_spectral_derivative_order_zero_and_sin():
    f = gaussian_field(n=256, half=4.0)
    assert np.array_equal(spectral_derivative(f, 0).values, f.values)
    ax = make_axis(0.0, 1.0 / 256, 256)  # exactly one period of sin(2 pi x)
    s = field_from_callable(ax, lambda x: np.sin(2 * np.pi * x))
    d2 = spectral_derivative(s, 2)
    assert np.max(np.abs(d2.values + 4 * np.pi**2 * s.values)) < 1e-8


def test_inner_product_matches_norm():
    f = gaussian_field(n=512)
    assert inner_product(f, f).real == pytest.approx(l2_norm(f) ** 2, rel=1e-12)


def test_field_binary_round_trip(tmp_path):
    ax = make_axis(-2.0, 4.0 / 64, 64)
    f = field_from_callable(ax, lambda x: np.exp(-x * x) * (1 + 2j * x))
    path = str(tmp_path / "f.psf1")
    save_field(path, f)
    g = load_field(path)
    assert g.axis == ax
    assert np.array_equal(g.values, f.values)


def test_field_csv(tmp_path):
    ax = make_axis(0.0, 0.5, 4)
    f = ComplexField1D(ax, np.array([1 + 2j, 0, -1j, 3.5]))
    path = str(tmp_path / "f.csv")
    field_to_csv(path, f)
    lines = open(path).read().splitlines()
    assert lines[0] == "x,re,im"
    assert len(lines) == 5
    assert lines[1].startswith("0.0,1.0,2.0")


def test_field_shape_validation():
    ax = make_axis(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        ComplexField1D(ax, np.zeros(5))
    with pytest.raises(ValueError):
        ComplexField1D(ax, np.array([np.nan, 0, 0, 0]))
