import numpy as np
import pytest

from swigner.grid import ComplexField1D, field_from_callable, forward_ft, inner_product, make_axis, spectral_derivative
from swigner.phasespace import (
    OutOfBandError,
    OutOfDomainError,
    PhaseSpaceField,
    PhaseSpaceGrid,
    SmoothingParams,
    load_phase_field,
    marginal_k,
    marginal_x,
    natural_grid,
    save_phase_field,
    smoothed_wigner,
    spectrogram,
    stft_spectrogram,
    total_mass,
    trace_observable,
    wigner,
    wigner_cross,
    wigner_point_oracle,
)
from swigner.solutions import build_f_eps, f_eps_envelope
from swigner.weylops import PolynomialSymbol


@pytest.fixture(scope="module")
def gaussian_setup():
    ax = make_axis(-6.0, 12.0 / 512, 512)
    f = field_from_callable(ax, lambda x: np.exp(-np.pi * x * x))
    grid = natural_grid(ax, 1.0)
    return ax, f, grid


@pytest.fixture(scope="module")
def f_eps_setup():
    eps = 0.7
    ax = make_axis(-4.0, 8.0 / 2048, 2048)
    fe = build_f_eps(eps, ax)
    grid = natural_grid(ax, eps, k_window=(-36.0, 37.0))
    return eps, ax, fe, grid


def test_wigner_gaussian_closed_form(gaussian_setup):
    ax, f, grid = gaussian_setup
    W = wigner(f, 1.0, grid)
    X = grid.x_axis.values[:, None]
    K = grid.k_axis.values[None, :]
    exact = np.sqrt(2) * np.exp(-2 * np.pi * (X**2 + K**2))
    assert np.max(np.abs(W.values - exact)) < 1e-8
    assert W.kind == "wigner"


def test_wigner_zero_field(gaussian_setup):
    ax, _, grid = gaussian_setup
    z = ComplexField1D(ax, np.zeros(ax.count))
    W = wigner(z, 1.0, grid)
    assert np.max(np.abs(W.values)) == 0.0


def test_wigner_marginals_f_eps(f_eps_setup):
    eps, ax, fe, grid = f_eps_setup
    W = wigner(fe, eps, grid)
    mk = marginal_k(W)
    dens = np.abs(fe.values) ** 2
    l1 = np.sum(np.abs(mk - dens)) * ax.step
    assert l1 < 1e-6
    # the other marginal equals (1/eps)|f^(k/eps)|^2; a y_count of N/2 puts
    # the k lattice exactly on eps times the dual axis
    half = natural_grid(ax, eps, y_count=ax.count // 2, k_window=(-36.0, 37.0))
    Wh = wigner(fe, eps, half)
    spec = forward_ft(fe)
    sel = [spec.axis.index_of(k / eps) for k in half.k_axis.values]
    mx = marginal_x(Wh)
    want = np.abs(spec.values[sel]) ** 2 / eps
    assert np.sum(np.abs(mx - want)) * half.k_axis.step < 1e-6


def test_marginal_x_exact_lattice(gaussian_setup):
    ax, f, _ = gaussian_setup
    # y_count = count/2 puts the k lattice on the dual axis of f
    grid = natural_grid(ax, 1.0, y_count=ax.count // 2, k_window=(-3.0, 3.0))
    W = wigner(f, 1.0, grid)
    spec = forward_ft(f)
    sel = [spec.axis.index_of(k) for k in grid.k_axis.values]
    mx = marginal_x(W)
    assert np.sum(np.abs(mx - np.abs(spec.values[sel]) ** 2)) * grid.k_axis.step < 1e-8


def test_marginals_zero_field(gaussian_setup):
    ax, _, grid = gaussian_setup
    z = wigner(ComplexField1D(ax, np.zeros(ax.count)), 1.0, grid)
    assert np.all(marginal_k(z) == 0.0) and np.all(marginal_x(z) == 0.0)


def test_point_oracle_gaussian_origin(gaussian_setup):
    ax, f, _ = gaussian_setup
    val = wigner_point_oracle(f, f, 1.0, 0.0, 0.0)
    assert abs(val - np.sqrt(2)) < 1e-8


def test_point_oracle_outside_support(gaussian_setup):
    ax, f, _ = gaussian_setup
    x_far = float(ax.values[ax.count - 10])  # ~5.8, far outside the support
    val = wigner_point_oracle(f, f, 1.0, x_far, 0.0)
    assert abs(val) < 1e-12


def test_point_oracle_matches_fft_path(gaussian_setup):
    ax, f, grid = gaussian_setup
    g = field_from_callable(
        ax, lambda x: (x + 0.3) * np.exp(-0.8 * np.pi * x * x - 2j * np.pi * 0.9 * x)
    )
    Wc = wigner_cross(f, g, 1.0, grid)
    rng = np.random.default_rng(7)
    for _ in range(20):
        i = int(rng.integers(0, grid.x_axis.count))
        j = int(rng.integers(0, grid.k_axis.count))
        o = wigner_point_oracle(
            f, g, 1.0, float(grid.x_axis.values[i]), float(grid.k_axis.values[j])
        )
        assert abs(Wc[i, j] - o) < 1e-8


def test_point_oracle_half_lattice(gaussian_setup):
    ax, f, _ = gaussian_setup
    # closed form at an off-node x on the half-step lattice
    x = ax.values[100] + 0.5 * ax.step
    val = wigner_point_oracle(f, f, 1.0, float(x), 0.25)
    exact = np.sqrt(2) * np.exp(-2 * np.pi * (x**2 + 0.25**2))
    assert abs(val - exact) < 1e-8


def test_smoothed_wigner_gaussian_convolution(gaussian_setup):
    ax, f, grid = gaussian_setup
    p = SmoothingParams(0.5, 0.5, 1.0)
    Ws = smoothed_wigner(f, p, grid)
    X = grid.x_axis.values[:, None]
    K = grid.k_axis.values[None, :]
    # Gaussian * Gaussian closed form: variances add, mass preserved
    ex = np.sqrt(2) / 1.25 * np.exp(-2 * np.pi * X**2 / 1.25) * np.exp(-2 * np.pi * K**2 / 1.25)
    assert np.max(np.abs(Ws.values - ex)) < 1e-8


def test_smoothed_wigner_zero_sigma_is_wigner(gaussian_setup):
    ax, f, grid = gaussian_setup
    Ws = smoothed_wigner(f, SmoothingParams(0.0, 0.0, 1.0), grid)
    W = wigner(f, 1.0, grid)
    assert np.array_equal(Ws.values, W.values)


def test_smoothing_preserves_mass(f_eps_setup):
    eps, ax, fe, grid = f_eps_setup
    W = wigner(fe, eps, grid)
    Ws = smoothed_wigner(fe, SmoothingParams(0.5, 0.5, eps), grid)
    assert abs(total_mass(Ws) - total_mass(W)) / abs(total_mass(W)) < 1e-10


def test_spectrogram_nonnegative_and_critical(gaussian_setup):
    ax, f, grid = gaussian_setup
    p = SmoothingParams(1.0, 1.0, 1.0)
    sp = spectrogram(f, p, grid)
    assert sp.kind == "spectrogram"
    assert sp.values.min() >= -1e-12
    sw = smoothed_wigner(f, p, grid)
    assert np.max(np.abs(sp.values - sw.values)) == 0.0


def test_spectrogram_requires_critical(gaussian_setup):
    ax, f, grid = gaussian_setup
    with pytest.raises(ValueError):
        spectrogram(f, SmoothingParams(0.5, 0.5, 1.0), grid)


def test_spectrogram_stft_oracle(gaussian_setup):
    ax, f, _ = gaussian_setup
    chirp = field_from_callable(
        ax, lambda x: np.exp(-np.pi * (x - 0.2) ** 2 + 2j * np.pi * (1.1 * x + 0.4 * x * x))
    )
    p = SmoothingParams(0.8, 1.25, 0.7)
    assert abs(p.sigma_x * p.sigma_k - 1.0) < 1e-12
    grid = natural_grid(ax, 0.7, y_count=256, k_window=(-2.0, 3.2), x_window=(-3.0, 3.0))
    sp = spectrogram(chirp, p, grid)
    direct = stft_spectrogram(chirp, p, grid)
    assert np.max(np.abs(sp.values - direct.values)) < 1e-6


def test_sesquilinearity(gaussian_setup):
    ax, f, grid = gaussian_setup
    h = field_from_callable(ax, lambda x: np.exp(-1.3 * np.pi * (x + 0.2) ** 2 + 2j * np.pi * x))
    alpha = 0.7 - 1.9j
    af = ComplexField1D(ax, alpha * f.values)
    assert np.max(np.abs(wigner_cross(af, h, 1.0, grid) - alpha * wigner_cross(f, h, 1.0, grid))) < 1e-10
    fh = ComplexField1D(ax, f.values + h.values)
    lhs = wigner(fh, 1.0, grid).values
    rhs = (
        wigner(f, 1.0, grid).values
        + 2 * np.real(wigner_cross(f, h, 1.0, grid))
        + wigner(h, 1.0, grid).values
    )
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_interference_taming_two_packets():
    eps = 0.1
    ax = make_axis(-4.0, 8.0 / 1024, 1024)
    two = field_from_callable(
        ax,
        lambda x: np.exp(-np.pi * (x - 2) ** 2 / eps) + np.exp(-np.pi * (x + 2) ** 2 / eps),
    )
    grid = natural_grid(ax, eps, k_window=(-1.2, 1.2))
    W = wigner(two, eps, grid)
    S = smoothed_wigner(two, SmoothingParams(0.5, 0.5, eps), grid)
    mid = np.abs(grid.x_axis.values) < 0.5
    ratio = np.max(np.abs(W.values[mid])) / max(np.max(np.abs(S.values[mid])), 1e-300)
    assert ratio >= 5.0


def test_trace_constant_symbol(gaussian_setup):
    ax, f, grid = gaussian_setup
    W = wigner(f, 1.0, grid)
    one = PolynomialSymbol.constant(1.0)
    norm_sq = inner_product(f, f).real
    assert abs(trace_observable(one, W) - norm_sq) / norm_sq < 1e-8


def test_trace_mean_wavenumber():
    eps = 0.25
    ax = make_axis(-6.0, 12.0 / 1024, 1024)
    f = field_from_callable(ax, lambda x: np.exp(-np.pi * x * x + 2j * np.pi * 3.0 * x / eps))
    grid = natural_grid(ax, eps, k_window=(2.0, 4.0))
    W = wigner(f, eps, grid)
    ksym = PolynomialSymbol.k_power(1)
    measured = trace_observable(ksym, W)
    # independent route: <f, (eps/2 pi i) f'>
    df = spectral_derivative(f, 1)
    direct = (inner_product(ComplexField1D(ax, eps / (2j * np.pi) * df.values), f)).real
    norm_sq = inner_product(f, f).real
    assert abs(measured - direct) < 1e-8
    assert abs(measured - 3.0 * norm_sq) < 1e-6


def test_out_of_domain_rejected(gaussian_setup):
    ax, f, grid = gaussian_setup
    wide = PhaseSpaceGrid(make_axis(-7.0, ax.step, 100), grid.k_axis)
    with pytest.raises(OutOfDomainError):
        wigner(f, 1.0, wide)


def test_out_of_band_rejected():
    ax = make_axis(-6.0, 12.0 / 512, 512)
    f = field_from_callable(ax, lambda x: np.exp(-np.pi * x * x + 2j * np.pi * 2.0 * x))
    grid = natural_grid(ax, 1.0, k_window=(-0.5, 0.5))  # misses the k = 2 ridge
    with pytest.raises(OutOfBandError):
        wigner(f, 1.0, grid)


def test_incommensurate_k_axis_rejected(gaussian_setup):
    ax, f, _ = gaussian_setup
    bad = PhaseSpaceGrid(ax, make_axis(-1.0, 0.0101234567, 199))
    with pytest.raises(ValueError):
        wigner(f, 1.0, bad)


def test_half_step_alignment_matches_oracle(gaussian_setup):
    ax, f, _ = gaussian_setup
    # eps/(2 dx dk) lands on a half integer, forcing trigonometric upsampling
    dk = 1.0 / (2.0 * ax.step * (ax.count + 0.5))
    k_axis = make_axis(-64 * dk, dk, 129)  # covers the Gaussian band
    grid = PhaseSpaceGrid(ax, k_axis)
    W = wigner(f, 1.0, grid)
    for i in (0, 200, 256):
        for j in (0, 50, 128):
            o = wigner_point_oracle(
                f, f, 1.0, float(grid.x_axis.values[i]), float(grid.k_axis.values[j])
            )
            assert abs(W.values[i, j] - o.real) < 1e-8


def test_imag_residue_guard(gaussian_setup):
    from swigner.phasespace import _realize

    ax, f, grid = gaussian_setup
    g = field_from_callable(
        ax, lambda x: np.exp(-np.pi * (x - 0.5) ** 2 + 2j * np.pi * 0.7 * x)
    )
    vals = wigner_cross(f, g, 1.0, grid)
    assert np.max(np.abs(vals.imag)) > 1e-6  # cross transforms are complex
    with pytest.raises(ValueError):
        _realize(vals, grid, "wigner")


def test_phase_field_persistence(tmp_path, gaussian_setup):
    ax, f, grid = gaussian_setup
    W = wigner(f, 1.0, grid)
    path = str(tmp_path / "w.psf2")
    save_phase_field(path, W)
    back = load_phase_field(path)
    assert back.grid == W.grid and back.kind == "wigner"
    assert np.array_equal(back.values, W.values)


def test_spectrogram_field_floor_enforced(gaussian_setup):
    _, _, grid = gaussian_setup
    vals = np.zeros((grid.x_axis.count, grid.k_axis.count))
    vals[0, 0] = -1.0
    with pytest.raises(ValueError):
        PhaseSpaceField(grid, vals, "spectrogram")


def test_smoothing_params_regimes():
    assert SmoothingParams(0.5, 0.5, 1.0).regime == "subcritical"
    assert SmoothingParams(0.5, 2.0, 1.0).regime == "critical"
    assert SmoothingParams(2.0, 2.0, 1.0).regime == "supercritical"
    with pytest.raises(ValueError):
        SmoothingParams(-0.1, 0.5, 1.0)
    with pytest.raises(ValueError):
        SmoothingParams(0.5, 0.5, 0.0)
