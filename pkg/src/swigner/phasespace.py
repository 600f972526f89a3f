"""Scaled Wigner transforms, smoothed variants, spectrograms, observables.

The scaled transform of a pair of fields is

    W[f, g](x, k) = \\int exp(-2*pi*i*k*y) f(x + eps*y/2) conj(g(x - eps*y/2)) dy

computed column by column: the correlation in y is sampled on the field
lattice (trigonometric upsampling when the requested k lattice implies
half-step offsets) and transformed y -> k with an FFT, O(N^2 log N)
total.  Smoothing is a Gaussian Fourier multiplier in the ambiguity
(z, y) domain,

    phi(z, y) = exp(-(pi*eps/2) * (sigma_x^2 z^2 + sigma_k^2 y^2)),

whose phase-space kernel has unit mass, so smoothing preserves the total
integral exactly.  Sign and normalization conventions: CONVENTIONS.md.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .grid import Axis, ComplexField1D, _atomic_write, forward_ft

__all__ = [
    "SmoothingParams",
    "PhaseSpaceGrid",
    "PhaseSpaceField",
    "OutOfDomainError",
    "OutOfBandError",
    "natural_grid",
    "wigner",
    "wigner_cross",
    "smoothed_wigner",
    "smoothed_wigner_cross",
    "spectrogram",
    "stft_spectrogram",
    "wigner_point_oracle",
    "marginal_k",
    "marginal_x",
    "total_mass",
    "trace_observable",
    "save_phase_field",
    "load_phase_field",
    "marginal_to_csv",
]

FIELD_KINDS = ("wigner", "smoothed", "spectrogram")


class OutOfDomainError(ValueError):
    """Requested grid exceeds the support of the input fields."""


class OutOfBandError(ValueError):
    """Requested k window misses too much of the fields' spectral mass."""


@dataclass(frozen=True)
class SmoothingParams:
    """Gaussian smoothing widths and the semiclassical parameter.

    The phase-space kernel has variance eps*sigma_x^2/(4*pi) in x and
    eps*sigma_k^2/(4*pi) in k.  sigma_x*sigma_k < 1 is subcritical
    smoothing, = 1 critical (the spectrogram case).
    """

    sigma_x: float
    sigma_k: float
    eps: float

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_k < 0:
            raise ValueError("smoothing widths must be >= 0")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def regime(self) -> str:
        p = self.sigma_x * self.sigma_k
        if abs(p - 1.0) <= 1e-12:
            return "critical"
        return "subcritical" if p < 1.0 else "supercritical"


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Cartesian (x, k) grid.

    For transform calls the k axis must be a window of the centered dual
    lattice of the field axis scaled by eps: step = eps/(2*dx*M) for an
    even y-sample count M (validated on use; natural_grid builds such
    grids).  Report/interpolation grids are unconstrained.
    """

    x_axis: Axis
    k_axis: Axis


@dataclass(frozen=True)
class PhaseSpaceField:
    """Real phase-space density samples, x-major: values[ix, ik]."""

    grid: PhaseSpaceGrid
    values: np.ndarray
    kind: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        shape = (self.grid.x_axis.count, self.grid.k_axis.count)
        if v.shape != shape:
            raise ValueError(f"values shape {v.shape}, expected {shape}")
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.kind == "spectrogram":
            floor = -1e-12 * max(1.0, float(np.max(np.abs(v))))
            if float(v.min()) < floor:
                raise ValueError("spectrogram values must be nonnegative up to rounding")
        object.__setattr__(self, "values", v)


def natural_grid(
    axis: Axis,
    eps: float,
    *,
    y_count: int | None = None,
    k_window: tuple[float, float] | None = None,
    x_window: tuple[float, float] | None = None,
    x_stride: int = 1,
) -> PhaseSpaceGrid:
    """Transform grid aligned with the field lattice.

    y_count (even, default axis.count) sets the y-sample count M, hence
    dk = eps/(2*dx*M) and a full k extent of eps/(2*dx).  Optional value
    windows select sub-ranges; x_stride subsamples the x axis.
    """
    m = axis.count if y_count is None else int(y_count)
    if m % 2 or m < 2:
        raise ValueError("y_count must be a positive even integer")
    dk = eps / (2.0 * axis.step * m)
    k_axis = Axis(-(m // 2) * dk, dk, m)
    if k_window is not None:
        k_axis = _window_axis(k_axis, *k_window)
    x_axis = axis
    if x_window is not None:
        x_axis = _window_axis(x_axis, *x_window)
    if x_stride != 1:
        if x_stride < 1:
            raise ValueError("x_stride must be >= 1")
        n = (x_axis.count + x_stride - 1) // x_stride
        x_axis = Axis(x_axis.start, x_axis.step * x_stride, n)
    return PhaseSpaceGrid(x_axis, k_axis)


def _window_axis(axis: Axis, lo: float, hi: float) -> Axis:
    if hi <= lo:
        raise ValueError("window must have lo < hi")
    vals = axis.values
    idx = np.nonzero((vals >= lo - 1e-12) & (vals <= hi + 1e-12))[0]
    if idx.size < 2:
        raise ValueError("window selects fewer than 2 samples")
    return Axis(float(vals[idx[0]]), axis.step, int(idx[-1] - idx[0] + 1))


# -- transform core -----------------------------------------------------------


def _upsample(values: np.ndarray, q: int) -> np.ndarray:
    """Trigonometric interpolation onto a q-times finer lattice."""
    if q == 1:
        return values
    n = values.size
    spec = np.fft.fft(values)
    padded = np.zeros(q * n, dtype=np.complex128)
    h = n // 2
    padded[:h] = spec[:h]
    padded[-(n - h):] = spec[h:]
    if n % 2 == 0:
        padded[h] = 0.5 * spec[h]
        padded[q * n - h] = 0.5 * spec[h]
    return np.fft.ifft(padded) * q


def _alignment(eps: float, dx: float, dk: float) -> tuple[int, int]:
    """(M, q): y-sample count and upsampling factor for a k lattice."""
    half_offsets = eps / (2.0 * dx * dk)
    for q in (1, 2, 4, 8, 16, 32, 64):
        m = round(q * half_offsets)
        if m >= 2 and m % 2 == 0 and abs(m - q * half_offsets) <= 1e-6:
            return m, q
    raise ValueError(
        "k axis is not commensurate with the field lattice: need "
        "eps/(2*dx*dk) = M/q with even M and q <= 64; build grids with "
        "natural_grid()"
    )


def _validate_k_axis(k_axis: Axis, dk: float, m: int) -> tuple[int, int]:
    """Window [i0, i1) of the k lattice inside the centered full lattice."""
    r = k_axis.start / dk
    if abs(r - round(r)) > 1e-6:
        raise ValueError("k axis start must sit on a multiple of its step")
    i0 = int(round(r)) + m // 2
    i1 = i0 + k_axis.count
    if i0 < 0 or i1 > m:
        raise ValueError("k window exceeds the full dual lattice of the y grid")
    return i0, i1


def _band_edges(f: ComplexField1D, tol: float) -> tuple[float, float]:
    """Symmetric-tail frequency band holding all but tol of |f^|^2 mass."""
    spec = forward_ft(f)
    p = np.abs(spec.values) ** 2
    total = p.sum()
    if total == 0.0:
        return 0.0, 0.0
    c = np.cumsum(p) / total
    nu = spec.axis.values
    lo_i = int(np.searchsorted(c, tol / 2.0))
    hi_i = int(np.searchsorted(c, 1.0 - tol / 2.0))
    return float(nu[max(lo_i - 1, 0)]), float(nu[min(hi_i + 1, nu.size - 1)])


def _check_band(f, g, eps, dx, k_axis, q, band_tol):
    bf = _band_edges(f, band_tol)
    bg = bf if g is f else _band_edges(g, band_tol)
    nyq = q / (2.0 * dx)
    width = (bf[1] - bf[0]) / 2.0 + (bg[1] - bg[0]) / 2.0
    if width > nyq * (1.0 + 1e-9):
        raise OutOfBandError(
            f"correlation bandwidth {width:.3g} exceeds the y Nyquist limit "
            f"{nyq:.3g}; refine the field axis"
        )
    k_lo = eps * min(bf[0], bg[0])
    k_hi = eps * max(bf[1], bg[1])
    ax_lo = k_axis.start - k_axis.step / 2.0
    ax_hi = k_axis.end + k_axis.step / 2.0
    if k_lo < ax_lo or k_hi > ax_hi:
        raise OutOfBandError(
            f"k window [{ax_lo:.3g}, {ax_hi:.3g}] misses more than {band_tol:g} "
            f"of spectral mass (scaled band [{k_lo:.3g}, {k_hi:.3g}])"
        )


def _cross_transform(
    f: ComplexField1D,
    g: ComplexField1D,
    eps: float,
    grid: PhaseSpaceGrid,
    sigma_x: float,
    sigma_k: float,
    band_tol: float,
) -> np.ndarray:
    """Complex (smoothed) transform values on grid, x-major."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if f.axis != g.axis:
        raise ValueError("f and g must share an axis")
    ax = f.axis
    if not ax.contains_lattice_of(grid.x_axis):
        raise OutOfDomainError("grid x axis is not a sublattice of the field axis")
    n, dx = ax.count, ax.step
    dk = grid.k_axis.step
    m, q = _alignment(eps, dx, dk)
    k0, k1 = _validate_k_axis(grid.k_axis, dk, m)
    _check_band(f, g, eps, dx, grid.k_axis, q, band_tol)

    fv = _upsample(f.values, q)
    gv = fv if g is f else _upsample(g.values, q)
    nf = fv.size
    dy = 1.0 / (m * dk)

    # correlation rows n in [-M/2, M/2); row index r = n + M/2
    offs = np.arange(-(m // 2), m // 2)
    corr = np.zeros((n, m), dtype=np.complex128)
    base = np.arange(n) * q
    block = max(1, min(n, (1 << 21) // m))
    for j0 in range(0, n, block):
        b = base[j0 : j0 + block, None]
        ia = b + offs[None, :]
        ib = b - offs[None, :]
        ok = (ia >= 0) & (ia < nf) & (ib >= 0) & (ib < nf)
        c = np.where(ok, fv[np.clip(ia, 0, nf - 1)] * np.conj(gv[np.clip(ib, 0, nf - 1)]), 0.0)
        corr[j0 : j0 + block] = c
    corr[:, 0] = 0.0  # unpaired -M/2 row; zero for Hermitian symmetry

    if sigma_k > 0.0:
        y = offs * dy
        corr *= np.exp(-(np.pi * eps / 2.0) * (sigma_k * y) ** 2)[None, :]
    if sigma_x > 0.0:
        z = np.fft.fftfreq(n, d=dx)
        mult = np.exp(-(np.pi * eps / 2.0) * (sigma_x * z) ** 2)
        corr = np.fft.ifft(np.fft.fft(corr, axis=0) * mult[:, None], axis=0)

    w = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(corr, axes=1), axis=1), axes=1) * dy
    w = w[:, k0:k1]

    stride = round(grid.x_axis.step / dx)
    row0 = ax.index_of(grid.x_axis.start)
    return w[row0 : row0 + stride * grid.x_axis.count : stride]


def _realize(values: np.ndarray, grid: PhaseSpaceGrid, kind: str) -> PhaseSpaceField:
    scale = float(np.max(np.abs(values.real))) or 1.0
    resid = float(np.max(np.abs(values.imag)))
    if resid > 1e-10 * scale:
        raise ValueError(
            f"imaginary residue {resid:.3e} exceeds 1e-10 of field scale; "
            "is the input pair really f = g?"
        )
    return PhaseSpaceField(grid, np.ascontiguousarray(values.real), kind)


def wigner(
    f: ComplexField1D,
    eps: float,
    grid: PhaseSpaceGrid,
    *,
    band_tol: float = 1e-6,
) -> PhaseSpaceField:
    """Wigner transform of a single field (real-valued output)."""
    vals = _cross_transform(f, f, eps, grid, 0.0, 0.0, band_tol)
    return _realize(vals, grid, "wigner")


def wigner_cross(
    f: ComplexField1D,
    g: ComplexField1D,
    eps: float,
    grid: PhaseSpaceGrid,
    *,
    band_tol: float = 1e-6,
) -> np.ndarray:
    """Complex cross transform of a pair, as a bare (Nx, Nk) array."""
    return _cross_transform(f, g, eps, grid, 0.0, 0.0, band_tol)


def smoothed_wigner(
    f: ComplexField1D,
    params: SmoothingParams,
    grid: PhaseSpaceGrid,
    *,
    band_tol: float = 1e-6,
) -> PhaseSpaceField:
    vals = _cross_transform(f, f, params.eps, grid, params.sigma_x, params.sigma_k, band_tol)
    return _realize(vals, grid, "smoothed")


def smoothed_wigner_cross(
    f: ComplexField1D,
    g: ComplexField1D,
    params: SmoothingParams,
    grid: PhaseSpaceGrid,
    *,
    band_tol: float = 1e-6,
) -> np.ndarray:
    return _cross_transform(f, g, params.eps, grid, params.sigma_x, params.sigma_k, band_tol)


def spectrogram(
    f: ComplexField1D,
    params: SmoothingParams,
    grid: PhaseSpaceGrid,
    *,
    band_tol: float = 1e-6,
) -> PhaseSpaceField:
    """Gaussian-window spectrogram, realized as the critical smoothing case."""
    if abs(params.sigma_x * params.sigma_k - 1.0) > 1e-12:
        raise ValueError("spectrogram requires sigma_x * sigma_k == 1")
    vals = _cross_transform(f, f, params.eps, grid, params.sigma_x, params.sigma_k, band_tol)
    return _realize(vals, grid, "spectrogram")


def stft_spectrogram(
    f: ComplexField1D, params: SmoothingParams, grid: PhaseSpaceGrid
) -> PhaseSpaceField:
    """Independent oracle: |windowed transform|^2 with the matched Gaussian.

    Window h(t) = 2^(1/4) (sigma_x^2 eps)^(-1/4) exp(-pi t^2/(eps sigma_x^2))
    has unit L2 norm and |h|^2 variance eps*sigma_x^2/(4*pi); the value is
    (1/eps) |\\int f(t) exp(-2*pi*i*k*t/eps) h(x - t) dt|^2.
    """
    if abs(params.sigma_x * params.sigma_k - 1.0) > 1e-12:
        raise ValueError("spectrogram requires sigma_x * sigma_k == 1")
    eps, sx = params.eps, params.sigma_x
    t = f.axis.values
    dxs = f.axis.step
    c = 2.0 ** 0.25 * (sx * sx * eps) ** -0.25
    phases = np.exp(-2j * np.pi * np.outer(grid.k_axis.values / eps, t))
    out = np.empty((grid.x_axis.count, grid.k_axis.count))
    for i, x in enumerate(grid.x_axis.values):
        w = f.values * (c * np.exp(-np.pi * (x - t) ** 2 / (eps * sx * sx)))
        v = phases @ w * dxs
        out[i] = (v.real**2 + v.imag**2) / eps
    return PhaseSpaceField(grid, out, "spectrogram")


def wigner_point_oracle(
    f: ComplexField1D, g: ComplexField1D, eps: float, x: float, k: float
) -> complex:
    """Direct rectangle-rule quadrature of the defining integral at a point.

    x must sit on the half-step lattice of the field axis so that both
    f(x + eps*y/2) and g(x - eps*y/2) fall on field samples.  Test use only.
    """
    if f.axis != g.axis:
        raise ValueError("f and g must share an axis")
    ax = f.axis
    r2 = 2.0 * (x - ax.start) / ax.step
    m2 = round(r2)
    if abs(r2 - m2) > 1e-9:
        raise ValueError("x must lie on the half-step lattice of the field axis")
    n = ax.count
    dy = 2.0 * ax.step / eps
    if m2 % 2 == 0:
        j = m2 // 2
        offs = np.arange(-n, n + 1)
        ia, ib = j + offs, j - offs
        y = offs * dy
    else:
        ja, jb = (m2 + 1) // 2, (m2 - 1) // 2
        offs = np.arange(-n, n + 1)
        ia, ib = ja + offs, jb - offs
        y = (offs + 0.5) * dy
    ok = (ia >= 0) & (ia < n) & (ib >= 0) & (ib < n)
    ia, ib, y = ia[ok], ib[ok], y[ok]
    vals = f.values[ia] * np.conj(g.values[ib]) * np.exp(-2j * np.pi * k * y)
    return complex(dy * vals.sum())


# -- observables --------------------------------------------------------------


def marginal_k(w: PhaseSpaceField) -> np.ndarray:
    """Rectangle-rule integral over k; one value per x sample."""
    return w.grid.k_axis.step * w.values.sum(axis=1)


def marginal_x(w: PhaseSpaceField) -> np.ndarray:
    """Rectangle-rule integral over x; one value per k sample."""
    return w.grid.x_axis.step * w.values.sum(axis=0)


def total_mass(w: PhaseSpaceField) -> float:
    return float(w.grid.x_axis.step * w.grid.k_axis.step * w.values.sum())


def trace_observable(symbol, w: PhaseSpaceField):
    """Quadrature of symbol(x, k) * W over the grid.

    Returns a float for real-coefficient symbols, otherwise complex.
    """
    x = w.grid.x_axis.values[:, None]
    k = w.grid.k_axis.values[None, :]
    acc = 0.0 + 0.0j
    real = True
    for (mx, nk), c in symbol.coeffs.items():
        if abs(complex(c).imag) > 1e-14 * (1.0 + abs(c)):
            real = False
        acc += c * np.sum((x**mx) * (k**nk) * w.values)
    acc *= w.grid.x_axis.step * w.grid.k_axis.step
    return float(acc.real) if real else complex(acc)


# -- persistence ---------------------------------------------------------------

_PSF2_MAGIC = b"PSF2"
_PSF2_VERSION = 1
_KIND_TAGS = {k: i for i, k in enumerate(FIELD_KINDS)}


def save_phase_field(path: str, w: PhaseSpaceField) -> None:
    hdr = _PSF2_MAGIC + struct.pack(
        "<IddQddQI",
        _PSF2_VERSION,
        w.grid.x_axis.start,
        w.grid.x_axis.step,
        w.grid.x_axis.count,
        w.grid.k_axis.start,
        w.grid.k_axis.step,
        w.grid.k_axis.count,
        _KIND_TAGS[w.kind],
    )
    _atomic_write(path, hdr + np.ascontiguousarray(w.values, dtype="<f8").tobytes())


def load_phase_field(path: str) -> PhaseSpaceField:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _PSF2_MAGIC:
        raise ValueError(f"{path}: not a PSF2 file")
    ver, xs, xd, xc, ks, kd, kc, tag = struct.unpack("<IddQddQI", blob[4:60])
    if ver != _PSF2_VERSION:
        raise ValueError(f"{path}: unsupported PSF2 version")
    grid = PhaseSpaceGrid(Axis(xs, xd, int(xc)), Axis(ks, kd, int(kc)))
    vals = np.frombuffer(blob[60:], dtype="<f8", count=int(xc * kc)).reshape(int(xc), int(kc))
    return PhaseSpaceField(grid, vals.copy(), FIELD_KINDS[tag])


def marginal_to_csv(path: str, axis: Axis, values: np.ndarray, label: str = "x") -> None:
    rows = [f"{label},value"]
    for a, v in zip(axis.values, values):
        rows.append(f"{float(a)!r},{float(v)!r}")
    _atomic_write(path, ("\n".join(rows) + "\n").encode())
