"""Uniform grids, complex field containers, and spectral transforms.

The Fourier convention is fixed once for the entire package:

    (F f)(k) = \\int exp(-2*pi*i*k*x) f(x) dx

There is no angular-frequency variant anywhere; see CONVENTIONS.md.
Fields are treated as compactly supported (zero outside their axis) and
every transform periodizes, so callers must pad until boundary samples
are at machine zero.  All quadrature is rectangle rule, which is
spectrally accurate for smooth decaying integrands.
"""

from __future__ import annotations

import csv
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Axis",
    "ComplexField1D",
    "make_axis",
    "centered_axis",
    "field_from_callable",
    "forward_ft",
    "inverse_ft",
    "spectral_derivative",
    "l2_norm",
    "inner_product",
    "save_field",
    "load_field",
    "field_to_csv",
]

# Sign of the exponent in the forward transform.  -1.0 is the package
# convention; the only legitimate reason to touch this is the negative
# control in the verification suite.
_FT_SIGN = -1.0


def _set_ft_sign_for_testing(sign: float) -> float:
    """Test hook: corrupt (or restore) the transform convention.

    Returns the previous value so callers can restore it in a finally
    block.  Never use outside verification code.
    """
    global _FT_SIGN
    old = _FT_SIGN
    _FT_SIGN = float(sign)
    return old


@dataclass(frozen=True)
class Axis:
    """Uniform sample axis: sample i sits at start + i*step."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"axis step must be positive, got {self.step}")
        if self.count < 2:
            raise ValueError(f"axis needs at least 2 samples, got {self.count}")

    @property
    def values(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def end(self) -> float:
        return self.start + self.step * (self.count - 1)

    def dual(self) -> "Axis":
        """Centered conjugate axis: step 1/(count*step)."""
        dstep = 1.0 / (self.count * self.step)
        return Axis(-(self.count // 2) * dstep, dstep, self.count)

    def index_of(self, x: float, tol: float = 1e-9) -> int:
        """Index of a point that must lie on the lattice (within tol*step)."""
        r = (x - self.start) / self.step
        i = int(round(r))
        if abs(r - i) > tol:
            raise ValueError(f"{x} is not on the axis lattice")
        return i

    def contains_lattice_of(self, other: "Axis", tol: float = 1e-9) -> bool:
        """True if other's samples all sit on this axis' lattice."""
        ratio = other.step / self.step
        stride = round(ratio)
        if stride < 1 or abs(ratio - stride) > tol:
            return False
        off = (other.start - self.start) / self.step
        if abs(off - round(off)) > tol:
            return False
        i0 = round(off)
        i1 = i0 + stride * (other.count - 1)
        return 0 <= i0 and i1 < self.count


def make_axis(start: float, step: float, count: int) -> Axis:
    return Axis(float(start), float(step), int(count))


def centered_axis(half_width: float, count: int) -> Axis:
    """Axis of `count` samples with step 2*half_width/count, centered at 0."""
    step = 2.0 * half_width / count
    return Axis(-(count // 2) * step, step, count)


@dataclass(frozen=True)
class ComplexField1D:
    """Complex samples over a uniform axis."""

    axis: Axis
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (self.axis.count,):
            raise ValueError(
                f"values shape {v.shape} does not match axis count {self.axis.count}"
            )
        if not np.all(np.isfinite(v.view(np.float64))):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)


def field_from_callable(axis: Axis, fn) -> ComplexField1D:
    return ComplexField1D(axis, np.asarray(fn(axis.values), dtype=np.complex128))


def l2_norm(f: ComplexField1D) -> float:
    return float(np.sqrt(f.axis.step * np.sum(np.abs(f.values) ** 2)))


def inner_product(f: ComplexField1D, g: ComplexField1D) -> complex:
    """Rectangle-rule <f, g> = int f(x) conj(g(x)) dx; axes must match."""
    if f.axis != g.axis:
        raise ValueError("inner product requires a common axis")
    return complex(f.axis.step * np.sum(f.values * np.conj(g.values)))


def forward_ft(f: ComplexField1D) -> ComplexField1D:
    """Samples of the transform on the centered dual axis.

    Rectangle rule realized through an FFT with the phase factors needed
    for a non-zero-start axis.
    """
    ax = f.axis
    dual = ax.dual()
    n = ax.count
    j = np.arange(n)
    pre = np.exp(_FT_SIGN * 2j * np.pi * dual.start * j * ax.step)
    spec = np.fft.fft(f.values * pre) if _FT_SIGN < 0 else np.fft.ifft(f.values * pre) * n
    post = ax.step * np.exp(_FT_SIGN * 2j * np.pi * dual.values * ax.start)
    return ComplexField1D(dual, post * spec)


def inverse_ft(F: ComplexField1D, target_axis: Axis | None = None) -> ComplexField1D:
    """Inverse transform onto target_axis (default: centered dual of F's axis).

    Requires target_axis.step * F.axis.step * count == 1/count, i.e. the
    two axes must be duals of each other.
    """
    kax = F.axis
    ax = target_axis if target_axis is not None else kax.dual()
    n = kax.count
    if ax.count != n or abs(ax.step * kax.step * n - 1.0) > 1e-9:
        raise ValueError("target axis is not dual to the transform axis")
    m = np.arange(n)
    pre = np.exp(-_FT_SIGN * 2j * np.pi * m * kax.step * ax.start)
    spec = np.fft.ifft(F.values * pre) * n if _FT_SIGN < 0 else np.fft.fft(F.values * pre)
    post = kax.step * np.exp(-_FT_SIGN * 2j * np.pi * kax.start * ax.values)
    return ComplexField1D(ax, post * spec)


def spectral_derivative(f: ComplexField1D, order: int) -> ComplexField1D:
    """d^order f / dx^order by multiplication in the transform domain.

    The field must be smooth and decay to machine zero at the axis ends;
    the transform path periodizes, so boundary mass wraps around.
    """
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    if order == 0:
        return ComplexField1D(f.axis, f.values.copy())
    n = f.axis.count
    k = np.fft.fftfreq(n, d=f.axis.step)
    mult = (-_FT_SIGN * 2j * np.pi * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[n // 2] = 0.0  # unpaired Nyquist bin carries no odd derivative
    return ComplexField1D(f.axis, np.fft.ifft(np.fft.fft(f.values) * mult))


# -- binary and CSV persistence ----------------------------------------------

_PSF1_MAGIC = b"PSF1"
_PSF1_VERSION = 1


def _atomic_write(path: str, payload: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_field(path: str, f: ComplexField1D) -> None:
    """Little-endian binary: magic, version, axis header, interleaved re/im."""
    header = _PSF1_MAGIC + struct.pack(
        "<IddQI", _PSF1_VERSION, f.axis.start, f.axis.step, f.axis.count, 2
    )
    inter = np.empty(2 * f.axis.count, dtype="<f8")
    inter[0::2] = f.values.real
    inter[1::2] = f.values.imag
    _atomic_write(path, header + inter.tobytes())


def load_field(path: str) -> ComplexField1D:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _PSF1_MAGIC:
        raise ValueError(f"{path}: not a PSF1 field file")
    version, start, step, count, ncomp = struct.unpack("<IddQI", blob[4:36])
    if version != _PSF1_VERSION or ncomp != 2:
        raise ValueError(f"{path}: unsupported PSF1 version/component count")
    data = np.frombuffer(blob[36:], dtype="<f8", count=2 * count)
    return ComplexField1D(Axis(start, step, int(count)), data[0::2] + 1j * data[1::2])


def field_to_csv(path: str, f: ComplexField1D) -> None:
    rows = ["x,re,im"]
    for x, v in zip(f.axis.values, f.values):
        rows.append(f"{float(x)!r},{float(v.real)!r},{float(v.imag)!r}")
    _atomic_write(path, ("\n".join(rows) + "\n").encode())
