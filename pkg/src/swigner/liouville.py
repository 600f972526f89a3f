"""Phase-space transport: particles, exact flows, interpolation, oracles.

Characteristics of the leading-order transport are Hamilton's equations

    dx/dt = 2 pi k,     dk/dt = -V'(x) / (2 pi),

integrated per particle with classic RK4; the density value carried by a
particle never changes.  For potentials a x^s with s in {0, 1, 2} the
flow is affine and available in closed form, which also yields the
flow-distorted smoothing kernel: the Liouville-evolved smoothed
transform equals the exactly evolved transform convolved with a
Gaussian whose covariance is transported as Sigma_t = Phi_t Sigma_0
Phi_t^T (Phi_t the forward linear flow).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .grid import Axis, _atomic_write
from .phasespace import (
    PhaseSpaceField,
    PhaseSpaceGrid,
    SmoothingParams,
    total_mass,
    trace_observable,
)
from .solutions import PotentialSpec

__all__ = [
    "ParticleEnsemble",
    "FlowMap",
    "hamilton_rhs",
    "exact_flow",
    "flow_matrix",
    "seed_particles",
    "propagate",
    "default_rk4_dt",
    "interpolate_to_grid",
    "particle_marginal_x",
    "particle_mass",
    "particle_energy",
    "semi_lagrangian_evolve",
    "kernel_evolution_reference",
    "conservation_report",
    "conservation_to_csv",
    "ensemble_to_csv",
]


def hamilton_rhs(V: PotentialSpec, x, k):
    """(dx/dt, dk/dt) of the transport characteristics."""
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return 2.0 * np.pi * k, -V.V_prime(x) / (2.0 * np.pi)


def flow_matrix(a: float, s: int, t: float):
    """Forward flow of V = a x^s as (linear part, offset); s in {0, 1, 2}."""
    if s == 0:
        return np.array([[1.0, 2.0 * np.pi * t], [0.0, 1.0]]), np.zeros(2)
    if s == 1:
        lin = np.array([[1.0, 2.0 * np.pi * t], [0.0, 1.0]])
        off = np.array([-a * t * t / 2.0, -a * t / (2.0 * np.pi)])
        return lin, off
    if s == 2:
        w = np.sqrt(2.0 * a)
        c, sn = np.cos(w * t), np.sin(w * t)
        lin = np.array(
            [[c, 2.0 * np.pi * sn / w], [-w * sn / (2.0 * np.pi), c]]
        )
        return lin, np.zeros(2)
    raise ValueError(f"exact flows exist only for s in (0, 1, 2), got {s}")


def exact_flow(a: float, s: int, t: float, x, k):
    """Closed-form forward flow applied to points (works for t < 0 too)."""
    lin, off = flow_matrix(a, s, t)
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return (
        lin[0, 0] * x + lin[0, 1] * k + off[0],
        lin[1, 0] * x + lin[1, 1] * k + off[1],
    )


@dataclass(frozen=True)
class FlowMap:
    """Tagged Hamiltonian flow at a fixed time.

    kind is exact_s0 / exact_s1 / exact_s2 for V = a x^s, else numeric.
    """

    kind: str
    a: float
    t: float

    def __post_init__(self):
        if self.kind not in ("exact_s0", "exact_s1", "exact_s2", "numeric"):
            raise ValueError(f"unknown flow kind {self.kind!r}")

    @classmethod
    def from_potential(cls, V: PotentialSpec, t: float) -> "FlowMap":
        if V.kind == "free":
            return cls("exact_s0", 0.0, t)
        if V.kind == "uniform_field":
            return cls("exact_s1", V.coefficients[1], t)
        if V.kind == "harmonic":
            return cls("exact_s2", V.coefficients[2], t)
        c = V.coefficients
        if all(v == 0.0 for v in c[1:]):
            return cls("exact_s0", 0.0, t)
        if len(c) <= 3 and all(v == 0.0 for v in c[3:]):
            if len(c) >= 3 and c[2] != 0.0 and c[1] == 0.0:
                return cls("exact_s2", c[2], t)
            if (len(c) < 3 or c[2] == 0.0) and c[1] != 0.0:
                return cls("exact_s1", c[1], t)
        return cls("numeric", 0.0, t)

    @property
    def s(self) -> int:
        if self.kind == "numeric":
            raise ValueError("numeric flows have no closed form")
        return int(self.kind[-1])

    def matrix(self):
        return flow_matrix(self.a, self.s, self.t)

    def apply(self, x, k):
        return exact_flow(self.a, self.s, self.t, x, k)


@dataclass(frozen=True)
class ParticleEnsemble:
    """Immutable particle snapshot; densities never change under transport."""

    positions: np.ndarray  # (n, 2) columns x, k
    densities: np.ndarray  # (n,)
    seed_grid: PhaseSpaceGrid
    kind: str = "smoothed"

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        den = np.asarray(self.densities, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2 or den.shape != (pos.shape[0],):
            raise ValueError("positions must be (n, 2) with matching densities")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "densities", den)

    @property
    def cell_area(self) -> float:
        return self.seed_grid.x_axis.step * self.seed_grid.k_axis.step


def seed_particles(w0: PhaseSpaceField, tol: float, halo: int = 3) -> ParticleEnsemble:
    """Particles at grid nodes where |W| exceeds tol * max|W|, plus a halo.

    The halo ring (binary dilation, default 3 cells) keeps spreading
    densities inside the particle hull.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    peak = float(np.max(np.abs(w0.values)))
    if peak == 0.0:
        raise ValueError("cannot seed particles from an identically zero field")
    mask = np.abs(w0.values) > tol * peak
    if halo > 0:
        mask = ndimage.binary_dilation(mask, iterations=halo)
    ix, ik = np.nonzero(mask)
    x = w0.grid.x_axis.values[ix]
    k = w0.grid.k_axis.values[ik]
    return ParticleEnsemble(
        np.column_stack([x, k]), w0.values[ix, ik], w0.grid, w0.kind
    )


def default_rk4_dt(V: PotentialSpec) -> float:
    """Step choice keeping RK4 error far below interpolation error."""
    if V.kind == "harmonic":
        return min(0.01, 2.0 * np.pi / np.sqrt(V.omega_sq) / 1000.0)
    return 0.01


def _rk4(V: PotentialSpec, x, k, t: float, dt: float):
    n_steps = max(1, int(np.ceil(abs(t) / dt - 1e-12)))
    h = t / n_steps
    for _ in range(n_steps):
        k1x, k1k = hamilton_rhs(V, x, k)
        k2x, k2k = hamilton_rhs(V, x + 0.5 * h * k1x, k + 0.5 * h * k1k)
        k3x, k3k = hamilton_rhs(V, x + 0.5 * h * k2x, k + 0.5 * h * k2k)
        k4x, k4k = hamilton_rhs(V, x + h * k3x, k + h * k3k)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        k = k + (h / 6.0) * (k1k + 2.0 * k2k + 2.0 * k3k + k4k)
    return x, k


def propagate(
    ens: ParticleEnsemble, V: PotentialSpec, t: float, dt: float | None = None
) -> ParticleEnsemble:
    """RK4 transport of every particle by time t; densities untouched."""
    if dt is None:
        dt = default_rk4_dt(V)
    if not dt > 0:
        raise ValueError("dt must be positive")
    x, k = _rk4(V, ens.positions[:, 0].copy(), ens.positions[:, 1].copy(), t, dt)
    return ParticleEnsemble(
        np.column_stack([x, k]), ens.densities.copy(), ens.seed_grid, ens.kind
    )


def interpolate_to_grid(
    ens: ParticleEnsemble,
    grid: PhaseSpaceGrid,
    *,
    k_neighbors: int = 16,
    radius_cells: float = 3.0,
    kind: str | None = None,
) -> PhaseSpaceField:
    """Moving-least-squares (quadratic) interpolation onto a grid.

    Coordinates are scaled by the seed-grid steps (the typical particle
    spacing), neighbors found with a KD-tree, and a weighted quadratic
    fit evaluated at each node.  Nodes farther than radius_cells from
    every particle get zero (the density is compactly supported); a node
    sitting exactly on a particle copies its value.
    """
    if ens.positions.shape[0] == 0:
        raise ValueError("empty ensemble")
    dx, dk = ens.seed_grid.x_axis.step, ens.seed_grid.k_axis.step
    pts = np.column_stack([ens.positions[:, 0] / dx, ens.positions[:, 1] / dk])
    tree = cKDTree(pts)
    kq = min(k_neighbors, pts.shape[0])
    xs = grid.x_axis.values / dx
    ks = grid.k_axis.values / dk
    out = np.zeros((grid.x_axis.count, grid.k_axis.count))

    nodes = np.column_stack(
        [np.repeat(xs, ks.size), np.tile(ks, xs.size)]
    )
    block = 32768
    for b0 in range(0, nodes.shape[0], block):
        q = nodes[b0 : b0 + block]
        dist, idx = tree.query(q, k=kq)
        if kq == 1:
            dist = dist[:, None]
            idx = idx[:, None]
        vals = np.zeros(q.shape[0])
        near = dist[:, 0] <= radius_cells
        exact = dist[:, 0] < 1e-9
        vals[exact] = ens.densities[idx[exact, 0]]
        todo = near & ~exact
        if np.any(todo):
            d = dist[todo]
            ii = idx[todo]
            du = pts[ii, 0] - q[todo, 0][:, None]
            dv = pts[ii, 1] - q[todo, 1][:, None]
            h = np.maximum(d[:, -1][:, None] / 1.5, 1e-6)
            w = np.exp(-((d / h) ** 2))
            basis = np.stack(
                [np.ones_like(du), du, dv, du * du, du * dv, dv * dv], axis=2
            )
            wb = w[:, :, None] * basis
            ata = np.einsum("nka,nkb->nab", wb, basis)
            ata += 1e-10 * np.eye(6)[None, :, :] * (
                1.0 + np.trace(ata, axis1=1, axis2=2)[:, None, None] / 6.0
            )
            atf = np.einsum("nka,nk->na", wb, ens.densities[ii])
            sol = np.linalg.solve(ata, atf[:, :, None])[:, :, 0]
            vals[todo] = sol[:, 0]
        out.flat[b0 : b0 + q.shape[0]] = vals
    return PhaseSpaceField(grid, out, kind or ens.kind)


def particle_marginal_x(ens: ParticleEnsemble, axis: Axis) -> np.ndarray:
    """dk-marginal estimated by area-weighted linear deposition onto x bins."""
    r = (ens.positions[:, 0] - axis.start) / axis.step
    i0 = np.floor(r).astype(int)
    frac = r - i0
    ok = (i0 >= -1) & (i0 <= axis.count - 1)
    out = np.zeros(axis.count + 2)
    np.add.at(out, i0[ok] + 1, (1.0 - frac[ok]) * ens.densities[ok])
    np.add.at(out, i0[ok] + 2, frac[ok] * ens.densities[ok])
    return out[1:-1] * ens.cell_area / axis.step


def particle_mass(ens: ParticleEnsemble) -> float:
    return float(np.sum(ens.densities) * ens.cell_area)


def particle_energy(ens: ParticleEnsemble, symbol) -> float:
    vals = symbol.evaluate(ens.positions[:, 0], ens.positions[:, 1])
    return float(np.real(np.sum(vals * ens.densities) * ens.cell_area))


def semi_lagrangian_evolve(
    w0: PhaseSpaceField,
    V: PotentialSpec,
    t: float,
    dt: float,
    grid: PhaseSpaceGrid,
) -> PhaseSpaceField:
    """Backward-characteristics oracle: sample W0 at RK4-backtraced feet.

    Bicubic interpolation of W0, zero outside its grid; exact for affine
    flows up to interpolation error.
    """
    if t == 0.0 and grid == w0.grid:
        return PhaseSpaceField(grid, w0.values.copy(), w0.kind)
    xg, kg = np.meshgrid(grid.x_axis.values, grid.k_axis.values, indexing="ij")
    xf, kf = _rk4(V, xg.ravel(), kg.ravel(), -t, dt)
    ix = (xf - w0.grid.x_axis.start) / w0.grid.x_axis.step
    ik = (kf - w0.grid.k_axis.start) / w0.grid.k_axis.step
    vals = ndimage.map_coordinates(
        w0.values, np.vstack([ix, ik]), order=3, mode="constant", cval=0.0
    )
    return PhaseSpaceField(grid, vals.reshape(xg.shape), w0.kind)


def kernel_evolution_reference(
    w_t: PhaseSpaceField, params: SmoothingParams, flow: FlowMap
) -> PhaseSpaceField:
    """Flow-distorted-kernel form of the Liouville-evolved smoothed field.

    Convolves the exactly evolved raw transform W(., t) with the Gaussian
    whose covariance is Sigma_t = Phi_t Sigma_0 Phi_t^T; computed as a
    2-D Fourier multiplier exp(-2 pi^2 zeta^T Sigma_t zeta).  Exact for
    V = a x^s, s in {0, 1, 2}.
    """
    if flow.kind == "numeric":
        raise ValueError("kernel evolution reference requires an exact flow")
    lin, _ = flow.matrix()
    s0 = params.eps / (4.0 * np.pi) * np.diag(
        [params.sigma_x**2, params.sigma_k**2]
    )
    sig = lin @ s0 @ lin.T
    z = np.fft.fftfreq(w_t.grid.x_axis.count, d=w_t.grid.x_axis.step)[:, None]
    y = np.fft.fftfreq(w_t.grid.k_axis.count, d=w_t.grid.k_axis.step)[None, :]
    mult = np.exp(
        -2.0 * np.pi**2 * (sig[0, 0] * z * z + 2.0 * sig[0, 1] * z * y + sig[1, 1] * y * y)
    )
    vals = np.fft.ifft2(np.fft.fft2(w_t.values) * mult).real
    return PhaseSpaceField(w_t.grid, vals, "smoothed")


def conservation_report(series, symbol) -> list[tuple[float, float, float]]:
    """(t, mass, energy) quadratures for a sequence of (t, field) pairs."""
    rows = []
    for t, w in series:
        e = trace_observable(symbol, w)
        rows.append((float(t), total_mass(w), float(np.real(e))))
    return rows


def conservation_to_csv(path: str, rows) -> None:
    lines = ["t,mass,energy"]
    for t, m, e in rows:
        lines.append(f"{float(t)!r},{float(m)!r},{float(e)!r}")
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def ensemble_to_csv(path: str, ens: ParticleEnsemble) -> None:
    lines = ["x,k,density"]
    for (x, k), d in zip(ens.positions, ens.densities):
        lines.append(f"{float(x)!r},{float(k)!r},{float(d)!r}")
    _atomic_write(path, ("\n".join(lines) + "\n").encode())
