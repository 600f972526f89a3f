"""Experiment orchestration: transforms, case studies, verification.

Verbs:

    swigner transform --config cfg.txt --out runs/t0
    swigner casestudy free|harmonic|uniform [--out DIR] [overrides]
    swigner evolve --config cfg.txt --out runs/e0
    swigner verify

Configs are plain ``key = value`` text (see ``format_config``); every
output directory receives the fully resolved config that was used.
Outputs are deterministic: identical configs give bit-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import grid as gridmod
from .grid import Axis, ComplexField1D, field_from_callable, l2_norm, make_axis
from .liouville import (
    FlowMap,
    conservation_to_csv,
    default_rk4_dt,
    ensemble_to_csv,
    exact_flow,
    interpolate_to_grid,
    kernel_evolution_reference,
    particle_energy,
    particle_marginal_x,
    particle_mass,
    propagate,
    seed_particles,
    semi_lagrangian_evolve,
)
from .phasespace import (
    PhaseSpaceField,
    PhaseSpaceGrid,
    SmoothingParams,
    marginal_k,
    marginal_to_csv,
    natural_grid,
    save_phase_field,
    smoothed_wigner,
    spectrogram,
    stft_spectrogram,
    total_mass,
    wigner,
    wigner_cross,
    wigner_point_oracle,
)
from .solutions import (
    GaussianPacket,
    PotentialSpec,
    build_f_eps,
    gaussian_packet_exact,
    harmonic_eigenfunction,
    harmonic_packet_exact,
    split_step_solve,
)
from .weylops import (
    IDENTITY_KINDS,
    apply_operator,
    build_evolution_operator,
    identity_pair,
    truncate,
)

GAUSSIAN_SUM_KS = (10.0 + 70.0j, 2.0 + 30.0j, 9.0 - 80.0j)


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat description of one experiment; round-trips through text."""

    potential: str = "free"  # free | uniform:<c> | harmonic:<w2> | poly:<c0,c1,..>
    eps: float = 0.7
    sigma_x: float = 0.5
    sigma_k: float = 0.5
    spec_sigma_x: float = 1.0
    spec_sigma_k: float = 1.0
    ic: str = "f_eps"  # f_eps | gaussian_sum | hermite:<n>:<omega> | file:<path>
    x_min: float = -4.0
    x_max: float = 4.0
    x_count: int = 2048
    y_count: int = 0  # 0 -> x_count
    k_min: float = -36.0
    k_max: float = 36.0
    seed_tol: float = 1e-4
    halo: int = 3
    t_final: float = 0.0
    snapshots: str = ""  # comma list; empty -> geometric schedule
    rk4_dt: float = 0.0  # 0 -> default_rk4_dt
    solver_dt: float = 0.0  # 0 -> auto
    report_x_min: float = 0.0
    report_x_max: float = 0.0
    report_x_count: int = 256
    report_k_min: float = 0.0
    report_k_max: float = 0.0
    report_k_count: int = 256
    out: str = "runs/out"

    def validate(self) -> None:
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        for name in ("sigma_x", "sigma_k", "spec_sigma_x", "spec_sigma_k"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.x_count < 2:
            raise ValueError("x_count must be >= 2")
        if not self.k_max > self.k_min:
            raise ValueError("k_max must exceed k_min")
        if not self.seed_tol > 0:
            raise ValueError("seed_tol must be positive")
        if self.halo < 0:
            raise ValueError("halo must be >= 0")
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        self.potential_spec()
        self.snapshot_times()

    # -- derived pieces --------------------------------------------------

    def potential_spec(self) -> PotentialSpec:
        p = self.potential
        if p == "free":
            return PotentialSpec.free()
        if p.startswith("uniform:"):
            return PotentialSpec.uniform(float(p.split(":", 1)[1]))
        if p.startswith("harmonic:"):
            return PotentialSpec.harmonic(float(p.split(":", 1)[1]))
        if p.startswith("poly:"):
            coeffs = tuple(float(c) for c in p.split(":", 1)[1].split(","))
            return PotentialSpec.polynomial(coeffs)
        raise ValueError(f"unknown potential {p!r}")

    def axis(self) -> Axis:
        step = (self.x_max - self.x_min) / self.x_count
        return Axis(self.x_min, step, self.x_count)

    def smoothing(self) -> SmoothingParams:
        return SmoothingParams(self.sigma_x, self.sigma_k, self.eps)

    def spec_smoothing(self) -> SmoothingParams:
        return SmoothingParams(self.spec_sigma_x, self.spec_sigma_k, self.eps)

    def initial_field(self) -> ComplexField1D:
        ax = self.axis()
        ic = self.ic
        if ic == "f_eps":
            return build_f_eps(self.eps, ax)
        if ic == "gaussian_sum":
            vals = np.zeros(ax.count, dtype=np.complex128)
            for K in GAUSSIAN_SUM_KS:
                vals += GaussianPacket(K, 0.0, 0.0).evaluate(ax.values)
            return ComplexField1D(ax, vals)
        if ic.startswith("hermite:"):
            _, n, omega = ic.split(":")
            return harmonic_eigenfunction(int(n), float(omega), self.eps, ax)
        if ic.startswith("file:"):
            return gridmod.load_field(ic.split(":", 1)[1])
        raise ValueError(f"unknown initial condition {ic!r}")

    def transform_grid(self) -> PhaseSpaceGrid:
        yc = self.y_count or self.x_count
        return natural_grid(
            self.axis(), self.eps, y_count=yc, k_window=(self.k_min, self.k_max)
        )

    def snapshot_times(self) -> list[float]:
        if self.snapshots.strip():
            times = sorted(float(s) for s in self.snapshots.split(","))
            if times and (times[0] <= 0 or times[-1] > self.t_final + 1e-12):
                raise ValueError("snapshots must lie in (0, t_final]")
            return times
        if self.t_final <= 0:
            return []
        # geometric in t plus the endpoint
        times = [self.t_final * (0.5**j) for j in range(3, -1, -1)]
        return sorted(set(times))

    def report_x_axis(self) -> Axis:
        lo = self.report_x_min if self.report_x_min != self.report_x_max else self.x_min
        hi = self.report_x_max if self.report_x_min != self.report_x_max else self.x_max
        return Axis(lo, (hi - lo) / self.report_x_count, self.report_x_count)

    def report_k_axis(self) -> Axis:
        lo = self.report_k_min if self.report_k_min != self.report_k_max else self.k_min
        hi = self.report_k_max if self.report_k_min != self.report_k_max else self.k_max
        return Axis(lo, (hi - lo) / self.report_k_count, self.report_k_count)


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {v!r}" if isinstance(v, float) else f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    """Parse key = value lines; errors carry the offending line number."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        try:
            t = types[key]
            if t in ("float", float):
                kwargs[key] = float(val)
            elif t in ("int", int):
                kwargs[key] = int(val)
            else:
                kwargs[key] = val
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key}: {exc}") from exc
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- case-study presets --------------------------------------------------------

_SQRT290 = float(np.sqrt(290.0))
_PERIOD290 = float(2.0 * np.pi / np.sqrt(290.0))
# harmonic run uses the flow-matched subcritical kernel (sigma_x/sigma_k =
# 2 pi/omega, product 1/4) so the transported kernel shape is invariant;
# see CONVENTIONS.md

CASE_PRESETS = {
    "free": ExperimentConfig(
        potential="free",
        eps=1.0,
        sigma_x=0.5,
        sigma_k=0.5,
        ic="gaussian_sum",
        x_min=-6.0,
        x_max=6.0,
        x_count=1536,
        y_count=1536,
        k_min=-21.0,
        k_max=21.0,
        seed_tol=1e-4,
        t_final=1.0,
        snapshots="0.25,0.5,1.0",
        report_x_min=-140.0,
        report_x_max=140.0,
        report_k_min=-21.0,
        report_k_max=21.0,
        out="runs/free",
    ),
    "harmonic": ExperimentConfig(
        potential=f"harmonic:{290.0!r}",
        eps=0.7,
        sigma_x=0.5 * float(np.sqrt(2.0 * np.pi / _SQRT290)),
        sigma_k=0.5 * float(np.sqrt(_SQRT290 / (2.0 * np.pi))),
        ic=f"hermite:9:{_SQRT290!r}",
        x_min=-2.0,
        x_max=2.0,
        x_count=512,
        y_count=2048,
        k_min=-4.2,
        k_max=4.2,
        seed_tol=1e-4,
        t_final=_PERIOD290,
        snapshots=",".join(repr(_PERIOD290 * j / 8.0) for j in range(1, 9)),
        report_x_min=-2.0,
        report_x_max=2.0,
        report_k_min=-4.2,
        report_k_max=4.2,
        out="runs/harmonic",
    ),
    "uniform": ExperimentConfig(
        potential=f"uniform:{2.0 * np.pi * 300.0!r}",
        eps=0.7,
        sigma_x=0.5,
        sigma_k=0.5,
        ic="f_eps",
        x_min=-4.0,
        x_max=4.0,
        x_count=2048,
        y_count=2048,
        k_min=-36.0,
        k_max=37.0,
        seed_tol=1e-4,
        t_final=0.06,
        snapshots="0.015,0.03,0.06",
        report_x_min=-21.0,
        report_x_max=15.0,
        report_k_min=-55.0,
        report_k_max=38.0,
        out="runs/uniform",
    ),
}


# -- ground truth --------------------------------------------------------------


def _bin_average(src_axis: Axis, src_vals: np.ndarray, dst: Axis) -> np.ndarray:
    """Deposit fine samples onto dst bins with the same tent kernel the
    particle marginals use, so the two sides carry identical mollifiers."""
    r = (src_axis.values - dst.start) / dst.step
    i0 = np.floor(r).astype(int)
    frac = r - i0
    ok = (i0 >= -1) & (i0 <= dst.count - 1)
    mass = src_vals * src_axis.step
    out = np.zeros(dst.count + 2)
    np.add.at(out, i0[ok] + 1, (1.0 - frac[ok]) * mass[ok])
    np.add.at(out, i0[ok] + 2, frac[ok] * mass[ok])
    return out[1:-1] / dst.step


def _ground_truth_series(cfg: ExperimentConfig, times: list[float]):
    """[(t, |u|^2 bin-averaged on the report x axis)] for t in times."""
    V = cfg.potential_spec()
    rep = cfg.report_x_axis()
    fine = Axis(rep.start - 0.45 * rep.step, rep.step / 10.0, rep.count * 10)

    if cfg.ic == "gaussian_sum" and V.kind == "free":
        out = []
        for t in times:
            u = np.zeros(fine.count, dtype=np.complex128)
            for K in GAUSSIAN_SUM_KS:
                u += gaussian_packet_exact(
                    GaussianPacket(K, 0.0, 0.0), cfg.eps, t, fine
                ).values
            out.append((t, _bin_average(fine, np.abs(u) ** 2, rep)))
        return out
    if cfg.ic.startswith("hermite:") and V.kind == "harmonic":
        phi = cfg.initial_field()
        dens = np.abs(phi.values) ** 2
        prof = _bin_average(phi.axis, dens, rep)
        return [(t, prof.copy()) for t in times]

    # split-step ground truth on an axis padded for the transported band
    pad = 2.0
    lo = min(cfg.x_min, rep.start) - pad
    hi = max(cfg.x_max, rep.end) + pad
    nu_max = max(abs(cfg.k_min), abs(cfg.k_max)) / cfg.eps
    vlo, vhi = exact_flow_band(cfg, V)
    nu_max = max(nu_max, abs(vlo) / cfg.eps, abs(vhi) / cfg.eps)
    step_target = 1.0 / (2.6 * nu_max)
    count = 1 << int(np.ceil(np.log2((hi - lo) / step_target)))
    solver_axis = Axis(lo, (hi - lo) / count, count)
    u0 = _sample_on_axis(cfg, solver_axis)
    dt = cfg.solver_dt or 2e-5
    series = split_step_solve(u0, V, cfg.eps, times[-1], dt, snapshot_times=times)
    return [
        (t, _bin_average(solver_axis, np.abs(u.values) ** 2, rep)) for t, u in series
    ]


def exact_flow_band(cfg: ExperimentConfig, V: PotentialSpec):
    """Scaled-wavenumber band swept by the transform window under the flow."""
    ks = np.array([cfg.k_min, cfg.k_max])
    if V.kind == "uniform_field":
        shift = -V.coefficients[1] * cfg.t_final / (2.0 * np.pi)
        ks = np.concatenate([ks, ks + shift])
    elif V.kind == "harmonic":
        w = np.sqrt(V.omega_sq)
        xmax = max(abs(cfg.x_min), abs(cfg.x_max))
        ks = np.concatenate([ks, ks + (w / (2 * np.pi)) * xmax * np.array([1, -1])])
    return float(ks.min()), float(ks.max())


def _sample_on_axis(cfg: ExperimentConfig, axis: Axis) -> ComplexField1D:
    tmp = replace(cfg, x_min=axis.start, x_max=axis.start + axis.step * axis.count,
                  x_count=axis.count)
    f = tmp.initial_field()
    return ComplexField1D(axis, f.values)


# -- commands ------------------------------------------------------------------


def _write_config(cfg: ExperimentConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    gridmod._atomic_write(
        os.path.join(out_dir, "config.txt"), format_config(cfg).encode()
    )


def cmd_transform(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Write WT, SWT, spectrogram of the initial condition plus marginals."""
    cfg.validate()
    out_dir = out_dir or cfg.out
    _write_config(cfg, out_dir)
    f = cfg.initial_field()
    grid = cfg.transform_grid()
    results = {}
    for name, field in (
        ("wigner", wigner(f, cfg.eps, grid)),
        ("swt", smoothed_wigner(f, cfg.smoothing(), grid)),
        ("spectrogram", spectrogram(f, cfg.spec_smoothing(), grid)),
    ):
        save_phase_field(os.path.join(out_dir, f"{name}.psf2"), field)
        marginal_to_csv(
            os.path.join(out_dir, f"{name}_marginal_x.csv"),
            grid.x_axis,
            marginal_k(field),
            label="x",
        )
        results[name] = field
    return results


def _evolve_marginals(
    cfg: ExperimentConfig,
    field0: PhaseSpaceField,
    times: list[float],
    V: PotentialSpec,
):
    """Particle transport; returns per-snapshot marginals and conservation."""
    rep_x = cfg.report_x_axis()
    ens = seed_particles(field0, cfg.seed_tol, cfg.halo)
    dt = cfg.rk4_dt or default_rk4_dt(V)
    sym = V.hamiltonian_symbol()
    marginals = []
    cons = [(0.0, particle_mass(ens), particle_energy(ens, sym))]
    t_prev = 0.0
    for t in times:
        ens = propagate(ens, V, t - t_prev, dt)
        t_prev = t
        marginals.append((t, particle_marginal_x(ens, rep_x)))
        cons.append((t, particle_mass(ens), particle_energy(ens, sym)))
    return marginals, cons, ens


def cmd_casestudy(name: str, cfg: ExperimentConfig | None = None, out_dir=None) -> dict:
    """Ground truth vs SWT-Liouville vs spectrogram-Liouville comparison."""
    if name not in CASE_PRESETS:
        raise ValueError(f"unknown case study {name!r}; pick from {sorted(CASE_PRESETS)}")
    cfg = cfg or CASE_PRESETS[name]
    cfg.validate()
    out_dir = out_dir or cfg.out
    _write_config(cfg, out_dir)
    V = cfg.potential_spec()
    times = cfg.snapshot_times()
    rep_x = cfg.report_x_axis()

    f = cfg.initial_field()
    grid = cfg.transform_grid()
    swt0 = smoothed_wigner(f, cfg.smoothing(), grid)
    spec0 = spectrogram(f, cfg.spec_smoothing(), grid)

    truth = _ground_truth_series(cfg, times)
    m_swt, cons_swt, ens_swt = _evolve_marginals(cfg, swt0, times, V)
    m_spec, cons_spec, ens_spec = _evolve_marginals(cfg, spec0, times, V)

    rows = []
    for (t, gt), (_, ms), (_, mp) in zip(truth, m_swt, m_spec):
        gt_l1 = float(np.sum(np.abs(gt)))
        err_s = float(np.sum(np.abs(ms - gt))) / gt_l1
        err_p = float(np.sum(np.abs(mp - gt))) / gt_l1
        rows.append((t, err_s, err_p))
        marginal_to_csv(
            os.path.join(out_dir, f"marginal_swt_t{t:.6f}.csv"), rep_x, ms
        )
        marginal_to_csv(
            os.path.join(out_dir, f"marginal_spectrogram_t{t:.6f}.csv"), rep_x, mp
        )
        marginal_to_csv(
            os.path.join(out_dir, f"amplitude_exact_t{t:.6f}.csv"), rep_x, gt
        )
    lines = ["t,swt_l1_error,spectrogram_l1_error"]
    for t, es, ep in rows:
        lines.append(f"{t!r},{es!r},{ep!r}")
    gridmod._atomic_write(
        os.path.join(out_dir, "report.csv"), ("\n".join(lines) + "\n").encode()
    )
    conservation_to_csv(os.path.join(out_dir, "conservation_swt.csv"), cons_swt)
    conservation_to_csv(
        os.path.join(out_dir, "conservation_spectrogram.csv"), cons_spec
    )
    ensemble_to_csv(os.path.join(out_dir, "particles_swt_final.csv"), ens_swt)

    # initial-marginal drift (the stationarity diagnostic for eigenfunctions)
    m0_swt = particle_marginal_x(seed_particles(swt0, cfg.seed_tol, cfg.halo), rep_x)
    m0_spec = particle_marginal_x(seed_particles(spec0, cfg.seed_tol, cfg.halo), rep_x)
    drift_swt = [
        float(np.sum(np.abs(ms - m0_swt)) / np.sum(np.abs(m0_swt))) for _, ms in m_swt
    ]
    drift_spec = [
        float(np.sum(np.abs(mp - m0_spec)) / np.sum(np.abs(m0_spec))) for _, mp in m_spec
    ]

    def rel_drift(cons):
        arr = np.array(cons)
        m0, e0 = arr[0, 1], arr[0, 2]
        dm = float(np.max(np.abs(arr[:, 1] - m0)) / abs(m0))
        de = float(np.max(np.abs(arr[:, 2] - e0)) / max(abs(e0), 1e-30))
        return dm, de

    mass_s, energy_s = rel_drift(cons_swt)
    mass_p, energy_p = rel_drift(cons_spec)
    return {
        "times": [r[0] for r in rows],
        "err_swt": [r[1] for r in rows],
        "err_spec": [r[2] for r in rows],
        "drift_swt": drift_swt,
        "drift_spec": drift_spec,
        "mass_drift_swt": mass_s,
        "energy_drift_swt": energy_s,
        "mass_drift_spec": mass_p,
        "energy_drift_spec": energy_p,
        "out": out_dir,
    }


def cmd_evolve(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Evolve the SWT of the initial condition; write snapshots and marginals."""
    cfg.validate()
    out_dir = out_dir or cfg.out
    _write_config(cfg, out_dir)
    V = cfg.potential_spec()
    times = cfg.snapshot_times()
    f = cfg.initial_field()
    grid = cfg.transform_grid()
    swt0 = smoothed_wigner(f, cfg.smoothing(), grid)
    save_phase_field(os.path.join(out_dir, "swt_t0.psf2"), swt0)
    marginals, cons, ens = _evolve_marginals(cfg, swt0, times, V)
    rep_grid = PhaseSpaceGrid(cfg.report_x_axis(), cfg.report_k_axis())
    for t, m in marginals:
        marginal_to_csv(os.path.join(out_dir, f"marginal_swt_t{t:.6f}.csv"),
                        cfg.report_x_axis(), m)
    w_final = interpolate_to_grid(ens, rep_grid)
    save_phase_field(os.path.join(out_dir, "swt_final.psf2"), w_final)
    ensemble_to_csv(os.path.join(out_dir, "particles_final.csv"), ens)
    conservation_to_csv(os.path.join(out_dir, "conservation.csv"), cons)
    return {"out": out_dir, "times": [t for t, _ in marginals]}


# -- verification --------------------------------------------------------------


class _Check:
    def __init__(self):
        self.failures = 0

    def __call__(self, name: str, measured: float, bound: float, larger_ok=False):
        ok = measured >= bound if larger_ok else measured <= bound
        tag = "PASS" if ok else "FAIL"
        rel = ">=" if larger_ok else "<="
        print(f"[{tag}] {name}: {measured:.3e} {rel} {bound:.3e}")
        if not ok:
            self.failures += 1


def cmd_verify(corrupt_ft: bool = False) -> int:
    """Run the oracle suite at desk scale; nonzero exit on any failure."""
    check = _Check()
    rng = np.random.default_rng(20240801)

    ax = make_axis(-8.0, 16.0 / 1024, 1024)
    gau = field_from_callable(ax, lambda x: np.exp(-np.pi * x * x))
    chirp = field_from_callable(
        ax, lambda x: np.exp(-np.pi * (x - 0.2) ** 2 + 2j * np.pi * 1.1 * x)
    )
    bump = field_from_callable(
        ax, lambda x: np.exp(-1.4 * np.pi * x * x - 2j * np.pi * 0.6 * x + 0.3j * np.pi * x * x)
    )

    F = gridmod.forward_ft(gau)
    check(
        "self-dual gaussian transform",
        float(np.max(np.abs(F.values - np.exp(-np.pi * F.axis.values**2)))),
        1e-10,
    )
    back = gridmod.inverse_ft(gridmod.forward_ft(chirp), ax)
    check(
        "transform round trip",
        l2_norm(ComplexField1D(ax, back.values - chirp.values)) / l2_norm(chirp),
        1e-12,
    )
    check(
        "Parseval",
        abs(l2_norm(gridmod.forward_ft(chirp)) - l2_norm(chirp)) / l2_norm(chirp),
        1e-10,
    )

    grid = natural_grid(ax, 1.0, k_window=(-4.0, 4.0))
    half_grid = natural_grid(ax, 1.0, y_count=512, k_window=(-4.0, 4.0))
    if corrupt_ft:
        old = gridmod._set_ft_sign_for_testing(+1.0)
    try:
        Wh = wigner(chirp, 1.0, half_grid)
        spec = gridmod.forward_ft(chirp)
        # k lattice of the y_count=512 grid coincides with the dual axis
        sel = [spec.axis.index_of(k) for k in half_grid.k_axis.values]
        marg_x = half_grid.x_axis.step * Wh.values.sum(axis=0)
        check(
            "x marginal equals |transform|^2",
            float(np.sum(np.abs(marg_x - np.abs(spec.values[sel]) ** 2)) * half_grid.k_axis.step),
            1e-8,
        )
    finally:
        if corrupt_ft:
            gridmod._set_ft_sign_for_testing(old)

    W = wigner(gau, 1.0, grid)
    X = grid.x_axis.values[:, None]
    K = grid.k_axis.values[None, :]
    check(
        "gaussian Wigner closed form",
        float(np.max(np.abs(W.values - np.sqrt(2) * np.exp(-2 * np.pi * (X**2 + K**2))))),
        1e-8,
    )
    check(
        "k marginal equals |f|^2",
        float(np.max(np.abs(marginal_k(W) - np.abs(gau.values) ** 2))),
        1e-8,
    )

    Wc = wigner_cross(chirp, bump, 1.0, grid)
    worst = 0.0
    for _ in range(20):
        i = int(rng.integers(0, grid.x_axis.count))
        j = int(rng.integers(0, grid.k_axis.count))
        o = wigner_point_oracle(
            chirp, bump, 1.0, float(grid.x_axis.values[i]), float(grid.k_axis.values[j])
        )
        worst = max(worst, abs(Wc[i, j] - o))
    check("fft path vs quadrature oracle", worst, 1e-8)

    prm = SmoothingParams(0.5, 0.5, 1.0)
    Ws = smoothed_wigner(gau, prm, grid)
    ex = (
        np.sqrt(2) / 1.25 * np.exp(-2 * np.pi * X**2 / 1.25) * np.exp(-2 * np.pi * K**2 / 1.25)
    )
    check("smoothed gaussian closed form", float(np.max(np.abs(Ws.values - ex))), 1e-8)
    check(
        "smoothing preserves mass",
        abs(total_mass(Ws) - total_mass(W)) / abs(total_mass(W)),
        1e-10,
    )

    crit = SmoothingParams(1.0, 1.0, 1.0)
    sp = spectrogram(chirp, crit, grid)
    check("spectrogram nonnegative", float(sp.values.min()), -1e-12, larger_ok=True)
    small = PhaseSpaceGrid(
        Axis(grid.x_axis.start, grid.x_axis.step * 8, grid.x_axis.count // 8),
        Axis(grid.k_axis.start, grid.k_axis.step * 8, grid.k_axis.count // 8),
    )
    sp_direct = stft_spectrogram(chirp, crit, small)
    sp_sub = sp.values[:: 8, :: 8][: small.x_axis.count, : small.k_axis.count]
    check(
        "spectrogram equals windowed-transform oracle",
        float(np.max(np.abs(sp_direct.values - sp_sub))),
        1e-6,
    )

    worst = 0.0
    for eps in (1.0, 0.7, 0.25):
        g_eps = natural_grid(ax, eps, k_window=(-3.0, 3.0))
        for s in (0.0, 0.5, 1.0):
            p = SmoothingParams(s, s, eps)
            for which in IDENTITY_KINDS:
                lhs, rhs = identity_pair(which, chirp, bump, p, g_eps)
                worst = max(
                    worst, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs)))
                )
    check("shift identities (4 kinds x eps x sigma)", worst, 1e-7)

    V = PotentialSpec.harmonic(290.0)
    p7 = SmoothingParams(0.5, 0.5, 0.7)
    G = build_evolution_operator(V.schrodinger_symbol(0.7).symbol(), p7)
    G0 = truncate(G, 0)
    cx = G0.coefficient(1, 0).coeffs.get((0, 1), 0.0)
    ck = G0.coefficient(0, 1).coeffs.get((1, 0), 0.0)
    check("Liouville transport d_x coefficient", abs(cx - 2 * np.pi * 0.7), 1e-12)
    check("Liouville transport d_k coefficient", abs(ck + 0.7 * 290.0 / (2 * np.pi)), 1e-12)
    G1 = truncate(G, 1)
    cmix = G1.coefficient(1, 1).coeffs.get((0, 0), 0.0)
    expect = 0.7**2 * (0.25 / 2.0 - 290.0 * 0.25 / (8.0 * np.pi**2))
    check("order-eps mixed coefficient", abs(cmix - expect), 1e-12)

    W7 = smoothed_wigner(
        field_from_callable(ax, lambda x: np.exp(-np.pi * x * x / 0.7)),
        p7,
        natural_grid(ax, 0.7, k_window=(-3.0, 3.0)),
    )
    GW = apply_operator(G1, W7)
    gross = float(
        np.sum(np.abs(GW.values)) * GW.grid.x_axis.step * GW.grid.k_axis.step
    )
    check("truncated generator conserves mass", abs(total_mass(GW)) / gross, 1e-8)

    pk = GaussianPacket(1.2 + 0.8j, 0.3 - 0.5j, 0.1)
    axp = make_axis(-12.0, 24.0 / 2048, 2048)

    def residual(u_of_t, V, t, dt=1e-4):
        um2, um1 = u_of_t(t - 2 * dt).values, u_of_t(t - dt).values
        up1, up2 = u_of_t(t + dt).values, u_of_t(t + 2 * dt).values
        ut = (-up2 + 8 * up1 - 8 * um1 + um2) / (12 * dt)
        u0 = u_of_t(t)
        uxx = gridmod.spectral_derivative(u0, 2).values
        res = 0.7 * ut - 0.5j * 0.7**2 * uxx + 1j * V.V(axp.values) * u0.values
        return float(np.max(np.abs(res)) / np.max(np.abs(u0.values)))

    check(
        "free packet solves the equation",
        residual(lambda t: gaussian_packet_exact(pk, 0.7, t, axp), PotentialSpec.free(), 0.5),
        1e-6,
    )
    check(
        "harmonic packet solves the equation",
        residual(
            lambda t: harmonic_packet_exact(pk, 290.0, 0.7, t, axp),
            PotentialSpec.harmonic(290.0),
            0.13,
            dt=2e-5,
        ),
        1e-6,
    )

    axh = make_axis(-2.0, 4.0 / 512, 512)
    phi9 = harmonic_eigenfunction(9, _SQRT290, 0.7, axh)
    period = _PERIOD290
    series = split_step_solve(phi9, V, 0.7, period, period / 4096, snapshot_times=[period])
    drift = float(np.max(np.abs(np.abs(series[-1][1].values) - np.abs(phi9.values))))
    check("eigenfunction amplitude stationarity", drift, 1e-6)

    x0, k0 = 0.3, -0.7
    xe, ke = exact_flow(145.0, 2, _PERIOD290, x0, k0)
    check("harmonic flow periodicity", abs(xe - x0) + abs(ke - k0), 1e-12)

    f2 = field_from_callable(ax, lambda x: np.exp(-np.pi * x * x + 2j * np.pi * x))
    g2 = natural_grid(ax, 1.0, y_count=4096, k_window=(-2.5, 4.5), x_window=(-4.0, 7.0))
    W0 = smoothed_wigner(f2, prm, g2)
    ens = seed_particles(W0, 1e-6)
    ens_t = propagate(ens, PotentialSpec.free(), 0.5, 0.01)
    rep = natural_grid(ax, 1.0, k_window=(-2.5, 4.5), x_window=(-4.0, 7.0))
    Wp = interpolate_to_grid(ens_t, rep)
    Xr, Kr = np.meshgrid(rep.x_axis.values, rep.k_axis.values, indexing="ij")
    xb, kb = exact_flow(0.0, 0, -0.5, Xr, Kr)
    ex0 = (
        np.sqrt(2) / 1.25
        * np.exp(-2 * np.pi * xb**2 / 1.25)
        * np.exp(-2 * np.pi * (kb - 1) ** 2 / 1.25)
    )
    check("particle transport matches pullback", float(np.max(np.abs(Wp.values - ex0))), 1e-4)
    Wsl = semi_lagrangian_evolve(W0, PotentialSpec.free(), 0.5, 0.05, rep)
    check(
        "particle vs semi-Lagrangian cross-check",
        float(np.sum(np.abs(Wp.values - Wsl.values)) / np.sum(np.abs(Wsl.values))),
        1e-3,
    )
    # t short enough that the transported packet stays padded on the axis
    t_k = 0.3
    Wsl3 = semi_lagrangian_evolve(W0, PotentialSpec.free(), t_k, 0.05, rep)
    ut = gaussian_packet_exact(GaussianPacket(np.pi, -2j * np.pi, 0.0), 1.0, t_k, ax)
    Wt = wigner(ut, 1.0, rep)
    ref = kernel_evolution_reference(Wt, prm, FlowMap.from_potential(PotentialSpec.free(), t_k))
    check(
        "flow-distorted kernel identity",
        float(np.max(np.abs(Wsl3.values - ref.values)) / np.max(np.abs(ref.values))),
        1e-4,
    )

    # interference taming on the two-packet input
    eps_i = 0.1
    axi = make_axis(-4.0, 8.0 / 1024, 1024)
    two = field_from_callable(
        axi,
        lambda x: np.exp(-np.pi * (x - 2) ** 2 / eps_i) + np.exp(-np.pi * (x + 2) ** 2 / eps_i),
    )
    gi = natural_grid(axi, eps_i, k_window=(-1.2, 1.2))
    Wi = wigner(two, eps_i, gi)
    Si = smoothed_wigner(two, SmoothingParams(0.5, 0.5, eps_i), gi)
    mid = np.abs(gi.x_axis.values) < 0.5
    ratio = float(np.max(np.abs(Wi.values[mid])) / max(np.max(np.abs(Si.values[mid])), 1e-300))
    check("interference taming ratio", ratio, 5.0, larger_ok=True)

    print(f"{check.failures} failure(s)")
    return 1 if check.failures else 0


# -- entry point ---------------------------------------------------------------


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    over = {}
    if args.resolution:
        over["x_count"] = args.resolution
        over["y_count"] = args.resolution
    if args.sigma_x is not None:
        over["sigma_x"] = args.sigma_x
    if args.sigma_k is not None:
        over["sigma_k"] = args.sigma_k
    if args.eps is not None:
        over["eps"] = args.eps
    if args.out:
        over["out"] = args.out
    return replace(cfg, **over) if over else cfg


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="swigner", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("transform", "casestudy", "evolve", "verify"):
        p = sub.add_parser(name)
        if name == "casestudy":
            p.add_argument("name", choices=sorted(CASE_PRESETS))
        if name != "verify":
            p.add_argument("--config", default=None)
            p.add_argument("--out", default=None)
            p.add_argument("--resolution", type=int, default=None)
            p.add_argument("--sigma-x", dest="sigma_x", type=float, default=None)
            p.add_argument("--sigma-k", dest="sigma_k", type=float, default=None)
            p.add_argument("--eps", type=float, default=None)
        else:
            p.add_argument("--corrupt-ft", action="store_true")
    args = ap.parse_args(argv)

    if args.command == "verify":
        return cmd_verify(corrupt_ft=args.corrupt_ft)
    if args.command == "casestudy":
        base = load_config(args.config) if args.config else CASE_PRESETS[args.name]
        cfg = _apply_overrides(base, args)
        summary = cmd_casestudy(args.name, cfg, args.out)
        for t, es, ep in zip(summary["times"], summary["err_swt"], summary["err_spec"]):
            print(f"t={t:.4f}  swt_err={es:.4f}  spectrogram_err={ep:.4f}")
        print(f"outputs in {summary['out']}")
        return 0
    base = load_config(args.config) if args.config else ExperimentConfig()
    cfg = _apply_overrides(base, args)
    if args.command == "transform":
        cmd_transform(cfg, args.out)
    else:
        cmd_evolve(cfg, args.out)
    print(f"outputs in {args.out or cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
