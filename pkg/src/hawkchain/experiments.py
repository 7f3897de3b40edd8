"""Experiment orchestration: build the model from a :class:`RunConfig`, run
it, and write tables plus a ``summary.ini`` into the output directory.

Work may fan out over a thread pool; results are collected in input order and
all files are written from the calling thread.
"""
from __future__ import annotations

import platform
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import RunConfig, dumps_config, parse_config_text
from .continuum import (
    TRAP_RADIUS,
    PacketConfig,
    center_speed,
    crosses_horizon,
    evolve_packet,
    trapping_interval,
    write_heatmap,
    write_validity_report,
)
from .devicemodel import (
    CouplerTriple,
    SYNTHETIC_COUPLER,
    chain_zpa,
    coupler_freq_for_coupling,
    coupling_from_swap,
    fit_spectroscopy,
    swap_probability,
    synthetic_spectroscopy,
    write_device_file,
    write_fit_report,
)
from .dynamics import (
    PropagatorCache,
    SectorState,
    basis_state,
    bell_pair_state,
    evolve,
    occupations,
    reduced_density_matrix,
    single_particle_amplitudes,
    write_trajectory,
)
from .exceptions import ConfigError, InvalidParameter
from .lattice import (
    CouplingProfile,
    HamiltonianSpec,
    centered_profile,
    disorder_hamiltonian,
    flat_profile,
    read_profile_table,
    tanh_profile,
    write_profile_table,
)
from .observables import concurrence, p_out, von_neumann_entropy
from .radiation import (
    average_positive,
    equivalent_mass,
    exterior_spectrum,
    fit_temperature,
    kelvin,
    single_excitation_spectrum,
    write_fit_summary,
    write_spectrum,
)
from .tables import dumps_keyvalue, write_table
from .units import angular_to_mhz, mhz_to_angular

DENSE_LIMIT = 14


@dataclass
class RunResult:
    out_dir: Path
    files: list = field(default_factory=list)
    results: dict = field(default_factory=dict)


class _Writer:
    """Collects file writes so they happen in one place, in a fixed order."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files = []

    def __call__(self, name: str, fn, *args, **kw):
        path = self.out_dir / name
        fn(path, *args, **kw)
        self.files.append(path)
        return path


def _pmap(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def build_profile(cfg: RunConfig, profile: str | None = None, n: int | None = None, j_h: int | None = None) -> CouplingProfile:
    lat = cfg.section("lattice")
    kind = profile or lat.profile
    n = n or lat.n
    j_h = j_h or lat.j_h
    if kind == "tanh":
        return tanh_profile(mhz_to_angular(lat.beta_mhz), lat.eta_d, j_h, n)
    if kind == "flat":
        return flat_profile(mhz_to_angular(lat.kappa_mhz), n)
    if kind == "centered":
        return centered_profile(mhz_to_angular(lat.beta_mhz), lat.eta_d, n)
    prof = read_profile_table(lat.table)
    if prof.site_count != n:
        raise ConfigError(f"profile table has {prof.site_count} sites, lattice has {n}")
    return prof


def build_initial(cfg: RunConfig, n: int):
    """``SectorState`` for pattern or Bell initial states, an int site otherwise."""
    ini = cfg.initial
    if ini is None or ini.state == "bell":
        return bell_pair_state(n)
    if ini.site is not None:
        return int(ini.site)
    return basis_state(ini.state)


def _is_single(state) -> bool:
    return isinstance(state, int) or set(state.sectors) == {1}


def _single_vector(state, n: int):
    return state if isinstance(state, int) else np.asarray(state.sectors[1])


def _time_grid(cfg: RunConfig) -> np.ndarray:
    tm = cfg.section("time")
    return np.linspace(0.0, tm.t_max_ns, tm.n_samples)


def _occupation_traj(h: HamiltonianSpec, state, times, threads: int) -> np.ndarray:
    if _is_single(state):
        return np.clip(np.abs(single_particle_amplitudes(h, times, _single_vector(state, h.n))) ** 2, 0, 1)
    cache = PropagatorCache(h, state.sectors)
    return np.array(_pmap(lambda t: occupations(evolve(h, state, float(t), cache)), times, threads))


def _final_state(h: HamiltonianSpec, state, t: float):
    if _is_single(state):
        return single_particle_amplitudes(h, [t], _single_vector(state, h.n))[0]
    return evolve(h, state, t)


def _spectrum(h: HamiltonianSpec, final, j_h: int, meta: dict):
    if isinstance(final, SectorState):
        if h.n > DENSE_LIMIT:
            raise ConfigError(f"multi-excitation radiation limited to n <= {DENSE_LIMIT}")
        return exterior_spectrum(h, final, j_h, meta)
    return single_excitation_spectrum(h, final, j_h, meta)


def _radiation_points(cfg: RunConfig, h: HamiltonianSpec, state, j_h: int):
    t = cfg.section("time").t_max_ns
    spec = _spectrum(h, _final_state(h, state, t), j_h, {"t_ns": t})
    rad = cfg.section("radiation")
    return spec, average_positive(spec, mhz_to_angular(rad.e_tol_mhz))


def _fit(cfg: RunConfig, points):
    e_max = cfg.section("radiation").e_max_mhz
    return fit_temperature(points, None if e_max is None else mhz_to_angular(e_max))


def _points_rows(points):
    return ((angular_to_mhz(float(e)), float(p), float(np.log(p)) if p > 0 else float("-inf")) for e, p in points)


POINTS_HEADER = ("E_bar_over_2pi_MHz", "P_bar", "ln_P_bar")


def run_walk(cfg: RunConfig, w: _Writer) -> dict:
    prof = build_profile(cfg)
    h = HamiltonianSpec(prof)
    state = build_initial(cfg, h.n)
    times = _time_grid(cfg)
    p = _occupation_traj(h, state, times, cfg.run.threads)
    j_h = cfg.section("lattice").j_h
    pout = np.array([p_out(row, j_h) for row in p])
    w("profile.tsv", lambda path: write_profile_table(prof, path))
    w("trajectory.tsv", write_trajectory, times, p)
    w("p_out.tsv", write_table, ("t_ns", "p_out"), zip(times.tolist(), pout.tolist()))
    return {"p_out_final": float(pout[-1]), "p_out_max": float(pout.max()), "p_out_mean": float(pout.mean())}


def run_radiation(cfg: RunConfig, w: _Writer) -> dict:
    lat = cfg.section("lattice")
    prof = build_profile(cfg)
    h = HamiltonianSpec(prof)
    state = build_initial(cfg, h.n)
    spec, points = _radiation_points(cfg, h, state, lat.j_h)
    fit = _fit(cfg, points)
    theory = lat.beta_mhz / (4 * np.pi) if lat.profile == "tanh" else None
    times = _time_grid(cfg)
    p = _occupation_traj(h, state, times, cfg.run.threads)
    pout = [p_out(row, lat.j_h) for row in p]
    w("profile.tsv", lambda path: write_profile_table(prof, path))
    w("spectrum.tsv", write_spectrum, spec)
    w("points.tsv", write_table, POINTS_HEADER, _points_rows(points))
    w("fit.ini", write_fit_summary, fit, theory)
    w("p_out.tsv", write_table, ("t_ns", "p_out"), zip(times.tolist(), pout))
    out = {
        "T_H_MHz": fit.t_h_mhz,
        "T_H_stderr_MHz": angular_to_mhz(fit.t_h_stderr),
        "T_kelvin": fit.t_kelvin,
        "n_points": fit.n_points,
        "degenerate": fit.degenerate,
        "spectrum_total": spec.total,
    }
    if theory is not None:
        t_th = kelvin(mhz_to_angular(theory))
        out.update(theory_T_H_MHz=theory, theory_T_kelvin=t_th, theory_mass_ratio=equivalent_mass(t_th))
    return out


def run_entangle(cfg: RunConfig, w: _Writer) -> dict:
    ent = cfg.section("entangle")
    n = cfg.section("lattice").n
    t_max = cfg.section("time").t_max_ns
    times = np.arange(0.0, t_max + ent.step_ns / 2, ent.step_ns)
    ini = cfg.initial
    state = bell_pair_state(n) if ini is None or ini.state in (None, "bell") else basis_state(ini.state)
    if isinstance(state, int):
        raise ConfigError("entanglement runs need a state pattern or bell")

    def one(kind):
        h = HamiltonianSpec(build_profile(cfg, kind))
        cache = PropagatorCache(h, state.sectors)

        def at(t):
            rho = reduced_density_matrix(evolve(h, state, float(t), cache), ent.subset)
            return von_neumann_entropy(rho), concurrence(rho)

        return [at(t) for t in times]

    per = _pmap(one, ent.profiles, cfg.run.threads)
    rows = [(kind, float(t), s, c) for kind, vals in zip(ent.profiles, per) for t, (s, c) in zip(times, vals)]
    w("entangle.tsv", write_table, ("profile", "t_ns", "entropy_bits", "concurrence"), rows)
    out = {}
    for kind, vals in zip(ent.profiles, per):
        out[f"{kind}_entropy_final"] = vals[-1][0]
        out[f"{kind}_concurrence_final"] = vals[-1][1]
    return out


def run_continuum(cfg: RunConfig, w: _Writer) -> dict:
    c = cfg.continuum
    try:
        pc = PacketConfig.spanning(c.x_min, c.x_max, c.d, alpha=c.alpha, k=c.k, delta=c.delta, x0=c.x0, mu=c.mu)
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from None
    if c.metric == "flat":
        def f(x):
            return np.ones_like(x)
    else:
        def f(x):
            return np.tanh(c.alpha * x)
    times = np.linspace(0.0, c.t_max, c.n_samples)
    traj = evolve_packet(pc, f, times)
    center = traj.center()
    right = traj.prob[:, traj.x > 0].sum(axis=1)
    radius = TRAP_RADIUS * c.d
    w("heatmap.tsv", write_heatmap, traj, c.site_stride)
    w("center.tsv", write_table, ("t", "center", "p_right"), zip(times.tolist(), center.tolist(), right.tolist()))
    w("validity.ini", write_validity_report, pc)
    out = {"sites": pc.n, "norm_error": traj.norm_error, "edge_weight": traj.edge_weight, "trap_radius": radius}
    if c.metric == "flat":
        out["center_speed"] = center_speed(traj)
    else:
        t_in, t_out = trapping_interval(traj, radius) if abs(center[0]) >= radius else (None, None)
        out.update(crosses_horizon=crosses_horizon(traj), min_abs_center=float(np.min(np.abs(center))),
                   trap_enter=t_in, trap_exit=t_out, escaped=t_out is not None)
    return out


def run_device(cfg: RunConfig, w: _Writer) -> dict:
    dev = cfg.device
    truth = CouplerTriple.from_device(dev.coupler)
    zpa = np.linspace(dev.zpa_min, dev.zpa_max, dev.zpa_points)
    data = synthetic_spectroscopy(truth, zpa, dev.noise_mhz, dev.seed)
    # start a few percent away from the synthetic ground truth
    init = replace(truth, g_qc=truth.g_qc * 1.05, g_q2c=truth.g_q2c * 0.95,
                   coupler=replace(truth.coupler, E_JJ=truth.coupler.E_JJ * 1.03,
                                   A=truth.coupler.A * 0.975, phi=truth.coupler.phi * 1.05))
    fit = fit_spectroscopy(data, init, seed=dev.seed, restarts=dev.restarts)
    ts = np.arange(0.0, dev.swap_t_max_ns, 1.0)
    p01 = swap_probability(dev.g_swap_mhz, 0.0, ts)
    g_est = coupling_from_swap(ts, p01)

    rows = []
    if cfg.lattice is not None:
        kappa = angular_to_mhz(build_profile(cfg).couplings)
        zs = chain_zpa(kappa, dev.omega_ghz, SYNTHETIC_COUPLER)
        for j, (k, z) in enumerate(zip(kappa, zs), 1):
            wc = coupler_freq_for_coupling(CouplerTriple.from_device(j, dev.omega_ghz), -k)
            rows.append((j, float(k), float(-k), wc, float(z)))

    w("device.ini", write_device_file)
    w("spectroscopy.tsv", write_table, ("scan", "zpa", "freq_ghz"),
      [(name, float(z), float(f)) for name in ("three_body", "left", "right") for z, f in zip(*getattr(data, name))])
    w("spectroscopy_fit.ini", write_fit_report, fit)
    w("swap.tsv", write_table, ("t_ns", "P01"), zip(ts.tolist(), p01.tolist()))
    if rows:
        w("coupler_zpa.tsv", write_table, ("bond", "kappa_mhz", "g_eff_mhz", "omega_c_ghz", "zpa"), rows)
    tc = truth.coupler
    return {
        "swap_g_mhz": g_est,
        "swap_first_zero_ns": 1e3 / (4 * dev.g_swap_mhz),
        "fit_g_qc_rel_error": fit.g_qc / truth.g_qc - 1,
        "fit_g_q2c_rel_error": fit.g_q2c / truth.g_q2c - 1,
        "fit_E_JJ_rel_error": fit.coupler.E_JJ / tc.E_JJ - 1,
        "fit_A_rel_error": fit.coupler.A / tc.A - 1,
        "fit_phi_rel_error": fit.coupler.phi / tc.phi - 1,
        "fit_residual_mhz2": fit.residual,
    }


def realization_seeds(seed: int, count: int) -> list:
    """Independent per-realization seeds spawned from one root seed."""
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def _shifted_stats(values):
    """Mean and population std computed relative to the first value.

    Identical inputs give back exactly that value with zero spread.
    """
    x = np.asarray(values, dtype=float)
    d = x - x[0]
    return float(x[0] + d.mean()), float(d.std())


def aggregate_points(per_realization: list) -> list:
    """Rank-aligned ``(rank, E_mean, E_std, lnP_mean, lnP_std, count)``.

    Rank r collects the r-th positive level of every realization that has one.
    """
    depth = max(len(p) for p in per_realization)
    out = []
    for r in range(depth):
        rows = [p[r] for p in per_realization if len(p) > r]
        e_m, e_s = _shifted_stats([x[0] for x in rows])
        l_m, l_s = _shifted_stats([np.log(x[1]) for x in rows])
        out.append((r + 1, e_m, e_s, l_m, l_s, len(rows)))
    return out


def ln_deviation(points, clean) -> float:
    """Mean ``|ln P_bar - ln P_bar_clean|`` over the ranks both curves share."""
    m = min(len(points), len(clean))
    return float(np.mean(np.abs(np.log(points[:m, 1]) - np.log(clean[:m, 1]))))


def _disorder_sweep(cfg: RunConfig, w: _Writer) -> dict:
    dis = cfg.disorder
    lat = cfg.section("lattice")
    prof = build_profile(cfg)
    state = build_initial(cfg, lat.n)
    _, clean = _radiation_points(cfg, HamiltonianSpec(prof), state, lat.j_h)
    seeds = realization_seeds(dis.seed, dis.realizations)
    grid = [(a, b) for a in dis.w_nnn_mhz for b in dis.w_mu_mhz]

    def one(job):
        (w_nnn, w_mu), seed = job
        h = disorder_hamiltonian(prof, mhz_to_angular(w_nnn), mhz_to_angular(w_mu), seed)
        return _radiation_points(cfg, h, state, lat.j_h)[1]

    jobs = [(g, s) for g in grid for s in seeds]
    pts = _pmap(one, jobs, cfg.run.threads)
    per_rows, agg_rows, out = [], [], {}
    for gi, (w_nnn, w_mu) in enumerate(grid):
        block = pts[gi * len(seeds):(gi + 1) * len(seeds)]
        for r, p in enumerate(block):
            per_rows += [(w_nnn, w_mu, r + 1, j + 1, angular_to_mhz(float(e)), float(np.log(q))) for j, (e, q) in enumerate(p)]
        agg = aggregate_points(block)
        agg_rows += [(w_nnn, w_mu, rank, angular_to_mhz(em), angular_to_mhz(es), lm, ls, cnt) for rank, em, es, lm, ls, cnt in agg]
        out[f"deviation_nnn_{w_nnn!r}_mu_{w_mu!r}"] = float(np.mean([ln_deviation(p, clean) for p in block]))
    w("clean_points.tsv", write_table, POINTS_HEADER, _points_rows(clean))
    w("realizations.tsv", write_table, ("w_nnn_mhz", "w_mu_mhz", "realization", "rank", "E_bar_over_2pi_MHz", "ln_P_bar"), per_rows)
    w("aggregate.tsv", write_table,
      ("w_nnn_mhz", "w_mu_mhz", "rank", "E_mean_MHz", "E_std_MHz", "lnP_mean", "lnP_std", "count"), agg_rows)
    out["realizations"] = dis.realizations
    return out


def _size_sweep(cfg: RunConfig, w: _Writer) -> dict:
    sw = cfg.sweep
    jobs = [(n, j) for n in sw.sizes for j in sw.horizons if j < n]
    if not jobs:
        raise ConfigError("no horizon index lies inside any chain size")
    ini = cfg.section("initial")
    if ini.site is None:
        raise ConfigError("size sweeps need [initial] site")
    t = cfg.section("time").t_max_ns

    def one(job):
        n, j_h = job
        h = HamiltonianSpec(build_profile(cfg, "tanh", n, j_h))
        psi = single_particle_amplitudes(h, [t], ini.site)[0]
        pts = average_positive(single_excitation_spectrum(h, psi, j_h), mhz_to_angular(cfg.section("radiation").e_tol_mhz))
        return pts, _fit(cfg, pts)

    res = _pmap(one, jobs, cfg.run.threads)
    spec_rows = [(n, j, angular_to_mhz(float(e)), float(p)) for (n, j), (pts, _) in zip(jobs, res) for e, p in pts]
    fit_rows = [(n, j, f.t_h_mhz, angular_to_mhz(f.t_h_stderr), f.n_points) for (n, j), (_, f) in zip(jobs, res)]
    w("size_points.tsv", write_table, ("n", "j_h", "E_bar_over_2pi_MHz", "P_bar"), spec_rows)
    w("size_fits.tsv", write_table, ("n", "j_h", "T_H_MHz", "T_H_stderr_MHz", "n_points"), fit_rows)
    return {f"T_H_MHz_n{n}_jh{j}": f.t_h_mhz for (n, j), (_, f) in zip(jobs, res)}


def run_sweep(cfg: RunConfig, w: _Writer) -> dict:
    if cfg.sweep.kind == "size":
        return _size_sweep(cfg, w)
    return _disorder_sweep(cfg, w)


RUNNERS = {
    "walk": run_walk,
    "radiation": run_radiation,
    "entangle": run_entangle,
    "continuum": run_continuum,
    "device": run_device,
    "sweep": run_sweep,
}


def prepare_output(out_dir, overwrite: bool) -> Path:
    out = Path(out_dir)
    if out.exists():
        if not out.is_dir():
            raise ConfigError(f"output path {out} is not a directory")
        if any(out.iterdir()):
            if not overwrite:
                raise ConfigError(f"output directory {out} is not empty (use --overwrite)")
            shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def versions() -> dict:
    return {"hawkchain": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(cfg: RunConfig, out_dir=None, overwrite: bool = False) -> RunResult:
    """Execute ``cfg`` and write its outputs plus ``summary.ini``."""
    out = prepare_output(out_dir or cfg.run.output or f"hawkchain-out/{cfg.experiment}", overwrite)
    w = _Writer(out)
    start = time.perf_counter()
    results = RUNNERS[cfg.experiment](cfg, w)
    wall = time.perf_counter() - start
    text = dumps_config(cfg, prefix="config.") + dumps_keyvalue({
        "results": {k: v for k, v in results.items() if v is not None},
        "versions": versions(),
        "timing": {"wall_time_s": round(wall, 3)},
    })
    summary = out / "summary.ini"
    summary.write_text(text, encoding="utf-8")
    w.files.append(summary)
    return RunResult(out, w.files, results)


def sweep(cfg: RunConfig, out_dir=None, overwrite: bool = False) -> RunResult:
    if cfg.experiment != "sweep":
        cfg = replace(cfg, run=replace(cfg.run, experiment="sweep"))
    return run(cfg, out_dir, overwrite)


def load_summary_config(path) -> RunConfig:
    """The config echoed in a ``summary.ini``."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"), prefix="config.")
