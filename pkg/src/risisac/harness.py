"""Frame-protocol simulation, experiment sweeps and CSV output.

All randomness is derived from the run seed with ``np.random.default_rng([seed, ...])``
so every CSV row depends only on (config, seed). Wall-clock timings never
enter the main CSV; they go to a ``.timing.csv`` sidecar.
"""

from __future__ import annotations

import csv
import io
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import optimize as opt
from . import sensing as sen
from . import sp_link as spl
from .channel import SceneConfig
from .config import RunConfig, dump_config

EXPERIMENTS = ("rmse-vs-crb", "crb-vs-mr", "ifft-vs-mle", "rate-validate", "rate-vs-mr", "power-sweep", "frame-sim")
CSV_HEADER = ("experiment", "sweep_var", "sweep_value", "ue", "metric", "value", "stderr")


@dataclass
class Row:
    experiment: str
    sweep_var: str
    sweep_value: float
    ue: str
    metric: str
    value: float
    stderr: float | None = None


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.experiment, r.sweep_var, _num(r.sweep_value), r.ue, r.metric, _num(r.value), _num(r.stderr)])
    return buf.getvalue()


# ----------------------------------------------------------------- mobility


@dataclass
class MobilityModel:
    """Horizontal random walk; ``cov`` is (2, 2) shared or (K, 2, 2) per UE, in m^2."""

    cov: np.ndarray
    n_intervals: int = 1

    def __post_init__(self):
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.shape[-2:] != (2, 2):
            raise ValueError("walk covariance must be 2x2 per UE")
        mats = self.cov.reshape(-1, 2, 2)
        if not np.allclose(mats, np.swapaxes(mats, 1, 2)) or np.any(np.linalg.eigvalsh(mats) < -1e-12):
            raise ValueError("walk covariance must be symmetric PSD")

    @classmethod
    def isotropic(cls, std_m: float, n_intervals: int = 1) -> "MobilityModel":
        return cls(std_m**2 * np.eye(2), n_intervals)


def step_mobility(positions, model: MobilityModel, rng: np.random.Generator) -> np.ndarray:
    """One random-walk step in the horizontal plane; heights are untouched."""
    pos = np.array(positions, dtype=float, copy=True)
    cov = np.broadcast_to(model.cov, (pos.shape[0], 2, 2))
    # eigen-factor so singular (e.g. zero) covariances work
    w, v = np.linalg.eigh(cov)
    root = v * np.sqrt(np.clip(w, 0, None))[:, None, :]
    pos[:, :2] += np.einsum("kij,kj->ki", root, rng.standard_normal((pos.shape[0], 2)))
    return pos


# ------------------------------------------------------------ frame protocol


@dataclass
class IntervalReport:
    interval: int
    positions: np.ndarray
    estimates: np.ndarray  # NaN rows for failed sensing
    sensed: np.ndarray  # bool per UE
    cf_rate_est: np.ndarray
    cf_rate_acc: np.ndarray
    mc_rate_est: np.ndarray
    mc_rate_est_se: np.ndarray
    mc_rate_acc: np.ndarray
    mc_rate_acc_se: np.ndarray
    block_sum_rate_est: np.ndarray
    block_sum_rate_acc: np.ndarray

    @property
    def position_error(self) -> np.ndarray:
        return np.linalg.norm(self.estimates - self.positions, axis=1)


def protocol_budget(scene: SceneConfig) -> tuple[int, int, int]:
    """(sensing snapshots, data/pilot symbols, total symbols) per location interval."""
    total = int(round(scene.tau_l * scene.bandwidth))
    used = scene.n_snapshots + scene.n_coherence * scene.n_symbols
    if used != total:
        raise ValueError("frame budget does not add up")
    return scene.n_snapshots, scene.n_coherence * scene.n_symbols, total


def run_frame(
    scene: SceneConfig,
    sense_scene: SceneConfig,
    sp: spl.SpConfig,
    ga: opt.GaParams,
    mobility: MobilityModel,
    n_intervals: int,
    seed: int = 0,
    sense_seed: int = 1,
    m_f: int = 256,
    noiseless: bool = False,
    n_blocks: int | None = None,
) -> list[IntervalReport]:
    """Simulate ``n_intervals`` location-coherence intervals.

    Each interval moves the UEs, senses their positions with the (possibly
    larger) sensing RIS, optimizes the phases twice (on the estimated and on
    the true positions) and scores both profiles on the true channel: the
    closed form with true statistics, and Monte Carlo over the interval's
    coherence blocks with LMMSE scalars taken from the estimated positions.
    """
    protocol_budget(scene)
    n_blocks = scene.n_coherence if n_blocks is None else n_blocks
    setup = sen.make_sensing_setup(sense_scene, seed=sense_seed)
    dictionary = sen.ifft_dictionary(sense_scene, setup, m_f)
    weighted = sen.weighted_phases(sense_scene, setup)
    positions = scene.ue_positions.copy()
    last_est = positions.copy()
    reports = []
    for n in range(n_intervals):
        positions = step_mobility(positions, mobility, np.random.default_rng([seed, n, 0]))
        true_scene = scene.with_ues(positions)
        s_scene = sense_scene.with_ues(positions)
        noise_rng = np.random.default_rng([seed, n, 1])
        est = np.full_like(positions, np.nan)
        ok = np.zeros(scene.n_ue, dtype=bool)
        for k in range(scene.n_ue):
            if noiseless:
                y = sen.noiseless_rx(s_scene, setup, sen.true_angle(s_scene, k), sen.varrho(s_scene, setup, k))
            else:
                y = sen.simulate_sensing(s_scene, setup, k, noise_rng)
            try:
                est[k] = sen.estimate(y, s_scene, setup, k, dictionary, weighted).position
                ok[k] = True
            except (ValueError, ArithmeticError):
                pass
        last_est = np.where(ok[:, None], est, last_est)
        est_scene = scene.with_ues(last_est)
        ga_n = replace(ga, seed=int(np.random.default_rng([seed, n, 2]).integers(2**31)))
        prof_est = opt.ga_optimize(est_scene, sp, params=ga_n).phases
        prof_acc = opt.ga_optimize(true_scene, sp, params=ga_n).phases
        cf_est = spl.closed_form_rate(true_scene, prof_est, sp).rate
        cf_acc = spl.closed_form_rate(true_scene, prof_acc, sp).rate
        chi_hat = spl.compute_moments(est_scene, prof_est).chi[0]
        mc_seed = [seed, n, 3]
        mc_est = spl.empirical_rate(true_scene, prof_est, sp, n_blocks, np.random.default_rng(mc_seed),
                                    chi_assumed=chi_hat, per_block=True)
        mc_acc = spl.empirical_rate(true_scene, prof_acc, sp, n_blocks, np.random.default_rng(mc_seed), per_block=True)
        nan = np.where(ok, 1.0, np.nan)
        reports.append(IntervalReport(
            interval=n,
            positions=positions,
            estimates=est,
            sensed=ok,
            cf_rate_est=cf_est * nan,
            cf_rate_acc=cf_acc,
            mc_rate_est=mc_est.rate * nan,
            mc_rate_est_se=mc_est.rate_se * nan,
            mc_rate_acc=mc_acc.rate,
            mc_rate_acc_se=mc_acc.rate_se,
            block_sum_rate_est=(spl.rate_from_sinr(mc_est.block_sinr) * nan) @ sp.kappa,
            block_sum_rate_acc=spl.rate_from_sinr(mc_acc.block_sinr) @ sp.kappa,
        ))
    return reports


# -------------------------------------------------------------- experiments


@dataclass
class ExperimentSpec:
    experiment: str
    grid: tuple | None = None
    trials: int | None = None
    seed: int = 0
    out: Path | str | None = None
    config: RunConfig = field(default_factory=RunConfig)
    full: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.grid is not None and len(self.grid) == 0:
            raise ValueError("sweep grid must be non-empty")
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1")


# (sweep variable, desk grid, full grid, desk trials, full trials)
DEFAULTS = {
    "rmse-vs-crb": ("r", (5, 10, 15, 20, 25, 30), (5, 10, 15, 20, 25, 30), 200, 1000),
    "crb-vs-mr": ("m_r_side", (2, 4, 6, 8, 10, 16, 32, 64), (2, 4, 6, 8, 10, 16, 32, 64), 1, 1),
    "ifft-vs-mle": ("r", (5, 10, 20, 30), (5, 10, 15, 20, 25, 30), 20, 200),
    "rate-validate": ("eta", (0.2, 0.5, 0.8), (0.1, 0.3, 0.5, 0.7, 0.9), 10_000, 100_000),
    "rate-vs-mr": ("m_r_side", (4, 6, 8, 10), (4, 6, 8, 10, 12, 14, 16), 1000, 10_000),
    "power-sweep": ("eta", tuple(np.round(np.arange(0.05, 0.951, 0.05), 2)),
                    tuple(np.round(np.arange(0.05, 0.951, 0.05), 2)), 1, 1),
    # frame-sim: the "grid" is the number of intervals
    "frame-sim": ("interval", (3,), (10,), 1, 1),
}


def ue_on_diagonal(r: float, height: float = 0.0) -> np.ndarray:
    return np.array([[-r / np.sqrt(2), r / np.sqrt(2), height]])


def _sense_rows(exp, cfg, grid, trials, seed, timing):
    base = cfg.scene(sensing=True)
    setup = sen.make_sensing_setup(base, seed=cfg.sense_seed, physical_noise=cfg.physical_noise)
    dictionary = sen.ifft_dictionary(base, setup, cfg.m_f)
    weighted = sen.weighted_phases(base, setup)
    rows = []
    for pi, r in enumerate(grid):
        sc = base.with_ues(ue_on_diagonal(r, cfg.ue_height))
        bound = sen.crb(sc, setup, 0)
        psi0 = sen.true_angle(sc, 0)
        rng = np.random.default_rng([seed, pi])
        err = np.zeros((trials, 3))
        t0 = time.perf_counter()
        for t in range(trials):
            e = sen.estimate(sen.simulate_sensing(sc, setup, 0, rng), sc, setup, 0, dictionary, weighted)
            err[t] = [np.sum((e.position[:2] - sc.ue_positions[0, :2]) ** 2),
                      (e.psi_tilde.phi - psi0.phi) ** 2, (e.psi_tilde.theta - psi0.theta) ** 2]
        timing.append((exp, "r", r, "ifft_seconds_per_trial", (time.perf_counter() - t0) / trials))
        rmse = np.sqrt(err.mean(0))
        # delta-method standard error of an RMSE
        se = err.std(0, ddof=1) / np.sqrt(trials) / (2 * np.maximum(rmse, 1e-300)) if trials > 1 else [None] * 3
        for name, val, s in zip(("rmse_pos", "rmse_phi", "rmse_theta"), rmse, se):
            rows.append(Row(exp, "r", r, "0", name, val, s))
        rows += [Row(exp, "r", r, "0", "crb_pos", bound.crb_pos), Row(exp, "r", r, "0", "crb_phi", bound.crb_phi),
                 Row(exp, "r", r, "0", "crb_theta", bound.crb_theta)]
    return rows


def _crb_mr_rows(exp, cfg, grid):
    rows = []
    for side in grid:
        c = replace(cfg, m_rs_x=int(side), m_rs_z=int(side))
        base = c.scene(sensing=True)
        setup = sen.make_sensing_setup(base, seed=cfg.sense_seed, physical_noise=cfg.physical_noise)
        for r in (10, 20, 30):
            sc = base.with_ues(ue_on_diagonal(r, cfg.ue_height))
            rows.append(Row(exp, "m_r_side", side, "0", f"crb_pos_r{r}", sen.crb(sc, setup, 0).crb_pos))
    return rows


def _mle_rows(exp, cfg, grid, trials, seed, timing, full):
    c = cfg if full else replace(cfg, m_rs_x=16, m_rs_z=16, m_f=64)
    base = c.scene(sensing=True)
    setup = sen.make_sensing_setup(base, seed=c.sense_seed, physical_noise=c.physical_noise)
    t0 = time.perf_counter()
    dictionary = sen.ifft_dictionary(base, setup, c.m_f)
    timing.append((exp, "", "", "dictionary_seconds", time.perf_counter() - t0))
    weighted = sen.weighted_phases(base, setup)
    rows = []
    for pi, r in enumerate(grid):
        sc = base.with_ues(ue_on_diagonal(r, c.ue_height))
        rng = np.random.default_rng([seed, pi])
        e_ifft, e_mle, t_ifft, t_mle = [], [], 0.0, 0.0
        for _ in range(trials):
            y = sen.simulate_sensing(sc, setup, 0, rng)
            a = sen.estimate(y, sc, setup, 0, dictionary, weighted)
            b = sen.mle_baseline(y, sc, setup, grid_density=2.0, m_f=c.m_f, k=0)
            t_ifft += a.elapsed
            t_mle += b.elapsed
            e_ifft.append(np.sum((a.position[:2] - sc.ue_positions[0, :2]) ** 2))
            e_mle.append(np.sum((b.position[:2] - sc.ue_positions[0, :2]) ** 2))
        rows.append(Row(exp, "r", r, "0", "rmse_pos_ifft", np.sqrt(np.mean(e_ifft))))
        rows.append(Row(exp, "r", r, "0", "rmse_pos_mle", np.sqrt(np.mean(e_mle))))
        timing.append((exp, "r", r, "ifft_seconds_per_trial", t_ifft / trials))
        timing.append((exp, "r", r, "mle_seconds_per_trial", t_mle / trials))
    return rows


def _rate_validate_rows(exp, cfg, grid, blocks, seed):
    c = replace(cfg, m_r_x=2, m_r_z=2, k=4)
    sc = c.scene(np.random.default_rng([seed, 0]))
    phases = np.exp(1j * np.random.default_rng([seed, 1]).uniform(0, 2 * np.pi, sc.m_r))
    rows = []
    for pi, eta in enumerate(grid):
        sp = spl.SpConfig.from_scene(sc, eta, c.kappa_vector(sc.n_ue))
        rep = spl.closed_form_rate(sc, phases, sp)
        mc = spl.empirical_rate(sc, phases, sp, blocks, np.random.default_rng([seed, 2, pi]))
        rp = spl.empirical_rate_rp(sc, phases, sp, blocks, np.random.default_rng([seed, 3, pi]))
        for k in range(sc.n_ue):
            rows += [Row(exp, "eta", eta, str(k), "rate_closed_form", rep.rate[k]),
                     Row(exp, "eta", eta, str(k), "rate_mc", mc.rate[k], mc.rate_se[k]),
                     Row(exp, "eta", eta, str(k), "rate_mc_rp", rp.rate[k], rp.rate_se[k])]
        rows += [Row(exp, "eta", eta, "all", "sum_rate_closed_form", rep.sum_rate),
                 Row(exp, "eta", eta, "all", "sum_rate_mc", float(mc.rate @ sp.kappa)),
                 Row(exp, "eta", eta, "all", "sum_rate_mc_rp", float(rp.rate @ sp.kappa))]
    return rows


def _rate_mr_rows(exp, cfg, grid, samples, seed):
    rows = []
    for pi, side in enumerate(grid):
        c = replace(cfg, m_r_x=int(side), m_r_z=int(side))
        sc = c.scene(np.random.default_rng([seed, 0]))
        sp = spl.SpConfig.from_scene(sc, c.eta, c.kappa_vector(sc.n_ue))
        fit = spl.make_fitness(sc, sp)
        ga = opt.ga_optimize(sc, sp, params=opt.GaParams(seed=seed), fitness=fit)
        sa = opt.sa_optimize(sc, sp, params=opt.SaParams(seed=seed), fitness=fit)
        rb = opt.random_baseline(sc, sp, n_samples=samples, rng=np.random.default_rng([seed, 1, pi]), fitness=fit)
        rows += [Row(exp, "m_r_side", side, "all", "sum_rate_ga", ga.fitness),
                 Row(exp, "m_r_side", side, "all", "sum_rate_sa", sa.fitness),
                 Row(exp, "m_r_side", side, "all", "sum_rate_random_mean", rb.mean, rb.stderr),
                 Row(exp, "m_r_side", side, "all", "sum_rate_random_max", rb.max)]
    return rows


def _power_rows(exp, cfg, grid, seed, full):
    c = replace(cfg, m_r_x=20, m_r_z=20, k=16 if full else 8)
    sc = c.scene(np.random.default_rng([seed, 0]))
    rows = []
    for eta in grid:
        sp = spl.SpConfig.from_scene(sc, float(eta), c.kappa_vector(sc.n_ue))
        ga = opt.ga_optimize(sc, sp, params=opt.GaParams(seed=seed))
        rows.append(Row(exp, "eta", float(eta), "all", "sum_rate_ga", ga.fitness))
    return rows


def _frame_rows(exp, cfg, n_intervals, seed):
    sc = cfg.scene(np.random.default_rng([seed, 0]))
    ss = cfg.scene(np.random.default_rng([seed, 0]), sensing=True)
    sp = spl.SpConfig.from_scene(sc, cfg.eta, cfg.kappa_vector(sc.n_ue))
    mob = MobilityModel.isotropic(cfg.walk_std_m, n_intervals)
    reps = run_frame(sc, ss, sp, opt.GaParams(), mob, n_intervals, seed, cfg.sense_seed, cfg.m_f)
    rows = []
    for rep in reps:
        n = rep.interval
        for k in range(sc.n_ue):
            ue = str(k)
            rows += [Row(exp, "interval", n, ue, "position_error", rep.position_error[k]),
                     Row(exp, "interval", n, ue, "rate_closed_form_est", rep.cf_rate_est[k]),
                     Row(exp, "interval", n, ue, "rate_closed_form_acc", rep.cf_rate_acc[k]),
                     Row(exp, "interval", n, ue, "rate_mc_est", rep.mc_rate_est[k], rep.mc_rate_est_se[k]),
                     Row(exp, "interval", n, ue, "rate_mc_acc", rep.mc_rate_acc[k], rep.mc_rate_acc_se[k])]
        rows += [Row(exp, "interval", n, "all", "sum_rate_closed_form_est", float(np.dot(sp.kappa, rep.cf_rate_est))),
                 Row(exp, "interval", n, "all", "sum_rate_closed_form_acc", float(np.dot(sp.kappa, rep.cf_rate_acc)))]
        for b, (ve, va) in enumerate(zip(rep.block_sum_rate_est, rep.block_sum_rate_acc)):
            rows += [Row(exp, "interval", n, f"block{b}", "block_sum_rate_est", ve),
                     Row(exp, "interval", n, f"block{b}", "block_sum_rate_acc", va)]
    return rows


def experiment_rows(spec: ExperimentSpec, timing: list | None = None) -> list[Row]:
    timing = [] if timing is None else timing
    var, desk, full_grid, desk_trials, full_trials = DEFAULTS[spec.experiment]
    grid = spec.grid or (full_grid if spec.full else desk)
    trials = spec.trials or (full_trials if spec.full else desk_trials)
    cfg, seed, exp = spec.config, spec.seed, spec.experiment
    if exp == "rmse-vs-crb":
        return _sense_rows(exp, cfg, grid, trials, seed, timing)
    if exp == "crb-vs-mr":
        return _crb_mr_rows(exp, cfg, grid)
    if exp == "ifft-vs-mle":
        return _mle_rows(exp, cfg, grid, trials, seed, timing, spec.full)
    if exp == "rate-validate":
        blocks = spec.trials or (full_trials if spec.full else cfg.mc_blocks)
        return _rate_validate_rows(exp, cfg, grid, blocks, seed)
    if exp == "rate-vs-mr":
        return _rate_mr_rows(exp, cfg, grid, trials, seed)
    if exp == "power-sweep":
        return _power_rows(exp, cfg, grid, seed, spec.full)
    n_intervals = int(spec.grid[0]) if spec.grid else (full_grid[0] if spec.full else cfg.n_intervals)
    return _frame_rows(exp, cfg, n_intervals, seed)


def manifest_text(command: str, seed: int, config: RunConfig, extra: dict | None = None) -> str:
    """Run description as key=value lines: command, seed, version, extras, then the full config."""
    lines = [f"command={command}", f"seed={seed}", f"version=v{__version__}"]
    lines += [f"{k}={v}" for k, v in (extra or {}).items()]
    return "\n".join(lines) + "\n" + dump_config(config)


def write_outputs(rows, out, manifest: str, timing=None) -> None:
    """CSV to ``out`` (``-`` or None for stdout) plus ``.manifest`` / ``.timing.csv`` sidecars."""
    text = rows_to_csv(rows)
    if out is None or str(out) == "-":
        sys.stdout.write(text)
        return
    out = Path(out)
    out.write_text(text)
    out.with_name(out.name + ".manifest").write_text(manifest)
    if timing:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("experiment", "sweep_var", "sweep_value", "metric", "seconds"))
        w.writerows(timing)
        out.with_name(out.name + ".timing.csv").write_text(buf.getvalue())


def run_experiment(spec: ExperimentSpec) -> list[Row]:
    timing = []
    rows = experiment_rows(spec, timing)
    extra = {"full": "true" if spec.full else "false"}
    if spec.grid is not None:
        extra["grid"] = ",".join(_num(g) for g in spec.grid)
    if spec.trials is not None:
        extra["trials"] = spec.trials
    write_outputs(rows, spec.out, manifest_text(spec.experiment, spec.seed, spec.config, extra), timing)
    return rows
