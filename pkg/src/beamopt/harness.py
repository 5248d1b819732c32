"""Monte-Carlo experiment runner: normalized spectral-efficiency curves to CSV.

Two sweeps are supported: normalized SE versus measurement budget at one SNR,
and versus SNR at one budget. Each trial draws a fresh channel, computes the
full-sweep reference on that same channel, runs every requested method, and
scores the selected beam pair by its noise-free gain. RNG streams derive from
(master seed, trial index, stream id, point index), so reruns are bit-identical
and trials can fan out across worker processes without affecting results.

Budget handling exploits that every iterative method here is anytime: a run at
the largest budget is replayed once and read off at each smaller budget, which
is exactly what independent runs would produce because all budgets share one
method stream.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .baselines import TsMabConfig, exhaustive_search, omp_greedy, build_sensing_system, ts_mab_with_checkpoints
from .channel import (
    BeamPair,
    ChannelParams,
    ChannelRealization,
    Codebook,
    beamforming_gain,
    build_codebook,
    draw_channel,
    grid_signal_matrix,
    spectral_efficiency,
)
from .numerics import rng_stream, sample_complex_gaussian
from .optimizer import BoConfig, RunTrace, run_bo

__all__ = [
    "DegenerateBaseline",
    "ExperimentConfig",
    "CurvePoint",
    "METHODS",
    "normalized_spectral_efficiency",
    "run_measurement_sweep",
    "run_snr_sweep",
    "single_run",
    "write_csv",
    "write_trace_csv",
    "load_config_file",
    "selftest",
]

log = logging.getLogger(__name__)

BO_METHODS = ("GP-BO", "GBRT-BO", "RF-BO")
METHODS = ("GP-BO", "GBRT-BO", "RF-BO", "OMP", "TS-MAB", "EXHAUSTIVE")
_METHOD_ID = {name: i for i, name in enumerate(METHODS)}

# stream ids for rng_stream(seed, trial, <id>, ...)
_STREAM_CHANNEL = 0
_STREAM_REFERENCE = 1
_STREAM_METHOD_BASE = 10

_MAX_REDRAWS = 10

NORMALIZATION_MODES = ("per-trial", "ratio-of-means")


class DegenerateBaseline(Exception):
    """The full-sweep reference SE is nonpositive (zero-gain channel draw)."""


def normalized_spectral_efficiency(sp_x: float, sp_es: float) -> float:
    """Ratio of a method's SE to the full-sweep reference SE.

    Values above 1 are legitimate: continuous-domain methods can out-point the
    finite codebook. Raises :class:`DegenerateBaseline` when the reference is
    nonpositive so the caller can redraw the trial.
    """
    if sp_es <= 0:
        raise DegenerateBaseline(f"reference spectral efficiency {sp_es} is not positive")
    return sp_x / sp_es


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one sweep needs; flat on purpose so config files mirror it."""

    n_tx: int = 64
    n_rx: int = 16
    n_paths: int = 5
    d_over_lambda: float = 0.5
    sigma_a_sq: float = 1.0
    p_t: float = 1.0
    g_tx: int = 64
    g_rx: int = 16
    snr_db: tuple = (0.0,)
    budgets: tuple = tuple(range(16, 161, 16))
    methods: tuple = METHODS
    trials: int = 200
    seed: int = 0
    out: str = "results.csv"
    m_init: int = 16
    n_candidates: int = 5000
    omp_sparsity: int = 5
    ts_prior_var: float = 1e6
    ts_obs_var: float | None = None
    normalization: str = "per-trial"
    workers: int | None = None

    def validate(self) -> "ExperimentConfig":
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.methods:
            raise ValueError("method list must not be empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if not self.snr_db:
            raise ValueError("snr_db list must not be empty")
        if not self.budgets or any(b < 1 for b in self.budgets):
            raise ValueError("budgets must be a nonempty list of positive counts")
        if any(m in BO_METHODS for m in self.methods) and min(self.budgets) < self.m_init:
            raise ValueError(
                f"BO methods need budgets >= m_init={self.m_init}, got {min(self.budgets)}"
            )
        if "OMP" in self.methods and min(self.budgets) < self.omp_sparsity:
            raise ValueError(
                f"OMP needs budgets >= sparsity={self.omp_sparsity}, got {min(self.budgets)}"
            )
        if self.normalization not in NORMALIZATION_MODES:
            raise ValueError(f"normalization must be one of {NORMALIZATION_MODES}")
        return self

    def channel_params(self, snr_db: float) -> ChannelParams:
        sigma_n_sq = self.p_t * self.sigma_a_sq / 10.0 ** (snr_db / 10.0)
        return ChannelParams(
            n_tx=self.n_tx,
            n_rx=self.n_rx,
            n_paths=self.n_paths,
            d_over_lambda=self.d_over_lambda,
            sigma_a_sq=self.sigma_a_sq,
            p_t=self.p_t,
            sigma_n_sq=sigma_n_sq,
        )

    def codebooks(self) -> tuple[Codebook, Codebook]:
        return (
            build_codebook(self.n_tx, self.g_tx, self.d_over_lambda),
            build_codebook(self.n_rx, self.g_rx, self.d_over_lambda),
        )

    def bo_config(self, kind: str, budget: int) -> BoConfig:
        return BoConfig(
            m_init=self.m_init,
            n_iters=budget - self.m_init,
            surrogate={"GP-BO": "GP", "GBRT-BO": "GBRT", "RF-BO": "RF"}[kind],
            n_candidates=self.n_candidates,
        )

    def ts_config(self) -> TsMabConfig:
        return TsMabConfig(prior_var=self.ts_prior_var, obs_var=self.ts_obs_var)


@dataclass(frozen=True)
class CurvePoint:
    """One aggregated plot point; stderr is sample std over trials / sqrt(trials)."""

    method: str
    snr_db: float
    measurements: int
    mean_norm_se: float
    stderr: float
    trials: int


def _method_pairs_per_budget(
    method: str,
    channel: ChannelRealization,
    params: ChannelParams,
    config: ExperimentConfig,
    tx_cb: Codebook,
    rx_cb: Codebook,
    rng: np.random.Generator,
    budgets: tuple,
) -> dict[int, BeamPair]:
    """Selected beam pair at every requested budget from one anytime run."""
    max_budget = max(budgets)
    if method in BO_METHODS:
        trace = run_bo(channel, params, config.bo_config(method, max_budget), rng, tx_cb, rx_cb)
        return {b: trace.best_pair_after(b) for b in budgets}
    if method == "OMP":
        system = build_sensing_system(channel, tx_cb, rx_cb, max_budget, params, rng)
        out = {}
        for b in budgets:
            coef, support, _ = omp_greedy(
                system.matrix[:b], system.observations[:b], config.omp_sparsity
            )
            j = int(support[int(np.argmax(np.abs(coef)))])
            t, r = j // system.g_rx, j % system.g_rx
            out[b] = BeamPair(theta=float(tx_cb.angles[t]), phi=float(rx_cb.angles[r]))
        return out
    if method == "TS-MAB":
        _, _, marks, _ = ts_mab_with_checkpoints(
            channel, tx_cb, rx_cb, max_budget, params, rng,
            config.ts_config(), checkpoints=tuple(budgets),
        )
        return dict(marks)
    if method == "EXHAUSTIVE":
        pair, _ = exhaustive_search(channel, tx_cb, rx_cb, params, rng)
        return {b: pair for b in budgets}
    raise ValueError(f"unknown method {method}")


def _run_trial(config: ExperimentConfig, trial: int) -> list[tuple]:
    """All (method, snr_db, budget, se_method, se_reference) records for one trial."""
    tx_cb, rx_cb = config.codebooks()
    for redraw in range(_MAX_REDRAWS):
        channel = draw_channel(
            rng_stream(config.seed, trial, _STREAM_CHANNEL, redraw),
            config.channel_params(config.snr_db[0]),
        )
        try:
            records = []
            for snr_idx, snr in enumerate(config.snr_db):
                params = config.channel_params(snr)
                ref_pair, _ = exhaustive_search(
                    channel, tx_cb, rx_cb, params,
                    rng_stream(config.seed, trial, _STREAM_REFERENCE, snr_idx),
                )
                se_ref = spectral_efficiency(
                    beamforming_gain(channel, ref_pair, config.d_over_lambda), params
                )
                if se_ref <= 0:
                    raise DegenerateBaseline(
                        f"trial {trial}: reference SE {se_ref} at {snr} dB"
                    )
                for method in config.methods:
                    rng = rng_stream(
                        config.seed, trial, _STREAM_METHOD_BASE + _METHOD_ID[method], snr_idx
                    )
                    pairs = _method_pairs_per_budget(
                        method, channel, params, config, tx_cb, rx_cb, rng, config.budgets
                    )
                    for budget in config.budgets:
                        gain = beamforming_gain(channel, pairs[budget], config.d_over_lambda)
                        records.append(
                            (method, snr, budget, spectral_efficiency(gain, params), se_ref)
                        )
            return records
        except DegenerateBaseline as exc:
            log.warning("redrawing channel (%s), attempt %d", exc, redraw + 1)
    raise DegenerateBaseline(f"trial {trial}: no usable channel after {_MAX_REDRAWS} redraws")


def _trial_worker(args: tuple) -> list[tuple]:
    return _run_trial(*args)


def _aggregate(config: ExperimentConfig, all_records: list[list[tuple]]) -> list[CurvePoint]:
    se_x: dict[tuple, list[float]] = {}
    se_ref: dict[tuple, list[float]] = {}
    for trial_records in all_records:
        for method, snr, budget, sx, sr in trial_records:
            key = (method, snr, budget)
            se_x.setdefault(key, []).append(sx)
            se_ref.setdefault(key, []).append(sr)
    points = []
    for key in sorted(se_x):
        method, snr, budget = key
        sx = np.array(se_x[key])
        sr = np.array(se_ref[key])
        n = len(sx)
        if config.normalization == "per-trial":
            ratios = np.array(
                [normalized_spectral_efficiency(a, b) for a, b in zip(sx, sr)]
            )
            mean = float(ratios.mean())
            stderr = float(ratios.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        else:
            mean = float(sx.mean() / sr.mean())
            # linearized standard error of the ratio of means
            resid = sx - mean * sr
            stderr = (
                float(resid.std(ddof=1) / (sr.mean() * math.sqrt(n))) if n > 1 else 0.0
            )
        points.append(
            CurvePoint(
                method=method,
                snr_db=float(snr),
                measurements=int(budget),
                mean_norm_se=mean,
                stderr=stderr,
                trials=n,
            )
        )
    return points


def _run_grid(config: ExperimentConfig) -> list[CurvePoint]:
    config.validate()
    workers = config.workers if config.workers is not None else (os.cpu_count() or 1)
    jobs = [(config, t) for t in range(config.trials)]
    if workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves submission order, so aggregation is scheduling-independent
            all_records = list(pool.map(_trial_worker, jobs, chunksize=1))
    else:
        all_records = [_run_trial(config, t) for t in range(config.trials)]
    return _aggregate(config, all_records)


def run_measurement_sweep(config: ExperimentConfig) -> list[CurvePoint]:
    """Normalized SE versus measurement budget at a single SNR."""
    if len(config.snr_db) != 1:
        raise ValueError("measurement sweep expects exactly one SNR value")
    return _run_grid(config)


def run_snr_sweep(config: ExperimentConfig) -> list[CurvePoint]:
    """Normalized SE versus SNR at a single measurement budget."""
    if len(config.budgets) != 1:
        raise ValueError("SNR sweep expects exactly one measurement budget")
    return _run_grid(config)


def single_run(config: ExperimentConfig, method: str, budget: int, trial: int = 0) -> RunTrace:
    """One method on one channel; returns the full measurement trace."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method}; choose from {METHODS}")
    tx_cb, rx_cb = config.codebooks()
    snr = config.snr_db[0]
    params = config.channel_params(snr)
    channel = draw_channel(rng_stream(config.seed, trial, _STREAM_CHANNEL, 0), params)
    rng = rng_stream(config.seed, trial, _STREAM_METHOD_BASE + _METHOD_ID[method], 0)
    if method in BO_METHODS:
        return run_bo(channel, params, config.bo_config(method, budget), rng, tx_cb, rx_cb)
    if method == "TS-MAB":
        _, trace, _, _ = ts_mab_with_checkpoints(
            channel, tx_cb, rx_cb, budget, params, rng, config.ts_config()
        )
        return trace
    if method == "OMP":
        system = build_sensing_system(channel, tx_cb, rx_cb, budget, params, rng)
        thetas = tx_cb.angles[system.t_sel]
        phis = rx_cb.angles[system.r_sel]
        return RunTrace.from_measurements(thetas, phis, np.abs(system.observations) ** 2)
    # EXHAUSTIVE: row-major sweep over (rx, tx) grid cells
    s = grid_signal_matrix(channel, tx_cb, rx_cb, params)
    noise = sample_complex_gaussian(rng, s.size, params.sigma_n_sq).reshape(s.shape)
    rss = (np.abs(s + noise) ** 2).ravel()
    rr, tt = np.meshgrid(np.arange(rx_cb.g), np.arange(tx_cb.g), indexing="ij")
    return RunTrace.from_measurements(
        tx_cb.angles[tt.ravel()], rx_cb.angles[rr.ravel()], rss
    )


def _fmt(x: float) -> str:
    return format(x, ".10g")


def write_csv(points: list[CurvePoint], path: str) -> None:
    """Deterministic CSV: sorted rows, 10 significant digits, LF line ends."""
    rows = sorted(points, key=lambda p: (p.method, p.snr_db, p.measurements))
    with open(path, "w", newline="") as fh:
        fh.write("method,snr_db,measurements,mean_norm_se,stderr,trials\n")
        for p in rows:
            fh.write(
                f"{p.method},{_fmt(p.snr_db)},{p.measurements},"
                f"{_fmt(p.mean_norm_se)},{_fmt(p.stderr)},{p.trials}\n"
            )


def write_trace_csv(trace: RunTrace, path: str) -> None:
    """Per-measurement dump of a single run: iter,theta,phi,rss,best_rss."""
    with open(path, "w", newline="") as fh:
        fh.write("iter,theta,phi,rss,best_rss\n")
        for i in range(len(trace)):
            fh.write(
                f"{i + 1},{_fmt(trace.theta[i])},{_fmt(trace.phi[i])},"
                f"{_fmt(trace.rss[i])},{_fmt(trace.best_rss[i])}\n"
            )


_LIST_FIELDS = {"snr_db", "budgets", "methods"}


def _parse_value(name: str, raw: str):
    """Parse one config-file value according to the dataclass field it targets."""
    raw = raw.strip()
    if name in _LIST_FIELDS:
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if name == "methods":
            return tuple(items)
        if name == "budgets":
            return tuple(int(s) for s in items)
        return tuple(float(s) for s in items)
    hints = {f.name: f.type for f in fields(ExperimentConfig)}
    hint = hints[name]
    if raw.lower() in ("none", "null"):
        return None
    if hint == "int":
        return int(raw)
    if hint == "float":
        return float(raw)
    if hint in ("int | None", "float | None"):
        return float(raw) if "." in raw or "e" in raw.lower() else int(raw)
    return raw


def load_config_file(path: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a flat ``key = value`` file into an :class:`ExperimentConfig`.

    Lines starting with ``#`` and blank lines are ignored; list-valued keys
    take comma-separated entries. Unknown keys raise.
    """
    cfg = base if base is not None else ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    overrides = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            overrides[key] = _parse_value(key, raw)
    return replace(cfg, **overrides)


def selftest(verbose: bool = True) -> int:
    """Run the built-in oracle battery; returns the number of failures."""
    import tempfile

    from .acquisition import expected_improvement
    from .numerics import hermitian_solve, std_normal_cdf, std_normal_pdf
    from .surrogates import Dataset, GaussianProcessSurrogate, GpConfig, GradientBoostedSurrogate

    failures = 0

    def check(name: str, ok: bool, detail: str = ""):
        nonlocal failures
        if not ok:
            failures += 1
        if verbose:
            print(f"[{'ok' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))

    rng = np.random.default_rng(1234)

    b_mat = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    a = b_mat @ b_mat.conj().T + 8 * np.eye(8)
    rhs = rng.normal(size=8) + 1j * rng.normal(size=8)
    x = hermitian_solve(a, rhs)
    res = np.linalg.norm(a @ x - rhs) / np.linalg.norm(rhs)
    check("hermitian solve residual", res <= 1e-10, f"rel residual {res:.2e}")

    xs = rng.normal(size=100) * 3
    sym = np.max(np.abs(std_normal_cdf(xs) + std_normal_cdf(-xs) - 1.0))
    check("normal cdf symmetry", sym < 1e-12, f"max dev {sym:.2e}")
    check(
        "normal pdf at 0",
        abs(float(std_normal_pdf(0.0)) - 0.3989422804014327) < 1e-12,
    )

    cb = build_codebook(64, 64, 0.5)
    gram = cb.columns.conj().T @ cb.columns
    off = np.max(np.abs(gram - np.eye(64)))
    check("DFT codebook orthonormal", off < 1e-10, f"max off-diag {off:.2e}")

    params = ChannelParams(n_tx=16, n_rx=8, n_paths=1, sigma_n_sq=0.0)
    from .channel import measure_rss, steering_vector

    theta0, phi0 = 0.3, -0.2
    a_t = steering_vector(16, theta0)
    a_r = steering_vector(8, phi0)
    h = math.sqrt(16 * 8) * np.outer(a_r, a_t.conj())
    chan = ChannelRealization(
        h=h, alphas=np.array([1.0 + 0j]), thetas=np.array([theta0]), phis=np.array([phi0])
    )
    rss = measure_rss(chan, BeamPair(theta0, phi0), params, rng)
    check("aligned noiseless RSS", abs(rss - 16 * 8) < 1e-9, f"rss {rss:.6f}")

    ok = True
    tx_cb, rx_cb = build_codebook(16, 16), build_codebook(8, 8)
    p0 = ChannelParams(n_tx=16, n_rx=8, n_paths=3, sigma_n_sq=0.0)
    from .channel import grid_gain_matrix

    for _ in range(5):
        ch = draw_channel(rng, p0)
        pair, _ = exhaustive_search(ch, tx_cb, rx_cb, p0, rng)
        gains = grid_gain_matrix(ch, tx_cb, rx_cb)
        r, t = np.unravel_index(int(np.argmax(gains)), gains.shape)
        ok &= pair == BeamPair(float(tx_cb.angles[t]), float(rx_cb.angles[r]))
    check("noiseless sweep equals gain argmax", ok)

    mu, sigma, f_best = 1.3, 0.7, 1.0
    samples = mu + sigma * rng.standard_normal(100_000)
    mc = float(np.maximum(samples - f_best, 0.0).mean())
    ei = expected_improvement(mu, sigma, f_best)
    check("EI closed form vs Monte Carlo", abs(ei - mc) / mc < 0.03, f"ei {ei:.5f} mc {mc:.5f}")
    check("EI zero-sigma branch", expected_improvement(5.0, 0.0, 1.0) == 0.0)

    data = Dataset(z=rng.uniform(-1.5, 1.5, (40, 2)), y=rng.normal(size=40))
    gbrt = GradientBoostedSurrogate().fit(data)
    q = rng.uniform(-1.5, 1.5, (50, 2))
    mu_hat, _ = gbrt.predict_many(q)
    f_t = gbrt.y_mean_ + gbrt.y_scale_ * (
        gbrt.f0_
        + gbrt.config.learning_rate * sum(t.predict(q) for t in gbrt.trees_)
    )
    dev = np.max(np.abs(mu_hat - f_t) / np.maximum(np.abs(f_t), 1e-300))
    check("boosted mean identity", dev < 1e-12, f"max rel dev {dev:.2e}")

    gp = GaussianProcessSurrogate(GpConfig(length_scale=0.5, rescale_inputs=False, standardize=False))
    d2 = Dataset(z=rng.uniform(-1.5, 1.5, (8, 2)), y=rng.normal(size=8))
    gp.fit(d2)
    zq = rng.uniform(-1.5, 1.5, (1, 2))
    pred = gp.predict(zq)
    from .surrogates import _kernel_matrix

    kmat = _kernel_matrix(d2.z, d2.z, 0.5) + gp.jitter_ * np.eye(8)
    kvec = _kernel_matrix(zq, d2.z, 0.5)[0]
    mu_o = kvec @ np.linalg.inv(kmat) @ d2.y
    var_o = 1.0 - kvec @ np.linalg.inv(kmat) @ kvec
    ok = abs(pred.mu - mu_o) <= 1e-8 * max(1.0, abs(mu_o)) and abs(
        pred.sigma**2 - var_o
    ) <= 1e-8 * max(1.0, abs(var_o))
    check("GP matches direct conditioning", ok)

    from .baselines import omp_align

    p1 = ChannelParams(n_tx=16, n_rx=10, n_paths=1, sigma_n_sq=0.0)
    txc, rxc = build_codebook(16, 16), build_codebook(10, 10)
    ok = True
    for _ in range(5):
        t = int(rng.integers(16))
        r = int(rng.integers(10))
        th, ph = float(txc.angles[t]), float(rxc.angles[r])
        av = steering_vector(16, th)
        au = steering_vector(10, ph)
        hh = math.sqrt(160) * np.outer(au, av.conj())
        ch = ChannelRealization(
            h=hh, alphas=np.array([1 + 0j]), thetas=np.array([th]), phis=np.array([ph])
        )
        got = omp_align(ch, txc, rxc, budget=160, sparsity=1, params=p1, rng=rng)
        ok &= got == BeamPair(th, ph)
    check("OMP planted-support recovery", ok)

    tiny = ExperimentConfig(
        n_tx=8, n_rx=4, g_tx=8, g_rx=4, n_paths=2, trials=2,
        budgets=(4, 8), m_init=4, n_candidates=50, omp_sparsity=2,
        methods=("GP-BO", "OMP", "TS-MAB", "EXHAUSTIVE"), workers=1, seed=7,
    )
    with tempfile.TemporaryDirectory() as tmp:
        p_a = os.path.join(tmp, "a.csv")
        p_b = os.path.join(tmp, "b.csv")
        write_csv(run_measurement_sweep(tiny), p_a)
        write_csv(run_measurement_sweep(tiny), p_b)
        with open(p_a, "rb") as fa, open(p_b, "rb") as fb:
            check("sweep rerun is byte-identical", fa.read() == fb.read())

    if verbose:
        print("selftest:", "all checks passed" if failures == 0 else f"{failures} FAILURES")
    return failures
