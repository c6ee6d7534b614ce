"""Experiment harness: generate, sketch, fit, estimate, and tabulate errors.

``run_experiment`` executes the full pipeline for a number of independent
repetitions and emits long-format rows ready for CSV: one frequency row
per (repetition, estimator, rule, frequency bin) holding the mean
absolute error over the distinct symbols whose true frequency falls in
the bin, and one cardinality row per (repetition, estimator).  Every
source of randomness (data, hash seeds, Monte Carlo draws, fitting) is
derived from the single master seed, so reruns are byte-identical.

The per-symbol estimation paths are vectorized: per view, the bucket
count of every distinct symbol is a table lookup, and for the aggregation
rules the per-bucket expert pmfs/cdfs are precomputed once per view and
then gathered per symbol.
"""

from __future__ import annotations

import csv
import math
import sys
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

from .cardinality import estimate_card_dp, estimate_card_nggp
from .datagen import PrefixRetainer, gen_pyp, gen_zipf
from .fitting import PrefixSample, fit_dp, fit_nggp_minwass, fit_nggp_prefix, nggp_urn_sample
from .sketch import MultiSketch
from .smoothing import (
    MonteCarloConfig,
    SmoothingParams,
    averaged_binomial_pmf,
    nggp_shrink_factor,
    pmf_dp,
)
from .specfun import sample_v_nggp

DEFAULT_BINS = ((0.0, 1.0), (1.0, 4.0), (4.0, 16.0), (16.0, 64.0), (64.0, 256.0), (256.0, math.inf))

FREQ_HEADER = ["rep", "estimator", "rule", "bin_lo", "bin_hi", "num_symbols", "mae"]
CARD_HEADER = ["rep", "estimator", "k_true", "k_hat"]


@dataclass(frozen=True)
class BinStat:
    lo: float
    hi: float
    num_symbols: int
    mae: float


def mae_by_bin(true_counts, estimates, bins=DEFAULT_BINS) -> list[BinStat]:
    """Mean absolute error stratified by the true frequency.

    ``true_counts[i]`` and ``estimates[i]`` refer to the same distinct
    symbol; every symbol with true frequency >= 1 must be covered.  Bins
    are half-open intervals (lo, hi]; empty bins are omitted.
    """
    f = np.asarray(true_counts, dtype=float)
    est = np.asarray(estimates, dtype=float)
    if f.shape != est.shape:
        raise ValueError("true counts and estimates must align")
    prev_hi = None
    out = []
    for lo, hi in bins:
        if hi <= lo:
            raise ValueError(f"bad bin ({lo}, {hi}]")
        if prev_hi is not None and lo < prev_hi:
            raise ValueError("bins must not overlap")
        prev_hi = hi
        mask = (f > lo) & (f <= hi)
        if not mask.any():
            continue
        out.append(BinStat(lo, hi, int(mask.sum()), float(np.mean(np.abs(f[mask] - est[mask])))))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    generator: dict
    n: int
    width: int
    num_hashes: int = 1
    smoothing: tuple = ("dp", "nggp")
    include_cms: bool = True
    rules: tuple = ("poe", "min")
    nggp_fit: str = "prefix-mle"  # or "min-wasserstein" or "fixed"
    dp_fit: str = "sketch-mle"  # or "fixed"
    fixed_dp: SmoothingParams | None = None
    fixed_nggp: SmoothingParams | None = None
    prefix_m: int | None = None
    repetitions: int = 1
    master_seed: int = 0
    bins: tuple = DEFAULT_BINS
    estimate_cardinality: bool = True
    card_mc_draws: int = 2000
    nggp_pmf_draws: int = 2000
    minwass_num_mc: int = 10
    tau: float = 0.5

    def __post_init__(self):
        if self.num_hashes * self.width <= 0:
            raise ValueError("need num_hashes * width > 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        for kind in self.smoothing:
            if kind not in ("dp", "nggp"):
                raise ValueError(f"unknown smoothing kind {kind!r}")
        if self.generator.get("kind") not in ("pyp", "zipf", "nggp"):
            raise ValueError("generator kind must be pyp, zipf, or nggp")

    @property
    def effective_prefix_m(self) -> int:
        return self.prefix_m if self.prefix_m is not None else max(2, self.n // 20)


def _generate(cfg: ExperimentConfig, rng: np.random.Generator):
    g = cfg.generator
    if g["kind"] == "pyp":
        return gen_pyp(rng, float(g["gamma"]), float(g["sigma"]), cfg.n)
    if g["kind"] == "zipf":
        return gen_zipf(rng, float(g["c"]), int(g.get("vocab", 10**6)), cfg.n)
    prefix, stream = nggp_urn_sample(
        rng, float(g["theta"]), float(g["alpha"]), float(g.get("tau", 0.5)), cfg.n, return_stream=True
    )
    from .datagen import GroundTruth

    return stream, GroundTruth(np.asarray(prefix.counts, dtype=np.int64), cfg.n)


def _dp_bucket_tables(counts: np.ndarray, theta: float, width: int, need_pmf: bool, need_cdf: bool):
    """Per-bucket log-pmf and/or survival arrays for DP smoothing."""
    pmfs, survivals = [], []
    cache: dict[int, tuple] = {}
    for c in counts.astype(int):
        if c not in cache:
            pmf = pmf_dp(c, theta, width)
            with np.errstate(divide="ignore"):
                logs = np.log(pmf) if need_pmf else None
            surv = 1.0 - np.cumsum(pmf) if need_cdf else None
            cache[c] = (logs, surv)
        pmfs.append(cache[c][0])
        survivals.append(cache[c][1])
    return pmfs, survivals


def _nggp_bucket_tables(
    counts: np.ndarray,
    params: SmoothingParams,
    width: int,
    num_draws: int,
    seed: int,
    need_pmf: bool,
    need_cdf: bool,
):
    """Per-bucket Monte Carlo expert tables for power-law smoothing."""
    rng = np.random.default_rng(seed)
    draws = sample_v_nggp(rng, params.theta, params.alpha, params.tau, width, size=num_draws)
    pmfs, survivals = [], []
    cache: dict[int, tuple] = {}
    for c in counts.astype(int):
        if c not in cache:
            if c == 0:
                pmf = np.array([1.0])
            else:
                pmf = averaged_binomial_pmf(c, draws)
            with np.errstate(divide="ignore"):
                logs = np.log(pmf) if need_pmf else None
            surv = 1.0 - np.cumsum(pmf) if need_cdf else None
            cache[c] = (logs, surv)
        pmfs.append(cache[c][0])
        survivals.append(cache[c][1])
    return pmfs, survivals


def _poe_means(log_tables, symbol_buckets) -> np.ndarray:
    """Product-of-experts means per symbol from per-view log-pmf tables."""
    num_symbols = symbol_buckets.shape[1]
    out = np.empty(num_symbols)
    for s in range(num_symbols):
        arrs = [log_tables[l][symbol_buckets[l, s]] for l in range(symbol_buckets.shape[0])]
        common = min(a.size for a in arrs)
        logs = arrs[0][:common].copy()
        for a in arrs[1:]:
            logs += a[:common]
        logs -= logs.max()
        w = np.exp(logs)
        out[s] = float(np.dot(np.arange(common), w) / w.sum())
    return out


def _min_means(surv_tables, symbol_buckets) -> np.ndarray:
    """Minimum-of-experts means per symbol: sum_r prod_l (1 - F_l(r))."""
    num_symbols = symbol_buckets.shape[1]
    out = np.empty(num_symbols)
    for s in range(num_symbols):
        arrs = [surv_tables[l][symbol_buckets[l, s]] for l in range(symbol_buckets.shape[0])]
        common = min(a.size for a in arrs)
        prod = arrs[0][:common].copy()
        for a in arrs[1:]:
            prod *= a[:common]
        out[s] = float(np.clip(prod, 0.0, None).sum())
    return out


@dataclass
class RepetitionResult:
    rep: int
    freq_rows: list = field(default_factory=list)
    card_rows: list = field(default_factory=list)


def _estimator_labels(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    labels = []
    for kind in cfg.smoothing:
        if cfg.num_hashes == 1:
            labels.append((kind, "single"))
        else:
            labels.extend((kind, rule) for rule in cfg.rules)
    if cfg.include_cms:
        labels.append(("cms", "cms"))
    return labels


def run_repetition(cfg: ExperimentConfig, rep: int) -> RepetitionResult:
    """One generate -> sketch -> fit -> estimate -> tabulate cycle."""
    root = np.random.SeedSequence(entropy=cfg.master_seed, spawn_key=(rep,))
    data_seq, sketch_seq, mc_seq, fit_seq = root.spawn(4)
    data_rng = np.random.default_rng(data_seq)

    stream, truth = _generate(cfg, data_rng)
    m_prefix = min(cfg.effective_prefix_m, cfg.n)
    retainer = PrefixRetainer(m_prefix)
    retainer.consume(stream)

    sketch_seed = int(sketch_seq.generate_state(1, np.uint64)[0])
    ms = MultiSketch.from_master_seed(sketch_seed, cfg.num_hashes, cfg.width)
    ms.add_many(stream)

    num_symbols = truth.num_distinct
    symbol_ids = np.arange(num_symbols)
    symbol_buckets = np.stack(
        [row.hash_fn.buckets_of(symbol_ids) for row in ms.rows]
    )  # (M, K)
    view_counts = np.stack(
        [row.counts[symbol_buckets[l]].astype(np.int64) for l, row in enumerate(ms.rows)]
    )

    # fits
    dp_thetas: list[float] = []
    if "dp" in cfg.smoothing:
        if cfg.dp_fit == "fixed":
            if cfg.fixed_dp is None:
                raise ValueError("dp_fit='fixed' needs fixed_dp")
            dp_thetas = [cfg.fixed_dp.theta] * cfg.num_hashes
        else:
            dp_thetas = [fit_dp(row).params.theta for row in ms.rows]
    nggp_params: SmoothingParams | None = None
    if "nggp" in cfg.smoothing:
        if cfg.nggp_fit == "fixed":
            if cfg.fixed_nggp is None:
                raise ValueError("nggp_fit='fixed' needs fixed_nggp")
            nggp_params = cfg.fixed_nggp
        elif cfg.nggp_fit == "prefix-mle":
            prefix = PrefixSample.from_stream(retainer.prefix)
            nggp_params = fit_nggp_prefix(prefix, tau=cfg.tau).params
        else:
            wass_seed = int(fit_seq.generate_state(1, np.uint64)[0])
            nggp_params = fit_nggp_minwass(
                ms.rows[0], m_prefix, num_mc=cfg.minwass_num_mc, seed=wass_seed, tau=cfg.tau
            ).params

    mc_seed = int(mc_seq.generate_state(1, np.uint64)[0]) % (2**31)

    result = RepetitionResult(rep=rep)
    estimates: dict[tuple[str, str], np.ndarray] = {}
    for kind, rule in _estimator_labels(cfg):
        if kind == "cms":
            est = view_counts.min(axis=0).astype(float)
        elif cfg.num_hashes == 1:
            c = view_counts[0].astype(float)
            if kind == "dp":
                est = c * cfg.width / (dp_thetas[0] + cfg.width)
            else:
                factor = nggp_shrink_factor(
                    nggp_params.theta, nggp_params.alpha, nggp_params.tau, cfg.width
                )
                est = c * factor
        else:
            need_pmf = rule == "poe"
            need_cdf = rule == "min"
            log_tables, surv_tables = [], []
            for l, row in enumerate(ms.rows):
                if kind == "dp":
                    pmfs, survs = _dp_bucket_tables(
                        row.counts.astype(int), dp_thetas[l], cfg.width, need_pmf, need_cdf
                    )
                else:
                    pmfs, survs = _nggp_bucket_tables(
                        row.counts.astype(int),
                        nggp_params,
                        cfg.width,
                        cfg.nggp_pmf_draws,
                        mc_seed + l,
                        need_pmf,
                        need_cdf,
                    )
                log_tables.append(pmfs)
                surv_tables.append(survs)
            if rule == "poe":
                est = _poe_means(log_tables, symbol_buckets)
            else:
                est = _min_means(surv_tables, symbol_buckets)
        estimates[(kind, rule)] = est

    for (kind, rule), est in estimates.items():
        for stat in mae_by_bin(truth.counts, est, cfg.bins):
            result.freq_rows.append(
                [rep, kind, rule, stat.lo, stat.hi, stat.num_symbols, stat.mae]
            )

    if cfg.estimate_cardinality:
        row0 = ms.rows[0]
        if "dp" in cfg.smoothing:
            k_hat = estimate_card_dp(row0, dp_thetas[0]).value
            result.card_rows.append([rep, "dp", num_symbols, k_hat])
        if "nggp" in cfg.smoothing:
            mc = MonteCarloConfig(num_draws=cfg.card_mc_draws, seed=mc_seed)
            k_hat = estimate_card_nggp(row0, nggp_params, mc).value
            result.card_rows.append([rep, "nggp", num_symbols, k_hat])
    return result


def run_experiment(cfg: ExperimentConfig, freq_out=None, card_out=None, log=None):
    """Run every repetition, collecting (and optionally writing) CSV rows.

    A repetition that raises is logged and skipped; the run continues.
    Returns (freq_rows, card_rows) without headers.
    """
    log = log if log is not None else sys.stderr
    freq_rows, card_rows = [], []
    for rep in range(cfg.repetitions):
        try:
            result = run_repetition(cfg, rep)
        except Exception as exc:  # noqa: BLE001 - per-rep isolation is the contract
            print(f"repetition {rep} failed: {exc}", file=log)
            continue
        freq_rows.extend(result.freq_rows)
        card_rows.extend(result.card_rows)
    if freq_out is not None:
        writer = csv.writer(freq_out)
        writer.writerow(FREQ_HEADER)
        writer.writerows(freq_rows)
    if card_out is not None:
        writer = csv.writer(card_out)
        writer.writerow(CARD_HEADER)
        writer.writerows(card_rows)
    return freq_rows, card_rows


def summarize_mae(freq_rows) -> dict:
    """Mean MAE per (estimator, rule, bin) across repetitions."""
    acc: dict = {}
    for rep, kind, rule, lo, hi, _count, mae in freq_rows:
        acc.setdefault((kind, rule, lo, hi), []).append(mae)
    return {key: float(np.mean(vals)) for key, vals in acc.items()}
