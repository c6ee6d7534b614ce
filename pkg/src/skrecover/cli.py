"""Command-line interface.

Subcommands mirror the library: build/merge/inspect sketches, fit
smoothing parameters, estimate frequencies and distinct counts, report
intervals, simulate synthetic streams, and run the experiment harness.

Token input files are newline-delimited; with ``--format tokens`` each
line is a UTF-8 token, with ``--format u64`` each line is an unsigned
64-bit integer.  Exit codes: 0 on success, 2 on usage errors, 3 on
numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen
from .cardinality import estimate_card_dp, estimate_card_nggp
from .errors import NumericError, SkrecoverError
from .fitting import PrefixSample, fit_dp, fit_nggp_minwass, fit_nggp_prefix
from .intervals import CalibrationSet, conformal_calibrate, conformal_interval, smoothed_interval
from .multiview import estimate_freq_multiview
from .sketch import MultiSketch, Sketch, read_sketch, write_counts_csv, write_sketch
from .smoothing import (
    MonteCarloConfig,
    SmoothingParams,
    estimate_freq_cms,
    estimate_freq_dp,
    estimate_freq_nggp,
    pi_dp,
    pi_nggp,
)


def _read_tokens(path: str, fmt: str):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if fmt == "u64":
        return [int(line) for line in lines]
    return lines


def _load_sketch(path: str):
    with open(path, "rb") as fh:
        return read_sketch(fh)


def _save_sketch(path: str, sketch) -> None:
    with open(path, "wb") as fh:
        write_sketch(fh, sketch)


def _load_params(path: str) -> SmoothingParams:
    with open(path, "r", encoding="utf-8") as fh:
        return SmoothingParams.from_dict(json.load(fh))


def _parse_key(value: str, key_type: str):
    return int(value) if key_type == "int" else value


def _cmd_sketch_build(args) -> int:
    tokens = _read_tokens(args.input, args.format)
    ms = MultiSketch.from_master_seed(args.seed, args.m_hashes, args.j)
    ms.add_many(tokens)
    _save_sketch(args.out, ms.rows[0] if args.m_hashes == 1 else ms)
    print(f"sketched {ms.n} items into {args.m_hashes} x {args.j} buckets -> {args.out}")
    return 0


def _cmd_sketch_merge(args) -> int:
    merged = _load_sketch(args.inputs[0])
    for path in args.inputs[1:]:
        merged = merged.merge(_load_sketch(path))
    _save_sketch(args.out, merged)
    print(f"merged {len(args.inputs)} sketches -> {args.out}")
    return 0


def _cmd_sketch_info(args) -> int:
    sk = _load_sketch(args.sketch)
    rows = sk.rows if isinstance(sk, MultiSketch) else [sk]
    print(f"rows={len(rows)} width={rows[0].width} n={rows[0].n}")
    for l, row in enumerate(rows):
        print(f"row {l}: seed_a={row.hash_fn.seed_a} seed_b={row.hash_fn.seed_b}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            write_counts_csv(fh, sk)
    return 0


def _first_row(sk) -> Sketch:
    return sk.rows[0] if isinstance(sk, MultiSketch) else sk


def _cmd_fit(args) -> int:
    if args.fit_cmd == "dp":
        result = fit_dp(_first_row(_load_sketch(args.sketch)))
    elif args.fit_cmd == "nggp-prefix":
        tokens = _read_tokens(args.input, args.format)[: args.m]
        result = fit_nggp_prefix(PrefixSample.from_stream(tokens), tau=args.tau)
    else:
        result = fit_nggp_minwass(
            _first_row(_load_sketch(args.sketch)),
            m=args.m,
            num_mc=args.num_mc,
            seed=args.seed,
            tau=args.tau,
        )
    payload = result.to_dict()
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _cmd_estimate_freq(args) -> int:
    sk = _load_sketch(args.sketch)
    key = _parse_key(args.key, args.key_type)
    mc = MonteCarloConfig(num_draws=args.mc_draws, seed=args.mc_seed)
    if isinstance(sk, MultiSketch) and sk.num_hashes > 1:
        params = None if args.smoothing == "cms" else _load_params(args.params_file)
        rule = "cms" if args.smoothing == "cms" else args.rule
        est = estimate_freq_multiview(sk, key, params, rule, mc)
        print(f"{est.point}")
        return 0
    row = _first_row(sk)
    c = row.bucket_count(key)
    if args.smoothing == "cms":
        print(estimate_freq_cms(c))
    elif args.smoothing == "dp":
        params = _load_params(args.params_file)
        print(estimate_freq_dp(c, params.theta, row.width))
    else:
        params = _load_params(args.params_file)
        print(estimate_freq_nggp(c, params, row.width))
    return 0


def _cmd_estimate_card(args) -> int:
    row = _first_row(_load_sketch(args.sketch))
    params = _load_params(args.params_file)
    if args.smoothing == "dp" or params.kind == "dp":
        est = estimate_card_dp(row, params.theta)
    else:
        mc = MonteCarloConfig(num_draws=args.mc_draws, seed=args.mc_seed)
        est = estimate_card_nggp(row, params, mc)
    print(f"{est.value}")
    return 0


def _cmd_interval(args) -> int:
    sk = _load_sketch(args.sketch)
    key = _parse_key(args.key, args.key_type)
    params = _load_params(args.params_file)
    mc = MonteCarloConfig(num_draws=args.mc_draws, seed=args.mc_seed)
    if isinstance(sk, MultiSketch) and sk.num_hashes > 1:
        est = estimate_freq_multiview(sk, key, params, args.rule, mc)
        dist, point = est.dist, est.point
        cap = min(sk.bucket_counts(key))
    else:
        row = _first_row(sk)
        c = row.bucket_count(key)
        dist = pi_dp(c, params.theta, row.width) if params.kind == "dp" else pi_nggp(
            c, params, row.width, mc
        )
        point = dist.mean()
        cap = c
    if args.calibration:
        with open(args.calibration, "r", encoding="utf-8") as fh:
            cal = CalibrationSet.read_csv(fh, args.level)

        def estimator(k):
            if isinstance(sk, MultiSketch) and sk.num_hashes > 1:
                return estimate_freq_multiview(sk, k, params, args.rule, mc).point
            row = _first_row(sk)
            c_k = row.bucket_count(k)
            if params.kind == "dp":
                return estimate_freq_dp(c_k, params.theta, row.width)
            return estimate_freq_nggp(c_k, params, row.width)

        adj = conformal_calibrate(cal, estimator)
        lo, hi = conformal_interval(adj, point, cap)
    else:
        lo, hi = smoothed_interval(dist, args.level)
    print(f"{lo} {hi}")
    return 0


def _cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.sim_cmd == "pyp":
        stream, truth = datagen.gen_pyp(rng, args.gamma, args.sigma, args.n)
    elif args.sim_cmd == "zipf":
        stream, truth = datagen.gen_zipf(rng, args.c, args.vocab, args.n)
    else:
        from .fitting import nggp_urn_sample

        prefix, stream = nggp_urn_sample(rng, args.theta, args.alpha, args.tau, args.n, True)
        truth = datagen.GroundTruth(np.asarray(prefix.counts, dtype=np.int64), args.n)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(str(x) for x in stream.tolist()))
        fh.write("\n")
    if args.truth_out:
        with open(args.truth_out, "w", encoding="utf-8", newline="") as fh:
            truth.write_csv(fh)
    print(f"wrote {args.n} items, {truth.num_distinct} distinct -> {args.out}")
    return 0


def _cmd_eval_run(args) -> int:
    from .experiment import ExperimentConfig, run_experiment

    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    for key in ("smoothing", "rules", "bins"):
        if key in raw:
            raw[key] = tuple(tuple(b) if isinstance(b, list) else b for b in raw[key]) if key == "bins" else tuple(raw[key])
    if "bins" in raw:
        raw["bins"] = tuple((float(lo), float(hi)) for lo, hi in raw["bins"])
    cfg = ExperimentConfig(**raw)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "freq_mae.csv", "w", encoding="utf-8", newline="") as freq_fh, open(
        out_dir / "cardinality.csv", "w", encoding="utf-8", newline=""
    ) as card_fh:
        run_experiment(cfg, freq_out=freq_fh, card_out=card_fh)
    print(f"wrote {out_dir / 'freq_mae.csv'} and {out_dir / 'cardinality.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skrecover", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_sketch = sub.add_parser("sketch", help="build, merge, or inspect sketches")
    sketch_sub = p_sketch.add_subparsers(dest="sketch_cmd", required=True)
    p_build = sketch_sub.add_parser("build")
    p_build.add_argument("input")
    p_build.add_argument("--format", choices=("tokens", "u64"), default="tokens")
    p_build.add_argument("--j", type=int, required=True)
    p_build.add_argument("--m-hashes", type=int, default=1)
    p_build.add_argument("--seed", type=int, default=0)
    p_build.add_argument("--out", required=True)
    p_build.set_defaults(func=_cmd_sketch_build)
    p_merge = sketch_sub.add_parser("merge")
    p_merge.add_argument("inputs", nargs="+")
    p_merge.add_argument("--out", required=True)
    p_merge.set_defaults(func=_cmd_sketch_merge)
    p_info = sketch_sub.add_parser("info")
    p_info.add_argument("sketch")
    p_info.add_argument("--csv")
    p_info.set_defaults(func=_cmd_sketch_info)

    p_fit = sub.add_parser("fit", help="fit smoothing parameters")
    fit_sub = p_fit.add_subparsers(dest="fit_cmd", required=True)
    p_fit_dp = fit_sub.add_parser("dp")
    p_fit_dp.add_argument("--sketch", required=True)
    p_fit_dp.add_argument("--out")
    p_fit_dp.set_defaults(func=_cmd_fit)
    p_fit_prefix = fit_sub.add_parser("nggp-prefix")
    p_fit_prefix.add_argument("--input", required=True)
    p_fit_prefix.add_argument("--format", choices=("tokens", "u64"), default="tokens")
    p_fit_prefix.add_argument("--m", type=int, required=True)
    p_fit_prefix.add_argument("--tau", type=float, default=0.5)
    p_fit_prefix.add_argument("--out")
    p_fit_prefix.set_defaults(func=_cmd_fit)
    p_fit_wass = fit_sub.add_parser("nggp-wass")
    p_fit_wass.add_argument("--sketch", required=True)
    p_fit_wass.add_argument("--m", type=int, required=True)
    p_fit_wass.add_argument("--num-mc", type=int, default=10)
    p_fit_wass.add_argument("--seed", type=int, default=0)
    p_fit_wass.add_argument("--tau", type=float, default=0.5)
    p_fit_wass.add_argument("--out")
    p_fit_wass.set_defaults(func=_cmd_fit)

    p_est = sub.add_parser("estimate", help="estimate a frequency or the distinct count")
    est_sub = p_est.add_subparsers(dest="est_cmd", required=True)
    p_freq = est_sub.add_parser("freq")
    p_freq.add_argument("--sketch", required=True)
    p_freq.add_argument("--key", required=True)
    p_freq.add_argument("--key-type", choices=("str", "int"), default="str")
    p_freq.add_argument("--smoothing", choices=("dp", "nggp", "cms"), required=True)
    p_freq.add_argument("--params-file")
    p_freq.add_argument("--rule", choices=("poe", "min"), default="min")
    p_freq.add_argument("--mc-draws", type=int, default=10_000)
    p_freq.add_argument("--mc-seed", type=int, default=0)
    p_freq.set_defaults(func=_cmd_estimate_freq)
    p_card = est_sub.add_parser("card")
    p_card.add_argument("--sketch", required=True)
    p_card.add_argument("--smoothing", choices=("dp", "nggp"), required=True)
    p_card.add_argument("--params-file", required=True)
    p_card.add_argument("--mc-draws", type=int, default=10_000)
    p_card.add_argument("--mc-seed", type=int, default=0)
    p_card.set_defaults(func=_cmd_estimate_card)

    p_int = sub.add_parser("interval", help="prediction interval for one key")
    p_int.add_argument("--sketch", required=True)
    p_int.add_argument("--key", required=True)
    p_int.add_argument("--key-type", choices=("str", "int"), default="str")
    p_int.add_argument("--params-file", required=True)
    p_int.add_argument("--level", type=float, default=0.95)
    p_int.add_argument("--rule", choices=("poe", "min"), default="min")
    p_int.add_argument("--calibration", help="calibration CSV for conformal intervals")
    p_int.add_argument("--mc-draws", type=int, default=10_000)
    p_int.add_argument("--mc-seed", type=int, default=0)
    p_int.set_defaults(func=_cmd_interval)

    p_sim = sub.add_parser("simulate", help="generate synthetic token streams")
    sim_sub = p_sim.add_subparsers(dest="sim_cmd", required=True)
    p_pyp = sim_sub.add_parser("pyp")
    p_pyp.add_argument("--gamma", type=float, required=True)
    p_pyp.add_argument("--sigma", type=float, required=True)
    p_zipf = sim_sub.add_parser("zipf")
    p_zipf.add_argument("--c", type=float, required=True)
    p_zipf.add_argument("--vocab", type=int, default=10**6)
    p_nggp = sim_sub.add_parser("nggp")
    p_nggp.add_argument("--theta", type=float, required=True)
    p_nggp.add_argument("--alpha", type=float, required=True)
    p_nggp.add_argument("--tau", type=float, default=0.5)
    for p in (p_pyp, p_zipf, p_nggp):
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)
        p.add_argument("--truth-out")
        p.set_defaults(func=_cmd_simulate)

    p_eval = sub.add_parser("eval", help="run the experiment harness")
    eval_sub = p_eval.add_subparsers(dest="eval_cmd", required=True)
    p_run = eval_sub.add_parser("run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out-dir", required=True)
    p_run.set_defaults(func=_cmd_eval_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (SkrecoverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
