"""Command-line surface: test | bench | sampler-eval | train-sampler | sample.

Every artifact embeds the resolved configuration, the master seed, the
package version and an ISO-8601 timestamp; stripping the timestamp,
artifacts are byte-reproducible from (inputs, flags, seed) at any worker
count. Exit codes: 0 success, 2 usage error, 3 input/parse error, 4
numeric failure. CDCIT_SEED is the fallback master seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, bench, synthetic
from .cmi import CmiConfig
from .crt import SAMPLER_KINDS, TestConfig, run_cdcit
from .dataset import Dataset, read_csv, write_csv
from .diffusion import (DiffusionConfig, sample_batch, score_model_from_doc,
                        score_model_to_doc, train_score)
from .errors import InputError, NumericError
from .synthetic import ScenarioSpec

PROFILES = {
    "fast": {"trials": 50, "repetitions": 50, "sampler_steps": 200, "epochs": 600},
    "paper": {"trials": 100, "repetitions": 100, "sampler_steps": 1000, "epochs": 1500},
}

BENCH_SCENARIOS = ("postnonlinear", "mixed", "multivariate", "gaussian-oracle")


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _resolved(args, name: str, fallback):
    """Flag value, else profile value, else the module default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if args.profile is not None and name in PROFILES[args.profile]:
        return PROFILES[args.profile][name]
    return fallback


def _master_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CDCIT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"CDCIT_SEED must be an integer, got {env!r}") from None
    return 0


def _diffusion_config(args) -> DiffusionConfig:
    hidden = args.hidden
    if hidden is not None:
        hidden = tuple(int(w) for w in hidden.split(","))
    return DiffusionConfig(
        terminal_time=args.terminal_time,
        t_min=args.t_min,
        sampler_steps=_resolved(args, "steps", DiffusionConfig.sampler_steps),
        epochs=_resolved(args, "epochs", DiffusionConfig.epochs),
        learning_rate=args.learning_rate,
        hidden_widths=hidden or DiffusionConfig.hidden_widths,
        time_draw_mode=args.time_draw_mode,
    )


def _cmi_config(args) -> CmiConfig:
    hidden = args.cmi_hidden
    if hidden is not None:
        hidden = tuple(int(w) for w in hidden.split(","))
    return CmiConfig(
        probability_clip=args.prob_clip,
        hidden_widths=hidden or CmiConfig.hidden_widths,
        epochs=args.cmi_epochs,
        learning_rate=args.cmi_learning_rate,
    )


def write_json_artifact(path, doc: dict, seed, extra: dict | None = None) -> None:
    out = dict(doc)
    out.update(extra or {})
    out["seed_master"] = seed
    out["version"] = f"cdcit-{__version__}"
    out["timestamp"] = datetime.now(timezone.utc).isoformat()
    with open(str(path), "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (fallback: CDCIT_SEED env, then 0)")
    p.add_argument("--threads", type=positive_int, default=1, help="worker processes")
    p.add_argument("--profile", choices=sorted(PROFILES), default=None,
                   help="preset scale: fast (desk) or paper (full)")


def _add_diffusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--terminal-time", type=float, default=DiffusionConfig.terminal_time)
    p.add_argument("--t-min", type=float, default=DiffusionConfig.t_min)
    p.add_argument("--steps", type=positive_int, default=None, help="reverse-SDE steps K")
    p.add_argument("--epochs", type=int, default=None, help="score-training epochs")
    p.add_argument("--learning-rate", type=float, default=DiffusionConfig.learning_rate)
    p.add_argument("--hidden", type=str, default=None,
                   help="comma-separated hidden widths, e.g. 128,128,128")
    p.add_argument("--time-draw-mode", choices=("per-sample", "shared"),
                   default=DiffusionConfig.time_draw_mode)


def _add_cmi_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--prob-clip", type=float, default=CmiConfig.probability_clip)
    p.add_argument("--cmi-hidden", type=str, default=None,
                   help="comma-separated classifier widths, e.g. 32,32")
    p.add_argument("--cmi-epochs", type=int, default=CmiConfig.epochs)
    p.add_argument("--cmi-learning-rate", type=float, default=CmiConfig.learning_rate)


def _add_test_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--b", type=positive_int, default=None, help="number of null repetitions B")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--sampler", choices=SAMPLER_KINDS, default="learned-diffusion")
    p.add_argument("--oracle-sigma2", type=float, default=1.0)


def _test_config(args, seed) -> TestConfig:
    return TestConfig(
        repetitions=_resolved(args, "b", 100),
        alpha=args.alpha,
        seed=seed,
        diffusion=_diffusion_config(args),
        cmi=_cmi_config(args),
        sampler_kind=args.sampler,
        oracle_sigma2=args.oracle_sigma2,
    )


def cmd_test(args) -> int:
    seed = _master_seed(args)
    data = read_csv(args.data)
    config = _test_config(args, seed)
    if args.model is not None:
        with open(args.model, "r", encoding="utf-8") as fh:
            unlabeled = score_model_from_doc(json.load(fh), config.diffusion)
    elif args.unlabeled is not None:
        unlabeled = read_csv(args.unlabeled).without_y()
    else:
        unlabeled = None
        if config.sampler_kind == "learned-diffusion":
            raise InputError("learned-diffusion sampler needs --unlabeled or --model")
    result = run_cdcit(data, unlabeled, config, threads=args.threads)
    write_json_artifact(args.out, result.to_doc(), seed, {"threads": args.threads})
    decision = "reject H0" if result.reject else "accept H0"
    print(f"p-value {result.p_value:.6f} at alpha {config.alpha}: {decision} "
          f"-> {args.out}")
    return 0


def cmd_bench(args) -> int:
    seed = _master_seed(args)
    trials = _resolved(args, "trials", 100)
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    config = _test_config(args, seed)
    scenario = ScenarioSpec(
        model=args.scenario,
        hypothesis=args.hypothesis,
        d_x=args.dx,
        d_y=args.dy,
        d_z=args.dz,
        n=args.n_unlabeled + args.n_test,
        seed=seed,
    )
    report = bench.run_trials(scenario, trials, config, args.n_unlabeled, args.n_test,
                              seed=seed, threads=args.threads)
    doc = report.to_doc()
    doc["test_config"] = config.to_doc()
    write_json_artifact(f"{args.out_prefix}.json", doc, seed, {"threads": args.threads})
    with open(f"{args.out_prefix}.csv", "w", encoding="utf-8") as fh:
        fh.write("trial,p_value,reject,seconds\n")
        for t, (p, s) in enumerate(zip(report.p_values, report.seconds_per_trial)):
            fh.write(f"{t},{p!r},{int(p < report.alpha)},{s!r}\n")
    print(f"rejection rate {report.rejection_rate:.4f} over {trials} trials "
          f"(alpha {report.alpha}) -> {args.out_prefix}.json")
    return 0


def cmd_sampler_eval(args) -> int:
    seed = _master_seed(args)
    reps = _resolved(args, "reps", 100)
    if reps < 1:
        raise InputError(f"reps must be >= 1, got {reps}")
    config = DiffusionConfig(
        terminal_time=args.terminal_time,
        t_min=args.t_min,
        sampler_steps=_resolved(args, "steps", DiffusionConfig.sampler_steps),
        epochs=_resolved(args, "epochs", DiffusionConfig.epochs),
        learning_rate=args.learning_rate,
        hidden_widths=(tuple(int(w) for w in args.hidden.split(","))
                       if args.hidden else bench.BENCH_HIDDEN),
        time_draw_mode=args.time_draw_mode,
    )
    report = bench.quantile_mse(args.model_id, reps, args.samples_per_rep, seed=seed,
                                config=config, sampler=args.sampler, train_n=args.train_n)
    doc = report.to_doc()
    doc["config"] = {
        "terminal_time": config.terminal_time, "t_min": config.t_min,
        "sampler_steps": config.sampler_steps, "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "hidden_widths": list(config.hidden_widths),
        "time_draw_mode": config.time_draw_mode,
        "train_n": args.train_n,
    }
    write_json_artifact(f"{args.out_prefix}.json", doc, seed)
    with open(f"{args.out_prefix}.csv", "w", encoding="utf-8") as fh:
        fh.write("tau,mse,sd\n")
        for tau, mse, sd in zip(report.taus, report.mse, report.sd):
            fh.write(f"{tau!r},{mse!r},{sd!r}\n")
    if args.samples_out or args.kde_out:
        _emit_samples(args, config, seed)
    print(f"{args.model_id} mse per tau: "
          + " ".join(f"{t}={m:.4f}" for t, m in zip(report.taus, report.mse))
          + f" -> {args.out_prefix}.json")
    return 0


def _emit_samples(args, config: DiffusionConfig, seed) -> None:
    """Raw draws (and optional KDE curve) at one random z, for external plots."""
    from .seeding import seed_key

    z = synthetic.draw_z(args.model_id, 1, seed_key(seed, 2, 0))[0]
    if args.sampler == "diffusion":
        train_set, _ = synthetic.generate(ScenarioSpec(args.model_id, n=args.train_n),
                                          seed=seed_key(seed, 0))
        model = train_score(train_set, config, seed_key(seed, 1))
        draws = sample_batch(np.broadcast_to(z, (args.samples_per_rep, z.shape[0])),
                             model, config, seed_key(seed, 3, 0))[:, 0]
    else:
        draws = synthetic.conditional_draws(args.model_id, z, args.samples_per_rep,
                                            seed_key(seed, 3, 0))
    if args.samples_out:
        with open(args.samples_out, "w", encoding="utf-8") as fh:
            fh.write("x0\n")
            for v in draws:
                fh.write(f"{float(v)!r}\n")
    if args.kde_out:
        lo, hi = float(draws.min()), float(draws.max())
        pad = 0.1 * (hi - lo + 1e-12)
        grid = np.linspace(lo - pad, hi + pad, 256)
        dens = bench.gaussian_kde(draws, grid)
        with open(args.kde_out, "w", encoding="utf-8") as fh:
            fh.write("point,density\n")
            for p, d in zip(grid, dens):
                fh.write(f"{float(p)!r},{float(d)!r}\n")


def cmd_train_sampler(args) -> int:
    seed = _master_seed(args)
    unlabeled = read_csv(args.data).without_y()
    config = _diffusion_config(args)
    model = train_score(unlabeled, config, seed)
    write_json_artifact(args.out, score_model_to_doc(model), seed)
    print(f"trained score model (d_x={model.d_x}, d_z={model.d_z}) -> {args.out}")
    return 0


def cmd_sample(args) -> int:
    seed = _master_seed(args)
    with open(args.model, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    config = DiffusionConfig(
        sampler_steps=_resolved(args, "steps", DiffusionConfig.sampler_steps))
    model = score_model_from_doc(doc, config)
    z_set = read_csv(args.z)
    if z_set.d_z != model.d_z:
        raise InputError(f"z file has d_z={z_set.d_z}, model expects {model.d_z}")
    from .seeding import seed_key

    with open(args.out, "w", encoding="utf-8") as fh:
        header = "z_row,draw," + ",".join(f"x{i}" for i in range(model.d_x))
        fh.write(header + "\n")
        for row in range(z_set.n):
            tiled = np.broadcast_to(z_set.z_block[row], (args.draws, model.d_z))
            draws = sample_batch(tiled, model, config, seed_key(seed, row))
            for j in range(args.draws):
                vals = ",".join(repr(float(v)) for v in draws[j])
                fh.write(f"{row},{j},{vals}\n")
    print(f"{z_set.n * args.draws} draws -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdcit",
        description="Conditional independence testing with a diffusion-based "
                    "conditional sampler and a classifier CMI statistic.",
    )
    parser.add_argument("--version", action="version", version=f"cdcit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run one CI test on a CSV dataset")
    p.add_argument("data", help="CSV with x*, y*, z* columns")
    p.add_argument("--unlabeled", default=None, help="CSV with x*, z* columns")
    p.add_argument("--model", default=None, help="cached score-model JSON")
    p.add_argument("--out", default="result.json")
    _add_common(p)
    _add_test_flags(p)
    _add_diffusion_flags(p)
    _add_cmi_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("bench", help="rejection-rate sweep on a synthetic scenario")
    p.add_argument("--scenario", choices=BENCH_SCENARIOS, required=True)
    p.add_argument("--hypothesis", choices=synthetic.HYPOTHESES, default="h0")
    p.add_argument("--dz", type=int, default=10)
    p.add_argument("--dx", type=int, default=1)
    p.add_argument("--dy", type=int, default=1)
    p.add_argument("--trials", type=positive_int, default=None)
    p.add_argument("--n-unlabeled", type=positive_int, default=500)
    p.add_argument("--n-test", type=positive_int, default=500)
    p.add_argument("--out-prefix", default="bench")
    _add_common(p)
    _add_test_flags(p)
    _add_diffusion_flags(p)
    _add_cmi_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sampler-eval", help="quantile-MSE evaluation of a sampler")
    p.add_argument("--model-id", choices=("m1", "m2", "m3"), required=True)
    p.add_argument("--reps", type=positive_int, default=None)
    p.add_argument("--samples-per-rep", type=positive_int, default=500)
    p.add_argument("--sampler", choices=bench.SAMPLER_KINDS, default="diffusion")
    p.add_argument("--train-n", type=positive_int, default=500)
    p.add_argument("--out-prefix", default="sampler_eval")
    p.add_argument("--samples-out", default=None, help="CSV of raw draws at one z")
    p.add_argument("--kde-out", default=None, help="CSV of (point, density) pairs")
    _add_common(p)
    _add_diffusion_flags(p)
    p.set_defaults(func=cmd_sampler_eval)

    p = sub.add_parser("train-sampler", help="train and cache a score model")
    p.add_argument("--data", required=True, help="CSV with x*, z* columns")
    p.add_argument("--out", default="model.json")
    _add_common(p)
    _add_diffusion_flags(p)
    p.set_defaults(func=cmd_train_sampler)

    p = sub.add_parser("sample", help="draw conditional samples from a cached model")
    p.add_argument("--model", required=True)
    p.add_argument("--z", required=True, help="CSV with z* columns")
    p.add_argument("--draws", type=positive_int, default=1)
    p.add_argument("--out", default="samples.csv")
    _add_common(p)
    p.add_argument("--steps", type=positive_int, default=None)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
