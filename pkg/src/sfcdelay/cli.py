"""Command-line pipeline: simulate, train, predict, bounds, admission, evaluate.

Every subcommand is deterministic given its flags and seed, and writes plain
text outputs only. Relative output paths are resolved against the directory
named by the SFCDELAY_OUTDIR environment variable when it is set.

Exit codes: 0 success, 2 bad flag or configuration, 3 missing input file,
4 malformed or mismatched input data, 5 runtime failure (diverged training,
runaway queue).
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import Counter

import numpy as np

from . import analytic, control, evalkit, mdn, mixstats, netsim

__all__ = ["main", "entry"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_BAD_INPUT = 4
EXIT_RUNTIME = 5

OUTDIR_ENV = "SFCDELAY_OUTDIR"


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _out_path(path: str) -> str:
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir and not os.path.isabs(path):
        os.makedirs(outdir, exist_ok=True)
        return os.path.join(outdir, path)
    return path


def _parse_b(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part.strip()) for part in text.split(","))
    except ValueError:
        raise CliFailure(EXIT_USAGE, f"--b must be comma-separated integers, got {text!r}") from None
    if any(v < 0 for v in values):
        raise CliFailure(EXIT_USAGE, "--b entries must be >= 0")
    return values


def _check_prob(name: str, value: float) -> float:
    if not 0.0 < value < 1.0:
        raise CliFailure(EXIT_USAGE, f"{name} must lie in (0, 1), got {value}")
    return value


def _load_model(path: str) -> mdn.MdnModel:
    if not os.path.exists(path):
        raise CliFailure(EXIT_MISSING, f"model file not found: {path}")
    return mdn.load_model(path)


def _load_dataset(path: str) -> list[netsim.CustomerRecord]:
    if not os.path.exists(path):
        raise CliFailure(EXIT_MISSING, f"dataset file not found: {path}")
    return netsim.read_dataset(path)


def _forward_checked(model: mdn.MdnModel, b: tuple[int, ...]) -> mixstats.GaussianMixture:
    if len(b) != model.arch.input_dim:
        raise CliFailure(
            EXIT_BAD_INPUT,
            f"--b has {len(b)} entries but the model expects {model.arch.input_dim}",
        )
    return mdn.forward(model, b)


# ---------------------------------------------------------------------------
# Subcommands

def _cmd_simulate(args) -> int:
    spec = netsim.build_topology(args.topology)
    result = netsim.simulate_detailed(spec, args.packets, args.warmup, args.seed)
    out = _out_path(args.out)
    netsim.write_dataset(result.records, out)

    delays = [rec.delay for rec in result.records]
    print(f"records written: {len(result.records)} -> {out}")
    print(f"mean delay: {float(np.mean(delays)):.4f}" if delays else "mean delay: n/a")
    for i, st in enumerate(spec.stages):
        util = result.stage_busy_time[i] / (st.servers * result.makespan)
        print(f"stage {i + 1} utilization: {util:.4f}")
    freq = Counter(rec.path_id for rec in result.records)
    if len(spec.paths()) > 1:
        for pid, (path, prob) in enumerate(spec.paths()):
            share = freq.get(pid, 0) / max(len(result.records), 1)
            nodes = ">".join(str(n + 1) for n in path)
            print(f"path {pid} [{nodes}]: frequency {share:.4f} (branch prob {prob:.4f})")
    return EXIT_OK


def _cmd_train(args) -> int:
    records = _load_dataset(args.data)
    if not records:
        raise CliFailure(EXIT_BAD_INPUT, f"dataset {args.data} holds no records")
    try:
        hidden = tuple(int(w) for w in args.hidden.split(","))
    except ValueError:
        raise CliFailure(EXIT_USAGE, f"--hidden must be comma-separated integers, got {args.hidden!r}") from None
    features = np.array([rec.b for rec in records], dtype=float)
    targets = np.array([rec.delay for rec in records])
    arch = mdn.MdnArchitecture(input_dim=features.shape[1], hidden=hidden, kernels=args.kernels)
    config = mdn.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        seed=args.seed,
    )
    result = mdn.train(features, targets, arch, config)
    out_model = _out_path(args.out_model)
    mdn.save_model(result.model, out_model)
    mdn.write_loss_trace(out_model + ".loss", result.epoch_losses)
    print(f"model written: {out_model}")
    print(f"loss trace written: {out_model}.loss")
    print(f"final training NLL per sample: {result.epoch_losses[-1]:.6f}")
    print(f"holdout NLL per sample: {result.holdout_nll:.6f}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    b = _parse_b(args.b)
    if args.analytic:
        if not args.topology:
            raise CliFailure(EXIT_USAGE, "--analytic requires --topology")
        spec = netsim.build_topology(args.topology)
        if len(b) != spec.num_stages:
            raise CliFailure(
                EXIT_BAD_INPUT,
                f"--b has {len(b)} entries but topology has {spec.num_stages} stages",
            )
        mix = analytic.gmm_approximation(spec, b)
    else:
        if not args.model:
            raise CliFailure(EXIT_USAGE, "provide --model or --analytic --topology")
        mix = _forward_checked(_load_model(args.model), b)
    for i, (w, m, v) in enumerate(mix.components):
        print(f"component {i + 1}: weight={w:.6f} mean={m:.6f} variance={v:.6f}")
    sd = np.sqrt(mix.variances)
    lo = float(np.min(mix.means - 4.0 * sd))
    hi = float(np.max(mix.means + 4.0 * sd))
    grid = np.linspace(lo, hi, 512)
    out = _out_path(args.out_pdf)
    evalkit.write_xy(out, grid, mixstats.pdf(mix, grid), header="delay density")
    print(f"pdf plot data written: {out}")
    return EXIT_OK


def _cmd_bounds(args) -> int:
    eps = _check_prob("--eps", args.eps)
    pcl = _check_prob("--pcl", args.pcl)
    mix = _forward_checked(_load_model(args.model), _parse_b(args.b))
    bounds = mixstats.delay_bounds(mix, eps_lb=eps, eps_ub=eps, p_cl=pcl)
    print(f"d_lb {bounds.d_lb:.6f}")
    print(f"d_ub {bounds.d_ub:.6f}")
    print(f"mmse {bounds.mmse:.6f}")
    print(f"ci_half_width {bounds.ci_half_width:.6f}")
    return EXIT_OK


def _cmd_admission(args) -> int:
    threshold = _check_prob("--threshold", args.threshold) if args.threshold < 1.0 else args.threshold
    if args.deadline <= 0:
        raise CliFailure(EXIT_USAGE, f"--deadline must be > 0, got {args.deadline}")
    spec = netsim.build_topology(args.topology)
    model = _load_model(args.model)
    if model.arch.input_dim != spec.num_stages:
        raise CliFailure(
            EXIT_BAD_INPUT,
            f"model expects {model.arch.input_dim} stages, topology has {spec.num_stages}",
        )
    policy = control.AdmissionPolicy(
        predictor=model, deadline=args.deadline, drop_threshold=threshold
    )
    baseline, controlled = control.run_admission_experiment(
        spec, policy, args.packets, args.seed, args.warmup
    )
    prefix = _out_path(args.out_prefix)
    for tag, report in (("baseline", baseline), ("policy", controlled)):
        control.write_report(report, f"{prefix}.{tag}.txt")
        control.write_packet_log(report, f"{prefix}.{tag}.log.csv")
        print(
            f"{tag}: offered {report.offered}, dropped {report.dropped}, "
            f"throughput {report.throughput:.4f}"
        )
    print(f"reports written: {prefix}.baseline.txt {prefix}.policy.txt")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    eps = _check_prob("--eps", args.eps)
    pcl = _check_prob("--pcl", args.pcl)
    model = _load_model(args.model)
    records = _load_dataset(args.data)
    if not records:
        raise CliFailure(EXIT_BAD_INPUT, f"dataset {args.data} holds no records")
    if len(records[0].b) != model.arch.input_dim:
        raise CliFailure(
            EXIT_BAD_INPUT,
            f"dataset has {len(records[0].b)} stages but the model expects {model.arch.input_dim}",
        )

    features = np.array([rec.b for rec in records], dtype=float)
    delays = np.array([rec.delay for rec in records])
    # predictions depend on b only, so compute once per distinct vector
    uniq, inverse = np.unique(features, axis=0, return_inverse=True)
    pi, means, var = mdn.forward_batch(model, uniq)
    mmse_u = np.einsum("nk,nk->n", pi, means)
    d_ub_u = mixstats.quantiles_batch(pi, means, var, 1.0 - eps)
    d_lb_u = mixstats.quantiles_batch(pi, means, var, eps)
    half_u = mixstats.ci_half_widths_batch(pi, means, var, pcl)

    mmse_hat = mmse_u[inverse]
    rate_ub, rate_lb = evalkit.violation_rates(d_ub_u[inverse], d_lb_u[inverse], delays)
    coverage = evalkit.ci_coverage(mmse_hat, half_u[inverse], delays)
    metrics = {
        "records": len(records),
        "eps": eps,
        "p_cl": pcl,
        "mse_mmse": evalkit.mse(mmse_hat, delays),
        "mse_unconditional_mean": evalkit.mse(np.full_like(delays, delays.mean()), delays),
        "violation_rate_ub": rate_ub,
        "violation_rate_lb": rate_lb,
        "ci_coverage": coverage,
    }
    if args.probe_b:
        probe = _parse_b(args.probe_b)
        if len(probe) != model.arch.input_dim:
            raise CliFailure(
                EXIT_BAD_INPUT,
                f"--probe-b has {len(probe)} entries but the model expects {model.arch.input_dim}",
            )
        ks = evalkit.conditional_distribution_match(model, records, probe)
        metrics["probe_b"] = ",".join(str(v) for v in probe)
        metrics["probe_ks"] = ks
    out = _out_path(args.out)
    evalkit.write_metric_report(out, metrics)
    for key, value in metrics.items():
        print(f"{key}: {value}")
    print(f"metric report written: {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfcdelay",
        description="Queueing-network delay simulation, learned delay distributions, and bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation and write a dataset")
    p.add_argument("--topology", required=True, help="preset name or config file path")
    p.add_argument("--packets", type=int, required=True)
    p.add_argument("--warmup", type=int, default=None, help="default: 10%% of --packets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="fit an MDN to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--hidden", default="64,32,32")
    p.add_argument("--kernels", type=int, default=3)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-model", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="print the delay mixture for one observation")
    p.add_argument("--model")
    p.add_argument("--analytic", action="store_true", help="use the closed-form mixture instead")
    p.add_argument("--topology", help="required with --analytic")
    p.add_argument("--b", required=True, help='queue lengths, e.g. "6,12,13"')
    p.add_argument("--out-pdf", default="pdf.txt")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("bounds", help="delay bounds and confidence interval for one observation")
    p.add_argument("--model", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--pcl", type=float, default=0.95)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("admission", help="paired baseline/policy throughput experiment")
    p.add_argument("--topology", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--deadline", type=float, default=80.0)
    p.add_argument("--threshold", type=float, default=0.95)
    p.add_argument("--packets", type=int, required=True)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", default="admission")
    p.set_defaults(func=_cmd_admission)

    p = sub.add_parser("evaluate", help="bound calibration and MSE metrics on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--probe-b", default=None)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--pcl", type=float, default=0.95)
    p.add_argument("--out", default="metrics.txt")
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except netsim.UnknownTopologyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except netsim.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (netsim.DatasetFormatError, mdn.MdnFormatError, evalkit.InsufficientMatchesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (mdn.TrainingDivergedError, netsim.RunawayQueueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
