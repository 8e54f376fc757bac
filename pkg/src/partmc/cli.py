"""Command-line entry point: ``partmc <subcommand> [options]``.

Exit status is 0 on success, 1 when a stage fails and 2 for invalid
arguments or configuration.
"""

import argparse
import os
import sys

import numpy as np

from . import analysis, bench, persist
from .config import ConfigError, load_config
from .errors import StageError
from .mh import UniformProposal, build_proposal
from .orchestrator import explore, fit_partition, run_algorithm1, run_naive, run_pt_baseline
from .targets import build_target, symmetric_mixture_1d


def _load(args):
    config, digest = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config, digest


def _out(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_explore(args):
    started = persist.now()
    config, digest = _load(args)
    out = _out(args)
    bank = explore(config)
    persist.write_bank(os.path.join(out, "bank.csv"), bank)
    persist.write_manifest(out, "explore", digest, config.seed, {"bank": "bank.csv"}, started)
    print(f"wrote {len(bank)} exploration samples to {out}/bank.csv")


def cmd_partition(args):
    started = persist.now()
    config, digest = _load(args)
    out = _out(args)
    bank = persist.read_bank(args.bank) if args.bank else explore(config)
    model = fit_partition(config, bank.points, build_proposal(config.proposal), 0)
    persist.save_partition(os.path.join(out, "partition_0.json"), model)
    labels = model.assign(bank.points, strict=False)
    persist.write_manifest(out, "partition", digest, config.seed, {"partition": "partition_0.json"}, started,
                           {"region_sample_counts": np.bincount(labels, minlength=model.n).tolist()})
    print(f"wrote {config.partition_method} partition with {model.n} regions to {out}/partition_0.json")


def _write_report(out, report, command, digest, config, started):
    artifacts = {"report": "report.json"}
    if report.traces:
        persist.write_traces(os.path.join(out, "traces.csv"), report.traces)
        artifacts["traces"] = "traces.csv"
    for r, model in enumerate(report.partitions):
        name = f"partition_{r}.json"
        persist.save_partition(os.path.join(out, name), model)
        artifacts[f"partition_{r}"] = name
        report.partition_files.append(name)
    if report.weights is not None:
        persist.write_json(os.path.join(out, "weights.json"), report.weights.to_dict())
        artifacts["weights"] = "weights.json"
    persist.write_json(os.path.join(out, "report.json"), report.to_dict())
    persist.write_manifest(out, command, digest, config.seed, artifacts, started)
    print("mu_hat = [" + ", ".join(persist.fmt(v) for v in report.mu_hat) + "]")


def cmd_run(args):
    started = persist.now()
    config, digest = _load(args)
    _write_report(_out(args), run_algorithm1(config), "run", digest, config, started)


def cmd_naive(args):
    started = persist.now()
    config, digest = _load(args)
    _write_report(_out(args), run_naive(config), "naive", digest, config, started)


def cmd_pt(args):
    started = persist.now()
    config, digest = _load(args)
    report = run_pt_baseline(config)
    out = _out(args)
    persist.write_bank(os.path.join(out, "cold_chain.csv"), report.bank)
    persist.write_json(os.path.join(out, "report.json"), report.to_dict())
    persist.write_manifest(out, "pt", digest, config.seed,
                           {"report": "report.json", "traces": "cold_chain.csv"}, started)
    print("mu_hat = [" + ", ".join(persist.fmt(v) for v in report.mu_hat) + "]")


def cmd_analyze(args):
    started = persist.now()
    out = _out(args)
    if args.what == "objective_scan":
        rows = analysis.objective_scan_1d(symmetric_mixture_1d(args.mu, args.sigma), UniformProposal(args.tau))
        name = "objective_scan.csv"
        persist.write_table(os.path.join(out, name), ["R", "value_real", "value_ncut", "nu_par_bound"], rows)
    elif args.what == "cycle":
        arcs = [int(a) for a in args.arcs.split(",")]
        name = "cycle_ratio.csv"
        persist.write_table(os.path.join(out, name), ["m", "arcs", "ratio_const_h", "ratio_worst_h"],
                            [[args.m, args.arcs.replace(",", "-"),
                              analysis.cycle_ratio(args.m, arcs, np.ones(args.m)),
                              analysis.cycle_ratio(args.m, arcs)]])
    elif args.what == "cheeger":
        from . import rng as rngmod
        g = rngmod.stream(args.seed or 0, rngmod.ANALYSIS, 3)
        rows = []
        for i in range(args.replications or 200):
            m = int(g.integers(2, 13))
            lo, gap, hi = analysis.cheeger_check(analysis.random_reversible_chain(m, g))
            rows.append([i, m, lo, gap, hi, int(lo <= gap <= hi)])
        name = "cheeger.csv"
        persist.write_table(os.path.join(out, name), ["chain", "size", "phi2_half", "gap", "two_phi", "holds"], rows)
    else:
        mus = [float(v) for v in args.mus.split(",")]
        eps = [float(v) for v in args.epsilons.split(",")]
        curves = analysis.n_max_experiment(mus, eps, tau=args.tau, replications=args.replications or 20,
                                           seed=args.seed or 0)
        name = "nmax.csv"
        persist.write_table(os.path.join(out, name),
                            ["mu", "epsilon", "mean_nmax", "smoothed_nmax", "censored", "heuristic"],
                            list(curves.rows()))
    persist.write_manifest(out, f"analyze {args.what}", None, args.seed, {"table": name}, started)
    print(f"wrote {out}/{name}")


def cmd_bench(args):
    started = persist.now()
    out = _out(args)
    config, digest = (None, None)
    if args.config:
        config, digest = load_config(args.config)
    files = bench.run_benchmark(args.name, out, args.replications or 1, args.seed, config)
    seed = args.seed if args.seed is not None else (config.seed if config else None)
    persist.write_manifest(out, f"bench {args.name}", digest, seed,
                           {os.path.splitext(os.path.basename(f))[0]: os.path.relpath(f, out) for f in files},
                           started, {"replications": args.replications or 1})
    with open(files[0]) as fh:
        sys.stdout.write(fh.read())


def build_parser():
    p = argparse.ArgumentParser(prog="partmc", description="Partitioned parallel MCMC experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment config (JSON)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")

    for name, fn, helptext in (("explore", cmd_explore, "exploration stage only; writes bank.csv"),
                               ("run", cmd_run, "full partitioned sampler"),
                               ("naive", cmd_naive, "naive parallel chains baseline"),
                               ("pt", cmd_pt, "parallel tempering baseline")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("partition", help="fit the first-round partition")
    common(sp)
    sp.add_argument("--bank", help="reuse a bank.csv instead of exploring")
    sp.set_defaults(func=cmd_partition)

    sp = sub.add_parser("analyze", help="exact discrete-chain analyses")
    sp.add_argument("what", choices=["objective_scan", "cycle", "cheeger", "nmax"])
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--replications", type=int, default=None)
    sp.add_argument("--mu", type=float, default=1.0)
    sp.add_argument("--sigma", type=float, default=0.4)
    sp.add_argument("--tau", type=float, default=0.2)
    sp.add_argument("--m", type=int, default=64)
    sp.add_argument("--arcs", default="16,16,16,16")
    sp.add_argument("--mus", default="0.5,1.0,2.0,3.7")
    sp.add_argument("--epsilons", default="0.015,0.01,0.0085")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("bench", help="replicated benchmark; writes summary.csv")
    sp.add_argument("name", choices=list(bench.BENCHMARKS))
    common(sp, config_required=False)
    sp.add_argument("--replications", type=int, default=1)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be in [0, 2^64)", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"stage failed: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
