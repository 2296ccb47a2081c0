"""Command-line entry point.

Subcommands: train, compare, probe, slice, convergence, gen-data.
Every subcommand takes --config <path> and --out <dir>; the default output
directory can also be set via the BSAMLAB_OUT environment variable.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data as data_mod
from . import models, probes, runner
from .config import load_config
from .errors import BsamlabError


def _add_common(sub):
    sub.add_argument("--config", required=True, help="experiment config path")
    sub.add_argument("--out", default=os.environ.get("BSAMLAB_OUT", "out"),
                     help="output directory (default: $BSAMLAB_OUT or ./out)")


def _cmd_train(args):
    cfg = load_config(args.config)
    run = runner.run_training(cfg, args.out)
    print(f"wrote {run['metrics']}")
    for res in run["results"]:
        status = "aborted (non-finite loss)" if res.aborted else f"test_acc={res.test_acc}"
        print(f"seed {res.seed}: {status}")


def _cmd_compare(args):
    cfgs = [load_config(p) for p in [args.config] + args.extra_configs]
    path = runner.compare(cfgs, args.out)
    print(f"wrote {path}")
    with open(path) as fh:
        print(fh.read(), end="")


def _cmd_probe(args):
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    if cfg["probe.checkpoint"]:
        params, spec = runner.load_checkpoint(cfg["probe.checkpoint"])
    else:
        spec = cfg.model_spec()
        params = runner._init_params(cfg, spec, cfg["train.seeds"][0])
    probe_batch = None
    if spec.kind == models.MLP:
        seed = cfg["train.seeds"][0]
        dataset = runner._build_dataset(cfg, seed)
        _, te_idx = data_mod.split_indices(dataset.n, cfg["data.test_fraction"], seed)
        probe_batch = dataset.subset(te_idx).as_batch(cfg["probe.cap"])
    report = probes.sharpness_report(
        params, probe_batch, spec, cfg["probe.rho"],
        k=min(cfg["probe.k"], spec.dim), iters=cfg["probe.iters"],
        tol=cfg["probe.tol"], seed=cfg["train.seeds"][0])
    path = os.path.join(args.out, "report.txt")
    runner.save_report(report, path)
    print(f"wrote {path}")
    with open(path) as fh:
        print(fh.read(), end="")


def _cmd_slice(args):
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    ckpt = args.checkpoint or cfg["probe.checkpoint"]
    if not ckpt:
        raise BsamlabError("slice needs --checkpoint or probe.checkpoint in the config")
    path = runner.emit_slice(cfg, ckpt, os.path.join(args.out, "slice.tsv"))
    print(f"wrote {path}")


def _cmd_convergence(args):
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    res = runner.convergence_check(cfg)
    path = os.path.join(args.out, "convergence.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("T,avg_sq_grad_norm\n")
        for t, a in zip(res["horizons"], res["avg_sq_grad_norm"]):
            fh.write(f"{t},{a!r}\n")
        fh.write(f"# slope = {res['slope']!r}\n")
    print(f"slope = {res['slope']}")
    print(f"wrote {path}")


def _cmd_gen_data(args):
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    seed = cfg["train.seeds"][0]
    dataset = data_mod.gen_gaussian_blobs(cfg["data.n"], cfg["data.d"],
                                          cfg["model.classes"],
                                          cfg["data.separation"], seed)
    if cfg["data.noise_rate"] > 0.0:
        noisy = data_mod.inject_symmetric_noise(dataset.labels, dataset.classes,
                                                cfg["data.noise_rate"], seed)
        dataset = data_mod.Dataset(dataset.features, noisy, dataset.classes,
                                   dataset.provenance, dataset.seed)
    path = os.path.join(args.out, "dataset.csv")
    data_mod.save_csv_dataset(dataset, path)
    print(f"wrote {path} ({dataset.n} rows, {dataset.d} features, "
          f"{dataset.classes} classes)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bsamlab",
                                     description="Bilateral sharpness-aware optimization lab")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("train", help="train all seeds, emit metrics/checkpoints/reports")
    _add_common(p)
    p.set_defaults(fn=_cmd_train)

    p = subs.add_parser("compare", help="run several configs, aggregate accuracy/sharpness")
    _add_common(p)
    p.add_argument("extra_configs", nargs="+", help="additional config paths")
    p.set_defaults(fn=_cmd_compare)

    p = subs.add_parser("probe", help="sharpness report at a checkpoint or fresh init")
    _add_common(p)
    p.set_defaults(fn=_cmd_probe)

    p = subs.add_parser("slice", help="emit a 2-D loss slice TSV around a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(fn=_cmd_slice)

    p = subs.add_parser("convergence", help="gradient-norm decay vs horizon on a quadratic")
    _add_common(p)
    p.set_defaults(fn=_cmd_convergence)

    p = subs.add_parser("gen-data", help="generate a blob dataset CSV")
    _add_common(p)
    p.set_defaults(fn=_cmd_gen_data)

    args = parser.parse_args(argv)
    try:
        args.fn(args)
    except BsamlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
