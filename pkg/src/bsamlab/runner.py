"""Experiment execution: training runs, comparisons, probes, slices.

Every emitted byte is a pure function of (config text, seed): floats are
written with repr (shortest round-trip), files use LF endings, and all
randomness flows through named streams.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from . import models, optimizers, probes
from .autodiff import forward_loss
from .config import ExperimentConfig
from .errors import ConfigError, ParseError
from .kernels import python_backend
from .rng import stream
from .tensor import Batch, ParamVector, Segment, Tensor

METRICS_HEADER = ("run_id,seed,epoch,step,lr,rho_min,train_loss,test_loss,"
                  "test_acc,grad_norm,cos_g_gmin,fwd_total,bwd_total")


def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


@dataclass
class RunResult:
    seed: int
    params: ParamVector
    spec: models.ModelSpec
    stats: list                    # StepStats per step
    rows: list                     # metrics rows (already formatted)
    report: probes.SharpnessReport | None
    test_acc: float
    aborted: bool = False


def mlp_accuracy(params: ParamVector, spec: models.ModelSpec, batch: Batch) -> float:
    x = batch.features.as_array()
    acts, _ = python_backend._forward(params.values, spec.layers, x)
    return float(np.mean(np.argmax(acts[-1], axis=1) == batch.labels))


def _build_dataset(cfg: ExperimentConfig, seed: int) -> data_mod.Dataset:
    kind = cfg["data.kind"]
    if kind == "blobs":
        return data_mod.gen_gaussian_blobs(cfg["data.n"], cfg["data.d"],
                                           cfg["model.classes"],
                                           cfg["data.separation"], seed)
    if kind == "csv":
        return data_mod.load_csv_dataset(cfg["data.path"])
    if kind == "idx":
        return data_mod.load_idx(cfg["data.images"], cfg["data.labels"])
    raise ConfigError(f"data.kind {kind!r} has no dataset")


def _init_params(cfg: ExperimentConfig, spec: models.ModelSpec, seed: int) -> ParamVector:
    init = cfg["train.init"]
    if init is not None and spec.kind != models.MLP:
        v = np.asarray(init, dtype=np.float64)
        if v.size != spec.dim:
            raise ConfigError(f"train.init has {v.size} values, landscape dim {spec.dim}")
        return ParamVector(v, models.scalar_layout(spec.dim))
    return models.init_params(spec, seed)


def train_one_seed(cfg: ExperimentConfig, seed: int) -> RunResult:
    spec = cfg.model_spec()
    analytic = spec.kind != models.MLP
    trace = cfg["train.trace"]

    if analytic:
        total_steps = cfg["train.steps"]
        epochs, steps_per_epoch = 1, total_steps
        train_set = test_set = None
        test_batch = None
    else:
        dataset = _build_dataset(cfg, seed)
        tr_idx, te_idx = data_mod.split_indices(dataset.n, cfg["data.test_fraction"], seed)
        train_set, test_set = dataset.subset(tr_idx), dataset.subset(te_idx)
        if cfg["data.noise_rate"] > 0.0:
            noisy = data_mod.inject_symmetric_noise(
                train_set.labels, train_set.classes, cfg["data.noise_rate"], seed)
            train_set = data_mod.Dataset(train_set.features, noisy, train_set.classes,
                                         train_set.provenance, train_set.seed)
        epochs = cfg["train.epochs"]
        steps_per_epoch = math.ceil(train_set.n / cfg["train.batch_size"])
        total_steps = epochs * steps_per_epoch
        test_batch = test_set.as_batch()

    params = _init_params(cfg, spec, seed)
    state = cfg.optimizer_state(params, total_steps)
    noise_rng = stream(seed, "grad-noise")
    grad_noise = cfg["data.grad_noise"]

    rows = []
    all_stats = []
    fwd_total = bwd_total = 0
    aborted = False
    step_no = 0

    for epoch in range(epochs):
        if analytic:
            epoch_batches = [
                models.tilt_batch(noise_rng.standard_normal(spec.dim) * grad_noise)
                if grad_noise > 0.0 else None
                for _ in range(steps_per_epoch)
            ]
        else:
            epoch_batches = data_mod.batches(train_set, cfg["train.batch_size"],
                                             seed * 1_000_003 + epoch)
        epoch_stats = []
        for batch in epoch_batches:
            params, st = optimizers.step(state, params, batch, spec)
            fwd_total += st.fwd
            bwd_total += st.bwd
            step_no += 1
            epoch_stats.append(st)
            all_stats.append(st)
            if not math.isfinite(st.loss) or not np.all(np.isfinite(params.values)):
                rows.append(_row(cfg.run_id, seed, epoch, step_no, st, float("nan"),
                                 float("nan"), fwd_total, bwd_total))
                aborted = True
                break
            if trace:
                rows.append(_row_step(cfg.run_id, seed, epoch, step_no, st,
                                      fwd_total, bwd_total))
        if aborted:
            break
        if not trace:
            if analytic:
                test_loss = test_acc = float("nan")
            else:
                test_loss = forward_loss(params, test_batch, spec)
                test_acc = mlp_accuracy(params, spec, test_batch)
            last = epoch_stats[-1]
            mean_loss = float(np.mean([s.loss for s in epoch_stats]))
            mean_gn = float(np.mean([s.norm_g for s in epoch_stats]))
            cos_vals = [s.cos_g_gmin for s in epoch_stats if s.cos_g_gmin is not None]
            mean_cos = float(np.mean(cos_vals)) if cos_vals else None
            rows.append(",".join([
                cfg.run_id, str(seed), str(epoch), str(step_no),
                _fmt(last.lr_t), _fmt(last.rho_min_t), _fmt(mean_loss),
                _fmt(test_loss), _fmt(test_acc), _fmt(mean_gn), _fmt(mean_cos),
                str(fwd_total), str(bwd_total),
            ]))

    report = None
    test_acc = float("nan")
    if not aborted:
        probe_batch = None
        if not analytic:
            probe_batch = test_set.as_batch(cfg["probe.cap"])
            test_acc = mlp_accuracy(params, spec, probe_batch)
        k = min(cfg["probe.k"], spec.dim)
        report = probes.sharpness_report(params, probe_batch, spec, cfg["probe.rho"],
                                         k=k, iters=cfg["probe.iters"],
                                         tol=cfg["probe.tol"], seed=seed)
    return RunResult(seed, params, spec, all_stats, rows, report, test_acc, aborted)


def _row(run_id, seed, epoch, step_no, st, test_loss, test_acc, fwd_total, bwd_total):
    return ",".join([
        run_id, str(seed), str(epoch), str(step_no), _fmt(st.lr_t),
        _fmt(st.rho_min_t), _fmt(st.loss), _fmt(test_loss), _fmt(test_acc),
        _fmt(st.norm_g), _fmt(st.cos_g_gmin), str(fwd_total), str(bwd_total),
    ])


def _row_step(run_id, seed, epoch, step_no, st, fwd_total, bwd_total):
    return _row(run_id, seed, epoch, step_no, st, float("nan"), float("nan"),
                fwd_total, bwd_total)


# ---------------------------------------------------------------- artifacts

def save_checkpoint(params: ParamVector, spec: models.ModelSpec, path) -> None:
    lines = [f"kind = {spec.kind}"]
    if spec.kind == models.MLP:
        lines.append("layers = " + ",".join(str(s) for s in spec.layers))
        lines.append(f"classes = {spec.classes}")
    elif spec.kind == models.QUADRATIC:
        lines.append("h_diag = " + ",".join(repr(float(v)) for v in np.diag(spec.h)))
        lines.append("w_star = " + ",".join(repr(float(v)) for v in spec.w_star))
    else:
        lines.append(f"a = {spec.a!r}")
        lines.append(f"b = {spec.b!r}")
        lines.append(f"kappa_sharp = {spec.kappa_sharp!r}")
        lines.append(f"kappa_flat = {spec.kappa_flat!r}")
    lines.append("layout = " + ";".join(
        f"{s.name}:{s.offset}:{'x'.join(str(d) for d in s.shape)}" for s in params.layout))
    lines.append("values = " + ",".join(repr(float(v)) for v in params.values))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    kv = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected `key = value`")
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()
    kind = kv["kind"]
    if kind == models.MLP:
        layers = tuple(int(s) for s in kv["layers"].split(","))
        spec = models.mlp_spec(layers, int(kv["classes"]))
    elif kind == models.QUADRATIC:
        spec = models.quadratic_spec(np.diag([float(x) for x in kv["h_diag"].split(",")]),
                                     [float(x) for x in kv["w_star"].split(",")])
    else:
        spec = models.double_well_spec(float(kv["a"]), float(kv["b"]),
                                       float(kv["kappa_sharp"]), float(kv["kappa_flat"]))
    layout = []
    for part in kv["layout"].split(";"):
        name, offset, shape = part.split(":")
        layout.append(Segment(name, int(offset), tuple(int(d) for d in shape.split("x"))))
    values = np.array([float(x) for x in kv["values"].split(",")])
    return ParamVector(values, tuple(layout)), spec


def save_report(report: probes.SharpnessReport, path) -> None:
    lines = [
        f"max_s = {report.max_s!r}",
        f"min_s = {report.min_s!r}",
        f"bil_s = {report.bil_s!r}",
        f"rho_used = {report.rho_used!r}",
        f"degenerate = {str(report.degenerate).lower()}",
        "eigenvalues = " + ",".join(repr(float(v)) for v in report.eigenvalues),
        "eig_residuals = " + ",".join(repr(float(v)) for v in report.eig_residuals),
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_report(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                k, _, v = line.partition("=")
                out[k.strip()] = v.strip()
    return out


def run_training(cfg: ExperimentConfig, out_dir) -> dict:
    """Train every seed; emit metrics CSV, checkpoints and reports."""
    os.makedirs(out_dir, exist_ok=True)
    results = []
    lines = [METRICS_HEADER]
    for seed in cfg["train.seeds"]:
        res = train_one_seed(cfg, seed)
        results.append(res)
        lines.extend(res.rows)
        if res.report is not None:
            save_checkpoint(res.params, res.spec,
                            os.path.join(out_dir, f"checkpoint_seed{seed}.txt"))
            save_report(res.report, os.path.join(out_dir, f"report_seed{seed}.txt"))
    metrics_path = os.path.join(out_dir, "metrics.csv")
    with open(metrics_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return {"metrics": metrics_path, "results": results, "out_dir": out_dir}


def compare(cfgs: list, out_dir) -> str:
    """Run several configs sharing data/model/seeds; aggregate per variant."""
    if len(cfgs) < 2:
        raise ConfigError("compare needs at least 2 configs")
    base = cfgs[0]
    shared = ["train.seeds", "model.kind", "model.layers", "model.classes",
              "data.kind", "data.n", "data.d", "data.separation", "data.noise_rate"]
    for c in cfgs[1:]:
        for key in shared:
            if c[key] != base[key]:
                raise ConfigError(f"compare configs disagree on {key}")
    os.makedirs(out_dir, exist_ok=True)
    rows = ["variant,mean_test_acc,std_test_acc,mean_lambda_max,std_lambda_max"]
    for cfg in cfgs:
        run = run_training(cfg, os.path.join(out_dir, cfg.run_id))
        accs = np.array([r.test_acc for r in run["results"]])
        lmaxs = np.array([r.report.eigenvalues[0] for r in run["results"]
                          if r.report is not None])
        rows.append(",".join([
            cfg["opt.variant"],
            _fmt(float(accs.mean())), _fmt(float(accs.std())),
            _fmt(float(lmaxs.mean())), _fmt(float(lmaxs.std())),
        ]))
    path = os.path.join(out_dir, "comparison.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    return path


def convergence_check(cfg: ExperimentConfig) -> dict:
    """Average squared gradient norm vs horizon T, with lr = coeff / sqrt(T)."""
    if cfg["model.kind"] != models.QUADRATIC:
        raise ConfigError("convergence check requires a quadratic landscape")
    spec = cfg.model_spec()
    seed = cfg["train.seeds"][0]
    coeff = cfg["conv.coeff"]
    horizons = list(cfg["conv.horizons"])
    series = []
    for T in horizons:
        lr = coeff / math.sqrt(T)
        lrs = optimizers.LrSchedule(lr, lr, T)
        state = optimizers.make_state(
            cfg["opt.variant"], _init_params(cfg, spec, seed), lrs,
            cfg.rho_min_schedule(), momentum=cfg["opt.momentum"],
            weight_decay=cfg["opt.weight_decay"], rho_max=cfg["opt.rho_max"],
            p_norm=cfg["opt.p_norm"], zero_grad_eps=cfg["opt.zero_grad_eps"])
        params = _init_params(cfg, spec, seed)
        noise_rng = stream(seed, "grad-noise")
        grad_noise = cfg["data.grad_noise"]
        acc = 0.0
        for _ in range(T):
            batch = None
            if grad_noise > 0.0:
                batch = models.tilt_batch(noise_rng.standard_normal(spec.dim) * grad_noise)
            params, st = optimizers.step(state, params, batch, spec)
            acc += st.norm_g ** 2
        series.append(acc / T)
    slope = float(np.polyfit(np.log(horizons), np.log(series), 1)[0])
    return {"horizons": horizons, "avg_sq_grad_norm": series, "slope": slope}


def emit_slice(cfg: ExperimentConfig, checkpoint_path, out_path) -> str:
    """TSV loss slice around a checkpoint; coordinates in first row/column."""
    params, spec = load_checkpoint(checkpoint_path)
    seed = cfg["train.seeds"][0]
    probe_batch = None
    if spec.kind == models.MLP:
        dataset = _build_dataset(cfg, seed)
        _, te_idx = data_mod.split_indices(dataset.n, cfg["data.test_fraction"], seed)
        probe_batch = dataset.subset(te_idx).as_batch(cfg["probe.cap"])
    d1 = params.like(stream(seed, "slice-d1").standard_normal(len(params)))
    d2 = params.like(stream(seed, "slice-d2").standard_normal(len(params)))
    alphas, betas, grid = probes.loss_slice(params, spec, probe_batch, d1, d2,
                                            cfg["probe.grid"], cfg["probe.extent"])
    lines = ["\t".join([""] + [repr(float(b)) for b in betas])]
    for a, row in zip(alphas, grid):
        lines.append("\t".join([repr(float(a))] + [repr(float(v)) for v in row]))
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return out_path
