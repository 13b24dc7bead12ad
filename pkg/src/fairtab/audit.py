"""Measure how predictable the protected attribute is from a feature matrix.

The yardstick is a freshly trained adversary: a single-hidden-layer network
as wide as the dataset, trained from several random initializations for up
to 10,000 full-batch epochs, scored by its best validation accuracy along
the way. The honest "nothing to find" reference is the majority baseline:
always predicting the most frequent protected class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .data import split_fingerprint
from .errors import AuditError, ConfigError
from .kvio import format_kv, parse_kv


@dataclass
class AuditConfig:
    epochs: int = 10_000
    runs: int = 3  # random initializations; best run wins
    patience: int | None = 2000  # early exit; None trains the full budget
    lr: float = 1e-3
    seed: int = 0
    hidden_width: int | None = None  # None -> same width as the dataset

    def validate(self):
        if self.epochs < 1 or self.runs < 1:
            raise ConfigError("audit epochs and runs must be >= 1")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("audit patience must be >= 1 or None")
        if self.lr <= 0:
            raise ConfigError("audit lr must be > 0")


@dataclass
class AuditRun:
    seed: int
    best_epoch: int
    best_score: float
    stopped_epoch: int  # last epoch actually trained (early exit or budget)


@dataclass
class AuditReport:
    d_bar: float  # best validation accuracy over all runs (R^2 in regression)
    baseline: float  # majority-class validation accuracy (0 in regression)
    runs: list[AuditRun]
    fingerprint: str  # identifies labels + split, not feature values
    mode: str  # pre_debias | post_debias | during_training
    adversary: str = "classification"
    n_train: int = 0
    n_validation: int = 0
    epochs: int = 0
    patience: int | None = None
    baseline_ci: tuple = (0.0, 0.0)  # binomial 95% interval around baseline


def accuracy(probs, labels):
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def r_squared(preds, values):
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    sst = float(np.var(values)) * values.size
    if sst == 0:
        raise AuditError("protected values constant in validation split")
    sse = float(np.sum((preds - values) ** 2))
    return 1.0 - sse / sst


def majority_baseline(labels, split):
    """Frequency of the train-set modal class within the validation set."""
    train_idx, val_idx = split
    labels = np.asarray(labels).astype(int)
    if len(val_idx) == 0:
        raise AuditError("validation split is empty")
    counts = np.bincount(labels[train_idx])
    mode = int(np.argmax(counts))  # ties break to the lowest class index
    return float(np.mean(labels[val_idx] == mode))


def _audit_single_run(features, targets, labels, split, config, adversary, run_index):
    train_idx, val_idx = split
    d = features.shape[1]
    hidden = config.hidden_width or d
    out_width = targets.shape[1]
    out_act = "softmax" if adversary == "classification" else "identity"
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2, run_index]))
    params = nn.init_params([d, hidden, out_width], ["relu", out_act], rng)
    opt = nn.init_optimizer(params, "adam", config.lr)
    x_tr = features[train_idx]
    t_tr = targets[train_idx]
    x_val = features[val_idx]
    best = -np.inf
    best_epoch = -1
    epoch = -1
    for epoch in range(config.epochs):
        preds, cache = nn.forward_cache(params, x_tr)
        if adversary == "classification":
            grad = nn.cross_entropy_gradient(preds, t_tr)
        else:
            grad = nn.mse_gradient(preds, t_tr)
        grads = nn.backward(params, x_tr, grad, cache)
        params, opt = nn.optimizer_step(params, grads, opt)
        val_out = nn.forward(params, x_val)
        if adversary == "classification":
            score = accuracy(val_out, labels[val_idx])
        else:
            score = r_squared(val_out, labels[val_idx])
        if score > best:
            best = score
            best_epoch = epoch
        if config.patience is not None and epoch - best_epoch >= config.patience:
            break
    return AuditRun(
        seed=run_index, best_epoch=best_epoch, best_score=float(best), stopped_epoch=epoch
    )


def full_train_audit(features, labels, split, config, adversary="classification", mode="pre_debias"):
    """Train fresh adversaries to exhaustion and report the strongest one.

    ``features`` may be the original encoding or a debiased reconstruction;
    ``split`` is (train_idx, val_idx). The returned d_bar is the maximum
    best-epoch validation score across runs.
    """
    config.validate()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    train_idx, val_idx = split
    train_idx = np.asarray(train_idx)
    val_idx = np.asarray(val_idx)
    if val_idx.size == 0:
        raise AuditError("validation split is empty")
    if adversary == "classification":
        labels = labels.astype(int)
        if np.unique(labels[val_idx]).size < 2:
            raise AuditError("only one protected class in the validation split")
        n_classes = int(labels.max()) + 1
        targets = nn.one_hot(labels, n_classes)
        baseline = majority_baseline(labels, split)
        half = float(1.96 * np.sqrt(max(baseline * (1 - baseline), 0.0) / val_idx.size))
        ci = (max(0.0, baseline - half), min(1.0, baseline + half))
    elif adversary == "regression":
        labels = labels.astype(np.float64)
        if np.var(labels[val_idx]) == 0:
            raise AuditError("protected values constant in the validation split")
        targets = labels.reshape(-1, 1)
        baseline = 0.0  # R^2 of always predicting the mean
        ci = (0.0, 0.0)
    else:
        raise ConfigError(f"unknown adversary kind {adversary!r}")
    runs = [
        _audit_single_run(features, targets, labels, (train_idx, val_idx), config, adversary, i)
        for i in range(config.runs)
    ]
    d_bar = max(r.best_score for r in runs)
    if adversary == "regression":
        d_bar = min(1.0, max(0.0, d_bar))
    return AuditReport(
        d_bar=float(d_bar),
        baseline=baseline,
        runs=runs,
        fingerprint=split_fingerprint(features.shape[0], features.shape[1], labels, split),
        mode=mode,
        adversary=adversary,
        n_train=int(train_idx.size),
        n_validation=int(val_idx.size),
        epochs=config.epochs,
        patience=config.patience,
        baseline_ci=ci,
    )


@dataclass
class BiasSummary:
    verdict: str  # "debiased" | "not_debiased"
    d_bar_pre: float
    d_bar_post: float
    baseline: float
    gap_pre: float
    gap_post: float
    margin: float
    below_baseline: bool
    fingerprint: str
    metric: str = "accuracy"  # "R^2" for a regression adversary


def bias_report(pre: AuditReport, post: AuditReport, margin=0.05):
    """Compare before/after audits of the same dataset and split."""
    if pre.fingerprint != post.fingerprint:
        raise AuditError(
            f"reports do not match: fingerprints {pre.fingerprint} vs {post.fingerprint}"
        )
    if abs(pre.baseline - post.baseline) > 1e-9:
        raise AuditError("reports do not match: baselines differ")
    gap_post = post.d_bar - post.baseline
    return BiasSummary(
        verdict="debiased" if gap_post <= margin else "not_debiased",
        d_bar_pre=pre.d_bar,
        d_bar_post=post.d_bar,
        baseline=post.baseline,
        gap_pre=pre.d_bar - pre.baseline,
        gap_post=gap_post,
        margin=margin,
        below_baseline=gap_post < 0,
        fingerprint=post.fingerprint,
        metric="R^2" if post.adversary == "regression" else "accuracy",
    )


def format_summary(summary: BiasSummary):
    name = f"adversary {summary.metric}"
    lines = [
        f"{name} before: {summary.d_bar_pre:.4f} "
        f"(baseline + {summary.gap_pre:.4f})",
        f"{name} after:  {summary.d_bar_post:.4f} "
        f"(baseline {'+' if summary.gap_post >= 0 else '-'} {abs(summary.gap_post):.4f})",
        f"baseline:          {summary.baseline:.4f}",
        f"margin:            {summary.margin:.4f}",
        f"verdict: {summary.verdict}",
    ]
    if summary.below_baseline:
        lines.append(
            "warning: adversary ended below the baseline; below-chance "
            "performance can itself leak information"
        )
    return "\n".join(lines)


def write_report(report: AuditReport, path):
    pairs = [
        ("mode", report.mode),
        ("adversary", report.adversary),
        ("fingerprint", report.fingerprint),
        ("n_train", str(report.n_train)),
        ("n_validation", str(report.n_validation)),
        ("epochs", str(report.epochs)),
        ("patience", "none" if report.patience is None else str(report.patience)),
        ("runs", str(len(report.runs))),
        ("d_bar", repr(float(report.d_bar))),
        ("baseline", repr(float(report.baseline))),
        ("baseline_ci_low", repr(float(report.baseline_ci[0]))),
        ("baseline_ci_high", repr(float(report.baseline_ci[1]))),
    ]
    for i, run in enumerate(report.runs):
        pairs.append((f"run_{i}_seed", str(run.seed)))
        pairs.append((f"run_{i}_best_epoch", str(run.best_epoch)))
        pairs.append((f"run_{i}_best_score", repr(float(run.best_score))))
        pairs.append((f"run_{i}_stopped_epoch", str(run.stopped_epoch)))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_kv(pairs))


def read_report(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            kv = parse_kv(fh.read())
    except (OSError, ValueError) as exc:
        raise AuditError(f"cannot parse audit report {path}: {exc}") from exc
    try:
        n_runs = int(kv["runs"])
        patience = None if kv["patience"] == "none" else int(kv["patience"])
        runs = [
            AuditRun(
                seed=int(kv[f"run_{i}_seed"]),
                best_epoch=int(kv[f"run_{i}_best_epoch"]),
                best_score=float(kv[f"run_{i}_best_score"]),
                stopped_epoch=int(kv[f"run_{i}_stopped_epoch"]),
            )
            for i in range(n_runs)
        ]
        return AuditReport(
            d_bar=float(kv["d_bar"]),
            baseline=float(kv["baseline"]),
            runs=runs,
            fingerprint=kv["fingerprint"],
            mode=kv["mode"],
            adversary=kv["adversary"],
            n_train=int(kv["n_train"]),
            n_validation=int(kv["n_validation"]),
            epochs=int(kv["epochs"]),
            patience=patience,
            baseline_ci=(float(kv["baseline_ci_low"]), float(kv["baseline_ci_high"])),
        )
    except (KeyError, ValueError) as exc:
        raise AuditError(f"audit report {path} is malformed: {exc}") from exc
