"""Adversarial debiasing loop.

An autoencoder reconstructs the feature matrix while a pool of adversary
networks keeps trying to predict the protected attribute from the
reconstruction. The autoencoder minimizes

    reconstruction MSE + bias_weight * predictability penalty + regularizers

where the penalty estimates how well a *trained* adversary would do: pool
members are cold-restarted on a staggered schedule so one member is always
near-converged on the current encoding, and the autoencoder receives the
negated adversary-loss gradient through the reconstruction (gradient
reversal). A ratchet keeps the autoencoder state with the smallest loss
ever seen, so late-run instability cannot spoil the returned data.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import nn
from ._version import __version__
from .audit import AuditConfig, full_train_audit, majority_baseline
from .data import Dataset, DebiasedOutput, decode
from .errors import ConfigError, InputError, ShapeError, TrainingError


@dataclass
class TrainingConfig:
    """All knobs of the adversarial loop. Defaults suit small tabular data."""

    bias_weight: float = 1.0  # weight of the predictability penalty
    adversary_steps: int = 5  # adversary updates per autoencoder update
    autoencoder_lr: float = 1e-3
    adversary_lr: float = 1e-3
    weight_decay: float = 1e-4
    contractive_weight: float = 1e-4
    pool_size: int = 3
    pool_restart_every: int = 300  # epochs between cold restarts of a member
    max_epochs: int = 5000
    patience: int = 500  # epochs without ratchet improvement before stopping
    min_improvement: float = 1e-5  # relative improvement that resets patience
    audit_every: int = 500  # 0 disables periodic trainability audits
    audit: AuditConfig | None = None  # budget for periodic audits
    hidden_sizes: tuple | None = None  # encoder widths; None -> (ceil(d/2),)
    optimizer: str = "adam"
    seed: int = 0
    verbose: bool = False

    def validate(self):
        if self.bias_weight < 0:
            raise ConfigError("bias_weight must be >= 0")
        if self.adversary_steps < 1:
            raise ConfigError("adversary_steps must be >= 1")
        if self.pool_size < 1:
            raise ConfigError("pool_size must be >= 1")
        if self.pool_restart_every < 1:
            raise ConfigError("pool_restart_every must be >= 1")
        for name in ("autoencoder_lr", "adversary_lr", "weight_decay", "contractive_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.hidden_sizes is not None and (
            not self.hidden_sizes or any(int(h) < 1 for h in self.hidden_sizes)
        ):
            raise ConfigError("hidden_sizes must be positive")


def config_hash(config):
    h = hashlib.sha256()
    for f in fields(config):
        h.update(f"{f.name}={getattr(config, f.name)!r};".encode())
    return h.hexdigest()[:16]


@dataclass
class TraceRecord:
    """One epoch of the convergence record (column names match the CSV)."""

    epoch: int
    mse: float
    d_current: float  # mean adversary loss after its own updates
    d_hat: float  # trainability penalty the autoencoder saw this epoch
    l_a: float  # full autoencoder loss at end of epoch
    ratchet_best: float
    d_bar: float | None  # periodic audit result, only at audit epochs
    baseline: float


@dataclass
class RatchetState:
    """Best autoencoder state seen so far; never rolls backward."""

    best_loss: float
    params: nn.NetworkParams
    epoch: int


def _rng(*key):
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def adversary_loss(predictions, targets, mode="classification"):
    """Adversary objective: cross-entropy for classes, MSE for a regressor."""
    if mode == "classification":
        return nn.cross_entropy(predictions, targets)
    if mode == "regression":
        return nn.mse(predictions, targets)
    raise ConfigError(f"unknown adversary mode {mode!r}")


def _adversary_loss_gradient(predictions, targets, mode):
    if mode == "classification":
        return nn.cross_entropy_gradient(predictions, targets)
    return nn.mse_gradient(predictions, targets)


def chance_loss(targets, mode="classification"):
    """Loss of an uninformed adversary: ln C, or target variance."""
    if mode == "classification":
        return float(np.log(targets.shape[1]))
    return float(np.var(np.asarray(targets)))


def predictability_penalty(y, targets, pool, mode="classification"):
    """Estimate of trained-adversary strength, clamped at chance level.

    Mean adversary loss across the pool, mapped so a chance-level adversary
    contributes 0 and a perfect one contributes the full chance loss. The
    clamp means the autoencoder is never rewarded for pushing the adversary
    *below* chance, which would itself leak information.
    """
    if not pool:
        raise ConfigError("adversary pool is empty")
    losses = [adversary_loss(nn.forward(p, y), targets, mode) for p in pool]
    return max(0.0, chance_loss(targets, mode) - float(np.mean(losses)))


def _jacobian_sq_terms(z, a, activation):
    """Squared activation slope g = a'(z)^2 and its derivative dg/dz."""
    if activation == "identity":
        return np.ones_like(z), np.zeros_like(z)
    if activation == "relu":
        return (z > 0).astype(np.float64), np.zeros_like(z)
    if activation == "tanh":
        ap = 1.0 - a * a
        g = ap * ap
        return g, -4.0 * a * g
    if activation == "sigmoid":
        ap = a * (1.0 - a)
        g = ap * ap
        return g, 2.0 * g * (1.0 - 2.0 * a)
    raise ConfigError(f"contractive penalty unsupported for {activation!r} layer")


def _regularizer_terms(params, x, config):
    """Value and exact parameter gradients of the regularizers.

    weight_decay * sum ||W||^2 over all layers, plus contractive_weight
    times the squared Frobenius norm of the first hidden layer's Jacobian
    with respect to the input (averaged over rows).
    """
    wd = config.weight_decay
    cw = config.contractive_weight
    value = 0.0
    wgrads = [np.zeros_like(l.weights) for l in params.layers]
    bgrads = [np.zeros_like(l.bias) for l in params.layers]
    if wd > 0:
        for i, layer in enumerate(params.layers):
            value += wd * float(np.sum(layer.weights**2))
            wgrads[i] += 2.0 * wd * layer.weights
    if cw > 0:
        first = params.layers[0]
        z = x @ first.weights.T + first.bias
        a = nn._activate(z, first.activation)
        g, gp = _jacobian_sq_terms(z, a, first.activation)
        n = x.shape[0]
        s = np.sum(first.weights**2, axis=1)  # per-unit squared row norm
        value += cw * float((g @ s).sum() / n)
        wgrads[0] += cw * (
            (2.0 / n) * g.sum(axis=0)[:, None] * first.weights
            + (1.0 / n) * (gp.T @ x) * s[:, None]
        )
        bgrads[0] += cw * (1.0 / n) * gp.sum(axis=0) * s
    return value, wgrads, bgrads


def regularizers(params, x, config):
    """Regularizer value alone (see _regularizer_terms for the pieces)."""
    value, _, _ = _regularizer_terms(params, x, config)
    return value


def autoencoder_loss(x, y, pool_predictions, targets, config, params, mode="classification"):
    """Full autoencoder objective and its components.

    Returns (total, {"mse", "dhat", "reg"}) where total is exactly the sum
    mse + bias_weight * dhat + reg. ``pool_predictions`` are the adversary
    pool's outputs on y; their weights are constants here, the gradient
    path flows only through y.
    """
    if not pool_predictions:
        raise ConfigError("adversary pool produced no predictions")
    mse_value = nn.mse(y, x)
    losses = [adversary_loss(p, targets, mode) for p in pool_predictions]
    dhat = max(0.0, chance_loss(targets, mode) - float(np.mean(losses)))
    reg = regularizers(params, x, config)
    total = mse_value + config.bias_weight * dhat + reg
    if not math.isfinite(total):
        raise TrainingError(
            f"non-finite loss components mse={mse_value} dhat={dhat} reg={reg}"
        )
    return total, {"mse": mse_value, "dhat": dhat, "reg": reg}


def stopping_criterion(trace, config):
    """True when max_epochs is hit or the ratchet stalled for `patience` epochs."""
    if not trace:
        raise InputError("empty trace")
    if trace[-1].epoch + 1 >= config.max_epochs:
        return True
    streak = 0
    for i in range(len(trace) - 1, 0, -1):
        prev = trace[i - 1].ratchet_best
        cur = trace[i].ratchet_best
        if (prev - cur) / max(abs(prev), 1e-12) > config.min_improvement:
            break
        streak += 1
        if streak >= config.patience:
            return True
    return streak >= config.patience


@dataclass
class _PoolMember:
    params: nn.NetworkParams
    opt: nn.OptimizerState
    restarts: int = 0


class Trainer:
    """Stateful driver of the alternating minimax loop.

    Works on an already-encoded feature matrix. One epoch is: one
    autoencoder update, a fresh reconstruction, then `adversary_steps`
    updates of every pool member on that reconstruction.
    """

    def __init__(self, x, labels, mode, config, train_idx=None, val_idx=None):
        config.validate()
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise ShapeError("feature matrix must be 2-D with at least 2 rows")
        if not np.all(np.isfinite(x)):
            raise InputError("feature matrix contains non-finite values")
        labels = np.asarray(labels)
        if labels.shape != (x.shape[0],):
            raise ShapeError("labels must be one value per row")
        if mode not in ("classification", "regression"):
            raise ConfigError(f"unknown mode {mode!r}")
        self.x = x
        self.mode = mode
        self.labels = labels
        self.config = config
        self.train_idx = np.asarray(train_idx) if train_idx is not None else np.arange(x.shape[0])
        self.val_idx = np.asarray(val_idx) if val_idx is not None else np.arange(0)

        d = x.shape[1]
        if mode == "classification":
            n_classes = int(labels.max()) + 1
            if n_classes < 2:
                raise ConfigError("need at least 2 protected classes")
            self.targets = nn.one_hot(labels.astype(int), n_classes)
            self._adv_sizes = [d, d, n_classes]
            self._adv_acts = ["relu", "softmax"]
        else:
            self.targets = labels.astype(np.float64).reshape(-1, 1)
            self._adv_sizes = [d, d, 1]
            self._adv_acts = ["relu", "identity"]
        self.chance = chance_loss(self.targets, mode)

        hidden = config.hidden_sizes or (math.ceil(d / 2),)
        sizes = [d, *[int(h) for h in hidden], d]
        acts = ["tanh"] * len(hidden) + ["identity"]
        self.autoencoder = nn.init_params(sizes, acts, _rng(config.seed, 0))
        self._ae_lr = config.autoencoder_lr
        self._adv_lr = config.adversary_lr
        self.ae_opt = nn.init_optimizer(self.autoencoder, config.optimizer, self._ae_lr)
        self.pool = [self._new_member(j, 0) for j in range(config.pool_size)]

        self.ratchet = RatchetState(math.inf, self.autoencoder.copy(), -1)
        self.trace: list[TraceRecord] = []
        self.epoch_index = 0
        self._recoveries = 0
        self.baseline = self._baseline()
        self._audit_cfg = config.audit or AuditConfig(epochs=1000, runs=3, patience=None)

    def _baseline(self):
        if self.mode == "regression":
            return 0.0
        if self.val_idx.size:
            return majority_baseline(self.labels, (self.train_idx, self.val_idx))
        counts = np.bincount(self.labels.astype(int))
        return float(counts.max() / self.labels.size)

    def _new_member(self, j, restarts):
        params = nn.init_params(
            self._adv_sizes, self._adv_acts, _rng(self.config.seed, 1, j, restarts)
        )
        opt = nn.init_optimizer(params, "adam", self._adv_lr)
        return _PoolMember(params, opt, restarts)

    def set_learning_rates(self, autoencoder_lr=None, adversary_lr=None):
        if autoencoder_lr is not None:
            self._ae_lr = float(autoencoder_lr)
            self.ae_opt.lr = self._ae_lr
        if adversary_lr is not None:
            self._adv_lr = float(adversary_lr)
            for member in self.pool:
                member.opt.lr = self._adv_lr

    def autoencoder_turn(self):
        """One update of the autoencoder against the frozen pool.

        Returns the predictability penalty that entered the loss.
        """
        cfg = self.config
        y, cache = nn.forward_cache(self.autoencoder, self.x)
        grad_y = nn.mse_gradient(y, self.x)
        losses = []
        member_caches = []
        for member in self.pool:
            probs, mcache = nn.forward_cache(member.params, y)
            losses.append(adversary_loss(probs, self.targets, self.mode))
            member_caches.append((probs, mcache))
        penalty = max(0.0, self.chance - float(np.mean(losses)))
        if cfg.bias_weight > 0 and penalty > 0:
            scale = cfg.bias_weight / len(self.pool)
            for member, (probs, mcache) in zip(self.pool, member_caches):
                gp = _adversary_loss_gradient(probs, self.targets, self.mode)
                gin = nn.backward(member.params, y, gp, mcache).input_grad
                grad_y -= scale * gin  # reversed: ascend the adversary loss
        grads = nn.backward(self.autoencoder, self.x, grad_y, cache)
        _, reg_w, reg_b = _regularizer_terms(self.autoencoder, self.x, cfg)
        for i in range(len(grads.weight_grads)):
            grads.weight_grads[i] = grads.weight_grads[i] + reg_w[i]
            grads.bias_grads[i] = grads.bias_grads[i] + reg_b[i]
        self.autoencoder, self.ae_opt = nn.optimizer_step(self.autoencoder, grads, self.ae_opt)
        return penalty

    def adversary_turn(self, y, epoch=None):
        """Restart members on schedule, then train each for k steps on y."""
        cfg = self.config
        period = cfg.pool_restart_every
        for j, member in enumerate(self.pool):
            if epoch is not None and epoch > 0:
                offset = j * period // cfg.pool_size
                if (epoch - offset) % period == 0:
                    self.pool[j] = member = self._new_member(j, member.restarts + 1)
            for _ in range(cfg.adversary_steps):
                preds, mcache = nn.forward_cache(member.params, y)
                gp = _adversary_loss_gradient(preds, self.targets, self.mode)
                grads = nn.backward(member.params, y, gp, mcache)
                member.params, member.opt = nn.optimizer_step(member.params, grads, member.opt)

    def epoch(self):
        e = self.epoch_index
        d_hat = self.autoencoder_turn()
        y = nn.forward(self.autoencoder, self.x)
        self.adversary_turn(y, epoch=e)

        pool_preds = [nn.forward(m.params, y) for m in self.pool]
        l_a, parts = autoencoder_loss(
            self.x, y, pool_preds, self.targets, self.config, self.autoencoder, self.mode
        )
        d_current = float(
            np.mean([adversary_loss(p, self.targets, self.mode) for p in pool_preds])
        )
        if not (math.isfinite(l_a) and self.autoencoder.is_finite()):
            raise TrainingError(f"non-finite state at epoch {e}")
        if l_a < self.ratchet.best_loss:
            self.ratchet = RatchetState(l_a, self.autoencoder.copy(), e)

        d_bar = None
        cfg = self.config
        if cfg.audit_every > 0 and (e + 1) % cfg.audit_every == 0 and self.val_idx.size:
            report = full_train_audit(
                y,
                self.labels,
                (self.train_idx, self.val_idx),
                self._audit_cfg,
                adversary=self.mode,
                mode="during_training",
            )
            d_bar = report.d_bar

        record = TraceRecord(
            epoch=e,
            mse=parts["mse"],
            d_current=d_current,
            d_hat=d_hat,
            l_a=l_a,
            ratchet_best=self.ratchet.best_loss,
            d_bar=d_bar,
            baseline=self.baseline,
        )
        self.trace.append(record)
        if cfg.verbose and e % max(1, cfg.max_epochs // 20) == 0:
            print(
                f"epoch {e}: mse={parts['mse']:.4f} d_hat={d_hat:.4f} "
                f"l_a={l_a:.4f} best={self.ratchet.best_loss:.4f}"
            )
        self.epoch_index += 1
        return record

    def _recover(self, exc):
        self._recoveries += 1
        if self._recoveries > 3:
            raise TrainingError(
                f"training diverged after 3 recovery attempts: {exc}",
                ratchet=self.ratchet if self.ratchet.epoch >= 0 else None,
                trace=self.trace,
            )
        warnings.warn(f"recovering from divergence at epoch {self.epoch_index}: {exc}")
        if self.ratchet.epoch >= 0:
            self.autoencoder = self.ratchet.params.copy()
        else:
            self.autoencoder = nn.init_params(
                [l.weights.shape[1] for l in self.autoencoder.layers]
                + [self.autoencoder.output_width],
                [l.activation for l in self.autoencoder.layers],
                _rng(self.config.seed, 0, self._recoveries),
            )
        self.set_learning_rates(self._ae_lr / 2.0, self._adv_lr / 2.0)
        self.ae_opt = nn.init_optimizer(self.autoencoder, self.config.optimizer, self._ae_lr)
        for j, member in enumerate(self.pool):
            if not member.params.is_finite():
                self.pool[j] = self._new_member(j, member.restarts + 1)
            else:
                member.opt = nn.init_optimizer(member.params, "adam", self._adv_lr)
        self.epoch_index += 1  # the failed epoch leaves no trace record

    def run(self, epoch_hook=None):
        """Loop until the stopping criterion fires; returns (y, trace, ratchet).

        y is decoded from the ratchet snapshot, never the final state.
        """
        while self.epoch_index < self.config.max_epochs:
            if epoch_hook is not None:
                epoch_hook(self.epoch_index, self)
            try:
                # overflow during a divergent epoch is detected and handled,
                # no need for numpy to warn about it
                with np.errstate(over="ignore", invalid="ignore"):
                    self.epoch()
            except TrainingError as exc:
                self._recover(exc)
                continue
            if stopping_criterion(self.trace, self.config):
                break
        if self.ratchet.epoch < 0:
            raise TrainingError("no epoch completed with finite loss", trace=self.trace)
        if self.ratchet.epoch == 0 and len(self.trace) > 1:
            warnings.warn("ratchet never improved past the first epoch")
        y_best = nn.forward(self.ratchet.params, self.x)
        return y_best, self.trace, self.ratchet


def train(dataset: Dataset, config: TrainingConfig, epoch_hook=None):
    """Run the full loop on a Dataset; returns (DebiasedOutput, trace, ratchet)."""
    trainer = Trainer(
        dataset.x,
        dataset.labels,
        dataset.mode,
        config,
        train_idx=dataset.train_idx,
        val_idx=dataset.val_idx,
    )
    y, trace, ratchet = trainer.run(epoch_hook)
    header, rows = decode(y, dataset.schema)
    output = DebiasedOutput(
        y=y,
        header=header,
        rows=rows,
        provenance={
            "config_hash": config_hash(config),
            "seed": config.seed,
            "version": __version__,
        },
    )
    return output, trace, ratchet
