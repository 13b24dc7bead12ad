"""Command line interface: debias, audit, report.

Run settings come from an optional flat ``key = value`` config file; the
command line flags override file keys. Exit codes: 0 success, 1 bad
configuration, 2 unusable data, 3 training failure (partial outputs are
kept with a .partial suffix).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import nn
from ._version import __version__
from .audit import (
    AuditConfig,
    bias_report,
    format_summary,
    full_train_audit,
    read_report,
    write_report,
)
from .data import decode, load_csv, split, write_csv
from .debias import TrainingConfig, config_hash, train
from .errors import AuditError, ConfigError, DataError, TrainingError
from .kvio import format_kv, parse_kv
from .metrics import export_trace, render_convergence_chart

RUN_FILES = (
    "debiased.csv",
    "trace.csv",
    "convergence.svg",
    "audit_pre.txt",
    "audit_post.txt",
    "manifest.txt",
)


@dataclass
class RunConfig:
    input: str = ""
    protected: str = ""
    out: str = ""
    seed: int = 0
    delimiter: str = ","
    validation_fraction: float = 0.2
    bins: int = 4
    regression_adversary: bool = False
    reattach_protected: bool = False
    type_overrides: dict = field(default_factory=dict)
    # training
    bias_weight: float = 1.0
    adversary_steps: int = 5
    autoencoder_lr: float = 1e-3
    adversary_lr: float = 1e-3
    weight_decay: float = 1e-4
    contractive_weight: float = 1e-4
    pool_size: int = 3
    pool_restart_every: int = 300
    max_epochs: int = 5000
    patience: int = 500
    min_improvement: float = 1e-5
    hidden_sizes: tuple | None = None
    optimizer: str = "adam"
    verbose: bool = False
    # periodic in-training audits
    audit_every: int = 500
    periodic_audit_epochs: int = 1000
    periodic_audit_runs: int = 3
    periodic_audit_patience: int | None = None
    # final before/after audits
    audit_epochs: int = 10_000
    audit_runs: int = 3
    audit_patience: int | None = 2000
    audit_lr: float = 1e-3
    verdict_margin: float = 0.05

    def training_config(self):
        return TrainingConfig(
            bias_weight=self.bias_weight,
            adversary_steps=self.adversary_steps,
            autoencoder_lr=self.autoencoder_lr,
            adversary_lr=self.adversary_lr,
            weight_decay=self.weight_decay,
            contractive_weight=self.contractive_weight,
            pool_size=self.pool_size,
            pool_restart_every=self.pool_restart_every,
            max_epochs=self.max_epochs,
            patience=self.patience,
            min_improvement=self.min_improvement,
            audit_every=self.audit_every,
            audit=AuditConfig(
                epochs=self.periodic_audit_epochs,
                runs=self.periodic_audit_runs,
                patience=self.periodic_audit_patience,
                lr=self.audit_lr,
                seed=self.seed,
            ),
            hidden_sizes=self.hidden_sizes,
            optimizer=self.optimizer,
            seed=self.seed,
            verbose=self.verbose,
        )

    def audit_config(self):
        return AuditConfig(
            epochs=self.audit_epochs,
            runs=self.audit_runs,
            patience=self.audit_patience,
            lr=self.audit_lr,
            seed=self.seed,
        )


_BOOL_VALUES = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _parse_bool(key, value):
    try:
        return _BOOL_VALUES[value.strip().lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected true/false, got {value!r}") from None


def _parse_optional_int(key, value):
    if value.strip().lower() in ("none", ""):
        return None
    return _parse_typed(key, value, int)


def _parse_hidden_sizes(key, value):
    if value.strip().lower() in ("none", "auto", ""):
        return None
    try:
        return tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated integers, got {value!r}") from None


def _parse_typed(key, value, caster):
    try:
        return caster(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {caster.__name__}") from None


def apply_config_text(config, text):
    """Apply key = value lines onto a RunConfig; unknown keys are errors."""
    try:
        kv = parse_kv(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    special = {
        "hidden_sizes": _parse_hidden_sizes,
        "audit_patience": _parse_optional_int,
        "periodic_audit_patience": _parse_optional_int,
    }
    by_name = {f.name: f for f in fields(RunConfig)}
    for key, value in kv.items():
        if key.startswith("type."):
            column = key[len("type."):]
            if value not in ("numeric", "categorical"):
                raise ConfigError(f"{key}: expected numeric or categorical, got {value!r}")
            config.type_overrides[column] = value
            continue
        if key in special:
            setattr(config, key, special[key](key, value))
            continue
        f = by_name.get(key)
        if f is None or key == "type_overrides":
            raise ConfigError(f"unknown config key {key!r}")
        if f.type in ("bool", bool):
            setattr(config, key, _parse_bool(key, value))
        elif f.type in ("int", int):
            setattr(config, key, _parse_typed(key, value, int))
        elif f.type in ("float", float):
            setattr(config, key, _parse_typed(key, value, float))
        else:
            setattr(config, key, value)
    return config


def build_run_config(args):
    config = RunConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        apply_config_text(config, path.read_text(encoding="utf-8"))
    if getattr(args, "input", None):
        config.input = args.input
    if getattr(args, "protected", None):
        config.protected = args.protected
    if getattr(args, "out", None):
        config.out = args.out
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "regression_adversary", False):
        config.regression_adversary = True
    if getattr(args, "bins", None) is not None:
        config.bins = args.bins
    if not config.input:
        raise ConfigError("no input file given (flag --input or config key input)")
    if not config.protected:
        raise ConfigError("no protected column given (--protected or config key protected)")
    if not config.out:
        raise ConfigError("no output directory given (--out or config key out)")
    return config


def _manifest_pairs(config, command):
    pairs = [("version", __version__), ("command", command)]
    for f in fields(RunConfig):
        if f.name == "type_overrides":
            for column, kind in sorted(config.type_overrides.items()):
                pairs.append((f"type.{column}", kind))
            continue
        value = getattr(config, f.name)
        if f.name == "hidden_sizes":
            value = "none" if value is None else ",".join(str(v) for v in value)
        elif value is None:
            value = "none"
        pairs.append((f.name, str(value)))
    pairs.append(("training_config_hash", config_hash(config.training_config())))
    return pairs


def write_manifest(config, command, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_kv(_manifest_pairs(config, command)))


def _load_dataset(config):
    if not Path(config.input).exists():
        raise DataError(f"input file not found: {config.input}")
    dataset = load_csv(
        config.input,
        config.protected,
        overrides=config.type_overrides or None,
        delimiter=config.delimiter,
        bins=config.bins,
        regression=config.regression_adversary,
    )
    return split(dataset, config.validation_fraction, config.seed)


def cmd_debias(args):
    config = build_run_config(args)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = _load_dataset(config)
    if args.dry_run:
        write_manifest(config, "debias", out_dir / "manifest.txt")
        print(f"dry run ok: {dataset.n_rows} rows, {dataset.x.shape[1]} encoded columns")
        return 0
    audit_cfg = config.audit_config()
    split_idx = (dataset.train_idx, dataset.val_idx)
    pre = full_train_audit(
        dataset.x, dataset.labels, split_idx, audit_cfg,
        adversary=dataset.mode, mode="pre_debias",
    )
    write_report(pre, out_dir / "audit_pre.txt")
    try:
        output, trace, _ = train(dataset, config.training_config())
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        if exc.trace:
            export_trace(exc.trace, out_dir / "trace.csv.partial")
        if exc.ratchet is not None:
            header, rows = decode(nn.forward(exc.ratchet.params, dataset.x), dataset.schema)
            write_csv(out_dir / "debiased.csv.partial", header, rows)
        write_manifest(config, "debias", out_dir / "manifest.txt")
        return 3
    post = full_train_audit(
        output.y, dataset.labels, split_idx, audit_cfg,
        adversary=dataset.mode, mode="post_debias",
    )
    write_report(post, out_dir / "audit_post.txt")
    if config.reattach_protected:
        header, rows = decode(output.y, dataset.schema, protected_values=dataset.protected_raw)
    else:
        header, rows = output.header, output.rows
    write_csv(out_dir / "debiased.csv", header, rows)
    export_trace(trace, out_dir / "trace.csv")
    render_convergence_chart(trace, out_dir / "convergence.svg")
    write_manifest(config, "debias", out_dir / "manifest.txt")
    summary = bias_report(pre, post, margin=config.verdict_margin)
    print(format_summary(summary))
    return 0


def cmd_audit(args):
    config = build_run_config(args)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = _load_dataset(config)
    report = full_train_audit(
        dataset.x,
        dataset.labels,
        (dataset.train_idx, dataset.val_idx),
        config.audit_config(),
        adversary=dataset.mode,
        mode="pre_debias",
    )
    path = out_dir / "audit.txt"
    write_report(report, path)
    print(f"d_bar = {report.d_bar:.4f}, baseline = {report.baseline:.4f} -> {path}")
    return 0


def cmd_report(args):
    margin = 0.05
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        config = RunConfig()
        apply_config_text(config, path.read_text(encoding="utf-8"))
        margin = config.verdict_margin
    pre = read_report(args.pre)
    post = read_report(args.post)
    print(format_summary(bias_report(pre, post, margin=margin)))
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad usage is a config error -> exit 1
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_run_flags(p):
    p.add_argument("--config", metavar="PATH", help="flat key = value settings file")
    p.add_argument("--input", metavar="PATH", help="input CSV with header row")
    p.add_argument("--protected", metavar="NAME", help="protected column name")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--seed", metavar="N", type=int, help="master random seed")
    p.add_argument(
        "--regression-adversary",
        action="store_true",
        help="treat the protected column as continuous (MSE adversary, R^2 audit)",
    )
    p.add_argument(
        "--bins",
        metavar="N",
        type=int,
        help="quantile bins for a numeric protected column (default 4)",
    )


def make_parser():
    parser = _Parser(prog="fairtab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_debias = sub.add_parser("debias", help="train and write the debiased dataset")
    _add_run_flags(p_debias)
    p_debias.add_argument(
        "--dry-run", action="store_true", help="validate config and schema, write manifest only"
    )

    p_audit = sub.add_parser("audit", help="measure protected-attribute predictability")
    _add_run_flags(p_audit)

    p_report = sub.add_parser("report", help="compare two audit reports")
    p_report.add_argument("pre", help="pre-debias audit report path")
    p_report.add_argument("post", help="post-debias audit report path")
    p_report.add_argument("--config", metavar="PATH", help="settings file (verdict_margin)")
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "debias":
            return cmd_debias(args)
        if args.command == "audit":
            return cmd_audit(args)
        return cmd_report(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except AuditError as exc:
        print(f"audit error: {exc}", file=sys.stderr)
        # for report both pairing and parse problems are caller mistakes
        return 1 if args.command == "report" else 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
