"""fairtab: make a protected attribute unpredictable from a tabular dataset.

An autoencoder is trained against a pool of adversary networks so the
reconstructed table differs minimally from the original while the protected
attribute can no longer be predicted from it. Ships the training loop, a
scikit-learn style transformer, an adversarial predictability audit, and a
CLI (``fairtab debias | audit | report``).
"""

from ._version import __version__
from .audit import (
    AuditConfig,
    AuditReport,
    bias_report,
    format_summary,
    full_train_audit,
    majority_baseline,
    read_report,
    write_report,
)
from .data import Dataset, DebiasedOutput, Schema, decode, encode, load_csv, split
from .debias import (
    RatchetState,
    TraceRecord,
    TrainingConfig,
    adversary_loss,
    autoencoder_loss,
    predictability_penalty,
    regularizers,
    stopping_criterion,
    train,
    Trainer,
)
from .datasets import make_planted_copy
from .estimator import AdversarialDebiaser
from .metrics import export_trace, read_trace, render_convergence_chart

__all__ = [
    "__version__",
    "AdversarialDebiaser",
    "AuditConfig",
    "AuditReport",
    "Dataset",
    "DebiasedOutput",
    "RatchetState",
    "Schema",
    "TraceRecord",
    "Trainer",
    "TrainingConfig",
    "adversary_loss",
    "autoencoder_loss",
    "bias_report",
    "decode",
    "encode",
    "export_trace",
    "format_summary",
    "full_train_audit",
    "load_csv",
    "majority_baseline",
    "make_planted_copy",
    "predictability_penalty",
    "read_report",
    "read_trace",
    "regularizers",
    "render_convergence_chart",
    "split",
    "stopping_criterion",
    "train",
    "write_report",
]
