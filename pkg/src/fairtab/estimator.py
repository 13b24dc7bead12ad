"""scikit-learn style front end for the adversarial debiaser."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import nn
from .debias import Trainer, TrainingConfig


class AdversarialDebiaser(BaseEstimator, TransformerMixin):
    """Rewrite a numeric table so a protected attribute stops being predictable.

    An autoencoder is trained to reconstruct ``X`` while a pool of adversary
    networks tries to predict the protected attribute ``r`` from the
    reconstruction; the autoencoder is additionally penalized by the pool's
    estimated trained strength. ``transform`` maps data through the best
    (ratchet) autoencoder state seen during training.

    Features are z-scored internally; ``transform`` returns values on the
    original scale.

    Parameters
    ----------
    bias_weight : float, default=1.0
        Weight of the adversary-predictability penalty in the autoencoder
        loss. 0 reduces fitting to a plain autoencoder.
    adversary_steps : int, default=5
        Adversary pool updates per autoencoder update.
    hidden_sizes : tuple of int, optional
        Encoder hidden widths (tanh). Default is a single layer of
        ``ceil(n_features / 2)`` units.
    learning_rate : float, default=1e-3
        Adam step size for the autoencoder.
    adversary_learning_rate : float, default=1e-3
        Adam step size for the adversary pool.
    weight_decay : float, default=1e-4
        L2 penalty on all autoencoder weights.
    contractive_weight : float, default=1e-4
        Penalty on the encoder hidden layer's input Jacobian.
    pool_size : int, default=3
        Number of adversaries kept training against the reconstruction.
    pool_restart_every : int, default=300
        Epochs between staggered cold restarts of pool members, so one
        member is always near fully trained on the current encoding.
    max_epochs : int, default=5000
    patience : int, default=500
        Stop when the best loss has not improved for this many epochs.
    regression : bool, default=False
        Treat ``r`` as continuous and use a regression adversary (MSE
        objective) instead of a classifier.
    random_state : int, default=0
        Seed for all initializations; runs are deterministic given it.

    Attributes
    ----------
    autoencoder_ : NetworkParams
        The ratchet (best-loss) autoencoder state.
    trace_ : list of TraceRecord
        Per-epoch convergence record.
    ratchet_ : RatchetState
        Best loss, its epoch, and the snapshot ``autoencoder_`` came from.
    classes_ : ndarray
        Protected classes seen in ``r`` (classification only).
    n_features_in_ : int

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> r = rng.integers(0, 2, 200)
    >>> X = np.c_[r + rng.normal(0, .1, 200), rng.normal(0, 1, 200)]
    >>> deb = AdversarialDebiaser(max_epochs=200, patience=200).fit(X, r)
    >>> X_fair = deb.transform(X)
    """

    def __init__(
        self,
        bias_weight=1.0,
        adversary_steps=5,
        hidden_sizes=None,
        learning_rate=1e-3,
        adversary_learning_rate=1e-3,
        weight_decay=1e-4,
        contractive_weight=1e-4,
        pool_size=3,
        pool_restart_every=300,
        max_epochs=5000,
        patience=500,
        regression=False,
        random_state=0,
    ):
        self.bias_weight = bias_weight
        self.adversary_steps = adversary_steps
        self.hidden_sizes = hidden_sizes
        self.learning_rate = learning_rate
        self.adversary_learning_rate = adversary_learning_rate
        self.weight_decay = weight_decay
        self.contractive_weight = contractive_weight
        self.pool_size = pool_size
        self.pool_restart_every = pool_restart_every
        self.max_epochs = max_epochs
        self.patience = patience
        self.regression = regression
        self.random_state = random_state

    def _training_config(self):
        return TrainingConfig(
            bias_weight=self.bias_weight,
            adversary_steps=self.adversary_steps,
            autoencoder_lr=self.learning_rate,
            adversary_lr=self.adversary_learning_rate,
            weight_decay=self.weight_decay,
            contractive_weight=self.contractive_weight,
            pool_size=self.pool_size,
            pool_restart_every=self.pool_restart_every,
            max_epochs=self.max_epochs,
            patience=self.patience,
            audit_every=0,
            hidden_sizes=tuple(self.hidden_sizes) if self.hidden_sizes else None,
            seed=self.random_state,
        )

    def fit(self, X, r):
        """Train the debiaser on ``X`` with protected attribute ``r``.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
            Numeric features; the protected column itself must not be in X.
        r : array-like of shape (n_samples,)
            Protected attribute per row: class labels, or continuous values
            when ``regression=True``.

        Returns
        -------
        self
        """
        X, r = check_X_y(X, r, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        self.feature_means_ = X.mean(axis=0)
        scales = X.std(axis=0)
        scales[scales == 0] = 1.0  # constant columns z-score to 0
        self.feature_scales_ = scales
        xz = (X - self.feature_means_) / self.feature_scales_
        if self.regression:
            mode = "regression"
            self.r_mean_ = float(np.mean(r))
            self.r_scale_ = float(np.std(r)) or 1.0
            labels = (np.asarray(r, dtype=np.float64) - self.r_mean_) / self.r_scale_
        else:
            mode = "classification"
            self.classes_, labels = np.unique(r, return_inverse=True)
        trainer = Trainer(xz, labels, mode, self._training_config())
        _, trace, ratchet = trainer.run()
        self.trace_ = trace
        self.ratchet_ = ratchet
        self.autoencoder_ = ratchet.params
        return self

    def transform(self, X):
        """Map ``X`` through the fitted autoencoder.

        Returns the debiased reconstruction on the original feature scale.
        """
        check_is_fitted(self, "autoencoder_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        xz = (X - self.feature_means_) / self.feature_scales_
        yz = nn.forward(self.autoencoder_, xz)
        return yz * self.feature_scales_ + self.feature_means_
