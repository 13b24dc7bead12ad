"""Synthetic tables with planted protected-attribute structure.

Used by the test suite and handy for demos: every way a protected
attribute can hide in a table is planted deliberately, so a debiasing run
has a known right answer.
"""

from __future__ import annotations

import numpy as np

from .data import format_number

PLANTED_PROTECTED = "group"
# columns that carry the group label (verbatim copy, two noisy linear
# proxies, and the interaction channel partner)
PLANTED_PROXY_COLUMNS = ("copy", "lin1", "lin2")
# columns with no marginal dependence on the group; a debiasing run should
# leave these nearly untouched
PLANTED_NOISE_COLUMNS = ("parity", "noise1", "noise2")


def make_planted_copy(n_rows=1000, seed=0, positive_fraction=0.45):
    """Binary-group table where the group is recoverable six ways.

    Columns:
      copy    the group label verbatim (0/1)
      lin1    group sign plus Gaussian noise (sd 0.75)
      lin2    group sign plus Gaussian noise (sd 1.25)
      parity  group sign times the sign of lin1's own noise: marginally
              independent of the group, but jointly with lin1 it reveals
              the group exactly - a purely nonlinear, two-column channel
              that survives any per-column linear correction
      noise1  independent N(0, 1)
      noise2  independent N(0, 1)
      group   the protected attribute, levels "a"/"b"

    Returns (header, rows) with all cells as strings, ready for CSV.
    """
    rng = np.random.default_rng(seed)
    n_pos = int(round(positive_fraction * n_rows))
    labels = np.zeros(n_rows, dtype=int)
    labels[:n_pos] = 1
    rng.shuffle(labels)
    sgn = 2.0 * labels - 1.0
    eps1 = rng.normal(0.0, 0.75, n_rows)
    cols = {
        "copy": labels.astype(float),
        "lin1": sgn + eps1,
        "lin2": sgn + rng.normal(0.0, 1.25, n_rows),
        "parity": sgn * np.sign(eps1) + rng.normal(0.0, 0.05, n_rows),
        "noise1": rng.normal(0.0, 1.0, n_rows),
        "noise2": rng.normal(0.0, 1.0, n_rows),
    }
    header = [*cols.keys(), PLANTED_PROTECTED]
    rows = []
    for i in range(n_rows):
        row = [format_number(cols[name][i]) for name in cols]
        row.append("b" if labels[i] else "a")
        rows.append(row)
    return header, rows
