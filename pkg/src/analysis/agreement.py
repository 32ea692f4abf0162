# File: src/analysis/agreement.py

"""
Krippendorff's alpha for nominal labels.

Ratings arrive as an items x raters grid in which any cell may be missing.
Alpha is computed from the coincidence matrix: every item with at least two
ratings contributes each ordered pair of its values from different raters
with weight 1 / (m_u - 1), where m_u is the item's number of ratings.
"""

from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd

from src.exceptions import AgreementUndefinedError

log = logging.getLogger(__name__)


def _is_missing(value):
    return value is None or (isinstance(value, float) and np.isnan(value)) or value == ""


@dataclass(frozen=True)
class RatingsMatrix:
    """items[i][r] is rater r's label for item i, or None when missing."""
    items: tuple
    raters: tuple = ()

    @classmethod
    def from_rows(cls, rows, raters=None):
        items = tuple(tuple(None if _is_missing(v) else str(v) for v in row) for row in rows)
        width = max((len(row) for row in items), default=0)
        if any(len(row) != width for row in items):
            raise ValueError("Every item row needs one cell per rater")
        raters = tuple(raters) if raters is not None else tuple(f"rater{i + 1}" for i in range(width))
        return cls(items, raters)

    @classmethod
    def from_csv(cls, source):
        """
        Reads a ratings CSV: a header row of rater names, one row per item,
        empty cells for missing ratings. Every value is read as a string.
        """
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, na_values=[""])
        rows = frame.astype(object).where(frame.notna(), None).values.tolist()
        log.info(f"Loaded ratings for {len(rows)} items from {len(frame.columns)} raters")
        return cls.from_rows(rows, raters=[str(c) for c in frame.columns])

    @property
    def n_items(self):
        return len(self.items)

    def pairable_items(self):
        """Items with at least two ratings, each as its list of present values."""
        for row in self.items:
            values = [v for v in row if v is not None]
            if len(values) >= 2:
                yield values


def coincidence_matrix(ratings):
    """
    Returns (categories, o) where o[c, k] sums the weighted value pairs.

    Categories are sorted so results do not depend on rater or item order.
    """
    units = list(ratings.pairable_items())
    categories = sorted({v for values in units for v in values})
    index = {c: i for i, c in enumerate(categories)}
    o = np.zeros((len(categories), len(categories)))
    for values in units:
        counts = np.zeros(len(categories))
        for v in values:
            counts[index[v]] += 1
        # Pairs from different raters: n_c * n_k, minus the self-pairs on the diagonal.
        pairs = np.outer(counts, counts) - np.diag(counts)
        o += pairs / (len(values) - 1)
    return categories, o


def krippendorff_alpha(ratings):
    """
    Nominal Krippendorff's alpha, 1 - D_o / D_e.

    Raises:
        AgreementUndefinedError: fewer than two pairable values, or every
            pairable value is the same label (D_e = 0).
    """
    if not isinstance(ratings, RatingsMatrix):
        ratings = RatingsMatrix.from_rows(ratings)
    categories, o = coincidence_matrix(ratings)
    n_c = o.sum(axis=1)
    n = n_c.sum()
    if n < 2:
        raise AgreementUndefinedError(f"Alpha needs at least 2 pairable values, found {n:g}")
    observed = (o.sum() - np.trace(o)) / n
    expected = (n * n - np.sum(n_c * n_c)) / (n * (n - 1))
    if expected == 0:
        raise AgreementUndefinedError(
            f"Alpha is undefined: every pairable value is {categories[0]!r}")
    alpha = 1.0 - observed / expected
    log.info(f"Krippendorff's alpha = {alpha:.4f} over {int(round(n))} pairable values, "
             f"{len(categories)} categories")
    return float(alpha)
