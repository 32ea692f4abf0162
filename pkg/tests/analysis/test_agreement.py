# File: tests/analysis/test_agreement.py

"""
Tests for Krippendorff's alpha in `src/analysis/agreement.py`, cross-checked
against the reference `krippendorff` package.
"""
import io
import pytest
import sys
import os

import krippendorff
import numpy as np

# --- Setup Project Root Path ---
try:
    TEST_DIR = os.path.dirname(__file__)
    PROJECT_ROOT = os.path.abspath(os.path.join(TEST_DIR, '..', '..'))
except NameError:
    PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname('.'), '..'))
if PROJECT_ROOT not in sys.path:
     sys.path.insert(0, PROJECT_ROOT)

from src.analysis.agreement import RatingsMatrix, coincidence_matrix, krippendorff_alpha
from src.exceptions import AgreementUndefinedError


def reference_alpha(rows):
    """The reference package wants raters x items with NaN for missing, and numeric codes."""
    categories = sorted({v for row in rows for v in row if v is not None})
    codes = {c: float(i) for i, c in enumerate(categories)}
    data = np.array([[np.nan if v is None else codes[v] for v in row] for row in rows]).T
    return krippendorff.alpha(reliability_data=data, level_of_measurement="nominal")


def test_two_raters_four_items_by_hand():
    # o = [[2, 2], [2, 2]], n = 8: D_o = 4/8, D_e = (64 - 32) / 56 = 4/7, alpha = 1 - 7/8.
    rows = [("a", "a"), ("b", "b"), ("a", "b"), ("b", "a")]
    categories, o = coincidence_matrix(RatingsMatrix.from_rows(rows))
    assert categories == ["a", "b"]
    np.testing.assert_allclose(o, [[2.0, 2.0], [2.0, 2.0]])
    assert abs(krippendorff_alpha(rows) - 0.125) <= 1e-12


def test_unanimous_items_give_one():
    rows = [("crop",) * 3, ("adjust",) * 3, ("crop",) * 3]
    assert krippendorff_alpha(rows) == 1.0


def test_single_category_is_undefined():
    with pytest.raises(AgreementUndefinedError):
        krippendorff_alpha([("crop", "crop"), ("crop", "crop", )])


def test_too_few_pairable_values():
    with pytest.raises(AgreementUndefinedError):
        krippendorff_alpha([("crop", None), (None, "adjust")])


@pytest.mark.parametrize("seed", range(5))
def test_matches_reference_package_with_missing_values(seed):
    rng = np.random.default_rng(seed)
    labels = ["adjust", "crop", "delete", "add"]
    rows = []
    for _ in range(30):
        row = [labels[int(i)] for i in rng.integers(0, len(labels), size=3)]
        if rng.random() < 0.3:
            row[int(rng.integers(0, 3))] = None
        rows.append(tuple(row))
    assert krippendorff_alpha(rows) == pytest.approx(reference_alpha(rows), abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_renaming_categories_keeps_alpha(seed):
    rng = np.random.default_rng(seed)
    labels = ["adjust", "crop", "delete"]
    rows = [tuple(labels[int(i)] if rng.random() > 0.2 else None for i in rng.integers(0, 3, size=4))
            for _ in range(25)]
    renamed = dict(zip(labels, ["z", "m", "a"]))
    relabelled = [tuple(None if v is None else renamed[v] for v in row) for row in rows]
    assert krippendorff_alpha(relabelled) == pytest.approx(krippendorff_alpha(rows), abs=1e-12)


def test_from_csv_reads_missing_cells():
    csv = io.StringIO("r1,r2,r3\ncrop,crop,\nadjust,adjust,adjust\ncrop,,adjust\n")
    ratings = RatingsMatrix.from_csv(csv)
    assert ratings.raters == ("r1", "r2", "r3")
    assert ratings.items[0] == ("crop", "crop", None)
    assert ratings.n_items == 3
    assert krippendorff_alpha(ratings) == pytest.approx(reference_alpha(list(ratings.items)), abs=1e-9)


def test_ragged_rows_are_rejected():
    with pytest.raises(ValueError):
        RatingsMatrix.from_rows([("a", "b"), ("a",)])
