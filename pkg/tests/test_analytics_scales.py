from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storytriad.analytics import score_chs, score_tssf, score_umux_lite
from storytriad.errors import OutOfRange, WrongItemCount


def oracle_chs(items):
    """Direct summation over the published subscale mapping."""
    agency = items[0] + items[2] + items[4]
    pathways = items[1] + items[3] + items[5]
    return agency + pathways, agency, pathways


class TestScoreChs:
    def test_maximum(self):
        r = score_chs([6, 6, 6, 6, 6, 6])
        assert (r.total, r.agency, r.pathways) == (36, 18, 18)

    def test_minimum(self):
        r = score_chs([1, 1, 1, 1, 1, 1])
        assert (r.total, r.agency, r.pathways) == (6, 3, 3)

    def test_mixed_vector_matches_summation_oracle(self):
        items = [5, 4, 5, 5, 4, 5]
        r = score_chs(items)
        # oracle: agency = i1+i3+i5 = 14, pathways = i2+i4+i6 = 14
        assert (r.total, r.agency, r.pathways) == oracle_chs(items) == (28, 14, 14)

    def test_guards(self):
        with pytest.raises(WrongItemCount):
            score_chs([3, 3, 3])
        with pytest.raises(OutOfRange):
            score_chs([0, 3, 3, 3, 3, 3])
        with pytest.raises(OutOfRange):
            score_chs([7, 3, 3, 3, 3, 3])
        with pytest.raises(OutOfRange):
            score_chs([3.5, 3, 3, 3, 3, 3])  # type: ignore[list-item]

    @given(items=st.lists(st.integers(min_value=1, max_value=6), min_size=6, max_size=6))
    @settings(max_examples=300, deadline=None)
    def test_total_is_subscale_sum(self, items):
        r = score_chs(items)
        assert r.total == r.agency + r.pathways
        assert (r.total, r.agency, r.pathways) == oracle_chs(items)
        assert 6 <= r.total <= 36
        assert 3 <= r.agency <= 18
        assert 3 <= r.pathways <= 18


class TestScoreTssf:
    def test_constant(self):
        assert score_tssf([7] * 6) == 7.0

    def test_mean(self):
        assert score_tssf([1, 2, 3, 4, 5, 6]) == pytest.approx(3.5)

    def test_guards(self):
        with pytest.raises(OutOfRange):
            score_tssf([0, 1, 1, 1, 1, 1])
        with pytest.raises(WrongItemCount):
            score_tssf([4, 4])

    def test_random_matches_mean_oracle(self):
        rng = random.Random(3)
        for _ in range(100):
            items = [rng.randint(1, 7) for _ in range(6)]
            assert score_tssf(items) == pytest.approx(sum(items) / 6)


class TestScoreUmuxLite:
    def test_constant(self):
        assert score_umux_lite([7, 7]) == 7.0

    def test_mean(self):
        assert score_umux_lite([4, 6]) == pytest.approx(5.0)

    def test_guards(self):
        with pytest.raises(WrongItemCount):
            score_umux_lite([5])
        with pytest.raises(OutOfRange):
            score_umux_lite([8, 4])
