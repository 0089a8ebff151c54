from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ewfe.protocol import OK, build_protocol, view_distribution
from ewfe.sampling import halting_stats, outcome_counts, run_trajectory, stream


def _chi2(spec, view, counts):
    exact = view_distribution(spec, view)
    keep = [o for o in exact if exact[o] > 1e-12]
    for o in exact:
        if o not in keep:
            assert counts[o] == 0
    n = sum(counts.values())
    return stats.chisquare([counts[o] for o in keep], [exact[o] * n for o in keep]).pvalue


# --------------------------------------------------------------------------
# single trajectories
# --------------------------------------------------------------------------
class TestTrajectory:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**63), st.integers(1, 300))
    def test_halting_invariant(self, seed, max_rounds):
        t = run_trajectory(build_protocol(), seed, max_rounds)
        halts = [i for i, r in enumerate(t.rounds) if r == (OK, OK)]
        if t.halted:
            assert halts == [t.halted_at] and t.halted_at == len(t.rounds) - 1
        else:
            assert halts == [] and len(t.rounds) == max_rounds

    def test_reproducible(self, spec):
        assert run_trajectory(spec, 42) == run_trajectory(spec, 42)
        assert run_trajectory(spec, 42, index=1) != run_trajectory(spec, 42, index=0)

    def test_streams_independent_of_batch(self):
        a = stream(5, 3).random(4)
        stream(5, 0).random(100)
        np.testing.assert_array_equal(a, stream(5, 3).random(4))

    @pytest.mark.parametrize("bad", [0, -1, 10_001])
    def test_max_rounds_guard(self, spec, bad):
        with pytest.raises(ValueError):
            run_trajectory(spec, 0, bad)

    def test_tail_coin_never_halts(self):
        t = run_trajectory(build_protocol((0.0, 1.0)), 0, 500)
        assert not t.halted and len(t.rounds) == 500
        assert t.as_dict()["non_halting"] is True

    def test_f1_records_pairs(self, spec):
        t = run_trajectory(spec, 1, 50, view="F1")
        assert not t.halted and all(len(r) == 2 for r in t.rounds)
        assert ("tail", "ok") not in t.rounds

    def test_unknown_view(self, spec):
        with pytest.raises(ValueError):
            run_trajectory(spec, 0, 10, view="Q")


# --------------------------------------------------------------------------
# i.i.d. rounds against the exact distributions
# --------------------------------------------------------------------------
class TestGoodnessOfFit:
    @pytest.mark.parametrize("view", ["W", "A", "F1", "F2"])
    def test_chi_square_1e5_rounds(self, spec, view):
        counts = outcome_counts(spec, view, 10, seed=2024, rounds=10_000)
        assert sum(counts.values()) == 100_000
        assert _chi2(spec, view, counts) > 0.001

    def test_rounds_within_trajectories(self, spec):
        # pooled records of halting trajectories, excluding the halting round
        counts = {}
        for i in range(2000):
            t = run_trajectory(spec, 9, index=i)
            for r in t.rounds[:-1]:
                counts[r] = counts.get(r, 0) + 1
        exact = view_distribution(spec, "W")
        rest = [o for o in exact if o != (OK, OK)]
        n = sum(counts.values())
        z = sum(exact[o] for o in rest)
        p = stats.chisquare([counts.get(o, 0) for o in rest], [exact[o] / z * n for o in rest]).pvalue
        assert p > 0.001


# --------------------------------------------------------------------------
# halting statistics
# --------------------------------------------------------------------------
class TestHaltingStats:
    def test_single_trial(self, spec):
        h = halting_stats(spec, 1, seed=3)
        assert sum(h.histogram.values()) == 1 and len(h.histogram) == 1

    def test_reproducible_and_worker_independent(self, spec):
        a = halting_stats(spec, 400, seed=8)
        assert a == halting_stats(spec, 400, seed=8)
        assert a == halting_stats(spec, 400, seed=8, workers=2)

    def test_mean_near_twelve(self, spec):
        h = halting_stats(spec, 20_000, seed=11)
        assert abs(h.mean_halt_round - 12) < 0.5
        assert abs(h.empirical_p - 1 / 12) < 4 * h.sigma

    def test_guards(self, spec):
        with pytest.raises(ValueError):
            halting_stats(spec, 0, seed=1)

    def test_non_halting_counted(self):
        h = halting_stats(build_protocol((0.0, 1.0)), 3, seed=0, max_rounds=20)
        assert h.halted == 0 and h.non_halting == 3 and h.total_rounds == 60
        assert np.isnan(h.mean_halt_round)
