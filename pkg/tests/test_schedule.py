from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchordiff.schedule import (
    NoiseSchedule,
    ScheduleKind,
    alpha,
    lambda_weight,
    step_times,
    unmask_prob,
)

COSINE = NoiseSchedule(ScheduleKind.COSINE, 16)
LINEAR = NoiseSchedule(ScheduleKind.LINEAR, 16)


class TestAlpha:
    @pytest.mark.parametrize("schedule", [COSINE, LINEAR])
    def test_endpoints_exact(self, schedule):
        assert alpha(schedule, 0.0) == 1.0
        assert alpha(schedule, 1.0) == 0.0

    def test_cosine_midpoint_exact(self):
        assert alpha(COSINE, 0.5) == 0.5

    def test_linear_midpoint(self):
        assert alpha(LINEAR, 0.5) == 0.5

    @pytest.mark.parametrize("schedule", [COSINE, LINEAR])
    def test_strictly_decreasing(self, schedule):
        ts = np.linspace(0, 1, 257)
        vals = [alpha(schedule, float(t)) for t in ts]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            alpha(COSINE, -0.1)
        with pytest.raises(ValueError):
            alpha(COSINE, 1.1)


class TestStepTimes:
    def test_examples(self):
        sched = NoiseSchedule(ScheduleKind.COSINE, 4)
        assert step_times(sched, 1) == (0.0, 0.25)
        assert step_times(sched, 4) == (0.75, 1.0)
        assert step_times(NoiseSchedule(ScheduleKind.COSINE, 1), 1) == (0.0, 1.0)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            step_times(COSINE, 0)
        with pytest.raises(IndexError):
            step_times(COSINE, 17)


class TestUnmaskProb:
    @pytest.mark.parametrize("schedule", [COSINE, LINEAR])
    def test_first_step_is_certain(self, schedule):
        assert unmask_prob(schedule, 1) == 1.0

    def test_linear_halfway(self):
        sched = NoiseSchedule(ScheduleKind.LINEAR, 2)
        assert unmask_prob(sched, 2) == pytest.approx(0.5, abs=1e-15)

    def test_cosine_halfway(self):
        sched = NoiseSchedule(ScheduleKind.COSINE, 2)
        assert unmask_prob(sched, 2) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("schedule", [COSINE, LINEAR])
    def test_in_unit_interval(self, schedule):
        for i in range(1, schedule.T + 1):
            assert 0.0 <= unmask_prob(schedule, i) <= 1.0


class TestLambdaWeight:
    def test_first_step(self):
        assert lambda_weight(COSINE, 1) == -1.0

    def test_linear_t2(self):
        sched = NoiseSchedule(ScheduleKind.LINEAR, 2)
        assert lambda_weight(sched, 2) == pytest.approx(-0.5, abs=1e-15)

    @pytest.mark.parametrize("schedule", [COSINE, LINEAR])
    def test_negated_unmask_prob(self, schedule):
        for i in range(1, schedule.T + 1):
            assert lambda_weight(schedule, i) + unmask_prob(schedule, i) == 0.0


class TestIdentities:
    @pytest.mark.parametrize("schedule", [COSINE, LINEAR])
    def test_survival_product_is_zero(self, schedule):
        # A position still masked after all T reverse steps has probability
        # prod(1 - p_i) = 0 exactly, because p_1 = 1.
        prod = 1.0
        for i in range(1, schedule.T + 1):
            prod *= 1.0 - unmask_prob(schedule, i)
        assert prod == 0.0

    @pytest.mark.parametrize("kind", [ScheduleKind.COSINE, ScheduleKind.LINEAR])
    @given(t=st.floats(0.01, 1.0), parts=st.integers(1, 9))
    @settings(max_examples=60, deadline=None)
    def test_forward_marginal_composition(self, kind, t, parts):
        # Composing Markov survival ratios over any partition of [0, t]
        # telescopes to alpha(t) within 1e-12.
        sched = NoiseSchedule(kind, 8)
        cuts = np.linspace(0.0, t, parts + 1)
        prod = 1.0
        for a, b in zip(cuts, cuts[1:]):
            prod *= alpha(sched, float(b)) / alpha(sched, float(a)) if alpha(sched, float(a)) > 0 else 0.0
        assert abs(prod - alpha(sched, float(t))) <= 1e-12

    @pytest.mark.parametrize("schedule", [COSINE, LINEAR])
    def test_lambda_mass_telescopes(self, schedule):
        # sum_i lambda_i * (1 - alpha(t_i)) = alpha(1) - alpha(0) = -1,
        # the identity behind the uniform-predictor NELBO closed form.
        total = 0.0
        for i in range(1, schedule.T + 1):
            _, t = step_times(schedule, i)
            total += lambda_weight(schedule, i) * (1.0 - alpha(schedule, t))
        assert total == pytest.approx(-1.0, abs=1e-12)
