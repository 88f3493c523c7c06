import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gravcomp.errors import ValidationError
from gravcomp.excitation import (
    JointRanges,
    default_plans,
    one_joint_plan,
    scaling_estimate,
    two_joint_plan,
)


def test_default_plans_size_and_balance(model):
    plans = default_plans(model)
    assert [p.estimated_joint for p in plans] == [1, 2, 3, 4, 5, 6]
    for p in plans:
        # 600 configurations visited in both directions
        assert len(p) == 1200
        assert p.per_direction == 600
        assert len({tuple(q) for q in p.configs}) == 600
        model.check_limits(p.configs)


def test_table_ranges_and_auxiliaries():
    r = JointRanges.table()
    assert r.auxiliary == {6: 5, 5: 3, 4: 3, 3: 2, 2: None, 1: None}
    assert r.estimated[4][0] == pytest.approx(math.radians(-190))
    assert r.auxiliary_range[3] == pytest.approx((math.radians(-14), math.radians(40)))


def test_sweep_order_and_tags(model):
    p = two_joint_plan(model, 6, counts=(3, 2))
    q6, q5 = p.configs[:, 5], p.configs[:, 4]
    d6 = p.dirs[:, 5]
    lo, hi = math.radians(-40), math.radians(40)
    assert q6[:3] == pytest.approx([lo, 0.0, hi])
    assert q6[3:6] == pytest.approx([hi, 0.0, lo])
    assert d6.tolist() == [1, 1, 1, -1, -1, -1] * 2
    assert q5[:6] == pytest.approx([math.radians(-90)] * 6)
    assert np.all(p.dirs[:, 4] == 1)
    assert np.all(p.dirs[:, :4] == -1)
    assert np.allclose(p.configs[:, :4], model.mid_range()[:4])


def test_one_joint_plan_pins_auxiliary(model):
    r = JointRanges.table()
    for setting, value in (("lo", r.auxiliary_range[4][0]), ("hi", r.auxiliary_range[4][1])):
        p = one_joint_plan(model, 4, setting, 600)
        assert len(p) == 1200
        assert np.all(p.configs[:, 2] == value)
    with pytest.raises(ValidationError):
        one_joint_plan(model, 2, "mid", 10)
    with pytest.raises(ValidationError):
        one_joint_plan(model, 4, "top", 10)


def test_proximal_joints_take_no_auxiliary(model):
    p = two_joint_plan(model, 1, counts=(30, 20))
    assert p.auxiliary_joint is None
    assert len(np.unique(p.configs[:, 0])) == 600
    with pytest.raises(ValidationError):
        two_joint_plan(model, 2, auxiliary=1)


def test_bad_arguments(model):
    with pytest.raises(ValidationError):
        two_joint_plan(model, 7)
    with pytest.raises(ValidationError):
        two_joint_plan(model, 3, counts=(0, 5))


@given(st.integers(1, 8), st.integers(1, 50))
def test_scaling(n, N):
    full, pair = scaling_estimate(n, N)
    assert full == N**n
    assert pair == n * N * N
    if n >= 3 and N >= n:
        assert pair <= full


def test_six_joint_scale_example():
    assert scaling_estimate(6, 20) == (64_000_000, 2400)
