import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssmgrad.errors import BadDimension
from ssmgrad.models_seasonal import SeasonalModel
from ssmgrad.statespace import (
    InitialCondition,
    ModelDims,
    ModelMatrices,
    pair_indices,
    pair_position,
    simulate,
    unpack_pairs,
    validate_model,
)


def local_level(q=1.0, R=1.0, p=1):
    mm = ModelMatrices(
        F=np.eye(1), G=np.eye(1), H=np.ones(1), Q=np.array([[q]]), R=R,
        dF=np.zeros((p, 1, 1)), dG=np.zeros((p, 1, 1)), dH=np.zeros((p, 1)),
        dQ=np.zeros((p, 1, 1)), dR=np.zeros(p),
    )
    ic = InitialCondition(np.zeros(1), np.eye(1), np.zeros((p, 1)), np.zeros((p, 1, 1)))
    return mm, ic


def test_dims_reject_zero():
    with pytest.raises(BadDimension):
        ModelDims(2, 1, 0)
    with pytest.raises(BadDimension):
        ModelDims(0, 1, 1)
    assert ModelDims(3, 2, 4).n_pairs == 10


@given(st.integers(1, 12))
def test_pair_position_matches_pair_indices(p):
    J, K = pair_indices(p)
    assert len(J) == p * (p + 1) // 2
    for pos, (j, k) in enumerate(zip(J, K)):
        assert j <= k
        assert pair_position(j, k, p) == pos
        assert pair_position(k, j, p) == pos


def test_unpack_pairs_symmetric():
    p = 3
    stack = np.arange(6.0)
    full = unpack_pairs(stack, p)
    assert np.array_equal(full, full.T)
    assert full[0, 2] == stack[pair_position(0, 2, p)]


def test_valid_model_has_no_problems():
    mm, ic = local_level()
    assert validate_model(mm, ic, ModelDims(1, 1, 1)) == []


def test_asymmetric_q_reported():
    mm, ic = local_level()
    m = 2
    bad = ModelMatrices(
        F=np.eye(m), G=np.eye(m), H=np.ones(m), Q=np.array([[1.0, 0.5], [0.0, 1.0]]), R=1.0,
        dF=np.zeros((1, m, m)), dG=np.zeros((1, m, m)), dH=np.zeros((1, m)),
        dQ=np.zeros((1, m, m)), dR=np.zeros(1),
    )
    ic = InitialCondition(np.zeros(m), np.eye(m), np.zeros((1, m)), np.zeros((1, m, m)))
    assert "Q not symmetric" in validate_model(bad, ic, ModelDims(m, m, 1))


def test_derivative_stack_length_mismatch_reported():
    mm, ic = local_level(p=2)
    problems = validate_model(mm, ic, ModelDims(1, 1, 3))
    assert any(s.startswith("derivative stack length mismatch") for s in problems)


def test_negative_r_and_indefinite_v0_reported():
    mm, ic = local_level(R=-1.0)
    ic = InitialCondition(np.zeros(1), -np.eye(1), ic.dx0, ic.dV0)
    problems = validate_model(mm, ic, ModelDims(1, 1, 1))
    assert "R negative" in problems
    assert "V0 not positive semidefinite" in problems


def test_incomplete_second_derivatives_reported(general_model):
    _, mm, ic = general_model.evaluate(np.zeros(3), order=2)
    partial = ModelMatrices(mm.F, mm.G, mm.H, mm.Q, mm.R, mm.dF, mm.dG, mm.dH, mm.dQ, mm.dR, d2F=mm.d2F)
    problems = validate_model(partial, ic, ModelDims(3, 2, 3))
    assert any("incomplete second-derivative" in s for s in problems)


def test_general_model_is_valid(general_model):
    dims, mm, ic = general_model.evaluate(np.array([0.2, -0.1, 0.3]), order=2)
    assert validate_model(mm, ic, dims) == []


def test_simulate_deterministic():
    mm, ic = local_level()
    y1, _ = simulate(mm, ic, 50, np.random.default_rng(7))
    y2, _ = simulate(mm, ic, 50, np.random.default_rng(7))
    assert np.array_equal(y1, y2)


def test_simulate_zero_seasonal_noise_is_periodic():
    model = SeasonalModel(period=4)
    theta = np.array([-2.0, -np.inf, -1.0])  # tau2^2 = 0
    _, mm, ic = model.evaluate(theta)
    _, states = simulate(mm, ic, 40, np.random.default_rng(3))
    seasonal = states[:, 2]
    assert np.allclose(seasonal[4:], seasonal[:-4], rtol=0, atol=1e-9)
    # the seasonal components over one period sum to zero
    window = seasonal[3:] + seasonal[2:-1] + seasonal[1:-2] + seasonal[:-3]
    assert np.allclose(window, 0.0, atol=1e-9)
