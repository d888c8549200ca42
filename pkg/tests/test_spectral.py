import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvnonlocal.errors import ConvergenceError, HypothesisError, ValidationError
from lvnonlocal.fields import CoefficientField
from lvnonlocal.spectral import (
    LinearPeriodMap,
    autonomous_lambda,
    dense_oracle_lambda,
    essential_bound,
    periodic_solution_residual,
    power_iteration,
    principal_spectrum_point,
    regime_baseline,
    verify_shift_and_monotonicity,
    zero_lambda_certificate,
)

from conftest import make_operator

D16 = make_operator("dirichlet", 16)
N16 = make_operator("neumann", 16)
P16 = make_operator("periodic", 16)


def test_baselines():
    assert abs(regime_baseline(N16)) < 1e-12
    assert abs(regime_baseline(P16)) < 1e-12
    assert regime_baseline(D16) < -1e-4


def test_power_iteration_known_matrix():
    M = np.array([[2.0, 1.0], [1.0, 2.0]])
    rho, w, its, res = power_iteration(M)
    assert rho == pytest.approx(3.0, abs=1e-12)
    assert np.allclose(w, [1.0, 1.0])
    assert res < 1e-12
    with pytest.raises(ConvergenceError):
        power_iteration(np.array([[0.0, 1.0], [1.0, 0.0]]), start=np.array([1.0, 0.0]))


def test_period_map_is_linear():
    l = CoefficientField.from_expression("sin(2*pi*t) + x", 1.0)
    pm = LinearPeriodMap(D16, 0.8, l)
    assert pm.linearity_defect() < 1e-12
    M = pm.matrix()
    v = np.linspace(-1, 1, 16)
    assert np.allclose(M @ v, pm(v), atol=1e-13)
    with pytest.raises(ValidationError):
        LinearPeriodMap(D16, -1.0, l)


@pytest.mark.parametrize("op", [D16, N16, P16], ids=["dirichlet", "neumann", "periodic"])
def test_time_independent_matches_autonomous(op):
    l = 0.3 * np.cos(np.pi * op.grid.coords[:, 0])
    res = principal_spectrum_point(op, 1.3, CoefficientField.from_values(l, 1.0))
    assert res.lam == pytest.approx(autonomous_lambda(op, 1.3, l), abs=1e-10)


def test_matches_dense_oracle_time_periodic():
    op = make_operator("dirichlet", 8)
    l = CoefficientField.from_expression("2*sin(2*pi*t) + 0.5*x - 0.3", 1.0)
    res = principal_spectrum_point(op, 1.0, l)
    assert res.lam == pytest.approx(dense_oracle_lambda(op, 1.0, l), abs=1e-9)
    assert res.perron_function.min() > 0


def test_neumann_zero_is_principal_eigenvalue():
    # the gap is nu * min(kernel mass), strictly positive on a discrete grid
    res = principal_spectrum_point(N16, 1.0, 0.0)
    assert res.gap == pytest.approx(N16.kernel_mass.min(), rel=1e-9)
    assert res.status == "principal_eigenvalue" and res.is_principal_eigenvalue
    assert res.essential_bound == pytest.approx(essential_bound(N16, 1.0, 0.0))
    assert set(res.as_dict()) >= {"lambda", "gap", "status", "is_principal_eigenvalue"}


def test_flat_spectrum_is_indeterminate():
    # with a vanishing rate the top of the spectrum is max l itself
    l = CoefficientField.from_values(np.where(np.arange(16) == 3, 1.0, 0.0), 1.0)
    res = principal_spectrum_point(D16, 1e-12, l)
    assert res.status == "indeterminate"


def test_shift_and_monotonicity():
    l = CoefficientField.from_expression("sin(2*pi*t) + x", 1.0)
    lt = CoefficientField.from_expression("sin(2*pi*t) + x + 0.1*x*x", 1.0)
    rep = verify_shift_and_monotonicity(D16, 1.0, l, lt, 0.7)
    assert rep.holds and rep.monotone_slack > 0 and rep.shift_error < 1e-10
    with pytest.raises(ValidationError):
        verify_shift_and_monotonicity(D16, 1.0, lt, l, 0.7)


def test_zero_lambda_certificate_for_constant_solution():
    # w = 1 solves w' = A w on the Neumann operator
    assert periodic_solution_residual(N16, 1.0, 0.0, np.ones(16)) < 1e-14
    assert zero_lambda_certificate(N16, 1.0, 0.0, np.ones(16)) < 1e-12
    with pytest.raises(HypothesisError):
        zero_lambda_certificate(N16, 1.0, 0.0, np.zeros(16))
    with pytest.raises(HypothesisError):
        zero_lambda_certificate(N16, 1.0, 1.0, np.ones(16))


@settings(max_examples=8, deadline=None)
@given(c=st.floats(-3, 3), nu=st.floats(0.2, 3.0), amp=st.floats(0, 2))
def test_constant_shift_property(c, nu, amp):
    l = CoefficientField.from_expression(f"{amp}*sin(2*pi*t) + 0.5*x", 1.0)
    base = principal_spectrum_point(D16, nu, l).lam
    shifted = principal_spectrum_point(D16, nu, l.shifted(c)).lam
    assert shifted - base == pytest.approx(c, abs=1e-9)
    # separable l: the time part averages out, and lambda(nu, 0) < 0
    assert base <= 0.5 * D16.grid.coords[:, 0].max() + 1e-9


def test_clustered_spectrum_falls_back_to_dense():
    res = principal_spectrum_point(D16, 1e-9, 1.0, max_iter=200)
    assert res.method == "dense_eig"
    assert res.lam == pytest.approx(1.0 - 1e-9 * 1.0, abs=1e-8)
