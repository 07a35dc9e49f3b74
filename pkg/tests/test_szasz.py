import numpy as np
import pytest

from posctrl.grid import uniform_grid
from posctrl.szasz import (MirakjanEval, TailError, convergence_table,
                           exponential_family_density_check, mirakjan_apply, sup_errors,
                           szasz_apply)

X = uniform_grid(101)
N_LIST = [8, 16, 32, 64, 128]


@pytest.mark.parametrize("v", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n", N_LIST)
def test_korovkin_identities(n, v):
    cfg = MirakjanEval(n, v)
    ph = cfg.phi(X)
    assert np.abs(mirakjan_apply(cfg, lambda y: np.ones_like(y), X) - 1).max() <= 1e-10
    assert np.abs(mirakjan_apply(cfg, lambda y: y, X, in_phi=True) - ph).max() <= 1e-10
    got = mirakjan_apply(cfg, lambda y: y * y, X, in_phi=True)
    assert np.abs(got - ph ** 2 - ph / n).max() <= 1e-10


def test_classical_operator_reproduces_linear_and_boundary_value():
    y = np.linspace(0, 5, 11)
    assert np.abs(szasz_apply(lambda s: 3 * s + 1, y, 20) - (3 * y + 1)).max() < 1e-12
    assert szasz_apply(lambda s: np.cos(s), [0.0], 7)[0] == 1.0


@pytest.mark.parametrize("v", [0.5, 1.0, 2.0])
def test_sup_error_decreases_like_inverse_sqrt(v):
    err = sup_errors(lambda s: s, N_LIST, X, v)
    ratios = err[1:] / err[:-1]
    assert np.all(np.diff(err) < 0)
    assert ratios.max() <= 0.75
    assert ratios == pytest.approx(2 ** -0.5, abs=0.02)


def test_convergence_table_shape_and_sampled_input():
    rows = convergence_table(X ** 2, [8, 16], X)
    assert len(rows) == 2 * len(X)
    n, x, approx, exact, err = rows[5]
    assert err == pytest.approx(abs(approx - exact))


def test_density_probe_detects_bump_near_outflow():
    bump = lambda c, base: (lambda x: base - np.exp(-((x - c) / 0.02) ** 2))  # noqa: E731
    rep = exponential_family_density_check(1.0, [bump(0.95, 0.05), bump(0.95, 0.2)], range(0, 201))
    assert rep.smallest_violating_n == [1, 9]
    assert rep.consistent.all()
    assert not rep.dual_nonnegative.any()


def test_density_claim_fails_for_oscillating_duals():
    # Nonnegative pairings for every n although the dual changes sign.
    rep = exponential_family_density_check(1.0, [lambda x: np.cos(2 * np.pi * x)], range(0, 401))
    assert rep.pairings.min() >= -1e-12
    assert rep.smallest_violating_n == [None]
    assert not rep.consistent[0]


def test_density_probe_on_nonnegative_dual():
    rep = exponential_family_density_check(2.0, [1 + X], range(0, 50))
    assert rep.consistent[0] and rep.dual_nonnegative[0]
    assert rep.smallest_violating_n == [None]
    assert rep.to_dict()["n_values"][-1] == 49


def test_tail_and_argument_errors():
    with pytest.raises(TailError):
        szasz_apply(lambda s: s, [10.0], 50, tail_tol=1e-300)
    _, tail = szasz_apply(lambda s: s, [10.0], 50, return_tail=True)
    assert tail < 1e-12
    with pytest.raises(ValueError):
        szasz_apply(lambda s: s, [-1.0], 5)
    with pytest.raises(ValueError):
        MirakjanEval(0)
    with pytest.raises(ValueError):
        MirakjanEval(4, v=0.0)
    with pytest.raises(ValueError):
        exponential_family_density_check(-1.0, [X], [1])


def test_phi_inverse_is_clamped():
    cfg = MirakjanEval(4, 0.5)
    assert cfg.phi_inv(3.0) == 0.0 and cfg.phi_inv(0.0) == 1.0
    np.testing.assert_allclose(cfg.phi_inv(cfg.phi(X)), X, atol=1e-15)
