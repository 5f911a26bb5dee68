import numpy as np
import pytest

from nlkg_inverse import (
    K_functional,
    K_samples,
    SolverError,
    StateH,
    free_series,
    h_norm,
    inner_product_H,
    pairing_spacetime,
    scattering_output,
    solve,
)
from nlkg_inverse.fields import dealias_series, duhamel, symplectic_partner
from nlkg_inverse.nonlinearity import ZeroNonlinearity, cubic
from nlkg_inverse.reconstruction import moment

from conftest import random_state_from_seed


def test_zero_nonlinearity_returns_free_wave(grid, window, probe):
    u, diag = solve(probe, ZeroNonlinearity(), window)
    w = free_series(probe, window)
    np.testing.assert_allclose(u.frames, w.frames, atol=1e-14)
    assert diag.converged and diag.iterations == 1


def test_zero_data_gives_zero_solution(grid, window):
    u, diag = solve(StateH.zero(grid), cubic(1), window)
    assert np.all(u.frames == 0.0)
    assert diag.converged and diag.final_residual == 0.0


def test_solve_rejects_bad_tolerance(grid, window, probe):
    with pytest.raises(ValueError):
        solve(probe, cubic(1), window, tolerance=0.0)


def test_picard_leading_order(grid, window, probe):
    # u - w - Gamma(N'''(0) (lam w)^3 / 6) = O(lam^5) for the cubic family
    spec = cubic(1)
    lams = [0.16, 0.08, 0.04]
    sup = []
    for lam in lams:
        u, _ = solve(lam * probe, spec, window, tolerance=1e-13)
        w = free_series(lam * probe, window)
        lead = duhamel(dealias_series(w**3))
        diff = (u - w - lead).frames
        per_frame = np.sqrt(np.sum(diff**2, axis=(1, 2)) * grid.cell_area)
        sup.append(float(per_frame.max()))
    slope = np.polyfit(np.log(lams), np.log(sup), 1)[0]
    assert slope >= 4.5


def test_contraction_is_geometric(grid, window, probe):
    _, diag = solve(0.1 * probe, cubic(1), window, tolerance=1e-12)
    residuals = [r for r in diag.residual_history if r < 1e-2]
    assert len(residuals) >= 2
    for a, b in zip(residuals, residuals[1:]):
        assert b < 0.9 * a


def test_non_convergence_raises_with_diagnostics(grid, window, probe):
    with pytest.raises(SolverError) as err:
        solve(20.0 * probe, cubic(1), window, max_iter=40)
    assert err.value.diagnostics is not None
    assert not err.value.diagnostics.converged


def test_scattering_output_zero_spec(grid, window, probe):
    u, _ = solve(probe, ZeroNonlinearity(), window)
    out = scattering_output(u, probe, ZeroNonlinearity())
    np.testing.assert_allclose(out.f, probe.f, atol=1e-14)
    np.testing.assert_allclose(out.g, probe.g, atol=1e-14)


def test_scattering_output_zero_data(grid, window):
    zero = StateH.zero(grid)
    u, _ = solve(zero, cubic(1), window)
    out = scattering_output(u, zero, cubic(1))
    assert np.all(out.f == 0.0) and np.all(out.g == 0.0)


def test_scattering_duality_against_random_direction(grid, window, probe):
    spec = cubic(1)
    lam = 0.1
    u, _ = solve(lam * probe, spec, window, tolerance=1e-13)
    phi_plus = scattering_output(u, lam * probe, spec)
    psi = random_state_from_seed(grid, 42)
    lhs = inner_product_H(phi_plus - lam * probe, symplectic_partner(psi))
    rhs = pairing_spacetime(spec.apply_to(0, u), psi)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1e-30)


def test_K_zero_cases(grid, window, probe):
    assert K_functional(probe, 0.3, ZeroNonlinearity(), window) == 0.0
    assert K_functional(probe, 0.0, cubic(1), window) == 0.0


def test_K_modes_agree(grid, window, probe):
    k1 = K_functional(probe, 0.08, cubic(1), window, "via_pairing")
    k2 = K_functional(probe, 0.08, cubic(1), window, "via_output")
    assert abs(k1 - k2) <= 1e-10 * abs(k1)


def test_K_unknown_mode(grid, window, probe):
    with pytest.raises(ValueError):
        K_functional(probe, 0.08, cubic(1), window, "sideways")


def test_K_cubic_small_amplitude_limit(grid, window, probe):
    # K(lam)/lam^3 -> (a/6) * int w^4 for N(y) = a y^3 / 6 (here a = 6)
    target = moment(probe, 3, window)
    lams = [0.04, 0.02, 0.01]
    errs = [abs(K_functional(probe, lam, cubic(1), window) / lam**3 - target) for lam in lams]
    slope = np.polyfit(np.log(lams), np.log(errs), 1)[0]
    assert slope >= 1.9  # remainder is O(lam^2)
    assert errs[-1] <= 1e-3 * abs(target)


def test_K_samples_batch(grid, window, probe):
    assert K_samples(probe, [], cubic(1), window) == {}
    single = K_samples(probe, [0.05], cubic(1), window)
    assert single[0.05] == K_functional(probe, 0.05, cubic(1), window)
    lams = [0.05, 0.025, 0.0125]
    batch = K_samples(probe, lams, cubic(1), window)
    for lam in lams:
        assert batch[lam] == K_functional(probe, lam, cubic(1), window)


def test_K_samples_failure_carries_amplitude(grid, window, probe):
    with pytest.raises(SolverError, match="amplitude"):
        K_samples(probe, [0.05, 30.0], cubic(1), window, max_iter=40)


def test_solver_residual_meets_tolerance(grid, window, probe):
    tol = 1e-12
    u, diag = solve(0.12 * probe, cubic(1), window, tolerance=tol)
    assert diag.converged and diag.final_residual <= tol
    # independent residual check on the returned iterate
    forcing = cubic(1).apply_to(0, u)
    resid = (free_series(0.12 * probe, window) + duhamel(forcing) - u).frames
    per_frame = np.sqrt(np.sum(resid**2, axis=(1, 2)) * grid.cell_area)
    assert per_frame.max() / h_norm(0.12 * probe) <= tol
