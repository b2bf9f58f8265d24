import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randword.errors import DegenerateInputError, DomainError, NumericError
from randword.floquet import PeriodicBackground, band_structure, floquet_multipliers, floquet_solution, solve_difference
from randword.scattering import (
    InsertionProblem,
    band_coefficients,
    find_b_roots,
    find_gap_roots,
    gap_coefficients,
    gap_product,
    minus_coefficients,
    scattering_coefficients,
)

PROBLEMS = [
    InsertionProblem.from_words((0.0,), (0.7,)),
    InsertionProblem.from_words((0.5, 0.5), (-0.5, -0.5)),
    InsertionProblem.from_words((1.0, -0.5, 0.2), (0.3, 2.0)),
]


def interior_points(problem, n=40, margin=1e-3):
    out = []
    for lo, hi in band_structure(problem.background).stability_intervals:
        out += list(np.linspace(lo + margin, hi - margin, n))
    return out


def jost_by_recursion(problem, z, domain):
    """Propagate the left Floquet data through the composite potential and
    match two consecutive values to the right Floquet solutions."""
    bg, m, p = problem.background, problem.m, problem.background.period
    fd = floquet_multipliers(bg, z, domain)
    v = fd.eigenvector("+")
    u = solve_difference(problem.potential, z, (v[0], v[1]), -1, m + 2 * p + 2)
    phi_p = floquet_solution(bg, z, "+", -1, 3 * p + 3, domain)
    phi_m = floquet_solution(bg, z, "-", -1, 3 * p + 3, domain)
    n0 = m + 1
    rows = [[phi_p[n - m + p], phi_m[n - m + p]] for n in (n0, n0 + 1)]
    return np.linalg.solve(np.array(rows), np.array([u[n0], u[n0 + 1]]))


@pytest.mark.parametrize("problem", PROBLEMS)
def test_unitarity_on_bands(problem):
    for lam in interior_points(problem):
        assert band_coefficients(problem, lam).residual < 1e-8


@pytest.mark.parametrize("problem", PROBLEMS)
def test_matches_recursion_oracle_on_bands(problem):
    for lam in interior_points(problem, n=7, margin=0.05):
        pt = band_coefficients(problem, lam)
        a, b = jost_by_recursion(problem, lam, "band")
        assert pt.a == pytest.approx(a, abs=1e-9) and pt.b == pytest.approx(b, abs=1e-9)


def test_matches_recursion_oracle_in_gap():
    problem = PROBLEMS[2]
    bs = band_structure(problem.background)
    lo, hi = bs.gaps[1]
    lam = 0.5 * (lo + hi)
    g = gap_coefficients(problem, lam)
    a, b = jost_by_recursion(problem, lam, "gap")
    assert g.a1 == pytest.approx(a, rel=1e-9) and g.b1 == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("problem", PROBLEMS)
def test_minus_solution_is_conjugate(problem):
    for lam in interior_points(problem, n=5, margin=0.05):
        pt = band_coefficients(problem, lam)
        am, bm = minus_coefficients(problem, lam)
        assert am == pytest.approx(np.conj(pt.a), abs=1e-9)
        assert bm == pytest.approx(np.conj(pt.b), abs=1e-9)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_period_insertion(k):
    w0 = (1.0, -0.5, 0.2)
    problem = InsertionProblem.from_words(w0, w0 * k)
    for lam in interior_points(problem, n=5, margin=0.05):
        pt = band_coefficients(problem, lam)
        rho = floquet_multipliers(problem.background, lam).rho_plus
        assert abs(pt.a - rho ** (k - 1)) < 1e-10 and abs(pt.b) < 1e-10


def test_single_site_on_free_background_closed_form():
    c = 0.7
    problem = PROBLEMS[0]
    for lam in np.linspace(-1.9, 1.9, 11):
        fd = floquet_multipliers(problem.background, lam)
        d = fd.rho_plus - fd.rho_minus
        pt = band_coefficients(problem, lam)
        assert pt.a == pytest.approx(1 - c / d, abs=1e-12)
        assert pt.b == pytest.approx(c / d, abs=1e-12)


def test_real_axis_branch_is_limit_from_above():
    problem = PROBLEMS[2]
    for lo, hi in band_structure(problem.background).stability_intervals:
        for lam in (lo + 1e-2, 0.5 * (lo + hi), hi - 1e-2):
            on = band_coefficients(problem, lam)
            above = band_coefficients(problem, complex(lam, 1e-5))
            assert abs(on.a - above.a) < 1e-2 and abs(on.b - above.b) < 1e-2


@settings(max_examples=30)
@given(st.floats(-1.4, 2.4).filter(lambda x: abs(x - 0.5) > 1e-2))
def test_dimer_unitarity_property(lam):
    assert band_coefficients(PROBLEMS[1], lam).residual < 1e-8


def test_b_roots_reevaluate_and_are_grid_stable():
    problem = PROBLEMS[1]
    for iv in band_structure(problem.background).stability_intervals:
        coarse = find_b_roots(problem, iv, n_grid=801)
        fine = find_b_roots(problem, iv, n_grid=3201)
        assert len(coarse) == len(fine)
        assert np.allclose(coarse, fine, atol=1e-7)
        for r in coarse:
            assert abs(band_coefficients(problem, r).b) < 1e-7
    roots = find_b_roots(problem, (-1.5, 0.5))
    assert roots == pytest.approx([-0.5], abs=1e-7)


def test_single_site_gap_roots_are_bound_and_antibound_states():
    c = 0.3
    problem = InsertionProblem.from_words((0.0,), (c,))
    r = np.sqrt(4 + c * c)
    right = find_gap_roots(problem, (2.0, np.inf))
    left = find_gap_roots(problem, (-np.inf, -2.0))
    assert right == pytest.approx([r], abs=1e-9) and left == pytest.approx([-r], abs=1e-9)
    # a_2 = 0: the left-decaying solution also decays to the right
    assert abs(gap_coefficients(problem, r).a2) < 1e-9
    assert abs(gap_coefficients(problem, -r).a1) < 1e-9
    # an impurity in a large free box has exactly one eigenvalue outside [-2, 2]
    n = 401
    H = np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    H[n // 2, n // 2] = c
    ev = np.linalg.eigvalsh(H)
    assert ev[-1] == pytest.approx(r, abs=1e-9) and ev[0] > -2


def test_gap_product_is_scale_free():
    problem = PROBLEMS[2]
    lo, hi = band_structure(problem.background).gaps[1]
    for lam in np.linspace(lo + 0.05, hi - 0.05, 5):
        try:
            ref = gap_coefficients(problem, lam).product
        except NumericError:
            continue
        assert gap_product(problem, lam) == pytest.approx(ref.real, rel=1e-8, abs=1e-12)


def test_preconditions():
    with pytest.raises(DegenerateInputError):
        find_b_roots(InsertionProblem.from_words((0.5, 0.5), (0.5, 0.5)), (-1.5, 0.5))
    with pytest.raises(DomainError):
        scattering_coefficients(PROBLEMS[0], 2.5)
    with pytest.raises(DomainError):
        scattering_coefficients(PROBLEMS[0], 2.0 - 1e-5)
