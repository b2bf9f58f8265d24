import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randword.errors import DegenerateInputError, DomainError, ModelDegenerateError
from randword.floquet import band_structure
from randword.furstenberg import (
    THRESHOLDS,
    GeneratorSet,
    check_noncompact,
    check_strong_irreducibility,
    commutator_trace,
    commutator_trace_poly,
    conjugated_pair,
    exceptional_set,
    recheck_residual,
)
from randword.scattering import InsertionProblem
from randword.transfer import estimate_gamma, word_matrix
from randword.words import Word, make_example


def rotation(t):
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


def test_hyperbolic_generator_is_noncompact():
    rep = check_noncompact(GeneratorSet((np.array([[2.0, 0.0], [0.0, 0.5]]),), 0.0))
    assert rep.noncompact and not rep.heuristic


def test_rotations_are_compact():
    rep = check_noncompact(GeneratorSet((rotation(0.3), rotation(1.1)), 0.0))
    assert not rep.noncompact


def test_elliptic_with_distinct_fixed_points_is_noncompact():
    s = np.diag([2.0, 0.5])
    g = s @ rotation(0.4) @ np.linalg.inv(s)
    assert check_noncompact(GeneratorSet((rotation(0.4), g), 0.0)).noncompact


def test_dimer_at_critical_energy_is_compact():
    lam = 0.5
    gens = GeneratorSet.at(make_example("dimer", lam=lam), lam)
    mats = gens.matrices
    assert any(np.allclose(g, -np.eye(2)) for g in mats)
    other = [g for g in mats if not np.allclose(g, -np.eye(2))][0]
    assert abs(np.trace(other)) == pytest.approx(abs(4 * lam * lam - 2), abs=1e-12)
    assert not check_noncompact(gens).noncompact


def test_upper_triangular_pair_reducible():
    a = np.array([[2.0, 1.0], [0.0, 0.5]])
    b = np.array([[0.5, 3.0], [0.0, 2.0]])
    rep = check_strong_irreducibility(GeneratorSet((a, b), 0.0))
    assert not rep.irreducible and len(rep.witness) == 1
    assert rep.witness[0] == pytest.approx(0.0, abs=1e-9) or rep.witness[0] == pytest.approx(np.pi, abs=1e-9)


def test_minus_identity_with_hyperbolic_reducible():
    g = np.array([[2.0, 1.0], [1.0, 1.0]])
    rep = check_strong_irreducibility(GeneratorSet((-np.eye(2), g), 0.0))
    assert not rep.irreducible and 1 <= len(rep.witness) <= 2


def test_swap_pair_is_reducible_with_two_directions():
    # g preserves the axes, h swaps them: invariant set of size two
    g = np.diag([2.0, 0.5])
    h = np.array([[0.0, 1.0], [-1.0, 0.0]])
    rep = check_strong_irreducibility(GeneratorSet((g, h), 0.0))
    assert not rep.irreducible and len(rep.witness) == 2


def test_anderson_pair_irreducible():
    gens = GeneratorSet.at(make_example("anderson", values=[0.0, 1.0]), 0.5)
    assert check_strong_irreducibility(gens).irreducible
    assert check_noncompact(gens).noncompact


@settings(max_examples=30)
@given(st.floats(-3, 3), st.lists(st.floats(-2, 2), min_size=1, max_size=3))
def test_duplication_invariance(lam, values):
    g = word_matrix(Word(tuple(values)), lam).real
    one = check_strong_irreducibility(GeneratorSet((g,), lam))
    two = check_strong_irreducibility(GeneratorSet((g, g), lam))
    assert one.irreducible == two.irreducible


def test_determinant_guard():
    with pytest.raises(DomainError):
        GeneratorSet((np.diag([2.0, 2.0]),), 0.0)


def test_commutator_trace_polynomial_matches_matrices():
    w0, w1 = Word((0.5, 0.5)), Word((-0.5, -0.5))
    coef = commutator_trace_poly(w0, w1)
    for lam in np.linspace(-3, 3, 13):
        g, h = word_matrix(w0, lam).real, word_matrix(w1, lam).real
        direct = np.trace(g @ h @ np.linalg.inv(g) @ np.linalg.inv(h)) - 2
        assert np.polynomial.polynomial.polyval(lam, coef) == pytest.approx(direct, abs=1e-9)
        assert commutator_trace(w0, w1, lam) == pytest.approx(direct, abs=1e-9)


@pytest.mark.parametrize("w0,w1", [((1.0, -0.5, 0.2), (0.3, 2.0)), ((0.5, 0.5), (-0.5, -0.5))])
def test_conjugated_pair(w0, w1):
    problem = InsertionProblem.from_words(w0, w1)
    D = band_structure(problem.background).discriminant
    for lo, hi in band_structure(problem.background).stability_intervals:
        for lam in np.linspace(lo + 0.05, hi - 0.05, 4):
            cp = conjugated_pair(problem, lam)
            assert abs(np.linalg.det(cp.s) - 1) < 1e-9
            assert abs(np.linalg.det(cp.rotation) - 1) < 1e-9
            assert np.trace(cp.rotation) == pytest.approx(D(lam), abs=1e-8)
            assert np.trace(cp.rotation @ cp.s) == pytest.approx(np.trace(word_matrix(w1, lam)).real, abs=1e-8)


def test_conjugated_pair_period_insertion_is_identity():
    w0 = (1.0, -0.5, 0.2)
    problem = InsertionProblem.from_words(w0, w0)
    lo, hi = band_structure(problem.background).stability_intervals[0]
    cp = conjugated_pair(problem, 0.5 * (lo + hi))
    assert np.allclose(cp.s, np.eye(2), atol=1e-10)


def test_conjugated_pair_edge_guard():
    problem = InsertionProblem.from_words((0.0,), (0.7,))
    with pytest.raises(DomainError):
        conjugated_pair(problem, 2.0 - 1e-4)


@pytest.fixture(scope="module")
def dimer_set():
    model = make_example("dimer", lam=0.5)
    return model, exceptional_set(model, (0.5, 0.5), (-0.5, -0.5), (-3.0, 3.0))


def test_dimer_set_contains_critical_energies(dimer_set):
    _, ex = dimer_set
    assert ex.distance(0.5) < 1e-3 and ex.distance(-0.5) < 1e-3
    e = ex.energies
    assert np.all(np.diff(e) > 1e-8)


def test_entries_recheck_below_threshold(dimer_set):
    model, ex = dimer_set
    for entry in ex:
        res = recheck_residual(entry, model, (0.5, 0.5), (-0.5, -0.5))
        assert res < THRESHOLDS[entry.cls]
        assert entry.residual < THRESHOLDS[entry.cls]


def test_swap_keeps_commuting_elliptic_energies(dimer_set):
    model, ex = dimer_set
    swapped = exceptional_set(model, (-0.5, -0.5), (0.5, 0.5), (-3.0, 3.0))
    group_level = lambda s: {round(e.energy, 6) for e in s if "commuting_elliptic" in (e.cls,) + e.also}
    assert group_level(ex) == group_level(swapped)
    assert group_level(ex) >= {-0.5, 0.5}


def test_anderson_set_and_gamma_positive_away_from_it():
    model = make_example("anderson", values=[0.0, 1.0])
    ex = exceptional_set(model, (0.0,), (1.0,), (-3.0, 4.0))
    assert 0 < len(ex) < 20
    grid = [e for e in np.linspace(-3.0, 4.0, 80) if ex.distance(e) > 1e-2][:50]
    assert len(grid) == 50
    for i, e in enumerate(grid):
        est = estimate_gamma(model, e, 20_000, seed=(100, i))
        assert est.value > 3 * est.stderr


def test_rejects_commuting_and_foreign_words():
    model = make_example("dimer", lam=0.5)
    with pytest.raises(ModelDegenerateError):
        exceptional_set(model, (0.5, 0.5), (0.5, 0.5), (-3, 3))
    with pytest.raises(DegenerateInputError):
        exceptional_set(model, (0.5, 0.5), (1.0,), (-3, 3))
