import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from randword.ergodic import Cylinder, cylinder_probability
from randword.errors import ConfigError, UnsupportedModeError
from randword.words import (
    Word,
    WordModel,
    check_nc,
    concat_words,
    expected_length,
    make_example,
    make_rng,
    sample_potential,
    words_commute,
)

small_words = st.lists(st.integers(-3, 3).map(float), min_size=1, max_size=4).map(lambda v: Word(tuple(v)))


def test_concat_basic():
    assert concat_words(Word((1,)), Word((2,))) == Word((1, 2))
    w = concat_words(Word((1, 1)), Word((-1, -1)))
    assert w == Word((1, 1, -1, -1))
    assert w != concat_words(Word((-1, -1)), Word((1, 1)))
    a = Word((0.7,))
    assert concat_words(a, a) == Word((0.7, 0.7))


@given(small_words, small_words)
def test_concat_length_and_entries(w1, w2):
    w = concat_words(w1, w2)
    assert len(w) == len(w1) + len(w2)
    assert w.entries[:len(w1)] == w1.entries


def test_nc_examples():
    rep = check_nc(make_example("dimer", lam=0.5))
    assert rep.holds and set(rep.witness) == {Word((0.5, 0.5)), Word((-0.5, -0.5))}
    assert not check_nc(WordModel(((Word((2.0,)), 1.0),))).holds
    assert not check_nc(WordModel(((Word((1, 1)), 0.5), (Word((1, 1, 1)), 0.5)))).holds


def test_nc_needs_atoms():
    with pytest.raises(UnsupportedModeError):
        check_nc(make_example("anderson", low=-1, high=1))


@given(small_words, small_words)
def test_commute_symmetric(w1, w2):
    assert words_commute(w1, w2) == words_commute(w2, w1)


def test_expected_length():
    assert expected_length(WordModel(((Word((1, 2)), 0.3), (Word((0, 0)), 0.7)))) == 2.0
    assert expected_length(WordModel(((Word((1,)), 0.5), (Word((0, 0)), 0.5)))) == 1.5
    assert expected_length(make_example("anderson", values=[-1, 1])) == 1.0


@given(st.lists(st.tuples(small_words, st.floats(0.01, 1.0)), min_size=1, max_size=5))
def test_weights_and_length_bounds(pairs):
    total = sum(p for _, p in pairs)
    model = WordModel(tuple((w, p / total) for w, p in pairs[:-1]) +
                      ((pairs[-1][0], 1.0 - sum(p / total for _, p in pairs[:-1])),))
    assert abs(sum(p for _, p in model.atoms) - 1.0) < 1e-12
    assert 1.0 <= model.expected_length() <= model.max_length


def test_weight_validation_paths():
    with pytest.raises(ConfigError) as exc:
        WordModel(((Word((1.0,)), 1.5), (Word((2.0,)), -0.5)))
    assert exc.value.path == "atoms[1].weight"
    with pytest.raises(ConfigError):
        WordModel(((Word((1.0,)), 0.5), (Word((2.0,)), 0.4)))
    with pytest.raises(ConfigError):
        WordModel(((Word((1.0, 2.0)), 1.0),), max_length=1)
    with pytest.raises(ConfigError):
        WordModel(((Word((3.0,)), 1.0),), bound=1.0)


def test_make_example_shapes():
    d = make_example("dimer", lam=0.5)
    assert d.atoms == ((Word((0.5, 0.5)), 0.5), (Word((-0.5, -0.5)), 0.5))
    disp = make_example("displacement", f=[1.0], ell=3)
    assert [w for w, _ in disp.atoms] == [Word((1, 0, 0)), Word((0, 1, 0)), Word((0, 0, 1))]
    ss = make_example("single_site", word=[-1, 0, 1], couplings=[0.5, 1.0])
    assert [w for w, _ in ss.atoms] == [Word((-0.5, 0, 0.5)), Word((-1, 0, 1))]
    assert make_example("anderson", values=[0, 1]).max_length == 1


@pytest.mark.parametrize("kind,params", [
    ("dimer", {"lam": -1.0}),
    ("displacement", {"f": [1, 2, 3], "ell": 3}),
    ("nope", {}),
    ("dimer", {"lam": 1.0, "bogus": 2}),
])
def test_make_example_rejects(kind, params):
    with pytest.raises(ConfigError):
        make_example(kind, **params)


def test_anderson_anchor_trivial():
    m = make_example("anderson", values=[-1, 1])
    for s in range(20):
        pw = sample_potential(m, s, (-5, 5))
        assert pw.anchor_offset == 1 and len(pw.anchor_word) == 1
        assert set(pw.values) <= {-1.0, 1.0}


def test_sampling_deterministic():
    m = make_example("dimer", lam=0.5)
    a = sample_potential(m, 42, (-30, 30))
    b = sample_potential(m, 42, (-30, 30))
    assert np.array_equal(a.values, b.values) and a.anchor_offset == b.anchor_offset
    assert len(a.values) == 61


def test_rng_counter_split_independent_of_order():
    a = make_rng(9, 3).random(4)
    make_rng(9, 1).random(100)
    assert np.array_equal(a, make_rng(9, 3).random(4))
    assert not np.array_equal(a, make_rng(9, 4).random(4))


def test_anchor_length_frequency_matches_cylinder_measure():
    model = WordModel(((Word((0.0,)), 0.5), (Word((1.0, 1.0)), 0.5)))
    oracle = cylinder_probability(model, Cylinder(length=2))  # exhaustive cylinder sum
    assert oracle == pytest.approx(2 / 3, abs=1e-15)
    rng = make_rng(2024)
    n = 100_000
    hits = sum(len(model.draw_anchor(rng)[0]) == 2 for _ in range(n))
    se = np.sqrt(oracle * (1 - oracle) / n)
    assert abs(hits / n - oracle) < 3 * se


def test_anchor_chi_square():
    model = WordModel(((Word((0.0,)), 0.2), (Word((1.0, 1.0)), 0.5), (Word((2.0, 2.0, 2.0)), 0.3)))
    nu = model.length_weights()
    L = model.expected_length()
    expected = np.array([j * nu[j - 1] / L for j in (1, 2, 3)])
    rng = make_rng(7)
    n = 100_000
    counts = np.bincount([len(model.draw_anchor(rng)[0]) for _ in range(n)], minlength=4)[1:]
    chi2 = float(((counts - n * expected) ** 2 / (n * expected)).sum())
    assert chi2 < stats.chi2.ppf(0.9973, df=2)


def test_single_length_stream_is_periodic_with_uniform_offset():
    model = WordModel(((Word((1.0, 2.0, 3.0)), 1.0),))
    offs = []
    for s in range(3000):
        pw = sample_potential(model, s, (1, 12))
        k = pw.anchor_offset
        offs.append(k)
        # site 0 is entry k of the word, then the stream continues periodically
        expect = [(1.0, 2.0, 3.0)[(k - 1 + n) % 3] for n in range(1, 13)]
        assert list(pw.values) == expect
    counts = np.bincount(offs, minlength=4)[1:]
    chi2 = float(((counts - 1000) ** 2 / 1000).sum())
    assert chi2 < stats.chi2.ppf(0.9973, df=2)


def test_boundaries_mark_word_starts():
    model = make_example("polymer", w0=[1, 2, 3], w1=[4, 5])
    pw = sample_potential(model, 3, (-20, 40))
    starts = {1.0, 4.0}
    for b in pw.boundaries:
        assert pw[b] in starts
