from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from replayratio.ratio import LearnRatio, lr_grid, updates_for_step


def counts(ratio, n):
    acc, out = Fraction(0), []
    for _ in range(n):
        c, acc = updates_for_step(ratio, acc)
        out.append(c)
    return out


def test_parse_and_reduce():
    assert LearnRatio.parse("1:4") == LearnRatio(1, 4)
    assert LearnRatio.parse("2:8") == LearnRatio(1, 4)
    assert str(LearnRatio(4, 1)) == "4:1"


@pytest.mark.parametrize("text", ["0:1", "1:0", "-1:2", "abc", "1:2:3", "1.5:1"])
def test_parse_rejects(text):
    with pytest.raises(ValueError):
        LearnRatio.parse(text)


def test_grid_one_to_one():
    assert lr_grid("1:1") == pytest.approx([1.25e-5, 2.5e-5, 5e-5, 1e-4, 2e-4], rel=1e-12)
    assert lr_grid("1:1")[2] == 5e-5


def test_grid_centres_match_reported_optima():
    assert lr_grid("4:1")[2] == pytest.approx(1.25e-5, rel=1e-12)
    grid = lr_grid("1:4")
    assert grid[2] == pytest.approx(2e-4, rel=1e-12)
    assert grid[0] == pytest.approx(5e-5, rel=1e-12)
    assert grid[-1] == pytest.approx(8e-4, rel=1e-12)
    assert grid[3] == pytest.approx(4e-4, rel=1e-12)


def test_grid_ascending():
    g = lr_grid("1:8")
    assert g == sorted(g) and len(g) == 5


@given(st.integers(1, 64))
def test_centre_symmetry(r):
    assert lr_grid(LearnRatio(r, 1))[2] * lr_grid(LearnRatio(1, r))[2] == pytest.approx(
        5e-5 ** 2, rel=1e-12)


def test_integer_ratio_every_step():
    assert counts("4:1", 10) == [4] * 10


def test_every_fourth_step():
    assert counts("1:4", 8) == [0, 0, 0, 1, 0, 0, 0, 1]


def test_one_in_thirty_two():
    assert sum(counts("1:32", 64)) == 2


def test_accumulator_domain():
    with pytest.raises(ValueError):
        updates_for_step("1:2", Fraction(1))


@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 6), st.integers(0, 50))
def test_window_exactness(u, s, n, offset):
    # any window of n*s consecutive steps holds exactly n*u updates
    c = counts(LearnRatio(u, s), offset + n * s)
    r = LearnRatio(u, s)
    assert sum(c[offset:offset + n * s]) == n * r.updates * (s // r.per_steps)
