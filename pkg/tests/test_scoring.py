import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scriptorium.scoring import (
    LineScore,
    decide,
    error_reject_curve,
    line_score,
    page_score,
    threshold_grid,
    write_curve_csv,
)


def test_line_score_examples():
    v = np.array([0.2, 0.5, 0.3])
    assert np.array_equal(line_score([v]).score, v)
    assert np.allclose(line_score([[1, 0], [0, 1]]).score, [0.5, 0.5])
    ls = line_score([[0.5, 0.3, 0.2], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]], "L7")
    assert np.allclose(ls.score, [0.9 / 3, 1.4 / 3, 0.7 / 3], atol=1e-12)
    assert np.allclose(ls.score, [0.3, 0.4667, 0.2333], atol=1e-4)
    assert ls.num_patches == 3 and ls.line_id == "L7"


def test_line_score_empty_is_error():
    with pytest.raises(ValueError):
        line_score(np.zeros((0, 3)))


def test_page_score_examples():
    a = LineScore(np.array([1.0, 0.0]), 1)
    b = LineScore(np.array([0.0, 1.0]), 3)
    assert np.allclose(page_score([a, b]), [0.25, 0.75])
    assert np.array_equal(page_score([a]), a.score)
    c = LineScore(np.array([0.3, 0.7]), 4)
    assert np.allclose(page_score([c, c, c]), c.score)
    with pytest.raises(ValueError):
        page_score([])


def test_page_vote_rule():
    lines = [LineScore(np.array(v), 1) for v in ([0.6, 0.4], [0.9, 0.1], [0.2, 0.8])]
    assert np.allclose(page_score(lines, rule="vote"), [2 / 3, 1 / 3])


def simplex(rng, n, k):
    return rng.dirichlet(np.ones(k), size=n)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 7))
def test_aggregation_is_flat_mean(seed, k):
    rng = np.random.default_rng(seed)
    patch_sets = [simplex(rng, rng.integers(1, 9), k) for _ in range(rng.integers(1, 6))]
    lines = [line_score(p) for p in patch_sets]
    flat = np.concatenate(patch_sets)
    page = page_score(lines)
    assert np.allclose(page, flat.sum(0) / len(flat), atol=1e-12, rtol=0)
    assert abs(page.sum() - 1) < 1e-9 and np.all(page >= 0)
    perm = rng.permutation(len(patch_sets[0]))
    assert np.allclose(line_score(patch_sets[0][perm]).score, lines[0].score, atol=1e-15)


def test_decide_examples():
    assert not decide([0.35, 0.33, 0.32], 0.40).accepted
    d = decide([0.55, 0.45], 0.40)
    assert d.accepted and d.label == 0 and d.confidence == 0.55
    assert decide([0.34, 0.33, 0.33], 0.0).accepted
    assert decide([0.5, 0.5], 0.4).label == 0  # lowest index on ties
    assert decide([0.0, 1.0], 1.0).accepted


def test_decide_class_thresholds():
    assert decide([0.5, 0.3, 0.2], 0.4, {0: 0.6}).label is None
    assert decide([0.3, 0.5, 0.2], 0.4, {0: 0.6}).label == 1


@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=7), st.floats(0, 1))
def test_decide_partition(raw, t):
    v = np.array(raw) + 1e-3
    v /= v.sum()
    d = decide(v, t)
    if d.accepted:
        assert d.confidence >= t and d.label == int(np.argmax(v))
    else:
        assert v.max() < t


def curve_oracle(conf, correct, t):
    acc = [c for c, ok in zip(conf, correct) if c >= t]
    wrong = [c for c, ok in zip(conf, correct) if c >= t and not ok]
    return 1 - len(acc) / len(conf), (len(wrong) / len(acc) if acc else 0.0)


def test_error_reject_worked_example():
    # (max prob, correct?) = (0.9, yes), (0.8, no), (0.5, yes), (0.3, no)
    scores = np.array([[0.9, 0.05, 0.03, 0.02], [0.8, 0.1, 0.05, 0.05],
                       [0.5, 0.3, 0.1, 0.1], [0.3, 0.25, 0.25, 0.2]])
    labels = np.array([0, 1, 0, 1])
    rows = error_reject_curve(scores, labels, [0.0, 0.6])
    assert rows[0] == (0.0, 0.0, 0.5)
    assert rows[1][1:] == pytest.approx((0.5, 0.5))
    conf, correct = scores.max(1), scores.argmax(1) == labels
    assert rows[1][1:] == pytest.approx(curve_oracle(conf, correct, 0.6))


def test_error_reject_boundaries():
    scores = np.array([[1.0, 0.0], [0.6, 0.4]])
    rows = error_reject_curve(scores, [0, 1], [0.0, 1.0])
    assert rows[0][1] == 0.0 and rows[0][2] == 0.5
    assert rows[1][1] == 0.5 and rows[1][2] == 0.0
    everything_rejected = error_reject_curve(np.array([[0.5, 0.5]]), [1], [0.9])
    assert everything_rejected == [(0.9, 1.0, 0.0)]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_error_reject_monotone_and_oracle(seed):
    rng = np.random.default_rng(seed)
    scores = simplex(rng, 40, 4)
    labels = rng.integers(0, 4, 40)
    grid = threshold_grid(0.01)
    rows = error_reject_curve(scores, labels, grid)
    rejects = [r for _, r, _ in rows]
    assert all(a <= b for a, b in zip(rejects, rejects[1:]))
    conf, correct = scores.max(1), scores.argmax(1) == labels
    for t, r, e in rows[::7]:
        assert (r, e) == pytest.approx(curve_oracle(conf, correct, t))


def test_grid_and_csv(tmp_path):
    grid = threshold_grid()
    assert len(grid) == 101 and grid[0] == 0.0 and grid[-1] == 1.0
    rows = error_reject_curve(np.array([[0.7, 0.3]]), [0], grid)
    write_curve_csv(rows, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "threshold,reject_rate,error_rate" and len(lines) == 102
