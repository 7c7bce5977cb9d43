import numpy as np
import pytest

from actmine.background import (EPS, BackgroundModel, fit, ic, matching_rows,
                                update)
from actmine.gcn import ActivationMatrix
from conftest import random_activation


def act_from(matrix, decisions=None, rows_per_graph=1):
    bits = np.asarray(matrix, dtype=np.uint8)
    n = bits.shape[0]
    assert n % rows_per_graph == 0
    m = n // rows_per_graph
    blocks = [bits[i * rows_per_graph:(i + 1) * rows_per_graph]
              for i in range(m)]
    if decisions is None:
        decisions = [i % 2 for i in range(m)]
    return ActivationMatrix.from_graph_bits(1, blocks, decisions,
                                            tuple(f"g{i}" for i in range(m)))


def test_all_zero_matrix():
    bg = fit(act_from(np.zeros((4, 3), dtype=int)))
    assert np.all(bg.probabilities == EPS)


def test_all_one_matrix():
    bg = fit(act_from(np.ones((4, 3), dtype=int)))
    assert np.all(bg.probabilities == 1.0)


def test_identity_2x2_symmetric():
    bg = fit(act_from([[1, 0], [0, 1]]))
    p = bg.probabilities
    assert np.allclose(p.sum(axis=0), [1.0, 1.0], atol=1e-9)
    assert np.allclose(p.sum(axis=1), [1.0, 1.0], atol=1e-9)
    assert np.allclose(p, 0.5, atol=1e-9)


def test_marginals_match_on_random_matrices():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n, k = int(rng.integers(2, 31)), int(rng.integers(2, 9))
        bits = (rng.random((n, k)) < rng.uniform(0.2, 0.8)).astype(np.uint8)
        # avoid degenerate margins
        bits[rng.integers(0, n), :] = np.clip(bits[0], 0, 1)
        rs, cs = bits.sum(1), bits.sum(0)
        if (rs == 0).any() or (rs == k).any() or (cs == 0).any() \
                or (cs == n).any():
            continue
        bg = fit(act_from(bits))
        p = bg.probabilities
        assert np.abs(p.sum(axis=1) - rs).max() < 1e-6
        assert np.abs(p.sum(axis=0) - cs).max() < 1e-6


def test_degenerate_rows_and_columns_pinned():
    bits = np.array([[0, 0, 0],
                     [1, 1, 0],
                     [1, 0, 0],
                     [1, 1, 1]], dtype=np.uint8)
    bg = fit(act_from(bits))
    p = bg.probabilities
    assert np.all(p[0] == EPS)       # all-zero row
    assert np.all(p[3] == 1.0)       # all-one row
    assert np.all(p[:, 0][1:] <= 1.0)
    # remaining marginals still matched
    assert abs(p[1].sum() - 2.0) < 1e-6
    assert abs(p[2].sum() - 1.0) < 1e-6


def test_rows_with_equal_sums_share_probabilities(toy_act):
    bg = fit(toy_act)
    p = bg.probabilities
    rs = toy_act.bits.sum(axis=1)
    for a in range(len(rs)):
        for b in range(a + 1, len(rs)):
            if rs[a] == rs[b]:
                assert np.allclose(p[a], p[b], atol=1e-9)


def test_fit_maximizes_entropy_against_perturbations():
    rng = np.random.default_rng(3)
    bits = (rng.random((6, 4)) < 0.5).astype(np.uint8)
    bits[0] = [1, 0, 1, 0]
    bits[1] = [0, 1, 0, 1]
    rs, cs = bits.sum(1), bits.sum(0)
    if (rs == 0).any() or (rs == 4).any() or (cs == 0).any() or (cs == 6).any():
        pytest.skip("degenerate draw")
    bg = fit(act_from(bits))
    p = bg.probabilities

    def entropy(q):
        q = np.clip(q, 1e-15, 1 - 1e-15)
        return float(-(q * np.log(q) + (1 - q) * np.log(1 - q)).sum())

    base = entropy(p)
    # rectangle perturbations keep both marginal families intact
    for _ in range(1000):
        r1, r2 = rng.choice(6, 2, replace=False)
        c1, c2 = rng.choice(4, 2, replace=False)
        d = rng.uniform(-0.05, 0.05)
        q = p.copy()
        q[r1, c1] += d
        q[r2, c2] += d
        q[r1, c2] -= d
        q[r2, c1] -= d
        if np.any(q <= 0) or np.any(q >= 1) or d == 0:
            continue
        assert entropy(q) < base + 1e-12


def test_ic_worked_example(toy_act, toy_bg_rounded):
    comps = (0, 5)
    class1 = toy_act.decisions == 1
    got = ic(toy_bg_rounded, toy_act, comps, class1)
    assert abs(got - 3.13) < 0.01


def test_ic_zero_cases(toy_act, toy_bg_rounded):
    # empty support: components only active in class-1 graphs
    class0 = toy_act.decisions == 0
    assert ic(toy_bg_rounded, toy_act, (0, 5), class0) == 0.0
    # certain cells carry no information
    certain = BackgroundModel(np.ones_like(toy_bg_rounded.probabilities), 3,
                              0.0)
    assert ic(certain, toy_act, (0, 5), None) == 0.0


def test_ic_additive_over_disjoint_subsets(toy_act, toy_bg_rounded):
    full = ic(toy_bg_rounded, toy_act, (0, 5), None)
    c1 = ic(toy_bg_rounded, toy_act, (0, 5), toy_act.decisions == 1)
    c0 = ic(toy_bg_rounded, toy_act, (0, 5), toy_act.decisions == 0)
    assert abs(full - (c0 + c1)) < 1e-12


def test_update_touches_exactly_matching_cells(toy_act):
    bg = fit(toy_act)
    before = bg.probabilities.copy()
    update(bg, (0, 5), toy_act)
    changed = np.argwhere(bg.probabilities != before)
    cells = {tuple(c) for c in changed}
    assert cells == {(0, 0), (0, 5), (2, 0), (2, 5), (6, 0), (6, 5)}
    assert all(bg.probabilities[c] == 1.0 for c in cells)


def test_update_monotone_and_ic_drops_to_zero(toy_act):
    bg = fit(toy_act)
    before = bg.probabilities.copy()
    update(bg, (0, 5), toy_act)
    assert np.all(bg.probabilities >= before - 1e-15)
    assert ic(bg, toy_act, (0, 5), None) == 0.0


def test_update_empty_rule_no_change(toy_act):
    bg = fit(toy_act)
    before = bg.probabilities.copy()
    update(bg, (), toy_act)
    assert np.array_equal(bg.probabilities, before)


def test_random_fit_residual_field():
    rng = np.random.default_rng(11)
    act = random_activation(rng, 6, 5, 6)
    bg = fit(act)
    assert bg.residual < 1e-9 or bg.residual == 0.0
