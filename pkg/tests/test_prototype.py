"""Prototype matrix operators: sampling, update, capping, inversion, I/O."""

from __future__ import annotations

import numpy as np
import pytest

from ased.prototype import (
    CapConfig,
    Prototype,
    argmax_architecture,
    cap_normalize,
    from_text,
    grow,
    invert_full,
    invert_partial,
    is_fully_converged,
    load,
    mean_l2_norm,
    row_l2_norm,
    sample,
    save,
    to_text,
    uniform,
    update_from_selection,
)


def test_uniform_rows_and_norm():
    p = uniform(5, 10)
    assert p.probs.shape == (5, 10)
    assert np.allclose(p.probs, 0.1)
    assert row_l2_norm(p, 0) == pytest.approx(1 / np.sqrt(10))
    assert mean_l2_norm(p) == pytest.approx(0.31623, abs=1e-5)


def test_prototype_validation():
    with pytest.raises(ValueError):
        Prototype(np.array([[0.5, 0.6]]))          # sum > 1
    with pytest.raises(ValueError):
        Prototype(np.array([[1.2, -0.2]]))         # out of [0, 1]
    with pytest.raises(ValueError):
        Prototype(np.array([0.5, 0.5]))            # not 2-D
    with pytest.raises(ValueError):
        Prototype(np.ones((0, 4)))                 # no rows


def test_prototype_is_immutable():
    p = uniform(2, 4)
    with pytest.raises(ValueError):
        p.probs[0, 0] = 0.9


def test_sample_is_seed_deterministic():
    p = uniform(4, 6)
    a = sample(p, 50, np.random.default_rng(123))
    b = sample(p, 50, np.random.default_rng(123))
    c = sample(p, 50, np.random.default_rng(124))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (50, 4)
    assert a.min() >= 0 and a.max() < 6


def test_sample_respects_zero_probability():
    p = Prototype(np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5]]))
    draws = sample(p, 400, np.random.default_rng(0))
    assert set(draws[:, 0]) == {1}
    assert set(draws[:, 1]) <= {0, 2}


def test_sample_frequencies_track_distribution():
    p = Prototype(np.array([[0.7, 0.2, 0.1]]))
    draws = sample(p, 20000, np.random.default_rng(5))
    freq = np.bincount(draws[:, 0], minlength=3) / 20000
    assert np.allclose(freq, [0.7, 0.2, 0.1], atol=0.02)


def test_update_matches_brute_force_counting():
    rng = np.random.default_rng(9)
    for _ in range(50):
        n, l, k = rng.integers(1, 7), rng.integers(2, 9), rng.integers(1, 11)
        p = uniform(n, l)
        sel = rng.integers(0, l, size=(k, n))
        updated = update_from_selection(p, sel)
        for i in range(n):
            for j in range(l):
                expect = sum(1 for row in sel if row[i] == j) / k
                assert updated.probs[i, j] == expect


def test_update_clears_fresh_rows():
    p = grow(uniform(3, 4), 2)
    assert p.fresh_rows == {3, 4}
    sel = np.zeros((4, 5), dtype=int)
    assert update_from_selection(p, sel).fresh_rows == frozenset()


def test_update_rejects_bad_selection():
    p = uniform(3, 4)
    with pytest.raises(ValueError):
        update_from_selection(p, np.zeros((0, 3), dtype=int))
    with pytest.raises(ValueError):
        update_from_selection(p, np.zeros((2, 4), dtype=int))   # wrong depth
    with pytest.raises(ValueError):
        update_from_selection(p, np.full((2, 3), 4))            # index out of range


def test_grow_appends_fresh_uniform_rows():
    p = uniform(3, 5)
    g = grow(p, 2)
    assert g.probs.shape == (5, 5)
    assert np.allclose(g.probs[3:], 0.2)
    assert g.fresh_rows == {3, 4}
    assert np.array_equal(g.probs[:3], p.probs)
    assert grow(p, 0) is p
    gg = grow(g, 1)
    assert gg.fresh_rows == {3, 4, 5}


def test_cap_config_ties_floor_to_ceiling():
    cap = CapConfig.for_library(0.9, 10)
    assert cap.p_min == pytest.approx((1 - 0.9) / 9)
    with pytest.raises(ValueError):
        CapConfig.for_library(0.05, 10)    # below 1/|L|
    with pytest.raises(ValueError):
        CapConfig.for_library(1.0, 10)
    with pytest.raises(ValueError):
        CapConfig(p_max=0.9, p_min=0.0)
    with pytest.raises(ValueError):
        cap.check_against(5)               # floor inconsistent for that size


def test_cap_normalize_one_hot_worked_example():
    cap = CapConfig.for_library(0.9, 10)
    row = np.zeros(10)
    row[3] = 1.0
    p = Prototype(row[None, :])
    capped = cap_normalize(p, cap)
    assert capped.probs[0, 3] == pytest.approx(0.9, abs=1e-12)
    others = np.delete(capped.probs[0], 3)
    assert np.allclose(others, 1 / 90, atol=1e-12)
    assert capped.probs[0].sum() == pytest.approx(1.0, abs=1e-12)


def test_cap_normalize_leaves_interior_rows_alone():
    cap = CapConfig.for_library(0.9, 4)
    p = Prototype(np.array([[0.4, 0.3, 0.2, 0.1]]))
    assert np.allclose(cap_normalize(p, cap).probs, p.probs)


def test_cap_normalize_is_idempotent():
    cap = CapConfig.for_library(0.9, 6)
    rng = np.random.default_rng(11)
    raw = rng.random((8, 6))
    p = Prototype(raw / raw.sum(axis=1, keepdims=True))
    once = cap_normalize(p, cap)
    twice = cap_normalize(once, cap)
    assert np.allclose(once.probs, twice.probs, atol=1e-12)


def test_invert_full_worked_example():
    # Complementing [0.85, 0.15] gives [0.15, 0.85]; both entries already
    # respect the caps, so normalization leaves them untouched.
    cap = CapConfig.for_library(0.9, 2)
    p = Prototype(np.array([[0.85, 0.15]]))
    inv = invert_full(p, cap)
    assert inv.probs[0] == pytest.approx([0.15, 0.85], abs=1e-12)


def test_invert_full_uniform_is_fixed_point():
    cap = CapConfig.for_library(0.9, 10)
    p = uniform(4, 10)
    assert np.allclose(invert_full(p, cap).probs, 0.1, atol=1e-12)


def test_invert_full_moves_argmax_off_converged_choice():
    cap = CapConfig.for_library(0.9, 10)
    row = np.full(10, 1 / 90)
    row[7] = 0.9
    p = Prototype(np.tile(row, (3, 1)))
    inv = invert_full(p, cap)
    assert all(i != 7 for i in argmax_architecture(inv))
    assert np.all(np.abs(inv.probs.sum(axis=1) - 1) < 1e-12)
    assert inv.probs.min() >= cap.p_min - 1e-12


def test_invert_partial_touches_floor_sqrt_n_most_converged_rows():
    cap = CapConfig.for_library(0.9, 4)
    rows = [
        [0.97, 0.01, 0.01, 0.01],   # most converged
        [0.25, 0.25, 0.25, 0.25],
        [0.70, 0.10, 0.10, 0.10],   # second most converged
        [0.40, 0.20, 0.20, 0.20],
        [0.30, 0.30, 0.20, 0.20],
    ]
    p = Prototype(np.array(rows))
    inv = invert_partial(p, cap)     # floor(sqrt(5)) = 2 rows inverted
    changed = [i for i in range(5) if not np.allclose(inv.probs[i], p.probs[i])]
    assert changed == [0, 2]
    assert np.argmax(inv.probs[0]) != 0


def test_invert_partial_breaks_norm_ties_towards_lower_index():
    cap = CapConfig.for_library(0.9, 4)
    row = [0.7, 0.1, 0.1, 0.1]
    p = Prototype(np.array([row, row, row, row]))   # floor(sqrt(4)) = 2
    inv = invert_partial(p, cap)
    changed = [i for i in range(4) if not np.allclose(inv.probs[i], p.probs[i])]
    assert changed == [0, 1]


def test_norm_bounds_and_fresh_exclusion():
    one_hot = np.zeros((1, 9))
    one_hot[0, 2] = 1.0
    assert row_l2_norm(Prototype(one_hot), 0) == pytest.approx(1.0)
    p = grow(Prototype(one_hot), 3)
    assert mean_l2_norm(p, exclude_fresh=True) == pytest.approx(1.0)
    # One converged row (norm 1) plus three uniform rows (norm 1/3 each).
    assert mean_l2_norm(p, exclude_fresh=False) == pytest.approx(0.5)
    with pytest.raises(IndexError):
        row_l2_norm(p, 9)


def test_mean_norm_needs_surviving_rows():
    p = Prototype(np.full((2, 4), 0.25), fresh_rows={0, 1})
    with pytest.raises(ValueError):
        mean_l2_norm(p, exclude_fresh=True)
    assert mean_l2_norm(p, exclude_fresh=False) == pytest.approx(0.5)


def test_is_fully_converged():
    assert not is_fully_converged(uniform(2, 4))
    eye = np.zeros((3, 4))
    eye[[0, 1, 2], [1, 3, 0]] = 1.0
    assert is_fully_converged(Prototype(eye))


def test_argmax_architecture_prefers_lowest_index_on_ties():
    p = Prototype(np.array([[0.4, 0.4, 0.2], [0.1, 0.2, 0.7]]))
    assert argmax_architecture(p) == (0, 2)


def test_text_round_trip_is_exact():
    rng = np.random.default_rng(13)
    raw = rng.random((6, 5))
    p = Prototype(raw / raw.sum(axis=1, keepdims=True))
    tokens = ("id", "c1", "c3", "m2", "a3")
    text = to_text(p, tokens)
    q, parsed_tokens = from_text(text)
    assert parsed_tokens == tokens
    assert np.array_equal(q.probs, p.probs)   # repr round-trips exactly


def test_from_text_rejects_malformed_snapshots():
    with pytest.raises(ValueError):
        from_text("")
    with pytest.raises(ValueError):
        from_text("2 3 id c1\n0.5 0.5 0.0\n")            # token count mismatch
    with pytest.raises(ValueError):
        from_text("1 2 id c1\n0.5 0.5\n0.5 0.5\n")       # extra row
    with pytest.raises(ValueError):
        from_text("1 2 id c1\n0.9 0.9\n")                # row sum violation


def test_save_load_round_trip(tmp_path):
    p = uniform(3, 4)
    path = tmp_path / "proto.txt"
    save(p, ("id", "c3", "m2", "a3"), path)
    q, tokens = load(path)
    assert tokens == ("id", "c3", "m2", "a3")
    assert np.array_equal(q.probs, p.probs)


def test_random_operation_sequences_preserve_row_stochasticity():
    # Smaller sibling of the acceptance fuzz: every operator keeps rows
    # inside [0, 1] and summing to one.
    rng = np.random.default_rng(99)
    cap = CapConfig.for_library(0.9, 6)
    p = uniform(4, 6)
    for _ in range(2000):
        op = rng.integers(0, 5)
        if op == 0:
            sel = rng.integers(0, 6, size=(rng.integers(1, 9), p.n_layers))
            p = update_from_selection(p, sel)
        elif op == 1 and p.n_layers < 24:
            p = grow(p, int(rng.integers(0, 3)))
        elif op == 2:
            p = cap_normalize(p, cap)
        elif op == 3:
            p = invert_full(p, cap)
        else:
            p = invert_partial(p, cap)
        assert p.probs.min() >= 0.0
        assert p.probs.max() <= 1.0
        assert np.max(np.abs(p.probs.sum(axis=1) - 1.0)) < 1e-9
