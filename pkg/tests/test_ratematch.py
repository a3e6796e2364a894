import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spatldpc.ldpc import LIFTING_SETS
from spatldpc.ratematch import (
    BlockArrayError,
    BlockArrays,
    InfeasibleConfigError,
    apply_pattern,
    baseline_first_n_pattern,
    default_pattern,
    excluded_blocks,
    format_pattern,
    identity_pattern,
    info_columns_for_lifting,
    pad_filler,
    parse_pattern,
    pattern_from_block_arrays,
    rate_match,
    read_pattern,
    search_space_size,
    select_base_graph,
    select_lifting_factor,
    to_block_arrays,
    write_pattern,
)


def blocks_with(p, L, status):
    """Block numbers whose transmitted-bit count satisfies ``status``."""
    counts = p.mask.reshape(-1, L).sum(axis=1)
    return {b + 1 for b, c in enumerate(counts) if status(c)}


@pytest.mark.parametrize("k,r,bg", [(64, 0.5, "BG2"), (384, 0.75, "BG1"), (2048, 0.5, "BG2"),
                                    (292, 0.9, "BG2"), (293, 0.9, "BG1"), (4000, 0.25, "BG2"),
                                    (4000, 0.5, "BG1"), (3824, 0.67, "BG2")])
def test_select_base_graph(k, r, bg):
    assert select_base_graph(k, r) == bg


def brute_lifting(k, kb):
    sizes = sorted(z for s in LIFTING_SETS for z in s)
    return min(z for z in sizes if kb * z >= k)


@pytest.mark.parametrize("k,bg,L", [(64, "BG2", 11), (384, "BG1", 18), (2048, "BG2", 208)])
def test_select_lifting_factor(k, bg, L):
    assert select_lifting_factor(k, bg) == L


@given(st.integers(1, 3840), st.sampled_from(["BG1", "BG2"]))
def test_lifting_is_smallest_admissible(k, bg):
    kb = info_columns_for_lifting(k, bg)
    L = select_lifting_factor(k, bg)
    assert kb * L >= k
    assert L == brute_lifting(k, kb)


def test_lifting_too_large():
    with pytest.raises(InfeasibleConfigError):
        select_lifting_factor(10**6, "BG1")


def test_pad_filler():
    assert pad_filler([1, 0, 1], 5).tolist() == [1, 0, 1, 0, 0]
    b = np.array([1, 1, 0], dtype=np.uint8)
    assert np.array_equal(pad_filler(b, 3), b)
    assert pad_filler(np.ones(64), 110)[64:].sum() == 0
    assert pad_filler(np.ones(64), 110).shape == (110,)


def test_rate_match_geometry(rm64):
    assert (rm64.bg_id, rm64.L, rm64.k_L, rm64.n_L, rm64.n_filler) == ("BG2", 11, 110, 572, 46)
    assert rm64.filler_range == (64, 110)


def test_rate_match_infeasible():
    with pytest.raises(InfeasibleConfigError):
        rate_match(64, 64)
    with pytest.raises(InfeasibleConfigError):
        rate_match(64, 600)


def test_default_pattern_blocks(rm64):
    p = default_pattern(rm64)
    L = rm64.L
    assert p.n == 128
    assert blocks_with(p, L, lambda c: c == L) == {3, 4, 5} | set(range(11, 18))
    assert blocks_with(p, L, lambda c: 0 < c < L) == {6, 18}
    assert blocks_with(p, L, lambda c: c == 0) == {1, 2} | set(range(7, 11)) | set(range(19, 53))
    assert p.mask[5 * L:5 * L + 9].all() and not p.mask[5 * L + 9:6 * L].any()
    assert p.mask[17 * L:17 * L + 9].all() and not p.mask[17 * L + 9:18 * L].any()
    assert not (p.mask & p.filler_mask).any()


def test_default_block_arrays(rm64):
    b = default_pattern(rm64).blocks
    assert b.punc == (1, 2, *range(19, 53), 18)
    assert b.tran == (3, 4, 5, *range(11, 18))
    assert b.partial == (18, 9)
    assert (len(b.punc), len(b.tran)) == (37, 10)


def test_default_parity_prefix():
    for k, n in [(64, 128), (384, 512), (100, 300), (2048, 4096)]:
        rm = rate_match(k, n)
        p = default_pattern(rm)
        par = np.flatnonzero(p.mask[rm.k_L:])
        assert par.tolist() == list(range(n - k + 2 * rm.L))
        assert p.n == n


def test_baseline_pattern(rm64):
    p = baseline_first_n_pattern(rm64)
    assert p.n == 128
    assert p.mask[:64].all()
    assert p.mask[110:174].all() and p.mask[174:].sum() == 0
    assert not (p.mask & p.filler_mask).any()


def test_excluded_blocks(rm64):
    assert excluded_blocks(rm64) == {6, 7, 8, 9, 10}
    assert excluded_blocks(rm64, True) == set(range(1, 11))


def test_constrained_block_arrays(rm64):
    b = baseline_first_n_pattern(rm64, True).blocks
    assert b.punc == (*range(17, 53), 16)
    assert b.tran == tuple(range(11, 16))
    assert b.partial == (16, 9)


def test_block_round_trip(rm64):
    for p in (default_pattern(rm64), baseline_first_n_pattern(rm64)):
        b = to_block_arrays(rm64, p)
        q = pattern_from_block_arrays(rm64, b.punc, b.tran, b.partial)
        assert np.array_equal(p.mask, q.mask)


def test_swap_full_blocks_conserves_count(rm64):
    b = default_pattern(rm64).blocks.swap(0, 0)
    p = pattern_from_block_arrays(rm64, b.punc, b.tran, b.partial)
    assert p.n == 128
    assert p.mask[:11].all() and not p.mask[22:33].any()


def test_partial_moves_with_slot(rm64):
    b = default_pattern(rm64).blocks
    b2 = b.swap(len(b.punc) - 1, b.tran.index(17))
    assert b2.partial == (17, 9)
    p = pattern_from_block_arrays(rm64, b2.punc, b2.tran, b2.partial)
    L = rm64.L
    assert p.mask[16 * L:16 * L + 9].all() and not p.mask[16 * L + 9:17 * L].any()
    assert p.mask[17 * L:18 * L].all()
    assert p.n == 128


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 36), st.integers(0, 9)), max_size=12))
def test_random_swaps_keep_invariants(swaps):
    rm = rate_match(64, 128)
    b = default_pattern(rm).blocks
    for i, j in swaps:
        b = b.swap(i, j)
        p = pattern_from_block_arrays(rm, b.punc, b.tran, b.partial)
        assert p.n == rm.n
        assert not (p.mask & p.filler_mask).any()
        assert not set(b.punc) & set(b.tran)
        assert set(b.punc) | set(b.tran) | excluded_blocks(rm) == set(range(1, 53))
        assert b.partial[0] == b.punc[-1]
        back = to_block_arrays(rm, p)
        assert set(back.punc) == set(b.punc) and set(back.tran) == set(b.tran)


def test_block_array_validation(rm64):
    with pytest.raises(BlockArrayError):
        BlockArrays((1, 2), (2, 3))
    with pytest.raises(BlockArrayError):
        BlockArrays((1, 2), (3,), (1, 4))
    b = default_pattern(rm64).blocks
    with pytest.raises(BlockArrayError):
        pattern_from_block_arrays(rm64, b.punc[:-2] + (b.punc[-1],), b.tran, b.partial)
    with pytest.raises(BlockArrayError):
        pattern_from_block_arrays(rm64, b.punc + (6,), b.tran, b.partial)


def test_block_format_round_trip(rm64):
    b = default_pattern(rm64).blocks
    assert BlockArrays.parse(b.format()) == b
    assert BlockArrays.parse("punc=[1] tran=[2] partial=()") == BlockArrays((1,), (2,))


def test_apply_pattern(rm64):
    c = np.arange(10)
    assert np.array_equal(apply_pattern(c, identity_pattern(10)), c)
    p = default_pattern(rm64)
    c_L = p.mask.astype(np.uint8)
    assert apply_pattern(c_L, p).tolist() == [1] * 128
    rng = np.random.default_rng(0)
    c_L = rng.integers(0, 2, rm64.n_L)
    oracle = [c_L[i] for i in range(rm64.n_L) if p.mask[i]]
    assert apply_pattern(c_L, p).tolist() == oracle


def test_pattern_file_round_trip(rm64, tmp_path):
    for p in (default_pattern(rm64), baseline_first_n_pattern(rm64, True)):
        path = tmp_path / "p.txt"
        write_pattern(path, p)
        q = read_pattern(path, rm64)
        assert q == p and q.blocks == p.blocks
        assert q.exclude_systematic == p.exclude_systematic
        assert parse_pattern(format_pattern(p)) == p


def test_pattern_file_errors(rm64):
    with pytest.raises(ValueError):
        parse_pattern("572,128,11,BG2\n1 2 3\n", rm64)
    with pytest.raises(ValueError):
        parse_pattern("572,3,11,BG2\n3 2 1\n")
    with pytest.raises(ValueError):
        parse_pattern("100,3,11,BG1\n1 2 3\n", rm64)


def test_filler_cannot_be_transmitted(rm64):
    text = "572,128,11,BG2\n" + " ".join(map(str, range(22, 150))) + "\n"
    with pytest.raises(ValueError):
        parse_pattern(text, rm64)


def test_search_space(rm64):
    assert search_space_size(rm64) == math.comb(526, 128)
    assert f"{float(search_space_size(rm64)):.2g}" == "2.3e+125"
