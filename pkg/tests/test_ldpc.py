import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spatldpc.ldpc import (
    ExponentMatrix,
    ExponentParseError,
    ParityCheckMatrix,
    build_encoder,
    check_syndrome,
    encode,
    lift,
    load_base_graph,
    load_exponent_matrix,
    syndrome,
)

from conftest import HAMMING_H


def gf2_matmul(A, B):
    return (np.asarray(A, dtype=np.int64) @ np.asarray(B, dtype=np.int64)) % 2


@pytest.mark.parametrize("bg,shape,entries", [("BG1", (46, 68), 316), ("BG2", (42, 52), 197)])
def test_bundled_base_graphs(bg, shape, entries):
    for L in (2, 3, 5, 7, 9, 11, 13, 15):
        em = load_base_graph(bg, L)
        assert (em.n_rows, em.n_cols) == shape
        assert em.n_entries == entries
        assert em.bg_id == bg


def test_load_bg2_for_lift_11():
    em = load_base_graph("BG2", 11)
    assert (em.n_rows, em.n_cols) == (42, 52)
    assert em.lifting_set_id == 5


def test_empty_entry_list():
    em = load_exponent_matrix(b"custom,1,2,0\n")
    assert (em.n_rows, em.n_cols, em.n_entries) == (1, 2, 0)


def test_parse_errors_name_the_line():
    text = "# BG2 table\nBG2,42,52,0\n0,0,1\n0,99,3\n"
    with pytest.raises(ExponentParseError) as e:
        load_exponent_matrix(io.StringIO(text))
    assert e.value.lineno == 4
    assert "col" in str(e.value)


@pytest.mark.parametrize("text,line", [
    ("BG2,42,52\n", 1),
    ("BG1,42,52,0\n", 1),
    ("custom,2,2,0\n0,0,1\n0,0,2\n", 3),
    ("custom,2,2,0\n0,1,-1\n", 2),
    ("custom,2,2,0\n0,x,1\n", 2),
    ("custom,2,2,0\n2,0,0\n", 2),
])
def test_malformed_exponent_csv(text, line):
    with pytest.raises(ExponentParseError) as e:
        load_exponent_matrix(text.encode())
    assert e.value.lineno == line


def test_dims_must_match_bg():
    with pytest.raises(ValueError):
        ExponentMatrix.from_entries(3, 3, [], bg_id="BG2")


def test_lift_size_and_density():
    em = load_base_graph("BG2", 11)
    H = lift(em, 11)
    assert (H.n_rows, H.n_cols) == (462, 572)
    assert H.nnz == 11 * em.n_entries
    assert len(H.layers) == 42


def test_lift_identity_block():
    H = lift(ExponentMatrix.from_entries(1, 1, [(0, 0, 0)]), 3)
    assert np.array_equal(H.to_dense(), np.eye(3, dtype=np.uint8))


@pytest.mark.parametrize("shift", [1, 2, 4, 7])
def test_lift_rotation_oracle(shift):
    L = 3
    H = lift(ExponentMatrix.from_entries(1, 1, [(0, 0, shift)]), L).to_dense()
    x = np.array([5, 7, 11])
    # row i picks column (i + s) mod L, so H x is x rotated left by s
    expect = np.array([x[(i + shift) % L] for i in range(L)])
    assert np.array_equal(H @ x, expect)


def test_lifted_blocks_are_circulant_permutations():
    em = load_base_graph("BG2", 11)
    D = lift(em, 11).to_dense()
    tbl = em.to_dense()
    for r in range(em.n_rows):
        for c in range(em.n_cols):
            blk = D[r * 11:(r + 1) * 11, c * 11:(c + 1) * 11]
            if tbl[r, c] < 0:
                assert not blk.any()
            else:
                assert np.array_equal(blk, np.roll(np.eye(11, dtype=np.uint8), tbl[r, c] % 11, axis=1))


def test_repetition_encoder():
    e = build_encoder(ParityCheckMatrix.from_dense([[1, 1]]))
    assert (e.k, e.n) == (1, 2)
    assert encode(e, [1]).tolist() == [1, 1]
    assert encode(e, [0]).tolist() == [0, 0]


def hamming_codebook():
    # exhaustive: every 7-bit word with zero syndrome
    words = np.array(list(itertools.product([0, 1], repeat=7)))
    return {tuple(w) for w in words if not gf2_matmul(HAMMING_H, w).any()}


def test_hamming_all_codewords():
    H = ParityCheckMatrix.from_dense(HAMMING_H)
    e = build_encoder(H)
    book = hamming_codebook()
    got = {tuple(encode(e, b)) for b in itertools.product([0, 1], repeat=4)}
    assert got == book and len(book) == 16


def test_hamming_matches_dense_generator():
    H = ParityCheckMatrix.from_dense(HAMMING_H)
    e = build_encoder(H)
    # independent generator: the non-identity block of the systematic form
    P = HAMMING_H[:, :4]
    G = np.vstack([np.eye(4, dtype=np.uint8), P])
    b = np.array([1, 0, 0, 0])
    assert np.array_equal(encode(e, b), gf2_matmul(G, b))
    for b in itertools.product([0, 1], repeat=4):
        assert np.array_equal(encode(e, b), gf2_matmul(G, b))


@pytest.mark.parametrize("bg,L,k_L,n_L", [("BG2", 11, 110, 572), ("BG1", 18, 396, 1224)])
def test_5g_encoder_geometry_and_syndrome(bg, L, k_L, n_L):
    H = lift(load_base_graph(bg, L), L)
    e = build_encoder(H)
    assert (e.k, e.n) == (k_L, n_L)
    rng = np.random.default_rng(1)
    b = rng.integers(0, 2, (200, k_L), dtype=np.uint8)
    c = e.encode_batch(b)
    assert not syndrome(H, c).any()
    assert np.array_equal(c[:, :k_L], b)
    assert not encode(e, np.zeros(k_L, dtype=np.uint8)).any()


def test_check_syndrome_single_flip():
    H = ParityCheckMatrix.from_dense(HAMMING_H)
    e = build_encoder(H)
    c = encode(e, [1, 0, 1, 1])
    assert check_syndrome(H, c)
    assert check_syndrome(H, np.zeros(7, dtype=np.uint8))
    for i in range(7):
        bad = c.copy()
        bad[i] ^= 1
        assert not check_syndrome(H, bad)


def test_syndrome_row_xor_oracle():
    em = load_base_graph("BG2", 3)
    H = lift(em, 3)
    D = H.to_dense()
    rng = np.random.default_rng(5)
    for _ in range(1000):
        c = rng.integers(0, 2, H.n_cols)
        rows_ok = all(np.bitwise_xor.reduce(c[D[r] == 1]) == 0 for r in range(H.n_rows))
        assert check_syndrome(H, c) == rows_ok


@st.composite
def small_exponent(draw):
    m = draw(st.integers(1, 4))
    extra = draw(st.integers(1, 4))
    n = m + extra
    cells = draw(st.sets(st.tuples(st.integers(0, m - 1), st.integers(0, extra - 1)), max_size=m * extra))
    entries = [(r, c, draw(st.integers(0, 40))) for r, c in sorted(cells)]
    # identity tail keeps the parity part invertible
    entries += [(r, extra + r, draw(st.integers(0, 40))) for r in range(m)]
    return ExponentMatrix.from_entries(m, n, entries)


@settings(max_examples=60, deadline=None)
@given(small_exponent(), st.integers(1, 7), st.data())
def test_encoder_round_trip_and_linearity(em, L, data):
    H = lift(em, L)
    assert H.nnz == L * em.n_entries
    e = build_encoder(H)
    bits = st.lists(st.integers(0, 1), min_size=e.k, max_size=e.k)
    b1 = np.array(data.draw(bits), dtype=np.uint8)
    b2 = np.array(data.draw(bits), dtype=np.uint8)
    c1, c2 = encode(e, b1), encode(e, b2)
    assert check_syndrome(H, c1)
    assert np.array_equal(encode(e, b1 ^ b2), c1 ^ c2)
    # a zero-syndrome word with systematic prefix b is unique (B invertible)
    assert np.array_equal(c1[:e.k], b1)
