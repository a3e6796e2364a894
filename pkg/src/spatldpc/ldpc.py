"""Quasi-cyclic LDPC codes: exponent matrices, lifting, GF(2) encoding.

An exponent matrix lists the one-entries of a base graph together with the
circulant shift of each entry.  Lifting by a factor ``L`` replaces every
one-entry ``(r, c, s)`` by the ``L x L`` identity rotated so that lifted row
``r*L + i`` has its one in lifted column ``c*L + (i + s) % L``.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

BG_DIMS = {"BG1": (46, 68), "BG2": (42, 52)}
BG_INFO_COLS = {"BG1": 22, "BG2": 10}

# 3GPP lifting-size sets, indexed by lifting set id
LIFTING_SETS = (
    (2, 4, 8, 16, 32, 64, 128, 256),
    (3, 6, 12, 24, 48, 96, 192, 384),
    (5, 10, 20, 40, 80, 160, 320),
    (7, 14, 28, 56, 112, 224),
    (9, 18, 36, 72, 144, 288),
    (11, 22, 44, 88, 176, 352),
    (13, 26, 52, 104, 208),
    (15, 30, 60, 120, 240),
)


class ExponentParseError(ValueError):
    """Malformed exponent-CSV input; ``lineno`` is 1-based."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class SingularMatrixError(ValueError):
    pass


def lifting_set_index(L: int) -> int:
    for i, s in enumerate(LIFTING_SETS):
        if L in s:
            return i
    raise ValueError(f"{L} is not a 5G NR lifting size")


@dataclass(frozen=True)
class ExponentMatrix:
    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    shifts: np.ndarray
    bg_id: str = "custom"
    lifting_set_id: int = 0

    def __post_init__(self):
        if self.bg_id in BG_DIMS and BG_DIMS[self.bg_id] != (self.n_rows, self.n_cols):
            raise ValueError(
                f"{self.bg_id} must be {BG_DIMS[self.bg_id]}, got {(self.n_rows, self.n_cols)}"
            )

    @classmethod
    def from_entries(cls, n_rows: int, n_cols: int, entries: Iterable[Sequence[int]],
                     bg_id: str = "custom", lifting_set_id: int = 0) -> "ExponentMatrix":
        e = np.asarray(list(entries), dtype=np.int64).reshape(-1, 3)
        return cls(n_rows, n_cols, e[:, 0].copy(), e[:, 1].copy(), e[:, 2].copy(),
                   bg_id, lifting_set_id)

    @property
    def n_entries(self) -> int:
        return len(self.rows)

    def to_dense(self) -> np.ndarray:
        """Shift table with -1 marking zero entries."""
        out = np.full((self.n_rows, self.n_cols), -1, dtype=np.int64)
        out[self.rows, self.cols] = self.shifts
        return out


def load_exponent_matrix(source: Union[str, os.PathLike, io.IOBase, bytes]) -> ExponentMatrix:
    """Parse the exponent-CSV format.

    The first non-comment line is ``bg_id,n_rows,n_cols,lifting_set_id``;
    every following line is ``row,col,shift`` with 0-based indices.  ``#``
    starts a comment.  ``source`` may be a path, raw bytes or an open stream.
    """
    if isinstance(source, bytes):
        text = source.decode()
    elif isinstance(source, (str, os.PathLike)):
        with open(source) as f:
            text = f.read()
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode()

    header = None
    entries = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if header is None:
            if len(parts) != 4:
                raise ExponentParseError(lineno, "header must be bg_id,n_rows,n_cols,lifting_set_id")
            bg_id = parts[0].upper() if parts[0].upper() in BG_DIMS else parts[0]
            try:
                n_rows, n_cols, ls = (int(p) for p in parts[1:])
            except ValueError:
                raise ExponentParseError(lineno, "non-integer header field") from None
            if n_rows < 1 or n_cols < 1:
                raise ExponentParseError(lineno, "dimensions must be positive")
            if bg_id in BG_DIMS and BG_DIMS[bg_id] != (n_rows, n_cols):
                raise ExponentParseError(
                    lineno, f"{bg_id} must be {BG_DIMS[bg_id][0]}x{BG_DIMS[bg_id][1]}"
                )
            if not 0 <= ls <= 7:
                raise ExponentParseError(lineno, "lifting_set_id must be in 0..7")
            header = (bg_id, n_rows, n_cols, ls)
            continue
        if len(parts) != 3:
            raise ExponentParseError(lineno, "expected row,col,shift")
        try:
            r, c, s = (int(p) for p in parts)
        except ValueError:
            raise ExponentParseError(lineno, "non-integer entry") from None
        if not (0 <= r < header[1]):
            raise ExponentParseError(lineno, f"row {r} out of range")
        if not (0 <= c < header[2]):
            raise ExponentParseError(lineno, f"col {c} out of range")
        if s < 0:
            raise ExponentParseError(lineno, "negative shift")
        if (r, c) in seen:
            raise ExponentParseError(lineno, f"duplicate entry ({r}, {c})")
        seen.add((r, c))
        entries.append((r, c, s))
    if header is None:
        raise ExponentParseError(0, "missing header")
    bg_id, n_rows, n_cols, ls = header
    return ExponentMatrix.from_entries(n_rows, n_cols, entries, bg_id, ls)


def load_base_graph(bg_id: str, L: int) -> ExponentMatrix:
    """Bundled 3GPP shift table of ``bg_id`` for the lifting set containing ``L``."""
    bg = bg_id.upper()
    if bg not in BG_DIMS:
        raise ValueError(f"unknown base graph {bg_id!r}")
    ls = lifting_set_index(L)
    ref = resources.files("spatldpc") / "data" / f"{bg.lower()}_ls{ls}.csv"
    return load_exponent_matrix(ref.read_bytes())


@dataclass(frozen=True, eq=False)
class ParityCheckMatrix:
    """Sparse binary parity-check matrix.

    ``layers`` partitions the check rows into groups of orthogonal rows
    (the block-rows of a lifted base graph).
    """

    matrix: sp.csr_matrix
    layers: tuple
    lifting: int = 1
    base: Optional[ExponentMatrix] = None

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray().astype(np.uint8)

    @classmethod
    def from_dense(cls, H, layers: Optional[Sequence[Sequence[int]]] = None) -> "ParityCheckMatrix":
        """Wrap a dense 0/1 matrix; by default every row is its own layer."""
        H = np.asarray(H, dtype=np.uint8) & 1
        if H.ndim != 2:
            raise ValueError("H must be 2-D")
        if layers is None:
            layers = [[i] for i in range(H.shape[0])]
        layers = tuple(np.asarray(g, dtype=np.int64) for g in layers)
        return cls(sp.csr_matrix(H, dtype=np.uint8), layers)


def lift(em: ExponentMatrix, L: int) -> ParityCheckMatrix:
    if L < 1:
        raise ValueError("lifting factor must be >= 1")
    i = np.arange(L)
    s = em.shifts % L
    rows = (em.rows[:, None] * L + i[None, :]).ravel()
    cols = (em.cols[:, None] * L + (i[None, :] + s[:, None]) % L).ravel()
    data = np.ones(len(rows), dtype=np.uint8)
    H = sp.csr_matrix((data, (rows, cols)), shape=(em.n_rows * L, em.n_cols * L))
    H.sort_indices()
    layers = tuple(np.arange(r * L, (r + 1) * L) for r in range(em.n_rows))
    return ParityCheckMatrix(H, layers, L, em)


def _gf2_eliminate(B: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Solve ``B X = A`` over GF(2) for square ``B`` with bit-packed rows."""
    m = B.shape[0]
    width = m + A.shape[1]
    aug = np.zeros((m, width), dtype=np.uint8)
    aug[:, :m] = B
    aug[:, m:] = A
    words = (width + 63) // 64
    packed = np.zeros((m, words * 8), dtype=np.uint8)
    packed[:, : (width + 7) // 8] = np.packbits(aug, axis=1, bitorder="little")
    packed = packed.view(np.uint64)
    for col in range(m):
        w, b = divmod(col, 64)
        bit = np.uint64(1) << np.uint64(b)
        colbits = (packed[:, w] & bit) != 0
        cand = np.flatnonzero(colbits[col:])
        if len(cand) == 0:
            raise SingularMatrixError("parity part of H is singular over GF(2)")
        piv = col + cand[0]
        if piv != col:
            packed[[col, piv]] = packed[[piv, col]]
            colbits[[col, piv]] = colbits[[piv, col]]
        colbits[col] = False
        hit = np.flatnonzero(colbits)
        if len(hit):
            packed[hit] ^= packed[col]
    out = np.unpackbits(packed.view(np.uint8), axis=1, count=width, bitorder="little")
    return out[:, m:]


@dataclass(frozen=True, eq=False)
class Encoder:
    """Systematic encoder ``c = [b; P b]`` for ``H = [A | B]``."""

    k: int
    n: int
    parity_map: np.ndarray = field(repr=False)  # (n - k) x k, uint8

    def encode(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.uint8)
        if b.shape[-1] != self.k:
            raise ValueError(f"expected {self.k} info bits, got {b.shape[-1]}")
        return self.encode_batch(b.reshape(1, -1))[0] if b.ndim == 1 else self.encode_batch(b)

    def encode_batch(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=np.uint8)
        if b.ndim != 2 or b.shape[1] != self.k:
            raise ValueError(f"expected shape (batch, {self.k})")
        # float32 matmul is exact while k < 2**24
        p = (b.astype(np.float32) @ self._pmap_t).astype(np.int64) & 1
        return np.concatenate([b, p.astype(np.uint8)], axis=1)

    @property
    def _pmap_t(self) -> np.ndarray:
        cached = self.__dict__.get("_pt")
        if cached is None:
            cached = np.ascontiguousarray(self.parity_map.T, dtype=np.float32)
            object.__setattr__(self, "_pt", cached)
        return cached

    def generator_matrix(self) -> np.ndarray:
        """Dense ``n x k`` generator ``[I; P]`` (small codes only)."""
        return np.vstack([np.eye(self.k, dtype=np.uint8), self.parity_map])


def build_encoder(H: ParityCheckMatrix) -> Encoder:
    m, n = H.n_rows, H.n_cols
    k = n - m
    if k < 0:
        raise ValueError("H has more rows than columns")
    dense = H.matrix.toarray().astype(np.uint8)
    A, B = dense[:, :k], dense[:, k:]
    return Encoder(k, n, _gf2_eliminate(B, A))


def encode(e: Encoder, b_L) -> np.ndarray:
    return e.encode(b_L)


def syndrome(H: ParityCheckMatrix, c) -> np.ndarray:
    c = np.asarray(c)
    if c.shape[-1] != H.n_cols:
        raise ValueError(f"expected length {H.n_cols}, got {c.shape[-1]}")
    return (H.matrix @ c.astype(np.int64).T).T & 1


def check_syndrome(H: ParityCheckMatrix, c) -> bool:
    return not syndrome(H, c).any()
