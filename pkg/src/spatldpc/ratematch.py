"""5G NR rate matching and puncturing patterns.

Bits of the lifted codeword ``c_L`` are grouped into blocks of ``L``
consecutive bits, one block per base-graph column.  Block numbers are
1-based throughout (block 1 holds bits ``0 .. L-1``), bit indices 0-based.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .ldpc import BG_DIMS, BG_INFO_COLS, LIFTING_SETS


class InfeasibleConfigError(ValueError):
    pass


class BlockArrayError(ValueError):
    pass


ALL_LIFTING_SIZES = tuple(sorted(z for s in LIFTING_SETS for z in s))


def select_base_graph(k: int, r: float) -> str:
    if k < 1 or not 0 < r < 1:
        raise ValueError("need k >= 1 and 0 < r < 1")
    if k <= 292 or (k <= 3824 and r <= 0.67) or r <= 0.25:
        return "BG2"
    return "BG1"


def info_columns_for_lifting(k: int, bg_id: str) -> int:
    """Number of base-graph columns K_b used when choosing the lifting size."""
    if bg_id == "BG1":
        return 22
    if k > 640:
        return 10
    if k > 560:
        return 9
    if k > 192:
        return 8
    return 6


def select_lifting_factor(k: int, bg_id: str) -> int:
    kb = info_columns_for_lifting(k, bg_id)
    for z in ALL_LIFTING_SIZES:
        if kb * z >= k:
            return z
    raise InfeasibleConfigError(f"k={k} too large for {bg_id}")


@dataclass(frozen=True)
class RateMatch:
    k: int
    n: int
    bg_id: str
    L: int

    def __post_init__(self):
        if self.k_L < self.k:
            raise InfeasibleConfigError(f"k_L={self.k_L} < k={self.k}")
        if self.n > self.n_L - self.n_filler:
            raise InfeasibleConfigError(f"n={self.n} exceeds {self.n_L - self.n_filler} non-filler bits")
        if self.k >= self.n:
            raise InfeasibleConfigError("need k < n")

    @property
    def r(self) -> float:
        return self.k / self.n

    @property
    def k_B(self) -> int:
        return BG_INFO_COLS[self.bg_id]

    @property
    def n_B(self) -> int:
        return BG_DIMS[self.bg_id][1]

    @property
    def k_L(self) -> int:
        return self.L * self.k_B

    @property
    def n_L(self) -> int:
        return self.L * self.n_B

    @property
    def n_filler(self) -> int:
        return self.k_L - self.k

    @property
    def filler_range(self) -> Tuple[int, int]:
        return (self.k, self.k_L)

    @property
    def info_positions(self) -> np.ndarray:
        return np.arange(self.k)

    def block_of(self, bit: int) -> int:
        return bit // self.L + 1


def rate_match(k: int, n: int, bg_id: Optional[str] = None, L: Optional[int] = None) -> RateMatch:
    """Resolve the code geometry for ``k`` information and ``n`` transmitted bits."""
    if k < 1 or n <= k:
        raise InfeasibleConfigError("need 1 <= k < n")
    bg = (bg_id or select_base_graph(k, k / n)).upper()
    if bg not in BG_DIMS:
        raise ValueError(f"unknown base graph {bg_id!r}")
    if L is None:
        L = select_lifting_factor(k, bg)
    return RateMatch(k, n, bg, L)


def pad_filler(b, k_L: int) -> np.ndarray:
    b = np.asarray(b, dtype=np.uint8)
    if b.shape[-1] > k_L:
        raise ValueError(f"{b.shape[-1]} info bits do not fit in k_L={k_L}")
    pad = [(0, 0)] * (b.ndim - 1) + [(0, k_L - b.shape[-1])]
    return np.pad(b, pad)


@dataclass(frozen=True)
class BlockArrays:
    """Block view of a pattern: punctured and transmitted block numbers.

    ``partial`` is ``(block, t)`` when one punctured-array slot transmits only
    its first ``t`` bits; that block is always ``punc[-1]``.
    """

    punc: Tuple[int, ...]
    tran: Tuple[int, ...]
    partial: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if set(self.punc) & set(self.tran):
            raise BlockArrayError("punc and tran overlap")
        if len(set(self.punc)) != len(self.punc) or len(set(self.tran)) != len(self.tran):
            raise BlockArrayError("duplicate block index")
        if self.partial is not None and (not self.punc or self.partial[0] != self.punc[-1]):
            raise BlockArrayError("partial block must occupy the last punc slot")

    def swap(self, i: int, j: int) -> "BlockArrays":
        """Exchange ``punc[i]`` and ``tran[j]``; the partial split stays with the slot."""
        punc, tran = list(self.punc), list(self.tran)
        punc[i], tran[j] = tran[j], punc[i]
        partial = self.partial
        if partial is not None:
            partial = (punc[-1], partial[1])
        return BlockArrays(tuple(punc), tuple(tran), partial)

    def format(self) -> str:
        part = f"({self.partial[0]},{self.partial[1]})" if self.partial else "()"
        return (f"punc=[{','.join(map(str, self.punc))}] "
                f"tran=[{','.join(map(str, self.tran))}] partial={part}")

    @classmethod
    def parse(cls, text: str) -> "BlockArrays":
        m = re.fullmatch(r"\s*punc=\[([\d,\s]*)\]\s+tran=\[([\d,\s]*)\]\s+partial=\(([\d,\s]*)\)\s*", text)
        if not m:
            raise ValueError(f"bad block annotation: {text!r}")
        ints = lambda s: tuple(int(v) for v in s.split(",") if v.strip())
        part = ints(m.group(3))
        return cls(ints(m.group(1)), ints(m.group(2)), part if part else None)


@dataclass(frozen=True, eq=False)
class PuncturingPattern:
    mask: np.ndarray = field(repr=False)
    L: int
    bg_id: str = "custom"
    filler: Tuple[int, int] = (0, 0)
    blocks: Optional[BlockArrays] = None
    exclude_systematic: bool = False

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool).copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        if mask[self.filler[0]:self.filler[1]].any():
            raise ValueError("filler bits cannot be transmitted")

    @property
    def n_L(self) -> int:
        return len(self.mask)

    @property
    def n(self) -> int:
        return int(self.mask.sum())

    @property
    def tx_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def filler_mask(self) -> np.ndarray:
        m = np.zeros(self.n_L, dtype=bool)
        m[self.filler[0]:self.filler[1]] = True
        return m

    def __eq__(self, other):
        return isinstance(other, PuncturingPattern) and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash(self.mask.tobytes())

    def digest(self) -> str:
        import hashlib
        return hashlib.sha1(np.packbits(self.mask).tobytes()).hexdigest()[:12]


def identity_pattern(n: int) -> PuncturingPattern:
    return PuncturingPattern(np.ones(n, dtype=bool), 1)


def _with_blocks(rm: RateMatch, mask: np.ndarray, exclude_systematic: bool = False) -> PuncturingPattern:
    p = PuncturingPattern(mask, rm.L, rm.bg_id, rm.filler_range)
    blocks = to_block_arrays(rm, p, exclude_systematic)
    return PuncturingPattern(mask, rm.L, rm.bg_id, rm.filler_range, blocks, exclude_systematic)


def default_pattern(rm: RateMatch) -> PuncturingPattern:
    k, L, k_L = rm.k, rm.L, rm.k_L
    n_par = rm.n - k + 2 * L
    if k < 2 * L:
        raise InfeasibleConfigError("k smaller than the 2L always-punctured bits")
    if n_par > rm.n_L - k_L:
        raise InfeasibleConfigError(f"need {n_par} parity bits, only {rm.n_L - k_L} available")
    mask = np.zeros(rm.n_L, dtype=bool)
    mask[2 * L:k] = True
    mask[k_L:k_L + n_par] = True
    return _with_blocks(rm, mask)


def baseline_first_n_pattern(rm: RateMatch, exclude_systematic: bool = False) -> PuncturingPattern:
    """Transmit the first ``n`` non-filler bits of ``c_L``."""
    n_par = rm.n - rm.k
    if n_par > rm.n_L - rm.k_L:
        raise InfeasibleConfigError(f"need {n_par} parity bits, only {rm.n_L - rm.k_L} available")
    mask = np.zeros(rm.n_L, dtype=bool)
    mask[:rm.k] = True
    mask[rm.k_L:rm.k_L + n_par] = True
    return _with_blocks(rm, mask, exclude_systematic)


def excluded_blocks(rm: RateMatch, exclude_systematic: bool = False) -> set:
    """Blocks held fixed during block swapping: any block touching filler bits,
    plus every systematic block when ``exclude_systematic``."""
    out = set()
    for b in range(1, rm.n_B + 1):
        lo, hi = (b - 1) * rm.L, b * rm.L
        if lo < rm.k_L and hi > rm.k:
            out.add(b)
        if exclude_systematic and lo < rm.k_L:
            out.add(b)
    return out


def to_block_arrays(rm: RateMatch, p: PuncturingPattern, exclude_systematic: bool = False) -> BlockArrays:
    if p.n_L != rm.n_L:
        raise ValueError("pattern does not match code geometry")
    excl = excluded_blocks(rm, exclude_systematic)
    punc, tran, partial = [], [], None
    for b in range(1, rm.n_B + 1):
        bits = p.mask[(b - 1) * rm.L:b * rm.L]
        if b in excl:
            lo = (b - 1) * rm.L
            fixed = np.array([not (rm.k <= lo + i < rm.k_L) for i in range(rm.L)])
            if not np.array_equal(bits, fixed):
                raise BlockArrayError(f"excluded block {b} deviates from its fixed status")
            continue
        t = int(bits.sum())
        if t == rm.L:
            tran.append(b)
        elif t == 0:
            punc.append(b)
        else:
            if partial is not None:
                raise BlockArrayError("more than one partially transmitted block")
            if not bits[:t].all():
                raise BlockArrayError(f"block {b} is not a transmitted prefix")
            partial = (b, t)
    if partial is not None:
        punc.append(partial[0])
    return BlockArrays(tuple(punc), tuple(tran), partial)


def pattern_from_block_arrays(rm: RateMatch, punc: Sequence[int], tran: Sequence[int],
                              partial: Optional[Tuple[int, int]] = None,
                              exclude_systematic: bool = False) -> PuncturingPattern:
    blocks = BlockArrays(tuple(punc), tuple(tran), tuple(partial) if partial else None)
    excl = excluded_blocks(rm, exclude_systematic)
    listed = set(blocks.punc) | set(blocks.tran)
    if listed & excl:
        raise BlockArrayError(f"excluded blocks listed: {sorted(listed & excl)}")
    if listed | excl != set(range(1, rm.n_B + 1)):
        missing = set(range(1, rm.n_B + 1)) - listed - excl
        raise BlockArrayError(f"blocks not covered: {sorted(missing)}")
    mask = np.zeros(rm.n_L, dtype=bool)
    for b in excl:
        mask[(b - 1) * rm.L:b * rm.L] = True
    mask[rm.k:rm.k_L] = False
    for b in blocks.tran:
        mask[(b - 1) * rm.L:b * rm.L] = True
    if blocks.partial is not None:
        b, t = blocks.partial
        if not 0 < t < rm.L:
            raise BlockArrayError("partial count must be in 1..L-1")
        mask[(b - 1) * rm.L:(b - 1) * rm.L + t] = True
    if mask.sum() != rm.n:
        raise BlockArrayError(f"pattern transmits {int(mask.sum())} bits, need {rm.n}")
    return PuncturingPattern(mask, rm.L, rm.bg_id, rm.filler_range, blocks, exclude_systematic)


def apply_pattern(c_L, p: PuncturingPattern) -> np.ndarray:
    c_L = np.asarray(c_L)
    if c_L.shape[-1] != p.n_L:
        raise ValueError(f"expected length {p.n_L}, got {c_L.shape[-1]}")
    return c_L[..., p.mask]


def search_space_size(rm: RateMatch) -> int:
    """Number of ways to choose ``n`` of the non-filler lifted bits."""
    return math.comb(rm.n_L - rm.n_filler, rm.n)


# -- pattern file ------------------------------------------------------------

def format_pattern(p: PuncturingPattern) -> str:
    lines = [f"{p.n_L},{p.n},{p.L},{p.bg_id}", " ".join(map(str, p.tx_indices))]
    if p.blocks is not None:
        lines.append(p.blocks.format())
    return "\n".join(lines) + "\n"


def parse_pattern(text: str, rm: Optional[RateMatch] = None) -> PuncturingPattern:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError("pattern file needs a header and an index line")
    head = lines[0].split(",")
    if len(head) != 4:
        raise ValueError("header must be n_L,n,L,bg_id")
    n_L, n, L = (int(v) for v in head[:3])
    bg_id = head[3].strip()
    idx = np.array([int(v) for v in lines[1].split()], dtype=np.int64)
    if len(idx) != n or np.any(np.diff(idx) <= 0) or (len(idx) and (idx[0] < 0 or idx[-1] >= n_L)):
        raise ValueError("index line must hold n ascending indices in [0, n_L)")
    mask = np.zeros(n_L, dtype=bool)
    mask[idx] = True
    blocks = BlockArrays.parse(lines[2]) if len(lines) > 2 else None
    filler = (0, 0)
    if rm is not None:
        if (rm.n_L, rm.n, rm.L, rm.bg_id) != (n_L, n, L, bg_id):
            raise ValueError("pattern file does not match the code configuration")
        filler = rm.filler_range
    excl_sys = False
    if blocks is not None and rm is not None:
        excl_sys = bool(excluded_blocks(rm, True) - set(blocks.punc) - set(blocks.tran)
                        - excluded_blocks(rm, False))
    return PuncturingPattern(mask, L, bg_id, filler, blocks, excl_sys)


def write_pattern(path, p: PuncturingPattern) -> None:
    with open(path, "w") as f:
        f.write(format_pattern(p))


def read_pattern(path, rm: Optional[RateMatch] = None) -> PuncturingPattern:
    with open(path) as f:
        return parse_pattern(f.read(), rm)


def describe_blocks(rm: RateMatch, p: PuncturingPattern) -> str:
    """One line per block: transmitted / punctured / filler / partial."""
    out = [f"BG={rm.bg_id} L={rm.L} k={rm.k} n={rm.n} k_L={rm.k_L} n_L={rm.n_L} filler={rm.n_filler}"]
    for b in range(1, rm.n_B + 1):
        lo, hi = (b - 1) * rm.L, b * rm.L
        bits = p.mask[lo:hi]
        fill = sum(1 for i in range(lo, hi) if rm.k <= i < rm.k_L)
        tx = int(bits.sum())
        kind = "sys" if lo < rm.k_L else "par"
        if fill == rm.L:
            status = "filler"
        elif tx == rm.L:
            status = "transmitted"
        elif tx == 0 and fill == 0:
            status = "punctured"
        else:
            status = f"partial tx={tx} punc={rm.L - tx - fill} filler={fill}"
        out.append(f"{b:3d} {kind} {status}")
    return "\n".join(out) + "\n"
