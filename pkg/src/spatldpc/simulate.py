"""Monte-Carlo BLER/BER/BCE estimation over the BI-AWGN channel.

Every trial draws its information bits and noise from its own counter-based
stream ``trial_rng(seed, t)``, so trial ``t`` is reproducible on its own.
Trials are decoded in fixed-size chunks; the chunk size depends only on the
code, which keeps every trial at the same batch position regardless of how
many worker processes share the chunks.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import multiprocessing as mp
import numpy as np
from scipy.special import expit

from .channel import FILLER_LLR, TrialStreams, depuncture, llr, modulate, snr_db_to_sigma2
from .decoder import DecoderConfig, FactorGraph, build_graph, decode
from .ldpc import Encoder, ParityCheckMatrix, build_encoder, lift, load_base_graph
from .ratematch import PuncturingPattern, RateMatch, identity_pattern, pad_filler


class UnbracketedError(RuntimeError):
    """The sampled BLER curve does not straddle the target."""

    def __init__(self, msg: str, curve=()):
        super().__init__(msg)
        self.curve = list(curve)


@dataclass(frozen=True)
class TrialBudget:
    max_trials: int = 10**6
    max_block_errors: int = 10**5
    stop_sweep_on_zero_errors: bool = True

    def __post_init__(self):
        if self.max_trials < 1 or self.max_block_errors < 1:
            raise ValueError("budget counts must be positive")


@dataclass(frozen=True)
class PointStats:
    snr_db: float
    trials: int
    block_errors: int
    bit_errors: int
    k: int
    bce_sum: float
    bce_sq_sum: float = float("nan")

    @property
    def bler(self) -> float:
        return self.block_errors / self.trials

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.k * self.trials)

    @property
    def mean_bce(self) -> float:
        return self.bce_sum / self.trials

    @property
    def bler_stderr(self) -> float:
        p = self.bler
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def bce_stderr(self) -> float:
        return _mean_stderr(self.bce_sum, self.bce_sq_sum, self.trials)


@dataclass(frozen=True)
class BceStats:
    n_iters: int
    trials: int
    mean_bce: float
    stderr: float


def _mean_stderr(total: float, sq_total: float, n: int) -> float:
    if n < 2:
        return float("nan")
    var = max(0.0, (sq_total - total * total / n) / (n - 1))
    return math.sqrt(var / n)


@dataclass(frozen=True)
class OperatingPoint:
    snr_db: float
    target_bler: float
    bracket: Tuple[float, float]
    stderr: float = float("nan")


@dataclass(frozen=True, eq=False)
class Link:
    """Everything needed to run one trial: code, encoder, graph and pattern."""

    H: ParityCheckMatrix
    graph: FactorGraph = field(repr=False)
    encoder: Encoder = field(repr=False)
    pattern: PuncturingPattern
    k: int

    @property
    def info_positions(self) -> np.ndarray:
        return np.arange(self.k)

    @property
    def chunk(self) -> int:
        # keeps (edges x chunk) message arrays cache-sized, around 3e5 entries
        return int(min(512, max(16, 2 ** int(math.log2(max(1, 3 * 10**5 // max(1, self.graph.n_edges)))))))

    def with_pattern(self, pattern: PuncturingPattern) -> "Link":
        if pattern.n_L != self.pattern.n_L:
            raise ValueError("pattern length does not match the code")
        return Link(self.H, self.graph, self.encoder, pattern, self.k)

    @classmethod
    def from_parity_check(cls, H: ParityCheckMatrix, pattern: Optional[PuncturingPattern] = None,
                          k: Optional[int] = None) -> "Link":
        enc = build_encoder(H)
        return cls(H, build_graph(H), enc, pattern or identity_pattern(H.n_cols),
                   enc.k if k is None else k)


@lru_cache(maxsize=16)
def _code_5g(bg_id: str, L: int):
    H = lift(load_base_graph(bg_id, L), L)
    return H, build_graph(H), build_encoder(H)


def link_for(rm: RateMatch, pattern: PuncturingPattern) -> Link:
    H, g, enc = _code_5g(rm.bg_id, rm.L)
    if pattern.n_L != rm.n_L:
        raise ValueError("pattern length does not match the code")
    return Link(H, g, enc, pattern, rm.k)


# -- per-trial work ----------------------------------------------------------

def llr_to_prob(llrs) -> np.ndarray:
    """Probability that the bit is 1: ``1 / (1 + exp(llr))``."""
    return expit(-np.asarray(llrs, dtype=np.float64))


def bce_terms(llrs, bits) -> np.ndarray:
    """Per-bit cross-entropy in the overflow-free form."""
    l = np.asarray(llrs, dtype=np.float64)
    b = np.asarray(bits, dtype=np.float64)
    if l.shape != b.shape:
        raise ValueError("llrs and bits must have the same shape")
    return np.maximum(0.0, -l) + b * l + np.log1p(np.exp(-np.abs(l)))


def bce(llrs, bits) -> float:
    """Mean binary cross-entropy between bits and output LLRs."""
    t = np.ravel(bce_terms(llrs, bits))
    if t.size == 0:
        raise ValueError("empty input")
    # shifted compensated mean: exact for constant inputs such as the all-zero LLR vector
    return float(t[0] + math.fsum(t - t[0]) / t.size)


def _draw(link: Link, seed: int, start: int, count: int):
    k, n = link.k, link.pattern.n
    bits = np.empty((count, k), dtype=np.uint8)
    z = np.empty((count, n))
    streams = TrialStreams(seed)
    for i in range(count):
        rng = streams(start + i)
        bits[i] = rng.integers(0, 2, k, dtype=np.uint8)
        z[i] = rng.standard_normal(n)
    return bits, z


def _channel_llrs(link: Link, bits: np.ndarray, z: np.ndarray, snr_db: float) -> np.ndarray:
    sigma2 = snr_db_to_sigma2(snr_db)
    c_L = link.encoder.encode_batch(pad_filler(bits, link.encoder.k))
    x = modulate(c_L[:, link.pattern.mask])
    y = x + math.sqrt(sigma2) * z
    return depuncture(llr(y, sigma2), link.pattern)


def _run_chunk(link: Link, cfg: DecoderConfig, snr_db: float, seed: int, start: int, count: int,
               trace_iters: Optional[Sequence[int]] = None, saturated: bool = False):
    """Decode trials ``start .. start+count-1``.

    Returns per-trial ``(block_error, bit_errors, bce)``; with ``trace_iters``
    the BCE column becomes one column per traced iteration and the error
    counts refer to the last traced iteration.
    """
    if saturated:
        bits = np.zeros((count, link.k), dtype=np.uint8)
        ch = np.full((count, link.pattern.n_L), FILLER_LLR)
    else:
        bits, z = _draw(link, seed, start, count)
        ch = _channel_llrs(link, bits, z, snr_db)
    info = link.info_positions
    if trace_iters is None:
        out = decode(link.graph, ch, cfg, info)
        errs = out.hard_bits != bits
        bce_col = bce_terms(out.posterior_llrs, bits).mean(axis=1)
        return errs.any(axis=1), errs.sum(axis=1), bce_col[:, None]
    its = sorted(trace_iters)
    out = decode(link.graph, ch, cfg.replace(n_iters=its[-1]), info, trace_iters=its)
    cols = np.stack([bce_terms(out.trace[i], bits).mean(axis=1) for i in its], axis=1)
    errs = (out.trace[its[-1]] < 0) != bits
    return errs.any(axis=1), errs.sum(axis=1), cols


_WORKER_STATE = {}


def _worker_init(link, cfg, snr_db, seed, trace_iters, saturated):
    _WORKER_STATE["args"] = (link, cfg, snr_db, seed, trace_iters, saturated)


def _worker_run(span):
    link, cfg, snr_db, seed, trace_iters, saturated = _WORKER_STATE["args"]
    return _run_chunk(link, cfg, snr_db, seed, span[0], span[1], trace_iters, saturated)


def _accumulate(link: Link, cfg: DecoderConfig, snr_db: float, budget: TrialBudget, seed: int,
                workers: int = 1, trace_iters=None, saturated: bool = False):
    """Run chunks in trial order until the trial or error budget is exhausted.

    Returns ``(trials, block_errors, bit_errors, bce_sums, bce_sq_sums)``; the stopping
    trial is exact, so the result does not depend on ``workers``.
    """
    chunk = link.chunk
    spans = [(s, min(chunk, budget.max_trials - s)) for s in range(0, budget.max_trials, chunk)]
    blk_total = bit_total = trials = 0
    bce_parts: List[np.ndarray] = []

    def consume(res) -> bool:
        nonlocal blk_total, bit_total, trials
        blk, bits, bce_cols = res
        cum = blk_total + np.cumsum(blk)
        hit = np.flatnonzero(cum >= budget.max_block_errors)
        stop = len(blk) if len(hit) == 0 else hit[0] + 1
        blk_total += int(blk[:stop].sum())
        bit_total += int(bits[:stop].sum())
        trials += stop
        bce_parts.append(bce_cols[:stop])
        return len(hit) > 0

    if workers <= 1:
        for s, c in spans:
            if consume(_run_chunk(link, cfg, snr_db, seed, s, c, trace_iters, saturated)):
                break
    else:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(workers, mp_context=ctx, initializer=_worker_init,
                                 initargs=(link, cfg, snr_db, seed, trace_iters, saturated)) as ex:
            for w in range(0, len(spans), workers):
                done = False
                for res in ex.map(_worker_run, spans[w:w + workers]):
                    if consume(res):
                        done = True
                        break
                if done:
                    break
    allbce = np.concatenate(bce_parts, axis=0)
    # fsum is exact, so the sum is independent of chunk boundaries
    sums = [math.fsum(allbce[:, j]) for j in range(allbce.shape[1])]
    sq = [math.fsum(allbce[:, j] ** 2) for j in range(allbce.shape[1])]
    return trials, blk_total, bit_total, sums, sq


def simulate_point(link: Link, cfg: DecoderConfig, snr_db: float, budget: TrialBudget = TrialBudget(),
                   seed: int = 0, workers: int = 1) -> PointStats:
    trials, blk, bit, sums, sq = _accumulate(link, cfg, snr_db, budget, seed, workers)
    return PointStats(float(snr_db), trials, blk, bit, link.k, sums[0], sq[0])


def sweep(link: Link, cfg: DecoderConfig, snr_grid: Sequence[float], budget: TrialBudget = TrialBudget(),
          seed: int = 0, workers: int = 1, stop_bler: Optional[float] = None) -> List[PointStats]:
    """Simulate an ascending SNR grid.

    Points above the first zero-error point are skipped when the budget asks
    for it; ``stop_bler`` additionally stops after the first point whose
    BLER is at or below that value.
    """
    grid = [float(s) for s in snr_grid]
    if not grid:
        raise ValueError("empty SNR grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("SNR grid must be strictly ascending")
    out = []
    for s in grid:
        pt = simulate_point(link, cfg, s, budget, seed, workers)
        out.append(pt)
        if budget.stop_sweep_on_zero_errors and pt.block_errors == 0:
            break
        if stop_bler is not None and pt.bler <= stop_bler:
            break
    return out


def snr_operating_point(curve: Sequence[PointStats], target_bler: float = 1e-3) -> OperatingPoint:
    """Log-linear interpolation of BLER versus SNR at ``target_bler``.

    Zero-error points are ignored.  The lowest-SNR bracketing pair wins.
    """
    pts = sorted((p for p in curve if p.block_errors > 0), key=lambda p: p.snr_db)
    lt = math.log10(target_bler)
    for j, p in enumerate(pts):
        if p.bler == target_bler:
            return OperatingPoint(p.snr_db, target_bler, (p.snr_db, p.snr_db), _op_stderr(p, p, lt))
        if j + 1 < len(pts):
            q = pts[j + 1]
            if p.bler > target_bler > q.bler:
                l1, l2 = math.log10(p.bler), math.log10(q.bler)
                snr = p.snr_db + (l1 - lt) / (l1 - l2) * (q.snr_db - p.snr_db)
                return OperatingPoint(snr, target_bler, (p.snr_db, q.snr_db), _op_stderr(p, q, lt))
    ext = [(p.snr_db, p.bler) for p in curve]
    lo = max((p.bler for p in curve), default=float("nan"))
    hi = min((p.bler for p in curve), default=float("nan"))
    raise UnbracketedError(f"target BLER {target_bler:g} not bracketed (BLER range {hi:g}..{lo:g})", ext)


def _op_stderr(p: PointStats, q: PointStats, lt: float) -> float:
    """Delta-method standard error of the interpolated SNR."""
    def var_log(pt):
        b = pt.bler
        return (1 - b) / (b * pt.trials) / math.log(10) ** 2
    if p is q:
        # degenerate bracket: no slope available, report the log-BLER spread
        return math.sqrt(var_log(p))
    l1, l2 = math.log10(p.bler), math.log10(q.bler)
    ds = q.snr_db - p.snr_db
    # snr = s1 + (l1 - lt) / (l1 - l2) * ds
    d1 = ds * (lt - l2) / (l1 - l2) ** 2
    d2 = ds * (l1 - lt) / (l1 - l2) ** 2
    return math.sqrt(d1 * d1 * var_log(p) + d2 * d2 * var_log(q))


def bce_vs_iterations(link: Link, cfg: DecoderConfig, snr_db: float, iterations: Sequence[int],
                      budget: TrialBudget = TrialBudget(), seed: int = 0, workers: int = 1,
                      saturated: bool = False) -> List[BceStats]:
    """Mean output BCE after each listed iteration count, from one set of trials.

    ``saturated`` replaces the channel by certain all-zero observations.
    """
    its = [int(i) for i in iterations]
    if not its or any(b <= a for a, b in zip(its, its[1:])) or its[0] < 1:
        raise ValueError("iterations must be ascending positive integers")
    if cfg.early_stop:
        raise ValueError("per-iteration BCE needs early_stop=False")
    trials, _, _, sums, sq = _accumulate(link, cfg, snr_db, budget, seed, workers, its, saturated)
    return [BceStats(i, trials, s / trials, _mean_stderr(s, q, trials)) for i, s, q in zip(its, sums, sq)]


# -- CSV ---------------------------------------------------------------------

SWEEP_HEADER = ["snr_db", "trials", "block_errors", "bit_errors", "bler", "ber", "bce"]
BCE_HEADER = ["n_iters", "bce"]


def format_sweep_csv(points: Sequence[PointStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for p in points:
        w.writerow([f"{p.snr_db:g}", p.trials, p.block_errors, p.bit_errors,
                    repr(p.bler), repr(p.ber), repr(p.mean_bce)])
    return buf.getvalue()


def format_bce_csv(rows: Sequence[BceStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BCE_HEADER)
    for r in rows:
        w.writerow([r.n_iters, repr(r.mean_bce)])
    return buf.getvalue()
