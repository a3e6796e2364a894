"""SPAT: greedy puncturing-pattern optimization by block swaps.

Every punctured-array slot ``i`` is tried against every transmitted-array
slot ``j``.  Each temporary pattern is scored by its SNR operating point,
and the best swap of slot ``i`` is kept when it beats the incumbent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
from scipy.stats import norm

from .decoder import DecoderConfig
from .ratematch import (
    BlockArrays,
    PuncturingPattern,
    RateMatch,
    pattern_from_block_arrays,
    to_block_arrays,
)
from .simulate import (
    Link,
    OperatingPoint,
    TrialBudget,
    UnbracketedError,
    link_for,
    snr_operating_point,
    sweep,
)

LOG_HEADER = ["step", "punc_slot", "tran_slot", "committed", "snr_op_db", "pattern_hash"]


class ObjectiveError(RuntimeError):
    """The operating point could not be bracketed within the widening cap."""


class SpatAborted(RuntimeError):
    def __init__(self, msg: str, state: "SpatState"):
        super().__init__(msg)
        self.state = state


@dataclass(frozen=True)
class SpatConfig:
    """Optimizer settings.  Defaults are the desk-scale budget;
    :meth:`paper_scale` gives 10^6 trials, 10^5 errors and target 10^-3."""

    decoder: DecoderConfig = DecoderConfig()
    target_bler: float = 1e-2
    budget: TrialBudget = TrialBudget(10**5, 10**3)
    grid_step: float = 0.25
    widen_step: float = 1.0
    max_widen: int = 10
    start_snr_db: Optional[float] = None
    constrain_to_parity: bool = False
    master_seed: int = 0
    reevaluate_incumbent: bool = False
    epsilon: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.target_bler < 1:
            raise ValueError("target_bler must lie in (0, 1)")
        if self.target_bler < 30 / self.budget.max_trials:
            raise ValueError(
                f"target BLER {self.target_bler:g} is not estimable with "
                f"{self.budget.max_trials} trials (need >= {30 / self.budget.max_trials:g})"
            )
        if self.grid_step <= 0 or self.widen_step < self.grid_step:
            raise ValueError("need 0 < grid_step <= widen_step")
        if self.max_widen < 0 or self.epsilon < 0:
            raise ValueError("max_widen and epsilon must be non-negative")

    @classmethod
    def paper_scale(cls, **kw) -> "SpatConfig":
        kw.setdefault("target_bler", 1e-3)
        kw.setdefault("budget", TrialBudget(10**6, 10**5))
        return cls(**kw)


def rate_match_of(p: PuncturingPattern) -> RateMatch:
    """Recover the code geometry a 5G pattern was built for."""
    if p.bg_id not in ("BG1", "BG2"):
        raise ValueError("pattern does not carry 5G geometry")
    return RateMatch(p.filler[0], p.n, p.bg_id, p.L)


def uncoded_start_snr(grid_step: float = 0.25, ber: float = 0.1) -> float:
    """Coarse sweep start: the SNR at which uncoded BPSK reaches ``ber``,
    rounded down to the grid."""
    snr_db = 10 * math.log10(norm.isf(ber) ** 2)
    return math.floor(snr_db / grid_step) * grid_step


def _grid(lo: float, hi: float, step: float) -> List[float]:
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 10) for i in range(n)]


def objective(pattern: PuncturingPattern, cfg: SpatConfig, link: Optional[Link] = None,
              start_snr_db: Optional[float] = None, curve_out: Optional[list] = None) -> OperatingPoint:
    """SNR operating point of ``pattern`` at ``cfg.target_bler``.

    The grid holds multiples of ``grid_step``.  Sampling starts with a
    ``widen_step`` window at the start SNR and ascends until the first
    point at or below target.  It widens downward when even the lowest
    sample meets the target, upward when none does.  A zero-error point
    right after the crossing is refined by halving the step.
    """
    if link is None:
        link = link_for(rate_match_of(pattern), pattern)
    elif link.pattern != pattern:
        link = link.with_pattern(pattern)
    step, target = cfg.grid_step, cfg.target_bler
    s0 = start_snr_db if start_snr_db is not None else cfg.start_snr_db
    if s0 is None:
        s0 = uncoded_start_snr(step)
    lo = math.floor(s0 / step + 1e-9) * step
    curve = {}

    def run(grid):
        grid = [s for s in grid if s not in curve]
        if grid:
            for p in sweep(link, cfg.decoder, grid, cfg.budget, cfg.master_seed, cfg.workers,
                           stop_bler=target):
                curve[p.snr_db] = p

    run(_grid(lo, lo + cfg.widen_step, step))
    widened = refined = 0
    while True:
        pts = [curve[s] for s in sorted(curve)]
        if pts[0].bler < target:
            if widened == cfg.max_widen:
                break
            widened += 1
            run(_grid(lo - cfg.widen_step, lo, step))
            lo -= cfg.widen_step
            continue
        if all(p.bler > target for p in pts):
            if widened == cfg.max_widen:
                break
            widened += 1
            top = pts[-1].snr_db + step
            run(_grid(top, top + cfg.widen_step, step))
            continue
        try:
            op = snr_operating_point(pts, target)
            if curve_out is not None:
                curve_out.extend(pts)
            return op
        except UnbracketedError:
            # the first point at or below target recorded no errors
            if refined == 4:
                break
            refined += 1
            j = next(i for i, p in enumerate(pts) if p.bler <= target)
            a, b = pts[j - 1].snr_db, pts[j].snr_db
            run([round((a + b) / 2, 10)])
    if curve_out is not None:
        curve_out.extend(curve[s] for s in sorted(curve))
    ext = [(s, curve[s].bler) for s in sorted(curve)]
    raise ObjectiveError(f"target BLER {target:g} unbracketed after widening: {ext}")


def exploration_count(pattern: Union[PuncturingPattern, BlockArrays]) -> int:
    blocks = pattern.blocks if isinstance(pattern, PuncturingPattern) else pattern
    if blocks is None:
        raise ValueError("pattern has no block arrays")
    return len(blocks.punc) * len(blocks.tran) + 1


@dataclass(frozen=True)
class LogRow:
    step: int
    punc_slot: int
    tran_slot: int  # 0 marks the incumbent
    committed: bool
    snr_op_db: float
    pattern_hash: str


@dataclass
class SpatState:
    blocks: BlockArrays
    best: Optional[OperatingPoint] = None
    log: List[LogRow] = field(default_factory=list)
    committed_ops: List[float] = field(default_factory=list)

    @property
    def punc_idx(self):
        return self.blocks.punc

    @property
    def tran_idx(self):
        return self.blocks.tran

    @property
    def partial(self):
        return self.blocks.partial

    @property
    def evaluations(self):
        return [(r.pattern_hash, r.snr_op_db) for r in self.log]


ObjectiveFn = Callable[[PuncturingPattern], Union[OperatingPoint, float]]


def _as_op(v, target) -> OperatingPoint:
    if isinstance(v, OperatingPoint):
        return v
    return OperatingPoint(float(v), target, (float(v), float(v)))


def spat_optimize(init: PuncturingPattern, cfg: SpatConfig, objective_fn: Optional[ObjectiveFn] = None,
                  on_row: Optional[Callable[[LogRow], None]] = None):
    """Run the greedy block-swap search from ``init``.

    ``objective_fn`` replaces the Monte-Carlo objective (stubs, dry runs).
    ``on_row`` receives each log row as soon as its outer slot finishes.
    Returns ``(pattern, state)``.
    """
    rm = rate_match_of(init)
    excl_sys = cfg.constrain_to_parity
    if excl_sys and not init.mask[:rm.k].all():
        raise ValueError("constrained mode needs an initial pattern that transmits all information bits")
    blocks = to_block_arrays(rm, init, excl_sys)
    state = SpatState(blocks)

    if objective_fn is None:
        link = link_for(rm, init)

        def objective_fn(p):
            # candidates start at the incumbent's lower bracket point
            start = state.best.bracket[0] if state.best is not None else None
            return objective(p, cfg, link, start_snr_db=start)

    def make(b: BlockArrays) -> PuncturingPattern:
        return pattern_from_block_arrays(rm, b.punc, b.tran, b.partial, excl_sys)

    def evaluate(p):
        try:
            return _as_op(objective_fn(p), cfg.target_bler)
        except (ObjectiveError, UnbracketedError) as e:
            raise SpatAborted(str(e), state) from e

    step = 0
    for i in range(1, len(blocks.punc) + 1):
        rows = []
        if i == 1 or cfg.reevaluate_incumbent:
            current = make(state.blocks)
            step += 1
            state.best = evaluate(current)
            rows.append([step, i, 0, False, state.best.snr_db, current.digest()])
            if i == 1:
                state.committed_ops.append(state.best.snr_db)
        ops = [state.best]
        cands = []
        for j in range(1, len(state.blocks.tran) + 1):
            tmp = state.blocks.swap(i - 1, j - 1)
            p = make(tmp)
            step += 1
            try:
                op = evaluate(p)
            except SpatAborted:
                for r in rows:
                    _emit(state, LogRow(*r), on_row)
                raise
            ops.append(op)
            cands.append(tmp)
            rows.append([step, i, j, False, op.snr_db, p.digest()])
        i_opt = int(np.argmin([o.snr_db for o in ops]))
        if i_opt > 0 and ops[i_opt].snr_db < ops[0].snr_db - cfg.epsilon:
            state.blocks = cands[i_opt - 1]
            state.best = ops[i_opt]
            state.committed_ops.append(state.best.snr_db)
            rows[-len(cands) + i_opt - 1][3] = True
        for r in rows:
            _emit(state, LogRow(*r), on_row)
    return make(state.blocks), state


def _emit(state, row, on_row):
    state.log.append(row)
    if on_row is not None:
        on_row(row)


def format_log_row(r: LogRow) -> str:
    return f"{r.step},{r.punc_slot},{r.tran_slot},{int(r.committed)},{r.snr_op_db!r},{r.pattern_hash}\n"


def format_log_csv(rows) -> str:
    return ",".join(LOG_HEADER) + "\n" + "".join(format_log_row(r) for r in rows)
