"""Batched message-passing decoding on the Tanner graph of a parity-check matrix.

Message arrays are laid out ``(edge, batch)``.  Edges of checks that are
processed together are stored position-major, so a run of ``m`` checks of
degree ``d`` is a contiguous ``(d, m, batch)`` block and the extrinsic
products/minima loop over ``d`` slabs instead of a strided axis.

Internally all LLRs are halved (``h = llr / 2``).  Scaling by a power of two
is exact, and it lets the sum-product rule use ``tanh(h)`` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .ldpc import ParityCheckMatrix

SCHEDULES = ("flooding", "layered")
CHECK_RULES = ("spa", "mpa")
DTYPES = ("float64", "float32")


class LayerOrthogonalityError(ValueError):
    pass


class NonFiniteMessageError(FloatingPointError):
    pass


@dataclass(frozen=True)
class DecoderConfig:
    """Schedule, check rule and iteration budget of the decoder.

    ``dtype="float32"`` trades accuracy for speed: sum-product messages then
    saturate near |LLR| = 17 before the clamp is reached.
    """

    schedule: str = "flooding"
    check_rule: str = "spa"
    n_iters: int = 10
    msg_clamp: float = 50.0
    early_stop: bool = False
    dtype: str = "float64"

    def __post_init__(self):
        object.__setattr__(self, "schedule", self.schedule.lower())
        object.__setattr__(self, "check_rule", self.check_rule.lower())
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.check_rule not in CHECK_RULES:
            raise ValueError(f"check_rule must be one of {CHECK_RULES}")
        if self.n_iters < 1:
            raise ValueError("n_iters must be >= 1")
        if not self.msg_clamp > 0:
            raise ValueError("msg_clamp must be positive")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {DTYPES}")

    def replace(self, **kw) -> "DecoderConfig":
        from dataclasses import replace
        return replace(self, **kw)


# (start, stop, degree, n_checks) over an edge ordering
Run = Tuple[int, int, int, int]


@dataclass(frozen=True, eq=False)
class FactorGraph:
    n_var: int
    n_chk: int
    n_edges: int
    H: sp.csr_matrix = field(repr=False)
    # flooding order: edges grouped by check degree
    flood_var: np.ndarray = field(repr=False)
    flood_runs: Tuple[Run, ...] = ()
    flood_sum: sp.csr_matrix = field(default=None, repr=False)  # n_var x E
    # layered order: edges grouped by layer, then degree
    layer_var: np.ndarray = field(default=None, repr=False)
    layers: Tuple[Tuple[Run, ...], ...] = ()

    @property
    def n_layers(self) -> int:
        return len(self.layers)


def _edge_order(M: sp.csr_matrix, chk_runs):
    """Position-major edge list for consecutive runs of equal-degree checks."""
    edge_var, runs = [], []
    pos = 0
    for checks, d in chk_runs:
        cols = np.stack([M.indices[M.indptr[c]:M.indptr[c + 1]] for c in checks], axis=1)
        edge_var.append(cols.ravel())  # (d, m) row-major -> position-major
        runs.append((pos, pos + cols.size, d, len(checks)))
        pos += cols.size
    ev = np.concatenate(edge_var).astype(np.int64) if edge_var else np.zeros(0, np.int64)
    return ev, tuple(runs)


def _split_by_degree(checks, deg):
    out = {}
    for c in checks:
        if deg[c] > 0:
            out.setdefault(int(deg[c]), []).append(int(c))
    return [(cs, d) for d, cs in sorted(out.items())]


def build_graph(H: ParityCheckMatrix) -> FactorGraph:
    M = H.matrix.tocsr().astype(np.int8)
    M.sort_indices()
    n_chk, n_var = M.shape
    deg = np.diff(M.indptr)
    seen = np.zeros(n_chk, dtype=bool)
    for li, rows in enumerate(H.layers):
        rows = np.asarray(rows, dtype=np.int64)
        if seen[rows].any():
            raise LayerOrthogonalityError(f"row assigned to more than one layer (layer {li})")
        seen[rows] = True
        cols = M[rows].indices
        if len(np.unique(cols)) != len(cols):
            raise LayerOrthogonalityError(f"layer {li} has a variable in two of its checks")
    if not seen.all():
        raise LayerOrthogonalityError("every check row must belong to a layer")

    flood_var, flood_runs = _edge_order(M, _split_by_degree(range(n_chk), deg))
    E = len(flood_var)
    flood_sum = sp.csr_matrix((np.ones(E), (flood_var, np.arange(E))), shape=(n_var, E))

    layer_var, layers = [], []
    offset = 0
    for rows in H.layers:
        ev, runs = _edge_order(M, _split_by_degree(rows, deg))
        layer_var.append(ev)
        layers.append(tuple((s + offset, e + offset, d, m) for s, e, d, m in runs))
        offset += len(ev)
    layer_var = np.concatenate(layer_var) if layer_var else np.zeros(0, np.int64)
    return FactorGraph(n_var, n_chk, E, M, flood_var, flood_runs, flood_sum,
                       layer_var, tuple(layers))


def _spa_check(x: np.ndarray, half_clamp: float, out: Optional[np.ndarray] = None) -> np.ndarray:
    """Extrinsic boxplus over axis 0 of half-LLRs via prefix/suffix tanh products."""
    d = x.shape[0]
    if out is None:
        out = np.empty_like(x)
    if d == 1:
        out[...] = half_clamp
        return out
    t = np.tanh(x, out=out)
    fw = np.empty((d - 1,) + x.shape[1:], dtype=x.dtype)
    bw = np.empty_like(fw)  # bw[j - 1] holds the product of t[j:]
    fw[0] = t[0]
    bw[d - 2] = t[d - 1]
    for j in range(1, d - 1):
        np.multiply(fw[j - 1], t[j], out=fw[j])
        np.multiply(bw[d - j - 1], t[d - j - 1], out=bw[d - j - 2])
    out[0] = bw[0]
    out[d - 1] = fw[d - 2]
    if d > 2:
        np.multiply(fw[:d - 2], bw[1:], out=out[1:d - 1])
    with np.errstate(divide="ignore"):
        np.arctanh(out, out=out)
    np.clip(out, -half_clamp, half_clamp, out=out)
    return out


def _mpa_check(x: np.ndarray, half_clamp: float, out: Optional[np.ndarray] = None) -> np.ndarray:
    """Min-sum over axis 0: product of the other signs times the other minimum."""
    d = x.shape[0]
    if out is None:
        out = np.empty_like(x)
    if d == 1:
        out[...] = half_clamp
        return out
    a = np.abs(x)
    min1 = a[0].copy()
    min2 = np.full_like(min1, np.inf)
    tmp = np.empty_like(min1)
    for j in range(1, d):
        np.maximum(min1, a[j], out=tmp)
        np.minimum(min2, tmp, out=min2)
        np.minimum(min1, a[j], out=min1)
    np.minimum(min1, half_clamp, out=min1)
    np.minimum(min2, half_clamp, out=min2)
    # ties at the minimum leave min2 == min1, so equality picks correctly
    np.copyto(out, np.where(a == min1, min2, min1))
    sgn = np.where(x < 0, -1.0, 1.0).astype(x.dtype)
    out *= sgn
    out *= np.multiply.reduce(sgn, axis=0)
    return out


def check_update(x: np.ndarray, rule: str, clamp: float) -> np.ndarray:
    """Check-to-variable LLRs for incoming LLRs ``x`` of shape ``(degree, checks, batch)``."""
    x = np.asarray(x, dtype=np.float64)
    fn = _spa_check if rule == "spa" else _mpa_check
    return 2.0 * fn(0.5 * x, 0.5 * clamp)


@dataclass
class DecodeOutput:
    posterior_llrs: np.ndarray
    hard_bits: np.ndarray
    iterations_run: np.ndarray
    trace: Optional[Dict[int, np.ndarray]] = None


def hard_decide(posterior_llrs) -> np.ndarray:
    """Bit 1 iff the LLR is negative; ties go to 0."""
    return (np.asarray(posterior_llrs) < 0).astype(np.uint8)


def decode(g: FactorGraph, channel_llrs, cfg: DecoderConfig, info_positions=None,
           trace_iters: Optional[Iterable[int]] = None) -> DecodeOutput:
    """Run ``cfg.n_iters`` message-passing iterations.

    ``channel_llrs`` has shape ``(n_var,)`` or ``(batch, n_var)``.  One
    iteration updates every check once for both schedules.  The posterior of
    a variable is its channel LLR plus all incoming check messages; outputs
    are returned at ``info_positions`` (default: all variables).
    ``trace_iters`` additionally records those posteriors after the listed
    iterations.
    """
    llr = np.asarray(channel_llrs, dtype=np.float64)
    single = llr.ndim == 1
    if single:
        llr = llr[None, :]
    if llr.ndim != 2 or llr.shape[1] != g.n_var:
        raise ValueError(f"expected {g.n_var} channel LLRs, got shape {llr.shape}")
    info = np.arange(g.n_var) if info_positions is None else np.asarray(info_positions)
    trace_set = set(trace_iters or ())
    trace = {} if trace_iters is not None else None
    if trace is not None and cfg.early_stop:
        raise ValueError("iteration trace is not available with early stopping")

    dt = np.dtype(cfg.dtype)
    hc = 0.5 * cfg.msg_clamp
    kernel = _spa_check if cfg.check_rule == "spa" else _mpa_check
    B = llr.shape[0]
    # variable-to-check messages are not clipped explicitly: the check rules
    # are monotone in each input magnitude and clip their outputs, which gives
    # the same result as clamping the inputs first
    chan = np.ascontiguousarray(np.clip(0.5 * llr, -hc, hc).T, dtype=dt)
    post = chan.copy()
    c2v = np.zeros((g.n_edges, B), dtype=dt)
    flood_sum = g.flood_sum.astype(dt) if cfg.schedule == "flooding" else None

    done = np.zeros(B, dtype=bool)
    iters_run = np.full(B, cfg.n_iters, dtype=np.int64)
    frozen = np.zeros((len(info), B), dtype=dt) if cfg.early_stop else None

    for it in range(1, cfg.n_iters + 1):
        if cfg.schedule == "flooding":
            v2c = post[g.flood_var]
            v2c -= c2v
            for s, e, d, m in g.flood_runs:
                kernel(v2c[s:e].reshape(d, m, B), hc, out=c2v[s:e].reshape(d, m, B))
            post = flood_sum @ c2v
            post += chan
        else:
            for layer in g.layers:
                for s, e, d, m in layer:
                    vi = g.layer_var[s:e]
                    old = c2v[s:e]
                    new = kernel((post[vi] - old).reshape(d, m, B), hc).reshape(e - s, B)
                    post[vi] += new - old
                    c2v[s:e] = new
        if not np.isfinite(post).all():
            raise NonFiniteMessageError(f"non-finite message in iteration {it}")
        if trace is not None and it in trace_set:
            trace[it] = 2.0 * post[info].T.astype(np.float64)
        if cfg.early_stop:
            syn = (g.H @ (post < 0).astype(np.int8)) & 1
            ok = ~syn.any(axis=0) & ~done
            frozen[:, ok] = post[info][:, ok]
            iters_run[ok] = it
            done |= ok
            if done.all():
                break

    out = post[info]
    if cfg.early_stop:
        out = np.where(done[None, :], frozen, out)
    out = 2.0 * out.T.astype(np.float64)
    hard = hard_decide(out)
    if single:
        out, hard, iters_run = out[0], hard[0], iters_run[:1]
        if trace is not None:
            trace = {k: v[0] for k, v in trace.items()}
    return DecodeOutput(out, hard, iters_run, trace)
