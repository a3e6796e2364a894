"""Command-line front end: ``pattern``, ``simulate``, ``optimize`` and ``bce``.

Exit status is 0 on success, 1 for configuration errors and 2 for runtime
or objective failures.
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from typing import Dict, List, Optional

from .decoder import DecoderConfig, NonFiniteMessageError
from .ldpc import ExponentParseError
from .optimizer import (
    LOG_HEADER,
    ObjectiveError,
    SpatAborted,
    SpatConfig,
    exploration_count,
    format_log_row,
    spat_optimize,
)
from .ratematch import (
    BlockArrayError,
    InfeasibleConfigError,
    RateMatch,
    baseline_first_n_pattern,
    default_pattern,
    describe_blocks,
    format_pattern,
    rate_match,
    read_pattern,
    search_space_size,
)
from .simulate import (
    TrialBudget,
    UnbracketedError,
    bce_vs_iterations,
    format_bce_csv,
    format_sweep_csv,
    link_for,
    sweep,
)

CONFIG_ERRORS = (ValueError, InfeasibleConfigError, BlockArrayError, ExponentParseError, OSError)
RUNTIME_ERRORS = (SpatAborted, ObjectiveError, UnbracketedError, NonFiniteMessageError)


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> List[float]:
    """``a:b:step`` (inclusive), a comma list, or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("SNR grid must be a:b:step")
        a, b, step = (float(p) for p in parts)
        if step <= 0 or b < a:
            raise ConfigError("SNR grid needs step > 0 and b >= a")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 10) for i in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def parse_int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def resolve_k_n(k: Optional[int], n: Optional[int], r: Optional[str]):
    if r is None:
        if k is None or n is None:
            raise ConfigError("give --k and --n, or --r with one of them")
        return k, n
    rate = Fraction(r).limit_denominator(10**6)
    if n is not None and k is None:
        kk = rate * n
        if kk.denominator != 1:
            raise ConfigError(f"r*n = {float(kk):g} is not an integer")
        return int(kk), n
    if k is not None and n is None:
        nn = k / rate
        if nn.denominator != 1:
            raise ConfigError(f"k/r = {float(nn):g} is not an integer")
        return k, int(nn)
    raise ConfigError("--r needs exactly one of --k and --n")


_BOOL_FLAGS = {"baseline", "early_stop", "constrain_parity", "dry_run", "reevaluate_incumbent", "saturated"}


def read_config_file(path: str) -> Dict[str, object]:
    """Flat ``key = value`` lines; keys mirror the long flag names."""
    out: Dict[str, object] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key in _BOOL_FLAGS:
                if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ConfigError(f"{path}:{lineno}: {key} must be true or false")
                out[key] = val.lower() in ("true", "1", "yes")
            else:
                out[key] = val
    return out


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("code")
    g.add_argument("--k", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--r", help="code rate, e.g. 0.75 or 3/4; combined with --n or --k")
    g.add_argument("--bg", choices=["BG1", "BG2", "bg1", "bg2"])
    g.add_argument("--lift", type=int, help="lifting factor override")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--pattern-file")
    src.add_argument("--baseline", action="store_true", help="transmit the first n non-filler bits")
    d = p.add_argument_group("decoder")
    d.add_argument("--schedule", choices=["flooding", "layered"], default="flooding")
    d.add_argument("--rule", choices=["spa", "mpa"], default="spa")
    d.add_argument("--iters", type=int, default=10)
    d.add_argument("--msg-clamp", type=float, default=50.0)
    d.add_argument("--early-stop", action="store_true")
    d.add_argument("--dtype", choices=["float64", "float32"], default="float64")
    s = p.add_argument_group("simulation")
    s.add_argument("--trials", type=int)
    s.add_argument("--max-errors", type=int)
    s.add_argument("--snr-grid")
    s.add_argument("--target-bler", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--config", help="key = value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="spatldpc", description="5G NR LDPC puncturing-pattern tools")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pattern", help="write a puncturing pattern and print its block map")
    _common(p)

    p = sub.add_parser("simulate", help="BLER/BER/BCE sweep")
    _common(p)

    p = sub.add_parser("optimize", help="SPAT greedy pattern search")
    _common(p)
    p.add_argument("--log", help="optimizer log CSV (default: stdout)")
    p.add_argument("--constrain-parity", action="store_true", help="never puncture information bits")
    p.add_argument("--dry-run", action="store_true", help="use a hash-based stub objective")
    p.add_argument("--reevaluate-incumbent", action="store_true")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--start-snr", type=float)

    p = sub.add_parser("bce", help="mean output BCE versus iteration count")
    _common(p)
    p.add_argument("--snr", type=float, required=False)
    p.add_argument("--iter-list", default="1,2,4,8")
    p.add_argument("--saturated", action="store_true",
                   help="all-zero codewords with saturated channel LLRs")
    return ap


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        try:
            file_vals = read_config_file(args.config)
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from None
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(file_vals) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**file_vals)
        args = ap.parse_args(argv)
    return args


def _setup(args) -> RateMatch:
    k, n = resolve_k_n(args.k, args.n, args.r)
    if k <= 0 or n <= 0:
        raise ConfigError("k and n must be positive")
    bg = args.bg.upper() if args.bg else None
    return rate_match(k, n, bg, args.lift)


def _pattern(args, rm: RateMatch, constrain: bool = False):
    if args.pattern_file:
        return read_pattern(args.pattern_file, rm)
    if args.baseline or constrain:
        return baseline_first_n_pattern(rm, constrain)
    return default_pattern(rm)


def _decoder(args) -> DecoderConfig:
    return DecoderConfig(args.schedule, args.rule, args.iters, args.msg_clamp, args.early_stop, args.dtype)


def _budget(args, default: TrialBudget) -> TrialBudget:
    return TrialBudget(args.trials if args.trials is not None else default.max_trials,
                       args.max_errors if args.max_errors is not None else default.max_block_errors)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _sidecar(args) -> None:
    if not args.out:
        return
    with open(args.out + ".config", "w") as f:
        for key, val in sorted(vars(args).items()):
            if key in ("command", "config", "out") or val is None:
                continue
            f.write(f"{key} = {str(val).lower() if isinstance(val, bool) else val}\n")


def cmd_pattern(args) -> int:
    rm = _setup(args)
    p = _pattern(args, rm)
    _emit(args, format_pattern(p))
    info = sys.stdout if args.out else sys.stderr
    print(describe_blocks(rm, p), file=info)
    if p.blocks is not None:
        print(f"SPAT explores {exploration_count(p)} patterns; "
              f"search space C({rm.n_L - rm.n_filler},{rm.n}) = {float(search_space_size(rm)):.3g}",
              file=info)
    _sidecar(args)
    return 0


def cmd_simulate(args) -> int:
    rm = _setup(args)
    if not args.snr_grid:
        raise ConfigError("--snr-grid is required")
    link = link_for(rm, _pattern(args, rm))
    pts = sweep(link, _decoder(args), parse_grid(args.snr_grid), _budget(args, TrialBudget()),
                args.seed, args.workers)
    _emit(args, format_sweep_csv(pts))
    _sidecar(args)
    return 0


def _stub_objective(p) -> float:
    # deterministic, pattern-dependent pseudo operating point
    return int(p.digest(), 16) % 100000 / 10000.0


def cmd_optimize(args) -> int:
    rm = _setup(args)
    init = _pattern(args, rm, args.constrain_parity)
    base = SpatConfig()
    kw = dict(
        decoder=_decoder(args),
        budget=_budget(args, base.budget),
        constrain_to_parity=args.constrain_parity,
        master_seed=args.seed,
        reevaluate_incumbent=args.reevaluate_incumbent,
        epsilon=args.epsilon,
        workers=args.workers,
        start_snr_db=args.start_snr,
    )
    if args.target_bler is not None:
        kw["target_bler"] = args.target_bler
    cfg = SpatConfig(**kw)
    log = open(args.log, "w") if args.log else sys.stdout
    try:
        log.write(",".join(LOG_HEADER) + "\n")

        def on_row(row):
            log.write(format_log_row(row))
            log.flush()

        pat, _ = spat_optimize(init, cfg, _stub_objective if args.dry_run else None, on_row)
    finally:
        if log is not sys.stdout:
            log.close()
    if args.out:
        _emit(args, format_pattern(pat))
        _sidecar(args)
    return 0


def cmd_bce(args) -> int:
    rm = _setup(args)
    if args.snr is None and not args.saturated:
        raise ConfigError("--snr is required")
    its = parse_int_list(args.iter_list)
    link = link_for(rm, _pattern(args, rm))
    rows = bce_vs_iterations(link, _decoder(args), args.snr if args.snr is not None else 0.0, its,
                             _budget(args, TrialBudget()), args.seed, args.workers, args.saturated)
    _emit(args, format_bce_csv(rows))
    _sidecar(args)
    return 0


COMMANDS = {"pattern": cmd_pattern, "simulate": cmd_simulate, "optimize": cmd_optimize, "bce": cmd_bce}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        try:
            args = parse_args(argv)
        except SystemExit as e:
            return int(e.code or 0)
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"spatldpc: config error: {e}", file=sys.stderr)
        return 1
    except RUNTIME_ERRORS as e:
        print(f"spatldpc: {e}", file=sys.stderr)
        return 2
    except CONFIG_ERRORS as e:
        print(f"spatldpc: config error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
