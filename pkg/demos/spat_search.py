"""SPAT from the 5G default pattern.

With --dry-run a hash stub replaces the Monte-Carlo objective and the run
finishes instantly.  Without it, the desk-scale objective runs for hours.
"""

import sys

from spatldpc import DecoderConfig, SpatConfig, default_pattern, rate_match, spat_optimize
from spatldpc.optimizer import format_log_row
from spatldpc.ratematch import describe_blocks

dry = "--dry-run" in sys.argv
rm = rate_match(64, 128)
cfg = SpatConfig(decoder=DecoderConfig(dtype="float32"), master_seed=1)


def stub(p):
    return int(p.digest(), 16) % 100000 / 10000


best, state = spat_optimize(default_pattern(rm), cfg, stub if dry else None,
                            on_row=lambda r: print(format_log_row(r), end="") if r.committed else None)
print(f"{len(state.log)} evaluations, committed operating points: "
      + ", ".join(f"{v:.3f}" for v in state.committed_ops))
print(describe_blocks(rm, best))
