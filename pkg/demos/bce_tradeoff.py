"""Mean output BCE versus flooding iterations at 4 dB for the two reference patterns.

The first-n baseline is better calibrated after one iteration; the 5G
default catches up and overtakes it as iterations accumulate.
"""

import sys

from spatldpc import (DecoderConfig, TrialBudget, baseline_first_n_pattern, bce_vs_iterations,
                      default_pattern, link_for, rate_match)

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 10000
rm = rate_match(64, 128)
iters = [1, 2, 4, 8, 16, 32, 64]
budget = TrialBudget(trials, trials + 1)

for name, p in (("baseline", baseline_first_n_pattern(rm)), ("default", default_pattern(rm))):
    rows = bce_vs_iterations(link_for(rm, p), DecoderConfig(), 4.0, iters, budget, seed=3)
    print(f"{name:9s}", "  ".join(f"N={r.n_iters}:{r.mean_bce:.4f}" for r in rows))
