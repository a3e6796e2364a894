"""BLER of the default and baseline patterns under flooding SPA, N_F=10.

Takes a few minutes; pass a smaller trial count as argv[1] to go faster.
"""

import sys

from spatldpc import (DecoderConfig, TrialBudget, baseline_first_n_pattern, default_pattern, link_for,
                      rate_match, snr_operating_point, sweep)

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
rm = rate_match(64, 128)
cfg = DecoderConfig(dtype="float32")
grid = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5]

for name, p in (("default", default_pattern(rm)), ("baseline", baseline_first_n_pattern(rm))):
    pts = sweep(link_for(rm, p), cfg, grid, TrialBudget(trials, 300), seed=1)
    print(name, " ".join(f"{q.snr_db:g}:{q.bler:.2e}" for q in pts))
    op = snr_operating_point(pts, 1e-2)
    print(f"  SNR at BLER 1e-2: {op.snr_db:.2f} +/- {op.stderr:.2f} dB")
