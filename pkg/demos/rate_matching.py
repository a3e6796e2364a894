"""Block map of the 5G default pattern and the first-n baseline for k=64, n=128."""

from spatldpc import baseline_first_n_pattern, default_pattern, rate_match
from spatldpc.optimizer import exploration_count
from spatldpc.ratematch import describe_blocks

rm = rate_match(64, 128)
print(f"{rm.bg_id}, L={rm.L}, k_L={rm.k_L}, n_L={rm.n_L}, filler={rm.filler_range}")

for name, p in (("5G default", default_pattern(rm)), ("first-n baseline", baseline_first_n_pattern(rm))):
    print(f"\n{name}:")
    print(describe_blocks(rm, p))

print(f"\nSPAT evaluates {exploration_count(default_pattern(rm))} patterns from the default start")
