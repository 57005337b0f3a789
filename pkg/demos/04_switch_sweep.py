"""
A 16-port switch under a bimodal packet mix
===========================================

Each input carries Poisson packets drawn from a mix dominated by 1518- and
64-byte packets (mean about 764 bytes), with uniformly chosen outputs.  We
sweep the utilization of the busiest port and compare mean queue lengths
with and without cell merging.  The budget here is small so that the demo
finishes quickly; see the acceptance tests for the long runs.
"""

from cellseg.simcore import SwitchConfig, sweep_utilization
from cellseg.traffic import BimodalLength, Poisson, SyntheticSpec, SyntheticWorkload

spec = SyntheticSpec(Poisson(1.0), BimodalLength(), ports=16)
work = SyntheticWorkload(spec, packets_per_source=2000)
utils = [0.7, 0.9, 0.95]

print("util  speedup  merge  queue(cells)  packets  padding/payload")
for merge in (False, True):
    for row in sweep_utilization(SwitchConfig(merge=merge), work, utils, [1.0, 1.05]):
        s = row.stats
        print(f"{row.utilization:<5} {row.speedup:<8} {merge!s:<6} {s.mean_queue_length_cells:12.1f}"
              f"  {s.mean_packets_in_system:7.2f}  {s.padding_overhead_ratio:.4f}")
