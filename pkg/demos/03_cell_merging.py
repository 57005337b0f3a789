"""
Worst case stream and cell merging
==================================

Back-to-back 65-byte packets with 64-byte cells need two cells per packet,
the second carrying a single byte.  The fabric would need almost twice the
line rate.  Merging the trailer of one packet with the head of the next
removes nearly all of that padding.
"""

from cellseg.segmenter import Packet, SegmenterFSM, merge_stream, overhead_stats, segment_packet
from cellseg.simcore import SwitchConfig, find_min_speedup
from cellseg.traffic import TraceWorkload, back_to_back

S = 64
stream = [Packet(k, float(k), 65, 0) for k in range(1000)]
plain = [c for p in stream for c in segment_packet(p, S)]
merged = merge_stream(stream, S)
print("implied speed-up without merging:", round(overhead_stats(plain).implied_speedup, 4))
print("implied speed-up with merging:   ", round(overhead_stats(merged).implied_speedup, 4))

# walk the state machine by hand
fsm = SegmenterFSM(S, timeout=10.0)
for p in stream[:3]:
    cells = fsm.on_packet(p, p.arrival_time)
    print(f"packet {p.id}: emitted {[c.segments for c in cells]}, state {fsm.state.name}, held {fsm.held}")
fsm.arm_timer(3.0)
print("timer fires at", fsm.deadline, "->", [c.padding for c in fsm.on_timer(13.0)], "padding bytes")

# the same thing measured on a simulated switch (a short stream, so the
# instability threshold is scaled down with it)
w = TraceWorkload(tuple(back_to_back(65, S, 20000)), 2)
cfg = SwitchConfig(ports=2, warmup_fraction=0.0, instability_threshold=50)
print("min speed-up, no merging:", find_min_speedup(cfg, w, 1.0)[0])
print("min speed-up, merging:   ", find_min_speedup(SwitchConfig(ports=2, warmup_fraction=0.0,
                                                                  instability_threshold=50,
                                                                  merge=True), w, 1.0,
                                                     method="linear")[0])
