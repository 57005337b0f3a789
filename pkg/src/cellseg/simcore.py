"""Discrete-event model of an N-port VOQ input-buffered crossbar.

Time is measured in external cell times (the time the input link needs to
carry one cell's worth of bytes).  Packets arrive in continuous time, are
segmented into the VOQ of their (input, output) pair, and the crossbar is
scheduled by iSLIP at internal slot boundaries ``k / speedup``.  Each
matched pair moves one cell per slot.  Output ports reassemble packets and
check every byte range.

Also here: the utilization sweep and the minimum-speed-up search used for
the switch experiments, and a fast single-server queue with quantized
service for checking the analytical M/G/1 results.
"""
from __future__ import annotations

import heapq
import math
from collections import Counter, deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, ReassemblyError, SearchFailure
from .islip import default_iterations, islip_match
from .segmenter import SegmenterFSM, segment_packet


@dataclass(frozen=True)
class SwitchConfig:
    ports: int = 16
    cell_size: int = 64
    speedup: float = 1.0
    islip_iterations: int | None = None
    merge: bool = False
    merge_timeout_cells: float = 10.0
    warmup_fraction: float = 0.1
    instability_threshold: int = 1000
    instability_unit: str = "packets"
    seed: int = 0
    stop_on_unstable: bool = True
    drain: bool = True
    max_slots: int | None = None

    def __post_init__(self):
        if self.ports < 2:
            raise ParameterError("a switch needs at least 2 ports")
        if self.cell_size < 1:
            raise ParameterError("cell size must be >= 1")
        if not self.speedup >= 1.0:
            raise ParameterError("speed-up must be >= 1")
        if not 0 <= self.warmup_fraction < 1:
            raise ParameterError("warmup_fraction must lie in [0, 1)")
        if self.islip_iterations is not None and self.islip_iterations < 1:
            raise ParameterError("islip_iterations must be >= 1")
        if self.instability_unit not in ("packets", "cells"):
            raise ParameterError("instability_unit must be 'packets' or 'cells'")
        if self.merge_timeout_cells < 0:
            raise ParameterError("merge timeout must be >= 0")

    @property
    def iterations(self):
        return self.islip_iterations or default_iterations(self.ports)


@dataclass
class SimStats:
    """Results of one run.  Time averages cover ``[warmup, end of arrivals]``."""

    mean_queue_length_cells: float = 0.0
    port_queue_length_cells: list = field(default_factory=list)
    mean_packets_in_system: float = 0.0
    port_packets_in_system: list = field(default_factory=list)
    mean_packet_delay: float = 0.0
    max_voq_cells: int = 0
    max_port_cells: int = 0
    max_port_packets: int = 0
    unstable: bool = False
    truncated: bool = False
    cells_forwarded: int = 0
    payload_bytes: int = 0
    padding_bytes: int = 0
    packets_in: int = 0
    packets_departed: int = 0
    bytes_in: int = 0
    bytes_departed: int = 0
    per_port_offered_load: list = field(default_factory=list)
    reassembly_errors: int = 0
    measured_time: float = 0.0
    end_time: float = 0.0
    slots: int = 0
    timer_expiries: int = 0
    transitions: Counter = field(default_factory=Counter)

    @property
    def padding_overhead_ratio(self):
        return self.padding_bytes / self.payload_bytes if self.payload_bytes else 0.0

    @property
    def implied_speedup(self):
        return 1.0 + self.padding_overhead_ratio


class Reassembler:
    """Per-output reassembly; contexts are keyed by packet id.

    Cells of one VOQ arrive in order, so each packet's bytes must arrive
    contiguously from offset 0.  Any gap or overlap raises
    :class:`ReassemblyError`.
    """

    def __init__(self, packets=()):
        self.packets = {}
        self.received = {}
        for p in packets:
            self.expect(p)

    def expect(self, packet):
        self.packets[packet.id] = packet
        self.received[packet.id] = 0

    def receive(self, src, dst, cell):
        """Consume one cell; return the packets it completes."""
        done = []
        used = 0
        for pid, off, cnt in cell.segments:
            pkt = self.packets.get(pid)
            if pkt is None:
                raise ReassemblyError(f"cell carries bytes of unknown packet {pid}")
            if pkt.src != src or pkt.dest != dst:
                raise ReassemblyError(
                    f"packet {pid} ({pkt.src}->{pkt.dest}) arrived on ({src}->{dst})")
            got = self.received[pid]
            if off != got or cnt <= 0 or off + cnt > pkt.length:
                raise ReassemblyError(
                    f"packet {pid}: expected offset {got}, got bytes [{off}, {off + cnt})")
            got += cnt
            used += cnt
            if got == pkt.length:
                del self.received[pid]
                del self.packets[pid]
                done.append(pkt)
            else:
                self.received[pid] = got
        if used + cell.padding != cell.capacity:
            raise ReassemblyError(f"cell byte count {used}+{cell.padding} != {cell.capacity}")
        return done

    @property
    def incomplete(self):
        return len(self.received)


def reassemble_and_verify(streams, packets):
    """Reassemble per-output cell streams.

    Parameters
    ----------
    streams : dict
        ``{output: [(input, Cell), ...]}`` in arrival order.
    packets : iterable of Packet
        The packets that were sent.

    Returns
    -------
    list of Packet
        Departures in completion order.  Raises :class:`ReassemblyError` on
        any mis-ordered, foreign or missing byte.
    """
    r = Reassembler(packets)
    out = []
    for dst in sorted(streams):
        for src, cell in streams[dst]:
            out.extend(r.receive(src, dst, cell))
    if r.incomplete:
        raise ReassemblyError(f"{r.incomplete} packets never completed")
    return out


class CrossbarSwitch:
    """One simulation instance; call :meth:`run` once with a packet list."""

    def __init__(self, cfg, record_outputs=False):
        self.cfg = cfg
        self.record_outputs = record_outputs
        self.outputs = {j: [] for j in range(cfg.ports)} if record_outputs else None
        self.departures = []

    def run(self, packets):
        cfg = self.cfg
        n = cfg.ports
        S = cfg.cell_size
        sigma = cfg.speedup
        period = 1.0 / sigma
        iters = cfg.iterations
        merge = cfg.merge
        timeout = cfg.merge_timeout_cells
        threshold = cfg.instability_threshold
        by_packets = cfg.instability_unit == "packets"
        stop_on_unstable = cfg.stop_on_unstable
        max_slots = cfg.max_slots
        record = self.record_outputs

        packets = sorted(packets, key=lambda p: (p.arrival_time, p.src, p.id))
        for p in packets:
            if not (0 <= p.src < n and 0 <= p.dest < n):
                raise ParameterError(f"packet {p.id} has port outside [0, {n})")
            if p.length < 1:
                raise ParameterError(f"packet {p.id} has non-positive length")
        npk = len(packets)
        horizon = packets[-1].arrival_time if packets else 0.0
        warm = cfg.warmup_fraction * horizon
        stats = SimStats()

        voq = [[deque() for _ in range(n)] for _ in range(n)]
        qlen = [0] * n
        pk_sys = [0] * n
        area_c = [0.0] * n
        area_p = [0.0] * n
        last_t = [0.0] * n
        cols = [0] * n
        gp = [0] * n
        ap = [0] * n
        fsms = {}
        timers = []
        seq = 0
        reasm = Reassembler()
        bytes_in = [0] * n
        tot_cells = 0
        max_voq = max_port = max_port_pk = 0
        unstable = stopped = False
        delay_sum = 0.0
        delay_n = 0
        fwd = pad = departed = bytes_out = 0
        live_held = 0
        INF = math.inf
        window_end = horizon

        def touch(i, t):
            # accumulate port i's areas up to time t, clipped to the window
            lo = last_t[i]
            if lo < warm:
                lo = warm
            hi = t if t < window_end else window_end
            if hi > lo:
                d = hi - lo
                area_c[i] += qlen[i] * d
                area_p[i] += pk_sys[i] * d
            last_t[i] = t

        def enqueue(i, j, cells, t):
            nonlocal tot_cells, max_voq, max_port
            if not cells:
                return
            q = voq[i][j]
            was_empty = not q
            q.extend(cells)
            k = len(cells)
            qlen[i] += k
            tot_cells += k
            if was_empty:
                cols[j] |= 1 << i
            if t >= warm:
                if len(q) > max_voq:
                    max_voq = len(q)
                if qlen[i] > max_port:
                    max_port = qlen[i]

        k = 0
        ai = 0
        while True:
            t_slot = k * period
            while True:
                ta = packets[ai].arrival_time if ai < npk else INF
                tt = timers[0][0] if timers else INF
                if ta <= t_slot and ta <= tt:
                    p = packets[ai]
                    ai += 1
                    i, j = p.src, p.dest
                    touch(i, ta)
                    if merge:
                        fsm = fsms.get((i, j))
                        if fsm is None:
                            fsm = fsms[(i, j)] = SegmenterFSM(S, timeout, i, j)
                        had = fsm.held is not None
                        cells = fsm.on_packet(p, ta)
                        live_held += (fsm.held is not None) - had
                    else:
                        cells = segment_packet(p, S)
                    reasm.expect(p)
                    bytes_in[i] += p.length
                    pk_sys[i] += 1
                    if ta >= warm and pk_sys[i] > max_port_pk:
                        max_port_pk = pk_sys[i]
                    enqueue(i, j, cells, ta)
                    if merge and fsm.held is not None and not voq[i][j]:
                        heapq.heappush(timers, (fsm.arm_timer(ta), seq, i, j))
                        seq += 1
                    if ta >= warm and (pk_sys[i] if by_packets else qlen[i]) >= threshold:
                        unstable = True
                        if stop_on_unstable:
                            stopped = True
                            window_end = ta
                            break
                elif tt < t_slot:
                    d, _, i, j = heapq.heappop(timers)
                    fsm = fsms[(i, j)]
                    if fsm.deadline != d:
                        continue  # cancelled by an arrival
                    touch(i, d)
                    cells = fsm.on_timer(d)
                    live_held -= 1
                    enqueue(i, j, cells, d)
                else:
                    break
            if stopped:
                break
            if tot_cells == 0:
                nxt = min(packets[ai].arrival_time if ai < npk else INF,
                          timers[0][0] if timers else INF)
                if nxt == INF:
                    break
                if not cfg.drain and nxt > horizon:
                    break
                k2 = math.ceil(nxt * sigma)
                if k2 <= k:
                    k2 = k + 1
                while k2 * period < nxt:
                    k2 += 1
                k = k2
                continue
            if not cfg.drain and t_slot > horizon:
                break
            if max_slots is not None and stats.slots >= max_slots:
                stats.truncated = True
                break
            stats.slots += 1
            dep_lo = t_slot if t_slot > warm else warm
            hi = t_slot if t_slot < window_end else window_end
            t_dep = t_slot + period
            for i, j in islip_match(cols, n, gp, ap, iters):
                q = voq[i][j]
                cell = q.popleft()
                # inline touch(i, t_slot)
                a = last_t[i]
                if a < warm:
                    a = warm
                if hi > a:
                    area_c[i] += qlen[i] * (hi - a)
                    area_p[i] += pk_sys[i] * (hi - a)
                last_t[i] = t_slot
                qlen[i] -= 1
                tot_cells -= 1
                fwd += 1
                pad += cell.padding
                if not q:
                    cols[j] &= ~(1 << i)
                    if merge:
                        fsm = fsms[(i, j)]
                        if fsm.held is not None and fsm.deadline is None:
                            heapq.heappush(timers, (fsm.arm_timer(t_slot), seq, i, j))
                            seq += 1
                if record:
                    self.outputs[j].append((i, cell))
                for pkt in reasm.receive(i, j, cell):
                    pk_sys[i] -= 1
                    # the packet occupied the port until its last cell finished
                    h2 = t_dep if t_dep < window_end else window_end
                    if h2 > dep_lo:
                        area_p[i] += h2 - dep_lo
                    departed += 1
                    bytes_out += pkt.length
                    if pkt.arrival_time >= warm:
                        delay_sum += t_dep - pkt.arrival_time
                        delay_n += 1
                    if record:
                        self.departures.append((t_dep, pkt))
            k += 1

        end = t_slot if not stopped else window_end
        for i in range(n):
            touch(i, min(end, window_end))
        span = max(window_end - warm, 0.0)
        stats.measured_time = span
        stats.end_time = end
        stats.unstable = unstable
        stats.truncated = stats.truncated or stopped
        stats.max_voq_cells = max_voq
        stats.cells_forwarded = fwd
        stats.padding_bytes = pad
        stats.payload_bytes = fwd * S - pad
        stats.packets_departed = departed
        stats.bytes_departed = bytes_out
        stats.max_port_cells = max_port
        stats.max_port_packets = max_port_pk
        stats.packets_in = ai
        stats.bytes_in = sum(bytes_in)
        if span > 0:
            stats.port_queue_length_cells = [a / span for a in area_c]
            stats.port_packets_in_system = [a / span for a in area_p]
            stats.mean_queue_length_cells = sum(area_c) / (span * n)
            stats.mean_packets_in_system = sum(area_p) / (span * n)
        else:
            stats.port_queue_length_cells = [0.0] * n
            stats.port_packets_in_system = [0.0] * n
        stats.mean_packet_delay = delay_sum / delay_n if delay_n else 0.0
        stats.per_port_offered_load = [b / (S * horizon) if horizon > 0 else 0.0 for b in bytes_in]
        stats.timer_expiries = sum(f.transitions["T4"] for f in fsms.values())
        for f in fsms.values():
            stats.transitions.update(f.transitions)
        self.fsms = fsms
        self.voq = voq
        self.held_cells = live_held
        if not stopped and cfg.drain and not stats.truncated and reasm.incomplete:
            raise ReassemblyError(f"{reasm.incomplete} packets never completed")
        return stats


def run_simulation(cfg, packets):
    """Simulate `packets` (arrival times in cell times) through the switch."""
    return CrossbarSwitch(cfg).run(packets)


def _grid_seed(seed, *idx):
    return int(np.random.SeedSequence([seed, *idx]).generate_state(1)[0])


@dataclass(frozen=True)
class SweepRow:
    utilization: float
    speedup: float
    stats: SimStats


def sweep_utilization(cfg, workload, utilizations, speedups):
    """Run every (utilization, speed-up) pair; rows come back in grid order.

    The traffic seed for grid point ``(u, s)`` is derived from ``cfg.seed``
    and the two indices.
    """
    rows = []
    for ui, u in enumerate(utilizations):
        if not 0 < u <= 1:
            raise ParameterError(f"utilization {u} not in (0, 1]")
        for si, s in enumerate(speedups):
            seed = _grid_seed(cfg.seed, ui, si)
            pk = workload.packets(u, seed)
            rows.append(SweepRow(u, s, run_simulation(replace(cfg, speedup=s, seed=seed), pk)))
    return rows


def speedup_grid(step=0.01, cap=2.0):
    count = int(round((cap - 1.0) / step))
    return [round(1.0 + i * step, 10) for i in range(count + 1)]


def find_min_speedup(cfg, workload, utilization=0.99, step=0.01, cap=2.0, method="bisect"):
    """Smallest speed-up on the grid 1, 1+step, ... that keeps the switch stable.

    Every candidate sees the same traffic (seeded from ``cfg.seed``).
    ``method="bisect"`` assumes stability is monotone in the speed-up and
    brackets the answer by bisection; ``"linear"`` scans upward from 1.

    Returns
    -------
    (float, dict)
        The speed-up and the ``{speedup: SimStats}`` runs made.
    """
    if step <= 0:
        raise ParameterError("step must be positive")
    grid = speedup_grid(step, cap)
    packets = workload.packets(utilization, cfg.seed)
    runs = {}

    def stable(idx):
        s = grid[idx]
        if s not in runs:
            runs[s] = run_simulation(replace(cfg, speedup=s), packets)
        return not runs[s].unstable

    if method == "linear":
        for idx in range(len(grid)):
            if stable(idx):
                return grid[idx], runs
        raise SearchFailure(f"no stable speed-up up to {cap}")
    if method != "bisect":
        raise ParameterError(f"unknown search method {method!r}")
    if not stable(len(grid) - 1):
        raise SearchFailure(f"unstable even at speed-up {cap}")
    lo, hi = -1, len(grid) - 1  # grid[lo] unstable (virtual), grid[hi] stable
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if stable(mid):
            hi = mid
        else:
            lo = mid
    return grid[hi], runs


# ---------------------------------------------------------------------------
# Single-server queue with quantized service
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QueueSimResult:
    mean_in_system: float
    mean_sojourn: float
    utilization: float
    customers: int
    served_cells: int


def simulate_quantized_mg1(lam, service_dist, min_served_cells=10 ** 6, seed=0):
    """FIFO single server, Poisson(lam) arrivals, service ``ceil(X)`` cell times.

    Waiting times follow the Lindley recursion, evaluated in closed form as
    ``W_n = S_n - min(0, min_{k<=n} S_k)`` over the random walk
    ``S_n = sum(Y_k - A_{k+1})``.  The time-average number in system is the
    total sojourn area divided by the observation period.
    """
    rng = np.random.default_rng(seed)
    mean_x = getattr(service_dist, "mean", 1.0)
    n = int(math.ceil(min_served_cells / max(mean_x, 1.0) * 1.2)) + 1000
    while True:
        gaps = rng.exponential(1.0 / lam, n)
        y = np.maximum(np.ceil(service_dist.sample(rng, n)), 1.0)
        if y.sum() >= min_served_cells:
            break
        n *= 2
    arrivals = np.cumsum(gaps)
    # X_k = Y_k - A_{k+1}; W_0 = 0
    steps = y[:-1] - gaps[1:]
    walk = np.concatenate(([0.0], np.cumsum(steps)))
    wait = walk - np.minimum.accumulate(np.minimum(walk, 0.0))
    sojourn = wait + y
    departures = arrivals + sojourn
    end = arrivals[-1]
    inside = np.clip(np.minimum(departures, end) - arrivals, 0.0, None)
    busy = np.clip(np.minimum(departures, end) - (departures - y), 0.0, None).sum()
    return QueueSimResult(
        mean_in_system=float(inside.sum() / end),
        mean_sojourn=float(sojourn.mean()),
        utilization=float(busy / end),
        customers=n,
        served_cells=int(y.sum()),
    )
