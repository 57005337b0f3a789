"""Packet sources: trace files, synthetic generators, and load scaling.

Trace format, one packet per line::

    # interarrival_us,length_bytes,dest
    66.5,764,10.1.2.3
    12.0,64,5

``dest`` is either a dotted-quad (or ``0x``-prefixed hex) IPv4 address,
mapped to ``address mod N``, or a decimal output-port number.
"""
from __future__ import annotations

import ipaddress
import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import ParameterError, TraceParseError
from .quantize import ContinuousDist
from .segmenter import Packet

#: (length, probability) spikes of the bimodal mix
BIMODAL_SPIKES = ((1518, 0.314), (64, 0.287), (1438, 0.077), (70, 0.027), (594, 0.014))
#: residual mass is spread uniformly over integer lengths in this range
BIMODAL_RESIDUAL_RANGE = (64, 990)


@dataclass(frozen=True)
class TraceRecord:
    interarrival: float
    length: int
    dest: int | str

    def port(self, n):
        if isinstance(self.dest, int):
            return self.dest
        return _address_value(self.dest) % n


def _address_value(text):
    if text.lower().startswith("0x"):
        value = int(text, 16)
        if not 0 <= value < 2 ** 32:
            raise ValueError(f"address {text} out of 32-bit range")
        return value
    return int(ipaddress.IPv4Address(text))


def _parse_dest(text):
    text = text.strip()
    if "." in text or text.lower().startswith("0x"):
        _address_value(text)
        return text
    return int(text)


def read_records(lines: Iterable[str]):
    """Yield :class:`TraceRecord` objects from the lines of a trace file."""
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise TraceParseError(f"expected 3 fields, got {len(parts)}", lineno)
        try:
            gap = float(parts[0])
            length = int(parts[1])
            dest = _parse_dest(parts[2])
        except ValueError as exc:
            raise TraceParseError(str(exc), lineno) from None
        if not gap >= 0 or not math.isfinite(gap):
            raise TraceParseError(f"negative or invalid interarrival {parts[0]}", lineno)
        if length < 1:
            raise TraceParseError(f"packet length must be >= 1, got {length}", lineno)
        yield lineno, TraceRecord(gap, length, dest)


def parse_trace(lines, n, src=0, min_len=None, max_len=None, first_id=0):
    """Turn trace lines into packets arriving at input `src`.

    Arrival times are the cumulative sum of the interarrivals, in the same
    unit (microseconds for real traces).
    """
    packets = []
    t = 0.0
    for lineno, rec in read_records(lines):
        if (min_len is not None and rec.length < min_len) or (
                max_len is not None and rec.length > max_len):
            raise TraceParseError(f"length {rec.length} outside [{min_len}, {max_len}]", lineno)
        port = rec.port(n)
        if not 0 <= port < n:
            raise TraceParseError(f"output port {port} not in [0, {n})", lineno)
        t += rec.interarrival
        packets.append(Packet(first_id + len(packets), t, rec.length, port, src))
    return packets


def load_trace_split(lines, n):
    """Split one trace into `n` contiguous, equal-count pieces, one per input.

    Each piece keeps its own interarrival times, so every input starts at
    time 0.  Leftover records (count not divisible by `n`) are dropped.
    """
    records = [rec for _, rec in read_records(lines)]
    per = len(records) // n
    packets = []
    for src in range(n):
        t = 0.0
        for rec in records[src * per:(src + 1) * per]:
            t += rec.interarrival
            packets.append(Packet(len(packets), t, rec.length, rec.port(n), src))
    return packets


def load_trace_files(files, n):
    """One trace per input: ``files[i]`` is an iterable of lines for input ``i``."""
    packets = []
    for src, lines in enumerate(files):
        packets += parse_trace(lines, n, src=src, first_id=len(packets))
    return packets


def write_trace(packets, stream, header=None):
    """Write packets (one input's stream) in trace format, ports as integers."""
    if header:
        for line in header.splitlines():
            stream.write(f"# {line}\n")
    stream.write("# interarrival,length_bytes,dest\n")
    last = 0.0
    for p in packets:
        stream.write(f"{p.arrival_time - last:.9g},{p.length},{p.dest}\n")
        last = p.arrival_time


# ---------------------------------------------------------------------------
# Synthetic traffic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Poisson:
    rate: float


@dataclass(frozen=True)
class CBR:
    interval: float


@dataclass(frozen=True)
class ExponentialLength:
    mean: float


@dataclass(frozen=True)
class FixedLength:
    nbytes: int


@dataclass(frozen=True)
class BimodalLength:
    spikes: tuple = BIMODAL_SPIKES
    residual_range: tuple = BIMODAL_RESIDUAL_RANGE

    def __post_init__(self):
        total = sum(p for _, p in self.spikes)
        if total > 1.0 + 1e-12 or any(p < 0 for _, p in self.spikes):
            raise ParameterError("bimodal spike probabilities must be >= 0 and sum to <= 1")

    @property
    def residual_mass(self):
        return 1.0 - sum(p for _, p in self.spikes)

    @property
    def mean(self):
        lo, hi = self.residual_range
        return sum(L * p for L, p in self.spikes) + self.residual_mass * 0.5 * (lo + hi)

    def pmf(self):
        """Exact length pmf as a dict ``{length: probability}``."""
        lo, hi = self.residual_range
        out = {L: self.residual_mass / (hi - lo + 1) for L in range(lo, hi + 1)}
        for L, p in self.spikes:
            out[L] = out.get(L, 0.0) + p
        return out


@dataclass(frozen=True)
class ContinuousLength:
    """Lengths ``ceil(X)`` bytes for a continuous X (in bytes)."""

    dist: ContinuousDist


@dataclass(frozen=True)
class SyntheticSpec:
    """Per-input traffic description.

    ``dest`` is ``"uniform"`` (each packet picks an output uniformly) or a
    fixed output port.  ``sources`` lists the active inputs; ``None`` means
    all ``ports`` inputs, each an independent stream.
    """

    arrivals: Poisson | CBR
    lengths: ExponentialLength | FixedLength | BimodalLength | ContinuousLength
    ports: int = 16
    dest: str | int = "uniform"
    sources: tuple | None = None

    def __post_init__(self):
        if isinstance(self.arrivals, Poisson) and not self.arrivals.rate > 0:
            raise ParameterError("Poisson rate must be positive")
        if isinstance(self.arrivals, CBR) and not self.arrivals.interval > 0:
            raise ParameterError("CBR interval must be positive")
        if self.ports < 1:
            raise ParameterError("ports must be >= 1")

    @property
    def active_sources(self):
        return tuple(range(self.ports)) if self.sources is None else tuple(self.sources)


def _draw_lengths(lengths, rng, size):
    if isinstance(lengths, FixedLength):
        return np.full(size, lengths.nbytes, dtype=np.int64)
    if isinstance(lengths, ExponentialLength):
        x = rng.exponential(lengths.mean, size)
        return np.maximum(np.ceil(x), 1).astype(np.int64)
    if isinstance(lengths, ContinuousLength):
        x = lengths.dist.sample(rng, size)
        return np.maximum(np.ceil(x), 1).astype(np.int64)
    if isinstance(lengths, BimodalLength):
        spike_len = np.array([L for L, _ in lengths.spikes] + [0], dtype=np.int64)
        probs = np.array([p for _, p in lengths.spikes] + [lengths.residual_mass])
        probs = np.clip(probs, 0.0, None)
        which = rng.choice(len(probs), size=size, p=probs / probs.sum())
        lo, hi = lengths.residual_range
        residual = rng.integers(lo, hi + 1, size)
        out = spike_len[which]
        return np.where(which == len(probs) - 1, residual, out)
    raise ParameterError(f"unknown length distribution {lengths!r}")


def generate_synthetic(spec, seed, packets_per_source):
    """Generate a reproducible packet stream.

    Each active input gets its own stream drawn from a seed derived from
    ``(seed, input)``.  The result is sorted by arrival time (ties by
    input), with packet ids numbered in that order.
    """
    per_src = []
    for src in spec.active_sources:
        rng = np.random.default_rng([seed, src])
        n = packets_per_source
        if isinstance(spec.arrivals, Poisson):
            times = np.cumsum(rng.exponential(1.0 / spec.arrivals.rate, n))
        else:
            times = spec.arrivals.interval * np.arange(1, n + 1)
        lengths = _draw_lengths(spec.lengths, rng, n)
        if spec.dest == "uniform":
            dests = rng.integers(0, spec.ports, n)
        else:
            dests = np.full(n, int(spec.dest))
        per_src.append((times, lengths, dests, np.full(n, src)))
    if not per_src:
        return []
    times = np.concatenate([x[0] for x in per_src])
    lengths = np.concatenate([x[1] for x in per_src])
    dests = np.concatenate([x[2] for x in per_src])
    srcs = np.concatenate([x[3] for x in per_src])
    order = np.lexsort((srcs, times))
    return [Packet(k, float(times[o]), int(lengths[o]), int(dests[o]), int(srcs[o]))
            for k, o in enumerate(order)]


def back_to_back(length, cell_size, count, src=0, dest=0):
    """Packets of one length arriving exactly one transmission time apart (cell times)."""
    gap = length / cell_size
    return [Packet(k, (k + 1) * gap, length, dest, src) for k in range(count)]


@dataclass(frozen=True)
class PortLoads:
    """Offered load of each input and output, relative to the link rate."""

    inputs: np.ndarray
    outputs: np.ndarray
    link_rate: float  # bytes per source time unit

    @property
    def max(self):
        return float(max(self.inputs.max(), self.outputs.max()))


def offered_loads(packets, n, link_rate, duration):
    bytes_in = np.zeros(n)
    bytes_out = np.zeros(n)
    for p in packets:
        bytes_in[p.src] += p.length
        bytes_out[p.dest] += p.length
    denom = link_rate * duration
    return PortLoads(bytes_in / denom, bytes_out / denom, link_rate)


def scale_to_utilization(packets, n, cell_size, target):
    """Rescale arrival times to cell times so that the busiest port runs at `target`.

    Utilization is the largest per-port offered load over all inputs and
    outputs, measured over ``[0, last arrival]``.  Only the time unit
    changes; order, lengths and ports are kept.

    Returns
    -------
    (list of Packet, PortLoads)
        Packets with arrival times in cell times, and the realized loads.
    """
    if not 0 < target <= 1:
        raise ParameterError("target utilization must lie in (0, 1]")
    packets = list(packets)
    if not packets:
        raise ParameterError("no packets to scale")
    duration = max(p.arrival_time for p in packets)
    if duration <= 0:
        raise ParameterError("traffic has zero duration")
    raw = offered_loads(packets, n, 1.0, duration)
    peak_rate = raw.max  # bytes per source time unit on the busiest port
    if peak_rate <= 0:
        raise ParameterError("traffic carries no bytes")
    link_rate = peak_rate / target
    cell_time = cell_size / link_rate
    scaled = [replace(p, arrival_time=p.arrival_time / cell_time) for p in packets]
    loads = offered_loads(packets, n, link_rate, duration)
    return scaled, loads


@dataclass(frozen=True)
class SyntheticWorkload:
    """Synthetic traffic regenerated at any utilization (times in cell times)."""

    spec: SyntheticSpec
    packets_per_source: int
    cell_size: int = 64

    def packets(self, utilization, seed):
        raw = generate_synthetic(self.spec, seed, self.packets_per_source)
        return scale_to_utilization(raw, self.spec.ports, self.cell_size, utilization)[0]


@dataclass(frozen=True)
class TraceWorkload:
    """A fixed packet list (any time unit) rescaled to each utilization."""

    trace: tuple
    ports: int
    cell_size: int = 64

    def packets(self, utilization, seed):
        return scale_to_utilization(self.trace, self.ports, self.cell_size, utilization)[0]
