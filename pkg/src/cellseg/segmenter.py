"""Packet-to-cell segmentation, with and without cell merging.

Without merging every packet is cut into ``ceil(L/S)`` cells and the last
one is padded.  With merging a partially filled trailer cell is held back
so that the next packet for the same VOQ can top it up with its leading
bytes.  The held cell is released (padded) by a timer when the VOQ drains
and no packet shows up in time.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

from .errors import RoutingError


@dataclass(slots=True)
class Packet:
    id: int
    arrival_time: float
    length: int
    dest: int
    src: int = 0


@dataclass(slots=True)
class Cell:
    """A fixed-size cell.  ``segments`` holds ``(packet_id, offset, count)``."""

    capacity: int
    segments: tuple
    padding: int

    @property
    def payload(self):
        return self.capacity - self.padding

    @property
    def packet_ids(self):
        return [seg[0] for seg in self.segments]


def segment_packet(packet, S):
    """Cut a packet into ``ceil(L/S)`` cells; only the last may carry padding."""
    if S < 1:
        raise ValueError("cell size must be >= 1")
    L = packet.length
    pid = packet.id
    cells = [Cell(S, ((pid, off, S),), 0) for off in range(0, L - S + 1, S)]
    r = L % S
    if r:
        cells.append(Cell(S, ((pid, L - r, r),), S - r))
    return cells


@dataclass(frozen=True)
class OverheadStats:
    payload_bytes: int
    padding_bytes: int
    cell_count: int

    @property
    def implied_speedup(self):
        if self.payload_bytes == 0:
            return 1.0
        return (self.payload_bytes + self.padding_bytes) / self.payload_bytes


def overhead_stats(cells):
    payload = padding = n = 0
    for c in cells:
        padding += c.padding
        payload += c.capacity - c.padding
        n += 1
    return OverheadStats(payload, padding, n)


class State(enum.Enum):
    EMPTY = "EMPTY"
    SEGMENTING = "SEGMENTING"
    PARTIAL = "PARTIAL"


class SegmenterFSM:
    """Cell-merging segmenter owning the VOQ ``(src, dest)``.

    Transitions are tallied in :attr:`transitions` under ``"T0"``..``"T4"``:

    ======  =====================================================
    T0      EMPTY -> SEGMENTING on packet arrival
    T1      SEGMENTING -> PARTIAL, trailer held back
    T2      SEGMENTING -> EMPTY, nothing held
    T3      PARTIAL -> SEGMENTING on packet arrival
    T4      PARTIAL -> EMPTY, timer expired and held cell released
    ======  =====================================================

    A held cell only ever carries the trailer of a single packet.  If an
    arriving packet is too short to fill it, the two-packet cell is sent
    padded and the FSM goes back to EMPTY.
    """

    def __init__(self, cell_size, timeout=10.0, src=0, dest=0):
        self.S = cell_size
        self.timeout = timeout
        self.src = src
        self.dest = dest
        self.state = State.EMPTY
        self.held = None  # (packet_id, offset, count)
        self.deadline = None
        self.transitions = Counter()

    @property
    def held_cell(self):
        if self.held is None:
            return None
        return Cell(self.S, (self.held,), self.S - self.held[2])

    @property
    def held_bytes(self):
        return 0 if self.held is None else self.held[2]

    def on_packet(self, packet, now=None):
        """Segment an arriving packet; return the cells to append to the VOQ."""
        if packet.dest != self.dest or packet.src != self.src:
            raise RoutingError(
                f"packet {packet.id} ({packet.src}->{packet.dest}) sent to "
                f"segmenter of VOQ ({self.src}->{self.dest})")
        S = self.S
        pid = packet.id
        L = packet.length
        cells = []
        off = 0
        if self.state is State.PARTIAL:
            self.transitions["T3"] += 1
            self.deadline = None
            room = S - self.held[2]
            take = min(room, L)
            segs = (self.held, (pid, 0, take))
            self.held = None
            off = take
            if take < room:
                # two packets already share the cell; close it
                cells.append(Cell(S, segs, room - take))
                self.transitions["T2"] += 1
                self.state = State.EMPTY
                return cells
            cells.append(Cell(S, segs, 0))
        else:
            self.transitions["T0"] += 1
        self.state = State.SEGMENTING
        while L - off >= S:
            cells.append(Cell(S, ((pid, off, S),), 0))
            off += S
        if off < L:
            self.held = (pid, off, L - off)
            self.state = State.PARTIAL
            self.transitions["T1"] += 1
        else:
            self.state = State.EMPTY
            self.transitions["T2"] += 1
        return cells

    def arm_timer(self, now):
        """Start the merge timer (VOQ has drained).  Idempotent; returns the deadline."""
        if self.state is State.PARTIAL and self.deadline is None:
            self.deadline = now + self.timeout
        return self.deadline

    def on_timer(self, now):
        """Release the held cell if the timer is live and due; else no-op."""
        if self.state is not State.PARTIAL or self.deadline is None or now < self.deadline:
            return []
        cell = self.held_cell
        self.held = None
        self.deadline = None
        self.state = State.EMPTY
        self.transitions["T4"] += 1
        return [cell]

    def flush(self):
        """Release any held cell immediately (end of input)."""
        if self.held is None:
            return []
        self.deadline = float("-inf")
        return self.on_timer(float("-inf"))


def merge_stream(packets, S, release_each=False):
    """Segment the packets of one VOQ through a merging FSM.

    The timer never fires in between packets unless `release_each` is set,
    in which case the held cell is released before every arrival (the
    zero-timeout limit, equivalent to plain segmentation).  Whatever is
    still held at the end is flushed.
    """
    packets = list(packets)
    if not packets:
        return []
    first = packets[0]
    fsm = SegmenterFSM(S, 0.0, first.src, first.dest)
    out = []
    for p in packets:
        if release_each:
            fsm.arm_timer(p.arrival_time)
            out += fsm.on_timer(p.arrival_time)
        out += fsm.on_packet(p, p.arrival_time)
    out += fsm.flush()
    return out
