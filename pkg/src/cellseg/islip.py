"""iSLIP request-grant-accept matching for an N x N crossbar.

Requests are held as integer bitmasks so that the simulator can call
:func:`islip_match` once per internal slot cheaply.  :func:`islip_schedule`
is the side-effect-free wrapper taking an ordinary boolean matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


def default_iterations(n):
    return max(1, math.ceil(math.log2(n)))


@dataclass
class IslipState:
    grant_ptr: list = field(default_factory=list)
    accept_ptr: list = field(default_factory=list)

    @classmethod
    def new(cls, n):
        return cls([0] * n, [0] * n)

    @property
    def n(self):
        return len(self.grant_ptr)

    def copy(self):
        return IslipState(list(self.grant_ptr), list(self.accept_ptr))


def islip_match(cols, n, grant_ptr, accept_ptr, iterations):
    """Run iSLIP on column masks and update the pointers in place.

    ``cols[j]`` has bit ``i`` set when input ``i`` requests output ``j``.
    Returns a list of ``(input, output)`` pairs.  Pointers move only for
    pairs matched in the first iteration.
    """
    full = (1 << n) - 1
    free_in = full
    free_out = full
    pairs = []
    grants = [0] * n
    for it in range(iterations):
        granted = 0
        out_mask = free_out
        while out_mask:
            low = out_mask & -out_mask
            out_mask ^= low
            j = low.bit_length() - 1
            cand = cols[j] & free_in
            if cand:
                p = grant_ptr[j]
                rot = ((cand >> p) | (cand << (n - p))) & full
                i = (rot & -rot).bit_length() - 1 + p
                if i >= n:
                    i -= n
                grants[i] |= low
                granted |= 1 << i
        if not granted:
            break
        while granted:
            lowi = granted & -granted
            granted ^= lowi
            i = lowi.bit_length() - 1
            g = grants[i]
            grants[i] = 0
            p = accept_ptr[i]
            rot = ((g >> p) | (g << (n - p))) & full
            j = (rot & -rot).bit_length() - 1 + p
            if j >= n:
                j -= n
            pairs.append((i, j))
            free_in ^= lowi
            free_out &= ~(1 << j)
            if it == 0:
                accept_ptr[i] = j + 1 if j + 1 < n else 0
                grant_ptr[j] = i + 1 if i + 1 < n else 0
    return pairs


def islip_schedule(req, state, iterations=None):
    """Match inputs to outputs for one slot.

    Parameters
    ----------
    req : N x N array-like of bool
        ``req[i][j]`` is true when VOQ (i, j) holds a cell.
    state : IslipState
        Pointers before the slot; not modified.
    iterations : int, optional
        Defaults to ``ceil(log2 N)``.

    Returns
    -------
    (frozenset of (i, j), IslipState)
    """
    n = len(req)
    if state.n != n:
        raise ValueError(f"state is for {state.n} ports, request matrix is {n}x{n}")
    if iterations is None:
        iterations = default_iterations(n)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    cols = [0] * n
    for i, row in enumerate(req):
        if len(row) != n:
            raise ValueError("request matrix must be square")
        for j, r in enumerate(row):
            if r:
                cols[j] |= 1 << i
    new = state.copy()
    pairs = islip_match(cols, n, new.grant_ptr, new.accept_ptr, iterations)
    return frozenset(pairs), new
