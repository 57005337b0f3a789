import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cellseg.islip import IslipState, default_iterations, islip_schedule


def reference_islip(req, gp, ap, iterations):
    """Plain-loop iSLIP used as an oracle for the bitmask version."""
    n = len(req)
    gp, ap = list(gp), list(ap)
    in_m, out_m = [None] * n, [None] * n
    for it in range(iterations):
        grants = {}
        for j in range(n):
            if out_m[j] is not None:
                continue
            for d in range(n):
                i = (gp[j] + d) % n
                if in_m[i] is None and req[i][j]:
                    grants.setdefault(i, []).append(j)
                    break
        if not grants:
            break
        for i, js in grants.items():
            for d in range(n):
                j = (ap[i] + d) % n
                if j in js:
                    in_m[i], out_m[j] = j, i
                    if it == 0:
                        ap[i] = (j + 1) % n
                        gp[j] = (i + 1) % n
                    break
    pairs = frozenset((i, j) for i, j in enumerate(in_m) if j is not None)
    return pairs, gp, ap


def check_valid(pairs, req):
    ins = [i for i, _ in pairs]
    outs = [j for _, j in pairs]
    assert len(set(ins)) == len(ins) and len(set(outs)) == len(outs)
    assert all(req[i][j] for i, j in pairs)


def test_default_iterations():
    assert default_iterations(16) == 4
    assert default_iterations(2) == 1
    assert default_iterations(1) == 1
    assert default_iterations(17) == 5


def test_single_request():
    req = [[True, False], [False, False]]
    pairs, st2 = islip_schedule(req, IslipState.new(2), 1)
    assert pairs == {(0, 0)}
    assert st2.grant_ptr[0] == 1 and st2.accept_ptr[0] == 1


def test_all_to_one_output_round_robin():
    req = [[j == 0 for j in range(4)] for _ in range(4)]
    state = IslipState.new(4)
    winners = []
    for _ in range(8):
        pairs, state = islip_schedule(req, state)
        assert len(pairs) == 1
        winners.append(next(iter(pairs))[0])
    assert winners == [0, 1, 2, 3, 0, 1, 2, 3]


def test_full_two_by_two():
    req = [[True, True], [True, True]]
    pairs, _ = islip_schedule(req, IslipState.new(2), 2)
    assert len(pairs) == 2


def test_state_not_mutated_and_errors():
    state = IslipState.new(3)
    islip_schedule([[1, 1, 1]] * 3, state)
    assert state.grant_ptr == [0, 0, 0] and state.accept_ptr == [0, 0, 0]
    with pytest.raises(ValueError):
        islip_schedule([[1, 1]] * 2, state)
    with pytest.raises(ValueError):
        islip_schedule([[1]], IslipState.new(1), 0)


def test_empty_requests():
    pairs, st2 = islip_schedule([[False] * 4] * 4, IslipState.new(4))
    assert pairs == frozenset() and st2.grant_ptr == [0] * 4


matrices = st.integers(1, 8).flatmap(
    lambda n: st.tuples(
        st.lists(st.lists(st.booleans(), min_size=n, max_size=n), min_size=n, max_size=n),
        st.lists(st.integers(0, n - 1), min_size=n, max_size=n),
        st.lists(st.integers(0, n - 1), min_size=n, max_size=n),
        st.integers(1, n + 1)))


@settings(max_examples=300, deadline=None)
@given(matrices)
def test_matches_reference(args):
    req, gp, ap, iters = args
    pairs, new = islip_schedule(req, IslipState(list(gp), list(ap)), iters)
    ref_pairs, ref_gp, ref_ap = reference_islip(req, gp, ap, iters)
    assert pairs == ref_pairs
    assert new.grant_ptr == ref_gp and new.accept_ptr == ref_ap
    check_valid(pairs, req)
    n = len(req)
    assert all(0 <= p < n for p in new.grant_ptr + new.accept_ptr)
    if any(any(r) for r in req):
        assert pairs


@settings(max_examples=200, deadline=None)
@given(matrices)
def test_maximal_after_n_iterations(args):
    req, gp, ap, _ = args
    n = len(req)
    pairs, _ = islip_schedule(req, IslipState(list(gp), list(ap)), n)
    mi = {i for i, _ in pairs}
    mo = {j for _, j in pairs}
    for i in range(n):
        for j in range(n):
            if req[i][j]:
                assert i in mi or j in mo


@settings(max_examples=50, deadline=None)
@given(matrices)
def test_deterministic(args):
    req, gp, ap, iters = args
    a = islip_schedule(req, IslipState(list(gp), list(ap)), iters)
    b = islip_schedule(req, IslipState(list(gp), list(ap)), iters)
    assert a[0] == b[0] and a[1] == b[1]


@pytest.mark.parametrize("iterations", [1, 2])
def test_saturation_desynchronizes(iterations):
    n = 4
    req = [[True] * n for _ in range(n)]
    state = IslipState.new(n)
    sizes = []
    for _ in range(50):
        pairs, state = islip_schedule(req, state, iterations)
        sizes.append(len(pairs))
    assert all(s == n for s in sizes[n:])


def test_random_load_throughput_reasonable():
    rng = np.random.default_rng(1)
    n = 8
    state = IslipState.new(n)
    for _ in range(200):
        req = rng.random((n, n)) < 0.5
        pairs, state = islip_schedule(req.tolist(), state, n)
        check_valid(pairs, req)
