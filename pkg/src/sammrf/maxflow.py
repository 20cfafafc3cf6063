"""s-t max-flow / min-cut on sparse graphs with real capacities.

The solver follows Boykov and Kolmogorov's two-search-tree augmenting path
scheme (trees are reused between augmentations, orphans re-adopted), which
is the usual choice for 4-connected vision grids. It is compiled with numba.

Arc ``2e`` is ``u -> v`` of edge ``e``, arc ``2e + 1`` its reverse, so the
sister of arc ``a`` is ``a ^ 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from numba import njit

_NONE = -1
_TERMINAL = -2
_ORPHAN = -3
_FREE, _SRC, _SNK = 0, 1, 2
_INF_DIST = 1 << 60


@dataclass(frozen=True)
class FlowNetwork:
    """Terminal capacities per node plus bidirectional neighbor arcs.

    ``edges`` rows are ``(u, v)``; ``cap_forward`` is ``u -> v`` and
    ``cap_backward`` is ``v -> u``.
    """

    from_source: np.ndarray
    to_sink: np.ndarray
    edges: np.ndarray
    cap_forward: np.ndarray
    cap_backward: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(self.from_source, dtype=np.float64)
        t = np.ascontiguousarray(self.to_sink, dtype=np.float64)
        e = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int64).reshape(-1, 2))
        cf = np.ascontiguousarray(self.cap_forward, dtype=np.float64).reshape(-1)
        cb = np.ascontiguousarray(self.cap_backward, dtype=np.float64).reshape(-1)
        n = s.shape[0]
        if t.shape != (n,) or s.ndim != 1:
            raise ValueError("from_source and to_sink must be 1-D of equal length")
        if cf.shape[0] != e.shape[0] or cb.shape[0] != e.shape[0]:
            raise ValueError("one forward and one backward capacity per edge")
        for name, arr in (("from_source", s), ("to_sink", t), ("cap_forward", cf), ("cap_backward", cb)):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} capacities must be finite and >= 0")
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loop edge")
        for name, arr in (("from_source", s), ("to_sink", t), ("edges", e), ("cap_forward", cf), ("cap_backward", cb)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def node_count(self) -> int:
        return self.from_source.shape[0]


@dataclass(frozen=True)
class CutResult:
    flow: float
    source_side: np.ndarray  # bool per node


@njit(cache=True)
def _solve(src, snk, eu, ev, ecf, ecb):
    n = src.shape[0]
    m = eu.shape[0]

    # adjacency in CSR form, arcs listed in edge order
    first = np.zeros(n + 1, np.int64)
    for e in range(m):
        first[eu[e] + 1] += 1
        first[ev[e] + 1] += 1
    for i in range(n):
        first[i + 1] += first[i]
    fill = first[:n].copy()
    adj = np.empty(2 * m, np.int64)
    head = np.empty(2 * m, np.int64)
    rcap = np.empty(2 * m, np.float64)
    for e in range(m):
        adj[fill[eu[e]]] = 2 * e
        fill[eu[e]] += 1
        adj[fill[ev[e]]] = 2 * e + 1
        fill[ev[e]] += 1
        head[2 * e] = ev[e]
        head[2 * e + 1] = eu[e]
        rcap[2 * e] = ecf[e]
        rcap[2 * e + 1] = ecb[e]

    flow = 0.0
    tr = np.empty(n, np.float64)  # >0: residual s->i, <0: residual i->t
    parent = np.full(n, _NONE, np.int64)
    tree = np.zeros(n, np.int8)
    ts = np.zeros(n, np.int64)
    dist = np.zeros(n, np.int64)

    cap = n + 1
    queue = np.empty(cap, np.int64)
    inq = np.zeros(n, np.bool_)
    qh = 0
    qt = 0
    orph = np.empty(cap, np.int64)
    oh = 0
    ot = 0

    for i in range(n):
        s = src[i]
        t = snk[i]
        flow += min(s, t)
        tr[i] = s - t
        if tr[i] != 0.0:
            tree[i] = _SRC if tr[i] > 0.0 else _SNK
            parent[i] = _TERMINAL
            dist[i] = 1
            queue[qt] = i
            qt = (qt + 1) % cap
            inq[i] = True

    time = 0
    cur = -1
    while True:
        i = cur
        if i != -1 and tree[i] == _FREE:
            i = -1
        if i == -1:
            while qh != qt:
                x = queue[qh]
                qh = (qh + 1) % cap
                inq[x] = False
                if tree[x] != _FREE:
                    i = x
                    break
            if i == -1:
                break

        # growth
        mid = -1
        if tree[i] == _SRC:
            for k in range(first[i], first[i + 1]):
                a = adj[k]
                if rcap[a] > 0.0:
                    j = head[a]
                    if tree[j] == _FREE:
                        tree[j] = _SRC
                        parent[j] = a ^ 1
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
                        if not inq[j]:
                            queue[qt] = j
                            qt = (qt + 1) % cap
                            inq[j] = True
                    elif tree[j] == _SNK:
                        mid = a
                        break
                    elif ts[j] <= ts[i] and dist[j] > dist[i]:
                        parent[j] = a ^ 1
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
        else:
            for k in range(first[i], first[i + 1]):
                a = adj[k]
                if rcap[a ^ 1] > 0.0:
                    j = head[a]
                    if tree[j] == _FREE:
                        tree[j] = _SNK
                        parent[j] = a ^ 1
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
                        if not inq[j]:
                            queue[qt] = j
                            qt = (qt + 1) % cap
                            inq[j] = True
                    elif tree[j] == _SRC:
                        mid = a ^ 1
                        break
                    elif ts[j] <= ts[i] and dist[j] > dist[i]:
                        parent[j] = a ^ 1
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1

        time += 1
        if mid == -1:
            cur = -1
            continue
        cur = i

        # augmentation: bottleneck along source path, middle arc, sink path
        b = rcap[mid]
        x = head[mid ^ 1]
        while parent[x] != _TERMINAL:
            a = parent[x]
            if rcap[a ^ 1] < b:
                b = rcap[a ^ 1]
            x = head[a]
        if tr[x] < b:
            b = tr[x]
        x = head[mid]
        while parent[x] != _TERMINAL:
            a = parent[x]
            if rcap[a] < b:
                b = rcap[a]
            x = head[a]
        if -tr[x] < b:
            b = -tr[x]

        rcap[mid ^ 1] += b
        rcap[mid] -= b
        x = head[mid ^ 1]
        while parent[x] != _TERMINAL:
            a = parent[x]
            rcap[a] += b
            rcap[a ^ 1] -= b
            if rcap[a ^ 1] <= 0.0:
                parent[x] = _ORPHAN
                oh = oh - 1 if oh > 0 else cap - 1
                orph[oh] = x
            x = head[a]
        tr[x] -= b
        if tr[x] <= 0.0:
            parent[x] = _ORPHAN
            oh = oh - 1 if oh > 0 else cap - 1
            orph[oh] = x
        x = head[mid]
        while parent[x] != _TERMINAL:
            a = parent[x]
            rcap[a ^ 1] += b
            rcap[a] -= b
            if rcap[a] <= 0.0:
                parent[x] = _ORPHAN
                oh = oh - 1 if oh > 0 else cap - 1
                orph[oh] = x
            x = head[a]
        tr[x] += b
        if tr[x] >= 0.0:
            parent[x] = _ORPHAN
            oh = oh - 1 if oh > 0 else cap - 1
            orph[oh] = x
        flow += b

        # adoption
        while oh != ot:
            o = orph[oh]
            oh = (oh + 1) % cap
            side = tree[o]
            dmin = _INF_DIST
            amin = _NONE
            for k in range(first[o], first[o + 1]):
                a0 = adj[k]
                # residual arc must run toward the orphan for the source tree,
                # away from it for the sink tree
                r = rcap[a0 ^ 1] if side == _SRC else rcap[a0]
                if r <= 0.0:
                    continue
                j = head[a0]
                if tree[j] != side:
                    continue
                d = 0
                y = j
                while True:
                    if ts[y] == time:
                        d += dist[y]
                        break
                    a = parent[y]
                    d += 1
                    if a == _TERMINAL:
                        ts[y] = time
                        dist[y] = 1
                        break
                    if a == _ORPHAN:
                        d = _INF_DIST
                        break
                    y = head[a]
                if d < _INF_DIST:
                    if d < dmin:
                        amin = a0
                        dmin = d
                    y = j
                    while ts[y] != time:
                        ts[y] = time
                        dist[y] = d
                        d -= 1
                        y = head[parent[y]]
            if amin != _NONE:
                parent[o] = amin
                ts[o] = time
                dist[o] = dmin + 1
                continue
            for k in range(first[o], first[o + 1]):
                a0 = adj[k]
                j = head[a0]
                if tree[j] != side:
                    continue
                r = rcap[a0 ^ 1] if side == _SRC else rcap[a0]
                if r > 0.0 and not inq[j]:
                    queue[qt] = j
                    qt = (qt + 1) % cap
                    inq[j] = True
                a = parent[j]
                if a >= 0 and head[a] == o:
                    parent[j] = _ORPHAN
                    orph[ot] = j
                    ot = (ot + 1) % cap
            tree[o] = _FREE
            parent[o] = _NONE

    # a node can reach the sink in the residual graph -> sink side
    reach = np.zeros(n, np.bool_)
    stack = np.empty(n, np.int64)
    sp = 0
    for i in range(n):
        if tr[i] < 0.0:
            reach[i] = True
            stack[sp] = i
            sp += 1
    while sp > 0:
        sp -= 1
        v = stack[sp]
        for k in range(first[v], first[v + 1]):
            a = adj[k]
            u = head[a]
            if not reach[u] and rcap[a ^ 1] > 0.0:
                reach[u] = True
                stack[sp] = u
                sp += 1
    return flow, np.logical_not(reach)


def solve_arrays(from_source, to_sink, eu, ev, cap_forward, cap_backward):
    """Unchecked entry point on raw arrays; returns ``(flow, source_side)``."""
    return _solve(from_source, to_sink, eu, ev, cap_forward, cap_backward)


def max_flow(net: FlowNetwork) -> CutResult:
    """Maximum s-t flow and the corresponding minimum cut.

    A node is put on the source side unless it can still reach the sink in
    the final residual graph, so zero-capacity ties fall to the source side.
    """
    e = net.edges
    flow, side = _solve(
        net.from_source, net.to_sink,
        np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1]),
        net.cap_forward, net.cap_backward,
    )
    return CutResult(float(flow), side)


def cut_capacity(net: FlowNetwork, source_side) -> float:
    """Capacity of all arcs leaving the source side of the partition."""
    side = np.asarray(source_side, dtype=bool)
    if side.shape != (net.node_count,):
        raise ValueError("one side flag per node")
    total = float(np.sum(net.to_sink[side]) + np.sum(net.from_source[~side]))
    if net.edges.size:
        su = side[net.edges[:, 0]]
        sv = side[net.edges[:, 1]]
        total += float(np.sum(net.cap_forward[su & ~sv]) + np.sum(net.cap_backward[sv & ~su]))
    return total


def brute_force_min_cut(net: FlowNetwork) -> float:
    """Minimum cut capacity by enumerating all ``2**n`` partitions (test oracle)."""
    n = net.node_count
    if n > 20:
        raise ValueError("brute force limited to 20 nodes")
    return min(cut_capacity(net, np.array(bits, dtype=bool)) for bits in product((False, True), repeat=n))
