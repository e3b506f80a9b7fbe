"""SC, list (SCL / PSCL) and stack (stack / Pstack / PstackD) decoders.

All decoders take base-2 channel LLRs and a CodeSpec, work for both polar
and PAC codes (SC is polar only), and return a DecodeOutcome carrying the
data estimate plus complexity counters.

Pruned variants drop a branch whose bit metric falls below ``m_T``: PSCL
compares the unbiased metric phi, the stack variants compare the biased
metric gamma = phi - E0.  The stack variants prune at every position.
PSCL prunes only where the tree branches (data positions) unless asked to
prune frozen positions as well; a frozen-position kill leaves the list
with nothing to replace the path, which costs error rate.

``mean_stack`` is the stack size averaged over pop iterations;
``final_stack`` is the size when the decoder stops.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .channel import KAPPA
from .codeword import CodeSpec
from .metric import LlrWorkspace, _phi, accumulate, llr_at, push_bit

DEFAULT_STACK_CAP = 10**6


@dataclass
class DecodeOutcome:
    data_estimate: np.ndarray | None
    failed: bool = False
    failure: str | None = None
    sort_events: int = 0
    f_ops: int = 0
    g_ops: int = 0
    max_stack: int = 0
    mean_stack: float = 0.0
    final_stack: int = 0
    node_visits: int = 0
    pruned_branches: int = 0
    metric: float = 0.0
    v_estimate: np.ndarray | None = field(default=None, repr=False)

    def counters(self) -> dict:
        return {
            "sort_events": self.sort_events,
            "f_ops": self.f_ops,
            "g_ops": self.g_ops,
            "max_stack": self.max_stack,
            "mean_stack": self.mean_stack,
            "final_stack": self.final_stack,
            "node_visits": self.node_visits,
            "pruned_branches": self.pruned_branches,
        }


def _gen_mask(spec: CodeSpec) -> int:
    return sum(int(c) << (k - 1) for k, c in enumerate(spec.conv_coeffs) if k >= 1 and c)


def _prepare(llr, spec: CodeSpec) -> np.ndarray:
    chan = np.ascontiguousarray(np.clip(np.asarray(llr, dtype=float), -KAPPA, KAPPA))
    if chan.shape != (spec.N,):
        raise ValueError(f"expected {spec.N} channel LLRs, got shape {chan.shape}")
    return chan


def _outcome_from_v(v: np.ndarray, spec: CodeSpec, **kw) -> DecodeOutcome:
    return DecodeOutcome(data_estimate=v[spec.info_mask].copy(), v_estimate=v, **kw)


# -- SC ---------------------------------------------------------------------

@njit(cache=True)
def _sc_kernel(chan, info):
    N = chan.size
    n = 0
    while (1 << n) < N:
        n += 1
    llr = np.zeros(max(N - 1, 1))
    ps = np.zeros(max(N - 1, 1), dtype=np.uint8)
    scratch = np.zeros(N, dtype=np.uint8)
    u = np.zeros(N, dtype=np.uint8)
    fops = 0
    gops = 0
    for phi in range(N):
        val, fo, go = llr_at(chan, llr, ps, phi, n)
        fops += fo
        gops += go
        if info[phi] and val < 0.0:
            u[phi] = 1
        if phi < N - 1:
            push_bit(ps, scratch, phi, u[phi], n)
    return u, fops, gops


def sc_decode(llr, spec: CodeSpec) -> DecodeOutcome:
    """Plain successive cancellation; LLR ties decide 0."""
    if spec.is_pac:
        raise ValueError("SC decoding is for polar codes; decode PAC codes with scl_decode(L=1)")
    u, fops, gops = _sc_kernel(_prepare(llr, spec), spec.info_mask)
    return _outcome_from_v(u, spec, f_ops=int(fops), g_ops=int(gops), node_visits=spec.N)


# -- list decoding ----------------------------------------------------------

@njit(cache=True)
def _parity(x):
    p = 0
    while x:
        p ^= 1
        x &= x - 1
    return p


@njit(cache=True)
def _list_kernel(chan, info, gen_mask, mem, list_size, threshold, prune_frozen):
    N = chan.size
    n = 0
    while (1 << n) < N:
        n += 1
    L = list_size
    W = max(N - 1, 1)
    llr = np.zeros((L, W))
    ps = np.zeros((L, W), dtype=np.uint8)
    vb = np.zeros((L, N), dtype=np.uint8)
    state = np.zeros(L, dtype=np.int64)
    metric = np.zeros(L)
    slots = np.zeros(L, dtype=np.int64)
    new_slots = np.zeros(L, dtype=np.int64)
    dec = np.zeros(L)
    c_parent = np.zeros(2 * L, dtype=np.int64)
    c_v = np.zeros(2 * L, dtype=np.uint8)
    c_u = np.zeros(2 * L, dtype=np.uint8)
    c_metric = np.zeros(2 * L)
    has_child = np.zeros(L, dtype=np.bool_)
    taken = np.zeros(L, dtype=np.bool_)
    inuse = np.zeros(L, dtype=np.bool_)
    freelist = np.zeros(L, dtype=np.int64)
    scratch = np.zeros(N, dtype=np.uint8)
    reg_mask = (1 << mem) - 1
    active = 1
    sorts = 0
    fops = 0
    gops = 0
    visits = 0
    pruned = 0
    for phi in range(N):
        for k in range(active):
            s = slots[k]
            val, fo, go = llr_at(chan, llr[s], ps[s], phi, n)
            dec[k] = val
            fops += fo
            gops += go
        visits += active
        nb = 2 if info[phi] else 1
        nc = 0
        for k in range(active):
            s = slots[k]
            par = _parity(state[s] & gen_mask)
            for v in range(nb):
                u = v ^ par
                b = _phi(dec[k], u)
                if b < threshold and (nb == 2 or prune_frozen):
                    pruned += 1
                    continue
                c_parent[nc] = k
                c_v[nc] = v
                c_u[nc] = u
                c_metric[nc] = accumulate(metric[s], b)
                nc += 1
        if nc == 0:
            return vb[0], True, sorts, fops, gops, visits, pruned, -KAPPA
        if nc > L:
            sorts += 1
            # stable: equal metrics keep the earlier-created candidate
            sel = np.sort(np.argsort(-c_metric[:nc], kind="mergesort")[:L])
        else:
            sel = np.arange(nc)
        nsel = sel.size

        # Reuse each parent's slot for its first surviving child; second
        # children are copied into slots freed by childless parents.
        for k in range(active):
            has_child[k] = False
            taken[k] = False
        for s in range(L):
            inuse[s] = False
        for k in range(active):
            inuse[slots[k]] = True
        for idx in range(nsel):
            has_child[c_parent[sel[idx]]] = True
        nfree = 0
        for k in range(active):
            if not has_child[k]:
                freelist[nfree] = slots[k]
                nfree += 1
        for s in range(L):
            if not inuse[s]:
                freelist[nfree] = s
                nfree += 1
        fi = 0
        for idx in range(nsel):
            k = c_parent[sel[idx]]
            s = slots[k]
            if not taken[k]:
                taken[k] = True
                new_slots[idx] = s
            else:
                t = freelist[fi]
                fi += 1
                llr[t, :] = llr[s, :]
                ps[t, :] = ps[s, :]
                vb[t, :phi] = vb[s, :phi]
                state[t] = state[s]
                new_slots[idx] = t
        for idx in range(nsel):
            j = sel[idx]
            t = new_slots[idx]
            vb[t, phi] = c_v[j]
            state[t] = ((state[t] << 1) | c_v[j]) & reg_mask
            metric[t] = c_metric[j]
            if phi < N - 1:
                push_bit(ps[t], scratch, phi, c_u[j], n)
        for idx in range(nsel):
            slots[idx] = new_slots[idx]
        active = nsel

    best = slots[0]
    for k in range(1, active):
        if metric[slots[k]] > metric[best]:
            best = slots[k]
    return vb[best], False, sorts, fops, gops, visits, pruned, metric[best]


def _list_decode(llr, spec: CodeSpec, list_size: int, threshold: float, prune_frozen: bool = False) -> DecodeOutcome:
    if list_size < 1:
        raise ValueError("list size must be >= 1")
    out = _list_kernel(
        _prepare(llr, spec), spec.info_mask, _gen_mask(spec), spec.memory, int(list_size), float(threshold),
        bool(prune_frozen),
    )
    v, failed, sorts, fops, gops, visits, pruned, metric = out
    counters = dict(
        sort_events=int(sorts), f_ops=int(fops), g_ops=int(gops),
        node_visits=int(visits), pruned_branches=int(pruned),
    )
    if failed:
        return DecodeOutcome(None, failed=True, failure="all_pruned", metric=float(metric), **counters)
    return _outcome_from_v(v.copy(), spec, metric=float(metric), **counters)


def scl_decode(llr, spec: CodeSpec, list_size: int) -> DecodeOutcome:
    """Successive-cancellation list decoding with the phi path metric.

    Frozen positions extend every path along the 0 input and add their
    (possibly negative) metric. For PAC codes each path carries its own
    convolution register and phi is evaluated on the convolution output.
    """
    return _list_decode(llr, spec, list_size, -math.inf)


def pscl_decode(llr, spec: CodeSpec, list_size: int, m_T: float, prune_frozen: bool = False) -> DecodeOutcome:
    """SCL that discards any branch with phi < m_T before survivor selection.

    A sort is only needed (and counted) when more than ``list_size``
    branches survive the threshold; if none survive, decoding fails.
    """
    return _list_decode(llr, spec, list_size, m_T, prune_frozen)


# -- stack decoding ---------------------------------------------------------

class DecoderPath:
    """One hypothesis in the search tree.

    ``bits`` packs the pre-transform prefix v_1..v_depth into an int (bit
    i-1 is v_i); ``state`` holds the last ``m`` v bits for the convolution.
    """

    __slots__ = ("depth", "bits", "state", "workspace", "metric")

    def __init__(self, depth, bits, state, workspace, metric):
        self.depth = depth
        self.bits = bits
        self.state = state
        self.workspace = workspace
        self.metric = metric

    @property
    def v_prefix(self) -> np.ndarray:
        return np.array([(self.bits >> i) & 1 for i in range(self.depth)], dtype=np.uint8)

    def __repr__(self):
        s = "".join(map(str, self.v_prefix))
        return f"DecoderPath({s or '-'}, {self.metric:.2f})"


class StackStore:
    """Paths ordered by metric, best first.

    Ties go to the longer path, then to the earlier insertion.
    """

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()
        self.max_size = 0

    def push(self, path: DecoderPath) -> None:
        heapq.heappush(self._heap, (-path.metric, -path.depth, next(self._seq), path))
        if len(self._heap) > self.max_size:
            self.max_size = len(self._heap)

    def pop(self) -> DecoderPath:
        return heapq.heappop(self._heap)[-1]

    def top(self) -> DecoderPath:
        return self._heap[0][-1]

    def __len__(self) -> int:
        return len(self._heap)

    def sorted_paths(self) -> list[DecoderPath]:
        return [e[-1] for e in sorted(self._heap)]


def _stack_run(llr, spec: CodeSpec, cutoff, m_T: float, max_entries: int, trace=None) -> DecodeOutcome:
    chan = _prepare(llr, spec)
    N, n = spec.N, spec.n
    bias = np.asarray(getattr(cutoff, "cutoff", cutoff), dtype=float)
    if bias.shape != (N,):
        raise ValueError(f"profile must cover {N} bit-channels")
    bias = bias.tolist()
    info = spec.info_mask.tolist()
    gen_mask = _gen_mask(spec)
    reg_mask = (1 << spec.memory) - 1
    scratch = np.zeros(N, dtype=np.uint8)

    store = StackStore()
    store.push(DecoderPath(0, 0, 0, LlrWorkspace(N), 0.0))
    fops = gops = visits = pruned = 0
    size_sum = 0
    failure = None
    while True:
        top = store.top()
        if top.depth == N:
            break
        path = store.pop()
        i = path.depth
        ws = path.workspace
        val, fo, go = llr_at(chan, ws.llr, ws.ps, i, n)
        fops += fo
        gops += go
        visits += 1
        par = (path.state & gen_mask).bit_count() & 1
        kids = []
        for v in ((0, 1) if info[i] else (0,)):
            u = v ^ par
            gamma = _phi(val, u) - bias[i]
            if gamma < m_T:
                pruned += 1
                continue
            kids.append((v, u, accumulate(path.metric, gamma)))
        for idx, (v, u, metric) in enumerate(kids):
            child_ws = ws if idx == len(kids) - 1 else ws.clone()
            if i < N - 1:
                push_bit(child_ws.ps, scratch, i, u, n)
            store.push(DecoderPath(i + 1, path.bits | (v << i), ((path.state << 1) | v) & reg_mask, child_ws, metric))
        if trace is not None:
            trace.append([(p.v_prefix, p.metric) for p in store.sorted_paths()])
        if len(store) == 0:
            failure = "stack_empty"
            break
        size_sum += len(store)
        if len(store) > max_entries:
            failure = "stack_overflow"
            break

    counters = dict(
        f_ops=fops, g_ops=gops, node_visits=visits, pruned_branches=pruned,
        max_stack=store.max_size, final_stack=len(store),
        mean_stack=size_sum / visits if visits else float(len(store)),
    )
    if failure is not None:
        return DecodeOutcome(None, failed=True, failure=failure, metric=-KAPPA, **counters)
    best = store.top()
    return _outcome_from_v(best.v_prefix, spec, metric=best.metric, **counters)


def stack_decode(llr, spec: CodeSpec, profile, max_entries: int = DEFAULT_STACK_CAP, trace=None) -> DecodeOutcome:
    """Stack algorithm with the cutoff-rate-biased metric gamma = phi - E0.

    ``profile`` is a ReliabilityProfile (its cutoff rates are the biases) or
    a plain array of N biases. ``trace``, if a list, receives the sorted
    stack contents after every iteration.
    """
    return _stack_run(llr, spec, profile, -math.inf, max_entries, trace)


def pstack_decode(llr, spec: CodeSpec, profile, m_T: float, max_entries: int = DEFAULT_STACK_CAP,
                  trace=None) -> DecodeOutcome:
    """Stack decoding that never inserts a branch with gamma < m_T."""
    return _stack_run(llr, spec, profile, m_T, max_entries, trace)


def pstackd_decode(llr, spec: CodeSpec, profile, schedule, snr_db: float,
                   max_entries: int = DEFAULT_STACK_CAP) -> DecodeOutcome:
    """Pstack with the threshold looked up from an SNR schedule."""
    return _stack_run(llr, spec, profile, float(schedule(snr_db)), max_entries)


def extract_data(path, spec: CodeSpec) -> np.ndarray:
    """Data bits v_A of a complete path (DecoderPath or a length-N v vector)."""
    if isinstance(path, DecoderPath):
        if path.depth < spec.N:
            raise ValueError(f"path has depth {path.depth} < N={spec.N}")
        v = path.v_prefix
    else:
        v = np.asarray(path, dtype=np.uint8)
        if v.shape != (spec.N,):
            raise ValueError(f"path has length {v.size} < N={spec.N}")
    return v[spec.info_mask].copy()
