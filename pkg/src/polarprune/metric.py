"""LLR recursion kernels, bit metrics, and a brute-force bit-channel oracle.

Everything is in the base-2 log domain.  Values saturate at +-KAPPA, which
plays the role of infinity; no NaN paths exist.

SC workspace layout (one row per decoding path, length N - 1): level
``lam`` (0 <= lam < n) holds 2**lam LLRs starting at offset 2**lam - 1.
Level n is the channel LLR vector, shared by every path and never copied.
The partial-sum row uses the same layout and stores, per level, the
re-encoded bits of the most recent left sibling.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .channel import KAPPA, ChannelModel, channel_llr

LN2 = math.log(2.0)


@njit(cache=True)
def _clip(x):
    if x > KAPPA:
        return KAPPA
    if x < -KAPPA:
        return -KAPPA
    return x


@njit(cache=True)
def _log2_1p_exp2_neg(t):
    # log2(1 + 2^-t) for t >= 0
    return math.log1p(2.0 ** (-t)) / LN2


@njit(cache=True)
def f_update(a, b):
    """Check-node update log2((1 + 2^(a+b)) / (2^a + 2^b))."""
    a = _clip(a)
    b = _clip(b)
    aa, ab = abs(a), abs(b)
    mag = aa if aa < ab else ab
    if (a < 0.0) != (b < 0.0):
        mag = -mag
    if aa >= KAPPA and ab >= KAPPA:
        # both inputs stand for infinity; so does the output
        return mag
    if a == 0.0 or b == 0.0:
        mag = 0.0
    return mag + _log2_1p_exp2_neg(abs(a + b)) - _log2_1p_exp2_neg(abs(a - b))


@njit(cache=True)
def g_update(a, b, s):
    """Variable-node update b + (1 - 2s) a."""
    if s:
        return _clip(b - a)
    return _clip(b + a)


@njit(cache=True)
def _phi(llr, u):
    x = -llr if u else llr
    if x <= -KAPPA:
        return -KAPPA
    if x >= 0.0:
        return 1.0 - _log2_1p_exp2_neg(x)
    return 1.0 + x - _log2_1p_exp2_neg(-x)


@njit(cache=True)
def accumulate(path_metric, bit_metric):
    return _clip(path_metric + bit_metric)


def bit_metric_phi(llr, u):
    """1 - log2(1 + 2^(-L (-1)^u)); scalars or arrays.

    Bounded above by 1. A branch that contradicts a saturated LLR gets
    exactly -KAPPA.
    """
    llr = np.asarray(llr, dtype=float)
    x = llr * (1.0 - 2.0 * np.asarray(u, dtype=float))
    soft = np.maximum(-x, 0.0) + np.log1p(np.exp2(-np.abs(x))) / LN2
    out = np.where(x <= -KAPPA, -KAPPA, 1.0 - soft)
    return float(out) if out.ndim == 0 else out


def bit_metric_gamma(llr, u, e0):
    """Bit metric biased by the bit-channel cutoff rate, for stack decoding."""
    return bit_metric_phi(llr, u) - e0


# -- SC workspace recursion -------------------------------------------------

@njit(cache=True)
def _trailing_zeros(x):
    t = 0
    while (x & 1) == 0:
        x >>= 1
        t += 1
    return t


@njit(cache=True)
def llr_at(chan, llr, ps, phi, n):
    """Decision LLR of bit ``phi`` (0-based), refreshing only stale levels.

    Returns (llr, f_ops, g_ops). Requires bits 0..phi-1 to have been pushed
    into ``ps`` with :func:`push_bit`.
    """
    start = n - 1 if phi == 0 else _trailing_zeros(phi)
    fops = 0
    gops = 0
    for lam in range(start, -1, -1):
        h = 1 << lam
        out = h - 1
        if lam + 1 == n:
            src = chan
            soff = 0
        else:
            src = llr
            soff = 2 * h - 1
        if phi != 0 and lam == start:
            for j in range(h):
                llr[out + j] = g_update(src[soff + j], src[soff + h + j], ps[out + j])
            gops += h
        else:
            for j in range(h):
                llr[out + j] = f_update(src[soff + j], src[soff + h + j])
            fops += h
    if n == 0:
        return chan[0], 0, 0
    return llr[0], fops, gops


@njit(cache=True)
def push_bit(ps, scratch, phi, u, n):
    """Fold the decided polar-input bit ``u`` of position ``phi`` into ``ps``."""
    scratch[0] = u
    lam = 0
    while lam < n and (phi >> lam) & 1:
        h = 1 << lam
        off = h - 1
        for j in range(h):
            scratch[h + j] = scratch[j]
            scratch[j] ^= ps[off + j]
        lam += 1
    if lam < n:
        h = 1 << lam
        for j in range(h):
            ps[h - 1 + j] = scratch[j]


@njit(cache=True)
def _genie_llrs(chan2d, u2d):
    T, N = chan2d.shape
    n = 0
    while (1 << n) < N:
        n += 1
    out = np.empty((T, N))
    llr = np.zeros(max(N - 1, 1))
    ps = np.zeros(max(N - 1, 1), dtype=np.uint8)
    scratch = np.zeros(N, dtype=np.uint8)
    for t in range(T):
        chan = chan2d[t]
        for phi in range(N):
            out[t, phi] = llr_at(chan, llr, ps, phi, n)[0]
            push_bit(ps, scratch, phi, u2d[t, phi], n)
    return out


def genie_llrs(chan_llr, u) -> np.ndarray:
    """Decision LLRs of every bit-channel when the true u prefix is known.

    ``chan_llr`` and ``u`` are (N,) or (T, N); the result has the same shape.
    """
    chan = np.atleast_2d(np.asarray(chan_llr, dtype=float))
    uu = np.atleast_2d(np.asarray(u, dtype=np.uint8))
    if uu.shape[0] == 1 and chan.shape[0] > 1:
        uu = np.broadcast_to(uu, chan.shape)
    out = _genie_llrs(np.ascontiguousarray(chan), np.ascontiguousarray(uu))
    return out[0] if np.ndim(chan_llr) == 1 else out


class LlrWorkspace:
    """Per-path SC state: staged LLRs and left-sibling partial sums."""

    __slots__ = ("llr", "ps")

    def __init__(self, N: int, llr=None, ps=None):
        size = max(N - 1, 1)
        self.llr = np.zeros(size) if llr is None else llr
        self.ps = np.zeros(size, dtype=np.uint8) if ps is None else ps

    def clone(self) -> "LlrWorkspace":
        return LlrWorkspace(0, self.llr.copy(), self.ps.copy())


# -- brute-force oracle -----------------------------------------------------

def _kron_generator(n: int) -> np.ndarray:
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    G = np.ones((1, 1), dtype=np.int64)
    for _ in range(n):
        G = np.kron(G, F)
    return G


def exact_bit_channel_llr(i: int, y, u_prefix, ch: ChannelModel, spec) -> float:
    """log2 W_N^(i)(y, u^{i-1} | 0) / W_N^(i)(y, u^{i-1} | 1) by enumeration.

    ``i`` is 1-based; ``u_prefix`` holds the polar inputs u_1..u_{i-1}. The
    future inputs are marginalized over all 2^(N-i) values using an explicit
    generator matrix, so nothing here shares code with the SC recursion.
    """
    N = spec.N if hasattr(spec, "N") else int(spec)
    if N > 16:
        raise NotImplementedError("brute-force marginalization supports N <= 16")
    if not 1 <= i <= N:
        raise ValueError(f"index must lie in 1..{N}")
    prefix = np.asarray(u_prefix, dtype=np.int64)[: i - 1]
    if prefix.size != i - 1:
        raise ValueError(f"need {i - 1} prefix bits, got {prefix.size}")
    L = channel_llr(y, ch)
    G = _kron_generator(N.bit_length() - 1)
    free = N - i
    suffix = (np.arange(2**free)[:, None] >> np.arange(free)[::-1]) & 1
    lse = []
    for ui in (0, 1):
        U = np.zeros((2**free, N), dtype=np.int64)
        U[:, : i - 1] = prefix
        U[:, i - 1] = ui
        U[:, i:] = suffix
        X = U @ G % 2
        # log2 W(y_j|x_j) = const_j + (1 - 2 x_j) L_j / 2
        loglik = ((1 - 2 * X) * L).sum(axis=1) / 2.0
        lse.append(np.logaddexp2.reduce(loglik))
    return float(np.clip(lse[0] - lse[1], -KAPPA, KAPPA))
