"""Bit-channel capacities and cutoff rates, and dispersion-based thresholds.

On a symmetric channel every bit-channel can be profiled with the all-zero
codeword, so Monte-Carlo profiling runs genie-aided SC on all-zero input.
The mean correct-branch bit metric estimates I(W_N^(i)); the Bhattacharyya
parameter Z_i = E[2^(-L_i/2)] gives the cutoff rate 1 - log2(1 + Z_i).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .channel import KAPPA, ChannelModel, channel_llr, transmit, trial_rng
from .metric import bit_metric_phi, genie_llrs

PROFILE_STREAM = 0x5052  # keeps profiling draws apart from simulation trials
_BATCH = 4096


@dataclass
class ReliabilityProfile:
    N: int
    capacity: np.ndarray
    cutoff: np.ndarray
    source: str = "bec_exact"
    channel: str = "bec"
    snr_db: float | None = None
    epsilon: float | None = None
    trials: int = 0
    seed: int = 0

    def __post_init__(self):
        self.capacity = np.asarray(self.capacity, dtype=float)
        self.cutoff = np.asarray(self.cutoff, dtype=float)
        if self.capacity.shape != (self.N,) or self.cutoff.shape != (self.N,):
            raise ValueError("profile arrays must have length N")


def bec_exact_profile(N: int, epsilon: float) -> ReliabilityProfile:
    """Exact BEC bit-channel erasure probabilities by the polarization recursion."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("erasure probability must lie in [0, 1]")
    if N < 1 or N & (N - 1):
        raise ValueError("N must be a power of two")
    z = np.array([float(epsilon)])
    while z.size < N:
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2.0 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return ReliabilityProfile(N, 1.0 - z, 1.0 - np.log2(1.0 + z), "bec_exact", "bec", epsilon=float(epsilon))


def mc_profile(N: int, ch: ChannelModel, trials: int, seed: int = 0) -> ReliabilityProfile:
    """Genie-aided Monte-Carlo estimate of capacity and cutoff per bit-channel."""
    if trials < 1:
        raise ValueError("trials must be positive")
    sum_phi = np.zeros(N)
    sum_z = np.zeros(N)
    done = 0
    batch = 0
    while done < trials:
        T = min(_BATCH, trials - done)
        rng = trial_rng(seed, batch, PROFILE_STREAM)
        y = transmit(np.ones((T, N)), ch, rng)
        L = genie_llrs(channel_llr(y, ch), np.zeros(N, dtype=np.uint8))
        sum_phi += bit_metric_phi(L, 0).sum(axis=0)
        sum_z += np.exp2(-np.maximum(L, -2000.0) / 2.0).sum(axis=0)
        done += T
        batch += 1
    capacity = np.clip(sum_phi / trials, 0.0, 1.0)
    z = np.clip(sum_z / trials, 0.0, 1.0)
    cutoff = np.clip(1.0 - np.log2(1.0 + z), 0.0, 1.0)
    return ReliabilityProfile(
        N, capacity, cutoff, "monte_carlo", ch.kind,
        snr_db=ch.snr_db if ch.kind == "bi_awgn" else None,
        epsilon=ch.erasure_prob if ch.kind == "bec" else None,
        trials=trials, seed=seed,
    )


def bi_awgn_capacity_dispersion(snr_db: float, rate: float, nodes: int = 64, snr_kind: str = "ebn0"):
    """Capacity C and dispersion V (bits) of BPSK over AWGN by Gauss-Hermite quadrature."""
    sigma2 = ChannelModel.awgn(snr_db, rate, snr_kind).sigma2
    x, w = np.polynomial.hermite.hermgauss(nodes)
    y = 1.0 + math.sqrt(2.0 * sigma2) * x
    # information density of x=+1: 1 - log2(1 + e^(-2y/sigma^2))
    z = -2.0 * y / sigma2
    dens = 1.0 - (np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))) / math.log(2.0)
    w = w / math.sqrt(math.pi)
    C = float(np.dot(w, dens))
    V = float(np.dot(w, (dens - C) ** 2))
    return C, V


def threshold_from_fer(D: float) -> int:
    """floor(log2(D / 10)); a zero FER maps to -KAPPA."""
    if D <= 0.0:
        return int(-KAPPA)
    return max(math.floor(math.log2(D / 10.0)), int(-KAPPA))


def _normal_approx_arg(N: int, K: int, snr_db: float, snr_kind: str) -> float:
    C, V = bi_awgn_capacity_dispersion(snr_db, K / N, snr_kind=snr_kind)
    num = N * C - K + 0.5 * math.log2(N)
    if N * V <= 0.0:
        # no dispersion left: the channel is deterministic
        return math.copysign(math.inf, num)
    return num / math.sqrt(N * V)


def normal_approx_fer(N: int, K: int, snr_db: float, snr_kind: str = "ebn0") -> float:
    return float(norm.sf(_normal_approx_arg(N, K, snr_db, snr_kind)))


def dynamic_threshold(N: int, K: int, snr_db: float, snr_kind: str = "ebn0") -> int:
    """Pruning threshold from the normal-approximation FER D: floor(log2(D/10))."""
    arg = _normal_approx_arg(N, K, snr_db, snr_kind)
    # log-survival keeps D meaningful far below double underflow
    log2_D = norm.logsf(arg) / math.log(2.0)
    if not math.isfinite(log2_D):
        return int(-KAPPA)
    return max(math.floor(log2_D - math.log2(10.0)), int(-KAPPA))


@dataclass
class ThresholdSchedule:
    snr_grid: list[float] = field(default_factory=list)
    m_T: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.snr_grid) != len(self.m_T):
            raise ValueError("schedule needs one threshold per SNR point")

    @classmethod
    def constant(cls, m_T: float) -> "ThresholdSchedule":
        return cls([0.0], [float(m_T)])

    @classmethod
    def dynamic(cls, N: int, K: int, snr_grid) -> "ThresholdSchedule":
        grid = [float(s) for s in snr_grid]
        return cls(grid, [float(dynamic_threshold(N, K, s)) for s in grid])

    def __call__(self, snr_db: float) -> float:
        if not self.snr_grid:
            raise ValueError("empty threshold schedule")
        idx = int(np.argmin(np.abs(np.asarray(self.snr_grid) - snr_db)))
        return self.m_T[idx]

    def to_text(self) -> str:
        return "".join(f"{s:g} {m:g}\n" for s, m in zip(self.snr_grid, self.m_T))

    @classmethod
    def from_text(cls, text: str) -> "ThresholdSchedule":
        grid, vals = [], []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            s, m = line.split()
            grid.append(float(s))
            vals.append(float(m))
        return cls(grid, vals)


# -- profile files ----------------------------------------------------------

def format_profile(p: ReliabilityProfile) -> str:
    lines = [f"N={p.N}", f"channel={p.channel}"]
    if p.channel == "bec":
        lines.append(f"epsilon={p.epsilon:.9g}")
    else:
        lines.append(f"snr_db={p.snr_db:.9g}")
    lines += [f"trials={p.trials}", f"seed={p.seed}"]
    lines += [f"{i} {c:.9g} {e:.9g}" for i, (c, e) in enumerate(zip(p.capacity, p.cutoff), 1)]
    return "\n".join(lines) + "\n"


def parse_profile(text: str) -> ReliabilityProfile:
    head: dict[str, str] = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            k, v = line.split("=", 1)
            head[k.strip()] = v.strip()
        else:
            i, c, e = line.split()
            rows.append((int(i), float(c), float(e)))
    N = int(head["N"])
    if len(rows) != N or [r[0] for r in rows] != list(range(1, N + 1)):
        raise ValueError(f"profile file must list indices 1..{N} in order")
    arr = np.array([r[1:] for r in rows])
    channel = head.get("channel", "bi_awgn")
    trials = int(head.get("trials", 0))
    return ReliabilityProfile(
        N, arr[:, 0], arr[:, 1],
        source="bec_exact" if channel == "bec" and trials == 0 else "monte_carlo",
        channel=channel,
        snr_db=float(head["snr_db"]) if "snr_db" in head else None,
        epsilon=float(head["epsilon"]) if "epsilon" in head else None,
        trials=trials, seed=int(head.get("seed", 0)),
    )


def save_profile(p: ReliabilityProfile, path) -> None:
    Path(path).write_text(format_profile(p))


def load_profile(path) -> ReliabilityProfile:
    return parse_profile(Path(path).read_text())
