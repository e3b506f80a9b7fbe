"""Polar transform, rate profiling and convolutional pre-transformation.

All index sets exposed by this module are 1-based, as is customary when
writing down polar codes by hand; arrays are 0-based internally.

Generator polynomials are given as octal literals read MSB-first, i.e. the
leading binary digit of the literal is ``c_0``.  With this convention the
literal ``321`` gives ``c = (1, 1, 0, 1, 0, 0, 0, 1)``, which maps
``v = 00010001`` to ``u = 00011011``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_POLY_OCTAL = "3211"


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def octal_to_coeffs(octal: str) -> tuple[int, ...]:
    """Coefficient tuple ``(c_0, ..., c_m)`` for an octal literal, MSB first."""
    octal = octal.strip()
    if not octal:
        return ()
    if any(ch not in "01234567" for ch in octal):
        raise ValueError(f"not an octal literal: {octal!r}")
    bits = "".join(format(int(ch), "03b") for ch in octal).lstrip("0")
    if not bits:
        raise ValueError("generator polynomial must be nonzero")
    return tuple(int(b) for b in bits)


def coeffs_to_octal(coeffs) -> str:
    if len(coeffs) == 0:
        return ""
    return format(int("".join(str(int(c)) for c in coeffs), 2), "o")


@dataclass(frozen=True)
class CodeSpec:
    """A polar code (empty ``conv_coeffs``) or a PAC code.

    ``info_set`` holds the K data positions, 1-based and increasing.
    """

    N: int
    K: int
    info_set: tuple[int, ...]
    conv_coeffs: tuple[int, ...] = ()
    _mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not _is_pow2(self.N) or self.N < 2:
            raise ValueError(f"block length must be a power of two >= 2, got {self.N}")
        if not 1 <= self.K <= self.N:
            raise ValueError(f"data length must lie in 1..{self.N}, got {self.K}")
        info = tuple(sorted(int(i) for i in self.info_set))
        if len(info) != self.K or len(set(info)) != self.K:
            raise ValueError("info_set must contain exactly K distinct indices")
        if info[0] < 1 or info[-1] > self.N:
            raise ValueError("info_set indices must lie in 1..N")
        coeffs = tuple(int(c) for c in self.conv_coeffs)
        if coeffs and (coeffs[0] != 1 or coeffs[-1] != 1 or set(coeffs) - {0, 1}):
            raise ValueError("convolution coefficients need c_0 = c_m = 1")
        object.__setattr__(self, "info_set", info)
        object.__setattr__(self, "conv_coeffs", coeffs)
        mask = np.zeros(self.N, dtype=np.bool_)
        mask[np.asarray(info) - 1] = True
        mask.setflags(write=False)
        object.__setattr__(self, "_mask", mask)

    @property
    def n(self) -> int:
        return self.N.bit_length() - 1

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def memory(self) -> int:
        return max(len(self.conv_coeffs) - 1, 0)

    @property
    def is_pac(self) -> bool:
        return len(self.conv_coeffs) > 0

    @property
    def info_mask(self) -> np.ndarray:
        """Boolean mask over 0-based positions; True marks a data position."""
        return self._mask

    @classmethod
    def pac(cls, N: int, K: int, info_set, poly_octal: str = DEFAULT_POLY_OCTAL) -> "CodeSpec":
        return cls(N, K, tuple(info_set), octal_to_coeffs(poly_octal))


def _bits(a, name: str = "bits") -> np.ndarray:
    arr = np.asarray(a)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must be binary")
    return arr.astype(np.uint8)


def polar_transform(u) -> np.ndarray:
    """x = u F^{(x)n} over GF(2), by in-place butterflies along the last axis.

    Works on a single vector or a batch of shape (..., N).
    """
    x = _bits(u, "u").copy()
    N = x.shape[-1]
    if not _is_pow2(N):
        raise ValueError(f"length must be a power of two, got {N}")
    lead = x.shape[:-1]
    h = 1
    while h < N:
        y = x.reshape(*lead, N // (2 * h), 2, h)
        y[..., 0, :] ^= y[..., 1, :]
        h *= 2
    return x


def insert_data(d, spec: CodeSpec) -> np.ndarray:
    d = _bits(d, "d")
    if d.shape[-1] != spec.K:
        raise ValueError(f"data length {d.shape[-1]} != K={spec.K}")
    v = np.zeros(d.shape[:-1] + (spec.N,), dtype=np.uint8)
    v[..., spec.info_mask] = d
    return v


def conv_encode(v, coeffs) -> np.ndarray:
    """Causal GF(2) convolution u_j = sum_k c_k v_{j-k}, truncated to len(v)."""
    v = _bits(v, "v")
    c = _bits(coeffs, "coeffs")
    if c.size == 0 or c[0] != 1:
        raise ValueError("convolution needs c_0 = 1")
    N = v.shape[-1]
    u = np.zeros_like(v)
    for k in np.flatnonzero(c):
        if k >= N:
            break
        u[..., k:] ^= v[..., : N - k]
    return u


def conv_invert(u, coeffs) -> np.ndarray:
    """Recover v from u = vT by back-substitution (T has a unit diagonal)."""
    u = _bits(u, "u")
    c = _bits(coeffs, "coeffs")
    if c.size == 0 or c[0] != 1:
        raise ValueError("convolution needs c_0 = 1")
    taps = [k for k in np.flatnonzero(c) if k > 0]
    v = np.zeros_like(u)
    for j in range(u.shape[-1]):
        acc = u[..., j].copy()
        for k in taps:
            if k > j:
                break
            acc ^= v[..., j - k]
        v[..., j] = acc
    return v


def encode(d, spec: CodeSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full chain d -> v -> u -> x. For polar codes v and u coincide."""
    v = insert_data(d, spec)
    u = conv_encode(v, spec.conv_coeffs) if spec.is_pac else v.copy()
    return v, u, polar_transform(u)


def rm_profile(N: int, K: int) -> tuple[int, ...]:
    """K indices of largest Hamming weight of (i-1); larger index wins ties."""
    if not 1 <= K <= N:
        raise ValueError(f"K must lie in 1..{N}")
    order = sorted(range(1, N + 1), key=lambda i: (bin(i - 1).count("1"), i), reverse=True)
    return tuple(sorted(order[:K]))


def capacity_profile(N: int, K: int, profile) -> tuple[int, ...]:
    """K indices with the largest bit-channel capacity; larger index wins ties.

    ``profile`` is a ReliabilityProfile or a plain sequence of N capacities.
    """
    cap = np.asarray(getattr(profile, "capacity", profile), dtype=float)
    if cap.shape != (N,):
        raise ValueError(f"profile has length {cap.size}, expected {N}")
    if not 1 <= K <= N:
        raise ValueError(f"K must lie in 1..{N}")
    order = sorted(range(1, N + 1), key=lambda i: (cap[i - 1], i), reverse=True)
    return tuple(sorted(order[:K]))


# -- code-spec files ---------------------------------------------------------

def parse_code_spec(text: str, base_dir: Path | None = None) -> CodeSpec:
    """Parse the ``key=value`` code-spec format.

    Keys: ``N``, ``K``, ``poly_octal`` (may be empty), ``profile`` in
    {rm, capacity, explicit}, ``A`` (comma separated, for explicit) and
    ``reliability`` (path of a profile file, for capacity).
    """
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        kv[key] = value
    try:
        N, K = int(kv["N"]), int(kv["K"])
    except KeyError as e:
        raise ValueError(f"code spec is missing {e.args[0]}") from None
    coeffs = octal_to_coeffs(kv.get("poly_octal", ""))
    kind = kv.get("profile", "explicit" if "A" in kv else "rm")
    if kind == "rm":
        info = rm_profile(N, K)
    elif kind == "explicit":
        if "A" not in kv:
            raise ValueError("profile=explicit requires A=...")
        info = tuple(int(s) for s in kv["A"].split(",") if s.strip())
    elif kind == "capacity":
        from .reliability import load_profile

        if "reliability" not in kv:
            raise ValueError("profile=capacity requires reliability=<profile file>")
        path = Path(kv["reliability"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        info = capacity_profile(N, K, load_profile(path))
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    return CodeSpec(N, K, info, coeffs)


def load_code_spec(path) -> CodeSpec:
    path = Path(path)
    return parse_code_spec(path.read_text(), base_dir=path.parent)


def format_code_spec(spec: CodeSpec) -> str:
    return (
        f"N={spec.N}\nK={spec.K}\npoly_octal={coeffs_to_octal(spec.conv_coeffs)}\n"
        f"profile=explicit\nA={','.join(map(str, spec.info_set))}\n"
    )
