"""Monte-Carlo harness: encode, transmit, decode, count.

Trials are grouped into fixed-size batches. Trial ``t`` at grid point ``j``
draws everything from ``trial_rng(seed, t, stream=j)``, and batches are
reduced strictly in order, with the stopping rule checked after each one.
Batches computed past the stopping point are thrown away, so the report
depends on (seed, config) only and not on the number of workers.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .channel import ChannelModel, channel_llr, modulate, transmit, trial_rng
from .codeword import CodeSpec, coeffs_to_octal, encode, load_code_spec, parse_code_spec
from .decoders import (
    DEFAULT_STACK_CAP, pscl_decode, pstack_decode, sc_decode, scl_decode, stack_decode,
)
from .metric import bit_metric_phi, genie_llrs
from .reliability import ReliabilityProfile, ThresholdSchedule, load_profile

DECODERS = ("sc", "scl", "pscl", "stack", "pstack", "pstackd")
DRIFT_STREAM = 0x4452


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """'1.0, 2.0' or an inclusive range 'start:step:stop'."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0:
            raise ConfigError(f"bad range {text!r}; expected start:step:stop with step > 0")
        start, step, stop = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 10) for k in range(max(count, 0))]
    return [float(p) for p in text.replace(",", " ").split()]


@dataclass
class DecoderConfig:
    kind: str = "scl"
    list_size: int = 1
    m_T: float | None = None
    schedule: ThresholdSchedule | None = None
    # profile file per grid point; "{snr}" is replaced by the point value
    profile_path: str | None = None
    profiles: dict | None = None
    max_stack: int = DEFAULT_STACK_CAP

    def __post_init__(self):
        if self.kind not in DECODERS:
            raise ConfigError(f"unknown decoder {self.kind!r}; choose from {', '.join(DECODERS)}")
        if self.list_size < 1:
            raise ConfigError("list_size must be >= 1")
        if self.kind in ("pscl", "pstack") and self.m_T is None:
            raise ConfigError(f"{self.kind} needs a threshold m_T")
        if self.kind == "pstackd" and self.schedule is None:
            raise ConfigError("pstackd needs a threshold schedule")

    @property
    def needs_profile(self) -> bool:
        return self.kind in ("stack", "pstack", "pstackd")


@dataclass
class ExperimentConfig:
    spec: CodeSpec
    snr_grid: list[float]
    decoder: DecoderConfig
    channel: str = "bi_awgn"
    snr_kind: str = "ebn0"
    min_trials: int = 1
    max_trials: int = 10**6
    target_frame_errors: int = 100
    seed: int = 0
    workers: int = 1
    batch_size: int = 64

    def __post_init__(self):
        if self.min_trials < 1:
            raise ConfigError("min_trials must be >= 1")
        if self.target_frame_errors < 1:
            raise ConfigError("target_frame_errors must be >= 1")
        if self.max_trials < self.min_trials:
            raise ConfigError("max_trials must be >= min_trials")
        if self.batch_size < 1 or self.workers < 1:
            raise ConfigError("batch_size and workers must be >= 1")
        if self.channel not in ("bi_awgn", "bec"):
            raise ConfigError(f"unknown channel {self.channel!r}")

    def channel_at(self, point: float) -> ChannelModel:
        if self.channel == "bec":
            return ChannelModel.bec(point)
        return ChannelModel.awgn(point, self.spec.rate, self.snr_kind)

    def echo(self) -> dict:
        d = self.decoder
        return {
            "code": {
                "N": self.spec.N, "K": self.spec.K,
                "poly_octal": coeffs_to_octal(self.spec.conv_coeffs),
                "A": list(self.spec.info_set),
            },
            "channel": {"kind": self.channel, "snr_kind": self.snr_kind, "grid": list(self.snr_grid)},
            "decoder": {
                "kind": d.kind, "list_size": d.list_size, "m_T": d.m_T,
                "schedule": None if d.schedule is None else [list(d.schedule.snr_grid), list(d.schedule.m_T)],
                "profile_path": d.profile_path, "max_stack": d.max_stack,
            },
            "run": {
                "min_trials": self.min_trials, "max_trials": self.max_trials,
                "target_frame_errors": self.target_frame_errors, "seed": self.seed,
                "batch_size": self.batch_size,
            },
        }


@dataclass
class SimRow:
    snr_db: float
    trials: int
    frame_errors: int
    fer: float
    mean_sort_events: float
    mean_stack: float
    max_stack: int
    mean_f_ops: float
    mean_g_ops: float
    mean_node_visits: float
    wilson_95_ci_low: float
    wilson_95_ci_high: float
    mean_final_stack: float = 0.0


ROW_FIELDS = [f.name for f in fields(SimRow)]


@dataclass
class SimReport:
    rows: list[SimRow]
    config: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"seed": self.seed, "config": self.config, "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "SimReport":
        return cls([SimRow(**r) for r in d["rows"]], d.get("config", {}), int(d.get("seed", 0)))


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


# -- profiles ----------------------------------------------------------------

def _point_label(point: float) -> str:
    return f"{point:g}"


def resolve_profiles(cfg: ExperimentConfig) -> dict:
    """Profile per grid point; raises before any trial if one is missing."""
    dec = cfg.decoder
    if not dec.needs_profile:
        return {}
    out = {}
    for point in cfg.snr_grid:
        if dec.profiles is not None and point in dec.profiles:
            prof = dec.profiles[point]
        elif dec.profile_path is not None:
            path = Path(dec.profile_path.replace("{snr}", _point_label(point)))
            if not path.is_file():
                raise ConfigError(f"profile file not found for grid point {point:g}: {path}")
            prof = load_profile(path)
        else:
            raise ConfigError(f"decoder {dec.kind} needs a reliability profile for grid point {point:g}")
        if prof.N != cfg.spec.N:
            raise ConfigError(f"profile for {point:g} has N={prof.N}, code has N={cfg.spec.N}")
        out[point] = prof
    return out


# -- trials ------------------------------------------------------------------

def decode_frame(llr, spec: CodeSpec, dec: DecoderConfig, profile, snr: float):
    if dec.kind == "sc":
        return sc_decode(llr, spec) if not spec.is_pac else scl_decode(llr, spec, 1)
    if dec.kind == "scl":
        return scl_decode(llr, spec, dec.list_size)
    if dec.kind == "pscl":
        return pscl_decode(llr, spec, dec.list_size, dec.m_T)
    if dec.kind == "stack":
        return stack_decode(llr, spec, profile, dec.max_stack)
    m_T = dec.m_T if dec.kind == "pstack" else float(dec.schedule(snr))
    return pstack_decode(llr, spec, profile, m_T, dec.max_stack)


_COUNTERS = ("sort_events", "mean_stack", "max_stack", "f_ops", "g_ops", "node_visits", "final_stack")


def run_batch(job) -> np.ndarray:
    """Decode trials [start, start+count) at one grid point.

    Returns one row per trial: error flag then the counters in _COUNTERS.
    """
    spec, dec, ch, profile, seed, stream, start, count = job
    out = np.zeros((count, 1 + len(_COUNTERS)))
    for k in range(count):
        rng = trial_rng(seed, start + k, stream)
        d = rng.integers(0, 2, spec.K, dtype=np.uint8)
        x = encode(d, spec)[2]
        llr = channel_llr(transmit(modulate(x), ch, rng), ch)
        snr = ch.snr_db if ch.kind == "bi_awgn" else ch.erasure_prob
        o = decode_frame(llr, spec, dec, profile, snr)
        err = o.failed or not np.array_equal(o.data_estimate, d)
        out[k, 0] = float(err)
        out[k, 1:] = [getattr(o, c) for c in _COUNTERS]
    return out


def _summarize(point: float, rows: np.ndarray) -> SimRow:
    T = rows.shape[0]
    errors = int(rows[:, 0].sum())
    mean = rows.sum(axis=0) / T
    lo, hi = wilson_interval(errors, T)
    c = {name: mean[1 + i] for i, name in enumerate(_COUNTERS)}
    return SimRow(
        snr_db=float(point), trials=T, frame_errors=errors, fer=errors / T,
        mean_sort_events=float(c["sort_events"]), mean_stack=float(c["mean_stack"]),
        max_stack=int(rows[:, 1 + _COUNTERS.index("max_stack")].max()),
        mean_f_ops=float(c["f_ops"]), mean_g_ops=float(c["g_ops"]),
        mean_node_visits=float(c["node_visits"]),
        wilson_95_ci_low=lo, wilson_95_ci_high=hi,
        mean_final_stack=float(c["final_stack"]),
    )


def _should_stop(cfg: ExperimentConfig, trials: int, errors: int) -> bool:
    if trials >= cfg.max_trials:
        return True
    return trials >= cfg.min_trials and errors >= cfg.target_frame_errors


def run_experiment(cfg: ExperimentConfig) -> SimReport:
    profiles = resolve_profiles(cfg)
    rows = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for j, point in enumerate(cfg.snr_grid):
            ch = cfg.channel_at(point)
            prof = profiles.get(point)
            done: list[np.ndarray] = []
            trials = errors = 0
            next_start = 0
            stop = False
            while not stop:
                jobs = []
                for _ in range(cfg.workers):
                    if next_start >= cfg.max_trials:
                        break
                    count = min(cfg.batch_size, cfg.max_trials - next_start)
                    jobs.append((cfg.spec, cfg.decoder, ch, prof, cfg.seed, j, next_start, count))
                    next_start += count
                results = pool.map(run_batch, jobs) if pool else map(run_batch, jobs)
                for res in results:
                    if stop:
                        continue
                    done.append(res)
                    trials += res.shape[0]
                    errors += int(res[:, 0].sum())
                    stop = _should_stop(cfg, trials, errors)
            rows.append(_summarize(point, np.concatenate(done)))
    finally:
        if pool is not None:
            pool.shutdown()
    return SimReport(rows, cfg.echo(), cfg.seed)


# -- drift -------------------------------------------------------------------

@dataclass
class DriftResult:
    mean_correct: np.ndarray
    se_correct: np.ndarray
    mean_wrong: np.ndarray
    se_wrong: np.ndarray
    trials: int
    # P{phi_correct <= t} per threshold (rows) and index (columns)
    tail_prob: np.ndarray | None = None


def drift_experiment(spec: CodeSpec, ch: ChannelModel, trials: int, seed: int = 0,
                     thresholds=(), batch: int = 4096) -> DriftResult:
    """Genie-aided bit metrics of the true and the flipped branch, per index.

    Each trial sends random data; the SC recursion is fed the true u prefix,
    so index i sees exactly the bit-channel W_N^(i).
    """
    N = spec.N
    thresholds = np.asarray(thresholds, dtype=float)
    s1c = np.zeros(N)
    s2c = np.zeros(N)
    s1w = np.zeros(N)
    s2w = np.zeros(N)
    tail = np.zeros((thresholds.size, N))
    done = 0
    b = 0
    while done < trials:
        T = min(batch, trials - done)
        rng = trial_rng(seed, b, DRIFT_STREAM)
        d = rng.integers(0, 2, (T, spec.K), dtype=np.uint8)
        _, u, x = encode(d, spec)
        L = genie_llrs(channel_llr(transmit(modulate(x), ch, rng), ch), u)
        pc = bit_metric_phi(L, u)
        pw = bit_metric_phi(L, 1 - u)
        s1c += pc.sum(axis=0)
        s2c += (pc * pc).sum(axis=0)
        s1w += pw.sum(axis=0)
        s2w += (pw * pw).sum(axis=0)
        for k, t in enumerate(thresholds):
            tail[k] += (pc <= t).sum(axis=0)
        done += T
        b += 1

    def mean_se(s1, s2):
        m = s1 / trials
        var = np.maximum(s2 / trials - m * m, 0.0) * trials / max(trials - 1, 1)
        return m, np.sqrt(var / trials)

    mc, sc = mean_se(s1c, s2c)
    mw, sw = mean_se(s1w, s2w)
    return DriftResult(mc, sc, mw, sw, trials, tail / trials if thresholds.size else None)


# -- report files --------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


def export_report(report: SimReport, path, fmt: str = "csv") -> None:
    path = Path(path)
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(ROW_FIELDS)
                for r in report.rows:
                    w.writerow([_fmt(getattr(r, f)) for f in ROW_FIELDS])
        elif fmt == "json":
            path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as e:
        raise OSError(f"cannot write report to {path}: {e.strerror or e}") from e


def load_report_json(path) -> SimReport:
    return SimReport.from_dict(json.loads(Path(path).read_text()))


# -- config files ------------------------------------------------------------

def load_experiment_config(path) -> tuple[ExperimentConfig, list[Path]]:
    """Read an INI experiment file with [code], [channel], [decoder], [run].

    Returns the config and the list of input files it referenced, for the
    run manifest. Relative paths are resolved against the config file.
    """
    path = Path(path)
    base = path.parent
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if not cp.read(path):
        raise FileNotFoundError(f"cannot read config {path}")
    for sec in ("code", "channel", "decoder"):
        if not cp.has_section(sec):
            raise ConfigError(f"config is missing section [{sec}]")
    inputs = [path]

    def rel(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    code = dict(cp["code"])
    if "file" in code:
        spec_path = rel(code["file"])
        spec = load_code_spec(spec_path)
        inputs.append(spec_path)
    else:
        if "reliability" in code:
            inputs.append(rel(code["reliability"]))
        spec = parse_code_spec("\n".join(f"{k}={v}" for k, v in code.items()), base_dir=base)

    chan = cp["channel"]
    kind = chan.get("kind", "bi_awgn")
    grid_key = "erasure" if kind == "bec" else "snr_db"
    if grid_key not in chan:
        raise ConfigError(f"[channel] needs {grid_key}=")
    grid = parse_grid(chan[grid_key])

    dsec = cp["decoder"]
    schedule = None
    if "schedule" in dsec:
        sched_path = rel(dsec["schedule"])
        schedule = ThresholdSchedule.from_text(sched_path.read_text())
        inputs.append(sched_path)
    profile_path = None
    if "profile" in dsec:
        profile_path = str(rel(dsec["profile"]))
        for point in grid:
            p = Path(profile_path.replace("{snr}", _point_label(point)))
            if p.is_file():
                inputs.append(p)
    decoder = DecoderConfig(
        kind=dsec.get("kind", "scl"),
        list_size=dsec.getint("list_size", 1),
        m_T=dsec.getfloat("m_T") if "m_T" in dsec else None,
        schedule=schedule,
        profile_path=profile_path,
        max_stack=dsec.getint("max_stack", DEFAULT_STACK_CAP),
    )
    run = cp["run"] if cp.has_section("run") else {}
    get = (lambda k, d: int(run[k]) if k in run else d)
    cfg = ExperimentConfig(
        spec=spec, snr_grid=grid, decoder=decoder, channel=kind,
        snr_kind=chan.get("snr_kind", "ebn0"),
        min_trials=get("min_trials", 1), max_trials=get("max_trials", 10**6),
        target_frame_errors=get("target_frame_errors", 100),
        seed=get("seed", 0), workers=get("workers", 1), batch_size=get("batch_size", 64),
    )
    return cfg, inputs


def content_hash(paths) -> str:
    """sha256 over git-style blob headers of each input file, in order."""
    h = hashlib.sha256()
    for p in paths:
        data = Path(p).read_bytes()
        h.update(f"blob {len(data)}\0".encode())
        h.update(data)
    return h.hexdigest()


def write_outputs(report: SimReport, out_dir, inputs=()) -> dict:
    """report.csv, report.json and manifest.json in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_report(report, out / "report.csv", "csv")
    export_report(report, out / "report.json", "json")
    manifest = {
        "seed": report.seed,
        "config": report.config,
        "inputs": [str(p) for p in inputs],
        "input_sha256": content_hash(inputs),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
