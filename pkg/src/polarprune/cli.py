"""Command-line entry point: ``polarprune {encode,decode,profile,simulate,threshold}``.

Exit codes: 0 success, 1 at least one decoding failure, 2 usage or
configuration error, 3 I/O error. Every run reports the seed on stderr.
"""
from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from pathlib import Path

import numpy as np

from .channel import ChannelModel
from .codeword import encode, load_code_spec
from .decoders import DEFAULT_STACK_CAP
from .reliability import (
    ThresholdSchedule, bec_exact_profile, format_profile, load_profile, mc_profile,
)
from .simulate import (
    DECODERS, ConfigError, DecoderConfig, decode_frame, load_experiment_config, parse_grid,
    run_experiment, write_outputs,
)

SEED_ENV = "POLARPRUNE_SEED"

EXIT_OK, EXIT_DECODE_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

LLR_NOTE = "LLRs are base-2: log2 P(y|0)/P(y|1), saturated at +-4096."
SNR_NOTE = "SNR values are Eb/N0 in dB (noise variance 1/(2 R 10^(snr/10)))."
SPEC_NOTE = (
    "Code-spec file: key=value lines N, K, poly_octal (MSB-first octal, empty for polar), "
    "profile (rm | capacity | explicit), A (1-based comma list, explicit), "
    "reliability (profile file, capacity)."
)
PROFILE_NOTE = (
    "Profile file: header lines N=, channel=, snr_db= or epsilon=, trials=, seed=, then N lines "
    "'index capacity cutoff' (index 1-based)."
)
SCHEDULE_NOTE = "Schedule file: one 'snr_db m_T' pair per line."


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _bits_from_text(text: str, K: int) -> np.ndarray:
    text = text.strip()
    if text.lower().startswith("0x"):
        value = int(text, 16)
        if value >= 1 << K:
            raise ConfigError(f"hex data does not fit in K={K} bits")
        return np.array([(value >> (K - 1 - i)) & 1 for i in range(K)], dtype=np.uint8)
    text = text.replace(" ", "").replace(",", "")
    if any(c not in "01" for c in text):
        raise ConfigError("data must be a bit string or 0x-prefixed hex")
    if len(text) != K:
        raise ConfigError(f"data has {len(text)} bits, code expects K={K}")
    return np.array([int(c) for c in text], dtype=np.uint8)


def _bitstr(a) -> str:
    return "".join(str(int(b)) for b in a)


def cmd_encode(args) -> int:
    spec = load_code_spec(args.spec)
    data = args.data if args.data is not None else sys.stdin.read()
    d = _bits_from_text(data, spec.K)
    v, u, x = encode(d, spec)
    if args.verbose:
        print(f"v={_bitstr(v)}")
        print(f"u={_bitstr(u)}")
        print(f"x={_bitstr(x)}")
    else:
        print(_bitstr(x))
    return EXIT_OK


def _read_llrs(path: str) -> np.ndarray:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    vals = [float(line) for line in text.split() if line.strip()]
    return np.array(vals, dtype=float)


def cmd_decode(args) -> int:
    spec = load_code_spec(args.spec)
    llr = _read_llrs(args.llr)
    if llr.size == 0 or llr.size % spec.N:
        raise ConfigError(f"LLR input has {llr.size} values, not a multiple of N={spec.N}")
    schedule = None
    if args.schedule:
        schedule = ThresholdSchedule.from_text(Path(args.schedule).read_text())
    elif args.decoder == "pstackd" and args.threshold is not None:
        schedule = ThresholdSchedule.constant(args.threshold)
    dec = DecoderConfig(
        kind=args.decoder, list_size=args.list_size, m_T=args.threshold,
        schedule=schedule, max_stack=args.max_stack,
    )
    profile = None
    if dec.needs_profile:
        if not args.profile:
            raise ConfigError(f"decoder {args.decoder} needs --profile")
        profile = load_profile(args.profile)
        if profile.N != spec.N:
            raise ConfigError(f"profile has N={profile.N}, code has N={spec.N}")
    if args.decoder == "pstackd" and args.snr is None:
        raise ConfigError("pstackd needs --snr to pick the threshold from the schedule")
    failures = 0
    for k, frame in enumerate(llr.reshape(-1, spec.N)):
        o = decode_frame(frame, spec, dec, profile, args.snr)
        failures += o.failed
        rec = {
            "frame": k,
            "data": None if o.failed else _bitstr(o.data_estimate),
            "failed": bool(o.failed),
            "failure": o.failure,
        }
        rec.update({name: (float(v) if isinstance(v, float) else int(v)) for name, v in o.counters().items()})
        print(json.dumps(rec))
    return EXIT_DECODE_FAIL if failures else EXIT_OK


def cmd_profile(args) -> int:
    if args.bec is not None:
        prof = bec_exact_profile(args.length, args.bec)
    else:
        ch = ChannelModel.awgn(args.awgn, args.rate)
        prof = mc_profile(args.length, ch, args.trials, seed=args.seed)
    text = format_profile(prof)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg, inputs = load_experiment_config(args.config)
    if args.seed_given:
        cfg.seed = args.seed
    print(f"seed={cfg.seed}", file=sys.stderr)
    if args.workers is not None:
        cfg.workers = args.workers
    report = run_experiment(cfg)
    write_outputs(report, args.out, inputs)
    for r in report.rows:
        print(
            f"snr={r.snr_db:g} trials={r.trials} errors={r.frame_errors} fer={r.fer:.6g} "
            f"sorts={r.mean_sort_events:.6g} stack={r.mean_stack:.6g}"
        )
    return EXIT_OK


def cmd_threshold(args) -> int:
    grid = parse_grid(args.snr)
    if not grid:
        raise ConfigError("empty SNR list")
    text = ThresholdSchedule.dynamic(args.N, args.K, grid).to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="polarprune",
        description="Polar and PAC codes: encoding, list/stack decoding with bit-metric pruning, simulation.",
        epilog=f"{LLR_NOTE} {SNR_NOTE} Default seed comes from ${SEED_ENV} (else 0).",
    )
    sub = p.add_subparsers(dest="command", required=True)
    fmt = argparse.RawDescriptionHelpFormatter

    def add(name, help_, desc):
        sp = sub.add_parser(name, help=help_, description=desc, formatter_class=fmt)
        sp.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                        help=f"RNG seed (default: ${SEED_ENV} or 0)")
        return sp

    e = add("encode", "encode data bits to a codeword",
            f"Print the codeword x for data d.\n\n{SPEC_NOTE}\nData: K bits MSB first ('1001') or 0x hex.")
    e.add_argument("--spec", required=True, help="code-spec file")
    e.add_argument("--data", help="data bits; read from stdin if omitted")
    e.add_argument("--verbose", "-v", action="store_true", help="also print v and u")
    e.set_defaults(func=cmd_encode)

    d = add("decode", "decode channel LLR frames",
            f"Decode LLR frames and print one JSON object per frame.\n\n{LLR_NOTE}\n"
            f"LLR file: text, one value per line, N lines per frame ('-' for stdin).\n"
            f"{SPEC_NOTE}\n{PROFILE_NOTE}\n{SCHEDULE_NOTE}\n{SNR_NOTE}")
    d.add_argument("--spec", required=True, help="code-spec file")
    d.add_argument("--llr", required=True, help="LLR file, or - for stdin")
    d.add_argument("--decoder", choices=DECODERS, default="scl")
    d.add_argument("--list-size", "-L", type=int, default=1, help="list size for scl/pscl")
    d.add_argument("--threshold", type=float, default=None, help="pruning threshold m_T in bits")
    d.add_argument("--schedule", help="threshold schedule file (pstackd)")
    d.add_argument("--snr", type=float, default=None, help="operating SNR in dB (pstackd lookup)")
    d.add_argument("--profile", help="reliability profile file (stack decoders)")
    d.add_argument("--max-stack", type=int, default=DEFAULT_STACK_CAP, help="stack size that aborts a frame")
    d.set_defaults(func=cmd_decode)

    pr = add("profile", "bit-channel capacity and cutoff-rate profile",
             f"Exact on the BEC, genie-aided Monte Carlo on BI-AWGN.\n\n{PROFILE_NOTE}\n{SNR_NOTE}")
    pr.add_argument("--length", "--n", "-N", dest="length", type=int, required=True, help="block length N")
    ch = pr.add_mutually_exclusive_group(required=True)
    ch.add_argument("--bec", type=float, help="erasure probability")
    ch.add_argument("--awgn", type=float, help="SNR in dB (Eb/N0)")
    pr.add_argument("--rate", type=float, default=0.5, help="code rate for the Eb/N0 conversion")
    pr.add_argument("--trials", type=int, default=10**5, help="Monte-Carlo trials (BI-AWGN)")
    pr.add_argument("--out", help="output file (default stdout)")
    pr.set_defaults(func=cmd_profile)

    s = add("simulate", "run a Monte-Carlo experiment",
            "Run an INI experiment with sections [code], [channel], [decoder], [run].\n\n"
            "[code]    file=<code-spec> or the code-spec keys inline\n"
            "[channel] kind=bi_awgn|bec, snr_db=<list or start:step:stop> (dB), erasure=<list> for bec\n"
            "[decoder] kind, list_size, m_T, schedule=<file>, profile=<file, may contain {snr}>\n"
            "[run]     seed, min_trials, max_trials, target_frame_errors, workers, batch_size\n\n"
            "Writes report.csv, report.json and manifest.json to --out.")
    s.add_argument("--config", required=True, help="experiment INI file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--workers", type=int, default=None, help="worker processes (result does not depend on it)")
    s.set_defaults(func=cmd_simulate)

    t = add("threshold", "dynamic pruning thresholds from the normal approximation",
            f"Print m_T = floor(log2(D/10)) per SNR.\n\n{SCHEDULE_NOTE}\n{SNR_NOTE}")
    t.add_argument("N", type=int, help="block length")
    t.add_argument("K", type=int, help="data length")
    t.add_argument("snr", help="SNR list in dB: '1,2' or 'start:step:stop'")
    t.add_argument("--out", help="output file (default stdout)")
    t.set_defaults(func=cmd_threshold)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        # --seed beats the environment, which beats a seed in a config file
        args.seed_given = args.seed is not None or SEED_ENV in os.environ
        if args.seed is None:
            args.seed = _default_seed()
        if args.command != "simulate":
            print(f"seed={args.seed}", file=sys.stderr)
        return args.func(args)
    except (ValueError, KeyError, configparser.Error) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
