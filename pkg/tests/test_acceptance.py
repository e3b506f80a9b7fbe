"""End-to-end acceptance checks, one test (or parameter set) per criterion.

Each check records a PASS/FAIL line that is printed in the terminal
summary, then asserts.
"""
import itertools
import math

import numpy as np
import pytest

from conftest import record_criterion
from polarprune.channel import KAPPA, ChannelModel, channel_llr, modulate, transmit, trial_rng
from polarprune.codeword import CodeSpec, capacity_profile, encode, polar_transform, rm_profile
from polarprune.decoders import pscl_decode, pstack_decode, sc_decode, scl_decode, stack_decode
from polarprune.metric import bit_metric_phi, exact_bit_channel_llr, genie_llrs
from polarprune.reliability import (
    ThresholdSchedule, bec_exact_profile, dynamic_threshold, mc_profile,
)
from polarprune.simulate import DecoderConfig, ExperimentConfig, drift_experiment, run_experiment

EXAMPLE_R = np.array([-1.68, -0.74, 1.71, -2.3, 1.07, 2.03, -1.69, 0.22])


def within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


@pytest.fixture(scope="module")
def polar1024():
    # capacity construction from a genie-aided profile at 2.5 dB
    prof = mc_profile(1024, ChannelModel.awgn(2.5, 0.5), 20000, seed=0)
    return CodeSpec(1024, 512, capacity_profile(1024, 512, prof))


def test_criterion_01_example_chain():
    spec = CodeSpec.pac(8, 4, (4, 6, 7, 8), "321")
    v, u, _ = encode([1, 0, 0, 1], spec)
    ch = ChannelModel.awgn(2.5, 0.5)
    prof = mc_profile(8, ch, 100000, seed=0)
    trace = []
    # the example's received word uses the map 0 -> -1
    out = stack_decode(channel_llr(-EXAMPLE_R, ch), spec, prof, trace=trace)
    tops = ["".join(map(str, step[0][0])) for step in trace]
    expected_tops = ["0", "00", "000", "0001", "00010", "000100", "0001000", "00010001"]
    sizes = [len(step) for step in trace]
    ok = (
        v.tolist() == [0, 0, 0, 1, 0, 0, 0, 1]
        and u.tolist() == [0, 0, 0, 1, 1, 0, 1, 1]
        and out.data_estimate.tolist() == [1, 0, 0, 1]
        and tops == expected_tops
        and sizes == [1, 1, 1, 2, 2, 3, 4, 5]
    )
    record_criterion(1, ok, f"data={''.join(map(str, out.data_estimate))} tops={tops[-1]} sizes={sizes}")
    assert ok


def test_criterion_02_recursion_matches_brute_force():
    worst = 0.0
    count = 0
    for N in (2, 4, 8):
        ch = ChannelModel.awgn(1.0, 0.5)
        for t in range(500):
            rng = trial_rng(2, t, stream=N)
            u = rng.integers(0, 2, N, dtype=np.uint8)
            y = transmit(modulate(polar_transform(u)), ch, rng)
            got = genie_llrs(channel_llr(y, ch), u)
            for i in range(1, N + 1):
                exact = exact_bit_channel_llr(i, y, u, ch, N)
                if abs(exact) < KAPPA / 2:
                    worst = max(worst, abs(got[i - 1] - exact))
                    count += 1
    ok = worst <= 1e-6
    record_criterion(2, ok, f"max |dLLR| = {worst:.2e} over {count} decisions")
    assert ok


@pytest.mark.parametrize("K", [4, 8])
def test_criterion_03_exhaustive_list_is_ml_in_path_metric(K):
    N = 16
    spec = CodeSpec(N, K, rm_profile(N, K))
    words = np.array(list(itertools.product((0, 1), repeat=K)), dtype=np.uint8)
    U = np.stack([encode(d, spec)[1] for d in words])
    ch = ChannelModel.awgn(1.0, spec.rate)
    mismatches = 0
    for t in range(1000):
        rng = trial_rng(3, t, stream=K)
        d = words[rng.integers(0, len(words))]
        llr = channel_llr(transmit(modulate(encode(d, spec)[2]), ch, rng), ch)
        L = genie_llrs(np.broadcast_to(llr, (len(U), N)), U)
        best = int(np.argmax(bit_metric_phi(L, U).sum(axis=1)))
        o = scl_decode(llr, spec, 2**K)
        mismatches += not np.array_equal(o.data_estimate, words[best])
    ok = mismatches == 0
    record_criterion(3, ok, f"K={K}: {mismatches}/1000 mismatches")
    assert ok


def test_criterion_04_drift_on_bec():
    spec = CodeSpec.pac(8, 4, (4, 6, 7, 8), "321")
    res = drift_experiment(spec, ChannelModel.bec(0.5), 10**5, seed=4)
    exact = bec_exact_profile(8, 0.5).capacity
    z_correct = np.abs(res.mean_correct - exact) / np.maximum(res.se_correct, 1e-300)
    ok_c = bool(np.all(np.abs(res.mean_correct - exact) <= 3 * res.se_correct))
    ok_w = bool(np.all(res.mean_wrong <= 3 * res.se_wrong))
    record_criterion(4, ok_c and ok_w, f"max |z| correct = {z_correct.max():.2f}, max mean wrong = {res.mean_wrong.max():.1f}")
    assert ok_c and ok_w


def test_criterion_05_tail_bound_on_bec():
    spec = CodeSpec.pac(8, 4, (4, 6, 7, 8), "321")
    thresholds = [-2.0, -5.0, -10.0]
    res = drift_experiment(spec, ChannelModel.bec(0.5), 10**6, seed=5, thresholds=thresholds)
    e0 = bec_exact_profile(8, 0.5).cutoff
    bound = np.exp2((np.array(thresholds)[:, None] - e0[None, :]) / 2)
    ok = bool(np.all(res.tail_prob <= bound))
    record_criterion(5, ok, f"max P/bound = {(res.tail_prob / bound).max():.3g}")
    assert ok


def test_criterion_06_sort_counts(polar1024, pac128):
    polar_counts = set()
    pac_counts = set()
    for t in range(20):
        rng = trial_rng(6, t)
        for spec, L, snr, counts in ((polar1024, 4, 1.0, polar_counts), (pac128, 32, 2.0, pac_counts)):
            d = rng.integers(0, 2, spec.K, dtype=np.uint8)
            ch = ChannelModel.awgn(snr, 0.5)
            llr = channel_llr(transmit(modulate(encode(d, spec)[2]), ch, rng), ch)
            counts.add(scl_decode(llr, spec, L).sort_events)
    ok = polar_counts == {510} and pac_counts == {59}
    record_criterion(6, ok, f"polar(1024,512) L=4: {sorted(polar_counts)}, PAC(128,64) L=32: {sorted(pac_counts)}")
    assert ok


TABLE_SORTS = [("polar", 0.0, 123.62), ("polar", 2.0, 17.41), ("polar", 2.5, 2.74), ("pac", 3.5, 28.14)]


@pytest.mark.slow
@pytest.mark.parametrize("code,snr,target", TABLE_SORTS)
def test_criterion_07_pruned_list_sort_counts(code, snr, target, polar1024, pac128):
    if code == "polar":
        spec, dec = polar1024, DecoderConfig("pscl", 4, m_T=-5.0)
    else:
        spec, dec = pac128, DecoderConfig("pscl", 32, m_T=-10.0)
    cfg = ExperimentConfig(spec, [snr], dec, min_trials=10**4, max_trials=10**4, seed=7, batch_size=500)
    row = run_experiment(cfg).rows[0]
    ok = within(row.mean_sort_events, target, 0.15)
    record_criterion(7, ok, f"{code} {snr:g} dB: {row.mean_sort_events:.2f} vs {target} ({row.trials} trials)")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("code", ["polar", "pac"])
def test_criterion_08_no_fer_degradation(code, polar1024, pac128):
    if code == "polar":
        spec, snr, L, m_T = polar1024, 1.5, 4, -5.0
    else:
        spec, snr, L, m_T = pac128, 2.0, 32, -10.0
    rows = []
    for dec in (DecoderConfig("scl", L), DecoderConfig("pscl", L, m_T=m_T)):
        cfg = ExperimentConfig(spec, [snr], dec, min_trials=1, max_trials=10**6, target_frame_errors=100,
                               seed=8, batch_size=100)
        rows.append(run_experiment(cfg).rows[0])
    scl, pscl = rows
    overlap = scl.wilson_95_ci_low <= pscl.wilson_95_ci_high and pscl.wilson_95_ci_low <= scl.wilson_95_ci_high
    ok = overlap and min(scl.frame_errors, pscl.frame_errors) >= 100
    record_criterion(8, ok, f"{code} {snr:g} dB: SCL {scl.fer:.4f} [{scl.wilson_95_ci_low:.4f}, {scl.wilson_95_ci_high:.4f}]"
                            f" PSCL {pscl.fer:.4f} [{pscl.wilson_95_ci_low:.4f}, {pscl.wilson_95_ci_high:.4f}]")
    assert ok


STACK_POINTS = [(3.5, "pstack", 6.55), (3.5, "stack", 67.04), (1.0, "pstackd", 134.0), (1.0, "pstack", 233.0),
                (1.0, "stack", 364.0)]


@pytest.fixture(scope="module")
def pac128_profiles():
    return {snr: mc_profile(128, ChannelModel.awgn(snr, 0.5), 10**5, seed=9) for snr in (1.0, 3.5)}


@pytest.mark.slow
@pytest.mark.parametrize("snr,kind,target", STACK_POINTS)
def test_criterion_09_stack_occupancy(snr, kind, target, pac128, pac128_profiles):
    dec = DecoderConfig(
        kind, m_T=-20.0 if kind == "pstack" else None,
        schedule=ThresholdSchedule.dynamic(128, 64, [x / 2 for x in range(8)]) if kind == "pstackd" else None,
        profiles={snr: pac128_profiles[snr]},
    )
    cfg = ExperimentConfig(pac128, [snr], dec, min_trials=1000, max_trials=1000, seed=9, batch_size=100)
    row = run_experiment(cfg).rows[0]
    # stack size at termination, averaged over frames
    ok = within(row.mean_final_stack, target, 0.30)
    record_criterion(9, ok, f"{kind} {snr:g} dB: {row.mean_final_stack:.2f} vs {target}"
                            f" (per-pop average {row.mean_stack:.2f})")
    assert ok


def test_criterion_10_dynamic_threshold_vector():
    got = [dynamic_threshold(128, 64, x / 2) for x in range(8)]
    target = [-5, -6, -7, -9, -11, -14, -18, -23]
    ok = all(abs(a - b) <= 1 for a, b in zip(got, target))
    record_criterion(10, ok, f"{got}")
    assert ok


def test_criterion_11_identity_degenerations(pac128):
    polar = CodeSpec(128, 64, rm_profile(128, 64))
    prof = mc_profile(128, ChannelModel.awgn(2.0, 0.5), 20000, seed=11)
    same = True
    for t in range(50):
        rng = trial_rng(11, t)
        for spec in (polar, pac128):
            d = rng.integers(0, 2, 64, dtype=np.uint8)
            ch = ChannelModel.awgn(2.0, 0.5)
            llr = channel_llr(transmit(modulate(encode(d, spec)[2]), ch, rng), ch)
            a, b = scl_decode(llr, spec, 8), pscl_decode(llr, spec, 8, -math.inf)
            same &= np.array_equal(a.data_estimate, b.data_estimate) and a.counters() == b.counters()
        # stack decoding of the plain polar code backtracks too much to be quick
        ta, tb = [], []
        a = stack_decode(llr, pac128, prof, trace=ta)
        b = pstack_decode(llr, pac128, prof, -math.inf, trace=tb)
        same &= a.counters() == b.counters() and np.array_equal(a.data_estimate, b.data_estimate)
        same &= [[(p.tolist(), m) for p, m in s] for s in ta] == [[(p.tolist(), m) for p, m in s] for s in tb]
        llr_polar = channel_llr(transmit(np.ones(128), ch, rng), ch)
        a, b = sc_decode(llr_polar, polar), scl_decode(llr_polar, polar, 1)
        same &= np.array_equal(a.data_estimate, b.data_estimate) and a.f_ops == b.f_ops
    reports = []
    for workers in (1, 4, 16):
        cfg = ExperimentConfig(polar, [1.0, 2.0], DecoderConfig("pscl", 4, m_T=-5.0), min_trials=200,
                               max_trials=2000, target_frame_errors=30, seed=11, workers=workers, batch_size=25)
        reports.append(run_experiment(cfg).to_dict())
    same_reports = reports[0] == reports[1] == reports[2]
    ok = bool(same and same_reports)
    record_criterion(11, ok, f"decoder identities {'hold' if same else 'broken'}, reports across 1/4/16 workers "
                             f"{'identical' if same_reports else 'differ'}")
    assert ok


def test_criterion_12_sc_operation_count(polar1024):
    ch = ChannelModel.awgn(2.0, 0.5)
    llr = channel_llr(transmit(np.ones(1024), ch, trial_rng(12, 0)), ch)
    o = sc_decode(llr, polar1024)
    ok = o.f_ops + o.g_ops == 10240
    record_criterion(12, ok, f"f+g = {o.f_ops + o.g_ops}")
    assert ok
