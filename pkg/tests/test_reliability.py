import numpy as np
import pytest

from polarprune.channel import ChannelModel
from polarprune.reliability import (
    ThresholdSchedule, bec_exact_profile, bi_awgn_capacity_dispersion, dynamic_threshold,
    format_profile, mc_profile, normal_approx_fer, parse_profile, threshold_from_fer,
)


def test_bec_exact_small_case():
    p = bec_exact_profile(2, 0.5)
    # W^- erases with 2e - e^2, W^+ with e^2
    assert np.allclose(p.capacity, [0.25, 0.75])
    assert np.allclose(p.cutoff, 1 - np.log2(1 + np.array([0.75, 0.25])))


@pytest.mark.parametrize("eps", [0.0, 0.2, 0.5, 0.9])
def test_bec_capacity_conservation(eps):
    p = bec_exact_profile(64, eps)
    assert p.capacity.sum() == pytest.approx(64 * (1 - eps))
    assert np.all(p.cutoff <= p.capacity + 1e-12)


def test_bec_exact_ordering_n8():
    p = bec_exact_profile(8, 0.5)
    assert np.round(1 - p.capacity, 6).tolist() == pytest.approx(
        [0.996094, 0.878906, 0.808594, 0.316406, 0.683594, 0.191406, 0.121094, 0.003906], abs=1e-6)


def test_mc_profile_matches_bec_exact():
    ch = ChannelModel.bec(0.5)
    mc = mc_profile(8, ch, 40000, seed=5)
    ex = bec_exact_profile(8, 0.5)
    assert np.allclose(mc.capacity, ex.capacity, atol=0.015)
    assert np.allclose(mc.cutoff, ex.cutoff, atol=0.015)


def test_mc_profile_reproducible_and_seed_sensitive():
    ch = ChannelModel.awgn(2.0, 0.5)
    a = mc_profile(16, ch, 5000, seed=1)
    b = mc_profile(16, ch, 5000, seed=1)
    c = mc_profile(16, ch, 5000, seed=2)
    assert np.array_equal(a.capacity, b.capacity) and np.array_equal(a.cutoff, b.cutoff)
    assert not np.array_equal(a.capacity, c.capacity)


def test_mc_profile_awgn_sanity():
    ch = ChannelModel.awgn(2.5, 0.5)
    p = mc_profile(64, ch, 20000, seed=0)
    assert np.all(p.cutoff <= p.capacity + 0.01)
    C, _ = bi_awgn_capacity_dispersion(2.5, 0.5)
    # the polar transform preserves total mutual information
    assert p.capacity.mean() == pytest.approx(C, abs=0.01)


def test_capacity_dispersion_quadrature_converged():
    for snr in (0.0, 2.0, 4.0):
        C64, V64 = bi_awgn_capacity_dispersion(snr, 0.5, nodes=64)
        C128, V128 = bi_awgn_capacity_dispersion(snr, 0.5, nodes=128)
        assert abs(C64 - C128) < 1e-6 and abs(V64 - V128) < 1e-6
        assert 0 < C64 < 1 and V64 > 0


def test_capacity_noiseless_limit():
    C, V = bi_awgn_capacity_dispersion(40.0, 0.5)
    assert C == pytest.approx(1.0, abs=1e-9) and V == pytest.approx(0.0, abs=1e-9)


def test_threshold_from_fer():
    assert threshold_from_fer(10.0) == 0
    assert threshold_from_fer(0.625) == -4
    assert threshold_from_fer(0.0) == -4096


def test_dynamic_threshold_consistent_with_fer():
    for snr in (0.0, 1.5, 3.0):
        D = normal_approx_fer(128, 64, snr)
        assert dynamic_threshold(128, 64, snr) == threshold_from_fer(D)
    assert dynamic_threshold(1024, 512, 30.0) == -4096


def test_schedule_lookup_and_text():
    s = ThresholdSchedule.dynamic(128, 64, [0.0, 0.5, 1.0])
    assert s(0.6) == s(0.5)
    assert ThresholdSchedule.from_text(s.to_text()).m_T == s.m_T
    assert ThresholdSchedule.constant(-20)(3.3) == -20
    with pytest.raises(ValueError):
        ThresholdSchedule([0.0], [])


def test_profile_text_round_trip():
    p = mc_profile(8, ChannelModel.awgn(2.5, 0.5), 1000, seed=3)
    q = parse_profile(format_profile(p))
    assert q.N == 8 and q.snr_db == 2.5 and q.trials == 1000 and q.seed == 3
    assert np.allclose(q.capacity, p.capacity, rtol=1e-8)
    b = parse_profile(format_profile(bec_exact_profile(4, 0.3)))
    assert b.channel == "bec" and b.epsilon == pytest.approx(0.3)


def test_profile_text_rejects_missing_rows():
    text = format_profile(bec_exact_profile(4, 0.3)).splitlines()
    with pytest.raises(ValueError):
        parse_profile("\n".join(text[:-1]))
