"""Polar and PAC codes with bit-metric pruned list and stack decoding."""
from .channel import KAPPA, ChannelModel, channel_llr, modulate, transmit, trial_rng
from .codeword import CodeSpec, encode, polar_transform, rm_profile, capacity_profile
from .decoders import (
    DecodeOutcome, extract_data, pscl_decode, pstack_decode, pstackd_decode, sc_decode,
    scl_decode, stack_decode,
)
from .reliability import (
    ReliabilityProfile, ThresholdSchedule, bec_exact_profile, dynamic_threshold, mc_profile,
)
from .simulate import DecoderConfig, ExperimentConfig, SimReport, drift_experiment, run_experiment

__version__ = "0.1.0"
