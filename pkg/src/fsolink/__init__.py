"""Gamma-Gamma FSO link simulator with learned shapers, channel estimators and detectors."""
from .channel import (
    NO_FADING, LinkConfig, TurbulenceParams, apply_link, noise_variance_for_snr,
    parse_turbulence, sample_intensity, scintillation_index,
)
from .config import ExperimentConfig, parse_config, parse_config_text
from .harness import SerRecord, awgn_qam_ser_analytic, measure_ser, read_csv, run_sweep, write_csv
from .modem import Constellation, gray_qam_constellation, ml_detect, naive_detect, one_hot, soft_detect
from .numerics import RngStream, derive_substream, rng_from_seed, sample_gamma, sample_gaussian_pair
from .pipelines import KINDS, LinkPipeline, NaiveBaseline, TrainConfig, build_pipeline, train

__version__ = "0.1.0"
