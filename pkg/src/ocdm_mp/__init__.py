"""OCDM over multi-lag multi-Doppler channels with a message-passing receiver."""

__version__ = "0.1.0"

from .channel import (
    ChannelRealization,
    DelayPowerProfile,
    PathSpec,
    apply_channel,
    build_time_channel_matrix,
    draw_channel,
    quantize_path,
)
from .constellation import Constellation, bpsk, get_constellation, qam4
from .fresnel import FresnelTransform, dfnt_direct, dfnt_fast, discrete_chirp, idfnt_fast
from .fresnel_channel import (
    SparseFresnelChannel,
    approximation_error,
    assemble_dense,
    exact_fresnel_matrix,
    expand_virtual_paths,
    lambda_coeff,
    merge_logical_paths,
    sparse_fresnel_channel,
)
from .mp_detector import DetectionResult, DetectorConfig, detect
from .baselines import mmse_detect, ofdm_demodulate, ofdm_modulate
from .profiles import load_profile
from .sim import BerRecord, SimConfig, ebn0_to_noise_var, run_point, run_sweep
