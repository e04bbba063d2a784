"""ssbwatch: synthesize, detect, and benchmark narrowband jamming on 5G-like downlinks."""

from .radio import (
    CaseLabel,
    ChannelParams,
    IqFrame,
    RadioConfig,
    derive_seed,
    gain_db_to_linear,
    generate_frame,
)
from .spectrogram import (
    Dataset,
    Spectrogram,
    SpectrogramParams,
    average_psd,
    build_dataset,
    compute_psd,
    load_dataset,
    make_spectrogram,
    save_dataset,
    transform_psd,
)

__version__ = "0.1.0"
