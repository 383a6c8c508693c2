"""Workbench for sub-Nyquist multiband signal monitoring.

End-to-end simulation of a wideband sniffer: ground-truth multiband frame
synthesis, a simulated multi-coset sampling front end, a greedy
compressed-sensing baseline with oracle-aided classical receivers, and a
multi-task transformer that senses the spectrum, classifies modulations and
demodulates blindly from the raw sub-Nyquist samples.
"""

from .grid import SamplingGrid, keep_channels, mini_grid, nyquist_variant, wideband_grid
from .modulation import SCHEME_NAMES, ModulationScheme, make_constellation
from .sampling import (
    CosetMatrix,
    coset_snapshots,
    drop_channels,
    fold_matrix,
    multicoset_sample,
    subband_spectra,
)
from .scene import (
    NarrowbandSpec,
    Ofdm,
    SceneSpec,
    SingleCarrier,
    random_scene,
    synth_scene,
)

__version__ = "0.1.0"

__all__ = [
    "SamplingGrid",
    "wideband_grid",
    "mini_grid",
    "nyquist_variant",
    "keep_channels",
    "SCHEME_NAMES",
    "ModulationScheme",
    "make_constellation",
    "CosetMatrix",
    "multicoset_sample",
    "drop_channels",
    "coset_snapshots",
    "fold_matrix",
    "subband_spectra",
    "SceneSpec",
    "NarrowbandSpec",
    "SingleCarrier",
    "Ofdm",
    "random_scene",
    "synth_scene",
    "__version__",
]
