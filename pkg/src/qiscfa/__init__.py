"""Color filter array design, quanta image sensor simulation and demosaicking."""

from .atoms import (
    BAYER,
    CANONICAL,
    HAO,
    RGBCWY,
    RGBCY,
    AtomSpectrum,
    ColorAtom,
    ExposureMap,
    LumaChromaBasis,
    atom_dft,
    atom_spectrum,
    basis_by_name,
    bayer_grbg,
    mosaic,
    rgbcy_atom,
)
from .demosaic import (
    CarrierPlan,
    ColorCorrection,
    LowPassSpec,
    apply_color_correction,
    build_lowpass,
    demosaic_freq_select,
    extract_carriers,
    fit_color_correction,
)
from .metrics import CrosstalkModel, aliasing_metric, condition_number, total_variation
from .optimizer import DesignProblem, multi_start_design, solve_convex_design, solve_sca
from .quality import ciede2000, cpsnr, rgb_to_lab, ssim
from .sensor import FrameStack, QisConfig, simulate, tone_map

__version__ = "0.1.0"
