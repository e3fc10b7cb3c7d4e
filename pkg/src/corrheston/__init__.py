"""Double Heston pricing engine with stochastic spot/volatility correlation."""

__version__ = "0.1.0"

from .blackscholes import Conventions, SmileQuote, VanillaOption, bs_price, implied_vol
from .calibration import CalibrationResult, calibrate, feller_ratio
from .charfn import char_fn, riccati_closed_form
from .exotics import (
    BarrierProduct,
    McPrice,
    VolSwapSpec,
    bs_one_touch_price,
    heston_difference,
    price_knockout,
    price_one_touch,
    price_vol_swap_strike,
)
from .fourier_pricer import QuadratureConfig, price_vanilla, smile_from_model
from .model_core import (
    ModelParams,
    NaturalParams,
    heston_params,
    instant_correlation,
    spot_corr_correlation,
    symmetric_params,
    to_natural,
    to_raw,
)
from .montecarlo import McConfig, evolve_paths

__all__ = [
    "BarrierProduct", "CalibrationResult", "Conventions", "McConfig", "McPrice",
    "ModelParams", "NaturalParams", "QuadratureConfig", "SmileQuote",
    "VanillaOption", "VolSwapSpec", "bs_one_touch_price", "bs_price",
    "calibrate", "char_fn", "evolve_paths", "feller_ratio", "heston_difference",
    "heston_params", "implied_vol", "instant_correlation", "price_knockout",
    "price_one_touch", "price_vanilla", "price_vol_swap_strike",
    "riccati_closed_form", "smile_from_model", "spot_corr_correlation",
    "symmetric_params", "to_natural", "to_raw",
]
