"""Short-maturity at-the-money call prices and implied volatility for exponential Lévy models."""

__version__ = "0.1.0"

from .errors import LevyAtmError  # noqa: E402
from .levy_core import LevyModel, char_exponent, esscher_transform, tail_functionals  # noqa: E402
from .pricing import atm_call_price, implied_vol, price_curve  # noqa: E402
from .stable import StableLaw, expected_positive_part  # noqa: E402

__all__ = ["LevyAtmError", "LevyModel", "char_exponent", "esscher_transform", "tail_functionals",
           "atm_call_price", "implied_vol", "price_curve", "StableLaw", "expected_positive_part",
           "__version__"]
