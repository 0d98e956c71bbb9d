from .bezout import bezout_multi, egcd
from .decompose import GammaDecomposition, NotRepresentable, decompose_gamma
from .shallow import Cube, Indicator, build_indicator, build_indicator_binary
from .deep import build_deep_indicator, build_deep_cell
from .approx import Approximator, NotUniversal, build_approximator
