"""Exact fixed-point neural networks: universality decisions and constructive approximators."""
from .fxp import FxFormat, FxNum, round_to
from .activations import get_activation, tabulate, table_for, QuantTable
from .net import QuantizedNet, eval, forward, eval_reference
from .conditions import verdict, analyze_table

__version__ = "0.1.0"
