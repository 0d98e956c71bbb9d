"""Incremental assembly of layered quantized networks."""
from __future__ import annotations

from ..activations import QuantTable
from ..net import AffineNeuron, QuantizedNet


class NetBuilder:
    """Collects neurons per hidden layer; layer 0 is the input.

    Each hidden layer is a list of (terms, bias) where terms are
    (index into previous layer, weight numerator, count).  Constant neurons
    are shared by (layer, bias).
    """

    def __init__(self, table: QuantTable, d: int, binary: bool = False):
        self.table = table
        self.fmt = table.fmt
        self.d = d
        self.binary = binary
        self.layers: list[list] = []
        self._const: dict = {}

    def _ensure(self, layer: int):
        while len(self.layers) < layer:
            self.layers.append([])

    def add(self, layer: int, terms, bias: int) -> int:
        """Add a neuron to hidden layer ``layer`` (1-based); returns its index."""
        self._ensure(layer)
        self.layers[layer - 1].append((tuple(terms), bias))
        return len(self.layers[layer - 1]) - 1

    def const(self, layer: int, bias: int) -> int:
        key = (layer, bias)
        if key not in self._const:
            self._const[key] = self.add(layer, (), bias)
        return self._const[key]

    def finish(self, out_terms, out_bias: int, meta=None) -> QuantizedNet:
        layers = [tuple(AffineNeuron.from_terms(t, b) for t, b in layer) for layer in self.layers]
        layers.append((AffineNeuron.from_terms(out_terms, out_bias),))
        return QuantizedNet(self.fmt, self.table, tuple(layers), self.d, self.binary, meta or {})
