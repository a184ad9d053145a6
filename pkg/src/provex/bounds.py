"""Sound set propagation through concrete and reduced networks.

``propagate_box`` pushes an input box layer by layer through a network and
records one enclosure per layer.  Every reachable activation vector of the
network over the box is contained in the recorded enclosures; the final
entry encloses the output set.  ``propagate_abstract`` does the same for a
reduced network whose biases are intervals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .intervals import IntervalVector, iv_activation, iv_affine, iv_subset
from .network import ConcreteNetwork


@dataclass(frozen=True, eq=False)
class LayerBounds:
    """Per-layer post-activation enclosures for one (network, box) pair.

    Fingerprints tie the bounds to the exact network and box they were
    computed for, so downstream consumers can reject stale bounds.
    """

    input_box: IntervalVector
    per_layer: tuple[IntervalVector, ...]
    net_fingerprint: str
    box_fingerprint: str

    @property
    def final(self) -> IntervalVector:
        """Output enclosure: a superset of the network's image of the box."""
        return self.per_layer[-1]

    def matches(self, net: ConcreteNetwork) -> bool:
        return self.net_fingerprint == net.fingerprint


def propagate_box(net: ConcreteNetwork, input_box: IntervalVector) -> LayerBounds:
    """Enclose the reachable set of every layer over ``input_box``."""
    if len(input_box) != net.input_dim:
        raise DimensionError(f"box has {len(input_box)} dimensions, network expects {net.input_dim}")
    if not iv_subset(input_box, net.input_domain, slack=1e-12):
        raise ValidationError("input box exceeds the network's input domain")
    cur = input_box
    per_layer = []
    for layer in net.layers:
        lo = layer.weights_pos @ cur.lo + layer.weights_neg @ cur.hi + layer.bias
        hi = layer.weights_pos @ cur.hi + layer.weights_neg @ cur.lo + layer.bias
        cur = iv_activation(layer.activation.value, IntervalVector(lo, hi))
        per_layer.append(cur)
    return LayerBounds(
        input_box=input_box,
        per_layer=tuple(per_layer),
        net_fingerprint=net.fingerprint,
        box_fingerprint=input_box.fingerprint(),
    )


def propagate_abstract(anet, input_box: IntervalVector) -> IntervalVector:
    """Output enclosure of a reduced network over ``input_box``.

    ``anet`` is any object exposing ``input_dim`` and ``layers`` of
    (weights, interval bias, activation) triples.  The enclosure is valid
    for boxes contained in the box the reduction was built against.
    """
    if len(input_box) != anet.input_dim:
        raise DimensionError(f"box has {len(input_box)} dimensions, network expects {anet.input_dim}")
    cur = input_box
    for layer in anet.layers:
        pos = getattr(layer, "weights_pos", None)
        if pos is None:
            cur = iv_activation(layer.activation.value, iv_affine(layer.weights, layer.bias, cur))
            continue
        neg = layer.weights_neg
        lo = pos @ cur.lo + neg @ cur.hi + layer.bias.lo
        hi = pos @ cur.hi + neg @ cur.lo + layer.bias.hi
        cur = iv_activation(layer.activation.value, IntervalVector(lo, hi))
    return cur


def sample_box(box: IntervalVector, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample of points from a box, one per row."""
    lo = np.broadcast_to(box.lo, (count, len(box)))
    hi = np.broadcast_to(box.hi, (count, len(box)))
    return rng.uniform(lo, hi)
