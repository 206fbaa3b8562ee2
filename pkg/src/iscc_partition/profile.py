"""Chain-structured DNN profiles: per-layer FLOPs, output sizes and tier splits."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, NamedTuple

import numpy as np

__all__ = [
    "ProfileError",
    "LayerKind",
    "LayerSpec",
    "DnnProfile",
    "PartitionPair",
    "WorkloadSplit",
    "flops_of_layer",
    "workload_split",
    "enumerate_partitions",
    "load_profile",
    "alexnet",
]

DEFAULT_ELEMENT_BITS = 32


class ProfileError(ValueError):
    """Raised for malformed profile documents or invalid layer sequences."""


class LayerKind(enum.Enum):
    VIRTUAL_INPUT = "input"
    CONVOLUTIONAL = "conv"
    MAX_POOL = "maxpool"
    FULLY_CONNECTED = "fc"

    @property
    def spatial(self) -> bool:
        return self is not LayerKind.FULLY_CONNECTED


_KIND_ALIASES = {
    "input": LayerKind.VIRTUAL_INPUT,
    "virtualinput": LayerKind.VIRTUAL_INPUT,
    "conv": LayerKind.CONVOLUTIONAL,
    "cv": LayerKind.CONVOLUTIONAL,
    "convolutional": LayerKind.CONVOLUTIONAL,
    "maxpool": LayerKind.MAX_POOL,
    "mp": LayerKind.MAX_POOL,
    "pool": LayerKind.MAX_POOL,
    "fc": LayerKind.FULLY_CONNECTED,
    "fullyconnected": LayerKind.FULLY_CONNECTED,
    "dense": LayerKind.FULLY_CONNECTED,
}


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a chain DNN.

    ``a``, ``b``, ``c`` are the output feature-map height, width and channels,
    ``d`` the filter (or pooling window) size and ``e`` the neuron count.
    Unused dimensions are 0.
    """

    kind: LayerKind
    a: int = 0
    b: int = 0
    c: int = 0
    d: int = 0
    e: int = 0

    @property
    def elements(self) -> int:
        """Number of scalar elements in the layer output."""
        if self.kind is LayerKind.FULLY_CONNECTED:
            return self.e
        return self.a * self.b * self.c

    def out_bits(self, element_bits: int = DEFAULT_ELEMENT_BITS) -> int:
        return self.elements * element_bits


def flops_of_layer(layer: LayerSpec, prev: LayerSpec | None) -> int:
    """FLOPs needed to compute ``layer`` from the output of ``prev``.

    A fully connected layer after a spatial layer sees the flattened
    ``a*b*c`` feature map as its input neuron count.
    """
    kind = layer.kind
    if kind is LayerKind.VIRTUAL_INPUT:
        return 0
    if prev is None:
        raise ProfileError(f"{kind.value} layer has no predecessor")
    if kind is LayerKind.CONVOLUTIONAL:
        if not prev.kind.spatial:
            raise ProfileError("convolutional layer cannot follow a fully connected layer")
        return (2 * prev.c * layer.d**2 - 1) * layer.a * layer.b * layer.c
    if kind is LayerKind.MAX_POOL:
        if not prev.kind.spatial:
            raise ProfileError("max-pool layer cannot follow a fully connected layer")
        return layer.a * layer.b * layer.c * layer.d**2
    # fully connected; flatten a spatial predecessor
    return (2 * prev.elements - 1) * layer.e


class PartitionPair(NamedTuple):
    """Last device layer ``l1`` and last MEC layer ``l2`` (``l1 <= l2``)."""

    l1: int
    l2: int


class WorkloadSplit(NamedTuple):
    s_local: int
    s_mec: int
    s_cloud: int


@dataclass(frozen=True)
class DnnProfile:
    name: str
    layers: tuple[LayerSpec, ...]
    element_bits: int = DEFAULT_ELEMENT_BITS
    _flops: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if len(layers) < 2:
            raise ProfileError("profile needs the virtual input layer plus at least one layer")
        if self.element_bits <= 0:
            raise ProfileError("element_bits must be positive")
        flops = []
        for idx, layer in enumerate(layers):
            _validate_layer(idx, layer)
            try:
                flops.append(flops_of_layer(layer, layers[idx - 1] if idx else None))
            except ProfileError as exc:
                raise ProfileError(f"layer {idx}: {exc}") from None
        object.__setattr__(self, "_flops", tuple(flops))
        if sum(flops) <= 0:
            raise ProfileError("total FLOPs must be positive")

    @property
    def L(self) -> int:
        """Index of the last layer (the virtual input is layer 0)."""
        return len(self.layers) - 1

    @property
    def flops(self) -> tuple[int, ...]:
        return self._flops

    @property
    def total_flops(self) -> int:
        return sum(self._flops)

    def out_bits(self, l: int) -> int:
        return self.layers[l].out_bits(self.element_bits)

    @cached_property
    def out_bits_array(self) -> np.ndarray:
        return np.array([self.out_bits(l) for l in range(self.L + 1)], dtype=np.float64)

    @cached_property
    def cum_flops(self) -> np.ndarray:
        """``cum_flops[l]`` is the FLOPs of layers ``0..l`` (int64)."""
        return np.cumsum(np.array(self._flops, dtype=np.int64))

    def truncated(self, n_layers: int) -> "DnnProfile":
        """Profile made of the virtual input plus the first ``n_layers`` layers."""
        if not 1 <= n_layers <= self.L:
            raise ProfileError(f"cannot truncate to {n_layers} layers (L={self.L})")
        return DnnProfile(f"{self.name}[:{n_layers}]", self.layers[: n_layers + 1], self.element_bits)

    def to_dict(self) -> dict[str, Any]:
        out = []
        for layer in self.layers:
            row: dict[str, Any] = {"kind": layer.kind.value}
            if layer.kind is LayerKind.FULLY_CONNECTED:
                row["e"] = layer.e
            else:
                row.update(a=layer.a, b=layer.b, c=layer.c)
                if layer.kind is not LayerKind.VIRTUAL_INPUT:
                    row["d"] = layer.d
            out.append(row)
        return {"name": self.name, "element_bits": self.element_bits, "layers": out}


def _validate_layer(idx: int, layer: LayerSpec) -> None:
    kind = layer.kind
    if idx == 0 and kind is not LayerKind.VIRTUAL_INPUT:
        raise ProfileError("layer 0 must be the virtual input layer")
    if idx > 0 and kind is LayerKind.VIRTUAL_INPUT:
        raise ProfileError(f"layer {idx}: virtual input may only appear at index 0")
    if kind is LayerKind.FULLY_CONNECTED:
        if layer.e < 1:
            raise ProfileError(f"layer {idx}: fully connected layer needs e >= 1")
    else:
        dims = {"a": layer.a, "b": layer.b, "c": layer.c}
        if kind is not LayerKind.VIRTUAL_INPUT:
            dims["d"] = layer.d
        bad = [k for k, v in dims.items() if v < 1]
        if bad:
            raise ProfileError(f"layer {idx}: {kind.value} layer needs {', '.join(bad)} >= 1")


def workload_split(profile: DnnProfile, p: PartitionPair) -> WorkloadSplit:
    l1, l2 = p
    if not 0 <= l1 <= l2 <= profile.L:
        raise IndexError(f"partition {tuple(p)} outside 0 <= l1 <= l2 <= {profile.L}")
    flops = profile.flops
    s_local = sum(flops[: l1 + 1])
    s_mec = sum(flops[l1 + 1 : l2 + 1])
    return WorkloadSplit(s_local, s_mec, profile.total_flops - s_local - s_mec)


def enumerate_partitions(profile: DnnProfile | int) -> list[PartitionPair]:
    """All ``(l1, l2)`` with ``0 <= l1 <= l2 <= L`` in lexicographic order."""
    L = profile if isinstance(profile, int) else profile.L
    return [PartitionPair(l1, l2) for l1 in range(L + 1) for l2 in range(l1, L + 1)]


def _parse_layers(rows: Iterable[Any]) -> list[LayerSpec]:
    layers = []
    for idx, row in enumerate(rows):
        if not isinstance(row, dict) or "kind" not in row:
            raise ProfileError(f"layer {idx}: expected an object with a 'kind' field")
        key = str(row["kind"]).replace("_", "").replace("-", "").lower()
        if key not in _KIND_ALIASES:
            raise ProfileError(f"layer {idx}: unknown layer kind {row['kind']!r}")
        try:
            dims = {k: int(row.get(k, 0)) for k in "abcde"}
        except (TypeError, ValueError):
            raise ProfileError(f"layer {idx}: dimensions must be integers") from None
        layers.append(LayerSpec(_KIND_ALIASES[key], **dims))
    return layers


def load_profile(source: str | Path | dict[str, Any]) -> DnnProfile:
    """Build a validated profile from a JSON document, a path, or a parsed dict.

    The string ``"alexnet"`` selects the built-in profile.
    """
    if isinstance(source, (str, Path)):
        if str(source).lower() == "alexnet":
            return alexnet()
        try:
            doc = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ProfileError(f"cannot read profile {source}: {exc}") from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ProfileError("profile document must be a JSON object")
    rows = doc.get("layers")
    if not isinstance(rows, list) or not rows:
        raise ProfileError("profile needs a non-empty 'layers' list")
    return DnnProfile(
        name=str(doc.get("name", "custom")),
        layers=tuple(_parse_layers(rows)),
        element_bits=int(doc.get("element_bits", DEFAULT_ELEMENT_BITS)),
    )


ALEXNET_DOC: dict[str, Any] = {
    "name": "alexnet",
    "element_bits": DEFAULT_ELEMENT_BITS,
    "layers": [
        {"kind": "input", "a": 227, "b": 227, "c": 3},
        {"kind": "conv", "a": 55, "b": 55, "c": 96, "d": 11},
        {"kind": "maxpool", "a": 27, "b": 27, "c": 96, "d": 3},
        {"kind": "conv", "a": 27, "b": 27, "c": 256, "d": 5},
        {"kind": "maxpool", "a": 13, "b": 13, "c": 256, "d": 3},
        {"kind": "conv", "a": 13, "b": 13, "c": 384, "d": 3},
        {"kind": "conv", "a": 13, "b": 13, "c": 384, "d": 3},
        {"kind": "conv", "a": 13, "b": 13, "c": 256, "d": 3},
        {"kind": "maxpool", "a": 6, "b": 6, "c": 256, "d": 3},
        {"kind": "fc", "e": 4096},
        {"kind": "fc", "e": 4096},
        {"kind": "fc", "e": 1000},
    ],
}


def bundled_alexnet_document() -> dict[str, Any]:
    """The AlexNet profile as shipped in the package data directory."""
    text = resources.files("iscc_partition").joinpath("data/alexnet.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def alexnet() -> DnnProfile:
    """Built-in AlexNet: 5 conv, 3 max-pool and 3 FC layers on a 227x227x3 input."""
    return load_profile(ALEXNET_DOC)
