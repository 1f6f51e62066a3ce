"""CNN models as ordered layer lists, and the analytical per-layer cost model.

Layer shapes are given explicitly (no padding/stride arithmetic). Costs are
per image; batching is applied downstream by the traffic model.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TextIO

CSV_HEADER = ("name", "kind", "in_h", "in_w", "in_c", "out_h", "out_w", "out_c", "k_h", "k_w")
DEFAULT_ELEMENT_SIZE = 4


class ModelFormatError(ValueError):
    """Malformed model file. ``line`` is 1-based, or None for whole-model errors."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class LayerKind(str, Enum):
    CONV = "conv"
    FC = "fc"
    POOL = "pool"
    BN = "bn"
    RELU = "relu"
    ELTWISE = "eltwise"
    SPLIT = "split"

    @property
    def has_window(self) -> bool:
        return self in (LayerKind.CONV, LayerKind.FC, LayerKind.POOL)

    @property
    def weighted(self) -> bool:
        """conv/fc: the layers whose weights dominate parameter traffic."""
        return self in (LayerKind.CONV, LayerKind.FC)


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: LayerKind
    in_h: int
    in_w: int
    in_c: int
    out_h: int
    out_w: int
    out_c: int
    k_h: int = 0
    k_w: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", LayerKind(self.kind))
        problem = self._violation()
        if problem:
            raise ValueError(f"layer {self.name!r}: {problem}")

    def _violation(self) -> str | None:
        dims = (self.in_h, self.in_w, self.in_c, self.out_h, self.out_w, self.out_c)
        if any(d < 1 for d in dims):
            return "feature-map dimensions must all be >= 1"
        if self.kind.has_window:
            if self.k_h < 1 or self.k_w < 1:
                return f"{self.kind.value} needs a filter window >= 1x1"
        elif self.k_h != 0 or self.k_w != 0:
            return f"{self.kind.value} takes no filter window (k_h = k_w = 0)"
        if self.kind is LayerKind.FC and (self.in_h, self.in_w, self.out_h, self.out_w) != (1, 1, 1, 1):
            return "fc layers are 1x1 in and out (flatten into the channel count)"
        if self.kind in (LayerKind.POOL, LayerKind.BN, LayerKind.RELU) and self.out_c != self.in_c:
            return f"{self.kind.value} must preserve the channel count"
        return None

    @property
    def in_shape(self) -> tuple[int, int, int]:
        return (self.in_h, self.in_w, self.in_c)

    @property
    def out_shape(self) -> tuple[int, int, int]:
        return (self.out_h, self.out_w, self.out_c)


@dataclass(frozen=True)
class CnnModel:
    """A network flattened into execution order.

    Branchy networks (residual blocks, inception modules) are linearized, so
    a row's input need not be the previous row's output; see ``chain_breaks``.
    """

    name: str
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError(f"model {self.name!r} has no layers")

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def chain_breaks(self) -> list[int]:
        """Indices i where layers[i].in_shape != layers[i-1].out_shape."""
        return [
            i for i in range(1, len(self.layers))
            if self.layers[i].in_shape != self.layers[i - 1].out_shape
        ]


@dataclass(frozen=True)
class LayerCost:
    flops_per_image: int
    weight_bytes: int
    in_act_bytes_per_image: int
    out_act_bytes_per_image: int

    @property
    def act_bytes_per_image(self) -> int:
        return self.in_act_bytes_per_image + self.out_act_bytes_per_image


def _parse_int(token: str, field: str, lineno: int, source: str | None) -> int:
    try:
        return int(token.strip())
    except ValueError:
        raise ModelFormatError(f"field {field!r} is not an integer: {token.strip()!r}", lineno, source) from None


def parse_model(source: TextIO | str, name: str | None = None, origin: str | None = None) -> CnnModel:
    """Read the model CSV format from a text stream (or a string holding the text).

    The first non-comment line must be the header. Blank lines and lines
    starting with ``#`` are skipped. Errors carry the 1-based line number.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    layers = []
    seen_header = False
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = [c.strip() for c in line.split(",")]
        if not seen_header:
            if tuple(cols) != CSV_HEADER:
                raise ModelFormatError(f"expected header {','.join(CSV_HEADER)!r}, got {line!r}", lineno, origin)
            seen_header = True
            continue
        if len(cols) != len(CSV_HEADER):
            raise ModelFormatError(f"expected {len(CSV_HEADER)} columns, got {len(cols)}", lineno, origin)
        layer_name, kind_token = cols[0], cols[1]
        try:
            kind = LayerKind(kind_token)
        except ValueError:
            raise ModelFormatError(f"unknown layer kind {kind_token!r}", lineno, origin) from None
        ints = [_parse_int(tok, fld, lineno, origin) for tok, fld in zip(cols[2:], CSV_HEADER[2:])]
        try:
            layers.append(LayerSpec(layer_name, kind, *ints))
        except ValueError as exc:
            raise ModelFormatError(str(exc), lineno, origin) from None
    if not seen_header:
        raise ModelFormatError("missing header line", None, origin)
    if not layers:
        raise ModelFormatError("model has no layers", None, origin)
    return CnnModel(name or "model", tuple(layers))


def load_model(path: str | Path) -> CnnModel:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_model(fh, name=path.stem, origin=str(path))


def format_model(model: CnnModel) -> str:
    lines = [",".join(CSV_HEADER)]
    for l in model.layers:
        lines.append(",".join(str(v) for v in (
            l.name, l.kind.value, l.in_h, l.in_w, l.in_c, l.out_h, l.out_w, l.out_c, l.k_h, l.k_w)))
    return "\n".join(lines) + "\n"


def layer_cost(layer: LayerSpec, element_size: int = DEFAULT_ELEMENT_SIZE) -> LayerCost:
    if element_size < 1:
        raise ValueError("element_size must be >= 1")
    out_elems = layer.out_h * layer.out_w * layer.out_c
    kind = layer.kind
    if kind is LayerKind.CONV:
        flops = 2 * out_elems * layer.in_c * layer.k_h * layer.k_w
        weights = layer.k_h * layer.k_w * layer.in_c * layer.out_c
    elif kind is LayerKind.FC:
        flops = 2 * layer.in_c * layer.out_c
        weights = layer.in_c * layer.out_c
    elif kind is LayerKind.POOL:
        flops = out_elems * layer.k_h * layer.k_w
        weights = 0
    elif kind is LayerKind.BN:
        # scale + shift
        flops = 2 * out_elems
        weights = 2 * layer.out_c
    else:
        # relu / eltwise / split: one op per output element
        flops = out_elems
        weights = 0

    in_act = layer.in_h * layer.in_w * layer.in_c * element_size
    out_act = out_elems * element_size
    if kind is LayerKind.ELTWISE:
        in_act *= 2
    elif kind is LayerKind.SPLIT:
        out_act *= 2
    return LayerCost(flops, weights * element_size, in_act, out_act)


def model_costs(model: CnnModel, element_size: int = DEFAULT_ELEMENT_SIZE) -> list[LayerCost]:
    return [layer_cost(l, element_size) for l in model.layers]


def weight_traffic_ratio(model: CnnModel, batch: int, element_size: int = DEFAULT_ELEMENT_SIZE) -> float:
    """Share of kernel-weight bytes in conv/fc DRAM traffic for one batched pass.

    Each weight is assumed to be loaded once per pass; activations move once
    per image.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    weighted = [l for l in model.layers if l.kind.weighted]
    if not weighted:
        raise ValueError(f"model {model.name!r} has no conv/fc layers; weight traffic ratio is undefined")
    w = a = 0
    for l in weighted:
        c = layer_cost(l, element_size)
        w += c.weight_bytes
        a += c.act_bytes_per_image
    return w / (w + batch * a)


def total_weight_bytes(model: CnnModel, element_size: int = DEFAULT_ELEMENT_SIZE) -> int:
    return sum(c.weight_bytes for c in model_costs(model, element_size))

