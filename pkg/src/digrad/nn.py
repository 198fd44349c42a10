"""Small dense networks with exact analytic gradients.

Everything here is float64 numpy. A network is a stack of affine layers, each
followed by one activation:

* ``crelu``   -- concatenated ReLU, doubles the width seen by the next layer
* ``linear``  -- identity
* ``tanh``    -- ``scale * tanh(z)``, used for bounded actor outputs

Inputs may be a single vector or a batch of row vectors. Parameter gradients
from :meth:`DenseNetwork.backward` are *summed* over batch rows; callers that
want a mean pass an output gradient already divided by the batch size.
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from itertools import count
from pathlib import Path
from typing import Sequence

import numpy as np

ACTIVATIONS = ("crelu", "linear", "tanh")
CHECKPOINT_FORMAT = "digrad-net"
CHECKPOINT_VERSION = 1

GradientSet = list  # list[np.ndarray], congruent with DenseNetwork.params

_net_ids = count()


class ShapeError(ValueError):
    """Input, gradient or parameter shapes do not match the network."""


class StaleTapeError(ValueError):
    """Backward was called with a tape from another network or an older parameter version."""


class NonFiniteError(FloatingPointError):
    """An update would introduce NaN/Inf; the update was not applied."""


def crelu(x):
    """Concatenated ReLU along the last axis: ``[max(x, 0), max(-x, 0)]``."""
    x = np.asarray(x, dtype=np.float64)
    return np.concatenate([np.maximum(x, 0.0), np.maximum(-x, 0.0)], axis=-1)


def _activation_width(units: int, activation: str) -> int:
    return 2 * units if activation == "crelu" else units


@dataclass
class Tape:
    """Everything backward needs: per-layer inputs and pre-activations."""

    net_id: int
    version: int
    inputs: list
    preacts: list
    batched: bool


@dataclass(eq=False)
class DenseNetwork:
    """Affine layers + activations. All parameters live in one flat buffer.

    ``weights[i]`` (shape ``(out, in)``) and ``biases[i]`` are views into
    ``flat``, laid out as ``[W0, b0, W1, b1, ...]`` in row-major order.
    """

    weights: list
    biases: list
    activations: list
    output_scale: float = 1.0
    id: int = field(default_factory=lambda: next(_net_ids))
    version: int = 0

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ShapeError("weights, biases and activations must have equal length")
        width = None
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
            if np.ndim(w) != 2 or np.shape(b) != (np.shape(w)[0],):
                raise ShapeError(f"layer {i}: weight {np.shape(w)} / bias {np.shape(b)}")
            if width is not None and np.shape(w)[1] != width:
                raise ShapeError(f"layer {i} expects {np.shape(w)[1]} inputs, previous layer emits {width}")
            width = _activation_width(np.shape(w)[0], act)
        arrays = [np.asarray(a, dtype=np.float64) for a in _interleave(self.weights, self.biases)]
        self.flat = np.concatenate([a.ravel() for a in arrays])
        views = unflatten(self.flat, [a.shape for a in arrays])
        self.weights, self.biases = views[0::2], views[1::2]

    @classmethod
    def build(cls, sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator,
              output_scale: float = 1.0, final_init: float = 3e-3) -> "DenseNetwork":
        """Randomly initialised network.

        ``sizes`` are pre-activation widths ``[in, h1, ..., out]``; CReLU
        doubling is accounted for automatically. Hidden layers draw from
        U(+-1/sqrt(fan_in)), the final layer from U(+-final_init).
        """
        weights, biases = [], []
        fan_in = sizes[0]
        for i, (units, act) in enumerate(zip(sizes[1:], activations)):
            bound = final_init if i == len(activations) - 1 else 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(units, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=units))
            fan_in = _activation_width(units, act)
        return cls(weights, biases, list(activations), float(output_scale))

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return _activation_width(self.weights[-1].shape[0], self.activations[-1])

    @property
    def shapes(self) -> list:
        return [p.shape for p in self.params]

    @property
    def params(self) -> list:
        """Parameter arrays in canonical order ``[W0, b0, W1, b1, ...]`` (views into ``flat``)."""
        return _interleave(self.weights, self.biases)

    def set_flat(self, flat) -> None:
        self.flat[:] = flat
        self.version += 1

    def set_params(self, arrays) -> None:
        self.set_flat(flatten(arrays))

    def copy(self) -> "DenseNetwork":
        return DenseNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                            list(self.activations), self.output_scale)

    def zero_grads(self) -> GradientSet:
        return [np.zeros_like(p) for p in self.params]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        batched = x.ndim == 2
        if x.ndim not in (1, 2) or x.shape[-1] != self.input_dim:
            raise ShapeError(f"expected input of width {self.input_dim}, got shape {x.shape}")
        h = x if batched else x[None, :]
        inputs, preacts = [], []
        for w, b, act in zip(self.weights, self.biases, self.activations):
            inputs.append(h)
            z = h @ w.T + b
            preacts.append(z)
            if act == "crelu":
                h = crelu(z)
            elif act == "tanh":
                h = self.output_scale * np.tanh(z)
            else:
                h = z
        tape = Tape(self.id, self.version, inputs, preacts, batched)
        return (h if batched else h[0]), tape

    def backward(self, tape: Tape, output_grad, param_grads: bool = True):
        """Gradients of ``sum(output_grad * output)`` w.r.t. parameters and input.

        Parameter gradients are summed over batch rows. With
        ``param_grads=False`` only the input gradient is computed (the
        returned gradient set is ``None``) and ``output_grad`` may carry extra
        leading axes, e.g. one slice per output head.
        """
        if tape.net_id != self.id or tape.version != self.version:
            raise StaleTapeError("tape does not belong to the current parameters of this network")
        g = np.asarray(output_grad, dtype=np.float64)
        if not tape.batched:
            g = g[..., None, :]
        expected = (tape.inputs[0].shape[0], self.output_dim)
        if g.shape[-2:] != expected or (param_grads and g.ndim != 2):
            raise ShapeError(f"output gradient shape {np.shape(output_grad)} does not match output {expected}")
        grads = [None] * (2 * len(self.weights))
        for i in reversed(range(len(self.weights))):
            act, z = self.activations[i], tape.preacts[i]
            if act == "crelu":
                units = z.shape[1]
                g = g[..., :units] * (z > 0) - g[..., units:] * (z < 0)
            elif act == "tanh":
                g = g * (self.output_scale * (1.0 - np.tanh(z) ** 2))
            if param_grads:
                grads[2 * i] = g.T @ tape.inputs[i]
                grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i]
        return (grads if param_grads else None), (g if tape.batched else g[..., 0, :])


def _interleave(weights, biases) -> list:
    out = []
    for w, b in zip(weights, biases):
        out += [w, b]
    return out


def flatten(arrays) -> np.ndarray:
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def unflatten(flat: np.ndarray, shapes) -> list:
    """Views of ``flat`` with the given shapes."""
    out, start = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        out.append(flat[start:start + size].reshape(shape))
        start += size
    return out


def forward(net: DenseNetwork, x):
    return net.forward(x)


def backward(net: DenseNetwork, tape: Tape, output_grad):
    return net.backward(tape, output_grad)


def _check_congruent(net: DenseNetwork, arrays) -> None:
    if len(arrays) != 2 * len(net.weights) or any(a.shape != p.shape for a, p in zip(arrays, net.params)):
        raise ShapeError("array set is not shape-congruent with the network")


def add_grads(a: GradientSet, b: GradientSet) -> GradientSet:
    return [x + y for x, y in zip(a, b)]


def scale_grads(a: GradientSet, factor: float) -> GradientSet:
    return [x * factor for x in a]


def grad_norm(grads: GradientSet) -> float:
    return float(np.linalg.norm(flatten(grads)))


@dataclass
class RmsPropState:
    """Optimizer constants and the running mean of squared gradients (flat, like ``net.flat``)."""

    lr: float
    rho: float = 0.9
    eps: float = 1e-8
    cache: np.ndarray | None = None

    def __post_init__(self):
        if not self.lr > 0 or not 0 < self.rho < 1 or not self.eps > 0:
            raise ValueError(f"invalid RMSProp constants lr={self.lr} rho={self.rho} eps={self.eps}")

    @classmethod
    def for_network(cls, net: DenseNetwork, lr: float, rho: float = 0.9, eps: float = 1e-8):
        return cls(lr, rho, eps, np.zeros_like(net.flat))

    def cache_arrays(self, net: DenseNetwork) -> list:
        return unflatten(self.cache, net.shapes)


def rmsprop_step(net: DenseNetwork, state: RmsPropState, grads: GradientSet,
                 direction: str = "descend"):
    """One RMSProp update, applied in place. ``direction`` is ``"descend"`` or ``"ascend"``.

    ``cache <- rho * cache + (1 - rho) * g**2``;
    ``theta <- theta -/+ lr * g / (sqrt(cache) + eps)``.

    Nothing is modified if a gradient or the new parameters would contain
    non-finite values; :class:`NonFiniteError` is raised instead.
    """
    if direction not in ("ascend", "descend"):
        raise ValueError(f"direction must be 'ascend' or 'descend', got {direction!r}")
    _check_congruent(net, grads)
    if state.cache is None:
        state.cache = np.zeros_like(net.flat)
    if state.cache.shape != net.flat.shape:
        raise ShapeError("optimizer state is not shape-congruent with the network")
    g = flatten(grads)
    if not np.isfinite(g).all():
        raise NonFiniteError("non-finite gradient; update skipped")
    cache = state.rho * state.cache + (1.0 - state.rho) * g * g
    step = state.lr * g / (np.sqrt(cache) + state.eps)
    new = net.flat + step if direction == "ascend" else net.flat - step
    if not np.isfinite(new).all():
        raise NonFiniteError("update would produce non-finite parameters; update skipped")
    state.cache = cache
    net.set_flat(new)
    return net, state


def soft_update(target: DenseNetwork, source: DenseNetwork, tau: float) -> DenseNetwork:
    """Polyak averaging ``target <- tau * source + (1 - tau) * target``, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    _check_congruent(target, source.params)
    target.set_flat(tau * source.flat + (1.0 - tau) * target.flat)
    return target


def hard_update(target: DenseNetwork, source: DenseNetwork) -> DenseNetwork:
    _check_congruent(target, source.params)
    target.set_flat(source.flat)
    return target


# -- checkpoints ---------------------------------------------------------------
#
# A checkpoint is a zip archive holding ``header.json`` plus one raw .npy file per
# parameter array (C order, little-endian float64), so values round-trip exactly.

def _network_header(net: DenseNetwork) -> dict:
    return {
        "activations": list(net.activations),
        "output_scale": float(net.output_scale).hex(),
        "shapes": [list(p.shape) for p in net.params],
    }


def save_checkpoint(path, networks: dict, meta: dict | None = None) -> Path:
    """Write named networks (and JSON-able metadata) to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "networks": {name: _network_header(net) for name, net in networks.items()},
        "meta": meta or {},
    }
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w") as zf:
        zf.writestr("header.json", json.dumps(header, indent=1, sort_keys=True))
        for name, net in networks.items():
            for i, p in enumerate(net.params):
                buf = io.BytesIO()
                np.save(buf, np.ascontiguousarray(p, dtype="<f8"), allow_pickle=False)
                zf.writestr(f"{name}/{i:03d}.npy", buf.getvalue())
    tmp.replace(path)
    return path


def load_checkpoint(path) -> tuple[dict, dict]:
    """Inverse of :func:`save_checkpoint`; returns ``(networks, meta)``."""
    with zipfile.ZipFile(path) as zf:
        header = json.loads(zf.read("header.json"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a network checkpoint")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        networks = {}
        for name, spec in header["networks"].items():
            arrays = []
            for i, shape in enumerate(spec["shapes"]):
                arr = np.load(io.BytesIO(zf.read(f"{name}/{i:03d}.npy")), allow_pickle=False)
                if list(arr.shape) != shape:
                    raise ShapeError(f"{path}: {name}/{i} has shape {arr.shape}, header says {shape}")
                arrays.append(arr.astype(np.float64))
            networks[name] = DenseNetwork(arrays[0::2], arrays[1::2], spec["activations"],
                                          float.fromhex(spec["output_scale"]))
    return networks, header["meta"]
