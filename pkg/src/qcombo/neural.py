"""Small numpy neural substrate: dense nets, a GRU cell, Adam and soft target updates.

Parameters are plain ``dict[str, np.ndarray]``.  Every forward returns a cache
that the matching backward consumes; gradients are exact reverse-mode.
"""
from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

log = logging.getLogger(__name__)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...] = (256, 256)
    output_dim: int = 2

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError(f"invalid layer sizes in {self}")

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.output_dim]


def init_mlp(spec: MlpSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Kaiming-uniform weights for ReLU layers, fan-in uniform for the output layer."""
    params = {}
    sizes = spec.sizes
    last = len(sizes) - 2
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = np.sqrt(1.0 / fan_in) if i == last else np.sqrt(6.0 / fan_in)
        params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
    return params


def mlp_forward(params: dict, x: np.ndarray):
    """ReLU hidden layers, linear output.  ``x`` may carry any leading dims."""
    n_layers = len(params) // 2
    lead = x.shape[:-1]
    h = x.reshape(-1, x.shape[-1])
    if h.shape[1] != params["W0"].shape[0]:
        raise ValueError(f"input width {h.shape[1]} != {params['W0'].shape[0]}")
    acts = [h]
    for i in range(n_layers):
        h = h @ params[f"W{i}"] + params[f"b{i}"]
        if i < n_layers - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return h.reshape(*lead, h.shape[-1]), (lead, acts)


def mlp_backward(params: dict, cache, dy: np.ndarray):
    """Returns (parameter gradients, input gradient)."""
    lead, acts = cache
    n_layers = len(params) // 2
    g = dy.reshape(-1, dy.shape[-1])
    if g.shape != acts[-1].shape:
        raise ValueError(f"output gradient shape {g.shape} != {acts[-1].shape}")
    grads = {}
    for i in reversed(range(n_layers)):
        if i < n_layers - 1:
            g = g * (acts[i + 1] > 0)
        grads[f"W{i}"] = acts[i].T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        g = g @ params[f"W{i}"].T
    return grads, g.reshape(*lead, g.shape[-1])


# -- GRU ------------------------------------------------------------------

_GRU_KEYS = ("We", "be", "Wz", "Uz", "bz", "Wr", "Ur", "br", "Wh", "Uh", "bh", "Wo", "bo")


def init_gru(input_dim: int, hidden: int, output_dim: int, rng: np.random.Generator) -> dict:
    def uni(fan_in, shape, gain=1.0):
        b = gain * np.sqrt(1.0 / fan_in)
        return rng.uniform(-b, b, size=shape)

    H = hidden
    p = {"We": uni(input_dim, (input_dim, H), np.sqrt(6.0)), "be": np.zeros(H)}
    for g in "zrh":
        p[f"W{g}"] = uni(H, (H, H))
        p[f"U{g}"] = uni(H, (H, H))
        p[f"b{g}"] = np.zeros(H)
    p["Wo"] = uni(H, (H, output_dim))
    p["bo"] = np.zeros(output_dim)
    return p


def gru_step(params: dict, x: np.ndarray, h: np.ndarray):
    """One step: ReLU input embedding, GRU update, linear readout.  Returns (out, h', cache)."""
    e_pre = x @ params["We"] + params["be"]
    e = np.maximum(e_pre, 0.0)
    z = sigmoid(e @ params["Wz"] + h @ params["Uz"] + params["bz"])
    r = sigmoid(e @ params["Wr"] + h @ params["Ur"] + params["br"])
    rh = r * h
    n = np.tanh(e @ params["Wh"] + rh @ params["Uh"] + params["bh"])
    h_new = (1.0 - z) * n + z * h
    out = h_new @ params["Wo"] + params["bo"]
    return out, h_new, (x, e_pre, e, h, z, r, rh, n, h_new)


def gru_forward(params: dict, xs: np.ndarray, h0: np.ndarray):
    """Unroll over ``xs`` of shape (T, B, in).  Returns (outs (T, B, A), h_T, cache)."""
    outs, caches = [], []
    h = h0
    for t in range(xs.shape[0]):
        o, h, c = gru_step(params, xs[t], h)
        outs.append(o)
        caches.append(c)
    return np.stack(outs), h, caches


def gru_backward(params: dict, caches, douts: np.ndarray):
    """Backprop through time; the initial state is treated as a constant."""
    grads = {k: np.zeros_like(params[k]) for k in _GRU_KEYS}
    dh_next = np.zeros_like(caches[0][3])
    for t in reversed(range(len(caches))):
        x, e_pre, e, h, z, r, rh, n, h_new = caches[t]
        do = douts[t]
        grads["Wo"] += h_new.T @ do
        grads["bo"] += do.sum(axis=0)
        dh = do @ params["Wo"].T + dh_next
        dn = dh * (1.0 - z)
        dz = dh * (h - n)
        dh_prev = dh * z
        dn_pre = dn * (1.0 - n * n)
        grads["Wh"] += e.T @ dn_pre
        grads["Uh"] += rh.T @ dn_pre
        grads["bh"] += dn_pre.sum(axis=0)
        drh = dn_pre @ params["Uh"].T
        dr = drh * h
        dh_prev += drh * r
        dz_pre = dz * z * (1.0 - z)
        dr_pre = dr * r * (1.0 - r)
        grads["Wz"] += e.T @ dz_pre
        grads["Uz"] += h.T @ dz_pre
        grads["bz"] += dz_pre.sum(axis=0)
        grads["Wr"] += e.T @ dr_pre
        grads["Ur"] += h.T @ dr_pre
        grads["br"] += dr_pre.sum(axis=0)
        dh_prev += dz_pre @ params["Uz"].T + dr_pre @ params["Ur"].T
        de = dn_pre @ params["Wh"].T + dz_pre @ params["Wz"].T + dr_pre @ params["Wr"].T
        de_pre = de * (e_pre > 0)
        grads["We"] += x.T @ de_pre
        grads["be"] += de_pre.sum(axis=0)
        dh_next = dh_prev
    return grads


class FeedForwardNet:
    """Uniform (T, B, in) -> (T, B, out) wrapper around an MLP."""

    recurrent = False

    def __init__(self, spec: MlpSpec):
        self.spec = spec

    def init(self, rng):
        return init_mlp(self.spec, rng)

    def initial_state(self, batch: int):
        return None

    def forward(self, params, xs, h0=None):
        y, cache = mlp_forward(params, xs)
        return y, None, cache

    def backward(self, params, cache, dys):
        return mlp_backward(params, cache, dys)[0]


class RecurrentNet:
    recurrent = True

    def __init__(self, input_dim: int, output_dim: int, hidden: int = 64):
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.hidden = hidden

    def init(self, rng):
        return init_gru(self.input_dim, self.hidden, self.output_dim, rng)

    def initial_state(self, batch: int):
        return np.zeros((batch, self.hidden))

    def forward(self, params, xs, h0=None):
        if xs.shape[-1] != self.input_dim:
            raise ValueError(f"input width {xs.shape[-1]} != {self.input_dim}")
        if h0 is None:
            h0 = self.initial_state(xs.shape[1])
        return gru_forward(params, xs, h0)

    def backward(self, params, cache, dys):
        return gru_backward(params, cache, dys)


# -- parameter sets and optimisers ---------------------------------------------

class ParamSet:
    """Online parameters, their target copy and Adam moments.

    Each role lives in one flat float64 buffer; ``online[name]`` etc. are views into
    it, so tensors must be updated in place, never rebound.
    """

    def __init__(self, tensors: dict[str, np.ndarray]):
        self.shapes = {k: np.shape(v) for k, v in sorted(tensors.items())}
        self.size = sum(int(np.prod(s)) for s in self.shapes.values())
        self.flat_online = np.concatenate([np.ravel(np.asarray(tensors[k], dtype=float))
                                           for k in self.shapes]) if self.shapes else np.zeros(0)
        self.flat_target = self.flat_online.copy()
        self.flat_m = np.zeros(self.size)
        self.flat_v = np.zeros(self.size)
        self.online = self._views(self.flat_online)
        self.target = self._views(self.flat_target)
        self.m = self._views(self.flat_m)
        self.v = self._views(self.flat_v)
        self.step = 0

    def _views(self, flat):
        out, pos = {}, 0
        for k, shape in self.shapes.items():
            n = int(np.prod(shape))
            out[k] = flat[pos:pos + n].reshape(shape)
            pos += n
        return out

    def flatten(self, grads: dict) -> np.ndarray:
        return np.concatenate([np.ravel(grads[k]) if k in grads else np.zeros(int(np.prod(s)))
                               for k, s in self.shapes.items()])

    def names(self):
        return list(self.shapes)

    def copy(self) -> "ParamSet":
        other = ParamSet(self.online)
        other.flat_target[:] = self.flat_target
        other.flat_m[:] = self.flat_m
        other.flat_v[:] = self.flat_v
        other.step = self.step
        return other


@numba.njit(cache=True)
def _adam_kernel(theta, g, m, v, lr, beta1, beta2, eps, c1, c2):
    for i in range(theta.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i])
        theta[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


@numba.njit(cache=True)
def _soft_kernel(target, online, tau):
    for i in range(target.shape[0]):
        target[i] = tau * online[i] + (1.0 - tau) * target[i]


def adam_update(pset: ParamSet, grads: dict, lr: float,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> bool:
    """In-place Adam step on ``pset.online``; a non-finite gradient rejects the step."""
    flat = pset.flatten(grads)
    if not np.all(np.isfinite(flat)):
        log.warning("non-finite gradient; Adam step rejected")
        return False
    pset.step += 1
    c1 = 1.0 - beta1 ** pset.step
    c2 = 1.0 - beta2 ** pset.step
    _adam_kernel(pset.flat_online, flat, pset.flat_m, pset.flat_v, lr, beta1, beta2, eps, c1, c2)
    return True


def soft_update(target: dict, online: dict, tau: float = 0.01) -> dict:
    """Pure form: returns tau * online + (1 - tau) * target."""
    if target.keys() != online.keys():
        raise ValueError("target/online parameter names differ")
    out = {}
    for k in target:
        if np.shape(target[k]) != np.shape(online[k]):
            raise ValueError(f"shape mismatch for {k}")
        out[k] = tau * np.asarray(online[k]) + (1.0 - tau) * np.asarray(target[k])
    return out


def soft_update_(pset: ParamSet, tau: float = 0.01) -> None:
    _soft_kernel(pset.flat_target, pset.flat_online, tau)


# -- checkpoints --------------------------------------------------------------

_MAGIC = b"QCKPT1\n"


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    """Byte-stable container: magic, header length, JSON header, raw little-endian float64 data."""
    entries, chunks, offset = [], [], 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype="<f8", order="C")  # keeps 0-d shapes
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"meta": meta, "entries": entries}, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for c in chunks:
            fh.write(c)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_MAGIC):
        raise ValueError(f"{path} is not a checkpoint file")
    pos = len(_MAGIC)
    (hlen,) = struct.unpack("<Q", blob[pos:pos + 8])
    pos += 8
    header = json.loads(blob[pos:pos + hlen])
    data = blob[pos + hlen:]
    tensors = {}
    for e in header["entries"]:
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=e["offset"])
        tensors[e["name"]] = arr.reshape(tuple(e["shape"])).astype(float)
    return tensors, header["meta"]
