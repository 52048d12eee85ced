"""Two-hidden-layer tanh MLP velocity field with hand-written backprop and Adam.

Everything is float64 numpy. Parameters live in a plain dict keyed by
``W1, b1, W2, b2, W3, b3`` so optimizer state can mirror it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

MODEL_FORMAT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")


def time_features(tau, width: int) -> np.ndarray:
    """Sinusoidal features of global time plus a raw linear copy of tau.

    Integer frequencies make tau=0 and tau=1 alias, so the linear column
    is what separates the two ends of the path.
    """
    if width % 2:
        raise ValueError(f"time feature width must be even, got {width}")
    tau = np.atleast_1d(np.asarray(tau, dtype=np.float64))
    k = np.arange(1, width // 2 + 1, dtype=np.float64)
    angle = 2.0 * math.pi * tau[:, None] * k[None, :]
    return np.concatenate([np.sin(angle), np.cos(angle), tau[:, None]], axis=1)


@dataclass
class VelocityModel:
    d: int
    hidden_width: int
    time_feature_width: int
    params: dict[str, np.ndarray]
    activation: str = "tanh"

    @property
    def input_dim(self) -> int:
        return self.d + self.time_feature_width + 1

    def __call__(self, x, tau) -> np.ndarray:
        return model_eval(self, x, tau)

    def copy(self) -> "VelocityModel":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "config": {
                "d": self.d,
                "hidden_width": self.hidden_width,
                "time_feature_width": self.time_feature_width,
                "activation": self.activation,
            },
            "params": {
                name: {"shape": list(p.shape), "data": p.ravel().tolist()}
                for name, p in self.params.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VelocityModel":
        if data.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {data.get('version')!r}")
        cfg = data["config"]
        params = {
            name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in data["params"].items()
        }
        model = cls(
            d=int(cfg["d"]),
            hidden_width=int(cfg["hidden_width"]),
            time_feature_width=int(cfg["time_feature_width"]),
            params=params,
            activation=cfg.get("activation", "tanh"),
        )
        _check_shapes(model, model.params)
        return model


def _param_shapes(d: int, width: int, n_in: int) -> dict[str, tuple[int, ...]]:
    return {
        "W1": (n_in, width),
        "b1": (width,),
        "W2": (width, width),
        "b2": (width,),
        "W3": (width, d),
        "b3": (d,),
    }


def _check_shapes(model: VelocityModel, tensors: dict[str, np.ndarray]) -> None:
    expected = _param_shapes(model.d, model.hidden_width, model.input_dim)
    if set(tensors) != set(expected):
        raise ValueError(f"parameter names {sorted(tensors)} != {sorted(expected)}")
    for name, shape in expected.items():
        if tensors[name].shape != shape:
            raise ValueError(f"{name} has shape {tensors[name].shape}, expected {shape}")


def init_model(d: int, hidden_width: int = 128, seed: int = 0, time_feature_width: int = 16) -> VelocityModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases."""
    if d < 1 or hidden_width < 1:
        raise ValueError("d and hidden_width must be positive")
    rng = np.random.default_rng(seed)
    n_in = d + time_feature_width + 1
    params = {}
    for name, shape in _param_shapes(d, hidden_width, n_in).items():
        if name.startswith("W"):
            bound = 1.0 / math.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            params[name] = np.zeros(shape)
    return VelocityModel(d, hidden_width, time_feature_width, params)


def zero_model(d: int, hidden_width: int = 8, time_feature_width: int = 16) -> VelocityModel:
    model = init_model(d, hidden_width, 0, time_feature_width)
    for p in model.params.values():
        p[...] = 0.0
    return model


def _inputs(model: VelocityModel, x, tau) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.d:
        raise ValueError(f"model expects dimension {model.d}, got {x.shape[1]}")
    tau = np.broadcast_to(np.asarray(tau, dtype=np.float64), (x.shape[0],))
    return np.concatenate([x, time_features(tau, model.time_feature_width)], axis=1), single


def _forward(params, inp):
    h1 = np.tanh(inp @ params["W1"] + params["b1"])
    h2 = np.tanh(h1 @ params["W2"] + params["b2"])
    out = h2 @ params["W3"] + params["b3"]
    return h1, h2, out


def model_eval(model: VelocityModel, x, tau) -> np.ndarray:
    """Velocity at points ``x`` (n, d) or (d,) and global time(s) ``tau``."""
    inp, single = _inputs(model, x, tau)
    out = _forward(model.params, inp)[2]
    return out[0] if single else out


def _check_batch(x, target):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if target.shape != x.shape:
        raise ValueError(f"targets shape {target.shape} does not match inputs {x.shape}")
    return x, target


def batch_loss(model: VelocityModel, x, tau, target) -> float:
    """Mean over the batch of squared velocity error."""
    x, target = _check_batch(x, target)
    inp, _ = _inputs(model, x, tau)
    err = _forward(model.params, inp)[2] - target
    return float(np.mean(np.sum(err * err, axis=1)))


def model_grad(model: VelocityModel, x, tau, target) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact reverse-mode gradients for one batch."""
    x, target = _check_batch(x, target)
    inp, _ = _inputs(model, x, tau)
    p = model.params
    h1, h2, out = _forward(p, inp)
    err = out - target
    n = x.shape[0]
    loss = float(np.mean(np.sum(err * err, axis=1)))

    g_out = (2.0 / n) * err
    grads = {"W3": h2.T @ g_out, "b3": g_out.sum(axis=0)}
    g_a2 = (g_out @ p["W3"].T) * (1.0 - h2 * h2)
    grads["W2"] = h1.T @ g_a2
    grads["b2"] = g_a2.sum(axis=0)
    g_a1 = (g_a2 @ p["W2"].T) * (1.0 - h1 * h1)
    grads["W1"] = inp.T @ g_a1
    grads["b1"] = g_a1.sum(axis=0)
    return loss, grads


def finite_diff_check(model: VelocityModel, x, tau, target, h: float = 1e-5, n_probe: int = 50, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Probes ``n_probe`` parameter entries chosen uniformly over all of theta.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    _, grads = model_grad(model, x, tau, target)
    rng = np.random.default_rng(seed)
    names = list(PARAM_NAMES)
    sizes = np.array([model.params[k].size for k in names])
    flat_idx = rng.choice(sizes.sum(), size=min(n_probe, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    probe = model.copy()
    worst = 0.0
    for fi in flat_idx:
        which = int(np.searchsorted(offsets, fi, side="right") - 1)
        name = names[which]
        local = fi - offsets[which]
        arr = probe.params[name].reshape(-1)
        orig = arr[local]
        arr[local] = orig + h
        up = batch_loss(probe, x, tau, target)
        arr[local] = orig - h
        down = batch_loss(probe, x, tau, target)
        arr[local] = orig
        numeric = (up - down) / (2.0 * h)
        analytic = grads[name].reshape(-1)[local]
        worst = max(worst, abs(analytic - numeric) / (abs(analytic) + 1e-12))
    return worst


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    lr: float = 3e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: VelocityModel, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8) -> "AdamState":
        zeros = {k: np.zeros_like(p) for k, p in model.params.items()}
        return cls(m=zeros, v={k: z.copy() for k, z in zeros.items()}, lr=lr, betas=tuple(betas), eps=eps)


def adam_update(state: AdamState, model: VelocityModel, grads: dict[str, np.ndarray]) -> tuple[AdamState, VelocityModel]:
    """One bias-corrected Adam step; returns new state and model, inputs untouched."""
    _check_shapes(model, grads)
    b1, b2 = state.betas
    step = state.step + 1
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    m, v, params = {}, {}, {}
    for k, p in model.params.items():
        g = grads[k]
        m[k] = b1 * state.m[k] + (1.0 - b1) * g
        v[k] = b2 * state.v[k] + (1.0 - b2) * g * g
        params[k] = p - state.lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + state.eps)
    new_state = AdamState(m=m, v=v, step=step, lr=state.lr, betas=state.betas, eps=state.eps)
    return new_state, replace(model, params=params)
