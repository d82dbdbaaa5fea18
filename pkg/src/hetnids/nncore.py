"""Dense network engine with hand-written backward passes and Adam.

A network is an ordered list of layers (linear, relu, batchnorm, dropout,
sigmoid). Parameters live in plain dicts of float64 arrays so that
gradients, optimizer moments and checkpoints share one layout::

    net.params[i] = {"W": (in, out), "b": (out,)}           # linear
    net.params[i] = {"gamma", "beta", "running_mean", "running_var"}  # batchnorm
    net.params[i] = {}                                       # everything else
"""

from __future__ import annotations

import copy
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

LAYER_KINDS = ("linear", "relu", "batchnorm", "dropout", "sigmoid")
TRAINABLE = {"linear": ("W", "b"), "batchnorm": ("gamma", "beta")}
CHECKPOINT_VERSION = 1

# sigmoid input is clipped here so exp never overflows
_LOGIT_CLIP = 500.0


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int
    out_dim: int
    dropout_p: float = 0.0
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dims must be >= 1")
        if self.kind != "linear" and self.in_dim != self.out_dim:
            raise ValueError(f"{self.kind} layer must keep its width")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")


def linear(i, o):
    return LayerSpec("linear", i, o)


def relu(d):
    return LayerSpec("relu", d, d)


def batchnorm(d, momentum=0.9, eps=1e-5):
    return LayerSpec("batchnorm", d, d, bn_momentum=momentum, bn_eps=eps)


def dropout(d, p=0.2):
    return LayerSpec("dropout", d, d, dropout_p=p)


def sigmoid(d):
    return LayerSpec("sigmoid", d, d)


@dataclass
class MlpParams:
    specs: list[LayerSpec]
    params: list[dict[str, np.ndarray]]
    seed: int | None = None

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim

    def copy(self) -> "MlpParams":
        return copy.deepcopy(self)

    def trainable(self):
        """Yield ``(layer_index, name, array)`` for every trainable tensor."""
        for i, spec in enumerate(self.specs):
            for name in TRAINABLE.get(spec.kind, ()):
                yield i, name, self.params[i][name]

    def zeros_like_grads(self) -> list[dict[str, np.ndarray]]:
        return [
            {name: np.zeros_like(p[name]) for name in TRAINABLE.get(s.kind, ())}
            for s, p in zip(self.specs, self.params)
        ]


@dataclass
class ForwardCache:
    mode: str
    entries: list[dict] = field(default_factory=list)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[dict[str, np.ndarray]] | None = None
    v: list[dict[str, np.ndarray]] | None = None

    def hyper(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}


def init_mlp(specs: list[LayerSpec], seed: int = 0) -> MlpParams:
    """He-normal weights, zero biases, identity batchnorm."""
    if not specs:
        raise ValueError("network needs at least one layer")
    for a, b in zip(specs, specs[1:]):
        if a.out_dim != b.in_dim:
            raise ValueError(f"layer dims do not chain: {a.kind}({a.out_dim}) -> {b.kind}({b.in_dim})")
    rng = np.random.default_rng(seed)
    params = []
    for s in specs:
        if s.kind == "linear":
            params.append({
                "W": rng.normal(0.0, np.sqrt(2.0 / s.in_dim), size=(s.in_dim, s.out_dim)),
                "b": np.zeros(s.out_dim),
            })
        elif s.kind == "batchnorm":
            params.append({
                "gamma": np.ones(s.out_dim),
                "beta": np.zeros(s.out_dim),
                "running_mean": np.zeros(s.out_dim),
                "running_var": np.ones(s.out_dim),
            })
        else:
            params.append({})
    return MlpParams(list(specs), params, seed)


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, -_LOGIT_CLIP, _LOGIT_CLIP)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def forward(net: MlpParams, X: np.ndarray, mode: str = "eval", seed: int | None = None,
            update_stats: bool = True):
    """Run ``X`` through ``net``.

    Train mode normalises with batch statistics (and folds them into the
    running averages unless ``update_stats`` is False) and applies inverted
    dropout drawn from ``seed``. Eval mode is deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.in_dim:
        raise ValueError(f"expected input of shape (B, {net.in_dim}), got {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("non-finite network input")
    rng = np.random.default_rng(seed) if mode == "train" else None
    cache = ForwardCache(mode)
    h = X
    for spec, p in zip(net.specs, net.params):
        if spec.kind == "linear":
            cache.entries.append({"x": h})
            h = h @ p["W"] + p["b"]
        elif spec.kind == "relu":
            mask = h > 0
            cache.entries.append({"mask": mask})
            h = h * mask
        elif spec.kind == "batchnorm":
            if mode == "train":
                if h.shape[0] < 2:
                    raise ValueError("batchnorm in train mode needs a batch of at least 2")
                mu = h.mean(axis=0)
                var = h.var(axis=0)
                if update_stats:
                    m = spec.bn_momentum
                    p["running_mean"] *= m
                    p["running_mean"] += (1.0 - m) * mu
                    p["running_var"] *= m
                    p["running_var"] += (1.0 - m) * var
            else:
                mu, var = p["running_mean"], p["running_var"]
            inv_std = 1.0 / np.sqrt(var + spec.bn_eps)
            xhat = (h - mu) * inv_std
            cache.entries.append({"xhat": xhat, "inv_std": inv_std})
            h = p["gamma"] * xhat + p["beta"]
        elif spec.kind == "dropout":
            if mode == "train" and spec.dropout_p > 0:
                keep = 1.0 - spec.dropout_p
                mask = (rng.random(h.shape) < keep) / keep
                cache.entries.append({"mask": mask})
                h = h * mask
            else:
                cache.entries.append({"mask": None})
        elif spec.kind == "sigmoid":
            h = stable_sigmoid(h)
            cache.entries.append({"y": h})
    return h, cache


def backward(net: MlpParams, cache: ForwardCache, dY: np.ndarray):
    """Return ``(grads, dX)`` for upstream gradient ``dY``.

    Batchnorm gradients include the terms through the batch mean and
    variance, so the cache must come from a train-mode forward for exact
    results.
    """
    if len(cache.entries) != len(net.specs):
        raise ValueError("cache does not match network")
    grads = net.zeros_like_grads()
    g = np.asarray(dY, dtype=np.float64)
    for i in range(len(net.specs) - 1, -1, -1):
        spec, p, c = net.specs[i], net.params[i], cache.entries[i]
        if spec.kind == "linear":
            grads[i]["W"] = c["x"].T @ g
            grads[i]["b"] = g.sum(axis=0)
            g = g @ p["W"].T
        elif spec.kind == "relu":
            g = g * c["mask"]
        elif spec.kind == "batchnorm":
            xhat, inv_std = c["xhat"], c["inv_std"]
            grads[i]["gamma"] = (g * xhat).sum(axis=0)
            grads[i]["beta"] = g.sum(axis=0)
            dxhat = g * p["gamma"]
            if cache.mode == "train":
                n = g.shape[0]
                g = (inv_std / n) * (
                    n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
                )
            else:
                g = dxhat * inv_std
        elif spec.kind == "dropout":
            if c["mask"] is not None:
                g = g * c["mask"]
        elif spec.kind == "sigmoid":
            y = c["y"]
            g = g * y * (1.0 - y)
    return grads, g


def init_adam(net: MlpParams, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(lr, beta1, beta2, eps, 0, net.zeros_like_grads(), net.zeros_like_grads())


def adam_step(net: MlpParams, grads, state: AdamState, clip_norm: float | None = None):
    """Bias-corrected Adam update, applied in place. Returns ``(net, state)``."""
    if state.m is None:
        state.m, state.v = net.zeros_like_grads(), net.zeros_like_grads()
    if len(grads) != len(net.params):
        raise ValueError("gradient list does not match network")
    if clip_norm is not None:
        total = np.sqrt(sum(float((g * g).sum()) for layer in grads for g in layer.values()))
        if total > clip_norm:
            grads = [{k: g * (clip_norm / total) for k, g in layer.items()} for layer in grads]
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for i, name, param in net.trainable():
        g = grads[i][name]
        if g.shape != param.shape:
            raise ValueError(f"layer {i} {name}: grad shape {g.shape} != param shape {param.shape}")
        m, v = state.m[i][name], state.v[i][name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        param -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return net, state


# --- checkpoints -----------------------------------------------------------
#
# A checkpoint is an .npz archive. Key "__meta__" holds UTF-8 JSON:
#   {"format": "hetnids-mlp", "version": 1, "specs": [...], "seed": ...,
#    "adam": {"lr", "beta1", "beta2", "eps", "t"} | null, "extra": {...}}
# Arrays are stored as "p/<layer>/<name>", "m/<layer>/<name>", "v/<layer>/<name>".


def save_checkpoint(path, net: MlpParams, state: AdamState | None = None,
                    extra: dict | None = None) -> Path:
    path = Path(path)
    meta = {
        "format": "hetnids-mlp",
        "version": CHECKPOINT_VERSION,
        "specs": [asdict(s) for s in net.specs],
        "seed": net.seed,
        "adam": None,
        "extra": extra or {},
    }
    arrays = {f"p/{i}/{k}": a for i, p in enumerate(net.params) for k, a in p.items()}
    if state is not None and state.m is not None:
        meta["adam"] = {**state.hyper(), "t": state.t}
        for tag, buf in (("m", state.m), ("v", state.v)):
            arrays.update({f"{tag}/{i}/{k}": a for i, layer in enumerate(buf) for k, a in layer.items()})
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    path.write_bytes(buf.getvalue())
    return path


def load_checkpoint(path) -> tuple[MlpParams, AdamState | None, dict]:
    with np.load(Path(path)) as z:
        meta = json.loads(bytes(z["__meta__"]).decode())
        if meta.get("format") != "hetnids-mlp" or meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint format")
        specs = [LayerSpec(**s) for s in meta["specs"]]
        params: list[dict] = [{} for _ in specs]
        m: list[dict] = [{} for _ in specs]
        v: list[dict] = [{} for _ in specs]
        for key in z.files:
            if key == "__meta__":
                continue
            tag, i, name = key.split("/")
            {"p": params, "m": m, "v": v}[tag][int(i)][name] = z[key].copy()
    net = MlpParams(specs, params, meta["seed"])
    state = None
    if meta["adam"] is not None:
        a = meta["adam"]
        state = AdamState(a["lr"], a["beta1"], a["beta2"], a["eps"], a["t"], m, v)
    return net, state, meta["extra"]
