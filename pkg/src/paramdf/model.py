"""The PDF network: family mixer, shd/idp layers, readout and head.

All computation runs on padded batches of graphs. A batch carries the
stacked family tensor ``(B, K, N, N)``, the mixer support mask and a node
mask; padded nodes are kept at zero and excluded from the readout.

Parameters live in a flat ``dict[str, np.ndarray]``; gradients use the same
keys.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .family import FamilySpec, MatrixFamily, build_family
from .graph import Dataset, Graph

MIXER_DEPTHS = ("Lin", "1L", "2L")
VARIANTS = ("shd", "idp")
READOUTS = ("mean", "max", "sum")
ACTIVATIONS = ("gelu", "relu", "identity")
INPUT_ENCODERS = ("embedding", "linear", "none")

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x):
    return x * ndtr(x)


def gelu_grad(x):
    return ndtr(x) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _act(name, x):
    if name == "gelu":
        return gelu(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    return x


def _act_grad(name, x):
    if name == "gelu":
        return gelu_grad(x)
    if name == "relu":
        return (x > 0).astype(x.dtype)
    return np.ones_like(x)


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 16
    num_layers: int = 2
    mixer_depth: str = "2L"
    variant: str = "idp"
    family: FamilySpec = field(default_factory=lambda: FamilySpec(((-0.5, 1),)))
    readout: str = "mean"
    dropout: float = 0.0
    activation: str = "gelu"
    mixer_hidden: Optional[int] = None
    task: str = "regression"
    num_classes: Optional[int] = None
    input_encoder: str = "embedding"
    input_dim: int = 1
    node_label_vocab: tuple = (0,)

    def __post_init__(self):
        if isinstance(self.family, dict):
            object.__setattr__(self, "family", FamilySpec.parse(
                self.family["entries"], self.family.get("sparsity", "dense")))
        object.__setattr__(self, "node_label_vocab", tuple(int(v) for v in self.node_label_vocab))
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        # zero layers is allowed: a head-only probe model
        if self.num_layers < 0:
            raise ValueError("num_layers must be >= 0")
        if self.mixer_depth not in MIXER_DEPTHS:
            raise ValueError(f"mixer_depth must be one of {MIXER_DEPTHS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.input_encoder not in INPUT_ENCODERS:
            raise ValueError(f"input_encoder must be one of {INPUT_ENCODERS}")
        if self.input_encoder == "none" and self.input_dim != self.hidden_dim:
            raise ValueError("input_encoder='none' needs input_dim == hidden_dim")
        if self.task == "classification" and not self.num_classes:
            raise ValueError("classification needs num_classes")

    @property
    def channels(self) -> int:
        return 1 if self.variant == "shd" else self.hidden_dim

    @property
    def mixer_width(self) -> int:
        return self.mixer_hidden or len(self.family)

    @property
    def out_dim(self) -> int:
        return 1 if self.task == "regression" else int(self.num_classes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.to_config()
        d["node_label_vocab"] = list(self.node_label_vocab)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    def bind(self, ds: Dataset) -> "ModelConfig":
        """Fill task and input-encoder fields from a dataset."""
        kw = {"task": ds.task, "num_classes": ds.num_classes if ds.task == "classification" else None}
        g0 = ds.graphs[0]
        if g0.node_features is not None:
            kw["input_dim"] = int(g0.node_features.shape[1])
            if self.input_encoder == "embedding":
                kw["input_encoder"] = "linear"
        else:
            vocab = sorted({int(x) for g in ds.graphs for x in g.node_labels})
            kw["node_label_vocab"] = tuple(vocab)
            kw["input_dim"] = len(vocab)
            kw["input_encoder"] = "embedding"
        return replace(self, **kw)


def param_shapes(cfg: ModelConfig) -> dict:
    """Ordered parameter names and shapes for a configuration."""
    d, k, c, h = cfg.hidden_dim, len(cfg.family), cfg.channels, cfg.mixer_width
    shapes = {}
    if cfg.input_encoder == "embedding":
        shapes["embed"] = (cfg.input_dim, d)
    elif cfg.input_encoder == "linear":
        shapes["input.w"] = (cfg.input_dim, d)
        shapes["input.b"] = (d,)
    for layer in range(cfg.num_layers):
        p = f"layers.{layer}."
        shapes[p + "w1"] = (d, d)
        shapes[p + "b1"] = (d,)
        if cfg.mixer_depth == "2L":
            shapes[p + "mix_w1"] = (k, h)
            shapes[p + "mix_b1"] = (h,)
            shapes[p + "mix_w2"] = (h, c)
            shapes[p + "mix_b2"] = (c,)
        else:
            shapes[p + "theta"] = (k,) if cfg.variant == "shd" else (k, d)
            if cfg.mixer_depth == "1L":
                shapes[p + "mix_b"] = (c,)
        shapes[p + "w2"] = (d, d)
        shapes[p + "b2"] = (d,)
    shapes["head.w"] = (d, cfg.out_dim)
    shapes["head.b"] = (cfg.out_dim,)
    return shapes


def count_params(cfg_or_params) -> int:
    if isinstance(cfg_or_params, ModelConfig):
        return int(sum(np.prod(s, dtype=np.int64) for s in param_shapes(cfg_or_params).values()))
    return int(sum(v.size for v in cfg_or_params.values()))


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict:
    """Glorot-uniform transforms, zero biases, mixer coefficients in ``U(0, 1/|G|)``."""
    k = len(cfg.family)
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("theta",):
            params[name] = rng.uniform(0.0, 1.0 / k, size=shape)
        elif len(shape) == 2:
            a = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-a, a, size=shape)
        else:
            params[name] = np.zeros(shape)
    return params


def zeros_like_params(params: dict) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}


# --- mixer -----------------------------------------------------------------

@dataclass
class MixerParams:
    """Weights of one positionwise mixer ``f_theta`` over the family axis."""

    depth: str
    variant: str
    theta: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    w1: Optional[np.ndarray] = None
    b1: Optional[np.ndarray] = None
    w2: Optional[np.ndarray] = None
    b2: Optional[np.ndarray] = None

    @classmethod
    def from_params(cls, params: dict, cfg: ModelConfig, layer: int) -> "MixerParams":
        p = f"layers.{layer}."
        return cls(cfg.mixer_depth, cfg.variant, theta=params.get(p + "theta"),
                   bias=params.get(p + "mix_b"), w1=params.get(p + "mix_w1"),
                   b1=params.get(p + "mix_b1"), w2=params.get(p + "mix_w2"),
                   b2=params.get(p + "mix_b2"))

    def as_dict(self) -> dict:
        names = {"theta": "theta", "bias": "mix_b", "w1": "mix_w1", "b1": "mix_b1",
                 "w2": "mix_w2", "b2": "mix_b2"}
        return {names[k]: getattr(self, k) for k in names if getattr(self, k) is not None}


def _theta2d(theta):
    return theta.reshape(theta.shape[0], -1)


def _mixer_forward(x, support, mp: dict, depth: str):
    """``x``: (..., K) family entries per position. Returns (..., C) and a cache."""
    if depth == "Lin":
        out = x @ _theta2d(mp["theta"])
        cache = None
    elif depth == "1L":
        pre = x @ _theta2d(mp["theta"]) + mp["mix_b"]
        out = gelu(pre)
        cache = pre
    else:
        pre = x @ mp["mix_w1"] + mp["mix_b1"]
        hid = gelu(pre)
        out = hid @ mp["mix_w2"] + mp["mix_b2"]
        cache = (pre, hid)
    out *= support[..., None]
    return out, cache


def _mixer_backward(x, support, mp: dict, depth: str, cache, dout):
    """Mixer parameter gradients. ``dout`` is a scratch array and is masked in place."""
    dout *= support[..., None]
    k = x.shape[-1]
    xf = x.reshape(-1, k)
    grads = {}
    if depth == "Lin":
        c = dout.shape[-1]
        grads["theta"] = (xf.T @ dout.reshape(-1, c)).reshape(mp["theta"].shape)
    elif depth == "1L":
        dpre = dout * gelu_grad(cache)
        c = dpre.shape[-1]
        dpre_f = dpre.reshape(-1, c)
        grads["theta"] = (xf.T @ dpre_f).reshape(mp["theta"].shape)
        grads["mix_b"] = dpre_f.sum(axis=0)
    else:
        pre, hid = cache
        h = hid.shape[-1]
        c = dout.shape[-1]
        dout_f = dout.reshape(-1, c)
        hid_f = hid.reshape(-1, h)
        grads["mix_w2"] = hid_f.T @ dout_f
        grads["mix_b2"] = dout_f.sum(axis=0)
        dpre_f = (dout_f @ mp["mix_w2"].T) * gelu_grad(pre.reshape(-1, h))
        grads["mix_w1"] = xf.T @ dpre_f
        grads["mix_b1"] = dpre_f.sum(axis=0)
    return grads


def _fusable(cfg: ModelConfig) -> bool:
    # idp mixers whose last step is affine never need the (B, N, N, d) operator stack
    return cfg.variant == "idp" and cfg.mixer_depth in ("Lin", "2L")


def _affine_mix_forward(x, support, mp: dict, depth: str, z):
    """Apply ``(basis @ W + b) * support`` channelwise to ``z`` without materializing it.

    ``basis`` is the family itself (Lin) or the hidden GELU layer (2L). With
    ``Y_p = (basis_p * support) @ z``, the mixed product is ``sum_p W[p] Y_p``
    plus the bias times ``support @ z``.
    """
    if depth == "Lin":
        pre, basis, w, b = None, x, mp["theta"], None
    else:
        pre = x @ mp["mix_w1"] + mp["mix_b1"]
        basis, w, b = gelu(pre), mp["mix_w2"], mp["mix_b2"]
    masked = np.ascontiguousarray(np.moveaxis(basis * support[..., None], -1, 1))  # (B, P, N, N)
    y = masked @ z[:, None]                                                         # (B, P, N, d)
    zp = np.einsum("bpuj,pj->buj", y, w)
    sz = None
    if b is not None:
        sz = support @ z
        zp += b * sz
    return zp, (pre, masked, y, sz)


def _affine_mix_backward(x, support, mp: dict, depth: str, cache, z, dzp):
    """Gradients for :func:`_affine_mix_forward`; returns ``(dz, mixer grads)``."""
    pre, masked, y, sz = cache
    w = mp["theta"] if depth == "Lin" else mp["mix_w2"]
    dw = np.einsum("bpuj,buj->pj", y, dzp)
    scaled = dzp[:, None] * w[None, :, None, :]                 # (B, P, N, d)
    dz = (np.swapaxes(masked, -1, -2) @ scaled).sum(axis=1)
    if depth == "Lin":
        return dz, {"theta": dw}
    b = mp["mix_b2"]
    dz += b * (np.swapaxes(support, -1, -2) @ dzp)
    grads = {"mix_w2": dw, "mix_b2": np.einsum("buj,buj->j", dzp, sz)}
    dbasis = np.moveaxis(scaled @ np.swapaxes(z, -1, -2)[:, None], 1, -1)  # (B, N, N, P)
    dbasis *= support[..., None]
    h = pre.shape[-1]
    dpre_f = (dbasis * gelu_grad(pre)).reshape(-1, h)
    grads["mix_w1"] = x.reshape(-1, x.shape[-1]).T @ dpre_f
    grads["mix_b1"] = dpre_f.sum(axis=0)
    return dz, grads


def mix_family(fam: MatrixFamily, m: MixerParams) -> np.ndarray:
    """Apply the mixer entrywise along the family axis.

    Returns an ``(n, n)`` matrix for ``shd`` and a ``(d, n, n)`` stack for ``idp``.
    """
    mp = m.as_dict()
    width = (mp["theta"].shape[0] if "theta" in mp else mp["mix_w1"].shape[0])
    if width != len(fam):
        raise ValueError(f"mixer expects {width} family members, got {len(fam)}")
    x = np.moveaxis(np.asarray(fam.matrices), 0, -1)
    out, _ = _mixer_forward(x, fam.support, mp, m.depth)
    if m.variant == "shd":
        return out[..., 0]
    return np.moveaxis(out, -1, 0)


# --- batching --------------------------------------------------------------

@dataclass
class GraphBatch:
    family: np.ndarray      # (B, N, N, K), family axis last
    support: np.ndarray     # (B, N, N)
    node_mask: np.ndarray   # (B, N)
    inputs: np.ndarray      # (B, N) vocab ids or (B, N, d_in) features
    sizes: np.ndarray       # (B,)

    def __len__(self):
        return self.family.shape[0]


def collate(graphs: Sequence[Graph], families: Sequence[MatrixFamily], cfg: ModelConfig) -> GraphBatch:
    b = len(graphs)
    n_max = max(g.n for g in graphs)
    k = len(cfg.family)
    fam = np.zeros((b, n_max, n_max, k))
    support = np.zeros((b, n_max, n_max))
    mask = np.zeros((b, n_max))
    if cfg.input_encoder == "embedding":
        lookup = {v: i for i, v in enumerate(cfg.node_label_vocab)}
        inputs = np.zeros((b, n_max), dtype=np.int64)
    else:
        inputs = np.zeros((b, n_max, cfg.input_dim))
    for i, (g, f) in enumerate(zip(graphs, families)):
        if len(f) != k or f.n != g.n:
            raise ValueError(f"family of graph {i} does not match the config")
        n = g.n
        fam[i, :n, :n] = np.moveaxis(f.matrices, 0, -1)
        support[i, :n, :n] = f.support
        mask[i, :n] = 1.0
        if cfg.input_encoder == "embedding":
            if g.node_labels is None:
                raise ValueError(f"graph {i} has no node labels for the embedding")
            try:
                inputs[i, :n] = [lookup[int(x)] for x in g.node_labels]
            except KeyError as exc:
                raise ValueError(f"node label {exc.args[0]} not in the embedding vocabulary") from None
        else:
            if g.node_features is None or g.node_features.shape[1] != cfg.input_dim:
                raise ValueError(f"graph {i} needs node_features of width {cfg.input_dim}")
            inputs[i, :n] = g.node_features
    return GraphBatch(fam, support, mask, inputs, np.array([g.n for g in graphs]))


# --- forward / backward ----------------------------------------------------

def _layer_params(params, layer):
    p = f"layers.{layer}."
    return {k[len(p):]: v for k, v in params.items() if k.startswith(p)}


def forward(batch: GraphBatch, cfg: ModelConfig, params: dict, train: bool = False,
            rng: Optional[np.random.Generator] = None):
    """Batched forward pass. Returns ``(outputs (B, out_dim), cache)``."""
    mask = batch.node_mask[..., None]
    cache = {"layers": []}
    if cfg.input_encoder == "embedding":
        h = params["embed"][batch.inputs] * mask
    elif cfg.input_encoder == "linear":
        h = (batch.inputs @ params["input.w"] + params["input.b"]) * mask
    else:
        h = batch.inputs * mask
    act = cfg.activation
    for layer in range(cfg.num_layers):
        lp = _layer_params(params, layer)
        a1 = h @ lp["w1"] + lp["b1"]
        z = _act(act, a1) * mask
        if _fusable(cfg):
            m = None
            zp, mcache = _affine_mix_forward(batch.family, batch.support, lp, cfg.mixer_depth, z)
        else:
            m, mcache = _mixer_forward(batch.family, batch.support, lp, cfg.mixer_depth)
            if cfg.variant == "shd":
                zp = m[..., 0] @ z
            else:
                zp = np.einsum("buvj,bvj->buj", m, z)
        a2 = zp @ lp["w2"] + lp["b2"]
        h_new = _act(act, a2) * mask
        drop = None
        if train and cfg.dropout > 0.0:
            if rng is None:
                raise ValueError("dropout in training mode needs an rng")
            drop = (rng.random(h_new.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
            h_new = h_new * drop
        if not np.all(np.isfinite(h_new)):
            raise FloatingPointError(f"non-finite activations in layer {layer}")
        cache["layers"].append({"h": h, "a1": a1, "z": z, "m": m, "mcache": mcache,
                                "zp": zp, "a2": a2, "drop": drop})
        h = h_new
    sizes = batch.sizes[:, None].astype(np.float64)
    if cfg.readout == "mean":
        r = h.sum(axis=1) / sizes
        arg = None
    elif cfg.readout == "sum":
        r = h.sum(axis=1)
        arg = None
    else:
        masked = np.where(mask > 0, h, -np.inf)
        arg = np.argmax(masked, axis=1)  # first index on ties
        r = np.take_along_axis(h, arg[:, None, :], axis=1)[:, 0, :]
    out = r @ params["head.w"] + params["head.b"]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite model output")
    cache.update(h=h, r=r, arg=arg)
    return out, cache


def backward(batch: GraphBatch, cfg: ModelConfig, params: dict, cache: dict, dout: np.ndarray) -> dict:
    """Gradients of ``sum(dout * outputs)`` with respect to every parameter."""
    grads = {}
    mask = batch.node_mask[..., None]
    h, r = cache["h"], cache["r"]
    grads["head.w"] = r.T @ dout
    grads["head.b"] = dout.sum(axis=0)
    dr = dout @ params["head.w"].T
    if cfg.readout == "mean":
        dh = np.broadcast_to((dr / batch.sizes[:, None])[:, None, :], h.shape) * mask
    elif cfg.readout == "sum":
        dh = np.broadcast_to(dr[:, None, :], h.shape) * mask
    else:
        dh = np.zeros_like(h)
        np.put_along_axis(dh, cache["arg"][:, None, :], dr[:, None, :], axis=1)
    act = cfg.activation
    for layer in reversed(range(cfg.num_layers)):
        lc = cache["layers"][layer]
        lp = _layer_params(params, layer)
        p = f"layers.{layer}."
        if lc["drop"] is not None:
            dh = dh * lc["drop"]
        da2 = dh * mask * _act_grad(act, lc["a2"])
        d = da2.shape[-1]
        grads[p + "w2"] = lc["zp"].reshape(-1, d).T @ da2.reshape(-1, d)
        grads[p + "b2"] = da2.sum(axis=(0, 1))
        dzp = da2 @ lp["w2"].T
        m, z = lc["m"], lc["z"]
        if _fusable(cfg):
            dz, mgrads = _affine_mix_backward(batch.family, batch.support, lp, cfg.mixer_depth,
                                              lc["mcache"], z, dzp)
        else:
            if cfg.variant == "shd":
                dm = (dzp @ np.swapaxes(z, 1, 2))[..., None]
                dz = np.swapaxes(m[..., 0], 1, 2) @ dzp
            else:
                dm = dzp[:, :, None, :] * z[:, None, :, :]
                dz = np.einsum("buvj,buj->bvj", m, dzp)
            mgrads = _mixer_backward(batch.family, batch.support, lp, cfg.mixer_depth, lc["mcache"], dm)
        for name, g in mgrads.items():
            grads[p + name] = g
        da1 = dz * mask * _act_grad(act, lc["a1"])
        grads[p + "w1"] = lc["h"].reshape(-1, d).T @ da1.reshape(-1, d)
        grads[p + "b1"] = da1.sum(axis=(0, 1))
        dh = da1 @ lp["w1"].T
    dh = dh * mask
    if cfg.input_encoder == "embedding":
        g = np.zeros_like(params["embed"])
        np.add.at(g, batch.inputs.reshape(-1), dh.reshape(-1, dh.shape[-1]))
        grads["embed"] = g
    elif cfg.input_encoder == "linear":
        x = batch.inputs
        grads["input.w"] = x.reshape(-1, x.shape[-1]).T @ dh.reshape(-1, dh.shape[-1])
        grads["input.b"] = dh.sum(axis=(0, 1))
    return {k: grads[k].reshape(params[k].shape) for k in params}


def layer_forward(h: np.ndarray, fam: MatrixFamily, cfg: ModelConfig, params: dict, layer: int = 0,
                  train: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """One pre-transform / mix / post-transform step on a single graph's ``(n, d)`` signal."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (fam.n, cfg.hidden_dim):
        raise ValueError(f"h has shape {h.shape}, expected ({fam.n}, {cfg.hidden_dim})")
    one = replace(cfg, num_layers=1)
    sub = {k.replace(f"layers.{layer}.", "layers.0."): v for k, v in params.items()
           if k.startswith(f"layers.{layer}.")}
    batch = GraphBatch(np.moveaxis(np.asarray(fam.matrices), 0, -1)[None], fam.support[None].astype(float),
                       np.ones((1, fam.n)), h[None], np.array([fam.n]))
    _, cache = forward(batch, replace(one, input_encoder="none", input_dim=cfg.hidden_dim),
                       {**sub, "head.w": np.zeros((cfg.hidden_dim, 1)), "head.b": np.zeros(1)},
                       train=train, rng=rng)
    return cache["h"][0]


def model_forward(g: Graph, fam: MatrixFamily, cfg: ModelConfig, params: dict,
                  mode: str = "eval", rng: Optional[np.random.Generator] = None):
    """Prediction for one graph: a float for regression, a logit vector otherwise."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    expected = param_shapes(cfg)
    if set(expected) != set(params) or any(params[k].shape != s for k, s in expected.items()):
        raise ValueError("parameters do not match the model config")
    out, _ = forward(collate([g], [fam], cfg), cfg, params, train=mode == "train", rng=rng)
    return float(out[0, 0]) if cfg.task == "regression" else out[0]


def build_families(graphs: Sequence[Graph], spec: FamilySpec) -> list:
    return [build_family(g, spec) for g in graphs]
