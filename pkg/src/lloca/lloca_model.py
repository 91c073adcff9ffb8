"""Canonicalization pipeline and the frame-aware transformer backbone.

Features expressed in per-particle frames are invariant under global Lorentz
transformations, so any backbone can process them. Geometry enters in exactly
three places: transforming features into frames (:func:`canonicalize`),
transporting messages between frames (:func:`frame_transport`, attention),
and transforming outputs back out (:func:`decanonicalize`).

Attention evaluates the frame-to-frame products in the global frame: queries,
keys and values are pulled out of their local frames once, the pairwise
bilinear form reduces to a plain dot product there, and only the attention
output is pushed back. With ``frames=None`` every geometric step is skipped
and the model is a standard transformer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ops
from .errors import ConfigError, DimensionError, DomainError
from .frames_net import FramePolicy, FramesNet, ParticleSet, predict_frames
from .minkowski import lorentz_inverse
from .nn import MLP, LayerNorm, Linear, ParamStore
from .tensor_rep import RepSpec, apply_rep, rep_matrix, rep_metric

__all__ = [
    "ModelConfig", "canonicalize", "decanonicalize", "frame_transport",
    "tensorial_message_layer", "mink_attention", "LLoCaTransformer", "mse_loss",
]


@dataclass
class ModelConfig:
    hidden_dim: int = 128
    num_heads: int = 8
    num_blocks: int = 8
    head_spec: RepSpec = field(default_factory=lambda: RepSpec.parse("8x0+2x1"))
    attention_metric: str = "minkowski"     # minkowski | euclidean
    readout: str = "invariant-scalar"       # invariant-scalar | equivariant-vector
    mlp_ratio: int = 4
    n_scalars: int = 2
    frames_hidden: int = 128
    reference_particles: bool = False

    def validate(self) -> None:
        if self.hidden_dim % self.num_heads:
            raise ConfigError("hidden_dim must be divisible by num_heads")
        if self.head_spec.dimension != self.hidden_dim // self.num_heads:
            raise ConfigError(
                f"head spec dimension {self.head_spec.dimension} != "
                f"hidden_dim/num_heads = {self.hidden_dim // self.num_heads}"
            )
        if self.attention_metric not in {"minkowski", "euclidean"}:
            raise ConfigError(f"unknown attention metric {self.attention_metric!r}")
        if self.readout not in {"invariant-scalar", "equivariant-vector"}:
            raise ConfigError(f"unknown readout {self.readout!r}")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads

    @property
    def layer_spec(self) -> RepSpec:
        return RepSpec(self.head_spec.blocks * self.num_heads)


def canonicalize(features, frames, spec: RepSpec):
    """Express per-particle features in their local frames: rho(L_i) f_i."""
    return apply_rep(frames, features, spec)


def decanonicalize(features, frames, spec: RepSpec):
    """Back to the global frame: rho(L_i^{-1}) f_i."""
    return apply_rep(lorentz_inverse(frames), features, spec)


def frame_transport(frames_to, frames_from, spec: RepSpec):
    """Representation matrix of L_i L_j^{-1}, moving features between frames."""
    return rep_matrix(ops.matmul(frames_to, lorentz_inverse(frames_from)), spec)


def tensorial_message_layer(features, frames, phi, psi, spec: RepSpec,
                            aggregation: str = "sum"):
    """Fully connected message passing with frame-to-frame transported messages.

    ``phi`` maps sender features to messages (same spec), the messages are
    transported into each receiver frame, summed over senders, and ``psi``
    fuses the aggregate with the receiver features. Feature shape (..., N, D).
    """
    if aggregation != "sum":
        raise ConfigError(f"unsupported aggregation {aggregation!r}")
    dim = spec.dimension
    if ops.value_of(features).shape[-1] != dim:
        raise DimensionError("features do not match the message spec")
    n = ops.value_of(features).shape[-2]

    messages = phi(features)                                       # (..., N, D)
    sent = ops.expand_dims(messages, -3)                           # (..., 1, Nj, D)
    if spec.is_scalar_only:
        transported = sent
    else:
        recv = ops.expand_dims(frames, -3)                         # (..., Ni, 1, 4, 4)
        send = ops.expand_dims(lorentz_inverse(frames), -4)        # (..., 1, Nj, 4, 4)
        pair = ops.matmul(recv, send)                              # (..., Ni, Nj, 4, 4)
        batch = ops.value_of(features).shape[:-2]
        sent = ops.broadcast_to(sent, (*batch, n, n, dim))
        transported = apply_rep(pair, sent, spec)
    aggregated = ops.sum(transported, axis=-2)                     # (..., Ni, D)
    return psi(ops.concat([features, aggregated], axis=-1))


def _split_heads(x, num_heads: int):
    shape = ops.value_of(x).shape
    return ops.reshape(x, (*shape[:-1], num_heads, shape[-1] // num_heads))


def _merge_heads(x):
    shape = ops.value_of(x).shape
    return ops.reshape(x, (*shape[:-2], shape[-2] * shape[-1]))


def mink_attention(q, k, v, frames, spec: RepSpec, metric: str = "minkowski"):
    """Scaled dot-product attention with frame-transported tensorial heads.

    Inputs are per-head local features shaped (..., N, heads, d) with
    d = spec.dimension; ``frames`` is (..., N, 4, 4) or None for the plain
    backbone. The pair bilinear form <q_i, rho(L_i L_j^-1) k_j> is evaluated
    by moving q, k, v to the global frame, where it factorizes into a single
    dot product; values come back through rho(L_i).
    """
    d = ops.value_of(q).shape[-1]
    if d != spec.dimension:
        raise DimensionError(f"head dim {d} != spec dimension {spec.dimension}")
    signs = np.diag(rep_metric(spec))

    # Conjugating the query by the spec metric turns the global-frame dot
    # product into the local euclidean pairing; without it, it is the
    # Minkowski pairing.
    q_pre = ops.mul(q, signs) if metric == "euclidean" else q
    if frames is not None:
        inv = lorentz_inverse(frames)
        q_glob = apply_rep(inv, q_pre, spec)
        k_glob = apply_rep(inv, k, spec)
        v_glob = apply_rep(inv, v, spec)
    else:
        q_glob, k_glob, v_glob = q_pre, k, v
    q_eff = ops.mul(q_glob, signs)

    # (..., N, H, d) -> (..., H, N, d)
    q_h = ops.swapaxes(q_eff, -3, -2)
    k_h = ops.swapaxes(k_glob, -3, -2)
    v_h = ops.swapaxes(v_glob, -3, -2)
    logits = ops.div(ops.matmul(q_h, ops.swapaxes(k_h, -1, -2)), np.sqrt(d))
    attn = ops.softmax(logits, axis=-1)                  # over senders
    out = ops.swapaxes(ops.matmul(attn, v_h), -3, -2)    # (..., N, H, d)

    if frames is not None:
        out = apply_rep(frames, out, spec)
    return out


def mse_loss(pred, target):
    diff = ops.sub(pred, target)
    return ops.mean(ops.mul(diff, diff))


class LLoCaTransformer:
    """Pre-norm transformer over particles with frame-aware attention heads.

    The same parameter set serves every frame policy; with ``policy=None`` the
    forward pass touches no geometry at all and is the plain backbone.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.store = ParamStore(np.random.default_rng(seed))
        h = config.hidden_dim

        frames_scalars = config.n_scalars + (1 if config.reference_particles else 0)
        self.frames_net = FramesNet(self.store, frames_scalars, config.frames_hidden)

        self.embed = Linear(self.store, "embed", 4 + config.n_scalars, h)
        self.blocks = []
        for b in range(config.num_blocks):
            prefix = f"block{b}"
            self.blocks.append({
                "ln1": LayerNorm(self.store, f"{prefix}.ln1", h),
                "wq": Linear(self.store, f"{prefix}.wq", h, h),
                "wk": Linear(self.store, f"{prefix}.wk", h, h),
                "wv": Linear(self.store, f"{prefix}.wv", h, h),
                "wo": Linear(self.store, f"{prefix}.wo", h, h),
                "ln2": LayerNorm(self.store, f"{prefix}.ln2", h),
                "mlp": MLP(self.store, f"{prefix}.mlp", [h, config.mlp_ratio * h, h]),
            })
        n_scalar_channels = int(config.layer_spec.scalar_mask().sum())
        if config.readout == "invariant-scalar" and n_scalar_channels == 0:
            raise ConfigError("invariant-scalar readout needs scalar channels")
        self._n_scalar_channels = n_scalar_channels
        self.head = MLP(self.store, "head", [n_scalar_channels, h, 1])

    @property
    def params(self):
        return self.store.params

    def frames_for(self, ps: ParticleSet, policy: FramePolicy | None,
                   rng: np.random.Generator | None = None):
        if policy is None:
            return None
        refs = None
        if self.config.reference_particles and policy.needs_network:
            from .frames_net import DEFAULT_REFERENCE_PARTICLES
            refs = DEFAULT_REFERENCE_PARTICLES
        return predict_frames(ps, self.frames_net, policy, rng=rng,
                              reference_particles=refs)

    def forward(self, ps: ParticleSet, policy: FramePolicy | None,
                rng: np.random.Generator | None = None):
        """Prediction for a batch: shape (...,) scalar or (..., N, 4) vector."""
        cfg = self.config
        frames = self.frames_for(ps, policy, rng)

        if frames is None:
            p_local = ps.momenta
        else:
            p_local = ops.reshape(
                ops.matmul(frames, np.expand_dims(ps.momenta, -1)),
                ps.momenta.shape,
            )
        x = self.embed(ops.concat([p_local, ps.scalars], axis=-1))

        for block in self.blocks:
            normed = block["ln1"](x)
            q = _split_heads(block["wq"](normed), cfg.num_heads)
            k = _split_heads(block["wk"](normed), cfg.num_heads)
            v = _split_heads(block["wv"](normed), cfg.num_heads)
            attn = mink_attention(q, k, v, frames, cfg.head_spec,
                                  metric=cfg.attention_metric)
            x = ops.add(x, block["wo"](_merge_heads(attn)))
            x = ops.add(x, block["mlp"](block["ln2"](x)))

        if cfg.readout == "invariant-scalar":
            per_head = _split_heads(x, cfg.num_heads)
            scalars = per_head[..., self.config.head_spec.scalar_mask()]
            pooled = ops.mean(_merge_heads(scalars), axis=-2)   # over particles
            out = self.head(pooled)
            return ops.reshape(out, ops.value_of(out).shape[:-1])

        # equivariant-vector readout: first vector block of head 0
        per_head = _split_heads(x, cfg.num_heads)
        vec_slice = None
        for order, _, sl in cfg.head_spec.block_slices():
            if order == 1:
                vec_slice = slice(sl.start, sl.start + 4)
                break
        if vec_slice is None:
            raise ConfigError("equivariant-vector readout needs a vector block")
        local_vec = per_head[..., 0, vec_slice]                 # (..., N, 4)
        if frames is None:
            return local_vec
        return ops.reshape(
            ops.matmul(lorentz_inverse(frames), ops.expand_dims(local_vec, -1)),
            ops.value_of(local_vec).shape,
        )

    def loss(self, ps: ParticleSet, targets, policy: FramePolicy | None,
             rng: np.random.Generator | None = None):
        if self.config.readout != "invariant-scalar":
            raise DomainError("training targets a scalar readout")
        return mse_loss(self.forward(ps, policy, rng), targets)
