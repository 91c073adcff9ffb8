"""Equivariant prediction of per-particle frame vectors and frame policies.

For every particle three four-vectors are predicted as softmax-weighted sums
of pair momenta p_i + p_j, with weights produced by an MLP on permutation- and
Lorentz-invariant pair features (s_i, s_j, <p_i, p_j>). Linear combinations of
four-vectors with invariant coefficients transform like four-vectors, so the
construction is exactly equivariant for any network weights; the softmax keeps
the coefficients positive, which keeps the predicted vectors timelike.

A :class:`FramePolicy` decides how those vectors (or nothing at all) turn into
per-particle frames: learned local frames, the identity (a plain
non-equivariant model), one random global frame per sample (data
augmentation), one learned global frame, or a learned network frozen at
initialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import ops
from .errors import ConfigError, DomainError
from .frames import frame_gs4, frame_pd, frame_so3
from .minkowski import mink_product, random_boost, random_rotation
from .nn import MLP, ParamStore

__all__ = [
    "ParticleSet", "FramesNet", "AugmentConfig", "FramePolicy",
    "predict_vectors", "predict_frames", "append_reference_particles",
    "DEFAULT_REFERENCE_PARTICLES",
]

# Time direction plus beam direction and its counterpart.
DEFAULT_REFERENCE_PARTICLES = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 1.0],
    [1.0, 0.0, 0.0, -1.0],
])

MASS_SHELL_TOL = 1e-10


@dataclass
class ParticleSet:
    """N four-momenta with per-particle scalar attributes; batchable.

    ``momenta`` has shape (..., N, 4) and ``scalars`` (..., N, S) with matching
    leading axes.
    """

    momenta: np.ndarray
    scalars: np.ndarray

    def __post_init__(self):
        self.momenta = np.asarray(self.momenta, dtype=np.float64)
        self.scalars = np.asarray(self.scalars, dtype=np.float64)
        if self.momenta.shape[-1] != 4:
            raise DomainError("momenta must have a trailing axis of length 4")
        if self.momenta.shape[:-1] != self.scalars.shape[:-1]:
            raise DomainError(
                f"momenta {self.momenta.shape} and scalars {self.scalars.shape} disagree"
            )

    @property
    def n_particles(self) -> int:
        return self.momenta.shape[-2]

    @property
    def n_scalars(self) -> int:
        return self.scalars.shape[-1]

    def validate_for_learned(self, min_particles: int = 3) -> None:
        """Preconditions of the learned frame prediction."""
        if self.n_particles < min_particles:
            raise DomainError(f"learned frames need at least {min_particles} particles")
        if np.any(self.momenta[..., 0] <= 0.0):
            raise DomainError("learned frames need positive energies")
        mass2 = mink_product(self.momenta, self.momenta)
        scale = np.maximum(self.momenta[..., 0] ** 2, 1.0)
        if np.any(mass2 < -MASS_SHELL_TOL * scale):
            raise DomainError("learned frames need non-negative mass squares")

    def transformed(self, lam: np.ndarray) -> "ParticleSet":
        """Apply a Lorentz transformation to all momenta (scalars untouched)."""
        rotated = np.einsum("...ij,...nj->...ni", lam, self.momenta)
        return ParticleSet(rotated, self.scalars)


class FramesNet:
    """The pair-weight network: three logit channels per ordered pair.

    The inner-product feature is asinh-compressed before entering the MLP and
    the output layer starts small; both keep the sender softmax far from
    one-hot saturation at initialization, where collapsing channels would make
    the predicted vectors collinear and the frame construction degenerate.
    """

    def __init__(self, store: ParamStore, n_scalars: int, hidden: int = 128,
                 name: str = "frames_net"):
        self.n_scalars = n_scalars
        self.mlp = MLP(store, name, [2 * n_scalars + 1, hidden, hidden, 3],
                       final_gain=0.1)

    def __call__(self, pair_features, detached: bool = False):
        return self.mlp(pair_features, detached=detached)


@dataclass(frozen=True)
class AugmentConfig:
    """Distribution of global frames drawn in augmentation mode."""

    boost_sigma: float = 0.1
    boost_clip: float = 3.0
    rotations: bool = True

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        boost = random_boost(rng, self.boost_sigma, self.boost_clip)
        if not self.rotations:
            return boost
        return random_rotation(rng) @ boost


_POLICY_NAMES = {
    "learned-pd": ("learned", "pd"),
    "learned-gs4": ("learned", "gs4"),
    "learned-so3": ("learned", "so3"),
    "identity": ("identity", "pd"),
    "augment": ("augment", "pd"),
    "global": ("global", "pd"),
    "fixed": ("fixed", "pd"),
}


@dataclass(frozen=True)
class FramePolicy:
    """How per-particle frames are produced; determines equivariance guarantees."""

    kind: str = "learned"          # learned | identity | augment | global | fixed
    constructor: str = "pd"        # pd | gs4 | so3
    modified: bool = True          # use the normalized vector prediction
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        if self.kind not in {"learned", "identity", "augment", "global", "fixed"}:
            raise ConfigError(f"unknown frame policy kind {self.kind!r}")
        if self.constructor not in {"pd", "gs4", "so3"}:
            raise ConfigError(f"unknown frame constructor {self.constructor!r}")

    @classmethod
    def parse(cls, text: str, **kwargs) -> "FramePolicy":
        if text not in _POLICY_NAMES:
            raise ConfigError(f"unknown frame policy {text!r}")
        kind, constructor = _POLICY_NAMES[text]
        return cls(kind=kind, constructor=constructor, **kwargs)

    @property
    def needs_network(self) -> bool:
        return self.kind in {"learned", "global", "fixed"}

    def eval_policy(self) -> "FramePolicy":
        """Policy used at evaluation time; augmentation is train-time only."""
        if self.kind == "augment":
            return replace(self, kind="identity")
        return self


def _pair_weighted_vectors(recv_momenta, recv_scalars, send_momenta, send_scalars,
                           net: FramesNet, modified: bool, detached: bool,
                           return_weights: bool):
    """Softmax-weighted pair sums for every (receiver, channel)."""
    ip = mink_product(recv_momenta[..., :, None, :], send_momenta[..., None, :, :])
    feats = np.concatenate([
        np.broadcast_to(recv_scalars[..., :, None, :], (*ip.shape, recv_scalars.shape[-1])),
        np.broadcast_to(send_scalars[..., None, :, :], (*ip.shape, send_scalars.shape[-1])),
        np.arcsinh(ip)[..., None],
    ], axis=-1)
    logits = net(feats, detached=detached)              # (..., Nr, Ns, 3)
    weights = ops.softmax(logits, axis=-2)              # normalize over senders j

    psum = recv_momenta[..., :, None, :] + send_momenta[..., None, :, :]
    if modified:
        norm = np.sqrt(np.abs(mink_product(psum, psum)))
        psum = psum / (norm[..., None] + 1e-15)

    # (..., Nr, Ns, 3, 1) * (..., Nr, Ns, 1, 4), summed over senders
    prod = ops.mul(ops.expand_dims(weights, -1), np.expand_dims(psum, -2))
    vectors = ops.sum(prod, axis=-3)                    # (..., Nr, 3, 4)

    if modified:
        norm2 = ops.absolute(mink_product(vectors, vectors))   # (..., Nr, 3)
        total = ops.sum(norm2, axis=-2, keepdims=True)         # (..., 1, 3)
        vectors = ops.div(vectors, ops.expand_dims(ops.sqrt(total), -1))

    if return_weights:
        return vectors, weights
    return vectors


def predict_vectors(ps: ParticleSet, net: FramesNet, modified: bool = True,
                    detached: bool = False, return_weights: bool = False):
    """Three four-vectors per particle, shaped (..., N, 3, 4).

    The basic form sums softmax-weighted pair momenta; the modified form
    additionally normalizes each pair momentum by its Minkowski norm and
    rescales every channel by the root-mean-square norm over the set.
    Works for any N >= 1; building frames from the result needs N >= 3.
    """
    ps.validate_for_learned(min_particles=1)
    return _pair_weighted_vectors(
        ps.momenta, ps.scalars, ps.momenta, ps.scalars,
        net, modified, detached, return_weights,
    )


def append_reference_particles(ps: ParticleSet, refs=None) -> ParticleSet:
    """Extend the set with fixed reference momenta for symmetry breaking.

    Reference particles get a dedicated one-hot flag column (originals 0,
    references 1) and zeros in the original scalar columns. With no
    references the set is returned unchanged.
    """
    refs = DEFAULT_REFERENCE_PARTICLES if refs is None else np.asarray(refs, dtype=np.float64)
    if refs.shape[0] == 0:
        return ps
    batch = ps.momenta.shape[:-2]
    ref_momenta = np.broadcast_to(refs, (*batch, *refs.shape))
    momenta = np.concatenate([ps.momenta, ref_momenta], axis=-2)
    flags = np.zeros((*batch, ps.n_particles, 1))
    scalars = np.concatenate([ps.scalars, flags], axis=-1)
    ref_scalars = np.zeros((*batch, refs.shape[0], ps.n_scalars + 1))
    ref_scalars[..., -1] = 1.0
    return ParticleSet(momenta, np.concatenate([scalars, ref_scalars], axis=-2))


_CONSTRUCTORS = {
    "pd": lambda v: frame_pd(v[..., 0, :], v[..., 1, :], v[..., 2, :]),
    "gs4": lambda v: frame_gs4(v[..., 0, :], v[..., 1, :], v[..., 2, :]),
    "so3": lambda v: frame_so3(v[..., 1, :], v[..., 2, :]),
}


def _identity_frames(batch, n: int) -> np.ndarray:
    return np.broadcast_to(np.eye(4), (*batch, n, 4, 4))


def predict_frames(ps: ParticleSet, net: FramesNet | None, policy: FramePolicy,
                   rng: np.random.Generator | None = None,
                   reference_particles=None):
    """Per-particle frames, shaped (..., N, 4, 4), according to the policy.

    ``reference_particles`` (an array of four-vectors, or None) extends the
    set fed to the vector prediction; the returned frames always cover the
    original N particles only.
    """
    batch = ps.momenta.shape[:-2]
    n = ps.n_particles

    if policy.kind == "identity":
        return _identity_frames(batch, n)

    if policy.kind == "augment":
        if rng is None:
            raise DomainError("augment policy needs a random generator")
        if batch == ():
            lam = policy.augment.sample(rng)
        else:
            flat = [policy.augment.sample(rng) for _ in range(int(np.prod(batch)))]
            lam = np.stack(flat).reshape(*batch, 4, 4)
        return np.broadcast_to(np.expand_dims(lam, -3), (*batch, n, 4, 4))

    if net is None:
        raise DomainError(f"policy {policy.kind!r} needs a frames network")
    detached = policy.kind == "fixed"

    extended = ps if reference_particles is None else append_reference_particles(
        ps, reference_particles)

    if policy.kind == "global":
        extended.validate_for_learned()
        token_momenta = extended.momenta.sum(axis=-2, keepdims=True)
        token_scalars = extended.scalars.mean(axis=-2, keepdims=True)
        vectors = _pair_weighted_vectors(
            token_momenta, token_scalars, extended.momenta, extended.scalars,
            net, policy.modified, detached, return_weights=False,
        )
        frame = _CONSTRUCTORS[policy.constructor](vectors)       # (..., 1, 4, 4)
        return ops.broadcast_to(frame, (*batch, n, 4, 4))

    extended.validate_for_learned()
    vectors = predict_vectors(extended, net, modified=policy.modified,
                              detached=detached)
    frames = _CONSTRUCTORS[policy.constructor](vectors)
    if extended.n_particles != n:
        frames = frames[..., :n, :, :]
    return frames
