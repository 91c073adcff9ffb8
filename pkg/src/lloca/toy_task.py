"""Synthetic Lorentz-invariant regression task and its training loop.

Events are sets of future-directed four-momenta with one-hot incoming/outgoing
labels. The regression target combines pairwise invariant-mass ratios
s_ij / (s_ij + M^2) in a sum over all pairs plus a product over a fixed pair
subset, so it is exactly Lorentz-invariant but not expressible by a single
pairwise-sum layer. Targets are log-transformed and standardized with training
split statistics before the MSE is taken.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, backward
from .autodiff.optim import Adam
from .errors import DomainError, FormatError
from .frames_net import FramePolicy, ParticleSet
from .minkowski import mink_product

__all__ = [
    "Event", "ToyDataset", "Standardization", "TrainConfig", "TrainResult",
    "generate_event", "generate_dataset", "default_masses", "target_fn",
    "pair_invariant_masses",
    "fit_standardization", "standardize", "destandardize",
    "save_dataset", "load_dataset", "split_indices", "train_loop",
]

DATASET_MAGIC = b"LLCA"
DATASET_VERSION = 1
MIN_ENERGY = 1e-6
DEFAULT_M2 = 1.0
N_PRODUCT_PAIRS = 3


@dataclass
class Event:
    particles: ParticleSet
    target: float


@dataclass
class ToyDataset:
    """Column arrays over events: momenta (n, N, 4), scalars (n, N, S), targets (n,)."""

    momenta: np.ndarray
    scalars: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return self.momenta.shape[0]

    def subset(self, idx) -> "ToyDataset":
        return ToyDataset(self.momenta[idx], self.scalars[idx], self.targets[idx])

    def particle_set(self, idx=slice(None)) -> ParticleSet:
        return ParticleSet(self.momenta[idx], self.scalars[idx])


def _type_scalars(n_particles: int, n_incoming: int) -> np.ndarray:
    scalars = np.zeros((n_particles, 2))
    scalars[:n_incoming, 0] = 1.0
    scalars[n_incoming:, 1] = 1.0
    return scalars


def default_masses(n_particles: int, n_incoming: int = 2) -> np.ndarray:
    """Massive defaults keep all pair momenta strictly timelike, which the
    normalized frame-vector prediction needs (null p_i + p_j has zero norm)."""
    masses = np.full(n_particles, 0.5)
    masses[:n_incoming] = 1.0
    return masses


def generate_event(rng: np.random.Generator, n_particles: int = 6,
                   masses=None, momentum_scale: float = 1.0,
                   n_incoming: int = 2) -> Event:
    """One event: Gaussian spatial momenta on the mass shell, with its target."""
    masses = default_masses(n_particles, n_incoming) if masses is None \
        else np.asarray(masses, dtype=np.float64)
    if np.any(masses < 0):
        raise DomainError("masses must be non-negative")
    spatial = momentum_scale * rng.normal(size=(n_particles, 3))
    energy = np.sqrt((spatial ** 2).sum(-1) + masses ** 2)
    while np.any(energy <= MIN_ENERGY):  # guard the massless zero-momentum corner
        redraw = energy <= MIN_ENERGY
        spatial[redraw] = momentum_scale * rng.normal(size=(int(redraw.sum()), 3))
        energy = np.sqrt((spatial ** 2).sum(-1) + masses ** 2)
    momenta = np.concatenate([energy[:, None], spatial], axis=-1)
    ps = ParticleSet(momenta, _type_scalars(n_particles, n_incoming))
    return Event(ps, float(target_fn(ps)))


def generate_dataset(rng: np.random.Generator, n_events: int, n_particles: int = 6,
                     masses=None, momentum_scale: float = 1.0,
                     n_incoming: int = 2) -> ToyDataset:
    """Vectorized event generation; identical distribution to generate_event."""
    masses = default_masses(n_particles, n_incoming) if masses is None \
        else np.asarray(masses, dtype=np.float64)
    if np.any(masses < 0):
        raise DomainError("masses must be non-negative")
    spatial = momentum_scale * rng.normal(size=(n_events, n_particles, 3))
    energy = np.sqrt((spatial ** 2).sum(-1) + masses ** 2)
    while np.any(energy <= MIN_ENERGY):
        redraw = energy <= MIN_ENERGY
        spatial[redraw] = momentum_scale * rng.normal(size=(int(redraw.sum()), 3))
        energy = np.sqrt((spatial ** 2).sum(-1) + masses ** 2)
    momenta = np.concatenate([energy[..., None], spatial], axis=-1)
    scalars = np.broadcast_to(_type_scalars(n_particles, n_incoming),
                              (n_events, n_particles, 2)).copy()
    targets = target_fn(ParticleSet(momenta, scalars))
    return ToyDataset(momenta, scalars, np.asarray(targets, dtype=np.float64))


def _pair_list(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def pair_invariant_masses(momenta: np.ndarray) -> np.ndarray:
    """s_ij = <p_i + p_j, p_i + p_j> for i < j, shape (..., n_pairs)."""
    n = momenta.shape[-2]
    pairs = _pair_list(n)
    psum = np.stack([momenta[..., i, :] + momenta[..., j, :] for i, j in pairs], axis=-2)
    return mink_product(psum, psum)


def target_fn(ps: ParticleSet, m2: float = DEFAULT_M2) -> np.ndarray:
    """Sum of pair ratios plus the product over the first three pairs."""
    s = pair_invariant_masses(ps.momenta)
    ratios = s / (s + m2)
    n_prod = min(N_PRODUCT_PAIRS, ratios.shape[-1])
    return ratios.sum(axis=-1) + ratios[..., :n_prod].prod(axis=-1)


@dataclass
class Standardization:
    """Mean and standard deviation of the log target over the training split."""

    mean: float
    std: float

    def __post_init__(self):
        if self.std <= 0:
            raise DomainError("standardization std must be positive")


def fit_standardization(targets: np.ndarray) -> Standardization:
    if np.any(targets <= 0):
        raise DomainError("targets must be positive for the log transform")
    logs = np.log(targets)
    return Standardization(float(logs.mean()), float(logs.std()))


def standardize(y, stats: Standardization):
    y = np.asarray(y)
    if np.any(y <= 0):
        raise DomainError("standardize needs positive targets")
    return (np.log(y) - stats.mean) / stats.std


def destandardize(y_std, stats: Standardization):
    return np.exp(np.asarray(y_std) * stats.std + stats.mean)


# ---------------------------------------------------------------------------
# binary dataset files
# ---------------------------------------------------------------------------

def save_dataset(path, data: ToyDataset) -> None:
    n_events = len(data)
    n_particles = data.momenta.shape[1] if n_events else 0
    n_scalars = data.scalars.shape[2] if n_events else 0
    per_event = np.concatenate([
        data.momenta.reshape(n_events, -1),
        data.scalars.reshape(n_events, -1),
        data.targets.reshape(n_events, 1),
    ], axis=1) if n_events else np.zeros((0, 0))
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<IQHH", DATASET_VERSION, n_events, n_particles, n_scalars))
        fh.write(np.ascontiguousarray(per_event, dtype="<f8").tobytes())


def load_dataset(path) -> ToyDataset:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != DATASET_MAGIC:
            raise FormatError(f"bad dataset magic {magic!r}")
        header = fh.read(16)
        if len(header) != 16:
            raise FormatError("truncated dataset header")
        version, n_events, n_particles, n_scalars = struct.unpack("<IQHH", header)
        if version != DATASET_VERSION:
            raise FormatError(f"unsupported dataset version {version}")
        row = 4 * n_particles + n_scalars * n_particles + 1
        payload = fh.read(8 * n_events * row)
        if len(payload) != 8 * n_events * row:
            raise FormatError("truncated dataset payload")
        flat = np.frombuffer(payload, dtype="<f8").reshape(n_events, row) if n_events \
            else np.zeros((0, row))
        momenta = flat[:, : 4 * n_particles].reshape(n_events, n_particles, 4).copy()
        scalars = flat[:, 4 * n_particles: -1].reshape(n_events, n_particles, n_scalars).copy()
        targets = flat[:, -1].copy()
        return ToyDataset(momenta, scalars, targets)


def split_indices(n: int, n_train: int, n_val: int, n_test: int,
                  seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint shuffled index sets; deterministic in the seed."""
    if n_train + n_val + n_test > n:
        raise DomainError(f"split sizes exceed dataset size {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return (perm[:n_train], perm[n_train:n_train + n_val],
            perm[n_train + n_val:n_train + n_val + n_test])


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    iterations: int = 3000
    batch_size: int = 256
    lr: float = 1e-3
    beta1: float = 0.99
    beta2: float = 0.999
    eps: float = 1e-8
    val_interval: int = 150
    plateau_patience: int = 20
    plateau_factor: float = 0.3
    n_train: int = 100_000
    n_val: int = 10_000
    n_test: int = 10_000
    seed: int = 0


@dataclass
class TrainResult:
    history: list[tuple[int, float, float, float]]   # iteration, train, val, lr
    stats: Standardization
    test_mse: float


def _eval_mse(model, data: ToyDataset, y_std: np.ndarray, policy,
              batch_size: int) -> float:
    total, count = 0.0, 0
    for lo in range(0, len(data), batch_size):
        hi = min(lo + batch_size, len(data))
        pred = model.forward(data.particle_set(slice(lo, hi)), policy)
        pred = pred.value if hasattr(pred, "value") else pred
        total += float(((pred - y_std[lo:hi]) ** 2).sum())
        count += hi - lo
    return total / max(count, 1)


def train_loop(data: ToyDataset, model, policy: FramePolicy | None,
               cfg: TrainConfig) -> TrainResult:
    """Minimize the standardized-target MSE; deterministic under cfg.seed."""
    idx_train, idx_val, idx_test = split_indices(
        len(data), cfg.n_train, cfg.n_val, cfg.n_test, cfg.seed)
    train, val, test = data.subset(idx_train), data.subset(idx_val), data.subset(idx_test)

    stats = fit_standardization(train.targets)
    y_train = standardize(train.targets, stats)
    y_val = standardize(val.targets, stats)
    y_test = standardize(test.targets, stats)

    eval_policy = policy.eval_policy() if policy is not None else None
    rng = np.random.default_rng(cfg.seed + 1)
    opt = Adam(model.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)

    history: list[tuple[int, float, float, float]] = []
    order = rng.permutation(len(train))
    cursor = 0
    running, running_n = 0.0, 0
    best_val = np.inf
    since_best = 0

    for it in range(1, cfg.iterations + 1):
        if cursor + cfg.batch_size > len(train):
            order = rng.permutation(len(train))
            cursor = 0
        batch = order[cursor:cursor + cfg.batch_size]
        cursor += cfg.batch_size

        with Tape() as tape:
            loss = model.loss(train.particle_set(batch), y_train[batch], policy, rng=rng)
        backward(tape, loss)
        opt.step()
        opt.zero_grad()
        running += float(loss.value)
        running_n += 1

        if it % cfg.val_interval == 0 or it == cfg.iterations:
            val_mse = _eval_mse(model, val, y_val, eval_policy, cfg.batch_size)
            history.append((it, running / max(running_n, 1), val_mse, opt.lr))
            running, running_n = 0.0, 0
            if val_mse < best_val:
                best_val = val_mse
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.plateau_patience:
                    opt.lr *= cfg.plateau_factor
                    since_best = 0

    test_mse = _eval_mse(model, test, y_test, eval_policy, cfg.batch_size)
    return TrainResult(history, stats, test_mse)
