"""Information-bottleneck loss evaluators and the fixed-rate occupancy codec.

All losses are in nats.  The codec stands in for a learned encoder: it
block-averages an occupancy image down to the largest square grid that fits
the bit budget and sends one majority bit per block.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

BCE_EPS = 1e-7
BITS_PER_CELL = 1
# grid_side u16, bits_per_cell u8, sender_x u16, sender_y u16, timestamp u32
HEADER = struct.Struct("<HBHHI")


@dataclass(frozen=True)
class GaussianLatent:
    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mean, dtype=float).reshape(-1)
        var = np.asarray(self.variance, dtype=float).reshape(-1)
        if mu.shape != var.shape:
            raise InvalidInputError("mean and variance differ in length")
        if np.any(~(var > 0)):
            raise InvalidInputError("variance must be strictly positive")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "variance", var)

    @property
    def z_dim(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class VibLossReport:
    reconstruction: float
    rate: float
    beta: float
    total: float


def gaussian_kl(latent: GaussianLatent) -> float:
    """KL(N(mu, diag(var)) || N(0, I)) in closed form."""
    mu, var = latent.mean, latent.variance
    return max(0.0, 0.5 * float(np.sum(mu**2 + var - 1.0 - np.log(var))))


def kl_monte_carlo(latent: GaussianLatent, samples: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Sample estimate of E_q[log q(z) - log p(z)] and its standard error."""
    if samples < 1000:
        raise InvalidInputError("need at least 1000 samples")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((samples, latent.z_dim))
    sd = np.sqrt(latent.variance)
    z = latent.mean + sd * eps
    # the 2*pi normalisers of q and p cancel
    log_q = np.sum(-np.log(sd) - 0.5 * eps**2, axis=1)
    log_p = np.sum(-0.5 * z**2, axis=1)
    d = log_q - log_p
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(samples))


@dataclass(frozen=True)
class OccupancyImage:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InvalidInputError("occupancy image must be 2-D")
        if np.any(~((v >= 0) & (v <= 1))):
            raise InvalidInputError("occupancy values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def reconstruction_bce(target: OccupancyImage, predicted: OccupancyImage) -> float:
    """Pixel-wise binary cross-entropy summed over the image."""
    if target.shape != predicted.shape:
        raise InvalidInputError(f"shape mismatch {target.shape} vs {predicted.shape}")
    y = target.values
    p = np.clip(predicted.values, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def vib_loss(target: OccupancyImage, predicted: OccupancyImage, latent: GaussianLatent, beta: float) -> VibLossReport:
    if not beta > 0:
        raise InvalidInputError("beta must be positive")
    rec = reconstruction_bce(target, predicted)
    rate = gaussian_kl(latent)
    return VibLossReport(rec, rate, beta, rec + beta * rate)


@dataclass(frozen=True)
class Message:
    payload: tuple[int, ...]  # row-major bits
    grid_side: int
    bits_per_cell: int = BITS_PER_CELL
    sender_position: tuple[int, int] = (0, 0)  # (x, y) = (column, row)
    timestamp: int = 0

    def __post_init__(self):
        if len(self.payload) != self.grid_side**2 * self.bits_per_cell:
            raise InvalidInputError("payload length does not match grid_side and bits_per_cell")

    @property
    def n_bits(self) -> int:
        return len(self.payload)

    def to_bytes(self) -> bytes:
        x, y = self.sender_position
        head = HEADER.pack(self.grid_side, self.bits_per_cell, x, y, self.timestamp)
        return head + np.packbits(np.asarray(self.payload, dtype=np.uint8)).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Message":
        side, bpc, x, y, ts = HEADER.unpack_from(data)
        n = side * side * bpc
        bits = np.unpackbits(np.frombuffer(data[HEADER.size:], dtype=np.uint8))[:n]
        if len(bits) < n:
            raise InvalidInputError("truncated message payload")
        return cls(tuple(int(b) for b in bits), side, bpc, (x, y), ts)

    def header(self) -> dict:
        return {
            "grid_side": self.grid_side,
            "bits_per_cell": self.bits_per_cell,
            "sender_x": self.sender_position[0],
            "sender_y": self.sender_position[1],
            "timestamp": self.timestamp,
            "bits": self.n_bits,
        }


def codec_grid_side(budget_bits: int, image_side: int | None = None) -> int:
    """Largest k with k*k*BITS_PER_CELL <= budget, capped at the image side."""
    if budget_bits < 1:
        raise InvalidInputError("bit budget must be at least 1")
    k = math.isqrt(budget_bits // BITS_PER_CELL)
    return min(k, image_side) if image_side else k


def _block_edges(n: int, k: int) -> np.ndarray:
    return (np.arange(k + 1) * n) // k


def _block_index(n: int, k: int) -> np.ndarray:
    """Block id of every pixel along an axis of length n split into k blocks."""
    edges = _block_edges(n, k)
    return np.searchsorted(edges, np.arange(n), side="right") - 1


def encode_map(belief: OccupancyImage, budget_bits: int, sender_position=(0, 0), timestamp: int = 0) -> Message:
    """Downsample to k x k blocks and send 1 where a block is mostly occupied."""
    h, w = belief.shape
    if h != w:
        raise InvalidInputError("codec expects a square image")
    k = codec_grid_side(budget_bits, h)
    idx = _block_index(h, k)
    sums = np.zeros((k, k))
    counts = np.zeros((k, k))
    np.add.at(sums, (idx[:, None], idx[None, :]), belief.values)
    np.add.at(counts, (idx[:, None], idx[None, :]), 1.0)
    bits = (sums / counts > 0.5).astype(np.uint8)
    return Message(tuple(int(b) for b in bits.ravel()), k, BITS_PER_CELL, tuple(int(c) for c in sender_position), int(timestamp))


def decode_map(msg: Message, target_side: int) -> OccupancyImage:
    """Nearest-neighbour upsample of the payload grid."""
    k = msg.grid_side
    bits = np.asarray(msg.payload, dtype=float).reshape(k, k)
    if target_side == k:
        return OccupancyImage(bits.copy())
    idx = np.minimum(_block_index(target_side, k), k - 1) if target_side >= k else (np.arange(target_side) * k) // target_side
    return OccupancyImage(bits[np.ix_(idx, idx)])
