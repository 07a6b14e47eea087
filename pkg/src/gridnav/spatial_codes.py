"""Place/head-direction ensembles, analytic grid codes and path-loss evaluators."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .geometry import FrequencyVector, Pose

# Frame weights fall back to 1.0 from this step onwards.
RAMP_STEPS = 5


@dataclass(frozen=True)
class PlaceCellEnsemble:
    centers: np.ndarray  # (N, 2) metres
    widths: np.ndarray  # (N,) metres

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        w = np.asarray(self.widths, dtype=float).reshape(-1)
        if len(c) == 0:
            raise InvalidInputError("place-cell ensemble is empty")
        if len(c) != len(w):
            raise InvalidInputError("centers and widths differ in length")
        if np.any(w <= 0):
            raise InvalidInputError("place-cell widths must be positive")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)

    def __len__(self):
        return len(self.widths)


@dataclass(frozen=True)
class HeadDirectionEnsemble:
    preferred: np.ndarray  # (M,) radians
    concentration: np.ndarray  # (M,) kappa >= 0

    def __post_init__(self):
        p = np.asarray(self.preferred, dtype=float).reshape(-1)
        k = np.asarray(self.concentration, dtype=float).reshape(-1)
        if len(p) == 0:
            raise InvalidInputError("head-direction ensemble is empty")
        if len(p) != len(k):
            raise InvalidInputError("preferred and concentration differ in length")
        if np.any(k < 0):
            raise InvalidInputError("concentrations must be non-negative")
        object.__setattr__(self, "preferred", p)
        object.__setattr__(self, "concentration", k)

    def __len__(self):
        return len(self.preferred)


def default_place_cells(n_per_side: int = 16, side: float = 15.0, sigma: float = 0.5) -> PlaceCellEnsemble:
    """Uniform grid of place-cell centres covering a ``side`` x ``side`` arena."""
    step = side / n_per_side
    ticks = (np.arange(n_per_side) + 0.5) * step
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    centers = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return PlaceCellEnsemble(centers, np.full(len(centers), sigma))


def default_hd_cells(m: int = 32, kappa: float = 4.0) -> HeadDirectionEnsemble:
    return HeadDirectionEnsemble(np.arange(m) * (2 * math.pi / m), np.full(m, kappa))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max())
    return z / z.sum()


def place_log_potentials(e: PlaceCellEnsemble, r: Sequence[float]) -> np.ndarray:
    d2 = np.sum((e.centers - np.asarray(r, dtype=float)) ** 2, axis=1)
    return -d2 / (2.0 * e.widths**2)


def hd_log_potentials(e: HeadDirectionEnsemble, theta: float) -> np.ndarray:
    return e.concentration * np.cos(theta - e.preferred)


def place_activations(e: PlaceCellEnsemble, r: Sequence[float]) -> np.ndarray:
    """Gaussian tuning normalised over the place-cell ensemble."""
    return _softmax(place_log_potentials(e, r))


def hd_activations(e: HeadDirectionEnsemble, theta: float) -> np.ndarray:
    """von Mises tuning normalised over the head-direction ensemble."""
    return _softmax(hd_log_potentials(e, theta))


def pose_cell_distribution(place: PlaceCellEnsemble, hd: HeadDirectionEnsemble, p: Pose) -> np.ndarray:
    """Joint softmax over all N + M cells; place cells come first."""
    logits = np.concatenate([place_log_potentials(place, p.position), hd_log_potentials(hd, p.heading)])
    return _softmax(logits)


@dataclass(frozen=True)
class GridCode:
    components: tuple[FrequencyVector, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidInputError("grid code needs at least one component")
        q0 = comps[0].magnitude
        if any(abs(c.magnitude - q0) > 1e-12 for c in comps):
            raise InvalidInputError("grid-code components must share one magnitude")
        object.__setattr__(self, "components", comps)

    @property
    def count(self) -> int:
        return len(self.components)

    @property
    def magnitude(self) -> float:
        return self.components[0].magnitude

    @property
    def period(self) -> float:
        """Stripe period 2*pi/q in metres."""
        return 2 * math.pi / self.magnitude

    def directions(self) -> np.ndarray:
        return np.array([c.direction for c in self.components])

    def vectors(self) -> np.ndarray:
        return np.array([c.vector for c in self.components])


def make_hex_code(magnitude: float, base_angle: float = 0.0) -> GridCode:
    """Three equal-magnitude directions 120 degrees apart."""
    if not magnitude > 0:
        raise InvalidInputError(f"magnitude must be positive, got {magnitude}")
    return GridCode(tuple(FrequencyVector.from_angle(base_angle + k * 2 * math.pi / 3, magnitude) for k in range(3)))


def make_square_code(magnitude: float, base_angle: float = 0.0) -> GridCode:
    """Two orthogonal directions; the four-fold counterpart used as a control."""
    if not magnitude > 0:
        raise InvalidInputError(f"magnitude must be positive, got {magnitude}")
    return GridCode(tuple(FrequencyVector.from_angle(base_angle + k * math.pi / 2, magnitude) for k in range(2)))


@dataclass(frozen=True)
class IsotropyReport:
    first_order_residual: float
    second_order_residual: float
    lam: float

    @property
    def isotropic(self) -> bool:
        return self.first_order_residual <= 1e-12 and self.second_order_residual <= 1e-12


def isotropy_check(code: GridCode) -> IsotropyReport:
    """Max-norm deviations from sum(u) = 0 and sum(u u^T) = (K/2) I."""
    u = code.directions()
    lam = code.count / 2.0
    first = float(np.max(np.abs(u.sum(axis=0))))
    second = float(np.max(np.abs(u.T @ u - lam * np.eye(2))))
    return IsotropyReport(first, second, lam)


def hex_activity(code: GridCode, r) -> np.ndarray | float:
    """Summed cosine activity sum_j cos(q_j . r).  ``r`` may be (..., 2)."""
    r = np.asarray(r, dtype=float)
    out = np.cos(r @ code.vectors().T).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TemporalWeightSchedule:
    w_init: float = 5.0
    decay: float = 0.8
    horizon: int = 20

    def __post_init__(self):
        if not self.w_init > 0:
            raise InvalidInputError("w_init must be positive")
        if not 0 < self.decay < 1:
            raise InvalidInputError("decay must lie in (0, 1)")
        if self.horizon < 1:
            raise InvalidInputError("horizon must be >= 1")


def temporal_weights(s: TemporalWeightSchedule) -> np.ndarray:
    w = np.ones(s.horizon)
    w[0] = 2.0 * s.w_init
    for t in range(1, min(RAMP_STEPS, s.horizon)):
        w[t] = s.w_init * s.decay ** (t - 1)
    return w


def categorical_kl(p, q) -> float:
    """KL(p || q) in nats for two probability vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise InvalidInputError("p and q must be 1-D vectors of equal length")
    if np.any(p < 0) or np.any(q < 0):
        raise InvalidInputError("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > 1e-9 or abs(q.sum() - 1.0) > 1e-9:
        raise InvalidInputError("p and q must each sum to 1")
    support = p > 0
    if np.any(q[support] <= 0):
        raise InvalidInputError("q must be positive wherever p is positive")
    ps, qs = p[support], q[support]
    return max(0.0, float(np.sum(ps * (np.log(ps) - np.log(qs)))))
