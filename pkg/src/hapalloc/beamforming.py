"""Zero-forcing beamformer construction and the surrogate rate model.

With W = V (V^H V)^-1 the steering directions are exactly decoupled
(V^H W = I), so each user's surrogate rate depends only on its own power
coefficient: R_k = B_w log2(1 + gamma_k p_k^2 / N_0).  Rates are bps
throughout; convert to Mbps only at the presentation layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONDITION_LIMIT = 1e8


class ConditioningError(ValueError):
    """Steering matrix too ill-conditioned for zero forcing."""

    def __init__(self, condition: float):
        self.condition = float(condition)
        super().__init__(
            f"steering Gram matrix condition number {self.condition:.3e} exceeds "
            f"{CONDITION_LIMIT:.0e}; user directions are (nearly) collinear"
        )


@dataclass(frozen=True)
class ZfBeamformer:
    """Zero-forcing beam columns with their squared norms."""

    w_columns: np.ndarray  # (N_t, K) complex
    w_norms_sq: np.ndarray  # (K,) real
    gram_condition: float

    @property
    def n_users(self) -> int:
        return self.w_columns.shape[1]


@dataclass(frozen=True)
class RateModel:
    """Bandwidth, noise power, and per-user mean channel powers."""

    bw_hz: float
    n0_w: float
    gammas: np.ndarray

    def __post_init__(self):
        if self.bw_hz <= 0 or self.n0_w <= 0:
            raise ValueError("bandwidth and noise power must be positive")
        if np.any(np.asarray(self.gammas) <= 0):
            raise ValueError("mean channel powers must be positive")


def zf_beamformer(steering) -> ZfBeamformer:
    """Build W = V (V^H V)^-1 from a list of steering vectors.

    The Gram system is solved (not explicitly inverted).  Raises
    ConditioningError when the Gram condition number exceeds 1e8, which
    covers rank deficiency and near-collinear user clusters.
    """
    v = np.column_stack([np.asarray(s, dtype=complex) for s in steering])
    n_t, k = v.shape
    if k > n_t:
        raise ValueError(f"cannot zero-force {k} users with {n_t} antennas")
    gram = v.conj().T @ v
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise ConditioningError(cond)
    w = v @ np.linalg.solve(gram, np.eye(k, dtype=complex))
    norms_sq = np.real(np.einsum("ij,ij->j", w.conj(), w))
    return ZfBeamformer(w_columns=w, w_norms_sq=norms_sq, gram_condition=cond)


def surrogate_rate(p: float, gamma: float, model: RateModel) -> float:
    """Deterministic rate bound B_w log2(1 + gamma p^2 / N_0), in bps."""
    if p < 0:
        raise ValueError("power coefficient must be >= 0")
    return model.bw_hz * np.log2(1.0 + gamma * p * p / model.n0_w)


def surrogate_rates(p, model: RateModel) -> np.ndarray:
    """Vectorized surrogate rate over all users."""
    p = np.asarray(p, dtype=float)
    return model.bw_hz * np.log2(1.0 + model.gammas * p * p / model.n0_w)


def min_power_coefficient(qos_bps: float, gamma: float, model: RateModel) -> float:
    """Smallest coefficient meeting a QoS rate: sqrt(N_0 (2^(r/B) - 1) / gamma)."""
    if qos_bps < 0:
        raise ValueError("QoS rate must be >= 0")
    return float(np.sqrt(model.n0_w * (2.0 ** (qos_bps / model.bw_hz) - 1.0) / gamma))


def min_power_coefficients(qos_bps, model: RateModel) -> np.ndarray:
    q = np.asarray(qos_bps, dtype=float)
    return np.sqrt(model.n0_w * (2.0**(q / model.bw_hz) - 1.0) / model.gammas)


def energy_efficiency(rates_bps, p_com_w: float) -> float:
    """Sum rate over total communication power, bps/W."""
    if p_com_w <= 0:
        raise ValueError("communication power must be positive")
    return float(np.sum(rates_bps)) / p_com_w
