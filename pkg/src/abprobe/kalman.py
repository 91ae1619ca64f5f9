"""Kalman filter over the strain line: random-walk state (alpha, beta),
sequential-scalar measurement updates, and the available-bandwidth readout.

The congested-regime strain law is z = alpha*u + beta with alpha = 1/C and
beta = (y - C)/C, so the AB estimate is -beta_hat/alpha_hat.  One filter
update per probing sequence: each portion contributes a scalar measurement
row [u_p, 1] with noise variance R_p; because R is diagonal the P scalar
updates are algebraically identical to the joint vector update while costing
O(P) instead of a PxP inversion (update_vector remains as the oracle).

Internally rates and alpha are nondimensionalized by c_ref so both state
components are O(1) and a single process-noise level acts comparably on
both.  Everything exposed is in bits/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .probing import StrainMeasurement, gate_mask

__all__ = [
    "FilterConfig",
    "FilterState",
    "EstimateRecord",
    "initial_state",
    "predict",
    "update_sequential",
    "update_vector",
    "ab_estimate",
    "process_sequence",
]

GATE_THRESHOLD_DEFAULT = 0.005


@dataclass(frozen=True)
class FilterConfig:
    """Estimator knobs.

    c_ref       rate normalization (bits/s); default choice is the probing
                rate_max of the consuming scenario
    lam         process-noise level, per-step variance added to each
                normalized state component
    psi0        initial error covariance scale (Psi_0 = psi0 * I, normalized)
    initial_ab  initial AB guess (bits/s) mapped to the state via
                alpha0 = 1/c_ref, beta0 = -initial_ab/c_ref
    ab_cap      clamp for the AB readout (bits/s)
    alpha_min   degeneracy threshold on alpha_hat (s/bit); below it the
                readout holds the previous sequence's value
    gate_threshold  |z| below this drops the portion from the update
                    (None disables gating)
    """

    c_ref: float
    lam: float = 1e-4
    psi0: float = 1.0
    initial_ab: float | None = None
    ab_cap: float | None = None
    alpha_min: float | None = None
    gate_threshold: float | None = GATE_THRESHOLD_DEFAULT

    def __post_init__(self) -> None:
        if self.c_ref <= 0:
            raise ValueError(f"c_ref must be > 0, got {self.c_ref}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.psi0 < 0:
            raise ValueError(f"psi0 must be >= 0, got {self.psi0}")

    @property
    def initial_ab_value(self) -> float:
        return 0.5 * self.c_ref if self.initial_ab is None else self.initial_ab

    @property
    def ab_cap_value(self) -> float:
        return self.c_ref if self.ab_cap is None else self.ab_cap

    @property
    def alpha_min_value(self) -> float:
        return 1e-3 / self.c_ref if self.alpha_min is None else self.alpha_min


@dataclass(frozen=True)
class FilterState:
    """Mean and error covariance of the normalized state (alpha*c_ref, beta)."""

    x: np.ndarray
    psi: np.ndarray
    lam: float
    c_ref: float

    @property
    def alpha_hat(self) -> float:
        """Estimated inverse capacity, s/bit."""
        return float(self.x[0]) / self.c_ref

    @property
    def beta_hat(self) -> float:
        return float(self.x[1])


@dataclass(frozen=True)
class EstimateRecord:
    """AB readout of one sequence."""

    ab_hat: float
    raw_ab: float
    state_after: FilterState
    portions_used: int
    degenerate: bool = False


def initial_state(config: FilterConfig) -> FilterState:
    x = np.array([1.0, -config.initial_ab_value / config.c_ref])
    psi = config.psi0 * np.eye(2)
    return FilterState(x=x, psi=psi, lam=config.lam, c_ref=config.c_ref)


def predict(state: FilterState) -> FilterState:
    """Random-walk time update: mean unchanged, covariance grows by lam*I."""
    return FilterState(
        x=state.x.copy(),
        psi=state.psi + state.lam * np.eye(2),
        lam=state.lam,
        c_ref=state.c_ref,
    )


def _joseph_scalar(x, psi, h, z, r):
    s = h @ psi @ h + r
    k = (psi @ h) / s
    x = x + k * (z - h @ x)
    ikh = np.eye(2) - np.outer(k, h)
    psi = ikh @ psi @ ikh.T + r * np.outer(k, k)
    return x, 0.5 * (psi + psi.T)


def update_sequential(
    state: FilterState,
    meas: StrainMeasurement,
    gate_threshold: float | None = None,
) -> FilterState:
    """P scalar updates in portion order, Joseph-stabilized.

    Gated portions are skipped; with every portion gated this is a no-op.
    """
    keep = gate_mask(meas, gate_threshold)
    x = state.x.copy()
    psi = state.psi.copy()
    for p in range(meas.p):
        if not keep[p]:
            continue
        h = np.array([meas.rates[p] / state.c_ref, 1.0])
        x, psi = _joseph_scalar(x, psi, h, meas.z[p], meas.r_diag[p])
    return FilterState(x=x, psi=psi, lam=state.lam, c_ref=state.c_ref)


def update_vector(
    state: FilterState,
    meas: StrainMeasurement,
    gate_threshold: float | None = None,
) -> FilterState:
    """Joint update with the full P x 2 measurement matrix (oracle path).

    Algebraically identical to update_sequential for diagonal R; costs a
    PxP inversion.
    """
    keep = gate_mask(meas, gate_threshold)
    if not np.any(keep):
        return FilterState(
            x=state.x.copy(), psi=state.psi.copy(), lam=state.lam, c_ref=state.c_ref
        )
    u = meas.rates[keep] / state.c_ref
    z = meas.z[keep]
    r = meas.r_diag[keep]
    H = np.column_stack([u, np.ones_like(u)])
    psi = state.psi
    S = H @ psi @ H.T + np.diag(r)
    K = np.linalg.solve(S.T, (psi @ H.T).T).T
    x = state.x + K @ (z - H @ state.x)
    ikh = np.eye(2) - K @ H
    psi = ikh @ psi @ ikh.T + (K * r) @ K.T
    return FilterState(x=x, psi=0.5 * (psi + psi.T), lam=state.lam, c_ref=state.c_ref)


def ab_estimate(
    state: FilterState,
    config: FilterConfig,
    last_ab: float | None = None,
    portions_used: int = 0,
) -> EstimateRecord:
    """AB readout -beta_hat/alpha_hat, clamped to [0, ab_cap].

    A near-zero (or negative) alpha_hat makes the ratio meaningless; such
    sequences are flagged degenerate and hold the previous estimate rather
    than emitting an unbounded value.
    """
    alpha = state.alpha_hat
    beta = state.beta_hat
    if alpha != 0.0:
        raw = -beta / alpha
    elif beta != 0.0:
        raw = math.inf if -beta > 0 else -math.inf
    else:
        raw = math.nan
    if last_ab is None:
        last_ab = config.initial_ab_value
    if alpha <= config.alpha_min_value:
        ab = min(max(last_ab, 0.0), config.ab_cap_value)
        return EstimateRecord(
            ab_hat=ab,
            raw_ab=raw,
            state_after=state,
            portions_used=portions_used,
            degenerate=True,
        )
    ab = min(max(raw, 0.0), config.ab_cap_value)
    return EstimateRecord(
        ab_hat=ab,
        raw_ab=raw,
        state_after=state,
        portions_used=portions_used,
        degenerate=False,
    )


def process_sequence(
    state: FilterState,
    meas: StrainMeasurement,
    config: FilterConfig,
    last_ab: float | None = None,
) -> tuple[FilterState, EstimateRecord]:
    """One full filter step per probing sequence: predict, update, read out."""
    st = predict(state)
    st = update_sequential(st, meas, config.gate_threshold)
    used = int(gate_mask(meas, config.gate_threshold).sum())
    record = ab_estimate(st, config, last_ab=last_ab, portions_used=used)
    return st, record
