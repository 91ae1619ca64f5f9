"""Multi-rate probe schedules and the reduction of receiver timestamps to
per-portion strain measurements.

A sequence is M packets of S bytes forming M-1 probe pairs, split into P
constant-rate portions.  Portion p transmits at rate u_p: every gap in the
portion equals S_bits/u_p.  The receiver-side measurement per sequence is the
vector of portion-mean strains z, the portion rates (first column of the
measurement matrix), and the per-portion strain sample variances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SequenceConfig",
    "ProbeSchedule",
    "StrainMeasurement",
    "draw_portion_rates",
    "build_schedule",
    "pair_strains",
    "reduce_measurement",
    "gate_mask",
]

R_FLOOR_DEFAULT = 1e-6


def balanced_portion_sizes(pairs: int, portions: int) -> tuple[int, ...]:
    """Split `pairs` probe pairs into `portions` near-equal groups.

    Equal groups of (M-1)/P pairs when P divides M-1; otherwise the remainder
    is spread over the leading portions (sizes differ by at most one).
    """
    base, rem = divmod(pairs, portions)
    return tuple([base + 1] * rem + [base] * (portions - rem))


@dataclass(frozen=True)
class SequenceConfig:
    """Shape of one probing sequence.

    m            packets per sequence (M)
    p            portions (P)
    packet_size  probe packet size S in bytes
    rate_min     lower edge of the per-portion rate draw (bits/s)
    rate_max     upper edge of the per-portion rate draw (bits/s)
    inter_sequence_gap  time between sequence starts (s)
    """

    m: int
    p: int
    packet_size: float
    rate_min: float
    rate_max: float
    inter_sequence_gap: float = 1.0

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"portions must be >= 1, got {self.p}")
        if self.m - 1 < 2 * self.p:
            raise ValueError(
                f"need at least two probe pairs per portion: M={self.m}, P={self.p}"
            )
        if self.packet_size <= 0:
            raise ValueError(f"packet_size must be > 0, got {self.packet_size}")
        if not 0 < self.rate_min <= self.rate_max:
            raise ValueError(
                f"need 0 < rate_min <= rate_max, got [{self.rate_min}, {self.rate_max}]"
            )
        if self.inter_sequence_gap <= 0:
            raise ValueError(
                f"inter_sequence_gap must be > 0, got {self.inter_sequence_gap}"
            )

    @property
    def packet_bits(self) -> float:
        return 8.0 * self.packet_size

    @property
    def pairs(self) -> int:
        return self.m - 1

    @property
    def portion_sizes(self) -> tuple[int, ...]:
        return balanced_portion_sizes(self.m - 1, self.p)

    def portion_slices(self) -> list[slice]:
        """Pair-index slice per portion."""
        edges = np.concatenate([[0], np.cumsum(self.portion_sizes)])
        return [slice(int(edges[i]), int(edges[i + 1])) for i in range(self.p)]


@dataclass(frozen=True)
class ProbeSchedule:
    """Transmit timestamps and per-portion rates of one sequence."""

    send_times: np.ndarray
    portion_rates: np.ndarray
    config: SequenceConfig

    @property
    def delta_p(self) -> np.ndarray:
        """Per-portion observation time (span of the portion's gaps)."""
        sizes = np.asarray(self.config.portion_sizes, dtype=float)
        return sizes * self.config.packet_bits / self.portion_rates

    @property
    def delta_t(self) -> float:
        """Total observation time: first-to-last packet span."""
        return float(self.send_times[-1] - self.send_times[0])


def draw_portion_rates(config: SequenceConfig, rng: np.random.Generator) -> np.ndarray:
    """P rates, iid uniform on [rate_min, rate_max], sorted ascending."""
    rates = rng.uniform(config.rate_min, config.rate_max, config.p)
    rates.sort()
    return rates


def build_schedule(
    config: SequenceConfig, rates: np.ndarray, t_start: float
) -> ProbeSchedule:
    """Lay out packet 0 at t_start, then constant-rate gaps portion by portion."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (config.p,):
        raise ValueError(f"expected {config.p} rates, got shape {rates.shape}")
    if np.any(rates <= 0):
        raise ValueError("portion rates must be positive")
    gaps = np.repeat(config.packet_bits / rates, config.portion_sizes)
    send = np.empty(config.m)
    send[0] = t_start
    np.cumsum(gaps, out=send[1:])
    send[1:] += t_start
    send.flags.writeable = False
    return ProbeSchedule(send_times=send, portion_rates=rates, config=config)


def pair_strains(schedule: ProbeSchedule, arrivals: np.ndarray) -> np.ndarray:
    """Per-pair strain: receiver gap over sender gap, minus one."""
    arrivals = np.asarray(arrivals, dtype=float)
    if arrivals.shape != schedule.send_times.shape:
        raise ValueError(
            f"expected {schedule.send_times.shape[0]} arrivals, got {arrivals.shape}"
        )
    g_out = np.diff(arrivals)
    if np.any(g_out <= 0):
        raise ValueError("arrivals must be strictly increasing (simulator bug?)")
    g_in = np.diff(schedule.send_times)
    return g_out / g_in - 1.0


@dataclass(frozen=True)
class StrainMeasurement:
    """One Kalman measurement: portion-mean strains z, rates (the measurement
    matrix's first column), and the diagonal of the strain covariance."""

    z: np.ndarray
    rates: np.ndarray
    r_diag: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.z) == len(self.rates) == len(self.r_diag)):
            raise ValueError("z, rates and r_diag must have equal length")
        if np.any(self.r_diag <= 0):
            raise ValueError("r_diag entries must be positive")

    @property
    def p(self) -> int:
        return len(self.z)


def reduce_measurement(
    strains: np.ndarray,
    schedule: ProbeSchedule,
    r_floor: float = R_FLOOR_DEFAULT,
) -> StrainMeasurement:
    """Portion means and (n-1)-denominator sample variances of pair strains.

    Variances are floored at r_floor: a portion whose strains are all equal
    (typical when its rate is below the available bandwidth) would otherwise
    be infinitely trusted by the filter.
    """
    strains = np.asarray(strains, dtype=float)
    if strains.shape != (schedule.config.m - 1,):
        raise ValueError(
            f"expected {schedule.config.m - 1} pair strains, got {strains.shape}"
        )
    slices = schedule.config.portion_slices()
    z = np.array([strains[sl].mean() for sl in slices])
    r = np.array([max(strains[sl].var(ddof=1), r_floor) for sl in slices])
    return StrainMeasurement(z=z, rates=schedule.portion_rates.copy(), r_diag=r)


def gate_mask(meas: StrainMeasurement, threshold: float | None) -> np.ndarray:
    """Congestion gate: keep portions with |z| >= threshold.

    The linear strain law only holds above the congestion break; a portion
    probing below it reports zero strain and would drag the fitted line flat.
    threshold=None keeps every portion.
    """
    if threshold is None:
        return np.ones(meas.p, dtype=bool)
    return np.abs(meas.z) >= threshold
