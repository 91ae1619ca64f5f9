"""Single-bottleneck FIFO path at the hop-workload level.

Cross-traffic is fluid (driven by an FbmTrace), probe packets are discrete.
The bottleneck queue is tracked as a workload process w(t): seconds of
unfinished service.  Between probe arrivals the fluid adds d(arrivals)/C of
work while the server drains at unit rate, floored at zero with idle time
accrued; each probe adds S_bits/C of work and departs FIFO after the workload
it found on arrival.

Propagation delays are zero and the access link only nominally exists, so a
probe reaches the bottleneck at its send time and the receiver at its
bottleneck departure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .fbm import FbmTrace
from .probing import ProbeSchedule

__all__ = [
    "PathModel",
    "HopWorkload",
    "TransitResult",
    "PortionBounds",
    "fluid_strain_oracle",
    "transit_sequence",
    "strain_bounds_check",
]


def fluid_strain_oracle(u: float, capacity: float, y: float) -> float:
    """Asymptotic fluid-flow strain for probe rate u against cross rate y.

    Zero while u <= C - y; beyond the break the strain grows linearly,
    (u + y)/C - 1.  Continuous, with the kink exactly at u = C - y.
    """
    if u <= 0:
        raise ValueError(f"probe rate must be > 0, got {u}")
    if capacity <= 0:
        raise ValueError(f"capacity must be > 0, got {capacity}")
    if not 0 <= y < capacity:
        raise ValueError(
            f"cross rate must satisfy 0 <= y < capacity, got y={y}, C={capacity}"
        )
    return max(0.0, (u + y) / capacity - 1.0)


@dataclass(frozen=True)
class HopWorkload:
    """Bottleneck queue state carried across probing sequences.

    t            simulation clock (s); no event before t remains unprocessed
    w            remaining workload (s of service), >= 0
    idle_accum   total idle time accumulated since the state was created (s)
    served_bits  cumulative bits served
    """

    t: float = 0.0
    w: float = 0.0
    idle_accum: float = 0.0
    served_bits: float = 0.0


@dataclass(frozen=True)
class TransitResult:
    """Receiver-side view of one probing sequence."""

    departures: np.ndarray
    true_ab: float
    window: tuple[float, float]  # (first bottleneck arrival, observation span)


class PathModel:
    """Bottleneck capacity plus the effective fluid arrival process.

    The trace's clamped cumulative volume is additionally rate-capped at
    y_max (default 0.95*capacity) so the bottleneck keeps positive residual
    bandwidth; cap_fraction reports how often the cap bit.
    """

    def __init__(
        self,
        capacity: float,
        access_capacity: float,
        traffic: FbmTrace,
        y_max: float | None = None,
    ):
        if capacity <= 0:
            raise ValueError(f"capacity must be > 0, got {capacity}")
        if access_capacity < capacity:
            raise ValueError(
                "bottleneck property violated: access_capacity "
                f"{access_capacity} < capacity {capacity}"
            )
        self.capacity = float(capacity)
        self.access_capacity = float(access_capacity)
        self.traffic = traffic
        self.y_max = 0.95 * capacity if y_max is None else float(y_max)
        if self.y_max <= 0:
            raise ValueError(f"y_max must be > 0, got {self.y_max}")

        dt = traffic.params.dt
        inc = np.diff(traffic.cum_grid)
        capped = np.minimum(inc, self.y_max * dt)
        self.cap_fraction = float(np.mean(capped < inc)) if len(inc) else 0.0
        eff = np.empty(traffic.n)
        eff[0] = 0.0
        np.cumsum(capped, out=eff[1:])
        eff.flags.writeable = False
        self._eff = eff
        self._dt = dt
        self._horizon = (traffic.n - 1) * dt
        self.max_fluid_rate = float(capped.max() / dt) if len(capped) else 0.0

    @property
    def horizon(self) -> float:
        return self._horizon

    def cumulative_cross_bits(self, t):
        """Effective (clamped, capped) cumulative cross-traffic bits at t."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < -1e-9) or np.any(t_arr > self._horizon * (1 + 1e-12) + 1e-9):
            raise ValueError(f"time outside traffic horizon [0, {self._horizon}]")
        pos = np.clip(t_arr / self._dt, 0.0, len(self._eff) - 1.0)
        j = np.minimum(pos.astype(np.int64), len(self._eff) - 2)
        frac = pos - j
        out = self._eff[j] + (self._eff[j + 1] - self._eff[j]) * frac
        return float(out) if np.isscalar(t) else out

    def cross_rate(self, t: float, delta: float) -> float:
        """Mean effective cross rate over [t, t+delta] (bits/s)."""
        if delta <= 0:
            raise ValueError(f"delta must be > 0, got {delta}")
        return (
            self.cumulative_cross_bits(t + delta) - self.cumulative_cross_bits(t)
        ) / delta

    def _advance_slow(self, w: float, t0: float, t1: float) -> tuple[float, float]:
        """Workload evolution cell by cell; exact even when fluid can outrun C.

        Only needed when the configured y_max allows fluid rates >= capacity;
        the fluid rate is constant within a grid cell, so the deficit formula
        is exact per cell.
        """
        idle = 0.0
        t = t0
        c = self.capacity
        while t < t1 - 1e-15:
            j = math.floor(t / self._dt + 1e-9) + 1
            cell_end = min(j * self._dt, t1)
            inflow = (
                self.cumulative_cross_bits(cell_end) - self.cumulative_cross_bits(t)
            ) / c
            wn = w + inflow - (cell_end - t)
            if wn < 0.0:
                idle -= wn
                wn = 0.0
            w = wn
            t = cell_end
        return w, idle


def transit_sequence(
    path: PathModel, schedule: ProbeSchedule, state: HopWorkload
) -> tuple[TransitResult, HopWorkload]:
    """Push one probe sequence through the bottleneck queue.

    Returns receiver arrival timestamps, the ground-truth available bandwidth
    over the sequence's observation window, and the queue state at the last
    probe arrival (queue persists across sequences unless the caller resets).
    """
    a = schedule.send_times
    if np.any(np.diff(a) <= 0):
        raise ValueError("schedule send times must be strictly increasing")
    if a[0] < state.t - 1e-9:
        raise ValueError(
            f"sequence starts at {a[0]} before the path clock {state.t}"
        )
    if a[-1] > path.horizon + 1e-9:
        raise ValueError(
            f"schedule extends to {a[-1]}, beyond the traffic horizon {path.horizon}"
        )

    c = path.capacity
    s_serv = schedule.config.packet_bits / c
    m = len(a)

    times = np.empty(m + 1)
    times[0] = min(state.t, a[0])
    times[1:] = a
    bits = path.cumulative_cross_bits(times)
    inflow = np.diff(bits) / c
    gaps = np.diff(times)

    fast = path.max_fluid_rate < c
    w = state.w
    idle = state.idle_accum
    served_work = 0.0
    dep = np.empty(m)
    for i in range(m):
        if fast:
            wn = w + inflow[i] - gaps[i]
            if wn < 0.0:
                idle -= wn
                wn = 0.0
        else:
            wn, idle_inc = path._advance_slow(w, times[i], times[i + 1])
            idle += idle_inc
        served_work += w + inflow[i] - wn
        dep[i] = a[i] + wn + s_serv
        w = wn + s_serv

    dep.flags.writeable = False
    delta_t = float(a[-1] - a[0])
    y = (bits[-1] - bits[1]) / delta_t
    true_ab = max(0.0, c - y)

    new_state = HopWorkload(
        t=float(a[-1]),
        w=w,
        idle_accum=idle,
        served_bits=state.served_bits + served_work * c,
    )
    return TransitResult(departures=dep, true_ab=true_ab, window=(float(a[0]), delta_t)), new_state


@dataclass(frozen=True)
class PortionBounds:
    """Queueing-theory envelope audit for one portion (simulator invariant)."""

    portion: int
    rate: float
    g_in: float
    g_out: float
    strain: float
    y_true: float
    lower: float
    upper: float
    equality_case: bool
    passed: bool


def strain_bounds_check(
    result: TransitResult, path: PathModel, schedule: ProbeSchedule
) -> list[PortionBounds]:
    """Check every portion's mean strain against the fluid queueing envelope.

    Congested portions (mean input gap <= S/C) must sit exactly at
    y/C + S/(g_in*C) - 1; the rest must lie in [y/C - 1, y/C + S/(g_in*C)].
    Pure audit: estimation never sees these numbers.
    """
    c = path.capacity
    s_bits = schedule.config.packet_bits
    send = schedule.send_times
    dep = result.departures
    g_in_all = np.diff(send)
    g_out_all = np.diff(dep)
    edges = np.concatenate([[0], np.cumsum(schedule.config.portion_sizes)]).astype(int)

    reports = []
    for p in range(schedule.config.p):
        lo, hi = edges[p], edges[p + 1]
        g_in = float(g_in_all[lo:hi].mean())
        g_out = float(g_out_all[lo:hi].mean())
        strain = g_out / g_in - 1.0
        t_p = float(send[lo])
        delta_p = float(send[hi] - send[lo])
        y = path.cross_rate(t_p, delta_p)
        slack = s_bits / (g_in * c)
        equality = g_in <= s_bits / c * (1 + 1e-12)
        if equality:
            bound = y / c + slack - 1.0
            lower = upper = bound
            tol = 1e-9 * max(1.0, abs(bound))
            passed = abs(strain - bound) <= tol
        else:
            lower = y / c - 1.0
            upper = y / c + slack
            tol = 1e-9 * max(1.0, abs(lower), abs(upper))
            passed = (strain >= lower - tol) and (strain <= upper + tol)
        reports.append(
            PortionBounds(
                portion=p,
                rate=float(schedule.portion_rates[p]),
                g_in=g_in,
                g_out=g_out,
                strain=strain,
                y_true=y,
                lower=lower,
                upper=upper,
                equality_case=equality,
                passed=passed,
            )
        )
    return reports
