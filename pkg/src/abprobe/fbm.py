"""Self-similar cross-traffic as a fractional-Brownian-motion cumulative-arrival process.

The cumulative cross-traffic volume is b(t) = mu*t + sigma*omega(t), where
omega is standard fBm with Var(omega(t)) = |t|^(2H).  Raw b(t) can decrease
(omega is signed); traffic volumes cannot, so queries return the monotone
clamp b~(t) = max_{s<=t} max(0, b(s)).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FbmParams",
    "FbmTrace",
    "fgn_davies_harte",
    "generate_trace",
    "trace_from_samples",
    "write_trace_csv",
    "read_trace_csv",
]


def _next_fast_len(target: int) -> int:
    """Smallest even 5-smooth integer >= target (the embedding needs an even
    size; 5-smooth keeps the FFT O(m log m))."""
    best = 2
    while best < target:
        best *= 2
    p3 = 1
    while p3 < best:
        p5 = p3
        while p5 < best:
            m = 2 * p5
            while m < target:
                m *= 2
            best = min(best, m)
            p5 *= 5
        p3 *= 3
    return best


def fgn_davies_harte(n: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    """Exact fractional Gaussian noise on a unit grid via circulant embedding.

    Returns n zero-mean unit-variance increments with autocovariance
    gamma(k) = 0.5*(|k+1|^2H - 2|k|^2H + |k-1|^2H).  The embedding is padded
    to a 5-smooth length for FFT speed; if the padded embedding has negative
    eigenvalues it falls back to the minimal 2n one, which is nonnegative
    definite for fGn at any H in (0, 1).  Tiny negative eigenvalues are
    clipped, anything worse raises.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    if n < 1:
        raise ValueError(f"need at least one increment, got n={n}")
    if n == 1:
        return rng.standard_normal(1)

    key = (n, hurst)
    cached = _EIGENVALUE_CACHE.get(key)
    if cached is None:
        for m in (_next_fast_len(2 * n), 2 * n):
            lam = _embedding_eigenvalues(n, hurst, m)
            if lam is not None:
                break
        else:
            raise RuntimeError(f"circulant embedding failed for n={n}, H={hurst}")
        if len(_EIGENVALUE_CACHE) >= 4:
            _EIGENVALUE_CACHE.pop(next(iter(_EIGENVALUE_CACHE)))
        _EIGENVALUE_CACHE[key] = (m, lam)
    else:
        m, lam = cached

    # Hermitian spectral synthesis: m real normals -> one exact sample path.
    half = m // 2
    z = rng.standard_normal(m)
    spec = np.empty(half + 1, dtype=complex)
    spec[0] = np.sqrt(m * lam[0]) * z[0]
    spec[half] = np.sqrt(m * lam[half]) * z[half]
    spec[1:half] = np.sqrt(m * lam[1:half] / 2.0) * (z[1:half] + 1j * z[half + 1 :])
    return np.fft.irfft(spec, n=m)[:n]


# eigenvalues are a pure function of (n, hurst); reuse across seeds
_EIGENVALUE_CACHE: dict[tuple[int, float], tuple[int, np.ndarray]] = {}


def _embedding_eigenvalues(n: int, hurst: float, m: int) -> np.ndarray | None:
    """Eigenvalues of the size-m circulant embedding, or None if indefinite."""
    if m % 2:
        raise ValueError(f"embedding size must be even, got {m}")
    two_h = 2.0 * hurst
    half = m // 2
    k = np.arange(half + 1, dtype=float)
    gamma = 0.5 * ((k + 1.0) ** two_h - 2.0 * k**two_h + np.abs(k - 1.0) ** two_h)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.rfft(row).real  # eigenvalues 0..m/2 of the symmetric circulant
    if lam.min() < -1e-8 * lam.max():
        return None
    np.clip(lam, 0.0, None, out=lam)
    return lam


@dataclass(frozen=True)
class FbmParams:
    """Parameters of one cross-traffic trace.

    hurst    self-similarity index H, 0 < H < 1
    sigma    fluctuation factor (bits * s^-H)
    mu       mean rate (bits/s)
    dt       sample grid spacing (s)
    horizon  total trace duration (s)
    seed     RNG seed
    """

    hurst: float
    sigma: float
    mu: float
    dt: float
    horizon: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (0, 1), got {self.hurst}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.mu < 0.0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.horizon < self.dt:
            raise ValueError(f"horizon must be >= dt, got {self.horizon} < {self.dt}")

    @property
    def n_samples(self) -> int:
        return int(np.floor(self.horizon / self.dt + 1e-9)) + 1


class FbmTrace:
    """A sampled omega(t) path plus the clamped cumulative-volume grid.

    Immutable after construction; all queries are pure, so a trace may be
    shared freely across workers.
    """

    def __init__(self, params: FbmParams, omega: np.ndarray):
        omega = np.asarray(omega, dtype=float)
        if omega.ndim != 1 or omega.shape[0] != params.n_samples:
            raise ValueError(
                f"omega must have {params.n_samples} samples, got shape {omega.shape}"
            )
        if omega[0] != 0.0:
            raise ValueError("omega must start at zero")
        self.params = params
        self.omega = omega
        t = params.dt * np.arange(omega.shape[0])
        raw = params.mu * t + params.sigma * omega
        self._raw = raw
        # monotone clamp: running max of max(0, raw)
        self._cum = np.maximum.accumulate(np.maximum(raw, 0.0))
        for arr in (self.omega, self._raw, self._cum):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.omega.shape[0]

    @property
    def horizon(self) -> float:
        return self.params.horizon

    @property
    def grid_times(self) -> np.ndarray:
        return self.params.dt * np.arange(self.n)

    @property
    def cum_grid(self) -> np.ndarray:
        """Clamped cumulative bits at grid points (non-decreasing)."""
        return self._cum

    @property
    def clamp_fraction(self) -> float:
        """Fraction of grid points where the monotone clamp altered raw b(t)."""
        return float(np.mean(self._cum > self._raw))

    def _check_time(self, t: float) -> float:
        tmax = (self.n - 1) * self.params.dt
        if t < -1e-12 or t > tmax * (1 + 1e-12) + 1e-12:
            raise ValueError(f"t={t} outside trace domain [0, {tmax}]")
        return min(max(t, 0.0), tmax)

    def omega_at(self, t: float) -> float:
        """omega(t), linearly interpolated between grid samples."""
        t = self._check_time(t)
        pos = t / self.params.dt
        j = min(int(pos), self.n - 2)
        frac = pos - j
        return float(self.omega[j] + (self.omega[j + 1] - self.omega[j]) * frac)

    def cumulative_bits(self, t: float) -> float:
        """Clamped cumulative cross-traffic volume b~(t) in bits."""
        t = self._check_time(t)
        pos = t / self.params.dt
        j = min(int(pos), self.n - 2)
        frac = pos - j
        raw = self._raw[j] + (self._raw[j + 1] - self._raw[j]) * frac
        return float(max(self._cum[j], raw))

    def average_rate(self, t: float, delta: float) -> float:
        """Mean cross-traffic rate over [t, t+delta] in bits/s (>= 0)."""
        if delta <= 0.0:
            raise ValueError(f"delta must be > 0, got {delta}")
        return (self.cumulative_bits(t + delta) - self.cumulative_bits(t)) / delta


def generate_trace(params: FbmParams) -> FbmTrace:
    """Synthesize omega on the dt grid; bit-for-bit reproducible per seed."""
    rng = np.random.default_rng(params.seed)
    n_incr = params.n_samples - 1
    incr = fgn_davies_harte(n_incr, params.hurst, rng) * params.dt**params.hurst
    omega = np.empty(n_incr + 1)
    omega[0] = 0.0
    np.cumsum(incr, out=omega[1:])
    return FbmTrace(params, omega)


def trace_from_samples(params: FbmParams, omega: np.ndarray) -> FbmTrace:
    """Wrap externally supplied omega samples (e.g. re-imported from CSV)."""
    return FbmTrace(params, omega)


def write_trace_csv(trace: FbmTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "omega"])
        for t, w in zip(trace.grid_times, trace.omega):
            writer.writerow([f"{t:.12g}", f"{w:.17g}"])


def read_trace_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a `t,omega` CSV back into (t, omega) arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["t", "omega"]:
            raise ValueError(f"unexpected trace CSV header: {header}")
        rows = [(float(r[0]), float(r[1])) for r in reader]
    t = np.array([r[0] for r in rows])
    omega = np.array([r[1] for r in rows])
    return t, omega
