"""Experiment orchestration: single runs, grid sweeps, and estimator
comparisons, all emitting plot-ready CSV.

A run is a pure function of (config, seed): traffic synthesis, N probing
sequences through the bottleneck, one filter step per sequence.  Sweeps and
comparisons partition work per seed so each worker generates its seed's
traffic trace once and reuses it across grid points; results are merged in
deterministic grid order regardless of completion order.
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import AnalyticParams, analytic_xi, empirical_xi, lookup_coeffs, normalized_mse
from .fbm import FbmParams, FbmTrace, generate_trace
from .kalman import FilterConfig, initial_state, process_sequence
from .path import HopWorkload, PathModel, strain_bounds_check, transit_sequence
from .probing import SequenceConfig, build_schedule, draw_portion_rates, pair_strains, reduce_measurement

__all__ = [
    "RunConfig",
    "ExperimentReport",
    "run",
    "sweep",
    "compare_bart",
    "model_grid_rows",
    "SWEEP_HEADER",
    "COMPARE_HEADER",
    "ESTIMATE_HEADER",
]

ESTIMATE_HEADER = [
    "seq_id", "t", "true_ab", "ab_hat", "raw_ab",
    "alpha_hat", "beta_hat", "psi00", "psi01", "psi11", "portions_used",
]
EVENT_HEADER = ["seq_id", "pkt_idx", "portion", "send_t", "arrive_t", "depart_t"]
SWEEP_HEADER = ["M", "P", "C", "S", "H", "lambda", "seed", "xi_sim", "xi_analytic", "xi_empirical"]
COMPARE_HEADER = ["method", "p", "m", "s", "initial_ab", "seed", "xi"]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{x:.12g}"


@dataclass(frozen=True)
class RunConfig:
    """Full scenario for one simulated estimation run.

    Fields left at None are derived from the bottleneck capacity when the
    config is finalized:
      access_capacity = 10 * capacity       sigma  = 0.025 * capacity
      mu              = 0.4 * capacity      rate_min = 0.7 * capacity
      rate_max        = 3.2 * capacity      y_max  = 0.95 * capacity
      dt              = packet_bits / (4 * capacity)
      initial_ab      = 0.5 * capacity      c_ref  = capacity

    The probing range deliberately brackets the nominal capacity from the
    congestion side: portions below the strain break measure nothing and
    their gate/idle transients bias the fitted line, so the default draw
    starts above the expected break and extends well past the capacity.
    """

    capacity: float = 10e6
    access_capacity: float | None = None
    hurst: float = 0.7
    sigma: float | None = None
    mu: float | None = None
    packets: int = 34
    portions: int = 2
    packet_size: float = 1500.0
    sequences: int = 1000
    rate_min: float | None = None
    rate_max: float | None = None
    inter_sequence_gap: float = 1.0
    lam: float = 1e-4
    psi0: float = 0.02
    initial_ab: float | None = None
    gate_threshold: float | None = 0.005
    r_floor: float = 1e-6
    seed: int = 0
    reset_queue: bool = False
    dt: float | None = None
    y_max: float | None = None
    c_ref: float | None = None

    def finalize(self) -> "RunConfig":
        """Fill derived defaults and cross-validate; raises ValueError with an
        actionable message on any inconsistency."""
        c = self.capacity
        if c <= 0:
            raise ValueError(f"capacity must be > 0, got {c}")
        if self.sequences < 1:
            raise ValueError(f"sequences must be >= 1, got {self.sequences}")
        access = 10.0 * c if self.access_capacity is None else self.access_capacity
        sigma = 0.025 * c if self.sigma is None else self.sigma
        mu = 0.4 * c if self.mu is None else self.mu
        rate_min = 0.7 * c if self.rate_min is None else self.rate_min
        rate_max = 3.2 * c if self.rate_max is None else self.rate_max
        y_max = 0.95 * c if self.y_max is None else self.y_max
        packet_bits = 8.0 * self.packet_size
        dt = packet_bits / (4.0 * c) if self.dt is None else self.dt
        initial_ab = 0.5 * c if self.initial_ab is None else self.initial_ab

        cfg = replace(
            self,
            access_capacity=access,
            sigma=sigma,
            mu=mu,
            rate_min=rate_min,
            rate_max=rate_max,
            y_max=y_max,
            dt=dt,
            initial_ab=initial_ab,
        )
        cfg.sequence_config()  # validates M/P/rates/packet size
        worst_span = (cfg.packets - 1) * packet_bits / rate_min
        if worst_span > cfg.inter_sequence_gap:
            raise ValueError(
                f"a worst-case sequence spans {worst_span:.4g}s but sequences start "
                f"every {cfg.inter_sequence_gap}s; raise rate_min, shrink packets/"
                "packet_size, or widen inter_sequence_gap"
            )
        if dt >= cfg.inter_sequence_gap:
            raise ValueError(
                f"trace grid dt={dt} must be finer than the inter-sequence gap"
            )
        cfg.fbm_params()  # validates hurst/sigma/mu/dt/horizon
        return cfg

    # -- derived views ----------------------------------------------------

    @property
    def horizon(self) -> float:
        return (self.sequences + 1) * self.inter_sequence_gap

    def sequence_config(self) -> SequenceConfig:
        return SequenceConfig(
            m=self.packets,
            p=self.portions,
            packet_size=self.packet_size,
            rate_min=self.rate_min,
            rate_max=self.rate_max,
            inter_sequence_gap=self.inter_sequence_gap,
        )

    def fbm_params(self) -> FbmParams:
        return FbmParams(
            hurst=self.hurst,
            sigma=self.sigma,
            mu=self.mu,
            dt=self.dt,
            horizon=self.horizon,
            seed=self.seed,
        )

    def filter_config(self) -> FilterConfig:
        # normalization reference: the nominal bottleneck capacity keeps both
        # state components O(1) and makes the initial-AB guess metric faithful
        c_ref = self.capacity if self.c_ref is None else self.c_ref
        return FilterConfig(
            c_ref=c_ref,
            lam=self.lam,
            psi0=self.psi0,
            initial_ab=self.initial_ab,
            ab_cap=self.rate_max,
            gate_threshold=self.gate_threshold,
        )

    def analytic_params(self, n_sequences: int | None = None) -> AnalyticParams:
        return AnalyticParams(
            capacity=self.capacity,
            sigma=self.sigma,
            hurst=self.hurst,
            lam=self.lam,
            psi0=self.psi0,
            m=self.packets,
            p=self.portions,
            rates=0.5 * (self.rate_min + self.rate_max),
            packet_size=self.packet_size,
            n_sequences=self.sequences if n_sequences is None else n_sequences,
        )


@dataclass
class ExperimentReport:
    """Per-sequence estimation record of one run."""

    config: RunConfig
    t_start: np.ndarray
    true_ab: np.ndarray
    ab_hat: np.ndarray
    raw_ab: np.ndarray
    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    psi00: np.ndarray
    psi01: np.ndarray
    psi11: np.ndarray
    portions_used: np.ndarray
    degenerate: np.ndarray
    clamp_fraction: float
    cap_fraction: float
    bound_reports: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.true_ab)

    @property
    def xi(self) -> float:
        return normalized_mse(
            np.column_stack([self.true_ab, self.ab_hat]), self.config.capacity
        )

    def xi_after(self, burn_in: int) -> float:
        return normalized_mse(
            np.column_stack([self.true_ab[burn_in:], self.ab_hat[burn_in:]]),
            self.config.capacity,
        )

    def to_csv(self, path_or_file) -> None:
        if hasattr(path_or_file, "write"):
            self._write_csv(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                self._write_csv(fh)

    def _write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ESTIMATE_HEADER)
        for k in range(self.n):
            writer.writerow(
                [
                    k,
                    _fmt(self.t_start[k]),
                    _fmt(self.true_ab[k]),
                    _fmt(self.ab_hat[k]),
                    _fmt(self.raw_ab[k]),
                    _fmt(self.alpha_hat[k]),
                    _fmt(self.beta_hat[k]),
                    _fmt(self.psi00[k]),
                    _fmt(self.psi01[k]),
                    _fmt(self.psi11[k]),
                    int(self.portions_used[k]),
                ]
            )


def run(
    config: RunConfig,
    trace: FbmTrace | None = None,
    collect_bounds: bool = False,
    event_log=None,
) -> ExperimentReport:
    """Execute one full estimation run; deterministic per (config, seed).

    A pre-generated trace may be supplied to share traffic across runs; it
    must match the config's traffic parameters exactly.
    """
    cfg = config.finalize()
    params = cfg.fbm_params()
    if trace is None:
        trace = generate_trace(params)
    elif trace.params != params:
        raise ValueError(
            f"supplied trace was generated from {trace.params}, config needs {params}"
        )
    path = PathModel(cfg.capacity, cfg.access_capacity, trace, cfg.y_max)
    seq_cfg = cfg.sequence_config()
    fcfg = cfg.filter_config()

    state = initial_state(fcfg)
    hop = HopWorkload()
    rate_rng = np.random.default_rng([cfg.seed, 1])
    last_ab = fcfg.initial_ab_value
    n = cfg.sequences

    cols = {
        name: np.empty(n)
        for name in (
            "t_start", "true_ab", "ab_hat", "raw_ab", "alpha_hat",
            "beta_hat", "psi00", "psi01", "psi11",
        )
    }
    portions_used = np.empty(n, dtype=int)
    degenerate = np.empty(n, dtype=bool)
    bounds: list = []
    event_writer = None
    if event_log is not None:
        event_fh = open(event_log, "w", newline="")
        event_writer = csv.writer(event_fh, lineterminator="\n")
        event_writer.writerow(EVENT_HEADER)
        pair_portion = np.repeat(np.arange(seq_cfg.p), seq_cfg.portion_sizes)
        packet_portion = np.concatenate([[0], pair_portion])

    try:
        for k in range(n):
            t0 = k * cfg.inter_sequence_gap
            rates = draw_portion_rates(seq_cfg, rate_rng)
            sched = build_schedule(seq_cfg, rates, t0)
            if cfg.reset_queue:
                hop = HopWorkload(t=t0)
            result, hop = transit_sequence(path, sched, hop)
            strains = pair_strains(sched, result.departures)
            meas = reduce_measurement(strains, sched, cfg.r_floor)
            state, rec = process_sequence(state, meas, fcfg, last_ab)
            last_ab = rec.ab_hat

            cols["t_start"][k] = t0
            cols["true_ab"][k] = result.true_ab
            cols["ab_hat"][k] = rec.ab_hat
            cols["raw_ab"][k] = rec.raw_ab
            cols["alpha_hat"][k] = state.alpha_hat
            cols["beta_hat"][k] = state.beta_hat
            cols["psi00"][k] = state.psi[0, 0]
            cols["psi01"][k] = state.psi[0, 1]
            cols["psi11"][k] = state.psi[1, 1]
            portions_used[k] = rec.portions_used
            degenerate[k] = rec.degenerate
            if collect_bounds:
                bounds.extend(strain_bounds_check(result, path, sched))
            if event_writer is not None:
                for i in range(seq_cfg.m):
                    event_writer.writerow(
                        [
                            k,
                            i,
                            int(packet_portion[i]),
                            _fmt(sched.send_times[i]),
                            _fmt(sched.send_times[i]),
                            _fmt(result.departures[i]),
                        ]
                    )
    finally:
        if event_writer is not None:
            event_fh.close()

    return ExperimentReport(
        config=cfg,
        portions_used=portions_used,
        degenerate=degenerate,
        clamp_fraction=trace.clamp_fraction,
        cap_fraction=path.cap_fraction,
        bound_reports=bounds,
        **cols,
    )


# -- grid sweeps ----------------------------------------------------------


def _grid_points(base: RunConfig, packets, portions, packet_sizes, capacities, paired):
    packets = list(packets) if packets is not None else [base.packets]
    portions = list(portions) if portions is not None else [base.portions]
    packet_sizes = list(packet_sizes) if packet_sizes is not None else [base.packet_size]
    capacities = list(capacities) if capacities is not None else [base.capacity]
    axes = [packets, portions, packet_sizes, capacities]
    if paired:
        width = max(len(ax) for ax in axes)
        for ax in axes:
            if len(ax) not in (1, width):
                raise ValueError(
                    "paired sweep needs axes of equal length (or singletons); "
                    f"got lengths {[len(a) for a in axes]}"
                )
        expanded = [ax * width if len(ax) == 1 else ax for ax in axes]
        return list(zip(*expanded))
    return [
        (m, p, s, c)
        for c in capacities
        for s in packet_sizes
        for m in packets
        for p in portions
    ]


def _point_config(base: RunConfig, m, p, s, c, seed) -> RunConfig:
    return replace(base, packets=m, portions=p, packet_size=s, capacity=c, seed=seed)


def _seed_task(args):
    base, points, seed = args
    xis = []
    cached_params = None
    cached_trace = None
    for m, p, s, c in points:
        cfg = _point_config(base, m, p, s, c, seed).finalize()
        params = cfg.fbm_params()
        if params != cached_params:
            cached_trace = generate_trace(params)
            cached_params = params
        xis.append(run(cfg, trace=cached_trace).xi)
    return seed, xis


def _map_seed_tasks(base, points, seeds, max_workers):
    tasks = [(base, points, seed) for seed in seeds]
    if max_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = dict(pool.map(_seed_task, tasks))
    else:
        results = dict(_seed_task(t) for t in tasks)
    return {seed: results[seed] for seed in seeds}


def sweep(
    base: RunConfig,
    packets=None,
    portions=None,
    packet_sizes=None,
    capacities=None,
    seeds=(0,),
    paired: bool = False,
    max_workers: int = 1,
    out=None,
) -> list[dict]:
    """Run the grid x seeds cross product; one row per (point, seed) plus
    seed-aggregated rows, with analytic and fitted-model overlays per point."""
    seeds = list(seeds)
    points = _grid_points(base, packets, portions, packet_sizes, capacities, paired)
    by_seed = _map_seed_tasks(base, points, seeds, max_workers)

    rows = []
    for idx, (m, p, s, c) in enumerate(points):
        cfg = _point_config(base, m, p, s, c, seeds[0]).finalize()
        xi_ana = analytic_xi(cfg.analytic_params()).xi
        if 1 <= p <= 5:
            xi_emp = empirical_xi(lookup_coeffs(c, p), m, p)
        else:
            xi_emp = float("nan")
        common = {
            "M": m, "P": p, "C": c, "S": s,
            "H": cfg.hurst, "lambda": cfg.lam,
            "xi_analytic": xi_ana, "xi_empirical": xi_emp,
        }
        sims = [by_seed[seed][idx] for seed in seeds]
        for seed, xi in zip(seeds, sims):
            rows.append({**common, "seed": seed, "xi_sim": xi})
        rows.append({**common, "seed": "mean", "xi_sim": float(np.mean(sims))})
        rows.append({**common, "seed": "median", "xi_sim": float(np.median(sims))})

    if out is not None:
        _write_rows(out, SWEEP_HEADER, rows)
    return rows


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in header])


# -- estimator comparisons -------------------------------------------------


def _compare_seed_task(args):
    base, variants, seed = args
    cfg0 = replace(base, seed=seed).finalize()
    trace = generate_trace(cfg0.fbm_params())
    xis = []
    for p, initial_ab in variants:
        cfg = replace(base, portions=p, initial_ab=initial_ab, seed=seed)
        xis.append(run(cfg, trace=trace).xi)
    return seed, xis


def compare_bart(
    base: RunConfig,
    portions=(2,),
    initial_abs=None,
    seeds=(0,),
    max_workers: int = 1,
    out=None,
) -> list[dict]:
    """Single-rate (P=1) versus multi-rate estimation on identical traffic.

    Every (method, initial_ab) variant replays the same trace per seed, so
    differences are purely estimator-side.  initial_abs sweeps the filter's
    initial AB guess; None keeps the config's default.
    """
    seeds = list(seeds)
    p_values = [1] + [p for p in portions if p != 1]
    ab_values = list(initial_abs) if initial_abs is not None else [base.initial_ab]
    variants = [(p, ab) for ab in ab_values for p in p_values]
    tasks = [(base, variants, seed) for seed in seeds]
    if max_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = dict(pool.map(_compare_seed_task, tasks))
    else:
        results = dict(_compare_seed_task(t) for t in tasks)

    rows = []
    for v_idx, (p, ab) in enumerate(variants):
        method = "bart" if p == 1 else "mrbart"
        ab_out = float("nan") if ab is None else ab
        common = {"method": method, "p": p, "m": base.packets, "s": base.packet_size,
                  "initial_ab": ab_out}
        sims = [results[seed][v_idx] for seed in seeds]
        for seed, xi in zip(seeds, sims):
            rows.append({**common, "seed": seed, "xi": xi})
        rows.append({**common, "seed": "mean", "xi": float(np.mean(sims))})
        rows.append({**common, "seed": "median", "xi": float(np.median(sims))})

    if out is not None:
        _write_rows(out, COMPARE_HEADER, rows)
    return rows


def model_grid_rows(base: RunConfig, packets, portions) -> list[dict]:
    """Analytic and fitted-model error over an (M, P) grid at the base scenario."""
    cfg_probe = replace(base, packets=max(packets), portions=min(portions)).finalize()
    rows = []
    for p in portions:
        for m in packets:
            cfg = replace(cfg_probe, packets=m, portions=p)
            xi_ana = analytic_xi(cfg.analytic_params()).xi
            if 1 <= p <= 5:
                xi_emp = empirical_xi(lookup_coeffs(cfg.capacity, p), m, p)
            else:
                xi_emp = float("nan")
            rows.append(
                {
                    "M": m, "P": p, "C": cfg.capacity,
                    "xi_analytic": xi_ana, "xi_empirical": xi_emp,
                }
            )
    return rows
