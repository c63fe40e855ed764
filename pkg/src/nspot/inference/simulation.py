"""Exceedance-sequence simulation and return levels.

Observed covariate trajectories are replayed row by row. The target
pollutant's own lags are fed back from the simulated values; every other
covariate keeps its observed value. At each step an exceedance occurs with
probability ``rho(c_t)`` and is drawn from the local GPD; otherwise a value
is resampled from a pool of observed below-threshold concentrations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..features import traffic_columns
from ..link import LocalGpd, ModelKind, as_vector, local_arrays

OBS_PER_YEAR = 35_136
CHUNK = 1 << 20
DAY_START_HOUR = 7
NIGHT_START_HOUR = 20


class SimulationError(RuntimeError):
    pass


class InvalidLinkError(SimulationError):
    pass


class EmptyPoolError(SimulationError):
    pass


class InsufficientLengthError(ValueError):
    pass


class LevelBelowThresholdError(ValueError):
    pass


def horizon_to_p(years, per_year=OBS_PER_YEAR):
    """Per-observation exceedance probability of a ``years``-year level."""
    if years <= 0:
        raise ValueError("horizon must be positive")
    return 1.0 / (per_year * years)


@dataclass(frozen=True)
class ReturnLevelEstimate:
    p: float
    level: float
    credible_interval: tuple
    kind: str
    horizon_years: float | None = None
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lo, hi = self.credible_interval
        if not lo <= self.level <= hi:
            raise ValueError(f"credible interval {self.credible_interval} does not contain {self.level}")

    def to_dict(self):
        return {
            "kind": self.kind,
            "p": self.p,
            "horizon_years": self.horizon_years,
            "level": self.level,
            "lower": self.credible_interval[0],
            "upper": self.credible_interval[1],
            **self.details,
        }


def conditional_return_level(local: LocalGpd, u, p):
    """Level exceeded with probability ``p`` given the covariates behind ``local``."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if p > local.rho:
        raise LevelBelowThresholdError(f"p={p} exceeds the exceedance rate {local.rho}; level lies below u")
    if p == local.rho:
        return float(u)
    log_ratio = math.log(local.rho) - math.log(p)
    if abs(local.xi) < 1e-8:
        return float(u + local.sigma * log_ratio)
    return float(u + local.sigma * math.expm1(local.xi * log_ratio) / local.xi)


def conditional_levels(sigma, xi, rho, u, p):
    """Vectorized conditional levels; NaN where ``p > rho``."""
    sigma, xi, rho = (np.asarray(a, dtype=float) for a in (sigma, xi, rho))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.log(rho) - math.log(p)
        small = np.abs(xi) < 1e-8
        general = sigma * np.expm1(xi * log_ratio) / np.where(small, 1.0, xi)
        out = u + np.where(small, sigma * log_ratio, general)
    return np.where(log_ratio >= 0, out, np.nan)


def posterior_conditional_return_level(theta_draws, kind, c_tilde, u, p, level=0.95):
    """Per-draw conditional levels at one (standardized) covariate vector."""
    kind = ModelKind.parse(kind)
    theta_draws = np.atleast_2d(theta_draws)
    c = np.asarray(c_tilde, dtype=float)
    values = np.empty(len(theta_draws))
    valid = np.ones(len(theta_draws), dtype=bool)
    for i, theta in enumerate(theta_draws):
        sigma, xi, rho, ok = local_arrays(kind, theta, u, c[None, :])
        valid[i] = bool(ok[0])
        values[i] = conditional_levels(sigma, xi, rho, u, p)[0] if ok[0] else np.nan
    below = np.isnan(values) & valid
    values = np.where(below, u, values)
    kept = values[valid]
    if kept.size == 0:
        raise InvalidLinkError("no posterior draw gives a valid link at this covariate vector")
    tail = (1 - level) / 2
    lo, hi = np.quantile(kept, [tail, 1 - tail])
    point = float(np.median(kept))
    return ReturnLevelEstimate(p, point, (float(min(lo, point)), float(max(hi, point))), "conditional",
                               details={"draws_below_threshold": int(below.sum()),
                                        "invalid_draws": int((~valid).sum())})


@dataclass
class Trajectory:
    """Standardized covariate rows plus the target-lag feedback wiring.

    ``lag_columns`` index the target's lags 1..L in ``C``; ``lag_mu`` and
    ``lag_sd`` map raw lag values to the standardized scale. ``pool`` and
    ``pool_offsets`` describe the below-threshold resampling pools (a
    single global pool when ``pool_offsets`` is empty); ``fallback`` is
    used for rows whose pool is empty.
    """

    C: np.ndarray
    lag_columns: np.ndarray
    lag_mu: np.ndarray
    lag_sd: np.ndarray
    initial_state: np.ndarray
    pool: np.ndarray
    pool_offsets: np.ndarray
    fallback: np.ndarray

    def __len__(self):
        return len(self.C)

    @property
    def n_lags(self):
        return len(self.lag_columns)


def target_lag_columns(design):
    """Design column indices of the target pollutant's own lags, lag 1 first."""
    cols = []
    j = 1
    while f"{design.target}_lag{j}" in design.names:
        cols.append(design.column(f"{design.target}_lag{j}"))
        j += 1
    return np.array(cols, dtype=np.int64)


def below_threshold_pool(response, u):
    response = np.asarray(response, dtype=float)
    return np.ascontiguousarray(response[response <= u])


def _block_keys(timestamps):
    """(date, is_day) keys: day 07:00-20:00, night 20:00-07:00 of the evening date."""
    keys = []
    for t in timestamps:
        hour = t.hour
        if DAY_START_HOUR <= hour < NIGHT_START_HOUR:
            keys.append((t.date().toordinal(), 1))
        elif hour >= NIGHT_START_HOUR:
            keys.append((t.date().toordinal(), 0))
        else:
            keys.append((t.date().toordinal() - 1, 0))
    return keys


def block_pools(timestamps, response, u, flow=None, flow_band=None):
    """Per-row pools of below-threshold values from the same day/night block.

    With ``flow_band=(lo, hi)`` a candidate is kept only when its observed
    total flow lies within ``[lo, hi]`` times the flow at the row itself.
    Returns ``(pool, offsets, fallback)`` for :class:`Trajectory`; the
    fallback is the observed value at the row.
    """
    response = np.asarray(response, dtype=float)
    n = len(response)
    keys = _block_keys(timestamps)
    groups = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    pieces = [None] * n
    for rows in groups.values():
        rows = np.array(rows)
        below = rows[response[rows] <= u]
        if flow_band is None:
            vals = response[below]
            for i in rows:
                pieces[i] = vals
            continue
        lo, hi = flow_band
        cand_flow = flow[below]
        cand_vals = response[below]
        for i in rows:
            f = flow[i]
            sel = (cand_flow >= lo * f) & (cand_flow <= hi * f)
            pieces[i] = cand_vals[sel]
    sizes = np.array([len(p) for p in pieces], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    pool = np.concatenate(pieces) if n else np.empty(0)
    return np.ascontiguousarray(pool, dtype=float), offsets, np.ascontiguousarray(response)


def build_trajectory(design, standardizer, pool_mode="global", C_raw=None, flow_band=None):
    """Prepare a design for simulation.

    ``pool_mode`` is ``"global"`` (all observed values <= u), ``"block"``
    (same day/night block) or ``"block_flow"`` (block plus the
    ``flow_band`` restriction on total flow).
    """
    C_raw = design.C if C_raw is None else C_raw
    C = np.ascontiguousarray(standardizer.transform(C_raw))
    lag_cols = target_lag_columns(design)
    lag_mu = np.ascontiguousarray(standardizer.mean[lag_cols - 1]) if len(lag_cols) else np.empty(0)
    lag_sd = np.ascontiguousarray(standardizer.scale[lag_cols - 1]) if len(lag_cols) else np.empty(0)
    initial = np.ascontiguousarray(design.C[0, lag_cols]) if len(lag_cols) else np.empty(0)
    if pool_mode == "global":
        pool = below_threshold_pool(design.response, design.u)
        offsets = np.empty(0, dtype=np.int64)
        fallback = np.zeros(len(design))
    elif pool_mode in ("block", "block_flow"):
        flow = None
        band = None
        if pool_mode == "block_flow":
            flow = design.aux["tf_ldv"] + design.aux["tf_hgv"]
            band = flow_band
        pool, offsets, fallback = block_pools(design.timestamps, design.response, design.u, flow, band)
    else:
        raise ValueError(f"unknown pool mode {pool_mode!r}")
    return Trajectory(C, lag_cols, lag_mu, lag_sd, initial, pool, offsets, fallback)


def linear_blocks(kind, theta, trajectory: Trajectory):
    """Exogenous linear predictors (n, blocks) and lag coefficients (blocks, L)."""
    kind = ModelKind.parse(kind)
    theta = as_vector(theta)
    p = trajectory.C.shape[1]
    blocks = theta.reshape(len(kind.blocks), p)
    lag_cols = trajectory.lag_columns
    exo_coef = blocks.copy()
    if len(lag_cols):
        exo_coef[:, lag_cols] = 0.0
    eta = np.ascontiguousarray(trajectory.C @ exo_coef.T)
    lag_coef = np.ascontiguousarray(blocks[:, lag_cols]) if len(lag_cols) else np.zeros((len(kind.blocks), 0))
    return eta, lag_coef


@dataclass
class SimulatedSequence:
    values: np.ndarray
    exceeded: np.ndarray


@dataclass
class SimulatedTail:
    """Largest simulated exceedances of one replicate, in descending order."""

    top: np.ndarray
    n_steps: int
    n_exceed: int

    @classmethod
    def from_sequence(cls, values, exceeded, keep=None):
        values = np.asarray(values, dtype=float)
        exc = values[np.asarray(exceeded, dtype=bool)]
        top = np.sort(exc)[::-1]
        if keep is not None:
            top = top[:keep]
        return cls(top, len(values), int(len(exc)))


def _run(kind, u, eta, lag_coef, trajectory, n_steps, rng, start, on_chunk, backend):
    k = backend or kernels.active
    state = np.array(trajectory.initial_state, dtype=float, copy=True)
    done = 0
    while done < n_steps:
        size = min(CHUNK, n_steps - done)
        u_event = rng.random(size)
        u_gpd = 1.0 - rng.random(size)
        u_pool = rng.random(size)
        out = np.empty(size)
        exceeded = np.empty(size, dtype=np.uint8)
        status, step = k.simulate_path(
            int(kind), float(u), eta, lag_coef, trajectory.lag_mu, trajectory.lag_sd,
            trajectory.pool, trajectory.pool_offsets, trajectory.fallback,
            u_event, u_gpd, u_pool, state, (start + done) % len(trajectory), out, exceeded,
        )
        if status == 1:
            raise InvalidLinkError(f"Model II constraint alpha + u*beta <= 0 at simulation step {done + step}")
        if status == 2:
            raise EmptyPoolError("below-threshold pool is empty")
        on_chunk(out, exceeded.astype(bool))
        done += size


def simulate_sequence(trajectory: Trajectory, kind, theta, u, n_steps, random_source, start=0, backend=None):
    """Simulate ``n_steps`` concentrations along the (cyclically repeated) trajectory."""
    kind = ModelKind.parse(kind)
    eta, lag_coef = linear_blocks(kind, theta, trajectory)
    values, flags = [], []

    def collect(out, exc):
        values.append(out)
        flags.append(exc)

    _run(kind, u, eta, lag_coef, trajectory, int(n_steps), random_source, start, collect, backend)
    return SimulatedSequence(np.concatenate(values), np.concatenate(flags))


def simulate_tail(trajectory: Trajectory, kind, theta, u, n_steps, random_source, keep, start=0, backend=None):
    """Like :func:`simulate_sequence` but keeps only the ``keep`` largest exceedances."""
    kind = ModelKind.parse(kind)
    eta, lag_coef = linear_blocks(kind, theta, trajectory)
    top = np.empty(0)
    n_exc = 0

    def collect(out, exc):
        nonlocal top, n_exc
        vals = out[exc]
        n_exc += len(vals)
        merged = np.concatenate([top, vals])
        if len(merged) > keep:
            merged = np.partition(merged, len(merged) - keep)[len(merged) - keep:]
        top = merged

    _run(kind, u, eta, lag_coef, trajectory, int(n_steps), random_source, start, collect, backend)
    return SimulatedTail(np.sort(top)[::-1], int(n_steps), n_exc)


def required_length(p):
    return int(math.ceil(20.0 / p))


def kth_largest_level(tail: SimulatedTail, p, u):
    """The ceil(N p)-th largest simulated exceedance (``u`` if there are fewer)."""
    k = max(1, math.ceil(tail.n_steps * p))
    if len(tail.top) >= k:
        return float(tail.top[k - 1]), False
    return float(u), True


def marginal_return_level(replicates, p, u, level=0.95, horizon_years=None):
    """Pooled order-statistic estimate with a per-replicate credible interval.

    ``replicates`` is a sequence of :class:`SimulatedTail` (or of full
    simulated value arrays), one per posterior draw.
    """
    tails = [r if isinstance(r, SimulatedTail) else SimulatedTail.from_sequence(r, np.asarray(r) > u)
             for r in replicates]
    if not tails:
        raise ValueError("no replicates")
    for t in tails:
        if t.n_steps < required_length(p):
            raise InsufficientLengthError(
                f"simulation length {t.n_steps} is below 20/p = {required_length(p)} for p={p:.4g}")
    per_rep = [kth_largest_level(t, p, u) for t in tails]
    estimates = np.array([v for v, _ in per_rep])
    n_total = sum(t.n_steps for t in tails)
    pooled = SimulatedTail(np.sort(np.concatenate([t.top for t in tails]))[::-1], n_total,
                           sum(t.n_exceed for t in tails))
    point, short = kth_largest_level(pooled, p, u)
    tail = (1 - level) / 2
    lo, hi = np.quantile(estimates, [tail, 1 - tail]) if len(estimates) > 1 else (point, point)
    return ReturnLevelEstimate(
        p, point, (float(min(lo, point)), float(max(hi, point))), "marginal", horizon_years,
        details={"n_replicates": len(tails), "steps_per_replicate": int(tails[0].n_steps),
                 "replicate_levels": [float(v) for v in estimates],
                 "replicates_below_threshold": int(sum(s for _, s in per_rep)),
                 "pooled_below_threshold": bool(short)},
    )


def simulate_return_levels(trajectory, kind, theta_draws, u, p_list, random_source, n_steps=None,
                           horizons=None, level=0.95, backend=None, n_replicates=None):
    """One replicate per posterior draw; marginal levels for every ``p``.

    Draws are tried in order until ``n_replicates`` replicates (default:
    all draws) complete. A draw whose path leaves the Model II admissible
    region (possible because simulated lags can exceed the observed range)
    is discarded and counted in ``details["invalid_replicates"]``.
    """
    p_list = list(p_list)
    if horizons is None:
        horizons = [None] * len(p_list)
    n_steps = required_length(min(p_list)) if n_steps is None else int(n_steps)
    theta_draws = np.atleast_2d(theta_draws)
    wanted = len(theta_draws) if n_replicates is None else int(n_replicates)
    keep = int(math.ceil(wanted * n_steps * max(p_list))) + 1
    tails, invalid = [], 0
    for theta in theta_draws:
        if len(tails) == wanted:
            break
        try:
            tails.append(simulate_tail(trajectory, kind, theta, u, n_steps, random_source, keep, backend=backend))
        except InvalidLinkError:
            invalid += 1
    if not tails:
        raise InvalidLinkError(f"all {invalid} posterior draws left the admissible region during simulation")
    out = []
    for p, h in zip(p_list, horizons):
        est = marginal_return_level(tails, p, u, level, h)
        est.details["invalid_replicates"] = invalid
        out.append(est)
    return out


def reduced_flow_design(design, reduction):
    """Raw design matrix with flows scaled by ``1 - reduction`` and regimes recomputed."""
    if not 0.0 <= reduction < 1.0:
        raise ValueError("reduction must lie in [0, 1)")
    factor = 1.0 - reduction
    aux = design.aux
    cols = traffic_columns(aux["tf_ldv"] * factor, aux["tf_hgv"] * factor, aux["ts_ldv"], aux["ts_hgv"],
                           design.spec)
    C = design.C.copy()
    for name, values in cols.items():
        if name in design.names:
            C[:, design.column(name)] = values
    return C


def scenario_reduced_flow(design, standardizer, kind, theta_draws, p_list, reduction, random_seed,
                          n_steps=None, horizons=None, lag_resampling=True, band_halfwidth=0.05,
                          level=0.95, backend=None, n_replicates=None):
    """Baseline and reduced-flow marginal return levels with common random numbers.

    The baseline resamples non-exceedances from the same day/night block.
    The scenario scales both flow classes, recomputes the regime dummies
    and, with ``lag_resampling``, restricts the block pool to observations
    whose total flow was within ``1 - reduction +- band_halfwidth`` of the
    flow at the simulated row.
    """
    base_traj = build_trajectory(design, standardizer, "block")
    C_red = reduced_flow_design(design, reduction)
    if lag_resampling:
        centre = 1.0 - reduction
        band = (centre - band_halfwidth, centre + band_halfwidth)
        scen_traj = build_trajectory(design, standardizer, "block_flow", C_raw=C_red, flow_band=band)
    else:
        scen_traj = build_trajectory(design, standardizer, "block", C_raw=C_red)
    baseline = simulate_return_levels(base_traj, kind, theta_draws, design.u, p_list,
                                      np.random.default_rng(random_seed), n_steps, horizons, level, backend,
                                      n_replicates)
    scenario = simulate_return_levels(scen_traj, kind, theta_draws, design.u, p_list,
                                      np.random.default_rng(random_seed), n_steps, horizons, level, backend,
                                      n_replicates)
    empty = int(np.count_nonzero(np.diff(scen_traj.pool_offsets) == 0)) if len(scen_traj.pool_offsets) else 0
    return {"baseline": baseline, "scenario": scenario, "reduction": reduction,
            "rows_with_empty_pool": empty}
