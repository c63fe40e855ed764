"""Seeded synthetic data with known generating coefficients."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from datetime import datetime

import numpy as np

from . import gpd
from .features import GRID, DesignMatrix, FeatureSpec, ObservationRecord, POLLUTANTS, covariate_frame
from .inference.simulation import Trajectory, simulate_sequence
from .link import ModelKind, as_vector, local_arrays


def synthetic_regression(kind, theta, n, u, random_source, covariates=None, names=None,
                         start=datetime(2008, 1, 1)):
    """Design with i.i.d. standard normal covariates and responses from the model.

    ``theta`` acts directly on ``[1, Z]``. Non-exceedances are uniform on
    ``(0, u)``; their values do not enter the likelihood.
    """
    kind = ModelKind.parse(kind)
    theta = as_vector(theta)
    p = len(theta) // len(kind.blocks)
    Z = random_source.standard_normal((n, p - 1)) if covariates is None else np.asarray(covariates, float)
    C = np.column_stack([np.ones(n), Z])
    sigma, xi, rho, valid = local_arrays(kind, theta, u, C)
    if not valid.all():
        raise ValueError("generating coefficients give an invalid link on the simulated covariates")
    exceed = random_source.random(n) < rho
    excess = gpd.quantile(1.0 - random_source.random(n), sigma, xi)
    below = u * random_source.random(n)
    y = np.where(exceed, u + excess, below)
    names = tuple(names) if names is not None else tuple(f"c{j}" for j in range(1, p))
    stamps = [start + i * GRID for i in range(n)]
    return DesignMatrix(stamps, y, C, names, u, "no2", None, {})


def default_coefficients(kind, target, spec: FeatureSpec):
    """Modest raw-scale effects on covariates the default layout provides."""
    kind = ModelKind.parse(kind)
    names = set(spec.covariate_names())
    rate = {"intercept": -3.0}
    for name, value in (("tf_ldv", 0.004), ("ws", -0.2), (f"{target}_lag1", 0.02)):
        if name in names:
            rate[name] = value
    if kind is ModelKind.MODEL1:
        scale = {"intercept": math.log(10.0)}
        if "ws" in names:
            scale["ws"] = -0.05
        return {"s": scale, "k": {"intercept": 0.05}, "r": rate}
    shape = {"ws": -0.05} if "ws" in names else {}
    return {"a": {"intercept": 10.0}, "b": {"intercept": 0.05}, "g": shape, "r": rate}


@dataclass
class SynthConfig:
    n_rows: int = 20_000
    start: str = "2008-01-01T00:00:00"
    model_kind: str = "model2"
    threshold: float = 50.0
    coefficients: dict | None = None
    below_threshold_beta: tuple = (2.0, 1.5)
    missing_rate: float = 0.0
    output_name: str = "synthetic.csv"

    def __post_init__(self):
        self.model_kind = ModelKind.parse(self.model_kind).label
        self.below_threshold_beta = tuple(float(v) for v in self.below_threshold_beta)
        if self.n_rows < 10:
            raise ValueError("n_rows must be at least 10")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must lie in [0, 1)")
        datetime.fromisoformat(self.start)

    def to_dict(self):
        d = asdict(self)
        d["below_threshold_beta"] = list(self.below_threshold_beta)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown synth keys {sorted(unknown)}")
        return cls(**d)


def coefficient_vector(kind, coefficients, names):
    """Flat raw-scale coefficient vector from ``{block: {name: value}}``."""
    kind = ModelKind.parse(kind)
    p = len(names) + 1
    index = {"intercept": 0, **{n: j + 1 for j, n in enumerate(names)}}
    theta = np.zeros(len(kind.blocks) * p)
    unknown_blocks = set(coefficients) - set(kind.blocks)
    if unknown_blocks:
        raise ValueError(f"unknown coefficient blocks {sorted(unknown_blocks)} for {kind.label}")
    for b, block in enumerate(kind.blocks):
        for name, value in (coefficients.get(block) or {}).items():
            if name not in index:
                raise ValueError(f"coefficient {block}.{name}: no such covariate in the feature layout")
            theta[b * p + index[name]] = float(value)
    return theta


def _exogenous(n, start, rng):
    stamps = [start + i * GRID for i in range(n)]
    hours = np.array([t.hour + t.minute / 60.0 for t in stamps])
    dow = np.array([t.weekday() for t in stamps])
    doy = np.array([t.timetuple().tm_yday for t in stamps], dtype=float)
    weekday = np.where(dow < 5, 1.0, 0.6)
    profile = 0.15 + 0.85 * weekday * (np.exp(-((hours - 8.0) ** 2) / 4.0) + np.exp(-((hours - 17.5) ** 2) / 5.0))
    tf_ldv = rng.poisson(420.0 * profile).astype(float)
    tf_hgv = rng.poisson(45.0 * profile).astype(float)
    congestion = np.clip((profile - 0.75) / 0.25, 0.0, 1.0)
    ts_ldv = np.clip(rng.normal(62.0 - 40.0 * congestion, 6.0), 5.0, 110.0).round(1)
    ts_hgv = np.clip(0.85 * ts_ldv + rng.normal(0.0, 3.0, n), 5.0, 100.0).round(1)
    season = np.cos(2 * np.pi * (doy - 15.0) / 365.25)
    temp = (10.0 - 7.0 * season + 4.0 * np.sin(2 * np.pi * (hours - 9.0) / 24.0) + rng.normal(0, 1.5, n)).round(2)
    sr = np.clip(650.0 * np.sin(np.pi * (hours - 6.0) / 12.0) * (0.6 - 0.35 * season), 0.0, None)
    sr = np.clip(sr + rng.normal(0.0, 15.0, n) * (sr > 0), 0.0, None).round(1)
    rh = np.clip(75.0 - 0.8 * (temp - 10.0) + rng.normal(0.0, 6.0, n), 15.0, 100.0).round(1)
    ws = rng.gamma(2.0, 1.5, n).round(2)
    wd = np.mod(np.degrees(rng.vonmises(np.radians(240.0), 1.0, n)), 360.0).round(1)
    wd = np.where(wd >= 360.0, 0.0, wd)
    return stamps, {"tf_ldv": tf_ldv, "tf_hgv": tf_hgv, "ts_ldv": ts_ldv, "ts_hgv": ts_hgv,
                    "rh": rh, "sr": sr, "ws": ws, "wd": wd, "temp": temp, "profile": profile}


def _background_pollutant(n, level, traffic, rng, phi=0.9, noise=0.25):
    z = np.empty(n)
    z[0] = 0.0
    eps = rng.normal(0.0, noise, n)
    for t in range(1, n):
        z[t] = phi * z[t - 1] + eps[t]
    return (level * (0.5 + traffic) * np.exp(z)).round(2)


def generate_records(cfg: SynthConfig, target, spec: FeatureSpec, seed):
    """Full-schema records whose ``target`` column follows the configured model.

    Returns ``(records, truth)`` where ``truth`` echoes the generating
    coefficients by covariate name.
    """
    if target not in POLLUTANTS:
        raise ValueError(f"target pollutant must be one of {POLLUTANTS}")
    kind = ModelKind.parse(cfg.model_kind)
    rng = np.random.default_rng(seed)
    n = cfg.n_rows
    stamps, ex = _exogenous(n, datetime.fromisoformat(cfg.start), rng)
    levels = {"no": 40.0, "no2": 30.0, "o3": 25.0}
    series = {}
    for pol in POLLUTANTS:
        traffic = ex["profile"] if pol != "o3" else 1.0 - 0.5 * ex["profile"]
        series[pol] = _background_pollutant(n, levels[pol], traffic, rng)
    series[target] = np.full(n, np.nan)

    def make_records(values):
        cols = {**{k: ex[k] for k in ("tf_ldv", "tf_hgv", "ts_ldv", "ts_hgv", "rh", "sr", "ws", "wd", "temp")},
                **values}
        return [ObservationRecord(stamps[i], **{k: (None if np.isnan(v[i]) else float(v[i]))
                                                for k, v in cols.items()}) for i in range(n)]

    names = spec.covariate_names()
    coefficients = cfg.coefficients if cfg.coefficients is not None else default_coefficients(kind, target, spec)
    theta = coefficient_vector(kind, coefficients, names)
    matrix, _ = covariate_frame(make_records(series), spec)
    lag_cols = np.array([names.index(f"{target}_lag{j}") + 1 for j in range(1, spec.lag_count + 1)
                         if target in spec.pollutants_lagged], dtype=np.int64)
    L = len(lag_cols)
    s0 = spec.lag_count
    C = matrix[s0:].copy()
    if L:
        C[:, lag_cols] = 0.0
    if np.isnan(C).any():
        raise ValueError("synthetic covariates contain gaps; this should not happen")
    a, b = cfg.below_threshold_beta
    u = float(cfg.threshold)
    pool = np.ascontiguousarray(u * rng.beta(a, b, 20_000))
    initial = u * rng.beta(a, b, max(s0, 1))[:s0]
    traj = Trajectory(np.ascontiguousarray(C), lag_cols, np.zeros(L), np.ones(L),
                      np.ascontiguousarray(initial[::-1][:L]), pool, np.empty(0, dtype=np.int64), np.zeros(len(C)))
    sim = simulate_sequence(traj, kind, theta, u, len(C), rng)
    y = np.concatenate([initial, sim.values]).round(3)
    series[target] = y
    if cfg.missing_rate > 0:
        for name in ("no", "no2", "o3", "rh", "sr", "ws", "wd", "temp", "tf_ldv", "tf_hgv", "ts_ldv", "ts_hgv"):
            arr = series.get(name, ex.get(name)).astype(float).copy()
            arr[rng.random(n) < cfg.missing_rate] = np.nan
            if name in series:
                series[name] = arr
            else:
                ex[name] = arr
    records = make_records(series)
    truth = {
        "model_kind": kind.label,
        "target_pollutant": target,
        "threshold": u,
        "seed": int(seed),
        "n_rows": n,
        "coefficients": {blk: {k: float(v) for k, v in (coefficients.get(blk) or {}).items()}
                         for blk in kind.blocks},
        "simulated_exceedance_rate": float(np.mean(sim.exceeded)),
    }
    return records, truth
