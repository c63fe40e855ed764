"""Observation ingestion and covariate engineering.

Raw 15-minute records are turned into an extended design matrix
``C = [1, c_1, ..., c_m]`` made of four groups: traffic (flows, speeds and
regime contrasts), composite circular terms (daily/weekly/yearly Fourier
pairs plus the wind-direction harmonics), meteorological terms (linear,
wind-speed interactions, squares) and autoregressive pollutant lags.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from enum import IntEnum
from pathlib import Path

import numpy as np

POLLUTANTS = ("no", "no2", "o3")
NUMERIC_COLUMNS = ("no", "no2", "o3", "tf_ldv", "tf_hgv", "ts_ldv", "ts_hgv", "rh", "sr", "ws", "wd", "temp")
CSV_COLUMNS = ("timestamp",) + NUMERIC_COLUMNS
GRID = timedelta(minutes=15)

# Phase origins. 2000-01-03 is a Monday, so daily and weekly phases are both 0
# at Monday midnight; the yearly cycle uses a fixed 365.25-day period so it is
# exactly periodic.
_WEEK_EPOCH = datetime(2000, 1, 3)
_YEAR_EPOCH = datetime(2000, 1, 1)
PERIOD_SECONDS = {"daily": 86_400, "weekly": 7 * 86_400, "yearly": 31_557_600}
CONGESTED_SPEED = 30.0
QUIET_FLOW = 200.0
FREE_FLOW = 300.0


class IngestError(ValueError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = None if path is None else str(path)
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


class FeatureSpecError(ValueError):
    pass


class EmptyDesignError(ValueError):
    pass


@dataclass(frozen=True)
class ObservationRecord:
    timestamp: datetime
    no: float | None = None
    no2: float | None = None
    o3: float | None = None
    tf_ldv: float | None = None
    tf_hgv: float | None = None
    ts_ldv: float | None = None
    ts_hgv: float | None = None
    rh: float | None = None
    sr: float | None = None
    ws: float | None = None
    wd: float | None = None
    temp: float | None = None


def _parse_float(text, path, line, column):
    text = text.strip()
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"not a number: {text!r}", path, line, column) from None
    if not math.isfinite(value):
        raise IngestError(f"non-finite value: {text!r}", path, line, column)
    return value


def ingest_csv(path) -> list[ObservationRecord]:
    """Read observation records from a CSV file with the fixed column set."""
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read file ({exc.strerror})", path) from exc
    records = []
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise IngestError("empty file, header row required", path, 1)
        header = [h.strip() for h in header]
        if sorted(header) != sorted(CSV_COLUMNS):
            missing = sorted(set(CSV_COLUMNS) - set(header))
            extra = sorted(set(header) - set(CSV_COLUMNS))
            raise IngestError(f"header mismatch (missing={missing}, unexpected={extra})", path, 1)
        index = {name: header.index(name) for name in CSV_COLUMNS}
        previous = None
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise IngestError(f"expected {len(header)} fields, found {len(row)}", path, line)
            stamp_text = row[index["timestamp"]].strip()
            try:
                stamp = datetime.fromisoformat(stamp_text)
            except ValueError:
                raise IngestError(f"bad timestamp {stamp_text!r}", path, line, "timestamp") from None
            if stamp.tzinfo is not None:
                stamp = stamp.replace(tzinfo=None)
            if previous is not None:
                if stamp <= previous:
                    raise IngestError(
                        f"timestamp {stamp_text} is not after the previous row "
                        f"({previous.isoformat()}); timestamps must be strictly increasing",
                        path, line, "timestamp",
                    )
                if (stamp - previous) % GRID:
                    raise IngestError(f"timestamp {stamp_text} is off the 15-minute grid", path, line, "timestamp")
            values = {name: _parse_float(row[index[name]], path, line, name) for name in NUMERIC_COLUMNS}
            wd = values["wd"]
            if wd is not None and not 0.0 <= wd < 360.0:
                raise IngestError(f"wind direction {wd} outside [0, 360)", path, line, "wd")
            records.append(ObservationRecord(timestamp=stamp, **values))
            previous = stamp
    return records


def write_csv(path, records) -> None:
    """Write records in the ingestion schema (missing values as empty cells)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            row = [rec.timestamp.isoformat()]
            for name in NUMERIC_COLUMNS:
                v = getattr(rec, name)
                row.append("" if v is None else repr(float(v)))
            writer.writerow(row)


class TrafficRegime(IntEnum):
    QUIET = 0
    FREE = 1
    BUSY = 2
    CONGESTED = 3


def classify_traffic_regime(tf_total, ts_avg):
    """Four-level regime from total flow (vehicles / 15 min) and speed (kph)."""
    if tf_total is None or ts_avg is None:
        return None
    if isinstance(tf_total, float) and math.isnan(tf_total) or isinstance(ts_avg, float) and math.isnan(ts_avg):
        return None
    if ts_avg < CONGESTED_SPEED:
        return TrafficRegime.CONGESTED
    if tf_total <= QUIET_FLOW:
        return TrafficRegime.QUIET
    if tf_total <= FREE_FLOW:
        return TrafficRegime.FREE
    return TrafficRegime.BUSY


def regime_codes(tf_total, ts_avg):
    """Vectorized :func:`classify_traffic_regime`; -1 marks missing inputs."""
    tf_total = np.asarray(tf_total, dtype=float)
    ts_avg = np.asarray(ts_avg, dtype=float)
    codes = np.where(tf_total <= QUIET_FLOW, 0, np.where(tf_total <= FREE_FLOW, 1, 2))
    codes = np.where(ts_avg < CONGESTED_SPEED, 3, codes)
    return np.where(np.isnan(tf_total) | np.isnan(ts_avg), -1, codes)


def average_speed(tf_ldv, tf_hgv, ts_ldv, ts_hgv):
    """Flow-weighted mean speed; plain mean of the two classes when flow is zero."""
    tf_ldv, tf_hgv, ts_ldv, ts_hgv = (np.asarray(a, dtype=float) for a in (tf_ldv, tf_hgv, ts_ldv, ts_hgv))
    total = tf_ldv + tf_hgv
    with np.errstate(invalid="ignore", divide="ignore"):
        weighted = (tf_ldv * ts_ldv + tf_hgv * ts_hgv) / total
    return np.where(total > 0, weighted, 0.5 * (ts_ldv + ts_hgv))


WD_TERMS = ("wd_sin1", "wd_cos1", "wd_sin2", "wd_cos2")


@dataclass(frozen=True)
class FeatureSpec:
    """Which covariates enter the design and in what order.

    Defaults reproduce the 52-covariate layout: 7 traffic, 18 composite,
    15 meteorological and 12 lagged terms. ``declared_m``, when given, is
    checked against the composition.
    """

    fourier_orders: tuple[int, int, int] = (3, 2, 2)
    wd_order: int = 2
    lag_count: int = 4
    pollutants_lagged: tuple[str, ...] = POLLUTANTS
    traffic_linear: tuple[str, ...] = ("tf_ldv", "tf_hgv", "ts_ldv", "ts_hgv")
    include_traffic_regime: bool = True
    met_linear: tuple[str, ...] = ("rh", "sr", "ws", "temp")
    interaction_set: tuple[str, ...] = ("rh", "sr", "temp") + WD_TERMS
    squared_terms: tuple[str, ...] = ("rh", "sr", "temp", "ws")
    declared_m: int | None = None

    def __post_init__(self):
        for name in ("fourier_orders", "pollutants_lagged", "traffic_linear", "met_linear",
                     "interaction_set", "squared_terms"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if len(self.fourier_orders) != 3 or any(o < 0 for o in self.fourier_orders):
            raise FeatureSpecError("fourier_orders must be three non-negative integers (daily, weekly, yearly)")
        if not 0 <= self.wd_order <= 2:
            raise FeatureSpecError("wd_order must be 0, 1 or 2")
        if self.lag_count < 0:
            raise FeatureSpecError("lag_count must be >= 0")
        bad = set(self.pollutants_lagged) - set(POLLUTANTS)
        if bad:
            raise FeatureSpecError(f"unknown pollutants {sorted(bad)}")
        bad = set(self.traffic_linear) - {"tf_ldv", "tf_hgv", "ts_ldv", "ts_hgv"}
        if bad:
            raise FeatureSpecError(f"unknown traffic variables {sorted(bad)}")
        met = {"rh", "sr", "ws", "temp"}
        bad = set(self.met_linear) - met
        if bad:
            raise FeatureSpecError(f"unknown meteorological variables {sorted(bad)}")
        wd_available = set(WD_TERMS[: 2 * self.wd_order])
        bad = set(self.interaction_set) - (met - {"ws"}) - wd_available
        if bad:
            raise FeatureSpecError(f"interaction partners not available: {sorted(bad)}")
        bad = set(self.squared_terms) - met
        if bad:
            raise FeatureSpecError(f"unknown squared terms {sorted(bad)}")
        if self.declared_m is not None and self.declared_m != self.m:
            raise FeatureSpecError(
                f"covariate count mismatch: spec composition gives m={self.m} "
                f"({self.composition()}) but declared_m={self.declared_m}"
            )

    def traffic_names(self):
        names = list(self.traffic_linear)
        if self.include_traffic_regime:
            names += ["regime_free", "regime_busy", "regime_congested"]
        return names

    def composite_names(self):
        names = []
        for cycle, order in zip(("daily", "weekly", "yearly"), self.fourier_orders):
            for k in range(1, order + 1):
                names += [f"{cycle}_sin{k}", f"{cycle}_cos{k}"]
        return names + list(WD_TERMS[: 2 * self.wd_order])

    def met_names(self):
        return (list(self.met_linear)
                + [f"ws_x_{v}" for v in self.interaction_set]
                + [f"{v}_sq" for v in self.squared_terms])

    def lag_names(self):
        return [f"{p}_lag{j}" for p in self.pollutants_lagged for j in range(1, self.lag_count + 1)]

    def covariate_names(self):
        return self.traffic_names() + self.composite_names() + self.met_names() + self.lag_names()

    def composition(self):
        return {
            "traffic": len(self.traffic_names()),
            "composite": len(self.composite_names()),
            "meteorological": len(self.met_names()),
            "lagged": len(self.lag_names()),
        }

    @property
    def m(self):
        return sum(self.composition().values())

    def to_dict(self):
        d = asdict(self)
        d["fourier_orders"] = dict(zip(("daily", "weekly", "yearly"), self.fourier_orders))
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        fo = d.get("fourier_orders")
        if isinstance(fo, dict):
            unknown = set(fo) - {"daily", "weekly", "yearly"}
            if unknown:
                raise FeatureSpecError(f"unknown Fourier cycles {sorted(unknown)}")
            defaults = dict(zip(("daily", "weekly", "yearly"), cls.fourier_orders))
            defaults.update(fo)
            d["fourier_orders"] = (defaults["daily"], defaults["weekly"], defaults["yearly"])
        names = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(d) - names
        if unknown:
            raise FeatureSpecError(f"unknown feature_spec keys {sorted(unknown)}")
        return cls(**d)


def _phase_seconds(timestamp: datetime, epoch: datetime, period: int):
    delta = timestamp - epoch
    whole = delta.days * 86_400 + delta.seconds
    return ((whole % period) + delta.microseconds * 1e-6) / period


def fourier_features(timestamp, spec: FeatureSpec = FeatureSpec()):
    """Seasonal sin/cos terms for one timestamp (wind direction excluded)."""
    out = []
    for cycle, order in zip(("daily", "weekly", "yearly"), spec.fourier_orders):
        epoch = _YEAR_EPOCH if cycle == "yearly" else _WEEK_EPOCH
        phi = _phase_seconds(timestamp, epoch, PERIOD_SECONDS[cycle])
        for k in range(1, order + 1):
            angle = 2.0 * math.pi * k * phi
            out += [math.sin(angle), math.cos(angle)]
    return np.array(out)


def _seasonal_columns(timestamps, spec):
    cols = {}
    for cycle, order in zip(("daily", "weekly", "yearly"), spec.fourier_orders):
        if order == 0:
            continue
        epoch = _YEAR_EPOCH if cycle == "yearly" else _WEEK_EPOCH
        phi = np.array([_phase_seconds(t, epoch, PERIOD_SECONDS[cycle]) for t in timestamps])
        for k in range(1, order + 1):
            angle = 2.0 * np.pi * k * phi
            cols[f"{cycle}_sin{k}"] = np.sin(angle)
            cols[f"{cycle}_cos{k}"] = np.cos(angle)
    return cols


def traffic_columns(tf_ldv, tf_hgv, ts_ldv, ts_hgv, spec: FeatureSpec):
    """Traffic block of the design (regime contrasts against 'quiet')."""
    raw = {"tf_ldv": tf_ldv, "tf_hgv": tf_hgv, "ts_ldv": ts_ldv, "ts_hgv": ts_hgv}
    cols = {name: np.asarray(raw[name], dtype=float) for name in spec.traffic_linear}
    if spec.include_traffic_regime:
        codes = regime_codes(np.asarray(tf_ldv, float) + np.asarray(tf_hgv, float),
                             average_speed(tf_ldv, tf_hgv, ts_ldv, ts_hgv))
        missing = codes < 0
        for level, name in ((1, "regime_free"), (2, "regime_busy"), (3, "regime_congested")):
            cols[name] = np.where(missing, np.nan, (codes == level).astype(float))
    return cols


def _record_columns(records):
    arrays = {name: np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in records],
                             dtype=float) for name in NUMERIC_COLUMNS}
    return arrays


def covariate_frame(records, spec: FeatureSpec, lag_source=None):
    """All covariate columns for every record (NaN where not computable).

    ``lag_source`` optionally overrides the pollutant series used for lags
    (dict pollutant -> array aligned with ``records``).
    """
    if not records:
        raise EmptyDesignError("no records")
    timestamps = [r.timestamp for r in records]
    x = _record_columns(records)
    cols = {}
    cols.update(traffic_columns(x["tf_ldv"], x["tf_hgv"], x["ts_ldv"], x["ts_hgv"], spec))
    cols.update(_seasonal_columns(timestamps, spec))
    wd = np.deg2rad(x["wd"])
    for k in range(1, spec.wd_order + 1):
        cols[f"wd_sin{k}"] = np.sin(k * wd)
        cols[f"wd_cos{k}"] = np.cos(k * wd)
    for name in spec.met_linear:
        cols[name] = x[name]
    for partner in spec.interaction_set:
        other = cols[partner] if partner.startswith("wd_") else x[partner]
        cols[f"ws_x_{partner}"] = x["ws"] * other
    for name in spec.squared_terms:
        cols[f"{name}_sq"] = x[name] ** 2
    if spec.lag_count:
        offsets = (np.array([(t - timestamps[0]) // GRID for t in timestamps]))
        if any((t - timestamps[0]) % GRID for t in timestamps):
            raise IngestError("timestamps are not on the 15-minute grid")
        position = np.full(offsets[-1] + 1, -1, dtype=np.int64)
        position[offsets] = np.arange(len(records))
        for pol in spec.pollutants_lagged:
            series = x[pol] if lag_source is None or pol not in lag_source else np.asarray(lag_source[pol], float)
            for j in range(1, spec.lag_count + 1):
                src = offsets - j
                idx = np.where(src >= 0, position[np.maximum(src, 0)], -1)
                cols[f"{pol}_lag{j}"] = np.where(idx >= 0, series[np.maximum(idx, 0)], np.nan)
    names = spec.covariate_names()
    matrix = np.column_stack([np.ones(len(records))] + [cols[n] for n in names])
    return matrix, x


@dataclass(frozen=True)
class DesignRow:
    timestamp: datetime
    response: float
    c_tilde: np.ndarray
    exceeds: bool
    exceedance: float | None


class DesignMatrix(Sequence):
    """Columnar design with row access returning :class:`DesignRow`.

    ``C`` is the raw (unstandardized) extended covariate matrix with a
    leading column of ones.
    """

    def __init__(self, timestamps, response, C, names, u, target, spec, aux=None):
        self.timestamps = list(timestamps)
        self.response = np.asarray(response, dtype=float)
        self.C = np.asarray(C, dtype=float)
        self.names = tuple(names)
        self.u = float(u)
        self.target = target
        self.spec = spec
        self.aux = aux or {}
        if self.C.shape != (len(self.response), len(self.names) + 1):
            raise ValueError("design shape does not match names/response")

    @property
    def m(self):
        return len(self.names)

    @property
    def exceeds(self):
        return self.response > self.u

    @property
    def excess(self):
        """Response minus threshold, zero for non-exceedances."""
        return np.where(self.exceeds, self.response - self.u, 0.0)

    def __len__(self):
        return len(self.response)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.subset(np.arange(len(self))[i])
        y = float(self.response[i])
        ex = y > self.u
        return DesignRow(self.timestamps[i], y, self.C[i].copy(), ex, y - self.u if ex else None)

    def column(self, name):
        return self.names.index(name) + 1

    def subset(self, index):
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return DesignMatrix(
            [self.timestamps[i] for i in index], self.response[index], self.C[index],
            self.names, self.u, self.target, self.spec,
            {k: v[index] for k, v in self.aux.items()},
        )

    def with_threshold(self, u):
        return DesignMatrix(self.timestamps, self.response, self.C, self.names, u, self.target, self.spec, self.aux)


def build_design_matrix(records, target_pollutant, u, spec: FeatureSpec = FeatureSpec()) -> DesignMatrix:
    """Assemble complete-case design rows for ``target_pollutant`` at threshold ``u``."""
    if target_pollutant not in POLLUTANTS:
        raise ValueError(f"target pollutant must be one of {POLLUTANTS}")
    if not math.isfinite(u):
        raise ValueError("threshold must be finite")
    if spec.declared_m is not None and spec.declared_m != spec.m:
        raise FeatureSpecError(f"covariate count mismatch: {spec.m} != declared {spec.declared_m}")
    matrix, raw = covariate_frame(records, spec)
    response = raw[target_pollutant]
    keep = ~np.isnan(response) & ~np.isnan(matrix).any(axis=1)
    if not keep.any():
        raise EmptyDesignError("every row was dropped for missing response or covariates")
    idx = np.flatnonzero(keep)
    aux = {name: raw[name][idx] for name in NUMERIC_COLUMNS}
    return DesignMatrix(
        [records[i].timestamp for i in idx], response[idx], matrix[idx],
        spec.covariate_names(), u, target_pollutant, spec, aux,
    )


def empirical_quantile_threshold(values, q):
    """The ceil(q n)-th order statistic of ``values`` (no interpolation)."""
    arr = np.asarray([v for v in values if v is not None], dtype=float)
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        raise ValueError("empirical quantile of an empty sample")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    k = max(1, math.ceil(q * arr.size))
    return float(np.partition(arr, k - 1)[k - 1])


@dataclass(frozen=True)
class Standardizer:
    """Centre/scale map for the non-intercept columns of a design."""

    mean: np.ndarray
    scale: np.ndarray
    names: tuple[str, ...] = field(default=())

    @classmethod
    def fit(cls, C, names=()):
        X = np.asarray(C, dtype=float)[:, 1:]
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale, tuple(names))

    @classmethod
    def identity(cls, m, names=()):
        return cls(np.zeros(m), np.ones(m), tuple(names))

    def transform(self, C):
        C = np.asarray(C, dtype=float)
        out = np.empty_like(C)
        out[:, 0] = 1.0
        out[:, 1:] = (C[:, 1:] - self.mean) / self.scale
        return out

    def to_raw_coefficients(self, coef):
        """Coefficients acting on raw covariates for a standardized-scale vector."""
        coef = np.asarray(coef, dtype=float)
        raw = np.empty_like(coef)
        raw[..., 1:] = coef[..., 1:] / self.scale
        raw[..., 0] = coef[..., 0] - np.sum(coef[..., 1:] * self.mean / self.scale, axis=-1)
        return raw

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist(), "names": list(self.names)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], float), np.asarray(d["scale"], float), tuple(d.get("names", ())))
