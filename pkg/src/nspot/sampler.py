"""Random-walk Metropolis-Hastings with indicator-based variable selection.

Priors are flat, so the acceptance ratio is the likelihood ratio. The
proposal is a Gaussian random walk ``theta' = theta + lam * L z`` over the
free coordinates, where ``lam`` is tuned in windows during burn-in and
``L`` is either diagonal (the initial scales) or, with ``adapt_shape``,
re-estimated from burn-in history. Both are frozen once burn-in ends.

Indicators ``I_1..I_m`` switch covariates on and off across every
coefficient block at once; intercepts are always included. Masked
coefficients keep their last values and are not proposed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .io import atomic_write_csv, atomic_write_json, read_json
from .link import FitData, ModelKind

SELECTION_SCHEMES = ("literal", "flip")


class ChainDivergedError(RuntimeError):
    """A coordinate escaped beyond the divergence guard."""

    def __init__(self, iteration, coordinate, value):
        self.iteration = iteration
        self.coordinate = coordinate
        self.value = value
        super().__init__(
            f"chain diverged at iteration {iteration}: coordinate {coordinate} reached {value:.4g}; "
            "the posterior may be improper for this design"
        )


class SelectionDisabledError(ValueError):
    pass


@dataclass
class ChainConfig:
    n_iterations: int = 200_000
    burn_in: int = 50_000
    thin: int = 100
    proposal_scales: float | tuple = 0.01
    target_accept_band: tuple = (0.30, 0.70)
    seed: int = 0
    variable_selection: bool = False
    selection_scheme: str = "literal"
    selection_start: int | None = None
    model_kind: str = "model2"
    n_chains: int = 1
    beta_intercept_only: bool = True
    pin_gamma_intercept: bool = True
    tune_window: int = 500
    tune_factors: tuple = (1.25, 0.8)
    adapt_shape: bool = True
    adapt_every: int = 5_000
    divergence_guard: float = 1e6
    init_jitter: float = 0.05

    def __post_init__(self):
        if isinstance(self.proposal_scales, (list, tuple, np.ndarray)):
            self.proposal_scales = tuple(float(s) for s in self.proposal_scales)
        else:
            self.proposal_scales = float(self.proposal_scales)
        self.target_accept_band = tuple(float(b) for b in self.target_accept_band)
        self.tune_factors = tuple(float(f) for f in self.tune_factors)
        self.model_kind = ModelKind.parse(self.model_kind).label
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be positive")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        lo, hi = self.target_accept_band
        if not 0.0 < lo < hi < 1.0:
            raise ValueError("target_accept_band must satisfy 0 < lo < hi < 1")
        up, down = self.tune_factors
        if not (up > 1.0 and 0.0 < down < 1.0):
            raise ValueError("tune_factors must be (factor > 1, factor in (0, 1))")
        scales = np.atleast_1d(self.proposal_scales)
        if not np.all(scales > 0):
            raise ValueError("proposal_scales must be positive")
        if self.selection_scheme not in SELECTION_SCHEMES:
            raise ValueError(f"selection_scheme must be one of {SELECTION_SCHEMES}")
        if self.n_chains < 1 or self.tune_window < 1 or self.adapt_every < 1:
            raise ValueError("n_chains, tune_window and adapt_every must be positive")
        if self.selection_start is not None and not 0 <= self.selection_start <= self.burn_in:
            raise ValueError("selection_start must lie in [0, burn_in]")

    @property
    def kind(self):
        return ModelKind.parse(self.model_kind)

    @property
    def first_selection_step(self):
        """Iteration at which indicator moves begin.

        Masked coefficients keep their values, so a flip that excludes a
        covariate while its coefficients are still far from the bulk can
        leave it stuck out. The flip scheme therefore waits for half the
        burn-in by default; the literal scheme starts immediately.
        """
        if self.selection_start is not None:
            return self.selection_start
        return self.burn_in // 2 if self.selection_scheme == "flip" else 0

    @property
    def n_draws(self):
        return (self.n_iterations - self.burn_in) // self.thin

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown chain keys {sorted(unknown)}")
        return cls(**d)


class ModelTarget:
    """Log-likelihood of Model I or II over prepared data (flat prior)."""

    def __init__(self, kind, data: FitData, beta_intercept_only=True, pin_gamma_intercept=True,
                 covariate_names=None, backend=None, screen=True):
        self.kind = ModelKind.parse(kind)
        self.data = data
        self.screen = screen
        self.p = data.p
        self.m = self.p - 1
        self.backend = backend
        nblk = len(self.kind.blocks)
        self.dim = nblk * self.p
        self.covariate_index = np.tile(np.arange(self.p), nblk)
        fixed = np.zeros(self.dim, dtype=bool)
        if self.kind is ModelKind.MODEL2:
            if beta_intercept_only:
                fixed[self.p + 1:2 * self.p] = True
            if pin_gamma_intercept:
                fixed[2 * self.p] = True
        self.fixed = fixed
        self.coefficient_names = [f"{b}_{j}" for b in self.kind.blocks for j in range(self.p)]
        self.covariate_names = list(covariate_names) if covariate_names is not None else [
            f"c{j}" for j in range(1, self.p)]
        self.label = self.kind.label

    def initial(self):
        theta = np.zeros(self.dim)
        if self.kind is ModelKind.MODEL2:
            theta[0] = 1.0
        return theta

    def log_density(self, theta):
        return self.data.loglik(self.kind, theta, self.backend)

    @property
    def rate_slice(self):
        """Position of the rate block, the last one in both layouts."""
        return slice(self.dim - self.p, self.dim)

    def tail_log_density(self, theta):
        return self.data.tail_loglik(self.kind, theta, self.backend)

    def rate_log_density(self, r, grad=None):
        return self.data.rate_loglik(r, grad, self.backend)


class FunctionTarget:
    """Arbitrary log density on R^d (no covariates, no selection)."""

    def __init__(self, log_density, dim, initial=None, label="custom"):
        self._f = log_density
        self.dim = int(dim)
        self.m = 0
        self.covariate_index = np.zeros(self.dim, dtype=np.int64)
        self.fixed = np.zeros(self.dim, dtype=bool)
        self.coefficient_names = [f"x_{j}" for j in range(self.dim)]
        self.covariate_names = []
        self._initial = np.zeros(self.dim) if initial is None else np.asarray(initial, float).copy()
        self.label = label

    def initial(self):
        return self._initial.copy()

    def log_density(self, theta):
        value = float(self._f(theta))
        return value if math.isfinite(value) else -math.inf


@dataclass
class ChainState:
    theta: np.ndarray
    indicators: np.ndarray
    log_lik: float


def coordinate_mask(target, indicators):
    """Boolean mask of coordinates whose covariate is switched on."""
    extended = np.concatenate([[True], np.asarray(indicators, dtype=bool)])
    return extended[target.covariate_index]


def effective_theta(target, theta, indicators):
    return np.where(coordinate_mask(target, indicators), theta, 0.0)


def init_state(model_kind, m, target=None) -> ChainState:
    """Starting point: all zeros, except the Model II alpha intercept set to 1."""
    kind = ModelKind.parse(model_kind)
    p = m + 1
    theta = np.zeros(len(kind.blocks) * p)
    if kind is ModelKind.MODEL2:
        theta[0] = 1.0
    indicators = np.ones(m, dtype=bool)
    log_lik = math.nan if target is None else target.log_density(theta)
    return ChainState(theta, indicators, log_lik)


def accept_move(log_ratio, uniform):
    """Metropolis rule: accept when ``U < exp(log_ratio)``."""
    if not log_ratio == log_ratio:  # NaN
        return False
    return log_ratio >= 0.0 or (uniform > 0.0 and math.log(uniform) < log_ratio)


@dataclass
class Proposal:
    """Random-walk proposal over the free coordinates ``free``."""

    free: np.ndarray
    chol: np.ndarray
    scale: float = 1.0

    @classmethod
    def diagonal(cls, free, scales):
        free = np.asarray(free)
        return cls(free, np.diag(np.broadcast_to(np.asarray(scales, dtype=float), free.shape)), 1.0)

    @property
    def scales(self):
        """Per-coordinate proposal standard deviations."""
        return self.scale * np.sqrt(np.sum(self.chol ** 2, axis=1))

    def step(self, z):
        return self.scale * (self.chol @ z)


def mh_step(state: ChainState, target, proposal: Proposal, random_source) -> ChainState:
    """One Metropolis-Hastings update of the active free coordinates."""
    z = random_source.standard_normal(len(proposal.free))
    uniform = random_source.random()
    theta_prop = state.theta.copy()
    active = coordinate_mask(target, state.indicators)[proposal.free]
    theta_prop[proposal.free] += np.where(active, proposal.step(z), 0.0)
    ll_prop = target.log_density(effective_theta(target, theta_prop, state.indicators))
    if accept_move(ll_prop - state.log_lik, uniform):
        return ChainState(theta_prop, state.indicators.copy(), ll_prop)
    return state


def tune_proposals(scales, accept_rate, band=(0.30, 0.70), factors=(1.25, 0.8)):
    """Window tuning: widen above the band, shrink below it, else keep."""
    lo, hi = band
    up, down = factors
    if accept_rate > hi:
        return scales * up
    if accept_rate < lo:
        return scales * down
    return scales


def resample_indicators(random_source, m):
    """Independent Bernoulli(1/2) inclusion indicators."""
    return random_source.random(m) < 0.5


def _initial_scales(scales, dim, free):
    """Starting proposal sds for the free coordinates.

    ``scales`` is a scalar, one value per coordinate, or one per free one.
    """
    scales = np.asarray(scales, dtype=float)
    if scales.ndim == 0:
        return np.full(len(free), float(scales))
    if len(scales) == dim:
        return scales[free].copy()
    if len(scales) == len(free):
        return scales.copy()
    raise ValueError(f"proposal_scales has length {len(scales)}; expected 1, {len(free)} or {dim}")


def _shape_from_history(history, d_free, base):
    cov = np.atleast_2d(np.cov(history, rowvar=False))
    diag = np.diag(cov).copy()
    # frozen or never-moved coordinates keep their base scale
    floor = (1e-3 * base) ** 2
    dead = diag <= floor
    cov[dead, :] = 0.0
    cov[:, dead] = 0.0
    cov[dead, dead] = base[dead] ** 2
    jitter = 1e-10 * max(float(np.mean(np.diag(cov))), 1e-300)
    for _ in range(8):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(d_free))
        except np.linalg.LinAlgError:
            jitter *= 100.0
    return np.diag(np.sqrt(np.diag(cov)))


@dataclass
class PosteriorSampleSet:
    """Thinned post-burn-in draws with bookkeeping.

    ``theta`` holds the raw (unmasked) coefficients; use
    :meth:`effective` for the masked values that enter the likelihood.
    """

    kind: str
    coefficient_names: list
    covariate_names: list
    theta: np.ndarray
    indicators: np.ndarray | None
    iterations: np.ndarray
    acceptance_rate: float
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return len(self.theta)

    @property
    def m(self):
        return len(self.covariate_names)

    @property
    def p(self):
        return self.m + 1

    @property
    def selection(self):
        return self.indicators is not None

    def effective(self):
        if self.indicators is None:
            return self.theta.copy()
        extended = np.concatenate([np.ones((self.n_draws, 1), dtype=bool), self.indicators], axis=1)
        nblk = self.theta.shape[1] // self.p
        return np.where(np.tile(extended, (1, nblk)), self.theta, 0.0)

    def block(self, name, effective=True):
        names = [c.split("_")[0] for c in self.coefficient_names[:: self.p]]
        i = names.index(name)
        source = self.effective() if effective else self.theta
        return source[:, i * self.p:(i + 1) * self.p]

    def chains(self):
        counts = self.meta.get("chain_draws", [self.n_draws])
        edges = np.cumsum([0] + list(counts))
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    def to_csv(self, path):
        header = ["iteration"] + list(self.coefficient_names)
        if self.indicators is not None:
            header += [f"I_{j}" for j in range(1, self.m + 1)]
        rows = []
        for i in range(self.n_draws):
            row = [int(self.iterations[i])] + [float(v) for v in self.theta[i]]
            if self.indicators is not None:
                row += [int(v) for v in self.indicators[i]]
            rows.append(row)
        atomic_write_csv(path, header, rows)

    def sidecar(self):
        return {
            "model_kind": self.kind,
            "coefficient_names": list(self.coefficient_names),
            "covariate_names": list(self.covariate_names),
            "acceptance_rate": self.acceptance_rate,
            "n_draws": self.n_draws,
            "variable_selection": self.selection,
            **self.meta,
        }

    def write(self, csv_path, json_path):
        self.to_csv(csv_path)
        atomic_write_json(json_path, self.sidecar())

    @classmethod
    def read(cls, csv_path, json_path):
        meta = read_json(json_path)
        with open(csv_path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            body = [row for row in reader if row]
        names = list(meta["coefficient_names"])
        cov_names = list(meta["covariate_names"])
        expected = ["iteration"] + names
        if meta.get("variable_selection"):
            expected += [f"I_{j}" for j in range(1, len(cov_names) + 1)]
        if header != expected:
            raise ValueError(f"{csv_path}: posterior columns do not match the sidecar {json_path}")
        arr = np.array(body, dtype=float).reshape(len(body), len(header))
        ncoef = len(names)
        indicators = arr[:, 1 + ncoef:].astype(bool) if meta.get("variable_selection") else None
        extra = {k: v for k, v in meta.items() if k not in (
            "model_kind", "coefficient_names", "covariate_names", "acceptance_rate", "n_draws",
            "variable_selection")}
        return cls(meta["model_kind"], names, cov_names, arr[:, 1:1 + ncoef], indicators,
                   arr[:, 0].astype(np.int64), float(meta["acceptance_rate"]), extra)


class _Screen:
    """Exact early rejection for targets whose log density is tail + rate.

    The rate part is concave in the rate coefficients, so its tangent plane
    at the current state bounds it from above. A proposal that fails the
    Metropolis test even against that bound is rejected without evaluating
    the rate part. Decisions are identical to the unscreened sampler; the
    margin absorbs rounding in the bound.
    """

    def __init__(self, target):
        self.target = target
        self.rs = target.rate_slice
        self.rate = math.nan
        self.grad = None
        self.skipped = 0

    def evaluate(self, eff):
        tail = self.target.tail_log_density(eff)
        if tail == -math.inf:
            return -math.inf, None
        return self._with_rate(tail, eff)

    def _with_rate(self, tail, eff):
        grad = np.empty(self.rs.stop - self.rs.start)
        rate = self.target.rate_log_density(eff[self.rs], grad)
        return tail + rate, (rate, grad)

    def keep(self, cache):
        self.rate, self.grad = cache

    def propose(self, eff, eff_new, log_lik, uniform):
        tail = self.target.tail_log_density(eff_new)
        if tail == -math.inf:
            return -math.inf, None
        bound = tail + self.rate + float(self.grad @ (eff_new[self.rs] - eff[self.rs])) - log_lik
        if uniform > 0.0 and math.log(uniform) >= bound + 1e-9 * (1.0 + abs(self.rate)):
            self.skipped += 1
            return -math.inf, None
        return self._with_rate(tail, eff_new)


def run_chain(config: ChainConfig, target, seed=None, initial=None) -> PosteriorSampleSet:
    """Run one chain; deterministic given ``seed`` (default ``config.seed``)."""
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    selection = config.variable_selection and target.m > 0
    flip = config.selection_scheme == "flip"
    select_from = config.first_selection_step
    m = target.m

    screen = _Screen(target) if getattr(target, "screen", False) else None

    def density(eff):
        if screen is None:
            return target.log_density(eff), None
        return screen.evaluate(eff)

    theta = target.initial() if initial is None else np.asarray(initial, dtype=float).copy()
    indicators = np.ones(m, dtype=bool)
    keep = coordinate_mask(target, indicators)
    eff = np.where(keep, theta, 0.0)
    ll, cache = density(eff)
    if not math.isfinite(ll):
        raise ValueError("initial state has zero likelihood; check the threshold and design")
    if screen is not None:
        screen.keep(cache)

    free = np.flatnonzero(~target.fixed)
    d_free = len(free)
    base = _initial_scales(config.proposal_scales, target.dim, free)
    proposal = Proposal.diagonal(free, base)

    n_iter, burn, thin = config.n_iterations, config.burn_in, config.thin
    window = config.tune_window
    n_out = (n_iter - burn) // thin
    out_theta = np.empty((n_out, target.dim))
    out_ind = np.empty((n_out, m), dtype=bool) if selection else None
    out_iter = np.empty(n_out, dtype=np.int64)
    stride = max(1, burn // 10_000)
    history = np.empty((burn // stride + 1, d_free)) if (config.adapt_shape and burn) else None
    n_hist = 0
    last_adapt = int(0.8 * burn)

    tuning_log, stuck_windows = [], []
    win_acc = 0
    post_acc = 0
    k = 0
    chunk = 4096
    z_buf = u_buf = ind_buf = None
    guard = config.divergence_guard

    for it in range(n_iter):
        pos = it % chunk
        if pos == 0:
            z_buf = rng.standard_normal((chunk, d_free))
            u_buf = rng.random((chunk, 2))
            if selection:
                ind_buf = (rng.random((chunk, m)) < 0.5) if not flip else rng.integers(0, m, chunk)

        if selection and it >= select_from:
            if flip:
                j = int(ind_buf[pos])
                cand = indicators.copy()
                cand[j] = not cand[j]
            else:
                cand = ind_buf[pos]
            cand_keep = coordinate_mask(target, cand)
            cand_eff = np.where(cand_keep, theta, 0.0)
            ll_c, cache = density(cand_eff)
            if flip:
                take = accept_move(ll_c - ll, u_buf[pos, 1])
            else:
                take = math.isfinite(ll_c)
            if take:
                indicators, keep, eff, ll = cand.copy(), cand_keep, cand_eff, ll_c
                if screen is not None:
                    screen.keep(cache)

        step = proposal.scale * (proposal.chol @ z_buf[pos])
        prop = theta.copy()
        if selection:
            prop[free] += np.where(keep[free], step, 0.0)
            eff_p = np.where(keep, prop, 0.0)
        else:
            prop[free] += step
            eff_p = prop
        if screen is None:
            ll_p, cache = target.log_density(eff_p), None
        else:
            ll_p, cache = screen.propose(eff, eff_p, ll, u_buf[pos, 0])
        if accept_move(ll_p - ll, u_buf[pos, 0]):
            worst = int(np.argmax(np.abs(prop)))
            if abs(prop[worst]) > guard:
                raise ChainDivergedError(it + 1, target.coefficient_names[worst], float(prop[worst]))
            theta, eff, ll = prop, eff_p, ll_p
            if screen is not None:
                screen.keep(cache)
            win_acc += 1
            if it >= burn:
                post_acc += 1

        done = it + 1
        if done <= burn:
            if history is not None and it % stride == 0:
                history[n_hist] = theta[free]
                n_hist += 1
            if done % window == 0:
                rate = win_acc / window
                new_scale = tune_proposals(proposal.scale, rate, config.target_accept_band, config.tune_factors)
                tuning_log.append({"iteration": done, "accept_rate": rate,
                                   "factor": new_scale / proposal.scale})
                proposal.scale = new_scale
                win_acc = 0
            if (history is not None and done % config.adapt_every == 0 and done <= last_adapt
                    and n_hist >= 50):
                recent = history[n_hist // 2:n_hist]
                proposal.chol = _shape_from_history(recent, d_free, base)
                proposal.scale = 2.38 / math.sqrt(max(d_free, 1))
                tuning_log.append({"iteration": done, "accept_rate": None, "factor": None,
                                   "shape_update": True})
            if done == burn:
                win_acc = 0
        else:
            if (done - burn) % window == 0:
                if win_acc == 0:
                    stuck_windows.append(done)
                win_acc = 0
            if (done - burn) % thin == 0:
                out_theta[k] = theta
                if selection:
                    out_ind[k] = indicators
                out_iter[k] = done
                k += 1

    post_iters = n_iter - burn
    meta = {
        "seed": int(seed),
        "chain_config": config.to_dict(),
        "proposal_scales": [float(s) for s in proposal.scales],
        "free_coordinates": [target.coefficient_names[i] for i in free],
        "tuning_log": tuning_log,
        "final_burn_in_accept_rate": tuning_log[-1]["accept_rate"] if tuning_log and
        tuning_log[-1]["accept_rate"] is not None else None,
        "stuck_windows": stuck_windows,
        "chain_draws": [n_out],
        "selection_scheme": config.selection_scheme if selection else None,
        "screened_rejections": screen.skipped if screen is not None else 0,
    }
    return PosteriorSampleSet(
        target.label, list(target.coefficient_names), list(target.covariate_names),
        out_theta, out_ind, out_iter, post_acc / post_iters, meta,
    )


def _jittered_start(target, rng, scale, attempts=200):
    base = target.initial()
    free = ~target.fixed
    for _ in range(attempts):
        cand = base.copy()
        cand[free] += scale * rng.standard_normal(int(free.sum()))
        if math.isfinite(target.log_density(cand)):
            return cand
    return base


def run_chains(config: ChainConfig, target) -> PosteriorSampleSet:
    """Independent chains from spawned seeds; draws are concatenated.

    Chain 0 starts from the standard initial state, the others from small
    random perturbations of it. With one chain this is :func:`run_chain`
    with ``config.seed``.
    """
    if config.n_chains == 1:
        return run_chain(config, target)
    seqs = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    runs = []
    for c, seq in enumerate(seqs):
        seed = int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
        init = None
        if c > 0:
            init = _jittered_start(target, np.random.default_rng(seq.spawn(1)[0]), config.init_jitter)
        runs.append(run_chain(config, target, seed=seed, initial=init))
    first = runs[0]
    theta = np.concatenate([r.theta for r in runs])
    ind = np.concatenate([r.indicators for r in runs]) if first.indicators is not None else None
    iters = np.concatenate([r.iterations for r in runs])
    acc = float(np.mean([r.acceptance_rate for r in runs]))
    meta = dict(first.meta)
    meta["seed"] = int(config.seed)
    meta["chain_seeds"] = [r.meta["seed"] for r in runs]
    meta["chain_draws"] = [r.n_draws for r in runs]
    meta["chain_acceptance_rates"] = [r.acceptance_rate for r in runs]
    meta["proposal_scales"] = [r.meta["proposal_scales"] for r in runs]
    meta["tuning_log"] = [r.meta["tuning_log"] for r in runs]
    meta["stuck_windows"] = [r.meta["stuck_windows"] for r in runs]
    meta["final_burn_in_accept_rate"] = [r.meta["final_burn_in_accept_rate"] for r in runs]
    out = PosteriorSampleSet(first.kind, first.coefficient_names, first.covariate_names,
                             theta, ind, iters, acc, meta)
    out.meta["gelman_rubin"] = dict(zip(first.coefficient_names,
                                        [None if not math.isfinite(v) else float(v)
                                         for v in gelman_rubin([r.theta for r in runs])]))
    return out


def gelman_rubin(chains):
    """Potential scale reduction factor per coordinate (NaN when constant)."""
    arrays = [np.atleast_2d(np.asarray(c, dtype=float)) for c in chains]
    n = min(len(a) for a in arrays)
    if len(arrays) < 2 or n < 2:
        raise ValueError("need at least two chains of length >= 2")
    x = np.stack([a[:n] for a in arrays])
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean(axis=0)
    B = n * means.var(axis=0, ddof=1)
    var_hat = (n - 1) / n * W + B / n
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(var_hat / W)


def inclusion_probabilities(samples: PosteriorSampleSet):
    if samples.indicators is None:
        raise SelectionDisabledError("variable selection was not enabled for this posterior")
    return samples.indicators.mean(axis=0)


@dataclass(frozen=True)
class PosteriorSummary:
    mean: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    values: np.ndarray


def summarize(values, level=0.95):
    values = np.asarray(values, dtype=float)
    tail = (1.0 - level) / 2.0
    return PosteriorSummary(values.mean(axis=0), np.median(values, axis=0),
                            np.quantile(values, tail, axis=0), np.quantile(values, 1.0 - tail, axis=0), values)


def model_average(samples: PosteriorSampleSet, functional, level=0.95):
    """Summary of a functional evaluated on every draw's effective coefficients.

    Each draw carries the model it visited through its indicators, so
    summarizing across draws weights models by posterior frequency.
    """
    eff = samples.effective()
    values = np.array([functional(row) for row in eff], dtype=float)
    return summarize(values, level)
