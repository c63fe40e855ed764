"""Command-line front end.

Every command reads one YAML run config. Outputs land in the output
directory as CSV/JSON, written atomically. Failures print a single JSON
line ``{"error": ..., "message": ...}`` to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .features import build_design_matrix, ingest_csv, write_csv
from .inference import comparison, crossval, diagnostics, simulation
from .io import atomic_write_csv, atomic_write_json
from .link import ModelKind
from .pipeline import attach, fit_design, resolve_threshold
from .sampler import PosteriorSampleSet, inclusion_probabilities, summarize
from .synth import generate_records

log = logging.getLogger("nspot")

# Independent random streams per command, derived from the run seed.
STREAM = {"diagnose": 1, "return-levels": 2, "scenario": 3, "compare": 4}


class MissingArtifactError(FileNotFoundError):
    pass


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _rng(cfg, command):
    return np.random.default_rng([cfg.chain.seed, STREAM[command]])


def _kind(cfg, args):
    return ModelKind.parse(getattr(args, "model", None) or cfg.chain.model_kind)


def load_design(cfg: RunConfig, threshold=None):
    path = cfg.data_file
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    records = ingest_csv(path)
    if not records:
        raise ValueError(f"data file has no records: {path}")
    responses = [getattr(r, cfg.target_pollutant) for r in records]
    if threshold is None:
        threshold = resolve_threshold(responses, cfg.threshold, cfg.threshold_quantile)
    return build_design_matrix(records, cfg.target_pollutant, threshold, cfg.feature_spec)


def _posterior_paths(out, kind):
    return out / f"posterior_{kind.label}.csv", out / f"posterior_{kind.label}.json"


def load_fitted(cfg: RunConfig, kind):
    csv_path, json_path = _posterior_paths(cfg.output_path, kind)
    for p in (csv_path, json_path):
        if not p.exists():
            raise MissingArtifactError(f"missing posterior artifact {p}; run `nspot fit --model {kind.label}` first")
    samples = PosteriorSampleSet.read(csv_path, json_path)
    if ModelKind.parse(samples.kind) is not kind:
        raise ValueError(f"{csv_path} holds a {samples.kind} posterior, expected {kind.label}")
    if samples.meta.get("data_sha256") != _sha256(cfg.data_file):
        raise ValueError(f"posterior {csv_path} was fitted on different data than {cfg.data_file}")
    design = load_design(cfg, threshold=samples.meta["threshold"])
    return attach(samples, design)


def cmd_synth(cfg: RunConfig, args):
    records, truth = generate_records(cfg.synth, cfg.target_pollutant, cfg.feature_spec, cfg.chain.seed)
    out = cfg.output_path
    out.mkdir(parents=True, exist_ok=True)
    target = out / cfg.synth.output_name
    tmp = target.with_name(f".{target.name}.tmp")
    write_csv(tmp, records)
    tmp.replace(target)
    truth["feature_spec"] = cfg.feature_spec.to_dict()
    atomic_write_json(out / "truth.json", truth)
    return {"data": str(target), "rows": len(records)}


def _coefficient_rows(fm):
    s = fm.samples
    eff = s.effective()
    p = s.p
    nblk = eff.shape[1] // p
    raw = np.concatenate([fm.standardizer.to_raw_coefficients(eff[:, b * p:(b + 1) * p]) for b in range(nblk)],
                         axis=1)
    std_sum, raw_sum = summarize(eff), summarize(raw)
    incl = inclusion_probabilities(s) if s.selection else None
    labels = ["intercept"] + list(s.covariate_names)
    rows = []
    for i, name in enumerate(s.coefficient_names):
        j = i % p
        rows.append([
            name, labels[j],
            float(std_sum.median[i]), float(std_sum.lower[i]), float(std_sum.upper[i]),
            float(raw_sum.median[i]), float(raw_sum.lower[i]), float(raw_sum.upper[i]),
            "" if incl is None or j == 0 else float(incl[j - 1]),
        ])
    header = ["coefficient", "covariate", "median", "lower", "upper",
              "median_raw", "lower_raw", "upper_raw", "inclusion_probability"]
    return header, rows


def cmd_fit(cfg: RunConfig, args):
    kind = _kind(cfg, args)
    design = load_design(cfg)
    chain = dataclasses.replace(cfg.chain, model_kind=kind.label)
    log.info("fitting %s on %d rows (%d exceedances of u=%.4g)", kind.label, len(design),
             int(design.exceeds.sum()), design.u)
    fm = fit_design(design, chain)
    fm.samples.meta["data_sha256"] = _sha256(cfg.data_file)
    fm.samples.meta["feature_spec"] = cfg.feature_spec.to_dict()
    out = cfg.output_path
    csv_path, json_path = _posterior_paths(out, kind)
    fm.samples.write(csv_path, json_path)
    header, rows = _coefficient_rows(fm)
    atomic_write_csv(out / f"coefficients_{kind.label}.csv", header, rows)
    return {"posterior": str(csv_path), "draws": fm.samples.n_draws,
            "acceptance_rate": fm.samples.acceptance_rate}


def _horizon_levels(cfg_rl):
    items = [(simulation.horizon_to_p(h), float(h)) for h in cfg_rl.horizons_years]
    items += [(float(p), None) for p in cfg_rl.p]
    return items


def _conditional_table(fm, items, level):
    """Conditional levels at the average covariate vector (standardized origin)."""
    c0 = np.zeros(fm.samples.p)
    c0[0] = 1.0
    out = []
    for p, h in items:
        est = simulation.posterior_conditional_return_level(fm.samples.effective(), fm.kind, c0, fm.design.u, p,
                                                            level)
        est = dataclasses.replace(est, horizon_years=h)
        out.append(est.to_dict())
    return out


def cmd_diagnose(cfg: RunConfig, args):
    kind = _kind(cfg, args)
    fm = load_fitted(cfg, kind)
    link = fm.link()
    diag = diagnostics.fit_diagnostics(fm.design, link)
    d = fm.design
    exc = d.exceeds
    excess = d.response[exc] - d.u
    q95 = d.u + link.quantile(d.C[exc], 0.05)
    qq = diagnostics.qq_envelope(excess, d.C[exc], link, _rng(cfg, "diagnose"), cfg.diagnostics.qq_replicates,
                                 cfg.diagnostics.level)
    out = cfg.output_path
    stamps = [t.isoformat() for t, e in zip(d.timestamps, exc) if e]
    atomic_write_csv(out / f"pit_{kind.label}.csv", ["timestamp", "excess", "pit", "conditional_q95"],
                     zip(stamps, excess.tolist(), diag.pit_values.tolist(), q95.tolist()))
    atomic_write_csv(out / f"qq_{kind.label}.csv", ["rank", "observed", "simulated_median", "lower", "upper"],
                     zip(qq["rank"].tolist(), qq["observed"].tolist(), qq["simulated_median"].tolist(),
                         qq["lower"].tolist(), qq["upper"].tolist()))
    summary = {"model_kind": kind.label, "threshold": d.u, **diag.to_dict(),
               "conditional_return_levels": _conditional_table(fm, _horizon_levels(cfg.return_levels),
                                                               cfg.return_levels.level)}
    atomic_write_json(out / f"diagnostics_{kind.label}.json", summary)
    return {"ks_p_value": diag.ks_p_value, "misclassification_rate": diag.misclassification_rate}


def cmd_select(cfg: RunConfig, args):
    kind = _kind(cfg, args)
    fm = load_fitted(cfg, kind)
    probs = inclusion_probabilities(fm.samples)
    atomic_write_csv(cfg.output_path / f"inclusion_{kind.label}.csv", ["covariate", "inclusion_probability"],
                     zip(fm.samples.covariate_names, probs.tolist()))
    return {"covariates": len(probs)}


def _replicate_draws(samples, n):
    """Evenly spaced draws first, then the rest as spares for invalid paths."""
    eff = samples.effective()
    idx = np.unique(np.linspace(0, len(eff) - 1, min(n, len(eff))).round().astype(int))
    spare = np.setdiff1d(np.arange(len(eff)), idx)
    return eff[np.concatenate([idx, spare])], len(idx)


def cmd_return_levels(cfg: RunConfig, args):
    kind = _kind(cfg, args)
    fm = load_fitted(cfg, kind)
    rl = cfg.return_levels
    items = _horizon_levels(rl)
    traj = simulation.build_trajectory(fm.design, fm.standardizer, rl.pool)
    draws, n_rep = _replicate_draws(fm.samples, rl.n_replicates)
    estimates = simulation.simulate_return_levels(
        traj, kind, draws, fm.design.u, [p for p, _ in items], _rng(cfg, "return-levels"),
        rl.simulation_length, [h for _, h in items], rl.level, n_replicates=n_rep)
    out = cfg.output_path
    table = [e.to_dict() for e in estimates]
    for row in table:
        row.pop("replicate_levels")
    payload = {"model_kind": kind.label, "threshold": fm.design.u, "marginal": table}
    if rl.conditional:
        payload["conditional"] = _conditional_table(fm, items, rl.level)
    atomic_write_json(out / f"return_levels_{kind.label}.json", payload)
    atomic_write_csv(out / f"return_levels_{kind.label}.csv", ["kind", "p", "horizon_years", "level", "lower", "upper"],
                     [[r["kind"], r["p"], r["horizon_years"], r["level"], r["lower"], r["upper"]]
                      for r in table + payload.get("conditional", [])])
    atomic_write_csv(out / f"return_level_draws_{kind.label}.csv", ["replicate", "p", "horizon_years", "level"],
                     [[i, e.p, e.horizon_years, v] for e in estimates
                      for i, v in enumerate(e.details["replicate_levels"])])
    return {"levels": [(r["horizon_years"] or r["p"], r["level"]) for r in table]}


def cmd_compare(cfg: RunConfig, args):
    fm1 = load_fitted(cfg, ModelKind.MODEL1)
    fm2 = load_fitted(cfg, ModelKind.MODEL2)
    if fm1.design.u != fm2.design.u:
        raise ValueError("Model I and Model II posteriors were fitted at different thresholds")
    data = fm2.data
    bf = comparison.bayes_log_factor(fm1.samples, fm2.samples, data, cfg.comparison.method,
                                     cfg.comparison.truncate, _rng(cfg, "compare"))
    dic1 = comparison.dic(fm1.samples, fm1.data)
    dic2 = comparison.dic(fm2.samples, fm2.data)
    payload = {"threshold": fm1.design.u, "bayes_factor": bf.to_dict(),
               "dic": {"model1": dic1.to_dict(), "model2": dic2.to_dict()},
               "dic_prefers": "model2" if dic2.dic < dic1.dic else "model1"}
    atomic_write_json(cfg.output_path / "compare.json", payload)
    return {"beta_21": bf.beta_21, "category": bf.category}


def cmd_scenario(cfg: RunConfig, args):
    kind = _kind(cfg, args)
    fm = load_fitted(cfg, kind)
    sc = cfg.scenario
    items = [(simulation.horizon_to_p(h), float(h)) for h in sc.horizons_years]
    seed = int(np.random.SeedSequence([cfg.chain.seed, STREAM["scenario"]]).generate_state(1)[0])
    draws, n_rep = _replicate_draws(fm.samples, sc.n_replicates)
    res = simulation.scenario_reduced_flow(
        fm.design, fm.standardizer, kind, draws, [p for p, _ in items], sc.reduction, seed,
        sc.simulation_length, [h for _, h in items], sc.lag_resampling, sc.band_halfwidth, sc.level,
        n_replicates=n_rep)

    def table(estimates):
        return [{k: v for k, v in e.to_dict().items() if k != "replicate_levels"} for e in estimates]

    payload = {"model_kind": kind.label, "reduction": sc.reduction, "lag_resampling": sc.lag_resampling,
               "rows_with_empty_pool": res["rows_with_empty_pool"],
               "baseline": table(res["baseline"]), "scenario": table(res["scenario"])}
    atomic_write_json(cfg.output_path / f"scenario_{kind.label}.json", payload)
    return {"baseline": [e.level for e in res["baseline"]], "scenario": [e.level for e in res["scenario"]]}


def cmd_cross_validate(cfg: RunConfig, args):
    kind = _kind(cfg, args)
    design = load_design(cfg)
    chain = dataclasses.replace(cfg.chain, model_kind=kind.label)
    cv = cfg.cross_validation
    res = crossval.cross_validate(design, chain, fit_design, cfg.threshold, cfg.threshold_quantile,
                                  cv.train_fraction, cv.min_exceedances)
    payload = {"model_kind": kind.label, **res.to_dict()}
    atomic_write_json(cfg.output_path / f"cross_validation_{kind.label}.json", payload)
    return {"validation_misclassification": res.validation.misclassification_rate}


COMMANDS = {
    "synth": (cmd_synth, "generate a seeded synthetic dataset from known coefficients"),
    "fit": (cmd_fit, "run the MCMC sampler and write posterior draws"),
    "diagnose": (cmd_diagnose, "PIT/KS, misclassification and QQ data for a fitted model"),
    "select": (cmd_select, "posterior inclusion probabilities"),
    "return-levels": (cmd_return_levels, "marginal and conditional return levels"),
    "compare": (cmd_compare, "Bayes factor and DIC for Model I vs Model II"),
    "scenario": (cmd_scenario, "return levels under reduced traffic flow"),
    "cross-validate": (cmd_cross_validate, "within-month train/validation assessment"),
}
MODEL_COMMANDS = {"fit", "diagnose", "select", "return-levels", "scenario", "cross-validate"}


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="YAML run config")
    parser.add_argument("--seed", type=int, default=default, help="override chain.seed")
    parser.add_argument("--output", default=default, help="override output_dir")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser():
    parser = argparse.ArgumentParser(prog="nspot", description="Bayesian covariate peaks-over-threshold modelling")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        if name in MODEL_COMMANDS:
            p.add_argument("--model", choices=["model1", "model2"], help="model kind (default: chain.model_kind)")
    return parser


def resolve_config(args):
    if args.config is None:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.chain = dataclasses.replace(cfg.chain, seed=args.seed)
    if args.output is not None:
        cfg.output_dir = str(Path(args.output).resolve()) if not Path(args.output).is_absolute() else args.output
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        result = COMMANDS[args.command][0](cfg, args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one JSON line
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "command": args.command,
                                     "message": str(exc)}) + "\n")
        return 1
    log.info("%s: %s", args.command, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
