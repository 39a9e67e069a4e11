"""Command-line entry points: fit, simulate, diagnose, predict.

Configuration is a single JSON file; `--seed`, `--out` and `--threads`
override the matching config keys.  Exit codes: 0 success, 2 for
configuration or input errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .families import NumericalError, make_family, response_function
from .mcmc import Chain, ChainSettings, dic, run_chain, summarize
from .mle import fit_mle
from .model import (
    CoefficientBlock,
    ConfigError,
    DataBlock,
    ModelSpec,
    PredictorSpec,
    PriorSpec,
    predict,
)
from .diagnostics import ad_statistic, ci_width_ratio, qq_export, rqr
from . import experiments

__all__ = [
    "CsvSchema",
    "ResultBundle",
    "read_csv",
    "load_horseshoe_crabs",
    "cmd_fit",
    "cmd_simulate",
    "cmd_diagnose",
    "cmd_predict",
    "main",
    "CRABS_SHA256",
]

CRABS_SHA256 = "1da7d7d68d0415468443f925b30a819597dcdd5cf023d5d7688485d19df133c6"


# ---------------------------------------------------------------------------
# CSV ingestion


@dataclass(frozen=True)
class CsvSchema:
    response: str
    covariates: tuple[str, ...] = ()


def _parse_rows(rows: list[list[str]], label: str, schema: CsvSchema, threshold=None) -> DataBlock:
    if not rows:
        raise ConfigError(f"{label}: empty file")
    header = [h.strip() for h in rows[0]]
    needed = (schema.response,) + tuple(schema.covariates)
    for col in needed:
        if col not in header:
            raise ConfigError(f"{label}: missing column {col!r} (file has {header})")
    idx = {c: header.index(c) for c in needed}
    columns: dict[str, list[float]] = {c: [] for c in needed}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ConfigError(
                f"{label}: row {lineno} has {len(row)} fields, expected {len(header)}"
            )
        for c in needed:
            cell = row[idx[c]].strip()
            try:
                value = float(cell)
            except ValueError:
                raise ConfigError(
                    f"{label}: row {lineno}, column {c!r}: not a number: {cell!r}"
                ) from None
            if not np.isfinite(value):
                raise ConfigError(f"{label}: row {lineno}, column {c!r}: non-finite value")
            columns[c].append(value)
    y = np.asarray(columns[schema.response], dtype=float)
    cov = {c: np.asarray(columns[c], dtype=float) for c in schema.covariates}
    try:
        return DataBlock(y, cov, threshold=threshold)
    except ConfigError as exc:
        raise ConfigError(f"{label}: {exc}") from None


def read_csv(path, schema: CsvSchema, threshold: float | None = None) -> DataBlock:
    """Strict numeric CSV reader; errors carry row and column locations."""
    p = Path(path)
    try:
        with open(p, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except FileNotFoundError:
        raise ConfigError(f"no such file: {p}") from None
    return _parse_rows(rows, str(p), schema, threshold=threshold)


def load_horseshoe_crabs() -> DataBlock:
    """Bundled horseshoe-crab dataset (satellites ~ width + color), checksum-pinned."""
    ref = resources.files("softplusreg").joinpath("data/horseshoe_crabs.csv")
    raw = ref.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != CRABS_SHA256:
        raise ConfigError(f"bundled horseshoe-crab data failed its checksum ({digest})")
    rows = [row for row in csv.reader(io.StringIO(raw.decode("utf-8"))) if row]
    return _parse_rows(rows, "builtin:horseshoe_crabs", CsvSchema("satellites", ("width", "color")))


# ---------------------------------------------------------------------------
# configuration


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {p}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return cfg


def config_sha256(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _response_from_config(obj):
    if isinstance(obj, str):
        kind, a = obj, None
    elif isinstance(obj, dict):
        kind, a = obj.get("kind"), obj.get("a")
    else:
        raise ConfigError(f"response spec must be a name or object, got {obj!r}")
    try:
        return response_function(kind, a=a)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def build_model_spec(cfg: dict) -> ModelSpec:
    family_name = cfg.get("family")
    if not isinstance(family_name, str):
        raise ConfigError("config needs a 'family' name")
    responses = {
        name: _response_from_config(obj) for name, obj in (cfg.get("responses") or {}).items()
    }
    try:
        family = make_family(family_name, **responses)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    predictors = {}
    for name, cols in (cfg.get("predictors") or {}).items():
        try:
            predictors[name] = PredictorSpec(name, tuple(cols))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"predictor {name!r}: {exc}") from None
    for name in family.parameter_names:
        predictors.setdefault(name, PredictorSpec(name, ()))
    priors = {}
    for name, obj in (cfg.get("priors") or {}).items():
        try:
            priors[name] = PriorSpec(obj.get("kind", "flat"), obj.get("sd"))
        except (ValueError, TypeError, AttributeError) as exc:
            raise ConfigError(f"prior {name!r}: {exc}") from None
    return ModelSpec(family, predictors, priors)


def load_data(cfg: dict) -> DataBlock:
    d = cfg.get("data")
    if not isinstance(d, dict):
        raise ConfigError("config needs a 'data' object")
    if "builtin" in d:
        if d["builtin"] == "horseshoe_crabs":
            return load_horseshoe_crabs()
        raise ConfigError(f"unknown builtin dataset {d['builtin']!r}")
    if "csv" not in d:
        raise ConfigError("data object needs 'csv' (path) or 'builtin'")
    response = d.get("response")
    if not isinstance(response, str):
        raise ConfigError("data object needs a 'response' column name")
    schema = CsvSchema(response, tuple(d.get("covariates") or ()))
    return read_csv(d["csv"], schema, threshold=d.get("threshold"))


def _chain_settings(cfg: dict, seed: int, defaults=(12000, 2000, 1)) -> ChainSettings:
    s = cfg.get("sampler") or {}
    try:
        return ChainSettings(
            iterations=int(s.get("iterations", defaults[0])),
            burnin=int(s.get("burnin", defaults[1])),
            thin=int(s.get("thin", defaults[2])),
            seed=seed,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"sampler settings: {exc}") from None


def _out_dir(cfg: dict) -> Path:
    out = cfg.get("out")
    if not out:
        raise ConfigError("no output directory configured (set 'out' or pass --out)")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_provenance(out: Path, cfg: dict) -> Path:
    from . import __version__

    path = out / "provenance.json"
    _write_json(path, {
        "version": __version__,
        "seed": cfg.get("seed", 0),
        "config_sha256": config_sha256(cfg),
        "config": cfg,
    })
    return path


# ---------------------------------------------------------------------------
# fit


@dataclass(frozen=True)
class ResultBundle:
    out_dir: Path
    summary_path: Path
    provenance_path: Path
    samples_path: Path | None = None
    tables: tuple[Path, ...] = ()


def _print_table(rows) -> None:
    for parameter, coefficient, mean, lower, upper in rows:
        print(f"{parameter:>8} {coefficient:>14} {mean:>12.6g} [{lower:.6g}, {upper:.6g}]")


def cmd_fit(cfg: dict) -> tuple[int, ResultBundle]:
    out = _out_dir(cfg)
    data = load_data(cfg)
    model = build_model_spec(cfg)
    seed = int(cfg.get("seed", 0))
    engine = cfg.get("engine", "mcmc")
    summary_opts = cfg.get("summary") or {}
    level = float(summary_opts.get("level", 0.95))
    exp_mean = bool(summary_opts.get("exp_mean", False))
    samples_path = None

    if engine == "mle":
        result = fit_mle(model, data)
        payload = {
            "engine": "mle",
            "family": model.family.family,
            "coefficients": {
                name: dict(zip(model.predictors[name].coefficient_names, block.beta))
                for name, block in result.coefficients.items()
            },
            "loglik": result.loglik,
            "converged": result.converged,
            "iterations": result.iterations,
            "seed": seed,
        }
    elif engine == "mcmc":
        settings = _chain_settings(cfg, seed)
        chain = run_chain(model, data, settings=settings)
        summ = summarize(chain, level=level, exp_mean=exp_mean)
        info = dic(chain, model, data)
        payload = {
            "engine": "mcmc",
            "family": model.family.family,
            "level": level,
            "seed": seed,
            "iterations": settings.iterations,
            "burnin": settings.burnin,
            "thin": settings.thin,
            "rows": [
                {
                    "parameter": r.parameter,
                    "coefficient": r.coefficient,
                    "mean": r.mean,
                    "lower": r.lower,
                    "upper": r.upper,
                    "exp_mean": r.exp_mean,
                }
                for r in summ.rows
            ],
            "dic": {
                "deviance_mean": info.deviance_mean,
                "deviance_at_mean": info.deviance_at_mean,
                "pd": info.pd,
                "dic": info.dic,
            },
            "acceptance_rates": chain.acceptance_rates,
            "rw_fallbacks": chain.rw_fallbacks,
        }
        samples_path = out / "samples.csv"
        header = [
            f"{name}:{coef}"
            for name in model.parameter_names
            for coef in chain.coefficient_names[name]
        ]
        stacked = np.column_stack([chain.samples[name] for name in model.parameter_names])
        _write_csv(samples_path, header, stacked)
        _print_table((r.parameter, r.coefficient, r.mean, r.lower, r.upper) for r in summ.rows)
        print(f"DIC {info.dic:.6g} (pD {info.pd:.6g})")
    else:
        raise ConfigError(f"unknown engine {engine!r} (use 'mle' or 'mcmc')")

    summary_path = out / "summary.json"
    _write_json(summary_path, payload)
    prov = _write_provenance(out, cfg)
    return 0, ResultBundle(out, summary_path, prov, samples_path)


# ---------------------------------------------------------------------------
# simulate


def _scenario_from_config(cfg: dict) -> experiments.ScenarioSpec:
    seed = int(cfg.get("seed", 0))
    return experiments.ScenarioSpec(
        response=_response_from_config(cfg.get("response", {"kind": "softplus", "a": 1.0})),
        coefficients=tuple(cfg.get("coefficients", (1.0, 0.5, 1.0, 2.0))),
        n=int(cfg.get("n", 1000)),
        replications=int(cfg.get("replications", 100)),
        chain=_chain_settings(cfg, 0, defaults=(6000, 1000, 1)),
        seed=seed,
    )


def cmd_simulate(cfg: dict) -> tuple[int, ResultBundle]:
    out = _out_dir(cfg)
    study = cfg.get("study")
    threads = int(cfg.get("threads", 1))
    try:
        if study == "coverage":
            report = experiments.run_coverage_study(_scenario_from_config(cfg), threads=threads)
            json_path = out / "coverage_report.json"
            csv_path = out / "coverage_report.csv"
            _write_csv(
                csv_path,
                ["coefficient", "coverage95", "coverage80", "bias"],
                zip(report.coefficients, report.coverage95, report.coverage80, report.bias),
            )
        elif study == "dic_selection":
            cands = cfg.get("candidates")
            if not isinstance(cands, list) or len(cands) != 2:
                raise ConfigError("dic_selection needs exactly two 'candidates'")
            candidates = tuple(_response_from_config(c) for c in cands)
            report = experiments.run_dic_selection_study(
                _scenario_from_config(cfg), candidates, threads=threads
            )
            json_path = out / "dic_selection_report.json"
            csv_path = out / "dic_selection_report.csv"
            header = [f"rate_at_{t:g}" for t in report.thresholds]
            _write_csv(csv_path, header, [list(report.rates)])
        elif study == "gpd_tail":
            spec = experiments.GpdTailSpec(
                n=int(cfg.get("n", 2000)),
                replications=int(cfg.get("replications", 20)),
                chain=_chain_settings(cfg, 0, defaults=(4000, 1000, 2)),
                p=float(cfg.get("p", 0.999)),
                seed=int(cfg.get("seed", 0)),
            )
            report = experiments.run_gpd_tail_study(spec, threads=threads)
            json_path = out / "gpd_tail_report.json"
            csv_path = out / "gpd_tail_report.csv"
            _write_csv(
                csv_path,
                ["replication", "max_quantile_softplus", "max_quantile_exp", "median_ratio"],
                zip(
                    range(report.replications),
                    report.max_quantile_softplus,
                    report.max_quantile_exp,
                    report.per_seed_median_ratio,
                ),
            )
        else:
            raise ConfigError(f"unknown study {study!r}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _write_json(json_path, report.to_dict())
    prov = _write_provenance(out, cfg)
    return 0, ResultBundle(out, json_path, prov, tables=(csv_path,))


# ---------------------------------------------------------------------------
# diagnose / predict


@dataclass(frozen=True)
class PluginFit:
    """Model plus point coefficients reconstructed from a saved bundle."""

    model: ModelSpec
    coefficients: dict[str, CoefficientBlock]


def _load_bundle(path) -> dict:
    d = Path(path)
    summary_path = d / "summary.json"
    prov_path = d / "provenance.json"
    if not summary_path.exists() or not prov_path.exists():
        raise ConfigError(f"not a fit bundle (needs summary.json and provenance.json): {d}")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    provenance = json.loads(prov_path.read_text(encoding="utf-8"))
    model = build_model_spec(provenance.get("config") or {})
    return {"dir": d, "summary": summary, "model": model}


def _plugin_fit(bundle: dict) -> PluginFit:
    model = bundle["model"]
    s = bundle["summary"]
    coefficients = {}
    if s.get("engine") == "mle":
        for name, mapping in s["coefficients"].items():
            order = model.predictors[name].coefficient_names
            coefficients[name] = CoefficientBlock(name, np.array([mapping[c] for c in order]))
    else:
        cells = {(r["parameter"], r["coefficient"]): r["mean"] for r in s["rows"]}
        for name in model.parameter_names:
            order = model.predictors[name].coefficient_names
            coefficients[name] = CoefficientBlock(name, np.array([cells[name, c] for c in order]))
    return PluginFit(model, coefficients)


def _loaded_chain(bundle: dict) -> Chain:
    model = bundle["model"]
    path = bundle["dir"] / "samples.csv"
    if not path.exists():
        raise ConfigError(f"bundle has no samples.csv (MLE fits store none): {bundle['dir']}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        values = np.array([[float(c) for c in row] for row in reader])
    samples = {}
    names = {}
    for name in model.parameter_names:
        order = model.predictors[name].coefficient_names
        cols = [header.index(f"{name}:{coef}") for coef in order]
        samples[name] = values[:, cols]
        names[name] = order
    s = bundle["summary"]
    settings = ChainSettings(
        int(s.get("iterations", 12000)), int(s.get("burnin", 2000)),
        int(s.get("thin", 1)), int(s.get("seed", 0)),
    )
    zero = {name: 0 for name in model.parameter_names}
    return Chain(model, samples, names, settings, dict(zero), dict(zero))


def cmd_diagnose(cfg: dict) -> tuple[int, ResultBundle]:
    out = _out_dir(cfg)
    seed = int(cfg.get("seed", 0))
    tables: list[Path] = []
    ratio_cfg = cfg.get("ratio")
    if ratio_cfg is not None:
        bundles = ratio_cfg.get("bundles") if isinstance(ratio_cfg, dict) else None
        if not isinstance(bundles, list) or len(bundles) != 2:
            raise ConfigError("ratio mode needs exactly two bundle paths under ratio.bundles")
        data = load_data(cfg)
        chains = [_loaded_chain(_load_bundle(b)) for b in bundles]
        p = float(ratio_cfg.get("p", 0.999))
        level = float(ratio_cfg.get("level", 0.95))
        ratios = ci_width_ratio(chains[0], chains[1], data, p, level=level)
        widths_path = out / "widths.csv"
        _write_csv(widths_path, ["obs_id", "ratio"], zip(ratios.obs_id, ratios.ratio))
        tables.append(widths_path)
        summary_path = out / "diagnostics.json"
        _write_json(summary_path, {
            "mode": "ratio", "p": p, "level": level, "seed": seed,
            "median_ratio": float(np.median(ratios.ratio[np.isfinite(ratios.ratio)])),
            "degenerate_rows": int(ratios.degenerate.sum()),
        })
    else:
        bundle_path = cfg.get("bundle")
        if not bundle_path:
            raise ConfigError("diagnose needs a 'bundle' path (or a 'ratio' object)")
        fit = _plugin_fit(_load_bundle(bundle_path))
        data = load_data(cfg)
        residuals = rqr(fit, data, seed)
        table = qq_export(residuals)
        qq_path = out / "qq.csv"
        _write_csv(qq_path, ["theoretical", "observed"], table)
        tables.append(qq_path)
        ad = ad_statistic(residuals)
        summary_path = out / "diagnostics.json"
        _write_json(summary_path, {
            "mode": "rqr", "seed": seed, "n": ad.n, "ad_statistic": ad.a2,
        })
        print(f"AD statistic {ad.a2:.6g} on n={ad.n}")
    prov = _write_provenance(out, cfg)
    return 0, ResultBundle(out, summary_path, prov, tables=tuple(tables))


def cmd_predict(cfg: dict) -> tuple[int, ResultBundle]:
    out = _out_dir(cfg)
    bundle_path = cfg.get("bundle")
    if not bundle_path:
        raise ConfigError("predict needs a 'bundle' path")
    fit = _plugin_fit(_load_bundle(bundle_path))
    data = load_data(cfg)
    what = cfg.get("what", "mean")
    p = cfg.get("p")
    try:
        result = predict(fit, data, what=what, p=None if p is None else float(p))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    path = out / "predictions.csv"
    if what == "parameters":
        names = list(fit.model.parameter_names)
        _write_csv(path, ["obs_id"] + names,
                   zip(range(data.n), *[result[n] for n in names]))
    else:
        _write_csv(path, ["obs_id", what], zip(range(data.n), np.atleast_1d(result)))
    prov = _write_provenance(out, cfg)
    return 0, ResultBundle(out, path, prov, tables=(path,))


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
    "predict": cmd_predict,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="softplusreg",
        description="Distributional regression with softplus response functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=None, help="worker processes for studies")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["out"] = args.out
        if args.threads is not None:
            cfg["threads"] = args.threads
        code, _ = _COMMANDS[args.command](cfg)
        return code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
