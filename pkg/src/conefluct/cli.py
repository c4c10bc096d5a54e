"""Experiment driver: law/config files, subcommands, and on-disk artifacts.

Law files and experiment configs are JSON (human-writable, exact float
round-trip).  A law file looks like::

    {
      "dim": 2,
      "atoms": [[[3.0, 2.0], [2.0, 4.0]], [[1.0, 2.0], [1.0, 1.0]]],
      "weights": [0.5, 0.5],
      "metadata": {"note": "free-form"}
    }

Subcommands: ``check`` (hypothesis battery, nonzero exit on failure),
``spectral`` (invariant weights, drift, variance, potential; d = 2 only),
``simulate`` (survival, killed expectations, conditional endpoints),
``validate`` (assembled verdict report, nonzero exit on failing verdicts,
``--sigma-scale`` for negative-control runs), ``covariance`` (lagged
increment covariances with the geometric-rate fit).

Every run writes ``manifest.json`` with the config hash, seed, worker count
and library versions; identical (config, seed) runs produce byte-identical
artifacts regardless of worker count.  No timestamps are recorded.
Environment overrides: ``CONEFLUCT_SEED``, ``CONEFLUCT_WORKERS``,
``CONEFLUCT_OUT``, ``CONEFLUCT_FORCE`` (flags still win).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .matrix_core import SimplexVector
from .matrix_law import MatrixLaw, convolution_contraction, estimate_lyapunov, hypothesis_report
from .transfer_operator import (
    ConvergenceError,
    DegenerateLawError,
    SimplexGrid,
    dominant_eigenvalue,
    lyapunov_exact,
    solve_poisson,
    stationary_measure,
)
from . import fluctuation_sim as fsim
from . import theorem_validation as tval

__all__ = ["LawFormatError", "load_law", "save_law", "law_fingerprint", "load_config", "main"]


class LawFormatError(ValueError):
    """A law or config file failed structural validation."""


# ---------------------------------------------------------------------------
# law files


def load_law(path) -> tuple[MatrixLaw, dict]:
    """Parse a law file; raises LawFormatError with the offending field."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LawFormatError(f"cannot read law file {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LawFormatError(f"law file {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise LawFormatError(f"law file {path}: top level must be an object")
    for key in ("dim", "atoms", "weights"):
        if key not in obj:
            raise LawFormatError(f"law file {path}: missing required key {key!r}")
    unknown = set(obj) - {"dim", "atoms", "weights", "metadata"}
    if unknown:
        raise LawFormatError(f"law file {path}: unknown keys {sorted(unknown)}")
    dim = obj["dim"]
    atoms = obj["atoms"]
    weights = obj["weights"]
    if not isinstance(atoms, list) or not atoms:
        raise LawFormatError(f"law file {path}: 'atoms' must be a non-empty list")
    if not isinstance(weights, list) or len(weights) != len(atoms):
        raise LawFormatError(f"law file {path}: 'weights' must list one weight per atom")
    try:
        entry_arrays = [np.asarray(entries, dtype=float) for entries in atoms]
    except (TypeError, ValueError) as exc:
        raise LawFormatError(f"law file {path}: atom entries are not numeric: {exc}") from exc
    for i, arr in enumerate(entry_arrays):
        if arr.shape != (dim, dim):
            raise LawFormatError(
                f"law file {path}: atom {i} has shape {arr.shape}, expected ({dim}, {dim}) "
                "(row-major rows of the matrix)"
            )
    try:
        law = MatrixLaw.from_entries(entry_arrays, np.asarray(weights, dtype=float))
    except ValueError as exc:
        raise LawFormatError(f"law file {path}: {exc}") from exc
    return law, obj.get("metadata", {})


def _law_dict(law: MatrixLaw, metadata: dict | None) -> dict:
    out = {
        "dim": law.dim,
        "atoms": [g.entries.tolist() for g in law.atoms],
        "weights": law.weights.tolist(),
    }
    if metadata:
        out["metadata"] = metadata
    return out


def save_law(law: MatrixLaw, path, metadata: dict | None = None) -> None:
    """Serialize a law; parsing the output reproduces it exactly."""
    Path(path).write_text(json.dumps(_law_dict(law, metadata), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def law_fingerprint(law: MatrixLaw) -> str:
    """Content hash of the law (atoms and weights, exact floats)."""
    payload = json.dumps(_law_dict(law, None), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# config


_DEFAULTS: dict = {
    "law": None,
    "seed": None,
    "workers": 1,
    "out": "out",
    "start": {"x": "barycenter", "a": 1.0},
    "grid": {"resolution": 512},
    "spectral": {
        "nu_tol": 1e-10,
        "poisson_tol": 1e-10,
        "eigen_tol": 1e-13,
        "sigma2_h": 0.05,
        "max_iter": 20000,
    },
    "check": {
        "delta0": 1.0,
        "p3_cap": 16,
        "n": 1024,
        "paths": 20000,
        "gamma_tol": 1e-3,
        "sigma2_threshold": 1e-6,
    },
    "simulate": {
        "n_values": [64, 128, 256, 512, 1024],
        "paths": 100000,
        "v_schedule": [16, 32, 64, 128, 256, 512, 1024],
        "v_paths": 100000,
        "a_grid": None,
        "a_grid_sigmas": [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 50.0],
        "a_paths": 30000,
        "conditional_n": [64, 256, 1024],
        "conditional_paths": 200000,
        "sigma2_n": 1024,
        "sigma2_paths": 30000,
        "horizon": 1000000,
    },
    "covariance": {"burn_in": 50, "max_lag": 6, "paths": 200000, "conv_check_n": 4},
    "validate": {
        "sigma_scale": 1.0,
        "martingale_paths": 4000,
        "martingale_horizon": 512,
        "harmonicity": False,
        "harmonicity_paths": 4000,
    },
    "thresholds": {},
}

# fixed per-operation salts so every estimator gets its own substream
_SALTS = {
    "check": 1,
    "survival": 2,
    "v_start": 3,
    "conditional": 4,
    "sigma2": 5,
    "covariance": 6,
    "martingale": 7,
    "a_grid": 8,
    "harmonicity": 9,
}


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise LawFormatError(f"config: unknown key {where!r}")
        if isinstance(defaults[key], dict) and defaults[key] and not key == "thresholds":
            if not isinstance(value, dict):
                raise LawFormatError(f"config: {where!r} must be an object")
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Assemble the effective config: defaults < file < env < overrides."""
    cfg = copy.deepcopy(_DEFAULTS)
    if path is not None:
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise LawFormatError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise LawFormatError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise LawFormatError(f"config {path}: top level must be an object")
        cfg = _merge(cfg, obj)
    if os.environ.get("CONEFLUCT_SEED"):
        cfg["seed"] = int(os.environ["CONEFLUCT_SEED"])
    if os.environ.get("CONEFLUCT_WORKERS"):
        cfg["workers"] = int(os.environ["CONEFLUCT_WORKERS"])
    if os.environ.get("CONEFLUCT_OUT"):
        cfg["out"] = os.environ["CONEFLUCT_OUT"]
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    if cfg["law"] is None:
        raise LawFormatError("no law file given (config key 'law' or --law)")
    if cfg["seed"] is None:
        raise LawFormatError("no seed given (config key 'seed', CONEFLUCT_SEED, or --seed); "
                             "wall-clock seeding is not supported")
    cfg["seed"] = int(cfg["seed"])
    cfg["workers"] = int(cfg["workers"])
    return cfg


def _config_hash(cfg: dict) -> str:
    # workers and out are execution details, not experiment identity: runs
    # that differ only in parallelism or destination hash (and re-compute)
    # identically, so their artifacts can be compared byte for byte.
    ident = {k: v for k, v in cfg.items() if k not in ("workers", "out")}
    payload = json.dumps(_jsonable(ident), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _seed_for(cfg: dict, op: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=cfg["seed"], spawn_key=(_SALTS[op],))


def _start_point(cfg: dict, law: MatrixLaw) -> SimplexVector:
    choice = cfg["start"]["x"]
    if choice == "barycenter":
        return SimplexVector.barycenter(law.dim)
    return SimplexVector(np.asarray(choice, dtype=float))


# ---------------------------------------------------------------------------
# artifact plumbing


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.random.SeedSequence):
        return {"entropy": _jsonable(obj.entropy), "spawn_key": _jsonable(list(obj.spawn_key))}
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "__dataclass_fields__"):
        return {name: _jsonable(getattr(obj, name)) for name in obj.__dataclass_fields__}
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _prepare_out(cfg: dict, force: bool) -> Path:
    out = Path(cfg["out"])
    if os.environ.get("CONEFLUCT_FORCE") == "1":
        force = True
    if out.exists() and any(out.iterdir()) and not force:
        raise LawFormatError(f"output directory {out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, command: str, cfg: dict, law: MatrixLaw, artifacts: list) -> None:
    _write_json(
        out / "manifest.json",
        {
            "command": command,
            "config_sha256": _config_hash(cfg),
            "seed": cfg["seed"],
            "law_fingerprint": law_fingerprint(law),
            "versions": {
                "conefluct": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "artifacts": sorted(artifacts + ["manifest.json"]),
        },
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(cfg: dict, law: MatrixLaw, out: Path) -> int:
    c = cfg["check"]
    report = hypothesis_report(
        law,
        _start_point(cfg, law),
        delta0=c["delta0"],
        p3_cap=c["p3_cap"],
        n=c["n"],
        paths=c["paths"],
        gamma_tol=c["gamma_tol"],
        sigma2_threshold=c["sigma2_threshold"],
        seed=_seed_for(cfg, "check"),
        workers=cfg["workers"],
    )
    failures = report.failures()
    _write_json(out / "hypotheses.json", {"report": report, "failures": failures, "passed": not failures})
    _manifest(out, "check", cfg, law, ["hypotheses.json"])
    for line in failures:
        print(f"FAIL {line}")
    print(f"hypotheses: {'all pass' if not failures else f'{len(failures)} failing'}")
    return 0 if not failures else 1


def _spectral_pipeline(cfg: dict, law: MatrixLaw):
    if law.dim != 2:
        raise DegenerateLawError(
            f"spectral pipeline needs d = 2 (grid-parametrized simplex), got d = {law.dim}; "
            "use 'simulate'/'covariance' (Monte Carlo) for higher dimensions"
        )
    sp = cfg["spectral"]
    grid = SimplexGrid(cfg["grid"]["resolution"])
    nu = stationary_measure(law, grid, tol=sp["nu_tol"], max_iter=sp["max_iter"])
    gamma = lyapunov_exact(law, nu)
    h = sp["sigma2_h"]
    lam_h, kappa_h = dominant_eigenvalue(law, grid, h, tol=sp["eigen_tol"], max_iter=sp["max_iter"])
    lam_h2, _ = dominant_eigenvalue(law, grid, h / 2.0, tol=sp["eigen_tol"], max_iter=sp["max_iter"])
    s_h = 2.0 * (1.0 - lam_h.real) / h**2
    s_h2 = 2.0 * (1.0 - lam_h2.real) / (h / 2.0) ** 2
    sigma2 = (4.0 * s_h2 - s_h) / 3.0
    if sigma2 < -1e-8:
        raise DegenerateLawError(f"extrapolated sigma^2 = {sigma2:.3e} < 0; law looks degenerate")
    sigma2 = max(sigma2, 0.0)
    poisson = solve_poisson(law, nu, tol=sp["poisson_tol"], max_terms=sp["max_iter"])
    return {
        "grid": grid,
        "nu": nu,
        "gamma": gamma,
        "lambda_h": lam_h,
        "lambda_h2": lam_h2,
        "kappa_power": kappa_h,
        "sigma2": sigma2,
        "poisson": poisson,
    }


def cmd_spectral(cfg: dict, law: MatrixLaw, out: Path) -> int:
    pipe = _spectral_pipeline(cfg, law)
    grid, nu, poisson = pipe["grid"], pipe["nu"], pipe["poisson"]
    _write_csv(out / "nu.csv", ["param", "weight"], zip(grid.params, nu.values))
    _write_csv(out / "theta.csv", ["param", "value"], zip(grid.params, poisson.theta.values))
    summary = {
        "grid_resolution": grid.resolution,
        "gamma": pipe["gamma"],
        "sigma2": pipe["sigma2"],
        "sigma2_h": cfg["spectral"]["sigma2_h"],
        "lambda_h": pipe["lambda_h"],
        "lambda_h_half": pipe["lambda_h2"],
        "kappa_power": pipe["kappa_power"],
        "A": poisson.A,
        "poisson": {
            "drift": poisson.drift,
            "truncation_n": poisson.truncation_n,
            "tail_bound": poisson.tail_bound,
            "residual": poisson.residual,
            "dense_gap": poisson.dense_gap,
            "interp_slack": poisson.interp_slack,
        },
    }
    _write_json(out / "spectral.json", summary)
    _manifest(out, "spectral", cfg, law, ["spectral.json", "nu.csv", "theta.csv"])
    print(f"gamma = {pipe['gamma']:.6g}, sigma^2 = {pipe['sigma2']:.6g}, A = {poisson.A:.6g}")
    return 0


def cmd_simulate(cfg: dict, law: MatrixLaw, out: Path) -> int:
    sim = cfg["simulate"]
    x = _start_point(cfg, law)
    a = float(cfg["start"]["a"])
    curve = fsim.survival_probability(
        law, x, a, sim["n_values"], sim["paths"], _seed_for(cfg, "survival"),
        workers=cfg["workers"], horizon=sim["horizon"],
    )
    _write_csv(
        out / "survival.csv",
        ["n", "p_hat", "ci_half_width", "survivors"],
        zip(curve.n_values, curve.p_hat, curve.ci_half_width, curve.survivors),
    )
    sigma2_mc, sigma2_se = fsim.mc_sigma2(
        law, x, sim["sigma2_n"], sim["sigma2_paths"], _seed_for(cfg, "sigma2"), workers=cfg["workers"]
    )
    sigma_hat = math.sqrt(sigma2_mc)
    v_start = fsim.estimate_V(
        law, x, a, sim["v_schedule"], sim["v_paths"], _seed_for(cfg, "v_start"), workers=cfg["workers"]
    )
    _write_csv(
        out / "v_curve.csv",
        ["n", "estimate", "stderr"],
        zip(v_start.n_schedule, v_start.estimates, v_start.stderrs),
    )
    a_grid = sim["a_grid"]
    if a_grid is None:
        a_grid = [round(m * sigma_hat, 12) for m in sim["a_grid_sigmas"]]
    seeds = _seed_for(cfg, "a_grid").spawn(len(a_grid))
    v_rows = []
    for level, ss in zip(a_grid, seeds):
        est = fsim.estimate_V(law, x, float(level), sim["v_schedule"], sim["a_paths"], ss, workers=cfg["workers"])
        v_rows.append((level, est.V_hat, est.V_stderr, est.plateau_n if est.plateau_n else -1, est.converged))
    _write_csv(out / "v_table.csv", ["a", "V_hat", "V_stderr", "plateau_n", "converged"], v_rows)
    samples = fsim.conditional_endpoint_samples(
        law, x, a, sim["conditional_n"], sim["conditional_paths"], _seed_for(cfg, "conditional"),
        workers=cfg["workers"],
    )
    cond_rows = [(n, value) for n in sorted(samples) for value in samples[n]]
    _write_csv(out / "conditional.csv", ["n", "scaled_endpoint"], cond_rows)
    _write_json(
        out / "simulate.json",
        {
            "start": {"x": x.coords, "a": a},
            "sigma2_mc": sigma2_mc,
            "sigma2_mc_stderr": sigma2_se,
            "survival": curve,
            "V_start": v_start,
            "conditional_counts": {str(n): samples[n].size for n in samples},
        },
    )
    _manifest(
        out, "simulate", cfg, law,
        ["survival.csv", "v_curve.csv", "v_table.csv", "conditional.csv", "simulate.json"],
    )
    print(
        f"survival at n={curve.n_values[-1]}: {curve.p_hat[-1]:.5f} +- {curve.ci_half_width[-1]:.5f}; "
        f"V_hat({a:g}) = {v_start.V_hat:.5f}"
    )
    return 0


def cmd_covariance(cfg: dict, law: MatrixLaw, out: Path) -> int:
    cov = cfg["covariance"]
    x = _start_point(cfg, law)
    table = fsim.covariance_decay(
        law, x, cov["burn_in"], cov["max_lag"], cov["paths"], _seed_for(cfg, "covariance"),
        workers=cfg["workers"],
    )
    conv_rate = None
    n_conv = cov["conv_check_n"]
    if n_conv and law.support_size**n_conv <= 200000:
        conv_rate = convolution_contraction(law, n_conv) ** (1.0 / n_conv)
    _write_csv(
        out / "covariance.csv",
        ["lag", "cov", "stderr", "in_fit_window"],
        ((l, c, s, int(l) in table.fit_lags) for l, c, s in zip(table.lags, table.cov, table.stderr)),
    )
    _write_json(
        out / "covariance.json",
        {
            "burn_in": table.burn_in,
            "paths": table.paths,
            "kappa_fit": table.kappa_fit,
            "fit_lags": table.fit_lags,
            "note": table.note,
            "convolution_rate": {"n": n_conv, "value": conv_rate},
        },
    )
    _manifest(out, "covariance", cfg, law, ["covariance.csv", "covariance.json"])
    print(f"kappa_fit = {table.kappa_fit}, window = {table.fit_lags}")
    return 0


def cmd_validate(cfg: dict, law: MatrixLaw, out: Path) -> int:
    thresholds = tval.ValidationThresholds(**cfg["thresholds"])
    pipe = _spectral_pipeline(cfg, law)
    poisson = pipe["poisson"]
    sim = cfg["simulate"]
    val = cfg["validate"]
    x = _start_point(cfg, law)
    a = float(cfg["start"]["a"])
    sigma_scale = float(val["sigma_scale"])
    sigma2 = pipe["sigma2"]
    if sigma2 <= 0.0:
        raise DegenerateLawError("sigma^2 = 0: the conditioned limit theory does not apply")
    sigma_hat = math.sqrt(sigma2)

    gamma_hat, gamma_se = estimate_lyapunov(
        law, x, cfg["check"]["n"], cfg["check"]["paths"], _seed_for(cfg, "check"), workers=cfg["workers"]
    )
    sigma2_mc, sigma2_mc_se = fsim.mc_sigma2(
        law, x, sim["sigma2_n"], sim["sigma2_paths"], _seed_for(cfg, "sigma2"), workers=cfg["workers"]
    )
    curve = fsim.survival_probability(
        law, x, a, sim["n_values"], sim["paths"], _seed_for(cfg, "survival"),
        workers=cfg["workers"], horizon=sim["horizon"],
    )
    v_start = fsim.estimate_V(
        law, x, a, sim["v_schedule"], sim["v_paths"], _seed_for(cfg, "v_start"),
        poisson=poisson, workers=cfg["workers"],
    )
    exit_section = tval.validate_exit_asymptotics(
        curve, v_start.V_hat, v_start.V_stderr, sigma_hat, thresholds
    )
    _write_csv(
        out / "ratio_table.csv",
        ["n", "p_hat", "sqrt_n_p", "sqrt_n_p_stderr", "ratio", "ratio_stderr"],
        zip(
            exit_section.n_values, exit_section.p_hat, exit_section.sqrt_n_p,
            exit_section.sqrt_n_p_stderr, exit_section.ratio, exit_section.ratio_stderr,
        ),
    )
    samples = fsim.conditional_endpoint_samples(
        law, x, a, sim["conditional_n"], sim["conditional_paths"], _seed_for(cfg, "conditional"),
        workers=cfg["workers"],
    )
    conditional_section = None
    negative_control = None
    if sigma_scale == 1.0:
        conditional_section = tval.validate_conditional_law(samples, sigma_hat, thresholds)
        ks_rows = zip(conditional_section.n_values, conditional_section.survivors, conditional_section.ks)
    else:
        scaled = sigma_hat * sigma_scale
        section = tval.validate_conditional_law(samples, scaled, thresholds)
        negative_control = {
            "sigma_scale": sigma_scale,
            "sigma_used": scaled,
            "final_ks": float(section.ks[-1]),
            "pass": bool(section.ks[-1] > thresholds.negative_control_min),
        }
        ks_rows = zip(section.n_values, section.survivors, section.ks)
    _write_csv(out / "ks_table.csv", ["n", "survivors", "ks"], ks_rows)

    a_grid = sim["a_grid"]
    if a_grid is None:
        a_grid = [round(m * sigma_hat, 12) for m in sim["a_grid_sigmas"]]
    seeds = _seed_for(cfg, "a_grid").spawn(len(a_grid))
    v_hats, v_ses, rows = [], [], []
    for level, ss in zip(a_grid, seeds):
        est = fsim.estimate_V(law, x, float(level), sim["v_schedule"], sim["a_paths"], ss, workers=cfg["workers"])
        v_hats.append(est.V_hat)
        v_ses.append(est.V_stderr)
        rows.append((level, est.V_hat, est.V_stderr, est.plateau_n if est.plateau_n else -1, est.converged))
    _write_csv(out / "v_table.csv", ["a", "V_hat", "V_stderr", "plateau_n", "converged"], rows)
    v_section = tval.check_V_properties(a_grid, v_hats, v_ses, poisson.A, thresholds)

    records = fsim.simulate_paths(
        law, x, a, val["martingale_horizon"], val["martingale_paths"], _seed_for(cfg, "martingale"),
        poisson=poisson, workers=cfg["workers"],
    )
    gap, gap_violations = fsim.martingale_gap(records, poisson.A, slack=poisson.interp_slack)
    ordering_violations = fsim.exit_ordering_violations(records, poisson.A)
    checklist = {
        "martingale_bound": gap_violations == 0,
        "exit_ordering": ordering_violations == 0,
        "harmonicity": None,
    }
    if val["harmonicity"]:
        evaluator = fsim.build_V_evaluator(
            law,
            x_params=[0.1, 0.3, 0.5, 0.7, 0.9],
            a_values=[m * sigma_hat for m in (0.0, 1.0, 2.0, 4.0, 8.0)],
            n_schedule=sim["v_schedule"],
            paths=sim["a_paths"],
            seed=_seed_for(cfg, "a_grid"),
            workers=cfg["workers"],
        )
        residual, res_se = fsim.harmonicity_residual(
            law, evaluator, x, a, val["harmonicity_paths"], _seed_for(cfg, "harmonicity"),
            workers=cfg["workers"],
        )
        checklist["harmonicity"] = abs(residual) <= 3.0 * res_se + 0.05 * max(abs(v_start.V_hat), 1.0)

    report = tval.ValidationReport(
        law_fingerprint=law_fingerprint(law),
        gamma={"quadrature": pipe["gamma"], "monte_carlo": [gamma_hat, gamma_se]},
        sigma2={
            "spectral": sigma2,
            "monte_carlo": [sigma2_mc, sigma2_mc_se],
            "relative_gap": abs(sigma2_mc - sigma2) / sigma2,
        },
        exit_section=exit_section,
        conditional_section=conditional_section,
        negative_control=negative_control,
        v_section=v_section,
        checklist=checklist,
        thresholds=thresholds,
    )
    verdicts = {
        "exit_asymptotics": exit_section.verdict,
        "v_properties": v_section.verdict,
        "martingale_bound": gap_violations == 0,
        "exit_ordering": ordering_violations == 0,
        "sigma2_agreement": abs(sigma2_mc - sigma2) <= max(0.05 * sigma2, 3.0 * sigma2_mc_se),
        "gamma_agreement": abs(gamma_hat - pipe["gamma"]) <= max(3.0 * gamma_se, cfg["check"]["gamma_tol"]),
    }
    if conditional_section is not None:
        verdicts["conditional_law"] = conditional_section.verdict
    if negative_control is not None:
        verdicts["negative_control"] = negative_control["pass"]
    if checklist["harmonicity"] is not None:
        verdicts["harmonicity"] = checklist["harmonicity"]
    _write_json(
        out / "report.json",
        {
            "report": report,
            "verdicts": verdicts,
            "diagnostics": {"martingale_gap": gap, "A": poisson.A, "interp_slack": poisson.interp_slack},
        },
    )
    _manifest(
        out, "validate", cfg, law,
        ["report.json", "ratio_table.csv", "ks_table.csv", "v_table.csv"],
    )
    for name in sorted(verdicts):
        print(f"{'PASS' if verdicts[name] else 'FAIL'} {name}")
    return 0 if all(verdicts.values()) else 1


_COMMANDS = {
    "check": cmd_check,
    "spectral": cmd_spectral,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "covariance": cmd_covariance,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conefluct",
        description="Products of positive random matrices: hypothesis checks, spectral "
        "quantities, exit-time simulation, and limit-law validation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("check", "run the standing-hypothesis battery (nonzero exit on failure)"),
        ("spectral", "invariant weights, drift, variance, potential (d = 2)"),
        ("simulate", "survival curve, killed expectations, conditional endpoints"),
        ("validate", "assemble the verdict report (nonzero exit on failing verdicts)"),
        ("covariance", "lagged increment covariances and geometric-rate fit"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="experiment config (JSON)")
        p.add_argument("--law", type=str, default=None, help="law file (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--workers", type=int, default=None, help="process count (results unchanged)")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
        if name == "validate":
            p.add_argument(
                "--sigma-scale", type=float, default=None,
                help="scale sigma for the conditioned law (negative control; != 1 flips the KS check)",
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {"law": args.law, "seed": args.seed, "workers": args.workers, "out": args.out}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "validate" and args.sigma_scale is not None:
            cfg["validate"]["sigma_scale"] = args.sigma_scale
        law, _ = load_law(cfg["law"])
        out = _prepare_out(cfg, force=args.force)
        return _COMMANDS[args.command](cfg, law, out)
    except (LawFormatError, ConvergenceError, DegenerateLawError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
