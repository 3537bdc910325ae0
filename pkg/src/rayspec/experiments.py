"""Named studies with archived configs and CSV/JSON artifacts.

Every study resolves to one flat ExperimentConfig, runs the corresponding
pipeline, and leaves behind: eigenvalues.csv, one convergence_<i>.csv per
eigenpair, eigenfunction field dumps, summary.json with oracle metrics, and
the resolved config.ini.  Re-running with the same seed rewrites the same
bytes.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .ansatz import NeuralAnsatz, builtin_levelset
from .fourier import FourierAnsatz, plaplace_duel
from .galerkin import galerkin_errors
from .mlp import MlpSpec
from .objectives import (
    DDimLaplace,
    ModulusField,
    PLaplace,
    PlaneStress,
    ScalarLaplace,
    VectorLaplace,
    rayleigh,
)
from .oracles import (
    analytic_eigenvalues,
    eigenfunction_l2_error,
    fd_plane_stress_eigenvalues,
    fd_radial_eigenvalues,
    interval_eigenfunction,
)
from .quadrature import (
    QuadratureGrid,
    annulus_polar_grid,
    hypercube_mc_batch,
    interval_grid,
    masked_square_grid,
    unit_square_grid,
)
from .solver import (
    EigenReport,
    ParametricSlices,
    SolveSchedule,
    eigencurve_eval,
    solve_parametric_spectrum,
    solve_spectrum,
)
from .stats import check_support, moments, uniform_trapezoid_density

__all__ = [
    "ExperimentConfig",
    "EXPERIMENT_NAMES",
    "default_config",
    "load_config",
    "save_config",
    "validate_config",
    "run_experiment",
]

SCHEMA_VERSION = "1"

EXPERIMENT_NAMES = (
    "fourier-1d",
    "semicircle-basis",
    "galerkin-heat",
    "uq-elasticity",
    "vector-laplace-check",
    "donut-parametric",
    "plaplace-duel",
    "highdim-first",
    "highdim-second",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of one study; defaults below match the published setups."""

    experiment: str
    seed: int = 0
    out_dir: Optional[str] = None
    jobs: int = 1
    n_pairs: int = 1
    # network
    hidden: Tuple[int, ...] = (10, 10)
    activation: str = "tanh"
    # schedule
    lr: float = 5e-3
    epochs_base: int = 5000
    epochs_per_index: int = 0
    threshold: Optional[float] = None
    beta: float = 0.0
    max_epochs: int = 200_000
    lr_decay_factor: Optional[float] = None
    lr_decay_every: int = 1000
    tail_window: int = 5000
    # grids and batching
    grid_n: int = 0
    dims: Tuple[int, ...] = ()
    dim: int = 0
    batch_base: int = 0
    batch_step: int = 0
    epochs_dim_step: int = 0
    inner_radii: Tuple[float, ...] = ()
    stochastic_nodes: int = 0
    # material
    e0: float = 1.0
    e1: float = 5.0
    q_steepness: float = 50.0
    nu: float = 0.25
    modulus_mode: str = "midpoint"
    p_exponent: float = 5.0
    # comparator
    fourier_modes: int = 10
    fourier_sigma: float = 1e-3
    # reporting
    galerkin_samples: int = 10000
    oracle_samples: int = 10
    oracle_cells: int = 100
    moment_nodes: int = 101
    field_dump_limit: int = 20000


_SECTION_OF = {
    "experiment": "experiment",
    "seed": "experiment",
    "out_dir": "experiment",
    "jobs": "experiment",
    "n_pairs": "experiment",
    "hidden": "network",
    "activation": "network",
    "fourier_modes": "network",
    "fourier_sigma": "network",
    "lr": "schedule",
    "epochs_base": "schedule",
    "epochs_per_index": "schedule",
    "threshold": "schedule",
    "beta": "schedule",
    "max_epochs": "schedule",
    "lr_decay_factor": "schedule",
    "lr_decay_every": "schedule",
    "tail_window": "schedule",
    "grid_n": "grid",
    "dims": "grid",
    "dim": "grid",
    "batch_base": "grid",
    "batch_step": "grid",
    "epochs_dim_step": "grid",
    "inner_radii": "grid",
    "stochastic_nodes": "grid",
    "e0": "material",
    "e1": "material",
    "q_steepness": "material",
    "nu": "material",
    "modulus_mode": "material",
    "p_exponent": "material",
    "galerkin_samples": "reporting",
    "oracle_samples": "reporting",
    "oracle_cells": "reporting",
    "moment_nodes": "reporting",
    "field_dump_limit": "reporting",
}


def default_config(name: str) -> ExperimentConfig:
    """Shipping defaults; each reproduces its published numbers on one machine."""
    if name == "fourier-1d":
        return ExperimentConfig(
            experiment=name,
            n_pairs=10,
            hidden=(20,),
            activation="tanh",
            lr=5e-3,
            epochs_base=2000,
            epochs_per_index=500,
            threshold=300.0,
            beta=1.0,
            grid_n=250,
        )
    if name == "semicircle-basis":
        return ExperimentConfig(
            experiment=name,
            n_pairs=15,
            hidden=(10, 10),
            activation="sigmoid",
            lr=5e-3,
            epochs_base=5000,
            epochs_per_index=1000,
            threshold=25.0,
            beta=0.0,
            grid_n=100,
        )
    if name == "galerkin-heat":
        base = default_config("semicircle-basis")
        return replace(base, experiment=name, galerkin_samples=10000)
    if name == "uq-elasticity":
        return ExperimentConfig(
            experiment=name,
            n_pairs=1,
            hidden=(15, 15),
            activation="tanh",
            lr=1e-2,
            epochs_base=12000,
            threshold=None,
            beta=0.0,
            grid_n=75,
            stochastic_nodes=25,
            e0=1.0,
            e1=5.0,
            nu=0.25,
            modulus_mode="midpoint",
        )
    if name == "vector-laplace-check":
        return ExperimentConfig(
            experiment=name,
            n_pairs=1,
            hidden=(10, 10),
            activation="tanh",
            lr=5e-3,
            epochs_base=5000,
            threshold=None,
            beta=0.0,
            grid_n=50,
        )
    if name == "donut-parametric":
        return ExperimentConfig(
            experiment=name,
            n_pairs=9,
            hidden=(15, 15),
            activation="tanh",
            lr=1e-2,
            epochs_base=5000,
            epochs_per_index=1000,
            threshold=200.0,
            beta=0.0,
            inner_radii=(0.25, 0.5),
        )
    if name == "plaplace-duel":
        return ExperimentConfig(
            experiment=name,
            n_pairs=1,
            hidden=(7, 7),
            activation="tanh",
            lr=1e-2,
            epochs_base=30000,
            threshold=None,
            beta=0.0,
            grid_n=75,
            p_exponent=5.0,
            fourier_modes=10,
            fourier_sigma=1e-3,
        )
    if name == "highdim-first":
        return ExperimentConfig(
            experiment=name,
            n_pairs=1,
            hidden=(6, 6),
            activation="tanh",
            lr=2e-3,
            epochs_base=5000,
            epochs_dim_step=1500,
            threshold=None,
            beta=0.0,
            lr_decay_factor=0.95,
            lr_decay_every=1000,
            tail_window=5000,
            dims=(1, 2, 3, 4, 5, 6, 7, 8, 9),
            batch_base=1000,
            batch_step=2000,
        )
    if name == "highdim-second":
        return ExperimentConfig(
            experiment=name,
            n_pairs=2,
            hidden=(6, 6),
            activation="tanh",
            lr=2e-3,
            epochs_base=25000,
            threshold=None,
            beta=0.0,
            lr_decay_factor=0.95,
            lr_decay_every=1000,
            tail_window=5000,
            dim=10,
            batch_base=5000,
        )
    raise ValueError(f"unknown experiment {name!r}")


# ---------------------------------------------------------------------------
# config serialization


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _parse_value(name: str, ftype, raw: str):
    raw = raw.strip()
    if ftype in (Optional[str],) or name == "out_dir":
        return None if raw.lower() == "none" else raw
    if ftype is str:
        return raw
    if ftype is int:
        return int(raw)
    if ftype is float:
        return float(raw)
    if ftype == Optional[float]:
        return None if raw.lower() == "none" else float(raw)
    if ftype == Tuple[int, ...]:
        return tuple(int(t) for t in raw.replace(",", " ").split()) if raw else ()
    if ftype == Tuple[float, ...]:
        return tuple(float(t) for t in raw.replace(",", " ").split()) if raw else ()
    raise ValueError(f"unhandled config field type for {name}")


def save_config(cfg: ExperimentConfig, path) -> None:
    parser = configparser.ConfigParser()
    for f in dataclasses.fields(cfg):
        section = _SECTION_OF[f.name]
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, f.name, _format_value(getattr(cfg, f.name)))
    with open(path, "w", newline="\n") as fh:
        parser.write(fh)


def load_config(path) -> ExperimentConfig:
    """INI file over experiment defaults; the file must name its experiment."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    flat: Dict[str, str] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            expected = _SECTION_OF.get(key)
            if expected is None:
                raise ValueError(f"[{section}] {key}: unknown config key")
            if expected != section:
                raise ValueError(f"[{section}] {key}: belongs in section [{expected}]")
            if key in flat:
                raise ValueError(f"[{section}] {key}: duplicate key")
            flat[key] = raw
    name = flat.pop("experiment", None)
    if name is None:
        raise ValueError("[experiment] experiment: key is required")
    cfg = default_config(name)
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    updates = {}
    for key, raw in flat.items():
        try:
            updates[key] = _parse_value(key, types[key], raw)
        except (ValueError, TypeError) as exc:
            raise ValueError(f"[{_SECTION_OF[key]}] {key}: cannot parse {raw!r} ({exc})")
    return replace(cfg, **updates)


def validate_config(cfg: ExperimentConfig) -> List[str]:
    """Schema and invariant diagnostics; empty list means runnable."""
    bad: List[str] = []

    def flag(key, msg):
        bad.append(f"[{_SECTION_OF[key]}] {key}: {msg}")

    if cfg.experiment not in EXPERIMENT_NAMES:
        flag("experiment", f"unknown experiment {cfg.experiment!r}")
        return bad
    if cfg.n_pairs < 1:
        flag("n_pairs", "need at least one eigenpair")
    if not cfg.hidden or any(w < 1 for w in cfg.hidden):
        flag("hidden", "hidden widths must be positive")
    if cfg.activation not in ("tanh", "sigmoid"):
        flag("activation", f"unknown activation {cfg.activation!r}")
    if cfg.lr <= 0:
        flag("lr", "learning rate must be positive")
    if cfg.beta < 0:
        flag("beta", "penalty weight must be non-negative")
    if cfg.threshold is not None and cfg.threshold <= 0:
        flag("threshold", "convergence threshold must be positive when set")
    if cfg.epochs_base < 1:
        flag("epochs_base", "need a positive epoch budget")
    if cfg.epochs_per_index < 0:
        flag("epochs_per_index", "per-index budget cannot be negative")
    if cfg.max_epochs < cfg.epochs_base + cfg.epochs_per_index:
        flag("max_epochs", "cap is below the first eigenpair's budget")
    if cfg.lr_decay_factor is not None and not 0 < cfg.lr_decay_factor <= 1:
        flag("lr_decay_factor", "decay factor must lie in (0, 1]")
    if cfg.lr_decay_every < 1:
        flag("lr_decay_every", "decay interval must be positive")
    if cfg.jobs < 1:
        flag("jobs", "worker count must be positive")

    needs_grid = cfg.experiment in (
        "fourier-1d",
        "semicircle-basis",
        "galerkin-heat",
        "uq-elasticity",
        "vector-laplace-check",
        "plaplace-duel",
    )
    if needs_grid and cfg.grid_n < 2:
        flag("grid_n", "grid resolution must be at least 2")

    if cfg.experiment == "highdim-first":
        if not cfg.dims:
            flag("dims", "need at least one dimension")
        elif any(d < 1 for d in cfg.dims):
            flag("dims", "dimensions must be positive")
        if cfg.batch_base < 1:
            flag("batch_base", "batch size must be positive")
        if cfg.batch_step < 0:
            flag("batch_step", "batch growth cannot be negative")
    if cfg.experiment == "highdim-second":
        if cfg.dim < 1:
            flag("dim", "dimension must be positive")
        if cfg.batch_base < 1:
            flag("batch_base", "batch size must be positive")
    if cfg.experiment in ("highdim-first", "highdim-second") and cfg.tail_window < 1:
        flag("tail_window", "tail averaging window must be positive")

    if cfg.experiment == "donut-parametric":
        if not cfg.inner_radii:
            flag("inner_radii", "need at least one inner radius")
        elif any(not 0 < a < 1 for a in cfg.inner_radii):
            flag("inner_radii", "inner radii must lie in (0, 1)")

    if cfg.experiment == "uq-elasticity":
        if cfg.stochastic_nodes < 2:
            flag("stochastic_nodes", "need at least two interface nodes")
        if not 0 <= cfg.nu < 0.5:
            flag("nu", "Poisson ratio must lie in [0, 0.5)")
        if cfg.e0 <= 0 or cfg.e1 <= 0:
            flag("e0", "modulus levels must be positive")
        if cfg.modulus_mode not in ("midpoint", "as-printed"):
            flag("modulus_mode", f"unknown mode {cfg.modulus_mode!r}")
        elif cfg.modulus_mode == "as-printed" and cfg.e1 > 3 * cfg.e0:
            flag("modulus_mode", "as-printed profile turns negative for e1 > 3 e0; reporting only")
        if cfg.oracle_samples < 1:
            flag("oracle_samples", "need at least one comparison point")
        if cfg.moment_nodes < 2:
            flag("moment_nodes", "need at least two moment nodes")

    if cfg.experiment == "plaplace-duel":
        if cfg.p_exponent <= 1:
            flag("p_exponent", "exponent must exceed 1")
        if cfg.fourier_modes < 1:
            flag("fourier_modes", "need at least one mode per direction")
        if cfg.fourier_sigma <= 0:
            flag("fourier_sigma", "coefficient scale must be positive")

    if cfg.experiment == "galerkin-heat" and cfg.galerkin_samples < 1:
        flag("galerkin_samples", "need at least one manufactured sample")

    return bad


# ---------------------------------------------------------------------------
# artifact helpers


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _write_csv(path, header: List[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_convergence(out: Path, reports: List[EigenReport]) -> None:
    for rep in reports:
        rows = [
            (epoch, rep.history[epoch, 0], rep.history[epoch, 1], rep.history[epoch, 2])
            for epoch in range(rep.history.shape[0])
        ]
        _write_csv(out / f"convergence_{rep.index}.csv", ["epoch", "rayleigh", "penalty", "lr"], rows)


def _dump_grid_fields(out: Path, basis, grid: QuadratureGrid, limit: int, suffix: str = "") -> None:
    pts = grid.points
    step = max(1, int(np.ceil(pts.shape[0] / limit)))
    sel = slice(None, None, step)
    coord_names = [f"x{c + 1}" for c in range(pts.shape[1])]
    for i, entry in enumerate(basis.entries, start=1):
        vals = entry.values[sel]
        names = coord_names + [f"u{c + 1}" for c in range(vals.shape[1])]
        rows = np.column_stack([pts[sel], vals])
        _write_csv(out / f"field_{i}{suffix}.csv", names, rows)


def _summary(out: Path, cfg: ExperimentConfig, payload: dict) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "config": {f.name: _format_value(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)},
    }
    doc.update(payload)
    with open(out / "summary.json", "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def _schedule(cfg: ExperimentConfig) -> SolveSchedule:
    return SolveSchedule(
        lr=cfg.lr,
        epochs_base=cfg.epochs_base,
        epochs_per_index=cfg.epochs_per_index,
        threshold=cfg.threshold,
        beta=cfg.beta,
        max_epochs=cfg.max_epochs,
        lr_decay_factor=cfg.lr_decay_factor,
        lr_decay_every=cfg.lr_decay_every,
        tail_window=cfg.tail_window,
    )


def _report_rows(reports: List[EigenReport]):
    return {
        "eigenvalues": [float(r.eigenvalue) for r in reports],
        "converged": [bool(r.converged) for r in reports],
        "epochs": [int(r.epochs) for r in reports],
    }


def _semicircle_mask(p: np.ndarray) -> np.ndarray:
    return (p[:, 0] ** 2 + p[:, 1] ** 2 < 1.0) & (p[:, 1] > 0.0)


def _semicircle_grid(n: int) -> QuadratureGrid:
    return masked_square_grid(n, mask=_semicircle_mask, bbox=((-1.0, 1.0), (0.0, 1.0)))


def _train_semicircle(cfg: ExperimentConfig):
    grid = _semicircle_grid(cfg.grid_n)
    ansatz = NeuralAnsatz(
        spec=MlpSpec(2, cfg.hidden, 1, cfg.activation),
        levelset=builtin_levelset("semicircle"),
    )
    return grid, solve_spectrum(cfg.n_pairs, ScalarLaplace(), ansatz, grid, _schedule(cfg), cfg.seed)


# ---------------------------------------------------------------------------
# runners


def _run_fourier_1d(cfg: ExperimentConfig, out: Path) -> dict:
    grid = interval_grid(cfg.grid_n)
    ansatz = NeuralAnsatz(
        spec=MlpSpec(1, cfg.hidden, 1, cfg.activation),
        levelset=builtin_levelset("interval"),
    )
    basis, reports = solve_spectrum(cfg.n_pairs, ScalarLaplace(), ansatz, grid, _schedule(cfg), cfg.seed)
    _write_convergence(out, reports)
    _dump_grid_fields(out, basis, grid, cfg.field_dump_limit)

    n_done = len(basis)
    reference = analytic_eigenvalues("interval", cfg.n_pairs)
    lam = np.array([r.eigenvalue for r in reports])
    lam_err = np.abs(lam[:n_done] - reference[:n_done]) / reference[:n_done]
    u_err_sq = np.array(
        [
            eigenfunction_l2_error(
                basis.entries[i].values[:, 0],
                interval_eigenfunction(i + 1, grid.points),
                grid.weights,
            )
            ** 2
            for i in range(n_done)
        ]
    )
    _write_csv(
        out / "eigenvalues.csv",
        ["index", "eigenvalue", "reference", "rel_error", "squared_field_error"],
        [
            (i + 1, lam[i], reference[i], lam_err[i], u_err_sq[i])
            for i in range(n_done)
        ],
    )
    return {
        **_report_rows(reports),
        "metrics": {
            "e_lambda": float(lam_err.mean()),
            "e_u": float(u_err_sq.mean()),
            "per_index_lambda_error": [float(v) for v in lam_err],
            "per_index_squared_field_error": [float(v) for v in u_err_sq],
            "reference": [float(v) for v in reference[:n_done]],
        },
    }


def _run_semicircle(cfg: ExperimentConfig, out: Path) -> dict:
    grid, (basis, reports) = _train_semicircle(cfg)
    _write_convergence(out, reports)
    _dump_grid_fields(out, basis, grid, cfg.field_dump_limit)
    n_done = len(basis)
    reference = fd_radial_eigenvalues("semicircle", cfg.n_pairs)
    lam = np.array([r.eigenvalue for r in reports])
    rel = np.abs(lam[:n_done] - reference[:n_done]) / reference[:n_done]
    _write_csv(
        out / "eigenvalues.csv",
        ["index", "eigenvalue", "fd_reference", "rel_error"],
        [(i + 1, lam[i], reference[i], rel[i]) for i in range(n_done)],
    )
    return {
        **_report_rows(reports),
        "metrics": {
            "per_index_rel_error": [float(v) for v in rel],
            "max_rel_error": float(rel.max()),
            "ordered": bool(np.all(np.diff(lam[:n_done]) >= 0)),
            "fd_reference": [float(v) for v in reference[:n_done]],
        },
    }


def _run_galerkin(cfg: ExperimentConfig, out: Path) -> dict:
    grid, (basis, reports) = _train_semicircle(cfg)
    _write_convergence(out, reports)
    _dump_grid_fields(out, basis, grid, cfg.field_dump_limit)
    lam = np.array([r.eigenvalue for r in reports])
    _write_csv(
        out / "eigenvalues.csv",
        ["index", "eigenvalue"],
        [(i + 1, lam[i]) for i in range(len(basis))],
    )
    errors = galerkin_errors(
        basis, grid, builtin_levelset("semicircle"), cfg.galerkin_samples, cfg.seed + 1
    )
    _write_csv(
        out / "sample_errors.csv",
        ["sample", "relative_error"],
        [(j, errors[j]) for j in range(errors.size)],
    )
    mean = float(errors.mean())
    std = float(errors.std(ddof=1)) if errors.size > 1 else 0.0
    return {
        **_report_rows(reports),
        "metrics": {
            "mean_relative_error": mean,
            "sample_std": std,
            "ci95_halfwidth": float(1.96 * std / np.sqrt(errors.size)),
            "n_samples": int(errors.size),
            "basis_size": len(basis),
        },
    }


def _run_vector_laplace(cfg: ExperimentConfig, out: Path) -> dict:
    grid = unit_square_grid(cfg.grid_n)
    ansatz = NeuralAnsatz(
        spec=MlpSpec(2, cfg.hidden, 2, cfg.activation),
        levelset=builtin_levelset("square"),
    )
    basis, reports = solve_spectrum(cfg.n_pairs, VectorLaplace(), ansatz, grid, _schedule(cfg), cfg.seed)
    _write_convergence(out, reports)
    _dump_grid_fields(out, basis, grid, cfg.field_dump_limit)
    reference = 2 * np.pi**2
    lam = reports[0].eigenvalue
    _write_csv(
        out / "eigenvalues.csv",
        ["index", "eigenvalue", "reference", "rel_error"],
        [(1, lam, reference, abs(lam - reference) / reference)],
    )
    return {
        **_report_rows(reports),
        "metrics": {
            "lambda1": float(lam),
            "reference": float(reference),
            "rel_error": float(abs(lam - reference) / reference),
        },
    }


def _elasticity_field(cfg: ExperimentConfig, a: float, mode: Optional[str] = None) -> ModulusField:
    return ModulusField(
        e0=cfg.e0, e1=cfg.e1, q=cfg.q_steepness, a=float(a), mode=mode or cfg.modulus_mode
    )


def _run_uq_elasticity(cfg: ExperimentConfig, out: Path) -> dict:
    density = uniform_trapezoid_density(0.0, 1.0, cfg.stochastic_nodes)
    grid = unit_square_grid(cfg.grid_n)
    slices = ParametricSlices(
        a_values=density.points, rho=density.weights, grids=[grid] * density.size
    )
    kinds = [PlaneStress(field=_elasticity_field(cfg, a), nu=cfg.nu) for a in density.points]
    ansatz = NeuralAnsatz(
        spec=MlpSpec(3, cfg.hidden, 2, cfg.activation),
        levelset=builtin_levelset("square"),
    )
    bases, reports, slice_tables = solve_parametric_spectrum(
        cfg.n_pairs, kinds, ansatz, slices, _schedule(cfg), cfg.seed
    )
    _write_convergence(out, reports)
    params = reports[-1].params

    # dense eigenvalue curve and its moments under the training modulus mode
    nodes = uniform_trapezoid_density(0.0, 1.0, cfg.moment_nodes)
    check_support(nodes, float(density.points.min()), float(density.points.max()))
    curve = eigencurve_eval(
        ansatz,
        params,
        lambda a: PlaneStress(field=_elasticity_field(cfg, a), nu=cfg.nu),
        nodes.points,
        grid,
        trained_range=(float(density.points.min()), float(density.points.max())),
    )
    rep = moments(curve, nodes)
    other_mode = "as-printed" if cfg.modulus_mode == "midpoint" else "midpoint"
    curve_other = eigencurve_eval(
        ansatz,
        params,
        lambda a: PlaneStress(field=_elasticity_field(cfg, a, mode=other_mode), nu=cfg.nu),
        nodes.points,
        grid,
        trained_range=(float(density.points.min()), float(density.points.max())),
    )
    rep_other = moments(curve_other, nodes)
    _write_csv(
        out / "eigencurve.csv",
        ["a", f"lambda1_{cfg.modulus_mode}", f"lambda1_{other_mode}"],
        [(nodes.points[i], curve[i], curve_other[i]) for i in range(nodes.size)],
    )

    # referee comparison at held-out interface positions
    a_check = np.linspace(0.05, 0.95, cfg.oracle_samples)
    fd_vals = np.array(
        [
            fd_plane_stress_eigenvalues(
                field=_elasticity_field(cfg, a), nu=cfg.nu, n_cells=cfg.oracle_cells, n_modes=1
            )[0]
            for a in a_check
        ]
    )
    nn_vals = eigencurve_eval(
        ansatz,
        params,
        lambda a: PlaneStress(field=_elasticity_field(cfg, a), nu=cfg.nu),
        a_check,
        grid,
        trained_range=(float(density.points.min()), float(density.points.max())),
    )
    rel = np.abs(nn_vals - fd_vals) / fd_vals
    _write_csv(
        out / "oracle_comparison.csv",
        ["a", "lambda1_network", "lambda1_fd", "rel_error"],
        [(a_check[i], nn_vals[i], fd_vals[i], rel[i]) for i in range(a_check.size)],
    )
    _write_csv(
        out / "eigenvalues.csv",
        ["a", "index", "eigenvalue"],
        [
            (density.points[k], i + 1, slice_tables[i][k])
            for i in range(len(slice_tables))
            for k in range(density.size)
        ],
    )
    for k in (0, density.size // 2, density.size - 1):
        _dump_grid_fields(out, bases[k], grid, cfg.field_dump_limit, suffix=f"_a{k}")
    return {
        **_report_rows(reports),
        "metrics": {
            "avg_rel_error_vs_fd": float(rel.mean()),
            "fd_values": [float(v) for v in fd_vals],
            "network_values": [float(v) for v in nn_vals],
            "check_positions": [float(v) for v in a_check],
            "mean": rep.mean,
            "std": rep.std,
            "mode": cfg.modulus_mode,
            "mean_other_mode": rep_other.mean,
            "std_other_mode": rep_other.std,
            "other_mode": other_mode,
        },
    }


def _run_donut(cfg: ExperimentConfig, out: Path) -> dict:
    radii = np.asarray(cfg.inner_radii, dtype=float)
    rho = np.full(radii.size, 1.0 / radii.size)
    grids = [annulus_polar_grid(a) for a in radii]
    slices = ParametricSlices(a_values=radii, rho=rho, grids=grids)
    ansatz = NeuralAnsatz(
        spec=MlpSpec(3, cfg.hidden, 1, cfg.activation),
        levelset=builtin_levelset("annulus"),
    )
    bases, reports, slice_tables = solve_parametric_spectrum(
        cfg.n_pairs, VectorLaplace() if False else ScalarLaplace(), ansatz, slices, _schedule(cfg), cfg.seed
    )
    _write_convergence(out, reports)
    n_done = len(slice_tables)
    rows = []
    per_slice = []
    all_rel = []
    for k, a in enumerate(radii):
        lam = np.array([slice_tables[i][k] for i in range(n_done)])
        ref = fd_radial_eigenvalues("annulus", n_done, inner_radius=float(a))
        rel = np.abs(lam - ref) / ref
        all_rel.extend(rel.tolist())
        rows.extend((a, i + 1, lam[i], ref[i], rel[i]) for i in range(n_done))
        per_slice.append(
            {
                "a": float(a),
                "eigenvalues": [float(v) for v in lam],
                "fd_reference": [float(v) for v in ref],
                "rel_errors": [float(v) for v in rel],
                "ordered": bool(np.all(np.diff(lam) >= 0)),
            }
        )
        _dump_grid_fields(out, bases[k], grids[k], cfg.field_dump_limit, suffix=f"_a{k}")
    _write_csv(
        out / "eigenvalues.csv",
        ["a", "index", "eigenvalue", "fd_reference", "rel_error"],
        rows,
    )
    return {
        **_report_rows(reports),
        "metrics": {
            "avg_rel_error": float(np.mean(all_rel)),
            "per_slice": per_slice,
        },
    }


def _run_plaplace(cfg: ExperimentConfig, out: Path) -> dict:
    grid = unit_square_grid(cfg.grid_n)
    net = NeuralAnsatz(
        spec=MlpSpec(2, cfg.hidden, 1, cfg.activation),
        levelset=builtin_levelset("square"),
    )
    fa = FourierAnsatz(n_modes=cfg.fourier_modes, init_sigma=cfg.fourier_sigma)
    duel = plaplace_duel(cfg.p_exponent, net, fa, grid, _schedule(cfg), seed=cfg.seed)
    for label, rep in (("network", duel.network), ("fourier", duel.fourier)):
        _write_csv(
            out / f"convergence_{label}.csv",
            ["epoch", "rayleigh", "penalty", "lr"],
            [
                (e, rep.history[e, 0], rep.history[e, 1], rep.history[e, 2])
                for e in range(rep.history.shape[0])
            ],
        )
    _write_csv(
        out / "eigenvalues.csv",
        ["arm", "quotient_initial", "quotient_final"],
        [
            ("network", duel.network.history[0, 0], duel.network.eigenvalue),
            ("fourier", duel.fourier.history[0, 0], duel.fourier.eigenvalue),
        ],
    )
    return {
        "eigenvalues": [float(duel.network.eigenvalue), float(duel.fourier.eigenvalue)],
        "converged": [bool(duel.network.converged), bool(duel.fourier.converged)],
        "epochs": [int(duel.network.epochs), int(duel.fourier.epochs)],
        "metrics": {
            "p": float(cfg.p_exponent),
            "network_final": float(duel.network.eigenvalue),
            "fourier_final": float(duel.fourier.eigenvalue),
            "network_initial": float(duel.network.history[0, 0]),
            "fourier_initial": float(duel.fourier.history[0, 0]),
            "network_below_fourier": bool(duel.network.eigenvalue <= duel.fourier.eigenvalue),
            "fourier_starts_above": bool(duel.fourier.history[0, 0] > duel.network.history[0, 0]),
        },
    }


def _highdim_run_single(args) -> dict:
    cfg, d, batch, epochs, seed = args
    ansatz = NeuralAnsatz(
        spec=MlpSpec(d, cfg.hidden, 1, cfg.activation),
        levelset=builtin_levelset("hypercube-skewed", dim=d),
    )
    schedule = replace(_schedule(cfg), epochs_base=epochs, threshold=None)

    def sampler(rng: np.random.Generator) -> QuadratureGrid:
        return hypercube_mc_batch(d, batch, rng)

    basis, reports = solve_spectrum(1, DDimLaplace(dim=d), ansatz, sampler, schedule, seed)
    rep = reports[0]
    reference = d * np.pi**2
    return {
        "dim": d,
        "batch": batch,
        "epochs": int(rep.epochs),
        "params": ansatz.param_count(),
        "lambda_hat": float(rep.eigenvalue),
        "reference": float(reference),
        "rel_error": float(abs(rep.eigenvalue - reference) / reference),
        "converged": bool(rep.converged),
        "history": rep.history,
        "index": rep.index,
    }


def _run_highdim_first(cfg: ExperimentConfig, out: Path) -> dict:
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(cfg.dims))
    tasks = []
    for j, d in enumerate(cfg.dims):
        batch = cfg.batch_base + cfg.batch_step * (d - 1)
        epochs = cfg.epochs_base + cfg.epochs_dim_step * (d - 1)
        tasks.append((cfg, d, batch, epochs, int(seeds[j].generate_state(1)[0])))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_highdim_run_single, tasks))
    else:
        results = [_highdim_run_single(t) for t in tasks]

    rows = []
    for res in results:
        hist = res.pop("history")
        d = res["dim"]
        _write_csv(
            out / f"convergence_d{d}.csv",
            ["epoch", "rayleigh", "penalty", "lr"],
            [(e, hist[e, 0], hist[e, 1], hist[e, 2]) for e in range(hist.shape[0])],
        )
        res.pop("index")
        rows.append(
            (res["dim"], res["batch"], res["params"], res["epochs"], res["lambda_hat"], res["reference"], res["rel_error"])
        )
    _write_csv(
        out / "eigenvalues.csv",
        ["dim", "batch", "params", "epochs", "lambda_hat", "reference", "rel_error"],
        rows,
    )
    return {
        "eigenvalues": [r["lambda_hat"] for r in results],
        "converged": [r["converged"] for r in results],
        "epochs": [r["epochs"] for r in results],
        "metrics": {
            "per_dim": results,
            "max_rel_error": max(r["rel_error"] for r in results),
        },
    }


def _run_highdim_second(cfg: ExperimentConfig, out: Path) -> dict:
    d = cfg.dim
    ansatz = NeuralAnsatz(
        spec=MlpSpec(d, cfg.hidden, 1, cfg.activation),
        levelset=builtin_levelset("hypercube-skewed", dim=d),
    )

    def sampler(rng: np.random.Generator) -> QuadratureGrid:
        return hypercube_mc_batch(d, cfg.batch_base, rng)

    basis, reports = solve_spectrum(cfg.n_pairs, DDimLaplace(dim=d), ansatz, sampler, _schedule(cfg), cfg.seed)
    _write_convergence(out, reports)
    reference = analytic_eigenvalues("hypercube", cfg.n_pairs, dim=d)
    lam = np.array([r.eigenvalue for r in reports])
    rel = np.abs(lam - reference[: lam.size]) / reference[: lam.size]
    _write_csv(
        out / "eigenvalues.csv",
        ["index", "lambda_hat", "reference", "rel_error"],
        [(i + 1, lam[i], reference[i], rel[i]) for i in range(lam.size)],
    )
    metrics = {
        "per_index_rel_error": [float(v) for v in rel],
        "reference": [float(v) for v in reference[: lam.size]],
    }
    return {**_report_rows(reports), "metrics": metrics}


_RUNNERS = {
    "fourier-1d": _run_fourier_1d,
    "semicircle-basis": _run_semicircle,
    "galerkin-heat": _run_galerkin,
    "uq-elasticity": _run_uq_elasticity,
    "vector-laplace-check": _run_vector_laplace,
    "donut-parametric": _run_donut,
    "plaplace-duel": _run_plaplace,
    "highdim-first": _run_highdim_first,
    "highdim-second": _run_highdim_second,
}


def resolve_out_dir(cfg: ExperimentConfig) -> Path:
    root = cfg.out_dir or os.environ.get("RAYSPEC_OUT") or "runs"
    out = Path(root) / cfg.experiment
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Validate, run, and archive one study; returns the summary document."""
    problems = validate_config(cfg)
    if problems:
        raise ValueError("invalid config:\n" + "\n".join(problems))
    out = resolve_out_dir(cfg)
    started = time.time()
    payload = _RUNNERS[cfg.experiment](cfg, out)
    payload["runtime_seconds"] = round(time.time() - started, 3)
    save_config(cfg, out / "config.ini")
    return _summary(out, cfg, payload)
