"""Command-line entry point.

    brane <task> --config <path> --out <dir> [--grid-scale k]

Tasks: geometry, action, relax, jacobi, current, sympform, convergence.
Each run writes `report.json` (top-level keys: task, config_echo,
metrics, files) plus task-specific CSV artifacts into the output
directory.  Reports are byte-identical across repeated runs of the same
config: no randomness, fixed-order reductions, sorted JSON keys.

Exit status: 0 success, 2 config/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import actions, linearized, solver, symplectic
from .background import BackgroundModel
from .errors import BraneError, ConfigError
from .frame_geometry import build_geometry
from .shapes import make_embedding, make_perturbation
from .worldvolume import Embedding, GridSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

TASKS = ("geometry", "action", "relax", "jacobi", "current", "sympform", "convergence")


# -- config ---------------------------------------------------------------------

_SCHEMA = {
    "background": {
        "kind": str,
        "signature": list,
        "kappa": (int, float),
    },
    "grid": {
        "sizes": list,
        "spacings": list,
        "periodic": list,
        "origin": list,
    },
    "embedding": {
        "name": str,
        "params": dict,
        "csv": str,
    },
    "perturbations": list,
    "action": {"mu": (int, float), "alpha": (int, float)},
    "relax": {
        "step": (int, float),
        "max_iters": int,
        "target": (int, float),
        "fix_boundary": bool,
    },
    "jacobi": {"operator": str, "num_eigs": int},
    "current": {"kind": str, "slice_axis": int},
    "sympform": {"kind": str, "slice_axis": int, "shift_coefficient": (int, float)},
    "convergence": {
        "quantity": str,
        "reference": (int, float),
        "scales": list,
    },
}

_PERTURBATION_KEYS = {
    "kind": str,
    "component": int,
    "amplitude": (int, float),
    "kvec": list,
    "phase": (int, float),
    "center": list,
    "width": (int, float),
}


def _check_block(block, schema, path):
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    for key, val in block.items():
        if key not in schema:
            raise ConfigError(f"{path}.{key}: unknown key")
        expected = schema[key]
        if isinstance(expected, dict):
            _check_block(val, expected, f"{path}.{key}")
        elif not isinstance(val, expected):
            raise ConfigError(f"{path}.{key}: expected {expected}")


def parse_config(text: str) -> dict:
    """Parse and validate a JSON run configuration."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config: expected a JSON object")
    for key, val in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError(f"{key}: unknown key")
        spec = _SCHEMA[key]
        if key == "perturbations":
            if not isinstance(val, list):
                raise ConfigError("perturbations: expected a list")
            for p, item in enumerate(val):
                _check_block(item, _PERTURBATION_KEYS, f"perturbations[{p}]")
        elif isinstance(spec, dict):
            _check_block(val, spec, key)

    if "grid" not in cfg:
        raise ConfigError("grid: required block missing")
    grid = cfg["grid"]
    for field in ("sizes", "spacings", "periodic"):
        if field not in grid:
            raise ConfigError(f"grid.{field}: required key missing")
    if any(h <= 0 for h in grid["spacings"]):
        raise ConfigError("grid.spacings: entries must be positive")
    if "background" in cfg:
        kind = cfg["background"].get("kind", "flat")
        if kind not in ("flat", "constant_curvature"):
            raise ConfigError(f"background.kind: unknown kind {kind!r}")
    return cfg


def _build_grid(cfg: dict, scale: int) -> GridSpec:
    g = cfg["grid"]
    try:
        grid = GridSpec(tuple(g["sizes"]), tuple(g["spacings"]),
                        tuple(g["periodic"]), tuple(g.get("origin") or ()) or None)
    except ValueError as err:
        raise ConfigError(f"grid: {err}") from err
    return grid.scaled(scale) if scale != 1 else grid


def _build_model(cfg: dict) -> BackgroundModel:
    b = cfg.get("background", {})
    try:
        return BackgroundModel(b.get("kind", "flat"),
                               tuple(b.get("signature", (1.0, 1.0, 1.0))),
                               float(b.get("kappa", 0.0)))
    except ValueError as err:
        raise ConfigError(f"background: {err}") from err


def _read_embedding_csv(path: Path, grid: GridSpec) -> Embedding:
    rows = np.genfromtxt(path, delimiter=",", names=True)
    names = [n for n in rows.dtype.names if n.startswith("x_")]
    if not names:
        raise ConfigError("embedding.csv: no x_* columns found")
    data = np.stack([rows[n] for n in names], axis=-1)
    if data.shape[0] != grid.num_nodes:
        raise ConfigError("embedding.csv: row count does not match the grid")
    return Embedding(grid, data.reshape(grid.shape + (len(names),)))


def _build_embedding(cfg: dict, grid: GridSpec, model: BackgroundModel) -> Embedding:
    emb = cfg.get("embedding")
    if not emb:
        raise ConfigError("embedding: required block missing")
    if "csv" in emb:
        return _read_embedding_csv(Path(emb["csv"]), grid)
    if "name" not in emb:
        raise ConfigError("embedding.name: required key missing")
    return make_embedding(emb["name"], emb.get("params", {}), grid, model)


def _perturbation_pair(cfg, geom):
    specs = cfg.get("perturbations") or []
    if len(specs) < 2:
        raise ConfigError("perturbations: need at least two entries for pair tasks")
    return make_perturbation(specs[0], geom), make_perturbation(specs[1], geom)


# -- CSV output -------------------------------------------------------------------


def _write_csv(path: Path, grid: GridSpec, columns: list) -> None:
    """columns: list of (name, flat float array of length num_nodes)."""
    coords = grid.coords()
    names = [f"xi_{a}" for a in range(grid.dim)] + [name for name, _ in columns]
    table = np.column_stack([c.ravel() for c in coords]
                            + [np.asarray(v).ravel() for _, v in columns])
    header = ",".join(names)
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")


def _geometry_columns(geom) -> list:
    d, c = geom.dim, geom.codim
    cols = []
    for a in range(d):
        for b in range(d):
            cols.append((f"gamma_{a}{b}", geom.gamma[..., a, b]))
    for a in range(d):
        for b in range(d):
            for i in range(c):
                cols.append((f"k_{a}{b}_{i}", geom.second[..., a, b, i]))
    for i in range(c):
        cols.append((f"kmean_{i}", geom.mean[..., i]))
    for a in range(d):
        for i in range(c):
            for j in range(c):
                cols.append((f"twist_{a}_{i}{j}", geom.twist[..., a, i, j]))
    return cols


# -- tasks -----------------------------------------------------------------------


def _task_geometry(cfg, grid, model, out):
    geom = build_geometry(_build_embedding(cfg, grid, model), model)
    n_low = geom.normal_low
    res_t = float(np.abs(np.einsum("...am,...im->...ai", geom.tangent, n_low)).max())
    gram = np.einsum("...im,...jm->...ij", geom.normal, n_low)
    res_n = float(np.abs(gram - np.eye(geom.codim)).max())
    _write_csv(out / "geometry.csv", grid, _geometry_columns(geom))
    metrics = {
        "eom_max_residual": float(np.abs(geom.mean).max()),
        "orthogonality_residual": res_t,
        "normal_gram_residual": res_n,
        "area": float(np.sum(geom.weights * geom.sqrtg)),
    }
    return metrics, ["geometry.csv"]


def _task_action(cfg, grid, model, out):
    geom = build_geometry(_build_embedding(cfg, grid, model), model)
    pars = cfg.get("action", {})
    mu = float(pars.get("mu", 1.0))
    alpha = float(pars.get("alpha", 1.0))
    metrics = {
        "dng": actions.dng_action(geom, mu),
        "qec": actions.qec_action(geom, alpha),
        "eom_max_residuals": {
            "dng": float(np.abs(actions.dng_eom_residual(geom)).max()),
            "qec": float(np.abs(actions.qec_eom_residual(geom)).max()),
        },
    }
    return metrics, []


def _boundary_mask(grid: GridSpec) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    for a in range(grid.dim):
        if grid.periodic[a]:
            continue
        sl = [slice(None)] * grid.dim
        sl[a] = 0
        mask[tuple(sl)] = True
        sl[a] = -1
        mask[tuple(sl)] = True
    return mask


def _task_relax(cfg, grid, model, out):
    emb0 = _build_embedding(cfg, grid, model)
    pars = cfg.get("relax", {})
    mask = _boundary_mask(grid) if pars.get("fix_boundary", True) else None
    hmin = min(grid.spacings)
    params = solver.RelaxParams(
        step=float(pars.get("step", 0.2 * hmin * hmin)),
        max_iters=int(pars.get("max_iters", 20000)),
        target=float(pars.get("target", 1e-8)),
        fixed_mask=mask,
    )
    result = solver.relax_dng(emb0, model, params)
    n = result.embedding.ambient_dim
    cols = [(f"x_{m}", result.embedding.data[..., m]) for m in range(n)]
    _write_csv(out / "relaxed.csv", grid, cols)
    areas = np.asarray(result.areas)
    metrics = {
        "converged": bool(result.converged),
        "iterations": len(result.residuals) - 1,
        "final_residual": result.final_residual,
        "final_step": result.final_step,
        "area_initial": result.areas[0],
        "area_final": result.areas[-1],
        "area_monotone": bool(np.all(np.diff(areas) <= solver.AREA_SLACK
                                     * np.maximum(1.0, np.abs(areas[:-1])))),
        "residual_history_head": [float(r) for r in result.residuals[:20]],
    }
    return metrics, ["relaxed.csv"]


def _task_jacobi(cfg, grid, model, out):
    geom = build_geometry(_build_embedding(cfg, grid, model), model)
    pars = cfg.get("jacobi", {})
    kind = pars.get("operator", linearized.OP_JACOBI)
    if kind not in (linearized.OP_JACOBI, linearized.OP_JACOBI_SQUARE):
        raise ConfigError(f"jacobi.operator: unknown operator {kind!r}")
    fields, head, tau = solver.solve_jacobi_kernel(
        geom, kind, num_eigs=int(pars.get("num_eigs", 8)))
    op = linearized.assemble(geom, kind)
    sym = linearized.symmetry_residual(op, linearized.interior_dof_mask(geom))
    metrics = {
        "spectrum_head": head,
        "kernel_dimension": len(fields),
        "kernel_threshold": tau,
        "symmetry_residual": sym,
    }
    return metrics, []


def _currents_for_pair(cfg, geom, p1, p2, kind):
    if kind == "dng_pair":
        return symplectic.dng_potential_pair(
            p1["normal"], p2["normal"], geom,
            p1.get("tangential"), p2.get("tangential"))
    if kind == "qec_adjoint_pair":
        return symplectic.qec_current_adjoint_pair(p1["normal"], p2["normal"], geom)
    if kind == "qec_from_potential":
        return symplectic.qec_current_from_potential(p1["normal"], p2["normal"], geom)
    raise ConfigError(f"current.kind: unknown kind {kind!r}")


def _task_current(cfg, grid, model, out):
    geom = build_geometry(_build_embedding(cfg, grid, model), model)
    p1, p2 = _perturbation_pair(cfg, geom)
    pars = cfg.get("current", {})
    kind = pars.get("kind", "qec_adjoint_pair")
    current = _currents_for_pair(cfg, geom, p1, p2, kind)
    adj = symplectic.qec_current_adjoint_pair(p1["normal"], p2["normal"], geom)
    pot = symplectic.qec_current_from_potential(p1["normal"], p2["normal"], geom)
    scale = float(np.abs(adj.data).max()) + 1e-300
    route_rel = float(np.abs(adj.data - pot.data).max()) / scale
    axis = int(pars.get("slice_axis", 0))
    omegas = symplectic.omega_by_slices(current, axis)
    cols = [(f"j_{a}", current.data[..., a]) for a in range(geom.dim)]
    _write_csv(out / "current.csv", grid, cols)
    metrics = {
        "kind": kind,
        "div_norms": {"max": current.div_max, "l2": current.div_l2},
        "omega_by_slice": [v.value for v in omegas],
        "route_equality_residual": route_rel,
    }
    return metrics, ["current.csv"]


def _task_sympform(cfg, grid, model, out):
    geom = build_geometry(_build_embedding(cfg, grid, model), model)
    p1, p2 = _perturbation_pair(cfg, geom)
    pars = cfg.get("sympform", {})
    kind = pars.get("kind", "qec_adjoint_pair")
    axis = int(pars.get("slice_axis", 0))
    current = _currents_for_pair(cfg, geom, p1, p2, kind)
    swapped = _currents_for_pair(cfg, geom, p2, p1, kind)
    omegas = symplectic.omega_by_slices(current, axis)
    slc = omegas[len(omegas) // 2].slice_spec
    shift = float(pars.get("shift_coefficient", 0.5))
    coeffs = np.full((geom.dim, geom.codim), shift)
    shift_report = symplectic.potential_shift_report(current, slc, coeffs, p1["normal"])
    tang = np.einsum("...,...m->...m",
                     np.sin(grid.coords()[0]), geom.tangent[..., 0, :])
    gauge = symplectic.gauge_degeneracy_check(tang, p2["normal"], geom)
    vals = [v.value for v in omegas]
    metrics = {
        "omega_by_slice": vals,
        "omega_slice_spread": float(np.max(vals) - np.min(vals)) if vals else 0.0,
        "swap_antisymmetry": float(abs(symplectic.symplectic_form(swapped, slc).value
                                       + symplectic.symplectic_form(current, slc).value)),
        "potential_shift": shift_report,
        "gauge_degeneracy": gauge,
    }
    return metrics, []


def _task_convergence(cfg, grid, model, out):
    pars = cfg.get("convergence", {})
    quantity = pars.get("quantity", "mean_curvature_error")
    scales = [int(s) for s in pars.get("scales", [1, 2, 4])]
    ref = float(pars.get("reference", 0.0))
    emb_cfg = cfg.get("embedding")
    if not emb_cfg or "name" not in emb_cfg:
        raise ConfigError("convergence: needs a named embedding")

    def evaluator(scale):
        g = grid.scaled(scale)
        emb = make_embedding(emb_cfg["name"], emb_cfg.get("params", {}), g, model)
        geom = build_geometry(emb, model, light=True)
        if quantity == "mean_curvature_error":
            mag = np.sqrt(np.einsum("...i,...i->...", geom.mean, geom.mean))
            return float(np.abs(mag - ref).max())
        if quantity == "area_error":
            area = float(np.sum(geom.weights * geom.sqrtg))
            return abs(area - ref)
        raise ConfigError(f"convergence.quantity: unknown quantity {quantity!r}")

    study = solver.convergence_study(evaluator, scales)
    metrics = {
        "quantity": quantity,
        "scales": list(study.scales),
        "errors": list(study.errors),
        "fitted_order": None if study.flag != "fit" else study.order,
        "flag": study.flag,
    }
    return metrics, []


_RUNNERS = {
    "geometry": _task_geometry,
    "action": _task_action,
    "relax": _task_relax,
    "jacobi": _task_jacobi,
    "current": _task_current,
    "sympform": _task_sympform,
    "convergence": _task_convergence,
}


def run(task: str, cfg: dict, out_dir: Path, grid_scale: int = 1) -> dict:
    grid = _build_grid(cfg, grid_scale)
    model = _build_model(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics, files = _RUNNERS[task](cfg, grid, model, out_dir)
    report = {"task": task, "config_echo": cfg, "metrics": metrics, "files": files}
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="brane",
        description="Worldvolume geometry, actions, linearised operators, "
                    "and symplectic currents on finite-difference grids.")
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--grid-scale", type=int, default=1,
                        help="multiply all grid sizes (refinement ladders)")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(Path(args.config).read_text())
        run(args.task, cfg, Path(args.out), args.grid_scale)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (BraneError, ValueError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
