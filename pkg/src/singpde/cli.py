"""Experiment runner: ``singpde solve|verify|sweep <config>``.

``solve`` drives the regularization schedule and writes per-level solution
files plus a sequence summary.  ``verify`` runs one of the named check
suites and writes one row per check.  ``sweep`` runs the Cartesian product
of the configured parameter grids concurrently and aggregates one row per
run.  All CSV output uses 17 significant digits so identical configurations
reproduce byte-identical files.

Exit codes: 0 ok, 1 configuration error, 2 nonconvergence, 3 failed check
or invariant violation.  Every nonzero exit is accompanied by a
machine-readable ``reason,...`` line on stdout (and reason.csv when the
output directory exists).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import fields
from .config import ConfigError, RunConfig, SUITES
from .measures import RadonMeasure, mollify, scale_measure
from .mesh import build_grid, l1_norm, min_on_compact
from .singularity import SingularNonlinearity
from .solver import (
    ConvergenceFailure,
    ProblemSpec,
    SolverConfig,
    build_sub_super,
    comparison_check,
    distance_lower_bound_check,
    monotone_check,
    solve_auxiliary_v,
    solve_clamped,
    solve_regularized,
    solve_sequence,
)

__all__ = ["main", "main_entry"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGENCE = 2
EXIT_INVARIANT = 3

_MANUFACTURED_CELLS = (32, 64, 128)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _reason(out_dir: Path | None, code: int, category: str, detail: str) -> int:
    line = f"reason,{code},{category},{detail}"
    print(line)
    if out_dir is not None and out_dir.is_dir():
        (out_dir / "reason.csv").write_text(
            "code,category,detail\n" + f"{code},{category},{detail}\n",
            encoding="utf-8",
        )
    return code


class _NonConverged(RuntimeError):
    pass


def _spec_from_config(cfg: RunConfig) -> ProblemSpec:
    grid = build_grid(cfg.dim, cfg.cells, cfg.grid_margin)
    return ProblemSpec(grid=grid, h=cfg.h, f=cfg.f, mu=cfg.mu, n=cfg.n_schedule[-1])


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _cmd_solve(cfg: RunConfig, out_dir: Path) -> int:
    spec = _spec_from_config(cfg)
    seq = solve_sequence(spec, cfg.n_schedule, cfg.solver)

    coord_names = ("x", "y", "z")[: cfg.dim]
    for n, res in zip(seq.n_schedule, seq.results):
        rows = [
            tuple(coord) + (value,)
            for coord, value in zip(spec.grid.node_coords, res.u.values)
        ]
        _write_csv(out_dir / f"solution_n{n}.csv", coord_names + ("u",), rows)

    header = ["level", "iterations", "residual", "l1_diff", "max_diff"]
    header += [f"min_K_{m:g}" for m in cfg.margins]
    rows = []
    for j, (n, res) in enumerate(zip(seq.n_schedule, seq.results)):
        l1 = seq.l1_diffs[j - 1] if j > 0 and j - 1 < len(seq.l1_diffs) else float("nan")
        mx = seq.max_diffs[j - 1] if j > 0 and j - 1 < len(seq.max_diffs) else float("nan")
        minima = [min_on_compact(res.u, m) for m in cfg.margins]
        rows.append([n, res.iterations, res.residual, l1, mx] + minima)
    _write_csv(out_dir / "sequence.csv", header, rows)

    if seq.aborted_level is not None:
        return _reason(
            out_dir,
            EXIT_NONCONVERGENCE,
            "nonconvergence",
            f"level {seq.aborted_level} did not converge within "
            f"{cfg.solver.max_iters} iterations",
        )
    for n, res in zip(seq.n_schedule, seq.results):
        floor = -1e-12 * max(1.0, float(np.max(np.abs(res.u.values))))
        if float(res.u.values.min()) < floor:
            return _reason(
                out_dir,
                EXIT_INVARIANT,
                "invariant",
                f"negative nodal value at level {n}",
            )
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify suites: each returns rows (name, observed, bound, status)
# ---------------------------------------------------------------------------


def _require_sequence(spec, schedule, solver_cfg):
    seq = solve_sequence(spec, schedule, solver_cfg)
    if seq.aborted_level is not None:
        raise _NonConverged(f"level {seq.aborted_level} did not converge")
    return seq


def _check(name, observed, bound, ok) -> tuple:
    return (name, observed, bound, "pass" if ok else "fail")


def _na(name, note="not-applicable") -> tuple:
    return (name, note, "", "na")


def _suite_manufactured(cfg: RunConfig):
    if cfg.dim != 1:
        return [_na("manufactured.error", "needs dim=1")]
    if cfg.h.kind != "pure_power":
        return [_na("manufactured.error", "needs pure_power h")]
    gamma = cfg.h.gamma
    f = fields.manufactured_singular(gamma)
    errors = {}
    for cells in _MANUFACTURED_CELLS:
        grid = build_grid(1, cells)
        spec = ProblemSpec(grid=grid, h=cfg.h, f=f, mu=RadonMeasure(), n=10**6)
        res = solve_regularized(spec, replace(cfg.solver, initial_guess=None))
        if not res.converged:
            raise _NonConverged(f"manufactured solve at cells={cells}")
        exact = np.sin(np.pi * grid.node_coords[:, 0])
        errors[cells] = float(np.max(np.abs(res.u.values - exact)))
    hs = np.log([1.0 / c for c in _MANUFACTURED_CELLS])
    es = np.log([errors[c] for c in _MANUFACTURED_CELLS])
    slope = float(np.polyfit(hs, es, 1)[0])
    rows = [_check("manufactured.error_cells64", errors[64], 2e-3, errors[64] <= 2e-3)]
    rows.append(
        _check("manufactured.order_slope", slope, "2+-0.2", abs(slope - 2.0) <= 0.2)
    )
    return rows


def _suite_monotone(cfg: RunConfig):
    spec = _spec_from_config(cfg).without_measure()
    seq = _require_sequence(spec, cfg.n_schedule, cfg.solver)
    report = monotone_check([r.u for r in seq.results], tol=cfg.solver.tol_mono)
    return [
        _check(
            "monotone.max_violation",
            report.max_violation,
            report.tol,
            report.passed,
        )
    ]


def _suite_lower_bound(cfg: RunConfig):
    spec = _spec_from_config(cfg)
    seq = _require_sequence(spec, cfg.n_schedule, cfg.solver)
    vseq = _require_sequence(spec.without_measure(), cfg.n_schedule, cfg.solver)
    domination = max(
        comparison_check(u.u, v.u, tol=cfg.solver.tol_mono).max_violation
        for u, v in zip(seq.results, vseq.results)
    )
    rows = [
        _check(
            "lower_bound.domination",
            domination,
            cfg.solver.tol_mono,
            domination <= cfg.solver.tol_mono,
        )
    ]
    top = len(seq.results) // 2
    for margin in cfg.margins:
        minima = [min_on_compact(r.u, margin) for r in seq.results[top:]]
        c = min(minima)
        spread = (max(minima) - min(minima)) / max(minima) if max(minima) > 0 else 1.0
        rows.append(_check(f"lower_bound.c_K_margin{margin:g}", c, ">0", c > 0))
        rows.append(
            _check(f"lower_bound.spread_margin{margin:g}", spread, 0.10, spread <= 0.10)
        )
    return rows


_ENERGY_KS = (1.0, 2.0, 4.0, 8.0, 16.0)


def _suite_energy_law(cfg: RunConfig):
    if cfg.h.gamma < 1.0:
        return [_na("energy_law.slope", "needs gamma>=1")]
    spec = _spec_from_config(cfg)
    seq = _require_sequence(spec, cfg.n_schedule, cfg.solver)
    top = len(seq.results) // 2
    worst_slope = -np.inf
    for res in seq.results[top:]:
        energies = [diag.truncation_energy(res.u, k, cfg.h.gamma) for k in _ENERGY_KS]
        pairs = [(k, e) for k, e in zip(_ENERGY_KS, energies) if e > 0]
        if len(pairs) < 2:
            return [_na("energy_law.slope", "degenerate energies")]
        ks, es = zip(*pairs)
        slope = float(np.polyfit(np.log(ks), np.log(es), 1)[0])
        worst_slope = max(worst_slope, slope)
    bound = cfg.h.gamma + 0.15
    return [_check("energy_law.slope", worst_slope, bound, worst_slope <= bound)]


def _suite_tails(cfg: RunConfig):
    if cfg.dim != 3:
        return [
            _na("tails.gradient_slope", "needs dim=3"),
            _na("tails.u_slope", "needs dim=3"),
        ]
    spec = _spec_from_config(cfg)
    seq = _require_sequence(spec, cfg.n_schedule, cfg.solver)
    u = seq.final.u
    rows = []

    grad = diag.discrete_gradient_magnitude(u)
    thresholds = diag.default_thresholds(grad, floor=1.0)
    fit = diag.marcinkiewicz_fit(
        diag.distribution_function(grad, thresholds, grid=spec.grid),
        target_exponent=1.5,
    )
    if not fit.conclusive:
        rows.append(_na("tails.gradient_slope", "inconclusive"))
    else:
        rows.append(
            _check("tails.gradient_slope", fit.slope, -1.3, fit.slope <= -1.3)
        )
        rows.append(
            _check("tails.gradient_r2", fit.r_squared, 0.9, fit.r_squared >= 0.9)
        )

    thresholds = diag.default_thresholds(u.values, floor=1.0)
    fit = diag.marcinkiewicz_fit(
        diag.distribution_function(u, thresholds), target_exponent=3.0
    )
    if not fit.conclusive:
        rows.append(_na("tails.u_slope", "inconclusive"))
    else:
        rows.append(_check("tails.u_slope", fit.slope, -2.7, fit.slope <= -2.7))
        rows.append(_check("tails.u_r2", fit.r_squared, 0.9, fit.r_squared >= 0.9))
    return rows


def _kato_solver_cfg(cfg: RunConfig) -> SolverConfig:
    # Near-exact identities need tighter tolerances than ordinary runs;
    # 1e-12 stays within what conjugate gradients can actually attain.
    tol_fp = min(cfg.solver.resolved_tol_fp(build_grid(cfg.dim, 2)), 1e-12)
    return replace(cfg.solver, tol_fp=tol_fp, tol_lin=1e-12, max_iters=max(cfg.solver.max_iters, 800))


def _suite_kato(cfg: RunConfig):
    spec = _spec_from_config(cfg)
    solver_cfg = _kato_solver_cfg(cfg)
    n = cfg.n_schedule[-1]
    mu2 = cfg.mu
    mu1 = scale_measure(cfg.mu, 2.0)
    res1 = solve_regularized(replace(spec, mu=mu1), solver_cfg)
    res2 = solve_regularized(replace(spec, mu=mu2), solver_cfg)
    if not (res1.converged and res2.converged):
        raise _NonConverged("kato solves")
    mu1_d = mollify(mu1, spec.grid, n)
    mu2_d = mollify(mu2, spec.grid, n)
    phi0 = diag.torsion_function(spec.grid, tol=1e-12)
    forward = diag.kato_residual(res1, res2, mu1_d, mu2_d, cfg.f, cfg.h, phi0)
    mirrored = diag.kato_residual(res2, res1, mu2_d, mu1_d, cfg.f, cfg.h, phi0)
    return [
        _check("kato.residual_forward", forward.residual, -forward.tol, forward.passed),
        _check("kato.residual_mirrored", mirrored.residual, -mirrored.tol, mirrored.passed),
    ]


def _suite_uniqueness(cfg: RunConfig):
    if not cfg.h.strictly_decreasing:
        return [_na("uniqueness.gap", "needs strictly decreasing h")]
    spec = _spec_from_config(cfg)
    cold = solve_regularized(spec, cfg.solver)
    if not cold.converged:
        raise _NonConverged("uniqueness cold start")
    f_vals = cfg.f(spec.grid.node_coords)
    if np.all(f_vals > 0):
        start = build_sub_super(spec, cfg.solver).sup
    else:
        from .mesh import GridFunction

        start = GridFunction(spec.grid, cold.u.values + 1.0)
    warm = solve_regularized(spec, replace(cfg.solver, initial_guess=start))
    if not warm.converged:
        raise _NonConverged("uniqueness supersolution start")
    gap = float(np.max(np.abs(cold.u.values - warm.u.values)))
    return [_check("uniqueness.gap", gap, 1e-8, gap <= 1e-8)]


def _suite_sandwich(cfg: RunConfig):
    spec = _spec_from_config(cfg)
    f_vals = cfg.f(spec.grid.node_coords)
    if not np.all(f_vals > 0):
        return [_na("sandwich.breach", "needs f>0 at every node")]
    sandwich = build_sub_super(spec, cfg.solver)
    res = solve_clamped(spec, sandwich, cfg.solver)
    if not res.converged:
        raise _NonConverged("clamped solve")
    rows = [
        _check("sandwich.breach", res.breach, cfg.solver.tol_mono, res.sandwich_ok)
    ]
    ratios = []
    for cells in (cfg.cells, 2 * cfg.cells):
        grid = build_grid(cfg.dim, cells, cfg.grid_margin)
        sub_spec = ProblemSpec(grid=grid, h=cfg.h, f=cfg.f, mu=RadonMeasure(), n=spec.n)
        v = solve_auxiliary_v(sub_spec, cfg.solver)
        if not v.converged:
            raise _NonConverged(f"distance-bound solve at cells={cells}")
        ratios.append(distance_lower_bound_check(v.u))
    rows.append(_check("sandwich.distance_ratio", ratios[0], ">0", ratios[0] > 0))
    stable = ratios[0] > 0 and 0.5 <= ratios[1] / ratios[0] <= 2.0
    rows.append(
        _check(
            "sandwich.distance_ratio_stability",
            ratios[1] / ratios[0] if ratios[0] > 0 else float("nan"),
            "0.5..2",
            stable,
        )
    )
    return rows


_SUITE_RUNNERS = {
    "lower_bound": _suite_lower_bound,
    "monotone": _suite_monotone,
    "energy_law": _suite_energy_law,
    "tails": _suite_tails,
    "kato": _suite_kato,
    "uniqueness": _suite_uniqueness,
    "sandwich": _suite_sandwich,
    "manufactured": _suite_manufactured,
}


def _cmd_verify(cfg: RunConfig, suite: str, out_dir: Path) -> int:
    names = list(_SUITE_RUNNERS) if suite == "all" else [suite]
    rows = []
    try:
        for name in names:
            rows.extend(_SUITE_RUNNERS[name](cfg))
    except _NonConverged as exc:
        _write_csv(out_dir / f"verify_{suite}.csv", ("name", "observed", "bound", "status"), rows)
        return _reason(out_dir, EXIT_NONCONVERGENCE, "nonconvergence", str(exc))
    _write_csv(out_dir / f"verify_{suite}.csv", ("name", "observed", "bound", "status"), rows)
    for row in rows:
        print(",".join(_fmt(x) for x in row))
    failed = [r for r in rows if r[3] == "fail"]
    if failed:
        return _reason(
            out_dir,
            EXIT_INVARIANT,
            "check_failed",
            ";".join(r[0] for r in failed),
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_measure(name: str) -> RadonMeasure:
    if name == "none":
        return RadonMeasure()
    if name == "dirac_center":
        return RadonMeasure(atoms=(((0.5, 0.5, 0.5), 1.0),))
    return RadonMeasure(density=fields.constant(1.0))  # uniform


def _sweep_h(cfg: RunConfig, gamma: float) -> SingularNonlinearity:
    if cfg.h.kind == "pure_power":
        return SingularNonlinearity.pure_power(gamma)
    if cfg.h.kind == "shifted_power":
        return SingularNonlinearity.shifted_power(gamma, cfg.h.shift)
    return SingularNonlinearity.bounded_plateau(gamma, cfg.h.plateau)


def _sweep_row(cfg: RunConfig, gamma: float, cells: int, measure_name: str):
    base = [gamma, cells, measure_name]
    try:
        grid = build_grid(cfg.dim, cells, cfg.grid_margin)
        spec = ProblemSpec(
            grid=grid,
            h=_sweep_h(cfg, gamma),
            f=cfg.f,
            mu=_sweep_measure(measure_name),
            n=cfg.n_schedule[-1],
        )
        seq = solve_sequence(spec, cfg.n_schedule, cfg.solver)
        final = seq.final
        minima = [min_on_compact(final.u, m) for m in cfg.margins]
        status = "ok" if seq.aborted_level is None else "nonconverged"
        return base + [
            status,
            len(seq.results),
            seq.l1_diffs[-1] if seq.l1_diffs else float("nan"),
            final.residual,
            l1_norm(final.u),
            *minima,
        ]
    except Exception as exc:  # per-row isolation: record, keep sweeping
        return base + [f"error:{type(exc).__name__}", 0, float("nan"), float("nan"), float("nan")] + [
            float("nan")
        ] * len(cfg.margins)


def _cmd_sweep(cfg: RunConfig, out_dir: Path, threads: int) -> int:
    gammas = cfg.sweep_gammas
    cells_list = cfg.sweep_cells or (cfg.cells,)
    measures = cfg.sweep_measures or ("none",)
    if not gammas:
        raise ConfigError("sweep.gamma", "sweep needs a nonempty gamma list")
    jobs = sorted(
        (g, c, m) for g in gammas for c in cells_list for m in measures
    )
    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(lambda job: _sweep_row(cfg, *job), jobs))
    header = (
        ["gamma", "cells", "measure", "status", "levels", "final_l1_diff", "final_residual", "final_l1_norm"]
        + [f"min_K_{m:g}" for m in cfg.margins]
    )
    _write_csv(out_dir / "sweep.csv", header, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singpde",
        description="Solve and verify singular elliptic problems with measure data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a key-value config file")
        p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        p.add_argument("--threads", type=int, default=None, help="worker threads for sweep")
        if name == "verify":
            p.add_argument("--suite", default=None, choices=SUITES)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config)
    except ConfigError as exc:
        return _reason(None, EXIT_CONFIG, "config", str(exc))
    except OSError as exc:
        return _reason(None, EXIT_CONFIG, "config", f"cannot read {args.config}: {exc}")

    out_dir = Path(args.out if args.out is not None else cfg.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _reason(None, EXIT_NONCONVERGENCE, "infrastructure", str(exc))

    threads = args.threads if args.threads is not None else cfg.threads

    try:
        if args.command == "solve":
            return _cmd_solve(cfg, out_dir)
        if args.command == "verify":
            suite = args.suite if args.suite is not None else cfg.suite
            return _cmd_verify(cfg, suite, out_dir)
        return _cmd_sweep(cfg, out_dir, threads)
    except ConfigError as exc:
        return _reason(out_dir, EXIT_CONFIG, "config", str(exc))
    except ConvergenceFailure as exc:
        return _reason(out_dir, EXIT_NONCONVERGENCE, "nonconvergence", str(exc))
    except Exception as exc:  # infrastructure failure
        return _reason(out_dir, EXIT_NONCONVERGENCE, "infrastructure", f"{type(exc).__name__}: {exc}")


def main_entry() -> None:
    sys.exit(main())
