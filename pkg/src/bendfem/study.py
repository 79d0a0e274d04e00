"""Experiment orchestration: grid sweeps, reference comparisons, lab sweeps.

Every study emits one CSV (rows per grid plus fitted-order comment lines) and,
unless disabled, one log-log figure next to it.  Runs are deterministic for a
fixed config and seed.
"""

from __future__ import annotations

import concurrent.futures
import os
from dataclasses import dataclass

import numpy as np

from .assembly import SoftBulkProblem, SoftCurveProblem, build_system
from .benchmark import InnerDiscField, benchmark_particles, derive_coefficients
from .config import ConfigError, ExperimentConfig
from .errors import ErrorReport, boundary_residuals, compare_to_reference, compute_errors
from .fields import NormalSlopeField, ZeroField
from .geometry import recover_heights
from .grid import build_space
from .penaltylab import sweep_perturbed_bound, sweep_penalty_bound
from .quadrature import decompose_grid
from .solve import solve_system


@dataclass
class ProblemSetup:
    particles: list
    exact: object | None
    bulk_fields: tuple


def setup_problem(cfg: ExperimentConfig) -> ProblemSetup:
    if cfg.problem == "symmetric-benchmark":
        exact = derive_coefficients(cfg.benchmark)
        particles = benchmark_particles(cfg.benchmark)
        return ProblemSetup(particles=particles, exact=exact,
                            bulk_fields=(InnerDiscField(exact), ZeroField()))
    particles, bulk_fields = [], []
    for spec in cfg.particle_specs:
        particles.append(spec.particle)
        if spec.bulk_field == "zero":
            bulk_fields.append(ZeroField())
        elif spec.bulk_field == "normal_slope":
            if spec.f2_const is None:
                raise ConfigError("normal_slope bulk field needs a constant f2")
            if spec.particle.exterior:
                raise ConfigError("normal_slope bulk field needs an interior particle")
            bulk_fields.append(NormalSlopeField(shape=spec.particle.shape,
                                                slope=spec.f2_const))
        elif spec.bulk_field == "benchmark_inner":
            raise ConfigError("benchmark_inner bulk field is only available on "
                              "the symmetric benchmark problem")
        else:
            raise ConfigError(f"unknown bulk field {spec.bulk_field!r}")
    return ProblemSetup(particles=particles, exact=None, bulk_fields=tuple(bulk_fields))


def make_problem(cfg: ExperimentConfig, h, bulk_fields):
    if cfg.formulation == "soft_curve":
        return SoftCurveProblem(eps1=cfg.c * h**cfg.lambda1, eps2=cfg.c * h**cfg.lambda2)
    return SoftBulkProblem(s=cfg.s, eps=cfg.c * h**cfg.bulk_exponent(),
                           bulk_fields=bulk_fields)


def reported_h(N):
    """The study abscissa h = 1/N; cells of the square domain have edge 2h."""
    return 1.0 / N


def solve_grid(cfg: ExperimentConfig, setup: ProblemSetup, N):
    """Assemble and solve one grid; returns (space, full DOF vector)."""
    space = build_space(cfg.bounds, N)
    problem = make_problem(cfg, reported_h(N), setup.bulk_fields)
    system = build_system(space, setup.particles, problem,
                          kappa=cfg.kappa, sigma=cfg.sigma, quad=cfg.quad)
    _, full = solve_system(space, system)
    return space, full


def _write_csv(report: ErrorReport, path):
    if path:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as f:
            f.write(report.to_csv())


def _render(report, cfg, title):
    if cfg.figures and cfg.out_path:
        from .plots import render_report
        render_report(report, os.path.splitext(cfg.out_path)[0] + ".png",
                      title=title, norms=cfg.norms)


def _run_grids(cfg, worker, threads=1):
    """Run the per-grid worker over all grids, in order, optionally threaded;
    a solver failure flushes the completed rows before propagating."""
    results = []
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(worker, N) for N in cfg.grids]
            for N, fut in zip(cfg.grids, futures):
                results.append((N, fut))
        gen = ((N, fut.result) for N, fut in results)
    else:
        gen = ((N, (lambda n=N: worker(n))) for N in cfg.grids)
    return gen


def run_convergence_study(cfg: ExperimentConfig, threads=1) -> ErrorReport:
    """Error-versus-exact-solution sweep over the configured grids."""
    setup = setup_problem(cfg)
    if setup.exact is None:
        raise ConfigError("convergence study needs an exact solution; "
                          "use the nonsym study for particle-list problems")
    report = ErrorReport()
    report.extras["bc_residuals"] = []
    report.extras["heights"] = []
    try:
        for N, get in _run_grids(cfg, lambda n: _study_one(cfg, setup, n), threads):
            errs, res, heights = get()
            report.add_row(N, reported_h(N), errs)
            report.extras["bc_residuals"].append(res)
            report.extras["heights"].append(heights)
    finally:
        _write_csv(report, cfg.out_path)
    _render(report, cfg, f"{cfg.formulation} on the symmetric benchmark")
    return report


def _study_one(cfg, setup, N):
    space, full = solve_grid(cfg, setup, N)
    dec = decompose_grid(setup.particles, space.grid, order=cfg.quad.order,
                         depth=cfg.quad.cutcell_depth)
    errs = compute_errors(space, full, setup.exact, setup.particles,
                          norms=cfg.norms, dec=dec)
    residuals = [boundary_residuals(space, full, p, curve_pts=cfg.quad.curve_pts,
                                    max_dtheta=cfg.quad.max_dtheta)
                 for p in setup.particles if p.variable_height]
    heights = recover_heights(space, full, setup.particles)
    return errs, residuals, heights


def run_nonsymmetric_study(cfg: ExperimentConfig, threads=1,
                           reference=None) -> ErrorReport:
    """Sweep against a fine-grid soft-curve reference on nested grids.

    ``reference`` may carry a precomputed (space, coeffs) pair to share one
    reference solve across several formulation runs.
    """
    if cfg.reference_n is None:
        raise ConfigError("nonsym study needs a [reference] section")
    setup = setup_problem(cfg)
    if reference is None:
        reference = compute_reference(cfg, setup)
    ref_space, ref_full, ref_dec = reference
    report = ErrorReport()
    try:
        for N, get in _run_grids(cfg, lambda n: solve_grid(cfg, setup, n), threads):
            space, full = get()
            errs = compare_to_reference(space, full, ref_space, ref_full,
                                        setup.particles, norms=cfg.norms, dec=ref_dec)
            report.add_row(N, reported_h(N), errs)
    finally:
        _write_csv(report, cfg.out_path)
    _render(report, cfg, f"{cfg.formulation} vs reference N={cfg.reference_n}")
    return report


def compute_reference(cfg: ExperimentConfig, setup: ProblemSetup):
    """Fine-grid reference solution plus its grid decomposition.

    With ``reference.formulation = auto`` the reference matches the study's
    formulation: curve studies get the curve reference with eps = c (h^3, h),
    bulk studies a bulk reference with eps = c h^(4-2s).  The two references
    share the membrane limit but differ inside the particles whenever the
    prescribed bulk field is not the exact interior extension, so comparing a
    bulk run against a curve reference would measure that O(1) mismatch.
    """
    kind = cfg.reference_formulation
    if kind == "auto":
        kind = cfg.formulation
    h = reported_h(cfg.reference_n)
    space = build_space(cfg.bounds, cfg.reference_n)
    if kind == "soft_curve":
        problem = SoftCurveProblem(eps1=cfg.reference_c * h**cfg.reference_lambda1,
                                   eps2=cfg.reference_c * h)
    else:
        problem = SoftBulkProblem(s=cfg.s, eps=cfg.reference_c * h**(4.0 - 2.0 * cfg.s),
                                  bulk_fields=setup.bulk_fields)
    system = build_system(space, setup.particles, problem,
                          kappa=cfg.kappa, sigma=cfg.sigma, quad=cfg.quad)
    _, full = solve_system(space, system)
    dec = decompose_grid(setup.particles, space.grid, order=cfg.quad.order,
                         depth=cfg.quad.cutcell_depth)
    return space, full, dec


def run_penalty_lab(cfg: ExperimentConfig):
    """Seeded bound-verification sweeps; returns per-sweep counts."""
    bound = sweep_penalty_bound(cfg.seed, cfg.lab_bound_count)
    perturbed = sweep_perturbed_bound(cfg.seed + 1, cfg.lab_perturbed_count)
    return {"bound": bound, "perturbed": perturbed,
            "ok": bound["violations"] == 0 and perturbed["violations"] == 0}
