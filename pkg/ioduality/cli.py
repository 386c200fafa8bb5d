"""Command line front end: sweep, detect, validate, oracle and synthesize."""
from typing import List
from typing import Optional

import argparse
import os
import sys

import numpy as np

from loguru import logger

from ioduality import oracles
from ioduality import report
from ioduality._version import __version__
from ioduality.config import RunConfig
from ioduality.config import load_config
from ioduality.duality import PhaseCurve
from ioduality.duality import PhaseEvaluator
from ioduality.duality import detect
from ioduality.duality import farfield_phase_check
from ioduality.duality import sweep
from ioduality.exceptions import ConfigError
from ioduality.exceptions import ExceptionalLambdaError
from ioduality.exceptions import GeometryError
from ioduality.exceptions import UnsupportedProblemError
from ioduality.forward import resolve_solver
from ioduality.geometry import SceneGeometry
from ioduality.geometry import trapezoid_error
from ioduality.nearfield import assemble_FS_direct
from ioduality.nearfield import assemble_FS_factorized
from ioduality.nearfield import refine_scene
from ioduality.nearfield import self_convergence
from ioduality.potentials import WaveContext
from ioduality.potentials import green2d
from ioduality.potentials import measure_jump_constant
from ioduality.synth import SynthesisGeometry
from ioduality.synth import density_probe
from ioduality.synth import synthesize_sources
from ioduality.utils import commons
from ioduality.utils.cache import NearFieldCache
from ioduality.utils.log import configure_logging

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_GEOMETRY = 3

TWO_ROUTE_TOL = 1e-8
JUMP_TOL = 1e-4
QUADRATURE_FLOOR = 1e-13


def _out_path(config: RunConfig, name: str) -> str:
    return os.path.join(config.run.out, name)


def _prepare_scene(config: RunConfig) -> SceneGeometry:
    """Validated scene, with scatterer nodes doubled until the integral equation route converges

    The refinement runs once at the top of the interval so every sample uses the same nodes.
    """
    scene = config.scene()
    problem = config.scattering_problem()
    solver = resolve_solver(config.solver.name, scene, problem)
    if config.discretization.auto_refine and solver.name == "nystrom":
        ctx = WaveContext(config.sweep.interval[1])
        try:
            tol = config.discretization.refine_tol
            scene = refine_scene(scene, problem, ctx, solver.name, tol=tol)
        except ExceptionalLambdaError as e:
            logger.warning(f"Skipping node refinement at lambda={ctx.lam}: {e}")
    return scene


def cmd_sweep(config: RunConfig) -> PhaseCurve:
    """Sample the duality indicator on the configured grid and write sweep.csv"""
    scene = _prepare_scene(config)
    problem = config.scattering_problem()
    cache = None
    if config.run.cache_dir is not None:
        cache = NearFieldCache(config.run.cache_dir, config.config_hash)
    evaluator = PhaseEvaluator(
        scene,
        problem,
        solver=config.solver.name,
        delta_rel=config.phase.delta_rel,
        theta_points=config.discretization.theta_points,
        cache=cache,
    )
    curve = sweep(
        scene,
        problem,
        config.sweep.interval,
        config.sweep.step,
        parallelism=config.run.parallelism,
        evaluator=evaluator,
        progress=sys.stderr.isatty(),
    )
    path = _out_path(config, "sweep.csv")
    frame = report.write_sweep_csv(curve, path, config.config_hash)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return curve


def _unasserted(config: RunConfig, scene: SceneGeometry) -> List[oracles.OracleEigenvalue]:
    """Oracle eigenvalues a detection is not expected to find"""
    if not scene.is_disk or config.problem.kind != "transmission":
        return []
    radius = scene.obstacle.shape.radius
    eigs = oracles.ite_disk_eigs(radius, config.problem.n, config.sweep.interval)
    return [e for e in eigs if e.possibly_invisible]


def cmd_detect(config: RunConfig, plot: bool = True):
    """Sweep, detect and write detections.json (and sweep.svg)"""
    curve = cmd_sweep(config)
    detections = detect(curve, thresholds=config.thresholds)
    scene = curve.evaluator.scene
    if scene.is_disk:
        radius = scene.obstacle.shape.radius
        eigs = oracles.disk_oracle(curve.problem, radius, config.sweep.interval)
        if eigs:
            annotated = []
            for det in detections:
                nearest = min(eigs, key=lambda e: abs(e.lam - det.lambda_hat))
                note = f"nearest oracle eigenvalue {nearest.lam:.9f} (order {nearest.order})"
                annotated.append(det.model_copy(update={"notes": det.notes + [note]}))
            detections = annotated
    path = _out_path(config, "detections.json")
    report.write_detections_json(
        detections,
        path,
        config.config_hash,
        unasserted=_unasserted(config, scene),
        problem=str(curve.problem),
        sigma=curve.problem.sigma,
    )
    if plot:
        from ioduality.viz import plot_phase_curve

        plot_phase_curve(curve, _out_path(config, "sweep.svg"), detections)
    logger.info(f"Wrote {len(detections)} detections to {path}")
    return detections


def _check(name: str, status: str, **detail) -> dict:
    return {"name": name, "status": status, "detail": detail}


def _guarded(name: str, run) -> dict:
    """Run one check, an exceptional spectral parameter makes it fail"""
    try:
        return run()
    except ExceptionalLambdaError as e:
        logger.error(f"{name} could not be evaluated: {e}")
        return _check(name, "fail", error=f"{type(e).__name__}: {e}")


def run_validation(config: RunConfig, flip_sign: bool = False) -> List[dict]:
    """Consistency checks of the near field machinery

    `two_route_factorization` compares the simulated near field with the factorized one,
    `jump_sign` measures the single layer jump constant, `farfield_phase` compares phases
    with the far field operator and `quadrature_convergence` checks spectral convergence of
    the trapezoid rule and of the near field in the scatterer nodes. Disk-only checks are
    reported as skipped on other scatterers. A check that meets an exceptional spectral
    parameter fails with the error in its detail.
    """
    scene = config.scene()
    problem = config.scattering_problem()
    ctx = WaveContext(config.validate_.lam)
    flip_sign = flip_sign or config.validate_.flip_sign

    def two_route():
        if not scene.is_disk:
            return _check("two_route_factorization", "skipped (non-disk)")
        direct = assemble_FS_direct(scene, problem, ctx, config.solver.name)
        factorized = assemble_FS_factorized(scene, problem, ctx, flip_sign=flip_sign)
        distance = direct.distance(factorized)
        status = "pass" if distance <= TWO_ROUTE_TOL else "fail"
        return _check("two_route_factorization", status, distance=distance, lam=ctx.lam)

    def jump():
        constant = measure_jump_constant()
        ok = abs(abs(constant) - 1) <= JUMP_TOL and abs(constant.imag) <= JUMP_TOL
        return _check("jump_sign", "pass" if ok else "fail", re=constant.real, im=constant.imag)

    def farfield():
        if not scene.is_disk:
            return _check("farfield_phase", "skipped (non-disk)")
        reports = [
            farfield_phase_check(
                scene,
                problem,
                WaveContext(lam),
                n_directions=config.discretization.n_directions,
                delta_rel=config.phase.delta_rel,
                theta_points=config.discretization.theta_points,
                modes=config.discretization.modes,
            )
            for lam in config.validate_.farfield_lambdas
        ]
        status = "pass" if all(r.passed for r in reports) else "fail"
        return _check("farfield_phase", status, reports=[r.model_dump() for r in reports])

    def quadrature():
        errors = [trapezoid_error(n)[1] for n in (8, 16, 32)]
        spectral = all(
            fine <= max(coarse**2, QUADRATURE_FLOOR) for coarse, fine in zip(errors, errors[1:])
        )
        change = self_convergence(scene, problem, ctx, config.solver.name)
        ok = spectral and change <= config.discretization.refine_tol
        return _check(
            "quadrature_convergence",
            "pass" if ok else "fail",
            trapezoid_errors=errors,
            nearfield_change=change,
        )

    checks = [
        _guarded("two_route_factorization", two_route),
        _guarded("jump_sign", jump),
        _guarded("farfield_phase", farfield),
        _guarded("quadrature_convergence", quadrature),
    ]
    for check in checks:
        log = logger.info if check["status"] != "fail" else logger.error
        log(f"{check['name']}: {check['status']}")
    return checks


def cmd_validate(config: RunConfig, flip_sign: bool = False) -> int:
    checks = run_validation(config, flip_sign=flip_sign)
    passed = all(c["status"] != "fail" for c in checks)
    payload = {"header": report.header(config.config_hash), "checks": checks, "passed": passed}
    report.write_json(payload, _out_path(config, "validation.json"))
    if not passed:
        failed = ", ".join(c["name"] for c in checks if c["status"] == "fail")
        logger.error(f"Validation failed: {failed}")
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_oracle(config: RunConfig) -> dict:
    """Analytic interior eigenvalues of the disk scatterer in the sweep interval"""
    scene = config.scene()
    if not scene.is_disk:
        raise ConfigError("The oracle needs geometry.obstacle.shape = circle")
    problem = config.scattering_problem()
    eigs = oracles.disk_oracle(problem, scene.obstacle.shape.radius, config.sweep.interval)
    payload = {
        "header": report.header(config.config_hash, problem=str(problem)),
        "eigenvalues": [e.model_dump() for e in eigs],
    }
    report.write_json(payload, _out_path(config, "oracle.json"))
    sys.stdout.write(report.to_json(payload))
    return payload


def cmd_synthesize(config: RunConfig, phi_path: Optional[str] = None):
    """Source synthesis at `synthesis.lam` for a probing density read from `phi_path`"""
    scene = config.scene()
    problem = config.scattering_problem()
    ctx = WaveContext(config.synthesis.lam)
    extra = {}
    if phi_path is None:
        phi = np.ones(len(scene.source), dtype=complex)
    else:
        phi = report.read_density_csv(phi_path, len(scene.source))
        extra["phi_sha256"] = commons.sha256sum(phi_path)
    geometry = SynthesisGeometry.around(
        scene.source,
        presumed_region_radius=config.synthesis.presumed_region_radius,
        center=config.synthesis.presumed_region_center,
        epsilon=config.synthesis.epsilon,
    )
    target = green2d(ctx.k, scene.obstacle.points, scene.obstacle.center)
    probe = density_probe((scene.source, scene.obstacle), ctx, target, config.synthesis.alphas)
    report.write_density_probe(probe, config.run.out, config.config_hash)
    result = synthesize_sources(
        scene, problem, ctx, phi, geometry, config.synthesis.alphas, solver=config.solver.name
    )
    report.write_synthesis(result, config.run.out, config.config_hash, **extra)
    return result


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", required=True, help="configuration file (key = value, yaml or json)"
    )
    common.add_argument("--out", help="output directory, overrides run.out")
    common.add_argument("--parallel", type=int, help="number of workers, overrides run.parallelism")
    common.add_argument("--cache", help="near field cache directory, overrides run.cache_dir")
    common.add_argument("--no-plot", action="store_true", help="do not write the SVG plot")
    common.add_argument("--log-level", default="INFO")

    parser = argparse.ArgumentParser(
        prog="ioduality",
        description="Interior eigenvalues from near field data by inside-outside duality.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("sweep", parents=[common], help="sample the duality indicator")
    commands.add_parser("detect", parents=[common], help="sweep and detect interior eigenvalues")
    validate = commands.add_parser("validate", parents=[common], help="run consistency checks")
    validate.add_argument("--flip-sign", action="store_true", help=argparse.SUPPRESS)
    commands.add_parser("oracle", parents=[common], help="analytic eigenvalues of a disk")
    synthesize = commands.add_parser("synthesize", parents=[common], help="source synthesis")
    synthesize.add_argument("--phi", help="CSV with 're' and 'im' columns, one row per source node")
    return parser.parse_args(argv)


def _load(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    if args.out is not None:
        overrides["run.out"] = args.out
    if args.parallel is not None:
        overrides["run.parallelism"] = args.parallel
    if args.cache is not None:
        overrides["run.cache_dir"] = args.cache
    if args.no_plot:
        overrides["run.plot"] = False
    return load_config(args.config, **overrides)


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    configure_logging(args.log_level)
    try:
        config = _load(args)
        if args.command == "sweep":
            curve = cmd_sweep(config)
            if config.run.plot:
                from ioduality.viz import plot_phase_curve

                plot_phase_curve(curve, _out_path(config, "sweep.svg"))
        elif args.command == "detect":
            cmd_detect(config, plot=config.run.plot)
        elif args.command == "validate":
            return cmd_validate(config, flip_sign=args.flip_sign)
        elif args.command == "oracle":
            cmd_oracle(config)
        elif args.command == "synthesize":
            cmd_synthesize(config, args.phi)
    except (ConfigError, UnsupportedProblemError) as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except GeometryError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_GEOMETRY
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
