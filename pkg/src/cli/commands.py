"""
Command Bodies
analyze | classify | synthesize | verify | quotient. Each command takes a
validated RunConfig and an output directory and returns a process exit code.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from ..config.settings import EXIT_CODES, get_settings
from ..core.biortho import BiorthoFamily, build_family, family_table
from ..core.classify import approx_boundary, approx_distributed, classification_report, estimate_T0, estimate_T1
from ..core.exceptions import ConfigError, MismatchedTruncation
from ..core.funcspace import PI, Interval, PiecewiseFunction, breakpoints_of
from ..core.moments import (
    BoundaryControl, ControlSolution, ShapeFunctions, SolverParams, assemble_boundary, assemble_distributed,
    moment_residuals, series_decay, shape_tables, solve_boundary, solve_distributed,
)
from ..core.simulate import GalerkinModel, forward_distributed, observability_quotient, verify_boundary, verify_null
from ..core.spectral import CouplingPair, SpectralEngine, expand_initial_data, index_table
from ..core.transform import RegularizationTrace, failing_modes, regularize
from ..models.schemas import ModeCoefficients, RunConfig, SolutionFile
from ..models.types import ControlMode, Verdict
from ..tools.csv_export import ResultWriter, config_hash, sample_table
from ..tools.presets import build_coupling, build_initial_data, piecewise_from_spec, piecewise_to_spec

logger = logging.getLogger(__name__)
settings = get_settings()

VERDICT_EXIT = {Verdict.YES: EXIT_CODES["yes"], Verdict.NO: EXIT_CODES["no"],
                Verdict.INCONCLUSIVE: EXIT_CODES["inconclusive"]}

CONTROL_TIMES = 41
CONTROL_POINTS = 33
TRAJECTORY_ROWS = 128


@dataclass
class RunContext:
    """Objects every command derives from the config."""
    config: RunConfig
    omega: Interval
    coupling: CouplingPair
    seed: Optional[int]
    initial_data: Tuple[Callable, Callable]

    @classmethod
    def from_config(cls, config: RunConfig) -> "RunContext":
        omega = Interval(config.omega.lo, config.omega.hi)
        cp = build_coupling(config.coupling, omega)
        y0 = build_initial_data(config.initial_data)
        return cls(config, omega, cp, config.seed, y0)

    def writer(self, out_dir: Path, command: str) -> ResultWriter:
        return ResultWriter(out_dir, self.config, command, self.seed)


def _mode(config: RunConfig) -> ControlMode:
    return ControlMode(config.mode)


def _finite(values: Dict[str, float]) -> Dict[str, Optional[float]]:
    """Non-finite entries become null in solution.json."""
    return {k: (float(v) if math.isfinite(v) else None) for k, v in values.items()}


# analyze

def cmd_analyze(config: RunConfig, out_dir: Path) -> int:
    """spectral.csv: I_k, I_{a,k}, α*_k, τ_k and eigen-residuals for k ≤ K."""
    ctx = RunContext.from_config(config)
    records = SpectralEngine(ctx.coupling, ctx.omega).records(config.K)
    rows = []
    for r in records:
        rows.append({
            "k": r.k, "I_k": r.Ik, "I_ak": r.Iak,
            "sign_I_k": r.log_Ik[0], "log_abs_I_k": r.log_Ik[1],
            "sign_I_ak": r.log_Iak[0], "log_abs_I_ak": r.log_Iak[1],
            "alpha_star": r.alpha_star, "tau": math.nan if r.tau is None else r.tau,
            "sup_psi_star": r.sup_psi_star, "dpsi_star0": r.dpsi_star0,
            "eigen_residual": r.eigen_residual, "residual_grid": r.residual_grid, "I_k_error": r.Ik_error,
        })
    ctx.writer(out_dir, "analyze").write_table("spectral.csv", rows)
    return EXIT_CODES["yes"]


# classify

def _ratio_rows(report) -> List[Dict[str, Any]]:
    rows: Dict[int, Dict[str, Any]] = {}
    for label, trend in (("ratio_T0", report.tail_trend_T0), ("ratio_T1", report.tail_trend_T1)):
        if trend is None:
            continue
        for row in trend.as_rows():
            rows.setdefault(row["k"], {"k": row["k"], "ratio_T0": math.nan, "ratio_T1": math.nan})[label] = row["ratio"]
    return [rows[k] for k in sorted(rows)]


def cmd_classify(config: RunConfig, out_dir: Path) -> int:
    """report.txt and ratios.csv; exit code encodes the verdict for the configured mode."""
    ctx = RunContext.from_config(config)
    report = classification_report(ctx.coupling, ctx.omega, config.K)
    writer = ctx.writer(out_dir, "classify")
    writer.write_lines("report.txt", [f"coupling={ctx.coupling.name}", f"mode={_mode(config).value}"]
                       + report.to_lines())
    writer.write_table("ratios.csv", _ratio_rows(report), columns=["k", "ratio_T0", "ratio_T1"])
    verdict = (report.approx_controllable_distributed if _mode(config) == ControlMode.DISTRIBUTED
               else report.approx_controllable_boundary)
    verdict = Verdict(verdict)
    logger.info(f"Classification of {ctx.coupling.name}: {verdict.value}")
    return VERDICT_EXIT[verdict]


# synthesize

def _weight(trace: Optional[RegularizationTrace]) -> Optional[PiecewiseFunction]:
    """Θ = Π θ over the change chain; ŷ₁ = y₁/Θ."""
    if trace is None or trace.is_identity:
        return None
    weight = PiecewiseFunction.constant(1.0)
    for ch in trace.chain:
        weight = weight * ch.theta
    return weight


def transformed_initial_data(y0: Tuple[Callable, Callable], weight: Optional[PiecewiseFunction]) -> Tuple[Callable, Callable]:
    y1, y2 = y0
    if weight is None:
        return y1, y2
    cuts = breakpoints_of(y1, weight) or [0.0, PI]
    y1_hat = PiecewiseFunction.from_callable(lambda x: np.asarray(y1(x)) / np.asarray(weight(x)), cuts)
    return y1_hat, y2


def _prepare(ctx: RunContext, allow_regularize: bool) -> Tuple[CouplingPair, Optional[RegularizationTrace]]:
    cp, omega, K = ctx.coupling, ctx.omega, ctx.config.K
    if not allow_regularize or not cp.supports_meet(omega):
        return cp, None
    if not failing_modes(index_table(cp, omega.lo, K)):
        return cp, None
    logger.info(f"Modes with I_k = I_(a,k) = 0 and supports meeting ω: regularizing {cp.name}")
    return regularize(cp, omega, K)


def _gate(ctx: RunContext) -> Optional[Verdict]:
    """Verdict that blocks synthesis, or None."""
    cfg = ctx.config
    if _mode(cfg) == ControlMode.DISTRIBUTED:
        verdict = approx_distributed(ctx.coupling, ctx.omega, cfg.K).verdict
    else:
        verdict = approx_boundary(ctx.coupling, cfg.K).verdict
    verdict = Verdict(verdict)
    if verdict == Verdict.YES:
        return None
    if cfg.override_verdict:
        logger.warning(f"Verdict {verdict.value} overridden; synthesizing anyway")
        return None
    return verdict


def _minimal_time(ctx: RunContext, cp: CouplingPair) -> float:
    cfg = ctx.config
    if _mode(cfg) == ControlMode.BOUNDARY:
        return estimate_T1(cp, cfg.K)[0]
    if cp.supports_meet(ctx.omega):
        return 0.0
    return estimate_T0(cp, ctx.omega.lo, cfg.K)[0]


def cmd_synthesize(config: RunConfig, out_dir: Path) -> int:
    """control.csv, modes.csv and solution.json for the configured mode."""
    ctx = RunContext.from_config(config)
    writer = ctx.writer(out_dir, "synthesize")
    blocked = _gate(ctx)
    if blocked is not None:
        writer.write_lines("report.txt", [f"verdict={blocked.value}", "synthesis=skipped"])
        logger.error(f"Synthesis refused: verdict {blocked.value}")
        return VERDICT_EXIT[blocked]

    mode = _mode(config)
    cp, trace = _prepare(ctx, mode == ControlMode.DISTRIBUTED)
    weight = _weight(trace)
    t_min = _minimal_time(ctx, cp)
    if t_min >= config.T:
        logger.warning(f"T = {config.T} does not exceed the minimal-time estimate {t_min:.6g}")
    records = SpectralEngine(cp, ctx.omega, residuals=False).records(config.K)
    expansion = expand_initial_data(transformed_initial_data(ctx.initial_data, weight), records)
    family = build_family(config.K, config.T, tol=config.tolerances.biortho, precision=config.precision)

    solution = SolutionFile(mode=mode, K=config.K, T=config.T, config_hash=config_hash(config),
                            precision=family.precision, t0_hat=t_min if math.isfinite(t_min) else None)
    if mode == ControlMode.DISTRIBUTED:
        sol = solve_distributed(records, ctx.omega, expansion, family, config.T, t_min if math.isfinite(t_min) else 0.0,
                                config.epsilon, ctx.seed)
        _write_distributed(writer, sol)
        solution.epsilon = sol.params.epsilon
        solution.k_eps = sol.params.k_eps
        solution.modes = [ModeCoefficients(k=row["k"], lambda_case=row["lambda_case"], branch=row["branch"],
                                           coefficients=[row["v1_1"], row["v2_1"], row["v1_2"], row["v2_2"]],
                                           residual=row["residual"]) for row in sol.mode_rows()]
        solution.shapes = {"f1": piecewise_to_spec(sol.shapes.f1), "f2": piecewise_to_spec(sol.shapes.f2)}
        solution.decay_fit = _finite(sol.decay.to_dict())
        if trace is not None and not trace.is_identity:
            q = cp.q if isinstance(cp.q, PiecewiseFunction) else cp.q.to_piecewise()
            solution.transformed_coupling = {"p": piecewise_to_spec(cp.p), "q": piecewise_to_spec(q)}
            solution.regularization = trace.to_records()
            writer.write_lines("regularization.txt", trace.to_lines())
    else:
        control = solve_boundary(records, expansion, config.T, family, t_min if math.isfinite(t_min) else 0.0,
                                 config.epsilon)
        _write_boundary(writer, control)
        solution.epsilon = config.epsilon
        solution.modes = [ModeCoefficients(k=row["k"], coefficients=[row["u_1"], row["u_2"]])
                          for row in control.mode_rows()]
        solution.decay_fit = _finite(control.decay.to_dict())
    writer.write_table("family.csv", family_table(family))
    writer.write_json("solution.json", solution.model_dump_json(indent=2))
    return EXIT_CODES["yes"]


def _write_distributed(writer: ResultWriter, sol: ControlSolution):
    writer.write_table("modes.csv", sol.mode_rows())
    t = np.linspace(0.0, sol.T, CONTROL_TIMES)
    x = np.linspace(sol.shapes.omega.lo, sol.shapes.omega.hi, CONTROL_POINTS)
    writer.write_frame("control.csv", sample_table(t, x, assemble_distributed(sol, x, t)))


def _write_boundary(writer: ResultWriter, control: BoundaryControl):
    writer.write_table("modes.csv", control.mode_rows())
    t = np.linspace(0.0, control.T, 4 * CONTROL_TIMES)
    u = np.asarray(assemble_boundary(control, t), dtype=float)
    writer.write_table("control.csv", [{"t": ti, "u": ui} for ti, ui in zip(t, u)])


# verify

def load_solution(path: Path) -> SolutionFile:
    if not Path(path).exists():
        raise ConfigError(f"{path}: solution file not found")
    return SolutionFile.model_validate_json(Path(path).read_text(encoding="utf-8"))


def _coupling_for(ctx: RunContext, solution: SolutionFile) -> CouplingPair:
    if solution.transformed_coupling:
        p = piecewise_from_spec(solution.transformed_coupling["p"])
        q = piecewise_from_spec(solution.transformed_coupling["q"])
        return CouplingPair(p, q, f"{ctx.coupling.name}|transformed")
    return ctx.coupling


def _weight_from(solution: SolutionFile) -> Optional[PiecewiseFunction]:
    if not solution.regularization:
        return None
    weight = PiecewiseFunction.constant(1.0)
    for rec in solution.regularization:
        change = rec.get("change")
        if change is not None:
            weight = weight * PiecewiseFunction.from_spec(change["theta"])
    return weight


def rebuild_distributed(solution: SolutionFile, omega: Interval, records, family: BiorthoFamily) -> ControlSolution:
    """ControlSolution from solution.json (shape profiles and mode coefficients)."""
    K = solution.K
    f1 = piecewise_from_spec(solution.shapes["f1"])
    f2 = piecewise_from_spec(solution.shapes["f2"])
    f, f_hat, f_tilde, B = shape_tables(f1, f2, omega, records)
    shapes = ShapeFunctions(f1, f2, omega, f, f_hat, f_tilde, B, 0.0, 0.0)
    coefficients = np.zeros((2, 2, K))
    for m in solution.modes:
        v11, v21, v12, v22 = m.coefficients
        coefficients[:, 0, m.k - 1] = (v11, v21)
        coefficients[:, 1, m.k - 1] = (v12, v22)
    params = SolverParams(solution.T, solution.t0_hat or 0.0, solution.epsilon or solution.T / 8.0, solution.k_eps or 0)
    decay = series_decay(coefficients, family, -(solution.T - params.t0_hat - 3.0 * params.epsilon))
    return ControlSolution(solution.T, K, shapes, family, coefficients, [], [], params, decay)


def cmd_verify(config: RunConfig, out_dir: Path, solution_path: Optional[Path] = None) -> int:
    """verify.txt, residuals.csv and trajectory.csv; exit 5 when a threshold fails."""
    ctx = RunContext.from_config(config)
    solution = load_solution(solution_path or Path(out_dir) / "solution.json")
    if solution.K != config.K:
        raise MismatchedTruncation(f"solution file has K={solution.K}, config has K={config.K}")
    if abs(solution.T - config.T) > 1e-12:
        raise MismatchedTruncation(f"solution file has T={solution.T}, config has T={config.T}")
    if solution.config_hash != config_hash(config):
        logger.warning("solution.json was produced from a different config")
    writer = ctx.writer(out_dir, "verify")
    cp = _coupling_for(ctx, solution)
    records = SpectralEngine(cp, ctx.omega, residuals=False).records(config.K)
    y0 = transformed_initial_data(ctx.initial_data, _weight_from(solution))
    expansion = expand_initial_data(y0, records)
    controlled = bool(solution.modes)
    tol = config.tolerances
    lines = [f"mode={ControlMode(solution.mode).value}", f"controlled={str(controlled).lower()}"]

    if ControlMode(solution.mode) == ControlMode.DISTRIBUTED:
        G = config.galerkin_modes or config.K
        model = GalerkinModel(cp, G)
        y0c = model.project(y0)
        forcing = None
        if controlled:
            family = build_family(config.K, config.T, tol=tol.biortho, precision=solution.precision)
            sol = rebuild_distributed(solution, ctx.omega, records, family)
            forcing = sol.modal_forcing(G)
            residuals = moment_residuals(sol, records, expansion)
            writer.write_table("residuals.csv", [{"k": r.k, "i": r.i, "lhs": r.lhs, "rhs": r.rhs,
                                                  "residual": r.residual} for r in residuals])
        traj = forward_distributed(model, y0c, forcing, config.T, config.steps, tol.galerkin)
        report = verify_null(traj, y0c)
        stride = max(1, traj.steps // TRAJECTORY_ROWS)
        writer.write_table("trajectory.csv", [{"t": traj.times[n], "norm": traj.norms[n]}
                                              for n in range(0, traj.steps + 1, stride)])
        passed = report.passed(tol.null_ratio)
        lines += [f"galerkin_modes={G}", f"steps={traj.steps}", f"step_error={traj.step_error:.3e}",
                  f"initial_norm={report.initial_norm:.17g}", f"final_norm={report.final_norm:.17g}",
                  f"ratio={report.ratio:.17g}", f"threshold={tol.null_ratio:.3g}"]
    else:
        control = None
        if controlled:
            family = build_family(config.K, config.T, tol=tol.biortho, precision=solution.precision)
            u = np.zeros((2, config.K))
            for m in solution.modes:
                u[:, m.k - 1] = m.coefficients
            decay = series_decay(u, family, -(config.T - (solution.t0_hat or 0.0)))
            bc = BoundaryControl(config.T, config.K, u, family, family.series_norm(u), decay)
            control = lambda t: assemble_boundary(bc, t)
        residuals = verify_boundary(expansion, control, records, config.T)
        writer.write_table("residuals.csv", [{"k": r.k, "i": r.i, "lhs": r.lhs, "rhs": r.rhs,
                                              "residual": r.residual} for r in residuals])
        worst = max(r.residual for r in residuals)
        passed = worst <= tol.duality
        lines += [f"max_residual={worst:.17g}", f"threshold={tol.duality:.3g}"]
    lines.append(f"result={'pass' if passed else 'fail'}")
    writer.write_lines("verify.txt", lines)
    logger.info(f"Verification {'passed' if passed else 'failed'}")
    return EXIT_CODES["yes"] if passed else EXIT_CODES["verification_failed"]


# quotient

def cmd_quotient(config: RunConfig, out_dir: Path) -> int:
    """quotient.csv with D₁, D₂ and D₁/D₂ in log form per mode."""
    ctx = RunContext.from_config(config)
    report = observability_quotient(ctx.coupling, ctx.omega, config.T, config.quotient_modes, config.observation)
    writer = ctx.writer(out_dir, "quotient")
    writer.write_table("quotient.csv", report.to_rows())
    growth = report.growth() if not report.degenerate and len(report.rows) > 1 else math.nan
    writer.write_lines("report.txt", [f"observation={report.observation.value}",
                                      f"degenerate={str(report.degenerate).lower()}",
                                      f"log_growth={growth:.17g}",
                                      f"log_lower_bound={report.log_lower_bound:.17g}"])
    return EXIT_CODES["yes"]


COMMANDS = {
    "analyze": cmd_analyze,
    "classify": cmd_classify,
    "synthesize": cmd_synthesize,
    "verify": cmd_verify,
    "quotient": cmd_quotient,
}
