"""Scenario-driven pipeline: validate, solve, diagnose, simulate, write reports."""

from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
import warnings
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .diagnostics import CSV_COLUMNS, ConvergenceReport, meanfield_row, nparticle_row
from .errors import MFErgodicError, PipelineError, ScenarioError
from .grid import UniformGrid
from .meanfield import solve_ground_state
from .nparticle import optimal_drift_N, solve_linear_ground_state
from .potentials import MeanFieldPotential, polynomial, validate
from .scaling import ScalingScenario, scaling_sweep
from .scenario import Scenario, parse_kernel, parse_polynomial
from .sde import SimConfig, meanfield_cost, nparticle_cost, simulate_meanfield, simulate_nparticle

OUTPUT_ENV = "MFERGODIC_OUT"
REPORT_VERSION = 1


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except (PipelineError, ScenarioError):
        raise
    except (MFErgodicError, ArithmeticError) as exc:
        raise PipelineError(name, exc) from exc


def build_potential(sc: Scenario, points: int | None = None) -> MeanFieldPotential:
    gs = sc.grid
    grid = UniformGrid.line(gs.lower, gs.upper, points or gs.points)
    ps = sc.potential
    V0 = polynomial(parse_polynomial(ps.V0))
    v0 = polynomial(parse_polynomial(ps.v0)) if ps.v0 else None
    v1 = parse_kernel(ps.v1, sc.base_dir) if ps.v1 else None
    return MeanFieldPotential.build(grid, V0, v0=v0, v1=v1, g=ps.g, local=ps.local)


def _sim_config(sc: Scenario, seed: int | None, threads: int) -> SimConfig:
    s = sc.sde
    return SimConfig(
        dt=s.dt,
        T=s.T,
        burn_in=s.burn_in,
        n_paths=s.n_paths,
        seed=s.seed if seed is None else seed,
        bins=s.bins,
        thin=s.thin,
        threads=threads,
    )


def run_experiment(sc: Scenario, seed: int | None = None, threads: int = 1) -> ConvergenceReport:
    """Full pipeline; deterministic for a given scenario and seed."""
    mf_cfg = asdict(sc.meanfield)
    diag = sc.diagnostics
    with stage("potential"):
        pot = build_potential(sc)
        hyp = validate(pot)
    warn = hyp.bochner_pass is False
    with stage("meanfield"), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mf = solve_ground_state(pot, **mf_cfg)

    report = ConvergenceReport(
        meanfield=meanfield_row(mf, diag.moment_k),
        hypotheses={k: v for k, v in asdict(hyp).items() if v is not None},
        uniqueness_warning=warn,
        settings={"seed": sc.sde.seed if seed is None else seed, "threads": threads},
    )
    refs = {pot.grid.points[0]: (pot, mf)}
    for N in sc.nparticle.N_list:
        pts = sc.nparticle.points_per_axis.get(N, sc.grid.points)
        with stage(f"nparticle N={N}"), warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if pts not in refs:
                p = build_potential(sc, pts)
                refs[pts] = (p, solve_ground_state(p, **mf_cfg))
            p, ref = refs[pts]
            st = solve_linear_ground_state(p, N, tol=sc.nparticle.tol_N, warm_start=ref)
        with stage(f"diagnostics N={N}"):
            row = nparticle_row(st, ref, p, diag.T, diag.girsanov_constant, diag.moment_k)
        if sc.sde.enabled and N in sc.sde.N_list:
            with stage(f"sde N={N}"):
                stats = simulate_nparticle(
                    optimal_drift_N(st), _sim_config(sc, seed, threads), nparticle_cost(st), st.marginal1
                )
            row.J_hat, row.J_stderr, row.sde_tv = stats.J_hat, stats.stderr, stats.tv
        report.rows.append(row)

    if sc.sde.enabled:
        with stage("sde meanfield"), warnings.catch_warnings():
            warnings.simplefilter("ignore")
            # the simulation may use a finer axis than the N-particle runs
            spot, smf = pot, mf
            if sc.sde.points and sc.sde.points != pot.grid.points[0]:
                spot = build_potential(sc, sc.sde.points)
                smf = solve_ground_state(spot, **mf_cfg)
            stats = simulate_meanfield(
                smf.drift[0], _sim_config(sc, seed, threads), meanfield_cost(smf, spot), smf.rho0
            )
        m = report.meanfield
        m.J_hat, m.J_stderr, m.sde_tv = stats.J_hat, stats.stderr, stats.tv
        m.extra["sde_reference_E"] = smf.E

    if sc.scaling is not None and sc.scaling.beta_list:
        with stage("scaling"):
            scen = ScalingScenario(
                tuple(sc.scaling.beta_list), tuple(sc.scaling.N_list), parse_kernel(sc.scaling.kernel)
            )
            res = scaling_sweep(scen, pot.grid, pot.V0, tol=sc.meanfield.tol, tol_N=sc.nparticle.tol_N)
        report.scaling = [c.as_dict() for c in res.cells]
        report.settings["scaling_trends"] = {str(k): v for k, v in res.trends().items()}
    return report


# -- output ------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_num(v):
    if isinstance(v, float):
        return v if math.isfinite(v) else None
    if isinstance(v, dict):
        return {str(k): _json_num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_num(x) for x in v]
    if hasattr(v, "item"):
        return _json_num(v.item())
    return v


def report_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.all_rows():
        w.writerow([_fmt(float(v) if hasattr(v, "item") else v) for v in r.as_list()])
    return buf.getvalue()


def report_dict(report: ConvergenceReport) -> dict:
    rows = []
    for r in report.all_rows():
        d = {c: getattr(r, c) for c in CSV_COLUMNS}
        d["extra"] = r.extra
        rows.append(d)
    mfx = report.meanfield
    return _json_num(
        {
            "report_version": REPORT_VERSION,
            "columns": list(CSV_COLUMNS),
            "rows": rows,
            "meanfield": {"J": mfx.E, "E_K": mfx.E_K, "E_P": mfx.E_P, "mu0": mfx.mu, "H1": mfx.entropy_per_particle},
            "hypotheses": report.hypotheses,
            "uniqueness_warning": report.uniqueness_warning,
            "scaling": report.scaling,
            "settings": report.settings,
        }
    )


def resolve_output_dir(sc: Scenario, override: str | None = None) -> Path:
    if override:
        return Path(override)
    if sc.output.directory:
        d = Path(sc.output.directory)
        return d if d.is_absolute() or sc.base_dir is None else sc.base_dir / d
    return Path(os.environ.get(OUTPUT_ENV, "mfergodic-out"))


def emit_report(report: ConvergenceReport, sc: Scenario, out_dir: Path | str) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    def put(name: str, text: str):
        path = out / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    if "csv" in sc.output.formats:
        put("report.csv", report_csv(report))
    if "json" in sc.output.formats:
        put("report.json", json.dumps(report_dict(report), indent=2, sort_keys=True) + "\n")
    manifest = {
        "scenario_sha256": sc.digest,
        "seed": report.settings.get("seed"),
        "threads": report.settings.get("threads"),
        "version": __version__,
        "report_version": REPORT_VERSION,
        "files": [p.name for p in written],
    }
    put("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return written
