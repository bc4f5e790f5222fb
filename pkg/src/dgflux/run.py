"""Assembly of a simulation from a RunConfig and the explicit time loop.

Time steps are clipped so the run lands exactly on analysis, output and
end times.  The next landing time is a pure function of the current
time, so a run restarted from a checkpoint replays the same step
sequence and reproduces the uninterrupted run bitwise.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import AnalysisRecord, analyze, write_csv
from .basis import get_basis
from .checkpoint import Checkpoint, build_string, mesh_hash, read_checkpoint, write_checkpoint
from .config import RunConfig, parse_config, serialize_config
from .dg import DGOperator
from .equations import Euler, NavierStokes, ScalarAdvectionDiffusion
from .errors import DGFluxError, FileFormatError
from .fv import FVSettings, IndicatorConfig
from .initial import InitialCondition, make_initial
from .mesh import Mesh, apply_curving, build_mortar_interfaces, curving_map, generate_cartesian
from .meshio import read_mesh
from .timeint import TimestepFactors, compute_dt, get_scheme, rk_step

log = logging.getLogger("dgflux")

CARTESIAN_TAGS = ("xmin", "xmax", "ymin", "ymax")


def make_equation(cfg: RunConfig):
    if cfg.equation == "scalar":
        return ScalarAdvectionDiffusion(ax=cfg.advection[0], ay=cfg.advection[1], kappa=cfg.kappa)
    if cfg.equation == "euler":
        return Euler(gamma=cfg.gamma)
    return NavierStokes(gamma=cfg.gamma, mu=cfg.mu, Pr=cfg.prandtl)


def build_mesh(cfg: RunConfig, k: int = 1) -> Mesh:
    if cfg.mesh.lower() in ("cartesian", "generate"):
        dom = cfg.domain
        mesh = generate_cartesian(cfg.nelems[0], cfg.nelems[1], dom, CARTESIAN_TAGS, cfg.periodic)
        if cfg.curving != "none" or cfg.ngeo > 1:
            mesh = apply_curving(mesh, curving_map(cfg.curving, dom, cfg.curving_amplitude), cfg.ngeo)
        if cfg.refine is not None:
            x0, x1, y0, y1 = cfg.refine
            mesh = build_mortar_interfaces(mesh, lambda x, y: x0 <= x <= x1 and y0 <= y <= y1)
    else:
        mesh = read_mesh(cfg.mesh)
    return mesh.with_partitions(k) if k != mesh.k_partitions else mesh


@dataclass
class Simulation:
    config: RunConfig
    config_text: str
    mesh: Mesh
    op: DGOperator
    initial: InitialCondition
    factors: TimestepFactors
    k: int = 1

    @property
    def exact(self):
        return self.initial if self.initial.exact else None

    @property
    def scheme(self):
        return get_scheme(self.config.scheme)


def build_simulation(cfg: RunConfig | str, config_text: str | None = None, k: int = 1,
                     mesh: Mesh | None = None) -> Simulation:
    """Mesh, operator and initial condition for ``cfg`` on ``k`` partitions.

    ``cfg`` may be given as configuration text, which is then stored
    verbatim in every checkpoint.
    """
    if isinstance(cfg, str):
        config_text, cfg = cfg, parse_config(cfg)
    if config_text is None:
        config_text = serialize_config(cfg)
    if k < 1:
        raise ValueError("partition count must be at least 1")
    if mesh is None:
        mesh = build_mesh(cfg, k)
    elif mesh.k_partitions != k:
        mesh = mesh.with_partitions(k)
    if k > mesh.n_elems:
        raise ValueError(f"cannot split {mesh.n_elems} elements into {k} partitions")
    eq = make_equation(cfg)
    ic = make_initial(cfg.initial, eq, cfg.domain, cfg.periodic, **cfg.ic)
    fv = None
    if cfg.fv != "off":
        fv = FVSettings(limiter=cfg.limiter, mode=cfg.fv,
                        indicator=IndicatorConfig(cfg.indicator, cfg.indicator_upper, cfg.indicator_lower))
    bc_types = {tag: cfg.bc.get(tag, "dirichlet") for tag in mesh.bc_names}
    op = DGOperator(mesh, get_basis(cfg.N, cfg.nodes), eq, form=cfg.form, riemann=cfg.riemann,
                    two_point=cfg.two_point, bc_types=bc_types, exact=ic, fv=fv, lifting=cfg.lifting)
    return Simulation(cfg, config_text, mesh, op, ic, TimestepFactors(cfg.cfl, cfg.cfld), k)


@dataclass
class RunState:
    U: np.ndarray
    is_fv: np.ndarray
    t: float
    step: int


def initial_state(sim: Simulation) -> RunState:
    op = sim.op
    U = op.project(sim.initial, 0.0)
    is_fv = np.zeros(sim.mesh.n_elems, dtype=bool)
    if op.fv is not None:
        U, is_fv, _ = op.fv.update(U, is_fv)
    return RunState(U=U, is_fv=is_fv, t=0.0, step=0)


def make_checkpoint(sim: Simulation, state: RunState) -> Checkpoint:
    from . import __version__

    return Checkpoint(U=state.U, is_fv=state.is_fv, time=state.t, step=state.step,
                      config_text=sim.config_text, mesh_hash=mesh_hash(sim.mesh),
                      version=__version__, build=build_string())


def state_from_checkpoint(sim: Simulation, ck: Checkpoint | str | Path) -> RunState:
    if not isinstance(ck, Checkpoint):
        ck = read_checkpoint(ck)
    if ck.mesh_hash != mesh_hash(sim.mesh):
        raise FileFormatError("checkpoint was written for a different mesh (mesh hash mismatch)")
    if ck.U.shape != sim.op.state_shape():
        raise FileFormatError(f"checkpoint solution shape {ck.U.shape} does not match the "
                              f"configured discretization {sim.op.state_shape()}")
    if np.any(ck.is_fv) and sim.op.fv is None:
        raise FileFormatError("checkpoint has finite-volume elements but FV is disabled")
    return RunState(U=ck.U.copy(), is_fv=ck.is_fv.copy(), t=ck.time, step=ck.step)


def next_landing(t: float, interval: float) -> float:
    """Smallest multiple k * interval strictly after t (k integer)."""
    k = math.floor(t / interval) + 1
    while k * interval <= t * (1.0 + 1e-14) + 1e-300:
        k += 1
    return k * interval


def _is_landing(t: float, interval: float) -> bool:
    k = round(t / interval)
    return k * interval == t


@dataclass
class RunResult:
    sim: Simulation
    state: RunState
    records: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    wall_time: float = 0.0


def checkpoint_name(project: str, t: float) -> str:
    return f"{project}_{t:017.9f}.dgfx"


def run(cfg: RunConfig | str, config_text: str | None = None, k: int = 1, restart=None,
        output_dir=None, max_steps: int | None = None, report: bool = False,
        sim: Simulation | None = None, callback=None) -> RunResult:
    """Integrate from the initial condition (or ``restart``) to ``t_end``.

    With ``output_dir`` checkpoints are written at every output time and
    the analysis log as CSV; ``report`` adds the summary figures.
    ``callback(sim, state, record)`` is invoked at every analysis time.
    """
    if sim is None:
        sim = build_simulation(cfg, config_text, k)
    cfg = sim.config
    op = sim.op
    out = Path(output_dir) if output_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    state = initial_state(sim) if restart is None else state_from_checkpoint(sim, restart)
    analyze_dt = cfg.analyze_dt or cfg.t_end
    output_dt = cfg.output_dt or cfg.t_end
    scheme = sim.scheme
    result = RunResult(sim=sim, state=state)
    wall0 = _time.perf_counter()

    def do_analysis(dt):
        rec = analyze(op, state.U, state.t, state.step, dt, state.is_fv, sim.exact)
        rec.extra["wall"] = _time.perf_counter() - wall0
        result.records.append(rec)
        log.info("t=%.6g step=%d dt=%.3e fv=%.3f", state.t, state.step, dt, rec.fv_fraction)
        if callback is not None:
            callback(sim, state, rec)

    def do_output():
        if out is None:
            return
        path = out / checkpoint_name(cfg.project, state.t)
        write_checkpoint(make_checkpoint(sim, state), path)
        result.checkpoints.append(path)

    do_analysis(0.0)
    if restart is None:
        do_output()
    R = None
    n_done = 0
    while state.t < cfg.t_end and (max_steps is None or n_done < max_steps):
        target = min(next_landing(state.t, analyze_dt), next_landing(state.t, output_dt), cfg.t_end)
        U_before = state.U.copy()
        fv_before = state.is_fv.copy()
        try:
            dt = cfg.dt if cfg.dt is not None else compute_dt(op, state.U, sim.factors, state.is_fv)
            landing = state.t + dt * (1.0 + 1e-10) >= target
            if landing:
                dt = target - state.t
            mask = state.is_fv if np.any(state.is_fv) else None
            state.U, R = rk_step(state.U, state.t, dt, scheme,
                                 lambda V, s: op.time_derivative(V, s, mask), R)
            state.t = target if landing else state.t + dt
            if op.fv is not None:
                state.U, state.is_fv, _ = op.fv.update(state.U, state.is_fv)
            else:
                op.check_physical(state.U)
        except DGFluxError as exc:
            dump = RunState(U_before, fv_before, state.t, state.step)
            if out is not None:
                path = out / f"{cfg.project}_crash.dgfx"
                write_checkpoint(make_checkpoint(sim, dump), path)
                exc.dump_path = path
            exc.dump_state = dump
            log.error("aborted at t=%.6g step=%d: %s", state.t, state.step, exc)
            raise
        state.step += 1
        n_done += 1
        if landing and (state.t == cfg.t_end or _is_landing(state.t, analyze_dt)):
            do_analysis(dt)
        if landing and (state.t == cfg.t_end or _is_landing(state.t, output_dt)):
            do_output()
    result.wall_time = _time.perf_counter() - wall0
    if out is not None:
        write_csv(result.records, op.eq.var_names, out / f"{cfg.project}_analysis.csv")
        if report:
            from .plotting import write_report
            write_report(result, out)
    return result


def final_checkpoint_bytes(result: RunResult) -> bytes:
    from .checkpoint import encode_checkpoint

    return encode_checkpoint(make_checkpoint(result.sim, result.state))

