"""Refinement-study orchestration and CSV reporting.

A study config couples the spatial level range to the number of time slabs
through k <= C h^sigma (sigma = 2 by default, so the time step shrinks with
h^2 and the expected total order is 2 in h).  Studies and probes write CSV
tables with a fixed schema plus a flat key=value echo of the resolved
config, from which a rerun reproduces the CSV byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import (
    ConvergenceReport,
    ErrorTriple,
    RegularityRatios,
    StudyRow,
    boundedness_check,
    error_norms,
    regularity_probe,
)
from .mesh import build_unit_square_mesh
from .problems import get_problem
from .solver import MarchError, SolverOptions, march
from .timegrid import build_uniform_grid, validate_grid


class ConfigError(ValueError):
    """Invalid study configuration (bad key, value, or constraint)."""


@dataclass(frozen=True)
class StudyConfig:
    problem: str = "heat_eigenmode"
    T: Optional[float] = None          # None: problem default
    base_level: int = 2
    levels: int = 4
    sigma: float = 2.0
    coupling_c: Optional[float] = None  # None: k_base / h_base**sigma
    m_base: int = 16
    newton_tol: float = 1e-10
    cg_tol: float = 1e-10
    rho: float = 0.9
    out: Optional[str] = None
    seed: int = 0
    probe: bool = False
    probe_b: float = 0.0

    def validate(self) -> "StudyConfig":
        if self.levels < 2:
            raise ConfigError(f"levels must be >= 2 for EOC, got {self.levels}")
        if self.sigma <= 0.0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.base_level < 0:
            raise ConfigError(f"base_level must be >= 0, got {self.base_level}")
        if self.m_base < 1:
            raise ConfigError(f"m_base must be >= 1, got {self.m_base}")
        if self.T is not None and self.T <= 0.0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        return self

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            newton_tol=self.newton_tol, cg_tol=self.cg_tol, rho=self.rho
        )


_BOOL_KEYS = {"probe"}
_INT_KEYS = {"base_level", "levels", "m_base", "seed"}
_FLOAT_KEYS = {"T", "sigma", "coupling_c", "newton_tol", "cg_tol", "rho", "probe_b"}
_STR_KEYS = {"problem", "out"}
_ALL_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines (# starts a comment)."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _coerce(key: str, value: str):
    try:
        if key in _BOOL_KEYS:
            lowered = value.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(value)
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        return value
    except ValueError as err:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from err


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> StudyConfig:
    """Config from an optional file plus overriding key/value pairs."""
    values: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config file {path}: {err}") from err
        values.update(parse_config_text(text))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    try:
        cfg = StudyConfig(**values)
    except TypeError as err:
        raise ConfigError(str(err)) from err
    return cfg.validate()


def config_echo(cfg: StudyConfig) -> str:
    """Serialize the resolved config back to the flat key=value format."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def slab_counts(cfg: StudyConfig) -> list[int]:
    """Slab counts per level obeying the k <= C h^sigma coupling."""
    return [
        int(math.ceil(cfg.m_base * 2.0 ** (cfg.sigma * i))) for i in range(cfg.levels)
    ]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


STUDY_CSV_HEADER = (
    "level,h,k,M,ndof,err_l2l2,err_linfl2,err_linflinf,"
    "eoc_l2l2,eoc_linfl2,eoc_linflinf,max_abs_ukh,newton_max_iters,cg_max_iters"
)


def study_csv(report: ConvergenceReport) -> str:
    eocs = report.eoc_columns()
    lines = [STUDY_CSV_HEADER]
    for i, row in enumerate(report.rows):
        cells = [
            _fmt(row.level),
            _fmt(row.h),
            _fmt(row.k),
            _fmt(row.M),
            _fmt(row.ndof),
            _fmt(row.errors.l2l2),
            _fmt(row.errors.linf_l2),
            _fmt(row.errors.linf_linf),
            _fmt(eocs["eoc_l2l2"][i]),
            _fmt(eocs["eoc_linfl2"][i]),
            _fmt(eocs["eoc_linflinf"][i]),
            _fmt(row.max_abs_ukh),
            _fmt(row.newton_max_iters),
            _fmt(row.cg_max_iters),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def run_convergence_study(cfg: StudyConfig) -> ConvergenceReport:
    """Run the refinement study and (if configured) write CSV + config echo.

    Levels run from base_level upward; each level builds the structured
    mesh, derives its slab count from the coupling rule, marches, and
    records the error triple plus boundedness and solver statistics.  A
    failing march stops the study; the rows completed so far are kept and
    an all-nan error row marks the failed level.
    """
    cfg = cfg.validate()
    try:
        problem = get_problem(cfg.problem)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    T = cfg.T if cfg.T is not None else problem.default_T
    opts = cfg.solver_options()

    counts = slab_counts(cfg)
    base_mesh = build_unit_square_mesh(cfg.base_level)
    coupling_c = (
        cfg.coupling_c
        if cfg.coupling_c is not None
        else (T / counts[0]) / base_mesh.h**cfg.sigma
    )

    rows: list[StudyRow] = []
    failures: list[str] = []
    for i in range(cfg.levels):
        level = cfg.base_level + i
        mesh = base_mesh if i == 0 else build_unit_square_mesh(level)
        M_slabs = counts[i]
        grid = build_uniform_grid(T, M_slabs)
        k = grid.k
        if k > coupling_c * mesh.h**cfg.sigma * (1.0 + 1e-12):
            raise ConfigError(
                f"level {level}: k = {k:.6g} violates k <= C h^sigma "
                f"(C = {coupling_c:.6g}, h = {mesh.h:.6g}, sigma = {cfg.sigma})"
            )
        validity = validate_grid(grid, problem.d.gamma, cfg.rho)
        if not validity.ok:
            raise ConfigError(
                f"level {level}: grid (T={T}, M={M_slabs}) fails admissibility: "
                f"quarter_ok={validity.quarter_ok} smallness_ok={validity.smallness_ok}"
            )
        try:
            traj, report = march(mesh, grid, problem.d, problem.f, problem.u0, opts)
        except MarchError as err:
            failures.append(f"level {level}: {err}")
            rows.append(
                StudyRow(
                    level=level,
                    h=mesh.h,
                    k=k,
                    M=M_slabs,
                    ndof=mesh.num_dofs,
                    errors=ErrorTriple(math.nan, math.nan, math.nan, "march failed"),
                    max_abs_ukh=math.nan,
                    bounded=False,
                    newton_max_iters=err.report.max_iterations,
                    cg_max_iters=err.report.max_cg_iterations,
                    min_weight=err.report.min_weight,
                )
            )
            break
        errors = error_norms(problem.exact.u, traj)
        max_abs, bounded = boundedness_check(traj, problem.exact.sup_abs)
        rows.append(
            StudyRow(
                level=level,
                h=mesh.h,
                k=k,
                M=M_slabs,
                ndof=mesh.num_dofs,
                errors=errors,
                max_abs_ukh=max_abs,
                bounded=bounded,
                newton_max_iters=report.max_iterations,
                cg_max_iters=report.max_cg_iterations,
                min_weight=report.min_weight,
            )
        )

    report = ConvergenceReport(rows=rows, failures=failures)
    if cfg.out is not None:
        Path(cfg.out).write_text(study_csv(report))
        Path(cfg.out + ".config").write_text(config_echo(replace(cfg, T=T)))
    return report


@dataclass(frozen=True)
class ProbeRow:
    level: int
    h: float
    k: float
    M: int
    ndof: int
    b: float
    ratios: RegularityRatios


PROBE_CSV_HEADER = (
    "level,h,k,M,ndof,b,lemma1_ratio,lemma2_ratio,lemma4_ratio,"
    "deltah_linf_over_l2,deltah_l2_over_l1"
)


def probe_csv(rows: list[ProbeRow]) -> str:
    lines = [PROBE_CSV_HEADER]
    for row in rows:
        r = row.ratios
        lines.append(
            ",".join(
                [
                    _fmt(row.level),
                    _fmt(row.h),
                    _fmt(row.k),
                    _fmt(row.M),
                    _fmt(row.ndof),
                    _fmt(row.b),
                    _fmt(r.lemma1_ratio),
                    _fmt(r.lemma2_ratio),
                    _fmt(r.lemma4_ratio),
                    _fmt(r.deltah_linf_over_l2),
                    _fmt(r.deltah_l2_over_l1),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def run_probe(cfg: StudyConfig) -> list[ProbeRow]:
    """Tabulate the regularity-probe ratios over the configured levels.

    The probe data is the time-constant first eigenfunction; the reaction
    coefficient is the constant cfg.probe_b (which may be negative down to
    the admitted defect).
    """
    cfg = cfg.validate()
    T = cfg.T if cfg.T is not None else 1.0
    opts = cfg.solver_options()
    gamma = max(0.0, -cfg.probe_b)

    def g(t, x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    rows: list[ProbeRow] = []
    counts = slab_counts(cfg)
    for i in range(cfg.levels):
        level = cfg.base_level + i
        mesh = build_unit_square_mesh(level)
        grid = build_uniform_grid(T, counts[i])
        validity = validate_grid(grid, gamma, cfg.rho)
        if not validity.ok:
            raise ConfigError(
                f"level {level}: probe grid (T={T}, M={counts[i]}) fails "
                f"admissibility for gamma={gamma}"
            )
        b = None if cfg.probe_b == 0.0 else cfg.probe_b
        ratios = regularity_probe(mesh, grid, b, g, opts, gamma=gamma)
        rows.append(
            ProbeRow(
                level=level,
                h=mesh.h,
                k=grid.k,
                M=counts[i],
                ndof=mesh.num_dofs,
                b=cfg.probe_b,
                ratios=ratios,
            )
        )
    if cfg.out is not None:
        Path(cfg.out).write_text(probe_csv(rows))
        Path(cfg.out + ".config").write_text(config_echo(replace(cfg, T=T)))
    return rows
