"""Command-line runs driven by ``key = value`` config files.

Usage::

    kwplane [command] --config run.cfg [--out DIR] [--n N] [--radius R] [--eps-min E] [--tol T]

Every run writes CSV fields and a ``report.json`` into the output directory.
Exit codes: 0 success, 1 a verdict failed, 2 bad input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import assumptions
from .discretize import Schedule
from .geometry import BackgroundMetric, DecayCertificate, PowerLaw
from .grid import GridMismatchError, GridSpec, ScalarField
from .oracle import RadialSolveError, growth_fit, ray_profile, solve_radial
from .solver import (
    BlowUpError,
    ContinuationRequiredError,
    InadmissibleError,
    NewtonDivergenceError,
    ProblemSpec,
    SolverError,
    continue_domain,
    residual_field,
    solve_dirichlet,
    solve_family,
    verify_apriori_bounds,
)
from .vortex import VortexData, VortexDataError, solve_vortex

log = logging.getLogger(__name__)

COMMANDS = ("solve", "family", "vortex", "verify", "oracle", "admissible")
EXIT_OK, EXIT_VERDICT, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
CSV_FMT = "%.16e"
GROWTH_WINDOW = (10.0, 18.0)


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _law(text: str) -> PowerLaw:
    """``c`` or ``c:e`` terms separated by commas, meaning ``sum c (1+|z|^2)^e``."""
    terms = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            raise ValueError("empty power-law term")
        c, _, e = part.partition(":")
        terms.append((float(c), float(e) if e else 0.0))
    return PowerLaw(tuple(terms))


def _floats(text: str) -> tuple:
    vals = tuple(float(v) for v in text.split(",") if v.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _odd(text: str) -> int:
    n = int(text)
    if n % 2 == 0:
        raise ValueError("grid nodes must be odd")
    if n < 5:
        raise ValueError("grid nodes must be >= 5")
    return n


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise ValueError(f"must be a positive number, got {text}")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0 or not math.isfinite(v):
        raise ValueError(f"must be a nonnegative number, got {text}")
    return v


def _shape(text: str) -> str:
    if text not in ("square", "disk"):
        raise ValueError("shape must be square or disk")
    return text


def _command(text: str) -> str:
    if text not in COMMANDS:
        raise ValueError(f"unknown command {text!r}; expected one of {', '.join(COMMANDS)}")
    return text


KEYS = {
    "command": _command,
    # grid and schedule
    "n": _odd,
    "radius": _positive,
    "radii": _floats,
    "shape": _shape,
    "eps_min": _positive,
    "eps": _nonneg,
    "tol": _positive,
    "tol_continuation": _positive,
    "time_step": _positive,
    "blowup_cap": _positive,
    "flux_ratio_cap": _positive,
    "workers": int,
    # scalar problem
    "f": _law,
    "h": _law,
    "f_file": str,
    "h_file": str,
    "k": float,
    "l": float,
    "lambda": _positive,
    # family
    "K": _law,
    "ks": _floats,
    # vortex
    "curvature": _law,
    "section_sq": _law,
    "lambda_target": float,
    # verify
    "solution": str,
    # oracle
    "m": int,
    "stretch": _nonneg,
}
PATH_KEYS = ("f_file", "h_file", "solution")


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    out_dir: Path = Path("out")

    def get(self, key, default=None):
        return self.values.get(key, default)

    def schedule(self) -> Schedule:
        kw = {}
        if "n" in self.values:
            kw["n"] = self.values["n"]
        if "shape" in self.values:
            kw["shape"] = self.values["shape"]
        if "radii" in self.values:
            kw["radii"] = self.values["radii"]
        elif "radius" in self.values:
            kw["radii"] = (self.values["radius"],)
        for key, name in (("tol", "tol_newton"), ("tol_continuation", "tol_continuation"),
                          ("time_step", "time_step"), ("blowup_cap", "blowup_cap"),
                          ("flux_ratio_cap", "flux_ratio_cap")):
            if key in self.values:
                kw[name] = self.values[key]
        if "eps_min" in self.values:
            return Schedule.geometric(self.values["eps_min"], **kw)
        return Schedule(**kw)

    def grid(self) -> GridSpec:
        s = self.schedule()
        return s.grid(s.radii[-1])

    def certificate(self) -> Optional[DecayCertificate]:
        if "l" in self.values and "lambda" in self.values:
            return DecayCertificate(self.values["lambda"], self.values["l"])
        return None

    def background(self) -> BackgroundMetric:
        return BackgroundMetric.weighted(self.values.get("k", 0.0))


def parse_config(text: str, base_dir: Optional[Path] = None, default_command: Optional[str] = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a :class:`RunConfig`.

    Relative file paths are resolved against ``base_dir`` (default: the
    working directory). ``default_command`` is used when the text has no
    ``command`` line.

    Raises
    ------
    ConfigError
        On unknown keys, malformed values, missing files or a missing
        command, naming the offending line.
    """
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            parsed = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        if key in PATH_KEYS:
            path = (base / parsed).resolve()
            if not path.is_file():
                raise ConfigError(f"{key}: no such file {path}", lineno)
            parsed = path
        values[key] = parsed
        lines[key] = lineno
    if "command" not in values:
        if default_command is None:
            raise ConfigError("command required")
        values["command"] = _command(default_command)
    _check_consistency(values, lines)
    return RunConfig(values.pop("command"), values)


def _check_consistency(values: dict, lines: dict) -> None:
    if "radius" in values and "radii" in values:
        raise ConfigError("give either radius or radii, not both", lines["radii"])
    if "eps_min" in values and values["eps_min"] > 1:
        raise ConfigError("eps_min must be <= 1", lines["eps_min"])
    if values.get("command") == "family":
        for key in ("ks", "l", "lambda"):
            if key not in values:
                raise ConfigError(f"family runs need {key!r}")
    if values.get("command") == "admissible":
        for key in ("l", "lambda"):
            if key not in values:
                raise ConfigError(f"admissible runs need {key!r}")


def with_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    vals = dict(cfg.values)
    try:
        if args.n is not None:
            vals["n"] = _odd(str(args.n))
        if args.radius is not None:
            vals.pop("radii", None)
            vals["radius"] = _positive(str(args.radius))
        if args.eps_min is not None:
            vals["eps_min"] = _positive(str(args.eps_min))
        if args.tol is not None:
            vals["tol"] = _positive(str(args.tol))
    except ValueError as exc:
        raise ConfigError(f"override: {exc}") from None
    return RunConfig(cfg.command, vals, Path(args.out))


# ---------------------------------------------------------------- file I/O


def _atomic_write(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_field_csv(path: Path, u: ScalarField) -> None:
    x, y = u.grid.xy
    rows = np.column_stack([x.ravel(), y.ravel(), u.values.ravel()])
    _atomic_write(path, lambda fh: np.savetxt(fh, rows, fmt=CSV_FMT, delimiter=",", header="x,y,value", comments=""))


def write_radial_csv(path: Path, r, v) -> None:
    rows = np.column_stack([r, v])
    _atomic_write(path, lambda fh: np.savetxt(fh, rows, fmt=CSV_FMT, delimiter=",", header="r,value", comments=""))


def read_field_csv(path: Path, grid: GridSpec) -> ScalarField:
    """Read an ``x,y,value`` CSV (row-major, x outer) that must lie exactly on ``grid``."""
    with open(path) as fh:
        header = fh.readline().strip().replace(" ", "")
        if header != "x,y,value":
            raise GridMismatchError(f"{path}: header must be 'x,y,value', got {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (grid.n * grid.n, 3):
        raise GridMismatchError(
            f"{path}: {data.shape[0]} rows of {data.shape[1]} columns, grid needs {grid.n * grid.n} rows of 3"
        )
    x, y = grid.xy
    tol = 1e-9 * grid.radius
    if np.max(np.abs(data[:, 0] - x.ravel())) > tol or np.max(np.abs(data[:, 1] - y.ravel())) > tol:
        raise GridMismatchError(f"{path}: node coordinates do not match grid (R={grid.radius}, n={grid.n})")
    return ScalarField(data[:, 2].reshape(grid.n, grid.n), grid)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_report(out_dir: Path, report: dict) -> Path:
    path = out_dir / "report.json"
    text = json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"
    _atomic_write(path, lambda fh: fh.write(text))
    return path


# ---------------------------------------------------------------- commands


def _problem(cfg: RunConfig, grid: GridSpec) -> ProblemSpec:
    def source(key):
        if f"{key}_file" in cfg.values:
            return read_field_csv(cfg.values[f"{key}_file"], grid)
        if key in cfg.values:
            return cfg.values[key]
        raise ConfigError(f"{key!r} or '{key}_file' required")

    return ProblemSpec(source("f"), source("h"), cfg.background(), cfg.certificate())


def _trace_rows(trace) -> list:
    return [t.as_dict() for t in trace]


def _solve_verdicts(rep) -> dict:
    b = rep.bounds_checked
    return {
        key: b[key]
        for key in ("converged", "residual_ok", "sup_bound_ok", "energy_bound_ok", "domain_cauchy")
        if key in b
    }


def run_solve(cfg: RunConfig) -> tuple:
    schedule = cfg.schedule()
    grid = schedule.grid(schedule.radii[-1])
    p = _problem(cfg, grid)
    if "eps" in cfg.values:
        u, info = solve_dirichlet(p, grid, cfg.values["eps"], schedule=schedule, full_output=True)
        write_field_csv(cfg.out_dir / "solution.csv", u)
        report = {
            "eps": cfg.values["eps"],
            "residual": info.residual,
            "newton_iters": info.newton_iters,
            "flow_steps": info.flow_steps,
            "hypotheses": p.check(grid),
            "grid": grid.describe(),
        }
        ok = info.residual <= schedule.tol_newton
        if cfg.values["eps"] > 0:
            report["apriori"] = verify_apriori_bounds(u, p, cfg.values["eps"])
            ok = ok and report["apriori"]["pass"]
        report["verdicts"] = {"residual_ok": info.residual <= schedule.tol_newton}
        return report, ok
    rep = continue_domain(p, schedule)
    write_field_csv(cfg.out_dir / "solution.csv", rep.solution)
    report = {
        "grid": rep.solution.grid.describe(),
        "residual": rep.residual,
        "sup_norm": rep.solution.sup_norm(),
        "flux_ratio": rep.bounds_checked["flux_ratio"],
        "hypotheses": rep.bounds_checked["hypotheses"],
        "domain_drifts": [list(d) for d in rep.domain_drifts],
        "trace": _trace_rows(rep.trace),
        "verdicts": _solve_verdicts(rep),
    }
    verdicts = report["verdicts"]
    ok = verdicts["residual_ok"] and verdicts["sup_bound_ok"] and verdicts["energy_bound_ok"]
    return report, ok


def _growth(field: ScalarField, k: float) -> dict:
    prof = ray_profile(field)
    if prof.radius < GROWTH_WINDOW[1]:
        return {"skipped": f"domain radius {prof.radius:g} < {GROWTH_WINDOW[1]:g}"}
    fit = growth_fit(prof, k, GROWTH_WINDOW)
    return {
        "window": list(GROWTH_WINDOW),
        "slope": fit.slope,
        "intercept": fit.intercept,
        "max_dev": fit.max_dev,
        "relative_error": abs(fit.slope - k) / k,
    }


def run_family(cfg: RunConfig) -> tuple:
    schedule = cfg.schedule()
    K = cfg.values.get("K", PowerLaw.term(-1.0, -3.0))
    cert = DecayCertificate(cfg.values["lambda"], cfg.values["l"])
    reps = solve_family(K, cert, cfg.values["ks"], schedule, workers=cfg.values.get("workers", 1))
    members = []
    ok = True
    for rep in reps:
        name = f"family_k{rep.k:g}.csv"
        write_field_csv(cfg.out_dir / name, rep.classical)
        verdicts = _solve_verdicts(rep)
        ok = ok and verdicts["residual_ok"]
        members.append({
            "k": rep.k,
            "file": name,
            "residual": rep.residual,
            "sup_norm_v": rep.solution.sup_norm(),
            "flux_ratio": rep.bounds_checked["flux_ratio"],
            "domain_drifts": [list(d) for d in rep.domain_drifts],
            "growth_fit": _growth(rep.classical, rep.k),
            "verdicts": verdicts,
            "trace": _trace_rows(rep.trace),
        })
    window = assumptions.admissible_k(cert.l, cert.lam)
    return {"window": window.as_dict(), "members": members, "grid": reps[-1].solution.grid.describe()}, ok


def run_vortex(cfg: RunConfig) -> tuple:
    schedule = cfg.schedule()
    d = VortexData(
        curvature_K=cfg.values.get("curvature", PowerLaw.constant(-1.0)),
        section_sq=cfg.values.get("section_sq", PowerLaw.constant(2.0)),
        lambda_target=cfg.values.get("lambda_target", 0.0),
        bg=cfg.background(),
        certificate=cfg.certificate(),
    )
    rep = solve_vortex(d, schedule)
    write_field_csv(cfg.out_dir / "vortex_exponent.csv", rep.solution)
    b = rep.bounds_checked
    report = {
        "vortex_residual": b["vortex_residual"],
        "round_trip": b["round_trip"],
        "residual": rep.residual,
        "verdicts": _solve_verdicts(rep),
        "trace": _trace_rows(rep.trace),
        "grid": rep.solution.grid.describe(),
    }
    return report, b["vortex_residual"] <= 10 * schedule.tol_newton


def run_verify(cfg: RunConfig) -> tuple:
    grid = cfg.grid()
    if "solution" not in cfg.values:
        raise ConfigError("verify runs need 'solution'")
    u = read_field_csv(cfg.values["solution"], grid)
    p = _problem(cfg, grid)
    eps = cfg.values.get("eps", 0.0)
    res = residual_field(u, p, eps).sup_norm(interior_only=True)
    report = {"eps": eps, "residual": res, "hypotheses": p.check(grid), "grid": grid.describe()}
    ok = True
    if eps > 0:
        report["apriori"] = verify_apriori_bounds(u, p, eps)
        ok = report["apriori"]["pass"]
    else:
        report["apriori"] = {"skipped": "bounds need eps > 0"}
    return report, ok


def run_oracle(cfg: RunConfig) -> tuple:
    K = cfg.values.get("K", PowerLaw.term(-1.0, -3.0))
    k = cfg.values.get("k", 0.0)
    R = cfg.values.get("radius", cfg.values.get("radii", (20.0,))[-1])
    prof = solve_radial(K, k, R, m=cfg.values.get("m", 8000), stretch=cfg.values.get("stretch", 0.0))
    write_radial_csv(cfg.out_dir / "radial.csv", prof.r_nodes, prof.values)
    report = {"k": k, "radius": R, "m": len(prof.r_nodes) - 1, "v0": float(prof.values[0])}
    if R >= GROWTH_WINDOW[1] and k > 0:
        u = 0.5 * (prof.values + k * np.log1p(prof.r_nodes**2))
        fit = growth_fit(type(prof)(prof.r_nodes, u), k, GROWTH_WINDOW)
        report["growth_fit"] = {"slope": fit.slope, "intercept": fit.intercept, "max_dev": fit.max_dev}
    return report, True


def run_admissible(cfg: RunConfig) -> tuple:
    l, lam = cfg.values["l"], cfg.values["lambda"]
    window = assumptions.admissible_k(l, lam)
    report = {"l": l, "lambda": lam, "window": window.as_dict()}
    if "ks" in cfg.values:
        report["ks"] = {f"{k:g}": assumptions.full_check(l, lam, k) for k in cfg.values["ks"]}
    return report, True


RUNNERS = {
    "solve": run_solve,
    "family": run_family,
    "vortex": run_vortex,
    "verify": run_verify,
    "oracle": run_oracle,
    "admissible": run_admissible,
}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg`` and write artifacts; returns the exit status."""
    out = cfg.out_dir
    header = {"command": cfg.command, "config": {k: _config_repr(v) for k, v in cfg.values.items()}}
    try:
        report, ok = RUNNERS[cfg.command](cfg)
    except (BlowUpError, NewtonDivergenceError, RadialSolveError, SolverError) as exc:
        partial = {"status": "solver_failure", "error": str(exc), "partial": True}
        if isinstance(exc, BlowUpError):
            partial["trace"] = _trace_rows(exc.trace)
        write_report(out, {**header, **partial})
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, GridMismatchError, ContinuationRequiredError, InadmissibleError,
            VortexDataError, ValueError, OSError) as exc:
        write_report(out, {**header, "status": "input_error", "error": str(exc), "partial": True})
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    status = "ok" if ok else "verdict_failure"
    write_report(out, {**header, **report, "status": status})
    return EXIT_OK if ok else EXIT_VERDICT


def _config_repr(v):
    if isinstance(v, PowerLaw):
        return [list(t) for t in v.terms]
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kwplane", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="run command; must agree with the config file if it names one")
    ap.add_argument("--config", required=True, help="key = value run file")
    ap.add_argument("--out", default="./out", help="output directory (default ./out)")
    ap.add_argument("--n", type=int, help="grid nodes per axis (odd)")
    ap.add_argument("--radius", type=float, help="single domain radius, replaces the radius ladder")
    ap.add_argument("--eps-min", type=float, dest="eps_min", help="last rung of the eps ladder")
    ap.add_argument("--tol", type=float, help="Newton residual tolerance")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    path = Path(args.config)
    try:
        text = path.read_text()
        cfg = parse_config(text, path.parent, default_command=args.command)
        if args.command and args.command != cfg.command:
            raise ConfigError(f"command {args.command!r} conflicts with config command {cfg.command!r}")
        cfg = with_overrides(cfg, args)
        cfg.schedule()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
