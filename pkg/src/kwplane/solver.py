"""Dirichlet solves of ``0.5/rho Lap u + h e^u = f + eps u`` and their continuation.

A problem is solved on a growing family of domains (the exhaustion); on
each domain the regularization ``eps`` walks down a ladder towards zero,
every rung warm-started from the previous one.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .assumptions import admissible_k
from .discretize import (
    Schedule,
    cut_link_excess,
    dirichlet_laplacian_apply,
    gradient_energy,
    laplacian_matrix,
    trapezoid_weights,
)
from .geometry import (
    BackgroundMetric,
    DecayCertificate,
    FieldSource,
    PowerLaw,
    PowerProfile,
    sample,
)
from .grid import GridSpec, ScalarField
from .linsolve import SPDSolver

log = logging.getLogger(__name__)

EXP_CLIP = 700.0


class SolverError(RuntimeError):
    """Base class for failures of the nonlinear solver."""


class NewtonDivergenceError(SolverError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class BlowUpError(SolverError):
    """The continuation produced growth incompatible with a bounded limit."""

    def __init__(self, message: str, trace=()):
        super().__init__(f"sign/decay hypotheses likely violated: {message}")
        self.trace = tuple(trace)


class ContinuationRequiredError(ValueError):
    """An eps = 0 solve was asked for cold on data failing the sign condition."""


class InadmissibleError(ValueError):
    def __init__(self, k: float, window):
        super().__init__(f"k = {k} is outside the admissible window {window}")
        self.k = k
        self.window = window


@dataclass(frozen=True)
class ProblemSpec:
    """Data ``(f, h)`` on the background ``bg``.

    ``f`` and ``h`` may be power laws, callables of ``(x, y)``, constants or
    sampled fields. ``certificate`` (optional) claims the decay bound for
    ``|f|`` and ``|h|``.
    """

    f: FieldSource
    h: FieldSource
    bg: BackgroundMetric = field(default_factory=BackgroundMetric.flat)
    certificate: Optional[DecayCertificate] = None

    def sampled(self, grid: GridSpec):
        return sample(self.f, grid), sample(self.h, grid), self.bg.rho(grid)

    def check(self, grid: GridSpec) -> dict:
        """Verdicts on the hypotheses of the existence theorem, sampled on ``grid``."""
        f, h, rho = self.sampled(grid)
        inner = grid.interior
        out = {
            "h_nonpositive": bool(np.max(h[inner]) <= 0.0),
            "h_nonzero": bool(np.any(h[inner] < 0.0)),
            "f_integral": float(np.sum(trapezoid_weights(grid) * f * rho)),
        }
        out["sign_condition"] = out["f_integral"] < 0.0
        if self.certificate is not None:
            out["decay_f_ratio"] = self.certificate.worst_ratio(f, grid)
            out["decay_h_ratio"] = self.certificate.worst_ratio(h, grid)
            out["decay"] = max(out["decay_f_ratio"], out["decay_h_ratio"]) <= 1.0 + 1e-12
        out["ok"] = all(v for key, v in out.items() if isinstance(v, bool))
        return out


@dataclass(frozen=True)
class TraceEntry:
    radius: float
    eps: float
    newton_iters: int
    flow_steps: int
    residual: float
    sup_norm: float
    grad_l2: float
    energy_bound: float
    sup_bound: float
    cauchy: float
    flux_ratio: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SolveReport:
    """Solution, continuation trace and verdicts of one continuation run.

    ``solution`` is the field solved for on the background of the problem.
    For family members ``classical`` holds ``u_k`` with
    ``Lap u_k + K e^{2 u_k} = 0`` and ``k`` the family parameter.
    ``domain_solutions`` holds ``(R, limit on that domain)`` for every
    radius of a domain continuation.
    """

    solution: ScalarField
    trace: tuple
    bounds_checked: dict
    iterates: tuple = ()
    domain_drifts: tuple = ()
    classical: Optional[ScalarField] = None
    k: Optional[float] = None
    domain_solutions: tuple = ()

    @property
    def converged(self) -> bool:
        return bool(self.bounds_checked.get("converged", False))

    @property
    def residual(self) -> float:
        return self.trace[-1].residual


@dataclass(frozen=True)
class DirichletInfo:
    newton_iters: int
    flow_steps: int
    residual: float


class _Discrete:
    """Interior-node form of the problem on one grid."""

    def __init__(self, p: ProblemSpec, grid: GridSpec):
        self.grid = grid
        self.mask = grid.interior
        f, h, rho = p.sampled(grid)
        if np.max(h[self.mask]) > 0:
            raise ValueError("h must be nonpositive")
        if not np.any(h[self.mask] < 0):
            raise ValueError("h must not vanish identically")
        self.f = f[self.mask]
        self.h = h[self.mask]
        self.rho = rho[self.mask]
        self.L = laplacian_matrix(grid)
        self.half_L = 0.5 * self.L
        self.cell = grid.spacing**2

    def residual(self, u, eps):
        eu = np.exp(np.minimum(u, EXP_CLIP))
        return (self.half_L @ u) / self.rho + self.h * eu - self.f - eps * u

    def scaled_jacobian(self, u, eps, shift=0.0):
        """``-rho * J + shift * rho`` with ``J`` the Jacobian of :meth:`residual` (SPD)."""
        eu = np.exp(np.minimum(u, EXP_CLIP))
        diag = self.rho * (eps - self.h * eu + shift)
        return sp.csr_matrix(-self.half_L + sp.diags(diag))

    def to_field(self, u, bg) -> ScalarField:
        vals = np.zeros((self.grid.n, self.grid.n))
        vals[self.mask] = u
        return ScalarField(vals, self.grid, bg)


def _sup(x) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def _newton(disc: _Discrete, eps, u, schedule: Schedule, linsolver: SPDSolver):
    F = disc.residual(u, eps)
    res = _sup(F)
    newton_iters = flow_steps = 0
    # at least one Newton step: far from the origin the operator is nearly
    # singular for small eps, so a warm start can meet tol_newton while still
    # being far from the solution
    while res > schedule.tol_newton or newton_iters == 0:
        if res > schedule.newton_switch and flow_steps < schedule.max_flow_steps:
            # one linearly implicit Euler step of du/dt = F(u)
            A = disc.scaled_jacobian(u, eps, shift=1.0 / schedule.time_step)
            u = u + linsolver.solve(A, disc.rho * F)
            flow_steps += 1
            F = disc.residual(u, eps)
            if not np.all(np.isfinite(F)):
                raise NewtonDivergenceError("heat flow produced non-finite values", res)
            res = _sup(F)
            continue
        if newton_iters >= schedule.max_newton:
            raise NewtonDivergenceError("Newton iteration limit reached", res)
        A = disc.scaled_jacobian(u, eps)
        step = linsolver.solve(A, disc.rho * F)
        size = _sup(step)
        t = 1.0
        for _ in range(schedule.max_halvings + 1):
            u_try = u + t * step
            F_try = disc.residual(u_try, eps)
            res_try = _sup(F_try)
            if np.isfinite(res_try) and (res_try < res or res_try <= schedule.tol_newton):
                break
            # With eps small the operator is nearly singular far out, so a tiny
            # residual can hide a large correction and the sup-residual may
            # rise before it falls. The residual mapped back through the same
            # Jacobian (the simplified Newton correction) is the affine
            # invariant measure; accept the step when that one decreases.
            if np.isfinite(res_try) and _sup(linsolver.solve(A, disc.rho * F_try)) < (1.0 - 0.25 * t) * size:
                break
            t *= 0.5
        else:
            raise NewtonDivergenceError("damped Newton step failed to reduce the residual", res)
        u, F, res = u_try, F_try, res_try
        newton_iters += 1
    return u, DirichletInfo(newton_iters, flow_steps, res)


def solve_dirichlet(
    p: ProblemSpec,
    grid: GridSpec,
    eps: float,
    warm_start: Optional[ScalarField] = None,
    schedule: Optional[Schedule] = None,
    full_output: bool = False,
    _cache=None,
):
    """Solve ``0.5/rho Lap_h u + h e^u - f - eps u = 0`` with ``u = 0`` on the boundary.

    Starting from ``warm_start`` (zero by default), linearly implicit heat
    flow steps of size ``schedule.time_step`` are taken until the sup-norm
    residual drops below ``schedule.newton_switch``; damped Newton then
    drives it below ``schedule.tol_newton``.

    Raises
    ------
    NewtonDivergenceError
        If damping fails or the iteration limit is hit.
    ContinuationRequiredError
        For ``eps == 0`` without warm start when ``int f dvol >= 0`` on ``grid``.
    """
    schedule = schedule or Schedule()
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    disc, linsolver = _cache if _cache is not None else (_Discrete(p, grid), SPDSolver())
    if warm_start is None:
        if eps == 0 and p.check(grid)["f_integral"] >= 0:
            raise ContinuationRequiredError(
                "int f dvol >= 0: a direct eps = 0 solve is not meaningful; "
                "use continue_epsilon to approach eps = 0 from a warm start"
            )
        u0 = np.zeros(disc.f.shape)
    else:
        warm_start.require_grid(grid)
        u0 = warm_start.values[disc.mask].copy()
    u, info = _newton(disc, eps, u0, schedule, linsolver)
    out = disc.to_field(u, p.bg)
    return (out, info) if full_output else out


def _rung_entry(disc: _Discrete, u, eps, R, info, cauchy, fnorm) -> TraceEntry:
    cell = disc.cell
    vals = disc.to_field(u, None).values
    energy = gradient_energy(vals, disc.grid)
    bound_rhs = 2.0 * float(np.sum(u * (disc.h - disc.f) * disc.rho)) * cell
    eu = np.exp(np.minimum(u, EXP_CLIP))
    flux = 0.5 * float(np.sum(disc.L @ u)) * cell
    mass = float(np.sum(disc.rho * (np.abs(disc.f) + np.abs(disc.h) * eu + eps * np.abs(u)))) * cell
    return TraceEntry(
        radius=R,
        eps=eps,
        newton_iters=info.newton_iters,
        flow_steps=info.flow_steps,
        residual=info.residual,
        sup_norm=_sup(u),
        grad_l2=math.sqrt(energy),
        energy_bound=bound_rhs,
        sup_bound=fnorm / eps if eps > 0 else math.inf,
        cauchy=cauchy,
        flux_ratio=flux / mass if mass > 0 else 0.0,
    )


def _ladder(schedule: Schedule):
    yield from schedule.epsilons
    eps = schedule.eps_min
    for _ in range(schedule.max_extra_rungs):
        eps *= 0.5
        yield eps


def continue_epsilon(
    p: ProblemSpec,
    grid: GridSpec,
    schedule: Schedule,
    warm_start: Optional[ScalarField] = None,
    keep_iterates: bool = False,
) -> SolveReport:
    """Walk ``eps`` down the schedule's ladder on one domain.

    Each rung is warm-started from the previous one. Once the ladder has
    reached ``schedule.eps_min`` it is extended by halving until two
    successive iterates differ by at most ``tol_continuation`` in sup-norm;
    a final warm-started ``eps = 0`` solve closes the run.

    Two symptoms of a non-existent bounded limit abort with
    :class:`BlowUpError`: a sup-norm above ``schedule.blowup_cap`` on any
    rung, and, at ``eps = 0``, a net boundary flux above
    ``schedule.flux_ratio_cap`` times the total source mass. A bounded
    finite-energy solution on the plane carries no flux at infinity, whereas
    a solution kept bounded only by the artificial boundary grows like
    ``flux/pi * log|z|`` beyond it.
    """
    disc = _Discrete(p, grid)
    cache = (disc, SPDSolver())
    fnorm = _sup(disc.f) + _sup(disc.h)
    R = grid.radius
    trace, iterates = [], []
    u = None if warm_start is None else warm_start.values[disc.mask].copy()
    prev = None
    cauchy_ok = False
    for eps in _ladder(schedule):
        start = np.zeros(disc.f.shape) if u is None else u
        u, info = _newton(disc, eps, start, schedule, cache[1])
        cauchy = _sup(u - prev) if prev is not None else math.inf
        entry = _rung_entry(disc, u, eps, R, info, cauchy, fnorm)
        trace.append(entry)
        log.debug("R=%g eps=%.3e iters=%d res=%.2e sup=%.4g cauchy=%.2e", R, eps,
                  info.newton_iters, info.residual, entry.sup_norm, cauchy)
        if keep_iterates:
            iterates.append((eps, disc.to_field(u, p.bg)))
        if entry.sup_norm > schedule.blowup_cap:
            raise BlowUpError(
                f"sup|u| = {entry.sup_norm:.3g} exceeds cap {schedule.blowup_cap:g} at eps = {eps:.3g}",
                trace,
            )
        prev = u
        if eps <= schedule.eps_min and cauchy <= schedule.tol_continuation:
            cauchy_ok = True
            break
    u0, info = _newton(disc, 0.0, u, schedule, cache[1])
    final = _rung_entry(disc, u0, 0.0, R, info, _sup(u0 - u), fnorm)
    trace.append(final)
    if keep_iterates:
        iterates.append((0.0, disc.to_field(u0, p.bg)))
    if abs(final.flux_ratio) > schedule.flux_ratio_cap:
        raise BlowUpError(
            f"net boundary flux is {final.flux_ratio:.3f} of the source mass at eps = 0 on R = {R:g}; "
            f"sup|u| grew from {trace[0].sup_norm:.3g} to {final.sup_norm:.3g} along the ladder",
            trace,
        )
    verdicts = {
        "converged": cauchy_ok and final.cauchy <= schedule.tol_continuation,
        "cauchy_ladder": cauchy_ok,
        "residual_ok": all(t.residual <= schedule.tol_newton for t in trace),
        "sup_bound_ok": all(t.sup_norm <= t.sup_bound + 1e-8 for t in trace),
        "energy_bound_ok": all(t.grad_l2**2 <= t.energy_bound + 1e-6 for t in trace),
        "flux_ratio": final.flux_ratio,
        "hypotheses": p.check(grid),
    }
    return SolveReport(disc.to_field(u0, p.bg), tuple(trace), verdicts, tuple(iterates))


def _restrict(field_: ScalarField, grid: GridSpec) -> np.ndarray:
    return np.where(grid.interior, sample(field_, grid), 0.0)


def continue_domain(
    p: ProblemSpec,
    schedule: Schedule,
    warm_start: Optional[ScalarField] = None,
    keep_iterates: bool = False,
) -> SolveReport:
    """Run :func:`continue_epsilon` on every radius of the schedule.

    Each domain is warm-started from the previous limit, interpolated onto
    the new grid and extended by zero. The drift between consecutive limits
    is measured on the nodes of the smallest domain; if the last drift
    exceeds ``tol_continuation`` a warning is issued and the verdict
    ``domain_cauchy`` is False, but the solution is still returned.
    """
    grid0 = schedule.grid(schedule.radii[0])
    reports, drifts = [], []
    prev = warm_start
    for R in schedule.radii:
        grid = schedule.grid(R)
        warm = None if prev is None else ScalarField(_restrict(prev, grid), grid, p.bg)
        rep = continue_epsilon(p, grid, schedule, warm, keep_iterates)
        if reports:
            drift = _sup(_restrict(rep.solution, grid0) - _restrict(reports[-1].solution, grid0))
            drifts.append((R, drift))
        reports.append(rep)
        prev = rep.solution
    last = reports[-1]
    domain_ok = (not drifts) or drifts[-1][1] <= schedule.tol_continuation
    if not domain_ok:
        warnings.warn(
            f"domain continuation not Cauchy: drift {drifts[-1][1]:.3e} on |z| <= {grid0.radius:g}",
            RuntimeWarning,
            stacklevel=2,
        )
    verdicts = dict(last.bounds_checked)
    verdicts["converged"] = all(r.bounds_checked["converged"] for r in reports)
    verdicts["domain_cauchy"] = domain_ok
    for key in ("residual_ok", "sup_bound_ok", "energy_bound_ok"):
        verdicts[key] = all(r.bounds_checked[key] for r in reports)
    trace = tuple(t for r in reports for t in r.trace)
    iterates = tuple(it for r in reports for it in r.iterates)
    limits = tuple((r.solution.grid.radius, r.solution) for r in reports)
    return SolveReport(last.solution, trace, verdicts, iterates, tuple(drifts), domain_solutions=limits)


def curvature_law(k: float) -> PowerLaw:
    """Chern scalar curvature ``-2k (1+|z|^2)^-(k+2)`` of ``(1+|z|^2)^k g0``."""
    return PowerLaw.term(-2.0 * k, -(k + 2.0))


def family_problem(K: FieldSource, cert: DecayCertificate, k: float) -> ProblemSpec:
    return ProblemSpec(f=curvature_law(k), h=K, bg=BackgroundMetric.weighted(k), certificate=cert)


def assemble_classical(v: ScalarField, k: float) -> ScalarField:
    """``u_k = (v_k + k log(1+|z|^2)) / 2``, a solution of ``Lap u + K e^{2u} = 0``."""
    return ScalarField(0.5 * (v.values + k * np.log1p(v.grid.r2)), v.grid, BackgroundMetric.flat())


def _family_member(args):
    K, cert, k, schedule = args
    rep = continue_domain(family_problem(K, cert, k), schedule)
    return SolveReport(
        rep.solution, rep.trace, rep.bounds_checked, rep.iterates, rep.domain_drifts,
        classical=assemble_classical(rep.solution, k), k=k, domain_solutions=rep.domain_solutions,
    )


def solve_family(
    K: FieldSource,
    cert: DecayCertificate,
    ks: Sequence[float],
    schedule: Schedule,
    workers: int = 1,
) -> list:
    """One solution per admissible ``k``, each on the background ``(1+|z|^2)^k g0``.

    Every ``k`` is checked against the window ``[l-2, l-1) & (0, lam/2]`` of
    the certificate before any solve starts. With ``workers > 1`` members are
    solved in separate processes.
    """
    window = admissible_k(cert.l, cert.lam)
    for k in ks:
        if not window.contains(k):
            raise InadmissibleError(k, window)
    jobs = [(K, cert, float(k), schedule) for k in ks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_family_member, jobs))
    return [_family_member(j) for j in jobs]


def verify_apriori_bounds(report, p: ProblemSpec, eps: float, tol_sup: float = 1e-8,
                          tol_energy: float = 1e-6) -> dict:
    """Check the zeroth-order and energy estimates on an ``eps``-solution.

    ``report`` may be a :class:`SolveReport` (its solution is used) or a
    :class:`ScalarField`. Both sides of each inequality are recomputed from
    the field:

    (a) ``sup|u| <= (||f|| + ||h||) / eps + tol_sup``
    (b) ``int |grad u|^2 dx dy <= 2 int u (h - f) dvol + tol_energy``
    """
    u = report.solution if isinstance(report, SolveReport) else report
    grid = u.grid
    f, h, rho = p.sampled(grid)
    inner = grid.interior
    sup_u = float(np.max(np.abs(u.values[inner]))) if inner.any() else 0.0
    fnorm = float(np.max(np.abs(f[inner])) + np.max(np.abs(h[inner])))
    sup_bound = fnorm / eps if eps > 0 else math.inf
    vals = np.where(inner, u.values, 0.0)
    energy = gradient_energy(vals, grid)
    rhs = 2.0 * float(np.sum((vals * (h - f) * rho)[inner])) * grid.spacing**2
    return {
        "eps": eps,
        "sup_norm": sup_u,
        "sup_bound": sup_bound,
        "sup_pass": sup_u <= sup_bound + tol_sup,
        "sup_slack": sup_bound - sup_u,
        "energy": energy,
        "energy_bound": rhs,
        "energy_pass": energy <= rhs + tol_energy,
        "energy_slack": rhs - energy,
        "pass": sup_u <= sup_bound + tol_sup and energy <= rhs + tol_energy,
    }


def residual_field(u: ScalarField, p: ProblemSpec, eps: float = 0.0) -> ScalarField:
    """``0.5/rho Lap_h u + h e^u - f - eps u`` on interior nodes, zero elsewhere.

    ``Lap_h`` is the solver's Dirichlet operator, so boundary values of ``u``
    are taken to be zero.
    """
    f, h, rho = p.sampled(u.grid)
    lap = 0.5 * dirichlet_laplacian_apply(u, u.grid).values / rho
    r = lap + h * np.exp(np.minimum(u.values, EXP_CLIP)) - f - eps * u.values
    return u.with_values(np.where(u.grid.interior, r, 0.0))


def verify_uniqueness(u_a: ScalarField, u_b: ScalarField, p: ProblemSpec, tol: float = 1e-6) -> dict:
    """Discrete form of the subharmonic comparison between two solutions.

    Forms ``w = e^(a-b) + e^(b-a)`` and checks ``Lap_h w >= -tol`` with
    the plain 5-point stencil on the nodes where both discrete equations use
    that stencil (interior to both grids, no link cut by a disk boundary).
    For two discrete solutions of one problem this holds by convexity of
    ``w``. The oscillation ``max w - min w`` over all common interior nodes
    is zero exactly when the two fields coincide.
    """
    if not u_a.grid.same_nodes(u_b.grid):
        raise ValueError("solutions must share node coordinates")
    grid = u_a.grid if u_a.grid.n_interior <= u_b.grid.n_interior else u_b.grid
    common = u_a.grid.interior & u_b.grid.interior
    d = u_a.values - u_b.values
    w = np.exp(d) + np.exp(-d)
    h2 = grid.spacing**2
    lap = np.full(w.shape, np.inf)
    lap[1:-1, 1:-1] = (w[2:, 1:-1] + w[:-2, 1:-1] + w[1:-1, 2:] + w[1:-1, :-2] - 4.0 * w[1:-1, 1:-1]) / h2
    plain = common & (cut_link_excess(u_a.grid) == 0) & (cut_link_excess(u_b.grid) == 0)
    lap_c = lap[plain]
    wc = w[common]
    res_a = residual_field(u_a, p).sup_norm(interior_only=True)
    res_b = residual_field(u_b, p).sup_norm(interior_only=True)
    min_lap = float(lap_c.min())
    return {
        "subharmonic": bool(min_lap >= -tol),
        "min_laplacian": min_lap,
        "oscillation": float(wc.max() - wc.min()),
        "max_difference": float(np.max(np.abs(d[common]))),
        "residual_a": res_a,
        "residual_b": res_b,
        "nodes": int(common.sum()),
        "stencil_nodes": int(plain.sum()),
    }
