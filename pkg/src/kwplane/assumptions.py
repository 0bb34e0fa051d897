"""Admissibility of power-law data for the weighted sup-bound and the family window.

All verdicts are decided on exponents, exactly. For profiles
``c * (1 + |z|^2)^E`` integrability over the plane against ``dx dy`` is
``E < -1`` and boundedness is ``E <= 0``. Quadrature in
:func:`kwplane.discretize.integrate_plane` is only used as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import PowerProfile


@dataclass(frozen=True)
class Window:
    """Interval of reals with explicit endpoint closedness; ``empty`` overrides the bounds."""

    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False
    empty: bool = False

    def __post_init__(self):
        if not self.empty:
            degenerate = self.lo > self.hi or (
                self.lo == self.hi and not (self.lo_closed and self.hi_closed)
            )
            if degenerate:
                object.__setattr__(self, "empty", True)

    @classmethod
    def none(cls) -> "Window":
        return cls(math.nan, math.nan, empty=True)

    @property
    def is_empty(self) -> bool:
        return self.empty

    def contains(self, x: float) -> bool:
        if self.empty:
            return False
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return bool(above and below)

    __contains__ = contains

    def intersect(self, other: "Window") -> "Window":
        if self.empty or other.empty:
            return Window.none()
        if self.lo > other.lo:
            lo, lo_closed = self.lo, self.lo_closed
        elif other.lo > self.lo:
            lo, lo_closed = other.lo, other.lo_closed
        else:
            lo, lo_closed = self.lo, self.lo_closed and other.lo_closed
        if self.hi < other.hi:
            hi, hi_closed = self.hi, self.hi_closed
        elif other.hi < self.hi:
            hi, hi_closed = other.hi, other.hi_closed
        else:
            hi, hi_closed = self.hi, self.hi_closed and other.hi_closed
        return Window(lo, hi, lo_closed, hi_closed)

    __and__ = intersect

    def __str__(self) -> str:
        if self.empty:
            return "empty"
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo:g}, {self.hi:g}{right}"

    def as_dict(self) -> dict:
        if self.empty:
            return {"empty": True, "text": "empty"}
        return {
            "empty": False,
            "lo": self.lo,
            "hi": self.hi if math.isfinite(self.hi) else "inf",
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed,
            "text": str(self),
        }


@dataclass(frozen=True)
class Verdict:
    passed: bool
    exponent: float
    detail: str = ""

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class AdmissibilityQuery:
    """Power-law weights ``alpha``, ``phi``, ``psi`` and the family parameter ``k``.

    ``alpha`` must extend smoothly and positively over the point at
    infinity after multiplication by ``|z|^-4``, which for a pure power
    profile forces exponent ``-2``.
    """

    alpha: PowerProfile
    phi: PowerProfile
    psi: PowerProfile
    k: float

    def __post_init__(self):
        if self.alpha.exponent != -2.0:
            raise ValueError(
                f"alpha must have exponent -2 to extend over the sphere, got {self.alpha.exponent}"
            )

    @classmethod
    def from_exponents(cls, a: float, b: float, c: float, k: float) -> "AdmissibilityQuery":
        return cls(PowerProfile(1.0, a), PowerProfile(1.0, b), PowerProfile(1.0, c), k)

    @property
    def exponents(self) -> tuple:
        return self.alpha.exponent, self.phi.exponent, self.psi.exponent

    def linfty_exponent(self) -> float:
        a, b, c = self.exponents
        return a + self.k * b - c

    def integrand_exponent(self, q: float) -> float:
        """Exponent of ``alpha^(1-q) (phi^-k psi)^q``."""
        a, b, c = self.exponents
        return a * (1.0 - q) + q * (c - self.k * b)

    def integrand(self, q: float) -> PowerProfile:
        (ca, a), (cb, b), (cc, c) = (
            (p.coefficient, p.exponent) for p in (self.alpha, self.phi, self.psi)
        )
        coef = ca ** (1.0 - q) * (cb ** (-self.k) * cc) ** q
        return PowerProfile(coef, self.integrand_exponent(q))


def check_linfty(q: AdmissibilityQuery) -> Verdict:
    """Is ``alpha * phi^k / psi`` bounded on the plane? True iff ``a + k b - c <= 0``."""
    e = q.linfty_exponent()
    return Verdict(e <= 0.0, e, f"alpha*phi^k/psi ~ (1+|z|^2)^{e:g}")


def check_linfty_sampled(
    alpha: Callable, phi: Callable, psi: Callable, k: float,
    r_max: float = 1e3, tail_tol: float = 1e-3,
) -> Verdict:
    """Likely/unlikely verdict for radial callables that are not pure power laws.

    Samples ``alpha * phi^k / psi`` on a geometric mesh up to ``r_max``,
    fits the log-log slope over the last decade and extrapolates: a
    positive tail slope means unbounded. The ``detail`` records that this is
    a heuristic.
    """
    r = np.geomspace(1.0, r_max, 400)
    ratio = np.asarray(alpha(r), float) * np.asarray(phi(r), float) ** k / np.asarray(psi(r), float)
    if np.any(~np.isfinite(ratio)):
        return Verdict(False, math.inf, "non-finite sample: unlikely bounded")
    tail = r >= r_max / 10.0
    slope = float(np.polyfit(np.log(r[tail]), np.log(np.abs(ratio[tail]) + 1e-300), 1)[0])
    ok = slope <= tail_tol
    word = "likely bounded" if ok else "unlikely bounded"
    # slope is in |z|; report it in units of (1+|z|^2)
    return Verdict(ok, slope / 2.0, f"{word} (sampled tail slope {slope:.4g} to r={r_max:g})")


def q_window(q: AdmissibilityQuery) -> Window:
    """Exponents ``q > 1`` for which ``alpha^(1-q) (phi^-k psi)^q`` is integrable.

    The integrand has exponent ``a + q s`` with ``s = c - k b - a``;
    integrability against ``dx dy`` is ``a + q s < -1``.
    """
    a, b, c = q.exponents
    s = c - q.k * b - a
    bound = -1.0 - a
    above_one = Window(1.0, math.inf)
    if s == 0.0:
        return above_one if bound > 0 else Window.none()
    if s > 0:
        return above_one & Window(-math.inf, bound / s)
    return above_one & Window(bound / s, math.inf)


def admissible_k(l: float, lam: float) -> Window:
    """The family window ``[l-2, l-1) & (0, lam/2]``."""
    if not l > 1:
        raise ValueError(f"decay power must exceed 1, got {l}")
    if not lam > 0:
        raise ValueError(f"certificate constant must be positive, got {lam}")
    return Window(l - 2.0, l - 1.0, True, False) & Window(0.0, lam / 2.0, False, True)


def check_curvature_bound(k: float, l: float, lam: float) -> Verdict:
    """Does ``|curvature of (1+|z|^2)^k g0| = 2k (1+|z|^2)^-(k+2)`` obey ``lam (1+|z|^2)^-l``?

    True iff ``k + 2 >= l`` (decay) and ``2k <= lam`` (constant).
    """
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    decay = k + 2.0 >= l
    const = 4.0 * k <= 2.0 * lam
    detail = f"decay {'ok' if decay else 'too slow'} (k+2={k + 2:g}, l={l:g}); " \
             f"constant {'ok' if const else 'too large'} (2k={2 * k:g}, lambda={lam:g})"
    return Verdict(decay and const, (k + 2.0) - l, detail)


def canonical_query(l: float, k: float) -> AdmissibilityQuery:
    """Power-law data of the weighted family: ``a=-2, b=-1, c=-l``."""
    return AdmissibilityQuery.from_exponents(-2.0, -1.0, -l, k)


def full_check(l: float, lam: float, k: float) -> dict:
    """Every admissibility verdict for the family member ``k`` at one glance."""
    query = canonical_query(l, k)
    window = admissible_k(l, lam)
    qw = q_window(query)
    out = {
        "window": window.as_dict(),
        "in_window": window.contains(k),
        "linfty": check_linfty(query).passed,
        "q_window": qw.as_dict(),
    }
    out["curvature_bound"] = check_curvature_bound(k, l, lam).passed if k > 0 else False
    return out
