"""Counterexample families: spatial bumps, temporal bumps, and the coupled
family whose operator values converge to -1 while the functions shrink to 0.

The profile is the standard smooth bump exp(-1/((r-2)(3-r))) on (2, 3).
All normalization constants derived from it (C0, C1) are computed by
adaptive 1-D quadrature and exposed in both raw and normalized modes so
that family limits are mode-consistent end to end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as _gamma

from .handles import (
    C1_TIME,
    FunctionHandle,
    GROWTH_FORWARD_POLY,
    SupportBox,
    spatial,
    temporal,
)
from .kernel import NORMALIZED, RAW, laplacian_constant, marchaud_constant


def standard_bump(r):
    """exp(-1/((r-2)(3-r))) on (2, 3), zero elsewhere; smooth, values in [0, 1)."""
    scalar = np.ndim(r) == 0
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros_like(rr)
    m = (rr > 2.0) & (rr < 3.0)
    g = (rr[m] - 2.0) * (3.0 - rr[m])
    with np.errstate(over="ignore", divide="ignore"):
        out[m] = np.exp(-1.0 / g)
    return float(out[0]) if scalar else out


def psi_profile(t):
    """The reflected bump on (-3, -2)."""
    return standard_bump(-np.asarray(t, dtype=float))


def surface_measure(n: int) -> float:
    """|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2), with the 0-sphere counting 2."""
    return 2.0 * math.pi ** (n / 2.0) / _gamma(n / 2.0)


@lru_cache(maxsize=128)
def C0_constant(s: float, n: int = 1, normalization: str = NORMALIZED) -> float:
    """|S^{n-1}| * int_2^3 bump(r) r^{-(1+2s)} dr, times C_{n,s} when normalized.

    This is the limiting magnitude of the fractional Laplacian over the
    critically-scaled spatial bump family.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("need 0 < s < 1")
    val, _ = quad(lambda r: math.exp(-1.0 / ((r - 2.0) * (3.0 - r))) * r ** (-1.0 - 2.0 * s),
                  2.0, 3.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    val *= surface_measure(n)
    if normalization == NORMALIZED:
        val *= laplacian_constant(n, s)
    elif normalization != RAW:
        raise ValueError(f"unknown normalization {normalization!r}")
    return val


@lru_cache(maxsize=128)
def C1_constant(s: float, normalization: str = NORMALIZED) -> float:
    """Limiting magnitude of the one-sided derivative over the temporal family.

    Scaling out j gives C_s * int_2^3 bump(r) r^{-(1+s)} dr for the
    critical exponent choice; recorded numerically, no closed form claimed.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("need 0 < s < 1")
    val, _ = quad(lambda r: math.exp(-1.0 / ((r - 2.0) * (3.0 - r))) * r ** (-1.0 - s),
                  2.0, 3.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    if normalization == NORMALIZED:
        val *= marchaud_constant(s)
    elif normalization != RAW:
        raise ValueError(f"unknown normalization {normalization!r}")
    return val


@dataclass(frozen=True)
class FamilyParams:
    """Parameters of the three counterexample families."""

    j: int
    s: float
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    n: int = 1
    normalization: str = NORMALIZED

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("j must be a positive integer")
        if not 0.0 < self.s < 1.0:
            raise ValueError("need 0 < s < 1")
        if self.alpha <= 0 or self.beta <= 0 or self.gamma <= 0:
            raise ValueError("alpha, beta, gamma must be positive")

    @property
    def critical(self) -> bool:
        """Whether alpha = 2 beta s (the nonzero-limit regime)."""
        return math.isclose(self.alpha, 2.0 * self.beta * self.s, rel_tol=1e-12)


def phi_family(j: int, alpha: float, beta: float, dim: int = 1) -> FunctionHandle:
    """x -> j^alpha bump(j^{-beta} |x|), supported in 2 j^beta <= |x| <= 3 j^beta."""
    if j < 1 or alpha <= 0 or beta <= 0:
        raise ValueError("need j >= 1 and positive alpha, beta")
    amp = float(j) ** alpha
    scale = float(j) ** (-beta)

    def f(pts):
        return amp * standard_bump(scale * np.linalg.norm(pts, axis=-1))

    return spatial(f, dim=dim,
                   support=SupportBox(radius=3.0 * float(j) ** beta))


def psi_family(j: int, alpha: float, beta: float, dim: int = 1) -> FunctionHandle:
    """t -> j^alpha psi(j^{-beta} t), supported in -3 j^beta <= t <= -2 j^beta."""
    if j < 1 or alpha <= 0 or beta <= 0:
        raise ValueError("need j >= 1 and positive alpha, beta")
    amp = float(j) ** alpha
    scale = float(j) ** (-beta)

    def f(tt):
        return amp * psi_profile(scale * np.asarray(tt, dtype=float))

    return temporal(f, dim=dim,
                    support=SupportBox(radius=math.inf,
                                       t_lo=-3.0 * float(j) ** beta,
                                       t_hi=-2.0 * float(j) ** beta))


def eta_profile(t):
    """(t_+)^2 + 1: the forward-quadratic time weight."""
    t = np.asarray(t, dtype=float)
    return np.maximum(t, 0.0) ** 2 + 1.0


def eta_marchaud_closed_form(t, s: float):
    """d_t^s of (t_+)^2 equals Gamma(3)/Gamma(3-s) (t_+)^{2-s} for t > 0."""
    t = np.asarray(t, dtype=float)
    return _gamma(3.0) / _gamma(3.0 - s) * np.maximum(t, 0.0) ** (2.0 - s)


def w_family(j: int, gamma: float, s: float, n: int = 1,
             normalization: str = NORMALIZED) -> FunctionHandle:
    """(x, t) -> phi_j(x) eta(j^{-gamma} t) / C0 with alpha = 2s, beta = 1.

    Requires gamma > s.  Nonnegative, equal to phi_j(x)/C0 for t <= 0,
    quadratically growing in forward time, spatially supported in the
    ball of radius 3 j.  The C0 used matches ``normalization``, so the
    master-operator values converge to -1 in the same mode.
    """
    if gamma <= s:
        raise ValueError(f"need gamma > s, got gamma={gamma}, s={s}")
    if j < 1:
        raise ValueError("j must be a positive integer")
    C0 = C0_constant(s, n, normalization)
    amp = float(j) ** (2.0 * s) / C0
    jg = float(j) ** (-gamma)
    inv_j = 1.0 / float(j)

    def evaluator(pts, tt):
        r = np.linalg.norm(pts, axis=-1)
        return amp * standard_bump(inv_j * r) * eta_profile(jg * tt)

    return FunctionHandle(
        evaluator=evaluator, dim=n,
        support=SupportBox(radius=3.0 * float(j)),
        growth=GROWTH_FORWARD_POLY,
        smoothness=C1_TIME,
        time_kinks=(0.0,),
    )


def rescale(u: FunctionHandle, Mk: float, lambda_k: float, x_bar,
            t_bar: float) -> FunctionHandle:
    """v(x, t) = u(lambda x + x_bar, lambda^2 t + t_bar) / M, parabolic scaling.

    The support box transforms along: spatial radius divides by lambda
    (plus the offset reach), the time window maps affinely.
    """
    if Mk <= 0 or lambda_k <= 0:
        raise ValueError("need Mk > 0 and lambda_k > 0")
    x_bar = np.atleast_1d(np.asarray(x_bar, dtype=float))
    lam2 = lambda_k * lambda_k

    def evaluator(pts, tt):
        return u(lambda_k * pts + x_bar[None, :], lam2 * tt + float(t_bar)) / Mk

    support = None
    if u.support is not None:
        sup = u.support
        radius = sup.radius
        if math.isfinite(radius):
            radius = (radius + float(np.linalg.norm(x_bar))) / lambda_k
        t_lo = (sup.t_lo - t_bar) / lam2 if sup.t_lo > -math.inf else -math.inf
        t_hi = (sup.t_hi - t_bar) / lam2 if sup.t_hi < math.inf else math.inf
        support = SupportBox(radius=radius, t_lo=t_lo, t_hi=t_hi)
    kinks = tuple((k - t_bar) / lam2 for k in u.time_kinks)
    return FunctionHandle(
        evaluator=evaluator, dim=u.dim, support=support, growth=u.growth,
        smoothness=u.smoothness, holder_eps=u.holder_eps, time_kinks=kinks,
    )
