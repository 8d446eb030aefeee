"""Evaluable space-time functions u(x, t) with quadrature metadata.

A :class:`FunctionHandle` wraps a vectorized evaluator together with the
metadata the integration engines need: a support box (spatial ball radius
plus a time window), a growth envelope for the infinite past, a smoothness
marker, and the locations of isolated kinks in time.  Evaluators must be
pure and reentrant; all engines call them on large node batches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

SMOOTH = "smooth"
C1_TIME = "c1t"          # C^1 in t with isolated kinks, smooth in x
HOLDER = "holder"

GROWTH_DECAYING = "decaying"
GROWTH_BOUNDED = "bounded"
GROWTH_FORWARD_POLY = "forward-polynomial"   # bounded on every past cone


@dataclass(frozen=True)
class SupportBox:
    """u vanishes for |x| > radius or t outside (t_lo, t_hi)."""

    radius: float = math.inf
    t_lo: float = -math.inf
    t_hi: float = math.inf

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("support radius must be nonnegative")
        if self.t_lo > self.t_hi:
            raise ValueError("empty time window in support box")


@dataclass(frozen=True)
class FunctionHandle:
    """An evaluable u(x, t) on R^n x R.

    evaluator: maps (points, times) -> values, where ``points`` has shape
        (m, n) and ``times`` shape (m,).  Must accept arbitrary batches.
    dim: spatial dimension n.
    support: optional SupportBox; evaluator returns 0 outside it.
    growth: envelope of u on past cones, one of the GROWTH_* markers or None.
    smoothness: SMOOTH, C1_TIME or HOLDER.
    holder_eps: the Hölder margin when smoothness == HOLDER.
    time_kinks: times where u is only C^1 in t (panel split points).
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int
    support: SupportBox | None = None
    growth: str | None = None
    smoothness: str = SMOOTH
    holder_eps: float | None = None
    time_kinks: tuple[float, ...] = ()
    #: set when u is known to be identically this value (difference
    #: operators short-circuit to an exact 0)
    constant_value: float | None = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("spatial dimension must be 1, 2 or 3")
        if self.smoothness not in (SMOOTH, C1_TIME, HOLDER):
            raise ValueError(f"unknown smoothness marker {self.smoothness!r}")

    def __call__(self, points, times) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        tt = np.asarray(times, dtype=float)
        if pts.ndim == 1:
            # a flat array is a batch of 1-D points, or one n-D point
            pts = pts[:, None] if self.dim == 1 else pts[None, :]
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points have dimension {pts.shape[-1]}, expected {self.dim}")
        tt = np.broadcast_to(tt, pts.shape[:-1]).ravel()
        out = self.evaluator(pts.reshape(-1, self.dim), tt)
        return np.asarray(out, dtype=float).reshape(pts.shape[:-1])

    def at(self, x, t) -> float:
        """Evaluate at a single point."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self(x[None, :], np.array([t]))[0])

    def past_integrable(self) -> bool:
        """Whether the infinite-past tail integrals converge by metadata."""
        if self.support is not None and self.support.t_lo > -math.inf:
            return True
        return self.growth in (GROWTH_DECAYING, GROWTH_BOUNDED, GROWTH_FORWARD_POLY)


def from_callable(f, dim: int, **meta) -> FunctionHandle:
    """Wrap ``f(points, times)`` (vectorized) as a handle."""
    return FunctionHandle(evaluator=f, dim=dim, **meta)


def from_scalar(f, dim: int, **meta) -> FunctionHandle:
    """Wrap a scalar ``f(x_tuple, t)`` as a handle (slow path, tests only)."""

    def evaluator(pts, tt):
        return np.array([f(tuple(p), t) for p, t in zip(pts, tt)], dtype=float)

    return FunctionHandle(evaluator=evaluator, dim=dim, **meta)


def constant(value: float, dim: int = 1) -> FunctionHandle:
    v = float(value)

    def evaluator(pts, tt):
        return np.full(pts.shape[0], v)

    return FunctionHandle(evaluator=evaluator, dim=dim, growth=GROWTH_BOUNDED,
                          constant_value=v)


def zero(dim: int = 1) -> FunctionHandle:
    h = constant(0.0, dim)
    return replace(h, support=SupportBox(radius=0.0, t_lo=0.0, t_hi=0.0))


def combine(coeffs, handles) -> FunctionHandle:
    """Linear combination sum(c_k * u_k); metadata merged conservatively."""
    handles = list(handles)
    coeffs = [float(c) for c in coeffs]
    if len(coeffs) != len(handles) or not handles:
        raise ValueError("need matching, nonempty coefficient/handle lists")
    dim = handles[0].dim
    if any(h.dim != dim for h in handles):
        raise ValueError("mixed dimensions in combination")

    def evaluator(pts, tt):
        acc = coeffs[0] * handles[0](pts, tt)
        for c, h in zip(coeffs[1:], handles[1:]):
            acc = acc + c * h(pts, tt)
        return acc

    support = None
    if all(h.support is not None for h in handles):
        support = SupportBox(
            radius=max(h.support.radius for h in handles),
            t_lo=min(h.support.t_lo for h in handles),
            t_hi=max(h.support.t_hi for h in handles),
        )
    order = {SMOOTH: 0, C1_TIME: 1, HOLDER: 2}
    smoothness = max((h.smoothness for h in handles), key=order.get)
    eps = min((h.holder_eps for h in handles if h.holder_eps is not None), default=None)
    kinks = tuple(sorted({k for h in handles for k in h.time_kinks}))
    growth = None
    if all(h.past_integrable() for h in handles):
        growth = GROWTH_BOUNDED if support is None else None
    return FunctionHandle(
        evaluator=evaluator, dim=dim, support=support, growth=growth,
        smoothness=smoothness, holder_eps=eps, time_kinks=kinks,
    )


def shifted(u: FunctionHandle, x0, t0: float) -> FunctionHandle:
    """u(. - x0, . - t0), support box translated along."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    t0 = float(t0)

    def evaluator(pts, tt):
        return u(pts - x0[None, :], tt - t0)

    support = None
    if u.support is not None:
        # translated spatial ball is covered by a centered ball of radius r+|x0|
        support = SupportBox(
            radius=u.support.radius + float(np.linalg.norm(x0)),
            t_lo=u.support.t_lo + t0,
            t_hi=u.support.t_hi + t0,
        )
    kinks = tuple(k + t0 for k in u.time_kinks)
    return replace(u, evaluator=evaluator, support=support, time_kinks=kinks)


def spatial(f, dim: int = 1, **meta) -> FunctionHandle:
    """Handle for u(x) independent of t; f takes (m, n) points."""

    def evaluator(pts, tt):
        return np.asarray(f(pts), dtype=float)

    meta.setdefault("growth", GROWTH_BOUNDED)
    return FunctionHandle(evaluator=evaluator, dim=dim, **meta)


def temporal(f, dim: int = 1, **meta) -> FunctionHandle:
    """Handle for u(t) independent of x; f takes (m,) times."""

    def evaluator(pts, tt):
        return np.asarray(f(tt), dtype=float)

    return FunctionHandle(evaluator=evaluator, dim=dim, **meta)
