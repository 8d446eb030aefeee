"""Independent cross-checks of the engines against scipy's own integrators.

These rebuild the integrals from the raw formulas (kernel written inline,
scipy.integrate doing the work) and compare against the package's
quadrature machinery; nothing is shared beyond the profile definitions.
"""
import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from masterop import (
    C0_constant,
    QuadSpec,
    difference_decomposition,
    kernel_constants,
    master_op,
    tail_functional,
    w_family,
    zero,
)


S = 0.5
P = kernel_constants(1, S)
Q = QuadSpec()
C0 = C0_constant(S, 1, "normalized")
J = 8.0


def bump_scalar(r):
    if 2.0 < r < 3.0:
        return math.exp(-1.0 / ((r - 2.0) * (3.0 - r)))
    return 0.0


def w8_scalar(y, tau):
    eta = max(tau / J, 0.0) ** 2 + 1.0
    return J ** (2 * S) * bump_scalar(abs(y) / J) * eta / C0


def kernel_scalar(dx, a):
    return P.c_ns * a ** (-2.0) * math.exp(-dx * dx / (4.0 * a))


@pytest.mark.parametrize("probe,R", [((1.0, 1.0), 10.0), ((0.0, 0.0), 20.0)])
def test_tail_functional_against_dblquad(probe, R):
    x0, t0 = probe
    # spatial tail, tau in (-R^2, t): the support is the two bands
    # R < |y| < 3J (empty when 3J <= R)
    def spatial_part(side):
        lo = max(R, 2.0 * J)
        hi = 3.0 * J
        if hi <= lo:
            return 0.0
        val, _ = dblquad(
            lambda y, tau: w8_scalar(side * y, tau) * kernel_scalar(x0 - side * y, t0 - tau),
            -R * R, t0, lo, hi, epsabs=1e-11, epsrel=1e-9)
        return val

    # deep past, tau < -R^2, full bands 2J < |y| < 3J
    def deep_part(side):
        val, _ = dblquad(
            lambda y, tau: w8_scalar(side * y, tau) * kernel_scalar(x0 - side * y, t0 - tau),
            -np.inf, -R * R, 2.0 * J, 3.0 * J, epsabs=1e-11, epsrel=1e-9)
        return val

    want = sum(spatial_part(s) + deep_part(s) for s in (1.0, -1.0))
    got = tail_functional(w_family(8, 1.0, S), (np.array([x0]), t0), R, P, Q)
    assert got.value == pytest.approx(want, rel=1e-5)


def test_master_against_nested_quad():
    # master(w_8) at (1, 1): u vanishes at the point, so the operator is
    # minus the full past integral of u against the kernel
    x0, t0 = 1.0, 1.0

    def time_slice(y):
        # int_{-inf}^{t0} eta_8(tau) M(x0-y, t0-tau) dtau, per |y| band point
        val, _ = quad(lambda tau: w8_scalar(y, tau) * kernel_scalar(x0 - y, t0 - tau),
                      -np.inf, t0, epsabs=1e-12, epsrel=1e-10, limit=400)
        return val

    want = 0.0
    for side in (1.0, -1.0):
        val, _ = quad(lambda y: time_slice(side * y), 2.0 * J, 3.0 * J,
                      epsabs=1e-12, epsrel=1e-10, limit=200)
        want += val
    got = master_op(w_family(8, 1.0, S), (np.array([x0]), t0), P, Q)
    assert got.value == pytest.approx(-want, rel=1e-5)


def test_exterior_mass_diagnostic_decay():
    # the E-term diagnostic mass decays like R^{-2s}
    u = zero(1)
    w = w_family(8, 1.0, S)
    masses = []
    for R in (20.0, 40.0, 80.0):
        d = difference_decomposition(u, w, (np.zeros(1), 0.0), R, P, Q)
        masses.append(d.ext_mass)
    assert masses[0] > masses[1] > masses[2] > 0.0
    assert masses[0] / masses[1] == pytest.approx(2.0 ** (2 * S), rel=0.1)
    assert masses[1] / masses[2] == pytest.approx(2.0 ** (2 * S), rel=0.1)
