"""Shared fixture builders for the test suite.

Two canonical d=2 symbols recur everywhere:

  b1: a = ((t - x1)^2 + x1^3) xi2^2
      one chain factor, remainder (x_p - phi)^2 + psi with p = 0,
      phi = x1, psi = x1^3, q1 = xi2^2.

  b2: a = (t - x1)^2 xi2^2 + (1/2) xi1^2 + (1/2) x1^3 xi2^2
      chain + elliptic branch with p = 1, q1 = xi2^2, r1 = 1/2,
      g1 = x1^3 xi2^2.
"""

from fractions import Fraction

import pytest

from hypcert.symbols import PhasePoint, PolySymbol, phase_variables


def _vars2():
    return phase_variables(2)


@pytest.fixture
def base2():
    return PhasePoint.base(2)


@pytest.fixture
def b1_a():
    t, (x1, x2), tau, (xi1, xi2) = _vars2()
    return ((t - x1) ** 2 + x1 ** 3) * xi2 ** 2


@pytest.fixture
def b2_a():
    t, (x1, x2), tau, (xi1, xi2) = _vars2()
    return ((t - x1) ** 2) * xi2 ** 2 + Fraction(1, 2) * xi1 ** 2 \
        + Fraction(1, 2) * x1 ** 3 * xi2 ** 2


@pytest.fixture
def b1_p(b1_a):
    tau = PolySymbol.coordinate(2, "tau")
    return -(tau ** 2) + b1_a


@pytest.fixture
def b2_p(b2_a):
    tau = PolySymbol.coordinate(2, "tau")
    return -(tau ** 2) + b2_a
