import os
import sys

import numpy as np
import pytest
from scipy.special import erf, jv

from idect.approx import Domain
from idect.solver import ConstraintRow, IdeProblem

HERE = os.path.dirname(os.path.abspath(__file__))
PROBLEMS = os.path.join(os.path.dirname(HERE), "problems")
sys.path.insert(0, HERE)

GRID = np.linspace(0.0, 1.0, 1000)


def ex32_exact(a=100.0):
    b = 0.5 * np.sqrt(a * a - 2 * a + 5)

    def y(t):
        t = np.asarray(t, dtype=float)
        return np.exp(-(a + 1) / 2 * t) * (np.cosh(b * t) + (1 - a) / (2 * b) * np.sinh(b * t))

    return y


def ex32_problem(a=100.0, **kw):
    return IdeProblem(
        Domain(1.0), [a, 1.0], "volterra", "exp(-u)", sign=1.0, rhs=0.0,
        constraints=[ConstraintRow("eval", 1.0, 0.0)], **kw,
    )


def ex32_lowrank_problem(a=100.0):
    return IdeProblem(
        Domain(1.0), [a, 1.0], "volterra_lowrank", sign=1.0, rhs=0.0,
        constraints=[ConstraintRow("eval", 1.0, 0.0)], lowrank=[("exp(-t)", "exp(t)")],
    )


def ex33_problem(a=100.0, T=1.0):
    b = 0.5 * np.sqrt(a * a - 2 * a + 5)

    def f(t):
        return np.exp(-t) * (np.exp((1 - a) / 2 * T) * np.sinh(b * T) - np.exp((1 - a) / 2 * t) * np.sinh(b * t)) / b

    gamma_T = float(ex32_exact(a)(T))
    return IdeProblem(
        Domain(T), [-1.0, a, 1.0], "fredholm", "exp(-u)", sign=-1.0, rhs=f,
        constraints=[ConstraintRow("eval", 1.0, 0.0), ConstraintRow("eval", gamma_T, T)],
    )


def gauss_conv(t, xi, sigma):
    """int_0^1 exp(-(t-s)^2/(2 sigma^2)) exp(-s^2/(2 xi^2)) ds in closed form."""
    r = np.sqrt(sigma**2 + xi**2)
    return (
        xi * sigma / r * np.sqrt(np.pi / 2) * np.exp(-t**2 / (2 * r**2))
        * (erf(xi * t / (sigma * r * np.sqrt(2))) + erf((r**2 - xi**2 * t) / (xi * sigma * r * np.sqrt(2))))
    )


def ex41_problem(xi=0.1, sigma=1.0):
    """Right-hand side and mean as printed; exact solution exp(-t^2/(2 xi^2))."""
    gamma = np.sqrt(np.pi / 2) * xi * erf(1 / (np.sqrt(2) * xi))
    return IdeProblem(
        Domain(1.0), [1.0, "t", xi**2], "fredholm", f"exp(-u^2/(2*{sigma!r}^2))", sign=-1.0,
        rhs=lambda t: gauss_conv(t, xi, sigma),
        constraints=[ConstraintRow("eval", 1.0, 0.0), ConstraintRow("mean", float(gamma))],
    )


def ex41_manufactured_problem(xi=0.1, sigma=1.0):
    """Same operator, data chosen so that y = exp(-t^2/xi^2)."""
    xp = xi / np.sqrt(2)
    gamma = xi * np.sqrt(np.pi) / 2 * erf(1 / xi)

    def f(t):
        return (2 * t**2 / xi**2 - 1) * np.exp(-t**2 / xi**2) + gauss_conv(t, xp, sigma)

    return IdeProblem(
        Domain(1.0), [1.0, "t", xi**2], "fredholm", f"exp(-u^2/(2*{sigma!r}^2))", sign=-1.0,
        rhs=f, constraints=[ConstraintRow("eval", 1.0, 0.0), ConstraintRow("mean", float(gamma))],
    )


def ex42_exact(eta=3, omega=20.0):
    def y(t):
        t = np.asarray(t, dtype=float)
        x = omega * t
        with np.errstate(invalid="ignore", divide="ignore"):
            out = eta * jv(eta, x) / x
        return np.where(x == 0, 0.0, out)

    return y


def ex42_problem(eta=3, mu=2, omega=20.0, eps=1.0):
    def f(t):
        x = omega * t
        return jv(mu + eta, x) + (
            (eta - 1) * (eta - 2) * jv(eta - 1, x) + (eta + 1) * (eta + 2) * jv(eta + 1, x)
        ) / (2 * t**2)

    return IdeProblem(
        Domain(1.0), [omega**2, 0.0, eps], "volterra", lambda u: omega * jv(mu, omega * u),
        sign=-1.0, rhs=f,
        constraints=[ConstraintRow("eval", 0.0, 0.0), ConstraintRow("deriv", 0.0, 0.0)],
    )


@pytest.fixture
def unit():
    return Domain(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
