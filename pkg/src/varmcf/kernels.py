"""Radial kernel pairs for regularizing varifold quantities.

A pair consists of a profile ``rho`` smoothing the first variation and a
profile ``xi`` smoothing the mass measure, both supported on [0, 1]. The
natural companion of ``rho`` in ambient dimension n is
``xi(r) = -r rho'(r) / n``; with that choice the two scaled kernels satisfy
the differentiation identity that makes the curvature quotient consistent.
Normalization divides each profile by its d-dimensional moment so the
quotient carries no spurious constant.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

__all__ = [
    "PolynomialProfile",
    "NaturalCompanion",
    "ScaledProfile",
    "KernelPair",
    "natural_pair_from_rho",
    "normalization_constant",
    "normalize_pair",
    "default_kernel_pair",
    "mismatched_pair",
    "make_kernel_pair",
]

# Dense grid used for sup norms, positivity checks, and beta.
_GRID_SIZE = 4096
_GRID = np.linspace(0.0, 1.0, _GRID_SIZE)


class PolynomialProfile:
    """Compactly supported bump (1 - r^2)^k on [0, 1], zero outside.

    The exponent must be at least 3 so the extension by zero is C^2.
    """

    def __init__(self, exponent=4):
        exponent = int(exponent)
        if exponent < 3:
            raise ValueError(
                "exponent must be >= 3 for a C^2 compactly supported profile"
            )
        self.exponent = exponent

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        u = 1.0 - r**2
        return np.where((r >= 0) & (r < 1), np.maximum(u, 0.0) ** self.exponent, 0.0)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        k = self.exponent
        u = np.maximum(1.0 - r**2, 0.0)
        return np.where((r >= 0) & (r < 1), -2.0 * k * r * u ** (k - 1), 0.0)

    def second_derivative(self, r):
        r = np.asarray(r, dtype=float)
        k = self.exponent
        u = np.maximum(1.0 - r**2, 0.0)
        val = -2.0 * k * u ** (k - 1) + 4.0 * k * (k - 1) * r**2 * u ** (k - 2)
        return np.where((r >= 0) & (r < 1), val, 0.0)


class NaturalCompanion:
    """Mass profile xi(r) = -r rho'(r) / n induced by a first-variation
    profile rho in ambient dimension n."""

    def __init__(self, rho, n):
        self.rho = rho
        self.n = int(n)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return -r * self.rho.derivative(r) / self.n

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return -(self.rho.derivative(r) + r * self.rho.second_derivative(r)) / self.n


class ScaledProfile:
    """A profile multiplied by a constant factor."""

    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)

    def __call__(self, r):
        return self.factor * self.base(r)

    def derivative(self, r):
        return self.factor * self.base.derivative(r)

    def second_derivative(self, r):
        return self.factor * self.base.second_derivative(r)


def normalization_constant(profile, d):
    """d-dimensional moment d * omega_d * int_0^1 profile(r) r^(d-1) dr.

    omega_d is the volume of the d-dimensional unit ball. Uses adaptive
    quadrature with relative tolerance 1e-12.
    """
    d = int(d)
    if d < 1:
        raise ValueError("d must be a positive integer")
    omega = np.pi ** (d / 2.0) / gamma_fn(d / 2.0 + 1.0)
    val, _ = quad(
        lambda rr: float(profile(rr)) * rr ** (d - 1),
        0.0,
        1.0,
        epsabs=1e-300,
        epsrel=1e-12,
        limit=200,
    )
    return d * omega * val


class KernelPair:
    """A validated (rho, xi) profile pair with its derived constants.

    Parameters
    ----------
    rho : profile
        First-variation profile; needs value, derivative, second_derivative.
    xi : profile
        Mass profile; needs value and derivative.
    n : int
        Ambient dimension.
    d : int
        Surface dimension (for normalization moments).

    Raises
    ------
    ValueError
        If either profile is negative on [0, 1], fails to vanish smoothly
        at 1, xi is not positive inside (0, 1), or rho'(0) != 0 (the
        gradient of the scaled kernel would be discontinuous at the origin).
    """

    def __init__(self, rho, xi, n, d):
        self.rho = rho
        self.xi = xi
        self.n = int(n)
        self.d = int(d)
        if not 1 <= self.d < self.n:
            raise ValueError("need 1 <= d < n")
        self._validate()
        self.c_rho = normalization_constant(rho, self.d)
        self.c_xi = normalization_constant(xi, self.d)
        rp = np.abs(rho.derivative(_GRID))
        rpp = np.abs(rho.second_derivative(_GRID))
        xp = np.abs(xi.derivative(_GRID))
        self.sup_rho_deriv = float(rp.max())
        self.sup_rho_second = float(rpp.max())
        self.sup_xi_deriv = float(xp.max())
        # Natural up to scale: xi proportional to -r rho'(r) / n. Scale drops
        # out of the curvature quotient, so proportionality is what matters.
        u = xi(_GRID)
        v = -_GRID * rho.derivative(_GRID) / self.n
        lam = float(v @ u) / float(u @ u)
        self.natural = bool(
            np.max(np.abs(v - lam * u)) <= 1e-12 * max(1.0, float(np.abs(v).max()))
        )

    def _validate(self):
        rv = self.rho(_GRID)
        xv = self.xi(_GRID)
        if np.any(rv < 0) or np.any(xv < 0):
            raise ValueError("profiles must be nonnegative on [0, 1]")
        if np.any(xv[1:-1] <= 0):
            raise ValueError("xi must be positive on the open interval (0, 1)")
        # Smooth vanishing at the support boundary keeps the pair C^2/C^1.
        edge = 1.0 - 1e-9
        if abs(float(self.rho(edge))) > 1e-6 or abs(float(self.xi(edge))) > 1e-6:
            raise ValueError("profiles must vanish at r = 1")
        near = 1.0 - 1e-6
        if abs(float(self.rho.second_derivative(near))) > 1e-2:
            raise ValueError("rho must be C^2 across the support boundary")
        if abs(float(self.xi.derivative(near))) > 1e-2:
            raise ValueError("xi must be C^1 across the support boundary")
        if abs(float(self.rho.derivative(0.0))) > 1e-12:
            raise ValueError("rho'(0) must vanish")

    @property
    def lip_xi(self):
        return self.sup_xi_deriv

    def beta(self, c0):
        """min of xi over [c0^(-2/d) / 4, 1/2] by dense sampling."""
        if c0 <= 1.0:
            raise ValueError("c0 must exceed 1")
        left = c0 ** (-2.0 / self.d) / 4.0
        grid = np.linspace(left, 0.5, _GRID_SIZE)
        return float(self.xi(grid).min())

    def rho_scaled(self, r, eps):
        """Value of the scaled kernel eps^-n rho(r / eps); zero for r >= eps."""
        r = np.asarray(r, dtype=float)
        return self.rho(r / eps) / eps**self.n

    def xi_scaled(self, r, eps):
        """Value of the scaled kernel eps^-n xi(r / eps); zero for r >= eps."""
        r = np.asarray(r, dtype=float)
        return self.xi(r / eps) / eps**self.n

    def normalized(self):
        """Pair rescaled so both normalization constants equal 1."""
        return KernelPair(
            ScaledProfile(self.rho, 1.0 / self.c_rho),
            ScaledProfile(self.xi, 1.0 / self.c_xi),
            self.n,
            self.d,
        )


def natural_pair_from_rho(rho, n, d):
    """Kernel pair with xi the natural companion of rho."""
    return KernelPair(rho, NaturalCompanion(rho, n), n, d)


def normalize_pair(pair):
    """Rescale both profiles so their d-moments are 1."""
    return pair.normalized()


def default_kernel_pair(n, d, exponent=4, normalized=True):
    """Natural pair built on (1 - r^2)^exponent, normalized by default."""
    pair = natural_pair_from_rho(PolynomialProfile(exponent), n, d)
    return pair.normalized() if normalized else pair


def mismatched_pair(n, d, exponent=4, normalized=True):
    """Non-natural control pair for negative-control experiments.

    Uses the same rho but xi = (1 - r^2)^(exponent - 1), which is positive
    inside the support yet does not satisfy the natural relation; curvature
    built on it is expected to lose first-order consistency.
    """
    pair = KernelPair(
        PolynomialProfile(exponent), PolynomialProfile(exponent - 1), n, d
    )
    return pair.normalized() if normalized else pair


def make_kernel_pair(name, n, d, exponent=4, normalized=True):
    """Kernel pair by name: "natural" or "mismatched"."""
    if name == "natural":
        return default_kernel_pair(n, d, exponent, normalized)
    if name == "mismatched":
        return mismatched_pair(n, d, exponent, normalized)
    raise ValueError(f"unknown kernel pair {name!r}")
