"""Complex-argument special functions underpinning the other modules.

Cylindrical functions J_n, H_n^(1) and their derivatives are evaluated
through scipy's AMOS bindings, which handle genuinely complex arguments on
the principal branch (cut along the negative real axis).  Spherical
functions j_l, h_l^(1) reduce to half-integer cylindrical orders.  The
Whittaker function M_{lambda,mu} is summed directly from its Kummer series

    M_{lambda,mu}(z) = e^{-z/2} z^{mu+1/2}
                       sum_{m>=0} (mu-lambda+1/2)_m / (1+2mu)_m * z^m / m!

which is entire in z; for the integer mu >= 0 used here the denominator
parameter 1+2mu is a positive integer, so the series never degenerates.

Branch policy, fixed once for the whole package and reused by the material
layer: principal square root and principal logarithm, cut along the
negative real axis.

Everything here is a pure function of its value arguments and safe to call
from any number of workers concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .errors import PrecisionError, RangeError, SingularArgumentError

__all__ = [
    "CylPair",
    "SphPair",
    "cyl_bessel",
    "sph_bessel",
    "whittaker_m",
    "cyl_wronskian_residual",
    "sph_wronskian_residual",
]


@dataclass(frozen=True)
class CylPair:
    """J_n, H_n^(1) and derivatives at one complex argument.

    Wronskian identity: J*H1' - J'*H1 = 2i/(pi*z).
    """

    n: int
    z: complex
    J: complex
    Jp: complex
    H1: complex | None = None
    H1p: complex | None = None


@dataclass(frozen=True)
class SphPair:
    """j_l, h_l^(1) and derivatives at one complex argument.

    Wronskian identity: j*h1' - j'*h1 = i/z^2.
    """

    l: int
    z: complex
    j: complex
    jp: complex
    h1: complex | None = None
    h1p: complex | None = None


def _check_finite(name: str, *values: complex) -> None:
    for v in values:
        if v is not None and not np.isfinite(v):
            raise RangeError(f"{name}: non-finite value (argument out of range)")


def cyl_bessel(n: int, z: complex, hankel: bool = True) -> CylPair:
    """J_n(z), H_n^(1)(z) and derivatives for integer order n, complex z.

    Negative orders use J_{-n} = (-1)^n J_n (same for H and the
    derivatives).  At z = 0 only the J part is defined; requesting the
    Hankel part there raises SingularArgumentError.
    """
    n = int(n)
    z = complex(z)
    m = abs(n)
    sign = 1.0 if (n >= 0 or m % 2 == 0) else -1.0

    if z == 0:
        if hankel:
            raise SingularArgumentError("H_n^{(1)} is singular at z = 0")
        J = 1.0 + 0j if m == 0 else 0j
        Jp = 0.5 + 0j if m == 1 else 0j
        return CylPair(n=n, z=z, J=sign * J, Jp=sign * Jp)

    with warnings.catch_warnings():
        # near the overflow boundary scipy emits RuntimeWarnings before we
        # turn the non-finite values into a RangeError
        warnings.simplefilter("ignore", RuntimeWarning)
        J = complex(_sp.jv(m, z))
        Jp = complex(_sp.jvp(m, z))
        if not hankel:
            _check_finite("cyl_bessel", J, Jp)
            return CylPair(n=n, z=z, J=sign * J, Jp=sign * Jp)
        H = complex(_sp.hankel1(m, z))
        Hp = complex(_sp.h1vp(m, z))
    _check_finite("cyl_bessel", J, Jp, H, Hp)
    return CylPair(n=n, z=z, J=sign * J, Jp=sign * Jp, H1=sign * H, H1p=sign * Hp)


def sph_bessel(l: int, z: complex, hankel: bool = True) -> SphPair:
    """j_l(z), h_l^(1)(z) and derivatives for degree l >= 0, complex z."""
    if l < 0:
        raise ValueError("spherical degree l must be >= 0")
    z = complex(z)

    if z == 0:
        if hankel:
            raise SingularArgumentError("h_l^{(1)} is singular at z = 0")
        j = 1.0 + 0j if l == 0 else 0j
        jp = (1.0 / 3.0) + 0j if l == 1 else 0j
        return SphPair(l=l, z=z, j=j, jp=jp)

    j = complex(_sp.spherical_jn(l, z))
    jp = complex(_sp.spherical_jn(l, z, derivative=True))
    if not hankel:
        _check_finite("sph_bessel", j, jp)
        return SphPair(l=l, z=z, j=j, jp=jp)

    y = complex(_sp.spherical_yn(l, z))
    yp = complex(_sp.spherical_yn(l, z, derivative=True))
    h = j + 1j * y
    hp = jp + 1j * yp
    _check_finite("sph_bessel", j, jp, h, hp)
    return SphPair(l=l, z=z, j=j, jp=jp, h1=h, h1p=hp)


def _kummer_series(a: complex, b: int, z: complex, rtol: float, max_terms: int):
    """(1F1(a; b; z), d/dz 1F1) by direct summation (b a positive integer)."""
    term = 1.0 + 0j
    total = term
    dtotal = 0j
    quiet = 0
    for m in range(1, max_terms + 1):
        term *= (a + (m - 1)) / ((b + (m - 1)) * m) * z
        total += term
        dtotal += term * m / z      # sum of (a)_m/(b)_m z^{m-1}/(m-1)!
        if abs(term) <= rtol * abs(total):
            quiet += 1
            if quiet >= 3:
                return total, dtotal
        else:
            quiet = 0
    raise PrecisionError(
        f"Kummer series did not converge within {max_terms} terms (|z| = {abs(z):.3g})"
    )


def whittaker_m(
    lam: complex,
    mu: int,
    z: complex,
    rtol: float = 1e-14,
    max_terms: int = 600,
    derivative: bool = False,
):
    """Whittaker M_{lam,mu}(z) by the Kummer series, integer mu >= 0.

    Uses the principal branch of z^{mu+1/2}.  With derivative=True returns
    the pair (M, dM/dz).  Raises PrecisionError if the series has not
    converged (relative tail below rtol for three consecutive terms)
    within max_terms; callers then fall back to the ODE-integrated radial
    pair, which needs no series at all.
    """
    if mu < 0 or mu != int(mu):
        raise ValueError("whittaker_m requires integer mu >= 0")
    mu = int(mu)
    z = complex(z)
    if z == 0:
        raise SingularArgumentError("whittaker_m: z = 0 (use the z^{mu+1/2} limit)")

    a = mu - lam + 0.5
    b = 1 + 2 * mu
    F, dF = _kummer_series(a, b, z, rtol, max_terms)

    # principal branch: z^{mu+1/2} = exp((mu+1/2) Log z)
    front = np.exp(-z / 2.0) * np.exp((mu + 0.5) * np.log(z))
    value = complex(front * F)
    _check_finite("whittaker_m", value)
    if not derivative:
        return value
    dvalue = complex(front * (dF + (-0.5 + (mu + 0.5) / z) * F))
    _check_finite("whittaker_m", dvalue)
    return value, dvalue


def cyl_wronskian_residual(pair: CylPair) -> float:
    """Relative deviation of J*H1' - J'*H1 from 2i/(pi z)."""
    target = 2j / (np.pi * pair.z)
    w = pair.J * pair.H1p - pair.Jp * pair.H1
    return abs(w - target) / abs(target)


def sph_wronskian_residual(pair: SphPair) -> float:
    """Relative deviation of j*h1' - j'*h1 from i/z^2."""
    target = 1j / pair.z**2
    w = pair.j * pair.h1p - pair.jp * pair.h1
    return abs(w - target) / abs(target)
