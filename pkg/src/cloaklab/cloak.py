"""Geometry and materials of the approximate cloak.

The cloak is built by blowing the small ball B_eps up to B_1 while keeping
S_2 fixed.  Radially, the map is

    F(x) = ((2-2*eps)/(2-eps) + |x|/(2-eps)) * x/|x|   on B_2 \\ B_eps,
    F(x) = x                                           outside B_2,

with Jacobian (hat = x/|x|)

    DF = (1/(2-eps)) [ I + ((2-2*eps)/|x|) (I - hat ox hat) ],
    det DF = (2-2*eps+|x|)^{d-1} / ((2-eps)^d |x|^{d-1}),

and det DF = 1/eps^d inside B_eps.  det DF > 0 everywhere, so the absolute
value in |det DF| is dropped and asserted as an invariant instead.

The dispersive (Drude-Lorentz) coefficient is

    sigma(k) = 1 / (k_eps^2 - k^2 - i k),

whose poles are kappa = sqrt(k_eps^2 - 1/4) - i/2 and -conj(kappa); it
satisfies conj(sigma(k)) = sigma(-conj(k)) exactly.  After pulling the
anisotropic problem back through F, the index in the annulus is

    q(r, k) = 1 + sigma(k) * det DF(r),        eps < r < 2,
    q = 1 outside B_2.

The contrast magnitude controlling all scattering estimates is

    M(eps, k) = |sigma(k)| / ((2-eps) eps^{d-1}),

and the frequency weight a(k) is 1 in 3d and min(1+|ln k|, k^{-1/4}) in 2d.

classify_k places a complex wave number relative to the compact region K of
the lower half-plane (boundary: the slant segments Im k = -|Re k|, the
horizontal segment Im k = -1/2 and the arcs Re k = +-sqrt(b^2+b+k_eps^2))
and the right/left/vertical coercivity regions.  The right and left sets
are used together with their -conj(k) mirror images, as in the symmetry
argument that extends discreteness to them; the in_base_union flag records
whether the point lies in one of the three literally defined sets, so the
classifier never silently overstates coverage.

All functions are pure; concurrent use is unrestricted.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import PoleError, ValidationError

__all__ = [
    "CloakParams",
    "MaterialSample",
    "RegionTag",
    "RegionLabel",
    "map_F",
    "map_F_radius",
    "DF_matrix",
    "det_DF",
    "sigma",
    "sigma_poles",
    "q_index",
    "material_sample",
    "push_forward",
    "m_eps_k",
    "a_factor",
    "classify_k",
    "region_arc_re",
]


@dataclass(frozen=True)
class CloakParams:
    """Full physical configuration of one cloak.

    eps is the regularization radius (0 < eps < 1), k_eps the Drude-Lorentz
    resonant frequency (> 1/2), dim the ambient dimension (2 or 3).
    """

    eps: float
    k_eps: float
    dim: int

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ValidationError(f"eps must be in (0, 1), got {self.eps}")
        if not self.k_eps > 0.5:
            raise ValidationError(f"k_eps must exceed 1/2, got {self.k_eps}")
        if self.dim not in (2, 3):
            raise ValidationError(f"dim must be 2 or 3, got {self.dim}")

    @property
    def kappa(self) -> complex:
        """Pole of sigma in the right half-plane: sqrt(k_eps^2-1/4) - i/2."""
        return math.sqrt(self.k_eps**2 - 0.25) - 0.5j


@dataclass(frozen=True)
class MaterialSample:
    """Material data at one radius: det DF, sigma(k) and q(r, k)."""

    radius: float
    detDF: float
    q_value: complex
    sigma: complex


def map_F_radius(r: float, p: CloakParams) -> float:
    """Radial profile of F: r -> (2-2*eps+r)/(2-eps) on [eps, 2], identity beyond."""
    if r < p.eps:
        raise ValidationError(f"map_F is defined for |x| >= eps = {p.eps}, got {r}")
    if r >= 2.0:
        return float(r)
    return (2.0 - 2.0 * p.eps + r) / (2.0 - p.eps)


def map_F(x: np.ndarray, p: CloakParams) -> np.ndarray:
    """Blow-up map F; radial and angle-preserving, identity outside B_2."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r < p.eps:
        raise ValidationError("map_F: point inside B_eps")
    if r >= 2.0:
        return x.copy()
    return map_F_radius(r, p) * x / r


def DF_matrix(x: np.ndarray, p: CloakParams) -> np.ndarray:
    """Jacobian of F at x (annulus branch; identity outside B_2)."""
    x = np.asarray(x, dtype=float)
    d = x.size
    r = float(np.linalg.norm(x))
    if r >= 2.0:
        return np.eye(d)
    if r < p.eps:
        return np.eye(d) / p.eps
    hat = x / r
    proj = np.eye(d) - np.outer(hat, hat)
    return (np.eye(d) + (2.0 - 2.0 * p.eps) / r * proj) / (2.0 - p.eps)


def det_DF(r: float, p: CloakParams) -> float:
    """det DF as a function of radius; positive on all three branches."""
    if r <= 0:
        raise ValidationError("det_DF needs r > 0")
    if r >= 2.0:
        return 1.0
    d = p.dim
    if r < p.eps:
        return p.eps ** (-d)
    return (2.0 - 2.0 * p.eps + r) ** (d - 1) / ((2.0 - p.eps) ** d * r ** (d - 1))


def sigma_poles(p: CloakParams) -> tuple[complex, complex]:
    """Both poles of sigma: kappa and -conj(kappa)."""
    return p.kappa, -np.conj(p.kappa)


def sigma(k: complex, p: CloakParams) -> complex:
    """Drude-Lorentz term 1/(k_eps^2 - k^2 - i k)."""
    k = complex(k)
    den = p.k_eps**2 - k * k - 1j * k
    if abs(den) < 1e-14:
        raise PoleError(
            f"sigma evaluated at a pole: k = {k:.6g}", poles=sigma_poles(p)
        )
    return 1.0 / den


def q_index(r: float, k: complex, p: CloakParams, sigma_value: complex | None = None) -> complex:
    """Transformed index: 1 outside B_2, 1 + sigma*detDF on the annulus.

    sigma_value overrides the physical sigma(k); passing 0 switches the
    dispersion off (validation mode).
    """
    if r <= 0:
        raise ValidationError("q_index needs r > 0")
    if r >= 2.0:
        return 1.0 + 0j
    s = sigma(k, p) if sigma_value is None else complex(sigma_value)
    return 1.0 + s * det_DF(r, p)


def material_sample(r: float, k: complex, p: CloakParams) -> MaterialSample:
    """Bundle (det DF, sigma, q) at one radius."""
    s = sigma(k, p)
    return MaterialSample(
        radius=float(r),
        detDF=det_DF(r, p),
        q_value=q_index(r, k, p),
        sigma=s,
    )


def push_forward(A, x: np.ndarray, p: CloakParams, inverse: bool = False):
    """Push-forward by F at the annulus point x.

    Matrix samples A (shape (d, d)): F_*A = DF A DF^T / det DF, valued at
    F(x).  Scalars: q / det DF.  With inverse=True the input sample lives
    at F(x) and (F^{-1})_* is applied, returning the value at x; the two
    compose to the identity.
    """
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if not (p.eps <= r <= 2.0):
        raise ValidationError("push_forward: x must lie in the closed annulus")
    DF = DF_matrix(x, p)
    det = det_DF(r, p)
    A = np.asarray(A)
    if A.ndim == 0:
        return A * det if inverse else A / det
    if inverse:
        DFi = np.linalg.inv(DF)
        return det * (DFi @ A @ DFi.T)
    return (DF @ A @ DF.T) / det


def m_eps_k(k: float, p: CloakParams) -> float:
    """Contrast magnitude |sigma(k)| / ((2-eps) eps^{d-1})."""
    if not k > 0:
        raise ValidationError("m_eps_k needs k > 0")
    return abs(sigma(k, p)) / ((2.0 - p.eps) * p.eps ** (p.dim - 1))


def a_factor(k: float, dim: int) -> float:
    """Frequency weight: 1 in 3d, min(1+|ln k|, k^{-1/4}) in 2d."""
    if not k > 0:
        raise ValidationError("a_factor needs k > 0")
    if dim == 3:
        return 1.0
    if dim == 2:
        return min(1.0 + abs(math.log(k)), k ** (-0.25))
    raise ValidationError(f"dim must be 2 or 3, got {dim}")


class RegionTag(enum.Enum):
    K_COMPACT = "K_compact"
    R_RIGHT = "R_right"
    L_LEFT = "L_left"
    U_VERTICAL = "U_vertical"
    G_OTHER = "G_other"
    REAL_AXIS = "RealAxis"
    IMAG_AXIS = "ImagAxis"


@dataclass(frozen=True)
class RegionLabel:
    """Classification of a complex wave number.

    tag is the region; axis membership is reported separately through the
    two flags (a point on an axis still receives its geometric region tag,
    matching the set definitions, which contain axis points).
    in_base_union is False for points covered only through the -conj(k)
    mirror of the right/left sets, never by the three sets as written.
    """

    tag: RegionTag
    on_real_axis: bool
    on_imag_axis: bool
    in_base_union: bool


def region_arc_re(b: float, k_eps: float) -> float:
    """Re k of the arc bounding K: sqrt(b^2 + b + k_eps^2) at Im k = b."""
    val = b * b + b + k_eps**2
    if val < 0:
        raise ValidationError("arc undefined: b^2 + b + k_eps^2 < 0")
    return math.sqrt(val)


def _in_R(a: float, b: float, k_eps: float) -> bool:
    """Right coercivity set: first quadrant, or right of both the cone and the arc."""
    if a > 0 and b > 0:
        return True
    return a > max(abs(b), region_arc_re(b, k_eps))


def _in_L(a: float, b: float, k_eps: float) -> bool:
    """Left coercivity set: third-quadrant part below -1/2, or left of cone and arc."""
    if a < 0 and b < -0.5:
        return True
    return a < -max(abs(b), region_arc_re(b, k_eps))


def _in_U(a: float, b: float, k_eps: float) -> bool:
    """Vertical cone |Im k| > |Re k|, truncated below at -(k_eps^2 + 1/2)/2."""
    return abs(b) > abs(a) and b > -0.5 * (k_eps**2 + 0.5)


def classify_k(k: complex, p: CloakParams) -> RegionLabel:
    """Place k relative to K and the coercivity regions.

    Requires sqrt(2)*k_eps > 1.  K is taken closed (boundary points,
    including kappa and the Im k = -1/2 segment, classify as K_compact).
    Precedence: K, then the vertical cone, then right/left (each the union
    of the literal set and the mirror of its partner), then bare axes.
    """
    if not math.sqrt(2.0) * p.k_eps > 1.0:
        raise ValidationError("classify_k requires sqrt(2) * k_eps > 1")
    k = complex(k)
    a, b = k.real, k.imag
    on_re = b == 0.0
    on_im = a == 0.0

    in_R = _in_R(a, b, p.k_eps)
    in_L = _in_L(a, b, p.k_eps)
    in_U = _in_U(a, b, p.k_eps)
    in_union = in_R or in_L or in_U

    def label(tag):
        return RegionLabel(tag, on_re, on_im, in_union)

    # closed K: -1/2 <= Im k <= 0 and |Im k| <= |Re k| <= arc(Im k)
    if -0.5 <= b <= 0.0 and abs(b) <= abs(a) <= region_arc_re(b, p.k_eps):
        return label(RegionTag.K_COMPACT)
    if in_U:
        return label(RegionTag.U_VERTICAL)
    # mirror symmetry k -> -conj(k) extends R/L coverage to the other half-plane
    if in_R or _in_L(-a, b, p.k_eps):
        return label(RegionTag.R_RIGHT)
    if in_L or _in_R(-a, b, p.k_eps):
        return label(RegionTag.L_LEFT)
    if on_re:
        return label(RegionTag.REAL_AXIS)
    if on_im:
        return label(RegionTag.IMAG_AXIS)
    return label(RegionTag.G_OTHER)
