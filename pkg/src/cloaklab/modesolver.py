"""Forward scattering solver for the transformed cloak problem.

After the change of variables that removes the anisotropy, the total field
u solves

    Delta u + k^2 q(r, k) u = 0   in R^d \\ B_eps,   u = 0 on S_eps,

with q = 1 + sigma(k) det DF(r) on the annulus eps < r < 2 and q = 1
outside B_2, and u - u^i outgoing.  Separation of variables gives, per
angular index, the radial equation (nu = n^2 in 2d, l(l+1) in 3d)

    R'' + (d-1)/r R' + (k^2 q(r) - nu/r^2) R = 0,

integrated adaptively through the dispersive annulus.  Two solutions are
kept per index: A launched at r = eps along the growing Frobenius
direction r^{+g}, and B launched at r = 2 along the decaying direction and
integrated inward (outward integration of the decaying branch would be
swamped by the growing one at large index; independence is certified by
the Wronskian, not by construction).  Abel's identity makes
W(r) * r^{d-1} constant, which is the stored independence certificate.

Per mode, the three interface conditions (match value and derivative of
u^i + u^s at r = 2, Dirichlet at r = eps) give a 3x3 system for the
annulus coefficients (alpha, beta) and the scattered coefficient s:

    alpha A(2)  + beta B(2)  - s H_n(2k)    = gamma J_n(2k)
    alpha A'(2) + beta B'(2) - s k H_n'(2k) = gamma k J_n'(2k)
    alpha A(eps) + beta B(eps)              = 0

(spherical j_l / h_l^(1) in 3d).  The scattered field outside is
sum s_n H_n(kr) e^{in theta} (2d) or sum s_l h_l(kr) P_l(cos theta) (3d),
with far field, in the convention u^s ~ e^{ikr} r^{-(d-1)/2} u_inf,

    u_inf(theta) = sqrt(2/(pi k)) e^{-i pi/4} sum s_n (-i)^n e^{in theta}   (2d)
    u_inf(theta) = (1/k) sum s_l (-i)^{l+1} P_l(cos theta)                  (3d)

cross-checked against the S_4 boundary-integral representation.  The
truncation rule N = ceil(k * max(R_eval, 2)) + 12 exploits the
super-exponential decay of |s_n| beyond the Bessel turning point; the
stored tail_estimate certifies it a posteriori.

Incidence: plane waves travel along the first axis in 2d (gamma_n = i^n)
and along the polar axis in 3d (gamma_l = i^l (2l+1)); Herglotz densities
and exterior point sources are reduced to coefficient lists by quadrature
and the addition theorem.  Mode solves are independent and may be run
concurrently; reductions are deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special as _sp
from scipy.integrate import quad, solve_ivp

from .cloak import CloakParams, sigma as _sigma
from .errors import IntegrationError, RangeError, ValidationError
from .specfun import cyl_bessel, sph_bessel

__all__ = [
    "RadialPair",
    "ModeSolution",
    "ScatteringSolution",
    "truncation_order",
    "radial_pair",
    "radial_pairs",
    "incident_coeffs",
    "herglotz_coeffs",
    "point_source_coeffs",
    "solve_mode",
    "solve_modes",
    "small_ball_scatter",
    "scattered_field",
    "scattered_field_polar",
    "transmitted_field_polar",
    "incident_field_polar",
    "l2_scattered_norm",
    "far_field",
    "far_field_boundary_integral",
    "plane_wave_l2_norm",
]


# ---------------------------------------------------------------------------
# batched radial integration
# ---------------------------------------------------------------------------

def _annulus_detDF(r: float, eps: float, d: int) -> float:
    return (2.0 - 2.0 * eps + r) ** (d - 1) / ((2.0 - eps) ** d * r ** (d - 1))


class _BatchSolution:
    """Dense, per-column renormalized solution of a batched radial system.

    Columns evolve with wildly different magnitudes (r^{+-g} across the
    annulus), so each column is rescaled to unit max-norm at segment
    boundaries and the cumulative log-scale is tracked separately;
    eval() reassembles true values.
    """

    def __init__(self, segments, log_scale_final, y_final, r_from, r_to):
        self.segments = segments  # list of (r0, r1, dense_or_None, log_scale_at_start)
        self.log_scale_final = log_scale_final
        self.y_final = y_final  # (2, M), renormalized
        self.r_from = r_from
        self.r_to = r_to

    def end_values(self) -> np.ndarray:
        """True (2, M) values at the integration end point."""
        vals = self.y_final * np.exp(self.log_scale_final)[None, :]
        if not np.all(np.isfinite(vals)):
            raise RangeError("radial solution overflowed when rescaled")
        return vals

    def eval(self, r: float) -> np.ndarray:
        """True (2, M) values at radius r (requires dense=True)."""
        lo, hi = min(self.r_from, self.r_to), max(self.r_from, self.r_to)
        if not (lo - 1e-12 <= r <= hi + 1e-12):
            raise ValidationError(f"radius {r} outside integration range [{lo}, {hi}]")
        for r0, r1, dense, log_scale in self.segments:
            if dense is None:
                raise ValidationError("dense evaluation requested on an endpoints-only solve")
            if min(r0, r1) - 1e-12 <= r <= max(r0, r1) + 1e-12:
                y = dense(r).reshape(2, -1)
                return y * np.exp(log_scale)[None, :]
        raise ValidationError(f"radius {r} not covered by any segment")


def _integrate_radial_batch(
    p: CloakParams,
    nu: np.ndarray,
    k2: np.ndarray,
    disp: np.ndarray,
    r_from: float,
    r_to: float,
    y0: np.ndarray,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    n_segments: int | None = None,
    dense: bool = False,
) -> _BatchSolution:
    """Integrate R'' + (d-1)/r R' + (k2 + disp*detDF(r) - nu/r^2) R = 0.

    nu, k2, disp are per-column arrays; y0 has shape (2, M).  Integration
    may run in either direction (outward growing branch, inward decaying
    branch); segments are geometric in r so the per-segment dynamic range
    stays bounded before each renormalization.
    """
    nu = np.asarray(nu, dtype=complex)
    k2 = np.asarray(k2, dtype=complex)
    disp = np.asarray(disp, dtype=complex)
    M = nu.size
    d = p.dim
    eps = p.eps

    if n_segments is None:
        g_max = float(np.max(np.sqrt(np.abs(nu))) if M else 0.0)
        span = abs(math.log(max(r_from, r_to) / min(r_from, r_to)))
        n_segments = int(max(4, min(48, math.ceil(g_max * span / math.log(1e4)))))

    dm1 = float(d - 1)

    def rhs(r, y_flat):
        y = y_flat.reshape(2, M)
        det = _annulus_detDF(r, eps, d)
        c0 = k2 + disp * det - nu / (r * r)
        dy0 = y[1]
        dy1 = -(dm1 / r) * y[1] - c0 * y[0]
        return np.concatenate([dy0, dy1])

    # geometric breakpoints from r_from to r_to
    ratio = (r_to / r_from) ** (1.0 / n_segments)
    breakpoints = [r_from * ratio**i for i in range(n_segments + 1)]
    breakpoints[-1] = r_to

    y = np.array(y0, dtype=complex)
    log_scale = np.zeros(M)
    scale0 = np.maximum(np.max(np.abs(y), axis=0), 1e-300)
    y /= scale0[None, :]
    log_scale += np.log(scale0)

    segments = []
    for r0, r1 in zip(breakpoints[:-1], breakpoints[1:]):
        sol = solve_ivp(
            rhs,
            (r0, r1),
            y.ravel(),
            method="DOP853",
            rtol=rtol,
            atol=atol,
            dense_output=dense,
        )
        if not sol.success:
            raise IntegrationError(
                f"radial integration failed on [{r0:.6g}, {r1:.6g}]: {sol.message}"
            )
        segments.append((r0, r1, sol.sol if dense else None, log_scale.copy()))
        y = sol.y[:, -1].reshape(2, M)
        s = np.maximum(np.max(np.abs(y), axis=0), 1e-300)
        y /= s[None, :]
        log_scale += np.log(s)

    return _BatchSolution(segments, log_scale, y, r_from, r_to)


# ---------------------------------------------------------------------------
# radial pairs
# ---------------------------------------------------------------------------

@dataclass
class RadialPair:
    """Two independent radial solutions for one angular index.

    Endpoint values carry true magnitudes; dense evaluation is available
    when requested.  wronskian_residual is the relative drift of
    W(r) r^{d-1} between the two interfaces (Abel's identity), and
    independence_margin the size of W relative to the solution scales.
    P2/Pp2 (optional) are the values at r = 2 of the Dirichlet-normalized
    solution P with P(eps) = 0, P'(eps) = 1.
    """

    order: int
    dim: int
    k: complex
    A_eps: complex
    Ap_eps: complex
    A2: complex
    Ap2: complex
    B_eps: complex
    Bp_eps: complex
    B2: complex
    Bp2: complex
    wronskian_residual: float
    independence_margin: float
    P2: complex | None = None
    Pp2: complex | None = None
    _dense_out: object = field(default=None, repr=False)
    _dense_in: object = field(default=None, repr=False)
    _cols: tuple = field(default=(0, 0), repr=False)

    def eval(self, r: float) -> tuple[complex, complex, complex, complex]:
        """(A, A', B, B') at radius r; requires a dense solve."""
        ja, jb = self._cols
        ya = self._dense_out.eval(r)[:, ja]
        yb = self._dense_in.eval(r)[:, jb]
        return complex(ya[0]), complex(ya[1]), complex(yb[0]), complex(yb[1])


def _growth_exponent(order: int, dim: int) -> tuple[float, float]:
    """(growing, decaying) Frobenius exponents at r -> 0 for the index."""
    if dim == 2:
        return float(order), float(order)
    return float(order), float(order + 1)


def radial_pairs(
    orders,
    k: complex,
    p: CloakParams,
    sigma_value: complex | None = None,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    dense: bool = False,
    with_dirichlet: bool = False,
) -> dict[int, RadialPair]:
    """Batched radial pairs for all requested nonnegative orders at one k.

    sigma_value overrides the physical dispersion (0 switches it off).
    with_dirichlet also integrates the solution with P(eps)=0, P'(eps)=1,
    used by the transmission-eigenvalue determinant.
    """
    orders = sorted(set(int(n) for n in orders))
    if any(n < 0 for n in orders):
        raise ValidationError("radial_pairs takes nonnegative orders")
    k = complex(k)
    s = _sigma(k, p) if sigma_value is None else complex(sigma_value)
    d = p.dim
    eps = p.eps

    nu_of = (lambda n: n * n) if d == 2 else (lambda n: n * (n + 1))
    M = len(orders)

    # outward batch: A (growing direction at eps), optionally P (Dirichlet)
    n_out = 2 * M if with_dirichlet else M
    nu_out = np.empty(n_out, dtype=complex)
    y0_out = np.zeros((2, n_out), dtype=complex)
    for j, n in enumerate(orders):
        nu_out[j] = nu_of(n)
        g, _ = _growth_exponent(n, d)
        y0_out[0, j] = 1.0
        y0_out[1, j] = g / eps
    if with_dirichlet:
        for j, n in enumerate(orders):
            nu_out[M + j] = nu_of(n)
            y0_out[0, M + j] = 0.0
            y0_out[1, M + j] = 1.0

    # inward batch: B along the decaying direction at r = 2
    nu_in = np.array([nu_of(n) for n in orders], dtype=complex)
    y0_in = np.zeros((2, M), dtype=complex)
    for j, n in enumerate(orders):
        _, gd = _growth_exponent(n, d)
        if gd == 0.0:
            y0_in[0, j] = 0.0
            y0_in[1, j] = 1.0
        else:
            y0_in[0, j] = 1.0
            y0_in[1, j] = -gd / 2.0

    k2 = k * k
    disp = k2 * s
    out = _integrate_radial_batch(
        p, nu_out, np.full(n_out, k2), np.full(n_out, disp),
        eps, 2.0, y0_out, rtol=rtol, atol=atol, dense=dense,
    )
    inw = _integrate_radial_batch(
        p, nu_in, np.full(M, k2), np.full(M, disp),
        2.0, eps, y0_in, rtol=rtol, atol=atol, dense=dense,
    )

    a_end = out.end_values()          # A at r = 2
    b_end = inw.end_values()          # B at r = eps

    pairs = {}
    for j, n in enumerate(orders):
        A_eps, Ap_eps = y0_out[0, j], y0_out[1, j]
        A2, Ap2 = a_end[0, j], a_end[1, j]
        B2, Bp2 = y0_in[0, j], y0_in[1, j]
        B_eps, Bp_eps = b_end[0, j], b_end[1, j]

        w_eps = (A_eps * Bp_eps - Ap_eps * B_eps) * eps ** (d - 1)
        w_2 = (A2 * Bp2 - Ap2 * B2) * 2.0 ** (d - 1)
        w_scale = max(abs(w_eps), abs(w_2))
        resid = abs(w_eps - w_2) / w_scale if w_scale > 0 else np.inf
        a_scale = max(abs(A2), abs(Ap2))
        b_scale = max(abs(B2), abs(Bp2))
        margin = abs(w_2) / (2.0 ** (d - 1) * a_scale * b_scale) if a_scale * b_scale > 0 else 0.0

        pr = RadialPair(
            order=n, dim=d, k=k,
            A_eps=complex(A_eps), Ap_eps=complex(Ap_eps),
            A2=complex(A2), Ap2=complex(Ap2),
            B_eps=complex(B_eps), Bp_eps=complex(Bp_eps),
            B2=complex(B2), Bp2=complex(Bp2),
            wronskian_residual=float(resid),
            independence_margin=float(margin),
            _dense_out=out if dense else None,
            _dense_in=inw if dense else None,
            _cols=(j, j),
        )
        if with_dirichlet:
            pr.P2 = complex(a_end[0, M + j])
            pr.Pp2 = complex(a_end[1, M + j])
        pairs[n] = pr
    return pairs


def radial_pair(n, k, p, sigma_value=None, rtol=1e-12, atol=1e-14, dense=True) -> RadialPair:
    """Single-order convenience wrapper around radial_pairs."""
    return radial_pairs([abs(int(n))], k, p, sigma_value=sigma_value,
                        rtol=rtol, atol=atol, dense=dense)[abs(int(n))]


class RadialSolution:
    """One radial solution launched from user initial data (validation aid:
    e.g. the Whittaker M branch propagated by the branch-free ODE path)."""

    def __init__(self, batch: _BatchSolution):
        self._batch = batch

    def eval(self, r: float) -> tuple[complex, complex]:
        y = self._batch.eval(float(r))
        return complex(y[0, 0]), complex(y[1, 0])


def radial_solution(
    n: int,
    k: complex,
    p: CloakParams,
    r_start: float,
    value: complex,
    derivative: complex,
    r_end: float | None = None,
    sigma_value: complex | None = None,
    rtol: float = 1e-13,
    atol: float = 1e-15,
) -> RadialSolution:
    """Integrate the modal radial ODE from (value, derivative) at r_start."""
    n = abs(int(n))
    k = complex(k)
    s = _sigma(k, p) if sigma_value is None else complex(sigma_value)
    nu = float(n * n) if p.dim == 2 else float(n * (n + 1))
    if r_end is None:
        r_end = 2.0 if r_start < 2.0 else p.eps
    y0 = np.array([[value], [derivative]], dtype=complex)
    batch = _integrate_radial_batch(
        p, np.array([nu]), np.array([k * k]), np.array([k * k * s]),
        float(r_start), float(r_end), y0, rtol=rtol, atol=atol, dense=True,
    )
    return RadialSolution(batch)


# ---------------------------------------------------------------------------
# incident fields
# ---------------------------------------------------------------------------

def truncation_order(k: float, r_eval: float = 2.0) -> int:
    """Mode truncation N = ceil(k * max(r_eval, 2)) + 12."""
    return int(math.ceil(k * max(r_eval, 2.0))) + 12


def incident_coeffs(k: float, N: int, dim: int) -> dict[int, complex]:
    """Plane-wave modal coefficients: i^n (2d, n in [-N, N]); i^l (2l+1) (3d)."""
    if dim == 2:
        return {n: 1j**n for n in range(-N, N + 1)}
    if dim == 3:
        return {l: (1j**l) * (2 * l + 1) for l in range(N + 1)}
    raise ValidationError("dim must be 2 or 3")


def herglotz_coeffs(density, k: float, N: int, dim: int, n_quad: int = 512) -> dict[int, complex]:
    """Coefficients of a Herglotz superposition of plane waves.

    2d: density(phi) over incidence angles, gamma_n = i^n Int g(phi) e^{-i n phi} dphi.
    3d (axisymmetric density over the polar angle of the incidence
    direction): gamma_l = i^l (2l+1) 2 pi Int g(t') P_l(cos t') sin t' dt'.
    """
    if dim == 2:
        phi = np.linspace(0.0, 2.0 * np.pi, n_quad, endpoint=False)
        g = np.asarray([density(ph) for ph in phi], dtype=complex)
        w = 2.0 * np.pi / n_quad
        return {
            n: (1j**n) * w * np.sum(g * np.exp(-1j * n * phi))
            for n in range(-N, N + 1)
        }
    if dim == 3:
        x, wq = np.polynomial.legendre.leggauss(n_quad)
        tp = np.arccos(x)
        g = np.asarray([density(t) for t in tp], dtype=complex)
        return {
            l: (1j**l) * (2 * l + 1) * 2.0 * np.pi
            * np.sum(wq * g * _sp.eval_legendre(l, x))
            for l in range(N + 1)
        }
    raise ValidationError("dim must be 2 or 3")


def point_source_coeffs(source: np.ndarray, k: float, N: int, dim: int) -> dict[int, complex]:
    """Expansion of Phi_k(., source) about the origin, |source| > 2.

    In 3d the source must sit on the positive polar axis to keep the
    azimuthal symmetry of the solver.
    """
    source = np.asarray(source, dtype=float)
    r0 = float(np.linalg.norm(source))
    if r0 <= 2.0:
        raise ValidationError("point source must lie outside B_2")
    if dim == 2:
        th0 = math.atan2(source[1], source[0])
        out = {}
        for n in range(-N, N + 1):
            H = cyl_bessel(n, k * r0).H1
            out[n] = 0.25j * H * np.exp(-1j * n * th0)
        return out
    if dim == 3:
        if abs(source[0]) > 1e-12 * r0 or abs(source[1]) > 1e-12 * r0 or source[2] <= 0:
            raise ValidationError("3d point source must lie on the positive polar axis")
        return {
            l: 1j * k * (2 * l + 1) * sph_bessel(l, k * r0).h1 / (4.0 * np.pi)
            for l in range(N + 1)
        }
    raise ValidationError("dim must be 2 or 3")


# ---------------------------------------------------------------------------
# mode solve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeSolution:
    """Interface-matched coefficients of one angular mode."""

    index: int
    gamma: complex
    alpha: complex
    beta: complex
    s: complex
    condition_number: float
    residual: float


@dataclass
class ScatteringSolution:
    """One full scattering solve.

    exterior_radius marks where the outgoing modal series becomes valid
    (2 for cloak solves, eps for the closed-form small-ball field).
    """

    params: CloakParams
    k: float
    dim: int
    modes: dict[int, ModeSolution]
    pairs: dict[int, RadialPair] | None
    N: int
    tail_estimate: float
    exterior_radius: float
    sigma_value: complex | None = None

    @property
    def s_max(self) -> float:
        return max((abs(m.s) for m in self.modes.values()), default=0.0)


def _exterior_fns(dim: int, index: int, z: complex):
    """(wave J/j, wave H/h, J', H') values used in the interface rows."""
    if dim == 2:
        c = cyl_bessel(index, z)
        return c.J, c.H1, c.Jp, c.H1p
    l = index
    s = sph_bessel(l, z)
    return s.j, s.h1, s.jp, s.h1p


def _solve_mode_system(pair: RadialPair, index: int, k: float, dim: int, gamma: complex) -> ModeSolution:
    if gamma == 0:
        return ModeSolution(index, 0j, 0j, 0j, 0j, 0.0, 0.0)
    J2, H2, Jp2, Hp2 = _exterior_fns(dim, index, 2.0 * k)
    Mmat = np.array(
        [
            [pair.A2, pair.B2, -H2],
            [pair.Ap2, pair.Bp2, -k * Hp2],
            [pair.A_eps, pair.B_eps, 0.0],
        ],
        dtype=complex,
    )
    rhs = gamma * np.array([J2, k * Jp2, 0.0], dtype=complex)

    col = np.max(np.abs(Mmat), axis=0)
    col[col == 0] = 1.0
    Meq = Mmat / col[None, :]
    row = np.max(np.abs(Meq), axis=1)
    row[row == 0] = 1.0
    Meq = Meq / row[:, None]
    try:
        v = np.linalg.solve(Meq, rhs / row)
    except np.linalg.LinAlgError as exc:
        raise IntegrationError(f"singular interface system for mode {index}: {exc}")
    x = v / col
    cond = float(np.linalg.cond(Meq))
    if cond > 1e12:
        warnings.warn(
            f"mode {index}: interface system condition number {cond:.3g} "
            "(near-resonance; real k carries no eigenvalue, but conditioning degrades)",
            stacklevel=2,
        )

    resid_vec = Mmat @ x - rhs
    scale = np.max(np.abs(Mmat), axis=1) * np.max(np.abs(x)) + abs(gamma)
    residual = float(np.max(np.abs(resid_vec) / scale))
    return ModeSolution(index, gamma, complex(x[0]), complex(x[1]), complex(x[2]), cond, residual)


def solve_mode(
    n: int,
    k: float,
    p: CloakParams,
    gamma: complex,
    sigma_value: complex | None = None,
    rtol: float = 1e-12,
) -> ModeSolution:
    """Solve one angular mode from scratch (builds its own radial pair)."""
    pair = radial_pairs([abs(int(n))], k, p, sigma_value=sigma_value,
                        rtol=rtol, dense=False)[abs(int(n))]
    return _solve_mode_system(pair, int(n), float(k), p.dim, complex(gamma))


def solve_modes(
    k: float,
    p: CloakParams,
    gammas: dict[int, complex] | None = None,
    N: int | None = None,
    sigma_value: complex | None = None,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    dense: bool = False,
    r_eval: float = 2.0,
) -> ScatteringSolution:
    """Full scattering solve at wave number k (plane wave by default)."""
    k = float(k)
    if not k > 0:
        raise ValidationError("solve_modes needs k > 0")
    if N is None:
        N = truncation_order(k, r_eval)
    if gammas is None:
        gammas = incident_coeffs(k, N, p.dim)

    indices = list(range(-N, N + 1)) if p.dim == 2 else list(range(N + 1))
    orders = sorted({abs(i) for i in indices})
    pairs = radial_pairs(orders, k, p, sigma_value=sigma_value,
                         rtol=rtol, atol=atol, dense=dense)

    modes = {}
    for i in indices:
        modes[i] = _solve_mode_system(pairs[abs(i)], i, k, p.dim,
                                      complex(gammas.get(i, 0.0)))

    smax = max((abs(m.s) for m in modes.values()), default=0.0)
    if smax > 0:
        last = [abs(modes[i].s) for i in indices if abs(i) >= N - 1]
        tail = max(last) / smax if last else 0.0
    else:
        tail = 0.0

    return ScatteringSolution(
        params=p, k=k, dim=p.dim, modes=modes, pairs=pairs, N=N,
        tail_estimate=float(tail), exterior_radius=2.0, sigma_value=sigma_value,
    )


def small_ball_scatter(
    k: float,
    p: CloakParams,
    gammas: dict[int, complex] | None = None,
    N: int | None = None,
) -> ScatteringSolution:
    """Closed-form scattered field of the bare soft ball B_eps.

    Scattered coefficients are -gamma_n J_n(k eps)/H_n^(1)(k eps) in 2d and
    -gamma_l j_l(k eps)/h_l^(1)(k eps) in 3d; the series is valid for all
    r > eps.
    """
    k = float(k)
    if not k > 0:
        raise ValidationError("small_ball_scatter needs k > 0")
    if N is None:
        N = truncation_order(k, 2.0)
    if gammas is None:
        gammas = incident_coeffs(k, N, p.dim)
    indices = list(range(-N, N + 1)) if p.dim == 2 else list(range(N + 1))

    modes = {}
    for i in indices:
        g = complex(gammas.get(i, 0.0))
        if p.dim == 2:
            c = cyl_bessel(i, k * p.eps)
            s = -g * c.J / c.H1
        else:
            c = sph_bessel(i, k * p.eps)
            s = -g * c.j / c.h1
        modes[i] = ModeSolution(i, g, 0j, 0j, complex(s), 0.0, 0.0)

    smax = max((abs(m.s) for m in modes.values()), default=0.0)
    tail = (
        max([abs(modes[i].s) for i in indices if abs(i) >= N - 1]) / smax
        if smax > 0 else 0.0
    )
    return ScatteringSolution(
        params=p, k=k, dim=p.dim, modes=modes, pairs=None, N=N,
        tail_estimate=float(tail), exterior_radius=p.eps,
    )


# ---------------------------------------------------------------------------
# field evaluation
# ---------------------------------------------------------------------------

def _angular_basis(sol: ScatteringSolution, index: int, theta):
    if sol.dim == 2:
        return np.exp(1j * index * np.asarray(theta, dtype=float))
    return _sp.eval_legendre(index, np.cos(np.asarray(theta, dtype=float)))


def scattered_field_polar(sol: ScatteringSolution, r: float, theta) -> np.ndarray:
    """Outgoing modal series at radius r (> exterior_radius), angles theta."""
    if r <= sol.exterior_radius:
        raise ValidationError("scattered series valid only outside the matching radius")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    total = np.zeros_like(theta, dtype=complex)
    for i, m in sol.modes.items():
        if m.s == 0:
            continue
        if sol.dim == 2:
            rad = cyl_bessel(i, sol.k * r).H1
        else:
            rad = sph_bessel(i, sol.k * r).h1
        total += m.s * rad * _angular_basis(sol, i, theta)
    return total


def transmitted_field_polar(sol: ScatteringSolution, r: float, theta) -> np.ndarray:
    """Transformed total field u^t inside the annulus (needs dense pairs)."""
    p = sol.params
    if not (p.eps < r <= 2.0):
        raise ValidationError("transmitted field lives on eps < r <= 2")
    if sol.pairs is None:
        raise ValidationError("no annulus data on this solution")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    total = np.zeros_like(theta, dtype=complex)
    for i, m in sol.modes.items():
        if m.alpha == 0 and m.beta == 0:
            continue
        A, _, B, _ = sol.pairs[abs(i)].eval(r)
        total += (m.alpha * A + m.beta * B) * _angular_basis(sol, i, theta)
    return total


def incident_field_polar(sol: ScatteringSolution, r: float, theta) -> np.ndarray:
    """Incident field from the stored modal coefficients."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    total = np.zeros_like(theta, dtype=complex)
    for i, m in sol.modes.items():
        if m.gamma == 0:
            continue
        if sol.dim == 2:
            rad = cyl_bessel(i, sol.k * r, hankel=False).J
        else:
            rad = sph_bessel(i, sol.k * r, hankel=False).j
        total += m.gamma * rad * _angular_basis(sol, i, theta)
    return total


def scattered_field(sol: ScatteringSolution, x) -> complex:
    """Point evaluation: scattered field outside, transformed total field
    u^t on the annulus (eps, 2]."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r <= sol.params.eps:
        raise ValidationError("evaluation at |x| <= eps")
    if sol.dim == 2:
        theta = math.atan2(x[1], x[0])
    else:
        theta = math.acos(np.clip(x[2] / r, -1.0, 1.0))
    if r > sol.exterior_radius:
        return complex(scattered_field_polar(sol, r, theta)[0])
    return complex(transmitted_field_polar(sol, r, theta)[0])


# ---------------------------------------------------------------------------
# norms and far field
# ---------------------------------------------------------------------------

def l2_scattered_norm(sol: ScatteringSolution, R1: float, R2: float) -> float:
    """L^2 norm of the scattered field over the shell R1 < r < R2 (Parseval).

    2d: (2 pi sum_n |s_n|^2 Int |H_n(kr)|^2 r dr)^{1/2}; 3d uses the
    spherical weights 4 pi/(2l+1) and r^2 dr.  R1 must not cut into the
    region where the outgoing series is invalid.
    """
    if not (sol.exterior_radius <= R1 < R2):
        raise ValidationError(
            f"need exterior_radius <= R1 < R2 (exterior_radius = {sol.exterior_radius})"
        )
    k = sol.k
    total = 0.0
    for i, m in sol.modes.items():
        if m.s == 0:
            continue
        if sol.dim == 2:
            fn = lambda r: abs(cyl_bessel(i, k * r).H1) ** 2 * r
            weight = 2.0 * np.pi
        else:
            fn = lambda r: abs(sph_bessel(i, k * r).h1) ** 2 * r * r
            weight = 4.0 * np.pi / (2 * i + 1)
        val, _ = quad(fn, R1, R2, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += weight * abs(m.s) ** 2 * val
    return math.sqrt(total)


def far_field(sol: ScatteringSolution, theta) -> np.ndarray:
    """Far field pattern in the convention u^s ~ e^{ikr} r^{-(d-1)/2} u_inf."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    k = sol.k
    total = np.zeros_like(theta, dtype=complex)
    for i, m in sol.modes.items():
        if m.s == 0:
            continue
        if sol.dim == 2:
            total += m.s * (-1j) ** i * np.exp(1j * i * theta)
        else:
            total += m.s * (-1j) ** (i + 1) * _sp.eval_legendre(i, np.cos(theta))
    if sol.dim == 2:
        return np.sqrt(2.0 / (np.pi * k)) * np.exp(-0.25j * np.pi) * total
    return total / k


def far_field_boundary_integral(
    sol: ScatteringSolution,
    theta,
    radius: float = 4.0,
    n_quad: int = 512,
) -> np.ndarray:
    """Far field via the boundary representation over the sphere S_radius.

    u_inf = I * e^{i pi/4}/sqrt(8 pi k) (2d) or I/(4 pi) (3d), with
    I = Int_{S_R} (u^s d_nu e^{-ik x^.y} - d_nu u^s e^{-ik x^.y}) ds(y).
    Quadrature is spectral (trapezoid on the circle, Gauss-Legendre x
    trapezoid on the sphere).
    """
    if radius <= max(2.0, sol.exterior_radius):
        raise ValidationError("integration sphere must enclose B_2")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    k, R = sol.k, radius

    if sol.dim == 2:
        phi = np.linspace(0.0, 2.0 * np.pi, n_quad, endpoint=False)
        us = scattered_field_polar(sol, R, phi)
        dus = np.zeros_like(us)
        for i, m in sol.modes.items():
            if m.s == 0:
                continue
            dus += m.s * k * cyl_bessel(i, k * R).H1p * np.exp(1j * i * phi)
        w = 2.0 * np.pi / n_quad * R
        out = np.empty_like(theta, dtype=complex)
        for j, th in enumerate(theta):
            c = np.cos(phi - th)
            e = np.exp(-1j * k * R * c)
            integrand = us * (-1j * k * c) * e - dus * e
            out[j] = np.sum(integrand) * w
        return out * np.exp(0.25j * np.pi) / np.sqrt(8.0 * np.pi * k)

    # 3d: Gauss-Legendre in cos(theta'), trapezoid in phi'
    n_mu = max(48, n_quad // 8)
    n_phi = max(96, n_quad // 4)
    mu, wmu = np.polynomial.legendre.leggauss(n_mu)
    phip = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    wphi = 2.0 * np.pi / n_phi
    sth = np.sqrt(1.0 - mu**2)

    us = np.zeros(n_mu, dtype=complex)
    dus = np.zeros(n_mu, dtype=complex)
    for i, m in sol.modes.items():
        if m.s == 0:
            continue
        sb = sph_bessel(i, k * R)
        P = _sp.eval_legendre(i, mu)
        us += m.s * sb.h1 * P
        dus += m.s * k * sb.h1p * P

    out = np.empty_like(theta, dtype=complex)
    for j, th in enumerate(theta):
        xs, xz = math.sin(th), math.cos(th)
        dot = xs * sth[:, None] * np.cos(phip)[None, :] + xz * mu[:, None]
        e = np.exp(-1j * k * R * dot)
        integrand = us[:, None] * (-1j * k * dot) * e - dus[:, None] * e
        out[j] = np.sum(wmu[:, None] * integrand) * wphi * R * R
    return out / (4.0 * np.pi)


def plane_wave_l2_norm(R: float, dim: int) -> float:
    """||u^i||_{L^2(B_R)} for a plane wave: |B_R|^{1/2} since |u^i| = 1."""
    if dim == 2:
        return math.sqrt(np.pi) * R
    return math.sqrt(4.0 * np.pi / 3.0) * R**1.5
