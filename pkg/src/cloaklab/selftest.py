"""Fast invariant suite behind the `selftest` CLI subcommand.

Each check is a pure function returning (ok, detail); the runner prints
one PASS/FAIL line per check.  These are smoke-level versions of the
package invariants; the full tolerances live in the pytest suite.
"""

from __future__ import annotations

import numpy as np

from . import cloak, lippmann, modesolver, specfun, teig


def _rng():
    return np.random.default_rng(20240811)


def _capped_phase(mag, rng, cap=6.0):
    # Wronskian products cancel at scale e^{2 |Im z|}; stay verifiable
    import math

    pc = math.asin(min(1.0, cap / mag)) if mag > cap else math.pi * 0.9
    return rng.uniform(-pc, pc)


def check_cyl_wronskian():
    rng = _rng()
    worst = 0.0
    mags = np.logspace(-5, 2, 40)
    for mag in mags:
        z = mag * np.exp(1j * _capped_phase(mag, rng))
        for n in (0, 1, 5):
            worst = max(worst, specfun.cyl_wronskian_residual(specfun.cyl_bessel(n, z)))
    return worst < 1e-10, f"max residual {worst:.2e}"


def check_sph_wronskian():
    rng = _rng()
    worst = 0.0
    for mag in np.logspace(-4, 2, 40):
        z = mag * np.exp(1j * _capped_phase(mag, rng))
        for l in (0, 2, 7):
            worst = max(worst, specfun.sph_wronskian_residual(specfun.sph_bessel(l, z)))
    return worst < 1e-10, f"max residual {worst:.2e}"


def check_bessel_recurrence():
    worst = 0.0
    for z in (0.7 + 0.4j, 3.0, 9.0 - 2.0j):
        for n in range(1, 21):
            lhs = specfun.cyl_bessel(n - 1, z).J + specfun.cyl_bessel(n + 1, z).J
            rhs = 2.0 * n / z * specfun.cyl_bessel(n, z).J
            scale = max(abs(lhs), abs(rhs), 1e-280)
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst < 1e-10, f"max residual {worst:.2e}"


def check_hankel_log_asymptote():
    worst = 0.0
    for t in (1e-4, 1e-6):
        h = specfun.cyl_bessel(0, t).H1
        ref = (2.0 / (1j * np.pi)) * np.log(1.0 / t)
        worst = max(worst, abs(abs(h / ref) - 1.0))
    return worst < 0.05, f"max deviation {worst:.3f}"


def check_whittaker_ode():
    lam, mu = -0.0196 + 0.063j, 0
    worst = 0.0
    for z in (0.8 + 0.3j, 1.5 - 0.7j):
        h = 1e-2
        f = [specfun.whittaker_m(lam, mu, z + s * h) for s in (-2, -1, 0, 1, 2)]
        d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
        resid = d2 + (-0.25 + lam / z + (0.25 - mu * mu) / z**2) * f[2]
        worst = max(worst, abs(resid) / max(abs(d2), 1e-30))
    return worst < 1e-6, f"max ODE residual {worst:.2e}"


def check_map_continuity():
    p = cloak.CloakParams(eps=0.37, k_eps=2.0, dim=2)
    a = abs(cloak.map_F_radius(p.eps, p) - 1.0)
    b = abs(cloak.map_F_radius(2.0 - 1e-14, p) - 2.0)
    rs = np.linspace(p.eps, 1.999, 200)
    mono = np.all(np.diff([cloak.map_F_radius(r, p) for r in rs]) > 0)
    ok = a < 1e-14 and b < 1e-12 and mono
    return ok, f"|F(eps)-1| = {a:.1e}, |F(2-)-2| = {b:.1e}, monotone = {mono}"


def check_det_DF():
    worst = 0.0
    for dim in (2, 3):
        p = cloak.CloakParams(eps=0.3, k_eps=2.0, dim=dim)
        for r in np.linspace(0.31, 1.99, 100):
            x = np.zeros(dim)
            x[0] = r
            direct = np.linalg.det(cloak.DF_matrix(x, p))
            worst = max(worst, abs(direct - cloak.det_DF(r, p)) / abs(direct))
    return worst < 1e-12, f"max residual {worst:.2e}"


def check_sigma_symmetry():
    rng = _rng()
    p = cloak.CloakParams(eps=0.5, k_eps=2.0, dim=2)
    worst = 0.0
    for _ in range(100):
        k = complex(rng.uniform(-4, 4), rng.uniform(-4, 4))
        worst = max(worst, abs(np.conj(cloak.sigma(k, p)) - cloak.sigma(-np.conj(k), p)))
    return worst == 0.0, f"max |conj(sigma(k)) - sigma(-conj k)| = {worst:.2e}"


def check_sigma_pole():
    p = cloak.CloakParams(eps=0.5, k_eps=2.0, dim=2)
    try:
        cloak.sigma(p.kappa, p)
        return False, "no pole error at kappa"
    except Exception as exc:
        return "pole" in str(exc).lower() or hasattr(exc, "poles"), str(exc)[:60]


def check_push_forward_roundtrip():
    rng = _rng()
    worst = 0.0
    for dim in (2, 3):
        p = cloak.CloakParams(eps=0.4, k_eps=1.5, dim=dim)
        for _ in range(10):
            v = rng.normal(size=dim)
            x = v / np.linalg.norm(v) * rng.uniform(p.eps + 0.01, 1.99)
            A = rng.normal(size=(dim, dim))
            back = cloak.push_forward(cloak.push_forward(A, x, p), x, p, inverse=True)
            worst = max(worst, np.max(np.abs(back - A)) / np.max(np.abs(A)))
    return worst < 1e-12, f"max roundtrip residual {worst:.2e}"


def check_m_eps_identity():
    p = cloak.CloakParams(eps=0.5, k_eps=2.0, dim=3)
    lhs = cloak.m_eps_k(1.0, p) * (2 - p.eps) * p.eps ** (p.dim - 1)
    rhs = abs(cloak.sigma(1.0, p))
    return abs(lhs - rhs) < 1e-15, f"identity residual {abs(lhs - rhs):.2e}"


def check_classifier():
    p = cloak.CloakParams(eps=0.5, k_eps=2.0, dim=2)
    t1 = cloak.classify_k(p.kappa, p).tag is cloak.RegionTag.K_COMPACT
    t2 = cloak.classify_k(3.0 + 0j, p).tag is cloak.RegionTag.R_RIGHT
    t3 = cloak.classify_k(2j, p).tag is cloak.RegionTag.U_VERTICAL
    rng = _rng()
    mirror_ok = True
    swap = {
        cloak.RegionTag.R_RIGHT: cloak.RegionTag.L_LEFT,
        cloak.RegionTag.L_LEFT: cloak.RegionTag.R_RIGHT,
    }
    for _ in range(50):
        k = complex(rng.uniform(-4, 4), rng.uniform(-4, 2))
        a = cloak.classify_k(k, p).tag
        b = cloak.classify_k(-np.conj(k), p).tag
        mirror_ok &= b is swap.get(a, a)
    return t1 and t2 and t3 and mirror_ok, f"examples {t1},{t2},{t3}, mirror {mirror_ok}"


def check_incident_reconstruction():
    k = 2.0
    worst = 0.0
    g2 = modesolver.incident_coeffs(k, 40, 2)
    r, th = 1.0, np.pi / 3
    val = sum(
        g2[n] * specfun.cyl_bessel(n, k * r).J * np.exp(1j * n * th)
        for n in g2
    )
    worst = max(worst, abs(val - np.exp(1j * k * r * np.cos(th))))
    g3 = modesolver.incident_coeffs(k, 40, 3)
    val3 = sum(
        g3[l] * specfun.sph_bessel(l, k * r).j
        * np.polynomial.legendre.legval(np.cos(th), [0] * l + [1])
        for l in g3
    )
    worst = max(worst, abs(val3 - np.exp(1j * k * r * np.cos(th))))
    return worst < 1e-10, f"max reconstruction error {worst:.2e}"


def check_soft_ball_reduction():
    p = cloak.CloakParams(eps=0.5, k_eps=2.0, dim=2)
    k = 1.0
    sol = modesolver.solve_modes(k, p, sigma_value=0.0, rtol=1e-12)
    worst = 0.0
    smax = sol.s_max
    for n, m in sol.modes.items():
        c = specfun.cyl_bessel(n, k * p.eps)
        ref = -m.gamma * c.J / c.H1
        worst = max(worst, abs(m.s - ref) / smax)
    return worst < 1e-10, f"max coefficient residual {worst:.2e}"


def check_mode_gamma_zero():
    p = cloak.CloakParams(eps=0.5, k_eps=2.0, dim=2)
    m = modesolver.solve_mode(3, 1.0, p, 0.0)
    ok = m.alpha == 0 and m.beta == 0 and m.s == 0
    return ok, "homogeneous mode is trivial"


def check_radial_abel():
    p = cloak.CloakParams(eps=0.5, k_eps=2.0, dim=2)
    pair = modesolver.radial_pair(4, 1.0, p, rtol=1e-12)
    return pair.wronskian_residual < 1e-8, f"Abel drift {pair.wronskian_residual:.2e}"


def check_psi_boundary():
    worst = 0.0
    for dim in (2, 3):
        p = cloak.CloakParams(eps=0.3, k_eps=2.0, dim=dim)
        k = 1.3
        x = np.zeros(dim)
        x[0] = p.eps
        y = np.zeros(dim)
        y[1] = 1.1
        g = lippmann.green_eval(x, y, k, p)
        worst = max(worst, abs(g.phi0) / abs(g.phi))
    return worst < 1e-8, f"max Dirichlet residual {worst:.2e}"


def check_psi_reciprocity():
    p = cloak.CloakParams(eps=0.3, k_eps=2.0, dim=2)
    x = np.array([0.9, 0.3])
    y = np.array([-0.5, 1.0])
    a = lippmann.psi_k(x, y, 1.1, p)
    b = lippmann.psi_k(y, x, 1.1, p)
    return abs(a - b) <= 1e-12 * abs(a), f"|psi(x,y)-psi(y,x)| = {abs(a - b):.2e}"


def check_T_zero_contrast():
    p = cloak.CloakParams(eps=0.25, k_eps=2.0, dim=2)
    op = lippmann.ModalVolumeOperator(1.0, p, n_modes=3, n_nodes=48, sigma_value=0.0)
    u = np.sin(op.r)
    worst = max(float(np.max(np.abs(op.apply_mode(n, u)))) for n in range(4))
    return worst == 0.0, f"max |Tu| with q==1: {worst:.2e}"


def check_T_linearity():
    p = cloak.CloakParams(eps=0.25, k_eps=2.0, dim=2)
    op = lippmann.ModalVolumeOperator(1.0, p, n_modes=2, n_nodes=48)
    rng = _rng()
    u = rng.normal(size=48) + 1j * rng.normal(size=48)
    v = rng.normal(size=48) + 1j * rng.normal(size=48)
    lhs = op.apply_mode(1, 2.0 * u + 3j * v)
    rhs = 2.0 * op.apply_mode(1, u) + 3j * op.apply_mode(1, v)
    err = float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs)))
    return err < 1e-13, f"linearity residual {err:.2e}"


def check_far_field_paths():
    p = cloak.CloakParams(eps=0.3, k_eps=2.0, dim=2)
    sol = modesolver.solve_modes(1.0, p, rtol=1e-11)
    th = np.linspace(0, 2 * np.pi, 7)
    a = modesolver.far_field(sol, th)
    b = modesolver.far_field_boundary_integral(sol, th)
    err = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    return err < 1e-8, f"modal vs boundary-integral {err:.2e}"


def check_det_f_symmetry():
    p = cloak.CloakParams(eps=0.5, k_eps=2.0, dim=2)
    k = 1.4 - 0.3j
    a = abs(teig.det_f(2, k, p).f)
    b = abs(teig.det_f(2, -np.conj(k), p).f)
    err = abs(a - b) / max(a, b)
    return err < 1e-8, f"|f(n,k)| vs |f(n,-conj k)| residual {err:.2e}"


ALL_CHECKS = [
    ("cyl-wronskian", check_cyl_wronskian),
    ("sph-wronskian", check_sph_wronskian),
    ("bessel-recurrence", check_bessel_recurrence),
    ("hankel-log-asymptote", check_hankel_log_asymptote),
    ("whittaker-ode", check_whittaker_ode),
    ("map-continuity", check_map_continuity),
    ("det-DF-vs-jacobian", check_det_DF),
    ("sigma-symmetry", check_sigma_symmetry),
    ("sigma-pole-error", check_sigma_pole),
    ("push-forward-roundtrip", check_push_forward_roundtrip),
    ("m-eps-identity", check_m_eps_identity),
    ("region-classifier", check_classifier),
    ("incident-reconstruction", check_incident_reconstruction),
    ("soft-ball-reduction", check_soft_ball_reduction),
    ("gamma-zero-mode", check_mode_gamma_zero),
    ("radial-abel", check_radial_abel),
    ("psi-boundary", check_psi_boundary),
    ("psi-reciprocity", check_psi_reciprocity),
    ("T-zero-contrast", check_T_zero_contrast),
    ("T-linearity", check_T_linearity),
    ("far-field-paths", check_far_field_paths),
    ("det-f-symmetry", check_det_f_symmetry),
]


def run_selftest(out=print) -> bool:
    """Run every check; returns True when all pass."""
    all_ok = True
    for name, fn in ALL_CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"exception: {exc!r}"
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name:28s} {detail}")
    return all_ok
