"""Geometry, materials and the spectral-region classifier."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloaklab.cloak import (
    CloakParams,
    DF_matrix,
    RegionTag,
    a_factor,
    classify_k,
    det_DF,
    m_eps_k,
    map_F,
    map_F_radius,
    material_sample,
    push_forward,
    q_index,
    region_arc_re,
    sigma,
)
from cloaklab.errors import PoleError, ValidationError

P2 = CloakParams(eps=0.5, k_eps=2.0, dim=2)
P3 = CloakParams(eps=0.5, k_eps=2.0, dim=3)


def test_params_validation():
    with pytest.raises(ValidationError):
        CloakParams(eps=1.5, k_eps=2.0, dim=2)
    with pytest.raises(ValidationError):
        CloakParams(eps=0.5, k_eps=0.4, dim=2)
    with pytest.raises(ValidationError):
        CloakParams(eps=0.5, k_eps=2.0, dim=4)


def test_map_examples():
    assert map_F_radius(P2.eps, P2) == pytest.approx(1.0, abs=1e-15)
    x = np.array([1.3, -1.6])
    assert np.allclose(map_F(x / np.linalg.norm(x) * 2.0, P2),
                       x / np.linalg.norm(x) * 2.0)
    assert map_F_radius(1.25, P2) == pytest.approx(1.5, rel=1e-15)
    with pytest.raises(ValidationError):
        map_F(np.array([0.1, 0.0]), P2)


def test_map_monotone_and_continuous():
    rs = np.linspace(P2.eps, 3.0, 500)
    vals = [map_F_radius(r, P2) for r in rs]
    assert np.all(np.diff(vals) > 0)
    assert abs(map_F_radius(2.0 - 1e-13, P2) - 2.0) < 1e-12
    assert map_F_radius(2.0, P2) == 2.0


def test_det_DF_branches():
    assert det_DF(3.0, P2) == 1.0
    assert det_DF(0.2, P3) == pytest.approx(8.0, rel=1e-15)          # 1/eps^3
    assert det_DF(1.0, P2) == pytest.approx(2.0 / 2.25, rel=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
def test_det_DF_matches_jacobian(dim):
    p = CloakParams(eps=0.31, k_eps=2.0, dim=dim)
    rng = np.random.default_rng(3)
    for r in np.linspace(p.eps * 1.0001, 1.999, 1000):
        v = rng.normal(size=dim)
        x = v / np.linalg.norm(v) * r
        direct = np.linalg.det(DF_matrix(x, p))
        assert direct > 0
        assert abs(direct - det_DF(r, p)) / direct < 1e-12


def test_sigma_examples():
    assert sigma(0.0, P2) == pytest.approx(1.0 / P2.k_eps**2)
    val = sigma(1.0, P2)
    assert val == pytest.approx(0.3 + 0.1j, rel=1e-15)
    with pytest.raises(PoleError):
        sigma(P2.kappa, P2)
    with pytest.raises(PoleError):
        sigma(-np.conj(P2.kappa), P2)


@settings(max_examples=200, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4))
def test_sigma_symmetry_exact(a, b):
    k = complex(a, b)
    try:
        lhs = np.conj(sigma(k, P2))
        rhs = sigma(-np.conj(k), P2)
    except PoleError:
        return
    assert lhs == rhs


def test_sigma_symmetry_bulk():
    rng = np.random.default_rng(1009)
    for _ in range(1000):
        k = complex(rng.uniform(-5, 5), rng.uniform(-5, 5))
        assert np.conj(sigma(k, P2)) == sigma(-np.conj(k), P2)


def test_q_index_examples():
    assert q_index(2.5, 1.0, P2) == 1.0
    assert q_index(1.0, 1.0, P2, sigma_value=0.0) == 1.0
    got = q_index(1.0, 1.0, P2)
    assert got == pytest.approx(1.0 + (0.3 + 0.1j) * (2.0 / 2.25), rel=1e-14)
    ms = material_sample(1.0, 1.0, P2)
    assert ms.q_value == pytest.approx(1.0 + ms.sigma * ms.detDF, rel=1e-15)


@pytest.mark.parametrize("dim", [2, 3])
def test_push_forward_roundtrip(dim):
    p = CloakParams(eps=0.4, k_eps=1.7, dim=dim)
    rng = np.random.default_rng(17)
    for _ in range(20):
        v = rng.normal(size=dim)
        x = v / np.linalg.norm(v) * rng.uniform(p.eps, 2.0)
        A = rng.normal(size=(dim, dim))
        back = push_forward(push_forward(A, x, p), x, p, inverse=True)
        assert np.max(np.abs(back - A)) / np.max(np.abs(A)) < 1e-12
        q = rng.normal()
        back_q = push_forward(push_forward(np.asarray(q), x, p), x, p, inverse=True)
        assert abs(back_q - q) < 1e-12 * abs(q)


def test_push_forward_identity_eigenvalues():
    # F_* I in 2d: eigenvalues 1/(det (2-eps)^2) and (1+(2-2eps)/r)^2/(det (2-eps)^2)
    r = 1.3
    x = np.array([r, 0.0])
    A = push_forward(np.eye(2), x, P2)
    det = det_DF(r, P2)
    evs = np.sort(np.linalg.eigvalsh(A))
    expect = np.sort(
        [1.0 / (det * (2 - P2.eps) ** 2),
         (1.0 + (2 - 2 * P2.eps) / r) ** 2 / (det * (2 - P2.eps) ** 2)]
    )
    assert np.allclose(evs, expect, rtol=1e-12)


def test_push_forward_scalar_example():
    x = np.array([1.0, 0.0])
    got = push_forward(np.asarray(1.0), x, P2)
    assert got == pytest.approx(1.125, rel=1e-14)


def test_m_eps_k():
    got = m_eps_k(1.0, P3)
    assert got == pytest.approx((1.0 / math.sqrt(10.0)) / 0.375, rel=1e-12)
    # identity M * (2-eps) eps^{d-1} = |sigma|
    for p in (P2, P3):
        for k in (0.3, 1.0, 4.0):
            assert m_eps_k(k, p) * (2 - p.eps) * p.eps ** (p.dim - 1) == pytest.approx(
                abs(sigma(k, p)), rel=1e-14
            )
    # k_eps -> infinity: M -> 0
    huge = CloakParams(eps=0.5, k_eps=1e6, dim=3)
    assert m_eps_k(1.0, huge) < 1e-11


def test_m_eps_broadband_order():
    # under k_eps^2 = eps^{-3} (d=3), max over the band of M is O(eps)
    for eps in (0.1, 0.05, 0.025, 0.0125):
        p = CloakParams(eps=eps, k_eps=math.sqrt(eps**-3), dim=3)
        worst = max(m_eps_k(k, p) for k in np.linspace(0.5, 2.0, 16))
        assert worst <= 2.0 * eps


def test_a_factor():
    assert a_factor(0.37, 3) == 1.0
    assert a_factor(1.0, 2) == 1.0
    assert a_factor(math.e, 2) == pytest.approx(math.e**-0.25, rel=1e-14)


# --- region classifier -------------------------------------------------------

def test_classify_examples():
    assert classify_k(P2.kappa, P2).tag is RegionTag.K_COMPACT
    lab3 = classify_k(3.0 + 0j, P2)
    assert lab3.tag is RegionTag.R_RIGHT and lab3.on_real_axis
    lab2i = classify_k(2j, P2)
    assert lab2i.tag is RegionTag.U_VERTICAL and lab2i.on_imag_axis


def test_classify_boundary_conventions():
    # the Im k = -1/2 segment between the cone and the arcs is closed into K
    assert classify_k(complex(1.0, -0.5), P2).tag is RegionTag.K_COMPACT
    # arc point at Im k = -0.2
    b = -0.2
    assert classify_k(complex(region_arc_re(b, 2.0), b), P2).tag is RegionTag.K_COMPACT
    # deep negative imaginary axis beyond the truncated cone
    deep = complex(0.0, -0.5 * (P2.k_eps**2 + 0.5) - 0.1)
    assert classify_k(deep, P2).tag is RegionTag.IMAG_AXIS


def test_classify_requires_sqrt2_keps():
    small = CloakParams(eps=0.5, k_eps=0.6, dim=2)
    with pytest.raises(ValidationError):
        classify_k(1.0 + 0j, small)


@settings(max_examples=300, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 2))
def test_classify_mirror_labels(a, b):
    swap = {RegionTag.R_RIGHT: RegionTag.L_LEFT, RegionTag.L_LEFT: RegionTag.R_RIGHT}
    la = classify_k(complex(a, b), P2)
    lb = classify_k(complex(-a, b), P2)
    assert lb.tag is swap.get(la.tag, la.tag)


def test_classify_honesty_flag():
    # second-quadrant wedge points are covered only through the mirror sets
    lab = classify_k(complex(-1.0, 0.5), P2)
    assert lab.tag is RegionTag.L_LEFT
    assert not lab.in_base_union
    lab_r = classify_k(complex(1.0, 0.5), P2)
    assert lab_r.tag is RegionTag.R_RIGHT
    assert lab_r.in_base_union
