"""Sweep orchestration, rate fits and bound checks (small configurations)."""

import math

import numpy as np
import pytest

from cloaklab.errors import ValidationError
from cloaklab import experiments as ex


def synthetic_rows(eps_list, norms, k=1.0, dim=3, flagged=None):
    rows = []
    for i, (e, nrm) in enumerate(zip(eps_list, norms)):
        rows.append(
            ex.SweepRow(
                dim=dim, eps=e, k=k, k_eps=ex.k_eps_for(e, 1.0, dim), c_star=1.0,
                R=3.0, norm_s=nrm, norm_s_b5=nrm, far_max=nrm, t_norm=0.01,
                M=0.01, a=1.0, flagged=bool(flagged and flagged[i]),
            )
        )
    return rows


def test_fit_rate_perfect_synthetic():
    eps = [0.1, 0.05, 0.025, 0.0125]
    rows = synthetic_rows(eps, [2 * e for e in eps])
    fit = ex.fit_rate(rows, "log_eps")
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(2.0), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.points_used == 4


def test_fit_rate_through_origin_2d():
    eps = [0.1, 0.05, 0.025, 0.0125]
    rows = synthetic_rows(eps, [0.7 / abs(math.log(e)) for e in eps], dim=2)
    fit = ex.fit_rate(rows, "log_log_inv_eps")
    assert fit.slope == pytest.approx(0.7, rel=1e-12)
    assert fit.intercept == 0.0


def test_flagged_rows_never_enter_fits():
    eps = [0.1, 0.05, 0.025, 0.0125, 0.00625]
    norms = [2 * e for e in eps]
    norms[0] = 99.0  # poisoned but flagged
    rows = synthetic_rows(eps, norms, flagged=[1, 0, 0, 0, 0])
    fit = ex.fit_rate(rows, "log_eps")
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValidationError):
        ex.fit_rate(rows[:4], "log_eps")  # only 3 unflagged rows remain


def test_far_field_bound_zero_rows():
    rows = synthetic_rows([0.1], [0.0])
    rep = ex.far_field_bound_check(rows)
    assert rep["ratios"] == [0.0]


def test_small_real_sweep_d3_decreasing():
    rows = ex.run_sweep(3, [0.1, 0.05], [1.0], c_star=1.0, R=3.0)
    assert rows[0].norm_s > rows[1].norm_s
    assert not rows[0].flagged and not rows[1].flagged


def test_sigma_off_controls():
    rows3 = ex.run_sweep(3, [0.1, 0.05, 0.025, 0.0125], [1.0], sigma_off=True)
    x = np.log([r.eps for r in rows3])
    y = np.log([r.norm_s for r in rows3])
    slope = np.polyfit(x, y, 1)[0]
    assert abs(slope - 1.0) < 0.05  # soft small ball alone scatters O(eps)

    rows2 = ex.run_sweep(2, [0.1, 0.05, 0.025, 0.0125], [1.0], sigma_off=True)
    vals = [r.norm_s * abs(math.log(r.eps)) for r in rows2]
    assert max(vals) / min(vals) < 3.0  # control decays only like 1/|ln eps|


def test_estimate_consistency_R_doubling():
    rows = ex.run_sweep(3, [0.1, 0.05], [1.0], c_star=1.0, R=3.0)
    c3 = ex.estimate_consistency_check(rows, R=3.0)
    c6 = ex.estimate_consistency_check(rows, R=6.0)
    for a, b in zip(c3["c_rows"], c6["c_rows"]):
        assert 0.1 < a / b < 10.0


def test_broadband_bands_shapes():
    rows = ex.run_sweep(2, [0.1, 0.05], [1.0], c_star=1.0, R=3.0)
    out = ex.broadband_bands(rows)
    assert 1.0 in out["per_k"]
    assert out["per_k"][1.0]["band"] >= 1.0
    assert out["pooled_band_2d"] >= 1.0


def test_2d_through_origin_fit_on_real_sweep():
    rows = ex.run_sweep(2, [0.1, 0.05, 0.025, 0.0125], [1.0], c_star=1.0, R=3.0)
    fit = ex.fit_rate(rows, "log_log_inv_eps")
    for r in rows:
        pred = fit.slope / abs(math.log(r.eps))
        assert abs(r.norm_s - pred) / r.norm_s < 0.5  # relative residuals < 50%


def test_hankel_ratio_tracks_inverse_log():
    # |H_0(k)| / |H_0(eps k)| behaves like C/|ln(eps k)| as eps k -> 0
    from cloaklab.specfun import cyl_bessel

    k = 1.0
    vals = []
    for e in (1e-3, 1e-4, 1e-5, 1e-6):
        ratio = abs(cyl_bessel(0, k).H1) / abs(cyl_bessel(0, e * k).H1)
        vals.append(ratio * abs(math.log(e * k)))
    assert max(vals) / min(vals) < 1.5
