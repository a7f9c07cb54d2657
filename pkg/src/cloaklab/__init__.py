"""Numerical laboratory for broadband approximate cloaking of the
Helmholtz equation with a Drude-Lorentz dispersive layer."""

__version__ = "0.1.0"

from .cloak import (
    CloakParams,
    RegionLabel,
    RegionTag,
    a_factor,
    classify_k,
    det_DF,
    m_eps_k,
    map_F,
    push_forward,
    q_index,
    sigma,
)
from .lippmann import (
    ModalVolumeOperator,
    NystromVolumeOperator,
    apply_T,
    green_eval,
    ls_solve,
    phi_k,
    psi_k,
    t_norm_estimate,
)
from .modesolver import (
    RadialPair,
    ScatteringSolution,
    far_field,
    incident_coeffs,
    l2_scattered_norm,
    radial_pair,
    scattered_field,
    small_ball_scatter,
    solve_mode,
    solve_modes,
)
from .specfun import cyl_bessel, sph_bessel, whittaker_m
from .teig import (
    DetSample,
    RootRecord,
    accumulation_study,
    det_f,
    find_roots,
    real_axis_certificate,
    winding_number,
)

__all__ = [
    "__version__",
    "CloakParams",
    "RegionLabel",
    "RegionTag",
    "a_factor",
    "classify_k",
    "det_DF",
    "m_eps_k",
    "map_F",
    "push_forward",
    "q_index",
    "sigma",
    "ModalVolumeOperator",
    "NystromVolumeOperator",
    "apply_T",
    "green_eval",
    "ls_solve",
    "phi_k",
    "psi_k",
    "t_norm_estimate",
    "RadialPair",
    "ScatteringSolution",
    "far_field",
    "incident_coeffs",
    "l2_scattered_norm",
    "radial_pair",
    "scattered_field",
    "small_ball_scatter",
    "solve_mode",
    "solve_modes",
    "cyl_bessel",
    "sph_bessel",
    "whittaker_m",
    "DetSample",
    "RootRecord",
    "accumulation_study",
    "det_f",
    "find_roots",
    "real_axis_certificate",
    "winding_number",
]
