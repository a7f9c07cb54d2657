"""Command-line front end.

Subcommands: scatter, sweep, ls-check, teig-scan, teig-roots, teig-accum,
region-grid, selftest.  Options may come from a flat key = value config
file (--config); command-line flags override file values, and unknown file
keys are rejected.  Every emitted file starts with a metadata block
echoing the fully resolved configuration; CSV numbers use 17 significant
digits so downstream fits are not quantization-limited.

Exit status: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cloak import CloakParams, classify_k
from .errors import CloakLabError, ValidationError
from .experiments import (
    broadband_bands,
    estimate_consistency_check,
    far_field_bound_check,
    fit_rate,
    run_sweep,
)
from .lippmann import ls_compare_to_modesolver, ls_solve
from .modesolver import far_field, l2_scattered_norm, solve_modes
from .selftest import run_selftest
from .teig import accumulation_study, det_f_grid, find_roots, real_axis_certificate

_FMT = "{:.17e}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return _FMT.format(v)
    return str(v)


def _meta_lines(command: str, cfg: dict) -> list[str]:
    lines = [f"# cloaklab {__version__} {command}"]
    for key in sorted(cfg):
        lines.append(f"# {key} = {cfg[key]}")
    return lines


def _write_csv(path: Path, command: str, cfg: dict, header: list[str], rows):
    with open(path, "w") as fh:
        for line in _meta_lines(command, cfg):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, command: str, cfg: dict, payload: dict):
    doc = {"tool": f"cloaklab {__version__}", "command": command, "config": cfg}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _parse_range(text: str) -> tuple[float, float]:
    try:
        a, b = text.split(":")
        return float(a), float(b)
    except Exception:
        raise ValidationError(f"expected 'lo:hi', got {text!r}")


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except Exception:
        raise ValidationError(f"expected comma-separated floats, got {text!r}")


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except Exception:
        raise ValidationError(f"expected comma-separated ints, got {text!r}")


def _load_config(path: str) -> dict:
    """Flat key = value file (TOML-compatible subset); '#' starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line without '=': {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        val = val.strip("\"'")
        out[key.replace("-", "_")] = val
    return out


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults <- config file <- explicit CLI flags; strict key checking."""
    cfg = dict(defaults)
    file_cfg = _load_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for key, val in file_cfg.items():
        ref = defaults[key]
        if isinstance(ref, bool):
            cfg[key] = val.lower() in ("1", "true", "yes", "on")
        elif isinstance(ref, int):
            cfg[key] = int(val)
        elif isinstance(ref, float):
            cfg[key] = float(val)
        else:
            cfg[key] = val
    for key in defaults:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            cfg[key] = cli_val
    return cfg


def _cloak_from(cfg: dict) -> CloakParams:
    return CloakParams(eps=cfg["eps"], k_eps=cfg["k_eps"], dim=cfg["dim"])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_scatter(args) -> int:
    defaults = dict(eps=0.1, k_eps=5.0, dim=2, k=1.0, R=3.0, sigma_off=False,
                    n_far=181, field_grid=False, out_dir=".", workers=1)
    cfg = _resolve(args, defaults)
    p = _cloak_from(cfg)
    sol = solve_modes(cfg["k"], p, sigma_value=0.0 if cfg["sigma_off"] else None)
    theta = np.linspace(0.0, 2 * np.pi if p.dim == 2 else np.pi, cfg["n_far"])
    ff = far_field(sol, theta)

    if cfg["field_grid"]:
        from .modesolver import scattered_field_polar

        rows = []
        for r in np.linspace(2.0 + 1e-9, cfg["R"], 25):
            us = scattered_field_polar(sol, float(r), theta)
            rows.extend([float(r), float(t), v.real, v.imag]
                        for t, v in zip(theta, us))
        _write_csv(Path(cfg["out_dir"]) / "scatter_field.csv", "scatter", cfg,
                   ["r", "theta", "re_us", "im_us"], rows)
    payload = {
        "N": sol.N,
        "tail_estimate": sol.tail_estimate,
        "modes": [
            {
                "index": i,
                "gamma": m.gamma,
                "alpha": m.alpha,
                "beta": m.beta,
                "s": m.s,
                "condition_number": m.condition_number,
                "residual": m.residual,
            }
            for i, m in sorted(sol.modes.items())
        ],
        "norms": {
            "l2_scattered_2_R": l2_scattered_norm(sol, 2.0, cfg["R"]),
            "l2_scattered_2_5": l2_scattered_norm(sol, 2.0, 5.0),
        },
        "far_field": [
            {"theta": float(t), "value": complex(v), "abs": abs(v)}
            for t, v in zip(theta, ff)
        ],
    }
    _write_json(Path(cfg["out_dir"]) / "scatter.json", "scatter", cfg, payload)
    print(f"scatter: wrote scatter.json (N = {sol.N}, "
          f"|u^s|_L2(2,{cfg['R']}) = {payload['norms']['l2_scattered_2_R']:.6e})")
    return 0


def _cmd_sweep(args) -> int:
    defaults = dict(dim=3, eps_list="0.1,0.05,0.025,0.0125", k_list="0.5,1,2",
                    c_star=1.0, R=3.0, sigma_off=False, out_dir=".", workers=1)
    cfg = _resolve(args, defaults)
    rows = run_sweep(
        cfg["dim"], _parse_floats(cfg["eps_list"]), _parse_floats(cfg["k_list"]),
        c_star=cfg["c_star"], R=cfg["R"], sigma_off=cfg["sigma_off"],
    )
    header = ["dim", "eps", "k", "k_eps", "norm_s", "norm_s_b5", "far_max",
              "t_norm", "M", "a", "flagged"]
    _write_csv(
        Path(cfg["out_dir"]) / "sweep.csv", "sweep", cfg, header,
        [[r.dim, r.eps, r.k, r.k_eps, r.norm_s, r.norm_s_b5, r.far_max,
          r.t_norm, r.M, r.a, int(r.flagged)] for r in rows],
    )
    bands = broadband_bands(rows)
    summary = {
        "bands": bands,
        "far_field_bound": far_field_bound_check(rows),
        "estimate_consistency": estimate_consistency_check(rows),
    }
    if cfg["dim"] == 3:
        per_k_ok = all(0.8 <= e["slope"] <= 1.2 for e in bands["per_k"].values())
        summary["acceptance"] = {
            "slope_in_band": per_k_ok,
            "c_row_band_lt_10": summary["estimate_consistency"]["band"] < 10,
        }
    else:
        summary["acceptance"] = {
            "log_band_lt_3": all(e["band"] < 3 for e in bands["per_k"].values()),
        }
    _write_json(Path(cfg["out_dir"]) / "sweep_summary.json", "sweep", cfg, summary)
    print(f"sweep: wrote sweep.csv ({len(rows)} rows) and sweep_summary.json")
    return 0


def _cmd_ls_check(args) -> int:
    defaults = dict(eps=0.1, k_eps=0.0, dim=2, k=1.0, c_star=1.0,
                    n_nodes=128, out_dir=".", workers=1)
    cfg = _resolve(args, defaults)
    if cfg["k_eps"] <= 0:
        from .experiments import k_eps_for

        cfg["k_eps"] = k_eps_for(cfg["eps"], cfg["c_star"], cfg["dim"])
    p = _cloak_from(cfg)
    state = ls_solve(cfg["k"], p, n_nodes=cfg["n_nodes"])
    msol = solve_modes(cfg["k"], p)
    payload = {
        "t_norm": state.t_norm,
        "iterations": state.iterations,
        "residuals": state.residual_history,
        "comparison_to_modesolver": ls_compare_to_modesolver(state, msol),
    }
    _write_json(Path(cfg["out_dir"]) / "ls_check.json", "ls-check", cfg, payload)
    print(
        "ls-check: ||T|| = {:.4g}, iterations = {}, rel diff to mode solver = {:.3e}".format(
            state.t_norm, state.iterations, payload["comparison_to_modesolver"]
        )
    )
    return 0


def _cmd_teig_scan(args) -> int:
    defaults = dict(eps=0.5, k_eps=2.0, dim=2, n=1, line="im=-0.5",
                    re="1.7:2.1", step=0.005, out_dir=".", workers=1)
    cfg = _resolve(args, defaults)
    p = _cloak_from(cfg)
    axis, val = cfg["line"].split("=")
    val = float(val)
    lo, hi = _parse_range(cfg["re"])
    ts = np.arange(lo, hi + 0.5 * cfg["step"], cfg["step"])
    if axis.strip() == "im":
        ks = [complex(t, val) for t in ts]
    elif axis.strip() == "re":
        ks = [complex(val, t) for t in ts]
    else:
        raise ValidationError("line must look like 'im=-0.5' or 're=1.9'")
    samples = det_f_grid([cfg["n"]], ks, p)[cfg["n"]]
    cfg_note = dict(cfg)
    cfg_note["normalization"] = "row-max per matrix row (positive scaling; zero set preserved)"
    _write_csv(
        Path(cfg["out_dir"]) / "teig_scan.csv", "teig-scan", cfg_note,
        ["re_k", "im_k", "re_f", "im_f", "abs_f"],
        [[s.k.real, s.k.imag, s.f.real, s.f.imag, abs(s.f)] for s in samples],
    )
    print(f"teig-scan: wrote teig_scan.csv ({len(samples)} samples)")
    return 0


def _cmd_teig_roots(args) -> int:
    defaults = dict(eps=0.5, k_eps=2.0, dim=2, n=1, box="1.5:2.3:-0.9:-0.1",
                    out_dir=".", workers=1)
    cfg = _resolve(args, defaults)
    p = _cloak_from(cfg)
    parts = cfg["box"].split(":")
    if len(parts) != 4:
        raise ValidationError("box must be 're1:re2:im1:im2'")
    box = tuple(float(t) for t in parts)
    records = find_roots(cfg["n"], box, p)
    payload = {
        "normalization": "row-max per matrix row",
        "roots": [
            {
                "n": r.n,
                "k_root": r.k_root,
                "residual": r.residual,
                "box": list(r.box),
                "newton_iters": r.newton_iters,
                "multiplicity": r.multiplicity,
            }
            for r in records
        ],
    }
    _write_json(Path(cfg["out_dir"]) / "teig_roots.json", "teig-roots", cfg, payload)
    print(f"teig-roots: {len(records)} root(s) found; wrote teig_roots.json")
    return 0


def _cmd_teig_accum(args) -> int:
    defaults = dict(eps=0.5, k_eps=2.0, dim=2, n_list="1,7,12", out_dir=".", workers=1)
    cfg = _resolve(args, defaults)
    p = _cloak_from(cfg)
    rows = accumulation_study(_parse_ints(cfg["n_list"]), p)
    _write_csv(
        Path(cfg["out_dir"]) / "teig_accum.csv", "teig-accum", cfg,
        ["n", "found", "re_k", "im_k", "distance_to_kappa", "residual"],
        [
            [r["n"], int(r["found"]),
             r["k_root"].real if r["found"] else float("nan"),
             r["k_root"].imag if r["found"] else float("nan"),
             r["distance"] if r["found"] else float("nan"),
             r["residual"] if r["found"] else float("nan")]
            for r in rows
        ],
    )
    _write_json(Path(cfg["out_dir"]) / "teig_accum.json", "teig-accum", cfg,
                {"kappa": p.kappa, "rows": rows})
    print(f"teig-accum: wrote teig_accum.csv / .json for n in {cfg['n_list']}")
    return 0


def _cmd_region_grid(args) -> int:
    defaults = dict(eps=0.5, k_eps=2.0, dim=2, re="-3:3", im="-3:1",
                    step=0.02, out_dir=".", workers=1)
    cfg = _resolve(args, defaults)
    p = _cloak_from(cfg)
    re_lo, re_hi = _parse_range(cfg["re"])
    im_lo, im_hi = _parse_range(cfg["im"])
    res = np.arange(re_lo, re_hi + 0.5 * cfg["step"], cfg["step"])
    ims = np.arange(im_lo, im_hi + 0.5 * cfg["step"], cfg["step"])
    rows = []
    for b in ims:
        for a in res:
            lab = classify_k(complex(a, b), p)
            rows.append([float(a), float(b), lab.tag.value,
                         int(lab.on_real_axis), int(lab.on_imag_axis),
                         int(lab.in_base_union)])
    _write_csv(
        Path(cfg["out_dir"]) / "region_grid.csv", "region-grid", cfg,
        ["re_k", "im_k", "label", "on_real_axis", "on_imag_axis", "in_base_union"],
        rows,
    )
    print(f"region-grid: wrote region_grid.csv ({len(rows)} points)")
    return 0


def _cmd_selftest(args) -> int:
    defaults = dict(out_dir=".", workers=1)
    _resolve(args, defaults)
    ok = run_selftest()
    print("selftest:", "ALL PASS" if ok else "FAILURES PRESENT")
    return 0 if ok else 1


def _cmd_certificate(args) -> int:
    defaults = dict(eps=0.5, k_eps=2.0, dim=2, k_lo=0.25, k_hi=6.0, n_max=15,
                    threshold=1e-6, step=1e-2, axis="real", sigma_off=False,
                    out_dir=".", workers=1)
    cfg = _resolve(args, defaults)
    p = _cloak_from(cfg)
    rep = real_axis_certificate(
        cfg["k_lo"], cfg["k_hi"], cfg["n_max"], p,
        threshold=cfg["threshold"], step=cfg["step"], axis=cfg["axis"],
        sigma_value=0.0 if cfg["sigma_off"] else None,
    )
    payload = {
        "min_value": rep.min_value,
        "min_location": rep.min_location,
        "min_n": rep.min_n,
        "passed": rep.passed,
        "zeros": rep.zeros,
    }
    _write_json(Path(cfg["out_dir"]) / "certificate.json", "certificate", cfg, payload)
    print(f"certificate: min |f| = {rep.min_value:.3e} at n = {rep.min_n}, "
          f"k = {rep.min_location}; {'PASS' if rep.passed else 'ZEROS FOUND'}")
    return 0


_COMMANDS = {
    "scatter": (_cmd_scatter, "solve one scattering configuration"),
    "sweep": (_cmd_sweep, "eps/k sweep with rate fits and bound checks"),
    "ls-check": (_cmd_ls_check, "Lippmann-Schwinger oracle cross-check"),
    "teig-scan": (_cmd_teig_scan, "determinant scan along a line in the k plane"),
    "teig-roots": (_cmd_teig_roots, "winding-number root search in a box"),
    "teig-accum": (_cmd_teig_accum, "accumulation-at-kappa study"),
    "region-grid": (_cmd_region_grid, "classify a grid of complex wave numbers"),
    "certificate": (_cmd_certificate, "axis scan certifying absence of eigenvalues"),
    "selftest": (_cmd_selftest, "run the fast invariant suite"),
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cloaklab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"cloaklab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", type=str, default=None,
                        help="flat key = value config file")
        for flag, kind in [
            ("--eps", float), ("--k-eps", float), ("--dim", int), ("--k", float),
            ("--R", float), ("--c-star", float), ("--n", int), ("--n-max", int),
            ("--k-lo", float), ("--k-hi", float), ("--threshold", float),
            ("--step", float), ("--n-nodes", int), ("--n-far", int),
            ("--workers", int),
        ]:
            sp.add_argument(flag, type=kind, default=None)
        for flag in ["--eps-list", "--k-list", "--n-list", "--re", "--im",
                     "--line", "--box", "--axis", "--out-dir"]:
            sp.add_argument(flag, type=str, default=None)
        sp.add_argument("--sigma-off", action="store_const", const=True, default=None,
                        help="switch the dispersion term off (validation mode)")
        sp.add_argument("--field-grid", action="store_const", const=True, default=None,
                        help="also emit a CSV grid of the scattered field")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = _COMMANDS[args.command][0]
    try:
        return handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CloakLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


parse_and_dispatch = main


if __name__ == "__main__":
    sys.exit(main())
