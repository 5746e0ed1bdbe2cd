"""Batch front end: subcommands eigen | oracle | sweep | verify | flow.

Every run writes a JSON report embedding the fully resolved config; data
tables go to CSV.  Outputs are deterministic: fixed iteration orders, no
wall-clock content.  The output root comes from --out, else the config,
else $HESSEIG_OUT.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import eigensolve, radial, variational, verify
from .config import MODES, RunConfig, apply_overrides, parse_config
from .errors import ConfigError
from .grids import GridField, geometry


def _error_json(message: str, **extra) -> str:
    payload = {"error": message}
    payload.update(extra)
    return json.dumps(payload, sort_keys=True)


def _out_dir(args, cfg: RunConfig) -> Path:
    if args.out:
        root = args.out
    elif os.environ.get("HESSEIG_OUT"):
        root = os.environ["HESSEIG_OUT"]
    else:
        root = cfg.out_dir
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _run_oracle(cfg: RunConfig, out: Path) -> int:
    dom = cfg.domain
    if dom.kind != "disk":
        print(_error_json("oracle mode needs a disk domain",
                          domain=str(dom)))
        return 2
    if cfg.k == 1:
        lam = radial.bessel_weighted_eigen(cfg.n, cfg.s, dom.radius)
        method = "bessel"
    else:
        lam = radial.shoot_eigen(cfg.n, cfg.k, cfg.s, dom.radius,
                                 tol=cfg.lambda_tol).lambda1
        method = "shooting"
    print(f"lambda1 ≈ {lam:.5f}")
    _write_json(out / "oracle.json", {
        "config": cfg.to_dict(), "lambda1": lam, "method": method})
    return 0


def _run_eigen(cfg: RunConfig, out: Path) -> int:
    spec = cfg.to_problem_spec()
    lam, res = eigensolve.find_lambda_delta(spec)
    res.field.to_csv(out / "eigenfunction.csv")
    res.field.to_binary(out / "eigenfunction.bin")
    _write_json(out / "eigen.json", {
        "config": cfg.to_dict(),
        "lambda": lam,
        "delta": res.delta,
        "residual": res.residual,
        "sup_norm_at_bracket": res.sup_norm_at_bracket,
        "iterations": {k: v for k, v in res.iterations.items()
                       if k != "bracket"},
        "bracket": list(res.iterations["bracket"]),
    })
    print(f"lambda_delta ≈ {lam:.6g}")
    return 0


def _run_sweep(cfg: RunConfig, out: Path, jobs: int) -> int:
    spec = cfg.to_problem_spec()
    report = eigensolve.sweep_delta(spec, cfg.deltas, beta=cfg.beta,
                                    jobs=jobs)
    report.to_csv(out / "sweep.csv", config=cfg.to_dict())
    payload = {"config": cfg.to_dict()}
    payload.update(report.to_dict())
    _write_json(out / "sweep.json", payload)
    for res, d in zip(report.results, cfg.deltas):
        res.field.to_csv(out / f"eigenfunction_delta_{d!r}.csv")
    print(f"lambda1 ≈ {report.lambda1:.6g} ({report.method})")
    return 0


def _run_verify(cfg: RunConfig, out: Path) -> int:
    if not cfg.snapshot:
        print(_error_json("verify mode needs [verify] snapshot = <path>"))
        return 2
    snap = Path(cfg.snapshot)
    if not snap.exists():
        print(_error_json("snapshot path does not exist", path=str(snap)))
        return 2
    fld = GridField.from_binary(snap)
    spec = cfg.to_problem_spec().with_(h=fld.h)
    report = verify.estimate_norms(fld, spec, beta=cfg.beta)
    slope = verify.boundary_slope_check(fld, spec)
    payload = {
        "config": cfg.to_dict(),
        "estimates": {"K": report.K, "L_beta": report.L_beta,
                      "beta": report.beta, "Khat": report.K_hat,
                      "Lhat": report.L_hat},
        "boundary_slope": slope,
    }
    try:
        fit = verify.holder_probe(fld, spec)
        payload["holder"] = {"alpha": fit.alpha, "radii": fit.radii,
                             "residual": fit.residual}
    except Exception as exc:            # under-resolved snapshots are fine
        payload["holder"] = {"error": str(exc)}
    _write_json(out / "verify.json", payload)
    print(f"K ≈ {report.K:.6g}, L ≈ {report.L_beta:.6g}")
    return 0


def _run_flow(cfg: RunConfig, out: Path) -> int:
    spec = cfg.to_problem_spec()
    geo = geometry(spec.domain, spec.h)
    scale = spec.reference_radius()
    u0 = geo.field_from_function(
        lambda X, Y: np.minimum((X ** 2 + Y ** 2 - scale ** 2) / 2.0, 0.0),
        clip_outside=True)
    qf = variational.QuadratureField.from_grid(u0, spec.domain)
    result = variational.gradient_flow(
        qf, spec, M=cfg.flow_M, p=cfg.flow_p, t_end=cfg.flow_t_end,
        record_every=25)
    result.to_csv(out / "flow.csv", config=cfg.to_dict())
    _write_json(out / "flow.json", {
        "config": cfg.to_dict(),
        "initial_residual": result.initial_residual,
        "final_residual": result.final_residual,
        "steps": len(result.J_trace) - 1,
        "J_initial": float(result.J_trace[0]),
        "J_final": float(result.J_trace[-1]),
    })
    print(f"residual {result.initial_residual:.3g} -> "
          f"{result.final_residual:.3g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hesseig",
        description="Weighted k-Hessian eigenvalue solver and verification "
                    "suite")
    sub = parser.add_subparsers(dest="mode_cmd", required=True)
    for name in MODES:
        p = sub.add_parser(name, help=f"run in {name} mode")
        p.add_argument("--config", required=True, help="path to config file")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override section.key=value")
        p.add_argument("--jobs", type=int, default=1,
                       help="concurrent delta jobs (sweep mode)")
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(_error_json("cannot read config", path=args.config,
                          detail=str(exc)))
        return 2
    try:
        text = apply_overrides(text, args.set)
        cfg = parse_config(text)
    except ConfigError as exc:
        print(_error_json("invalid config", detail=str(exc),
                          line=getattr(exc, "line", None)))
        return 2
    if cfg.mode != args.mode_cmd:
        cfg.mode = args.mode_cmd    # subcommand wins over the config key
    out = _out_dir(args, cfg)
    try:
        if cfg.mode == "oracle":
            return _run_oracle(cfg, out)
        if cfg.mode == "eigen":
            return _run_eigen(cfg, out)
        if cfg.mode == "sweep":
            return _run_sweep(cfg, out, args.jobs)
        if cfg.mode == "verify":
            return _run_verify(cfg, out)
        if cfg.mode == "flow":
            return _run_flow(cfg, out)
        print(_error_json("unknown mode", mode=cfg.mode))
        return 2
    except Exception as exc:
        print(_error_json("run failed", mode=cfg.mode, detail=str(exc),
                          context=getattr(exc, "diagnostics", None)))
        return 1


if __name__ == "__main__":
    sys.exit(main())
