"""Command-line entry point: ``gbsopt {hf,optimize,gradcheck,integrals} --config RUN.json``.

Exit codes: 0 success, 1 validation error, 2 SCF non-convergence,
3 optimizer failure (or a gradient check above tolerance).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisError, BasisSet, basis_from_shells, cdo3_basis, grid_box_basis, parse_gaussian94, parse_xyz
from .integrals import LinearDependenceError, build_tensors, set_threads, write_dump
from .optim import OptimizerConfig, optimize_basis
from .pgraph import GraphError, ROLES
from .scf import ScfError, rhf

EXIT_OK, EXIT_VALIDATION, EXIT_SCF, EXIT_OPTIMIZER = 0, 1, 2, 3
GRADCHECK_TOL = 1e-4

log = logging.getLogger("gbsopt")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    field: object
    basis: BasisSet
    charge: int = 0
    scf: dict = field(default_factory=dict)
    optimize: dict | None = None
    output: str = "."

    @property
    def n_elec(self):
        return self.field.n_electrons(self.charge)


def _resolve(path, base):
    return path if os.path.isabs(path) else os.path.join(base, path)


def _read(path):
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}")
    with open(path) as fh:
        return fh.read()


def _geometry(block, base, units_override):
    if not isinstance(block, dict):
        raise ConfigError("'geometry' must be an object")
    units = units_override or block.get("units", "bohr")
    if "path" in block:
        text = _read(_resolve(block["path"], base))
    elif "xyz" in block:
        text = block["xyz"]
    else:
        raise ConfigError("'geometry' needs 'path' or 'xyz'")
    return parse_xyz(text, units)


def _free_roles(opt):
    free = tuple(opt.get("free", ROLES)) if opt else ()
    bad = set(free) - set(ROLES)
    if bad:
        raise ConfigError(f"unknown parameter roles {sorted(bad)}; choose from {list(ROLES)}")
    return free


def _build_basis(block, fld, base, opt):
    kind = block.get("kind")
    free = _free_roles(opt)
    corr = (opt or {}).get("correlations", {})
    if kind == "ao-file":
        shells = parse_gaussian94(_read(_resolve(block["path"], base)))
        return basis_from_shells(shells, fld, free, bool(corr.get("share_element", False)),
                                 bool(corr.get("inversion", False)))
    if kind == "cdo3":
        origin = block.get("origin", fld.positions.mean(axis=0).tolist())
        b = cdo3_basis(int(block["n_gto"]), block["alphas"], block["coeffs"], float(block["radius"]), origin)
    elif kind == "grid-box":
        origin = block.get("origin", fld.positions.mean(axis=0).tolist())
        b = grid_box_basis(tuple(block["dims"]), float(block["spacing"]), block["alphas"], block["coeffs"],
                           origin, block.get("share", "symmetry"))
    elif kind == "explicit":
        data = json.loads(_read(_resolve(block["path"], base))) if "path" in block else block
        b = BasisSet.from_dict(data)
    else:
        raise ConfigError(f"unknown basis kind {kind!r}; use ao-file, grid-box, cdo3 or explicit")
    frozen = [t.id for t in b.graph.thetas if t.role not in free]
    return BasisSet(b.functions, b.graph.with_frozen(frozen), b.labels)


def load_config(path, units_override=None, out_override=None):
    try:
        data = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    base = os.path.dirname(os.path.abspath(path))
    for key in ("geometry", "basis"):
        if key not in data:
            raise ConfigError(f"config lacks required block {key!r}")
    fld = _geometry(data["geometry"], base, units_override)
    opt = data.get("optimize")
    basis = _build_basis(data["basis"], fld, base, opt)
    cfg = RunConfig(fld, basis, int(data.get("charge", 0)), dict(data.get("scf", {})), opt,
                    out_override or _resolve(data.get("output", "."), base))
    n = cfg.n_elec
    if n < 0 or n % 2:
        raise ConfigError(f"closed-shell RHF needs an even, non-negative electron count; got {n}")
    if n // 2 > basis.W:
        raise ConfigError(f"{n // 2} doubly occupied orbitals exceed the basis size {basis.W}")
    return cfg


def _scf_args(cfg):
    return {"conv": float(cfg.scf.get("conv", 1e-9)), "max_iter": int(cfg.scf.get("max_iter", 200))}


def _optimizer_config(opt):
    keys = ("method", "memory", "grad_inf_tol", "energy_tol", "max_steps", "lr", "beta1", "beta2", "eps")
    return OptimizerConfig(**{k: opt[k] for k in keys if k in opt})


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def cmd_hf(cfg, args):
    tensors = build_tensors(cfg.basis, cfg.field)
    res = rhf(tensors, cfg.field, cfg.n_elec, **_scf_args(cfg))
    print(f"W          {cfg.basis.W}")
    print(f"N_GTO      {cfg.basis.n_gto}")
    print(f"E_elec     {res.E0:.9f}")
    print(f"E_nuc      {res.e_nuc:.9f}")
    print(f"E_total    {res.e_total:.9f}")
    print(f"iterations {res.iterations}")
    print(f"converged  {str(res.converged).lower()}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "hf.json"),
                    {"E_elec": res.E0, "E_nuc": res.e_nuc, "E_total": res.e_total,
                     "iterations": res.iterations, "converged": res.converged, "W": cfg.basis.W})
        if args.dump:
            _dump(tensors, args.out)
    return EXIT_OK if res.converged else EXIT_SCF


def _dump(tensors, out):
    write_dump(os.path.join(out, "S.txt"), tensors.S)
    write_dump(os.path.join(out, "A.txt"), tensors.A)
    write_dump(os.path.join(out, "B.txt"), tensors.B)


def cmd_integrals(cfg, args):
    out = args.out or cfg.output
    os.makedirs(out, exist_ok=True)
    _dump(build_tensors(cfg.basis, cfg.field), out)
    print(f"wrote S.txt, A.txt, B.txt to {out}")
    return EXIT_OK


def cmd_optimize(cfg, args):
    if cfg.optimize is None:
        raise ConfigError("'optimize' block required")
    oc = _optimizer_config(cfg.optimize)
    scf = _scf_args(cfg)
    traj, best = optimize_basis(cfg.basis, cfg.field, cfg.n_elec, oc, conv=scf["conv"],
                                comm_tol=float(cfg.scf.get("comm_tol", 1e-9)))
    out = args.out or cfg.output
    os.makedirs(out, exist_ok=True)
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    if traj.records:
        data = best.to_dict()
        data["E0"] = traj.E0
        data["status"] = traj.status
        _write_json(os.path.join(out, "basis.json"), data)
        print(f"E0         {traj.E0:.9f}")
        print(f"steps      {traj.steps}")
    print(f"status     {traj.status}")
    if traj.status == "converged":
        return EXIT_OK
    return EXIT_SCF if traj.status == "scf-failure" else EXIT_OPTIMIZER


def cmd_gradcheck(cfg, args):
    from .grad import format_gradcheck, gradcheck
    if cfg.optimize is None:
        raise ConfigError("'optimize' block required (it selects the free parameters)")
    if not args.step > 0:
        raise ConfigError(f"finite-difference step must be positive, got {args.step}")
    rows = gradcheck(cfg.basis, cfg.field, cfg.n_elec, h=args.step)
    print(format_gradcheck(rows))
    return EXIT_OK if all(r.rel_err <= GRADCHECK_TOL for r in rows) else EXIT_OPTIMIZER


COMMANDS = {"hf": cmd_hf, "optimize": cmd_optimize, "gradcheck": cmd_gradcheck, "integrals": cmd_integrals}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--threads", type=int, default=1, help="worker cap for integral kernels")
    common.add_argument("--units", choices=("bohr", "angstrom"), help="override geometry units")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log SCF and optimizer steps")
    p = argparse.ArgumentParser(prog="gbsopt", description="Gaussian basis-set generation and optimization")
    sub = p.add_subparsers(dest="command", required=True)
    hf = sub.add_parser("hf", parents=[common], help="RHF energy")
    hf.add_argument("--dump", action="store_true", help="also write tensor dumps to --out")
    sub.add_parser("optimize", parents=[common], help="optimize basis parameters")
    gc = sub.add_parser("gradcheck", parents=[common], help="analytic vs finite-difference gradient")
    gc.add_argument("--step", type=float, default=1e-5, help="central-difference step")
    sub.add_parser("integrals", parents=[common], help="dump S, A and B")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    set_threads(args.threads)
    try:
        cfg = load_config(args.config, args.units, args.out)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, BasisError, GraphError, LinearDependenceError, KeyError, TypeError, ValueError) as exc:
        msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCF


if __name__ == "__main__":
    sys.exit(main())
