"""Command-line entry point: ``shapeuq <command> [--config PATH] [--out DIR]``."""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pydantic
import scipy

from . import __version__
from .config import load_config
from .farfield import (directions, mie_farfield, mie_norms, mie_solve, spike_statistics)
from .fem import SingularSystemError, mesh_threshold_report, norms
from .pml import PmlProfile
from .shape import DegenerateMapError, load_shape
from .solver import MeshSettings, TransmissionSolver, make_mesh
from .studies import convergence_study, pml_study
from .uq import (NodeFailure, WeightSequence, build_index_set, farfield_integrand, l2_circle,
                 mean_farfield, tensor_reference)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4

log = logging.getLogger("shapeuq")


class CheckFailed(Exception):
    pass


def provenance(cfg, command):
    return {"command": command, "config_hash": cfg.digest(), "shapeuq": __version__,
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_csv(path, header, rows, prov):
    lines = [f"# {k}={v}" for k, v in prov.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(f"{v:.16e}" if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj)}")


def _profile(cfg):
    p = cfg.pml
    return PmlProfile(p.R1, p.R2, p.R_tr, p.sigma0, p.ramp_degree)


def _mesh_settings(cfg):
    m = cfg.mesh
    return MeshSettings(m.n_theta, m.levels, m.band_layers, m.thin_ratio, m.radial_grading)


def _farfield_rows(pattern):
    v = pattern.values
    return [(float(t), float(z.real), float(z.imag), float(abs(z))) for t, z in zip(pattern.theta, v)]


def _solver(cfg, profile=None):
    profile = _profile(cfg) if profile is None else profile
    mesh = make_mesh(profile, _mesh_settings(cfg), lam=cfg.lam, eta=cfg.rhs.eta, q=cfg.p)
    return TransmissionSolver(mesh, profile, cfg.k, cfg.n_i, cfg.p, lam=cfg.lam,
                              eta=cfg.rhs.eta, direction=cfg.rhs.direction, rhs=cfg.rhs.type)


# ---------------------------------------------------------------------------
# commands

def cmd_solve(cfg, out, args):
    prov = provenance(cfg, "solve")
    solver = _solver(cfg)
    shape = None
    if cfg.shape:
        shape, chi = load_shape(cfg.shape, cfg.k)
        if abs(chi.lam - cfg.lam) > 0:
            raise ValueError("shape file lambda differs from the configured lam")
    sol = solver.solve(shape)
    theta = directions(cfg.n_directions)
    ff = solver.farfield(sol, theta)
    mesh = solver.space.mesh
    nm = norms(solver.space, cfg.k, sol, None, mesh.cells_between(0.0, cfg.pml.R1))
    h = mesh.mesh_size()
    thr = mesh_threshold_report(h, cfg.k, cfg.p)
    np.save(out / "solution.npy", sol.dofs)
    write_csv(out / "farfield.csv", ["theta", "re", "im", "abs"], _farfield_rows(ff), prov)
    report = {"provenance": prov, "n_dofs": solver.space.n_dofs, "h": h,
              "residual_ok": bool(sol.residual < 1e-9),
              "norms_B_R1": {"l2": nm.l2, "h1": nm.h1, "h1k": nm.h1k},
              "threshold": {"quasi_indicator": thr.quasi_indicator,
                            "relative_indicator": thr.relative_indicator,
                            "regime": thr.regime}}
    if shape is None or shape.is_zero:
        ref = mie_farfield(mie_solve(cfg.k, cfg.n_i), theta)
        rel = (ff - ref).linf() / ref.linf()
        report["series_relative_linf"] = rel
        if args.check and not rel <= cfg.check_tolerance:
            write_json(out / "report.json", report)
            raise CheckFailed(f"far field differs from the series solution by {rel:.3e}")
    write_json(out / "report.json", report)
    print(f"solve: {solver.space.n_dofs} dofs, h={h:.4f}, regime {thr.regime}")


def cmd_scan_k(cfg, out, args):
    prov = provenance(cfg, "scan-k")
    sc = cfg.scan
    ks = np.round(np.arange(sc.k_min, sc.k_max + 0.5 * sc.step, sc.step), 12)
    summary, failures = {"provenance": prov, "series": []}, []
    for n_i in sc.n_i_values:
        rows = []
        for k in ks:
            nm = mie_norms(mie_solve(k, n_i), R=sc.R, kind="total")
            rows.append((float(k), nm.l2, nm.h1, nm.h1k))
        write_csv(out / f"scan_k_ni_{n_i:.6g}.csv", ["k", "L2", "H1", "H1k"], rows, prov)
        h1 = np.array([r[2] for r in rows])
        ratio, prominence = spike_statistics(h1) if h1.size > 2 else (1.0, 1.0)
        summary["series"].append({"n_i": n_i, "max_over_median": ratio,
                                  "worst_local_prominence": prominence})
        print(f"scan-k n_i={n_i:.4g}: max/median {ratio:.3f}, worst prominence {prominence:.3f}")
        if args.check and h1.size > 2:
            if n_i > 1 and not ratio > 5:
                failures.append(f"n_i={n_i}: max/median {ratio:.3f} <= 5")
            if n_i < 1 and not (ratio < 1.5 and prominence <= 1.2):
                failures.append(f"n_i={n_i}: ratio {ratio:.3f}, prominence {prominence:.3f}")
    write_json(out / "scan_summary.json", summary)
    if failures:
        raise CheckFailed("; ".join(failures))


def cmd_convergence(cfg, out, args, only_pml=False):
    prov = provenance(cfg, "pml-study" if only_pml else "convergence")
    cc = cfg.convergence
    failures, summary = [], {"provenance": prov}
    study = "pml" if only_pml else cc.study
    if study in ("h", "both"):
        mesh = _mesh_settings(cfg)
        summary["h"] = []
        for p, first in zip(cc.p_values, cc.first_levels):
            st = convergence_study(cfg.k, cfg.n_i, p, cc.levels, mesh,
                                   PmlProfile(cfg.pml.R1, cfg.pml.R2, cfg.pml.R_tr, cc.sigma0,
                                              cfg.pml.ramp_degree),
                                   eta=cfg.rhs.eta, lam=cfg.lam, first_level=first)
            rows = [(r.level, r.h, r.n_dofs, r.l2, r.h1k, r.rel_l2, r.rel_h1k, r.regime)
                    for r in st.rows]
            write_csv(out / f"convergence_p{p}.csv",
                      ["level", "h", "n_dofs", "err_l2", "err_h1k", "rel_l2", "rel_h1k", "regime"],
                      rows, prov)
            r_h1, r_l2 = st.fitted_rate("h1k"), st.fitted_rate("l2")
            summary["h"].append({"p": p, "rate_h1k": r_h1, "rate_l2": r_l2,
                                 "pairwise_h1k": st.pairwise_rates("h1k"),
                                 "pairwise_l2": st.pairwise_rates("l2")})
            if any(r.regime == "out-of-regime" for r in st.rows):
                log.warning("p=%d: some levels are outside the resolved regime", p)
            print(f"convergence p={p}: H1_k rate {r_h1:.3f}, L2 rate {r_l2:.3f}")
            if args.check:
                if abs(r_h1 - p) > 0.3:
                    failures.append(f"p={p}: H1_k rate {r_h1:.3f}")
                if abs(r_l2 - (p + 1)) > 0.4:
                    failures.append(f"p={p}: L2 rate {r_l2:.3f}")
    if study in ("pml", "both"):
        mesh = _mesh_settings(cfg)
        ps = pml_study(cfg.k, cfg.n_i, cc.pml_p, cc.R_tr_values, sigma0=cc.pml_sigma0,
                       R1=cfg.pml.R1, R2=cc.pml_R2, level=cc.pml_level, mesh=mesh,
                       eta=cfg.rhs.eta, lam=cfg.lam)
        slope, _, r2 = ps.fit()
        write_csv(out / "pml_study.csv", ["R_tr", "err_h1k", "n_dofs"],
                  [(float(a), float(b), c) for a, b, c in zip(ps.R_tr, ps.errors, ps.n_dofs)], prov)
        summary["pml"] = {"slope": slope, "r2": r2}
        print(f"pml-study: log-error slope {slope:.3f}, R^2 {r2:.3f}")
        if args.check and not (slope < 0 and r2 > 0.9):
            failures.append(f"PML slope {slope:.3f}, R^2 {r2:.3f}")
    write_json(out / "convergence_summary.json", summary)
    if failures:
        raise CheckFailed("; ".join(failures))


def _weights(uq):
    if isinstance(uq.beta, list):
        return WeightSequence(tuple(uq.beta))
    return WeightSequence.from_decay(uq.beta.C, uq.beta.epsilon, uq.beta.p, uq.s)


def cmd_uq_mean(cfg, out, args):
    prov = provenance(cfg, "uq-mean")
    uq = cfg.uq
    if not cfg.n_i < 1:
        raise ValueError("uq-mean needs n_i < 1")
    weights = _weights(uq)
    solver = _solver(cfg)
    theta = directions(uq.n_directions)
    sets = [build_index_set(weights, uq.s, b) for b in uq.budgets]
    res = mean_farfield(solver, weights, uq.s, sets, theta, jobs=args.jobs,
                        k_scaling=uq.k_scaling)
    ref = None
    if uq.reference_points:
        ref = tensor_reference(farfield_integrand(solver, weights, uq.s, theta, uq.k_scaling),
                               uq.s, uq.reference_points)
    rows, disc = [], []
    diffs = [float("nan")] + res.differences()
    for b, n, m, d in zip(uq.budgets, res.n_points, res.means, diffs):
        e = l2_circle(m - ref) if ref is not None else float("nan")
        disc.append(e)
        rows.append((b, n, e, d))
    write_csv(out / "uq_convergence.csv", ["budget", "n_points", "discrepancy", "difference"],
              rows, prov)
    m = res.mean
    write_csv(out / "mean_farfield.csv", ["theta", "re", "im", "abs"],
              [(float(t), float(z.real), float(z.imag), float(abs(z))) for t, z in zip(theta, m)],
              prov)
    write_json(out / "manifest.json", {"provenance": prov, "nodes": res.manifest,
                                       "n_points": res.n_points})
    print("uq-mean: points " + ", ".join(map(str, res.n_points)))
    if args.check and ref is not None:
        if not all(b <= a for a, b in zip(disc[:-1], disc[1:])):
            raise CheckFailed(f"discrepancy not monotone: {disc}")
        if len(disc) > 1 and res.n_points[-1] > res.n_points[-2]:
            slope = np.log(disc[-1] / disc[-2]) / np.log(res.n_points[-1] / res.n_points[-2])
            if not slope < -0.5:
                raise CheckFailed(f"last-step discrepancy slope {slope:.3f} >= -1/2")


def cmd_mie(cfg, out, args):
    prov = provenance(cfg, "mie")
    sol = mie_solve(cfg.k, cfg.n_i)
    theta = directions(cfg.n_directions)
    write_csv(out / "mie_farfield.csv", ["theta", "re", "im", "abs"],
              _farfield_rows(mie_farfield(sol, theta)), prov)
    write_csv(out / "mie_coefficients.csv", ["m", "a_re", "a_im", "b_re", "b_im"],
              [(int(m), float(a.real), float(a.imag), float(b.real), float(b.imag))
               for m, a, b in zip(sol.orders, sol.a, sol.b)], prov)
    nm = mie_norms(sol, R=2.0, kind="total")
    write_json(out / "mie_norms.json", {"provenance": prov, "l2": nm.l2, "h1": nm.h1,
                                        "h1k": nm.h1k})
    print(f"mie: M={sol.M}, |u|_H1(B2)={nm.h1:.6f}")


COMMANDS = {
    "solve": cmd_solve,
    "scan-k": cmd_scan_k,
    "convergence": cmd_convergence,
    "pml-study": lambda cfg, out, args: cmd_convergence(cfg, out, args, only_pml=True),
    "uq-mean": cmd_uq_mean,
    "mie": cmd_mie,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="shapeuq", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for UQ nodes")
    ap.add_argument("--check", action="store_true", help="exit 4 if acceptance checks fail")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _error(out, kind, exc):
    info = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(info), file=sys.stderr)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "error.json", info)
    except OSError:
        pass


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        _error(args.out, "config", ValueError("--jobs must be >= 1"))
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, pydantic.ValidationError) as exc:
        _error(args.out, "config", exc)
        return EXIT_CONFIG
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        COMMANDS[args.command](cfg, args.out, args)
    except CheckFailed as exc:
        _error(args.out, "check", exc)
        return EXIT_CHECK
    except (SingularSystemError, DegenerateMapError, NodeFailure, FloatingPointError,
            np.linalg.LinAlgError, RuntimeError) as exc:
        _error(args.out, "numerical", exc)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        _error(args.out, "config", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
