"""Command-line entry point: ``diamag <subcommand> [--config F] [--out D] [--seed S] [--threads T]``.

Exit status: 0 success, 1 verification failure, 2 invalid configuration,
3 input/output failure, 4 numerical domain or convergence failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .artifacts import write_csv, write_json
from .canonical import (CanonicalParams, canonical_susceptibility, free_energy,
                        log_canonical_Z_contour)
from .config import RunConfig, bose_warning, dump_config, load_config, override, parse_config
from .exceptions import ConfigurationError, DiamagError
from .grand_canonical import PressureFunction, susceptibility_cauchy, susceptibility_fd
from .lattice import HamiltonianFamily, dirichlet_laplacian_eigenvalues
from .spectral import eigendecompose
from .thermo_limit import limit_scan
from .verify import run_checks

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4
COMMANDS = ("spectrum", "pressure", "susceptibility", "canonical", "thermo-limit", "verify")


def _common(parser: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=default,
                        help="INI configuration file (defaults for missing keys)")
    parser.add_argument("--out", metavar="DIR", default=default, help="output directory")
    parser.add_argument("--seed", type=int, metavar="U64", default=default,
                        help="seed for randomized draws")
    parser.add_argument("--threads", type=int, metavar="N", default=default,
                        help="BLAS/LAPACK thread count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diamag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "spectrum": "eigenvalues of H(omega)",
        "pressure": "grand-canonical pressure on the (omega, z) grid",
        "susceptibility": "omega-derivatives of the pressure (Cauchy circle and finite differences)",
        "canonical": "canonical partition function, free energy and susceptibilities",
        "thermo-limit": "pressure over increasing boxes and its extrapolation",
        "verify": "run the property suite and print a pass/fail table",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        _common(sp, suppress=True)
    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else parse_config("")
    if args.out is not None:
        cfg = override(cfg, "output", directory=args.out)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        cfg = override(cfg, "run", seed=args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigurationError("threads must be positive")
        cfg = override(cfg, "run", threads=args.threads)
    # round-trip through text so that the stamped config is exactly what ran
    return parse_config(dump_config(cfg))


def _family(cfg: RunConfig, scale=None) -> HamiltonianFamily:
    return HamiltonianFamily(cfg.box_spec(scale), cfg.field_config(), max_sites=cfg.box.max_sites)


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.output.directory)


def _wants(cfg: RunConfig, fmt: str) -> bool:
    return fmt in cfg.output.formats


def cmd_spectrum(cfg: RunConfig, text: str) -> int:
    fam = _family(cfg)
    rows, summary = [], []
    for w in cfg.omegas():
        S = eigendecompose(fam(w), dense_cap=cfg.run.dense_cap)
        for i, lam in enumerate(np.asarray(S.eigenvalues, dtype=complex)):
            rows.append([w.real, w.imag, i, lam.real, lam.imag])
        summary.append({"omega": [w.real, w.imag], "E0": S.E0, "n": S.size,
                        "hermitian": S.is_hermitian})
    if _wants(cfg, "csv"):
        write_csv(_out(cfg) / "spectrum.csv",
                  ["omega_re", "omega_im", "index", "value_re", "value_im"], rows, text, "spectrum")
    if _wants(cfg, "json"):
        write_json(_out(cfg) / "spectrum.json",
                   {"volume": fam.volume, "spectra": summary}, text, "spectrum")
    for s in summary:
        print(f"omega={complex(*s['omega'])}  N={s['n']}  E0={s['E0']:.12g}")
    return EXIT_OK


_PRESSURE_HEADER = ["beta", "omega_re", "omega_im", "z_re", "z_im", "epsilon",
                    "value_re", "value_im", "method"]


def _pressure_function(cfg: RunConfig, fam, z) -> PressureFunction:
    return PressureFunction(fam, cfg.ensemble_params(z=z), method=cfg.contour.method,
                            K=cfg.compact_k(z), e0_offset=cfg.contour.e0_offset,
                            ray_tol=cfg.contour.ray_tol, segment_nodes=cfg.contour.segment_nodes,
                            ray_nodes=cfg.contour.ray_nodes)


def _warn_bose(cfg: RunConfig):
    E0 = float(dirichlet_laplacian_eigenvalues(cfg.box_spec())[0])
    msg = bose_warning(cfg, E0) if cfg.field.potential == "zero" else None
    if msg:
        print(f"warning: {msg}", file=sys.stderr)


def cmd_pressure(cfg: RunConfig, text: str) -> int:
    _warn_bose(cfg)
    fam = _family(cfg)
    e = cfg.ensemble
    rows = []
    for w in cfg.omegas():
        for z in cfg.zs():
            P = _pressure_function(cfg, fam, z)(w)
            rows.append([e.beta, w.real, w.imag, z.real, z.imag, e.epsilon,
                         P.real, P.imag, cfg.contour.method])
    write_csv(_out(cfg) / "pressure.csv", _PRESSURE_HEADER, rows, text, "pressure")
    print(f"{len(rows)} pressure rows written to {_out(cfg) / 'pressure.csv'}")
    return EXIT_OK


def cmd_susceptibility(cfg: RunConfig, text: str) -> int:
    fam = _family(cfg)
    e, c = cfg.ensemble, cfg.contour
    rows = []
    kw = {"K": None, "e0_offset": c.e0_offset, "ray_tol": c.ray_tol,
          "segment_nodes": c.segment_nodes, "ray_nodes": c.ray_nodes}
    for w in cfg.omegas():
        for z in cfg.zs():
            p = cfg.ensemble_params(omega=w, z=z)
            kw["K"] = cfg.compact_k(z)
            for order in range(1, e.order + 1):
                chi = susceptibility_cauchy(fam, p, order, radius=c.cauchy_radius,
                                            nodes=c.cauchy_nodes, method=c.method, **kw)
                rows.append([e.beta, w.real, w.imag, z.real, z.imag, e.epsilon, order,
                             chi.real, chi.imag, "cauchy"])
                if w.imag == 0:
                    fd = susceptibility_fd(fam, p, order)
                    rows.append([e.beta, w.real, w.imag, z.real, z.imag, e.epsilon, order,
                                 fd.real, fd.imag, "finite_difference"])
    header = _PRESSURE_HEADER[:6] + ["order"] + _PRESSURE_HEADER[6:]
    write_csv(_out(cfg) / "susceptibility.csv", header, rows, text, "susceptibility")
    print(f"{len(rows)} susceptibility rows written")
    return EXIT_OK


def cmd_canonical(cfg: RunConfig, text: str) -> int:
    fam = _family(cfg)
    e = cfg.ensemble
    if e.n_particles is not None:
        cp = CanonicalParams(e.n_particles)
    elif e.rho0 is not None:
        cp = CanonicalParams.from_density(e.rho0, fam.volume)
    else:
        cp = CanonicalParams(1)
    rows = []
    for w in cfg.omegas():
        S = eigendecompose(fam(w), dense_cap=cfg.run.dense_cap)
        logZ = log_canonical_Z_contour(S, cp, e.beta, e.epsilon, allow_complex=w.imag != 0)
        f = free_energy(logZ, e.beta, is_log=True)
        for order in range(1, e.order + 1):
            m = canonical_susceptibility(fam, cp, e.beta, e.epsilon, w, order,
                                         cfg.contour.cauchy_radius, cfg.contour.cauchy_nodes)
            rows.append([e.beta, w.real, w.imag, e.epsilon, cp.N_particles, logZ.real,
                         float(np.exp(logZ.real)), f, order, m.real, m.imag])
    header = ["beta", "omega_re", "omega_im", "epsilon", "N", "log_Z", "Z", "f",
              "order", "m_re", "m_im"]
    write_csv(_out(cfg) / "canonical.csv", header, rows, text, "canonical")
    print(f"N={cp.N_particles}: {len(rows)} canonical rows written")
    return EXIT_OK


def cmd_thermo_limit(cfg: RunConfig, text: str) -> int:
    w = cfg.omega
    if w.imag != 0:
        raise ConfigurationError("thermo-limit needs a real omega (field.omega_im = 0)")
    K = cfg.compact_k() if cfg.contour.k_radius > 0 else None
    report = limit_scan(cfg.box.scales, cfg.box_spec(), cfg.field_config(),
                        cfg.ensemble_params(), K=K, dense_cap=cfg.run.dense_cap)
    rows = []
    for i, (L, P) in enumerate(zip(report.scales, report.pressures)):
        b = cfg.box_spec(L)
        inc = report.increments[i - 1] if i > 0 else float("nan")
        rows.append([L, b.n_sites, b.volume, P, inc])
    write_csv(_out(cfg) / "thermo_limit.csv", ["L", "n_sites", "volume", "pressure", "increment"],
              rows, text, "thermo-limit")
    write_json(_out(cfg) / "thermo_limit.json", report.to_dict(), text, "thermo-limit")
    print(f"P_inf = {report.p_inf:.8g} +/- {report.uncertainty:.2g}  "
          f"(increments decreasing: {report.monotone})")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, text: str) -> int:
    width = 32
    print(f"{'check':<{width}} {'result':<6} {'time':>7}  detail")

    def show(r):
        print(f"{r.name:<{width}} {'PASS' if r.passed else 'FAIL':<6} {r.seconds:6.2f}s  {r.detail}",
              flush=True)

    results = run_checks(cfg.run.seed, progress=show)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    payload = {"seed": cfg.run.seed, "checks": [
        {"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]}
    write_json(_out(cfg) / "verify.json", payload, text, "verify")
    return EXIT_OK if n_fail == 0 else EXIT_VERIFY


HANDLERS = {
    "spectrum": cmd_spectrum,
    "pressure": cmd_pressure,
    "susceptibility": cmd_susceptibility,
    "canonical": cmd_canonical,
    "thermo-limit": cmd_thermo_limit,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_IO
    text = dump_config(cfg)
    try:
        with threadpool_limits(limits=cfg.run.threads):
            return HANDLERS[args.command](cfg, text)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DiamagError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
