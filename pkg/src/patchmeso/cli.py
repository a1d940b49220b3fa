"""Command line experiment runner; every subcommand writes CSV files.

Configuration is an INI file (``[section]`` then ``key = value``). Values
given on the command line override the file; ``--set section.key=value``
reaches any key without a dedicated flag.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, replace

import numpy as np

from . import commsim, errbound, gl2d
from .coupling import MesoSchedule, SinusoidalForcing
from .errors import ConfigError, PatchMesoError
from .evolve import direct_integrate, exact_solution, meso_run, operator_for
from .geometry import PatchGeometry
from .operator import (
    assemble_boundary_matrix,
    assemble_operator,
    numeric_eigensystem,
    verify_transition_identity,
)
from .spectral import (
    align_modes,
    analytic_eigensystem,
    check_biorthonormality,
    compare_eigensystems,
    write_modes_csv,
)

log = logging.getLogger("patchmeso")

_GL_KEYS = {f.name for f in fields(gl2d.GLConfig)} | {"mode"}

SCHEMA = {
    "run": {"seed", "threads", "out"},
    "geometry": {"n", "a", "N", "h"},
    "coupling": {"cos_ell", "q"},
    "schedule": {"delta_t", "M"},
    "sweep": {"n", "a", "delta_t", "q", "cos_ell"},
    "gl2d": _GL_KEYS,
    "comms": {"topology", "px", "py", "delta_t", "dt_micro", "t_end", "payload", "delays"},
    "figures": {"which"},
}

DEFAULTS = {
    "run": {"seed": "0", "threads": "1", "out": "out"},
    "geometry": {"n": "20", "a": "5", "N": "", "h": "1.0"},
    "coupling": {"cos_ell": "0.91", "q": "1"},
    "schedule": {"delta_t": "0.5", "M": "1"},
    "sweep": {"n": "4:20", "a": "0:n-1", "delta_t": "0.1,0.2,0.5,1.0,2.0", "q": "1", "cos_ell": "0.91"},
    "gl2d": {"mode": "meso"},
    "comms": {"topology": "grid2d_periodic", "px": "4", "py": "4", "delta_t": "0.2",
              "dt_micro": "0.001", "t_end": "0.4", "payload": "1", "delays": ""},
    "figures": {"which": "all"},
}

FIGURES = ("wavenum", "nobuff", "patch", "buff", "penetrate20", "error1", "gl")


# --- configuration -----------------------------------------------------------------

def _key_line(text, section, key):
    cur = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            cur = line[1:-1].strip()
        elif cur == section and "=" in line and line.split("=", 1)[0].strip().lower() == key.lower():
            return i
    return None


def load_config(path: str | None) -> dict:
    """Nested ``{section: {key: str}}`` with defaults filled in."""
    cfg = {s: dict(v) for s, v in DEFAULTS.items()}
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", _section_line(text, section))
        for key, value in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]", _key_line(text, section, key))
            cfg.setdefault(section, {})[key] = value.strip()
    return cfg


def _section_line(text, section):
    for i, raw in enumerate(text.splitlines(), 1):
        if raw.strip() == f"[{section}]":
            return i
    return None


def apply_overrides(cfg: dict, args) -> dict:
    flag_map = {
        "seed": [("run", "seed"), ("gl2d", "seed")],
        "out": [("run", "out")],
        "threads": [("run", "threads")],
        "n": [("geometry", "n"), ("sweep", "n")],
        "a": [("geometry", "a"), ("sweep", "a")],
        "cos_ell": [("coupling", "cos_ell"), ("sweep", "cos_ell")],
        "q": [("coupling", "q"), ("sweep", "q"), ("comms", "payload")],
        "delta_t": [("schedule", "delta_t"), ("sweep", "delta_t"), ("gl2d", "delta_t"), ("comms", "delta_t")],
        "mode": [("gl2d", "mode")],
        "which": [("figures", "which")],
    }
    for attr, targets in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            for sec, key in targets:
                cfg[sec][key] = str(val)
    for item in getattr(args, "set", None) or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got '{item}'")
        lhs, value = item.split("=", 1)
        sec, key = lhs.split(".", 1)
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"unknown key '{key}' in [{sec}]")
        cfg[sec][key] = value
    return cfg


def _num(cfg, sec, key, kind=float):
    raw = cfg[sec][key]
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{sec}] {key} = '{raw}' is not a valid {kind.__name__}") from None


_BOUND = re.compile(r"^\s*(n|-?\d+)\s*(?:([+-])\s*(\d+))?\s*$")


def _bound(text, n):
    """``"5"``, ``"n"`` or ``"n-1"`` style range ends."""
    m = _BOUND.match(text)
    if not m or (m.group(1) == "n" and n is None):
        raise ValueError(text)
    base = n if m.group(1) == "n" else int(m.group(1))
    off = int(m.group(3) or 0)
    return base - off if m.group(2) == "-" else base + off


def parse_range(spec: str, kind=float, n=None) -> list:
    """``"1,2,5"`` or ``"lo:hi"`` (inclusive integers); ``n`` may appear in bounds."""
    spec = spec.strip()
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        try:
            return list(range(_bound(lo, n), _bound(hi, n) + 1))
        except (ValueError, TypeError):
            raise ConfigError(f"bad range '{spec}'") from None
    try:
        return [kind(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad list '{spec}'") from None


def _outdir(cfg) -> str:
    out = cfg["run"]["out"]
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _open(out, name):
    return open(os.path.join(out, name), "w", newline="", encoding="utf-8")


def _geometry(cfg) -> PatchGeometry:
    n = _num(cfg, "geometry", "n", int)
    a = _num(cfg, "geometry", "a", int)
    N = _num(cfg, "geometry", "N", int) if cfg["geometry"]["N"] else 2 * n + 1
    return PatchGeometry(n, a, N, _num(cfg, "geometry", "h"))


def _gl_config(cfg) -> gl2d.GLConfig:
    kw = {}
    for f in fields(gl2d.GLConfig):
        raw = cfg["gl2d"].get(f.name)
        if raw is None or raw == "":
            continue
        if f.name == "as_printed":
            kw[f.name] = raw.lower() in ("1", "true", "yes", "on")
        elif f.name == "snapshot_times":
            kw[f.name] = tuple(parse_range(raw))
        elif f.name in ("n", "seed"):
            kw[f.name] = _num(cfg, "gl2d", f.name, int)
        else:
            kw[f.name] = _num(cfg, "gl2d", f.name)
    return gl2d.reference_config(**kw)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _write_rows(fh, header, rows):
    import csv

    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])


# --- subcommands -----------------------------------------------------------------------

def cmd_eig(cfg) -> None:
    out = _outdir(cfg)
    g = _geometry(cfg)
    c = _num(cfg, "coupling", "cos_ell")
    es = analytic_eigensystem(g, c)
    op = assemble_operator(g, c)
    num = numeric_eigensystem(op)
    lam_err, vec_err = compare_eigensystems(es, num)
    resid = verify_transition_identity(es, op, assemble_boundary_matrix(op))
    with _open(out, "eig_analytic.csv") as fh:
        write_modes_csv(es, fh)
    with _open(out, "eig_numeric.csv") as fh:
        write_modes_csv(align_modes(es, num), fh)
    with _open(out, "eig_summary.csv") as fh:
        _write_rows(fh, ["n", "a", "cos_ell", "lambda_err", "vector_err", "biorthonormality", "identity_residual"],
                    [(g.n, g.a, c, lam_err, vec_err, check_biorthonormality(es), resid)])


def cmd_evolve(cfg) -> None:
    """Trajectories under ``f = sin t`` on both edges from a smooth start."""
    out = _outdir(cfg)
    g = _geometry(cfg)
    c = _num(cfg, "coupling", "cos_ell")
    Q = _num(cfg, "coupling", "q", int)
    dt = _num(cfg, "schedule", "delta_t")
    M = _num(cfg, "schedule", "M", int)
    es = analytic_eigensystem(g, c)
    op = operator_for(es)
    prov = SinusoidalForcing()
    j = np.arange(-g.n, g.n + 1)
    u0 = np.cos(math.pi * j / (2 * g.n + 2))
    frames = meso_run(es, u0, prov, MesoSchedule(dt, M, Q), op=op, trajectory=True)
    rows = []
    for fv in frames:
        ex = exact_solution(es, u0, prov, fv.t).u if fv.t > 0 else u0
        di = direct_integrate(op, u0, prov, fv.t).u if fv.t > 0 else u0
        for i, jj in enumerate(j):
            rows.append((fv.t, int(jj), ex[i], fv.u[i], di[i], fv.u[i] - ex[i], di[i] - ex[i]))
    with _open(out, "evolve.csv") as fh:
        _write_rows(fh, ["t", "j", "exact", "meso", "direct", "meso_minus_exact", "direct_minus_exact"], rows)


def _sweep(ns, a_spec, dts, Qs, cos_ells, threads):
    def one(n):
        skipped = []
        r, e = errbound.bound_sweep([n], parse_range(a_spec, int, n), dts, Qs, cos_ells, skipped)
        return r, e, skipped

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(one, ns))
    r_rows = sorted(x for p in parts for x in p[0])
    e_rows = sorted(x for p in parts for x in p[1])
    for _, _, skipped in parts:
        for n, a, c, msg in skipped:
            print(f"skipped degenerate geometry n={n} a={a} cos_ell={c}: {msg}", file=sys.stderr)
    return r_rows, e_rows


def cmd_bounds(cfg, r_name="bounds_R.csv", e_name="bounds_E.csv") -> None:
    out = _outdir(cfg)
    sw = cfg["sweep"]
    r_rows, e_rows = _sweep(parse_range(sw["n"], int), sw["a"], parse_range(sw["delta_t"]),
                            parse_range(sw["q"], int), parse_range(sw["cos_ell"]),
                            _num(cfg, "run", "threads", int))
    with _open(out, r_name) as fh:
        errbound.write_sweep_csv(r_rows, errbound.R_HEADER, fh)
    with _open(out, e_name) as fh:
        errbound.write_sweep_csv(e_rows, errbound.E_HEADER, fh)


def _fig_vectors(out, name, n, a, c, ks):
    es = analytic_eigensystem(PatchGeometry(n, a, 2 * n + 1), c).sorted_by_k()
    rows = []
    for k in ks:
        m = es.mode(k)
        for j in range(-n, n + 1):
            rows.append((k, j, m.v[j + n], m.z[j + n]))
    with _open(out, f"fig_{name}.csv") as fh:
        _write_rows(fh, ["k", "j", "v", "z"], rows)


def _fig_wavenum(out, n=20, a=5, c=0.91):
    es = analytic_eigensystem(PatchGeometry(n, a, 2 * n + 1), c).sorted_by_k()
    rows = []
    for k, l, lam in zip(es.k, es.l, es.lam):
        family = 1 if k <= 2 * (n - a - 1) else 2
        scale = 2 * (n - a) if family == 1 else 2 * a + 1
        rows.append((int(k), family, l, scale, l / scale, lam))
    with _open(out, "fig_wavenum.csv") as fh:
        _write_rows(fh, ["k", "family", "l_k", "scale", "l_scaled", "lambda_k"], rows)


def _fig_gl(cfg, out):
    base = replace(_gl_config(cfg), seed=_num(cfg, "run", "seed", int))
    runs = [gl2d.run_gl2d(base, "continuous")]
    for dt in (0.2, 0.1):
        runs.append(gl2d.run_gl2d(replace(base, delta_t=dt), "meso"))
    with _open(out, "fig_gl_macro.csv") as fh:
        for i, r in enumerate(runs):
            gl2d.write_macro_csv(r, fh, header=i == 0)
    with _open(out, "fig_gl_fields_continuous.csv") as fh:
        gl2d.write_fields_csv(runs[0], fh)
    with _open(out, "fig_gl_fields_meso.csv") as fh:
        gl2d.write_fields_csv(runs[1], fh)


def cmd_figures(cfg) -> None:
    out = _outdir(cfg)
    which = cfg["figures"]["which"]
    names = FIGURES if which == "all" else [which]
    threads = _num(cfg, "run", "threads", int)
    for name in names:
        if name not in FIGURES:
            raise ConfigError(f"unknown figure '{name}', choose from {', '.join(FIGURES)} or all")
        if name == "wavenum":
            _fig_wavenum(out)
        elif name == "nobuff":
            _fig_vectors(out, name, 20, 0, 0.91, range(4))
        elif name == "patch":
            _fig_vectors(out, name, 20, 5, 0.91, range(4))
        elif name == "buff":
            _fig_vectors(out, name, 20, 5, 0.91, [m + 2 * (20 - 5 - 1) for m in range(1, 5)])
        elif name == "penetrate20":
            r_rows, _ = _sweep([20], "0:19", [0.5], [1, 3, 5, 7], [0.91], threads)
            with _open(out, "fig_penetrate20.csv") as fh:
                errbound.write_sweep_csv(r_rows, errbound.R_HEADER, fh)
        elif name == "error1":
            _, e_rows = _sweep(range(4, 21), "0:n-1", [0.1, 0.2, 0.5, 1.0, 2.0], [1], [0.91], threads)
            with _open(out, "fig_error1.csv") as fh:
                errbound.write_sweep_csv(e_rows, errbound.E_HEADER, fh)
        elif name == "gl":
            _fig_gl(cfg, out)


def cmd_gl2d(cfg) -> None:
    out = _outdir(cfg)
    gc = _gl_config(cfg)
    mode = cfg["gl2d"]["mode"]
    if mode not in gl2d.MODES:
        raise ConfigError(f"mode must be one of {', '.join(gl2d.MODES)}")
    gl2d.stability_check(gc)
    run = gl2d.run_gl2d(gc, mode)
    with _open(out, "gl2d_macro.csv") as fh:
        gl2d.write_macro_csv(run, fh)
    with _open(out, "gl2d_fields.csv") as fh:
        gl2d.write_fields_csv(run, fh)


def _topology(cfg):
    kind = cfg["comms"]["topology"]
    px = _num(cfg, "comms", "px", int)
    if kind == "grid2d_periodic":
        return commsim.grid2d_periodic(px, _num(cfg, "comms", "py", int))
    if kind == "ring1d":
        return commsim.ring1d(px)
    if kind == "line1d":
        return commsim.line1d(px)
    raise ConfigError(f"unknown topology '{kind}'")


def _delays(spec):
    out = {}
    for item in filter(None, (s.strip() for s in spec.split(","))):
        try:
            edge, d = item.split(":")
            src, dst = (int(x) for x in edge.split("-"))
            out[(src, dst)] = commsim.NEVER if d.strip() in ("inf", "never") else int(d)
        except ValueError:
            raise ConfigError(f"bad delay '{item}', expected src-dst:steps") from None
    return out


def cmd_comms(cfg) -> None:
    out = _outdir(cfg)
    topo = _topology(cfg)
    t_end = _num(cfg, "comms", "t_end")
    payload = _num(cfg, "comms", "payload", int)
    meso = commsim.simulate_exchange(topo, "meso", _num(cfg, "comms", "delta_t"), t_end, payload)
    micro = commsim.simulate_exchange(topo, "micro", _num(cfg, "comms", "dt_micro"), t_end, payload)
    report = commsim.inject_delay(meso, _delays(cfg["comms"]["delays"]))
    with _open(out, "comms_meso.csv") as fh:
        commsim.write_ledger_csv(report.ledger, fh)
    with _open(out, "comms_micro.csv") as fh:
        commsim.write_ledger_csv(micro, fh)
    red = commsim.reduction_factor(micro, meso)
    with _open(out, "comms_summary.csv") as fh:
        _write_rows(fh, ["topology", "P", "cadence", "step", "messages", "scalars", "reduction"], [
            (topo.name, topo.P, "meso", meso.step, meso.total_messages, meso.total_scalars, str(red)),
            (topo.name, topo.P, "micro", micro.step, micro.total_messages, micro.total_scalars, "1"),
        ])


COMMANDS = {
    "eig": cmd_eig,
    "evolve": cmd_evolve,
    "bounds": cmd_bounds,
    "figures": cmd_figures,
    "gl2d": cmd_gl2d,
    "comms": cmd_comms,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (default ./out)")
    common.add_argument("--seed", type=int, help="RNG seed for the GL initial field")
    common.add_argument("--which", metavar="NAME", help=f"figure data to regenerate: {', '.join(FIGURES)}, all")
    common.add_argument("--delta-t", type=float, dest="delta_t", help="mesoscale step")
    common.add_argument("--q", type=int, help="Taylor order Q (comms: scalars per message)")
    common.add_argument("--n", type=int, help="patch half-width")
    common.add_argument("--a", type=int, help="core half-width")
    common.add_argument("--cos-ell", type=float, dest="cos_ell", help="coupling parameter cos(l)")
    common.add_argument("--mode", choices=gl2d.MODES, help="GL coupling mode")
    common.add_argument("--threads", type=int, help="worker threads for parameter sweeps")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override any configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="patchmeso", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "eig": "analytic and numeric spectra with the transition identity residual",
        "evolve": "exact, mesoscale and direct trajectories",
        "bounds": "remainder and macroscale error bound tables",
        "figures": "canned parameter sweeps behind the figure data sets",
        "gl2d": "2D Ginzburg-Landau patch simulation",
        "comms": "message ledger for micro and meso cadences",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        COMMANDS[args.command](cfg)
    except (PatchMesoError, ValueError, OSError) as exc:
        print(f"patchmeso {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
