"""Command-line entry point: every capability behind one binary.

Exit codes: 0 success, 2 validation errors, 3 convergence/exclusion errors,
64 usage errors.  All numeric output is printed with 17 significant digits;
every run emits a manifest (stderr, or <out>.manifest.json with --out) that
reproduces the outputs bit for bit when replayed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__, krein, mc, poisson, walk
from .gridfn import GridFunction
from .krein import ConvergenceError, DomainError, cbf_check, mu_table, spectral_mu
from .manifest import RunManifest, digest_file
from .operators import (dtn_apply, energy_check, fraclap_multiplier,
                        fraclap_pv, harmonic_extend)
from .strings import (KreinString, StringSpecError, StringValidationError,
                      build_string, builtin)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt17(x) -> str:
    return f"{float(x):.17g}"


class Emitter:
    """Collects homogeneous rows and renders CSV or mirrored JSON."""

    def __init__(self, header: List[str], fmt: str):
        self.header = header
        self.fmt = fmt
        self.rows: List[List] = []

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError("row width mismatch")
        self.rows.append(list(row))

    def render(self) -> str:
        if self.fmt == "csv":
            out = [",".join(self.header)]
            for row in self.rows:
                out.append(",".join(v if isinstance(v, str) else fmt17(v)
                                    for v in row))
            return "\n".join(out) + "\n"
        payload = [{k: (v if isinstance(v, str) else float(fmt17(v)))
                    for k, v in zip(self.header, row)} for row in self.rows]
        return json.dumps({"rows": payload}, indent=2) + "\n"


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("KT_SEED")
    if env is not None:
        return int(env)
    return 0


def _resolve_string(args) -> KreinString:
    if getattr(args, "string", None):
        with open(args.string) as fh:
            return build_string(fh.read())
    name = getattr(args, "builtin", None)
    if not name:
        raise StringSpecError("one of --builtin or --string is required")
    params = {}
    if name == "atom":
        params = {"y0": args.atom_y0, "m": args.atom_m}
    if name == "caffarelli_silvestre":
        if args.alpha is None:
            raise StringSpecError("caffarelli_silvestre requires --alpha")
        params = {"alpha": args.alpha}
    return builtin(name, **params)


def _grid_input(args) -> GridFunction:
    if getattr(args, "infile", None):
        if args.infile.endswith(".bin"):
            with open(args.infile, "rb") as fh:
                return GridFunction.from_bytes(fh.read())
        with open(args.infile) as fh:
            return GridFunction.from_csv(fh.read(), L=args.box_l)
    d, L, N = args.dim, args.box_l, args.grid_n
    if args.function == "cos":
        k = math.pi * args.mode_k / L
        if d == 1:
            return GridFunction.from_function(lambda x: np.cos(k * x), 1, L, N)
        return GridFunction.from_function(
            lambda x, y: np.cos(k * x) * np.cos(k * y), 2, L, N)
    if args.function == "gauss":
        w = args.width
        if d == 1:
            return GridFunction.from_function(
                lambda x: np.exp(-(x / w) ** 2), 1, L, N)
        return GridFunction.from_function(
            lambda x, y: np.exp(-(x * x + y * y) / w**2), 2, L, N)
    raise StringSpecError(f"unknown function {args.function!r}")


def _write(args, text: str, manifest: RunManifest):
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
        with open(args.out + ".manifest.json", "w") as fh:
            fh.write(manifest.to_json())
    else:
        sys.stdout.write(text)
        sys.stderr.write(manifest.to_json())


def _manifest(args, sub: str, seed=None) -> RunManifest:
    cfg = {k: v for k, v in sorted(vars(args).items())
           if k not in ("func", "out") and v is not None}
    digests = {}
    if getattr(args, "string", None):
        digests[args.string] = digest_file(args.string)
    if getattr(args, "infile", None):
        digests[args.infile] = digest_file(args.infile)
    return RunManifest(sub, cfg, seed, __version__, digests)


def _lam_grid(args) -> np.ndarray:
    if args.lambda_min <= 0 or args.lambda_max < args.lambda_min:
        raise DomainError("need 0 < lambda-min <= lambda-max")
    if args.points > 1 and args.lambda_max == args.lambda_min:
        raise DomainError("degenerate lambda range needs --points 1")
    return np.geomspace(args.lambda_min, args.lambda_max, args.points)


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def cmd_string(args):
    s = _resolve_string(args)
    text = s.to_json() + "\n"
    _write(args, text, _manifest(args, "string"))


def cmd_mu(args):
    s = _resolve_string(args)
    table = mu_table(s, _lam_grid(args), rtol=args.rtol)
    em = Emitter(["lambda", "mu", "bracket_lo", "bracket_hi", "truncation_Y"],
                 args.format)
    for e in table.entries:
        em.add(e.lam, e.mu, e.bracket_lo, e.bracket_hi, e.truncation_Y)
    _write(args, em.render(), _manifest(args, "mu"))


def cmd_cbf_check(args):
    s = _resolve_string(args)
    report = cbf_check(s, _lam_grid(args), rtol=args.rtol)
    em = Emitter(["property", "passed", "worst_violation"], args.format)
    for p in report.properties:
        em.add(p.name, "true" if p.passed else "false", p.worst_violation)
    _write(args, em.render(), _manifest(args, "cbf-check"))


def cmd_extend(args):
    s = _resolve_string(args)
    f = _grid_input(args)
    u = harmonic_extend(f, s, args.y)
    _write_grid(args, u, "extend")


def cmd_dtn(args):
    s = _resolve_string(args)
    f = _grid_input(args)
    _write_grid(args, dtn_apply(f, s), "dtn")


def _write_grid(args, g: GridFunction, sub: str):
    man = _manifest(args, sub)
    if getattr(args, "out", None) and args.out.endswith(".bin"):
        with open(args.out, "wb") as fh:
            fh.write(g.to_bytes())
        with open(args.out + ".manifest.json", "w") as fh:
            fh.write(man.to_json())
    else:
        _write(args, g.to_csv(), man)


def cmd_fraclap(args):
    f = _grid_input(args)
    if args.mode == "spectral":
        _write_grid(args, fraclap_multiplier(f, args.alpha), "fraclap")
    elif args.mode == "pv":
        _write_grid(args, fraclap_pv(f, args.alpha), "fraclap")
    else:
        a = fraclap_multiplier(f, args.alpha)
        b = fraclap_pv(f, args.alpha)
        num = np.linalg.norm((a.samples - b.samples).ravel())
        den = np.linalg.norm(a.samples.ravel())
        em = Emitter(["alpha", "rel_l2_error"], args.format)
        em.add(args.alpha, num / den)
        _write(args, em.render(), _manifest(args, "fraclap"))


def cmd_poisson(args):
    em = Emitter({"eval": ["d", "alpha", "y", "x", "value"],
                  "integral": ["d", "alpha", "y", "integral"],
                  "fourier": ["xi", "transform", "target"]}[args.mode],
                 args.format)
    if args.mode == "eval":
        x = [float(v) for v in args.x.split(",")]
        val = poisson.poisson_kernel(args.dim, args.alpha, args.y_height, x)
        em.add(args.dim, args.alpha, args.y_height, args.x, val)
    elif args.mode == "integral":
        val = poisson.kernel_integral(args.dim, args.alpha, args.y_height)
        em.add(args.dim, args.alpha, args.y_height, val)
    else:
        xis, vals = poisson.kernel_fourier(args.alpha, args.y_height,
                                           modes=args.modes)
        tgt = poisson.classical_target(xis, args.y_height)
        for x, v, t in zip(xis, vals, tgt):
            em.add(x, v, t)
    _write(args, em.render(), _manifest(args, "poisson"))


def cmd_energy(args):
    s = _resolve_string(args)
    f = _grid_input(args)
    ys = np.linspace(0.0, args.y_max, args.y_points)
    form, ext = energy_check(f, s, ys)
    em = Emitter(["form_value", "extension_energy", "rel_gap"], args.format)
    em.add(form, ext, abs(form - ext) / max(abs(form), 1e-300))
    _write(args, em.render(), _manifest(args, "energy"))


def _parse_xi_list(args, d: int) -> List[tuple]:
    out = []
    for chunk in args.xi:
        vec = tuple(float(v) for v in chunk.split(","))
        if len(vec) != d:
            raise DomainError(f"xi {chunk!r} must have {d} components")
        out.append(vec)
    return out


def cmd_trace_cf(args):
    s = _resolve_string(args)
    seed = _resolve_seed(args)
    s_values = tuple(sorted(float(v) for v in args.s.split(",")))
    horizon = args.horizon or mc.suggested_horizon(max(s_values))
    cfg = mc.SimConfig(dt=args.dt, horizon=horizon, n_paths=args.paths,
                       seed=seed, s_values=s_values, workers=args.workers)
    xis = _parse_xi_list(args, 1)
    em = Emitter(["string", "xi", "s", "estimate", "stderr", "theory",
                  "abs_err", "n_paths", "dt", "excluded_frac"], args.format)
    warned = False
    for level in s_values:
        for xi in xis:
            est = mc.cf_trace_estimate(s, xi[0], level, cfg)
            lam = xi[0] ** 2
            theory = math.exp(-level * spectral_mu(s, lam).mu)
            em.add(s.label or "custom", xi[0], level, est.value, est.stderr,
                   theory, abs(est.value - theory), cfg.n_paths, cfg.dt,
                   est.excluded_frac)
            warned = warned or est.warning is not None
    _write(args, em.render(), _manifest(args, "trace-cf", seed))
    if warned:
        sys.stderr.write("warning: exclusions exceeded 1%\n")


def cmd_hit_cf(args):
    s = _resolve_string(args)
    seed = _resolve_seed(args)
    horizon = args.horizon or mc.suggested_horizon(args.y0)
    cfg = mc.SimConfig(dt=args.dt, horizon=horizon, n_paths=args.paths,
                       seed=seed, s_values=(1.0,), workers=args.workers)
    xis = _parse_xi_list(args, 1)
    em = Emitter(["string", "xi", "y0", "estimate", "stderr", "theory",
                  "abs_err", "n_paths", "dt", "excluded_frac"], args.format)
    for xi in xis:
        est = mc.cf_hitting_estimate(s, xi[0], args.y0, cfg)
        theory = krein.bounded_solution(s, xi[0] ** 2, args.y0)
        em.add(s.label or "custom", xi[0], args.y0, est.value, est.stderr,
               theory, abs(est.value - theory), cfg.n_paths, cfg.dt,
               est.excluded_frac)
    _write(args, em.render(), _manifest(args, "hit-cf", seed))


def cmd_bessel_exponent(args):
    seed = _resolve_seed(args)
    cfg = mc.SimConfig(dt=args.dt, horizon=args.horizon, n_paths=args.paths,
                       seed=seed, s_values=(1.0,), workers=args.workers)
    fit = mc.bessel_subordinator_exponent(args.alpha, cfg)
    em = Emitter(["alpha", "fitted_exponent", "half_width", "target",
                  "level", "reached_frac", "bad_frac"], args.format)
    em.add(args.alpha, fit.slope, fit.half_width, args.alpha / 2.0,
           fit.level, fit.reached_frac, fit.bad_frac)
    _write(args, em.render(), _manifest(args, "bessel-exponent", seed))


def cmd_walk(args):
    seed = _resolve_seed(args)
    cfg = walk.WalkConfig(d=args.dim, n_steps=args.steps, n_paths=args.paths,
                          seed=seed)
    xis = _parse_xi_list(args, args.dim)
    header = (["d", "j"] + [f"xi{i}" for i in range(args.dim)]
              + ["closed_form_re", "estimate", "stderr"])
    em = Emitter(header, args.format)
    run = walk.run_walk(cfg, args.j)
    for xi in xis:
        est = run.cf_estimate(xi)
        cf = walk.trace_cf_closed_form(args.dim, xi, args.j).real
        em.add(args.dim, args.j, *xi, cf, est.value, est.stderr)
    _write(args, em.render(), _manifest(args, "walk", seed))


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def _add_string_flags(p):
    p.add_argument("--builtin", help="catalog string name")
    p.add_argument("--string", help="string-spec JSON file")
    p.add_argument("--atom-y0", type=float, default=1.0)
    p.add_argument("--atom-m", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=None)


def _add_common(p):
    p.add_argument("--out", help="output file (manifest written alongside)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_grid_flags(p):
    p.add_argument("--in", dest="infile", help="grid file (.csv or .bin)")
    p.add_argument("--function", choices=("cos", "gauss"), default="gauss")
    p.add_argument("--mode-k", type=int, default=3)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--dim", type=int, choices=(1, 2), default=1)
    p.add_argument("--grid-n", type=int, default=256)
    p.add_argument("--box-l", type=float, default=20.0)


def _add_lambda_flags(p):
    p.add_argument("--lambda-min", type=float, default=0.01)
    p.add_argument("--lambda-max", type=float, default=100.0)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--rtol", type=float, default=1e-9)


def _add_mc_flags(p):
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int,
                   default=int(os.environ.get("KT_WORKERS",
                                              os.cpu_count() or 1)))


def build_parser() -> _Parser:
    root = _Parser(prog="kreintrace",
                   description="string spectral functions and boundary-trace "
                               "Monte Carlo")
    root.add_argument("--version", action="version", version=__version__)
    subs = root.add_subparsers(dest="subcommand", required=True)

    p = subs.add_parser("string", help="validate and print a string spec")
    _add_string_flags(p); _add_common(p)
    p.set_defaults(func=cmd_string)

    p = subs.add_parser("mu", help="tabulate the spectral function")
    _add_string_flags(p); _add_common(p); _add_lambda_flags(p)
    p.set_defaults(func=cmd_mu)

    p = subs.add_parser("cbf-check", help="Bernstein sign-pattern report")
    _add_string_flags(p); _add_common(p); _add_lambda_flags(p)
    p.set_defaults(func=cmd_cbf_check)

    p = subs.add_parser("extend", help="harmonic extension slice u(., y)")
    _add_string_flags(p); _add_common(p); _add_grid_flags(p)
    p.add_argument("--y", type=float, required=True)
    p.set_defaults(func=cmd_extend)

    p = subs.add_parser("dtn", help="apply the boundary-derivative operator")
    _add_string_flags(p); _add_common(p); _add_grid_flags(p)
    p.set_defaults(func=cmd_dtn)

    p = subs.add_parser("fraclap", help="fractional Laplacian")
    _add_common(p); _add_grid_flags(p)
    p.add_argument("--mode", choices=("pv", "spectral", "compare"),
                   default="compare")
    p.add_argument("--alpha", type=float, required=True)
    p.set_defaults(func=cmd_fraclap)

    p = subs.add_parser("poisson", help="boundary kernel checks")
    _add_common(p)
    p.add_argument("--mode", choices=("eval", "integral", "fourier"),
                   default="integral")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--dim", type=int, choices=(1, 2), default=1)
    p.add_argument("--y-height", type=float, default=1.0)
    p.add_argument("--x", default="0.0")
    p.add_argument("--modes", type=int, default=10)
    p.set_defaults(func=cmd_poisson)

    p = subs.add_parser("energy", help="form value vs extension energy")
    _add_string_flags(p); _add_common(p); _add_grid_flags(p)
    p.add_argument("--y-max", type=float, default=9.3)
    p.add_argument("--y-points", type=int, default=80)
    p.set_defaults(func=cmd_energy)

    p = subs.add_parser("trace-cf", help="boundary-trace characteristic function")
    _add_string_flags(p); _add_common(p); _add_mc_flags(p)
    p.add_argument("--xi", action="append", required=True)
    p.add_argument("--s", required=True, help="comma-separated levels")
    p.set_defaults(func=cmd_trace_cf)

    p = subs.add_parser("hit-cf", help="boundary-hit characteristic function")
    _add_string_flags(p); _add_common(p); _add_mc_flags(p)
    p.add_argument("--xi", action="append", required=True)
    p.add_argument("--y0", type=float, required=True)
    p.set_defaults(func=cmd_hit_cf)

    p = subs.add_parser("bessel-exponent", help="inverse-local-time exponent fit")
    _add_common(p); _add_mc_flags(p)
    p.add_argument("--alpha", type=float, required=True)
    p.set_defaults(func=cmd_bessel_exponent)
    p.set_defaults(horizon=20.0, dt=1e-5)

    p = subs.add_parser("walk", help="lattice boundary-trace statistics")
    _add_common(p)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--xi", action="append", required=True)
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--steps", type=int, default=1 << 20)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_walk)

    return root


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except (StringSpecError, StringValidationError, DomainError, ValueError,
            OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (ConvergenceError, mc.EstimateError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
