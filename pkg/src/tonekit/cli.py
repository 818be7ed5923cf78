"""Command-line orchestration: tone | bounds | invariance | green | distortion
| bessel | spectrum-equiv.

Reports embed the toolkit version, the effective config, the seed and the mesh
size; identical configs produce byte-identical reports (floats are serialized
with 17 significant digits, no timestamps).  Exit codes: 0 success, 2 at least
one failed inequality or bracket flag, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import __version__, distortion, fields, geometry, integralops, mobius, tones

__all__ = ["main", "run", "STANDARD_CORPUS"]

# 20 corpus multipliers: linear, quadratic, products, sin/cos composites.
STANDARD_CORPUS = (
    "x",
    "y",
    "x + y",
    "2*x - y",
    "x^2",
    "y^2",
    "x^2 + y^2",
    "x*y",
    "(x + y)^2",
    "x^2 - y^2",
    "sin(x)",
    "cos(y)",
    "sin(x)*cos(y)",
    "sin(x + y)",
    "x*sin(y)",
    "cos(x)*cos(y)",
    "exp(x/2)",
    "tanh(x)",
    "sin(2*x) + cos(2*y)",
    "x*y + sin(x)",
)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return "null"
    return '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_json(obj, indent=0):
    """Deterministic JSON with 17-significant-digit floats."""
    pad = "  " * indent
    if isinstance(obj, dict):
        items = [f'{pad}  "{k}": {to_json(v, indent + 1).lstrip()}' for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        items = [to_json(v, indent + 1) for v in obj]
        return pad + "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return pad + _fmt(obj)


def _report(config, results, seed, h):
    return {
        "meta": {
            "version": __version__,
            "seed": seed,
            "h": h,
            "config": config,
        },
        "results": results,
    }


def _emit(report, out):
    text = to_json(report) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _value_result(name, value):
    return {"name": name, "value": value, "units": "dimensionless"}


def _config_echo(args, keys):
    return " ".join(f"{k}={getattr(args, k)}" for k in sorted(keys))


def _load_config_defaults(argv):
    """A `--config key=value file` supplies flags; explicit flags override
    (they come later on the synthesized command line)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2 :]
    if not rest:
        raise SystemExit("--config requires a subcommand")
    flags = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SystemExit(f"config line {line!r} is not key=value")
            k, v = line.split("=", 1)
            flags += ["--" + k.strip().replace("_", "-"), v.strip()]
    return [rest[0]] + flags + rest[1:]


def _parse_map(args, dim):
    if getattr(args, "map", None):
        text = args.map
        try:
            with open(text) as fh:
                text = fh.read()
        except OSError:
            pass
        return mobius.map_from_text(text, dim)
    if getattr(args, "affine", None):
        rows = [[float(v) for v in r.split(",")] for r in args.affine.split(";")]
        return mobius.AnalyticMap.affine(np.asarray(rows))
    raise SystemExit("no map given: use --map or --affine")


def _cmd_tone(args):
    spec = geometry.DomainSpec.parse(args.domain)
    mesh = geometry.build_mesh(spec, args.h)
    a = fields.Multiplier.from_expression(args.multiplier, spec.dim, mesh)
    res = tones.fundamental_tone(mesh, a, args.bc, seed=args.seed)
    results = [
        _value_result("mu1", res.mu1),
        _value_result("residual", res.residual),
        _value_result("n_dofs", res.n_dofs),
    ]
    cfg = _config_echo(args, ["domain", "multiplier", "h", "bc", "seed"])
    _emit(_report(cfg, results, args.seed, args.h), args.out)
    return 0


def _cmd_bessel(args):
    cn = tones.bessel_cn(args.n)
    results = [
        _value_result("c_n", cn),
        _value_result("mu1_unit_ball", cn**2),
        _value_result("effective_conformal_volume", tones.effective_conformal_volume(args.n, cn)),
    ]
    cfg = _config_echo(args, ["n", "seed"])
    _emit(_report(cfg, results, args.seed, 0.0), args.out)
    return 0


def _cmd_bounds(args):
    spec = geometry.DomainSpec.parse(args.domain)
    mesh = geometry.build_mesh(spec, args.h)
    exprs = args.multiplier if args.multiplier else list(STANDARD_CORPUS)
    results = []
    ok = True
    for src in exprs:
        a = fields.Multiplier.from_expression(src, spec.dim, mesh)
        for rep in tones.check_bounds(mesh, a, domain=spec, h=args.h, seed=args.seed):
            rec = rep.as_record()
            rec["name"] = f"{rep.inequality}[{src}]"
            results.append(rec)
            ok = ok and rep.passed
    cfg = _config_echo(args, ["domain", "h", "seed"]) + " multipliers=" + ";".join(exprs)
    _emit(_report(cfg, results, args.seed, args.h), args.out)
    return 0 if ok else 2


def _bump_suite(dim, sigma):
    centers = [
        (1.5, 0.0, 0.0),
        (1.4, 0.3, -0.2),
        (1.6, -0.25, 0.15),
        (1.45, 0.1, 0.3),
        (1.55, -0.15, -0.25),
    ]
    return [fields.gaussian_bump(c[:dim], sigma, dim) for c in centers]


def _cmd_invariance(args):
    gamma = _parse_map(args, args.n)
    results = []
    ok = True
    bumps = _bump_suite(args.n, args.sigma)[: args.count]
    a = fields.field_from_expression("x", args.n)
    for i, f in enumerate(bumps):
        if args.kind in ("energy", "both"):
            r = mobius.energy_invariance_check(gamma, f)
            results.append(_value_result(f"energy_invariance_error[bump{i}]", r.error))
            results.append(_value_result(f"energy_invariance_converged[bump{i}]", r.converged))
            ok = ok and r.converged
        if args.kind in ("flow", "both"):
            r = mobius.energy_measure_flow_check(gamma, a, f)
            results.append(_value_result(f"energy_measure_flow_error[bump{i}]", r.error))
            results.append(_value_result(f"energy_measure_flow_converged[bump{i}]", r.converged))
            ok = ok and r.converged
    cfg = _config_echo(args, ["n", "kind", "sigma", "count", "seed"]) + f" map={args.map or args.affine}"
    _emit(_report(cfg, results, args.seed, 0.0), args.out)
    return 0 if ok else 2


def _cmd_green(args):
    gamma = _parse_map(args, args.n)
    f = fields.gaussian_bump((1.5,) + (0.0,) * (args.n - 1), args.sigma, args.n)
    rng = np.random.default_rng(args.seed)
    base = np.asarray([1.5] + [0.0] * (args.n - 1))
    src = base + rng.uniform(-0.4, 0.4, size=(args.points, args.n))
    pts = gamma.apply(src)
    gerr = integralops.green_covariance_check(gamma, f, pts)
    g2 = fields.gaussian_bump((-1.2, 0.3) + (0.0,) * (args.n - 2), args.sigma, args.n)
    herr = integralops.hls_invariance_check(gamma, f, g2, args.lam)
    results = [
        _value_result("green_covariance_max_rel_error", gerr),
        _value_result("hls_invariance_rel_error", herr),
    ]
    cfg = _config_echo(args, ["n", "lam", "sigma", "points", "seed"]) + f" map={args.map or args.affine}"
    _emit(_report(cfg, results, args.seed, 0.0), args.out)
    return 0


def _cmd_distortion(args):
    spec = geometry.DomainSpec.parse(args.domain)
    gamma = _parse_map(args, spec.dim)
    rng = np.random.default_rng(args.seed)
    samples = rng.uniform(-0.9, 0.9, size=(args.samples, spec.dim))
    if spec.kind in ("disk", "ball"):
        r0 = spec.params[0]
        keep = np.linalg.norm(samples, axis=1) < 0.95 * r0
        samples = samples[keep]
    k_dir = distortion.direct_distortion(gamma, samples)
    radii = [float(v) for v in args.radii.split(",")]
    centers = [tuple(float(v) for v in c.split(",")) for c in args.centers.split(";")]
    balls = geometry.BallFamily(tuple(centers), tuple(radii))
    dirs = distortion.grid_directions(args.directions, spec.dim)
    sp = distortion.spectral_distortion(gamma, spec, balls, dirs, args.h, seed=args.seed)
    rep = distortion.bracket_check(k_dir, sp, spec.dim, tau=args.tau)
    results = [
        _value_result("k_dir", rep.k_dir),
        _value_result("k_spec", rep.k_spec),
        _value_result("c_n", rep.c_n),
        {
            "name": "bracket_upper(k_spec<=k_dir(1+tau))",
            "lhs": rep.k_spec,
            "rhs": rep.k_dir * (1 + rep.tau),
            "slack": rep.k_dir * (1 + rep.tau) - rep.k_spec,
            "pass": rep.pass_upper,
            "units": "dimensionless",
        },
        {
            "name": "bracket_lower(k_dir<=c_n*k_spec(1+tau))",
            "lhs": rep.k_dir,
            "rhs": rep.c_n * rep.k_spec * (1 + rep.tau),
            "slack": rep.c_n * rep.k_spec * (1 + rep.tau) - rep.k_dir,
            "pass": rep.pass_lower,
            "units": "dimensionless",
        },
        _value_result("family_size", rep.family_size),
        _value_result("note", rep.note),
    ]
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["ball_center", "radius", "direction", "mu_num", "mu_den", "ratio"])
            for row in rep.rows:
                w.writerow(
                    [
                        " ".join(format(c, ".17g") for c in row[0]),
                        format(row[1], ".17g"),
                        " ".join(format(c, ".17g") for c in row[2]),
                        format(row[3], ".17g"),
                        format(row[4], ".17g"),
                        format(row[5], ".17g"),
                    ]
                )
    cfg = _config_echo(args, ["domain", "h", "radii", "centers", "directions", "tau", "samples", "seed"]) + f" map={args.map or args.affine}"
    _emit(_report(cfg, results, args.seed, args.h), args.out)
    return 0 if rep.passed else 2


def _cmd_spectrum_equiv(args):
    spec = geometry.DomainSpec.parse(args.domain)
    gamma = _parse_map(args, spec.dim)
    mesh = geometry.build_mesh(spec, args.h)
    a = fields.Multiplier.from_expression(args.multiplier, spec.dim, mesh)
    gap, sb, sa = tones.dirichlet_spectrum_equivalence(mesh, a, gamma, args.k, seed=args.seed)
    results = [_value_result("max_relative_gap", gap)]
    results += [_value_result(f"mu_image[{i}]", float(v)) for i, v in enumerate(sb)]
    results += [_value_result(f"mu_source[{i}]", float(v)) for i, v in enumerate(sa)]
    cfg = _config_echo(args, ["domain", "multiplier", "h", "k", "seed"]) + f" map={args.map or args.affine}"
    _emit(_report(cfg, results, args.seed, args.h), args.out)
    return 0


def _build_parser():
    ap = argparse.ArgumentParser(prog="tonekit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="also write the JSON report here")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("tone", help="fundamental tone of a multiplier on a domain")
    p.add_argument("--domain", required=True)
    p.add_argument("--multiplier", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--bc", choices=["neumann", "dirichlet"], default="neumann")
    common(p)
    p.set_defaults(func=_cmd_tone)

    p = sub.add_parser("bessel", help="first critical point of the radial ODE")
    p.add_argument("--n", type=int, required=True)
    common(p)
    p.set_defaults(func=_cmd_bessel)

    p = sub.add_parser("bounds", help="inequality suite for multipliers on a domain")
    p.add_argument("--domain", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--multiplier", action="append", default=None)
    common(p)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("invariance", help="conformal energy / energy-measure flow checks")
    p.add_argument("--map", default=None, help="generator lines (inline or a file path)")
    p.add_argument("--affine", default=None, help="matrix rows 'a,b;c,d'")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--kind", choices=["energy", "flow", "both"], default="both")
    p.add_argument("--sigma", type=float, default=0.15)
    p.add_argument("--count", type=int, default=2)
    common(p)
    p.set_defaults(func=_cmd_invariance)

    p = sub.add_parser("green", help="Green covariance and HLS invariance checks")
    p.add_argument("--map", default=None)
    p.add_argument("--affine", default=None)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.15)
    p.add_argument("--points", type=int, default=10)
    common(p)
    p.set_defaults(func=_cmd_green)

    p = sub.add_parser("distortion", help="direct and spectral distortion with bracket")
    p.add_argument("--domain", required=True)
    p.add_argument("--map", default=None)
    p.add_argument("--affine", default=None)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--radii", default="0.2,0.35")
    p.add_argument("--centers", default="0,0")
    p.add_argument("--directions", type=int, default=8)
    p.add_argument("--tau", type=float, default=0.02)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--csv", default=None, help="write the full ratio table here")
    common(p)
    p.set_defaults(func=_cmd_distortion)

    p = sub.add_parser("spectrum-equiv", help="Dirichlet spectra on a mesh and its pullback")
    p.add_argument("--domain", required=True)
    p.add_argument("--map", default=None)
    p.add_argument("--affine", default=None)
    p.add_argument("--multiplier", default="x")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--k", type=int, default=5)
    common(p)
    p.set_defaults(func=_cmd_spectrum_equiv)
    return ap


def run(argv):
    parser = _build_parser()
    try:
        argv = _load_config_defaults(list(argv))
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        code = e.code if isinstance(e.code, int) else 1
        return code
    except (ValueError, OSError, RuntimeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main():
    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
