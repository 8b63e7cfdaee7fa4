"""Command-line entry point: ``saddlenode <subcommand> INPUT [options]``.

Every subcommand writes a JSON report (schema ``saddlenode.report/1``)
except ``leafmap``, which writes CSV.  Module errors are reported with
their class name and give exit status 1; usage errors give 2.

INPUT is a file path or ``example:NAME`` for a bundled example.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ParseError, PoleOnRay, RejectedInput, SaddleNodeError
from .pscore import EXACT, FLOAT, format_coeff

SCHEMA = "saddlenode.report/1"
THREADS_ENV = "SADDLENODE_THREADS"
SUBCOMMANDS = ("classify", "normalize", "leafmap", "borel-sum", "stokes")
EXAMPLES = {
    "normal_form": "normal_form.field",
    "conjugated": "conjugated.field",
    "euler": "euler.field",
    "painleve1": "painleve1.json",
}


@dataclass
class JobConfig:
    subcommand: str
    input: str
    out: str | None = None
    csv: str | None = None
    plot: bool = False
    arith: str | None = None
    order: int = 8
    jet: int | None = None
    mode: str = "general"
    side: str = "lambda"
    radius: float = 1.0
    epsilon: float = 0.1
    tol: float = 1e-8
    seed: int = 0
    threads: int = 1
    options: dict = field(default_factory=dict)

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise RejectedInput(f"unknown subcommand {self.subcommand!r}")
        if self.tol <= 0:
            raise RejectedInput("tolerances must be positive")
        for name in ("order", "jet"):
            v = getattr(self, name)
            if v is not None and v < 2:
                raise RejectedInput(f"--{name} must be at least 2")
        if self.radius <= 0 or self.epsilon < 0:
            raise RejectedInput("sector radius must be positive and epsilon nonnegative")
        # the narrow sectors have opening 2*epsilon, the wide ones pi + 2*epsilon
        if not 0 < 2 * self.epsilon <= 2 * math.pi or math.pi + 2 * self.epsilon > 2 * math.pi:
            raise RejectedInput("sector openings must lie in (0, 2*pi]")
        if self.threads < 1:
            raise RejectedInput(f"{THREADS_ENV} must be a positive integer")
        if self.plot and not self.out:
            raise RejectedInput("--plot needs --out so the figure has a place to go")
        return self


# ---------------------------------------------------------------------------
# input


def read_input(spec: str) -> str:
    if spec.startswith("example:"):
        name = spec.split(":", 1)[1]
        if name not in EXAMPLES:
            raise RejectedInput(f"unknown example {name!r}; available: {', '.join(EXAMPLES)}")
        return resources.files("saddlenode").joinpath("data", EXAMPLES[name]).read_text()
    try:
        with open(spec) as fh:
            return fh.read()
    except OSError as exc:
        raise RejectedInput(f"cannot read {spec}: {exc.strerror}") from None


def load_field(cfg: JobConfig):
    from .vfield import parse_field
    text = read_input(cfg.input)
    if text.lstrip().startswith("{"):
        info = json.loads(text)
        raise RejectedInput(f"{cfg.input} holds no vector field: {info.get('status', 'data only')}")
    Y = parse_field(text)
    if cfg.arith is not None and cfg.arith != Y.mode:
        Y = Y.to_mode(cfg.arith)
    return Y


def parse_coefficients(text: str):
    """One complex number per line: ``re``, ``re im`` or a literal like ``1-2j``."""
    out = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        try:
            if len(toks) == 2:
                out.append(complex(float(toks[0]), float(toks[1])))
            elif len(toks) == 1:
                out.append(complex(toks[0].replace("i", "j")))
            else:
                raise ValueError
        except ValueError:
            raise ParseError(f"cannot read a complex number from {line!r}", i) from None
    if not out:
        raise ParseError("no coefficients found", None)
    return out


def _enc(z):
    z = complex(z)
    return [z.real, z.imag]


def _coeff(c, mode):
    return list(format_coeff(c, mode))


def _series_table(s, mode):
    return [[*e, *_coeff(c, mode)] for e, c in sorted(s.items())]


def nf_dict(nf):
    mode = nf.mode
    return {
        "lambda": _coeff(nf.lam, mode),
        "a1": _coeff(nf.a1, mode),
        "a2": _coeff(nf.a2, mode),
        "c1": [_coeff(c, mode) for c in nf.c1.coeffs],
        "c2": [_coeff(c, mode) for c in nf.c2.coeffs],
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_classify(cfg: JobConfig):
    from .vfield import classify
    Y = load_field(cfg)
    jet = cfg.jet if cfg.jet is not None else Y.trunc
    rep = classify(Y, jet)
    return {"mode": Y.mode, "jet_order": jet, "classification": rep.to_dict()}


def cmd_normalize(cfg: JobConfig):
    from .normalizer import (normalize, normalize_div_integrable, normalize_symplectic,
                             symplectic_defect, verify_normalization)
    Y = load_field(cfg)
    if cfg.mode == "general":
        phi, nf = normalize(Y, cfg.order)
    elif cfg.mode == "div":
        phi, nf = normalize_div_integrable(Y, cfg.order, cfg.tol)
    else:
        phi, nf = normalize_symplectic(Y, cfg.order, cfg.tol)
    residual = verify_normalization(Y, phi, nf, cfg.order)
    report = {
        "mode": Y.mode,
        "order": cfg.order,
        "normalization_mode": cfg.mode,
        "normal_form": nf_dict(nf),
        "phi": {"phi1": _series_table(phi.phi1, Y.mode), "phi2": _series_table(phi.phi2, Y.mode)},
        "residual": residual,
    }
    if cfg.mode == "symplectic":
        report["det_defect"] = symplectic_defect(phi, cfg.order - 2)
    if cfg.csv:
        with open(cfg.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component", "k0", "k1", "k2", "re", "im"])
            for name in ("phi1", "phi2"):
                for row in report["phi"][name]:
                    w.writerow([name, *row])
    return report


def _leaf_rows(cfg: JobConfig):
    from .leafspace import LeafChart, first_integrals, sector_for
    from .normalizer import normalize_div_integrable
    Y = load_field(cfg)
    _, nf = normalize_div_integrable(Y, cfg.order, cfg.tol)
    lam = complex(nf.to_mode(FLOAT).lam)
    sector = sector_for(lam, cfg.side, cfg.radius, cfg.epsilon)
    chart = LeafChart(nf, sector)
    opt = cfg.options
    rng = np.random.default_rng(cfg.seed)
    rs = np.geomspace(0.9 * cfg.radius, opt["rmin"] * cfg.radius, opt["nr"])
    hw = min(0.95 * sector.half_width, math.pi)
    angles = sector.theta + np.linspace(-hw, hw, opt["nangle"])
    xs = (rs[:, None] * np.exp(1j * angles[None, :])).ravel()
    rows = []
    for x in xs:
        k = opt["npts"]
        r = opt["yradius"] * np.sqrt(rng.random((2, k)))
        y = r * np.exp(2j * np.pi * rng.random((2, k)))
        h1, h2, w = first_integrals(chart, np.full(k, x), y[0], y[1])
        for i in range(k):
            rows.append((x, y[0][i], y[1][i], h1[i], h2[i], w[i]))
    return rows


def cmd_leafmap(cfg: JobConfig):
    rows = _leaf_rows(cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = ("x", "y1", "y2", "h1", "h2", "w")
    w.writerow([f"{n}_{p}" for n in names for p in ("re", "im")])
    for row in rows:
        w.writerow([f"{v:.17g}" for z in row for v in (z.real, z.imag)])
    if cfg.plot:
        from .plots import leaf_scatter
        leaf_scatter(rows, _png(cfg.out))
    return buf.getvalue()


def cmd_borel_sum(cfg: JobConfig):
    from .summation import (borel_transform, gevrey_fit, laplace_sum_detailed,
                            lateral_jump, series_from_complex, singular_directions)
    opt = cfg.options
    coeffs = parse_coefficients(read_input(cfg.input))
    f = series_from_complex(coeffs)
    b = borel_transform(f)
    pade = opt.get("pade")
    x = opt["x"]
    report = {
        "n_coefficients": len(coeffs),
        "theta": opt["theta"],
        "x": _enc(x),
        "singular_directions": singular_directions(b, pade),
        "certificate": gevrey_fit(coeffs).to_dict() if len(coeffs) >= 6 else None,
    }
    try:
        res = laplace_sum_detailed(b, opt["theta"], x, pade)
    except PoleOnRay as exc:
        # a jump is usually asked for across a singular direction
        if not opt.get("jump"):
            raise
        report.update(value=None, theta_used=None, error_estimate=None,
                      poles=[] if exc.pole is None else [_enc(exc.pole)], sum_error=str(exc))
    else:
        report.update(value=_enc(res.value), theta_used=res.theta_used,
                      error_estimate=res.error_estimate, poles=[_enc(p) for p in res.poles])
    if opt.get("jump"):
        eps = opt["eps"]
        report["jump"] = {"eps": eps, "value": _enc(lateral_jump(b, opt["theta"], eps, x, pade))}
    return report


def cmd_stokes(cfg: JobConfig):
    from .stokes import CircleSpec, stokes_pipeline
    Y = load_field(cfg)
    opt = cfg.options
    circle = CircleSpec(opt["circle"], opt["circle"])
    runs = []
    rows = []
    for x_abs in opt["grid"]:
        run = stokes_pipeline(Y, cfg.order, opt["nmax"], opt["worder"], x_abs=x_abs,
                              circle=circle, tol=cfg.tol, epsilon=cfg.epsilon,
                              threads=cfg.threads)
        runs.append({
            "x_abs": x_abs,
            "stokes_data": {side: d.to_dict() for side, d in run.data.items()},
            "moduli": run.report.to_dict(),
        })
        for d in run.data.values():
            rows.extend((x_abs, *r) for r in d.rows())
        last = run
    if cfg.csv:
        with open(cfg.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_abs", "side", "j", "n", "k", "re", "im", "err"])
            w.writerows(rows)
    if cfg.plot:
        from .plots import stokes_bars
        stokes_bars(last.data, _png(cfg.out))
    return {"order": cfg.order, "n_max": opt["nmax"], "w_order": opt["worder"],
            "normal_form": nf_dict(last.nf.to_mode(FLOAT)), "runs": runs}


COMMANDS = {
    "classify": cmd_classify,
    "normalize": cmd_normalize,
    "leafmap": cmd_leafmap,
    "borel-sum": cmd_borel_sum,
    "stokes": cmd_stokes,
}


# ---------------------------------------------------------------------------
# argument handling


def _png(out):
    return os.path.splitext(out)[0] + ".png"


def _complex_arg(s):
    try:
        return complex(s.replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {s!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="saddlenode", description=__doc__.splitlines()[0])
    p.add_argument("--list-examples", action="store_true", help="list bundled inputs and exit")
    sub = p.add_subparsers(dest="subcommand")

    def common(sp, field_input=True):
        sp.add_argument("input", help="input file or example:NAME")
        sp.add_argument("--out", help="report path (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)
        if field_input:
            sp.add_argument("--arith", choices=(EXACT, FLOAT))

    sp = sub.add_parser("classify", help="residue and classification predicates")
    common(sp)
    sp.add_argument("--jet", type=int, help="jet order of the orbital test (default: trunc_order)")

    sp = sub.add_parser("normalize", help="formal normal form and normalizing map")
    common(sp)
    sp.add_argument("--order", type=int, default=8)
    sp.add_argument("--mode", choices=("general", "div", "symplectic"), default="general")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--csv", help="also write the map's coefficient table here")

    sp = sub.add_parser("leafmap", help="first integrals on a grid, as CSV")
    common(sp)
    sp.add_argument("--order", type=int, default=8)
    sp.add_argument("--side", choices=("lambda", "-lambda", "plus", "minus"), default="plus")
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--nr", type=int, default=8, help="radii per ray")
    sp.add_argument("--nangle", type=int, default=9, help="rays across the sector")
    sp.add_argument("--npts", type=int, default=4, help="random y samples per x")
    sp.add_argument("--rmin", type=float, default=0.05, help="smallest |x| as a fraction of the radius")
    sp.add_argument("--yradius", type=float, default=0.5)
    sp.add_argument("--plot", action="store_true", help="write a PNG next to --out")

    sp = sub.add_parser("borel-sum", help="Borel-Pade-Laplace sum of a coefficient list")
    common(sp, field_input=False)
    sp.add_argument("--theta", type=float, default=0.0)
    sp.add_argument("--x", type=_complex_arg, default=0.1)
    sp.add_argument("--pade", type=int, nargs=2, metavar=("L", "M"))
    sp.add_argument("--jump", action="store_true", help="also report the lateral jump at theta")
    sp.add_argument("--eps", type=float, default=0.05)

    sp = sub.add_parser("stokes", help="Stokes data and moduli report")
    common(sp)
    sp.add_argument("--order", type=int, default=12)
    sp.add_argument("--nmax", type=int, default=6)
    sp.add_argument("--worder", type=int, default=4)
    sp.add_argument("--grid", type=float, nargs="+", default=[1.0], metavar="XABS",
                    help="|x| of the tabulation points")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--epsilon", type=float, default=0.3)
    sp.add_argument("--circle", type=float, default=0.5, help="leaf-space circle radius")
    sp.add_argument("--csv", help="coefficient tables as CSV")
    sp.add_argument("--plot", action="store_true", help="write a PNG next to --out")
    return p


def config_from_args(args, env=os.environ) -> JobConfig:
    try:
        threads = int(env.get(THREADS_ENV, "1"))
    except ValueError:
        raise RejectedInput(f"{THREADS_ENV} must be an integer") from None
    known = {"subcommand", "input", "out", "csv", "plot", "arith", "order", "jet", "mode",
             "side", "radius", "epsilon", "tol", "seed", "list_examples"}
    cfg = JobConfig(
        subcommand=args.subcommand,
        input=args.input,
        out=args.out,
        csv=getattr(args, "csv", None),
        plot=getattr(args, "plot", False),
        arith=getattr(args, "arith", None),
        order=getattr(args, "order", 8),
        jet=getattr(args, "jet", None),
        mode=getattr(args, "mode", "general"),
        side=getattr(args, "side", "lambda"),
        radius=getattr(args, "radius", 1.0),
        epsilon=getattr(args, "epsilon", 0.1),
        tol=getattr(args, "tol", 1e-8),
        seed=args.seed,
        threads=threads,
        options={k: v for k, v in vars(args).items() if k not in known},
    )
    return cfg.validate()


def _dump(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(cfg: JobConfig) -> int:
    """Execute one job; returns the exit status."""
    head = {"schema": SCHEMA, "command": cfg.subcommand, "input": cfg.input}
    try:
        result = COMMANDS[cfg.subcommand](cfg)
    except SaddleNodeError as exc:
        _emit(_dump({**head, "status": "error", "error": exc.to_dict()}), cfg.out)
        print(f"saddlenode {cfg.subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if isinstance(result, str):
        _emit(result, cfg.out)
    else:
        _emit(_dump({**head, "status": "ok", **result}), cfg.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_examples:
        for name, fname in EXAMPLES.items():
            print(f"example:{name}\t{fname}")
        return 0
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = config_from_args(args)
    except SaddleNodeError as exc:
        print(f"saddlenode: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
