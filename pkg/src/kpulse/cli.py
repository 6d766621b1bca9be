"""Command-line interface: ``kpulse {synth,profile,moments,grape}``.

Exit codes: 0 success, 1 usage error, 2 numerical or domain error, 3 I/O error.
"""
import argparse
import contextlib
import os
import sys

import numpy as np

from . import bloch, families, grape, io, kcurve
from .errors import DomainError, NumericalError, UsageError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
ALL_METHODS = ("exact", "toggling", "sta", "aht")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _family_args(p, positional=True):
    if positional:
        p.add_argument("family", nargs="?", choices=families.FAMILIES,
                       help="pulse family")
    p.add_argument("--nu", type=float, default=0.0, help="oscillation parameter")
    p.add_argument("--m", type=float, default=0.0, help="elliptic modulus (jacobi)")
    p.add_argument("--moduli", type=str, default=None,
                   help="comma-separated moduli (gen-jacobi)")
    p.add_argument("--n", type=int, default=1, help="polynomial index (chebyshev, excitation)")
    p.add_argument("--theta-deg", type=float, default=90.0,
                   help="target flip angle in degrees (excitation)")
    p.add_argument("--eps-trunc", type=float, default=0.0,
                   help="phase truncation fraction (amp-fixed)")
    p.add_argument("--phase-offset", type=float, default=0.0,
                   help="constant added to the phase, radians")


def _unit_args(p):
    p.add_argument("--physical", action="store_true",
                   help="scale the pulse to physical units (offsets in Hz)")
    p.add_argument("--omega-max-hz", type=float, default=1e4,
                   help="peak amplitude in Hz for --physical (default 10 kHz)")


def build_parser():
    parser = _Parser(prog="kpulse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write a pulse CSV")
    _family_args(p)
    _unit_args(p)
    p.add_argument("--samples", type=int, default=1024, help="number of CSV rows")
    p.add_argument("--rule", choices=("average", "midpoint"), default="average",
                   help="segment value: step average (default) or midpoint sample")
    p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("profile", help="cost versus offset")
    _family_args(p)
    _unit_args(p)
    p.add_argument("--pulse", help="pulse CSV instead of a family")
    p.add_argument("--dmin", type=float, default=-1.0)
    p.add_argument("--dmax", type=float, default=1.0)
    p.add_argument("--dcount", type=int, default=101)
    p.add_argument("--methods", default="exact",
                   help="comma-separated subset of exact,toggling,sta,aht")
    p.add_argument("--steps", type=int, default=4096, help="propagation steps")
    p.add_argument("--log", action="store_true", help="add a log10_J column")
    p.add_argument("--out", help="output path; with several methods the method "
                   "name is appended to the file stem")

    p = sub.add_parser("moments", help="local-robustness moments C_0..C_N")
    _family_args(p)
    p.add_argument("--pulse", help=argparse.SUPPRESS)
    p.add_argument("--N", type=int, default=4, help="highest moment index")
    p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("grape", help="phase-only GRAPE optimisation")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--init", choices=families.FAMILIES, default="amp-fixed",
                   help="initial pulse family, scaled to the config amplitude")
    _family_args(p, positional=False)
    p.set_defaults(nu=float(families.NU_250US))
    p.add_argument("--pulse", help="initial pulse CSV (physical units)")
    p.add_argument("--out", required=True, help="optimised pulse CSV")
    p.add_argument("--log-out", help="convergence log CSV (default: <out stem>_log.csv)")
    return parser


def _family_kwargs(args):
    moduli = None
    if args.moduli:
        try:
            moduli = [float(x) for x in args.moduli.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse --moduli {args.moduli!r}") from None
    return dict(nu=args.nu, m=args.m, moduli=moduli, n=args.n,
                theta=np.radians(args.theta_deg), eps_trunc=args.eps_trunc,
                phase_offset=args.phase_offset)


def _require_family(args):
    if args.family is None:
        raise UsageError("a pulse family is required")
    return args.family


@contextlib.contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _omega(args):
    if args.omega_max_hz <= 0:
        raise DomainError("--omega-max-hz must be positive")
    return 2 * np.pi * args.omega_max_hz


def cmd_synth(args):
    kw = _family_kwargs(args)
    if args.samples < 1:
        raise UsageError("--samples must be at least 1")
    pulse = families.make_pulse(_require_family(args), n_samples=args.samples, **kw)
    if args.physical:
        pulse = families.scale_pulse(pulse, _omega(args))
    with _open_out(args.out) as fh:
        io.write_pulse(fh, pulse, args.samples, args.rule)


def _method_path(out, method, several):
    if out is None or not several:
        return out
    stem, ext = os.path.splitext(out)
    return f"{stem}_{method}{ext or '.csv'}"


def cmd_profile(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in ALL_METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}; expected a subset of {ALL_METHODS}")
    if args.dcount < 1 or (args.dcount >= 2 and not args.dmin < args.dmax):
        raise UsageError("offset grid needs dmin < dmax and dcount >= 1")
    grid = np.linspace(args.dmin, args.dmax, args.dcount) if args.dcount > 1 else np.array([args.dmin])
    curve = None
    scale = 1.0
    if args.pulse:
        if args.family:
            raise UsageError("give either a family or --pulse, not both")
        with open(args.pulse, newline="") as fh:
            pulse = io.read_pulse(fh)
        if args.physical:
            scale = 2 * np.pi
    else:
        family = _require_family(args)
        kw = _family_kwargs(args)
        pulse = families.make_pulse(family, **kw)
        if args.physical:
            pulse = families.scale_pulse(pulse, _omega(args))
            scale = 2 * np.pi
        else:
            # |l| does not depend on a constant phase offset
            curve = families.make_curve(family, **kw)
    offsets = grid * scale
    several = len(methods) > 1
    traj = None
    for method in methods:
        if method == "sta":
            if curve is not None:
                prof = kcurve.sta_profile(curve, offsets)
            else:
                traj = traj or bloch.toggling_trajectory(pulse, args.steps)
                prof = kcurve.sta_profile(traj, offsets)
        else:
            prof = bloch.cost_profile(pulse, offsets, method, n_steps=args.steps)
        with _open_out(_method_path(args.out, method, several)) as fh:
            io.write_profile(fh, prof, log_column=args.log, delta_scale=scale)


def cmd_moments(args):
    if args.pulse:
        raise UsageError("moments need a k-space curve; a pulse CSV has none")
    family = _require_family(args)
    if args.N < 0:
        raise UsageError("--N must be non-negative")
    curve = families.make_curve(family, **_family_kwargs(args))
    if curve is None:
        raise UsageError(f"family {family!r} is defined as a pulse only and has no k-space curve")
    with _open_out(args.out) as fh:
        io.write_moments(fh, kcurve.local_moments(curve, args.N))


def cmd_grape(args):
    with open(args.config) as fh:
        config = io.read_grape_config(fh)
    if args.pulse:
        with open(args.pulse, newline="") as fh:
            init = io.read_pulse(fh)
    else:
        base = families.make_pulse(args.init, **_family_kwargs(args))
        scaled = families.scale_pulse(base, config.omega_max)
        init = grape.initial_segments(scaled, config)
    result = grape.grape_optimize(init, config)
    with _open_out(args.out) as fh:
        io.write_pulse(fh, result.pulse)
    log_path = args.log_out or os.path.splitext(args.out)[0] + "_log.csv"
    with _open_out(log_path) as fh:
        io.write_history(fh, result.history)


COMMANDS = {"synth": cmd_synth, "profile": cmd_profile, "moments": cmd_moments,
            "grape": cmd_grape}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: synth, profile, moments or grape")
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"kpulse: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, NumericalError, FloatingPointError) as exc:
        print(f"kpulse: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"kpulse: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
