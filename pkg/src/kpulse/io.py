"""CSV and config-file formats used by the command line."""
import configparser
import csv

import numpy as np

from .bloch import Pulse
from .errors import FormatError, UsageError
from .grape import GrapeConfig

PULSE_HEADER = ["t", "omega", "phi", "ux", "uy"]
GRAPE_KEYS = ("dt_us", "omega_max_hz", "grid_min_hz", "grid_max_hz", "grid_points",
              "max_iters", "grad_tol")


def _fmt(x):
    return format(float(x), ".15g")


def write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) if not isinstance(x, (int, np.integer)) else str(x) for x in row])


def pulse_rows(pulse, n_samples=1024, rule=None):
    """Rows ``t, omega, phi, ux, uy``: one per constant segment, ``t`` = segment end."""
    dt, om, ph = pulse.discretize(n_samples, rule)
    t = np.cumsum(dt)
    return np.column_stack([t, om, ph, om * np.cos(ph), om * np.sin(ph)])


def write_pulse(fh, pulse, n_samples=1024, rule=None):
    write_rows(fh, PULSE_HEADER, pulse_rows(pulse, n_samples, rule))


def read_pulse(fh, omega_max=None):
    """Piecewise-constant pulse from a pulse CSV."""
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("pulse CSV is empty") from None
    if [h.strip() for h in header] != PULSE_HEADER:
        raise FormatError(f"pulse CSV header must be {','.join(PULSE_HEADER)}")
    try:
        data = np.array([[float(x) for x in row] for row in reader if row], dtype=float)
    except ValueError as exc:
        raise FormatError(f"malformed number in pulse CSV: {exc}") from None
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != 5:
        raise FormatError("pulse CSV needs at least one row of 5 columns")
    if not np.all(np.isfinite(data)):
        raise FormatError("pulse CSV contains non-finite values")
    t = data[:, 0]
    dt = np.diff(np.concatenate([[0.0], t]))
    if np.any(dt <= 0):
        raise FormatError("pulse CSV times must be positive and strictly increasing")
    if np.any(data[:, 1] < 0):
        raise FormatError("pulse CSV amplitudes must be non-negative")
    return Pulse.piecewise(dt, data[:, 1], data[:, 2], omega_max=omega_max)


def write_profile(fh, profile, log_column=False, delta_scale=1.0):
    """``delta,J`` table; ``delta`` is divided by ``delta_scale`` on output."""
    header = ["delta", "J"]
    cols = [profile.offsets / delta_scale, profile.costs]
    if log_column:
        header.append("log10_J")
        with np.errstate(divide="ignore"):
            cols.append(np.log10(np.maximum(profile.costs, 0.0)))
    if profile.wrapped is not None:
        header.append("wrapped")
        cols.append(profile.wrapped.astype(int))
    rows = [[c[i] for c in cols] for i in range(len(profile.offsets))]
    write_rows(fh, header, rows)


def write_moments(fh, moments):
    rows = [[n, c.real, c.imag, abs(c)] for n, c in enumerate(moments.values)]
    write_rows(fh, ["n", "re", "im", "abs"], rows)


def write_history(fh, history):
    write_rows(fh, ["iter", "cost", "grad_norm"], history)


def read_grape_config(fh):
    """GRAPE settings from flat ``key = value`` lines."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[grape]\n" + fh.read())
    except configparser.Error as exc:
        raise UsageError(f"cannot parse config: {exc}") from None
    sec = parser["grape"]
    for key in GRAPE_KEYS:
        if key not in sec:
            raise UsageError(f"config key '{key}' is missing")
    unknown = set(sec) - set(GRAPE_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        return GrapeConfig.from_units(
            sec.getfloat("dt_us"), sec.getfloat("omega_max_hz"),
            sec.getfloat("grid_min_hz"), sec.getfloat("grid_max_hz"),
            sec.getint("grid_points"), max_iters=sec.getint("max_iters"),
            grad_tol=sec.getfloat("grad_tol"))
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad config value: {exc}") from None
