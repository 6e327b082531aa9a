"""Plain-text result artifacts.

Every run emits comma-separated files with one-line headers; column order
is fixed and documented here.  Numbers are written with ``repr``-exact
formatting so identical runs produce byte-identical files.

samples file    theta_0,...,theta_{d-1},raw_weight,normalised_weight
trace file      iteration,theta_*,kernel_mass,accepted,h,cumulative_simulator_calls
stage log       stage,h,ess_before,ess_after,resampled,move_accept_rate,cumulative_simulator_calls
diagnostics     key = value lines
manifest        a complete, re-runnable configuration file
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_samples(path, thetas, raw_weights, normalised_weights):
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    d = thetas.shape[1]
    header = ",".join([f"theta_{j}" for j in range(d)]
                      + ["raw_weight", "normalised_weight"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row, rw, nw in zip(thetas, raw_weights, normalised_weights):
            fh.write(",".join([_fmt(v) for v in row] + [_fmt(rw), _fmt(nw)]))
            fh.write("\n")


def read_samples(path):
    """Parse a samples file back into (thetas, raw, normalised)."""
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        d = sum(1 for c in cols if c.startswith("theta_"))
        if d == 0 or cols[-2:] != ["raw_weight", "normalised_weight"]:
            raise InvalidInputError(f"{path}: not a samples file (row 1)")
        thetas, raw, norm = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != d + 2:
                raise InvalidInputError(
                    f"{path}: row {lineno} has {len(parts)} fields, "
                    f"expected {d + 2}"
                )
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise InvalidInputError(
                    f"{path}: row {lineno} contains a non-numeric field"
                ) from None
            thetas.append(values[:d])
            raw.append(values[d])
            norm.append(values[d + 1])
    if not thetas:
        raise InvalidInputError(f"{path}: no sample rows")
    return np.array(thetas), np.array(raw), np.array(norm)


def write_trace(path, trace):
    d = trace.thetas.shape[1]
    header = ",".join(
        ["iteration"] + [f"theta_{j}" for j in range(d)]
        + ["kernel_mass", "accepted", "h", "cumulative_simulator_calls"]
    )
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(len(trace)):
            fields = [str(i)]
            fields += [_fmt(v) for v in trace.thetas[i]]
            fields.append(_fmt(trace.kernel_mass[i]))
            fields.append(_fmt(bool(trace.accepted[i])))
            fields.append(_fmt(trace.tolerance[i]))
            fields.append(str(int(trace.simulator_calls_cum[i])))
            fh.write(",".join(fields) + "\n")


def write_stage_log(path, records):
    header = ("stage,h,ess_before,ess_after,resampled,move_accept_rate,"
              "cumulative_simulator_calls")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for r in records:
            ess_before = getattr(r, "ess_before", getattr(r, "ess", float("nan")))
            ess_after = getattr(r, "ess_after", getattr(r, "ess", float("nan")))
            resampled = getattr(r, "resampled", False)
            move_rate = getattr(r, "move_accept_rate", float("nan"))
            h = getattr(r, "tolerance")
            fh.write(",".join([
                str(int(r.stage)), _fmt(h), _fmt(ess_before), _fmt(ess_after),
                _fmt(bool(resampled)), _fmt(move_rate),
                str(int(r.simulator_calls_cum)),
            ]) + "\n")


def write_diagnostics(path, entries):
    with open(path, "w") as fh:
        for key, value in entries.items():
            if isinstance(value, str):
                fh.write(f"{key} = {value}\n")
            else:
                fh.write(f"{key} = {_fmt(value)}\n")


def write_manifest(path, text):
    with open(path, "w") as fh:
        fh.write(text)
