"""Sampled autocorrelation curves and their CSV round-trip.

One CSV per run: comment lines ``# key=value`` carrying the full parameter
echo, a header ``t,S_real,S_imag,norm_drift[,stderr]``, then one row per
sample written with 17 significant digits so values survive a round trip
bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass
class TimeSeries:
    times: np.ndarray
    values: np.ndarray          # complex S(t)
    norm_drift: np.ndarray
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        self.norm_drift = np.asarray(self.norm_drift, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
        if not (len(self.times) == len(self.values) == len(self.norm_drift)):
            raise ParameterError("column lengths differ")
        if self.stderr is not None and len(self.stderr) != len(self.times):
            raise ParameterError("column lengths differ")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ParameterError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


def write_csv(ts: TimeSeries, path) -> None:
    with open(path, "w", newline="\n") as fh:
        for key in sorted(ts.meta):
            fh.write(f"# {key}={ts.meta[key]}\n")
        cols = "t,S_real,S_imag,norm_drift"
        if ts.stderr is not None:
            cols += ",stderr"
        fh.write(cols + "\n")
        for i in range(len(ts)):
            row = [
                ts.times[i],
                ts.values[i].real,
                ts.values[i].imag,
                ts.norm_drift[i],
            ]
            if ts.stderr is not None:
                row.append(ts.stderr[i])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_csv(path) -> TimeSeries:
    meta: dict = {}
    rows = []
    header = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = val.strip()
                continue
            if header is None:
                header = line.split(",")
                if header[:4] != ["t", "S_real", "S_imag", "norm_drift"]:
                    raise ParameterError(f"unrecognized CSV header in {path}: {header}")
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise ParameterError(f"no data rows in {path}")
    data = np.array(rows)
    if data.shape[1] != len(header):
        raise ParameterError(f"ragged rows in {path}")
    stderr = data[:, 4] if len(header) == 5 else None
    return TimeSeries(
        times=data[:, 0],
        values=data[:, 1] + 1j * data[:, 2],
        norm_drift=data[:, 3],
        stderr=stderr,
        meta=meta,
    )
