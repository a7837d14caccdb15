"""Parser for the run CSV schema.

The schema contract: any number of ``# key=value`` comment lines, one
header line ``t,S_real,S_imag,norm_drift`` optionally extended by
``stderr``, then one numeric row per sample.  Errors carry the file name
and line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_BASE_COLUMNS = ["t", "S_real", "S_imag", "norm_drift"]


class CsvError(RuntimeError):
    def __init__(self, path, line_no: int | None, message: str):
        loc = f"{path}:{line_no}" if line_no is not None else str(path)
        super().__init__(f"{loc}: {message}")


@dataclass
class RunData:
    path: str
    times: np.ndarray
    s_real: np.ndarray
    s_imag: np.ndarray
    norm_drift: np.ndarray
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def label(self) -> str:
        """Short legend label assembled from the metadata echo."""
        engine = self.meta.get("engine", "run")
        bits = [engine]
        if engine == "classical" and "mode" in self.meta:
            bits.append(self.meta["mode"])
        if "gamma" in self.meta:
            try:
                bits.append(f"1/gamma={1 / float(self.meta['gamma']):g}")
            except (ValueError, ZeroDivisionError):
                bits.append(f"gamma={self.meta['gamma']}")
        if self.meta.get("n_bath"):
            bits.append(f"N={self.meta['n_bath']}")
        if engine == "ieom" and "n_max" in self.meta:
            bits.append(f"caps=({self.meta['n_max']})")
        if engine == "classical" and "samples" in self.meta:
            bits.append(f"{self.meta['samples']} samples")
        return " ".join(bits)

    def j_q(self) -> float:
        return float(self.meta.get("j_q", 1.0))


def load_run(path) -> RunData:
    meta: dict = {}
    rows: list[list[float]] = []
    header: list[str] | None = None
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
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
                if header[: len(_BASE_COLUMNS)] != _BASE_COLUMNS or len(header) > 5:
                    raise CsvError(path, line_no, f"unexpected header {line!r}")
                if len(header) == 5 and header[4] != "stderr":
                    raise CsvError(path, line_no, f"unexpected column {header[4]!r}")
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise CsvError(
                    path, line_no, f"expected {len(header)} columns, found {len(parts)}"
                )
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise CsvError(path, line_no, str(exc)) from None
    if header is None:
        raise CsvError(path, None, "no header line")
    if not rows:
        raise CsvError(path, None, "no data rows")
    data = np.asarray(rows)
    return RunData(
        path=str(path),
        times=data[:, 0],
        s_real=data[:, 1],
        s_imag=data[:, 2],
        norm_drift=data[:, 3],
        stderr=data[:, 4] if len(header) == 5 else None,
        meta=meta,
    )
