"""Sampled power-spectrum traces and their file format.

A trace is a frequency grid (Hz, strictly increasing) plus spectral
noise powers in dBm, as exported by a spectrum analyzer.  The on-disk
format is UTF-8 CSV with header ``frequency_hz,power_dbm``, one sample
per row; lines starting with ``#`` are comments.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, RangeError, TraceParseError

TRACE_HEADER = ("frequency_hz", "power_dbm")

RESAMPLE_METHODS = ("nearest", "linear")


def _as_readonly_f64(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Trace:
    """One sampled spectrum: frequencies in Hz, powers in dBm."""

    frequencies: np.ndarray
    powers: np.ndarray
    label: str = ""

    def __post_init__(self):
        freqs = _as_readonly_f64(self.frequencies, "frequencies")
        powers = _as_readonly_f64(self.powers, "powers")
        if len(freqs) != len(powers):
            raise ValueError("frequencies and powers must have equal length")
        if len(freqs) < 2:
            raise ValueError("a trace needs at least 2 samples")
        if not np.all(np.isfinite(freqs)):
            raise ValueError("frequencies must be finite")
        if not np.all(freqs > 0.0):
            raise ValueError("frequencies must be positive")
        if not np.all(np.diff(freqs) > 0.0):
            raise ValueError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(powers)):
            raise ValueError("powers must be finite (no NaN/Inf)")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "powers", powers)

    def __len__(self) -> int:
        return len(self.frequencies)

    def with_powers(self, powers, label: str | None = None) -> "Trace":
        return Trace(self.frequencies, powers, self.label if label is None else label)


@dataclass(frozen=True)
class CorrectedTrace:
    """Dark-corrected trace; points that corrected to <= 0 linear power are invalid.

    ``powers_dbm`` is NaN wherever ``valid`` is False.
    """

    frequencies: np.ndarray
    powers_dbm: np.ndarray
    valid: np.ndarray
    policy: str
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "frequencies", _as_readonly_f64(self.frequencies, "frequencies"))
        powers = np.asarray(self.powers_dbm, dtype=np.float64).copy()
        powers.setflags(write=False)
        object.__setattr__(self, "powers_dbm", powers)
        valid = np.asarray(self.valid, dtype=bool).copy()
        valid.setflags(write=False)
        object.__setattr__(self, "valid", valid)

    def to_trace(self) -> Trace:
        """Strict conversion; only possible when every point is valid."""
        if not np.all(self.valid):
            raise ValueError("corrected trace contains invalid points")
        return Trace(self.frequencies, self.powers_dbm, self.label)


def same_grid(a, b) -> bool:
    """Exact grid equality; resampling is always an explicit step."""
    fa, fb = np.asarray(a.frequencies), np.asarray(b.frequencies)
    return fa.shape == fb.shape and np.array_equal(fa, fb)


def require_same_grid(*traces) -> None:
    first = traces[0]
    for other in traces[1:]:
        if not same_grid(first, other):
            raise GridMismatchError(
                f"traces '{first.label}' and '{other.label}' are not on a common "
                "frequency grid; resample explicitly first"
            )


def resample(trace: Trace, grid, method: str = "linear") -> Trace:
    """Interpolate a trace onto ``grid`` (Hz), linearly in the dB domain.

    ``grid`` must lie inside the trace's frequency span; extrapolation
    raises :class:`RangeError`.
    """
    if method not in RESAMPLE_METHODS:
        raise ValueError(f"unknown resample method {method!r}")
    grid = np.asarray(grid, dtype=np.float64)
    f = trace.frequencies
    if grid.size and (grid.min() < f[0] or grid.max() > f[-1]):
        raise RangeError(
            f"grid [{grid.min():g}, {grid.max():g}] Hz extends beyond trace span "
            f"[{f[0]:g}, {f[-1]:g}] Hz"
        )
    if method == "linear":
        powers = np.interp(grid, f, trace.powers)
    else:
        idx = np.searchsorted(f, grid)
        idx = np.clip(idx, 1, len(f) - 1)
        left_closer = (grid - f[idx - 1]) <= (f[idx] - grid)
        idx = np.where(left_closer, idx - 1, idx)
        powers = trace.powers[idx]
    label = trace.label + f" [resampled:{method}]" if trace.label else f"[resampled:{method}]"
    return Trace(grid, powers, label)


# ---- CSV I/O ----

def read_trace_csv(path) -> Trace:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return parse_trace_csv(fh.read(), label=os.path.splitext(os.path.basename(path))[0])
    except OSError as exc:
        raise TraceParseError(f"cannot read trace file {path}: {exc}") from exc


def parse_trace_csv(text: str, label: str = "") -> Trace:
    rows = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise TraceParseError("empty trace file")
    reader = csv.reader(io.StringIO("\n".join(rows)))
    header = next(reader)
    if tuple(h.strip() for h in header) != TRACE_HEADER:
        raise TraceParseError(
            f"bad header {header!r}; expected {','.join(TRACE_HEADER)}"
        )
    freqs, powers = [], []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 2:
            raise TraceParseError(f"row {lineno}: expected 2 columns, got {len(row)}")
        try:
            freqs.append(float(row[0]))
            powers.append(float(row[1]))
        except ValueError as exc:
            raise TraceParseError(f"row {lineno}: {exc}") from exc
    try:
        return Trace(np.array(freqs), np.array(powers), label)
    except ValueError as exc:
        raise TraceParseError(str(exc)) from exc


def trace_to_csv(trace: Trace) -> str:
    lines = [",".join(TRACE_HEADER)]
    for f, p in zip(trace.frequencies, trace.powers):
        lines.append(f"{f!r},{p!r}")
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: Trace, path) -> None:
    write_text_atomic(path, trace_to_csv(trace))


def write_text_atomic(path, text: str) -> None:
    """Write-temp-then-rename so partially written files never appear."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
