"""dB/linear power arithmetic, dark-noise correction and shot normalization.

All subtraction happens in linear power units; traces are converted from
dB, corrected, and converted back.  Both the measured trace and the shot
reference are dark-corrected before taking their ratio (the shot trace
recorded by the analyzer contains the detector's electronic noise too).
Points whose corrected power is not positive carry no information and
are flagged invalid under the default policy.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np

from .errors import EmptyResultError, TraceParseError
from .traces import CorrectedTrace, Trace, require_same_grid, write_text_atomic

POLICIES = ("flag", "raise")

NORMALIZED_HEADER = ("frequency_hz", "rel_power_db", "valid")


def db_to_lin(v):
    """10^(v/10); scalar or array."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("dB value must be finite")
    out = np.power(10.0, v / 10.0)
    return float(out) if out.ndim == 0 else out


def lin_to_db(r):
    """10*log10(r); requires r > 0 (clamping is the caller's policy)."""
    r = np.asarray(r, dtype=np.float64)
    if not np.all(r > 0.0):
        raise ValueError("linear power ratio must be > 0")
    out = 10.0 * np.log10(r)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CorrectionRecord:
    """What the normalization pipeline did to the data."""

    policy: str
    n_invalid: int
    shot_dark_corrected: bool = True


@dataclass(frozen=True)
class NormalizedSpectrum:
    """Dark-corrected noise power in dB relative to corrected shot noise."""

    frequencies: np.ndarray
    rel_power_db: np.ndarray
    valid: np.ndarray
    correction: CorrectionRecord
    label: str = ""

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=np.float64).copy()
        rel = np.asarray(self.rel_power_db, dtype=np.float64).copy()
        valid = np.asarray(self.valid, dtype=bool).copy()
        if not (len(freqs) == len(rel) == len(valid)):
            raise ValueError("field lengths differ")
        if not np.all(np.diff(freqs) > 0.0):
            raise ValueError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(rel[valid])):
            raise ValueError("rel_power_db must be finite wherever valid")
        for arr in (freqs, rel, valid):
            arr.setflags(write=False)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "rel_power_db", rel)
        object.__setattr__(self, "valid", valid)

    def __len__(self) -> int:
        return len(self.frequencies)


def _check_policy(policy: str):
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {POLICIES}")


def dark_correct(measured: Trace, dark: Trace, policy: str = "flag") -> CorrectedTrace:
    """Subtract dark noise in the linear domain, return dB.

    Points where the linear difference is <= 0 are flagged invalid
    (``policy='flag'``) or raise (``policy='raise'``).  An all-invalid
    result raises :class:`EmptyResultError` under either policy.
    """
    _check_policy(policy)
    require_same_grid(measured, dark)
    diff = db_to_lin(measured.powers) - db_to_lin(dark.powers)
    valid = diff > 0.0
    if policy == "raise" and not np.all(valid):
        raise EmptyResultError(
            f"{np.count_nonzero(~valid)} point(s) non-positive after dark correction"
        )
    if not np.any(valid):
        raise EmptyResultError("all points non-positive after dark correction")
    powers = np.full_like(diff, np.nan)
    powers[valid] = 10.0 * np.log10(diff[valid])
    return CorrectedTrace(measured.frequencies, powers, valid, policy, measured.label)


def normalize_to_shot(
    measured: Trace, shot: Trace, dark: Trace, policy: str = "flag"
) -> NormalizedSpectrum:
    """Shot-normalize a measured trace, dark-correcting numerator and denominator.

    rel = 10*log10( (lin(measured) - lin(dark)) / (lin(shot) - lin(dark)) )
    """
    _check_policy(policy)
    require_same_grid(measured, shot, dark)
    dark_lin = db_to_lin(dark.powers)
    num = db_to_lin(measured.powers) - dark_lin
    den = db_to_lin(shot.powers) - dark_lin
    valid = (num > 0.0) & (den > 0.0)
    if policy == "raise" and not np.all(valid):
        raise EmptyResultError(
            f"{np.count_nonzero(~valid)} point(s) invalid after dark correction"
        )
    if not np.any(valid):
        raise EmptyResultError("all points invalid after dark correction")
    rel = np.full_like(num, np.nan)
    rel[valid] = 10.0 * np.log10(num[valid] / den[valid])
    record = CorrectionRecord(policy=policy, n_invalid=int(np.count_nonzero(~valid)))
    return NormalizedSpectrum(measured.frequencies, rel, valid, record, measured.label)


def clearance(shot: Trace, dark: Trace) -> Trace:
    """Pointwise shot - dark in dB: how far the electronics sit below shot noise."""
    require_same_grid(shot, dark)
    return Trace(shot.frequencies, shot.powers - dark.powers, "clearance_db")


# ---- normalized-spectrum CSV (frequency_hz,rel_power_db,valid) ----

def normalized_to_csv(spec: NormalizedSpectrum) -> str:
    lines = [",".join(NORMALIZED_HEADER)]
    for f, r, v in zip(spec.frequencies, spec.rel_power_db, spec.valid):
        lines.append(f"{f!r},{r!r},{1 if v else 0}")
    return "\n".join(lines) + "\n"


def write_normalized_csv(spec: NormalizedSpectrum, path) -> None:
    write_text_atomic(path, normalized_to_csv(spec))


def read_normalized_csv(path) -> NormalizedSpectrum:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise TraceParseError(f"cannot read normalized spectrum {path}: {exc}") from exc
    label = os.path.basename(path)
    for suffix in (".normalized.csv", ".csv"):
        if label.endswith(suffix):
            label = label[: -len(suffix)]
            break
    return parse_normalized_csv(text, label=label)


def parse_normalized_csv(text: str, label: str = "") -> NormalizedSpectrum:
    rows = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise TraceParseError("empty normalized-spectrum file")
    reader = csv.reader(io.StringIO("\n".join(rows)))
    header = next(reader)
    if tuple(h.strip() for h in header) != NORMALIZED_HEADER:
        raise TraceParseError(
            f"bad header {header!r}; expected {','.join(NORMALIZED_HEADER)}"
        )
    freqs, rel, valid = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 3:
            raise TraceParseError(f"row {lineno}: expected 3 columns, got {len(row)}")
        try:
            freqs.append(float(row[0]))
            rel.append(float(row[1]))
            valid.append(bool(int(row[2])))
        except ValueError as exc:
            raise TraceParseError(f"row {lineno}: {exc}") from exc
    try:
        record = CorrectionRecord(policy="flag", n_invalid=int(sum(not v for v in valid)))
        return NormalizedSpectrum(np.array(freqs), np.array(rel), np.array(valid), record, label)
    except ValueError as exc:
        raise TraceParseError(str(exc)) from exc
