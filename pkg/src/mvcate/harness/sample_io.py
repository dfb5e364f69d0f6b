"""CSV export and import of observational samples."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from ..core import ObservationalSample, TreatmentLevels


def sample_to_csv(sample: ObservationalSample, path=None) -> str:
    """Columns ``x0..x{d-1}, treatment_idx, treatment, outcome``; floats as shortest round-trip reprs."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow([f"x{j}" for j in range(sample.d)] + ["treatment_idx", "treatment", "outcome"])
    t = sample.treatment
    for i in range(sample.n):
        row = [repr(float(v)) for v in sample.covariates[i]]
        row += [str(int(sample.treatment_idx[i])), repr(float(t[i])), repr(float(sample.outcome[i]))]
        writer.writerow(row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, newline="")
    return text


def sample_from_csv(path_or_text, levels: TreatmentLevels | None = None) -> ObservationalSample:
    """Inverse of :func:`sample_to_csv`.

    Without ``levels`` the level values are recovered from the
    ``(treatment_idx, treatment)`` pairs, which requires every level to
    appear at least once.
    """
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[-3:] != ["treatment_idx", "treatment", "outcome"]:
        raise ValueError("expected columns x0..x{d-1}, treatment_idx, treatment, outcome")
    d = len(header) - 3
    X, idx, tv, y = [], [], [], []
    for line_no, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise ValueError(f"row {line_no}: expected {len(header)} cells")
        X.append([float(v) for v in rec[:d]])
        idx.append(int(rec[d]))
        tv.append(float(rec[d + 1]))
        y.append(float(rec[d + 2]))
    idx_arr = np.asarray(idx, dtype=np.int64)
    if levels is None:
        if idx_arr.size == 0:
            raise ValueError("cannot infer levels from an empty file")
        K = int(idx_arr.max())
        values = [None] * (K + 1)
        for k, t in zip(idx, tv):
            if values[k] is None:
                values[k] = t
            elif values[k] != t:
                raise ValueError(f"level {k} has inconsistent values {values[k]} and {t}")
        if any(v is None for v in values):
            raise ValueError("some levels have no rows; pass levels explicitly")
        levels = TreatmentLevels(tuple(values))
    X_arr = np.asarray(X, dtype=float).reshape(len(y), d)
    return ObservationalSample(X_arr, idx_arr, np.asarray(y, dtype=float), levels)
