"""File formats and deterministic serialization.

Matrix CSV format (shared by every command): first line ``rows,cols``,
then one comma-separated row per line, ``.`` radix, no header names.
Lines starting with ``#`` are comments and are skipped on input. Vectors
are single-column matrices.

All numbers are emitted with 17 significant digits, which round-trips
float64 exactly, so re-ingesting an emitted document and re-serializing
it reproduces the same bytes. JSON documents are written by a small
recursive emitter with a fixed key order and fixed float formatting;
wall-clock information never enters a document body (it goes to the
sidecar log), keeping reruns byte-identical.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from .errors import ValidationError


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValidationError("cannot serialize non-finite number")
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def dumps_json(doc) -> str:
    """Serialize dicts/lists/numbers/strings/None with stable formatting."""
    out: list[str] = []
    _emit(doc, out, 0)
    out.append("\n")
    return "".join(out)


def _emit(value, out, indent):
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        items = list(value.items())
        for i, (key, sub) in enumerate(items):
            out.append(f'{pad}  {json.dumps(str(key))}: ')
            _emit(sub, out, indent + 1)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        seq = list(value)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, sub in enumerate(seq):
            out.append(pad + "  ")
            _emit(sub, out, indent + 1)
            out.append(",\n" if i + 1 < len(seq) else "\n")
        out.append(pad + "]")
    elif isinstance(value, bool) or value is None:
        out.append("true" if value is True else "false" if value is False else "null")
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        out.append(format_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    else:
        raise ValidationError(f"cannot serialize {type(value).__name__}")


def loads_json(text: str):
    return json.loads(text)


# ---------------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------------

def atomic_write(path: str, text: str):
    """Write via a temp file and rename, so failures leave no partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Matrix CSV
# ---------------------------------------------------------------------------

def write_matrix_csv(path: str, a: np.ndarray, header_comment: str | None = None):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValidationError("can only write 1-D or 2-D arrays")
    lines = []
    if header_comment:
        lines.append(f"# {header_comment}")
    lines.append(f"{a.shape[0]},{a.shape[1]}")
    for row in a:
        lines.append(",".join(format_float(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def matrix_from_csv_text(text: str, origin: str = "<string>") -> np.ndarray:
    rows = cols = None
    data: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if rows is None:
            if len(parts) != 2:
                raise ValidationError(
                    f"{origin}, line {lineno}: expected header 'rows,cols'")
            try:
                rows, cols = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValidationError(
                    f"{origin}, line {lineno}: non-integer dimensions") from exc
            if rows < 1 or cols < 1:
                raise ValidationError(
                    f"{origin}, line {lineno}: dimensions must be >= 1")
            continue
        if len(parts) != cols:
            raise ValidationError(
                f"{origin}, line {lineno}: expected {cols} values, got {len(parts)}")
        try:
            data.append([float(v) for v in parts])
        except ValueError as exc:
            raise ValidationError(
                f"{origin}, line {lineno}: non-numeric value") from exc
        if len(data) > rows:
            raise ValidationError(
                f"{origin}, line {lineno}: more rows than declared")
    if rows is None:
        raise ValidationError(f"{origin}: empty matrix file")
    if len(data) != rows:
        raise ValidationError(
            f"{origin}: declared {rows} rows but found {len(data)}")
    a = np.array(data, dtype=float)
    if not np.isfinite(a).all():
        raise ValidationError(f"{origin}: matrix entries must be finite")
    return a


def read_matrix_csv(path: str) -> np.ndarray:
    try:
        with open(path, "r") as handle:
            text = handle.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    return matrix_from_csv_text(text, origin=path)


def read_vector_csv(path: str) -> np.ndarray:
    a = read_matrix_csv(path)
    if a.shape[1] == 1:
        return a[:, 0]
    if a.shape[0] == 1:
        return a[0, :]
    raise ValidationError(f"{path}: expected a vector, got shape {a.shape}")


# ---------------------------------------------------------------------------
# Report documents
# ---------------------------------------------------------------------------

def report_to_doc(report) -> dict:
    """InferenceReport as the fixed JSON schema."""
    diag = report.diagnostics
    return {
        "b_hat": [float(v) for v in report.b_hat],
        "se": [float(v) for v in report.se],
        "ci_lower": [float(v) for v in report.ci_lower],
        "ci_upper": [float(v) for v in report.ci_upper],
        "p_values": [float(v) for v in report.p_values],
        "alpha": float(report.alpha),
        "variance_mode": report.variance_mode,
        "diagnostics": {
            "d1_stat": float(diag.d1_stat),
            "b1_min": float(diag.b1_min),
            "sigma_eps_hat": float(diag.sigma_eps_hat),
            "lambda_used": float(diag.lambda_used),
            "lambda_x_used": float(diag.lambda_x_used),
        },
    }


def coverage_to_doc(report) -> dict:
    """CoverageReport as JSON (wall time goes to the sidecar log, not here)."""
    return {
        "avgcov_s0": report.avgcov_s0,
        "avgcov_s0c": report.avgcov_s0c,
        "avglen_s0": report.avglen_s0,
        "avglen_s0c": report.avglen_s0c,
        "replicates_used": report.replicates_used,
        "failed_replicates": report.failed_replicates,
        "invalid": report.invalid,
        "scenario": dict(report.scenario),
        "per_coordinate": [
            {"j": row.j, "beta0": row.beta0, "coverage": row.coverage,
             "mean_length": row.mean_length}
            for row in report.per_coordinate
        ],
    }


def write_per_coordinate_csv(path: str, report):
    lines = ["j,beta0,coverage,mean_length"]
    for row in report.per_coordinate:
        lines.append(f"{row.j},{format_float(row.beta0)},"
                     f"{format_float(row.coverage)},{format_float(row.mean_length)}")
    atomic_write(path, "\n".join(lines) + "\n")


def write_curve_csv(path: str, curve):
    lines = ["r,norm_r"]
    for r, v in zip(curve.r_grid, curve.norms):
        lines.append(f"{format_float(r)},{format_float(v)}")
    atomic_write(path, "\n".join(lines) + "\n")


def write_curves_csv(path: str, curves):
    lines = ["run,r,norm_r"]
    for run, curve in enumerate(curves):
        for r, v in zip(curve.r_grid, curve.norms):
            lines.append(f"{run},{format_float(r)},{format_float(v)}")
    atomic_write(path, "\n".join(lines) + "\n")


def write_beta_csv(path: str, beta, mc_se=None, header_comment: str | None = None):
    """Coefficient table with 1-based coordinate labels."""
    lines = []
    if header_comment:
        lines.append(f"# {header_comment}")
    if mc_se is None:
        lines.append("j,beta0")
        for j, value in enumerate(beta, start=1):
            lines.append(f"{j},{format_float(value)}")
    else:
        lines.append("j,beta0,mc_se")
        for j, (value, se) in enumerate(zip(beta, mc_se), start=1):
            lines.append(f"{j},{format_float(value)},{format_float(se)}")
    atomic_write(path, "\n".join(lines) + "\n")
