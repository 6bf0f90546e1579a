"""Claim-history CSV files and parameter JSON files.

Counts files have header ``period,count`` with one row per period; claims
files have header ``period,amount`` with one row per claim. Parse problems
raise :class:`ParseError` naming the file and line.
"""

import csv
import json
import math

from .errors import DomainError
from .models import ClaimHistory, FrequencyParams, SeverityParams

__all__ = [
    "ParseError",
    "read_counts",
    "read_claims",
    "read_history",
    "write_counts",
    "write_claims",
    "write_rows",
    "load_params",
    "format_float",
]

COUNT_HEADER = ("period", "count")
CLAIM_HEADER = ("period", "amount")


class ParseError(DomainError):
    """Malformed input file."""


def format_float(x):
    """Shortest round-trip text for a float; integers pass through."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _read_table(path, header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file, expected header {','.join(header)}")
    got = tuple(c.strip().lower() for c in rows[0])
    if got != header:
        raise ParseError(f"{path} line 1: expected header {','.join(header)}, got {','.join(rows[0])}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"{path} line {lineno}: expected 2 fields, got {len(row)}")
        out.append((lineno, row[0].strip(), row[1].strip()))
    return out


def _int_field(path, lineno, text, what):
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"{path} line {lineno}: {what} {text!r} is not an integer") from None
    return value


def read_counts(path):
    """Per-period counts as ``(periods, counts)`` lists sorted by period."""
    rows = _read_table(path, COUNT_HEADER)
    seen = {}
    for lineno, period_s, count_s in rows:
        period = _int_field(path, lineno, period_s, "period")
        count = _int_field(path, lineno, count_s, "count")
        if count < 0:
            raise ParseError(f"{path} line {lineno}: negative count {count}")
        if period in seen:
            raise ParseError(f"{path} line {lineno}: period {period} repeated")
        seen[period] = count
    if not seen:
        raise ParseError(f"{path}: no data rows")
    periods = sorted(seen)
    return periods, [seen[k] for k in periods]


def read_claims(path):
    """Claim amounts as a list of ``(period, amount)`` in file order."""
    rows = _read_table(path, CLAIM_HEADER)
    out = []
    for lineno, period_s, amount_s in rows:
        period = _int_field(path, lineno, period_s, "period")
        try:
            amount = float(amount_s)
        except ValueError:
            raise ParseError(f"{path} line {lineno}: amount {amount_s!r} is not a number") from None
        if not (amount > 0 and math.isfinite(amount)):
            raise ParseError(f"{path} line {lineno}: claim amount must be positive and finite, got {amount_s}")
        out.append((period, amount))
    return out


def read_history(counts_path, claims_path=None):
    """Build a :class:`ClaimHistory`; claims are grouped onto counted periods."""
    periods, counts = read_counts(counts_path)
    if claims_path is None:
        return ClaimHistory(tuple(counts))
    groups = {k: [] for k in periods}
    for period, amount in read_claims(claims_path):
        if period not in groups:
            raise ParseError(f"{claims_path}: period {period} not present in {counts_path}")
        groups[period].append(amount)
    return ClaimHistory(tuple(counts), tuple(tuple(groups[k]) for k in periods))


def write_counts(path, counts, first_period=1):
    write_rows(path, COUNT_HEADER,
               [(first_period + i, int(c)) for i, c in enumerate(counts)])


def write_claims(path, history: ClaimHistory, first_period=1):
    rows = []
    for i, group in enumerate(history.severities):
        rows.extend((first_period + i, float(y)) for y in group)
    write_rows(path, CLAIM_HEADER, rows)


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (int, float)) else v for v in row])


def load_params(path, kind):
    """Read frequency or severity parameters from JSON.

    Accepts a flat object of parameters or one nested under ``"params"``,
    which is what the fit commands write.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if isinstance(data, dict) and isinstance(data.get("params"), dict):
        data = data["params"]
    names = ("p", "alpha1", "alpha2", "beta") if kind == "frequency" else ("nu", "mu", "delta", "sigma")
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected a JSON object with keys {', '.join(names)}")
    missing = [k for k in names if k not in data]
    if missing:
        raise ParseError(f"{path}: missing {kind} parameter(s) {', '.join(missing)}")
    try:
        values = [float(data[k]) for k in names]
    except (TypeError, ValueError):
        raise ParseError(f"{path}: {kind} parameters must be numbers") from None
    cls = FrequencyParams if kind == "frequency" else SeverityParams
    return cls(*values)
