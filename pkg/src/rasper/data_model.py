"""Data ingestion, covariate standardization, and external risk-score ranks."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantColumn,
    EmptyData,
    MissingValue,
    NonFiniteScore,
    ParseError,
    SchemaMismatch,
)

MISSING_TOKENS = {"", "NA"}


@dataclass(frozen=True)
class RawDataset:
    """Internal-study table: outcomes, conventional and novel covariate blocks.

    ``scores`` holds the external risk scores evaluated on the conventional
    covariates, when available.
    """

    y: np.ndarray                      # (n,)
    z: np.ndarray                      # (n, q) conventional covariates
    b: np.ndarray                      # (n, p - q) novel covariates, may have 0 cols
    scores: np.ndarray | None = None   # (n,) external risk scores
    row_ids: tuple[str, ...] = ()
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        n = self.y.shape[0]
        if n < 2:
            raise EmptyData(f"need at least 2 rows, got {n}")
        if self.z.ndim != 2 or self.z.shape[0] != n or self.z.shape[1] < 1:
            raise EmptyData("conventional covariate block is empty or misshapen")
        if self.b.shape[0] != n:
            raise EmptyData("novel covariate block row count mismatch")

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def q(self):
        return self.z.shape[1]

    @property
    def p(self):
        return self.z.shape[1] + self.b.shape[1]

    @property
    def x(self):
        """Full design, conventional block first."""
        return np.hstack([self.z, self.b])


@dataclass(frozen=True)
class StandardizedDesign:
    """Column-standardized design with recoverable original-scale parameters.

    Columns have mean zero and sum of squares n - 1.
    """

    x: np.ndarray            # (n, p)
    mean: np.ndarray         # (p,)
    scale: np.ndarray        # (p,)
    q: int

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def z(self):
        return self.x[:, : self.q]

    @property
    def b(self):
        return self.x[:, self.q:]

    def destandardize(self, beta0, beta):
        """Map (intercept, coefficients) on the standardized scale back to the
        original covariate scale. Fitted values are unchanged."""
        beta = np.asarray(beta, dtype=float)
        beta_orig = beta / self.scale
        beta0_orig = float(beta0) - float(self.mean @ beta_orig)
        return beta0_orig, beta_orig

    def subset(self, rows):
        """Row subset sharing the same scaling (no restandardization)."""
        return StandardizedDesign(self.x[rows], self.mean, self.scale, self.q)


@dataclass(frozen=True)
class ExternalRanks:
    """Per-observation ranks of external risk scores by the >=-count rule."""

    r: np.ndarray            # (n,) integer ranks in 1..n
    has_ties: bool

    @property
    def n(self):
        return self.r.shape[0]


def external_ranks(scores) -> ExternalRanks:
    """Rank each score by counting how many scores it is >= to (self included).

    Distinct scores yield a permutation of 1..n; tied scores share the
    max-style rank of their tie group.
    """
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or s.shape[0] < 1:
        raise EmptyData("scores must be a nonempty 1-d array")
    if not np.all(np.isfinite(s)):
        raise NonFiniteScore("external scores contain non-finite values")
    r = (s[:, None] >= s[None, :]).sum(axis=1)
    has_ties = bool(np.unique(s).size < s.size)
    return ExternalRanks(r=r.astype(np.int64), has_ties=has_ties)


def standardize(raw: RawDataset | np.ndarray, q: int | None = None) -> StandardizedDesign:
    """Center each column and rescale so the column sum of squares is n - 1.

    Accepts either a RawDataset or a bare (n, p) array plus ``q``.
    """
    if isinstance(raw, RawDataset):
        x = raw.x
        q = raw.q
    else:
        x = np.asarray(raw, dtype=float)
        if x.ndim != 2 or x.size == 0:
            raise EmptyData("design must be a nonempty 2-d array")
        if q is None:
            q = x.shape[1]
    n = x.shape[0]
    if n < 2:
        raise EmptyData("standardization needs at least 2 rows")
    mean = x.mean(axis=0)
    centered = x - mean
    ss = (centered ** 2).sum(axis=0)
    if np.any(ss <= 0.0):
        bad = int(np.flatnonzero(ss <= 0.0)[0])
        raise ConstantColumn(f"column {bad} has zero variance")
    scale = np.sqrt(ss / (n - 1))
    return StandardizedDesign(x=centered / scale, mean=mean, scale=scale, q=int(q))


def load_schema(path) -> dict:
    """Read a JSON sidecar schema: outcome, conventional, novel, score columns."""
    with open(path, "r", encoding="utf-8") as fh:
        schema = json.load(fh)
    for key in ("outcome", "conventional"):
        if key not in schema:
            raise SchemaMismatch(f"schema missing required key {key!r}")
    schema.setdefault("novel", [])
    schema.setdefault("score", None)
    return schema


def _parse_column(rows, name, kind):
    out = np.empty(len(rows), dtype=float)
    for i, row in enumerate(rows):
        cell = row[name].strip()
        if cell in MISSING_TOKENS:
            raise MissingValue(f"missing value in column {name!r}, data row {i + 1}")
        try:
            out[i] = float(cell)
        except ValueError as exc:
            raise ParseError(f"cannot parse {cell!r} in column {name!r}, row {i + 1}") from exc
    return out


def load_dataset(path, schema: dict) -> RawDataset:
    """Load a UTF-8 CSV with a header row into a RawDataset.

    ``schema`` maps roles to column names: ``outcome`` (str), ``conventional``
    (list of str), ``novel`` (list of str), optional ``score`` (str) and
    ``id`` (str).
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ParseError(f"{path}: empty file, header row required")
            header = [h.strip() for h in reader.fieldnames]
            rows = list(reader)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if any(None in row.values() or None in row for row in rows):
        raise ParseError(f"{path}: ragged rows detected")

    used = [schema["outcome"]] + list(schema["conventional"]) + list(schema.get("novel") or [])
    if schema.get("score"):
        used.append(schema["score"])
    for name in used:
        if name not in header:
            raise SchemaMismatch(f"declared column {name!r} not present in {path}")

    rows = [{k.strip(): v for k, v in row.items()} for row in rows]
    y = _parse_column(rows, schema["outcome"], "outcome")
    z = np.column_stack([_parse_column(rows, c, "conventional") for c in schema["conventional"]])
    novel = list(schema.get("novel") or [])
    if novel:
        b = np.column_stack([_parse_column(rows, c, "novel") for c in novel])
    else:
        b = np.empty((len(rows), 0))
    scores = _parse_column(rows, schema["score"], "score") if schema.get("score") else None
    id_col = schema.get("id")
    if id_col and id_col in header:
        row_ids = tuple(row[id_col] for row in rows)
    else:
        row_ids = tuple(str(i) for i in range(len(rows)))
    return RawDataset(
        y=y, z=z, b=b, scores=scores, row_ids=row_ids,
        column_names=tuple([schema["outcome"]] + list(schema["conventional"]) + novel),
    )
