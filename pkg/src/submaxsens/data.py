"""Matched-pair records and their routing into covariate-pattern groups.

Groups are the ``G = 2**L`` cells formed by ``L`` binary covariates. Their
order is fixed: the covariate pattern is read as a binary number with
covariate 1 as the most significant bit, and patterns are listed in
descending order, so ``(1, 1, ..., 1)`` is group 0 and ``(0, ..., 0)`` is
group ``G - 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataValidationError


@dataclass(frozen=True)
class PairDifference:
    """One matched pair: treated-minus-control difference and its covariates."""

    pair_id: object
    covariates: tuple[int, ...]
    d: float


def group_of(pattern: Sequence[int]) -> int:
    """Canonical 0-based group index of a binary covariate pattern."""
    L = len(pattern)
    value = 0
    for bit in pattern:
        value = (value << 1) | int(bit)
    return (1 << L) - 1 - value


def pattern_of(group: int, L: int) -> tuple[int, ...]:
    """Inverse of :func:`group_of`."""
    value = (1 << L) - 1 - group
    return tuple((value >> (L - 1 - l)) & 1 for l in range(L))


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GroupedStudy:
    """Matched pairs partitioned into the ``2**L`` interaction groups.

    Pairs are stored in input order; ``group`` holds each pair's canonical
    group index. Empty groups are allowed.
    """

    L: int
    pair_ids: tuple
    covariates: np.ndarray
    d: np.ndarray
    group: np.ndarray
    _sizes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "covariates", _frozen(np.asarray(self.covariates, dtype=np.int8).reshape(len(self.d), self.L)))
        object.__setattr__(self, "d", _frozen(np.asarray(self.d, dtype=float)))
        object.__setattr__(self, "group", _frozen(np.asarray(self.group, dtype=np.intp)))
        object.__setattr__(self, "_sizes", _frozen(np.bincount(self.group, minlength=self.G)))

    @property
    def G(self) -> int:
        return 1 << self.L

    @property
    def n_pairs(self) -> int:
        return len(self.d)

    @property
    def sizes(self) -> np.ndarray:
        """Group sizes ``I_g`` in canonical order."""
        return self._sizes

    @property
    def group_labels(self) -> list[str]:
        return ["".join(map(str, pattern_of(g, self.L))) or "all" for g in range(self.G)]

    @property
    def groups(self) -> list[list[PairDifference]]:
        out = [[] for _ in range(self.G)]
        for i, g in enumerate(self.group):
            out[g].append(PairDifference(self.pair_ids[i], tuple(int(c) for c in self.covariates[i]), float(self.d[i])))
        return out

    def members(self, g: int) -> np.ndarray:
        """Indices (input order) of the pairs in group ``g``."""
        return np.flatnonzero(self.group == g)

    def negated(self) -> "GroupedStudy":
        """Same study with every difference sign-flipped."""
        return GroupedStudy(self.L, self.pair_ids, self.covariates, -self.d, self.group)

    def scaled(self, c: float) -> "GroupedStudy":
        return GroupedStudy(self.L, self.pair_ids, self.covariates, c * self.d, self.group)

    @classmethod
    def from_arrays(cls, d, covariates, pair_ids=None) -> "GroupedStudy":
        """Build from a difference vector and an ``n x L`` 0/1 matrix (trusted input)."""
        d = np.asarray(d, dtype=float)
        cov = np.asarray(covariates, dtype=np.int8)
        if cov.ndim != 2:
            cov = cov.reshape(len(d), -1) if cov.size else np.zeros((len(d), 0), dtype=np.int8)
        L = cov.shape[1]
        weights = 1 << np.arange(L - 1, -1, -1)
        group = (1 << L) - 1 - (cov.astype(np.intp) @ weights if L else np.zeros(len(d), dtype=np.intp))
        if pair_ids is None:
            pair_ids = tuple(range(1, len(d) + 1))
        return cls(L, tuple(pair_ids), cov, d, group)


def _parse_binary(value, row, col):
    if isinstance(value, str):
        value = value.strip()
        if value in ("0", "1"):
            return int(value)
    elif isinstance(value, (bool, np.bool_)):
        return int(value)
    elif isinstance(value, (int, np.integer)) and value in (0, 1):
        return int(value)
    elif isinstance(value, (float, np.floating)) and value in (0.0, 1.0):
        return int(value)
    raise DataValidationError(f"non-binary covariate value {value!r} in column {col}", row=row)


def _parse_d(value, row):
    try:
        d = float(value)
    except (TypeError, ValueError):
        raise DataValidationError(f"difference {value!r} is not numeric", row=row) from None
    if not math.isfinite(d):
        raise DataValidationError(f"difference {value!r} is not finite", row=row)
    return d


def ingest(records: Iterable[Sequence]) -> GroupedStudy:
    """Validate raw ``(pair_id, covariates, d)`` rows and route them to groups.

    Parameters
    ----------
    records : iterable of (pair_id, sequence of 0/1, number)
        One row per matched pair. All rows must carry the same number of
        covariates.

    Returns
    -------
    GroupedStudy

    Raises
    ------
    DataValidationError
        On a non-binary covariate, a non-finite difference, or rows that
        disagree on the number of covariates. The message names the row.
    """
    ids, covs, ds = [], [], []
    L = None
    for row in records:
        try:
            pair_id, cov, d = row
        except (TypeError, ValueError):
            raise DataValidationError("expected (pair_id, covariates, d)", row=len(ids) + 1) from None
        rid = pair_id
        cov = tuple(cov)
        if L is None:
            L = len(cov)
        elif len(cov) != L:
            raise DataValidationError(f"expected {L} covariates, got {len(cov)}", row=rid)
        covs.append(tuple(_parse_binary(v, rid, j + 1) for j, v in enumerate(cov)))
        ds.append(_parse_d(d, rid))
        ids.append(pair_id)
    if L is None:
        raise DataValidationError("no rows")
    cov_arr = np.array(covs, dtype=np.int8).reshape(len(ds), L)
    return GroupedStudy.from_arrays(ds, cov_arr, ids)


def read_csv(path) -> GroupedStudy:
    """Read a ``pair_id,cov_1,...,cov_L,d`` CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        L = len(header) - 2
        expected = ["pair_id"] + [f"cov_{l}" for l in range(1, L + 1)] + ["d"]
        if L < 0 or header != expected:
            raise DataValidationError(
                f"{path}: header {','.join(header)!r} does not match schema "
                f"'pair_id,cov_1,...,cov_L,d' (expected {','.join(expected)!r})"
            )
        rows = []
        for lineno, fields in enumerate(reader, start=2):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise DataValidationError(f"expected {len(header)} fields, got {len(fields)}", row=f"line {lineno}")
            rows.append((fields[0].strip(), fields[1:-1], fields[-1]))
    try:
        return ingest(rows)
    except DataValidationError as exc:
        raise DataValidationError(f"{path}: {exc}") from None


def write_csv(study: GroupedStudy, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair_id"] + [f"cov_{l}" for l in range(1, study.L + 1)] + ["d"])
        for i in range(study.n_pairs):
            w.writerow([study.pair_ids[i], *map(int, study.covariates[i]), repr(float(study.d[i]))])
