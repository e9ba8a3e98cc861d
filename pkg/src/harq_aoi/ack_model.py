"""ACK probability models P_ACK(N) as a function of cumulative blocklength.

Two kinds are supported: the Gaussian fit for tail-biting convolutional codes
(binary-input AWGN at 2 dB), and a user-supplied table with piecewise-linear
interpolation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .errors import DomainError, ExtrapolationError, TableError

TBCC_MU = 0.5666
TBCC_SIGMA = 0.0573

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ModelKind(Enum):
    GAUSSIAN_TBCC = "gaussian-tbcc"
    TABLE = "table"


@dataclass(frozen=True)
class AckModel:
    """Immutable ACK-probability model.

    For ``GAUSSIAN_TBCC`` the probability is ``Q((k/n - mu) / sigma)``; for
    ``TABLE`` it is the linear interpolant through ``table_n``/``table_p``.
    """

    kind: ModelKind
    k: int
    mu: float = TBCC_MU
    sigma: float = TBCC_SIGMA
    table_n: tuple[float, ...] = ()
    table_p: tuple[float, ...] = ()

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be a positive integer")
        if self.kind is ModelKind.GAUSSIAN_TBCC and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.kind is ModelKind.TABLE:
            _check_table(self.table_n, self.table_p)

    @classmethod
    def gaussian_tbcc(cls, k: int = 64, mu: float = TBCC_MU, sigma: float = TBCC_SIGMA) -> AckModel:
        return cls(ModelKind.GAUSSIAN_TBCC, int(k), mu=float(mu), sigma=float(sigma))

    @classmethod
    def from_table(cls, pairs, k: int | None = None) -> AckModel:
        """Build a table model from ``(N, p_ack)`` pairs; ``k`` defaults to the first N."""
        pairs = [(float(n), float(p)) for n, p in pairs]
        ns = tuple(n for n, _ in pairs)
        ps = tuple(p for _, p in pairs)
        _check_table(ns, ps)
        if k is None:
            k = int(math.floor(ns[0]))
        return cls(ModelKind.TABLE, int(k), table_n=ns, table_p=ps)

    @property
    def domain(self) -> tuple[float, float]:
        if self.kind is ModelKind.TABLE:
            return (max(float(self.k), self.table_n[0]), self.table_n[-1])
        return (float(self.k), math.inf)

    # scalar fast paths; the SDO recursion calls these millions of times
    def prob(self, n):
        if np.ndim(n):
            return self._prob_array(np.asarray(n, dtype=float))
        n = float(n)
        self._check(n)
        if self.kind is ModelKind.GAUSSIAN_TBCC:
            z = (self.k / n - self.mu) / self.sigma
            return 0.5 * math.erfc(z / _SQRT2)
        return float(np.interp(n, self.table_n, self.table_p))

    def deriv(self, n):
        if np.ndim(n):
            return self._deriv_array(np.asarray(n, dtype=float))
        n = float(n)
        self._check(n)
        if self.kind is ModelKind.GAUSSIAN_TBCC:
            z = (self.k / n - self.mu) / self.sigma
            return _INV_SQRT_2PI * math.exp(-0.5 * z * z) * self.k / (self.sigma * n * n)
        ns, ps = self.table_n, self.table_p
        # right-continuous slope; the last knot takes the slope of the final segment
        i = int(np.searchsorted(ns, n, side="right")) - 1
        i = min(max(i, 0), len(ns) - 2)
        return (ps[i + 1] - ps[i]) / (ns[i + 1] - ns[i])

    def _prob_array(self, n: np.ndarray) -> np.ndarray:
        if n.size:
            self._check(float(n.min()))
            self._check(float(n.max()))
        if self.kind is ModelKind.GAUSSIAN_TBCC:
            z = (self.k / n - self.mu) / self.sigma
            return 0.5 * erfc(z / _SQRT2)
        return np.interp(n, self.table_n, self.table_p)

    def _deriv_array(self, n: np.ndarray) -> np.ndarray:
        if n.size:
            self._check(float(n.min()))
            self._check(float(n.max()))
        if self.kind is ModelKind.GAUSSIAN_TBCC:
            z = (self.k / n - self.mu) / self.sigma
            return _INV_SQRT_2PI * np.exp(-0.5 * z * z) * self.k / (self.sigma * n * n)
        ns = np.asarray(self.table_n)
        ps = np.asarray(self.table_p)
        i = np.clip(np.searchsorted(ns, n, side="right") - 1, 0, ns.size - 2)
        return (ps[i + 1] - ps[i]) / (ns[i + 1] - ns[i])

    def _check(self, n: float) -> None:
        if not n >= self.k:
            raise DomainError(f"blocklength {n} is below message length k={self.k}")
        if self.kind is ModelKind.TABLE and not (self.table_n[0] <= n <= self.table_n[-1]):
            raise ExtrapolationError(
                f"blocklength {n} outside table range [{self.table_n[0]}, {self.table_n[-1]}]"
            )


def _check_table(ns, ps) -> None:
    if len(ns) != len(ps):
        raise TableError("N and p_ack columns differ in length")
    if len(ns) < 2:
        raise TableError("an ACK table needs at least 2 points")
    for i, (n, p) in enumerate(zip(ns, ps), start=1):
        if not 0.0 <= p <= 1.0:
            raise TableError(f"row {i}: p_ack={p} outside [0, 1]")
        if n <= 0:
            raise TableError(f"row {i}: N={n} must be positive")
        if i > 1 and not (n > ns[i - 2] and p > ps[i - 2]):
            raise TableError(
                f"row {i}: ({n:g}, {p:g}) is not strictly increasing after ({ns[i - 2]:g}, {ps[i - 2]:g})"
            )


def ack_prob(model: AckModel, n):
    return model.prob(n)


def ack_prob_deriv(model: AckModel, n):
    return model.deriv(n)


def load_table_model(path, k: int | None = None) -> AckModel:
    """Read a ``N,p_ack`` CSV file into a table-kind model.

    Row numbers in error messages count data rows from 1 (header excluded).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["N", "p_ack"]:
            raise TableError(f"{path}: expected header 'N,p_ack', got {','.join(header)!r}")
        pairs = []
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise TableError(f"{path}: row {lineno}: expected 2 fields, got {len(row)}")
            try:
                pairs.append((float(row[0]), float(row[1])))
            except ValueError:
                raise TableError(f"{path}: row {lineno}: cannot parse {row!r}") from None
    return AckModel.from_table(pairs, k=k)


def parse_model_spec(spec: str, k: int) -> AckModel:
    """Resolve a ``gaussian-tbcc`` or ``table:<path>`` model selector."""
    if spec == ModelKind.GAUSSIAN_TBCC.value:
        return AckModel.gaussian_tbcc(k)
    if spec.startswith("table:"):
        return load_table_model(spec[len("table:"):], k=k)
    raise ValueError(f"unknown model {spec!r}; use 'gaussian-tbcc' or 'table:<path>'")
