"""Gaussian linear BIC with a covariance precomputation and a local-score cache."""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Union

import numpy as np
from scipy.linalg import solve_triangular

from .graph import Pdag, iter_bits, to_mask

NodeSet = Union[int, Iterable[int]]

_LOG_2PI = math.log(2.0 * math.pi)


class DataError(ValueError):
    pass


def _mask(nodes: NodeSet) -> int:
    return nodes if isinstance(nodes, int) else to_mask(nodes)


class Scorer:
    """BIC scorer for linear Gaussian models.

    The local score of node ``j`` with parent set ``P`` is

        -(n/2) * (1 + log(2 pi) + log(sigma2)) - (alpha/2) * log(n) * |P|

    where ``sigma2`` is the maximum-likelihood residual variance of the
    regression of ``j`` on ``P`` (with intercept). Only the sample covariance
    is kept, so a local score costs one small Cholesky factorization.

    Parameters
    ----------
    data : array-like of shape (n, d)
    alpha : float
        Penalty multiplier; must be positive.
    cache : bool
        Memoize local scores. ``call_counter`` counts evaluations that were
        not served from the cache, so a non-caching scorer counts every call.
    """

    def __init__(self, data, alpha: float = 2.0, cache: bool = True):
        x = np.asarray(data, dtype=float)
        if x.ndim != 2:
            raise DataError("data must be a 2-d array (n samples x d variables)")
        if not np.all(np.isfinite(x)):
            raise DataError("data contains non-finite values")
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        n, d = x.shape
        if n < 2:
            raise DataError("need at least 2 samples")
        self.n = n
        self.d = d
        self.alpha = float(alpha)
        xc = x - x.mean(axis=0)
        self.cov = (xc.T @ xc) / n
        self.use_cache = cache
        self.cache: dict[tuple[int, int], float] = {}
        self.call_counter = 0
        self._lik_const = -0.5 * n * (1.0 + _LOG_2PI)
        self._penalty = 0.5 * self.alpha * math.log(n)

    @classmethod
    def from_covariance(cls, cov, n: int, alpha: float = 2.0, cache: bool = True) -> "Scorer":
        self = cls.__new__(cls)
        self.cov = np.array(cov, dtype=float)
        self.n = int(n)
        self.d = self.cov.shape[0]
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        self.alpha = float(alpha)
        self.use_cache = cache
        self.cache = {}
        self.call_counter = 0
        self._lik_const = -0.5 * self.n * (1.0 + _LOG_2PI)
        self._penalty = 0.5 * self.alpha * math.log(self.n)
        return self

    def clear_cache(self) -> None:
        self.cache.clear()

    def residual_variance(self, j: int, parents: NodeSet) -> float:
        idx = list(iter_bits(_mask(parents)))
        cjj = self.cov[j, j]
        if not idx:
            s2 = cjj
        else:
            C = self.cov[np.ix_(idx, idx)]
            c = self.cov[idx, j]
            try:
                L = np.linalg.cholesky(C)
            except np.linalg.LinAlgError:
                jitter = 1e-10 * float(np.mean(np.diag(C)))
                try:
                    L = np.linalg.cholesky(C + jitter * np.eye(len(idx)))
                except np.linalg.LinAlgError:
                    return math.nan
            z = solve_triangular(L, c, lower=True, check_finite=False)
            s2 = cjj - float(z @ z)
        return max(s2, 1e-12 * cjj, 1e-300)

    def local_score(self, j: int, parents: NodeSet) -> float:
        mask = _mask(parents)
        if mask >> j & 1:
            raise ValueError(f"node {j} cannot be its own parent")
        if self.use_cache:
            key = (j, mask)
            v = self.cache.get(key)
            if v is not None:
                return v
        self.call_counter += 1
        s2 = self.residual_variance(j, mask)
        if math.isnan(s2):
            v = -math.inf
        else:
            v = self._lik_const - 0.5 * self.n * math.log(s2) - self._penalty * mask.bit_count()
        if self.use_cache:
            self.cache[(j, mask)] = v
        return v

    # operator deltas, parametrized so they do not depend on the graph

    def insert_delta(self, x: int, y: int, E: NodeSet) -> float:
        E = _mask(E)
        if x == y or E >> x & 1:
            raise ValueError("insert_delta needs x != y and x not in E")
        return self.local_score(y, E | 1 << x) - self.local_score(y, E)

    def delete_delta(self, x: int, y: int, E: NodeSet) -> float:
        E = _mask(E)
        if x == y or E >> y & 1:
            raise ValueError("delete_delta needs x != y and y not in E")
        bx = 1 << x
        return self.local_score(y, E & ~bx) - self.local_score(y, E | bx)

    def reverse_delta(self, x: int, y: int, E: NodeSet, F: NodeSet) -> float:
        F = _mask(F)
        if not F >> y & 1:
            raise ValueError("reverse_delta needs y in F")
        return self.insert_delta(x, y, E) + self.local_score(x, F & ~(1 << y)) - self.local_score(x, F)

    def total_dag_score(self, g: Pdag) -> float:
        if any(g.ne):
            raise ValueError("total_dag_score needs a DAG")
        return sum(self.local_score(j, g.pa[j]) for j in range(g.d))

    def empty_score(self) -> float:
        return sum(self.local_score(j, 0) for j in range(self.d))


def build_scorer(data, alpha: float = 2.0, cache: bool = True) -> Scorer:
    return Scorer(data, alpha=alpha, cache=cache)


def local_score(sc: Scorer, j: int, parents: NodeSet) -> float:
    return sc.local_score(j, parents)


def total_dag_score(sc: Scorer, g: Pdag) -> float:
    return sc.total_dag_score(g)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_csv(source) -> np.ndarray:
    """Read a numeric CSV with an optional single header row.

    ``source`` is a path or an open text stream. The first row is taken as a
    header only when none of its cells parses as a number.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("empty CSV")
    if not any(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise DataError("CSV has a header but no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"row {i + 1} has {len(r)} fields, expected {width}")
        try:
            out[i] = [float(c) for c in r]
        except ValueError as e:
            raise DataError(f"row {i + 1}: {e}") from e
    if not np.all(np.isfinite(out)):
        raise DataError("CSV contains non-finite values")
    return out


def write_csv(path, data: np.ndarray, header: bool = True) -> None:
    data = np.asarray(data, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow([f"X{i}" for i in range(data.shape[1])])
        for row in data:
            w.writerow([repr(float(v)) for v in row])
