"""Random linear Gaussian causal models and data drawn from them.

One ``numpy.random.Generator`` (PCG64, seeded with ``SimConfig.seed``) drives
everything, with a fixed draw order: skeleton, permutation, weight
magnitudes, weight signs, noise scales, then the data.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .graph import Pdag, dag_to_cpdag, iter_bits, to_json_dict, topological_order


@dataclass
class SimConfig:
    d: int
    rho: float
    n: int = 10_000
    weight_low: float = 1.0
    weight_high: float = 3.0
    allow_negative: bool = False
    eps_max: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.weight_low <= self.weight_high:
            raise ValueError("need 0 < weight_low <= weight_high")
        if self.eps_max < 0:
            raise ValueError("eps_max must be >= 0")

    @property
    def raw_edge_probability(self) -> float:
        return 2.0 * self.rho / (self.d - 1) if self.d > 1 else 0.0

    @property
    def edge_probability(self) -> float:
        return min(1.0, self.raw_edge_probability)


@dataclass
class GroundTruth:
    """``weights[i, j]`` is the coefficient of parent ``i`` in node ``j``."""

    dag: Pdag
    weights: np.ndarray
    noise: np.ndarray
    p_clamped: bool = False
    _cpdag: Optional[Pdag] = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.dag.d

    @property
    def cpdag(self) -> Pdag:
        if self._cpdag is None:
            self._cpdag = dag_to_cpdag(self.dag)
        return self._cpdag

    def analytic_covariance(self) -> np.ndarray:
        """Covariance implied by the linear SEM x = W^T x + diag(noise) z."""
        d = self.d
        inv = np.linalg.inv(np.eye(d) - self.weights)
        return inv.T @ np.diag(self.noise ** 2) @ inv

    def to_dict(self) -> dict:
        return {
            "dag": to_json_dict(self.dag),
            "weights": [[float(w) for w in row] for row in self.weights],
            "noise": [float(e) for e in self.noise],
            "cpdag": to_json_dict(self.cpdag),
            "p_clamped": self.p_clamped,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GroundTruth":
        from .graph import from_json_dict
        dag = from_json_dict(obj["dag"])
        return cls(dag, np.array(obj["weights"], dtype=float).reshape(dag.d, dag.d),
                   np.array(obj["noise"], dtype=float), bool(obj.get("p_clamped", False)))


def sample_ground_truth(cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> GroundTruth:
    cfg.validate()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    d = cfg.d
    p = cfg.edge_probability
    iu = np.triu_indices(d, k=1)
    draws = rng.random(len(iu[0]))
    sigma = rng.permutation(d)

    dag = Pdag(d)
    for i, j, u in zip(iu[0], iu[1], draws):
        if u < p:
            dag.add_directed(int(sigma[i]), int(sigma[j]))

    parents = [list(iter_bits(dag.pa[j])) for j in range(d)]
    mags = [rng.uniform(cfg.weight_low, cfg.weight_high, size=len(ps)) for ps in parents]
    if cfg.allow_negative:
        signs = [np.where(rng.random(len(ps)) < 0.5, -1.0, 1.0) for ps in parents]
    else:
        signs = [np.ones(len(ps)) for ps in parents]
    noise = rng.uniform(0.0, cfg.eps_max, size=d)

    W = np.zeros((d, d))
    for j, ps in enumerate(parents):
        if ps:
            w = mags[j] * signs[j]
            W[ps, j] = w / np.abs(w).sum()
    return GroundTruth(dag, W, noise, cfg.raw_edge_probability > 1.0)


def sample_data(gt: GroundTruth, n: int, seed: Optional[int] = None,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Ancestral sampling of ``n`` i.i.d. rows."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    d = gt.d
    z = rng.standard_normal((n, d))
    x = np.zeros((n, d))
    for j in topological_order(gt.dag):
        ps = list(iter_bits(gt.dag.pa[j]))
        x[:, j] = gt.noise[j] * z[:, j]
        if ps:
            x[:, j] += x[:, ps] @ gt.weights[ps, j]
    return x


def simulate(cfg: SimConfig) -> tuple[GroundTruth, np.ndarray]:
    """Ground truth and ``cfg.n`` samples from one generator seeded by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    gt = sample_ground_truth(cfg, rng)
    return gt, sample_data(gt, cfg.n, rng=rng)


def write_truth(path, gt: GroundTruth, cfg: Optional[SimConfig] = None) -> None:
    obj = gt.to_dict()
    if cfg is not None:
        obj["config"] = asdict(cfg)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def read_truth(path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        return GroundTruth.from_dict(json.load(fh))
