"""Comparison of a learned CPDAG with the ground truth."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

from .graph import Pdag, consistent_extension, dag_to_cpdag, iter_bits
from .scoring import Scorer


@dataclass
class EvalReport:
    shd: int
    precision: float
    recall: float
    f1: float
    delta_s: Optional[float]
    zeta: Optional[float]
    predicted_edges: int
    true_edges: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _check_dims(p: Pdag, q: Pdag) -> None:
    if p.d != q.d:
        raise ValueError(f"graphs have different node counts ({p.d} vs {q.d})")


def shd(p: Pdag, q: Pdag) -> int:
    """Number of node pairs whose edge status differs; a wrong or missing
    orientation counts once."""
    _check_dims(p, q)
    count = 0
    for a in range(p.d):
        for b in range(a + 1, p.d):
            if p.status(a, b) != q.status(a, b):
                count += 1
    return count


def _contained(g: Pdag) -> set[tuple[int, int]]:
    out = set()
    for i in range(g.d):
        for j in iter_bits(g.ch[i] | g.ne[i]):
            out.add((i, j))
    return out


def edge_classification(pred: Pdag, truth: Pdag) -> tuple[float, float, float, bool]:
    """Precision, recall and F1 over ordered pairs, plus a degenerate flag.

    A graph contains (i, j) when it has i -> j or i - j. Both graphs empty
    counts as perfect recovery (1, 1, 1) with the flag set.
    """
    _check_dims(pred, truth)
    P, Q = _contained(pred), _contained(truth)
    tp = len(P & Q)
    if not P and not Q:
        return 1.0, 1.0, 1.0, True
    precision = tp / len(P) if P else 0.0
    recall = tp / len(Q) if Q else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1, not P or not Q


def delta_s(scorer: Scorer, pred: Pdag, truth: Pdag) -> float:
    """Per-node BIC gap between the prediction and the true DAG; negative
    means the search stopped below the truth."""
    s_pred = scorer.total_dag_score(consistent_extension(pred))
    s_true = scorer.total_dag_score(truth)
    return (s_pred - s_true) / pred.d


def edge_ratio(pred: Pdag, truth: Pdag) -> float:
    m = truth.num_edges()
    if m == 0:
        raise ValueError("edge ratio undefined for a truth without edges")
    return pred.num_edges() / m


def evaluate(pred: Pdag, truth_dag: Pdag, scorer: Optional[Scorer] = None) -> EvalReport:
    truth_cpdag = dag_to_cpdag(truth_dag)
    precision, recall, f1, degenerate = edge_classification(pred, truth_cpdag)
    m = truth_dag.num_edges()
    return EvalReport(
        shd=shd(pred, truth_cpdag),
        precision=precision,
        recall=recall,
        f1=f1,
        delta_s=delta_s(scorer, pred, truth_dag) if scorer is not None else None,
        zeta=pred.num_edges() / m if m else None,
        predicted_edges=pred.num_edges(),
        true_edges=m,
        degenerate=degenerate,
    )
