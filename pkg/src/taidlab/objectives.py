"""Distillation objectives and their analytic gradients.

Each objective maps a batch of (student, teacher) logit rows to a scalar
value in nats, averaged over the S token positions, together with the exact
gradient with respect to the student logits (shape S x V).  Gradients are
derived through the softmax parameterization, so every gradient row sums to
zero.

Zero-probability convention used by all KL-style kernels: terms whose
numerator weight is exactly 0 contribute exactly 0, and every log argument
is floored at ``PROB_FLOOR`` so a zero in the denominator yields a large
finite penalty instead of Inf.  This keeps optimization loops total when
softmax underflow produces exact zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .prob import as_logits, interpolate_logits, softmax

__all__ = [
    "PROB_FLOOR",
    "TokenBatch",
    "ObjectiveValue",
    "kl_divergence",
    "reverse_kl",
    "total_variation",
    "generalized_js",
    "skew_kl",
    "skew_rkl",
    "taid_objective",
    "DIVERGENCES",
]

#: floor applied inside every log in the divergence kernels
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class TokenBatch:
    """A batch of S token positions with student and teacher logits (S x V)."""

    student_logits: np.ndarray
    teacher_logits: np.ndarray

    def __post_init__(self):
        s = as_logits(self.student_logits)
        p = as_logits(self.teacher_logits)
        if s.ndim != 2 or p.ndim != 2:
            raise DimensionError("batch logits must be 2-D (positions x vocab)")
        if s.shape != p.shape:
            raise DimensionError(
                f"student/teacher shapes differ: {s.shape} vs {p.shape}"
            )
        object.__setattr__(self, "student_logits", s)
        object.__setattr__(self, "teacher_logits", p)

    @property
    def n_positions(self) -> int:
        return self.student_logits.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.student_logits.shape[1]


@dataclass(frozen=True)
class ObjectiveValue:
    """Scalar objective (nats) and its gradient w.r.t. student logits."""

    value: float
    grad: np.ndarray


def _log_floored(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, PROB_FLOOR))


def _kl_rows(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Row-wise sum of num * log(num/den) with the floor convention."""
    return (num * (_log_floored(num) - _log_floored(den))).sum(axis=-1)


def _chain_softmax(q: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Pull a gradient g (w.r.t. probabilities q) back through the softmax."""
    return q * (g - (q * g).sum(axis=-1, keepdims=True))


def _dists(batch: TokenBatch) -> tuple[np.ndarray, np.ndarray]:
    return softmax(batch.teacher_logits), softmax(batch.student_logits)


def kl_divergence(batch: TokenBatch) -> ObjectiveValue:
    """Forward KL, mean over positions of KL(teacher, student).

    The classic distillation loss; its gradient w.r.t. the student logits is
    (q - p) / S per row.
    """
    p, q = _dists(batch)
    s = batch.n_positions
    value = _kl_rows(p, q).mean()
    return ObjectiveValue(float(value), (q - p) / s)


def reverse_kl(batch: TokenBatch) -> ObjectiveValue:
    """Reverse KL, mean over positions of KL(student, teacher)."""
    p, q = _dists(batch)
    s = batch.n_positions
    rows = _kl_rows(q, p)
    log_ratio = _log_floored(q) - _log_floored(p)
    grad = q * (log_ratio - rows[:, None]) / s
    return ObjectiveValue(float(rows.mean()), grad)


def total_variation(batch: TokenBatch) -> ObjectiveValue:
    """Token-level total variation distance, mean of 0.5*sum|p - q|.

    Subgradient convention: sign(q - p), zero at ties.
    """
    p, q = _dists(batch)
    s = batch.n_positions
    value = 0.5 * np.abs(p - q).sum(axis=-1).mean()
    grad = _chain_softmax(q, 0.5 * np.sign(q - p)) / s
    return ObjectiveValue(float(value), grad)


def _check_lambda(lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise InvalidParameterError(f"lambda={lam} outside [0, 1]")
    return float(lam)


def generalized_js(batch: TokenBatch, lam: float = 0.1) -> ObjectiveValue:
    """Generalized Jensen-Shannon divergence with mixture r = lam*p + (1-lam)*q.

    Value is lam*KL(p, r) + (1-lam)*KL(q, r); the gradient w.r.t. the
    probabilities collapses to (1-lam)*log(q/r), which is then chained
    through the softmax.
    """
    lam = _check_lambda(lam)
    p, q = _dists(batch)
    s = batch.n_positions
    r = lam * p + (1.0 - lam) * q
    value = (lam * _kl_rows(p, r) + (1.0 - lam) * _kl_rows(q, r)).mean()
    g = (1.0 - lam) * (_log_floored(q) - _log_floored(r))
    return ObjectiveValue(float(value), _chain_softmax(q, g) / s)


def skew_kl(batch: TokenBatch, lam: float = 0.1) -> ObjectiveValue:
    """Skew KL: KL(p, r) with r = lam*p + (1-lam)*q."""
    lam = _check_lambda(lam)
    p, q = _dists(batch)
    s = batch.n_positions
    r = lam * p + (1.0 - lam) * q
    value = _kl_rows(p, r).mean()
    g = -(1.0 - lam) * p / np.maximum(r, PROB_FLOOR)
    return ObjectiveValue(float(value), _chain_softmax(q, g) / s)


def skew_rkl(batch: TokenBatch, lam: float = 0.1) -> ObjectiveValue:
    """Skew reverse KL: KL(q, r) with r = lam*p + (1-lam)*q."""
    lam = _check_lambda(lam)
    p, q = _dists(batch)
    s = batch.n_positions
    r = lam * p + (1.0 - lam) * q
    value = _kl_rows(q, r).mean()
    g = (
        _log_floored(q)
        - _log_floored(r)
        + 1.0
        - (1.0 - lam) * q / np.maximum(r, PROB_FLOOR)
    )
    return ObjectiveValue(float(value), _chain_softmax(q, g) / s)


def taid_objective(batch: TokenBatch, t: float) -> ObjectiveValue:
    """Interpolated-target objective: KL(p_t, student) at interpolation t.

    The target p_t is the softmax of (1-t)*student + t*teacher logits with
    the student side detached, so the gradient is simply (q - p_t) / S;
    no term flows back through the target.  At t=1 this coincides exactly
    with :func:`kl_divergence`, at t=0 value and gradient are identically 0.
    """
    p_t = interpolate_logits(batch.student_logits, batch.teacher_logits, t)
    q = softmax(batch.student_logits)
    s = batch.n_positions
    value = _kl_rows(p_t, q).mean()
    return ObjectiveValue(float(value), (q - p_t) / s)


#: fixed-target divergences, keyed by the config names used by the trainer
DIVERGENCES = {
    "KL": kl_divergence,
    "RKL": reverse_kl,
    "TVD": total_variation,
    "GJSD": generalized_js,
    "SKL": skew_kl,
    "SRKL": skew_rkl,
}
