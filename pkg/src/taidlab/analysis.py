"""Distribution diagnostics: head/tail mass against a teacher ranking, entropy.

``mass_report`` ranks the vocabulary by descending teacher probability
(ties broken by ascending token index) and sums the student's mass over the
top-k head and over a bottom-percentile tail band.  A student that
oversmooths carries too much mass into the teacher's tail; one that has
collapsed carries almost none.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .prob import check_prob_vector

__all__ = ["MassReport", "DistStats", "mass_report", "mean_mass_report", "dist_stats"]


@dataclass(frozen=True)
class MassReport:
    head_mass: float
    tail_mass: float
    head_k: int
    tail_lo_pct: float
    tail_hi_pct: float


@dataclass(frozen=True)
class DistStats:
    entropy: float
    target_prob: float


def _tail_ranks(vocab: int, tail_range) -> tuple[int, int]:
    lo_pct, hi_pct = tail_range
    if not 0.0 <= lo_pct < hi_pct <= 100.0:
        raise InvalidParameterError(f"bad tail percentile range {tail_range}")
    lo = int(math.ceil(vocab * lo_pct / 100.0))
    hi = int(math.ceil(vocab * hi_pct / 100.0))
    return lo, hi


def mass_report(
    student,
    teacher,
    head_k: int = 10,
    tail_range: tuple[float, float] = (80.0, 100.0),
) -> MassReport:
    """Student probability mass over the teacher-ranked head and tail.

    Rank 0 is the teacher's most probable token; the tail band covers ranks
    [ceil(V*lo/100), ceil(V*hi/100)).  ``head_k`` must not reach into the
    tail band, which keeps head_mass + tail_mass <= 1.
    """
    student = check_prob_vector(student)
    teacher = check_prob_vector(teacher)
    if student.shape != teacher.shape or student.ndim != 1:
        raise DimensionError("student and teacher must be equal-length vectors")
    vocab = student.shape[0]
    if not 1 <= head_k < vocab:
        raise InvalidParameterError(f"head_k={head_k} must be in [1, V)")
    lo, hi = _tail_ranks(vocab, tail_range)
    if head_k > lo:
        raise InvalidParameterError(
            f"head_k={head_k} overlaps tail ranks starting at {lo}"
        )
    order = np.lexsort((np.arange(vocab), -teacher))
    head = float(student[order[:head_k]].sum())
    tail = float(student[order[lo:hi]].sum())
    return MassReport(head, tail, head_k, float(tail_range[0]), float(tail_range[1]))


def mean_mass_report(student_rows, teacher_rows, head_k=10, tail_range=(80.0, 100.0)):
    """Arithmetic mean of per-context mass reports (fixed iteration order)."""
    reports = [
        mass_report(s, t, head_k, tail_range)
        for s, t in zip(student_rows, teacher_rows)
    ]
    if not reports:
        raise InvalidParameterError("no rows to aggregate")
    head = sum(r.head_mass for r in reports) / len(reports)
    tail = sum(r.tail_mass for r in reports) / len(reports)
    return MassReport(head, tail, head_k, float(tail_range[0]), float(tail_range[1]))


def dist_stats(dist, target_index: int) -> DistStats:
    """Shannon entropy (nats) and the probability of the target token."""
    dist = check_prob_vector(dist)
    if dist.ndim != 1:
        raise DimensionError("dist must be a vector")
    if not 0 <= target_index < dist.shape[0]:
        raise IndexError(f"target index {target_index} out of range")
    positive = dist[dist > 0.0]
    entropy = float(-(positive * np.log(positive)).sum())
    return DistStats(entropy, float(dist[target_index]))
