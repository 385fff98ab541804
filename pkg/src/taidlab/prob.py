"""Numerically stable primitives on logits and probability simplices.

Logit vectors are plain float64 arrays of length V >= 2 (raw scores),
probability vectors are float64 arrays on the simplex.  All softmax-style
computations subtract the row maximum before exponentiating, so any finite
input is safe; entries that underflow come back as exact 0.0 and the sum
still normalizes to 1.  Divergence kernels deal with those zeros via their
own floors (see :mod:`taidlab.objectives`), not this module.

Everything here is a pure function; arrays are never modified in place.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, InvalidInputError, InvalidParameterError

__all__ = [
    "as_logits",
    "check_prob_vector",
    "softmax",
    "log_softmax",
    "interpolate_logits",
    "sigmoid",
]

#: absolute tolerance for "sums to one" checks on probability vectors
SIMPLEX_ATOL = 1e-9


def as_logits(values, min_size: int = 2) -> np.ndarray:
    """Validate and return ``values`` as a float64 logit array.

    Accepts 1-D vectors or 2-D row-stacked matrices whose trailing axis is
    the vocabulary.  Rejects NaN/Inf entries and vocabularies smaller than
    ``min_size``.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise DimensionError(f"logits must be 1-D or 2-D, got ndim={arr.ndim}")
    if arr.shape[-1] < min_size:
        raise DimensionError(
            f"vocabulary size must be >= {min_size}, got {arr.shape[-1]}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("logits contain NaN or Inf")
    return arr


def check_prob_vector(probs: np.ndarray) -> np.ndarray:
    """Assert the simplex invariants: entries >= 0, sum = 1 within 1e-9."""
    probs = np.asarray(probs, dtype=np.float64)
    if np.any(probs < 0.0):
        raise InvalidInputError("probability vector has negative entries")
    sums = probs.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > SIMPLEX_ATOL):
        raise InvalidInputError("probability vector does not sum to 1")
    return probs


def softmax(logits) -> np.ndarray:
    """Softmax with max-subtraction; operates on the trailing axis."""
    z = as_logits(logits)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    """Entry-wise log of softmax, computed without forming the probabilities.

    ``exp(log_softmax(x))`` sums to 1 within 1e-9 for any finite ``x``; the
    output itself is always finite.
    """
    z = as_logits(logits)
    shifted = z - z.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return shifted - lse


def interpolate_logits(student_logits, teacher_logits, t: float) -> np.ndarray:
    """Distribution of the logit interpolation (1-t)*student + t*teacher.

    At t=0 this is the student's own distribution, at t=1 the teacher's.
    The student side is a plain array, i.e. already detached: gradients of
    any objective built on this target must not flow through it (the TAID
    objective in :mod:`taidlab.objectives` relies on that).
    """
    s = as_logits(student_logits)
    p = as_logits(teacher_logits)
    if s.shape != p.shape:
        raise DimensionError(f"logit shapes differ: {s.shape} vs {p.shape}")
    if not 0.0 <= t <= 1.0:
        raise InvalidParameterError(f"interpolation parameter t={t} outside [0, 1]")
    return softmax((1.0 - t) * s + t * p)


def sigmoid(x: float) -> float:
    """Logistic function, stable for large |x|."""
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)
