"""Gradient-descent distillation loop.

One `train` drives every experiment: it samples context batches from a
corpus, evaluates the configured objective (fixed divergence or
interpolated-target), applies an optimizer step to the student and records
per-step metrics.  Runs are deterministic given the config seed; sweeps are
just many configs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from . import objectives as obj
from . import scheduler as sched
from .errors import InvalidInputError, InvalidParameterError, TrainingDiverged
from .models import Corpus, context_pool

__all__ = [
    "OBJECTIVE_NAMES",
    "TrainConfig",
    "StepRecord",
    "train",
    "evaluate",
    "write_records_csv",
    "write_summary_json",
    "RECORD_COLUMNS",
]

OBJECTIVE_NAMES = ("KL", "RKL", "TVD", "GJSD", "SKL", "SRKL", "TAID", "TAID_LINEAR")

RECORD_COLUMNS = ("step", "objective", "t", "kl_to_teacher", "rkl_to_teacher", "grad_norm")


@dataclass(frozen=True)
class TrainConfig:
    objective: str
    learning_rate: float = 0.5
    steps: int = 100
    batch_size: int = 32
    seed: int = 0
    scheduler: sched.SchedulerConfig | None = None
    objective_lambda: float = 0.1
    optimizer: str = "gd"

    def __post_init__(self):
        if self.objective not in OBJECTIVE_NAMES:
            raise InvalidParameterError(
                f"unknown objective {self.objective!r}; choose from {OBJECTIVE_NAMES}"
            )
        if self.learning_rate <= 0.0:
            raise InvalidParameterError("learning_rate must be > 0")
        if self.steps < 0:
            raise InvalidParameterError("steps must be >= 0")
        if self.batch_size < 1:
            raise InvalidParameterError("batch_size must be >= 1")
        if self.optimizer not in ("gd", "adamw"):
            raise InvalidParameterError("optimizer must be 'gd' or 'adamw'")
        if self.objective in ("TAID", "TAID_LINEAR") and self.steps > 0:
            scheduler = self.scheduler
            if scheduler is None:
                scheduler = sched.SchedulerConfig(total_steps=self.steps)
                object.__setattr__(self, "scheduler", scheduler)
            if scheduler.total_steps != self.steps:
                raise InvalidParameterError(
                    "scheduler.total_steps must equal train steps"
                )


@dataclass(frozen=True)
class StepRecord:
    """Metrics for one training step; t is 1.0 for non-interpolating objectives."""

    step: int
    objective: float
    t: float
    kl_to_teacher: float
    rkl_to_teacher: float
    grad_norm: float


class _AdamW:
    """Conventional AdamW moments (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, shape, lr, weight_decay=0.0):
        self.lr = lr
        self.wd = weight_decay
        self.b1, self.b2, self.eps = 0.9, 0.999, 1e-8
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.n = 0

    def step(self, params, grad):
        self.n += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        mhat = self.m / (1 - self.b1**self.n)
        vhat = self.v / (1 - self.b2**self.n)
        params -= self.lr * (mhat / (np.sqrt(vhat) + self.eps) + self.wd * params)


def _objective_at(config: TrainConfig, batch: obj.TokenBatch, t: float) -> obj.ObjectiveValue:
    name = config.objective
    if name in ("TAID", "TAID_LINEAR"):
        return obj.taid_objective(batch, t)
    if name in ("GJSD", "SKL", "SRKL"):
        return obj.DIVERGENCES[name](batch, config.objective_lambda)
    return obj.DIVERGENCES[name](batch)


def train(teacher, student, corpus: Corpus, config: TrainConfig):
    """Distill ``teacher`` into ``student`` on corpus contexts.

    Per step: sample a context batch, evaluate the objective and its
    gradient, step the student parameters, then (interpolating modes)
    advance t.  The recorded t is the post-update value, so the trace ends
    exactly at t_end.  The student is updated in place and returned together
    with the list of :class:`StepRecord`.

    Raises :class:`TrainingDiverged` if the objective or gradient goes
    non-finite; the partial records ride on the exception.
    """
    if teacher.vocab_size != student.vocab_size:
        raise InvalidParameterError("teacher and student vocab sizes differ")
    if corpus.vocab_size > student.vocab_size:
        raise InvalidParameterError("corpus vocabulary exceeds model vocabulary")

    window = max(teacher.order, student.order)
    pool = context_pool(corpus, window)
    rng = np.random.default_rng(config.seed)
    records: list[StepRecord] = []

    interpolating = config.objective in ("TAID", "TAID_LINEAR")
    adaptive = config.objective == "TAID"
    state = (
        sched.SchedulerState.initial(config.scheduler)
        if interpolating and config.steps > 0
        else None
    )

    optimizer = None
    if config.optimizer == "adamw":
        optimizer = _AdamW(student.parameters.shape, config.learning_rate)

    for n in range(1, config.steps + 1):
        idx = rng.integers(0, len(pool), size=config.batch_size)
        contexts = [pool[i] for i in idx]
        batch = obj.TokenBatch(
            student.logits_for(contexts), teacher.logits_for(contexts)
        )

        t_used = state.t if interpolating else 1.0
        value = _objective_at(config, batch, t_used)
        kl = obj.kl_divergence(batch)
        rkl = obj.reverse_kl(batch)

        if not (np.isfinite(value.value) and np.all(np.isfinite(value.grad))):
            raise TrainingDiverged(n, records)

        pgrad = student.parameter_grad(contexts, value.grad)
        grad_norm = float(np.linalg.norm(pgrad))
        if optimizer is None:
            student.parameters -= config.learning_rate * pgrad
        else:
            optimizer.step(student.parameters, pgrad)

        if interpolating:
            if adaptive:
                state = sched.update(state, config.scheduler, value.value)
            else:
                state = replace(
                    state,
                    t=sched.linear_t(config.scheduler, min(n, config.steps)),
                    step=n,
                )
            t_recorded = state.t
        else:
            t_recorded = 1.0

        records.append(
            StepRecord(n, value.value, t_recorded, kl.value, rkl.value, grad_norm)
        )
    return student, records


def evaluate(student, reference, contexts) -> dict:
    """Mean divergences of the student against a fixed reference model."""
    contexts = list(contexts)
    if not contexts:
        raise InvalidInputError("empty context set")
    batch = obj.TokenBatch(
        student.logits_for(contexts), reference.logits_for(contexts)
    )
    return {
        "mean_kl": obj.kl_divergence(batch).value,
        "mean_rkl": obj.reverse_kl(batch).value,
        "mean_tvd": obj.total_variation(batch).value,
    }


def write_records_csv(records, path):
    """Persist step records with the fixed public column set."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.step,
                    repr(r.objective),
                    repr(r.t),
                    repr(r.kl_to_teacher),
                    repr(r.rkl_to_teacher),
                    repr(r.grad_norm),
                ]
            )


def write_summary_json(summary: dict, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
