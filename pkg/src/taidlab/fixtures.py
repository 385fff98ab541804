"""Shipped experiment fixtures: the bimodal mode-balance setup and the
capacity-gap benchmark.

These are the deterministic configurations behind the repo's acceptance
checks and the bundled config files; tests and the CLI build them through
the same functions so the numbers agree.
"""

from __future__ import annotations

import numpy as np

from .models import Corpus, LinearModel, TabularModel, fit_teacher, generate_corpus

__all__ = [
    "BIMODAL_SEED",
    "BIMODAL_TRAIN",
    "BIMODAL_CONTEXTS",
    "bimodal_teacher",
    "bimodal_corpus",
    "bimodal_student",
    "CAPACITY_SEED",
    "CAPACITY_VOCAB",
    "CAPACITY_GEN_ORDER",
    "CAPACITY_ZIPF",
    "CAPACITY_LEVELS",
    "CAPACITY_TRAIN",
    "capacity_corpus",
    "capacity_teachers",
    "capacity_student",
    "capacity_eval_batch",
]

# ---------------------------------------------------------------------------
# Mode-balance fixture: a designed bimodal teacher and a bias-only student.
#
# Vocabulary 60.  Context tokens 0..7 select the teacher row; each row puts
# half its mass on a shared 5-token head (10..14), a large context-specific
# mode on token 20+4c, near-zero mass on the other contexts' mode tokens,
# and a thin uniform rest.  A bias-only student must commit one distribution
# for all contexts: covering every context mode floods the per-context tail
# (where foreign modes rank), collapsing onto the shared head empties it.
# ---------------------------------------------------------------------------

BIMODAL_SEED = 20240
#: shared training settings for the three mode-balance runs
BIMODAL_TRAIN = {
    "learning_rate": 0.5,
    "steps": 300,
    "batch_size": 16,
    "t_start": 0.2,
}
_BIMODAL_V = 60
_BIMODAL_N_CTX = 8
_HEAD_TOKENS = (10, 11, 12, 13, 14)
_HEAD_WEIGHTS = (0.18, 0.12, 0.09, 0.07, 0.04)  # sums to 0.5
_MODE_MASS = 0.45
_FOREIGN_MODE_MASS = 1e-4

BIMODAL_CONTEXTS = tuple((c,) for c in range(_BIMODAL_N_CTX))


def _mode_token(context_id: int) -> int:
    return 20 + 4 * context_id


def bimodal_teacher() -> TabularModel:
    """Order-1 tabular teacher with one bimodal row per context token."""
    v = _BIMODAL_V
    probs = np.zeros((v + 1, v))
    for c in range(_BIMODAL_N_CTX):
        row = np.zeros(v)
        for tok, w in zip(_HEAD_TOKENS, _HEAD_WEIGHTS):
            row[tok] = w
        for other in range(_BIMODAL_N_CTX):
            row[_mode_token(other)] = _FOREIGN_MODE_MASS
        row[_mode_token(c)] = _MODE_MASS
        rest = row == 0.0
        row[rest] = (1.0 - row.sum()) / rest.sum()
        probs[c] = row
    # contexts beyond 0..7 (and the default row) are never sampled; keep uniform
    probs[_BIMODAL_N_CTX:] = 1.0 / v
    return TabularModel(np.log(probs), v, order=1, n_contexts=v)


def bimodal_corpus() -> Corpus:
    """Cycles through the eight context tokens so batches cover all rows."""
    seq = np.tile(np.arange(_BIMODAL_N_CTX), 64)
    return Corpus([seq], _BIMODAL_V, order=1)


def bimodal_student() -> LinearModel:
    """Bias-only student: a single shared distribution for every context."""
    return LinearModel.zeros(_BIMODAL_V, "bias")


# ---------------------------------------------------------------------------
# Capacity-gap fixture: one generated corpus split into train and held-out
# sequences (same chain), teachers of growing capacity (order, context
# buckets), a fixed small tabular student (order 2).
#
# Teacher structure beyond the student's order is invisible to this convex
# student, so the ladder tops out at the student's own order; capacity then
# controls how much student-learnable structure each teacher carries.  The
# shared learning rate is deliberately hot: the full-gap objective bounces
# where the curriculum tracks its nearby target smoothly, which is the
# stability difference under study.
# ---------------------------------------------------------------------------

CAPACITY_SEED = 90125
CAPACITY_VOCAB = 12
CAPACITY_GEN_ORDER = 3
CAPACITY_ZIPF = 1.1
_CAP_SEQ_LENGTH = 4000
_CAP_SMOOTHING = 0.2

#: (order, n_contexts) per teacher, weakest first
CAPACITY_LEVELS = ((0, 1), (1, 12), (2, 96), (2, 144))

#: shared training settings for every run in the capacity sweep
CAPACITY_TRAIN = {
    "learning_rate": 16.0,
    "steps": 2000,
    "batch_size": 16,
    "t_start": 0.2,
}
CAPACITY_EVAL_CONTEXTS = 500


def capacity_corpus(seed: int = CAPACITY_SEED) -> tuple[Corpus, Corpus]:
    """(train, held-out) split of one chain: 5 sequences vs 1."""
    full = generate_corpus(
        seed,
        CAPACITY_VOCAB,
        CAPACITY_GEN_ORDER,
        zipf_s=CAPACITY_ZIPF,
        length=_CAP_SEQ_LENGTH,
        n_sequences=6,
    )
    train = Corpus(full.sequences[:5], CAPACITY_VOCAB, CAPACITY_GEN_ORDER)
    held = Corpus(full.sequences[5:], CAPACITY_VOCAB, CAPACITY_GEN_ORDER)
    return train, held


def capacity_teachers(corpus: Corpus) -> list:
    return [
        fit_teacher(corpus, CAPACITY_VOCAB, order, _CAP_SMOOTHING, n_contexts=n_ctx)
        for order, n_ctx in CAPACITY_LEVELS
    ]


def capacity_student() -> TabularModel:
    return TabularModel.zeros(CAPACITY_VOCAB, order=2)


def capacity_eval_batch(held: Corpus):
    """(contexts, generator logit rows) for the held-out evaluation."""
    from .models import context_pool, true_transition_row

    pool = [
        c
        for c in context_pool(held, CAPACITY_GEN_ORDER)
        if len(c) == CAPACITY_GEN_ORDER
    ][:CAPACITY_EVAL_CONTEXTS]
    rows = np.stack(
        [
            true_transition_row(
                CAPACITY_SEED, CAPACITY_VOCAB, CAPACITY_GEN_ORDER, CAPACITY_ZIPF, c
            )
            for c in pool
        ]
    )
    return pool, np.log(rows)
