"""Toy softmax language models and synthetic corpora.

Two model families share one interface (``vocab_size``, ``order``,
``logits_for``, ``parameters``, ``parameter_grad``):

* :class:`TabularModel` stores one logit row per context bucket.  Contexts
  are the last ``order`` tokens, mapped to a bucket either exactly (when the
  bucket count covers every k-gram) or through a fixed multiplicative hash.
  A dedicated extra row catches histories shorter than ``order``, so lookup
  is total.  Capacity is the knob (n_contexts, order).
* :class:`LinearModel` computes logits as ``features(context) @ weights``
  for a small hand-crafted feature map; with few features it cannot match
  arbitrary teacher rows, which is exactly what the mode-balance experiments
  need.

Corpora come from a seeded order-k Markov chain whose transition rows are
Zipf-shaped with per-context multiplicative noise, so token marginals follow
an approximate power law while transitions still carry context information.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidInputError, InvalidParameterError
from .prob import as_logits

__all__ = [
    "Corpus",
    "TabularModel",
    "LinearModel",
    "generate_corpus",
    "true_transition_row",
    "fit_teacher",
    "forward",
    "cross_entropy",
    "context_pool",
    "save_corpus",
    "load_corpus",
    "save_model",
    "load_model",
]

_MASK64 = (1 << 64) - 1
#: lognormal sigma for per-context perturbation of the Zipf base row
_ROW_NOISE = 0.5


def _mix64(x: int) -> int:
    """splitmix64 finalizer; fixed-key deterministic hash for context codes."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


@dataclass
class Corpus:
    """Token-index sequences over a fixed vocabulary."""

    sequences: list
    vocab_size: int
    order: int

    def __post_init__(self):
        if self.vocab_size < 2:
            raise InvalidParameterError("vocab_size must be >= 2")
        if self.order < 0:
            raise InvalidParameterError("order must be >= 0")
        if not self.sequences:
            raise InvalidInputError("corpus has no sequences")
        seqs = []
        for seq in self.sequences:
            arr = np.asarray(seq, dtype=np.int64)
            if arr.size == 0:
                raise InvalidInputError("corpus contains an empty sequence")
            if arr.min() < 0 or arr.max() >= self.vocab_size:
                raise InvalidInputError("corpus token outside [0, vocab_size)")
            seqs.append(arr)
        self.sequences = seqs

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sequences)


def _zipf_base(vocab_size: int, zipf_s: float) -> np.ndarray:
    ranks = np.arange(1, vocab_size + 1, dtype=np.float64)
    w = ranks ** (-zipf_s)
    return w / w.sum()


def _markov_row(
    seed: int, vocab_size: int, zipf_s: float, order: int, code: int
) -> np.ndarray:
    """Transition distribution of the generator chain for one context code.

    Noise is layered per suffix length: the last token, the last bigram, ...
    up to the full order-k history each contribute an independent lognormal
    factor, so lower-order models capture a genuine share of the structure
    and each extra order of context adds predictive signal.
    """
    log_row = np.log(_zipf_base(vocab_size, zipf_s))
    for level in range(1, order + 1):
        level_code = code % (vocab_size**level)
        ctx_rng = np.random.default_rng([seed, 0x7A1D, level, level_code])
        log_row = log_row + _ROW_NOISE * ctx_rng.standard_normal(vocab_size)
    row = np.exp(log_row - log_row.max())
    return row / row.sum()


def true_transition_row(
    seed: int, vocab_size: int, order: int, zipf_s: float, context
) -> np.ndarray:
    """Exact next-token distribution of the chain behind :func:`generate_corpus`.

    ``context`` must supply at least ``order`` tokens; the row depends only
    on the last ``order`` of them.
    """
    ctx = tuple(int(c) for c in context)
    if len(ctx) < order:
        raise InvalidParameterError(
            f"context of length {len(ctx)} shorter than order {order}"
        )
    code = 0
    for tok in ctx[len(ctx) - order :] if order else ():
        if not 0 <= tok < vocab_size:
            raise InvalidInputError("context token outside vocabulary")
        code = code * vocab_size + tok
    return _markov_row(seed, vocab_size, zipf_s, order, code)


def generate_corpus(
    seed: int,
    vocab_size: int,
    order: int,
    zipf_s: float,
    length: int,
    n_sequences: int = 1,
) -> Corpus:
    """Sample sequences from a seeded random order-k Markov chain.

    Token identity equals Zipf rank: the transition row for each context is
    the Zipf(s) base distribution times lognormal context noise, so marginal
    frequencies stay approximately Zipf while transitions differ per context.
    Rows are derived lazily from (seed, context code), so only visited
    contexts cost memory.
    """
    if vocab_size < 2:
        raise InvalidParameterError("vocab_size must be >= 2")
    if order < 0:
        raise InvalidParameterError("order must be >= 0")
    if zipf_s <= 0.0:
        raise InvalidParameterError("zipf_s must be > 0")
    if length < 1 or n_sequences < 1:
        raise InvalidParameterError("length and n_sequences must be >= 1")

    base_cdf = np.cumsum(_zipf_base(vocab_size, zipf_s))
    rng = np.random.default_rng(seed)
    row_cdf_cache: dict[int, np.ndarray] = {}

    def row_cdf(code: int) -> np.ndarray:
        cdf = row_cdf_cache.get(code)
        if cdf is None:
            cdf = np.cumsum(_markov_row(seed, vocab_size, zipf_s, order, code))
            row_cdf_cache[code] = cdf
        return cdf

    sequences = []
    for _ in range(n_sequences):
        seq = np.empty(length, dtype=np.int64)
        upto = min(order, length)
        for s in range(upto):
            seq[s] = np.searchsorted(base_cdf, rng.random())
        code = 0
        for j in range(upto):
            code = code * vocab_size + int(seq[j])
        for s in range(upto, length):
            seq[s] = np.searchsorted(row_cdf(code), rng.random())
            if order > 0:
                code = (code * vocab_size + int(seq[s])) % (vocab_size**order)
        sequences.append(seq)
    return Corpus(sequences, vocab_size, order)


@dataclass
class TabularModel:
    """Per-context logit table with hashed bucketing and a default row.

    ``logits`` has shape (n_contexts + 1, vocab_size); the last row is the
    default bucket for histories shorter than ``order``.
    """

    logits: np.ndarray
    vocab_size: int
    order: int
    n_contexts: int

    def __post_init__(self):
        self.logits = as_logits(self.logits)
        if self.logits.shape != (self.n_contexts + 1, self.vocab_size):
            raise DimensionError(
                f"logits shape {self.logits.shape} != "
                f"({self.n_contexts + 1}, {self.vocab_size})"
            )

    @classmethod
    def zeros(
        cls, vocab_size: int, order: int, n_contexts: int | None = None
    ) -> "TabularModel":
        if n_contexts is None:
            n_contexts = vocab_size**order
        return cls(
            np.zeros((n_contexts + 1, vocab_size)), vocab_size, order, n_contexts
        )

    @property
    def exact(self) -> bool:
        """True when every k-gram has its own bucket (no hashing)."""
        return self.n_contexts >= self.vocab_size**self.order

    def context_index(self, context) -> int:
        """Bucket index for a token history (most recent token last)."""
        ctx = tuple(int(c) for c in context)
        if len(ctx) < self.order:
            return self.n_contexts
        code = 0
        for tok in ctx[len(ctx) - self.order :]:
            if not 0 <= tok < self.vocab_size:
                return self.n_contexts
            code = code * self.vocab_size + tok
        if self.exact:
            return code
        return _mix64(code) % self.n_contexts

    def logits_for(self, contexts) -> np.ndarray:
        idx = np.fromiter(
            (self.context_index(c) for c in contexts), dtype=np.int64
        )
        return self.logits[idx]

    @property
    def parameters(self) -> np.ndarray:
        return self.logits

    @parameters.setter
    def parameters(self, value: np.ndarray):
        self.logits = value

    def parameter_grad(self, contexts, grad_logits: np.ndarray) -> np.ndarray:
        grad = np.zeros_like(self.logits)
        idx = np.fromiter(
            (self.context_index(c) for c in contexts), dtype=np.int64
        )
        np.add.at(grad, idx, grad_logits)
        return grad


def _bias_features(_context) -> np.ndarray:
    return np.ones(1)


class _LastTokenFeatures:
    """Hashed one-hot of the most recent token, plus a bias dimension."""

    def __init__(self, n_buckets: int):
        self.n_buckets = n_buckets

    def __call__(self, context) -> np.ndarray:
        out = np.zeros(self.n_buckets + 1)
        out[self.n_buckets] = 1.0
        ctx = tuple(context)
        if ctx:
            out[_mix64(int(ctx[-1])) % self.n_buckets] = 1.0
        return out


def feature_map(spec: str):
    """Resolve a feature-map spec string to (callable, n_features, order)."""
    if spec == "bias":
        return _bias_features, 1, 0
    if spec.startswith("last_token:"):
        n_buckets = int(spec.split(":", 1)[1])
        if n_buckets < 1:
            raise InvalidParameterError("last_token feature needs >= 1 bucket")
        return _LastTokenFeatures(n_buckets), n_buckets + 1, 1
    raise InvalidParameterError(f"unknown feature map spec {spec!r}")


@dataclass
class LinearModel:
    """Softmax predictor with logits linear in hand-crafted context features."""

    weights: np.ndarray
    vocab_size: int
    feature_spec: str
    _features: object = field(init=False, repr=False)
    order: int = field(init=False)

    def __post_init__(self):
        fn, n_features, order = feature_map(self.feature_spec)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)):
            raise InvalidInputError("weights contain NaN or Inf")
        if self.weights.shape != (n_features, self.vocab_size):
            raise DimensionError(
                f"weights shape {self.weights.shape} != ({n_features}, {self.vocab_size})"
            )
        self._features = fn
        self.order = order

    @classmethod
    def zeros(cls, vocab_size: int, feature_spec: str = "bias") -> "LinearModel":
        _, n_features, _ = feature_map(feature_spec)
        return cls(np.zeros((n_features, vocab_size)), vocab_size, feature_spec)

    def feature_matrix(self, contexts) -> np.ndarray:
        return np.stack([self._features(c) for c in contexts])

    def logits_for(self, contexts) -> np.ndarray:
        return self.feature_matrix(contexts) @ self.weights

    @property
    def parameters(self) -> np.ndarray:
        return self.weights

    @parameters.setter
    def parameters(self, value: np.ndarray):
        self.weights = value

    def parameter_grad(self, contexts, grad_logits: np.ndarray) -> np.ndarray:
        return self.feature_matrix(contexts).T @ grad_logits


def forward(model, context) -> np.ndarray:
    """Logit vector a model assigns after the given token history."""
    return model.logits_for([context])[0]


def fit_teacher(
    corpus: Corpus,
    vocab_size: int,
    order: int,
    smoothing: float,
    n_contexts: int | None = None,
) -> TabularModel:
    """Add-smoothing n-gram fit: one logit row per context bucket.

    Rows are log((count + smoothing) / (total + smoothing * V)); buckets
    never observed fall back to the uniform pure-smoothing distribution.
    ``n_contexts`` below V^order turns on hashed bucketing (the capacity
    knob); default is the exact table.
    """
    if smoothing <= 0.0:
        raise InvalidParameterError("smoothing must be > 0")
    model = TabularModel.zeros(vocab_size, order, n_contexts)
    counts = np.zeros_like(model.logits)
    for seq in corpus.sequences:
        for s in range(len(seq)):
            lo = max(0, s - order)
            idx = model.context_index(seq[lo:s])
            counts[idx, seq[s]] += 1.0
    totals = counts.sum(axis=1, keepdims=True)
    model.logits = np.log(
        (counts + smoothing) / (totals + smoothing * vocab_size)
    )
    return model


def context_pool(corpus: Corpus, window: int) -> list:
    """All per-position histories of the corpus, trimmed to ``window`` tokens."""
    pool = []
    for seq in corpus.sequences:
        toks = [int(t) for t in seq]
        for s in range(len(toks)):
            pool.append(tuple(toks[max(0, s - window) : s]))
    return pool


def cross_entropy(model, corpus: Corpus) -> float:
    """Mean negative log-likelihood of the corpus under the model (nats)."""
    from .prob import log_softmax

    total = 0.0
    n = 0
    for seq in corpus.sequences:
        toks = [int(t) for t in seq]
        contexts = [tuple(toks[max(0, s - model.order) : s]) for s in range(len(toks))]
        logp = log_softmax(model.logits_for(contexts))
        total += -logp[np.arange(len(toks)), toks].sum()
        n += len(toks)
    return total / n


# ---------------------------------------------------------------------------
# serialization: text formats with magic headers
# ---------------------------------------------------------------------------

_CORPUS_MAGIC = "TAIDLAB-CORPUS v1"
_TABULAR_MAGIC = "TAIDLAB-TABULAR v1"
_LINEAR_MAGIC = "TAIDLAB-LINEAR v1"


def save_corpus(corpus: Corpus, path):
    with open(path, "w") as fh:
        fh.write(f"{_CORPUS_MAGIC}\n")
        fh.write(f"vocab {corpus.vocab_size}\n")
        fh.write(f"order {corpus.order}\n")
        fh.write(f"sequences {len(corpus.sequences)}\n")
        for seq in corpus.sequences:
            fh.write(" ".join(str(int(t)) for t in seq) + "\n")


def load_corpus(path) -> Corpus:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _CORPUS_MAGIC:
        raise InvalidInputError(f"{path}: not a corpus file (bad magic)")
    vocab = int(lines[1].split()[1])
    order = int(lines[2].split()[1])
    n_seq = int(lines[3].split()[1])
    seqs = [
        np.array([int(t) for t in line.split()], dtype=np.int64)
        for line in lines[4 : 4 + n_seq]
    ]
    return Corpus(seqs, vocab, order)


def _write_matrix(fh, matrix: np.ndarray):
    for row in matrix:
        fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def _read_matrix(lines, n_rows: int, n_cols: int) -> np.ndarray:
    rows = [[float(x) for x in line.split()] for line in lines[:n_rows]]
    mat = np.array(rows, dtype=np.float64)
    if mat.shape != (n_rows, n_cols):
        raise InvalidInputError("model file matrix has wrong shape")
    return mat


def save_model(model, path):
    """Write a tabular or linear model as a headed text file."""
    with open(path, "w") as fh:
        if isinstance(model, TabularModel):
            fh.write(f"{_TABULAR_MAGIC}\n")
            fh.write(f"vocab {model.vocab_size}\n")
            fh.write(f"order {model.order}\n")
            fh.write(f"contexts {model.n_contexts}\n")
            _write_matrix(fh, model.logits)
        elif isinstance(model, LinearModel):
            fh.write(f"{_LINEAR_MAGIC}\n")
            fh.write(f"vocab {model.vocab_size}\n")
            fh.write(f"features {model.feature_spec}\n")
            fh.write(f"rows {model.weights.shape[0]}\n")
            _write_matrix(fh, model.weights)
        else:
            raise InvalidParameterError(f"cannot serialize {type(model).__name__}")


def load_model(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InvalidInputError(f"{path}: empty model file")
    if lines[0] == _TABULAR_MAGIC:
        vocab = int(lines[1].split()[1])
        order = int(lines[2].split()[1])
        n_contexts = int(lines[3].split()[1])
        logits = _read_matrix(lines[4:], n_contexts + 1, vocab)
        return TabularModel(logits, vocab, order, n_contexts)
    if lines[0] == _LINEAR_MAGIC:
        vocab = int(lines[1].split()[1])
        spec = lines[2].split(" ", 1)[1]
        n_rows = int(lines[3].split()[1])
        weights = _read_matrix(lines[4:], n_rows, vocab)
        return LinearModel(weights, vocab, spec)
    raise InvalidInputError(f"{path}: unknown model magic {lines[0]!r}")
