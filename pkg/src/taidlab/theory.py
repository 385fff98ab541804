"""Closed-form collapse model: interpolated-teacher ridge recursion.

The regression stand-in for distillation: labels y live in R^N, the
variational fit with kernel regularizer has the closed form
``y+ = V^T D (lambda I + D)^{-1} V y`` over the Gram spectrum (V, D), with
``lambda = alpha*sqrt(N*eps)/(||y|| - sqrt(N*eps))`` for some alpha between
the extreme eigenvalues.  The recursion either re-feeds the student's own
labels (self-distillation) or blends them with the original teacher signal
at weight t/T (interpolated mode).  A step has collapsed when the label
norm falls to sqrt(N*eps), i.e. the zero function already fits within
tolerance.

The module also provides the two closed-form bounds used to check the
recursion: the self-distillation safe-step count (r0-1)/kappa and the
initial-norm threshold (1+sqrt(1+4T(1+kappa)))/2 * sqrt(N*eps) beyond which
the interpolated recursion never collapses.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionError,
    InvalidInputError,
    InvalidKernelError,
    InvalidParameterError,
)

__all__ = [
    "jacobi_eigh",
    "GramSpectrum",
    "gram_from_kernel",
    "random_spectrum",
    "SimConfig",
    "SimStep",
    "SimTrace",
    "run_recursion",
    "predicted_self_distill_collapse_step",
    "corollary_initial_norm",
    "TrialOutcome",
    "run_collapse_trials",
    "write_trace_csv",
    "TRACE_COLUMNS",
    "TRIAL_CHECKS",
]

TRACE_COLUMNS = ("step", "lambda", "r", "norm_y", "collapsed")


def _offdiag_norm(a: np.ndarray) -> float:
    return math.sqrt(max(0.0, float((a**2).sum() - (np.diag(a) ** 2).sum())))


def jacobi_eigh(matrix: np.ndarray, tol_factor: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (basis, eigenvalues) with basis rows the eigenvectors, so that
    ``matrix = basis.T @ diag(eigenvalues) @ basis``.  Sweeps stop once the
    off-diagonal Frobenius norm drops below ``tol_factor`` times the matrix
    Frobenius norm.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise DimensionError("matrix must be square")
    vecs = np.eye(n)
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return vecs, np.zeros(n)
    for _ in range(max_sweeps):
        if _offdiag_norm(a) <= tol_factor * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vec_p, vec_q = vecs[:, p].copy(), vecs[:, q].copy()
                vecs[:, p] = c * vec_p - s * vec_q
                vecs[:, q] = s * vec_p + c * vec_q
    return vecs.T, np.diag(a).copy()


@dataclass(frozen=True)
class GramSpectrum:
    """Eigendecomposition of a positive definite Gram matrix.

    ``basis`` rows are orthonormal eigenvectors; the matrix reconstructs as
    ``basis.T @ diag(eigenvalues) @ basis``.
    """

    basis: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.basis, dtype=np.float64)
        d = np.asarray(self.eigenvalues, dtype=np.float64)
        n = d.shape[0]
        if v.shape != (n, n):
            raise DimensionError("basis must be N x N for N eigenvalues")
        if np.linalg.norm(v @ v.T - np.eye(n)) > 1e-8:
            raise InvalidInputError("basis is not orthogonal (1e-8 Frobenius)")
        if np.any(d <= 0.0):
            raise InvalidInputError("all Gram eigenvalues must be positive")
        object.__setattr__(self, "basis", v)
        object.__setattr__(self, "eigenvalues", d)

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def d_min(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def d_max(self) -> float:
        return float(self.eigenvalues.max())

    @property
    def kappa(self) -> float:
        return self.d_max / self.d_min

    @classmethod
    def from_matrix(cls, gram: np.ndarray) -> "GramSpectrum":
        gram = np.asarray(gram, dtype=np.float64)
        if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
            raise DimensionError("Gram matrix must be square")
        if not np.all(np.isfinite(gram)):
            raise InvalidInputError("Gram matrix has NaN/Inf entries")
        if np.abs(gram - gram.T).max() > 1e-10 * max(1.0, np.abs(gram).max()):
            raise InvalidKernelError("Gram matrix is not symmetric")
        basis, eigvals = jacobi_eigh(gram)
        if eigvals.min() <= 1e-12 * max(eigvals.max(), 0.0):
            raise InvalidKernelError(
                "kernel matrix is not positive definite "
                f"(min eigenvalue {eigvals.min():.3e})"
            )
        spectrum = cls(basis, eigvals)
        recon = basis.T @ (eigvals[:, None] * basis)
        rel = np.linalg.norm(recon - gram) / np.linalg.norm(gram)
        if rel >= 1e-8:
            raise RuntimeError(f"eigendecomposition failed to reconstruct ({rel:.2e})")
        return spectrum


def gram_from_kernel(
    points=None,
    kernel: str = "rbf",
    bandwidth: float = 1.0,
    matrix=None,
) -> GramSpectrum:
    """Spectrum of a kernel Gram matrix G_ij = g(x_i, x_j) / N.

    ``kernel`` is one of ``"rbf"`` (Gaussian with the given bandwidth),
    ``"linear"`` (dot product) or ``"explicit"`` (``matrix`` is used as G
    verbatim, including any 1/N scaling the caller wants).
    """
    if kernel == "explicit":
        if matrix is None:
            raise InvalidParameterError("explicit kernel requires a matrix")
        return GramSpectrum.from_matrix(matrix)
    if points is None:
        raise InvalidParameterError(f"kernel {kernel!r} requires points")
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = x.shape[0]
    if kernel == "rbf":
        if bandwidth <= 0.0:
            raise InvalidParameterError("bandwidth must be > 0")
        sq = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=-1)
        gram = np.exp(-sq / (2.0 * bandwidth**2)) / n
    elif kernel == "linear":
        gram = (x @ x.T) / n
    else:
        raise InvalidParameterError(f"unknown kernel {kernel!r}")
    return GramSpectrum.from_matrix(gram)


def random_spectrum(rng: np.random.Generator, n: int, kappa: float) -> GramSpectrum:
    """Synthetic PD spectrum with condition number exactly ``kappa``.

    Basis from QR of a Gaussian matrix; eigenvalues uniform in [1, kappa]
    with the endpoints pinned.
    """
    if n < 2:
        raise InvalidParameterError("spectrum size must be >= 2")
    if kappa < 1.0:
        raise InvalidParameterError("kappa must be >= 1")
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    d = np.concatenate(([1.0, kappa], rng.uniform(1.0, kappa, size=n - 2)))
    rng.shuffle(d)
    return GramSpectrum(q.T, d)


@dataclass(frozen=True)
class SimConfig:
    """Recursion setup: initial labels, tolerance, horizon, lambda policy.

    ``alpha_mode`` picks the multiplier inside the lambda bracket: "d_min"
    (weakest shrinkage), "d_max" (strongest), or a fixed float that must lie
    within [d_min, d_max] of the spectrum at run time.  ``mode`` selects the
    interpolated recursion ("taid") or plain self-distillation
    ("self_distill").
    """

    y0: np.ndarray
    epsilon: float
    horizon: int
    alpha_mode: object = "d_min"
    mode: str = "taid"
    continue_after_collapse: bool = False

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=np.float64)
        if y0.ndim != 1 or y0.shape[0] < 1:
            raise DimensionError("y0 must be a 1-D vector")
        if not np.all(np.isfinite(y0)):
            raise InvalidInputError("y0 has NaN/Inf entries")
        if self.epsilon <= 0.0:
            raise InvalidParameterError("epsilon must be > 0")
        if self.horizon < 1:
            raise InvalidParameterError("horizon must be >= 1")
        if self.mode not in ("taid", "self_distill"):
            raise InvalidParameterError(f"unknown mode {self.mode!r}")
        if isinstance(self.alpha_mode, str):
            if self.alpha_mode not in ("d_min", "d_max"):
                raise InvalidParameterError(
                    "alpha_mode must be 'd_min', 'd_max' or a float"
                )
        elif float(self.alpha_mode) <= 0.0:
            raise InvalidParameterError("fixed alpha must be > 0")
        n = y0.shape[0]
        if float(y0 @ y0) <= n * self.epsilon:
            raise InvalidInputError(
                "||y0||^2 <= N*epsilon: the problem starts collapsed"
            )
        object.__setattr__(self, "y0", y0)

    @property
    def r0(self) -> float:
        n = self.y0.shape[0]
        return float(np.linalg.norm(self.y0)) / math.sqrt(n * self.epsilon)


@dataclass(frozen=True)
class SimStep:
    step: int
    y: np.ndarray
    y_tilde: np.ndarray
    lam: float
    r: float
    collapsed: bool


@dataclass
class SimTrace:
    steps: list = field(default_factory=list)
    final_y: np.ndarray | None = None

    @property
    def collapse_step(self) -> int | None:
        for s in self.steps:
            if s.collapsed:
                return s.step
        return None

    @property
    def collapsed(self) -> bool:
        return self.collapse_step is not None


def _resolve_alpha(spectrum: GramSpectrum, alpha_mode) -> float:
    if alpha_mode == "d_min":
        return spectrum.d_min
    if alpha_mode == "d_max":
        return spectrum.d_max
    alpha = float(alpha_mode)
    if not spectrum.d_min <= alpha <= spectrum.d_max:
        raise InvalidParameterError(
            f"fixed alpha {alpha} outside [d_min, d_max] = "
            f"[{spectrum.d_min}, {spectrum.d_max}]"
        )
    return alpha


def run_recursion(spectrum: GramSpectrum, config: SimConfig) -> SimTrace:
    """Run the label recursion for up to ``horizon`` steps.

    Per step t: compose the intermediate teacher (interpolated mode blends
    the current labels with the original signal at weight t/T), check the
    collapse criterion r_t <= 1, then shrink through the spectral filter
    d/(lambda_t + d).  On collapse the run stops, unless
    ``continue_after_collapse`` is set, in which case the labels jump to the
    degenerate solution 0 and the recursion keeps going (lambda is recorded
    as NaN on collapsed steps).
    """
    n = spectrum.size
    if config.y0.shape[0] != n:
        raise DimensionError("y0 length does not match spectrum size")
    alpha = _resolve_alpha(spectrum, config.alpha_mode)
    sqrt_ne = math.sqrt(n * config.epsilon)
    horizon = config.horizon
    v = spectrum.basis
    d = spectrum.eigenvalues

    trace = SimTrace()
    y = config.y0.copy()
    for t in range(horizon):
        if config.mode == "taid":
            w = t / horizon
            y_tilde = (1.0 - w) * y + w * config.y0
        else:
            y_tilde = y.copy()
        norm = float(np.linalg.norm(y_tilde))
        r = norm / sqrt_ne
        collapsed = norm <= sqrt_ne
        if collapsed:
            trace.steps.append(SimStep(t, y, y_tilde, math.nan, r, True))
            if not config.continue_after_collapse:
                trace.final_y = y
                return trace
            y = np.zeros(n)
            continue
        lam = alpha * sqrt_ne / (norm - sqrt_ne)
        trace.steps.append(SimStep(t, y, y_tilde, lam, r, False))
        z = v @ y_tilde
        z *= d / (lam + d)
        y = v.T @ z
    trace.final_y = y
    return trace


def predicted_self_distill_collapse_step(r0: float, kappa: float) -> float:
    """Guaranteed-safe step count for self-distillation: (r0 - 1) / kappa."""
    if r0 < 1.0:
        raise InvalidInputError(f"r0={r0} must be >= 1")
    if kappa < 1.0:
        raise InvalidParameterError(f"kappa={kappa} must be >= 1")
    return (r0 - 1.0) / kappa


def corollary_initial_norm(
    horizon: int, kappa: float, n: int, epsilon: float
) -> float:
    """Initial label norm above which the interpolated recursion never collapses.

    Threshold (1 + sqrt(1 + 4*T*(1+kappa))) / 2 * sqrt(N*eps), with the
    order constant taken as 1.
    """
    if horizon < 1:
        raise InvalidParameterError("horizon must be >= 1")
    if kappa < 1.0:
        raise InvalidParameterError("kappa must be >= 1")
    if n < 1 or epsilon <= 0.0:
        raise InvalidParameterError("need n >= 1 and epsilon > 0")
    root = math.sqrt(1.0 + 4.0 * horizon * (1.0 + kappa))
    return (1.0 + root) / 2.0 * math.sqrt(n * epsilon)


@dataclass(frozen=True)
class TrialOutcome:
    """One randomized recursion trial and its property checks."""

    index: int
    n: int
    kappa: float
    horizon: int
    r0: float
    mode: str
    alpha_mode: object
    collapse_step: int | None
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


TRIAL_CHECKS = ("theorem2", "self_distill", "corollary1")

#: multiplicative slack for floating-point comparisons of exact bounds
_BOUND_SLACK = 1e-9


def _unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def run_collapse_trials(
    check: str,
    n_trials: int,
    seed: int,
    kappa_range=(1.0, 10.0),
    n_range=(4, 64),
    horizon_range=(10, 200),
    r0_range=(1.5, 8.0),
    epsilon: float = 0.25,
) -> list[TrialOutcome]:
    """Randomized recursion trials for the collapse bounds.

    check="theorem2": interpolated mode; every recorded step must satisfy
    the norm floor ||y_tilde_t|| >= (t/T)*||y0|| and any collapse must happen
    at t <= T/r0.  The lambda multiplier cycles through d_min / d_max / a
    random fixed value to stress the whole bracket.

    check="self_distill": strongest shrinkage (alpha = d_max), horizon
    ceil(20*r0)+5; no collapse may occur at or before floor((r0-1)/kappa)
    steps, and a collapse step must be observed before the horizon runs out.

    check="corollary1": interpolated mode with ||y0|| = 1.05x the
    no-collapse threshold; the run must complete every step uncollapsed.
    """
    if check not in TRIAL_CHECKS:
        raise InvalidParameterError(f"check must be one of {TRIAL_CHECKS}")
    rng = np.random.default_rng(seed)
    outcomes = []
    for i in range(n_trials):
        kappa = float(rng.uniform(*kappa_range))
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        horizon = int(rng.integers(horizon_range[0], horizon_range[1] + 1))
        spectrum = random_spectrum(rng, n, kappa)
        direction = _unit_vector(rng, n)
        sqrt_ne = math.sqrt(n * epsilon)

        if check == "corollary1":
            norm0 = 1.05 * corollary_initial_norm(horizon, kappa, n, epsilon)
            mode, alpha_mode = "taid", "d_min"
        elif check == "self_distill":
            r0 = float(rng.uniform(*r0_range))
            norm0 = r0 * sqrt_ne
            horizon = int(math.ceil(20.0 * r0)) + 5
            mode, alpha_mode = "self_distill", "d_max"
        else:
            r0 = float(rng.uniform(*r0_range))
            norm0 = r0 * sqrt_ne
            mode = "taid"
            alpha_mode = ("d_min", "d_max", float(rng.uniform(1.0, kappa)))[i % 3]

        config = SimConfig(
            y0=norm0 * direction,
            epsilon=epsilon,
            horizon=horizon,
            alpha_mode=alpha_mode,
            mode=mode,
        )
        trace = run_recursion(spectrum, config)
        r0 = config.r0
        collapse = trace.collapse_step

        if check == "theorem2":
            floor_ok = all(
                float(np.linalg.norm(s.y_tilde))
                >= (s.step / horizon) * norm0 * (1.0 - _BOUND_SLACK)
                for s in trace.steps
            )
            late_ok = collapse is None or collapse <= horizon / r0 + _BOUND_SLACK
            checks = {"norm_floor": floor_ok, "late_phase_safe": late_ok}
        elif check == "self_distill":
            safe_steps = math.floor(
                predicted_self_distill_collapse_step(r0, kappa)
            )
            guarantee_ok = collapse is None or collapse > safe_steps
            checks = {
                "guarantee_honored": guarantee_ok,
                "eventually_collapses": collapse is not None,
            }
        else:
            checks = {"no_collapse": collapse is None and len(trace.steps) == horizon}

        outcomes.append(
            TrialOutcome(
                i, n, kappa, horizon, r0, mode, alpha_mode, collapse, checks
            )
        )
    return outcomes


def write_trace_csv(trace: SimTrace, path):
    """Persist the per-step trace with the fixed public columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for s in trace.steps:
            writer.writerow(
                [
                    s.step,
                    repr(s.lam),
                    repr(s.r),
                    repr(float(np.linalg.norm(s.y))),
                    int(s.collapsed),
                ]
            )
