"""Monte Carlo diagonal estimators.

Two estimators for ``diag(A)`` of a symmetric operator A:

* unnormalized: ``mean_k (A w_k) o w_k`` for any probe family, and
* normalized (Gaussian probes only):
  ``(sum_k (A z_k) o z_k) / (sum_k z_k o z_k)`` elementwise,

plus the gradient-outer-product estimator ``mean_k (grad f(x_k))^2`` for
derivative-based global sensitivity metrics.

Estimates hold compensated accumulator sums rather than means, so streams
can be split across workers, updated incrementally and merged exactly up to
floating-point reassociation.  Probe k of a run always consumes stream
counter k, making batched, streamed and parallel runs probe-identical.

The normalized estimator's componentwise error at N = 1 is Cauchy
distributed: its mean and variance do not exist, so single-sample
normalized estimates must not be averaged across runs.
"""

from abc import ABC, abstractmethod
from typing import Union

import numpy as np

from .operators import SymmetricOperator
from .probes import (
    ProbeDistribution,
    RngState,
    gaussian,
    sample_probe_block,
    sample_uniform_block,
)

__all__ = [
    "DegenerateProbeError",
    "DiagonalEstimate",
    "GradientOracle",
    "LinearGradientOracle",
    "QuadraticGradientOracle",
    "UNNORMALIZED",
    "NORMALIZED",
    "componentwise_relative_error",
    "estimate_dgsm",
    "estimate_diagonal",
    "estimate_diagonal_normalized",
    "normwise_relative_error",
]

UNNORMALIZED = "unnormalized"
NORMALIZED = "normalized"

_DEGENERATE_DENOMINATOR = 1e-300


class DegenerateProbeError(RuntimeError):
    """A normalized-estimator denominator vanished (probability-zero event)."""


class _CompensatedSum:
    """Neumaier-compensated vector accumulator."""

    __slots__ = ("total", "residual")

    def __init__(self, n: int):
        self.total = np.zeros(n)
        self.residual = np.zeros(n)

    def add(self, values: np.ndarray) -> None:
        t = self.total + values
        swap = np.abs(self.total) >= np.abs(values)
        self.residual += np.where(
            swap, (self.total - t) + values, (values - t) + self.total
        )
        self.total = t

    def value(self) -> np.ndarray:
        return self.total + self.residual

    def copy(self) -> "_CompensatedSum":
        out = _CompensatedSum(len(self.total))
        out.total = self.total.copy()
        out.residual = self.residual.copy()
        return out


class DiagonalEstimate:
    """Running estimate of a matrix diagonal.

    ``mode`` is fixed at creation: :data:`UNNORMALIZED` divides the
    accumulated ``(A w) o w`` by the sample count, :data:`NORMALIZED`
    divides it elementwise by the accumulated ``w o w``.
    """

    def __init__(self, dim: int, mode: str = UNNORMALIZED):
        if mode not in (UNNORMALIZED, NORMALIZED):
            raise ValueError(f"unknown estimate mode {mode!r}")
        if dim < 1:
            raise ValueError("dimension must be positive")
        self._dim = int(dim)
        self._mode = mode
        self._count = 0
        self._num = _CompensatedSum(dim)
        self._den = _CompensatedSum(dim) if mode == NORMALIZED else None

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def n_samples(self) -> int:
        return self._count

    @property
    def numerator(self) -> np.ndarray:
        return self._num.value()

    @property
    def denominator(self) -> np.ndarray:
        if self._den is None:
            raise ValueError("unnormalized estimates keep no denominator")
        return self._den.value()

    def _check_vector(self, v: np.ndarray, name: str) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self._dim,):
            raise ValueError(
                f"{name} has shape {v.shape}, expected ({self._dim},)"
            )
        return v

    def update(self, probe: np.ndarray, aprobe: np.ndarray) -> "DiagonalEstimate":
        """Consume one probe and its image ``A @ probe``."""
        probe = self._check_vector(probe, "probe")
        aprobe = self._check_vector(aprobe, "aprobe")
        self._num.add(aprobe * probe)
        if self._den is not None:
            self._den.add(probe * probe)
        self._count += 1
        return self

    def update_block(self, probes: np.ndarray, aprobes: np.ndarray) -> "DiagonalEstimate":
        """Consume a batch of probes given as (n, k) column blocks."""
        probes = np.asarray(probes, dtype=np.float64)
        aprobes = np.asarray(aprobes, dtype=np.float64)
        if probes.shape != aprobes.shape or probes.ndim != 2 or probes.shape[0] != self._dim:
            raise ValueError("probe blocks must both be (n, k) arrays")
        self._num.add((aprobes * probes).sum(axis=1))
        if self._den is not None:
            self._den.add((probes * probes).sum(axis=1))
        self._count += probes.shape[1]
        return self

    def merge(self, other: "DiagonalEstimate") -> "DiagonalEstimate":
        """Fold another estimate (over a disjoint probe stream) into this one."""
        if other._mode != self._mode or other._dim != self._dim:
            raise ValueError("can only merge estimates of equal mode and dimension")
        self._num.add(other._num.total)
        self._num.add(other._num.residual)
        if self._den is not None:
            self._den.add(other._den.total)
            self._den.add(other._den.residual)
        self._count += other._count
        return self

    def copy(self) -> "DiagonalEstimate":
        out = DiagonalEstimate(self._dim, self._mode)
        out._count = self._count
        out._num = self._num.copy()
        out._den = self._den.copy() if self._den is not None else None
        return out

    @property
    def value(self) -> np.ndarray:
        """Current diagonal estimate."""
        if self._count < 1:
            raise ValueError("estimate holds no samples yet")
        if self._mode == UNNORMALIZED:
            return self._num.value() / self._count
        den = self._den.value()
        if np.any(np.abs(den) < _DEGENERATE_DENOMINATOR):
            raise DegenerateProbeError(
                "normalized-estimator denominator vanished; this signals a "
                "misused or repeated probe stream"
            )
        return self._num.value() / den


def _resolve_state(seed: Union[int, RngState]) -> RngState:
    return seed if isinstance(seed, RngState) else RngState(int(seed))


def _run_estimate(
    op: SymmetricOperator,
    dist: ProbeDistribution,
    n_samples: int,
    state: RngState,
    mode: str,
    block_size: int,
) -> DiagonalEstimate:
    est = DiagonalEstimate(op.dim, mode)
    remaining = n_samples
    while remaining > 0:
        count = min(block_size, remaining)
        probes, state = sample_probe_block(dist, op.dim, state, count)
        est.update_block(probes, op.apply(probes))
        remaining -= count
    return est


def estimate_diagonal(
    op: SymmetricOperator,
    dist: ProbeDistribution,
    n_samples: int,
    seed: Union[int, RngState],
    block_size: int = 1024,
) -> DiagonalEstimate:
    """Unnormalized Monte Carlo estimate of ``diag(A)`` from ``n_samples`` probes.

    Costs exactly ``n_samples`` operator applications and is unbiased for
    any of the probe families.  With Rademacher probes a diagonal matrix is
    recovered exactly from a single sample.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    return _run_estimate(op, dist, n_samples, _resolve_state(seed), UNNORMALIZED, block_size)


def estimate_diagonal_normalized(
    op: SymmetricOperator,
    n_samples: int,
    seed: Union[int, RngState],
    block_size: int = 1024,
) -> DiagonalEstimate:
    """Normalized (elementwise-ratio) estimate of ``diag(A)`` from Gaussian probes.

    Restricted to Gaussian probes: the ratio's error law is Gaussian-specific,
    and Rademacher probes would make the denominator identically N.  Exact for
    diagonal matrices already at N = 1.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    return _run_estimate(op, gaussian(), n_samples, _resolve_state(seed), NORMALIZED, block_size)


class GradientOracle(ABC):
    """Source of gradient samples ``grad f(x)`` at random inputs ``x``.

    ``beta``, when set, is an almost-sure bound on the sup norm of the
    gradient; every draw is checked against it.
    """

    def __init__(self, dim: int, beta: float = None):
        if dim < 1:
            raise ValueError("input dimension must be positive")
        self.dim = int(dim)
        self.beta = None if beta is None else float(beta)

    @abstractmethod
    def _sample_block(self, state: RngState, count: int) -> tuple[np.ndarray, RngState]:
        """Return (dim, count) gradient samples and the advanced state."""

    def sample_gradient_block(self, state: RngState, count: int) -> tuple[np.ndarray, RngState]:
        grads, new_state = self._sample_block(state, count)
        grads = np.asarray(grads, dtype=np.float64)
        if grads.shape != (self.dim, count):
            raise ValueError(
                f"oracle returned shape {grads.shape}, expected {(self.dim, count)}"
            )
        if self.beta is not None:
            worst = float(np.max(np.abs(grads))) if grads.size else 0.0
            if worst > self.beta * (1.0 + 1e-12):
                raise ValueError(
                    f"gradient sup norm {worst:g} exceeds the declared bound {self.beta:g}"
                )
        return grads, new_state

    def sample_gradient(self, state: RngState) -> tuple[np.ndarray, RngState]:
        grads, new_state = self.sample_gradient_block(state, 1)
        return grads[:, 0], new_state


class LinearGradientOracle(GradientOracle):
    """Gradient of f(x) = h^T x: constant h, so every sample is exact."""

    def __init__(self, h: np.ndarray):
        h = np.asarray(h, dtype=np.float64).ravel()
        super().__init__(h.shape[0], beta=float(np.max(np.abs(h))))
        self.h = h

    def _sample_block(self, state, count):
        # the gradient ignores x; advance the counter to keep addressing uniform
        return np.tile(self.h[:, None], (1, count)), state.advance(count)


class QuadraticGradientOracle(GradientOracle):
    """Gradient of f(x) = x^T S x / 2 at x uniform on [-1, 1]^n.

    ``factor`` is the symmetric square root S, given either as a full
    matrix or as a 1-D array of diagonal entries.
    """

    def __init__(self, factor: np.ndarray):
        factor = np.asarray(factor, dtype=np.float64)
        if factor.ndim == 1:
            dim = factor.shape[0]
            beta = float(np.max(np.abs(factor)))
        elif factor.ndim == 2 and factor.shape[0] == factor.shape[1]:
            dim = factor.shape[0]
            beta = float(np.max(np.abs(factor).sum(axis=1)))
        else:
            raise ValueError("factor must be a square matrix or a diagonal vector")
        super().__init__(dim, beta=beta)
        self.factor = factor

    def second_moment_diag(self) -> np.ndarray:
        """Exact sensitivity metric diag(C) = diag(S^2) / 3."""
        if self.factor.ndim == 1:
            return self.factor * self.factor / 3.0
        return np.einsum("ij,ji->i", self.factor, self.factor) / 3.0

    def _sample_block(self, state, count):
        x, new_state = sample_uniform_block(self.dim, state, count)
        if self.factor.ndim == 1:
            return self.factor[:, None] * x, new_state
        return self.factor @ x, new_state


def estimate_dgsm(
    oracle: GradientOracle,
    n_samples: int,
    seed: Union[int, RngState],
    block_size: int = 1024,
) -> DiagonalEstimate:
    """Estimate the diagonal of the gradient second-moment matrix.

    Averages ``(grad f(x_k))^2`` elementwise over ``n_samples`` draws;
    every entry of the estimate is nonnegative.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    state = _resolve_state(seed)
    est = DiagonalEstimate(oracle.dim, UNNORMALIZED)
    remaining = n_samples
    while remaining > 0:
        count = min(block_size, remaining)
        grads, state = oracle.sample_gradient_block(state, count)
        est.update_block(grads, grads)
        remaining -= count
    return est


def _estimate_values(est) -> np.ndarray:
    if isinstance(est, DiagonalEstimate):
        return est.value
    return np.asarray(est, dtype=np.float64)


def normwise_relative_error(est, exact: np.ndarray) -> float:
    """max_i |exact_i - est_i| / max_i |exact_i|.

    This is the 2-norm relative error of the associated diagonal matrices,
    the norm of a diagonal matrix being its largest-magnitude entry.
    """
    values = _estimate_values(est)
    exact = np.asarray(exact, dtype=np.float64)
    if values.shape != exact.shape:
        raise ValueError("estimate and exact diagonal have different lengths")
    scale = float(np.max(np.abs(exact)))
    if scale == 0.0:
        raise ValueError("relative error undefined for an all-zero diagonal")
    return float(np.max(np.abs(exact - values))) / scale


def componentwise_relative_error(est, exact: np.ndarray, index: int) -> float:
    """|est_i - exact_i| / |exact_i| for one component (0-based index)."""
    values = _estimate_values(est)
    exact = np.asarray(exact, dtype=np.float64)
    reference = float(exact[index])
    if reference == 0.0:
        raise ValueError(f"component {index} of the exact diagonal is zero")
    return abs(float(values[index]) - reference) / abs(reference)
