"""Probabilistic error-bound evaluators and (epsilon, delta) sample planners.

Every function here is a pure evaluation of a closed-form tail bound, bound
constant or sample-size requirement; nothing is estimated.  Bound constants
need explicit matrix entries, so these operations accept dense-capable
operators (or raw arrays), never pure matrix-free ones.

Conventions:

* Tail bounds are clamped to [0, 1] for reporting; pass ``clamp=False`` to
  obtain the raw value (useful for plotting bound curves).
* Planners return ``ceil`` of the formula, clamped to at least 1 sample.
* Component indices are 0-based.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .operators import SymmetricOperator
from .probes import validate_sparsity

__all__ = [
    "ComponentConstants",
    "DgsmConstants",
    "GaussianNormwisePlan",
    "NormwiseConstants",
    "component_constants",
    "component_tail_bound",
    "dgsm_constants",
    "dgsm_tail_bound",
    "epsilon_for_samples_dgsm",
    "epsilon_for_samples_normwise",
    "linear_model_constants",
    "normwise_constants",
    "normwise_tail_bound",
    "plan_samples_component",
    "plan_samples_dgsm",
    "plan_samples_gaussian_normwise",
    "plan_samples_normwise",
    "quadratic_model_constants",
]

COMPONENT_METHODS = ("rademacher", "gaussian", "normalized_gaussian")


def _as_dense(matrix) -> np.ndarray:
    if isinstance(matrix, SymmetricOperator):
        return matrix.to_dense()
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    gap = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if gap > 1e-12 * max(float(np.max(np.abs(m))), 1e-300):
        raise ValueError("matrix is not symmetric")
    return m


def _check_eps_delta(eps: float, delta: float) -> None:
    if eps <= 0.0:
        raise ValueError("epsilon must be positive")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")


def _ceil_samples(value: float) -> int:
    return max(1, math.ceil(value - 1e-12))


@dataclass(frozen=True)
class NormwiseConstants:
    """Ingredients of the normwise probe tail bound and planner.

    ``k1`` and ``k2`` measure the absolute deviation from diagonality
    (variance proxy and summand bound), ``delta1``/``delta2`` their relative
    counterparts, and ``d`` the intrinsic dimension of the variance proxy.
    ``is_diagonal`` flags matrices recovered exactly by a single standard
    Rademacher sample, for which (at s = 1) all constants degenerate.
    """

    s: float
    k1: float
    k2: float
    d: float
    delta1: float
    delta2: float
    norm_da: float
    is_diagonal: bool = False

    @property
    def delta3(self) -> float:
        return self.delta1 / self.delta2


def normwise_constants(matrix, s: float = 1.0) -> NormwiseConstants:
    """Compute normwise bound constants from explicit entries.

    At s = 1: k1 = max_i (||a_i||^2 - a_ii^2), k2 = max_i sum_{j!=i} |a_ij|,
    d = (||A||_F^2 - ||D_A||_F^2) / k1.  A diagonal matrix yields a flagged
    result rather than an error.
    """
    s = validate_sparsity(s)
    m = _as_dense(matrix)
    n = m.shape[0]
    diag = np.diag(m).copy()
    norm_da = float(np.max(np.abs(diag)))
    off = m - np.diag(diag)
    if not np.any(off):
        if s == 1.0:
            return NormwiseConstants(
                s=s, k1=0.0, k2=0.0, d=math.nan, delta1=0.0, delta2=0.0,
                norm_da=norm_da, is_diagonal=True,
            )
        # sparse probes do not recover diagonal matrices exactly, and the
        # constants stay positive; keep them but carry the flag
        variance_diag = (s - 1.0) * diag * diag
        k1 = float(np.max(variance_diag))
        k2 = float(np.max((s - 1.0) * np.abs(diag)))
        d = float(np.sum(variance_diag)) / k1 if k1 > 0.0 else math.nan
        if norm_da == 0.0:
            raise ValueError("zero matrix has no relative bound constants")
        return NormwiseConstants(
            s=s, k1=k1, k2=k2, d=d, delta1=k1 / norm_da**2,
            delta2=k2 / norm_da, norm_da=norm_da, is_diagonal=True,
        )
    col_sq = np.einsum("ij,ij->j", m, m)
    variance_diag = col_sq + (s - 2.0) * diag * diag
    k1 = float(np.max(variance_diag))
    k2 = float(np.max((s - 1.0) * np.abs(diag) + s * np.sum(np.abs(off), axis=1)))
    d = float(np.sum(variance_diag)) / k1
    if norm_da == 0.0:
        raise ValueError(
            "all diagonal entries are zero; relative normwise targets are undefined"
        )
    return NormwiseConstants(
        s=s,
        k1=k1,
        k2=k2,
        d=d,
        delta1=k1 / norm_da**2,
        delta2=k2 / norm_da,
        norm_da=norm_da,
    )


def normwise_tail_bound(
    c: NormwiseConstants, n_samples: int, t: float, clamp: bool = True
) -> float:
    """P[normwise absolute error >= t] <= 8 d exp(-N t^2 / (2 (k1 + t k2 / 3)))."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if t <= 0.0:
        raise ValueError("t must be positive")
    if c.is_diagonal and c.s == 1.0:
        return 0.0
    raw = 8.0 * c.d * math.exp(-n_samples * t * t / (2.0 * (c.k1 + t * c.k2 / 3.0)))
    return min(1.0, raw) if clamp else raw


def plan_samples_normwise(c: NormwiseConstants, eps: float, delta: float) -> int:
    """Samples for a normwise (eps, delta) estimate with (sparse) Rademacher probes.

    N >= (delta2 / (3 eps^2)) (2 eps + 6 delta1 / delta2) ln(8 d / delta);
    a diagonal matrix (s = 1) needs a single sample.
    """
    _check_eps_delta(eps, delta)
    if c.is_diagonal and c.s == 1.0:
        return 1
    value = (
        c.delta2
        / (3.0 * eps * eps)
        * (2.0 * eps + 6.0 * c.delta1 / c.delta2)
        * math.log(8.0 * c.d / delta)
    )
    return _ceil_samples(value)


def epsilon_for_samples_normwise(
    c: NormwiseConstants, n_samples: int, delta: float
) -> float:
    """Invert the simplified planner for the error level reachable at N samples.

    eps = sqrt((delta2 / 3N) (2 + 6 delta3) ln(8 d / delta)); the constant-2
    simplification of the 2 eps term makes this the bound-curve formula.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if c.is_diagonal and c.s == 1.0:
        return 0.0
    return math.sqrt(
        c.delta2
        / (3.0 * n_samples)
        * (2.0 + 6.0 * c.delta3)
        * math.log(8.0 * c.d / delta)
    )


@dataclass(frozen=True)
class GaussianNormwisePlan:
    """Outcome of the Gaussian normwise planner with its validity window.

    The planned sample count is valid only inside ``[window_low,
    window_high]``; when the required count falls outside (or the window is
    empty, as happens at n = 100), the plan is infeasible and ``violation``
    names the offending edge.
    """

    feasible: bool
    n_samples: Optional[int]
    required: float
    window_low: float
    window_high: int
    violation: Optional[str] = None


def plan_samples_gaussian_normwise(matrix, eps: float, delta: float) -> GaussianNormwisePlan:
    """Samples for a normwise (eps, delta) estimate with Gaussian probes.

    N = ceil(128 (e ln n)^3 / (eps^2 delta) * (||A||_inf / ||D_A||_inf)^2),
    subject to the validity window 8 e ln n <= N <= n.  Infeasibility is a
    returned value, not an error.
    """
    _check_eps_delta(eps, delta)
    m = _as_dense(matrix)
    n = m.shape[0]
    if n < 3:
        raise ValueError("the Gaussian normwise planner needs n >= 3")
    norm_inf = float(np.max(np.sum(np.abs(m), axis=1)))
    diag_inf = float(np.max(np.abs(np.diag(m))))
    if diag_inf == 0.0:
        raise ValueError("all diagonal entries are zero")
    ratio = norm_inf / diag_inf
    log_n = math.log(n)
    required = 128.0 * (math.e * log_n) ** 3 / (eps * eps * delta) * ratio * ratio
    planned = _ceil_samples(required)
    window_low = 8.0 * math.e * log_n
    if window_low > n:
        return GaussianNormwisePlan(
            feasible=False, n_samples=None, required=required,
            window_low=window_low, window_high=n, violation="empty_window",
        )
    if planned > n:
        return GaussianNormwisePlan(
            feasible=False, n_samples=None, required=required,
            window_low=window_low, window_high=n, violation="exceeds_dimension",
        )
    if planned < window_low:
        return GaussianNormwisePlan(
            feasible=False, n_samples=None, required=required,
            window_low=window_low, window_high=n, violation="below_window",
        )
    return GaussianNormwisePlan(
        feasible=True, n_samples=planned, required=required,
        window_low=window_low, window_high=n,
    )


@dataclass(frozen=True)
class ComponentConstants:
    """Row/column-i ingredients of the componentwise bounds.

    ``off2sq`` is the squared off-diagonal mass ||a_i||^2 - a_ii^2 (the
    Rademacher error variance per sample), ``l1``/``l2`` the Gaussian bound
    constants, ``delta1i``/``delta2i`` their relative forms, and ``psi`` the
    diagonal-dominance ratio |a_ii| / sqrt(off2sq) (None for a diagonal row,
    whose estimate is error-free).
    """

    index: int
    a_ii: float
    col_norm: float
    off2sq: float
    l1: float
    l2: float
    delta1i: float
    delta2i: float
    psi: Optional[float]

    @property
    def is_diagonal_row(self) -> bool:
        return self.off2sq == 0.0


def component_constants(matrix, index: int) -> ComponentConstants:
    """Componentwise bound constants for one (0-based) diagonal entry."""
    m = _as_dense(matrix)
    n = m.shape[0]
    if not (0 <= index < n):
        raise IndexError(f"component index {index} out of range for n={n}")
    a_ii = float(m[index, index])
    col = m[:, index]
    col_norm_sq = float(col @ col)
    off2sq = max(0.0, col_norm_sq - a_ii * a_ii)
    col_norm = math.sqrt(col_norm_sq)
    if a_ii != 0.0:
        ratio = col_norm / abs(a_ii)
        delta1i = 1.0 + ratio
        delta2i = 1.0 + ratio * ratio
    else:
        delta1i = math.inf
        delta2i = math.inf
    psi = abs(a_ii) / math.sqrt(off2sq) if off2sq > 0.0 else None
    return ComponentConstants(
        index=index,
        a_ii=a_ii,
        col_norm=col_norm,
        off2sq=off2sq,
        l1=abs(a_ii) + col_norm,
        l2=a_ii * a_ii + col_norm_sq,
        delta1i=delta1i,
        delta2i=delta2i,
        psi=psi,
    )


def _check_method(method: str) -> None:
    if method not in COMPONENT_METHODS:
        raise ValueError(
            f"unknown componentwise method {method!r}; expected one of "
            f"{COMPONENT_METHODS}"
        )


def component_tail_bound(
    cc: ComponentConstants, method: str, n_samples: int, t: float, clamp: bool = True
) -> float:
    """P[|estimate_i - a_ii| >= t] for the chosen estimator.

    rademacher:           2 exp(-N t^2 / (2 off2sq))
    gaussian:             2 exp(-N t^2 / (2 (l2 + t l1)))
    normalized_gaussian:  sqrt(2 off2sq / (pi N)) / t * (1 + t^2/off2sq)^(-(N-1)/2)
    """
    _check_method(method)
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if t <= 0.0:
        raise ValueError("t must be positive")
    if method == "rademacher":
        if cc.off2sq == 0.0:
            return 0.0
        raw = 2.0 * math.exp(-n_samples * t * t / (2.0 * cc.off2sq))
    elif method == "gaussian":
        raw = 2.0 * math.exp(-n_samples * t * t / (2.0 * (cc.l2 + t * cc.l1)))
    else:
        if cc.off2sq == 0.0:
            return 0.0
        prefactor = math.sqrt(2.0 * cc.off2sq / (math.pi * n_samples)) / t
        raw = prefactor * (1.0 + t * t / cc.off2sq) ** (-(n_samples - 1) / 2.0)
    return min(1.0, raw) if clamp else raw


def plan_samples_component(
    cc: ComponentConstants, method: str, eps: float, delta: float
) -> int:
    """Samples for a componentwise (eps, delta) estimate of a_ii.

    rademacher:           N >= (off2sq / a_ii^2) 2 ln(2/delta) / eps^2
    gaussian:             N >= (delta2i + delta1i eps) 2 ln(2/delta) / eps^2
    normalized_gaussian:  N >= 1 + 2 ln(sqrt(2/pi) / (delta eps psi)) / ln(1 + eps^2 psi^2)
    """
    _check_method(method)
    _check_eps_delta(eps, delta)
    if cc.a_ii == 0.0:
        raise ValueError(
            "componentwise relative targets require a nonzero diagonal entry"
        )
    if method == "rademacher":
        if cc.off2sq == 0.0:
            return 1
        value = (cc.off2sq / (cc.a_ii * cc.a_ii)) * 2.0 * math.log(2.0 / delta) / (eps * eps)
    elif method == "gaussian":
        value = (cc.delta2i + cc.delta1i * eps) * 2.0 * math.log(2.0 / delta) / (eps * eps)
    else:
        if cc.off2sq == 0.0:
            return 1
        psi = cc.psi
        value = 1.0 + 2.0 * math.log(
            math.sqrt(2.0 / math.pi) / (delta * eps * psi)
        ) / math.log1p(eps * eps * psi * psi)
    return _ceil_samples(value)


@dataclass(frozen=True)
class DgsmConstants:
    """Bound ingredients for the gradient-outer-product estimator.

    ``cdiag`` holds the exact (or assumed) sensitivity metrics c_ii, ``beta``
    the almost-sure sup-norm gradient bound; ``s1`` is the variance-proxy
    norm max_i c_ii (beta^2 - c_ii), ``s2 = cmax + beta^2`` the summand
    bound, ``s3 = s1 / (cmax s2)`` and ``d`` the intrinsic dimension.
    """

    beta: float
    cdiag: np.ndarray
    cmax: float
    s1: float
    s2: float
    s3: float
    d: float


def dgsm_constants(cdiag: np.ndarray, beta: float) -> DgsmConstants:
    """Constants from the metric diagonal and the gradient sup-norm bound."""
    cdiag = np.asarray(cdiag, dtype=np.float64).ravel()
    beta = float(beta)
    if cdiag.size < 1:
        raise ValueError("cdiag must be nonempty")
    if np.any(cdiag < 0.0):
        raise ValueError("hypothesis violated: entries of cdiag must be nonnegative")
    beta_sq = beta * beta
    if np.any(cdiag > beta_sq * (1.0 + 1e-12)):
        raise ValueError(
            "hypothesis violated: cdiag entries must not exceed beta^2"
        )
    cmax = float(np.max(cdiag))
    if cmax <= 0.0:
        raise ValueError("hypothesis violated: cmax must be positive")
    v = cdiag * (beta_sq - cdiag)
    s1 = float(np.max(v))
    if s1 <= 0.0:
        raise ValueError(
            "hypothesis violated: the variance proxy vanishes "
            "(every c_ii equals 0 or beta^2)"
        )
    s2 = cmax + beta_sq
    return DgsmConstants(
        beta=beta,
        cdiag=cdiag,
        cmax=cmax,
        s1=s1,
        s2=s2,
        s3=s1 / (cmax * s2),
        d=float(np.sum(v)) / s1,
    )


def linear_model_constants(h: np.ndarray) -> DgsmConstants:
    """Constants of the linear model f(x) = h^T x on uniform [-1, 1]^n."""
    h = np.asarray(h, dtype=np.float64).ravel()
    return dgsm_constants(h * h, float(np.max(np.abs(h))))


def quadratic_model_constants(factor: np.ndarray) -> DgsmConstants:
    """Constants of the quadratic model f(x) = x^T S x / 2 on uniform [-1, 1]^n.

    ``factor`` is S as a square matrix or a diagonal vector; the metric is
    diag(S^2)/3 and the gradient bound is the infinity norm of S.
    """
    factor = np.asarray(factor, dtype=np.float64)
    if factor.ndim == 1:
        m_diag = factor * factor
        beta = float(np.max(np.abs(factor)))
    elif factor.ndim == 2 and factor.shape[0] == factor.shape[1]:
        m_diag = np.einsum("ij,ji->i", factor, factor)
        beta = float(np.max(np.abs(factor).sum(axis=1)))
    else:
        raise ValueError("factor must be a square matrix or a diagonal vector")
    return dgsm_constants(m_diag / 3.0, beta)


def dgsm_tail_bound(dc: DgsmConstants, n_samples: int, t: float, clamp: bool = True) -> float:
    """P[normwise metric error >= t] <= 8 d exp(-N t^2 / (2 (s1 + s2 t / 3)))."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if t <= 0.0:
        raise ValueError("t must be positive")
    raw = 8.0 * dc.d * math.exp(
        -n_samples * t * t / (2.0 * (dc.s1 + dc.s2 * t / 3.0))
    )
    return min(1.0, raw) if clamp else raw


def plan_samples_dgsm(dc: DgsmConstants, eps: float, delta: float) -> int:
    """Samples for a normwise (eps, delta) metric estimate.

    N >= (s2 / (3 eps^2)) (2 eps + 6 s1 / (cmax s2)) ln(8 d / delta), the
    relative target being t = eps * cmax.
    """
    _check_eps_delta(eps, delta)
    value = (
        dc.s2
        / (3.0 * eps * eps)
        * (2.0 * eps + 6.0 * dc.s1 / (dc.cmax * dc.s2))
        * math.log(8.0 * dc.d / delta)
    )
    return _ceil_samples(value)


def epsilon_for_samples_dgsm(dc: DgsmConstants, n_samples: int, delta: float) -> float:
    """eps = sqrt((s2 / 3N) (2 + 6 s3) ln(8 d / delta)), the bound-curve formula."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(
        dc.s2 / (3.0 * n_samples) * (2.0 + 6.0 * dc.s3) * math.log(8.0 * dc.d / delta)
    )
