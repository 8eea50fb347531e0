"""Per-parameter regressions of daily interruption counts on weather.

Two model families: a cubic polynomial (temperature, pressure, lightning)
and a two-term exponential b0 + b1*exp(b2*x) + b3*exp(b4*x) (wind,
precipitation).  The exponential fit is separable: for fixed rate constants
(b2, b4) the amplitudes solve a linear least squares, so the solver sweeps a
grid of rate-constant starts, solves the linear subproblem at each, and
polishes the best candidates with damped Gauss-Newton on all five
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import product

import numpy as np

from ..errors import FitFailureError, SingularFitError

# Exponent clamp keeps candidate evaluations finite on wide-range inputs.
_EXP_ARG_LIMIT = 60.0

RATE_START_GRID = (-2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0)


class RegressionKind(Enum):
    CUBIC = "cubic"
    TWO_TERM_EXP = "two_term_exp"


@dataclass(frozen=True)
class RegressionModel:
    kind: RegressionKind
    coefficients: tuple
    target: str
    sse: float
    r2: float

    def __post_init__(self):
        expected = 4 if self.kind is RegressionKind.CUBIC else 5
        if len(self.coefficients) != expected:
            raise ValueError(
                f"{self.kind.value} model needs {expected} coefficients, "
                f"got {len(self.coefficients)}"
            )
        if not (np.isfinite(self.sse) and np.isfinite(self.r2)):
            raise ValueError("fit diagnostics must be finite")

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        c = self.coefficients
        if self.kind is RegressionKind.CUBIC:
            return c[0] + c[1] * x + c[2] * x**2 + c[3] * x**3
        return c[0] + c[1] * _safe_exp(c[2] * x) + c[3] * _safe_exp(c[4] * x)

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "coefficients": list(self.coefficients),
            "target": self.target,
            "sse": self.sse,
            "r2": self.r2,
        }


def _safe_exp(arg):
    return np.exp(np.clip(arg, -_EXP_ARG_LIMIT, _EXP_ARG_LIMIT))


def _diagnostics(y: np.ndarray, residual: np.ndarray) -> tuple[float, float]:
    sse = float(residual @ residual)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        r2 = 1.0 if sse <= 1e-12 else 0.0
    else:
        r2 = 1.0 - sse / sst
    return sse, r2


def fit_cubic(x, y, target: str = "") -> RegressionModel:
    """Least-squares cubic via orthogonal decomposition.

    The solve runs on standardized x for conditioning (a raw Vandermonde on
    e.g. pressure values near 1000 hPa is numerically rank deficient) and the
    coefficients are expanded back to the raw-x polynomial exactly.  Needs at
    least 4 distinct x values; a rank-deficient design raises
    :class:`SingularFitError`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length 1-D arrays")
    if len(np.unique(x)) < 4:
        raise SingularFitError(
            f"cubic fit needs >= 4 distinct x values, got {len(np.unique(x))}"
        )
    mu = float(x.mean())
    sigma = float(x.std()) or 1.0
    t = (x - mu) / sigma
    design = np.column_stack([np.ones_like(t), t, t**2, t**3])
    coeff, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 4:
        raise SingularFitError("cubic design matrix is rank deficient")
    residual = y - design @ coeff

    # Expand c0 + c1 t + c2 t^2 + c3 t^3 with t = a x + b back to powers of x.
    c0, c1, c2, c3 = (float(c) for c in coeff)
    a = 1.0 / sigma
    b = -mu / sigma
    beta = (
        c0 + c1 * b + c2 * b * b + c3 * b**3,
        c1 * a + 2.0 * c2 * a * b + 3.0 * c3 * a * b * b,
        c2 * a * a + 3.0 * c3 * a * a * b,
        c3 * a**3,
    )
    sse, r2 = _diagnostics(y, residual)
    return RegressionModel(
        kind=RegressionKind.CUBIC,
        coefficients=beta,
        target=target,
        sse=sse,
        r2=r2,
    )


def _amplitudes_for_rates(x, y, b2, b4):
    """Solve the linear subproblem (b0, b1, b3) for fixed rate constants."""
    design = np.column_stack([np.ones_like(x), _safe_exp(b2 * x), _safe_exp(b4 * x)])
    if not np.all(np.isfinite(design)):
        return None
    coeff, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - design @ coeff
    sse = float(residual @ residual)
    if not np.isfinite(sse):
        return None
    return (float(coeff[0]), float(coeff[1]), b2, float(coeff[2]), b4), sse


def _exp_residual_jacobian(x, y, theta):
    b0, b1, b2, b3, b4 = theta
    e2 = _safe_exp(b2 * x)
    e4 = _safe_exp(b4 * x)
    prediction = b0 + b1 * e2 + b3 * e4
    residual = prediction - y
    jac = np.column_stack([np.ones_like(x), e2, b1 * x * e2, e4, b3 * x * e4])
    return residual, jac


def _gauss_newton_polish(x, y, theta, max_iter=100):
    """Damped (Levenberg) Gauss-Newton on all five parameters."""
    theta = np.asarray(theta, dtype=float)
    residual, jac = _exp_residual_jacobian(x, y, theta)
    sse = float(residual @ residual)
    lam = 1e-3
    for _ in range(max_iter):
        g = jac.T @ residual
        h = jac.T @ jac
        accepted = False
        for _ in range(12):
            try:
                step = np.linalg.solve(h + lam * np.eye(5), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            candidate = theta + step
            cand_res, cand_jac = _exp_residual_jacobian(x, y, candidate)
            cand_sse = float(cand_res @ cand_res)
            if np.isfinite(cand_sse) and cand_sse < sse:
                theta, residual, jac, sse = candidate, cand_res, cand_jac, cand_sse
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
        if float(step @ step) < 1e-24:
            break
    return theta, sse


def fit_two_term_exp(x, y, target: str = "", polish_top: int = 6) -> RegressionModel:
    """Multi-start fit of b0 + b1*exp(b2*x) + b3*exp(b4*x).

    Every start includes a constant column, so the result is never worse
    than the best constant fit.  Raises :class:`FitFailureError` (carrying
    the best partial result) when no start yields finite parameters.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length 1-D arrays")
    if len(x) < 5:
        raise SingularFitError(f"two-term exponential fit needs >= 5 points, got {len(x)}")

    # Rate constants are scale-dependent; sweep the grid in units of 1/std(x).
    spread = float(np.std(x))
    scale = 1.0 / spread if spread > 0 else 1.0
    candidates = []
    for b2, b4 in product(RATE_START_GRID, repeat=2):
        if b4 < b2:
            continue  # the two terms commute
        solved = _amplitudes_for_rates(x, y, b2 * scale, b4 * scale)
        if solved is not None:
            candidates.append(solved)
    if not candidates:
        raise FitFailureError("all exponential starts produced non-finite fits")

    candidates.sort(key=lambda c: c[1])
    best_theta, best_sse = candidates[0]
    for theta, _ in candidates[:polish_top]:
        polished, sse = _gauss_newton_polish(x, y, theta)
        if sse < best_sse and np.all(np.isfinite(polished)):
            best_theta, best_sse = tuple(float(t) for t in polished), sse

    if not np.all(np.isfinite(best_theta)):
        partial = candidates[0]
        raise FitFailureError("exponential fit diverged", partial=partial)
    residual = (
        best_theta[0]
        + best_theta[1] * _safe_exp(best_theta[2] * x)
        + best_theta[3] * _safe_exp(best_theta[4] * x)
        - y
    )
    sse, r2 = _diagnostics(y, residual)
    return RegressionModel(
        kind=RegressionKind.TWO_TERM_EXP,
        coefficients=tuple(best_theta),
        target=target,
        sse=sse,
        r2=r2,
    )
