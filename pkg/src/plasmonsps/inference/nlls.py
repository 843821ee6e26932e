"""Damped Gauss-Newton fitting backend.

Two objectives share one iteration:

* weighted least squares, ``cost = 1/2 sum w (y - f)^2`` with fixed weights;
* Poisson maximum likelihood for count data, ``cost = sum f - y + y ln(y/f)``,
  solved by Fisher scoring (Gauss-Newton with weights ``1/f`` refreshed at
  every iterate).

Jacobians are central differences with step ``max(1e-6 |p|, 1e-9)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import NonConvergence, SingularJacobian

MAX_ITER = 500
STEP_TOL = 1e-10
COST_TOL = 1e-12


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with 1-sigma uncertainties.

    ``values`` and ``errors`` are keyed by parameter name.  Derived
    quantities (with propagated errors) may be included alongside the fitted
    ones.  When ``converged`` is false the values must not be used.
    """

    values: dict[str, float]
    errors: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int
    covariance: np.ndarray | None = None
    flags: dict[str, object] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.values)

    @property
    def usable(self) -> bool:
        return self.converged and all(np.isfinite(v) for v in self.values.values())

    def with_derived(self, name: str, value: float, error: float) -> "FitResult":
        values = dict(self.values, **{name: value})
        errors = dict(self.errors, **{name: error})
        return FitResult(values, errors, self.residual_norm, self.converged,
                         self.iterations, self.covariance, self.flags)

    def summary(self) -> str:
        rows = [f"{k} = {v:.6g} +/- {self.errors.get(k, float('nan')):.2g}"
                for k, v in self.values.items()]
        state = "converged" if self.converged else "NOT converged"
        return "\n".join(rows + [f"({state}, {self.iterations} iterations)"])


def step_sizes(p: np.ndarray, rel: float = 1e-6, floor: float = 1e-9) -> np.ndarray:
    return np.maximum(rel * np.abs(p), floor)


def numeric_jacobian(f: Callable[[np.ndarray], np.ndarray], p, rel: float = 1e-6,
                     floor: float = 1e-9) -> np.ndarray:
    """Central-difference Jacobian ``d f_i / d p_j`` of a vector function."""
    p = np.asarray(p, dtype=float)
    h = step_sizes(p, rel, floor)
    cols = []
    for j in range(p.size):
        e = np.zeros_like(p)
        e[j] = h[j]
        cols.append((np.asarray(f(p + e)) - np.asarray(f(p - e))) / (2 * h[j]))
    return np.stack(cols, axis=-1)


def _poisson_cost(y, mu):
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(np.sum(mu - y + term))


def _solve(gram: np.ndarray, grad: np.ndarray, damping: float) -> np.ndarray:
    d = np.diag(gram).copy()
    a = gram + damping * np.diag(np.where(d > 0, d, 1.0))
    return np.linalg.solve(a, grad)


def _check_rank(gram: np.ndarray):
    d = np.sqrt(np.diag(gram))
    if np.any(~np.isfinite(d)) or np.any(d == 0):
        raise SingularJacobian("a parameter has no influence on the model")
    scaled = gram / np.outer(d, d)
    if np.linalg.cond(scaled) > 1e14:
        raise SingularJacobian("Jacobian columns are linearly dependent")


def _iterate(model, x, y, p0, weights, poisson, max_iter):
    p = np.asarray(p0, dtype=float).copy()

    def evaluate(q):
        mu = np.asarray(model(x, *q), dtype=float)
        if not np.all(np.isfinite(mu)):
            return mu, np.inf
        if poisson:
            if np.any(mu <= 0):
                return mu, np.inf
            return mu, _poisson_cost(y, mu)
        r = y - mu
        return mu, 0.5 * float(np.sum(weights * r * r))

    mu, cost = evaluate(p)
    if not np.isfinite(cost):
        raise NonConvergence("model is not finite at the initial guess")
    # "zero" cost: exact fit up to rounding of the data scale
    tiny = 1e-30 * (1.0 + (float(np.sum(y)) if poisson else 0.5 * float(np.sum(weights * y * y))))
    damping = 0.0  # plain Gauss-Newton until a step fails
    for it in range(1, max_iter + 1):
        jac = numeric_jacobian(lambda q: model(x, *q), p)
        w = 1.0 / mu if poisson else weights
        gram = jac.T @ (w[:, None] * jac)
        _check_rank(gram)
        grad = jac.T @ (w * (y - mu))
        while True:
            try:
                delta = _solve(gram, grad, damping)
            except np.linalg.LinAlgError:
                raise SingularJacobian("normal equations are singular") from None
            trial = p + delta
            mu_t, cost_t = evaluate(trial)
            if cost_t <= cost:
                break
            damping = max(4.0 * damping, 1e-3)
            if damping > 1e12:
                # no descent direction left at machine precision
                return p, mu, cost, it, True
        rel_step = np.linalg.norm(delta) / max(np.linalg.norm(trial), 1e-300)
        rel_cost = (cost - cost_t) / max(cost, 1e-300)
        p, mu, cost = trial, mu_t, cost_t
        damping = damping / 3.0 if damping > 1e-9 else 0.0
        if cost <= tiny or rel_step < STEP_TOL or rel_cost < COST_TOL:
            return p, mu, cost, it, True
    raise NonConvergence(f"no convergence after {max_iter} iterations")


def _result(model, x, y, p, mu, cost, it, names, weights, poisson, absolute_sigma):
    jac = numeric_jacobian(lambda q: model(x, *q), p)
    w = 1.0 / mu if poisson else weights
    gram = jac.T @ (w[:, None] * jac)
    try:
        cov = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        raise SingularJacobian("covariance is singular at the optimum") from None
    dof = y.size - p.size
    if not (poisson or absolute_sigma):
        cov = cov * (2.0 * cost / dof if dof > 0 else np.nan)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(dict(zip(names, map(float, p))), dict(zip(names, map(float, err))),
                     float(np.sqrt(max(2.0 * cost, 0.0))), True, it, cov)


def _prepare(x, y, p0, names):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("data must be finite")
    p0 = np.asarray(p0, dtype=float)
    names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(p0.size))
    if len(names) != p0.size:
        raise ValueError("one name per parameter required")
    return x, y, p0, names


def least_squares(model: Callable, x, y, p0: Sequence[float], weights=None,
                  names: Sequence[str] | None = None, absolute_sigma: bool | None = None,
                  max_iter: int = MAX_ITER) -> FitResult:
    """Weighted nonlinear least squares.

    Parameters
    ----------
    model : callable
        ``model(x, *p) -> array`` of the same shape as ``y``.
    x, y : array_like
    p0 : sequence of float
        Initial guess.
    weights : array_like, optional
        Inverse variances.  Unit weights when omitted.
    names : sequence of str, optional
    absolute_sigma : bool, optional
        Take the weights as exact inverse variances.  Defaults to True when
        weights are given; otherwise the covariance is scaled by the reduced
        residual.

    Raises
    ------
    NonConvergence, SingularJacobian
    """
    x, y, p0, names = _prepare(x, y, p0, names)
    w = np.ones_like(y) if weights is None else np.broadcast_to(np.asarray(weights, float), y.shape)
    if absolute_sigma is None:
        absolute_sigma = weights is not None
    p, mu, cost, it, _ = _iterate(model, x, y, p0, w, False, max_iter)
    return _result(model, x, y, p, mu, cost, it, names, w, False, absolute_sigma)


def poisson_mle(model: Callable, x, counts, p0: Sequence[float],
                names: Sequence[str] | None = None, max_iter: int = MAX_ITER) -> FitResult:
    """Maximum-likelihood fit of a mean-count model to Poisson counts.

    ``residual_norm`` is the square root of the deviance.
    """
    x, y, p0, names = _prepare(x, counts, p0, names)
    if np.any(y < 0):
        raise ValueError("counts must be non-negative")
    p, mu, cost, it, _ = _iterate(model, x, y, p0, None, True, max_iter)
    return _result(model, x, y, p, mu, cost, it, names, None, True, True)
