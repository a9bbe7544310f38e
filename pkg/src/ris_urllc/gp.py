"""Geometric programming in posynomial form with a log-domain barrier solver.

A geometric program minimizes a posynomial subject to posynomial <= 1
constraints over positive variables. Under x = e^y every posynomial becomes
log-sum-exp, hence convex, and the whole problem is solved by a standard
two-phase barrier method: phase I finds a strictly feasible point (or
certifies that none exists), phase II follows the central path with the
barrier parameter multiplied by 10 per stage until the duality gap and the
complementarity residual drop below 1e-9.

The solver is deliberately self-contained: the problems here are tiny
(2K + 1 variables) and a dependency-free implementation keeps the KKT
accounting fully inspectable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

GAP_TOL = 1e-9
NEWTON_TOL = 1e-10
BARRIER_MULTIPLIER = 10.0
MAX_NEWTON_PER_STAGE = 200


class GpInfeasibleError(RuntimeError):
    """Phase I certified that no strictly feasible point exists."""

    def __init__(self, message: str, infeasibility: float):
        super().__init__(message)
        self.infeasibility = infeasibility


class GpStallError(RuntimeError):
    """Newton iterations exhausted; carries the best iterate found."""

    def __init__(self, message: str, best_x: np.ndarray):
        super().__init__(message)
        self.best_x = best_x


@dataclass(frozen=True, eq=False)
class Posynomial:
    """Sum of monomials c_j * prod_i x_i^(a_ji) with positive coefficients."""

    coeffs: np.ndarray
    exponents: np.ndarray

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        a = np.atleast_2d(np.asarray(self.exponents, dtype=float))
        if np.any(c <= 0.0):
            raise ValueError("posynomial coefficients must be strictly positive")
        if a.shape[0] != c.shape[0]:
            raise ValueError(f"{c.shape[0]} coefficients but {a.shape[0]} exponent rows")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "exponents", a)

    @property
    def n_vars(self) -> int:
        return self.exponents.shape[1]

    @property
    def is_monomial(self) -> bool:
        return len(self.coeffs) == 1

    def value(self, x: np.ndarray) -> float:
        """Evaluate at positive variables x."""
        return float(np.exp(self.log_value(np.log(x))))

    def log_value(self, y: np.ndarray) -> float:
        """Log of the posynomial at x = e^y; <= 0 means the constraint holds."""
        return float(logsumexp(self.exponents @ y + np.log(self.coeffs)))

    def log_grad_hess(self, y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """Value, gradient, and Hessian of log_value at y."""
        z = self.exponents @ y + np.log(self.coeffs)
        zmax = np.max(z)
        w = np.exp(z - zmax)
        total = np.sum(w)
        w = w / total
        grad = self.exponents.T @ w
        hess = self.exponents.T @ (w[:, None] * self.exponents) - np.outer(grad, grad)
        return float(zmax + np.log(total)), grad, hess


def monomial(coeff: float, exponents: np.ndarray) -> Posynomial:
    return Posynomial(coeffs=np.array([coeff]), exponents=np.atleast_2d(exponents))


@dataclass(frozen=True, eq=False)
class GpInstance:
    """min objective(x) s.t. constraint_i(x) <= 1, x > 0."""

    objective: Posynomial
    constraints: list[Posynomial]
    var_names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = self.objective.n_vars
        for i, c in enumerate(self.constraints):
            if c.n_vars != n:
                raise ValueError(f"constraint {i} has {c.n_vars} variables, expected {n}")

    @property
    def n_vars(self) -> int:
        return self.objective.n_vars

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        return np.array([c.value(x) for c in self.constraints])


@dataclass(frozen=True, eq=False)
class GpSolution:
    """Primal point, duals of the log-domain problem, and KKT residuals."""

    x: np.ndarray
    objective_value: float
    duals: np.ndarray
    kkt_residual: float
    dual_residual: float
    centrality_residual: float
    newton_steps: int


def _newton_minimize(
    f_grad_hess,
    y0: np.ndarray,
    tol: float,
    dec_tol: float = 0.0,
    stop_early=None,
) -> tuple[np.ndarray, int]:
    """Damped Newton descent on a smooth convex function.

    ``f_grad_hess(y)`` returns (value, gradient, Hessian); infeasible points
    must return value = inf. Stops on gradient norm <= tol or Newton
    decrement <= dec_tol (whichever allows earlier exit); ``stop_early(y)``
    may abort as soon as some external condition holds (used by phase I).
    """
    y = y0.copy()
    value, grad, hess = f_grad_hess(y)
    steps = 0
    for _ in range(MAX_NEWTON_PER_STAGE):
        if stop_early is not None and stop_early(y):
            return y, steps
        if np.linalg.norm(grad) <= tol:
            return y, steps
        jitter = 0.0
        while True:
            try:
                step = np.linalg.solve(hess + jitter * np.eye(len(y)), -grad)
                break
            except np.linalg.LinAlgError:
                jitter = max(10.0 * jitter, 1e-12 * max(1.0, float(np.trace(hess))))
        decrement = float(-grad @ step)
        # Suboptimality below the float64 noise floor of the objective value
        # is unreachable; further steps would only thrash the line search.
        if decrement <= max(dec_tol, 1e-13 * (1.0 + abs(value))):
            return y, steps
        t = 1.0
        while t > 1e-14:
            cand = y + t * step
            cand_value = f_grad_hess(cand)[0]
            if np.isfinite(cand_value) and cand_value <= value - 0.25 * t * decrement:
                break
            t *= 0.5
        else:
            return y, steps
        y = y + t * step
        value, grad, hess = f_grad_hess(y)
        steps += 1
    raise GpStallError("Newton iterations exhausted", best_x=np.exp(y))


def _phase_one(gp: GpInstance, y0: np.ndarray) -> np.ndarray:
    """Find y with every log-constraint strictly negative, or certify failure."""
    n = gp.n_vars
    margin = 1e-6

    def aug(yz: np.ndarray, t: float):
        y, s = yz[:n], yz[n]
        value = t * s
        grad = np.zeros(n + 1)
        grad[n] = t
        hess = np.zeros((n + 1, n + 1))
        for c in gp.constraints:
            g, gg, gh = c.log_grad_hess(y)
            slack = s - g
            if slack <= 0.0:
                return np.inf, grad, hess
            value -= np.log(slack)
            gslack = np.concatenate([-gg, [1.0]])
            grad += -gslack / slack
            hess += np.outer(gslack, gslack) / slack**2
            hess[:n, :n] += gh / slack
        return value, grad, hess

    s0 = max(c.log_value(y0) for c in gp.constraints) + 1.0
    yz = np.concatenate([y0, [s0]])
    best_s = s0

    def strictly_feasible(yz: np.ndarray) -> bool:
        return max(c.log_value(yz[:n]) for c in gp.constraints) < -margin

    t = 1.0
    while t < 1e10:
        yz, _ = _newton_minimize(
            lambda z: aug(z, t),
            yz,
            tol=1e-8 * max(1.0, t),
            dec_tol=(1e-8 * max(1.0, t)) ** 2 * 1e-4,
            stop_early=strictly_feasible,
        )
        if strictly_feasible(yz):
            return yz[:n]
        best_s = min(best_s, float(yz[n]))
        # The barrier value brackets the phase-I optimum within (m+1)/t.
        if best_s - (len(gp.constraints) + 1) / t > 0.0:
            break
        t *= BARRIER_MULTIPLIER
    raise GpInfeasibleError(
        f"no strictly feasible point: residual infeasibility {best_s:.3e}",
        infeasibility=best_s,
    )


def solve_gp(gp: GpInstance, x0: np.ndarray | None = None) -> GpSolution:
    """Solve the geometric program to KKT residual <= 1e-8.

    ``x0`` may carry a strictly feasible starting point in the original
    (positive) variables; otherwise phase I constructs one. Raises
    :class:`GpInfeasibleError` when the constraint set is empty and
    :class:`GpStallError` if Newton fails to center (tiny problems in
    practice never trigger it).
    """
    n = gp.n_vars
    m = len(gp.constraints)
    if x0 is not None:
        y = np.log(np.asarray(x0, dtype=float))
        if max(c.log_value(y) for c in gp.constraints) >= -1e-9:
            y = _phase_one(gp, y)
    else:
        y = _phase_one(gp, np.zeros(n))

    def barrier(y: np.ndarray, t: float):
        f0, g0, h0 = gp.objective.log_grad_hess(y)
        value = t * f0
        grad = t * g0
        hess = t * h0
        for c in gp.constraints:
            g, gg, gh = c.log_grad_hess(y)
            if g >= 0.0:
                return np.inf, grad, hess
            value -= np.log(-g)
            grad += gg / (-g)
            hess += gh / (-g) + np.outer(gg, gg) / g**2
        return value, grad, hess

    t = 1.0
    total_steps = 0
    while True:
        y, steps = _newton_minimize(
            lambda z: barrier(z, t),
            y,
            tol=NEWTON_TOL * max(1.0, t),
            dec_tol=(NEWTON_TOL * max(1.0, t)) ** 2 * 1e-4,
        )
        total_steps += steps
        if m / t < GAP_TOL:
            break
        t *= BARRIER_MULTIPLIER

    g_vals = np.array([c.log_value(y) for c in gp.constraints])
    duals = 1.0 / (t * (-g_vals))
    _, g0, _ = gp.objective.log_grad_hess(y)
    jacobian = np.stack([c.log_grad_hess(y)[1] for c in gp.constraints], axis=1)
    # The central-path duals certify complementarity but inherit the finite-t
    # centering error in the stationarity residual; a least-squares refit on
    # the active set recovers the certificate the primal point deserves.
    active = np.flatnonzero(duals > 10.0 * GAP_TOL)
    while len(active):
        refit, *_ = np.linalg.lstsq(jacobian[:, active], -g0, rcond=None)
        if np.all(refit >= 0.0):
            duals = np.zeros_like(duals)
            duals[active] = refit
            break
        active = active[refit >= 0.0]
    grad_lagrangian = g0 + jacobian @ duals
    dual_residual = float(np.max(np.abs(grad_lagrangian)))
    centrality = float(np.max(np.abs(duals * g_vals)))
    primal_violation = float(max(0.0, np.max(g_vals)))
    x = np.exp(y)
    return GpSolution(
        x=x,
        objective_value=gp.objective.value(x),
        duals=duals,
        kkt_residual=max(dual_residual, centrality, primal_violation),
        dual_residual=dual_residual,
        centrality_residual=centrality,
        newton_steps=total_steps,
    )
