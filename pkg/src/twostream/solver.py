"""Damped Newton iteration for small nonlinear systems in log-parameter space."""

from dataclasses import dataclass

import numpy as np

from .errors import SolverFailure

__all__ = ["NewtonConfig", "NewtonResult", "solve_log_newton"]


@dataclass(frozen=True)
class NewtonConfig:
    """Settings for :func:`solve_log_newton`.

    Attributes
    ----------
    xtol : float
        Stop when the max-abs Newton step in log space falls below this.
    ftol : float
        Stop when the max-abs residual falls below this.
    max_iter : int
        Newton iterations before giving up.
    max_halvings : int
        Backtracking halvings per iteration.
    fd_step : float
        Relative central-difference step for the Jacobian.
    max_log_step : float
        Cap on any single log-space step (a factor of e^cap).
    """

    xtol: float = 1e-10
    ftol: float = 1e-10
    max_iter: int = 100
    max_halvings: int = 30
    fd_step: float = 1e-6
    max_log_step: float = 3.0


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: np.ndarray
    iterations: int
    converged: bool


def _jacobian(fun, u, f0, h_rel):
    n = u.size
    jac = np.empty((f0.size, n))
    for k in range(n):
        h = h_rel * max(1.0, abs(u[k]))
        up = u.copy()
        dn = u.copy()
        up[k] += h
        dn[k] -= h
        jac[:, k] = (fun(up) - fun(dn)) / (2.0 * h)
    return jac


def solve_log_newton(fun, x0, config=NewtonConfig()):
    """Solve ``fun(x) = 0`` for positive ``x`` by damped Newton on ``log x``.

    The Jacobian with respect to ``log x`` is estimated by central
    differences. A step is halved until the squared residual norm decreases.

    Parameters
    ----------
    fun : callable
        Maps a positive parameter vector to a residual vector of equal size.
    x0 : array_like
        Positive starting point.

    Raises
    ------
    SolverFailure
        If no convergence within ``max_iter`` iterations, or if backtracking
        cannot reduce the residual while it is still above tolerance.
    """
    u = np.log(np.asarray(x0, dtype=float))

    def g(v):
        return np.asarray(fun(np.exp(v)), dtype=float)

    f = g(u)
    if not np.all(np.isfinite(f)):
        raise SolverFailure("residual not finite at start point", float("nan"))
    for it in range(1, config.max_iter + 1):
        if np.max(np.abs(f)) <= config.ftol:
            return NewtonResult(np.exp(u), f, it - 1, True)
        jac = _jacobian(g, u, f, config.fd_step)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            raise SolverFailure("singular Jacobian", float(np.max(np.abs(f)))) from None
        if not np.all(np.isfinite(step)):
            raise SolverFailure("singular Jacobian", float(np.max(np.abs(f))))
        big = np.max(np.abs(step))
        if big > config.max_log_step:
            step *= config.max_log_step / big
        norm0 = float(f @ f)
        t = 1.0
        for _ in range(config.max_halvings + 1):
            trial = u + t * step
            f_trial = g(trial)
            if np.all(np.isfinite(f_trial)) and float(f_trial @ f_trial) < norm0:
                break
            t *= 0.5
        else:
            if np.max(np.abs(step)) <= config.xtol:
                return NewtonResult(np.exp(u), f, it, True)
            raise SolverFailure(
                "backtracking failed to reduce the residual",
                float(np.max(np.abs(f))),
            )
        u, f = trial, f_trial
        if np.max(np.abs(t * step)) <= config.xtol:
            return NewtonResult(np.exp(u), f, it, True)
    if np.max(np.abs(f)) <= config.ftol:
        return NewtonResult(np.exp(u), f, config.max_iter, True)
    raise SolverFailure(
        f"no convergence in {config.max_iter} Newton iterations",
        float(np.max(np.abs(f))),
    )
