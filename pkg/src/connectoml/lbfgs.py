"""Limited-memory BFGS minimizer with a strong Wolfe line search.

The search direction comes from the classic two-loop recursion over the
last ``history`` curvature pairs (s, y), scaled by ``(s.y)/(y.y)``. Step
lengths are chosen by a bracket-and-zoom line search with safeguarded cubic
interpolation that enforces the strong Wolfe conditions

    f(x + a d) <= f(x) + c1 * a * g.d        (sufficient decrease)
    |g(x + a d).d| <= c2 * |g.d|             (curvature)

with c1 = 1e-4 and c2 = 0.9. Every accepted iterate therefore strictly
decreases the objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError

WOLFE_C1 = 1e-4
WOLFE_C2 = 0.9

_MAX_STEP = 1e10
_CURVATURE_GUARD = 1e-10


@dataclass(frozen=True)
class LbfgsIterate:
    """One accepted iterate: objective value, gradient norm, step length."""

    iteration: int
    fval: float
    grad_inf: float
    step: float | None


@dataclass
class LbfgsResult:
    """Outcome of a minimization run.

    ``converged`` means the infinity norm of the gradient reached the
    requested tolerance. ``line_search_failed`` flags an early stop where no
    step satisfying the strong Wolfe conditions could be found; the best
    iterate seen so far is returned in that case.
    """

    x: np.ndarray
    fval: float
    grad_inf: float
    iterations: int
    converged: bool
    line_search_failed: bool = False
    trace: list[LbfgsIterate] = field(default_factory=list)


@dataclass(frozen=True)
class LineSearchResult:
    success: bool
    step: float
    fval: float
    grad: np.ndarray | None
    n_evals: int
    # Best (lowest finite f) trial seen, whether or not it satisfied Wolfe.
    best_step: float = 0.0
    best_fval: float = np.inf
    best_grad: np.ndarray | None = None


def _cubic_minimizer(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb).

    Returns None when the cubic has no interior minimizer or the arithmetic
    degenerates; callers fall back to bisection.
    """
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    radicand = d1 * d1 - ga * gb
    if radicand < 0.0:
        return None
    d2 = np.sqrt(radicand)
    if a > b:
        d2 = -d2
    denom = gb - ga + 2.0 * d2
    if denom == 0.0:
        return None
    t = b - (b - a) * (gb + d2 - d1) / denom
    if not np.isfinite(t):
        return None
    return t


def _finite_value(f):
    return f if np.isfinite(f) else np.inf


def strong_wolfe_line_search(
    objective,
    x: np.ndarray,
    fval: float,
    grad: np.ndarray,
    direction: np.ndarray,
    c1: float = WOLFE_C1,
    c2: float = WOLFE_C2,
    initial_step: float = 1.0,
    max_evals: int = 30,
) -> LineSearchResult:
    """Find a step along ``direction`` satisfying the strong Wolfe conditions.

    ``objective`` maps a point to ``(f, grad)``. ``direction`` must be a
    descent direction at ``x``. Non-finite trial values are treated as
    infinitely bad, which shrinks the bracket back toward known-good steps.
    """
    phi0 = fval
    dphi0 = float(grad @ direction)
    if dphi0 >= 0.0:
        return LineSearchResult(False, 0.0, phi0, None, 0)

    evals = 0
    best = (0.0, phi0, grad)

    def evaluate(step):
        nonlocal evals, best
        f, g = objective(x + step * direction)
        evals += 1
        f = _finite_value(f)
        if f < best[1] and np.all(np.isfinite(g)):
            best = (step, f, g)
        return f, g, float(g @ direction)

    def result(success, step, f, g):
        return LineSearchResult(
            success, step, f, g, evals,
            best_step=best[0], best_fval=best[1], best_grad=best[2],
        )

    def zoom(lo, phi_lo, dphi_lo, hi, phi_hi, dphi_hi):
        for _ in range(max_evals):
            width = hi - lo
            trial = _cubic_minimizer(lo, phi_lo, dphi_lo, hi, phi_hi, dphi_hi)
            lo_b, hi_b = (lo, hi) if lo < hi else (hi, lo)
            margin = 0.1 * abs(width)
            if (
                trial is None
                or not np.isfinite(phi_hi)
                or trial < lo_b + margin
                or trial > hi_b - margin
            ):
                trial = lo + 0.5 * width
            phi, g, dphi = evaluate(trial)
            if phi > phi0 + c1 * trial * dphi0 or phi >= phi_lo:
                hi, phi_hi, dphi_hi = trial, phi, dphi
            else:
                if abs(dphi) <= -c2 * dphi0:
                    return result(True, trial, phi, g)
                if dphi * (hi - lo) >= 0.0:
                    hi, phi_hi, dphi_hi = lo, phi_lo, dphi_lo
                lo, phi_lo, dphi_lo = trial, phi, dphi
            if abs(hi - lo) <= 1e-14 * max(1.0, abs(lo), abs(hi)):
                break
        return result(False, 0.0, phi0, None)

    prev_step, phi_prev, dphi_prev = 0.0, phi0, dphi0
    step = min(initial_step, _MAX_STEP)
    for attempt in range(max_evals):
        phi, g, dphi = evaluate(step)
        if phi > phi0 + c1 * step * dphi0 or (attempt > 0 and phi >= phi_prev):
            return zoom(prev_step, phi_prev, dphi_prev, step, phi, dphi)
        if abs(dphi) <= -c2 * dphi0:
            return result(True, step, phi, g)
        if dphi >= 0.0:
            return zoom(step, phi, dphi, prev_step, phi_prev, dphi_prev)
        if step >= _MAX_STEP:
            break
        prev_step, phi_prev, dphi_prev = step, phi, dphi
        step = min(2.0 * step, _MAX_STEP)
    return result(False, 0.0, phi0, None)


def _two_loop_direction(grad, s_history, y_history, rho_history):
    """Search direction -H.g from the two-loop recursion."""
    q = grad.copy()
    depth = len(s_history)
    alphas = np.empty(depth)
    scratch = np.empty_like(q)
    for i in range(depth - 1, -1, -1):
        alphas[i] = rho_history[i] * float(s_history[i] @ q)
        np.multiply(y_history[i], alphas[i], out=scratch)
        q -= scratch
    if depth:
        s, y = s_history[-1], y_history[-1]
        q *= float(s @ y) / float(y @ y)
    for i in range(depth):
        beta = rho_history[i] * float(y_history[i] @ q)
        np.multiply(s_history[i], alphas[i] - beta, out=scratch)
        q += scratch
    return -q


def lbfgs_minimize(objective, x0, cfg) -> LbfgsResult:
    """Minimize ``objective`` starting from ``x0``.

    Parameters
    ----------
    objective : callable
        Maps a parameter vector to ``(value, gradient)``.
    x0 : array_like
        Starting point; the objective must be finite here.
    cfg
        Any object with ``lbfgs_history``, ``max_iterations`` and
        ``gradient_tolerance`` attributes (e.g. ``TrainConfig``).

    Returns
    -------
    LbfgsResult
        Final point, iterate trace (accepted iterates only, objective
        non-increasing), and convergence flags.

    Raises
    ------
    NumericalError
        If the objective or gradient is non-finite at ``x0``.
    """
    x = np.array(x0, dtype=np.float64)
    fval, grad = objective(x)
    fval = float(fval)
    grad = np.asarray(grad, dtype=np.float64)
    if not np.isfinite(fval) or not np.all(np.isfinite(grad)):
        raise NumericalError("objective is not finite at the starting point")

    grad_inf = float(np.abs(grad).max()) if grad.size else 0.0
    trace = [LbfgsIterate(0, fval, grad_inf, None)]
    s_history: list[np.ndarray] = []
    y_history: list[np.ndarray] = []
    rho_history: list[float] = []
    line_search_failed = False
    iteration = 0

    while iteration < cfg.max_iterations and grad_inf > cfg.gradient_tolerance:
        direction = _two_loop_direction(grad, s_history, y_history, rho_history)
        if float(direction @ grad) >= 0.0:
            # Stale curvature produced an ascent direction; restart from
            # steepest descent.
            s_history.clear()
            y_history.clear()
            rho_history.clear()
            direction = -grad
        initial_step = 1.0
        if not s_history and iteration == 0:
            initial_step = min(1.0, 1.0 / max(1.0, float(np.abs(grad).sum())))

        search = strong_wolfe_line_search(
            objective, x, fval, grad, direction, initial_step=initial_step
        )
        if not search.success:
            line_search_failed = True
            if search.best_fval < fval and search.best_grad is not None:
                iteration += 1
                x = x + search.best_step * direction
                fval = search.best_fval
                grad = search.best_grad
                grad_inf = float(np.abs(grad).max())
                trace.append(
                    LbfgsIterate(iteration, fval, grad_inf, search.best_step)
                )
            break

        step = search.step
        new_grad = search.grad
        s = step * direction
        y = new_grad - grad
        sy = float(s @ y)
        if sy > _CURVATURE_GUARD * float(np.linalg.norm(s)) * float(
            np.linalg.norm(y)
        ):
            s_history.append(s)
            y_history.append(y)
            rho_history.append(1.0 / sy)
            if len(s_history) > cfg.lbfgs_history:
                s_history.pop(0)
                y_history.pop(0)
                rho_history.pop(0)

        iteration += 1
        x = x + s
        fval = float(search.fval)
        grad = new_grad
        grad_inf = float(np.abs(grad).max())
        trace.append(LbfgsIterate(iteration, fval, grad_inf, step))

    return LbfgsResult(
        x=x,
        fval=fval,
        grad_inf=grad_inf,
        iterations=iteration,
        converged=grad_inf <= cfg.gradient_tolerance,
        line_search_failed=line_search_failed,
        trace=trace,
    )
