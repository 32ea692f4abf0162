# File: src/modeling/optim.py

"""
Limited-memory BFGS minimizer shared by both learners.

The search direction comes from the two-loop recursion over the last `m`
curvature pairs; step lengths come from scipy's strong-Wolfe line search.
A failed line search ends the run and returns the best iterate so far.
Also provides a central-difference gradient checker.
"""

from collections import deque
from dataclasses import dataclass, field
import logging
import warnings

import numpy as np
import pandas as pd
from scipy.optimize import line_search

from src.config_loader import config_section
from src.exceptions import InvalidOptimizerConfigError, NonFiniteObjectiveError

log = logging.getLogger(__name__)

CURVATURE_EPS = 1e-10


@dataclass(frozen=True)
class LbfgsConfig:
    history: int = 10
    max_iterations: int = 200
    gtol: float = 1e-5
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 30

    def __post_init__(self):
        if self.history < 1:
            raise InvalidOptimizerConfigError(f"history must be >= 1, got {self.history}")
        if not (0 < self.c1 < self.c2 < 1):
            raise InvalidOptimizerConfigError(
                f"Wolfe constants must satisfy 0 < c1 < c2 < 1 (got c1={self.c1}, c2={self.c2})")
        if self.max_iterations < 0 or self.max_line_search < 1:
            raise InvalidOptimizerConfigError("iteration limits must be non-negative")

    @classmethod
    def from_config(cls, section=None, **overrides):
        """Builds a config from the `optimizer` block of config.yaml plus overrides."""
        section = config_section("optimizer") if section is None else section
        known = {k: section[k] for k in cls.__dataclass_fields__ if k in section}
        known.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**known)


@dataclass
class OptTrace:
    """Per accepted iteration: objective, gradient inf-norm, step and slope data."""
    values: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    step_lengths: list = field(default_factory=list)
    start_values: list = field(default_factory=list)
    start_slopes: list = field(default_factory=list)
    end_slopes: list = field(default_factory=list)
    converged: bool = False
    message: str = ""
    n_evaluations: int = 0

    def __len__(self):
        return len(self.values)

    def record(self, value, grad_norm, step, start_value, start_slope, end_slope):
        self.values.append(float(value))
        self.grad_norms.append(float(grad_norm))
        self.step_lengths.append(float(step))
        self.start_values.append(float(start_value))
        self.start_slopes.append(float(start_slope))
        self.end_slopes.append(float(end_slope))

    def to_frame(self):
        return pd.DataFrame({
            "value": self.values, "grad_inf_norm": self.grad_norms, "step": self.step_lengths,
            "start_value": self.start_values, "start_slope": self.start_slopes, "end_slope": self.end_slopes,
        })


class _CachedObjective:
    """Lets the line search ask for f and f' separately while evaluating once per point."""

    def __init__(self, objective):
        self._objective = objective
        self._key = None
        self._value = None
        self.n_evaluations = 0

    def __call__(self, x):
        key = x.tobytes()
        if key != self._key:
            value, grad = self._objective(x)
            self._key, self._value = key, (float(value), np.asarray(grad, dtype=np.float64))
            self.n_evaluations += 1
        return self._value

    def f(self, x):
        return self(x)[0]

    def grad(self, x):
        return self(x)[1]


def _check_finite(value, grad, where):
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NonFiniteObjectiveError(f"Objective or gradient is not finite at {where}")


def _two_loop(grad, pairs):
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * s.dot(q)
        q -= a * y
        alphas.append(a)
    s, y, _ = pairs[-1]
    q *= s.dot(y) / y.dot(y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * y.dot(q)
        q += (a - b) * s
    return -q


def lbfgs_minimize(objective, x0, cfg=None):
    """
    Minimizes a smooth function given as x -> (value, gradient).

    Stops when the gradient infinity norm reaches cfg.gtol, after
    cfg.max_iterations accepted steps, or when the line search fails.

    Args:
        objective (callable): returns (float, ndarray) for an ndarray x.
        x0 (array-like): starting point.
        cfg (LbfgsConfig): settings; defaults from config.yaml.

    Returns:
        tuple[np.ndarray, OptTrace]: the best point found and the trace.

    Raises:
        NonFiniteObjectiveError: if the start or an accepted point is not finite.
    """
    cfg = cfg or LbfgsConfig.from_config()
    fn = _CachedObjective(objective)
    x = np.array(x0, dtype=np.float64).ravel()
    trace = OptTrace()
    if cfg.max_iterations == 0:
        trace.message = "max_iterations is 0"
        return x, trace

    value, grad = fn(x)
    _check_finite(value, grad, "x0")
    pairs = deque(maxlen=cfg.history)

    for iteration in range(cfg.max_iterations):
        gnorm = np.max(np.abs(grad)) if grad.size else 0.0
        if gnorm <= cfg.gtol:
            trace.converged = True
            trace.message = "gradient tolerance reached"
            break
        if pairs:
            direction = _two_loop(grad, list(pairs))
        else:
            direction = -grad / max(1.0, np.linalg.norm(grad))
        slope = grad.dot(direction)
        if not slope < 0:
            pairs.clear()
            direction = -grad / max(1.0, np.linalg.norm(grad))
            slope = grad.dot(direction)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            step = line_search(
                fn.f, fn.grad, x, direction, gfk=grad, old_fval=value,
                c1=cfg.c1, c2=cfg.c2, maxiter=cfg.max_line_search)[0]
        if step is None:
            trace.message = f"line search failed at iteration {iteration}"
            log.warning(f"L-BFGS: {trace.message}; returning best iterate (f={value:.6g}, |g|={gnorm:.3g})")
            break

        x_new = x + step * direction
        new_value, new_grad = fn(x_new)
        _check_finite(new_value, new_grad, f"iteration {iteration}")
        new_slope = float(new_grad.dot(direction))

        s = x_new - x
        y = new_grad - grad
        sy = s.dot(y)
        if sy > CURVATURE_EPS * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))

        trace.record(new_value, np.max(np.abs(new_grad)), step, value, slope, new_slope)
        log.debug(f"L-BFGS it={iteration} f={new_value:.8g} |g|={trace.grad_norms[-1]:.3g} step={step:.3g}")
        x, value, grad = x_new, new_value, new_grad
    else:
        if grad.size and np.max(np.abs(grad)) <= cfg.gtol:
            trace.converged = True
            trace.message = "gradient tolerance reached"
        else:
            trace.message = "max_iterations reached"

    trace.n_evaluations = fn.n_evaluations
    log.info(f"L-BFGS finished after {len(trace)} iterations: {trace.message} (f={value:.6g})")
    return x, trace


def grad_check(objective, x, h=1e-5):
    """
    Largest relative error between the analytic gradient and central differences.

    Relative error per coordinate is |g - g_fd| / max(1, |g|, |g_fd|).
    """
    x = np.array(x, dtype=np.float64).ravel()
    _, grad = objective(x)
    grad = np.asarray(grad, dtype=np.float64)
    worst = 0.0
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        numeric = (objective(xp)[0] - objective(xm)[0]) / (2 * h)
        err = abs(grad[i] - numeric) / max(1.0, abs(grad[i]), abs(numeric))
        worst = max(worst, err)
    return worst
