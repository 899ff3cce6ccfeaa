"""Minimizers over graph variables: L-BFGS (strong-Wolfe or Hager-Zhang line search) and Adam.

Objectives map a parameter vector to ``(value, gradient)`` or
``(value, gradient, scf_iterations)``. An evaluation that cannot be carried
out (non-positive exponent, singular overlap, SCF failure) counts as +inf;
raise ``ObjectiveFailure`` or one of the library's domain errors to signal it.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisError
from .integrals.engine import LinearDependenceError
from .pgraph import GraphError
from .scf import ScfError

log = logging.getLogger(__name__)

METHODS = ("lbfgs-sw", "lbfgs-hz", "adam")


class ObjectiveFailure(RuntimeError):
    """An objective evaluation failed; ``kind`` is "scf" or "domain"."""

    def __init__(self, message, kind="scf"):
        super().__init__(message)
        self.kind = kind


class LineSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "lbfgs-hz"
    memory: int = 10
    grad_inf_tol: float = 1e-5
    energy_tol: float = 1e-8
    max_steps: int = 1000
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_scf_failures: int = 3

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if not (self.grad_inf_tol > 0 and self.energy_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class StepRecord:
    step: int
    theta: np.ndarray
    E0: float
    grad_inf: float
    scf_iters: int
    seconds: float


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    status: str = "running"
    n_evals: int = 0

    @property
    def final(self):
        return self.records[-1]

    @property
    def theta(self):
        return self.final.theta

    @property
    def E0(self):
        return self.final.E0

    @property
    def steps(self):
        return self.final.step

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "E0", "grad_inf", "scf_iters", "seconds"])
            for r in self.records:
                w.writerow([r.step, f"{r.E0:.12f}", f"{r.grad_inf:.6e}", r.scf_iters, f"{r.seconds:.4f}"])


# ------------------------------------------------------------------ evaluation


class _Counted:
    """Wraps an objective: failures become +inf, consecutive SCF failures are tracked."""

    def __init__(self, fun, max_scf_failures):
        self.fun = fun
        self.max_scf_failures = max_scf_failures
        self.n_evals = 0
        self.scf_fail_run = 0
        self.last_iters = 0

    def __call__(self, x):
        self.n_evals += 1
        try:
            out = self.fun(x)
        except (GraphError, BasisError, LinearDependenceError) as exc:
            log.debug("objective infeasible: %s", exc)
            return math.inf, None
        except (ObjectiveFailure, ScfError) as exc:
            kind = getattr(exc, "kind", "scf")
            log.debug("objective failed (%s): %s", kind, exc)
            if kind == "scf":
                self.scf_fail_run += 1
                if self.scf_fail_run >= self.max_scf_failures:
                    raise _Abort() from exc
            return math.inf, None
        f, g = out[0], out[1]
        self.last_iters = int(out[2]) if len(out) > 2 else 0
        if g is None or not math.isfinite(f):
            return math.inf, None
        self.scf_fail_run = 0
        return float(f), np.asarray(g, dtype=float)


class _Abort(Exception):
    pass


@dataclass(frozen=True)
class LineSearchResult:
    alpha: float
    f: float
    g: np.ndarray
    evals: int


class _Phi:
    """phi(a) = f(x + a d) with value, slope and gradient cached per step."""

    def __init__(self, fg, x, d, max_evals):
        self.fg, self.x, self.d = fg, x, d
        self.cache = {}
        self.max_evals = max_evals

    def __call__(self, a):
        if a not in self.cache:
            if len(self.cache) >= self.max_evals:
                raise LineSearchError(f"line search exceeded {self.max_evals} evaluations")
            f, g = self.fg(self.x + a * self.d)
            slope = float(g @ self.d) if g is not None else math.nan
            self.cache[a] = (f, slope, g)
        return self.cache[a]


def _start(fg, x, d, f0, g0):
    if f0 is None or g0 is None:
        f0, g0 = fg(x)
        if g0 is None:
            raise LineSearchError("objective fails at the starting point")
    dphi0 = float(np.asarray(g0) @ d)
    if not dphi0 < 0:
        raise LineSearchError(f"not a descent direction (slope {dphi0:.3e})")
    return f0, dphi0


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through two points with slopes, or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    c = b - (b - a) * (db + d2 - d1) / denom
    return c if math.isfinite(c) else None


def line_search_strong_wolfe(fg, x, d, alpha0=1.0, f0=None, g0=None, c1=1e-4, c2=0.9,
                             alpha_max=1e10, max_evals=50):
    """Bracketing and zoom search for a step meeting the strong Wolfe conditions."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    f0, dphi0 = _start(fg, x, d, f0, g0)
    phi = _Phi(fg, x, d, max_evals)

    def done(a):
        f, s, g = phi(a)
        return LineSearchResult(a, f, g, len(phi.cache))

    def zoom(lo, hi):
        while True:
            flo, slo, _ = phi(lo)
            fhi, shi, _ = phi(hi)
            a = None
            if math.isfinite(fhi) and math.isfinite(shi):
                a = _cubic_min(lo, flo, slo, hi, fhi, shi)
            lo_, hi_ = min(lo, hi), max(lo, hi)
            width = hi_ - lo_
            if a is None or not (lo_ + 0.1 * width <= a <= hi_ - 0.1 * width):
                a = 0.5 * (lo + hi)
            if width <= 1e-16 * max(1.0, hi_):
                raise LineSearchError("strong-Wolfe zoom interval collapsed")
            fa, sa, _ = phi(a)
            if not math.isfinite(fa) or fa > f0 + c1 * a * dphi0 or fa >= flo:
                hi = a
            else:
                if abs(sa) <= -c2 * dphi0:
                    return done(a)
                if sa * (hi - lo) >= 0:
                    hi = lo
                lo = a

    a_prev, a = 0.0, float(alpha0)
    phi.cache[0.0] = (f0, dphi0, g0)
    first = True
    while True:
        fa, sa, _ = phi(a)
        f_prev = phi(a_prev)[0]
        if not math.isfinite(fa) or fa > f0 + c1 * a * dphi0 or (not first and fa >= f_prev):
            return zoom(a_prev, a)
        if abs(sa) <= -c2 * dphi0:
            return done(a)
        if sa >= 0:
            return zoom(a, a_prev)
        a_prev, a = a, min(2.0 * a, alpha_max)
        first = False


def line_search_hz(fg, x, d, alpha0=1.0, f0=None, g0=None, delta=0.1, sigma=0.9, epsilon=1e-6,
                   theta=0.5, gamma=0.66, rho=5.0, max_evals=50):
    """Hager-Zhang search accepting Wolfe or approximate-Wolfe points."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    f0, dphi0 = _start(fg, x, d, f0, g0)
    phi = _Phi(fg, x, d, max_evals)
    phi.cache[0.0] = (f0, dphi0, g0)
    fmax = f0 + epsilon * abs(f0)

    class Found(Exception):
        def __init__(self, a):
            self.a = a

    def ev(a):
        f, s, _ = phi(a)
        if math.isfinite(f) and math.isfinite(s):
            wolfe = f - f0 <= delta * a * dphi0 and s >= sigma * dphi0
            approx = (2 * delta - 1) * dphi0 >= s >= sigma * dphi0 and f <= fmax
            if a > 0 and (wolfe or approx):
                raise Found(a)
        return f, s

    def bisect(a, b):
        while True:
            if b - a <= 1e-16 * max(1.0, b):
                raise LineSearchError("Hager-Zhang bisection interval collapsed")
            c = (1 - theta) * a + theta * b
            fc, sc = ev(c)
            if math.isfinite(sc) and sc >= 0:
                return a, c
            if math.isfinite(fc) and fc <= fmax:
                a = c
            else:
                b = c

    def update(a, b, c):
        if not (a < c < b):
            return a, b
        fc, sc = ev(c)
        if math.isfinite(sc) and sc >= 0:
            return a, c
        if math.isfinite(fc) and fc <= fmax:
            return c, b
        return bisect(a, c)

    def secant(a, b):
        sa, sb = phi(a)[1], phi(b)[1]
        if not (math.isfinite(sa) and math.isfinite(sb)) or sb == sa:
            return 0.5 * (a + b)
        return (a * sb - b * sa) / (sb - sa)

    def secant2(a, b):
        c = secant(a, b)
        A, B = update(a, b, c)
        cbar = None
        if c == B:
            cbar = secant(b, B)
        elif c == A:
            cbar = secant(a, A)
        if cbar is not None:
            return update(A, B, cbar)
        return A, B

    try:
        c = float(alpha0)
        fc, sc = ev(c)
        # bracket
        a_ok = 0.0
        while True:
            if not math.isfinite(fc):
                a, b = bisect(a_ok, c)
                break
            if sc >= 0:
                a, b = a_ok, c
                break
            if fc > fmax:
                a, b = bisect(0.0, c)
                break
            a_ok = c
            c *= rho
            fc, sc = ev(c)
        while True:
            if b - a <= 1e-16 * max(1.0, b):
                raise LineSearchError("Hager-Zhang interval collapsed")
            a0, b0 = a, b
            a, b = secant2(a, b)
            if b - a > gamma * (b0 - a0):
                a, b = update(a, b, 0.5 * (a + b))
    except Found as hit:
        f, s, g = phi(hit.a)
        return LineSearchResult(hit.a, f, g, len(phi.cache) - 1)


# ------------------------------------------------------------------ drivers


def _two_loop(g, S, Y):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        r = 1.0 / (y @ s)
        a = r * (s @ q)
        q -= a * y
        alphas.append((r, a))
    if S:
        q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
    for (s, y), (r, a) in zip(zip(S, Y), reversed(alphas)):
        b = r * (y @ q)
        q += (a - b) * s
    return -q


def minimize(objective, theta0, config=OptimizerConfig(), callback=None):
    """Run ``config.method`` from ``theta0``; returns the ``Trajectory``."""
    fg = _Counted(objective, config.max_scf_failures)
    traj = Trajectory()
    t0 = time.perf_counter()
    x = np.array(theta0, dtype=float)

    def record(step, x, f, g):
        rec = StepRecord(step, x.copy(), f, float(np.max(np.abs(g))) if g.size else 0.0,
                         fg.last_iters, time.perf_counter() - t0)
        traj.records.append(rec)
        log.info("step %4d  E0=% .12f  |g|inf=%.3e", step, f, rec.grad_inf)
        if callback is not None:
            callback(rec)

    try:
        f, g = fg(x)
        if g is None:
            traj.status = "scf-failure"
            return traj
        record(0, x, f, g)
        if g.size == 0 or np.max(np.abs(g)) < config.grad_inf_tol:
            traj.status = "converged"
            return traj
        run = _adam if config.method == "adam" else _lbfgs
        traj.status = run(fg, x, f, g, config, record)
    except _Abort:
        traj.status = "scf-failure"
    finally:
        traj.n_evals = fg.n_evals
    return traj


def _converged(g, f, f_prev, config):
    return np.max(np.abs(g)) < config.grad_inf_tol and abs(f - f_prev) < config.energy_tol


def _lbfgs(fg, x, f, g, config, record):
    search = line_search_hz if config.method == "lbfgs-hz" else line_search_strong_wolfe
    S, Y = [], []
    fresh = True
    for step in range(1, config.max_steps + 1):
        d = _two_loop(g, S, Y)
        if not g @ d < 0:
            S, Y, fresh = [], [], True
            d = -g
        alpha0 = 1.0 / np.linalg.norm(g) if fresh else 1.0
        try:
            ls = search(fg, x, d, alpha0, f, g)
        except LineSearchError as exc:
            if fresh:
                log.warning("line search failed along steepest descent: %s", exc)
                return "line-search-failure"
            S, Y, fresh = [], [], True
            try:
                d = -g
                ls = search(fg, x, d, 1.0 / np.linalg.norm(g), f, g)
            except LineSearchError as exc2:
                log.warning("line search failed: %s", exc2)
                return "line-search-failure"
        s = ls.alpha * d
        y = ls.g - g
        if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            if len(S) > config.memory:
                S.pop(0)
                Y.pop(0)
        fresh = False
        x_new = x + s
        f_prev = f
        x, f, g = x_new, ls.f, ls.g
        record(step, x, f, g)
        if _converged(g, f, f_prev, config):
            return "converged"
    return "max-steps"


def _adam(fg, x, f, g, config, record):
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2 = config.beta1, config.beta2
    for step in range(1, config.max_steps + 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** step)
        vhat = v / (1 - b2 ** step)
        dx = -config.lr * mhat / (np.sqrt(vhat) + config.eps)
        for _ in range(30):
            f_new, g_new = fg(x + dx)
            if g_new is not None:
                break
            dx *= 0.5
        else:
            return "scf-failure"
        f_prev = f
        x, f, g = x + dx, f_new, g_new
        record(step, x, f, g)
        if _converged(g, f, f_prev, config):
            return "converged"
    return "max-steps"


# ------------------------------------------------------------------ basis objective


class BasisObjective:
    """E0 and its gradient as a function of the free variables of a basis graph."""

    def __init__(self, basis, field, n_elec, conv=1e-9, comm_tol=1e-9, max_iter=200):
        from .grad import energy_and_gradient  # local: grad imports heavy modules
        self._eval = energy_and_gradient
        self.basis, self.field, self.n_elec = basis, field, n_elec
        self.conv, self.comm_tol, self.max_iter = conv, comm_tol, max_iter
        self.theta_full = basis.graph.theta_values()
        self.free = np.flatnonzero(basis.graph.free_mask())

    @property
    def x0(self):
        return self.theta_full[self.free].copy()

    def full(self, x):
        t = self.theta_full.copy()
        t[self.free] = x
        return t

    def __call__(self, x):
        E, rep, res = self._eval(self.basis, self.field, self.n_elec, self.full(x), self.conv,
                                 self.comm_tol, self.max_iter)
        if rep is None:
            raise ObjectiveFailure(f"SCF not converged after {res.iterations} iterations")
        return E, rep.dE_dtheta, res.iterations


def optimize_basis(basis, field, n_elec, config=OptimizerConfig(), conv=1e-9, comm_tol=1e-9,
                   callback=None):
    """Minimize E0 over the free variables of ``basis``; returns (trajectory, optimized basis)."""
    obj = BasisObjective(basis, field, n_elec, conv, comm_tol)
    traj = minimize(obj, obj.x0, config, callback)
    best = basis.at(obj.full(traj.theta)) if traj.records else basis
    return traj, best


__all__ = [
    "BasisObjective", "LineSearchError", "LineSearchResult", "METHODS", "ObjectiveFailure",
    "OptimizerConfig", "StepRecord", "Trajectory", "line_search_hz", "line_search_strong_wolfe",
    "minimize", "optimize_basis",
]
