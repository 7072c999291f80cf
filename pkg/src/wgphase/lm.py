"""Levenberg-Marquardt nonlinear least squares with box bounds.

Minimizes ``sum(residual(x)**2)`` with Marquardt-scaled damping: the
damping factor is divided by 3 after an accepted step and doubled after a
rejected one.  The Jacobian is taken by central finite differences with
per-parameter step ``max(1e-6*|x|, 1e-8)``; bounds are enforced by
projecting trial points onto the box.  The covariance estimate is
``inv(J^T J)`` scaled by the reduced chi-square.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

_CHI2_REL_TOL = 1e-10
_STEP_NORM_TOL = 1e-12
_FLAT_SV_RATIO = 1e-12


@dataclass
class FitResult:
    """Outcome of a least-squares minimization.

    ``params`` is the final parameter vector (named via ``names``),
    ``covariance`` the scaled inverse normal matrix, ``chi2`` the residual
    sum of squares.  ``flat_directions`` lists parameters that the data do
    not constrain (near-null directions of the Jacobian).
    """

    params: np.ndarray
    covariance: np.ndarray
    chi2: float
    n_iter: int
    converged: bool
    names: list = field(default_factory=list)
    message: str = ""
    flat_directions: list = field(default_factory=list)

    @property
    def uncertainties(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def __getitem__(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def error(self, name: str) -> float:
        return float(self.uncertainties[self.names.index(name)])

    def as_dict(self) -> dict:
        errs = self.uncertainties
        named = {n: {"value": float(v), "sigma": float(e)}
                 for n, v, e in zip(self.names, self.params, errs)}
        return {
            "params": named,
            "chi2": float(self.chi2),
            "n_iter": int(self.n_iter),
            "converged": bool(self.converged),
            "message": self.message,
            "flat_directions": list(self.flat_directions),
        }


def fd_step(x: np.ndarray) -> np.ndarray:
    """Central-difference step sizes, max(1e-6*|x|, 1e-8) per parameter."""
    return np.maximum(1e-6 * np.abs(x), 1e-8)


def jacobian_fd(fun: Callable, x: np.ndarray, f0: Optional[np.ndarray] = None) -> np.ndarray:
    """Central finite-difference Jacobian of a residual function."""
    x = np.asarray(x, dtype=float)
    steps = fd_step(x)
    if f0 is None:
        f0 = np.asarray(fun(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        xp = x.copy(); xp[j] += steps[j]
        xm = x.copy(); xm[j] -= steps[j]
        jac[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * steps[j])
    return jac


def _project(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def lm_minimize(residual: Callable, init: Sequence[float], bounds=None,
                names: Optional[Sequence[str]] = None, max_iter: int = 500,
                lambda0: float = 1e-3) -> FitResult:
    """Minimize a residual vector in the least-squares sense.

    Parameters
    ----------
    residual : callable
        Maps a parameter vector to a residual array (already weighted).
    init : sequence of float
        Starting point; must lie within ``bounds`` and give finite residuals.
    bounds : optional pair (lower, upper) of sequences
        Box constraints, enforced by projection; None entries mean unbounded.
    names : optional parameter names carried into the result.
    max_iter : iteration cap; exhaustion returns ``converged=False``.
    """
    x = np.asarray(init, dtype=float).copy()
    n = x.size
    if bounds is None:
        lower = np.full(n, -np.inf)
        upper = np.full(n, np.inf)
    else:
        lower = np.array([-np.inf if b is None else float(b) for b in bounds[0]])
        upper = np.array([np.inf if b is None else float(b) for b in bounds[1]])
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(x < lower) or np.any(x > upper):
            raise ValueError("initial point violates bounds")

    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual is not finite at the initial point")
    chi2 = float(r @ r)
    lam = lambda0
    converged = False
    message = "max iterations exhausted"
    n_iter = 0
    jac = None

    for n_iter in range(1, max_iter + 1):
        jac = jacobian_fd(residual, x, f0=r)
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1.0

        accepted = False
        for _ in range(40):
            normal = jtj + lam * np.diag(diag)
            try:
                step = np.linalg.solve(normal, -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is None or not np.all(np.isfinite(step)):
                ridge = 1e-10 * max(np.max(diag), 1.0)
                warnings.warn("singular normal equations; applying ridge regularization",
                              RuntimeWarning, stacklevel=2)
                step = np.linalg.solve(normal + ridge * np.eye(n), -grad)
            x_try = _project(x + step, lower, upper)
            clipped = x_try != x + step
            if np.any(clipped) and not np.all(clipped):
                # re-solve for the free coordinates with the clipped ones held
                # at their bounds, otherwise steps into an active bound stall
                free = ~clipped
                normal_f = normal[np.ix_(free, free)]
                rhs = -grad[free] - normal[np.ix_(free, clipped)] @ (x_try[clipped] - x[clipped])
                try:
                    step_f = np.linalg.solve(normal_f, rhs)
                    x_alt = x_try.copy()
                    x_alt[free] = _project(x[free] + step_f, lower[free], upper[free])
                    r_alt = np.asarray(residual(x_alt), dtype=float)
                    if np.all(np.isfinite(r_alt)):
                        r_try0 = np.asarray(residual(x_try), dtype=float)
                        chi2_try0 = float(r_try0 @ r_try0) if np.all(np.isfinite(r_try0)) else np.inf
                        if float(r_alt @ r_alt) < chi2_try0:
                            x_try = x_alt
                except np.linalg.LinAlgError:
                    pass
            r_try = np.asarray(residual(x_try), dtype=float)
            chi2_try = float(r_try @ r_try) if np.all(np.isfinite(r_try)) else np.inf
            if chi2_try < chi2:
                step_norm = float(np.linalg.norm(x_try - x))
                rel_drop = (chi2 - chi2_try) / max(chi2, 1e-300)
                x, r, chi2 = x_try, r_try, chi2_try
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                if rel_drop < _CHI2_REL_TOL:
                    converged, message = True, "relative chi2 decrease below tolerance"
                elif step_norm < _STEP_NORM_TOL:
                    converged, message = True, "step norm below tolerance"
                break
            lam *= 2.0
            if lam > 1e14:
                break
        if converged:
            break
        if not accepted:
            converged = True
            message = "no downhill step found (stationary point)"
            break

    if jac is None:
        jac = jacobian_fd(residual, x, f0=r)
    covariance, flat = _covariance(jac, chi2, r.size, n)
    names = list(names) if names is not None else [f"p{i}" for i in range(n)]
    flat_names = [names[i] for i in flat]
    return FitResult(params=x, covariance=covariance, chi2=chi2, n_iter=n_iter,
                     converged=converged, names=names, message=message,
                     flat_directions=flat_names)


def _covariance(jac: np.ndarray, chi2: float, m: int, n: int):
    """Covariance via SVD pseudo-inverse of J^T J, scaled by reduced chi2.

    Also returns indices of parameters dominated by near-null singular
    directions (the flat-direction diagnostic).
    """
    u, s, vt = np.linalg.svd(jac, full_matrices=False)
    flat = []
    if s.size and s[0] > 0:
        null_mask = s < _FLAT_SV_RATIO * s[0]
        if np.any(null_mask):
            weights = np.abs(vt[null_mask]).max(axis=0)
            flat = [int(i) for i in np.nonzero(weights > 0.1)[0]]
        s_inv2 = np.where(null_mask, 0.0, 1.0 / np.where(null_mask, 1.0, s) ** 2)
        cov = (vt.T * s_inv2) @ vt
    else:
        cov = np.full((n, n), np.inf)
        flat = list(range(n))
    dof = max(m - n, 1)
    cov = cov * (chi2 / dof if m > n else 1.0)
    return 0.5 * (cov + cov.T), flat
