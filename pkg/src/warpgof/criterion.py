"""Empirical Wasserstein-variation criterion ``U_n`` and its minimization.

``U_n(theta)`` warps every group with its own parameters, forms the
barycenter of the warped empirical measures and returns the mean squared
``W2`` distance to it.  Warps are increasing, so the warped order statistics
stay sorted and the barycenter is the across-group average of order
statistics (on the merged grid when group sizes differ).
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .deformation import DeformationFamily, ThetaVector
from .empirical import SampleSet
from .errors import DomainError, NoStartPoint


@dataclass(frozen=True)
class CriterionEval:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass
class MinimizeResult:
    theta_hat: ThetaVector
    value: float
    iterations: int
    converged: bool
    restarts_used: int
    nfev: int = 0


@dataclass(frozen=True)
class MinimizeOptions:
    """Optimizer settings.

    ``maxiter=None`` means ``500 * d`` iterations with ``d`` the number of
    free coordinates.
    """

    method: str = "nelder-mead"
    fatol: float = 1e-8
    xatol: float = 1e-8
    gtol: float = 1e-8
    maxiter: int | None = None
    points_per_coord: int = 3
    initial_step: float = 0.05
    workers: int = 1


class Objective:
    """``U_n`` restricted to a data set and family, as a function of ``theta``.

    Precomputes the group layout once so repeated evaluations inside an
    optimizer only pay for the warps and one weighted sum.
    """

    def __init__(self, data: SampleSet, fam: DeformationFamily):
        self.data = data
        self.fam = fam
        self.J = data.J
        self.equal = data.equal_sizes
        self.values = [s.values for s in data.samples]
        if self.equal:
            self.n = data.sizes[0]
            self.X = data.matrix()
            self._inv_size = 1.0 / self.X.size
        else:
            g = data.grid
            self.weights = g.weights
            self.index = g.index

    def warped(self, theta: np.ndarray) -> list:
        fam = self.fam
        return [fam.value(theta[j], x) for j, x in enumerate(self.values)]

    def value(self, theta: np.ndarray) -> float:
        if self.equal:
            Z = self.fam.value_rows(theta, self.X)
            r = Z - Z.sum(axis=0) * (1.0 / self.J)
            return float(np.vdot(r, r)) * self._inv_size
        Z = self.warped(theta)
        Zg = np.vstack([z[idx] for z, idx in zip(Z, self.index)])
        r = Zg - Zg.mean(axis=0)
        return float(np.dot(self.weights, np.einsum("js,js->s", r, r))) / self.J

    def _require_equal(self):
        if not self.equal:
            raise DomainError("gradient and Hessian are only available for equal group sizes")

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        """Full ``(J, p)`` gradient."""
        self._require_equal()
        Z = np.vstack(self.warped(theta))
        r = Z - Z.mean(axis=0)
        J, n = self.J, self.n
        return np.vstack(
            [self.fam.dlam(theta[j], self.values[j]) @ r[j] for j in range(J)]
        ) * (2.0 / (J * n))

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        """Full ``(J p, J p)`` Hessian."""
        self._require_equal()
        fam, J, n = self.fam, self.J, self.n
        p = theta.shape[1]
        Z = np.vstack(self.warped(theta))
        r = Z - Z.mean(axis=0)
        D = [fam.dlam(theta[j], self.values[j]) for j in range(J)]
        H = np.empty((J * p, J * p))
        for a in range(J):
            for b in range(a, J):
                cross = D[a] @ D[b].T / n
                if a == b:
                    second = fam.dlam2(theta[a], self.values[a]) @ r[a] / n
                    block = (2.0 / J) * second + (2.0 * (J - 1) / J**2) * cross
                else:
                    block = -(2.0 / J**2) * cross
                H[a * p:(a + 1) * p, b * p:(b + 1) * p] = block
                H[b * p:(b + 1) * p, a * p:(a + 1) * p] = block.T
        return 0.5 * (H + H.T)


def _theta_array(theta) -> np.ndarray:
    if isinstance(theta, ThetaVector):
        return theta.values
    arr = np.asarray(theta, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def _validated(data, fam, theta):
    tv = theta if isinstance(theta, ThetaVector) else ThetaVector(_theta_array(theta))
    if tv.J != data.J:
        raise DomainError(f"theta has {tv.J} groups, data has {data.J}")
    tv.check(fam)
    return tv


def u_n(data: SampleSet, fam: DeformationFamily, theta) -> float:
    tv = _validated(data, fam, theta)
    return Objective(data, fam).value(tv.values)


def grad_u_n(data: SampleSet, fam: DeformationFamily, theta) -> np.ndarray:
    """Flattened ``J p`` gradient; anchored coordinates are reported as 0."""
    tv = _validated(data, fam, theta)
    g = Objective(data, fam).gradient(tv.values)
    if tv.anchored:
        g[tv.anchor] = 0.0
    return g.ravel()


def phi_hessian(data: SampleSet, fam: DeformationFamily, theta) -> np.ndarray:
    """Full ``(J p, J p)`` Hessian of ``U_n``; see :func:`reduce_anchored`."""
    tv = _validated(data, fam, theta)
    return Objective(data, fam).hessian(tv.values)


def reduce_anchored(matrix: np.ndarray, theta: ThetaVector) -> np.ndarray:
    """Drop the anchored group's rows and columns."""
    if not theta.anchored:
        return matrix
    p = theta.p
    keep = np.concatenate([np.arange(j * p, (j + 1) * p) for j in theta.free_index])
    return matrix[np.ix_(keep, keep)]


def evaluate(data: SampleSet, fam: DeformationFamily, theta) -> CriterionEval:
    tv = _validated(data, fam, theta)
    obj = Objective(data, fam)
    g = obj.gradient(tv.values)
    if tv.anchored:
        g[tv.anchor] = 0.0
    return CriterionEval(obj.value(tv.values), g.ravel(), obj.hessian(tv.values))


# ---------------------------------------------------------------------------
# optimization


def nelder_mead_box(f, x0, lower, upper, step, xatol=1e-8, fatol=1e-8, maxiter=500):
    """Nelder-Mead with every trial point projected onto ``[lower, upper]``.

    Returns ``(x, fx, iterations, nfev, converged)``; convergence means the
    simplex diameter and the spread of its values are both below tolerance.
    """
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    d = x0.size
    sim = np.empty((d + 1, d))
    sim[0] = x0
    for k in range(d):
        y = x0.copy()
        y[k] += step[k]
        if y[k] > upper[k]:
            y[k] = x0[k] - step[k]
        sim[k + 1] = np.clip(y, lower, upper)
    fs = np.array([f(p) for p in sim])
    nfev = d + 1
    it = 0
    converged = False
    while it < maxiter:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        if (np.max(np.abs(sim[1:] - sim[0])) <= xatol
                and fs[-1] - fs[0] <= fatol):
            converged = True
            break
        it += 1
        centroid = sim[:-1].sum(axis=0) * (1.0 / d)
        worst = sim[-1]
        xr = np.clip(2.0 * centroid - worst, lower, upper)
        fr = f(xr)
        nfev += 1
        if fr < fs[0]:
            xe = np.clip(3.0 * centroid - 2.0 * worst, lower, upper)
            fe = f(xe)
            nfev += 1
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = np.clip(centroid + 0.5 * (xr - centroid), lower, upper)
        else:
            xc = np.clip(centroid + 0.5 * (worst - centroid), lower, upper)
        fc = f(xc)
        nfev += 1
        if fc < min(fr, fs[-1]):
            sim[-1], fs[-1] = xc, fc
            continue
        sim[1:] = sim[0] + 0.5 * (sim[1:] - sim[0])
        fs[1:] = [f(p) for p in sim[1:]]
        nfev += d
    k = int(np.argmin(fs))
    return sim[k].copy(), float(fs[k]), it, nfev, converged


def projected_gradient(f, grad, x0, lower, upper, gtol=1e-8, maxiter=500):
    """Projected gradient descent with Armijo backtracking."""
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    fx = f(x)
    nfev = 1
    step = 1.0
    converged = False
    it = 0
    while it < maxiter:
        g = grad(x)
        pg = np.clip(x - g, lower, upper) - x
        if np.linalg.norm(pg) <= gtol:
            converged = True
            break
        it += 1
        step = min(step * 2.0, 1e6)
        while True:
            xn = np.clip(x - step * g, lower, upper)
            fn = f(xn)
            nfev += 1
            if fn <= fx - 1e-4 * np.dot(g, x - xn) or step < 1e-16:
                break
            step *= 0.5
        if step < 1e-16:
            break
        x, fx = xn, fn
    return x, float(fx), it, nfev, converged


def start_lattice(fam: DeformationFamily, theta0: ThetaVector, points_per_coord: int) -> list:
    """Cell-midpoint lattice of the box for every free coordinate."""
    if points_per_coord < 1:
        return []
    m = points_per_coord
    frac = (np.arange(m) + 0.5) / m
    axes = [fam.lower[k] + (fam.upper[k] - fam.lower[k]) * frac for k in range(fam.param_dim)]
    n_free = len(theta0.free_index)
    per_coord = axes * n_free
    return [np.array(pt) for pt in itertools.product(*per_coord)]


def minimize_u_n(data: SampleSet, fam: DeformationFamily, theta0: ThetaVector | None = None,
                 starts=None, options: MinimizeOptions | None = None) -> MinimizeResult:
    """Multistart minimization of ``U_n`` over the free (non-anchored) parameters.

    ``theta0`` fixes the anchoring and the anchored group's value (default:
    the family's identity with its default anchoring).  ``starts`` is a list
    of free vectors or ThetaVectors; ``None`` means a lattice over the box
    with ``options.points_per_coord`` points per free coordinate.
    """
    options = options or MinimizeOptions()
    if theta0 is None:
        theta0 = ThetaVector.identity(fam, data.J)
    if theta0.J != data.J or theta0.p != fam.param_dim:
        raise DomainError("theta0 does not match the data and family shapes")
    if starts is None:
        starts = start_lattice(fam, theta0, options.points_per_coord)
    starts = [s.free() if isinstance(s, ThetaVector) else np.asarray(s, dtype=float).ravel()
              for s in starts]
    if not starts:
        raise NoStartPoint("minimize_u_n needs at least one start point")

    obj = Objective(data, fam)
    free_idx = theta0.free_index
    p = fam.param_dim
    n_free = len(free_idx) * p
    full = theta0.values.copy()
    lower = np.tile(fam.lower, len(free_idx))
    upper = np.tile(fam.upper, len(free_idx))
    maxiter = options.maxiter or 500 * max(n_free, 1)
    step = options.initial_step * (upper - lower)
    method = options.method
    if method == "gradient" and not obj.equal:
        method = "nelder-mead"

    def run(x0):
        th = full.copy()

        def f(x):
            th[free_idx] = x.reshape(-1, p)
            return obj.value(th)

        if method == "nelder-mead":
            return nelder_mead_box(f, x0, lower, upper, step, options.xatol, options.fatol, maxiter)
        if method == "gradient":
            def g(x):
                th[free_idx] = x.reshape(-1, p)
                return obj.gradient(th)[free_idx].ravel()
            return projected_gradient(f, g, x0, lower, upper, options.gtol, maxiter)
        raise DomainError(f"unknown optimizer {method!r}")

    for s in starts:
        if s.size != n_free:
            raise DomainError(f"start point has {s.size} coordinates, expected {n_free}")
    if options.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(options.workers) as ex:
            runs = list(ex.map(run, starts))
    else:
        runs = [run(s) for s in starts]

    best = min(range(len(runs)), key=lambda k: (runs[k][1], k))
    x, fx, it, _, conv = runs[best]
    theta_hat = theta0.with_free(x)
    return MinimizeResult(
        theta_hat=theta_hat,
        value=fx,
        iterations=it,
        converged=conv,
        restarts_used=len(runs),
        nfev=sum(r[3] for r in runs),
    )


def inf_u_n(data: SampleSet, fam: DeformationFamily, theta0: ThetaVector | None = None,
            options: MinimizeOptions | None = None) -> float:
    return minimize_u_n(data, fam, theta0, options=options).value


__all__ = [
    "CriterionEval", "MinimizeOptions", "MinimizeResult", "Objective", "evaluate",
    "grad_u_n", "inf_u_n", "minimize_u_n", "nelder_mead_box", "phi_hessian",
    "projected_gradient", "reduce_anchored", "start_lattice", "u_n",
]
