"""Estimation with plug-in asymptotics and Monte Carlo limit laws.

The limit laws are functionals of independent Brownian bridges on ``(0, 1)``.
Bridges are simulated on the interior grid ``t_k = k / (K + 1)`` and integrals
use the trapezoid rule on that grid, which truncates ``(0, 1)`` to
``[1/(K+1), K/(K+1)]`` and keeps ``1 / g(G^{-1}(t))`` finite at the ends.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .criterion import MinimizeOptions, Objective, minimize_u_n, reduce_anchored
from .deformation import DeformationFamily, ThetaVector
from .empirical import SampleSet
from .errors import DensityError, DomainError, EstimationFailed, SingularPhi

#: Draws simulated per independently seeded chunk.
CHUNK = 256


@dataclass(frozen=True, eq=False)
class PhiMatrix:
    full: np.ndarray
    anchored: np.ndarray
    invertible: bool

    @classmethod
    def from_full(cls, full: np.ndarray, theta: ThetaVector, tol: float = 1e-12) -> "PhiMatrix":
        full = 0.5 * (full + full.T)
        red = reduce_anchored(full, theta)
        eig = np.linalg.eigvalsh(red) if red.size else np.array([1.0])
        scale = max(1.0, float(np.max(np.abs(eig))))
        return cls(full, red, bool(np.min(eig) > tol * scale))


def analytic_phi(gram: np.ndarray) -> np.ndarray:
    """Phi from the Gram matrix ``<R_i, R_j>`` of scalar-parameter families."""
    gram = np.asarray(gram, dtype=float)
    J = gram.shape[0]
    phi = -(2.0 / J**2) * gram
    np.fill_diagonal(phi, 2.0 * (J - 1) / J**2 * np.diag(gram))
    return phi


def estimate(data: SampleSet, fam: DeformationFamily, theta0: ThetaVector | None = None,
             options: MinimizeOptions | None = None, starts=None):
    """Minimize ``U_n`` and evaluate the Hessian-based ``Phi`` at the minimizer.

    Returns ``(theta_hat, phi, result)``; ``phi`` is ``None`` when group sizes
    differ.  Raises :class:`EstimationFailed` (carrying the best point) when
    the optimizer does not converge.
    """
    res = minimize_u_n(data, fam, theta0, starts=starts, options=options)
    phi = None
    if data.equal_sizes:
        full = Objective(data, fam).hessian(res.theta_hat.values)
        phi = PhiMatrix.from_full(full, res.theta_hat)
    if not res.converged:
        raise EstimationFailed("optimizer did not converge", best=(res.theta_hat, phi, res))
    return res.theta_hat, phi, res


# ---------------------------------------------------------------------------
# Brownian bridges


@dataclass(frozen=True, eq=False)
class BridgePath:
    grid: np.ndarray
    values: np.ndarray


def bridge_grid(K: int) -> np.ndarray:
    if K < 1:
        raise DomainError("bridge grid needs K >= 1 interior points")
    return np.arange(1, K + 1) / (K + 1)


def trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    if t.size > 1:
        h = np.diff(t)
        w[:-1] += h / 2
        w[1:] += h / 2
    return w


def brownian_bridges(shape, K: int, rng: np.random.Generator) -> np.ndarray:
    """Bridges on the interior grid, array of shape ``shape + (K,)``.

    ``B(t_k) = W(t_k) - t_k W(1)`` with ``W`` a Gaussian random walk on
    ``K + 1`` steps of length ``1 / (K + 1)``.
    """
    t = bridge_grid(K)
    shape = tuple(shape)
    steps = rng.standard_normal(shape + (K + 1,)) * np.sqrt(1.0 / (K + 1))
    W = np.cumsum(steps, axis=-1)
    return W[..., :-1] - t * W[..., -1:]


def brownian_bridge_path(K: int, rng: np.random.Generator) -> BridgePath:
    return BridgePath(bridge_grid(K), brownian_bridges((), K, rng))


def _seed_sequence(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(0, 2**63)))
    return np.random.SeedSequence(int(rng))


def _chunked(n_draws: int, rng, workers: int, fn):
    """Run ``fn(rng, start, stop)`` over fixed chunks seeded by chunk index."""
    root = _seed_sequence(rng)
    bounds = [(s, min(s + CHUNK, n_draws)) for s in range(0, n_draws, CHUNK)]

    def job(k):
        seq = np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (k,))
        return fn(np.random.default_rng(seq), *bounds[k])

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, range(len(bounds))))
    else:
        parts = [job(k) for k in range(len(bounds))]
    return parts


# ---------------------------------------------------------------------------
# limit laws


@dataclass(frozen=True, eq=False)
class LimitLawSample:
    draws: np.ndarray
    first: np.ndarray | None = None
    correction: np.ndarray | None = None
    y: np.ndarray | None = None

    def summary(self) -> dict:
        d = self.draws
        out = {
            "n_draws": int(d.size),
            "mean": float(d.mean()),
            "sd": float(d.std(ddof=1)) if d.size > 1 else 0.0,
            "quantiles": {str(q): float(np.quantile(d, q)) for q in (0.05, 0.5, 0.9, 0.95, 0.99)},
        }
        if self.first is not None:
            out["first_term_mean"] = float(self.first.mean())
            out["correction_mean"] = float(self.correction.mean())
        return out


@dataclass
class WarpedQuantiles:
    """One element of the argmin set, described on the quantile scale.

    ``dphi[j](t)`` is the x-derivative of the j-th warp at ``F_j^{-1}(t)``,
    ``warped[j](t)`` the warped quantile ``phi_j(F_j^{-1}(t))``.  The
    barycenter defaults to the average of ``warped``.
    """

    dphi: Sequence[Callable]
    warped: Sequence[Callable]
    barycenter: Callable | None = None


def _eval_on_grid(f, t) -> np.ndarray:
    return np.broadcast_to(np.asarray(f(t), dtype=float), t.shape).copy()


def _check_density(values, label):
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise DensityError(f"{label} must be finite and strictly positive on the grid")


def simulate_limit_general(gamma: Sequence[WarpedQuantiles], densities: Sequence[Callable],
                           K: int = 1024, n_draws: int = 1000, rng=0, bridges=None,
                           workers: int = 1) -> LimitLawSample:
    """Draws of ``min over gamma of (2/J) sum_j int dphi_j B_j / f_j (warped_j - bary)``.

    ``densities[j](t)`` is ``f_j(F_j^{-1}(t))``.  ``bridges`` (shape
    ``(n_draws, J, K)``) replaces the simulated bridges when given.
    """
    if not gamma:
        raise DomainError("gamma must contain at least one element")
    t = bridge_grid(K)
    c = trapezoid_weights(t)
    J = len(densities)
    dens = np.vstack([_eval_on_grid(f, t) for f in densities])
    _check_density(dens, "density")
    kernels = []
    for wq in gamma:
        if len(wq.dphi) != J or len(wq.warped) != J:
            raise DomainError("each gamma element needs J derivative and warped-quantile functions")
        warped = np.vstack([_eval_on_grid(f, t) for f in wq.warped])
        bary = warped.mean(axis=0) if wq.barycenter is None else _eval_on_grid(wq.barycenter, t)
        dphi = np.vstack([_eval_on_grid(f, t) for f in wq.dphi])
        kernels.append(dphi / dens * (warped - bary) * c)
    A = np.stack(kernels) * (2.0 / J)  # (G, J, K)

    def reduce(B):
        return np.einsum("gjk,djk->dg", A, B).min(axis=1)

    if bridges is not None:
        bridges = np.asarray(bridges, dtype=float)
        if bridges.shape[1:] != (J, K):
            raise DomainError(f"bridges must have shape (n_draws, {J}, {K})")
        return LimitLawSample(reduce(bridges))
    parts = _chunked(n_draws, rng, workers,
                     lambda g, a, b: reduce(brownian_bridges((b - a, J), K, g)))
    return LimitLawSample(np.concatenate(parts))


def simulate_limit_null(R_functions: Sequence[Callable], g_quantile: Callable, phi_tilde,
                        K: int = 1024, n_draws: int = 1000, rng=0, anchor: int | None = -1,
                        bridges=None, workers: int = 1) -> LimitLawSample:
    """Draws of the null limit of ``n inf U_n``.

    Each draw is ``(1/J) sum_j int (Bt_j / g)^2 - 0.5 Yt' Phi~^{-1} Yt`` with
    ``Bt_j = B_j - mean_k B_k`` and ``Y_j = (2/J) int R_j Bt_j / g``.
    ``R_functions[j](t)`` returns ``R_j(G^{-1}(t))`` (shape ``(K,)`` or
    ``(p, K)``); ``g_quantile(t)`` returns ``g(G^{-1}(t))``.  ``anchor`` names
    the group dropped from ``Y`` (``None`` keeps every group).
    """
    t = bridge_grid(K)
    c = trapezoid_weights(t)
    J = len(R_functions)
    gq = _eval_on_grid(g_quantile, t)
    _check_density(gq, "g_quantile")
    R = [np.atleast_2d(np.asarray(f(t), dtype=float)) * np.ones_like(t) for f in R_functions]
    p = R[0].shape[0]
    R = np.stack(R)  # (J, p, K)
    groups = list(range(J))
    if anchor is not None:
        groups.pop(anchor if anchor >= 0 else J + anchor)
    phi_tilde = np.atleast_2d(np.asarray(phi_tilde, dtype=float))
    if phi_tilde.shape != (len(groups) * p, len(groups) * p):
        raise DomainError(f"phi_tilde must be {len(groups) * p} x {len(groups) * p}")
    try:
        cond = np.linalg.cond(phi_tilde)
        if not np.isfinite(cond) or cond > 1e12:
            raise np.linalg.LinAlgError
        phi_inv = np.linalg.inv(phi_tilde)
    except np.linalg.LinAlgError:
        raise SingularPhi("phi_tilde is singular") from None
    w_first = c / gq**2
    w_y = (2.0 / J) * R[groups] * (c / gq)  # (J', p, K)

    def reduce(B):
        Bt = B - B.mean(axis=1, keepdims=True)
        first = np.einsum("djk,djk,k->d", Bt, Bt, w_first) / J
        y = np.einsum("jpk,djk->djp", w_y, Bt[:, groups]).reshape(B.shape[0], -1)
        corr = 0.5 * np.einsum("di,ij,dj->d", y, phi_inv, y)
        return np.stack([first - corr, first, corr]), y

    if bridges is not None:
        bridges = np.asarray(bridges, dtype=float)
        if bridges.shape[1:] != (J, K):
            raise DomainError(f"bridges must have shape (n_draws, {J}, {K})")
        parts = [reduce(bridges)]
    else:
        parts = _chunked(n_draws, rng, workers,
                         lambda g, a, b: reduce(brownian_bridges((b - a, J), K, g)))
    stats = np.concatenate([s for s, _ in parts], axis=1)
    y = np.concatenate([y for _, y in parts], axis=0)
    return LimitLawSample(stats[0], first=stats[1], correction=stats[2], y=y)


def clt_draws(sample: LimitLawSample, phi_tilde) -> np.ndarray:
    """Draws of ``Phi~^{-1} Y~``, the limit of ``sqrt(n) (theta_hat - theta*)`` up to sign."""
    if sample.y is None:
        raise DomainError("the sample carries no Y draws")
    return np.linalg.solve(np.atleast_2d(phi_tilde), sample.y.T).T
