"""Synthetic data from the deformation model and matching limit-law inputs."""
from __future__ import annotations

import numpy as np
from scipy import stats

from .deformation import DeformationFamily
from .errors import DomainError

TEMPLATES = {
    "uniform": stats.uniform(0.0, 1.0),
    "beta22": stats.beta(2.0, 2.0),
    "normal": stats.norm(0.0, 1.0),
}


def get_template(name: str):
    try:
        return TEMPLATES[name]
    except KeyError:
        raise DomainError(f"unknown template {name!r}; choose from {sorted(TEMPLATES)}") from None


def simulate_groups(fam: DeformationFamily, theta_star, n, template="uniform", rng=None,
                    squared_groups=()) -> list:
    """Draw ``X_{i,j} = phi_{theta*_j}^{-1}(eps_{i,j})`` for every group.

    Groups listed in ``squared_groups`` use ``eps**2`` instead of ``eps``,
    a shape change that no increasing affine warp can undo.
    """
    rng = np.random.default_rng(rng)
    dist = get_template(template) if isinstance(template, str) else template
    theta_star = np.atleast_2d(np.asarray(theta_star, dtype=float))
    if theta_star.shape[0] == 1 and fam.param_dim == 1:
        theta_star = theta_star.T
    J = theta_star.shape[0]
    sizes = [n] * J if np.isscalar(n) else list(n)
    out = []
    for j in range(J):
        eps = dist.ppf(rng.random(sizes[j]))
        if j in squared_groups:
            eps = eps**2
        out.append(fam.inverse(theta_star[j], eps))
    return out


def null_limit_inputs(fam: DeformationFamily, theta_star, template="uniform", anchor=-1,
                      quad_points: int = 200_000):
    """``(R_functions, g_quantile, phi_tilde)`` for the null limit simulator.

    ``R_j(G^{-1}(t))`` is the parameter derivative of the j-th warp at
    ``phi_{theta*_j}^{-1}(G^{-1}(t))``.  ``Phi`` entries are midpoint-rule
    integrals over ``t``.
    """
    dist = get_template(template) if isinstance(template, str) else template
    theta_star = np.atleast_2d(np.asarray(theta_star, dtype=float))
    if theta_star.shape[0] == 1 and fam.param_dim == 1:
        theta_star = theta_star.T
    J, p = theta_star.shape

    def make_R(lam):
        return lambda t: fam.dlam(lam, fam.inverse(lam, dist.ppf(t)))

    R_functions = [make_R(theta_star[j]) for j in range(J)]

    def g_quantile(t):
        return dist.pdf(dist.ppf(t))

    t = (np.arange(quad_points) + 0.5) / quad_points
    Rs = [np.atleast_2d(f(t)) for f in R_functions]
    full = np.empty((J * p, J * p))
    for a in range(J):
        for b in range(J):
            gram = Rs[a] @ Rs[b].T / quad_points
            coef = 2.0 * (J - 1) / J**2 if a == b else -2.0 / J**2
            full[a * p:(a + 1) * p, b * p:(b + 1) * p] = coef * gram
    keep = list(range(J))
    if anchor is not None:
        keep.pop(anchor if anchor >= 0 else J + anchor)
    idx = np.concatenate([np.arange(j * p, (j + 1) * p) for j in keep])
    return R_functions, g_quantile, full[np.ix_(idx, idx)]
