"""Shared test utilities.

The loss oracle here is an independent reimplementation of the weighted
quasi-likelihood in 80-bit extended precision, used to validate the package's
float64 loss and gradient by central finite differences.
"""

import numpy as np

import surveymc as smc

LD = np.longdouble


def mixed_layout(sigma: float = 1.0) -> smc.CategoryLayout:
    """Small layout touching all four families."""
    return smc.CategoryLayout.of(
        ("gaussian", 3), ("poisson", 3), ("bernoulli", 3), ("exponential", 3),
        sigma=sigma)


def draw_natural(layout, rng, n):
    """In-domain natural parameters; exponential blocks stay negative."""
    Z = rng.uniform(-2.0, 2.0, (n, layout.n_cols))
    for fam, sl in layout.slices():
        if fam.kind == "exponential":
            Z[:, sl] = rng.uniform(-2.0, -0.5, (n, sl.stop - sl.start))
    return Z


def sample_responses(layout, Z, rng):
    Y = np.empty_like(Z)
    for fam, sl in layout.slices():
        Y[:, sl] = fam.sample(Z[:, sl], rng)
    return Y


def random_problem(rng, n=20, layout=None, miss=0.3, pi_lo=0.05, p_lo=0.2):
    """Dataset plus a synthetic response-probability model for loss tests."""
    layout = layout or mixed_layout()
    L = layout.n_cols
    Z = draw_natural(layout, rng, n)
    Y = sample_responses(layout, Z, rng)
    R = rng.random((n, L)) >= miss
    R[0] = True  # keep every column nonempty
    ds = smc.MixedDataset(
        Y=np.where(R, Y, np.nan), R=R, X=rng.uniform(size=(n, 2)),
        strata=np.ones(n, dtype=np.int64), pi=rng.uniform(pi_lo, 1.0, n),
        layout=layout)
    probs = smc.ResponseProbModel(
        fits={}, p_hat=rng.uniform(p_lo, 1.0, (n, L)), p_floor=p_lo)
    return ds, probs, Z


def g_ld(kind, z, sigma=1.0):
    """Cumulant functions written directly in extended precision."""
    z = np.asarray(z, dtype=LD)
    if kind == "bernoulli":
        # stable piecewise log(1 + e^z)
        return np.where(z > 0, z + np.log1p(np.exp(-np.abs(z))),
                        np.log1p(np.exp(-np.abs(z))))
    if kind == "poisson":
        return np.exp(z)
    if kind == "gaussian":
        return LD(sigma) ** 2 * z * z / 2
    return -np.log(-z)


def loss_oracle(Z, Y, R, pi, p_hat, layout, N):
    """Extended-precision weighted loss, one block at a time."""
    Zl = np.asarray(Z, dtype=LD)
    Yl = np.where(R, np.nan_to_num(np.asarray(Y)), 0.0).astype(LD)
    W = np.where(R, 1.0 / (np.asarray(pi)[:, None].astype(LD)
                           * np.asarray(p_hat).astype(LD)), LD(0.0))
    total = LD(0.0)
    for fam, sl in layout.slices():
        zb = Zl[:, sl]
        term = -Yl[:, sl] * zb + np.where(R[:, sl], g_ld(fam.kind, zb, fam.sigma), LD(0.0))
        total += np.sum(W[:, sl] * term)
    return total / (LD(N) * LD(layout.n_cols))


def fd_gradient(Z, Y, R, pi, p_hat, layout, N, h=1e-6):
    """Central finite differences of the oracle loss, entry by entry."""
    Z = np.asarray(Z, dtype=np.float64)
    G = np.zeros_like(Z)
    for i in range(Z.shape[0]):
        for j in range(Z.shape[1]):
            Zp = Z.copy()
            Zp[i, j] += h
            Zm = Z.copy()
            Zm[i, j] -= h
            up = loss_oracle(Zp, Y, R, pi, p_hat, layout, N)
            dn = loss_oracle(Zm, Y, R, pi, p_hat, layout, N)
            G[i, j] = float((up - dn) / (2 * LD(h)))
    return G


def build_missingness_dataset(zeta, strata, X, rng):
    """Dataset whose R follows the per (column, stratum) logistic law."""
    from scipy.special import expit

    n = X.shape[0]
    H, L, _ = zeta.shape
    eta = np.empty((n, L))
    for h in range(1, H + 1):
        rows = strata == h
        F = np.column_stack([np.ones(rows.sum()), X[rows]])
        eta[rows] = F @ zeta[h - 1].T
    R = rng.random((n, L)) < expit(eta)
    R[:, R.sum(axis=0) == 0] = True  # keep columns nonempty
    Y = np.where(R, 0.0, np.nan)
    return smc.MixedDataset(Y=Y, R=R, X=X, strata=strata,
                            pi=np.full(n, 0.5),
                            layout=smc.CategoryLayout.of(("gaussian", L))), expit(eta)


def trace_is_monotone(result) -> bool:
    """Exact nonincrease, plus strict decrease exactly on accepted steps."""
    t = result.objective_trace
    if np.any(np.diff(t) > 0):
        return False
    for k, acc in enumerate(result.accepted, start=1):
        if acc and not t[k] < t[k - 1]:
            return False
        if not acc and t[k] != t[k - 1]:
            return False
    return True
