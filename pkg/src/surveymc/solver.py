"""Stage two: weighted low-rank completion of the natural-parameter matrix.

The estimate minimizes

    (1/(N L)) sum_i (1/pi_i) sum_j (r_ij / p_ij) (-y_ij z_ij + g_j(z_ij))
        + tau * || [X, Z] ||_*

over Z, where g_j is the cumulant of column j's family, pi are inclusion
probabilities, and p_ij are fitted response probabilities.  The loop is an
accelerated proximal gradient method: momentum blend, gradient step, singular
value thresholding of the covariate-augmented matrix, and a descent guard
that only accepts a candidate when it lowers the objective, which makes the
recorded objective trace nonincreasing by construction.

Two gradient-step modes are supported.  ``standard_prox`` (default) takes
T = Q - eta * grad with an automatic, backtracked step size; ``as_printed``
takes T = Q - (1/tau) * svt(grad, tau) verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import MixedDataset
from .errors import FoldError, InvalidInput, NumericalFailure, ShapeError
from .families import CategoryLayout, mean_from_natural
from .linalg import concat_cols, nuclear_norm, rank1_approx, svt
from .response_model import ResponseProbModel

__all__ = [
    "SolverConfig",
    "SolverState",
    "CompletionResult",
    "TuneResult",
    "weighted_loss",
    "objective",
    "gradient",
    "fit_completion",
    "tune_tau",
    "DEFAULT_TAU_GRID",
]

# tau grid used by the tuning protocols: 2^-15 .. 2^-1, then 1 and 2
DEFAULT_TAU_GRID = tuple(2.0**k for k in range(-15, 0)) + (1.0, 2.0)

# sentinel: "use dataset.X" (None means no covariate augmentation)
_DATASET_X = object()


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    step_size None means automatic: start from the inverse curvature bound
    and halve while the local quadratic majorization is violated.  An
    explicit positive step_size is used as given (no backtracking).
    population_size None falls back to the dataset value or the
    Horvitz-Thompson estimate.  early_stop_tol None runs all iterations.
    """

    tau: float
    iterations: int = 200
    step_mode: str = "standard_prox"
    step_size: float | None = None
    population_size: float | None = None
    clamp: float = 30.0
    early_stop_tol: float | None = None
    early_stop_patience: int = 10
    max_backtracks: int = 60

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise InvalidInput(f"tau must be positive, got {self.tau}")
        if self.iterations < 1:
            raise InvalidInput(f"iterations must be >= 1, got {self.iterations}")
        if self.step_mode not in ("standard_prox", "as_printed"):
            raise InvalidInput(f"unknown step_mode {self.step_mode!r}")
        if self.step_size is not None and not self.step_size > 0:
            raise InvalidInput(f"step_size must be positive, got {self.step_size}")
        if not self.clamp > 0:
            raise InvalidInput(f"clamp must be positive, got {self.clamp}")


@dataclass
class SolverState:
    """Loop state after iteration k (k = 0 is the initialization)."""

    k: int
    Z1: np.ndarray
    Z2: np.ndarray
    objective: float


@dataclass(frozen=True)
class CompletionResult:
    """Fitted natural-parameter matrix plus the per-iteration record."""

    Z_hat: np.ndarray
    objective_trace: np.ndarray
    accepted: np.ndarray
    iterations_run: int
    config: SolverConfig
    diagnostics: dict


@dataclass(frozen=True)
class TuneResult:
    best_tau: float
    taus: tuple[float, ...]
    scores: tuple[float, ...]


class _Problem:
    """Precomputed pieces shared by loss/gradient/objective evaluations."""

    def __init__(self, dataset: MixedDataset, probs: ResponseProbModel,
                 N: float, tau: float, clamp: float, X):
        p_hat = np.asarray(probs.p_hat, dtype=np.float64)
        if p_hat.shape != dataset.Y.shape:
            raise ShapeError(f"p_hat shape {p_hat.shape} differs from Y shape {dataset.Y.shape}")
        if np.any(p_hat <= 0) or np.any(p_hat > 1):
            raise InvalidInput("p_hat entries must lie in (0, 1]")
        self.layout = dataset.layout
        self.R = dataset.R
        self.Yf = np.where(dataset.R, np.nan_to_num(dataset.Y), 0.0)
        n, L = dataset.Y.shape
        self.W = np.where(dataset.R, 1.0 / (N * L * dataset.pi[:, None] * p_hat), 0.0)
        self.tau = tau
        self.clamp = clamp
        if X is _DATASET_X:
            X = dataset.X
        self.X = None if X is None else np.asarray(X, dtype=np.float64)
        self.slices = self.layout.slices()
        self.boxes = [fam.domain_box(clamp) for fam, _ in self.slices]

    def project(self, Z: np.ndarray) -> tuple[np.ndarray, int]:
        """Clip entries into the per-family clamp box; count entries moved."""
        out = Z.copy()
        moved = 0
        for (lo, hi), (_, sl) in zip(self.boxes, self.slices):
            blk = out[:, sl]
            clipped = np.clip(blk, lo, hi)
            moved += int(np.count_nonzero(clipped != blk))
            out[:, sl] = clipped
        return out, moved

    def loss(self, Z: np.ndarray) -> float:
        total = 0.0
        for (fam, sl) in self.slices:
            zb = Z[:, sl]
            total += float(np.sum(self.W[:, sl] * (-self.Yf[:, sl] * zb + fam.g(zb))))
        return total

    def grad(self, Z: np.ndarray) -> np.ndarray:
        G = np.empty_like(Z)
        for (fam, sl) in self.slices:
            G[:, sl] = self.W[:, sl] * (fam.g_prime(Z[:, sl]) - self.Yf[:, sl])
        return G

    def penalty(self, Z: np.ndarray) -> float:
        M = Z if self.X is None else concat_cols(self.X, Z)
        return self.tau * nuclear_norm(M)

    def objective(self, Z: np.ndarray) -> float:
        return self.loss(Z) + self.penalty(Z)

    def prox_step(self, T: np.ndarray, thresh: float) -> np.ndarray:
        """Threshold [X, T] and keep the trailing response columns.

        thresh is eta * tau in standard_prox mode (proximal scaling) and tau
        in as_printed mode.
        """
        M = T if self.X is None else concat_cols(self.X, T)
        shrunk = svt(M, thresh)
        return shrunk if self.X is None else shrunk[:, self.X.shape[1]:]

    def curvature_bound(self, beta: float) -> float:
        """Curvature scale for the automatic step size: the largest
        W_max * sup g'' over [-beta, beta] intersected with each domain.

        The exponential family's g'' blows up like 1/z^2 at the domain edge;
        iterates can only touch that edge transiently (the gradient repels
        them), so its block is scored on the interior [-beta, -1/beta] and
        edge visits are left to the backtracking line search.
        """
        bound = 0.0
        for (lo, hi), (fam, sl) in zip(self.boxes, self.slices):
            lo, hi = max(lo, -beta), min(hi, beta)
            if fam.kind == "exponential":
                hi = min(hi, -1.0 / max(beta, 1.0))
            w_max = float(self.W[:, sl].max())
            bound = max(bound, w_max * fam.curvature_sup(lo, hi))
        return bound


def weighted_loss(Z, dataset: MixedDataset, probs: ResponseProbModel,
                  N: float | None = None) -> float:
    """Inverse-probability-weighted quasi-likelihood loss, normalized by N*L."""
    Z = _check_Z(Z, dataset)
    N = dataset.resolve_population_size(N)
    prob = _Problem(dataset, probs, N, tau=1.0, clamp=np.inf, X=None)
    return prob.loss(Z)


def gradient(Z, dataset: MixedDataset, probs: ResponseProbModel,
             N: float | None = None) -> np.ndarray:
    """Entrywise gradient of weighted_loss; exactly zero at missing entries."""
    Z = _check_Z(Z, dataset)
    N = dataset.resolve_population_size(N)
    prob = _Problem(dataset, probs, N, tau=1.0, clamp=np.inf, X=None)
    return prob.grad(Z)


def objective(Z, dataset: MixedDataset, probs: ResponseProbModel,
              config: SolverConfig, X=_DATASET_X) -> float:
    """weighted_loss plus tau times the nuclear norm of [X, Z]."""
    Z = _check_Z(Z, dataset)
    N = dataset.resolve_population_size(config.population_size)
    prob = _Problem(dataset, probs, N, tau=config.tau, clamp=config.clamp, X=X)
    return prob.objective(Z)


def _check_Z(Z, dataset: MixedDataset) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape != dataset.Y.shape:
        raise ShapeError(f"Z shape {Z.shape} differs from Y shape {dataset.Y.shape}")
    if not np.isfinite(Z).all():
        raise InvalidInput("Z contains non-finite entries")
    return Z


def fit_completion(dataset: MixedDataset, probs: ResponseProbModel,
                   config: SolverConfig, X=_DATASET_X) -> CompletionResult:
    """Run the descent-guarded accelerated proximal loop.

    X defaults to the dataset covariates; pass X=None to drop the covariate
    augmentation (the penalty becomes the plain nuclear norm of Z).
    """
    N = dataset.resolve_population_size(config.population_size)
    prob = _Problem(dataset, probs, N, config.tau, config.clamp, X)

    Z1, n_proj = prob.project(rank1_approx(np.where(dataset.R, np.nan_to_num(dataset.Y), 0.0)))
    Z2 = Z1.copy()
    obj1 = prob.objective(Z1)
    if not np.isfinite(obj1):
        raise NumericalFailure(f"objective non-finite at initialization: {obj1}")

    trace = [obj1]
    accepted = []
    n_backtracks = 0
    eta = config.step_size
    ceiling = None
    if eta is None and config.step_mode == "standard_prox":
        beta0 = min(config.clamp, max(1.0, float(np.max(np.abs(Z1)))))
        ceiling = 1.0 / prob.curvature_bound(beta0)
        eta = ceiling
    backtrack = config.step_size is None and config.step_mode == "standard_prox"

    state = SolverState(k=0, Z1=Z1, Z2=Z2, objective=obj1)
    stall = 0
    for k in range(1, config.iterations + 1):
        theta = 2.0 / (k + 1.0)
        Q, moved = prob.project((1.0 - theta) * state.Z1 + theta * state.Z2)
        n_proj += moved
        G = prob.grad(Q)

        if config.step_mode == "as_printed":
            T = Q - (1.0 / config.tau) * svt(G, config.tau)
            cand, moved = prob.project(prob.prox_step(T, config.tau))
            n_proj += moved
            cand_loss = prob.loss(cand)
        else:
            if backtrack:
                # recover from transient curvature spikes, never past the ceiling
                eta = min(ceiling, 2.0 * eta)
            loss_Q = prob.loss(Q)
            tries = 0
            while True:
                cand, moved = prob.project(prob.prox_step(Q - eta * G, eta * config.tau))
                diff = cand - Q
                cand_loss = prob.loss(cand)
                majorant = (loss_Q + float(np.vdot(G, diff))
                            + float(np.vdot(diff, diff)) / (2.0 * eta))
                if not backtrack or cand_loss <= majorant + 1e-12 * max(1.0, abs(loss_Q)):
                    n_proj += moved
                    break
                if tries >= config.max_backtracks:
                    raise NumericalFailure("step size collapsed during backtracking")
                eta *= 0.5
                tries += 1
            n_backtracks += tries

        cand_obj = cand_loss + prob.penalty(cand)
        if not np.isfinite(cand_obj):
            err = NumericalFailure(f"objective non-finite at iteration {k}")
            err.trace = np.asarray(trace)
            raise err

        # momentum extrapolates through the candidate whether or not accepted
        Z2 = state.Z1 + (cand - state.Z1) / theta
        if cand_obj < state.objective:
            state = SolverState(k=k, Z1=cand, Z2=Z2, objective=cand_obj)
            accepted.append(True)
        else:
            state = SolverState(k=k, Z1=state.Z1, Z2=Z2, objective=state.objective)
            accepted.append(False)
        trace.append(state.objective)

        if config.early_stop_tol is not None and k >= 2:
            rel = abs(trace[-2] - trace[-1]) / max(1.0, abs(trace[-2]))
            stall = stall + 1 if rel <= config.early_stop_tol else 0
            if stall >= config.early_stop_patience:
                break

    Z_hat = state.Z1
    final_concat = Z_hat if prob.X is None else concat_cols(prob.X, Z_hat)
    svals = np.linalg.svd(final_concat, compute_uv=False)
    diagnostics = {
        "final_nuclear_norm": float(np.sum(svals)),
        "rank_estimate": int(np.count_nonzero(svals > 1e-8 * max(svals[0], 1e-300))),
        "domain_projections": n_proj,
        "backtracks": n_backtracks,
        "accepted_steps": int(np.count_nonzero(accepted)),
        "step_size_final": float(eta) if eta is not None else None,
        "population_size": N,
    }
    return CompletionResult(Z_hat=Z_hat, objective_trace=np.asarray(trace),
                            accepted=np.asarray(accepted, dtype=bool),
                            iterations_run=state.k, config=config,
                            diagnostics=diagnostics)


def tune_tau(dataset: MixedDataset, probs: ResponseProbModel, X=_DATASET_X,
             grid=DEFAULT_TAU_GRID, protocol: dict | None = None,
             base_config: SolverConfig | None = None) -> TuneResult:
    """Pick tau from a grid; ties break toward the larger value.

    protocol {"kind": "k_fold", "k": 5, "seed": 0} scores each tau by the
    squared distance between mean-scale imputations and held-out observed
    responses, summed over folds.  protocol {"kind": "validation",
    "truth_Z": Z} fits on the full dataset and scores the relative
    Frobenius error against the supplied reference (simulation use).
    """
    taus = tuple(sorted(set(float(t) for t in grid)))
    if not taus or any(not (np.isfinite(t) and t > 0) for t in taus):
        raise InvalidInput("grid must contain positive finite tau values")
    protocol = protocol or {"kind": "k_fold", "k": 5, "seed": 0}
    base = base_config or SolverConfig(tau=taus[0])

    if protocol["kind"] == "validation":
        truth = np.asarray(protocol["truth_Z"], dtype=np.float64)
        denom = float(np.linalg.norm(truth))
        if denom == 0.0:
            raise InvalidInput("validation reference matrix is identically zero")
        scores = []
        for t in taus:
            res = fit_completion(dataset, probs, replace(base, tau=t), X)
            scores.append(float(np.linalg.norm(res.Z_hat - truth)) / denom)
    elif protocol["kind"] == "k_fold":
        k = int(protocol.get("k", 5))
        if k < 2:
            raise InvalidInput(f"k_fold needs k >= 2, got {k}")
        obs = np.argwhere(dataset.R)
        if obs.shape[0] < k:
            raise FoldError(f"only {obs.shape[0]} observed entries for {k} folds")
        order = np.random.default_rng(protocol.get("seed", 0)).permutation(obs.shape[0])
        folds = np.array_split(order, k)
        if any(f.size == 0 for f in folds):
            raise FoldError("empty cross-validation fold")
        scores = [0.0 for _ in taus]
        for fold in folds:
            rows, cols = obs[fold, 0], obs[fold, 1]
            keep = dataset.R.copy()
            keep[rows, cols] = False
            ds_f = dataset.with_mask(keep)
            held_y = dataset.Y[rows, cols]
            for i, t in enumerate(taus):
                res = fit_completion(ds_f, probs, replace(base, tau=t), X)
                imput = mean_from_natural(res.Z_hat, dataset.layout)[rows, cols]
                scores[i] += float(np.sum((imput - held_y) ** 2))
    else:
        raise InvalidInput(f"unknown tuning protocol {protocol!r}")

    best_i = 0
    for i in range(1, len(taus)):
        if scores[i] <= scores[best_i]:
            best_i = i
    return TuneResult(best_tau=taus[best_i], taus=taus, scores=tuple(scores))
