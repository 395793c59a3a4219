"""Baseline ladder: trivial predictors, Level-k oracles, Unfair/Unaware
learners and exponentiated-gradient reduction for demographic parity."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from . import numcore as nc
from .casebench import LEVEL_PREFIXES, applicable
from .rng import stream

log = logging.getLogger(__name__)

KINDS = ("unfair", "unaware", "constant", "random", "level1", "level2", "level3", "egr")
MAX_COEF_NORM = 50.0


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# -- logistic regression ---------------------------------------------------

@dataclass
class LogisticModel:
    mean: np.ndarray
    scale: np.ndarray
    coef: np.ndarray
    intercept: float
    separated: bool = False

    def decision(self, X):
        X = np.asarray(X, dtype=np.float64).reshape(len(X), -1)
        return ((X - self.mean) / self.scale) @ self.coef + self.intercept

    def predict_proba(self, X):
        return _sigmoid(self.decision(X))


def logistic_fit(features, labels, sample_weights=None, l2=1e-4):
    """Weighted L2-regularized logistic regression on standardized features.

    The objective is ``sum(w * bce) / sum(w) + l2 * |coef|^2`` with the
    gradient taken by reverse-mode autodiff and minimized by L-BFGS.
    Perfectly separated training data are flagged; coefficient norms are
    clipped at 50 so a weakly regularized separable fit stays finite.
    """
    X = np.asarray(features, dtype=np.float64)
    X = X.reshape(len(X), -1)
    y = np.asarray(labels, dtype=np.float64)
    w = np.ones(len(y)) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    if len(X) < 2 or len(y) != len(X) or len(w) != len(X):
        raise ValueError("logistic_fit needs >= 2 rows and matching labels/weights")
    if not (w[y == 1].sum() > 0 and w[y == 0].sum() > 0):
        raise ValueError("both classes must carry positive weight")
    wn = w / w.sum()
    mean = wn @ X
    scale = np.sqrt(wn @ (X - mean) ** 2)
    scale[scale <= 1e-12] = 1.0
    Z = (X - mean) / scale
    d = Z.shape[1]

    def objective(theta):
        t = nc.Tensor(theta, requires_grad=True)
        logits = nc.matmul(Z, t[:d]) + t[d] if d else t[d] * np.ones(len(y))
        loss = nc.bce_with_logits(logits, y, w)
        if d:
            loss = loss + l2 * nc.tsum(nc.square(t[:d]))
        nc.backward(loss)
        return float(loss.data), t.grad

    base = np.clip(wn @ y, 1e-6, 1 - 1e-6)
    theta0 = np.zeros(d + 1)
    theta0[d] = np.log(base / (1 - base))
    res = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                   options={"gtol": 1e-11, "ftol": 1e-15, "maxiter": 5000})
    coef, intercept = res.x[:d], float(res.x[d])
    norm = float(np.linalg.norm(coef))
    if norm > MAX_COEF_NORM:
        coef = coef * (MAX_COEF_NORM / norm)
    margin = (2 * y - 1) * (Z @ coef + intercept)
    separated = bool(np.all(margin[w > 0] > 0))
    if separated:
        log.debug("logistic fit separates the training data (coef norm %.1f)", norm)
    return LogisticModel(mean, scale, coef, intercept, separated)


# -- exponentiated-gradient reduction -------------------------------------

@dataclass
class Decision:
    """Deterministic member: thresholded logistic model, or a constant."""
    model: LogisticModel | None = None
    constant: int | None = None

    def __call__(self, X):
        if self.model is None:
            return np.full(len(X), float(self.constant))
        return (self.model.decision(X) > 0).astype(np.float64)


@dataclass
class RandomizedClassifier:
    members: list                      # [(weight, Decision)]
    converged: bool = False
    gap: float = float("inf")
    iterations: int = 0
    seeds: list = field(default_factory=list)

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64).reshape(len(X), -1)
        return sum(w * h(X) for w, h in self.members)

    @property
    def weights(self):
        return np.array([w for w, _ in self.members])


def _signed_dp(decisions, groups):
    return decisions[groups == 1].mean() - decisions[groups == 0].mean()


def multiplier_update(theta, violations, eta):
    """One exponentiated-gradient step on the multiplier logits."""
    return theta + eta * np.asarray(violations, dtype=np.float64)


def multipliers(theta, bound):
    e = np.exp(theta - max(0.0, theta.max()))
    return bound * e / (np.exp(-max(0.0, theta.max())) + e.sum())


def _mixture_lp(errs, gammas, eps, bound):
    """Best mixture of the collected classifiers and its multipliers.

    Solves ``min_q err.q + B*s`` subject to ``+-gamma.q - eps <= s``; the
    duals of the two constraints are the matching multipliers.
    """
    k = len(errs)
    c = np.append(errs, bound)
    g = np.asarray(gammas)
    a_ub = np.vstack([np.append(g, -1.0), np.append(-g, -1.0)])
    a_eq = np.append(np.ones(k), 0.0)[None, :]
    res = linprog(c, A_ub=a_ub, b_ub=[eps, eps], A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (k + 1), method="highs")
    if res.status != 0:
        return None, None
    q = np.clip(res.x[:k], 0.0, None)
    return q / q.sum(), np.clip(-res.ineqlin.marginals, 0.0, bound)


def egr_fit(features, labels, groups, eps=0.05, T=50, bound=100.0, eta=0.5, seed=0):
    """Reduce DP-constrained classification to a sequence of weighted fits.

    Constraints are ``gap <= eps`` and ``-gap <= eps`` on the signed
    demographic-parity gap. Multipliers follow exponentiated-gradient
    steps (``eta / bound`` on the logits) driven by the violations of the
    running average of best responses. Each round the candidate mixture is
    either that uniform average or the linear-programming optimum over the
    classifiers seen so far, whichever has the smaller empirical duality
    gap; iteration stops once that gap is below ``eps / 2``.
    """
    X = np.asarray(features, dtype=np.float64).reshape(len(labels), -1)
    y = np.asarray(labels, dtype=np.float64)
    g = np.asarray(groups)
    n = len(y)
    n1, n0 = int((g == 1).sum()), int((g == 0).sum())
    if n1 == 0 or n0 == 0 or y.min() == y.max():
        raise ValueError("EGR needs both groups and both classes present")
    group_term = np.where(g == 1, 1.0 / n1, -1.0 / n0)
    corners = (np.zeros(2), np.array([bound, 0.0]), np.array([0.0, bound]))

    def best_response(lam):
        mu = lam[0] - lam[1]
        cost = (1.0 - 2.0 * y) / n + mu * group_term     # cost(h=1) - cost(h=0)
        target = (cost < 0).astype(np.float64)
        weight = np.abs(cost)
        if target.min() == target.max() or weight[target == 1].sum() == 0 or weight[target == 0].sum() == 0:
            h = Decision(constant=int(cost.sum() < 0))
        else:
            h = Decision(model=logistic_fit(X, target, weight))
        dec = h(X)
        return h, float(np.mean(dec != y)), float(_signed_dp(dec, g))

    def lagrangian(err, gamma, lam):
        return err + lam[0] * (gamma - eps) + lam[1] * (-gamma - eps)

    def duality_gap(q, lam):
        err_q, gamma_q = float(q @ errs), float(q @ gammas)
        l_q = lagrangian(err_q, gamma_q, lam)
        l_high = max(lagrangian(err_q, gamma_q, cand) for cand in corners)
        _, e, gm = best_response(lam)
        return max(l_high - l_q, l_q - lagrangian(e, gm, lam), 0.0)

    theta = np.zeros(2)
    members, errs, gammas, lam_hist, seeds = [], np.zeros(0), np.zeros(0), [], []
    best_q, gap = None, float("inf")
    for t in range(T):
        seeds.append(int(stream(seed, "egr", t).integers(2**31)))
        lam = multipliers(theta, bound)
        h, e, gm = best_response(lam)
        members.append(h)
        errs, gammas = np.append(errs, e), np.append(gammas, gm)
        lam_hist.append(lam)

        k = len(members)
        q_avg = np.full(k, 1.0 / k)
        best_q, gap = q_avg, duality_gap(q_avg, np.mean(lam_hist, axis=0))
        q_lp, lam_lp = _mixture_lp(errs, gammas, eps, bound)
        if q_lp is not None:
            gap_lp = duality_gap(q_lp, lam_lp)
            if gap_lp < gap:
                best_q, gap = q_lp, gap_lp
        if gap < eps / 2:
            break
        gamma_avg = float(q_avg @ gammas)
        theta = multiplier_update(theta, [gamma_avg - eps, -gamma_avg - eps], eta / bound)

    keep = best_q > 1e-9
    q = best_q[keep] / best_q[keep].sum()
    chosen = [m for m, k_ in zip(members, keep) if k_]
    return RandomizedClassifier(members=list(zip(q.tolist(), chosen)), converged=gap < eps / 2,
                                gap=gap, iterations=len(members),
                                seeds=[s_ for s_, k_ in zip(seeds, keep) if k_])


# -- baseline ladder ------------------------------------------------------

class NotApplicable(Exception):
    """The baseline has no valid inputs on this dataset."""


@dataclass
class BaselineSpec:
    kind: str
    base_learner: str = "logistic"      # or "pfn" (needs checkpoint)
    checkpoint: object = None
    egr_eps: float = 0.05
    egr_iterations: int = 50
    egr_bound: float = 100.0
    egr_eta: float = 0.5

    @property
    def method_id(self):
        return self.kind if self.base_learner == "logistic" or self.kind in ("constant", "random", "egr") \
            else f"{self.kind}+pfn"


@dataclass
class EvalTask:
    """Train split plus test-split views of the factual data and its twins.

    ``oracle_*`` hold the Level-k columns, which are untouched by any flip.
    """
    dataset_id: str
    case: str
    train: object                 # Dataset
    test: dict                    # role -> Dataset (factual, counterfactual, direct_twin, indirect_twin)
    oracle_train: dict = field(default_factory=dict)
    oracle_test: dict = field(default_factory=dict)
    seed: int = 0


def level_inputs(level, case, oracle):
    if not applicable(level, case):
        raise NotApplicable(f"{level} does not apply to case {case}")
    names = [k for k in oracle if k.startswith(LEVEL_PREFIXES[level])]
    if not names:
        raise NotApplicable(f"{level}: no oracle columns for case {case}")
    return names


def _pfn_scores(checkpoint, A_train, X_train, y_train, queries):
    from .model import predict
    return {role: predict(checkpoint, (A_train, X_train, y_train), (A, X)) for role, (A, X) in queries.items()}


def fit_predict(spec, task):
    """Scores on every test view of ``task`` (role -> array).

    Raises :class:`NotApplicable` for a Level-k baseline without oracle
    inputs on this case.
    """
    kind = spec.kind
    train = task.train
    roles = task.test
    if kind == "constant":
        rate = float(train.y.mean())
        return {r: np.full(ds.n, rate) for r, ds in roles.items()}
    if kind == "random":
        return {r: stream(task.seed, task.dataset_id, "random", r).uniform(size=ds.n)
                for r, ds in roles.items()}
    if kind == "egr":
        clf = egr_fit(np.column_stack([train.A, train.X]), train.y, train.A,
                      eps=spec.egr_eps, T=spec.egr_iterations, bound=spec.egr_bound,
                      eta=spec.egr_eta, seed=task.seed)
        return {r: clf.predict_proba(np.column_stack([ds.A, ds.X])) for r, ds in roles.items()}

    if kind == "unfair":
        feats = lambda ds, _r: np.column_stack([ds.A, ds.X])
        protected = lambda ds: ds.A
    elif kind == "unaware":
        feats = lambda ds, _r: ds.X
        protected = lambda ds: np.zeros(ds.n)
    elif kind in ("level1", "level2", "level3"):
        names = level_inputs(kind, task.case, task.oracle_train)
        feats = lambda ds, r: (np.column_stack([task.oracle_train[k] for k in names]) if r is None
                               else np.column_stack([task.oracle_test[k] for k in names]))
        protected = lambda ds: np.zeros(ds.n)
    else:
        raise ValueError(f"unknown baseline kind {kind!r}")

    X_train = feats(train, None)
    if spec.base_learner == "pfn":
        if spec.checkpoint is None:
            raise ValueError("pfn base learner needs a checkpoint")
        queries = {r: (protected(ds), feats(ds, r) if kind != "unfair" else ds.X) for r, ds in roles.items()}
        X_ctx = feats(train, None) if kind != "unfair" else train.X
        return _pfn_scores(spec.checkpoint, protected(train), X_ctx, train.y, queries)
    model = logistic_fit(X_train, train.y)
    return {r: model.predict_proba(feats(ds, r)) for r, ds in roles.items()}
