"""Class-structured Gaussian mixture over flattened trajectories.

Each component is labeled by a (full crossing word, sub-mode index) pair and
lives in 2T dimensions with layout [x0, y0, ..., x_{T-1}, y_{T-1}].  Fitting
is per-class sample moments (seeded k-means sub-clustering when more than one
component per class is requested).  Measurement conditioning is standard
Gaussian conditioning with isotropic observation noise; online detect/miss
updates additionally scale weights by the detection model and the current
class belief.  Components are never pruned: weights are floored at a tiny
value so labels stay aligned for evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import geometry
from .errors import (
    AllWeightsZero,
    InsufficientClassMembers,
    NumericalFailure,
)
from .vomp import HomotopicBelief, VompModel

WEIGHT_FLOOR = 1e-12
DEFAULT_JITTER = 1e-6

# Default sensor parameters (config-overridable): detection is near-certain
# within about one body length of the target.
DEFAULT_PEAK = 0.95
DEFAULT_RADIUS = 1.5
DEFAULT_SIGMA_Z = 0.1


@dataclass(frozen=True)
class GmmComponent:
    label: tuple              # (word, sub-mode index)
    weight: float
    mean: np.ndarray          # (2T,)
    cov: np.ndarray           # (2T, 2T)

    @property
    def word(self):
        return self.label[0]

    @property
    def T(self) -> int:
        return len(self.mean) // 2

    def marginal_at_time(self, t: int):
        """2D mean and 2x2 covariance at timestep t."""
        if not 0 <= t < self.T:
            raise IndexError(f"timestep {t} outside [0, {self.T})")
        sl = slice(2 * t, 2 * t + 2)
        return self.mean[sl], self.cov[sl, sl]

    def mean_path(self) -> np.ndarray:
        return self.mean.reshape(-1, 2)


@dataclass(frozen=True)
class HomotopicGmm:
    components: tuple         # of GmmComponent
    T: int

    def __post_init__(self):
        assert all(c.T == self.T for c in self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def labels(self) -> tuple:
        return tuple(c.label for c in self.components)

    @property
    def words(self) -> tuple:
        return tuple(sorted({c.word for c in self.components},
                            key=lambda w: (len(w), w)))

    def argmax_component(self) -> GmmComponent:
        idx = int(np.argmax(self.weights))
        return self.components[idx]

    def with_weights(self, weights) -> "HomotopicGmm":
        comps = tuple(
            GmmComponent(c.label, float(w), c.mean, c.cov)
            for c, w in zip(self.components, weights))
        return HomotopicGmm(comps, self.T)


@dataclass(frozen=True)
class MeasurementSet:
    """Timestep-indexed position observations with isotropic noise scale."""

    entries: tuple            # of (t, z) with strictly increasing int t
    sigma_z: float = DEFAULT_SIGMA_Z

    def __post_init__(self):
        ts = [t for t, _ in self.entries]
        assert ts == sorted(ts) and len(set(ts)) == len(ts), \
            "timesteps must be strictly increasing"

    def __len__(self):
        return len(self.entries)


def _normalize(weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    if total <= 0.0 or not np.isfinite(total):
        raise AllWeightsZero("mixture weights sum to zero")
    w = weights / total
    w = np.maximum(w, WEIGHT_FLOOR)
    return w / w.sum()


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    if np.all(np.isneginf(logw)):
        raise AllWeightsZero("all log-weights are -inf")
    w = np.exp(logw - logsumexp(logw))
    w = np.maximum(w, WEIGHT_FLOOR)
    return w / w.sum()


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _kmeans(X: np.ndarray, k: int, seed: int, restarts: int = 10,
            max_iter: int = 100) -> np.ndarray:
    """Seeded Lloyd's k-means; returns assignment of rows to 0..k-1."""
    rng = np.random.default_rng(seed)
    best_assign, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = X[rng.choice(len(X), size=k, replace=False)].copy()
        assign = np.zeros(len(X), dtype=int)
        for _ in range(max_iter):
            d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_assign = d2.argmin(axis=1)
            for j in range(k):
                members = X[new_assign == j]
                if len(members) == 0:
                    # reseed empty cluster at the point farthest from its center
                    far = int(d2.min(axis=1).argmax())
                    centers[j] = X[far]
                    new_assign[far] = j
                else:
                    centers[j] = members.mean(axis=0)
            if np.array_equal(new_assign, assign):
                break
            assign = new_assign
        inertia = float(((X - centers[assign]) ** 2).sum())
        if inertia < best_inertia:
            best_inertia, best_assign = inertia, assign.copy()
    return best_assign


def fit(train, n_components: int = 1, jitter: float = DEFAULT_JITTER,
        seed: int = 0) -> HomotopicGmm:
    """Fit one Gaussian per (class, sub-mode) from a clustered Dataset."""
    if not train.classes:
        raise ValueError("dataset has no class map; run cluster_by_signature first")
    total = len(train.trajectories)
    comps = []
    for word in sorted(train.classes, key=lambda w: (len(w), w)):
        ids = sorted(train.classes[word])
        if len(ids) < n_components + 1:
            raise InsufficientClassMembers(
                f"class {word}: {len(ids)} members < {n_components + 1}")
        X = np.stack([train.by_id(i).flat() for i in ids])
        if n_components == 1:
            assign = np.zeros(len(X), dtype=int)
        else:
            assign = _kmeans(X, n_components, seed)
        for c in range(n_components):
            members = X[assign == c]
            if len(members) == 0:
                raise InsufficientClassMembers(
                    f"class {word}: sub-mode {c} is empty")
            mean = members.mean(axis=0)
            if len(members) > 1:
                cov = np.cov(members, rowvar=False)
            else:
                cov = np.zeros((X.shape[1], X.shape[1]))
            cov = cov + jitter * np.eye(X.shape[1])
            comps.append(GmmComponent((word, c), len(members) / total, mean, cov))
    T = comps[0].T
    return HomotopicGmm(tuple(comps), T)


# ---------------------------------------------------------------------------
# Conditioning
# ---------------------------------------------------------------------------

def _obs_indices(entries) -> np.ndarray:
    idx = []
    for t, _ in entries:
        idx.extend([2 * t, 2 * t + 1])
    return np.asarray(idx, dtype=int)


def _chol_logpdf(resid: np.ndarray, S: np.ndarray) -> tuple:
    """Cholesky of S and the Gaussian log-density of the residual."""
    try:
        Lc = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        try:
            Lc = np.linalg.cholesky(S + DEFAULT_JITTER * np.eye(len(S)))
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"innovation matrix not SPD: {exc}")
    alpha = np.linalg.solve(Lc, resid)
    logdet = 2.0 * np.log(np.diag(Lc)).sum()
    loglik = -0.5 * (alpha @ alpha + logdet + len(resid) * np.log(2.0 * np.pi))
    return Lc, float(loglik)


def _condition_component(comp: GmmComponent, entries, sigma_z: float):
    """Posterior (mean, cov, observation log-likelihood) for one component."""
    obs = _obs_indices(entries)
    z = np.concatenate([np.asarray(p, dtype=float) for _, p in entries])
    S = comp.cov[np.ix_(obs, obs)] + sigma_z ** 2 * np.eye(len(obs))
    resid = z - comp.mean[obs]
    Lc, loglik = _chol_logpdf(resid, S)
    C = comp.cov[:, obs]
    K = np.linalg.solve(S, C.T).T           # C S^{-1}
    mean = comp.mean + K @ resid
    cov = comp.cov - K @ C.T
    cov = 0.5 * (cov + cov.T)
    return mean, cov, loglik


def condition(gmm: HomotopicGmm, measurements: MeasurementSet) -> HomotopicGmm:
    """Condition every component on the observed coordinate blocks jointly.

    Weights follow the observation likelihood under each component
    (renormalized); zero measurements return the input unchanged.
    """
    if len(measurements) == 0:
        return gmm
    posts, logw = [], []
    for comp in gmm.components:
        mean, cov, loglik = _condition_component(
            comp, measurements.entries, measurements.sigma_z)
        posts.append((mean, cov))
        logw.append(np.log(max(comp.weight, WEIGHT_FLOOR)) + loglik)
    weights = _normalize_log(np.asarray(logw))
    comps = tuple(
        GmmComponent(c.label, float(w), mean, cov)
        for c, w, (mean, cov) in zip(gmm.components, weights, posts))
    return HomotopicGmm(comps, gmm.T)


def scale_by_belief(gmm: HomotopicGmm, belief: HomotopicBelief) -> HomotopicGmm:
    """Multiply component weights by the belief of their class, renormalized."""
    raw = np.array([c.weight * belief.prob_of(c.word) for c in gmm.components])
    return gmm.with_weights(_normalize(raw))


# ---------------------------------------------------------------------------
# Detection model
# ---------------------------------------------------------------------------

def detection_prob(comp: GmmComponent, x, t: int,
                   radius: float = DEFAULT_RADIUS,
                   peak: float = DEFAULT_PEAK) -> float:
    """Detection probability at sensing point x, marginalized over the
    component's position at timestep t.

    Closed form of E_y[peak * exp(-|x - y|^2 / (2 r^2))] for Gaussian y.
    """
    mu, cov = comp.marginal_at_time(t)
    theta = np.asarray(x, dtype=float) - mu
    M = radius ** 2 * np.eye(2) + cov
    beta = peak / np.sqrt(np.linalg.det(cov / radius ** 2 + np.eye(2)))
    quad = float(theta @ np.linalg.solve(M, theta))
    return float(beta * np.exp(-0.5 * quad))


def detection_prob_grid(comp: GmmComponent, points: np.ndarray, t: int,
                        radius: float = DEFAULT_RADIUS,
                        peak: float = DEFAULT_PEAK) -> np.ndarray:
    """Vectorized `detection_prob` over an (N, 2) array of sensing points."""
    mu, cov = comp.marginal_at_time(t)
    theta = np.asarray(points, dtype=float) - mu[None, :]
    M = radius ** 2 * np.eye(2) + cov
    Minv = np.linalg.inv(M)
    beta = peak / np.sqrt(np.linalg.det(cov / radius ** 2 + np.eye(2)))
    quad = np.einsum("ni,ij,nj->n", theta, Minv, theta)
    return beta * np.exp(-0.5 * quad)


# ---------------------------------------------------------------------------
# Online updates
# ---------------------------------------------------------------------------

def update_detect(gmm: HomotopicGmm, belief: HomotopicBelief, x, t: int, z,
                  sigma_z: float = DEFAULT_SIGMA_Z,
                  radius: float = DEFAULT_RADIUS,
                  peak: float = DEFAULT_PEAK) -> HomotopicGmm:
    """Detection update: scale weights by detection probability, class belief
    and observation likelihood, then condition every component on z."""
    entries = ((t, np.asarray(z, dtype=float)),)
    posts, logw = [], []
    for comp in gmm.components:
        gamma = detection_prob(comp, x, t, radius, peak)
        mean, cov, loglik = _condition_component(comp, entries, sigma_z)
        posts.append((mean, cov))
        logw.append(np.log(max(comp.weight, WEIGHT_FLOOR))
                    + np.log(max(gamma, 1e-300))
                    + np.log(max(belief.prob_of(comp.word), 1e-300))
                    + loglik)
    weights = _normalize_log(np.asarray(logw))
    comps = tuple(
        GmmComponent(c.label, float(w), mean, cov)
        for c, w, (mean, cov) in zip(gmm.components, weights, posts))
    return HomotopicGmm(comps, gmm.T)


def update_miss(gmm: HomotopicGmm, belief: HomotopicBelief, x, t: int,
                radius: float = DEFAULT_RADIUS,
                peak: float = DEFAULT_PEAK) -> HomotopicGmm:
    """Miss update: weights scaled by (1 - detection prob) and class belief;
    means and covariances unchanged."""
    raw = []
    for comp in gmm.components:
        gamma = detection_prob(comp, x, t, radius, peak)
        raw.append(comp.weight * (1.0 - gamma) * belief.prob_of(comp.word))
    return gmm.with_weights(_normalize(np.asarray(raw)))


# ---------------------------------------------------------------------------
# Belief extraction
# ---------------------------------------------------------------------------

def marginalized_belief(gmm: HomotopicGmm, model: VompModel, rays,
                        upto_t: int) -> HomotopicBelief:
    """Belief marginalized over per-component partial words.

    Each component contributes its weight times the belief conditioned on the
    partial word traced by its posterior mean polyline up to `upto_t`.
    """
    acc: dict[tuple, float] = {}
    for comp in gmm.components:
        rho = geometry.partial_h_signature(comp.mean_path()[:upto_t + 1], rays)
        b = model.homotopic_belief(rho)
        for w, p in zip(b.support, b.probs):
            acc[w] = acc.get(w, 0.0) + comp.weight * float(p)
    support = sorted(acc, key=lambda w: (len(w), w))
    probs = np.array([acc[w] for w in support])
    probs = probs / probs.sum()
    return HomotopicBelief(tuple(support), probs)
