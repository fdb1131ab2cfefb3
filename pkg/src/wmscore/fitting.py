"""Least-squares fit of the scoring parameters to human ratings.

The search is a coarse grid over ``(lam, sigma, alpha)`` followed by a
Hooke-Jeeves pattern search inside the same box.  Weighted areas depend only
on ``sigma``, so they are computed once per distinct ``sigma`` and reused for
every ``(lam, alpha)`` pair.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import DegenerateDataError, InvalidParameterError
from .masks import BinaryMask
from .scoring import ScoringParams, axis_coords, distraction_score, gaussian_weights, sigmoid, weighted_area

log = logging.getLogger(__name__)

MAX_RESPONSE = 3


@dataclass(frozen=True)
class ScoredExample:
    label: BinaryMask
    human_score: float

    def __post_init__(self):
        score = float(self.human_score)
        if not 0.0 <= score <= 1.0:
            raise InvalidParameterError(f"human score must be in [0, 1], got {score}")
        object.__setattr__(self, "human_score", score)


@dataclass(frozen=True)
class FitConfig:
    lam_range: Tuple[float, float] = (1.0, 200.0)
    lam_steps: int = 40
    sigma_range: Tuple[float, float] = (0.05, 2.0)
    sigma_steps: int = 40
    alpha_range: Tuple[float, float] = (0.0, 0.5)
    alpha_steps: int = 26
    max_iter: int = 5000
    tol: float = 1e-6
    min_step: float = 1e-10
    restarts: int = 2
    seed: int = 0

    def __post_init__(self):
        for name, (lo, hi), steps in (
            ("lam", self.lam_range, self.lam_steps),
            ("sigma", self.sigma_range, self.sigma_steps),
            ("alpha", self.alpha_range, self.alpha_steps),
        ):
            if not lo <= hi or steps < 1:
                raise InvalidParameterError(f"bad grid for {name}: [{lo}, {hi}] x {steps}")
        if self.lam_range[0] <= 0 or self.sigma_range[0] <= 0:
            raise InvalidParameterError("lambda and sigma ranges must be positive")
        if self.alpha_range[0] < 0 or self.alpha_range[1] > 1:
            raise InvalidParameterError("alpha range must lie within [0, 1]")

    def grid(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.linspace(*self.lam_range, self.lam_steps),
            np.linspace(*self.sigma_range, self.sigma_steps),
            np.linspace(*self.alpha_range, self.alpha_steps),
        )

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.lam_range[0], self.sigma_range[0], self.alpha_range[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.lam_range[1], self.sigma_range[1], self.alpha_range[1]])


@dataclass(frozen=True)
class FitResult:
    params: ScoringParams
    mse: float
    evaluations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "lambda": self.params.lam,
            "sigma": self.params.sigma,
            "alpha": self.params.alpha,
            "mse": self.mse,
            "converged": self.converged,
        }


def normalize_rater_scores(responses: Sequence[int]) -> float:
    """Mean of discrete 0..3 rater responses, rescaled to ``[0, 1]``."""
    responses = list(responses)
    if not responses:
        raise InvalidParameterError("at least one rater response is required")
    for r in responses:
        if isinstance(r, bool) or int(r) != r or not 0 <= r <= MAX_RESPONSE:
            raise InvalidParameterError(f"rater responses must be integers in 0..3, got {r!r}")
    return sum(int(r) for r in responses) / (MAX_RESPONSE * len(responses))


def mse_objective(params: ScoringParams, data: Sequence[ScoredExample]) -> float:
    if not data:
        raise DegenerateDataError("cannot evaluate the objective on an empty dataset")
    err = np.array([distraction_score(ex.label, params) - ex.human_score for ex in data])
    return float(np.mean(err * err))


def _check_fittable(data: Sequence[ScoredExample]) -> None:
    if not data:
        raise DegenerateDataError("empty dataset")
    if len({ex.human_score for ex in data}) < 2:
        raise DegenerateDataError("all human scores are identical; parameters are unconstrained")
    if all(ex.label.is_empty() for ex in data):
        raise DegenerateDataError("every label map is empty; weighted areas carry no information")


class _AreaCache:
    """Weighted areas of every example, memoized per sigma.

    Masks of equal size are stacked into one ``(n, h*w)`` byte matrix; with a
    separable Gaussian the areas become two small matrix products.
    """

    def __init__(self, labels: Sequence[BinaryMask]):
        groups: Dict[Tuple[int, int], List[int]] = {}
        for k, m in enumerate(labels):
            groups.setdefault(m.shape, []).append(k)
        self._groups = [
            (shape, np.array(idx), np.stack([labels[k].values for k in idx]))
            for shape, idx in sorted(groups.items())
        ]
        self._n = len(labels)
        self._cache: Dict[float, np.ndarray] = {}

    def __call__(self, sigma: float) -> np.ndarray:
        g = self._cache.get(sigma)
        if g is not None:
            return g
        g = np.zeros(self._n)
        for (h, w), idx, stack in self._groups:
            gx = np.exp(-axis_coords(w) ** 2 / (2.0 * sigma * sigma))
            gy = np.exp(-axis_coords(h) ** 2 / (2.0 * sigma * sigma))
            # sum_yx L[y,x] gy[y] gx[x], normalized by the total weight
            rows = stack @ gx
            g[idx] = (rows @ gy) / (gy.sum() * gx.sum())
        np.clip(g, 0.0, 1.0, out=g)
        self._cache[sigma] = g
        return g


class _Objective:
    def __init__(self, data: Sequence[ScoredExample]):
        self.areas = _AreaCache([ex.label for ex in data])
        self.y = np.array([ex.human_score for ex in data])
        self.nonempty = np.array([not ex.label.is_empty() for ex in data])
        self.evaluations = 0

    def predictions(self, lam: float, sigma: float, alpha: float) -> np.ndarray:
        g = self.areas(sigma)
        return np.where(self.nonempty, sigmoid(lam * (g - alpha)), 0.0)

    def __call__(self, theta: np.ndarray) -> float:
        self.evaluations += 1
        err = self.predictions(*theta) - self.y
        return float(np.mean(err * err))

    def grid_mse(self, lams: np.ndarray, sigma: float, alphas: np.ndarray) -> np.ndarray:
        """MSE for every ``(lam, alpha)`` pair at one sigma; shape ``(len(lams), len(alphas))``."""
        g = self.areas(sigma)
        self.evaluations += lams.size * alphas.size
        return _grid_mse(g, self.nonempty, self.y, lams, alphas)


def _grid_mse(g, nonempty, y, lams, alphas) -> np.ndarray:
    out = np.empty((lams.size, alphas.size))
    for a, alpha in enumerate(alphas):
        pred = sigmoid(np.outer(lams, g - alpha))
        pred = np.where(nonempty[None, :], pred, 0.0)
        err = pred - y[None, :]
        out[:, a] = np.mean(err * err, axis=1)
    return out


def _grid_argmin(mse_at_sigma: Iterable[np.ndarray], lams, sigmas, alphas) -> Tuple[float, Tuple[float, float, float]]:
    best = (np.inf, (lams[0], sigmas[0], alphas[0]))
    for s, table in enumerate(mse_at_sigma):
        i, a = np.unravel_index(int(np.argmin(table)), table.shape)
        if table[i, a] < best[0]:
            best = (float(table[i, a]), (float(lams[i]), float(sigmas[s]), float(alphas[a])))
    return best


class _PatternSearch:
    """Hooke-Jeeves search on the unit cube mapped onto the parameter box."""

    def __init__(self, objective: _Objective, config: FitConfig):
        self.f = objective
        self.config = config
        self.lo = config.lower
        self.span = np.where(config.upper > config.lower, config.upper - config.lower, 1.0)
        self.fixed = config.upper <= config.lower

    def to_params(self, u: np.ndarray) -> np.ndarray:
        return self.lo + np.clip(u, 0.0, 1.0) * self.span

    def value(self, u: np.ndarray) -> float:
        return self.f(self.to_params(u))

    def _explore(self, u: np.ndarray, fu: float, step: float) -> Tuple[np.ndarray, float]:
        u = u.copy()
        for k in range(u.size):
            if self.fixed[k]:
                continue
            for direction in (1.0, -1.0):
                trial = u.copy()
                trial[k] = min(max(trial[k] + direction * step, 0.0), 1.0)
                if trial[k] == u[k]:
                    continue
                ft = self.value(trial)
                if ft < fu - self.config.tol * fu:
                    u, fu = trial, ft
                    break
        return u, fu

    def run(self, u0: np.ndarray, step: float, budget: int) -> Tuple[np.ndarray, float, bool]:
        start = self.f.evaluations
        base, fbase = np.clip(u0, 0.0, 1.0), self.value(u0)
        while step >= self.config.min_step:
            if self.f.evaluations - start >= budget:
                return base, fbase, False
            if fbase == 0.0:
                return base, fbase, True
            u, fu = self._explore(base, fbase, step)
            if fu >= fbase:
                step *= 0.5
                continue
            # pattern moves along the last successful direction
            while self.f.evaluations - start < budget:
                probe = np.clip(u + (u - base), 0.0, 1.0)
                base, fbase = u, fu
                u, fu = self._explore(probe, self.value(probe), step)
                if fu >= fbase:
                    break
        return base, fbase, True


def _to_unit(theta, config: FitConfig) -> np.ndarray:
    span = np.where(config.upper > config.lower, config.upper - config.lower, 1.0)
    return (np.asarray(theta, dtype=np.float64) - config.lower) / span


def fit_params(data: Sequence[ScoredExample], config: FitConfig | None = None) -> FitResult:
    """Minimize the mean squared error between predicted and human scores.

    Deterministic for a given ``config``: restarts are drawn from a Philox
    generator keyed by ``config.seed``.  ``converged`` is False when the
    evaluation budget ran out before the step size fell below
    ``config.min_step``; the best point found is still returned.
    """
    config = config or FitConfig()
    _check_fittable(data)
    objective = _Objective(data)
    lams, sigmas, alphas = config.grid()

    grid_best, theta0 = _grid_argmin((objective.grid_mse(lams, s, alphas) for s in sigmas), lams, sigmas, alphas)
    log.debug("grid best mse=%.3g at %s", grid_best, theta0)

    search = _PatternSearch(objective, config)
    step = 1.0 / max(config.lam_steps - 1, config.sigma_steps - 1, config.alpha_steps - 1, 1)
    starts = [_to_unit(theta0, config)]
    rng = np.random.Generator(np.random.Philox(config.seed))
    starts += [rng.random(3) for _ in range(config.restarts)]

    best_u, best_f, converged = None, np.inf, True
    for k, u0 in enumerate(starts):
        budget = config.max_iter if k == 0 else max(config.max_iter // 4, 1)
        u, fu, ok = search.run(u0, step, budget)
        if k == 0:
            converged = ok
        if fu < best_f:
            best_u, best_f = u, fu
            converged = ok

    candidates = [theta0, tuple(search.to_params(best_u))]
    scored = []
    for theta in candidates:
        params = ScoringParams(*theta)
        scored.append((mse_objective(params, data), params))
    mse, params = min(scored, key=lambda t: t[0])
    return FitResult(params=params, mse=mse, evaluations=objective.evaluations, converged=converged)


def grid_oracle(data: Sequence[ScoredExample], config: FitConfig | None = None) -> FitResult:
    """Brute-force minimum of the objective over the configured grid.

    Weighted areas go through :func:`weighted_area` per example, independent
    of the stacked cache used by :func:`fit_params`.
    """
    config = config or FitConfig()
    _check_fittable(data)
    lams, sigmas, alphas = config.grid()
    y = np.array([ex.human_score for ex in data])
    nonempty = np.array([not ex.label.is_empty() for ex in data])

    def tables():
        for sigma in sigmas:
            g = np.array(
                [weighted_area(ex.label, gaussian_weights(ex.label.width, ex.label.height, sigma)) for ex in data]
            )
            table = np.empty((lams.size, alphas.size))
            for i, lam in enumerate(lams):
                for a, alpha in enumerate(alphas):
                    # |lam * (g - alpha)| <= lam_max, far from overflow for any sane grid
                    pred = np.where(nonempty, 1.0 / (1.0 + np.exp(-lam * (g - alpha))), 0.0)
                    table[i, a] = np.mean((pred - y) ** 2)
            yield table

    _, theta = _grid_argmin(tables(), lams, sigmas, alphas)
    params = ScoringParams(*theta)
    return FitResult(
        params=params,
        mse=mse_objective(params, data),
        evaluations=lams.size * sigmas.size * alphas.size,
        converged=True,
    )
