"""
Worst-case MSE functional of linear estimators and its minimizer H*.

For a linear estimator with coefficients H the functional is ``G_H = Y_b + Y_v`` where

    Y_b = sup_p ( e^{-pt}/p * |1 - e^{-rpt} - g_H(pt)| )^2
    Y_v = sup_q   e^{-qt}/q * (1 - e^{-rqt} + g_{H^2}(qt))

and ``g_H(x) = sum_i H_i x^i / i!``. Both suprema are taken over a composite grid on
(0, 1] plus the analytic limits at 0. The factors ``e^{-x} x^i / i!`` are evaluated as
Poisson probabilities so that large ``x`` never overflows.
"""
import math
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import optimize, stats

from src.app.logging_config import get_logger
from src.errors import NumericGuardError, PreconditionError
from src.models.gh import GhCertificate, GhEvaluation
from src.models.profile import Horizon, LinearWeights
from src.services.estimators import default_smoothing, gt_weights, sgt_weights
from src.settings import settings

logger = get_logger(__name__)

_MAX_CACHED_ENTRIES = 4_000_000
_CHUNK_ENTRIES = 1_000_000
_HORIZON_GUARD = "horizon too large for depth"


def composite_grid(size: int, p_floor: Optional[float] = None, p0: Optional[float] = None) -> np.ndarray:
    """
    Sorted grid on (0, 1]: half geometric from ``p_floor``, half uniform.

    With ``p0`` the grid is cut to ``[p0, 1]`` and ``p0`` itself is added.
    """
    if size < 1:
        raise PreconditionError("grid size must be >= 1")
    p_floor = settings.GH_P_FLOOR if p_floor is None else p_floor
    n_geo = size // 2
    n_uni = size - n_geo
    parts = [np.linspace(1.0 / n_uni, 1.0, n_uni)]
    if n_geo:
        parts.append(np.geomspace(p_floor, 1.0, n_geo))
    grid = np.unique(np.concatenate(parts))
    if p0 is not None:
        grid = np.unique(np.concatenate(([p0], grid[grid >= p0])))
    return grid


def default_gt_depth(h: Horizon) -> int:
    """Depth at which truncated Good-Toulmin weights stay unbiased on the whole grid."""
    return int(math.ceil(h.t + 12.0 * math.sqrt(h.t) + 30.0))


class GhFunctional:
    """
    The grid-discretized functional for a fixed horizon, depth and grid.

    Grid points are indexed after an optional leading p = 0 limit point.
    """

    def __init__(
        self,
        h: Horizon,
        depth: int,
        grid: int,
        p0: Optional[float] = None,
        p_floor: Optional[float] = None,
    ):
        if depth < 1:
            raise PreconditionError("depth must be >= 1")
        if p0 is not None and not (0.0 < p0 < 1.0):
            raise PreconditionError(f"p0 must lie in (0, 1), got {p0}")
        self.h = h
        self.depth = depth
        self.p0 = p0
        self.with_limit = p0 is None
        self.grid_p = composite_grid(grid, p_floor=p_floor, p0=p0)
        self.x = self.grid_p * h.t
        self.orders = np.arange(1, depth + 1)
        self.base = np.exp(-self.x) * -np.expm1(-h.r * self.x)
        self.points = (
            np.concatenate(([0.0], self.grid_p)) if self.with_limit else self.grid_p
        )
        self._pmf = None
        if self.grid_p.size * depth <= _MAX_CACHED_ENTRIES:
            self._pmf = self._pmf_rows(np.arange(self.grid_p.size))

    @property
    def size(self) -> int:
        return int(self.points.size)

    def _pmf_rows(self, rows: np.ndarray) -> np.ndarray:
        if self._pmf is not None:
            return self._pmf[rows]
        return stats.poisson.pmf(self.orders[None, :], self.x[rows, None])

    def _grid_terms(self, H: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Signed bias, bias ratio and variance term at each grid point (no limit point)."""
        n = self.grid_p.size
        g_h = np.empty(n)
        g_h2 = np.empty(n)
        H2 = H * H
        step = n if self._pmf is not None else max(1, _CHUNK_ENTRIES // self.depth)
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, step):
                rows = np.arange(start, min(n, start + step))
                block = self._pmf_rows(rows)
                g_h[rows] = block @ H
                g_h2[rows] = block @ H2
            bias = self.base - g_h
            ratio = np.abs(bias) / self.grid_p
            variance = (self.base + g_h2) / self.grid_p
        if not (np.all(np.isfinite(ratio)) and np.all(np.isfinite(variance))):
            raise NumericGuardError(
                f"{_HORIZON_GUARD}: r={self.h.r}, t={self.h.t}, depth={self.depth}"
            )
        return bias, ratio, variance

    def terms(self, H: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Signed bias, bias ratio and variance term at every point, limit first if present."""
        bias, ratio, variance = self._grid_terms(H)
        if not self.with_limit:
            return bias, ratio, variance
        t, r = self.h.t, self.h.r
        H1 = H[0]
        limit_ratio = t * abs(r - H1)
        limit_var = t * (r + H1 * H1)
        if not (math.isfinite(limit_ratio) and math.isfinite(limit_var)):
            raise NumericGuardError(
                f"{_HORIZON_GUARD}: r={self.h.r}, t={self.h.t}, depth={self.depth}"
            )
        return (
            np.concatenate(([0.0], bias)),
            np.concatenate(([limit_ratio], ratio)),
            np.concatenate(([limit_var], variance)),
        )

    def evaluate(self, H: np.ndarray) -> GhEvaluation:
        _, ratio, variance = self.terms(H)
        i_b = int(np.argmax(ratio))
        i_v = int(np.argmax(variance))
        y_b = float(ratio[i_b]) ** 2
        y_v = float(variance[i_v])
        if not math.isfinite(y_b + y_v):
            raise NumericGuardError(
                f"{_HORIZON_GUARD}: r={self.h.r}, t={self.h.t}, depth={self.depth}"
            )
        return GhEvaluation.of(
            y_b=y_b,
            y_v=max(y_v, 0.0),
            p_star=float(self.points[i_b]),
            q_star=float(self.points[i_v]),
            grid_size=self.size,
            p0=self.p0,
        )

    def value(self, H: np.ndarray) -> float:
        _, ratio, variance = self.terms(H)
        return float(np.max(ratio)) ** 2 + float(np.max(variance))

    def row(self, index: int) -> Tuple[float, np.ndarray, float]:
        """
        Affine pieces at point ``index``: the bias ratio is ``|a + c.H|`` and the
        variance term is ``d + e.H^2``. Returns (a, c, d) with ``e = -c`` on the grid.
        """
        t, r = self.h.t, self.h.r
        if self.with_limit and index == 0:
            c = np.zeros(self.depth)
            c[0] = -t
            return t * r, c, t * r
        g = index - 1 if self.with_limit else index
        p = self.grid_p[g]
        pmf = self._pmf_rows(np.array([g]))[0]
        return self.base[g] / p, -pmf / p, self.base[g] / p

    def value_and_subgradient(self, H: np.ndarray) -> Tuple[float, np.ndarray]:
        bias, ratio, variance = self.terms(H)
        i_b = int(np.argmax(ratio))
        i_v = int(np.argmax(variance))
        b_max = float(ratio[i_b])
        value = b_max ** 2 + float(variance[i_v])

        a, c, _ = self.row(i_b)
        sign = 1.0 if a + c @ H >= 0 else -1.0
        grad = 2.0 * b_max * sign * c

        _, c_v, _ = self.row(i_v)
        # variance coefficients are the negated bias coefficients
        grad = grad + 2.0 * H * -c_v
        return value, grad


def eval_gh(weights: LinearWeights, h: Horizon, grid: Optional[int] = None) -> GhEvaluation:
    """Evaluate the functional on the composite grid including the p -> 0 limits."""
    grid = settings.GH_GRID if grid is None else grid
    return GhFunctional(h, weights.depth, grid).evaluate(weights.as_array())


def eval_gh_restricted(
    weights: LinearWeights, h: Horizon, grid: Optional[int], p0: float
) -> GhEvaluation:
    """Evaluate with both suprema restricted to ``[p0, 1]``."""
    grid = settings.GH_GRID if grid is None else grid
    return GhFunctional(h, weights.depth, grid, p0=p0).evaluate(weights.as_array())


def _m_factor(p: float) -> float:
    if p <= 0.0:
        return 1.0
    return p * math.floor(1.0 / p * (1.0 + 1e-12))


def tilde_gh(evaluation: GhEvaluation) -> float:
    """Lower bound ``m_p^2 Y_b + m_q Y_v - 2 m_p sqrt(Y_b) - 1``; ``m = 1`` at a zero maximizer."""
    m_p = _m_factor(evaluation.p_star)
    m_q = _m_factor(evaluation.q_star)
    return (
        m_p * m_p * evaluation.y_b
        + m_q * evaluation.y_v
        - 2.0 * m_p * math.sqrt(evaluation.y_b)
        - 1.0
    )


def uniqueness_certificate(weights: LinearWeights, h: Horizon) -> bool:
    """Sufficient condition ``H_2^2 - 2 H_1^2 > r^2 + 2r`` for H to be the unique minimizer."""
    if weights.depth < 2:
        return False
    H1, H2 = weights.coeffs[0], weights.coeffs[1]
    return H2 * H2 - 2.0 * H1 * H1 > h.r * h.r + 2.0 * h.r


def minimax_lower_bound(h: Horizon) -> float:
    """No estimator has worst-case MSE below ``r t``."""
    return h.r * h.t


def linear_minimax_lower_bound(h: Horizon) -> float:
    """Worst-case MSE floor for linear estimators."""
    s = h.t / (h.t + 1.0)
    return h.r ** 2 * s ** 2 + h.r * h.t + s ** 2 * h.r ** 2 * h.t


def certify(
    weights: LinearWeights, h: Horizon, grid: Optional[int] = None, p0: Optional[float] = None
) -> GhCertificate:
    """Evaluate ``weights`` on a (fine) grid and assemble the certificate quantities."""
    grid = settings.GH_CERT_GRID if grid is None else grid
    functional = GhFunctional(h, weights.depth, grid, p0=p0)
    H = weights.as_array()
    bias, _, _ = functional.terms(H)
    evaluation = functional.evaluate(H)
    return GhCertificate(
        evaluation=evaluation,
        m_p=_m_factor(evaluation.p_star),
        m_q=_m_factor(evaluation.q_star),
        tilde_g=tilde_gh(evaluation),
        uniqueness_ok=uniqueness_certificate(weights, h),
        bias_bounded_by_one=bool(np.max(np.abs(bias)) <= 1.0),
        p_star_at_limit=evaluation.p_star == 0.0,
        q_star_at_limit=evaluation.q_star == 0.0,
        r=h.r,
        t=h.t,
        depth=weights.depth,
        cert_grid=grid,
        linear_minimax_floor=linear_minimax_lower_bound(h),
    )


def _start_weights(h: Horizon, depth: int) -> Dict[str, np.ndarray]:
    starts: Dict[str, np.ndarray] = {}
    try:
        starts["gt"] = gt_weights(h, depth).as_array()
    except NumericGuardError:
        logger.warning("Skipping Good-Toulmin start", extra={"r": h.r, "depth": depth})
    try:
        starts["sgt"] = sgt_weights(h, default_smoothing(h), depth).as_array()
    except NumericGuardError:
        logger.warning("Skipping SGT start", extra={"r": h.r, "depth": depth})
    starts["null"] = np.zeros(depth)
    return starts


def _safe_value(functional: GhFunctional, H: np.ndarray) -> float:
    try:
        return functional.value(H)
    except NumericGuardError:
        return math.inf


def _epigraph_start(functional: GhFunctional, H_init: np.ndarray, rounds: int) -> np.ndarray:
    """
    Cutting-plane solve of ``min beta^2 + v`` subject to ``beta >= |bias ratio|`` and
    ``v >= variance term`` on a growing active set of grid points.
    """
    depth = functional.depth
    _, ratio, variance = functional.terms(H_init)
    scale = max(float(np.max(ratio)) ** 2 + float(np.max(variance)), 1e-12)

    n_points = functional.size
    seed_points = np.unique(np.geomspace(1, n_points, num=min(n_points, 40)).astype(int) - 1)
    active_b = set(seed_points.tolist()) | set(np.argsort(ratio)[-16:].tolist())
    active_v = set(seed_points.tolist()) | set(np.argsort(variance)[-16:].tolist())

    best_H = H_init.copy()
    best_value = _safe_value(functional, H_init)
    z = np.concatenate((H_init, [float(np.max(ratio)), float(np.max(variance))]))

    for round_index in range(rounds):
        rows_b = [functional.row(j) for j in sorted(active_b)]
        rows_v = [functional.row(j) for j in sorted(active_v)]
        a_b = np.array([row[0] for row in rows_b])
        C_b = np.array([row[1] for row in rows_b])
        d_v = np.array([row[2] for row in rows_v])
        E_v = np.array([-row[1] for row in rows_v])

        def objective(zz):
            beta, v = zz[depth], zz[depth + 1]
            grad = np.zeros_like(zz)
            grad[depth] = 2.0 * beta / scale
            grad[depth + 1] = 1.0 / scale
            return (beta * beta + v) / scale, grad

        def bias_constraint(zz):
            lin = a_b + C_b @ zz[:depth]
            beta = zz[depth]
            return np.concatenate((beta - lin, beta + lin))

        def bias_jacobian(zz):
            n = len(a_b)
            jac = np.zeros((2 * n, depth + 2))
            jac[:n, :depth] = -C_b
            jac[n:, :depth] = C_b
            jac[:, depth] = 1.0
            return jac

        def variance_constraint(zz):
            H = zz[:depth]
            return zz[depth + 1] - (d_v + E_v @ (H * H))

        def variance_jacobian(zz):
            jac = np.zeros((len(d_v), depth + 2))
            jac[:, :depth] = -2.0 * E_v * zz[:depth]
            jac[:, depth + 1] = 1.0
            return jac

        result = optimize.minimize(
            objective,
            z,
            jac=True,
            method="SLSQP",
            constraints=[
                {"type": "ineq", "fun": bias_constraint, "jac": bias_jacobian},
                {"type": "ineq", "fun": variance_constraint, "jac": variance_jacobian},
            ],
            options={"maxiter": 300, "ftol": 1e-12},
        )
        H = result.x[:depth]
        if not np.all(np.isfinite(H)):
            break
        try:
            _, ratio, variance = functional.terms(H)
        except NumericGuardError:
            break
        value = float(np.max(ratio)) ** 2 + float(np.max(variance))
        if value < best_value:
            best_H, best_value = H.copy(), value

        beta, v = result.x[depth], result.x[depth + 1]
        new_b = [int(j) for j in np.argsort(ratio)[::-1][:8] if ratio[j] > beta * (1 + 1e-9) and j not in active_b]
        new_v = [int(j) for j in np.argsort(variance)[::-1][:8] if variance[j] > v * (1 + 1e-9) and j not in active_v]
        logger.debug(
            "Epigraph round",
            extra={"round": round_index, "value": value, "new_b": len(new_b), "new_v": len(new_v)},
        )
        if not new_b and not new_v:
            break
        active_b.update(new_b)
        active_v.update(new_v)
        z = np.concatenate((H, [float(np.max(ratio)), float(np.max(variance))]))

    return best_H


def _descend(
    functional: GhFunctional, H0: np.ndarray, budget: int, step0: float
) -> Tuple[np.ndarray, float]:
    """Subgradient descent with steps ``step0 / sqrt(k+1)``; returns the best iterate."""
    H = H0.copy()
    best_H, best_value = H0.copy(), _safe_value(functional, H0)
    if not math.isfinite(best_value):
        return best_H, best_value
    for k in range(budget):
        value, grad = functional.value_and_subgradient(H)
        if value < best_value:
            best_H, best_value = H.copy(), value
        norm = float(np.linalg.norm(grad))
        if norm == 0.0 or not math.isfinite(norm):
            break
        H = H - (step0 / math.sqrt(k + 1.0)) * grad / norm
    value = _safe_value(functional, H)
    if value < best_value:
        best_H, best_value = H.copy(), value
    return best_H, best_value


def optimize_hstar(
    h: Horizon,
    depth: Optional[int] = None,
    grid: Optional[int] = None,
    budget: Optional[int] = None,
    p0: Optional[float] = None,
    cert_grid: Optional[int] = None,
    rounds: Optional[int] = None,
) -> Tuple[LinearWeights, GhCertificate]:
    """
    Minimize the worst-case MSE functional over weights of the given depth.

    Runs subgradient descent from the Good-Toulmin, SGT, null and epigraph starts
    and keeps the best iterate on the optimization grid. The returned weights never
    evaluate worse on the certification grid than the Good-Toulmin and null starts;
    if the optimized iterate does, the better start is returned and the certificate
    is flagged as not certified.

    Args:
        h: Horizon
        depth: Number of coefficients (GH_DEPTH)
        grid: Optimization grid size (GH_GRID)
        budget: Subgradient iterations per start (GH_BUDGET)
        p0: Restrict both suprema to [p0, 1]
        cert_grid: Certification grid size (GH_CERT_GRID, at least 10x grid)
        rounds: Cutting-plane rounds for the epigraph start (GH_EXCHANGE_ROUNDS)

    Returns:
        (weights, certificate)
    """
    depth = settings.GH_DEPTH if depth is None else depth
    grid = settings.GH_GRID if grid is None else grid
    budget = settings.GH_BUDGET if budget is None else budget
    rounds = settings.GH_EXCHANGE_ROUNDS if rounds is None else rounds
    cert_grid = max(settings.GH_CERT_GRID if cert_grid is None else cert_grid, 10 * grid)
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    if budget < 0:
        raise PreconditionError("budget must be >= 0")

    logger.info(
        "Fitting H*",
        extra={"r": h.r, "t": h.t, "depth": depth, "grid": grid, "budget": budget, "p0": p0},
    )

    functional = GhFunctional(h, depth, grid, p0=p0)
    starts = _start_weights(h, depth)
    start_values = {name: _safe_value(functional, H) for name, H in starts.items()}

    finite_starts = {n: v for n, v in start_values.items() if math.isfinite(v)}
    first = min(finite_starts, key=finite_starts.get)
    starts["epigraph"] = _epigraph_start(functional, starts[first], rounds)
    start_values["epigraph"] = _safe_value(functional, starts["epigraph"])

    step0 = 0.1 * max(1.0, float(np.max(np.abs(starts["epigraph"]))))
    best_H: Optional[np.ndarray] = None
    best_value = math.inf
    for name in ("gt", "sgt", "null", "epigraph"):
        if name not in starts or not math.isfinite(start_values[name]):
            continue
        H, value = _descend(functional, starts[name], budget, step0)
        if value < best_value:
            best_H, best_value = H, value

    weights = LinearWeights.from_array(best_H)
    certificate = certify(weights, h, cert_grid, p0=p0)

    certified = True
    fine_g = certificate.evaluation.g_h
    for name in ("gt", "null"):
        if name not in starts:
            continue
        try:
            start_fine = certify(LinearWeights.from_array(starts[name]), h, cert_grid, p0=p0)
        except NumericGuardError:
            continue
        if start_fine.evaluation.g_h < fine_g:
            logger.warning(
                "Optimized weights lose to a start on the certification grid",
                extra={"start": name, "r": h.r, "t": h.t, "start_g": start_fine.evaluation.g_h, "g": fine_g},
            )
            certified = False
            weights, certificate, fine_g = (
                LinearWeights.from_array(starts[name]), start_fine, start_fine.evaluation.g_h,
            )

    certificate = certificate.model_copy(
        update={
            "grid": grid,
            "budget": budget,
            "certified": certified,
            "start_values": {k: v for k, v in start_values.items() if math.isfinite(v)},
        }
    )
    logger.info(
        "H* fitted",
        extra={"r": h.r, "t": h.t, "g_h": certificate.evaluation.g_h, "certified": certified},
    )
    return weights, certificate
