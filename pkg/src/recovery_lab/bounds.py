"""Divergence measurement of the martingale component of a discount factor.

The Cressie-Read family

    phi_theta(r) = (r^(1+theta) - 1) / (theta (1+theta)),
    phi_0(r) = r log r,       phi_{-1}(r) = -log r,

is normalized so phi_theta(1) = 0 and phi_theta''(1) = 1.  Applied to the
martingale increments h_hat of a recovery, the conditional expectation
E[phi_theta(h_hat) | x] is an exact per-state discrepancy on a finite chain.

When only a menu of payoffs Y_{t+1}, their prices Q_t and the long-bond
return R_inf are observed, a lower bound comes from the convex program

    lambda_bar = inf over J >= 0 of E[phi_theta(J)]
    s.t.  E[J] = 1  and  E[J Y' / R_inf - Q'] = 0,

solved through its smooth concave dual: maximize over multipliers (mu, lam)

    g(mu, lam) = mu + lam . E[Q] - E[ phi*(mu + lam . Y / R_inf) ]

with phi* the convex conjugate of phi_theta on J >= 0.  The maximizer's
first-order condition J = phi*'(z) recovers the primal solution, clipped at
zero exactly where the conjugate's form demands it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray

from .exceptions import ConvergenceError, InfeasibleProblemError
from .markov import (
    MarkovPricingEconomy,
    RecoveredMeasure,
    holding_period_return_limit,
    stationary_distribution,
)

__all__ = [
    "DivergenceSpec",
    "BoundProblem",
    "BoundResult",
    "phi",
    "conditional_discrepancy",
    "conditional_bound",
    "population_discrepancy",
    "unconditional_bound",
    "kazemi_test",
    "generate_problem_from_chain",
    "problem_to_csv",
    "problem_from_csv",
]

_GRAD_TOL = 1e-10
_MAX_NEWTON = 200
_UNBOUNDED_NORM = 1e10


@dataclass(frozen=True)
class DivergenceSpec:
    """A member of the power-divergence family, indexed by theta."""

    theta: float

    def __call__(self, r):
        return phi(self.theta, r)


def phi(theta: float, r) -> Union[float, NDArray[np.float64]]:
    """Power divergence kernel; r may be a scalar or an array.

    r = 0 is admitted for theta > 0 (continuous extension); elsewhere the
    kernel is undefined at 0 and a ValueError is raised.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise ValueError("phi is defined on nonnegative arguments only")
    if np.any(arr == 0) and theta <= 0:
        raise ValueError(f"phi with theta={theta} is undefined at r=0")
    # the generic formula cancels catastrophically next to its two poles;
    # switch to the limit kernels there (error is O(theta), below round-off
    # of the division at the 1e-8 threshold)
    if abs(theta) < 1e-8:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(arr > 0, arr * np.log(np.where(arr > 0, arr, 1.0)), 0.0)
    elif abs(1.0 + theta) < 1e-8:
        out = -np.log(arr)
    else:
        out = (arr ** (1.0 + theta) - 1.0) / (theta * (1.0 + theta))
    return float(out) if np.isscalar(r) else out


def _phi_conj(theta: float, z: NDArray[np.float64], nonnegative: bool):
    """Conjugate phi*(z), its derivative (the primal J) and second derivative.

    For theta > 0 the conjugate over J >= 0 flattens at z <= 0 (J = 0); for
    theta <= 0 the domain is z < 0 (theta < 0) or all of R (theta = 0) and
    positivity of J is automatic.  ``nonnegative=False`` drops the J >= 0
    restriction, which is only meaningful for theta = 1 where phi extends to
    negative arguments.
    """
    if not nonnegative:
        if theta != 1.0:
            raise ValueError("negative J only makes sense for theta = 1")
        val = 0.5 * z**2 + 0.5
        return val, z.copy(), np.ones_like(z)
    if theta == 0.0:
        ez = np.exp(z - 1.0)
        return ez, ez, ez
    u = theta * z
    if theta > 0:
        up = np.maximum(u, 0.0)
        j = up ** (1.0 / theta)
        val = up ** ((1.0 + theta) / theta) / (1.0 + theta) + 1.0 / (
            theta * (1.0 + theta)
        )
        with np.errstate(divide="ignore"):
            curv = np.where(up > 0, up ** (1.0 / theta - 1.0), 0.0)
        return val, j, curv
    # theta < 0: require u = theta z > 0, i.e. z < 0
    if np.any(u <= 0):
        raise FloatingPointError("multiplier combination left the dual domain")
    if theta == -1.0:
        return -1.0 - np.log(u), 1.0 / u, u**-2.0
    val = u ** ((1.0 + theta) / theta) / (1.0 + theta) + 1.0 / (theta * (1.0 + theta))
    return val, u ** (1.0 / theta), u ** (1.0 / theta - 1.0)


def _phi_prime_at_one(theta: float) -> float:
    # phi'(1) = 1/theta with limits 1 (theta=0) and -1 (theta=-1)
    return 1.0 if theta == 0.0 else 1.0 / theta


@dataclass(frozen=True)
class BoundProblem:
    """Sampled (or enumerated) payoffs, prices, long-bond returns and weights.

    payoff_samples   T x m realizations of Y_{t+1}
    price_samples    T x m matching prices Q_t
    long_bond_return T-vector of R_inf between t and t+1
    weights          T-vector of sample probabilities (uniform by default)
    """

    payoff_samples: NDArray[np.float64]
    price_samples: NDArray[np.float64]
    long_bond_return: NDArray[np.float64]
    weights: Optional[NDArray[np.float64]] = None

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.payoff_samples, dtype=float))
        q = np.atleast_2d(np.asarray(self.price_samples, dtype=float))
        r = np.atleast_1d(np.asarray(self.long_bond_return, dtype=float))
        if y.shape != q.shape or y.shape[0] != r.shape[0]:
            raise ValueError("payoffs, prices and returns have inconsistent shapes")
        if np.any(r <= 0):
            raise ValueError("long bond returns must be strictly positive")
        if self.weights is None:
            w = np.full(y.shape[0], 1.0 / y.shape[0])
        else:
            w = np.atleast_1d(np.asarray(self.weights, dtype=float))
            if w.shape[0] != y.shape[0] or np.any(w < 0):
                raise ValueError("weights must be nonnegative, one per sample")
            if abs(w.sum() - 1.0) > 1e-10:
                raise ValueError("weights must sum to one")
        object.__setattr__(self, "payoff_samples", y)
        object.__setattr__(self, "price_samples", q)
        object.__setattr__(self, "long_bond_return", r)
        object.__setattr__(self, "weights", w)

    @property
    def n_assets(self) -> int:
        return self.payoff_samples.shape[1]


@dataclass(frozen=True)
class BoundResult:
    lambda_bar: float
    multipliers: NDArray[np.float64]
    constraint_residuals: NDArray[np.float64]
    converged: bool
    dual_value: float
    j: NDArray[np.float64]

    @property
    def duality_gap(self) -> float:
        return abs(self.lambda_bar - self.dual_value)


def conditional_discrepancy(
    economy: MarkovPricingEconomy,
    recovered: RecoveredMeasure,
    theta: float,
) -> NDArray[np.float64]:
    """Per-state discrepancy sum_j p_ij phi_theta(h_hat_ij), an exact sum.

    Nonnegative, and zero exactly when the martingale increments are one on
    every reachable transition.
    """
    if recovered.h_increments is None:
        raise ValueError("recovery lacks martingale increments (no transition given)")
    p = economy.transition.entries
    h = recovered.h_increments
    live = p > 0
    vals = phi(theta, np.where(live, h, 1.0))
    return np.sum(np.where(live, p * vals, 0.0), axis=1)


def population_discrepancy(
    economy: MarkovPricingEconomy,
    recovered: RecoveredMeasure,
    theta: float,
) -> float:
    """Stationary-weighted average of the conditional discrepancies."""
    pi = stationary_distribution(economy.transition)
    return float(pi @ conditional_discrepancy(economy, recovered, theta))


def conditional_bound(
    economy: MarkovPricingEconomy,
    recovered: RecoveredMeasure,
    theta: float,
    payoff_spec="arrow",
) -> NDArray[np.float64]:
    """Per-state lower bound on E[phi_theta(J) | x] for a given asset menu.

    Each state solves its own small program with the conditional transition
    probabilities as weights; only exact finite-state sums are involved.  With
    the full next-state Arrow menu the constraints pin J to the recovered
    martingale increments, so the bound equals the conditional discrepancy;
    smaller menus give weaker per-state bounds, and the stationary-weighted
    average always dominates the unconditional bound on the same menu.
    """
    p = economy.transition.entries
    q = economy.prices.entries
    n = economy.n
    if isinstance(payoff_spec, str):
        if payoff_spec != "arrow":
            raise ValueError("conditional bounds take 'arrow' or a payoff matrix")
        psi = np.eye(n)
    else:
        psi = np.atleast_2d(np.asarray(payoff_spec, dtype=float))
    eta, e_hat = recovered.eta_hat, recovered.e_hat
    r_inf = np.exp(-eta) * e_hat[None, :] / e_hat[:, None]
    prices = psi @ q.T  # (m, n): price of each asset per current state
    out = np.empty(n)
    for i in range(n):
        live = p[i] > 0
        sub = BoundProblem(
            payoff_samples=psi.T[live],
            price_samples=np.tile(prices[:, i], (int(live.sum()), 1)),
            long_bond_return=r_inf[i, live],
            weights=p[i, live],
        )
        out[i] = unconditional_bound(sub, theta).lambda_bar
    return out


def kazemi_test(problem: BoundProblem) -> NDArray[np.float64]:
    """Pricing errors E[Y' / R_inf - Q'] of the inverse long-bond return.

    A zero vector (up to sampling error) is consistent with the absence of a
    martingale component, in which case 1/R_inf is itself the one-period
    discount factor.
    """
    w = problem.weights
    y = problem.payoff_samples / problem.long_bond_return[:, None]
    return w @ (y - problem.price_samples)


def unconditional_bound(
    problem: BoundProblem,
    theta: float,
    nonnegative: bool = True,
    grad_tol: float = _GRAD_TOL,
    max_iter: int = _MAX_NEWTON,
) -> BoundResult:
    """Lower bound on E[phi_theta] of the martingale increment.

    Damped Newton on the concave dual, initialized at the multipliers whose
    implied primal is J = 1 everywhere.  Line search enforces both ascent and
    the dual domain (the affine multiplier combination must stay negative for
    theta < 0).  Unbounded dual ascent certifies an infeasible constraint
    system and raises InfeasibleProblemError with the offending direction.
    """
    w = problem.weights
    keep = w > 0
    w = w[keep]
    y = problem.payoff_samples[keep] / problem.long_bond_return[keep, None]
    q_bar = problem.weights @ problem.price_samples
    t, m = y.shape
    a = np.hstack([np.ones((t, 1)), y])  # z = a @ u
    target = np.concatenate([[1.0], q_bar])

    u = np.zeros(m + 1)
    u[0] = _phi_prime_at_one(theta)

    def dual_parts(u_vec):
        z = a @ u_vec
        val, j, curv = _phi_conj(theta, z, nonnegative)
        g = float(u_vec @ target - w @ val)
        grad = target - a.T @ (w * j)
        return g, grad, j, curv

    g_val, grad, j, curv = dual_parts(u)
    converged = False
    direction = None
    for _ in range(max_iter):
        if np.max(np.abs(grad)) <= grad_tol:
            converged = True
            break
        h = -(a.T * (w * curv)) @ a
        try:
            direction = np.linalg.solve(h, -grad)
        except np.linalg.LinAlgError:
            direction = None
        if direction is None or grad @ direction <= 0:
            # curvature defective (flat conjugate region): fall back to a
            # regularized system, and to plain gradient ascent if need be
            ridge = 1e-10 * max(1.0, float(np.max(np.abs(np.diag(h)))))
            try:
                direction = np.linalg.solve(h - ridge * np.eye(m + 1), -grad)
            except np.linalg.LinAlgError:
                direction = grad.copy()
            if grad @ direction <= 0:
                direction = grad.copy()
        step = 1.0
        for _ in range(80):
            try:
                g_new, grad_new, j_new, curv_new = dual_parts(u + step * direction)
            except FloatingPointError:
                step *= 0.5
                continue
            if g_new >= g_val + 1e-4 * step * float(grad @ direction):
                u = u + step * direction
                g_val, grad, j, curv = g_new, grad_new, j_new, curv_new
                break
            step *= 0.5
        else:
            raise ConvergenceError("dual line search failed to make progress")
        if np.linalg.norm(u) > _UNBOUNDED_NORM:
            raise InfeasibleProblemError(
                "dual objective is unbounded: constraint system infeasible",
                direction=direction / np.linalg.norm(direction),
            )
    if not converged and np.max(np.abs(grad)) > grad_tol:
        raise ConvergenceError(
            f"dual Newton did not reach tolerance (grad {np.max(np.abs(grad)):.2e})"
        )
    if nonnegative:
        primal = float(w @ phi(theta, j))
    else:
        primal = float(w @ ((j**2 - 1.0) / 2.0))  # theta = 1 extends to J < 0
    residuals = np.concatenate(
        [[float(w @ j) - 1.0], a[:, 1:].T @ (w * j) - q_bar]
    )
    return BoundResult(
        lambda_bar=primal,
        multipliers=u,
        constraint_residuals=residuals,
        converged=converged,
        dual_value=g_val,
        j=j,
    )


def generate_problem_from_chain(
    economy: MarkovPricingEconomy,
    recovered: RecoveredMeasure,
    payoff_spec="arrow",
    horizon_t: int = 0,
    mode: str = "population",
    seed: Optional[int] = None,
) -> BoundProblem:
    """Synthesize a bound problem from a finite-state economy.

    ``payoff_spec`` is an m x n matrix of next-state payoffs, the string
    "arrow" (one claim per next state), or "arrow_pairs" (one claim per
    transition, contingent on both the current and the next state; this menu
    pins the martingale increment completely).  Population mode enumerates
    every positive-probability transition weighted by the stationary law;
    sampled mode simulates a path of length ``horizon_t``.
    """
    p = economy.transition.entries
    q = economy.prices.entries
    n = economy.n
    r_inf = holding_period_return_limit(economy)

    pairs_menu = False
    if isinstance(payoff_spec, str):
        if payoff_spec == "arrow":
            psi = np.eye(n)
        elif payoff_spec == "arrow_pairs":
            pairs_menu = True
        else:
            raise ValueError(f"unknown payoff_spec {payoff_spec!r}")
    else:
        psi = np.atleast_2d(np.asarray(payoff_spec, dtype=float))
        if psi.shape[1] != n:
            raise ValueError("payoff matrix must have one column per state")
    if not pairs_menu:
        prices = psi @ q.T  # prices[a, i] = price of asset a in state i

    if mode == "population":
        pi = stationary_distribution(economy.transition)
        rows_i, rows_j = np.nonzero(p)
        weights = pi[rows_i] * p[rows_i, rows_j]
    elif mode == "sampled":
        if horizon_t < 1:
            raise ValueError("sampled mode needs horizon_t >= 1")
        rng = np.random.default_rng(seed)
        pi = stationary_distribution(economy.transition)
        states = np.empty(horizon_t + 1, dtype=int)
        states[0] = rng.choice(n, p=pi)
        cum = np.cumsum(p, axis=1)
        draws = rng.random(horizon_t)
        for t in range(horizon_t):
            states[t + 1] = np.searchsorted(cum[states[t]], draws[t])
        rows_i, rows_j = states[:-1], states[1:]
        weights = np.full(horizon_t, 1.0 / horizon_t)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if pairs_menu:
        if mode != "population":
            raise ValueError("the transition-contingent menu requires population mode")
        # one claim per live transition, contingent on both endpoints
        live_i, live_j = np.nonzero(p)
        n_assets = live_i.size
        y = np.zeros((rows_i.size, n_assets))
        prices_rows = np.zeros((rows_i.size, n_assets))
        for a, (ai, aj) in enumerate(zip(live_i, live_j)):
            y[:, a] = (rows_i == ai) & (rows_j == aj)
            prices_rows[:, a] = (rows_i == ai) * q[ai, aj]
    else:
        y = psi.T[rows_j]
        prices_rows = prices.T[rows_i]
    return BoundProblem(
        payoff_samples=y,
        price_samples=prices_rows,
        long_bond_return=r_inf[rows_i, rows_j],
        weights=weights,
    )


def problem_to_csv(problem: BoundProblem, path) -> None:
    """Write a problem as CSV with columns weight, r_infty, y_1..y_m, q_1..q_m."""
    m = problem.n_assets
    header = (
        ["weight", "r_infty"]
        + [f"y_{a + 1}" for a in range(m)]
        + [f"q_{a + 1}" for a in range(m)]
    )
    table = np.column_stack(
        [
            problem.weights,
            problem.long_bond_return,
            problem.payoff_samples,
            problem.price_samples,
        ]
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def problem_from_csv(path) -> BoundProblem:
    """Read a problem from the CSV wire format written by problem_to_csv."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        table = np.loadtxt(fh, delimiter=",", ndmin=2)
    if header[:2] != ["weight", "r_infty"] or (len(header) - 2) % 2 != 0:
        raise ValueError("problem CSV must have columns weight, r_infty, y_*, q_*")
    m = (len(header) - 2) // 2
    return BoundProblem(
        payoff_samples=table[:, 2 : 2 + m],
        price_samples=table[:, 2 + m :],
        long_bond_return=table[:, 1],
        weights=table[:, 0],
    )
