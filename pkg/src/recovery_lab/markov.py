"""Finite-state Arrow-price economies and Perron-Frobenius recovery.

An n-state economy is a triple (P, S, Q): a transition matrix P = [p_ij], a
matrix of state-pair discount factors S = [s_ij], and the implied Arrow price
matrix Q = [q_ij] with q_ij = s_ij * p_ij.  The dominant eigenpair of Q,

    Q e_hat = exp(eta_hat) e_hat,    e_hat > 0,

defines the long-term risk-neutral transition matrix

    p_hat_ij = exp(-eta_hat) * q_ij * e_hat_j / e_hat_i,

and the one-period discount factor decomposes as

    s_ij = exp(eta_hat) * (e_hat_i / e_hat_j) * h_hat_ij,
    h_hat_ij = p_hat_ij / p_ij,

so that the compounded discount factor splits into an exponential trend, an
eigenvector ratio, and a positive martingale accumulated from the h_hat
increments.  This module implements the construction, risk-neutral and
forward measures, the recovery map, long-maturity limits, and the extended
(shock-augmented) and structured variants of the recovery map.

All operations are pure functions of immutable inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    ConvergenceError,
    ErgodicityError,
    NonPrimitiveMatrixError,
)

__all__ = [
    "StochasticMatrix",
    "SdfMatrix",
    "PricingMatrix",
    "MarkovPricingEconomy",
    "RecoveredMeasure",
    "GaussianAugmentedFunctional",
    "ErgodicityReport",
    "PositiveEigenCandidate",
    "DecompositionFactors",
    "LogReturnBound",
    "ExtendedRecovery",
    "StructuredRecovery",
    "build_economy",
    "risk_neutral",
    "forward_measure",
    "perron_frobenius",
    "recover",
    "sdf_decomposition",
    "holding_period_return_limit",
    "forward_one_period_limit",
    "yield_curve",
    "log_return_bound_check",
    "extended_pf_family",
    "structured_recover",
    "ergodicity_check",
    "enumerate_positive_eigen",
    "stationary_distribution",
    "h0_stationary",
    "conditional_increment_matrix",
    "ross_extended_economy",
    "is_primitive",
    "economy_from_dict",
    "economy_to_dict",
    "recovery_to_dict",
    "load_economy",
]

_ROW_SUM_TOL = 1e-12
_ECONOMY_REL_TOL = 1e-14


def _as_square(entries, name: str) -> NDArray[np.float64]:
    a = np.asarray(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def is_primitive(matrix: NDArray[np.float64]) -> bool:
    """True if some power of the nonnegative matrix is strictly positive.

    Uses the exact finite criterion: a nonnegative n x n matrix is primitive
    iff its ((n-1)^2 + 1)-th power has no zero entry.  The check runs on the
    boolean adjacency pattern (binary exponentiation), so no rescaling of the
    numeric entries is needed.
    """
    a = np.asarray(matrix)
    n = a.shape[0]
    if np.any(a < 0):
        return False
    target = (n - 1) ** 2 + 1
    reach = a > 0
    acc = np.eye(n, dtype=bool)
    power = target
    while power:
        if power & 1:
            acc = (acc.astype(np.uint8) @ reach.astype(np.uint8)) > 0
        power >>= 1
        if power:
            reach = (reach.astype(np.uint8) @ reach.astype(np.uint8)) > 0
    return bool(acc.all())


@dataclass(frozen=True)
class StochasticMatrix:
    """Row-stochastic transition matrix; row i is the law of the next state."""

    entries: NDArray[np.float64]

    def __post_init__(self):
        a = _as_square(self.entries, "transition matrix")
        if np.any(a < 0):
            raise ValueError("transition probabilities must be nonnegative")
        row_sums = a.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > _ROW_SUM_TOL):
            worst = float(np.max(np.abs(row_sums - 1.0)))
            raise ValueError(f"rows must sum to 1 (worst deviation {worst:.3e})")
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SdfMatrix:
    """State-pair discount factors s_ij (price per unit next-period payoff).

    Entries paired with zero-probability transitions are irrelevant; they are
    normalized to 1 when an economy is built and excluded from all sums.
    """

    entries: NDArray[np.float64]

    def __post_init__(self):
        a = _as_square(self.entries, "discount factor matrix")
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class PricingMatrix:
    """Arrow prices q_ij: price in state i of one unit paid in state j.

    Must be nonnegative and primitive, with a strictly positive one-period
    bond price (row sum) in every state.
    """

    entries: NDArray[np.float64]

    def __post_init__(self):
        a = _as_square(self.entries, "pricing matrix")
        if np.any(a < 0):
            raise ValueError("Arrow prices must be nonnegative")
        if np.any(a.sum(axis=1) <= 0):
            raise ValueError("every one-period bond price (row sum) must be positive")
        if not is_primitive(a):
            raise NonPrimitiveMatrixError(
                "pricing matrix is not primitive: no power has all entries positive"
            )
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def bond_prices(self) -> NDArray[np.float64]:
        return self.entries.sum(axis=1)


@dataclass(frozen=True)
class MarkovPricingEconomy:
    """The triple (P, S, Q) with q_ij = s_ij * p_ij."""

    transition: StochasticMatrix
    sdf: SdfMatrix
    prices: PricingMatrix

    def __post_init__(self):
        p = self.transition.entries
        s = self.sdf.entries
        q = self.prices.entries
        if not (p.shape == s.shape == q.shape):
            raise ValueError("transition, sdf and prices must share one shape")
        expected = s * p
        scale = np.maximum(np.abs(q), np.abs(expected))
        mismatch = np.abs(q - expected) > _ECONOMY_REL_TOL * np.maximum(scale, 1e-300)
        if np.any(mismatch & (scale > 0)):
            raise ValueError("prices are not the elementwise product of sdf and transition")

    @property
    def n(self) -> int:
        return self.transition.n


@dataclass(frozen=True)
class RecoveredMeasure:
    """Output of the recovery map.

    eta_hat      log dominant eigenvalue (per period).
    e_hat        positive right eigenvector, scaled so max entry = 1.
    e_star       nonnegative left eigenvector, scaled to sum to 1.
    p_hat        recovered (long-term risk neutral) transition matrix.
    h_increments martingale increments p_hat_ij / p_ij (1 where p_ij = 0);
                 None when recovery ran from prices alone and no true
                 transition matrix was available.
    """

    eta_hat: float
    e_hat: NDArray[np.float64]
    e_star: NDArray[np.float64]
    p_hat: StochasticMatrix
    h_increments: Optional[NDArray[np.float64]] = None


@dataclass(frozen=True)
class GaussianAugmentedFunctional:
    """Multiplicative functional driven by the chain and k Gaussian shocks.

    The log increment given current state i is

        beta_bar[i] + alpha_bar[i, :n] . (X' - E[X'|X=i]) + alpha_bar[i, n:] . dZ

    where X' is the next coordinate state vector and dZ is a k-dimensional
    standard normal independent of the chain.
    """

    beta_bar: NDArray[np.float64]
    alpha_bar: NDArray[np.float64]

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.beta_bar, dtype=float))
        a = np.atleast_2d(np.asarray(self.alpha_bar, dtype=float))
        n = b.shape[0]
        if a.shape[0] != n or a.shape[1] < n:
            raise ValueError(
                f"alpha_bar must be n x (n+k) with k >= 0; got {a.shape} for n={n}"
            )
        object.__setattr__(self, "beta_bar", b)
        object.__setattr__(self, "alpha_bar", a)

    @property
    def n(self) -> int:
        return self.beta_bar.shape[0]

    @property
    def k(self) -> int:
        return self.alpha_bar.shape[1] - self.n

    @property
    def chain_loading(self) -> NDArray[np.float64]:
        return self.alpha_bar[:, : self.n]

    @property
    def gaussian_loading(self) -> NDArray[np.float64]:
        return self.alpha_bar[:, self.n :]


@dataclass(frozen=True)
class ErgodicityReport:
    irreducible: bool
    aperiodic: bool
    n_classes: int
    period: int

    @property
    def ok(self) -> bool:
        return self.irreducible and self.aperiodic


@dataclass(frozen=True)
class PositiveEigenCandidate:
    eta: float
    vector: NDArray[np.float64]
    borderline: bool = False


@dataclass(frozen=True)
class DecompositionFactors:
    """Trend, eigenvector-ratio and martingale factors of a compounded SDF."""

    trend: float
    eigen_ratio: float
    martingale: float

    @property
    def product(self) -> float:
        return self.trend * self.eigen_ratio * self.martingale


@dataclass(frozen=True)
class LogReturnBound:
    """Per-state sides of the long-bond log-return inequality."""

    lhs: NDArray[np.float64]
    rhs: NDArray[np.float64]

    @property
    def slack(self) -> NDArray[np.float64]:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class ExtendedRecovery:
    eta: float
    e: NDArray[np.float64]
    p_hat: StochasticMatrix


@dataclass(frozen=True)
class StructuredRecovery:
    delta: float
    m_tilde: NDArray[np.float64]
    p_tilde: StochasticMatrix


# ---------------------------------------------------------------------------
# construction and elementary measures
# ---------------------------------------------------------------------------


def build_economy(transition: StochasticMatrix, sdf: SdfMatrix) -> MarkovPricingEconomy:
    """Assemble an economy from a transition matrix and discount factors.

    Prices are the elementwise product q_ij = s_ij * p_ij.  Discount factor
    entries paired with p_ij = 0 are replaced by 1 so they cannot leak into
    any downstream sum.
    """
    p = transition.entries
    s = sdf.entries
    if p.shape != s.shape:
        raise ValueError(
            f"dimension mismatch: transition {p.shape} vs sdf {s.shape}"
        )
    live = p > 0
    if np.any(s[live] <= 0):
        raise ValueError("discount factors must be positive where p_ij > 0")
    s_clean = np.where(live, s, 1.0)
    q = np.where(live, s_clean * p, 0.0)
    return MarkovPricingEconomy(
        transition=transition,
        sdf=SdfMatrix(s_clean),
        prices=PricingMatrix(q),
    )


def risk_neutral(prices: PricingMatrix) -> tuple[StochasticMatrix, NDArray[np.float64]]:
    """Risk-neutral transition probabilities and one-period bond prices.

    p_bar_ij = q_ij / q_bar_i with q_bar_i the row sum of Q.
    """
    q = prices.entries
    q_bar = q.sum(axis=1)
    p_bar = q / q_bar[:, None]
    return StochasticMatrix(p_bar), q_bar


def forward_measure(prices: PricingMatrix, horizon: int) -> StochasticMatrix:
    """Horizon-t forward measure: rows of Q^t scaled by the t-period bond price.

    Powers of Q are accumulated with a per-step row rescaling so that long
    horizons cannot overflow; row rescaling leaves the within-row ratios, and
    hence the normalized measure, unchanged.
    """
    if horizon < 1:
        raise ValueError("horizon must be a positive integer")
    q = prices.entries
    m = q.copy()
    for _ in range(horizon - 1):
        m = m @ q
        m /= np.max(m, axis=1, keepdims=True)
    return StochasticMatrix(m / m.sum(axis=1, keepdims=True))


# ---------------------------------------------------------------------------
# dominant eigenpair and recovery
# ---------------------------------------------------------------------------


def _power_iteration(
    a: NDArray[np.float64], tol: float, max_iter: int
) -> tuple[float, NDArray[np.float64]]:
    """Dominant eigenpair of a primitive nonnegative matrix.

    Iterates v <- A v with sup-norm renormalization and a Rayleigh-quotient
    eigenvalue estimate; converges geometrically at the spectral-gap rate.
    A stagnation check distinguishes a genuinely slow gap from a reached
    floating-point floor.
    """
    n = a.shape[0]
    v = np.ones(n)
    lam = 0.0
    stagnant = 0
    last_residual = np.inf
    for _ in range(max_iter):
        w = a @ v
        lam = float(v @ w) / float(v @ v)
        residual = float(np.max(np.abs(w - lam * v)))
        if residual <= tol * max(1.0, abs(lam)):
            v = w / np.max(w)
            return lam, v
        # Rayleigh-quotient stagnation: residual no longer improving means we
        # hit the attainable floor for this matrix; accept if near tolerance.
        if residual >= last_residual * (1.0 - 1e-15):
            stagnant += 1
            if stagnant > 50:
                if residual <= 1e-10 * max(1.0, abs(lam)):
                    return lam, w / np.max(w)
                raise ConvergenceError(
                    f"power iteration stagnated at residual {residual:.3e}"
                )
        else:
            stagnant = 0
        last_residual = residual
        v = w / np.max(w)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def perron_frobenius(
    prices: PricingMatrix, tol: float = 1e-14, max_iter: int = 1_000_000
) -> tuple[float, NDArray[np.float64], NDArray[np.float64]]:
    """Dominant eigentriple of the pricing matrix.

    Returns (eta_hat, e_hat, e_star): exp(eta_hat) is the spectral radius,
    e_hat the positive right eigenvector with max entry 1, e_star the left
    eigenvector scaled to sum to 1.  The eigenvalue is polished with the
    two-sided Rayleigh quotient, which squares the residual error.
    """
    q = prices.entries
    radius, e_hat = _power_iteration(q, tol, max_iter)
    _, e_star = _power_iteration(q.T, tol, max_iter)
    radius = float(e_star @ (q @ e_hat)) / float(e_star @ e_hat)
    if radius <= 0:
        raise NonPrimitiveMatrixError("spectral radius is not positive")
    return float(np.log(radius)), e_hat, e_star / e_star.sum()


def recover(
    source: Union[MarkovPricingEconomy, PricingMatrix],
    tol: float = 1e-14,
    max_iter: int = 1_000_000,
) -> RecoveredMeasure:
    """Long-term risk-neutral transition matrix implied by Arrow prices.

    p_hat_ij = exp(-eta_hat) q_ij e_hat_j / e_hat_i.  When a full economy is
    supplied, the martingale increments h_hat_ij = p_hat_ij / p_ij are filled
    in (1 on zero-probability transitions).  The recovered chain must be
    irreducible and aperiodic; a failure raises ErgodicityError since the
    probabilistic interpretation is lost outside that scope.
    """
    if isinstance(source, MarkovPricingEconomy):
        prices = source.prices
        transition: Optional[StochasticMatrix] = source.transition
    else:
        prices = source
        transition = None
    eta_hat, e_hat, e_star = perron_frobenius(prices, tol=tol, max_iter=max_iter)
    q = prices.entries
    p_hat = np.exp(-eta_hat) * q * (e_hat[None, :] / e_hat[:, None])
    p_hat /= p_hat.sum(axis=1, keepdims=True)  # remove residual round-off
    report = ergodicity_check(StochasticMatrix(p_hat))
    if not report.ok:
        raise ErgodicityError(
            "recovered transition matrix is not ergodic: "
            f"irreducible={report.irreducible}, aperiodic={report.aperiodic}"
        )
    h = None
    if transition is not None:
        p = transition.entries
        h = np.where(p > 0, p_hat / np.where(p > 0, p, 1.0), 1.0)
    return RecoveredMeasure(
        eta_hat=eta_hat,
        e_hat=e_hat,
        e_star=e_star,
        p_hat=StochasticMatrix(p_hat),
        h_increments=h,
    )


def sdf_decomposition(
    economy: MarkovPricingEconomy,
    path: Sequence[int],
    recovered: Optional[RecoveredMeasure] = None,
) -> DecompositionFactors:
    """Split the discount factor compounded along a state path into factors.

    Returns (trend, eigen_ratio, martingale) whose product equals the product
    of s_ij along the path: exp(eta_hat * t), e_hat(x_0)/e_hat(x_t), and the
    accumulated martingale increments.
    """
    states = list(path)
    if len(states) < 2:
        raise ValueError("path must contain at least two states")
    q = economy.prices.entries
    for a, b in zip(states[:-1], states[1:]):
        if q[a, b] == 0.0:
            raise ValueError(f"path step {a}->{b} has zero Arrow price")
    if recovered is None:
        recovered = recover(economy)
    t = len(states) - 1
    e = recovered.e_hat
    h = recovered.h_increments
    mart = 1.0
    for a, b in zip(states[:-1], states[1:]):
        mart *= h[a, b]
    return DecompositionFactors(
        trend=float(np.exp(recovered.eta_hat * t)),
        eigen_ratio=float(e[states[0]] / e[states[-1]]),
        martingale=float(mart),
    )


# ---------------------------------------------------------------------------
# long-maturity limits
# ---------------------------------------------------------------------------


def holding_period_return_limit(
    source: Union[MarkovPricingEconomy, PricingMatrix],
) -> NDArray[np.float64]:
    """Limiting one-period return on a bond of maturity -> infinity.

    R_inf[i, j] = exp(-eta_hat) e_hat_j / e_hat_i for the transition i -> j.
    """
    prices = source.prices if isinstance(source, MarkovPricingEconomy) else source
    eta_hat, e_hat, _ = perron_frobenius(prices)
    return np.exp(-eta_hat) * e_hat[None, :] / e_hat[:, None]


def forward_one_period_limit(
    source: Union[MarkovPricingEconomy, PricingMatrix], tau: int
) -> NDArray[np.float64]:
    """One-period transition implied by the tau-maturity forward measure.

    Entry (i, j) is q_ij * [Q^(tau-1) 1]_j / [Q^tau 1]_i; rows sum to one by
    construction, and as tau grows the matrix converges to the recovered
    transition matrix.  Bond-price iterates are rescaled each step (tracking
    the log scale) so that long maturities cannot overflow.
    """
    if tau < 2:
        raise ValueError("tau must be at least 2")
    prices = source.prices if isinstance(source, MarkovPricingEconomy) else source
    q = prices.entries
    b = np.ones(q.shape[0])
    log_scale = 0.0
    for _ in range(tau - 1):
        b = q @ b
        top = np.max(b)
        b /= top
        log_scale += np.log(top)
    b_prev, scale_prev = b, log_scale
    b = q @ b
    top = np.max(b)
    b /= top
    scale_now = log_scale + np.log(top)
    ratio = np.exp(scale_prev - scale_now)
    return q * (b_prev[None, :] / b[:, None]) * ratio


def _compounding_matrix(
    economy: MarkovPricingEconomy,
    cash_flow,
) -> tuple[NDArray[np.float64], Optional[NDArray[np.float64]]]:
    """Map a cash-flow spec onto (payoff vector, growth increment matrix)."""
    if isinstance(cash_flow, GaussianAugmentedFunctional):
        return np.ones(economy.n), conditional_increment_matrix(
            cash_flow, economy.transition
        )
    arr = np.asarray(cash_flow, dtype=float)
    if arr.ndim == 1:
        if np.any(arr <= 0):
            raise ValueError("payoff vector must be strictly positive")
        return arr, None
    if arr.ndim == 2:
        if np.any(arr <= 0):
            raise ValueError("growth increment matrix must be strictly positive")
        return np.ones(economy.n), arr
    raise ValueError("cash_flow must be a vector, a matrix, or a functional")


def yield_curve(
    economy: MarkovPricingEconomy,
    cash_flow,
    horizons: Iterable[int],
    measure: str = "P",
) -> NDArray[np.float64]:
    """Per-horizon, per-state yields on a stationary or growing cash flow.

    The horizon-t yield in state x is

        y_t(x) = (1/t) [ log E_m(payoff_t | x) - log E(S_t payoff_t | x) ]

    where E_m runs under the physical measure (``measure="P"``) or under the
    recovered measure (``measure="P_hat"``).  ``cash_flow`` is a positive
    payoff vector psi (claim psi(X_t)), an n x n matrix of conditional growth
    increments E[G_{t+1}/G_t | i, j], or a GaussianAugmentedFunctional which
    is reduced to such a matrix.  Prices are the same under both measures;
    only the forecasting measure of the numerator changes.

    Returns an array of shape (len(horizons), n).
    """
    horizons = list(horizons)
    if any(t < 1 for t in horizons):
        raise ValueError("horizons must be positive integers")
    psi, growth = _compounding_matrix(economy, cash_flow)
    q = economy.prices.entries
    if measure == "P":
        m = economy.transition.entries
    elif measure == "P_hat":
        m = recover(economy).p_hat.entries
    else:
        raise ValueError(f"unknown measure {measure!r}; use 'P' or 'P_hat'")
    if growth is not None:
        # Martingale increments of the recovery are chain-measurable, so the
        # conditional growth increments are identical under both measures.
        m = m * growth
        q = q * growth
        if not is_primitive(q):
            raise NonPrimitiveMatrixError(
                "growth-compounded pricing matrix is not primitive"
            )
    out = np.empty((len(horizons), economy.n))
    order = np.argsort(horizons)
    log_num = np.log(psi).copy()
    num = psi.copy()
    log_den = np.log(psi).copy()
    den = psi.copy()
    t_done = 0
    for idx in order:
        t = horizons[idx]
        while t_done < t:
            num = m @ num
            den = q @ den
            s_n, s_d = np.max(num), np.max(den)
            log_num += np.log(s_n)
            log_den += np.log(s_d)
            num /= s_n
            den /= s_d
            t_done += 1
        out[idx] = ((log_num + np.log(num)) - (log_den + np.log(den))) / t
    return out


def log_return_bound_check(
    economy: MarkovPricingEconomy,
    n_samples: int = 0,
    seed: Optional[int] = None,
) -> LogReturnBound:
    """Both sides of E[log R_inf | x] <= E[log S_t - log S_{t+1} | x].

    On a finite chain both conditional expectations are exact finite sums, so
    ``n_samples`` and ``seed`` are accepted for interface uniformity and
    ignored.
    """
    del n_samples, seed
    p = economy.transition.entries
    s = economy.sdf.entries
    r_inf = holding_period_return_limit(economy)
    live = p > 0
    lhs = np.sum(np.where(live, p * np.log(np.where(live, r_inf, 1.0)), 0.0), axis=1)
    rhs = np.sum(np.where(live, -p * np.log(np.where(live, s, 1.0)), 0.0), axis=1)
    return LogReturnBound(lhs=lhs, rhs=rhs)


# ---------------------------------------------------------------------------
# extended and structured recovery
# ---------------------------------------------------------------------------


def conditional_increment_matrix(
    functional: GaussianAugmentedFunctional, transition: StochasticMatrix
) -> NDArray[np.float64]:
    """E[exp(log-increment) | current state i, next state j] as an n x n matrix.

    Conditioning on the realized transition fixes the chain-innovation block
    at (u_j - P_i .) and leaves the Gaussian block standard normal, so the
    conditional mean is the chain term times exp(half the Gaussian variance).
    """
    p = transition.entries
    n = transition.n
    if functional.n != n:
        raise ValueError("functional dimension does not match the chain")
    c = functional.chain_loading
    g = functional.gaussian_loading
    innov = np.eye(n)[None, :, :] - p[:, None, :]  # innov[i, j, :] = u_j - P_i
    chain_part = np.einsum("ijk,ik->ij", innov, c)
    gauss_var = np.sum(g * g, axis=1)
    return np.exp(functional.beta_bar[:, None] + chain_part + 0.5 * gauss_var[:, None])


def _normalize_y_specs(y_spec, zeta):
    if isinstance(y_spec, GaussianAugmentedFunctional):
        specs = [y_spec]
    else:
        specs = list(y_spec)
    z = np.atleast_1d(np.asarray(zeta, dtype=float))
    if z.shape[0] != len(specs):
        raise ValueError(
            f"zeta has length {z.shape[0]} but {len(specs)} cash-flow blocks given"
        )
    return specs, z


def extended_pf_family(
    economy: MarkovPricingEconomy,
    y_spec,
    zeta,
    sdf_gaussian_loading: Optional[NDArray[np.float64]] = None,
) -> ExtendedRecovery:
    """Member of the shock-augmented eigenfunction family indexed by zeta.

    The candidate eigenfunctions have the form exp(zeta . y) e(x): the analyst
    hypothesizes that the discount factor loads on the increments of the
    cumulative process Y with coefficient vector ``zeta`` and inverts Arrow
    prices under that hypothesis.  Concretely the op prices the
    exp(-zeta . dY)-weighted Arrow claims,

        Q_zeta[i, j] = E[ (S_{t+1}/S_t) exp(-zeta . dY_{t+1}) 1{X_{t+1}=j} | X_t=i ],

    solves the dominant eigenpair of Q_zeta, and returns the transition matrix
    induced after the Y-loading has been absorbed.  Given the economy's Arrow
    prices q_ij the weighting is a Gaussian moment-generating correction:

        Q_zeta[i, j] = q_ij
            * exp(-zeta . (mu_y[i] + C_y[i] (u_j - P_i.)))       # chain block
            * exp(0.5 zeta' Sigma_yy[i] zeta - zeta' Sigma_ys[i])  # Gaussian block

    with Sigma_yy[i] the Gaussian covariance of dY given state i and
    Sigma_ys[i] the covariance between dY and the log discount-factor
    increment (``sdf_gaussian_loading``, an n x k matrix, zero by default).
    At zeta = 0 this reduces exactly to ``recover``.
    """
    specs, z = _normalize_y_specs(y_spec, zeta)
    n = economy.n
    p = economy.transition.entries
    q = economy.prices.entries
    k = specs[0].k
    for s in specs:
        if s.n != n or s.k != k:
            raise ValueError("all Y blocks must share the chain size and shock count")
    if sdf_gaussian_loading is None:
        a_s = np.zeros((n, k))
    else:
        a_s = np.asarray(sdf_gaussian_loading, dtype=float)
        if a_s.shape != (n, k):
            raise ValueError(f"sdf_gaussian_loading must have shape {(n, k)}")

    mu_y = np.stack([s.beta_bar for s in specs])  # (k', n)
    b = np.stack([s.gaussian_loading for s in specs])  # (k', n, k)
    c = np.stack([s.chain_loading for s in specs])  # (k', n, n)

    innov = np.eye(n)[None, :, :] - p[:, None, :]
    chain_term = np.einsum("r,rik,ijk->ij", z, c, innov)
    sigma_yy = np.einsum("rik,sik->irs", b, b)  # (n, k', k')
    sigma_ys = np.einsum("rik,ik->ir", b, a_s)  # (n, k')
    row_exponent = (
        -mu_y.T @ z + 0.5 * np.einsum("r,irs,s->i", z, sigma_yy, z) - sigma_ys @ z
    )
    with np.errstate(over="raise"):
        try:
            q_zeta = q * np.exp(row_exponent[:, None] - chain_term)
        except FloatingPointError as exc:
            raise OverflowError(
                "moment-generating correction overflowed; zeta too large"
            ) from exc
    modified = PricingMatrix(q_zeta)
    eta, e, _ = perron_frobenius(modified)
    p_hat = np.exp(-eta) * q_zeta * (e[None, :] / e[:, None])
    p_hat /= p_hat.sum(axis=1, keepdims=True)
    report = ergodicity_check(StochasticMatrix(p_hat))
    if not report.ok:
        raise ErgodicityError("zeta-indexed recovered transition is not ergodic")
    return ExtendedRecovery(eta=eta, e=e, p_hat=StochasticMatrix(p_hat))


def ross_extended_economy(
    transition: StochasticMatrix,
    m_tilde: NDArray[np.float64],
    delta: float,
    zeta,
    y_spec,
) -> tuple[MarkovPricingEconomy, NDArray[np.float64]]:
    """Forward-construct an economy whose SDF loads on Y with known zeta.

    The subjective discount factor is exp(-delta) exp(zeta . dY) m_j / m_i;
    Arrow prices integrate out the Gaussian block of dY.  Returns the economy
    together with the implied Gaussian loading of the log SDF (to be passed to
    ``extended_pf_family``).  Inverting at the construction zeta returns the
    construction transition matrix exactly.
    """
    specs, z = _normalize_y_specs(y_spec, zeta)
    m = np.asarray(m_tilde, dtype=float)
    if np.any(m <= 0):
        raise ValueError("m_tilde must be strictly positive")
    n = transition.n
    p = transition.entries
    k = specs[0].k
    mu_y = np.stack([s.beta_bar for s in specs])
    b = np.stack([s.gaussian_loading for s in specs])
    c = np.stack([s.chain_loading for s in specs])

    a_s = np.einsum("r,rik->ik", z, b)  # Gaussian loading of log S
    innov = np.eye(n)[None, :, :] - p[:, None, :]
    chain_term = np.einsum("r,rik,ijk->ij", z, c, innov)
    row_exponent = mu_y.T @ z + 0.5 * np.sum(a_s * a_s, axis=1)
    s = (
        np.exp(-delta)
        * (m[None, :] / m[:, None])
        * np.exp(chain_term + row_exponent[:, None])
    )
    economy = build_economy(transition, SdfMatrix(s))
    return economy, a_s


def structured_recover(
    source: Union[MarkovPricingEconomy, PricingMatrix],
    y_r_increments: NDArray[np.float64],
) -> StructuredRecovery:
    """Recovery given a pre-specified growth component of the discount factor.

    ``y_r_increments`` holds g_ij = E[Y^r_{t+1}/Y^r_t | i, j] for a known
    multiplicative functional Y^r assumed to carry the entire martingale
    component of the discount factor.  The dominant eigenpair of
    [q_ij / g_ij] then has eigenvalue exp(-delta) and eigenvector 1/m, and

        p_tilde_ij = q_ij * exp(delta) * (m_i / m_j) / g_ij

    is the recovered subjective transition matrix.
    """
    prices = source.prices if isinstance(source, MarkovPricingEconomy) else source
    q = prices.entries
    g = np.asarray(y_r_increments, dtype=float)
    if g.shape != q.shape:
        raise ValueError("y_r_increments shape does not match the pricing matrix")
    if np.any((g <= 0) & (q > 0)):
        raise ValueError("y_r_increments must be positive wherever q_ij > 0")
    ratio = np.where(q > 0, q / np.where(g > 0, g, 1.0), 0.0)
    modified = PricingMatrix(ratio)
    eta, e, _ = perron_frobenius(modified)
    m = 1.0 / e
    p_tilde = np.exp(-eta) * ratio * (e[None, :] / e[:, None])
    p_tilde /= p_tilde.sum(axis=1, keepdims=True)
    return StructuredRecovery(
        delta=-eta, m_tilde=m, p_tilde=StochasticMatrix(p_tilde)
    )


# ---------------------------------------------------------------------------
# chain diagnostics
# ---------------------------------------------------------------------------


def ergodicity_check(transition: StochasticMatrix) -> ErgodicityReport:
    """Irreducibility and aperiodicity report for a finite chain.

    Irreducibility is strong connectivity of the positive-transition graph.
    The period is the gcd of (level[u] + 1 - level[v]) over edges u -> v of a
    BFS tree, which equals the gcd of all cycle lengths through the root.  A
    finite irreducible chain is automatically positive recurrent.
    """
    a = transition.entries > 0
    n_classes, _ = connected_components(a, directed=True, connection="strong")
    irreducible = n_classes == 1
    period = 0
    if irreducible:
        n = a.shape[0]
        level = np.full(n, -1)
        level[0] = 0
        frontier = [0]
        while frontier:
            nxt = []
            for u in frontier:
                for v in np.flatnonzero(a[u]):
                    if level[v] < 0:
                        level[v] = level[u] + 1
                        nxt.append(v)
            frontier = nxt
        rows, cols = np.nonzero(a)
        deltas = level[rows] + 1 - level[cols]
        period = int(np.gcd.reduce(deltas))
    return ErgodicityReport(
        irreducible=irreducible,
        aperiodic=irreducible and period == 1,
        n_classes=int(n_classes),
        period=period,
    )


def enumerate_positive_eigen(
    prices: PricingMatrix, zero_tol: float = 1e-10
) -> list[PositiveEigenCandidate]:
    """All eigenpairs of Q with a (numerically) single-signed real eigenvector.

    Dense eigendecomposition; eigenvectors whose real entries all share one
    sign are rescaled to be positive with max entry 1.  Entries below
    ``zero_tol`` in magnitude do not determine the sign; a candidate that
    needed that exclusion is flagged ``borderline`` rather than dropped.  For
    a primitive matrix exactly one non-borderline candidate exists.
    """
    q = prices.entries
    vals, vecs = np.linalg.eig(q)
    out: list[PositiveEigenCandidate] = []
    for lam, vec in zip(vals, vecs.T):
        if abs(lam.imag) > zero_tol * max(1.0, abs(lam.real)):
            continue
        if lam.real <= 0:
            continue
        v = vec.real
        if np.max(np.abs(vec.imag)) > zero_tol * np.max(np.abs(v), initial=0.0):
            continue
        big = np.abs(v) >= zero_tol * np.max(np.abs(v))
        signs = np.sign(v[big])
        if signs.size == 0 or np.any(signs != signs[0]):
            continue
        v = v * signs[0]
        out.append(
            PositiveEigenCandidate(
                eta=float(np.log(lam.real)),
                vector=v / np.max(v),
                borderline=bool(np.any(~big)),
            )
        )
    return out


def stationary_distribution(transition: StochasticMatrix) -> NDArray[np.float64]:
    """Stationary distribution pi with pi' P = pi', sum(pi) = 1.

    Solved as a dense linear system with the normalization replacing one
    redundant balance equation; requires an irreducible chain.
    """
    report = ergodicity_check(transition)
    if not report.irreducible:
        raise ErgodicityError("stationary distribution requires an irreducible chain")
    p = transition.entries
    n = transition.n
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def h0_stationary(
    economy: MarkovPricingEconomy, recovered: Optional[RecoveredMeasure] = None
) -> NDArray[np.float64]:
    """Initial martingale level making the chain stationary under the new measure.

    With pi the stationary law under the original transition matrix and
    pi_hat under the recovered one, the initializer h0(x_i) = pi_hat_i / pi_i
    has unit mean under pi and shifts the time-0 distribution to pi_hat.
    """
    if recovered is None:
        recovered = recover(economy)
    pi = stationary_distribution(economy.transition)
    pi_hat = stationary_distribution(recovered.p_hat)
    return pi_hat / pi


# ---------------------------------------------------------------------------
# JSON interface
# ---------------------------------------------------------------------------


def economy_from_dict(payload: dict) -> Union[MarkovPricingEconomy, PricingMatrix]:
    """Build an economy (or bare pricing matrix) from the JSON wire format.

    Accepts {"n": ..., "transition": [[...]], "sdf": [[...]]} for a full
    economy or {"prices": [[...]]} for Arrow prices alone.
    """
    if "prices" in payload:
        return PricingMatrix(np.asarray(payload["prices"], dtype=float))
    try:
        transition = np.asarray(payload["transition"], dtype=float)
        sdf = np.asarray(payload["sdf"], dtype=float)
    except KeyError as exc:
        raise ValueError(f"economy JSON missing field {exc}") from exc
    n = payload.get("n", transition.shape[0])
    if transition.shape != (n, n) or sdf.shape != (n, n):
        raise ValueError("economy matrices do not match the declared size")
    return build_economy(StochasticMatrix(transition), SdfMatrix(sdf))


def economy_to_dict(economy: MarkovPricingEconomy) -> dict:
    return {
        "n": economy.n,
        "transition": economy.transition.entries.tolist(),
        "sdf": economy.sdf.entries.tolist(),
    }


def recovery_to_dict(recovered: RecoveredMeasure) -> dict:
    return {
        "eta_hat": recovered.eta_hat,
        "e_hat": recovered.e_hat.tolist(),
        "e_star": recovered.e_star.tolist(),
        "p_hat": recovered.p_hat.entries.tolist(),
        "h_increments": None
        if recovered.h_increments is None
        else recovered.h_increments.tolist(),
    }


def load_economy(path) -> Union[MarkovPricingEconomy, PricingMatrix]:
    with open(path, "r", encoding="utf-8") as fh:
        return economy_from_dict(json.load(fh))
