"""Structural discount-factor matrices from consumption-based preferences.

Two preference families over a trend-stationary consumption process
C_t = exp(g_c t) c(X_t) on a finite chain:

* power utility, whose marginal rate of substitution is
  s_ij = exp(-delta - gamma g_c) (c_j / c_i)^(-gamma), and

* recursive (Kreps-Porteus) utility with unitary elasticity of substitution,
  where the detrended continuation values v solve the fixed point

      v_i = (1 - e^{-delta}) log c_i
            + (e^{-delta} / (1 - gamma)) log( P_i exp[(1-gamma) v] )
            + e^{-delta} g_c

  and the discount factor picks up a forward-looking adjustment
  v*_j / (P_i v*) with v* = exp[(1-gamma) v].

Power utility always recovers the construction transition matrix; recursive
utility with gamma != 1 does not, because the continuation-value adjustment
is a nondegenerate martingale increment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .exceptions import ConvergenceError
from .markov import SdfMatrix, StochasticMatrix

__all__ = [
    "PowerUtilitySpec",
    "RecursiveUtilitySpec",
    "ValueFunction",
    "power_sdf",
    "solve_continuation_value",
    "recursive_sdf",
    "recursive_martingale",
    "spec_from_dict",
    "spec_to_dict",
]


def _validate_consumption(c) -> NDArray[np.float64]:
    arr = np.atleast_1d(np.asarray(c, dtype=float))
    if np.any(arr <= 0):
        raise ValueError("state consumptions must be strictly positive")
    return arr


@dataclass(frozen=True)
class PowerUtilitySpec:
    """delta: discount rate >= 0, gamma: risk aversion > 0, g_c: trend growth,
    c: strictly positive state consumptions."""

    delta: float
    gamma: float
    g_c: float
    c: NDArray[np.float64]

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        object.__setattr__(self, "c", _validate_consumption(self.c))


@dataclass(frozen=True)
class RecursiveUtilitySpec:
    """Like PowerUtilitySpec but delta must be strictly positive: the
    continuation-value recursion is a contraction with modulus e^{-delta}."""

    delta: float
    gamma: float
    g_c: float
    c: NDArray[np.float64]

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be strictly positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be strictly positive")
        object.__setattr__(self, "c", _validate_consumption(self.c))


@dataclass(frozen=True)
class ValueFunction:
    """Detrended continuation values v, v* = exp[(1-gamma) v], and the sup-norm
    residual of the fixed-point equation at v."""

    v: NDArray[np.float64]
    v_star: NDArray[np.float64]
    residual: float


def power_sdf(spec: PowerUtilitySpec) -> SdfMatrix:
    """Discount factor matrix of a power-utility investor.

    s_ij = exp(-delta - gamma g_c) (c_j)^(-gamma) / (c_i)^(-gamma).
    """
    c = spec.c
    ratio = (c[None, :] / c[:, None]) ** (-spec.gamma)
    return SdfMatrix(np.exp(-spec.delta - spec.gamma * spec.g_c) * ratio)


def _recursion_rhs(
    v: NDArray[np.float64],
    spec: RecursiveUtilitySpec,
    p: NDArray[np.float64],
) -> NDArray[np.float64]:
    beta = np.exp(-spec.delta)
    base = (1.0 - beta) * np.log(spec.c) + beta * spec.g_c
    if spec.gamma == 1.0:
        return base + beta * (p @ v)
    w = (1.0 - spec.gamma) * v
    m = np.max(w)
    # log-sum-exp guard: (1-gamma) v can be large in magnitude for big gamma
    risk_adj = np.log(p @ np.exp(w - m)) + m
    return base + beta / (1.0 - spec.gamma) * risk_adj


def solve_continuation_value(
    spec: RecursiveUtilitySpec,
    transition: StochasticMatrix,
    tol: float = 1e-13,
    max_iter: int = 10_000_000,
) -> ValueFunction:
    """Solve the continuation-value fixed point.

    gamma = 1 is handled as an exact linear system (the risk-adjusted term
    degenerates to the conditional mean); otherwise plain fixed-point
    iteration, which contracts with modulus e^{-delta}.
    """
    p = transition.entries
    beta = np.exp(-spec.delta)
    if spec.gamma == 1.0:
        rhs = (1.0 - beta) * np.log(spec.c) + beta * spec.g_c
        v = np.linalg.solve(np.eye(transition.n) - beta * p, rhs)
    else:
        v = np.log(spec.c).astype(float)
        for _ in range(max_iter):
            v_next = _recursion_rhs(v, spec, p)
            if np.max(np.abs(v_next - v)) <= tol:
                v = v_next
                break
            v = v_next
        else:
            raise ConvergenceError(
                "continuation-value iteration did not converge; "
                "delta may be too close to zero"
            )
    residual = float(np.max(np.abs(v - _recursion_rhs(v, spec, p))))
    v_star = np.exp((1.0 - spec.gamma) * v)
    return ValueFunction(v=v, v_star=v_star, residual=residual)


def recursive_sdf(
    spec: RecursiveUtilitySpec,
    transition: StochasticMatrix,
    value: ValueFunction,
) -> SdfMatrix:
    """Discount factor matrix of the recursive-utility investor.

    s_ij = exp(-(delta + g_c)) (c_i / c_j) (v*_j / (P_i v*)).
    """
    c = spec.c
    p = transition.entries
    pv = p @ value.v_star
    s = (
        np.exp(-(spec.delta + spec.g_c))
        * (c[:, None] / c[None, :])
        * (value.v_star[None, :] / pv[:, None])
    )
    return SdfMatrix(s)


def recursive_martingale(
    transition: StochasticMatrix, value: ValueFunction
) -> NDArray[np.float64]:
    """Forward-looking martingale increments v*_j / (P_i v*).

    Each row has conditional expectation one under the transition matrix by
    construction; the increments are identically one iff v* is constant.
    """
    pv = transition.entries @ value.v_star
    return value.v_star[None, :] / pv[:, None]


def spec_from_dict(payload: dict):
    """Build a preference specification from its JSON form.

    Expected shape: {"type": "power"|"recursive", "delta": ..., "gamma": ...,
    "g_c": ..., "c": [...]}.
    """
    kind = payload.get("type")
    if kind not in ("power", "recursive"):
        raise ValueError(f"unknown preference type {kind!r}")
    cls = PowerUtilitySpec if kind == "power" else RecursiveUtilitySpec
    try:
        return cls(
            delta=float(payload["delta"]),
            gamma=float(payload["gamma"]),
            g_c=float(payload["g_c"]),
            c=np.asarray(payload["c"], dtype=float),
        )
    except KeyError as exc:
        raise ValueError(f"preference JSON missing field {exc}") from exc


def spec_to_dict(spec) -> dict:
    return {
        "type": "power" if isinstance(spec, PowerUtilitySpec) else "recursive",
        "delta": spec.delta,
        "gamma": spec.gamma,
        "g_c": spec.g_c,
        "c": spec.c.tolist(),
    }
