"""Square-root diffusion with state-dependent risk prices.

The state follows dX = -kappa (X - mu_bar) dt + sigma_bar sqrt(X) dW and the
log discount factor evolves as

    d log S = beta_bar dt - 0.5 X alpha_bar^2 dt + sqrt(X) alpha_bar dW.

Candidate eigenfunctions e(x) = exp(upsilon x) must make
exp(-eta t) S_t e(X_t) a (local) martingale, which pins upsilon to the roots
of   upsilon (-kappa + 0.5 upsilon sigma_bar^2 + sigma_bar alpha_bar) = 0
and eta to the constant term of the same drift identity.  Exactly one root
induces mean-reverting dynamics for X under the associated change of measure
(generic case); that root is the valid recovery.  A Monte Carlo oracle
verifies the martingale property of each candidate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .exceptions import DegenerateSelectionError

__all__ = [
    "SquareRootModel",
    "EigenCandidate",
    "SimulationResult",
    "eigen_candidates",
    "select_ergodic",
    "simulate",
    "model_from_dict",
    "model_to_dict",
    "results_to_csv",
]


@dataclass(frozen=True)
class SquareRootModel:
    """kappa, mu_bar, sigma_bar: state dynamics; alpha_bar, beta_bar: discount
    factor risk-price loading and drift constant (beta_bar < 0 so that the
    instantaneous riskless rate -beta_bar is positive)."""

    kappa: float
    mu_bar: float
    sigma_bar: float
    alpha_bar: float
    beta_bar: float

    def __post_init__(self):
        if self.kappa <= 0 or self.mu_bar <= 0 or self.sigma_bar <= 0:
            raise ValueError("kappa, mu_bar and sigma_bar must be positive")
        if self.beta_bar >= 0:
            raise ValueError("beta_bar must be negative")
        if 2.0 * self.kappa * self.mu_bar < self.sigma_bar**2:
            warnings.warn(
                "2 kappa mu_bar < sigma_bar^2: the origin is attainable",
                RuntimeWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class EigenCandidate:
    """One (upsilon, eta) root with the mean reversion it induces on X."""

    upsilon: float
    eta: float
    kappa_new: float

    @property
    def ergodic(self) -> bool:
        return self.kappa_new > 0


@dataclass(frozen=True)
class SimulationResult:
    x_mean: float
    x_var: float
    n_nan: int
    martingale_mean: Optional[float] = None
    martingale_se: Optional[float] = None
    discounted_bond_mean: Optional[float] = None
    discounted_bond_se: Optional[float] = None


def drift_identity_residual(model: SquareRootModel, cand: EigenCandidate) -> tuple[float, float]:
    """(constant, x-coefficient) residuals of the martingale drift identity."""
    const = model.beta_bar + cand.upsilon * model.kappa * model.mu_bar - cand.eta
    x_coef = (
        -0.5 * model.alpha_bar**2
        - cand.upsilon * model.kappa
        + 0.5 * (cand.upsilon * model.sigma_bar + model.alpha_bar) ** 2
    )
    return const, x_coef


def eigen_candidates(model: SquareRootModel) -> list[EigenCandidate]:
    """Both exponential eigenfunction candidates.

    upsilon = 0 reproduces the risk-neutral dynamics (kappa - alpha sigma);
    the nonzero root upsilon = (2 kappa - 2 alpha sigma) / sigma^2 flips the
    sign of that mean reversion.  Each eta comes from the constant term
    eta = beta_bar + upsilon kappa mu_bar of the drift identity.
    """
    k, s, a = model.kappa, model.sigma_bar, model.alpha_bar
    out = []
    for upsilon in (0.0, (2.0 * k - 2.0 * a * s) / s**2):
        eta = model.beta_bar + upsilon * k * model.mu_bar
        kappa_new = k - s * a - upsilon * s**2
        cand = EigenCandidate(upsilon=upsilon, eta=eta, kappa_new=kappa_new)
        const, x_coef = drift_identity_residual(model, cand)
        assert abs(const) < 1e-12 and abs(x_coef) < 1e-12
        out.append(cand)
    return out


def select_ergodic(candidates: list[EigenCandidate]) -> EigenCandidate:
    """The candidate whose induced dynamics mean-revert (kappa_new > 0)."""
    ergodic = [c for c in candidates if c.kappa_new > 0]
    if any(c.kappa_new == 0 for c in candidates):
        raise DegenerateSelectionError(
            "kappa_new = 0 knife edge: no candidate induces mean reversion"
        )
    if len(ergodic) != 1:
        raise DegenerateSelectionError(
            f"expected exactly one mean-reverting candidate, found {len(ergodic)}"
        )
    return ergodic[0]


def _euler_paths(
    model: SquareRootModel,
    kappa_eff: float,
    horizon: float,
    dt: float,
    n_paths: int,
    rng: np.random.Generator,
    x0: float,
    accumulate_sdf: bool,
):
    """Full-truncation Euler ensemble; negative states are clipped only inside
    the drift/diffusion/integrand evaluations, never in the state itself.

    The constant drift term stays kappa * mu_bar under every candidate
    measure; only the linear mean-reversion coefficient changes.
    """
    n_steps = int(round(horizon / dt))
    x = np.full(n_paths, x0)
    log_s = np.zeros(n_paths) if accumulate_sdf else None
    const = model.kappa * model.mu_bar
    sqrt_dt = np.sqrt(dt)
    for _ in range(n_steps):
        x_pos = np.maximum(x, 0.0)
        root = np.sqrt(x_pos)
        dw = sqrt_dt * rng.standard_normal(n_paths)
        if accumulate_sdf:
            log_s += (
                model.beta_bar - 0.5 * model.alpha_bar**2 * x_pos
            ) * dt + model.alpha_bar * root * dw
        x = x + (const - kappa_eff * x_pos) * dt + model.sigma_bar * root * dw
    return x, log_s, n_steps * dt


def simulate(
    model: SquareRootModel,
    measure: Union[str, EigenCandidate],
    horizon: float = 1.0,
    dt: float = 1.0 / 250.0,
    n_paths: int = 100_000,
    seed: int = 0,
    x0: Optional[float] = None,
) -> SimulationResult:
    """Ensemble statistics of X under a measure, plus discount-factor checks.

    ``measure`` is ``"physical"`` or an EigenCandidate (X is then simulated
    under the mean reversion that candidate induces).  Discount-factor paths
    only exist under the physical measure, so the discounted bond price
    estimate E[S_t] is reported for physical runs, and the martingale check

        E[ exp(-eta t) S_t e(X_t) ] / e(x0)  ~  1

    for candidate runs is computed on a companion physical ensemble drawn
    from a deterministic sub-seed.  Non-finite paths are dropped and counted.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x_start = model.mu_bar if x0 is None else x0
    rng = np.random.default_rng(seed)
    if isinstance(measure, EigenCandidate):
        kappa_eff = measure.kappa_new
        x, _, _ = _euler_paths(
            model, kappa_eff, horizon, dt, n_paths, rng, x_start, False
        )
        ok = np.isfinite(x)
        # companion physical ensemble for the martingale expectation
        rng_phys = np.random.default_rng(np.random.SeedSequence((seed, 1)))
        xp, log_s, t_eff = _euler_paths(
            model, model.kappa, horizon, dt, n_paths, rng_phys, x_start, True
        )
        mart = np.exp(
            -measure.eta * t_eff
            + log_s
            + measure.upsilon * (np.maximum(xp, 0.0) - x_start)
        )
        ok_m = np.isfinite(mart)
        m_mean = float(np.mean(mart[ok_m]))
        m_se = float(np.std(mart[ok_m], ddof=1) / np.sqrt(ok_m.sum()))
        return SimulationResult(
            x_mean=float(np.mean(x[ok])),
            x_var=float(np.var(x[ok], ddof=1)),
            n_nan=int(np.sum(~ok) + np.sum(~ok_m)),
            martingale_mean=m_mean,
            martingale_se=m_se,
        )
    if measure != "physical":
        raise ValueError("measure must be 'physical' or an EigenCandidate")
    x, log_s, _ = _euler_paths(
        model, model.kappa, horizon, dt, n_paths, rng, x_start, True
    )
    s = np.exp(log_s)
    ok = np.isfinite(x) & np.isfinite(s)
    return SimulationResult(
        x_mean=float(np.mean(x[ok])),
        x_var=float(np.var(x[ok], ddof=1)),
        n_nan=int(np.sum(~ok)),
        discounted_bond_mean=float(np.mean(s[ok])),
        discounted_bond_se=float(np.std(s[ok], ddof=1) / np.sqrt(ok.sum())),
    )


_MODEL_FIELDS = ("kappa", "mu_bar", "sigma_bar", "alpha_bar", "beta_bar")


def model_from_dict(payload: dict) -> SquareRootModel:
    try:
        return SquareRootModel(**{k: float(payload[k]) for k in _MODEL_FIELDS})
    except KeyError as exc:
        raise ValueError(f"model JSON missing field {exc}") from exc


def model_to_dict(model: SquareRootModel) -> dict:
    return {k: getattr(model, k) for k in _MODEL_FIELDS}


def results_to_csv(rows: list[tuple[str, SimulationResult]], path) -> None:
    """Write labeled path-ensemble statistics as a CSV table."""
    fields = (
        "x_mean",
        "x_var",
        "n_nan",
        "martingale_mean",
        "martingale_se",
        "discounted_bond_mean",
        "discounted_bond_se",
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("measure," + ",".join(fields) + "\n")
        for label, res in rows:
            vals = [getattr(res, f) for f in fields]
            fh.write(
                label
                + ","
                + ",".join("" if v is None else f"{v:.17g}" for v in vals)
                + "\n"
            )
