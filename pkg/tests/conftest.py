"""Shared fixtures: canonical two-state economies and random-economy factories."""

import numpy as np
import pytest

from recovery_lab import markov as mk
from recovery_lab import preferences as pref

TWO_STATE_P = np.array([[0.9, 0.1], [0.1, 0.9]])


def random_transition(rng, n, floor=0.02):
    """Random strictly positive transition matrix (hence primitive)."""
    raw = rng.dirichlet(np.ones(n), size=n) + floor
    return mk.StochasticMatrix(raw / raw.sum(axis=1, keepdims=True))


def random_power_economy(rng, n=None):
    """Economy generated by a random power-utility investor."""
    n = n or int(rng.integers(2, 11))
    transition = random_transition(rng, n)
    spec = pref.PowerUtilitySpec(
        delta=float(rng.uniform(0.005, 0.08)),
        gamma=float(rng.uniform(0.5, 8.0)),
        g_c=float(rng.uniform(-0.01, 0.03)),
        c=rng.uniform(0.5, 3.0, size=n),
    )
    return mk.build_economy(transition, pref.power_sdf(spec)), spec


def random_economy(rng, n=None):
    """Economy with unstructured positive discount factors."""
    n = n or int(rng.integers(2, 8))
    transition = random_transition(rng, n)
    sdf = mk.SdfMatrix(np.exp(rng.normal(-0.03, 0.25, size=(n, n))))
    return mk.build_economy(transition, sdf)


@pytest.fixture
def two_state_transition():
    return mk.StochasticMatrix(TWO_STATE_P)


@pytest.fixture
def power_spec():
    return pref.PowerUtilitySpec(delta=0.02, gamma=2.0, g_c=0.0, c=np.array([1.0, 2.0]))


@pytest.fixture
def power_economy(two_state_transition, power_spec):
    return mk.build_economy(two_state_transition, pref.power_sdf(power_spec))


@pytest.fixture
def recursive_spec():
    return pref.RecursiveUtilitySpec(
        delta=0.02, gamma=10.0, g_c=0.0, c=np.array([1.0, 2.0])
    )


@pytest.fixture
def recursive_economy(two_state_transition, recursive_spec):
    value = pref.solve_continuation_value(recursive_spec, two_state_transition)
    sdf = pref.recursive_sdf(recursive_spec, two_state_transition, value)
    return mk.build_economy(two_state_transition, sdf)


@pytest.fixture
def recursive_value(two_state_transition, recursive_spec):
    return pref.solve_continuation_value(recursive_spec, two_state_transition)
