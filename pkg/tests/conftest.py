import math

import numpy as np
import pytest

from ofu_lqg import CostParams, LqgSystem
from ofu_lqg.riccati import synthesize
from ofu_lqg.system import is_controllable, is_observable, spectral_radius


@pytest.fixture
def scalar_system():
    return LqgSystem(A=[[0.5]], B=[[1.0]], C=[[1.0]], sigma_w=1.0, sigma_z=1.0)


@pytest.fixture
def scalar_cost():
    return CostParams(Q=[[1.0]], R=[[1.0]])


@pytest.fixture
def scalar_oracle():
    """Closed-form synthesis values for the scalar benchmark A=0.5, B=C=Q=R=1.

    Both Riccati equations reduce to the quadratic X^2 - 0.25 X - 1 = 0.
    """
    P = (0.25 + math.sqrt(4.0625)) / 2
    Sigma = P
    L = Sigma / (Sigma + 1.0)
    K = L * 0.5
    Sigma_bar = Sigma / (Sigma + 1.0)
    J_star = Sigma_bar + P * (Sigma - Sigma_bar) + 1.0
    return {
        "P": P,
        "Sigma": Sigma,
        "L": L,
        "K": K,
        "Sigma_bar": Sigma_bar,
        "J_star": J_star,
    }


def random_stable_system(
    rng, n=None, m=None, p=None, rho_max=0.9, sigma_w=1.0, sigma_z=1.0
):
    """Random stable system; redraws until controllable and observable."""
    n = n if n is not None else int(rng.integers(1, 5))
    m = m if m is not None else int(rng.integers(1, 4))
    p = p if p is not None else int(rng.integers(1, 4))
    for _ in range(200):
        A = rng.standard_normal((n, n))
        radius = spectral_radius(A)
        if radius > 0:
            A *= rng.uniform(0.3, rho_max) / radius
        B = rng.standard_normal((n, p))
        C = rng.standard_normal((m, n))
        if is_controllable(A, B) and is_observable(A, C):
            return LqgSystem(A=A, B=B, C=C, sigma_w=sigma_w, sigma_z=sigma_z)
    raise RuntimeError("failed to draw a controllable + observable system")


def random_contractible_system(rng, cost_dims=True, **kwargs):
    """Random stable system whose optimal closed loops are contractive."""
    for _ in range(200):
        sys = random_stable_system(rng, **kwargs)
        cost = CostParams(Q=np.eye(sys.m), R=np.eye(sys.p))
        try:
            synthesize(sys, cost)
        except Exception:
            continue
        return (sys, cost) if cost_dims else sys
    raise RuntimeError("failed to draw a contractible system")
