"""Benchmark Gaussian affine term-structure model with three latent factors.

The state follows a vector Ornstein-Uhlenbeck process
``dX = K (mu - X) dt + Sigma dW`` with diagonal mean reversion, ``mu = 0``
and a lower-triangular ``Sigma`` whose diagonal is pinned at 0.01.  Nominal
and real short rates load affinely on the state,
``r_J = rho0_J + <rho1_J, X>``, and bond prices take the exponential-affine
form ``P_J(t, T) = exp(A_J(tau) + <B_J(tau), X(t)>)`` where (A, B) solve

    B' = -K^T B - rho1_J,          B(0) = 0,
    A' = <B, Sigma lambda0> + 0.5 |Sigma^T B|^2 - rho0_J,   A(0) = 0,

integrated with a classical fourth-order Runge-Kutta step.  The market price
of risk intercept ``lambda0`` absorbs the risk-neutral drift adjustment.
The free parameters are the 3 mean reversions, 3 sub-diagonal volatilities,
2 short-rate intercepts, 6 loadings, 3 risk premia and the 3 state values:
20 in total for a cross-sectional fit.

The implied zero-coupon inflation swap rate over ``tau = T - t0`` is

    exp((A_R - A_N)/tau + <(B_R - B_N)/tau, X>) - 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PricingError

__all__ = [
    "AffineParams",
    "AffineSolution",
    "solve_loadings",
    "bond_price_affine",
    "zciis_rate_affine",
]

N_FACTORS = 3
SIGMA_DIAG = 0.01


@dataclass(frozen=True)
class AffineParams:
    """Benchmark-model coefficients.

    kappa: the three positive diagonal mean-reversion speeds.
    sigma_sub: (sigma21, sigma31, sigma32), the free lower-triangular
        volatility entries (diagonal fixed at 0.01).
    rho0_n / rho0_r: nominal and real short-rate intercepts.
    rho1_n / rho1_r: the corresponding factor loadings (length 3).
    lambda0: market-price-of-risk intercept (length 3).
    x0: state vector at the observation date.
    """

    kappa: tuple
    sigma_sub: tuple
    rho0_n: float
    rho0_r: float
    rho1_n: tuple
    rho1_r: tuple
    lambda0: tuple
    x0: tuple

    def __post_init__(self) -> None:
        for name in ("kappa", "rho1_n", "rho1_r", "lambda0", "x0", "sigma_sub"):
            if len(getattr(self, name)) != N_FACTORS:
                raise ParameterError(f"{name} must have length {N_FACTORS}")
        if any(k <= 0.0 for k in self.kappa):
            raise ParameterError("mean-reversion speeds must be positive")

    @property
    def sigma(self) -> np.ndarray:
        s21, s31, s32 = self.sigma_sub
        return np.array(
            [
                [SIGMA_DIAG, 0.0, 0.0],
                [s21, SIGMA_DIAG, 0.0],
                [s31, s32, SIGMA_DIAG],
            ]
        )

    def loadings(self, leg: str) -> tuple[float, np.ndarray]:
        if leg == "N":
            return self.rho0_n, np.asarray(self.rho1_n, dtype=float)
        if leg == "R":
            return self.rho0_r, np.asarray(self.rho1_r, dtype=float)
        raise ParameterError(f"leg must be 'N' or 'R', got {leg!r}")


@dataclass(frozen=True)
class AffineSolution:
    """A(tau), B(tau) sampled on a uniform tau grid, A(0) = 0, B(0) = 0."""

    taus: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def interp(self, tau: float) -> tuple[float, np.ndarray]:
        if not 0.0 <= tau <= self.taus[-1] + 1e-12:
            raise PricingError(f"tau {tau} outside the solved range")
        step = self.taus[1] - self.taus[0]
        i = int(np.clip(tau / step, 0, len(self.taus) - 2))
        f = min(max(tau / step - i, 0.0), 1.0)
        a = self.a[i] + f * (self.a[i + 1] - self.a[i])
        b = self.b[i] + f * (self.b[i + 1] - self.b[i])
        return float(a), b


def solve_loadings(
    p: AffineParams, leg: str, tau_max: float, ode_step: float = 1.0 / 240.0
) -> AffineSolution:
    """Integrate the (A, B) system for one leg out to tau_max by RK4."""
    if not ode_step > 0.0:
        raise ParameterError(f"ode_step must be > 0, got {ode_step}")
    rho0, rho1 = p.loadings(leg)
    kappa = np.asarray(p.kappa, dtype=float)
    sigma = p.sigma
    lam = sigma @ np.asarray(p.lambda0, dtype=float)
    cov = sigma @ sigma.T

    def rhs(ab: np.ndarray) -> np.ndarray:
        b = ab[1:]
        db = -kappa * b - rho1
        da = b @ lam + 0.5 * b @ cov @ b - rho0
        out = np.empty(4)
        out[0] = da
        out[1:] = db
        return out

    n = max(1, int(np.ceil(tau_max / ode_step - 1e-12)))
    taus = ode_step * np.arange(n + 1)
    sol = np.zeros((n + 1, 4))
    y = np.zeros(4)
    h = ode_step
    for i in range(n):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        sol[i + 1] = y
    return AffineSolution(taus=taus, a=sol[:, 0], b=sol[:, 1:])


def bond_price_affine(sol: AffineSolution, x, tau: float) -> float:
    """exp(A(tau) + <B(tau), x>) with A, B interpolated on the tau grid."""
    a, b = sol.interp(tau)
    return float(np.exp(a + b @ np.asarray(x, dtype=float)))


def zciis_rate_affine(
    p: AffineParams,
    x,
    t0: float,
    T: float,
    ode_step: float = 1.0 / 240.0,
    solutions: tuple[AffineSolution, AffineSolution] | None = None,
) -> float:
    """Fair zero-coupon inflation swap rate over [t0, T] implied by the
    benchmark model at state x.  Precomputed (nominal, real) loading
    solutions may be supplied when pricing many maturities."""
    tau = T - t0
    if tau <= 0.0:
        raise PricingError("swap maturity must exceed the start date")
    if solutions is None:
        sol_n = solve_loadings(p, "N", tau, ode_step)
        sol_r = solve_loadings(p, "R", tau, ode_step)
    else:
        sol_n, sol_r = solutions
    a_n, b_n = sol_n.interp(tau)
    a_r, b_r = sol_r.interp(tau)
    x = np.asarray(x, dtype=float)
    return float(np.exp((a_r - a_n) / tau + ((b_r - b_n) / tau) @ x) - 1.0)
