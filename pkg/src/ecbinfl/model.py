"""Three-factor model of euro-area inflation, the central-bank policy rate
and the short-term rate.

The three coupled factors are:

* inflation ``Pi``: piecewise constant, resampled once a month,

      Pi(t_{i+1}) = (alpha - k_pi) * Pi(t_i) + k_pi * pi_star
                    + beta * R(t_{i+1}-) + eps,   eps ~ N(0, v^2),

  which mean-reverts towards ``(k_pi * pi_star + beta * r) / (k_pi - alpha + 1)``
  as long as ``0 < alpha - k_pi < 1``;

* the policy rate ``R``: a pure jump process on the lattice of multiples of
  ``delta`` (25bp in practice), jumping at Poisson(lambda_bar) event times by
  ``k * delta``, ``k in {-m..m}`` (k = 0 allowed), with state-dependent
  probabilities ``q(pi, r, k*delta)`` that vanish whenever the jump would
  leave the open band ``(r_min, r_max)``;

* the short rate ``R_sh``: a square-root diffusion reverting to an affine
  function of the policy rate,

      dR_sh = k_sh * (b0 + b1 * R - R_sh) dt
              + vol(|R - R_sh|^2) * sqrt(|R_sh|) dW,

  with ``vol^2`` bounded between ``sigma0^2`` and ``sigma1 * (1 + sqrt(q))``
  and a Feller-type condition ``k_sh * inf b > vol^2(...) / 2`` keeping the
  short rate strictly positive.

This module holds the parameter containers with their admissibility checks
and the pointwise model functions shared by the Monte Carlo engine and the
finite-difference pricer.  Everything here is immutable and side-effect free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ParameterError

__all__ = [
    "InflationParams",
    "EcbParams",
    "ShortRateParams",
    "ModelParams",
    "ConstantVol",
    "SpreadPowerVol",
    "PolicyBandJumpRule",
    "TableJumpRule",
    "inflation_mean",
    "inflation_reversion_level",
    "jump_probs",
    "jump_increment",
    "short_rate_level",
    "vol_sq",
]

_Q_SUM_TOL = 1e-12


@dataclass(frozen=True)
class InflationParams:
    """Coefficients of the monthly inflation update.

    alpha, beta are free reals; k_pi, pi_star are nonnegative; v is the
    standard deviation of the monthly Gaussian innovation (annualized
    log-rate units).  Mean reversion requires 0 < alpha - k_pi < 1.
    """

    alpha: float
    beta: float
    k_pi: float
    pi_star: float
    v: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha - self.k_pi < 1.0:
            raise ParameterError(
                f"need 0 < alpha - k_pi < 1, got {self.alpha - self.k_pi}"
            )
        if self.k_pi < 0.0:
            raise ParameterError(f"k_pi must be >= 0, got {self.k_pi}")
        if self.pi_star < 0.0:
            raise ParameterError(f"pi_star must be >= 0, got {self.pi_star}")
        if not self.v > 0.0:
            raise ParameterError(f"v must be > 0, got {self.v}")


@runtime_checkable
class JumpRule(Protocol):
    """State-dependent distribution of one policy-rate move.

    ``probs(pi, r, ecb)`` returns the probabilities of the moves
    ``k * ecb.delta`` for ``k = -m..m`` (zero move included) as an array
    whose trailing axis has length ``2m + 1``.  Inputs broadcast.
    """

    def probs(self, pi, r, ecb: "EcbParams") -> np.ndarray: ...


@dataclass(frozen=True)
class PolicyBandJumpRule:
    """Default single-step (m = 1) jump rule.

    An up move becomes likely once inflation exceeds the target by a dead
    zone of 0.2 sigma_pi, ramping linearly to full probability over a further
    0.3 sigma_pi, and is tapered to zero over the last 3 delta below the top
    of the rate band.  The down move is symmetric.  By construction the up
    and down factors are clipped to [0, 1], at most one of them is nonzero,
    and moves that would leave the open band have probability exactly zero.
    """

    pi_star: float
    sigma_pi: float

    def __post_init__(self) -> None:
        if not self.sigma_pi > 0.0:
            raise ParameterError(f"sigma_pi must be > 0, got {self.sigma_pi}")

    def probs(self, pi, r, ecb: "EcbParams") -> np.ndarray:
        if ecb.m != 1:
            raise ParameterError("PolicyBandJumpRule is defined for m = 1 only")
        pi = np.asarray(pi, dtype=float)
        r = np.asarray(r, dtype=float)
        s, d = self.sigma_pi, ecb.delta
        up = np.clip((pi - (self.pi_star + 0.2 * s)) / (0.3 * s), 0.0, 1.0)
        up = up * np.clip(((ecb.r_max - d) - r) / (3.0 * d), 0.0, 1.0)
        dn = np.clip(((self.pi_star - 0.2 * s) - pi) / (0.3 * s), 0.0, 1.0)
        dn = dn * np.clip((r - (ecb.r_min + d)) / (3.0 * d), 0.0, 1.0)
        return np.stack([dn, 1.0 - up - dn, up], axis=-1)


@dataclass(frozen=True)
class TableJumpRule:
    """State-independent jump distribution, mainly for tests and degenerate
    configurations.  ``table`` lists the probabilities of -m*delta .. +m*delta.
    """

    table: tuple

    def probs(self, pi, r, ecb: "EcbParams") -> np.ndarray:
        q = np.asarray(self.table, dtype=float)
        if q.shape != (2 * ecb.m + 1,):
            raise ParameterError(
                f"table length {q.shape} does not match 2m+1 = {2 * ecb.m + 1}"
            )
        shape = np.broadcast_shapes(np.shape(pi), np.shape(r))
        return np.broadcast_to(q, shape + q.shape).copy()


@dataclass(frozen=True)
class EcbParams:
    """Policy-rate band, step size, jump intensity and jump distribution.

    ``lambda_bar`` is the (constant) Poisson event intensity per year; the
    event may carry a zero move, so the attempted-move rate and the realized
    jump activity differ.  ``lambda_bar = 0`` is accepted as the degenerate
    no-jump configuration used by closed-form validation runs.
    """

    r_min: float
    r_max: float
    delta: float
    m: int
    lambda_bar: float
    jump_rule: JumpRule

    def __post_init__(self) -> None:
        if not -1.0 <= self.r_min:
            raise ParameterError(f"r_min must be >= -1, got {self.r_min}")
        if not self.r_min < self.r_max < np.inf:
            raise ParameterError(
                f"need r_min < r_max < inf, got [{self.r_min}, {self.r_max}]"
            )
        if not self.delta > 0.0:
            raise ParameterError(f"delta must be > 0, got {self.delta}")
        if not (isinstance(self.m, (int, np.integer)) and self.m >= 1):
            raise ParameterError(f"m must be an integer >= 1, got {self.m}")
        if self.lambda_bar < 0.0:
            raise ParameterError(f"lambda_bar must be >= 0, got {self.lambda_bar}")
        if self.r_min + self.delta > self.r_max:
            raise ParameterError("rate band admits no level transition")

    @property
    def k_values(self) -> np.ndarray:
        return np.arange(-self.m, self.m + 1)


@runtime_checkable
class VolSpec(Protocol):
    """Squared diffusion coefficient as a function of the squared spread
    between the short rate and the policy rate, with declared bounds."""

    @property
    def sigma0_sq(self) -> float: ...

    @property
    def sigma1(self) -> float: ...

    def value_sq(self, spread_sq) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantVol:
    """Spread-independent volatility, vol = sigma0."""

    sigma0: float

    def __post_init__(self) -> None:
        if not self.sigma0 > 0.0:
            raise ParameterError(f"sigma0 must be > 0, got {self.sigma0}")

    @property
    def sigma0_sq(self) -> float:
        return self.sigma0 ** 2

    @property
    def sigma1(self) -> float:
        return self.sigma0 ** 2

    def value_sq(self, spread_sq) -> np.ndarray:
        spread_sq = np.asarray(spread_sq, dtype=float)
        return np.full_like(spread_sq, self.sigma0 ** 2)


@dataclass(frozen=True)
class SpreadPowerVol:
    """Spread-sensitive volatility vol(q) = (1 + q)^(1/4), so
    vol^2(q) = sqrt(1 + q) with bounds sigma0^2 = 1, sigma1 = 1."""

    @property
    def sigma0_sq(self) -> float:
        return 1.0

    @property
    def sigma1(self) -> float:
        return 1.0

    def value_sq(self, spread_sq) -> np.ndarray:
        spread_sq = np.asarray(spread_sq, dtype=float)
        return np.sqrt(1.0 + spread_sq)


@dataclass(frozen=True)
class ShortRateParams:
    """Mean-reversion speed, affine reversion level b(r) = b0 + b1 r, and
    the volatility specification.  Joint constraints against the rate band
    (positivity of b, the Feller-type condition) are enforced by ModelParams.
    """

    k_sh: float
    b0: float
    b1: float
    vol: VolSpec

    def __post_init__(self) -> None:
        if not self.k_sh > 0.0:
            raise ParameterError(f"k_sh must be > 0, got {self.k_sh}")
        if not self.vol.sigma0_sq > 0.0:
            raise ParameterError("vol lower bound sigma0^2 must be > 0")


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of the three-factor model.

    t1 is the year fraction between inflation observations (one month).
    Construction fails unless every admissibility constraint holds:
    b() > 0 over the whole rate band, the volatility bounds, and the
    Feller-type lower bound on k_sh * inf b at both band endpoints.
    """

    inflation: InflationParams
    ecb: EcbParams
    short: ShortRateParams
    t1: float = 1.0 / 12.0

    def __post_init__(self) -> None:
        if not self.t1 > 0.0:
            raise ParameterError(f"t1 must be > 0, got {self.t1}")
        sh, ecb = self.short, self.ecb
        b_lo = sh.b0 + sh.b1 * ecb.r_min
        b_hi = sh.b0 + sh.b1 * ecb.r_max
        inf_b = min(b_lo, b_hi)
        if not inf_b > 0.0:
            raise ParameterError(
                f"b(r) must be positive on the rate band, inf b = {inf_b}"
            )
        # volatility bounds, spot-checked on a spread sample
        q = np.linspace(0.0, 100.0, 101)
        vsq = np.asarray(sh.vol.value_sq(q), dtype=float)
        if np.any(vsq < sh.vol.sigma0_sq - 1e-14):
            raise ParameterError("vol^2 falls below its declared lower bound")
        if np.any(vsq > sh.vol.sigma1 * (1.0 + np.sqrt(q)) + 1e-14):
            raise ParameterError("vol^2 exceeds its declared upper bound")
        # Feller-type condition keeping the short rate positive
        spread_ref = ecb.r_max - min(ecb.r_min, 0.0)
        rhs = 0.5 * float(sh.vol.value_sq(spread_ref))
        if not sh.k_sh * inf_b > rhs:
            raise ParameterError(
                f"Feller-type condition fails: k_sh * inf b = {sh.k_sh * inf_b} "
                f"<= {rhs}"
            )
        for b_end in (b_lo, b_hi):
            if not sh.k_sh * b_end > 0.5 * sh.vol.sigma0_sq:
                raise ParameterError(
                    "k_sh * b must exceed sigma0^2 / 2 at both band endpoints"
                )


def inflation_mean(pi, r, p: InflationParams):
    """Conditional mean of next month's inflation given (pi, r).

    Returns (alpha - k_pi) * pi + k_pi * pi_star + beta * r.  Broadcasts.
    """
    return (p.alpha - p.k_pi) * pi + p.k_pi * p.pi_star + p.beta * r


def inflation_reversion_level(r, p: InflationParams):
    """Fixed point of the monthly update: the level inflation reverts to
    while the policy rate stays at r."""
    return (p.k_pi * p.pi_star + p.beta * r) / (p.k_pi - p.alpha + 1.0)


def _validate_probs(q: np.ndarray, r, ecb: EcbParams) -> None:
    if np.any(np.abs(q.sum(axis=-1) - 1.0) > _Q_SUM_TOL):
        raise ParameterError("jump probabilities do not sum to 1")
    r = np.asarray(r, dtype=float)
    for k in range(-ecb.m, ecb.m + 1):
        if k == 0:
            continue
        target = r + k * ecb.delta
        out = (target <= ecb.r_min) | (target >= ecb.r_max)
        if np.any(q[..., k + ecb.m][out] != 0.0):
            raise ParameterError(
                f"jump rule puts mass on a move of {k} steps outside the band"
            )


def jump_probs(pi, r, ecb: EcbParams) -> np.ndarray:
    """Probabilities of the policy-rate moves -m*delta .. +m*delta at (pi, r).

    r must lie strictly inside the rate band.  Entries are clipped to [0, 1];
    a rule whose clipped probabilities do not sum to one, or that puts mass
    on a move leaving the band, is rejected rather than repaired.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= ecb.r_min) or np.any(r_arr >= ecb.r_max):
        raise ParameterError("r outside the open rate band")
    q = np.clip(np.asarray(ecb.jump_rule.probs(pi, r, ecb), dtype=float), 0.0, 1.0)
    if q.shape[-1] != 2 * ecb.m + 1:
        raise ParameterError("jump rule returned a wrongly sized distribution")
    _validate_probs(q, r, ecb)
    return q


def jump_increment(pi, r, u, ecb: EcbParams) -> float:
    """Policy-rate move k*delta produced by the uniform draw u in [0, 1].

    u is mapped through the cumulative distribution of the moves ordered
    -m, .., 0, .., +m; atoms of zero probability are never selected even
    when u lands exactly on their (empty) cumulative interval.
    """
    if not 0.0 <= u <= 1.0:
        raise ParameterError(f"u must lie in [0, 1], got {u}")
    q = jump_probs(pi, r, ecb)
    cum = np.cumsum(q)
    if u <= cum[0]:
        return -ecb.m * ecb.delta if q[0] > 0.0 else 0.0
    idx = int(np.searchsorted(cum, u, side="left"))
    idx = min(idx, 2 * ecb.m)
    if q[idx] <= 0.0:
        return 0.0
    return (idx - ecb.m) * ecb.delta


def short_rate_level(r, p: ShortRateParams):
    """Level b(r) = b0 + b1 r the short rate reverts to."""
    return p.b0 + p.b1 * r


def vol_sq(spread_sq, p: ShortRateParams) -> np.ndarray:
    """Squared diffusion coefficient at the given squared spread (>= 0)."""
    spread_sq = np.asarray(spread_sq, dtype=float)
    if np.any(spread_sq < 0.0):
        raise ParameterError("squared spread must be nonnegative")
    out = np.asarray(p.vol.value_sq(spread_sq), dtype=float)
    if np.any(out < p.vol.sigma0_sq - 1e-14) or np.any(
        out > p.vol.sigma1 * (1.0 + np.sqrt(spread_sq)) + 1e-14
    ):
        raise ParameterError("vol^2 left its declared bounds")
    return out
