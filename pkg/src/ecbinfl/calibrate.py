"""Cross-sectional calibration of either model to one date's swap quotes.

For an observation date with market zero-coupon inflation swap rates across
maturities, the free parameters (including the unobserved short-rate state)
are chosen to minimize the root-mean-square error between model and market
rates, both in percentage points.  The three-factor model fixes
``alpha = 1``, ``pi_star = ln 1.02``, ``v = sigma_pi`` and the rate band
``(0.05%, 4.5%)`` with 25bp steps and a single-step jump rule, leaving the
8-vector ``(beta, k_pi, lambda_bar, k_sh, sigma0, b0, b1, z0)`` free, subject
to the admissibility constraints enforced by the parameter constructors.
The benchmark affine model frees all 20 of its coefficients.

The search is a seeded Nelder-Mead simplex with jittered restarts; every
objective evaluation prices the full maturity strip (one nominal and one
real backward pass for the three-factor model, one Riccati integration per
leg for the benchmark), adds a smooth quadratic penalty outside the feasible
set, and maps pricing failures to a large finite sentinel so the simplex
keeps moving.  Evaluations are deterministic; there is no Monte Carlo
anywhere in the loop.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .affine import AffineParams, solve_loadings, zciis_rate_affine
from .claims import zciis_curve
from .errors import CalibrationError, DataError, ParameterError, PricingError, SchemeError
from .model import (
    ConstantVol,
    EcbParams,
    InflationParams,
    ModelParams,
    PolicyBandJumpRule,
    ShortRateParams,
)
from .pide import Grid

__all__ = [
    "QuotePanel",
    "CalibSpec",
    "CalibResult",
    "error_metrics",
    "average_metrics",
    "objective",
    "calibrate",
    "model_rates",
    "OURS_PARAM_NAMES",
    "HHY_PARAM_NAMES",
]

log = logging.getLogger(__name__)

PENALTY_SCALE = 1.0e6
FAILURE_SENTINEL = 1.0e7

OURS_PARAM_NAMES = ("beta", "k_pi", "lambda_bar", "k_sh", "sigma0", "b0", "b1", "z0")
HHY_PARAM_NAMES = (
    "kappa1", "kappa2", "kappa3",
    "sigma21", "sigma31", "sigma32",
    "rho0_n", "rho0_r",
    "rho1_n1", "rho1_n2", "rho1_n3",
    "rho1_r1", "rho1_r2", "rho1_r3",
    "lambda01", "lambda02", "lambda03",
    "x01", "x02", "x03",
)

# fixed assignments of the three-factor model during calibration
OURS_FIXED = {
    "alpha": 1.0,
    "pi_star": math.log(1.02),
    "r_min": 0.0005,
    "r_max": 0.045,
    "delta": 0.0025,
    "m": 1,
}

_DEFAULT_START_OURS = {
    "beta": 0.05,
    "k_pi": 0.3,
    "lambda_bar": 1.0,
    "k_sh": 0.6,
    "sigma0": 0.03,
    "b0": 0.02,
    "b1": 0.2,
    "z0": 0.02,
}


@dataclass(frozen=True)
class QuotePanel:
    """One observation date's swap quotes plus the inflation state derived
    from the price-index history.  Rates are in percent.  ecb_rate is the
    observed policy rate (snapped to the level lattice when pricing); it is
    required for three-factor calibration."""

    date: str
    maturities: np.ndarray
    rates_percent: np.ndarray
    pi0: float
    sigma_pi: float
    ecb_rate: float | None = None

    def __post_init__(self) -> None:
        mats = np.asarray(self.maturities, dtype=float)
        rates = np.asarray(self.rates_percent, dtype=float)
        if mats.size < 1:
            raise DataError("panel needs at least one maturity")
        if mats.size != rates.size:
            raise DataError("maturities and rates differ in length")
        if not np.all(np.diff(mats) > 0):
            raise DataError("maturities must be strictly increasing")
        if not np.all(np.isfinite(rates)):
            raise DataError("non-finite quote")
        object.__setattr__(self, "maturities", mats)
        object.__setattr__(self, "rates_percent", rates)


@dataclass(frozen=True)
class CalibSpec:
    """Model selector and optimizer settings.

    rmse_target, when positive, stops the restart loop as soon as a feasible
    point beats it (percent units).  start overrides the default starting
    parameter dict; grid_* control the pricing grid of the three-factor
    model during calibration.
    """

    model: str = "ours"
    restarts: int = 5
    max_iter: int = 2000
    tol: float = 1e-6
    seed: int = 0
    rmse_target: float = 0.0
    max_evals: int = 0
    jitter: float = 0.1
    start: dict | None = None
    warm_start: bool = False
    grid_steps: int = 24
    grid_nz: int = 120
    grid_zmax: float = 0.18
    grid_npi: int = 61
    ode_step: float = 1.0 / 96.0

    def __post_init__(self) -> None:
        if self.model not in ("ours", "hhy"):
            raise CalibrationError(f"unknown model {self.model!r}")
        if self.restarts < 1:
            raise CalibrationError("need at least one start")


@dataclass
class CalibResult:
    """Fitted parameters with per-date error measures and diagnostics."""

    model: str
    date: str
    params: dict
    rmse: float
    arpe: float
    fitted_rates: np.ndarray
    iterations: int
    n_evals: int
    converged: bool
    feasible: bool


def error_metrics(model_rates_arr, market_rates_arr) -> tuple[float, float]:
    """(rmse, arpe) of model versus market rates, unit-consistent inputs.

    ARPE averages |K - K_m| / K_m; maturities with a zero market rate are
    excluded from it with a warning (the ratio is undefined there).
    """
    model_arr = np.asarray(model_rates_arr, dtype=float)
    market = np.asarray(market_rates_arr, dtype=float)
    if model_arr.shape != market.shape or model_arr.size == 0:
        raise DataError("rate vectors must be nonempty and equally long")
    diff = np.abs(model_arr - market)
    rmse = float(np.sqrt(np.mean(diff**2)))
    nz = market != 0.0
    if not np.all(nz):
        warnings.warn("zero market rate: excluded from ARPE", stacklevel=2)
    if not np.any(nz):
        raise DataError("ARPE undefined: every market rate is zero")
    arpe = float(np.mean(diff[nz] / np.abs(market[nz])))
    return rmse, arpe


def average_metrics(results) -> tuple[float, float]:
    """Arithmetic means of per-date (rmse, arpe) pairs."""
    results = list(results)
    if not results:
        raise DataError("no calibration results to average")
    rmse = float(np.mean([r.rmse for r in results]))
    arpe = float(np.mean([r.arpe for r in results]))
    return rmse, arpe


def _ours_constraint_slacks(theta: np.ndarray) -> np.ndarray:
    """Nonnegative slack per violated constraint (0 on the feasible set).

    Mirrors the constructor checks: 0 < alpha - k_pi < 1 (alpha = 1),
    k_pi >= 0, lambda_bar >= 0, k_sh > 0, sigma0 > 0, b > 0 on the band,
    the Feller-type bound at both band endpoints, z0 > 0.
    """
    beta, k_pi, lam, k_sh, sigma0, b0, b1, z0 = theta
    r_lo, r_hi = OURS_FIXED["r_min"], OURS_FIXED["r_max"]
    eps = 1e-8
    slacks = [
        max(0.0, k_pi - (1.0 - eps)),          # alpha - k_pi > 0
        max(0.0, -k_pi),                        # k_pi >= 0
        max(0.0, -lam),                         # lambda_bar >= 0
        max(0.0, eps - k_sh),                   # k_sh > 0
        max(0.0, eps - sigma0),                 # sigma0 > 0
        max(0.0, eps - (b0 + b1 * r_lo)),       # b > 0 at the bottom
        max(0.0, eps - (b0 + b1 * r_hi)),       # b > 0 at the top
        max(0.0, -z0 + eps),                    # z0 > 0
    ]
    for b_end in (b0 + b1 * r_lo, b0 + b1 * r_hi):
        slacks.append(max(0.0, 0.5 * sigma0**2 - k_sh * b_end + eps))
    return np.asarray(slacks)


def _build_ours(theta: np.ndarray, panel: QuotePanel) -> ModelParams:
    beta, k_pi, lam, k_sh, sigma0, b0, b1, _ = theta
    infl = InflationParams(
        alpha=OURS_FIXED["alpha"],
        beta=beta,
        k_pi=k_pi,
        pi_star=OURS_FIXED["pi_star"],
        v=panel.sigma_pi,
    )
    ecb = EcbParams(
        r_min=OURS_FIXED["r_min"],
        r_max=OURS_FIXED["r_max"],
        delta=OURS_FIXED["delta"],
        m=OURS_FIXED["m"],
        lambda_bar=lam,
        jump_rule=PolicyBandJumpRule(OURS_FIXED["pi_star"], panel.sigma_pi),
    )
    short = ShortRateParams(k_sh=k_sh, b0=b0, b1=b1, vol=ConstantVol(sigma0))
    return ModelParams(inflation=infl, ecb=ecb, short=short)


def _ours_grid(panel: QuotePanel, spec: CalibSpec) -> Grid:
    """Pricing grid shared by every objective evaluation of one date.

    Uses the fixed assignments (not the candidate theta) so the objective
    is a fixed deterministic function of theta.
    """
    months = int(round(float(np.max(panel.maturities)) * 12))
    v = panel.sigma_pi
    half = 6.0 * v * math.sqrt(months)
    half += 2.0 * (OURS_FIXED["r_max"] - OURS_FIXED["r_min"])  # reversion-shift margin
    half = max(half, abs(panel.pi0 - OURS_FIXED["pi_star"]) + 6.0 * v)
    pi_nodes = np.linspace(
        OURS_FIXED["pi_star"] - half, OURS_FIXED["pi_star"] + half, spec.grid_npi
    )
    ratio = (OURS_FIXED["r_max"] - OURS_FIXED["r_min"]) / OURS_FIXED["delta"]
    h_count = int(math.ceil(ratio - 1e-12))
    r_levels = OURS_FIXED["r_min"] + OURS_FIXED["delta"] * np.arange(1, h_count)
    return Grid(
        n_steps=spec.grid_steps,
        r_levels=r_levels,
        z_nodes=np.linspace(0.0, spec.grid_zmax, spec.grid_nz + 1),
        pi_nodes=pi_nodes,
        t1=1.0 / 12.0,
        delta=OURS_FIXED["delta"],
    )


def _snap_rate(r: float, grid: Grid) -> float:
    h = int(round((r - grid.r_levels[0]) / grid.delta))
    h = min(max(h, 0), len(grid.r_levels) - 1)
    return float(grid.r_levels[h])


def _build_hhy(theta: np.ndarray) -> AffineParams:
    return AffineParams(
        kappa=tuple(theta[0:3]),
        sigma_sub=tuple(theta[3:6]),
        rho0_n=float(theta[6]),
        rho0_r=float(theta[7]),
        rho1_n=tuple(theta[8:11]),
        rho1_r=tuple(theta[11:14]),
        lambda0=tuple(theta[14:17]),
        x0=tuple(theta[17:20]),
    )


def model_rates(
    theta: np.ndarray, panel: QuotePanel, spec: CalibSpec, grid: Grid | None = None
) -> np.ndarray:
    """Model-implied swap rates (percent) across the panel's maturities."""
    theta = np.asarray(theta, dtype=float)
    if spec.model == "ours":
        if grid is None:
            grid = _ours_grid(panel, spec)
        if panel.ecb_rate is None:
            raise CalibrationError("panel carries no policy rate; set ecb_rate")
        mp = _build_ours(theta, panel)
        state = (panel.pi0, _snap_rate(panel.ecb_rate, grid), float(theta[7]))
        return 100.0 * zciis_curve(mp, grid, panel.maturities, state)
    p = _build_hhy(theta)
    tau_max = float(np.max(panel.maturities))
    sols = (
        solve_loadings(p, "N", tau_max, spec.ode_step),
        solve_loadings(p, "R", tau_max, spec.ode_step),
    )
    return 100.0 * np.array(
        [
            zciis_rate_affine(p, p.x0, 0.0, T, solutions=sols)
            for T in panel.maturities
        ]
    )


def objective(
    theta, panel: QuotePanel, spec: CalibSpec, grid: Grid | None = None
) -> float:
    """RMSE (percent) of the candidate theta plus the constraint penalty.

    Infeasible candidates are still priced when constructible; candidates
    that cannot price return a large finite sentinel so derivative-free
    search keeps moving.
    """
    theta = np.asarray(theta, dtype=float)
    if spec.model == "ours":
        slacks = _ours_constraint_slacks(theta)
    else:
        slacks = np.maximum(0.0, 1e-8 - theta[0:3])  # kappa > 0
    penalty = PENALTY_SCALE * float(np.sum(slacks**2))
    try:
        rates = model_rates(theta, panel, spec, grid=grid)
        rmse, _ = error_metrics(rates, panel.rates_percent)
    except (ParameterError, PricingError, SchemeError, DataError) as exc:
        log.debug("pricing failed at theta=%s: %s", theta, exc)
        return FAILURE_SENTINEL + penalty
    return rmse + penalty


def _start_vector(spec: CalibSpec, panel: QuotePanel) -> np.ndarray:
    if spec.model == "ours":
        base = dict(_DEFAULT_START_OURS)
        if spec.start:
            base.update(spec.start)
        return np.array([base[k] for k in OURS_PARAM_NAMES], dtype=float)
    base = {name: 0.0 for name in HHY_PARAM_NAMES}
    base.update({"kappa1": 0.5, "kappa2": 0.8, "kappa3": 1.2})
    base.update({"rho0_n": 0.03, "rho0_r": 0.01})
    base.update({"rho1_n1": 0.01, "rho1_r1": 0.005})
    if spec.start:
        base.update(spec.start)
    return np.array([base[k] for k in HHY_PARAM_NAMES], dtype=float)


def calibrate(panel: QuotePanel, spec: CalibSpec) -> CalibResult:
    """Minimize the panel RMSE over the model's free parameters.

    Runs Nelder-Mead from the configured start and up to restarts - 1
    jittered replicas (multiplicative, seeded); keeps the best feasible
    point.  Deterministic for a fixed seed.
    """
    names = OURS_PARAM_NAMES if spec.model == "ours" else HHY_PARAM_NAMES
    grid = _ours_grid(panel, spec) if spec.model == "ours" else None
    x0 = _start_vector(spec, panel)
    rng = np.random.default_rng(spec.seed)
    scale = np.where(np.abs(x0) > 1e-12, np.abs(x0), 1e-2)

    n_evals = 0

    def fun(u: np.ndarray) -> float:
        nonlocal n_evals
        n_evals += 1
        return objective(u * scale, panel, spec, grid=grid)

    best = None
    total_iters = 0
    converged = False
    for attempt in range(spec.restarts):
        if attempt == 0:
            u0 = x0 / scale
        else:
            jit = 1.0 + spec.jitter * rng.uniform(-1.0, 1.0, size=x0.size)
            u0 = (x0 * jit) / scale
        options = {"maxiter": spec.max_iter, "fatol": spec.tol, "xatol": 1e-8}
        if spec.max_evals:
            options["maxfev"] = spec.max_evals
        res = minimize(fun, u0, method="Nelder-Mead", options=options)
        total_iters += int(res.nit)
        cand = res.x * scale
        cand_obj = float(res.fun)
        if best is None or cand_obj < best[1]:
            best = (cand, cand_obj)
            converged = bool(res.success) or converged
        if spec.rmse_target > 0.0 and best[1] <= spec.rmse_target:
            break

    theta, obj_val = best
    slacks = (
        _ours_constraint_slacks(theta)
        if spec.model == "ours"
        else np.maximum(0.0, 1e-8 - theta[0:3])
    )
    feasible = bool(np.all(slacks == 0.0))
    if obj_val >= FAILURE_SENTINEL:
        raise CalibrationError("no feasible candidate priced successfully")
    try:
        rates = model_rates(theta, panel, spec, grid=grid)
        rmse, arpe = error_metrics(rates, panel.rates_percent)
    except (ParameterError, PricingError, SchemeError) as exc:
        raise CalibrationError(f"best candidate failed to reprice: {exc}") from exc
    return CalibResult(
        model=spec.model,
        date=panel.date,
        params={k: float(v) for k, v in zip(names, theta)},
        rmse=rmse,
        arpe=arpe,
        fitted_rates=rates,
        iterations=total_iters,
        n_evals=n_evals,
        converged=converged,
        feasible=feasible,
    )
