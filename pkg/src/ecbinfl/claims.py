"""Pricing of inflation-linked claims by the monthly backward recursion.

A claim pays ``Y(T)^p * phi(Pi(T), R(T), R_sh(T))`` at maturity, where
``Y(t) = exp(integral of Pi)`` is the inflation index normalized to 1 at the
valuation date.  Pricing walks backwards month by month: within a month the
finite-difference solver of :mod:`ecbinfl.pide` integrates the valuation
equation with inflation frozen; across month boundaries the terminal data of
the earlier month is the expectation, over the Gaussian inflation innovation,
of ``exp(p * dt * pi) * (next month's time-zero slice)``.  The deterministic
index factor ``exp(p * (t_next - s) * pi)`` is applied at readout rather than
baked into the lattice.

Nominal bonds (p = 0, phi = 1), real bonds (p = 1, phi = 1) and the fair
rate of a zero-coupon inflation swap, ``(P_R / P_N)^(1/tau) - 1``, are thin
wrappers.  ``bond_ladder`` exposes the intermediate monthly slices of one
long recursion, which by time homogeneity are the price surfaces of every
shorter monthly maturity; the cross-sectional calibration relies on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PricingError, SchemeError
from .model import ModelParams
from .pide import Grid, Lattice, apply_inflation_shock, solve_interval

__all__ = [
    "ClaimSpec",
    "PriceSurface",
    "price_claim",
    "nominal_bond",
    "real_bond",
    "zciis_rate",
    "bond_ladder",
    "zciis_curve",
]

_MONTH_TOL = 1e-9


@dataclass(frozen=True)
class ClaimSpec:
    """Payoff descriptor: index exponent p >= 0, terminal payoff phi(pi, r, z)
    and maturity T (years).  growth_c0 / growth_c1 declare the bound
    |phi| <= c0 * exp(c1 |pi|) * (1 + z), verified on the grid."""

    p: float
    phi: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    T: float
    growth_c0: float = 1.0
    growth_c1: float = 0.0

    def __post_init__(self) -> None:
        if self.p < 0.0:
            raise PricingError(f"index exponent must be >= 0, got {self.p}")
        if self.T < 0.0:
            raise PricingError(f"maturity must be >= 0, got {self.T}")
        if self.growth_c0 < 0.0 or self.growth_c1 < 0.0:
            raise PricingError("growth constants must be nonnegative")


@dataclass(frozen=True)
class PriceSurface:
    """Claim values phi(0, y=1, pi, r, z) on the grid at the valuation date."""

    values: np.ndarray
    grid: Grid
    claim: ClaimSpec
    params: ModelParams

    def value_at(self, pi: float, r: float, z: float) -> float:
        """Value at an off-grid state: r snaps to the nearest rate level,
        pi and z interpolate linearly (clamped inside the grid)."""
        g = self.grid
        h = int(round((r - g.r_levels[0]) / g.delta))
        if not 0 <= h < len(g.r_levels):
            raise PricingError(f"rate {r} outside the level range")
        plane = self.values[:, h, :]
        if len(g.pi_nodes) == 1:
            line = plane[0]
        else:
            if not g.pi_nodes[0] - 1e-12 <= pi <= g.pi_nodes[-1] + 1e-12:
                raise PricingError(f"inflation {pi} outside the grid")
            li = int(np.clip((pi - g.pi_nodes[0]) / g.dpi, 0, len(g.pi_nodes) - 2))
            lf = (pi - g.pi_nodes[li]) / g.dpi
            lf = min(max(lf, 0.0), 1.0)
            line = plane[li] + lf * (plane[li + 1] - plane[li])
        if not 0.0 <= z <= g.z_nodes[-1] + 1e-12:
            raise PricingError(f"short rate {z} outside the grid")
        ji = int(np.clip(z / g.dz, 0, g.n_z - 1))
        jf = min(max(z / g.dz - ji, 0.0), 1.0)
        return float(line[ji] + jf * (line[ji + 1] - line[ji]))

    def to_csv(self, path) -> None:
        """Dump the surface as pi,r,z,value rows."""
        g = self.grid
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("pi,r,z,value\n")
            for li, pi in enumerate(g.pi_nodes):
                for hi, r in enumerate(g.r_levels):
                    for ji, z in enumerate(g.z_nodes):
                        fh.write(f"{pi:.12g},{r:.12g},{z:.12g},{self.values[li, hi, ji]:.12g}\n")


def _terminal_lattice(claim: ClaimSpec, g: Grid) -> Lattice:
    vals = np.asarray(
        claim.phi(
            g.pi_nodes[:, None, None],
            g.r_levels[None, :, None],
            g.z_nodes[None, None, :],
        ),
        dtype=float,
    )
    vals = np.broadcast_to(vals, g.shape).copy()
    bound = (
        claim.growth_c0
        * np.exp(claim.growth_c1 * np.abs(g.pi_nodes))[:, None, None]
        * (1.0 + g.z_nodes)[None, None, :]
    )
    if np.any(np.abs(vals) > bound + 1e-12):
        raise PricingError("terminal payoff violates its declared growth bound")
    return Lattice(vals, time_index=0)


def _month_count(T: float, t1: float) -> int:
    return int(math.floor(T / t1 + _MONTH_TOL))


def price_claim(
    claim: ClaimSpec, mp: ModelParams, g: Grid, s: float = 0.0
) -> PriceSurface:
    """Value surface of the claim at calendar time s within the first month.

    Runs the backward recursion: a (possibly empty) stub solve on the last
    partial month, then one solve per full month, each seeded with the
    shock-averaged, index-weighted slice of its successor.  The final month
    is integrated only down to s, and the readout reinstates the
    deterministic index factor for the remainder of the current month.
    """
    if not 0.0 <= s < mp.t1 + _MONTH_TOL:
        raise PricingError(f"valuation offset must lie in [0, t1), got {s}")
    if claim.T < s:
        raise PricingError("claim matures before the valuation date")
    lat = _terminal_lattice(claim, g)
    months = _month_count(claim.T, mp.t1)
    if months == 0:
        lat = solve_interval(lat, mp, g, tau_len=claim.T - s)
        factor = np.exp(claim.p * (claim.T - s) * g.pi_nodes)
        return PriceSurface(factor[:, None, None] * lat.values, g, claim, mp)
    tail = max(claim.T - months * mp.t1, 0.0)
    if tail < _MONTH_TOL:
        tail = 0.0
    lat = solve_interval(lat, mp, g, tau_len=tail)
    for i in range(months - 1, -1, -1):
        span = tail if i == months - 1 else mp.t1
        weighted = np.exp(claim.p * span * g.pi_nodes)[:, None, None] * lat.values
        terminal = Lattice(apply_inflation_shock(weighted, mp, g), lat.time_index)
        horizon = mp.t1 - s if i == 0 else mp.t1
        lat = solve_interval(terminal, mp, g, tau_len=horizon)
    factor = np.exp(claim.p * (mp.t1 - s) * g.pi_nodes)
    return PriceSurface(factor[:, None, None] * lat.values, g, claim, mp)


def _one(pi, r, z):
    return np.ones(np.broadcast_shapes(np.shape(pi), np.shape(r), np.shape(z)))


def nominal_bond(mp: ModelParams, g: Grid, t0: float, T: float) -> PriceSurface:
    """Zero-coupon bond paying 1 at T, valued at t0 (time homogeneous)."""
    return price_claim(ClaimSpec(p=0.0, phi=_one, T=T - t0), mp, g)


def real_bond(mp: ModelParams, g: Grid, t0: float, T: float) -> PriceSurface:
    """Zero-coupon paying the index growth Y(T)/Y(t0) at T, valued at t0."""
    return price_claim(ClaimSpec(p=1.0, phi=_one, T=T - t0), mp, g)


def zciis_rate(
    mp: ModelParams,
    g: Grid,
    t0: float,
    T: float,
    state: tuple[float, float, float],
) -> float:
    """Fair fixed rate of a zero-coupon inflation swap over [t0, T] at the
    given (pi, r, z) state: (P_R / P_N)^(1/(T-t0)) - 1."""
    tau = T - t0
    if tau <= 0.0:
        raise PricingError("swap maturity must exceed the start date")
    pn = nominal_bond(mp, g, t0, T).value_at(*state)
    pr = real_bond(mp, g, t0, T).value_at(*state)
    return _swap_rate(pn, pr, tau)


def _swap_rate(pn: float, pr: float, tau: float) -> float:
    if pn <= 0.0 or pr <= 0.0:
        raise PricingError(f"non-positive bond price (P_N={pn}, P_R={pr})")
    return (pr / pn) ** (1.0 / tau) - 1.0


def bond_ladder(
    mp: ModelParams, g: Grid, maturities, p: float
) -> dict[float, PriceSurface]:
    """Price surfaces of zero-coupon claims (phi = 1, exponent p) for several
    maturities from one backward pass.

    All maturities must be whole numbers of months.  The recursion runs to
    the longest one; the slice left after i months, index-factored, is the
    surface of the claim with maturity (max - i) months, exactly as a fresh
    run of ``price_claim`` would produce.
    """
    t1 = mp.t1
    mats = sorted(set(float(T) for T in maturities))
    if not mats:
        return {}
    month_of = {}
    for T in mats:
        k = round(T / t1)
        if abs(T - k * t1) > _MONTH_TOL or k < 1:
            raise PricingError(f"maturity {T} is not a whole number of months")
        month_of[T] = int(k)
    total = max(month_of.values())
    claim = ClaimSpec(p=p, phi=_one, T=total * t1)
    lat = _terminal_lattice(claim, g)
    lat = solve_interval(lat, mp, g, tau_len=0.0)
    out: dict[float, PriceSurface] = {}
    want = {m: T for T, m in month_of.items()}
    for i in range(total - 1, -1, -1):
        weighted = np.exp(p * (0.0 if i == total - 1 else t1) * g.pi_nodes)
        data = weighted[:, None, None] * lat.values
        terminal = Lattice(apply_inflation_shock(data, mp, g), lat.time_index)
        lat = solve_interval(terminal, mp, g)
        remaining = total - i
        if remaining in want:
            factor = np.exp(p * t1 * g.pi_nodes)
            T = want[remaining]
            out[T] = PriceSurface(
                factor[:, None, None] * lat.values,
                g,
                ClaimSpec(p=p, phi=_one, T=T),
                mp,
            )
    return out


def zciis_curve(
    mp: ModelParams,
    g: Grid,
    maturities,
    state: tuple[float, float, float],
) -> np.ndarray:
    """Fair swap rates for a strip of monthly maturities at one state,
    computed from a single nominal and a single real backward pass."""
    mats = [float(T) for T in maturities]
    nominal = bond_ladder(mp, g, mats, p=0.0)
    real = bond_ladder(mp, g, mats, p=1.0)
    rates = np.empty(len(mats))
    for i, T in enumerate(mats):
        pn = nominal[T].value_at(*state)
        pr = real[T].value_at(*state)
        rates[i] = _swap_rate(pn, pr, T)
    return rates
