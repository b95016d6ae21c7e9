"""Finite-difference solver for the monthly valuation problem.

Within one observation month the inflation level is frozen, so the value
function psi(t, r, z) of a claim satisfies, for each inflation level pi and
each policy-rate level r_h on the discrete band,

    psi_t + k_sh (b(r) - z) psi_z + 0.5 vol^2(|r - z|^2) z psi_zz
        + lambda_bar * sum_k [psi(t, r + k delta, z) - psi(t, r, z)] q(pi, r, k delta)
        - z psi = 0,

integrated backwards from a terminal slice.  The scheme is Crank-Nicolson in
the z direction with the jump coupling treated explicitly:

* interior nodes use centred second-order differences;
* at z = 0 the equation degenerates to a one-sided hyperbolic row
  (second-order upwind, no artificial boundary condition);
* at z = z_max a Neumann condition psi[., J] = psi[., J-1] folds the last
  super-diagonal entry into the diagonal.

Each implicit step solves, per rate level, a J x J banded system with one
bandwidth-2 entry in the first row; the row is eliminated into the second
row once, after which an ordinary tridiagonal sweep applies.  Matrices are
strictly diagonally dominant for any admissible parameter set, which is
asserted during assembly.

Between months, consecutive problems are linked by the expectation over the
Gaussian monthly inflation innovation (``apply_inflation_shock``), evaluated
by a truncated quadrature on inflation-grid-aligned nodes with linear
interpolation of the lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError, SchemeError
from .model import ModelParams, inflation_mean, jump_probs, short_rate_level, vol_sq

__all__ = [
    "Grid",
    "Lattice",
    "StepCoeffs",
    "BandedSystem",
    "assemble_coeffs",
    "build_matrix",
    "rhs_vector",
    "time_step",
    "apply_inflation_shock",
    "solve_interval",
]


@dataclass(frozen=True)
class Grid:
    """Discretization: time steps per month, rate levels, z nodes, inflation nodes.

    Rate levels r_h = r_min + h * delta, h = 1..H-1, live strictly inside the
    band; H satisfies H >= (r_max - r_min) / delta > H - 1.  z nodes are
    j * dz, j = 0..J.  The inflation grid is uniform.
    """

    n_steps: int
    r_levels: np.ndarray
    z_nodes: np.ndarray
    pi_nodes: np.ndarray
    t1: float
    delta: float

    def __post_init__(self) -> None:
        if self.n_steps < 2:
            raise SchemeError(f"need at least 2 time steps, got {self.n_steps}")
        if len(self.z_nodes) < 4:
            # the three-point z = 0 row needs nodes 0..2 below the top
            raise SchemeError("need at least 3 z intervals")
        if len(self.pi_nodes) < 1:
            raise SchemeError("need at least one inflation node")
        if len(self.pi_nodes) > 1 and not np.all(np.diff(self.pi_nodes) > 0):
            raise SchemeError("inflation nodes must be strictly increasing")
        if not self.z_nodes[-1] > 0:
            raise SchemeError("z_max must be positive")

    @classmethod
    def build(
        cls,
        mp: ModelParams,
        months: int,
        n_steps: int = 24,
        n_z: int = 120,
        z_max: float | None = None,
        n_pi: int = 101,
        z_ref: float | None = None,
        pi_ref: float | None = None,
    ) -> "Grid":
        """Default grid for a claim spanning ``months`` monthly intervals.

        z_max defaults to 4 x max(r_max, z_ref).  The inflation grid is
        centred on pi_star with half-width 6 v sqrt(months) plus the shift
        |beta| (r_max - r_min) / (k_pi - alpha + 1) of the reversion level,
        widened if needed so that pi_ref sits strictly inside.
        """
        ecb, infl = mp.ecb, mp.inflation
        ratio = (ecb.r_max - ecb.r_min) / ecb.delta
        h_count = int(math.ceil(ratio - 1e-12))
        r_levels = ecb.r_min + ecb.delta * np.arange(1, h_count)
        if r_levels.size == 0:
            raise SchemeError("rate band narrower than one step")
        if z_max is None:
            z_max = 4.0 * max(ecb.r_max, z_ref if z_ref is not None else 0.0)
        z_nodes = np.linspace(0.0, z_max, n_z + 1)
        months = max(months, 1)
        half = 6.0 * infl.v * math.sqrt(months)
        half += abs(infl.beta) * (ecb.r_max - ecb.r_min) / (infl.k_pi - infl.alpha + 1.0)
        if pi_ref is not None:
            half = max(half, abs(pi_ref - infl.pi_star) + 6.0 * infl.v)
        if n_pi > 1:
            pi_nodes = np.linspace(infl.pi_star - half, infl.pi_star + half, n_pi)
        else:
            pi_nodes = np.array([pi_ref if pi_ref is not None else infl.pi_star])
        return cls(
            n_steps=n_steps,
            r_levels=r_levels,
            z_nodes=z_nodes,
            pi_nodes=pi_nodes,
            t1=mp.t1,
            delta=ecb.delta,
        )

    @property
    def n_z(self) -> int:
        """Number J of z intervals (nodes are 0..J)."""
        return len(self.z_nodes) - 1

    @property
    def dz(self) -> float:
        return float(self.z_nodes[1] - self.z_nodes[0])

    @property
    def dtau(self) -> float:
        return self.t1 / self.n_steps

    @property
    def dpi(self) -> float:
        if len(self.pi_nodes) < 2:
            return 0.0
        return float(self.pi_nodes[1] - self.pi_nodes[0])

    @property
    def h_count(self) -> int:
        """H: the number of delta steps spanning the band."""
        return len(self.r_levels) + 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.pi_nodes), len(self.r_levels), self.n_z + 1)


@dataclass
class Lattice:
    """Solution values psi[pi, r, z] at one time level."""

    values: np.ndarray
    time_index: int = 0

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise SchemeError("lattice must be (pi, r, z)-shaped")
        if not np.all(np.isfinite(self.values)):
            raise SchemeError("lattice contains non-finite entries")

    def copy(self) -> "Lattice":
        return Lattice(self.values.copy(), self.time_index)


@dataclass(frozen=True)
class StepCoeffs:
    """Per-rate-level scheme coefficients on the z axis.

    Arrays are indexed j = 0..J-1; index 0 of xi/eta/theta/w carries the
    (unused) interior formula value, the actual first row being driven by
    nu[0] and the boundary coefficient xi0.
    """

    nu: np.ndarray
    xi: np.ndarray
    xi0: float
    eta: np.ndarray
    theta: np.ndarray
    w: np.ndarray

    def __post_init__(self) -> None:
        bad = self.w[1:] <= np.abs(self.theta[1:]) + np.abs(self.eta[1:])
        if np.any(bad):
            raise SchemeError("diagonal dominance fails on an interior row")
        if not 1.0 + self.xi0 > 5.0 * abs(self.nu[0]):
            raise SchemeError("diagonal dominance fails on the z = 0 row")


def assemble_coeffs(mp: ModelParams, g: Grid, h: int, dtau: float | None = None) -> StepCoeffs:
    """Scheme coefficients for rate level h (1-based, 1..H-1)."""
    if not 1 <= h <= len(g.r_levels):
        raise SchemeError(f"rate index {h} out of range 1..{len(g.r_levels)}")
    if dtau is None:
        dtau = g.dtau
    r = g.r_levels[h - 1]
    z = g.z_nodes[: g.n_z]
    dz = g.dz
    b = short_rate_level(r, mp.short)
    nu = 0.25 * mp.short.k_sh * (b - z) * dtau / dz
    xi = 0.25 * z * vol_sq((r - z) ** 2, mp.short) * dtau / dz**2
    xi0 = 0.75 * mp.short.k_sh * b * dtau / dz
    eta = xi + nu
    theta = nu - xi
    w = 2.0 * xi + 0.5 * dtau * z + 1.0
    return StepCoeffs(nu=nu, xi=xi, xi0=float(xi0), eta=eta, theta=theta, w=w)


@dataclass(frozen=True)
class BandedSystem:
    """J x J implicit-step matrix in (1, 2)-banded storage.

    ab rows hold, top to bottom, the second super-, super-, main and
    sub-diagonal: ab[2 + i - j, j] = A[i, j].
    """

    ab: np.ndarray

    @property
    def order(self) -> int:
        return self.ab.shape[1]

    def dense(self) -> np.ndarray:
        n = self.order
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(max(0, i - 1), min(n, i + 3)):
                out[i, j] = self.ab[2 + i - j, j]
        return out


def build_matrix(coeffs: StepCoeffs) -> BandedSystem:
    """Implicit-step matrix for one rate level.

    Row 0 is [1 + xi0, -4 nu0, nu0]; interior rows are [theta, w, -eta];
    the last row folds the Neumann condition into the diagonal.
    """
    n = len(coeffs.w)
    ab = np.zeros((4, n))
    ab[2, 0] = 1.0 + coeffs.xi0
    ab[1, 1] = -4.0 * coeffs.nu[0]
    ab[0, 2] = coeffs.nu[0]
    ab[2, 1:] = coeffs.w[1:]
    ab[2, n - 1] = coeffs.w[n - 1] - coeffs.eta[n - 1]
    ab[3, 0 : n - 1] = coeffs.theta[1:]
    ab[1, 2:] = -coeffs.eta[1 : n - 1]
    return BandedSystem(ab=ab)


def _truncated_q(mp: ModelParams, g: Grid) -> np.ndarray:
    """Jump probabilities q[pi, r, k] with moves leaving the level range
    1..H-1 zeroed out (their mass is dropped, not redistributed)."""
    ecb = mp.ecb
    q = jump_probs(
        g.pi_nodes[:, None], g.r_levels[None, :], ecb
    )  # (L, H-1, 2m+1)
    hm = len(g.r_levels)
    for k in range(-ecb.m, ecb.m + 1):
        if k == 0:
            continue
        col = q[..., k + ecb.m]
        h_idx = np.arange(1, hm + 1)
        out_of_range = (h_idx + k < 1) | (h_idx + k > hm)
        col[:, out_of_range] = 0.0
    return q


def rhs_vector(
    lat: Lattice,
    l: int,
    h: int,
    coeffs: StepCoeffs,
    mp: ModelParams,
    g: Grid,
    dtau: float | None = None,
) -> np.ndarray:
    """Explicit right-hand side K for inflation node l and rate level h.

    Interior entries combine the Crank-Nicolson half of the z stencil, the
    fully explicit jump coupling across rate levels and the discounting
    term; the first entry uses the one-sided z = 0 row.  The jump sum runs
    over the moves keeping h + k within 1..H-1.
    """
    if dtau is None:
        dtau = g.dtau
    hm = len(g.r_levels)
    n = g.n_z
    psi = lat.values[l]  # (H-1, J+1)
    row = psi[h - 1]
    z = g.z_nodes[:n]
    q = jump_probs(g.pi_nodes[l], g.r_levels[h - 1], mp.ecb)
    jump = np.zeros(n)
    for k in range(-min(mp.ecb.m, h - 1), min(mp.ecb.m, hm - h) + 1):
        if k == 0:
            continue
        jump += q[k + mp.ecb.m] * (psi[h - 1 + k, :n] - row[:n])
    jump *= dtau * mp.ecb.lambda_bar
    out = np.empty(n)
    out[1:] = (
        row[1:n]
        + coeffs.nu[1:] * (row[2 : n + 1] - row[0 : n - 1])
        + coeffs.xi[1:] * (row[2 : n + 1] - 2.0 * row[1:n] + row[0 : n - 1])
        - 0.5 * z[1:] * dtau * row[1:n]
    )
    out[0] = row[0] + coeffs.nu[0] * (-row[2] + 4.0 * row[1] - 3.0 * row[0])
    return out + jump


class _IntervalKernel:
    """Precomputed per-interval machinery: scheme coefficients, factored
    banded systems and truncated jump weights, shared by every time step."""

    def __init__(self, mp: ModelParams, g: Grid, dtau: float):
        hm = len(g.r_levels)
        n = g.n_z
        self.dtau = dtau
        self.dtlam = dtau * mp.ecb.lambda_bar
        self.m = mp.ecb.m
        self.q = np.ascontiguousarray(_truncated_q(mp, g))
        # rhs stencil coefficients (shared across inflation nodes)
        self.c0 = np.empty((hm, n))
        self.cp = np.empty((hm, n))
        self.cm = np.empty((hm, n))
        self.b_c0 = np.empty(hm)
        self.b_c1 = np.empty(hm)
        self.b_c2 = np.empty(hm)
        # factored implicit systems
        self.mcoef = np.empty((hm, n))
        self.rdprime = np.empty((hm, n))
        self.eprime = np.empty((hm, n))
        self.f0 = np.empty(hm)
        self.rd0 = np.empty(hm)
        self.e0 = np.empty(hm)
        z = g.z_nodes[:n]
        for i in range(hm):
            c = assemble_coeffs(mp, g, i + 1, dtau=dtau)
            self.c0[i] = 1.0 - 2.0 * c.xi - 0.5 * z * dtau
            self.cp[i] = c.eta
            self.cm[i] = -c.theta
            self.b_c0[i] = 1.0 - 3.0 * c.nu[0]
            self.b_c1[i] = 4.0 * c.nu[0]
            self.b_c2[i] = -c.nu[0]
            d0 = 1.0 + c.xi0
            e0 = -4.0 * c.nu[0]
            f0 = c.nu[0]
            diag = c.w.copy()
            diag[n - 1] = c.w[n - 1] - c.eta[n - 1]
            sup = -c.eta
            sub = c.theta
            mcoef = np.zeros(n)
            dprime = np.zeros(n)
            eprime = np.zeros(n)
            mcoef[0] = sub[1] / d0
            dprime[1] = diag[1] - mcoef[0] * e0
            eprime[1] = sup[1] - mcoef[0] * f0
            for j in range(2, n):
                mcoef[j - 1] = sub[j] / dprime[j - 1]
                dprime[j] = diag[j] - mcoef[j - 1] * eprime[j - 1]
                if j < n - 1:
                    eprime[j] = sup[j]
            if np.any(dprime[1:] == 0.0):
                raise SchemeError("implicit system is singular")
            self.mcoef[i] = mcoef
            self.rdprime[i, 1:] = 1.0 / dprime[1:]
            self.rdprime[i, 0] = 0.0
            self.eprime[i] = eprime
            self.f0[i] = f0
            self.rd0[i] = 1.0 / d0
            self.e0[i] = e0

    def advance(self, psi: np.ndarray, out: np.ndarray) -> None:
        from ._stepkern import pide_step

        pide_step(
            psi,
            out,
            self.c0,
            self.cp,
            self.cm,
            self.rdprime,
            self.mcoef,
            self.eprime,
            self.f0,
            self.rd0,
            self.e0,
            self.b_c0,
            self.b_c1,
            self.b_c2,
            self.q,
            self.dtlam,
            self.m,
        )


def _time_step_reference(lat: Lattice, mp: ModelParams, g: Grid, dtau: float | None = None) -> Lattice:
    """One implicit step via the generic banded solver; the plain transcription
    of the scheme, kept as the cross-check for the fused kernel."""
    from scipy.linalg import solve_banded

    if dtau is None:
        dtau = g.dtau
    L, hm, _ = lat.values.shape
    n = g.n_z
    new = np.empty_like(lat.values)
    for h in range(1, hm + 1):
        coeffs = assemble_coeffs(mp, g, h, dtau=dtau)
        system = build_matrix(coeffs)
        rhs = np.empty((n, L))
        for l in range(L):
            rhs[:, l] = rhs_vector(lat, l, h, coeffs, mp, g, dtau=dtau)
        sol = solve_banded((1, 2), system.ab, rhs)
        new[:, h - 1, :n] = sol.T
        new[:, h - 1, n] = sol[n - 1]
    return Lattice(new, lat.time_index + 1)


def time_step(lat: Lattice, mp: ModelParams, g: Grid, dtau: float | None = None) -> Lattice:
    """Advance the lattice by one implicit step of size dtau (default t1/N)."""
    if dtau is None:
        dtau = g.dtau
    kern = _IntervalKernel(mp, g, dtau)
    out = np.empty_like(lat.values)
    kern.advance(np.ascontiguousarray(lat.values), out)
    return Lattice(out, lat.time_index + 1)


class _ShockQuadrature:
    """Quadrature of the Gaussian monthly inflation innovation on
    inflation-grid-aligned nodes, with linear interpolation of the lattice.

    Weights are proportional to the normal density at multiples of dpi,
    truncated at 6 standard deviations and renormalized; evaluation points
    mean(pi, r) + u are clamped to the grid ends.  The sum is arranged as
    g0 + sum_s w_s (g_s - g0) so that inflation-independent data is
    reproduced exactly.
    """

    def __init__(self, mp: ModelParams, g: Grid):
        L = len(g.pi_nodes)
        self.trivial = L < 2
        if self.trivial:
            return
        v = mp.inflation.v
        dpi = g.dpi
        s_max = max(1, int(math.ceil(6.0 * v / dpi)))
        u = dpi * np.arange(-s_max, s_max + 1)
        w = np.exp(-0.5 * (u / v) ** 2)
        self.weights = w / w.sum()
        mean = inflation_mean(
            g.pi_nodes[:, None], g.r_levels[None, :], mp.inflation
        )  # (L, H-1)
        pos = (mean[:, :, None] + u[None, None, :] - g.pi_nodes[0]) / dpi
        idx = np.clip(np.floor(pos).astype(np.int64), 0, L - 2)
        self.idx = idx
        self.frac = np.clip(pos - idx, 0.0, 1.0)
        self.center = s_max

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self.trivial:
            return values.copy()
        hm = values.shape[1]
        h_ix = np.arange(hm)[None, :]
        c = self.center
        g0 = self._gather(values, h_ix, c)
        out = g0.copy()
        for s in range(len(self.weights)):
            if s == c:
                continue
            out += self.weights[s] * (self._gather(values, h_ix, s) - g0)
        return out

    def _gather(self, values: np.ndarray, h_ix: np.ndarray, s: int) -> np.ndarray:
        idx = self.idx[:, :, s]
        frac = self.frac[:, :, s][:, :, None]
        lo = values[idx, h_ix, :]
        hi = values[idx + 1, h_ix, :]
        return lo + frac * (hi - lo)


def apply_inflation_shock(values: np.ndarray, mp: ModelParams, g: Grid) -> np.ndarray:
    """Expectation of the lattice data over next month's inflation draw.

    For each (pi, r, z) node, averages values over the Gaussian innovation
    around the conditional mean of inflation.  Constants, and any data
    independent of the inflation coordinate, are preserved exactly.
    """
    if values.shape != g.shape:
        raise SchemeError("values do not match the grid")
    return _ShockQuadrature(mp, g).apply(values)


def solve_interval(
    terminal: Lattice,
    mp: ModelParams,
    g: Grid,
    tau_len: float | None = None,
    n_steps: int | None = None,
) -> Lattice:
    """Integrate the monthly problem backwards over an interval of length
    tau_len (default one month) starting from the terminal slice.

    The step count keeps the configured step density; tau_len = 0 returns a
    copy of the terminal slice.  The Neumann condition is imposed on the
    terminal data as on every computed level.
    """
    if tau_len is None:
        tau_len = g.t1
    if tau_len < 0:
        raise SchemeError(f"interval length must be >= 0, got {tau_len}")
    if terminal.values.shape != g.shape:
        raise SchemeError("terminal slice does not match the grid")
    cur = terminal.values.copy()
    cur[:, :, -1] = cur[:, :, -2]
    if tau_len == 0.0:
        return Lattice(cur.copy(), terminal.time_index)
    if n_steps is None:
        n_steps = max(1, round(g.n_steps * tau_len / g.t1))
    dtau = tau_len / n_steps
    kern = _IntervalKernel(mp, g, dtau)
    buf = np.empty_like(cur)
    for _ in range(n_steps):
        kern.advance(cur, buf)
        cur, buf = buf, cur
    return Lattice(cur, terminal.time_index + n_steps)
