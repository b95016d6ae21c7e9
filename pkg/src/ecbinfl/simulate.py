"""Monte Carlo engine for the joint (inflation, policy rate, short rate)
process; the independent pricing oracle for the finite-difference solver.

The policy rate jumps at the event times of a constant-intensity Poisson
process; each event draws a move from the state-dependent distribution
(possibly the zero move).  Inflation is piecewise constant and resamples at
the month boundaries.  The short rate follows an Euler discretization of its
square-root dynamics whose node set contains every month boundary and every
jump time exactly; between those, steps are uniform with size at most the
configured dt.

Positivity handling is full-truncation by default (drift and diffusion
evaluated at max(z, 0), the raw state may dip below zero and is floored on
readout); a reflecting scheme is available.  The discount integral uses the
trapezoidal rule on the Euler nodes; the inflation integral is exact because
the integrand is piecewise constant.

Paths are generated in fixed-size chunks, each with its own counter-based
substream spawned from the seed, so results are bitwise reproducible and
independent of how chunks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, PricingError
from .model import EcbParams, ModelParams, inflation_mean, jump_probs, short_rate_level, vol_sq

__all__ = [
    "PathConfig",
    "JointPath",
    "SimStats",
    "simulate_path",
    "simulate_terminals",
    "mc_price",
]

_CHUNK = 16384

FULL_TRUNCATION = "full_truncation"
REFLECTION = "reflection"


@dataclass(frozen=True)
class PathConfig:
    """Simulation controls: horizon (years), Euler step, seed and the
    positivity scheme.  dt is snapped per month so that month boundaries
    are hit exactly; it must not exceed one month."""

    horizon: float
    dt: float
    seed: int = 0
    scheme: str = FULL_TRUNCATION
    antithetic: bool = False

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ParameterError(f"horizon must be > 0, got {self.horizon}")
        if not self.dt > 0.0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if self.scheme not in (FULL_TRUNCATION, REFLECTION):
            raise ParameterError(f"unknown scheme {self.scheme!r}")


@dataclass
class JointPath:
    """One realized path on its augmented node set (Euler nodes plus jump
    times), with running integrals of the short rate (trapezoidal) and of
    inflation (exact)."""

    times: np.ndarray
    pi: np.ndarray
    r: np.ndarray
    rsh: np.ndarray
    int_rsh: np.ndarray
    int_pi: np.ndarray
    jump_times: np.ndarray


@dataclass
class SimStats:
    """Terminal cross-section of a batch of paths plus scheme diagnostics."""

    pi: np.ndarray
    r: np.ndarray
    rsh: np.ndarray
    discount: np.ndarray
    index_growth: np.ndarray
    jump_counts: np.ndarray
    floored_fraction: float
    n_nodes: int


def _month_plan(T: float, t1: float, dt: float) -> list[tuple[float, int]]:
    """(length, substeps) per monthly interval covering [0, T]."""
    if dt > t1 + 1e-12:
        raise ParameterError("dt must not exceed the monthly interval")
    full = int(math.floor(T / t1 + 1e-9))
    plan = []
    for _ in range(full):
        n = max(1, round(t1 / dt))
        plan.append((t1, n))
    rem = T - full * t1
    if rem > 1e-12:
        plan.append((rem, max(1, round(rem / dt))))
    return plan


class _ChunkState:
    """Mutable state of one chunk of paths while streaming through time."""

    def __init__(self, n: int, init, rng, mp: ModelParams, T: float, antithetic: bool):
        if antithetic and n % 2:
            raise ParameterError("antithetic sampling needs an even path count")
        pi0, r0, z0 = init
        self.pi = np.full(n, float(pi0))
        self.r = np.full(n, float(r0))
        self.x = np.full(n, float(z0))  # raw short-rate state (may dip < 0)
        self.acc_z = np.zeros(n)
        self.acc_pi = np.zeros(n)
        self.floored = 0
        self.nodes = 0
        self.rng = rng
        self.anti = antithetic
        lam = mp.ecb.lambda_bar
        if lam > 0.0:
            counts = rng.poisson(lam * T, size=n)
            if antithetic:
                counts[n // 2 :] = counts[: n // 2]
            kmax = int(counts.max()) if n else 0
            times = np.full((n, max(kmax, 1)), np.inf)
            if kmax:
                u = rng.random((n, kmax))
                if antithetic:
                    u[n // 2 :] = u[: n // 2]
                u = u * T
                u[np.arange(kmax)[None, :] >= counts[:, None]] = np.inf
                u.sort(axis=1)
                times = u
            ujump = rng.random((n, max(kmax, 1)))
            if antithetic:
                ujump[n // 2 :] = 1.0 - ujump[: n // 2]
        else:
            counts = np.zeros(n, dtype=int)
            times = np.full((n, 1), np.inf)
            ujump = np.zeros((n, 1))
        self.jump_times = times
        self.jump_u = ujump
        self.jump_counts = counts
        self.jptr = np.zeros(n, dtype=int)

    def normals(self, idx: np.ndarray) -> np.ndarray:
        if not self.anti:
            return self.rng.standard_normal(idx.size)
        # second-half paths mirror the draws of their first-half partners;
        # jump structures are mirrored, so activity stays pairwise symmetric
        half = self.pi.size // 2
        nlow = int(np.searchsorted(idx, half))
        lows, partners = idx[:nlow], idx[nlow:] - half
        if lows.size != partners.size or np.any(lows != partners):
            raise PricingError("antithetic pairing lost path symmetry")
        z = self.rng.standard_normal(nlow)
        return np.concatenate([z, -z])

    def next_jump(self) -> np.ndarray:
        ptr = np.minimum(self.jptr, self.jump_times.shape[1] - 1)
        t = self.jump_times[np.arange(self.jptr.size), ptr]
        t = np.where(self.jptr >= self.jump_times.shape[1], np.inf, t)
        return t


def _euler_update(state: _ChunkState, idx: np.ndarray, h: np.ndarray, mp: ModelParams, scheme: str) -> None:
    """Advance the short rate of the selected paths by per-path step h."""
    x = state.x[idx]
    r = state.r[idx]
    xp = np.maximum(x, 0.0)
    drift = mp.short.k_sh * (short_rate_level(r, mp.short) - xp)
    sig = np.sqrt(vol_sq((r - xp) ** 2, mp.short) * xp)
    z = state.normals(idx)
    if scheme == FULL_TRUNCATION:
        x_new = x + drift * h + sig * np.sqrt(h) * z
    else:
        x_new = np.abs(xp + drift * h + sig * np.sqrt(h) * z)
    state.floored += int(np.count_nonzero(x_new < 0.0))
    state.nodes += idx.size
    state.acc_z[idx] += 0.5 * (xp + np.maximum(x_new, 0.0)) * h
    state.acc_pi[idx] += state.pi[idx] * h
    state.x[idx] = x_new


def _apply_jumps(state: _ChunkState, idx: np.ndarray, ecb: EcbParams) -> None:
    """Resolve one pending jump per selected path."""
    q = jump_probs(state.pi[idx], state.r[idx], ecb)
    cum = np.cumsum(q, axis=-1)
    u = state.jump_u[idx, np.minimum(state.jptr[idx], state.jump_u.shape[1] - 1)]
    pick = np.sum(cum < u[:, None], axis=-1)
    pick = np.minimum(pick, 2 * ecb.m)
    rowq = q[np.arange(idx.size), pick]
    move = np.where(rowq > 0.0, (pick - ecb.m) * ecb.delta, 0.0)
    state.r[idx] = state.r[idx] + move
    if np.any(state.r[idx] <= ecb.r_min) or np.any(state.r[idx] >= ecb.r_max):
        raise PricingError("policy rate left its band; jump rule is inconsistent")
    state.jptr[idx] += 1


def _stream_chunk(
    mp: ModelParams,
    init,
    T: float,
    cfg: PathConfig,
    n: int,
    rng,
    record: bool = False,
):
    """Run one chunk of paths to T.  Optionally record every node."""
    state = _ChunkState(n, init, rng, mp, T, cfg.antithetic)
    plan = _month_plan(T, mp.t1, cfg.dt)
    rec_t, rec_pi, rec_r, rec_x, rec_az, rec_api = ([], [], [], [], [], [])

    def snap(tcur):
        rec_t.append(tcur.copy())
        rec_pi.append(state.pi.copy())
        rec_r.append(state.r.copy())
        rec_x.append(np.maximum(state.x, 0.0))
        rec_az.append(state.acc_z.copy())
        rec_api.append(state.acc_pi.copy())

    t_base = 0.0
    if record:
        snap(np.zeros(n))
    for span, nsub in plan:
        h = span / nsub
        for k in range(nsub):
            t_next = t_base + (k + 1) * h
            t_cur = np.full(n, t_base + k * h)
            while True:
                nj = state.next_jump()
                target = np.minimum(nj, t_next)
                step = target - t_cur
                move = np.flatnonzero(step > 1e-15)
                if move.size:
                    _euler_update(state, move, step[move], mp, cfg.scheme)
                    t_cur = np.maximum(t_cur, target)
                jumping = np.flatnonzero(nj <= t_next)
                if jumping.size == 0:
                    break
                _apply_jumps(state, jumping, mp.ecb)
                if record:
                    snap(t_cur)
            if record:
                snap(np.full(n, t_next))
        t_base += span
        # month boundary: resample inflation from its conditional law
        if abs(t_base / mp.t1 - round(t_base / mp.t1)) < 1e-9:
            eps = state.normals(np.arange(n)) * mp.inflation.v
            state.pi = inflation_mean(state.pi, state.r, mp.inflation) + eps
            if record:
                snap(np.full(n, t_base))
    stats = SimStats(
        pi=state.pi,
        r=state.r,
        rsh=np.maximum(state.x, 0.0),
        discount=np.exp(-state.acc_z),
        index_growth=np.exp(state.acc_pi),
        jump_counts=state.jump_counts,
        floored_fraction=state.floored / max(state.nodes, 1),
        n_nodes=state.nodes,
    )
    if not record:
        return stats, None
    rec = (
        np.stack(rec_t, axis=1),
        np.stack(rec_pi, axis=1),
        np.stack(rec_r, axis=1),
        np.stack(rec_x, axis=1),
        np.stack(rec_az, axis=1),
        np.stack(rec_api, axis=1),
        state.jump_times,
    )
    return stats, rec


def _validate_init(mp: ModelParams, init) -> None:
    _, r0, z0 = init
    if not mp.ecb.r_min < r0 < mp.ecb.r_max:
        raise ParameterError(f"initial policy rate {r0} outside the open band")
    if not z0 > 0.0:
        raise ParameterError(f"initial short rate must be > 0, got {z0}")


def simulate_path(mp: ModelParams, init, cfg: PathConfig) -> JointPath:
    """Simulate one path of (Pi, R, R_sh) over [0, horizon].

    The returned node set is the Euler grid augmented with the realized jump
    times; duplicate nodes introduced by the jump handling are collapsed.
    """
    _validate_init(mp, init)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    _, rec = _stream_chunk(mp, init, cfg.horizon, cfg, 1, rng, record=True)
    t_all, pi_all, r_all, x_all, az_all, api_all, jt = rec
    t = t_all[0]
    # collapse coincident nodes, keeping the last (post-jump / post-resample)
    keep = np.ones(len(t), dtype=bool)
    keep[:-1] = np.diff(t) > 1e-15
    return JointPath(
        times=t[keep],
        pi=pi_all[0][keep],
        r=r_all[0][keep],
        rsh=x_all[0][keep],
        int_rsh=az_all[0][keep],
        int_pi=api_all[0][keep],
        jump_times=jt[0][np.isfinite(jt[0])],
    )


def _chunk_seeds(seed: int, n_chunks: int):
    return np.random.SeedSequence(seed).spawn(n_chunks)


def simulate_terminals(
    mp: ModelParams, init, n_paths: int, cfg: PathConfig, horizon: float | None = None
) -> SimStats:
    """Terminal draws of n_paths paths at the horizon, chunked and seeded
    reproducibly."""
    _validate_init(mp, init)
    if n_paths < 1:
        raise ParameterError("need at least one path")
    T = cfg.horizon if horizon is None else horizon
    out: list[SimStats] = []
    n_chunks = (n_paths + _CHUNK - 1) // _CHUNK
    floored = 0
    nodes = 0
    for ss in zip(_chunk_seeds(cfg.seed, n_chunks), range(n_chunks)):
        seq, ci = ss
        n = min(_CHUNK, n_paths - ci * _CHUNK)
        rng = np.random.Generator(np.random.Philox(seq))
        stats, _ = _stream_chunk(mp, init, T, cfg, n, rng)
        out.append(stats)
        floored += round(stats.floored_fraction * stats.n_nodes)
        nodes += stats.n_nodes
    return SimStats(
        pi=np.concatenate([s.pi for s in out]),
        r=np.concatenate([s.r for s in out]),
        rsh=np.concatenate([s.rsh for s in out]),
        discount=np.concatenate([s.discount for s in out]),
        index_growth=np.concatenate([s.index_growth for s in out]),
        jump_counts=np.concatenate([s.jump_counts for s in out]),
        floored_fraction=floored / max(nodes, 1),
        n_nodes=nodes,
    )


def mc_price(claim, mp: ModelParams, init, n_paths: int, cfg: PathConfig):
    """Monte Carlo estimate of the discounted claim value and its standard
    error: mean of exp(-int R_sh) * Y(T)^p * phi(terminal state)."""
    if n_paths < 2:
        raise ParameterError("need at least two paths for a standard error")
    if claim.T > cfg.horizon + 1e-12:
        raise PricingError("claim matures beyond the simulation horizon")
    stats = simulate_terminals(mp, init, n_paths, cfg, horizon=claim.T)
    pay = stats.discount * stats.index_growth**claim.p * np.asarray(
        claim.phi(stats.pi, stats.r, stats.rsh), dtype=float
    )
    price = float(pay.mean())
    se = float(pay.std(ddof=1) / math.sqrt(n_paths))
    return price, se
