"""Fused implicit-step kernel for the monthly finite-difference problem.

One call assembles the explicit right-hand side (Crank-Nicolson z stencil,
explicit jump coupling, one-sided z = 0 row) and performs the forward
elimination and back substitution of the prefactored banded systems, for
every (inflation, rate) pair.  Mathematically identical to the generic
banded-solver path in ``pide``; kept separate so that the reference
implementation stays a plain transcription of the scheme.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def pide_step(psi, out, c0, cp, cm, rdprime, mcoef, eprime, f0, rd0, e0,
              b_c0, b_c1, b_c2, qk, dtlam, mj):
    n_pi, n_r, n_nodes = psi.shape
    n = n_nodes - 1
    for l in range(n_pi):
        for h in range(n_r):
            row = psi[l, h]
            res = out[l, h]
            # z = 0 row of the right-hand side, jump term included
            wsum = 0.0
            q0 = b_c0[h] * row[0] + b_c1[h] * row[1] + b_c2[h] * row[2]
            for k in range(-mj, mj + 1):
                hh = h + k
                if k == 0 or hh < 0 or hh >= n_r:
                    continue
                w = dtlam * qk[l, h, k + mj]
                wsum += w
                q0 += w * psi[l, hh, 0]
            res[0] = q0 - wsum * row[0]
            # interior rows fused with the forward elimination sweep
            prev = res[0]
            if mj == 1:
                wdn = dtlam * qk[l, h, 0] if h > 0 else 0.0
                wup = dtlam * qk[l, h, 2] if h < n_r - 1 else 0.0
                rdn = psi[l, h - 1] if h > 0 else row
                rup = psi[l, h + 1] if h < n_r - 1 else row
                for j in range(1, n):
                    acc = (
                        (c0[h, j] - wsum) * row[j]
                        + cp[h, j] * row[j + 1]
                        + cm[h, j] * row[j - 1]
                        + wdn * rdn[j]
                        + wup * rup[j]
                    )
                    prev = acc - mcoef[h, j - 1] * prev
                    res[j] = prev
            else:
                for j in range(1, n):
                    acc = (
                        (c0[h, j] - wsum) * row[j]
                        + cp[h, j] * row[j + 1]
                        + cm[h, j] * row[j - 1]
                    )
                    for k in range(-mj, mj + 1):
                        hh = h + k
                        if k == 0 or hh < 0 or hh >= n_r:
                            continue
                        acc += dtlam * qk[l, h, k + mj] * psi[l, hh, j]
                    prev = acc - mcoef[h, j - 1] * prev
                    res[j] = prev
            # back substitution
            xn = res[n - 1] * rdprime[h, n - 1]
            res[n - 1] = xn
            for j in range(n - 2, 0, -1):
                xn = (res[j] - eprime[h, j] * xn) * rdprime[h, j]
                res[j] = xn
            res[0] = (res[0] - e0[h] * res[1] - f0[h] * res[2]) * rd0[h]
            res[n] = res[n - 1]
