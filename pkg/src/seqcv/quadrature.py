"""Adaptive Simpson quadrature, vectorized over subintervals.

The integrand receives a 1-D array of abscissae and returns an array whose
first axis matches it; trailing axes make the integrand vector-valued. All
subintervals that still need refinement are evaluated in a single call per
round, so a vector-valued integrand shares one subdivision across its
components (an interval is accepted only when every component converged).
"""

from __future__ import annotations

import numpy as np

__all__ = ["adaptive_simpson"]


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 40,
                     min_depth: int = 2):
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Returns ``(value, error_estimate)``. For a vector-valued integrand both
    are arrays with the integrand's trailing shape. The tolerance of an
    interval is split evenly between its halves, and each accepted pair of
    halves is Richardson-corrected.
    """
    if a == b:
        probe = np.asarray(f(np.array([a])))
        z = np.zeros(probe.shape[1:])
        return z, z.copy()

    x0 = np.array([a, 0.5 * (a + b), b])
    y0 = np.asarray(f(x0), dtype=float)
    tail = y0.shape[1:]
    ax = tuple(range(1, y0.ndim))

    lo = np.array([a])
    hi = np.array([b])
    fa, fm, fb = y0[0:1], y0[1:2], y0[2:3]
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tols = np.array([tol])

    total = np.zeros(tail)
    err = np.zeros(tail)
    depth = 0
    while lo.size:
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        ys = np.asarray(f(np.concatenate([lm, rm])), dtype=float)
        flm, frm = ys[: lo.size], ys[lo.size:]
        w = ((hi - lo) / 12.0).reshape((-1,) + (1,) * len(tail))
        left = w * (fa + 4.0 * flm + fm)
        right = w * (fm + 4.0 * frm + fb)
        diff = left + right - whole
        size = np.abs(diff).max(axis=ax) if ax else np.abs(diff)
        done = (size <= 15.0 * tols) & (depth >= min_depth)
        depth += 1
        if depth >= max_depth:
            done[:] = True
        if np.any(done):
            total += (left[done] + right[done] + diff[done] / 15.0).sum(axis=0)
            err += (np.abs(diff[done]) / 15.0).sum(axis=0)
        keep = ~done
        if not np.any(keep):
            break
        lo_k, mid_k, hi_k = lo[keep], mid[keep], hi[keep]
        lo = np.concatenate([lo_k, mid_k])
        hi = np.concatenate([mid_k, hi_k])
        fa = np.concatenate([fa[keep], fm[keep]])
        fb_new = np.concatenate([fm[keep], fb[keep]])
        fm = np.concatenate([flm[keep], frm[keep]])
        fb = fb_new
        whole = np.concatenate([left[keep], right[keep]])
        tols = np.concatenate([tols[keep], tols[keep]]) / 2.0
    if not tail:
        return float(total), float(err)
    return total, err
