"""Univariate local-linear kernel regression with leave-one-out bandwidth
selection, plus conditional-variance smoothing of squared residuals.

The Gaussian-kernel local-linear fit solves a weighted straight-line problem
at each evaluation point; leave-one-out residuals are exact (the held-out
point's kernel moments are subtracted, not approximated). Above _EXACT_MAX_N
observations the kernel moments are computed on a linearly binned grid and
interpolated, which approximates the same estimator at O(n) cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

_N_BW = 25
_BW_REL_LO = 0.01
_BW_REL_HI = 1.0
_EXACT_MAX_N = 1500
_GRID = 512
_MASS_FLOOR = 1e-12
_DEN_FLOOR = 1e-300


@dataclass
class SmootherFit:
    """A fitted conditional-mean (or conditional-variance) smoother."""

    x_train: np.ndarray
    y_train: np.ndarray
    bandwidth: float
    fitted: np.ndarray
    residuals: np.ndarray
    loocv_score: float
    floor: float | None = None
    _state: dict = field(default_factory=dict, repr=False)

    def predict(self, x_query) -> np.ndarray:
        """Local-linear prediction at arbitrary points; outside the training
        range the boundary local line is extended."""
        q = np.atleast_1d(np.asarray(x_query, dtype=float))
        out = np.empty_like(q)
        st = self._state
        lo, hi = st["x_lo"], st["x_hi"]
        inside = (q >= lo) & (q <= hi)
        if inside.any():
            mom = _moments_at(st, q[inside])
            out[inside] = _local_linear(mom, st, q[inside])[0]
        below = q < lo
        above = q > hi
        if below.any():
            m, b = st["boundary_lo"]
            out[below] = m + b * (q[below] - lo)
        if above.any():
            m, b = st["boundary_hi"]
            out[above] = m + b * (q[above] - hi)
        if self.floor is not None:
            out = np.maximum(out, self.floor)
        return out if np.ndim(x_query) else out[0]


def _bandwidth_grid(x_sd: float) -> np.ndarray:
    return x_sd * np.logspace(math.log10(_BW_REL_LO), math.log10(_BW_REL_HI), _N_BW)


def _moments_exact(x: np.ndarray, y: np.ndarray, h: float, q: np.ndarray):
    s0 = np.zeros_like(q)
    s1 = np.zeros_like(q)
    s2 = np.zeros_like(q)
    r0 = np.zeros_like(q)
    r1 = np.zeros_like(q)
    # chunked over query points to bound the (chunk, n) kernel matrix
    step = max(1, int(2_000_000 // max(len(x), 1)))
    for a in range(0, len(q), step):
        b = a + step
        dx = x[None, :] - q[a:b, None]
        w = np.exp(-0.5 * (dx / h) ** 2)
        wdx = w * dx
        s0[a:b] = w.sum(axis=1)
        s1[a:b] = wdx.sum(axis=1)
        s2[a:b] = (wdx * dx).sum(axis=1)
        r0[a:b] = w @ y
        r1[a:b] = wdx @ y
    return s0, s1, s2, r0, r1


def _grid_moments(t: np.ndarray, c: np.ndarray, yc: np.ndarray, h: float):
    dt = t[None, :] - t[:, None]
    k = np.exp(-0.5 * (dt / h) ** 2)
    kdt = k * dt
    return k @ c, kdt @ c, (kdt * dt) @ c, k @ yc, kdt @ yc


def _moments_at(state: dict, q: np.ndarray):
    if state["path"] == "exact":
        return _moments_exact(state["x"], state["y"], state["h"], q)
    t = state["t"]
    return tuple(np.interp(q, t, arr) for arr in state["grid_moments"])


def _local_linear(mom, state: dict, q: np.ndarray):
    """Evaluate the fit from kernel moments, with the near-singular fallback
    ladder: local line -> local constant -> nearest neighbor."""
    s0, s1, s2, r0, r1 = mom
    den = s0 * s2 - s1 * s1
    safe_den = np.where(den > _DEN_FLOOR, den, 1.0)
    m = (s2 * r0 - s1 * r1) / safe_den
    slope = (s0 * r1 - s1 * r0) / safe_den
    # relative singularity check: a lone kernel mass gives den ~ 0
    bad = ~np.isfinite(m) | (den <= 1e-13 * (s0 * s2 + s1 * s1) + _DEN_FLOOR)
    if bad.any():
        nw = np.where(s0 > _MASS_FLOOR, r0 / np.maximum(s0, _MASS_FLOOR), np.nan)
        m = np.where(bad, nw, m)
        slope = np.where(bad, 0.0, slope)
        nn = ~np.isfinite(m)
        if nn.any():
            xs, ys = state["x_sorted"], state["y_sorted"]
            idx = np.clip(np.searchsorted(xs, q[nn]), 1, len(xs) - 1)
            left = np.abs(q[nn] - xs[idx - 1]) <= np.abs(xs[idx] - q[nn])
            m[nn] = np.where(left, ys[idx - 1], ys[idx])
    return m, slope


def _loocv_score(mom, y: np.ndarray) -> float:
    s0, s1, s2, r0, r1 = mom
    s0l = s0 - 1.0
    r0l = r0 - y
    den = s0l * s2 - s1 * s1
    if np.any(s0l <= _MASS_FLOOR) or np.any(den <= _DEN_FLOOR):
        return math.inf
    m_loo = (s2 * r0l - s1 * r1) / den
    if not np.all(np.isfinite(m_loo)):
        return math.inf
    return float(np.mean((y - m_loo) ** 2))


def fit_mean(x, y, bandwidth: float | None = None) -> SmootherFit:
    """Local-linear regression of y on x; bandwidth by exact leave-one-out
    cross-validation over a log-spaced grid (ties broken toward the larger,
    smoother bandwidth) unless one is forced explicitly."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise DomainError(f"x and y lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 20:
        raise DomainError(f"need at least 20 observations, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("x and y must be finite")
    x_sd = float(np.std(x))
    if x_sd == 0.0:
        raise DomainError("x is degenerate: all values identical")

    path = "exact" if len(x) <= _EXACT_MAX_N else "binned"
    state: dict = {
        "path": path,
        "x": x,
        "y": y,
        "x_lo": float(x.min()),
        "x_hi": float(x.max()),
    }
    order = np.argsort(x, kind="stable")
    state["x_sorted"] = x[order]
    state["y_sorted"] = y[order]

    if path == "binned":
        t = np.linspace(state["x_lo"], state["x_hi"], _GRID)
        delta = (state["x_hi"] - state["x_lo"]) / (_GRID - 1)
        pos = (x - state["x_lo"]) / delta
        i0 = np.clip(pos.astype(np.int64), 0, _GRID - 2)
        frac = pos - i0
        c = np.bincount(i0, 1.0 - frac, _GRID) + np.bincount(i0 + 1, frac, _GRID)
        yc = np.bincount(i0, y * (1.0 - frac), _GRID) + np.bincount(i0 + 1, y * frac, _GRID)
        state["t"] = t
        state["c"] = c
        state["yc"] = yc
        # gather indices reused across the bandwidth grid
        gi, gf = i0, frac
        dt = t[None, :] - t[:, None]
        dt2 = dt * dt

        def moments_for(h: float, q: np.ndarray):
            k = np.exp(dt2 / (-2.0 * h * h))
            kdt = k * dt
            gm = (k @ c, kdt @ c, (kdt * dt) @ c, k @ yc, kdt @ yc)
            if q is x:
                return tuple(a[gi] * (1.0 - gf) + a[gi + 1] * gf for a in gm)
            return tuple(np.interp(q, t, a) for a in gm)

    else:
        dx_full = x[None, :] - x[:, None]
        dx2_full = dx_full * dx_full

        def moments_for(h: float, q: np.ndarray):
            if q is x:
                w = np.exp(dx2_full / (-2.0 * h * h))
                wdx = w * dx_full
                return (
                    w.sum(axis=1), wdx.sum(axis=1), (wdx * dx_full).sum(axis=1),
                    w @ y, wdx @ y,
                )
            return _moments_exact(x, y, h, q)

    if bandwidth is not None:
        if not (bandwidth > 0.0 and math.isfinite(bandwidth)):
            raise DomainError(f"bandwidth must be finite and positive, got {bandwidth!r}")
        h_sel = float(bandwidth)
        best_score = _loocv_score(moments_for(h_sel, x), y)
    else:
        grid = _bandwidth_grid(x_sd)
        best_score, h_sel = math.inf, None
        for h in grid:
            score = _loocv_score(moments_for(float(h), x), y)
            if score <= best_score:
                best_score, h_sel = score, float(h)
        if h_sel is None or not math.isfinite(best_score):
            raise DomainError("leave-one-out selection failed: all bandwidths singular")

    state["h"] = h_sel
    if path == "binned":
        state["grid_moments"] = _grid_moments(state["t"], state["c"], state["yc"], h_sel)

    fitted, _ = _local_linear(_moments_at(state, x), state, x)
    for side, xq in (("boundary_lo", state["x_lo"]), ("boundary_hi", state["x_hi"])):
        qa = np.array([xq])
        m, b = _local_linear(_moments_at(state, qa), state, qa)
        state[side] = (float(m[0]), float(b[0]))

    return SmootherFit(
        x_train=x,
        y_train=y,
        bandwidth=h_sel,
        fitted=fitted,
        residuals=y - fitted,
        loocv_score=best_score,
        _state=state,
    )


def fit_variance(fit: SmootherFit) -> SmootherFit:
    """Conditional-variance estimate: a second local-linear fit of squared
    residuals on x, floored at max(1e-10 * Var(y), 1e-300)."""
    sq = fit.residuals**2
    floor = max(1e-10 * float(np.var(fit.y_train)), 1e-300)
    vfit = fit_mean(fit.x_train, sq)
    vfit.fitted = np.maximum(vfit.fitted, floor)
    vfit.residuals = vfit.y_train - vfit.fitted
    vfit.floor = floor
    return vfit


def residual_variance(fit: SmootherFit) -> float:
    """Mean squared residual of a fit."""
    return float(np.mean(fit.residuals**2))
