"""Tail transform, fast-decay certification, and power-law fitting.

The variable w(r) = r^mu f(r) turns the fast-decay profile into a bounded
monotone quantity with limit Kstar; the next-order behavior is
w = Kstar - A r^{-theta} + o(r^{-theta}).  This module certifies that a
shot trajectory follows the fast-decay branch and estimates (A, theta).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .exponents import DerivedConstants

__all__ = [
    "WState",
    "TailFit",
    "CertReport",
    "w_transform",
    "w_residual",
    "certify_B",
    "fit_tail",
    "tailfit_json",
]


@dataclass
class WState:
    """Vectorized sample sequence of the tail variables.

    Wtail = r w' - mu w = r^{mu+1} f' (signed, negative on a decreasing
    profile); gamma_term = beta r^{gamma+1} w' is the drift diagnostic
    entering the w-equation.
    """
    r: np.ndarray
    w: np.ndarray
    Wtail: np.ndarray
    gamma_term: np.ndarray

    def __len__(self) -> int:
        return len(self.r)


def _wprime(st: WState, mu: float) -> np.ndarray:
    # exact identity r w' = mu w + r^{mu+1} f'
    return (mu * st.w + st.Wtail) / st.r


@dataclass
class CertReport:
    ok: bool
    checks: dict
    r_end: float
    w_end: float


@dataclass
class TailFit:
    K_est: float
    A_est: float
    theta_est: float
    window: tuple[float, float]
    residual_rms: float
    accepted: bool
    stage2: dict


def w_transform(traj, consts: DerivedConstants) -> WState:
    """Pointwise transform of a trajectory; w' is never differenced, it
    comes from the identity r w' = mu w + r^{mu+1} f'."""
    r = np.asarray(traj.r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("samples must have r > 0")
    mu, be, ga = consts.mu, consts.beta, consts.gamma
    w = r ** mu * np.asarray(traj.f, dtype=float)
    Wtail = r ** (mu + 1.0) * np.asarray(traj.fprime, dtype=float)
    wprime = (mu * w + Wtail) / r
    gamma_term = be * r ** (ga + 1.0) * wprime
    return WState(r=r, w=w, Wtail=Wtail, gamma_term=gamma_term)


def w_residual(states: WState, consts: DerivedConstants) -> float:
    """Normalized rms residual of the w-equation in first-order form.

    With W = r w' - mu w the second-order w-equation is equivalent to

        dw/deta = mu w + W,
        dW/deta = (mu+1) W + [ -(N-1) W + |W|^{q-p+2}
                   - (alpha w + beta W) |W|^{2-p} r^{Zstar+N-mu} ]/(p-1)

    (eta = ln r; the second line is the profile ODE analytically
    propagated through the transform, so the curvature content is never
    differenced).  Only the first eta-derivatives of the stored channels
    are formed, by 5-point central differences on the uniform log grid.
    Each equation's mismatch is scaled by the largest term entering it;
    returns the rms over both equations and all interior samples.

    Evaluating the second-order form pointwise with w'' reconstructed
    from the ODE is a trap: the four displayed terms cancel identically
    for arbitrary (w, W) data, so that residual is always rounding noise
    and certifies nothing.
    """
    if len(states) < 5:
        raise ValueError("need at least 5 samples")
    N, p, q = consts.N, consts.p, consts.q
    mu, al, be, Zst = consts.mu, consts.alpha, consts.beta, consts.Zstar
    r, w, W = states.r, states.w, states.Wtail
    eta = np.log(r)
    h = np.diff(eta)
    if not np.allclose(h, h[0], rtol=1e-8):
        raise ValueError("samples must be uniform in ln r")
    hs = float(h[0])

    def deta(y):
        return (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12.0 * hs)

    rm, wm, Wm = r[2:-2], w[2:-2], W[2:-2]
    aW = np.abs(Wm)
    rhs1 = mu * wm + Wm
    rhs2 = (mu + 1.0) * Wm + (
        -(N - 1.0) * Wm + aW ** (q - p + 2.0)
        - (al * wm + be * Wm) * aW ** (2.0 - p)
        * rm ** (Zst + N - mu)) / (p - 1.0)
    d1, d2 = deta(w), deta(W)
    s1 = np.maximum.reduce([np.abs(d1), np.abs(mu * wm), np.abs(Wm),
                            np.full_like(wm, 1e-300)])
    s2 = np.maximum.reduce([np.abs(d2), np.abs((mu + 1.0) * Wm),
                            aW ** (q - p + 2.0) / (p - 1.0),
                            np.full_like(wm, 1e-300)])
    return float(np.sqrt(np.mean(((d1 - rhs1) / s1) ** 2
                                 + ((d2 - rhs2) / s2) ** 2)))


def certify_B(traj, consts: DerivedConstants,
              tol_K: float | None = None,
              tol_slope: float | None = None,
              tol_deriv: float | None = None) -> CertReport:
    """Five-point certificate that a trajectory follows the fast-decay
    branch: (i) 0 < w < Kstar throughout, (ii) w' > 0 throughout,
    (iii) w(r_end) within tol_K of Kstar, (iv) |r w'| at r_end below
    tol_slope, (v) r^{mu+1} f' at r_end within tol_deriv of -mu Kstar.
    Defaults: tol_K = 0.01 Kstar, tol_slope = tol_deriv = 0.05 mu Kstar.
    """
    Kst, mu = consts.Kstar, consts.mu
    if tol_K is None:
        tol_K = 0.01 * Kst
    if tol_slope is None:
        tol_slope = 0.05 * mu * Kst
    if tol_deriv is None:
        tol_deriv = 0.05 * mu * Kst
    st = w_transform(traj, consts)
    wp = _wprime(st, mu)
    w_end = float(st.w[-1])
    rwp_end = float(st.r[-1] * wp[-1])
    W_end = float(st.Wtail[-1])
    # upper bound closed within rounding: the exact singular profile
    # K* r^{-mu} sits on the boundary and must not fail the band
    in_band = bool(np.all((st.w > 0.0) & (st.w <= Kst * (1.0 + 1e-12))))
    monotone = bool(np.all(wp > 0.0))
    # A trajectory cut at a decisive event ends exactly where the checked
    # quantity crosses, so the sampled sign there is rounding noise; the
    # event itself is the witness that the "throughout" claim fails.
    for kind, _ in getattr(traj, "events", ()) or ():
        if kind == "W_EXCEEDS_KSTAR":
            in_band = False
        elif kind == "W_PRIME_VANISHES":
            monotone = False
        elif kind == "PROFILE_HITS_ZERO":
            in_band = False
    checks = {
        "w_in_band": in_band,
        "w_monotone": monotone,
        "w_limit": abs(w_end - Kst) <= tol_K,
        "slope_decay": abs(rwp_end) <= tol_slope,
        "deriv_limit": abs(W_end + mu * Kst) <= tol_deriv,
    }
    return CertReport(ok=all(checks.values()), checks=checks,
                      r_end=float(st.r[-1]), w_end=w_end)


def _ratio_refine(st: WState, consts: DerivedConstants, mask):
    """Refined (theta, A) from the slope ratio variable.

    Z = r (-f')^{q-p+1} obeys a logistic flow toward Zstar along the
    fast-decay branch, and s = Zstar/Z - 1 decays like s0 r^{-theta}
    with relative contamination r^{lambda2} and a departure term
    r^{lambda1+theta} -- all with exponents known in closed form.  A
    linear regression of ln s on [1, ln r, r^{lambda2}, r^{2 lambda2},
    r^{lambda1+theta}] pins the nuisance shapes and leaves theta in the
    ln r coefficient; A follows from A = Kstar mu(mu+1)/(mu+theta) s0.
    """
    p, q, N = consts.p, consts.q, consts.N
    mu, Kst, Zst, th0 = consts.mu, consts.Kstar, consts.Zstar, consts.theta
    lam1 = N + Zst
    lam2 = -(p - 2.0 * q) / (q - p + 1.0)
    r = st.r[mask]
    fp = st.Wtail[mask] * st.r[mask] ** (-(mu + 1.0))
    Z = r * np.maximum(-fp, 0.0) ** (q - p + 1.0)
    ok = (Z > 0.0) & (Z < Zst)
    r, Z = r[ok], Z[ok]
    if len(r) < 10:
        return None
    s = Zst / Z - 1.0
    lr = np.log(r)
    cols = np.column_stack([np.ones_like(lr), lr, r ** lam2,
                            r ** (2.0 * lam2), r ** (lam1 + th0)])
    co, *_ = np.linalg.lstsq(cols, np.log(s), rcond=None)
    theta = -co[1]
    s0 = math.exp(co[0])
    A = Kst * mu * (mu + 1.0) / (mu + theta) * s0
    return theta, A


def fit_tail(states: WState, consts: DerivedConstants,
             window: tuple[float, float] | None = None) -> TailFit:
    """Fit w = K - A r^{-theta} on the window (default [r_max/10, r_max]).

    Stage 1 pins K at Kstar and regresses ln(Kstar - w) on ln r; stage 2
    releases K in a 3-parameter Levenberg-Marquardt refinement.  When the
    data carry curvature beyond the pure power model (every real
    trajectory does), the released-K stage absorbs it into a biased K and
    its residual stays well above rounding; in that case theta and A are
    replaced by the closed-form-pinned ratio regression, which is immune
    to the known next-order contamination.  Stage-2 results are always
    reported verbatim in `stage2`.
    """
    r_all = states.r
    if window is None:
        window = (r_all[-1] / 10.0, r_all[-1])
    lo, hi = window
    mask = (r_all >= lo) & (r_all <= hi)
    if int(mask.sum()) < 10:
        raise ValueError("fit window holds fewer than 10 samples")
    r = r_all[mask]
    w = states.w[mask]
    Kst = consts.Kstar
    gap = Kst - w
    if np.any(gap <= 0.0):
        raise ValueError("Kstar - w must stay positive inside the window")

    # stage 1: pinned-K log-linear
    lr = np.log(r)
    M = np.column_stack([np.ones_like(lr), lr])
    co, *_ = np.linalg.lstsq(M, np.log(gap), rcond=None)
    A1, th1 = math.exp(co[0]), -co[1]

    # stage 2: release K
    def resid(x):
        K, A, th = x
        return w - (K - A * np.exp(-th * lr))
    ls = least_squares(resid, x0=(Kst, A1, th1), method="lm")
    K2, A2, th2 = (float(v) for v in ls.x)
    rms2 = float(np.sqrt(np.mean(ls.fun ** 2)))
    stage2 = {"K_est": K2, "A_est": A2, "theta_est": th2,
              "residual_rms": rms2, "converged": bool(ls.success)}

    if ls.success and rms2 <= 1e-9 * abs(K2):
        K, A, th, rms = K2, A2, th2, rms2
    else:
        ref = _ratio_refine(states, consts, mask)
        if ref is None:
            K, A, th = Kst, A1, th1
        else:
            th, A = ref
            K = Kst
        rms = float(np.sqrt(np.mean((w - (K - A * r ** (-th))) ** 2)))
    return TailFit(K_est=K, A_est=A, theta_est=th, window=(float(lo),
                   float(hi)), residual_rms=rms,
                   accepted=bool(rms <= 1e-3 * abs(K)), stage2=stage2)


def tailfit_json(fit: TailFit) -> str:
    d = {
        "K_est": fit.K_est,
        "A_est": fit.A_est,
        "theta_est": fit.theta_est,
        "window": [fit.window[0], fit.window[1]],
        "residual_rms": fit.residual_rms,
        "accepted": fit.accepted,
        "stage2": fit.stage2,
    }
    return json.dumps(d, sort_keys=True, indent=1)
