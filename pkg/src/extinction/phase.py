"""Autonomous phase-plane system for the profile tail.

In the variables

    X = r f (-f')^{1-p},  Y = r^2 (-f')^{2-p},  Z = r (-f')^{q-p+1},

with log-radial time eta = ln r, a positive decreasing profile becomes an
orbit of a quadratic autonomous system whose critical point
P0 = (0, 0, Zstar) encodes the fast-decay tail.  The eigenvalues at P0 are
lambda1 = N + Zstar > 0 (unstable), lambda2 = -(p-2q)/(q-p+1) and
lambda3 = -theta (stable), and the decay rates of Y and Z - Zstar along a
converging orbit read off lambda2, lambda3 together with the limits
Uinf, Vinf.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .exponents import DerivedConstants

__all__ = [
    "PhasePoint",
    "PhasePath",
    "RateFit",
    "map_to_phase",
    "vector_field",
    "jacobian",
    "jacobian_origin",
    "integrate_phase",
    "exact_orbit",
    "extract_rates",
    "path_dynamics_residual",
    "phasepath_csv",
    "ratefit_json",
]

BLOWUP_GUARD = 1e12
ZGAP_FLOOR = 1e-13


@dataclass(frozen=True)
class PhasePoint:
    eta: float
    X: float
    Y: float
    Z: float
    Wshift: float


@dataclass
class PhasePath:
    eta: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    Wshift: np.ndarray
    source: str   # "mapped-from-profile" | "free-integration"
    detail: str = ""

    def __len__(self) -> int:
        return len(self.eta)

    @property
    def points(self) -> list[PhasePoint]:
        return [PhasePoint(float(self.eta[i]), float(self.X[i]),
                           float(self.Y[i]), float(self.Z[i]),
                           float(self.Wshift[i]))
                for i in range(len(self.eta))]


@dataclass(frozen=True)
class RateFit:
    lambda2_est: float
    lambda3_est: float
    Uinf_est: float
    Vinf_est: float
    A_from_Vinf: float
    windows: dict
    flags: tuple[str, ...] = ()


def map_to_phase(traj, consts: DerivedConstants) -> PhasePath:
    """Map profile samples into (X, Y, Z).  Samples where the mapping is
    undefined (f' = 0, or f <= 0) are skipped with a warning."""
    p, q = consts.p, consts.q
    r = np.asarray(traj.r, float)
    f = np.asarray(traj.f, float)
    fp = np.asarray(traj.fprime, float)
    good = (f > 0.0) & (fp < 0.0)
    n_bad = int((~good).sum())
    if n_bad:
        warnings.warn(f"skipped {n_bad} sample(s) with f' = 0 or f <= 0 "
                      "(phase map undefined there)", stacklevel=2)
    r, f, fp = r[good], f[good], fp[good]
    m = -fp
    X = r * f * m ** (1.0 - p)
    Y = r * r * m ** (2.0 - p)
    Z = r * m ** (q - p + 1.0)
    return PhasePath(eta=np.log(r), X=X, Y=Y, Z=Z,
                     Wshift=Z - consts.Zstar, source="mapped-from-profile",
                     detail=f"skipped={n_bad}" if n_bad else "")


def vector_field(pt, consts: DerivedConstants):
    """Velocity (Xdot, Ydot, Zdot) of the autonomous system."""
    X, Y, Z = _coords(pt)
    N, p = consts.N, consts.p
    al, be, nu, Zst = consts.alpha, consts.beta, consts.nu, consts.Zstar
    c0 = 2.0 - (2.0 - p) * (N - 1.0) / (p - 1.0)
    c1 = (2.0 - p) / (p - 1.0)
    dX = N * X - Y - al * X * X + be * X * Y + X * Z
    dY = c0 * Y + c1 * (al * X - be * Y - Z) * Y
    dZ = nu * Z * (Zst - Z) + nu * (al * X - be * Y) * Z
    return (dX, dY, dZ)


def _coords(pt):
    # accepts PhasePoint, 3-sequence, or (3, n) array; stays vectorized
    if hasattr(pt, "X"):
        return pt.X, pt.Y, pt.Z
    return pt[0], pt[1], pt[2]


def jacobian(pt, consts: DerivedConstants) -> np.ndarray:
    """Analytic Jacobian of the vector field at an arbitrary point."""
    X, Y, Z = _coords(pt)
    N, p = consts.N, consts.p
    al, be, nu, Zst = consts.alpha, consts.beta, consts.nu, consts.Zstar
    c0 = 2.0 - (2.0 - p) * (N - 1.0) / (p - 1.0)
    c1 = (2.0 - p) / (p - 1.0)
    return np.array([
        [N - 2.0 * al * X + be * Y + Z, -1.0 + be * X, X],
        [c1 * al * Y, c0 + c1 * (al * X - 2.0 * be * Y - Z), -c1 * Y],
        [nu * al * Z, -nu * be * Z,
         nu * (Zst - 2.0 * Z + al * X - be * Y)],
    ])


def jacobian_origin(consts: DerivedConstants) -> np.ndarray:
    """Linearization at P0 in (X, Y, Wshift) coordinates, closed form:

        [[N + Z*, -1, 0],
         [0, -(p-2q)/(q-p+1), 0],
         [alpha nu Z*, -beta nu Z*, -nu Z*]]
    """
    N, p, q = consts.N, consts.p, consts.q
    al, be, nu, Zst = consts.alpha, consts.beta, consts.nu, consts.Zstar
    lam2 = -(p - 2.0 * q) / (q - p + 1.0)
    return np.array([
        [N + Zst, -1.0, 0.0],
        [0.0, lam2, 0.0],
        [al * nu * Zst, -be * nu * Zst, -nu * Zst],
    ])


def integrate_phase(x0, eta_span, consts: DerivedConstants,
                    tol: float = 1e-10, n_samples: int = 2001) -> PhasePath:
    """Free integration of the autonomous system.  The right side is
    quadratic with no singularity; a |x| >= 1e12 guard stops runaway
    along the unstable direction."""
    X0, Y0, Z0 = _coords(x0)

    def rhs(eta, x):
        return vector_field(x, consts)

    def guard(eta, x):
        return max(abs(x[0]), abs(x[1]), abs(x[2])) - BLOWUP_GUARD
    guard.terminal = True
    guard.direction = 1

    # atol floor keeps the error scale nonzero when a component sits at 0
    # exactly (the critical point itself); far below any orbit amplitude
    sol = solve_ivp(rhs, tuple(eta_span), (float(X0), float(Y0), float(Z0)),
                    method="RK45", rtol=tol, atol=1e-30, dense_output=True,
                    events=[guard])
    detail = ""
    if sol.status == 1:
        detail = f"blow-up guard at eta={sol.t[-1]:.6g}"
    etas = np.linspace(sol.t[0], sol.t[-1], n_samples)
    xs = sol.sol(etas)
    return PhasePath(eta=etas, X=xs[0], Y=xs[1], Z=xs[2],
                     Wshift=xs[2] - consts.Zstar,
                     source="free-integration", detail=detail)


def exact_orbit(consts: DerivedConstants, rho: float,
                eta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-parameter explicit orbit through (rho beta, rho alpha, Zstar):
    both X and Y decay like e^{lambda2 eta} while Z stays pinned at
    Zstar."""
    p, q = consts.p, consts.q
    lam2 = -(p - 2.0 * q) / (q - p + 1.0)
    amp = np.exp(lam2 * np.asarray(eta, float))
    X = rho * consts.beta * amp
    Y = rho * consts.alpha * amp
    Z = np.full_like(amp, consts.Zstar)
    return X, Y, Z


def extract_rates(path: PhasePath, consts: DerivedConstants,
                  fit_window: tuple[float, float] | None = None) -> RateFit:
    """Read off the stable rates from a converging path.

    ln Y is regressed linearly on eta over a short late window (Y carries
    a single clean mode); ln|Z - Zstar| is regressed on the pinned basis
    [1, eta, e^{lambda2 eta}, e^{2 lambda2 eta}, e^{(lambda1+theta) eta}]
    over the final decade, which removes the known subleading
    contamination without adding nonlinear parameters.  Intercepts give
    Uinf (via Y ~ (p-q) Uinf e^{lambda2 eta}) and Vinf (sign taken from
    the data; fast-decay paths approach Zstar from below).
    """
    N, p, q = consts.N, consts.p, consts.q
    Zst, th, mu = consts.Zstar, consts.theta, consts.mu
    lam1 = N + Zst
    lam2c = -(p - 2.0 * q) / (q - p + 1.0)
    lam3c = -th
    eta, Y, Z = path.eta, path.Y, path.Z
    dist = math.sqrt((path.X[-1]) ** 2 + (Y[-1]) ** 2
                     + (Z[-1] - Zst) ** 2)
    if not np.isfinite(dist) or dist > 0.05 * Zst:
        raise ValueError(
            f"path does not converge to the critical point "
            f"(terminal distance {dist:.3g} > 0.05*Zstar)")
    e_max = eta[-1]
    if fit_window is None:
        win2 = (e_max - 2.5, e_max - 0.05)
        win3 = (e_max - math.log(10.0), e_max)
    else:
        win2 = win3 = (float(fit_window[0]), float(fit_window[1]))

    m2 = (eta >= win2[0]) & (eta <= win2[1]) & (Y > 0.0)
    if m2.sum() < 10:
        raise ValueError("lambda2 window holds fewer than 10 samples")
    co2, *_ = np.linalg.lstsq(
        np.column_stack([np.ones(m2.sum()), eta[m2]]),
        np.log(Y[m2]), rcond=None)
    lam2 = float(co2[1])
    Uinf = math.exp(co2[0]) / (p - q)

    gap = Z - Zst
    m3 = (eta >= win3[0]) & (eta <= win3[1]) & (np.abs(gap) >= ZGAP_FLOOR)
    if m3.sum() < 10:
        raise ValueError("lambda3 window holds fewer than 10 usable "
                         "samples above the |Z - Zstar| floor")
    e3 = eta[m3]
    cols = np.column_stack([np.ones_like(e3), e3, np.exp(lam2c * e3),
                            np.exp(2.0 * lam2c * e3),
                            np.exp((lam1 + th) * e3)])
    co3, *_ = np.linalg.lstsq(cols, np.log(np.abs(gap[m3])), rcond=None)
    lam3 = float(co3[1])
    sgn = -1.0 if np.median(gap[m3]) < 0.0 else 1.0
    Vinf = sgn * math.exp(co3[0])
    A_from_Vinf = -Vinf * Zst ** mu / ((mu - lam3) * (q - p + 1.0))

    flags = []
    if abs(abs(lam2c) - abs(lam3c)) < 0.1:
        flags.append("near-crossover: |lambda2| and |lambda3| within 0.1, "
                     "lambda3 extraction unreliable (mode mixing)")
    return RateFit(lambda2_est=lam2, lambda3_est=lam3, Uinf_est=Uinf,
                   Vinf_est=Vinf, A_from_Vinf=A_from_Vinf,
                   windows={"lambda2": list(win2), "lambda3": list(win3)},
                   flags=tuple(flags))


def path_dynamics_residual(path: PhasePath, consts: DerivedConstants,
                           eta_min: float | None = None) -> float:
    """rms mismatch between the numerical eta-derivative of a mapped path
    and the analytic vector field, on the segment eta >= eta_min
    (default: final decade).  Requires uniform eta spacing; uses 5-point
    central differences.  Residuals are measured relative to the local
    velocity scale."""
    eta = path.eta
    h = np.diff(eta)
    if len(eta) < 9 or not np.allclose(h, h[0], rtol=1e-8):
        raise ValueError("need >= 9 uniformly spaced samples in eta")
    if eta_min is None:
        eta_min = eta[-1] - math.log(10.0)
    hs = float(h[0])

    def dln(y):
        return (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12.0 * hs)

    Xm, Ym, Zm = path.X[2:-2], path.Y[2:-2], path.Z[2:-2]
    em = eta[2:-2]
    dX, dY, dZ = dln(path.X), dln(path.Y), dln(path.Z)
    fX, fY, fZ = vector_field(np.vstack([Xm, Ym, Zm]), consts)
    scale = np.maximum.reduce([np.abs(fX), np.abs(fY), np.abs(fZ),
                               np.abs(dX), np.abs(dY), np.abs(dZ),
                               np.full_like(Xm, 1e-30)])
    sel = em >= eta_min
    res = ((dX - fX) ** 2 + (dY - fY) ** 2 + (dZ - fZ) ** 2) / scale ** 2
    return float(np.sqrt(np.mean(res[sel])))


def phasepath_csv(path: PhasePath) -> str:
    lines = [f"# source,{path.source}", "eta,X,Y,Z,Wshift"]
    for i in range(len(path.eta)):
        lines.append(",".join(f"{v:.17g}" for v in (
            path.eta[i], path.X[i], path.Y[i], path.Z[i], path.Wshift[i])))
    return "\n".join(lines) + "\n"


def ratefit_json(fit: RateFit) -> str:
    d = {
        "lambda2_est": fit.lambda2_est,
        "lambda3_est": fit.lambda3_est,
        "Uinf_est": fit.Uinf_est,
        "Vinf_est": fit.Vinf_est,
        "A_from_Vinf": fit.A_from_Vinf,
        "windows": fit.windows,
        "flags": list(fit.flags),
    }
    return json.dumps(d, sort_keys=True, indent=1)
