"""Exponent-range validation and closed-form constants.

Everything downstream (shooting, tail asymptotics, phase-space rates, the
PDE check) is parametrized by the triple (N, p, q) with

    2N/(N+1) < p < 2,      p - 1 < q < p/2.

This module computes the derived constants and the spectrum of the
phase-space linearization, and cross-checks them against exact algebraic
identities.  Pure functions on value types throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

__all__ = [
    "ExponentParams",
    "DerivedConstants",
    "Spectrum",
    "RangeReport",
    "validate_range",
    "derive_constants",
    "spectral_data",
    "lambdastar",
    "constants_json",
]

# q within this distance of p-1 or p/2 still validates, but with a warning:
# mu -> infinity at q = p-1 and alpha -> infinity at q = p/2.
NEAR_BOUNDARY = 1e-6


@dataclass(frozen=True)
class ExponentParams:
    N: int
    p: float
    q: float


@dataclass(frozen=True)
class RangeReport:
    ok: bool
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


def validate_range(N, p, q) -> RangeReport:
    """Check the admissible exponent box; never raises.

    Returns a structured report naming each violated inequality.
    """
    violations = []
    warnings = []
    if not (isinstance(N, int) or (isinstance(N, float) and N == int(N))):
        violations.append("N integer fails")
        return RangeReport(False, tuple(violations))
    N = int(N)
    if N < 1:
        violations.append("N >= 1 fails")
    else:
        pc = 2.0 * N / (N + 1.0)
        if not p > pc:
            violations.append(f"p > 2N/(N+1) fails (p={p}, threshold={pc})")
        if not p < 2.0:
            violations.append("p < 2 fails")
        if not q > p - 1.0:
            violations.append("q > p-1 fails")
        if not q < p / 2.0:
            violations.append("q < p/2 fails")
        if not violations:
            if q - (p - 1.0) < NEAR_BOUNDARY:
                warnings.append("q within 1e-6 of p-1: mu, K* blow up")
            if (p / 2.0) - q < NEAR_BOUNDARY:
                warnings.append("q within 1e-6 of p/2: alpha, beta blow up")
    return RangeReport(not violations, tuple(violations), tuple(warnings))


@dataclass(frozen=True)
class DerivedConstants:
    N: int
    p: float
    q: float
    alpha: float
    beta: float
    mu: float
    Kstar: float
    theta: float
    gamma: float
    Zstar: float
    nu: float
    zeta: float


def derive_constants(params: ExponentParams) -> DerivedConstants:
    """All closed-form constants of the self-similar profile problem.

    alpha, beta   time/space self-similarity exponents
    mu            fast tail decay power, f ~ K* r^{-mu}
    Kstar         leading tail coefficient
    theta         second-order tail exponent (=1 in dimension 1)
    gamma         scaling exponent in the w-equation, gamma = -1/beta
    Zstar         critical-point coordinate, Zstar^{mu+1} = mu*Kstar
    nu            (q-p+1)/(p-1)
    zeta          N(p-1) + q*Zstar
    """
    N, p, q = params.N, params.p, params.q
    rep = validate_range(N, p, q)
    if not rep.ok:
        raise ValueError("exponent range violation: " + "; ".join(rep.violations))
    alpha = (p - q) / (p - 2.0 * q)
    beta = (q - p + 1.0) / (p - 2.0 * q)
    mu = (p - q) / (q - p + 1.0)
    # (mu*Kstar)^{q-p+1} = (p-1)(mu+1) - N + 1
    base = (p - 1.0) * (mu + 1.0) - N + 1.0
    ln_mK = math.log(base) / (q - p + 1.0)
    try:
        Kstar = math.exp(ln_mK) / mu
    except OverflowError:
        Kstar = math.inf  # admissible but beyond double range (q near p-1)
    theta = (N * (p - 1.0) - q * (N - 1.0)) / (p - 1.0)
    gamma = (2.0 * q - p) / (q - p + 1.0)
    # log-space power of mu*Kstar: stays finite even when Kstar overflows
    Zstar = math.exp(ln_mK / (mu + 1.0))
    nu = (q - p + 1.0) / (p - 1.0)
    zeta = N * (p - 1.0) + q * Zstar
    return DerivedConstants(N, p, q, alpha, beta, mu, Kstar, theta, gamma,
                            Zstar, nu, zeta)


@dataclass(frozen=True)
class Spectrum:
    lambda1: float
    lambda2: float
    lambda3: float
    V1: tuple[float, float, float]
    V2: tuple[float, float, float]
    V3: tuple[float, float, float]
    LambdaMax: float
    lambdastar: float
    qstar: float


def lambdastar(N: int, p: float) -> float:
    """Root of P(lam) = (N-1)lam^2 - 3(p-1)lam + (2-p)(p-1) in (0, (2-p)/2).

    P is linear for N=1; for N >= 2 exactly one root lies in that interval.
    """
    if N == 1:
        return (2.0 - p) / 3.0
    a, b, c = N - 1.0, -3.0 * (p - 1.0), (2.0 - p) * (p - 1.0)
    disc = b * b - 4.0 * a * c
    lam_lo = (-b - math.sqrt(disc)) / (2.0 * a)
    lam_hi = (-b + math.sqrt(disc)) / (2.0 * a)
    for lam in (lam_lo, lam_hi):
        if 0.0 < lam < (2.0 - p) / 2.0:
            return lam
    raise ArithmeticError(f"no crossover root in (0, (2-p)/2) for N={N}, p={p}")


def spectral_data(consts: DerivedConstants) -> Spectrum:
    """Eigen-structure of the phase-system linearization at the tail point.

    lambda1 > 0 > max(lambda2, lambda3); lambda3 = -theta identically.
    qstar is the absorption exponent at which lambda2 = lambda3 for the
    given (N, p): the ordering of the two stable rates swaps there.
    """
    N, p, q = consts.N, consts.p, consts.q
    lam1 = N + consts.Zstar
    lam2 = -(p - 2.0 * q) / (q - p + 1.0)
    lam3 = -consts.nu * consts.Zstar
    V1 = (consts.zeta, 0.0, consts.alpha * (q - p + 1.0) * consts.Zstar)
    V2 = (q - p + 1.0, p - q, 0.0)
    V3 = (0.0, 0.0, 1.0)
    lamstar = lambdastar(N, p)
    qstar = lamstar + p - 1.0
    return Spectrum(lam1, lam2, lam3, V1, V2, V3, max(lam2, lam3),
                    lamstar, qstar)


def constants_json(consts: DerivedConstants, spec: Spectrum) -> str:
    """Flat key-value JSON of DerivedConstants + Spectrum."""
    d = asdict(consts)
    d.update(
        lambda1=spec.lambda1, lambda2=spec.lambda2, lambda3=spec.lambda3,
        V1=list(spec.V1), V2=list(spec.V2), V3=list(spec.V3),
        LambdaMax=spec.LambdaMax, lambdastar=spec.lambdastar,
        qstar=spec.qstar,
    )
    return json.dumps(d, sort_keys=True, indent=1)
