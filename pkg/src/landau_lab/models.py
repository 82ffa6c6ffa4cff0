"""Equilibrium velocity profiles and interaction potentials.

Conventions used throughout the package:

* velocity transform  ft(eta) = int f(v) exp(-2i*pi*eta*v) dv
* spatial Fourier coefficients on the unit torus, W represented by
  what(k) for integer k, with what(0) := 0 (the mean mode exerts no force).

Built-in profiles are finite Gaussian mixtures, so their transforms,
derivatives and directional marginals are available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "VelocityProfile",
    "Interaction",
    "AnalyticityReport",
    "DecayReport",
    "maxwellian",
    "bi_maxwellian",
    "bump_on_tail",
    "builtin_profile",
    "builtin_interaction",
    "zero_interaction",
    "marginal",
    "verify_analyticity",
    "verify_decay",
]

# (weight, mean, variance) triples of a Gaussian mixture
Components = tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class VelocityProfile:
    """Homogeneous equilibrium in velocity, with its analyticity constants.

    ``pdf`` evaluates f0(v) (density per unit velocity, total mass 1),
    ``ft`` its velocity Fourier transform.  ``lam`` and ``c0`` are the
    stored analyticity width and constant: |ft(eta)| * exp(2*pi*lam*|eta|)
    is expected to stay below ``c0`` (re-checked by `verify_analyticity`).
    ``components`` carries the Gaussian-mixture representation when the
    profile has one; closed-form machinery (derivative series, marginals)
    is only available in that case.
    """

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    ft: Callable[[np.ndarray], np.ndarray]
    lam: float
    c0: float
    has_closed_form_ft: bool = True
    dpdf: Callable[[np.ndarray], np.ndarray] | None = None
    components: Components | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"analyticity width lam must be >= 0, got {self.lam}")
        if self.c0 <= 0:
            raise ValueError(f"analyticity constant c0 must be > 0, got {self.c0}")


@dataclass(frozen=True)
class Interaction:
    """Interaction potential represented by its spatial Fourier multiplier.

    ``what(k)`` must accept integer arrays, be even in k, real valued, and
    return 0 at k = 0.  ``gamma`` and ``cw`` are the decay constants of the
    bound |what(k)| <= cw / |k|**(1+gamma), re-checked by `verify_decay`.
    """

    kind: str
    what: Callable[[np.ndarray], np.ndarray]
    gamma: float
    cw: float

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError(f"decay exponent gamma must be >= 1, got {self.gamma}")
        # cw == 0 is allowed so the zero interaction is representable
        if self.cw < 0:
            raise ValueError(f"decay constant cw must be >= 0, got {self.cw}")


# ---------------------------------------------------------------------------
# Gaussian-mixture machinery


def _mixture_pdf(components: Components):
    def pdf(v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        for w, u, theta in components:
            out = out + w * np.exp(-((v - u) ** 2) / (2.0 * theta)) / np.sqrt(2.0 * np.pi * theta)
        return out

    return pdf


def _mixture_ft(components: Components):
    def ft(eta):
        eta = np.asarray(eta, dtype=float)
        out = np.zeros(eta.shape, dtype=complex)
        for w, u, theta in components:
            out = out + w * np.exp(-2.0 * np.pi**2 * theta * eta**2) * np.exp(-2j * np.pi * eta * u)
        return out

    return ft


def _mixture_dpdf(components: Components):
    def dpdf(v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        for w, u, theta in components:
            g = np.exp(-((v - u) ** 2) / (2.0 * theta)) / np.sqrt(2.0 * np.pi * theta)
            out = out + w * (-(v - u) / theta) * g
        return out

    return dpdf


def _mixture_profile(name: str, components: Components, lam: float | None, c0: float | None) -> VelocityProfile:
    weights = [w for w, _, _ in components]
    if abs(sum(weights) - 1.0) > 1e-12:
        raise ValueError(f"mixture weights must sum to 1, got {sum(weights)}")
    theta_min = min(theta for _, _, theta in components)
    # Default width: the narrowest component's thermal scale.  With
    # lam = sqrt(theta_min) the sup bound evaluates to exp(1/2) per component
    # and the derivative series to about 3.5, so c0 = 4 covers both.
    if lam is None:
        lam = float(np.sqrt(theta_min))
    if c0 is None:
        c0 = 4.0
    return VelocityProfile(
        name=name,
        pdf=_mixture_pdf(components),
        ft=_mixture_ft(components),
        lam=float(lam),
        c0=float(c0),
        has_closed_form_ft=True,
        dpdf=_mixture_dpdf(components),
        components=components,
    )


def maxwellian(theta: float = 1.0, lam: float | None = None, c0: float | None = None) -> VelocityProfile:
    """Centered Maxwellian with temperature theta: ft(eta) = exp(-2 pi^2 theta eta^2)."""
    if theta <= 0:
        raise ValueError(f"temperature must be positive, got {theta}")
    return _mixture_profile(f"maxwellian(theta={theta:g})", ((1.0, 0.0, float(theta)),), lam, c0)


def bi_maxwellian(
    drift: float = 2.0,
    theta1: float = 1.0,
    theta2: float | None = None,
    weight: float = 0.5,
    lam: float | None = None,
    c0: float | None = None,
) -> VelocityProfile:
    """Two counter-drifting Maxwellians at +-drift with weights (weight, 1-weight)."""
    if theta2 is None:
        theta2 = theta1
    if theta1 <= 0 or theta2 <= 0:
        raise ValueError("temperatures must be positive")
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {weight}")
    comps = ((float(weight), -float(drift), float(theta1)), (1.0 - float(weight), float(drift), float(theta2)))
    return _mixture_profile(f"bi_maxwellian(drift={drift:g})", comps, lam, c0)


def bump_on_tail(
    weight: float = 0.1,
    drift: float = 3.0,
    theta_bump: float = 0.25,
    theta: float = 1.0,
    lam: float | None = None,
    c0: float | None = None,
) -> VelocityProfile:
    """Maxwellian bulk plus a drifting bump of relative mass ``weight``.

    ``weight = 0`` reduces exactly to the plain Maxwellian.
    """
    if theta <= 0 or theta_bump <= 0:
        raise ValueError("temperatures must be positive")
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {weight}")
    if weight == 0.0:
        comps: Components = ((1.0, 0.0, float(theta)),)
    else:
        comps = ((1.0 - float(weight), 0.0, float(theta)), (float(weight), float(drift), float(theta_bump)))
    return _mixture_profile(f"bump_on_tail(weight={weight:g},drift={drift:g})", comps, lam, c0)


_PROFILE_FAMILIES = {
    "maxwellian": maxwellian,
    "bi_maxwellian": bi_maxwellian,
    "bump_on_tail": bump_on_tail,
}


def builtin_profile(name: str, params: Sequence[float] = ()) -> VelocityProfile:
    """Construct a built-in profile from a name and positional parameter list."""
    try:
        family = _PROFILE_FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown profile family {name!r}; known: {sorted(_PROFILE_FAMILIES)}") from None
    return family(*[float(p) for p in params])


def marginal(profile: VelocityProfile, direction: float, z) -> np.ndarray:
    """Marginal of the profile along a unit direction; in 1d it is f0(z * direction)."""
    if abs(abs(direction) - 1.0) > 1e-12:
        raise ValueError(f"direction must be a unit vector, got {direction}")
    return profile.pdf(np.asarray(z, dtype=float) * direction)


# ---------------------------------------------------------------------------
# Interactions


def builtin_interaction(kind: str, strength: float = 1.0, screening: float | None = None) -> Interaction:
    """Coulomb / Newton / screened interactions via their Fourier multipliers.

    coulomb:  what(k) =  strength / (4 pi^2 k^2)   (repulsive; with the
              ``exp(-2i pi k x)`` coefficient convention this makes
              F = -grad W * rho the standard periodic Poisson force)
    newton:   the negative of coulomb (attractive)
    screened: what(k) = strength / (4 pi^2 (k^2 + screening^2))
    """
    if strength <= 0:
        raise ValueError(f"strength must be positive, got {strength}")
    four_pi2 = 4.0 * np.pi**2
    if kind == "coulomb":
        def what(k):
            k = np.asarray(k, dtype=float)
            return np.where(k == 0, 0.0, strength / (four_pi2 * np.where(k == 0, 1.0, k) ** 2))
        return Interaction(kind="coulomb", what=what, gamma=1.0, cw=strength / four_pi2)
    if kind == "newton":
        def what(k):
            k = np.asarray(k, dtype=float)
            return np.where(k == 0, 0.0, -strength / (four_pi2 * np.where(k == 0, 1.0, k) ** 2))
        return Interaction(kind="newton", what=what, gamma=1.0, cw=strength / four_pi2)
    if kind == "screened":
        if screening is None or screening <= 0:
            raise ValueError("screened interaction requires screening > 0")
        def what(k):
            k = np.asarray(k, dtype=float)
            return np.where(k == 0, 0.0, strength / (four_pi2 * (k**2 + screening**2)))
        return Interaction(kind="screened", what=what, gamma=1.0, cw=strength / four_pi2)
    raise ValueError(f"unknown interaction kind {kind!r}; known: coulomb, newton, screened")


def zero_interaction() -> Interaction:
    """Interaction with what(k) = 0: the free-transport limit."""
    def what(k):
        return np.zeros(np.shape(np.asarray(k, dtype=float)))
    return Interaction(kind="custom", what=what, gamma=1.0, cw=0.0)


# ---------------------------------------------------------------------------
# Hypothesis verification


@dataclass(frozen=True)
class AnalyticityReport:
    """Result of re-checking a profile's stored analyticity constants.

    ``worst_ratio`` is max over sampled eta of |ft(eta)| exp(2 pi lam |eta|) / c0;
    the profile passes iff it stays <= 1.  For Gaussian-mixture profiles the
    derivative series sum_n lam^n/n! * ||d^n f0/dv^n||_L1 is also evaluated
    (component-wise upper bound, truncated with a tail estimate) and reported
    as a separate ratio against the same c0; it does not gate ``passed``.
    """

    passed: bool
    worst_ratio: float
    worst_eta: float
    series_sum: float | None = None
    series_ratio: float | None = None
    series_remainder: float | None = None


_HERMITE_L1_CACHE: dict[int, np.ndarray] = {}


def _hermite_l1_norms(n_max: int) -> np.ndarray:
    """m_n = E|He_n(Z)| for standard normal Z, n = 0..n_max (dense trapezoid)."""
    cached = _HERMITE_L1_CACHE.get(n_max)
    if cached is not None:
        return cached
    from numpy.polynomial import hermite_e

    v = np.linspace(-14.0, 14.0, 28001)
    weight = np.exp(-(v**2) / 2.0) / np.sqrt(2.0 * np.pi)
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        coef = np.zeros(n + 1)
        coef[n] = 1.0
        out[n] = np.trapezoid(np.abs(hermite_e.hermeval(v, coef)) * weight, v)
    _HERMITE_L1_CACHE[n_max] = out
    return out


def _derivative_series(components: Components, lam: float, n_max: int) -> tuple[float, float]:
    """Upper bound for sum_n lam^n/n! ||f0^(n)||_L1, truncated at n_max.

    Per component ||d^n g_theta/dv^n||_L1 = theta^(-n/2) * m_n, so the triangle
    inequality gives a component-weighted bound; the tail beyond n_max uses
    m_n <= sqrt(n!).
    """
    m = _hermite_l1_norms(n_max)
    total = 0.0
    x_max = 0.0
    for w, _, theta in components:
        x = lam / np.sqrt(theta)
        x_max = max(x_max, x)
        n = np.arange(n_max + 1)
        log_terms = n * np.log(max(x, 1e-300)) - np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, n_max + 1))))) + np.log(m)
        total += w * float(np.sum(np.exp(log_terms))) if x > 0 else w * m[0]
    # tail: sum_{n > n_max} x^n / sqrt(n!), geometric once x < sqrt(n_max + 2)
    if x_max == 0.0:
        tail = 0.0
    else:
        from math import lgamma

        head = np.exp((n_max + 1) * np.log(x_max) - 0.5 * lgamma(n_max + 2))
        r = x_max / np.sqrt(n_max + 2)
        tail = float(head / (1.0 - r)) if r < 1 else float("inf")
    return total, tail


def verify_analyticity(
    profile: VelocityProfile,
    eta_max: float = 4.0,
    n_samples: int = 2001,
    series_n_max: int = 40,
) -> AnalyticityReport:
    """Re-check |ft(eta)| exp(2 pi lam |eta|) <= c0 on a sampled eta range.

    The derivative-series bound is evaluated only for Gaussian-mixture
    profiles (generic numerical n-th derivatives are unstable) and truncated
    at ``series_n_max`` with a reported remainder.
    """
    if eta_max <= 0:
        raise ValueError(f"eta_max must be positive, got {eta_max}")
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    eta = np.linspace(-eta_max, eta_max, n_samples)
    ratio = np.abs(profile.ft(eta)) * np.exp(2.0 * np.pi * profile.lam * np.abs(eta)) / profile.c0
    i = int(np.argmax(ratio))
    series_sum = series_ratio = series_rem = None
    if profile.components is not None:
        series_sum, series_rem = _derivative_series(profile.components, profile.lam, series_n_max)
        series_ratio = (series_sum + series_rem) / profile.c0
    return AnalyticityReport(
        passed=bool(ratio[i] <= 1.0),
        worst_ratio=float(ratio[i]),
        worst_eta=float(eta[i]),
        series_sum=series_sum,
        series_ratio=series_ratio,
        series_remainder=series_rem,
    )


@dataclass(frozen=True)
class DecayReport:
    """Result of checking |what(k)| <= cw / |k|**(1+gamma) for 1 <= |k| <= k_max."""

    passed: bool
    worst_k: int
    worst_ratio: float


def verify_decay(interaction: Interaction, k_max: int) -> DecayReport:
    """Check the interaction's stored decay constants on 1 <= |k| <= k_max."""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    k = np.arange(1, k_max + 1)
    bound = interaction.cw / k.astype(float) ** (1.0 + interaction.gamma)
    vals = np.abs(interaction.what(k))
    # ratio with guard against cw = 0 (zero interaction: 0 <= 0 passes)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, vals / bound, np.where(vals > 0, np.inf, 0.0))
    i = int(np.argmax(ratio))
    return DecayReport(passed=bool(ratio[i] <= 1.0 + 1e-12), worst_k=int(k[i]), worst_ratio=float(ratio[i]))
