"""Linearized mode dynamics around a homogeneous equilibrium.

Each spatial density mode rho_hat(t, k) obeys a scalar Volterra equation of
the second kind with memory kernel

    K0(t, k) = -4 pi^2 what(k) ft(k t) |k|^2 t,

driven by the free-streaming transform of the initial perturbation.  The
decay of a mode is set by the worst of two rates: the decay of the source,
and the width of the strip on which the Fourier-Laplace transform of K0
stays away from 1.  Two strip objects are kept deliberately distinct:

* `stability_functional` integrates |ft| (a majorant, used by the margin
  scan `scan_stability_margin`), and
* `root_scan` uses the true transform of K0 (no modulus) to locate the
  resolvent root that sets the actual decay rate.

Conflating the two changes results for profiles whose transform is not
real and nonnegative.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceError, NumericError, StabilityGapError
from .models import Interaction, VelocityProfile

__all__ = [
    "ModeHistory",
    "QuadSpec",
    "StripGridSpec",
    "StabilityReport",
    "RootScanSpec",
    "RootScanResult",
    "DecayFit",
    "memory_kernel",
    "stability_functional",
    "scan_stability_margin",
    "monotone_criterion",
    "smallness_criterion",
    "solve_volterra",
    "fit_decay_rate",
    "root_scan",
    "linearized_ftilde",
]

TWO_PI = 2.0 * np.pi


@dataclass
class ModeHistory:
    """Time series of one complex spatial-density mode on a uniform grid."""

    k: int
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1d arrays of equal length")
        if len(self.times) >= 2:
            steps = np.diff(self.times)
            if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-9 * max(steps[0], 1.0):
                raise ValueError("times must be strictly increasing and uniform")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "k", "re", "im", "abs"])
            for t, v in zip(self.times, self.values):
                w.writerow([f"{t:.17g}", self.k, f"{v.real:.17g}", f"{v.imag:.17g}", f"{abs(v):.17g}"])

    @classmethod
    def from_csv(cls, path) -> "ModeHistory":
        times, values, ks = [], [], set()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                times.append(float(row["t"]))
                values.append(float(row["re"]) + 1j * float(row["im"]))
                ks.add(int(row["k"]))
        if len(ks) != 1:
            raise ValueError(f"expected a single mode per file, found k = {sorted(ks)}")
        return cls(k=ks.pop(), times=np.array(times), values=np.array(values))


# ---------------------------------------------------------------------------
# kernel and Laplace-side machinery


def memory_kernel(profile: VelocityProfile, interaction: Interaction, k: int, t) -> np.ndarray:
    """K0(t, k) = -4 pi^2 what(k) ft(k t) k^2 t; real valued for even profiles."""
    if k == 0:
        raise ValueError("memory kernel is defined for k != 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("kernel is defined for t >= 0")
    w = float(interaction.what(np.array(k)))
    return -4.0 * np.pi**2 * w * profile.ft(k * t) * k**2 * t


@dataclass(frozen=True)
class QuadSpec:
    """Gauss-Legendre composite quadrature controls for Laplace-side integrals.

    ``decades`` sets the truncation point: the integrand envelope at t_max is
    exp(-decades) below its scale, which keeps the relative truncation error
    of the transform under ~1e-10 for the profiles used here.
    """

    nodes: int = 20
    decades: float = 50.0
    t_max: float | None = None


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_rule(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _horizon(profile: VelocityProfile, k: int, re_max: float, quad: QuadSpec) -> float:
    """Integration horizon under the exponential weight exp(2 pi |k| re t)."""
    if quad.t_max is not None:
        return quad.t_max
    ak = abs(k)
    d = quad.decades + max(0.0, np.log(profile.c0))
    if profile.components is not None:
        # Gaussian-mixture envelope wins regardless of re_max
        theta_min = min(th for _, _, th in profile.components)
        a = 2.0 * np.pi**2 * theta_min * ak**2
        b = TWO_PI * ak * max(re_max, 0.0)
        t_gauss = (b + np.sqrt(b * b + 4.0 * a * d)) / (2.0 * a)
        return max(1.0, t_gauss)
    if re_max >= profile.lam:
        raise DivergenceError(
            f"Re(xi) = {re_max:g} >= analyticity width {profile.lam:g}: integral diverges"
        )
    return max(1.0, d / (TWO_PI * ak * (profile.lam - re_max)))


def _laplace_nodes(profile, k, zetas, quad: QuadSpec):
    """Composite GL nodes resolving both the kernel scale and the oscillation."""
    re_max = float(np.max(zetas.real))
    im_max = float(np.max(np.abs(zetas.imag)))
    t_max = _horizon(profile, k, re_max, quad)
    # ~2 panels per oscillation wavelength keeps 20-node GL at machine accuracy
    h = min(0.5 / abs(k), 1.0, 4.0 / (TWO_PI * abs(k) * (im_max + 1e-12)))
    n_panels = max(4, int(np.ceil(t_max / h)))
    x, w = _gl_rule(quad.nodes)
    edges = np.linspace(0.0, t_max, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return t, wt


def _kernel_transform(profile, interaction, k, zetas, *, modulus: bool, quad: QuadSpec | None = None):
    """int_0^inf exp(2 pi |k| zeta t) K0(t, k) dt for an array of zeta.

    With ``modulus=True`` the kernel's ft factor is replaced by its modulus.
    Returns an array of the same shape as ``zetas``.
    """
    quad = quad or QuadSpec()
    zetas = np.atleast_1d(np.asarray(zetas, dtype=complex))
    t, wt = _laplace_nodes(profile, k, zetas, quad)
    ftv = profile.ft(k * t)
    if modulus:
        ftv = np.abs(ftv)
    base = wt * (-4.0 * np.pi**2) * float(interaction.what(np.array(k))) * ftv * k**2 * t
    expo = TWO_PI * abs(k) * np.multiply.outer(zetas, t)
    if np.max(expo.real) > 600.0:
        raise NumericError("Laplace exponent overflow; shrink the strip or t_max")
    return np.exp(expo) @ base


def stability_functional(
    profile: VelocityProfile,
    interaction: Interaction,
    k: int,
    xi: complex,
    t_max: float | None = None,
    quad: QuadSpec | None = None,
) -> complex:
    """Strip functional -4 pi^2 what(k) int_0^inf e^{2 pi |k| conj(xi) t} |ft(kt)| k^2 t dt.

    The distance of this functional from 1 over the strip 0 <= Re(xi) < lam
    is the linear stability margin.  Raises `DivergenceError` when
    Re(xi) >= lam (integrand no longer summable under the stored bound).
    """
    if k == 0:
        raise ValueError("k must be nonzero")
    xi = complex(xi)
    if xi.real >= profile.lam:
        raise DivergenceError(f"Re(xi) = {xi.real:g} >= analyticity width {profile.lam:g}")
    if quad is None:
        quad = QuadSpec(t_max=t_max)
    elif t_max is not None:
        quad = QuadSpec(nodes=quad.nodes, decades=quad.decades, t_max=t_max)
    return complex(_kernel_transform(profile, interaction, k, np.conj(xi), modulus=True, quad=quad)[0])


# ---------------------------------------------------------------------------
# strip margin scan


@dataclass(frozen=True)
class StripGridSpec:
    """Sampling of the stability strip: Re in [0, strip), Im in [0, im_max].

    The scan only covers Im >= 0 because the functional of a real profile
    satisfies L(conj xi) = conj L(xi).  The Im window is finite; the report
    checks the functional's size on the window edge and flags the grid as
    too coarse instead of silently passing.
    """

    re_points: int = 8
    im_max: float = 6.0
    im_points: int = 161


@dataclass(frozen=True)
class StabilityReport:
    """Sampled evidence for the strip stability margin (not a proof)."""

    kappa_est: float
    lambda_strip: float
    kappa_requested: float
    k_max: int
    re_points: int
    im_max: float
    im_points: int
    worst_k: int
    worst_xi: complex
    tail_bound: float
    warnings: tuple[str, ...]
    passed: bool

    def to_text(self) -> str:
        lines = [
            f"passed = {str(self.passed).lower()}",
            f"kappa_est = {self.kappa_est:.12g}",
            f"kappa_requested = {self.kappa_requested:.12g}",
            f"lambda_strip = {self.lambda_strip:.12g}",
            f"k_max = {self.k_max}",
            f"grid_re_points = {self.re_points}",
            f"grid_im_max = {self.im_max:.12g}",
            f"grid_im_points = {self.im_points}",
            f"worst_k = {self.worst_k}",
            f"worst_xi = {self.worst_xi.real:.12g}{self.worst_xi.imag:+.12g}j",
            f"tail_bound_beyond_k_max = {self.tail_bound:.12g}",
            f"warnings = {';'.join(self.warnings) if self.warnings else 'none'}",
        ]
        return "\n".join(lines) + "\n"


def scan_stability_margin(
    profile: VelocityProfile,
    interaction: Interaction,
    lambda_strip: float,
    kappa: float,
    k_max: int = 4,
    grid: StripGridSpec | None = None,
    quad: QuadSpec | None = None,
) -> StabilityReport:
    """Sample min over modes and over the strip of |L(k, xi) - 1|.

    Modes above ``k_max`` are certified by the closed-over bound
    |L(k, xi)| <= cw * c0 / (|k|**(1+gamma) * (lam - lambda_strip)**2),
    provided it stays below 1 - kappa at k_max + 1.
    """
    if not 0.0 < lambda_strip < profile.lam:
        raise ValueError(f"lambda_strip must lie in (0, {profile.lam:g}), got {lambda_strip:g}")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    grid = grid or StripGridSpec()
    res = np.linspace(0.0, lambda_strip, grid.re_points, endpoint=False)
    ims = np.linspace(0.0, grid.im_max, grid.im_points)
    zetas = (res[:, None] + 1j * ims[None, :]).ravel()

    kappa_est = np.inf
    worst_k, worst_xi = 1, 0j
    edge_max = 0.0
    for k in range(1, k_max + 1):
        vals = _kernel_transform(profile, interaction, k, zetas, modulus=True, quad=quad)
        vals = vals.reshape(len(res), len(ims))
        gaps = np.abs(vals - 1.0)
        i = np.unravel_index(int(np.argmin(gaps)), gaps.shape)
        if gaps[i] < kappa_est:
            kappa_est = float(gaps[i])
            worst_k = k
            worst_xi = complex(res[i[0]], ims[i[1]])
        edge_max = max(edge_max, float(np.max(np.abs(vals[:, -1]))))

    warnings = []
    tail_bound = interaction.cw * profile.c0 / ((k_max + 1) ** (1.0 + interaction.gamma) * (profile.lam - lambda_strip) ** 2)
    if not tail_bound < 1.0 - kappa:
        warnings.append(f"modes beyond k_max uncertified (tail bound {tail_bound:.3g} >= 1 - kappa)")
    if not edge_max < 1.0 - kappa:
        warnings.append(f"functional still {edge_max:.3g} at the Im window edge; enlarge im_max")
    passed = bool(kappa_est >= kappa and not warnings)
    return StabilityReport(
        kappa_est=kappa_est,
        lambda_strip=float(lambda_strip),
        kappa_requested=float(kappa),
        k_max=k_max,
        re_points=grid.re_points,
        im_max=grid.im_max,
        im_points=grid.im_points,
        worst_k=worst_k,
        worst_xi=worst_xi,
        tail_bound=float(tail_bound),
        warnings=tuple(warnings),
        passed=passed,
    )


def monotone_criterion(
    profile: VelocityProfile,
    interaction: Interaction,
    z_max: float = 8.0,
    n_samples: int = 1601,
    k_max: int = 8,
) -> bool:
    """Sufficient stability condition: what(k) >= 0 and z * phi'(z) <= 0.

    phi is the profile's marginal along the mode direction; in 1d checking
    z * pdf'(z) <= 0 on a symmetric z range covers both directions.
    """
    k = np.arange(1, k_max + 1)
    if np.any(np.asarray(interaction.what(k)) < 0):
        return False
    z = np.linspace(-z_max, z_max, n_samples)
    if profile.dpdf is not None:
        dp = profile.dpdf(z)
    else:
        h = 1e-5
        dp = (profile.pdf(z + h) - profile.pdf(z - h)) / (2 * h)
    return bool(np.all(z * dp <= 1e-14))


def smallness_criterion(profile: VelocityProfile, interaction: Interaction, k_max: int = 64) -> float:
    """Left side of the small-gain condition
    4 pi^2 (max_k |what(k)|) (sup_dir int_0^inf |ft(r dir)| r dr); stable when < 1."""
    quad = QuadSpec()
    t_max = _horizon(profile, 1, 0.0, quad)
    x, w = _gl_rule(quad.nodes)
    n_panels = max(8, int(np.ceil(t_max / 0.25)))
    edges = np.linspace(0.0, t_max, n_panels + 1)
    half, mid = 0.5 * np.diff(edges), 0.5 * (edges[1:] + edges[:-1])
    r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wr = (half[:, None] * w[None, :]).ravel()
    integral = max(float(np.sum(wr * np.abs(profile.ft(sgn * r)) * r)) for sgn in (1.0, -1.0))
    w_max = float(np.max(np.abs(interaction.what(np.arange(1, k_max + 1)))))
    return 4.0 * np.pi**2 * w_max * integral


# ---------------------------------------------------------------------------
# Volterra solve and rate extraction


def solve_volterra(
    profile: VelocityProfile,
    interaction: Interaction,
    source: Callable,
    k: int,
    t_end: float,
    dt: float,
) -> ModeHistory:
    """March rho(t) = source(t) + int_0^t K0(t - tau) rho(tau) dtau forward in time.

    Trapezoidal product integration on a uniform grid; second order in dt
    (verified by dt-halving).  ``source`` is evaluated on the grid and is
    typically t -> h_i_tilde(k, k t).
    """
    if dt <= 0 or t_end < dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    n = int(round(t_end / dt))
    times = np.arange(n + 1) * dt
    kern = np.asarray(memory_kernel(profile, interaction, k, times), dtype=complex)
    try:
        src = np.asarray(source(times), dtype=complex)
        if src.shape != times.shape:
            raise TypeError
    except TypeError:
        src = np.array([source(float(t)) for t in times], dtype=complex)

    rho = np.empty(n + 1, dtype=complex)
    rho[0] = src[0]
    denom = 1.0 - 0.5 * dt * kern[0]
    for i in range(1, n + 1):
        conv = 0.5 * kern[i] * rho[0]
        if i > 1:
            conv += np.dot(kern[i - 1:0:-1], rho[1:i])
        rho[i] = (src[i] + dt * conv) / denom
    return ModeHistory(k=k, times=times, values=rho)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential fit |rho| ~ exp(intercept - rate * t)."""

    rate: float
    quality: float
    intercept: float
    n_points: int
    used_maxima: bool


def fit_decay_rate(history: ModeHistory, window: tuple[float, float], floor: float | None = None) -> DecayFit:
    """Fit the decay rate of log|rho| over envelope maxima inside the window.

    Envelope points are strict local maxima of |rho|; when the signal is
    monotone (fewer than 3 maxima) every above-floor sample is used instead.
    ``floor`` defaults to 1e-13 times the peak amplitude; below-floor samples
    are excluded.  Raises when fewer than 3 usable points remain.
    """
    t_a, t_b = window
    if not (history.times[0] <= t_a < t_b <= history.times[-1] + 1e-12):
        raise ValueError(f"window {window} not inside history [{history.times[0]:g}, {history.times[-1]:g}]")
    amp = np.abs(history.values)
    if floor is None:
        floor = 1e-13 * float(np.max(amp))
    inside = (history.times >= t_a) & (history.times <= t_b)

    interior = np.zeros_like(inside)
    interior[1:-1] = inside[1:-1] & (amp[1:-1] > amp[:-2]) & (amp[1:-1] > amp[2:])
    pick = interior & (amp > floor)
    used_maxima = True
    if int(np.count_nonzero(pick)) < 3:
        pick = inside & (amp > floor)
        used_maxima = False
    if int(np.count_nonzero(pick)) < 3:
        raise NumericError("fewer than 3 usable envelope points in window")

    t_pts = history.times[pick]
    y_pts = np.log(amp[pick])
    slope, intercept = np.polyfit(t_pts, y_pts, 1)
    resid = y_pts - (slope * t_pts + intercept)
    ss_tot = float(np.sum((y_pts - y_pts.mean()) ** 2))
    quality = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return DecayFit(rate=float(-slope), quality=quality, intercept=float(intercept),
                    n_points=int(np.count_nonzero(pick)), used_maxima=used_maxima)


# ---------------------------------------------------------------------------
# resolvent-root scan


@dataclass(frozen=True)
class RootScanSpec:
    """Strip scan controls for the true transform of K0.

    ``gap`` is the documented minimum distance from 1 below which a width is
    considered collapsed; ``refine_trigger`` is the looser threshold at which
    a complex Newton refinement is attempted from the best grid point.
    """

    width_max: float | None = None
    n_widths: int = 25
    im_max: float = 6.0
    im_points: int = 241
    gap: float = 0.05
    refine_trigger: float = 0.5


@dataclass(frozen=True)
class RootScanResult:
    """Outcome of `root_scan`.

    ``lambda_star`` is the largest strip width on which the transform of K0
    keeps a gap from 1 (equivalently min(Re root, width cap)); the predicted
    mode decay rate is 2 pi |k| lambda_star because the transform acts on
    exp(2 pi |k| zeta t).  ``root`` is the refined resolvent root when one
    was located, else None.
    """

    k: int
    lambda_star: float
    rate: float
    root: complex | None
    widths: np.ndarray = field(repr=False)
    gaps: np.ndarray = field(repr=False)


def _root_newton(profile, interaction, k, seed: complex, quad: QuadSpec) -> complex:
    """Newton iteration for J(zeta) = 1, with J'(zeta) = 2 pi |k| * moment-1 integral."""
    zeta = complex(seed)
    for _ in range(60):
        t, wt = _laplace_nodes(profile, k, np.array([zeta]), quad)
        base = wt * (-4.0 * np.pi**2) * float(interaction.what(np.array(k))) * profile.ft(k * t) * k**2 * t
        ex = np.exp(TWO_PI * abs(k) * zeta * t)
        j = complex(np.sum(ex * base))
        jp = complex(np.sum(ex * base * TWO_PI * abs(k) * t))
        if abs(jp) == 0.0:
            raise NumericError("resolvent-root refinement hit a critical point")
        step = (j - 1.0) / jp
        zeta -= step
        if abs(step) < 1e-13 * max(1.0, abs(zeta)):
            return zeta
    raise NumericError("resolvent-root refinement did not converge")


def root_scan(
    profile: VelocityProfile,
    interaction: Interaction,
    k: int,
    scan: RootScanSpec | None = None,
    quad: QuadSpec | None = None,
) -> RootScanResult:
    """Scan strip widths for the first collapse of |J - 1|, J the transform of K0.

    Widths are sampled up to the profile's analyticity width; if the gap
    never falls below ``scan.gap`` the cap itself is returned (the mode decay
    is then limited only by the source).  A collapse bracketed by the grid is
    refined to the actual resolvent root; a root at nonpositive width means
    there is no decay gap at all and `StabilityGapError` is raised.
    """
    if k == 0:
        raise ValueError("k must be nonzero")
    scan = scan or RootScanSpec()
    quad = quad or QuadSpec()
    width_cap = scan.width_max if scan.width_max is not None else (
        profile.lam if profile.components is not None else 0.98 * profile.lam
    )
    if width_cap <= 0:
        raise ValueError("width cap must be positive")
    widths = np.linspace(0.0, width_cap, scan.n_widths)
    ims = np.linspace(0.0, scan.im_max, scan.im_points)

    gaps = np.empty(len(widths))
    best = (np.inf, 0j)
    for i, w in enumerate(widths):
        vals = _kernel_transform(profile, interaction, k, w + 1j * ims, modulus=False, quad=quad)
        g = np.abs(vals - 1.0)
        j = int(np.argmin(g))
        gaps[i] = g[j]
        if g[j] < best[0]:
            best = (float(g[j]), complex(w, ims[j]))

    root = None
    lambda_star = float(width_cap)
    if best[0] < scan.refine_trigger:
        root = _root_newton(profile, interaction, k, best[1], quad)
        if root.real <= 1e-12:
            raise StabilityGapError(
                f"transform of K0 reaches 1 at Re zeta = {root.real:.3g} <= 0: no decay gap (k={k})"
            )
        lambda_star = float(min(root.real, width_cap))
    elif np.any(gaps < scan.gap):
        # grid says collapsed but refinement never triggered; be conservative
        lambda_star = float(widths[int(np.argmax(gaps < scan.gap))])
    return RootScanResult(
        k=k,
        lambda_star=lambda_star,
        rate=TWO_PI * abs(k) * lambda_star,
        root=root,
        widths=widths,
        gaps=gaps,
    )


# ---------------------------------------------------------------------------
# linearized distribution transform


def linearized_ftilde(
    profile: VelocityProfile,
    interaction: Interaction,
    rho: ModeHistory,
    h_i_tilde: Callable[[int, float], complex],
    k: int,
    eta: float,
    t: float,
) -> complex:
    """Transform of the linearized solution along free transport.

    h(t, k, eta) = h_i(k, eta + k t)
                   - int_0^t Fhat(tau, k) 2 i pi (eta + k (t - tau)) ft(eta + k (t - tau)) dtau

    with Fhat(tau, k) = -2 i pi k what(k) rho(tau, k).  At eta = 0 this
    reproduces rho(t, k) with the same quadrature weights the Volterra
    marcher uses; at k = 0 the force vanishes and the initial transform is
    returned unchanged.
    """
    if k == 0:
        return complex(h_i_tilde(0, eta))
    if k != rho.k:
        raise ValueError(f"mode mismatch: k = {k} but history carries k = {rho.k}")
    dt = rho.dt
    i = int(round(t / dt))
    if abs(i * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t = {t:g} is not on the history grid (dt = {dt:g})")
    if i < 0 or i >= len(rho.times):
        raise NumericError(f"t = {t:g} beyond the history horizon {rho.times[-1]:g}")
    free = complex(h_i_tilde(k, eta + k * t))
    if i == 0:
        return free
    ts = rho.times[: i + 1]
    fhat = -2j * np.pi * k * float(interaction.what(np.array(k))) * rho.values[: i + 1]
    arg = eta + k * (t - ts)
    integrand = fhat * 2j * np.pi * arg * profile.ft(arg)
    weights = np.full(i + 1, dt)
    weights[0] = weights[-1] = 0.5 * dt
    return free - complex(np.sum(weights * integrand))
