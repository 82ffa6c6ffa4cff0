"""Nonlinear 1D1V phase-space simulation on a periodic x, truncated v grid.

Strang splitting with exact spectral shifts: half free transport (phase
multiplication in the spatial spectrum), a velocity kick with the force
frozen at the half-step density (phase multiplication in the velocity
spectrum), half free transport.  There is no CFL constraint and no implicit
filtering; mass and the grid l2 norm are conserved to roundoff, and the
scheme is exactly reversible.

The velocity domain [-vmax, vmax] is periodically continued for the
transforms, gated by the requirement that the equilibrium tail at the cut
is negligible.  Spectral velocity discreteness makes free phase mixing
refocus at the recurrence time t_R = nv / (2 vmax |k|); quantitative claims
should stay below 0.8 t_R and the log flags later samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError
from .models import Interaction, VelocityProfile
from .linear import ModeHistory

__all__ = [
    "PhaseSpaceField",
    "PerturbationMode",
    "KickEvent",
    "PerturbationSpec",
    "ObservableLog",
    "AsymptoticProfile",
    "init_state",
    "force_field",
    "strang_step",
    "recurrence_time",
    "ftilde_sample",
    "run",
    "asymptotic_profile",
]


@dataclass
class PhaseSpaceField:
    """Distribution values f(x_i, v_j) on a uniform nx-by-nv grid.

    x lives on the unit torus (x_i = i / nx), v on [-vmax, vmax) with
    spacing 2 vmax / nv.  A simulation owns its field exclusively;
    observable extraction works on snapshots.
    """

    nx: int
    nv: int
    vmax: float
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.nx, self.nv):
            raise ValueError(f"data shape {self.data.shape} != (nx, nv) = {(self.nx, self.nv)}")

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) / self.nx

    @property
    def v(self) -> np.ndarray:
        return -self.vmax + np.arange(self.nv) * self.dv

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.vmax / self.nv

    def mass(self) -> float:
        """Total integral of f over the phase-space box."""
        return float(self.data.mean() * 2.0 * self.vmax)

    def density(self) -> np.ndarray:
        """rho(x) = int f dv on the x grid."""
        return self.data.sum(axis=1) * self.dv

    def rho_hat(self, k_max: int) -> np.ndarray:
        """Fourier coefficients of the density for k = 0..k_max."""
        if k_max > self.nx // 2:
            raise ValueError(f"k_max {k_max} beyond the grid's Nyquist mode {self.nx // 2}")
        return np.fft.rfft(self.density())[: k_max + 1] / self.nx

    def copy(self) -> "PhaseSpaceField":
        return replace(self, data=self.data.copy())


@dataclass(frozen=True)
class PerturbationMode:
    """One spatial cosine mode of the initial perturbation.

    ``shape`` selects the velocity profile of the perturbation: the
    equilibrium itself (multiplicative) or a normalized Gaussian of the
    given width (additive).
    """

    k: int
    amplitude: float
    phase: float = 0.0
    shape: str = "same_as_f0"
    width: float | None = None

    def __post_init__(self):
        if self.shape not in ("same_as_f0", "gaussian"):
            raise ValueError(f"unknown perturbation shape {self.shape!r}")
        if self.shape == "gaussian" and (self.width is None or self.width <= 0):
            raise ValueError("gaussian perturbation shape requires width > 0")


@dataclass(frozen=True)
class KickEvent:
    """Impulsive external forcing at one spatial mode, applied for one step.

    ``amplitude`` is the net velocity impulse: during the step containing
    ``time`` the velocity shift gains amplitude * cos(2 pi mode x + phase),
    independent of dt.  This gives a sharp timing origin for echo runs.
    """

    time: float
    mode: int
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class PerturbationSpec:
    modes: tuple[PerturbationMode, ...] = ()
    kicks: tuple[KickEvent, ...] = ()


def _require_power_of_two(n: int, name: str) -> None:
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"{name} must be a power of two, got {n}")


def init_state(
    profile: VelocityProfile,
    perturbation: PerturbationSpec,
    nx: int,
    nv: int,
    vmax: float,
    tail_tol: float = 1e-13,
) -> PhaseSpaceField:
    """Build f_i = f0(v) (1 + sum_k amp cos(2 pi k x + phase)) plus additive shapes.

    Fails when the equilibrium tail at +-vmax exceeds ``tail_tol`` (the
    periodic velocity continuation would wrap non-negligible mass) or when
    the perturbed distribution goes negative.
    """
    _require_power_of_two(nx, "nx")
    _require_power_of_two(nv, "nv")
    if vmax <= 0:
        raise ValueError("vmax must be positive")
    tail = float(max(profile.pdf(np.array(vmax)), profile.pdf(np.array(-vmax))))
    if tail >= tail_tol:
        raise ValueError(
            f"velocity cutoff too small: f0(+-{vmax:g}) = {tail:.3e} >= tail_tol = {tail_tol:.1e}"
        )
    x = np.arange(nx) / nx
    v = -vmax + np.arange(nv) * (2.0 * vmax / nv)
    fv = profile.pdf(v)
    mult = np.ones(nx)
    data = None
    for m in perturbation.modes:
        wave = m.amplitude * np.cos(2.0 * np.pi * m.k * x + m.phase)
        if m.shape == "same_as_f0":
            mult = mult + wave
        else:
            bump = np.exp(-(v**2) / (2.0 * m.width**2)) / np.sqrt(2.0 * np.pi * m.width**2)
            data = (data if data is not None else 0.0) + np.outer(wave, bump)
    base = np.outer(mult, fv)
    data = base if data is None else base + data
    if data.min() < 0.0:
        raise ValueError(f"initial distribution is negative (min {data.min():.3e}); reduce amplitudes")
    return PhaseSpaceField(nx=nx, nv=nv, vmax=vmax, data=data, time=0.0)


def recurrence_time(nv: int, vmax: float, k: int) -> float:
    """Grid recurrence horizon t_R = nv / (2 vmax |k|) of the spectral v shift."""
    if k == 0:
        raise ValueError("recurrence time is defined for k != 0")
    return nv / (2.0 * vmax * abs(k))


# ---------------------------------------------------------------------------
# stepping


class _StepPlan:
    """Per-run precomputed tables; arithmetic identical to a per-call setup."""

    def __init__(self, state: PhaseSpaceField, interaction: Interaction, dt: float):
        self.nx, self.nv, self.dt = state.nx, state.nv, dt
        self.dv = state.dv
        v = state.v
        kx = np.arange(state.nx // 2 + 1)
        self.transport_half = np.exp(-2j * np.pi * np.outer(kx, v) * (0.5 * dt))
        self.eta = np.fft.rfftfreq(state.nv, d=state.dv)
        # F_hat(k) = -2 i pi k what(k) rho_hat(k); odd derivative zeroed at Nyquist
        fmul = -2j * np.pi * kx * interaction.what(kx)
        fmul[-1] = 0.0
        self.force_mul = fmul


def _force_from_density(rho: np.ndarray, plan: _StepPlan) -> np.ndarray:
    rho_k = np.fft.rfft(rho) / plan.nx
    return np.fft.irfft(plan.force_mul * rho_k * plan.nx, n=plan.nx)


def _step_arrays(data: np.ndarray, plan: _StepPlan, impulse: np.ndarray | None) -> np.ndarray:
    fk = np.fft.rfft(data, axis=0)
    fk *= plan.transport_half
    data = np.fft.irfft(fk, n=plan.nx, axis=0)

    shift = _force_from_density(data.sum(axis=1) * plan.dv, plan) * plan.dt
    if impulse is not None:
        shift = shift + impulse
    fv = np.fft.rfft(data, axis=1)
    fv *= np.exp(-2j * np.pi * np.outer(shift, plan.eta))
    data = np.fft.irfft(fv, n=plan.nv, axis=1)

    fk = np.fft.rfft(data, axis=0)
    fk *= plan.transport_half
    return np.fft.irfft(fk, n=plan.nx, axis=0)


def force_field(state: PhaseSpaceField, interaction: Interaction) -> np.ndarray:
    """Self-consistent force F(x) = -(grad W * rho)(x); real with zero mean."""
    plan = _StepPlan(state, interaction, dt=0.0)
    return _force_from_density(state.density(), plan)


def strang_step(
    state: PhaseSpaceField,
    interaction: Interaction,
    dt: float,
    impulse: np.ndarray | None = None,
) -> PhaseSpaceField:
    """One split step of size dt; ``impulse`` adds an extra velocity shift (x grid).

    Negative dt steps backwards; a forward/backward pair returns the input
    to roundoff because each sub-flow is an exact spectral shift and the
    kick leaves the density unchanged.
    """
    if dt == 0.0:
        raise ValueError("dt must be nonzero")
    plan = _StepPlan(state, interaction, dt)
    out = _step_arrays(state.data, plan, impulse)
    if not np.isfinite(out).all():
        raise NumericError(f"non-finite values after step at t = {state.time + dt:g}")
    return PhaseSpaceField(nx=state.nx, nv=state.nv, vmax=state.vmax, data=out, time=state.time + dt)


# ---------------------------------------------------------------------------
# observables


def ftilde_sample(state: PhaseSpaceField, k: int, eta_list: Sequence[float]) -> np.ndarray:
    """Double-transform values f~(k, eta) for the requested eta list.

    eta is evaluated by direct summation, so it need not lie on the grid's
    frequency comb, but must stay below the resolvable Nyquist limit
    nv / (4 vmax).
    """
    eta = np.asarray(eta_list, dtype=float)
    eta_nyq = state.nv / (4.0 * state.vmax)
    if np.any(np.abs(eta) > eta_nyq):
        raise ValueError(f"|eta| exceeds the resolvable range {eta_nyq:g}")
    if abs(k) > state.nx // 2:
        raise ValueError(f"|k| exceeds the grid's spatial Nyquist mode {state.nx // 2}")
    row = np.fft.rfft(state.data, axis=0)[abs(k)] / state.nx
    if k < 0:
        row = np.conj(row)
    phases = np.exp(-2j * np.pi * np.outer(eta, state.v))
    return phases @ row * state.dv


@dataclass
class AsymptoticProfile:
    """Late-time x-averaged velocity profile with a convergence diagnostic."""

    v: np.ndarray
    f_inf: np.ndarray
    sup_diff: float


@dataclass
class ObservableLog:
    """Sampled observables of one simulation run.

    ``rho_modes[:, k]`` holds the density coefficients for k = 0..k_obs
    (negative modes are conjugates for the real field).  ``marginals`` are
    x-averaged velocity profiles.  Samples past 0.8 of the k = 1 recurrence
    time carry the post_recurrence flag; per-mode horizons are in
    ``recurrence``.
    """

    times: np.ndarray
    mass: np.ndarray
    ekin: np.ndarray
    epot: np.ndarray
    l2: np.ndarray
    gradv_l2: np.ndarray
    k_obs: int
    rho_modes: np.ndarray
    ftilde_points: tuple[tuple[int, float], ...]
    ftilde: np.ndarray
    marginals: np.ndarray
    v: np.ndarray
    recurrence: dict[int, float]
    post_recurrence: np.ndarray
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    final_state: PhaseSpaceField | None = None

    def mode_history(self, k: int) -> ModeHistory:
        """Density mode as a `ModeHistory` (conjugated for negative k)."""
        if abs(k) > self.k_obs:
            raise ValueError(f"|k| = {abs(k)} was not observed (k_obs = {self.k_obs})")
        vals = self.rho_modes[:, abs(k)]
        if k < 0:
            vals = np.conj(vals)
        return ModeHistory(k=k, times=self.times.copy(), values=vals.copy())

    def cr_envelope(self, r: int) -> np.ndarray:
        """Smoothness surrogate 2 sum_{k>=1} k^r |rho_hat(t, k)| per sample."""
        k = np.arange(1, self.k_obs + 1, dtype=float)
        return 2.0 * np.abs(self.rho_modes[:, 1:]) @ k**r

    def write_observables_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mass", "ekin", "epot", "l2", "gradv_l2"])
            for i, t in enumerate(self.times):
                w.writerow([f"{t:.17g}", f"{self.mass[i]:.17g}", f"{self.ekin[i]:.17g}",
                            f"{self.epot[i]:.17g}", f"{self.l2[i]:.17g}", f"{self.gradv_l2[i]:.17g}"])

    def write_modes_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "k", "re", "im", "abs"])
            for i, t in enumerate(self.times):
                for k in range(self.k_obs + 1):
                    z = self.rho_modes[i, k]
                    w.writerow([f"{t:.17g}", k, f"{z.real:.17g}", f"{z.imag:.17g}", f"{abs(z):.17g}"])

    def write_ftilde_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "k", "eta", "re", "im"])
            for i, t in enumerate(self.times):
                for j, (k, eta) in enumerate(self.ftilde_points):
                    z = self.ftilde[i, j]
                    w.writerow([f"{t:.17g}", k, f"{eta:.17g}", f"{z.real:.17g}", f"{z.imag:.17g}"])


def run(
    profile: VelocityProfile,
    interaction: Interaction,
    perturbation: PerturbationSpec,
    *,
    nx: int,
    nv: int,
    vmax: float,
    dt: float,
    t_end: float,
    observe_stride: int = 1,
    k_obs: int = 4,
    ftilde_points: Sequence[tuple[int, float]] = (),
    extra_samplers: dict[str, Callable[[PhaseSpaceField], float]] | None = None,
    tail_tol: float = 1e-13,
) -> ObservableLog:
    """Run the nonlinear simulation and collect the observable log.

    Kick events in the perturbation spec are applied impulsively during the
    step containing their (grid-aligned) time.  ``extra_samplers`` are
    called on field snapshots at every observation and logged by name.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end = {t_end:g} is not a multiple of dt = {dt:g}")
    if observe_stride < 1 or n_steps % observe_stride != 0:
        raise ValueError(f"observe_stride = {observe_stride} must divide n_steps = {n_steps}")
    if k_obs > nx // 2:
        raise ValueError(f"k_obs = {k_obs} beyond the spatial Nyquist mode {nx // 2}")

    state = init_state(profile, perturbation, nx, nv, vmax, tail_tol=tail_tol)
    plan = _StepPlan(state, interaction, dt)
    x = state.x
    v = state.v
    impulses: dict[int, np.ndarray] = {}
    for kick in perturbation.kicks:
        s = int(round(kick.time / dt))
        if abs(s * dt - kick.time) > 1e-9 * max(1.0, abs(kick.time)) or not 0 <= s < n_steps:
            raise ValueError(f"kick time {kick.time:g} must sit on the step grid within [0, t_end)")
        wave = kick.amplitude * np.cos(2.0 * np.pi * kick.mode * x + kick.phase)
        impulses[s] = impulses.get(s, 0.0) + wave

    n_obs = n_steps // observe_stride + 1
    times = np.empty(n_obs)
    mass = np.empty(n_obs)
    ekin = np.empty(n_obs)
    epot = np.empty(n_obs)
    l2 = np.empty(n_obs)
    gradv = np.empty(n_obs)
    rho_modes = np.empty((n_obs, k_obs + 1), dtype=complex)
    ft_points = tuple((int(k), float(eta)) for k, eta in ftilde_points)
    ftv = np.empty((n_obs, len(ft_points)), dtype=complex)
    marginals = np.empty((n_obs, nv))
    extra_samplers = extra_samplers or {}
    extra = {name: np.empty(n_obs) for name in extra_samplers}

    what_tab = np.asarray(interaction.what(np.arange(nx // 2 + 1)), dtype=float)
    spec_weight = np.full(nx // 2 + 1, 2.0)
    spec_weight[0] = 1.0
    if nx % 2 == 0:
        spec_weight[-1] = 1.0
    v_weight = np.full(nv // 2 + 1, 2.0)
    v_weight[0] = 1.0
    if nv % 2 == 0:
        v_weight[-1] = 1.0
    deriv = 2.0 * np.pi * plan.eta
    if nv % 2 == 0:
        deriv = deriv.copy()
        deriv[-1] = 0.0
    half_v2 = 0.5 * v**2

    def observe(i: int, st: PhaseSpaceField) -> None:
        times[i] = st.time
        f = st.data
        rho = f.sum(axis=1) * st.dv
        rho_k_full = np.fft.rfft(rho) / nx
        mass[i] = rho.mean()
        ekin[i] = float((f * half_v2[None, :]).sum()) * st.dv / nx
        epot[i] = 0.5 * float(np.sum(spec_weight * what_tab * np.abs(rho_k_full) ** 2))
        l2[i] = np.sqrt(float((f**2).sum()) * st.dv / nx)
        gv = np.fft.rfft(f, axis=1)
        gradv[i] = np.sqrt(float(np.sum(v_weight[None, :] * np.abs(deriv[None, :] * gv) ** 2)) * st.dv / (nx * nv**2))
        rho_modes[i] = rho_k_full[: k_obs + 1]
        marginals[i] = f.mean(axis=0)
        for j, (k, eta) in enumerate(ft_points):
            ftv[i, j] = ftilde_sample(st, k, [eta])[0]
        for name, fn in extra_samplers.items():
            extra[name][i] = fn(st)

    observe(0, state)
    data = state.data
    for step in range(n_steps):
        data = _step_arrays(data, plan, impulses.get(step))
        if (step + 1) % observe_stride == 0:
            t_now = (step + 1) * dt
            if not np.isfinite(data).all():
                raise NumericError(f"non-finite values detected at t = {t_now:g}")
            snap = PhaseSpaceField(nx=nx, nv=nv, vmax=vmax, data=data, time=t_now)
            observe((step + 1) // observe_stride, snap)

    final = PhaseSpaceField(nx=nx, nv=nv, vmax=vmax, data=data.copy(), time=n_steps * dt)
    t_r = {k: recurrence_time(nv, vmax, k) for k in range(1, max(k_obs, 1) + 1)}
    meta = {
        "nx": nx, "nv": nv, "vmax": vmax, "dt": dt, "t_end": n_steps * dt,
        "observe_stride": observe_stride, "k_obs": k_obs,
        "recurrence_time": t_r[1],
        "profile": profile.name, "interaction": interaction.kind,
        "n_kicks": len(perturbation.kicks),
    }
    return ObservableLog(
        times=times, mass=mass, ekin=ekin, epot=epot, l2=l2, gradv_l2=gradv,
        k_obs=k_obs, rho_modes=rho_modes, ftilde_points=ft_points, ftilde=ftv,
        marginals=marginals, v=v, recurrence=t_r,
        post_recurrence=times > 0.8 * t_r[1],
        extra=extra, meta=meta, final_state=final,
    )


def asymptotic_profile(log: ObservableLog) -> AsymptoticProfile:
    """Late-time x-averaged profile estimate from the last two logged samples."""
    if log.marginals.shape[0] < 2:
        raise NumericError("need at least two logged samples to estimate the asymptotic profile")
    f_inf = log.marginals[-1].copy()
    sup_diff = float(np.max(np.abs(log.marginals[-1] - log.marginals[-2])))
    return AsymptoticProfile(v=log.v.copy(), f_inf=f_inf, sup_diff=sup_diff)
