"""Session-scoped fixtures for runs shared between property and gate tests."""

import numpy as np
import pytest

from landau_lab.echoes import run_echo_experiment
from landau_lab.linear import root_scan, solve_volterra
from landau_lab.models import builtin_interaction, maxwellian
from landau_lab.sim import PerturbationMode, PerturbationSpec, run

# classic weak-damping benchmark: unit-temperature Maxwellian with the
# coupling that puts the fundamental mode at half a Debye wavenumber
BENCH_STRENGTH = 16.0 * np.pi**2
DELTA = 1e-3


@pytest.fixture(scope="session")
def profile():
    return maxwellian()


@pytest.fixture(scope="session")
def bench_interaction():
    return builtin_interaction("coulomb", BENCH_STRENGTH)


@pytest.fixture(scope="session")
def unit_coulomb():
    return builtin_interaction("coulomb", 1.0)


@pytest.fixture(scope="session")
def volterra_benchmark(profile, bench_interaction):
    """Volterra solutions and resolvent scans for modes 1 and 2."""
    out = {}
    for k, t_end, dt in ((1, 8.0, 1 / 128), (2, 2.0, 1 / 256)):
        hist = solve_volterra(
            profile, bench_interaction, lambda t, k=k: 0.5 * DELTA * profile.ft(k * t), k, t_end, dt
        )
        out[k] = (hist, root_scan(profile, bench_interaction, k))
    return out


@pytest.fixture(scope="session")
def nl_benchmark(profile, bench_interaction):
    """Nonlinear damping run used by the decay, convergence and filamentation gates."""
    pert = PerturbationSpec(modes=(PerturbationMode(k=1, amplitude=2 * DELTA),))
    return run(
        profile, bench_interaction, pert,
        nx=64, nv=1024, vmax=8.0, dt=1 / 32, t_end=42.0, observe_stride=2,
        k_obs=4, ftilde_points=((1, 0.0),),
    )


@pytest.fixture(scope="session")
def echo_sweep(profile, unit_coulomb):
    """Two-pulse runs for three kick times (strongly damped background)."""
    return {
        tau: run_echo_experiment(profile, unit_coulomb, k_initial=1, kick_mode=-2, tau_kick=tau)
        for tau in (3.0, 4.0, 5.0)
    }


@pytest.fixture(scope="session")
def echo_control(profile, unit_coulomb):
    return run_echo_experiment(profile, unit_coulomb, k_initial=1, kick_mode=-2, tau_kick=4.0, amp_kick=0.0)
