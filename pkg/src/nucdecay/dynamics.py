"""Equations of motion for the coupled decay after impulsive excitation.

Two levels of description:

* finite chain: per-site complex coherence s_l = <sigma^-_l> and
  population p_l, closed at first order in inter-site correlations,

      ds_l/dt = -(G/2) s_l - (1 - 2 p_l) D_l,
      dp_l/dt = -G p_l - 2 Re[conj(s_l) D_l],

  with the coupling drive D_l = sum_{n != l} C*(|n-l|) s_n.  Evolving
  the complex s_l avoids the 1/|s| singularity of the equivalent
  magnitude/phase form (which exists only as a test oracle); the phase
  is extracted afterwards by argument + unwrapping.

* reduced (translationally invariant) model: three real variables
  (coherence magnitude, phase, population) driven by the single complex
  coupling parameter K,

      d|s|/dt = -(G/2)|s| - (1 - 2p) |s| K',
      dphi/dt = -(1 - 2p) K'',
      dp/dt   = -G p - 2 |s|^2 K'.

  The population coupling term is quadratic in |s|: the drive is itself
  proportional to the coherence, so contracting it with the coherence
  gives |s|^2.  A linear term cannot reproduce the finite-chain
  equations it descends from (checked by the uniform-chain reduction
  test).

Rates are in units of the total single-particle decay rate, time in its
inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from .couplings import (ChainGeometry, CouplingKernel, CouplingSummary,
                        DecayParameters, central_site,
                        coupling_parameter_infinite, unit_phases)
from .errors import ConfigError, IntegrationError

DEFAULT_T_END = 5.0
DEFAULT_GRID_POINTS = 2000
DEFAULT_RTOL = 1e-10
POPULATION_SLACK = 1e-9


@dataclass(frozen=True)
class ExcitationSpec:
    """Impulsive excitation: pulse area, global phase, per-site phase step."""

    pulse_area: float
    global_phase: float = 0.0
    phase_step: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.pulse_area <= math.pi:
            raise ConfigError("pulse_area must lie in [0, pi]")

    @property
    def initial_population(self) -> float:
        return math.sin(self.pulse_area / 2.0) ** 2

    @property
    def initial_coherence(self) -> float:
        return math.sin(self.pulse_area / 2.0) * math.cos(self.pulse_area / 2.0)

    @classmethod
    def from_geometry(cls, pulse_area: float, geom: ChainGeometry,
                      global_phase: float = 0.0) -> "ExcitationSpec":
        return cls(pulse_area, global_phase, geom.phase_step)


@dataclass
class EnsembleState:
    """Per-site coherences and excited-state populations at time t."""

    time: float
    coherences: np.ndarray  # complex, shape (N,)
    populations: np.ndarray  # real, shape (N,)

    @property
    def n_sites(self) -> int:
        return self.coherences.size

    def pack(self) -> np.ndarray:
        return np.concatenate([self.coherences.real, self.coherences.imag, self.populations])

    @classmethod
    def unpack(cls, t: float, y: np.ndarray) -> "EnsembleState":
        n = y.size // 3
        return cls(t, y[:n] + 1j * y[n:2 * n], y[2 * n:])


@dataclass
class ReducedState:
    """Coherence magnitude, unwrapped phase and population of the
    translationally invariant model."""

    time: float
    coherence_magnitude: float
    phase: float
    population: float

    def pack(self) -> np.ndarray:
        return np.array([self.coherence_magnitude, self.phase, self.population])

    @classmethod
    def unpack(cls, t: float, y: np.ndarray) -> "ReducedState":
        return cls(t, y[0], y[1], y[2])


@dataclass
class Trajectory:
    """Time grid plus state snapshots and provenance metadata."""

    times: np.ndarray
    kind: str  # "reduced" | "ensemble"
    coherence_abs: Optional[np.ndarray] = None
    phase: Optional[np.ndarray] = None
    population: Optional[np.ndarray] = None
    coherences: Optional[np.ndarray] = None  # (T, N) complex
    populations: Optional[np.ndarray] = None  # (T, N)
    metadata: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    correlators: Optional[dict] = None

    @property
    def n_sites(self) -> int:
        if self.kind != "ensemble":
            raise ValueError("site-resolved data only exists for ensemble trajectories")
        return self.coherences.shape[1]

    def site_coherence_abs(self, l: int) -> np.ndarray:
        return np.abs(self.coherences[:, l - 1])

    def site_phase(self, l: int) -> np.ndarray:
        """Unwrapped phase of site l (1-based)."""
        return np.unwrap(np.angle(self.coherences[:, l - 1]))

    def site_population(self, l: int) -> np.ndarray:
        return self.populations[:, l - 1]

    def central_index(self) -> int:
        return central_site(self.n_sites)

    def series(self, observable: str, site: Optional[int] = None) -> np.ndarray:
        """One named observable: 'coherence_abs' | 'phase' | 'population'.

        For ensemble trajectories `site` selects a 1-based site (default
        central).
        """
        if observable not in ("coherence_abs", "phase", "population"):
            raise ValueError(f"unknown observable {observable!r}")
        if self.kind == "reduced":
            return {"coherence_abs": self.coherence_abs, "phase": self.phase,
                    "population": self.population}[observable]
        l = site if site is not None else self.central_index()
        return {"coherence_abs": self.site_coherence_abs,
                "phase": self.site_phase,
                "population": self.site_population}[observable](l)


def init_state(exc: ExcitationSpec, n_sites: Optional[int] = None
               ) -> Union[EnsembleState, ReducedState]:
    """State right after the pulse: p = sin^2(A/2) on every site and
    s_l = sin(A/2)cos(A/2) e^{i(phi0 + l*dphi)}.  n_sites=None gives the
    reduced-model variant."""
    p0 = exc.initial_population
    s0 = exc.initial_coherence
    if n_sites is None:
        return ReducedState(0.0, s0, exc.global_phase, p0)
    if n_sites < 1:
        raise ConfigError("chain length must be >= 1")
    site_factors = unit_phases(exc.phase_step, np.arange(n_sites))
    coherences = s0 * np.exp(1j * exc.global_phase) * site_factors
    return EnsembleState(0.0, coherences, np.full(n_sites, p0))


def rhs_finite(state: EnsembleState, kernel: CouplingKernel,
               uniform_coupling: Optional[complex] = None):
    """Finite-chain derivative (ds, dp) in the complex-coherence form.

    uniform_coupling replaces the per-site drive by D_l = K*s_l, which
    makes the chain exactly translationally invariant (used to check the
    reduction to the three-variable model).
    """
    s, p = state.coherences, state.populations
    gamma = kernel.decay.gamma_total
    if uniform_coupling is not None:
        drive = uniform_coupling * s
    else:
        drive = kernel.drive(s)
    ds = -(0.5 * gamma) * s - (1.0 - 2.0 * p) * drive
    dp = -gamma * p - 2.0 * np.real(np.conj(s) * drive)
    return ds, dp


def rhs_reduced(state: ReducedState, coupling: Union[CouplingSummary, complex],
                decay: DecayParameters):
    """Reduced-model derivative (d|s|, dphi, dp)."""
    k = coupling.value if isinstance(coupling, CouplingSummary) else complex(coupling)
    s, p = state.coherence_magnitude, state.population
    gamma = decay.gamma_total
    inversion = 1.0 - 2.0 * p
    ds = -(0.5 * gamma) * s - inversion * s * k.real
    dphi = -inversion * k.imag
    dp = -gamma * p - 2.0 * s * s * k.real
    return ds, dphi, dp


def _pack_rhs(rhs: Callable, template) -> Callable:
    """Wrap a state-space RHS into a flat-vector RHS for the solver."""
    if isinstance(template, ReducedState):
        def f(t, y):
            ds, dphi, dp = rhs(ReducedState.unpack(t, y))
            return np.array([ds, dphi, dp])
    else:
        def f(t, y):
            ds, dp = rhs(EnsembleState.unpack(t, y))
            return np.concatenate([ds.real, ds.imag, dp])
    return f


def _rk4_fixed(f: Callable, y0: np.ndarray, grid: np.ndarray, substeps: int) -> np.ndarray:
    """Classical fixed-step RK4 sampled exactly on the grid (deterministic)."""
    out = np.empty((grid.size, y0.size))
    out[0] = y0
    y = y0.copy()
    for i in range(grid.size - 1):
        t0, t1 = grid[i], grid[i + 1]
        h = (t1 - t0) / substeps
        t = t0
        for _ in range(substeps):
            k1 = f(t, y)
            k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = f(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        out[i + 1] = y
    return out


_METHOD_MAP = {"rk45": "RK45", "dop853": "DOP853"}


def integrate(rhs: Callable, state0, t_end: float, grid: Optional[np.ndarray] = None,
              rtol: float = DEFAULT_RTOL, method: str = "dop853",
              rk4_substeps: int = 1, metadata: Optional[dict] = None) -> Trajectory:
    """Integrate a state-space RHS and sample it on the output grid.

    method 'rk45'/'dop853' are adaptive embedded Runge-Kutta pairs with
    dense output; 'rk4' is a fixed-step classical scheme for bitwise
    reproducible runs.  rtol is the local relative tolerance of the
    adaptive methods, valid range [1e-12, 1e-4].
    """
    if t_end <= 0:
        raise ConfigError("t_end must be > 0")
    if not 1e-12 <= rtol <= 1e-4:
        raise ConfigError("rtol must lie in [1e-12, 1e-4]")
    if grid is None:
        grid = np.linspace(0.0, t_end, DEFAULT_GRID_POINTS)
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ConfigError("output grid must be strictly increasing with >= 2 points")

    y0 = state0.pack()
    f = _pack_rhs(rhs, state0)

    if method == "rk4":
        ys = _rk4_fixed(f, y0, grid, rk4_substeps)
    elif method in _METHOD_MAP:
        sol = solve_ivp(f, (grid[0], grid[-1]), y0, method=_METHOD_MAP[method],
                        t_eval=grid, rtol=rtol, atol=1e-14)
        if not sol.success:
            last_t = sol.t[-1] if sol.t.size else grid[0]
            last_y = sol.y[:, -1] if sol.t.size else y0
            raise IntegrationError(f"integration failed: {sol.message}",
                                   last_time=last_t, last_state=last_y)
        ys = sol.y.T
    else:
        raise ConfigError(f"unknown integrator method {method!r}")

    meta = dict(metadata or {})
    meta.setdefault("integrator", {})
    meta["integrator"].update({"method": method, "rtol": rtol,
                               "t_end": float(t_end), "points": int(grid.size)})

    traj_warnings = []
    if isinstance(state0, ReducedState):
        coh, phase, pop = ys[:, 0], ys[:, 1], ys[:, 2]
        _monitor(pop, np.abs(coh), traj_warnings)
        return Trajectory(grid, "reduced", coherence_abs=coh, phase=phase,
                          population=pop, metadata=meta, warnings=traj_warnings)
    n = state0.n_sites
    coherences = ys[:, :n] + 1j * ys[:, n:2 * n]
    populations = ys[:, 2 * n:]
    _monitor(populations, np.abs(coherences), traj_warnings)
    return Trajectory(grid, "ensemble", coherences=coherences,
                      populations=populations, metadata=meta, warnings=traj_warnings)


def _monitor(populations: np.ndarray, coherence_abs: np.ndarray, sink: list):
    pmin, pmax = float(np.min(populations)), float(np.max(populations))
    if pmin < -POPULATION_SLACK or pmax > 1.0 + POPULATION_SLACK:
        sink.append(f"population left [0, 1]: min={pmin:.3e}, max={pmax:.3e}")
    smax = float(np.max(coherence_abs))
    if smax > 0.5 + POPULATION_SLACK:
        sink.append(f"coherence magnitude exceeded 1/2: max={smax:.3e}")


def analytic_phase(t, k_imag: float, pulse_area: float, gamma: float = 1.0,
                   phi0: float = 0.0):
    """Closed-form phase obtained with the population following its bare
    exponential decay (coupling backaction on the population neglected)."""
    t = np.asarray(t, dtype=float)
    p0 = math.sin(pulse_area / 2.0) ** 2
    return -k_imag * (t - (2.0 / gamma) * (1.0 - np.exp(-gamma * t)) * p0) + phi0


def analytic_population(t, pulse_area: float, gamma: float = 1.0):
    """Bare exponential decay sin^2(A/2) e^{-G t}."""
    t = np.asarray(t, dtype=float)
    return math.sin(pulse_area / 2.0) ** 2 * np.exp(-gamma * t)


def low_excitation_rates(coupling: Union[CouplingSummary, complex],
                         gamma: float = 1.0):
    """(coherence decay rate, phase slope) in the low-excitation limit:
    (G/2 + K', -K'').  The intensity-level decay rate is twice the first."""
    k = coupling.value if isinstance(coupling, CouplingSummary) else complex(coupling)
    return 0.5 * gamma + k.real, -k.imag


def simulate_reduced(geom: ChainGeometry, decay: DecayParameters, pulse_area: float,
                     coupling: Optional[Union[CouplingSummary, complex]] = None,
                     phi0: float = 0.0, t_end: float = DEFAULT_T_END,
                     grid: Optional[np.ndarray] = None, rtol: float = DEFAULT_RTOL,
                     method: str = "dop853", rk4_substeps: int = 1) -> Trajectory:
    """Run the translationally invariant model; K defaults to the
    infinite-chain closed form for the given geometry."""
    if coupling is None:
        coupling = coupling_parameter_infinite(geom, decay)
    exc = ExcitationSpec.from_geometry(pulse_area, geom, phi0)
    state0 = init_state(exc)
    k = coupling.value if isinstance(coupling, CouplingSummary) else complex(coupling)
    meta = _run_metadata(geom, decay, exc, model="reduced")
    meta["coupling_parameter"] = {"real": k.real, "imag": k.imag}
    if isinstance(coupling, CouplingSummary):
        meta["coupling_parameter"].update(
            provenance=coupling.provenance, convention_factor=coupling.convention_factor,
            regularization_eps=coupling.regularization_eps)
    return integrate(lambda st: rhs_reduced(st, k, decay), state0, t_end, grid=grid,
                     rtol=rtol, method=method, rk4_substeps=rk4_substeps, metadata=meta)


def simulate_finite(geom: ChainGeometry, decay: DecayParameters, pulse_area: float,
                    n_sites: int, phi0: float = 0.0, t_end: float = DEFAULT_T_END,
                    grid: Optional[np.ndarray] = None, rtol: float = DEFAULT_RTOL,
                    method: str = "dop853", rk4_substeps: int = 1,
                    uniform_coupling: Optional[complex] = None) -> Trajectory:
    """Run the site-resolved chain model."""
    kernel = CouplingKernel(geom, decay, n_sites)
    exc = ExcitationSpec.from_geometry(pulse_area, geom, phi0)
    state0 = init_state(exc, n_sites)
    meta = _run_metadata(geom, decay, exc, model="finite", n_sites=n_sites)
    return integrate(lambda st: rhs_finite(st, kernel, uniform_coupling), state0,
                     t_end, grid=grid, rtol=rtol, method=method,
                     rk4_substeps=rk4_substeps, metadata=meta)


def _run_metadata(geom: ChainGeometry, decay: DecayParameters, exc: ExcitationSpec,
                  **extra) -> dict:
    return {
        "geometry": {"lattice_spacing": geom.lattice_spacing, "wavelength": geom.wavelength,
                     "dipole_angle": geom.dipole_angle, "incidence_angle": geom.incidence_angle,
                     "eta0": geom.eta0, "phase_step": geom.phase_step},
        "decay": {"gamma_total": decay.gamma_total, "gamma_rad": decay.gamma_rad,
                  "gamma_ic": decay.gamma_ic, "gamma0": decay.gamma0},
        "excitation": {"pulse_area": exc.pulse_area, "global_phase": exc.global_phase,
                       "phase_step": exc.phase_step},
        **extra,
    }
