"""Exact master-equation evolution for small chains.

Ground truth for the truncated single-particle equations: the density
matrix of N two-level emitters evolves under

    drho/dt = -i[H, rho] + L[rho],
    H = - sum_{n,m} J_mn sigma+_n sigma-_m,
    L[rho] = sum_{n,m} (G_mn/2) (2 sigma-_m rho sigma+_n
                                 - sigma+_n sigma-_m rho - rho sigma+_n sigma-_m),

in the frame rotating at the transition frequency.  The coupling
matrices come from the same conjugated pair couplings as the dynamics
module: G_mn = 2 Re C*(|m-n|) for m != n, J_mn = -Im C*(|m-n|), and the
diagonal carries the full single-particle rate including internal
conversion (which never couples sites).

Dense matrices throughout; no superoperator is materialized.  The state
is 2^N x 2^N, so the hard cap is N = 8 and anything beyond a handful of
sites is better served by the cumulant equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .couplings import ChainGeometry, DecayParameters, pair_coupling_values
from .dynamics import ExcitationSpec, Trajectory, _run_metadata
from .errors import CapacityError, IntegrationError

SITE_CAP = 8  # 2^8 x 2^8 density matrix; practical runs use N <= 6

TRACE_TOL = 1e-10
HERMITICITY_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-9
TRACE_FAIL = 1e-8

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
_IDENTITY2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class CouplingMatrices:
    """Coherent (J) and incoherent (Gamma) coupling matrices of a chain."""

    j_matrix: np.ndarray
    gamma_matrix: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.j_matrix.shape[0]


def build_system(geom: ChainGeometry, decay: DecayParameters, n_sites: int,
                 site_cap: int = SITE_CAP) -> CouplingMatrices:
    """Free-space coupling matrices for an N-site chain."""
    if n_sites > site_cap:
        raise CapacityError(f"exact evolution capped at {site_cap} sites (requested {n_sites})")
    if n_sites < 1:
        raise ValueError("chain length must be >= 1")
    j = np.zeros((n_sites, n_sites))
    g = np.zeros((n_sites, n_sites))
    if n_sites > 1:
        c = pair_coupling_values(geom, decay, np.arange(1, n_sites))
        idx = np.arange(n_sites)
        sep = np.abs(idx[:, None] - idx[None, :])
        off = sep > 0
        g[off] = 2.0 * c.real[sep[off] - 1]
        j[off] = -c.imag[sep[off] - 1]
    np.fill_diagonal(g, decay.gamma_total)
    return CouplingMatrices(j, g)


def _site_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Embed a single-spin operator at `site` (0-based) into the chain space."""
    out = np.array([[1.0 + 0j]])
    for k in range(n_sites):
        out = np.kron(out, op if k == site else _IDENTITY2)
    return out


class _LindbladGenerator:
    """Precomputed operator products for the master-equation RHS."""

    def __init__(self, matrices: CouplingMatrices):
        n = matrices.n_sites
        self.dim = 2**n
        self.lower = [_site_operator(_SIGMA_MINUS, k, n) for k in range(n)]
        self.raise_ = [op.conj().T for op in self.lower]
        self.gamma = matrices.gamma_matrix
        # H = -sum J_mn sigma+_n sigma-_m  (J_nn = 0)
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for nn in range(n):
            for mm in range(n):
                if matrices.j_matrix[mm, nn] != 0.0:
                    h -= matrices.j_matrix[mm, nn] * (self.raise_[nn] @ self.lower[mm])
        self.hamiltonian = h
        # anticommutator part: sum (G_mn/2) sigma+_n sigma-_m
        acc = np.zeros((self.dim, self.dim), dtype=complex)
        for nn in range(n):
            for mm in range(n):
                if self.gamma[mm, nn] != 0.0:
                    acc += 0.5 * self.gamma[mm, nn] * (self.raise_[nn] @ self.lower[mm])
        self._anticomm_half = acc
        self.n_sites = n

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.hamiltonian @ rho - rho @ self.hamiltonian)
        for mm in range(self.n_sites):
            rho_sp = self.lower[mm] @ rho
            for nn in range(self.n_sites):
                gmn = self.gamma[mm, nn]
                if gmn != 0.0:
                    out += gmn * (rho_sp @ self.raise_[nn])
        out -= self._anticomm_half @ rho + rho @ self._anticomm_half
        return out


def initial_density_matrix(exc: ExcitationSpec, n_sites: int) -> np.ndarray:
    """Pure product state of identically rotated spins with plane-wave
    site phases, rho = |psi><psi|."""
    half = exc.pulse_area / 2.0
    psi = np.array([1.0 + 0j])
    for l in range(n_sites):
        phi = exc.global_phase + l * exc.phase_step
        # basis order (|g>, |e>) to match sigma^- = |g><e|
        spin = np.array([math.cos(half), np.exp(1j * phi) * math.sin(half)])
        psi = np.kron(psi, spin)
    return np.outer(psi, psi.conj())


def density_matrix_checks(rho: np.ndarray, check_positivity: bool = True) -> None:
    """Raise IntegrationError if rho stopped being a physical state."""
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITICITY_TOL:
        raise IntegrationError(f"density matrix lost Hermiticity: {herm:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise IntegrationError(f"density matrix trace drifted: |tr-1|={abs(tr-1.0):.3e}")
    if check_positivity:
        lo = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
        if lo < EIGENVALUE_FLOOR:
            raise IntegrationError(f"density matrix developed negative eigenvalue {lo:.3e}")


def evolve_exact(matrices: CouplingMatrices, exc: ExcitationSpec,
                 t_grid: np.ndarray, rtol: float = 1e-10,
                 correlator_pairs: Optional[Sequence[tuple]] = None,
                 geom: Optional[ChainGeometry] = None,
                 decay: Optional[DecayParameters] = None) -> Trajectory:
    """Integrate the master equation and return single-particle
    expectation values (plus requested <sigma+_n sigma-_m> correlators,
    1-based site pairs) sampled on t_grid."""
    n = matrices.n_sites
    gen = _LindbladGenerator(matrices)
    rho0 = initial_density_matrix(exc, n)
    dim = gen.dim

    def f(t, y):
        rho = y.view(complex).reshape(dim, dim)
        return gen.rhs(rho).ravel().view(float)

    y0 = rho0.ravel().view(float).copy()
    sol = solve_ivp(f, (t_grid[0], t_grid[-1]), y0, method="DOP853",
                    t_eval=t_grid, rtol=rtol, atol=1e-13)
    if not sol.success:
        raise IntegrationError(f"master equation integration failed: {sol.message}")

    lower = gen.lower
    number = [gen.raise_[k] @ gen.lower[k] for k in range(n)]
    pairs = [(a - 1, b - 1) for a, b in (correlator_pairs or [])]
    pair_ops = {ab: gen.raise_[ab[0]] @ gen.lower[ab[1]] for ab in pairs}

    n_t = t_grid.size
    coherences = np.empty((n_t, n), dtype=complex)
    populations = np.empty((n_t, n))
    correlators = {ab: np.empty(n_t, dtype=complex) for ab in pairs}
    samples = np.ascontiguousarray(sol.y.T)
    for i in range(n_t):
        rho = samples[i].view(complex).reshape(dim, dim)
        if abs(np.trace(rho) - 1.0) > TRACE_FAIL:
            raise IntegrationError(
                f"trace drift {abs(np.trace(rho) - 1.0):.3e} at t={t_grid[i]:.4f}")
        for k in range(n):
            coherences[i, k] = np.trace(lower[k] @ rho)
            populations[i, k] = np.trace(number[k] @ rho).real
        for ab, op in pair_ops.items():
            correlators[ab][i] = np.trace(op @ rho)

    meta = {"model": "exact", "n_sites": n, "rtol": rtol}
    if geom is not None and decay is not None:
        meta = _run_metadata(geom, decay, exc, model="exact", n_sites=n, rtol=rtol)
    named = {f"{a + 1},{b + 1}": v for (a, b), v in correlators.items()} or None
    return Trajectory(np.asarray(t_grid, float), "ensemble", coherences=coherences,
                      populations=populations, metadata=meta, correlators=named)


def final_density_matrix(matrices: CouplingMatrices, exc: ExcitationSpec,
                         t: float, rtol: float = 1e-10) -> np.ndarray:
    """Density matrix at a single time, with physicality checks applied."""
    n = matrices.n_sites
    gen = _LindbladGenerator(matrices)
    rho0 = initial_density_matrix(exc, n)

    def f(_, y):
        rho = y.view(complex).reshape(gen.dim, gen.dim)
        return gen.rhs(rho).ravel().view(float)

    sol = solve_ivp(f, (0.0, t), rho0.ravel().view(float).copy(), method="DOP853",
                    rtol=rtol, atol=1e-13)
    if not sol.success:
        raise IntegrationError(f"master equation integration failed: {sol.message}")
    rho = np.ascontiguousarray(sol.y[:, -1]).view(complex).reshape(gen.dim, gen.dim)
    density_matrix_checks(rho)
    return rho


def expectation_lowering(rho: np.ndarray, site: int) -> complex:
    """<sigma^-_site> (1-based site index)."""
    n = int(round(math.log2(rho.shape[0])))
    return complex(np.trace(_site_operator(_SIGMA_MINUS, site - 1, n) @ rho))


def connected_correlation(rho: np.ndarray, n_site: int, m_site: int) -> complex:
    """<sigma+_n sigma-_m> - <sigma+_n><sigma-_m> for n != m (1-based),
    i.e. the two-particle piece the first-order truncation discards."""
    if n_site == m_site:
        raise ValueError("connected correlation requires two distinct sites")
    n = int(round(math.log2(rho.shape[0])))
    sp = _site_operator(_SIGMA_MINUS.conj().T, n_site - 1, n)
    sm = _site_operator(_SIGMA_MINUS, m_site - 1, n)
    joint = complex(np.trace(sp @ sm @ rho))
    return joint - complex(np.trace(sp @ rho)) * complex(np.trace(sm @ rho))
