"""Observable-error functionals: state-dependent and worst-case deviations,
Hilbert-Schmidt distances, and truncation probes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import Region
from .linalg import EigHermitian, LinalgError, unitarity_defect
from .operators import LocalHamiltonian, Observable, assemble_dense, embed_operator, truncate

UNITARITY_TOL = 1e-9
SAMPLE_TOL = 1e-9


class MetricsError(ValueError):
    """Domain error in error-functional evaluation."""


@dataclass(frozen=True)
class ErrorSample:
    """One measured error record with its run metadata."""

    delta_rho: float
    delta_wc: float | None = None
    hs_distance: float | None = None
    norm_O: float = 1.0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.delta_rho < -SAMPLE_TOL:
            raise MetricsError("delta_rho must be nonnegative")
        if self.hs_distance is not None and self.delta_rho > 2 * self.norm_O * self.hs_distance + SAMPLE_TOL:
            raise MetricsError("delta_rho exceeds 2*||O||*hs_distance")
        if self.delta_wc is not None and self.delta_rho > self.delta_wc + SAMPLE_TOL:
            raise MetricsError("delta_rho exceeds delta_wc")


def expectation(obs_matrix: np.ndarray, state: np.ndarray) -> float:
    """<O> for a state vector or a density matrix."""
    if state.ndim == 1:
        return float(np.real(np.vdot(state, obs_matrix @ state)))
    return float(np.real(np.trace(obs_matrix @ state)))


def embed_observable(obs: Observable, region: Region) -> np.ndarray:
    if not obs.support.issubset(region):
        raise MetricsError("observable support not contained in the truncated region")
    return embed_operator(obs.matrix, obs.support, region)


def delta_state(obs: Observable, region: Region, exact_output: np.ndarray, noisy_output: np.ndarray) -> float:
    """|tr(O rho_exact) - tr(O rho_noisy)| with O identity-padded onto region."""
    o = embed_observable(obs, region)
    return abs(expectation(o, exact_output) - expectation(o, noisy_output))


def hs_distance(psi: np.ndarray, phi: np.ndarray) -> float:
    """Plain 2-norm distance between state vectors."""
    return float(np.linalg.norm(psi - phi))


def delta_worst(obs: Observable, region: Region, exact_u: np.ndarray, noisy_u: np.ndarray) -> float:
    """sup over states of the expectation error: ||U^dag O U - V^dag O V||."""
    for name, u in (("exact", exact_u), ("noisy", noisy_u)):
        if unitarity_defect(u) > UNITARITY_TOL:
            raise LinalgError(f"{name} propagator is not unitary to {UNITARITY_TOL}")
    o = embed_observable(obs, region)
    diff = exact_u.conj().T @ o @ exact_u - noisy_u.conj().T @ o @ noisy_u
    return float(np.linalg.norm(diff, 2))


def truncation_probe(
    obs: Observable, ham: LocalHamiltonian, t: float, l_list: list[int]
) -> list[tuple[int, float]]:
    """Heisenberg-picture truncation errors against the largest-l reference.

    Returns (l, ||U_l^dag O U_l - U_ref^dag O U_ref||) for every l in l_list;
    the reference is the largest requested truncation.
    """
    if not l_list:
        raise MetricsError("l_list must be nonempty")
    l_ref = max(l_list)
    tr_ref = truncate(ham, obs, l_ref)
    evolved_ref = _evolved_observable(obs, ham, t, l_ref)
    out = []
    for l in sorted(l_list):
        evolved_l, region_l = _evolved_observable(obs, ham, t, l, return_region=True)
        lifted = embed_operator(evolved_l, region_l, tr_ref.region)
        out.append((l, float(np.linalg.norm(lifted - evolved_ref, 2))))
    return out


def _evolved_observable(obs, ham, t, l, return_region=False):
    tr = truncate(ham, obs, l)
    h = assemble_dense(tr)
    u = EigHermitian.of(h).propagator(t)
    o = embed_observable(obs, tr.region)
    evolved = u.conj().T @ o @ u
    return (evolved, tr.region) if return_region else evolved
