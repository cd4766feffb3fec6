"""Perturbed evolutions: noisy digital product unitaries, analog Gaussian-process
noise, white-noise stochastic Schroedinger integration, and Lindblad propagation.

Digital gate generators (per gate at step j, stage v, term g):
    M1:          -i (t/n) (a_v H_g + delta L)
    M2:          -i ((t/n) a_v H_g + delta L)
    DiscreteIto: -i ((t/n) a_v H_g + sqrt(t/n) delta L)
with one fresh mean-zero L per (g, v, j) in the random models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lattice import Region
from .linalg import EigHermitian, apply_local_left, check_hermitian, operator_norm
from .operators import (
    CapacityError,
    Observable,
    PerturbationEnsemble,
    TruncatedHamiltonian,
    as_rng,
    assemble_dense,
    embed_operator,
    pauli_string,
    site_positions,
)
from .trotter import TrotterPlan, _stage_term_order, apply_product, product_unitary

DIGITAL_MODELS = ("M1", "M2", "DiscreteIto")
SUPEROP_DIM_CAP = 64  # superoperator dimension cap 4096


class NoiseError(ValueError):
    """Domain or numerical error in noisy evolution."""


@dataclass(frozen=True)
class DigitalNoiseSpec:
    model: str
    delta: float
    ensemble: PerturbationEnsemble = field(default_factory=PerturbationEnsemble)

    def __post_init__(self):
        if self.model not in DIGITAL_MODELS:
            raise NoiseError(f"unknown digital model {self.model!r}")
        if self.delta < 0:
            raise NoiseError("delta must be >= 0")

    def gate_scale(self, t: float, n: int) -> float:
        """Coefficient multiplying L inside the gate generator."""
        if self.model == "M1":
            return t / n
        if self.model == "M2":
            return 1.0
        return math.sqrt(t / n)


@dataclass(frozen=True)
class GaussianProcessSpec:
    """Gaussian noise processes xi_{g,a}(t) with covariance D(dt)=exp(-dt^2/2 lam^2)."""

    m: int = 1
    lam: float = math.inf
    grid_dt: float | None = None

    def __post_init__(self):
        if self.m < 1:
            raise NoiseError("m must be >= 1")
        if self.lam <= 0:
            raise NoiseError("correlation length must be positive (math.inf allowed)")

    def n_grid(self, t_final: float) -> int:
        """At least 8 points per lambda and 64 per unit time, whichever is finer."""
        if self.grid_dt is not None:
            return max(2, math.ceil(t_final / self.grid_dt))
        per_time = 64.0 * t_final
        per_lam = 0.0 if math.isinf(self.lam) else 8.0 * t_final / self.lam
        return max(2, math.ceil(max(per_time, per_lam)))


@dataclass(frozen=True)
class LindbladSpec:
    """Hermitian jump operators (local matrix, support) with a global strength."""

    jumps: tuple[tuple[np.ndarray, Region], ...]
    delta: float

    def __post_init__(self):
        if self.delta < 0:
            raise NoiseError("delta must be >= 0")
        for mat, _ in self.jumps:
            check_hermitian(mat, 1e-10)
            if operator_norm(mat) > 1.0 + 1e-9:
                raise NoiseError("jump operators must have norm <= 1")


@dataclass
class NoiseRealization:
    """Seed bookkeeping: everything random is determined by
    (master_seed, stream, trial_index)."""

    master_seed: int
    trial_index: int
    stream: tuple[int, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def rng(self, *extra: int) -> np.random.Generator:
        key = (self.master_seed,) + tuple(self.stream) + (self.trial_index,)
        return as_rng(key + tuple(int(e) for e in extra))


@dataclass(frozen=True)
class FrozenPerturbation:
    """A fixed per-term Hermitian perturbation set (worst-case probes)."""

    ops: tuple[np.ndarray, ...]  # one local matrix per retained term, in theta order


@dataclass(frozen=True)
class NoiseDirections:
    """Hermitian directions X_{g,a} on the retained term supports, norm <= 1."""

    local_ops: tuple[np.ndarray, ...]
    supports: tuple[Region, ...]

    def __len__(self) -> int:
        return len(self.local_ops)

    def embedded(self, trunc: TruncatedHamiltonian) -> list[np.ndarray]:
        return [embed_operator(op, sup, trunc.region) for op, sup in zip(self.local_ops, self.supports)]

    def positions(self, trunc: TruncatedHamiltonian) -> list[list[int]]:
        return [site_positions(sup, trunc.region) for sup in self.supports]


def noise_directions(
    trunc: TruncatedHamiltonian, m: int, seed, ensemble: PerturbationEnsemble | None = None
) -> NoiseDirections:
    """Draw m Hermitian unit-norm directions per retained term."""
    ensemble = ensemble or PerturbationEnsemble()
    rng = as_rng(seed)
    ops, sups = [], []
    for term in trunc.terms:
        for _ in range(m):
            ops.append(ensemble.sample(len(term.support), rng))
            sups.append(term.support)
    return NoiseDirections(local_ops=tuple(ops), supports=tuple(sups))


def dephasing_directions(trunc: TruncatedHamiltonian) -> NoiseDirections:
    """One Pauli-Z direction on each term's anchor site (calibration-style noise)."""
    ops, sups = [], []
    for term in trunc.terms:
        pos = term.support.sites.index(term.anchor)
        letters = ["I"] * len(term.support)
        letters[pos] = "Z"
        ops.append(pauli_string("".join(letters)))
        sups.append(term.support)
    return NoiseDirections(local_ops=tuple(ops), supports=tuple(sups))


# ---------------------------------------------------------------------------
# Digital noisy products
# ---------------------------------------------------------------------------


def _batched_propagators(generators: np.ndarray) -> np.ndarray:
    """exp(-i G) for a stack of Hermitian generators."""
    w, v = np.linalg.eigh(generators)
    phases = np.exp(-1j * w)
    return np.einsum("...ij,...j,...kj->...ik", v, phases, np.conj(v))


def _noisy_gate_table(
    plan: TrotterPlan,
    trunc: TruncatedHamiltonian,
    t: float,
    spec: DigitalNoiseSpec,
    realization,
) -> list[np.ndarray]:
    """Per-term stacks of gates indexed by j*Upsilon+v, in a fixed draw order."""
    tau = t / plan.n
    scale = spec.delta * spec.gate_scale(t, plan.n)
    coeffs = np.array([s.coefficient for s in plan.stages])
    tables = []
    if isinstance(realization, FrozenPerturbation):
        if len(realization.ops) != len(trunc.terms):
            raise NoiseError("frozen perturbation must carry one op per retained term")
        for term, lop in zip(trunc.terms, realization.ops):
            gens = tau * coeffs[:, None, None] * term.matrix[None] + scale * lop[None]
            gates = _batched_propagators(gens)  # per stage only; reused across j
            tables.append(("per_stage", gates))
        return tables
    rng = realization.rng(0xD161) if isinstance(realization, NoiseRealization) else as_rng(realization)
    n_draws = plan.n * plan.upsilon
    for term in trunc.terms:
        ls = spec.ensemble.sample_batch(len(term.support), n_draws, rng)
        stage_angles = np.tile(coeffs, plan.n)  # index j*Upsilon+v
        gens = tau * stage_angles[:, None, None] * term.matrix[None] + scale * ls
        tables.append(("per_gate", _batched_propagators(gens)))
    return tables


def _run_noisy_product(plan, trunc, t, spec, realization, work: np.ndarray) -> np.ndarray:
    tables = _noisy_gate_table(plan, trunc, t, spec, realization)
    positions = [site_positions(term.support, trunc.region) for term in trunc.terms]
    nq = trunc.n_qubits
    ups = plan.upsilon
    for j in range(plan.n):
        for v, stage in enumerate(plan.stages):
            for idx in _stage_term_order(stage, len(trunc.terms)):
                kind, gates = tables[idx]
                gate = gates[v] if kind == "per_stage" else gates[j * ups + v]
                work = apply_local_left(gate, positions[idx], work, nq)
    return work


def perturbed_product_unitary(
    plan: TrotterPlan,
    trunc: TruncatedHamiltonian,
    t: float,
    spec: DigitalNoiseSpec,
    realization,
) -> np.ndarray:
    """Dense noisy product unitary; bit-identical to the noiseless one at delta=0."""
    if trunc.dim > 4096:
        raise CapacityError(f"dim {trunc.dim} exceeds capacity")
    if spec.delta == 0.0:
        return product_unitary(plan, trunc, t)
    return _run_noisy_product(plan, trunc, t, spec, realization, np.eye(trunc.dim, dtype=complex))


def perturbed_product_apply(
    plan: TrotterPlan,
    trunc: TruncatedHamiltonian,
    t: float,
    spec: DigitalNoiseSpec,
    realization,
    psi: np.ndarray,
) -> np.ndarray:
    """Apply the noisy product to a state without forming the matrix."""
    if spec.delta == 0.0:
        return apply_product(plan, trunc, t, psi)
    return _run_noisy_product(plan, trunc, t, spec, realization, psi.astype(complex))


# ---------------------------------------------------------------------------
# Gaussian-process analog noise
# ---------------------------------------------------------------------------


def sample_gaussian_paths(
    spec: GaussianProcessSpec,
    t_final: float,
    n_grid: int,
    n_channels: int,
    realization,
) -> tuple[np.ndarray, np.ndarray]:
    """Channel paths xi(t_i) on the midpoint grid t_i=(i+1/2)t/n_grid.

    Finite lam: one multivariate normal per channel with covariance
    D(t_i - t_j), via Cholesky with 1e-10 diagonal jitter.  lam=inf: a single
    standard normal per channel, constant in time.
    """
    if n_grid < 2:
        raise NoiseError("n_grid must be >= 2")
    rng = realization.rng(0xA7A) if isinstance(realization, NoiseRealization) else as_rng(realization)
    dt = t_final / n_grid
    times = (np.arange(n_grid) + 0.5) * dt
    if math.isinf(spec.lam):
        draws = rng.standard_normal(n_channels)
        return times, np.repeat(draws[:, None], n_grid, axis=1)
    diffs = times[:, None] - times[None, :]
    cov = np.exp(-(diffs**2) / (2.0 * spec.lam**2)) + 1e-10 * np.eye(n_grid)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as err:
        raise NoiseError(
            "noise covariance not positive definite after jitter; grid too fine for lambda"
        ) from err
    z = rng.standard_normal((n_channels, n_grid))
    return times, z @ chol.T


@dataclass(frozen=True)
class ProcessPerturbation:
    """Sampled noise paths attached to fixed Hermitian directions."""

    times: np.ndarray
    paths: np.ndarray  # (n_channels, n_grid)
    directions: NoiseDirections

    def values_at(self, query: np.ndarray) -> np.ndarray:
        return np.stack([np.interp(query, self.times, p) for p in self.paths])


@dataclass(frozen=True)
class ConstantPerturbation:
    """Time-independent Hermitian perturbations, one per retained term."""

    directions: NoiseDirections
    weights: np.ndarray | None = None  # optional per-channel amplitudes


def evolve_analog(
    trunc: TruncatedHamiltonian,
    perturbation: ProcessPerturbation | ConstantPerturbation,
    delta: float,
    t: float,
    tol: float = 1e-8,
    psi0: np.ndarray | None = None,
    max_halvings: int = 12,
):
    """Time-ordered propagator of H + delta * sum_a xi_a(s) X_a.

    Time-independent perturbations use one exact exponential.  Process noise
    uses piecewise-constant midpoint exponential stepping, halving the step
    until successive results differ by less than tol.
    """
    h0 = assemble_dense(trunc)
    if isinstance(perturbation, ConstantPerturbation):
        ops = perturbation.directions.embedded(trunc)
        weights = (
            perturbation.weights if perturbation.weights is not None else np.ones(len(ops))
        )
        h = h0 + delta * sum(w * op for w, op in zip(weights, ops))
        u = EigHermitian.of(h).propagator(t)
        return u @ psi0 if psi0 is not None else u

    ops = perturbation.directions.embedded(trunc)
    stacked = np.stack(ops)

    def propagate(n_steps: int):
        dt = t / n_steps
        mids = (np.arange(n_steps) + 0.5) * dt
        xi = perturbation.values_at(mids)  # (channels, n_steps)
        work = psi0.astype(complex) if psi0 is not None else np.eye(trunc.dim, dtype=complex)
        for k in range(n_steps):
            h = h0 + delta * np.tensordot(xi[:, k], stacked, axes=1)
            w, v = np.linalg.eigh(h)
            step = (v * np.exp(-1j * dt * w)) @ v.conj().T
            work = step @ work
        return work

    n_steps = len(perturbation.times)
    prev = propagate(n_steps)
    for _ in range(max_halvings):
        n_steps *= 2
        cur = propagate(n_steps)
        gap = float(np.linalg.norm(cur - prev, 2))
        if gap < tol:
            return cur
        prev = cur
    raise NoiseError(f"analog integrator did not converge to {tol} after {max_halvings} halvings")


# ---------------------------------------------------------------------------
# White-noise stochastic Schroedinger equation
# ---------------------------------------------------------------------------


def default_sde_dt(delta: float) -> float:
    return min(0.01, 0.001 / delta**2) if delta > 0 else 0.01


def evolve_white_noise(
    trunc: TruncatedHamiltonian,
    directions: NoiseDirections,
    delta: float,
    t: float,
    dt: float | None,
    realization,
    psi0: np.ndarray,
    increments: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    """Euler-Maruyama for d psi = (-iH - delta^2/2 sum X^2) psi dt - i delta sum X psi dW.

    The deterministic drift factor is applied as its exact one-step exponential,
    so the delta=0 path reproduces the exact propagator; the noise kick is the
    Euler-Maruyama increment.  No pathwise renormalization (the norm is a
    martingale, preserved only in expectation); the final norm is recorded as a
    diagnostic and flagged outside [0.5, 1.5].

    Passing `increments` (shape (n_steps, channels)) pins the Wiener path,
    which lets a caller couple runs at different step sizes.
    """
    dt = default_sde_dt(delta) if dt is None else dt
    n_steps = max(1, math.ceil(t / dt))
    step_dt = t / n_steps
    h0 = assemble_dense(trunc)
    ops = directions.embedded(trunc)
    drift = -1j * h0
    for op in ops:
        drift = drift - 0.5 * delta**2 * (op @ op)
    e_drift = scipy.linalg.expm(drift * step_dt)
    rng = realization.rng(0x5DE) if isinstance(realization, NoiseRealization) else as_rng(realization)
    psi = psi0.astype(complex)
    if increments is None:
        increments = rng.standard_normal((n_steps, len(ops))) * math.sqrt(step_dt)
    elif increments.shape != (n_steps, len(ops)):
        raise NoiseError(f"increments shape {increments.shape} != {(n_steps, len(ops))}")
    for k in range(n_steps):
        psi = e_drift @ psi
        if delta:
            kick = np.zeros_like(psi)
            for op, dw in zip(ops, increments[k]):
                kick += dw * (op @ psi)
            psi = psi - 1j * delta * kick
    norm = float(np.linalg.norm(psi))
    diagnostics = {"final_norm": norm, "norm_warning": not (0.5 <= norm <= 1.5), "n_steps": n_steps}
    if isinstance(realization, NoiseRealization):
        realization.diagnostics.update(diagnostics)
    return psi, diagnostics


# ---------------------------------------------------------------------------
# Lindblad propagation
# ---------------------------------------------------------------------------


def lindblad_superoperator(trunc: TruncatedHamiltonian, spec: LindbladSpec) -> np.ndarray:
    """Row-major-vec generator -i[H,.] + delta^2 sum (L.L - {L^2,.}/2)."""
    dim = trunc.dim
    if dim > SUPEROP_DIM_CAP:
        raise CapacityError(
            f"superoperator mode needs dim <= {SUPEROP_DIM_CAP}, got {dim}; use trajectory mode"
        )
    h = assemble_dense(trunc)
    eye = np.eye(dim)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for mat, support in spec.jumps:
        lop = embed_operator(mat, support, trunc.region)
        l2 = lop @ lop
        sup += spec.delta**2 * (
            np.kron(lop, lop.conj()) - 0.5 * (np.kron(l2, eye) + np.kron(eye, l2.T))
        )
    return sup


def lindblad_propagate(
    trunc: TruncatedHamiltonian,
    spec: LindbladSpec,
    rho0: np.ndarray,
    t: float,
    mode: str = "superoperator",
    trials: int = 1000,
    dt: float | None = None,
    seed=0,
) -> np.ndarray:
    """Propagate rho0 under the Lindbladian; validates the output state."""
    if mode == "superoperator":
        sup = lindblad_superoperator(trunc, spec)
        vec = scipy.linalg.expm(sup * t) @ rho0.reshape(-1)
        rho = vec.reshape(rho0.shape)
    elif mode == "trajectory":
        directions = NoiseDirections(
            local_ops=tuple(m for m, _ in spec.jumps), supports=tuple(s for _, s in spec.jumps)
        )
        evals, evecs = np.linalg.eigh(check_hermitian(rho0, 1e-10))
        keep = evals > 1e-12
        rho = np.zeros_like(rho0, dtype=complex)
        rng = as_rng(seed)
        for weight, col in zip(evals[keep], evecs[:, keep].T):
            acc = np.zeros_like(rho0, dtype=complex)
            for k in range(trials):
                psi, _ = evolve_white_noise(
                    trunc, directions, spec.delta, t, dt, as_rng((int(rng.integers(2**31)), k)), col
                )
                acc += np.outer(psi, psi.conj())
            rho += weight * acc / trials
    else:
        raise NoiseError(f"unknown Lindblad mode {mode!r}")
    _validate_density(rho, mode)
    return rho


def _validate_density(rho: np.ndarray, mode: str) -> None:
    tr = complex(np.trace(rho))
    if mode == "superoperator":
        if abs(tr - 1.0) > 1e-9:
            raise NoiseError(f"trace not preserved: {tr}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise NoiseError("output density matrix not Hermitian")
        if float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2))) < -1e-8:
            raise NoiseError("output density matrix not positive semidefinite")


# ---------------------------------------------------------------------------
# Worst-case probe family
# ---------------------------------------------------------------------------


def adversarial_probes(
    trunc: TruncatedHamiltonian,
    obs: Observable,
    t: float,
    n_random: int = 32,
    seed=0,
    ensemble: PerturbationEnsemble | None = None,
) -> list[FrozenPerturbation]:
    """Fixed probe family for worst-case audits: all-X, all-Z, a
    commutator-aligned direction at t*=t/2, plus random ensemble draws.

    This family only probes the supremum from below; the bounds must dominate
    every member.
    """
    ensemble = ensemble or PerturbationEnsemble()
    probes = []
    for letter in ("X", "Z"):
        probes.append(
            FrozenPerturbation(
                ops=tuple(pauli_string(letter * len(term.support)) for term in trunc.terms)
            )
        )
    probes.append(_commutator_aligned_probe(trunc, obs, t))
    rng = as_rng(seed)
    for _ in range(n_random):
        probes.append(
            FrozenPerturbation(
                ops=tuple(ensemble.sample(len(term.support), rng) for term in trunc.terms)
            )
        )
    return probes


def _commutator_aligned_probe(trunc: TruncatedHamiltonian, obs: Observable, t: float) -> FrozenPerturbation:
    h = assemble_dense(trunc)
    u = EigHermitian.of(h).propagator(t / 2.0)
    o = embed_operator(obs.matrix, obs.support, trunc.region)
    evolved = u.conj().T @ o @ u
    nq = trunc.n_qubits
    ops = []
    for term in trunc.terms:
        pos = site_positions(term.support, trunc.region)
        h_emb = embed_operator(term.matrix, term.support, trunc.region)
        comm = 1j * (h_emb @ evolved - evolved @ h_emb)
        local = partial_trace_to(comm, pos, nq)
        local = (local + local.conj().T) / 2.0
        nrm = operator_norm(local)
        if nrm < 1e-12:
            local = pauli_string("Y" * len(term.support))
            nrm = 1.0
        ops.append(local / nrm)
    return FrozenPerturbation(ops=tuple(ops))


def partial_trace_to(mat: np.ndarray, keep_positions: list[int], n_qubits: int) -> np.ndarray:
    """Trace out every qubit not in keep_positions, normalized by 2^(#traced)."""
    k = len(keep_positions)
    rest = [q for q in range(n_qubits) if q not in keep_positions]
    tensor = mat.reshape((2,) * (2 * n_qubits))
    perm = keep_positions + rest + [n_qubits + q for q in keep_positions] + [n_qubits + q for q in rest]
    tensor = np.transpose(tensor, perm)
    r = n_qubits - k
    tensor = tensor.reshape(2**k, 2**r, 2**k, 2**r)
    return np.einsum("arbr->ab", tensor) / 2**r
