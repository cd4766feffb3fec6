"""Even-order Suzuki-Trotter plans, product unitaries, and Trotter-error oracles."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .linalg import EigHermitian, apply_local_left
from .operators import CapacityError, TruncatedHamiltonian, assemble_dense, embed_operator, site_positions

EXACT_COMMUTATOR_DIM_CAP = 256


class TrotterError(ValueError):
    """Domain error in plan construction or evaluation."""


@dataclass(frozen=True)
class Stage:
    """One product-formula stage: time fraction and term ordering."""

    coefficient: float
    forward: bool


@dataclass(frozen=True)
class TrotterPlan:
    """Suzuki product formula of even order p repeated n times."""

    p: int
    n: int
    stages: tuple[Stage, ...]

    @property
    def upsilon(self) -> int:
        return len(self.stages)

    def coefficient_sum(self) -> float:
        return float(sum(s.coefficient for s in self.stages))

    def inverse(self) -> "TrotterPlan":
        """Reversed stage list with negated coefficients and flipped orderings."""
        rev = tuple(Stage(-s.coefficient, not s.forward) for s in reversed(self.stages))
        return TrotterPlan(p=self.p, n=self.n, stages=rev)


def _suzuki_stages(p: int) -> list[Stage]:
    if p == 2:
        return [Stage(0.5, True), Stage(0.5, False)]
    prev = _suzuki_stages(p - 2)
    pk = 1.0 / (4.0 - 4.0 ** (1.0 / (p - 1)))
    out: list[Stage] = []
    for scale in (pk, pk, 1.0 - 4.0 * pk, pk, pk):
        out.extend(Stage(s.coefficient * scale, s.forward) for s in prev)
    return out


def suzuki_plan(p: int, n: int) -> TrotterPlan:
    """Order-p Suzuki plan (p even) with Trotter number n."""
    if p < 2 or p % 2 != 0:
        raise TrotterError(f"order must be a positive even integer, got {p}")
    if n < 1:
        raise TrotterError(f"Trotter number must be >= 1, got {n}")
    return TrotterPlan(p=p, n=n, stages=tuple(_suzuki_stages(p)))


class _GateCache:
    """Per-(stage coefficient, term) gate exponentials on the truncation region."""

    def __init__(self, trunc: TruncatedHamiltonian):
        self.trunc = trunc
        self.term_eigs = [EigHermitian.of(t.matrix) for t in trunc.terms]
        self.positions = [site_positions(t.support, trunc.region) for t in trunc.terms]

    def gate(self, term_index: int, angle: float) -> np.ndarray:
        return self.term_eigs[term_index].propagator(angle)


def _stage_term_order(stage: Stage, n_terms: int) -> range:
    return range(n_terms) if stage.forward else range(n_terms - 1, -1, -1)


def product_step_matrix(plan: TrotterPlan, trunc: TruncatedHamiltonian, t: float) -> np.ndarray:
    """Dense matrix of one Trotter step S_p(t/n) on the truncation region."""
    cache = _GateCache(trunc)
    n_qubits = trunc.n_qubits
    step = np.eye(trunc.dim, dtype=complex)
    tau = t / plan.n
    for stage in plan.stages:
        for idx in _stage_term_order(stage, len(trunc.terms)):
            gate = cache.gate(idx, stage.coefficient * tau)
            step = apply_local_left(gate, cache.positions[idx], step, n_qubits)
    return step


def product_unitary(plan: TrotterPlan, trunc: TruncatedHamiltonian, t: float) -> np.ndarray:
    """Full product unitary: n repetitions of the Suzuki step."""
    if trunc.dim > 4096:
        raise CapacityError(f"dim {trunc.dim} exceeds capacity")
    step = product_step_matrix(plan, trunc, t)
    return np.linalg.matrix_power(step, plan.n)


def apply_product(plan: TrotterPlan, trunc: TruncatedHamiltonian, t: float, psi: np.ndarray) -> np.ndarray:
    """Apply the product unitary to a state without forming the dense matrix."""
    cache = _GateCache(trunc)
    n_qubits = trunc.n_qubits
    tau = t / plan.n
    gates = [
        [cache.gate(idx, stage.coefficient * tau) for idx in _stage_term_order(stage, len(trunc.terms))]
        for stage in plan.stages
    ]
    orders = [list(_stage_term_order(stage, len(trunc.terms))) for stage in plan.stages]
    out = psi.astype(complex)
    for _ in range(plan.n):
        for stage_gates, order in zip(gates, orders):
            for gate, idx in zip(stage_gates, order):
                out = apply_local_left(gate, cache.positions[idx], out, n_qubits)
    return out


@dataclass(frozen=True)
class NestedCommutatorResult:
    depth: int
    bound: float
    exact_norm: float | None


def nested_commutator_bound(trunc: TruncatedHamiltonian, depth: int) -> float:
    """Locality bound 2^p (Lambda_d 2^d R^d)^(p-1) [(p-1)!]^d |Theta_l| at p=depth."""
    c = trunc.parent.constants
    vol = c.lambda_d * 2.0**c.d * c.R**c.d
    return 2.0**depth * vol ** (depth - 1) * factorial(depth - 1) ** c.d * len(trunc.theta)


def nested_commutator(trunc: TruncatedHamiltonian, depth: int, exact: bool = True) -> NestedCommutatorResult:
    """Summed norms of depth-nested commutators, exact when the region is small.

    Exact mode accumulates sum over index tuples of
    ||[H_{g_depth},...,[H_{g2},H_{g1}]]||, pruning tuples whose next term has
    support disjoint from the partial commutator (those vanish identically).
    The norm sits inside the sum: the fully signed sum telescopes to zero by
    antisymmetry, so the triangle-inequality form is the meaningful oracle.
    """
    if depth < 1:
        raise TrotterError("depth must be >= 1")
    bound = nested_commutator_bound(trunc, depth)
    if not exact:
        return NestedCommutatorResult(depth=depth, bound=bound, exact_norm=None)
    if trunc.dim > EXACT_COMMUTATOR_DIM_CAP:
        raise CapacityError(
            f"exact nested commutators need dim <= {EXACT_COMMUTATOR_DIM_CAP}, got {trunc.dim}"
        )
    terms = trunc.terms
    total = 0.0

    def descend(current: np.ndarray, support, level: int):
        nonlocal total
        if level == depth:
            total += float(np.linalg.norm(current, 2))
            return
        for t in terms:
            if not t.support.intersects(support):
                continue
            union = support.union(t.support)
            a = embed_operator(t.matrix, t.support, union)
            b = embed_operator(current, support, union)
            comm = a @ b - b @ a
            if np.max(np.abs(comm)) < 1e-14:
                continue
            descend(comm, union, level + 1)

    for t in terms:
        descend(t.matrix.copy(), t.support, 1)
    return NestedCommutatorResult(depth=depth, bound=bound, exact_norm=total)


def trotter_error_constant(p: int, constants) -> float:
    """K = 2^p (Lambda_d 2^d R^d)^p [(p-1)!]^d / (p+1)!."""
    vol = constants.lambda_d * 2.0**constants.d * constants.R**constants.d
    return 2.0**p * vol**p * factorial(p - 1) ** constants.d / factorial(p + 1)


@dataclass(frozen=True)
class TrotterErrorReport:
    p: int
    n: int
    t: float
    bound_rhs: float
    exact_error: float | None
    commutator_sum: float | None
    commutator_bound: float | None


def trotter_error_report(
    plan: TrotterPlan,
    trunc: TruncatedHamiltonian,
    t: float,
    compute_exact: bool = True,
    compute_commutators: bool = True,
) -> TrotterErrorReport:
    """Exact Trotter error plus the commutator-sum and closed-form bounds."""
    c = trunc.parent.constants
    k_const = trotter_error_constant(plan.p, c)
    bound_rhs = k_const * len(trunc.theta) * t ** (plan.p + 1) / plan.n**plan.p
    exact_error = None
    if compute_exact and trunc.dim <= 4096:
        h = assemble_dense(trunc)
        exact = EigHermitian.of(h).propagator(t)
        approx = product_unitary(plan, trunc, t)
        exact_error = float(np.linalg.norm(exact - approx, 2))
    commutator_sum = commutator_bound = None
    if compute_commutators and trunc.dim <= EXACT_COMMUTATOR_DIM_CAP:
        res = nested_commutator(trunc, plan.p + 1, exact=True)
        commutator_sum = res.exact_norm
        commutator_bound = (
            res.exact_norm * t ** (plan.p + 1) / (plan.n**plan.p * factorial(plan.p + 1))
        )
    return TrotterErrorReport(
        p=plan.p,
        n=plan.n,
        t=t,
        bound_rhs=bound_rhs,
        exact_error=exact_error,
        commutator_sum=commutator_sum,
        commutator_bound=commutator_bound,
    )
