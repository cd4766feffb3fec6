"""Dense complex linear algebra: Hermitian propagators, norms, trace distance.

Everything is exact dense numerics at dimension <= 4096; propagators come
from one eigendecomposition that can be reused across evolution times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-12
UNITARITY_TOL = 1e-10
TRACE_TOL = 1e-10
DIM_CAP = 4096


class LinalgError(ValueError):
    """Domain error for linear-algebra operations."""


def operator_norm(a: np.ndarray) -> float:
    """Largest singular value (operator / spectral norm)."""
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise LinalgError("matrix has non-finite entries")
    if a.shape[0] == a.shape[1] and hermiticity_defect(a) <= 1e-12 * max(1.0, _scale(a)):
        return float(np.max(np.abs(np.linalg.eigvalsh(a)))) if a.size else 0.0
    return float(np.linalg.norm(a, 2))


def _scale(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def check_hermitian(h: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Validate Hermiticity within tol and return the symmetrized matrix."""
    h = np.asarray(h, dtype=complex)
    defect = hermiticity_defect(h)
    if defect > tol * max(1.0, _scale(h)):
        raise LinalgError(f"matrix not Hermitian: defect {defect:.3e}")
    return (h + h.conj().T) / 2.0


@dataclass(frozen=True)
class EigHermitian:
    """Cached eigendecomposition of a Hermitian matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def of(cls, h: np.ndarray, tol: float = HERMITICITY_TOL) -> "EigHermitian":
        h = check_hermitian(h, tol)
        if h.shape[0] > DIM_CAP:
            raise LinalgError(f"dimension {h.shape[0]} exceeds cap {DIM_CAP}")
        w, v = np.linalg.eigh(h)
        return cls(eigenvalues=w, eigenvectors=v)

    def propagator(self, s: float) -> np.ndarray:
        """exp(-i*s*H) from the stored decomposition."""
        phases = np.exp(-1j * s * self.eigenvalues)
        return (self.eigenvectors * phases) @ self.eigenvectors.conj().T

    def apply_propagator(self, s: float, psi: np.ndarray) -> np.ndarray:
        phases = np.exp(-1j * s * self.eigenvalues)
        return self.eigenvectors @ (phases * (self.eigenvectors.conj().T @ psi))

    def reconstruction_defect(self, h: np.ndarray) -> float:
        rebuilt = (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T
        return float(np.linalg.norm(rebuilt - h, 2))


def expm_i_hermitian(h: np.ndarray, s: float) -> np.ndarray:
    """exp(-i*s*H) for Hermitian H via eigendecomposition."""
    return EigHermitian.of(h).propagator(s)


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), 2))


def check_unitary(u: np.ndarray, tol: float = 1e-9) -> None:
    defect = unitarity_defect(u)
    if defect > tol:
        raise LinalgError(f"matrix not unitary: defect {defect:.3e}")


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values; for Hermitian input the sum of |eigenvalues|."""
    a = np.asarray(a)
    if hermiticity_defect(a) <= 1e-10 * max(1.0, _scale(a)):
        return float(np.sum(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def trace_distance(rho: np.ndarray, sigma: np.ndarray, psd_tol: float = 1e-8) -> float:
    """Trace-norm distance ||rho - sigma||_1 between density matrices."""
    for name, m in (("rho", rho), ("sigma", sigma)):
        m = np.asarray(m)
        if hermiticity_defect(m) > 1e-10 * max(1.0, _scale(m)):
            raise LinalgError(f"{name} is not Hermitian")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL:
            raise LinalgError(f"{name} has trace {tr}, not 1 within {TRACE_TOL}")
        if float(np.min(np.linalg.eigvalsh((m + m.conj().T) / 2))) < -psd_tol:
            raise LinalgError(f"{name} is not positive semidefinite within {psd_tol}")
    return trace_norm(np.asarray(rho) - np.asarray(sigma))


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state vector."""
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def apply_local_left(gate: np.ndarray, positions: list[int], mat: np.ndarray, n_qubits: int) -> np.ndarray:
    """Left-multiply by a k-qubit gate embedded at `positions` of an n-qubit row index.

    `mat` may be a state vector (dim,) or a matrix (dim, cols); qubit 0 is the
    most significant factor of the row index.
    """
    k = len(positions)
    dim = 1 << n_qubits
    vec = mat.ndim == 1
    work = mat.reshape((2,) * n_qubits + (-1,))
    work = np.moveaxis(work, positions, range(k))
    moved_shape = work.shape
    work = gate @ work.reshape(1 << k, -1)
    work = work.reshape((2,) * k + moved_shape[k:])
    work = np.moveaxis(work, range(k), positions)
    out = work.reshape(dim, -1)
    return out[:, 0] if vec else out
