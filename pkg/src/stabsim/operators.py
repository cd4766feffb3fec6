"""Local Hamiltonian terms, observables, dense embedding, and random perturbations.

Tensor convention: region sites are ordered lexicographically and site k of a
region occupies bit (n_sites-1-k) of the basis index, i.e. the first site is
the most significant factor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    LatticeSpec,
    LocalityConstants,
    Region,
    Site,
    ball,
    omega_region,
)
from .linalg import apply_local_left, check_hermitian, operator_norm

DIM_CAP = 4096  # 12 qubits; keeps every operation dense and exact

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class CapacityError(ValueError):
    """Raised when a dense operation would exceed the 4096-dimension cap."""


class OperatorError(ValueError):
    """Domain error for operator construction."""


def pauli_string(letters: str) -> np.ndarray:
    """Kronecker product of single-site Paulis, first letter most significant."""
    out = np.array([[1.0 + 0j]])
    for ch in letters:
        if ch not in PAULI:
            raise OperatorError(f"unknown Pauli letter {ch!r}")
        out = np.kron(out, PAULI[ch])
    return out


def as_rng(seed) -> np.random.Generator:
    """Accept a Generator, an int, or a tuple of ints (a seed-stream position)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (int, np.integer)):
        return np.random.default_rng(int(seed))
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in seed]))


@dataclass(frozen=True)
class LocalTerm:
    """One geometrically local Hermitian term, normalized to spectral norm <= 1."""

    anchor: Site
    support: Region
    matrix: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(int(c) for c in self.anchor))
        mat = check_hermitian(self.matrix, 1e-12)
        if mat.shape != (2 ** len(self.support),) * 2:
            raise OperatorError("matrix dimension does not match support size")
        if operator_norm(mat) > 1.0 + 1e-9:
            raise OperatorError("term norm exceeds 1; normalize the model couplings")
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True)
class Observable:
    """Hermitian observable with cached spectral norm."""

    support: Region
    matrix: np.ndarray
    norm: float = field(init=False)

    def __post_init__(self):
        mat = check_hermitian(self.matrix, 1e-12)
        if mat.shape != (2 ** len(self.support),) * 2:
            raise OperatorError("matrix dimension does not match support size")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "norm", operator_norm(mat))


@dataclass(frozen=True)
class LocalHamiltonian:
    """Sum of local terms with at most one term anchored per lattice site."""

    lattice: LatticeSpec
    terms: tuple[LocalTerm, ...]
    constants: LocalityConstants

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        anchors = [t.anchor for t in self.terms]
        if len(set(anchors)) != len(anchors):
            raise OperatorError("at most one term per anchor site")
        R = int(self.constants.R)
        for t in self.terms:
            if not self.lattice.contains(t.anchor):
                raise OperatorError(f"anchor {t.anchor} outside lattice")
            if not t.support.issubset(ball(t.anchor, R, self.lattice)):
                raise OperatorError(f"support of term at {t.anchor} reaches beyond radius {R}")


@dataclass(frozen=True)
class TruncatedHamiltonian:
    """Terms overlapping Omega_l, together with the dense embedding region."""

    parent: LocalHamiltonian
    l: int
    theta: tuple[int, ...]
    omega: Region
    region: Region

    @property
    def dim(self) -> int:
        return 2 ** len(self.region)

    @property
    def terms(self) -> tuple[LocalTerm, ...]:
        return tuple(self.parent.terms[i] for i in self.theta)

    @property
    def n_qubits(self) -> int:
        return len(self.region)


def observable_radius(support: Region) -> int:
    """Smallest R_O with support contained in some l1 ball of that radius."""
    if len(support) == 1:
        return 0
    lo = [min(s[i] for s in support.sites) for i in range(len(support.sites[0]))]
    hi = [max(s[i] for s in support.sites) for i in range(len(support.sites[0]))]
    import itertools as _it

    best = None
    for center in _it.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
        r = max(sum(abs(c - x) for c, x in zip(center, s)) for s in support.sites)
        best = r if best is None else min(best, r)
    return int(best)


def truncate(ham: LocalHamiltonian, obs: Observable, l: int) -> TruncatedHamiltonian:
    """Keep the terms whose support overlaps Omega_l around the observable."""
    omega = omega_region(obs.support, l, ham.lattice)
    theta = tuple(i for i, t in enumerate(ham.terms) if t.support.intersects(omega))
    region = obs.support
    for i in theta:
        region = region.union(ham.terms[i].support)
    dim = 2 ** len(region)
    if dim > DIM_CAP:
        need = len(region) - int(math.log2(DIM_CAP))
        raise CapacityError(
            f"truncation region has {len(region)} sites (dim {dim} > {DIM_CAP}); "
            f"reduce l by enough to drop ~{need} sites"
        )
    # enforce the discrete form of the anchor-counting argument: anchors live
    # within distance R + l of Omega_l (the continuum Lambda_d formula can
    # undercount discrete balls in d >= 2, so it stays in the bound evaluators)
    anchor_zone = omega_region(omega, int(math.ceil(ham.constants.R)), ham.lattice)
    if any(ham.terms[i].anchor not in anchor_zone for i in theta):
        raise OperatorError("a retained term is anchored outside its locality zone")
    return TruncatedHamiltonian(parent=ham, l=l, theta=theta, omega=omega, region=region)


def site_positions(sub: Region, full: Region) -> list[int]:
    """Indices of sub's sites within full's lexicographic ordering."""
    index = {s: i for i, s in enumerate(full.sites)}
    try:
        return [index[s] for s in sub.sites]
    except KeyError as err:
        raise OperatorError(f"site {err.args[0]} not contained in target region") from None


def embed_operator(op: np.ndarray, sub: Region, full: Region) -> np.ndarray:
    """Pad `op` (acting on sub) with identities onto the full region."""
    n = len(full)
    if 2**n > DIM_CAP:
        raise CapacityError(f"embedding target dim {2**n} exceeds {DIM_CAP}")
    positions = site_positions(sub, full)
    return apply_local_left(op, positions, np.eye(2**n, dtype=complex), n)


def assemble_dense(trunc: TruncatedHamiltonian) -> np.ndarray:
    """Dense Hermitian sum of the retained terms on the truncation region."""
    dim = trunc.dim
    if dim > DIM_CAP:
        raise CapacityError(f"dim {dim} exceeds {DIM_CAP}")
    h = np.zeros((dim, dim), dtype=complex)
    for t in trunc.terms:
        h += embed_operator(t.matrix, t.support, trunc.region)
    return (h + h.conj().T) / 2.0


@dataclass(frozen=True)
class PerturbationEnsemble:
    """Mean-zero Hermitian perturbation ensemble with ||L|| <= 1.

    gue_normalized: GUE draw divided by its own spectral norm (||L|| = 1).
    pauli_rademacher: uniform non-identity Pauli string times a random sign.
    Both are symmetric under L -> -L, hence mean zero.
    """

    kind: str = "gue_normalized"

    def __post_init__(self):
        if self.kind not in ("gue_normalized", "pauli_rademacher"):
            raise OperatorError(f"unknown ensemble kind {self.kind!r}")

    def sample(self, n_sites: int, seed) -> np.ndarray:
        return self.sample_batch(n_sites, 1, seed)[0]

    def sample_batch(self, n_sites: int, count: int, seed) -> np.ndarray:
        """Vectorized draws, shape (count, 2^n_sites, 2^n_sites)."""
        rng = as_rng(seed)
        dim = 2**n_sites
        if self.kind == "gue_normalized":
            g = rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))
            h = (g + np.conj(np.swapaxes(g, -1, -2))) / 2.0
            norms = np.max(np.abs(np.linalg.eigvalsh(h)), axis=-1)
            return h / norms[:, None, None]
        # pauli_rademacher
        strings = rng.integers(1, 4**n_sites, size=count)
        signs = rng.choice([-1.0, 1.0], size=count)
        out = np.empty((count, dim, dim), dtype=complex)
        for i, (code, sign) in enumerate(zip(strings, signs)):
            letters = ""
            c = int(code)
            for _ in range(n_sites):
                letters = "IXYZ"[c % 4] + letters
                c //= 4
            out[i] = sign * pauli_string(letters)
        return out


def sample_perturbation(ensemble: PerturbationEnsemble, support: Region, seed) -> np.ndarray:
    """One Hermitian draw on `support`; deterministic given the seed position."""
    return ensemble.sample(len(support), seed)


# ---------------------------------------------------------------------------
# Built-in model library
# ---------------------------------------------------------------------------


def _normalized_term(anchor: Site, support: Region, raw: np.ndarray, meta: dict) -> LocalTerm:
    norm = operator_norm(raw)
    if norm <= 0:
        raise OperatorError(f"term at {anchor} is zero")
    meta = dict(meta, raw_norm=norm)
    return LocalTerm(anchor=anchor, support=support, matrix=raw / norm, metadata=meta)


def _axis_neighbors(site: Site, lattice: LatticeSpec) -> list[Site]:
    out = []
    for ax in range(lattice.d):
        nb = tuple(c + (1 if i == ax else 0) for i, c in enumerate(site))
        if lattice.contains(nb):
            out.append(nb)
    return out


def transverse_field_ising(
    lattice: LatticeSpec, coupling: float = 1.0, field_strength: float = 1.0
) -> LocalHamiltonian:
    """TFIM with +x bonds grouped per anchor: J*Z_x Z_{x+e} + g*X_x, normalized."""
    constants = LocalityConstants(d=lattice.d, R=1.0)
    terms = []
    for site in lattice.sites():
        neighbors = _axis_neighbors(site, lattice)
        support = Region((site,) + tuple(neighbors))
        k = len(support)
        raw = np.zeros((2**k, 2**k), dtype=complex)
        pos_self = site_positions(Region((site,)), support)[0]
        raw += field_strength * _one_site_string(k, pos_self, "X")
        for nb in neighbors:
            pos_nb = site_positions(Region((nb,)), support)[0]
            raw += coupling * _two_site_string(k, pos_self, pos_nb, "Z", "Z")
        if operator_norm(raw) == 0:
            continue
        terms.append(
            _normalized_term(site, support, raw, {"model": "tfim", "J": coupling, "g": field_strength})
        )
    return LocalHamiltonian(lattice=lattice, terms=tuple(terms), constants=constants)


def heisenberg(
    lattice: LatticeSpec,
    jx: float = 1.0,
    jy: float = 1.0,
    jz: float = 1.0,
    field_strength: float = 0.0,
) -> LocalHamiltonian:
    """XYZ chain/lattice with +x bonds grouped per anchor plus optional Z field."""
    constants = LocalityConstants(d=lattice.d, R=1.0)
    terms = []
    coups = {"X": jx, "Y": jy, "Z": jz}
    for site in lattice.sites():
        neighbors = _axis_neighbors(site, lattice)
        support = Region((site,) + tuple(neighbors))
        k = len(support)
        raw = np.zeros((2**k, 2**k), dtype=complex)
        pos_self = site_positions(Region((site,)), support)[0]
        if field_strength:
            raw += field_strength * _one_site_string(k, pos_self, "Z")
        for nb in neighbors:
            pos_nb = site_positions(Region((nb,)), support)[0]
            for letter, j in coups.items():
                if j:
                    raw += j * _two_site_string(k, pos_self, pos_nb, letter, letter)
        if operator_norm(raw) == 0:
            continue
        terms.append(
            _normalized_term(site, support, raw, {"model": "heisenberg", "j": (jx, jy, jz), "h": field_strength})
        )
    return LocalHamiltonian(lattice=lattice, terms=tuple(terms), constants=constants)


def _one_site_string(n: int, pos: int, letter: str) -> np.ndarray:
    letters = ["I"] * n
    letters[pos] = letter
    return pauli_string("".join(letters))


def _two_site_string(n: int, p1: int, p2: int, l1: str, l2: str) -> np.ndarray:
    letters = ["I"] * n
    letters[p1] = l1
    letters[p2] = l2
    return pauli_string("".join(letters))


def single_site_observable(site: Site, pauli: str, lattice: LatticeSpec) -> Observable:
    if not lattice.contains(tuple(site)):
        raise OperatorError(f"observable site {site} outside lattice")
    return Observable(support=Region((tuple(site),)), matrix=PAULI[pauli].copy())


# ---------------------------------------------------------------------------
# Model definition files
# ---------------------------------------------------------------------------


def model_from_dict(spec: dict) -> LocalHamiltonian:
    """Build a Hamiltonian from the JSON model document.

    Schema: {model: tfim|heisenberg|custom, d, extent, origin?, couplings, field}
    with custom terms given as Pauli-string/weight lists.
    """
    known = {"model", "d", "extent", "origin", "couplings", "field", "terms"}
    unknown = set(spec) - known
    if unknown:
        raise OperatorError(f"unknown model keys: {sorted(unknown)}")
    lattice = LatticeSpec(
        d=int(spec["d"]),
        extent=tuple(spec["extent"]),
        origin=tuple(spec["origin"]) if spec.get("origin") is not None else None,
    )
    kind = spec.get("model", "tfim")
    if kind == "tfim":
        return transverse_field_ising(
            lattice, coupling=float(spec.get("couplings", 1.0)), field_strength=float(spec.get("field", 1.0))
        )
    if kind == "heisenberg":
        coup = spec.get("couplings", [1.0, 1.0, 1.0])
        if isinstance(coup, (int, float)):
            coup = [coup, coup, coup]
        return heisenberg(
            lattice, jx=float(coup[0]), jy=float(coup[1]), jz=float(coup[2]),
            field_strength=float(spec.get("field", 0.0)),
        )
    if kind == "custom":
        constants = LocalityConstants(d=lattice.d, R=_custom_radius(spec["terms"]))
        terms = []
        for tspec in spec["terms"]:
            anchor = tuple(tspec["anchor"])
            support = Region(tuple(tuple(s) for s in tspec["support"]))
            k = len(support)
            raw = np.zeros((2**k, 2**k), dtype=complex)
            for entry in tspec["strings"]:
                raw += float(entry["weight"]) * pauli_string(entry["pauli"])
            terms.append(_normalized_term(anchor, support, raw, {"model": "custom"}))
        return LocalHamiltonian(lattice=lattice, terms=tuple(terms), constants=constants)
    raise OperatorError(f"unknown model kind {kind!r}")


def _custom_radius(term_specs) -> float:
    r = 1
    for tspec in term_specs:
        anchor = tuple(tspec["anchor"])
        for s in tspec["support"]:
            r = max(r, sum(abs(a - b) for a, b in zip(anchor, s)))
    return float(r)


def model_from_json(path: str) -> LocalHamiltonian:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def observable_from_dict(spec: dict, lattice: LatticeSpec) -> Observable:
    if "site" in spec:
        return single_site_observable(tuple(spec["site"]), spec.get("pauli", "Z"), lattice)
    support = Region(tuple(tuple(s) for s in spec["support"]))
    k = len(support)
    mat = np.zeros((2**k, 2**k), dtype=complex)
    for entry in spec["strings"]:
        mat += float(entry["weight"]) * pauli_string(entry["pauli"])
    return Observable(support=support, matrix=mat)
