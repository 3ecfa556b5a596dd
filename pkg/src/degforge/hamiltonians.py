"""Finite-range local Hamiltonians as indexed term collections.

Builders produce frustration-free parent models for the W and Dicke states
(local kernel projectors expanded into exact Pauli sums at build time) and
two control models (a diagonal ferromagnet with a two-fold degenerate
ground space, and a transverse-field chain with a unique one).  Exact
ground-space extraction runs dense up to 12 sites and via restarted Krylov
(ARPACK) above.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ContractError, InputError, NumericError
from .pauli import (
    DENSE_CUTOFF,
    OperatorSum,
    PauliString,
    _SINGLE_SITE,
    parse_operator,
)
from .states import StateVector, apply, make_dicke

# Hard budget for the iterative eigensolver; non-convergence raises instead
# of silently returning inaccurate values.
ITERATION_CAP = 2000

DEFAULT_DEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class HamTerm:
    """One finite-range term: an OperatorSum pinned to a contiguous window."""

    index: int
    op: OperatorSum
    sites: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.sites:
            raise InputError("term window must contain at least one site")
        if not set(self.op.support) <= set(self.sites):
            raise InputError(
                f"term {self.index}: operator support {self.op.support} "
                f"leaves window {self.sites}"
            )
        if not self.op.is_hermitian():
            raise InputError(f"term {self.index}: operator is not Hermitian")

    @property
    def range(self) -> int:
        return len(self.sites)


@dataclass
class LocalHamiltonian:
    """H = sum of finite-range terms on an open or periodic chain."""

    n_sites: int
    terms: List[HamTerm]
    boundary: str = "open"
    range_cap: int | None = None
    _total: OperatorSum | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.boundary not in ("open", "periodic"):
            raise InputError(f"boundary must be open or periodic, got {self.boundary!r}")
        for term in self.terms:
            if term.op.n_sites != self.n_sites:
                raise InputError("term operator size does not match Hamiltonian")
            if self.range_cap is not None and term.range > self.range_cap:
                raise InputError(
                    f"term {term.index} range {term.range} exceeds cap {self.range_cap}"
                )

    def validate(self) -> None:
        """Model-level checks: Hermitian total, every site covered."""
        covered = set()
        for term in self.terms:
            covered.update(term.sites)
        missing = set(range(self.n_sites)) - covered
        if missing:
            raise InputError(f"sites {sorted(missing)} not covered by any term")
        if not self.total().is_hermitian():
            raise InputError("total Hamiltonian is not Hermitian")

    def total(self) -> OperatorSum:
        if self._total is None:
            acc = OperatorSum.zero(self.n_sites)
            for term in self.terms:
                acc = acc + term.op
            self._total = acc
        return self._total

    def dense(self) -> np.ndarray:
        return self.total().dense()

    def apply(self, psi: StateVector) -> StateVector:
        return apply(self.total(), psi)


# -- window-matrix helpers ------------------------------------------------------


def _kron_chain(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product with element 0 of mats acting on the local
    least-significant bit."""
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(m, out)
    return out


def operator_from_window_matrix(
    n_sites: int, sites: Sequence[int], matrix: np.ndarray
) -> OperatorSum:
    """Expand a dense window matrix into an exact Pauli sum on n_sites.

    Local bit t of the window corresponds to global site sites[t].
    """
    w = len(sites)
    dim = 1 << w
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (dim, dim):
        raise InputError(
            f"window matrix must be {dim}x{dim} for {w} sites, got {matrix.shape}"
        )
    terms: Dict[PauliString, complex] = {}
    for letters in itertools.product("IXYZ", repeat=w):
        local = _kron_chain([_SINGLE_SITE[c] for c in letters])
        coeff = complex(np.trace(local.conj().T @ matrix)) / dim
        if coeff != 0:
            mapping = {sites[t]: letters[t] for t in range(w) if letters[t] != "I"}
            terms[PauliString.from_letters(n_sites, mapping)] = coeff
    return OperatorSum(n_sites, terms)


def window_matrix(op: OperatorSum, sites: Sequence[int]) -> np.ndarray:
    """Dense matrix of op restricted to the given window (op.support must
    lie inside the window)."""
    if not set(op.support) <= set(sites):
        raise InputError(f"operator support {op.support} leaves window {tuple(sites)}")
    site_pos = {s: t for t, s in enumerate(sites)}
    dim = 1 << len(sites)
    out = np.zeros((dim, dim), dtype=complex)
    for word, coeff in op.terms():
        mats = [np.eye(2, dtype=complex)] * len(sites)
        for s in word.support:
            mats[site_pos[s]] = _SINGLE_SITE[word.letter(s)]
        out += coeff * _kron_chain(mats)
    return out


def _bond_windows(n_sites: int, width: int, boundary: str) -> List[Tuple[int, ...]]:
    windows = [tuple(range(j, j + width)) for j in range(n_sites - width + 1)]
    if boundary == "periodic":
        for j in range(n_sites - width + 1, n_sites):
            windows.append(tuple((j + t) % n_sites for t in range(width)))
    return windows


# -- model builders -------------------------------------------------------------


def build_w_parent_ff(n_sites: int, boundary: str = "open") -> LocalHamiltonian:
    """Nearest-neighbor parent model whose kernel is span{W, |0...0>}.

    Each bond term projects onto span{|11>, (|01> - |10>)/sqrt(2)}: the
    orthogonal complement of the two-site reduced support of the W state.
    Every term annihilates both W and the all-zeros state.
    """
    if n_sites < 3:
        raise InputError(f"W parent model needs at least 3 sites, got {n_sites}")
    dim = 4
    proj = np.zeros((dim, dim), dtype=complex)
    proj[3, 3] = 1.0
    anti = np.zeros(dim, dtype=complex)
    anti[1] = 1.0 / math.sqrt(2.0)
    anti[2] = -1.0 / math.sqrt(2.0)
    proj += np.outer(anti, anti.conj())
    terms = []
    for window in _bond_windows(n_sites, 2, boundary):
        op = operator_from_window_matrix(n_sites, window, proj)
        terms.append(HamTerm(index=window[0], op=op, sites=window))
    ham = LocalHamiltonian(n_sites, terms, boundary, range_cap=2)
    ham.validate()
    return ham


def build_dicke_parent_ff(
    n_sites: int, k: int, boundary: str = "open"
) -> LocalHamiltonian:
    """(k+1)-local parent model annihilating the reduced support of the
    weight-k Dicke state; its kernel contains every Dicke state of weight
    at most k."""
    if k < 1:
        raise InputError(f"excitation count must be at least 1, got {k}")
    if n_sites < k + 2:
        raise InputError(
            f"Dicke parent model needs at least k+2 = {k + 2} sites, got {n_sites}"
        )
    width = k + 1
    dim = 1 << width
    proj = np.eye(dim, dtype=complex)
    for m in range(k + 1):
        vec = make_dicke(width, m).amplitudes
        proj -= np.outer(vec, vec.conj())
    terms = []
    for window in _bond_windows(n_sites, width, boundary):
        op = operator_from_window_matrix(n_sites, window, proj)
        terms.append(HamTerm(index=window[0], op=op, sites=window))
    ham = LocalHamiltonian(n_sites, terms, boundary, range_cap=width)
    ham.validate()
    return ham


def build_control_models(
    name: str, n_sites: int, params: Mapping[str, float] | None = None
) -> LocalHamiltonian:
    """Negative/positive control models.

    ghz_ferro: -sum Z_j Z_{j+1}        (two-fold degenerate ground space)
    tfim:      -sum Z_j Z_{j+1} - g sum X_j   (unique ground state at g=2)
    """
    params = dict(params or {})
    if n_sites < 2:
        raise InputError(f"control models need at least 2 sites, got {n_sites}")
    boundary = str(params.pop("boundary", "open"))
    if name == "ghz_ferro":
        if params:
            raise InputError(f"unknown parameters for ghz_ferro: {sorted(params)}")
        terms = []
        for window in _bond_windows(n_sites, 2, boundary):
            op = OperatorSum.from_word(
                PauliString.from_letters(n_sites, {window[0]: "Z", window[1]: "Z"}),
                -1.0,
            )
            terms.append(HamTerm(index=window[0], op=op, sites=window))
        ham = LocalHamiltonian(n_sites, terms, boundary, range_cap=2)
    elif name == "tfim":
        g = float(params.pop("g", 2.0))
        if params:
            raise InputError(f"unknown parameters for tfim: {sorted(params)}")
        terms = []
        for window in _bond_windows(n_sites, 2, boundary):
            op = OperatorSum.from_word(
                PauliString.from_letters(n_sites, {window[0]: "Z", window[1]: "Z"}),
                -1.0,
            )
            terms.append(HamTerm(index=window[0], op=op, sites=window))
        for j in range(n_sites):
            op = OperatorSum.from_word(
                PauliString.from_letters(n_sites, {j: "X"}), -g
            )
            terms.append(HamTerm(index=j, op=op, sites=(j,)))
        ham = LocalHamiltonian(n_sites, terms, boundary, range_cap=2)
    else:
        raise InputError(f"unknown control model {name!r}")
    ham.validate()
    return ham


# -- term-wise eigenstate check -----------------------------------------------------


@dataclass(frozen=True)
class TermEigenReport:
    """Per-term eigenvalue/residual data for a candidate state."""

    energies: np.ndarray          # e_j = <psi|h_j|psi>
    residuals: np.ndarray         # r_j = |h_j psi - e_j psi|
    term_minima: np.ndarray       # min eigenvalue of each h_j on its window
    tol: float

    @property
    def is_termwise_eigenstate(self) -> bool:
        return bool(self.residuals.max(initial=0.0) <= self.tol)

    @property
    def is_frustration_free_ground_state(self) -> bool:
        if not self.is_termwise_eigenstate:
            return False
        return bool(np.all(np.abs(self.energies - self.term_minima) <= self.tol))

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max(initial=0.0))

    def non_eigen_terms(self) -> List[int]:
        return [int(j) for j in np.nonzero(self.residuals > self.tol)[0]]


def term_eigen_check(
    ham: LocalHamiltonian, psi: StateVector, tol: float = 1e-10
) -> TermEigenReport:
    """Rayleigh quotients and residuals of every term on psi.

    Verdicts, not failures: a state that is no eigenstate simply gets
    nonzero residuals.
    """
    if not psi.is_normalized:
        raise ContractError("term_eigen_check requires a normalized state")
    energies = np.empty(len(ham.terms))
    residuals = np.empty(len(ham.terms))
    minima = np.empty(len(ham.terms))
    for pos, term in enumerate(ham.terms):
        image = apply(term.op, psi)
        e = psi.inner(image)
        if abs(e.imag) >= 1e-10:
            raise NumericError(
                f"term {term.index}: imaginary Rayleigh quotient {e.imag!r}"
            )
        energies[pos] = e.real
        residuals[pos] = (image - psi * e.real).norm()
        minima[pos] = scipy.linalg.eigvalsh(window_matrix(term.op, term.sites))[0]
    return TermEigenReport(energies, residuals, minima, tol)


# -- exact ground-space extraction ---------------------------------------------------


@dataclass(frozen=True)
class GroundSpace:
    """Lowest eigenvalue cluster of a LocalHamiltonian."""

    energies: np.ndarray          # all computed eigenvalues, ascending
    basis: Tuple[StateVector, ...]
    ground_energy: float
    degeneracy: int
    gap: float
    method: str

    def projector_deficiency(self, psi: StateVector) -> float:
        """1 - |P psi|^2 for the projector P onto the computed basis."""
        total = 0.0
        for b in self.basis:
            total += abs(b.inner(psi)) ** 2
        return 1.0 - total / psi.norm() ** 2


def _cluster_from(evals: np.ndarray, vecs: np.ndarray, n_sites: int,
                  degeneracy_tol: float, method: str) -> GroundSpace | None:
    """Extract the lowest cluster; None if it may extend past the computed set."""
    ground = float(evals[0])
    inside = evals <= ground + degeneracy_tol
    degeneracy = int(np.count_nonzero(inside))
    if degeneracy == len(evals) and len(evals) < (1 << n_sites):
        return None
    block = vecs[:, :degeneracy]
    # eigh/eigsh already return orthonormal vectors; QR guards the
    # degenerate block against any residual mixing.
    block, _ = np.linalg.qr(block)
    basis = tuple(StateVector(n_sites, block[:, c]) for c in range(degeneracy))
    if degeneracy < len(evals):
        gap = float(evals[degeneracy] - evals[degeneracy - 1])
    else:
        gap = math.inf
    return GroundSpace(
        energies=np.array(evals, dtype=float),
        basis=basis,
        ground_energy=ground,
        degeneracy=degeneracy,
        gap=gap,
        method=method,
    )


def _ground_space_dense(
    ham: LocalHamiltonian, degeneracy_tol: float, k_lowest: int
) -> GroundSpace:
    mat = ham.dense()
    if np.abs(mat.imag).max(initial=0.0) == 0.0:
        mat = np.ascontiguousarray(mat.real)
    dim = mat.shape[0]
    k = min(dim, max(k_lowest, 16))
    while True:
        if k >= dim:
            evals, vecs = scipy.linalg.eigh(mat)
        else:
            evals, vecs = scipy.linalg.eigh(
                mat, subset_by_index=(0, k - 1), driver="evr"
            )
        space = _cluster_from(evals, vecs, ham.n_sites, degeneracy_tol, "dense")
        if space is not None:
            return space
        k = min(dim, 2 * k + 4)


def _ground_space_iterative(
    ham: LocalHamiltonian, degeneracy_tol: float, k_lowest: int
) -> GroundSpace:
    dim = 1 << ham.n_sites
    total = ham.total()

    def matvec(vec: np.ndarray) -> np.ndarray:
        return apply(total, StateVector(ham.n_sites, vec)).amplitudes

    op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=matvec, dtype=complex)
    # Fixed-seed generic start vector: deterministic, and unlike structured
    # vectors it overlaps every eigenvector, so degenerate copies are found.
    v0 = np.random.default_rng(20240917).standard_normal(dim)
    v0 /= np.linalg.norm(v0)
    k = max(k_lowest, 6)
    while True:
        if k >= dim - 1:
            raise NumericError(
                "iterative cluster search exhausted the spectrum; "
                "use the dense solver"
            )
        ncv = min(dim - 1, max(2 * k + 1, 40))
        try:
            evals, vecs = scipy.sparse.linalg.eigsh(
                op, k=k, which="SA", v0=v0, ncv=ncv, maxiter=ITERATION_CAP, tol=0
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            converged = getattr(exc, "eigenvalues", np.array([]))
            raise NumericError(
                f"Krylov eigensolver did not converge within {ITERATION_CAP} "
                f"iterations (k={k}, ncv={ncv}); "
                f"{len(converged)} eigenvalues converged: {converged!r}"
            ) from exc
        order = np.argsort(evals)
        evals = evals[order]
        vecs = vecs[:, order]
        space = _cluster_from(evals, vecs, ham.n_sites, degeneracy_tol, "iterative")
        if space is not None:
            return space
        if k >= 64:
            raise NumericError(
                f"lowest cluster exceeds {k} states within tol {degeneracy_tol}; "
                "refusing to continue iteratively"
            )
        k = min(dim - 2, 2 * k + 4)


def ground_space(
    ham: LocalHamiltonian,
    degeneracy_tol: float = DEFAULT_DEGENERACY_TOL,
    k_lowest: int = 4,
    method: str = "auto",
) -> GroundSpace:
    """Lowest eigenvalues, an orthonormal basis of the bottom cluster, and
    the gap above it.

    Dense solver up to 12 sites, restarted Krylov (ARPACK, full
    re-orthogonalization, deterministic start vector) above; method can be
    forced with 'dense' or 'iterative'.
    """
    if method not in ("auto", "dense", "iterative"):
        raise InputError(f"unknown method {method!r}")
    if k_lowest < 1:
        raise InputError("k_lowest must be positive")
    if method == "auto":
        method = "dense" if ham.n_sites <= DENSE_CUTOFF else "iterative"
    if method == "dense":
        if ham.n_sites > DENSE_CUTOFF:
            raise InputError(
                f"dense solver capped at {DENSE_CUTOFF} sites, got {ham.n_sites}"
            )
        return _ground_space_dense(ham, degeneracy_tol, k_lowest)
    return _ground_space_iterative(ham, degeneracy_tol, k_lowest)


# -- model config files ---------------------------------------------------------------

_MODEL_BUILDERS = ("w_parent", "dicke_parent", "ghz_ferro", "tfim")


def build_model(
    name: str,
    n_sites: int,
    boundary: str = "open",
    params: Mapping[str, float] | None = None,
) -> LocalHamiltonian:
    """Uniform entry point over all named model builders."""
    params = dict(params or {})
    if name == "w_parent":
        if params:
            raise InputError(f"unknown parameters for w_parent: {sorted(params)}")
        return build_w_parent_ff(n_sites, boundary)
    if name == "dicke_parent":
        k = params.pop("k", None)
        if k is None:
            raise InputError("dicke_parent requires parameter k")
        if params:
            raise InputError(f"unknown parameters for dicke_parent: {sorted(params)}")
        return build_dicke_parent_ff(n_sites, int(k), boundary)
    if name in ("ghz_ferro", "tfim"):
        params["boundary"] = boundary
        return build_control_models(name, n_sites, params)
    raise InputError(f"unknown model {name!r}; expected one of {_MODEL_BUILDERS}")


def model_from_config(config: Mapping[str, object]) -> LocalHamiltonian:
    """Build from a parsed config mapping; unknown keys are rejected."""
    allowed = {"model", "n_sites", "boundary", "params", "terms"}
    unknown = set(config) - allowed
    if unknown:
        raise InputError(f"unknown config key {sorted(unknown)[0]!r}")
    if "n_sites" not in config:
        raise InputError("config key 'n_sites' is required")
    n_sites = int(config["n_sites"])  # type: ignore[arg-type]
    boundary = str(config.get("boundary", "open"))
    if "terms" in config:
        if "model" in config or "params" in config:
            raise InputError("config must give either 'model' or 'terms', not both")
        term_texts = config["terms"]
        if not isinstance(term_texts, list) or not term_texts:
            raise InputError("config key 'terms' must be a non-empty list")
        terms = []
        for line in term_texts:
            op = parse_operator(str(line), n_sites)
            if op.is_zero():
                raise InputError(f"term {line!r} parsed to the zero operator")
            lo, hi = min(op.support), max(op.support)
            terms.append(HamTerm(index=lo, op=op, sites=tuple(range(lo, hi + 1))))
        ham = LocalHamiltonian(
            n_sites, terms, boundary, range_cap=max(t.range for t in terms)
        )
        ham.validate()
        return ham
    if "model" not in config:
        raise InputError("config needs either 'model' or 'terms'")
    params = config.get("params", {})
    if not isinstance(params, dict):
        raise InputError("config key 'params' must be a mapping")
    return build_model(str(config["model"]), n_sites, boundary, params)


def load_model_file(path: str | Path) -> LocalHamiltonian:
    """Read a JSON model config; parse errors name line and key."""
    text = Path(path).read_text()
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(
            f"model file {path}: line {exc.lineno}: {exc.msg}"
        ) from exc
    if not isinstance(config, dict):
        raise InputError(f"model file {path}: top level must be an object")
    return model_from_config(config)
