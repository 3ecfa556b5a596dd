"""Degeneracy certificates from local converters.

The mechanism being certified: if a normalized state psi is an eigenstate
of every Hamiltonian term (h_j psi = e_j psi) and a family of local
operators O_i maps psi to one common image phi, with each term paired to a
converter it commutes with, then phi is an eigenstate of every term with
the same energies -- so a frustration-free ground state with such a family
is never unique.

This module verifies proposed converter families exactly
(check_certificate), searches for them (commutant_basis, find_converters),
and evaluates the residual bounds that control the approximate version of
the statement (residual_bound_report).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
import scipy.sparse

from .errors import (
    ContractError,
    InputError,
    InternalConsistencyError,
)
from .hamiltonians import (
    HamTerm,
    LocalHamiltonian,
    TermEigenReport,
    ground_space,
    term_eigen_check,
)
from .pauli import (
    DENSE_CUTOFF,
    OperatorSum,
    PauliString,
    commutator,
    format_operator,
    identity,
    multiply_words,
    norm_bound,
    sigma_minus,
)
from .parallel import pmap
from .states import StateVector, apply

COMMUTANT_WINDOW_CAP = 6

VERDICT_DEGENERATE_PARTNER = "DEGENERATE_PARTNER"
VERDICT_TRIVIAL = "TRIVIAL"
VERDICT_INVALID = "INVALID"


@dataclass(frozen=True)
class Tolerances:
    """All certificate tolerances, overridable per call."""

    consistency: float = 1e-10     # common-image agreement, |O_i psi - phi_raw|
    commutation: float = 1e-12    # paired commutator norm bound
    propagation: float = 1e-12    # |h_j phi - e_j phi| (implied, reported)
    eigen: float = 1e-10          # term residual for the source state
    overlap: float = 1e-6         # |<psi|phi>| above 1 - overlap is trivial
    svd: float = 1e-10            # nullspace threshold, relative to sigma_max
    score: float = 1e-6           # minimum orthogonal-image fraction


@dataclass(frozen=True)
class LocalOperator:
    """A converter candidate: an operator pinned to a window around a center."""

    op: OperatorSum
    center: int
    sites: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not set(self.op.support) <= set(self.sites):
            raise InputError(
                f"converter support {self.op.support} leaves window {self.sites}"
            )

    @property
    def width(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class ConversionCertificate:
    """The verified tuple realizing (or refuting) a degenerate partner."""

    converters: Tuple[LocalOperator, ...]
    pairing: Dict[int, int]        # term position -> converter position
    phi: StateVector
    raw_image_norm: float
    consistency: float
    commutation: float
    propagation: float
    overlap: float
    term_energies: np.ndarray
    valid: bool
    verdict: str
    invertible_converter: bool | None
    tolerances: Tolerances

    @property
    def n_converters(self) -> int:
        return len(self.converters)


def _pair_terms(
    terms: Sequence[HamTerm], converters: Sequence[LocalOperator]
) -> Tuple[Dict[int, int], np.ndarray]:
    """Greedy pairing: first disjoint-support converter (commutator exactly
    zero), else the converter with minimal commutator norm bound."""
    pairing: Dict[int, int] = {}
    bounds = np.zeros(len(terms))
    supports = [set(c.op.support) for c in converters]
    for tpos, term in enumerate(terms):
        tsup = set(term.op.support)
        choice = None
        for cpos, csup in enumerate(supports):
            if not (tsup & csup):
                choice = cpos
                break
        if choice is not None:
            pairing[tpos] = choice
            bounds[tpos] = 0.0
            continue
        best_pos = 0
        best = math.inf
        for cpos, conv in enumerate(converters):
            b = norm_bound(commutator(term.op, conv.op))
            if b < best - 1e-15:
                best = b
                best_pos = cpos
        pairing[tpos] = best_pos
        bounds[tpos] = best
    return pairing, bounds


def _invertibility(
    ham: LocalHamiltonian, converter: LocalOperator
) -> bool | None:
    """Rank of the converter compressed to the ground space (dense scale only)."""
    if ham.n_sites > DENSE_CUTOFF:
        return None
    space = ground_space(ham)
    mat = np.empty((space.degeneracy, space.degeneracy), dtype=complex)
    images = [apply(converter.op, b) for b in space.basis]
    for col, image in enumerate(images):
        for row, bra in enumerate(space.basis):
            mat[row, col] = bra.inner(image)
    svals = np.linalg.svd(mat, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return False
    rank = int(np.count_nonzero(svals > 1e-8 * svals[0]))
    return rank == space.degeneracy


def check_certificate(
    ham: LocalHamiltonian,
    psi: StateVector,
    converters: Sequence[LocalOperator],
    tolerances: Tolerances | None = None,
    compute_invertible: bool = True,
) -> ConversionCertificate:
    """Verify a proposed converter family on (ham, psi).

    phi is the normalized image of the first converter whose image does not
    vanish; consistency measures how far the other raw images are from that
    common image.  The certificate is VALID when consistency and the paired
    commutator bounds are inside tolerance and psi is a term-wise
    eigenstate; the propagation residual is then implied and reported.
    """
    tol = tolerances or Tolerances()
    if not converters:
        raise InputError("at least one converter is required")
    if not psi.is_normalized:
        raise ContractError("check_certificate requires a normalized source state")

    images = [apply(conv.op, psi) for conv in converters]
    anchor = next(
        (i for i, img in enumerate(images) if img.norm() > tol.consistency), None
    )
    if anchor is None:
        raise ContractError(
            "annihilating converters: every image norm is below "
            f"{tol.consistency!r}"
        )
    phi_raw = images[anchor]
    raw_norm = phi_raw.norm()
    consistency = max((img - phi_raw).norm() for img in images)
    phi = phi_raw.normalized()
    overlap = abs(psi.inner(phi))

    report = term_eigen_check(ham, psi, tol.eigen)
    pairing, bounds = _pair_terms(ham.terms, converters)
    commutation = float(bounds.max(initial=0.0))

    propagation = 0.0
    for tpos, term in enumerate(ham.terms):
        image = apply(term.op, phi)
        residual = (image - phi * report.energies[tpos]).norm()
        propagation = max(propagation, residual)

    valid = (
        consistency <= tol.consistency
        and commutation <= tol.commutation
        and report.is_termwise_eigenstate
    )
    if not valid:
        verdict = VERDICT_INVALID
    elif overlap >= 1.0 - tol.overlap:
        verdict = VERDICT_TRIVIAL
    else:
        verdict = VERDICT_DEGENERATE_PARTNER

    invertible = None
    if compute_invertible and ham.n_sites <= DENSE_CUTOFF:
        invertible = _invertibility(ham, converters[anchor])

    return ConversionCertificate(
        converters=tuple(converters),
        pairing=pairing,
        phi=phi,
        raw_image_norm=raw_norm,
        consistency=float(consistency),
        commutation=commutation,
        propagation=float(propagation),
        overlap=float(overlap),
        term_energies=report.energies,
        valid=valid,
        verdict=verdict,
        invertible_converter=invertible,
        tolerances=tol,
    )


# -- commutant search ---------------------------------------------------------------


def _window_words(n_sites: int, window: Sequence[int]) -> List[PauliString]:
    """All 4^w words on the window, identity first, in a fixed canonical order."""
    w = len(window)
    words = []
    for code in range(1 << (2 * w)):
        x_local = code >> w
        z_local = code & ((1 << w) - 1)
        x = z = 0
        for t, site in enumerate(window):
            x |= ((x_local >> t) & 1) << site
            z |= ((z_local >> t) & 1) << site
        words.append(PauliString(n_sites, x, z))
    return words


def _commutant_of_terms(
    n_sites: int,
    window: Sequence[int],
    terms: Sequence[HamTerm],
    tol_svd: float,
) -> List[OperatorSum]:
    """Orthonormal basis (normalized trace inner product, i.e. unit
    coefficient vectors) of the window operators commuting exactly with
    every given term."""
    words = _window_words(n_sites, window)
    n_words = len(words)
    if not terms:
        return [OperatorSum.from_word(word) for word in words]

    rows: Dict[Tuple[int, int, int], int] = {}
    coo_r: List[int] = []
    coo_c: List[int] = []
    coo_v: List[complex] = []
    for tpos, term in enumerate(terms):
        for hword, hcoeff in term.op.terms():
            for col, wword in enumerate(words):
                if hword.commutes_with(wword):
                    continue
                phase, prod = multiply_words(hword, wword)
                key = (tpos, prod.x_mask, prod.z_mask)
                row = rows.setdefault(key, len(rows))
                coo_r.append(row)
                coo_c.append(col)
                coo_v.append(2.0 * hcoeff * phase)
    if not rows:
        return [OperatorSum.from_word(word) for word in words]

    constraint = scipy.sparse.coo_matrix(
        (coo_v, (coo_r, coo_c)), shape=(len(rows), n_words), dtype=complex
    ).tocsr()
    gram = (constraint.conj().T @ constraint).toarray()
    evals, evecs = np.linalg.eigh(gram)
    evals = np.clip(evals, 0.0, None)
    s_max = math.sqrt(float(evals[-1]))
    if s_max == 0.0:
        return [OperatorSum.from_word(word) for word in words]
    null_mask = np.sqrt(evals) <= tol_svd * s_max
    null = evecs[:, null_mask]
    if null.shape[1] == 0:
        return []

    # Canonical sparse-ish basis: pivoted Gram-Schmidt over the projected
    # word vectors, so exact nullspaces come out as plain words (I before Z
    # etc.) instead of an arbitrary LAPACK rotation.
    projector = null @ null.conj().T
    remaining = projector.copy()
    basis_vectors: List[np.ndarray] = []
    for _ in range(null.shape[1]):
        norms = np.linalg.norm(remaining, axis=0)
        pivot = int(np.argmax(norms))
        if norms[pivot] < 1e-12:
            break
        q = remaining[:, pivot] / norms[pivot]
        basis_vectors.append(q)
        remaining -= np.outer(q, q.conj() @ remaining)

    out = []
    for vec in basis_vectors:
        coeffs = {
            words[p]: vec[p] for p in range(n_words) if abs(vec[p]) > 1e-13
        }
        out.append(OperatorSum(n_sites, coeffs))
    return out


def commutant_basis(
    ham: LocalHamiltonian,
    window: Sequence[int],
    tol_svd: float = 1e-10,
) -> List[OperatorSum]:
    """Basis of { O on window : [h_j, O] = 0 exactly for every overlapping
    term }.  Terms not overlapping the window commute trivially and impose
    no constraint; with no overlapping term at all the full 4^w word basis
    comes back."""
    window = tuple(window)
    if len(window) > COMMUTANT_WINDOW_CAP:
        raise InputError(
            f"commutant window capped at {COMMUTANT_WINDOW_CAP} sites, "
            f"got {len(window)}"
        )
    if len(set(window)) != len(window):
        raise InputError("window sites must be distinct")
    wset = set(window)
    overlapping = [t for t in ham.terms if wset & set(t.op.support)]
    return _commutant_of_terms(ham.n_sites, window, overlapping, tol_svd)


# -- converter discovery ----------------------------------------------------------------


@dataclass(frozen=True)
class ConverterCandidate:
    """A discovered converter, its image, and its re-verification."""

    operator: LocalOperator
    phi: StateVector
    score: float
    certificate: ConversionCertificate


def _orth_columns(mat: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the column space via SVD rank truncation."""
    if mat.size == 0:
        return mat.reshape(mat.shape[0], 0)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return mat[:, :0]
    return u[:, s > rel_tol * s[0]]


def _intersect_spaces(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Intersection of two subspaces given by orthonormal column bases."""
    if a.shape[1] == 0 or b.shape[1] == 0:
        return a[:, :0]
    u, s, _ = np.linalg.svd(a.conj().T @ b, full_matrices=False)
    keep = s >= 1.0 - 1e-8
    return _orth_columns(a @ u[:, keep])


def find_converters(
    ham: LocalHamiltonian,
    psi: StateVector,
    window_width: int,
    tolerances: Tolerances | None = None,
    strict: bool = False,
) -> List[ConverterCandidate]:
    """Search all windows of the given width for converters that map psi to
    a new degenerate partner.

    Two routes, every result re-verified via check_certificate:

    * solo: elements of the strict local commutant (they commute with every
      overlapping term, so one operator certifies alone);
    * family: operators from the relaxed per-window solution sets (terms
      with a disjoint window available elsewhere impose no constraint --
      their commutation requirement is met trivially by pairing them to a
      family member with disjoint support).  Families are assembled by
      intersecting the per-window image spaces to find one common image.

    Returns candidates ordered by (window position, descending score,
    operator text); empty when every admissible image is parallel to psi or
    when psi is no term-wise eigenstate (nothing can certify then).  With
    strict=True a non-eigenstate input raises instead, naming the offending
    terms.
    """
    tol = tolerances or Tolerances()
    if strict:
        report = term_eigen_check(ham, psi, tol.eigen)
        if not report.is_termwise_eigenstate:
            offenders = report.non_eigen_terms()
            raise ContractError(
                "find_converters requires a term-wise eigenstate; residual "
                f"above {tol.eigen!r} on term(s) {offenders}"
            )
    if window_width < 1 or window_width > COMMUTANT_WINDOW_CAP:
        raise InputError(
            f"window width must be in 1..{COMMUTANT_WINDOW_CAP}, got {window_width}"
        )
    n = ham.n_sites
    positions = [tuple(range(p, p + window_width)) for p in range(n - window_width + 1)]
    psi_vec = psi.amplitudes

    def solo_candidates(window: Tuple[int, ...]) -> List[ConverterCandidate]:
        found = []
        for op in commutant_basis(ham, window, tol.svd):
            image = apply(op, psi)
            nrm = image.norm()
            if nrm <= tol.score:
                continue
            ortho = image - psi * psi.inner(image)
            score = ortho.norm() / nrm
            if score < tol.score:
                continue
            conv = LocalOperator(op=op, center=window[0], sites=window)
            cert = check_certificate(ham, psi, [conv], tol)
            if cert.valid and cert.verdict == VERDICT_DEGENERATE_PARTNER:
                found.append(
                    ConverterCandidate(conv, cert.phi, float(score), cert)
                )
        return found

    candidates: List[ConverterCandidate] = []
    for per_window in pmap(solo_candidates, positions):
        candidates.extend(per_window)

    # Family route: drop constraints from terms that some other window is
    # disjoint from, find the common image across windows, then solve for
    # one member per window.
    def relaxed_basis(window: Tuple[int, ...]) -> List[OperatorSum]:
        wset = set(window)
        pinned = []
        for term in ham.terms:
            tsup = set(term.op.support)
            if not (wset & tsup):
                continue
            has_disjoint_window = any(
                not (set(q) & tsup) for q in positions
            )
            if not has_disjoint_window:
                pinned.append(term)
        return _commutant_of_terms(n, window, pinned, tol.svd)

    def window_images(window: Tuple[int, ...]):
        basis = relaxed_basis(window)
        if not basis:
            return basis, np.zeros((psi.dim, 0), dtype=complex)
        image_matrix = np.column_stack(
            [apply(op, psi).amplitudes for op in basis]
        )
        return basis, image_matrix

    per_window = pmap(window_images, positions)
    ortho_images = []
    for _, image_matrix in per_window:
        u = _orth_columns(image_matrix)
        u = u - np.outer(psi_vec, psi_vec.conj() @ u)
        ortho_images.append(_orth_columns(u))

    common = ortho_images[0] if ortho_images else np.zeros((psi.dim, 0))
    for u in ortho_images[1:]:
        common = _intersect_spaces(common, u)
        if common.shape[1] == 0:
            break

    for col in range(common.shape[1]):
        target = common[:, col]
        members: List[LocalOperator] = []
        for (basis, image_matrix), window in zip(per_window, positions):
            if image_matrix.shape[1] == 0:
                continue
            coeffs, *_ = np.linalg.lstsq(image_matrix, target, rcond=None)
            residual = np.linalg.norm(image_matrix @ coeffs - target)
            if residual > 1e-8:
                continue
            op = OperatorSum.zero(n)
            for c, base_op in zip(coeffs, basis):
                if abs(c) > 1e-13:
                    op = op + base_op * c
            if op.is_zero():
                continue
            members.append(LocalOperator(op=op, center=window[0], sites=window))
        if not members:
            continue
        cert = check_certificate(ham, psi, members, tol)
        if not (cert.valid and cert.verdict == VERDICT_DEGENERATE_PARTNER):
            continue
        for member in members:
            image = apply(member.op, psi)
            nrm = image.norm()
            if nrm <= tol.score:
                continue
            ortho = image - psi * psi.inner(image)
            score = ortho.norm() / nrm
            if score < tol.score:
                continue
            candidates.append(
                ConverterCandidate(member, cert.phi, float(score), cert)
            )

    unique: Dict[Tuple[int, str], ConverterCandidate] = {}
    for cand in candidates:
        key = (cand.operator.sites[0], _canonical_op_key(cand.operator.op))
        if key not in unique or cand.score > unique[key].score + 1e-12:
            unique[key] = cand
    ordered = sorted(
        unique.values(),
        key=lambda c: (
            c.operator.sites[0],
            -c.score,
            format_operator(c.operator.op),
        ),
    )
    return ordered


def _canonical_op_key(op: OperatorSum) -> str:
    """Scale/phase-invariant fingerprint: unit 2-norm coefficient vector,
    first significant coefficient made real positive, rounded to 9 digits."""
    pairs = list(op.terms())
    if not pairs:
        return "0"
    scale = math.sqrt(sum(abs(c) ** 2 for _, c in pairs))
    phase = next(c for _, c in pairs if abs(c) > 1e-8 * scale)
    phase /= abs(phase)
    parts = []
    for word, coeff in pairs:
        c = coeff / (scale * phase)
        parts.append(f"{c.real:.9f}{c.imag:+.9f}j*{word.label()}")
    return " ".join(parts)


# -- residual bounds -------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    """Per-pair residual bounds: actual_j <= |O_i| a_j + |[h_j, O_i]|."""

    source_residuals: np.ndarray    # a_j
    commutator_bounds: np.ndarray   # b[j, i]
    bounds: np.ndarray              # |O_i| a_j + b[j, i]
    actuals: np.ndarray             # |h_j phi - e_j phi|
    converter_norms: np.ndarray     # |O_i| (coefficient-sum bound)
    term_energies: np.ndarray


def residual_bound_report(
    ham: LocalHamiltonian,
    psi: StateVector,
    converters: Sequence[LocalOperator],
    pairing: Mapping[int, int] | None = None,
    slack: float = 1e-10,
) -> ResidualReport:
    """Evaluate the propagated-residual bound on concrete inputs.

    For every term j and converter i:  bound[j, i] = |O_i| a_j + |[h_j, O_i]|
    with a_j the source residual; each actual_j must stay below the best
    bound min_i bound[j, i] + slack, else an internal-consistency error is
    raised (a violation indicates broken norms or an inconsistent family,
    never a tolerable numerical artifact).
    """
    if not converters:
        raise InputError("at least one converter is required")
    if not psi.is_normalized:
        raise ContractError("residual_bound_report requires a normalized state")
    report = term_eigen_check(ham, psi)
    images = [apply(conv.op, psi) for conv in converters]
    anchor = next((i for i, img in enumerate(images) if img.norm() > 1e-10), None)
    if anchor is None:
        raise ContractError("annihilating converters: every image vanishes")
    phi = images[anchor].normalized()

    n_terms = len(ham.terms)
    n_conv = len(converters)
    conv_norms = np.array([norm_bound(c.op) for c in converters])
    b = np.zeros((n_terms, n_conv))
    for tpos, term in enumerate(ham.terms):
        tsup = set(term.op.support)
        for cpos, conv in enumerate(converters):
            if tsup & set(conv.op.support):
                b[tpos, cpos] = norm_bound(commutator(term.op, conv.op))
    a = report.residuals
    bounds = conv_norms[np.newaxis, :] * a[:, np.newaxis] + b

    actuals = np.empty(n_terms)
    for tpos, term in enumerate(ham.terms):
        image = apply(term.op, phi)
        actuals[tpos] = (image - phi * report.energies[tpos]).norm()

    best = bounds.min(axis=1)
    violations = np.nonzero(actuals > best + slack)[0]
    if violations.size:
        j = int(violations[0])
        raise InternalConsistencyError(
            f"residual bound violated on term {j}: actual {actuals[j]!r} "
            f"exceeds best bound {best[j]!r} + {slack!r}; check converter "
            "norms and image consistency"
        )
    _ = pairing  # accepted for symmetry with check_certificate; bounds
    # are reported for every pair, so the pairing does not change them.
    return ResidualReport(
        source_residuals=a,
        commutator_bounds=b,
        bounds=bounds,
        actuals=actuals,
        converter_norms=conv_norms,
        term_energies=report.energies,
    )


# -- shipped converter families -------------------------------------------------------------


def converter_family(
    name: str, n_sites: int, k: int | None = None
) -> List[LocalOperator]:
    """Named families: 'wstate-lowering', 'dicke-lowering' (needs k),
    'identity'."""
    if name == "wstate-lowering":
        scale = math.sqrt(n_sites)
        return [
            LocalOperator(
                op=sigma_minus(n_sites, i) * scale, center=i, sites=(i,)
            )
            for i in range(n_sites)
        ]
    if name == "dicke-lowering":
        if k is None or k < 1:
            raise InputError("dicke-lowering needs an excitation count k >= 1")
        if k > n_sites:
            raise InputError(f"k = {k} exceeds n_sites = {n_sites}")
        scale = math.sqrt(math.comb(n_sites, k))
        out = []
        # Cyclic width-k windows: one converter per site, so every term of a
        # (k+1)-local parent model has a converter with disjoint support.
        for i in range(n_sites):
            window = tuple(sorted((i + t) % n_sites for t in range(k)))
            op = identity(n_sites) * scale
            for site in window:
                op = op @ sigma_minus(n_sites, site)
            out.append(LocalOperator(op=op, center=i, sites=window))
        return out
    if name == "identity":
        return [LocalOperator(op=identity(n_sites), center=0, sites=(0,))]
    raise InputError(
        f"unknown converter family {name!r}; expected wstate-lowering, "
        "dicke-lowering, or identity"
    )
