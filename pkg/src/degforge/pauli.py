"""Exact algebra of N-qubit Pauli words and complex-weighted Pauli sums.

A Pauli word is encoded by two bitmasks (x_mask, z_mask); bit s describes
site s:

    (0, 0) = I,  (1, 0) = X,  (1, 1) = Y,  (0, 1) = Z

with the standard matrices X = [[0,1],[1,0]], Y = [[0,-i],[i,0]],
Z = [[1,0],[0,-1]] and the single-site basis ordered so that Z|0> = +|0>.
The word itself is the Hermitian tensor product of those letters, so a
weighted sum is Hermitian exactly when all its coefficients are real.

Products, commutators and supports are O(1)-per-word bitwise operations;
phases are tracked exactly as powers of i.  Ladder operators follow the
excitation convention sigma_plus|0> = |1>, sigma_minus|1> = |0>, i.e.
sigma_minus = (X + iY)/2 annihilates the all-zeros state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Mapping, Tuple

import numpy as np

from .errors import InputError

# Coefficients with magnitude below this are dropped after every arithmetic
# op; far below every tolerance used by callers.
PRUNE_TOL = 1e-14

# Above this site count dense realizations (and exact spectral norms) are
# refused; 4096-dimensional dense algebra stays sub-second.
DENSE_CUTOFF = 12

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}

_SINGLE_SITE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, order=True)
class PauliString:
    """A single N-site Pauli word (no coefficient).

    Ordering and hashing use (n_sites, x_mask, z_mask), which doubles as the
    lexicographic operator encoding used for deterministic output ordering.
    """

    n_sites: int
    x_mask: int
    z_mask: int

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise InputError(f"n_sites must be positive, got {self.n_sites}")
        top = 1 << self.n_sites
        if not (0 <= self.x_mask < top and 0 <= self.z_mask < top):
            raise InputError("mask exceeds n_sites range")

    @classmethod
    def identity(cls, n_sites: int) -> "PauliString":
        return cls(n_sites, 0, 0)

    @classmethod
    def from_letters(cls, n_sites: int, letters: Mapping[int, str]) -> "PauliString":
        """Build from a {site: 'X'|'Y'|'Z'|'I'} mapping; omitted sites are I."""
        x = z = 0
        for site, letter in letters.items():
            if not 0 <= site < n_sites:
                raise InputError(f"site {site} outside 0..{n_sites - 1}")
            try:
                xb, zb = _LETTER_BITS[letter]
            except KeyError:
                raise InputError(f"unknown Pauli letter {letter!r}") from None
            x |= xb << site
            z |= zb << site
        return cls(n_sites, x, z)

    def letter(self, site: int) -> str:
        return _BITS_LETTER[((self.x_mask >> site) & 1, (self.z_mask >> site) & 1)]

    def letters(self) -> str:
        """Letters for sites 0..n-1, site 0 first (e.g. 'XIZY')."""
        return "".join(self.letter(s) for s in range(self.n_sites))

    @property
    def support(self) -> Tuple[int, ...]:
        mask = self.x_mask | self.z_mask
        return tuple(s for s in range(self.n_sites) if (mask >> s) & 1)

    @property
    def weight(self) -> int:
        return (self.x_mask | self.z_mask).bit_count()

    def commutes_with(self, other: "PauliString") -> bool:
        """Symplectic test: words commute iff they anticommute on an even
        number of sites."""
        return (
            (self.x_mask & other.z_mask).bit_count()
            + (self.z_mask & other.x_mask).bit_count()
        ) % 2 == 0

    def label(self) -> str:
        """Site-tagged text form, e.g. 'X@0 Z@3'; the identity word is 'I'."""
        parts = [f"{self.letter(s)}@{s}" for s in self.support]
        return " ".join(parts) if parts else "I"

    def __repr__(self) -> str:
        return f"PauliString({self.label()!r}, n={self.n_sites})"


def multiply_words(a: PauliString, b: PauliString) -> Tuple[complex, PauliString]:
    """Exact product of two words: returns (phase, word) with phase in
    {1, i, -1, -i} such that phase * word == a.b."""
    if a.n_sites != b.n_sites:
        raise InputError(f"site count mismatch: {a.n_sites} vs {b.n_sites}")
    x3 = a.x_mask ^ b.x_mask
    z3 = a.z_mask ^ b.z_mask
    # Each letter is i^(x z) X^x Z^z; commuting Z^z1 past X^x2 costs
    # (-1)^(z1 x2), and the result is renormalized back to a letter.
    g = (
        (a.x_mask & a.z_mask).bit_count()
        + (b.x_mask & b.z_mask).bit_count()
        - (x3 & z3).bit_count()
        + 2 * (a.z_mask & b.x_mask).bit_count()
    ) % 4
    return (1j) ** g, PauliString(a.n_sites, x3, z3)


class OperatorSum:
    """A complex-weighted sum of Pauli words with exact de-duplication.

    Immutable after construction; coefficients of magnitude below PRUNE_TOL
    are dropped.  Arithmetic (+, -, scalar and operator products, adjoint)
    is exact at the word level, so cancellations are exact.
    """

    __slots__ = ("n_sites", "_terms")

    def __init__(self, n_sites: int, terms: Mapping[PauliString, complex] | None = None):
        if n_sites < 1:
            raise InputError(f"n_sites must be positive, got {n_sites}")
        self.n_sites = n_sites
        pruned: Dict[PauliString, complex] = {}
        if terms:
            for word, coeff in terms.items():
                if word.n_sites != n_sites:
                    raise InputError("word site count does not match operator")
                c = complex(coeff)
                if abs(c) >= PRUNE_TOL:
                    pruned[word] = c
        self._terms = pruned

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, n_sites: int) -> "OperatorSum":
        return cls(n_sites)

    @classmethod
    def from_word(cls, word: PauliString, coeff: complex = 1.0) -> "OperatorSum":
        return cls(word.n_sites, {word: coeff})

    # -- views -----------------------------------------------------------------

    def terms(self) -> Iterator[Tuple[PauliString, complex]]:
        """Deterministic iteration in lexicographic word order."""
        for word in sorted(self._terms):
            yield word, self._terms[word]

    def coefficient(self, word: PauliString) -> complex:
        return self._terms.get(word, 0.0j)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def support(self) -> Tuple[int, ...]:
        mask = 0
        for word in self._terms:
            mask |= word.x_mask | word.z_mask
        return tuple(s for s in range(self.n_sites) if (mask >> s) & 1)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """Words are Hermitian, so the sum is Hermitian iff all coefficients
        are real (within tol)."""
        return all(abs(c.imag) <= tol for c in self._terms.values())

    # -- arithmetic --------------------------------------------------------------

    def _check_match(self, other: "OperatorSum") -> None:
        if self.n_sites != other.n_sites:
            raise InputError(
                f"site count mismatch: {self.n_sites} vs {other.n_sites}"
            )

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        self._check_match(other)
        out = dict(self._terms)
        for word, coeff in other._terms.items():
            out[word] = out.get(word, 0.0j) + coeff
        return OperatorSum(self.n_sites, out)

    def __sub__(self, other: "OperatorSum") -> "OperatorSum":
        return self + (other * -1.0)

    def __mul__(self, scalar: complex) -> "OperatorSum":
        s = complex(scalar)
        return OperatorSum(
            self.n_sites, {w: c * s for w, c in self._terms.items()}
        )

    __rmul__ = __mul__

    def __matmul__(self, other: "OperatorSum") -> "OperatorSum":
        """Operator product, exact at the word level."""
        self._check_match(other)
        out: Dict[PauliString, complex] = {}
        for wa, ca in self._terms.items():
            for wb, cb in other._terms.items():
                phase, word = multiply_words(wa, wb)
                out[word] = out.get(word, 0.0j) + ca * cb * phase
        return OperatorSum(self.n_sites, out)

    def adjoint(self) -> "OperatorSum":
        return OperatorSum(
            self.n_sites, {w: c.conjugate() for w, c in self._terms.items()}
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OperatorSum):
            return NotImplemented
        return self.n_sites == other.n_sites and self._terms == other._terms

    def __repr__(self) -> str:
        return f"OperatorSum({format_operator(self)!r}, n={self.n_sites})"

    # -- dense realization --------------------------------------------------------

    def dense(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix; refused above DENSE_CUTOFF sites.

        Basis order: site 0 is the least-significant bit of the index.
        """
        if self.n_sites > DENSE_CUTOFF:
            raise InputError(
                f"dense realization capped at {DENSE_CUTOFF} sites, "
                f"got {self.n_sites}"
            )
        dim = 1 << self.n_sites
        idx = np.arange(dim)
        mat = np.zeros((dim, dim), dtype=complex)
        for word, coeff in self._terms.items():
            phase = (1j) ** ((word.x_mask & word.z_mask).bit_count() % 4)
            signs = 1.0 - 2.0 * (np.bitwise_count(idx & word.z_mask) & 1)
            mat[idx ^ word.x_mask, idx] += coeff * phase * signs
        return mat


def commutator(a: OperatorSum, b: OperatorSum) -> OperatorSum:
    """AB - BA with exact word-level cancellation.

    Word pairs that commute contribute nothing; anticommuting pairs
    contribute 2 c_a c_b phase * (product word).  Returns the empty sum
    iff a and b commute exactly.
    """
    if a.n_sites != b.n_sites:
        raise InputError(f"site count mismatch: {a.n_sites} vs {b.n_sites}")
    out: Dict[PauliString, complex] = {}
    for wa, ca in a._terms.items():
        for wb, cb in b._terms.items():
            if wa.commutes_with(wb):
                continue
            phase, word = multiply_words(wa, wb)
            out[word] = out.get(word, 0.0j) + 2.0 * ca * cb * phase
    return OperatorSum(a.n_sites, out)


def norm_bound(a: OperatorSum) -> float:
    """Sum of |coefficients|: a certified upper bound on the spectral norm."""
    return float(sum(abs(c) for c in a._terms.values()))


def spectral_norm_dense(a: OperatorSum) -> float:
    """Exact spectral norm via dense realization; n_sites <= DENSE_CUTOFF."""
    mat = a.dense()
    return float(np.linalg.norm(mat, ord=2))


# -- named operators -------------------------------------------------------------


def identity(n_sites: int) -> OperatorSum:
    return OperatorSum.from_word(PauliString.identity(n_sites))


def pauli_term(
    n_sites: int, letters: Mapping[int, str], coeff: complex = 1.0
) -> OperatorSum:
    """Single weighted word, e.g. pauli_term(4, {0: 'Z', 1: 'Z'}, -1.0)."""
    return OperatorSum.from_word(PauliString.from_letters(n_sites, letters), coeff)


def sigma_minus(n_sites: int, site: int) -> OperatorSum:
    """Excitation annihilator |0><1| at site: (X + iY)/2, kills |0>."""
    return OperatorSum(
        n_sites,
        {
            PauliString.from_letters(n_sites, {site: "X"}): 0.5,
            PauliString.from_letters(n_sites, {site: "Y"}): 0.5j,
        },
    )


def sigma_plus(n_sites: int, site: int) -> OperatorSum:
    """Excitation creator |1><0| at site: (X - iY)/2, kills |1>."""
    return sigma_minus(n_sites, site).adjoint()


def number_op(n_sites: int, site: int) -> OperatorSum:
    """Projector onto the excited state at site: (I - Z)/2 = sigma+ sigma-."""
    return OperatorSum(
        n_sites,
        {
            PauliString.identity(n_sites): 0.5,
            PauliString.from_letters(n_sites, {site: "Z"}): -0.5,
        },
    )


# -- textual syntax ----------------------------------------------------------------
#
# One term:   <coeff> * <word>     e.g.  -1.0 * Z@3 Z@4
# Sums:       terms joined by " + " or one per line
# Coefficients: real as repr(float); complex as  <re>+<im>i / <re>-<im>i
# The printer and parser round-trip double precision bit-exactly.


def _format_float(x: float) -> str:
    return repr(float(x))


def _format_coeff(c: complex) -> str:
    if c.imag == 0.0 and math.copysign(1.0, c.imag) > 0:
        return _format_float(c.real)
    sign = "-" if math.copysign(1.0, c.imag) < 0 else "+"
    return f"{_format_float(c.real)}{sign}{_format_float(abs(c.imag))}i"


def _parse_coeff(text: str) -> complex:
    text = text.strip()
    if text.endswith("i"):
        body = text[:-1]
        # Split at the sign of the imaginary part: the last +/- that is not
        # an exponent sign and not the leading sign.
        for pos in range(len(body) - 1, 0, -1):
            ch = body[pos]
            if ch in "+-" and body[pos - 1] not in "eE":
                re_part, im_part = body[:pos], body[pos:]
                break
        else:
            raise InputError(f"cannot parse complex coefficient {text!r}")
        try:
            return complex(float(re_part), float(im_part))
        except ValueError:
            raise InputError(f"cannot parse complex coefficient {text!r}") from None
    try:
        return complex(float(text), 0.0)
    except ValueError:
        raise InputError(f"cannot parse coefficient {text!r}") from None


def format_operator(op: OperatorSum) -> str:
    """Canonical text form; terms in lexicographic word order. Zero is '0'."""
    if op.is_zero():
        return "0"
    return " + ".join(
        f"{_format_coeff(coeff)} * {word.label()}" for word, coeff in op.terms()
    )


def parse_word(text: str, n_sites: int) -> PauliString:
    """Parse a word label like 'X@0 Z@3' (or 'I') into a PauliString."""
    text = text.strip()
    if text == "I" or not text:
        return PauliString.identity(n_sites)
    letters: Dict[int, str] = {}
    for token in text.split():
        if "@" not in token:
            raise InputError(f"bad word token {token!r}: expected LETTER@site")
        letter, _, site_text = token.partition("@")
        try:
            site = int(site_text)
        except ValueError:
            raise InputError(f"bad site index in token {token!r}") from None
        if letter not in _LETTER_BITS:
            raise InputError(f"unknown Pauli letter {letter!r} in {token!r}")
        if site in letters:
            raise InputError(f"site {site} repeated within one word")
        letters[site] = letter
    return PauliString.from_letters(n_sites, letters)


def parse_operator(text: str, n_sites: int) -> OperatorSum:
    """Parse the textual operator syntax; inverse of format_operator."""
    chunks: list[str] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        chunks.extend(part.strip() for part in line.split(" + "))
    terms: Dict[PauliString, complex] = {}
    for chunk in chunks:
        if chunk == "0":
            continue
        coeff_text, star, word_text = chunk.partition("*")
        if not star:
            raise InputError(f"bad term {chunk!r}: expected '<coeff> * <word>'")
        word = parse_word(word_text, n_sites)
        coeff = _parse_coeff(coeff_text)
        terms[word] = terms.get(word, 0.0j) + coeff
    return OperatorSum(n_sites, terms)
