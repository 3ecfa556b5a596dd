"""Dense state vectors on N qubits with matrix-free operator application.

Basis convention, fixed once and asserted by tests: basis index b encodes
the computational state whose bit s (site 0 = least-significant bit) gives
the letter at site s, and |0> at a site is the Z = +1 eigenstate.  So the
all-zeros state has <Z_j> = +1 everywhere, and "weight" of a basis state
means its number of excited (bit = 1) sites.

StateVectors are immutable values; apply() never normalizes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ContractError, InputError, NumericError
from .pauli import OperatorSum

# Dense vectors are capped at 16M amplitudes.
MAX_SITES = 24

NORMALIZATION_TOL = 1e-12

_DUMP_MAGIC = b"DEGF"
_DUMP_VERSION = 1
# magic(4) + version u32 + n_sites u32 + 4 reserved zero bytes = 16 bytes
_DUMP_HEADER = struct.Struct("<4sII4x")


@dataclass(frozen=True)
class StateVector:
    """Complex amplitude vector of length 2^n_sites (read-only)."""

    n_sites: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if not 1 <= self.n_sites <= MAX_SITES:
            raise InputError(
                f"n_sites must be in 1..{MAX_SITES}, got {self.n_sites}"
            )
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_sites,):
            raise InputError(
                f"amplitude vector must have length 2^{self.n_sites}, "
                f"got shape {amps.shape}"
            )
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm() - 1.0) <= NORMALIZATION_TOL

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise NumericError("cannot normalize the zero vector")
        return StateVector(self.n_sites, self.amplitudes / n)

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        if self.n_sites != other.n_sites:
            raise InputError("site count mismatch in inner product")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __add__(self, other: "StateVector") -> "StateVector":
        if self.n_sites != other.n_sites:
            raise InputError("site count mismatch")
        return StateVector(self.n_sites, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "StateVector") -> "StateVector":
        if self.n_sites != other.n_sites:
            raise InputError("site count mismatch")
        return StateVector(self.n_sites, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar: complex) -> "StateVector":
        return StateVector(self.n_sites, self.amplitudes * scalar)

    __rmul__ = __mul__


# -- constructors -----------------------------------------------------------------


def make_product_zero(n_sites: int) -> StateVector:
    """|0...0>: amplitude 1 on the all-zeros basis state."""
    amps = np.zeros(1 << n_sites, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_sites, amps)


def make_w(n_sites: int) -> StateVector:
    """Uniform superposition of all weight-1 basis states."""
    if n_sites < 2:
        raise InputError(f"the W state needs at least 2 sites, got {n_sites}")
    amps = np.zeros(1 << n_sites, dtype=complex)
    for s in range(n_sites):
        amps[1 << s] = 1.0 / math.sqrt(n_sites)
    return StateVector(n_sites, amps)


def make_dicke(n_sites: int, k: int) -> StateVector:
    """Uniform superposition of all weight-k basis states."""
    if not 0 <= k <= n_sites:
        raise InputError(f"excitation count {k} outside 0..{n_sites}")
    count = math.comb(n_sites, k)
    amps = np.zeros(1 << n_sites, dtype=complex)
    value = 1.0 / math.sqrt(count)
    for sites in combinations(range(n_sites), k):
        index = 0
        for s in sites:
            index |= 1 << s
        amps[index] = value
    return StateVector(n_sites, amps)


def make_ghz(n_sites: int, relative_sign: float = 1.0) -> StateVector:
    """(|0...0> + sign |1...1>)/sqrt(2)."""
    if n_sites < 2:
        raise InputError(f"the GHZ state needs at least 2 sites, got {n_sites}")
    amps = np.zeros(1 << n_sites, dtype=complex)
    amps[0] = 1.0 / math.sqrt(2.0)
    amps[-1] = relative_sign / math.sqrt(2.0)
    return StateVector(n_sites, amps)


# -- operator action -----------------------------------------------------------------


def apply(op: OperatorSum, psi: StateVector) -> StateVector:
    """A|psi>, matrix-free: per-word bit flips and phase masks.

    Exact up to floating arithmetic; no normalization is applied.
    """
    if op.n_sites != psi.n_sites:
        raise InputError(
            f"operator on {op.n_sites} sites applied to state on {psi.n_sites}"
        )
    idx = np.arange(psi.dim)
    out = np.zeros(psi.dim, dtype=complex)
    for word, coeff in op.terms():
        phase = (1j) ** ((word.x_mask & word.z_mask).bit_count() % 4)
        signs = 1.0 - 2.0 * (np.bitwise_count(idx & word.z_mask) & 1)
        # word|b> = phase * (-1)^{popcount(z & b)} |b ^ x>; the flip is a
        # bijection, so a gather evaluates the whole word in one shot.
        values = (coeff * phase) * (signs * psi.amplitudes)
        out += values[idx ^ word.x_mask]
    return StateVector(psi.n_sites, out)


def expectation(op: OperatorSum, psi: StateVector) -> float:
    """<psi|A|psi> for Hermitian A on a normalized state."""
    if not op.is_hermitian():
        raise ContractError("expectation requires a Hermitian operator")
    if not psi.is_normalized:
        raise ContractError(
            f"expectation requires a normalized state, |psi| = {psi.norm()!r}"
        )
    value = complex(np.vdot(psi.amplitudes, apply(op, psi).amplitudes))
    if abs(value.imag) >= 1e-10:
        raise NumericError(
            f"imaginary residue {value.imag!r} above 1e-10 in expectation"
        )
    return value.real


def connected_correlator(
    a: OperatorSum, b: OperatorSum, psi: StateVector
) -> float:
    """<A B> - <A><B> for Hermitian A, B on disjoint supports."""
    if set(a.support) & set(b.support):
        raise ContractError(
            f"correlator requires disjoint supports, got {a.support} and {b.support}"
        )
    if not (a.is_hermitian() and b.is_hermitian()):
        raise ContractError("correlator requires Hermitian operators")
    if not psi.is_normalized:
        raise ContractError("correlator requires a normalized state")
    # A and B commute (disjoint supports), so <AB> is real up to rounding.
    joint = complex(
        np.vdot(apply(a, psi).amplitudes, apply(b, psi).amplitudes)
    )
    if abs(joint.imag) >= 1e-10:
        raise NumericError(
            f"imaginary residue {joint.imag!r} above 1e-10 in correlator"
        )
    return joint.real - expectation(a, psi) * expectation(b, psi)


# -- binary dump -----------------------------------------------------------------------
#
# Little-endian: 16-byte header (magic "DEGF", version u32, n_sites u32,
# 4 reserved bytes), then 2^n interleaved (re, im) float64 pairs.


def save_state(psi: StateVector, path: str | Path) -> None:
    data = psi.amplitudes.astype("<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(_DUMP_HEADER.pack(_DUMP_MAGIC, _DUMP_VERSION, psi.n_sites))
        fh.write(data)


def load_state(path: str | Path) -> StateVector:
    with open(path, "rb") as fh:
        header = fh.read(_DUMP_HEADER.size)
        if len(header) != _DUMP_HEADER.size:
            raise InputError(f"state dump {path}: truncated header")
        magic, version, n_sites = _DUMP_HEADER.unpack(header)
        if magic != _DUMP_MAGIC:
            raise InputError(f"state dump {path}: bad magic {magic!r}")
        if version != _DUMP_VERSION:
            raise InputError(f"state dump {path}: unsupported version {version}")
        if not 1 <= n_sites <= MAX_SITES:
            raise InputError(f"state dump {path}: bad site count {n_sites}")
        payload = fh.read()
    expected = (1 << n_sites) * 16
    if len(payload) != expected:
        raise InputError(
            f"state dump {path}: expected {expected} payload bytes, "
            f"got {len(payload)}"
        )
    amps = np.frombuffer(payload, dtype="<c16").astype(complex)
    return StateVector(n_sites, amps)
