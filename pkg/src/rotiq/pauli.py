"""Pauli-string algebra, Lie closures and the g-purity machinery.

Pauli strings are stored symplectically as two integer bit masks ``x`` and
``z``.  Qubit ``q`` of an ``n``-qubit string lives at bit ``n - 1 - q``, which
matches the MSB-first basis ordering used by :mod:`rotiq.sim`, so label
``"XZ"`` is X on qubit 0 and Z on qubit 1.  Single-qubit symbols map as
``(x, z) = (1, 0) -> X``, ``(0, 1) -> Z``, ``(1, 1) -> Y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ClosureCapExceeded, DimensionError, EmptySpanError, RotiqError

PRUNE_TOL = 1e-12
RANK_TOL = 1e-9

_SYMBOLS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_BITS = {v: k for k, v in _SYMBOLS.items()}
_PHASES = (1, 1j, -1, -1j)

PauliKey = tuple[int, int]


def _phase_exponent(x1: int, z1: int, x2: int, z2: int) -> int:
    """Power of i picked up by the product of two phase-free strings."""
    y1, xo1, zo1 = x1 & z1, x1 & ~z1, z1 & ~x1
    y2, xo2, zo2 = x2 & z2, x2 & ~z2, z2 & ~x2
    g = ((y1 & zo2).bit_count() - (y1 & xo2).bit_count()
         + (xo1 & y2).bit_count() - (xo1 & zo2).bit_count()
         + (zo1 & xo2).bit_count() - (zo1 & y2).bit_count())
    return g % 4


def _anticommute(x1: int, z1: int, x2: int, z2: int) -> bool:
    return ((x1 & z2) ^ (z1 & x2)).bit_count() & 1 == 1


def _label_to_bits(label: str) -> PauliKey:
    n = len(label)
    x = z = 0
    for q, ch in enumerate(label.upper()):
        try:
            bx, bz = _BITS[ch]
        except KeyError:
            raise ValueError(f"invalid Pauli symbol {ch!r} in {label!r}") from None
        x |= bx << (n - 1 - q)
        z |= bz << (n - 1 - q)
    return x, z


def _bits_to_label(x: int, z: int, n: int) -> str:
    return "".join(_SYMBOLS[(x >> (n - 1 - q)) & 1, (z >> (n - 1 - q)) & 1] for q in range(n))


_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _string_matrix(label: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, _SINGLE[ch])
    return out


@dataclass(frozen=True)
class PauliTerm:
    """A single scaled Pauli string ``coefficient * P``."""

    n_qubits: int
    x: int
    z: int
    coefficient: complex = 1.0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if (self.x | self.z) >> self.n_qubits:
            raise DimensionError("bit masks exceed n_qubits")

    @classmethod
    def from_label(cls, label: str, coefficient: complex = 1.0) -> "PauliTerm":
        x, z = _label_to_bits(label)
        return cls(len(label), x, z, complex(coefficient))

    @property
    def label(self) -> str:
        return _bits_to_label(self.x, self.z, self.n_qubits)

    @property
    def symbols(self) -> str:
        return self.label

    def to_matrix(self) -> np.ndarray:
        return self.coefficient * _string_matrix(self.label)

    def __mul__(self, other: "PauliTerm") -> "PauliTerm":
        return pauli_multiply(self, other)


def pauli_multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    phase = _PHASES[_phase_exponent(a.x, a.z, b.x, b.z)]
    return PauliTerm(a.n_qubits, a.x ^ b.x, a.z ^ b.z, phase * a.coefficient * b.coefficient)


class PauliSum:
    """Immutable linear combination of Pauli strings with complex coefficients.

    Coefficients with magnitude at or below ``PRUNE_TOL`` are dropped on
    construction.
    """

    __slots__ = ("_n", "_terms")

    def __init__(self, n_qubits: int, terms: Mapping[PauliKey, complex] | None = None):
        if n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        self._n = n_qubits
        limit = 1 << n_qubits
        clean = {}
        for (x, z), c in (terms or {}).items():
            if x >= limit or z >= limit or x < 0 or z < 0:
                raise DimensionError("Pauli key exceeds n_qubits")
            c = complex(c)
            if abs(c) > PRUNE_TOL:
                clean[(x, z)] = c
        self._terms = clean

    @classmethod
    def from_labels(cls, terms: Mapping[str, complex] | Iterable[tuple[str, complex]]) -> "PauliSum":
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[PauliKey, complex] = {}
        n = None
        for label, c in items:
            if n is None:
                n = len(label)
            elif len(label) != n:
                raise DimensionError("labels of unequal length")
            key = _label_to_bits(label)
            acc[key] = acc.get(key, 0) + c
        if n is None:
            raise ValueError("cannot infer qubit count from an empty term list")
        return cls(n, acc)

    @classmethod
    def from_term(cls, term: PauliTerm) -> "PauliSum":
        return cls(term.n_qubits, {(term.x, term.z): term.coefficient})

    @classmethod
    def single(cls, n_qubits: int, ops: Mapping[int, str], coefficient: complex = 1.0) -> "PauliSum":
        """Build ``coefficient * P`` from a ``{qubit: symbol}`` map, identity elsewhere."""
        label = ["I"] * n_qubits
        for q, s in ops.items():
            if not 0 <= q < n_qubits:
                raise DimensionError(f"qubit {q} outside 0..{n_qubits - 1}")
            label[q] = s
        return cls.from_labels({"".join(label): coefficient})

    @classmethod
    def identity(cls, n_qubits: int, coefficient: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, {(0, 0): coefficient})

    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def terms(self) -> dict[PauliKey, complex]:
        return dict(self._terms)

    def labelled_terms(self) -> dict[str, complex]:
        return {_bits_to_label(x, z, self._n): c for (x, z), c in self._terms.items()}

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __repr__(self) -> str:
        body = " ".join(f"{c:.6g}*{lab}" for lab, c in sorted(self.labelled_terms().items()))
        return f"PauliSum({body or '0'})"

    def _check(self, other: "PauliSum") -> None:
        if not isinstance(other, PauliSum):
            raise TypeError(f"expected PauliSum, got {type(other).__name__}")
        if other._n != self._n:
            raise DimensionError(f"qubit count mismatch: {self._n} vs {other._n}")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0) + c
        return PauliSum(self._n, acc)

    def __neg__(self) -> "PauliSum":
        return PauliSum(self._n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-other)

    def __mul__(self, scalar: complex) -> "PauliSum":
        if isinstance(scalar, PauliSum):
            return self @ scalar
        return PauliSum(self._n, {k: scalar * c for k, c in self._terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        acc: dict[PauliKey, complex] = {}
        for (x1, z1), c1 in self._terms.items():
            for (x2, z2), c2 in other._terms.items():
                k = (x1 ^ x2, z1 ^ z2)
                acc[k] = acc.get(k, 0) + _PHASES[_phase_exponent(x1, z1, x2, z2)] * c1 * c2
        return PauliSum(self._n, acc)

    def dagger(self) -> "PauliSum":
        return PauliSum(self._n, {k: c.conjugate() for k, c in self._terms.items()})

    def is_hermitian(self, tol: float = PRUNE_TOL) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def is_antihermitian(self, tol: float = PRUNE_TOL) -> bool:
        return all(abs(c.real) <= tol for c in self._terms.values())

    def trace(self) -> complex:
        return self._terms.get((0, 0), 0j) * (1 << self._n)

    def hs_inner(self, other: "PauliSum") -> complex:
        """Hilbert-Schmidt inner product ``tr(self^dagger other)``."""
        self._check(other)
        s = sum(c.conjugate() * other._terms.get(k, 0) for k, c in self._terms.items())
        return s * (1 << self._n)

    def hs_norm(self) -> float:
        return math.sqrt(self.hs_inner(self).real)

    def allclose(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        return max((abs(c) for _, c in (self - other)), default=0.0) <= atol

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self._n
        out = np.zeros((dim, dim), dtype=complex)
        for (x, z), c in self._terms.items():
            out += c * _string_matrix(_bits_to_label(x, z, self._n))
        return out


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    """``ab - ba``; only anticommuting string pairs contribute (as ``2 PQ``)."""
    a._check(b)
    acc: dict[PauliKey, complex] = {}
    for (x1, z1), c1 in a:
        for (x2, z2), c2 in b:
            if _anticommute(x1, z1, x2, z2):
                k = (x1 ^ x2, z1 ^ z2)
                acc[k] = acc.get(k, 0) + 2 * _PHASES[_phase_exponent(x1, z1, x2, z2)] * c1 * c2
    return PauliSum(a.n_qubits, acc)


def pauli_expectations(state: np.ndarray, keys: Iterable[PauliKey]) -> dict[PauliKey, complex]:
    """``<psi|P|psi>`` for each string, evaluated directly on the amplitudes.

    ``P|b> = i^{|x&z|} (-1)^{|b&z|} |b ^ x>``, so no operator matrix is formed.
    """
    psi = np.asarray(state)
    idx = np.arange(psi.shape[-1])
    out = {}
    for x, z in keys:
        sign = 1 - 2 * (np.bitwise_count(idx & z) & 1).astype(np.int64)
        val = np.sum(np.conj(psi[..., idx ^ x]) * sign * psi, axis=-1)
        out[(x, z)] = _PHASES[(x & z).bit_count() % 4] * val
    return out



# --------------------------------------------------------------------------
# generators of the equivariant ansatz

def cz_generator(i: int, n: int) -> PauliSum:
    """Hamiltonian ``h`` with ``exp(-i h) = CZ`` on qubits ``(i, i + 1)`` (0-based)."""
    if n < 2 or not 0 <= i < n - 1:
        raise DimensionError(f"CZ pair ({i}, {i + 1}) outside an {n}-qubit register")
    ident = PauliSum.identity(n)
    zi = PauliSum.single(n, {i: "Z"})
    zj = PauliSum.single(n, {i + 1: "Z"})
    zz = PauliSum.single(n, {i: "Z", i + 1: "Z"})
    return -(math.pi / 4) * (ident - zi - zj + zz)


def equivariant_generators(n_rad: int, n_orb: int) -> list[PauliSum]:
    """X, Y, Z on every radial qubit, then a CZ generator for every adjacent pair."""
    if n_rad < 1 or n_orb < 1:
        raise ValueError("n_rad and n_orb must be at least 1")
    n = n_rad + n_orb
    gens = [PauliSum.single(n, {q: s}) for q in range(n_rad) for s in "XYZ"]
    gens.extend(cz_generator(i, n) for i in range(n - 1))
    return gens


# --------------------------------------------------------------------------
# spans and closure

@dataclass(frozen=True)
class OperatorSpan:
    """Hilbert-Schmidt orthonormal basis of anti-Hermitian operators."""

    n_qubits: int
    basis: tuple[PauliSum, ...]
    capped: bool = False

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __len__(self) -> int:
        return len(self.basis)

    def __iter__(self):
        return iter(self.basis)

    def gram(self) -> np.ndarray:
        return np.array([[a.hs_inner(b) for b in self.basis] for a in self.basis])

    def contains(self, op: PauliSum, tol: float = RANK_TOL) -> bool:
        """Whether the anti-Hermitian ``op`` lies in the real span."""
        norm = op.hs_norm()
        if norm == 0:
            return True
        resid = op
        for b in self.basis:
            resid = resid - b.hs_inner(resid) * b
        return resid.hs_norm() <= tol * norm


class _GramSchmidt:
    """Incremental orthonormalisation of real vectors over Pauli strings.

    A vector ``a`` stands for the anti-Hermitian operator ``i sum_P a_P P``;
    coordinates are stored scaled by ``2^{n/2}`` so the HS inner product is the
    plain dot product.
    """

    def __init__(self, n_qubits: int, tol: float = RANK_TOL):
        self.n = n_qubits
        self.tol = tol
        self.scale = 2.0 ** (n_qubits / 2)
        self.index: dict[PauliKey, int] = {}
        self.rows = np.zeros((8, 16))
        self.dim = 0

    def _dense(self, vec: Mapping[PauliKey, float]) -> np.ndarray:
        for k in vec:
            if k not in self.index:
                self.index[k] = len(self.index)
        if len(self.index) > self.rows.shape[1]:
            grow = max(len(self.index), 2 * self.rows.shape[1])
            self.rows = np.pad(self.rows, ((0, 0), (0, grow - self.rows.shape[1])))
        out = np.zeros(self.rows.shape[1])
        for k, v in vec.items():
            out[self.index[k]] = v
        return out

    def add(self, vec: Mapping[PauliKey, float]) -> bool:
        v = self._dense(vec) * self.scale
        norm = np.linalg.norm(v)
        if norm <= PRUNE_TOL:
            return False
        v /= norm
        q = self.rows[: self.dim]
        for _ in range(2):
            v -= q.T @ (q @ v)
        resid = np.linalg.norm(v)
        if resid <= self.tol:
            return False
        if self.dim == self.rows.shape[0]:
            self.rows = np.pad(self.rows, ((0, self.rows.shape[0]), (0, 0)))
        self.rows[self.dim] = v / resid
        self.dim += 1
        return True

    def span(self, capped: bool = False) -> OperatorSpan:
        keys = sorted(self.index, key=self.index.get)
        basis = []
        for row in self.rows[: self.dim]:
            terms = {k: 1j * row[self.index[k]] / self.scale for k in keys}
            basis.append(PauliSum(self.n, terms))
        return OperatorSpan(self.n, tuple(basis), capped)


def _real_coefficients(op: PauliSum) -> dict[PauliKey, float]:
    if not op.is_hermitian(1e-10):
        raise RotiqError("generators must be Hermitian (real Pauli coefficients)")
    return {k: c.real for k, c in op}


def _lie_bracket(a: Mapping[PauliKey, float], b: Mapping[PauliKey, float]) -> dict[PauliKey, float]:
    """Real coefficients of ``[iA, iB] = i C`` for Hermitian ``A``, ``B``."""
    acc: dict[PauliKey, float] = {}
    for (x1, z1), c1 in a.items():
        for (x2, z2), c2 in b.items():
            if _anticommute(x1, z1, x2, z2):
                # PQ = +-iR for anticommuting strings; -[A, B] = i * (-+2ab) R
                sign = -2.0 if _phase_exponent(x1, z1, x2, z2) == 1 else 2.0
                k = (x1 ^ x2, z1 ^ z2)
                acc[k] = acc.get(k, 0.0) + sign * c1 * c2
    return {k: v for k, v in acc.items() if abs(v) > PRUNE_TOL}


def _closure(generators: Sequence[PauliSum], dim_cap: int | None) -> tuple[OperatorSpan, int]:
    if not generators:
        raise EmptySpanError("no generators given")
    n = generators[0].n_qubits
    if any(g.n_qubits != n for g in generators):
        raise DimensionError("generators act on different qubit counts")
    cap = 4 ** n if dim_cap is None else dim_cap
    gs = _GramSchmidt(n)
    accepted: list[dict[PauliKey, float]] = []
    queue: list[int] = []

    def accept(vec: dict[PauliKey, float]) -> bool:
        if not gs.add(vec):
            return False
        # keep the sparse raw element, rescaled so nested brackets stay O(1)
        norm = math.sqrt(sum(v * v for v in vec.values()))
        accepted.append({k: v / norm for k, v in vec.items()})
        queue.append(len(accepted) - 1)
        return True

    for g in generators:
        accept(_real_coefficients(g))
    if not accepted:
        raise EmptySpanError("generators span the zero operator only")

    iterations = 0
    head = 0
    capped = False
    while head < len(queue) and not capped:
        a = accepted[queue[head]]
        head += 1
        iterations += 1
        j = 0
        while j < len(accepted):
            c = _lie_bracket(a, accepted[j])
            j += 1
            if c and accept(c) and gs.dim > cap:
                capped = True
                break
    return gs.span(capped), iterations


def lie_closure(generators: Sequence[PauliSum], dim_cap: int | None = None) -> OperatorSpan:
    """Orthonormal basis of the real Lie algebra generated by ``i * generators``.

    Newly accepted elements are bracketed against the whole current basis
    until no bracket leaves the span.  If the dimension passes ``dim_cap`` the
    search stops early and the returned span has ``capped=True``.
    """
    return _closure(generators, dim_cap)[0]


@dataclass(frozen=True)
class DlaReport:
    n_rad: int
    n_orb: int
    computed_dim: int
    formula_dim: int
    iterations: int
    matched: bool
    raw_dim: int
    phase_included: bool


def dla_formula(n_rad: int, n_orb: int) -> int:
    return 2 * 4 ** n_rad + n_orb - 1


def verify_dla(n_rad: int, n_orb: int, include_phase: bool = True,
               dim_cap: int | None = None) -> DlaReport:
    """Close the equivariant generator set and compare with ``2*4^n_rad + n_orb - 1``.

    ``raw_dim`` is the closure of the generator list as given.  With
    ``include_phase`` the global-phase direction ``iI`` is counted as part of
    the algebra (u(2^n) convention).  It is central, so this adds at most one
    dimension, and only when no radial CZ pair exists (``n_rad == 1``).
    """
    n = n_rad + n_orb
    gens = equivariant_generators(n_rad, n_orb)
    span, iterations = _closure(gens, dim_cap)
    if span.capped:
        raise ClosureCapExceeded(f"closure exceeded dim_cap={dim_cap}")
    raw = span.dim
    dim = raw
    if include_phase and not span.contains(1j * PauliSum.identity(n)):
        dim += 1
    formula = dla_formula(n_rad, n_orb)
    return DlaReport(n_rad, n_orb, dim, formula, iterations, dim == formula, raw, include_phase)


def _orthonormal_span(n: int, ops: Iterable[PauliSum]) -> OperatorSpan:
    gs = _GramSchmidt(n)
    for op in ops:
        gs.add(_real_coefficients(op))
    return gs.span()


def _radial_strings(n_rad: int) -> Iterable[PauliKey]:
    for x in range(1 << n_rad):
        for z in range(1 << n_rad):
            if x or z:
                yield x, z


def semisimple_basis(n_rad: int, n_orb: int, sign: str | None = None) -> OperatorSpan:
    """Orthonormal basis of the two su(2^n_rad) ideals.

    Elements are ``i 2^{-n/2} P (x) (I +- Z)/sqrt(2) (x) I...`` for every
    non-identity radial string ``P``; ``sign`` selects ``"+"`` or ``"-"``
    only, ``None`` returns both (plus block first).
    """
    if n_rad < 1 or n_orb < 1:
        raise ValueError("n_rad and n_orb must be at least 1")
    if sign not in (None, "+", "-"):
        raise ValueError("sign must be '+', '-' or None")
    n = n_rad + n_orb
    shift = n_orb
    zbit = 1 << (n_orb - 1)  # Z on the first orbital qubit
    norm = 2.0 ** (-n / 2) / math.sqrt(2)
    basis = []
    for s in ("+", "-"):
        if sign not in (None, s):
            continue
        zs = 1.0 if s == "+" else -1.0
        for x, z in _radial_strings(n_rad):
            basis.append(PauliSum(n, {(x << shift, z << shift): 1j * norm,
                                      (x << shift, (z << shift) | zbit): 1j * norm * zs}))
    return OperatorSpan(n, tuple(basis))


def center_basis(n_rad: int, n_orb: int) -> OperatorSpan:
    """Orthonormalised identity, Z on the first orbital qubit, and intra-orbital CZ generators."""
    if n_rad < 1 or n_orb < 1:
        raise ValueError("n_rad and n_orb must be at least 1")
    n = n_rad + n_orb
    ops = [PauliSum.identity(n), PauliSum.single(n, {n_rad: "Z"})]
    ops.extend(cz_generator(i, n) for i in range(n_rad, n - 1))
    return _orthonormal_span(n, ops)


# --------------------------------------------------------------------------
# purities and closed-form moments

Operand = Union[PauliSum, np.ndarray]


def _overlaps(operand: Operand, span: OperatorSpan) -> np.ndarray:
    """``tr(B_j^dagger X)`` for every basis element ``B_j``."""
    if isinstance(operand, PauliSum):
        if operand.n_qubits != span.n_qubits:
            raise DimensionError("operand and span act on different qubit counts")
        return np.array([b.hs_inner(operand) for b in span.basis], dtype=complex)
    arr = np.asarray(operand)
    dim = 1 << span.n_qubits
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise DimensionError(f"state has {arr.shape[0]} amplitudes, span needs {dim}")
        keys = {k for b in span.basis for k, _ in b}
        ev = pauli_expectations(arr, keys)
        return np.array([sum(c.conjugate() * ev[k] for k, c in b) for b in span.basis], dtype=complex)
    if arr.shape != (dim, dim):
        raise DimensionError(f"density matrix shape {arr.shape} does not match {dim}x{dim}")
    return np.array([np.trace(b.to_matrix().conj().T @ arr) for b in span.basis], dtype=complex)


def purity(operand: Operand, span: OperatorSpan) -> float:
    """Squared HS norm of the projection of ``operand`` onto ``span``.

    ``operand`` may be a PauliSum, a statevector (treated as ``|psi><psi|``)
    or a dense density matrix.
    """
    c = _overlaps(operand, span)
    return float(np.sum(np.abs(c) ** 2))


@dataclass(frozen=True)
class MomentPrediction:
    mean: float
    variance: float
    semisimple_purity: float


def z_observable(n: int, qubit: int) -> PauliSum:
    return PauliSum.single(n, {qubit: "Z"})


def predicted_moments(state: Operand, y: int, n_rad: int, n_orb: int) -> MomentPrediction:
    """Closed-form mean and variance of the loss ``-<Z_y>`` over a deep random equivariant circuit.

    ``y`` is the 1-based class index, measured on radial qubit ``y - 1``.
    The variance is ``sum_{+-} P_+-(rho) P_+-(O) / dim g_+-`` with
    ``dim g_+- = 4^n_rad - 1``, i.e. ``2^{n-1} / (4^n_rad - 1) * P_s(rho)``.
    """
    if not 1 <= y <= n_rad:
        raise RotiqError(f"class {y} is not measured on the radial register (n_rad={n_rad})")
    n = n_rad + n_orb
    obs = -1.0 * z_observable(n, y - 1)
    centre = center_basis(n_rad, n_orb)
    mean = -np.sum(_overlaps(state, centre) * _overlaps(obs, centre)).real
    variance = 0.0
    ps = 0.0
    for s in ("+", "-"):
        g = semisimple_basis(n_rad, n_orb, s)
        p_rho = purity(state, g)
        variance += p_rho * purity(obs, g) / g.dim
        ps += p_rho
    return MomentPrediction(float(mean), float(variance), float(ps))


# --------------------------------------------------------------------------
# line-oriented text format: one operator per line, ``coeff*STRING`` terms

def _format_coeff(c: complex) -> str:
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return f"{c.imag!r}j"
    return f"({c.real!r}{c.imag:+}j)"


def format_operator(op: PauliSum) -> str:
    items = sorted(op.labelled_terms().items())
    return " ".join(f"{_format_coeff(c)}*{label}" for label, c in items)


def parse_operator(line: str) -> PauliSum:
    terms = []
    for tok in line.split():
        coeff, sep, label = tok.rpartition("*")
        if not sep:
            raise ValueError(f"malformed term {tok!r}; expected coeff*STRING")
        terms.append((label, complex(coeff)))
    return PauliSum.from_labels(terms)


def write_operators(path: str | Path, ops: Iterable[PauliSum], header: str = "") -> None:
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    lines.extend(format_operator(op) for op in ops)
    Path(path).write_text("\n".join(lines) + "\n")


def read_operators(path: str | Path) -> list[PauliSum]:
    ops = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            ops.append(parse_operator(line))
    return ops
