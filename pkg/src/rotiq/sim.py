"""Dense statevector simulator.

States are complex numpy arrays whose last axis has length ``2**n``; any
leading axes are batch axes and broadcast against batched parameters.  Qubit
0 is the most significant bit of the basis index.  Rotations follow
``R_P(theta) = exp(-i theta P / 2)`` so the two-term shift rule is exact.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Sequence

import numpy as np

from .errors import DimensionError, RotiqError
from .pauli import PauliSum, pauli_expectations


class GateKind(str, enum.Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CZ = "CZ"
    QFT = "QFT"
    QFT_DAG = "QFT_DAG"
    FIXED_UNITARY = "FIXED_UNITARY"


ROTATIONS = (GateKind.RX, GateKind.RY, GateKind.RZ)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    targets: tuple[int, ...]
    slot: int | None = None
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        k, t = self.kind, self.targets
        if k in ROTATIONS:
            if len(t) != 1 or self.slot is None:
                raise RotiqError(f"{k.value} needs one target and a parameter slot")
        elif self.slot is not None:
            raise RotiqError(f"{k.value} gates are not parameterised")
        if k is GateKind.CZ and (len(t) != 2 or t[0] == t[1]):
            raise RotiqError("CZ needs two distinct targets")
        if k in (GateKind.QFT, GateKind.QFT_DAG):
            if not t or list(t) != list(range(t[0], t[0] + len(t))):
                raise RotiqError("QFT targets must be a contiguous ascending range")
        if k is GateKind.FIXED_UNITARY:
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (1 << len(t), 1 << len(t)):
                raise RotiqError("fixed unitary shape does not match its targets")
            object.__setattr__(self, "matrix", m)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value, "targets": list(self.targets), "slot": self.slot}
        if self.matrix is not None:
            d["matrix"] = [[[v.real, v.imag] for v in row] for row in self.matrix]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Gate":
        m = d.get("matrix")
        if m is not None:
            m = np.array([[complex(re, im) for re, im in row] for row in m])
        return cls(GateKind(d["kind"]), tuple(d["targets"]), d.get("slot"), m)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...]
    n_params: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        used = set()
        for g in self.gates:
            if any(not 0 <= t < self.n_qubits for t in g.targets):
                raise DimensionError(f"gate {g.kind.value} targets {g.targets} outside {self.n_qubits} qubits")
            if g.slot is not None:
                if not 0 <= g.slot < self.n_params:
                    raise RotiqError(f"slot {g.slot} outside [0, {self.n_params})")
                used.add(g.slot)
        if len(used) != self.n_params:
            raise RotiqError("every parameter slot must be referenced by a gate")

    @property
    def parameterized(self) -> list[int]:
        """Indices of gates that carry a parameter slot, in circuit order."""
        return [i for i, g in enumerate(self.gates) if g.slot is not None]

    @property
    def slots(self) -> np.ndarray:
        return np.array([g.slot for g in self.gates if g.slot is not None], dtype=int)

    def to_dict(self) -> dict[str, Any]:
        return {"n_qubits": self.n_qubits, "gates": [g.to_dict() for g in self.gates],
                "n_params": self.n_params}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Circuit":
        return cls(int(d["n_qubits"]), tuple(Gate.from_dict(g) for g in d["gates"]), int(d["n_params"]))


def n_qubits_of(state: np.ndarray) -> int:
    dim = np.shape(state)[-1]
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise DimensionError(f"state length {dim} is not a power of two")
    return n


def zero_state(n: int) -> np.ndarray:
    return basis_state(n, 0)


def basis_state(n: int, index: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[index] = 1.0
    return psi


def norm(state: np.ndarray) -> np.ndarray:
    return np.linalg.norm(state, axis=-1)


# --------------------------------------------------------------------------
# gate kernels

def _rotation_matrix(kind: GateKind, theta: np.ndarray) -> np.ndarray:
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    out = np.empty(np.shape(theta) + (2, 2), dtype=complex)
    if kind is GateKind.RX:
        out[..., 0, 0] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
        out[..., 1, 1] = c
    elif kind is GateKind.RY:
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
    else:
        out[..., 0, 0] = np.exp(-0.5j * theta)
        out[..., 0, 1] = 0
        out[..., 1, 0] = 0
        out[..., 1, 1] = np.exp(0.5j * theta)
    return out


def _apply_1q(state: np.ndarray, q: int, n: int, m: np.ndarray) -> np.ndarray:
    """Apply (possibly batched) 2x2 matrices ``m`` of shape ``(..., 2, 2)`` to qubit ``q``."""
    s = state.reshape(state.shape[:-1] + (1 << q, 2, 1 << (n - q - 1)))
    a0 = s[..., 0, :]
    a1 = s[..., 1, :]
    m = m[..., None, None, :, :]
    out = np.stack([m[..., 0, 0] * a0 + m[..., 0, 1] * a1,
                    m[..., 1, 0] * a0 + m[..., 1, 1] * a1], axis=-2)
    return out.reshape(out.shape[:-3] + (1 << n,))


def _apply_rz(state: np.ndarray, q: int, n: int, theta: np.ndarray) -> np.ndarray:
    s = state.reshape(state.shape[:-1] + (1 << q, 2, 1 << (n - q - 1)))
    ph = np.exp(-0.5j * np.asarray(theta))[..., None, None]
    out = np.stack([s[..., 0, :] * ph, s[..., 1, :] * np.conj(ph)], axis=-2)
    return out.reshape(out.shape[:-3] + (1 << n,))


@lru_cache(maxsize=256)
def _cz_signs(n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(1 << n)
    both = ((idx >> (n - 1 - a)) & 1) & ((idx >> (n - 1 - b)) & 1)
    return 1.0 - 2.0 * both


@lru_cache(maxsize=64)
def dft_matrix(count: int, inverse: bool = False) -> np.ndarray:
    """``F[j, k] = w^{jk} / sqrt(N)`` with ``w = exp(2 pi i / N)``; conjugated when inverse."""
    size = 1 << count
    jk = np.outer(np.arange(size), np.arange(size)) % size
    f = np.exp(2j * np.pi * jk / size) / math.sqrt(size)
    return f.conj() if inverse else f


def apply_qft(state: np.ndarray, first: int, count: int, inverse: bool = False) -> np.ndarray:
    """DFT on the sub-register ``first .. first + count - 1`` (MSB-first index)."""
    state = np.asarray(state)
    n = n_qubits_of(state)
    if count < 1 or first < 0 or first + count > n:
        raise DimensionError(f"QFT range [{first}, {first + count}) outside {n} qubits")
    s = state.reshape(state.shape[:-1] + (1 << first, 1 << count, 1 << (n - first - count)))
    out = dft_matrix(count, inverse) @ s
    return out.reshape(state.shape)


def _apply_unitary(state: np.ndarray, targets: Sequence[int], n: int, u: np.ndarray) -> np.ndarray:
    batch = state.shape[:-1]
    k = len(targets)
    t = state.reshape(batch + (2,) * n)
    axes = [len(batch) + q for q in targets]
    t = np.moveaxis(t, axes, range(-k, 0))
    moved = t.shape
    t = t.reshape(moved[:-k] + (1 << k,)) @ u.T
    t = np.moveaxis(t.reshape(moved), range(-k, 0), axes)
    return t.reshape(batch + (1 << n,))


def _apply(state: np.ndarray, gate: Gate, n: int, theta: Any = None) -> np.ndarray:
    kind = gate.kind
    if kind is GateKind.RZ:
        return _apply_rz(state, gate.targets[0], n, theta)
    if kind in ROTATIONS:
        return _apply_1q(state, gate.targets[0], n, _rotation_matrix(kind, np.asarray(theta, dtype=float)))
    if kind is GateKind.CZ:
        return state * _cz_signs(n, *gate.targets)
    if kind in (GateKind.QFT, GateKind.QFT_DAG):
        return apply_qft(state, gate.targets[0], len(gate.targets), kind is GateKind.QFT_DAG)
    return _apply_unitary(state, gate.targets, n, gate.matrix)


def apply_gate(state: np.ndarray, gate: Gate, params: np.ndarray | Sequence[float] = ()) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    n = n_qubits_of(state)
    if any(not 0 <= t < n for t in gate.targets):
        raise DimensionError(f"targets {gate.targets} outside {n} qubits")
    theta = None
    if gate.slot is not None:
        params = np.asarray(params, dtype=float)
        if gate.slot >= params.shape[-1]:
            raise RotiqError(f"slot {gate.slot} outside parameter vector of length {params.shape[-1]}")
        theta = params[..., gate.slot]
    return _apply(state, gate, n, theta)


# --------------------------------------------------------------------------
# circuits

def occurrence_angles(circuit: Circuit, params: np.ndarray) -> np.ndarray:
    """Per-occurrence angles ``(..., m)`` for the ``m`` parameterised gates."""
    params = np.asarray(params, dtype=float)
    if params.shape[-1:] != (circuit.n_params,):
        raise DimensionError(f"expected {circuit.n_params} parameters, got shape {params.shape}")
    return params[..., circuit.slots]


@dataclass(frozen=True)
class _Step:
    """One pass over the state: a fused run of rotations on one qubit, a fused
    run of CZ gates, or a single other gate."""
    kind: str  # "rot", "diag" or "gate"
    qubit: int = -1
    rotations: tuple[tuple[GateKind, int], ...] = ()  # (kind, occurrence index)
    signs: np.ndarray | None = None
    gate: Gate | None = None


def _plan(circuit: Circuit) -> list[_Step]:
    steps: list[_Step] = []
    n = circuit.n_qubits
    j = 0
    for g in circuit.gates:
        last = steps[-1] if steps else None
        if g.kind in ROTATIONS:
            q = g.targets[0]
            if last is not None and last.kind == "rot" and last.qubit == q:
                steps[-1] = _Step("rot", q, last.rotations + ((g.kind, j),))
            else:
                steps.append(_Step("rot", q, ((g.kind, j),)))
            j += 1
        elif g.kind is GateKind.CZ:
            signs = _cz_signs(n, *g.targets)
            if last is not None and last.kind == "diag":
                steps[-1] = _Step("diag", signs=last.signs * signs)
            else:
                steps.append(_Step("diag", signs=signs))
        else:
            steps.append(_Step("gate", gate=g))
    return steps


def _fused_matrix(step: _Step, angles: np.ndarray) -> np.ndarray:
    """Product of the step's rotation matrices, batched over ``angles[..., m]``."""
    out = None
    for kind, j in step.rotations:
        r = _rotation_matrix(kind, angles[..., j])
        out = r if out is None else r @ out
    return out


def _apply_1q_inplace(state: np.ndarray, q: int, n: int, m: np.ndarray) -> None:
    """``state[..., :] <- m`` on qubit ``q``; ``m`` has the batch shape of ``state`` plus ``(2, 2)``."""
    s = state.reshape(state.shape[:-1] + (1 << q, 2, 1 << (n - q - 1)))
    m = m[..., None, None, :, :]
    a0 = s[..., 0, :].copy()
    a1 = s[..., 1, :]
    s[..., 0, :] = m[..., 0, 0] * a0 + m[..., 0, 1] * a1
    s[..., 1, :] = m[..., 1, 0] * a0 + m[..., 1, 1] * a1


def _prepare(circuit: Circuit, state: np.ndarray, angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    state = np.asarray(state, dtype=complex)
    n = n_qubits_of(state)
    if n != circuit.n_qubits:
        raise DimensionError(f"circuit has {circuit.n_qubits} qubits, state has {n}")
    angles = np.asarray(angles, dtype=float)
    if angles.shape[-1:] != (len(circuit.slots),):
        raise DimensionError(f"expected {len(circuit.slots)} occurrence angles, got shape {angles.shape}")
    batch = np.broadcast_shapes(state.shape[:-1], angles.shape[:-1])
    state = np.array(np.broadcast_to(state, batch + state.shape[-1:]))
    angles = np.broadcast_to(angles, batch + angles.shape[-1:])
    return state, angles


def run_angles(circuit: Circuit, state: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Run with explicit per-occurrence angles; batch axes of state and angles broadcast."""
    state, angles = _prepare(circuit, state, angles)
    n = circuit.n_qubits
    for step in _plan(circuit):
        if step.kind == "rot":
            _apply_1q_inplace(state, step.qubit, n, _fused_matrix(step, angles))
        elif step.kind == "diag":
            state *= step.signs
        else:
            state = _apply(state, step.gate, n)
    return state


def run(circuit: Circuit, state: np.ndarray, params: np.ndarray) -> np.ndarray:
    return run_angles(circuit, state, occurrence_angles(circuit, params))


def circuit_unitary(circuit: Circuit, params: np.ndarray) -> np.ndarray:
    """Dense unitary, column ``k`` being the image of ``|k>``; for tests at small n."""
    eye = np.eye(1 << circuit.n_qubits, dtype=complex)
    return run(circuit, eye, params).T


# --------------------------------------------------------------------------
# observables and gradients

def expectation(state: np.ndarray, observable: PauliSum) -> np.ndarray | float:
    """Real ``<psi|O|psi>`` for a Hermitian Pauli sum; batched over leading axes."""
    state = np.asarray(state)
    if n_qubits_of(state) != observable.n_qubits:
        raise DimensionError("observable and state act on different qubit counts")
    if not observable.is_hermitian(1e-12):
        raise RotiqError("observable must be Hermitian (real coefficients)")
    ev = pauli_expectations(state, [k for k, _ in observable])
    total = sum((c.real * ev[k] for k, c in observable), np.zeros(state.shape[:-1], dtype=complex))
    out = np.real(total)
    return float(out) if out.ndim == 0 else out


def z_expectations(state: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """``<Z_q>`` for each listed qubit; shape ``(..., len(qubits))``."""
    state = np.asarray(state)
    n = n_qubits_of(state)
    probs = np.abs(state) ** 2
    idx = np.arange(1 << n)
    signs = np.stack([1.0 - 2.0 * ((idx >> (n - 1 - q)) & 1) for q in qubits], axis=-1)
    return probs @ signs


def _check_shiftable(circuit: Circuit) -> None:
    for g in circuit.gates:
        if g.slot is not None and g.kind not in ROTATIONS:
            raise RotiqError(f"{g.kind.value} gates cannot be differentiated by parameter shift")


def shift_rule_occurrences(circuit: Circuit, state: np.ndarray, params: np.ndarray,
                           measure, occurrences: Sequence[int] | None = None) -> np.ndarray:
    """``(E(+pi/2) - E(-pi/2)) / 2`` per parameterised-gate occurrence.

    ``measure`` maps output states ``(..., 2^n)`` to values.  The returned
    array has the occurrence axis first, followed by the batch axes of
    ``state``/``params`` and any trailing axes of ``measure``.

    All shifted circuits advance together as one stacked batch.  The two
    copies for occurrence ``j`` split off the unshifted run just before the
    gate that carries ``j``, so the shared prefix is simulated once.
    """
    _check_shiftable(circuit)
    angles = occurrence_angles(circuit, params)
    m = angles.shape[-1]
    occ = np.arange(m) if occurrences is None else np.asarray(occurrences, dtype=int)
    if occ.size and (occ.min() < 0 or occ.max() >= m):
        raise DimensionError(f"occurrence index outside [0, {m})")
    k = len(occ)
    base, angles = _prepare(circuit, state, angles)
    n = circuit.n_qubits
    # row 0 is the unshifted run; occurrence of rank r (in gate order) owns
    # rows 1 + 2r (+pi/2) and 2 + 2r (-pi/2), so live rows are always a prefix
    order = np.argsort(occ, kind="stable")
    rank_of = {int(occ[i]): r for r, i in enumerate(order)}
    stack = np.empty((2 * k + 1,) + base.shape, dtype=complex)
    stack[0] = base
    live = 1
    for step in _plan(circuit):
        if step.kind == "rot":
            mine = [(rank_of[j], j) for _, j in step.rotations if j in rank_of]
            for r, _ in mine:
                stack[1 + 2 * r] = stack[0]
                stack[2 + 2 * r] = stack[0]
                live = max(live, 3 + 2 * r)
            shifted = np.broadcast_to(angles, (live,) + angles.shape).copy()
            for r, j in mine:
                shifted[1 + 2 * r, ..., j] += np.pi / 2
                shifted[2 + 2 * r, ..., j] -= np.pi / 2
            _apply_1q_inplace(stack[:live], step.qubit, n, _fused_matrix(step, shifted))
        elif step.kind == "diag":
            stack[:live] *= step.signs
        else:
            stack[:live] = _apply(stack[:live], step.gate, n)
    vals = np.asarray(measure(stack[1:]))
    rank = np.array([rank_of[int(j)] for j in occ], dtype=int)
    return (vals[2 * rank] - vals[2 * rank + 1]) / 2


def _accumulate(circuit: Circuit, per_occurrence: np.ndarray) -> np.ndarray:
    out = np.zeros(per_occurrence.shape[:-1] + (circuit.n_params,))
    for j, slot in enumerate(circuit.slots):
        out[..., slot] += per_occurrence[..., j]
    return out


def parameter_shift_grad(circuit: Circuit, state: np.ndarray, params: np.ndarray,
                         observable: PauliSum) -> np.ndarray:
    """Exact gradient of ``<O>``; gates sharing a slot add their shift terms."""
    per = shift_rule_occurrences(circuit, state, params, lambda s: expectation(s, observable))
    return _accumulate(circuit, np.moveaxis(per, 0, -1))


def finite_diff_grad(circuit: Circuit, state: np.ndarray, params: np.ndarray,
                     observable: PauliSum, h: float = 1e-5) -> np.ndarray:
    if h <= 0:
        raise ValueError("step h must be positive")
    params = np.asarray(params, dtype=float)
    grad = np.zeros(circuit.n_params)
    for k in range(circuit.n_params):
        e = np.zeros_like(params)
        e[k] = h
        plus = expectation(run(circuit, state, params + e), observable)
        minus = expectation(run(circuit, state, params - e), observable)
        grad[k] = (plus - minus) / (2 * h)
    return grad
