"""Circuit builders for the equivariant and generic classifiers, prediction and loss."""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, DimensionError
from .pauli import PauliSum, z_observable
from .sim import Circuit, Gate, GateKind, expectation, n_qubits_of, run, z_expectations


class Architecture(str, enum.Enum):
    EQUIVARIANT = "EQUIVARIANT"
    GENERIC = "GENERIC"


@dataclass(frozen=True)
class ModelConfig:
    n_rad: int
    n_orb: int
    layers: int
    architecture: Architecture = Architecture.EQUIVARIANT
    n_classes: int = 1
    seed: int = 0
    orbital_rz: bool = False
    full_image: bool = False

    def __post_init__(self):
        object.__setattr__(self, "architecture", Architecture(self.architecture))
        if self.n_rad < 1 or self.n_orb < 1:
            raise ConfigError("n_rad and n_orb must be at least 1")
        if self.layers < 1:
            raise ConfigError("layers must be at least 1")
        if self.n_classes < 1:
            raise ConfigError("n_classes must be at least 1")
        if self.architecture is Architecture.EQUIVARIANT:
            if self.n_classes > self.n_rad:
                raise ConfigError(
                    f"equivariant model measures radial qubits only: n_classes={self.n_classes} > n_rad={self.n_rad}")
            if self.full_image:
                raise ConfigError("full-image encoding breaks equivariance; generic models only")
        elif self.n_classes > self.n_qubits:
            raise ConfigError(f"n_classes={self.n_classes} exceeds {self.n_qubits} qubits")
        if self.orbital_rz and self.architecture is not Architecture.EQUIVARIANT:
            raise ConfigError("orbital_rz applies to the equivariant model only")

    @property
    def n_qubits(self) -> int:
        return self.n_rad + self.n_orb

    @property
    def n_params(self) -> int:
        if self.architecture is Architecture.GENERIC:
            return 3 * self.n_qubits * self.layers
        return (3 * self.n_rad + (self.n_orb if self.orbital_rz else 0)) * self.layers

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["architecture"] = self.architecture.value
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


def _rotation_block(qubits: Sequence[int], slot: int) -> tuple[list[Gate], int]:
    gates = []
    for q in qubits:
        for kind in (GateKind.RZ, GateKind.RY, GateKind.RZ):
            gates.append(Gate(kind, (q,), slot))
            slot += 1
    return gates, slot


def _cz_chain(first: int, last: int) -> list[Gate]:
    return [Gate(GateKind.CZ, (q, q + 1)) for q in range(first, last)]


def build_equivariant(config: ModelConfig) -> Circuit:
    """Inverse QFT on the orbital register, then ``layers`` x (RZ-RY-RZ on radial
    qubits, CZ chain over the radial pairs, CZ chain from the last radial qubit
    through the orbital register)."""
    if config.architecture is not Architecture.EQUIVARIANT:
        raise ConfigError("build_equivariant needs an EQUIVARIANT config")
    n, nr = config.n_qubits, config.n_rad
    gates = [Gate(GateKind.QFT_DAG, tuple(range(nr, n)))]
    slot = 0
    for _ in range(config.layers):
        block, slot = _rotation_block(range(nr), slot)
        gates += block
        if config.orbital_rz:
            for q in range(nr, n):
                gates.append(Gate(GateKind.RZ, (q,), slot))
                slot += 1
        gates += _cz_chain(0, nr - 1)
        gates += _cz_chain(nr - 1, n - 1)
    return Circuit(n, tuple(gates), slot)


def build_generic(config: ModelConfig) -> Circuit:
    if config.architecture is not Architecture.GENERIC:
        raise ConfigError("build_generic needs a GENERIC config")
    n = config.n_qubits
    gates: list[Gate] = []
    slot = 0
    for _ in range(config.layers):
        block, slot = _rotation_block(range(n), slot)
        gates += block
        gates += _cz_chain(0, n - 1)
    return Circuit(n, tuple(gates), slot)


def build_circuit(config: ModelConfig) -> Circuit:
    if config.architecture is Architecture.EQUIVARIANT:
        return build_equivariant(config)
    return build_generic(config)


def class_qubits(config: ModelConfig) -> list[int]:
    """Class ``j`` (1-based) is read from ``Z`` on qubit ``j - 1``."""
    return list(range(config.n_classes))


def class_observables(config: ModelConfig) -> list[PauliSum]:
    return [z_observable(config.n_qubits, q) for q in class_qubits(config)]


def init_params(config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 2 * np.pi, size=config.n_params)


def _measure(state: np.ndarray, observables: Sequence[PauliSum]) -> np.ndarray:
    qubits = []
    for obs in observables:
        terms = obs.terms
        if len(terms) == 1:
            (x, z), c = next(iter(terms.items()))
            if x == 0 and c == 1 and z.bit_count() == 1:
                qubits.append(obs.n_qubits - z.bit_length())
                continue
        qubits = None
        break
    if qubits is not None:
        return z_expectations(state, qubits)
    return np.stack([np.asarray(expectation(state, o)) for o in observables], axis=-1)


def predict(circuit: Circuit, state: np.ndarray, params: np.ndarray,
            observables: Sequence[PauliSum]) -> tuple[int, np.ndarray]:
    """Argmax class (1-based, ties to the lowest index) and all expectations."""
    if n_qubits_of(state) != circuit.n_qubits:
        raise DimensionError("input state does not match the circuit")
    values = _measure(run(circuit, state, params), observables)
    return int(np.argmax(values)) + 1, values


def predict_batch(circuit: Circuit, states: np.ndarray, params: np.ndarray,
                  observables: Sequence[PauliSum]) -> np.ndarray:
    values = _measure(run(circuit, states, params), observables)
    return np.argmax(values, axis=-1) + 1


def loss(circuit: Circuit, state: np.ndarray, params: np.ndarray, y: int,
         n_classes: int | None = None) -> float:
    """``-<Z_y>`` after the circuit, ``y`` being the 1-based true class."""
    limit = circuit.n_qubits if n_classes is None else n_classes
    if not 1 <= y <= limit:
        raise ValueError(f"class {y} outside 1..{limit}")
    out = run(circuit, state, params)
    return -float(z_expectations(out, [y - 1])[..., 0])
