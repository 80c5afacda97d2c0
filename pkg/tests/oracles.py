"""Independent dense-matrix reference implementations used by the tests."""
from functools import reduce

import numpy as np
from scipy.linalg import expm

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_string(label: str) -> np.ndarray:
    return reduce(np.kron, [PAULI[c] for c in label])


def dense_sum(terms: dict) -> np.ndarray:
    return sum(c * dense_string(lab) for lab, c in terms.items())


def single(n: int, q: int, sym: str) -> np.ndarray:
    return dense_string("".join(sym if i == q else "I" for i in range(n)))


def rotation(kind: str, theta: float) -> np.ndarray:
    return expm(-0.5j * theta * PAULI[kind])


def embed(n: int, q: int, m: np.ndarray) -> np.ndarray:
    """``m`` on qubit ``q`` (qubit 0 is the most significant bit)."""
    return reduce(np.kron, [m if i == q else np.eye(2) for i in range(n)])


def cz_dense(n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(1 << n)
    both = ((idx >> (n - 1 - a)) & 1) & ((idx >> (n - 1 - b)) & 1)
    return np.diag(1.0 - 2.0 * both).astype(complex)


def dft(count: int) -> np.ndarray:
    size = 1 << count
    j, k = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    return np.exp(2j * np.pi * j * k / size) / np.sqrt(size)


def dense_closure_dim(generators: list[np.ndarray], tol: float = 1e-8) -> int:
    """Dimension of the real Lie algebra generated by ``i * g`` for each dense ``g``."""
    basis: list[np.ndarray] = []

    def vec(m):
        return np.concatenate([m.real.ravel(), m.imag.ravel()])

    def add(m) -> bool:
        v = vec(m)
        for b in basis:
            v = v - (b @ v) * b
        nrm = np.linalg.norm(v)
        if nrm > tol:
            basis.append(v / nrm)
            mats.append(m / np.linalg.norm(vec(m)))
            return True
        return False

    mats: list[np.ndarray] = []
    frontier = [1j * g for g in generators if add(1j * g)]
    while frontier:
        new = []
        for a in frontier:
            for b in list(mats):
                c = a @ b - b @ a
                if np.linalg.norm(c) > tol and add(c):
                    new.append(mats[-1])
        frontier = new
    return len(basis)


def dense_purity(op: np.ndarray, basis: list[np.ndarray]) -> float:
    return float(sum(abs(np.trace(b.conj().T @ op)) ** 2 for b in basis))
