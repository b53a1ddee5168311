import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

# Registro denso: como máximo 5 partículas (|ψ⟩12 ⊗ |φ⟩345)
MAX_QUBITS = int(os.getenv("TELECHAN_MAX_QUBITS", "5"))

# Debajo de este umbral una rama de proyección se considera vacía
ZERO_PROBABILITY = float(os.getenv("TELECHAN_ZERO_PROBABILITY", "1e-24"))

NORM_TOLERANCE = 1e-12


class RegisterSizeError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PureState:
    """
    Vector de amplitudes sobre n qubits.
    La partícula i (1..n) ocupa el bit (n - i) del índice: la partícula 1 es el bit más significativo.
    """

    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise RegisterSizeError(
                f"Registro de {self.n_qubits} qubits fuera de rango [1, {MAX_QUBITS}]"
            )
        amps = _frozen(self.amplitudes)
        if amps.shape != (2 ** self.n_qubits,):
            raise ShapeError(
                f"Se esperaban {2 ** self.n_qubits} amplitudes, llegaron {amps.shape[0]}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, values: Sequence[complex]) -> "PureState":
        amps = np.asarray(values, dtype=np.complex128).reshape(-1)
        n = int(round(np.log2(max(amps.size, 1))))
        if amps.size < 2 or 2 ** n != amps.size:
            raise ShapeError(f"Longitud {amps.size} no es potencia de 2")
        return cls(n, amps)

    @classmethod
    def basis(cls, bits: str) -> "PureState":
        """Estado de la base canónica, p.ej. basis("010") = |010⟩."""
        if not bits or any(b not in "01" for b in bits):
            raise ShapeError(f"Etiqueta de base inválida: {bits!r}")
        amps = np.zeros(2 ** len(bits), dtype=np.complex128)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "PureState":
        nrm = self.norm()
        if nrm == 0.0:
            raise NormalizationError("No se puede normalizar el vector nulo")
        return PureState(self.n_qubits, self.amplitudes / nrm)

    def inner(self, other: "PureState") -> complex:
        """⟨self|other⟩"""
        if other.n_qubits != self.n_qubits:
            raise ShapeError(
                f"Producto interno entre {self.n_qubits} y {other.n_qubits} qubits"
            )
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def is_normalized(self, tol: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def allclose(self, other: "PureState", atol: float = 1e-12) -> bool:
        return self.n_qubits == other.n_qubits and bool(
            np.allclose(self.amplitudes, other.amplitudes, rtol=0.0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class LinearOp:
    n_qubits: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.complex128)
        dim = 2 ** self.n_qubits
        if mat.shape != (dim, dim):
            raise ShapeError(f"Operador de {self.n_qubits} qubits con forma {mat.shape}")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    def is_unitary(self, tol: float = 1e-12) -> bool:
        dim = self.matrix.shape[0]
        return bool(np.allclose(self.matrix.conj().T @ self.matrix, np.eye(dim), rtol=0.0, atol=tol))

    def dagger(self) -> "LinearOp":
        return LinearOp(self.n_qubits, self.matrix.conj().T)

    def __matmul__(self, other: "LinearOp") -> "LinearOp":
        if other.n_qubits != self.n_qubits:
            raise ShapeError("Composición de operadores de distinto tamaño")
        return LinearOp(self.n_qubits, self.matrix @ other.matrix)


@dataclass(frozen=True, eq=False)
class Projection:
    """
    Resultado de proyectar un subconjunto de partículas sobre un estado.
    - raw: amplitudes sin normalizar de las partículas restantes
    - residual: None cuando la rama tiene probabilidad nula
    """

    raw: np.ndarray = field(repr=False)
    probability: float
    residual: Optional[PureState]

    @property
    def is_null(self) -> bool:
        return self.residual is None


def tensor(a: PureState, b: PureState) -> PureState:
    n = a.n_qubits + b.n_qubits
    if n > MAX_QUBITS:
        raise RegisterSizeError(f"El producto tensorial ocuparía {n} qubits (máximo {MAX_QUBITS})")
    return PureState(n, np.kron(a.amplitudes, b.amplitudes))


def _check_targets(targets: Sequence[int], n_qubits: int) -> List[int]:
    axes = [int(t) - 1 for t in targets]
    if len(set(axes)) != len(axes):
        raise ShapeError(f"Qubits objetivo repetidos: {list(targets)}")
    for t in targets:
        if not 1 <= int(t) <= n_qubits:
            raise ShapeError(f"Qubit {t} fuera del registro [1, {n_qubits}]")
    return axes


def apply(op: LinearOp, targets: Sequence[int], s: PureState) -> PureState:
    """Aplica op sobre las partículas targets (el primer objetivo es el bit más significativo de op)."""
    axes = _check_targets(targets, s.n_qubits)
    k = len(axes)
    if op.n_qubits != k:
        raise ShapeError(f"Operador de {op.n_qubits} qubits aplicado sobre {k} objetivos")

    n = s.n_qubits
    state = s.amplitudes.reshape([2] * n)
    gate = op.matrix.reshape([2] * (2 * k))
    out = np.tensordot(gate, state, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return PureState(n, out.reshape(2 ** n))


def project(s: PureState, targets: Sequence[int], onto: PureState) -> Projection:
    axes = _check_targets(targets, s.n_qubits)
    k = len(axes)
    if onto.n_qubits != k:
        raise ShapeError(f"Estado de {onto.n_qubits} qubits proyectado sobre {k} objetivos")
    if k >= s.n_qubits:
        raise ShapeError("La proyección debe dejar al menos una partícula libre")
    if not onto.is_normalized():
        raise NormalizationError("El estado sobre el que se proyecta no está normalizado")

    n = s.n_qubits
    state = np.moveaxis(s.amplitudes.reshape([2] * n), axes, list(range(k)))
    raw = onto.amplitudes.conj() @ state.reshape(2 ** k, -1)
    probability = float(np.vdot(raw, raw).real)

    if probability <= ZERO_PROBABILITY:
        return Projection(raw=_frozen(raw), probability=0.0, residual=None)

    residual = PureState(n - k, raw / np.sqrt(probability))
    return Projection(raw=_frozen(raw), probability=min(probability, 1.0), residual=residual)
