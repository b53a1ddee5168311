import itertools
import re
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Iterator, Tuple

import numpy as np

from statevec import LinearOp, NormalizationError, PureState

SQRT1_2 = 1.0 / np.sqrt(2.0)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
IDENTITY = np.eye(2, dtype=np.complex128)

# Orden literal de la familia de canales: a|000⟩ + b|100⟩ + c|010⟩ + d|001⟩ + e|110⟩ + f|101⟩ + g|011⟩ + h|111⟩
COEFF_NAMES = "abcdefgh"
CHANNEL_BASIS = ("000", "100", "010", "001", "110", "101", "011", "111")

_CODE_TO_COEFF = {"+": 1, "0": 0, "-": -1}
_COEFF_TO_CODE = {1: "+", 0: "0", -1: "-"}
_KET_RE = re.compile(r"([+\-−]?)\s*\|([01]{3})⟩")


class InvalidChannelError(ValueError):
    pass


class BellLabel(Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @property
    def symbol(self) -> str:
        return {"phi+": "φ+", "phi-": "φ-", "psi+": "ψ+", "psi-": "ψ-"}[self.value]


_BELL_AMPLITUDES = {
    BellLabel.PHI_PLUS: (1, 0, 0, 1),
    BellLabel.PHI_MINUS: (1, 0, 0, -1),
    BellLabel.PSI_PLUS: (0, 1, 1, 0),
    BellLabel.PSI_MINUS: (0, 1, -1, 0),
}


def bell_state(label: BellLabel) -> PureState:
    return PureState(2, np.array(_BELL_AMPLITUDES[label], dtype=np.complex128) * SQRT1_2)


def bell_basis() -> Tuple[PureState, ...]:
    return tuple(bell_state(label) for label in BellLabel)


def canonical_state(bit: int) -> PureState:
    if bit not in (0, 1):
        raise ValueError(f"Bit canónico inválido: {bit}")
    return PureState.basis(str(bit))


def hadamard() -> LinearOp:
    """H = (σx + σz)/√2, hermítico y con H² = 1."""
    return LinearOp(1, (SIGMA_X + SIGMA_Z) * SQRT1_2)


def cnot() -> LinearOp:
    """Invierte la segunda entrada si la primera vale 1."""
    mat = np.eye(4, dtype=np.complex128)[[0, 1, 3, 2]]
    return LinearOp(2, mat)


@dataclass(frozen=True)
class ChannelSpec:
    """
    Coeficientes enteros (a..h) ∈ {-1, 0, +1} del canal de tres partículas.
    Las amplitudes realizadas son coeff/√N con N = número de coeficientes no nulos.
    """

    coeffs: Tuple[int, ...]

    def __post_init__(self):
        coeffs = tuple(int(c) for c in self.coeffs)
        if len(coeffs) != 8:
            raise InvalidChannelError(f"Se esperaban 8 coeficientes, llegaron {len(coeffs)}")
        if any(c not in (-1, 0, 1) for c in coeffs):
            raise InvalidChannelError(f"Coeficientes fuera de {{-1, 0, +1}}: {coeffs}")
        if not any(coeffs):
            raise InvalidChannelError("El canal con todos los coeficientes nulos no existe")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def parse(cls, text: str) -> "ChannelSpec":
        code = (text or "").strip().replace(" ", "")
        if len(code) != 8 or any(ch not in _CODE_TO_COEFF for ch in code):
            raise InvalidChannelError(f"Código de canal inválido: {text!r} (8 caracteres en {{+,0,-}})")
        return cls(tuple(_CODE_TO_COEFF[ch] for ch in code))

    @classmethod
    def from_kets(cls, text: str) -> "ChannelSpec":
        """Acepta kets escritos a mano, p.ej. "|010⟩ + |101⟩" o "(|000⟩ - |111⟩)345"."""
        coeffs = [0] * 8
        for sign, bits in _KET_RE.findall(text or ""):
            coeffs[CHANNEL_BASIS.index(bits)] = -1 if sign in ("-", "−") else 1
        return cls(tuple(coeffs))

    @classmethod
    def from_support(cls, letters: str) -> "ChannelSpec":
        coeffs = [0] * 8
        for ch in letters:
            coeffs[COEFF_NAMES.index(ch)] = 1
        return cls(tuple(coeffs))

    @classmethod
    def from_support_indices(cls, indices) -> "ChannelSpec":
        coeffs = [0] * 8
        for i in indices:
            coeffs[int(i)] = 1
        return cls(tuple(coeffs))

    @property
    def n_nonzero(self) -> int:
        return sum(1 for c in self.coeffs if c)

    @property
    def support(self) -> FrozenSet[int]:
        return frozenset(i for i, c in enumerate(self.coeffs) if c)

    @property
    def letters(self) -> str:
        return "".join(COEFF_NAMES[i] for i in sorted(self.support))

    def canonical(self) -> "ChannelSpec":
        return ChannelSpec(tuple(abs(c) for c in self.coeffs))

    def is_canonical(self) -> bool:
        return all(c >= 0 for c in self.coeffs)

    @property
    def code(self) -> str:
        return "".join(_COEFF_TO_CODE[c] for c in self.coeffs)

    @property
    def ket_label(self) -> str:
        parts = []
        for c, bits in zip(self.coeffs, CHANNEL_BASIS):
            if not c:
                continue
            sign = "-" if c < 0 else ("+" if parts else "")
            parts.append(f"{sign}|{bits}⟩")
        return "".join(parts)

    def __str__(self) -> str:
        return self.code


def all_channels() -> Iterator[ChannelSpec]:
    """Los 3^8 - 1 = 6560 canales no nulos, en orden lexicográfico de la tupla (-1 < 0 < +1)."""
    for coeffs in itertools.product((-1, 0, 1), repeat=8):
        if any(coeffs):
            yield ChannelSpec(coeffs)


def channel_state(c: ChannelSpec) -> PureState:
    amps = np.zeros(8, dtype=np.complex128)
    scale = 1.0 / np.sqrt(c.n_nonzero)
    for coeff, bits in zip(c.coeffs, CHANNEL_BASIS):
        amps[int(bits, 2)] = coeff * scale
    return PureState(3, amps)


def rotated_basis_pair(A: complex, B: complex, tol: float = 1e-12) -> Tuple[PureState, PureState]:
    """
    Devuelve (|φ⟩, |χ⟩) tales que |0⟩ = A|φ⟩ + B|χ⟩ y |1⟩ = -B*|φ⟩ + A*|χ⟩,
    es decir |φ⟩ = A*|0⟩ - B|1⟩ y |χ⟩ = B*|0⟩ + A|1⟩.
    """
    A = complex(A)
    B = complex(B)
    if abs(abs(A) ** 2 + abs(B) ** 2 - 1.0) > tol:
        raise NormalizationError(f"|A|² + |B|² debe valer 1 (A={A}, B={B})")
    phi = PureState(1, [A.conjugate(), -B])
    chi = PureState(1, [B.conjugate(), A])
    return phi, chi
