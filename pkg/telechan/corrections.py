import itertools
import os
import re
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Hashable, List, Mapping, Optional, Tuple

import numpy as np

from bases import IDENTITY, SIGMA_X, SIGMA_Z, cnot
from statevec import LinearOp, NormalizationError, PureState, ShapeError

# Tolerancia de la proporcionalidad realize(U)·M = c·T (relativa a ‖M‖)
MAP_TOLERANCE = float(os.getenv("TELECHAN_MAP_TOLERANCE", "1e-12"))


class ParseError(ValueError):
    pass


class Local(IntEnum):
    """Operador local sobre una de las partículas de Bob. ZX = σz·σx (primero σx)."""

    I = 0
    X = 1
    Z = 2
    ZX = 3

    @property
    def matrix(self) -> np.ndarray:
        return _LOCAL_MATRICES[self]

    def symbol(self, particle: int) -> str:
        if self is Local.I:
            return f"I{particle}"
        inner = {Local.X: "σx", Local.Z: "σz", Local.ZX: "σz σx"}[self]
        return f"({inner}){particle}"


_LOCAL_MATRICES = {
    Local.I: IDENTITY,
    Local.X: SIGMA_X,
    Local.Z: SIGMA_Z,
    Local.ZX: SIGMA_Z @ SIGMA_X,
}


@dataclass(frozen=True, order=True)
class CorrectionOp:
    """
    (local4 ⊗ local5) · CNOT(4→5) si cnot_first, si no sólo los locales.
    El orden de los campos fija el desempate: sin CNOT antes que con CNOT, I < X < Z < ZX, partícula 4 antes que la 5.
    """

    cnot_first: bool = False
    local4: Local = Local.I
    local5: Local = Local.I

    @property
    def is_identity(self) -> bool:
        return not self.cnot_first and self.local4 is Local.I and self.local5 is Local.I


ALL_CORRECTIONS: Tuple[CorrectionOp, ...] = tuple(
    sorted(
        CorrectionOp(flag, l4, l5)
        for flag, l4, l5 in itertools.product((False, True), Local, Local)
    )
)

IDENTITY_CORRECTION = CorrectionOp()


def _realize_matrix(op: CorrectionOp) -> np.ndarray:
    mat = np.kron(op.local4.matrix, op.local5.matrix)
    if op.cnot_first:
        mat = mat @ cnot().matrix
    return mat


def realize(op: CorrectionOp) -> LinearOp:
    return LinearOp(2, _realize_matrix(op))


# (32, 4, 4) en el mismo orden que ALL_CORRECTIONS
_STACK = np.stack([_realize_matrix(op) for op in ALL_CORRECTIONS])
_STACK.flags.writeable = False


def apply_correction(op: CorrectionOp, s: PureState) -> PureState:
    if s.n_qubits != 2:
        raise ShapeError("Las correcciones actúan sobre las dos partículas de Bob")
    return PureState(2, _realize_matrix(op) @ s.amplitudes)


def equal_up_to_phase(a: PureState, b: PureState, tol: float = 1e-10) -> bool:
    """|⟨a|b⟩| ≥ 1 - tol, con ambos vectores normalizados antes de comparar."""
    if a.n_qubits != b.n_qubits:
        raise ShapeError(f"Comparación entre {a.n_qubits} y {b.n_qubits} qubits")
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        raise NormalizationError("No se puede comparar la fase de un vector nulo")
    overlap = abs(np.vdot(a.amplitudes, b.amplitudes)) / (na * nb)
    return bool(overlap >= 1.0 - tol)


def unitaries_equal_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-12) -> bool:
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if u.shape != v.shape:
        return False
    return bool(abs(np.trace(u.conj().T @ v)) / u.shape[0] >= 1.0 - tol)


@dataclass(frozen=True)
class CorrectionResult:
    """
    - null: la rama tiene probabilidad cero para toda la clase (M_o = 0)
    - op: la corrección encontrada, None si ninguna de las 32 sirve
    - scale: c_o tal que realize(op)·M_o = c_o·T
    """

    op: Optional[CorrectionOp]
    scale: complex = 0j
    null: bool = False

    @property
    def found(self) -> bool:
        return self.null or self.op is not None


def _proportionality(m: np.ndarray, target: np.ndarray, tol: float):
    """Máscara (32,) de las U con U·M ∝ T y los escalares c; None si M es nula."""
    m = np.asarray(m, dtype=np.complex128)
    target = np.asarray(target, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != 4 or m.shape != target.shape:
        raise ShapeError(f"Formas incompatibles: M {m.shape}, T {target.shape}")

    m_norm = np.linalg.norm(m)
    if m_norm <= tol:
        return None, None

    t_norm2 = float(np.vdot(target, target).real)
    if t_norm2 == 0.0:
        raise ShapeError("La inmersión objetivo es nula")

    y = _STACK @ m
    scales = np.einsum("ij,kij->k", target.conj(), y) / t_norm2
    residuals = np.linalg.norm(y - scales[:, None, None] * target, axis=(1, 2))
    mask = (residuals <= tol * m_norm) & (np.abs(scales) > tol)
    return mask, scales


def search_correction(
    m: np.ndarray,
    target: np.ndarray,
    tol: float = MAP_TOLERANCE,
) -> CorrectionResult:
    """Busca por fuerza bruta (las 32 a la vez) la primera U con U·M ∝ T."""
    mask, scales = _proportionality(m, target, tol)
    if mask is None:
        return CorrectionResult(op=None, null=True)
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return CorrectionResult(op=None)
    idx = int(hits[0])
    return CorrectionResult(op=ALL_CORRECTIONS[idx], scale=complex(scales[idx]))


def matching_corrections(
    m: np.ndarray,
    target: np.ndarray,
    tol: float = MAP_TOLERANCE,
) -> List[CorrectionOp]:
    """Todas las correcciones válidas (en orden de desempate); vacía si M es nula."""
    mask, _ = _proportionality(m, target, tol)
    if mask is None:
        return []
    return [ALL_CORRECTIONS[i] for i in np.flatnonzero(mask)]


def find_correction(
    branch_maps: Mapping[Hashable, np.ndarray],
    target_embedding: np.ndarray,
    tol: float = MAP_TOLERANCE,
) -> Dict[Hashable, CorrectionResult]:
    return {key: search_correction(m, target_embedding, tol) for key, m in branch_maps.items()}


def render(op: CorrectionOp) -> str:
    """Forma de texto de las tablas: "I", "(σx)4⊗(σx)5", "(σz σx)4⊗(σx)5 · CNOT", "CNOT"."""
    if op.local4 is Local.I and op.local5 is Local.I:
        locals_text = ""
    else:
        locals_text = f"{op.local4.symbol(4)}⊗{op.local5.symbol(5)}"
    if not op.cnot_first:
        return locals_text or "I"
    return f"{locals_text} · CNOT" if locals_text else "CNOT"


def instruction(op: CorrectionOp) -> str:
    return "do nothing" if op.is_identity else f"apply {render(op)}"


_SUBSCRIPTS = str.maketrans({"₄": "4", "₅": "5", "−": "-"})
_FACTOR_RE = re.compile(
    r"\(\s*((?:σ\s*[xz]\s*)+)\)\s*([45])"  # (σz σx)4
    r"|σ\s*([xz])\s*([45])"                 # σx4
    r"|I\s*([45])"                          # I5
    r"|(CNOT)"
)
_NOISE_RE = re.compile(r"[\s⊗·*.,$]+")


def _local_from_symbols(symbols: str) -> np.ndarray:
    mat = IDENTITY
    for axis in re.findall(r"σ\s*([xz])", symbols):
        mat = mat @ (SIGMA_X if axis == "x" else SIGMA_Z)
    return mat


def parse_correction(text: str) -> CorrectionOp:
    """
    Interpreta las instrucciones tal como aparecen en las tablas:
    "do nothing", "apply (σz)4⊗I5", "(σz)5⊗(σx)4 CNOT", "apply CNOT".
    El CNOT escrito a la derecha actúa primero. Devuelve la CorrectionOp de unitario igual salvo fase.
    """
    raw = (text or "").translate(_SUBSCRIPTS).strip()
    body = re.sub(r"^\s*apply\b", "", raw, flags=re.IGNORECASE).strip()
    if not body:
        raise ParseError(f"Instrucción vacía: {text!r}")
    if body.lower() in ("do nothing", "i", "1", "identity"):
        return IDENTITY_CORRECTION

    locals_by_particle = {4: IDENTITY, 5: IDENTITY}
    has_cnot = False
    pos = 0
    for match in _FACTOR_RE.finditer(body):
        if _NOISE_RE.sub("", body[pos:match.start()]):
            raise ParseError(f"Texto no reconocido en {text!r}: {body[pos:match.start()]!r}")
        pos = match.end()
        if has_cnot:
            raise ParseError(f"El CNOT debe ir al final de la instrucción: {text!r}")
        grouped, particle, axis, single, identity_particle, cnot_token = match.groups()
        if cnot_token:
            has_cnot = True
        elif grouped:
            p = int(particle)
            locals_by_particle[p] = locals_by_particle[p] @ _local_from_symbols(grouped)
        elif axis:
            p = int(single)
            locals_by_particle[p] = locals_by_particle[p] @ (SIGMA_X if axis == "x" else SIGMA_Z)
        elif identity_particle:
            continue
    if _NOISE_RE.sub("", body[pos:]):
        raise ParseError(f"Texto no reconocido en {text!r}: {body[pos:]!r}")

    unitary = np.kron(locals_by_particle[4], locals_by_particle[5])
    if has_cnot:
        unitary = unitary @ cnot().matrix

    for op in ALL_CORRECTIONS:
        if unitaries_equal_up_to_phase(_realize_matrix(op), unitary):
            return op
    raise ParseError(f"La instrucción {text!r} no pertenece al conjunto de 32 correcciones")


def corrections_for(state: PureState, target: PureState, tol: float = 1e-10) -> List[CorrectionOp]:
    """Todas las correcciones que llevan un estado concreto al objetivo (criterio por fidelidad)."""
    return [op for op in ALL_CORRECTIONS if equal_up_to_phase(apply_correction(op, state), target, tol)]
