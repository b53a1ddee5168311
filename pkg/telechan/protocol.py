import functools
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from bases import (
    BellLabel,
    ChannelSpec,
    bell_basis,
    bell_state,
    canonical_state,
    channel_state,
    hadamard,
)
from statevec import LinearOp, NormalizationError, PureState, ShapeError, apply, project, tensor

VERBOSE = os.getenv("TELECHAN_VERBOSE", "0") == "1"

# Posición en el vector de amplitudes de cada parámetro (α, β, δ, γ):
# α|00⟩ + β|10⟩ + δ|01⟩ + γ|11⟩, con la partícula 1 escrita primero.
WRITTEN_ORDER = (0, 2, 1, 3)
PARAM_NAMES = ("alpha", "beta", "delta", "gamma")
PARAM_SYMBOLS = ("α", "β", "δ", "γ")

ALICE_QUBITS = (1, 2, 3)
PAIR_QUBITS = (2, 3)


@dataclass(frozen=True)
class MeasurementOutcome:
    canon: int
    bell: BellLabel

    @property
    def label(self) -> str:
        return f"|{self.canon}⟩1 |{self.bell.symbol}⟩23"

    @property
    def key(self) -> str:
        return f"{self.canon} {self.bell.value}"


# Orden del listado de resultados: |0⟩1Φ+, |1⟩1Φ+, |0⟩1Φ-, |1⟩1Φ-, |0⟩1Ψ+, ...
ALL_OUTCOMES: Tuple[MeasurementOutcome, ...] = tuple(
    MeasurementOutcome(canon, label) for label in BellLabel for canon in (0, 1)
)


@dataclass(frozen=True, eq=False)
class BranchResult:
    outcome: MeasurementOutcome
    probability: float
    bob_state: Optional[PureState]
    raw_amplitudes: np.ndarray = field(repr=False)

    @property
    def is_null(self) -> bool:
        return self.bob_state is None


def params_to_state(alpha: complex, beta: complex, delta: complex, gamma: complex) -> PureState:
    amps = np.zeros(4, dtype=np.complex128)
    amps[list(WRITTEN_ORDER)] = (alpha, beta, delta, gamma)
    return PureState(2, amps)


def state_to_params(s: PureState) -> Tuple[complex, complex, complex, complex]:
    if s.n_qubits != 2:
        raise ShapeError("Se esperaba un estado de dos partículas")
    return tuple(complex(s.amplitudes[i]) for i in WRITTEN_ORDER)


def prepare_state(input_state: PureState, channel: ChannelSpec, use_hadamard: bool = True) -> PureState:
    """|Ω⟩ = |ψ⟩12 |φ⟩345; con use_hadamard se aplica H sobre la partícula 1 (|Ω̃⟩)."""
    if input_state.n_qubits != 2:
        raise ShapeError(f"El estado a teleportar debe tener 2 partículas, tiene {input_state.n_qubits}")
    if not input_state.is_normalized():
        raise NormalizationError("El estado a teleportar no está normalizado")
    omega = tensor(input_state, channel_state(channel))
    if use_hadamard:
        omega = apply(hadamard(), [1], omega)
    return omega


def _pair_states(pair_basis: Optional[Sequence[PureState]]) -> Tuple[PureState, ...]:
    states = bell_basis() if pair_basis is None else tuple(pair_basis)
    if len(states) != 4 or any(s.n_qubits != 2 for s in states):
        raise ShapeError("La base de las partículas 2 y 3 debe tener cuatro estados de dos qubits")
    return states


def _particle1_states(particle1_basis: Optional[Sequence[PureState]]) -> Tuple[PureState, PureState]:
    if particle1_basis is None:
        return canonical_state(0), canonical_state(1)
    states = tuple(particle1_basis)
    if len(states) != 2 or any(s.n_qubits != 1 for s in states):
        raise ShapeError("La base de la partícula 1 debe tener dos estados de un qubit")
    return states


def run_protocol(
    input_state: PureState,
    channel: ChannelSpec,
    use_hadamard: bool = True,
    pair_basis: Optional[Sequence[PureState]] = None,
    particle1_basis: Optional[Sequence[PureState]] = None,
) -> List[BranchResult]:
    """
    Los cuatro pasos de Alice:
    1) prepara |Ω⟩, 2) H sobre la partícula 1 (opcional),
    3) medida de Bell sobre (2,3), 4) medida sobre la partícula 1.

    - pair_basis sustituye la base de Bell (mismo orden que BellLabel).
    - particle1_basis sustituye a la base canónica: el estado i hace de resultado canon=i.
    Devuelve las ocho ramas, incluidas las de probabilidad nula.
    """
    omega = prepare_state(input_state, channel, use_hadamard)
    pairs = _pair_states(pair_basis)
    singles = _particle1_states(particle1_basis)

    branches: List[BranchResult] = []
    for outcome in ALL_OUTCOMES:
        pair = pairs[list(BellLabel).index(outcome.bell)]
        onto = tensor(singles[outcome.canon], pair)
        proj = project(omega, ALICE_QUBITS, onto)
        branches.append(
            BranchResult(
                outcome=outcome,
                probability=proj.probability,
                bob_state=proj.residual,
                raw_amplitudes=proj.raw,
            )
        )

    if VERBOSE:
        total = sum(b.probability for b in branches)
        print(f"[PROTOCOL] canal={channel} hadamard={use_hadamard} Σp={total:.15f}", file=sys.stderr)
    return branches


def prefactor(channel: ChannelSpec, use_hadamard: bool = True) -> float:
    """1/(2√N) tras la Hadamard, 1/√(2N) sin ella."""
    n = channel.n_nonzero
    return 1.0 / (2.0 * np.sqrt(n)) if use_hadamard else 1.0 / np.sqrt(2.0 * n)


def _basis_inputs() -> Tuple[PureState, ...]:
    return tuple(params_to_state(*row) for row in np.eye(4))


def _compute_branch_maps(
    channel: ChannelSpec,
    use_hadamard: bool,
    pair_basis: Optional[Sequence[PureState]],
) -> Dict[MeasurementOutcome, np.ndarray]:
    columns: Dict[MeasurementOutcome, List[np.ndarray]] = {o: [] for o in ALL_OUTCOMES}
    for basis_input in _basis_inputs():
        for branch in run_protocol(basis_input, channel, use_hadamard, pair_basis=pair_basis):
            columns[branch.outcome].append(np.asarray(branch.raw_amplitudes))

    scale = prefactor(channel, use_hadamard)
    maps = {}
    for outcome, cols in columns.items():
        m = np.column_stack(cols) / scale
        m.flags.writeable = False
        maps[outcome] = m
    return maps


@functools.lru_cache(maxsize=None)
def _cached_branch_maps(channel: ChannelSpec, use_hadamard: bool) -> Dict[MeasurementOutcome, np.ndarray]:
    return _compute_branch_maps(channel, use_hadamard, None)


def branch_maps(
    channel: ChannelSpec,
    use_hadamard: bool = True,
    pair_basis: Optional[Sequence[PureState]] = None,
) -> Dict[MeasurementOutcome, np.ndarray]:
    """Las ocho matrices de coeficientes del canal (cacheadas cuando la base es la de Bell)."""
    if pair_basis is None:
        return dict(_cached_branch_maps(channel, use_hadamard))
    return _compute_branch_maps(channel, use_hadamard, pair_basis)


def coefficient_matrix(
    channel: ChannelSpec,
    outcome: MeasurementOutcome,
    use_hadamard: bool = True,
) -> np.ndarray:
    """
    M tal que raw_amplitudes(outcome) = prefactor · M · (α, β, δ, γ)ᵀ.
    Las filas siguen el orden de índice de (4,5): |00⟩, |01⟩, |10⟩, |11⟩.
    """
    return branch_maps(channel, use_hadamard)[outcome]


def contraction_matrix(
    channel: ChannelSpec,
    outcome: MeasurementOutcome,
    use_hadamard: bool = True,
) -> np.ndarray:
    """
    Oráculo independiente: contracción directa de los tensores del protocolo,
    sin pasar por tensor/apply/project.
    """
    psi = np.zeros((4, 2, 2), dtype=np.complex128)
    psi[0, 0, 0] = 1.0  # α|00⟩
    psi[1, 1, 0] = 1.0  # β|10⟩
    psi[2, 0, 1] = 1.0  # δ|01⟩
    psi[3, 1, 1] = 1.0  # γ|11⟩

    phi = channel_state(channel).amplitudes.reshape(2, 2, 2)
    first = hadamard().matrix if use_hadamard else np.eye(2, dtype=np.complex128)
    row = first[outcome.canon]
    pair = bell_state(outcome.bell).amplitudes.reshape(2, 2).conj()

    raw = np.einsum("i,pij,jk,kab->pab", row, psi, pair, phi)
    return raw.reshape(4, 4).T / prefactor(channel, use_hadamard)


def hadamard_block_probe(
    channel: ChannelSpec,
    alpha: complex,
    delta: complex,
    tol: float = 1e-12,
) -> bool:
    """
    Tras la Hadamard los coeficientes sólo aparecen como (α±β) y (δ±γ):
    con (β,γ) = (α,δ) se anulan las ramas canon=1 y con (β,γ) = (-α,-δ) las ramas canon=0.
    """
    for sign, vanishing in ((1.0, 1), (-1.0, 0)):
        params = np.array([alpha, sign * alpha, delta, sign * delta], dtype=np.complex128)
        params = params / np.linalg.norm(params)
        for branch in run_protocol(params_to_state(*params), channel):
            if branch.outcome.canon == vanishing and branch.probability > tol:
                return False
    return True


def post_measurement_state(
    input_state: PureState,
    channel: ChannelSpec,
    outcome: MeasurementOutcome,
    use_hadamard: bool = True,
) -> Optional[PureState]:
    """Estado completo de las cinco partículas tras el colapso (None si la rama es imposible)."""
    omega = prepare_state(input_state, channel, use_hadamard)
    alice = tensor(canonical_state(outcome.canon), bell_state(outcome.bell)).amplitudes
    projector = LinearOp(3, np.outer(alice, alice.conj()))
    collapsed = apply(projector, ALICE_QUBITS, omega)
    if collapsed.norm() ** 2 <= 1e-24:
        return None
    return collapsed.normalize()
