import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from bases import ChannelSpec, all_channels
from corrections import (
    MAP_TOLERANCE,
    CorrectionOp,
    apply_correction,
    corrections_for,
    equal_up_to_phase,
    matching_corrections,
    realize,
    search_correction,
)
from protocol import (
    ALL_OUTCOMES,
    WRITTEN_ORDER,
    PARAM_SYMBOLS,
    MeasurementOutcome,
    branch_maps,
    prefactor,
    run_protocol,
)
from statevec import PureState

WORKERS = int(os.getenv("TELECHAN_WORKERS", "1"))
PROGRESS = os.getenv("TELECHAN_PROGRESS", "0") == "1"

# Intercambio de las partículas 4 y 5 en el orden de índice de Bob
_SWAP_ROWS = (0, 2, 1, 3)


class InputClass(Enum):
    GENERAL = "general"
    DIAG = "diag"
    ANTI_DIAG = "anti-diag"
    LEFT_COL = "left-col"
    RIGHT_COL = "right-col"
    TOP_ROW = "top-row"
    BOTTOM_ROW = "bottom-row"

    @property
    def params(self) -> Tuple[int, ...]:
        """Índices de los parámetros libres en el orden (α, β, δ, γ)."""
        return _CLASS_PARAMS[self]

    @property
    def free_params(self) -> int:
        return len(self.params)

    @property
    def param_symbols(self) -> Tuple[str, ...]:
        return tuple(PARAM_SYMBOLS[p] for p in self.params)

    @property
    def label(self) -> str:
        return _CLASS_LABELS[self]

    @property
    def embedding(self) -> np.ndarray:
        """Matriz 4×k que coloca los parámetros de la clase en el espacio de amplitudes."""
        return target_embedding(self)

    @classmethod
    def parse(cls, name: str) -> "InputClass":
        key = (name or "").strip().lower().replace("_", "-")
        for item in cls:
            if item.value == key:
                return item
        raise ValueError(
            f"Clase desconocida: {name!r}. Opciones: {', '.join(c.value for c in cls)}"
        )


_CLASS_PARAMS = {
    InputClass.GENERAL: (0, 1, 2, 3),
    InputClass.DIAG: (0, 3),
    InputClass.ANTI_DIAG: (1, 2),
    InputClass.LEFT_COL: (0, 2),
    InputClass.RIGHT_COL: (1, 3),
    InputClass.TOP_ROW: (0, 1),
    InputClass.BOTTOM_ROW: (2, 3),
}

_CLASS_LABELS = {
    InputClass.GENERAL: "α|00⟩+β|10⟩+δ|01⟩+γ|11⟩",
    InputClass.DIAG: "α|00⟩+γ|11⟩",
    InputClass.ANTI_DIAG: "β|10⟩+δ|01⟩",
    InputClass.LEFT_COL: "α|00⟩+δ|01⟩",
    InputClass.RIGHT_COL: "β|10⟩+γ|11⟩",
    InputClass.TOP_ROW: "α|00⟩+β|10⟩",
    InputClass.BOTTOM_ROW: "δ|01⟩+γ|11⟩",
}

# Orden del resumen: general, diagonales, columnas, filas
SUMMARY_ORDER = (
    InputClass.GENERAL,
    InputClass.DIAG,
    InputClass.ANTI_DIAG,
    InputClass.RIGHT_COL,
    InputClass.LEFT_COL,
    InputClass.TOP_ROW,
    InputClass.BOTTOM_ROW,
)


def target_embedding(cls: InputClass, swap_bob: bool = False) -> np.ndarray:
    t = np.zeros((4, cls.free_params), dtype=np.complex128)
    for j, p in enumerate(cls.params):
        t[WRITTEN_ORDER[p], j] = 1.0
    if swap_bob:
        t = t[list(_SWAP_ROWS)]
    t.flags.writeable = False
    return t


def class_maps(
    cls: InputClass,
    channel: ChannelSpec,
    use_hadamard: bool = True,
    pair_basis: Optional[Sequence[PureState]] = None,
) -> Dict[MeasurementOutcome, np.ndarray]:
    """Las matrices M_o restringidas a las columnas de los parámetros libres."""
    cols = list(cls.params)
    return {o: m[:, cols] for o, m in branch_maps(channel, use_hadamard, pair_basis).items()}


def class_state(cls: InputClass, params: Sequence[complex]) -> PureState:
    values = np.asarray(params, dtype=np.complex128)
    if values.shape != (cls.free_params,):
        raise ValueError(f"La clase {cls.value} tiene {cls.free_params} parámetros, llegaron {values.size}")
    return PureState(2, target_embedding(cls) @ values)


def random_class_params(cls: InputClass, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(cls.free_params) + 1j * rng.standard_normal(cls.free_params)
    return z / np.linalg.norm(z)


def symbolic_state(m: np.ndarray) -> np.ndarray:
    """
    Reescala M_o para que el primer coeficiente no nulo, en el orden de los parámetros,
    valga +1 (convención de signos de las tablas: α siempre positivo).
    """
    m = np.asarray(m, dtype=np.complex128)
    for j in range(m.shape[1]):
        nz = np.flatnonzero(np.abs(m[:, j]) > 1e-12)
        if nz.size:
            out = m / m[nz[0], j]
            out.flags.writeable = False
            return out
    return m


@dataclass(frozen=True, eq=False)
class TableRow:
    """
    Una fila de instrucciones.
    - state: 4×k, colocación de los parámetros de la clase sobre |00⟩,|01⟩,|10⟩,|11⟩ de (4,5)
    - correction: None sólo si la rama nunca ocurre
    """

    outcome: MeasurementOutcome
    state: np.ndarray = field(repr=False)
    correction: Optional[CorrectionOp]
    probability: float

    @property
    def is_null(self) -> bool:
        return self.correction is None


@dataclass(frozen=True, eq=False)
class InstructionTable:
    channel: ChannelSpec
    input_class: InputClass
    rows: Tuple[TableRow, ...]
    swap_bob: bool = False

    def __post_init__(self):
        outcomes = [r.outcome for r in self.rows]
        if len(outcomes) != 8 or len(set(outcomes)) != 8:
            raise ValueError("Una tabla de instrucciones tiene exactamente 8 filas con resultados distintos")

    def row_for(self, outcome: MeasurementOutcome) -> TableRow:
        for row in self.rows:
            if row.outcome == outcome:
                return row
        raise KeyError(outcome)

    def self_check(self, tol: float = MAP_TOLERANCE) -> bool:
        """Cada corrección aplicada al estado de su fila devuelve la inmersión de la clase (salvo fase)."""
        target = target_embedding(self.input_class, self.swap_bob)
        for row in self.rows:
            if row.is_null:
                continue
            mapped = realize(row.correction).matrix @ row.state
            c = np.vdot(target, mapped) / np.vdot(target, target)
            if abs(c) <= tol or np.linalg.norm(mapped - c * target) > tol * np.linalg.norm(row.state):
                return False
        return True


def is_teleportable(
    cls: InputClass,
    channel: ChannelSpec,
    tol: float = MAP_TOLERANCE,
    swap_bob: bool = False,
    use_hadamard: bool = True,
) -> Optional[InstructionTable]:
    """
    Criterio exacto por matrices de coeficientes: cada rama no nula admite una U con U·M_o = c_o·T
    y las ramas recuperables suman probabilidad 1 para parámetros genéricos.
    """
    target = target_embedding(cls, swap_bob)
    maps = class_maps(cls, channel, use_hadamard)
    scale2 = prefactor(channel, use_hadamard) ** 2

    rows: List[TableRow] = []
    total = 0.0
    for outcome in ALL_OUTCOMES:
        m = maps[outcome]
        result = search_correction(m, target, tol)
        if not result.found:
            return None
        probability = 0.0 if result.null else scale2 * abs(result.scale) ** 2
        total += probability
        rows.append(
            TableRow(
                outcome=outcome,
                state=symbolic_state(m),
                correction=result.op,
                probability=probability,
            )
        )

    if abs(total - 1.0) > 1e-9:
        return None
    return InstructionTable(channel=channel, input_class=cls, rows=tuple(rows), swap_bob=swap_bob)


def teleports_with_basis(
    cls: InputClass,
    channel: ChannelSpec,
    pair_basis: Sequence[PureState],
    tol: float = MAP_TOLERANCE,
) -> bool:
    """El mismo criterio con una base arbitraria sobre (2,3) en lugar de la de Bell."""
    target = target_embedding(cls)
    scale2 = prefactor(channel) ** 2
    total = 0.0
    for m in class_maps(cls, channel, pair_basis=pair_basis).values():
        result = search_correction(m, target, tol)
        if not result.found:
            return False
        if not result.null:
            total += scale2 * abs(result.scale) ** 2
    return abs(total - 1.0) <= 1e-9


@dataclass
class ClassificationReport:
    input_class: InputClass
    teleporting_channels: List[Tuple[ChannelSpec, InstructionTable]]
    support_patterns: List[FrozenSet[int]]
    swap_bob: bool = False

    @property
    def n_patterns(self) -> int:
        return len(self.support_patterns)

    @property
    def n_channels(self) -> int:
        return len(self.teleporting_channels)

    @property
    def counts(self) -> Dict[str, int]:
        return {"patterns": self.n_patterns, "channels": self.n_channels}

    def pattern_letters(self) -> List[str]:
        return [ChannelSpec.from_support_indices(p).letters for p in self.support_patterns]

    def canonical_channels(self) -> List[ChannelSpec]:
        return [ChannelSpec.from_support_indices(p) for p in self.support_patterns]

    def table_for(self, channel: ChannelSpec) -> Optional[InstructionTable]:
        for c, table in self.teleporting_channels:
            if c == channel:
                return table
        return None


def _pattern_key(pattern: FrozenSet[int]) -> Tuple[int, ...]:
    return tuple(sorted(pattern))


def _channel_key(channel: ChannelSpec) -> Tuple[int, Tuple[int, ...]]:
    # Representante canónico (+) primero; después las variantes de signo en orden de tupla
    return (0 if channel.is_canonical() else 1, channel.coeffs)


def _scan(fn, items: Sequence, workers: int, progress: bool, desc: str) -> List:
    bar = tqdm(total=len(items), desc=desc, file=sys.stderr, disable=not progress)
    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = []
                for r in pool.map(fn, items):
                    results.append(r)
                    bar.update(1)
                return results
        results = []
        for item in items:
            results.append(fn(item))
            bar.update(1)
        return results
    finally:
        bar.close()


def classify_all(
    cls: InputClass,
    workers: int = WORKERS,
    progress: bool = PROGRESS,
    tol: float = MAP_TOLERANCE,
    swap_bob: bool = False,
    channels: Optional[Iterable[ChannelSpec]] = None,
) -> ClassificationReport:
    """Recorre los 3^8 - 1 canales y agrupa los que teleportan la clase por patrón de soporte."""
    pool = list(channels) if channels is not None else list(all_channels())
    tables = _scan(
        lambda c: is_teleportable(cls, c, tol, swap_bob),
        pool,
        workers,
        progress,
        desc=f"[CLASSIFY] {cls.value}",
    )

    by_pattern: Dict[FrozenSet[int], List[Tuple[ChannelSpec, InstructionTable]]] = {}
    for channel, table in zip(pool, tables):
        if table is not None:
            by_pattern.setdefault(channel.support, []).append((channel, table))

    patterns = sorted(by_pattern, key=_pattern_key)
    ordered: List[Tuple[ChannelSpec, InstructionTable]] = []
    for pattern in patterns:
        ordered.extend(sorted(by_pattern[pattern], key=lambda item: _channel_key(item[0])))

    print(
        f"[CLASSIFY] {cls.value}: {len(patterns)} patrones, {len(ordered)} canales"
        + (" (4↔5 intercambiadas)" if swap_bob else ""),
        file=sys.stderr,
    )
    return ClassificationReport(
        input_class=cls,
        teleporting_channels=ordered,
        support_patterns=patterns,
        swap_bob=swap_bob,
    )


def factorization_condition(alpha: complex, beta: complex, delta: complex, gamma: complex, tol: float = 1e-12) -> bool:
    """det [[α, δ], [β, γ]] = αγ - βδ = 0: el estado es producto |u⟩1 ⊗ |v⟩2."""
    return bool(abs(alpha * gamma - beta * delta) <= tol)


def schmidt_rank(alpha: complex, beta: complex, delta: complex, gamma: complex, tol: float = 1e-9) -> int:
    amp = np.array([[alpha, delta], [beta, gamma]], dtype=np.complex128)
    sv = np.linalg.svd(amp, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


@dataclass
class ImpossibilityReport:
    channels: int = 0
    outcomes: int = 0
    engaged_outcomes: int = 0
    candidates: int = 0
    false_positives: List[Tuple[ChannelSpec, MeasurementOutcome, CorrectionOp]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.false_positives


def _general_hits(channel: ChannelSpec, tol: float):
    target = target_embedding(InputClass.GENERAL)
    engaged = 0
    hits = []
    for outcome, m in class_maps(InputClass.GENERAL, channel).items():
        if np.all(np.linalg.norm(m, axis=0) > tol):
            engaged += 1
        for op in matching_corrections(m, target, tol):
            hits.append((channel, outcome, op))
    return engaged, hits


def general_impossibility_scan(
    workers: int = WORKERS,
    progress: bool = PROGRESS,
    tol: float = MAP_TOLERANCE,
) -> ImpossibilityReport:
    """Para la clase general: ningún canal, resultado ni corrección da U·M_o ∝ 1 (6560 × 8 × 32)."""
    pool = list(all_channels())
    results = _scan(lambda c: _general_hits(c, tol), pool, workers, progress, desc="[SCAN] general")

    report = ImpossibilityReport(channels=len(pool))
    for engaged, hits in results:
        report.outcomes += len(ALL_OUTCOMES)
        report.engaged_outcomes += engaged
        report.false_positives.extend(hits)
    report.candidates = report.outcomes * 32

    print(
        f"[SCAN] general: {report.channels} canales, {report.candidates} candidatos, "
        f"{len(report.false_positives)} falsos positivos",
        file=sys.stderr,
    )
    return report


def random_orthonormal_basis(rng: np.random.Generator, dim: int = 4) -> Tuple[PureState, ...]:
    """QR de una matriz gaussiana compleja, con las fases de la diagonal de R absorbidas."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    n = int(round(np.log2(dim)))
    return tuple(PureState(n, q[:, j]) for j in range(dim))


def random_channel(rng: np.random.Generator) -> ChannelSpec:
    while True:
        coeffs = rng.integers(-1, 2, size=8)
        if np.any(coeffs):
            return ChannelSpec(tuple(int(c) for c in coeffs))


@dataclass
class BasisScanReport:
    samples: int
    seed: int
    successes: int = 0
    counterexamples: List[Tuple[ChannelSpec, Tuple[PureState, ...]]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.successes == 0


def general_basis_scan(
    samples: int,
    seed: int,
    tol: float = MAP_TOLERANCE,
    progress: bool = PROGRESS,
) -> BasisScanReport:
    """
    Búsqueda de contraejemplos: bases ortonormales aleatorias sobre (2,3) y canales aleatorios
    para la clase general. Se esperan 0 éxitos; cualquier éxito se anuncia en stderr.
    """
    if samples < 1:
        raise ValueError(f"samples debe ser >= 1 (llegó {samples})")

    rng = np.random.default_rng(seed)
    report = BasisScanReport(samples=samples, seed=seed)
    for _ in tqdm(range(samples), desc="[SCAN] bases", file=sys.stderr, disable=not progress):
        basis = random_orthonormal_basis(rng)
        channel = random_channel(rng)
        if teleports_with_basis(InputClass.GENERAL, channel, basis, tol):
            report.successes += 1
            report.counterexamples.append((channel, basis))
            print(
                f"[SCAN] *** CONTRAEJEMPLO *** canal {channel} teleporta la clase general "
                f"con una base no estándar sobre (2,3)",
                file=sys.stderr,
            )

    print(f"[SCAN] bases aleatorias: {samples} muestras (seed={seed}), {report.successes} éxitos", file=sys.stderr)
    return report


@dataclass
class EndToEndReport:
    draws: int
    min_fidelity: float = 1.0
    max_probability_error: float = 0.0
    passed: bool = True


def end_to_end_check(
    table: InstructionTable,
    draws: int = 20,
    rng: Optional[np.random.Generator] = None,
    tol: float = 1e-10,
    probability_tol: float = 1e-12,
) -> EndToEndReport:
    """
    Protocolo completo sobre estados concretos: en cada rama realizada se aplica la corrección
    de la tabla y se compara con la entrada. También contrasta las probabilidades de la tabla.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    cls = table.input_class
    report = EndToEndReport(draws=draws)

    for _ in range(draws):
        psi = class_state(cls, random_class_params(cls, rng))
        for branch in run_protocol(psi, table.channel):
            row = table.row_for(branch.outcome)
            report.max_probability_error = max(
                report.max_probability_error, abs(branch.probability - row.probability)
            )
            if branch.is_null:
                continue
            if row.is_null:
                report.passed = False
                continue
            out = apply_correction(row.correction, branch.bob_state)
            if table.swap_bob:
                out = PureState(2, out.amplitudes[list(_SWAP_ROWS)])
            fidelity = abs(psi.inner(out))
            report.min_fidelity = min(report.min_fidelity, fidelity)

    if report.min_fidelity < 1.0 - tol or report.max_probability_error > probability_tol:
        report.passed = False
    return report


def sampled_teleportable(
    cls: InputClass,
    channel: ChannelSpec,
    draws: int = 20,
    rng: Optional[np.random.Generator] = None,
    tol: float = 1e-10,
) -> bool:
    """
    Criterio por fidelidad: para cada resultado debe existir una misma corrección que funcione
    en todas las muestras. Sólo se usa para contrastar el criterio exacto.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    candidates: Dict[MeasurementOutcome, set] = {}
    for _ in range(draws):
        psi = class_state(cls, random_class_params(cls, rng))
        for branch in run_protocol(psi, channel):
            if branch.is_null:
                continue
            ok = set(corrections_for(branch.bob_state, psi, tol))
            candidates[branch.outcome] = candidates.get(branch.outcome, ok) & ok
            if not candidates[branch.outcome]:
                return False
    return bool(candidates)


def sign_variants(channel: ChannelSpec) -> List[ChannelSpec]:
    """Los 2^N canales con el mismo soporte y cualquier combinación de signos."""
    idx = sorted(channel.support)
    variants = []
    for mask in range(2 ** len(idx)):
        coeffs = [0] * 8
        for bit, i in enumerate(idx):
            coeffs[i] = -1 if (mask >> bit) & 1 else 1
        variants.append(ChannelSpec(tuple(coeffs)))
    return variants


def _phase_equal_maps(u: np.ndarray, v: np.ndarray, tol: float) -> bool:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return nu == nv
    return bool(abs(np.vdot(u, v)) >= (1.0 - tol) * nu * nv)


def equal_tables(a: InstructionTable, b: InstructionTable, tol: float = 1e-10) -> bool:
    """Igualdad de contenido fila a fila: estado salvo fase y corrección con el mismo efecto."""
    if a.channel != b.channel or a.input_class != b.input_class or a.swap_bob != b.swap_bob:
        return False
    for ra in a.rows:
        rb = b.row_for(ra.outcome)
        if ra.is_null != rb.is_null:
            return False
        if ra.is_null:
            continue
        if not _phase_equal_maps(ra.state, rb.state, tol):
            return False
        mapped_a = realize(ra.correction).matrix @ ra.state
        mapped_b = realize(rb.correction).matrix @ rb.state
        if not _phase_equal_maps(mapped_a, mapped_b, tol):
            return False
    return True
