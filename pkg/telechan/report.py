import json
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from bases import BellLabel, ChannelSpec
from classify import (
    SUMMARY_ORDER,
    ClassificationReport,
    InputClass,
    InstructionTable,
    TableRow,
    target_embedding,
)
from corrections import MAP_TOLERANCE, CorrectionOp, Local, instruction, parse_correction, realize
from protocol import PARAM_SYMBOLS, MeasurementOutcome

_REPO_ROOT = Path(__file__).resolve().parent.parent

DATA_DIR = Path(os.getenv("TELECHAN_DATA_DIR", str(_REPO_ROOT / "data")))
GOLDEN_VERSION = os.getenv("TELECHAN_GOLDEN_VERSION", "v1")

# Orden de escritura de los kets de Bob en las tablas: |00⟩, |10⟩, |01⟩, |11⟩ (partícula 4 primero)
KET_WRITE_ORDER = ("00", "10", "01", "11")

_NUMBER_WORDS = {1: "one", 2: "two", 3: "three", 4: "four", 5: "five", 6: "six", 7: "seven", 8: "eight"}


class ChannelMismatchError(ValueError):
    pass


# ============================
# Documentos JSON
# ============================


class CorrectionDoc(BaseModel):
    cnot: bool
    p4: str
    p5: str


class RowDoc(BaseModel):
    bell: str
    canon: int
    state: List[List[List[float]]]
    correction: Optional[CorrectionDoc] = None
    probability: float = 0.0


class TableDoc(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    channel: str
    input_class: str = Field(alias="class")
    params: List[str]
    swap_bob: bool = False
    rows: List[RowDoc]


class PatternDoc(BaseModel):
    letters: str
    canonical: str
    kets: str
    variants: List[str]


class ReportDoc(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    input_class: str = Field(alias="class")
    label: str
    swap_bob: bool = False
    patterns: int
    channels: int
    support_patterns: List[PatternDoc]
    tables: List[TableDoc]


class GoldenRow(BaseModel):
    outcome: str
    state: str
    instruction: str
    ambiguous: bool = False


class GoldenTable(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    id: str
    channel: str
    input_class: str = Field(alias="class")
    rows: List[GoldenRow]


class CatalogRow(BaseModel):
    placement: List[str]
    instruction: str


# ============================
# Texto
# ============================


def _format_coefficient(c: complex) -> str:
    if abs(c - 1) < 1e-9:
        return "+"
    if abs(c + 1) < 1e-9:
        return "-"
    if abs(c.imag) < 1e-9:
        return f"{c.real:+.6g}"
    return f"+({c.real:.6g}{c.imag:+.6g}i)"


def format_state(state: np.ndarray, symbols: Sequence[str]) -> str:
    """Escribe la colocación simbólica como en las tablas, p.ej. "-γ|00⟩+α|11⟩"."""
    terms = []
    for ket in KET_WRITE_ORDER:
        row = state[int(ket, 2)]
        parts = [(complex(v), s) for v, s in zip(row, symbols) if abs(v) > 1e-9]
        if not parts:
            continue
        if len(parts) == 1:
            coeff, sym = parts[0]
            terms.append(f"{_format_coefficient(coeff)}{sym}|{ket}⟩")
        else:
            inner = "".join(f"{_format_coefficient(c)}{s}" for c, s in parts).lstrip("+")
            terms.append(f"+({inner})|{ket}⟩")
    text = "".join(terms)
    return text[1:] if text.startswith("+") else text or "0"


def _table_frame(t: InstructionTable) -> pd.DataFrame:
    symbols = t.input_class.param_symbols
    records = []
    for row in t.rows:
        records.append(
            {
                "Alice's measurements": row.outcome.label,
                "Bob's states": format_state(row.state, symbols) if not row.is_null else "(rama imposible)",
                "Bob's instructions": instruction(row.correction) if not row.is_null else "-",
            }
        )
    return pd.DataFrame.from_records(records)


def _table_doc(t: InstructionTable) -> TableDoc:
    rows = []
    for row in t.rows:
        correction = None
        if row.correction is not None:
            correction = CorrectionDoc(
                cnot=row.correction.cnot_first,
                p4=row.correction.local4.name,
                p5=row.correction.local5.name,
            )
        rows.append(
            RowDoc(
                bell=row.outcome.bell.value,
                canon=row.outcome.canon,
                state=[[[float(v.real), float(v.imag)] for v in amp] for amp in row.state],
                correction=correction,
                probability=round(float(row.probability), 15),
            )
        )
    return TableDoc(
        channel=t.channel.code,
        input_class=t.input_class.value,
        params=list(t.input_class.param_symbols),
        swap_bob=t.swap_bob,
        rows=rows,
    )


def emit_table(t: InstructionTable, fmt: str = "text") -> str:
    if fmt == "json":
        return _table_doc(t).model_dump_json(by_alias=True, indent=2)
    if fmt != "text":
        raise ValueError(f"Formato desconocido: {fmt!r}")
    header = f"Canal {t.channel.ket_label}  ({t.channel.code})  clase {t.input_class.label}"
    if t.swap_bob:
        header += "  [partículas 4↔5 intercambiadas]"
    return header + "\n" + _table_frame(t).to_string(index=False) + "\n"


def parse_table(document: str) -> InstructionTable:
    """Inversa de emit_table(t, "json")."""
    doc = TableDoc.model_validate_json(document)
    cls = InputClass.parse(doc.input_class)
    rows = []
    for r in doc.rows:
        state = np.array([[complex(re_, im) for re_, im in amp] for amp in r.state], dtype=np.complex128)
        if state.shape != (4, cls.free_params):
            raise ValueError(f"Estado con forma {state.shape} para la clase {cls.value}")
        state.flags.writeable = False
        correction = None
        if r.correction is not None:
            correction = CorrectionOp(r.correction.cnot, Local[r.correction.p4], Local[r.correction.p5])
        rows.append(
            TableRow(
                outcome=MeasurementOutcome(r.canon, BellLabel(r.bell)),
                state=state,
                correction=correction,
                probability=r.probability,
            )
        )
    return InstructionTable(
        channel=ChannelSpec.parse(doc.channel),
        input_class=cls,
        rows=tuple(rows),
        swap_bob=doc.swap_bob,
    )


def _report_doc(report: ClassificationReport) -> ReportDoc:
    patterns = []
    tables = []
    for pattern in report.support_patterns:
        canonical = ChannelSpec.from_support_indices(pattern)
        variants = [c.code for c, _ in report.teleporting_channels if c.support == pattern]
        patterns.append(
            PatternDoc(
                letters=canonical.letters,
                canonical=canonical.code,
                kets=canonical.ket_label,
                variants=variants,
            )
        )
        table = report.table_for(canonical)
        if table is not None:
            tables.append(_table_doc(table))
    return ReportDoc(
        input_class=report.input_class.value,
        label=report.input_class.label,
        swap_bob=report.swap_bob,
        patterns=report.n_patterns,
        channels=report.n_channels,
        support_patterns=patterns,
        tables=tables,
    )


def emit_report(report: ClassificationReport, fmt: str = "text") -> str:
    if fmt == "json":
        return _report_doc(report).model_dump_json(by_alias=True, indent=2)
    if fmt != "text":
        raise ValueError(f"Formato desconocido: {fmt!r}")

    lines = [
        f"Clase {report.input_class.value}: {report.input_class.label}",
        f"Patrones de soporte: {report.n_patterns}   canales (con signos): {report.n_channels}",
    ]
    if report.n_patterns:
        frame = pd.DataFrame.from_records(
            [
                {
                    "patrón": "{" + ",".join(ChannelSpec.from_support_indices(p).letters) + "}",
                    "canal": ChannelSpec.from_support_indices(p).ket_label,
                    "código": ChannelSpec.from_support_indices(p).code,
                    "variantes": sum(1 for c, _ in report.teleporting_channels if c.support == p),
                }
                for p in report.support_patterns
            ]
        )
        lines.append(frame.to_string(index=False))
        for pattern in report.support_patterns:
            table = report.table_for(ChannelSpec.from_support_indices(pattern))
            if table is not None:
                lines.append("")
                lines.append(emit_table(table, "text").rstrip("\n"))
    return "\n".join(lines) + "\n"


def teleport_verdict(n_patterns: int) -> str:
    if n_patterns == 0:
        return "No"
    return f"Yes, in {_NUMBER_WORDS.get(n_patterns, str(n_patterns))} different ways"


def summary_frame(reports: Dict[InputClass, ClassificationReport]) -> pd.DataFrame:
    """Tabla resumen: estado de dos partículas / ¿se puede teleportar?"""
    records = []
    for cls in SUMMARY_ORDER:
        if cls not in reports:
            continue
        rep = reports[cls]
        records.append(
            {
                "Two-particle states": cls.label,
                "Can be teleported?": teleport_verdict(rep.n_patterns),
                "patterns": rep.n_patterns,
                "channels": rep.n_channels,
            }
        )
    return pd.DataFrame.from_records(records)


# ============================
# Transcripciones (golden)
# ============================


def golden_dir(data_dir: Optional[Path] = None) -> Path:
    return Path(data_dir or DATA_DIR) / "golden" / GOLDEN_VERSION


def _read_json(path: Path):
    if not path.exists():
        raise FileNotFoundError(f"No existe el fichero de referencia: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def load_golden_tables(data_dir: Optional[Path] = None) -> List[GoldenTable]:
    tables_dir = golden_dir(data_dir) / "tables"
    paths = sorted(tables_dir.glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"No hay tablas de referencia en {tables_dir}")
    tables = [GoldenTable.model_validate(_read_json(p)) for p in paths]
    print(f"[REPORT] {len(tables)} tablas de referencia cargadas de {tables_dir}", file=sys.stderr)
    return tables


def load_channel_lists(data_dir: Optional[Path] = None) -> Dict[InputClass, List[str]]:
    raw = _read_json(golden_dir(data_dir) / "channel_lists.json")
    return {InputClass.parse(name): list(kets) for name, kets in raw.items()}


def load_summary(data_dir: Optional[Path] = None) -> Dict[InputClass, int]:
    raw = _read_json(golden_dir(data_dir) / "summary.json")
    return {InputClass.parse(name): int(n) for name, n in raw.items()}


def load_operations_catalog(data_dir: Optional[Path] = None) -> List[CatalogRow]:
    raw = _read_json(golden_dir(data_dir) / "operations.json")
    return [CatalogRow.model_validate(r) for r in raw]


_OUTCOME_RE = re.compile(r"([01])\s*⟩?\s*1?\s*\|?\s*(φ|ψ|phi|psi)\s*([+\-−])", re.IGNORECASE)
_TERM_RE = re.compile(r"([+\-−]?)\s*([αβδγ])\s*\|([01]{2})⟩")


def parse_outcome_label(text: str) -> MeasurementOutcome:
    """ "|0⟩1 φ+", "|1⟩1 |ψ-⟩23" o "0 phi+" -> MeasurementOutcome"""
    m = _OUTCOME_RE.search(text or "")
    if not m:
        raise ValueError(f"Resultado de medida no reconocido: {text!r}")
    canon, name, sign = m.groups()
    family = "phi" if name.lower() in ("φ", "phi") else "psi"
    return MeasurementOutcome(int(canon), BellLabel(f"{family}{'+' if sign == '+' else '-'}"))


def parse_state_expression(text: str, symbols: Sequence[str]) -> np.ndarray:
    """ "-γ|10⟩+α|01⟩" -> matriz 4×k en el orden de índice de (4,5)."""
    compact = (text or "").replace(" ", "")
    state = np.zeros((4, len(symbols)), dtype=np.complex128)
    consumed = 0
    for m in _TERM_RE.finditer(compact):
        sign, sym, ket = m.groups()
        if sym not in symbols:
            raise ValueError(f"Parámetro {sym} ajeno a la clase ({', '.join(symbols)}) en {text!r}")
        state[int(ket, 2), symbols.index(sym)] += -1.0 if sign in ("-", "−") else 1.0
        consumed += len(m.group(0))
    if consumed != len(compact) or consumed == 0:
        raise ValueError(f"Expresión de estado no reconocida: {text!r}")
    return state


def _phase_equal(u: np.ndarray, v: np.ndarray, tol: float) -> bool:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return False
    return bool(abs(np.vdot(u, v)) >= (1.0 - tol) * nu * nv)


@dataclass
class RowMatch:
    index: int
    golden_outcome: str
    status: str  # match | mismatch | ambiguous
    resolved: Optional[MeasurementOutcome] = None
    detail: str = ""


@dataclass
class GoldenMatchReport:
    table_id: str
    rows: List[RowMatch] = field(default_factory=list)

    @property
    def matches(self) -> int:
        return sum(1 for r in self.rows if r.status == "match")

    @property
    def ambiguous(self) -> int:
        return sum(1 for r in self.rows if r.status == "ambiguous")

    @property
    def mismatches(self) -> int:
        return sum(1 for r in self.rows if r.status == "mismatch")

    @property
    def passed(self) -> bool:
        return self.mismatches == 0


def _row_content_matches(
    generated: TableRow,
    golden_state: np.ndarray,
    golden_op: CorrectionOp,
    tol: float,
) -> str:
    """Cadena vacía si coincide; si no, el motivo."""
    if generated.is_null:
        return "la rama generada es imposible"
    if not _phase_equal(generated.state, golden_state, tol):
        return "estado de Bob distinto"
    mine = realize(generated.correction).matrix @ generated.state
    theirs = realize(golden_op).matrix @ golden_state
    if not _phase_equal(mine, theirs, tol):
        return "la corrección no tiene el mismo efecto"
    return ""


def verify_against_golden(
    t: InstructionTable,
    g: GoldenTable,
    tol: float = 1e-10,
) -> GoldenMatchReport:
    """
    Compara por contenido: estado colapsado salvo fase y efecto de la corrección salvo fase.
    Las filas marcadas como ambiguas se casan con algún resultado aún no reclamado.
    """
    golden_channel = ChannelSpec.from_kets(g.channel)
    golden_class = InputClass.parse(g.input_class)
    if golden_channel != t.channel or golden_class != t.input_class:
        raise ChannelMismatchError(
            f"La tabla {g.id} es del canal {golden_channel} / {golden_class.value}, "
            f"la generada es {t.channel} / {t.input_class.value}"
        )

    symbols = t.input_class.param_symbols
    target = target_embedding(t.input_class, t.swap_bob)
    report = GoldenMatchReport(table_id=g.id)
    claimed = set()
    pending = []

    for i, row in enumerate(g.rows):
        golden_state = parse_state_expression(row.state, symbols)
        golden_op = parse_correction(row.instruction)
        if not _phase_equal(realize(golden_op).matrix @ golden_state, target, tol):
            report.rows.append(RowMatch(i, row.outcome, "mismatch", detail="la instrucción transcrita no recupera la clase"))
            continue
        if row.ambiguous:
            pending.append((i, row, golden_state, golden_op))
            continue
        outcome = parse_outcome_label(row.outcome)
        reason = _row_content_matches(t.row_for(outcome), golden_state, golden_op, tol)
        claimed.add(outcome)
        report.rows.append(RowMatch(i, row.outcome, "mismatch" if reason else "match", outcome, reason))

    for i, row, golden_state, golden_op in pending:
        resolved = None
        for candidate in t.rows:
            if candidate.outcome in claimed:
                continue
            if not _row_content_matches(candidate, golden_state, golden_op, tol):
                resolved = candidate.outcome
                break
        if resolved is None:
            report.rows.append(RowMatch(i, row.outcome, "mismatch", detail="ningún resultado libre encaja"))
        else:
            claimed.add(resolved)
            report.rows.append(
                RowMatch(i, row.outcome, "ambiguous", resolved, f"leída como {resolved.label}")
            )

    report.rows.sort(key=lambda r: r.index)
    return report


@dataclass
class ChannelListCheck:
    input_class: InputClass
    listed: List[FrozenSet] = field(default_factory=list)
    status: Dict[str, str] = field(default_factory=dict)  # letras -> direct | relabeled | missing
    unlisted: List[str] = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return not self.unlisted and all(s == "direct" for s in self.status.values())

    @property
    def passed(self) -> bool:
        return all(s != "missing" for s in self.status.values()) and len(self.status) == len(self.listed)

    @property
    def relabeled(self) -> int:
        return sum(1 for s in self.status.values() if s == "relabeled")


def verify_channel_list(
    listed_kets: Sequence[str],
    direct: ClassificationReport,
    relabeled: Optional[ClassificationReport] = None,
) -> ChannelListCheck:
    """
    Compara una lista de canales transcrita con los patrones encontrados.
    Un canal que sólo funciona con las partículas 4 y 5 intercambiadas queda como "relabeled".
    """
    check = ChannelListCheck(input_class=direct.input_class)
    direct_patterns = set(direct.support_patterns)
    swapped_patterns = set(relabeled.support_patterns) if relabeled is not None else set()

    for kets in listed_kets:
        pattern = ChannelSpec.from_kets(kets).support
        check.listed.append(pattern)
        letters = ChannelSpec.from_support_indices(pattern).letters
        if pattern in direct_patterns:
            check.status[letters] = "direct"
        elif pattern in swapped_patterns:
            check.status[letters] = "relabeled"
        else:
            check.status[letters] = "missing"

    listed = set(check.listed)
    check.unlisted = [
        ChannelSpec.from_support_indices(p).letters for p in direct.support_patterns if p not in listed
    ]
    return check


@dataclass
class CatalogCheck:
    rows: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.rows > 0 and not self.failures


def verify_inverse_catalog(catalog: Sequence[CatalogRow], tol: float = MAP_TOLERANCE) -> CatalogCheck:
    """Cada colocación de (α, β, δ, γ) sobre |00⟩,|10⟩,|01⟩,|11⟩ vuelve al estado original con su instrucción."""
    target = target_embedding(InputClass.GENERAL)
    check = CatalogCheck()
    for row in catalog:
        check.rows += 1
        m = np.zeros((4, 4), dtype=np.complex128)
        for ket, sym in zip(KET_WRITE_ORDER, row.placement):
            m[int(ket, 2), PARAM_SYMBOLS.index(sym)] = 1.0
        op = parse_correction(row.instruction)
        if not _phase_equal(realize(op).matrix @ m, target, tol):
            check.failures.append(f"{' '.join(row.placement)}: {row.instruction}")
    return check
