"""
Uso:
  python cli.py simulate --input "0.6,0,0,0.8" --channel "+000000+"
  python cli.py classify diag
  python cli.py emit-table --channel "|010⟩+|101⟩" --class diag --format json
  python cli.py verify-paper --samples 1000 --seed 42

Las amplitudes de --input van en el orden (α, β, δ, γ) de α|00⟩ + β|10⟩ + δ|01⟩ + γ|11⟩.
Códigos de salida: 0 correcto, 1 fallo de verificación, 2 error de uso o de formato.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from bases import ChannelSpec, InvalidChannelError, rotated_basis_pair
from classify import (
    SUMMARY_ORDER,
    ClassificationReport,
    InputClass,
    class_state,
    classify_all,
    end_to_end_check,
    factorization_condition,
    general_basis_scan,
    general_impossibility_scan,
    is_teleportable,
    random_channel,
    random_class_params,
    schmidt_rank,
)
from corrections import ParseError, equal_up_to_phase
from protocol import (
    ALL_OUTCOMES,
    WRITTEN_ORDER,
    coefficient_matrix,
    contraction_matrix,
    hadamard_block_probe,
    params_to_state,
    run_protocol,
)
from report import (
    KET_WRITE_ORDER,
    emit_report,
    emit_table,
    load_channel_lists,
    load_golden_tables,
    load_operations_catalog,
    load_summary,
    summary_frame,
    verify_against_golden,
    verify_channel_list,
    verify_inverse_catalog,
)
from statevec import PureState

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

SEED = int(os.getenv("TELECHAN_SEED", "42"))
SAMPLES = int(os.getenv("TELECHAN_SAMPLES", "1000"))
TOLERANCE = float(os.getenv("TELECHAN_TOLERANCE", "1e-10"))
WORKERS = int(os.getenv("TELECHAN_WORKERS", "1"))
PROGRESS = os.getenv("TELECHAN_PROGRESS", "0") == "1"

# Desviación admitida en la norma de --input antes de avisar
INPUT_NORM_WARNING = 1e-6

END_TO_END_DRAWS = 20
ORACLE_CHANNELS = 50
EQUIVALENCE_STATES = 100
FACTORIZATION_STATES = 1000


class UsageError(ValueError):
    """Argumentos de la línea de órdenes que no se pueden interpretar."""


class RunConfig(BaseModel):
    seed: int = SEED
    tolerance: float = Field(default=TOLERANCE, gt=0)
    samples: int = Field(default=SAMPLES, ge=1)
    output_path: Optional[Path] = None
    format: Literal["text", "json"] = "text"
    workers: int = Field(default=WORKERS, ge=1)
    progress: bool = PROGRESS


class BranchDoc(BaseModel):
    bell: str
    canon: int
    probability: float
    state: Optional[List[List[float]]] = None


class SimulationDoc(BaseModel):
    channel: str
    input: List[List[float]]
    hadamard: bool
    branches: List[BranchDoc]


# ============================
# Entradas
# ============================


def parse_complex(token: str) -> complex:
    text = token.strip().replace(" ", "").replace("i", "j")
    if not text:
        raise UsageError("Amplitud vacía")
    try:
        return complex(text)
    except ValueError:
        raise UsageError(f"Amplitud no reconocida: {token!r} (formato 're' o 're+imi')")


def parse_input_state(text: str) -> PureState:
    """ "α,β,δ,γ" -> estado de dos partículas; se normaliza con aviso si hace falta."""
    tokens = [t for t in (text or "").split(",")]
    if len(tokens) != 4:
        raise UsageError(f"--input necesita 4 amplitudes (α,β,δ,γ), llegaron {len(tokens)}")
    params = np.array([parse_complex(t) for t in tokens], dtype=np.complex128)
    nrm = float(np.linalg.norm(params))
    if nrm == 0.0:
        raise UsageError("--input es el vector nulo")
    if abs(nrm - 1.0) > INPUT_NORM_WARNING:
        print(f"[CLI] Aviso: la entrada tiene norma {nrm:.6g}; se normaliza", file=sys.stderr)
    return params_to_state(*(params / nrm))


def parse_channel(text: str) -> ChannelSpec:
    if "|" in (text or ""):
        return ChannelSpec.from_kets(text)
    return ChannelSpec.parse(text)


def parse_class(name: str) -> InputClass:
    try:
        return InputClass.parse(name)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _write(config: RunConfig, text: str) -> None:
    if config.output_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    config.output_path.parent.mkdir(parents=True, exist_ok=True)
    config.output_path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    print(f"[CLI] Escrito {config.output_path}", file=sys.stderr)


def _format_amplitudes(s: PureState) -> str:
    terms = []
    for ket in KET_WRITE_ORDER:
        a = complex(s.amplitudes[int(ket, 2)])
        if abs(a) < 1e-12:
            continue
        if abs(a.imag) < 1e-12:
            terms.append(f"{a.real:+.6f}|{ket}⟩")
        else:
            terms.append(f"+({a.real:.6f}{a.imag:+.6f}i)|{ket}⟩")
    return "".join(terms).lstrip("+")


# ============================
# Subcomandos
# ============================


def cmd_simulate(input_spec: str, channel_spec: str, config: RunConfig, use_hadamard: bool = True) -> int:
    psi = parse_input_state(input_spec)
    channel = parse_channel(channel_spec)
    branches = run_protocol(psi, channel, use_hadamard)

    if config.format == "json":
        doc = SimulationDoc(
            channel=channel.code,
            input=[[float(psi.amplitudes[i].real), float(psi.amplitudes[i].imag)] for i in WRITTEN_ORDER],
            hadamard=use_hadamard,
            branches=[
                BranchDoc(
                    bell=b.outcome.bell.value,
                    canon=b.outcome.canon,
                    probability=round(b.probability, 15),
                    state=None if b.is_null else [[float(a.real), float(a.imag)] for a in b.bob_state.amplitudes],
                )
                for b in branches
            ],
        )
        _write(config, doc.model_dump_json(indent=2))
        return EXIT_OK

    frame = pd.DataFrame.from_records(
        [
            {
                "Alice's measurements": b.outcome.label,
                "probability": f"{b.probability:.12f}",
                "Bob's state (4,5)": "-" if b.is_null else _format_amplitudes(b.bob_state),
            }
            for b in branches
        ]
    )
    header = f"Canal {channel.ket_label} ({channel.code})  hadamard={'sí' if use_hadamard else 'no'}"
    _write(config, header + "\n" + frame.to_string(index=False))
    return EXIT_OK


def cmd_classify(class_name: str, config: RunConfig, swap_bob: bool = False) -> int:
    cls = parse_class(class_name)
    report = classify_all(cls, workers=config.workers, progress=config.progress, swap_bob=swap_bob)
    _write(config, emit_report(report, config.format))
    return EXIT_OK


def cmd_emit_table(channel_spec: str, class_name: str, config: RunConfig, swap_bob: bool = False) -> int:
    channel = parse_channel(channel_spec)
    cls = parse_class(class_name)
    table = is_teleportable(cls, channel, swap_bob=swap_bob)
    if table is None:
        print(f"[CLI] El canal {channel.ket_label} no teleporta la clase {cls.label}", file=sys.stderr)
        return EXIT_FAILED
    _write(config, emit_table(table, config.format))
    return EXIT_OK


# ============================
# verify-paper
# ============================

CheckResult = Tuple[bool, str]


def check_summary(reports: Dict[InputClass, ClassificationReport], expected: Dict[InputClass, int]) -> CheckResult:
    got = {cls: reports[cls].n_patterns for cls in SUMMARY_ORDER}
    ok = all(got[cls] == expected.get(cls) for cls in SUMMARY_ORDER)
    counts = "/".join(str(got[cls]) for cls in SUMMARY_ORDER)
    return ok, f"recuento de patrones {counts} (general/diag/anti-diag/right-col/left-col/top-row/bottom-row)"


def check_golden_tables(tolerance: float) -> CheckResult:
    matched = ambiguous = failed = 0
    details = []
    for golden in load_golden_tables():
        cls = InputClass.parse(golden.input_class)
        channel = ChannelSpec.from_kets(golden.channel)
        table = is_teleportable(cls, channel)
        if table is None:
            failed += len(golden.rows)
            details.append(f"{golden.id}: canal no teleportable")
            continue
        result = verify_against_golden(table, golden, tolerance)
        matched += result.matches
        ambiguous += result.ambiguous
        failed += result.mismatches
        for row in result.rows:
            if row.status == "mismatch":
                details.append(f"{golden.id} fila {row.index + 1}: {row.detail}")
            elif row.status == "ambiguous":
                print(f"[REPORT] {golden.id} fila {row.index + 1} ({row.golden_outcome}) {row.detail}", file=sys.stderr)
    msg = f"tablas transcritas: {matched} filas coinciden, {ambiguous} ambiguas, {failed} fallos"
    if details:
        msg += " | " + "; ".join(details)
    return failed == 0, msg


def check_channel_lists(
    reports: Dict[InputClass, ClassificationReport],
    swapped: Dict[InputClass, ClassificationReport],
) -> CheckResult:
    ok = True
    parts = []
    for cls, listed in load_channel_lists().items():
        check = verify_channel_list(listed, reports[cls], swapped.get(cls))
        if cls in swapped:
            good = check.passed and len(listed) == reports[cls].n_patterns
            parts.append(
                f"{cls.value}: {len(listed)} listados, {check.relabeled} con 4↔5 intercambiadas, "
                f"{reports[cls].n_patterns} directos"
            )
        else:
            good = check.exact
            parts.append(f"{cls.value}: igualdad exacta {'sí' if good else 'no'}")
        ok = ok and good
    return ok, "listas de canales: " + "; ".join(parts)


def check_end_to_end(
    reports: Dict[InputClass, ClassificationReport],
    tolerance: float,
    rng: np.random.Generator,
) -> Tuple[CheckResult, CheckResult]:
    pairs = 0
    worst_probability = 0.0
    worst_fidelity = 1.0
    for cls in SUMMARY_ORDER:
        for _, table in reports[cls].teleporting_channels:
            pairs += 1
            result = end_to_end_check(table, END_TO_END_DRAWS, rng, tol=tolerance)
            expected = max(abs(row.probability - 0.125) for row in table.rows)
            worst_probability = max(worst_probability, result.max_probability_error, expected)
            worst_fidelity = min(worst_fidelity, result.min_fidelity)
    equiprobable = (
        worst_probability <= 1e-12,
        f"equiprobabilidad: {pairs} pares × {END_TO_END_DRAWS} muestras, máx |p - 1/8| = {worst_probability:.3e}",
    )
    fidelity = (
        pairs > 0 and worst_fidelity >= 1.0 - tolerance,
        f"fidelidad extremo a extremo: mín {worst_fidelity:.16f} (tolerancia {tolerance:g})",
    )
    return equiprobable, fidelity


def check_impossibility(config: RunConfig) -> CheckResult:
    report = general_impossibility_scan(workers=config.workers, progress=config.progress)
    return report.passed, (
        f"imposibilidad exhaustiva: {report.channels} canales × 8 × 32 = {report.candidates} candidatos, "
        f"{report.engaged_outcomes} ramas con las 4 columnas activas, {len(report.false_positives)} falsos positivos"
    )


def check_oracle(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    probes_ok = True
    for _ in range(ORACLE_CHANNELS):
        channel = random_channel(rng)
        for outcome in ALL_OUTCOMES:
            for use_hadamard in (True, False):
                diff = np.max(
                    np.abs(
                        coefficient_matrix(channel, outcome, use_hadamard)
                        - contraction_matrix(channel, outcome, use_hadamard)
                    )
                )
                worst = max(worst, float(diff))
        alpha, delta = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        probes_ok = probes_ok and hadamard_block_probe(channel, alpha, delta)
    return worst <= 1e-12 and probes_ok, (
        f"oráculo de contracción: {ORACLE_CHANNELS} canales, máx diferencia {worst:.3e}, "
        f"bloques (α±β)/(δ±γ) {'confirmados' if probes_ok else 'NO confirmados'}"
    )


def check_rotated_basis(rng: np.random.Generator) -> CheckResult:
    phi, chi = rotated_basis_pair(np.sqrt(0.5), np.sqrt(0.5))
    worst = 0.0
    phases_ok = True
    for _ in range(EQUIVALENCE_STATES):
        psi = class_state(InputClass.GENERAL, random_class_params(InputClass.GENERAL, rng))
        channel = random_channel(rng)
        with_h = run_protocol(psi, channel, use_hadamard=True)
        rotated = run_protocol(psi, channel, use_hadamard=False, particle1_basis=(chi, phi))
        for a, b in zip(with_h, rotated):
            worst = max(worst, abs(a.probability - b.probability))
            if a.is_null != b.is_null:
                phases_ok = False
            elif not a.is_null and not equal_up_to_phase(a.bob_state, b.bob_state, 1e-12):
                phases_ok = False
    return worst <= 1e-12 and phases_ok, (
        f"Hadamard + base canónica ≡ base rotada (A=B=1/√2): {EQUIVALENCE_STATES} estados, "
        f"máx |Δp| {worst:.3e}, residuos {'equivalentes' if phases_ok else 'DISTINTOS'}"
    )


def check_factorization(rng: np.random.Generator) -> CheckResult:
    disagreements = 0
    products = 0
    for i in range(FACTORIZATION_STATES):
        if i % 2 == 0:
            u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            amps = np.kron(u, v)
            amps = amps / np.linalg.norm(amps)
            params = [amps[i_] for i_ in WRITTEN_ORDER]
            products += 1
        else:
            params = random_class_params(InputClass.GENERAL, rng)
        if factorization_condition(*params, tol=1e-9) != (schmidt_rank(*params) == 1):
            disagreements += 1
    return disagreements == 0, (
        f"factorización αγ = βδ frente a rango de Schmidt: {FACTORIZATION_STATES} estados "
        f"({products} producto), {disagreements} discrepancias"
    )


def check_basis_scan(config: RunConfig) -> CheckResult:
    report = general_basis_scan(config.samples, config.seed, progress=config.progress)
    return report.passed, (
        f"bases generales sobre (2,3): {report.samples} muestras (seed={report.seed}), {report.successes} éxitos"
    )


def check_catalog() -> CheckResult:
    check = verify_inverse_catalog(load_operations_catalog())
    msg = f"catálogo de operaciones inversas: {check.rows} filas, {len(check.failures)} fallos"
    if check.failures:
        msg += " | " + "; ".join(check.failures)
    return check.passed, msg


def cmd_verify_paper(config: RunConfig) -> int:
    rng = np.random.default_rng(config.seed)

    reports = {
        cls: classify_all(cls, workers=config.workers, progress=config.progress) for cls in SUMMARY_ORDER
    }
    swapped = {
        cls: classify_all(cls, workers=config.workers, progress=config.progress, swap_bob=True)
        for cls in (InputClass.LEFT_COL, InputClass.RIGHT_COL)
    }

    checks: List[Tuple[str, Callable[[], CheckResult]]] = [
        ("1", lambda: check_summary(reports, load_summary())),
        ("2", lambda: check_golden_tables(config.tolerance)),
        ("3", lambda: check_channel_lists(reports, swapped)),
    ]
    results: List[Tuple[str, bool, str]] = []
    for key, fn in checks:
        ok, msg = fn()
        results.append((key, ok, msg))

    equiprobable, fidelity = check_end_to_end(reports, config.tolerance, rng)
    results.append(("4", *equiprobable))
    results.append(("5", *fidelity))

    for key, fn in [
        ("6", lambda: check_impossibility(config)),
        ("7", lambda: check_oracle(rng)),
        ("8", lambda: check_rotated_basis(rng)),
        ("9", lambda: check_factorization(rng)),
        ("10", lambda: check_basis_scan(config)),
        ("A", check_catalog),
    ]:
        ok, msg = fn()
        results.append((key, ok, msg))

    lines = [f"[{'PASS' if ok else 'FAIL'}] {key:>2} {msg}" for key, ok, msg in results]
    lines.append("")
    lines.append(summary_frame(reports).to_string(index=False))
    failed = sum(1 for _, ok, _ in results if not ok)
    lines.append("")
    lines.append(f"{len(results) - failed}/{len(results)} criterios superados")
    _write(config, "\n".join(lines))
    return EXIT_OK if failed == 0 else EXIT_FAILED


# ============================
# Entrada
# ============================


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=SEED)
    common.add_argument("--samples", type=int, default=SAMPLES)
    common.add_argument("--tolerance", type=float, default=TOLERANCE)
    common.add_argument("--format", choices=["text", "json"], default="text")
    common.add_argument("--out", help="Fichero de salida (por defecto stdout)")
    common.add_argument("--workers", type=int, default=WORKERS, help="Hilos para recorrer los canales")
    common.add_argument("--progress", action="store_true", default=PROGRESS, help="Barra de progreso en stderr")

    parser = argparse.ArgumentParser(description="Teleportación de estados de dos partículas por un canal de tres")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_sim = sub.add_parser("simulate", parents=[common], help="Ejecuta el protocolo sobre un estado concreto")
    p_sim.add_argument("--input", required=True, help="α,β,δ,γ  p.ej. 0.6,0,0,0.8 o 0.5+0.5i,...")
    p_sim.add_argument("--channel", required=True, help='"+000000+" o "|000⟩+|111⟩"')
    p_sim.add_argument("--no-hadamard", action="store_true")

    p_cls = sub.add_parser("classify", parents=[common], help="Recorre los 6560 canales para una clase")
    p_cls.add_argument("class_name", nargs="?", metavar="class")
    p_cls.add_argument("--class", dest="class_opt")
    p_cls.add_argument("--swap-bob", action="store_true", help="Objetivo con las partículas 4 y 5 intercambiadas")

    p_tab = sub.add_parser("emit-table", parents=[common], help="Tabla de instrucciones de un canal")
    p_tab.add_argument("--channel", required=True)
    p_tab.add_argument("--class", dest="class_opt", required=True)
    p_tab.add_argument("--swap-bob", action="store_true")

    sub.add_parser(
        "verify-paper", aliases=["verify-all"], parents=[common], help="Batería completa de comprobaciones"
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = RunConfig(
            seed=args.seed,
            tolerance=args.tolerance,
            samples=args.samples,
            output_path=Path(args.out) if args.out else None,
            format=args.format,
            workers=args.workers,
            progress=args.progress,
        )

        if args.cmd == "simulate":
            return cmd_simulate(args.input, args.channel, config, use_hadamard=not args.no_hadamard)

        elif args.cmd == "classify":
            name = args.class_opt or args.class_name
            if not name:
                raise UsageError("Falta la clase (posicional o --class)")
            return cmd_classify(name, config, swap_bob=args.swap_bob)

        elif args.cmd == "emit-table":
            return cmd_emit_table(args.channel, args.class_opt, config, swap_bob=args.swap_bob)

        elif args.cmd in ("verify-paper", "verify-all"):
            return cmd_verify_paper(config)

    except (ValidationError, InvalidChannelError, ParseError, UsageError) as e:
        print(f"[CLI] Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"[CLI] {e}", file=sys.stderr)
        return EXIT_FAILED

    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
