import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bases import IDENTITY, SIGMA_X, SIGMA_Z, BellLabel, ChannelSpec, cnot
from corrections import (
    ALL_CORRECTIONS,
    IDENTITY_CORRECTION,
    CorrectionOp,
    Local,
    ParseError,
    apply_correction,
    corrections_for,
    equal_up_to_phase,
    find_correction,
    instruction,
    matching_corrections,
    parse_correction,
    realize,
    render,
    search_correction,
    unitaries_equal_up_to_phase,
)
from protocol import MeasurementOutcome, coefficient_matrix
from statevec import NormalizationError, PureState, ShapeError

# α|00⟩ + γ|11⟩ sobre (4,5), filas en orden de índice |00⟩,|01⟩,|10⟩,|11⟩
DIAG_TARGET = np.array([[1, 0], [0, 0], [0, 0], [0, 1]], dtype=complex)
# -γ|00⟩ + α|11⟩
SWAPPED_DIAG = np.array([[0, -1], [0, 0], [0, 0], [1, 0]], dtype=complex)


def test_correction_set():
    assert len(ALL_CORRECTIONS) == 32
    assert list(ALL_CORRECTIONS) == sorted(ALL_CORRECTIONS)
    assert ALL_CORRECTIONS[0] == IDENTITY_CORRECTION
    assert IDENTITY_CORRECTION.is_identity
    assert not CorrectionOp(cnot_first=True).is_identity
    assert all(realize(op).is_unitary() for op in ALL_CORRECTIONS)


def test_corrections_are_distinct_up_to_phase():
    for a, b in itertools.combinations(ALL_CORRECTIONS, 2):
        assert not unitaries_equal_up_to_phase(realize(a).matrix, realize(b).matrix)


def test_realize_examples():
    assert_allclose(realize(CorrectionOp(False, Local.X, Local.I)).matrix, np.kron(SIGMA_X, IDENTITY))
    assert_allclose(realize(CorrectionOp(True)).matrix, cnot().matrix)
    # el CNOT actúa primero
    expected = np.kron(SIGMA_Z @ SIGMA_X, SIGMA_X) @ cnot().matrix
    assert_allclose(realize(CorrectionOp(True, Local.ZX, Local.X)).matrix, expected)
    assert_allclose(Local.ZX.matrix, [[0, 1], [-1, 0]])


def test_apply_correction():
    out = apply_correction(CorrectionOp(True), PureState.basis("10"))
    assert out.allclose(PureState.basis("11"))
    with pytest.raises(ShapeError):
        apply_correction(IDENTITY_CORRECTION, PureState.basis("1"))


def test_equal_up_to_phase():
    a = PureState(2, np.array([1, 0, 0, 1j]) / np.sqrt(2))
    assert equal_up_to_phase(a, PureState(2, np.exp(0.7j) * a.amplitudes))
    assert equal_up_to_phase(a, PureState(2, 3 * a.amplitudes))
    assert not equal_up_to_phase(a, PureState(2, np.array([1, 0, 0, -1j]) / np.sqrt(2)))
    with pytest.raises(NormalizationError):
        equal_up_to_phase(a, PureState(2, np.zeros(4)))
    with pytest.raises(ShapeError):
        equal_up_to_phase(a, PureState.basis("0"))


def test_unitaries_equal_up_to_phase():
    assert unitaries_equal_up_to_phase(SIGMA_X @ SIGMA_Z, -(SIGMA_Z @ SIGMA_X))
    assert not unitaries_equal_up_to_phase(SIGMA_X, SIGMA_Z)
    assert not unitaries_equal_up_to_phase(SIGMA_X, np.eye(4))


def test_search_finds_local_correction():
    result = search_correction(SWAPPED_DIAG, DIAG_TARGET)
    assert result.found and not result.null
    assert result.op == CorrectionOp(False, Local.X, Local.ZX)
    assert abs(result.scale) == pytest.approx(1.0)
    assert matching_corrections(SWAPPED_DIAG, DIAG_TARGET) == [
        CorrectionOp(False, Local.X, Local.ZX),
        CorrectionOp(False, Local.ZX, Local.X),
    ]


def test_search_needs_cnot_for_product_channel():
    # (|000⟩ + |110⟩)345: Bob recibe α|00⟩ + γ|10⟩ en |0⟩1|φ+⟩23
    channel = ChannelSpec.parse("+000+000")
    m = coefficient_matrix(channel, MeasurementOutcome(0, BellLabel.PHI_PLUS))[:, [0, 3]]
    result = search_correction(m, DIAG_TARGET)
    assert result.op == CorrectionOp(cnot_first=True)
    assert matching_corrections(m, DIAG_TARGET) == [
        CorrectionOp(cnot_first=True),
        CorrectionOp(True, Local.Z, Local.Z),
    ]


def test_search_null_and_failure():
    null = search_correction(np.zeros((4, 2)), DIAG_TARGET)
    assert null.null and null.found and null.op is None
    assert matching_corrections(np.zeros((4, 2)), DIAG_TARGET) == []

    collapsed = np.array([[1, 0], [0, 0], [0, 0], [0, 0]], dtype=complex)
    miss = search_correction(collapsed, DIAG_TARGET)
    assert not miss.found

    with pytest.raises(ShapeError):
        search_correction(SWAPPED_DIAG, np.eye(4))


def test_find_correction_keeps_keys():
    results = find_correction({"a": SWAPPED_DIAG, "b": DIAG_TARGET}, DIAG_TARGET)
    assert results["b"].op == IDENTITY_CORRECTION
    assert results["a"].op == CorrectionOp(False, Local.X, Local.ZX)


def test_render_and_instruction():
    assert render(IDENTITY_CORRECTION) == "I"
    assert render(CorrectionOp(False, Local.Z, Local.I)) == "(σz)4⊗I5"
    assert render(CorrectionOp(False, Local.X, Local.X)) == "(σx)4⊗(σx)5"
    assert render(CorrectionOp(True, Local.ZX, Local.X)) == "(σz σx)4⊗(σx)5 · CNOT"
    assert render(CorrectionOp(True)) == "CNOT"
    assert instruction(IDENTITY_CORRECTION) == "do nothing"
    assert instruction(CorrectionOp(True)) == "apply CNOT"


@pytest.mark.parametrize(
    "text, expected",
    [
        ("do nothing", IDENTITY_CORRECTION),
        ("apply (σz)4⊗I5", CorrectionOp(False, Local.Z, Local.I)),
        ("apply (σx)4⊗(σx)5", CorrectionOp(False, Local.X, Local.X)),
        ("apply (σz σx)4⊗(σx)5 · CNOT", CorrectionOp(True, Local.ZX, Local.X)),
        ("apply CNOT", CorrectionOp(True)),
        ("(σz)5⊗(σx)4 CNOT", CorrectionOp(True, Local.X, Local.Z)),
        ("σx₄", CorrectionOp(False, Local.X, Local.I)),
        ("(σx σz)4", CorrectionOp(False, Local.ZX, Local.I)),
    ],
)
def test_parse_correction(text, expected):
    assert parse_correction(text) == expected


def test_parse_accepts_rendered_form():
    for op in ALL_CORRECTIONS:
        assert parse_correction(instruction(op)) == op


@pytest.mark.parametrize("text", ["", "apply", "apply CNOT (σx)4", "(σy)4", "apply Toffoli"])
def test_parse_correction_rejects(text):
    with pytest.raises(ParseError):
        parse_correction(text)


def test_state_level_search_agrees_with_map_search(rng):
    alpha, gamma = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    norm = np.sqrt(abs(alpha) ** 2 + abs(gamma) ** 2)
    alpha, gamma = alpha / norm, gamma / norm
    received = PureState(2, SWAPPED_DIAG @ np.array([alpha, gamma]))
    target = PureState(2, DIAG_TARGET @ np.array([alpha, gamma]))
    assert corrections_for(received, target) == matching_corrections(SWAPPED_DIAG, DIAG_TARGET)
