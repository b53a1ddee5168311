import numpy as np
import pytest
from numpy.testing import assert_allclose

from bases import ChannelSpec, bell_basis
from classify import (
    InputClass,
    InstructionTable,
    class_state,
    classify_all,
    end_to_end_check,
    equal_tables,
    factorization_condition,
    general_basis_scan,
    general_impossibility_scan,
    is_teleportable,
    random_channel,
    random_orthonormal_basis,
    sampled_teleportable,
    schmidt_rank,
    sign_variants,
    symbolic_state,
    target_embedding,
    teleports_with_basis,
)
from corrections import IDENTITY_CORRECTION, CorrectionOp
from protocol import ALL_OUTCOMES, state_to_params
from statevec import PureState

DIAG_PATTERNS = ["ae", "ah", "bc", "bg", "cf", "de", "dh", "fg"]
COLUMN_PATTERNS = ["af", "bd", "ch", "eg"]
SWAPPED_COLUMN_PATTERNS = ["ae", "bc", "dh", "fg"]

EXPECTED_PATTERNS = {
    InputClass.GENERAL: [],
    InputClass.DIAG: DIAG_PATTERNS,
    InputClass.ANTI_DIAG: DIAG_PATTERNS,
    InputClass.LEFT_COL: COLUMN_PATTERNS,
    InputClass.RIGHT_COL: COLUMN_PATTERNS,
    InputClass.TOP_ROW: [],
    InputClass.BOTTOM_ROW: [],
}


@pytest.mark.parametrize("cls", list(InputClass))
def test_support_patterns_per_class(cls, reports):
    report = reports[cls]
    assert report.pattern_letters() == EXPECTED_PATTERNS[cls]


@pytest.mark.parametrize("cls", list(InputClass))
def test_every_sign_variant_teleports(cls, reports):
    report = reports[cls]
    assert report.n_channels == sum(2 ** len(p) for p in report.support_patterns)
    listed = {c for c, _ in report.teleporting_channels}
    for canonical in report.canonical_channels():
        assert set(sign_variants(canonical)) <= listed


def test_channel_counts(reports):
    counts = {cls.value: reports[cls].counts for cls in InputClass}
    assert counts["diag"] == {"patterns": 8, "channels": 32}
    assert counts["anti-diag"] == {"patterns": 8, "channels": 32}
    assert counts["left-col"] == {"patterns": 4, "channels": 16}
    assert counts["right-col"] == {"patterns": 4, "channels": 16}
    assert counts["general"] == {"patterns": 0, "channels": 0}


def test_canonical_channel_listed_first(reports):
    report = reports[InputClass.DIAG]
    first, _ = report.teleporting_channels[0]
    assert first.is_canonical()
    assert first.letters == "ae"


def test_swapped_columns_use_relabeled_patterns(swapped_reports):
    for report in swapped_reports.values():
        assert report.swap_bob
        assert report.pattern_letters() == SWAPPED_COLUMN_PATTERNS


def test_swap_bob_changes_verdict():
    channel = ChannelSpec.parse("+000+000")
    assert is_teleportable(InputClass.LEFT_COL, channel) is None
    table = is_teleportable(InputClass.LEFT_COL, channel, swap_bob=True)
    assert table is not None and table.swap_bob


def test_ghz_table_for_diagonal_class(reports):
    table = reports[InputClass.DIAG].table_for(ChannelSpec.parse("+000000+"))
    assert table is not None
    assert table.self_check()
    assert [r.outcome for r in table.rows] == list(ALL_OUTCOMES)
    for row in table.rows:
        assert row.probability == pytest.approx(0.125, abs=1e-12)
        assert not row.is_null
    assert table.rows[0].correction == IDENTITY_CORRECTION
    assert_allclose(table.rows[0].state, target_embedding(InputClass.DIAG), atol=1e-12)


def test_product_channel_table_needs_cnot():
    table = is_teleportable(InputClass.DIAG, ChannelSpec.parse("+000+000"))
    assert table is not None
    assert table.rows[0].correction == CorrectionOp(cnot_first=True)
    assert sum(r.probability for r in table.rows) == pytest.approx(1.0)


def test_non_teleporting_channel():
    channel = ChannelSpec.parse("++000000")
    assert is_teleportable(InputClass.DIAG, channel) is None
    report = classify_all(InputClass.DIAG, channels=[channel])
    assert report.n_channels == 0
    assert report.table_for(channel) is None


def test_parallel_scan_matches_serial():
    pool = sign_variants(ChannelSpec.parse("+000000+")) + [ChannelSpec.parse("+0+00000")]
    serial = classify_all(InputClass.DIAG, channels=pool, workers=1)
    threaded = classify_all(InputClass.DIAG, channels=pool, workers=3)
    assert [c for c, _ in serial.teleporting_channels] == [c for c, _ in threaded.teleporting_channels]
    assert serial.n_channels == 4


def test_input_class_helpers():
    assert InputClass.parse("Left_Col") is InputClass.LEFT_COL
    assert InputClass.parse("anti-diag") is InputClass.ANTI_DIAG
    with pytest.raises(ValueError):
        InputClass.parse("diagonal")
    assert InputClass.GENERAL.free_params == 4
    assert InputClass.DIAG.param_symbols == ("α", "γ")
    assert InputClass.DIAG.label == "α|00⟩+γ|11⟩"


def test_target_embedding_and_swap():
    t = target_embedding(InputClass.LEFT_COL)
    # α|00⟩ + δ|01⟩: δ en la fila |01⟩
    assert_allclose(t, [[1, 0], [0, 1], [0, 0], [0, 0]])
    swapped = target_embedding(InputClass.LEFT_COL, swap_bob=True)
    assert_allclose(swapped, [[1, 0], [0, 0], [0, 1], [0, 0]])


def test_class_state():
    s = class_state(InputClass.DIAG, [0.6, 0.8])
    assert_allclose(s.amplitudes, [0.6, 0, 0, 0.8])
    with pytest.raises(ValueError):
        class_state(InputClass.DIAG, [1.0, 0.0, 0.0])


def test_symbolic_state_fixes_leading_sign():
    m = np.array([[0, -2], [0, 0], [0, 0], [2, 0]], dtype=complex)
    assert_allclose(symbolic_state(m), [[0, -1], [0, 0], [0, 0], [1, 0]])


def test_table_requires_eight_distinct_rows(reports):
    table = reports[InputClass.DIAG].table_for(ChannelSpec.parse("+000000+"))
    with pytest.raises(ValueError):
        InstructionTable(table.channel, table.input_class, table.rows[:7])
    with pytest.raises(ValueError):
        InstructionTable(table.channel, table.input_class, table.rows[:7] + table.rows[:1])


def test_equal_tables(reports):
    report = reports[InputClass.DIAG]
    (c1, t1), (c2, t2) = report.teleporting_channels[:2]
    assert equal_tables(t1, is_teleportable(InputClass.DIAG, c1))
    assert not equal_tables(t1, t2)


@pytest.mark.parametrize(
    "params, product",
    [
        ((1, 0, 0, 0), True),
        ((0.5, 0.5, 0.5, 0.5), True),
        ((0.6, 0, 0, 0.8), False),
        ((0, 0.6, 0.8, 0), False),
    ],
)
def test_factorization_condition(params, product):
    assert factorization_condition(*params) is product
    assert (schmidt_rank(*params) == 1) is product


def test_factorization_agrees_with_schmidt_rank(rng):
    for _ in range(10):
        u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        amps = np.kron(u, v)
        product = PureState(2, amps / np.linalg.norm(amps))
        assert factorization_condition(*state_to_params(product))
        assert schmidt_rank(*state_to_params(product)) == 1

        z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        entangled = PureState(2, z / np.linalg.norm(z))
        assert not factorization_condition(*state_to_params(entangled))
        assert schmidt_rank(*state_to_params(entangled)) == 2


def test_general_impossibility_scan():
    report = general_impossibility_scan()
    assert report.channels == 6560
    assert report.outcomes == 6560 * 8
    assert report.candidates == 6560 * 8 * 32
    assert report.passed


def test_general_basis_scan():
    with pytest.raises(ValueError):
        general_basis_scan(samples=0, seed=1)
    report = general_basis_scan(samples=5, seed=7)
    assert report.samples == 5
    assert report.passed


def test_teleports_with_bell_basis():
    basis = bell_basis()
    assert teleports_with_basis(InputClass.DIAG, ChannelSpec.parse("+000000+"), basis)
    assert not teleports_with_basis(InputClass.GENERAL, ChannelSpec.parse("+000000+"), basis)


def test_random_helpers(rng):
    basis = random_orthonormal_basis(rng)
    gram = np.array([[a.inner(b) for b in basis] for a in basis])
    assert_allclose(gram, np.eye(4), atol=1e-12)
    assert random_channel(rng).n_nonzero >= 1


@pytest.mark.parametrize("cls, code", [
    (InputClass.DIAG, "+000000+"),
    (InputClass.ANTI_DIAG, "0+0000+0"),
    (InputClass.LEFT_COL, "+0000+00"),
    (InputClass.RIGHT_COL, "00+0000-"),
])
def test_end_to_end(cls, code, reports, rng):
    table = reports[cls].table_for(ChannelSpec.parse(code))
    assert table is not None
    result = end_to_end_check(table, draws=5, rng=rng)
    assert result.passed
    assert result.min_fidelity >= 1.0 - 1e-10


def test_end_to_end_with_swapped_bob(swapped_reports, rng):
    table = swapped_reports[InputClass.LEFT_COL].table_for(ChannelSpec.parse("+000+000"))
    assert table is not None and table.swap_bob
    assert end_to_end_check(table, draws=5, rng=rng).passed


def test_sampled_criterion_agrees_with_exact(rng):
    ghz = ChannelSpec.parse("+000000+")
    assert sampled_teleportable(InputClass.DIAG, ghz, draws=5, rng=rng)
    assert not sampled_teleportable(InputClass.GENERAL, ghz, draws=5, rng=rng)
    assert not sampled_teleportable(InputClass.TOP_ROW, ghz, draws=5, rng=rng)


def test_sign_variants():
    variants = sign_variants(ChannelSpec.parse("+000000+"))
    assert len(variants) == 4
    assert {v.support for v in variants} == {frozenset({0, 7})}


def test_exact_and_sampled_criteria_agree_on_every_teleporting_channel(reports):
    rng = np.random.default_rng(7)
    pairs = [(cls, c, t) for cls, r in reports.items() for c, t in r.teleporting_channels]
    assert len(pairs) == 96
    for cls, channel, table in pairs:
        assert sampled_teleportable(cls, channel, draws=3, rng=rng), (cls, channel.code)
        check = end_to_end_check(table, draws=3, rng=rng)
        assert check.passed, (cls, channel.code, check.min_fidelity)
