import json

import pytest

from bases import ChannelSpec
from classify import InputClass, equal_tables, is_teleportable
from cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main, parse_complex, parse_input_state
from report import parse_table


def test_parse_complex():
    assert parse_complex("0.5") == 0.5
    assert parse_complex(" 0.5 + 0.5i ") == 0.5 + 0.5j
    assert parse_complex("-1i") == -1j
    with pytest.raises(ValueError):
        parse_complex("uno")


def test_parse_input_state_normalizes(capsys):
    s = parse_input_state("1,0,0,1")
    assert s.is_normalized()
    assert "se normaliza" in capsys.readouterr().err
    with pytest.raises(ValueError):
        parse_input_state("0,0,0,0")
    with pytest.raises(ValueError):
        parse_input_state("1,0,0")


def test_simulate_ghz_diagonal(capsys):
    code = main(["simulate", "--input", "0.6,0,0,0.8", "--channel", "+000000+"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert out.count("0.125000000000") == 8


def test_simulate_json(capsys):
    code = main(["simulate", "--input", "0.6,0,0,0.8", "--channel", "|000⟩+|111⟩", "--format", "json"])
    doc = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK
    assert doc["channel"] == "+000000+"
    assert doc["hadamard"] is True
    assert len(doc["branches"]) == 8
    assert sum(b["probability"] for b in doc["branches"]) == pytest.approx(1.0)


def test_simulate_without_hadamard(capsys):
    code = main(["simulate", "--input", "0.6,0,0,0.8", "--channel", "+000000+", "--no-hadamard"])
    assert code == EXIT_OK
    assert "hadamard=no" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--input", "0.6,0,0,0.8", "--channel", "++"],
        ["simulate", "--input", "0.6,0,0.8", "--channel", "+000000+"],
        ["classify", "diagonal"],
        ["classify"],
        ["emit-table", "--channel", "+000000+", "--class", "diag", "--tolerance", "0"],
        ["verify-paper", "--samples", "0"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "[CLI] Error" in capsys.readouterr().err


def test_classify_text(capsys):
    assert main(["classify", "top-row"]) == EXIT_OK
    assert "Patrones de soporte: 0" in capsys.readouterr().out


def test_classify_json(capsys):
    assert main(["classify", "--class", "left-col", "--format", "json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["class"] == "left-col"
    assert doc["patterns"] == 4
    assert doc["channels"] == 16


def test_classify_swapped(capsys):
    assert main(["classify", "left-col", "--swap-bob", "--format", "json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["swap_bob"] is True
    assert [p["letters"] for p in doc["support_patterns"]] == ["ae", "bc", "dh", "fg"]


def test_emit_table(capsys):
    assert main(["emit-table", "--channel", "|000⟩+|111⟩", "--class", "diag"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "do nothing" in out
    assert "apply (σx)4⊗(σx)5" in out


def test_emit_table_for_non_teleporting_channel(capsys):
    assert main(["emit-table", "--channel", "++000000", "--class", "diag"]) == EXIT_FAILED
    assert "no teleporta" in capsys.readouterr().err


def test_emit_table_is_deterministic(capsys):
    argv = ["emit-table", "--channel", "00+00+00", "--class", "anti-diag", "--format", "json"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


def test_emit_table_to_file(tmp_path):
    target = tmp_path / "tablas" / "ghz.json"
    code = main(["emit-table", "--channel", "+000000+", "--class", "diag", "--format", "json", "--out", str(target)])
    assert code == EXIT_OK
    table = parse_table(target.read_text(encoding="utf-8"))
    assert equal_tables(table, is_teleportable(InputClass.DIAG, ChannelSpec.parse("+000000+")))


def test_verify_paper(capsys):
    code = main(["verify-paper", "--samples", "20", "--seed", "42"])
    out = capsys.readouterr().out
    assert code == EXIT_OK, out
    assert "[FAIL]" not in out
    assert out.count("[PASS]") == 11
    assert "11/11 criterios superados" in out
    assert "Yes, in eight different ways" in out


def test_verify_all_alias(capsys):
    assert main(["verify-all", "--samples", "5"]) == EXIT_OK
    assert "11/11 criterios superados" in capsys.readouterr().out


def test_verify_paper_with_unreachable_tolerance(capsys):
    code = main(["verify-paper", "--samples", "5", "--tolerance", "1e-30"])
    out = capsys.readouterr().out
    assert code == EXIT_FAILED
    assert "[FAIL]" in out
    assert "11/11 criterios superados" not in out


def test_internal_value_errors_are_not_usage_errors(monkeypatch):
    def broken(*args, **kwargs):
        raise ValueError("fallo interno")

    monkeypatch.setattr("cli.run_protocol", broken)
    with pytest.raises(ValueError, match="fallo interno"):
        main(["simulate", "--input", "0.6,0,0,0.8", "--channel", "+000000+"])
