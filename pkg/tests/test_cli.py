import numpy as np
import pytest

from transitive.cli import build_parser, roundtrip_scheme, run
from transitive.codec import SCHEMES, EncodingScheme, default_n, std_encode_cell
from transitive.pointerfn import CellSymbol, Tag


def test_measure_rub4(capsys):
    assert run(["measure", "--function", "RUB:4", "--measures", "s,bs"]) == 0
    assert capsys.readouterr().out.strip() == "s=4 bs=8"


def test_measure_csv(capsys):
    assert run(["measure", "-f", "PARITY:3", "-m", "deg,D", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines == ["function,deg,D", "PARITY:3,3,3"]


def test_measure_table_file(tmp_path, capsys):
    table = tmp_path / "and2.txt"
    table.write_text("arity=2\n0001\n")
    assert run(["measure", "--table-file", str(table), "-m", "s"]) == 0
    assert capsys.readouterr().out.strip() == "s=2"


@pytest.mark.parametrize(
    "spec, bits, expected",
    (("OR:2 o AND:2", "1100", "1"), ("NW", "111", "0"), ("MAJORITY:3", "011", "1")),
)
def test_eval_function(capsys, spec, bits, expected):
    assert run(["eval", "--function", spec, "--bits", bits]) == 0
    assert capsys.readouterr().out.strip() == expected


def test_decode_cell(capsys):
    scheme = EncodingScheme("DEC96", 16)
    symbol = CellSymbol(1, (2, 3), (4, 5), 6, Tag.DASHV)
    text = std_encode_cell(symbol, scheme).to_hex()
    assert run(["decode", "--scheme", "DEC96", "--n", "16", "--hex", text]) == 0
    assert capsys.readouterr().out.strip() == str(symbol)


def test_decode_defaults_n_per_scheme(capsys):
    scheme = EncodingScheme("DEC240", 8)
    symbol = CellSymbol(0, (2, 17), (5, 63), (7, 40), Tag.TOP)
    text = std_encode_cell(symbol, scheme).to_hex()
    assert run(["decode", "--scheme", "DEC240", "--hex", text]) == 0
    assert capsys.readouterr().out.strip() == str(symbol)


def test_decode_invalid(capsys):
    assert run(["decode", "--scheme", "DEC96", "--hex", "0" * 96]) == 0
    assert capsys.readouterr().out.strip() == "INVALID"


def test_witness_then_eval(tmp_path, capsys):
    path = tmp_path / "enc.bin"
    assert run(["witness", "-c", "ENC_BLOCK_KSUM", "--b", "4", "--k", "2", "--seed", "3", "-o", str(path)]) == 0
    assert "value=1" in capsys.readouterr().out
    assert (tmp_path / "enc.bin.header").exists()
    assert run(["eval", "--input", str(path)]) == 0
    assert capsys.readouterr().out.strip() == "1"


def test_witness_prints_bits(capsys):
    assert run(["witness", "-c", "ENC_KSUM"]) == 0
    out = capsys.readouterr().out.strip()
    assert set(out) <= {"0", "1"}
    assert len(out) == 128


def test_eval_builds_construction_input(capsys):
    assert run(["eval", "-c", "F1", "--seed", "1"]) == 0
    assert capsys.readouterr().out.strip() == "1"


def test_roundtrip(capsys):
    assert run(["roundtrip", "--scheme", "DEC240", "--samples", "3", "--words", "4"]) == 0
    out = capsys.readouterr().out
    assert "=== CODEC ROUNDTRIP ===" in out
    assert "DEC240" in out


@pytest.mark.parametrize("name", SCHEMES)
def test_roundtrip_checks_tags_and_invalid_words(name):
    scheme = EncodingScheme(name, default_n(name))
    rows = roundtrip_scheme(scheme, 3, 2, np.random.default_rng(5), fuzz=50)
    counts = {row["check"]: (row["checked"], row["failures"]) for row in rows}
    moves = 3 if name == "DEC240" else 2
    assert counts == {"roundtrip": (6, 0), "tags": (3 * moves, 0), "invalid": (51, 0)}


def test_report_csv(tmp_path, capsys):
    out = tmp_path / "summary.csv"
    assert run(["report", "--functions", "AND:2;RUB:2", "--format", "csv", "-o", str(out), "--threads", "2"]) == 0
    assert "Results saved to" in capsys.readouterr().out
    header, first, second = out.read_text().strip().splitlines()
    assert header.startswith("function,arity,")
    assert first.startswith("AND:2,2,")
    assert second.startswith("RUB:2,4,")


def test_orbit_with_map_index(capsys):
    assert run(["orbit", "-c", "F1", "--pairs", "5"]) == 0
    out = capsys.readouterr().out
    assert "orbit=98304/98304 TRANSITIVE" in out
    assert "map_index=5/5 verified" in out


def test_invariance_small(capsys):
    assert run(["invariance", "-c", "F1", "--samples", "1", "--per-class", "3", "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert "=== RESULTS SUMMARY ===" in out
    assert "Negative control violations: 1/1" in out


@pytest.mark.parametrize(
    "argv, message",
    (
        (["eval"], "eval needs"),
        (["eval", "--function", "AND:2"], "needs --bits"),
        (["measure", "-f", "FOO:2"], "FOO"),
        (["measure", "-f", "AND:2", "-m", "s,xyz"], "unknown measures"),
        (["witness", "-c", "F9"], "unknown construction"),
        (["decode", "--scheme", "DEC96", "--hex", "ff"], "hex digits"),
        (["eval", "--input", "missing.bin", "-c", "ENC_KSUM"], "missing.bin"),
    ),
)
def test_errors_exit_2(capsys, argv, message):
    assert run(argv) == 2
    assert message in capsys.readouterr().err


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 2


def test_parser_defaults():
    args = build_parser().parse_args(["roundtrip"])
    assert (args.samples, args.words, args.fuzz, args.seed, args.format) == (200, 50, 50, 0, "text")
