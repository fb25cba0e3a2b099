"""
Command Line Interface

Subcommands:

    eval        evaluate a function spec on a bit string, or a construction on an instance file
    measure     complexity measures of a function spec or truth-table file
    decode      decode one hex cell codeword
    witness     build a certified 1-input of a construction and save it
    orbit       orbit size under a construction's group, optionally map_index on random pairs
    invariance  f(σ(x)) = f(x) over every generator class, with a negative control
    roundtrip   codec roundtrip and tag-transition checks for the cell schemes
    report      measure table over the named functions at desk parameters

Exit status: 0 on success, 1 when a verification fails, 2 on a usage error.
"""

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .codec import (
    SCHEMES,
    CellCodeword,
    EncodingScheme,
    dec,
    default_n,
    random_valid_word,
    rotation1,
    std_encode_cell,
    swap_half,
)
from .config import load_config
from .constructions import (
    CONSTRUCTION_IDS,
    ALIASES,
    build_one_input,
    construction,
    construction_group,
    f_eval,
    load_instance,
    random_input,
    save_instance,
)
from .core import TruthTable, format_bits, parse_bits, parse_spec, truth_table
from .errors import TransitiveError
from .groups import invariance_check, negative_control_generator, orbit
from .measures import MEASURE_NAMES, measure_report
from .pointerfn import NULL_SYMBOL, Tag, random_symbol

logger = logging.getLogger(__name__)

SUMMARY_FUNCTIONS = (
    "AND:4",
    "OR:4",
    "PARITY:4",
    "MAJORITY:5",
    "NAND^2",
    "PAPER_XNOR_TREE^2",
    "NW",
    "NW^2",
    "RUB:2",
    "RUB:3",
    "GSS1:4",
    "GSS2:4",
    "KSUM:3:2:2",
    "OR:2 o AND:2",
)


class VerificationFailed(Exception):
    """A verification suite found a violation (exit status 1)"""


# --- output helpers ---


def _emit(args, text):
    """Print to stdout, or write to --out when given"""
    if getattr(args, "out", None):
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
        print(f"Results saved to: {args.out}")
    else:
        print(text)


def _emit_frame(args, df, title=None):
    if args.format == "csv":
        if args.out:
            df.to_csv(args.out, index=False)
            print(f"Results saved to: {args.out}")
        else:
            print(df.to_csv(index=False), end="")
        return
    text = df.to_string(index=False)
    _emit(args, f"\n=== {title} ===\n{text}" if title else text)


def _construction(args):
    return construction(args.construction, args.n, args.k, args.b)


def _rng(args):
    return np.random.default_rng(args.seed)


# --- subcommands ---


def cmd_eval(args, config):
    if args.function:
        if args.bits is None:
            raise TransitiveError("eval --function needs --bits")
        f = parse_spec(args.function)
        print(f(parse_bits(args.bits)))
        return 0
    if not args.construction and not args.input:
        raise TransitiveError("eval needs --function or --construction/--input")
    c = _construction(args) if args.construction else None
    if args.input:
        c, bits, _ = load_instance(args.input, c)
    else:
        bits = build_one_input(c, _rng(args))
    print(f_eval(c, bits))
    return 0


def cmd_measure(args, config):
    if args.table_file:
        table = TruthTable.from_text(Path(args.table_file).read_text())
        label = args.table_file
    elif args.function:
        f = parse_spec(args.function)
        table = truth_table(f, cap=config["caps"]["materialize"])
        label = f.label
    else:
        raise TransitiveError("measure needs --function or --table-file")
    measures = _measure_list(args.measures)
    report = measure_report(table, measures, config)
    if args.format == "csv":
        row = {"function": label, **{m: report.as_dict().get(m) for m in measures}}
        _emit_frame(args, pd.DataFrame([row]))
    else:
        _emit(args, report.format(measures))
    return 0


def _measure_list(text):
    measures = tuple(m.strip() for m in text.split(",") if m.strip())
    return measures or MEASURE_NAMES


def cmd_decode(args, config):
    scheme = EncodingScheme(args.scheme, args.n or default_n(args.scheme))
    decoded = dec(CellCodeword.from_hex(scheme, args.hex))
    print(str(decoded.symbol) if decoded.valid else "INVALID")
    return 0


def cmd_witness(args, config):
    c = _construction(args)
    rng = _rng(args)
    tag = Tag.from_char(args.tag)
    bits = build_one_input(c, rng, tag)
    value = f_eval(c, bits)
    if args.out:
        save_instance(args.out, c, bits, seed=args.seed)
        print(f"Wrote {c.label} instance to {args.out} (N={c.N}, value={value})")
    else:
        print(format_bits(bits))
    if value != 1:
        raise VerificationFailed(f"builder produced a {value}-input for {c.label}")
    return 0


def cmd_orbit(args, config):
    c = _construction(args)
    group = construction_group(c)
    size = orbit(group.permutations("global"), args.start, group.size)
    verdict = "TRANSITIVE" if size == group.size else "NOT TRANSITIVE"
    print(f"orbit={size}/{group.size} {verdict}")
    failures = 0
    if args.pairs:
        rng = _rng(args)
        lengths = []
        for _ in range(args.pairs):
            p, q = (int(v) for v in rng.integers(group.size, size=2))
            try:
                lengths.append(len(group.map_index(p, q)))
            except TransitiveError as e:
                failures += 1
                logger.warning("map_index %d -> %d: %s", p, q, e)
        print(f"map_index={args.pairs - failures}/{args.pairs} verified, max word length {max(lengths, default=0)}")
    if size != group.size or failures:
        raise VerificationFailed(f"{c.label} group check failed")
    return 0


def cmd_invariance(args, config):
    c = _construction(args)
    group = construction_group(c)
    rng = _rng(args)
    samples = args.samples or config["verification"]["invariance_inputs"]
    per_class = args.per_class or config["verification"]["invariance_per_class"]

    print(f"Building {samples} certified 1-inputs for {c.label}...")
    ones = [build_one_input(c, rng) for _ in range(samples)]
    randoms = [random_input(c, rng) for _ in range(samples)]

    def evaluator(x):
        return f_eval(c, x)

    report = invariance_check(evaluator, group, ones + randoms, per_class, rng, args.threads)
    control = invariance_check(
        evaluator, group, ones, 0, rng, args.threads, extra={"negative-control": negative_control_generator(group)}
    )

    print("\n=== RESULTS SUMMARY ===")
    print(f"Construction: {c.label}, N={c.N}")
    print(f"Inputs: {samples} builder 1-inputs + {samples} random")
    _emit_frame(args, report.to_frame(), "INVARIANCE BY GENERATOR CLASS")
    print(f"Negative control violations: {len(control.violations)}/{len(ones)}")
    for cls, desc, i in report.violations[:10]:
        print(f"  violation: {cls} {desc} on input {i}")

    if not report.passed:
        raise VerificationFailed(f"{len(report.violations)} invariance violations")
    if control.passed:
        raise VerificationFailed("negative control produced no violation")
    return 0


def _random_cell_symbol(scheme, rng):
    if rng.random() < 0.1:
        sym = NULL_SYMBOL
    else:
        width = scheme.n * scheme.n if len(scheme.axes) == 3 else scheme.n
        sym = random_symbol(rng, scheme.matrix_kind, scheme.n, width)
    tags = scheme.tags
    return sym.with_tag(tags[int(rng.integers(len(tags)))])


def _tag_moves(scheme):
    """(per-block transform, resulting tag) pairs for a ⊢ standard form"""
    moves = [
        (lambda blocks, tag=tag: scheme.apply_tag(blocks, tag), tag)
        for tag in scheme.tags
        if tag != Tag.VDASH
    ]
    if len(scheme.axes) == 3:
        moves.append((lambda blocks: rotation1(rotation1(blocks)), Tag.DASHV))
    else:
        moves.append((lambda blocks: swap_half(swap_half(blocks)), Tag.VDASH))
    return moves


def _fuzzed_word(scheme, rng):
    bits = np.zeros(scheme.cell_len, dtype=np.uint8)
    weight = int(rng.integers(1, scheme.cell_len))
    bits[rng.choice(scheme.cell_len, size=weight, replace=False)] = 1
    return bits


def roundtrip_scheme(scheme, symbols, words, rng, fuzz=50):
    """Rows of (check, checked, failures) for one scheme

    roundtrip    std_encode -> random valid word -> dec gives the symbol back
    tags         Swap½ / rotations per block give the symbol with the moved tag
    invalid      the all-zero word and `fuzz` random-weight words do not decode
    """
    counts = {check: [0, 0] for check in ("roundtrip", "tags", "invalid")}

    def record(check, ok):
        counts[check][0] += 1
        counts[check][1] += not ok

    moves = _tag_moves(scheme)
    for _ in range(symbols):
        sym = _random_cell_symbol(scheme, rng)
        word = std_encode_cell(sym, scheme, rng)
        for _ in range(words):
            decoded = dec(random_valid_word(word, rng))
            record("roundtrip", decoded.valid and decoded.symbol == sym)
        base = sym.with_tag(Tag.VDASH)
        blocks = std_encode_cell(base, scheme, rng).blocks()
        for move, tag in moves:
            decoded = dec(CellCodeword(scheme, move(blocks).ravel()))
            record("tags", decoded.valid and decoded.symbol == base.with_tag(tag))
    record("invalid", not dec(np.zeros(scheme.cell_len, dtype=np.uint8), scheme).valid)
    for _ in range(fuzz):
        record("invalid", not dec(_fuzzed_word(scheme, rng), scheme).valid)
    return [{"check": check, "checked": c, "failures": f} for check, (c, f) in counts.items()]


def cmd_roundtrip(args, config):
    rng = _rng(args)
    names = [args.scheme] if args.scheme else list(SCHEMES)
    rows = []
    for name in names:
        n = args.n or default_n(name)
        scheme = EncodingScheme(name, n)
        for row in roundtrip_scheme(scheme, args.samples, args.words, rng, args.fuzz):
            rows.append({"scheme": name, "n": n, **row})
    df = pd.DataFrame(rows)
    _emit_frame(args, df, "CODEC ROUNDTRIP")
    if df["failures"].sum():
        raise VerificationFailed("codec roundtrip failures")
    return 0


def _summary_row(spec, config):
    f = parse_spec(spec)
    report = measure_report(truth_table(f), MEASURE_NAMES, config)
    values = report.as_dict()
    row = {"function": spec, "arity": f.arity}
    for name in MEASURE_NAMES:
        row[name] = values[name]
    return row


def cmd_report(args, config):
    functions = args.functions.split(";") if args.functions else SUMMARY_FUNCTIONS
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        rows = list(pool.map(lambda spec: _summary_row(spec.strip(), config), functions))
    _emit_frame(args, pd.DataFrame(rows), "MEASURE SUMMARY")
    return 0


COMMANDS = {
    "eval": cmd_eval,
    "measure": cmd_measure,
    "decode": cmd_decode,
    "witness": cmd_witness,
    "orbit": cmd_orbit,
    "invariance": cmd_invariance,
    "roundtrip": cmd_roundtrip,
    "report": cmd_report,
}


# --- parser ---


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Random seed")
    common.add_argument("--format", choices=("text", "csv"), default="text", help="Report format")
    common.add_argument("--out", "-o", default=None, help="Write the report or instance here")
    common.add_argument("--threads", type=int, default=1, help="Worker threads")
    common.add_argument("--config", default=None, help="JSON config merged over the defaults")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose output")

    target = argparse.ArgumentParser(add_help=False)
    ids = ", ".join(CONSTRUCTION_IDS + tuple(ALIASES))
    target.add_argument("--construction", "-c", default=None, help=f"Construction id ({ids})")
    target.add_argument("--n", type=int, default=None, help="Matrix size n (default per construction)")
    target.add_argument("--k", type=int, default=None, help="Marked columns, or k for the k-sum functions")
    target.add_argument("--b", type=int, default=None, help="Block count b for the k-sum functions")

    parser = argparse.ArgumentParser(
        prog="transitive-fn",
        description="Transitive Boolean functions: measures, codecs and group verification",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, parents):
        return sub.add_parser(
            name, help=help_text, parents=parents, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )

    p = add("eval", "Evaluate a function or construction", [common, target])
    p.add_argument("--function", "-f", default=None, help="Function spec, e.g. 'OR:2 o AND:2'")
    p.add_argument("--bits", default=None, help="Input bits, x_1 first")
    p.add_argument("--input", "-i", default=None, help="Instance file (sidecar header optional)")

    p = add("measure", "Complexity measures", [common])
    p.add_argument("--function", "-f", default=None, help="Function spec")
    p.add_argument("--table-file", default=None, help="Truth-table file ('arity=<k>' then bits)")
    p.add_argument("--measures", "-m", default=",".join(MEASURE_NAMES), help="Comma-separated measures")

    p = add("decode", "Decode a hex cell codeword", [common])
    p.add_argument("--scheme", choices=SCHEMES, required=True, help="Cell scheme")
    p.add_argument("--n", type=int, default=None, help="Matrix size n")
    p.add_argument("--hex", required=True, help="Codeword, most significant nibble first")

    p = add("witness", "Build a certified 1-input", [common, target])
    p.add_argument("--tag", default=">", choices=[t.value for t in Tag], help="Branch tag of the certificate")

    p = add("orbit", "Orbit size under the construction's group", [common, target])
    p.add_argument("--start", type=int, default=0, help="Start index")
    p.add_argument("--pairs", type=int, default=0, help="Also verify map_index on this many random pairs")

    p = add("invariance", "Check f(σ(x)) = f(x) for every generator class", [common, target])
    p.add_argument("--samples", type=int, default=None, help="Builder inputs (and as many random inputs)")
    p.add_argument("--per-class", type=int, default=None, help="Checks per generator class")

    p = add("roundtrip", "Codec roundtrip for the cell schemes", [common])
    p.add_argument("--scheme", choices=SCHEMES, default=None, help="Only this scheme")
    p.add_argument("--n", type=int, default=None, help="Matrix size n")
    p.add_argument("--samples", type=int, default=200, help="Random symbols per scheme")
    p.add_argument("--words", type=int, default=50, help="Valid permutation words per symbol")
    p.add_argument("--fuzz", type=int, default=50, help="Random-weight words that must not decode")

    p = add("report", "Measure table over the named functions", [common])
    p.add_argument("--table", choices=("summary",), default="summary", help="Report table")
    p.add_argument("--functions", default=None, help="';'-separated specs instead of the default list")
    return parser


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    config = load_config(args.config)
    if args.threads < 1:
        parser.error("--threads must be >= 1")

    try:
        return COMMANDS[args.command](args, config)
    except VerificationFailed as e:
        print(f"Verification failed: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        if args.verbose:
            import traceback

            traceback.print_exc()
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
