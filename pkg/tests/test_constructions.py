from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transitive.codec import KSumGadgetParams, ksum_encode_value
from transitive.constructions import (
    CertificateCollection,
    build_enc_input,
    build_encoded_instance,
    build_one_input,
    build_qvsc_input,
    construction,
    decode_ksum_blocks,
    decode_input,
    desensitize,
    desensitized_generators,
    enc_block_ksum_certificate,
    enc_block_ksum_eval,
    enc_ksum_eval,
    f_eval,
    f_qvsc_eval,
    load_instance,
    save_instance,
    sensitivity_witness,
    validate_unambiguous,
)
from transitive.core import evaluate, make_named, parse_bits, truth_table
from transitive.errors import CertificateError, SchemeError, SpecParseError
from transitive.groups import IndexPermutation, orbit
from transitive.pointerfn import Tag

PARAMS = KSumGadgetParams(4, 2)


def enc_input(values, params=PARAMS, filler=None):
    """Blocks holding the given values; None blocks are all zeros or `filler`"""
    blocks = []
    for value in values:
        if value is None:
            blocks.append(np.zeros(params.block_len, dtype=np.uint8) if filler is None else filler.copy())
        else:
            blocks.append(ksum_encode_value(value, params))
    return np.concatenate(blocks)


def heavy_block(params=PARAMS):
    block = np.zeros(params.block_len, dtype=np.uint8)
    block[: params.heavy_threshold] = 1
    return block


@pytest.mark.parametrize(
    "cid, n, k, N",
    (
        ("F1", None, None, 98304),
        ("F2", None, None, 114688),
        ("F3a", None, None, 114688),
        ("F3", None, None, 368640),
        ("F3c", 8, 1, 368640),
    ),
)
def test_input_lengths(cid, n, k, N):
    assert construction(cid, n, k).N == N


def test_f3_alias_and_defaults():
    c = construction("F3")
    assert (c.id, c.n, c.k) == ("F3b", 8, 8)
    assert c.shape == (8, 64)
    assert construction("ENC_KSUM").params == KSumGadgetParams(4, 1)
    assert construction("F_QVSC").k == 2


@pytest.mark.parametrize(
    "args, error",
    (
        (("F9",), SpecParseError),
        (("F1", 16, 2), SchemeError),
        (("F1", 8), SchemeError),
        (("F2", 12), SchemeError),
    ),
)
def test_construction_rejects(args, error):
    with pytest.raises(error):
        construction(*args)


@pytest.mark.parametrize("cid", ("F1", "F2", "F3a", "F3b", "F3c"))
def test_builder_inputs_evaluate_to_one(cid):
    c = construction(cid)
    x = build_one_input(c, np.random.default_rng(0))
    assert x.size == c.N
    assert f_eval(c, x) == 1


@pytest.mark.parametrize("cid", ("F1", "F2"))
def test_builder_in_transposed_frame(cid):
    c = construction(cid)
    x = build_one_input(c, np.random.default_rng(1), tag=Tag.DASHV)
    assert f_eval(c, x) == 1


def test_three_way_builder_in_rotated_frame():
    c = construction("F3c")
    x = build_one_input(c, np.random.default_rng(2), tag=Tag.TOP)
    assert f_eval(c, x) == 1


@pytest.mark.parametrize("cid", ("F1", "F2", "F3b"))
def test_all_zero_input_is_zero(cid):
    c = construction(cid)
    assert f_eval(c, np.zeros(c.N, dtype=np.uint8)) == 0


@pytest.mark.parametrize("cid", ("F1", "F2"))
def test_zeroing_a_certificate_cell_gives_zero(cid):
    c = construction(cid)
    rng = np.random.default_rng(3)
    instance = build_encoded_instance(c, rng)
    for cell in sorted(instance.certificate)[:3]:
        bits = instance.bits.copy()
        bits[instance.cell_slice(cell)] = 0
        assert f_eval(c, bits) == 0


def test_decode_input_recovers_the_matrix():
    c = construction("F2")
    instance = build_encoded_instance(c, np.random.default_rng(4))
    matrix, tags = decode_input(c, instance.bits)
    assert matrix.shape == (16, 16)
    assert all(tags[cell] == Tag.VDASH for cell in instance.certificate)


def test_unpermuted_and_permuted_encodings_agree():
    c = construction("F1")
    plain = build_encoded_instance(c, np.random.default_rng(5), permute=False)
    mixed = build_encoded_instance(c, np.random.default_rng(5), permute=True)
    assert decode_input(c, plain.bits)[0] == decode_input(c, mixed.bits)[0]


def test_wrong_input_length():
    with pytest.raises(ValueError, match="takes"):
        f_eval(construction("F1"), np.zeros(10, dtype=np.uint8))


# --- k-sum ---


@pytest.mark.parametrize(
    "values, expected",
    (
        ((3, 13, None, None), 1),
        ((3, 12, None, None), 0),
        ((None, 8, None, 8), 1),
        ((0, None, None, None), 0),
        ((0, 0, None, None), 1),
        ((None, None, None, None), 0),
    ),
)
def test_enc_ksum(values, expected):
    assert enc_ksum_eval(PARAMS, enc_input(values)) == expected


def test_enc_ksum_ignores_gadget_order():
    rng = np.random.default_rng(6)
    blocks = [ksum_encode_value(v, PARAMS, rng, permute=True) for v in (5, 11)]
    x = np.concatenate(blocks + [np.zeros(2 * PARAMS.block_len, dtype=np.uint8)])
    assert enc_ksum_eval(PARAMS, x) == 1


def test_enc_block_ksum_needs_heavy_blocks():
    light = enc_input((3, 13, None, None))
    heavy = enc_input((3, 13, None, None), filler=heavy_block())
    assert enc_ksum_eval(PARAMS, light) == 1
    assert enc_block_ksum_eval(PARAMS, light) == 0
    assert enc_block_ksum_eval(PARAMS, heavy) == 1
    almost = heavy.copy()
    almost[3 * PARAMS.block_len] = 0
    assert enc_block_ksum_eval(PARAMS, almost) == 0


def test_enc_block_ksum_certificate():
    x = enc_input((3, 13, None, None), filler=heavy_block())
    cert = enc_block_ksum_certificate(PARAMS, x)
    assert len(cert) == 2 * PARAMS.block_len + 2 * PARAMS.heavy_threshold
    assert cert.matches(x[None, :]).all()
    assert enc_block_ksum_certificate(PARAMS, enc_input((3, 12, None, None))) is None


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_enc_builders(seed, heavy):
    x = build_enc_input(PARAMS, seed, heavy=heavy)
    assert enc_ksum_eval(PARAMS, x) == 1
    if heavy:
        assert enc_block_ksum_eval(PARAMS, x) == 1


def test_qvsc_builder():
    c = construction("F_QVSC")
    x = build_qvsc_input(4, np.random.default_rng(7))
    assert x.size == c.N == 384 * 384
    assert f_qvsc_eval(4, x) == 1
    assert f_eval(c, np.zeros(c.N, dtype=np.uint8)) == 0


# --- certificates ---


def test_and_single_certificate_is_unambiguous():
    report = validate_unambiguous(make_named("AND", [2]), CertificateCollection(({0: 1, 1: 1},)))
    assert report.valid


def test_or_split_certificates_are_unambiguous():
    collection = CertificateCollection(({0: 1}, {0: 0, 1: 1}))
    assert validate_unambiguous(make_named("OR", [2]), collection).valid


@pytest.mark.parametrize(
    "certs, field",
    (
        (({0: 1}, {1: 1}), "disjoint"),
        (({0: 1},), "covering"),
        (({0: 1}, {0: 0}), "forcing"),
    ),
)
def test_ambiguous_collections(certs, field):
    report = validate_unambiguous(make_named("OR", [2]), CertificateCollection(certs))
    assert not getattr(report, field)
    assert not report.valid
    assert report.detail


def test_certificate_outside_arity():
    with pytest.raises(CertificateError, match="outside"):
        validate_unambiguous(make_named("OR", [2]), CertificateCollection(({5: 1},)))


def test_desensitized_and_is_wide_and():
    fdt = desensitize(make_named("AND", [2]), CertificateCollection(({0: 1, 1: 1},)))
    assert fdt.arity == 6
    assert truth_table(fdt) == truth_table(make_named("AND", [6]))


@pytest.mark.parametrize("bits, expected", (("010101", 1), ("011001", 0), ("101010", 1), ("111111", 1), ("000000", 0)))
def test_desensitized_or(bits, expected):
    fdt = desensitize(make_named("OR", [2]), CertificateCollection(({0: 1}, {0: 0, 1: 1})))
    assert evaluate(fdt, parse_bits(bits)) == expected


def test_desensitize_rejects_ambiguous_collection():
    with pytest.raises(CertificateError, match="unambiguous"):
        desensitize(make_named("OR", [2]), CertificateCollection(({0: 1}, {1: 1})))


def test_sensitivity_witness_width():
    collection = CertificateCollection(({0: 1}, {0: 0, 1: 1}))
    f = sensitivity_witness(make_named("OR", [2]), collection)
    assert f.arity == 6 * 6
    x = np.zeros(36, dtype=np.uint8)
    assert evaluate(f, x) == 0
    x[12:18] = parse_bits("010101")
    assert evaluate(f, x) == 1


def test_desensitized_generators_preserve_the_function():
    fdt = desensitize(make_named("AND", [2]), CertificateCollection(({0: 1, 1: 1},)))
    table = truth_table(fdt)
    gens = desensitized_generators(2, [IndexPermutation.from_array([1, 0], "swap")])
    assert len(gens) == 3
    for gen in gens:
        assert table.permuted(gen.materialize()) == table
    assert orbit(gens, 0) == 6


def test_parity_generators_on_desensitized_parity():
    f = make_named("PARITY", [2])
    collection = CertificateCollection(({0: 1, 1: 0}, {0: 0, 1: 1}))
    table = truth_table(desensitize(f, collection))
    for gen in desensitized_generators(2):
        assert table.permuted(gen.materialize()) == table


# --- instance files ---


def test_save_and_load_instance(tmp_path):
    c = construction("F1")
    bits = build_one_input(c, np.random.default_rng(8))
    path = tmp_path / "f1.bin"
    save_instance(path, c, bits, seed=8)
    assert path.stat().st_size == c.N // 8
    loaded, again, header = load_instance(path)
    assert loaded == c
    assert np.array_equal(again, bits)
    assert header["seed"] == "8"
    assert f_eval(loaded, again) == 1


def test_load_without_header_needs_construction(tmp_path):
    c = construction("ENC_KSUM")
    path = tmp_path / "enc.bin"
    save_instance(path, c, build_one_input(c, 9))
    (tmp_path / "enc.bin.header").unlink()
    with pytest.raises(SpecParseError, match="header"):
        load_instance(path)
    loaded, bits, _ = load_instance(path, c)
    assert enc_ksum_eval(loaded.params, bits) == 1


def test_load_rejects_short_payload(tmp_path):
    c = construction("ENC_KSUM")
    path = tmp_path / "short.bin"
    path.write_bytes(b"\x00\x01")
    with pytest.raises(SpecParseError, match="needs"):
        load_instance(path, c)


def ksum_oracle(values, k, modulus):
    valid = [v for v in values if v is not None]
    return int(any(sum(c) % modulus == 0 for c in combinations(valid, k)))


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(((4, 1), (4, 2))).flatmap(
        lambda bk: st.tuples(
            st.just(bk),
            st.lists(st.none() | st.integers(0, bk[0] ** bk[1] - 1), min_size=bk[0], max_size=bk[0]),
        )
    )
)
def test_enc_ksum_matches_subset_oracle(case):
    (b, k), values = case
    params = KSumGadgetParams(b, k)
    assert enc_ksum_eval(params, enc_input(values, params)) == ksum_oracle(values, k, params.alphabet)


@pytest.mark.slow
@pytest.mark.parametrize("b, k", ((4, 1), (4, 2)))
def test_enc_ksum_random_inputs(b, k):
    params = KSumGadgetParams(b, k)
    rng = np.random.default_rng(10)
    for _ in range(10_000):
        values = [None if rng.random() < 0.3 else int(rng.integers(params.alphabet)) for _ in range(b)]
        blocks = [
            rng.integers(0, 2, size=params.block_len, dtype=np.uint8)
            if v is None
            else ksum_encode_value(v, params, rng, permute=True)
            for v in values
        ]
        x = np.concatenate(blocks)
        decoded = decode_ksum_blocks(params, x)
        assert enc_ksum_eval(params, x) == ksum_oracle(decoded, k, params.alphabet)
