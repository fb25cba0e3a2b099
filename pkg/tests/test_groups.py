import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transitive.codec import EncodingScheme
from transitive.constructions import build_one_input, construction, construction_group, f_eval
from transitive.errors import GroupError, SchemeError
from transitive.groups import (
    GENERATOR_CLASSES,
    ConstructionGroup,
    GeneratorDescriptor,
    IndexAddress,
    IndexPermutation,
    bt_generators,
    invariance_check,
    negative_control_generator,
    orbit,
    pair_tree_generators,
    rotation_generators,
)


@pytest.fixture(scope="module")
def dec96_group():
    return ConstructionGroup(EncodingScheme("DEC96", 16), (16, 16))


@pytest.fixture(scope="module")
def dec240_group():
    return ConstructionGroup(EncodingScheme("DEC240", 8), (8, 64))


def test_bt_root_is_swap_half():
    gens = bt_generators(4)
    assert len(gens) == 3
    assert gens[-1].materialize().tolist() == [2, 3, 0, 1]


@pytest.mark.parametrize("k", (2, 8, 16))
def test_bt_is_transitive(k):
    assert orbit(bt_generators(k), 0) == k


def test_bt_rejects_non_power_of_two():
    with pytest.raises(SchemeError):
        bt_generators(6)


@pytest.mark.parametrize("pairs", (1, 3, 5))
def test_pair_tree_is_transitive(pairs):
    gens = pair_tree_generators(pairs)
    assert len(gens) == 2 * pairs - 1
    assert all(g.is_bijective() for g in gens)
    assert orbit(gens, 0) == 2 * pairs


def test_rotations_move_thirds():
    gens = rotation_generators(6)
    assert orbit(gens, 0) == 3
    assert gens[0](0) == 2


def test_index_permutation_apply_moves_bits():
    perm = IndexPermutation.from_array([1, 2, 0])
    assert perm.apply(np.array([1, 0, 0])).tolist() == [0, 1, 0]


def test_group_shape_must_match_scheme():
    with pytest.raises(SchemeError, match="acts on"):
        ConstructionGroup(EncodingScheme("DEC96", 16), (16, 8))


def test_group_size_matches_input_length(dec96_group, dec240_group):
    assert dec96_group.size == 98304
    assert dec240_group.size == 368640


def test_root_offset_swap_transposes_cells(dec96_group):
    gen = dec96_group.cell_generator("bt16[0:16]")
    r, c = np.divmod(np.arange(256), 16)
    assert np.array_equal(gen.cells, c * 16 + r)


def test_unknown_cell_generator(dec96_group):
    with pytest.raises(GroupError, match="no cell generator"):
        dec96_group.cell_generator("bt16[0:3]")


@pytest.mark.parametrize("which", ("dec96_group", "dec240_group"))
def test_cell_generators_act_transitively(which, request):
    group = request.getfixturevalue(which)
    for gen in group.cell_generators:
        assert np.array_equal(np.sort(gen.cells), np.arange(group.cells))
    offsets = [IndexPermutation.from_array(g.offsets) for g in group.cell_generators]
    assert orbit(offsets, 0) == group.scheme.block_len
    cells = [IndexPermutation.from_array(g.cells) for g in group.leaf_generators]
    assert orbit(cells, 0) == group.cells


def test_three_way_rotation_cycles_axes(dec240_group):
    gen = dec240_group.cell_generator("rotation1")
    n = 8
    r, col = np.divmod(np.arange(dec240_group.cells), 64)
    c, b = col % n, col // n
    # row -> column, column -> brick, brick -> row
    assert np.array_equal(gen.cells, b * 64 + c * n + r)


def test_address_roundtrip(dec96_group):
    address = IndexAddress(cell=17, part=3, block=2, offset=9)
    assert dec96_group.address(dec96_group.index(address)) == address
    with pytest.raises(IndexError):
        dec96_group.address(dec96_group.size)


def test_global_generators_are_permutations(dec96_group):
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, size=dec96_group.size, dtype=np.uint8)
    for desc in dec96_group.generators("global"):
        y = dec96_group.apply(desc, x)
        assert int(y.sum()) == int(x.sum())


@pytest.mark.parametrize(
    "desc",
    (
        GeneratorDescriptor("part", 2, 5),
        GeneratorDescriptor("block", "SBS", 3, 1),
        GeneratorDescriptor("block", "BF", None, None),
    ),
)
def test_part_and_block_generators_are_involutions(dec96_group, desc):
    idx = np.arange(dec96_group.size)
    assert np.array_equal(dec96_group.image(desc, dec96_group.image(desc, idx)), idx)


def test_apply_rejects_wrong_length(dec96_group):
    with pytest.raises(GroupError, match="bits"):
        dec96_group.apply(GeneratorDescriptor("part", 0), np.zeros(10, dtype=np.uint8))


def test_map_index_to_itself_is_empty(dec96_group):
    assert dec96_group.map_index(5, 5) == []


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_map_index_reaches_target(dec96_group, data):
    p = data.draw(st.integers(0, dec96_group.size - 1))
    q = data.draw(st.integers(0, dec96_group.size - 1))
    word = dec96_group.map_index(p, q)
    assert int(dec96_group.word_image(word, p)) == q


def test_map_index_three_way(dec240_group):
    rng = np.random.default_rng(1)
    for _ in range(10):
        p, q = (int(v) for v in rng.integers(dec240_group.size, size=2))
        word = dec240_group.map_index(p, q)
        assert int(dec240_group.word_image(word, p)) == q


@pytest.mark.slow
@pytest.mark.parametrize("cid", ("F1", "F2", "F3b"))
def test_full_orbit(cid):
    group = construction_group(construction(cid))
    assert orbit(group.permutations("global"), 0) == group.size


def test_negative_control_does_not_update_offsets(dec96_group):
    desc = negative_control_generator(dec96_group)
    assert not desc.pointer_update
    gen = dec96_group.cell_generator(desc.detail)
    address = IndexAddress(cell=0, part=1, block=0, offset=0)
    moved = dec96_group.address(dec96_group.image(desc, dec96_group.index(address)))
    assert moved.offset == 0
    assert moved.cell == gen.cells[0]


@pytest.fixture(scope="module")
def f1_inputs():
    c = construction("F1")
    rng = np.random.default_rng(2)
    return c, [build_one_input(c, rng), np.zeros(c.N, dtype=np.uint8)]


def test_invariance_with_negative_control(f1_inputs):
    c, inputs = f1_inputs
    group = construction_group(c)
    assert [f_eval(c, x) for x in inputs] == [1, 0]
    report = invariance_check(
        lambda x: f_eval(c, x),
        group,
        inputs,
        per_class=4,
        rng=3,
        threads=2,
        extra={"negative-control": negative_control_generator(group)},
    )
    frame = report.to_frame().set_index("class")
    for cls in GENERATOR_CLASSES:
        assert frame.loc[cls, "checks"] == 4
        assert frame.loc[cls, "violations"] == 0
    assert frame.loc["negative-control", "violations"] == 1
    assert not report.passed


def test_induced_cell_perm_of_a_row_leaf(dec96_group):
    cells, offsets = dec96_group.induced_cell_perm("bt16[0:2]")
    assert offsets[:2].tolist() == [1, 0]
    r, c = np.divmod(np.arange(256), 16)
    # first bb pair of the row code is its most significant digit
    assert np.array_equal(cells, (r ^ 8) * 16 + c)


def test_column_half_nodes_fix_rows(dec96_group):
    cells, _ = dec96_group.induced_cell_perm("bt16[8:16]")
    assert np.array_equal(cells // 16, np.arange(256) // 16)
    assert not np.array_equal(cells, np.arange(256))


def _invariance_report(cid, builders, randoms, per_class, seed):
    c = construction(cid)
    group = construction_group(c)
    rng = np.random.default_rng(seed)
    inputs = [build_one_input(c, rng) for _ in range(builders)]
    inputs += [rng.integers(0, 2, size=c.N, dtype=np.uint8) for _ in range(randoms)]
    return invariance_check(
        lambda x: f_eval(c, x),
        group,
        inputs,
        per_class=per_class,
        rng=rng,
        threads=4,
        extra={"negative-control": negative_control_generator(group)},
    )


def _assert_invariant_with_control(report, per_class):
    frame = report.to_frame().set_index("class")
    for cls in GENERATOR_CLASSES:
        assert frame.loc[cls, "checks"] == per_class
        assert frame.loc[cls, "violations"] == 0, report.violations[:5]
    assert frame.loc["negative-control", "violations"] >= 1


@pytest.mark.parametrize("cid", ("F2", "F3a", "F3c"))
def test_invariance_on_other_constructions(cid):
    _assert_invariant_with_control(_invariance_report(cid, 3, 1, per_class=20, seed=5), 20)


@pytest.mark.slow
@pytest.mark.parametrize("cid", ("F1", "F2", "F3a", "F3b", "F3c"))
def test_invariance_at_full_sample_counts(cid):
    _assert_invariant_with_control(_invariance_report(cid, 100, 100, per_class=500, seed=6), 500)


@pytest.mark.slow
def test_map_index_on_a_thousand_three_way_pairs():
    group = construction_group(construction("F3"))
    rng = np.random.default_rng(8)
    pairs = rng.integers(group.size, size=(1000, 2))
    for p, q in pairs.tolist():
        assert int(group.word_image(group.map_index(p, q), p)) == q
