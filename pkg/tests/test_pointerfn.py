from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transitive.errors import BuilderError, SpecParseError
from transitive.pointerfn import (
    TRIVIAL_SYMBOL,
    CellSymbol,
    PointerMatrix,
    Tag,
    a1_eval,
    a2_eval,
    a3_eval,
    brick_rot,
    build_one_instance,
    certificate,
    find_marked_columns,
    format_matrix,
    mod_a1_eval,
    mod_a2_eval,
    mod_a3star_eval,
    mod_branches,
    parse_matrix,
    path_sequence,
    permute_matrix,
    random_symbol,
    transpose,
    walk,
)

EVAL = {"A1": a1_eval, "A2": a2_eval, "A3": a3_eval}


def without_special(matrix):
    """Clear the special cell of the marked column, leaving no marked column"""
    cells = matrix.cells.copy()
    for _, special in find_marked_columns(matrix):
        cells[special] = TRIVIAL_SYMBOL
    return PointerMatrix(cells, matrix.kind)


def test_path_sequence():
    assert path_sequence(3, 4).path == ("right", "left")
    assert path_sequence(1, 8).path == ("left", "left", "left")
    with pytest.raises(ValueError, match="outside"):
        path_sequence(5, 4)


@pytest.mark.parametrize("variant", ("A1", "A2"))
@pytest.mark.parametrize("n", (4, 8))
def test_builder_instances_are_accepted(variant, n):
    built = build_one_instance(variant, n, rng=n)
    assert EVAL[variant](built.matrix) == 1
    assert certificate(built.matrix, variant) == built.certificate


@pytest.mark.parametrize("variant", ("A1", "A2"))
def test_removing_the_special_cell_rejects(variant):
    built = build_one_instance(variant, 8, rng=1)
    assert EVAL[variant](without_special(built.matrix)) == 0
    assert certificate(without_special(built.matrix), variant) is None


def test_certificate_covers_marked_column_and_tree():
    n = 8
    built = build_one_instance("A1", n, rng=2)
    (column, _), = find_marked_columns(built.matrix)
    assert {(r, column) for r in range(n)} <= built.certificate
    # n column cells, n - 2 internal nodes and n leaves
    assert len(built.certificate) == n + (n - 2) + n


def test_a3_needs_exactly_k_marked_columns():
    built = build_one_instance("A3", 8, rng=3, k=2)
    assert a3_eval(built.matrix, k=2) == 1
    assert a3_eval(built.matrix, k=1) == 0
    assert len(find_marked_columns(built.matrix)) == 2


def test_leaf_with_value_one_rejects():
    built = build_one_instance("A1", 4, rng=4)
    matrix = built.matrix
    (_, special), = find_marked_columns(matrix)
    leaf = walk(matrix, special, path_sequence(2, 4).path)[-1]
    assert leaf in built.certificate
    cells = matrix.cells.copy()
    cells[leaf] = CellSymbol(1, cells[leaf].lptr, cells[leaf].rptr, cells[leaf].bptr)
    assert a1_eval(PointerMatrix(cells, matrix.kind)) == 0


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(("A1", "A2")), st.integers(0, 2**32 - 1))
def test_row_and_column_permutations_preserve_value(variant, seed):
    rng = np.random.default_rng(seed)
    built = build_one_instance(variant, 4, rng=rng)
    for matrix, expected in ((built.matrix, 1), (without_special(built.matrix), 0)):
        moved = permute_matrix(matrix, rng.permutation(4), rng.permutation(4))
        assert EVAL[variant](moved) == expected


def random_matrix(rng, kind, n=4):
    """Trivial filler in 30% of the cells, random pointers (some null) elsewhere"""
    cells = np.empty((n, n), dtype=object)
    for r in range(n):
        for c in range(n):
            if rng.random() < 0.3:
                cells[r, c] = TRIVIAL_SYMBOL
                continue
            sym = random_symbol(rng, kind, n, n)
            nulls = rng.random(3) < 0.1
            cells[r, c] = replace(
                sym,
                lptr=None if nulls[0] else sym.lptr,
                rptr=None if nulls[1] else sym.rptr,
                bptr=None if nulls[2] else sym.bptr,
            )
    return PointerMatrix(cells, kind)


def corrupted_instance(variant, rng, n=4):
    matrix = build_one_instance(variant, n, rng=rng).matrix
    cells = matrix.cells.copy()
    r, c = (int(v) for v in rng.integers(n, size=2))
    cells[r, c] = random_symbol(rng, matrix.kind, n, n)
    return PointerMatrix(cells, matrix.kind)


@pytest.mark.parametrize("variant", ("A1", "A2", "A3"))
def test_random_matrices_keep_their_value_under_relabelling(variant):
    rng = np.random.default_rng(21)
    kind = "type1" if variant == "A1" else "type2"
    matrices = [random_matrix(rng, kind) for _ in range(50)]
    matrices += [corrupted_instance(variant, rng) for _ in range(50)]
    values = set()
    for matrix in matrices:
        value = EVAL[variant](matrix)
        values.add(value)
        for _ in range(50):
            moved = permute_matrix(matrix, rng.permutation(4), rng.permutation(4))
            assert EVAL[variant](moved) == value
    assert values == {0, 1}


@pytest.mark.parametrize("tag", (Tag.VDASH, Tag.DASHV))
@pytest.mark.parametrize("variant, evaluator", (("A1", mod_a1_eval), ("A2", mod_a2_eval)))
def test_mod_builder_accepts_in_its_own_branch(tag, variant, evaluator):
    built = build_one_instance(variant, 8, rng=5, tag=tag)
    assert evaluator(built.matrix, built.tags) == 1
    assert mod_branches(built.matrix, built.tags, variant) == [tag]


def test_mod_rejects_when_a_certificate_tag_is_wrong():
    built = build_one_instance("A1", 8, rng=6)
    tags = built.tags.copy()
    cell = next(iter(built.certificate))
    tags[cell] = Tag.DASHV
    assert mod_a1_eval(built.matrix, tags) == 0


@pytest.mark.parametrize("tag", (Tag.VDASH, Tag.TOP, Tag.DASHV))
def test_three_way_mod_accepts_in_each_branch(tag):
    n = 4
    built = build_one_instance("A3", n, rng=7, k=n, width=n * n, tag=tag, three_way=True)
    assert mod_a3star_eval(built.matrix, built.tags, k=n) == 1
    assert mod_branches(built.matrix, built.tags, "A3", n, three_way=True) == [tag]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from((Tag.VDASH, Tag.DASHV)))
def test_at_most_one_branch_accepts(seed, tag):
    built = build_one_instance("A2", 4, rng=seed, tag=tag)
    rng = np.random.default_rng(seed)
    tags = built.tags.copy()
    flip = rng.integers(0, 2, size=tags.shape).astype(bool)
    tags[flip] = Tag.VDASH
    assert len(mod_branches(built.matrix, tags, "A2")) <= 1


def test_transpose_is_an_involution():
    grid = np.arange(12).reshape(3, 4)
    assert np.array_equal(transpose(transpose(grid)), grid)


def test_brick_rotations_are_inverse():
    grid = np.arange(64).reshape(4, 16)
    top = brick_rot(grid, Tag.TOP)
    assert not np.array_equal(top, grid)
    assert np.array_equal(brick_rot(top, Tag.DASHV), grid)
    assert np.array_equal(brick_rot(brick_rot(brick_rot(grid, Tag.TOP), Tag.TOP), Tag.TOP), grid)


def test_brick_rotation_needs_square_bricks():
    with pytest.raises(ValueError, match="brick view"):
        brick_rot(np.zeros((4, 8)), Tag.TOP)


def test_matrix_text_roundtrip():
    built = build_one_instance("A2", 4, rng=8, tag=Tag.DASHV)
    matrix, tags = parse_matrix(format_matrix(built.matrix, built.tags))
    assert matrix == built.matrix
    assert (tags == built.tags).all()
    assert mod_a2_eval(matrix, tags) == 1


def test_matrix_text_without_tags():
    built = build_one_instance("A1", 4, rng=9)
    matrix, tags = parse_matrix(format_matrix(built.matrix))
    assert tags is None
    assert a1_eval(matrix) == 1


@pytest.mark.parametrize(
    "text",
    (
        "",
        "matrix type1 2 2\n",
        "pointer-matrix type1 1 2\n0 0 : 1 - - -\n",
        "pointer-matrix type1 1 2\n0 0 : 2 - - -\n0 1 : 1 - - -\n",
        "pointer-matrix type1 1 2\n0 0 : 1 - - -\n0 1 : 1 - - -\ntags\n>\n",
    ),
)
def test_parse_matrix_rejects(text):
    with pytest.raises(SpecParseError):
        parse_matrix(text)


@pytest.mark.parametrize(
    "kwargs, message",
    (
        ({"variant": "A4", "n": 4}, "unknown variant"),
        ({"variant": "A1", "n": 6}, "power of two"),
        ({"variant": "A3", "n": 4, "k": 4}, "cannot mark"),
    ),
)
def test_builder_rejects_bad_parameters(kwargs, message):
    with pytest.raises(BuilderError, match=message):
        build_one_instance(**kwargs)
