"""
Pointer Functions

Pointer matrices over the cell alphabet (value, left, right and back
pointers), the balanced-tree walks T(j), the three pointer-function variants
A1/A2/A3 and their tag-guarded versions ModA1/ModA2/ModA3 (two-way, by
transpose) and ModA3* (three-way, by brick rotation), plus builders that
place certified positive instances.

Coordinates are 0-based (row, column). A brick matrix has n rows and n^2
columns; column b*n + c of brick b is addressed as (r, c, b).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

import numpy as np

from .errors import BuilderError, SpecParseError

logger = logging.getLogger(__name__)

Coord = tuple


class Tag(Enum):
    VDASH = ">"
    TOP = "^"
    DASHV = "<"

    @classmethod
    def from_char(cls, char):
        for tag in cls:
            if tag.value == char:
                return tag
        raise SpecParseError(f"unknown tag character {char!r}")


TWO_WAY_TAGS = (Tag.VDASH, Tag.DASHV)
THREE_WAY_TAGS = (Tag.VDASH, Tag.TOP, Tag.DASHV)


@dataclass(frozen=True)
class CellSymbol:
    value: int
    lptr: Optional[Coord] = None
    rptr: Optional[Coord] = None
    bptr: Optional[Union[int, Coord]] = None
    tag: Tag = Tag.VDASH

    @property
    def body(self):
        return (self.value, self.lptr, self.rptr, self.bptr)

    def is_trivial(self):
        """True for the all-ones filler (1, ⊥, ⊥, ⊥) of a marked column"""
        return self.body == (1, None, None, None)

    def with_tag(self, tag):
        return replace(self, tag=tag)

    def __str__(self):
        return f"{self.value} {_fmt_ptr(self.lptr)} {_fmt_ptr(self.rptr)} {_fmt_ptr(self.bptr)} {self.tag.value}"


NULL_SYMBOL = CellSymbol(0)
TRIVIAL_SYMBOL = CellSymbol(1)


@dataclass(frozen=True, eq=False)
class PointerMatrix:
    cells: np.ndarray
    kind: str = "type2"

    def __post_init__(self):
        if self.kind not in ("type1", "type2"):
            raise ValueError(f"unknown pointer matrix kind {self.kind!r}")
        cells = np.asarray(self.cells, dtype=object)
        if cells.ndim != 2:
            raise ValueError("pointer matrix cells must form a 2-D grid")
        object.__setattr__(self, "cells", cells)

    @property
    def m(self):
        return self.cells.shape[0]

    @property
    def width(self):
        return self.cells.shape[1]

    @property
    def shape(self):
        return self.cells.shape

    @property
    def has_brick_view(self):
        return self.width == self.m * self.m

    def __getitem__(self, coord):
        return self.cells[coord[0], coord[1]]

    def __eq__(self, other):
        if not isinstance(other, PointerMatrix):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.shape == other.shape
            and all(a.body == b.body for a, b in zip(self.cells.flat, other.cells.flat))
        )

    def in_range(self, ptr):
        return (
            isinstance(ptr, tuple)
            and len(ptr) == 2
            and 0 <= ptr[0] < self.m
            and 0 <= ptr[1] < self.width
        )


@dataclass(frozen=True)
class TreeAddress:
    leaf: int
    path: tuple


@dataclass(frozen=True)
class BuiltInstance:
    matrix: PointerMatrix
    tags: np.ndarray
    certificate: frozenset


def _fmt_ptr(ptr):
    if ptr is None:
        return "-"
    if isinstance(ptr, tuple):
        return "(" + ",".join(str(v) for v in ptr) + ")"
    return str(ptr)


def tree_depth(n):
    if n < 1 or n & (n - 1):
        raise ValueError(f"tree needs a power-of-two leaf count, got {n}")
    return n.bit_length() - 1


def path_sequence(j, n):
    """Root-to-leaf path for leaf j (1-based, leaves labelled left to right)"""
    depth = tree_depth(n)
    if not 1 <= j <= n:
        raise ValueError(f"leaf {j} outside 1..{n}")
    bits = j - 1
    path = tuple("right" if (bits >> (depth - 1 - t)) & 1 else "left" for t in range(depth))
    return TreeAddress(j, path)


def to_brick(coord, n):
    r, col = coord
    return (r, col % n, col // n)


def from_brick(r, c, b, n):
    return (r, b * n + c)


# --- Marked columns and walks ---


def find_marked_columns(matrix):
    """Columns with exactly one cell other than (1, ⊥, ⊥, ⊥), with that special cell"""
    marked = []
    for col in range(matrix.width):
        odd = [r for r in range(matrix.m) if not matrix.cells[r, col].is_trivial()]
        if len(odd) == 1:
            marked.append((col, (odd[0], col)))
    return marked


def walk(matrix, start, path):
    """Cells visited following LPointer/RPointer along path; None if a pointer is ⊥"""
    visited = []
    cell = matrix[start]
    for step in path:
        ptr = cell.lptr if step == "left" else cell.rptr
        if not matrix.in_range(ptr):
            return None
        visited.append(ptr)
        cell = matrix[ptr]
    return visited


def _walk_all(matrix, start):
    depth = tree_depth(matrix.width)
    cells = set()
    leaves = []
    for j in range(1, matrix.width + 1):
        visited = walk(matrix, start, path_sequence(j, matrix.width).path)
        if visited is None:
            return None, None
        cells.update(visited)
        leaves.append(visited[-1] if depth else start)
    return leaves, cells


def _column_cells(matrix, columns):
    return {(r, c) for c in columns for r in range(matrix.m)}


def _certify(matrix, variant, k=1):
    """(accepts, 1-cell certificate) for one pointer-function variant"""
    marked = find_marked_columns(matrix)
    expected = k if variant == "A3" else 1
    if len(marked) != expected:
        return False, frozenset()
    columns = [col for col, _ in marked]
    specials = [special for _, special in marked]
    start = specials[0]

    if variant == "A3":
        special_set = set(specials)
        first = matrix[start]
        if any(matrix[s].lptr != first.lptr or matrix[s].rptr != first.rptr for s in specials):
            return False, frozenset()
        seen = []
        cursor = start
        for _ in range(k):
            nxt = matrix[cursor].bptr
            if nxt not in special_set:
                return False, frozenset()
            seen.append(nxt)
            cursor = nxt
        if cursor != start or set(seen) != special_set:
            return False, frozenset()

    leaves, walked = _walk_all(matrix, start)
    if leaves is None:
        return False, frozenset()
    if any(matrix[leaf].value != 0 for leaf in leaves):
        return False, frozenset()
    backs = [matrix[leaf].bptr for leaf in leaves]
    if variant == "A1":
        ok = all(b == columns[0] for b in backs)
    elif variant == "A2":
        ok = sum(b == start for b in backs) == matrix.width // 2
    else:
        ok = all(b in set(specials) for b in backs)
    if not ok:
        return False, frozenset()
    return True, frozenset(_column_cells(matrix, columns) | walked)


def a1_eval(matrix):
    return int(_certify(matrix, "A1")[0])


def a2_eval(matrix):
    return int(_certify(matrix, "A2")[0])


def a3_eval(matrix, k=1):
    return int(_certify(matrix, "A3", k)[0])


def certificate(matrix, variant, k=1):
    """The 1-cell certificate of an accepted matrix, or None"""
    ok, cells = _certify(matrix, variant, k)
    return cells if ok else None


# --- Views ---


def _grid(obj):
    return obj.cells if isinstance(obj, PointerMatrix) else np.asarray(obj, dtype=object)


def _wrap(obj, grid):
    return PointerMatrix(grid, obj.kind) if isinstance(obj, PointerMatrix) else grid


def transpose(obj):
    """Transpose a pointer matrix or a tag grid; cell contents are untouched"""
    return _wrap(obj, _grid(obj).T.copy())


def brick_rot(obj, which):
    """A^⊤[(r,c,b)] = A[(b,r,c)] and A^⊣[(r,c,b)] = A[(c,b,r)]"""
    grid = _grid(obj)
    n = grid.shape[0]
    if grid.shape[1] != n * n:
        raise ValueError(f"brick view needs an n x n^2 grid, got {grid.shape}")
    old = grid.reshape(n, n, n)  # axes: row, brick, column-in-brick
    r, b, c = np.indices((n, n, n))
    if which == Tag.TOP:
        new = old[b, c, r]
    elif which == Tag.DASHV:
        new = old[c, r, b]
    else:
        raise ValueError(f"brick rotation is ⊤ or ⊣, got {which}")
    return _wrap(obj, new.reshape(n, n * n))


def view(obj, tag, three_way=False):
    """The frame in which the branch for `tag` evaluates"""
    if tag == Tag.VDASH:
        return obj
    if three_way:
        return brick_rot(obj, tag)
    if tag == Tag.DASHV:
        return transpose(obj)
    raise ValueError(f"tag {tag} needs the three-way (brick) form")


def _inverse_tag(tag, three_way):
    if not three_way or tag == Tag.VDASH:
        return tag
    return Tag.DASHV if tag == Tag.TOP else Tag.TOP


# --- Tag-guarded variants ---


def mod_branches(matrix, tags, variant, k=1, three_way=False):
    """Tags whose branch accepts; at most one for any input"""
    accepted = []
    for tag in THREE_WAY_TAGS if three_way else TWO_WAY_TAGS:
        frame = view(matrix, tag, three_way)
        ok, cells = _certify(frame, variant, k)
        if not ok:
            continue
        tag_frame = view(tags, tag, three_way)
        if all(tag_frame[r, c] == tag for r, c in cells):
            accepted.append(tag)
    if len(accepted) > 1:
        logger.warning("more than one Mod branch accepted: %s", accepted)
    return accepted


def mod_a1_eval(matrix, tags):
    return int(bool(mod_branches(matrix, tags, "A1")))


def mod_a2_eval(matrix, tags):
    return int(bool(mod_branches(matrix, tags, "A2")))


def mod_a3_eval(matrix, tags, k=1):
    return int(bool(mod_branches(matrix, tags, "A3", k)))


def mod_a3star_eval(matrix, tags, k=1):
    return int(bool(mod_branches(matrix, tags, "A3", k, three_way=True)))


# --- Builders ---


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _random_cell(rng, m, width):
    return (int(rng.integers(m)), int(rng.integers(width)))


def random_symbol(rng, kind, m, width):
    """A symbol with non-null pointers, so never the trivial filler"""
    back = int(rng.integers(width)) if kind == "type1" else _random_cell(rng, m, width)
    return CellSymbol(
        int(rng.integers(2)), _random_cell(rng, m, width), _random_cell(rng, m, width), back
    )


def build_one_instance(variant, n, rng=None, k=1, m=None, width=None, tag=Tag.VDASH, three_way=False):
    """Place a certified 1-input of A1/A2/A3 and return it in the frame of `tag`"""
    rng = _rng(rng)
    m = n if m is None else m
    width = n if width is None else width
    kind = "type1" if variant == "A1" else "type2"
    if variant not in ("A1", "A2", "A3"):
        raise BuilderError(f"unknown variant {variant!r}")
    if width < 2 or width & (width - 1):
        raise BuilderError(f"width must be a power of two >= 2, got {width}")
    if m < 2:
        raise BuilderError("need at least two rows")
    marks = k if variant == "A3" else 1
    if not 1 <= marks < width:
        raise BuilderError(f"cannot mark {marks} of {width} columns")
    depth = tree_depth(width)

    columns = [int(c) for c in rng.permutation(width)[:marks]]
    free = [(r, c) for c in range(width) if c not in columns for r in range(m)]
    needed = (width - 2) + width
    if len(free) < needed:
        raise BuilderError(f"{len(free)} free cells, the tree needs {needed}")
    order = rng.permutation(len(free))
    placed = [free[i] for i in order[:needed]]
    specials = [(int(rng.integers(m)), c) for c in columns]

    nodes = {(): specials[0]}
    slots = iter(placed)
    for level in range(1, depth + 1):
        for bits in range(1 << level):
            prefix = tuple("right" if (bits >> (level - 1 - t)) & 1 else "left" for t in range(level))
            nodes[prefix] = next(slots)

    cells = np.empty((m, width), dtype=object)
    for r in range(m):
        for c in range(width):
            cells[r, c] = TRIVIAL_SYMBOL if c in columns else random_symbol(rng, kind, m, width)

    def children(prefix):
        return nodes[prefix + ("left",)], nodes[prefix + ("right",)]

    for prefix, coord in nodes.items():
        if prefix == () or len(prefix) == depth:
            continue
        left, right = children(prefix)
        cells[coord] = replace(random_symbol(rng, kind, m, width), lptr=left, rptr=right)

    leaves = [nodes[path_sequence(j, width).path] for j in range(1, width + 1)]
    back_targets = set(rng.permutation(width)[: width // 2].tolist()) if variant == "A2" else set()
    for j, leaf in enumerate(leaves):
        if variant == "A1":
            back = columns[0]
        elif variant == "A2":
            back = specials[0]
            if j not in back_targets:
                while back == specials[0]:
                    back = _random_cell(rng, m, width)
        else:
            back = specials[int(rng.integers(len(specials)))]
        cells[leaf] = CellSymbol(0, *_random_cell_pair(rng, m, width), back)

    left, right = children(())
    for i, special in enumerate(specials):
        if variant == "A3":
            back = specials[(i + 1) % len(specials)]
        elif variant == "A1":
            back = int(rng.integers(width))
        else:
            back = _random_cell(rng, m, width)
        cells[special] = CellSymbol(int(rng.integers(2)), left, right, back)

    matrix = PointerMatrix(cells, kind)
    accepted, cert = _certify(matrix, variant, marks)
    if not accepted:
        raise BuilderError("builder produced an instance its evaluator rejects")

    allowed = THREE_WAY_TAGS if three_way else TWO_WAY_TAGS
    tag_grid = np.empty((m, width), dtype=object)
    for r in range(m):
        for c in range(width):
            tag_grid[r, c] = tag if (r, c) in cert else allowed[int(rng.integers(len(allowed)))]

    if tag != Tag.VDASH:
        # physical frame P with view(P, tag) == matrix
        inverse = _inverse_tag(tag, three_way)
        positions = np.empty((m, width), dtype=object)
        for r in range(m):
            for c in range(width):
                positions[r, c] = (r, c)
        moved = view(positions, inverse, three_way)
        where = {moved[r, c]: (r, c) for r in range(moved.shape[0]) for c in range(moved.shape[1])}
        matrix = view(matrix, inverse, three_way)
        tag_grid = view(tag_grid, inverse, three_way)
        cert = frozenset(where[cell] for cell in cert)
    logger.debug("built %s instance %dx%d, certificate of %d cells", variant, m, width, len(cert))
    return BuiltInstance(matrix, tag_grid, cert)


def _random_cell_pair(rng, m, width):
    return _random_cell(rng, m, width), _random_cell(rng, m, width)


def permute_matrix(matrix, row_perm, col_perm):
    """Move cell (r, c) to (row_perm[r], col_perm[c]) and remap every pointer"""
    row_perm = [int(v) for v in row_perm]
    col_perm = [int(v) for v in col_perm]

    def remap(ptr):
        if ptr is None:
            return None
        if isinstance(ptr, tuple):
            return (row_perm[ptr[0]], col_perm[ptr[1]])
        return col_perm[ptr]

    cells = np.empty(matrix.shape, dtype=object)
    for r in range(matrix.m):
        for c in range(matrix.width):
            sym = matrix.cells[r, c]
            cells[row_perm[r], col_perm[c]] = replace(
                sym, lptr=remap(sym.lptr), rptr=remap(sym.rptr), bptr=remap(sym.bptr)
            )
    return PointerMatrix(cells, matrix.kind)


# --- Text format ---

_CELL_LINE = re.compile(r"(\d+)\s+(\d+)\s*:\s*([01])\s+(\S+)\s+(\S+)\s+(\S+)")


def _parse_ptr(token):
    if token == "-":
        return None
    if token.startswith("("):
        return tuple(int(v) for v in token.strip("()").split(","))
    return int(token)


def format_matrix(matrix, tags=None):
    """One cell per line "r c : V (lr,lc) (rr,rc) b", then an optional tag grid"""
    lines = [f"pointer-matrix {matrix.kind} {matrix.m} {matrix.width}"]
    for r in range(matrix.m):
        for c in range(matrix.width):
            sym = matrix.cells[r, c]
            lines.append(
                f"{r} {c} : {sym.value} {_fmt_ptr(sym.lptr)} {_fmt_ptr(sym.rptr)} {_fmt_ptr(sym.bptr)}"
            )
    if tags is not None:
        lines.append("tags")
        for r in range(matrix.m):
            lines.append("".join(tags[r, c].value for c in range(matrix.width)))
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    """Inverse of format_matrix; returns (matrix, tags or None)"""
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    header = lines[0].split() if lines else []
    if len(header) != 4 or header[0] != "pointer-matrix":
        raise SpecParseError("matrix text must start with 'pointer-matrix <kind> <m> <width>'")
    kind, m, width = header[1], int(header[2]), int(header[3])
    cells = np.empty((m, width), dtype=object)
    body = lines[1 : 1 + m * width]
    for line in body:
        match = _CELL_LINE.fullmatch(line)
        if match is None:
            raise SpecParseError(f"bad cell line {line!r}")
        r, c, value = int(match.group(1)), int(match.group(2)), int(match.group(3))
        cells[r, c] = CellSymbol(value, *(_parse_ptr(match.group(i)) for i in (4, 5, 6)))
    if len(body) != m * width or any(cell is None for cell in cells.flat):
        raise SpecParseError("matrix text does not list every cell")
    tags = None
    rest = lines[1 + m * width :]
    if rest:
        if rest[0] != "tags" or len(rest) != m + 1:
            raise SpecParseError("tag section must be 'tags' followed by one line per row")
        tags = np.empty((m, width), dtype=object)
        for r, row in enumerate(rest[1:]):
            if len(row) != width:
                raise SpecParseError(f"tag row {r} has {len(row)} entries, expected {width}")
            for c, char in enumerate(row):
                tags[r, c] = Tag.from_char(char)
    return PointerMatrix(cells, kind), tags
