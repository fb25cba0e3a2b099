"""
Permutation Groups

Generators of the groups acting on the flat bit index of a composed
function (cell, part, block, offset):

- part generators: adjacent part transpositions inside one cell;
- block generators: Simple Block Swap and Block Flip on one part;
- cell generators: a bit permutation applied to every block of every cell
  (a Bt node, a per-third pair-tree node or a third rotation) together with
  the cell relabelling it induces on the matrix.

Also orbit computation, the constructive index-to-index word builder and the
invariance harness that checks f(σ(x)) = f(x).
"""

from __future__ import annotations

import functools
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import pandas as pd

from .codec import (
    BLOCK_FLIP,
    BRICK,
    COLUMN,
    ROW,
    SIMPLE_BLOCK_SWAP,
    decode_axis,
    encode_axis,
    rotation1_index,
    rotation2_index,
)
from .errors import GroupError, SchemeError

logger = logging.getLogger(__name__)

MATERIALIZE_LIMIT = 1 << 17
BLOCK_ELEMENTS = {"SBS": SIMPLE_BLOCK_SWAP, "BF": BLOCK_FLIP}
GENERATOR_CLASSES = ("part", "block:SBS", "block:BF", "cell")


@dataclass(frozen=True, eq=False)
class IndexPermutation:
    """A permutation of range(size) given by where each index goes"""

    size: int
    image: Callable
    label: str = ""

    @classmethod
    def from_array(cls, array, label=""):
        array = np.asarray(array, dtype=np.int64)
        return cls(array.size, lambda idx: array[idx], label)

    def __call__(self, idx):
        return self.image(np.asarray(idx, dtype=np.int64))

    def materialize(self):
        if self.size > MATERIALIZE_LIMIT:
            raise GroupError(f"refusing to materialize a permutation of {self.size} points")
        return self(np.arange(self.size))

    def is_bijective(self, rng=None, fraction=0.01):
        """Exhaustive below the materialize limit, sampled above it"""
        if self.size <= MATERIALIZE_LIMIT:
            images = self.materialize()
            return bool(np.array_equal(np.sort(images), np.arange(self.size)))
        rng = np.random.default_rng(rng)
        sample = rng.choice(self.size, size=max(1, int(self.size * fraction)), replace=False)
        images = self(sample)
        return bool(images.min() >= 0 and images.max() < self.size and np.unique(images).size == sample.size)

    def apply(self, x):
        """Move the bit at position i of x (last axis) to position image(i)"""
        x = np.asarray(x)
        y = np.empty_like(x)
        y[..., self(np.arange(self.size))] = x
        return y

    def __str__(self):
        return self.label or f"perm[{self.size}]"


def _half_swap_image(size, start, length):
    image = np.arange(size)
    half = length // 2
    image[start : start + half] += half
    image[start + half : start + length] -= half
    return image


def bt_generators(k):
    """Bt_k: one half-swap per internal node of the complete tree on k leaves, root (Swap½) last"""
    if k < 2 or k & (k - 1):
        raise SchemeError(f"Bt_k needs k a power of two >= 2, got {k}")
    gens = []
    length = 2
    while length <= k:
        for start in range(0, k, length):
            gens.append(IndexPermutation.from_array(_half_swap_image(k, start, length), f"bt{k}[{start}:{start + length}]"))
        length *= 2
    return gens


def pair_tree_generators(pairs, offset=0, size=None, prefix="pt"):
    """Subtree swaps over a tree whose leaves are bit pairs; exact Bt_{2p} when p is a power of two.

    A leaf swaps the two bits of its pair; an internal node exchanges its two
    child segments of ⌊m/2⌋ and ⌈m/2⌉ pairs.
    """
    size = 2 * pairs + offset if size is None else size
    nodes = []

    def visit(start, count):
        if count == 1:
            image = np.arange(size)
            a = offset + 2 * start
            image[a], image[a + 1] = a + 1, a
            nodes.append((1, start, image))
            return
        left = count // 2
        image = np.arange(size)
        lo, mid, hi = offset + 2 * start, offset + 2 * (start + left), offset + 2 * (start + count)
        image[lo:mid] += hi - mid
        image[mid:hi] -= mid - lo
        nodes.append((count, start, image))
        visit(start, left)
        visit(start + left, count - left)

    visit(0, pairs)
    nodes.sort(key=lambda node: (node[0], node[1]))
    return [
        IndexPermutation.from_array(image, f"{prefix}[{start}:{start + count}]")
        for count, start, image in nodes
    ]


def _span(perm):
    """Segment length of a tree-node generator, read from its label"""
    start, stop = perm.label.rsplit("[", 1)[1].rstrip("]").split(":")
    return int(stop) - int(start)


def rotation_generators(length):
    """Rotation1 and Rotation2 on a block as image maps"""
    return [
        IndexPermutation.from_array(np.argsort(rotation1_index(length)), "rotation1"),
        IndexPermutation.from_array(np.argsort(rotation2_index(length)), "rotation2"),
    ]


@dataclass(frozen=True)
class GeneratorDescriptor:
    kind: str  # part | block | cell
    detail: object  # part: lower index of the swapped pair; block: SBS|BF; cell: generator label
    cell: Optional[int] = None  # None acts in every cell
    part: Optional[int] = None  # block generators only; None acts on every part
    pointer_update: bool = True

    @property
    def generator_class(self):
        return f"block:{self.detail}" if self.kind == "block" else self.kind

    def __str__(self):
        where = "*" if self.cell is None else str(self.cell)
        if self.kind == "part":
            return f"part({where}: {self.detail}<->{self.detail + 1})"
        if self.kind == "block":
            part = "*" if self.part is None else str(self.part)
            return f"{self.detail}({where}.{part})"
        suffix = "" if self.pointer_update else " no-pointer-update"
        return f"cell({self.detail}{suffix})"


@dataclass(frozen=True)
class IndexAddress:
    cell: int
    part: int
    block: int
    offset: int


@dataclass(frozen=True)
class CellGenerator:
    label: str
    offsets: np.ndarray = field(compare=False)
    cells: np.ndarray = field(compare=False)
    leaf: bool = False


class ConstructionGroup:
    """The generators of G, G1 or G2 on an m x width matrix of cell codewords"""

    def __init__(self, scheme, shape):
        self.scheme = scheme
        self.m, self.width = shape
        n = scheme.n
        expected = (n, n * n) if len(scheme.axes) == 3 else (n, n)
        if tuple(shape) != expected:
            raise SchemeError(f"{scheme.name} at n={n} acts on a {expected[0]}x{expected[1]} matrix, got {shape}")
        self.cells = self.m * self.width
        self.size = self.cells * scheme.cell_len
        self.cell_generators = self._build_cell_generators()
        self._by_label = {gen.label: gen for gen in self.cell_generators}
        logger.debug(
            "%s group on N=%d: %d cell generators (%d leaves)",
            scheme.name, self.size, len(self.cell_generators), sum(g.leaf for g in self.cell_generators),
        )

    # --- cell generators ---

    def _offset_generators(self):
        scheme = self.scheme
        size = scheme.block_len
        if len(scheme.axes) == 2:
            if size & (size - 1):
                raise SchemeError(f"{scheme.name} needs 4 log n to be a power of two for Bt, got {size}")
            return [(g, _span(g) == 2) for g in bt_generators(size)]
        L = scheme.logn
        gens = []
        for third in range(3):
            gens.extend(
                (g, _span(g) == 1)
                for g in pair_tree_generators(L, offset=2 * L * third, size=size, prefix=f"t{third}")
            )
        gens.extend((g, False) for g in rotation_generators(size))
        return gens

    def _build_cell_generators(self):
        out = []
        for perm, leaf in self._offset_generators():
            offsets = perm.materialize()
            out.append(CellGenerator(perm.label, offsets, self._induced_cells(offsets, perm.label), leaf))
        return out

    def _induced_cells(self, offsets, label):
        """Relabel cells by pushing every axis code through the offset map and decoding it"""
        scheme = self.scheme
        n, axes = scheme.n, scheme.axes
        axis_map, coord_map = {}, {}
        for axis in axes:
            images = np.empty(n, dtype=np.int64)
            for x in range(n):
                code = encode_axis(axis, x + 1, n, axes)
                moved = np.empty_like(code)
                moved[offsets] = code
                decoded = decode_axis(moved, axes)
                if decoded is None:
                    raise GroupError(f"{label}: image of a {axis} code does not decode")
                target, value = decoded
                if axis_map.setdefault(axis, target) != target:
                    raise GroupError(f"{label}: {axis} codes land on more than one axis")
                images[x] = value - 1
            coord_map[axis] = images
        if sorted(axis_map.values()) != sorted(axes):
            raise GroupError(f"{label}: axis map {axis_map} is not a permutation")

        index = np.arange(self.cells)
        r, col = np.divmod(index, self.width)
        coords = {ROW: r, COLUMN: col} if len(axes) == 2 else {ROW: r, COLUMN: col % n, BRICK: col // n}
        new = {axis_map[axis]: coord_map[axis][coords[axis]] for axis in axes}
        if len(axes) == 2:
            return new[ROW] * self.width + new[COLUMN]
        return new[ROW] * self.width + new[BRICK] * n + new[COLUMN]

    def cell_generator(self, label):
        try:
            return self._by_label[label]
        except KeyError:
            raise GroupError(f"no cell generator {label!r} in {self.scheme.name}") from None

    def induced_cell_perm(self, label):
        """(cell map, per-block offset map) of one cell generator"""
        gen = self.cell_generator(label)
        return gen.cells, gen.offsets

    @property
    def leaf_generators(self):
        return [g for g in self.cell_generators if g.leaf]

    # --- generator sets ---

    def generators(self, scope="global"):
        """Descriptors of every generator; scope 'cell' emits the per-cell part/block generators"""
        parts = self.scheme.parts
        cell_gens = [GeneratorDescriptor("cell", g.label) for g in self.cell_generators]
        if scope == "global":
            return (
                [GeneratorDescriptor("part", a) for a in range(parts - 1)]
                + [GeneratorDescriptor("block", name) for name in BLOCK_ELEMENTS]
                + cell_gens
            )
        if scope != "cell":
            raise ValueError(f"scope must be 'global' or 'cell', got {scope!r}")
        out = []
        for cell in range(self.cells):
            out.extend(GeneratorDescriptor("part", a, cell) for a in range(parts - 1))
            for part in range(parts):
                out.extend(GeneratorDescriptor("block", name, cell, part) for name in BLOCK_ELEMENTS)
        return out + cell_gens

    def random_generator(self, generator_class, rng):
        """A uniformly drawn generator of one class, localized to a random cell"""
        cell = int(rng.integers(self.cells))
        if generator_class == "part":
            return GeneratorDescriptor("part", int(rng.integers(self.scheme.parts - 1)), cell)
        if generator_class.startswith("block:"):
            name = generator_class.split(":", 1)[1]
            return GeneratorDescriptor("block", name, cell, int(rng.integers(self.scheme.parts)))
        if generator_class == "cell":
            gen = self.cell_generators[int(rng.integers(len(self.cell_generators)))]
            return GeneratorDescriptor("cell", gen.label)
        raise ValueError(f"unknown generator class {generator_class!r}")

    # --- addressing ---

    def address(self, idx):
        s = self.scheme
        if not 0 <= idx < self.size:
            raise IndexError(f"index {idx} outside 0..{self.size - 1}")
        cell, rest = divmod(int(idx), s.cell_len)
        part, rest = divmod(rest, s.part_len)
        block, offset = divmod(rest, s.block_len)
        return IndexAddress(cell, part, block, offset)

    def index(self, address):
        s = self.scheme
        return ((address.cell * s.parts + address.part) * 4 + address.block) * s.block_len + address.offset

    def cell_coordinate(self, cell):
        return divmod(cell, self.width)

    # --- action ---

    def image(self, desc, idx):
        """Where each index in idx goes under desc"""
        s = self.scheme
        idx = np.asarray(idx, dtype=np.int64)
        cell, rest = np.divmod(idx, s.cell_len)
        part, rest = np.divmod(rest, s.part_len)
        block, offset = np.divmod(rest, s.block_len)

        if desc.kind == "cell":
            gen = self.cell_generator(desc.detail)
            cell = gen.cells[cell]
            if desc.pointer_update:
                offset = gen.offsets[offset]
        else:
            hit = np.ones(idx.shape, dtype=bool) if desc.cell is None else cell == desc.cell
            if desc.kind == "part":
                a = desc.detail
                lower, upper = hit & (part == a), hit & (part == a + 1)
                part = np.where(lower, a + 1, np.where(upper, a, part))
            elif desc.kind == "block":
                element = BLOCK_ELEMENTS[desc.detail]
                if desc.part is not None:
                    hit &= part == desc.part
                slot = np.array([element.slot_of(j) for j in range(4)])
                flipped = np.array(element.mask)[slot]
                new_block = slot[block]
                offset = np.where(hit & flipped[block].astype(bool), offset ^ 1, offset)
                block = np.where(hit, new_block, block)
            else:
                raise GroupError(f"unknown generator kind {desc.kind!r}")
        return ((cell * s.parts + part) * 4 + block) * s.block_len + offset

    def apply(self, desc, x):
        """Permute an input vector: the bit at i moves to image(i)"""
        x = np.asarray(x)
        if x.shape[-1] != self.size:
            raise GroupError(f"input has {x.shape[-1]} bits, group acts on {self.size}")
        y = np.empty_like(x)
        y[..., self.image(desc, np.arange(self.size))] = x
        return y

    def apply_word(self, word, x):
        for desc in word:
            x = self.apply(desc, x)
        return x

    def word_image(self, word, idx):
        for desc in word:
            idx = self.image(desc, idx)
        return idx

    def as_permutation(self, desc):
        return IndexPermutation(self.size, functools.partial(self.image, desc), str(desc))

    def permutations(self, scope="global"):
        return [self.as_permutation(desc) for desc in self.generators(scope)]

    # --- index mapping ---

    def map_index(self, p, q):
        """Generator word sending index p to index q, checked before it is returned"""
        target = self.address(q)
        word = []

        def push(descs):
            nonlocal current
            for desc in descs:
                word.append(desc)
                current = int(self.image(desc, current))

        current = int(p)
        if current == q:
            return []

        # offsets: cell generators act on offsets independently of everything else
        push(self._offset_path(self.address(current).offset, target.offset))
        # cell: leaf generators move cells and only swap offsets within a pair
        push(self._cell_path(self.address(current).cell, target.cell))
        # part
        here = self.address(current)
        step = 1 if target.part > here.part else -1
        for a in range(here.part, target.part, step):
            push([GeneratorDescriptor("part", a if step > 0 else a - 1, here.cell)])
        # block
        here = self.address(current)
        push(self._block_path(here, target.block))
        # final flip of the pair bit
        here = self.address(current)
        if here.offset != target.offset:
            if here.offset ^ 1 != target.offset:
                raise GroupError(f"offset {here.offset} cannot reach {target.offset} by a flip")
            names = ("BF",) if here.block >= 2 else ("SBS", "BF", "SBS")
            push([GeneratorDescriptor("block", name, here.cell, here.part) for name in names])

        if int(self.word_image(word, p)) != q:
            raise GroupError(f"word for {p} -> {q} does not verify")
        return word

    def _offset_path(self, start, goal):
        return [GeneratorDescriptor("cell", label) for label in _bfs_path(
            start, goal, [(g.label, g.offsets) for g in self.cell_generators]
        )]

    def _cell_path(self, start, goal):
        return [GeneratorDescriptor("cell", label) for label in _bfs_path(
            start, goal, [(g.label, g.cells) for g in self.leaf_generators]
        )]

    def _block_path(self, here, goal):
        moves = [(name, np.array([el.slot_of(j) for j in range(4)])) for name, el in BLOCK_ELEMENTS.items()]
        return [
            GeneratorDescriptor("block", name, here.cell, here.part)
            for name in _bfs_path(here.block, goal, moves)
        ]


def _bfs_path(start, goal, moves):
    """Labels of a shortest path from start to goal where each move is an image array"""
    parent = {start: None}
    queue = deque([start])
    while queue and goal not in parent:
        node = queue.popleft()
        for label, image in moves:
            nxt = int(image[node])
            if nxt not in parent:
                parent[nxt] = (node, label)
                queue.append(nxt)
    if goal not in parent:
        raise GroupError(f"{goal} is not reachable from {start}")
    path = []
    node = goal
    while parent[node] is not None:
        node, label = parent[node]
        path.append(label)
    return path[::-1]


def construction_generators(construction, scope="cell"):
    return ConstructionGroup(construction.scheme, construction.shape).generators(scope)


def orbit(perms, start, size=None):
    """Size of the orbit of start under a list of IndexPermutations"""
    size = perms[0].size if size is None else size
    visited = np.zeros(size, dtype=bool)
    visited[start] = True
    frontier = np.array([start], dtype=np.int64)
    rounds = 0
    while frontier.size:
        found = []
        for perm in perms:
            images = perm(frontier)
            images = images[~visited[images]]
            if images.size:
                images = np.unique(images)
                visited[images] = True
                found.append(images)
        frontier = np.concatenate(found) if found else np.empty(0, dtype=np.int64)
        rounds += 1
        logger.debug("orbit round %d: %d new, %d total", rounds, frontier.size, int(visited.sum()))
    return int(visited.sum())


def negative_control_generator(group):
    """A cell relabelling that moves cells but leaves the pointer codes alone"""
    for gen in group.leaf_generators:
        if not np.array_equal(gen.cells, np.arange(group.cells)):
            return GeneratorDescriptor("cell", gen.label, pointer_update=False)
    raise GroupError("no leaf generator moves a cell")


# --- invariance ---


@dataclass
class InvarianceReport:
    checks: dict
    violations: list

    @property
    def passed(self):
        return not self.violations

    def to_frame(self):
        rows = []
        for cls, count in self.checks.items():
            failed = sum(1 for v in self.violations if v[0] == cls)
            rows.append({"class": cls, "checks": count, "violations": failed})
        return pd.DataFrame(rows, columns=["class", "checks", "violations"])


def invariance_check(evaluator, group, inputs, per_class=500, rng=None, threads=1, extra=None):
    """Check f(σ(x)) = f(x) for per_class random (x, σ) pairs in every generator class.

    `extra` maps a class name to a fixed descriptor checked on every input,
    which is how the negative control is run.
    """
    rng = np.random.default_rng(rng)
    inputs = [np.asarray(x, dtype=np.uint8) for x in inputs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        base = list(pool.map(evaluator, inputs))

        tasks = []
        for cls in GENERATOR_CLASSES:
            for _ in range(per_class):
                tasks.append((cls, group.random_generator(cls, rng), int(rng.integers(len(inputs)))))
        for cls, desc in (extra or {}).items():
            tasks.extend((cls, desc, i) for i in range(len(inputs)))

        def run(task):
            _, desc, i = task
            return evaluator(group.apply(desc, inputs[i]))

        values = list(pool.map(run, tasks))

    checks, violations = {}, []
    for (cls, desc, i), value in zip(tasks, values):
        checks[cls] = checks.get(cls, 0) + 1
        if value != base[i]:
            violations.append((cls, str(desc), i))
    logger.info("invariance: %d checks, %d violations", len(tasks), len(violations))
    return InvarianceReport(checks, violations)
