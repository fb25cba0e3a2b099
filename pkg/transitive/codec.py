"""
Cell Codecs

Bit-level encodings of pointer-matrix cells:

- bb, the balanced binary representation (1 -> 10, 0 -> 01, weight log n);
- E and E', the balanced-pointer encodings placing bb in the row/column
  half or the row/column/brick third of a block;
- the three cell schemes DEC96, DEC112 and DEC240 (6, 7 and 10 parts of
  four blocks each), their standard forms, the valid part and block
  permutations, and the decoder that undoes them;
- the k-sum gadget codec.

A cell is identified part by part from block Hamming weights only, so any
valid permutation of a standard form decodes to the same symbol.
"""

from __future__ import annotations

import functools
import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import CodecError, SchemeError
from .pointerfn import CellSymbol, NULL_SYMBOL, Tag

logger = logging.getLogger(__name__)

ROW, COLUMN, BRICK = "row", "column", "brick"
AXES = (ROW, COLUMN, BRICK)


def _bits(bits):
    if isinstance(bits, str):
        return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    return np.asarray(bits, dtype=np.uint8)


def log2_exact(n):
    if n < 2 or n & (n - 1):
        raise SchemeError(f"n must be a power of two >= 2, got {n}")
    return n.bit_length() - 1


# --- Block operators (index form: new = old[..., index]) ---


@functools.lru_cache(maxsize=None)
def swap_half_index(length):
    half = length // 2
    return np.concatenate([np.arange(half, length), np.arange(half)])


@functools.lru_cache(maxsize=None)
def rotation1_index(length):
    third = length // 3
    return np.concatenate([np.arange(2 * third, length), np.arange(2 * third)])


@functools.lru_cache(maxsize=None)
def rotation2_index(length):
    third = length // 3
    return np.concatenate([np.arange(third, length), np.arange(third)])


@functools.lru_cache(maxsize=None)
def flip_index(length):
    return np.arange(length).reshape(-1, 2)[:, ::-1].ravel()


def swap_half(bits):
    bits = _bits(bits)
    return bits[..., swap_half_index(bits.shape[-1])]


def rotation1(bits):
    """x_{2k+1..3k}, x_{1..k}, x_{k+1..2k}: third t moves to third t+1"""
    bits = _bits(bits)
    return bits[..., rotation1_index(bits.shape[-1])]


def rotation2(bits):
    """x_{k+1..3k}, x_{1..k}: third t moves to third t-1"""
    bits = _bits(bits)
    return bits[..., rotation2_index(bits.shape[-1])]


def flip(bits):
    """Swap every adjacent pair (1,2)(3,4)..."""
    bits = _bits(bits)
    return bits[..., flip_index(bits.shape[-1])]


# --- bb, E and E' ---


def bb(ell, logn):
    """Balanced binary code of ell mod n, most significant digit first"""
    n = 1 << logn
    if not 1 <= ell <= n:
        raise CodecError(f"index {ell} outside 1..{n}")
    digits = (ell % n >> np.arange(logn - 1, -1, -1)) & 1
    out = np.empty(2 * logn, dtype=np.uint8)
    out[0::2] = digits
    out[1::2] = 1 - digits
    return out


def _bb_value(bits):
    """Residue encoded by a bb code, or None if a pair is not 10/01"""
    first, second = bits[0::2], bits[1::2]
    if bits.size % 2 or np.any(first == second):
        return None
    value = 0
    for d in first.tolist():
        value = value * 2 + d
    return value


def bb_decode(bits):
    bits = _bits(bits)
    if bits.size % 2:
        raise CodecError(f"bb code of odd length {bits.size}")
    value = _bb_value(bits)
    if value is None:
        raise CodecError(f"invalid bb code {''.join(map(str, bits.tolist()))}")
    return value if value else 1 << (bits.size // 2)


def encode_E(kind, i, n):
    """Row -> bb(i) 0^{2 log n}; column -> 0^{2 log n} bb(i)"""
    return encode_axis(kind, i, n, (ROW, COLUMN))


def encode_E3(kind, i, n):
    """bb(i) in the row, column or brick third, the other thirds zero"""
    return encode_axis(kind, i, n, AXES)


def encode_axis(kind, i, n, axes):
    if kind not in axes:
        raise CodecError(f"kind must be one of {axes}, got {kind!r}")
    logn = log2_exact(n)
    out = np.zeros(2 * logn * len(axes), dtype=np.uint8)
    slot = axes.index(kind)
    out[2 * logn * slot : 2 * logn * (slot + 1)] = bb(i, logn)
    return out


def decode_axis(bits, axes):
    """(kind, 1-based index) or None"""
    slices = bits.reshape(len(axes), -1)
    live = [t for t in range(len(axes)) if slices[t].any()]
    if len(live) != 1:
        return None
    value = _bb_value(slices[live[0]])
    if value is None:
        return None
    return axes[live[0]], value if value else 1 << (slices.shape[1] // 2)


def decode_E(bits):
    bits = _bits(bits)
    if bits.size % 4:
        raise CodecError(f"E code length {bits.size} is not a multiple of 4")
    decoded = decode_axis(bits, (ROW, COLUMN))
    if decoded is None:
        raise CodecError("E code needs exactly one non-zero half holding a bb code")
    return decoded


def decode_E3(bits):
    bits = _bits(bits)
    if bits.size % 6:
        raise CodecError(f"E' code length {bits.size} is not a multiple of 6")
    decoded = decode_axis(bits, AXES)
    if decoded is None:
        raise CodecError("E' code needs exactly one non-zero third holding a bb code")
    return decoded


# --- Schemes ---

_SCHEME_LAYOUT = {
    "DEC96": {
        "axes": (ROW, COLUMN),
        "kind": "type1",
        "roles": (("lptr", ROW), ("lptr", COLUMN), ("rptr", ROW), ("rptr", COLUMN), ("bptr", COLUMN)),
        "min_n": 16,
    },
    "DEC112": {
        "axes": (ROW, COLUMN),
        "kind": "type2",
        "roles": (
            ("lptr", ROW), ("lptr", COLUMN), ("rptr", ROW), ("rptr", COLUMN),
            ("bptr", ROW), ("bptr", COLUMN),
        ),
        "min_n": 16,
    },
    "DEC240": {
        "axes": AXES,
        "kind": "type2",
        "roles": (
            ("lptr", ROW), ("lptr", COLUMN), ("lptr", BRICK),
            ("rptr", ROW), ("rptr", COLUMN), ("rptr", BRICK),
            ("bptr", ROW), ("bptr", COLUMN), ("bptr", BRICK),
        ),
        "min_n": 8,
    },
}

SCHEMES = tuple(_SCHEME_LAYOUT)


def default_n(name):
    """Smallest supported n of a scheme"""
    if name not in _SCHEME_LAYOUT:
        raise SchemeError(f"unknown scheme {name!r}; expected one of {SCHEMES}")
    return _SCHEME_LAYOUT[name]["min_n"]


@dataclass(frozen=True)
class EncodingScheme:
    name: str
    n: int

    def __post_init__(self):
        if self.name not in _SCHEME_LAYOUT:
            raise SchemeError(f"unknown scheme {self.name!r}; expected one of {SCHEMES}")
        log2_exact(self.n)
        if self.n < self.layout["min_n"]:
            raise SchemeError(f"{self.name} needs n >= {self.layout['min_n']}, got {self.n}")
        self._check_weights()

    @property
    def layout(self):
        return _SCHEME_LAYOUT[self.name]

    @property
    def logn(self):
        return self.n.bit_length() - 1

    @property
    def axes(self):
        return self.layout["axes"]

    @property
    def matrix_kind(self):
        return self.layout["kind"]

    @property
    def pointer_roles(self):
        return self.layout["roles"]

    @property
    def parts(self):
        return 1 + len(self.pointer_roles)

    @property
    def block_len(self):
        return 2 * self.logn * len(self.axes)

    @property
    def part_len(self):
        return 4 * self.block_len

    @property
    def cell_len(self):
        return self.parts * self.part_len

    @property
    def tags(self):
        return (Tag.VDASH, Tag.TOP, Tag.DASHV) if len(self.axes) == 3 else (Tag.VDASH, Tag.DASHV)

    def block_weights(self, part, flag):
        """Standard weights of B1..B4; flag is V for the value part, null-ness otherwise"""
        L = self.logn
        if part == 0:
            value_block = self.block_len - (len(self.axes) * (len(self.axes) - 1)) // 2 - flag
            return (value_block, self.block_len, 2 * L + 1, 2 * L + 2)
        index = part + 1
        return (0 if flag else L, 2 * L + 1 + index, 2 * L + 1, 2 * L + 2)

    def part_weight(self, part, flag):
        return sum(self.block_weights(part, flag))

    @functools.cached_property
    def patterns(self):
        """Sorted block-weight multiset -> (part, flag)"""
        table = {}
        for part in range(self.parts):
            for flag in (0, 1) if part == 0 else (False, True):
                table[tuple(sorted(self.block_weights(part, flag)))] = (part, flag)
        return table

    def _check_weights(self):
        seen = set()
        for part in range(self.parts):
            for flag in (0, 1) if part == 0 else (False, True):
                weights = self.block_weights(part, flag)
                if len(set(weights)) != 4 or max(weights) > self.block_len:
                    raise SchemeError(f"{self.name} at n={self.n}: block weights {weights} do not fit")
                key = tuple(sorted(weights))
                if key in seen:
                    raise SchemeError(f"{self.name} at n={self.n}: weight pattern {key} is ambiguous")
                seen.add(key)

    def coordinate(self, ptr, axis):
        """0-based coordinate of a pointer along one axis"""
        if isinstance(ptr, tuple):
            r, col = ptr
            if axis == ROW:
                return r
            if len(self.axes) == 3:
                return col % self.n if axis == COLUMN else col // self.n
            return col
        return ptr

    def pointer(self, field, coords):
        """Inverse of coordinate: assemble a pointer from its per-axis coordinates"""
        if field == "bptr" and self.matrix_kind == "type1":
            return coords[COLUMN]
        if len(self.axes) == 3:
            return (coords[ROW], coords[BRICK] * self.n + coords[COLUMN])
        return (coords[ROW], coords[COLUMN])

    def apply_tag(self, blocks, tag):
        if tag == Tag.VDASH:
            return blocks
        if tag not in self.tags:
            raise SchemeError(f"{self.name} has no tag {tag}")
        if len(self.axes) == 2:
            return swap_half(blocks)
        return rotation1(blocks) if tag == Tag.TOP else rotation2(blocks)

    def undo_tag(self, blocks, tag):
        if tag == Tag.VDASH or len(self.axes) == 2:
            return self.apply_tag(blocks, tag)
        return rotation2(blocks) if tag == Tag.TOP else rotation1(blocks)


@dataclass(frozen=True, eq=False)
class CellCodeword:
    scheme: EncodingScheme
    bits: np.ndarray

    def __post_init__(self):
        bits = _bits(self.bits).ravel()
        if bits.size != self.scheme.cell_len:
            raise CodecError(f"{self.scheme.name} codewords have {self.scheme.cell_len} bits, got {bits.size}")
        object.__setattr__(self, "bits", bits)

    def __eq__(self, other):
        if not isinstance(other, CellCodeword):
            return NotImplemented
        return self.scheme == other.scheme and np.array_equal(self.bits, other.bits)

    def blocks(self):
        return self.bits.reshape(self.scheme.parts, 4, self.scheme.block_len)

    def index(self, part, block, offset):
        s = self.scheme
        return part * s.part_len + block * s.block_len + offset

    def address(self, index):
        part, rest = divmod(index, self.scheme.part_len)
        block, offset = divmod(rest, self.scheme.block_len)
        return part, block, offset

    def weight(self, part=None):
        blocks = self.blocks()
        return int(blocks.sum() if part is None else blocks[part].sum())

    def to_hex(self):
        nibbles = self.bits.reshape(-1, 4) @ np.array([8, 4, 2, 1])
        return "".join(f"{v:x}" for v in nibbles)

    @classmethod
    def from_hex(cls, scheme, text):
        text = text.strip().lower()
        if len(text) * 4 != scheme.cell_len:
            raise CodecError(f"{scheme.name} codewords have {scheme.cell_len // 4} hex digits, got {len(text)}")
        try:
            values = np.array([int(ch, 16) for ch in text])
        except ValueError as exc:
            raise CodecError(f"not a hex string: {exc}") from exc
        bits = (values[:, None] >> np.array([3, 2, 1, 0])) & 1
        return cls(scheme, bits.astype(np.uint8).ravel())


@dataclass(frozen=True)
class DecodedCell:
    valid: bool
    symbol: CellSymbol


INVALID_CELL = DecodedCell(False, NULL_SYMBOL)


def _filler(weight, length, rng):
    out = np.zeros(length, dtype=np.uint8)
    if rng is None:
        out[:weight] = 1
    else:
        out[rng.choice(length, size=weight, replace=False)] = 1
    return out


def std_encode_cell(symbol, scheme, rng=None):
    """Standard form of a symbol, with random filler strings when rng is given"""
    if symbol.value not in (0, 1):
        raise CodecError(f"cell value must be 0 or 1, got {symbol.value}")
    L, size = scheme.logn, scheme.block_len
    blocks = np.zeros((scheme.parts, 4, size), dtype=np.uint8)

    pieces = [np.ones(2 * L, dtype=np.uint8)]
    for t in range(1, len(scheme.axes)):
        drop = t + symbol.value if t == len(scheme.axes) - 1 else t
        pieces.append(_filler(2 * L - drop, 2 * L, rng))
    blocks[0, 0] = np.concatenate(pieces)
    for b, weight in enumerate(scheme.block_weights(0, symbol.value)[1:], start=1):
        blocks[0, b] = _filler(weight, size, rng)

    for part, (field, axis) in enumerate(scheme.pointer_roles, start=1):
        ptr = getattr(symbol, field)
        null = ptr is None
        if not null:
            coord = scheme.coordinate(ptr, axis)
            limit = scheme.n
            if not isinstance(coord, (int, np.integer)) or not 0 <= coord < limit:
                raise CodecError(f"{field} {ptr!r} does not fit a {scheme.name} cell at n={scheme.n}")
            blocks[part, 0] = encode_axis(axis, int(coord) + 1, scheme.n, scheme.axes)
        for b, weight in enumerate(scheme.block_weights(part, null)[1:], start=1):
            blocks[part, b] = _filler(weight, size, rng)

    if symbol.tag not in scheme.tags:
        raise SchemeError(f"{scheme.name} has no tag {symbol.tag}")
    blocks = scheme.apply_tag(blocks, symbol.tag)
    return CellCodeword(scheme, blocks.ravel())


# --- Valid permutations ---


@dataclass(frozen=True)
class BlockGroupElement:
    """Slot k receives flip^mask[k] of block perm[k]"""

    perm: tuple
    mask: tuple

    def apply(self, blocks):
        """Act on the last-but-one axis (the four blocks of a part)"""
        blocks = np.asarray(blocks)
        out = blocks[..., list(self.perm), :]
        for k, flipped in enumerate(self.mask):
            if flipped:
                out[..., k, :] = flip(out[..., k, :])
        return out

    def then(self, other):
        """This element followed by `other`"""
        perm = tuple(self.perm[other.perm[k]] for k in range(4))
        mask = tuple(other.mask[k] ^ self.mask[other.perm[k]] for k in range(4))
        return BlockGroupElement(perm, mask)

    def slot_of(self, block):
        """Slot that block `block` lands in"""
        return self.perm.index(block)


IDENTITY = BlockGroupElement((0, 1, 2, 3), (0, 0, 0, 0))
SIMPLE_BLOCK_SWAP = BlockGroupElement((2, 3, 0, 1), (0, 0, 0, 0))
BLOCK_FLIP = BlockGroupElement((1, 0, 2, 3), (0, 0, 1, 1))


@functools.lru_cache(maxsize=None)
def block_group():
    """All elements generated by Simple Block Swap and Block Flip"""
    seen = {IDENTITY}
    queue = deque([IDENTITY])
    while queue:
        element = queue.popleft()
        for gen in (SIMPLE_BLOCK_SWAP, BLOCK_FLIP):
            nxt = element.then(gen)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    by_perm = {}
    for element in seen:
        if element.perm in by_perm:
            raise SchemeError(f"slot permutation {element.perm} carries two flip masks")
        by_perm[element.perm] = element
    logger.debug("block group has %d elements", len(seen))
    return by_perm


@dataclass(frozen=True)
class PartPermutation:
    """Part k of the result is part order[k] of the input"""

    order: tuple

    def apply(self, blocks):
        return blocks[list(self.order)]


@dataclass(frozen=True)
class PartSwap:
    a: int
    b: int

    def apply(self, blocks):
        order = list(range(blocks.shape[0]))
        order[self.a], order[self.b] = order[self.b], order[self.a]
        return blocks[order]


@dataclass(frozen=True)
class BlockOp:
    part: int
    element: BlockGroupElement

    def apply(self, blocks):
        out = blocks.copy()
        out[self.part] = self.element.apply(blocks[self.part])
        return out


@dataclass(frozen=True, eq=False)
class OffsetMap:
    """Bit at offset o of every block moves to offset image[o]"""

    image: np.ndarray

    def apply(self, blocks):
        out = np.empty_like(blocks)
        out[..., np.asarray(self.image)] = blocks
        return out


def apply_cell_perm(word, op):
    blocks = op.apply(word.blocks())
    return CellCodeword(word.scheme, np.ascontiguousarray(blocks).ravel())


def random_valid_word(word, rng):
    """Apply a random part permutation and a random block-group element per part"""
    group = list(block_group().values())
    out = PartPermutation(tuple(rng.permutation(word.scheme.parts).tolist())).apply(word.blocks())
    for part in range(word.scheme.parts):
        out[part] = group[int(rng.integers(len(group)))].apply(out[part])
    return CellCodeword(word.scheme, out.ravel())


# --- Decoding ---


def _read_value_block(scheme, block):
    """(tag, V) from the value part's encoding block, or None"""
    L = scheme.logn
    slices = block.reshape(len(scheme.axes), 2 * L)
    full = [t for t in range(len(scheme.axes)) if slices[t].all()]
    if len(full) != 1:
        return None
    tag = (Tag.VDASH, Tag.DASHV)[full[0]] if len(scheme.axes) == 2 else (Tag.VDASH, Tag.TOP, Tag.DASHV)[full[0]]
    standard = scheme.undo_tag(block, tag).reshape(len(scheme.axes), 2 * L)
    for t in range(1, len(scheme.axes) - 1):
        if standard[t].sum() != 2 * L - t:
            return None
    value = 2 * L - (len(scheme.axes) - 1) - int(standard[-1].sum())
    if value not in (0, 1):
        return None
    return tag, value


def decode_blocks(scheme, blocks):
    """Decode a (parts, 4, block_len) array; total, never raises"""
    weights = blocks.sum(axis=2)
    found = {}
    for p in range(scheme.parts):
        match = scheme.patterns.get(tuple(sorted(weights[p].tolist())))
        if match is None or match[0] in found:
            return INVALID_CELL
        found[match[0]] = (p, match[1])

    group = block_group()
    standard = np.empty((scheme.parts, 4, scheme.block_len), dtype=np.uint8)
    for role, (p, flag) in found.items():
        expected = scheme.block_weights(role, flag)
        perm = tuple(expected.index(w) for w in weights[p].tolist())
        element = group.get(perm)
        if element is None:
            return INVALID_CELL
        for k, j in enumerate(perm):
            standard[role, j] = flip(blocks[p, k]) if element.mask[k] else blocks[p, k]

    read = _read_value_block(scheme, standard[0, 0])
    if read is None:
        return INVALID_CELL
    tag, value = read

    coords = {}
    for part, (field, axis) in enumerate(scheme.pointer_roles, start=1):
        block = standard[part, 0]
        if not block.any():
            coords.setdefault(field, {})[axis] = None
            continue
        decoded = decode_axis(scheme.undo_tag(block, tag), scheme.axes)
        if decoded is None or decoded[0] != axis:
            return INVALID_CELL
        coords.setdefault(field, {})[axis] = decoded[1] - 1

    pointers = {}
    for field, per_axis in coords.items():
        values = list(per_axis.values())
        if all(v is None for v in values):
            pointers[field] = None
        elif any(v is None for v in values):
            return INVALID_CELL
        else:
            pointers[field] = scheme.pointer(field, per_axis)
    return DecodedCell(True, CellSymbol(value, pointers["lptr"], pointers["rptr"], pointers["bptr"], tag))


@functools.lru_cache(maxsize=1 << 16)
def _dec_cached(scheme, key):
    bits = np.frombuffer(key, dtype=np.uint8)
    return decode_blocks(scheme, bits.reshape(scheme.parts, 4, scheme.block_len))


def dec(word, scheme=None):
    """Decode a codeword (or raw cell bits with an explicit scheme)"""
    if isinstance(word, CellCodeword):
        scheme, bits = word.scheme, word.bits
    else:
        if scheme is None:
            raise CodecError("raw bits need a scheme")
        bits = _bits(word).ravel()
        if bits.size != scheme.cell_len:
            return INVALID_CELL
    return _dec_cached(scheme, np.ascontiguousarray(bits, dtype=np.uint8).tobytes())


# --- k-sum gadgets ---

# Klein four-group on the four slots of a bit gadget; each element is an involution
KLEIN = ((0, 1, 2, 3), (1, 0, 3, 2), (2, 3, 0, 1), (3, 2, 1, 0))


@dataclass(frozen=True)
class KSumGadgetParams:
    b: int
    k: int

    def __post_init__(self):
        log2_exact(self.b)
        if self.k < 1:
            raise SchemeError(f"k must be >= 1, got {self.k}")

    @property
    def log_b(self):
        return self.b.bit_length() - 1

    @property
    def m(self):
        """Encoded bits per value"""
        return self.k * self.log_b

    @property
    def slot_len(self):
        return self.m + 2

    @property
    def gadget_len(self):
        return 4 * self.slot_len

    @property
    def block_len(self):
        return self.m * self.gadget_len

    @property
    def alphabet(self):
        return self.b**self.k

    @property
    def heavy_threshold(self):
        return 6 * self.m


def ksum_encode_value(value, params, rng=None, permute=False):
    """Standard gadget encoding of value; permute applies random Klein elements and gadget order"""
    if not 0 <= value < params.alphabet:
        raise CodecError(f"value {value} outside 0..{params.alphabet - 1}")
    m, size = params.m, params.slot_len
    gadgets = np.zeros((m, 4, size), dtype=np.uint8)
    for i in range(1, m + 1):
        bit = (value >> (m - i)) & 1
        weights = (1, 0, 2, i + 2) if bit else (0, 1, 2, i + 2)
        for slot, weight in enumerate(weights):
            gadgets[i - 1, slot] = _filler(weight, size, rng)
    if permute:
        if rng is None:
            raise CodecError("permuted encodings need an rng")
        for i in range(m):
            gadgets[i] = gadgets[i][list(KLEIN[int(rng.integers(4))])]
        gadgets = gadgets[rng.permutation(m)]
    return gadgets.ravel()


def ksum_decode_block(bits, params):
    """Decoded value, or None when the block is not a valid encoding"""
    bits = _bits(bits).ravel()
    if bits.size != params.block_len:
        return None
    m = params.m
    weights = bits.reshape(m, 4, params.slot_len).sum(axis=2)
    value_bits = {}
    for row in weights.tolist():
        heavy = [q for q in range(4) if row[q] >= 3]
        if len(heavy) != 1:
            return None
        index = row[heavy[0]] - 2
        element = next(e for e in KLEIN if e[heavy[0]] == 3)
        standard = [row[element[j]] for j in range(4)]
        if standard[2] != 2 or index > m or index in value_bits:
            return None
        if standard[:2] == [1, 0]:
            value_bits[index] = 1
        elif standard[:2] == [0, 1]:
            value_bits[index] = 0
        else:
            return None
    return sum(bit << (m - i) for i, bit in value_bits.items())
