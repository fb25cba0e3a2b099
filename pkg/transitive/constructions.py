"""
Constructions

The composed transitive functions and their companions:

    F1   ModA1  ∘ DEC96    on an n x n matrix
    F2   ModA2  ∘ DEC112   on an n x n matrix
    F3a  ModA3  ∘ DEC112   two-way, one marked column
    F3b  ModA3* ∘ DEC240   three-way on n x n^2, n marked columns (alias F3)
    F3c  ModA3* ∘ DEC240   three-way on n x n^2, one marked column

plus ENC-k-Sum, ENC-Block-k-Sum and their composition F_QvsC, builders for
certified 1-inputs, unambiguous certificate collections, the desensitized
transform and the instance file format.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Optional

import numpy as np

from .codec import (
    EncodingScheme,
    KSumGadgetParams,
    dec,
    ksum_decode_block,
    ksum_encode_value,
    random_valid_word,
    std_encode_cell,
)
from .config import DEFAULT_CONFIG
from .core import BooleanFunction, compose, input_matrix, make_named, truth_table
from .errors import CertificateError, SchemeError, SpecParseError
from .groups import ConstructionGroup, IndexPermutation
from .measures import Restriction
from .pointerfn import (
    PointerMatrix,
    Tag,
    build_one_instance,
    mod_a1_eval,
    mod_a2_eval,
    mod_a3_eval,
    mod_a3star_eval,
)

logger = logging.getLogger(__name__)

POINTER_CONSTRUCTIONS = {
    # id: (scheme, variant, three_way, default n)
    "F1": ("DEC96", "A1", False, 16),
    "F2": ("DEC112", "A2", False, 16),
    "F3a": ("DEC112", "A3", False, 16),
    "F3b": ("DEC240", "A3", True, 8),
    "F3c": ("DEC240", "A3", True, 8),
}
KSUM_CONSTRUCTIONS = ("ENC_KSUM", "ENC_BLOCK_KSUM", "F_QVSC")
ALIASES = {"F3": "F3b"}
CONSTRUCTION_IDS = tuple(POINTER_CONSTRUCTIONS) + KSUM_CONSTRUCTIONS


@dataclass(frozen=True)
class ConstructionInstance:
    id: str
    n: Optional[int] = None
    k: Optional[int] = None
    b: Optional[int] = None

    def __post_init__(self):
        cid = ALIASES.get(self.id, self.id)
        if cid not in CONSTRUCTION_IDS:
            raise SpecParseError(f"unknown construction {self.id!r}; expected one of {CONSTRUCTION_IDS + tuple(ALIASES)}")
        object.__setattr__(self, "id", cid)
        if self.is_pointer:
            n = POINTER_CONSTRUCTIONS[cid][3] if self.n is None else self.n
            object.__setattr__(self, "n", n)
            if self.k is None:
                object.__setattr__(self, "k", n if cid == "F3b" else 1)
            if cid in ("F1", "F2") and self.k != 1:
                raise SchemeError(f"{cid} has exactly one marked column")
            EncodingScheme(self.scheme_name, n)
        else:
            b = 4 if self.b is None else self.b
            object.__setattr__(self, "b", b)
            if cid == "F_QVSC":
                object.__setattr__(self, "k", b.bit_length() - 1)
            elif self.k is None:
                object.__setattr__(self, "k", 1)
            KSumGadgetParams(b, self.k)

    @property
    def is_pointer(self):
        return self.id in POINTER_CONSTRUCTIONS

    @property
    def scheme_name(self):
        return POINTER_CONSTRUCTIONS[self.id][0]

    @property
    def variant(self):
        return POINTER_CONSTRUCTIONS[self.id][1]

    @property
    def three_way(self):
        return POINTER_CONSTRUCTIONS[self.id][2]

    @functools.cached_property
    def scheme(self):
        if not self.is_pointer:
            raise SchemeError(f"{self.id} is not a pointer construction")
        return EncodingScheme(self.scheme_name, self.n)

    @property
    def shape(self):
        return (self.n, self.n * self.n) if self.three_way else (self.n, self.n)

    @property
    def params(self):
        return KSumGadgetParams(self.b, self.k)

    @property
    def N(self):
        if self.is_pointer:
            m, width = self.shape
            return m * width * self.scheme.cell_len
        enc = self.b * self.params.block_len
        return enc * enc if self.id == "F_QVSC" else enc

    @property
    def label(self):
        if self.is_pointer:
            return f"{self.id}(n={self.n}, k={self.k})"
        return f"{self.id}(b={self.b}, k={self.k})"

    def header(self):
        return {"construction": self.id, "n": self.n, "k": self.k, "b": self.b, "N": self.N}


def construction(cid, n=None, k=None, b=None):
    return ConstructionInstance(cid, n, k, b)


@functools.lru_cache(maxsize=8)
def construction_group(c):
    """The generator group of a pointer construction (G for F1, G1 for F2/F3a, G2 for F3b/F3c)"""
    return ConstructionGroup(c.scheme, c.shape)


# --- Pointer constructions ---


def _check_length(c, x):
    x = np.asarray(x, dtype=np.uint8).ravel()
    if x.size != c.N:
        raise ValueError(f"{c.label} takes {c.N} bits, got {x.size}")
    return x


def decode_input(c, x):
    """Decode every cell: (symbol matrix, tag grid)"""
    x = _check_length(c, x)
    m, width = c.shape
    scheme = c.scheme
    words = x.reshape(m * width, scheme.cell_len)
    cells = np.empty((m, width), dtype=object)
    tags = np.empty((m, width), dtype=object)
    for i, word in enumerate(words):
        symbol = dec(word, scheme).symbol
        cells[divmod(i, width)] = symbol
        tags[divmod(i, width)] = symbol.tag
    return PointerMatrix(cells, scheme.matrix_kind), tags


def _mod_eval(c, matrix, tags):
    if c.id == "F1":
        return mod_a1_eval(matrix, tags)
    if c.id == "F2":
        return mod_a2_eval(matrix, tags)
    if c.id == "F3a":
        return mod_a3_eval(matrix, tags, c.k)
    return mod_a3star_eval(matrix, tags, c.k)


def f_eval(c, x):
    """Value of the composed function on an N-bit input"""
    if c.is_pointer:
        return _mod_eval(c, *decode_input(c, x))
    x = _check_length(c, x)
    if c.id == "ENC_KSUM":
        return enc_ksum_eval(c.params, x)
    if c.id == "ENC_BLOCK_KSUM":
        return enc_block_ksum_eval(c.params, x)
    return f_qvsc_eval(c.b, x)


@dataclass(frozen=True, eq=False)
class EncodedInstance:
    construction: ConstructionInstance
    bits: np.ndarray
    certificate: frozenset  # physical (row, column) cells

    def cell_slice(self, cell):
        r, col = cell
        length = self.construction.scheme.cell_len
        start = (r * self.construction.shape[1] + col) * length
        return slice(start, start + length)


def build_encoded_instance(c, rng=None, tag=Tag.VDASH, permute=True):
    """A certified 1-input; every cell gets a random valid permutation of its standard form"""
    if not c.is_pointer:
        raise SchemeError(f"{c.id} has no pointer-matrix builder; use build_enc_input")
    rng = np.random.default_rng(rng)
    m, width = c.shape
    built = build_one_instance(c.variant, c.n, rng, k=c.k, m=m, width=width, tag=tag, three_way=c.three_way)
    words = []
    for r in range(m):
        for col in range(width):
            symbol = built.matrix.cells[r, col].with_tag(built.tags[r, col])
            word = std_encode_cell(symbol, c.scheme, rng)
            words.append((random_valid_word(word, rng) if permute else word).bits)
    return EncodedInstance(c, np.concatenate(words), built.certificate)


def build_one_input(c, rng=None, tag=Tag.VDASH):
    if c.id == "F_QVSC":
        return build_qvsc_input(c.b, rng)
    if not c.is_pointer:
        return build_enc_input(c.params, rng, heavy=c.id == "ENC_BLOCK_KSUM")
    return build_encoded_instance(c, rng, tag).bits


def random_input(c, rng=None):
    rng = np.random.default_rng(rng)
    return rng.integers(0, 2, size=c.N, dtype=np.uint8)


# --- k-sum ---


def decode_ksum_blocks(params, x, blocks=None):
    """Decoded value (or None) of every block of an ENC-k-Sum input"""
    x = np.asarray(x, dtype=np.uint8).ravel()
    blocks = params.b if blocks is None else blocks
    if x.size != blocks * params.block_len:
        raise ValueError(f"expected {blocks * params.block_len} bits, got {x.size}")
    return [ksum_decode_block(block, params) for block in x.reshape(blocks, params.block_len)]


def _witnesses(values, k, modulus):
    valid = [(i, v) for i, v in enumerate(values) if v is not None]
    for group in combinations(valid, k):
        if sum(v for _, v in group) % modulus == 0:
            yield tuple(i for i, _ in group)


def enc_ksum_eval(params, x):
    """1 iff some k distinct valid blocks have values summing to 0 mod b^k"""
    values = decode_ksum_blocks(params, x)
    return int(next(_witnesses(values, params.k, params.alphabet), None) is not None)


def _block_witness(params, x):
    x = np.asarray(x, dtype=np.uint8).ravel()
    values = decode_ksum_blocks(params, x)
    weights = x.reshape(params.b, params.block_len).sum(axis=1)
    for witness in _witnesses(values, params.k, params.alphabet):
        others = [i for i in range(params.b) if i not in witness]
        if all(weights[i] >= params.heavy_threshold for i in others):
            return witness
    return None


def enc_block_ksum_eval(params, x):
    """ENC-k-Sum with every block outside the witness carrying at least 6·k·log b ones"""
    return int(_block_witness(params, x) is not None)


def enc_block_ksum_certificate(params, x):
    """Witness blocks in full plus the one-positions of every other block, or None on a 0-input"""
    x = np.asarray(x, dtype=np.uint8).ravel()
    witness = _block_witness(params, x)
    if witness is None:
        return None
    size = params.block_len
    assigned = {}
    for i in range(params.b):
        for j in range(i * size, (i + 1) * size):
            if i in witness or x[j]:
                assigned[j] = int(x[j])
    return Restriction.of(assigned)


def _dense_block(params, rng):
    size = params.block_len
    weight = int(rng.integers(params.heavy_threshold, size + 1))
    out = np.zeros(size, dtype=np.uint8)
    out[rng.choice(size, size=weight, replace=False)] = 1
    return out


def build_enc_input(params, rng=None, heavy=False):
    """A 1-input of ENC-k-Sum (heavy=True: of ENC-Block-k-Sum)"""
    rng = np.random.default_rng(rng)
    chosen = rng.choice(params.b, size=params.k, replace=False)
    values = [int(v) for v in rng.integers(params.alphabet, size=params.k - 1)]
    values.append(-sum(values) % params.alphabet)
    blocks = [
        _dense_block(params, rng) if heavy else rng.integers(0, 2, size=params.block_len, dtype=np.uint8)
        for _ in range(params.b)
    ]
    for i, value in zip(chosen, values):
        blocks[int(i)] = ksum_encode_value(value, params, rng, permute=True)
    return np.concatenate(blocks)


class KSumFunction(BooleanFunction):
    """ENC-k-Sum or ENC-Block-k-Sum as a BooleanFunction, for composition"""

    def __init__(self, params, block=False):
        self.params = params
        self.block = block
        self.arity = params.b * params.block_len
        self.label = f"{'ENC_BLOCK_KSUM' if block else 'ENC_KSUM'}:{params.b}:{params.k}"

    def evaluate_batch(self, inputs):
        evaluator = enc_block_ksum_eval if self.block else enc_ksum_eval
        return np.array([evaluator(self.params, row) for row in inputs], dtype=np.uint8)


def qvsc_function(b):
    """ENC-Block-k-Sum ∘ ENC-k-Sum with k = log b"""
    params = KSumGadgetParams(b, b.bit_length() - 1)
    return compose(KSumFunction(params, block=True), KSumFunction(params))


def f_qvsc_eval(b, x):
    return qvsc_function(b)(x)


def build_qvsc_input(b, rng=None, retries=20):
    """Outer 1-input first, then an inner 1-input for each 1 and a checked inner 0-input for each 0"""
    rng = np.random.default_rng(rng)
    params = KSumGadgetParams(b, b.bit_length() - 1)
    outer = build_enc_input(params, rng, heavy=True)
    chunks = []
    for bit in outer:
        if bit:
            chunks.append(build_enc_input(params, rng))
            continue
        for _ in range(retries):
            chunk = rng.integers(0, 2, size=params.b * params.block_len, dtype=np.uint8)
            if not enc_ksum_eval(params, chunk):
                break
        else:
            chunk = np.zeros(params.b * params.block_len, dtype=np.uint8)
        chunks.append(chunk)
    return np.concatenate(chunks)


# --- Unambiguous certificates and desensitization ---


@dataclass(frozen=True)
class CertificateCollection:
    restrictions: tuple

    def __post_init__(self):
        object.__setattr__(self, "restrictions", tuple(
            r if isinstance(r, Restriction) else Restriction.of(r) for r in self.restrictions
        ))

    def __len__(self):
        return len(self.restrictions)

    @property
    def max_size(self):
        return max((len(r) for r in self.restrictions), default=0)

    def index_of(self, inputs):
        """Index of the first restriction each input row extends, -1 for none"""
        inputs = np.atleast_2d(inputs)
        out = np.full(inputs.shape[0], -1, dtype=np.int64)
        for i in reversed(range(len(self.restrictions))):
            out[self.restrictions[i].matches(inputs)] = i
        return out


@dataclass(frozen=True)
class UnambiguityReport:
    forcing: bool
    covering: bool
    disjoint: bool
    detail: str = ""

    @property
    def valid(self):
        return self.forcing and self.covering and self.disjoint


def validate_unambiguous(f, collection, cap=DEFAULT_CONFIG["caps"]["unambiguous"]):
    """Check that every restriction forces 1, that they cover f^-1(1) and that no two are consistent"""
    table = truth_table(f, cap=cap)
    inputs = input_matrix(f.arity)
    ones = table.outputs.astype(bool)
    covered = np.zeros(ones.size, dtype=bool)
    forcing, detail = True, ""
    for i, restriction in enumerate(collection.restrictions):
        if any(v >= f.arity for v, _ in restriction.assigned):
            raise CertificateError(f"restriction {i} names a variable outside 0..{f.arity - 1}")
        mask = restriction.matches(inputs)
        if forcing and not ones[mask].all():
            forcing, detail = False, f"restriction {i} does not force 1"
        covered |= mask
    covering = bool(covered[ones].all())
    if not covering and not detail:
        detail = f"1-input {int(np.flatnonzero(ones & ~covered)[0])} extends no restriction"
    disjoint = True
    for (i, a), (j, b) in combinations(enumerate(collection.restrictions), 2):
        if a.consistent(b):
            disjoint = False
            detail = detail or f"restrictions {i} and {j} are consistent"
            break
    return UnambiguityReport(forcing, covering, disjoint, detail)


class DesensitizedFunction(BooleanFunction):
    """f_DT(x1 x2 x3) = 1 iff f(xi) = 1 for all three copies and they share a certificate"""

    def __init__(self, f, collection):
        self.base = f
        self.collection = collection
        self.arity = 3 * f.arity
        self.label = f"DT({f.label})"

    def evaluate_batch(self, inputs):
        rows, a = inputs.shape[0], self.base.arity
        copies = inputs.reshape(rows * 3, a)
        values = self.base.evaluate_batch(copies).reshape(rows, 3)
        index = self.collection.index_of(copies).reshape(rows, 3)
        same = (index[:, 0] == index[:, 1]) & (index[:, 1] == index[:, 2]) & (index[:, 0] >= 0)
        return (values.all(axis=1) & same).astype(np.uint8)


def desensitize(f, collection):
    report = validate_unambiguous(f, collection)
    if not report.valid:
        raise CertificateError(f"not an unambiguous 1-certificate collection: {report.detail}")
    return DesensitizedFunction(f, collection)


def sensitivity_witness(f, collection, width=None):
    """OR_w ∘ f_DT, w = 3 × the largest certificate in the collection by default"""
    fdt = desensitize(f, collection)
    width = 3 * collection.max_size if width is None else width
    if width < 1:
        raise CertificateError("OR width must be positive")
    return compose(make_named("OR", [width]), fdt)


def desensitized_generators(arity, base_generators=()):
    """Copy swaps generating S_3 and the diagonal action of each base generator"""
    size = 3 * arity
    block = np.arange(arity)
    gens = []
    for a, b in ((0, 1), (1, 2)):
        image = np.arange(size)
        image[a * arity : (a + 1) * arity] = b * arity + block
        image[b * arity : (b + 1) * arity] = a * arity + block
        gens.append(IndexPermutation.from_array(image, f"copy({a}<->{b})"))
    for gen in base_generators:
        base = gen.materialize() if isinstance(gen, IndexPermutation) else np.asarray(gen)
        image = np.concatenate([c * arity + base for c in range(3)])
        gens.append(IndexPermutation.from_array(image, f"diag({getattr(gen, 'label', 'σ')})"))
    return gens


# --- Instance files ---


def save_instance(path, c, bits, seed=None):
    """Packed payload (8 bits per byte, little-endian within a byte) plus a key=value sidecar"""
    path = Path(path)
    bits = _check_length(c, bits)
    path.write_bytes(np.packbits(bits, bitorder="little").tobytes())
    header = dict(c.header(), seed=seed)
    lines = [f"{key}={'' if value is None else value}" for key, value in header.items()]
    Path(f"{path}.header").write_text("\n".join(lines) + "\n")
    logger.info("wrote %s (%d bits)", path, bits.size)


def _read_header(path):
    header = {}
    sidecar = Path(f"{path}.header")
    if not sidecar.exists():
        return header
    for line in sidecar.read_text().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            header[key.strip()] = value.strip()
    return header


def load_instance(path, c=None):
    """Read an instance file; the sidecar supplies the construction when c is None"""
    header = _read_header(path)
    if c is None:
        if "construction" not in header:
            raise SpecParseError(f"{path}.header is missing; pass the construction explicitly")

        def num(key):
            return int(header[key]) if header.get(key) else None

        c = ConstructionInstance(header["construction"], num("n"), num("k"), num("b"))
    payload = np.frombuffer(Path(path).read_bytes(), dtype=np.uint8)
    bits = np.unpackbits(payload, bitorder="little")
    if bits.size < c.N or bits[c.N :].any():
        raise SpecParseError(f"{path} holds {bits.size} bits, {c.label} needs {c.N}")
    return c, bits[: c.N].copy(), header
