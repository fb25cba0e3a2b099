"""
Boolean Functions

Dense truth tables, the named base functions (AND, OR, PARITY, MAJORITY,
NAND-tree gates, NW, RUB, GSS1, GSS2, k-sum), and the composition and
iteration combinators. Every function evaluates a whole batch of inputs at
once: a (rows, arity) uint8 matrix in, a (rows,) uint8 vector out.

Bit convention: input variable x_{j+1} is bit j (least significant first)
of the row index of a truth table.
"""

from __future__ import annotations

import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import CapExceededError, SpecParseError

MATERIALIZE_CAP = 26
_CHUNK = 1 << 16


def parse_bits(text):
    """Parse a '0'/'1' string (x_1 first) into a uint8 vector"""
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise SpecParseError(f"not a bit string: {text!r}")
    return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")


def format_bits(bits):
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def input_matrix(arity, start=0, stop=None):
    """Rows start..stop-1 of the input enumeration, one bit per column"""
    if stop is None:
        stop = 1 << arity
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(arity, dtype=np.int64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class TruthTable:
    arity: int
    outputs: np.ndarray

    def __post_init__(self):
        if self.arity < 0 or self.arity > MATERIALIZE_CAP:
            raise CapExceededError(
                f"arity {self.arity} outside the dense cap of {MATERIALIZE_CAP}"
            )
        outputs = np.asarray(self.outputs, dtype=np.uint8).ravel()
        if outputs.size != 1 << self.arity:
            raise ValueError(
                f"truth table of arity {self.arity} needs {1 << self.arity} entries, got {outputs.size}"
            )
        if outputs.size and outputs.max() > 1:
            raise ValueError("truth table entries must be 0 or 1")
        object.__setattr__(self, "outputs", outputs)

    def __eq__(self, other):
        if not isinstance(other, TruthTable):
            return NotImplemented
        return self.arity == other.arity and np.array_equal(self.outputs, other.outputs)

    def __len__(self):
        return self.outputs.size

    def value(self, bits):
        bits = np.asarray(bits, dtype=np.int64)
        return int(self.outputs[int((bits << np.arange(bits.size)).sum())])

    def is_constant(self):
        return bool(self.outputs.min() == self.outputs.max())

    def permuted(self, perm):
        """Table of x -> f(y) where y_{perm[j]} = x_j"""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.arity)):
            raise ValueError(f"not a permutation of {self.arity} variables: {perm.tolist()}")
        idx = np.arange(1 << self.arity, dtype=np.int64)
        src = np.zeros_like(idx)
        for j in range(self.arity):
            src |= ((idx >> j) & 1) << perm[j]
        return TruthTable(self.arity, self.outputs[src])

    def to_text(self):
        return f"arity={self.arity}\n" + format_bits(self.outputs) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
        match = re.fullmatch(r"arity=(\d+)", lines[0]) if lines else None
        if match is None:
            raise SpecParseError("truth table text must start with 'arity=<k>'")
        return cls(int(match.group(1)), parse_bits("".join(lines[1:])))


class BooleanFunction(ABC):
    """A total function {0,1}^arity -> {0,1} evaluated in batches."""

    arity: int
    label: str

    @abstractmethod
    def evaluate_batch(self, inputs):
        ...

    def __call__(self, bits):
        return evaluate(self, bits)

    def __repr__(self):
        return f"<{type(self).__name__} {self.label} arity={self.arity}>"


@dataclass(repr=False, eq=False)
class NamedFunction(BooleanFunction):
    name: str
    params: tuple
    arity: int
    rule: object = field(compare=False)

    @property
    def label(self):
        if not self.params:
            return self.name
        return self.name + "".join(f":{p}" for p in self.params)

    def evaluate_batch(self, inputs):
        return np.asarray(self.rule(inputs), dtype=np.uint8)


@dataclass(repr=False, eq=False)
class TableFunction(BooleanFunction):
    table: TruthTable
    label: str = "TABLE"

    @property
    def arity(self):
        return self.table.arity

    def evaluate_batch(self, inputs):
        weights = np.int64(1) << np.arange(self.arity, dtype=np.int64)
        return self.table.outputs[inputs.astype(np.int64) @ weights]


@dataclass(repr=False, eq=False)
class Composition(BooleanFunction):
    outer: BooleanFunction
    inner: BooleanFunction

    @property
    def arity(self):
        return self.outer.arity * self.inner.arity

    @property
    def label(self):
        return f"{self.outer.label} o {self.inner.label}"

    def evaluate_batch(self, inputs):
        rows = inputs.shape[0]
        inner = self.inner.evaluate_batch(inputs.reshape(rows * self.outer.arity, self.inner.arity))
        return self.outer.evaluate_batch(inner.reshape(rows, self.outer.arity))


@dataclass(repr=False, eq=False)
class Iteration(BooleanFunction):
    base: BooleanFunction
    depth: int

    @property
    def arity(self):
        return self.base.arity**self.depth

    @property
    def label(self):
        return f"{self.base.label}^{self.depth}"

    def evaluate_batch(self, inputs):
        rows = inputs.shape[0]
        level = inputs
        for _ in range(self.depth):
            level = self.base.evaluate_batch(level.reshape(-1, self.base.arity))
        return level.reshape(rows)


# --- Named functions ---


def _rub_rule(k):
    def rule(x):
        groups = x.reshape(x.shape[0], k, k)
        pairs = groups[:, :, 0 : 2 * (k // 2) : 2] & groups[:, :, 1 : 2 * (k // 2) : 2]
        inner = (groups.sum(axis=2) == 2) & pairs.any(axis=2)
        return inner.any(axis=1)

    return rule


def _gss1_rule(n):
    root = math.isqrt(n)
    size = 2 * root

    def rule(x):
        groups = x.reshape(x.shape[0], n // size, size).sum(axis=2)
        total = groups.sum(axis=1)
        return (total >= root) & (groups.max(axis=1) == total)

    return rule


def gss2_edges(t):
    """Edges of K_t in input order: (1,2), (1,3), ..., (t-1,t), 0-based"""
    return list(combinations(range(t), 2))


def _gss2_rule(t):
    edges = gss2_edges(t)
    outside = [np.array([v not in e for e in edges]) for v in range(t)]

    def rule(x):
        nonempty = x.any(axis=1)
        star = np.zeros(x.shape[0], dtype=bool)
        for mask in outside:
            star |= ~x[:, mask].any(axis=1)
        return nonempty & star

    return rule


def _ksum_rule(m, width, k):
    modulus = 1 << width
    weights = np.int64(1) << np.arange(width, dtype=np.int64)

    def rule(x):
        values = x.reshape(x.shape[0], m, width).astype(np.int64) @ weights
        hit = np.zeros(x.shape[0], dtype=bool)
        for combo in combinations(range(m), k):
            hit |= values[:, list(combo)].sum(axis=1) % modulus == 0
        return hit

    return rule


def _require(condition, message):
    if not condition:
        raise SpecParseError(message)


def make_named(name, params=()):
    """Build one of the named base functions"""
    name = name.upper()
    params = tuple(int(p) for p in params)

    def arity_param(default=None):
        if not params:
            _require(default is not None, f"{name} needs an arity parameter")
            return default
        _require(len(params) == 1 and params[0] >= 1, f"{name} takes one positive arity")
        return params[0]

    if name in ("AND", "OR", "PARITY", "MAJORITY"):
        n = arity_param()
        rules = {
            "AND": lambda x: x.all(axis=1),
            "OR": lambda x: x.any(axis=1),
            "PARITY": lambda x: x.sum(axis=1) % 2,
            "MAJORITY": lambda x: 2 * x.sum(axis=1, dtype=np.int64) > n,
        }
        return NamedFunction(name, (n,), n, rules[name])
    if name == "NAND":
        _require(not params, "NAND is the 2-bit gate; use NAND^d for trees")
        return NamedFunction(name, (), 2, lambda x: 1 - (x[:, 0] & x[:, 1]))
    if name == "PAPER_XNOR_TREE":
        _require(not params, "PAPER_XNOR_TREE is the 2-bit gate")
        return NamedFunction(name, (), 2, lambda x: x[:, 0] == x[:, 1])
    if name == "NW":
        _require(not params, "NW takes no parameters")
        return NamedFunction(name, (), 3, lambda x: x.any(axis=1) & ~x.all(axis=1))
    if name == "ID":
        _require(not params, "ID takes no parameters")
        return NamedFunction(name, (), 1, lambda x: x[:, 0])
    if name == "CONST":
        _require(len(params) == 2 and params[1] in (0, 1), "CONST needs arity and bit")
        n, bit = params
        return NamedFunction(name, params, n, lambda x: np.full(x.shape[0], bit))
    if name == "RUB":
        _require(len(params) == 1 and params[0] >= 2, "RUB needs k >= 2")
        k = params[0]
        return NamedFunction(name, params, k * k, _rub_rule(k))
    if name == "GSS1":
        _require(len(params) == 1, "GSS1 needs n")
        n = params[0]
        _require(
            n > 0 and n % 2 == 0 and math.isqrt(n) ** 2 == n,
            f"GSS1 needs an even perfect square, got {n}",
        )
        return NamedFunction(name, params, n, _gss1_rule(n))
    if name == "GSS2":
        _require(len(params) == 1 and params[0] >= 2, "GSS2 needs a vertex count t >= 2")
        t = params[0]
        return NamedFunction(name, params, t * (t - 1) // 2, _gss2_rule(t))
    if name == "KSUM":
        _require(len(params) == 3, "KSUM needs m:width:k")
        m, width, k = params
        _require(m >= 1 and width >= 1 and 1 <= k <= m, f"bad KSUM parameters {params}")
        return NamedFunction(name, params, m * width, _ksum_rule(m, width, k))
    raise SpecParseError(f"unknown function name: {name}")


def compose(outer, inner):
    return Composition(outer, inner)


def iterate(f, depth):
    if depth < 1:
        raise ValueError(f"iteration depth must be >= 1, got {depth}")
    if depth == 1:
        return f
    return Iteration(f, depth)


def evaluate(f, bits):
    """Evaluate f on a single input"""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size != f.arity:
        raise ValueError(f"{f.label} takes {f.arity} bits, got {bits.size}")
    return int(f.evaluate_batch(bits[None, :])[0])


def truth_table(f, cap=MATERIALIZE_CAP):
    if f.arity > cap:
        raise CapExceededError(f"{f.label} has arity {f.arity}, over the cap of {cap}")
    total = 1 << f.arity
    outputs = np.empty(total, dtype=np.uint8)
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        outputs[start:stop] = f.evaluate_batch(input_matrix(f.arity, start, stop))
    return TruthTable(f.arity, outputs)


# --- FunctionSpec ---

_TERM = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)((?::\d+)*)(?:\^(\d+))?")


def parse_spec(text):
    """Parse NAME[:params][^d] terms joined by infix 'o' (composition)"""
    terms = [t for t in re.split(r"\s+o\s+", text.strip()) if t]
    if not terms:
        raise SpecParseError("empty function spec")
    functions = []
    for term in terms:
        match = _TERM.fullmatch(term.strip())
        if match is None:
            raise SpecParseError(f"cannot parse term {term!r}")
        name, raw_params, depth = match.groups()
        params = [int(p) for p in raw_params.split(":") if p]
        f = make_named(name, params)
        if depth is not None:
            f = iterate(f, int(depth))
        functions.append(f)
    result = functions[-1]
    for outer in reversed(functions[:-1]):
        result = compose(outer, result)
    return result
