"""
Complexity Measures

Exact deterministic query complexity, sensitivity, block sensitivity,
certificate complexity and degree on dense truth tables, plus spectral
sensitivity by power iteration and approximate degree by linear
programming. Each measure has an arity cap; over it the measure raises
CapExceededError instead of estimating.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, fields
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .config import DEFAULT_CONFIG
from .errors import CapExceededError, ConvergenceError, LinearProgramError

logger = logging.getLogger(__name__)

CAPS = DEFAULT_CONFIG["caps"]
MEASURE_NAMES = ("D", "s", "bs", "C", "deg", "adeg", "lambda")


@dataclass(frozen=True)
class Restriction:
    """Partial assignment: (variable, bit) pairs, variables 0-based"""

    assigned: tuple

    def __post_init__(self):
        pairs = tuple(sorted((int(i), int(b)) for i, b in dict(self.assigned).items()))
        if len(pairs) != len(self.assigned):
            raise ValueError("a restriction assigns each variable at most once")
        if any(b not in (0, 1) or i < 0 for i, b in pairs):
            raise ValueError(f"bad assignment in {pairs}")
        object.__setattr__(self, "assigned", pairs)

    @classmethod
    def of(cls, mapping):
        return cls(tuple(dict(mapping).items()))

    def __len__(self):
        return len(self.assigned)

    def free(self, arity):
        fixed = {i for i, _ in self.assigned}
        return [i for i in range(arity) if i not in fixed]

    def consistent(self, other):
        mine = dict(self.assigned)
        return all(mine.get(i, b) == b for i, b in other.assigned)

    def matches(self, inputs):
        """Boolean mask of the rows of an input matrix that extend this assignment"""
        inputs = np.atleast_2d(inputs)
        mask = np.ones(inputs.shape[0], dtype=bool)
        for i, b in self.assigned:
            mask &= inputs[:, i] == b
        return mask

    def restrict(self, table):
        """Sub-table on the free variables, in increasing variable order"""
        outputs = table.outputs
        for i, b in sorted(self.assigned, reverse=True):
            outputs = outputs.reshape(-1, 2, 1 << i)[:, b, :].ravel()
        return outputs


def _check_cap(table, cap, measure):
    if table.arity > cap:
        raise CapExceededError(
            f"{measure} is capped at arity {cap}, table has arity {table.arity}"
        )


def _popcount(values):
    values = np.asarray(values, dtype=np.int64)
    count = np.zeros(values.shape, dtype=np.int64)
    while np.any(values):
        count += values & 1
        values = values >> 1
    return count


@functools.lru_cache(maxsize=None)
def _masks_by_weight(n):
    masks = np.arange(1 << n, dtype=np.int64)
    weights = _popcount(masks)
    return tuple(masks[weights == k] for k in range(n + 1))


# --- Deterministic query complexity ---


def deterministic_qc(table, cap=CAPS["D"]):
    """Exact minimax decision-tree depth, memoized on restricted sub-tables"""
    _check_cap(table, cap, "D")
    memo = {}

    def solve(sub, m):
        if sub.min() == sub.max():
            return 0
        key = sub.tobytes()
        if key in memo:
            return memo[key]
        best = m
        for i in range(m):
            view = sub.reshape(-1, 2, 1 << i)
            low = view[:, 0, :].ravel()
            high = view[:, 1, :].ravel()
            if np.array_equal(low, high):
                continue
            depth_low = solve(low, m - 1)
            if 1 + depth_low >= best:
                continue
            best = min(best, 1 + max(depth_low, solve(high, m - 1)))
            if best == 1:
                break
        memo[key] = best
        return best

    result = solve(table.outputs, table.arity)
    logger.debug("D search visited %d sub-tables", len(memo))
    return result


# --- Sensitivity family ---


def _sensitive_counts(table):
    outputs = table.outputs
    idx = np.arange(outputs.size, dtype=np.int64)
    counts = np.zeros(outputs.size, dtype=np.int64)
    for i in range(table.arity):
        counts += outputs != outputs[idx ^ (1 << i)]
    return counts


def _split_max(values, outputs):
    zeros = values[outputs == 0]
    ones = values[outputs == 1]
    v0 = int(zeros.max()) if zeros.size else 0
    v1 = int(ones.max()) if ones.size else 0
    return max(v0, v1), v0, v1


def sensitivity(table, cap=CAPS["s"]):
    """Return (s, s0, s1)"""
    _check_cap(table, cap, "s")
    return _split_max(_sensitive_counts(table), table.outputs)


def _minimal_blocks(table, x):
    n = table.arity
    outputs = table.outputs
    fx = outputs[x]
    masks = np.arange(outputs.size, dtype=np.int64)
    dead = np.zeros(outputs.size, dtype=bool)
    blocks = []
    for level in _masks_by_weight(n)[1:]:
        candidates = level[(outputs[level ^ x] != fx) & ~dead[level]]
        for block in candidates.tolist():
            blocks.append(block)
            dead |= (masks & block) == block
    return blocks


def _max_packing(blocks, n):
    blocks = tuple(blocks)

    @functools.lru_cache(maxsize=None)
    def best(available):
        usable = [b for b in blocks if b & available == b]
        if not usable:
            return 0
        union = 0
        for b in usable:
            union |= b
        element = union & -union
        result = best(available & ~element)
        for b in usable:
            if b & element:
                result = max(result, 1 + best(available & ~b))
        return result

    return best((1 << n) - 1)


def block_sensitivity_at(table, x):
    return _max_packing(_minimal_blocks(table, x), table.arity)


def _block_sensitivity_bounds(table):
    """Upper bound on bs(f, x) for every x from blocks of size 1 and 2"""
    n = table.arity
    outputs = table.outputs
    idx = np.arange(outputs.size, dtype=np.int64)
    single = np.stack([outputs != outputs[idx ^ (1 << i)] for i in range(n)], axis=1)
    singles = single.sum(axis=1)
    pair_count = np.zeros(outputs.size, dtype=np.int64)
    touched = np.zeros((outputs.size, n), dtype=bool)
    for i, j in combinations(range(n), 2):
        minimal = (outputs != outputs[idx ^ ((1 << i) | (1 << j))]) & ~single[:, i] & ~single[:, j]
        pair_count += minimal
        touched[:, i] |= minimal
        touched[:, j] |= minimal
    pairs = np.minimum(pair_count, touched.sum(axis=1) // 2)
    return singles + pairs + (n - singles - 2 * pairs) // 3, pairs


def block_sensitivity(table, cap=CAPS["bs"]):
    """Exact bs: minimal sensitive blocks per input, maximum disjoint packing.

    Inputs are visited in decreasing order of a cheap upper bound and the
    scan stops once no remaining bound beats the best packing found.
    """
    _check_cap(table, cap, "bs")
    if table.is_constant():
        return 0
    bounds, pairs = _block_sensitivity_bounds(table)
    order = np.lexsort((-pairs, -bounds))
    best = 0
    visited = 0
    for x in order.tolist():
        if bounds[x] <= best:
            break
        best = max(best, block_sensitivity_at(table, x))
        visited += 1
    logger.debug("bs: exact packing at %d of %d inputs", visited, len(table))
    return best


def certificate_complexity(table, cap=CAPS["C"]):
    """Return (C, C0, C1): smallest fixed set making f constant on x's subcube"""
    _check_cap(table, cap, "C")
    n = table.arity
    outputs = table.outputs
    size = outputs.size
    idx = np.arange(size, dtype=np.int64)
    low = np.empty((size, size), dtype=np.uint8)
    high = np.empty((size, size), dtype=np.uint8)
    low[0] = outputs
    high[0] = outputs
    best_free = np.zeros(size, dtype=np.int64)
    weights = _popcount(idx)
    for free in range(1, size):
        bit = free & -free
        prev = free ^ bit
        low[free] = np.minimum(low[prev], low[prev][idx ^ bit])
        high[free] = np.maximum(high[prev], high[prev][idx ^ bit])
        constant = low[free] == high[free]
        best_free = np.where(constant, np.maximum(best_free, weights[free]), best_free)
    return _split_max(n - best_free, outputs)


# --- Polynomials ---


def multilinear_coefficients(table):
    """Möbius transform: coefficient of prod_{j in S} x_j, indexed by mask S"""
    coeffs = table.outputs.astype(np.int64)
    for i in range(table.arity):
        view = coeffs.reshape(-1, 2, 1 << i)
        view[:, 1, :] -= view[:, 0, :]
    return coeffs


def polynomial_values(coeffs):
    """Zeta transform: evaluate a multilinear polynomial on every input"""
    values = np.array(coeffs, dtype=np.int64)
    n = values.size.bit_length() - 1
    for i in range(n):
        view = values.reshape(-1, 2, 1 << i)
        view[:, 1, :] += view[:, 0, :]
    return values


def degree(table, cap=CAPS["deg"]):
    _check_cap(table, cap, "deg")
    support = np.flatnonzero(multilinear_coefficients(table))
    if support.size == 0:
        return 0
    return int(_popcount(support).max())


def spectral_sensitivity(
    table,
    tol=DEFAULT_CONFIG["measures"]["lambda_tol"],
    max_iter=DEFAULT_CONFIG["measures"]["lambda_max_iter"],
    cap=CAPS["lambda"],
):
    """Largest eigenvalue of the sensitivity graph via power iteration on A + I"""
    _check_cap(table, cap, "lambda")
    outputs = table.outputs
    idx = np.arange(outputs.size, dtype=np.int64)
    neighbours = [idx ^ (1 << i) for i in range(table.arity)]
    edges = [(outputs != outputs[nb]).astype(np.float64) for nb in neighbours]

    def shifted(v):
        out = v.copy()
        for nb, edge in zip(neighbours, edges):
            out += edge * v[nb]
        return out

    v = np.ones(outputs.size) / np.sqrt(outputs.size)
    previous = None
    for iteration in range(max_iter):
        w = shifted(v)
        quotient = float(v @ w)
        norm = np.linalg.norm(w)
        v = w / norm
        if previous is not None and abs(quotient - previous) < tol:
            logger.debug("power iteration converged after %d steps", iteration + 1)
            return max(quotient - 1.0, 0.0)
        previous = quotient
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def approx_degree(
    table,
    eps=DEFAULT_CONFIG["measures"]["adeg_eps"],
    margin=DEFAULT_CONFIG["measures"]["adeg_margin"],
    cap=CAPS["adeg"],
):
    """Smallest d with a degree-d polynomial within eps of f everywhere"""
    _check_cap(table, cap, "adeg")
    n = table.arity
    target = table.outputs.astype(np.float64)
    inputs = np.arange(1 << n, dtype=np.int64)
    levels = _masks_by_weight(n)
    for d in range(n + 1):
        monomials = np.concatenate(levels[: d + 1])
        basis = ((inputs[:, None] & monomials[None, :]) == monomials[None, :]).astype(np.float64)
        k = monomials.size
        slack = -np.ones((inputs.size, 1))
        a_ub = np.vstack([np.hstack([basis, slack]), np.hstack([-basis, slack])])
        b_ub = np.concatenate([target, -target])
        objective = np.zeros(k + 1)
        objective[-1] = 1.0
        result = linprog(
            objective,
            A_ub=a_ub,
            b_ub=b_ub,
            bounds=[(None, None)] * k + [(0, None)],
            method="highs",
        )
        if result.status != 0:
            raise LinearProgramError(d, result.message)
        logger.debug("adeg LP: d=%d best deviation %.6g", d, result.fun)
        if result.fun <= eps + margin:
            return d
    return n


# --- Reports ---


@dataclass
class MeasureReport:
    arity: int
    D: Optional[int] = None
    s: Optional[int] = None
    s0: Optional[int] = None
    s1: Optional[int] = None
    bs: Optional[int] = None
    C: Optional[int] = None
    C0: Optional[int] = None
    C1: Optional[int] = None
    deg: Optional[int] = None
    adeg: Optional[int] = None
    lambda_: Optional[float] = None

    def as_dict(self):
        out = {}
        for f in fields(self):
            key = "lambda" if f.name == "lambda_" else f.name
            out[key] = getattr(self, f.name)
        return out

    def format(self, measures=MEASURE_NAMES):
        parts = []
        values = self.as_dict()
        for name in measures:
            value = values.get(name)
            if value is None:
                continue
            parts.append(f"{name}={value:.6f}" if isinstance(value, float) else f"{name}={value}")
        return " ".join(parts)


def measure_report(table, flags=MEASURE_NAMES, config=None):
    """Compute the requested measures, skipping any whose cap the table exceeds"""
    config = config or DEFAULT_CONFIG
    caps = config["caps"]
    tuning = config["measures"]
    report = MeasureReport(arity=table.arity)
    flags = set(flags)
    unknown = flags - set(MEASURE_NAMES) - {"s0", "s1", "C0", "C1"}
    if unknown:
        raise ValueError(f"unknown measures: {sorted(unknown)}")

    def skipped(name, cap):
        if table.arity > cap:
            logger.info("skipping %s: arity %d over cap %d", name, table.arity, cap)
            return True
        return False

    if "D" in flags and not skipped("D", caps["D"]):
        report.D = deterministic_qc(table, cap=caps["D"])
    if flags & {"s", "s0", "s1"} and not skipped("s", caps["s"]):
        report.s, report.s0, report.s1 = sensitivity(table, cap=caps["s"])
    if "bs" in flags and not skipped("bs", caps["bs"]):
        report.bs = block_sensitivity(table, cap=caps["bs"])
    if flags & {"C", "C0", "C1"} and not skipped("C", caps["C"]):
        report.C, report.C0, report.C1 = certificate_complexity(table, cap=caps["C"])
    if "deg" in flags and not skipped("deg", caps["deg"]):
        report.deg = degree(table, cap=caps["deg"])
    if "adeg" in flags and not skipped("adeg", caps["adeg"]):
        report.adeg = approx_degree(
            table, eps=tuning["adeg_eps"], margin=tuning["adeg_margin"], cap=caps["adeg"]
        )
    if "lambda" in flags and not skipped("lambda", caps["lambda"]):
        report.lambda_ = spectral_sensitivity(
            table, tol=tuning["lambda_tol"], max_iter=tuning["lambda_max_iter"], cap=caps["lambda"]
        )
    return report
