"""
Tanner cycles of the labeled matrices: the catalog of cycles inside the
unavoidable totally closed block cycles, rank tests of cycle submatrices and the
minimum-distance upper bound from short-cycle codewords.

Global indices follow the block layout: column [i, b] of block b is bP + i and
row i of row block j is jP + i.
"""
import csv
from collections import Counter
from dataclasses import dataclass, field as dataclass_field
import logging

import numpy as np

from core import affine, common
from utility import linalg


logger = logging.getLogger(__name__)

SIDES = ("Gamma", "Delta")


@dataclass(frozen=True)
class CycleWalk:
    """Node order of one Tanner cycle.

    Attributes:
        columns (tuple[int, ...]): Columns in walk order.
        rows (tuple[int, ...]): rows[t] joins columns[t] and columns[t + 1].
        entries (tuple[tuple[int, int], ...]): (row, column) of every edge:
            entry 2t enters row t, entry 2t + 1 leaves it.
    """

    columns: tuple
    rows: tuple
    entries: tuple


def walk_cycle(cycle_array, K):
    """Walk the cycle formed by one column per block of a two-row array.

    Starting from the left column of block 0, the walk moves right along its
    upper row, down its column, left along the lower row and up again, until
    it is back at the start.

    Args:
        cycle_array (PermArray): Two-row array containing the cycle.
        K (Sequence[int]): L global columns, one per block in block order.

    Returns:
        CycleWalk: The walk.

    Raises:
        RankAnomaly: The columns do not form a single cycle of length 2L.
    """
    P = cycle_array.P
    half = len(K) // 2
    upper = {c: cycle_array[0, c // P](c % P) for c in K}
    lower = {c: P + cycle_array[1, c // P](c % P) for c in K}
    left, right = list(K[:half]), list(K[half:])

    columns, rows, entries = [], [], []
    c = left[0]
    for _ in range(half):
        # Move right along the upper row
        matches = [d for d in right if upper[d] == upper[c]]
        if len(matches) != 1:
            raise common.RankAnomaly(f"upper row {upper[c]} meets {len(matches)} right columns of {list(K)}")
        d = matches[0]
        columns += [c, d]
        rows.append(upper[c])
        entries += [(upper[c], c), (upper[c], d)]

        # Move left along the lower row
        matches = [b for b in left if lower[b] == lower[d]]
        if len(matches) != 1:
            raise common.RankAnomaly(f"lower row {lower[d]} meets {len(matches)} left columns of {list(K)}")
        rows.append(lower[d])
        entries += [(lower[d], d), (lower[d], matches[0])]
        c = matches[0]

    if c != left[0] or len(set(columns)) != len(K):
        raise common.RankAnomaly(f"columns {list(K)} do not form a single cycle")
    return CycleWalk(tuple(columns), tuple(rows), tuple(entries))


def block_cycle_walk(cycle_array, columns, x):
    """Walk the Tanner cycle of a closed block cycle from a fixed point.

    Args:
        cycle_array (PermArray): Two-row array.
        columns (Sequence[int]): Column blocks of the block cycle.
        x (int): Fixed point of the composite, local index in block columns[0].

    Returns:
        CycleWalk | None: The walk, or None when it revisits a node.
    """
    P = cycle_array.P
    n = len(columns)
    walk_columns, rows, entries = [], [], []
    current = x
    for i in range(n):
        row_block = i % 2
        c_in, c_out = columns[i], columns[(i + 1) % n]
        row = row_block * P + cycle_array[row_block, c_in](current)
        following = affine.invert(cycle_array[row_block, c_out])(row % P)
        walk_columns.append(c_in * P + current)
        rows.append(row)
        entries += [(row, c_in * P + current), (row, c_out * P + following)]
        current = following
    if current != x:
        raise common.InvalidCycle(f"{x} is not a fixed point of block cycle {columns}")
    if len(set(walk_columns)) != n or len(set(rows)) != n:
        return None
    return CycleWalk(tuple(walk_columns), tuple(rows), tuple(entries))


@dataclass(frozen=True)
class CycleRecord:
    """A labeled Tanner cycle.

    Attributes:
        side (str): "Gamma" (cycle in H_Γ) or "Delta" (cycle in H_Δ).
        utcbc_j (int | None): Index j of the u(j) it belongs to, if any.
        anchor_row (int | None): Row r of the selecting row block.
        columns (tuple[int, ...]): K(c) in walk order.
        rows (tuple[int, ...]): I(c) in walk order.
        labels (tuple[int, ...]): Field labels of the edges in walk order;
            even positions enter a row, odd positions leave it.
    """

    side: str
    utcbc_j: object
    anchor_row: object
    columns: tuple
    rows: tuple
    labels: tuple

    @property
    def length(self):
        return 2 * len(self.columns)


def _record(side, H, walk, utcbc_j=None, anchor_row=None):
    labels = tuple(H.entry(row, column) for row, column in walk.entries)
    return CycleRecord(side, utcbc_j, anchor_row, walk.columns, walk.rows, labels)


def _side_matrices(code, side):
    if side == "Gamma":
        return code.hx, code.hgamma
    if side == "Delta":
        return code.hz, code.hdelta
    raise ValueError(f"unknown side {side!r}")


def utcbc_catalog(code, side):
    """Build the 3P cycles of the unavoidable totally closed block cycles.

    The cycle (j, r) of the Gamma side lives in H_Γ on the columns of row r
    of row block j of Ĥ_Z; Delta-side cycles swap the roles of the arrays.

    Args:
        code (CssCode): A labeled code with L = 6.
        side (str): "Gamma" or "Delta".

    Returns:
        list[CycleRecord]: Ordered by (j, r).
    """
    cycle_array, H = _side_matrices(code, side)
    records = []
    for j in range(3):
        selector = code.selector_array(side, j)
        for r in range(code.P):
            walk = walk_cycle(cycle_array, selector.row_columns(0, r))
            records.append(_record(side, H, walk, utcbc_j=j, anchor_row=r))
    logger.debug("%s catalog built: %d cycles", side, len(records))
    return records


def column_index(records, N):
    """Map each column to the catalog records that contain it.

    Returns:
        list[list[int]]: For every column, the record indices in catalog order.
    """
    index = [[] for _ in range(N)]
    for k, record in enumerate(records):
        for column in record.columns:
            index[column].append(k)
    return index


def cycle_determinant(field, record):
    """Return Π(entering labels) + Π(leaving labels).

    The value is zero exactly when the cycle submatrix is rank deficient.
    """
    enter = leave = 1
    for label in record.labels[0::2]:
        enter = field.mul(enter, label)
    for label in record.labels[1::2]:
        leave = field.mul(leave, label)
    return field.add(enter, leave)


def cycle_submatrix(record, H):
    """Dense submatrix of H on the rows and columns of a cycle."""
    rows = sorted(record.rows)
    columns = sorted(record.columns)
    return np.array([[H.entry(i, c) for c in columns] for i in rows], dtype=np.int64)


def cycle_nullspace(field, record, H):
    """Null-space basis of a cycle submatrix, indexed by sorted(record.columns).

    Returns:
        list[ndarray]: Empty for a full-rank cycle, one vector otherwise.
    """
    return linalg.fq_nullspace(field, cycle_submatrix(record, H))


def cycle_codeword(field, record):
    """Closed-form null vector of a rank-deficient cycle.

    Along the walk the value on the next column is the current one times
    label_in / label_out, starting from 1.

    Returns:
        ndarray | None: Values aligned with record.columns, or None when the
        cycle is of full rank.
    """
    if cycle_determinant(field, record):
        return None
    values = [1]
    for label_in, label_out in zip(record.labels[0::2], record.labels[1::2]):
        values.append(field.div(field.mul(values[-1], label_in), label_out))
    return np.array(values[:-1], dtype=np.int64)


def tanner_cycles(code, side, n):
    """Tanner cycles of length 2n coming from closed block cycles.

    Every closed block cycle with n column steps contributes one cycle per
    fixed point of its composite; walks that revisit a node are dropped and
    cycles are deduplicated by their node sets.

    Returns:
        list[CycleRecord]: In block-cycle order, then fixed-point order.
    """
    cycle_array, H = _side_matrices(code, side)
    P, L = cycle_array.P, cycle_array.L
    sequences = affine.column_sequences(L, n)
    weights = L ** np.arange(n - 1, -1, -1, dtype=np.int64)
    sequences = sequences[(sequences @ weights) == affine.canonical_keys(sequences, L)]
    a, b, valid = affine.composite_arrays(cycle_array, sequences)
    closed = valid & (affine.classify_arrays(a, b, P) > 0)

    seen = set()
    records = []
    points = np.arange(P, dtype=np.int64)
    for sequence, a_c, b_c in zip(sequences[closed], a[closed], b[closed]):
        for x in np.flatnonzero((a_c * points + b_c) % P == points):
            walk = block_cycle_walk(cycle_array, tuple(int(c) for c in sequence), int(x))
            if walk is None:
                continue
            key = (frozenset(walk.columns), frozenset(walk.rows))
            if key in seen:
                continue
            seen.add(key)
            records.append(_record(side, H, walk))
    return records


def enumerate_length16(code, side):
    """Tanner cycles of length 16 of one side."""
    return tanner_cycles(code, side, 8)


@dataclass
class WeightDistribution:
    """Binary weights of logical codewords found on short cycles.

    Attributes:
        side (str): "X" (null space of H_Γ) or "Z" (null space of H_Δ).
        counts (Counter): weight -> number of codewords.
        deficient_cycles (int): Rank-deficient cycles examined.
        by_length (Counter): cycle length -> logical codewords contributed.
    """

    side: str
    counts: Counter = dataclass_field(default_factory=Counter)
    deficient_cycles: int = 0
    by_length: Counter = dataclass_field(default_factory=Counter)

    @property
    def total(self):
        return sum(self.counts.values())

    @property
    def min_weight(self):
        return min(self.counts) if self.counts else None


@dataclass
class DistanceBound:
    d_x: object
    d_z: object
    weights_x: WeightDistribution
    weights_z: WeightDistribution

    @property
    def d(self):
        bounds = [d for d in (self.d_x, self.d_z) if d is not None]
        return min(bounds) if bounds else None


def _scan_side(code, side, max_len):
    field = code.field
    if side == "Gamma":
        distribution = WeightDistribution("X")
        dual, which = code.delta_rowspace, "v"
    else:
        distribution = WeightDistribution("Z")
        dual, which = code.gamma_rowspace, "w"
    scalars = field.exp_table[:field.q - 1]
    popcount = _popcounts(field, np.arange(field.q), which)

    for n in range(2, max_len // 2 + 1, 2):
        for record in tanner_cycles(code, side, n):
            values = cycle_codeword(field, record)
            if values is None:
                continue
            distribution.deficient_cycles += 1
            codeword = np.zeros(code.N, dtype=np.int64)
            codeword[list(record.columns)] = values
            if dual.contains(codeword):
                continue

            # Every nonzero multiple is a logical codeword as well
            multiples = field.mul_array(scalars[:, None], values[None, :])
            for weight in popcount[multiples].sum(axis=1):
                distribution.counts[int(weight)] += 1
            distribution.by_length[record.length] += scalars.size
    return distribution


def _popcounts(field, symbols, which):
    if which == "w":
        symbols = field.w_table[symbols]
    return np.array([bin(int(s)).count("1") for s in symbols], dtype=np.int64)


def distance_upper_bound(code, max_len=16):
    """Upper-bound the minimum distance from codewords on short cycles.

    Closed block cycles of every length up to max_len are expanded into Tanner
    cycles; each rank-deficient one carries a one-dimensional space of
    codewords which, unless it lies in the dual of the other side, gives q - 1
    logical codewords whose binary weights are recorded.

    Args:
        code (CssCode): The code.
        max_len (int): Longest cycle length scanned, a multiple of 4.

    Returns:
        DistanceBound: Per-side bounds and weight distributions.

    Raises:
        NoDeficientCycles: No logical codeword was found on either side.
    """
    if max_len % 4:
        raise ValueError(f"max_len must be a multiple of 4, got {max_len}")
    weights_x = _scan_side(code, "Gamma", max_len)
    weights_z = _scan_side(code, "Delta", max_len)
    if not weights_x.counts and not weights_z.counts:
        raise common.NoDeficientCycles(
            f"no logical codeword on cycles up to length {max_len} "
            f"({weights_x.deficient_cycles + weights_z.deficient_cycles} deficient cycles)"
        )
    logger.info("Distance bound: d_X <= %s, d_Z <= %s", weights_x.min_weight, weights_z.min_weight)
    return DistanceBound(weights_x.min_weight, weights_z.min_weight, weights_x, weights_z)


def weight_csv(bound, stream):
    """Write the weight distributions as CSV rows (w, A_X, A_Z).

    Args:
        bound (DistanceBound): Output of distance_upper_bound.
        stream (TextIO): Destination.
    """
    writer = csv.writer(stream)
    writer.writerow(["w", "A_X", "A_Z"])
    weights = sorted(set(bound.weights_x.counts) | set(bound.weights_z.counts))
    for w in weights:
        writer.writerow([w, bound.weights_x.counts.get(w, 0), bound.weights_z.counts.get(w, 0)])
