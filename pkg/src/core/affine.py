"""
Affine permutations x -> ax + b over Z_P, permutation arrays built from them,
and block cycles through those arrays.

A permutation f is identified with the P×P binary matrix F whose entry (i, j)
is one iff f(j) = i, so f∘g corresponds to the product FG.
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
import math

import numpy as np

from core import common


@dataclass(frozen=True)
class AffinePerm:
    """The permutation x -> a x + b (mod P); requires gcd(a, P) = 1."""

    a: int
    b: int
    P: int

    def __post_init__(self):
        if self.P < 1:
            raise ValueError(f"modulus must be positive, got {self.P}")
        object.__setattr__(self, "a", int(self.a) % self.P)
        object.__setattr__(self, "b", int(self.b) % self.P)
        object.__setattr__(self, "P", int(self.P))
        if math.gcd(self.a, self.P) != 1:
            raise ValueError(f"{self} is not a permutation: gcd(a, P) != 1")

    def __str__(self):
        return f"{self.a}X+{self.b}"

    def __call__(self, x):
        """Evaluate at an integer or an integer array."""
        return (self.a * x + self.b) % self.P

    @classmethod
    def identity(cls, P):
        return cls(1, 0, P)

    @property
    def is_identity(self):
        return self.a == 1 % self.P and self.b == 0

    def to_matrix(self):
        """Return the dense P×P permutation matrix (entry (f(j), j) is one)."""
        matrix = np.zeros((self.P, self.P), dtype=np.uint8)
        columns = np.arange(self.P)
        matrix[self(columns), columns] = 1
        return matrix


def _check_modulus(f, g):
    if f.P != g.P:
        raise common.ModulusMismatch(f"cannot combine mod {f.P} with mod {g.P}")


def compose(f, g):
    """Return f∘g, i.e. x -> f(g(x)).

    Args:
        f (AffinePerm): Outer map.
        g (AffinePerm): Inner map.

    Returns:
        AffinePerm: The composition.
    """
    _check_modulus(f, g)
    return AffinePerm(f.a * g.a, f.a * g.b + f.b, f.P)


def invert(f):
    """Return the inverse permutation of f."""
    a_inv = pow(f.a, -1, f.P) if f.P > 1 else 0
    return AffinePerm(a_inv, -a_inv * f.b, f.P)


def commutes(f, g):
    """Return True iff f∘g = g∘f.

    The multipliers always commute, so only the offsets have to agree:
    a_f b_g + b_f = a_g b_f + b_g (mod P).
    """
    _check_modulus(f, g)
    return (f.a * g.b + f.b - g.a * f.b - g.b) % f.P == 0


def commuting_lemma_check(f, g):
    """Return whether (f⁻¹, g⁻¹), (f, g⁻¹) and (f⁻¹, g) all commute.

    For a commuting pair (f, g) this always holds.
    """
    f_inv, g_inv = invert(f), invert(g)
    return (commutes(f_inv, g_inv) and commutes(f, g_inv)
            and commutes(f_inv, g))


class CycleClass(Enum):
    """Closure class of a block cycle."""

    OPEN = "Open"
    CLOSED = "Closed"
    TOTALLY_CLOSED = "TotallyClosed"

    @property
    def is_closed(self):
        return self is not CycleClass.OPEN


def classify(f_c):
    """Classify a composite function.

    Args:
        f_c (AffinePerm): The composite function of a block cycle.

    Returns:
        CycleClass: TotallyClosed for the identity, Closed when
        (1 - a) x = b (mod P) is solvable, Open otherwise.
    """
    if f_c.is_identity:
        return CycleClass.TOTALLY_CLOSED
    if f_c.b % math.gcd((1 - f_c.a) % f_c.P, f_c.P) == 0:
        return CycleClass.CLOSED
    return CycleClass.OPEN


def fixed_points(f_c):
    """Return every x in Z_P with f_c(x) = x, ascending."""
    x = np.arange(f_c.P, dtype=np.int64)
    return np.flatnonzero(f_c(x) == x)


class PermArray:
    """A J×L grid of affine permutations over Z_P.

    Entries may be None while an array is being built up one permutation at a
    time; block cycles through a missing entry are skipped by the enumerators.
    """

    def __init__(self, grid, P=None):
        """Create the array.

        Args:
            grid (Sequence[Sequence[AffinePerm | None]]): Rows of blocks.
            P (int, optional): Block size; inferred from the entries if omitted.

        Attributes:
            grid (tuple[tuple[AffinePerm | None, ...], ...]): The blocks.
            J (int): Number of row blocks.
            L (int): Number of column blocks.
            P (int): Block size.
        """
        self.grid = tuple(tuple(row) for row in grid)
        self.J = len(self.grid)
        self.L = len(self.grid[0]) if self.J else 0
        if any(len(row) != self.L for row in self.grid):
            raise ValueError("permutation array rows differ in length")
        present = [f for row in self.grid for f in row if f is not None]
        if P is None:
            if not present:
                raise ValueError("cannot infer P from an empty array")
            P = present[0].P
        if any(f.P != P for f in present):
            raise common.ModulusMismatch("array entries use different moduli")
        self.P = P
        self._coefficients = None

    def __eq__(self, other):
        return isinstance(other, PermArray) and self.grid == other.grid

    def __hash__(self):
        return hash(self.grid)

    def __repr__(self):
        rows = [", ".join(str(f) if f is not None else "-" for f in row)
                for row in self.grid]
        return f"PermArray(P={self.P}, [{' | '.join(rows)}])"

    def __getitem__(self, index):
        j, l = index
        return self.grid[j][l]

    @property
    def complete(self):
        return all(f is not None for row in self.grid for f in row)

    def coefficients(self):
        """Return (a, b, a_inv, b_inv, defined) arrays of shape J×L."""
        if self._coefficients is None:
            shape = (self.J, self.L)
            a = np.ones(shape, dtype=np.int64)
            b = np.zeros(shape, dtype=np.int64)
            a_inv = np.ones(shape, dtype=np.int64)
            b_inv = np.zeros(shape, dtype=np.int64)
            defined = np.zeros(shape, dtype=bool)
            for j, row in enumerate(self.grid):
                for l, f in enumerate(row):
                    if f is None:
                        continue
                    f_inv = invert(f)
                    a[j, l], b[j, l] = f.a, f.b
                    a_inv[j, l], b_inv[j, l] = f_inv.a, f_inv.b
                    defined[j, l] = True
            self._coefficients = (a, b, a_inv, b_inv, defined)
        return self._coefficients

    def row_columns(self, j, r):
        """Global column indices of the ones in row r of row block j."""
        return [l * self.P + invert(f)(r) for l, f in enumerate(self.grid[j])]

    def column_rows(self, c):
        """Global row indices of the ones in global column c."""
        l, local = divmod(c, self.P)
        return [j * self.P + self.grid[j][l](local) for j in range(self.J)]

    def to_binary(self):
        """Return the JP×LP binary matrix."""
        P = self.P
        matrix = np.zeros((self.J * P, self.L * P), dtype=np.uint8)
        for j, row in enumerate(self.grid):
            for l, f in enumerate(row):
                matrix[j * P:(j + 1) * P, l * P:(l + 1) * P] = f.to_matrix()
        return matrix


@dataclass(frozen=True)
class BlockCycle:
    """A block cycle through a two-row permutation array.

    Step i runs along row block (start_row + i) mod 2 from column block
    columns[i] to columns[i + 1] (indices mod n) and then switches rows.
    """

    columns: tuple
    start_row: int = 0

    def __post_init__(self):
        columns = tuple(int(c) for c in self.columns)
        object.__setattr__(self, "columns", columns)
        n = len(columns)
        if n < 2 or n % 2:
            raise common.InvalidCycle(f"a block cycle needs an even number of columns: {columns}")
        if any(columns[i] == columns[(i + 1) % n] for i in range(n)):
            raise common.InvalidCycle(f"adjacent column blocks repeat: {columns}")
        if self.start_row not in (0, 1):
            raise common.InvalidCycle(f"start row must be 0 or 1, got {self.start_row}")

    @property
    def length(self):
        return 2 * len(self.columns)

    def steps(self):
        """Yield (row, column_in, column_out) for each horizontal move."""
        n = len(self.columns)
        for i in range(n):
            yield ((self.start_row + i) % 2, self.columns[i],
                   self.columns[(i + 1) % n])


def composite_function(array, cycle):
    """Compose the permutations met along a block cycle.

    Each horizontal move in row j from column block c to c' applies H[j][c]
    and then the inverse of H[j][c'].

    Args:
        array (PermArray): A two-row array.
        cycle (BlockCycle): The cycle.

    Returns:
        AffinePerm: The composite function f_c.
    """
    if array.J != 2:
        raise common.InvalidCycle("block cycles are defined for two row blocks")
    f_c = AffinePerm.identity(array.P)
    for row, c_in, c_out in cycle.steps():
        if not (0 <= c_in < array.L and 0 <= c_out < array.L):
            raise common.InvalidCycle(f"{cycle} leaves a {array.L}-column array")
        forward, backward = array[row, c_in], array[row, c_out]
        if forward is None or backward is None:
            raise common.InvalidCycle(f"{cycle} crosses an undefined block")
        f_c = compose(invert(backward), compose(forward, f_c))
    return f_c


def utcbc(L, j):
    """The block cycle u(j): columns (l, L/2 + (j - l) mod L/2) for each l."""
    half = L // 2
    columns = []
    for l in range(half):
        columns += [l, half + (j - l) % half]
    return BlockCycle(tuple(columns))


def utcbc_indices(L):
    """Indices j of the unavoidable totally closed block cycles for width L."""
    return tuple(range(min(3, L // 2)))


def visitation_order(L, j):
    """Return the 2×L matrix giving the order in which u(j) visits each block."""
    order = np.full((2, L), -1, dtype=np.int64)
    k = 0
    for row, c_in, c_out in utcbc(L, j).steps():
        order[row, c_in] = k
        order[row, c_out] = k + 1
        k += 2
    return order


@lru_cache(maxsize=None)
def column_sequences(L, n):
    """All column sequences of length n with no equal neighbours (cyclically).

    Returns:
        ndarray: count×n int64, in lexicographic order.
    """
    sequences = np.arange(L, dtype=np.int64)[:, None]
    for _ in range(n - 1):
        count = sequences.shape[0]
        extended = np.concatenate(
            [np.repeat(sequences, L, axis=0),
             np.tile(np.arange(L, dtype=np.int64), count)[:, None]],
            axis=1,
        )
        sequences = extended[extended[:, -1] != extended[:, -2]]
    sequences = sequences[sequences[:, -1] != sequences[:, 0]]
    sequences.setflags(write=False)
    return sequences


def canonical_keys(sequences, L):
    """Canonical integer key of each column sequence.

    The key is the smallest base-L encoding over all even rotations of the
    sequence and of its reflection (c_1, c_0, c_{n-1}, ..., c_2); both
    operations keep the start row and describe the same geometric cycle.
    """
    sequences = np.asarray(sequences, dtype=np.int64)
    if sequences.ndim == 1:
        sequences = sequences[None, :]
    n = sequences.shape[1]
    weights = L ** np.arange(n - 1, -1, -1, dtype=np.int64)
    reflection = sequences[:, (1 - np.arange(n)) % n]
    keys = None
    for variant in (sequences, reflection):
        for shift in range(0, n, 2):
            encoded = np.roll(variant, -shift, axis=1) @ weights
            keys = encoded if keys is None else np.minimum(keys, encoded)
    return keys


def composite_arrays(array, sequences):
    """Vectorized composite functions for many column sequences.

    Args:
        array (PermArray): A two-row array, possibly with undefined entries.
        sequences (ndarray): count×n column sequences.

    Returns:
        tuple[ndarray, ndarray, ndarray]: a, b of each composite and a mask of
        sequences that only cross defined blocks.
    """
    P = array.P
    fa, fb, ia, ib, defined = array.coefficients()
    count, n = sequences.shape
    a = np.ones(count, dtype=np.int64)
    b = np.zeros(count, dtype=np.int64)
    valid = np.ones(count, dtype=bool)
    for i in range(n):
        row = i % 2
        c_in = sequences[:, i]
        c_out = sequences[:, (i + 1) % n]
        valid &= defined[row, c_in] & defined[row, c_out]
        a, b = (fa[row, c_in] * a) % P, (fa[row, c_in] * b + fb[row, c_in]) % P
        a, b = (ia[row, c_out] * a) % P, (ia[row, c_out] * b + ib[row, c_out]) % P
    return a, b, valid


def classify_arrays(a, b, P):
    """Vectorized classify: 2 TotallyClosed, 1 Closed, 0 Open."""
    totally = (a == 1 % P) & (b == 0)
    closed = b % np.gcd((1 - a) % P, P) == 0
    return np.where(totally, 2, np.where(closed, 1, 0))


def closed_cycle_keys(array, n):
    """Canonical keys of closed block cycles with n column steps.

    Args:
        array (PermArray): A two-row array, possibly partial.
        n (int): Number of column entries (cycle length 2n).

    Returns:
        ndarray: Sorted unique canonical keys of the closed cycles.
    """
    sequences = column_sequences(array.L, n)
    a, b, valid = composite_arrays(array, sequences)
    closed = valid & (classify_arrays(a, b, array.P) > 0)
    return np.unique(canonical_keys(sequences[closed], array.L))


_CLASS_BY_CODE = {0: CycleClass.OPEN, 1: CycleClass.CLOSED,
                  2: CycleClass.TOTALLY_CLOSED}


def enumerate_block_cycles(array, max_len):
    """Enumerate block cycles up to a length, one per equivalence class.

    Args:
        array (PermArray): A complete two-row array.
        max_len (int): Maximum cycle length, a multiple of 4.

    Returns:
        list[tuple[BlockCycle, CycleClass]]: Ordered by length, then by the
        canonical column sequence.
    """
    if array.J != 2:
        raise common.InvalidCycle("block cycles are defined for two row blocks")
    if max_len % 4:
        raise ValueError(f"max_len must be a multiple of 4, got {max_len}")
    result = []
    for n in range(2, max_len // 2 + 1, 2):
        sequences = column_sequences(array.L, n)
        keys = canonical_keys(sequences, array.L)
        weights = array.L ** np.arange(n - 1, -1, -1, dtype=np.int64)
        representative = (sequences @ weights) == keys
        sequences = sequences[representative]
        a, b, valid = composite_arrays(array, sequences)
        codes = classify_arrays(a, b, array.P)
        for sequence, code, ok in zip(sequences, codes, valid):
            if ok:
                result.append((BlockCycle(tuple(sequence)), _CLASS_BY_CODE[int(code)]))
    return result


def girth(array_x, array_z, max_len=16):
    """Length of the shortest closed block cycle over both arrays.

    Args:
        array_x (PermArray): First array.
        array_z (PermArray): Second array.
        max_len (int): Scan limit (lengths 4, 8, ..., max_len).

    Returns:
        int | float: The girth, or math.inf when nothing closes within max_len.
    """
    for n in range(2, max_len // 2 + 1, 2):
        for array in (array_x, array_z):
            if closed_cycle_keys(array, n).size:
                return 2 * n
    return math.inf


def distinct_rows_check(array_a, array_b, k, r):
    """Check that a row's support meets distinct rows in every row block.

    Take the support of row r of row block k of array_a; in each row block of
    array_b, the left-half columns of that support must hit L/2 distinct rows,
    and so must the right-half columns.

    Returns:
        bool: True when every half meets L/2 distinct rows.
    """
    half = array_a.L // 2
    columns = array_a.row_columns(k, r)
    for j in range(array_b.J):
        rows = [array_b[j, c // array_b.P](c % array_b.P) for c in columns]
        if len(set(rows[:half])) != half or len(set(rows[half:])) != half:
            return False
    return True
