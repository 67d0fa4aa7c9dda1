"""
Elimination kernels over F_2 (bit-packed rows), F_q (through the galois
package) and Z_n (sparse rows, one elimination per prime-power factor).
"""
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from core import common


def pack_rows(bits):
    """Pack a 0/1 matrix into little-endian bytes along each row.

    Args:
        bits (array_like): m×n matrix or length-n vector of bits.

    Returns:
        ndarray: uint8 rows of ceil(n/8) bytes.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    return np.packbits(bits, axis=-1, bitorder="little")


def unpack_rows(packed, ncols):
    """Unpack rows produced by pack_rows back to ncols bits."""
    return np.unpackbits(packed, axis=-1, count=ncols, bitorder="little")


class Gf2RowBasis:
    """Row-echelon basis of the row space of a binary matrix.

    Rows are kept bit-packed; membership of a vector in the row space is
    decided by reducing it against the pivots in order.
    """

    def __init__(self, packed, ncols):
        """Run echelon elimination on packed rows.

        Args:
            packed (ndarray): m×ceil(ncols/8) uint8 rows (see pack_rows).
            ncols (int): Number of columns.

        Attributes:
            ncols (int): Number of columns.
            rows (ndarray): The nonzero echelon rows, packed.
            pivots (list[int]): Leading column of each echelon row.
        """
        A = np.array(packed, dtype=np.uint8, copy=True)
        if A.ndim == 1:
            A = A[None, :]
        m = A.shape[0]
        self.ncols = ncols
        self.pivots = []

        r = 0
        for c in range(ncols):
            if r == m:
                break
            byte, bit = c >> 3, c & 7

            # Find a row at or below r with a one in column c
            hits = np.flatnonzero((A[r:, byte] >> bit) & 1)
            if hits.size == 0:
                continue
            p = r + int(hits[0])
            if p != r:
                A[[r, p]] = A[[p, r]]

            # Clear column c below the pivot
            below = r + 1 + np.flatnonzero((A[r + 1:, byte] >> bit) & 1)
            if below.size:
                A[below] ^= A[r]
            self.pivots.append(c)
            r += 1

        self.rows = A[:r].copy()

    @property
    def rank(self):
        return len(self.pivots)

    def reduce(self, vector):
        """Reduce a packed vector against the basis.

        Args:
            vector (ndarray): Packed bits.

        Returns:
            ndarray: The packed residual; zero iff the vector is in the span.
        """
        residual = np.array(vector, dtype=np.uint8, copy=True)
        for row, c in zip(self.rows, self.pivots):
            if (residual[c >> 3] >> (c & 7)) & 1:
                residual ^= row
        return residual

    def contains(self, bits):
        """Return True iff the unpacked bit vector lies in the row space."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size != self.ncols:
            raise common.DimensionMismatch(
                f"vector has {bits.size} bits, basis has {self.ncols} columns"
            )
        return not self.reduce(pack_rows(bits)).any()


def gf2_rank(bits):
    """Rank over F_2 of a dense 0/1 matrix."""
    bits = np.asarray(bits, dtype=np.uint8)
    return Gf2RowBasis(pack_rows(bits), bits.shape[1]).rank


def _pivots(R, ncols):
    """Leading column of each nonzero row of a reduced row echelon form."""
    pivots = []
    for row in R[:, :ncols]:
        hits = np.flatnonzero(row)
        if hits.size == 0:
            break
        pivots.append(int(hits[0]))
    return pivots


def fq_row_reduce(field, A, ncols=None):
    """Gauss-Jordan elimination over F_q.

    Args:
        field (FieldContext): The field.
        A (array_like): m×n matrix of field elements.
        ncols (int, optional): Only the first ncols columns are pivoted on
            (the remainder is an augmented part). Defaults to all columns.

    Returns:
        tuple[ndarray, list[int]]: The reduced matrix and the pivot columns;
        pivot k sits in row k.
    """
    A = field.galois_field(np.asarray(A, dtype=np.int64))
    if A.ndim != 2:
        raise ValueError("expected a matrix")
    ncols = A.shape[1] if ncols is None else ncols
    R = A.row_reduce(ncols=ncols).view(np.ndarray).astype(np.int64)
    return R, _pivots(R, ncols)


def fq_rank(field, A):
    """Rank over F_q."""
    return int(np.linalg.matrix_rank(field.galois_field(np.asarray(A, dtype=np.int64))))


class FqRowBasis:
    """Reduced row-echelon basis of the row space of a matrix over F_q."""

    def __init__(self, field, A):
        """Reduce A once.

        Args:
            field (FieldContext): The field.
            A (array_like): m×n matrix.

        Attributes:
            field (FieldContext): The field.
            ncols (int): Number of columns.
            rows (ndarray): The nonzero reduced rows, leading entries one.
            pivots (ndarray): Leading column of each row.
        """
        R, pivots = fq_row_reduce(field, A)
        self.field = field
        self.ncols = R.shape[1]
        self.rows = R[:len(pivots)].copy()
        self.pivots = np.array(pivots, dtype=np.int64)
        self._reduced = field.galois_field(self.rows)

    @property
    def rank(self):
        return self.pivots.size

    def contains(self, vector):
        """Return True iff vector lies in the row space."""
        vector = np.asarray(vector, dtype=np.int64)
        if vector.size != self.ncols:
            raise common.DimensionMismatch(
                f"vector has {vector.size} entries, basis has {self.ncols} columns"
            )
        if self.rank == 0:
            return not vector.any()

        # Each pivot coefficient is read directly off the vector
        vector = self.field.galois_field(vector)
        residual = vector - vector[self.pivots] @ self._reduced
        return not np.any(residual)


def fq_nullspace(field, A):
    """Basis of the right null space of A over F_q.

    Args:
        field (FieldContext): The field.
        A (array_like): m×n matrix.

    Returns:
        list[ndarray]: n - rank(A) vectors of length n.
    """
    basis = field.galois_field(np.asarray(A, dtype=np.int64)).null_space()
    return [row.view(np.ndarray).astype(np.int64) for row in basis]


def fq_solve(field, A, b):
    """Find one solution of A x = b over F_q.

    Free variables are set to zero.

    Args:
        field (FieldContext): The field.
        A (array_like): m×n matrix.
        b (array_like): Length-m right-hand side.

    Returns:
        ndarray | None: A solution, or None if the system is inconsistent.
    """
    A = np.asarray(A, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    m, n = A.shape
    augmented = np.concatenate([A, b.reshape(m, 1)], axis=1)
    R, pivots = fq_row_reduce(field, augmented, ncols=n)
    if np.any(R[len(pivots):, n]):
        return None
    x = np.zeros(n, dtype=np.int64)
    x[pivots] = R[:len(pivots), n]
    return x


def prime_power_factors(n):
    """Factor n into prime powers.

    Args:
        n (int): A positive integer.

    Returns:
        list[tuple[int, int]]: (p, p^k) pairs in increasing order of p.
    """
    factors = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            power = 1
            while n % p == 0:
                n //= p
                power *= p
            factors.append((p, power))
        p += 1
    if n > 1:
        factors.append((n, n))
    return factors


class _LocalElimination:
    """Gauss-Jordan elimination of sparse rows over Z_{p^k}.

    Rows are dicts column -> coefficient; col_rows tracks which rows hold each
    column so a pivot only touches the rows it has to clear.
    """

    def __init__(self, p, modulus, matrix):
        self.p = p
        self.modulus = modulus
        self.rows = []
        self.col_rows = defaultdict(set)
        self.pivots = []
        for i in range(matrix.shape[0]):
            start, stop = matrix.indptr[i], matrix.indptr[i + 1]
            row = {}
            for c, a in zip(matrix.indices[start:stop], matrix.data[start:stop]):
                a = int(a) % modulus
                if a:
                    row[int(c)] = a
                    self.col_rows[int(c)].add(i)
            self.rows.append(row)

    def units(self, i):
        """Columns of row i whose entry is a unit of Z_{p^k}."""
        return {c for c, a in self.rows[i].items() if a % self.p}

    def pivot(self, i, c):
        """Scale row i to a leading one at c and clear c from every other row."""
        modulus = self.modulus
        row = self.rows[i]
        scale = pow(row[c], -1, modulus)
        for col in row:
            row[col] = row[col] * scale % modulus
        for r in self.col_rows[c] - {i}:
            other = self.rows[r]
            factor = other[c]
            for col, a in row.items():
                value = (other.get(col, 0) - factor * a) % modulus
                if value:
                    other[col] = value
                    self.col_rows[col].add(r)
                elif col in other:
                    del other[col]
                    self.col_rows[col].discard(r)
        self.pivots.append((i, c))

    def kernel(self, v):
        """Free columns and (row, slot, value) entries of the local kernel basis.

        Slot s sets free column s to one; each pivot row then fixes its bound
        column to minus the row's coefficient on that free column.
        """
        bound = {c for _, c in self.pivots}
        free = [c for c in range(v) if c not in bound]
        slot = {c: s for s, c in enumerate(free)}
        entries = [(c, s, 1) for s, c in enumerate(free)]
        for i, c in self.pivots:
            for col, a in self.rows[i].items():
                if col != c:
                    entries.append((c, slot[col], -a % self.modulus))
        return free, entries


@dataclass(frozen=True)
class ZnKernel:
    """Every solution of A x = 0 (mod n) written as x = basis t (mod n).

    Attributes:
        basis (scipy.sparse.csr_matrix): v×d matrix over Z_n.
        modulus (int): n.
        free (ndarray | None): When every prime-power factor pivots on the same
            columns, the free columns, with x[free] = t. None otherwise.
        bound (ndarray | None): The other columns in that case.
    """

    basis: sparse.csr_matrix
    modulus: int
    free: np.ndarray = None
    bound: np.ndarray = None

    @property
    def dimension(self):
        return self.basis.shape[1]

    @property
    def shared_split(self):
        return self.free is not None


def zn_kernel(A, n):
    """Solve A x = 0 (mod n) by elimination in the prime-power rings of Z_n.

    By the Chinese remainder theorem Z_n is the product of the rings
    Z_{p^k}. Each row is eliminated in every factor at once, pivoting on a
    local unit. The lowest column that is a unit in every factor where the row
    is still nonzero is preferred, so that the factors usually end with the
    same free columns. The local kernel bases are then combined into
    one basis over Z_n with the CRT idempotents.

    Args:
        A (array_like | scipy.sparse.spmatrix): m×v integer matrix.
        n (int): The modulus.

    Returns:
        ZnKernel: The kernel basis.

    Raises:
        NoUnitPivot: A residual nonzero row has no unit entry in some factor
            ring (only possible when a prime divides n more than once).
    """
    if n < 2:
        raise ValueError(f"modulus must be at least 2, got {n}")
    matrix = sparse.csr_matrix(A, dtype=np.int64)
    matrix.sum_duplicates()
    m, v = matrix.shape
    factors = prime_power_factors(n)
    states = [_LocalElimination(p, power, matrix) for p, power in factors]

    for i in range(m):
        candidates = []
        for state in states:
            units = state.units(i)
            if state.rows[i] and not units:
                raise common.NoUnitPivot(
                    f"row {i} has no unit entry mod {state.modulus} (modulus {n})"
                )
            candidates.append(units)
        active = [units for units in candidates if units]
        if not active:
            continue

        shared = set.intersection(*active)
        c = min(shared) if shared else None
        for state, units in zip(states, candidates):
            if units:
                state.pivot(i, c if c is not None else min(units))

    # Combine the local bases slot by slot
    kernels = [state.kernel(v) for state in states]
    dimension = max((len(free) for free, _ in kernels), default=v)
    rows, cols, data = [], [], []
    for (_, power), (_, entries) in zip(factors, kernels):
        cofactor = n // power
        idempotent = cofactor * pow(cofactor, -1, power) % n
        for r, s, value in entries:
            rows.append(r)
            cols.append(s)
            data.append(idempotent * value % n)
    basis = sparse.csr_matrix(
        (np.array(data, dtype=np.int64),
         (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(v, dimension),
    )
    basis.data %= n
    basis.eliminate_zeros()

    frees = [free for free, _ in kernels]
    if all(free == frees[0] for free in frees):
        free = np.array(frees[0], dtype=np.int64)
        return ZnKernel(basis, n, free, np.setdiff1d(np.arange(v), free))
    return ZnKernel(basis, n)
