"""
The labeled CSS code: the F_q matrices H_Γ and H_Δ, the action of their binary
images H_X = (A(γ)) and H_Z = (A(δ)^T), the code dimension, membership in the
dual spaces and the JSON code file.

Binary vectors are read through v on the H_X side and through w on the H_Z
side, so H_X v(ξ) = v(H_Γ ξ) and H_Z w(ζ) = w(H_Δ ζ). The row space of H_X is
the w-image of the F_q row space of H_Γ and the row space of H_Z the v-image of
that of H_Δ; dual membership is therefore decided over F_q.
"""
from dataclasses import dataclass
from functools import cached_property
import json
import logging

import numpy as np

from core import common, construct, cycles, gf
from utility import linalg


logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class NbMatrix:
    """Sparse F_q matrix with exactly L nonzeros per row.

    Attributes:
        cols (ndarray): M×L column indices, ascending within each row.
        labels (ndarray): M×L nonzero field elements.
        P (int): Block size.
        J (int): Row blocks.
        L (int): Column blocks.
    """

    def __init__(self, cols, labels, P, J, L):
        self.cols = np.asarray(cols, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.P, self.J, self.L = P, J, L
        if self.cols.shape != (J * P, L) or self.labels.shape != self.cols.shape:
            raise common.InvariantViolation(
                f"expected {J * P}×{L} rows, got {self.cols.shape} / {self.labels.shape}"
            )
        if np.any(self.labels == 0):
            raise common.InvariantViolation("zero label on the support")

    @classmethod
    def from_array(cls, field, array, log_labels):
        """Label the support of a permutation array.

        Row (j, r) takes the top exponent of each of its columns when j = 0
        and the bottom exponent when j = 1.
        """
        N = array.L * array.P
        cols = [array.row_columns(j, r) for j in range(array.J) for r in range(array.P)]
        cols = np.array(cols, dtype=np.int64)
        block = (np.arange(cols.shape[0]) // array.P)[:, None]
        logs = np.asarray(log_labels, dtype=np.int64)[cols + block * N]
        return cls(cols, field.exp_table[logs], array.P, array.J, array.L)

    @property
    def M(self):
        return self.J * self.P

    @property
    def N(self):
        return self.L * self.P

    def entry(self, i, c):
        """Return the label at (i, c), zero off the support."""
        hits = np.flatnonzero(self.cols[i] == c)
        return int(self.labels[i, hits[0]]) if hits.size else 0

    def multiply(self, field, x):
        """Return H x over F_q."""
        x = np.asarray(x, dtype=np.int64)
        if x.size != self.N:
            raise common.DimensionMismatch(f"vector of length {x.size}, matrix has {self.N} columns")
        return np.bitwise_xor.reduce(field.mul_array(self.labels, x[self.cols]), axis=1)

    def dense(self):
        """Return the M×N matrix."""
        matrix = np.zeros((self.M, self.N), dtype=np.int64)
        matrix[np.arange(self.M)[:, None], self.cols] = self.labels
        return matrix

    @cached_property
    def column_rows(self):
        """N×J row indices of every column, in ascending row order."""
        edges = np.argsort(self.cols.reshape(-1), kind="stable")
        rows = (edges // self.L).reshape(self.N, -1)
        return rows

    def log_rows(self, field):
        """Rows as [[column, exponent], ...] lists."""
        logs = field.log_table[self.labels]
        return [[[int(c), int(x)] for c, x in zip(row_cols, row_logs)]
                for row_cols, row_logs in zip(self.cols, logs)]


class CssCode:
    """A complete code: generators, arrays, labels and derived data.

    Derived data (catalogs, dual bases) is computed on first use and cached;
    the code is otherwise immutable and can be shared by trial workers.
    """

    def __init__(self, field, gen, hgamma, hdelta, mode="proposed", seed_info=None):
        """Bundle a labeled code.

        Args:
            field (FieldContext): The field.
            gen (GeneratorPair): The generators.
            hgamma (NbMatrix): H_Γ, support Ĥ_X.
            hdelta (NbMatrix): H_Δ, support Ĥ_Z.
            mode (str): Construction mode.
            seed_info (dict, optional): Provenance.
        """
        self.field = field
        self.gen = gen
        self.hx, self.hz = construct.build_arrays(gen)
        self.hgamma = hgamma
        self.hdelta = hdelta
        self.mode = mode
        self.seed_info = {k: v for k, v in (seed_info or {}).items() if k != "mode"}

    @property
    def P(self):
        return self.gen.P

    @property
    def L(self):
        return self.gen.L

    @property
    def J(self):
        return self.hx.J

    @property
    def N(self):
        return self.L * self.P

    @property
    def M(self):
        return self.J * self.P

    @property
    def n(self):
        return self.field.e * self.N

    @property
    def m(self):
        return self.field.e * self.M

    def selector_array(self, side, j):
        """Row block j of the array whose rows pick the cycles of a side."""
        x_row, z_row = construct.array_rows(self.gen, j)
        if side == "Gamma":
            return construct.PermArray([z_row], self.P)
        if side == "Delta":
            return construct.PermArray([x_row], self.P)
        raise ValueError(f"unknown side {side!r}")

    def matrix(self, side):
        return self.hgamma if side == "Gamma" else self.hdelta

    @cached_property
    def gamma_catalog(self):
        return cycles.utcbc_catalog(self, "Gamma")

    @cached_property
    def delta_catalog(self):
        return cycles.utcbc_catalog(self, "Delta")

    def catalog(self, side):
        return self.gamma_catalog if side == "Gamma" else self.delta_catalog

    @cached_property
    def gamma_index(self):
        return cycles.column_index(self.gamma_catalog, self.N)

    @cached_property
    def delta_index(self):
        return cycles.column_index(self.delta_catalog, self.N)

    def catalog_index(self, side):
        """Column -> catalog record indices for a side."""
        return self.gamma_index if side == "Gamma" else self.delta_index

    @cached_property
    def gamma_rowspace(self):
        return linalg.FqRowBasis(self.field, self.hgamma.dense())

    @cached_property
    def delta_rowspace(self):
        return linalg.FqRowBasis(self.field, self.hdelta.dense())

    @cached_property
    def dimension(self):
        return compute_dimension(self)


def assemble(field, gen, log_gamma, log_delta, mode="proposed", seed_info=None):
    """Build a CssCode from generators and exponent vectors."""
    hx, hz = construct.build_arrays(gen)
    hgamma = NbMatrix.from_array(field, hx, log_gamma)
    hdelta = NbMatrix.from_array(field, hz, log_delta)
    return CssCode(field, gen, hgamma, hdelta, mode, seed_info)


def expand_binary_row_action(code, which, x):
    """Apply H_X (Gamma) or H_Z (Delta) to a binary vector.

    Args:
        code (CssCode): The code.
        which (str): "Gamma" or "Delta".
        x (array_like): eN bits.

    Returns:
        ndarray: eM bits.
    """
    field = code.field
    x = np.asarray(x, dtype=np.uint8)
    if x.size != code.n:
        raise common.DimensionMismatch(f"vector has {x.size} bits, code has n={code.n}")
    expansion = "v" if which == "Gamma" else "w"
    symbols = field.contract(x, expansion)
    return field.expand(code.matrix(which).multiply(field, symbols), expansion)


def to_binary_dense(code):
    """Materialize H_X and H_Z from companion-matrix blocks.

    Only meant for small codes.

    Returns:
        tuple[ndarray, ndarray]: H_X and H_Z, each eM×eN.
    """
    field = code.field
    e = field.e
    blocks = {
        "Gamma": lambda g: field.companion(g),
        "Delta": lambda g: field.companion_transpose(g),
    }
    result = []
    for side in ("Gamma", "Delta"):
        H = code.matrix(side)
        binary = np.zeros((code.m, code.n), dtype=np.uint8)
        for i in range(H.M):
            for c, label in zip(H.cols[i], H.labels[i]):
                binary[i * e:(i + 1) * e, c * e:(c + 1) * e] = blocks[side](int(label))
        result.append(binary)
    return tuple(result)


@dataclass
class OrthogonalityReport:
    """Outcome of verify_orthogonality.

    Attributes:
        ok (bool): True when no violation was found.
        pairs_checked (int): Intersecting (H_Γ row, H_Δ row) pairs.
        violation (tuple[int, int, int] | None): First failing (Γ row, Δ row,
            inner product).
        binary_rows_checked (int): Sampled H_Z rows pushed through H_X.
        binary_violation (int | None): First sampled binary row with a
            nonzero product.
    """

    ok: bool
    pairs_checked: int
    violation: object = None
    binary_rows_checked: int = 0
    binary_violation: object = None


def _binary_delta_row(code, i, k):
    """Row (i, k) of H_Z built from the transposed companion blocks."""
    field = code.field
    e = field.e
    row = np.zeros(code.n, dtype=np.uint8)
    for c, label in zip(code.hdelta.cols[i], code.hdelta.labels[i]):
        row[c * e:(c + 1) * e] = field.companion_transpose(int(label))[k]
    return row


def verify_orthogonality(code, samples=16, rng=None):
    """Check H_Γ H_Δ^T = O and a sample of binary products.

    Args:
        code (CssCode): The code.
        samples (int): Binary H_Z rows to check through H_X.
        rng (numpy.random.Generator | int, optional): Sample selection.

    Returns:
        OrthogonalityReport: The report.
    """
    field = code.field
    hgamma, hdelta = code.hgamma, code.hdelta
    delta_rows = hdelta.column_rows

    # Accumulate γ_ic δ_kc over shared columns c of every intersecting pair
    gamma_i = np.repeat(np.arange(hgamma.M), hgamma.L * hdelta.J)
    shared = np.repeat(hgamma.cols.reshape(-1), hdelta.J)
    delta_k = delta_rows[hgamma.cols.reshape(-1)].reshape(-1)
    gamma_labels = np.repeat(hgamma.labels.reshape(-1), hdelta.J)
    delta_labels = hdelta.labels[delta_k, np.argmax(hdelta.cols[delta_k] == shared[:, None], axis=1)]
    products = field.mul_array(gamma_labels, delta_labels)

    keys = gamma_i * hdelta.M + delta_k
    order = np.argsort(keys, kind="stable")
    keys, products = keys[order], products[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    sums = np.bitwise_xor.reduceat(products, starts)
    report = OrthogonalityReport(ok=True, pairs_checked=int(starts.size))
    bad = np.flatnonzero(sums)
    if bad.size:
        key = int(keys[starts[bad[0]]])
        report.ok = False
        report.violation = (key // hdelta.M, key % hdelta.M, int(sums[bad[0]]))
        return report

    # Push sampled binary rows of H_Z through H_X
    rng = np.random.default_rng(rng)
    count = min(samples, code.m)
    for row in rng.choice(code.m, size=count, replace=False):
        i, k = divmod(int(row), field.e)
        product = expand_binary_row_action(code, "Gamma", _binary_delta_row(code, i, k))
        report.binary_rows_checked += 1
        if product.any():
            report.ok = False
            report.binary_violation = int(row)
            break
    return report


def compute_dimension(code):
    """Return (k, rank H_X, rank H_Z).

    A binary rank is e times the F_q rank of the labeled matrix.
    """
    e = code.field.e
    rank_x = e * code.gamma_rowspace.rank
    rank_z = e * code.delta_rowspace.rank
    return code.n - rank_x - rank_z, rank_x, rank_z


def dual_membership(code, side, vec):
    """Return True iff vec lies in the row space of H_X (side X) or H_Z (side Z)."""
    field = code.field
    vec = np.asarray(vec, dtype=np.uint8)
    if vec.size != code.n:
        raise common.DimensionMismatch(f"vector has {vec.size} bits, code has n={code.n}")
    if side == "X":
        return code.gamma_rowspace.contains(field.contract(vec, "w"))
    if side == "Z":
        return code.delta_rowspace.contains(field.contract(vec, "v"))
    raise ValueError(f"unknown side {side!r}")


def serialize(code):
    """Encode a code as compact, deterministic UTF-8 JSON.

    Returns:
        bytes: The code file contents.
    """
    f, g = code.gen.coefficients()
    document = {
        "version": FORMAT_VERSION,
        "e": code.field.e,
        "prim_poly": gf.poly_to_bits(code.field.prim_poly),
        "P": code.P,
        "J": code.J,
        "L": code.L,
        "f": f,
        "g": g,
        "gamma_rows": code.hgamma.log_rows(code.field),
        "delta_rows": code.hdelta.log_rows(code.field),
        "seed_info": dict(code.seed_info, mode=code.mode),
    }
    return json.dumps(document, separators=(",", ":")).encode("utf-8")


def _rows_to_matrix(field, rows, array, name):
    q = field.q
    try:
        data = np.array(rows, dtype=np.int64)
    except (TypeError, ValueError) as err:
        raise common.FormatError(f"{name} is not a rectangular integer table") from err
    if data.shape != (array.J * array.P, array.L, 2):
        raise common.FormatError(f"{name} has shape {data.shape}")
    cols, logs = data[..., 0], data[..., 1]
    if np.any(logs < 0) or np.any(logs >= q - 1):
        raise common.FormatError(f"{name} has exponents outside [0, {q - 1})")

    expected = np.array([array.row_columns(j, r) for j in range(array.J) for r in range(array.P)])
    if not np.array_equal(cols, expected):
        bad = int(np.flatnonzero(np.any(cols != expected, axis=1))[0])
        raise common.InvariantViolation(f"{name} row {bad} does not match the generator support")
    return NbMatrix(cols, field.exp_table[logs], array.P, array.J, array.L)


def deserialize(data):
    """Decode and re-verify a code file.

    Args:
        data (bytes | str): The code file contents.

    Returns:
        CssCode: The code.

    Raises:
        FormatError: The file is not a well-formed code file.
        InvariantViolation: The code breaks a structural or orthogonality
            invariant.
    """
    try:
        document = json.loads(data)
        version = document["version"]
        e, P, J, L = (int(document[key]) for key in ("e", "P", "J", "L"))
        prim_poly = document["prim_poly"]
        f, g = document["f"], document["g"]
        gamma_rows, delta_rows = document["gamma_rows"], document["delta_rows"]
        seed_info = dict(document.get("seed_info") or {})
    except (ValueError, TypeError, KeyError, UnicodeDecodeError) as err:
        raise common.FormatError(f"unreadable code file: {err}") from err
    if version != FORMAT_VERSION:
        raise common.FormatError(f"unsupported code file version {version}")
    if J != 2 or L % 2 or len(f) != L // 2 or len(g) != L // 2:
        raise common.FormatError(f"inconsistent dimensions J={J}, L={L}")

    try:
        field = gf.make_field(e, prim_poly)
        gen = construct.GeneratorPair.from_coefficients(f, g, P)
    except (ValueError, TypeError, common.NonPrimitivePolynomial) as err:
        raise common.FormatError(f"invalid field or generators: {err}") from err
    try:
        hx, hz = construct.build_arrays(gen)
    except common.RequirementViolation as err:
        raise common.InvariantViolation(str(err)) from err

    hgamma = _rows_to_matrix(field, gamma_rows, hx, "gamma_rows")
    hdelta = _rows_to_matrix(field, delta_rows, hz, "delta_rows")
    mode = seed_info.pop("mode", "proposed")
    code = CssCode(field, gen, hgamma, hdelta, mode, seed_info)

    report = verify_orthogonality(code, samples=0)
    if not report.ok:
        raise common.InvariantViolation(f"H_Γ H_Δ^T != O at {report.violation}")
    return code
