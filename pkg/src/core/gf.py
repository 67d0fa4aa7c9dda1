"""
Arithmetic in F_{2^e} with log/antilog tables, the coefficient map v and its
dual w, and companion-matrix representations of field elements.

Field elements are plain integers in [0, q) whose bits are the coefficients of
the polynomial basis 1, α, ..., α^{e-1} (bit k is the coefficient of α^k), so
an element's integer value is its v-vector read LSB-first. This is also the
integer representation of the galois package, which handles matrix algebra.
"""
import galois
import numpy as np

from core import common


# Primitive polynomials used when none is given, as bit masks (bit k = x^k)
DEFAULT_POLYNOMIALS = {
    2: 0b111,           # 1 + x + x^2
    3: 0b1011,          # 1 + x + x^3
    4: 0b10011,         # 1 + x + x^4
    5: 0b100101,        # 1 + x^2 + x^5
    6: 0b1000011,       # 1 + x + x^6
    7: 0b10000011,      # 1 + x + x^7
    8: 0b100011101,     # x^8 + x^4 + x^3 + x^2 + 1
}


def poly_from_bits(bits):
    """Convert an LSB-first coefficient sequence or bit string to a bit mask.

    Args:
        bits (str | Sequence[int] | int): Coefficients c_0, c_1, ... or a mask.

    Returns:
        int: The polynomial as a bit mask.
    """
    if isinstance(bits, (int, np.integer)):
        return int(bits)
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits.strip()]
    mask = 0
    for k, coefficient in enumerate(bits):
        if coefficient not in (0, 1):
            raise ValueError(f"polynomial coefficients must be bits: {bits}")
        mask |= coefficient << k
    return mask


def poly_to_bits(mask):
    """Convert a polynomial bit mask to an LSB-first bit string.

    Args:
        mask (int): The polynomial.

    Returns:
        str: Coefficients c_0 ... c_deg.
    """
    return "".join(str((mask >> k) & 1) for k in range(mask.bit_length()))


class FieldContext:
    """The finite field F_q, q = 2^e, defined by a primitive polynomial.

    Instances are immutable after construction and are shared freely between
    codes, decoders and worker processes.
    """

    def __init__(self, e, prim_poly=None):
        """Build the log/antilog and w tables and verify primitivity.

        Args:
            e (int): Extension degree, 2 <= e <= 16.
            prim_poly (int | str | Sequence[int], optional): The polynomial as
                a bit mask or LSB-first coefficients. Defaults to the entry of
                DEFAULT_POLYNOMIALS for e.

        Attributes:
            e (int): Extension degree.
            q (int): Field size.
            prim_poly (int): The polynomial as a bit mask.
            exp_table (ndarray): α^i for i in [0, 2(q-1)), doubled so sums of
                two logs index it directly.
            log_table (ndarray): Discrete logs, -1 at index 0.
            w_table (ndarray): Integer encoding of w(g) for every g.
            w_inverse (ndarray): Inverse of w_table.
        """
        if not 2 <= e <= 16:
            raise ValueError(f"extension degree must be in [2, 16], got {e}")
        if prim_poly is None:
            if e not in DEFAULT_POLYNOMIALS:
                raise ValueError(f"no default primitive polynomial for e={e}")
            prim_poly = DEFAULT_POLYNOMIALS[e]
        prim_poly = poly_from_bits(prim_poly)
        if prim_poly.bit_length() != e + 1 or not prim_poly & 1:
            raise ValueError(
                f"polynomial {poly_to_bits(prim_poly)} must have degree {e} "
                "and constant term 1"
            )

        self.e = e
        self.q = 1 << e
        self.prim_poly = prim_poly

        # Build the antilog table by repeated multiplication by x
        order = self.q - 1
        exp_table = np.zeros(2 * order, dtype=np.int64)
        log_table = np.full(self.q, -1, dtype=np.int64)
        x = 1
        for i in range(order):
            if i > 0 and x == 1:
                raise common.NonPrimitivePolynomial(
                    f"x has order {i} < {order} modulo "
                    f"{poly_to_bits(prim_poly)}"
                )
            exp_table[i] = x
            log_table[x] = i
            x <<= 1
            if x & self.q:
                x ^= prim_poly
        if x != 1:
            raise common.NonPrimitivePolynomial(
                f"{poly_to_bits(prim_poly)} is not primitive"
            )
        exp_table[order:] = exp_table[:order]
        self.exp_table = exp_table
        self.log_table = log_table

        # w(g)_k is bit 0 of g * α^k
        values = np.arange(self.q, dtype=np.int64)
        w_table = np.zeros(self.q, dtype=np.int64)
        for k in range(e):
            shifted = self.mul_array(values, self.exp_table[k])
            w_table |= (shifted & 1) << k
        self.w_table = w_table
        self.w_inverse = np.zeros(self.q, dtype=np.int64)
        self.w_inverse[w_table] = values
        self._galois_field = None

        # Freeze the tables
        for table in (self.exp_table, self.log_table, self.w_table,
                      self.w_inverse):
            table.setflags(write=False)

    def __repr__(self):
        return f"FieldContext(e={self.e}, prim_poly={poly_to_bits(self.prim_poly)})"

    def __eq__(self, other):
        return (isinstance(other, FieldContext) and self.e == other.e
                and self.prim_poly == other.prim_poly)

    def __hash__(self):
        return hash((self.e, self.prim_poly))

    def __reduce__(self):
        return (FieldContext, (self.e, self.prim_poly))

    @property
    def galois_field(self):
        """The galois FieldArray class over the same polynomial."""
        if self._galois_field is None:
            self._galois_field = galois.GF(2 ** self.e, irreducible_poly=self.prim_poly)
        return self._galois_field

    def _check(self, a):
        if not 0 <= a < self.q:
            raise ValueError(f"{a} is not an element of F_{self.q}")

    def alpha_power(self, i):
        """Return α^i for any integer i."""
        return int(self.exp_table[i % (self.q - 1)])

    def log(self, a):
        """Return the discrete log of a nonzero element."""
        if a == 0:
            raise common.DivisionByZero("the zero element has no logarithm")
        return int(self.log_table[a])

    def add(self, a, b):
        """Add two elements (XOR of coefficient bits)."""
        return a ^ b

    def mul(self, a, b):
        """Multiply two elements through the log/antilog tables."""
        if a == 0 or b == 0:
            return 0
        return int(self.exp_table[self.log_table[a] + self.log_table[b]])

    def inv(self, a):
        """Return the multiplicative inverse of a nonzero element."""
        if a == 0:
            raise common.DivisionByZero("the zero element has no inverse")
        return int(self.exp_table[(self.q - 1 - self.log_table[a]) % (self.q - 1)])

    def div(self, a, b):
        """Return a / b."""
        return self.mul(a, self.inv(b))

    def mul_array(self, a, b):
        """Multiply elementwise, broadcasting numpy arrays or scalars.

        Args:
            a (array_like): Field elements.
            b (array_like): Field elements.

        Returns:
            ndarray: The products as int64.
        """
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        product = self.exp_table[self.log_table[a] + self.log_table[b]]
        return np.where((a == 0) | (b == 0), 0, product)

    def inv_array(self, a):
        """Invert elementwise; zero entries raise DivisionByZero."""
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise common.DivisionByZero("the zero element has no inverse")
        return self.exp_table[(self.q - 1 - self.log_table[a]) % (self.q - 1)]

    def v_map(self, g):
        """Return v(g), the coefficient vector (g_0, ..., g_{e-1}).

        Args:
            g (int): A field element.

        Returns:
            ndarray: e bits as uint8.
        """
        self._check(g)
        return ((g >> np.arange(self.e)) & 1).astype(np.uint8)

    def w_map(self, g):
        """Return w(g), the first column of A^T(g).

        Args:
            g (int): A field element.

        Returns:
            ndarray: e bits as uint8.
        """
        self._check(g)
        return ((int(self.w_table[g]) >> np.arange(self.e)) & 1).astype(np.uint8)

    def from_v(self, bits):
        """Return the element whose v-vector is bits."""
        bits = np.asarray(bits, dtype=np.int64)
        return int(np.sum(bits << np.arange(self.e)))

    def from_w(self, bits):
        """Return the element whose w-vector is bits."""
        return int(self.w_inverse[self.from_v(bits)])

    def expand(self, symbols, which="v"):
        """Expand a vector of symbols into its concatenated e-bit segments.

        Args:
            symbols (array_like): N field elements.
            which (str): "v" or "w".

        Returns:
            ndarray: eN bits as uint8.
        """
        symbols = np.asarray(symbols, dtype=np.int64)
        if which == "w":
            symbols = self.w_table[symbols]
        elif which != "v":
            raise ValueError(f"unknown expansion {which!r}")
        bits = (symbols[:, None] >> np.arange(self.e)) & 1
        return bits.reshape(-1).astype(np.uint8)

    def contract(self, bits, which="v"):
        """Invert expand: pack eN bits into N symbols.

        Args:
            bits (array_like): eN bits.
            which (str): "v" or "w".

        Returns:
            ndarray: N field elements.
        """
        bits = np.asarray(bits, dtype=np.int64)
        if bits.size % self.e:
            raise common.DimensionMismatch(
                f"{bits.size} bits do not split into {self.e}-bit segments"
            )
        segments = bits.reshape(-1, self.e)
        symbols = np.sum(segments << np.arange(self.e), axis=1)
        if which == "w":
            symbols = self.w_inverse[symbols]
        elif which != "v":
            raise ValueError(f"unknown expansion {which!r}")
        return symbols

    def companion(self, g):
        """Return A(g), the matrix of multiplication by g on v-vectors.

        Column j is v(g α^j); in particular column j of A(α) is v(α^{j+1})
        and A(0) is the zero matrix.

        Args:
            g (int): A field element.

        Returns:
            ndarray: e×e uint8 matrix.
        """
        self._check(g)
        columns = self.mul_array(g, self.exp_table[:self.e])
        return ((columns[None, :] >> np.arange(self.e)[:, None]) & 1).astype(np.uint8)

    def companion_transpose(self, g):
        """Return A^T(g), which maps w(d) to w(g d)."""
        return self.companion(g).T.copy()


def make_field(e, prim_poly=None):
    """Build a field context.

    Args:
        e (int): Extension degree.
        prim_poly (int | str | Sequence[int], optional): Primitive polynomial.

    Returns:
        FieldContext: The field.
    """
    return FieldContext(e, prim_poly)


def gf_add(field, a, b):
    """Add two elements of field."""
    return field.add(a, b)


def gf_mul(field, a, b):
    """Multiply two elements of field."""
    return field.mul(a, b)


def gf_inv(field, a):
    """Invert a nonzero element of field."""
    return field.inv(a)
