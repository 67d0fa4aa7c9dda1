"""
Depolarizing noise on eN qubits, its F_q symbol form, syndromes and the hashing
bound.

Each qubit independently suffers X, Z or Y with probability p_D/3 each. The
X-bits of qubit segment j form x_j = w(ξ_j) and the Z-bits z_j = v(ζ_j), so
that H_Z x = w(H_Δ ξ) and H_X z = v(H_Γ ζ).
"""
from dataclasses import dataclass

import numpy as np


# (x, z) bit pair of each error category: none, Z, X, Y
_CATEGORY_BITS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)


@dataclass(frozen=True)
class NoisePair:
    """X-noise symbols ξ (checked by H_Δ) and Z-noise symbols ζ (checked by H_Γ)."""

    xi: np.ndarray
    zeta: np.ndarray


@dataclass(frozen=True)
class SyndromePair:
    """σ = H_Δ ξ and τ = H_Γ ζ."""

    sigma: np.ndarray
    tau: np.ndarray


def _check_probability(p_d):
    if not 0 <= p_d < 0.75:
        raise ValueError(f"depolarizing probability must lie in [0, 3/4), got {p_d}")


def sample_noise(p_d, N, field, rng):
    """Draw depolarizing noise on N symbols of e qubits each.

    Args:
        p_d (float): Depolarizing probability.
        N (int): Number of symbols.
        field (FieldContext): The field (fixes e and the maps v, w).
        rng (numpy.random.Generator | int): Random source or seed.

    Returns:
        NoisePair: The noise symbols.
    """
    _check_probability(p_d)
    rng = np.random.default_rng(rng)
    category = rng.choice(4, size=N * field.e, p=[1 - p_d, p_d / 3, p_d / 3, p_d / 3])
    bits = _CATEGORY_BITS[category]
    xi = field.contract(bits[:, 0], "w")
    zeta = field.contract(bits[:, 1], "v")
    return NoisePair(xi, zeta)


def noise_bits(field, noise):
    """Return the binary (x, z) vectors of a noise pair."""
    return field.expand(noise.xi, "w"), field.expand(noise.zeta, "v")


def syndromes(code, noise):
    """Compute σ = H_Δ ξ and τ = H_Γ ζ over F_q."""
    return SyndromePair(code.hdelta.multiply(code.field, noise.xi),
                        code.hgamma.multiply(code.field, noise.zeta))


def symbol_prior(p_d, field):
    """Joint prior of an (ξ, ζ) symbol pair.

    The probability factors over the e qubits of the symbol, bit k of w(ξ)
    and bit k of v(ζ) being the X and Z components of qubit k.

    Args:
        p_d (float): Depolarizing probability.
        field (FieldContext): The field.

    Returns:
        ndarray: q×q table indexed [ξ, ζ], summing to one.
    """
    _check_probability(p_d)
    e = field.e
    pair = np.array([[1 - p_d, p_d / 3], [p_d / 3, p_d / 3]])
    shifts = np.arange(e)
    x_bits = (field.w_table[:, None] >> shifts) & 1
    z_bits = (np.arange(field.q)[:, None] >> shifts) & 1
    return np.prod(pair[x_bits[:, None, :], z_bits[None, :, :]], axis=2)


def hashing_bound(p_d):
    """Return 1 - H_2(p_D) - p_D log_2(3)."""
    if not 0 <= p_d < 0.75:
        raise ValueError(f"depolarizing probability must lie in [0, 3/4), got {p_d}")
    if p_d == 0:
        return 1.0
    entropy = -p_d * np.log2(p_d) - (1 - p_d) * np.log2(1 - p_d)
    return float(1 - entropy - p_d * np.log2(3))


def hashing_threshold(rate, tol=1e-10):
    """Return the p_D at which the hashing bound equals rate, by bisection.

    Args:
        rate (float): Code rate in (0, 1).
        tol (float): Interval width at which bisection stops.

    Returns:
        float: The threshold.
    """
    if not 0 < rate < 1:
        raise ValueError(f"rate must lie in (0, 1), got {rate}")
    low, high = 0.0, 0.75 - 1e-12
    while high - low > tol:
        middle = (low + high) / 2
        if hashing_bound(middle) > rate:
            low = middle
        else:
            high = middle
    return (low + high) / 2
