"""
Construction of the permutation arrays and their F_q labels.

The generator pair (f, g) is searched one permutation at a time, the two arrays
follow from it by a fixed index pattern, and the labels are found in the
exponent domain Z_{q-1}, where every orthogonality and full-rank condition on a
length-2L cycle becomes a linear equation in the logs of its labels.
"""
from dataclasses import dataclass
import logging
import math

import numpy as np
import proglog
from scipy import sparse

from core import affine, common, cycles, gf
from core.affine import AffinePerm, PermArray
from utility import linalg


logger = logging.getLogger(__name__)

MODES = ("proposed", "conventional")


@dataclass(frozen=True)
class ConstructionParams:
    """Limits for the randomized construction steps."""

    max_attempts: int = 100000
    label_iterations: int = 10000
    max_restarts: int = 25

    @classmethod
    def from_settings(cls, settings):
        if settings is None:
            return cls()
        section = "construction"
        return cls(
            max_attempts=settings.getint(section, "max_attempts", fallback=100000),
            label_iterations=settings.getint(section, "label_iterations", fallback=10000),
            max_restarts=settings.getint(section, "max_restarts", fallback=25),
        )

    def validate(self):
        if self.max_attempts < 1 or self.label_iterations < 0 or self.max_restarts < 0:
            raise ValueError(f"invalid construction limits: {self}")
        return self


@dataclass(frozen=True)
class GeneratorPair:
    """The sequences f and g of L/2 affine permutations each.

    Entries may be None while the search is still filling positions.
    """

    f: tuple
    g: tuple
    P: int

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(self.f))
        object.__setattr__(self, "g", tuple(self.g))
        if len(self.f) != len(self.g):
            raise ValueError("f and g must have the same length")

    @property
    def L(self):
        return 2 * len(self.f)

    @property
    def complete(self):
        return None not in self.f and None not in self.g

    @classmethod
    def from_coefficients(cls, f, g, P):
        """Build a pair from [(a, b), ...] lists."""
        return cls(tuple(AffinePerm(a, b, P) for a, b in f),
                   tuple(AffinePerm(a, b, P) for a, b in g), P)

    def coefficients(self):
        """Return ([[a, b], ...] for f, [[a, b], ...] for g)."""
        return ([[p.a, p.b] for p in self.f], [[p.a, p.b] for p in self.g])


def _inverse_or_none(f):
    return None if f is None else affine.invert(f)


def array_rows(gen, j):
    """Row j of both arrays, for any j (rows beyond J - 1 are the extended rows).

    Args:
        gen (GeneratorPair): The generators.
        j (int): Row-block index.

    Returns:
        tuple[list, list]: Row j of the X array and of the Z array.
    """
    half = gen.L // 2
    x_row = ([gen.f[(l - j) % half] for l in range(half)]
             + [gen.g[(l - j) % half] for l in range(half)])
    z_row = ([_inverse_or_none(gen.g[(j - l) % half]) for l in range(half)]
             + [_inverse_or_none(gen.f[(j - l) % half]) for l in range(half)])
    return x_row, z_row


def _arrays(gen, rows):
    built = [array_rows(gen, j) for j in rows]
    hx = PermArray([x for x, _ in built], gen.P)
    hz = PermArray([z for _, z in built], gen.P)
    return hx, hz


def build_arrays(gen):
    """Build the two-row arrays Ĥ_X and Ĥ_Z of a generator pair.

    Args:
        gen (GeneratorPair): A complete pair satisfying the commutativity
            requirement.

    Returns:
        tuple[PermArray, PermArray]: Ĥ_X and Ĥ_Z.

    Raises:
        RequirementViolation: Some required (f, g) pair does not commute.
    """
    if not check_requirement1(gen):
        raise common.RequirementViolation(
            f"generators f={list(map(str, gen.f))} g={list(map(str, gen.g))} "
            "violate the commutativity requirement"
        )
    return _arrays(gen, range(2))


def extended_arrays(gen):
    """Single-row arrays holding row block 2 of Ĥ_X and Ĥ_Z."""
    return _arrays(gen, [2])


def check_requirement1(gen, J=2):
    """Check that f_l commutes with g_{j - l} for every l and |j| < J.

    Undefined entries are skipped, so partial pairs can be checked as well.
    """
    half = gen.L // 2
    for l, f in enumerate(gen.f):
        if f is None:
            continue
        for j in range(-(J - 1), J):
            g = gen.g[(j - l) % half]
            if g is not None and not affine.commutes(f, g):
                return False
    return True


def _has_noncommuting_pair(perms):
    return any(not affine.commutes(perms[i], perms[k])
               for i in range(len(perms)) for k in range(i + 1, len(perms)))


def check_incomplete_commutativity(gen):
    """Check that some f pair and some g pair fail to commute.

    A sequence that is not yet complete passes.
    """
    if None not in gen.f and not _has_noncommuting_pair(gen.f):
        return False
    if None not in gen.g and not _has_noncommuting_pair(gen.g):
        return False
    return True


def check_cycle_criterion(gen, max_len=None):
    """Check that no closed block cycle up to max_len exists besides u(j).

    Only cycles through defined blocks of the partial arrays are considered.

    Args:
        gen (GeneratorPair): A complete or partial pair.
        max_len (int, optional): Scan limit. Defaults to 2L.

    Returns:
        bool: True when every closed cycle found is one of the u(j).
    """
    L = gen.L
    max_len = 2 * L if max_len is None else max_len
    hx, hz = _arrays(gen, range(2))
    for n in range(2, max_len // 2 + 1, 2):
        allowed = np.array([], dtype=np.int64)
        if n == L:
            allowed = affine.canonical_keys(
                np.array([affine.utcbc(L, j).columns for j in affine.utcbc_indices(L)]), L)
        for array in (hx, hz):
            closed = affine.closed_cycle_keys(array, n)
            if np.setdiff1d(closed, allowed).size:
                return False
    return True


def _acceptable(gen, mode):
    if not check_requirement1(gen):
        return False
    if mode == "conventional":
        return check_cycle_criterion(gen, max_len=4)
    return check_incomplete_commutativity(gen) and check_cycle_criterion(gen)


def sample_generators(P, L, rng, max_attempts=100000, mode="proposed"):
    """Search a generator pair one permutation at a time.

    Positions are filled in the order f_0, g_0, f_1, g_1, ...; each candidate
    x -> ax + b has a uniform over the units of Z_P and b uniform over Z_P and
    is kept as soon as the partial pair passes every criterion of the mode.

    Args:
        P (int): Block size.
        L (int): Number of column blocks (even).
        rng (numpy.random.Generator | int): Random source or seed.
        max_attempts (int): Candidates tried per position.
        mode (str): "proposed" or "conventional".

    Returns:
        GeneratorPair: The accepted pair.

    Raises:
        SearchExhausted: A position rejected max_attempts candidates.
    """
    if P < 2 or L < 2 or L % 2:
        raise ValueError(f"need P >= 2 and even L >= 2, got P={P}, L={L}")
    if mode not in MODES:
        raise ValueError(f"unknown construction mode {mode!r}")
    rng = np.random.default_rng(rng)
    units = np.array([a for a in range(1, P) if math.gcd(a, P) == 1] or [1])
    half = L // 2
    f = [None] * half
    g = [None] * half

    for i in range(half):
        for target, name in ((f, "f"), (g, "g")):
            for attempt in range(1, max_attempts + 1):
                a = int(units[rng.integers(units.size)])
                b = int(rng.integers(P))
                target[i] = AffinePerm(a, b, P)
                if _acceptable(GeneratorPair(f, g, P), mode):
                    logger.debug("%s_%d = %s accepted after %d attempts",
                                 name, i, target[i], attempt)
                    break
            else:
                raise common.SearchExhausted(
                    f"no acceptable {name}_{i} for P={P} after {max_attempts} attempts"
                )

    gen = GeneratorPair(f, g, P)
    logger.info("Generators accepted: f=%s g=%s", [str(p) for p in gen.f],
                [str(p) for p in gen.g])
    return gen


@dataclass(frozen=True)
class ConstraintSystem:
    """Rows over Z_{q-1} acting on a 2N exponent vector.

    Row i has coefficients coeffs[i] at positions columns[i]; positions below N
    are top-row-block labels, positions N + c bottom-row-block labels of
    column c.

    Attributes:
        columns (ndarray): rows×2L positions.
        coeffs (ndarray): rows×2L entries in {+1, -1}.
        size (int): Length 2N of the exponent vector.
        must_be_zero (bool): Zero system (True) or nonzero system (False).
    """

    columns: np.ndarray
    coeffs: np.ndarray
    size: int
    must_be_zero: bool = True

    @property
    def rows(self):
        return self.columns.shape[0]

    def evaluate(self, log_vector, modulus):
        """Return the row values for an exponent vector."""
        log_vector = np.asarray(log_vector, dtype=np.int64)
        return (self.coeffs * log_vector[self.columns]).sum(axis=1) % modulus

    def matrix(self, modulus):
        """Return the rows as a sparse CSR matrix with entries in Z_modulus."""
        width = self.columns.shape[1]
        matrix = sparse.csr_matrix(
            (self.coeffs.ravel() % modulus, self.columns.ravel(),
             np.arange(0, self.rows * width + 1, width)),
            shape=(self.rows, self.size),
        )
        matrix.sum_duplicates()
        matrix.data %= modulus
        matrix.eliminate_zeros()
        return matrix


def _quarter_system(support, cycle_array, must_be_zero):
    """One row per row of support with the (-, +, +, -) quarter pattern."""
    P, L = cycle_array.P, cycle_array.L
    N = L * P
    half = L // 2
    columns = []
    coeffs = []
    sign = np.array([-1] * half + [1] * half, dtype=np.int64)
    for j in range(support.J):
        for r in range(P):
            K = np.array(support.row_columns(j, r), dtype=np.int64)
            columns.append(np.concatenate([K, N + K]))
            coeffs.append(np.concatenate([sign, -sign]))
    return ConstraintSystem(np.array(columns), np.array(coeffs), 2 * N, must_be_zero)


def build_zero_system(support, cycle_array):
    """Build the zero system for the u(0), u(1) cycles of one side.

    Row (j, r) covers the cycle whose columns are the support of row r of row
    block j of the other array; its value is zero exactly when that cycle's
    submatrix is rank deficient.

    Args:
        support (PermArray): The array whose rows select the cycle columns
            (Ĥ_Z for the Gamma labels, Ĥ_X for the Delta labels).
        cycle_array (PermArray): The array the cycles live in.

    Returns:
        ConstraintSystem: JP rows.
    """
    return _quarter_system(support, cycle_array, must_be_zero=True)


def build_nonzero_system(extended_support, cycle_array):
    """Build the nonzero system for the u(2) cycles of one side.

    Args:
        extended_support (PermArray): Row block 2 of the selecting array.
        cycle_array (PermArray): The array the cycles live in.

    Returns:
        ConstraintSystem: P rows that must all evaluate to nonzero values.
    """
    return _quarter_system(extended_support, cycle_array, must_be_zero=False)


@dataclass(frozen=True)
class FreeBoundMap:
    """Solution map of a zero system over Z_{q-1}.

    Exponent vectors are kernel.basis @ t for free values t. When every prime
    factor of q - 1 pivots on the same columns, t is literally the free part
    of the vector and the bound part follows from it.

    Attributes:
        kernel (ZnKernel): Sparse kernel basis of the system.
    """

    kernel: linalg.ZnKernel

    @property
    def modulus(self):
        return self.kernel.modulus

    @property
    def bound(self):
        return self.kernel.bound

    @property
    def free(self):
        return self.kernel.free

    @property
    def size(self):
        return self.kernel.basis.shape[0]

    @property
    def dimension(self):
        return self.kernel.dimension

    def expand(self, free_values):
        """Return the full exponent vector for a free assignment."""
        free_values = np.asarray(free_values, dtype=np.int64)
        return np.asarray(self.kernel.basis @ free_values, dtype=np.int64) % self.modulus

    def effective(self, system):
        """Return a system rewritten over the free variables, as sparse CSR."""
        matrix = (system.matrix(self.modulus) @ self.kernel.basis).tocsr()
        matrix.data %= self.modulus
        matrix.eliminate_zeros()
        return matrix


def solve_zero_system(system, q):
    """Parametrize the solutions of a zero system.

    Args:
        system (ConstraintSystem): A MustBeZero system.
        q (int): Field size; arithmetic is over Z_{q-1}.

    Returns:
        FreeBoundMap: The solution map.

    Raises:
        NoUnitPivot: Elimination met a row without a unit entry in some
            prime-power factor of q - 1.
    """
    if not system.must_be_zero:
        raise ValueError("only zero systems can be solved for a free/bound split")
    modulus = q - 1
    kernel = linalg.zn_kernel(system.matrix(modulus), modulus)
    if kernel.shared_split:
        logger.debug("Zero system solved: %d bound, %d free",
                     kernel.bound.size, kernel.free.size)
    else:
        logger.debug("Zero system solved: %d free parameters, split differs between "
                     "the factors of %d", kernel.dimension, modulus)
    return FreeBoundMap(kernel)


def _redraw(rng, current, modulus):
    value = int(rng.integers(modulus - 1))
    return value + 1 if value >= current else value


@dataclass
class GammaLabels:
    """A free assignment of the Gamma exponents and its solution map."""

    fbmap: FreeBoundMap
    free_values: np.ndarray

    @property
    def log_gamma(self):
        return self.fbmap.expand(self.free_values)


def label_gamma(hx, hz, fbmap, rng, max_iterations=10000, require_full_rank=True):
    """Draw Gamma exponents satisfying the zero system, then fix the u(2) rows.

    A zero entry of the nonzero system is repaired by redrawing one free
    variable that appears in some zero row; a change is kept only when the
    number of zero entries strictly drops.

    Args:
        hx (PermArray): Ĥ_X.
        hz (PermArray): Ĥ_Z.
        fbmap (FreeBoundMap): Solution map of the Gamma zero system.
        rng (numpy.random.Generator | int): Random source or seed.
        max_iterations (int): Perturbation cap.
        require_full_rank (bool): Skip the nonzero repair when False.

    Returns:
        GammaLabels: The accepted assignment.

    Raises:
        IterationLimitExceeded: The cap was reached with zeros remaining.
    """
    rng = np.random.default_rng(rng)
    modulus = fbmap.modulus
    free_values = rng.integers(modulus, size=fbmap.dimension).astype(np.int64)
    labels = GammaLabels(fbmap, free_values)
    if not require_full_rank:
        return labels

    # Rewrite the u(2) rows over the free variables
    _, hz2 = extended_arrays(_generators_of(hx, hz))
    effective = fbmap.effective(build_nonzero_system(hz2, hx))
    by_column = effective.tocsc()
    values = (effective @ free_values) % modulus
    zeros = int(np.count_nonzero(values == 0))
    logger.debug("Gamma labels drawn with %d zero u(2) rows", zeros)

    iterations = 0
    while zeros:
        if iterations >= max_iterations:
            raise common.IterationLimitExceeded(
                f"{zeros} u(2) rows still rank deficient after {iterations} perturbations"
            )
        iterations += 1

        # Prefer a free variable that appears in a zero row
        involved = np.unique(effective[np.flatnonzero(values == 0)].indices)
        if involved.size == 0:
            involved = np.arange(free_values.size)
        k = int(involved[rng.integers(involved.size)])
        old = int(free_values[k])
        new = _redraw(rng, old, modulus)
        column = by_column[:, [k]].toarray().ravel()
        trial = (values + column * (new - old)) % modulus
        trial_zeros = int(np.count_nonzero(trial == 0))
        if trial_zeros < zeros:
            free_values[k] = new
            values, zeros = trial, trial_zeros

    logger.debug("Gamma labels accepted after %d perturbations", iterations)
    return labels


def _generators_of(hx, hz):
    """Recover the generator pair from row 0 of Ĥ_X."""
    half = hx.L // 2
    return GeneratorPair(hx.grid[0][:half], hx.grid[0][half:], hx.P)


@dataclass(frozen=True)
class CycleWalks:
    """Label positions met along every Gamma-side u(0)/u(1) cycle.

    Attributes:
        columns (ndarray): rows×L column order of each walk.
        enter (ndarray): rows×L exponent positions of the label on which the
            walk enters each cycle row.
        leave (ndarray): rows×L exponent positions of the label on which it
            leaves.
    """

    columns: np.ndarray
    enter: np.ndarray
    leave: np.ndarray


def gamma_cycle_walks(hx, hz):
    """Walk the Gamma-side cycle of every row of Ĥ_Z."""
    N = hx.L * hx.P
    columns, enter, leave = [], [], []
    for j in range(hz.J):
        for r in range(hz.P):
            walk = cycles.walk_cycle(hx, hz.row_columns(j, r))
            positions = [c + (row // hx.P) * N for row, c in walk.entries]
            columns.append(walk.columns)
            enter.append(positions[0::2])
            leave.append(positions[1::2])
    return CycleWalks(np.array(columns), np.array(enter), np.array(leave))


def delta_from_gamma(log_gamma, walks, row_scalars, modulus, N):
    """Null-space labels of every Δ row from the Gamma labels.

    Along a walk the next label is the previous one times γ_in / γ_out, so in
    the exponent domain the labels are cumulative sums; the sum over the whole
    walk is zero exactly when the cycle submatrix is rank deficient.

    Args:
        log_gamma (ndarray): 2N Gamma exponents.
        walks (CycleWalks): Walks for the JP rows of H_Δ.
        row_scalars (ndarray): One exponent offset per row.
        modulus (int): q - 1.
        N (int): Number of columns.

    Returns:
        ndarray: 2N Delta exponents.

    Raises:
        RankAnomaly: A cycle submatrix is of full rank.
    """
    steps = log_gamma[walks.enter] - log_gamma[walks.leave]
    closure = steps.sum(axis=1) % modulus
    if np.any(closure):
        bad = int(np.flatnonzero(closure)[0])
        raise common.RankAnomaly(f"cycle of H_Δ row {bad} has a full-rank submatrix")
    offsets = np.concatenate(
        [np.zeros((steps.shape[0], 1), dtype=np.int64), np.cumsum(steps[:, :-1], axis=1)],
        axis=1,
    )
    logs = (offsets + row_scalars[:, None]) % modulus

    # Row (j, r) holds top labels for j = 0 and bottom labels for j = 1
    P = walks.columns.shape[0] // 2
    block = (np.arange(walks.columns.shape[0]) // P)[:, None]
    log_delta = np.zeros(2 * N, dtype=np.int64)
    log_delta[walks.columns + block * N] = logs
    return log_delta


def label_delta(gamma, hx, hz, rng, max_iterations=10000, require_full_rank=True):
    """Derive the Δ labels and repair the Delta-side u(2) rows.

    Each Δ row is a random nonzero multiple of the null vector of its Gamma
    cycle. While the Delta nonzero system has zeros, one free Gamma variable is
    redrawn and the Δ rows recomputed; the change is kept only when no Gamma
    u(2) row becomes zero and the Delta zero count strictly drops.

    Args:
        gamma (GammaLabels): Output of label_gamma; updated in place.
        hx (PermArray): Ĥ_X.
        hz (PermArray): Ĥ_Z.
        rng (numpy.random.Generator | int): Random source or seed.
        max_iterations (int): Perturbation cap.
        require_full_rank (bool): Skip the nonzero repair when False.

    Returns:
        tuple[ndarray, ndarray]: The Gamma and Delta exponent vectors.

    Raises:
        IterationLimitExceeded: The cap was reached with zeros remaining.
        RankAnomaly: A Gamma cycle has a full-rank submatrix.
    """
    rng = np.random.default_rng(rng)
    fbmap = gamma.fbmap
    modulus = fbmap.modulus
    N = hx.L * hx.P
    walks = gamma_cycle_walks(hx, hz)
    row_scalars = rng.integers(modulus, size=walks.columns.shape[0]).astype(np.int64)

    log_gamma = gamma.log_gamma
    log_delta = delta_from_gamma(log_gamma, walks, row_scalars, modulus, N)
    if not require_full_rank:
        return log_gamma, log_delta

    hx2, hz2 = extended_arrays(_generators_of(hx, hz))
    gamma_system = build_nonzero_system(hz2, hx)
    delta_system = build_nonzero_system(hx2, hz)
    zeros = int(np.count_nonzero(delta_system.evaluate(log_delta, modulus) == 0))
    logger.debug("Delta labels drawn with %d zero u(2) rows", zeros)

    iterations = 0
    free_values = gamma.free_values
    while zeros:
        if iterations >= max_iterations:
            raise common.IterationLimitExceeded(
                f"{zeros} Delta u(2) rows still rank deficient after {iterations} perturbations"
            )
        iterations += 1

        k = int(rng.integers(free_values.size))
        old = int(free_values[k])
        free_values[k] = _redraw(rng, old, modulus)
        trial_gamma = fbmap.expand(free_values)
        trial_delta = delta_from_gamma(trial_gamma, walks, row_scalars, modulus, N)
        gamma_ok = np.all(gamma_system.evaluate(trial_gamma, modulus))
        trial_zeros = int(np.count_nonzero(delta_system.evaluate(trial_delta, modulus) == 0))
        if not gamma_ok or trial_zeros >= zeros:
            free_values[k] = old
            continue
        log_gamma, log_delta, zeros = trial_gamma, trial_delta, trial_zeros

    logger.debug("Delta labels accepted after %d perturbations", iterations)
    return log_gamma, log_delta


def label_code(gen, field, rng, params=None, mode="proposed"):
    """Run the labeling steps for one generator pair.

    Returns:
        tuple[ndarray, ndarray]: Gamma and Delta exponent vectors.
    """
    params = params or ConstructionParams()
    full_rank = mode == "proposed"
    hx, hz = build_arrays(gen)
    fbmap = solve_zero_system(build_zero_system(hz, hx), field.q)
    gamma = label_gamma(hx, hz, fbmap, rng, params.label_iterations, full_rank)
    logger.info("Gamma labels done")
    log_gamma, log_delta = label_delta(gamma, hx, hz, rng, params.label_iterations, full_rank)
    logger.info("Delta labels done")
    return log_gamma, log_delta


def build_code(P, e, L=6, seed=0, mode="proposed", prim_poly=None, gen=None,
               params=None, progress=None):
    """Construct a labeled code, restarting on recoverable failures.

    Each attempt draws from its own stream derived from seed, so a run is
    reproducible. NoUnitPivot, IterationLimitExceeded and RankAnomaly start a
    new attempt (with fresh generators unless gen is given).

    Args:
        P (int): Block size.
        e (int): Extension degree.
        L (int): Number of column blocks.
        seed (int): Master seed.
        mode (str): "proposed" or "conventional".
        prim_poly (int | str, optional): Primitive polynomial.
        gen (GeneratorPair, optional): Fixed generators (e.g. a preset).
        params (ConstructionParams, optional): Limits.
        progress (proglog.ProgressLogger, optional): Progress reporting.

    Returns:
        CssCode: The code.
    """
    from core import code

    if mode not in MODES:
        raise ValueError(f"unknown construction mode {mode!r}")
    params = (params or ConstructionParams()).validate()
    progress = proglog.default_bar_logger(progress)
    field = gf.make_field(e, prim_poly)

    last_error = None
    for attempt in progress.iter_bar(attempt=range(params.max_restarts + 1)):
        attempt_seed = common.derive_seed(seed, attempt)
        rng = np.random.default_rng(attempt_seed)
        try:
            progress(message=f"Attempt {attempt}: generators")
            pair = gen or sample_generators(P, L, rng, params.max_attempts, mode)
            progress(message=f"Attempt {attempt}: labels")
            log_gamma, log_delta = label_code(pair, field, rng, params, mode)
        except (common.NoUnitPivot, common.IterationLimitExceeded,
                common.RankAnomaly) as err:
            logger.warning("Construction attempt %d failed (%s: %s), restarting",
                           attempt, type(err).__name__, err)
            last_error = err
            continue

        seed_info = {"seed": int(seed), "attempt": attempt, "preset": gen is not None}
        result = code.assemble(field, pair, log_gamma, log_delta, mode, seed_info)
        logger.info("Code constructed: n=%d, P=%d, e=%d (attempt %d)",
                    result.n, P, e, attempt)
        return result

    raise last_error
