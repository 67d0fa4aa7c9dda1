"""
Joint belief propagation over F_q for the X- and Z-noise symbols, coupled
through the depolarizing prior, with stagnation monitoring and cycle-trap
post-processing.

Side X estimates ξ from σ = H_Δ ξ and side Z estimates ζ from τ = H_Γ ζ. Each
side keeps one length-q message per edge of its Tanner graph. Check nodes
combine messages by XOR convolution, computed with the Walsh-Hadamard
transform over (F_2)^e.
"""
from collections import deque
from dataclasses import dataclass, field as dataclass_field
from enum import Enum
from functools import lru_cache
import logging

import numpy as np

from core import code as code_module
from utility import linalg


logger = logging.getLogger(__name__)

DECODERS = ("bp-post", "bp")

# Decoder side -> (catalog side, matrix attribute)
SIDES = {"X": ("Delta", "hdelta"), "Z": ("Gamma", "hgamma")}


@dataclass(frozen=True)
class DecoderParams:
    """Iteration limits and stagnation settings.

    Attributes:
        max_iters (int): Iteration cap ℓ_max.
        warmup (int): First iteration at which stagnation may fire.
        stagnation_window (int): Iterations K_d must stay unchanged.
        d_window (int): History depth d of K_d and I_d.
        u (int): Maximum number of cycles in an estimated cycle set.
        floor (float): Lower clip applied before each normalization.
        post_processing (bool): Run cycle-trap post-processing ("bp-post").
    """

    max_iters: int = 200
    warmup: int = 20
    stagnation_window: int = 4
    d_window: int = 8
    u: int = 2
    floor: float = 1e-30
    post_processing: bool = True

    @classmethod
    def from_settings(cls, settings):
        if settings is None:
            return cls()
        section = "decoder"
        return cls(
            max_iters=settings.getint(section, "max_iters", fallback=200),
            warmup=settings.getint(section, "warmup", fallback=20),
            stagnation_window=settings.getint(section, "stagnation_window", fallback=4),
            d_window=settings.getint(section, "d_window", fallback=8),
            u=settings.getint(section, "u", fallback=2),
            floor=settings.getfloat(section, "floor", fallback=1e-30),
            post_processing=settings.getboolean(section, "post_processing", fallback=True),
        )

    @property
    def decoder(self):
        return "bp-post" if self.post_processing else "bp"

    def validate(self):
        if self.max_iters < 1 or self.warmup < 0 or self.stagnation_window < 1:
            raise ValueError(f"invalid iteration limits: {self}")
        if self.d_window < 0 or self.u < 1:
            raise ValueError(f"invalid stagnation settings: {self}")
        if not 0 < self.floor < 1e-6:
            raise ValueError(f"message floor must lie in (0, 1e-6), got {self.floor}")
        return self


class OutcomeKind(Enum):
    CONVERGED = "converged"
    POST_PROCESSED = "post_processed"
    DETECTED_FAILURE = "detected_failure"


class FailureReason(Enum):
    CYCLE_ESTIMATION_NULL = "CycleEstimationNull"
    NO_SOLUTION = "NoSolution"
    LENGTH_2LPLUS4_TRAP = "Length2Lplus4Trap"
    ITERATION_LIMIT = "IterationLimit"


class Verdict(Enum):
    """Evaluation tag of a decoded trial against the true noise."""

    EXACT = "exact"
    DEGENERATE = "degenerate"
    LOGICAL_ERROR = "logical_error"
    DETECTED_FAILURE = "detected_failure"


@dataclass
class DecodeOutcome:
    """Result of one decoding run.

    Attributes:
        kind (OutcomeKind): How the run ended.
        xi (ndarray): Final ξ̂.
        zeta (ndarray): Final ζ̂.
        iterations (int): Iteration ℓ at which the run ended.
        reason (FailureReason | None): Set for detected failures.
        cycles_used (dict): Catalog indices used per repaired side.
        events (list[dict]): One entry per stagnation event.
    """

    kind: OutcomeKind
    xi: np.ndarray
    zeta: np.ndarray
    iterations: int
    reason: object = None
    cycles_used: dict = dataclass_field(default_factory=dict)
    events: list = dataclass_field(default_factory=list)

    @property
    def success(self):
        return self.kind is not OutcomeKind.DETECTED_FAILURE


@dataclass
class HistoryMetrics:
    k_d: frozenset
    i_d: frozenset
    k_err: object = None
    i_err: object = None


@dataclass
class SideState:
    """Messages, estimate and history of one side.

    Message arrays are indexed by edge e = i·L + t of the side matrix, t being
    the position of the column within row i.
    """

    name: str
    H: object
    syndrome: np.ndarray
    tables: object
    gather_out: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    kappa: np.ndarray
    estimate: np.ndarray
    mismatch: frozenset
    estimates: deque
    changes: deque
    mismatches: deque
    recent_k_d: deque
    attempted: set = dataclass_field(default_factory=set)
    repaired: bool = False
    cycles_used: tuple = ()

    @property
    def satisfied(self):
        return not self.mismatch


@dataclass
class DecoderState:
    code: object
    prior: np.ndarray
    params: DecoderParams
    sides: dict
    iteration: int = 0


@dataclass(frozen=True)
class EdgeTables:
    """Syndrome-independent index tables of a side matrix.

    Attributes:
        var (ndarray): Column of every edge.
        labels (ndarray): Label of every edge.
        var_edges (ndarray): N×J edges of every column.
        gather_in (ndarray): E×q, gather_in[e, y] = δ_e⁻¹·y.
        scaled (ndarray): E×q, scaled[e, ξ] = δ_e·ξ.
    """

    var: np.ndarray
    labels: np.ndarray
    var_edges: np.ndarray
    gather_in: np.ndarray
    scaled: np.ndarray


@lru_cache(maxsize=8)
def _edge_tables(code, side):
    field = code.field
    H = getattr(code, SIDES[side][1])
    var = H.cols.reshape(-1)
    labels = H.labels.reshape(-1)
    var_edges = np.argsort(var, kind="stable").reshape(H.N, -1)
    symbols = np.arange(field.q)[None, :]
    gather_in = field.mul_array(field.inv_array(labels)[:, None], symbols)
    scaled = field.mul_array(labels[:, None], symbols)
    return EdgeTables(var, labels, var_edges, gather_in, scaled)


def walsh_hadamard(values):
    """Unnormalized Walsh-Hadamard transform along the last axis.

    Applying it twice multiplies by q, and it turns XOR convolution into a
    pointwise product.

    Args:
        values (array_like): Arrays whose last axis has length q = 2^e.

    Returns:
        ndarray: The transformed values.
    """
    values = np.asarray(values, dtype=np.float64)
    shape = values.shape
    q = shape[-1]
    if q & (q - 1):
        raise ValueError(f"transform length must be a power of two, got {q}")
    h = 1
    while h < q:
        pairs = values.reshape(*shape[:-1], q // (2 * h), 2, h)
        low, high = pairs[..., 0, :], pairs[..., 1, :]
        values = np.stack([low + high, low - high], axis=-2).reshape(shape)
        h *= 2
    return values


def _normalize(values, floor):
    values = np.maximum(values, floor)
    return values / values.sum(axis=-1, keepdims=True)


def _leave_one_out(factors):
    """Products over axis 1 of all factors but one, without division."""
    prefix = np.ones_like(factors)
    suffix = np.ones_like(factors)
    prefix[:, 1:] = np.cumprod(factors[:, :-1], axis=1)
    suffix[:, :-1] = np.cumprod(factors[:, ::-1], axis=1)[:, :-1][:, ::-1]
    return prefix * suffix


def _mismatch(side_state, field, estimate):
    computed = side_state.H.multiply(field, estimate)
    return frozenset(np.flatnonzero(computed != side_state.syndrome).tolist())


def bp_init(code, syndromes, prior, params=None):
    """Create the decoder state at ℓ = 0.

    λ and ν start uniform; κ is the coupled prior of the uniform λ, i.e. the
    prior marginal.

    Args:
        code (CssCode): The code.
        syndromes (SyndromePair): σ and τ.
        prior (ndarray): q×q joint prior indexed [ξ, ζ].
        params (DecoderParams, optional): Settings.

    Returns:
        DecoderState: The state, with ℓ = 0 estimates computed.
    """
    params = params or DecoderParams()
    field = code.field
    q = field.q
    prior = np.asarray(prior, dtype=np.float64)
    if prior.shape != (q, q):
        raise ValueError(f"prior must be {q}×{q}, got {prior.shape}")
    sides = {}
    for side, syndrome in (("X", syndromes.sigma), ("Z", syndromes.tau)):
        tables = _edge_tables(code, side)
        H = getattr(code, SIDES[side][1])
        syndrome = np.asarray(syndrome, dtype=np.int64)
        if syndrome.size != H.M:
            raise ValueError(f"syndrome of side {side} has {syndrome.size} entries, expected {H.M}")

        # Create the syndrome-dependent gather table: σ_i + δ_e·ξ
        rows = np.arange(H.M).repeat(H.L)
        gather_out = syndrome[rows][:, None] ^ tables.scaled

        E = tables.var.size
        sides[side] = SideState(
            name=side, H=H, syndrome=syndrome, tables=tables, gather_out=gather_out,
            mu=np.full((E, q), 1 / q), nu=np.full((E, q), 1 / q),
            lam=np.full((H.N, q), 1 / q), kappa=np.full((H.N, q), 1 / q),
            estimate=np.zeros(H.N, dtype=np.int64), mismatch=frozenset(),
            estimates=deque(maxlen=params.d_window + 2),
            changes=deque(maxlen=params.d_window + 1),
            mismatches=deque(maxlen=params.d_window + 1),
            recent_k_d=deque(maxlen=params.stagnation_window),
        )
    state = DecoderState(code, prior, params, sides)
    variable_coupling_update(state)
    estimate(state)
    return state


def variable_coupling_update(state):
    """κ^X = Σ_ζ p(ξ, ζ) λ^Z(ζ) and κ^Z = Σ_ξ p(ξ, ζ) λ^X(ξ), normalized."""
    x, z = state.sides["X"], state.sides["Z"]
    floor = state.params.floor
    kappa_x = z.lam @ state.prior.T
    kappa_z = x.lam @ state.prior
    x.kappa = _normalize(kappa_x, floor)
    z.kappa = _normalize(kappa_z, floor)


def variable_to_check_update(state):
    """μ on every edge: κ times the check messages on the other edges."""
    for side in state.sides.values():
        var_edges = side.tables.var_edges
        incoming = side.nu[var_edges]
        outgoing = side.kappa[:, None, :] * _leave_one_out(incoming)
        side.mu[var_edges] = _normalize(outgoing, state.params.floor)


def check_update(state):
    """ν on every edge by XOR convolution of the other incoming μ."""
    q = state.code.field.q
    for side in state.sides.values():
        H = side.H

        # Reindex μ by y = δ·ξ and move to the transform domain
        scaled = np.take_along_axis(side.mu, side.tables.gather_in, axis=1)
        spectra = walsh_hadamard(scaled).reshape(H.M, H.L, q)

        # Distribution of the sum of the other L-1 terms
        others = walsh_hadamard(_leave_one_out(spectra)) / q
        others = others.reshape(H.M * H.L, q)

        # Read off at σ_i + δ_e·ξ
        messages = np.take_along_axis(others, side.gather_out, axis=1)
        side.nu = _normalize(messages, state.params.floor)


def belief_update(state):
    """λ_j = Π ν over the edges of column j, normalized."""
    for side in state.sides.values():
        product = np.prod(side.nu[side.tables.var_edges], axis=1)
        side.lam = _normalize(product, state.params.floor)


def estimate(state):
    """Update ξ̂ and ζ̂ as the argmax of κ·λ, smallest value on ties.

    A side repaired by post-processing keeps its estimate.

    Returns:
        tuple[ndarray, ndarray]: ξ̂ and ζ̂.
    """
    field = state.code.field
    for side in state.sides.values():
        if not side.repaired:
            side.estimate = np.argmax(side.kappa * side.lam, axis=1).astype(np.int64)
            side.mismatch = _mismatch(side, field, side.estimate)
    return state.sides["X"].estimate, state.sides["Z"].estimate


def bp_iteration(state):
    """Advance one flooding round to ℓ + 1 and refresh the estimates."""
    variable_to_check_update(state)
    check_update(state)
    belief_update(state)
    state.iteration += 1
    variable_coupling_update(state)
    return estimate(state)


def record_history(state):
    """Push the current estimates into the history buffers of both sides."""
    for side in state.sides.values():
        if side.estimates:
            previous = side.estimates[-1]
            side.changes.append(frozenset(np.flatnonzero(previous != side.estimate).tolist()))
        side.estimates.append(side.estimate.copy())
        side.mismatches.append(side.mismatch)
        metrics = history_metrics(state, side.name, state.params.d_window)
        side.recent_k_d.append(metrics.k_d)


def history_metrics(state, side, d, truth=None):
    """Change and mismatch sets over the last d + 1 iterations.

    K_d holds the columns whose estimate changed between ℓ′ − 1 and ℓ′ for
    some ℓ′ in [ℓ − d, ℓ], I_d the checks unsatisfied at some such ℓ′. With
    the true noise, K_err (wrong columns) and I_err (checks unsatisfied now)
    are added.

    Args:
        state (DecoderState): The decoder state.
        side (str): "X" or "Z".
        d (int): Window depth.
        truth (ndarray, optional): The true noise symbols of the side.

    Returns:
        HistoryMetrics: The sets.
    """
    side_state = state.sides[side]
    window = d + 1
    changes = list(side_state.changes)[-window:]
    mismatches = list(side_state.mismatches)[-window:]
    k_d = frozenset().union(*changes)
    i_d = frozenset().union(*mismatches)
    metrics = HistoryMetrics(k_d, i_d)
    if truth is not None:
        truth = np.asarray(truth, dtype=np.int64)
        metrics.k_err = frozenset(np.flatnonzero(truth != side_state.estimate).tolist())
        metrics.i_err = side_state.mismatch
    return metrics


def detect_stagnation(state, side, params=None):
    """Return True when a side is unsatisfied and its K_d has stopped moving.

    Fires from iteration warmup on, once K_d is nonempty and identical over
    the last stagnation_window iterations.
    """
    params = params or state.params
    side_state = state.sides[side]
    if side_state.satisfied or state.iteration < params.warmup:
        return False
    recent = side_state.recent_k_d
    if len(recent) < params.stagnation_window:
        return False
    last = recent[-1]
    return bool(last) and all(k_d == last for k_d in list(recent)[-params.stagnation_window:])


def estimate_cycle_set(code, k_d, side, u=2):
    """Select at most u catalog cycles that together cover K_d.

    Columns of K_d are scanned in increasing order; every catalog cycle through
    the column that meets K_d in at least two columns is admitted.

    Args:
        code (CssCode): The code.
        k_d (Iterable[int]): The stagnant columns.
        side (str): "X" (Delta catalog) or "Z" (Gamma catalog).
        u (int): Maximum number of cycles.

    Returns:
        tuple[int, ...] | None: Catalog indices in admission order, or None.
    """
    catalog_side = SIDES[side][0]
    catalog = code.catalog(catalog_side)
    index = code.catalog_index(catalog_side)
    k_d = frozenset(k_d)
    chosen = []
    covered = set()
    for j in sorted(k_d):
        for k in index[j]:
            columns = catalog[k].columns
            if len(k_d.intersection(columns)) < 2 or k in chosen:
                continue
            chosen.append(k)
            covered.update(columns)
            if len(chosen) > u:
                return None
            if k_d <= covered:
                return tuple(chosen)
    return None


def post_process(code, side, K, current, syndrome):
    """Re-solve the symbols on K with every other symbol held fixed.

    Solves (H)_K x_K = s + (H)_K̄ x̂_K̄ on the rows touching K.

    Args:
        code (CssCode): The code.
        side (str): "X" (H_Δ) or "Z" (H_Γ).
        K (Iterable[int]): Columns to re-solve.
        current (ndarray): The current estimate.
        syndrome (ndarray): The side syndrome.

    Returns:
        ndarray | None: The repaired estimate, or None if no solution exists.
    """
    field = code.field
    H = getattr(code, SIDES[side][1])
    K = np.array(sorted(set(int(k) for k in K)), dtype=np.int64)
    current = np.asarray(current, dtype=np.int64)
    rows = np.unique(H.column_rows[K])

    # Create the restricted system
    sub_cols = H.cols[rows]
    inside = np.isin(sub_cols, K)
    A = np.zeros((rows.size, K.size), dtype=np.int64)
    r, t = np.nonzero(inside)
    A[r, np.searchsorted(K, sub_cols[r, t])] = H.labels[rows][r, t]

    # Move the fixed symbols to the right-hand side
    outside = current.copy()
    outside[K] = 0
    rhs = np.asarray(syndrome, dtype=np.int64)[rows] ^ H.multiply(field, outside)[rows]

    solution = linalg.fq_solve(field, A, rhs)
    if solution is None:
        return None
    repaired = current.copy()
    repaired[K] = solution
    return repaired


def _stagnation_event(state, side, truth):
    """Handle a stagnated side.

    Returns:
        tuple[FailureReason | None, dict]: The reason to stop, if any, and the
        event record.
    """
    code, params = state.code, state.params
    side_state = state.sides[side]
    metrics = history_metrics(state, side, params.d_window, truth)
    k_d = metrics.k_d
    event = {"iteration": state.iteration, "side": side, "k_d": sorted(k_d), "i_d": len(metrics.i_d)}
    if metrics.k_err is not None:
        event["k_err"] = len(metrics.k_err)
    logger.debug("Side %s stagnated at iteration %d with |K_d|=%d",
                 side, state.iteration, len(k_d))

    if k_d in side_state.attempted:
        event["result"] = FailureReason.NO_SOLUTION.value
        return FailureReason.NO_SOLUTION, event
    side_state.attempted.add(k_d)

    chosen = estimate_cycle_set(code, k_d, side, params.u)
    if chosen is None:
        reason = (FailureReason.LENGTH_2LPLUS4_TRAP if len(k_d) == code.L + 2
                  else FailureReason.CYCLE_ESTIMATION_NULL)
        event["result"] = reason.value
        return reason, event

    catalog = code.catalog(SIDES[side][0])
    K = sorted(set().union(*(catalog[k].columns for k in chosen)))
    event["cycles"] = list(chosen)
    if metrics.k_err is not None:
        event["confined"] = metrics.k_err <= set(K)

    repaired = post_process(code, side, K, side_state.estimate, side_state.syndrome)
    if repaired is None:
        event["result"] = FailureReason.NO_SOLUTION.value
        return FailureReason.NO_SOLUTION, event

    mismatch = _mismatch(side_state, code.field, repaired)
    if mismatch:
        # The repair leaves other checks unsatisfied; BP goes on
        event["result"] = "retry"
        side_state.recent_k_d.clear()
        logger.debug("Post-processing of side %s left %d checks unsatisfied", side, len(mismatch))
        return None, event
    side_state.estimate = repaired
    side_state.mismatch = mismatch
    side_state.repaired = True
    side_state.cycles_used = chosen
    event["result"] = "repaired"
    logger.debug("Side %s repaired from %d cycles", side, len(chosen))
    return None, event


def decode(code, syndromes, prior, params=None, truth=None):
    """Decode a syndrome pair with joint BP and optional post-processing.

    Args:
        code (CssCode): The code.
        syndromes (SyndromePair): σ and τ.
        prior (ndarray): q×q joint prior indexed [ξ, ζ].
        params (DecoderParams, optional): Settings.
        truth (NoisePair, optional): True noise, used for event statistics
            only.

    Returns:
        DecodeOutcome: The result; failures are outcomes, never exceptions.
    """
    params = params or DecoderParams()
    state = bp_init(code, syndromes, prior, params)
    truths = {"X": None, "Z": None}
    if truth is not None:
        truths = {"X": truth.xi, "Z": truth.zeta}
    events = []

    def finish(kind, reason=None):
        x, z = state.sides["X"], state.sides["Z"]
        cycles_used = {name: s.cycles_used for name, s in state.sides.items() if s.repaired}
        return DecodeOutcome(kind, x.estimate.copy(), z.estimate.copy(), state.iteration,
                             reason, cycles_used, events)

    while True:
        record_history(state)
        if all(s.satisfied for s in state.sides.values()):
            repaired = any(s.repaired for s in state.sides.values())
            return finish(OutcomeKind.POST_PROCESSED if repaired else OutcomeKind.CONVERGED)

        if params.post_processing:
            for side in SIDES:
                if not detect_stagnation(state, side, params):
                    continue
                reason, event = _stagnation_event(state, side, truths[side])
                events.append(event)
                if reason is not None:
                    return finish(OutcomeKind.DETECTED_FAILURE, reason)
            if all(s.satisfied for s in state.sides.values()):
                return finish(OutcomeKind.POST_PROCESSED)

        if state.iteration >= params.max_iters:
            return finish(OutcomeKind.DETECTED_FAILURE, FailureReason.ITERATION_LIMIT)
        bp_iteration(state)


def classify_outcome(code, outcome, true_noise):
    """Tag a decoding outcome against the true noise.

    Args:
        code (CssCode): The code.
        outcome (DecodeOutcome): The decoder result.
        true_noise (NoisePair): The sampled noise.

    Returns:
        Verdict: exact, degenerate, logical_error or detected_failure.
    """
    if not outcome.success:
        return Verdict.DETECTED_FAILURE
    diff_x = np.asarray(true_noise.xi) ^ outcome.xi
    diff_z = np.asarray(true_noise.zeta) ^ outcome.zeta
    if not diff_x.any() and not diff_z.any():
        return Verdict.EXACT
    field = code.field
    if (code_module.dual_membership(code, "X", field.expand(diff_x, "w"))
            and code_module.dual_membership(code, "Z", field.expand(diff_z, "v"))):
        return Verdict.DEGENERATE
    return Verdict.LOGICAL_ERROR
