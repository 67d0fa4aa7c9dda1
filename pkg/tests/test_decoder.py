import itertools

import numpy as np
import pytest

from core import channel, common, cycles, decoder
from core.decoder import DecoderParams, FailureReason, OutcomeKind, Verdict
from utility import linalg


P_D = 0.05


def _planted_noise(code):
    xi = np.zeros(code.N, dtype=np.int64)
    zeta = np.zeros(code.N, dtype=np.int64)
    xi[[3, 17]] = [5, 2]
    zeta[9] = 4
    return channel.NoisePair(xi, zeta)


def _state(code, noise, params=None):
    prior = channel.symbol_prior(P_D, code.field)
    return decoder.bp_init(code, channel.syndromes(code, noise), prior, params)


def _normalized(values):
    return values / values.sum(axis=-1, keepdims=True)


def _xor_convolve(a, b):
    out = np.zeros(a.size)
    for x in range(a.size):
        for y in range(b.size):
            out[x ^ y] += a[x] * b[y]
    return out


def _check_message(field, labels, incoming, syndrome_value, t):
    """Enumerate every assignment of the other symbols of a check."""
    others = [k for k in range(len(labels)) if k != t]
    message = np.zeros(field.q)
    for combo in itertools.product(range(field.q), repeat=len(others)):
        weight = 1.0
        total = int(syndrome_value)
        for k, value in zip(others, combo):
            weight *= incoming[k, value]
            total ^= field.mul(int(labels[k]), value)
        message[field.div(total, int(labels[t]))] += weight
    return message / message.sum()


@pytest.mark.parametrize("q", [4, 8])
def test_walsh_hadamard_diagonalizes_xor_convolution(q, rng):
    a, b = rng.random(q), rng.random(q)
    spectra = decoder.walsh_hadamard(np.stack([a, b]))
    assert np.allclose(decoder.walsh_hadamard(spectra[0] * spectra[1]) / q, _xor_convolve(a, b))
    assert np.allclose(decoder.walsh_hadamard(decoder.walsh_hadamard(a)), q * a)


def test_walsh_hadamard_needs_power_of_two():
    with pytest.raises(ValueError):
        decoder.walsh_hadamard(np.ones(6))


def test_leave_one_out(rng):
    factors = rng.random((4, 5, 3)) + 0.1
    expected = factors.prod(axis=1, keepdims=True) / factors
    assert np.allclose(decoder._leave_one_out(factors), expected)


def test_params():
    params = DecoderParams()
    assert params.validate() is params
    assert params.decoder == "bp-post"
    assert DecoderParams(post_processing=False).decoder == "bp"
    with pytest.raises(ValueError):
        DecoderParams(floor=0.1).validate()
    with pytest.raises(ValueError):
        DecoderParams(u=0).validate()
    settings = common.default_settings()
    settings.set("decoder", "max_iters", "50")
    settings.set("decoder", "post_processing", "0")
    loaded = DecoderParams.from_settings(settings)
    assert loaded.max_iters == 50 and not loaded.post_processing


def test_initial_state(small_code):
    noise = _planted_noise(small_code)
    state = _state(small_code, noise)
    prior = channel.symbol_prior(P_D, small_code.field)
    x, z = state.sides["X"], state.sides["Z"]
    assert x.mu.shape == (small_code.M * small_code.L, 8)
    assert np.allclose(x.kappa[0], _normalized(prior.sum(axis=1)))
    assert np.allclose(z.kappa[0], _normalized(prior.sum(axis=0)))
    assert not x.estimate.any() and not z.estimate.any()
    assert x.mismatch == frozenset(np.flatnonzero(x.syndrome).tolist())
    assert not x.satisfied and not z.satisfied


def test_init_rejects_bad_inputs(small_code):
    syndromes = channel.syndromes(small_code, _planted_noise(small_code))
    with pytest.raises(ValueError):
        decoder.bp_init(small_code, syndromes, np.ones((4, 4)))
    short = channel.SyndromePair(syndromes.sigma[:5], syndromes.tau)
    with pytest.raises(ValueError):
        decoder.bp_init(small_code, short, channel.symbol_prior(P_D, small_code.field))


def test_coupling_update(small_code, rng):
    state = _state(small_code, _planted_noise(small_code))
    x, z = state.sides["X"], state.sides["Z"]
    x.lam = _normalized(rng.random(x.lam.shape))
    z.lam = _normalized(rng.random(z.lam.shape))
    decoder.variable_coupling_update(state)
    prior = state.prior
    for c in (0, 7, 31):
        expected_x = np.array([sum(prior[a, b] * z.lam[c, b] for b in range(8)) for a in range(8)])
        expected_z = np.array([sum(prior[a, b] * x.lam[c, a] for a in range(8)) for b in range(8)])
        assert np.allclose(x.kappa[c], _normalized(expected_x))
        assert np.allclose(z.kappa[c], _normalized(expected_z))


@pytest.mark.parametrize("side", ["X", "Z"])
def test_check_update_matches_enumeration(small_code, rng, side):
    state = _state(small_code, _planted_noise(small_code))
    side_state = state.sides[side]
    side_state.mu = _normalized(rng.random(side_state.mu.shape))
    decoder.check_update(state)
    H = side_state.H
    for i, t in ((0, 0), (9, 4)):
        incoming = side_state.mu[i * H.L:(i + 1) * H.L]
        expected = _check_message(small_code.field, H.labels[i], incoming, side_state.syndrome[i], t)
        assert np.allclose(side_state.nu[i * H.L + t], expected, atol=1e-9)


def test_variable_and_belief_updates(small_code, rng):
    state = _state(small_code, _planted_noise(small_code))
    side = state.sides["X"]
    side.nu = _normalized(rng.random(side.nu.shape))
    decoder.variable_to_check_update(state)
    decoder.belief_update(state)
    first, second = side.tables.var_edges[11]
    assert np.allclose(side.mu[first], _normalized(side.kappa[11] * side.nu[second]))
    assert np.allclose(side.mu[second], _normalized(side.kappa[11] * side.nu[first]))
    assert np.allclose(side.lam[11], _normalized(side.nu[first] * side.nu[second]))


def test_zero_syndrome_converges_at_once(small_code):
    zero = channel.NoisePair(np.zeros(small_code.N, dtype=np.int64),
                             np.zeros(small_code.N, dtype=np.int64))
    prior = channel.symbol_prior(P_D, small_code.field)
    outcome = decoder.decode(small_code, channel.syndromes(small_code, zero), prior)
    assert outcome.kind is OutcomeKind.CONVERGED
    assert outcome.iterations == 0
    assert not outcome.xi.any() and not outcome.zeta.any()
    assert decoder.classify_outcome(small_code, outcome, zero) is Verdict.EXACT


@pytest.mark.parametrize("post_processing", [True, False])
def test_decoded_estimates_satisfy_syndromes(small_code, post_processing):
    field = small_code.field
    prior = channel.symbol_prior(0.03, field)
    params = DecoderParams(max_iters=30, post_processing=post_processing)
    for seed in range(4):
        noise = channel.sample_noise(0.03, small_code.N, field, seed)
        syndromes = channel.syndromes(small_code, noise)
        outcome = decoder.decode(small_code, syndromes, prior, params, truth=noise)
        verdict = decoder.classify_outcome(small_code, outcome, noise)
        assert outcome.iterations <= params.max_iters
        if outcome.success:
            assert np.array_equal(small_code.hdelta.multiply(field, outcome.xi), syndromes.sigma)
            assert np.array_equal(small_code.hgamma.multiply(field, outcome.zeta), syndromes.tau)
            assert verdict is not Verdict.DETECTED_FAILURE
        else:
            assert isinstance(outcome.reason, FailureReason)
            assert verdict is Verdict.DETECTED_FAILURE
        if not post_processing:
            assert outcome.kind is not OutcomeKind.POST_PROCESSED
            assert not outcome.events


def test_history_sets(small_code):
    noise = _planted_noise(small_code)
    state = _state(small_code, noise)
    side = state.sides["X"]
    decoder.record_history(state)
    metrics = decoder.history_metrics(state, "X", 8)
    assert metrics.k_d == frozenset()
    assert metrics.i_d == side.mismatch and metrics.i_d
    assert metrics.k_err is None

    side.estimate = side.estimate.copy()
    side.estimate[5] = 3
    decoder.record_history(state)
    assert decoder.history_metrics(state, "X", 8).k_d == {5}
    decoder.record_history(state)
    assert decoder.history_metrics(state, "X", 8).k_d == {5}
    assert decoder.history_metrics(state, "X", 0).k_d == frozenset()
    assert decoder.history_metrics(state, "X", 8, truth=noise.xi).k_err == {3, 5, 17}
    assert list(side.recent_k_d)[-2:] == [frozenset({5})] * 2


def test_stagnation_detection(small_code):
    state = _state(small_code, _planted_noise(small_code))
    params = state.params
    side = state.sides["X"]
    state.iteration = params.warmup
    side.recent_k_d.extend([frozenset({1, 2})] * params.stagnation_window)
    assert decoder.detect_stagnation(state, "X")

    state.iteration = params.warmup - 1
    assert not decoder.detect_stagnation(state, "X")
    state.iteration = params.warmup

    side.recent_k_d.append(frozenset({1}))
    assert not decoder.detect_stagnation(state, "X")
    side.recent_k_d.extend([frozenset()] * params.stagnation_window)
    assert not decoder.detect_stagnation(state, "X")

    side.recent_k_d.extend([frozenset({1, 2})] * params.stagnation_window)
    side.mismatch = frozenset()
    assert not decoder.detect_stagnation(state, "X")


@pytest.mark.parametrize("side", ["X", "Z"])
def test_cycle_set_of_one_cycle(small_code, side):
    catalog = small_code.catalog(decoder.SIDES[side][0])

    # Rows of the first two row blocks share at most one column
    for c in range(2 * small_code.P):
        assert decoder.estimate_cycle_set(small_code, catalog[c].columns, side) == (c,)


def test_cycle_set_of_two_cycles(small_code):
    catalog = small_code.delta_catalog
    k_d = frozenset(catalog[0].columns) | frozenset(catalog[1].columns)
    assert decoder.estimate_cycle_set(small_code, k_d, "X", u=1) is None
    chosen = decoder.estimate_cycle_set(small_code, k_d, "X", u=len(catalog))
    assert chosen is not None
    covered = set().union(*(catalog[k].columns for k in chosen))
    assert k_d <= covered
    assert all(len(k_d & set(catalog[k].columns)) >= 2 for k in chosen)


def test_cycle_set_not_found(small_code):
    assert decoder.estimate_cycle_set(small_code, {5}, "X") is None
    # One column per cycle at most: every column of a single block
    assert decoder.estimate_cycle_set(small_code, range(8), "Z") is None


def _full_rank_record(code):
    for side, catalog_side in (("Z", "Gamma"), ("X", "Delta")):
        for record in code.catalog(catalog_side):
            if cycles.cycle_determinant(code.field, record):
                return side, record
    raise AssertionError("every catalog cycle is rank deficient")


def test_post_process_recovers_a_full_rank_cycle(small_code, rng):
    field = small_code.field
    side, record = _full_rank_record(small_code)
    H = getattr(small_code, decoder.SIDES[side][1])
    truth = rng.integers(field.q, size=small_code.N)
    syndrome = H.multiply(field, truth)
    K = list(record.columns)
    current = truth.copy()
    current[K] = rng.integers(field.q, size=len(K))
    repaired = decoder.post_process(small_code, side, K, current, syndrome)
    assert np.array_equal(repaired, truth)


def test_post_process_on_a_deficient_cycle(small_code, rng):
    field = small_code.field
    H = small_code.hgamma
    record = small_code.gamma_catalog[3]
    assert cycles.cycle_determinant(field, record) == 0
    truth = rng.integers(field.q, size=small_code.N)
    syndrome = H.multiply(field, truth)
    K = list(record.columns)
    current = truth.copy()
    current[K] = 0
    repaired = decoder.post_process(small_code, "Z", K, current, syndrome)
    assert repaired is not None
    assert np.array_equal(H.multiply(field, repaired), syndrome)
    outside = np.setdiff1d(np.arange(small_code.N), K)
    assert np.array_equal(repaired[outside], current[outside])

    # A deficient cycle only admits syndromes orthogonal to its left null vector
    tampered = syndrome.copy()
    tampered[record.rows[0]] ^= 1
    assert decoder.post_process(small_code, "Z", K, current, tampered) is None


def test_stagnation_event_repairs_a_confined_trap(small_code, rng):
    field = small_code.field
    record = small_code.gamma_catalog[2]
    K = list(record.columns)
    zeta = np.zeros(small_code.N, dtype=np.int64)
    zeta[K] = rng.integers(1, field.q, size=len(K))
    noise = channel.NoisePair(np.zeros(small_code.N, dtype=np.int64), zeta)
    state = _state(small_code, noise)
    decoder.record_history(state)

    side = state.sides["Z"]
    side.estimate = np.zeros(small_code.N, dtype=np.int64)
    side.estimate[K] = rng.integers(1, field.q, size=len(K))
    decoder.record_history(state)

    reason, event = decoder._stagnation_event(state, "Z", zeta)
    assert reason is None
    assert event["result"] == "repaired"
    assert event["cycles"] == [2]
    assert event["confined"]
    assert side.repaired and side.satisfied
    assert side.cycles_used == (2,)
    assert np.array_equal(small_code.hgamma.multiply(field, side.estimate), side.syndrome)


def test_stagnation_event_failures(small_code):
    state = _state(small_code, _planted_noise(small_code))
    decoder.record_history(state)
    side = state.sides["X"]

    side.changes.append(frozenset(range(8)))
    reason, event = decoder._stagnation_event(state, "X", None)
    assert reason is FailureReason.LENGTH_2LPLUS4_TRAP
    assert event["result"] == "Length2Lplus4Trap"

    reason, _ = decoder._stagnation_event(state, "X", None)
    assert reason is FailureReason.NO_SOLUTION

    side.changes.append(frozenset(range(7)))
    side.changes.extend([frozenset()] * 9)
    side.changes.append(frozenset(range(7)))
    reason, _ = decoder._stagnation_event(state, "X", None)
    assert reason is FailureReason.CYCLE_ESTIMATION_NULL


def test_classify_outcome(small_code):
    field = small_code.field
    noise = _planted_noise(small_code)

    def outcome(xi, zeta, kind=OutcomeKind.CONVERGED):
        return decoder.DecodeOutcome(kind, np.asarray(xi), np.asarray(zeta), 3)

    assert decoder.classify_outcome(small_code, outcome(noise.xi, noise.zeta), noise) is Verdict.EXACT

    stabilizer_x = small_code.hgamma.dense()[0]
    stabilizer_z = small_code.hdelta.dense()[2]
    degenerate = outcome(noise.xi ^ stabilizer_x, noise.zeta ^ stabilizer_z)
    assert decoder.classify_outcome(small_code, degenerate, noise) is Verdict.DEGENERATE

    basis = linalg.fq_nullspace(field, small_code.hdelta.dense())
    logical = next(v for v in basis if not small_code.gamma_rowspace.contains(v))
    wrong = outcome(noise.xi ^ logical, noise.zeta)
    assert decoder.classify_outcome(small_code, wrong, noise) is Verdict.LOGICAL_ERROR

    failed = outcome(noise.xi, noise.zeta, OutcomeKind.DETECTED_FAILURE)
    assert decoder.classify_outcome(small_code, failed, noise) is Verdict.DETECTED_FAILURE
