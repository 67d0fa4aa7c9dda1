"""
Monte Carlo frame error rate estimation over the depolarizing channel.

Every trial draws its noise from a generator derived from (master seed, sweep
point, trial), so a sweep gives the same trial stream whatever the number of
workers.
"""
import csv
from dataclasses import asdict, dataclass, field as dataclass_field
import json
import logging
from multiprocessing import Pool
import time

import numpy as np
import proglog
from proglog import ProgressBarLogger

from core import channel, common, decoder


logger = logging.getLogger(__name__)

CRITERIA = ("degenerate", "exact")

# Two-sided 95% normal quantile
Z_95 = 1.959963984540054


@dataclass
class TrialResult:
    """One decoded frame."""

    trial_id: int
    seed: int
    p_d: float
    outcome: str
    iterations: int
    post_processing_used: bool
    wall_time: float
    reason: str = None
    events: list = dataclass_field(default_factory=list)

    def to_dict(self):
        return asdict(self)


@dataclass
class FerSummary:
    """Failure counts at one p_D under both success criteria.

    Under the degenerate criterion logical errors and detected failures both
    count as frame errors; under the exact criterion every frame whose
    estimate differs from the noise does.
    """

    p_d: float
    trials: int = 0
    exact: int = 0
    degenerate: int = 0
    logical_errors: int = 0
    detected_failures: int = 0
    post_processed: int = 0
    stagnation_events: int = 0
    confined_events: int = 0

    def add(self, result):
        self.trials += 1
        if result.outcome == decoder.Verdict.EXACT.value:
            self.exact += 1
        elif result.outcome == decoder.Verdict.DEGENERATE.value:
            self.degenerate += 1
        elif result.outcome == decoder.Verdict.LOGICAL_ERROR.value:
            self.logical_errors += 1
        else:
            self.detected_failures += 1
        self.post_processed += int(result.post_processing_used)
        self.stagnation_events += len(result.events)
        self.confined_events += sum(1 for event in result.events if event.get("confined"))

    @property
    def degenerate_failures(self):
        return self.logical_errors + self.detected_failures

    @property
    def exact_failures(self):
        return self.trials - self.exact

    def failures(self, criterion="degenerate"):
        if criterion == "degenerate":
            return self.degenerate_failures
        if criterion == "exact":
            return self.exact_failures
        raise ValueError(f"unknown criterion {criterion!r}")

    def fer(self, criterion="degenerate"):
        return self.failures(criterion) / self.trials if self.trials else 0.0

    def interval(self, criterion="degenerate"):
        return wilson_interval(self.failures(criterion), self.trials)

    def to_dict(self):
        data = asdict(self)
        for criterion in CRITERIA:
            low, high = self.interval(criterion)
            data[criterion + "_criterion"] = {
                "failures": self.failures(criterion),
                "fer": self.fer(criterion),
                "ci_low": low,
                "ci_high": high,
            }
        return data


def wilson_interval(failures, trials, z=Z_95):
    """Wilson score interval of a binomial proportion.

    Args:
        failures (int): Number of failures.
        trials (int): Number of trials.
        z (float): Normal quantile of the confidence level.

    Returns:
        tuple[float, float]: Lower and upper bounds; (0, 1) with no trials.
    """
    if trials == 0:
        return 0.0, 1.0
    p = failures / trials
    denominator = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denominator
    spread = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denominator
    return max(0.0, float(center - spread)), min(1.0, float(center + spread))


class SweepProgress(ProgressBarLogger):
    """Sweep progress reported through the logger.

    Logs the share of finished trials and the estimated remaining time of a
    sweep at every tenth of its progress.
    """

    def __init__(self, step=0.1):
        """Start the trial clock.

        Args:
            step (float): Progress fraction between two log lines.
        """
        super().__init__()
        self.step = step
        self.next_report = step
        self.start_time = time.time()

    def _eta(self, progress):
        """Estimated time left for the remaining trials of a bar.

        Args:
            progress (float): Finished share of the trials.

        Returns:
            str: HH:MM:SS, or "unknown" before the first trial ends.
        """
        if progress == 0:
            return "unknown"
        elapsed = time.time() - self.start_time
        remaining = elapsed / progress - elapsed
        return time.strftime("%H:%M:%S", time.gmtime(remaining))

    def bars_callback(self, bar, attr, value, old_value=None):
        """Log finished trials of a p_D point once per step.

        Args:
            bar (str): Bar name, one per p_D point.
            attr (str): Changed bar attribute.
            value (int): Trials finished so far.
            old_value (int, optional): Unused.
        """
        total = self.bars[bar]["total"]
        if attr != "index" or not total:
            return

        # A new bar starts the clock again
        if value == 0:
            self.start_time = time.time()
            self.next_report = self.step
            return

        # Report once per step
        progress = value / total
        if progress + 1e-12 < self.next_report and value != total:
            return
        while self.next_report <= progress + 1e-12:
            self.next_report += self.step
        logger.info("%s %d/%d (%.0f%%), %s remaining", bar, value, total,
                    100 * progress, self._eta(progress))

    def callback(self, **changes):
        """Forward sweep messages to the logger."""
        if "message" in changes:
            logger.info(changes["message"])


# Per-process state of sweep workers
_worker = {}


def _init_worker(code, params, master_seed):
    _worker.update(code=code, params=params, master_seed=master_seed, priors={})


def _run_item(item):
    p_index, p_d, trial = item
    code = _worker["code"]
    priors = _worker["priors"]
    if p_d not in priors:
        priors[p_d] = channel.symbol_prior(p_d, code.field)
    return run_trial(code, p_d, p_index, trial, _worker["params"],
                     _worker["master_seed"], prior=priors[p_d])


def run_trial(code, p_d, p_index, trial, params=None, master_seed=0, prior=None):
    """Sample, decode and classify one frame.

    Args:
        code (CssCode): The code.
        p_d (float): Depolarizing probability.
        p_index (int): Index of p_d in the sweep.
        trial (int): Trial number at this point.
        params (DecoderParams, optional): Decoder settings.
        master_seed (int): Run seed.
        prior (ndarray, optional): Precomputed symbol prior.

    Returns:
        TrialResult: The result.
    """
    params = params or decoder.DecoderParams()
    if prior is None:
        prior = channel.symbol_prior(p_d, code.field)
    seed = common.derive_seed(master_seed, p_index, trial)
    noise = channel.sample_noise(p_d, code.N, code.field, np.random.default_rng(seed))
    syndromes = channel.syndromes(code, noise)

    start = time.perf_counter()
    outcome = decoder.decode(code, syndromes, prior, params, truth=noise)
    verdict = decoder.classify_outcome(code, outcome, noise)
    wall_time = time.perf_counter() - start

    reason = outcome.reason.value if outcome.reason is not None else None
    return TrialResult(trial, seed, p_d, verdict.value, outcome.iterations,
                       outcome.kind is decoder.OutcomeKind.POST_PROCESSED,
                       round(wall_time, 6), reason, outcome.events)


def run_sweep(code, p_values, trials, criterion="degenerate", params=None, master_seed=0,
              workers=1, max_failures=0, progress=None, sink=None):
    """Estimate the frame error rate at each depolarizing probability.

    Trials are consumed in (point, trial) order, so early stopping after
    max_failures failures under the chosen criterion cuts every run at the
    same trial.

    Args:
        code (CssCode): The code.
        p_values (list[float]): Depolarizing probabilities.
        trials (int): Trials per point.
        criterion (str): "degenerate" or "exact", used for early stopping.
        params (DecoderParams, optional): Decoder settings.
        master_seed (int): Run seed.
        workers (int): Worker processes; 1 runs in-process.
        max_failures (int): Stop a point after this many failures; 0 disables.
        progress (proglog.ProgressBarLogger, optional): Progress reporting.
        sink (callable, optional): Receives every TrialResult in order.

    Returns:
        list[FerSummary]: One summary per point.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    if trials < 1 or workers < 1 or max_failures < 0:
        raise ValueError("trials and workers must be positive and max_failures non-negative")
    params = (params or decoder.DecoderParams()).validate()
    progress = proglog.default_bar_logger(progress)
    summaries = []

    # Warm the cached catalogs and dual bases before workers copy the code
    _ = code.gamma_rowspace, code.delta_rowspace
    if params.post_processing:
        _ = code.gamma_index, code.delta_index

    pool = Pool(workers, initializer=_init_worker, initargs=(code, params, master_seed)) \
        if workers > 1 else None
    if pool is None:
        _init_worker(code, params, master_seed)
    try:
        for p_index, p_d in enumerate(p_values):
            summary = FerSummary(p_d)
            progress(message=f"p_D={p_d}: {trials} trials with {params.decoder}")
            progress(trial__total=trials, trial__index=0)
            items = ((p_index, p_d, trial) for trial in range(trials))
            results = pool.imap(_run_item, items) if pool else map(_run_item, items)
            for result in results:
                summary.add(result)
                if sink is not None:
                    sink(result)
                progress(trial__index=summary.trials)
                if max_failures and summary.failures(criterion) >= max_failures:
                    logger.info("p_D=%s: stopping after %d failures", p_d, max_failures)
                    break
            if summary.logical_errors:
                logger.warning("p_D=%s: %d logical errors", p_d, summary.logical_errors)
            logger.info("p_D=%s: FER %.4g (degenerate), %.4g (exact) over %d trials",
                        p_d, summary.fer("degenerate"), summary.fer("exact"), summary.trials)
            summaries.append(summary)
    finally:
        if pool is not None:
            pool.terminate()
            pool.join()
    return summaries


def write_trials(results, stream):
    """Write trial results as JSON lines."""
    for result in results:
        stream.write(json.dumps(result.to_dict(), separators=(",", ":")) + "\n")


def write_summary(summaries, stream, meta=None):
    """Write the sweep summary JSON."""
    data = {"meta": meta or {}, "points": [summary.to_dict() for summary in summaries]}
    json.dump(data, stream, indent=2)
    stream.write("\n")


def write_csv(summaries, stream):
    """Write (p_D, FER, CI_low, CI_high) rows for both criteria."""
    writer = csv.writer(stream)
    writer.writerow(["p_D", "criterion", "trials", "failures", "FER", "CI_low", "CI_high"])
    for summary in summaries:
        for criterion in CRITERIA:
            low, high = summary.interval(criterion)
            writer.writerow([summary.p_d, criterion, summary.trials, summary.failures(criterion),
                             f"{summary.fer(criterion):.6g}", f"{low:.6g}", f"{high:.6g}"])
