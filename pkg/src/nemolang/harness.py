"""Experiment harness: training-until-success trials, parameter sweeps, and
repeat statistics.

Every trial derives its own seed streams from (master seed, sweep point,
trial index), so trials are independent and reproducible under any degree of
trial-level parallelism.  Sentence sampling and tutoring-word selection use
separate streams: trials that differ only in tutoring interval see the same
sentence sequence, which pairs the comparison the tutoring sweep makes.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import mean, stdev

from .criteria import CriteriaThresholds, SuccessReport, check_success
from .dynamics import derive_rng, derive_seed
from .language import Lexicon, build_lexicon, sample_sentence
from .organ import Organ, OrganConfig, build_organ

log = logging.getLogger("nemolang.harness")

DEFAULT_BUDGET_PER_WORD_PAIR = 200  # sentences per lexicon size unit


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an organ template plus the training-loop knobs.

    ``max_sentences`` defaults to 200 * l.  ``eval_every`` trades exactness
    of the success count against evaluation cost.  ``tutoring_interval`` of
    None disables tutoring; j means one tutoring round after every j
    sentences.
    """

    organ: OrganConfig
    l: int
    C: int
    max_sentences: int | None = None
    eval_every: int = 1
    tutoring_interval: int | None = None
    repeats: int = 1
    seed: int = 0
    thresholds: CriteriaThresholds = field(default_factory=CriteriaThresholds)

    def __post_init__(self) -> None:
        if self.l < 1:
            raise ValueError(f"l must be >= 1, got {self.l}")
        if self.C < 0:
            raise ValueError(f"C must be >= 0, got {self.C}")
        if self.max_sentences is not None and self.max_sentences < 0:
            raise ValueError("max_sentences must be >= 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.tutoring_interval is not None and self.tutoring_interval < 1:
            raise ValueError("tutoring_interval must be >= 1 or None")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    @property
    def budget(self) -> int:
        if self.max_sentences is not None:
            return self.max_sentences
        return DEFAULT_BUDGET_PER_WORD_PAIR * self.l


@dataclass
class TrialResult:
    """Outcome of one training run; ``sentences_to_success`` is None when
    the budget ran out."""

    sentences_to_success: int | None
    tutoring_rounds: int
    wallclock_ms: int
    report: SuccessReport
    seed: int

    @property
    def success(self) -> bool:
        return self.sentences_to_success is not None


@dataclass
class AggregateStats:
    mean: float | None
    std: float | None
    failures: int
    n_success: int


@dataclass
class SweepPoint:
    value: object
    trials: list[TrialResult]
    stats: AggregateStats


@dataclass
class SweepResult:
    variable: str
    points: list[SweepPoint]


def aggregate(trials: list[TrialResult]) -> AggregateStats:
    """Sample mean and standard deviation (n-1 denominator) of the sentence
    counts of successful trials; failures are only counted.  A single
    successful trial reports std 0 by convention."""
    if not trials:
        raise ValueError("aggregate() needs at least one trial")
    counts = [t.sentences_to_success for t in trials if t.success]
    failures = len(trials) - len(counts)
    if not counts:
        return AggregateStats(None, None, failures, 0)
    if len(counts) == 1:
        log.warning(
            "aggregate over a single successful trial: std reported as 0"
        )
        return AggregateStats(float(counts[0]), 0.0, failures, 1)
    return AggregateStats(
        float(mean(counts)), float(stdev(counts)), failures, len(counts)
    )


def train_until_success(
    config: ExperimentConfig,
    trial_seed: int | None = None,
    trial_index: int = 0,
) -> TrialResult:
    """Feed random sentences (with optional interleaved tutoring) until
    every word passes every criterion, or the budget runs out.

    Evaluation is plasticity-frozen and therefore never perturbs the weight
    trajectory: checking after every sentence or only at the end yields the
    same training dynamics.
    """
    if trial_seed is None:
        trial_seed = derive_seed(config.seed, "trial", trial_index)
    lexicon = build_lexicon(
        config.l, config.C, seed=derive_seed(trial_seed, "lexicon")
    )
    organ_cfg = replace(config.organ, seed=derive_seed(trial_seed, "organ"))
    organ = build_organ(organ_cfg, lexicon)
    sentence_rng = derive_rng(trial_seed, "sentences")
    tutoring_rng = derive_rng(trial_seed, "tutoring")
    words = sorted(lexicon.words, key=lambda w: w.word_id)

    started = time.perf_counter()
    tutoring_rounds = 0
    success_at: int | None = None
    for m in range(1, config.budget + 1):
        sentence = sample_sentence(lexicon, config.organ.order, sentence_rng)
        organ.feed_sentence(sentence)
        if (
            config.tutoring_interval is not None
            and m % config.tutoring_interval == 0
        ):
            word = words[int(tutoring_rng.integers(0, len(words)))]
            organ.tutor_word(word)
            tutoring_rounds += 1
        if m % config.eval_every == 0:
            probe = check_success(
                organ, thresholds=config.thresholds, early_exit=True
            )
            if probe.passed:
                success_at = m
                break
    # the recorded report is always a full (non-early-exit) evaluation
    report = check_success(organ, thresholds=config.thresholds)
    elapsed_ms = int((time.perf_counter() - started) * 1000)
    if success_at is not None:
        log.info(
            "trial %d: success after %d sentences (%d tutoring rounds)",
            trial_index, success_at, tutoring_rounds,
        )
    else:
        log.info(
            "trial %d: budget of %d sentences exhausted; failing words: %s",
            trial_index,
            config.budget,
            [r.word_id for r in report.reports if not r.passed],
        )
    return TrialResult(
        sentences_to_success=success_at,
        tutoring_rounds=tutoring_rounds,
        wallclock_ms=elapsed_ms,
        report=report,
        seed=trial_seed,
    )


def _trial_task(args: tuple[ExperimentConfig, int, int]) -> TrialResult:
    config, trial_seed, trial_index = args
    return train_until_success(config, trial_seed, trial_index)


def run_trials(
    config: ExperimentConfig,
    point_tag: object = "trial",
    threads: int = 1,
) -> list[TrialResult]:
    """Run ``config.repeats`` independent trials; results are ordered by
    trial index and identical for any thread count."""
    tasks = [
        (config, derive_seed(config.seed, "point", point_tag, i), i)
        for i in range(config.repeats)
    ]
    if threads <= 1 or len(tasks) == 1:
        return [_trial_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_trial_task, tasks))


def sweep_lexicon(
    config: ExperimentConfig, l_values: list[int], threads: int = 1
) -> SweepResult:
    """Training cost as a function of lexicon size."""
    points = []
    for l in l_values:
        cfg = replace(config, l=l, max_sentences=config.max_sentences)
        trials = run_trials(cfg, point_tag=("l", l), threads=threads)
        points.append(SweepPoint(l, trials, aggregate(trials)))
        log.info("lexicon sweep l=%d done: %s", l, points[-1].stats)
    return SweepResult("l", points)


def sweep_beta(
    config: ExperimentConfig, beta_values: list[float], threads: int = 1
) -> SweepResult:
    """Training cost as a function of the plasticity rate (applied to every
    area)."""
    points = []
    for beta in beta_values:
        cfg = replace(config, organ=config.organ.with_beta(beta))
        trials = run_trials(cfg, point_tag=("beta", repr(beta)), threads=threads)
        points.append(SweepPoint(beta, trials, aggregate(trials)))
        log.info("beta sweep beta=%s done: %s", beta, points[-1].stats)
    return SweepResult("beta", points)


def sweep_tutoring(
    config: ExperimentConfig,
    intervals: list[int | None],
    threads: int = 1,
) -> SweepResult:
    """Training cost with and without interleaved single-word tutoring.

    The same point tag is used for every interval, so paired trials see
    identical sentence streams and differ only in the tutoring schedule."""
    points = []
    for interval in intervals:
        cfg = replace(config, tutoring_interval=interval)
        trials = run_trials(cfg, point_tag="tutoring", threads=threads)
        value = "none" if interval is None else interval
        points.append(SweepPoint(value, trials, aggregate(trials)))
        log.info(
            "tutoring sweep interval=%s done: %s", value, points[-1].stats
        )
    return SweepResult("tutoring", points)
