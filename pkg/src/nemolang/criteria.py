"""Success criteria over a trained organ, all evaluated plasticity-frozen.

The production criterion (P) drives a word's perceptual assemblies through
its lexical area and demands that most of the phonological assembly lights
up.  The representation criteria (Q1..Q3) fire the phonological assembly
once, look at the caps it evokes in the two lexical areas -- the cap in the
word's own area versus the cap in the other -- and demand input dominance,
correct downstream activation, and recurrent self-stability for the former
but not the latter.

Every check runs on a copy-on-write clone of the organ's network, so
evaluation never mutates a weight: the checksum of the organ is identical
before and after, and repeated evaluation returns identical reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .assembly import Assembly, overlap_ids
from .dynamics import Network
from .language import Lexicon, Word
from .organ import PHON, Organ


@dataclass(frozen=True)
class CriteriaThresholds:
    """Decision thresholds, inclusive on the activation side.

    ``activation``: minimum overlap for "activates" clauses (P, Q2, Q3
    positive).  ``suppression``: strict upper bound for "does not activate"
    clauses (Q2, Q3 negative).  ``dominance_factor``: required ratio of
    synaptic input into the correct lexical cap versus the other (Q1).
    """

    activation: float = 0.75
    suppression: float = 0.50
    dominance_factor: float = 2.0


DEFAULT_THRESHOLDS = CriteriaThresholds()


def activation_passes(value: float, threshold: float) -> bool:
    """Inclusive: hitting the activation threshold exactly is a pass."""
    return value >= threshold


def suppression_passes(value: float, threshold: float) -> bool:
    """Strict: the overlap must stay below the suppression threshold."""
    return value < threshold


def dominance_passes(true_input: float, other_input: float, factor: float) -> bool:
    """Inclusive on the factor; requires some input into the true cap."""
    return true_input > 0.0 and true_input >= factor * other_input


@dataclass(frozen=True)
class PCheck:
    passed: bool
    overlap: float


@dataclass(frozen=True)
class Q1Check:
    passed: bool
    ratio: float
    true_input: float
    other_input: float


@dataclass(frozen=True)
class Q2Check:
    passed: bool
    phon_overlap: float
    ground_overlap: float
    max_foreign_phon: float
    max_foreign_ground: float


@dataclass(frozen=True)
class Q3Check:
    passed: bool
    self_overlap: float
    cross_overlap: float


@dataclass
class WordReport:
    """Per-word outcome; checks skipped by an early exit stay ``None``."""

    word_id: int
    pos: str
    p: PCheck | None = None
    q1: Q1Check | None = None
    q2: Q2Check | None = None
    q3: Q3Check | None = None

    @property
    def passed(self) -> bool:
        checks = (self.p, self.q1, self.q2, self.q3)
        return all(c is not None and c.passed for c in checks)

    def failing(self) -> list[str]:
        out = []
        for name, check in (
            ("P", self.p),
            ("Q1", self.q1),
            ("Q2", self.q2),
            ("Q3", self.q3),
        ):
            if check is None or not check.passed:
                out.append(name)
        return out

    def to_dict(self) -> dict:
        def num(x: float) -> float | None:
            return None if math.isinf(x) or math.isnan(x) else x

        d: dict = {"word_id": self.word_id, "pos": self.pos}
        d["P"] = (
            None
            if self.p is None
            else {"passed": self.p.passed, "overlap": self.p.overlap}
        )
        d["Q1"] = (
            None
            if self.q1 is None
            else {
                "passed": self.q1.passed,
                "ratio": num(self.q1.ratio),
                "true_input": self.q1.true_input,
                "other_input": self.q1.other_input,
            }
        )
        d["Q2"] = (
            None
            if self.q2 is None
            else {
                "passed": self.q2.passed,
                "phon_overlap": self.q2.phon_overlap,
                "ground_overlap": self.q2.ground_overlap,
                "max_foreign_phon": self.q2.max_foreign_phon,
                "max_foreign_ground": self.q2.max_foreign_ground,
            }
        )
        d["Q3"] = (
            None
            if self.q3 is None
            else {
                "passed": self.q3.passed,
                "self_overlap": self.q3.self_overlap,
                "cross_overlap": self.q3.cross_overlap,
            }
        )
        return d


@dataclass
class SuccessReport:
    passed: bool
    reports: list[WordReport]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "words": [r.to_dict() for r in self.reports],
        }


def _fire(
    probe: Network,
    fire: dict[str, np.ndarray],
    targets: Iterable[str],
    collect_inputs: bool = False,
):
    """One frozen step on the evaluation clone: exactly the given sets fire."""
    probe.clear_state()
    for area_id, ids in fire.items():
        probe.set_winners(area_id, ids)
    return probe.step(
        clamps=None,
        plasticity=False,
        targets=set(targets),
        collect_inputs=collect_inputs,
    )


def _word_assemblies(
    organ: Organ, area_id: str
) -> list[tuple[int, Assembly]]:
    return sorted(
        (
            (word_id, asm)
            for (aid, word_id), asm in organ.assemblies.items()
            if aid == area_id
        ),
        key=lambda item: item[0],
    )


class _WordEvaluator:
    """Runs the per-word checks on one shared evaluation clone."""

    def __init__(self, organ: Organ, probe: Network, thresholds: CriteriaThresholds):
        self.organ = organ
        self.probe = probe
        self.thr = thresholds

    def _lex_caps(self, word: Word):
        """Fire the word's phonological assembly once; return the caps and
        summed synaptic inputs in the true- and other-POS lexical areas."""
        organ = self.organ
        true_area = organ.lex_area(word)
        other_area = organ.other_lex_area(word)
        state = _fire(
            self.probe,
            {PHON: organ.phon_assembly(word).ids},
            targets=(true_area, other_area),
            collect_inputs=True,
        )
        true_cap = state.winners[true_area]
        other_cap = state.winners[other_area]
        true_sum = float(state.inputs[true_area].sum())
        other_sum = float(state.inputs[other_area].sum())
        return true_cap, other_cap, true_sum, other_sum

    def check_q1(self, word: Word) -> tuple[Q1Check, np.ndarray, np.ndarray]:
        true_cap, other_cap, true_sum, other_sum = self._lex_caps(word)
        if other_sum > 0.0:
            ratio = true_sum / other_sum
        else:
            ratio = math.inf if true_sum > 0.0 else 0.0
        passed = dominance_passes(true_sum, other_sum, self.thr.dominance_factor)
        return Q1Check(passed, ratio, true_sum, other_sum), true_cap, other_cap

    def check_q2_q3(
        self, word: Word, true_cap: np.ndarray, other_cap: np.ndarray
    ) -> tuple[Q2Check, Q3Check]:
        organ = self.organ
        thr = self.thr
        true_area = organ.lex_area(word)
        other_area = organ.other_lex_area(word)
        ground_area = organ.roles.ground_area(word.pos)
        foreign_ground_area = organ.roles.other_ground_area(word.pos)
        k_lex_true = organ.net.areas[true_area].params.k
        k_lex_other = organ.net.areas[other_area].params.k
        k_phon = organ.net.areas[PHON].params.k
        k_ground = organ.net.areas[ground_area].params.k
        k_foreign = organ.net.areas[foreign_ground_area].params.k

        # fire the true-area cap: it must light up the word's own
        # phonological and grounding assemblies, and re-excite itself
        state = _fire(
            self.probe,
            {true_area: true_cap},
            targets=(PHON, ground_area, true_area),
        )
        phon_overlap = overlap_ids(
            state.winners[PHON], organ.phon_assembly(word).ids, k_phon
        )
        ground_overlap = overlap_ids(
            state.winners[ground_area], organ.ground_assembly(word).ids, k_ground
        )
        self_overlap = overlap_ids(state.winners[true_area], true_cap, k_lex_true)

        # fire the other-area cap: it must activate nothing predefined and
        # fail to re-excite itself
        state = _fire(
            self.probe,
            {other_area: other_cap},
            targets=(PHON, foreign_ground_area, other_area),
        )
        max_foreign_phon = 0.0
        for _, asm in _word_assemblies(organ, PHON):
            max_foreign_phon = max(
                max_foreign_phon,
                overlap_ids(state.winners[PHON], asm.ids, k_phon),
            )
        max_foreign_ground = 0.0
        for _, asm in _word_assemblies(organ, foreign_ground_area):
            max_foreign_ground = max(
                max_foreign_ground,
                overlap_ids(
                    state.winners[foreign_ground_area], asm.ids, k_foreign
                ),
            )
        cross_overlap = overlap_ids(
            state.winners[other_area], other_cap, k_lex_other
        )

        q2 = Q2Check(
            passed=(
                activation_passes(phon_overlap, thr.activation)
                and activation_passes(ground_overlap, thr.activation)
                and suppression_passes(max_foreign_phon, thr.suppression)
                and suppression_passes(max_foreign_ground, thr.suppression)
            ),
            phon_overlap=phon_overlap,
            ground_overlap=ground_overlap,
            max_foreign_phon=max_foreign_phon,
            max_foreign_ground=max_foreign_ground,
        )
        q3 = Q3Check(
            passed=(
                activation_passes(self_overlap, thr.activation)
                and suppression_passes(cross_overlap, thr.suppression)
            ),
            self_overlap=self_overlap,
            cross_overlap=cross_overlap,
        )
        return q2, q3

    def check_p(self, word: Word) -> PCheck:
        organ = self.organ
        true_area = organ.lex_area(word)
        fire: dict[str, np.ndarray] = {
            organ.roles.ground_area(word.pos): organ.ground_assembly(word).ids
        }
        ctx = organ.context_assembly(word)
        if ctx is not None:
            fire[ctx.area_id] = ctx.ids
        state = _fire(self.probe, fire, targets=(true_area,))
        lex_cap = state.winners[true_area]
        state = _fire(self.probe, {true_area: lex_cap}, targets=(PHON,))
        k_phon = organ.net.areas[PHON].params.k
        ov = overlap_ids(state.winners[PHON], organ.phon_assembly(word).ids, k_phon)
        return PCheck(activation_passes(ov, self.thr.activation), ov)

    def check_word(self, word: Word, early_exit: bool) -> WordReport:
        report = WordReport(word_id=word.word_id, pos=word.pos)
        report.q1, true_cap, other_cap = self.check_q1(word)
        if early_exit and not report.q1.passed:
            return report
        report.q2, report.q3 = self.check_q2_q3(word, true_cap, other_cap)
        if early_exit and not (report.q2.passed and report.q3.passed):
            return report
        report.p = self.check_p(word)
        return report


def _evaluator(organ: Organ, thresholds: CriteriaThresholds | None) -> _WordEvaluator:
    return _WordEvaluator(
        organ, organ.eval_clone(), thresholds or DEFAULT_THRESHOLDS
    )


def check_P(
    organ: Organ, word: Word, thresholds: CriteriaThresholds | None = None
) -> PCheck:
    """Production: perceptual assemblies must reactivate the word's
    phonological assembly through its own lexical area."""
    return _evaluator(organ, thresholds).check_p(word)


def check_Q1(
    organ: Organ, word: Word, thresholds: CriteriaThresholds | None = None
) -> Q1Check:
    """Input dominance: with the word's phonological assembly firing once,
    total synaptic input into the true-area cap must exceed the other-area
    cap's by the dominance factor."""
    q1, _, _ = _evaluator(organ, thresholds).check_q1(word)
    return q1


def check_Q2(
    organ: Organ, word: Word, thresholds: CriteriaThresholds | None = None
) -> Q2Check:
    """Downstream routing: the true-area cap activates the word's own
    assemblies; the other-area cap activates none of the predefined ones."""
    ev = _evaluator(organ, thresholds)
    _, true_cap, other_cap = ev.check_q1(word)
    q2, _ = ev.check_q2_q3(word, true_cap, other_cap)
    return q2


def check_Q3(
    organ: Organ, word: Word, thresholds: CriteriaThresholds | None = None
) -> Q3Check:
    """Recurrent stability: the true-area cap re-excites itself; the
    other-area cap drifts."""
    ev = _evaluator(organ, thresholds)
    _, true_cap, other_cap = ev.check_q1(word)
    _, q3 = ev.check_q2_q3(word, true_cap, other_cap)
    return q3


def check_success(
    organ: Organ,
    thresholds: CriteriaThresholds | None = None,
    early_exit: bool = False,
) -> SuccessReport:
    """Conjunction of all criteria over every word.

    With ``early_exit`` the evaluation stops at the first failing word
    (intermediate training checks only need the boolean); the returned
    reports then cover only the words examined.  Weights are never touched
    either way.
    """
    ev = _evaluator(organ, thresholds)
    reports: list[WordReport] = []
    passed = True
    for word in sorted(organ.lexicon.words, key=lambda w: w.word_id):
        report = ev.check_word(word, early_exit=early_exit)
        reports.append(report)
        if not report.passed:
            passed = False
            if early_exit:
                break
    return SuccessReport(passed=passed, reports=reports)
