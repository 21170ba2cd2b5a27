"""The language organ: areas, fibers, pre-built perceptual assemblies, and
the training stimuli (whole-sentence feeding and single-word tutoring).

The organ wires a phonological input area and two blank lexical areas to the
grounding areas (visual for nouns, motor for verbs, plus any number of extra
context areas shared by both parts of speech).  Every connection is a
bidirectional fiber pair, and only the lexical areas carry recurrent graphs.
Hearing a word clamps its phonological assembly; grounding clamps the
perceptual assemblies for the whole duration of a sentence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .assembly import Assembly
from .dynamics import BACKENDS, LAZY, AreaParams, FiringState, Network, derive_rng
from .language import NOUN, ORDERS, SV, VERB, Lexicon, Sentence, Word

PHON = "PHON"
LEX_N = "LEX_N"
LEX_V = "LEX_V"
VISUAL = "VISUAL"
MOTOR = "MOTOR"
CONTEXT_PREFIX = "CONTEXT_"

AREA_TEMPLATES = ("PHON", "LEX_N", "LEX_V", "VISUAL", "MOTOR", "CONTEXT")


def context_area(i: int) -> str:
    return f"{CONTEXT_PREFIX}{i}"


@dataclass(frozen=True)
class RoleMap:
    """Binding of functional roles to concrete area names.

    The default binding puts nouns in LEX_N grounded by VISUAL and verbs in
    LEX_V grounded by MOTOR.  The mirrored binding swaps both pairs, which
    together with a mirrored lexicon and word order yields a bit-identical
    run: the order-symmetry tests rely on this.
    """

    noun_lex: str = LEX_N
    verb_lex: str = LEX_V
    noun_ground: str = VISUAL
    verb_ground: str = MOTOR

    def mirrored(self) -> "RoleMap":
        return RoleMap(
            noun_lex=self.verb_lex,
            verb_lex=self.noun_lex,
            noun_ground=self.verb_ground,
            verb_ground=self.noun_ground,
        )

    def lex_area(self, pos: str) -> str:
        return self.noun_lex if pos == NOUN else self.verb_lex

    def other_lex_area(self, pos: str) -> str:
        return self.verb_lex if pos == NOUN else self.noun_lex

    def ground_area(self, pos: str) -> str:
        return self.noun_ground if pos == NOUN else self.verb_ground

    def other_ground_area(self, pos: str) -> str:
        return self.verb_ground if pos == NOUN else self.noun_ground


@dataclass(frozen=True)
class OrganConfig:
    """Everything needed to build one organ: per-area parameters (the
    CONTEXT entry is a template applied to each extra context area), the
    per-word presentation length tau, the word order, the connectome
    backend, and the master seed."""

    areas: Mapping[str, AreaParams]
    tau: int = 2
    order: str = SV
    backend: str = LAZY
    seed: int = 0

    def __post_init__(self) -> None:
        missing = [name for name in AREA_TEMPLATES if name not in self.areas]
        if missing:
            raise ValueError(f"missing area parameters for {missing}")
        if self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        if self.order not in ORDERS:
            raise ValueError(f"unknown word order {self.order!r}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")

    def with_beta(self, beta: float) -> "OrganConfig":
        areas = {
            name: replace(params, beta=beta)
            for name, params in self.areas.items()
        }
        return replace(self, areas=areas)


def uniform_organ_config(
    n: int,
    k: int,
    p: float,
    beta: float,
    k_lex: int | None = None,
    k_context: int | None = None,
    tau: int = 2,
    order: str = SV,
    backend: str = LAZY,
    seed: int = 0,
) -> OrganConfig:
    """Convenience constructor: one neuron count and connection probability
    everywhere, with optional cap overrides for the lexical and extra
    context areas."""
    k_lex = k if k_lex is None else k_lex
    k_context = k if k_context is None else k_context
    areas = {
        "PHON": AreaParams("PHON", n, k, beta, p),
        "LEX_N": AreaParams("LEX_N", n, k_lex, beta, p),
        "LEX_V": AreaParams("LEX_V", n, k_lex, beta, p),
        "VISUAL": AreaParams("VISUAL", n, k, beta, p),
        "MOTOR": AreaParams("MOTOR", n, k, beta, p),
        "CONTEXT": AreaParams("CONTEXT", n, k_context, beta, p),
    }
    return OrganConfig(
        areas=areas, tau=tau, order=order, backend=backend, seed=seed
    )


class Organ:
    """A built language organ: the network, the lexicon, and the bound
    perceptual assemblies."""

    def __init__(
        self,
        config: OrganConfig,
        lexicon: Lexicon,
        net: Network,
        assemblies: dict[tuple[str, int], Assembly],
        roles: RoleMap,
    ) -> None:
        self.config = config
        self.lexicon = lexicon
        self.net = net
        self.assemblies = assemblies
        self.roles = roles

    # -- assembly accessors -------------------------------------------------

    def phon_assembly(self, word: Word) -> Assembly:
        return self.assemblies[(PHON, word.word_id)]

    def ground_assembly(self, word: Word) -> Assembly:
        return self.assemblies[(self.roles.ground_area(word.pos), word.word_id)]

    def context_assembly(self, word: Word) -> Assembly | None:
        if word.context_index is None:
            return None
        return self.assemblies[(context_area(word.context_index), word.word_id)]

    def lex_area(self, word: Word) -> str:
        return self.roles.lex_area(word.pos)

    def other_lex_area(self, word: Word) -> str:
        return self.roles.other_lex_area(word.pos)

    def lex_areas(self) -> tuple[str, str]:
        return (self.roles.noun_lex, self.roles.verb_lex)

    # -- training stimuli ---------------------------------------------------

    def _grounding_clamps(self, *words: Word) -> dict[str, np.ndarray]:
        """Clamp map for the perceptual assemblies of the given words.  Two
        words sharing an extra context area fire the union of their
        assemblies there."""
        clamps: dict[str, list[int]] = {}
        for word in words:
            ground = self.ground_assembly(word)
            clamps.setdefault(ground.area_id, []).extend(ground.neurons)
            ctx = self.context_assembly(word)
            if ctx is not None:
                clamps.setdefault(ctx.area_id, []).extend(ctx.neurons)
        return {
            area: np.unique(np.asarray(ids, dtype=np.int64))
            for area, ids in clamps.items()
        }

    def _stage(self, clamps: Mapping[str, np.ndarray]) -> None:
        """Put the stimulus assemblies on stage: they are already firing
        when the first step of a presentation selects winners, so the first
        in-window cap is stimulus-driven rather than empty."""
        self.net.clear_state()
        for area_id, ids in clamps.items():
            self.net.set_winners(area_id, ids)

    def feed_sentence(
        self,
        sentence: Sentence,
        on_step: Callable[[int, FiringState], None] | None = None,
    ) -> None:
        """Present one grounded sentence: 2*tau plastic steps with every
        perceptual assembly clamped throughout, the first word's phonological
        assembly clamped for steps 1..tau and the second word's for steps
        tau+1..2*tau.  The stimuli are staged as the firing state before the
        first step.  All firing state is cleared afterwards, so sentences
        never leak activity into one another."""
        w1, w2 = sentence.words
        for word in (w1, w2):
            if (PHON, word.word_id) not in self.assemblies:
                raise ValueError(f"word {word.word_id} is not in this organ")
        grounding = self._grounding_clamps(w1, w2)
        tau = self.config.tau
        for step_index in range(1, 2 * tau + 1):
            spoken = w1 if step_index <= tau else w2
            clamps = dict(grounding)
            clamps[PHON] = self.phon_assembly(spoken).ids
            if step_index == 1:
                self._stage(clamps)
            state = self.net.step(clamps=clamps, plasticity=True)
            if on_step is not None:
                on_step(step_index, state)
        self.net.clear_state()

    def tutor_word(
        self,
        word: Word,
        on_step: Callable[[int, FiringState], None] | None = None,
    ) -> None:
        """Present one word in isolation: tau plastic steps with the word's
        phonological and perceptual assemblies clamped."""
        if (PHON, word.word_id) not in self.assemblies:
            raise ValueError(f"word {word.word_id} is not in this organ")
        clamps = self._grounding_clamps(word)
        clamps[PHON] = self.phon_assembly(word).ids
        self._stage(clamps)
        for step_index in range(1, self.config.tau + 1):
            state = self.net.step(clamps=clamps, plasticity=True)
            if on_step is not None:
                on_step(step_index, state)
        self.net.clear_state()

    # -- evaluation support ---------------------------------------------------

    def eval_clone(self) -> Network:
        """Copy-on-write clone used by plasticity-frozen evaluation.  Must be
        discarded before this organ trains again."""
        return self.net.clone(deep=False)

    def weight_checksum(self) -> tuple[int, float]:
        return self.net.weight_checksum()


def build_organ(
    config: OrganConfig,
    lexicon: Lexicon,
    roles: RoleMap | None = None,
) -> Organ:
    """Sample the organ's areas, fibers and pre-built assemblies.

    The phonological area holds one assembly per word, the visual/motor
    areas one per noun/verb, and each extra context area the assemblies of
    the words assigned to it.  The lexical areas start as untouched random
    graphs.  Assemblies are independent random cap-sized subsets, sampled on
    per-area streams so that two builds from one seed are identical.
    """
    roles = roles or RoleMap()
    C = lexicon.context_count
    net = Network(config.seed)

    def area_params(name: str) -> AreaParams:
        if name.startswith(CONTEXT_PREFIX):
            return replace(config.areas["CONTEXT"], area_id=name)
        return replace(config.areas[name], area_id=name)

    for name in (PHON, LEX_N, LEX_V, VISUAL, MOTOR):
        net.add_area(area_params(name), config.backend)
    for i in range(C):
        net.add_area(area_params(context_area(i)), config.backend)

    for lex in (LEX_N, LEX_V):
        net.add_fiber(PHON, lex)
        net.add_fiber(lex, PHON)
        net.add_recurrent(lex)
    for ground, lex in ((VISUAL, LEX_N), (MOTOR, LEX_V)):
        net.add_fiber(ground, lex)
        net.add_fiber(lex, ground)
    for i in range(C):
        for lex in (LEX_N, LEX_V):
            net.add_fiber(context_area(i), lex)
            net.add_fiber(lex, context_area(i))

    assemblies: dict[tuple[str, int], Assembly] = {}

    def bind(area_id: str, words: list[Word]) -> None:
        params = net.areas[area_id].params
        rng = derive_rng(config.seed, "assemblies", area_id)
        # word-id order keeps the draws stable under role mirroring
        for word in sorted(words, key=lambda w: w.word_id):
            ids = rng.choice(params.n, size=params.k, replace=False)
            asm = Assembly(
                area_id, tuple(int(i) for i in ids), label=f"{area_id}[{word.word_id}]"
            )
            assemblies[(area_id, word.word_id)] = asm
            net.set_winners(area_id, asm.ids)  # materialize lazily backed ids

    bind(PHON, list(lexicon.words))
    bind(roles.noun_ground, [w for w in lexicon.words if w.pos == NOUN])
    bind(roles.verb_ground, [w for w in lexicon.words if w.pos == VERB])
    for i in range(C):
        bind(
            context_area(i),
            [w for w in lexicon.words if w.context_index == i],
        )
    net.clear_state()
    return Organ(config, lexicon, net, assemblies, roles)
