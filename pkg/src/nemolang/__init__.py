"""NEMO assembly-dynamics simulator and grounded word-learning experiments."""

from .assembly import (
    Assembly,
    ConvergenceTrace,
    make_projection_network,
    overlap,
    project,
    random_assembly,
    readout,
)
from .criteria import (
    CriteriaThresholds,
    SuccessReport,
    WordReport,
    check_P,
    check_Q1,
    check_Q2,
    check_Q3,
    check_success,
)
from .dynamics import (
    EXPLICIT,
    LAZY,
    AreaParams,
    Connectome,
    FiringState,
    Network,
    apply_plasticity,
    derive_rng,
    derive_seed,
    k_cap,
    lazy_candidates,
    sample_connectome,
    synaptic_inputs,
    top_binomial_draws,
)
from .harness import (
    AggregateStats,
    ExperimentConfig,
    SweepResult,
    TrialResult,
    aggregate,
    run_trials,
    sweep_beta,
    sweep_lexicon,
    sweep_tutoring,
    train_until_success,
)
from .language import (
    NOUN,
    SV,
    VERB,
    VS,
    Lexicon,
    Sentence,
    Word,
    build_lexicon,
    sample_sentence,
)
from .organ import (
    Organ,
    OrganConfig,
    RoleMap,
    build_organ,
    uniform_organ_config,
)
from .snapshot import load_network, save_network

__version__ = "0.1.0"
