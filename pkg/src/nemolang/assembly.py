"""Assembly-level operations: projection to convergence, overlap, and
plasticity-frozen readout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import LAZY, AreaParams, Network, derive_seed

DEFAULT_CONVERGENCE_THRESHOLD = 0.95
DEFAULT_MAX_STEPS = 50


@dataclass(frozen=True)
class Assembly:
    """A named firing pattern: one area plus exactly k neuron indices."""

    area_id: str
    neurons: tuple[int, ...]
    label: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "neurons", tuple(sorted(int(i) for i in self.neurons))
        )

    @property
    def ids(self) -> np.ndarray:
        return np.asarray(self.neurons, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.neurons)


@dataclass
class ConvergenceTrace:
    """Consecutive-cap overlaps of a projection, and when (if) it settled."""

    overlaps: list[float]
    converged_at: int | None


def overlap(a: Assembly, b: Assembly) -> float:
    """Fraction of shared neurons, |a ∩ b| / k."""
    if a.area_id != b.area_id:
        raise ValueError(
            f"overlap between different areas: {a.area_id!r} vs {b.area_id!r}"
        )
    if len(a) != len(b):
        raise ValueError("overlap requires equal assembly sizes")
    if len(a) == 0:
        return 0.0
    return len(set(a.neurons) & set(b.neurons)) / len(a)


def overlap_ids(a: np.ndarray, b: np.ndarray, k: int) -> float:
    """Overlap of two raw winner-id arrays against a cap size k."""
    if k <= 0:
        return 0.0
    return np.intersect1d(a, b, assume_unique=True).size / k


def make_projection_network(
    n: int,
    k: int,
    p: float,
    beta: float,
    backend: str = LAZY,
    master_seed: int = 0,
    stim_area: str = "STIM",
    target_area: str = "TARGET",
) -> Network:
    """Two-area network for projection experiments: a stimulus area with a
    fiber into a recurrently connected target."""
    net = Network(master_seed)
    net.add_area(AreaParams(stim_area, n, k, beta, p), backend)
    net.add_area(AreaParams(target_area, n, k, beta, p), backend)
    net.add_fiber(stim_area, target_area)
    net.add_recurrent(target_area)
    return net


def random_assembly(
    area_params: AreaParams, master_seed: int, tag: object = "stimulus"
) -> Assembly:
    """A uniformly random k-subset of an area, on its own seed stream."""
    rng_seed = derive_seed(master_seed, "assembly", area_params.area_id, tag)
    rng = np.random.default_rng(rng_seed)
    ids = rng.choice(area_params.n, size=area_params.k, replace=False)
    return Assembly(area_params.area_id, tuple(ids), label=str(tag))


def project(
    network: Network,
    stimulus: Assembly,
    target_area: str,
    max_steps: int = DEFAULT_MAX_STEPS,
    convergence_threshold: float = DEFAULT_CONVERGENCE_THRESHOLD,
) -> tuple[Assembly, ConvergenceTrace]:
    """Clamp ``stimulus`` every step and let the target evolve (fiber plus
    recurrent input, plasticity on) until consecutive caps overlap at least
    ``convergence_threshold``.

    Returns the final cap and the overlap trace.  Running out of steps is
    not an error; the trace simply reports ``converged_at = None``.
    """
    if (stimulus.area_id, target_area) not in network.connectomes:
        raise ValueError(
            f"no fiber from {stimulus.area_id!r} to {target_area!r}"
        )
    k = network.areas[target_area].params.k
    network.clear_state()
    network.set_winners(stimulus.area_id, stimulus.ids)  # on stage at t=0
    clamps = {stimulus.area_id: stimulus.ids}
    prev_cap: np.ndarray | None = None
    overlaps: list[float] = []
    converged_at: int | None = None
    cap = np.empty(0, dtype=np.int64)
    for step_index in range(1, max_steps + 1):
        state = network.step(clamps=clamps, plasticity=True,
                             targets={target_area})
        cap = state.winners[target_area]
        if prev_cap is not None:
            ov = overlap_ids(prev_cap, cap, k)
            overlaps.append(ov)
            if ov >= convergence_threshold:
                converged_at = step_index
                break
        prev_cap = cap
    return (
        Assembly(target_area, tuple(cap), label=stimulus.label),
        ConvergenceTrace(overlaps, converged_at),
    )


def readout(
    network: Network, fire: Sequence[Assembly], target_area: str
) -> np.ndarray:
    """One plasticity-frozen step in which only the listed assemblies fire;
    returns the target area's resulting cap.

    The network is left bit-identical: the step runs on a throwaway clone,
    so neither weights nor supports of the original change.  A target with
    no incoming fiber from any fired area yields an empty cap.
    """
    if target_area not in network.areas:
        raise ValueError(f"unknown area {target_area!r}")
    probe = network.clone(deep=False)
    probe.clear_state()
    by_area: dict[str, list[int]] = {}
    for asm in fire:
        by_area.setdefault(asm.area_id, []).extend(asm.neurons)
    for area_id, ids in by_area.items():
        probe.set_winners(area_id, ids)
    state = probe.step(clamps=None, plasticity=False, targets={target_area})
    return state.winners[target_area]
