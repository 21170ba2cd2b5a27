"""Core NEMO dynamics: random connectomes, k-cap selection, Hebbian plasticity.

A network is a set of brain areas joined by directed connectomes (one
recurrent graph per area that has one, plus fibers between areas).  Each
synchronous step sums the synaptic input every neuron receives from the
neurons that fired on the previous step, selects each free area's next firing
set with a k-cap, and multiplicatively strengthens the synapses from firing
neurons onto the new winners.  Areas can instead be clamped, forcing a
prescribed firing set while their incoming synapses keep learning.

Two connectome backends are supported:

  explicit -- every synapse is sampled up front into a dense weight matrix.
              Exact and simple; memory grows as n^2 per connectome.
  lazy     -- synapses are sampled on demand, the first time a neuron wins a
              cap.  Neurons that have never fired compete through exact draws
              from their binomial input distribution, so the dynamics are
              statistically identical to the explicit backend while memory
              stays proportional to the number of neurons that ever fired.

All randomness flows through named streams derived from a master seed, so
runs are reproducible and adding areas or connectomes never perturbs the
random draws of existing ones.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import binom

EXPLICIT = "explicit"
LAZY = "lazy"
BACKENDS = (EXPLICIT, LAZY)

_EMPTY_IDS = np.empty(0, dtype=np.int64)
_MIN_CAPACITY = 16


def derive_rng(master_seed: int, *tags: object) -> np.random.Generator:
    """Return a generator on an isolated stream keyed by (seed, tags).

    The tag tuple is hashed with blake2b, so streams for different purposes
    (or different connectomes) are independent and stable across runs and
    across unrelated changes to the network.
    """
    label = "/".join(str(t) for t in tags)
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=16).digest()
    words = tuple(
        int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)
    )
    entropy = (int(master_seed) % (1 << 63),) + words
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(master_seed: int, *tags: object) -> int:
    """Derive a child integer seed on the same keying scheme as derive_rng."""
    label = "/".join(str(t) for t in tags)
    payload = int(master_seed).to_bytes(16, "little", signed=True)
    digest = hashlib.blake2b(
        payload + label.encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") % (1 << 62)


def _clone_rng(rng: np.random.Generator) -> np.random.Generator:
    bg = rng.bit_generator
    fresh = type(bg)()
    fresh.state = bg.state
    return np.random.Generator(fresh)


@dataclass(frozen=True)
class AreaParams:
    """Static parameters of one brain area.

    Attributes:
      area_id: symbolic name, unique within a network.
      n: number of excitatory neurons.
      k: cap size, the number of neurons that fire per step.
      beta: Hebbian plasticity rate for synapses into this area.
      p: connection probability of incoming synapses.
    """

    area_id: str
    n: int
    k: int
    beta: float
    p: float

    def __post_init__(self) -> None:
        if not self.area_id:
            raise ValueError("area_id must be a non-empty string")
        if self.n < 1:
            raise ValueError(f"area {self.area_id!r}: n must be >= 1, got {self.n}")
        if not 1 <= self.k <= self.n:
            raise ValueError(
                f"area {self.area_id!r}: need 1 <= k <= n, got k={self.k}, n={self.n}"
            )
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(
                f"area {self.area_id!r}: p must be in [0, 1], got {self.p}"
            )
        if self.beta < 0.0:
            raise ValueError(
                f"area {self.area_id!r}: beta must be >= 0, got {self.beta}"
            )


@dataclass
class FiringState:
    """Winner sets of every area after one step, plus the step index.

    ``inputs`` is only populated when the step was asked to collect them; it
    maps area id to the synaptic input of each winner, aligned with the
    (ascending) winner id array.
    """

    winners: dict[str, np.ndarray]
    t: int
    inputs: dict[str, np.ndarray] | None = None


def _as_id_array(ids: Iterable[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids)
    if arr.size == 0:
        return _EMPTY_IDS
    arr = np.unique(arr.astype(np.int64))
    return arr


class Connectome:
    """Weighted directed synapse store between one ordered pair of areas.

    The weight matrix lives in *slot space*: row r is the r-th materialized
    source neuron, column c the c-th materialized destination neuron (for
    explicit areas, slots coincide with neuron ids).  Absent synapses are
    stored as 0; present synapses start at weight 1 and only ever grow.
    Arrays are over-allocated and grown geometrically so repeated
    materialization stays amortized-linear.
    """

    def __init__(
        self,
        src_id: str,
        dst_id: str,
        src_n: int,
        dst_n: int,
        p: float,
        backend: str,
        fill_rng: np.random.Generator,
        src_size: int = 0,
        dst_size: int = 0,
    ) -> None:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"connection probability must be in [0, 1], got {p}")
        if src_n < 1 or dst_n < 1:
            raise ValueError("connectome endpoints must have at least one neuron")
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
        self.src_id = src_id
        self.dst_id = dst_id
        self.src_n = src_n
        self.dst_n = dst_n
        self.p = p
        self.backend = backend
        self.recurrent = src_id == dst_id
        self.fill_rng = fill_rng
        self.src_size = src_size
        self.dst_size = dst_size
        self._owned = True
        if backend == EXPLICIT:
            self.src_size = src_n
            self.dst_size = dst_n
            self._W = (fill_rng.random((src_n, dst_n)) < p).astype(np.float64)
            if self.recurrent:
                np.fill_diagonal(self._W, 0.0)
        else:
            cap_s = max(_MIN_CAPACITY, src_size)
            cap_d = max(_MIN_CAPACITY, dst_size)
            self._W = np.zeros((cap_s, cap_d), dtype=np.float64)

    @property
    def weights(self) -> np.ndarray:
        """Logical weight matrix view (src_size x dst_size), zero = absent."""
        return self._W[: self.src_size, : self.dst_size]

    def ensure_owned(self) -> None:
        if not self._owned:
            self._W = self._W.copy()
            self._owned = True

    def _grow(self, axis: int, needed: int) -> None:
        if self._W.shape[axis] >= needed:
            return
        new_shape = list(self._W.shape)
        new_shape[axis] = max(needed, 2 * self._W.shape[axis])
        fresh = np.zeros(tuple(new_shape), dtype=np.float64)
        fresh[: self._W.shape[0], : self._W.shape[1]] = self._W
        self._W = fresh
        self._owned = True

    def extend_src(self, new_size: int) -> None:
        self._grow(0, new_size)
        self.src_size = new_size

    def extend_dst(self, new_size: int) -> None:
        self._grow(1, new_size)
        self.dst_size = new_size

    def synapse_count(self) -> int:
        return int(np.count_nonzero(self.weights))

    def weight_total(self) -> float:
        return float(self.weights.sum())

    def set_weight(self, src_slot: int, dst_slot: int, w: float) -> None:
        """Test/snapshot seam: place one synapse directly (slot space)."""
        if w <= 0:
            raise ValueError("synapse weights must be positive")
        self.ensure_owned()
        self._W[src_slot, dst_slot] = w

    def shallow_copy(self) -> "Connectome":
        dup = object.__new__(Connectome)
        dup.__dict__.update(self.__dict__)
        dup.fill_rng = _clone_rng(self.fill_rng)
        dup._owned = False
        return dup

    def deep_copy(self) -> "Connectome":
        dup = self.shallow_copy()
        dup._W = self._W.copy()
        dup._owned = True
        return dup


def sample_connectome(
    src_params: AreaParams,
    dst_params: AreaParams,
    backend: str = EXPLICIT,
    master_seed: int = 0,
) -> Connectome:
    """Sample the random synapse graph between two areas (or one area's
    recurrent graph, when both parameter blocks name the same area).

    The explicit backend materializes every synapse now, each ordered pair
    independently present with the destination area's connection probability
    and weight 1; recurrent graphs carry no self-synapses.  The lazy backend
    materializes nothing.
    """
    p = dst_params.p
    rng = derive_rng(
        master_seed, "connectome", src_params.area_id, dst_params.area_id, "fill"
    )
    return Connectome(
        src_params.area_id,
        dst_params.area_id,
        src_params.n,
        dst_params.n,
        p,
        backend,
        rng,
    )


def synaptic_inputs(
    dst_params: AreaParams,
    firing_sources: Sequence[tuple[Connectome, np.ndarray]],
) -> np.ndarray:
    """Sum synaptic input per destination neuron over all firing sources.

    Winner sets are given in slot space (equal to neuron ids for explicit
    connectomes).  The returned vector covers the destination's materialized
    slots; with an explicit backend that is every neuron in the area.
    """
    size = None
    for conn, _ in firing_sources:
        if conn.dst_id != dst_params.area_id or conn.dst_n != dst_params.n:
            raise ValueError(
                f"connectome {conn.src_id}->{conn.dst_id} does not target "
                f"area {dst_params.area_id!r} (n={dst_params.n})"
            )
        if size is None:
            size = conn.dst_size
        elif conn.dst_size != size:
            raise ValueError("firing sources disagree on destination size")
    if size is None:
        size = dst_params.n
    total = np.zeros(size, dtype=np.float64)
    for conn, winner_slots in firing_sources:
        slots = np.asarray(winner_slots, dtype=np.int64)
        if slots.size == 0:
            continue
        if slots.min() < 0 or slots.max() >= conn.src_size:
            raise ValueError("winner slot out of range for source area")
        total += conn._W[slots, : conn.dst_size].sum(axis=0)
    return total


def k_cap(inputs: np.ndarray, k: int) -> np.ndarray:
    """Select the k neurons with the largest strictly positive inputs.

    Neurons with zero input never win; if fewer than k neurons have positive
    input, exactly those are returned.  Ties at the selection boundary break
    toward the lowest neuron index.  The result is ascending.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if k < 0:
        raise ValueError("k must be >= 0")
    positive = np.flatnonzero(inputs > 0)
    if positive.size <= k:
        return positive.astype(np.int64)
    vals = inputs[positive]
    kth = np.partition(vals, vals.size - k)[vals.size - k]
    above = positive[vals > kth]
    need = k - above.size
    tied = positive[vals == kth][:need]
    return np.sort(np.concatenate((above, tied))).astype(np.int64)


def _k_cap_ids(
    ids: np.ndarray, vals: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """k_cap over (id, value) pairs with arbitrary id order.

    Assumes all values are strictly positive.  Returns (ids, values) sorted
    by ascending id; boundary ties break toward the lowest id.
    """
    if ids.size <= k:
        order = np.argsort(ids)
        return ids[order], vals[order]
    kth = np.partition(vals, vals.size - k)[vals.size - k]
    above = np.flatnonzero(vals > kth)
    need = k - above.size
    tied = np.flatnonzero(vals == kth)
    if need < tied.size:
        tied = tied[np.argsort(ids[tied], kind="stable")[:need]]
    chosen = np.concatenate((above, tied))
    order = np.argsort(ids[chosen])
    chosen = chosen[order]
    return ids[chosen], vals[chosen]


_PMF_CACHE: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}


def _binom_pmf_cdf(trials: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    key = (trials, p)
    hit = _PMF_CACHE.get(key)
    if hit is None:
        xs = np.arange(trials + 1)
        pmf = binom.pmf(xs, trials, p)
        cdf = np.cumsum(pmf)
        hit = (pmf, cdf)
        if len(_PMF_CACHE) > 256:
            _PMF_CACHE.clear()
        _PMF_CACHE[key] = hit
    return hit


def top_binomial_draws(
    population: int,
    trials: int,
    p: float,
    quota: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exact top order statistics of ``population`` iid Binomial(trials, p)
    draws, without drawing the population.

    Walks the value range downward.  Conditioned on everything counted so
    far, the draws still unaccounted for are distributed below the current
    value, so the number landing exactly on it is Binomial(remaining,
    pmf(x) / cdf(x)).  Stops once ``quota`` values are collected.  Zero
    draws are never returned.  Output is descending.
    """
    if population <= 0 or trials <= 0 or quota <= 0 or p <= 0.0:
        return np.empty(0, dtype=np.float64)
    pmf, cdf = _binom_pmf_cdf(trials, p)
    out: list[float] = []
    remaining = population
    for x in range(trials, 0, -1):
        denom = cdf[x]
        if denom <= 0.0:
            break
        ratio = pmf[x] / denom
        if ratio >= 1.0:
            count = remaining
        else:
            count = int(rng.binomial(remaining, ratio))
        if count:
            take = min(count, quota - len(out))
            out.extend([float(x)] * take)
            remaining -= count
        if len(out) >= quota or remaining <= 0:
            break
    return np.asarray(out, dtype=np.float64)


def lazy_candidates(
    connectome: Connectome,
    total_firing_count: int,
    current_support: Sequence[int] | int,
    quota: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Prospective inputs for the best not-yet-materialized destination
    neurons of a lazy connectome.

    Statistically equivalent to giving each unmaterialized neuron an input
    drawn Binomial(total_firing_count, p) and keeping the top ``quota``
    strictly positive draws; implemented through exact order statistics so
    the population is never enumerated.  Values are returned descending; the
    caller assigns neuron ids and fixes the synapses of any winners.
    """
    if connectome.backend != LAZY:
        raise ValueError("lazy_candidates requires a lazy-backend connectome")
    support_size = (
        current_support
        if isinstance(current_support, int)
        else len(current_support)
    )
    population = connectome.dst_n - support_size
    return top_binomial_draws(
        population, total_firing_count, connectome.p, quota, rng
    )


def apply_plasticity(
    connectome: Connectome,
    pre_winners: np.ndarray,
    post_winners: np.ndarray,
    beta: float,
) -> None:
    """Multiply by (1 + beta) every existing synapse from a neuron that fired
    at t onto a neuron that fired at t + 1.  Slot space; absent synapses
    (stored as 0) are unaffected.
    """
    pre = np.asarray(pre_winners, dtype=np.int64)
    post = np.asarray(post_winners, dtype=np.int64)
    if pre.size == 0 or post.size == 0 or beta == 0.0:
        return
    connectome.ensure_owned()
    connectome._W[np.ix_(pre, post)] *= 1.0 + beta


class AreaState:
    """Dynamic state of one area inside a network: the materialized support,
    the current winner set, and the area's recruitment random stream."""

    def __init__(
        self, params: AreaParams, backend: str, master_seed: int
    ) -> None:
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
        self.params = params
        self.backend = backend
        self.winners = _EMPTY_IDS
        self.recruit_rng = derive_rng(master_seed, "area", params.area_id, "recruit")
        if backend == EXPLICIT:
            self.support_len = params.n
            self._support_ids = None  # identity mapping
            self._slot_of: dict[int, int] | None = None
        else:
            self.support_len = 0
            self._support_ids = np.zeros(_MIN_CAPACITY, dtype=np.int64)
            self._slot_of = {}

    @property
    def support_ids(self) -> np.ndarray:
        if self.backend == EXPLICIT:
            return np.arange(self.params.n, dtype=np.int64)
        return self._support_ids[: self.support_len]

    def slots_of(self, ids: np.ndarray) -> np.ndarray:
        if ids.size and (ids.min() < 0 or ids.max() >= self.params.n):
            raise ValueError(
                f"neuron id out of range for area {self.params.area_id!r}"
            )
        if self.backend == EXPLICIT:
            return ids
        lookup = self._slot_of
        try:
            return np.fromiter(
                (lookup[int(i)] for i in ids), dtype=np.int64, count=ids.size
            )
        except KeyError as exc:
            raise ValueError(
                f"neuron {exc.args[0]} of area {self.params.area_id!r} has no "
                "materialized synapses; it cannot fire"
            ) from None

    def is_materialized(self, ids: np.ndarray) -> np.ndarray:
        if self.backend == EXPLICIT:
            return np.ones(ids.size, dtype=bool)
        lookup = self._slot_of
        return np.fromiter(
            (int(i) in lookup for i in ids), dtype=bool, count=ids.size
        )

    def add_support(self, neuron_id: int) -> int:
        """Register a first-time winner; returns its new slot."""
        slot = self.support_len
        if self._support_ids.shape[0] <= slot:
            fresh = np.zeros(
                max(2 * self._support_ids.shape[0], slot + 1), dtype=np.int64
            )
            fresh[:slot] = self._support_ids[:slot]
            self._support_ids = fresh
        self._support_ids[slot] = neuron_id
        self._slot_of[int(neuron_id)] = slot
        self.support_len = slot + 1
        return slot

    def _copy(self) -> "AreaState":
        dup = object.__new__(AreaState)
        dup.params = self.params
        dup.backend = self.backend
        dup.winners = self.winners
        dup.recruit_rng = _clone_rng(self.recruit_rng)
        dup.support_len = self.support_len
        if self.backend == EXPLICIT:
            dup._support_ids = None
            dup._slot_of = None
        else:
            dup._support_ids = self._support_ids.copy()
            dup._slot_of = dict(self._slot_of)
        return dup


class Network:
    """A collection of areas and connectomes advanced by synchronous steps.

    Single-threaded by design: plasticity writes are order dependent, so one
    instance must never be stepped concurrently.  Instances are cheap to
    clone for read-only evaluation and are freely transferable between
    threads.
    """

    def __init__(self, master_seed: int = 0) -> None:
        self.master_seed = int(master_seed)
        self.areas: dict[str, AreaState] = {}
        self.connectomes: dict[tuple[str, str], Connectome] = {}
        self.t = 0
        self._into: dict[str, list[tuple[str, str]]] = {}
        self._out_of: dict[str, list[tuple[str, str]]] = {}

    # -- construction -----------------------------------------------------

    def add_area(self, params: AreaParams, backend: str = LAZY) -> AreaState:
        if params.area_id in self.areas:
            raise ValueError(f"area {params.area_id!r} already exists")
        state = AreaState(params, backend, self.master_seed)
        self.areas[params.area_id] = state
        self._into[params.area_id] = []
        self._out_of[params.area_id] = []
        return state

    def _register(self, conn: Connectome) -> Connectome:
        key = (conn.src_id, conn.dst_id)
        if key in self.connectomes:
            raise ValueError(f"connectome {key} already exists")
        self.connectomes[key] = conn
        self._into[conn.dst_id].append(key)
        self._into[conn.dst_id].sort()
        self._out_of[conn.src_id].append(key)
        self._out_of[conn.src_id].sort()
        return conn

    def add_fiber(self, src_id: str, dst_id: str) -> Connectome:
        """Add one directed bundle of random synapses from src to dst."""
        if src_id not in self.areas or dst_id not in self.areas:
            raise ValueError(f"unknown area in fiber {src_id!r}->{dst_id!r}")
        if src_id == dst_id:
            raise ValueError("use add_recurrent for a within-area graph")
        src = self.areas[src_id]
        dst = self.areas[dst_id]
        backend = (
            EXPLICIT
            if src.backend == EXPLICIT and dst.backend == EXPLICIT
            else LAZY
        )
        conn = Connectome(
            src_id,
            dst_id,
            src.params.n,
            dst.params.n,
            dst.params.p,
            backend,
            derive_rng(self.master_seed, "connectome", src_id, dst_id, "fill"),
            src_size=src.support_len,
            dst_size=dst.support_len,
        )
        if backend == LAZY and (src.support_len or dst.support_len):
            self._backfill(conn)
        return self._register(conn)

    def add_recurrent(self, area_id: str) -> Connectome:
        if area_id not in self.areas:
            raise ValueError(f"unknown area {area_id!r}")
        st = self.areas[area_id]
        conn = Connectome(
            area_id,
            area_id,
            st.params.n,
            st.params.n,
            st.params.p,
            st.backend,
            derive_rng(self.master_seed, "connectome", area_id, area_id, "fill"),
            src_size=st.support_len,
            dst_size=st.support_len,
        )
        if conn.backend == LAZY and st.support_len:
            self._backfill(conn)
        return self._register(conn)

    def _backfill(self, conn: Connectome) -> None:
        # Fibers added after some support already exists (snapshot restore,
        # incremental construction): sample the pairs both sides have.
        conn._grow(0, max(conn.src_size, _MIN_CAPACITY))
        conn._grow(1, max(conn.dst_size, _MIN_CAPACITY))
        if conn.src_size and conn.dst_size:
            block = (
                conn.fill_rng.random((conn.src_size, conn.dst_size)) < conn.p
            ).astype(np.float64)
            if conn.recurrent:
                np.fill_diagonal(block, 0.0)
            conn._W[: conn.src_size, : conn.dst_size] = block

    # -- state ------------------------------------------------------------

    def winners(self, area_id: str) -> np.ndarray:
        return self.areas[area_id].winners.copy()

    def clear_state(self) -> None:
        """Silence every area (winner sets only; weights are untouched)."""
        for st in self.areas.values():
            st.winners = _EMPTY_IDS

    def set_winners(self, area_id: str, ids: Iterable[int] | np.ndarray) -> None:
        """Force an area's current firing set, materializing as needed."""
        st = self.areas.get(area_id)
        if st is None:
            raise ValueError(f"unknown area {area_id!r}")
        arr = _as_id_array(ids)
        if arr.size and (arr.min() < 0 or arr.max() >= st.params.n):
            raise ValueError(f"neuron id out of range for area {area_id!r}")
        self._materialize_plain(area_id, arr)
        st.winners = arr

    def _materialize_plain(self, area_id: str, ids: np.ndarray) -> None:
        st = self.areas[area_id]
        if st.backend == EXPLICIT or ids.size == 0:
            return
        fresh = ids[~st.is_materialized(ids)]
        for nid in fresh:
            self._materialize_neuron(area_id, int(nid), None, None)

    # -- stepping ---------------------------------------------------------

    def step(
        self,
        clamps: Mapping[str, np.ndarray] | None = None,
        plasticity: bool = True,
        targets: Iterable[str] | None = None,
        collect_inputs: bool = False,
    ) -> FiringState:
        """Advance the network one synchronous step.

        Clamped areas fire exactly their clamp (incoming input is ignored for
        selection, but their incoming synapses still learn).  Free areas fire
        the k-cap of their summed synaptic input; with ``targets`` given,
        free areas outside the target set simply fall silent, which readout
        paths use to avoid computing caps nobody reads.
        """
        clamp_map: dict[str, np.ndarray] = {}
        for area_id, ids in (clamps or {}).items():
            st = self.areas.get(area_id)
            if st is None:
                raise ValueError(f"unknown area {area_id!r} in clamps")
            arr = _as_id_array(ids)
            if arr.size == 0:
                raise ValueError(f"empty clamp for area {area_id!r}")
            if arr.min() < 0 or arr.max() >= st.params.n:
                raise ValueError(f"clamp id out of range for area {area_id!r}")
            clamp_map[area_id] = arr

        target_set = set(targets) if targets is not None else None
        prev = {aid: st.winners for aid, st in self.areas.items()}
        new_winners: dict[str, np.ndarray] = {}
        new_inputs: dict[str, np.ndarray] = {}
        pending: list[tuple[str, int, float, list[tuple[Connectome, np.ndarray]]]] = []

        for area_id in sorted(self.areas):
            st = self.areas[area_id]
            if area_id in clamp_map:
                new_winners[area_id] = clamp_map[area_id]
                continue
            if target_set is not None and area_id not in target_set:
                new_winners[area_id] = _EMPTY_IDS
                continue
            firing: list[tuple[Connectome, np.ndarray]] = []
            total_firing = 0
            for key in self._into[area_id]:
                conn = self.connectomes[key]
                src_prev = prev[conn.src_id]
                if src_prev.size == 0:
                    continue
                slots = self.areas[conn.src_id].slots_of(src_prev)
                firing.append((conn, slots))
                total_firing += src_prev.size
            if not firing:
                new_winners[area_id] = _EMPTY_IDS
                if collect_inputs:
                    new_inputs[area_id] = np.empty(0, dtype=np.float64)
                continue

            support_vals = np.zeros(st.support_len, dtype=np.float64)
            for conn, slots in firing:
                if st.support_len:
                    support_vals += conn._W[slots, : st.support_len].sum(axis=0)

            cand_ids = _EMPTY_IDS
            cand_vals = np.empty(0, dtype=np.float64)
            if st.backend == LAZY and st.support_len < st.params.n:
                quota = min(st.params.k, st.params.n - st.support_len)
                cand_vals = top_binomial_draws(
                    st.params.n - st.support_len,
                    total_firing,
                    st.params.p,
                    quota,
                    st.recruit_rng,
                )
                cand_ids = self._sample_unexplored(st, cand_vals.size)

            positive = support_vals > 0
            merged_ids = np.concatenate((st.support_ids[positive], cand_ids))
            merged_vals = np.concatenate((support_vals[positive], cand_vals))
            ids_sel, vals_sel = _k_cap_ids(merged_ids, merged_vals, st.params.k)
            new_winners[area_id] = ids_sel
            if collect_inputs:
                new_inputs[area_id] = vals_sel
            if cand_ids.size:
                won = np.isin(ids_sel, cand_ids)
                if won.any():
                    value_of = dict(zip(cand_ids.tolist(), cand_vals.tolist()))
                    for nid in ids_sel[won]:
                        pending.append(
                            (area_id, int(nid), value_of[int(nid)], firing)
                        )

        for area_id, nid, value, firing in pending:
            self._materialize_neuron(area_id, nid, value, firing)
        for area_id, arr in clamp_map.items():
            self._materialize_plain(area_id, arr)

        if plasticity:
            for key in sorted(self.connectomes):
                conn = self.connectomes[key]
                pre = prev[conn.src_id]
                post = new_winners[conn.dst_id]
                if pre.size == 0 or post.size == 0:
                    continue
                beta = self.areas[conn.dst_id].params.beta
                if beta == 0.0:
                    continue
                pre_slots = self.areas[conn.src_id].slots_of(pre)
                post_slots = self.areas[conn.dst_id].slots_of(post)
                apply_plasticity(conn, pre_slots, post_slots, beta)

        for area_id, arr in new_winners.items():
            self.areas[area_id].winners = arr
        self.t += 1
        return FiringState(
            {aid: arr.copy() for aid, arr in new_winners.items()},
            self.t,
            new_inputs if collect_inputs else None,
        )

    def _sample_unexplored(self, st: AreaState, count: int) -> np.ndarray:
        """Draw ``count`` distinct neuron ids outside the support, uniformly."""
        if count == 0:
            return _EMPTY_IDS
        rng = st.recruit_rng
        n = st.params.n
        unexplored = n - st.support_len
        if unexplored <= 4 * count + 64:
            # support nearly full: rejection would thrash, enumerate instead
            pool = np.setdiff1d(
                np.arange(n, dtype=np.int64), st.support_ids, assume_unique=False
            )
            pick = rng.choice(pool.size, size=count, replace=False)
            return pool[pick]
        taken = st._slot_of
        chosen: list[int] = []
        seen: set[int] = set()
        while len(chosen) < count:
            draw = rng.integers(0, n, size=2 * (count - len(chosen)) + 8)
            for nid in draw.tolist():
                if nid in taken or nid in seen:
                    continue
                seen.add(nid)
                chosen.append(nid)
                if len(chosen) == count:
                    break
        return np.asarray(chosen, dtype=np.int64)

    def _materialize_neuron(
        self,
        area_id: str,
        neuron_id: int,
        value: float | None,
        firing: list[tuple[Connectome, np.ndarray]] | None,
    ) -> None:
        """Fix the synapses of a first-time winner.

        A winner recruited by input carries the binomial draw ``value``: that
        many synapses from the currently firing presynaptic neurons, placed
        uniformly across them; synapses from every other materialized neuron
        are sampled fresh at the connection probability.  Each ordered pair
        is decided exactly once, here or when the counterpart materializes.
        """
        st = self.areas[area_id]
        slot = st.add_support(neuron_id)

        for key in self._into[area_id]:
            self.connectomes[key].extend_dst(st.support_len)
        for key in self._out_of[area_id]:
            self.connectomes[key].extend_src(st.support_len)

        fired_by_conn: dict[tuple[str, str], np.ndarray] = {}
        chosen_by_conn: dict[tuple[str, str], np.ndarray] = {}
        if value is not None and firing:
            sizes = [slots.size for _, slots in firing]
            total = int(sum(sizes))
            picks = st.recruit_rng.choice(total, size=int(value), replace=False)
            offsets = np.cumsum([0] + sizes)
            for (conn, slots), lo, hi in zip(firing, offsets[:-1], offsets[1:]):
                local = picks[(picks >= lo) & (picks < hi)] - lo
                fired_by_conn[(conn.src_id, conn.dst_id)] = slots
                chosen_by_conn[(conn.src_id, conn.dst_id)] = slots[local]

        for key in self._into[area_id]:
            conn = self.connectomes[key]
            conn.ensure_owned()
            col = conn._W[: conn.src_size, slot]
            col[:] = 0.0  # buffers may hold stale cells past a clone's view
            fresh = np.ones(conn.src_size, dtype=bool)
            if key in fired_by_conn:
                # synapses from firing pres were decided by the input draw:
                # the chosen ones exist, the rest are absent
                fresh[fired_by_conn[key]] = False
                col[chosen_by_conn[key]] = 1.0
            if conn.recurrent:
                fresh[slot] = False
            m = int(fresh.sum())
            if m:
                col[fresh] = conn.fill_rng.random(m) < conn.p

        for key in self._out_of[area_id]:
            conn = self.connectomes[key]
            conn.ensure_owned()
            row = conn._W[slot, : conn.dst_size]
            row[:] = 0.0
            fresh = np.ones(conn.dst_size, dtype=bool)
            if conn.recurrent:
                fresh[slot] = False  # no self-synapse
            m = int(fresh.sum())
            if m:
                row[fresh] = conn.fill_rng.random(m) < conn.p

    # -- bookkeeping --------------------------------------------------------

    def weight_checksum(self) -> tuple[int, float]:
        """(synapse count, total weight) over every connectome; exact match
        of the pair is the purity check used by evaluation."""
        count = 0
        total = 0.0
        for key in sorted(self.connectomes):
            conn = self.connectomes[key]
            count += conn.synapse_count()
            total += conn.weight_total()
        return count, total

    def synapse_triples(
        self, key: tuple[str, str]
    ) -> list[tuple[int, int, float]]:
        """Present synapses of one connectome as (src id, dst id, weight),
        sorted by (src id, dst id)."""
        conn = self.connectomes[key]
        rows, cols = np.nonzero(conn.weights)
        src_ids = self.areas[conn.src_id].support_ids[rows]
        dst_ids = self.areas[conn.dst_id].support_ids[cols]
        ws = conn.weights[rows, cols]
        order = np.lexsort((dst_ids, src_ids))
        return [
            (int(src_ids[i]), int(dst_ids[i]), float(ws[i])) for i in order
        ]

    def clone(self, deep: bool = True) -> "Network":
        """Duplicate the network.

        With ``deep=False`` weight buffers are shared copy-on-write: the
        clone copies a buffer the first time it grows its support, which
        makes read-mostly evaluation clones nearly free.  A shallow clone
        must be dropped before the source network trains again.
        """
        dup = Network(self.master_seed)
        dup.t = self.t
        dup.areas = {aid: st._copy() for aid, st in self.areas.items()}
        dup.connectomes = {
            key: (conn.deep_copy() if deep else conn.shallow_copy())
            for key, conn in self.connectomes.items()
        }
        dup._into = {aid: list(keys) for aid, keys in self._into.items()}
        dup._out_of = {aid: list(keys) for aid, keys in self._out_of.items()}
        return dup
