"""Ensemble engine: L parallel time-inhomogeneous chains tracking a stream of posteriors.

At every data step the engine applies the jumping kernel once to each chain (which
only *appends* coordinates for the new data) and then the transition kernel
repeatedly.  After each sweep the across-chain autocorrelation between the current
states and the post-jump states is computed; sweeping stops as soon as it drops to
``1 - epsilon`` (subject to ``m_min`` / ``m_cap``).

Chains are stored block-wise: every named block is an ``(L, len)`` array whose row
``l`` belongs to chain ``l``.  Kernels receive a contiguous group of rows together
with the matching per-chain random generators.  The partition of chains into groups
is fixed by ``chunk_size`` and never depends on the number of workers, so results are
bit-identical whatever the thread count.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .diagnostics import cross_chain_acf

log = logging.getLogger(__name__)

__all__ = [
    "ConfigurationError",
    "ObservationError",
    "ParameterVector",
    "Ensemble",
    "KernelSuite",
    "ScheduleConfig",
    "StepRecord",
    "RunReport",
    "ModelPlugin",
    "spawn_generators",
    "init_ensemble",
    "advance_step",
    "run_stream",
    "uniform_batches",
]

Blocks = dict[str, np.ndarray]
BatchKernel = Callable[[Mapping[str, np.ndarray], Sequence[np.random.Generator]], Blocks]


class ConfigurationError(ValueError):
    """Invalid run or schedule configuration."""


class ObservationError(ValueError):
    """A model rejected an observation batch."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


# --------------------------------------------------------------------------- types


@dataclass(frozen=True)
class ParameterVector:
    """The state of a single chain: an ordered list of named real blocks.

    Instances are immutable; :meth:`append` returns a new vector whose existing
    coordinates are the same objects as before.
    """

    blocks: tuple[tuple[str, np.ndarray], ...] = ()

    def __post_init__(self):
        names = [name for name, _ in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate block names in {names}")
        for name, values in self.blocks:
            if np.ndim(values) != 1:
                raise ValueError(f"block {name!r} must be one-dimensional")

    @classmethod
    def from_dict(cls, blocks: Mapping[str, Any]) -> "ParameterVector":
        return cls(tuple((k, np.atleast_1d(np.asarray(v))) for k, v in blocks.items()))

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.blocks]

    @property
    def dim(self) -> int:
        return sum(len(v) for _, v in self.blocks)

    def __getitem__(self, name: str) -> np.ndarray:
        for key, values in self.blocks:
            if key == name:
                return values
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(key == name for key, _ in self.blocks)

    def as_dict(self) -> dict[str, np.ndarray]:
        return dict(self.blocks)

    def append(self, name: str, values) -> "ParameterVector":
        """Append coordinates, extending block ``name`` or creating it at the end."""
        values = np.atleast_1d(np.asarray(values))
        if name in self:
            new = tuple(
                (k, np.concatenate([v, values.astype(v.dtype, copy=False)]) if k == name else v)
                for k, v in self.blocks
            )
        else:
            new = self.blocks + ((name, values),)
        return ParameterVector(new)

    def flat(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate([np.asarray(v, dtype=float) for _, v in self.blocks])


@dataclass
class Ensemble:
    """``L`` chain states sharing one block structure, plus their random streams."""

    blocks: Blocks
    rngs: list[np.random.Generator]
    t: int = 0
    s: int = 1
    history: list[int] = field(default_factory=list)

    def __post_init__(self):
        L = len(self.rngs)
        if L < 2:
            raise ConfigurationError(f"an ensemble needs L >= 2 chains, got {L}")
        for name, arr in self.blocks.items():
            if arr.ndim != 2 or arr.shape[0] != L:
                raise ValueError(f"block {name!r} has shape {arr.shape}, expected ({L}, k)")
        if len(self.history) != self.t:
            raise ValueError("history length must equal t")

    @property
    def L(self) -> int:
        return len(self.rngs)

    @property
    def dim(self) -> int:
        return sum(a.shape[1] for a in self.blocks.values())

    def state(self, l: int) -> ParameterVector:
        return ParameterVector(tuple((k, v[l].copy()) for k, v in self.blocks.items()))

    @property
    def states(self) -> list[ParameterVector]:
        return [self.state(l) for l in range(self.L)]

    def component(self, name: str, index: int) -> np.ndarray:
        return self.blocks[name][:, index]


@dataclass(frozen=True)
class ScheduleConfig:
    """Stopping rule and batching for the data-step loop."""

    epsilon: float = 0.5
    m_cap: int = 2000
    m_min: int = 2
    diag_stride: int = 1
    batch_sizes: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.m_min < 1:
            raise ConfigurationError("m_min must be >= 1")
        if self.m_min > self.m_cap:
            raise ConfigurationError("m_min must not exceed m_cap")
        if self.diag_stride < 1:
            raise ConfigurationError("diag_stride must be >= 1")
        if any(int(b) < 1 for b in self.batch_sizes):
            raise ConfigurationError("batch sizes must be >= 1")
        object.__setattr__(self, "batch_sizes", tuple(int(b) for b in self.batch_sizes))


def uniform_batches(n: int, batch_size: int) -> tuple[int, ...]:
    """Split ``n`` observations into ``ceil(n / batch_size)`` steps.

    The remainder goes into the *first* step, so the data horizon after step ``t``
    of ``T`` is ``n - batch_size * (T - t)``.
    """
    if n < 1 or batch_size < 1:
        raise ConfigurationError("n and batch_size must be positive")
    T = math.ceil(n / batch_size)
    first = n - batch_size * (T - 1)
    return (first,) + (batch_size,) * (T - 1)


@dataclass
class KernelSuite:
    """Jumping and transition kernels bound to the data observed so far.

    Both kernels act on a group of chains at once: they receive a mapping of
    ``(rows, len)`` block arrays and one generator per row, and must consume
    randomness for row ``i`` only from ``rngs[i]``.

    ``jump`` returns only the *new* coordinates (a dict of ``(rows, k)`` arrays); the
    engine appends them, so existing coordinates can never be altered by a jump.
    ``transit`` returns the full updated block dict with unchanged shapes.
    """

    jump: BatchKernel
    transit: BatchKernel
    diag_components: list[tuple[str, int]]
    data_horizon: int

    @classmethod
    def from_chain_kernels(
        cls,
        jump: Callable[[ParameterVector, np.random.Generator], ParameterVector],
        transit: Callable[[ParameterVector, np.random.Generator], ParameterVector],
        diag_components: list[tuple[str, int]],
        data_horizon: int,
    ) -> "KernelSuite":
        """Lift single-chain kernels ``(ParameterVector, rng) -> ParameterVector``."""

        def _rows(blocks, i):
            return ParameterVector(tuple((k, np.asarray(v[i])) for k, v in blocks.items()))

        def batch_jump(blocks, rngs):
            outs = []
            for i, rng in enumerate(rngs):
                before = _rows(blocks, i)
                after = jump(before, rng)
                ext = {}
                for name, values in after.blocks:
                    if name in before:
                        old = before[name]
                        if len(values) < len(old) or not np.array_equal(values[: len(old)], old):
                            raise RuntimeError(f"jump modified existing block {name!r}")
                        ext[name] = np.asarray(values[len(old) :])
                    else:
                        ext[name] = np.asarray(values)
                outs.append(ext)
            return {k: np.stack([o[k] for o in outs]) for k in outs[0]}

        def batch_transit(blocks, rngs):
            outs = [transit(_rows(blocks, i), rng).as_dict() for i, rng in enumerate(rngs)]
            return {k: np.stack([o[k] for o in outs]) for k in blocks}

        return cls(batch_jump, batch_transit, diag_components, data_horizon)


class ModelPlugin(Protocol):
    """What :func:`run_stream` needs from a model.

    ``make_suite(prefix, new)`` is called once per data step with all observations
    seen so far (``prefix``, including ``new``) and the newly arrived batch.
    """

    def prior_sampler(self, rng: np.random.Generator) -> ParameterVector: ...

    def validate(self, batch: Any) -> None: ...

    def make_suite(self, prefix: Any, new: Any) -> KernelSuite: ...

    def summarize(self, ens: Ensemble) -> dict[str, float]: ...


@dataclass
class StepRecord:
    t: int
    data_horizon: int
    m: int
    capped: bool
    degenerate: bool
    acf: list[tuple[int, float | None]]
    summary: dict[str, float] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def sweeps(self) -> int:
        return self.m - 1


@dataclass
class RunReport:
    records: list[StepRecord]
    ensemble: Ensemble
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def m(self) -> list[int]:
        return [r.m for r in self.records]

    @property
    def total_m(self) -> int:
        return int(sum(self.m))

    @property
    def total_sweeps(self) -> int:
        return int(sum(r.sweeps for r in self.records))


# --------------------------------------------------------------------------- engine


def spawn_generators(master_seed: int, L: int) -> list[np.random.Generator]:
    """Independent per-chain generators; chain ``l`` always gets child ``l``."""
    children = np.random.SeedSequence(int(master_seed)).spawn(L)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def _stack_states(states: Sequence[ParameterVector]) -> Blocks:
    names = states[0].names
    for st in states[1:]:
        if st.names != names or any(len(st[n]) != len(states[0][n]) for n in names):
            raise ValueError("all chains must share one block structure")
    return {n: np.stack([np.asarray(st[n]) for st in states]) for n in names}


def init_ensemble(
    prior_sampler: Callable[[np.random.Generator], ParameterVector],
    L: int,
    master_seed: int,
) -> Ensemble:
    """Draw ``L`` initial states, chain ``l`` using only its own generator."""
    if L < 2:
        raise ConfigurationError(f"L must be >= 2, got {L}")
    rngs = spawn_generators(master_seed, L)
    states = [prior_sampler(rng) for rng in rngs]
    return Ensemble(blocks=_stack_states(states), rngs=rngs)


class _Dispatcher:
    """Runs a kernel over fixed chain groups, optionally on a thread pool."""

    def __init__(self, L: int, chunk_size: int | None, workers: int):
        size = L if not chunk_size else int(chunk_size)
        self.slices = [slice(a, min(a + size, L)) for a in range(0, L, size)]
        self.workers = max(1, int(workers))
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 and len(self.slices) > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def __call__(self, kernel: BatchKernel, blocks: Blocks, rngs: list[np.random.Generator]) -> Blocks:
        def one(sl):
            return kernel({k: v[sl] for k, v in blocks.items()}, rngs[sl])

        if self._pool is None:
            parts = [one(sl) for sl in self.slices]
        else:
            parts = list(self._pool.map(one, self.slices))
        if len(parts) == 1:
            return {k: np.asarray(v) for k, v in parts[0].items()}
        return {k: np.concatenate([p[k] for p in parts], axis=0) for k in parts[0]}


def _diag_matrix(blocks: Blocks, components: list[tuple[str, int]]) -> np.ndarray:
    return np.stack([np.asarray(blocks[name][:, idx], dtype=float) for name, idx in components], axis=1)


def _apply_jump(ens: Ensemble, suite: KernelSuite, dispatch: _Dispatcher) -> Blocks:
    ext = dispatch(suite.jump, ens.blocks, ens.rngs)
    blocks = dict(ens.blocks)
    for name, values in ext.items():
        values = np.asarray(values)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != ens.L:
            raise RuntimeError(f"jump returned {values.shape[0]} rows for block {name!r}")
        if name in blocks:
            old = blocks[name]
            blocks[name] = np.concatenate([old, values.astype(old.dtype, copy=False)], axis=1)
        else:
            blocks[name] = values
    return blocks


def _apply_transit(blocks: Blocks, suite: KernelSuite, rngs, dispatch: _Dispatcher) -> Blocks:
    new = dispatch(suite.transit, blocks, rngs)
    for name, arr in blocks.items():
        if name not in new or new[name].shape != arr.shape:
            raise RuntimeError(f"transit changed the shape of block {name!r}")
    return new


def advance_step(
    ens: Ensemble,
    suite: KernelSuite,
    sched: ScheduleConfig,
    diag: Callable[[np.ndarray, np.ndarray], float | None] = cross_chain_acf,
    *,
    workers: int = 1,
    chunk_size: int | None = 64,
    previous_horizon: int | None = None,
) -> tuple[Ensemble, StepRecord]:
    """One data step: jump, then transition sweeps until the stopping rule fires.

    ``m`` counts the post-jump state plus every sweep, so ``m - 1`` sweeps are run.
    Sweeping continues while ``m < m_min`` or the latest autocorrelation exceeds
    ``1 - epsilon``, and stops at ``m_cap`` with ``capped`` set.  An undefined
    autocorrelation (all diagnostic components constant) is treated as 1 and
    recorded in ``degenerate``.
    """
    if previous_horizon is not None and suite.data_horizon <= previous_horizon:
        raise ConfigurationError(
            f"data horizon must grow: {suite.data_horizon} <= {previous_horizon}"
        )
    start = time.perf_counter()
    dispatch = _Dispatcher(ens.L, chunk_size, workers)
    try:
        blocks = _apply_jump(ens, suite, dispatch)
        base = _diag_matrix(blocks, suite.diag_components)
        threshold = 1.0 - sched.epsilon
        m = 1
        rho = 1.0
        curve: list[tuple[int, float | None]] = []
        degenerate = False
        capped = False
        while True:
            if m >= sched.m_min and rho <= threshold:
                break
            if m >= sched.m_cap:
                capped = True
                break
            blocks = _apply_transit(blocks, suite, ens.rngs, dispatch)
            m += 1
            lag = m - 1
            if lag % sched.diag_stride == 0:
                value = diag(base, _diag_matrix(blocks, suite.diag_components))
                curve.append((lag, value))
                if value is None:
                    degenerate = True
                    rho = 1.0
                else:
                    rho = value
    finally:
        dispatch.close()
    if capped:
        log.warning("step %d hit m_cap=%d (last acf %.4g)", ens.t + 1, sched.m_cap, rho)
    new = Ensemble(blocks=blocks, rngs=ens.rngs, t=ens.t + 1, s=m, history=ens.history + [m])
    record = StepRecord(
        t=new.t,
        data_horizon=suite.data_horizon,
        m=m,
        capped=capped,
        degenerate=degenerate,
        acf=curve,
        seconds=time.perf_counter() - start,
    )
    return new, record


def _take(source: Iterable, n: int):
    """Pull up to ``n`` items from an iterator."""
    items = []
    for _ in range(n):
        try:
            items.append(next(source))
        except StopIteration:
            break
    return items


def run_stream(
    data_source: Iterable,
    model: ModelPlugin,
    sched: ScheduleConfig,
    L: int,
    seed: int,
    *,
    workers: int = 1,
    chunk_size: int | None = 64,
    diag: Callable[[np.ndarray, np.ndarray], float | None] = cross_chain_acf,
    on_step: Callable[[Ensemble, StepRecord], None] | None = None,
) -> RunReport:
    """Run the full data-step loop over ``sched.batch_sizes``.

    ``data_source`` yields single observations; batches are formed according to the
    schedule and handed to ``model.validate`` and ``model.make_suite``.
    """
    if not sched.batch_sizes:
        raise ConfigurationError("schedule has no batches")
    ens = init_ensemble(model.prior_sampler, L, seed)
    source = iter(data_source)
    prefix: list = []
    records: list[StepRecord] = []
    horizon = 0
    for step, size in enumerate(sched.batch_sizes, start=1):
        batch = _take(source, size)
        if len(batch) < size:
            raise ObservationError(step, f"data source exhausted: wanted {size}, got {len(batch)}")
        try:
            model.validate(batch)
        except (ValueError, TypeError) as exc:
            raise ObservationError(step, str(exc)) from exc
        prefix.extend(batch)
        suite = model.make_suite(prefix, batch)
        ens, rec = advance_step(
            ens, suite, sched, diag, workers=workers, chunk_size=chunk_size, previous_horizon=horizon
        )
        horizon = suite.data_horizon
        rec.summary = model.summarize(ens)
        records.append(rec)
        if on_step is not None:
            on_step(ens, rec)
    return RunReport(records=records, ensemble=ens)
