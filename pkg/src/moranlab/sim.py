"""Monte-Carlo sampling of the Moran chain and the Wright-Fisher SDE.

Every random draw comes from a stream derived from (master_seed, stream
index) alone.  Work is split over streams in a fixed way and merged in
stream order, so estimates do not depend on how many workers ran them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .lattice import KernelVariant, TransitionMatrix, build_transition_matrix, step_count


class NonStochasticKernelError(ValueError):
    """Raised when asked to sample paths from a kernel with negative entries."""


@dataclass(frozen=True)
class RngPlan:
    master_seed: int
    stream_count: int = 16

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.stream_count < 1:
            raise ValueError(f"stream count must be positive, got {self.stream_count}")

    def generator(self, stream: int) -> np.random.Generator:
        """Counter-based (Philox) generator keyed by (master_seed, stream)."""
        if not 0 <= stream < self.stream_count:
            raise IndexError(f"stream {stream} outside plan of {self.stream_count} streams")
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(stream,))
        return np.random.Generator(np.random.Philox(seq))

    def split(self, total: int) -> list[int]:
        """Deterministic share of ``total`` work items per stream."""
        base, extra = divmod(total, self.stream_count)
        return [base + (1 if k < extra else 0) for k in range(self.stream_count)]


def map_streams(task: Callable[[np.random.Generator, int], object], plan: RngPlan, total: int, workers: int = 1) -> list:
    """Run ``task(rng, count)`` once per stream; results come back in stream order."""
    jobs = [(plan.generator(k), c) for k, c in enumerate(plan.split(total))]
    if workers <= 1:
        return [task(rng, c) for rng, c in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: task(*job), jobs))


def ensure_sampleable(P: TransitionMatrix):
    bad = P.negative_states()
    if bad.size:
        i = int(bad[0])
        raise NonStochasticKernelError(
            f"non-stochastic kernel: state {i} of the {P.variant.value} kernel with n={P.n} "
            f"has diagonal entry {P.entries[i, i]:.6g} < 0; use the lattice matrix methods instead"
        )


# ---------------------------------------------------------------- Moran chain


@dataclass(frozen=True)
class ChainPath:
    n: int
    variant: KernelVariant
    start_index: int
    states: np.ndarray
    absorbed_at: int | None


@dataclass(frozen=True)
class InterpolatedPath:
    """Piecewise-linear embedding of a chain path in continuous time."""

    underlying: ChainPath

    @property
    def time_scale(self) -> float:
        return self.underlying.variant.time_scale(self.underlying.n)

    def __call__(self, t):
        path = self.underlying
        times = np.atleast_1d(np.asarray(t, dtype=float))
        states = path.states
        if path.absorbed_at is not None:
            k, _ = step_count(path.n, path.variant, float(times.max()))
            if k + 2 > len(states):
                states = np.pad(states, (0, k + 2 - len(states)), mode="edge")
        z = interpolate_states(states[:, None], path.n, path.variant, times)[:, 0]
        return z if np.ndim(t) else float(z[0])


def interpolate_states(states: np.ndarray, n: int, variant: KernelVariant, times) -> np.ndarray:
    """Z_t for each t in ``times``; ``states`` has shape (steps + 1, replicates)."""
    out = np.empty((len(times), states.shape[1]))
    for r, t in enumerate(times):
        k, frac = step_count(n, variant, t)
        if k + (frac > 0) >= states.shape[0]:
            raise ValueError(f"time {t} needs step {k + 1}, path only has {states.shape[0] - 1} steps")
        z = states[k] / n
        if frac:
            z = z + frac * (states[k + 1] - states[k]) / n
        out[r] = z
    return out


def _step_probabilities(P: TransitionMatrix) -> tuple[np.ndarray, np.ndarray]:
    up = np.append(np.diag(P.entries, 1), 0.0)
    down = np.insert(np.diag(P.entries, -1), 0, 0.0)
    return up, down


def _advance(states: np.ndarray, up: np.ndarray, down: np.ndarray, u: np.ndarray) -> np.ndarray:
    pu = up[states]
    move = (u < pu).astype(states.dtype) - ((u >= pu) & (u < pu + down[states])).astype(states.dtype)
    return states + move


def sample_chain_path(n: int, variant, start_index: int, max_steps: int, rng: np.random.Generator) -> ChainPath:
    P = build_transition_matrix(n, variant)
    ensure_sampleable(P)
    if not 0 <= start_index <= n:
        raise ValueError(f"start index {start_index} outside 0..{n}")
    up, down = _step_probabilities(P)
    states = [start_index]
    state = start_index
    absorbed = 0 if state in (0, n) else None
    chunk = 4096
    while absorbed is None and len(states) <= max_steps:
        for u in rng.random(min(chunk, max_steps + 1 - len(states))):
            if u < up[state]:
                state += 1
            elif u < up[state] + down[state]:
                state -= 1
            states.append(state)
            if state == 0 or state == n:
                absorbed = len(states) - 1
                break
    return ChainPath(n, P.variant, start_index, np.array(states, dtype=np.int64), absorbed)


def sample_chain_batch(P: TransitionMatrix, start_index: int, steps: int, replicates: int, rng: np.random.Generator) -> np.ndarray:
    """States of ``replicates`` independent chains, shape (steps + 1, replicates)."""
    ensure_sampleable(P)
    if not 0 <= start_index <= P.n:
        raise ValueError(f"start index {start_index} outside 0..{P.n}")
    up, down = _step_probabilities(P)
    out = np.empty((steps + 1, replicates), dtype=np.int64)
    out[0] = start_index
    for k in range(steps):
        out[k + 1] = _advance(out[k], up, down, rng.random(replicates))
    return out


@dataclass(frozen=True)
class AbsorptionEstimate:
    n: int
    start_index: int
    replicates: int
    p_hat: float
    std_error: float
    unabsorbed: int
    mean_steps: float


def absorption_frequency(n: int, variant, start_index: int, replicates: int, max_steps: int, plan: RngPlan, workers: int = 1) -> AbsorptionEstimate:
    """Fraction of chains from ``start_index`` absorbed at n within ``max_steps``."""
    P = build_transition_matrix(n, variant)
    ensure_sampleable(P)
    up, down = _step_probabilities(P)

    def task(rng, count):
        state = np.full(count, start_index, dtype=np.int64)
        hit = np.zeros(count, dtype=np.int64)
        active = np.flatnonzero((state > 0) & (state < n))
        step = 0
        while active.size and step < max_steps:
            step += 1
            state[active] = _advance(state[active], up, down, rng.random(active.size))
            done = (state[active] == 0) | (state[active] == n)
            hit[active[done]] = step
            active = active[~done]
        return state, hit

    parts = map_streams(task, plan, replicates, workers)
    state = np.concatenate([p[0] for p in parts])
    hit = np.concatenate([p[1] for p in parts])
    fixed = (state == n).astype(float)
    p_hat = float(fixed.mean())
    return AbsorptionEstimate(
        n=n,
        start_index=start_index,
        replicates=replicates,
        p_hat=p_hat,
        std_error=math.sqrt(p_hat * (1 - p_hat) / replicates),
        unabsorbed=int(((state > 0) & (state < n)).sum()),
        mean_steps=float(hit.mean()),
    )


@dataclass(frozen=True)
class IncrementMoment:
    s: float
    t: float
    moment: float
    std_error: float


def interpolated_increment_moments(
    n: int,
    variant,
    start_index: int,
    pairs: Sequence[tuple[float, float]],
    m: int,
    replicates: int,
    plan: RngPlan,
    workers: int = 1,
) -> list[IncrementMoment]:
    """Monte-Carlo E|Z_t - Z_s|^(2m) for the interpolated chain, per (s, t) pair."""
    if m < 1:
        raise ValueError(f"moment index m must be positive, got {m}")
    for s, t in pairs:
        if not 0 <= s <= t:
            raise ValueError(f"need 0 <= s <= t, got ({s}, {t})")
    P = build_transition_matrix(n, variant)
    ensure_sampleable(P)
    times = sorted({x for pair in pairs for x in pair})
    k_last, frac = step_count(n, P.variant, max(times))
    steps = k_last + (1 if frac else 0)
    index = {x: j for j, x in enumerate(times)}

    def task(rng, count):
        states = sample_chain_batch(P, start_index, steps, count, rng)
        Z = interpolate_states(states, n, P.variant, times)
        return np.stack([np.abs(Z[index[t]] - Z[index[s]]) ** (2 * m) for s, t in pairs])

    samples = np.concatenate(map_streams(task, plan, replicates, workers), axis=1)
    means = samples.mean(axis=1)
    ses = samples.std(axis=1, ddof=1) / math.sqrt(replicates) if replicates > 1 else np.zeros(len(pairs))
    return [IncrementMoment(float(s), float(t), float(mu), float(se)) for (s, t), mu, se in zip(pairs, means, ses)]


# ------------------------------------------------------------ Wright-Fisher SDE


@dataclass(frozen=True)
class SDEPath:
    start: float
    dt: float
    values: np.ndarray


def _check_sde_inputs(start: float, t_end: float, dt: float):
    for name, v in (("start", start), ("t_end", t_end), ("dt", dt)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v}")
    if not 0.0 <= start <= 1.0:
        raise ValueError(f"start must lie in [0, 1], got {start}")
    if dt <= 0 or t_end < 0:
        raise ValueError(f"need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")


def _step_grid(t_end: float, dt: float) -> tuple[int, float]:
    steps = math.ceil(t_end / dt - 1e-9)
    return steps, (t_end / steps if steps else dt)


def _euler_step(x: np.ndarray, sqrt_h: float, xi: np.ndarray) -> np.ndarray:
    # truncated scheme: zero diffusion on the boundary, clamp back into [0, 1]
    x = x + np.sqrt(np.maximum(x * (1.0 - x), 0.0)) * sqrt_h * xi
    return np.clip(x, 0.0, 1.0, out=x)


def sample_wf_path(start: float, t_end: float, dt: float, rng: np.random.Generator) -> SDEPath:
    """Euler-Maruyama path of dX = sqrt(X(1-X)) dW started at ``start``."""
    _check_sde_inputs(start, t_end, dt)
    steps, h = _step_grid(t_end, dt)
    values = np.empty(steps + 1)
    values[0] = start
    xi = rng.standard_normal(steps)
    x = np.array([start], dtype=float)
    for k in range(steps):
        x = _euler_step(x, math.sqrt(h), xi[k : k + 1])
        values[k + 1] = x[0]
    return SDEPath(start, h, values)


def wf_endpoints(start: float, t_end: float, dt: float, count: int, rng: np.random.Generator) -> np.ndarray:
    _check_sde_inputs(start, t_end, dt)
    steps, h = _step_grid(t_end, dt)
    x = np.full(count, float(start))
    sqrt_h = math.sqrt(h)
    for _ in range(steps):
        x = _euler_step(x, sqrt_h, rng.standard_normal(count))
    return x


def mc_semigroup(f: Callable, x: float, t: float, paths: int, dt: float, plan: RngPlan, workers: int = 1) -> tuple[float, float]:
    """Monte-Carlo E[f(X_t)] from X_0 = x, with its standard error."""
    if paths < 1:
        raise ValueError(f"need at least one path, got {paths}")
    _check_sde_inputs(x, t, dt)
    ends = np.concatenate(map_streams(lambda rng, c: wf_endpoints(x, t, dt, c, rng), plan, paths, workers))
    vals = np.broadcast_to(np.asarray(f(ends), dtype=float), ends.shape)
    se = float(vals.std(ddof=1) / math.sqrt(paths)) if paths > 1 else 0.0
    return float(vals.mean()), se
