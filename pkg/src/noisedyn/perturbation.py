"""Bounded i.i.d. parameter noise: spaces, streams, orbits, averages.

A :class:`PerturbationSpace` fixes the noise model — uniform draws
from the closed euclidean ball of radius ``epsilon`` in parameter
space.  A :class:`PerturbationStream` is a counter-based random
stream: it is a pure function of ``(seed, index)``, so any consumer
can re-derive exactly the same draws regardless of execution order or
thread count.  Radius zero is allowed and degenerates to the
deterministic family.

On top of these the module provides orbit simulation, Birkhoff
averages, first-entry times, and a Monte Carlo recurrence-probability
estimate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .families import ParametricFamily
from .phase_space import canonicalize

_CHUNK = 65536


@dataclass(frozen=True)
class PerturbationSpace:
    """Uniform noise on the closed ball of radius ``epsilon``."""

    n_params: int
    epsilon: float

    def __post_init__(self):
        if self.n_params < 1:
            raise ValueError("n_params must be at least 1")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError("epsilon must be finite and nonnegative")


class PerturbationStream:
    """Counter-based stream of ball-uniform parameter draws.

    Two streams built from the same ``(seed, index)`` pair produce
    bit-identical output; distinct indices give independent streams of
    the same seed.  Internally a Philox generator keyed by the pair.
    """

    def __init__(self, seed: int, index: int = 0):
        if seed < 0 or index < 0:
            raise ValueError("seed and index must be nonnegative")
        self.seed = int(seed)
        self.index = int(index)
        key = np.array([self.seed, self.index], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def derive(self, index: int) -> "PerturbationStream":
        """Fresh stream with the same seed and a different index."""
        return PerturbationStream(self.seed, index)


def _ball_uniform(gen: np.random.Generator, n: int, m: int, eps: float) -> np.ndarray:
    if eps == 0.0:
        return np.zeros((m, n))
    if n == 1:
        return eps * (2.0 * gen.random((m, 1)) - 1.0)
    out = np.empty((m, n))
    filled = 0
    while filled < m:
        need = m - filled
        cand = eps * (2.0 * gen.random((max(2 * need, 64), n)) - 1.0)
        ok = cand[np.einsum("ij,ij->i", cand, cand) <= eps * eps]
        take = min(ok.shape[0], need)
        out[filled : filled + take] = ok[:take]
        filled += take
    return out


def sample_parameter(space: PerturbationSpace, stream: PerturbationStream) -> np.ndarray:
    """One draw, shape ``(n_params,)``."""
    return _ball_uniform(stream.generator, space.n_params, 1, space.epsilon)[0]


def sample_parameters(
    space: PerturbationSpace, stream: PerturbationStream, m: int
) -> np.ndarray:
    """``m`` i.i.d. draws, shape ``(m, n_params)``."""
    if m < 0:
        raise ValueError("sample count must be nonnegative")
    return _ball_uniform(stream.generator, space.n_params, m, space.epsilon)


def sample_parameters_stratified(
    space: PerturbationSpace, stream: PerturbationStream, m: int
) -> np.ndarray:
    """``m`` draws with one jittered point per equal stratum (1-D only).

    Splits ``[-eps, eps]`` into ``m`` equal intervals and draws one
    uniform point in each.  Marginally each draw is ball-uniform, but
    the empirical measure of the batch has far lower discrepancy than
    i.i.d. sampling, which tightens Monte Carlo cell-transition rows.
    """
    if space.n_params != 1:
        raise ValueError("stratified sampling is defined for 1-D parameters only")
    if m < 1:
        raise ValueError("sample count must be positive")
    if space.epsilon == 0.0:
        return np.zeros((m, 1))
    u = stream.generator.random(m)
    offsets = (np.arange(m) + u) / m
    return (-space.epsilon + 2.0 * space.epsilon * offsets)[:, None]


def sample_parameters_stratified_grouped(
    space: PerturbationSpace,
    stream: PerturbationStream,
    groups: int,
    per_group: int,
) -> np.ndarray:
    """Stratified draws in ``groups`` independent full-range batches (1-D only).

    Returns shape ``(groups * per_group, 1)``: each consecutive block
    of ``per_group`` rows is its own jittered equal-strata cover of
    ``[-eps, eps]``, so every group sees the whole parameter range.
    """
    if space.n_params != 1:
        raise ValueError("stratified sampling is defined for 1-D parameters only")
    if groups < 1 or per_group < 1:
        raise ValueError("group counts must be positive")
    if space.epsilon == 0.0:
        return np.zeros((groups * per_group, 1))
    u = stream.generator.random((groups, per_group))
    offsets = (np.arange(per_group)[None, :] + u) / per_group
    draws = -space.epsilon + 2.0 * space.epsilon * offsets
    return draws.reshape(groups * per_group, 1)


@dataclass
class OrbitSample:
    """A simulated noisy orbit and the parameter draws that produced it.

    ``states`` has shape ``(n_steps + 1, dim)`` with the initial state
    in row 0; ``params[k]`` is the draw applied to go from state ``k``
    to state ``k + 1``.
    """

    family: str
    seed: int
    stream_index: int
    epsilon: float
    states: np.ndarray
    params: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1


def _check_compat(fam: ParametricFamily, space: PerturbationSpace) -> None:
    if space.n_params != fam.n_params:
        raise ValueError(
            f"noise space has {space.n_params} parameters, family expects {fam.n_params}"
        )
    if space.epsilon > fam.max_param_radius:
        raise ValueError(
            f"noise radius {space.epsilon:g} exceeds family guard {fam.max_param_radius:g}"
        )


def iterate(
    fam: ParametricFamily,
    x0,
    space: PerturbationSpace,
    stream: PerturbationStream,
    n_steps: int,
) -> OrbitSample:
    """Simulate ``n_steps`` noisy iterations from ``x0``."""
    _check_compat(fam, space)
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    x0 = np.asarray(x0, dtype=float).reshape(fam.dim)
    states = np.empty((n_steps + 1, fam.dim))
    states[0] = canonicalize(fam.box, x0)
    params = sample_parameters(space, stream, n_steps)
    x = states[0]
    for k in range(n_steps):
        x = fam.eval_map(x, params[k])
        states[k + 1] = x
    return OrbitSample(
        family=fam.name,
        seed=stream.seed,
        stream_index=stream.index,
        epsilon=space.epsilon,
        states=states,
        params=params,
    )


def birkhoff_average(
    fam: ParametricFamily,
    x0,
    space: PerturbationSpace,
    stream: PerturbationStream,
    phi: Callable,
    n_steps: int,
    burn: int = 0,
) -> float:
    """Average of ``phi`` along a noisy orbit.

    Sums ``phi(x_j)`` over ``j = burn, ..., n_steps - 1`` and divides
    by ``n_steps - burn``.  Parameter draws are consumed in fixed-size
    chunks, so the draws match `iterate` with the same stream.
    """
    _check_compat(fam, space)
    if not 0 <= burn < n_steps:
        raise ValueError("need 0 <= burn < n_steps")
    x = np.asarray(x0, dtype=float).reshape(fam.dim)
    total = 0.0
    count = 0
    done = 0
    while done < n_steps:
        block = min(_CHUNK, n_steps - done)
        params = sample_parameters(space, stream, block)
        for k in range(block):
            j = done + k
            if j >= burn:
                total += float(phi(x))
                count += 1
            x = fam.eval_map(x, params[k])
        done += block
    return total / count


def first_entry_time(
    fam: ParametricFamily,
    x0,
    target_lower,
    target_upper,
    space: PerturbationSpace,
    stream: PerturbationStream,
    max_steps: int,
) -> Optional[int]:
    """Smallest ``k >= 0`` with ``x_k`` in the closed target box, else None."""
    _check_compat(fam, space)
    lo = np.asarray(target_lower, dtype=float).reshape(fam.dim)
    hi = np.asarray(target_upper, dtype=float).reshape(fam.dim)
    if np.any(lo > hi):
        raise ValueError("target box has lower > upper")
    x = np.asarray(x0, dtype=float).reshape(fam.dim)
    for k in range(max_steps + 1):
        if np.all(x >= lo) and np.all(x <= hi):
            return k
        if k == max_steps:
            break
        x = fam.eval_map(x, sample_parameter(space, stream))
    return None


def estimate_recurrence_probability(
    fam: ParametricFamily,
    x0,
    target_lower,
    target_upper,
    space: PerturbationSpace,
    seed: int,
    n_trials: int,
    horizon: int,
) -> float:
    """Fraction of independent trials that enter the target within the horizon.

    Entry is counted from step 1 on, so starting inside the target
    still requires a genuine return.  Trial ``i`` uses the derived
    stream ``(seed, i)``; the estimate is independent of trial order.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    _check_compat(fam, space)
    x0 = np.asarray(x0, dtype=float).reshape(fam.dim)
    hits = 0
    for trial in range(n_trials):
        stream = PerturbationStream(seed, trial)
        x1 = fam.eval_map(x0, sample_parameter(space, stream))
        k = first_entry_time(
            fam, x1, target_lower, target_upper, space, stream, horizon - 1
        )
        if k is not None:
            hits += 1
    return hits / n_trials


def write_orbit_csv(path, sample: OrbitSample, comments=()) -> None:
    """Write an orbit as CSV with ``#`` comment lines, 17 significant digits."""
    dim = sample.states.shape[1]
    n_params = sample.params.shape[1] if sample.params.size else 0
    cols = (
        ["step"]
        + [f"x{i}" for i in range(dim)]
        + [f"t{i}" for i in range(n_params)]
    )
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(cols) + "\n")
        for k in range(sample.states.shape[0]):
            row = [str(k)] + [f"{v:.17g}" for v in sample.states[k]]
            if k == 0:
                row += ["nan"] * n_params
            else:
                row += [f"{v:.17g}" for v in sample.params[k - 1]]
            fh.write(",".join(row) + "\n")
