"""Monte Carlo measures, basin partitions, audits, and sink checks.

This module hosts the statistical layer on top of the family/noise
primitives:

* Cesàro push-forward histograms (`cesaro_pushforward`) approximating
  stationary measures by direct simulation;
* Monte Carlo basin partitions relative to a list of detected domains
  (`basin_classify`), plus a continuity probe for nearby starts;
* audits of two structural hypotheses — the image of a point under
  the full parameter ball containing a ball (`check_hypothesis_A`),
  and absence of atoms in push-forwards via a grid-refinement proxy
  (`check_no_atoms`);
* top Lyapunov exponents along noisy orbits (`lyapunov_top`);
* a three-condition verification that a periodic sink survives
  bounded noise (`verify_sink_perturbation`);
* running time-average diagnostics (`time_average_oscillation`).

All randomness flows through counter-based streams keyed by
``(seed, index)``; independent trials use their trial number as the
index, so results never depend on scheduling or worker count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .domains import DomainApprox
from .families import ParametricFamily
from .perturbation import (
    PerturbationSpace,
    PerturbationStream,
    sample_parameter,
    sample_parameters,
)
from .phase_space import GridSpec, PhaseBox, distance, locate, wrap_displacement

_CHUNK = 65536


# ---------------------------------------------------------------------------
# Empirical measures


@dataclass
class EmpiricalMeasure:
    """A mass vector over grid cells, produced by direct simulation."""

    weights: np.ndarray
    box: PhaseBox
    grid: GridSpec
    meta: dict = field(default_factory=dict)

    def mass_in(self, cells) -> float:
        """Total mass carried by the given flat cell indices."""
        return float(self.weights[np.asarray(cells, dtype=np.int64)].sum())


def l1_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Total-variation-style L1 distance between two mass vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError("vectors have different lengths")
    return float(np.abs(u - v).sum())


def cesaro_pushforward(
    fam: ParametricFamily,
    x0,
    space: PerturbationSpace,
    grid: GridSpec,
    seed: int,
    n_steps: int,
    n_orbits: int,
) -> EmpiricalMeasure:
    """Cell histogram of the Cesàro average of push-forwards from ``x0``.

    Runs ``n_orbits`` independent noisy orbits (orbit ``i`` draws from
    the stream ``(seed, i)``) and histograms all states ``x_1, ...,
    x_n`` — the initial state is excluded — so the weights estimate
    the average of the first ``n_steps`` push-forwards of the point
    mass at ``x0``.
    """
    if n_steps < 1 or n_orbits < 1:
        raise ValueError("n_steps and n_orbits must be positive")
    x0 = np.asarray(x0, dtype=float).reshape(fam.dim)
    params = np.stack(
        [
            sample_parameters(space, PerturbationStream(seed, i), n_steps)
            for i in range(n_orbits)
        ]
    )
    X = np.tile(x0, (n_orbits, 1))
    counts = np.zeros(grid.total, dtype=np.int64)
    for j in range(n_steps):
        X = fam.eval_many(X, params[:, j])
        counts += np.bincount(locate(fam.box, grid, X), minlength=grid.total)
    weights = counts / (n_orbits * n_steps)
    return EmpiricalMeasure(
        weights=weights,
        box=fam.box,
        grid=grid,
        meta={
            "family": fam.name,
            "epsilon": space.epsilon,
            "seed": int(seed),
            "n_steps": int(n_steps),
            "n_orbits": int(n_orbits),
            "x0": x0.tolist(),
        },
    )


# ---------------------------------------------------------------------------
# Basin partitions


@dataclass
class BasinProfile:
    """Monte Carlo basin fractions of one start point across domains."""

    x0: np.ndarray
    fractions: np.ndarray
    unresolved: float
    n_trials: int
    horizon: int
    seed: int


def _domain_membership(domains: Sequence[DomainApprox], n_cells: int) -> np.ndarray:
    membership = np.full(n_cells, -1, dtype=np.int64)
    for i, dom in enumerate(domains):
        if np.any(membership[dom.cells] >= 0):
            raise ValueError("domains overlap; basin classification needs disjoint cells")
        membership[dom.cells] = i
    return membership


def basin_classify(
    fam: ParametricFamily,
    grid: GridSpec,
    x0,
    space: PerturbationSpace,
    domains: Sequence[DomainApprox],
    n_trials: int,
    horizon: int,
    seed: int,
    workers: int = 1,
) -> BasinProfile:
    """Fraction of noisy orbits from ``x0`` captured by each domain.

    A trial is assigned to the first domain whose cell set its orbit
    visits (the start state counts as step 0); trials that visit none
    within the horizon are *unresolved*.  Trial ``i`` draws from the
    stream ``(seed, i)``, so the profile is independent of worker
    count and trial order.
    """
    if n_trials < 1 or horizon < 0:
        raise ValueError("n_trials must be positive and horizon nonnegative")
    x0 = np.asarray(x0, dtype=float).reshape(fam.dim)
    membership = _domain_membership(domains, grid.total)

    def run_trial(trial: int) -> int:
        stream = PerturbationStream(seed, trial)
        x = x0
        for _ in range(horizon + 1):
            hit = membership[locate(fam.box, grid, x)]
            if hit >= 0:
                return int(hit)
            x = fam.eval_map(x, sample_parameter(space, stream))
        return -1

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_trial, range(n_trials)))
    else:
        outcomes = [run_trial(i) for i in range(n_trials)]

    outcomes = np.asarray(outcomes)
    fractions = np.array([(outcomes == i).mean() for i in range(len(domains))])
    return BasinProfile(
        x0=x0,
        fractions=fractions,
        unresolved=float((outcomes < 0).mean()),
        n_trials=int(n_trials),
        horizon=int(horizon),
        seed=int(seed),
    )


def basin_continuity_probe(
    fam: ParametricFamily,
    grid: GridSpec,
    x0,
    delta,
    space: PerturbationSpace,
    domains: Sequence[DomainApprox],
    n_trials: int,
    horizon: int,
    seed: int,
) -> dict:
    """Compare basin fractions at ``x0`` and at ``x0 + delta``.

    The two profiles use disjoint trial streams (the shifted point
    starts at stream index ``n_trials``), so at ``delta = 0`` the
    reported difference is pure Monte Carlo noise of order
    ``1 / sqrt(n_trials)``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(fam.dim)
    shifted = x0 + np.asarray(delta, dtype=float).reshape(fam.dim)
    base = basin_classify(fam, grid, x0, space, domains, n_trials, horizon, seed)
    probe_profile = _shifted_classify(
        fam, grid, shifted, space, domains, n_trials, horizon, seed
    )
    diff = float(np.max(np.abs(base.fractions - probe_profile.fractions)))
    return {
        "base": base,
        "shifted": probe_profile,
        "max_difference": diff,
    }


def _shifted_classify(fam, grid, x0, space, domains, n_trials, horizon, seed):
    membership = _domain_membership(domains, grid.total)
    x0 = np.asarray(x0, dtype=float).reshape(fam.dim)
    outcomes = []
    for trial in range(n_trials):
        stream = PerturbationStream(seed, n_trials + trial)
        x = x0
        hit = -1
        for _ in range(horizon + 1):
            m = membership[locate(fam.box, grid, x)]
            if m >= 0:
                hit = int(m)
                break
            x = fam.eval_map(x, sample_parameter(space, stream))
        outcomes.append(hit)
    outcomes = np.asarray(outcomes)
    fractions = np.array([(outcomes == i).mean() for i in range(len(domains))])
    return BasinProfile(
        x0=x0,
        fractions=fractions,
        unresolved=float((outcomes < 0).mean()),
        n_trials=int(n_trials),
        horizon=int(horizon),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# Hypothesis audits


@dataclass
class HypothesisAReport:
    """Estimated radius of a ball inside the one-step image of a point."""

    x0: np.ndarray
    center: np.ndarray
    xi_hat: float
    epsilon: float
    n_samples: int
    sector_radii: np.ndarray


def check_hypothesis_A(
    fam: ParametricFamily,
    x0,
    space: PerturbationSpace,
    seed: int,
    n_samples: int = 4096,
    n_sectors: int = 16,
) -> HypothesisAReport:
    """Estimate the largest ball centred at ``f_0(x0)`` inside the image set.

    Samples the parameter ball, forms the one-step images of ``x0``,
    and measures how far the image cloud extends from the unperturbed
    image in every direction.  In one dimension the estimate is the
    smaller of the two one-sided reaches.  In two dimensions the
    directions are split into ``n_sectors`` equal cones; each cone
    contributes its farthest image point scaled by ``cos(pi /
    n_sectors)`` (the worst misalignment within the cone), and the
    estimate is the minimum over cones.  An empty cone yields zero.
    Displacements respect periodic axes.
    """
    if fam.dim not in (1, 2):
        raise ValueError("hypothesis audit supports 1-D and 2-D families")
    x0 = np.asarray(x0, dtype=float).reshape(fam.dim)
    center = fam.eval_map(x0, np.zeros(fam.n_params))
    stream = PerturbationStream(seed, 0)
    params = sample_parameters(space, stream, n_samples)
    images = fam.eval_many(np.tile(x0, (n_samples, 1)), params)
    disp = wrap_displacement(fam.box, images - center)

    if fam.dim == 1:
        d = disp[:, 0]
        plus = float(np.max(d, initial=0.0))
        minus = float(np.max(-d, initial=0.0))
        radii = np.array([plus, minus])
        xi = min(plus, minus)
    else:
        angles = np.arctan2(disp[:, 1], disp[:, 0])
        radius = np.hypot(disp[:, 0], disp[:, 1])
        sector = ((angles + np.pi) / (2.0 * np.pi) * n_sectors).astype(int) % n_sectors
        radii = np.zeros(n_sectors)
        np.maximum.at(radii, sector, radius)
        xi = float(np.min(radii) * np.cos(np.pi / n_sectors))

    return HypothesisAReport(
        x0=x0,
        center=center,
        xi_hat=float(xi),
        epsilon=space.epsilon,
        n_samples=int(n_samples),
        sector_radii=radii,
    )


@dataclass
class NoAtomsReport:
    """Grid-refinement audit of atoms in a k-step push-forward."""

    cells_per_axis: List[int]
    max_masses: List[float]
    halving_ratios: List[float]
    atom_suspected: bool
    k_steps: int
    epsilon: float


def check_no_atoms(
    fam: ParametricFamily,
    x0,
    space: PerturbationSpace,
    seed: int,
    k_steps: int = 20,
    n_samples: int = 4096,
    cells_ladder: Sequence[int] = (16, 32, 64, 128),
    ratio_threshold: float = 0.8,
) -> NoAtomsReport:
    """Proxy audit that the ``k``-step push-forward of ``x0`` has no atoms.

    Simulates ``n_samples`` independent ``k``-step images of ``x0``
    (one batched stream) and records the largest single-cell mass on a
    ladder of grids that halves the cell size at each rung.  For a
    measure with a bounded density the largest mass scales with the
    cell volume; an atom keeps it bounded away from zero, flagged when
    the final halving ratio exceeds ``ratio_threshold``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(fam.dim)
    stream = PerturbationStream(seed, 0)
    X = np.tile(x0, (n_samples, 1))
    for _ in range(k_steps):
        X = fam.eval_many(X, sample_parameters(space, stream, n_samples))

    max_masses = []
    for cells in cells_ladder:
        grid = GridSpec([int(cells)] * fam.dim)
        counts = np.bincount(locate(fam.box, grid, X), minlength=grid.total)
        max_masses.append(float(counts.max() / n_samples))
    ratios = [
        max_masses[i + 1] / max_masses[i] if max_masses[i] > 0 else 1.0
        for i in range(len(max_masses) - 1)
    ]
    return NoAtomsReport(
        cells_per_axis=[int(c) for c in cells_ladder],
        max_masses=max_masses,
        halving_ratios=ratios,
        atom_suspected=bool(ratios and ratios[-1] > ratio_threshold),
        k_steps=int(k_steps),
        epsilon=space.epsilon,
    )


# ---------------------------------------------------------------------------
# Lyapunov exponents


def lyapunov_top(
    fam: ParametricFamily,
    x0,
    space: PerturbationSpace,
    seed: int,
    n_steps: int,
    burn: int = 100,
) -> float:
    """Top Lyapunov exponent along one noisy orbit.

    Pushes a random unit vector through the state Jacobians along the
    orbit, renormalizing each step and averaging the log growth after
    the burn-in.  Returns ``-inf`` if the vector is annihilated (an
    exactly superattracting step).
    """
    if not 0 <= burn < n_steps:
        raise ValueError("need 0 <= burn < n_steps")
    stream = PerturbationStream(seed, 0)
    x = np.asarray(x0, dtype=float).reshape(fam.dim)
    v = stream.generator.standard_normal(fam.dim)
    v /= np.linalg.norm(v)
    total = 0.0
    count = 0
    done = 0
    while done < n_steps:
        block = min(_CHUNK, n_steps - done)
        params = sample_parameters(space, stream, block)
        for k in range(block):
            t = params[k]
            v = fam.jacobian_state(x, t) @ v
            growth = float(np.linalg.norm(v))
            if growth == 0.0:
                return float("-inf")
            v /= growth
            if done + k >= burn:
                total += np.log(growth)
                count += 1
            x = fam.eval_map(x, t)
        done += block
    return total / count


# ---------------------------------------------------------------------------
# Sink verification


@dataclass
class SinkReport:
    """Outcome of the three-condition periodic-sink verification."""

    passed: bool
    cond1_ok: bool
    cond1_margin: float
    cond2_ok: bool
    beta_hat: float
    cond3_ok: bool
    diameters: dict
    delta: float
    epsilons: List[float]


def _ball_boundary_points(center: np.ndarray, delta: float, n: int, gen) -> np.ndarray:
    d = center.size
    if d == 1:
        return np.array([[center[0] - delta], [center[0] + delta]])
    theta = 2.0 * np.pi * np.arange(n) / n
    ring = center + delta * np.column_stack([np.cos(theta), np.sin(theta)])
    return ring


def verify_sink_perturbation(
    fam: ParametricFamily,
    orbit_points,
    delta: float,
    epsilons: Sequence[float],
    seed: int,
    n_boundary: int = 128,
    n_param_draws: int = 128,
    n_trials: int = 8,
    horizon: int = 2000,
    diam_slope: float = 4.0,
) -> SinkReport:
    """Verify that a periodic sink of the unperturbed map survives noise.

    ``orbit_points`` is the ``(r, d)`` periodic orbit.  Three
    conditions are audited, with ``eps_max = max(epsilons)``:

    1. *Trapping*: sampled points of the closed ball of radius
       ``delta`` around each orbit point — boundary, interior, and
       center — map strictly inside the ball around the next orbit
       point, for random parameters of norm up to ``eps_max`` together
       with the axis extremes ``+- eps_max e_j``.  The reported margin
       is the worst slack ``delta - dist(image, next center)``.
    2. *Contraction*: the top Lyapunov exponent started on the orbit
       under noise of radius ``eps_max`` is negative;
       ``beta_hat`` is its negation.
    3. *Tracking*: for each radius in ``epsilons``, pooled tail states
       (final 10% of each of ``n_trials`` noisy orbits) grouped by
       step phase stay within a bounding box of diameter at most
       ``diam_slope * eps``.

    The balls around distinct orbit points must be pairwise disjoint.
    """
    pts = np.atleast_2d(np.asarray(orbit_points, dtype=float))
    r = pts.shape[0]
    if delta <= 0:
        raise ValueError("delta must be positive")
    epsilons = [float(e) for e in epsilons]
    if not epsilons or any(e < 0 for e in epsilons):
        raise ValueError("epsilons must be nonempty and nonnegative")
    eps_max = max(epsilons)
    for i in range(r):
        for j in range(i + 1, r):
            if distance(fam.box, pts[i], pts[j]) <= 2.0 * delta:
                raise ValueError("delta-balls around the orbit points overlap")

    gen = PerturbationStream(seed, 0).generator
    space_max = PerturbationSpace(fam.n_params, eps_max)

    # Condition 1: trapping with margin.
    axis_extremes = np.concatenate(
        [eps_max * np.eye(fam.n_params), -eps_max * np.eye(fam.n_params)]
    )
    random_params = sample_parameters(space_max, PerturbationStream(seed, 1), n_param_draws)
    param_pool = np.concatenate([axis_extremes, random_params, np.zeros((1, fam.n_params))])
    margin = np.inf
    for i in range(r):
        nxt = pts[(i + 1) % r]
        boundary = _ball_boundary_points(pts[i], delta, n_boundary, gen)
        if fam.dim == 1:
            interior = pts[i] + delta * (2.0 * gen.random((n_boundary, 1)) - 1.0)
        else:
            rad = delta * np.sqrt(gen.random(n_boundary))
            ang = 2.0 * np.pi * gen.random(n_boundary)
            interior = pts[i] + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        zs = np.concatenate([boundary, interior, pts[i][None, :]])
        for t in param_pool:
            images = fam.eval_many(zs, np.tile(t, (zs.shape[0], 1)))
            dists = np.array([distance(fam.box, img, nxt) for img in images])
            margin = min(margin, float(delta - dists.max()))
    cond1_ok = margin > 0

    # Condition 2: contraction at the sink.
    beta_hat = -lyapunov_top(fam, pts[0], space_max, seed + 1, n_steps=4000, burn=100)
    cond2_ok = beta_hat > 0

    # Condition 3: tail clouds track the orbit at scale eps.
    diameters = {}
    cond3_ok = True
    tail_start = horizon - max(1, horizon // 10)
    for eps in epsilons:
        space_eps = PerturbationSpace(fam.n_params, eps)
        phase_clouds = [[] for _ in range(r)]
        for trial in range(n_trials):
            stream = PerturbationStream(seed + 2, trial)
            x = pts[0]
            for k in range(horizon):
                x = fam.eval_map(x, sample_parameter(space_eps, stream))
                if k >= tail_start:
                    phase_clouds[(k + 1) % r].append(x)
        diams = []
        for cloud in phase_clouds:
            arr = np.asarray(cloud)
            extent = arr.max(axis=0) - arr.min(axis=0)
            diams.append(float(np.linalg.norm(extent)))
        diameters[eps] = diams
        if eps > 0 and max(diams) > diam_slope * eps:
            cond3_ok = False

    return SinkReport(
        passed=bool(cond1_ok and cond2_ok and cond3_ok),
        cond1_ok=bool(cond1_ok),
        cond1_margin=float(margin),
        cond2_ok=bool(cond2_ok),
        beta_hat=float(beta_hat),
        cond3_ok=bool(cond3_ok),
        diameters=diameters,
        delta=float(delta),
        epsilons=epsilons,
    )


# ---------------------------------------------------------------------------
# Time-average diagnostics


def time_average_oscillation(
    fam: ParametricFamily,
    x0,
    phi: Callable,
    checkpoints: Sequence[int],
    space: Optional[PerturbationSpace] = None,
    seed: int = 0,
) -> tuple:
    """Running Birkhoff averages at checkpoints and their oscillation.

    Computes ``A(n) = (1/n) sum_{j=1..n} phi(x_j)`` for each ``n`` in
    ``checkpoints`` along a single orbit (``space=None`` iterates the
    unperturbed map) and returns ``(osc, averages)`` where ``osc`` is
    the largest pairwise difference ``|A(n) - A(m)|`` and ``averages``
    maps each checkpoint to its value.
    """
    checkpoints = sorted(int(n) for n in checkpoints)
    if not checkpoints or checkpoints[0] < 1:
        raise ValueError("checkpoints must be positive integers")
    x = np.asarray(x0, dtype=float).reshape(fam.dim)
    stream = PerturbationStream(seed, 0) if space is not None else None
    zeros = np.zeros(fam.n_params)
    total = 0.0
    averages = {}
    marks = set(checkpoints)
    horizon = checkpoints[-1]
    done = 0
    while done < horizon:
        block = min(_CHUNK, horizon - done)
        if space is not None:
            params = sample_parameters(space, stream, block)
        for k in range(block):
            t = params[k] if space is not None else zeros
            x = fam.eval_map(x, t)
            total += float(phi(x))
            step = done + k + 1
            if step in marks:
                averages[step] = total / step
        done += block
    values = [averages[n] for n in checkpoints]
    osc = float(max(values) - min(values))
    return osc, averages


def make_observable(kind: str, axis: int = 0, freq: int = 1, lower=None, upper=None) -> Callable:
    """Build a scalar observable: ``coord``, ``cos``, ``sin``, or ``indicator``."""
    if kind == "coord":
        return lambda x: float(np.asarray(x).ravel()[axis])
    if kind == "cos":
        return lambda x: float(np.cos(2.0 * np.pi * freq * np.asarray(x).ravel()[axis]))
    if kind == "sin":
        return lambda x: float(np.sin(2.0 * np.pi * freq * np.asarray(x).ravel()[axis]))
    if kind == "indicator":
        if lower is None or upper is None:
            raise ValueError("indicator observable needs lower and upper bounds")
        lo = np.asarray(lower, dtype=float).ravel()
        hi = np.asarray(upper, dtype=float).ravel()
        return lambda x: float(
            np.all(np.asarray(x).ravel() >= lo) and np.all(np.asarray(x).ravel() <= hi)
        )
    raise ValueError(f"unknown observable kind {kind!r}")
