"""Parametric map families on boxes, and the built-in catalogue.

A :class:`ParametricFamily` bundles a phase-space box with a map
``(x, t) -> f_t(x)`` depending on a bounded parameter vector ``t``.
The parameter is the *noise* slot: driving the family with i.i.d.
draws of ``t`` from a small ball produces a random dynamical system.
Every evaluation canonicalizes the image back into the box (periodic
wrap or clamp per axis), so family maps are total on the box.

`make_builtin` constructs the named families used throughout the
package and its command-line tool; each builtin fixes a default
parameter-radius guard large enough for the regimes of interest.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .phase_space import CLAMP, PERIODIC, PhaseBox, canonicalize


class ParametricFamily:
    """A map family ``f_t`` on a box, with bounded parameter vector ``t``.

    Parameters
    ----------
    name : str
        Identifier used in reports and file headers.
    box : PhaseBox
        Phase-space box; images are canonicalized into it.
    n_params : int
        Dimension of the parameter vector.
    eval_one : callable
        ``(x, t) -> image`` for a single state ``x`` (shape ``(d,)``)
        and parameter ``t`` (shape ``(n_params,)``), before
        canonicalization.
    eval_many : callable, optional
        Vectorized ``(X, T) -> images`` for ``(m, d)`` states and
        ``(m, n_params)`` parameters.  Falls back to a loop over
        ``eval_one``.
    jacobian : callable, optional
        ``(x, t) -> (d, d)`` derivative of ``f_t`` with respect to the
        state, evaluated before canonicalization.
    max_param_radius : float
        Guard on ``|t|_2``; evaluations beyond it raise ``ValueError``.
    aux : dict, optional
        Free-form metadata (builtin constants, helper references).
    """

    def __init__(
        self,
        name: str,
        box: PhaseBox,
        n_params: int,
        eval_one: Callable,
        eval_many: Optional[Callable] = None,
        jacobian: Optional[Callable] = None,
        max_param_radius: float = np.inf,
        aux: Optional[dict] = None,
    ):
        if n_params < 1:
            raise ValueError("n_params must be at least 1")
        if max_param_radius < 0:
            raise ValueError("max_param_radius must be nonnegative")
        self.name = str(name)
        self.box = box
        self.n_params = int(n_params)
        self._eval_one = eval_one
        self._eval_many = eval_many
        self._jacobian = jacobian
        self.max_param_radius = float(max_param_radius)
        self.aux = dict(aux) if aux else {}
        self.nominal = np.zeros(self.n_params)

    @property
    def dim(self) -> int:
        return self.box.dim

    def _check_param(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.shape[-1] != self.n_params:
            raise ValueError(
                f"parameter has {t.shape[-1]} components, expected {self.n_params}"
            )
        norms = np.sqrt(np.sum(t * t, axis=-1))
        if np.any(norms > self.max_param_radius * (1.0 + 1e-12)):
            raise ValueError(
                f"parameter norm {float(np.max(norms)):g} exceeds guard "
                f"{self.max_param_radius:g} for family {self.name!r}"
            )
        return t

    def eval_map(self, x, t) -> np.ndarray:
        """Image of a single state under ``f_t``, canonicalized into the box."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        t = self._check_param(np.asarray(t, dtype=float).reshape(self.n_params))
        image = np.asarray(self._eval_one(x, t), dtype=float).reshape(self.dim)
        return canonicalize(self.box, image)

    def eval_many(self, X, T) -> np.ndarray:
        """Vectorized images for ``(m, d)`` states under ``(m, n_params)`` draws."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if X.shape[0] != T.shape[0]:
            raise ValueError("state batch and parameter batch differ in length")
        T = self._check_param(T)
        if self._eval_many is not None:
            images = np.asarray(self._eval_many(X, T), dtype=float)
        else:
            images = np.stack([self._eval_one(X[i], T[i]) for i in range(X.shape[0])])
        return canonicalize(self.box, images.reshape(X.shape[0], self.dim))

    def jacobian_state(self, x, t) -> np.ndarray:
        """State derivative of ``f_t`` at ``x`` (no canonicalization)."""
        if self._jacobian is None:
            raise NotImplementedError(f"family {self.name!r} has no state Jacobian")
        x = np.asarray(x, dtype=float).reshape(self.dim)
        t = self._check_param(np.asarray(t, dtype=float).reshape(self.n_params))
        return np.asarray(self._jacobian(x, t), dtype=float).reshape(self.dim, self.dim)


class VectorField2D:
    """A planar autonomous field with a fixed-step RK4 time-one map."""

    def __init__(self, func: Callable, step: float = 1e-2):
        if step <= 0 or step > 1:
            raise ValueError("step must lie in (0, 1]")
        self.func = func
        self.step = float(step)

    def flow_time_one(self, points) -> np.ndarray:
        """Integrate each row of ``(m, 2)`` over unit time with RK4."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        nsteps = int(round(1.0 / self.step))
        h = 1.0 / nsteps
        x, y = pts[:, 0], pts[:, 1]
        for _ in range(nsteps):
            k1x, k1y = self.func(x, y)
            k2x, k2y = self.func(x + 0.5 * h * k1x, y + 0.5 * h * k1y)
            k3x, k3y = self.func(x + 0.5 * h * k2x, y + 0.5 * h * k2y)
            k4x, k4y = self.func(x + h * k3x, y + h * k3y)
            x = x + h * (k1x + 2 * k2x + 2 * k3x + k4x) / 6.0
            y = y + h * (k1y + 2 * k2y + 2 * k3y + k4y) / 6.0
        return np.column_stack([x, y])


#: Names accepted by `make_builtin`.
BUILTIN_NAMES = (
    "torus-additive",
    "logistic-noise",
    "double-sink",
    "triple-sink",
    "bowen-eye",
    "henon-arc",
    "linear-sink",
)


def _make_torus(options: dict) -> ParametricFamily:
    base = options.get("base", "rotation")
    if base == "cat":
        dim = 2
    elif base == "rotation":
        dim = 1
    elif base == "identity":
        dim = int(options.get("dim", 1))
        if dim not in (1, 2):
            raise ValueError("identity base supports dim 1 or 2")
    else:
        raise ValueError(f"unknown torus base {base!r}")
    box = PhaseBox(np.zeros(dim), np.ones(dim), [PERIODIC] * dim)
    alpha = float(options.get("alpha", np.sqrt(2.0) - 1.0))

    if base == "identity":
        mat = np.eye(dim)
    elif base == "rotation":
        mat = np.eye(1)
    else:
        mat = np.array([[2.0, 1.0], [1.0, 1.0]])
    shift = np.full(dim, alpha) if base == "rotation" else np.zeros(dim)

    def one(x, t):
        return mat @ x + shift + t

    def many(X, T):
        return X @ mat.T + shift + T

    return ParametricFamily(
        name="torus-additive",
        box=box,
        n_params=dim,
        eval_one=one,
        eval_many=many,
        jacobian=lambda x, t: mat,
        max_param_radius=0.75,
        aux={"base": base, "alpha": alpha},
    )


def _make_logistic(options: dict) -> ParametricFamily:
    lam = float(options.get("lam", 3.2))
    box = PhaseBox([0.0], [1.0], [CLAMP])

    return ParametricFamily(
        name="logistic-noise",
        box=box,
        n_params=1,
        eval_one=lambda x, t: lam * x * (1.0 - x) + t,
        eval_many=lambda X, T: lam * X * (1.0 - X) + T,
        jacobian=lambda x, t: np.array([[lam * (1.0 - 2.0 * x[0])]]),
        max_param_radius=0.25,
        aux={"lam": lam},
    )


def _make_double_sink(options: dict) -> ParametricFamily:
    c = float(options.get("c", 0.5))
    box = PhaseBox([-2.0], [2.0], [CLAMP])

    def one(x, t):
        return x - c * x * (x * x - 1.0) + t

    return ParametricFamily(
        name="double-sink",
        box=box,
        n_params=1,
        eval_one=one,
        eval_many=one,
        jacobian=lambda x, t: np.array([[1.0 - c * (3.0 * x[0] * x[0] - 1.0)]]),
        max_param_radius=0.5,
        aux={"c": c},
    )


def _make_triple_sink(options: dict) -> ParametricFamily:
    c = float(options.get("c", 1.0))
    tau = float(options.get("tau", 0.45))
    box = PhaseBox([-1.4], [1.4], [CLAMP])
    t2 = tau * tau

    def one(x, t):
        x2 = x * x
        return x - c * x * (x2 - 1.0) * (x2 - t2) + t

    def jac(x, t):
        x2 = x[0] * x[0]
        dp = 5.0 * x2 * x2 - 3.0 * (1.0 + t2) * x2 + t2
        return np.array([[1.0 - c * dp]])

    return ParametricFamily(
        name="triple-sink",
        box=box,
        n_params=1,
        eval_one=one,
        eval_many=one,
        jacobian=jac,
        max_param_radius=0.5,
        aux={"c": c, "tau": tau},
    )


def _make_bowen(options: dict) -> ParametricFamily:
    from . import bowen  # deferred: numba compilation is heavy

    kappa = float(options.get("kappa", bowen.KAPPA))
    sigma = float(options.get("sigma", bowen.SIGMA))
    eta = float(options.get("eta", bowen.ETA))
    step = float(options.get("step", bowen.RK4_STEP))
    box = PhaseBox([0.0, -1.0], [1.0, 1.0], [PERIODIC, CLAMP])

    def many(X, T):
        return bowen.flow_time_one_many(X, kappa, sigma, eta, step) + T

    def one(x, t):
        return many(x[None, :], t[None, :])[0]

    def jac(x, t):
        h = 1e-6
        cols = []
        for axis in range(2):
            dp = np.zeros(2)
            dp[axis] = h
            hi = bowen.flow_time_one_many((x + dp)[None, :], kappa, sigma, eta, step)[0]
            lo = bowen.flow_time_one_many((x - dp)[None, :], kappa, sigma, eta, step)[0]
            cols.append((hi - lo) / (2.0 * h))
        return np.column_stack(cols)

    return ParametricFamily(
        name="bowen-eye",
        box=box,
        n_params=2,
        eval_one=one,
        eval_many=many,
        jacobian=jac,
        max_param_radius=0.1,
        aux={"kappa": kappa, "sigma": sigma, "eta": eta, "step": step},
    )


def _make_henon(options: dict) -> ParametricFamily:
    a = float(options.get("a", 1.4))
    b = float(options.get("b", 0.3))
    box = PhaseBox([-3.0, -3.0], [3.0, 3.0], [CLAMP, CLAMP])

    def one(x, t):
        return np.array([1.0 - (a + t[0]) * x[0] * x[0] + x[1], b * x[0]])

    def many(X, T):
        out = np.empty_like(X)
        out[:, 0] = 1.0 - (a + T[:, 0]) * X[:, 0] * X[:, 0] + X[:, 1]
        out[:, 1] = b * X[:, 0]
        return out

    def jac(x, t):
        return np.array([[-2.0 * (a + t[0]) * x[0], 1.0], [b, 0.0]])

    return ParametricFamily(
        name="henon-arc",
        box=box,
        n_params=1,
        eval_one=one,
        eval_many=many,
        jacobian=jac,
        max_param_radius=0.1,
        aux={"a": a, "b": b},
    )


def _make_linear_sink(options: dict) -> ParametricFamily:
    rho = float(options.get("rho", 0.5))
    box = PhaseBox([-1.0], [1.0], [CLAMP])

    return ParametricFamily(
        name="linear-sink",
        box=box,
        n_params=1,
        eval_one=lambda x, t: rho * x + t,
        eval_many=lambda X, T: rho * X + T,
        jacobian=lambda x, t: np.array([[rho]]),
        max_param_radius=0.5,
        aux={"rho": rho},
    )


_BUILDERS = {
    "torus-additive": _make_torus,
    "logistic-noise": _make_logistic,
    "double-sink": _make_double_sink,
    "triple-sink": _make_triple_sink,
    "bowen-eye": _make_bowen,
    "henon-arc": _make_henon,
    "linear-sink": _make_linear_sink,
}


def make_builtin(name: str, **options) -> ParametricFamily:
    """Construct a named builtin family; ``options`` override constants."""
    if name not in _BUILDERS:
        known = ", ".join(BUILTIN_NAMES)
        raise ValueError(f"unknown builtin family {name!r}; known: {known}")
    return _BUILDERS[name](options)
