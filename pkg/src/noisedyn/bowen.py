"""Two-eye planar flow on the cylinder with an attracting saddle network.

The construction starts from the Hamiltonian

    H(x, y) = y^2 / 2 - cos(4 pi x) / (4 pi)^2

on the cylinder (x periodic in [0, 1), y in [-1, 1]).  H has centers at
x = 0 and x = 1/2 and saddles at (1/4, 0) and (3/4, 0).  Both saddles
sit on the level H = h_s = 1/(16 pi^2), whose level set is a pair of
closed curves y = +-cos(2 pi x)/(2 pi) crossing at the saddles: the
"eyes".  Three modifications produce the final field:

* dissipation ``- kappa (H - h_s) grad H`` pushes orbits toward the
  eye level set from both sides while leaving it exactly invariant;
  the interior centers become spiral sources;
* a time change ``1 + sigma sin(2 pi x)`` (a positive scalar factor)
  breaks left/right symmetry, speeding the flow up near one saddle and
  slowing it near the other;
* a small tilt ``- eta cos(2 pi x) e_x`` vanishes at both saddles but
  skews their linearizations so that the product of the stable
  eigenvalue magnitudes strictly exceeds the product of the unstable
  ones.  The tilt leaves the saddle locations exact and moves points
  of the eye level set by less than 1e-5 per unit time.

The time-one map of the field is integrated with a fixed-step RK4
scheme compiled with numba; `flow_time_one_many` is the hot path used
by the ``bowen-eye`` map family.
"""
from __future__ import annotations

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi
FOUR_PI = 4.0 * np.pi

#: H value at both saddles (level of the eye boundary).
H_SADDLE = 1.0 / (16.0 * np.pi ** 2)

#: Default field parameters; kappa sets the dissipation strength,
#: sigma the left/right time change, eta the eigenvalue tilt.
KAPPA = 0.15
SIGMA = 0.3
ETA = 5e-5

#: Default RK4 step for the time-one map.
RK4_STEP = 1e-2

#: Exact equilibrium positions of the two saddles.
SADDLE_POINTS = ((0.25, 0.0), (0.75, 0.0))


def hamiltonian(x, y):
    return 0.5 * np.asarray(y) ** 2 - np.cos(FOUR_PI * np.asarray(x)) / (16.0 * np.pi ** 2)


def field(x, y, kappa=KAPPA, sigma=SIGMA, eta=ETA):
    """Vector field value(s); broadcasts over array input."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hx = np.sin(FOUR_PI * x) / FOUR_PI
    hh = hamiltonian(x, y) - H_SADDLE
    s = 1.0 + sigma * np.sin(TWO_PI * x)
    fx = s * (y - kappa * hh * hx) - eta * np.cos(TWO_PI * x)
    fy = s * (-hx - kappa * hh * y)
    return fx, fy


def field_jacobian(x, y, kappa=KAPPA, sigma=SIGMA, eta=ETA):
    """Analytic Jacobian of the field at a single point."""
    hx = np.sin(FOUR_PI * x) / FOUR_PI
    hh = float(hamiltonian(x, y)) - H_SADDLE
    c4 = np.cos(FOUR_PI * x)
    s = 1.0 + sigma * np.sin(TWO_PI * x)
    sp = TWO_PI * sigma * np.cos(TWO_PI * x)
    bx = y - kappa * hh * hx
    by = -hx - kappa * hh * y
    dbx_dx = -kappa * (hx * hx + hh * c4)
    dbx_dy = 1.0 - kappa * y * hx
    dby_dx = -c4 - kappa * hx * y
    dby_dy = -kappa * (y * y + hh)
    return np.array(
        [
            [sp * bx + s * dbx_dx + eta * TWO_PI * np.sin(TWO_PI * x), s * dbx_dy],
            [sp * by + s * dby_dx, s * dby_dy],
        ]
    )


@njit(cache=True)
def _field_scalar(x, y, kappa, sigma, eta):
    hx = np.sin(FOUR_PI * x) / FOUR_PI
    hh = 0.5 * y * y - np.cos(FOUR_PI * x) / (16.0 * np.pi ** 2) - H_SADDLE
    s = 1.0 + sigma * np.sin(TWO_PI * x)
    fx = s * (y - kappa * hh * hx) - eta * np.cos(TWO_PI * x)
    fy = s * (-hx - kappa * hh * y)
    return fx, fy


@njit(cache=True)
def _flow_rk4(pts, kappa, sigma, eta, h, nsteps):
    out = pts.copy()
    for i in range(out.shape[0]):
        x = out[i, 0]
        y = out[i, 1]
        for _ in range(nsteps):
            k1x, k1y = _field_scalar(x, y, kappa, sigma, eta)
            k2x, k2y = _field_scalar(x + 0.5 * h * k1x, y + 0.5 * h * k1y, kappa, sigma, eta)
            k3x, k3y = _field_scalar(x + 0.5 * h * k2x, y + 0.5 * h * k2y, kappa, sigma, eta)
            k4x, k4y = _field_scalar(x + h * k3x, y + h * k3y, kappa, sigma, eta)
            x = x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
            y = y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
        out[i, 0] = x
        out[i, 1] = y
    return out


def flow_time_one_many(points, kappa=KAPPA, sigma=SIGMA, eta=ETA, step=RK4_STEP):
    """Apply the time-one flow map to an ``(m, 2)`` batch of points."""
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    nsteps = int(round(1.0 / step))
    out = _flow_rk4(pts, float(kappa), float(sigma), float(eta), 1.0 / nsteps, nsteps)
    if not np.all(np.isfinite(out)):
        raise ValueError("time-one flow produced non-finite coordinates")
    return out


def refine_equilibrium(guess, kappa=KAPPA, sigma=SIGMA, eta=ETA, tol=1e-13, maxiter=60):
    """Newton refinement of a field equilibrium from an initial guess."""
    p = np.array(guess, dtype=float)
    for _ in range(maxiter):
        fx, fy = field(p[0], p[1], kappa, sigma, eta)
        f = np.array([float(fx), float(fy)])
        if np.linalg.norm(f) <= tol:
            return p
        j = field_jacobian(p[0], p[1], kappa, sigma, eta)
        p = p - np.linalg.solve(j, f)
    raise RuntimeError("Newton iteration for equilibrium did not converge")


def saddles(kappa=KAPPA, sigma=SIGMA, eta=ETA):
    """Newton-refined saddle positions, eigenvalues sorted ascending."""
    out = []
    for guess in ((0.26, 0.01), (0.74, -0.01)):
        p = refine_equilibrium(guess, kappa, sigma, eta)
        ev = np.sort(np.linalg.eigvals(field_jacobian(p[0], p[1], kappa, sigma, eta)).real)
        out.append((p, ev))
    return out


def eigenvalue_products(kappa=KAPPA, sigma=SIGMA, eta=ETA):
    """(product of stable magnitudes, product of unstable magnitudes)."""
    s = saddles(kappa, sigma, eta)
    stable = abs(s[0][1][0]) * abs(s[1][1][0])
    unstable = abs(s[0][1][1]) * abs(s[1][1][1])
    return stable, unstable


def separatrix_points(n=1024):
    """Sample both closed curves of the eye level set, shape ``(2n, 2)``."""
    xs = np.linspace(0.0, 1.0, n, endpoint=False)
    ys = np.cos(TWO_PI * xs) / TWO_PI
    return np.concatenate(
        [np.column_stack([xs, ys]), np.column_stack([xs, -ys])], axis=0
    )


def separatrix_distance(points, n=4096):
    """Distance from each point to the eye level set (x wrapped mod 1)."""
    ref = separatrix_points(n)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dx = np.abs(pts[:, None, 0] - ref[None, :, 0])
    dx = np.minimum(dx, 1.0 - dx)
    dy = pts[:, None, 1] - ref[None, :, 1]
    d = np.sqrt(dx * dx + dy * dy).min(axis=1)
    return d if d.size > 1 else float(d[0])
