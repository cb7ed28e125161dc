"""Semi-Lagrangian value iteration on a regular reduced-coordinate grid.

The solver iterates the discrete dynamic-programming fixed point

    V_i <- min_u { exp(-discount*dt) * I[V](x_i + dt * f(x_i, u)) + dt * g(x_i, u) }

over all grid nodes, where ``I`` is clamped multilinear interpolation.  Foot
points are constant across sweeps (the dynamics do not depend on the
iterate), so their interpolation stencils are precomputed once per control
when this fits in the configured memory budget; otherwise they are rebuilt
every sweep from the cached foot coordinates.
"""

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_vector
from .errors import BlowUpError, DivergenceError
from .models import BLOWUP_GUARD, Trajectory

__all__ = [
    "ValueGrid",
    "interpolate",
    "ValueIterationSolver",
    "closed_loop",
]

#: Default nodes per axis, keyed by grid dimension (cost grows as N^dim).
#: Chosen so the near-origin region of the box stays resolved while a full
#: solve with a few hundred controls remains a desk-scale computation.
DEFAULT_NODES = {1: 641, 2: 161, 3: 41, 4: 15}


@dataclass
class ValueGrid:
    """Node values on a uniform box grid; ``values.shape`` sets the nodes."""

    lower: np.ndarray
    upper: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.lower = as_vector(self.lower, "lower")
        self.upper = as_vector(self.upper, "upper")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.lower.size or self.lower.size != self.upper.size:
            raise ValueError("values dimension must match lower/upper length")
        if any(n < 2 for n in self.values.shape):
            raise ValueError("every axis needs at least 2 nodes")
        if np.any(self.upper <= self.lower):
            raise ValueError("upper must exceed lower on every axis")

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    @property
    def spacing(self):
        return (self.upper - self.lower) / (np.array(self.shape) - 1)

    @property
    def axes(self):
        return [
            np.linspace(self.lower[d], self.upper[d], self.shape[d])
            for d in range(self.ndim)
        ]

    def nodes(self):
        """All node coordinates, lexicographic (C) order, shape (N_G, ndim)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.ndim)

    def save(self, path):
        """Textual export: dimension, per-axis (lower, upper, N), node values."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.ndim}\n")
            for d in range(self.ndim):
                fh.write(
                    f"{self.lower[d]:.17g} {self.upper[d]:.17g} {self.shape[d]}\n"
                )
            for v in self.values.reshape(-1):
                fh.write(f"{v:.17g}\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            ndim = int(fh.readline())
            lower, upper, shape = [], [], []
            for _ in range(ndim):
                lo, hi, n = fh.readline().split()
                lower.append(float(lo))
                upper.append(float(hi))
                shape.append(int(n))
            values = np.array([float(fh.readline()) for _ in range(np.prod(shape))])
        return cls(np.array(lower), np.array(upper), values.reshape(shape))


def _corner_table(ndim):
    return np.array(list(itertools.product((0, 1), repeat=ndim)), dtype=np.int64)


def _stencil(grid, points):
    """Flat corner indices and blend weights for clamped multilinear lookup."""
    shape = np.array(grid.shape)
    t = (points - grid.lower) / grid.spacing
    t = np.clip(t, 0.0, shape - 1.0)
    cell = np.minimum(t.astype(np.int64), shape - 2)
    frac = t - cell

    corners = _corner_table(grid.ndim)
    strides = np.ones(grid.ndim, dtype=np.int64)
    strides[:-1] = np.cumprod(shape[::-1])[::-1][1:]
    flat = (cell[:, None, :] + corners[None, :, :]) @ strides
    weights = np.ones((points.shape[0], corners.shape[0]))
    for d in range(grid.ndim):
        w_high = frac[:, d : d + 1]
        weights *= np.where(corners[None, :, d] == 1, w_high, 1.0 - w_high)
    return flat.astype(np.int32), weights


def interpolate(grid, points):
    """Clamped multilinear interpolation of grid values at query points.

    ``points`` may be a single coordinate vector or a stack of rows.
    Coordinates outside the box are clamped to the boundary before blending;
    at a node the node value is reproduced.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != grid.ndim:
        raise ValueError(f"points must have {grid.ndim} coordinates")
    idx, wts = _stencil(grid, pts)
    out = np.einsum("nc,nc->n", grid.values.reshape(-1)[idx], wts)
    return float(out[0]) if single else out


class ValueIterationSolver(BaseEstimator):
    """Fixed-point value iteration for the reduced optimal control problem.

    Parameters
    ----------
    controls : array_like
        Discrete admissible control values, shape (M,) or (M, m); sorted
        ascending when scalar.
    dt : float
        Semi-Lagrangian time step; also the feedback update period used by
        :func:`closed_loop`.
    tol : float
        Sup-norm increment below which the iteration stops.
    max_iter : int
        Sweep cap; hitting it leaves ``converged_`` False and warns.
    nodes_per_axis : int, sequence of int, or None
        Grid resolution; None picks a default by dimension.
    divergence_bound : float
        Sup-norm of the iterate above which DivergenceError is raised.
    stencil_memory_mb : float
        Budget for precomputed interpolation stencils; above it, stencils
        are rebuilt from cached foot points every sweep.

    Attributes (after fit)
    ----------------------
    grid_ : ValueGrid
        Converged node values over the reduced box.
    n_iter_, final_increment_, converged_ : iteration diagnostics.
    """

    def __init__(
        self,
        controls,
        dt=0.01,
        tol=1e-6,
        max_iter=5000,
        nodes_per_axis=None,
        divergence_bound=1e9,
        stencil_memory_mb=3072.0,
    ):
        self.controls = controls
        self.dt = dt
        self.tol = tol
        self.max_iter = max_iter
        self.nodes_per_axis = nodes_per_axis
        self.divergence_bound = divergence_bound
        self.stencil_memory_mb = stencil_memory_mb

    def _control_matrix(self):
        u = np.asarray(self.controls, dtype=float)
        if u.size == 0:
            raise ValueError("controls must be nonempty")
        if u.ndim == 1:
            u = np.sort(u)[:, None]
        elif u.ndim != 2:
            raise ValueError("controls must be 1-d or 2-d")
        return u

    def _grid_shape(self, ndim):
        spec = self.nodes_per_axis
        if spec is None:
            spec = DEFAULT_NODES.get(ndim, 7)
        if np.isscalar(spec):
            return (int(spec),) * ndim
        shape = tuple(int(s) for s in spec)
        if len(shape) != ndim:
            raise ValueError(f"nodes_per_axis must have {ndim} entries")
        return shape

    def fit(self, reduced_system):
        """Run the value iteration for a reduced system; returns self."""
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        rsys = reduced_system
        ndim = rsys.order
        shape = self._grid_shape(ndim)
        grid = ValueGrid(rsys.lower, rsys.upper, np.zeros(shape))
        nodes = grid.nodes()
        n_nodes = nodes.shape[0]

        u_set = self._control_matrix()
        n_controls = u_set.shape[0]
        state_cost = np.einsum("ni,ij,nj->n", nodes, rsys.q_cost, nodes)
        control_cost = np.einsum("ki,ij,kj->k", u_set, rsys.r_cost, u_set)
        decay = math.exp(-rsys.discount * self.dt)

        # Foot points never change across sweeps: x + dt*f(x, u_k).
        drift = nodes + self.dt * rsys.drift(nodes)
        offsets = self.dt * (u_set @ rsys.b.T)

        stencil_bytes = n_controls * n_nodes * (2**ndim) * 12
        precompute = stencil_bytes <= self.stencil_memory_mb * 2**20
        stencils = None
        if precompute:
            stencils = [_stencil(grid, drift + offsets[k]) for k in range(n_controls)]

        values = np.zeros(n_nodes)
        converged = False
        increment = np.inf
        it = 0
        for it in range(1, self.max_iter + 1):
            best = np.full(n_nodes, np.inf)
            for k in range(n_controls):
                if precompute:
                    idx, wts = stencils[k]
                else:
                    idx, wts = _stencil(grid, drift + offsets[k])
                candidate = decay * np.einsum("nc,nc->n", values[idx], wts)
                candidate += self.dt * (state_cost + control_cost[k])
                np.minimum(best, candidate, out=best)
            increment = float(np.max(np.abs(best - values)))
            values = best
            if np.max(np.abs(values)) > self.divergence_bound:
                raise DivergenceError(
                    f"value iteration diverged at sweep {it}: "
                    f"sup-norm above {self.divergence_bound:g}"
                )
            if increment <= self.tol:
                converged = True
                break
        if not converged:
            warnings.warn(
                f"value iteration hit the sweep cap {self.max_iter} "
                f"(last increment {increment:.3e})",
                stacklevel=2,
            )

        grid.values = values.reshape(shape)
        self.reduced_system_ = rsys
        self.grid_ = grid
        self.n_iter_ = it
        self.final_increment_ = increment
        self.converged_ = converged
        self.control_set_ = u_set
        self._control_cost = control_cost
        return self

    def _check_domain(self, x):
        radius = self.reduced_system_.radius
        if np.max(np.abs(x)) > radius * (1.0 + 1e-12):
            # static message so repeated hits deduplicate to a single warning
            warnings.warn(
                f"state sup-norm exceeds the trusted radius {radius:g}; "
                "values are extrapolated from the clamped projection",
                stacklevel=3,
            )

    def reduced_value(self, points):
        """Interpolated value at reduced coordinates."""
        check_is_fitted(self, "grid_")
        return interpolate(self.grid_, points)

    def value(self, x):
        """Approximate value at full states: interpolate at ``W^T x``.

        Accepts a single state or a stack of states as rows.
        """
        check_is_fitted(self, "grid_")
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        return self.reduced_value(x @ self.reduced_system_.basis.w)

    def predict(self, x):
        """Alias for :meth:`value`."""
        return self.value(x)

    def control(self, x):
        """Feedback control at a full state: semi-Lagrangian one-step argmin.

        Ties are broken toward the control of smallest magnitude, then
        smallest index in the sorted control set.
        """
        check_is_fitted(self, "grid_")
        x = as_vector(x, "x")
        self._check_domain(x)
        rsys = self.reduced_system_
        y = rsys.basis.w.T @ x
        drift = y + self.dt * rsys.drift(y[None, :])[0]
        feet = drift[None, :] + self.dt * (self.control_set_ @ rsys.b.T)
        scores = math.exp(-rsys.discount * self.dt) * interpolate(self.grid_, feet)
        scores += self.dt * (y @ rsys.q_cost @ y + self._control_cost)
        ties = np.flatnonzero(scores == scores.min())
        magnitudes = np.linalg.norm(self.control_set_[ties], axis=1)
        return self.control_set_[ties[np.lexsort((ties, magnitudes))[0]]].copy()


def closed_loop(solver, system, x0, dt=1e-4, horizon=5.0):
    """Simulate the full system under the solver's feedback control.

    The control is re-evaluated every ``solver.dt`` time units (zero-order
    hold in between) while the state advances by explicit Euler with step
    ``dt``.  Returns the closed-loop trajectory.
    """
    if dt <= 0.0 or horizon <= 0.0:
        raise ValueError("dt and horizon must be positive")
    x0 = as_vector(x0, "x0", size=system.dim)
    hold_steps = max(1, int(round(solver.dt / dt)))
    n_steps = int(round(horizon / dt))
    times = dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, system.dim))
    controls = np.empty((n_steps + 1, system.n_controls))
    y = x0.copy()
    states[0] = y
    u = solver.control(y)
    for k in range(n_steps):
        if k % hold_steps == 0:
            u = solver.control(y)
        controls[k] = u
        y = y + dt * system.dynamics(y, u)
        if np.max(np.abs(y)) > BLOWUP_GUARD:
            raise BlowUpError(f"closed loop blew up at step {k + 1}", step=k + 1)
        states[k + 1] = y
    controls[n_steps] = u
    return Trajectory(
        times=times, states=states, controls=controls, outputs=states @ system.c.T
    )
