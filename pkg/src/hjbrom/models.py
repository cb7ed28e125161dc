"""Finite-difference benchmark models and explicit-Euler simulation.

Two control systems on the interval (-1, 1) with homogeneous Dirichlet
boundaries are provided: a linear heat equation with advection and a viscous
Burgers equation whose transport term enters as a state-dependent upwind
nonlinearity.  Forward simulation and backward adjoint simulation produce the
snapshot trajectories consumed by the reduction methods.
"""

import warnings
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from ._validation import as_matrix, as_vector, check_symmetric
from .errors import BlowUpError

__all__ = [
    "ControlSystem",
    "Trajectory",
    "build_advection_diffusion",
    "build_burgers",
    "simulate",
    "simulate_adjoint",
]

#: States above this sup-norm abort a simulation as blown up.
BLOWUP_GUARD = 1e6


@dataclass
class ControlSystem:
    """Semi-discretized control system ``dy/dt = a y + b u + nonlinear(y)``.

    The quadratic running cost is ``y^T q_cost y + u^T r_cost u`` discounted
    at rate ``discount``; the scalar output is ``z = c y``.  ``grid`` holds
    the interior spatial points and ``mesh`` their spacing.  For linear
    systems both nonlinear callables are None; otherwise ``nonlinear`` maps
    states with the state on the last axis and ``nonlinear_jacobian`` maps a
    single state to its dense Jacobian.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    q_cost: np.ndarray
    r_cost: np.ndarray
    discount: float = 0.0
    grid: np.ndarray = field(default=None, repr=False)
    mesh: float = 0.0
    nonlinear: Optional[Callable] = None
    nonlinear_jacobian: Optional[Callable] = None

    def __post_init__(self):
        self.a = as_matrix(self.a, "a", square=True)
        n = self.a.shape[0]
        self.b = as_matrix(self.b, "b")
        self.c = as_matrix(self.c, "c")
        if self.b.shape[0] != n or self.c.shape[1] != n:
            raise ValueError("b/c shapes incompatible with a")
        self.q_cost = check_symmetric(as_matrix(self.q_cost, "q_cost", square=True))
        self.r_cost = check_symmetric(as_matrix(self.r_cost, "r_cost", square=True))
        if np.min(np.linalg.eigvalsh(self.q_cost)) < -1e-10 * max(
            np.linalg.norm(self.q_cost, "fro"), 1.0
        ):
            raise ValueError("q_cost must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(self.r_cost)) <= 0.0:
            raise ValueError("r_cost must be positive definite")
        if self.discount < 0.0:
            raise ValueError("discount must be nonnegative")
        if self.grid is None:
            self.grid = np.arange(n, dtype=float)
        self.grid = as_vector(self.grid, "grid", size=n)

    @property
    def dim(self):
        return self.a.shape[0]

    @property
    def n_controls(self):
        return self.b.shape[1]

    @property
    def n_outputs(self):
        return self.c.shape[0]

    def dynamics(self, y, u):
        """Right-hand side ``a y + b u (+ nonlinear(y))`` for one state."""
        f = self.a @ y + self.b @ np.atleast_1d(u)
        if self.nonlinear is not None:
            f = f + self.nonlinear(y)
        return f

    def output(self, y):
        return self.c @ y

    def linearized_a(self):
        """System matrix of the linearization around the zero state."""
        if self.nonlinear_jacobian is None:
            return self.a
        return self.a + self.nonlinear_jacobian(np.zeros(self.dim))


@dataclass
class Trajectory:
    """Uniformly sampled time series of states, controls and outputs."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        self.times = as_vector(self.times, "times")
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.controls = np.atleast_2d(np.asarray(self.controls, dtype=float))
        self.outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        k = self.times.size
        if not (len(self.states) == len(self.controls) == len(self.outputs) == k):
            raise ValueError("times, states, controls, outputs must have equal length")
        steps = np.diff(self.times)
        if k > 1 and (np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-8)):
            raise ValueError("times must be strictly increasing with uniform step")

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def to_csv(self, path):
        """Write ``t,y_1..y_n,u_1..u_m,z_1..z_q`` rows, one per time step."""
        n = self.states.shape[1]
        m = self.controls.shape[1]
        q = self.outputs.shape[1]
        header = ",".join(
            ["t"]
            + [f"y_{i + 1}" for i in range(n)]
            + [f"u_{i + 1}" for i in range(m)]
            + [f"z_{i + 1}" for i in range(q)]
        )
        table = np.hstack(
            [self.times[:, None], self.states, self.controls, self.outputs]
        )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for row in table:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def _interval_indicator(points, window, name):
    lo, hi = float(window[0]), float(window[1])
    if not (-1.0 <= lo < hi <= 1.0):
        raise ValueError(f"{name} must be an interval inside (-1, 1)")
    return ((points >= lo - 1e-12) & (points <= hi + 1e-12)).astype(float)


def _diffusion_matrix(n, diffusion, h):
    main = np.full(n, -2.0 * diffusion / h**2)
    off = np.full(n - 1, diffusion / h**2)
    return np.diag(main) + np.diag(off, -1) + np.diag(off, 1)


def build_advection_diffusion(
    n,
    diffusion,
    advection,
    control_window,
    observation_window,
    *,
    output_weight=20.0,
    control_weight=0.1,
    discount=0.0,
):
    """Linear heat benchmark: diffusion + upwinded advection on (-1, 1).

    ``n`` interior points with mesh ``h = 2/(n+1)``; the second derivative is
    discretized centrally and the first derivative by the upwind difference
    for the sign of ``advection``.  The single input acts as the indicator of
    ``control_window``; the single output averages the state over
    ``observation_window``.  The cost matrices are
    ``q_cost = output_weight * c^T c`` and ``r_cost = [[control_weight]]``.
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    if diffusion <= 0.0:
        raise ValueError("diffusion must be positive")
    h = 2.0 / (n + 1)
    xi = -1.0 + h * np.arange(1, n + 1)

    a = _diffusion_matrix(n, diffusion, h)
    if advection > 0.0:
        # wind blows right: backward difference
        a += advection / h * (np.diag(np.ones(n - 1), -1) - np.eye(n))
    elif advection < 0.0:
        a += advection / h * (np.eye(n) - np.diag(np.ones(n - 1), 1))

    b = _interval_indicator(xi, control_window, "control_window")[:, None]
    olo, ohi = observation_window
    c = (h / (float(ohi) - float(olo))) * _interval_indicator(
        xi, observation_window, "observation_window"
    )[None, :]
    return ControlSystem(
        a=a,
        b=b,
        c=c,
        q_cost=output_weight * c.T @ c,
        r_cost=np.array([[control_weight]]),
        discount=discount,
        grid=xi,
        mesh=h,
    )


def _upwind_transport(y, coeff, h):
    """State-dependent upwind discretization of ``-coeff * y * dy/dxi``."""
    y = np.asarray(y, dtype=float)
    zeros = np.zeros(y.shape[:-1] + (1,))
    left = np.concatenate([zeros, y[..., :-1]], axis=-1)
    right = np.concatenate([y[..., 1:], zeros], axis=-1)
    slope = np.where(y > 0.0, (y - left) / h, (right - y) / h)
    return -coeff * y * slope


def _upwind_transport_jacobian(y, coeff, h):
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    left = np.concatenate([[0.0], y[:-1]])
    right = np.concatenate([y[1:], [0.0]])
    backward = y > 0.0
    jac = np.zeros((n, n))
    idx = np.arange(n)
    jac[idx, idx] = np.where(
        backward, -coeff * (2.0 * y - left) / h, -coeff * (right - 2.0 * y) / h
    )
    rows = idx[1:][backward[1:]]
    jac[rows, rows - 1] = coeff * y[rows] / h
    rows = idx[:-1][~backward[:-1]]
    jac[rows, rows + 1] = -coeff * y[rows] / h
    return jac


def build_burgers(
    n,
    viscosity,
    advection_coeff,
    control_window,
    *,
    output_weight=100.0,
    control_weight=0.1,
    discount=1.0,
):
    """Viscous Burgers benchmark with state-dependent upwind transport.

    The linear part is the central diffusion stencil; the transport term
    ``-advection_coeff * y * dy/dxi`` is upwinded by the sign of the local
    state.  The output integrates the state over the whole domain
    (``c = h * ones``).
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    if viscosity <= 0.0:
        raise ValueError("viscosity must be positive")
    h = 2.0 / (n + 1)
    xi = -1.0 + h * np.arange(1, n + 1)
    a = _diffusion_matrix(n, viscosity, h)
    b = _interval_indicator(xi, control_window, "control_window")[:, None]
    c = h * np.ones((1, n))
    return ControlSystem(
        a=a,
        b=b,
        c=c,
        q_cost=output_weight * c.T @ c,
        r_cost=np.array([[control_weight]]),
        discount=discount,
        grid=xi,
        mesh=h,
        nonlinear=partial(_upwind_transport, coeff=advection_coeff, h=h),
        nonlinear_jacobian=partial(_upwind_transport_jacobian, coeff=advection_coeff, h=h),
    )


def _control_callable(control, m):
    if control is None:
        u0 = np.zeros(m)
        return lambda t: u0
    if callable(control):
        return lambda t: np.atleast_1d(np.asarray(control(t), dtype=float))
    u0 = np.atleast_1d(np.asarray(control, dtype=float))
    return lambda t: u0


def simulate(system, x0, control, dt, horizon):
    """Integrate the system by explicit Euler, recording every step.

    Parameters
    ----------
    system : ControlSystem
    x0 : (n,) array_like
        Initial state.
    control : callable, array_like or None
        Map ``t -> u``; a constant control value; or None for zero input.
    dt : float
        Time step (a warning is issued if it looks explicit-Euler unstable).
    horizon : float
        Final time; the number of steps is ``round(horizon / dt)``.

    Returns
    -------
    Trajectory

    Raises
    ------
    BlowUpError
        When the state sup-norm exceeds the overflow guard, naming the step.
    """
    if dt <= 0.0 or horizon <= 0.0:
        raise ValueError("dt and horizon must be positive")
    x0 = as_vector(x0, "x0", size=system.dim)
    u_of_t = _control_callable(control, system.n_controls)

    # Gershgorin estimate of the stiffest eigenvalue for a stability warning
    radius = float(np.max(np.sum(np.abs(system.a), axis=1)))
    if dt * radius > 2.0:
        warnings.warn(
            f"dt*|eig| estimate {dt * radius:.2f} > 2: explicit Euler may be unstable",
            stacklevel=2,
        )

    n_steps = int(round(horizon / dt))
    times = dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, system.dim))
    controls = np.empty((n_steps + 1, system.n_controls))
    y = x0.copy()
    states[0] = y
    for k in range(n_steps):
        u = u_of_t(times[k])
        controls[k] = u
        y = y + dt * system.dynamics(y, u)
        if np.max(np.abs(y)) > BLOWUP_GUARD:
            raise BlowUpError(f"simulation blew up at step {k + 1}", step=k + 1)
        states[k + 1] = y
    controls[n_steps] = u_of_t(times[n_steps])
    outputs = states @ system.c.T
    return Trajectory(times=times, states=states, controls=controls, outputs=outputs)


def simulate_adjoint(system, forward):
    """Integrate the adjoint state backward along a forward trajectory.

    Solves ``-dp/dt = J(y(t))^T p + 2 q_cost y(t)`` with ``p`` zero at the
    final time, where ``J`` is the Jacobian of the dynamics; the backward
    explicit-Euler steps reuse the forward time grid.  The returned
    trajectory carries the adjoint snapshots as states.
    """
    times = forward.times
    if times.size < 2:
        raise ValueError("forward trajectory must contain at least two samples")
    dt = forward.dt
    n = system.dim
    a_t = system.a.T
    p = np.zeros((times.size, n))
    for k in range(times.size - 2, -1, -1):
        y = forward.states[k + 1]
        rhs = a_t @ p[k + 1] + 2.0 * (system.q_cost @ y)
        if system.nonlinear_jacobian is not None:
            rhs = rhs + system.nonlinear_jacobian(y).T @ p[k + 1]
        p[k] = p[k + 1] + dt * rhs
        if np.max(np.abs(p[k])) > BLOWUP_GUARD:
            raise BlowUpError(f"adjoint simulation blew up at step {k}", step=k)
    return Trajectory(
        times=times,
        states=p,
        controls=forward.controls,
        outputs=p @ system.c.T,
    )
