"""Petrov-Galerkin basis construction and system projection.

Four ways to build a trial/test basis pair (V, W) with ``W^T V = I`` are
implemented: snapshot SVD of forward states, snapshot SVD of backward
adjoint states, balanced truncation of the linear(ized) system, and the
dominant eigenspace of the Riccati solution.  ``project`` assembles the
reduced system together with the box bounds that contain the projection of
every full state with sup-norm at most ``radius``.

Each method is available both as a plain function returning a
:class:`ReducedBasis` and as an sklearn-style reducer with
``fit``/``transform``/``inverse_transform``.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import linalg
from ._validation import as_matrix, check_symmetric, symmetrize
from .errors import RankDeficiencyError
from .models import Trajectory, simulate, simulate_adjoint

__all__ = [
    "ReducedBasis",
    "ReducedSystem",
    "snapshot_matrix",
    "pod_basis",
    "bt_basis",
    "riccati_basis",
    "project",
    "PODReducer",
    "AdjointPODReducer",
    "BalancedTruncationReducer",
    "RiccatiReducer",
    "make_reducer",
]

METHODS = ("POD", "PODadj", "BT", "Ricc")

#: Basis orders whose trailing singular value falls below this fraction of
#: the leading one are rejected as numerically rank-deficient.
RANK_TOL = 1e-13

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ReducedBasis:
    """Basis pair with ``w^T v = I`` plus the spectrum used to build it."""

    v: np.ndarray
    w: np.ndarray
    singular_values: np.ndarray
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.v.shape != self.w.shape:
            raise ValueError("v and w must have equal shape")
        gram = self.w.T @ self.v
        if np.max(np.abs(gram - np.eye(self.order))) > 1e-10:
            raise ValueError("basis violates w^T v = I to 1e-10")

    @property
    def order(self):
        return self.v.shape[1]

    @property
    def dim(self):
        return self.v.shape[0]

    def to_csv(self, path):
        """One column per trial basis vector."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(f"v_{i + 1}" for i in range(self.order)) + "\n")
            for row in self.v:
                fh.write(",".join(format(x, ".17g") for x in row) + "\n")


@dataclass
class ReducedSystem:
    """Projection ``dy/dt = w^T f(v y, u)`` with reduced cost and box bounds.

    ``lower``/``upper`` bound the image of the sup-norm ball of radius
    ``radius`` under ``w^T``; the reduced running cost is
    ``y^T q_cost y + u^T r_cost u`` with ``q_cost = v^T Q v``.
    """

    a: np.ndarray
    b: np.ndarray
    q_cost: np.ndarray
    r_cost: np.ndarray
    discount: float
    basis: ReducedBasis
    lower: np.ndarray
    upper: np.ndarray
    radius: float
    nonlinear: Optional[Callable] = field(default=None, repr=False)

    @property
    def order(self):
        return self.a.shape[0]

    @property
    def n_controls(self):
        return self.b.shape[1]

    def dynamics(self, y, u):
        f = self.a @ y + self.b @ np.atleast_1d(u)
        if self.nonlinear is not None:
            f = f + self.nonlinear(y)
        return f

    def drift(self, states):
        """Control-free part of the dynamics for stacked states (rows)."""
        f = states @ self.a.T
        if self.nonlinear is not None:
            f = f + self.nonlinear(states)
        return f


def _fix_signs(v, w):
    """Make each column's largest-magnitude entry positive (in tandem)."""
    for i in range(v.shape[1]):
        j = int(np.argmax(np.abs(v[:, i])))
        if v[j, i] < 0.0:
            v[:, i] = -v[:, i]
            if w is not v:
                w[:, i] = -w[:, i]
    return v, w


def snapshot_matrix(trajectory, max_columns=500):
    """Column-snapshot matrix of a trajectory, thinned by uniform stride."""
    states = trajectory.states if isinstance(trajectory, Trajectory) else np.asarray(trajectory)
    stride = max(1, -(-states.shape[0] // max_columns))
    return states[::stride].T.copy()


def _check_order(order, singular_values, what):
    if order < 1:
        raise ValueError("order must be at least 1")
    s = singular_values
    if s.size == 0 or s[0] <= 0.0:
        raise RankDeficiencyError(f"{what} has numerical rank 0")
    if order > s.size or s[order - 1] < RANK_TOL * s[0]:
        raise RankDeficiencyError(
            f"order {order} exceeds the numerical rank of the {what}"
        )


def pod_basis(snapshots, order):
    """Orthonormal basis from the dominant left singular vectors.

    ``snapshots`` holds one state per column; the Euclidean inner product is
    used throughout.  Raises RankDeficiencyError when ``order`` exceeds the
    numerical rank of the snapshot matrix.
    """
    y = as_matrix(snapshots, "snapshots")
    result = linalg.svd(y)
    _check_order(order, result.singular_values, "snapshot matrix")
    v = result.left_vectors[:, :order].copy()
    v, _ = _fix_signs(v, v)
    return ReducedBasis(
        v=v, w=v, singular_values=result.singular_values, method="POD"
    )


def _psd_sqrt_factor(gramian, what):
    """Rank-revealing factor F with F F^T = gramian, clipping negatives."""
    eigvals, eigvecs = linalg.sym_eig(gramian)
    top = max(float(eigvals[0]), 0.0)
    keep = eigvals > 1e-12 * max(top, 1e-300)
    if not np.any(keep):
        raise RankDeficiencyError(f"{what} Gramian is numerically zero")
    return eigvecs[:, keep] * np.sqrt(eigvals[keep])


def bt_basis(a, b, c, order):
    """Balanced-truncation basis pair from the system Gramians.

    Solves the reachability and observability Lyapunov equations, factors
    the Gramians through their eigendecompositions (safe for semidefinite
    matrices), takes the SVD of the Hankel product of the factors and scales
    the leading singular vectors so that ``w^T v = I``.  The stored spectrum
    is the full set of Hankel singular values.
    """
    a = as_matrix(a, "a", square=True)
    b = as_matrix(b, "b")
    c = as_matrix(c, "c")
    reach = linalg.solve_lyapunov(a, b @ b.T)
    observe = linalg.solve_lyapunov(a.T, c.T @ c)
    phi = _psd_sqrt_factor(reach, "reachability")
    ups = _psd_sqrt_factor(observe, "observability")
    hankel = linalg.svd(ups.T @ phi)
    sigma = hankel.singular_values
    _check_order(order, sigma, "Hankel operator")
    scale = 1.0 / np.sqrt(sigma[:order])
    w = ups @ hankel.left_vectors[:, :order] * scale
    v = phi @ hankel.right_vectors[:, :order] * scale
    v, w = _fix_signs(v, w)
    return ReducedBasis(v=v, w=w, singular_values=sigma, method="BT")


def riccati_basis(p, order):
    """Dominant eigenspace of a (symmetric PSD) Riccati solution.

    ``singular_values`` carries the full eigenvalue spectrum, sorted
    nonincreasing, so truncation error bounds can be evaluated.
    """
    p = check_symmetric(as_matrix(p, "p", square=True), "p", tol=1e-10)
    n = p.shape[0]
    if order > n:
        raise ValueError(f"order {order} exceeds the state dimension {n}")
    eigvals, eigvecs = linalg.sym_eig(p)
    if order < 1:
        raise ValueError("order must be at least 1")
    v = eigvecs[:, :order].copy()
    v, _ = _fix_signs(v, v)
    return ReducedBasis(v=v, w=v, singular_values=eigvals, method="Ricc")


def project(system, basis, radius):
    """Assemble the reduced system for states with sup-norm up to ``radius``.

    The box bound along reduced coordinate ``i`` is ``radius`` times the
    1-norm of the i-th test vector, which is tight: the extremum of
    ``(w^T x)_i`` over the sup-norm ball is attained at a sign vector.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    v, w = basis.v, basis.w
    reduced_nl = None
    if system.nonlinear is not None:
        full_nl = system.nonlinear

        def reduced_nl(y, _v=v, _w=w):
            return full_nl(np.asarray(y) @ _v.T) @ _w

    col_norms = np.sum(np.abs(w), axis=0)
    return ReducedSystem(
        a=w.T @ system.a @ v,
        b=w.T @ system.b,
        q_cost=symmetrize(v.T @ system.q_cost @ v),
        r_cost=system.r_cost,
        discount=system.discount,
        basis=basis,
        lower=-radius * col_norms,
        upper=radius * col_norms,
        radius=radius,
        nonlinear=reduced_nl,
    )


class _BaseReducer(BaseEstimator):
    """Shared fitted-state handling and state projection for reducers."""

    def _set_fitted(self, basis):
        self.basis_ = basis
        self.V_ = basis.v
        self.W_ = basis.w
        self.singular_values_ = basis.singular_values
        self.n_features_in_ = basis.dim
        return self

    def transform(self, X):
        """Project full states (rows) onto reduced coordinates."""
        check_is_fitted(self, "basis_")
        X = np.asarray(X, dtype=float)
        return X @ self.W_

    def inverse_transform(self, Y):
        """Lift reduced coordinates (rows) back to the full space."""
        check_is_fitted(self, "basis_")
        Y = np.asarray(Y, dtype=float)
        return Y @ self.V_.T

    def reduce(self, system, radius):
        """Project a full-order system onto the fitted basis."""
        check_is_fitted(self, "basis_")
        return project(system, self.basis_, radius)


class PODReducer(TransformerMixin, _BaseReducer):
    """Snapshot-SVD basis of simulated states.

    Parameters
    ----------
    n_components : int
        Basis order.
    max_snapshots : int
        When fitting from a Trajectory, thin to at most this many columns by
        uniform stride; raw arrays are used as given.
    """

    def __init__(self, n_components=2, max_snapshots=500):
        self.n_components = n_components
        self.max_snapshots = max_snapshots

    def fit(self, X, y=None):
        """Fit from snapshots: a Trajectory or an array with states as rows."""
        if isinstance(X, Trajectory):
            snapshots = snapshot_matrix(X, self.max_snapshots)
        else:
            snapshots = check_array(X).T
        self._set_fitted(pod_basis(snapshots, self.n_components))
        return self


class AdjointPODReducer(_BaseReducer):
    """Snapshot-SVD basis of the backward adjoint states.

    Fitting simulates the system forward from rest under ``control`` (unless
    a forward trajectory is supplied), integrates the adjoint equation
    backward and applies the snapshot SVD to the adjoint states.
    """

    def __init__(
        self,
        n_components=2,
        control=np.sin,
        horizon=TWO_PI,
        dt=1e-4,
        max_snapshots=500,
    ):
        self.n_components = n_components
        self.control = control
        self.horizon = horizon
        self.dt = dt
        self.max_snapshots = max_snapshots

    def fit(self, system, forward=None):
        if forward is None:
            forward = simulate(
                system, np.zeros(system.dim), self.control, self.dt, self.horizon
            )
        adjoint = simulate_adjoint(system, forward)
        basis = pod_basis(
            snapshot_matrix(adjoint, self.max_snapshots), self.n_components
        )
        self._set_fitted(replace(basis, method="PODadj"))
        return self


class BalancedTruncationReducer(_BaseReducer):
    """Balanced-truncation basis of the (zero-state linearized) system."""

    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, system, y=None):
        self._set_fitted(
            bt_basis(system.linearized_a(), system.b, system.c, self.n_components)
        )
        return self


class RiccatiReducer(_BaseReducer):
    """Dominant-eigenspace basis of the Riccati solution.

    Fitting solves the shifted algebraic Riccati equation for the
    (zero-state linearized) system and keeps the top eigenvectors of its
    solution; the solution itself is retained as ``riccati_solution_``.
    """

    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, system, y=None):
        p = linalg.solve_are(
            system.linearized_a(),
            system.b,
            system.q_cost,
            system.r_cost,
            system.discount,
        )
        self.riccati_solution_ = p
        self._set_fitted(riccati_basis(p, self.n_components))
        return self


def make_reducer(method, n_components, **kwargs):
    """Reducer instance for a method tag from :data:`METHODS`."""
    if method == "POD":
        return PODReducer(n_components, **kwargs)
    if method == "PODadj":
        return AdjointPODReducer(n_components, **kwargs)
    if method == "BT":
        return BalancedTruncationReducer(n_components)
    if method == "Ricc":
        return RiccatiReducer(n_components)
    raise ValueError(f"unknown reduction method {method!r}")
