"""Controlled curves in J^k(R^n) and numerical distance bounds.

A curve is driven by piecewise-constant frame coefficients over ``M``
uniform steps of the unit time interval.  Horizontal controls
(:class:`ControlSignal`) only move along ``X_i`` and ``d/du^k_I``; general
controls (:class:`CurveSignal`) may use every frame direction.  Inside a
step the coordinate ODE is linear with a nilpotent matrix, and one RK4 step
reproduces its flow exactly whenever ``k <= 3``.

Distance estimates never claim exactness: ``cc_upper_bound`` and
``r0_upper_bound`` return the length of a concrete admissible curve plus an
explicit closing segment, ``coordinate_lower_bound`` a projection bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .jetcore import JetPoint, JetShape, dilate_coords
from .steering import connector_bound, riemannian_correction

log = logging.getLogger(__name__)


class InfeasibleAtBudget(RuntimeError):
    """The optimizer could not meet the endpoint tolerance within its budget."""

    def __init__(self, best_residual: float, tol: float):
        super().__init__(f"infeasible-at-budget: best endpoint residual {best_residual:.3e} > tol {tol:.1e}")
        self.best_residual = best_residual
        self.tol = tol


@dataclass(frozen=True)
class PathOptions:
    steps: int = 64
    starts: int = 8
    seed: int = 0
    endpoint_tol: float = 1e-10
    max_iters: int = 60
    # optional warm-up; the projection stage alone converges better on tested pairs
    penalty_schedule: tuple[float, ...] = ()
    penalty_iters: int = 25
    substeps: int = 1
    connector_pieces: int = 16


@dataclass(frozen=True)
class ControlSignal:
    """Horizontal controls: ``a`` (coefficients of ``X_i``) and ``b`` (of ``d/du^k_I``)."""

    shape: JetShape
    controls: np.ndarray

    horizontal = True

    def __post_init__(self):
        c = np.array(self.controls, dtype=float)
        if c.ndim != 2 or c.shape[1] != control_dim(self.shape, True) or c.shape[0] < 1:
            raise ValueError(f"horizontal controls must have shape (M, {control_dim(self.shape, True)}), got {c.shape}")
        object.__setattr__(self, "controls", c)

    @property
    def steps(self) -> int:
        return self.controls.shape[0]

    def frame(self) -> np.ndarray:
        """Full frame coefficients per step, shape (M, D)."""
        out = np.zeros((self.steps, self.shape.total_dim))
        out[:, : self.controls.shape[1]] = self.controls
        return out

    def reversed(self) -> ControlSignal:
        return ControlSignal(self.shape, -self.controls[::-1])


@dataclass(frozen=True)
class CurveSignal:
    """Controls on every frame direction (Riemannian curves)."""

    shape: JetShape
    controls: np.ndarray

    horizontal = False

    def __post_init__(self):
        c = np.array(self.controls, dtype=float)
        if c.ndim != 2 or c.shape[1] != self.shape.total_dim or c.shape[0] < 1:
            raise ValueError(f"curve controls must have shape (M, {self.shape.total_dim}), got {c.shape}")
        object.__setattr__(self, "controls", c)

    @property
    def steps(self) -> int:
        return self.controls.shape[0]

    def frame(self) -> np.ndarray:
        return self.controls

    def reversed(self) -> CurveSignal:
        return CurveSignal(self.shape, -self.controls[::-1])


def control_dim(shape: JetShape, horizontal: bool) -> int:
    return shape.horizontal_slice.stop if horizontal else shape.total_dim


# step maps ------------------------------------------------------------------

def _step_maps(shape: JetShape, frame, h: float, substeps: int = 1):
    """Affine RK4 step ``y -> E y + psi`` for constant frame coefficients.

    ``frame`` has shape (..., D) and may be complex (complex-step derivatives).
    """
    D = shape.total_dim
    A = np.einsum("...i,iab->...ab", frame[..., : shape.n], shape.structure)
    dt = h / substeps
    eye = np.eye(D)
    A2 = A @ A
    S = dt * eye + dt**2 / 2 * A + dt**3 / 6 * A2 + dt**4 / 24 * (A2 @ A)
    E = eye + S @ A
    psi = np.einsum("...ab,...b->...a", S, frame)
    for _ in range(substeps - 1):
        psi = np.einsum("...ab,...b->...a", E, psi) + np.einsum("...ab,...b->...a", S, frame)
    if substeps > 1:
        E = np.linalg.matrix_power(E, substeps)
    return E, psi


def integrate_coords(shape: JetShape, y0, frame, substeps: int = 1) -> np.ndarray:
    """Trajectory at the step boundaries for controls ``frame`` of shape (M, D)."""
    frame = np.asarray(frame, dtype=float)
    M = frame.shape[0]
    E, psi = _step_maps(shape, frame, 1.0 / M, substeps)
    ys = np.empty((M + 1, shape.total_dim))
    ys[0] = y0
    for m in range(M):
        ys[m + 1] = E[m] @ ys[m] + psi[m]
    return ys


def integrate(p0: JetPoint, signal, substeps: int = 1) -> list[JetPoint]:
    """Discrete trajectory (step boundaries) of the curve started at ``p0``."""
    if signal.shape != p0.shape:
        raise ValueError("signal and start point live in different jet spaces")
    ys = integrate_coords(p0.shape, p0.coords, signal.frame(), substeps)
    return [JetPoint(p0.shape, y) for y in ys]


def length(signal) -> float:
    """g0-length: sum of per-step frame norms times the step size."""
    c = np.asarray(signal.controls, dtype=float)
    return float(np.sum(np.linalg.norm(c, axis=1)) / c.shape[0])


def coordinate_lower_bound(p: JetPoint, q: JetPoint) -> float:
    """``||(x, u^k)(p) - (x, u^k)(q)||``, a lower bound for ``d_0`` and ``d_c``."""
    if p.shape != q.shape:
        raise ValueError("points live in different jet spaces")
    hs = p.shape.horizontal_slice
    return float(np.linalg.norm(np.asarray(q.coords[hs] - p.coords[hs], dtype=float)))


# optimizer ---------------------------------------------------------------------

@dataclass
class PathResult:
    value: float
    length: float
    correction: float
    residual: float
    signal: object
    endpoint: JetPoint
    converged_starts: int = 0
    lengths: list = field(default_factory=list)


class _Problem:
    """Batched endpoint map for ``B`` independent starts on normalized coordinates."""

    def __init__(self, shape: JetShape, y0, target, horizontal: bool, steps: int, substeps: int):
        self.shape = shape
        self.y0 = y0
        self.target = target
        self.C = control_dim(shape, horizontal)
        self.M = steps
        self.h = 1.0 / steps
        self.substeps = substeps

    def _frame(self, c):
        if self.C == self.shape.total_dim:
            return c
        pad = np.zeros(c.shape[:-1] + (self.shape.total_dim - self.C,), dtype=c.dtype)
        return np.concatenate([c, pad], axis=-1)

    def endpoint(self, c):
        """``c`` of shape (B, M, C) -> endpoints (B, D)."""
        E, psi = _step_maps(self.shape, self._frame(c), self.h, self.substeps)
        y = np.broadcast_to(self.y0, (c.shape[0], self.shape.total_dim))[..., None].copy()
        for m in range(self.M):
            y = E[:, m] @ y + psi[:, m, :, None]
        return y[..., 0]

    def _step_derivatives(self, frame, ys):
        """d(step)/d(controls) per step, shape (B, M, D, C)."""
        if self.substeps > 1:
            return self._complex_step_derivatives(frame, ys)
        shape = self.shape
        G = shape.structure
        dt = self.h
        A = np.einsum("...i,iab->...ab", frame[..., : shape.n], G)
        A2 = A @ A
        S = dt * np.eye(shape.total_dim) + dt**2 / 2 * A + dt**3 / 6 * A2 + dt**4 / 24 * (A2 @ A)
        # step(y, c) = y + S(A) (A y + g): the forcing g is the frame itself
        out = np.empty(frame.shape[:2] + (shape.total_dim, self.C))
        out[...] = S[..., : self.C]
        v = (A @ ys[..., None])[..., 0] + frame
        for i in range(shape.n):
            Gi = G[i]
            dS = dt**2 / 2 * Gi + dt**3 / 6 * (Gi @ A + A @ Gi) + dt**4 / 24 * (Gi @ A2 + A @ Gi @ A + A2 @ Gi)
            out[..., i] += (dS @ v[..., None])[..., 0] + (S @ (ys @ Gi.T)[..., None])[..., 0]
        return out

    def _complex_step_derivatives(self, frame, ys):
        eps = 1e-30
        out = np.empty(frame.shape[:2] + (self.shape.total_dim, self.C))
        for j in range(self.C):
            fj = frame.astype(complex)
            fj[..., j] += 1j * eps
            Ej, psij = _step_maps(self.shape, fj, self.h, self.substeps)
            out[..., j] = ((Ej @ ys[..., None])[..., 0] + psij).imag / eps
        return out

    def jacobian(self, c):
        """Endpoints (B, D) and Jacobians (B, D, M*C)."""
        B = c.shape[0]
        D = self.shape.total_dim
        frame = self._frame(c)
        E, psi = _step_maps(self.shape, frame, self.h, self.substeps)
        ys = np.empty((B, self.M + 1, D, 1))
        ys[:, 0, :, 0] = self.y0
        for m in range(self.M):
            ys[:, m + 1] = E[:, m] @ ys[:, m] + psi[:, m, :, None]
        ys = ys[..., 0]
        dstep = self._step_derivatives(frame, ys[:, :-1])
        J = np.empty((B, self.M, D, self.C))
        P = np.broadcast_to(np.eye(D), (B, D, D)).copy()
        for m in range(self.M - 1, -1, -1):
            J[:, m] = P @ dstep[:, m]
            P = P @ E[:, m]
        return ys[:, -1], J.transpose(0, 2, 1, 3).reshape(B, D, self.M * self.C)


def _homogeneous_size(shape: JetShape, diff) -> float:
    rho = float(np.linalg.norm(diff[shape.x_slice]))
    for j in range(shape.k + 1):
        rho = max(rho, float(np.linalg.norm(diff[shape.block(j)])) ** (1.0 / (shape.k + 1 - j)))
    return rho


def _initial_controls(shape, diff, C, M, starts, seed):
    """Straight-line start plus smooth random Fourier starts (normalized units)."""
    t = (np.arange(M) + 0.5) / M
    straight = np.zeros(C)
    straight[: min(C, shape.horizontal_slice.stop)] = diff[: min(C, shape.horizontal_slice.stop)]
    if C == shape.total_dim:
        straight = diff.copy()
    out = [np.tile(straight, (M, 1))]
    rng = np.random.default_rng(seed)
    for s in range(1, starts):
        amp = rng.uniform(0.5, 3.0)
        coeffs = rng.normal(size=(3, 2, C))
        wave = np.zeros((M, C))
        for f in range(3):
            wave += coeffs[f, 0] * np.cos(2 * np.pi * (f + 1) * t)[:, None] / (f + 1)
            wave += coeffs[f, 1] * np.sin(2 * np.pi * (f + 1) * t)[:, None] / (f + 1)
        out.append(np.tile(straight, (M, 1)) + amp * wave)
    return np.stack(out)


def _penalty_stage(problem: _Problem, c, schedule, iters):
    """Minimize energy + mu * |residual|^2 jointly over all starts (they are separable)."""
    B = c.shape[0]
    h = problem.h
    for mu in schedule:
        def fun(flat):
            cc = flat.reshape(c.shape)
            y, J = problem.jacobian(cc)
            r = y - problem.target
            val = h * np.sum(cc**2) + mu * np.sum(r**2)
            grad = 2 * h * cc.reshape(B, -1) + 2 * mu * np.einsum("bd,bdk->bk", r, J)
            return val, grad.ravel()

        res = minimize(fun, c.ravel(), jac=True, method="L-BFGS-B", options={"maxiter": iters})
        c = res.x.reshape(c.shape)
    return c


def _newton_stage(problem: _Problem, c, max_iters, tol):
    """Minimum-norm Gauss-Newton on the endpoint constraint.

    Fixed points satisfy ``J c_new = J c - r`` with ``c`` in the row space of
    ``J``: exactly the first-order conditions of minimal energy.
    """
    B = c.shape[0]
    flat = c.reshape(B, -1).copy()
    for _ in range(max_iters):
        y, J = problem.jacobian(flat.reshape(c.shape))
        r = y - problem.target
        JJt = J @ J.transpose(0, 2, 1)
        rhs = np.einsum("bdk,bk->bd", J, flat) - r
        reg = 1e-12 * np.trace(JJt, axis1=1, axis2=2)[:, None, None] * np.eye(JJt.shape[1])
        lam = np.linalg.solve(JJt + reg, rhs[..., None])[..., 0]
        new = np.einsum("bdk,bd->bk", J, lam)
        step = new - flat
        # damp only the starts whose residual is still large
        big = np.max(np.abs(r), axis=1) > 1e-2
        flat = flat + np.where(big[:, None], 0.5, 1.0) * step
        if np.max(np.abs(r)) < tol and np.max(np.abs(step)) < 1e-12 * (1 + np.max(np.abs(flat))):
            break
    # the iteration above is only linearly convergent on the constraint;
    # finish with Newton projections onto it, halving steps that do not help
    y = problem.endpoint(flat.reshape(c.shape))
    res = np.max(np.abs(y - problem.target), axis=1)
    for _ in range(30):
        if np.max(res) < 0.01 * tol:
            break
        y, J = problem.jacobian(flat.reshape(c.shape))
        r = y - problem.target
        JJt = J @ J.transpose(0, 2, 1)
        reg = 1e-14 * np.trace(JJt, axis1=1, axis2=2)[:, None, None] * np.eye(JJt.shape[1])
        lam = np.linalg.solve(JJt + reg, r[..., None])[..., 0]
        step = np.einsum("bdk,bd->bk", J, lam)
        t = np.ones(B)
        for _ in range(6):
            trial = flat - t[:, None] * step
            trial_res = np.max(np.abs(problem.endpoint(trial.reshape(c.shape)) - problem.target), axis=1)
            better = trial_res < res
            if better.all():
                break
            t = np.where(better, t, 0.5 * t)
        flat = np.where(better[:, None], trial, flat)
        res = np.where(better, trial_res, res)
        if not better.any():
            break
    y = problem.endpoint(flat.reshape(c.shape))
    return flat.reshape(c.shape), np.max(np.abs(y - problem.target), axis=1)


def _optimize(p: JetPoint, q: JetPoint, opts: PathOptions, horizontal: bool, init=None) -> PathResult:
    if p.shape != q.shape:
        raise ValueError("points live in different jet spaces")
    shape = p.shape
    signal_cls = ControlSignal if horizontal else CurveSignal
    C = control_dim(shape, horizontal)
    y_p = np.asarray(p.coords, dtype=float)
    y_q = np.asarray(q.coords, dtype=float)
    diff = y_q - y_p
    rho = _homogeneous_size(shape, diff)
    if rho == 0.0:
        zero = signal_cls(shape, np.zeros((opts.steps, C)))
        return PathResult(0.0, 0.0, 0.0, 0.0, zero, p, opts.starts, [0.0])

    # dilations are symmetries of the control system: solve at unit scale
    y0 = dilate_coords(shape, 1.0 / rho, y_p)
    target = dilate_coords(shape, 1.0 / rho, y_q)
    problem = _Problem(shape, y0, target, horizontal, opts.steps, opts.substeps)
    c0 = _initial_controls(shape, target - y0, C, opts.steps, opts.starts, opts.seed)
    if init is not None:
        extra = np.asarray(init, dtype=float)[None] / rho
        if extra.shape[1:] != (opts.steps, C):
            raise ValueError(f"initial controls must have shape ({opts.steps}, {C})")
        c0 = np.concatenate([c0, extra])
    if opts.penalty_schedule:
        c0[: opts.starts] = _penalty_stage(problem, c0[: opts.starts], opts.penalty_schedule, opts.penalty_iters)
    c, residuals = _newton_stage(problem, c0, opts.max_iters, opts.endpoint_tol)

    ok = residuals <= opts.endpoint_tol
    if not ok.any() and init is None:
        raise InfeasibleAtBudget(float(residuals.min()), opts.endpoint_tol)
    lengths = np.sum(np.linalg.norm(c, axis=2), axis=1) / opts.steps
    candidates = [c[b] for b in np.flatnonzero(ok)[np.argsort(lengths[ok])][:1]]
    if init is not None:
        # the seed itself is admissible, so the result is never worse than it
        candidates.append(c0[-1])
    best = None
    for controls in candidates:
        signal = signal_cls(shape, controls * rho)
        end = JetPoint(shape, integrate_coords(shape, y_p, signal.frame(), opts.substeps)[-1])
        if horizontal:
            corr = connector_bound(end, q, pieces=opts.connector_pieces)
        else:
            corr = riemannian_correction(end, q)
        value = length(signal) + corr
        if best is None or value < best.value:
            resid = float(np.max(np.abs(dilate_coords(shape, 1.0 / rho, np.asarray(end.coords - q.coords, dtype=float)))))
            best = PathResult(value, length(signal), corr, resid, signal, end)
    # d >= the coordinate bound, so lifting to it only removes rounding in the length sum
    best.value = float(max(best.value, coordinate_lower_bound(p, q)))
    best.converged_starts = int(ok.sum())
    best.lengths = [float(v * rho) for v in lengths]
    return best


def cc_path(p: JetPoint, q: JetPoint, opts: PathOptions | None = None, init=None) -> PathResult:
    """Best horizontal curve found from ``p`` to ``q`` with its certified value."""
    return _optimize(p, q, opts or PathOptions(), horizontal=True, init=init)


def r0_path(p: JetPoint, q: JetPoint, opts: PathOptions | None = None, init=None) -> PathResult:
    return _optimize(p, q, opts or PathOptions(), horizontal=False, init=init)


def cc_upper_bound(p: JetPoint, q: JetPoint, opts: PathOptions | None = None) -> float:
    """Upper bound on the Carnot-Caratheodory distance ``d_c(p, q)``."""
    return cc_path(p, q, opts).value


def r0_upper_bound(p: JetPoint, q: JetPoint, opts: PathOptions | None = None, warm_start: PathResult | None = None) -> float:
    """Upper bound on the Riemannian distance ``d_0(p, q)``.

    ``warm_start`` may carry a horizontal solution for the same pair; it is
    lifted to a general curve and added to the starts.
    """
    opts = opts or PathOptions()
    init = None
    if warm_start is not None and warm_start.signal.steps == opts.steps:
        init = warm_start.signal.frame()
    return r0_path(p, q, opts, init=init).value


@dataclass(frozen=True)
class DistanceBounds:
    lower: float
    r0_upper: float
    cc_upper: float

    @property
    def sandwich_ok(self) -> bool:
        return bool(self.lower <= self.r0_upper + 1e-9 and self.r0_upper <= self.cc_upper + 1e-6)


def distance_bounds(p: JetPoint, q: JetPoint, opts: PathOptions | None = None) -> DistanceBounds:
    """All three estimates, with the horizontal optimum seeding the Riemannian search."""
    opts = opts or PathOptions()
    cc = cc_path(p, q, opts)
    r0 = r0_upper_bound(p, q, opts, warm_start=cc)
    return DistanceBounds(coordinate_lower_bound(p, q), r0, cc.value)
