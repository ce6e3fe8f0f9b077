"""Shallow-water model on a closed C-grid basin, generic over precision.

State lives on an Arakawa C grid: eta (nx, ny) at cell centers, u
(nx+1, ny) on vertical faces, v (nx, ny+1) on horizontal faces.  Walls
are closed (u, v zero on their boundary faces) with free slip: corner
vorticity is zero on the boundary, Laplacians mirror tangentially and
vanish at the normal walls.

The right-hand side comes in two configurations.  The linear one is

    du/dt =  f vbar - g d(eta)/dx + F(y) - r u - nu4 lap(lap(u))
    dv/dt = -f ubar - g d(eta)/dy         - r v - nu4 lap(lap(v))
    d(eta)/dt = -(d(H u)/dx + d(H v)/dy)

and the nonlinear one is the vector-invariant (energy-conserving) form
with potential vorticity q = (f + zeta)/h, Bernoulli function
B = g eta + (u^2 + v^2)/2, and flux-form continuity in h = H + eta.
The wind F(y) = -A cos(2 pi y / Ly) drives a double gyre.

All value-producing arithmetic goes through a ScalarOps backend, so the
same code runs in binary64 down to binary16.  Constants are precomputed
in binary64 and converted once, with the derivative quotients AND the
time step folded in: the rhs returns dt-premultiplied increments, and a
Runge-Kutta stage adds k or exactly half of it.  Raw per-second
tendencies would sit fifteen to twenty binary orders of magnitude below
the state they update, beyond what binary16 can span at any single
scale; folding dt moves every rhs constant and result band into (or
near) the representable window.  The biharmonic term is applied as two
sqrt(dt nu4)-weighted Laplacians for the same reason.

A state multiplied by a power of two s evolves, in the absence of
overflow and underflow, to exactly s times the unscaled evolution: every
operation on scaled quantities differs only in exponent.  The model
integrates the scaled state; diagnostics and outputs divide s back out.
Prognostic sums optionally use Kahan compensation, by default at the
state's own precision, or in binary32 for the mixed f16/32 kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .half import DEFAULT_POLICY, RoundingPolicy
from .scalars import (
    ScalarKind,
    ScalarOps,
    get_ops,
    integration_kind as default_integration_kind,
    model_kind,
)
from .sherlog import LogHistogram, SherlogOps


class NumericalBlowupError(RuntimeError):
    """The integration produced non-finite values at the given step."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or "non-finite state at step %d" % step)


@dataclass(frozen=True)
class SwmParams:
    """Basin, physics, and integration settings.

    dt defaults to 0.9 of the gravity-wave CFL bound min(dx,dy)/sqrt(gH)
    and may not exceed it.  scale_s must be a power of two so that
    scaling the state is exact.  compensated and integration_kind
    default per scalar kind: compensation on, and binary32
    accumulation, only for the binary16-based kinds.
    """

    nx: int = 200
    ny: int = 100
    Lx: float = 2_000_000.0
    Ly: float = 1_000_000.0
    g: float = 0.1
    H: float = 500.0
    f0: float = 1.0e-4
    beta: float = 2.0e-11
    wind_amplitude: float = 2.0e-7
    nu4: float = 1.0e10
    r_bottom: float = 1.0e-7
    dt: Optional[float] = None
    n_steps: int = 500
    scale_s: float = 1.0
    nonlinear: bool = True
    compensated: Optional[bool] = None
    integration_kind: Optional[ScalarKind] = None

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError("grid must be at least 4x4, got %dx%d"
                             % (self.nx, self.ny))
        for name in ("Lx", "Ly", "g", "H"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        if self.nu4 < 0 or self.r_bottom < 0:
            raise ValueError("nu4 and r_bottom must be nonnegative")
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")
        if not (self.scale_s > 0 and math.frexp(self.scale_s)[0] == 0.5):
            raise ValueError("scale_s must be a positive power of two, got %r"
                             % (self.scale_s,))
        if self.dt is None:
            object.__setattr__(self, "dt", self.cfl_dt)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.dt > self.cfl_dt * (1.0 + 1e-12):
            raise ValueError(
                "dt=%g exceeds the CFL bound %g = 0.9 min(dx,dy)/sqrt(gH)"
                % (self.dt, self.cfl_dt))

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def cfl_dt(self) -> float:
        return 0.9 * min(self.dx, self.dy) / math.sqrt(self.g * self.H)


@dataclass
class SwmState:
    u: np.ndarray
    v: np.ndarray
    eta: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class DiagRow:
    step: int
    t: float
    mean_eta: float
    mean_ke: float
    max_u: float


@dataclass
class RunResult:
    params: SwmParams
    kind: ScalarKind
    diagnostics: list
    u: np.ndarray
    v: np.ndarray
    eta: np.ndarray
    t_final: float
    steps: int


def apply_scaling(u, v, eta, s):
    """Multiply fields by the power-of-two s (exact in binary64)."""
    return u * s, v * s, eta * s


def unscale(u, v, eta, s):
    inv = 1.0 / s
    return u * inv, v * inv, eta * inv


def rk4_increment(ops: ScalarOps, fields, rhs, dt: float):
    """Classical Runge-Kutta increment for d(fields)/dt = rhs(fields).

    fields is a tuple of arrays at the ops precision; rhs maps such a
    tuple to raw tendencies.  Returns the increment tuple dt/6 (k1 +
    2 k2 + 2 k3 + k4), bracketed as (k1 + k4) + 2 (k2 + k3).
    """
    dt2 = ops.asarray(0.5 * dt)
    dtf = ops.asarray(dt)
    dt6 = ops.asarray(dt / 6.0)
    two = ops.asarray(2.0)

    def advanced(coef, ks):
        return tuple(ops.add(f, ops.mul(coef, k)) for f, k in zip(fields, ks))

    k1 = rhs(fields)
    k2 = rhs(advanced(dt2, k1))
    k3 = rhs(advanced(dt2, k2))
    k4 = rhs(advanced(dtf, k3))
    return tuple(
        ops.mul(dt6, ops.add(ops.add(a, d), ops.mul(two, ops.add(b, c))))
        for a, b, c, d in zip(k1, k2, k3, k4)
    )


def rk4_premultiplied(ops: ScalarOps, fields, rhs):
    """Runge-Kutta increment when rhs already carries the time step.

    Stage states are fields + k/2 or fields + k with exact power-of-two
    coefficients; the increment is (1/6) ((k1 + k4) + 2 (k2 + k3)),
    the same bracketing as rk4_increment with dt distributed into k.
    """
    half = ops.asarray(0.5)
    sixth = ops.asarray(1.0 / 6.0)
    two = ops.asarray(2.0)

    k1 = rhs(fields)
    k2 = rhs(tuple(ops.add(f, ops.mul(half, k)) for f, k in zip(fields, k1)))
    k3 = rhs(tuple(ops.add(f, ops.mul(half, k)) for f, k in zip(fields, k2)))
    k4 = rhs(tuple(ops.add(f, k) for f, k in zip(fields, k3)))
    return tuple(
        ops.mul(sixth, ops.add(ops.add(a, d), ops.mul(two, ops.add(b, c))))
        for a, b, c, d in zip(k1, k2, k3, k4)
    )


def compensated_update(ops: ScalarOps, state, carry, delta):
    """One Kahan-compensated accumulation step at the ops precision.

        y = delta + carry;  t = state + y;  carry' = y - (t - state)

    Returns (t, carry').  With exact arithmetic carry' is zero; in
    floating point it holds the low bits the sum could not absorb.
    """
    y = ops.add(delta, carry)
    t = ops.add(state, y)
    new_carry = ops.sub(y, ops.sub(t, state))
    return t, new_carry


class _Model:
    """Precomputed dt-folded constants plus the vectorized rhs."""

    def __init__(self, p: SwmParams, ops: ScalarOps, s: float):
        self.p = p
        self.ops = ops
        dx = p.Lx / p.nx
        dy = p.Ly / p.ny
        dt = p.dt
        A = ops.asarray
        self.DDX = A(dt / dx)
        self.DDY = A(dt / dy)
        self.PG_DX = A(dt * (p.g / dx))
        self.PG_DY = A(dt * (p.g / dy))
        self.DDXH = A(dt * (p.H / dx))
        self.DDYH = A(dt * (p.H / dy))
        self.G = A(p.g)
        self.BSQ_DX2 = A(math.sqrt(dt * p.nu4) / (dx * dx))
        self.BSQ_DY2 = A(math.sqrt(dt * p.nu4) / (dy * dy))
        self.R = A(dt * p.r_bottom)
        self.H = A(p.H)
        self.INV_S = A(1.0 / s)
        self.HALF = A(0.5)
        self.QUARTER = A(0.25)
        self.TWO = A(2.0)
        self.F_U = A([dt * (p.f0 + p.beta * ((j + 0.5) * dy - 0.5 * p.Ly))
                      for j in range(p.ny)])
        f_v = [dt * (p.f0 + p.beta * (j * dy - 0.5 * p.Ly))
               for j in range(p.ny + 1)]
        self.F_V = A(f_v)
        self.F_Q = A(f_v)
        self.WIND = A([s * (dt * (-p.wind_amplitude
                                  * math.cos(2.0 * math.pi * ((j + 0.5) * dy)
                                             / p.Ly)))
                       for j in range(p.ny)])

    def _lap_u(self, w):
        # mirrored ghosts along y, zero rows at the x walls
        ops = self.ops
        wp = np.concatenate([w[:, :1], w, w[:, -1:]], axis=1)
        cx = ops.add(ops.sub(w[2:, :], ops.mul(self.TWO, w[1:-1, :])), w[:-2, :])
        cy = ops.add(ops.sub(wp[1:-1, 2:], ops.mul(self.TWO, w[1:-1, :])), wp[1:-1, :-2])
        out = ops.zeros(w.shape)
        out[1:-1, :] = ops.add(ops.mul(self.BSQ_DX2, cx), ops.mul(self.BSQ_DY2, cy))
        return out

    def _lap_v(self, w):
        ops = self.ops
        wp = np.concatenate([w[:1, :], w, w[-1:, :]], axis=0)
        cx = ops.add(ops.sub(wp[2:, 1:-1], ops.mul(self.TWO, w[:, 1:-1])), wp[:-2, 1:-1])
        cy = ops.add(ops.sub(w[:, 2:], ops.mul(self.TWO, w[:, 1:-1])), w[:, :-2])
        out = ops.zeros(w.shape)
        out[:, 1:-1] = ops.add(ops.mul(self.BSQ_DX2, cx), ops.mul(self.BSQ_DY2, cy))
        return out

    def rhs(self, fields):
        """dt-premultiplied tendencies for (u, v, eta)."""
        u, v, eta = fields
        p = self.p
        ops = self.ops
        nx, ny = p.nx, p.ny

        bih_u = self._lap_u(self._lap_u(u))
        bih_v = self._lap_v(self._lap_v(v))

        if p.nonlinear:
            h = ops.add(self.H, ops.mul(self.INV_S, eta))
            hbx = ops.mul(self.HALF, ops.add(h[:-1, :], h[1:, :]))
            hby = ops.mul(self.HALF, ops.add(h[:, :-1], h[:, 1:]))
            hu = ops.zeros((nx + 1, ny))
            hv = ops.zeros((nx, ny + 1))
            hu[1:-1, :] = ops.mul(u[1:-1, :], hbx)
            hv[:, 1:-1] = ops.mul(v[:, 1:-1], hby)

            ke = ops.mul(self.QUARTER, ops.add(
                ops.add(ops.mul(u[:-1, :], u[:-1, :]),
                        ops.mul(u[1:, :], u[1:, :])),
                ops.add(ops.mul(v[:, :-1], v[:, :-1]),
                        ops.mul(v[:, 1:], v[:, 1:]))))
            B = ops.add(ops.mul(self.G, eta), ops.mul(self.INV_S, ke))

            zeta = ops.zeros((nx + 1, ny + 1))
            zeta[1:-1, 1:-1] = ops.sub(
                ops.mul(self.DDX, ops.sub(v[1:, 1:-1], v[:-1, 1:-1])),
                ops.mul(self.DDY, ops.sub(u[1:-1, 1:], u[1:-1, :-1])))

            hp = np.pad(h, 1, mode="edge")
            hz = ops.mul(self.QUARTER, ops.add(
                ops.add(hp[:-1, :-1], hp[:-1, 1:]),
                ops.add(hp[1:, :-1], hp[1:, 1:])))
            q = ops.div(ops.add(self.F_Q, ops.mul(self.INV_S, zeta)), hz)

            hvx = ops.mul(self.HALF, ops.add(hv[:-1, :], hv[1:, :]))
            qhv = ops.mul(q[1:-1, :], hvx)
            upv = ops.mul(self.HALF, ops.add(qhv[:, :-1], qhv[:, 1:]))
            dBdx = ops.mul(self.DDX, ops.sub(B[1:, :], B[:-1, :]))
            acc_u = ops.sub(upv, dBdx)

            huy = ops.mul(self.HALF, ops.add(hu[:, :-1], hu[:, 1:]))
            qhu = ops.mul(q[:, 1:-1], huy)
            vpv = ops.mul(self.HALF, ops.add(qhu[:-1, :], qhu[1:, :]))
            dBdy = ops.mul(self.DDY, ops.sub(B[:, 1:], B[:, :-1]))
            acc_v = ops.neg(ops.add(vpv, dBdy))

            # scale before differencing: the raw flux jump across a cell
            # can exceed the working range even when the flux itself fits
            fxh = ops.mul(self.DDX, hu)
            fyh = ops.mul(self.DDY, hv)
        else:
            fxh = ops.mul(self.DDXH, u)
            fyh = ops.mul(self.DDYH, v)

            vbar = ops.mul(self.QUARTER, ops.add(
                ops.add(v[:-1, :-1], v[:-1, 1:]),
                ops.add(v[1:, :-1], v[1:, 1:])))
            cor_u = ops.mul(self.F_U, vbar)
            pg_u = ops.mul(self.PG_DX, ops.sub(eta[1:, :], eta[:-1, :]))
            acc_u = ops.sub(cor_u, pg_u)

            ubar = ops.mul(self.QUARTER, ops.add(
                ops.add(u[:-1, :-1], u[:-1, 1:]),
                ops.add(u[1:, :-1], u[1:, 1:])))
            cor_v = ops.mul(self.F_V[1:-1], ubar)
            pg_v = ops.mul(self.PG_DY, ops.sub(eta[:, 1:], eta[:, :-1]))
            acc_v = ops.neg(ops.add(cor_v, pg_v))

        acc_u = ops.add(acc_u, self.WIND)
        acc_u = ops.sub(acc_u, ops.mul(self.R, u[1:-1, :]))
        acc_u = ops.sub(acc_u, bih_u[1:-1, :])
        acc_v = ops.sub(acc_v, ops.mul(self.R, v[:, 1:-1]))
        acc_v = ops.sub(acc_v, bih_v[:, 1:-1])

        du = ops.zeros((nx + 1, ny))
        dv = ops.zeros((nx, ny + 1))
        du[1:-1, :] = acc_u
        dv[:, 1:-1] = acc_v

        fx = ops.sub(fxh[1:, :], fxh[:-1, :])
        fy = ops.sub(fyh[:, 1:], fyh[:, :-1])
        deta = ops.neg(ops.add(fx, fy))
        return du, dv, deta


def _resolve_compensated(p: SwmParams, kind: ScalarKind) -> bool:
    if p.compensated is not None:
        return p.compensated
    return kind in (ScalarKind.F16, ScalarKind.F16_F32)


def initial_eta(p: SwmParams, rng) -> np.ndarray:
    """Uniform free-surface noise at 1% of the mean depth (binary64)."""
    return (0.01 * p.H) * rng.uniform(-1.0, 1.0, (p.nx, p.ny))


def run_simulation(p: SwmParams, kind: ScalarKind, *, rng=None,
                   policy: RoundingPolicy = DEFAULT_POLICY,
                   recorder: LogHistogram = None,
                   instrument=None, diag_every: int = 1) -> RunResult:
    """Integrate n_steps from seeded noise; returns unscaled final fields.

    recorder, if given, histograms every arithmetic result element of
    the run.  instrument wraps the ops backends with an arbitrary
    observer (applied outside the recorder).  Both leave values bitwise
    untouched.  Raises NumericalBlowupError if the state goes
    non-finite.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    s = p.scale_s
    inv_s = 1.0 / s

    m_ops = get_ops(kind, policy)
    i_kind = p.integration_kind or default_integration_kind(kind)
    same_backend = i_kind == model_kind(kind)
    i_ops = m_ops if same_backend else get_ops(i_kind, policy)
    if recorder is not None:
        m_ops = SherlogOps(m_ops, recorder)
        i_ops = m_ops if same_backend else SherlogOps(i_ops, recorder)
    if instrument is not None:
        m_ops = instrument(m_ops)
        i_ops = m_ops if same_backend else instrument(i_ops)

    comp = _resolve_compensated(p, kind)
    model = _Model(p, m_ops, s)
    dt = p.dt

    eta0 = s * initial_eta(p, rng)
    state = [
        i_ops.zeros((p.nx + 1, p.ny)),
        i_ops.zeros((p.nx, p.ny + 1)),
        i_ops.asarray(eta0),
    ]
    carry = [i_ops.zeros(f.shape) for f in state]
    cross = m_ops.dtype != i_ops.dtype

    def diag(step):
        # errstate: a state on its way to blowup may hold inf already
        with np.errstate(invalid="ignore", over="ignore"):
            u64 = i_ops.to_f64(state[0]) * inv_s
            v64 = i_ops.to_f64(state[1]) * inv_s
            e64 = i_ops.to_f64(state[2]) * inv_s
            ke = 0.5 * (float(np.mean(u64 * u64)) + float(np.mean(v64 * v64)))
            return DiagRow(step, step * dt, float(np.mean(e64)), ke,
                           float(np.max(np.abs(u64))))

    rows = [diag(0)]
    steps_done = 0
    for step in range(1, p.n_steps + 1):
        if cross:
            fields = tuple(m_ops.asarray(i_ops.to_f64(f)) for f in state)
        else:
            fields = tuple(state)
        delta = rk4_premultiplied(m_ops, fields, model.rhs)
        if cross:
            delta = tuple(i_ops.asarray(m_ops.to_f64(d)) for d in delta)
        if comp:
            for k in range(3):
                state[k], carry[k] = compensated_update(
                    i_ops, state[k], carry[k], delta[k])
        else:
            for k in range(3):
                state[k] = i_ops.add(state[k], delta[k])
        if not all(np.isfinite(f).all() for f in state):
            raise NumericalBlowupError(step)
        steps_done = step
        if step % diag_every == 0 or step == p.n_steps:
            rows.append(diag(step))

    u64, v64, e64 = unscale(i_ops.to_f64(state[0]), i_ops.to_f64(state[1]),
                            i_ops.to_f64(state[2]), s)
    return RunResult(p, kind, rows, u64, v64, e64, steps_done * dt, steps_done)


def save_snapshot(path, result: RunResult) -> None:
    """Final fields and grid shape as an .npz archive."""
    np.savez(path, u=result.u, v=result.v, eta=result.eta,
             t=np.float64(result.t_final),
             nx=np.int64(result.params.nx), ny=np.int64(result.params.ny))


def load_snapshot(path) -> SwmState:
    with np.load(path) as z:
        state = SwmState(z["u"].copy(), z["v"].copy(), z["eta"].copy(),
                         float(z["t"]))
    return state
