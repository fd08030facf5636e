"""Diagonally implicit-explicit relaxation Runge-Kutta stepping.

One step from ``(u, r)`` over stepsize ``tau`` with an s-stage double
tableau (A, b implicit / Abar, bbar explicit):

    U_i = u + tau * sum_{j<=i} A[i,j] L_j + tau * sum_{j<i} Abar[i,j] N_j
    R_i = r + tau * sum_{j<i} Abar[i,j] Ntilde_j
    u'  = u + gamma * tau * sum_i (b_i L_i + bbar_i N_i)
    r'  = r + gamma * tau * sum_i bbar_i Ntilde_i

The stage systems are diagonal in Fourier space, so each implicit solve is
a pointwise division.  The relaxation coefficient ``gamma`` is the nonzero
root of the quadratic energy defect; with it, the modified energy change of
a step reduces to the (non-positive, when all weights are non-negative)
stage dissipation term, which makes the scheme energy stable.

Stepping modes:

* ``standard`` - gamma forced to 1, time advances by tau (plain IMEX RK);
* ``idt``      - gamma computed, time still advances by tau;
* ``rt``       - gamma computed, time advances by gamma * tau.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import model
from .model import ModelSpec, SavState, SavDegeneracyError
from .spectral import SpectralContext
from .tableau import DoubleButcherTableau, validate

STANDARD = "standard"
IDT = "idt"
RT = "rt"
MODES = (STANDARD, IDT, RT)

DENOMINATOR_FLOOR = 1e-14
ENERGY_TRAP_TOL = 1e-10


class NonPositiveRelaxationError(ArithmeticError):
    """The computed relaxation coefficient is not positive.

    Positivity is a hypothesis of the energy-decay result; clamping would
    void it silently, so this is a hard error.  Reduce the step size.
    """

    def __init__(self, gamma, tau):
        super().__init__(
            f"relaxation coefficient {gamma:.6e} <= 0 at tau = {tau:.6e};"
            " reduce the step size")
        self.gamma = gamma
        self.tau = tau


class EnergyIncreaseError(RuntimeError):
    """Modified energy grew in a relaxed step although the decay hypotheses hold.

    This cannot happen for a correct implementation (it would contradict the
    discrete decay property), so it is treated as an internal bug trap.
    """


class InvalidTableauError(ValueError):
    """Tableau failed validation; the energy analysis does not apply."""


class IntegrationError(RuntimeError):
    """A step inside a time loop failed; carries the step index and time."""

    def __init__(self, step_index, t_hat, cause):
        super().__init__(f"step {step_index} at t_hat = {t_hat:.12g}: {cause}")
        self.step_index = step_index
        self.t_hat = t_hat


@dataclass
class StageData:
    """Per-stage values of one step: fields, auxiliary scalars and slopes.

    ``U[i][l]`` is stage ``i`` of component ``l``; ``Lv``/``Nv`` hold the
    linear and nonlinear slopes, ``R``/``Nt`` the auxiliary stage values and
    rates, ``q`` the per-stage auxiliary ratio.  The matching half-spectra
    (``u_hat`` for the incoming state, ``U_hat``, ``L_hat``, ``N_hat``) are
    kept so downstream formulas can run as exact Parseval sums.
    """

    U: list
    R: np.ndarray
    Lv: list
    Nv: list
    Nt: np.ndarray
    q: np.ndarray
    u_hat: list
    U_hat: list
    L_hat: list
    N_hat: list


@dataclass(frozen=True)
class StepRecord:
    """Diagnostics of one accepted step."""

    t_hat_before: float
    t_hat_after: float
    tau: float
    gamma: float
    energy_modified: float
    energy_original: float
    stage_dissipation: float
    mass: tuple
    gn_at_1: Optional[float] = None


_VALIDATED = weakref.WeakKeyDictionary()


def _require_valid(tab: DoubleButcherTableau):
    ok = _VALIDATED.get(tab)
    if ok is None:
        ok = validate(tab).passed
        _VALIDATED[tab] = ok
    if not ok:
        raise InvalidTableauError(
            f"tableau {tab.name!r} fails validation; refusing to integrate"
            " (energy analysis hypotheses unmet)")


def compute_stages(state: SavState, tau: float, tab: DoubleButcherTableau,
                   spec: ModelSpec, ctx: SpectralContext,
                   u_hat=None) -> StageData:
    """Solve the s stage systems sequentially.

    ``u_hat`` optionally supplies the spectra of ``state.u`` (they are
    recomputed otherwise).  Stages with a zero implicit diagonal skip the
    solve entirely.
    """
    s = tab.s
    sigma = model.linear_symbol(spec, ctx)
    if u_hat is None:
        u_hat = [ctx.transform(ul) for ul in state.u]

    U, Lv, Nv = [], [], []
    U_hat, L_hat, N_hat = [], [], []
    R = np.empty(s)
    Nt = np.empty(s)
    q = np.empty(s)

    for i in range(s):
        rhs_hat = []
        for l in range(spec.k):
            acc = u_hat[l].copy()
            for j in range(i):
                aij = tab.A[i, j]
                abij = tab.Abar[i, j]
                if aij != 0.0:
                    acc += (tau * aij) * L_hat[j][l]
                if abij != 0.0:
                    acc += (tau * abij) * N_hat[j][l]
            rhs_hat.append(acc)
        aii = tab.A[i, i]
        Ui_hat = [ctx.solve_diagonal_spectral(rh, sigma, tau * aii)
                  for rh in rhs_hat]
        Ui = [ctx.inverse_transform(h) for h in Ui_hat]
        Li_hat = [sigma * h for h in Ui_hat]
        Li = [ctx.inverse_transform(h) for h in Li_hat]
        R[i] = state.r + tau * sum(tab.Abar[i, j] * Nt[j] for j in range(i))
        try:
            Ni, Ni_hat, Nt[i], q[i] = model._nonlinear_with_rate(
                Ui, R[i], list(zip(Li, Li_hat)), spec, ctx)
        except SavDegeneracyError as exc:
            raise SavDegeneracyError(f"stage {i + 1}: {exc}") from exc
        U.append(Ui)
        Lv.append(Li)
        Nv.append(Ni)
        U_hat.append(Ui_hat)
        L_hat.append(Li_hat)
        N_hat.append(Ni_hat)

    return StageData(U=U, R=R, Lv=Lv, Nv=Nv, Nt=Nt, q=q,
                     u_hat=u_hat, U_hat=U_hat, L_hat=L_hat, N_hat=N_hat)


def _weighted_increment(stages: StageData, tab: DoubleButcherTableau,
                        spec: ModelSpec):
    """Spectra of sum_i (b_i L_i + bbar_i N_i) per component, and the r rate."""
    s = tab.s
    P_hat = []
    for l in range(spec.k):
        acc = tab.b[0] * stages.L_hat[0][l] + tab.bbar[0] * stages.N_hat[0][l]
        for i in range(1, s):
            acc = acc + tab.b[i] * stages.L_hat[i][l] \
                      + tab.bbar[i] * stages.N_hat[i][l]
        P_hat.append(acc)
    Pt = float(np.dot(tab.bbar, stages.Nt))
    return P_hat, Pt


def compute_gamma(state: SavState, stages: StageData, tau: float,
                  tab: DoubleButcherTableau, spec: ModelSpec,
                  ctx: SpectralContext):
    """Relaxation coefficient and the defect-quadratic denominator.

    The denominator D = sum_l (eps^2/2) ||grad(sum_i b_i L_i + bbar_i N_i)||^2
    + (sum_i bbar_i Ntilde_i)^2 is compared against a scale-relative floor;
    below it the step is already exactly energy-neutral and gamma = 1.
    """
    e2 = spec.epsilon**2
    lap = ctx.laplacian_symbol()
    P_hat, Pt = _weighted_increment(stages, tab, spec)

    D = 0.5 * e2 * sum(ctx.grad_norm_sq_hat(ph) for ph in P_hat) + Pt * Pt
    scale = 0.5 * e2 * max(1.0, sum(ctx.grad_norm_sq_hat(h)
                                    for h in stages.u_hat)) \
        + max(1.0, state.r**2)
    if D <= DENOMINATOR_FLOOR * scale:
        return 1.0, D

    num = 0.0
    for i in range(tab.s):
        for l in range(spec.k):
            w_hat = lap * (tab.b[i] * stages.L_hat[i][l]
                           + tab.bbar[i] * stages.N_hat[i][l])
            num += e2 * ctx.parseval_inner_hat(
                stages.u_hat[l] - stages.U_hat[i][l], w_hat)
        num -= 2.0 * (state.r - stages.R[i]) * tab.bbar[i] * stages.Nt[i]
    gamma = num / (tau * D)
    if gamma <= 0.0:
        raise NonPositiveRelaxationError(gamma, tau)
    return gamma, D


def _modified_energy_hat(u_hat, r, spec, ctx):
    grad = sum(ctx.grad_norm_sq_hat(h) for h in u_hat)
    return 0.5 * spec.epsilon**2 * grad + r * r - spec.c0


def _dissipation_bracket(stages: StageData, tab: DoubleButcherTableau,
                         spec: ModelSpec, ctx: SpectralContext) -> float:
    """sum_i [ -eps^2 <U_i, lap(b_i L_i + bbar_i N_i)> + 2 R_i bbar_i Ntilde_i ].

    Equals sum_i b_i <mu_i, G mu_i> when b = bbar; kept in the general form
    so the defect function stays exact for unequal weight vectors.
    """
    e2 = spec.epsilon**2
    lap = ctx.laplacian_symbol()
    total = 0.0
    for i in range(tab.s):
        for l in range(spec.k):
            w_hat = lap * (tab.b[i] * stages.L_hat[i][l]
                           + tab.bbar[i] * stages.N_hat[i][l])
            total -= e2 * ctx.parseval_inner_hat(stages.U_hat[i][l], w_hat)
        total += 2.0 * stages.R[i] * tab.bbar[i] * stages.Nt[i]
    return total


def energy_defect(gamma_trial: float, state: SavState, stages: StageData,
                  tau: float, tab: DoubleButcherTableau, spec: ModelSpec,
                  ctx: SpectralContext) -> float:
    """Non-dissipative remainder of the energy balance at a trial gamma.

    Forms the trial update at ``gamma_trial`` and subtracts the energy
    before the step and the dissipation term.  Zero at gamma = 0 and at the
    computed relaxation coefficient (up to roundoff in the energy
    difference).
    """
    P_hat, Pt = _weighted_increment(stages, tab, spec)
    gt = gamma_trial * tau
    u1_hat = [h + gt * ph for h, ph in zip(stages.u_hat, P_hat)]
    r1 = state.r + gt * Pt
    e_before = _modified_energy_hat(stages.u_hat, state.r, spec, ctx)
    e_after = _modified_energy_hat(u1_hat, r1, spec, ctx)
    return e_after - e_before - gt * _dissipation_bracket(stages, tab, spec, ctx)


def _stage_dissipation(stages: StageData, tab: DoubleButcherTableau,
                       spec: ModelSpec, ctx: SpectralContext) -> float:
    """sum_i b_i <mu_i, G mu_i> with the stage chemical potentials."""
    e2 = spec.epsilon**2
    lap = ctx.laplacian_symbol()
    total = 0.0
    for i in range(tab.s):
        mu = []
        for l in range(spec.k):
            lap_u = ctx.inverse_transform(lap * stages.U_hat[i][l])
            mu.append(-e2 * lap_u
                      + stages.q[i] * spec.potential.fprime(stages.U[i][l]))
        total += tab.b[i] * model.dissipation_inner(mu, spec, ctx)
    return total


def step(state: SavState, tau: float, tab: DoubleButcherTableau, mode: str,
         spec: ModelSpec, ctx: SpectralContext, *,
         gn_diagnostics: bool = False,
         _u_hat=None, _energy_before=None):
    """Advance one step; returns the new state and its :class:`StepRecord`.

    In ``idt``/``rt`` mode an increase of the modified energy beyond
    roundoff tolerance raises :class:`EnergyIncreaseError` whenever the
    tableau satisfies the decay hypothesis (equal non-negative weights);
    such an increase would indicate an implementation bug, not a property
    of the data.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    _require_valid(tab)

    stages = compute_stages(state, tau, tab, spec, ctx, u_hat=_u_hat)
    if mode == STANDARD:
        gamma = 1.0
    else:
        gamma, _ = compute_gamma(state, stages, tau, tab, spec, ctx)

    P_hat, Pt = _weighted_increment(stages, tab, spec)
    gt = gamma * tau
    u1_hat = [h + gt * ph for h, ph in zip(stages.u_hat, P_hat)]
    u1 = tuple(ctx.inverse_transform(h) for h in u1_hat)
    r1 = state.r + gt * Pt
    t1 = state.t_hat + (gt if mode == RT else tau)

    e_after = _modified_energy_hat(u1_hat, r1, spec, ctx)
    if mode != STANDARD and tab.weights_nonnegative:
        e_before = _energy_before
        if e_before is None:
            e_before = _modified_energy_hat(stages.u_hat, state.r, spec, ctx)
        if e_after > e_before + ENERGY_TRAP_TOL * (1.0 + abs(e_before)):
            raise EnergyIncreaseError(
                f"modified energy rose from {e_before!r} to {e_after!r} in"
                f" {mode} mode at t_hat = {state.t_hat:.12g} (tau = {tau:.6e})")

    new_state = SavState(u=u1, r=r1, t_hat=t1)
    record = StepRecord(
        t_hat_before=state.t_hat,
        t_hat_after=t1,
        tau=tau,
        gamma=gamma,
        energy_modified=e_after,
        energy_original=model.original_energy(new_state, spec, ctx),
        stage_dissipation=_stage_dissipation(stages, tab, spec, ctx),
        mass=tuple(ctx.integrate(ul) for ul in u1),
        gn_at_1=(energy_defect(1.0, state, stages, tau, tab, spec, ctx)
                 if gn_diagnostics else None),
    )
    return new_state, record


def _advance_lean(state, u_hat, e_before, tau, tab, mode, spec, ctx):
    """Record-free step used by long reference/convergence runs.

    Returns (state, u_hat, e_after); the energy bug trap stays active in
    relaxed modes, everything else diagnostic is skipped.
    """
    stages = compute_stages(state, tau, tab, spec, ctx, u_hat=u_hat)
    if mode == STANDARD:
        gamma = 1.0
    else:
        gamma, _ = compute_gamma(state, stages, tau, tab, spec, ctx)
    P_hat, Pt = _weighted_increment(stages, tab, spec)
    gt = gamma * tau
    u1_hat = [h + gt * ph for h, ph in zip(stages.u_hat, P_hat)]
    u1 = tuple(ctx.inverse_transform(h) for h in u1_hat)
    r1 = state.r + gt * Pt
    t1 = state.t_hat + (gt if mode == RT else tau)
    e_after = None
    if mode != STANDARD and tab.weights_nonnegative:
        if e_before is None:
            e_before = _modified_energy_hat(stages.u_hat, state.r, spec, ctx)
        e_after = _modified_energy_hat(u1_hat, r1, spec, ctx)
        if e_after > e_before + ENERGY_TRAP_TOL * (1.0 + abs(e_before)):
            raise EnergyIncreaseError(
                f"modified energy rose from {e_before!r} to {e_after!r} in"
                f" {mode} mode at t_hat = {state.t_hat:.12g} (tau = {tau:.6e})")
    return SavState(u=u1, r=r1, t_hat=t1), u1_hat, e_after


def integrate_steps(state: SavState, n_steps: int, tau: float,
                    tab: DoubleButcherTableau, mode: str, spec: ModelSpec,
                    ctx: SpectralContext) -> SavState:
    """Advance exactly ``n_steps`` record-free steps.

    Used for long reference runs, where counting steps avoids any
    dependence of the step count on accumulated floating-point time.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    _require_valid(tab)
    u_hat = None
    e_prev = None
    for n in range(n_steps):
        try:
            state, u_hat, e_prev = _advance_lean(
                state, u_hat, e_prev, tau, tab, mode, spec, ctx)
        except Exception as exc:
            raise IntegrationError(n, state.t_hat, exc) from exc
    return state


def integrate_to(state: SavState, t_final: float, tau: float,
                 tab: DoubleButcherTableau, mode: str, spec: ModelSpec,
                 ctx: SpectralContext, *,
                 observer: Optional[Callable] = None,
                 gn_diagnostics: bool = False,
                 keep_records: bool = True):
    """Step repeatedly until the internal clock reaches ``t_final``.

    The step size is never shortened, so in ``rt`` mode the achieved final
    time generally differs from ``t_final``; read it off the returned
    state.  ``observer`` is called once per accepted step with the
    :class:`StepRecord` and must not mutate the state.  With
    ``keep_records=False`` and no observer the per-step diagnostics are
    skipped entirely (the energy trap of relaxed modes stays on).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    if not t_final > state.t_hat:
        raise ValueError(
            f"t_final = {t_final!r} must exceed the state time {state.t_hat!r}")
    _require_valid(tab)

    lean = not keep_records and observer is None and not gn_diagnostics
    records = []
    u_hat = None
    e_prev = None
    n = 0
    threshold = t_final - tau * 1e-9
    while state.t_hat < threshold:
        try:
            if lean:
                state, u_hat, e_prev = _advance_lean(
                    state, u_hat, e_prev, tau, tab, mode, spec, ctx)
            else:
                state, rec = step(state, tau, tab, mode, spec, ctx,
                                  gn_diagnostics=gn_diagnostics,
                                  _u_hat=u_hat, _energy_before=e_prev)
                u_hat = None  # step() does not expose the updated spectra
                e_prev = rec.energy_modified
                if observer is not None:
                    observer(rec)
                if keep_records:
                    records.append(rec)
        except Exception as exc:
            raise IntegrationError(n, state.t_hat, exc) from exc
        n += 1
    return state, records
