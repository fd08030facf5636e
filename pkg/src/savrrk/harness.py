"""Experiment reproduction: reference solutions, convergence tables, slope
studies of the relaxation coefficient and the energy defect, energy traces,
and phase-separation snapshot schedules."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import integrator, model
from .fileio import write_csv, write_field_csv, write_field_pgm, atomic_write_text, fmt
from .integrator import IDT, RT, STANDARD
from .presets import ExperimentPreset
from .spectral import SpectralContext
from .tableau import builtin_tableau


class EnergyMonotonicityError(RuntimeError):
    """An energy trace increased beyond tolerance; carries the step index."""

    def __init__(self, step_index, before, after):
        super().__init__(
            f"modified energy rose at step {step_index}:"
            f" {before!r} -> {after!r}")
        self.step_index = step_index


@dataclass(frozen=True)
class ConvergenceRow:
    """One step size of an accuracy table (both update interpretations).

    ``error_idt``/``error_rt`` take the max over components; the
    per-component values back the multi-component table columns and are not
    written to the CSV.
    """

    tau: float
    error_idt: Optional[float]
    order_idt: Optional[float]
    error_rt: Optional[float]
    order_rt: Optional[float]
    error_r_rt: Optional[float]
    component_errors_idt: Optional[tuple] = None
    component_errors_rt: Optional[tuple] = None


@dataclass(frozen=True)
class SlopeStudy:
    """Max-over-steps values of a per-step quantity against the step size."""

    taus: tuple
    values: tuple
    fitted_slope: Optional[float]
    degenerate: bool


def _session(preset: ExperimentPreset):
    spec = preset.model_spec()
    ctx = SpectralContext(spec.grid)
    tab = builtin_tableau(preset.tableau)
    return spec, ctx, tab


def run_preset(preset: ExperimentPreset, tau: float, mode: str, *,
               t_final: Optional[float] = None, gn_diagnostics: bool = False,
               keep_records: bool = False, observer=None):
    """Integrate one preset configuration to its final time."""
    spec, ctx, tab = _session(preset)
    state = preset.initial_state(spec, ctx)
    return integrator.integrate_to(
        state, t_final if t_final is not None else preset.t_final,
        tau, tab, mode, spec, ctx,
        observer=observer, gn_diagnostics=gn_diagnostics,
        keep_records=keep_records)


def default_tau_ref(preset: ExperimentPreset) -> float:
    """Reference step policy: the preset override, else min(tau)/16."""
    if preset.tau_ref > 0.0:
        return preset.tau_ref
    return min(preset.tau_list) / 16.0


def reference_states(preset: ExperimentPreset, targets, tau_ref=None) -> dict:
    """Standard-mode reference states at each target time.

    Targets are visited in increasing order in one chained run; each segment
    uses a uniform step ``delta / ceil(delta / tau_ref)`` (never larger than
    ``tau_ref``), so every target is hit exactly without shortening any
    individual step mid-segment.
    """
    if tau_ref is None:
        tau_ref = default_tau_ref(preset)
    spec, ctx, tab = _session(preset)
    state = preset.initial_state(spec, ctx)
    out = {}
    t_prev = state.t_hat
    for target in sorted(set(float(t) for t in targets)):
        delta = target - t_prev
        if delta < 0:
            raise ValueError(f"reference target {target} precedes {t_prev}")
        if delta > 0:
            n = max(1, math.ceil(delta / tau_ref - 1e-12))
            state = integrator.integrate_steps(
                state, n, delta / n, tab, STANDARD, spec, ctx)
            state = state.with_time(target)  # uniform segment lands exactly
        out[target] = state
        t_prev = target
    return out


def reference_solution(preset: ExperimentPreset, t_final=None, tau_ref=None):
    """Reference state at one time (the preset final time by default)."""
    target = preset.t_final if t_final is None else t_final
    spec, ctx, _ = _session(preset)
    state = preset.initial_state(spec, ctx)
    if target == state.t_hat:
        return state
    return reference_states(preset, [target], tau_ref)[target]


def component_errors(state, ref) -> tuple:
    """Max-over-grid gap between two states, one value per component."""
    return tuple(float(np.max(np.abs(ul - vl)))
                 for ul, vl in zip(state.u, ref.u))


def linf_error(state, ref) -> float:
    """Max-over-grid, max-over-components gap between two states' fields."""
    return max(component_errors(state, ref))


def _run_for_convergence(preset: ExperimentPreset, tau: float, mode: str):
    try:
        state, _ = run_preset(preset, tau, mode, keep_records=False)
        return tau, mode, state, None
    except integrator.IntegrationError as exc:
        return tau, mode, None, str(exc)


def _order(err_coarse, err_fine, tau_coarse, tau_fine):
    if err_coarse is None or err_fine is None:
        return None
    if err_coarse <= 0 or err_fine <= 0:
        return None
    return math.log(err_coarse / err_fine) / math.log(tau_coarse / tau_fine)


def convergence_study(preset: ExperimentPreset, tau_ref=None,
                      workers: int = 1) -> list:
    """Accuracy table over the preset's step list, both interpretations.

    Errors are discrete max-norm gaps of the fields against standard-mode
    references: the fixed-time runs (idt) compare at the preset final time,
    the drifting-time runs (rt) each compare against a reference integrated
    to that run's own achieved final time.  The auxiliary-value error of the
    rt run is reported alongside.
    """
    taus = sorted(preset.tau_list, reverse=True)
    jobs = [(tau, mode) for tau in taus for mode in (IDT, RT)]
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_for_convergence, preset, tau, mode)
                       for tau, mode in jobs]
            for fut in futures:
                tau, mode, state, err = fut.result()
                results[(tau, mode)] = (state, err)
    else:
        for tau, mode in jobs:
            tau, mode, state, err = _run_for_convergence(preset, tau, mode)
            results[(tau, mode)] = (state, err)

    targets = [preset.t_final]
    for tau in taus:
        state, _ = results[(tau, RT)]
        if state is not None:
            targets.append(state.t_hat)
    refs = reference_states(preset, targets, tau_ref)
    ref_idt = refs[preset.t_final]

    rows = []
    prev = None
    for tau in taus:
        idt_state, _ = results[(tau, IDT)]
        rt_state, _ = results[(tau, RT)]
        if idt_state is not None:
            ce_idt = component_errors(idt_state, ref_idt)
            e_idt = max(ce_idt)
        else:
            ce_idt, e_idt = None, None
        if rt_state is not None:
            ref_rt = refs[rt_state.t_hat]
            ce_rt = component_errors(rt_state, ref_rt)
            e_rt = max(ce_rt)
            e_r = abs(rt_state.r - ref_rt.r)
        else:
            ce_rt, e_rt, e_r = None, None, None
        if prev is None:
            o_idt = o_rt = None
        else:
            o_idt = _order(prev.error_idt, e_idt, prev.tau, tau)
            o_rt = _order(prev.error_rt, e_rt, prev.tau, tau)
        row = ConvergenceRow(tau=tau, error_idt=e_idt, order_idt=o_idt,
                             error_rt=e_rt, order_rt=o_rt, error_r_rt=e_r,
                             component_errors_idt=ce_idt,
                             component_errors_rt=ce_rt)
        rows.append(row)
        prev = row
    return rows


def write_convergence_csv(path, rows):
    write_csv(path,
              ["tau", "error_idt", "order_idt", "error_rt", "order_rt",
               "error_r_rt"],
              [(r.tau, r.error_idt, r.order_idt, r.error_rt, r.order_rt,
                r.error_r_rt) for r in rows])


def _fit_study(taus, values) -> SlopeStudy:
    values = tuple(values)
    degenerate = any(v <= 0.0 for v in values)
    if degenerate or len(taus) < 2:
        slope = None
    else:
        slope = float(np.polyfit(np.log(taus), np.log(values), 1)[0])
    return SlopeStudy(taus=tuple(taus), values=values, fitted_slope=slope,
                      degenerate=degenerate)


def _slope_maxima(preset: ExperimentPreset, gn: bool):
    taus = tuple(sorted(preset.tau_list, reverse=True))
    gamma_max, gn_max = [], []
    for tau in taus:
        _, records = run_preset(preset, tau, RT, keep_records=True,
                                gn_diagnostics=gn)
        gamma_max.append(max(abs(rec.gamma - 1.0) for rec in records))
        if gn:
            gn_max.append(max(abs(rec.gn_at_1) for rec in records))
    return taus, gamma_max, gn_max


def gamma_slope_study(preset: ExperimentPreset) -> SlopeStudy:
    """Max |gamma - 1| per step size, with a log-log least-squares slope."""
    taus, gamma_max, _ = _slope_maxima(preset, gn=False)
    return _fit_study(taus, gamma_max)


def gn_slope_study(preset: ExperimentPreset) -> SlopeStudy:
    """Max |energy defect at gamma = 1| per step size, with fitted slope."""
    taus, _, gn_max = _slope_maxima(preset, gn=True)
    return _fit_study(taus, gn_max)


def slope_study_pair(preset: ExperimentPreset):
    """Both slope studies from one shared set of runs."""
    taus, gamma_max, gn_max = _slope_maxima(preset, gn=True)
    return _fit_study(taus, gamma_max), _fit_study(taus, gn_max)


def write_slope_csv(path, study: SlopeStudy, label: str):
    write_csv(path, ["tau", label],
              [(t, v) for t, v in zip(study.taus, study.values)])


def energy_trace(preset: ExperimentPreset, out_csv=None, tau=None, mode=None):
    """Per-step energy/mass series; raises if the modified energy ever rises."""
    spec, ctx, tab = _session(preset)
    state = preset.initial_state(spec, ctx)
    tau = tau if tau is not None else preset.tau_list[0]
    mode = mode or preset.mode
    e0_mod = model.modified_energy(state, spec, ctx)
    rows = [(0, state.t_hat, None, e0_mod,
             model.original_energy(state, spec, ctx),
             *(ctx.integrate(ul) for ul in state.u))]
    _, records = integrator.integrate_to(
        state, preset.t_final, tau, tab, mode, spec, ctx, keep_records=True)
    prev = e0_mod
    for n, rec in enumerate(records, start=1):
        if rec.energy_modified > prev + 1e-10 * (1.0 + abs(prev)):
            raise EnergyMonotonicityError(n, prev, rec.energy_modified)
        prev = rec.energy_modified
        rows.append((n, rec.t_hat_after, rec.gamma, rec.energy_modified,
                     rec.energy_original, *rec.mass))
    if out_csv is not None:
        mass_cols = [f"mass_{l + 1}" for l in range(spec.k)]
        write_csv(out_csv,
                  ["step", "t_hat", "gamma", "energy_modified",
                   "energy_original", *mass_cols], rows)
    return rows


def phase_separation(preset: ExperimentPreset, out_dir, snapshot_times=None,
                     tau=None, mode=None) -> list:
    """Run the pattern-formation preset, writing CSV+PGM snapshots.

    A snapshot is taken at the first step whose time meets or exceeds each
    requested time (the initial state serves targets at or below the start
    time).  Multi-component runs also write the composite ``u1 + 2*u2``
    profile.  Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec, ctx, tab = _session(preset)
    state = preset.initial_state(spec, ctx)
    tau = tau if tau is not None else preset.tau_list[0]
    mode = mode or preset.mode
    times = sorted(snapshot_times if snapshot_times is not None
                   else preset.snapshot_times)
    if not times:
        raise ValueError("no snapshot times requested")

    written = []

    def emit(target, st):
        stem = f"{preset.name}_{target:.4f}"
        fields = {"": st.u[0]} if spec.k == 1 else {}
        if spec.k > 1:
            for l, ul in enumerate(st.u, start=1):
                fields[f"_u{l}"] = ul
            fields["_composite"] = st.u[0] + 2.0 * st.u[1]
        for suffix, values in fields.items():
            csv_path = out_dir / f"{stem}{suffix}.csv"
            pgm_path = out_dir / f"{stem}{suffix}.pgm"
            write_field_csv(csv_path, values)
            write_field_pgm(pgm_path, values)
            written.extend([csv_path, pgm_path])

    pending = list(times)
    while pending and pending[0] <= state.t_hat + tau * 1e-9:
        emit(pending.pop(0), state)
    n = 0
    while pending:
        try:
            state, _ = integrator.step(state, tau, tab, mode, spec, ctx)
        except Exception as exc:
            raise integrator.IntegrationError(n, state.t_hat, exc) from exc
        n += 1
        while pending and state.t_hat >= pending[0] - tau * 1e-9:
            emit(pending.pop(0), state)
    return written


def write_summary(path, entries: dict):
    """Machine-readable key-value summary ('key = value' per line)."""
    lines = []
    for key, value in entries.items():
        if isinstance(value, bool):
            text = "pass" if value else "fail"
        elif isinstance(value, float):
            text = fmt(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    atomic_write_text(path, "\n".join(lines) + "\n")
