import numpy as np
import pytest

from savrrk import harness, model
from savrrk.harness import (ConvergenceRow, EnergyMonotonicityError,
                            convergence_study, default_tau_ref, energy_trace,
                            gamma_slope_study, gn_slope_study, linf_error,
                            phase_separation, reference_solution,
                            reference_states, slope_study_pair,
                            write_convergence_csv, write_summary)
from savrrk.presets import (PRESETS, ExperimentPreset, build_initial_fields,
                            get_preset)
from savrrk.spectral import PeriodicGrid, SpectralContext

TWO_PI = 2.0 * np.pi


def mini_ac(**kw):
    base = dict(name="mini-ac", operator="allen-cahn", epsilon=0.5, c0=0.0,
                potential="double-well", k=1, nx=32, ny=32,
                lx=TWO_PI, ly=TWO_PI, x0=0.0, y0=0.0, ic="sine-half",
                tableau="imex-rrk-3-2", t_final=0.5,
                tau_list=(1 / 40, 1 / 80, 1 / 160))
    base.update(kw)
    return ExperimentPreset(**base)


def test_preset_registry_complete():
    expected = set()
    for family in ("ac", "ch", "vac"):
        for sp in ("3-2", "4-3", "6-4"):
            expected.add(f"{family}-table-{sp}")
            expected.add(f"{family}-slope-{sp}")
        expected.add(f"{family}-energy")
        expected.add(f"{family}-phase")
    assert expected <= set(PRESETS)
    for name, preset in PRESETS.items():
        spec = preset.model_spec()
        fields = preset.initial_fields()
        assert len(fields) == spec.k
    for sp in ("3-2", "4-3", "6-4"):
        assert get_preset(f"vac-table-{sp}").tau_ref == 1e-4


def test_get_preset_unknown():
    with pytest.raises(KeyError) as err:
        get_preset("nope")
    assert "available" in str(err.value)


def test_build_initial_fields_unknown():
    grid = PeriodicGrid(nx=8, ny=8, lx=1.0, ly=1.0)
    with pytest.raises(KeyError):
        build_initial_fields("mystery", grid)


def test_vac_phase_partition_of_unity():
    preset = get_preset("vac-phase")
    fields = preset.initial_fields()
    total = fields[0] + fields[1] + fields[2]
    assert np.abs(total - 1.0).max() <= 1e-12


def test_rand_initial_fields_are_seed_deterministic():
    grid = PeriodicGrid(nx=16, ny=16, lx=1.0, ly=1.0)
    a = build_initial_fields("rand-uniform", grid, {"amplitude": 0.4,
                                                    "offset": 0.25}, seed=9)
    b = build_initial_fields("rand-uniform", grid, {"amplitude": 0.4,
                                                    "offset": 0.25}, seed=9)
    c = build_initial_fields("rand-uniform", grid, {"amplitude": 0.4,
                                                    "offset": 0.25}, seed=10)
    assert np.array_equal(a[0], b[0])
    assert not np.array_equal(a[0], c[0])
    assert a[0].min() >= -0.15 and a[0].max() <= 0.65


def test_default_tau_ref_policy():
    preset = mini_ac()
    assert default_tau_ref(preset) == min(preset.tau_list) / 16.0
    assert default_tau_ref(mini_ac(tau_ref=1e-4)) == 1e-4


def test_reference_states_land_exactly():
    preset = mini_ac()
    targets = [0.124999999, 0.125, 0.5]
    refs = reference_states(preset, targets, tau_ref=1e-3)
    assert sorted(refs) == sorted(set(targets))
    for t, state in refs.items():
        assert state.t_hat == t
    single = reference_solution(preset, 0.5, tau_ref=1e-3)
    assert np.abs(refs[0.5].u[0] - single.u[0]).max() <= 1e-8


def test_reference_solution_at_start_returns_initial():
    preset = mini_ac()
    state = reference_solution(preset, 0.0)
    assert state.t_hat == 0.0
    spec = preset.model_spec()
    ctx = SpectralContext(spec.grid)
    assert np.array_equal(state.u[0], preset.initial_state(spec, ctx).u[0])


def test_reference_states_reject_backward_targets():
    with pytest.raises(ValueError):
        reference_states(mini_ac(), [-0.5])


def test_convergence_study_orders():
    rows = convergence_study(mini_ac())
    assert len(rows) == 3
    assert rows[0].order_idt is None and rows[0].order_rt is None
    errs_idt = [r.error_idt for r in rows]
    errs_rt = [r.error_rt for r in rows]
    assert all(np.diff(errs_idt) < 0) and all(np.diff(errs_rt) < 0)
    assert 0.6 <= rows[-1].order_idt <= 1.4
    assert 1.6 <= rows[-1].order_rt <= 2.4
    assert rows[-1].error_r_rt >= 0.0


def test_convergence_study_parallel_matches_serial():
    preset = mini_ac(tau_list=(1 / 40, 1 / 80))
    serial = convergence_study(preset)
    parallel = convergence_study(preset, workers=2)
    for a, b in zip(serial, parallel):
        assert a.tau == b.tau
        assert a.error_idt == b.error_idt
        assert a.error_rt == b.error_rt


def test_write_convergence_csv(tmp_path):
    rows = [ConvergenceRow(tau=0.1, error_idt=1e-3, order_idt=None,
                           error_rt=1e-5, order_rt=None, error_r_rt=1e-6),
            ConvergenceRow(tau=0.05, error_idt=5e-4, order_idt=1.0,
                           error_rt=2.5e-6, order_rt=2.0, error_r_rt=2e-7)]
    path = tmp_path / "table.csv"
    write_convergence_csv(path, rows)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "tau,error_idt,order_idt,error_rt,order_rt,error_r_rt"
    assert lines[1].split(",")[2] == ""  # first row has no order
    assert lines[2].split(",")[2] == "1.0"


def test_slope_studies_structure():
    preset = mini_ac(tau_list=(1 / 20, 1 / 40, 1 / 80), t_final=0.25)
    gamma_study, gn_study = slope_study_pair(preset)
    assert gamma_study.taus == (1 / 20, 1 / 40, 1 / 80)
    assert not gamma_study.degenerate and not gn_study.degenerate
    assert all(v > 0 for v in gamma_study.values)
    assert all(np.diff(gamma_study.values) < 0)
    assert 0.5 <= gamma_study.fitted_slope <= 1.5
    assert 2.4 <= gn_study.fitted_slope <= 3.6
    solo = gamma_slope_study(preset)
    assert solo.values == gamma_study.values
    solo_gn = gn_slope_study(preset)
    assert solo_gn.values == gn_study.values


def test_slope_study_degenerate_at_equilibrium():
    preset = mini_ac(ic="expression", ic_params={"expression": "1 + 0*x"},
                     c0=1.0, tau_list=(0.02, 0.01), t_final=0.1)
    study = gamma_slope_study(preset)
    assert study.degenerate
    assert study.fitted_slope is None


def test_energy_trace_monotone_and_csv(tmp_path):
    preset = mini_ac(t_final=0.2)
    path = tmp_path / "energy.csv"
    rows = energy_trace(preset, out_csv=path, tau=1 / 40)
    assert len(rows) == 9  # initial row plus eight steps
    header = path.read_text().split("\n", 1)[0]
    assert header == "step,t_hat,gamma,energy_modified,energy_original,mass_1"
    energies = [row[3] for row in rows]
    assert all(np.diff(energies) <= 1e-10 * (1 + np.abs(energies[:-1])))
    assert rows[0][0] == 0 and rows[0][2] is None


def test_energy_trace_detects_increase():
    # standard stepping at a huge step size really does push the modified
    # energy up; the trace must flag the offending step
    preset = mini_ac(mode="standard", t_final=48.0, tau_list=(4.0,))
    with pytest.raises(EnergyMonotonicityError) as err:
        energy_trace(preset, tau=4.0, mode="standard")
    assert err.value.step_index >= 1


def test_phase_separation_snapshots(tmp_path):
    preset = mini_ac(name="mini-phase", ic="rand-uniform",
                     ic_params={"amplitude": 0.4, "offset": 0.25},
                     seed=5, operator="cahn-hilliard", epsilon=1.0,
                     tau_list=(1e-3,), t_final=0.01,
                     snapshot_times=(0.0, 0.002, 0.004))
    out = tmp_path / "snaps"
    written = phase_separation(preset, out)
    names = sorted(p.name for p in written)
    assert "mini-phase_0.0000.csv" in names
    assert "mini-phase_0.0040.pgm" in names
    assert len(written) == 6
    # mass of every snapshot matches the initial field
    from savrrk.fileio import read_field_csv
    fields = [read_field_csv(out / f"mini-phase_{t:.4f}.csv")
              for t in (0.0, 0.002, 0.004)]
    masses = [f.mean() for f in fields]
    assert abs(masses[1] - masses[0]) <= 1e-10
    assert abs(masses[2] - masses[0]) <= 1e-10


def test_phase_separation_deterministic(tmp_path):
    preset = mini_ac(name="p", ic="rand-uniform",
                     ic_params={"amplitude": 0.001}, seed=11,
                     epsilon=0.1, tau_list=(1e-3,), t_final=5e-3,
                     snapshot_times=(0.002,))
    a = tmp_path / "a"
    b = tmp_path / "b"
    phase_separation(preset, a)
    phase_separation(preset, b)
    assert (a / "p_0.0020.csv").read_bytes() == (b / "p_0.0020.csv").read_bytes()
    assert (a / "p_0.0020.pgm").read_bytes() == (b / "p_0.0020.pgm").read_bytes()


def test_phase_separation_vector_files(tmp_path):
    preset = ExperimentPreset(
        name="vmini", operator="allen-cahn", epsilon=0.05, c0=0.0,
        potential="multi-well", k=3, nx=16, ny=16, lx=2.0, ly=1.0,
        x0=0.0, y0=0.0, ic="tanh-circles",
        ic_params={"epsilon": 0.1, "radius": 0.25,
                   "centers": ((1.26, 0.5), (0.74, 0.5))},
        tableau="imex-rrk-3-2", t_final=0.1, tau_list=(0.01,),
        snapshot_times=(0.02,))
    written = phase_separation(preset, tmp_path / "v")
    names = {p.name for p in written}
    assert {"vmini_0.0200_u1.csv", "vmini_0.0200_u2.csv",
            "vmini_0.0200_u3.csv", "vmini_0.0200_composite.csv"} \
        <= {n for n in names if n.endswith("csv")}
    assert len(written) == 8


def test_phase_separation_requires_times(tmp_path):
    with pytest.raises(ValueError):
        phase_separation(mini_ac(snapshot_times=()), tmp_path)


def test_write_summary_format(tmp_path):
    path = tmp_path / "summary.txt"
    write_summary(path, {"ok": True, "bad": False, "value": 1.5, "n": 3})
    text = path.read_text()
    assert "ok = pass" in text
    assert "bad = fail" in text
    assert "value = 1.5" in text
    assert "n = 3" in text


def test_linf_error_per_component():
    a = model.SavState(u=(np.zeros((4, 4)), np.ones((4, 4))), r=0.0)
    b = model.SavState(u=(np.full((4, 4), 0.5), np.ones((4, 4))), r=0.0)
    assert linf_error(a, b) == 0.5
    assert harness.component_errors(a, b) == (0.5, 0.0)


@pytest.mark.slow
def test_reference_insensitivity():
    # halving the reference step must leave every reported error within 5%
    from dataclasses import replace
    short = replace(get_preset("ac-table-6-4"), tau_list=(1 / 16, 1 / 32))
    coarse = convergence_study(short, tau_ref=(1 / 32) / 16)
    fine = convergence_study(short, tau_ref=(1 / 32) / 32)
    for a, b in zip(coarse, fine):
        assert abs(a.error_idt - b.error_idt) <= 0.05 * a.error_idt
        assert abs(a.error_rt - b.error_rt) <= 0.05 * a.error_rt
