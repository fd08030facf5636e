"""Named experiment setups: domains, initial data, parameters, step lists.

Every table, slope figure, energy trace and phase-separation run of the
experiment suite has a preset here, so studies are reproducible from a name
plus a seed.  Random initial data uses a counter-based 64-bit generator
(Philox) so files are bit-identical across reruns and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import (ALLEN_CAHN, CAHN_HILLIARD, ModelSpec, SavState,
                    builtin_potential, initial_state)
from .spectral import PeriodicGrid, SpectralContext

TWO_PI = 2.0 * np.pi


def _rand(grid: PeriodicGrid, seed: int) -> np.ndarray:
    """i.i.d. uniform on [-1, 1] per grid point, counter-based generator."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.uniform(-1.0, 1.0, size=grid.shape)


def _ic_sine_half(grid, params, seed):
    x, y = grid.coords()
    return [0.5 * np.sin(x) * np.sin(y)]


def _ic_cos_trio(grid, params, seed):
    x, y = grid.coords()
    u1 = 0.5 * np.cos(np.pi * x) * np.cos(np.pi * y)
    u2 = u1.copy()
    u3 = 1.0 - u1 - u2
    return [u1, u2, u3]


def _ic_rand_uniform(grid, params, seed):
    amplitude = params.get("amplitude", 1.0)
    offset = params.get("offset", 0.0)
    return [amplitude * _rand(grid, seed) + offset]


def _ic_tanh_circles(grid, params, seed):
    # two circles of equal radius; the third component closes the partition
    eps = params["epsilon"]
    radius = params["radius"]
    centers = params["centers"]
    x, y = grid.coords()
    fields = []
    for cx, cy in centers:
        d = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        fields.append(0.5 * (1.0 + np.tanh((radius - d) / eps)))
    last = 1.0 - sum(fields)
    fields.append(last)
    return fields


_EXPR_NAMESPACE = {
    "pi": np.pi, "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "tanh": np.tanh, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs,
    "log": np.log, "cosh": np.cosh, "sinh": np.sinh,
}


def _ic_expression(grid, params, seed):
    # one expression per component, ';'-separated, over x, y and numpy funcs
    x, y = grid.coords()
    ns = dict(_EXPR_NAMESPACE, x=x, y=y)
    fields = []
    for expr in params["expression"].split(";"):
        value = eval(expr, {"__builtins__": {}}, ns)  # trusted run config
        fields.append(np.broadcast_to(np.asarray(value, dtype=float),
                                      grid.shape).copy())
    return fields


INITIAL_CONDITIONS = {
    "sine-half": _ic_sine_half,
    "cos-trio": _ic_cos_trio,
    "rand-uniform": _ic_rand_uniform,
    "tanh-circles": _ic_tanh_circles,
    "expression": _ic_expression,
}


def build_initial_fields(name, grid, params=None, seed=0):
    try:
        builder = INITIAL_CONDITIONS[name]
    except KeyError:
        available = ", ".join(sorted(INITIAL_CONDITIONS))
        raise KeyError(
            f"unknown initial condition {name!r}; available: {available}") from None
    return builder(grid, params or {}, seed)


@dataclass(frozen=True)
class ExperimentPreset:
    """Plain-data bundle describing one reproducible run family."""

    name: str
    operator: str
    epsilon: float
    c0: float
    potential: str
    k: int
    nx: int
    ny: int
    lx: float
    ly: float
    x0: float
    y0: float
    ic: str
    tableau: str
    t_final: float
    tau_list: tuple
    mode: str = "rt"
    seed: int = 0
    ic_params: dict = field(default_factory=dict)
    snapshot_times: tuple = ()
    tau_ref: float = 0.0  # 0 -> default policy min(tau_list)/16

    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(nx=self.nx, ny=self.ny, lx=self.lx, ly=self.ly,
                            x0=self.x0, y0=self.y0)

    def model_spec(self) -> ModelSpec:
        return ModelSpec(operator=self.operator, epsilon=self.epsilon,
                         grid=self.grid(), potential=builtin_potential(self.potential),
                         c0=self.c0, k=self.k)

    def initial_fields(self, grid=None):
        return build_initial_fields(self.ic, grid or self.grid(),
                                    self.ic_params, self.seed)

    def initial_state(self, spec: ModelSpec, ctx: SpectralContext) -> SavState:
        return initial_state(self.initial_fields(spec.grid), spec, ctx)

    def with_tableau(self, tableau: str) -> "ExperimentPreset":
        return replace(self, tableau=tableau)


def _ac_base(**kw):
    base = dict(operator=ALLEN_CAHN, epsilon=0.5, c0=0.0,
                potential="double-well", k=1, nx=128, ny=128,
                lx=TWO_PI, ly=TWO_PI, x0=0.0, y0=0.0, ic="sine-half")
    base.update(kw)
    return base


def _ch_base(**kw):
    base = dict(operator=CAHN_HILLIARD, epsilon=1.0, c0=0.0,
                potential="double-well", k=1, nx=128, ny=128,
                lx=TWO_PI, ly=TWO_PI, x0=0.0, y0=0.0, ic="sine-half")
    base.update(kw)
    return base


def _vac_base(**kw):
    base = dict(operator=ALLEN_CAHN, epsilon=0.01, c0=0.0,
                potential="multi-well", k=3, nx=128, ny=128,
                lx=1.0, ly=1.0, x0=-0.5, y0=-0.5, ic="cos-trio")
    base.update(kw)
    return base


def _halvings(tau0, n=4):
    return tuple(tau0 / 2**i for i in range(n))


def _build_registry():
    presets = {}

    def add(p):
        presets[p.name] = p

    # accuracy tables: final time 1, step lists per method
    ac_taus = {"3-2": _halvings(1.0 / 100), "4-3": _halvings(1.0 / 100),
               "6-4": _halvings(1.0 / 16)}
    ch_taus = {"3-2": _halvings(1e-3), "4-3": _halvings(1e-3),
               "6-4": _halvings(8e-3)}
    vac_taus = _halvings(1.0 / 10)
    for sp, taus in ac_taus.items():
        add(ExperimentPreset(name=f"ac-table-{sp}",
                             tableau=f"imex-rrk-{sp}", t_final=1.0,
                             tau_list=taus, **_ac_base()))
    for sp, taus in ch_taus.items():
        add(ExperimentPreset(name=f"ch-table-{sp}",
                             tableau=f"imex-rrk-{sp}", t_final=1.0,
                             tau_list=taus, **_ch_base()))
    for sp in ("3-2", "4-3", "6-4"):
        add(ExperimentPreset(name=f"vac-table-{sp}",
                             tableau=f"imex-rrk-{sp}", t_final=1.0,
                             tau_list=vac_taus, tau_ref=1e-4, **_vac_base()))

    # slope studies (relaxation coefficient and defect-at-1 versus step size);
    # step lists sit inside the asymptotic range but above float noise
    for sp, taus in ac_taus.items():
        add(ExperimentPreset(name=f"ac-slope-{sp}",
                             tableau=f"imex-rrk-{sp}", t_final=1.0,
                             tau_list=taus, **_ac_base()))
    ch_slope_taus = _halvings(2.5e-3, 5)
    for sp in ("3-2", "4-3", "6-4"):
        add(ExperimentPreset(name=f"ch-slope-{sp}",
                             tableau=f"imex-rrk-{sp}", t_final=1.0,
                             tau_list=ch_slope_taus, **_ch_base()))
    vac_slope_taus = _halvings(1.0 / 40)
    for sp in ("3-2", "4-3", "6-4"):
        add(ExperimentPreset(name=f"vac-slope-{sp}",
                             tableau=f"imex-rrk-{sp}", t_final=1.0,
                             tau_list=vac_slope_taus, **_vac_base()))

    # energy traces
    add(ExperimentPreset(name="ac-energy", tableau="imex-rrk-3-2",
                         t_final=5.0, tau_list=(1e-3,), **_ac_base()))
    add(ExperimentPreset(name="ch-energy", tableau="imex-rrk-3-2",
                         t_final=5.0, tau_list=(1e-2,), **_ch_base()))
    add(ExperimentPreset(name="vac-energy", tableau="imex-rrk-3-2",
                         t_final=20.0, tau_list=(1e-2,), **_vac_base()))

    # phase separation
    add(ExperimentPreset(name="ac-phase", tableau="imex-rrk-3-2",
                         t_final=60.0, tau_list=(1e-3,), seed=2024,
                         snapshot_times=(1.0, 5.0, 10.0, 20.0, 40.0, 60.0),
                         **_ac_base(epsilon=0.005, ic="rand-uniform",
                                    ic_params={"amplitude": 0.001})))
    add(ExperimentPreset(name="ch-phase", tableau="imex-rrk-3-2",
                         t_final=0.2, tau_list=(1e-5,), seed=2024,
                         snapshot_times=(0.001, 0.005, 0.02, 0.05, 0.1, 0.2),
                         **_ch_base(epsilon=0.1, ic="rand-uniform",
                                    ic_params={"amplitude": 0.4,
                                               "offset": 0.25})))
    add(ExperimentPreset(name="vac-phase", tableau="imex-rrk-3-2",
                         t_final=40.0, tau_list=(1e-2,),
                         snapshot_times=(1.0, 10.0, 20.0, 40.0),
                         **_vac_base(epsilon=0.025, nx=128, ny=128,
                                     lx=2.0, ly=1.0, x0=0.0, y0=0.0,
                                     ic="tanh-circles",
                                     ic_params={"epsilon": 0.025,
                                                "radius": 0.25,
                                                "centers": ((1.26, 0.5),
                                                            (0.74, 0.5))})))
    return presets


PRESETS = _build_registry()


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        available = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; available: {available}") from None
