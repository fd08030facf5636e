"""Gradient-flow model definitions in auxiliary-variable form.

A phase-field gradient flow ``u_t = G(-eps^2 lap(u) + F'(u))`` with
``G = -I`` (Allen-Cahn) or ``G = lap`` (Cahn-Hilliard) is rewritten with
the scalar auxiliary value ``r = sqrt(E1 + C0)``, ``E1 = sum_l int F(u_l)``,
into

    (u_l)_t = L(u_l) + N_l(u, r),      r_t = Ntilde(u, r),

where ``L = G(-eps^2 lap)`` is linear and diagonal in Fourier space,
``N_l = G(q F'(u_l))`` with ``q = r / sqrt(E1 + C0)``, and ``Ntilde``
substitutes the first equation for ``u_t``:

    Ntilde = (1 / (2 sqrt(E1 + C0))) * sum_l <F'(u_l), L(u_l) + N_l>.

The quadratic form ``E = sum_l (eps^2/2) ||grad u_l||^2 + r^2 - C0`` is the
modified energy whose discrete decay the relaxed integrator preserves; the
original energy adds the potential term instead of ``r^2 - C0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .spectral import PeriodicGrid, SpectralContext

ALLEN_CAHN = "allen-cahn"
CAHN_HILLIARD = "cahn-hilliard"
OPERATORS = (ALLEN_CAHN, CAHN_HILLIARD)

DEGENERACY_FLOOR = 1e-14


class InvalidPotentialError(ValueError):
    """The bulk energy plus shift is negative; no real auxiliary value exists."""


class SavDegeneracyError(ArithmeticError):
    """The auxiliary denominator sqrt(E1 + C0) collapsed below the floor."""


@dataclass(frozen=True)
class Potential:
    """Pointwise energy density with its derivative."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]


def _double_well():
    return Potential(
        name="double-well",
        f=lambda u: 0.25 * (u * u - 1.0) ** 2,
        fprime=lambda u: u * u * u - u,
    )


def _multi_well():
    # F(u) = u^2 (1-u)^2 / 4, minima at 0 and 1 (volume-fraction wells)
    return Potential(
        name="multi-well",
        f=lambda u: 0.25 * (u * (1.0 - u)) ** 2,
        fprime=lambda u: 0.5 * u * (1.0 - u) * (1.0 - 2.0 * u),
    )


BUILTIN_POTENTIALS = {
    "double-well": _double_well,
    "multi-well": _multi_well,
}


def builtin_potential(name: str) -> Potential:
    try:
        factory = BUILTIN_POTENTIALS[name]
    except KeyError:
        available = ", ".join(sorted(BUILTIN_POTENTIALS))
        raise KeyError(f"unknown potential {name!r}; available: {available}") from None
    return factory()


def potential_derivative_residual(pot: Potential, lo=-2.0, hi=2.0,
                                  n=1000, h=1e-5, seed=0) -> float:
    """Max scaled gap between fprime and a central difference of f."""
    rng = np.random.default_rng(seed)
    v = rng.uniform(lo, hi, n)
    fd = (pot.f(v + h) - pot.f(v - h)) / (2.0 * h)
    return float(np.max(np.abs(pot.fprime(v) - fd) / (1.0 + np.abs(pot.fprime(v)))))


@dataclass(frozen=True)
class ModelSpec:
    """One gradient-flow problem: operator family, parameters, grid."""

    operator: str
    epsilon: float
    grid: PeriodicGrid
    potential: Potential = field(default_factory=_double_well)
    c0: float = 0.0
    k: int = 1
    dealias: bool = False

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(
                f"operator must be one of {OPERATORS}, got {self.operator!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.c0 < 0:
            raise ValueError("the auxiliary shift c0 must be non-negative")
        if self.k < 1:
            raise ValueError("component count must be >= 1")
        if self.k > 1 and self.operator != ALLEN_CAHN:
            raise ValueError("multi-component systems are supported for"
                             " allen-cahn only")


@dataclass(frozen=True)
class SavState:
    """k phase fields, the scalar auxiliary value, and the current time."""

    u: tuple
    r: float
    t_hat: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(np.asarray(f, dtype=float)
                                            for f in self.u))

    def with_time(self, t_hat: float) -> "SavState":
        return replace(self, t_hat=t_hat)


def linear_symbol(spec: ModelSpec, ctx: SpectralContext) -> np.ndarray:
    """Per-mode multiplier of L = G(-eps^2 lap); non-positive in both cases."""
    e2 = spec.epsilon**2
    if spec.operator == ALLEN_CAHN:
        return -e2 * ctx.k2
    return -e2 * ctx.k2**2


def bulk_energy(u, spec: ModelSpec, ctx: SpectralContext) -> float:
    """E1 = sum_l int F(u_l) by grid quadrature."""
    return sum(ctx.integrate(spec.potential.f(ul)) for ul in u)


def consistent_aux(u, spec: ModelSpec, ctx: SpectralContext) -> float:
    """Auxiliary value sqrt(E1 + C0) matching the fields."""
    e1 = bulk_energy(u, spec, ctx)
    if e1 + spec.c0 < 0.0:
        raise InvalidPotentialError(
            f"bulk energy {e1:.6e} + c0 {spec.c0:.6e} is negative")
    return float(np.sqrt(e1 + spec.c0))


def initial_state(u, spec: ModelSpec, ctx: SpectralContext,
                  t_hat: float = 0.0) -> SavState:
    """State with the auxiliary value initialized consistently."""
    u = [np.asarray(f, dtype=float) for f in u]
    if len(u) != spec.k:
        raise ValueError(f"expected {spec.k} fields, got {len(u)}")
    for f in u:
        ctx._check(f)
    return SavState(u=tuple(u), r=consistent_aux(u, spec, ctx), t_hat=t_hat)


def _aux_denominator(u, spec: ModelSpec, ctx: SpectralContext) -> float:
    e1 = bulk_energy(u, spec, ctx)
    if e1 + spec.c0 <= DEGENERACY_FLOOR:
        raise SavDegeneracyError(
            f"E1 + c0 = {e1 + spec.c0:.3e} at or below the degeneracy floor")
    return float(np.sqrt(e1 + spec.c0))


def linear_term(ul: np.ndarray, spec: ModelSpec, ctx: SpectralContext) -> np.ndarray:
    """L(u) for one component."""
    return ctx.apply_symbol(ul, linear_symbol(spec, ctx))


def nonlinear_term(u, r: float, spec: ModelSpec, ctx: SpectralContext) -> list:
    """N_l(u, r) = G(q F'(u_l)) for each component."""
    den = _aux_denominator(u, spec, ctx)
    q = r / den
    out = []
    for ul in u:
        fp = spec.potential.fprime(ul)
        if spec.dealias:
            fp = ctx.dealias_filter(fp)
        if spec.operator == ALLEN_CAHN:
            out.append(-q * fp)
        else:
            out.append(ctx.apply_symbol(q * fp, ctx.laplacian_symbol()))
    return out


def aux_rate(u, r: float, spec: ModelSpec, ctx: SpectralContext) -> float:
    """Ntilde(u, r) with u_t replaced by L(u) + N(u, r)."""
    den = _aux_denominator(u, spec, ctx)
    nv = nonlinear_term(u, r, spec, ctx)
    total = 0.0
    for ul, nl in zip(u, nv):
        fp = spec.potential.fprime(ul)
        total += ctx.inner(fp, linear_term(ul, spec, ctx) + nl)
    return total / (2.0 * den)


def _nonlinear_with_rate(u, r, lin, spec: ModelSpec, ctx: SpectralContext):
    """(N fields, N spectra, Ntilde, q) with one shared quadrature.

    ``lin`` are precomputed (L field, L spectrum) pairs per component.
    """
    den = _aux_denominator(u, spec, ctx)
    q = r / den
    n_fields, n_hats = [], []
    rate = 0.0
    for ul, (lf, _) in zip(u, lin):
        fp = spec.potential.fprime(ul)
        if spec.dealias:
            fp = ctx.dealias_filter(fp)
        if spec.operator == ALLEN_CAHN:
            nf = -q * fp
            nh = ctx.transform(nf)
        else:
            nh = ctx.laplacian_symbol() * (q * ctx.transform(fp))
            nf = ctx.inverse_transform(nh)
        n_fields.append(nf)
        n_hats.append(nh)
        rate += ctx.inner(fp, lf + nf)
    return n_fields, n_hats, rate / (2.0 * den), q


def chemical_potential(u, r: float, spec: ModelSpec, ctx: SpectralContext) -> list:
    """mu_l = -eps^2 lap(u_l) + q F'(u_l) (diagnostic accessor)."""
    den = _aux_denominator(u, spec, ctx)
    q = r / den
    e2 = spec.epsilon**2
    lap = ctx.laplacian_symbol()
    return [-e2 * ctx.apply_symbol(ul, lap) + q * spec.potential.fprime(ul)
            for ul in u]


def dissipation_inner(mu, spec: ModelSpec, ctx: SpectralContext) -> float:
    """sum_l <mu_l, G mu_l>; non-positive since G is non-positive."""
    if spec.operator == ALLEN_CAHN:
        return -sum(ctx.norm_sq(m) for m in mu)
    return -sum(ctx.grad_norm_sq(m) for m in mu)


def modified_energy(state: SavState, spec: ModelSpec, ctx: SpectralContext) -> float:
    grad = sum(ctx.grad_norm_sq(ul) for ul in state.u)
    return 0.5 * spec.epsilon**2 * grad + state.r**2 - spec.c0


def original_energy(state: SavState, spec: ModelSpec, ctx: SpectralContext) -> float:
    grad = sum(ctx.grad_norm_sq(ul) for ul in state.u)
    return 0.5 * spec.epsilon**2 * grad + bulk_energy(state.u, spec, ctx)
