"""Fourier pseudo-spectral machinery on a uniform periodic rectangle.

All constant-coefficient operators are represented by a real per-mode
multiplier ("symbol") on the half-spectrum produced by a real 2-D FFT.

Conventions (the single place they are defined):

* fields are real arrays of shape ``(ny, nx)``; entry ``[j, i]`` is the
  sample at ``(x0 + i*hx, y0 + j*hy)``;
* the forward transform is the unnormalized ``rfft2``; the inverse divides
  by ``nx*ny`` (numpy/scipy default), so ``inverse_transform(transform(f))``
  is the identity;
* wavenumbers are ``kx = 2*pi*m/lx`` (``m = 0..nx/2``) and
  ``ky = 2*pi*n/ly`` (``n`` in the usual fft order, Nyquist included);
* discrete inner products carry the cell area: ``<f, g> = hx*hy*sum(f*g)``;
  spectral sums reproduce them exactly via Parseval weights (2 on interior
  kx columns, 1 on the kx=0 and Nyquist columns).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

SINGULAR_TOL = 1e-14


class GridConfigError(ValueError):
    """Grid sizes unsupported by the transform conventions."""


class GridMismatchError(ValueError):
    """Fields do not live on this context's grid."""


class SingularSolveError(ArithmeticError):
    """A diagonal implicit solve hit a (near-)zero denominator."""

    def __init__(self, coeff, min_denom):
        super().__init__(
            f"diagonal solve is singular: min |1 - coeff*sigma| = {min_denom:.3e}"
            f" for coeff = {coeff:.6e}; the implicit coefficient is invalid"
            " against the operator spectrum")
        self.coeff = coeff
        self.min_denom = min_denom


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic rectangle: ``nx*ny`` points on ``[x0, x0+lx) x [y0, y0+ly)``."""

    nx: int
    ny: int
    lx: float
    ly: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4 or self.nx % 2 or self.ny % 2:
            raise GridConfigError(
                f"grid sizes must be even and >= 4, got {self.nx} x {self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise GridConfigError("domain edge lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> tuple:
        return (self.ny, self.nx)

    def coords(self):
        """Meshgrid arrays (X, Y), each of shape (ny, nx)."""
        x = self.x0 + self.hx * np.arange(self.nx)
        y = self.y0 + self.hy * np.arange(self.ny)
        return np.meshgrid(x, y)


class SpectralContext:
    """Transforms, symbols and inner products bound to one grid.

    Holds per-instance workspaces; do not share one context between threads
    running concurrently (fields themselves are plain arrays and can move
    freely).
    """

    def __init__(self, grid: PeriodicGrid):
        self.grid = grid
        nx, ny = grid.nx, grid.ny
        kx = 2.0 * np.pi * sfft.rfftfreq(nx, d=grid.hx)
        ky = 2.0 * np.pi * sfft.fftfreq(ny, d=grid.hy)
        self.kx = kx[None, :]
        self.ky = ky[:, None]
        self.k2 = self.kx**2 + self.ky**2
        # Parseval column weights for the half-spectrum
        w = np.full(nx // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self._pw = w[None, :]
        self._scale = grid.cell_area / (nx * ny)
        cut_x = np.abs(self.kx) <= (2.0 / 3.0) * np.abs(kx).max()
        cut_y = np.abs(self.ky) <= (2.0 / 3.0) * np.abs(ky).max()
        self._dealias_mask = (cut_x & cut_y).astype(float)

    # -- symbols ----------------------------------------------------------

    def laplacian_symbol(self) -> np.ndarray:
        return -self.k2

    def biharmonic_symbol(self) -> np.ndarray:
        return self.k2**2

    # -- transforms -------------------------------------------------------

    def _check(self, f):
        if f.shape != self.grid.shape:
            raise GridMismatchError(
                f"field shape {f.shape} does not match grid {self.grid.shape}")

    def transform(self, f: np.ndarray) -> np.ndarray:
        self._check(f)
        return sfft.rfft2(f)

    def inverse_transform(self, spec: np.ndarray) -> np.ndarray:
        return sfft.irfft2(spec, s=self.grid.shape)

    def apply_symbol(self, f: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        """Multiply the spectrum of ``f`` pointwise by ``sigma``."""
        return self.inverse_transform(sigma * self.transform(f))

    def dealias_filter(self, f: np.ndarray) -> np.ndarray:
        """Apply the 2/3-rule low-pass (opt-in at the model level)."""
        return self.inverse_transform(self._dealias_mask * self.transform(f))

    def solve_diagonal(self, rhs: np.ndarray, sigma: np.ndarray,
                       coeff: float) -> np.ndarray:
        """Solve ``(I - coeff * Op) u = rhs`` for a diagonal symbol ``Op``."""
        if coeff == 0.0:
            return rhs.copy()
        self._check(rhs)
        return self.inverse_transform(
            self.solve_diagonal_spectral(self.transform(rhs), sigma, coeff))

    def solve_diagonal_spectral(self, rhs_hat: np.ndarray, sigma: np.ndarray,
                                coeff: float) -> np.ndarray:
        if coeff == 0.0:
            return rhs_hat.copy()
        denom = 1.0 - coeff * sigma
        min_denom = float(np.min(np.abs(denom)))
        if min_denom < SINGULAR_TOL:
            raise SingularSolveError(coeff, min_denom)
        return rhs_hat / denom

    # -- physical-space reductions ----------------------------------------

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        self._check(f)
        self._check(g)
        return self.grid.cell_area * float(np.vdot(f, g).real)

    def norm_sq(self, f: np.ndarray) -> float:
        return self.inner(f, f)

    def integrate(self, f: np.ndarray) -> float:
        self._check(f)
        return self.grid.cell_area * float(f.sum())

    def mean(self, f: np.ndarray) -> float:
        return self.integrate(f) / (self.grid.lx * self.grid.ly)

    # -- spectral-space reductions ----------------------------------------

    def parseval_inner_hat(self, f_hat: np.ndarray, g_hat: np.ndarray) -> float:
        """The physical inner product evaluated from half-spectra."""
        return self._scale * float(
            np.sum(self._pw * (f_hat.real * g_hat.real + f_hat.imag * g_hat.imag)))

    def norm_sq_hat(self, f_hat: np.ndarray) -> float:
        return self._scale * float(
            np.sum(self._pw * (f_hat.real**2 + f_hat.imag**2)))

    def grad_norm_sq_hat(self, f_hat: np.ndarray) -> float:
        return self._scale * float(
            np.sum(self._pw * self.k2 * (f_hat.real**2 + f_hat.imag**2)))

    def grad_norm_sq(self, f: np.ndarray) -> float:
        """``\\int |grad f|^2`` via the spectral sum ``sum |k|^2 |f_hat|^2``."""
        return self.grad_norm_sq_hat(self.transform(f))
