"""Double Butcher tableaux for diagonally implicit-explicit Runge-Kutta methods.

A method is described by an implicit tableau (A, b, c) with lower-triangular A
(nonzero diagonal allowed) and an explicit tableau (Abar, bbar, cbar) with
strictly lower-triangular Abar.  The module provides the builtin coefficient
sets used by the experiment harness, structural/order-2 validation, the
quadratic-form dissipation matrices of the combined method, and a plain-text
loader for user-supplied coefficient files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

RESIDUAL_TOL = 1e-12


class TableauError(Exception):
    """Base class for tableau problems."""


class TableauLookupError(TableauError, KeyError):
    """Requested builtin tableau does not exist."""

    def __init__(self, name):
        available = ", ".join(sorted(BUILTIN_TABLEAUX))
        super().__init__(f"unknown tableau {name!r}; available: {available}")
        self.name = name


class TableauStructureError(TableauError, ValueError):
    """Dimensions or triangular structure of a tableau are inconsistent."""


class TableauFormatError(TableauError, ValueError):
    """A tableau file could not be parsed."""


@dataclass(frozen=True, eq=False)
class DoubleButcherTableau:
    """Coefficient pair defining one diagonally IMEX RK method.

    Attributes
    ----------
    name : str
        Identifier of the method.
    p : int
        Designed order of the underlying method (metadata; used by the
        harness for expected convergence slopes).
    A, b, c : ndarray
        Implicit coefficients: lower-triangular ``A`` (s, s), weights ``b``
        (s,), abscissae ``c`` (s,).
    Abar, bbar, cbar : ndarray
        Explicit coefficients: strictly lower-triangular ``Abar`` plus
        weights and abscissae.
    """

    name: str
    p: int
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    Abar: np.ndarray
    bbar: np.ndarray
    cbar: np.ndarray

    def __post_init__(self):
        for attr in ("A", "b", "c", "Abar", "bbar", "cbar"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=float))
        s = self.b.shape[0]
        if self.p < 2:
            raise TableauStructureError(f"designed order must be >= 2, got {self.p}")
        if s < 1:
            raise TableauStructureError("tableau needs at least one stage")
        for attr in ("A", "Abar"):
            m = getattr(self, attr)
            if m.shape != (s, s):
                raise TableauStructureError(
                    f"{attr} has shape {m.shape}, expected {(s, s)}"
                )
        for attr in ("b", "c", "bbar", "cbar"):
            v = getattr(self, attr)
            if v.shape != (s,):
                raise TableauStructureError(
                    f"{attr} has shape {v.shape}, expected {(s,)}"
                )
        if np.any(np.triu(self.A, k=1) != 0.0):
            raise TableauStructureError("implicit A must be lower triangular")
        if np.any(np.triu(self.Abar, k=0) != 0.0):
            raise TableauStructureError("explicit Abar must be strictly lower triangular")
        if not all(np.all(np.isfinite(getattr(self, a))) for a in
                   ("A", "b", "c", "Abar", "bbar", "cbar")):
            raise TableauStructureError("tableau entries must be finite")

    @property
    def s(self) -> int:
        """Stage count."""
        return self.b.shape[0]

    @property
    def weights_nonnegative(self) -> bool:
        """True when all b and bbar entries are >= 0 (energy-decay hypothesis)."""
        return bool(np.all(self.b >= 0.0) and np.all(self.bbar >= 0.0))


@dataclass(frozen=True)
class ValidationReport:
    """Residuals and flags from checking a double tableau.

    ``passed`` requires every residual (row sums, weight sums, b vs bbar
    mismatch, the eight order-2 sums) to be at most ``RESIDUAL_TOL``.
    Negative weights are reported via ``min_weight`` but do not gate
    ``passed``; they void the energy-decay hypothesis, which the integrator
    checks separately.
    """

    name: str
    row_sum_implicit: float
    row_sum_explicit: float
    weight_sum_implicit: float
    weight_sum_explicit: float
    weight_mismatch: float
    min_weight: float
    order2_residuals: dict = field(default_factory=dict)

    @property
    def has_negative_weights(self) -> bool:
        return self.min_weight < 0.0

    @property
    def max_order2_residual(self) -> float:
        return max(self.order2_residuals.values())

    @property
    def passed(self) -> bool:
        residuals = (
            self.row_sum_implicit,
            self.row_sum_explicit,
            self.weight_sum_implicit,
            self.weight_sum_explicit,
            self.weight_mismatch,
            self.max_order2_residual,
        )
        return all(r <= RESIDUAL_TOL for r in residuals)

    def summary(self) -> str:
        lines = [
            f"tableau {self.name}: {'pass' if self.passed else 'FAIL'}",
            f"  row-sum residual      implicit {self.row_sum_implicit:.3e}"
            f"  explicit {self.row_sum_explicit:.3e}",
            f"  weight-sum residual   implicit {self.weight_sum_implicit:.3e}"
            f"  explicit {self.weight_sum_explicit:.3e}",
            f"  b vs bbar mismatch    {self.weight_mismatch:.3e}",
            f"  min weight            {self.min_weight:+.6e}"
            + ("  (negative: energy-decay hypothesis not met)"
               if self.has_negative_weights else ""),
        ]
        for key, val in self.order2_residuals.items():
            lines.append(f"  order-2 sum {key:<12} residual {val:.3e}")
        return "\n".join(lines)


@dataclass(frozen=True)
class DissipationMatrices:
    """Quadratic-form matrices governing the non-dissipative energy remainder.

    ``M`` is the symmetric 2s x 2s matrix acting on the stacked stage slopes
    (linear slopes first, then nonlinear ones); ``Stilde`` is the s x s
    analogue for the auxiliary-variable slopes.  Both would vanish for a
    symplectic pair; for IMEX pairs they generally do not, which is why a
    relaxation coefficient is needed.  The smallest eigenvalues of the
    symmetric parts are reported as diagnostics.
    """

    M: np.ndarray
    Stilde: np.ndarray
    B: np.ndarray
    Bbar: np.ndarray
    min_eig_M: float
    min_eig_Stilde: float


def _second_order_sums(t: DoubleButcherTableau) -> dict:
    """The eight weighted coefficient sums that equal 1/2 for order >= 2."""
    A, Ab, b, bb = t.A, t.Abar, t.b, t.bbar
    sums = {
        "A.b": float(np.sum(b[:, None] * A)),
        "Abar.b": float(np.sum(b[:, None] * Ab)),
        "A.bbar": float(np.sum(bb[:, None] * A)),
        "Abar.bbar": float(np.sum(bb[:, None] * Ab)),
        "(b-A).b": float(np.sum(b[:, None] * (b[None, :] - A))),
        "(bbar-Abar).b": float(np.sum(b[:, None] * (bb[None, :] - Ab))),
        "(b-A).bbar": float(np.sum(bb[:, None] * (b[None, :] - A))),
        "(bbar-Abar).bbar": float(np.sum(bb[:, None] * (bb[None, :] - Ab))),
    }
    return sums


def validate(t: DoubleButcherTableau) -> ValidationReport:
    """Check row sums, weight sums, weight equality and order-2 conditions.

    Returns a report of residuals; see :class:`ValidationReport` for the
    pass criterion.  Structural problems (shapes, triangularity) raise
    :class:`TableauStructureError` at construction, not here.
    """
    row_impl = float(np.max(np.abs(t.A.sum(axis=1) - t.c)))
    row_expl = float(np.max(np.abs(t.Abar.sum(axis=1) - t.cbar)))
    wsum_impl = abs(float(t.b.sum()) - 1.0)
    wsum_expl = abs(float(t.bbar.sum()) - 1.0)
    mismatch = float(np.max(np.abs(t.b - t.bbar)))
    min_weight = float(min(t.b.min(), t.bbar.min()))
    order2 = {k: abs(v - 0.5) for k, v in _second_order_sums(t).items()}
    return ValidationReport(
        name=t.name,
        row_sum_implicit=row_impl,
        row_sum_explicit=row_expl,
        weight_sum_implicit=wsum_impl,
        weight_sum_explicit=wsum_expl,
        weight_mismatch=mismatch,
        min_weight=min_weight,
        order2_residuals=order2,
    )


def dissipation_matrices(t: DoubleButcherTableau) -> DissipationMatrices:
    """Assemble the stage-slope quadratic forms of the combined method.

    M = [[BA + A^T B,  A^T Bbar + B Abar ],      [[b b^T,    b bbar^T   ],
         [Bbar A + Abar^T B, Bbar Abar + Abar^T Bbar]]  -  [bbar b^T, bbar bbar^T]]

    Stilde = Bbar Abar + Abar^T Bbar - bbar bbar^T.
    """
    A, Ab = t.A, t.Abar
    b = t.b.reshape(-1, 1)
    bb = t.bbar.reshape(-1, 1)
    B = np.diag(t.b)
    Bbar = np.diag(t.bbar)
    top = np.hstack([B @ A + A.T @ B, A.T @ Bbar + B @ Ab])
    bot = np.hstack([Bbar @ A + Ab.T @ B, Bbar @ Ab + Ab.T @ Bbar])
    M = np.vstack([top, bot]) - np.block([[b @ b.T, b @ bb.T], [bb @ b.T, bb @ bb.T]])
    Stilde = Bbar @ Ab + Ab.T @ Bbar - bb @ bb.T
    min_eig_M = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
    min_eig_S = float(np.linalg.eigvalsh(0.5 * (Stilde + Stilde.T)).min())
    return DissipationMatrices(
        M=M, Stilde=Stilde, B=B, Bbar=Bbar,
        min_eig_M=min_eig_M, min_eig_Stilde=min_eig_S,
    )


# --------------------------------------------------------------------------
# builtin coefficient sets
# --------------------------------------------------------------------------

def _F(p, q=1):
    return Fraction(p, q)


def _to_float(rows):
    return np.array([[float(x) for x in row] for row in rows], dtype=float)


def _three_two():
    # implicit diagonal 1 - sqrt(2)/2; shared weights (1/6, 1/6, 2/3)
    g = 1.0 - math.sqrt(2.0) / 2.0
    s2 = math.sqrt(2.0)
    A = [[g, 0.0, 0.0],
         [s2 - 1.0, g, 0.0],
         [s2 / 2.0 - 0.5, 0.0, g]]
    c = [g, s2 / 2.0, 0.5]
    Abar = [[0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.25, 0.25, 0.0]]
    cbar = [0.0, 1.0, 0.5]
    w = [_F(1, 6), _F(1, 6), _F(2, 3)]
    return DoubleButcherTableau(
        name="imex-rrk-3-2", p=2,
        A=_to_float(A), b=[float(x) for x in w], c=c,
        Abar=_to_float(Abar), bbar=[float(x) for x in w], cbar=cbar,
    )


def _four_three():
    alpha = 0.24169426078821
    beta = 0.06042356519705
    eta = 0.12915286960590
    A = [[alpha, 0.0, 0.0, 0.0],
         [-alpha, alpha, 0.0, 0.0],
         [0.0, 1.0 - alpha, alpha, 0.0],
         [beta, eta, 0.5 - alpha - beta - eta, alpha]]
    c = [alpha, 0.0, 1.0, 0.5]
    Abar = [[0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.25, 0.25, 0.0]]
    cbar = [0.0, 0.0, 1.0, 0.5]
    w = [0.0, float(_F(1, 6)), float(_F(1, 6)), float(_F(2, 3))]
    return DoubleButcherTableau(
        name="imex-rrk-4-3", p=3,
        A=_to_float(A), b=w, c=c,
        Abar=_to_float(Abar), bbar=w, cbar=cbar,
    )


def _six_four():
    # Rational entries are kept exact until this single float conversion.
    A = [
        [0, 0, 0, 0, 0, 0],
        [_F(1, 4), _F(1, 4), 0, 0, 0, 0],
        [_F(8611, 62500), _F(-1743, 31250), _F(1, 4), 0, 0, 0],
        [_F(5012029, 34652500), _F(-654441, 2922500), _F(174375, 388108),
         _F(1, 4), 0, 0],
        [_F(15267082809, 155376265600), _F(-71443401, 120774400),
         _F(730878875, 902184768), _F(2285395, 8070912), _F(1, 4), 0],
        [_F(82889, 524892), 0, _F(15625, 83664), _F(69875, 102672),
         _F(-2260, 8211), _F(1, 4)],
    ]
    c = [0, _F(1, 2), _F(83, 250), _F(31, 50), _F(17, 20), 1]
    Abar = [
        [0, 0, 0, 0, 0, 0],
        [_F(1, 2), 0, 0, 0, 0, 0],
        [_F(13861, 62500), _F(6889, 62500), 0, 0, 0, 0],
        [_F(-116923316275, 2393684061468), _F(-2731218467317, 15368042101831),
         _F(9408046702089, 11113171139209), 0, 0, 0],
        [_F(-451086348788, 2902428689909), _F(-2682348792572, 7519795681897),
         _F(12662868775082, 11960479115383), _F(3355817975965, 11060851509271),
         0, 0],
        [_F(647845179188, 3216320057751), _F(73281519250, 8382639484533),
         _F(552539513391, 3454668386233), _F(3354512671639, 8306763924573),
         _F(4040, 17871), 0],
    ]
    w = [_F(82889, 524892), 0, _F(15625, 83664), _F(69875, 102672),
         _F(-2260, 8211), _F(1, 4)]
    return DoubleButcherTableau(
        name="imex-rrk-6-4", p=4,
        A=_to_float(A), b=[float(x) for x in w], c=[float(x) for x in c],
        Abar=_to_float(Abar), bbar=[float(x) for x in w],
        cbar=[float(x) for x in c],
    )


BUILTIN_TABLEAUX = {
    "imex-rrk-3-2": _three_two,
    "imex-rrk-4-3": _four_three,
    "imex-rrk-6-4": _six_four,
}


def builtin_tableau(name: str) -> DoubleButcherTableau:
    """Return one of the builtin IMEX pairs by name.

    Available names: ``imex-rrk-3-2``, ``imex-rrk-4-3``, ``imex-rrk-6-4``.
    """
    try:
        factory = BUILTIN_TABLEAUX[name]
    except KeyError:
        raise TableauLookupError(name) from None
    return factory()


# --------------------------------------------------------------------------
# plain-text tableau files
# --------------------------------------------------------------------------

_BLOCK_KEYS = ("implicit-A", "implicit-b", "implicit-c",
               "explicit-A", "explicit-b", "explicit-c")


def _parse_entry(token: str, path, lineno: int) -> float:
    # decimal or p/q rational
    if "/" in token:
        num, _, den = token.partition("/")
        try:
            return float(Fraction(int(num), int(den)))
        except (ValueError, ZeroDivisionError):
            raise TableauFormatError(
                f"{path}:{lineno}: bad rational entry {token!r}") from None
    try:
        return float(token)
    except ValueError:
        raise TableauFormatError(
            f"{path}:{lineno}: bad numeric entry {token!r}") from None


def load_tableau(path) -> DoubleButcherTableau:
    """Parse a tableau from a structured text file.

    The file holds ``name`` and ``order`` assignments plus numeric blocks
    introduced by a keyword line (``implicit-A``, ``implicit-b``,
    ``implicit-c``, ``explicit-A``, ``explicit-b``, ``explicit-c``); a block
    ends at the next keyword.  Entries are decimals or ``p/q`` rationals,
    whitespace separated.  The ``c`` blocks are optional and default to the
    row sums of the corresponding ``A``.  Lines starting with ``#`` are
    comments.
    """
    path = Path(path)
    name = None
    order = None
    blocks: dict[str, list[list[float]]] = {}
    current = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head == "name":
            name = rest.strip()
            if not name:
                raise TableauFormatError(f"{path}:{lineno}: empty name")
            current = None
        elif head == "order":
            try:
                order = int(rest)
            except ValueError:
                raise TableauFormatError(
                    f"{path}:{lineno}: order must be an integer") from None
            current = None
        elif line in _BLOCK_KEYS:
            if line in blocks:
                raise TableauFormatError(f"{path}:{lineno}: duplicate block {line!r}")
            blocks[line] = []
            current = line
        elif current is not None:
            blocks[current].append(
                [_parse_entry(tok, path, lineno) for tok in line.split()])
        else:
            raise TableauFormatError(f"{path}:{lineno}: unexpected line {raw!r}")

    if name is None:
        raise TableauFormatError(f"{path}: missing 'name'")
    if order is None:
        raise TableauFormatError(f"{path}: missing 'order'")
    for key in ("implicit-A", "implicit-b", "explicit-A", "explicit-b"):
        if key not in blocks:
            raise TableauFormatError(f"{path}: missing block {key!r}")

    def matrix(key):
        rows = blocks[key]
        s = len(rows)
        if any(len(r) != s for r in rows):
            raise TableauFormatError(f"{path}: block {key!r} is not square")
        return np.array(rows, dtype=float)

    def vector(key, s):
        rows = blocks.get(key)
        if rows is None:
            return None
        flat = [x for row in rows for x in row]
        if len(flat) != s:
            raise TableauFormatError(
                f"{path}: block {key!r} has {len(flat)} entries, expected {s}")
        return np.array(flat, dtype=float)

    A = matrix("implicit-A")
    Abar = matrix("explicit-A")
    s = A.shape[0]
    if Abar.shape[0] != s:
        raise TableauFormatError(
            f"{path}: implicit ({s} stages) and explicit ({Abar.shape[0]} stages)"
            " blocks disagree")
    b = vector("implicit-b", s)
    bbar = vector("explicit-b", s)
    c = vector("implicit-c", s)
    cbar = vector("explicit-c", s)
    if c is None:
        c = A.sum(axis=1)
    if cbar is None:
        cbar = Abar.sum(axis=1)
    try:
        return DoubleButcherTableau(name=name, p=order, A=A, b=b, c=c,
                                    Abar=Abar, bbar=bbar, cbar=cbar)
    except TableauStructureError as exc:
        raise TableauFormatError(f"{path}: {exc}") from exc
