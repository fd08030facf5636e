"""Brute-force dense-matrix reference for small grids.

Everything here is built from first principles: explicit DFT matrices,
dense operator matrices, direct linear solves and flat-vector quadrature.
No transforms, symbols or stage code from the library are reused, so
agreement with the library on a small grid is a genuine two-route check.
"""

import numpy as np


def dft_matrix(n):
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n)


class DenseOracle:
    """Dense assembly of one gradient-flow problem on an nx-by-ny grid."""

    def __init__(self, nx, ny, lx, ly, operator, epsilon, c0, f, fprime, k=1):
        self.nx, self.ny = nx, ny
        self.hx, self.hy = lx / nx, ly / ny
        self.h2 = self.hx * self.hy
        self.operator = operator
        self.eps2 = epsilon**2
        self.c0 = c0
        self.f = f
        self.fprime = fprime
        self.k = k
        self.n = nx * ny

        Wx = dft_matrix(nx)
        Wy = dft_matrix(ny)
        # flattened index = jy*nx + jx  (row-major field.ravel())
        self.F = np.kron(Wy, Wx)
        self.Finv = np.kron(Wy.conj(), Wx.conj()) / self.n
        kx = 2.0 * np.pi * np.fft.fftfreq(nx, d=self.hx)
        ky = 2.0 * np.pi * np.fft.fftfreq(ny, d=self.hy)
        k2 = (kx[None, :] ** 2 + ky[:, None] ** 2).ravel()
        self.k2 = k2
        self.lap = np.real(self.Finv @ np.diag(-k2) @ self.F)
        if operator == "allen-cahn":
            sigma = -self.eps2 * k2
        else:
            sigma = -self.eps2 * k2**2
        self.L_mat = np.real(self.Finv @ np.diag(sigma) @ self.F)
        self.eye = np.eye(self.n)

    # -- reductions ---------------------------------------------------------

    def inner(self, a, b):
        return self.h2 * float(a @ b)

    def grad_norm_sq(self, a):
        ahat = self.F @ a
        return self.h2 / self.n * float(np.sum(self.k2 * np.abs(ahat) ** 2))

    def bulk_energy(self, u):
        return sum(self.h2 * float(np.sum(self.f(ul))) for ul in u)

    def modified_energy(self, u, r):
        grad = sum(self.grad_norm_sq(ul) for ul in u)
        return 0.5 * self.eps2 * grad + r * r - self.c0

    # -- right-hand sides ---------------------------------------------------

    def denom(self, u):
        return np.sqrt(self.bulk_energy(u) + self.c0)

    def nonlinear(self, u, r):
        q = r / self.denom(u)
        out = []
        for ul in u:
            fp = self.fprime(ul)
            if self.operator == "allen-cahn":
                out.append(-q * fp)
            else:
                out.append(self.lap @ (q * fp))
        return out

    def ntilde(self, u, r, Lu, Nu):
        den = self.denom(u)
        total = 0.0
        for ul, lv, nv in zip(u, Lu, Nu):
            total += self.inner(self.fprime(ul), lv + nv)
        return total / (2.0 * den)

    # -- one full relaxed step ---------------------------------------------

    def one_step(self, u, r, tau, A, b, Abar, bbar, mode="rt"):
        """Stages, relaxation coefficient and update, all dense.

        ``u`` is a list of flat vectors.  Returns a dict with the stage
        fields, gamma and the updated (u, r).
        """
        s = len(b)
        U, Lv, Nv = [], [], []
        R = np.empty(s)
        Nt = np.empty(s)
        for i in range(s):
            rhs = [ul.copy() for ul in u]
            for l in range(self.k):
                for j in range(i):
                    rhs[l] += tau * A[i, j] * Lv[j][l] + tau * Abar[i, j] * Nv[j][l]
            if A[i, i] == 0.0:
                Ui = rhs
            else:
                mat = self.eye - tau * A[i, i] * self.L_mat
                Ui = [np.linalg.solve(mat, rl) for rl in rhs]
            R[i] = r + tau * sum(Abar[i, j] * Nt[j] for j in range(i))
            Li = [self.L_mat @ ul for ul in Ui]
            Ni = self.nonlinear(Ui, R[i])
            Nt[i] = self.ntilde(Ui, R[i], Li, Ni)
            U.append(Ui)
            Lv.append(Li)
            Nv.append(Ni)

        P = [sum(b[i] * Lv[i][l] + bbar[i] * Nv[i][l] for i in range(s))
             for l in range(self.k)]
        Pt = float(np.dot(bbar, Nt))
        D = 0.5 * self.eps2 * sum(self.grad_norm_sq(pl) for pl in P) + Pt**2

        if mode == "standard":
            gamma = 1.0
        else:
            num = 0.0
            for i in range(s):
                for l in range(self.k):
                    w = self.lap @ (b[i] * Lv[i][l] + bbar[i] * Nv[i][l])
                    num += self.eps2 * self.inner(u[l] - U[i][l], w)
                num -= 2.0 * (r - R[i]) * bbar[i] * Nt[i]
            gamma = num / (tau * D)

        u1 = [ul + gamma * tau * pl for ul, pl in zip(u, P)]
        r1 = r + gamma * tau * Pt
        return {"stages": U, "gamma": gamma, "u1": u1, "r1": r1,
                "denominator": D}
