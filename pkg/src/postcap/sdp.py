"""Dense solvers for small linear matrix inequality programs.

Both solve ``min c.x`` subject to ``F_i(x) = F_i0 + sum_j x_j F_ij >= 0`` for a
handful of Hermitian blocks and return multipliers ``Z_i >= 0`` normalised so
that ``c_j = sum_i Tr[Z_i F_ij]`` at optimality.

``solve_lmi_cvxopt`` embeds the Hermitian blocks as real symmetric ones and
calls the primal-dual solver of cvxopt. ``solve_lmi`` is a self-contained
log-det barrier method; it needs a strictly feasible start and its multipliers
``F_i^{-1} / tau`` lose accuracy once ``tau`` nears ``1/eps``, so it serves as
the fallback.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SolverFailure

try:
    import cvxopt
    from cvxopt import solvers as _cvx_solvers
except ImportError:  # pragma: no cover
    cvxopt = None


@dataclass
class LMIBlock:
    F0: np.ndarray  # (n, n)
    F: np.ndarray   # (m, n, n)

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.F0 + np.tensordot(x, self.F, axes=1)


@dataclass
class LMISolution:
    x: np.ndarray
    Z: list
    tau: float
    newton_steps: int


def _chol(m: np.ndarray):
    try:
        return np.linalg.cholesky(0.5 * (m + m.conj().T))
    except np.linalg.LinAlgError:
        return None


def _barrier(blocks: Sequence[LMIBlock], x: np.ndarray):
    val = 0.0
    chols = []
    for b in blocks:
        l = _chol(b.value(x))
        if l is None:
            return None, None
        chols.append(l)
        val -= 2.0 * np.sum(np.log(np.abs(np.diag(l))))
    return val, chols


def solve_lmi(c: np.ndarray, blocks: Sequence[LMIBlock], x0: np.ndarray,
              gap_tol: float = 1e-9, mu: float = 15.0, tau0: float = 1.0,
              max_newton: int = 2000) -> LMISolution:
    """Barrier path following from a strictly feasible ``x0``.

    Stops once the duality-gap estimate ``(sum of block sizes) / tau`` is below
    ``gap_tol``. Raises :class:`SolverFailure` if ``x0`` is infeasible or
    Newton centring stalls.
    """
    c = np.asarray(c, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    nrows = sum(b.F0.shape[0] for b in blocks)
    f_bar, chols = _barrier(blocks, x)
    if f_bar is None:
        raise SolverFailure("starting point is not strictly feasible")
    tau = tau0
    steps = 0
    while True:
        # centre at the current tau
        for _ in range(100):
            steps += 1
            if steps > max_newton:
                raise SolverFailure("Newton iteration budget exhausted")
            g = tau * c.copy()
            h = np.zeros((len(x), len(x)))
            for b, l in zip(blocks, chols):
                # G_j = L^{-1} F_j L^{-H}
                li = np.linalg.inv(l)
                gj = li @ b.F @ li.conj().T
                g -= np.real(np.einsum("jaa->j", gj))
                flat = gj.reshape(len(x), -1)
                h += np.real(flat @ flat.conj().T)
            try:
                dx = -np.linalg.solve(h, g)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(h, g, rcond=None)[0]
            dec = float(-g @ dx)
            if not np.isfinite(dec):
                raise SolverFailure("non-finite Newton decrement")
            if dec < 1e-20:
                break
            step = 1.0
            if dec < 0.1:
                # quadratic region: full steps, only keep strict feasibility
                for _ in range(60):
                    fn, cn = _barrier(blocks, x + step * dx)
                    if fn is not None:
                        break
                    step *= 0.5
                else:
                    raise SolverFailure("Newton step leaves the feasible region")
            else:
                # backtracking on phi(x) = tau c.x + barrier(x)
                phi0 = tau * c @ x + f_bar
                for _ in range(60):
                    fn, cn = _barrier(blocks, x + step * dx)
                    if fn is not None and tau * c @ (x + step * dx) + fn <= phi0 - 0.25 * step * dec:
                        break
                    step *= 0.5
                else:
                    raise SolverFailure("line search failed to make progress")
            x, f_bar, chols = x + step * dx, fn, cn
            if dec < 1e-13:
                break
        else:
            if dec > 1e-8:
                raise SolverFailure("centring did not converge")
        if nrows / tau < gap_tol:
            break
        tau *= mu
    zs = []
    for b in blocks:
        f = b.value(x)
        z = np.linalg.inv(0.5 * (f + f.conj().T)) / tau
        zs.append(0.5 * (z + z.conj().T))
    return LMISolution(x, zs, tau, steps)


def _embed(m: np.ndarray) -> np.ndarray:
    """Real symmetric image of a Hermitian matrix; PSD iff the input is."""
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def _unembed(z: np.ndarray) -> np.ndarray:
    n = z.shape[0] // 2
    return 0.5 * (z[:n, :n] + z[n:, n:]) + 0.5j * (z[n:, :n] - z[:n, n:])


def solve_lmi_cvxopt(c: np.ndarray, blocks: Sequence[LMIBlock], tol: float = 1e-10,
                     max_iter: int = 200) -> LMISolution:
    if cvxopt is None:  # pragma: no cover
        raise SolverFailure("cvxopt is not available")
    c = np.asarray(c, dtype=float)
    gs, hs = [], []
    for b in blocks:
        gs.append(cvxopt.matrix(np.array([-_embed(f).reshape(-1, order="F") for f in b.F]).T))
        hs.append(cvxopt.matrix(_embed(b.F0)))
    opts = dict(show_progress=False, abstol=tol, reltol=tol, feastol=tol, maxiters=max_iter)
    try:
        sol = _cvx_solvers.sdp(cvxopt.matrix(c), Gs=gs, hs=hs, options=opts)
    except (ArithmeticError, ValueError) as exc:
        # cvxopt divides by vanishing scaling eigenvalues near the optimum
        raise SolverFailure(f"cvxopt failed: {exc}") from exc
    if sol["status"] != "optimal":
        raise SolverFailure(f"cvxopt returned status {sol['status']!r}")
    x = np.array(sol["x"]).ravel()
    zs = []
    for z in sol["zs"]:
        z = 2.0 * _unembed(np.array(z))
        zs.append(0.5 * (z + z.conj().T))
    return LMISolution(x, zs, np.inf, int(sol["iterations"]))


def hermitian_basis(k: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of ``k x k`` Hermitian matrices, shape ``(k*k, k, k)``."""
    out = []
    for i in range(k):
        e = np.zeros((k, k), dtype=complex)
        e[i, i] = 1.0
        out.append(e)
    s = 1.0 / np.sqrt(2.0)
    for i in range(k):
        for j in range(i + 1, k):
            e = np.zeros((k, k), dtype=complex)
            e[i, j] = e[j, i] = s
            out.append(e)
            e = np.zeros((k, k), dtype=complex)
            e[i, j] = -1j * s
            e[j, i] = 1j * s
            out.append(e)
    return np.array(out)


def hermitian_coords(m: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("jab,ba->j", basis, m))
