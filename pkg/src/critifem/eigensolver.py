"""Shift-invert Arnoldi eigensolver for the assembled pencil A x = lambda B x.

The operator iterated is x -> A^{-1}(B x) (shift 0): its dominant
eigenvalues mu are the reciprocals of the pencil eigenvalues of smallest
magnitude, which carry the physics (lambda = 1/k). Every application of
A^{-1} exploits the block lower triangular structure: solve the SPD fast
block, move the down-scattering term to the right-hand side, solve the
SPD thermal block. The adjoint pencil transposes A into block UPPER
triangular form, so the thermal block is solved first there.

Arnoldi itself is ARPACK's real nonsymmetric iteration (scipy
sparse.linalg.eigs) with a fixed start vector for reproducibility;
conjugate Ritz pairs come back as genuinely complex eigenvalues, which
the physical problems never produce but the solver must be able to
report. Systems too small for ARPACK fall back to a dense solve of the
composed operator.

Every returned eigenpair is certified by explicitly forming
||A x - lambda B x||_2 / ||B x||_2 on the sparse pencil; pairs that miss
10x the Arnoldi tolerance are rejected and the iteration is retried with
a larger subspace before giving up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SolverSettings",
    "EigenSolution",
    "SolverError",
    "solve_primal",
    "solve_adjoint",
    "residual",
]

# Free-block size above which the inner solves switch from Jacobi-CG to a
# sparse LU factorization. Measured on the disk studies: at ~9e3 scalar
# DOFs the factorization already beats CG at rtol 1e-12 by an order of
# magnitude per Arnoldi cycle, and CG's advantage never returns at the
# sizes this package targets (< ~6e5 DOFs).
_LU_SWITCH = 4000


class SolverError(RuntimeError):
    """Inner solve failure or Arnoldi stagnation."""


@dataclass(frozen=True)
class SolverSettings:
    """Eigensolver knobs.

    m: number of eigenpairs to return (ascending |lambda|).
    subspace: Arnoldi subspace dimension; default max(4m, 20).
    inner_tol: relative tolerance of the inner block solves (kept two
        orders tighter than the Arnoldi tolerance so the inexactness
        stays subdominant).
    tol: Arnoldi convergence tolerance; accepted pairs must certify a
        pencil residual below 10x this value.
    max_restarts: retries with a grown subspace before declaring
        stagnation.
    inner_solver: "auto", "cg" or "lu".
    """

    m: int = 5
    subspace: int | None = None
    inner_tol: float = 1e-12
    tol: float = 1e-10
    max_restarts: int = 6
    inner_solver: str = "auto"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.subspace is not None and self.subspace <= self.m:
            raise ValueError("subspace must exceed m")
        if self.inner_tol <= 0 or self.tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.inner_solver not in ("auto", "cg", "lu"):
            raise ValueError("inner_solver must be auto, cg or lu")

    @property
    def effective_subspace(self):
        return self.subspace if self.subspace is not None else max(4 * self.m, 20)


@dataclass(frozen=True)
class EigenSolution:
    """One certified eigenpair of the pencil.

    lam is the eigenvalue (lambda = 1/k, complex in general); phi1/phi2
    are the fast/thermal coefficient vectors over the raw scalar DOFs
    with zeros at Dirichlet-constrained entries, mass-normalized with the
    first significant component rotated to the positive real axis.
    residual is ||A x - lam B x||_2 / ||B x||_2 on the reduced pencil.
    """

    lam: complex
    phi1: np.ndarray
    phi2: np.ndarray
    residual: float
    adjoint: bool = False

    @property
    def k_eff(self):
        """1/Re(lambda) when the eigenvalue is real to 1e-8, else nan."""
        if abs(self.lam.imag) <= 1e-8 * abs(self.lam):
            return 1.0 / self.lam.real
        return math.nan


class _BlockSolver:
    """Triangular block solves for A or A^T with CG or LU inner solves."""

    def __init__(self, system, settings, adjoint):
        self.system = system
        self.adjoint = adjoint
        self.inner_tol = settings.inner_tol
        mode = settings.inner_solver
        if mode == "auto":
            mode = "cg" if system.n <= _LU_SWITCH else "lu"
        self.mode = mode
        a11, a22 = system.a11, system.a22
        if mode == "lu":
            self._lu11 = spla.splu(a11.tocsc())
            self._lu22 = spla.splu(a22.tocsc())
        else:
            self._a11, self._a22 = a11, a22
            d1, d2 = a11.diagonal(), a22.diagonal()
            if np.any(d1 <= 0) or np.any(d2 <= 0):
                raise SolverError("diagonal block has a nonpositive diagonal entry")
            self._prec1 = sp.diags(1.0 / d1).tocsr()
            self._prec2 = sp.diags(1.0 / d2).tocsr()

    def _solve_spd(self, which, b):
        if self.mode == "lu":
            lu = self._lu11 if which == 1 else self._lu22
            return lu.solve(b)
        mat = self._a11 if which == 1 else self._a22
        prec = self._prec1 if which == 1 else self._prec2
        if not np.any(b):
            return np.zeros_like(b)
        x, info = spla.cg(mat, b, rtol=self.inner_tol, atol=0.0, M=prec,
                          maxiter=20 * mat.shape[0] + 200)
        if info != 0:
            raise SolverError(
                f"inner CG failed on block {which} (info={info}): "
                "the block is indefinite or extremely ill conditioned, "
                "which signals an invalid parameter deck"
            )
        return x

    def apply_inverse(self, y):
        """x = A^{-1} y (or A^{-T} y in adjoint mode) via the triangle."""
        n = self.system.n
        y1, y2 = y[:n], y[n:]
        cpl = self.system.coupling
        if not self.adjoint:
            x1 = self._solve_spd(1, y1)
            x2 = self._solve_spd(2, y2 + cpl @ x1)
        else:
            x2 = self._solve_spd(2, y2)
            x1 = self._solve_spd(1, y1 + cpl.T @ x2)
        return np.concatenate([x1, x2])


def _mass_norm(system, x):
    n = system.n
    m = system.mass
    x1, x2 = x[:n], x[n:]
    val = (np.vdot(x1, m @ x1) + np.vdot(x2, m @ x2)).real
    return math.sqrt(max(val, 0.0))


def _normalize(system, x):
    nrm = _mass_norm(system, x)
    if nrm == 0:
        raise SolverError("eigenvector has zero mass norm")
    x = x / nrm
    # rotate the first significant component onto the positive real axis
    mags = np.abs(x)
    idx = int(np.argmax(mags > 1e-8 * mags.max()))
    pivot = x[idx]
    x = x * (pivot.conjugate() / abs(pivot))
    if np.abs(x.imag).max() <= 1e-12 * max(np.abs(x.real).max(), 1e-300):
        x = x.real.copy()
    return x


def _pencil_residual(system, lam, x):
    r = system.A @ x - lam * (system.B @ x)
    denom = np.linalg.norm(system.B @ x)
    if denom == 0:
        return math.inf
    return float(np.linalg.norm(r) / denom)


def residual(system, solution):
    """Recertify a solution: ||A x - lam B x||_2 / ||B x||_2.

    Adjoint solutions are checked against the transposed pencil they
    solve.
    """
    x = np.concatenate(
        [system.restrict(solution.phi1), system.restrict(solution.phi2)]
    )
    A = system.A.T if solution.adjoint else system.A
    B = system.B.T if solution.adjoint else system.B
    r = A @ x - solution.lam * (B @ x)
    denom = np.linalg.norm(B @ x)
    if denom == 0:
        return math.inf
    return float(np.linalg.norm(r) / denom)


def _dense_pairs(system, solver, want):
    nn = 2 * system.n
    C = np.empty((nn, nn))
    Bd = (system.B.T if solver.adjoint else system.B).toarray()
    for j in range(nn):
        C[:, j] = solver.apply_inverse(Bd[:, j])
    mu, vecs = np.linalg.eig(C)
    return mu, vecs


def _arpack_pairs(system, solver, want, ncv, tol):
    nn = 2 * system.n
    op = spla.LinearOperator(
        (nn, nn),
        matvec=lambda x: solver.apply_inverse(
            (system.B.T if solver.adjoint else system.B) @ x
        ),
        dtype=np.float64,
    )
    v0 = np.cos(0.7 * np.arange(nn) + 0.3)  # fixed, generic start vector
    ncv_eff = min(nn, max(ncv, 2 * want + 1))
    mu, vecs = spla.eigs(
        op, k=want, which="LM", v0=v0, ncv=ncv_eff, tol=tol, maxiter=8000
    )
    return mu, vecs


def _solve(system, settings, adjoint):
    if system.B.nnz == 0 or abs(system.B).max() == 0:
        return []  # the pencil has no finite eigenvalues
    solver = _BlockSolver(system, settings, adjoint)
    nn = 2 * system.n
    m = settings.m
    ncv = settings.effective_subspace
    tol = settings.tol
    accept = 10.0 * tol

    A_op = system.A.T.tocsr() if adjoint else system.A
    B_op = system.B.T.tocsr() if adjoint else system.B

    def certify(mu, vecs):
        sols = []
        for i in range(len(mu)):
            if mu[i] == 0:
                continue
            lam = 1.0 / mu[i]
            x = vecs[:, i]
            r = A_op @ x - lam * (B_op @ x)
            denom = np.linalg.norm(B_op @ x)
            if denom == 0:
                continue
            res = float(np.linalg.norm(r) / denom)
            if res <= accept:
                sols.append((complex(lam), x, res))
        return sols

    last_error = None
    for attempt in range(settings.max_restarts + 1):
        want = min(m + 3 + attempt, nn - 2) if nn > 4 else m
        use_dense = nn < 80 or want < 1 or want >= nn - 1 or ncv >= nn
        try:
            if use_dense:
                mu, vecs = _dense_pairs(system, solver, want)
            else:
                mu, vecs = _arpack_pairs(system, solver, want, ncv, tol)
        except spla.ArpackNoConvergence as exc:
            last_error = exc
            ncv = min(2 * ncv, nn)
            continue
        sols = certify(mu, vecs)
        if len(sols) >= m or use_dense:
            sols.sort(key=lambda s: (abs(s[0]), s[0].imag))
            out = []
            for lam, x, res in sols[:m]:
                x = _normalize(system, x)
                n = system.n
                phi1 = system.extend(x[:n])
                phi2 = system.extend(x[n:])
                phi1.flags.writeable = False
                phi2.flags.writeable = False
                out.append(
                    EigenSolution(
                        lam=lam,
                        phi1=phi1,
                        phi2=phi2,
                        residual=res,
                        adjoint=adjoint,
                    )
                )
            return out
        ncv = min(2 * ncv, nn)
    raise SolverError(
        f"Arnoldi stagnation: {settings.max_restarts} restarts exhausted "
        f"without {m} certified eigenpairs"
        + (f" (last ARPACK error: {last_error})" if last_error else "")
    )


def solve_primal(system, settings=SolverSettings()):
    """First m eigenpairs of A x = lambda B x, ascending |lambda|."""
    return _solve(system, settings, adjoint=False)


def solve_adjoint(system, settings=SolverSettings()):
    """First m eigenpairs of the transposed pencil (left eigenvectors)."""
    return _solve(system, settings, adjoint=True)
