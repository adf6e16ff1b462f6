"""Mesh-refinement studies of the criticality eigenvalues.

A study solves the same two-group problem on a sequence of uniformly
refined meshes, tracks each eigenvalue by its position in the sorted
spectrum, and fits the model

    lambda_h = lambda_star + scale * h**rate

to every tracked index by profiled least squares.  The extrapolated
lambda_star is usually one to two orders more accurate than the finest
single mesh, and the fitted rate exposes where the solution regularity
(re-entrant corners, material interfaces) caps the order below the
2k the element degree would otherwise deliver.

For the homogeneous constant-coefficient deck with a Dirichlet boundary
the exact eigenvalues are available in closed form through the Laplacian
modes of the domain; `analytic_eigenvalue` maps a Laplacian eigenvalue
to the corresponding criticality eigenvalue and serves as the reference
the studies converge against.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import jn_zeros

from .assembly import assemble
from .eigensolver import SolverSettings, solve_primal
from .fem_space import build_dofmap
from .materials import builtin_deck
from .mesh import (
    generate_disk,
    generate_lshape,
    generate_unit_cube,
    generate_unit_square,
    mesh_size,
)

__all__ = [
    "RateFit",
    "fit_rate",
    "analytic_eigenvalue",
    "thermal_ratio",
    "laplacian_modes",
    "reference_eigenvalues",
    "ConvergenceStudy",
    "run_study",
    "write_csv",
    "format_table",
    "DOMAINS",
]


# ---------------------------------------------------------------------------
# closed-form references

def analytic_eigenvalue(mu, gc):
    """Criticality eigenvalue of the homogeneous Dirichlet problem whose
    spatial shape is a Laplacian mode with -lap w = mu w.

    Substituting phi_g = c_g w separates the system into a 2x2 pencil in
    (c1, c2); eliminating c2 through the thermal balance gives

        lambda = (D1 mu + sa1 + s12) / (nsf1 + nsf2 * s12 / (D2 mu + sa2))

    Every Laplacian mode yields one criticality eigenvalue this way, and
    since lambda is increasing in mu the orderings agree.
    """
    mu = float(mu)
    removal = gc.D1 * mu + gc.sigma_a1 + gc.sigma_12
    fission = gc.nu_sigma_f1 + gc.nu_sigma_f2 * thermal_ratio(mu, gc)
    return removal / fission


def thermal_ratio(mu, gc):
    """c2/c1 of the separable mode: sigma_12 / (D2 mu + sigma_a2)."""
    return gc.sigma_12 / (gc.D2 * float(mu) + gc.sigma_a2)


# First five Dirichlet-Laplacian eigenvalues of the L-shaped domain with
# legs of unit length and a re-entrant corner, known to ~13 digits from
# boundary-collocation computations (no closed form exists except the
# third, which is exactly 2 pi^2).  Our L-shape has legs of length 1/2,
# which scales every eigenvalue by 4.
_LSHAPE_UNIT_LEG = (
    9.6397238440219,
    15.197251926573,
    2.0 * math.pi**2,
    29.521481114146,
    31.912635957137,
)


def laplacian_modes(domain, count):
    """First `count` Dirichlet-Laplacian eigenvalues of the domain, sorted
    ascending with multiplicity.

    square: pi^2 (m^2 + n^2);  cube: pi^2 (l^2 + m^2 + n^2);
    disk (unit radius): squared Bessel zeros j_{n,k}^2, double for n >= 1;
    lshape: tabulated (only the first five are available).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if domain == "square":
        r = int(math.isqrt(2 * count)) + 2
        vals = [
            math.pi**2 * (m * m + n * n)
            for m in range(1, r + 1)
            for n in range(1, r + 1)
        ]
    elif domain == "cube":
        r = int(round((3 * count) ** (1 / 3))) + 2
        vals = [
            math.pi**2 * (l * l + m * m + n * n)
            for l in range(1, r + 1)
            for m in range(1, r + 1)
            for n in range(1, r + 1)
        ]
    elif domain == "disk":
        vals = []
        for n in range(count + 1):
            mult = 1 if n == 0 else 2
            vals.extend(
                float(z) ** 2 for z in jn_zeros(n, count) for _ in range(mult)
            )
    elif domain == "lshape":
        if count > len(_LSHAPE_UNIT_LEG):
            raise ValueError(
                f"only the first {len(_LSHAPE_UNIT_LEG)} L-shape modes are known"
            )
        vals = [4.0 * v for v in _LSHAPE_UNIT_LEG]
    else:
        raise ValueError(f"unknown domain {domain!r}; choose from {DOMAINS}")
    return sorted(vals)[:count]


def reference_eigenvalues(domain, count, gc):
    """First `count` exact criticality eigenvalues on the domain for a
    homogeneous deck `gc` with a Dirichlet boundary."""
    return [analytic_eigenvalue(mu, gc) for mu in laplacian_modes(domain, count)]


# ---------------------------------------------------------------------------
# rate fitting

class RateFit(NamedTuple):
    """Fit of lambda_h = extrapolated + scale * h**rate.

    rms is the root-mean-square misfit over the data points; a value
    comparable to the spread of the data means the model does not hold
    (pre-asymptotic meshes or index mix-ups) and the extrapolated value
    should not be trusted.
    """

    extrapolated: float
    rate: float
    scale: float
    rms: float


def _profile(h_pow, lam):
    # linear LS in (extrapolated, scale) for a fixed rate
    design = np.column_stack([np.ones_like(h_pow), h_pow])
    coef, *_ = np.linalg.lstsq(design, lam, rcond=None)
    res = design @ coef - lam
    return coef, float(res @ res)


def fit_rate(h, lam, rate_bounds=(0.25, 8.0)):
    """Least-squares fit of the three-parameter refinement model.

    h, lam: matching sequences, at least three pairs, h positive and
    distinct.  The rate is profiled out: for each candidate rate the
    remaining two parameters are a linear solve, and the 1-D problem is
    minimized over rate_bounds by bounded search, then the full
    three-parameter problem is polished by Gauss-Newton.  Data that is
    constant to machine precision short-circuits to
    RateFit(lam[0], inf, 0.0, 0.0): already converged, nothing to fit.
    """
    h = np.asarray(h, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if h.shape != lam.shape or h.ndim != 1:
        raise ValueError("h and lam must be 1-D sequences of equal length")
    if h.size < 3:
        raise ValueError("need at least three (h, lambda) pairs to fit three parameters")
    if np.any(h <= 0):
        raise ValueError("mesh sizes must be positive")
    if len(set(h.tolist())) != h.size:
        raise ValueError("mesh sizes must be distinct")
    if np.ptp(lam) <= 1e-14 * max(1.0, float(np.max(np.abs(lam)))):
        return RateFit(float(lam[0]), math.inf, 0.0, 0.0)

    lo, hi = rate_bounds
    logh = np.log(h)

    def objective(rate):
        return _profile(np.exp(rate * logh), lam)[1]

    opt = minimize_scalar(
        objective, bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12, "maxiter": 500},
    )
    rate = float(opt.x)
    (extrap, scale), _ = _profile(np.exp(rate * logh), lam)

    # Gauss-Newton polish of (extrapolated, scale, rate); the bounded
    # search already lands close, so a handful of steps reaches the
    # floating-point floor.  A step that leaves the bounds or fails to
    # reduce the misfit is rejected and the loop stops.
    theta = np.array([extrap, scale, rate])
    best = objective(rate)
    for _ in range(30):
        hp = np.exp(theta[2] * logh)
        r = theta[0] + theta[1] * hp - lam
        J = np.column_stack([np.ones_like(hp), hp, theta[1] * hp * logh])
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        cand = theta + step
        if not lo <= cand[2] <= hi:
            break
        rr = cand[0] + cand[1] * np.exp(cand[2] * logh) - lam
        ss = float(rr @ rr)
        if ss >= best * (1 - 1e-15):
            break
        theta, best = cand, ss
        if np.max(np.abs(step)) <= 1e-14 * max(1.0, np.max(np.abs(theta))):
            break
    extrap, scale, rate = (float(v) for v in theta)
    return RateFit(extrap, rate, scale, math.sqrt(best / h.size))


# ---------------------------------------------------------------------------
# study driver

_GENERATORS = {
    "square": generate_unit_square,
    "lshape": generate_lshape,
    "cube": generate_unit_cube,
    "disk": generate_disk,
}
DOMAINS = tuple(sorted(_GENERATORS))


@dataclass(frozen=True)
class ConvergenceStudy:
    """Eigenvalues of one domain/degree across a refinement sequence.

    eigenvalues[i, j] is the j-th smallest eigenvalue on mesh
    resolutions[i] (real parts; a non-real pair would be recorded in
    notes).  fits[j] is the refinement fit of column j.  notes carries
    non-fatal oddities: near-degenerate clusters at the finest mesh,
    non-monotone columns, imaginary contamination.
    """

    domain: str
    degree: int
    deck_label: str
    resolutions: tuple[int, ...]
    h: tuple[float, ...]
    eigenvalues: np.ndarray
    fits: tuple[RateFit, ...]
    notes: tuple[str, ...]

    @property
    def m(self):
        return self.eigenvalues.shape[1]


def run_study(domain, degree, resolutions, deck=None, deck_label="paper-table1",
              m=5, settings=None):
    """Solve on each resolution and fit every sorted index.

    deck defaults to the built-in homogeneous Dirichlet deck; pass an
    explicit deck (and a deck_label for reports) to study anything else.
    Eigenvalues are tracked purely by sorted position, which is exact as
    long as no crossing happens between indices that are separated at
    every resolution; a note flags finest-mesh gaps below 0.5% where a
    mixed pair could silently corrupt the per-index fits.
    """
    if domain not in _GENERATORS:
        raise ValueError(f"unknown domain {domain!r}; choose from {DOMAINS}")
    resolutions = tuple(int(n) for n in resolutions)
    if len(resolutions) < 3:
        raise ValueError("need at least three resolutions for the rate fit")
    if sorted(set(resolutions)) != list(resolutions):
        raise ValueError("resolutions must be strictly increasing")
    if deck is None:
        deck = builtin_deck("paper-table1")
    base = settings if settings is not None else SolverSettings()
    base = replace(base, m=m)

    notes = []
    hs, rows = [], []
    for n in resolutions:
        mesh = _GENERATORS[domain](n)
        dofmap = build_dofmap(mesh, degree)
        system = assemble(mesh, dofmap, deck, degree)
        sols = solve_primal(system, base)
        if len(sols) < m:
            raise RuntimeError(
                f"{domain} N={n}: solver certified only {len(sols)} of {m} pairs"
            )
        lams = np.array([s.lam for s in sols[:m]])
        bad = np.abs(lams.imag) > 1e-8 * np.abs(lams)
        if np.any(bad):
            idx = ", ".join(str(i + 1) for i in np.nonzero(bad)[0])
            notes.append(f"N={n}: non-real eigenvalue at sorted index {idx}")
        hs.append(mesh_size(mesh))
        rows.append(np.sort(lams.real))

    eigs = np.vstack(rows)
    fine = eigs[-1]
    for i, j in itertools.pairwise(range(m)):
        if fine[j] - fine[i] <= 0.005 * abs(fine[j]):
            notes.append(
                f"indices {i + 1} and {j + 1} differ by <0.5% on the finest "
                "mesh; sorted-index tracking may mix the pair"
            )
    for j in range(m):
        col = eigs[:, j]
        if np.any(np.diff(col) > 1e-12 * np.abs(col[:-1])):
            notes.append(f"index {j + 1} is not monotone under refinement")

    fits = tuple(fit_rate(hs, eigs[:, j]) for j in range(m))
    return ConvergenceStudy(
        domain=domain, degree=degree, deck_label=deck_label,
        resolutions=resolutions, h=tuple(hs), eigenvalues=eigs,
        fits=fits, notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# reports

def write_csv(study, path):
    """CSV layout: one comment line with the study parameters, a header
    row `N,h,lambda_1..lambda_m`, one row per resolution (full repr
    precision, round-trip exact), then summary rows labeled `rate`,
    `scale`, `rms` and `extrapolated` with an empty h column.  Notes, if
    any, follow as trailing comment lines.
    """
    with open(path, "w", newline="") as f:
        f.write(
            f"# convergence study: domain={study.domain} degree={study.degree} "
            f"deck={study.deck_label}\n"
        )
        w = csv.writer(f)
        w.writerow(["N", "h"] + [f"lambda_{j + 1}" for j in range(study.m)])
        for n, h, row in zip(study.resolutions, study.h, study.eigenvalues):
            w.writerow([n, repr(float(h))] + [repr(float(v)) for v in row])
        for label, attr in (
            ("rate", "rate"), ("scale", "scale"),
            ("rms", "rms"), ("extrapolated", "extrapolated"),
        ):
            w.writerow([label, ""] + [repr(float(getattr(ft, attr))) for ft in study.fits])
        for note in study.notes:
            f.write(f"# note: {note}\n")


def format_table(study, digits=10):
    """Aligned text table of the study for terminal output."""
    width = max(digits + 8, 16)
    head = ["N".rjust(6), "h".rjust(12)] + [
        f"lambda_{j + 1}".rjust(width) for j in range(study.m)
    ]
    lines = [
        f"domain={study.domain} degree={study.degree} deck={study.deck_label}",
        "  ".join(head),
    ]
    for n, h, row in zip(study.resolutions, study.h, study.eigenvalues):
        cells = [f"{n:6d}", f"{h:12.6f}"] + [f"{v:{width}.{digits}f}" for v in row]
        lines.append("  ".join(cells))
    for label, attr in (("rate", "rate"), ("extrapolated", "extrapolated")):
        # the label spans the N and h columns (6 + 2 + 12 wide)
        cells = [label.rjust(20)]
        for ft in study.fits:
            v = getattr(ft, attr)
            cells.append(
                f"{v:{width}.{digits}f}" if math.isfinite(v) else "inf".rjust(width)
            )
        lines.append("  ".join(cells))
    for note in study.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines)
