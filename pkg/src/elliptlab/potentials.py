"""Lorentz norms and truncated Riesz / Havin–Maz'ya potentials of piecewise-constant fields.

Ball quantities are computed with exact disc–triangle intersection areas, so
``‖f‖_{L¹(B_ϱ(x))}`` is exact for element-wise constant ``f`` and the only
approximation left is the radial integral.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import FeFunction, Mesh, disc_intersection_areas

__all__ = [
    "ElementField",
    "PotentialQuery",
    "LorentzParams",
    "PotentialError",
    "lorentz_norm",
    "lorentz_norm_of_field",
    "distribution_function",
    "ball_mass",
    "ball_average",
    "riesz_potential",
    "havin_mazya_potential",
    "theorem2_check",
    "dyadic_sum",
    "dyadic_constant",
    "annulus_integral",
    "radial_integral",
    "read_field_csv",
    "write_field_csv",
]

N_DIM = 2


class PotentialError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ElementField:
    """Piecewise-constant field: one value per triangle."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.num_elements,):
            raise PotentialError(f"expected {self.mesh.num_elements} element values, got {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, mesh, func, order=4):
        """Element means of a vectorised function."""
        return cls(mesh, mesh.integrate_elementwise(func, order) / mesh.areas)

    @classmethod
    def from_fe(cls, u: FeFunction):
        return cls(u.mesh, u.values[u.mesh.triangles].mean(axis=1))

    @classmethod
    def constant(cls, mesh, value=1.0):
        return cls(mesh, np.full(mesh.num_elements, float(value)))

    def __mul__(self, t):
        return ElementField(self.mesh, self.values * t)

    __rmul__ = __mul__

    def abs(self):
        return ElementField(self.mesh, np.abs(self.values))


@dataclass(frozen=True)
class PotentialQuery:
    sigma: float
    theta: float
    center: tuple
    radius: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise PotentialError("sigma must be positive")
        if self.theta < 0:
            raise PotentialError("theta must be nonnegative")
        if not 0 < self.radius <= 1:
            raise PotentialError("radius must lie in (0, 1]")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


@dataclass(frozen=True)
class LorentzParams:
    s: float
    gamma: float  # math.inf for the Marcinkiewicz case

    def __post_init__(self):
        if not (self.s > 0 and self.gamma > 0):
            raise PotentialError("Lorentz indices must be positive")


# ---------------------------------------------------------------------------
# Lorentz spaces


def distribution_function(values, measures, levels):
    """``|{|f| > λ}|`` at each level λ for a piecewise-constant field."""
    a = np.abs(np.asarray(values, dtype=float))
    m = np.asarray(measures, dtype=float)
    lv = np.asarray(levels, dtype=float)
    return (m[None, :] * (a[None, :] > lv[:, None])).sum(axis=1)


def lorentz_norm(values, measures, lp, level_grid=64):
    """``‖f‖_{s,γ}`` of a step function with the given values and piece measures.

    The distribution function is an exact step function, so the
    ``λ``-integral is summed in closed form over its steps; ``level_grid``
    only sets the resolution of the optional distribution report
    (:func:`distribution_function`).  ``γ = inf`` gives the Marcinkiewicz
    quasi-norm ``sup_λ λ |{|f| > λ}|^{1/s}``.
    """
    if level_grid < 16:
        raise PotentialError("level_grid must be >= 16")
    a = np.abs(np.asarray(values, dtype=float))
    m = np.asarray(measures, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(m))):
        raise PotentialError("Lorentz norm of a non-finite field")
    keep = (a > 0) & (m > 0)
    a, m = a[keep], m[keep]
    if len(a) == 0:
        return 0.0
    order = np.argsort(-a, kind="stable")
    a, m = a[order], m[order]
    levels, start = np.unique(-a, return_index=True)
    levels = -levels  # distinct values, descending
    cum = np.cumsum(m)
    # measure of {|f| > λ} for λ just below levels[j]
    ends = np.append(start[1:], len(a)) - 1
    M = cum[ends]
    s, g = lp.s, lp.gamma
    if math.isinf(g):
        return float(np.max(levels * M ** (1.0 / s)))
    lower = np.append(levels[1:], 0.0)
    total = s * np.sum(M ** (g / s) * (levels**g - lower**g) / g)
    return float(total ** (1.0 / g))


def lorentz_norm_of_field(field, lp, center=None, radius=None, level_grid=64):
    """Lorentz norm over the whole mesh or over ``B_radius(center)`` (clipped pieces)."""
    if center is None:
        meas = field.mesh.areas
    else:
        meas = disc_intersection_areas(field.mesh, center, radius)
    return lorentz_norm(field.values, meas, lp, level_grid)


# ---------------------------------------------------------------------------
# ball quantities


def _local(field, x, rmax):
    mesh = field.mesh
    c = mesh.centroids - np.asarray(x, dtype=float)
    reach = np.max(np.linalg.norm(mesh.nodes[mesh.triangles] - mesh.centroids[:, None], axis=2), axis=1)
    return np.flatnonzero(np.hypot(c[:, 0], c[:, 1]) - reach < rmax)


def ball_mass(field, x, radii, absolute=True):
    """``∫_{B_ϱ(x) ∩ Ω} |f|`` and ``|B_ϱ(x) ∩ Ω|`` for each radius."""
    rr = np.atleast_1d(np.asarray(radii, dtype=float))
    ids = _local(field, x, rr.max())
    areas = disc_intersection_areas(field.mesh, x, rr, elements=ids)
    f = field.values[ids]
    if absolute:
        f = np.abs(f)
    return areas @ f, areas.sum(axis=1)


def ball_average(field, x, radii):
    mass, meas = ball_mass(field, x, radii)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(meas > 0, mass / meas, 0.0)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


def radial_integral(g, a=0.0, b=1.0, rtol=1e-6, max_rounds=40):
    """Adaptive ``∫_a^b g(t) dt`` for vectorised ``g`` with dyadic interval splitting.

    Each round evaluates a 5-point Gauss rule on every active interval and on
    its two halves; intervals whose two estimates agree within their share of
    the tolerance are retired.  Converges for integrands with kinks.
    """
    def gauss(lo, hi):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        t = mid[:, None] + half[:, None] * _GL_X[None, :]
        vals = np.asarray(g(t.ravel()), dtype=float).reshape(t.shape)
        return half * (vals @ _GL_W)

    lo, hi = np.array([a]), np.array([b])
    coarse = gauss(lo, hi)
    done = 0.0
    scale = abs(coarse.sum())
    for _ in range(max_rounds):
        mid = 0.5 * (lo + hi)
        left, right = gauss(lo, mid), gauss(mid, hi)
        fine = left + right
        scale = max(scale, abs(done + fine.sum()))
        share = rtol * np.maximum(scale, 1e-300) * (hi - lo) / (b - a)
        ok = np.abs(fine - coarse) <= 0.1 * share
        done += fine[ok].sum()
        if ok.all():
            return float(done)
        keep = ~ok
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        coarse = np.concatenate([left[keep], right[keep]])
    return float(done + coarse.sum())


def riesz_potential(field, x, r, rtol=1e-6):
    """Truncated Riesz potential ``∫_0^r ‖f‖_{L¹(B_ϱ(x))} ϱ^{1-n} dϱ/ϱ`` (n = 2)."""
    if not 0 < r <= 1:
        raise PotentialError("radius must lie in (0, 1]")

    def g(t):  # substitution ϱ = r t
        mass, _ = ball_mass(field, x, r * t)
        return mass / (r * t * t)

    return radial_integral(g, 0.0, 1.0, rtol)


def havin_mazya_potential(field, Q, rtol=1e-6):
    """``P_σ^ϑ(f; x, r) = ∫_0^r ϱ^σ ⟨|f|⟩_{B_ϱ(x)}^ϑ dϱ/ϱ``.

    Uses ``ϱ = r t^{1/σ}``, which turns the weight into the constant
    ``r^σ/σ`` and removes the endpoint singularity for ``σ < 1``.
    """
    r, s, th = Q.radius, Q.sigma, Q.theta

    def g(t):
        avg = ball_average(field, Q.center, r * t ** (1.0 / s))
        return avg**th

    return (r**s / s) * radial_integral(g, 0.0, 1.0, rtol)


def dyadic_sum(field, Q, K=8):
    """``Σ_{k=1..K} (r/2^k)^σ ⟨|f|⟩_{B_{r/2^k}}^ϑ``, the scale-by-scale lower bound."""
    radii = Q.radius / 2.0 ** np.arange(1, K + 1)
    return float(np.sum(radii**Q.sigma * ball_average(field, Q.center, radii) ** Q.theta))


def dyadic_constant(sigma, theta, n=N_DIM):
    """Constant c with ``dyadic_sum <= c P_σ^ϑ`` for f >= 0 on interior balls.

    On ``[r/2^k, r/2^{k-1}]`` the ball average is at least ``2^{-n}`` times
    the average on ``B_{r/2^k}``, which gives ``σ 2^{nϑ} / (2^σ - 1)``.
    """
    return sigma * 2.0 ** (n * theta) / (2.0**sigma - 1.0)


def annulus_integral(field, x, r):
    """``∫_{B_{r/2}(x)} |f(y)| / |y - x| dy`` by layer-cake integration in ϱ."""
    half = 0.5 * r

    def g(t):  # ∫_0^{r/2} m'(ϱ)/ϱ dϱ = m(r/2)/(r/2) + ∫ m(ϱ)/ϱ² dϱ
        mass, _ = ball_mass(field, x, half * t)
        return mass / (half * t * t)

    m_half, _ = ball_mass(field, x, half)
    return float(m_half[0] / half + radial_integral(g, 0.0, 1.0, 1e-8))


def theorem2_check(field, Q, tau, trials=32, seed=0):
    """Empirical constant in ``sup_{B_τ} P_σ^ϑ(f; ·, r) <= c ‖f‖^ϑ_{nϑ/σ, ϑ; B_{τ+r}}``.

    The supremum is taken over ``trials`` centres: ``Q.center`` plus points
    drawn uniformly (seeded) from ``B_τ(Q.center)``.
    """
    n = N_DIM
    if not n * Q.theta > Q.sigma:
        raise PotentialError("need n*theta > sigma")
    if tau <= 0 or tau + Q.radius > 1:
        raise PotentialError("need 0 < tau and tau + r <= 1")
    c0 = np.asarray(Q.center, dtype=float)
    rng = np.random.default_rng(seed)
    k = max(int(trials) - 1, 0)
    rad = tau * np.sqrt(rng.uniform(size=k))
    ang = 2 * np.pi * rng.uniform(size=k)
    centers = np.vstack([c0, c0 + np.stack([rad * np.cos(ang), rad * np.sin(ang)], 1)])
    pots = np.array(
        [havin_mazya_potential(field, PotentialQuery(Q.sigma, Q.theta, tuple(c), Q.radius)) for c in centers]
    )
    lp = LorentzParams(n * Q.theta / Q.sigma, Q.theta)
    norm = lorentz_norm_of_field(field, lp, c0, tau + Q.radius)
    sup = float(pots.max())
    if norm == 0:
        if sup > 0:
            raise PotentialError("zero Lorentz norm with a positive potential")
        ratio = 0.0
    else:
        ratio = sup / norm**Q.theta
    return {
        "ratio": ratio,
        "sup_potential": sup,
        "argmax_center": centers[int(np.argmax(pots))].tolist(),
        "lorentz_norm": norm,
        "lorentz_indices": [lp.s, lp.gamma],
        "trials": int(len(centers)),
        "seed": int(seed),
    }


# ---------------------------------------------------------------------------
# field files


def write_field_csv(field, path):
    """CSV with header ``element_id,value``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["element_id", "value"])
        for i, v in enumerate(field.values.tolist()):
            w.writerow([i, repr(v)])
    return Path(path)


def read_field_csv(path, mesh):
    """Element field from ``element_id,value`` rows; every element must appear once."""
    vals = np.full(mesh.num_elements, np.nan)
    with open(path, newline="") as fh:
        rows = csv.DictReader(fh)
        if rows.fieldnames is None or [c.strip() for c in rows.fieldnames] != ["element_id", "value"]:
            raise PotentialError(f"{path}: header must be 'element_id,value'")
        for row in rows:
            i = int(row["element_id"])
            if not 0 <= i < mesh.num_elements:
                raise PotentialError(f"{path}: element id {i} out of range")
            vals[i] = float(row["value"])
    if np.isnan(vals).any():
        raise PotentialError(f"{path}: missing values for {int(np.isnan(vals).sum())} elements")
    return ElementField(mesh, vals)
