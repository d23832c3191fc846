"""De Giorgi truncation tools on P1 fields.

Truncations ``(v - κ)_+`` of piecewise-affine ``v`` are integrated exactly by
clipping each triangle at the level set ``{v = κ}``; every piece is then a
triangle on which ``(v - κ)_+`` is affine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    FeFunction,
    clip_positive_part,
    discrete_ball,
    element_gradient,
    quadrature_rule,
    triangle_areas,
)
from .integrand import derivatives, structural_exponent_s
from .potentials import ElementField, PotentialQuery, ball_average, havin_mazya_potential

__all__ = [
    "IterationParams",
    "TruncationField",
    "TruncationError",
    "UnsupportedError",
    "kappa_levels",
    "truncated_integral",
    "truncated_average",
    "caccioppoli_ratio",
    "reverse_holder_fit",
    "degiorgi_bound",
    "calibrate_degiorgi",
    "bernstein_field",
    "bernstein_residual",
    "fractional_seminorm",
    "besov_ratio",
    "fractional_caccioppoli_probe",
]


class TruncationError(ValueError):
    pass


class UnsupportedError(TruncationError):
    pass


@dataclass(frozen=True)
class IterationParams:
    chi: float
    sigma: float
    theta: float
    c_tilde: float = 1.0
    M0: float = 1.0
    M_star: float = 0.0
    kappa0: float = 0.0

    def __post_init__(self):
        if not self.chi > 1:
            raise TruncationError("chi must exceed 1")
        for name in ("sigma", "theta", "c_tilde", "M0"):
            if not getattr(self, name) > 0:
                raise TruncationError(f"{name} must be positive")
        if self.M_star < 0:
            raise TruncationError("M_star must be nonnegative")

    def replace(self, **kw):
        d = dict(self.__dict__)
        d.update(kw)
        return IterationParams(**d)


@dataclass(frozen=True, eq=False)
class TruncationField:
    """Nodal ``v`` (piecewise affine) and element-wise datum ``f`` on one mesh."""

    mesh: object
    v: np.ndarray
    f: np.ndarray = None

    def __post_init__(self):
        v = self.v.values if isinstance(self.v, FeFunction) else np.asarray(self.v, dtype=float)
        if v.shape != (self.mesh.num_nodes,):
            raise TruncationError("v must carry one value per node")
        if self.f is None:
            f = np.zeros(self.mesh.num_elements)
        elif isinstance(self.f, ElementField):
            f = self.f.values
        else:
            f = np.asarray(self.f, dtype=float)
        if f.shape != (self.mesh.num_elements,):
            raise TruncationError("f must carry one value per element")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(f))):
            raise TruncationError("non-finite field values")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "f", f)

    @classmethod
    def from_function(cls, mesh, func, f=None):
        return cls(mesh, func(mesh.nodes), f)

    @property
    def fe(self):
        return FeFunction(self.mesh, self.v)

    def value_at(self, x):
        """Precise representative: the continuous P1 interpolant at ``x``."""
        return float(self.fe(np.asarray(x, dtype=float)[None, :])[0])

    def scaled(self, tv, tf=1.0):
        return TruncationField(self.mesh, self.v * tv, self.f * tf)


def kappa_levels(kappa0, vmax, count=33):
    """Levels ``κ₀ + (vmax - κ₀)(1 - 2^{-j})``, j = 0..count-1: geometric approach to vmax."""
    j = np.arange(count)
    return kappa0 + (max(vmax, kappa0) - kappa0) * (1.0 - 2.0 ** (-j))


# ---------------------------------------------------------------------------
# truncated integrals


def truncated_integral(mesh, values, kappa, elements, power=2.0, order=4):
    """``∫_E (v - κ)_+^power`` over the element set ``E``; exact for power 1 and 2."""
    coords, vv, _ = clip_positive_part(mesh, values, kappa, elements)
    if len(coords) == 0:
        return 0.0
    area = triangle_areas(coords)
    if power == 2.0:
        s = (vv**2).sum(axis=1) + vv[:, 0] * vv[:, 1] + vv[:, 0] * vv[:, 2] + vv[:, 1] * vv[:, 2]
        return float(np.sum(area * s / 6.0))
    if power == 1.0:
        return float(np.sum(area * vv.mean(axis=1)))
    bary, w = quadrature_rule(order)
    q = np.maximum(vv @ bary.T, 0.0)
    return float(np.sum(area * (q**power @ w)))


def positive_area(mesh, values, kappa, elements):
    """Per-element measure of ``{v > κ}`` for the listed elements (aligned with ``elements``)."""
    coords, _, owner = clip_positive_part(mesh, values, kappa, elements)
    out = np.zeros(mesh.num_elements)
    np.add.at(out, owner, triangle_areas(coords))
    return out[np.asarray(elements)]


def truncated_average(T, kappa, ball, power):
    """Averaged norm ``⟨(v - κ)_+⟩_{L^power(ball)}``."""
    if ball.is_empty:
        raise TruncationError("empty discrete ball")
    integral = truncated_integral(T.mesh, T.v, kappa, ball.element_ids, power)
    return (integral / ball.measure) ** (1.0 / power)


def _f_average(T, x, rho):
    return float(ball_average(ElementField(T.mesh, T.f), x, rho)[0])


# ---------------------------------------------------------------------------
# Caccioppoli / reverse Hölder / De Giorgi


def caccioppoli_sides(T, kappa, ball):
    """``(∫_{B/2} |D(v-κ)_+|², ϱ^{-2} ∫_B (v-κ)_+²)`` on a discrete ball and its half."""
    half = discrete_ball(T.mesh, ball.center, 0.5 * ball.radius)
    if ball.is_empty or half.is_empty:
        raise TruncationError("ball or half-ball has no elements")
    g = element_gradient(T.fe)[half.element_ids]
    lhs = float(np.sum((g**2).sum(axis=1) * positive_area(T.mesh, T.v, kappa, half.element_ids)))
    rhs = truncated_integral(T.mesh, T.v, kappa, ball.element_ids, 2.0) / ball.radius**2
    return lhs, rhs


def caccioppoli_ratio(T, kappa, ball):
    lhs, rhs = caccioppoli_sides(T, kappa, ball)
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs


def reverse_holder_sweep(T, P, kappa_grid, radii, x):
    """Rows ``(κ, ϱ, lhs, first, second)`` of the reverse Hölder inequality.

    ``first = M₀⟨(v-κ)_+⟩_{L²(B_ϱ)}`` and ``second = M* ϱ^σ ⟨f⟩^ϑ_{L¹(B_ϱ)}``;
    radii whose half-ball contains no element are skipped.
    """
    x = np.asarray(x, dtype=float)
    rows = []
    for rho in radii:
        B = discrete_ball(T.mesh, x, rho)
        half = discrete_ball(T.mesh, x, 0.5 * rho)
        if B.is_empty or half.is_empty:
            continue
        fterm = P.M_star * rho**P.sigma * _f_average(T, x, rho) ** P.theta
        for k in kappa_grid:
            if k < P.kappa0 - 1e-14 * max(1.0, abs(P.kappa0)):
                raise TruncationError("kappa grid must lie above kappa0")
            lhs = truncated_average(T, k, half, 2.0 * P.chi)
            first = P.M0 * truncated_average(T, k, B, 2.0)
            rows.append((float(k), float(rho), lhs, first, fterm))
    return np.array(rows, dtype=float).reshape(-1, 5)


def reverse_holder_fit(T, P, kappa_grid, radii, x):
    """Smallest ``c̃`` making the reverse Hölder inequality hold on every sampled (κ, ϱ)."""
    rows = reverse_holder_sweep(T, P, kappa_grid, radii, x)
    if len(rows) == 0:
        raise TruncationError("no admissible radii")
    lhs, rhs = rows[:, 2], rows[:, 3] + rows[:, 4]
    if np.any((rhs == 0) & (lhs > 0)):
        return math.inf
    ok = rhs > 0
    return float(np.max(lhs[ok] / rhs[ok])) if ok.any() else 0.0


def _degiorgi_terms(T, P, x, r):
    x = np.asarray(x, dtype=float)
    if np.hypot(*x) + 2 * r > 1 + 1e-12:
        raise TruncationError("B_2r(x) must lie inside the unit disc")
    ball = discrete_ball(T.mesh, x, r)
    e = 1.0 / (P.chi - 1.0)
    l2 = truncated_average(T, P.kappa0, ball, 2.0)
    first = P.M0 ** (P.chi * e) * l2
    if P.M_star > 0 and np.any(T.f != 0):
        pot = havin_mazya_potential(ElementField(T.mesh, T.f), PotentialQuery(P.sigma, P.theta, tuple(x), min(2 * r, 1.0)))
    else:
        pot = 0.0
    second = P.M0**e * P.M_star * pot
    return T.value_at(x), first, second


def degiorgi_bound(T, P, x, r, c):
    """``κ₀ + c M₀^{χ/(χ-1)} ⟨(v-κ₀)_+⟩_{L²(B_r)} + c M₀^{1/(χ-1)} M* P_σ^ϑ(f; x, 2r)``."""
    vx, first, second = _degiorgi_terms(T, P, x, r)
    bound = P.kappa0 + c * (first + second)
    return float(bound), bool(vx <= bound)


def calibrate_degiorgi(T, P, points, r):
    """Minimal ``c`` for which :func:`degiorgi_bound` holds at every given point."""
    need = 0.0
    for x in points:
        vx, first, second = _degiorgi_terms(T, P, x, r)
        excess = vx - P.kappa0
        if excess <= 0:
            continue
        den = first + second
        if den == 0:
            return math.inf
        need = max(need, excess / den)
    return need


# ---------------------------------------------------------------------------
# Bernstein device


def bernstein_field(S):
    """Element field ``(|Du|² + μ²)^{p/2}`` and its area-weighted nodal projection."""
    I = S.integrand
    mesh = S.u.mesh
    g = element_gradient(S.u)
    v_el = ((g**2).sum(axis=1) + I.mu**2) ** (0.5 * I.p)
    num = np.zeros(mesh.num_nodes)
    den = np.zeros(mesh.num_nodes)
    for k in range(3):
        np.add.at(num, mesh.triangles[:, k], v_el * mesh.areas)
        np.add.at(den, mesh.triangles[:, k], mesh.areas)
    return v_el, num / den


def bernstein_residual(S, return_nodal=False):
    """Largest positive ``∫ a_ij D_j v D_i φ`` over interior hat functions ``φ``.

    ``v`` is the nodal projection of ``(|Du|² + μ²)^{p/2}`` and
    ``a = H_μ(Du)^{(2-p)/2} ∂_zz F(Du)``.  A hat function is interior when its
    support avoids the boundary nodes.  Nonpositive values mean the discrete
    ``v`` is a subsolution in the tested directions.
    """
    I = S.integrand
    if not I.autonomous or I.q != I.p:
        raise UnsupportedError("the Bernstein device needs an autonomous integrand with p = q")
    if not I.mu > 0:
        raise UnsupportedError("the Bernstein device needs mu > 0")
    mesh = S.u.mesh
    g = element_gradient(S.u)
    _, hess = derivatives(I, mesh.centroids, g)
    H = (g**2).sum(axis=1) + I.mu**2
    a = H[:, None, None] ** (0.5 * (2 - I.p)) * hess
    _, vn = bernstein_field(S)
    gv = element_gradient(FeFunction(mesh, vn))
    flux = np.einsum("mij,mj->mi", a, gv)  # a Dv per element
    B = mesh.basis_gradients  # (M,3,2)
    contrib = np.einsum("mkd,md->mk", B, flux) * mesh.areas[:, None]
    res = np.zeros(mesh.num_nodes)
    np.add.at(res, mesh.triangles, contrib)
    # nodes whose hat support touches the boundary are excluded
    touches = np.zeros(mesh.num_nodes, dtype=bool)
    bnd_el = mesh.is_boundary[mesh.triangles].any(axis=1)
    touches[mesh.triangles[bnd_el].ravel()] = True
    interior = ~touches
    out = float(max(res[interior].max(initial=0.0), 0.0))
    return (out, res) if return_nodal else out


# ---------------------------------------------------------------------------
# fractional smoothness


def _subdivide(tri, levels):
    """Midpoint-subdivide triangles (K,3,d) ``levels`` times → (K, 4^levels, 3, d)."""
    t = tri[:, None]
    for _ in range(levels):
        a, b, c = t[..., 0, :], t[..., 1, :], t[..., 2, :]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        kids = np.stack(
            [np.stack([a, ab, ca], -2), np.stack([ab, b, bc], -2), np.stack([ca, bc, c], -2), np.stack([bc, ca, ab], -2)],
            axis=2,
        )
        t = kids.reshape(t.shape[0], -1, 3, tri.shape[-1])
    return t


def _self_term(tri, grad, s, m, levels=2):
    """``∫_T ∫_T |g·(x-y)|^m |x-y|^{-2-sm}`` for affine ``w`` on triangles ``tri``.

    Midpoint subdivision yields four copies of ``T`` scaled by 1/2 (one
    point-reflected), and the integrand is invariant under point
    reflection, so ``I(T) = 2^{-m(1-s)} I(T) + cross``.  Cross terms between
    distinct pieces of a ``levels``-fold subdivision are summed by the
    centroid rule.
    """
    pieces = _subdivide(tri, levels)  # (K,P,3,2)
    cen = pieces.mean(axis=2)
    e1 = pieces[..., 1, :] - pieces[..., 0, :]
    e2 = pieces[..., 2, :] - pieces[..., 0, :]
    area = 0.5 * np.abs(e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])
    d = cen[:, :, None, :] - cen[:, None, :, :]
    dist = np.linalg.norm(d, axis=-1)
    num = np.abs(np.einsum("kijd,kd->kij", d, grad)) ** m
    np.einsum("kii->ki", dist)[...] = 1.0
    ker = num / dist ** (2 + s * m)
    np.einsum("kii->ki", ker)[...] = 0.0
    cross = np.einsum("kij,ki,kj->k", ker, area, area)
    return cross / (1.0 - 2.0 ** (-levels * m * (1 - s)))


def fractional_seminorm(w, s, m, region, return_power=False, chunk=512):
    """``[w]_{s,m}`` over a discrete ball: centroid pairs plus exact-scaling self terms.

    A diagnostic with a few percent accuracy, not a certified value.
    """
    if not 0 < s < 1 or m < 1:
        raise TruncationError("need s in (0,1) and m >= 1")
    if region.is_empty:
        raise TruncationError("empty region")
    mesh = w.mesh
    ids = region.element_ids
    tri = mesh.nodes[mesh.triangles[ids]]
    grad = element_gradient(w)[ids]
    # subdivide once so that neighbouring pairs are resolved at half the mesh size
    # carry nodal values as a third coordinate: exact for constants, no point location
    lifted = np.concatenate([tri, w.values[mesh.triangles[ids]][..., None]], axis=-1)
    sub = _subdivide(lifted, 1).reshape(-1, 3, 3)
    vals = sub[..., 2].mean(axis=1)
    sub = sub[..., :2]
    sub_grad = np.repeat(grad, 4, axis=0)
    cen = sub.mean(axis=1)
    area = triangle_areas(sub)
    total = 0.0
    for i0 in range(0, len(cen), chunk):
        c = cen[i0:i0 + chunk]
        d = np.linalg.norm(c[:, None, :] - cen[None, :, :], axis=-1)
        dv = np.abs(vals[i0:i0 + chunk, None] - vals[None, :]) ** m
        idx = np.arange(i0, min(i0 + chunk, len(cen)))
        d[np.arange(len(idx)), idx] = 1.0
        ker = dv / d ** (2 + s * m)
        ker[np.arange(len(idx)), idx] = 0.0
        total += float(area[i0:i0 + chunk] @ ker @ area)
    total += float(np.sum(_self_term(sub, sub_grad, s, m)))
    total = max(total, 0.0)
    return total if return_power else total ** (1.0 / m)


def besov_ratio(w, t, q_exp, h_magnitudes, directions=8, r_eval=None, order=2):
    """``sup_h |h|^{-t} ‖τ_h² w‖_{L^q(B_{r_eval})}`` over sampled directions and magnitudes.

    ``τ_h² w(x) = w(x+2h) - 2w(x+h) + w(x)``; ``r_eval`` defaults to the
    largest radius keeping ``x + 2h`` inside the mesh for every sampled ``h``.
    """
    if not 1 < t < 2 or q_exp <= 1:
        raise TruncationError("need t in (1,2) and q > 1")
    mesh = w.mesh
    hm = np.asarray(h_magnitudes, dtype=float)
    if r_eval is None:
        r_eval = mesh.inner_radius - 2 * hm.max()
    if r_eval <= 0:
        raise TruncationError("shifts too large for the evaluation region")
    ball = discrete_ball(mesh, (0.0, 0.0), r_eval)
    pts, wts = mesh.quadrature_points(order)
    pts = pts[ball.element_ids].reshape(-1, 2)
    wq = (mesh.areas[ball.element_ids, None] * wts[None, :]).ravel()
    w0 = w(pts)
    ang = np.pi * np.arange(directions) / directions
    best = 0.0
    for h in hm:
        for a in ang:
            e = h * np.array([np.cos(a), np.sin(a)])
            d2 = w(pts + 2 * e) - 2 * w(pts + e) + w0
            nrm = np.sum(wq * np.abs(d2) ** q_exp) ** (1.0 / q_exp)
            best = max(best, nrm / h**t)
    return float(best)


def fractional_caccioppoli_probe(S, params, kappa, ball):
    """``(lhs, rhs)`` of the fractional Caccioppoli inequality with unit constant.

    ``lhs = [(v-κ)_+]²_{β,2;B_{ϱ/2}}`` for the Bernstein field ``v`` and
    ``rhs = M^{𝔰(q-p)} ϱ^{-2β} (∫_{B_ϱ}(v-κ)_+² + ϱ^{2αk} ∫_{B_ϱ}(|Du|+1)^𝔭)``.
    """
    I = S.integrand
    beta, k, fp, M = params["beta"], params["k"], params["frak_p"], params["M"]
    s_exp = params.get("s_exp")
    if s_exp is None:
        s_exp = structural_exponent_s(2, I.p, I.q)
    if not 0 < beta < I.alpha / (1 + I.alpha):
        raise TruncationError(f"beta must lie in (0, alpha/(1+alpha)) = (0, {I.alpha / (1 + I.alpha):.6g})")
    if not 0 < k < 1:
        raise TruncationError("k must lie in (0, 1)")
    if not fp > 1:
        raise TruncationError("frak_p must exceed 1")
    mesh = S.u.mesh
    g = element_gradient(S.u)
    gnorm = np.hypot(g[:, 0], g[:, 1])
    if ball.is_empty:
        raise TruncationError("empty ball")
    gmax = float(gnorm[ball.element_ids].max())
    if M < max(gmax, 1.0) * (1 - 1e-12):
        raise TruncationError(f"M must be at least max(|Du|_inf, 1) = {max(gmax, 1.0):.6g} on the ball")
    rho = ball.radius
    _, vn = bernstein_field(S)
    half = discrete_ball(mesh, ball.center, 0.5 * rho)
    trunc = FeFunction(mesh, np.maximum(vn - kappa, 0.0))
    lhs = fractional_seminorm(trunc, beta, 2.0, half, return_power=True) if not half.is_empty else 0.0
    amp = M ** (s_exp * (I.q - I.p)) / rho ** (2 * beta)
    t1 = truncated_integral(mesh, vn, kappa, ball.element_ids, 2.0)
    t2 = rho ** (2 * I.alpha * k) * float(np.sum(mesh.areas[ball.element_ids] * (gnorm[ball.element_ids] + 1) ** fp))
    return float(lhs), float(amp * (t1 + t2))
