"""Closed-form energy densities F(x, z) with (p, q)-growth.

Every registered kind splits as ``F(x, z) = base(z) + coef(x) * extra(z)``
where ``base`` and ``extra`` are radial in ``z``.  The split keeps the
solver's assembly cheap (coefficients are integrated once per element) and
gives closed-form Hessian eigenvalues: for a radial function
``phi(|z|^2)`` the eigenvalues of the Hessian are ``2 phi'`` (across ``z``)
and ``2 phi' + 4 |z|^2 phi''`` (along ``z``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

__all__ = [
    "Coefficient",
    "Integrand",
    "EigenPair",
    "IntegrandError",
    "DegeneracyError",
    "KINDS",
    "make_coefficient",
    "integrand_from_dict",
    "eval_F",
    "derivatives",
    "eigenpair",
    "ellipticity_ratio",
    "nonlocal_ratio",
    "structural_exponent_s",
    "assumption_audit",
]

KINDS = (
    "p-power",
    "minimal-surface",
    "double-phase",
    "perturbed-double-phase",
    "coefficient-times-G",
    "exponential",
    "logarithmic",
)
_EVAL_ONLY = ("exponential", "logarithmic")


class IntegrandError(ValueError):
    pass


class DegeneracyError(IntegrandError):
    """Second derivatives requested at z = 0 with mu = 0."""


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class Coefficient:
    name: str
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        p = self.params
        if self.name == "zero":
            return np.zeros(x.shape[:-1])
        if self.name == "constant":
            return np.full(x.shape[:-1], float(p.get("value", 1.0)))
        r2 = x1 * x1 + x2 * x2
        r = np.sqrt(r2)
        if self.name == "radial-power":
            return float(p.get("scale", 1.0)) * r ** float(p["alpha"])
        if self.name == "zhikov-cone":
            # |x|^{alpha-2} (x2^2 - x1^2)_+, zero on the closed p-zone and at the origin
            alpha = float(p["alpha"])
            pos = np.maximum(x2 * x2 - x1 * x1, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.where(pos > 0, r ** (alpha - 2.0) * pos, 0.0)
            return float(p.get("scale", 1.0)) * val
        if self.name == "sinusoidal":
            amp, freq = float(p.get("amplitude", 0.5)), float(p.get("frequency", 3.0))
            return 1.0 + 0.5 * amp * (1.0 + np.sin(freq * x1) * np.sin(freq * x2 + 0.7))
        raise IntegrandError(f"unknown coefficient {self.name!r}")

    def upper_bound(self):
        p = self.params
        if self.name == "zero":
            return 0.0
        if self.name == "constant":
            return abs(float(p.get("value", 1.0)))
        if self.name in ("radial-power", "zhikov-cone"):
            return float(p.get("scale", 1.0))
        if self.name == "sinusoidal":
            return 1.0 + float(p.get("amplitude", 0.5))
        raise IntegrandError(f"unknown coefficient {self.name!r}")

    def to_dict(self):
        return {"name": self.name, "params": dict(self.params)}


COEFFICIENT_NAMES = ("zero", "constant", "radial-power", "zhikov-cone", "sinusoidal")


def make_coefficient(name="zero", params=None, alpha=None):
    params = dict(params or {})
    if name not in COEFFICIENT_NAMES:
        raise IntegrandError(f"unknown coefficient {name!r}; choose from {COEFFICIENT_NAMES}")
    if name in ("radial-power", "zhikov-cone") and "alpha" not in params:
        if alpha is None:
            raise IntegrandError(f"coefficient {name!r} needs an exponent alpha")
        params["alpha"] = float(alpha)
    return Coefficient(name, params)


# ---------------------------------------------------------------------------
# integrands


@dataclass(frozen=True)
class Integrand:
    kind: str
    p: float = 2.0
    q: float = None
    mu: float = 0.0
    L: float = 1.0
    alpha: float = 1.0
    coefficient: Coefficient = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise IntegrandError(f"unknown integrand kind {self.kind!r}; choose from {KINDS}")
        if self.q is None:
            object.__setattr__(self, "q", self.p)
        if self.coefficient is None:
            default = "zero" if self.kind in ("double-phase", "perturbed-double-phase") else "constant"
            object.__setattr__(self, "coefficient", make_coefficient(default))
        elif isinstance(self.coefficient, dict):
            c = self.coefficient
            object.__setattr__(
                self, "coefficient", make_coefficient(c.get("name", "zero"), c.get("params"), self.alpha)
            )
        if not self.p > 1:
            raise IntegrandError(f"p must exceed 1, got {self.p}")
        if self.q < self.p:
            raise IntegrandError(f"q={self.q} must be >= p={self.p}")
        if not 0 <= self.mu <= 1:
            raise IntegrandError(f"mu must lie in [0, 1], got {self.mu}")
        if self.L < 1:
            raise IntegrandError(f"L must be >= 1, got {self.L}")
        if not 0 < self.alpha <= 1:
            raise IntegrandError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def autonomous(self):
        return self._coef_is_constant() or self._extra_exponent() is None

    def _coef_is_constant(self):
        return self.coefficient.name in ("zero", "constant")

    def with_mu(self, mu):
        return Integrand(self.kind, self.p, self.q, mu, self.L, self.alpha, self.coefficient)

    def to_dict(self):
        return {
            "kind": self.kind,
            "p": self.p,
            "q": self.q,
            "mu": self.mu,
            "L": self.L,
            "alpha": self.alpha,
            "coefficient": self.coefficient.to_dict(),
        }

    # -- radial split ---------------------------------------------------------
    def _shift(self):
        if self.kind == "minimal-surface" or self.kind == "perturbed-double-phase":
            return 1.0
        return self.mu

    def _base_exponent(self):
        if self.kind == "minimal-surface":
            return 1.0
        if self.kind == "coefficient-times-G":
            return None
        return self.p

    def _extra_exponent(self):
        if self.kind in ("double-phase", "perturbed-double-phase"):
            return (self.q,)
        if self.kind == "coefficient-times-G":
            return (self.p,) if self.q == self.p else (self.p, self.q)
        return None

    def split(self, z, order=2):
        """Radial parts at gradients ``z`` (..., 2).

        Returns ``(base, extra)``, each a tuple ``(value, d1, d2)`` of the
        profile ``phi(t)``, ``t = |z|^2``, and its first two t-derivatives.
        ``extra`` is ``None`` for kinds without a coefficient term.
        """
        if self.kind in _EVAL_ONLY:
            raise IntegrandError(f"kind {self.kind!r} supports evaluation only")
        z = np.asarray(z, dtype=float)
        t = z[..., 0] ** 2 + z[..., 1] ** 2
        h = t + self._shift() ** 2
        if order >= 2 and self._shift() == 0 and np.any(t == 0):
            raise DegeneracyError("Hessian undefined at z = 0 when mu = 0")

        def profile(exponents):
            val = np.zeros_like(t)
            d1 = np.zeros_like(t)
            d2 = np.zeros_like(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                for s in exponents:
                    val += h ** (s / 2)
                    if order >= 1:
                        d1 += np.where(h > 0, 0.5 * s * h ** (s / 2 - 1), 0.0 if s > 2 else np.inf)
                    if order >= 2:
                        d2 += 0.5 * s * (0.5 * s - 1) * h ** (s / 2 - 2)
            return val, d1, d2

        b = self._base_exponent()
        base = profile((b,)) if b is not None else profile(())
        ex = self._extra_exponent()
        extra = profile(ex) if ex is not None else None
        return base, extra


def integrand_from_dict(d):
    """Build an :class:`Integrand` from its JSON description."""
    d = dict(d)
    unknown = set(d) - {"kind", "p", "q", "mu", "L", "alpha", "coefficient"}
    if unknown:
        raise IntegrandError(f"unknown integrand fields: {sorted(unknown)}")
    return Integrand(
        kind=d["kind"],
        p=float(d.get("p", 2.0)),
        q=None if d.get("q") is None else float(d["q"]),
        mu=float(d.get("mu", 0.0)),
        L=float(d.get("L", 1.0)),
        alpha=float(d.get("alpha", 1.0)),
        coefficient=d.get("coefficient"),
    )


def _coef(I, x):
    return I.coefficient(np.asarray(x, dtype=float))


def eval_F(I, x, z):
    """Density value(s) ``F(x, z)``; ``x`` and ``z`` broadcast over leading axes."""
    z = np.asarray(z, dtype=float)
    if I.kind in _EVAL_ONLY:
        c = _coef(I, x)
        nz = np.hypot(z[..., 0], z[..., 1])
        if I.kind == "exponential":
            return np.exp(c * nz**I.p)
        return c * nz * np.log1p(nz)
    (bv, _, _), extra = I.split(z, order=0)
    out = bv
    if extra is not None:
        out = out + _coef(I, x) * extra[0]
    return out


def derivatives(I, x, z):
    """Gradient (..., 2) and Hessian (..., 2, 2) of ``z -> F(x, z)``."""
    z = np.asarray(z, dtype=float)
    (_, b1, b2), extra = I.split(z, order=2)
    d1, d2 = b1, b2
    if extra is not None:
        c = _coef(I, x)
        d1 = d1 + c * extra[1]
        d2 = d2 + c * extra[2]
    grad = 2 * d1[..., None] * z
    hess = 2 * d1[..., None, None] * np.eye(2) + 4 * d2[..., None, None] * (
        z[..., :, None] * z[..., None, :]
    )
    return grad, hess


@dataclass(frozen=True)
class EigenPair:
    lambda_min: np.ndarray
    lambda_max: np.ndarray


def eigenpair(I, x, z):
    z = np.asarray(z, dtype=float)
    t = z[..., 0] ** 2 + z[..., 1] ** 2
    if I._shift() == 0 and np.any(t == 0):
        raise DegeneracyError("eigenvalues undefined at z = 0 when mu = 0")
    (_, b1, b2), extra = I.split(z, order=2)
    d1, d2 = b1, b2
    if extra is not None:
        c = _coef(I, x)
        d1 = d1 + c * extra[1]
        d2 = d2 + c * extra[2]
    across = 2 * d1
    along = 2 * d1 + 4 * t * d2
    return EigenPair(np.minimum(across, along), np.maximum(across, along))


def ellipticity_ratio(I, x, z):
    """``Lambda / lambda`` of the Hessian in z."""
    e = eigenpair(I, x, z)
    return e.lambda_max / e.lambda_min


def nonlocal_ratio(I, points, z):
    """``sup_x Lambda(x, z) / inf_x lambda(x, z)`` over sample points of a ball.

    Returns ``math.inf`` when the infimum vanishes.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) == 0:
        raise IntegrandError("nonlocal ratio needs at least one sample point")
    zz = np.broadcast_to(np.asarray(z, dtype=float), pts.shape)
    e = eigenpair(I, pts, zz)
    lo = float(np.min(e.lambda_min))
    hi = float(np.max(e.lambda_max))
    return math.inf if lo <= 0 else hi / lo


def ball_sample_points(center, radius, n_radial=12, n_angular=32):
    """Deterministic polar grid of points in a closed ball (origin included)."""
    rho = radius * np.arange(0, n_radial + 1) / n_radial
    th = 2 * np.pi * np.arange(n_angular) / n_angular
    pts = np.stack(
        [np.outer(rho, np.cos(th)).ravel(), np.outer(rho, np.sin(th)).ravel()], axis=1
    )
    return np.unique(np.round(pts, 15), axis=0) + np.asarray(center, dtype=float)


# ---------------------------------------------------------------------------
# exponents and audits


def structural_exponent_s(n, p, q, eps=1e-3):
    """Exponent of the gradient bound for autonomous (p, q)-growth minimizers.

    Requires ``q/p < 1 + 2/(n-1)``.  For ``n = 3`` and ``q > p`` any number
    above ``q/(2p - q)`` works; ``(1 + eps)`` times it is returned.
    """
    n = int(n)
    if n < 2:
        raise IntegrandError("dimension n must be >= 2")
    if not 1 < p <= q:
        raise IntegrandError(f"need 1 < p <= q, got p={p}, q={q}")
    bound = 1 + 2 / (n - 1)
    if q / p >= bound:
        raise IntegrandError(f"q/p = {q / p:.6g} violates q/p < 1 + 2/(n-1) = {bound:.6g}")
    if n == 3:
        return 1.0 if q == p else (1 + eps) * q / (2 * p - q)
    return 2 * q / ((n + 1) * p - (n - 1) * q)


def _sample(sample_count, seed):
    sob = qmc.Halton(d=7, scramble=True, seed=seed)
    u = sob.random(sample_count)
    # x, y uniform in the unit disc; z with |z| log-spread over [1e-2, 1e2]; unit xi
    rx, tx = np.sqrt(u[:, 0]), 2 * np.pi * u[:, 1]
    ry, ty = np.sqrt(u[:, 2]), 2 * np.pi * u[:, 3]
    nz, tz = 10 ** (4 * u[:, 4] - 2), 2 * np.pi * u[:, 5]
    txi = 2 * np.pi * u[:, 6]
    x = np.stack([rx * np.cos(tx), rx * np.sin(tx)], 1)
    y = np.stack([ry * np.cos(ty), ry * np.sin(ty)], 1)
    z = np.stack([nz * np.cos(tz), nz * np.sin(tz)], 1)
    xi = np.stack([np.cos(txi), np.sin(txi)], 1)
    return x, y, z, xi


def assumption_audit(I, sample_count=2048, n=2, seed=0):
    """Worst relative margins of the five structural assumptions over a sample.

    Each margin is ``(allowed - actual) / scale``; negative entries are
    violations.  Also reports the empirical Hölder constant in ``x`` and the
    two exponent-gap flags.
    """
    if sample_count < 1:
        raise IntegrandError("sample_count must be >= 1")
    x, y, z, xi = _sample(sample_count, seed)
    p, q, L, a = I.p, I.q, I.L, I.alpha
    H = z[:, 0] ** 2 + z[:, 1] ** 2 + I.mu**2
    F = eval_F(I, x, z)
    grad_x, hess_x = derivatives(I, x, z)
    grad_y, _ = derivatives(I, y, z)
    lower = H ** (p / 2)
    upper = L * H ** (q / 2) + L * H ** (p / 2)
    quad = np.einsum("ni,nij,nj->n", xi, hess_x, xi)
    hess_lo = H ** ((p - 2) / 2)
    hess_norm = np.linalg.norm(hess_x, ord=2, axis=(1, 2))
    hess_hi = L * H ** ((q - 2) / 2) + L * H ** ((p - 2) / 2)
    dist = np.linalg.norm(x - y, axis=1)
    holder_scale = dist**a * (H ** ((q - 1) / 2) + H ** ((p - 1) / 2))
    diff = np.linalg.norm(grad_x - grad_y, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        holder_emp = np.where(holder_scale > 0, diff / holder_scale, 0.0)

    margins = {
        "growth_lower": float(np.min((F - lower) / lower)),
        "growth_upper": float(np.min((upper - F) / upper)),
        "hessian_lower": float(np.min((quad - hess_lo) / hess_lo)),
        "hessian_upper": float(np.min((hess_hi - hess_norm) / hess_hi)),
        "holder_x": float(np.min((L - holder_emp) / L)),
    }
    return {
        "sample_count": int(sample_count),
        "seed": int(seed),
        "margins": margins,
        "holder_constant": float(np.max(holder_emp)),
        "flags": {
            "q_over_p_below_1_plus_alpha_over_n": bool(q / p < 1 + a / n),
            "q_over_p_below_1_plus_2_over_n_minus_1": bool(q / p < 1 + 2 / (n - 1)),
        },
        "ok": {k: v >= -1e-12 for k, v in margins.items()},
    }
