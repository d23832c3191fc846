"""Dirichlet minimisation of discrete functionals ``∫ F(x, Dw) + f w`` over P1 fields."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import FeFunction, Mesh
from .integrand import Integrand

__all__ = [
    "Problem",
    "Solution",
    "SolverError",
    "assemble",
    "energy",
    "minimize",
    "verify_first_order",
    "mu_schedule",
]

log = logging.getLogger(__name__)

ARMIJO = 1e-4


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Problem:
    mesh: Mesh
    integrand: Integrand
    boundary: np.ndarray
    source: FeFunction | None = None

    def __post_init__(self):
        b = np.asarray(self.boundary, dtype=float)
        if b.shape != (len(self.mesh.boundary_nodes),):
            raise SolverError(
                f"boundary needs {len(self.mesh.boundary_nodes)} values, got shape {b.shape}"
            )
        if not np.all(np.isfinite(b)):
            raise SolverError("boundary values must be finite")
        object.__setattr__(self, "boundary", b)
        if self.source is not None and self.source.mesh is not self.mesh:
            raise SolverError("source must live on the problem mesh")

    @classmethod
    def from_function(cls, mesh, integrand, g, source=None):
        """Problem with boundary values ``g(nodes)`` on the boundary nodes."""
        vals = np.asarray(g(mesh.nodes[mesh.boundary_nodes]), dtype=float)
        if source is not None and not isinstance(source, FeFunction):
            source = FeFunction.interpolate(mesh, source)
        return cls(mesh, integrand, vals, source)

    def with_integrand(self, integrand):
        return Problem(self.mesh, integrand, self.boundary, self.source)

    def extend(self, interior):
        """Full nodal vector from interior values and the Dirichlet data."""
        w = np.empty(self.mesh.num_nodes)
        w[self.mesh.boundary_nodes] = self.boundary
        w[self.mesh.free_nodes] = interior
        return w


@dataclass(frozen=True, eq=False)
class Solution:
    u: FeFunction
    energy: float
    grad_norm: float
    iterations: int
    mu_path: list
    converged: bool
    tol: float
    mu_final: float
    log: list = field(default_factory=list, repr=False)
    fallback_steps: int = 0
    problem: object = field(default=None, repr=False)

    @property
    def integrand(self):
        return self.problem.integrand

    def to_dict(self):
        return {
            "values": self.u.values.tolist(),
            "energy": self.energy,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "mu_path": list(self.mu_path),
            "mu_final": self.mu_final,
            "converged": self.converged,
            "tol": self.tol,
            "fallback_steps": self.fallback_steps,
            "iteration_log": self.log,
        }


class _Assembler:
    """Per-problem cache: coefficient integrals, sparsity pattern, mass matrix."""

    def __init__(self, problem: Problem):
        self.problem = problem
        mesh = problem.mesh
        I = problem.integrand
        self.area = mesh.areas
        self.coef_int = mesh.integrate_elementwise(I.coefficient, order=4)
        self.G = mesh.basis_gradients
        tri = mesh.triangles
        self.rows = np.repeat(tri, 3, axis=1).ravel()
        self.cols = np.tile(tri, (1, 3)).ravel()
        self.free = mesh.free_nodes
        if problem.source is not None:
            self.load = _mass_matrix(mesh) @ problem.source.values
        else:
            self.load = np.zeros(mesh.num_nodes)

    def evaluate(self, integrand, w, order=2):
        mesh = self.problem.mesh
        z = np.einsum("mkd,mk->md", self.G, w[mesh.triangles])
        base, extra = integrand.split(z, order=order)
        e = self.area * base[0]
        if extra is not None:
            e = e + self.coef_int * extra[0]
        E = float(np.sum(e) + self.load @ w)
        if order == 0:
            return E, None, None
        c1 = self.area * base[1]
        if extra is not None:
            c1 = c1 + self.coef_int * extra[1]
        flux = 2 * c1[:, None] * z  # element integral of dF/dz
        g_loc = np.einsum("mkd,md->mk", self.G, flux)
        grad = np.bincount(mesh.triangles.ravel(), g_loc.ravel(), minlength=mesh.num_nodes)
        grad += self.load
        if order == 1:
            return E, grad, None
        c2 = self.area * base[2]
        if extra is not None:
            c2 = c2 + self.coef_int * extra[2]
        K = 2 * c1[:, None, None] * np.eye(2) + 4 * c2[:, None, None] * (z[:, :, None] * z[:, None, :])
        blocks = np.einsum("mad,mde,mbe->mab", self.G, K, self.G)
        n = mesh.num_nodes
        H = sp.csr_matrix((blocks.ravel(), (self.rows, self.cols)), shape=(n, n))
        return E, grad, H


def _mass_matrix(mesh):
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    blocks = mesh.areas[:, None, None] * local
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.num_nodes
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def stiffness_matrix(mesh, weights=None):
    """P1 stiffness matrix for ``∫ weights * Du·Dv`` (per-element weights)."""
    G = mesh.basis_gradients
    w = mesh.areas if weights is None else mesh.areas * weights
    blocks = w[:, None, None] * np.einsum("mad,mbd->mab", G, G)
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.num_nodes
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def assemble(P, w, integrand=None):
    """Energy, free-node gradient and free-node Hessian at ``w``.

    ``w`` is an :class:`FeFunction` or a full nodal vector.
    """
    vals = w.values if isinstance(w, FeFunction) else np.asarray(w, dtype=float)
    asm = _Assembler(P)
    E, g, H = asm.evaluate(integrand or P.integrand, vals, order=2)
    f = asm.free
    return E, g[f], H[f][:, f]


def energy(P, w, integrand=None):
    vals = w.values if isinstance(w, FeFunction) else np.asarray(w, dtype=float)
    return _Assembler(P).evaluate(integrand or P.integrand, vals, order=0)[0]


def mu_schedule(mu_floor=1e-6):
    """Continuation values ``max(mu_floor, 2^-k)``, k = 0, 1, ... down to the floor."""
    out, k = [], 0
    while True:
        mu = max(mu_floor, 2.0**-k)
        out.append(mu)
        if mu <= mu_floor:
            return out
        k += 1


def harmonic_extension(P):
    mesh = P.mesh
    K = stiffness_matrix(mesh)
    f, b = mesh.free_nodes, mesh.boundary_nodes
    w = np.zeros(mesh.num_nodes)
    w[b] = P.boundary
    if len(f):
        rhs = -(K[f][:, b] @ P.boundary)
        w[f] = spla.spsolve(K[f][:, f].tocsc(), rhs)
    return w


def _newton(asm, integrand, w, tol, max_iter, history, stage_mu):
    f = asm.free
    fallbacks = 0
    E, g, H = asm.evaluate(integrand, w)
    gf = g[f]
    gnorm = float(np.linalg.norm(gf))
    it = 0
    while gnorm > tol and it < max_iter:
        it += 1
        Hff = H[f][:, f].tocsc()
        kind = "newton"
        try:
            d = spla.spsolve(Hff, -gf)
            slope = float(gf @ d)
            if not np.all(np.isfinite(d)) or slope >= 0:
                raise np.linalg.LinAlgError("not a descent direction")
        except (RuntimeError, np.linalg.LinAlgError):
            d = -gf
            slope = float(gf @ d)
            kind = "gradient"
            fallbacks += 1
        step = 1.0
        accepted = False
        scale = max(1.0, abs(E))
        for _ in range(60):
            trial = w.copy()
            trial[f] += step * d
            E_t = asm.evaluate(integrand, trial, order=0)[0]
            if np.isfinite(E_t) and E_t <= E + ARMIJO * step * slope:
                accepted = True
                break
            if abs(step * slope) < 1e-13 * scale:
                # energy differences below round-off: fall back on gradient decrease
                g_t = asm.evaluate(integrand, trial, order=1)[1][f]
                if np.linalg.norm(g_t) < gnorm:
                    accepted = True
                break
            step *= 0.5
        if not accepted:
            history.append({"mu": stage_mu, "iteration": it, "status": "line-search-failed",
                            "energy": E, "grad_norm": gnorm})
            break
        w = trial
        E, g, H = asm.evaluate(integrand, w)
        gf = g[f]
        gnorm = float(np.linalg.norm(gf))
        history.append({"mu": stage_mu, "iteration": it, "step": step, "direction": kind,
                        "energy": E, "grad_norm": gnorm})
    return w, E, gnorm, it, fallbacks


def minimize(P, tol=1e-8, max_iter=100, mu_floor=1e-6, init="harmonic", stage_tol=None):
    """Damped Newton minimisation of the discrete energy of ``P``.

    Integrands with ``mu = 0`` (and a mu-dependent density) are solved along
    the continuation ``mu_schedule(mu_floor)``; intermediate stages stop at
    ``stage_tol`` (default ``max(tol, 1e-6)``).  ``init`` is ``"harmonic"``,
    ``"zero"`` (zero interior values) or a full nodal vector.
    """
    asm = _Assembler(P)
    mesh = P.mesh
    if isinstance(init, str):
        if init == "harmonic":
            w = harmonic_extension(P)
        elif init == "zero":
            w = P.extend(np.zeros(len(mesh.free_nodes)))
        else:
            raise SolverError(f"unknown init {init!r}")
    else:
        w = np.asarray(init, dtype=float).copy()
        w[mesh.boundary_nodes] = P.boundary
    I = P.integrand
    if I.mu == 0 and I._shift() == 0:
        mus = mu_schedule(mu_floor)
    else:
        mus = [I.mu]
    stage_tol = max(tol, 1e-6) if stage_tol is None else stage_tol
    history, total_it, fallbacks = [], 0, 0
    gnorm = np.inf
    for k, mu in enumerate(mus):
        last = k == len(mus) - 1
        Ik = I.with_mu(mu) if mu != I.mu else I
        w, E, gnorm, it, fb = _newton(asm, Ik, w, tol if last else stage_tol,
                                      max_iter, history, mu)
        total_it += it
        fallbacks += fb
    converged = bool(gnorm <= tol)
    if not converged:
        log.warning("minimize: not converged (grad_norm=%.3e > tol=%.1e)", gnorm, tol)
    E_true = asm.evaluate(I, w, order=0)[0]
    return Solution(
        u=FeFunction(mesh, w),
        energy=E_true,
        grad_norm=float(gnorm),
        iterations=total_it,
        mu_path=[float(m) for m in mus],
        converged=converged,
        tol=float(tol),
        mu_final=float(mus[-1]),
        log=history,
        fallback_steps=fallbacks,
        problem=P,
    )


def weak_residual(P, S, integrand=None):
    """Full nodal vector of ``∫ ∂_z F(x, Du)·Dφ_i + f φ_i`` for every hat ``φ_i``."""
    if integrand is None:
        I = P.integrand
        integrand = I.with_mu(S.mu_final) if I._shift() == 0 else I
    return _Assembler(P).evaluate(integrand, S.u.values, order=1)[1]


def verify_first_order(P, S, probe_count=16, seed=0):
    """Largest weak-form residual over random interior test functions.

    Each probe is ``φ = Σ c_i φ_i`` over interior hats with Gaussian ``c``; the
    residual is normalised by the Euclidean norm of ``c``.  Returns
    ``(max_residual, flagged)`` where ``flagged`` marks a non-converged input.
    """
    g = weak_residual(P, S)[P.mesh.free_nodes]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(probe_count)):
        c = rng.standard_normal(len(g))
        worst = max(worst, abs(float(g @ c)) / float(np.linalg.norm(c)))
    return worst, not S.converged
