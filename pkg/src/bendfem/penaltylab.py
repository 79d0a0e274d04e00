"""Finite-dimensional testbed for the abstract penalty error bound and its
quadrature-perturbation (Strang-type) variant.

Instances live in R^n with dense symmetric forms, so best approximations,
capture constants, and coercivity constants are all computable exactly via
eigendecompositions.  The sweeps draw seeded random instances and assert the
bounds instance by instance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

_TOL = 1e-9


class CoercivityError(RuntimeError):
    """A form required to be coercive is not."""


@dataclass
class AbstractInstance:
    """One penalty problem: forms a, l, b_i on R^n, trial basis X, penalty
    weights eps, and the target u toward which the penalties pull."""

    A: np.ndarray
    L: np.ndarray
    Bs: list
    X: np.ndarray
    eps: np.ndarray
    u: np.ndarray

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return len(self.Bs)

    def a_eps(self):
        M = self.A.copy()
        for e, B in zip(self.eps, self.Bs):
            M += B / e
        return M

    def energy_norm(self, v, M=None):
        M = self.a_eps() if M is None else M
        return float(np.sqrt(max(v @ M @ v, 0.0)))


def solve_constrained(A, L, U0, u0):
    """Minimize (1/2) v^T A v - L^T v over the affine set u0 + range(U0)."""
    u0 = np.asarray(u0, dtype=float)
    if U0 is None or U0.size == 0:
        return u0.copy()
    Q = la.orth(np.asarray(U0, dtype=float))
    K = Q.T @ A @ Q
    if Q.shape[1] and np.linalg.cond(K) > 1e12:
        raise CoercivityError("constrained form is singular on the subspace")
    c = la.solve(K, Q.T @ (L - A @ u0), assume_a="sym")
    return u0 + Q @ c


def solve_penalized(inst: AbstractInstance):
    """Solution of the penalized variational problem on span(X)."""
    X = inst.X
    K = X.T @ inst.a_eps() @ X
    if np.min(la.eigvalsh(K)) <= 0:
        raise CoercivityError("penalized form is not positive definite on X")
    rhs = X.T @ (inst.L + sum(B @ inst.u / e for e, B in zip(inst.eps, inst.Bs)))
    return X @ la.solve(K, rhs, assume_a="sym")


def best_approximation(inst: AbstractInstance, M=None):
    """argmin over span(X) of the a_eps-distance to u."""
    M = inst.a_eps() if M is None else M
    X = inst.X
    c = la.solve(X.T @ M @ X, X.T @ (M @ inst.u), assume_a="sym")
    return X @ c


def capture_constants(inst: AbstractInstance, tol=1e-8):
    """Smallest aggregate constants with |a(u,v) - l(v)| <= sum c_i |v|_{b_i}
    on span(X).

    Uses the single-aggregate reduction (all c_i equal), which is exact for
    m=1 and valid for m>1.  Returns (c array, feasible flag); infeasible means
    the residual functional does not vanish on the joint kernel of the b_i
    restricted to X.
    """
    X = inst.X
    r = X.T @ (inst.A @ inst.u - inst.L)
    Bsum = sum(X.T @ B @ X for B in inst.Bs)
    w, V = la.eigh(Bsum)
    scale = max(w[-1], 1.0)
    null = w <= tol * scale
    r_modes = V.T @ r
    r_norm = np.linalg.norm(r)
    if r_norm > 0 and np.linalg.norm(r_modes[null]) > tol * max(r_norm, 1.0):
        return np.zeros(inst.m), False
    pos = ~null
    c2 = float(np.sum(r_modes[pos] ** 2 / w[pos])) if np.any(pos) else 0.0
    return np.full(inst.m, np.sqrt(max(c2, 0.0))), True


def check_penalty_bound(inst: AbstractInstance):
    """Verify  |u - u_eps|_{a_eps}^2 <= 3 inf_v ( |u - v|_{a_eps}^2
    + sum eps_i c_i^2 )  with exactly computed infimum and constants."""
    cs, feasible = capture_constants(inst)
    if not feasible:
        return {"feasible": False, "holds": None, "lhs": None, "rhs": None,
                "constants": cs}
    M = inst.a_eps()
    u_eps = solve_penalized(inst)
    e = inst.u - u_eps
    lhs = float(e @ M @ e)
    v = best_approximation(inst, M)
    d = inst.u - v
    best = float(d @ M @ d)
    rhs = 3.0 * (best + float(np.sum(inst.eps * cs**2)))
    holds = lhs <= rhs * (1.0 + _TOL) + 1e-12
    return {"feasible": True, "holds": bool(holds), "lhs": lhs, "rhs": rhs,
            "constants": cs, "best_approx_sq": best}


def galerkin_residual(inst: AbstractInstance):
    """max over the X basis of |a_eps(u - u_eps, w) - (a(u, w) - l(w))|."""
    u_eps = solve_penalized(inst)
    lhs = inst.X.T @ (inst.a_eps() @ (inst.u - u_eps))
    rhs = inst.X.T @ (inst.A @ inst.u - inst.L)
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class Perturbation:
    """Inexactly evaluated forms standing in for quadrature errors."""

    A: np.ndarray
    L: np.ndarray
    Bs: list


def solve_perturbed(inst: AbstractInstance, pert: Perturbation):
    X = inst.X
    M = pert.A.copy()
    for e, B in zip(inst.eps, pert.Bs):
        M += B / e
    K = X.T @ M @ X
    if np.min(la.eigvalsh(K)) <= 0:
        raise CoercivityError("perturbed penalized form lost coercivity on X")
    rhs = X.T @ (pert.L + sum(B @ inst.u / e for e, B in zip(inst.eps, pert.Bs)))
    return X @ la.solve(K, rhs, assume_a="sym")


def _min_gen_eig(M, G):
    """Smallest eigenvalue of M w.r.t. the SPD Gram matrix G."""
    return float(la.eigh(M, G, eigvals_only=True)[0])


def check_perturbed_bound(inst: AbstractInstance, pert: Perturbation):
    """Verify the perturbed error bound with all factors instantiated from the
    proof chain.

    With w~ = v - u~ the chain is
        |u - u~|_{a_eps} <= |u - v|_{a_eps} + K * [ |u - v|_{a_eps}
            + (|(a~-a)(v,w~)| + sum (1/eps_i)|(b~_i-b_i)(u-v,w~)|
               + |(l-l~)(w~)|) / (sqrt(alpha) |w~|)
            + sqrt(sum eps_i c_i^2) ],
        K = |a|/alpha~ + 1 + sum d_i/(eps_i alpha~),
    where d_i bounds |b_i - b~_i| relative to the H-norm, alpha/alpha~ are the
    coercivity constants of a + sum b_i and its perturbation on X, and the
    last bracket term carries the capture residual of the target u (the
    original chain omits it; it vanishes only for zero capture constants).
    Requires eps <= 1 and a~ positive semi-definite on X.
    """
    if np.any(inst.eps > 1.0):
        raise ValueError("the chain requires eps <= 1 componentwise")
    X = inst.X
    G = X.T @ X
    cs, feasible = capture_constants(inst)
    if not feasible:
        return {"feasible": False, "holds": None}
    norm_a = float(np.max(np.abs(la.eigvalsh(inst.A))))
    alpha = _min_gen_eig(X.T @ (inst.A + sum(inst.Bs)) @ X, G)
    alpha_t = _min_gen_eig(X.T @ (pert.A + sum(pert.Bs)) @ X, G)
    if alpha <= 0 or alpha_t <= 0:
        raise CoercivityError("coercivity constant is not positive on X")
    if np.min(la.eigvalsh(X.T @ pert.A @ X)) < -1e-10:
        raise CoercivityError("perturbed energy form is indefinite on X")
    d = [float(np.max(np.abs(la.eigh(X.T @ (B - Bt) @ X, G, eigvals_only=True))))
         for B, Bt in zip(inst.Bs, pert.Bs)]
    K = norm_a / alpha_t + 1.0 + float(np.sum(np.asarray(d) / (inst.eps * alpha_t)))

    M = inst.a_eps()
    u_t = solve_perturbed(inst, pert)
    v = best_approximation(inst, M)
    w = v - u_t
    dv = inst.u - v
    lhs = inst.energy_norm(inst.u - u_t, M)
    approx = inst.energy_norm(dv, M)
    w_norm = float(np.linalg.norm(w))
    if w_norm > 0:
        pert_num = abs(v @ (pert.A - inst.A) @ w)
        pert_num += sum(abs(dv @ (Bt - B) @ w) / e
                        for e, B, Bt in zip(inst.eps, inst.Bs, pert.Bs))
        pert_num += abs((inst.L - pert.L) @ w)
        pert_term = pert_num / (np.sqrt(alpha) * w_norm)
    else:
        pert_term = 0.0
    capture_term = float(np.sqrt(np.sum(inst.eps * cs**2)))
    rhs = approx + K * (approx + pert_term + capture_term)
    holds = lhs <= rhs * (1.0 + _TOL) + 1e-12
    return {"feasible": True, "holds": bool(holds), "lhs": lhs, "rhs": rhs,
            "factor": K, "bracket": approx + pert_term + capture_term,
            "alpha": alpha, "alpha_tilde": alpha_t}


# ---------------------------------------------------------------------------
# seeded instance generation and sweeps
# ---------------------------------------------------------------------------

def _random_psd(rng, n, rank):
    G = rng.standard_normal((n, rank))
    return (G @ G.T) / n


def random_instance(rng, n_max=12, m_max=3):
    """One random instance whose constrained problem and penalized problem are
    both well posed; capture feasibility is left to the caller to test."""
    for _ in range(50):
        n = int(rng.integers(4, n_max + 1))
        m = int(rng.integers(1, m_max + 1))
        k = int(rng.integers(1, n + 1))
        A = _random_psd(rng, n, n if rng.random() < 0.7 else n - 1)
        L = rng.standard_normal(n)
        Bs = [_random_psd(rng, n, n if rng.random() < 0.5 else int(rng.integers(1, n + 1)))
              for _ in range(m)]
        X = la.orth(rng.standard_normal((n, k)))
        d = int(rng.integers(0, n + 1))
        U0 = rng.standard_normal((n, d)) if d else None
        u0 = rng.standard_normal(n)
        eps = 10.0 ** rng.uniform(-4, 0, m)
        try:
            if U0 is not None:
                Q = la.orth(U0)
                if Q.shape[1] and np.min(la.eigvalsh(Q.T @ A @ Q)) < 1e-8:
                    continue
            u = solve_constrained(A, L, U0, u0)
        except CoercivityError:
            continue
        inst = AbstractInstance(A=A, L=L, Bs=Bs, X=X, eps=eps, u=u)
        if np.min(la.eigvalsh(X.T @ (A + sum(Bs)) @ X)) < 1e-10:
            continue
        return inst
    raise RuntimeError("failed to generate a well-posed instance")


def random_perturbation(rng, inst: AbstractInstance, scale=1e-3) -> Perturbation:
    """Symmetric perturbations of all forms; the energy and penalty forms are
    re-projected onto the PSD cone so the chain's assumptions hold."""

    def sym_noise(M):
        S = rng.standard_normal(M.shape)
        return 0.5 * (S + S.T) * scale * max(np.max(np.abs(M)), 1.0)

    def psd_clip(M):
        w, V = la.eigh(M)
        return (V * np.maximum(w, 0.0)) @ V.T

    At = psd_clip(inst.A + sym_noise(inst.A))
    Bts = [psd_clip(B + sym_noise(B)) for B in inst.Bs]
    Lt = inst.L + scale * rng.standard_normal(inst.n)
    return Perturbation(A=At, L=Lt, Bs=Bts)


def sweep_penalty_bound(seed, count, n_max=12, m_max=3):
    """Check the penalty error bound on ``count`` feasible random instances."""
    rng = np.random.default_rng(seed)
    feasible = violations = generated = 0
    while feasible < count:
        inst = random_instance(rng, n_max=n_max, m_max=m_max)
        generated += 1
        res = check_penalty_bound(inst)
        if not res["feasible"]:
            continue
        feasible += 1
        if not res["holds"]:
            violations += 1
    return {"generated": generated, "feasible": feasible,
            "violations": violations, "skipped": generated - feasible}


def sweep_perturbed_bound(seed, count, n_max=8, m_max=3, scale=1e-3):
    """Check the perturbed chain on ``count`` feasible random instances."""
    rng = np.random.default_rng(seed)
    feasible = violations = generated = 0
    while feasible < count:
        inst = random_instance(rng, n_max=n_max, m_max=m_max)
        generated += 1
        pert = random_perturbation(rng, inst, scale=scale)
        try:
            res = check_perturbed_bound(inst, pert)
        except CoercivityError:
            continue
        if not res["feasible"]:
            continue
        feasible += 1
        if not res["holds"]:
            violations += 1
    return {"generated": generated, "feasible": feasible,
            "violations": violations, "skipped": generated - feasible}
