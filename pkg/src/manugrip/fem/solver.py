"""Implicit Euler time stepping by projected Newton on the incremental potential."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix, diags
from scipy.sparse.linalg import spsolve

from .contact import ContactScene
from .energy import InvariantViolation, MaterialParams, elastic_terms
from .tetmesh import TetMesh


class StepFailure(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class SimConfig:
    dt_s: float = 0.05
    dhat_rel: float = 1e-3
    eps_rel: float = 1e-6
    newton_tol_m_s: float = 1e-2
    max_newton: int = 100
    gravity_m_s2: tuple = (0.0, 0.0, -9.81)
    kappa_scale: float = 0.1
    kappa_max_factor: float = 1e4
    armijo_c: float = 1e-4
    snapshot_every: int = 10

    def __post_init__(self):
        if not self.dt_s > 0:
            raise ValueError("dt must be positive")
        if not (self.dhat_rel > 0 and self.eps_rel > 0 and self.newton_tol_m_s > 0):
            raise ValueError("dhat, eps and the Newton tolerance must be positive")
        if self.max_newton < 1:
            raise ValueError("max_newton must be at least 1")


@dataclass(frozen=True)
class SimState:
    x: np.ndarray
    v: np.ndarray
    t: float
    scripted_x: np.ndarray
    separated: frozenset = frozenset()
    pieces: int = 1
    kappa: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.x)):
            raise InvariantViolation("non-finite positions")


@dataclass
class StepReport:
    iterations: int = 0
    energies: list = field(default_factory=list)   # objective after each accepted iterate
    line_search: list = field(default_factory=list)  # (E before, E after) per Newton iteration
    penalty_raises: int = 0
    min_distance: float = np.inf
    snapped: bool = False
    substeps: int = 1


def scale_of(mesh: TetMesh) -> float:
    return mesh.diagonal()


def initial_kappa(mesh: TetMesh, material: MaterialParams, config: SimConfig) -> float:
    tri = mesh.rest[mesh.surface]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1).mean()
    dhat = config.dhat_rel * scale_of(mesh)
    return config.kappa_scale * material.youngs_pa * area / dhat


def initial_state(mesh: TetMesh, material: MaterialParams, bodies, config: SimConfig,
                  x=None, v=None, t=0.0) -> SimState:
    x = mesh.rest.copy() if x is None else np.asarray(x, dtype=float)
    v = np.zeros_like(x) if v is None else np.asarray(v, dtype=float)
    xs = scripted_positions(bodies, t)
    return SimState(x, v, float(t), xs, frozenset(), 1, initial_kappa(mesh, material, config))


def scripted_positions(bodies, t):
    if not bodies:
        return np.zeros((0, 3))
    return np.concatenate([b.world_vertices(t) for b in bodies])


class IncrementalPotential:
    """E(X) = 1/2 |x - x_tilde|_M^2 + h^2 (Psi(x) + kappa B(X)) + w/2 |x_s - x_s*|^2."""

    def __init__(self, mesh, material, scene: ContactScene, mass, x_tilde, xs_target, h, kappa, dhat, w_track):
        self.mesh, self.material, self.scene = mesh, material, scene
        self.mass, self.x_tilde, self.xs_target = mass, x_tilde, xs_target
        self.h2, self.kappa, self.dhat, self.w = h * h, kappa, dhat, w_track
        self.n = mesh.n_vertices

    def energy(self, X) -> float:
        x, xs = X[: self.n], X[self.n:]
        dx = x - self.x_tilde
        e = 0.5 * float((self.mass[:, None] * dx * dx).sum())
        e_el, _, _ = elastic_terms(x, self.mesh, self.material, hessian=False)
        try:
            e_b = self.scene.barrier_energy(X, self.dhat)
        except InvariantViolation:
            return np.inf
        e += self.h2 * (e_el + self.kappa * e_b)
        if len(xs):
            e += 0.5 * self.w * float(((xs - self.xs_target) ** 2).sum())
        return e

    def gradient(self, X):
        return self._terms(X, False)[1]

    def _terms(self, X, hessian):
        x, xs = X[: self.n], X[self.n:]
        pr = self.scene.pairs(X, self.dhat)
        e_el, g_el, H_el = elastic_terms(x, self.mesh, self.material, hessian=hessian)
        g = np.zeros_like(X)
        g[: self.n] = self.mass[:, None] * (x - self.x_tilde) + self.h2 * g_el
        g += self.h2 * self.kappa * self.scene.barrier_gradient(X, self.dhat, pr)
        if len(xs):
            g[self.n:] += self.w * (xs - self.xs_target)
        if not hessian:
            return None, g, None
        diag = np.concatenate([np.repeat(self.mass, 3), np.full(3 * len(xs), self.w)])
        H = diags(diag).tocsr() + self.h2 * _embed(H_el, X.size)
        H = H + (self.h2 * self.kappa) * self.scene.barrier_hessian(X, self.dhat, pr)
        return None, g, H.tocsc()

    def gradient_and_hessian(self, X):
        _, g, H = self._terms(X, True)
        return g, H


def _embed(H, size):
    H = H.tocoo()
    return coo_matrix((H.data, (H.row, H.col)), shape=(size, size)).tocsr()


def simulate_step(state: SimState, mesh: TetMesh, material: MaterialParams, bodies, config: SimConfig,
                  scene: ContactScene | None = None, dt: float | None = None, pinned=None):
    """One implicit Euler step. Returns ``(new_state, StepReport)``.

    ``pinned`` is an optional boolean mask of target vertices held in place.
    """
    h = config.dt_s if dt is None else float(dt)
    if not h > 0:
        raise ValueError("dt must be positive")
    scene = ContactScene(mesh, bodies) if scene is None else scene
    n = mesh.n_vertices
    diag_len = scale_of(mesh)
    dhat = config.dhat_rel * diag_len
    mass = mesh.lumped_mass(material.density_kg_m3)
    g_vec = np.asarray(config.gravity_m_s2, dtype=float)
    x_tilde = state.x + h * state.v + h * h * g_vec
    free = np.ones(3 * (n + len(state.scripted_x)))
    if pinned is not None and np.any(pinned):
        x_tilde[pinned] = state.x[pinned]
        free[: 3 * n] = np.repeat(~np.asarray(pinned, dtype=bool), 3)
    D = diags(free)
    for b in bodies:
        if not b.covers(state.t, state.t + h):
            raise StepFailure(f"trajectory of body {b.body_id} does not cover t={state.t + h!r}",
                              {"t": state.t + h})
    xs_target = scripted_positions(bodies, state.t + h)

    X_prev = np.concatenate([state.x, state.scripted_x])
    pr0 = scene.pairs(X_prev, dhat)
    d_start = float(pr0.d.min()) if len(pr0) else np.inf
    X_goal = np.concatenate([x_tilde, xs_target])
    report = StepReport()

    kappa = state.kappa if state.kappa > 0 else initial_kappa(mesh, material, config)
    # tool lag below the Newton displacement tolerance is indistinguishable from convergence
    track_tol = config.newton_tol_m_s * h
    w = 1e3 * float(mass.max() + h * h * material.youngs_pa * diag_len)
    ip = IncrementalPotential(mesh, material, scene, mass, x_tilde, xs_target, h, kappa, dhat, w)
    # warm start: the lowest-energy collision-free guess
    starts = [X_prev]
    for guess in (X_goal, np.concatenate([state.x, xs_target])):
        if scene.max_step(X_prev, guess - X_prev) >= 1.0:
            starts.append(guess)
    energies = [ip.energy(S) for S in starts]
    k = int(np.argmin(energies))
    X, E = starts[k].copy(), energies[k]
    if not np.isfinite(E):
        raise StepFailure("start of step is not intersection-free", {"t": state.t})
    report.energies.append(E)

    converged = False
    force_step = False
    for it in range(1, config.max_newton + 1):
        g, H = ip.gradient_and_hessian(X)
        if free.min() == 0.0:
            g = g * free.reshape(g.shape)
            H = (D @ H @ D + diags(1.0 - free)).tocsc()
        try:
            p = spsolve(H, -g.reshape(-1)).reshape(X.shape)
        except RuntimeError as exc:
            raise StepFailure(f"linear solve failed at t={state.t + h!r}: {exc}", {"iteration": it}) from exc
        if not np.all(np.isfinite(p)):
            raise StepFailure(f"non-finite Newton direction at t={state.t + h!r}", {"iteration": it})
        report.iterations = it
        residual = float(np.abs(p).max()) / h
        if residual < config.newton_tol_m_s and not force_step:
            dev = float(np.abs(X[n:] - xs_target).max(initial=0.0))
            if dev <= track_tol or report.penalty_raises >= 8:
                converged = True
                break
            # stiffen the tracking term and take at least one step on the new objective
            w *= 10.0
            report.penalty_raises += 1
            ip.w = w
            E = ip.energy(X)
            report.energies.append(E)
            force_step = True
            continue
        force_step = False
        slope = float((g * p).sum())
        alpha = scene.max_step(X, p)
        E_new = np.inf
        while alpha > 1e-14:
            X_try = X + alpha * p
            E_new = ip.energy(X_try)
            if E_new <= E + config.armijo_c * alpha * slope:
                break
            alpha *= 0.5
        else:
            raise StepFailure(f"line search underflow at t={state.t + h!r}",
                              {"iteration": it, "energy": E, "residual_m_s": residual})
        report.line_search.append((E, E_new))
        X, E = X_try, E_new
        report.energies.append(E)
    if not converged:
        raise StepFailure(f"Newton did not converge in {config.max_newton} iterations at t={state.t + h!r}",
                          {"residual_m_s": residual, "energy": E})

    # with no pins and no active pairs only inertia sees rigid translation, so its optimum is closed form:
    # sum m (x - x_tilde) = 0, which is also linear momentum balance
    if (pinned is None or not np.any(pinned)) and not len(scene.pairs(X, dhat)):
        shift = np.zeros_like(X)
        shift[:n] = (mass[:, None] * (x_tilde - X[:n])).sum(axis=0) / mass.sum()
        if scene.max_step(X, shift) >= 1.0 and not len(scene.pairs(X + shift, dhat)):
            X = X + shift

    # pin scripted vertices exactly when the remaining move is collision-free
    snap = X.copy()
    snap[n:] = xs_target
    if len(xs_target) and scene.max_step(X, snap - X) >= 1.0:
        X = snap
        report.snapped = True
    report.min_distance = scene.min_distance(X)
    if not report.min_distance > 0:
        raise StepFailure(f"accepted state intersects at t={state.t + h!r}", {"min_distance": report.min_distance})

    x_new = X[:n]
    v_new = (x_new - state.x) / h
    # stiffen contact while gaps are small and still closing
    pr = scene.pairs(X, dhat)
    d_end = float(pr.d.min()) if len(pr) else np.inf
    if d_end < 0.1 * dhat and d_end < d_start and kappa < config.kappa_max_factor * initial_kappa(mesh, material, config):
        kappa *= 2.0
    return replace(state, x=x_new, v=v_new, t=state.t + h, scripted_x=X[n:].copy(), kappa=kappa), report
