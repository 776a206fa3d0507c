"""Stable Neo-Hookean elasticity and the clamped log barrier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix

from .. import _kernels
from .tetmesh import TetMesh


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    youngs_pa: float
    poisson: float
    density_kg_m3: float = 1000.0
    fracture_stretch: float = 1.1

    def __post_init__(self):
        if not self.youngs_pa > 0:
            raise ValueError("Young's modulus must be positive")
        if not 0.0 <= self.poisson < 0.5:
            raise ValueError("Poisson ratio must be in [0, 0.5)")
        if not self.density_kg_m3 > 0:
            raise ValueError("density must be positive")
        if not self.fracture_stretch > 1.0:
            raise ValueError("fracture stretch threshold must exceed 1")

    @classmethod
    def walnut(cls):
        return cls(300e6, 0.3, 1000.0)

    @classmethod
    def carrot(cls):
        return cls(5e6, 0.45, 1000.0)

    def lame(self):
        E, nu = self.youngs_pa, self.poisson
        return E / (2 * (1 + nu)), E * nu / ((1 + nu) * (1 - 2 * nu))

    def snh_params(self):
        """(mu, lambda, alpha) remapped so the small-strain limit matches (E, nu)."""
        mu, lam = self.lame()
        mu_s = 4.0 / 3.0 * mu
        lam_s = lam + 5.0 / 6.0 * mu
        return mu_s, lam_s, 1.0 + 3.0 * mu_s / (4.0 * lam_s)


def _B(mesh: TetMesh):
    """(m, 4, 3) gradient operator: F = sum_a x_a (x) B_a."""
    Dinv = mesh.Dm_inv
    return np.concatenate([-Dinv.sum(axis=1, keepdims=True), Dinv], axis=1)


def deformation_gradients(x, mesh: TetMesh):
    Ds = np.stack([x[mesh.tets[:, i]] - x[mesh.tets[:, 0]] for i in (1, 2, 3)], axis=2)
    return Ds @ mesh.Dm_inv


def _rest_psi(mu, lam, alpha):
    return 0.5 * lam * (1.0 - alpha) ** 2 - 0.5 * mu * np.log(4.0)


def element_energies(x, mesh: TetMesh, material: MaterialParams):
    mu, lam, alpha = material.snh_params()
    psi, _, _ = _kernels.snh_batch(deformation_gradients(x, mesh), mu, lam, alpha, False)
    return mesh.volumes * (psi - _rest_psi(mu, lam, alpha))


def elastic_energy(x, mesh: TetMesh, material: MaterialParams) -> float:
    return float(element_energies(x, mesh, material).sum())


def _project_psd(H):
    w, V = np.linalg.eigh(H)
    return np.einsum("nij,nj,nkj->nik", V, np.maximum(w, 0.0), V)


def elastic_terms(x, mesh: TetMesh, material: MaterialParams, hessian=True):
    """Energy, gradient (n, 3) and the PSD-projected sparse Hessian (3n x 3n)."""
    mu, lam, alpha = material.snh_params()
    F = deformation_gradients(x, mesh)
    psi, P, dPdF = _kernels.snh_batch(F, mu, lam, alpha, hessian)
    V = mesh.volumes
    B = _B(mesh)
    energy = float((V * (psi - _rest_psi(mu, lam, alpha))).sum())
    g_el = V[:, None, None] * np.einsum("mij,maj->mai", P, B)
    grad = np.zeros_like(x)
    np.add.at(grad, mesh.tets.reshape(-1), g_el.reshape(-1, 3))
    if not hessian:
        return energy, grad, None
    Hf = _project_psd(dPdF).reshape(-1, 3, 3, 3, 3)
    He = V[:, None, None, None, None] * np.einsum("mijkl,maj,mbl->maibk", Hf, B, B)
    dof = (3 * mesh.tets[:, :, None] + np.arange(3)).reshape(-1, 12)
    rows = np.repeat(dof, 12, axis=1).reshape(-1)
    cols = np.tile(dof, (1, 12)).reshape(-1)
    n3 = 3 * len(x)
    H = coo_matrix((He.reshape(-1), (rows, cols)), shape=(n3, n3)).tocsr()
    return energy, grad, H


def von_mises(x, mesh: TetMesh, material: MaterialParams):
    """Per-element von Mises of the Cauchy stress (diagnostic only)."""
    mu, lam, alpha = material.snh_params()
    F = deformation_gradients(x, mesh)
    _, P, _ = _kernels.snh_batch(F, mu, lam, alpha, False)
    J = np.linalg.det(F)
    sigma = P @ np.transpose(F, (0, 2, 1)) / J[:, None, None]
    dev = sigma - np.trace(sigma, axis1=1, axis2=2)[:, None, None] * np.eye(3) / 3.0
    return np.sqrt(1.5 * np.einsum("nij,nij->n", dev, dev))


# barrier -----------------------------------------------------------------------------------

def barrier(d, dhat):
    """b(d) = -(d - dhat)^2 ln(d / dhat) on (0, dhat), zero beyond."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise InvariantViolation("nonpositive contact distance")
    inside = d < dhat
    out = np.zeros_like(d)
    di = d[inside]
    out[inside] = -(di - dhat) ** 2 * np.log(di / dhat)
    return out


def barrier_d1(d, dhat):
    d = np.asarray(d, dtype=float)
    inside = d < dhat
    out = np.zeros_like(d)
    di = d[inside]
    out[inside] = (dhat - di) * (2.0 * np.log(di / dhat) - dhat / di + 1.0)
    return out


def barrier_d2(d, dhat):
    d = np.asarray(d, dtype=float)
    inside = d < dhat
    out = np.zeros_like(d)
    di = d[inside]
    out[inside] = -2.0 * np.log(di / dhat) + (dhat - di) * (3.0 * di + dhat) / (di * di)
    return out
