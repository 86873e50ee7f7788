"""Provisional high-order update.

Two changes turn the low-order update into a second-order one: the lumped
mass is corrected towards the consistent mass through ``b_ij = delta_ij -
m_ij / m_j``, and the graph viscosity is scaled by an entropy indicator
``zeta_i`` that is near zero where the flow is smooth.

The indicator measures entropy production of a single-gas surrogate in the
mixture variable ``w = (rho, m, E)`` with pressure ``(gamma_min - 1) rho e``,
where ``gamma_min`` is the smallest mixture index over the stencil.
"""
from __future__ import annotations

import numpy as np

from . import _kernels as K
from .loworder import node_state, pair_viscosity
from .mesh import DiscreteGraph
from .thermo import SpeciesTable


def b_coefficients(graph: DiscreteGraph):
    """``(b_ij on edges, b_ii per node)``."""
    b_edge = -graph.mass_ij / graph.lumped[graph.col]
    b_diag = 1.0 - graph.mass_diag / graph.lumped
    return b_edge, b_diag


def surrogate(w, gamma_min, rho_ref, eps_ref):
    """Surrogate flux, entropy and entropy gradient at mixture states ``w``.

    Parameters
    ----------
    w : array (..., d + 2)
        ``(rho, m, E)``.
    gamma_min : float or array
    rho_ref, eps_ref : float or array
        Density and specific internal energy of the reference node.

    Returns
    -------
    flux : array (..., d + 2, d)
    eta : array (...)
    grad : array (..., d + 2)
    """
    w = np.asarray(w, dtype=float)
    rho, m, E = w[..., 0], w[..., 1:-1], w[..., -1]
    q = rho * E - 0.5 * np.sum(m * m, axis=-1)  # rho^2 e
    if np.any(rho <= 0) or np.any(q <= 0):
        raise ValueError("surrogate needs rho > 0 and e > 0")
    g = 1.0 / (gamma_min + 1.0)
    K_ref = (rho_ref ** 2 * eps_ref) ** g
    eta = q ** g - rho / rho_ref * K_ref
    fac = g * q ** (g - 1.0)
    grad = np.concatenate([(fac * E - K_ref / rho_ref)[..., None],
                           -fac[..., None] * m, (fac * rho)[..., None]], axis=-1)
    v = m / rho[..., None]
    p = (gamma_min - 1.0) * (E - 0.5 * np.sum(m * m, axis=-1) / rho)
    d = m.shape[-1]
    flux = np.empty(w.shape + (d,))
    flux[..., 0, :] = m
    flux[..., 1:-1, :] = v[..., :, None] * m[..., None, :] + p[..., None, None] * np.eye(d)
    flux[..., -1, :] = (E + p)[..., None] * v
    return flux, eta, grad


def entropy_indicator(U, graph: DiscreteGraph, species: SpeciesTable, state=None):
    """``zeta_i = |N_i| / (D_i + m_i/|D| eta(W_i))`` with ``zeta = 0`` when the denominator vanishes.

    The surrogate entropy is shifted to vanish at ``W_i``, so the last
    term of the denominator is zero.
    """
    U = np.ascontiguousarray(U, dtype=float)
    st = node_state(U, species) if state is None else state
    return K.indicator(U, st.rho, st.vel, st.gamma, graph.row_ptr, graph.col, graph.c,
                       graph.c_diag, species.n_species)


def high_order_fluxes(U, graph: DiscreteGraph, species: SpeciesTable, d=None, zeta=None, state=None):
    """Edge fluxes ``H_ij`` (with the mass-matrix correction) and diagonal terms.

    ``m_i / tau (U^H_i - U_i) = sum_j H_ij + diag_i``.
    """
    U = np.ascontiguousarray(U, dtype=float)
    st = node_state(U, species) if state is None else state
    d = pair_viscosity(U, graph, species, st) if d is None else d
    zeta = entropy_indicator(U, graph, species, st) if zeta is None else np.asarray(zeta, float)
    return K.high_fluxes(U, st.flux, d, zeta, graph.row_ptr, graph.col, graph.c,
                         graph.c_diag, graph.mass_ij, graph.lumped)


def high_order_update(U, graph: DiscreteGraph, species: SpeciesTable, tau, d=None, zeta=None):
    """Provisional update; not guaranteed to be admissible."""
    H, diag = high_order_fluxes(U, graph, species, d, zeta)
    return U + tau / graph.lumped[:, None] * (graph.row_sum(H) + diag)
