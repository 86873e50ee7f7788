"""Convex limiting of the high-order update onto local bounds.

The limited update is

    U_i^{n+1} = sum_{j != i} omega_i (U^L_i + l_ij P_ij),
    P_ij = tau / (m_i omega_i) A_ij,  omega_i = 1 / card(I(i) minus i),

where ``A_ij`` is the difference between high- and low-order fluxes. The
limiter ``l_ij`` keeps every ``U^L_i + l_ij P_ij`` inside the local set cut
out by concave functionals, limited one after the other in the order
partial densities, internal energy, entropy ``rho (s - s_min)``.
"""
from __future__ import annotations

import numpy as np

from . import _kernels as K
from . import thermo
from .loworder import LocalBounds
from .mesh import DiscreteGraph
from .thermo import SpeciesTable

EPS = K.REGULA_FALSI_EPS


def corrections(U, graph: DiscreteGraph, flux, d, H, delta=None):
    """Antidiffusive edge fluxes ``A_ij``.

    ``delta`` is a per-node flux difference without pair structure (nonzero
    only at boundary nodes of multi-stage schemes); it is spread evenly over
    the stencil.
    """
    U = np.ascontiguousarray(U, dtype=float)
    delta = np.zeros_like(U) if delta is None else np.ascontiguousarray(delta, dtype=float)
    return K.corrections(U, flux, d, np.ascontiguousarray(H), delta,
                         graph.row_ptr, graph.col, graph.c)


def correction_matrix(A, graph: DiscreteGraph, tau):
    """``P_ij = tau / (m_i omega_i) A_ij``."""
    scale = tau * graph.n_neighbors / graph.lumped
    return scale[graph.row, None] * A


def functionals(u, bounds: LocalBounds, species: SpeciesTable, nodes=None):
    """All ``2 n_s + 2`` functionals at states ``u`` checked against node bounds.

    ``nodes`` selects the bound row for each state (defaults to ``arange``).
    Returns an array ``(..., 2 n_s + 2)``; entries are nan where the
    entropy is undefined.
    """
    u = np.asarray(u, dtype=float)
    idx = np.arange(u.shape[0]) if nodes is None else nodes
    ns = species.n_species
    rho_k = u[..., :ns]
    rho = rho_k.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        eps = thermo.internal_energy(u, species, check=False)
        ok = (rho > 0) & (eps > 0)
        safe = np.where(ok[..., None], u, np.nan)
        s = thermo.specific_entropy(safe, species, check=False)
    return np.concatenate([rho_k - bounds.rho_min[idx], bounds.rho_max[idx] - rho_k,
                           (eps - bounds.eps_min[idx])[..., None],
                           (rho * (s - bounds.s_min[idx]))[..., None]], axis=-1)


def limit_pairs(UL, A, graph: DiscreteGraph, tau, bounds: LocalBounds, species: SpeciesTable):
    """Per-direction limiters ``l_ij`` before symmetrization."""
    d = UL.shape[1] - species.n_species - 1
    return K.limit(np.ascontiguousarray(UL), np.ascontiguousarray(A), graph.row_ptr, graph.col,
                   graph.lumped, float(tau), bounds.rho_min, bounds.rho_max, bounds.eps_min,
                   bounds.s_min, species.n_species, d, K.species_array(species))


def symmetrize(ell, graph: DiscreteGraph):
    return np.minimum(ell, ell[graph.mirror])


def relaxation_radius(graph: DiscreteGraph):
    """``r_h,i = (m_i / |D|)^(1.5 / d)``."""
    return (graph.lumped / graph.measure) ** (1.5 / graph.dim)


def relax_bounds(bounds: LocalBounds, graph: DiscreteGraph, U, species: SpeciesTable) -> LocalBounds:
    """Loosen the bounds by an amount that vanishes faster than the mesh size.

    Densities and internal energy are scaled by ``1 -+ r_h``. The entropy
    bound uses a log-exp form, which still relaxes when ``s_min`` is near
    zero or negative, capped by the spread of midpoint entropies.
    """
    r = relaxation_radius(graph)
    ns = species.n_species
    cv = U[:, :ns] @ species.cv / U[:, :ns].sum(axis=1)
    rmin, rmax, emin, smin = K.relax(bounds.rho_min, bounds.rho_max, bounds.eps_min,
                                     bounds.s_min, bounds.s_mid_max, cv, r)
    return LocalBounds(rmin, rmax, emin, smin, bounds.s_mid_max)


def limited_update(UL, A, ell, graph: DiscreteGraph, tau, species: SpeciesTable):
    """``U^L_i + tau / m_i sum_j l_ij A_ij``; roundoff-negative partial densities are set to zero."""
    return K.apply_limited(np.ascontiguousarray(UL), np.ascontiguousarray(A),
                           np.ascontiguousarray(ell), graph.row_ptr, graph.lumped,
                           float(tau), species.n_species)
