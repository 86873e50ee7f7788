"""First-order invariant-domain-preserving update on a discrete graph.

The update is

    m_i / tau (U^L_i - U_i) = sum_j -(f(U_j) - f(U_i)) . c_ij + d_ij (U_j - U_i),

with the graph viscosity ``d_ij`` built from an upper bound on the local
maximum wave speed. Equivalently ``U^L_i`` is a convex combination of ``U_i``
and the bar states ``Ubar_ij`` whenever ``1 + 2 tau d_ii / m_i >= 0``.

Edge arrays are indexed like ``graph.col``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .exceptions import CFLViolation
from .mesh import DiscreteGraph
from .thermo import SpeciesTable

DEFAULT_CFL = 0.5
LAMBDA_ITERATIONS = 5


class NodeState(NamedTuple):
    rho: np.ndarray
    vel: np.ndarray
    p: np.ndarray
    gamma: np.ndarray
    eps: np.ndarray
    s: np.ndarray
    flux: np.ndarray


def node_state(U, species: SpeciesTable) -> NodeState:
    U = np.ascontiguousarray(U, dtype=float)
    d = U.shape[1] - species.n_species - 1
    return NodeState(*K.node_state(U, species.n_species, d, K.species_array(species)))


def pair_viscosity(U, graph: DiscreteGraph, species: SpeciesTable, state=None):
    """``d_ij = max(lam(U_i, U_j, n_ij) |c_ij|, lam(U_j, U_i, n_ji) |c_ji|)`` per edge."""
    st = node_state(U, species) if state is None else state
    return K.viscosity(graph.row, graph.col, graph.mirror, graph.c,
                       st.rho, st.vel, st.p, st.gamma, LAMBDA_ITERATIONS)


def diagonal(d, graph: DiscreteGraph):
    """``d_ii = -sum_{j != i} d_ij``."""
    return -graph.row_sum(d)


def bar_states(U, graph: DiscreteGraph, species: SpeciesTable, d=None, state=None):
    """``Ubar_ij = (U_i + U_j)/2 - (f(U_j) - f(U_i)) . c_ij / (2 d_ij)`` per edge."""
    U = np.ascontiguousarray(U, dtype=float)
    st = node_state(U, species) if state is None else state
    d = pair_viscosity(U, graph, species, st) if d is None else d
    return K.bar_states(U, st.flux, d, graph.row, graph.col, graph.c)


def cfl_limit(d_ii, graph: DiscreteGraph):
    """Largest tau with ``1 + 2 tau d_ii / m_i >= 0`` at every node."""
    with np.errstate(divide="ignore"):
        return float(np.min(graph.lumped / (2.0 * np.abs(d_ii))))


def max_dt(U, graph: DiscreteGraph, species: SpeciesTable, cfl=DEFAULT_CFL, d=None):
    """Stage step ``tau_n = CFL * min_i m_i / (2 |d_ii|)``."""
    if not 0 < cfl <= 1:
        raise ValueError("CFL must lie in (0, 1]")
    d = pair_viscosity(U, graph, species) if d is None else d
    return cfl * cfl_limit(diagonal(d, graph), graph)


def _fused(U, graph, species, tau, st, d):
    return K.low_order(U, st.flux, d, st.s, graph.row_ptr, graph.col, graph.mirror, graph.c,
                       graph.c_diag, graph.lumped, float(tau), species.n_species,
                       K.species_array(species))


def low_order_update(U, graph: DiscreteGraph, species: SpeciesTable, tau,
                     d=None, state=None, check_cfl=True):
    U = np.ascontiguousarray(U, dtype=float)
    st = node_state(U, species) if state is None else state
    d = pair_viscosity(U, graph, species, st) if d is None else d
    if check_cfl:
        limit = cfl_limit(diagonal(d, graph), graph)
        if tau > limit * (1.0 + 1e-14):
            raise CFLViolation(f"tau={tau:.6e} exceeds the CFL limit {limit:.6e}")
    return _fused(U, graph, species, tau, st, d)[0]


def low_order_with_bounds(U, graph: DiscreteGraph, species: SpeciesTable, tau, d, state):
    """``(U^L, LocalBounds)`` from a single pass over the edges; no CFL check."""
    UL, *b = _fused(U, graph, species, tau, state, d)
    return UL, LocalBounds(*b)


@dataclass
class LocalBounds:
    """Per-node bounds; ``rho_min``/``rho_max`` are per species."""

    rho_min: np.ndarray
    rho_max: np.ndarray
    eps_min: np.ndarray
    s_min: np.ndarray
    s_mid_max: np.ndarray  # largest s((U_i + U_j)/2), used by the relaxation

    def copy(self):
        return LocalBounds(*(np.array(a) for a in
                             (self.rho_min, self.rho_max, self.eps_min, self.s_min, self.s_mid_max)))


def local_bounds(U, graph: DiscreteGraph, species: SpeciesTable, d=None, state=None) -> LocalBounds:
    """Partial density and internal energy bounds over bar states and stencil
    values; entropy bound over stencil values only."""
    U = np.ascontiguousarray(U, dtype=float)
    st = node_state(U, species) if state is None else state
    d = pair_viscosity(U, graph, species, st) if d is None else d
    return low_order_with_bounds(U, graph, species, 0.0, d, st)[1]
