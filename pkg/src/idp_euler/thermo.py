"""Thermodynamics of a mixture of ideal gases in thermal and mechanical equilibrium.

Conserved states are numpy arrays whose last axis holds
``(alpha_1 rho_1, ..., alpha_ns rho_ns, m_1, ..., m_d, E)``. Every function
broadcasts over the leading axes, so a single state and a whole nodal field
go through the same code path.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .exceptions import InadmissibleStateError


@dataclass(frozen=True)
class SpeciesTable:
    """Per-species heat capacities.

    Parameters
    ----------
    cp, cv : array_like
        Specific heats at constant pressure and volume, one entry per species.
    s_inf : array_like, optional
        Reference entropies. Kept for completeness; the formulas below assume
        zero.
    """

    cp: np.ndarray
    cv: np.ndarray
    s_inf: np.ndarray | None = None

    def __post_init__(self):
        cp = np.atleast_1d(np.asarray(self.cp, dtype=float))
        cv = np.atleast_1d(np.asarray(self.cv, dtype=float))
        if cp.shape != cv.shape or cp.ndim != 1:
            raise ValueError("cp and cv must be 1d sequences of equal length")
        if cp.size < 2:
            raise ValueError("a mixture needs at least two species")
        if np.any(cv <= 0) or np.any(cp <= cv):
            raise ValueError("every species needs cp > cv > 0")
        s_inf = np.zeros_like(cp) if self.s_inf is None else np.asarray(self.s_inf, float)
        object.__setattr__(self, "cp", cp)
        object.__setattr__(self, "cv", cv)
        object.__setattr__(self, "s_inf", s_inf)

    @classmethod
    def from_pairs(cls, pairs):
        """Build from ``[(cp_1, cv_1), (cp_2, cv_2), ...]``."""
        cp, cv = zip(*pairs)
        return cls(cp=cp, cv=cv)

    @property
    def n_species(self) -> int:
        return self.cp.size

    @property
    def gamma(self) -> np.ndarray:
        return self.cp / self.cv

    @property
    def r(self) -> np.ndarray:
        return self.cp - self.cv

    @functools.cached_property
    def table(self) -> np.ndarray:
        """``(3, n_s)`` rows cp, cv, cv log cv + r log r, as the compiled kernels take them."""
        r = self.r
        return np.ascontiguousarray(np.stack([self.cp, self.cv, self.cv * np.log(self.cv) + r * np.log(r)]))


@dataclass
class PrimitiveState:
    """Mass fractions, density, velocity and pressure.

    ``Y`` has shape ``(..., n_species)``, ``v`` has shape ``(..., d)``, ``rho``
    and ``p`` have the leading shape.
    """

    Y: np.ndarray
    rho: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.p = np.asarray(self.p, dtype=float)


def n_dim(u, species: SpeciesTable) -> int:
    d = np.shape(u)[-1] - species.n_species - 1
    if d < 1:
        raise ValueError(f"state of length {np.shape(u)[-1]} is too short")
    return d


def split(u, species: SpeciesTable):
    """Return views ``(partial_densities, momentum, total_energy)``."""
    u = np.asarray(u, dtype=float)
    ns = species.n_species
    return u[..., :ns], u[..., ns:-1], u[..., -1]


def _require(mask, message):
    if np.any(mask):
        raise InadmissibleStateError(message)


def mixture_cv(Y, species: SpeciesTable):
    return np.asarray(Y, dtype=float) @ species.cv


def mixture_cp(Y, species: SpeciesTable):
    return np.asarray(Y, dtype=float) @ species.cp


def mixture_gamma(Y, species: SpeciesTable):
    """Mixture adiabatic index ``sum(Y cp) / sum(Y cv)``."""
    Y = np.asarray(Y, dtype=float)
    cv = Y @ species.cv
    if np.any(cv == 0):
        raise ValueError("mass fractions must not all vanish")
    return (Y @ species.cp) / cv


def density(u, species: SpeciesTable):
    return np.sum(split(u, species)[0], axis=-1)


def mass_fractions(u, species: SpeciesTable, check=True):
    rho_k = split(u, species)[0]
    rho = np.sum(rho_k, axis=-1)
    if check:
        _require(rho <= 0, "mixture density must be positive")
    return rho_k / rho[..., None]


def velocity(u, species: SpeciesTable):
    _, m, _ = split(u, species)
    return m / density(u, species)[..., None]


def internal_energy(u, species: SpeciesTable, check=True):
    """Internal energy per unit volume, ``E - |m|^2 / (2 rho)``."""
    rho_k, m, E = split(u, species)
    rho = np.sum(rho_k, axis=-1)
    if check:
        _require(rho <= 0, "mixture density must be positive")
    return E - 0.5 * np.sum(m * m, axis=-1) / rho


def specific_internal_energy(u, species: SpeciesTable, check=True):
    return internal_energy(u, species, check) / density(u, species)


def pressure(u, species: SpeciesTable, check=True):
    """Bulk mixture pressure ``(gamma(Y) - 1) * eps``."""
    Y = mass_fractions(u, species, check)
    return (mixture_gamma(Y, species) - 1.0) * internal_energy(u, species, check)


def temperature(u, species: SpeciesTable, check=True):
    Y = mass_fractions(u, species, check)
    e = specific_internal_energy(u, species, check)
    if check:
        _require(e <= 0, "internal energy must be positive")
    return e / mixture_cv(Y, species)


def entropy_offset(Y, species: SpeciesTable):
    """The composition-dependent constant ``K(Y)`` of the mixture entropy.

    Vanishing species drop out because they are weighted by ``Y_k``; the
    logarithm never sees ``Y_k`` itself.
    """
    Y = np.asarray(Y, dtype=float)
    cv = Y @ species.cv
    r = Y @ species.r
    g = species.gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = species.cv * (
            np.log(species.cv / cv[..., None])
            + (g - 1.0) * np.log(species.r / r[..., None])
        )
    terms = np.where(Y != 0.0, Y * (terms + species.s_inf), 0.0)
    return np.sum(terms, axis=-1)


def specific_entropy(u, species: SpeciesTable, check=True):
    """Mixture specific entropy ``cv(Y) log(rho e / rho^gamma(Y)) + K(Y)``."""
    rho_k, m, E = split(u, species)
    rho = np.sum(rho_k, axis=-1)
    if check:
        _require(rho <= 0, "mixture density must be positive")
    Y = rho_k / rho[..., None]
    eps = E - 0.5 * np.sum(m * m, axis=-1) / rho
    if check:
        _require(eps <= 0, "internal energy must be positive")
    cv = Y @ species.cv
    gamma = (Y @ species.cp) / cv
    # log(eps / rho^gamma) written to avoid overflow of rho^gamma
    return cv * (np.log(eps) - gamma * np.log(rho)) + entropy_offset(Y, species)


def entropy_density(u, species: SpeciesTable, check=True):
    return density(u, species) * specific_entropy(u, species, check)


def material_decomposition(u, species: SpeciesTable):
    """Material densities, energies and volume fractions of each species.

    Returns
    -------
    rho_k, e_k, alpha_k : ndarray
        Arrays of shape ``(..., n_species)``. Species with zero partial
        density get ``alpha_k = 0``.
    """
    partial = split(u, species)[0]
    T = temperature(u, species)
    p = pressure(u, species)
    e_k = species.cv * T[..., None]
    rho_k = p[..., None] / ((species.gamma - 1.0) * e_k)
    alpha = np.where(partial > 0, partial / rho_k, 0.0)
    return rho_k, e_k, alpha


def material_entropy(rho_k, e_k, species: SpeciesTable):
    """Specific entropy of each pure material, ``cv_k log(e_k / rho_k^(g_k - 1))``."""
    g = species.gamma
    return species.cv * (np.log(e_k) - (g - 1.0) * np.log(rho_k)) + species.s_inf


def primitive_to_conserved(w: PrimitiveState, species: SpeciesTable):
    _require(w.rho <= 0, "density must be positive")
    _require(w.p <= 0, "pressure must be positive")
    if np.any(w.Y < 0):
        raise InadmissibleStateError("mass fractions must be nonnegative")
    gamma = mixture_gamma(w.Y, species)
    rho = w.rho[..., None]
    E = w.p / (gamma - 1.0) + 0.5 * w.rho * np.sum(w.v * w.v, axis=-1)
    return np.concatenate([w.Y * rho, w.v * rho, E[..., None]], axis=-1)


def conserved_to_primitive(u, species: SpeciesTable) -> PrimitiveState:
    rho = density(u, species)
    _require(rho <= 0, "density must be positive")
    p = pressure(u, species)
    _require(p <= 0, "pressure must be positive")
    return PrimitiveState(Y=mass_fractions(u, species), rho=rho,
                          v=velocity(u, species), p=p)


def sound_speed(rho, p, gamma):
    rho = np.asarray(rho, dtype=float)
    p = np.asarray(p, dtype=float)
    _require((rho <= 0) | (p <= 0), "sound speed needs rho > 0 and p > 0")
    return np.sqrt(gamma * p / rho)


def flux(u, species: SpeciesTable, check=False):
    """Physical flux, shape ``(..., n_species + d + 1, d)``."""
    rho_k, m, E = split(u, species)
    rho = np.sum(rho_k, axis=-1)
    v = m / rho[..., None]
    p = pressure(u, species, check)
    d = m.shape[-1]
    f = np.empty(np.shape(u) + (d,))
    ns = species.n_species
    f[..., :ns, :] = rho_k[..., :, None] * v[..., None, :]
    f[..., ns:-1, :] = m[..., :, None] * v[..., None, :]
    f[..., ns:-1, :] += p[..., None, None] * np.eye(d)
    f[..., -1, :] = (E + p)[..., None] * v
    return f


def is_admissible(u, species: SpeciesTable):
    """Nonnegative partial densities, positive density and internal energy."""
    rho_k, m, E = split(u, species)
    rho = np.sum(rho_k, axis=-1)
    ok = np.all(rho_k >= 0, axis=-1) & (rho > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = E - 0.5 * np.sum(m * m, axis=-1) / rho
    return ok & (eps > 0)
