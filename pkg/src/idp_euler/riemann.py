"""Exact Riemann solver for the multi-species Euler equations.

Mass fractions are frozen on each side of the contact, so each side behaves
as a single polytropic gas with its own ``gamma(Y)``. The star pressure solves
``phi(p) = f_L(p) + f_R(p) + v_R - v_L = 0``; ``phi`` is increasing and concave,
which the bracketing iteration below relies on.

All routines broadcast over leading array axes so thousands of independent
Riemann problems can be solved at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import thermo
from .exceptions import VacuumError
from .thermo import PrimitiveState, SpeciesTable


@dataclass(frozen=True)
class SideData:
    """One side of a Riemann problem projected on a direction."""

    rho: np.ndarray
    v: np.ndarray
    p: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        for name in ("rho", "v", "p", "gamma"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.rho <= 0) or np.any(self.p <= 0) or np.any(self.gamma <= 1):
            raise ValueError("side data needs rho > 0, p > 0 and gamma > 1")

    @property
    def c(self):
        return np.sqrt(self.gamma * self.p / self.rho)

    @property
    def A(self):
        return 2.0 / ((self.gamma + 1.0) * self.rho)

    @property
    def B(self):
        return (self.gamma - 1.0) / (self.gamma + 1.0) * self.p

    @classmethod
    def from_state(cls, u, n, species: SpeciesTable):
        """Side data of conserved state(s) ``u`` projected on unit vector(s) ``n``."""
        u = np.asarray(u, dtype=float)
        rho = thermo.density(u, species)
        Y = thermo.mass_fractions(u, species)
        v = np.sum(thermo.velocity(u, species) * n, axis=-1)
        return cls(rho=rho, v=v, p=thermo.pressure(u, species),
                   gamma=thermo.mixture_gamma(Y, species))


def f_side(p, side: SideData):
    """Velocity jump across the wave connecting ``side`` to pressure ``p``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("pressure must be nonnegative")
    return _f(p, side.rho, side.p, side.gamma)


def _f(p, rho, pz, g):
    shock = p > pz
    A = 2.0 / ((g + 1.0) * rho)
    B = (g - 1.0) / (g + 1.0) * pz
    c = np.sqrt(g * pz / rho)
    with np.errstate(invalid="ignore", divide="ignore"):
        fs = (p - pz) * np.sqrt(A / (p + B))
        fr = 2.0 * c / (g - 1.0) * ((p / pz) ** ((g - 1.0) / (2.0 * g)) - 1.0)
    return np.where(shock, fs, fr)


def _df(p, rho, pz, g):
    shock = p > pz
    A = 2.0 / ((g + 1.0) * rho)
    B = (g - 1.0) / (g + 1.0) * pz
    c = np.sqrt(g * pz / rho)
    with np.errstate(invalid="ignore", divide="ignore"):
        ds = np.sqrt(A / (p + B)) * (1.0 - 0.5 * (p - pz) / (p + B))
        dr = c / (g * pz) * (p / pz) ** (-(g + 1.0) / (2.0 * g))
    return np.where(shock, ds, dr)


def phi(p, left: SideData, right: SideData):
    return f_side(p, left) + f_side(p, right) + right.v - left.v


@dataclass(frozen=True)
class StarState:
    p_star: np.ndarray
    v_star: np.ndarray
    rho_star_L: np.ndarray
    rho_star_R: np.ndarray
    residual: np.ndarray
    iterations: int


def _bracket(left: SideData, right: SideData):
    """Initial ``(p_lo, phi_lo, p_hi, phi_hi)`` with phi_lo <= 0 <= phi_hi."""
    L = (left.rho, left.p, left.gamma)
    R = (right.rho, right.p, right.gamma)
    dv = right.v - left.v

    def ph(p):
        return _f(p, *L) + _f(p, *R) + dv

    p_min = np.minimum(left.p, right.p)
    p_hi = np.maximum(left.p, right.p)
    phi_hi = ph(p_hi)
    for _ in range(2000):
        low = phi_hi < 0
        if not np.any(low):
            break
        p_hi = np.where(low, 2.0 * p_hi, p_hi)
        phi_hi = np.where(low, ph(p_hi), phi_hi)
    phi_min = ph(p_min)
    below = phi_min <= 0
    p_lo = np.where(below, p_min, 0.0)
    phi_lo = np.where(below, phi_min, ph(np.zeros_like(p_min)))
    return ph, p_lo, phi_lo, p_hi, phi_hi


def _iterate(left, right, p_lo, phi_lo, p_hi, phi_hi, ph, n_iter, tol, shift=0.0):
    """Shrink the bracket. phi is concave, so Newton from the top end lands
    below the root and the secant lands above it."""
    L = (left.rho, left.p, left.gamma)
    R = (right.rho, right.p, right.gamma)
    it = 0
    for it in range(1, n_iter + 1):
        done = (phi_hi == 0) | (p_hi - p_lo <= tol * p_hi)
        if np.all(done):
            it -= 1
            break
        dphi = _df(p_hi, *L) + _df(p_hi, *R)
        p_new = np.clip(p_hi - phi_hi / dphi, p_lo, p_hi)
        phi_new = ph(p_new)
        lower = (phi_new <= 0) & ~done
        p_lo = np.where(lower, p_new, p_lo)
        phi_lo = np.where(lower, phi_new, phi_lo)
        upper = (phi_new > 0) & ~done
        p_hi = np.where(upper, p_new, p_hi)
        phi_hi = np.where(upper, phi_new, phi_hi)

        with np.errstate(invalid="ignore", divide="ignore"):
            p_sec = p_lo - phi_lo * (p_hi - p_lo) / (phi_hi - phi_lo) + shift * p_hi
        bad = ~np.isfinite(p_sec) | (p_sec <= p_lo) | (p_sec >= p_hi)
        p_sec = np.where(bad, 0.5 * (p_lo + p_hi), p_sec)
        phi_sec = ph(p_sec)
        active = ~done & (phi_hi != 0)
        upper = active & (phi_sec >= 0)
        lower = active & (phi_sec < 0)
        p_hi = np.where(upper, p_sec, p_hi)
        phi_hi = np.where(upper, phi_sec, phi_hi)
        p_lo = np.where(lower, p_sec, p_lo)
        phi_lo = np.where(lower, phi_sec, phi_lo)
    return p_lo, phi_lo, p_hi, phi_hi, it


def _star_density(p_star, side: SideData):
    ratio = p_star / side.p
    mu = (side.gamma - 1.0) / (side.gamma + 1.0)
    shock = side.rho * (ratio + mu) / (mu * ratio + 1.0)
    fan = side.rho * ratio ** (1.0 / side.gamma)
    return np.where(p_star > side.p, shock, fan)


def solve_star(left: SideData, right: SideData, tol=1e-12, max_iter=100) -> StarState:
    """Star pressure, velocity and densities of the Riemann problem.

    Raises
    ------
    VacuumError
        If the data generates a vacuum (``phi(0) >= 0``).
    """
    zero = np.zeros(np.broadcast(left.p, right.p).shape)
    if np.any(phi(zero, left, right) >= 0):
        raise VacuumError("Riemann data generates a vacuum")
    ph, p_lo, phi_lo, p_hi, phi_hi = _bracket(left, right)
    p_lo, phi_lo, p_hi, phi_hi, it = _iterate(
        left, right, p_lo, phi_lo, p_hi, phi_hi, ph, max_iter, tol)
    use_hi = np.abs(phi_hi) <= np.abs(phi_lo)
    p_star = np.where(use_hi, p_hi, p_lo)
    residual = np.abs(np.where(use_hi, phi_hi, phi_lo))
    fl = f_side(p_star, left)
    fr = f_side(p_star, right)
    v_star = 0.5 * (left.v - fl + right.v + fr)
    return StarState(p_star=p_star, v_star=v_star,
                     rho_star_L=_star_density(p_star, left),
                     rho_star_R=_star_density(p_star, right),
                     residual=residual, iterations=it)


def _outer_speeds(p_star, left: SideData, right: SideData):
    """Left-most and right-most wave speeds; both increase with ``p_star``."""
    gl, gr = left.gamma, right.gamma
    lam_l = left.v - left.c * np.sqrt(
        1.0 + (gl + 1.0) / (2.0 * gl) * np.maximum((p_star - left.p) / left.p, 0.0))
    lam_r = right.v + right.c * np.sqrt(
        1.0 + (gr + 1.0) / (2.0 * gr) * np.maximum((p_star - right.p) / right.p, 0.0))
    return lam_l, lam_r


def wave_speeds(star: StarState, left: SideData, right: SideData):
    """``(lambda_L^-, lambda_L^+, lambda_R^-, lambda_R^+)``."""
    p = star.p_star
    lm_l, lp_r = _outer_speeds(p, left, right)
    kl = (left.gamma - 1.0) / (2.0 * left.gamma)
    kr = (right.gamma - 1.0) / (2.0 * right.gamma)
    tail_l = left.v - f_side(p, left) - left.c * (p / left.p) ** kl
    tail_r = right.v + f_side(p, right) + right.c * (p / right.p) ** kr
    lp_l = np.where(p < left.p, tail_l, lm_l)
    lm_r = np.where(p < right.p, tail_r, lp_r)
    return lm_l, lp_l, lm_r, lp_r


def _speed_from_pressure(p, left, right):
    lam_l, lam_r = _outer_speeds(p, left, right)
    return np.maximum(np.abs(lam_l), np.abs(lam_r))


def lambda_max(u_left, u_right, n, species: SpeciesTable):
    """Exact maximum wave speed of the projected Riemann problem."""
    left = SideData.from_state(u_left, n, species)
    right = SideData.from_state(u_right, n, species)
    star = solve_star(left, right)
    return _speed_from_pressure(star.p_star, left, right)


def lambda_max_upper_sides(left: SideData, right: SideData, n_iter=5):
    """Guaranteed upper bound on the maximum wave speed.

    A few bracket iterations give a pressure ``p_hi >= p*``; the outer wave
    speeds increase with pressure, so evaluating them at ``p_hi`` bounds the
    exact speed from above. Vacuum data falls back to ``p = 0``, which gives
    the outer rarefaction heads.
    """
    ph, p_lo, phi_lo, p_hi, phi_hi = _bracket(left, right)
    vacuum = phi_lo > 0
    p_lo, phi_lo, p_hi, phi_hi, _ = _iterate(
        left, right, p_lo, phi_lo, p_hi, phi_hi, ph, n_iter, 1e-10, shift=0.5e-10)
    p_hat = np.where(vacuum, 0.0, p_hi)
    lam = _speed_from_pressure(p_hat, left, right)
    # p_hi is only an exact root when phi vanishes there
    return np.where(phi_hi == 0, lam, lam * (1.0 + 1e-12))


def lambda_max_upper(u_left, u_right, n, species: SpeciesTable, n_iter=5):
    left = SideData.from_state(u_left, n, species)
    right = SideData.from_state(u_right, n, species)
    return lambda_max_upper_sides(left, right, n_iter)


@dataclass(frozen=True)
class RiemannFan:
    """Solved Riemann problem, ready to be sampled at ``xi = x / t``."""

    left: SideData
    right: SideData
    star: StarState
    speeds: tuple
    n: np.ndarray
    Y_left: np.ndarray
    Y_right: np.ndarray
    vel_left: np.ndarray
    vel_right: np.ndarray

    @classmethod
    def from_states(cls, u_left, u_right, n, species: SpeciesTable):
        u_left = np.asarray(u_left, dtype=float)
        u_right = np.asarray(u_right, dtype=float)
        n = np.asarray(n, dtype=float)
        left = SideData.from_state(u_left, n, species)
        right = SideData.from_state(u_right, n, species)
        star = solve_star(left, right)
        return cls(left=left, right=right, star=star,
                   speeds=wave_speeds(star, left, right), n=n,
                   Y_left=thermo.mass_fractions(u_left, species),
                   Y_right=thermo.mass_fractions(u_right, species),
                   vel_left=thermo.velocity(u_left, species),
                   vel_right=thermo.velocity(u_right, species))


def _sample_side(xi, side: SideData, p_star, rho_star, tail, sign):
    """rho, v, p on one side of the contact (sign=+1 left, -1 right)."""
    g = side.gamma
    c = side.c
    base = 2.0 / (g + 1.0) + sign * (g - 1.0) / ((g + 1.0) * c) * (side.v - xi)
    rho_fan = side.rho * np.maximum(base, 0.0) ** (2.0 / (g - 1.0))
    p_fan = side.p / side.rho ** g * rho_fan ** g
    v_fan = side.v + sign * (-2.0 * c / (g - 1.0) * (base - 1.0))
    head = side.v - sign * c * np.sqrt(
        1.0 + (g + 1.0) / (2.0 * g) * np.maximum((p_star - side.p) / side.p, 0.0))
    v_star_side = side.v - sign * _f(p_star, side.rho, side.p, g)
    if sign > 0:
        outside = xi < head
        in_fan = (xi < tail) & (p_star < side.p)
    else:
        outside = xi >= head
        in_fan = (xi >= tail) & (p_star < side.p)
    rho = np.where(outside, side.rho, np.where(in_fan, rho_fan, rho_star))
    v = np.where(outside, side.v, np.where(in_fan, v_fan, v_star_side))
    p = np.where(outside, side.p, np.where(in_fan, p_fan, p_star))
    return rho, v, p


def evaluate_fan(fan: RiemannFan, xi) -> PrimitiveState:
    """Sample the self-similar solution.

    ``xi`` may carry one trailing axis more than the fan (many samples per
    problem); the fan's parameters are broadcast accordingly.
    """
    xi = np.asarray(xi, dtype=float)
    base_ndim = np.ndim(fan.star.p_star)
    extra = xi.ndim - base_ndim

    def b(x):
        x = np.asarray(x)
        return x.reshape(x.shape + (1,) * extra) if extra > 0 else x

    def bs(side):
        return SideData(rho=b(side.rho), v=b(side.v), p=b(side.p), gamma=b(side.gamma))

    left, right = bs(fan.left), bs(fan.right)
    p_star = b(fan.star.p_star)
    v_star = b(fan.star.v_star)
    _, lp_l, lm_r, _ = (b(s) for s in fan.speeds)
    rl, vl, pl = _sample_side(xi, left, p_star, b(fan.star.rho_star_L), lp_l, +1)
    rr, vr, pr = _sample_side(xi, right, p_star, b(fan.star.rho_star_R), lm_r, -1)
    on_left = xi < v_star
    rho = np.where(on_left, rl, rr)
    vn = np.where(on_left, vl, vr)
    p = np.where(on_left, pl, pr)

    def bv(x):
        x = np.asarray(x)
        if extra > 0:
            x = np.expand_dims(x, axis=tuple(range(x.ndim - 1, x.ndim - 1 + extra)))
        return x

    n = bv(fan.n)
    vel_l, vel_r = bv(fan.vel_left), bv(fan.vel_right)
    tan_l = vel_l - np.sum(vel_l * n, axis=-1, keepdims=True) * n
    tan_r = vel_r - np.sum(vel_r * n, axis=-1, keepdims=True) * n
    side = on_left[..., None]
    v = np.where(side, tan_l, tan_r) + vn[..., None] * n
    Y = np.where(side, bv(fan.Y_left), bv(fan.Y_right))
    return PrimitiveState(Y=Y, rho=rho, v=v, p=p)


def fan_conserved(fan: RiemannFan, xi, species: SpeciesTable):
    """Conserved state of the fan at ``xi``."""
    return thermo.primitive_to_conserved(evaluate_fan(fan, xi), species)


def riemann_average(fan: RiemannFan, lam_hat, t, species: SpeciesTable,
                    epsabs=1e-12, epsrel=1e-11):
    """Space average of a single Riemann solution over ``[-lam_hat t, lam_hat t]``.

    Computed by adaptive quadrature of the exact fan with the wave speeds as
    break points, so it serves as an independent check of closed-form
    averages.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    speeds = np.array([float(s) for s in fan.speeds] + [float(fan.star.v_star)])
    exact = float(lambda_max_from_fan(fan))
    if lam_hat < exact * (1.0 - 1e-12):
        raise ValueError(f"lam_hat={lam_hat} is below the maximum wave speed {exact}")
    edges = np.concatenate(([-lam_hat], np.sort(speeds[np.abs(speeds) < lam_hat]), [lam_hat]))

    def g(xi):
        return fan_conserved(fan, np.array([xi]), species)[0]

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            val, _ = integrate.quad_vec(g, a, b, epsabs=epsabs, epsrel=epsrel)
            total = total + val
    return total / (2.0 * lam_hat)


def lambda_max_from_fan(fan: RiemannFan):
    return _speed_from_pressure(fan.star.p_star, fan.left, fan.right)
