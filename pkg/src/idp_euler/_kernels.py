"""Compiled loops over nodes and edges of a discrete graph.

These are the hot paths of one forward-Euler stage. State vectors follow the
layout of :mod:`idp_euler.thermo`; species data is passed as one array
``sp`` with rows ``(cp, cv, cv log cv + r log r)`` (see
:func:`species_array`) so the kernels stay free of Python objects. Everything runs
sequentially, so results do not depend on scheduling.
"""
import math

import numpy as np
from numba import njit

ROUNDOFF_CLIP = 64.0 * np.finfo(np.float64).eps
REGULA_FALSI_EPS = 1e-14
# bracket width at which the wave speed iteration stops; p_hi stays an upper bound
LAMBDA_RTOL = 1e-10


def species_array(species):
    return species.table


# ---------------------------------------------------------------- thermo

@njit(cache=True, inline="always")
def _mixture(u, ns, sp):
    """rho, cv(Y), gamma(Y) of a single state."""
    rho = 0.0
    cvm = 0.0
    cpm = 0.0
    for k in range(ns):
        rho += u[k]
        cvm += u[k] * sp[1, k]
        cpm += u[k] * sp[0, k]
    return rho, cvm / rho, cpm / cvm


@njit(cache=True, inline="always")
def _internal(u, ns, d, rho):
    ke = 0.0
    for a in range(d):
        ke += u[ns + a] * u[ns + a]
    return u[ns + d] - 0.5 * ke / rho


@njit(cache=True, inline="always")
def entropy1(u, ns, d, sp):
    """Specific mixture entropy of one state; nan when rho or eps is not positive.

    The composition term is ``sum_k Y_k (cv_k log cv_k + r_k log r_k)
    - cv log cv - r log r``, the expanded form of the offset in
    :func:`idp_euler.thermo.entropy_offset`.
    """
    rho = 0.0
    for k in range(ns):
        rho += u[k]
    if not rho > 0.0:
        return np.nan
    eps = _internal(u, ns, d, rho)
    if not eps > 0.0:
        return np.nan
    cvm = 0.0
    cpm = 0.0
    a = 0.0
    for k in range(ns):
        cvm += u[k] * sp[1, k]
        cpm += u[k] * sp[0, k]
        a += u[k] * sp[2, k]
    gam = cpm / cvm
    cvm /= rho
    rm = cpm / rho - cvm
    K = a / rho - cvm * math.log(cvm) - rm * math.log(rm)
    return cvm * (math.log(eps) - gam * math.log(rho)) + K


@njit(cache=True)
def node_state(U, ns, d, sp):
    """Per-node rho, velocity, p, gamma, eps, s and the physical flux."""
    N, nc = U.shape
    rho = np.empty(N)
    vel = np.empty((N, d))
    p = np.empty(N)
    gam = np.empty(N)
    eps = np.empty(N)
    s = np.empty(N)
    flux = np.empty((N, nc, d))
    for i in range(N):
        u = U[i]
        r, cvm, g = _mixture(u, ns, sp)
        e = _internal(u, ns, d, r)
        rho[i] = r
        gam[i] = g
        eps[i] = e
        p[i] = (g - 1.0) * e
        s[i] = entropy1(u, ns, d, sp)
        for a in range(d):
            vel[i, a] = u[ns + a] / r
        for k in range(ns + d + 1):
            for a in range(d):
                flux[i, k, a] = u[k] * vel[i, a]
        for a in range(d):
            flux[i, ns + a, a] += p[i]
            flux[i, ns + d, a] += p[i] * vel[i, a]
    return rho, vel, p, gam, eps, s, flux


@njit(cache=True)
def extrema(U, ns, d):
    """Min partial density, min internal energy, min density and non-finite count of a field."""
    N, nc = U.shape
    rk = np.inf
    emin = np.inf
    rmin = np.inf
    bad = 0
    for i in range(N):
        rho = 0.0
        for k in range(nc):
            if not math.isfinite(U[i, k]):
                bad += 1
        for k in range(ns):
            rho += U[i, k]
            rk = min(rk, U[i, k])
        rmin = min(rmin, rho)
        emin = min(emin, _internal(U[i], ns, d, rho))
    return rk, emin, rmin, bad


# ------------------------------------------------------- wave speed bound

@njit(cache=True, inline="always")
def _f(p, rho, pz, g):
    if p > pz:
        A = 2.0 / ((g + 1.0) * rho)
        B = (g - 1.0) / (g + 1.0) * pz
        return (p - pz) * math.sqrt(A / (p + B))
    c = math.sqrt(g * pz / rho)
    return 2.0 * c / (g - 1.0) * ((p / pz) ** ((g - 1.0) / (2.0 * g)) - 1.0)


@njit(cache=True)
def _df(p, rho, pz, g):
    if p > pz:
        A = 2.0 / ((g + 1.0) * rho)
        B = (g - 1.0) / (g + 1.0) * pz
        return math.sqrt(A / (p + B)) * (1.0 - 0.5 * (p - pz) / (p + B))
    c = math.sqrt(g * pz / rho)
    return c / (g * pz) * (p / pz) ** (-(g + 1.0) / (2.0 * g))


@njit(cache=True, inline="always")
def _fd(p, rho, pz, g):
    """``f`` and ``f'`` of one side sharing the single power evaluation."""
    if p > pz:
        A = 2.0 / ((g + 1.0) * rho)
        B = (g - 1.0) / (g + 1.0) * pz
        q = math.sqrt(A / (p + B))
        return (p - pz) * q, q * (1.0 - 0.5 * (p - pz) / (p + B))
    c = math.sqrt(g * pz / rho)
    r = (p / pz) ** ((g - 1.0) / (2.0 * g))
    df = c * r / (g * p) if p > 0.0 else np.inf
    return 2.0 * c / (g - 1.0) * (r - 1.0), df


@njit(cache=True)
def lambda_upper(rl, vl, pl, gl, rr, vr, pr, gr, n_iter):
    """Upper bound on the maximum wave speed of one projected Riemann problem.

    Same iteration as :func:`idp_euler.riemann.lambda_max_upper_sides`.
    """
    dv = vr - vl
    p_min = min(pl, pr)
    p_hi = max(pl, pr)
    fl, dl = _fd(p_hi, rl, pl, gl)
    fr, dr = _fd(p_hi, rr, pr, gr)
    phi_hi = fl + fr + dv
    while phi_hi < 0.0:
        p_hi *= 2.0
        fl, dl = _fd(p_hi, rl, pl, gl)
        fr, dr = _fd(p_hi, rr, pr, gr)
        phi_hi = fl + fr + dv
    dphi = dl + dr
    phi_min = _f(p_min, rl, pl, gl) + _f(p_min, rr, pr, gr) + dv
    if phi_min <= 0.0:
        p_lo = p_min
        phi_lo = phi_min
    else:
        p_lo = 0.0
        phi_lo = _f(0.0, rl, pl, gl) + _f(0.0, rr, pr, gr) + dv
    vacuum = phi_lo > 0.0
    if not vacuum:
        for _ in range(n_iter):
            if phi_hi == 0.0 or p_hi - p_lo <= LAMBDA_RTOL * p_hi:
                break
            # phi is concave, so p_hi - p* <= phi_hi / phi'(p_hi)
            if phi_hi <= LAMBDA_RTOL * p_hi * dphi:
                break
            p_new = min(max(p_hi - phi_hi / dphi, p_lo), p_hi)
            fl, dl = _fd(p_new, rl, pl, gl)
            fr, dr = _fd(p_new, rr, pr, gr)
            phi_new = fl + fr + dv
            if phi_new <= 0.0:
                p_lo = p_new
                phi_lo = phi_new
            else:
                p_hi = p_new
                phi_hi = phi_new
                dphi = dl + dr
            if phi_hi == 0.0:
                break
            den = phi_hi - phi_lo
            p_sec = p_lo - phi_lo * (p_hi - p_lo) / den if den != 0.0 else np.nan
            # aim slightly above the secant root so that p_hi moves even when
            # phi is at roundoff level there
            p_sec += 0.5 * LAMBDA_RTOL * p_hi
            if not (p_sec > p_lo and p_sec < p_hi):
                p_sec = 0.5 * (p_lo + p_hi)
            fl, dl = _fd(p_sec, rl, pl, gl)
            fr, dr = _fd(p_sec, rr, pr, gr)
            phi_sec = fl + fr + dv
            if phi_sec >= 0.0:
                p_hi = p_sec
                phi_hi = phi_sec
                dphi = dl + dr
            else:
                p_lo = p_sec
                phi_lo = phi_sec
    p = 0.0 if vacuum else p_hi
    cl = math.sqrt(gl * pl / rl)
    cr = math.sqrt(gr * pr / rr)
    lam_l = vl - cl * math.sqrt(1.0 + (gl + 1.0) / (2.0 * gl) * max((p - pl) / pl, 0.0))
    lam_r = vr + cr * math.sqrt(1.0 + (gr + 1.0) / (2.0 * gr) * max((p - pr) / pr, 0.0))
    lam = max(abs(lam_l), abs(lam_r))
    if phi_hi != 0.0 or vacuum:
        lam *= 1.0 + 1e-12
    return lam


@njit(cache=True)
def _edge_lambda(i, j, cvec, rho, vel, p, gam, n_iter):
    """lambda_hat(U_i, U_j, n) * |c| for the direction of ``cvec``."""
    d = cvec.size
    norm = 0.0
    for a in range(d):
        norm += cvec[a] * cvec[a]
    norm = math.sqrt(norm)
    if norm == 0.0:
        return 0.0
    vi = 0.0
    vj = 0.0
    for a in range(d):
        vi += vel[i, a] * cvec[a] / norm
        vj += vel[j, a] * cvec[a] / norm
    lam = lambda_upper(rho[i], vi, p[i], gam[i], rho[j], vj, p[j], gam[j], n_iter)
    return lam * norm


@njit(cache=True)
def viscosity(row, col, mirror, c, rho, vel, p, gam, n_iter):
    """Low-order graph viscosity on every edge; d[e] == d[mirror[e]] exactly."""
    E = row.size
    d = c.shape[1]
    out = np.empty(E)
    for e in range(E):
        i = row[e]
        j = col[e]
        if j < i:
            continue
        m = mirror[e]
        a = _edge_lambda(i, j, c[e], rho, vel, p, gam, n_iter)
        antisym = True
        for k in range(d):
            if c[m, k] != -c[e, k]:
                antisym = False
        b = a if antisym else _edge_lambda(j, i, c[m], rho, vel, p, gam, n_iter)
        v = max(a, b)
        out[e] = v
        out[m] = v
    return out


# -------------------------------------------------------------- low order

@njit(cache=True)
def bar_states(U, flux, dL, row, col, c):
    E = row.size
    nc = U.shape[1]
    d = c.shape[1]
    out = np.empty((E, nc))
    for e in range(E):
        i = row[e]
        j = col[e]
        for k in range(nc):
            if dL[e] > 0.0:
                df = 0.0
                for a in range(d):
                    df += (flux[j, k, a] - flux[i, k, a]) * c[e, a]
                out[e, k] = 0.5 * (U[i, k] + U[j, k]) - df / (2.0 * dL[e])
            else:
                out[e, k] = U[i, k]
    return out


@njit(cache=True)
def low_order(U, flux, dL, s, row_ptr, col, mirror, c, c_diag, lumped, tau, ns, sp):
    """Low-order update in flux form together with the local bounds.

    Returns ``UL``, partial density min/max ``(N, ns)``, eps min (bar
    states and stencil values), s min (stencil values) and the largest
    entropy of the midpoints ``(U_i + U_j) / 2``.
    """
    N, nc = U.shape
    d = c.shape[1]
    E = col.size
    UL = np.empty_like(U)
    rmin = np.empty((N, ns))
    rmax = np.empty((N, ns))
    emin = np.empty(N)
    smin = np.empty(N)
    smid = np.full(N, -np.inf)
    s_edge = np.empty(E)
    acc = np.empty(nc)
    ub = np.empty(nc)
    um = np.empty(nc)
    for i in range(N):
        for k in range(nc):
            acc[k] = 0.0
        rho_i = 0.0
        for k in range(ns):
            rmin[i, k] = U[i, k]
            rmax[i, k] = U[i, k]
            rho_i += U[i, k]
        emin[i] = _internal(U[i], ns, d, rho_i)
        smin[i] = s[i]
        for e in range(row_ptr[i], row_ptr[i + 1]):
            j = col[e]
            for k in range(nc):
                fs = 0.0
                df = 0.0
                for a in range(d):
                    fs += (flux[i, k, a] + flux[j, k, a]) * c[e, a]
                    df += (flux[j, k, a] - flux[i, k, a]) * c[e, a]
                acc[k] += -fs + dL[e] * (U[j, k] - U[i, k])
                if dL[e] > 0.0:
                    ub[k] = 0.5 * (U[i, k] + U[j, k]) - df / (2.0 * dL[e])
                else:
                    ub[k] = U[i, k]
            rb = 0.0
            rj = 0.0
            for k in range(ns):
                rb += ub[k]
                rj += U[j, k]
                rmin[i, k] = min(rmin[i, k], ub[k], U[j, k])
                rmax[i, k] = max(rmax[i, k], ub[k], U[j, k])
            emin[i] = min(emin[i], _internal(ub, ns, d, rb), _internal(U[j], ns, d, rj))
            smin[i] = min(smin[i], s[j])
            # midpoint entropy is symmetric in (i, j): evaluate once per pair
            if i < j:
                for k in range(nc):
                    um[k] = 0.5 * (U[i, k] + U[j, k])
                s_edge[e] = entropy1(um, ns, d, sp)
            else:
                s_edge[e] = s_edge[mirror[e]]
            smid[i] = max(smid[i], s_edge[e])
        for k in range(nc):
            fc = 0.0
            for a in range(d):
                fc += flux[i, k, a] * c_diag[i, a]
            UL[i, k] = U[i, k] + tau / lumped[i] * (acc[k] - 2.0 * fc)
    return UL, rmin, rmax, emin, smin, smid


# ------------------------------------------------------------- high order

@njit(cache=True)
def indicator(U, rho, vel, gam, row_ptr, col, c, c_diag, ns):
    """Entropy indicator of a single-gas surrogate with gamma = stencil min."""
    N, nc = U.shape
    d = c.shape[1]
    zeta = np.zeros(N)
    grad_m = np.empty(d)
    ref = np.empty(d)
    # log(rho E - |m|^2 / 2) per node; powers below are exp(g log q)
    logq = np.empty(N)
    for i in range(N):
        mm = 0.0
        for a in range(d):
            mm += U[i, ns + a] * U[i, ns + a]
        logq[i] = math.log(rho[i] * U[i, ns + d] - 0.5 * mm)
    for i in range(N):
        gmin = gam[i]
        for e in range(row_ptr[i], row_ptr[i + 1]):
            gmin = min(gmin, gam[col[e]])
        g = 1.0 / (gmin + 1.0)
        Ei = U[i, ns + d]
        mm = 0.0
        for a in range(d):
            mm += U[i, ns + a] * U[i, ns + a]
        qi = rho[i] * Ei - 0.5 * mm
        Ki = math.exp(g * logq[i])
        fac = g * Ki / qi
        grad_rho = fac * Ei - Ki / rho[i]
        grad_E = fac * rho[i]
        for a in range(d):
            grad_m[a] = -fac * U[i, ns + a]
        # grad(eta) . f(W_i) for the reference node; subtracted below
        # since the c_ij of a row sum to zero
        pti = (gmin - 1.0) * (Ei - 0.5 * mm / rho[i])
        for b in range(d):
            t = grad_rho * U[i, ns + b] + grad_E * (Ei + pti) * vel[i, b]
            for a in range(d):
                t += grad_m[a] * vel[i, a] * U[i, ns + b]
            t += grad_m[b] * pti
            ref[b] = t
        Fsum = 0.0
        num = 0.0
        den = 0.0
        for e in range(row_ptr[i], row_ptr[i + 1] + 1):
            if e < row_ptr[i + 1]:
                j = col[e]
                cv_ = c[e]
            else:
                j = i
                cv_ = c_diag[i]
            Ej = U[j, ns + d]
            mmj = 0.0
            for a in range(d):
                mmj += U[j, ns + a] * U[j, ns + a]
            eta = math.exp(g * logq[j]) - rho[j] / rho[i] * Ki
            ptj = (gmin - 1.0) * (Ej - 0.5 * mmj / rho[j])
            vc = 0.0
            for a in range(d):
                vc += vel[j, a] * cv_[a]
            Fsum += eta * vc
            t = 0.0
            for b in range(d):
                tb = grad_rho * U[j, ns + b] + grad_E * (Ej + ptj) * vel[j, b]
                for a in range(d):
                    tb += grad_m[a] * vel[j, a] * U[j, ns + b]
                tb += grad_m[b] * ptj
                t += tb * cv_[b]
                num -= (tb - ref[b]) * cv_[b]
            den += abs(t)
        num += Fsum
        # the surrogate eta vanishes at W_i itself, so the |D|-scaled term drops
        den += abs(Fsum)
        if den > 0.0:
            zeta[i] = min(abs(num) / den, 1.0)
    return zeta


@njit(cache=True)
def high_fluxes(U, flux, dL, zeta, row_ptr, col, c, c_diag, mass_ij, lumped):
    """Pairwise high-order fluxes including the consistent-mass correction.

    Returns ``H`` on edges and the diagonal flux term per node such that
    ``m_i / tau (U^H_i - U_i) = sum_e H[e] + diag[i]``.
    """
    N, nc = U.shape
    E = col.size
    d = c.shape[1]
    FH = np.empty((E, nc))
    diag = np.empty((N, nc))
    Fi = np.zeros((N, nc))
    for i in range(N):
        for e in range(row_ptr[i], row_ptr[i + 1]):
            j = col[e]
            dH = 0.5 * (zeta[i] + zeta[j]) * dL[e]
            for k in range(nc):
                fc = 0.0
                for a in range(d):
                    fc += (flux[i, k, a] + flux[j, k, a]) * c[e, a]
                FH[e, k] = -fc + dH * (U[j, k] - U[i, k])
                Fi[i, k] += FH[e, k]
        for k in range(nc):
            fc = 0.0
            for a in range(d):
                fc += flux[i, k, a] * c_diag[i, a]
            diag[i, k] = -2.0 * fc
            Fi[i, k] += diag[i, k]
    for i in range(N):
        for e in range(row_ptr[i], row_ptr[i + 1]):
            j = col[e]
            for k in range(nc):
                FH[e, k] += mass_ij[e] * (Fi[i, k] / lumped[i] - Fi[j, k] / lumped[j])
    return FH, diag


# ---------------------------------------------------------------- limiter

@njit(cache=True)
def corrections(U, flux, dL, H, delta, row_ptr, col, c):
    """Antidiffusive fluxes ``A_ij = H_ij - F^L_ij + omega_i delta_i``."""
    N, nc = U.shape
    d = c.shape[1]
    A = np.empty_like(H)
    for i in range(N):
        lo = row_ptr[i]
        hi = row_ptr[i + 1]
        w = 1.0 / (hi - lo)
        for e in range(lo, hi):
            j = col[e]
            for k in range(nc):
                fc = 0.0
                for a in range(d):
                    fc += (flux[i, k, a] + flux[j, k, a]) * c[e, a]
                FL = -fc + dL[e] * (U[j, k] - U[i, k])
                A[e, k] = H[e, k] - FL + w * delta[i, k]
    return A


@njit(cache=True, inline="always")
def _root(l, psi_l, psi_p):
    """One regula falsi step on the chord between 0 and ``l``; 0 if infeasible."""
    if not (psi_l > 0.0 and math.isfinite(psi_p)):
        return 0.0
    return min(l, max(-(l + REGULA_FALSI_EPS) * psi_l / (psi_p - psi_l), 0.0))


@njit(cache=True)
def limit(UL, A, row_ptr, col, lumped, tau, rmin, rmax, emin, smin, ns, d, sp):
    """Per-edge limiter from the sequential one-step regula falsi.

    Functionals are processed in the fixed order: partial density lower
    bounds, upper bounds, internal energy, entropy ``rho (s - s_min)``.
    Written out inline because this loop dominates the stage cost.
    """
    N, nc = UL.shape
    ell = np.ones(col.size)
    ut = np.empty(nc)
    P = np.empty(nc)
    for i in range(N):
        lo = row_ptr[i]
        hi = row_ptr[i + 1]
        scale = tau * (hi - lo) / lumped[i]
        rho_l = 0.0
        for k in range(ns):
            rho_l += UL[i, k]
        eps_l = _internal(UL[i], ns, d, rho_l) - emin[i]
        ent_l = rho_l * (entropy1(UL[i], ns, d, sp) - smin[i])
        for e in range(lo, hi):
            for k in range(nc):
                P[k] = scale * A[e, k]
            l = 1.0
            for k in range(ns):
                psi_p = UL[i, k] + l * P[k] - rmin[i, k]
                if psi_p < 0.0:
                    l = _root(l, UL[i, k] - rmin[i, k], psi_p)
            for k in range(ns):
                psi_p = rmax[i, k] - UL[i, k] - l * P[k]
                if psi_p < 0.0:
                    l = _root(l, rmax[i, k] - UL[i, k], psi_p)
            if l > 0.0:
                rho = 0.0
                for k in range(nc):
                    ut[k] = UL[i, k] + l * P[k]
                for k in range(ns):
                    rho += ut[k]
                psi_p = _internal(ut, ns, d, rho) - emin[i] if rho > 0.0 else np.nan
                if not psi_p >= 0.0:
                    l = _root(l, eps_l, psi_p)
            if l > 0.0:
                rho = 0.0
                for k in range(nc):
                    ut[k] = UL[i, k] + l * P[k]
                for k in range(ns):
                    rho += ut[k]
                psi_p = rho * (entropy1(ut, ns, d, sp) - smin[i])
                if not psi_p >= 0.0:
                    l = _root(l, ent_l, psi_p)
            ell[e] = l
    return ell


@njit(cache=True)
def apply_limited(UL, A, ell, row_ptr, lumped, tau, ns):
    N, nc = UL.shape
    out = UL.copy()
    size = np.abs(UL)
    for i in range(N):
        for e in range(row_ptr[i], row_ptr[i + 1]):
            for k in range(nc):
                inc = tau / lumped[i] * ell[e] * A[e, k]
                out[i, k] += inc
                size[i, k] += abs(inc)
        # only roundoff-level negatives are clipped; real ones are left for the checks
        for k in range(ns):
            if out[i, k] < 0.0 and out[i, k] >= -ROUNDOFF_CLIP * size[i, k]:
                out[i, k] = 0.0
    return out


@njit(cache=True)
def relax(rmin, rmax, emin, smin, smid, cvm, r):
    """Relaxed copies of the bounds, see :func:`idp_euler.limiter.relax_bounds`."""
    N, ns = rmin.shape
    rmin2 = np.empty_like(rmin)
    rmax2 = np.empty_like(rmax)
    emin2 = np.empty_like(emin)
    smin2 = np.empty_like(smin)
    for i in range(N):
        for k in range(ns):
            rmin2[i, k] = (1.0 - r[i]) * rmin[i, k]
            rmax2[i, k] = (1.0 + r[i]) * rmax[i, k]
        emin2[i] = (1.0 - r[i]) * emin[i]
        s_logexp = smin[i] + cvm[i] * math.log1p(-r[i])
        s_mid = 2.0 * smin[i] - smid[i]
        # never tighter than the unrelaxed bound
        smin2[i] = min(max(s_logexp, s_mid), smin[i])
    return rmin2, rmax2, emin2, smin2
