"""Time stepping: limited forward-Euler stages composed into a third-order scheme.

A stage with old state ``U_s`` computes the low-order update from ``U_s``
and limits towards a high-order flux that may combine fluxes of earlier
stages. Two compositions are provided:

``erk33`` (default)
    Heun's third-order method written as three stages of size ``tau_n``:
    high-order fluxes ``H(U0)``, ``2H(U1) - H(U0)`` and
    ``9/4 H(U2) - 2 H(U1) + 3/4 H(U0)``. A full step advances
    ``tau = 3 tau_n`` and every stage respects the low-order CFL bound.
``ssprk3``
    Shu-Osher SSP-RK3 with convex combinations of forward-Euler stages of
    size ``tau_n``; a full step advances ``tau_n``.

``tau_n`` is computed in the first stage from ``CFL * min_i m_i / (2|d_ii|)``.
If a later stage would violate its own CFL bound the step restarts with a
smaller ``tau_n``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from . import limiter, loworder, mesh, thermo
from .exceptions import CFLViolation, InadmissibleStateError
from .highorder import entropy_indicator
from .loworder import LocalBounds
from .mesh import DiscreteGraph
from .thermo import SpeciesTable

log = logging.getLogger(__name__)

SCHEMES = ("low", "high", "limited")
METHODS = {
    # per stage: weights of the high-order fluxes of stages 0..s
    "erk33": ((1.0,), (-1.0, 2.0), (0.75, -2.0, 2.25)),
}


@dataclass
class StepOptions:
    scheme: str = "limited"
    relax: bool = True
    cfl: float = loworder.DEFAULT_CFL
    method: str = "erk33"
    check: bool = False  # per-stage invariant checks
    on_stage: Callable | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.method not in ("erk33", "ssprk3"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 < self.cfl <= 1:
            raise ValueError("CFL must lie in (0, 1]")


# ------------------------------------------------------------------ boundary

BC_KINDS = ("dirichlet", "slip", "none")


@dataclass
class BoundaryConditions:
    """Per-side boundary kinds, e.g. ``{"left": "dirichlet", "top": "slip"}``.

    Dirichlet values are the states of the boundary nodes at construction.
    Dirichlet wins at corners shared with a slip side.
    """

    kinds: dict
    dirichlet_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_values: np.ndarray | None = None
    slip: list = field(default_factory=list)  # (nodes, axis) pairs

    @classmethod
    def build(cls, graph: DiscreteGraph, U0, kinds: dict):
        for side, kind in kinds.items():
            if side not in mesh.SIDES:
                raise ValueError(f"unknown boundary side {side!r}")
            if kind not in BC_KINDS:
                raise ValueError(f"unknown boundary kind {kind!r}")
        dmask = np.zeros(graph.n_nodes, dtype=bool)
        for side, kind in kinds.items():
            if kind == "dirichlet":
                dmask |= (graph.tags & mesh.SIDES[side]) != 0
        nodes = np.flatnonzero(dmask)
        slip = []
        for side, kind in kinds.items():
            if kind == "slip":
                on = ((graph.tags & mesh.SIDES[side]) != 0) & ~dmask
                axis = 0 if side in ("left", "right") else 1
                if axis >= graph.dim:
                    raise ValueError(f"side {side!r} does not exist in {graph.dim}D")
                slip.append((np.flatnonzero(on), axis))
        return cls(kinds=dict(kinds), dirichlet_nodes=nodes,
                   dirichlet_values=np.array(U0[nodes]), slip=slip)


def apply_bc(U, bc: BoundaryConditions | None, species: SpeciesTable):
    """Reset Dirichlet nodes; remove wall-normal momentum on slip walls.

    The slip projection keeps the total energy, so internal energy and
    entropy can only grow there.
    """
    if bc is None:
        return U
    if bc.dirichlet_nodes.size:
        U[bc.dirichlet_nodes] = bc.dirichlet_values
    ns = species.n_species
    for nodes, axis in bc.slip:
        U[nodes, ns + axis] = 0.0
    return U


def reflect_state(u, normal, species: SpeciesTable):
    """Mirror state across a wall with unit ``normal`` (normal momentum flipped)."""
    u = np.array(u, dtype=float)
    ns = species.n_species
    m = u[..., ns:-1]
    mn = np.sum(m * normal, axis=-1, keepdims=True)
    u[..., ns:-1] = m - 2.0 * mn * normal
    return u


# --------------------------------------------------------------------- stage

@dataclass
class StageResult:
    U: np.ndarray
    tau: float
    H: np.ndarray | None
    diag: np.ndarray | None
    zeta: np.ndarray | None
    d_ii: np.ndarray
    bounds: LocalBounds | None = None
    enforced: LocalBounds | None = None
    ell: np.ndarray | None = None


def euler_stage(U, graph: DiscreteGraph, species: SpeciesTable, tau=None,
                options: StepOptions | None = None, prior=(), weight=1.0, tau_cap=np.inf):
    """One limited forward-Euler stage from ``U``.

    Parameters
    ----------
    tau : float or None
        Stage step. ``None`` computes ``CFL * min m_i / (2|d_ii|)`` (capped
        by ``tau_cap``).
    prior : sequence of (weight, H, diag)
        High-order fluxes of earlier stages entering the combined flux.
    weight : float
        Weight of this stage's own high-order flux.

    Raises
    ------
    CFLViolation
        If a prescribed ``tau`` violates the low-order CFL bound of ``U``.
    """
    opt = options or StepOptions()
    U = np.ascontiguousarray(U, dtype=float)
    ns = species.n_species
    st = loworder.node_state(U, species)
    d = loworder.pair_viscosity(U, graph, species, st)
    d_ii = loworder.diagonal(d, graph)
    limit = loworder.cfl_limit(d_ii, graph)
    if tau is None:
        tau = min(opt.cfl * limit, tau_cap)
    elif tau > limit * (1.0 + 1e-14):
        raise CFLViolation(f"tau={tau:.6e} exceeds the CFL limit {limit:.6e}")
    UL, bounds = loworder.low_order_with_bounds(U, graph, species, tau, d, st)
    if opt.scheme == "low":
        return StageResult(U=UL, tau=tau, H=None, diag=None, zeta=None, d_ii=d_ii)

    zeta = entropy_indicator(U, graph, species, st)
    H, diag = K.high_fluxes(U, st.flux, d, zeta, graph.row_ptr, graph.col, graph.c,
                            graph.c_diag, graph.mass_ij, graph.lumped)
    Hc = weight * H
    dc = weight * diag
    for w, Hl, dl in prior:
        Hc += w * Hl
        dc += w * dl
    A = limiter.corrections(U, graph, st.flux, d, Hc, dc - diag)
    if opt.scheme == "high":
        U_new = UL + tau / graph.lumped[:, None] * graph.row_sum(A)
        return StageResult(U=U_new, tau=tau, H=H, diag=diag, zeta=zeta, d_ii=d_ii)

    enforced = limiter.relax_bounds(bounds, graph, U, species) if opt.relax else bounds
    ell = limiter.symmetrize(limiter.limit_pairs(UL, A, graph, tau, enforced, species), graph)
    U_new = limiter.limited_update(UL, A, ell, graph, tau, species)
    return StageResult(U=U_new, tau=tau, H=H, diag=diag, zeta=zeta, d_ii=d_ii,
                       bounds=bounds, enforced=enforced, ell=ell)


# ---------------------------------------------------------------- invariants

@dataclass
class InvariantReport:
    """Worst invariant margins seen so far (negative means violated)."""

    min_partial_density: float = np.inf
    min_internal_energy: float = np.inf
    entropy_margin: float = np.inf       # min_i (s_i - s_min_i) / max(1, |s_min_i|), unrelaxed bound
    relaxed_entropy_margin: float = np.inf
    zeta_min: float = np.inf
    zeta_max: float = -np.inf
    nonfinite: int = 0
    stages: int = 0

    def update(self, res: StageResult, species: SpeciesTable, full=True):
        """Fold one stage in; entropy margins only with ``full``."""
        U = res.U
        ns = species.n_species
        self.stages += 1
        rk, emin, rmin, bad = K.extrema(np.ascontiguousarray(U), ns, U.shape[1] - ns - 1)
        self.nonfinite += int(bad)
        self.min_partial_density = min(self.min_partial_density, float(rk))
        self.min_internal_energy = min(self.min_internal_energy, float(emin))
        if res.zeta is not None:
            self.zeta_min = min(self.zeta_min, float(res.zeta.min()))
            self.zeta_max = max(self.zeta_max, float(res.zeta.max()))
        if full and res.bounds is not None and emin > 0 and rmin > 0:
            s = thermo.specific_entropy(U, species, check=False)
            for name, b in (("entropy_margin", res.bounds), ("relaxed_entropy_margin", res.enforced)):
                margin = (s - b.s_min) / np.maximum(1.0, np.abs(b.s_min))
                setattr(self, name, min(getattr(self, name), float(margin.min())))

    @property
    def admissible(self) -> bool:
        return self.nonfinite == 0 and self.min_partial_density >= 0 and self.min_internal_energy > 0


# ----------------------------------------------------------------------- step

def _run_stage(U, graph, species, opt, report, **kw):
    res = euler_stage(U, graph, species, options=opt, **kw)
    if report is not None:
        report.update(res, species, full=opt.check)
    if opt.on_stage is not None:
        opt.on_stage(res)
    return res


def erk33_step(U0, graph, species, options: StepOptions, bc=None, t_left=np.inf, report=None):
    """One step of the three-stage scheme; returns ``(U, tau)`` with ``tau = 3 tau_n``."""
    weights = METHODS["erk33"]
    tau_n = None
    cap = t_left / 3.0
    for _ in range(20):
        try:
            res = _run_stage(U0, graph, species, options, report, tau=tau_n, tau_cap=cap,
                             weight=weights[0][0])
            tau_n = res.tau
            stages = [(U0, res)]
            U = apply_bc(res.U, bc, species)
            for s in (1, 2):
                prior = [(weights[s][l], stages[l][1].H, stages[l][1].diag) for l in range(s)]
                if options.scheme == "low":
                    prior = ()
                res = _run_stage(U, graph, species, options, report, tau=tau_n, prior=prior,
                                 weight=weights[s][s])
                stages.append((U, res))
                U = apply_bc(res.U, bc, species)
            return U, 3.0 * tau_n
        except CFLViolation as exc:
            log.info("restarting step: %s", exc)
            tau_n = 0.5 * tau_n
    raise CFLViolation("could not find an admissible step size")


def ssprk3_step(U0, graph, species, options: StepOptions, bc=None, t_left=np.inf, report=None):
    """One Shu-Osher SSP-RK3 step; returns ``(U, tau_n)``."""
    tau_n = None
    for _ in range(20):
        try:
            res = _run_stage(U0, graph, species, options, report, tau=tau_n, tau_cap=t_left)
            tau_n = res.tau
            U1 = apply_bc(res.U, bc, species)
            res = _run_stage(U1, graph, species, options, report, tau=tau_n)
            U2 = apply_bc(0.75 * U0 + 0.25 * res.U, bc, species)
            res = _run_stage(U2, graph, species, options, report, tau=tau_n)
            return apply_bc(U0 / 3.0 + 2.0 / 3.0 * res.U, bc, species), tau_n
        except CFLViolation as exc:
            log.info("restarting step: %s", exc)
            tau_n = 0.5 * tau_n
    raise CFLViolation("could not find an admissible step size")


@dataclass
class RunResult:
    U: np.ndarray
    t: float
    steps: int
    dt: list
    totals: np.ndarray         # (steps + 1, n_components) of sum_i m_i U_i
    report: InvariantReport

    def conservation_drift(self):
        """Largest relative change of each conserved total over the run."""
        t0 = self.totals[0]
        scale = np.where(t0 != 0, np.abs(t0), np.max(np.abs(self.totals), axis=0))
        scale = np.where(scale == 0, 1.0, scale)
        return np.max(np.abs(self.totals - t0), axis=0) / scale


def run(U0, graph: DiscreteGraph, species: SpeciesTable, t_final, options: StepOptions | None = None,
        bc: BoundaryConditions | None = None, t0=0.0, max_steps=10_000_000, strict=True,
        callback=None) -> RunResult:
    """Integrate from ``t0`` to ``t_final``; the last step is clipped to land on ``t_final``.

    With ``strict`` an inadmissible or non-finite state raises
    :class:`InadmissibleStateError`.
    """
    opt = options or StepOptions()
    step = erk33_step if opt.method == "erk33" else ssprk3_step
    U = apply_bc(np.array(U0, dtype=float), bc, species)
    t = float(t0)
    report = InvariantReport()
    totals = [graph.lumped @ U]
    dts = []
    n = 0
    while t < t_final * (1 - 1e-14) and n < max_steps:
        U, dt = step(U, graph, species, opt, bc=bc, t_left=t_final - t, report=report)
        t = t_final if t_final - (t + dt) <= 1e-14 * t_final else t + dt
        n += 1
        dts.append(dt)
        totals.append(graph.lumped @ U)
        if strict and not report.admissible:
            raise InadmissibleStateError(
                f"invariant violated at step {n}, t={t:.6e}: min partial density "
                f"{report.min_partial_density:.3e}, min internal energy {report.min_internal_energy:.3e}, "
                f"{report.nonfinite} non-finite values")
        if callback is not None:
            callback(n, t, U)
    return RunResult(U=U, t=t, steps=n, dt=dts, totals=np.array(totals), report=report)
