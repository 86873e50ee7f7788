"""Test problems, error norms, convergence studies and the command line driver.

Configuration files are INI-style::

    [run]
    problem = rp1
    cells = 400
    t_final = 0.2
    scheme = limited
    relax = on
    output = out/rp1

    [species.1]
    cp = 1.5
    cv = 1.0

Species sections are optional; each problem carries its own defaults.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numba
import numpy as np

from . import mesh, riemann, stepper, thermo
from .exceptions import InadmissibleStateError
from .highorder import entropy_indicator
from .mesh import DiscreteGraph
from .thermo import PrimitiveState, SpeciesTable

log = logging.getLogger(__name__)

AIR = (1005.0, 718.0)


# ------------------------------------------------------------------ config

@dataclass
class RunConfig:
    problem: str = "smooth_wave"
    species: list | None = None          # [(cp, cv), ...]; None uses the problem default
    cells: tuple | None = None           # cells per direction; None uses the problem default
    t_final: float | None = None
    cfl: float = 0.5
    scheme: str = "limited"
    relax: bool = True
    method: str = "erk33"
    check: bool = False
    periodic: bool = False               # 1D only; replaces the boundary conditions
    output: str | None = None
    cadence: int = 0                     # number of intermediate dumps
    samples: int = 1001                  # riemann subcommand

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; known: {', '.join(PROBLEMS)}")
        if self.species is not None and len(self.species) != 2:
            raise ValueError(f"problem {self.problem!r} needs 2 species, got {len(self.species)}")
        if self.periodic and PROBLEMS[self.problem].dim != 1:
            raise ValueError("periodic meshes are 1D only")
        if self.cells is not None:
            self.cells = tuple(int(c) for c in np.atleast_1d(self.cells))
            if len(self.cells) != PROBLEMS[self.problem].dim:
                raise ValueError(f"problem {self.problem!r} is {PROBLEMS[self.problem].dim}D")
        stepper.StepOptions(scheme=self.scheme, cfl=self.cfl, method=self.method)

    @classmethod
    def from_file(cls, path):
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise FileNotFoundError(f"cannot read config {path}")
        if "run" not in cp:
            raise ValueError(f"{path}: missing [run] section")
        run = cp["run"]
        kw = {"problem": run.get("problem", "smooth_wave")}
        if "cells" in run:
            kw["cells"] = tuple(int(c) for c in run["cells"].replace(",", " ").split())
        for key in ("t_final", "cfl"):
            if key in run:
                kw[key] = run.getfloat(key)
        for key in ("scheme", "method", "output"):
            if key in run:
                kw[key] = run[key]
        for key in ("relax", "check", "periodic"):
            if key in run:
                kw[key] = run.getboolean(key)
        for key in ("cadence", "samples"):
            if key in run:
                kw[key] = run.getint(key)
        sections = sorted((s for s in cp.sections() if s.startswith("species.")),
                          key=lambda s: int(s.split(".", 1)[1]))
        if sections:
            kw["species"] = [(cp[s].getfloat("cp"), cp[s].getfloat("cv")) for s in sections]
        return cls(**kw)

    def options(self) -> stepper.StepOptions:
        return stepper.StepOptions(scheme=self.scheme, relax=self.relax, cfl=self.cfl,
                                   method=self.method, check=self.check)


# ---------------------------------------------------------------- problems

@dataclass
class Problem:
    name: str
    species: SpeciesTable
    graph: DiscreteGraph
    U0: np.ndarray
    t_final: float
    bc: dict
    exact: Callable | None = None     # exact(x, t) -> conserved states

    def boundary(self) -> stepper.BoundaryConditions:
        return stepper.BoundaryConditions.build(self.graph, self.U0, self.bc)


@dataclass(frozen=True)
class ProblemSpec:
    dim: int
    species: tuple
    cells: tuple
    t_final: float
    setup: Callable = field(repr=False)


def _conserved(Y1, rho, v, p, species):
    rho = np.asarray(rho, dtype=float)
    Y1 = np.broadcast_to(np.asarray(Y1, dtype=float), rho.shape)
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape == rho.shape:
        v = v[..., None]  # 1D velocity given as a scalar per node
    w = PrimitiveState(Y=np.stack([Y1, 1.0 - Y1], axis=-1), rho=rho,
                       v=np.broadcast_to(v, rho.shape + v.shape[-1:]),
                       p=np.broadcast_to(p, rho.shape))
    return thermo.primitive_to_conserved(w, species)


X0, X1 = 0.1, 0.3
RHO0 = 1.0


def bump_density(x, t, v0=1.0):
    """Mixture density of the traveling wave."""
    z = np.asarray(x, dtype=float) - v0 * t
    inside = (z >= X0) & (z <= X1)
    bump = 2.0 ** 6 * (X1 - X0) ** -6 * (z - X0) ** 3 * (X1 - z) ** 3
    return RHO0 + np.where(inside, bump, 0.0)


def _smooth_wave(species, graph):
    def exact(x, t):
        rho = bump_density(x[..., 0], t)
        return _conserved(0.75, rho, 1.0, 1.0, species)

    return exact(graph.x, 0.0), {"left": "dirichlet", "right": "dirichlet"}, exact


def _riemann(wl, wr, x0=0.5):
    def setup(species, graph):
        ul = _conserved(wl[0], wl[1], wl[2], wl[3], species)
        ur = _conserved(wr[0], wr[1], wr[2], wr[3], species)
        fan = riemann.RiemannFan.from_states(ul, ur, np.array([1.0]), species)
        x = graph.x[:, 0]
        U0 = np.where((x < x0)[:, None], ul, ur)

        def exact(x, t):
            xi = (np.asarray(x)[..., 0] - x0) / t
            return riemann.fan_conserved(fan, xi, species)

        return U0, {"left": "dirichlet", "right": "dirichlet"}, exact

    return setup


def _woodward_colella(species, graph):
    x = graph.x[:, 0]
    p = np.where(x < 0.1, 1000.0, np.where(x > 0.9, 100.0, 0.01))
    # high-pressure regions hold species 1 only, the low-pressure region species 2
    Y1 = np.where((x < 0.1) | (x > 0.9), 1.0, 0.0)
    U0 = _conserved(Y1, np.ones_like(x), 0.0, p, species)
    return U0, {"left": "slip", "right": "slip"}, None


RHO_SHOCK = 2.025655508041382
V_SHOCK = 212.66552734375
P_SHOCK = 224835.0
BUBBLE_CENTER = (0.052, 0.04)
BUBBLE_RADIUS = 0.022


def _shock_bubble(species, graph):
    x, y = graph.x[:, 0], graph.x[:, 1]
    shock = x < 0.03
    bubble = np.hypot(x - BUBBLE_CENTER[0], y - BUBBLE_CENTER[1]) <= BUBBLE_RADIUS
    Y1 = np.where(bubble & ~shock, 0.0, 1.0)
    rho = np.where(shock, RHO_SHOCK, np.where(bubble, 3.408, 1.163))
    vx = np.where(shock, V_SHOCK, 0.0)
    p = np.where(shock, P_SHOCK, 101325.0)
    v = np.stack([vx, np.zeros_like(vx)], axis=-1)
    U0 = _conserved(Y1, rho, v, p, species)
    bc = {"left": "dirichlet", "right": "dirichlet", "bottom": "slip", "top": "slip"}
    return U0, bc, None


PROBLEMS = {
    "smooth_wave": ProblemSpec(1, (AIR, (4041.4, 2420.0)), (800,), 0.6, _smooth_wave),
    "rp1": ProblemSpec(1, ((1.5, 1.0), (1.3, 1.0)), (800,), 0.2,
                       _riemann((0.5, 1.0, 0.0, 1.0), (0.5, 0.125, 0.0, 0.1))),
    "rp2": ProblemSpec(1, ((5.2, 3.12), (1.402, 0.743)), (800,), 3e-4,
                       _riemann((1.0, 1.602, 0.0, 1e6), (0.0, 1.122, 0.0, 1e5))),
    "woodward_colella": ProblemSpec(1, (AIR, (5193.0, 3115.0)), (3200,), 0.038,
                                    _woodward_colella),
    "shock_bubble": ProblemSpec(2, (AIR, (248.0, 149.0)), (400, 32), 200e-6, _shock_bubble),
}
EXTENTS = {"shock_bubble": (-0.12, 0.88, 0.0, 0.08)}


def init_problem(name, config: RunConfig | None = None) -> Problem:
    """Mesh, species, initial state, boundary kinds and exact solution (if any)."""
    if name not in PROBLEMS:
        raise ValueError(f"unknown problem {name!r}; known: {', '.join(PROBLEMS)}")
    ps = PROBLEMS[name]
    cfg = config or RunConfig(problem=name)
    species = SpeciesTable.from_pairs(cfg.species or ps.species)
    cells = cfg.cells or ps.cells
    if ps.dim == 1:
        graph = mesh.build_1d(cells[0], 0.0, 1.0, periodic=cfg.periodic)
    else:
        graph = mesh.build_2d(cells[0], cells[1], EXTENTS[name])
    U0, bc, exact = ps.setup(species, graph)
    if cfg.periodic:
        bc = {}
    t_final = ps.t_final if cfg.t_final is None else cfg.t_final
    return Problem(name=name, species=species, graph=graph, U0=U0, t_final=t_final,
                   bc=bc, exact=exact)


# ------------------------------------------------------------------ errors

def error_norm(U, U_exact, weights, q=1):
    """Consolidated error ``sum_k ||U_k - U_k^exact||_q / ||U_k^exact||_q``.

    Norms are lumped-mass quadratures (``q = inf`` takes the nodal max).
    Components whose exact norm vanishes are skipped.
    """
    if q not in (1, 2, np.inf, "inf"):
        raise ValueError(f"q must be 1, 2 or inf, got {q!r}")
    U = np.asarray(U, dtype=float)
    U_exact = np.asarray(U_exact, dtype=float)
    w = np.asarray(weights, dtype=float)[:, None]
    err = np.abs(U - U_exact)
    ref = np.abs(U_exact)
    if q in (np.inf, "inf"):
        num, den = err.max(axis=0), ref.max(axis=0)
    else:
        num = (w * err ** q).sum(axis=0) ** (1.0 / q)
        den = (w * ref ** q).sum(axis=0) ** (1.0 / q)
    keep = den > 0
    return float(np.sum(num[keep] / den[keep]))


def rates(errors, sizes):
    """``log(e_coarse / e_fine) / log(h_coarse / h_fine)`` between consecutive rows;
    nan where undefined."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(sizes, dtype=float)
    out = np.full(e.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
    out[1:] = np.where(np.isfinite(r), r, np.nan)
    return out


@dataclass
class StudyRow:
    nodes: int
    errors: dict          # q -> delta^q
    rates: dict           # q -> rate against the previous row (nan for the first)
    seconds: float
    steps: int


NORMS = (1, 2, np.inf)


def _norm_name(q):
    return "inf" if q == np.inf else str(q)


def convergence_study(config: RunConfig, levels, solver=None) -> list[StudyRow]:
    """Errors and rates on a sequence of 1D meshes with ``levels`` nodes each.

    ``solver(problem)`` returns the discrete solution at ``problem.t_final``;
    it defaults to :func:`stepper.run`.
    """
    if len(levels) < 2:
        raise ValueError("a convergence study needs at least two resolutions")
    rows = []
    for I in levels:
        cfg = replace(config, cells=(int(I) - 1,))
        prob = init_problem(cfg.problem, cfg)
        if prob.exact is None:
            raise ValueError(f"problem {cfg.problem!r} has no exact solution")
        t0 = time.perf_counter()
        if solver is None:
            res = stepper.run(prob.U0, prob.graph, prob.species, prob.t_final,
                              cfg.options(), bc=prob.boundary())
            U, steps = res.U, res.steps
        else:
            U, steps = solver(prob), 0
        secs = time.perf_counter() - t0
        Ue = prob.exact(prob.graph.x, prob.t_final)
        errs = {q: error_norm(U, Ue, prob.graph.lumped, q) for q in NORMS}
        rows.append(StudyRow(nodes=int(I), errors=errs, rates={}, seconds=secs, steps=steps))
        log.info("I=%d  delta1=%.3e  (%.1fs, %d steps)", I, errs[1], secs, steps)
    sizes = [1.0 / (r.nodes - 1) for r in rows]
    for q in NORMS:
        rq = rates([r.errors[q] for r in rows], sizes)
        for r, v in zip(rows, rq):
            r.rates[q] = float(v)
    return rows


def format_table(rows) -> str:
    head = f"{'I':>7}" + "".join(f"  {'delta^' + _norm_name(q):>22}  {'rate':>5}" for q in NORMS)
    lines = [head]
    for r in rows:
        cells = []
        for q in NORMS:
            rate = "" if math.isnan(r.rates[q]) else f"{r.rates[q]:.2f}"
            cells.append(f"  {r.errors[q]:>22.16g}  {rate:>5}")
        lines.append(f"{r.nodes:>7}" + "".join(cells))
    return "\n".join(lines)


def write_study_csv(rows, path):
    cols = ["I"] + [f"{p}{_norm_name(q)}" for q in NORMS for p in ("delta", "rate")]
    lines = [",".join(cols)]
    for r in rows:
        vals = [str(r.nodes)]
        for q in NORMS:
            vals.append(f"{r.errors[q]:.17g}")
            vals.append("" if math.isnan(r.rates[q]) else f"{r.rates[q]:.17g}")
        lines.append(",".join(vals))
    _write(path, "\n".join(lines) + "\n")


# ------------------------------------------------------------------ output

def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def field_columns(U, graph: DiscreteGraph, species: SpeciesTable, zeta=None):
    """Header and columns of a field dump."""
    ns = species.n_species
    d = graph.dim
    names = ["x", "y", "z"][:d]
    cols = [graph.x[:, a] for a in range(d)]
    names += [f"alpha_rho_{k + 1}" for k in range(ns)]
    cols += [U[:, k] for k in range(ns)]
    rho = thermo.density(U, species)
    vel = thermo.velocity(U, species)
    names += ["rho"] + [f"v{'xyz'[a]}" if d > 1 else "v" for a in range(d)] + ["p"]
    cols += [rho] + [vel[:, a] for a in range(d)] + [thermo.pressure(U, species, check=False)]
    Y = thermo.mass_fractions(U, species, check=False)
    names += [f"Y_{k + 1}" for k in range(ns)] + ["s", "zeta"]
    cols += [Y[:, k] for k in range(ns)]
    cols.append(thermo.specific_entropy(U, species, check=False))
    if zeta is None:
        zeta = entropy_indicator(U, graph, species)
    cols.append(zeta)
    return names, np.column_stack(cols)


def dump_fields(U, graph: DiscreteGraph, species: SpeciesTable, path, t=None, zeta=None):
    """CSV with one row per node and 17 significant digits."""
    names, data = field_columns(U, graph, species, zeta)
    lines = [",".join(names)]
    if t is not None:
        lines.insert(0, f"# t={t:.17g}")
    lines += [",".join(f"{v:.17g}" for v in row) for row in data]
    _write(path, "\n".join(lines) + "\n")
    return Path(path)


def sample_riemann(config: RunConfig, t=None):
    """Exact solution of a Riemann problem sampled on a uniform grid of ``samples`` points."""
    prob = init_problem(config.problem, replace(config, cells=(max(config.samples - 1, 1),)))
    if prob.exact is None or config.problem not in ("rp1", "rp2"):
        raise ValueError(f"problem {config.problem!r} is not a Riemann problem")
    t = prob.t_final if t is None else t
    U = prob.exact(prob.graph.x, t)
    w = thermo.conserved_to_primitive(U, prob.species)
    names = ["x", "rho", "v", "p"] + [f"Y{k + 1}" for k in range(prob.species.n_species)]
    data = np.column_stack([prob.graph.x[:, 0], w.rho, w.v[:, 0], w.p, w.Y])
    return names, data


# --------------------------------------------------------------------- cli

def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    kw = {}
    if getattr(args, "scheme", None):
        kw["scheme"] = args.scheme
    if getattr(args, "relax", None):
        kw["relax"] = args.relax == "on"
    if getattr(args, "cells", None):
        kw["cells"] = tuple(args.cells)
    if getattr(args, "t_final", None) is not None:
        kw["t_final"] = args.t_final
    if getattr(args, "output", None):
        kw["output"] = args.output
    if getattr(args, "check", False):
        kw["check"] = True
    if getattr(args, "periodic", False):
        kw["periodic"] = True
    return replace(cfg, **kw) if kw else cfg


def _load(args) -> RunConfig:
    if args.config in PROBLEMS:
        cfg = RunConfig(problem=args.config)
    else:
        cfg = RunConfig.from_file(args.config)
    return _apply_overrides(cfg, args)


def _levels(spec, cfg: RunConfig):
    if "," in spec:
        return [int(v) for v in spec.split(",")]
    n = int(spec)
    base = (cfg.cells or PROBLEMS[cfg.problem].cells)[0] + 1
    # coarsest level first; every refinement doubles the cell count
    return [(base - 1) * 2 ** k + 1 for k in range(n)]


def cmd_run(args) -> int:
    cfg = _load(args)
    prob = init_problem(cfg.problem, cfg)
    out = Path(cfg.output or f"{cfg.problem}")
    dumps = np.linspace(0.0, prob.t_final, cfg.cadence + 2)[1:-1] if cfg.cadence else []
    pending = list(dumps)

    def callback(n, t, U):
        while pending and t >= pending[0]:
            pending.pop(0)
            dump_fields(U, prob.graph, prob.species, f"{out}_{n:06d}.csv", t)

    t0 = time.perf_counter()
    res = stepper.run(prob.U0, prob.graph, prob.species, prob.t_final, cfg.options(),
                      bc=prob.boundary(), callback=callback)
    path = dump_fields(res.U, prob.graph, prob.species, f"{out}.csv", res.t)
    rep = res.report
    print(f"{prob.name}: t={res.t:.6g} steps={res.steps} wall={time.perf_counter() - t0:.1f}s -> {path}")
    print(f"  min partial density {rep.min_partial_density:.3e}, min internal energy "
          f"{rep.min_internal_energy:.3e}, zeta in [{rep.zeta_min:.3g}, {rep.zeta_max:.3g}]")
    if cfg.check:
        print(f"  entropy margin {rep.entropy_margin:.3e} (relaxed {rep.relaxed_entropy_margin:.3e})")
    if prob.exact is not None:
        Ue = prob.exact(prob.graph.x, res.t)
        print("  " + "  ".join(f"delta^{_norm_name(q)}={error_norm(res.U, Ue, prob.graph.lumped, q):.6e}"
                               for q in NORMS))
    return 0


def cmd_riemann(args) -> int:
    cfg = _load(args)
    if args.samples:
        cfg = replace(cfg, samples=args.samples)
    names, data = sample_riemann(cfg, args.time)
    text = ",".join(names) + "\n" + "\n".join(",".join(f"{v:.17g}" for v in row) for row in data) + "\n"
    if cfg.output:
        _write(cfg.output, text)
        print(f"wrote {cfg.output}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_converge(args) -> int:
    cfg = _load(args)
    rows = convergence_study(cfg, _levels(args.levels, cfg))
    print(format_table(rows))
    out = cfg.output or f"{cfg.problem}_convergence"
    write_study_csv(rows, f"{out}.csv")
    print(f"wrote {out}.csv")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="idp-euler", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--deterministic", action="store_true",
                    help="single-threaded kernels with a fixed reduction order")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="INI config file or a problem name (" + ", ".join(PROBLEMS) + ")")
        p.add_argument("--scheme", choices=stepper.SCHEMES)
        p.add_argument("--relax", choices=("on", "off"))
        p.add_argument("--cells", type=int, nargs="+")
        p.add_argument("--t-final", type=float, dest="t_final")
        p.add_argument("--output", "-o")
        p.add_argument("--check", action="store_true", help="track entropy margins every stage")
        p.add_argument("--periodic", action="store_true", help="periodic 1D mesh instead of the problem's boundaries")

    p = sub.add_parser("run", help="simulate and dump the final field")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("riemann", help="sample the exact Riemann solution")
    common(p)
    p.add_argument("--time", type=float)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_riemann)
    p = sub.add_parser("converge", help="convergence study against the exact solution")
    common(p)
    p.add_argument("--levels", default="5",
                   help="number of levels (doubling from the config mesh) or a list such as 101,201,401")
    p.set_defaults(func=cmd_converge)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.deterministic:
        # the kernels are serial already; pin numba to one thread anyway
        numba.set_num_threads(1)
    try:
        return args.func(args)
    except InadmissibleStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
