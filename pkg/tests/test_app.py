import math

import numpy as np
import pytest

from idp_euler import app, mesh, riemann, stepper, thermo
from idp_euler.app import RunConfig


def write_ini(path, text):
    path.write_text(text)
    return str(path)


def test_config_from_file(tmp_path):
    ini = write_ini(tmp_path / "run.ini", """
[run]
problem = rp1
cells = 400
t_final = 0.1
cfl = 0.4
scheme = high
relax = off
check = yes
output = out/rp1

[species.1]
cp = 1.5
cv = 1.0

[species.2]
cp = 1.3
cv = 1.0
""")
    cfg = RunConfig.from_file(ini)
    assert cfg.problem == "rp1" and cfg.cells == (400,) and cfg.t_final == 0.1
    assert cfg.species == [(1.5, 1.0), (1.3, 1.0)]
    opt = cfg.options()
    assert opt.scheme == "high" and not opt.relax and opt.check and opt.cfl == 0.4


def test_config_errors(tmp_path):
    with pytest.raises(ValueError):
        RunConfig(problem="nope")
    with pytest.raises(ValueError):
        RunConfig(problem="rp1", species=[(1.4, 1.0)] * 3)
    with pytest.raises(ValueError):
        RunConfig(problem="shock_bubble", cells=(10,))
    with pytest.raises(ValueError):
        RunConfig(problem="shock_bubble", periodic=True)
    with pytest.raises(ValueError):
        RunConfig(problem="rp1", scheme="weno")
    with pytest.raises(ValueError):
        RunConfig.from_file(write_ini(tmp_path / "bad.ini", "[other]\na = 1\n"))
    with pytest.raises(FileNotFoundError):
        RunConfig.from_file(str(tmp_path / "missing.ini"))
    with pytest.raises(ValueError):
        app.init_problem("nope")


def test_smooth_wave_initial_mass():
    # int_0^1 rho = 1 + 2^6 L^-6 * L^7 * B(4, 4) = 1 + 64 L / 140 with L = 0.2
    exact = 1.0 + 64 * 0.2 / 140
    prob = app.init_problem("smooth_wave", RunConfig(cells=(4000,)))
    rho = thermo.density(prob.U0, prob.species)
    assert prob.graph.lumped @ rho == pytest.approx(exact, rel=1e-6)
    assert np.allclose(prob.U0[:, 0] / rho, 0.75)
    assert np.allclose(thermo.pressure(prob.U0, prob.species), 1.0)
    assert np.allclose(thermo.velocity(prob.U0, prob.species), 1.0)
    # translation: exact(x, t) = exact(x - t, 0)
    x = prob.graph.x
    assert np.allclose(prob.exact(x + 0.25, 0.25), prob.exact(x, 0.0))


def test_riemann_problem_states():
    prob = app.init_problem("rp1")
    E_left = 1.0 / (thermo.mixture_gamma([0.5, 0.5], prob.species) - 1.0)
    assert np.allclose(prob.U0[0], [0.5, 0.5, 0.0, E_left])
    assert thermo.mixture_gamma([0.5, 0.5], prob.species) == pytest.approx(1.4)
    assert np.allclose(prob.U0[-1, :2], [0.0625, 0.0625])
    prob2 = app.init_problem("rp2")
    assert np.allclose(prob2.U0[0, :2], [1.602, 0.0]) and np.allclose(prob2.U0[-1, :2], [0.0, 1.122])
    assert np.allclose(thermo.pressure(prob2.U0[[0, -1]], prob2.species), [1e6, 1e5])
    # the exact solution at tiny t is the initial data away from the diaphragm
    Ue = prob.exact(prob.graph.x, 1e-9)
    far = np.abs(prob.graph.x[:, 0] - 0.5) > 0.01
    assert np.allclose(Ue[far], prob.U0[far])


@pytest.mark.parametrize("name", list(app.PROBLEMS))
def test_initial_data_admissible(name):
    cfg = RunConfig(problem=name, cells=(40, 8) if name == "shock_bubble" else (40,))
    prob = app.init_problem(name, cfg)
    assert np.all(thermo.is_admissible(prob.U0, prob.species))
    stepper.BoundaryConditions.build(prob.graph, prob.U0, prob.bc)


def test_shock_bubble_setup():
    prob = app.init_problem("shock_bubble", RunConfig(problem="shock_bubble", cells=(400, 32)))
    w = thermo.conserved_to_primitive(prob.U0, prob.species)
    x, y = prob.graph.x.T
    shock = x < 0.03
    assert np.allclose(w.rho[shock], app.RHO_SHOCK) and np.allclose(w.p[shock], 224835.0)
    assert np.allclose(w.v[shock, 0], 212.66552734375)
    inb = np.hypot(x - 0.052, y - 0.04) < 0.02
    assert inb.any() and np.allclose(w.Y[inb, 0], 0.0) and np.allclose(w.rho[inb], 3.408)
    amb = ~shock & (np.hypot(x - 0.052, y - 0.04) > 0.023)
    assert np.allclose(w.rho[amb], 1.163) and np.allclose(w.p[amb], 101325.0)


def test_error_norm():
    rng = np.random.default_rng(0)
    Ue = rng.uniform(1, 2, (50, 4))
    w = np.full(50, 1 / 50)
    for q in (1, 2, np.inf):
        assert app.error_norm(Ue, Ue, w, q) == 0.0
    Ue = np.zeros((50, 4))
    Ue[:, 1] = 2.0
    U = Ue.copy()
    U[:, 1] += 0.1
    for q in (1, 2, np.inf):
        # zero components are skipped; a constant offset gives offset / |exact|
        assert app.error_norm(U, Ue, w, q) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        app.error_norm(U, Ue, w, 3)


def test_rates():
    r = app.rates([1.0, 0.25, 0.0625], [0.1, 0.05, 0.025])
    assert math.isnan(r[0]) and np.allclose(r[1:], 2.0)
    r = app.rates([0.0, 0.0], [0.1, 0.05])
    assert np.all(np.isnan(r))


def test_study_exact_solution_gives_zero(tmp_path):
    cfg = RunConfig(problem="rp1")
    rows = app.convergence_study(cfg, [21, 41, 81], solver=lambda p: p.exact(p.graph.x, p.t_final))
    for row in rows:
        assert all(v == 0.0 for v in row.errors.values())
        assert all(math.isnan(v) for v in row.rates.values())
    table = app.format_table(rows)
    assert "nan" not in table
    with pytest.raises(ValueError):
        app.convergence_study(cfg, [21])
    with pytest.raises(ValueError):
        app.convergence_study(RunConfig(problem="woodward_colella"), [21, 41])


def test_study_rates_self_consistent(tmp_path):
    cfg = RunConfig(problem="smooth_wave")

    def solver(p):
        h = 1.0 / (p.graph.n_nodes - 1)
        return p.exact(p.graph.x, p.t_final) * (1 + h * h)

    rows = app.convergence_study(cfg, [11, 21, 41, 81], solver=solver)
    path = tmp_path / "study.csv"
    app.write_study_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "I,delta1,rate1,delta2,rate2,deltainf,rateinf"
    data = [line.split(",") for line in lines[1:]]
    for prev, cur in zip(data[:-1], data[1:]):
        for k in (1, 3, 5):
            rate = math.log2(float(prev[k]) / float(cur[k]))
            assert float(cur[k + 1]) == pytest.approx(rate, rel=1e-12)
            assert rate == pytest.approx(2.0, abs=0.01)
    assert data[0][2] == ""


def test_dump_fields(tmp_path):
    prob = app.init_problem("rp1", RunConfig(problem="rp1", cells=(10,)))
    U = np.tile(prob.U0[0], (prob.graph.n_nodes, 1))
    path = app.dump_fields(U, prob.graph, prob.species, tmp_path / "sub" / "f.csv", t=0.5)
    lines = path.read_text().splitlines()
    assert lines[0] == "# t=0.5"
    assert lines[1] == "x,alpha_rho_1,alpha_rho_2,rho,v,p,Y_1,Y_2,s,zeta"
    data = np.array([[float(v) for v in line.split(",")] for line in lines[2:]])
    assert data.shape == (11, 10)
    assert np.all(data[:, 1:] == data[0, 1:])
    assert data[0, 9] == 0.0
    first = lines[2].split(",")
    assert float(first[3]) == thermo.density(U[0], prob.species)
    g2 = app.init_problem("shock_bubble", RunConfig(problem="shock_bubble", cells=(4, 2)))
    names, _ = app.field_columns(g2.U0, g2.graph, g2.species)
    assert names == ["x", "y", "alpha_rho_1", "alpha_rho_2", "rho", "vx", "vy", "p", "Y_1", "Y_2", "s", "zeta"]


def test_dump_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    prob = app.init_problem("rp1", RunConfig(problem="rp1", cells=(4,)))
    with pytest.raises(OSError, match="file"):
        app.dump_fields(prob.U0, prob.graph, prob.species, blocker / "x.csv")


def test_cli_riemann(capsys):
    assert app.main(["riemann", "rp1", "--samples", "11"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "x,rho,v,p,Y1,Y2"
    rows = np.array([[float(v) for v in line.split(",")] for line in out[1:]])
    assert rows.shape == (11, 6)
    assert rows[0, 1] == 1.0 and rows[-1, 1] == 0.125
    assert app.main(["riemann", "woodward_colella"]) == 2


def test_cli_sod_star(capsys, tmp_path):
    ini = write_ini(tmp_path / "sod.ini", "[run]\nproblem = rp1\n[species.1]\ncp = 1.4\ncv = 1.0\n"
                                          "[species.2]\ncp = 2.8\ncv = 2.0\n")
    assert app.main(["riemann", ini, "--samples", "2001", "--time", "0.2"]) == 0
    rows = np.array([[float(v) for v in line.split(",")] for line in capsys.readouterr().out.splitlines()[1:]])
    mid = rows[np.abs(rows[:, 0] - 0.55) < 0.02]
    assert np.allclose(mid[:, 3], 0.30313, atol=1e-5) and np.allclose(mid[:, 2], 0.92745, atol=1e-5)


def test_cli_run_and_converge(tmp_path, capsys):
    out = tmp_path / "rp1"
    assert app.main(["--deterministic", "run", "rp1", "--cells", "50", "-o", str(out), "--check"]) == 0
    text = capsys.readouterr().out
    assert "entropy margin" in text and "delta^1" in text
    first = (tmp_path / "rp1.csv").read_bytes()
    assert app.main(["run", "rp1", "--cells", "50", "-o", str(out)]) == 0
    assert (tmp_path / "rp1.csv").read_bytes() == first
    assert app.main(["converge", "rp1", "--levels", "26,51", "-o", str(tmp_path / "conv")]) == 0
    assert (tmp_path / "conv.csv").exists()
    assert app._levels("3", RunConfig(problem="rp1", cells=(100,))) == [101, 201, 401]


def test_cli_exit_codes(tmp_path, capsys):
    assert app.main(["run", str(tmp_path / "missing.ini")]) == 2
    assert app.main(["run", "woodward_colella", "--scheme", "high", "--cells", "200",
                     "-o", str(tmp_path / "wc")]) == 1
    err = capsys.readouterr().err
    assert "invariant violated" in err
    with pytest.raises(SystemExit):
        app.main(["run", "rp1", "--relax", "maybe"])


def test_cadence_dumps(tmp_path, capsys):
    out = tmp_path / "sw"
    ini = write_ini(tmp_path / "sw.ini", f"[run]\nproblem = smooth_wave\ncells = 50\nt_final = 0.05\n"
                                         f"cadence = 2\noutput = {out}\n")
    assert app.main(["run", ini]) == 0
    assert len(list(tmp_path.glob("sw_*.csv"))) == 2


def test_periodic_smooth_wave_conserves():
    cfg = RunConfig(problem="smooth_wave", cells=(100,), t_final=0.1, periodic=True)
    prob = app.init_problem("smooth_wave", cfg)
    assert prob.graph.periodic and prob.bc == {}
    res = stepper.run(prob.U0, prob.graph, prob.species, prob.t_final, cfg.options(), bc=prob.boundary())
    assert np.all(res.conservation_drift() <= 1e-13)
