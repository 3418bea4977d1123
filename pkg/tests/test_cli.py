"""End-to-end tests of the command line driver.

Everything goes through cli.main with an argv list, so exit codes and
stdout/stderr are checked exactly as a shell user would see them.
"""

import filecmp

import numpy as np
import pytest

from polyvem import cli
from polyvem.mesh import PolyMesh, write_mesh


def read_csv(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:] if ln]
    return header, rows


def hexagon_file(tmp_path):
    ang = np.linspace(0.0, 2.0 * np.pi, 7)[:-1]
    verts = np.column_stack([np.cos(ang), np.sin(ang)])
    path = tmp_path / "hex.poly2d"
    write_mesh(PolyMesh(verts, [[0, 1, 2, 3, 4, 5]]), path)
    return str(path)


def holed_file(tmp_path):
    sq = np.array([[0, 0], [3, 0], [3, 3], [0, 3]], float)
    hole = np.array([[1, 1], [2, 1], [2, 2], [1, 2]], float)
    mesh = PolyMesh(
        np.vstack([sq, hole]),
        [([0, 1, 2, 3], [[7, 6, 5, 4]]), [4, 5, 6, 7]],
    )
    path = tmp_path / "holed.poly2d"
    write_mesh(mesh, path)
    return str(path)


# -- solve ---------------------------------------------------------------


def test_solve_writes_error_csv(tmp_path):
    out = str(tmp_path / "err.csv")
    rc = cli.main(
        ["solve", "--gen", "quads:8", "--degree", "2", "--errors", out]
    )
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["h", "nDof", "errL2", "errH1"]
    (row,) = rows
    assert int(row[1]) == 289
    assert float(row[2]) < float(row[3]) < 0.1


def test_solve_polyk_exact_for_space_polynomials(tmp_path):
    out = str(tmp_path / "err.csv")
    rc = cli.main(
        ["solve", "--gen", "quads:2", "--degree", "1",
         "--problem", "polyK", "--errors", out]
    )
    assert rc == 0
    _, rows = read_csv(out)
    assert float(rows[0][2]) <= 1e-10


def test_missing_mesh_file_exits_1(capsys):
    rc = cli.main(["solve", "--mesh", "/no/such/file.poly2d"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "not found" in err and "/no/such/file.poly2d" in err


def test_bad_gen_spec_exits_1(capsys):
    assert cli.main(["solve", "--gen", "quads"]) == 1
    assert "family:n" in capsys.readouterr().err


def test_unknown_problem_exits_1(capsys):
    rc = cli.main(["solve", "--gen", "quads:2", "--problem", "nope"])
    assert rc == 1
    assert "unknown problem" in capsys.readouterr().err


def test_usage_error_exits_1(capsys):
    # argparse usage errors are remapped from its default exit status
    assert cli.main(["solve", "--degree"]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0


def test_custom_problem_file(tmp_path):
    prob = tmp_path / "prob.py"
    prob.write_text(
        "def u(x, y):\n    return x - 2.0 * y\n"
        "def f(x, y):\n    return 0.0 * x\n"
        "def grad(x, y):\n    return (1.0 + 0.0 * x, -2.0 + 0.0 * x)\n"
    )
    out = str(tmp_path / "err.csv")
    rc = cli.main(
        ["solve", "--gen", "quads:2", "--problem", "custom:%s" % prob,
         "--errors", out]
    )
    assert rc == 0
    _, rows = read_csv(out)
    assert float(rows[0][2]) <= 1e-12


def test_custom_problem_missing_names_exits_1(tmp_path, capsys):
    prob = tmp_path / "incomplete.py"
    prob.write_text("def u(x, y):\n    return x\n")
    rc = cli.main(
        ["solve", "--gen", "quads:2", "--problem", "custom:%s" % prob]
    )
    assert rc == 1
    assert "must define" in capsys.readouterr().err


def test_solver_iteration_cap_exits_2(capsys):
    rc = cli.main(["solve", "--gen", "quads:4", "--degree", "2",
                   "--maxiter", "3"])
    assert rc == 2
    assert "solver failed" in capsys.readouterr().err


def test_dump_matrices(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = cli.main(["solve", "--gen", "quads:2", "--degree", "2",
                   "--dump-matrices", "0"])
    assert rc == 0
    text = (tmp_path / "matrices_element0.csv").read_text()
    for tag in ("tag,D", "tag,B", "tag,G", "tag,H", "tag,STIFFNESS"):
        assert tag in text


def test_dump_matrices_bad_id_exits_1(capsys):
    rc = cli.main(["solve", "--gen", "quads:2", "--dump-matrices", "99"])
    assert rc == 1
    assert "out of range" in capsys.readouterr().err


# -- convergence ---------------------------------------------------------


def test_convergence_first_order_rates(tmp_path):
    out = str(tmp_path / "conv.csv")
    rc = cli.main(["convergence", "--family", "quads", "--levels", "3",
                   "--degree", "1", "--out", out])
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["level", "h", "nDof", "errL2", "errH1",
                      "rateL2", "rateH1"]
    assert len(rows) == 3
    assert rows[0][5] == "" and rows[0][6] == ""
    assert 1.8 <= float(rows[-1][5]) <= 2.2
    assert 0.8 <= float(rows[-1][6]) <= 1.2


def test_convergence_second_order_h1_rate(tmp_path):
    out = str(tmp_path / "conv2.csv")
    rc = cli.main(["convergence", "--family", "distortedQuads",
                   "--levels", "3", "--degree", "2", "--out", out])
    assert rc == 0
    _, rows = read_csv(out)
    assert 1.8 <= float(rows[-1][6]) <= 2.2
    assert 2.8 <= float(rows[-1][5]) <= 3.2


def test_convergence_single_level_has_empty_rates(tmp_path):
    out = str(tmp_path / "one.csv")
    assert cli.main(["convergence", "--levels", "1", "--out", out]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 1
    assert rows[0][5] == "" and rows[0][6] == ""


def test_convergence_csv_byte_identical(tmp_path):
    args = ["convergence", "--family", "distortedQuads", "--levels", "2",
            "--degree", "1"]
    a = str(tmp_path / "a.csv")
    b = str(tmp_path / "b.csv")
    assert cli.main(args + ["--out", a]) == 0
    assert cli.main(args + ["--out", b]) == 0
    assert filecmp.cmp(a, b, shallow=False)


# -- mesh tooling --------------------------------------------------------


def info_lines(capsys, path):
    assert cli.main(["mesh", "info", path]) == 0
    out = capsys.readouterr().out.splitlines()
    return {ln.split(":")[0]: ln.split(":", 1)[1].strip() for ln in out}


def test_mesh_gen_then_info(tmp_path, capsys):
    path = str(tmp_path / "m.poly2d")
    assert cli.main(["mesh", "gen", "quads:3", "-o", path]) == 0
    capsys.readouterr()
    info = info_lines(capsys, path)
    assert info["vertices"] == "16"
    assert info["elements"] == "9"
    assert abs(float(info["area"]) - 1.0) < 1e-12
    assert info["conforming"] == "yes"


def test_mesh_cut_conserves_area(tmp_path, capsys):
    path = str(tmp_path / "m.poly2d")
    cut = str(tmp_path / "cut.poly2d")
    assert cli.main(["mesh", "gen", "quads:4", "-o", path]) == 0
    assert cli.main(["mesh", "cut", path, "--line", "1,-0.31,0.4",
                     "-o", cut]) == 0
    capsys.readouterr()
    info = info_lines(capsys, cut)
    assert abs(float(info["area"]) - 1.0) < 1e-12
    assert int(info["elements"]) > 16


def test_mesh_cut_in_place_by_default(tmp_path, capsys):
    path = str(tmp_path / "m.poly2d")
    assert cli.main(["mesh", "gen", "quads:2", "-o", path]) == 0
    assert cli.main(["mesh", "cut", path, "--line", "1,0,0.31"]) == 0
    capsys.readouterr()
    info = info_lines(capsys, path)
    assert int(info["elements"]) == 6


def test_mesh_cut_bad_line_exits_1(tmp_path, capsys):
    path = str(tmp_path / "m.poly2d")
    assert cli.main(["mesh", "gen", "quads:2", "-o", path]) == 0
    assert cli.main(["mesh", "cut", path, "--line", "1;0;0.5"]) == 1
    assert "a,b,c" in capsys.readouterr().err


def test_mesh_merge_adds_areas(tmp_path, capsys):
    a = str(tmp_path / "a.poly2d")
    b = str(tmp_path / "b.poly2d")
    out = str(tmp_path / "ab.poly2d")
    assert cli.main(["mesh", "gen", "quads:1", "-o", a]) == 0
    sq = np.array([[1, 0], [2, 0], [2, 1], [1, 1]], float)
    write_mesh(PolyMesh(sq, [[0, 1, 2, 3]]), b)
    assert cli.main(["mesh", "merge", a, b, "-o", out]) == 0
    capsys.readouterr()
    info = info_lines(capsys, out)
    assert int(info["elements"]) == 2
    assert abs(float(info["area"]) - 2.0) < 1e-12


def test_mesh_merge_disjoint_exits_1(tmp_path, capsys):
    a = str(tmp_path / "a.poly2d")
    b = str(tmp_path / "b.poly2d")
    assert cli.main(["mesh", "gen", "quads:1", "-o", a]) == 0
    sq = np.array([[5, 5], [6, 5], [6, 6], [5, 6]], float)
    write_mesh(PolyMesh(sq, [[0, 1, 2, 3]]), b)
    capsys.readouterr()
    assert cli.main(["mesh", "merge", a, b]) == 1
    assert capsys.readouterr().err.startswith("error:")


# -- quadrature ----------------------------------------------------------


def test_quad_hexagon_compresses_within_budget(tmp_path, capsys):
    path = hexagon_file(tmp_path)
    out = str(tmp_path / "rule.csv")
    rc = cli.main(["quad", "--mesh", path, "--degree", "2",
                   "--compress", "--out", out])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    total = [ln for ln in lines if ln.startswith("total:")][0]
    fields = dict(p.split("=") for p in total.split()[1:])
    assert int(fields["after"]) <= 6
    assert fields["verdict"] == "PASS"
    # weights of the compressed rule must still integrate 1 exactly
    _, rows = read_csv(out)
    area = 1.5 * np.sqrt(3.0)
    assert abs(sum(float(r[3]) for r in rows) - area) < 1e-12


def test_quad_degree_zero_single_point_per_element(capsys):
    rc = cli.main(["quad", "--gen", "quads:2", "--degree", "0",
                   "--compress"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    for ln in lines:
        if ln.startswith("element"):
            fields = dict(p.split("=") for p in ln.split()[2:4])
            assert int(fields["after"]) == 1
            assert ln.endswith("PASS")


def test_quad_negative_degree_exits_1(capsys):
    assert cli.main(["quad", "--gen", "quads:2", "--degree", "-1"]) == 1
    assert "degree" in capsys.readouterr().err


# -- VTK export ----------------------------------------------------------


def test_vtk_output_parses_back(tmp_path):
    path = holed_file(tmp_path)
    vtk = str(tmp_path / "sol.vtk")
    rc = cli.main(["solve", "--mesh", path, "--degree", "2",
                   "--problem", "polyK", "--out", vtk])
    assert rc == 0
    lines = open(vtk).read().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    npts = int(lines[4].split()[1])
    assert npts == 8
    at = 5 + npts
    ncells, total = (int(t) for t in lines[at].split()[1:])
    cells = []
    for ln in lines[at + 1 : at + 1 + ncells]:
        ids = [int(t) for t in ln.split()]
        assert ids[0] == len(ids) - 1
        assert all(0 <= i < npts for i in ids[1:])
        cells.append(ids)
    assert sum(len(c) for c in cells) == total
    at += 1 + ncells
    assert lines[at].split() == ["CELL_TYPES", str(ncells)]
    types = [int(t) for t in lines[at + 1 : at + 1 + ncells]]
    assert set(types) <= {5, 7}
    # one polygon cell (the hole filler), the rest triangles
    assert types.count(7) == 1
    body = "\n".join(lines[at + 1 + ncells :])
    assert "POINT_DATA %d" % npts in body
    assert "SCALARS u double 1" in body
    assert "CELL_DATA %d" % ncells in body
    assert "proj_coeffs 6 %d double" % ncells in body


def test_vtk_point_data_matches_vertex_dofs(tmp_path):
    vtk = str(tmp_path / "sol.vtk")
    rc = cli.main(["solve", "--gen", "quads:2", "--degree", "1",
                   "--problem", "polyK", "--out", vtk])
    assert rc == 0
    lines = open(vtk).read().splitlines()
    i = lines.index("LOOKUP_TABLE default")
    vals = np.array([float(v) for v in lines[i + 1 : i + 10]])
    # u = 1 + x + y at the nine grid vertices of quads:2
    xs = np.array([0.0, 0.5, 1.0] * 3)
    ys = np.repeat([0.0, 0.5, 1.0], 3)
    assert np.allclose(vals, 1.0 + xs + ys, atol=1e-10)
