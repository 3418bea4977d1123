"""Command-line driver: solve, convergence studies, mesh tooling, quadrature.

Exit codes: 0 success, 1 input error (bad flags, missing or malformed
files, invalid geometry), 2 numeric failure (solver did not converge).
All floating point output uses 17 significant digits so repeated runs are
byte-identical and the CSVs round-trip through float parsing.
"""

import argparse
import runpy
import sys

import numpy as np

from .errors import PolyVemError
from .geometry import triangulate
from .localmat import MatrixTag, find_or_compute
from .mesh import (
    CutLine,
    cut_mesh,
    gen_structured,
    merge_meshes,
    read_mesh,
    write_mesh,
)
from .monomials import basis_size
from .quadrature import certify_rule, compress_rule, polygon_rule
from .system import apply_dirichlet, assemble, error_norms, solve

FMT = "%.17g"


class CliInputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the contract here
    # reserves 2 for numeric failures, so route usage problems to 1
    def error(self, message):
        raise CliInputError(message)


# -- problems ------------------------------------------------------------


def _sinsin():
    def u(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    def f(x, y):
        return 2.0 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)

    def grad(x, y):
        return (
            np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
            np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
        )

    return u, f, grad


def _polyk(k):
    # the complete degree-k polynomial with unit coefficients; its
    # negative Laplacian is assembled term by term
    terms = [(a, d - a) for d in range(k + 1) for a in range(d + 1)]

    def u(x, y):
        return sum(x**a * y**b for a, b in terms)

    def f(x, y):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for a, b in terms:
            if a >= 2:
                out -= a * (a - 1) * x ** (a - 2) * y**b
            if b >= 2:
                out -= b * (b - 1) * x**a * y ** (b - 2)
        return out

    def grad(x, y):
        gx = np.zeros_like(np.asarray(x, dtype=float))
        gy = np.zeros_like(gx)
        for a, b in terms:
            if a >= 1:
                gx += a * x ** (a - 1) * y**b
            if b >= 1:
                gy += b * x**a * y ** (b - 1)
        return gx, gy

    return u, f, grad


def resolve_problem(name, degree):
    """Problem preset: exact solution, source and gradient callables."""
    if name == "sinsin":
        return _sinsin()
    if name == "polyK":
        return _polyk(degree)
    if name.startswith("custom:"):
        path = name.split(":", 1)[1]
        try:
            ns = runpy.run_path(path)
        except FileNotFoundError:
            raise CliInputError("problem file not found: %s" % path)
        missing = [key for key in ("u", "f", "grad") if key not in ns]
        if missing:
            raise CliInputError(
                "problem file %s must define %s" % (path, ", ".join(missing))
            )
        return ns["u"], ns["f"], ns["grad"]
    raise CliInputError("unknown problem %r" % name)


def _read(path):
    try:
        return read_mesh(path)
    except FileNotFoundError:
        raise CliInputError("mesh file not found: %s" % path)


def _resolve_mesh(args):
    if getattr(args, "mesh", None):
        return _read(args.mesh)
    if getattr(args, "gen", None):
        return _parse_gen(args.gen)
    raise CliInputError("one of --mesh or --gen is required")


def _parse_gen(spec):
    try:
        family, n = spec.split(":")
        n = int(n)
    except ValueError:
        raise CliInputError("expected family:n, got %r" % spec)
    try:
        return gen_structured(family, n)
    except ValueError as err:
        raise CliInputError(str(err))


# -- output writers ------------------------------------------------------


def write_vtk(path, mesh, solution, coeffs):
    """Legacy ASCII VTK export of the solution and projection.

    Hole-free elements map to VTK_POLYGON cells; elements with holes are
    triangulated into VTK_TRIANGLE cells because the legacy format has no
    hole-capable planar cell.  Every cell carries its parent element id
    and that element's projection coefficients, padded with zeros up to
    the largest element.
    """
    cells = []
    parents = []
    for eid, (f, (outer, holes)) in enumerate(zip(mesh.facets, mesh.elements)):
        if holes:
            # facet coords are the mesh vertex pool, so triangle ids
            # are already global
            for tri in triangulate(f):
                cells.append((5, [int(t) for t in tri]))
                parents.append(eid)
        else:
            cells.append((7, list(outer)))
            parents.append(eid)
    ncomp = max(len(c) for c in coeffs)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("polyvem solution\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write("POINTS %d double\n" % mesh.num_vertices)
        for x, y in mesh.vertices:
            fh.write((FMT + " " + FMT + " 0\n") % (x, y))
        total = sum(1 + len(ids) for _, ids in cells)
        fh.write("CELLS %d %d\n" % (len(cells), total))
        for _, ids in cells:
            fh.write(" ".join([str(len(ids))] + [str(i) for i in ids]) + "\n")
        fh.write("CELL_TYPES %d\n" % len(cells))
        for ctype, _ in cells:
            fh.write("%d\n" % ctype)
        fh.write("POINT_DATA %d\n" % mesh.num_vertices)
        fh.write("SCALARS u double 1\nLOOKUP_TABLE default\n")
        for v in solution[: mesh.num_vertices]:
            fh.write((FMT + "\n") % v)
        fh.write("CELL_DATA %d\n" % len(cells))
        fh.write("SCALARS element_id int 1\nLOOKUP_TABLE default\n")
        for p in parents:
            fh.write("%d\n" % p)
        fh.write("FIELD projection 1\n")
        fh.write("proj_coeffs %d %d double\n" % (ncomp, len(cells)))
        for p in parents:
            row = np.zeros(ncomp)
            row[: len(coeffs[p])] = coeffs[p]
            fh.write(" ".join(FMT % v for v in row) + "\n")


def _write_errors_csv(path, h, ndof, el2, eh1):
    with open(path, "w") as fh:
        fh.write("h,nDof,errL2,errH1\n")
        fh.write((FMT + ",%d," + FMT + "," + FMT + "\n") % (h, ndof, el2, eh1))


def _dump_matrices(prefix, eid, element, cache):
    path = "%s_element%d.csv" % (prefix, eid)
    with open(path, "w") as fh:
        for tag in MatrixTag:
            M = np.atleast_2d(find_or_compute(cache, element, tag))
            fh.write("tag,%s\n" % tag.name)
            for row in M:
                fh.write(",".join(FMT % v for v in row) + "\n")
    return path


# -- commands ------------------------------------------------------------


def cmd_solve(args):
    mesh = _resolve_mesh(args)
    u, f, grad = resolve_problem(args.problem, args.degree)
    sys_ = assemble(mesh, args.degree, f)
    apply_dirichlet(sys_, u)
    x, report = solve(sys_, tol=args.tol, maxiter=args.maxiter)
    if not report.converged:
        print(
            "solver failed: %d iterations, residual %.3e"
            % (report.iterations, report.residual),
            file=sys.stderr,
        )
        return 2
    el2, eh1 = error_norms(mesh, args.degree, x, u, grad)
    h = max(fc.diameter for fc in mesh.facets)
    print(
        "solved: nDof=%d iters=%d residual=%.3e errL2=%.6e errH1=%.6e"
        % (sys_.num_dofs, report.iterations, report.residual, el2, eh1)
    )
    if args.out:
        coeffs = []
        for eid, (element, cache) in enumerate(sys_.caches):
            PiS = find_or_compute(cache, element, MatrixTag.PI_GRAD_STAR)
            coeffs.append(PiS @ x[sys_.dofmap.element_maps[eid]])
        write_vtk(args.out, mesh, x, coeffs)
    if args.errors:
        _write_errors_csv(args.errors, h, sys_.num_dofs, el2, eh1)
    if args.dump_matrices is not None:
        eid = args.dump_matrices
        if not 0 <= eid < mesh.num_elements:
            raise CliInputError("element id %d out of range" % eid)
        element, cache = sys_.caches[eid]
        path = _dump_matrices("matrices", eid, element, cache)
        print("matrices written to %s" % path)
    return 0


def cmd_convergence(args):
    u, f, grad = resolve_problem(args.problem, args.degree)
    rows = []
    for level in range(args.levels):
        n = 4 * 2**level
        mesh = gen_structured(args.family, n)
        sys_ = assemble(mesh, args.degree, f)
        apply_dirichlet(sys_, u)
        x, report = solve(sys_, tol=args.tol)
        if not report.converged:
            print("solver failed on level %d" % level, file=sys.stderr)
            return 2
        el2, eh1 = error_norms(mesh, args.degree, x, u, grad)
        h = max(fc.diameter for fc in mesh.facets)
        if rows:
            _, hp, _, l2p, h1p, _, _ = rows[-1]
            rl2 = np.log(l2p / el2) / np.log(hp / h)
            rh1 = np.log(h1p / eh1) / np.log(hp / h)
        else:
            rl2 = rh1 = None
        rows.append((level, h, sys_.num_dofs, el2, eh1, rl2, rh1))
    for level, h, nd, el2, eh1, rl2, rh1 in rows:
        rate = "" if rl2 is None else " rateL2=%.2f rateH1=%.2f" % (rl2, rh1)
        print("level %d: h=%.4e nDof=%d errL2=%.6e errH1=%.6e%s"
              % (level, h, nd, el2, eh1, rate))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("level,h,nDof,errL2,errH1,rateL2,rateH1\n")
            for level, h, nd, el2, eh1, rl2, rh1 in rows:
                cells = [str(level), FMT % h, str(nd), FMT % el2, FMT % eh1]
                cells.append("" if rl2 is None else FMT % rl2)
                cells.append("" if rh1 is None else FMT % rh1)
                fh.write(",".join(cells) + "\n")
    return 0


def cmd_mesh(args):
    if args.mesh_cmd == "gen":
        mesh = _parse_gen(args.spec)
        write_mesh(mesh, args.out)
        print("wrote %s: %d vertices, %d elements"
              % (args.out, mesh.num_vertices, mesh.num_elements))
        return 0
    if args.mesh_cmd == "cut":
        mesh = _read(args.path)
        try:
            a, b, c = (float(p) for p in args.line.split(","))
        except ValueError:
            raise CliInputError("expected --line a,b,c with numbers")
        out = cut_mesh(mesh, CutLine(a, b, c))
        dest = args.out or args.path
        write_mesh(out, dest)
        print("wrote %s: %d elements, area " % (dest, out.num_elements)
              + FMT % out.area)
        return 0
    if args.mesh_cmd == "merge":
        a = _read(args.first)
        b = _read(args.second)
        merged = merge_meshes(a, b, tol=args.merge_tol)
        dest = args.out or args.first
        write_mesh(merged, dest)
        print("wrote %s: %d elements, area " % (dest, merged.num_elements)
              + FMT % merged.area)
        return 0
    if args.mesh_cmd == "info":
        mesh = _read(args.path)
        print("vertices: %d" % mesh.num_vertices)
        print("elements: %d" % mesh.num_elements)
        print("edges: %d (%d boundary)"
              % (mesh.num_edges, len(mesh.boundary_edge_ids)))
        print("area: " + FMT % mesh.area)
        print("conforming: yes")
        return 0
    raise CliInputError("unknown mesh subcommand")


def cmd_quad(args):
    mesh = _resolve_mesh(args)
    if args.degree < 0:
        raise CliInputError("degree must be >= 0")
    rows = []
    all_pass = True
    before_total = after_total = 0
    for eid, facet in enumerate(mesh.facets):
        rule = polygon_rule(facet, args.degree)
        before = rule.npoints
        verdict = "PASS"
        if args.compress:
            rule = compress_rule(rule, frame=(facet.centroid, facet.diameter))
            if rule.compression_failed:
                verdict = "FAIL(compression)"
        ok, worst = certify_rule(rule, facet, degree=args.degree, tol=1e-12)
        if not ok:
            verdict = "FAIL(exactness %.2e)" % worst
        if verdict != "PASS":
            all_pass = False
        after = rule.npoints
        before_total += before
        after_total += after
        print("element %d: before=%d after=%d %s" % (eid, before, after, verdict))
        for (x, y), w in zip(rule.points, rule.weights):
            rows.append((eid, x, y, w))
    limit = basis_size(args.degree)
    print("total: before=%d after=%d budget-per-element=%d verdict=%s"
          % (before_total, after_total, limit, "PASS" if all_pass else "FAIL"))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("element,x,y,w\n")
            for eid, x, y, w in rows:
                fh.write(("%d," + FMT + "," + FMT + "," + FMT + "\n")
                         % (eid, x, y, w))
    return 0


# -- parser --------------------------------------------------------------


def _add_mesh_source(p):
    p.add_argument("--mesh", help="poly2d mesh file")
    p.add_argument("--gen", help="structured mesh family:n, e.g. quads:8")


def build_parser():
    parser = _Parser(prog="polyvem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a Poisson problem")
    _add_mesh_source(p)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--problem", default="sinsin",
                   help="sinsin, polyK or custom:<file.py>")
    p.add_argument("--out", help="VTK output path")
    p.add_argument("--errors", help="error CSV path")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--maxiter", type=int, default=None,
                   help="iteration cap (default: ten times the system size)")
    p.add_argument("--dump-matrices", type=int, metavar="ELEMENT",
                   help="write the cached matrices of one element as CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("convergence", help="refinement study")
    p.add_argument("--family", default="quads",
                   choices=["quads", "triangles", "distortedQuads"])
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--problem", default="sinsin")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("mesh", help="mesh generation and surgery")
    msub = p.add_subparsers(dest="mesh_cmd", required=True)
    g = msub.add_parser("gen")
    g.add_argument("spec", help="family:n")
    g.add_argument("-o", "--out", required=True)
    c = msub.add_parser("cut")
    c.add_argument("path")
    c.add_argument("--line", required=True, help="a,b,c for the line ax+by=c")
    c.add_argument("-o", "--out", help="output path (default: in place)")
    m = msub.add_parser("merge")
    m.add_argument("first")
    m.add_argument("second")
    m.add_argument("--merge-tol", type=float, default=None)
    m.add_argument("-o", "--out", help="output path (default: first input)")
    i = msub.add_parser("info")
    i.add_argument("path")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("quad", help="quadrature tables per element")
    _add_mesh_source(p)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--compress", action="store_true")
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_quad)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliInputError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1
    except PolyVemError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
