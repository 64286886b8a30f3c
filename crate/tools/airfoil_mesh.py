#!/usr/bin/env python3
"""Generate the checked-in airfoil mesh (Gmsh ASCII 2.2).

NACA 0012 profile with closed trailing edge, leading edge at the origin,
chord 1, inside the square (-8, 8)^2. The mesh is graded towards the
airfoil and its wake and is tuned to contain exactly TARGET_CELLS triangles.

Requires the `triangle` package (Shewchuk's Triangle bindings).

Physical groups: 1 left, 2 right, 3 top, 4 bottom, 5 airfoil, 6 fluid.
"""
import argparse
import math

import numpy as np
import triangle

TARGET_CELLS = 8808
HALF = 8.0


def naca0012(x):
    return 0.6 * (0.2969 * math.sqrt(x) - 0.1260 * x - 0.3516 * x**2
                  + 0.2843 * x**3 - 0.1036 * x**4)


def airfoil_points(n_half):
    # cosine spacing, clockwise starting at the trailing edge over the top
    betas = np.linspace(0.0, math.pi, n_half + 1)
    xs = 0.5 * (1.0 - np.cos(betas))
    upper = [(x, naca0012(x)) for x in xs[::-1]]  # TE -> LE
    lower = [(x, -naca0012(x)) for x in xs[1:-1]]  # LE -> TE, endpoints shared
    return upper + lower


def square_points(n_side):
    pts, marks = [], []
    t = np.linspace(-HALF, HALF, n_side + 1)[:-1]
    for s in t:
        pts.append((s, -HALF)); marks.append(4)
    for s in t:
        pts.append((HALF, s)); marks.append(2)
    for s in t:
        pts.append((-s, HALF)); marks.append(3)
    for s in t:
        pts.append((-HALF, -s)); marks.append(1)
    return pts, marks


def sizing(p, foil, h_wall, growth, h_far):
    d = np.full(len(p), np.inf)
    for i in range(len(foil)):
        a, b = foil[i], foil[(i + 1) % len(foil)]
        ab = b - a
        t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
        q = a + t[:, None] * ab
        d = np.minimum(d, np.linalg.norm(p - q, axis=1))
    # wake: distance to the centerline downstream of the trailing edge, damped
    wake = np.where(p[:, 0] > 1.0, np.abs(p[:, 1]) + 0.08 * (p[:, 0] - 1.0), np.inf)
    d = np.minimum(d, 1.5 * wake + 0.02)
    return np.minimum(h_far, h_wall + growth * d)


def build(args):
    foil = airfoil_points(args.n_half)
    sq, sq_marks = square_points(args.n_side)
    verts = np.array(sq + foil)
    nsq = len(sq)
    segs, seg_marks = [], []
    for i in range(nsq):
        segs.append((i, (i + 1) % nsq))
        # segment i lies on the side of its first vertex
        seg_marks.append(sq_marks[i])
    nf = len(foil)
    for i in range(nf):
        segs.append((nsq + i, nsq + (i + 1) % nf))
        seg_marks.append(5)
    pslg = dict(vertices=verts, segments=np.array(segs), segment_markers=np.array(seg_marks)[:, None],
                holes=np.array([[0.5, 0.0]]))
    mesh = triangle.triangulate(pslg, "pq30Y")
    foil_arr = np.array(foil)
    for _ in range(12):
        tri = mesh["triangles"]
        p = mesh["vertices"]
        c = p[tri].mean(axis=1)
        h = sizing(c, foil_arr, args.h_wall, args.growth, args.h_far)
        mesh["triangle_max_area"] = (math.sqrt(3) / 4.0 * h**2)
        mesh = triangle.triangulate(mesh, "rpq30aY")
    return pslg, mesh, nsq, nf


def adjust_count(pslg, mesh, n_boundary, target, foil):
    verts = mesh["vertices"]
    interior = verts[n_boundary:]
    want = (target - n_boundary) // 2
    assert (target - n_boundary) % 2 == 0, "boundary vertex count must have the parity of the target"
    d = np.full(len(interior), np.inf)
    for i in range(len(foil)):
        a, b = foil[i], foil[(i + 1) % len(foil)]
        ab = b - a
        t = np.clip(((interior - a) @ ab) / (ab @ ab), 0.0, 1.0)
        d = np.minimum(d, np.linalg.norm(interior - (a + t[:, None] * ab), axis=1))
    if len(interior) > want:
        # drop the interior points farthest from the obstacle
        keep = np.argsort(d)[:want]
        interior = interior[np.sort(keep)]
    elif len(interior) < want:
        tri = mesh["triangles"]
        p = mesh["vertices"]
        e1, e2 = p[tri[:, 1]] - p[tri[:, 0]], p[tri[:, 2]] - p[tri[:, 0]]
        area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        extra = p[tri[np.argsort(-area)[: want - len(interior)]]].mean(axis=1)
        interior = np.vstack([interior, extra])
    inp = dict(pslg)
    inp["vertices"] = np.vstack([pslg["vertices"], interior])
    out = triangle.triangulate(inp, "pY")
    return out


def write_msh(path, mesh, nsq):
    v = mesh["vertices"]
    tri = mesh["triangles"]
    segs = mesh["segments"]
    marks = mesh["segment_markers"].ravel()
    names = {1: "left", 2: "right", 3: "top", 4: "bottom", 5: "airfoil"}
    with open(path, "w") as f:
        f.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        f.write("$PhysicalNames\n6\n")
        for k in sorted(names):
            f.write(f'1 {k} "{names[k]}"\n')
        f.write('2 6 "fluid"\n$EndPhysicalNames\n')
        f.write(f"$Nodes\n{len(v)}\n")
        for i, (x, y) in enumerate(v):
            f.write(f"{i + 1} {x:.17g} {y:.17g} 0\n")
        f.write("$EndNodes\n")
        f.write(f"$Elements\n{len(segs) + len(tri)}\n")
        eid = 1
        for (a, b), m in zip(segs, marks):
            f.write(f"{eid} 1 2 {m} {m} {a + 1} {b + 1}\n")
            eid += 1
        for a, b, c in tri:
            pa, pb, pc = v[a], v[b], v[c]
            if (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]) < 0:
                b, c = c, b
            f.write(f"{eid} 2 2 6 6 {a + 1} {b + 1} {c + 1}\n")
            eid += 1
        f.write("$EndElements\n")


def min_angle(mesh):
    p = mesh["vertices"][mesh["triangles"]]
    worst = 180.0
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cosang = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        worst = min(worst, np.degrees(np.arccos(np.clip(cosang, -1, 1))).min())
    return worst


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="meshes/naca0012.msh")
    ap.add_argument("--n-half", type=int, default=100)
    ap.add_argument("--n-side", type=int, default=24)
    ap.add_argument("--h-wall", type=float, default=0.012)
    ap.add_argument("--growth", type=float, default=0.20)
    ap.add_argument("--h-far", type=float, default=1.0)
    args = ap.parse_args()
    pslg, mesh, nsq, nf = build(args)
    n_boundary = nsq + nf
    print(f"quality mesh: {len(mesh['triangles'])} triangles, min angle {min_angle(mesh):.1f}")
    final = adjust_count(pslg, mesh, n_boundary, TARGET_CELLS, np.array(airfoil_points(args.n_half)))
    ntri = len(final["triangles"])
    print(f"final mesh: {ntri} triangles, {len(final['vertices'])} vertices, min angle {min_angle(final):.1f}")
    assert ntri == TARGET_CELLS, ntri
    write_msh(args.out, final, nsq)


if __name__ == "__main__":
    main()
