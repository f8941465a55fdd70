#!/usr/bin/env python3
"""Generate the unstructured benchmark meshes shipped with the core crate.

Requires the `triangle` package (Python bindings of Shewchuk's Triangle).

Every mesh is a unit-square (or rectangle) triangulation conforming to a set
of feature segments.  Physical tags follow the convention used by the builtin
scenarios:

    1 left, 2 right, 3 bottom, 4 top      boundary curves
    10 + i                                 i-th feature segment
    cell region tags                       surface entities (default 1)

Output is Gmsh MSH 4.1 ASCII.  Run from the repository root:

    python3 tools/make_meshes.py
"""

import csv
import math
import os
import sys

import numpy as np
import triangle

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "crates", "core", "data")


def read_network(name):
    with open(os.path.join(DATA, "networks", name)) as fh:
        rows = list(csv.DictReader(fh))
    return [
        (row["kind"], (float(row["x0"]), float(row["y0"])), (float(row["x1"]), float(row["y1"])))
        for row in rows
    ]


def seg_intersection(p, q, r, s, eps=1e-12):
    """Intersection point of segments pq and rs, or None."""
    d1 = (q[0] - p[0], q[1] - p[1])
    d2 = (s[0] - r[0], s[1] - r[1])
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) < eps:
        return None
    t = ((r[0] - p[0]) * d2[1] - (r[1] - p[1]) * d2[0]) / den
    u = ((r[0] - p[0]) * d1[1] - (r[1] - p[1]) * d1[0]) / den
    if -eps <= t <= 1 + eps and -eps <= u <= 1 + eps:
        return (p[0] + t * d1[0], p[1] + t * d1[1])
    return None


def param_on(p, q, x):
    d = (q[0] - p[0], q[1] - p[1])
    l2 = d[0] ** 2 + d[1] ** 2
    return ((x[0] - p[0]) * d[0] + (x[1] - p[1]) * d[1]) / l2


class Pslg:
    def __init__(self):
        self.points = []
        self.index = {}
        self.segments = []
        self.markers = []

    def point(self, x):
        key = (round(x[0], 10), round(x[1], 10))
        if key not in self.index:
            self.index[key] = len(self.points)
            self.points.append((float(x[0]), float(x[1])))
        return self.index[key]

    def polyline(self, p, q, cuts, h, marker, count=None):
        """Add segment pq split at the parameters in `cuts`, then subdivided."""
        ts = sorted(set([0.0, 1.0] + [min(max(t, 0.0), 1.0) for t in cuts]))
        merged = [ts[0]]
        for t in ts[1:]:
            if t - merged[-1] > 1e-9:
                merged.append(t)
        ts = merged
        length = math.dist(p, q)
        for a, b in zip(ts[:-1], ts[1:]):
            if count is not None:
                n = max(1, round(count * (b - a)))
            else:
                n = max(1, math.ceil((b - a) * length / h - 1e-9))
            prev = None
            for k in range(n + 1):
                t = a + (b - a) * k / n
                idx = self.point((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
                if prev is not None:
                    self.segments.append((prev, idx))
                    self.markers.append(marker)
                prev = idx


def build(features, h_feature, side_counts, size=(1.0, 1.0), h_boundary=None):
    """features: list of (tag, p, q). side_counts: (bottom, right, top, left) or None."""
    lx, ly = size
    corners = [(0.0, 0.0), (lx, 0.0), (lx, ly), (0.0, ly)]
    sides = [(corners[0], corners[1], 3), (corners[1], corners[2], 2),
             (corners[2], corners[3], 4), (corners[3], corners[0], 1)]
    pslg = Pslg()
    for k, (p, q, marker) in enumerate(sides):
        cuts = []
        for _, a, b in features:
            for x in (a, b):
                t = param_on(p, q, x)
                proj = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
                if 0.0 < t < 1.0 and math.dist(proj, x) < 1e-12:
                    cuts.append(t)
        count = side_counts[k] if side_counts else None
        if count is not None:
            # key points must land on the uniform subdivision
            for t in cuts:
                assert abs(t * count - round(t * count)) < 1e-9, (marker, t, count)
            pslg.polyline(p, q, [], None, marker, count=count)
        else:
            pslg.polyline(p, q, cuts, h_boundary or h_feature, marker)
    for i, (tag, p, q) in enumerate(features):
        cuts = []
        for j, (_, r, s) in enumerate(features):
            if i == j:
                continue
            x = seg_intersection(p, q, r, s)
            if x is not None:
                cuts.append(param_on(p, q, x))
        pslg.polyline(p, q, cuts, h_feature, tag)
    return pslg


def triangulate(pslg, opts):
    data = dict(
        vertices=np.array(pslg.points),
        segments=np.array(pslg.segments),
        segment_markers=np.array(pslg.markers, dtype=np.int32).reshape(-1, 1),
    )
    return triangle.triangulate(data, opts)


def region_of(centroid, regions):
    for tag, pred in regions:
        if pred(centroid):
            return tag
    return 1


def write_msh41(path, tri, regions=(), names=None):
    verts = tri["vertices"]
    tris = tri["triangles"]
    segs = tri["segments"]
    marks = tri["segment_markers"].ravel()
    cell_tags = []
    for t in tris:
        c = verts[t].mean(axis=0)
        cell_tags.append(region_of(c, regions))
    curve_tags = sorted(set(int(m) for m in marks if m != 0))
    surf_tags = sorted(set(cell_tags))
    names = names or {}
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    out = []
    out.append("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
    out.append("$PhysicalNames\n%d\n" % (len(curve_tags) + len(surf_tags)))
    for t in curve_tags:
        out.append('1 %d "%s"\n' % (t, names.get(t, "curve%d" % t)))
    for t in surf_tags:
        out.append('2 %d "%s"\n' % (t, names.get(("cell", t), "region%d" % t)))
    out.append("$EndPhysicalNames\n")
    out.append("$Entities\n0 %d %d 0\n" % (len(curve_tags), len(surf_tags)))
    bbox = "%.17g %.17g 0 %.17g %.17g 0" % (lo[0], lo[1], hi[0], hi[1])
    for t in curve_tags:
        out.append("%d %s 1 %d 0\n" % (t, bbox, t))
    for t in surf_tags:
        out.append("%d %s 1 %d 0\n" % (t, bbox, t))
    out.append("$EndEntities\n")
    n = len(verts)
    out.append("$Nodes\n1 %d 1 %d\n2 %d 0 %d\n" % (n, n, surf_tags[0], n))
    for i in range(n):
        out.append("%d\n" % (i + 1))
    for x, y in verts:
        out.append("%.17g %.17g 0\n" % (x, y))
    out.append("$EndNodes\n")
    blocks = []
    for t in curve_tags:
        blocks.append((1, t, 1, [s for s, m in zip(segs, marks) if m == t]))
    for t in surf_tags:
        blocks.append((2, t, 2, [c for c, ct in zip(tris, cell_tags) if ct == t]))
    total = sum(len(b[3]) for b in blocks)
    out.append("$Elements\n%d %d 1 %d\n" % (len(blocks), total, total))
    tag = 1
    for dim, ent, etype, elems in blocks:
        out.append("%d %d %d %d\n" % (dim, ent, etype, len(elems)))
        for e in elems:
            out.append("%d %s\n" % (tag, " ".join(str(int(v) + 1) for v in e)))
            tag += 1
    out.append("$EndElements\n")
    with open(path, "w") as fh:
        fh.write("".join(out))
    print("%s: %d vertices, %d triangles" % (os.path.basename(path), n, len(tris)))


def search_exact(pslg, nverts):
    """Find quality/max-area switches giving exactly `nverts` vertices (no Steiner points on segments)."""
    for quality in (20, 22, 25, 28, 30, 32):
        for area in np.geomspace(0.002, 0.02, 300):
            tri = triangulate(pslg, "pq%dYYa%.8f" % (quality, area))
            if len(tri["vertices"]) == nverts:
                return tri
    raise RuntimeError("no exact vertex count %d" % nverts)


def main():
    out = os.path.join(DATA, "meshes")
    os.makedirs(out, exist_ok=True)
    half = [(1, lambda c: c[0] < 0.5), (2, lambda c: c[0] >= 0.5)]

    # full-height split of the unit square at x = 0.5 (convergence test and 1D oracle grids)
    split = [(10, (0.5, 0.0), (0.5, 1.0))]
    for name, opts, h in [
        ("square_split_coarse.msh", "pq30a0.012", 1 / 6),
        ("square_split_256.msh", "pq30a0.0062", 1 / 10),
        ("square_split_fine.msh", "pq30a0.0011", 1 / 22),
    ]:
        tri = triangulate(build(split, h, None), opts + "YY")
        write_msh41(os.path.join(out, name), tri, half)

    # single vertical barrier: 253 vertices, 450 triangles
    vertical = [(10, (0.5, 0.5), (0.5, 1.0))]
    tri = search_exact(build(vertical, 1 / 14, (14, 13, 14, 13)), 253)
    write_msh41(os.path.join(out, "ex52_vertical.msh"), tri)

    # single slanted barrier: 229 vertices, 404 triangles
    slanted = [(10, (0.25, 0.75), (0.75, 0.25))]
    tri = search_exact(build(slanted, 1 / 12, (13, 13, 13, 13)), 229)
    write_msh41(os.path.join(out, "ex52_slanted.msh"), tri)

    # regular barrier network
    regular = [(10 + i, p, q) for i, (_, p, q) in enumerate(read_network("regular.csv"))]
    tri = triangulate(build(regular, 1 / 16, (10, 12, 12, 8)), "pq30a0.0045YY")
    write_msh41(os.path.join(out, "ex53_regular.msh"), tri)

    # complex fracture/barrier network
    complex_net = [(10 + i, p, q) for i, (_, p, q) in enumerate(read_network("complex.csv"))]
    tri = triangulate(build(complex_net, 1 / 40, (25, 25, 25, 25)), "pq30a0.00055YY")
    write_msh41(os.path.join(out, "ex54_complex.msh"), tri)


if __name__ == "__main__":
    sys.exit(main())
