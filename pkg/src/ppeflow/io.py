"""File emission: VTK legacy ASCII fields, PGM stability rasters, CSV tables."""

from __future__ import annotations

import csv
import os
from contextlib import contextmanager

import numpy as np

from .fem.elements import REF_VERTICES

VTK_TRIANGLE = 5
PGM_STABLE, PGM_POLE, PGM_UNSTABLE = 0, 128, 255


def fmt(v: float) -> str:
    """Scientific notation with 6 significant digits."""
    v = float(v)
    return f"{v:.5e}" if np.isfinite(v) else "nan"


@contextmanager
def _open_text(path_or_file):
    if isinstance(path_or_file, (str, bytes, os.PathLike)):
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            yield fh
    else:
        yield path_or_file


def write_csv(path_or_file, header, rows) -> None:
    with _open_text(path_or_file) as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


# ----------------------------------------------------------------------------
# VTK


def vertex_fields(state, disc):
    """Pressure, vorticity and velocity at mesh vertices plus mean divergence per cell.

    Scalars are continuous, so each vertex takes the value from any incident
    triangle; the RT velocity is averaged over incident triangles.
    """
    mesh = disc.mesh
    S, V, P = disc.spaces
    tri = mesh.triangles
    nv = mesh.n_vertices

    def scatter_scalar(vals):
        out = np.zeros(nv)
        out[tri.ravel()] = vals.ravel()
        return out

    p = scatter_scalar(P.evaluate_ref(state.p, REF_VERTICES)[0])
    w = scatter_scalar(S.evaluate_ref(state.sigma, REF_VERTICES)[0])
    uv, _, _ = V.evaluate_ref(state.u, REF_VERTICES, derivatives=False)
    vel = np.zeros((nv, 2))
    np.add.at(vel, tri.ravel(), uv.reshape(-1, 2))
    count = np.bincount(tri.ravel(), minlength=nv)
    vel /= np.maximum(count, 1)[:, None]

    q, _, wq = V.quadrature(2 * disc.r)
    _, div, _ = V.evaluate_ref(state.u, q.points, derivatives=False)
    cell_div = np.sum(div * wq, axis=1) / np.sum(wq, axis=1)
    return p, w, vel, cell_div


def write_vtk(state, disc, path_or_file) -> None:
    """Legacy ASCII 3.0 UNSTRUCTURED_GRID of the triangulation and the state."""
    mesh = disc.mesh
    p, w, vel, div = vertex_fields(state, disc)
    with _open_text(path_or_file) as fh:
        out = fh.write
        out("# vtk DataFile Version 3.0\n")
        out(f"ppeflow state t={state.t:.17g}\n")
        out("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        out(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            out(f"{x:.17g} {y:.17g} 0\n")
        nt = mesh.n_triangles
        out(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            out(f"3 {a} {b} {c}\n")
        out(f"CELL_TYPES {nt}\n")
        out(f"{VTK_TRIANGLE}\n" * nt)
        out(f"CELL_DATA {nt}\nSCALARS divergence double 1\nLOOKUP_TABLE default\n")
        out("".join(f"{v:.17g}\n" for v in div))
        out(f"POINT_DATA {mesh.n_vertices}\n")
        for name, arr in (("pressure", p), ("vorticity", w)):
            out(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            out("".join(f"{v:.17g}\n" for v in arr))
        out("VECTORS velocity double\n")
        out("".join(f"{a:.17g} {b:.17g} 0\n" for a, b in vel))


# ----------------------------------------------------------------------------
# PGM


def raster_pixels(raster) -> np.ndarray:
    """8-bit image with row 0 at the largest beta."""
    v = np.asarray(raster.values, dtype=float)
    img = np.full(v.shape, PGM_UNSTABLE, dtype=np.uint8)
    img[np.isfinite(v) & (np.abs(v) <= 1.0)] = PGM_STABLE
    img[~np.isfinite(v)] = PGM_POLE
    return img[::-1]


def write_pgm(raster, path) -> None:
    img = raster_pixels(raster)
    h, w = img.shape
    b = raster.beta
    a = raster.alpha
    header = (
        "P5\n"
        f"# stability raster: 0 |R|<=1, 255 |R|>1, 128 pole; row 0 beta={b[-1]:.6g}, last row beta={b[0]:.6g}\n"
        f"# columns alpha from {a[0]:.6g} to {a[-1]:.6g}\n"
        f"{w} {h}\n255\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Minimal P5 reader used to check round trips."""
    data = open(path, "rb").read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    pos += 1
    return np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w)


# ----------------------------------------------------------------------------
# CSV schemas

RASTER_COLUMNS = ("alpha", "beta", "abs_R")
PROFILE_COLUMNS = ("s", "u_vertical", "v_horizontal")
STREAMLINE_COLUMNS = ("line", "point", "x", "y")


def write_raster_csv(raster, path_or_file) -> None:
    A, B = np.meshgrid(raster.alpha, raster.beta)
    rows = zip(A.ravel(), B.ravel(), np.abs(np.asarray(raster.values, dtype=float)).ravel())
    write_csv(path_or_file, RASTER_COLUMNS, rows)


def write_profiles_csv(profiles: dict, path_or_file) -> None:
    write_csv(path_or_file, PROFILE_COLUMNS, zip(*(profiles[c] for c in PROFILE_COLUMNS)))


def write_streamlines_csv(lines, path_or_file) -> None:
    rows = ((str(i), str(j), x, y) for i, line in enumerate(lines.lines) for j, (x, y) in enumerate(line))
    write_csv(path_or_file, STREAMLINE_COLUMNS, rows)
