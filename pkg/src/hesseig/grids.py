"""Masked uniform grids over 2-D domains.

A GridField is a scalar field on a uniform grid covering the domain's
bounding box, with a boolean membership mask; values at nodes outside the
mask equal the prescribed boundary value.  GridGeometry precomputes the
cut-cell machinery shared by every solver on a given (domain, h) pair:
Shortley-Weller second-difference matrices along the axes and diagonals
(boundary-adjacent stencils use shortened arms with interpolated boundary
values), quadrature weights whose sum reproduces |Omega|, and distance
fields.  Grids are centered so the origin is exactly a node.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domains import Domain
from .errors import ParameterError

_THETA_MIN = 1e-9


@dataclass
class GridField:
    """Scalar field on a masked uniform grid."""

    h: float
    nx: int
    ny: int
    x0: float
    y0: float
    values: np.ndarray          # shape (ny, nx)
    inside: np.ndarray          # bool, shape (ny, nx)
    boundary_value: float = 0.0

    def __post_init__(self):
        if self.h <= 0:
            raise ParameterError("grid spacing must be positive")
        self.values = np.asarray(self.values, dtype=float).reshape(self.ny, self.nx)
        self.inside = np.asarray(self.inside, dtype=bool).reshape(self.ny, self.nx)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    def meshgrid(self):
        return np.meshgrid(self.xs, self.ys)

    def copy(self) -> "GridField":
        return GridField(self.h, self.nx, self.ny, self.x0, self.y0,
                         self.values.copy(), self.inside.copy(),
                         self.boundary_value)

    def with_values(self, values: np.ndarray) -> "GridField":
        out = self.copy()
        out.values = np.asarray(values, dtype=float).reshape(self.ny, self.nx).copy()
        out.values[~out.inside] = out.boundary_value
        return out

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values[self.inside]))) if self.inside.any() else 0.0

    # ---- serialization -------------------------------------------------

    def to_csv(self, path) -> None:
        """Plot-ready CSV with header x,y,u over every grid node."""
        xg, yg = self.meshgrid()
        with open(path, "w", encoding="ascii") as fh:
            fh.write("x,y,u\n")
            for j in range(self.ny):
                for i in range(self.nx):
                    fh.write(f"{xg[j, i]!r},{yg[j, i]!r},{self.values[j, i]!r}\n")

    _MAGIC = b"HGF1"

    def to_binary(self, path) -> None:
        """Round-trip binary layout (little-endian).

        magic 'HGF1' | int32 nx, ny | float64 h, x0, y0, boundary_value |
        packed mask bits (row-major, ceil(nx*ny/8) bytes) | float64 values
        (row-major).
        """
        with open(path, "wb") as fh:
            fh.write(self._MAGIC)
            fh.write(struct.pack("<ii", self.nx, self.ny))
            fh.write(struct.pack("<dddd", self.h, self.x0, self.y0,
                                 self.boundary_value))
            fh.write(np.packbits(self.inside.ravel()).tobytes())
            fh.write(self.values.astype("<f8").tobytes())

    @classmethod
    def from_binary(cls, path) -> "GridField":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != cls._MAGIC:
                raise ParameterError(f"not a grid-field file: bad magic {magic!r}")
            nx, ny = struct.unpack("<ii", fh.read(8))
            h, x0, y0, bval = struct.unpack("<dddd", fh.read(32))
            nbits = nx * ny
            mask_bytes = fh.read((nbits + 7) // 8)
            mask = np.unpackbits(np.frombuffer(mask_bytes, dtype=np.uint8),
                                 count=nbits).astype(bool).reshape(ny, nx)
            values = np.frombuffer(fh.read(8 * nbits), dtype="<f8").reshape(ny, nx)
        return cls(h, nx, ny, x0, y0, values.copy(), mask, bval)


class GridGeometry:
    """Cut-cell geometry and discrete operators for one (domain, h) pair."""

    #: directions as (di, dj, length factor); i indexes x, j indexes y
    _AXES = {"e": (1, 0, 1.0), "w": (-1, 0, 1.0), "n": (0, 1, 1.0), "s": (0, -1, 1.0)}
    _DIAGS = {"ne": (1, 1, np.sqrt(2.0)), "sw": (-1, -1, np.sqrt(2.0)),
              "nw": (-1, 1, np.sqrt(2.0)), "se": (1, -1, np.sqrt(2.0))}

    def __init__(self, domain: Domain, h: float):
        if h <= 0:
            raise ParameterError("grid spacing must be positive")
        self.domain = domain
        self.h = float(h)
        half = int(np.ceil(domain.bounding_radius / h)) + 2
        self.nx = self.ny = 2 * half + 1
        self.x0 = -half * h
        self.y0 = -half * h
        xs = self.x0 + h * np.arange(self.nx)
        ys = self.y0 + h * np.arange(self.ny)
        self.X, self.Y = np.meshgrid(xs, ys)
        self.R2 = self.X ** 2 + self.Y ** 2
        self.boundary_distance = np.asarray(domain.boundary_distance(self.X, self.Y),
                                            dtype=float)
        # nodes grazing the boundary are snapped out of the mask: arms shorter
        # than ~1e-4 h amplify rounding of sampled fields beyond usefulness
        self.inside = np.asarray(domain.inside(self.X, self.Y), dtype=bool) \
            & (self.boundary_distance > 1e-4 * h)
        self.n_interior = int(self.inside.sum())
        self.index = -np.ones((self.ny, self.nx), dtype=np.int64)
        self.index[self.inside] = np.arange(self.n_interior)
        self._theta = self._arm_fractions()
        self.dxx, self.dxx_bc = self._second_difference("e", "w")
        self.dyy, self.dyy_bc = self._second_difference("n", "s")
        self.dd1, self.dd1_bc = self._second_difference("ne", "sw")
        self.dd2, self.dd2_bc = self._second_difference("nw", "se")
        self.laplacian = (self.dxx + self.dyy).tocsr()
        self.laplacian_bc = self.dxx_bc + self.dyy_bc
        self.weights = self._quadrature_weights()

    # ---- arm fractions -------------------------------------------------

    def _arm_fractions(self):
        theta = {}
        ii, jj = np.nonzero(self.inside)   # ii = row (y index), jj = col (x index)
        px = self.X[ii, jj]
        py = self.Y[ii, jj]
        for name, (di, dj, _fac) in {**self._AXES, **self._DIAGS}.items():
            sx = di * self.h
            sy = dj * self.h
            neigh_inside = self.inside[ii + dj, jj + di]
            th = np.ones(self.n_interior)
            cut = ~neigh_inside
            if np.any(cut):
                frac = self.domain.crossing_fraction(px[cut], py[cut],
                                                     sx * np.ones(cut.sum()),
                                                     sy * np.ones(cut.sum()))
                th[cut] = np.clip(frac, _THETA_MIN, 1.0)
            theta[name] = th
        return theta

    # ---- Shortley-Weller second differences ---------------------------

    def _second_difference(self, plus: str, minus: str):
        """Sparse matrix D with D u_int + bc * bc_coeff = u_dd along one line.

        Uses the unequal-arm formula
            u_dd = 2 [ u_+/(t_+(t_+ + t_-)) + u_-/(t_-(t_+ + t_-))
                       - u_c/(t_+ t_-) ] / l^2
        where l is the full arm length and t the arm fractions.
        """
        dirs = {**self._AXES, **self._DIAGS}
        di_p, dj_p, fac = dirs[plus]
        di_m, dj_m, _ = dirs[minus]
        ell = fac * self.h
        ii, jj = np.nonzero(self.inside)
        tp = self._theta[plus]
        tm = self._theta[minus]
        center = np.arange(self.n_interior)
        rows, cols, vals = [], [], []
        bc_coeff = np.zeros(self.n_interior)

        diag = -2.0 / (tp * tm) / ell ** 2
        rows.append(center)
        cols.append(center)
        vals.append(diag)

        for t, di, dj in ((tp, di_p, dj_p), (tm, di_m, dj_m)):
            coeff = 2.0 / (t * (tp + tm)) / ell ** 2
            neigh_idx = self.index[ii + dj, jj + di]
            in_mask = neigh_idx >= 0
            rows.append(center[in_mask])
            cols.append(neigh_idx[in_mask])
            vals.append(coeff[in_mask])
            bc_coeff[~in_mask] += coeff[~in_mask]

        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_interior, self.n_interior)).tocsr()
        return mat, bc_coeff

    # ---- quadrature ----------------------------------------------------

    def _quadrature_weights(self, subsamples: int = 32) -> np.ndarray:
        """Cell-area weights per node; cut cells are subsampled.

        Cells are h x h squares centered at nodes.  Cells well inside get
        the full h^2; cells straddling the boundary get h^2 times the
        sampled inside fraction; weights sum to |Omega| up to the sampling
        resolution.
        """
        h = self.h
        w = np.zeros((self.ny, self.nx))
        d = self.boundary_distance
        full = d >= h * 0.7072
        w[full] = h * h
        straddle = (~full) & (d > -h * 0.7072)
        jj, ii = np.nonzero(straddle)      # jj row (y), ii col (x)
        if jj.size:
            off = (np.arange(subsamples) + 0.5) / subsamples - 0.5
            ox, oy = np.meshgrid(off * h, off * h)
            cx = self.X[jj, ii][:, None] + ox.ravel()[None, :]
            cy = self.Y[jj, ii][:, None] + oy.ravel()[None, :]
            frac = np.asarray(self.domain.inside(cx, cy), dtype=float).mean(axis=1)
            w[jj, ii] = h * h * frac
        return w

    # ---- field constructors --------------------------------------------

    def field(self, values=None, boundary_value: float = 0.0) -> GridField:
        vals = np.full((self.ny, self.nx), boundary_value, dtype=float)
        if values is not None:
            vals = np.asarray(values, dtype=float).reshape(self.ny, self.nx).copy()
            vals[~self.inside] = boundary_value
        return GridField(self.h, self.nx, self.ny, self.x0, self.y0, vals,
                         self.inside.copy(), boundary_value)

    def field_from_function(self, fn, clip_outside: bool = False) -> GridField:
        """Sample fn(X, Y) at every node (outside nodes too, for stencils)."""
        vals = np.asarray(fn(self.X, self.Y), dtype=float)
        if clip_outside:
            vals = vals.copy()
            vals[~self.inside] = 0.0
        return GridField(self.h, self.nx, self.ny, self.x0, self.y0, vals,
                         self.inside.copy(), 0.0)

    def interior_vector(self, fld: GridField) -> np.ndarray:
        return fld.values[self.inside]

    def field_from_vector(self, vec: np.ndarray,
                          boundary_value: float = 0.0) -> GridField:
        vals = np.full((self.ny, self.nx), boundary_value, dtype=float)
        vals[self.inside] = vec
        return GridField(self.h, self.nx, self.ny, self.x0, self.y0, vals,
                         self.inside.copy(), boundary_value)


_GEOMETRY_CACHE: dict = {}


def geometry(domain: Domain, h: float) -> GridGeometry:
    key = (domain, float(h))
    geo = _GEOMETRY_CACHE.get(key)
    if geo is None:
        geo = GridGeometry(domain, h)
        _GEOMETRY_CACHE[key] = geo
    return geo


# ---- centered discrete calculus on full value arrays --------------------

def gradient_centered(values: np.ndarray, h: float):
    """(u_x, u_y) by central differences; one-sided at the array edge."""
    uy, ux = np.gradient(values, h, h)
    return ux, uy


def hessian_centered(values: np.ndarray, h: float):
    """(u_xx, u_xy, u_yy) by standard centered second differences."""
    v = values
    uxx = np.zeros_like(v)
    uyy = np.zeros_like(v)
    uxy = np.zeros_like(v)
    uxx[:, 1:-1] = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) / h ** 2
    uyy[1:-1, :] = (v[2:, :] - 2.0 * v[1:-1, :] + v[:-2, :]) / h ** 2
    uxy[1:-1, 1:-1] = (v[2:, 2:] + v[:-2, :-2] - v[2:, :-2] - v[:-2, 2:]) / (4.0 * h ** 2)
    return uxx, uxy, uyy


def hessian_eigenvalues_2x2(uxx: np.ndarray, uxy: np.ndarray, uyy: np.ndarray):
    """Eigenvalue pair of the 2x2 symmetric Hessian, elementwise."""
    half_tr = 0.5 * (uxx + uyy)
    disc = np.sqrt(np.maximum(0.25 * (uxx - uyy) ** 2 + uxy ** 2, 0.0))
    return half_tr - disc, half_tr + disc


def sk_2x2(uxx: np.ndarray, uxy: np.ndarray, uyy: np.ndarray, k: int):
    """S_k of the 2x2 Hessian field: trace for k=1, determinant for k=2."""
    if k == 1:
        return uxx + uyy
    if k == 2:
        return uxx * uyy - uxy ** 2
    raise ParameterError(f"grid S_k supports k in {{1, 2}}, got {k}")


def weight_values(r2: np.ndarray, delta: float, s: float) -> np.ndarray:
    """Regularized weight (|x|^2 + delta^2)^s evaluated from |x|^2."""
    if s == 0.0:
        return np.ones_like(np.asarray(r2, dtype=float))
    base = np.asarray(r2, dtype=float) + delta * delta
    if delta == 0.0 and s < 0:
        with np.errstate(divide="ignore"):
            return np.where(base > 0.0, base ** s, np.inf)
    return base ** s
