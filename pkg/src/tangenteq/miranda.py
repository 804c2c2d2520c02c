"""Zero location by sign certificates: bisection and its cube analogue.

The n-dimensional certificate asks, for each axis k, that the k-th
component of the map is nonnegative everywhere on the lower face and
nonpositive on the upper face.  When it holds (checked here on a sampled
face grid) the cube contains a zero, and bisecting the longest axis while
re-certifying children homes in on one.  A brute-force grid argmin backs
the subdivision solver as an oracle in low dimension.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateFailed, NoSignChange

#: sampled margins at or below this count as exactly zero ("degenerate")
_DEGENERATE_EPS = 1e-15


def bolzano_bisect(f, a, b, tol=1e-12, max_iter=None):
    """Classic interval bisection for a scalar sign change.

    Raises NoSignChange when f(a) and f(b) have the same strict sign.
    """
    a, b = float(a), float(b)
    if b <= a:
        raise ValueError("need a < b")
    fa, fb = float(f(a)), float(f(b))
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise NoSignChange("f(%g)=%g and f(%g)=%g carry the same sign"
                           % (a, fa, b, fb))
    if max_iter is None:
        max_iter = int(np.ceil(np.log2(max((b - a) / tol, 2.0)))) + 2
    for _ in range(max_iter):
        if (b - a) <= 2.0 * tol:
            break
        m = 0.5 * (a + b)
        fm = float(f(m))
        if fm == 0.0:
            return m
        if np.sign(fa) != np.sign(fm):
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


class Cube:
    """Axis-aligned cube with strictly positive side lengths."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo and hi must match")
        if np.any(self.hi <= self.lo):
            raise ValueError("cube sides must have positive length")
        self.dim = self.lo.size

    def diameter(self):
        """Longest side (sup-norm diameter)."""
        return float(np.max(self.hi - self.lo))

    def center(self):
        return 0.5 * (self.lo + self.hi)

    def split(self):
        """Halve the longest axis (ties broken toward the lowest index)."""
        k = int(np.argmax(self.hi - self.lo))
        mid = 0.5 * (self.lo[k] + self.hi[k])
        lo2 = self.lo.copy()
        hi1 = self.hi.copy()
        hi1[k] = mid
        lo2[k] = mid
        return Cube(self.lo, hi1), Cube(lo2, self.hi), k


@dataclass
class FaceVerdict:
    axis: int
    side: str                # "-" or "+"
    extreme_value: float     # min of f_k on the lower face, max on the upper
    margin: float            # >= 0 iff the sign requirement holds
    witness: np.ndarray      # sample point attaining the extreme


@dataclass
class MirandaCertificate:
    holds: bool
    degenerate: bool
    resolution: int
    faces: list = field(default_factory=list)
    witness: np.ndarray = None   # a failing sample point, when not holds

    @property
    def margin(self):
        return min(f.margin for f in self.faces)


def _face_points(cube, axis, side, resolution):
    axes = []
    for j in range(cube.dim):
        if j == axis:
            axes.append(np.array([cube.lo[axis] if side == "-" else cube.hi[axis]]))
        else:
            axes.append(np.linspace(cube.lo[j], cube.hi[j], resolution))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def miranda_check(f, cube, resolution=9):
    """Sample the sign certificate on every face of the cube.

    resolution is the number of grid points per face axis (endpoints
    included).  A certificate with some face margin exactly zero still
    holds but is flagged degenerate.
    """
    if resolution < 2 and cube.dim > 1:
        raise ValueError("resolution must be at least 2")
    faces = []
    bad_point = None
    for k in range(cube.dim):
        for side in ("-", "+"):
            pts = _face_points(cube, k, side, resolution)
            vals = np.array([np.atleast_1d(f(pt))[k] for pt in pts])
            if side == "-":
                i = int(np.argmin(vals))
                extreme = float(vals[i])
                margin = extreme
            else:
                i = int(np.argmax(vals))
                extreme = float(vals[i])
                margin = -extreme
            faces.append(FaceVerdict(axis=k, side=side, extreme_value=extreme,
                                     margin=margin, witness=pts[i]))
            if margin < 0 and bad_point is None:
                bad_point = pts[i]
    holds = all(fv.margin >= 0 for fv in faces)
    degenerate = holds and any(fv.margin <= _DEGENERATE_EPS for fv in faces)
    return MirandaCertificate(holds=holds, degenerate=degenerate,
                              resolution=resolution, faces=faces,
                              witness=bad_point)


@dataclass
class ZeroResult:
    point: np.ndarray
    status: str              # "converged" or "depth_exceeded"
    depth: int
    residual_norm: float
    f_at_point: np.ndarray
    certified_path: bool     # False if any kept child lacked a certificate
    fallback_steps: int
    final_cube: Cube


def miranda_solve(f, cube, tol=1e-9, resolution=9, max_depth=200,
                  accept_degenerate=True):
    """Certified bisection toward a zero inside the cube.

    The initial certificate must hold (else CertificateFailed).  Each step
    splits the longest axis and keeps the first child whose re-sampled
    certificate holds; with no certified child the child holding the
    smallest sampled |f| is kept instead (an uncertified but recorded
    fallback).  Stops when the cube diameter drops to ``tol`` or depth is
    exhausted, returning the center with a post-verified residual.
    """
    cert = miranda_check(f, cube, resolution)
    ok = cert.holds and (accept_degenerate or not cert.degenerate)
    if not ok:
        raise CertificateFailed(
            "initial certificate %s (margin %.3g)"
            % ("degenerate" if cert.holds else "fails", cert.margin))

    certified_path = True
    fallback_steps = 0
    depth = 0
    while cube.diameter() > tol and depth < max_depth:
        lower, upper, axis = cube.split()
        chosen = None
        for child in (lower, upper):
            c = miranda_check(f, child, resolution)
            if c.holds and (accept_degenerate or not c.degenerate):
                chosen = child
                break
        if chosen is None:
            best, _ = _sampled_argmin(f, cube, resolution)
            chosen = lower if best[axis] <= lower.hi[axis] else upper
            certified_path = False
            fallback_steps += 1
        cube = chosen
        depth += 1

    point = cube.center()
    fval = np.atleast_1d(f(point))
    status = "converged" if cube.diameter() <= tol else "depth_exceeded"
    return ZeroResult(point=point, status=status, depth=depth,
                      residual_norm=float(np.linalg.norm(fval)),
                      f_at_point=fval, certified_path=certified_path,
                      fallback_steps=fallback_steps, final_cube=cube)


def _sampled_argmin(f, cube, resolution, levels=3):
    """Approximate argmin of |f| over the cube by zooming grids.

    Samples at cell centers (so siblings never share a sample, which
    would tie the fallback choice) and refines around the best point a
    few times; a zero strictly inside one child wins the comparison even
    when it hugs the splitting plane.
    """
    lo, hi = cube.lo.copy(), cube.hi.copy()
    best_pt, best_val = None, np.inf
    for _ in range(levels):
        axes = []
        for j in range(cube.dim):
            off = 0.5 * (hi[j] - lo[j]) / resolution
            axes.append(np.linspace(lo[j] + off, hi[j] - off, resolution))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = [float(np.linalg.norm(np.atleast_1d(f(pt)))) for pt in pts]
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_pt, best_val = pts[i], float(vals[i])
        cell = (hi - lo) / resolution
        lo = np.maximum(cube.lo, best_pt - cell)
        hi = np.minimum(cube.hi, best_pt + cell)
    return best_pt, best_val


def brute_force_zero(f, cube, grid, batched=False):
    """Grid argmin of |f| over the cube (oracle; dimensions 1 to 3 only).

    With ``batched=True`` the map is called once on an array whose last
    axis indexes components, which is much faster for vectorized maps.
    """
    if cube.dim > 3:
        raise ValueError("brute force supports dimension <= 3")
    if grid ** cube.dim > 1e7:
        raise ValueError("grid too fine: %d^%d points" % (grid, cube.dim))
    axes = [np.linspace(cube.lo[j], cube.hi[j], grid) for j in range(cube.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    if batched:
        vals = np.asarray(f(pts))
        norms = np.linalg.norm(np.atleast_2d(vals), axis=-1)
    else:
        norms = np.array([np.linalg.norm(np.atleast_1d(f(pt))) for pt in pts])
    return pts[int(np.argmin(norms))]
