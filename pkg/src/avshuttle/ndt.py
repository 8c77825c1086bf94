"""Normal Distributions Transform grids and scan-to-grid registration.

Each occupied voxel of a reference cloud is summarised by the mean and
unbiased covariance of its member points. The score of a pose is the sum,
over transformed scan points, of the Gaussian density of the voxel each
point falls in (zero for empty voxels).

Registration runs in two stages:

1. A coarse, annealed stage. Each point is matched to the best of the 27
   cells around it, with every covariance inflated by ``(r * cell_size)**2 I``
   for a decreasing schedule of radii ``r``; the per-point cost is the capped
   Mahalanobis term ``min(d2, outlier_d2) / 2``. Inflation and the neighbour
   search widen the basin of attraction, which the single-voxel density
   lacks because of its voxel-boundary jumps.
2. A refinement stage maximising the density score itself with Newton steps
   on its exact Hessian. It starts from whichever of the coarse result and
   the initial guess scores higher, so the returned score never drops below
   the initial one.

Both stages use step-halving line searches on their own objective and fall
back to a fixed-length gradient step when the Newton direction is not a
descent direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError
from .geometry import Point3, PointCloud, Pose6, euler_rotation_derivatives, pose_to_transform

EPS_RATIO = 1e-3
_KEY_BITS = 21
_KEY_OFF = 1 << (_KEY_BITS - 1)
_GAUSS_NORM = (2.0 * math.pi) ** -1.5
_PAD = 2
_MAX_TABLE = 20_000_000
_NEIGHBOURS = np.array([(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)], dtype=np.int64)
# upper-triangle entries of a symmetric 3x3, in (00, 11, 22, 01, 02, 12) order
_TRIU = (np.array([0, 1, 2, 0, 0, 1]), np.array([0, 1, 2, 1, 2, 2]))


def voxel_indices(points: np.ndarray, cell_size: float, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    return np.floor((np.asarray(points) - np.asarray(origin, dtype=float)) / cell_size).astype(np.int64)


def pack_keys(idx: np.ndarray) -> np.ndarray:
    """Pack (N, 3) voxel indices into int64 keys ordered lexicographically.

    Indices outside the representable range map to -1.
    """
    shifted = idx + _KEY_OFF
    bad = np.any((shifted < 0) | (shifted >= (1 << _KEY_BITS)), axis=1)
    keys = (shifted[:, 0] << (2 * _KEY_BITS)) | (shifted[:, 1] << _KEY_BITS) | shifted[:, 2]
    keys[bad] = -1
    return keys


def regularize_covariance(cov: np.ndarray, eps_ratio: float = EPS_RATIO) -> np.ndarray:
    """Lift eigenvalues below ``eps_ratio * lambda_max`` up to that floor.

    Works on a single (3, 3) matrix or a stack (M, 3, 3). Matrices that need
    no lifting are returned bit-for-bit unchanged.
    """
    cov = np.asarray(cov, dtype=float)
    single = cov.ndim == 2
    c = cov[None] if single else cov
    out = c.copy()
    w, v = np.linalg.eigh(c)
    floor = eps_ratio * w[:, -1:]
    # tolerance keeps a second pass from re-touching matrices lifted by the first
    need = np.any(w < floor * (1.0 - 1e-9), axis=1)
    if np.any(need):
        wn = np.maximum(w[need], floor[need])
        vn = v[need]
        r = np.einsum("mij,mj,mkj->mik", vn, wn, vn)
        out[need] = 0.5 * (r + np.transpose(r, (0, 2, 1)))
    return out[0] if single else out


@dataclass(frozen=True)
class NdtCell:
    index: tuple
    mean: Point3
    covariance: np.ndarray
    count: int
    inverse_covariance: np.ndarray


class NdtGrid:
    """Immutable sparse voxel map of Gaussians, stored as parallel arrays."""

    def __init__(self, cell_size, origin, indices, means, covariances, counts):
        if not cell_size > 0:
            raise InvalidArgumentError(f"cell_size must be positive, got {cell_size!r}")
        self.cell_size = float(cell_size)
        self.origin = np.asarray(origin, dtype=float).reshape(3)
        indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        keys = pack_keys(indices)
        order = np.argsort(keys, kind="stable")
        self.keys = keys[order]
        self.indices = indices[order]
        self.means = np.asarray(means, dtype=float).reshape(-1, 3)[order]
        self.covariances = np.asarray(covariances, dtype=float).reshape(-1, 3, 3)[order]
        self.counts = np.asarray(counts, dtype=np.int64).reshape(-1)[order]
        if len(self.keys):
            self.inverse_covariances = np.linalg.inv(self.covariances)
            self.norms = _GAUSS_NORM / np.sqrt(np.linalg.det(self.covariances))
        else:
            self.inverse_covariances = np.empty((0, 3, 3))
            self.norms = np.empty(0)
        self._build_table()
        for a in (self.keys, self.indices, self.means, self.covariances, self.counts,
                  self.inverse_covariances, self.norms):
            a.flags.writeable = False

    def _build_table(self):
        # dense voxel -> row table over the padded bounding box, when small enough
        self._table = None
        if len(self.keys) == 0:
            return
        lo = self.indices.min(axis=0) - _PAD
        shape = self.indices.max(axis=0) - lo + 1 + _PAD
        if int(np.prod(shape)) > _MAX_TABLE:
            return
        table = np.full(int(np.prod(shape)), -1, dtype=np.int64)
        strides = np.array([shape[1] * shape[2], shape[2], 1], dtype=np.int64)
        table[(self.indices - lo) @ strides] = np.arange(len(self.keys))
        table.flags.writeable = False
        self._table, self._lo, self._shape, self._strides = table, lo, shape, strides

    def rows_at(self, idx: np.ndarray, neighbours: bool = False) -> np.ndarray:
        """Cell rows for (N, 3) voxel indices, -1 where empty.

        With ``neighbours`` the result is (N, 27): the rows of the 3x3x3 block
        around each voxel, in ``_NEIGHBOURS`` order.
        """
        idx = np.asarray(idx, dtype=np.int64).reshape(-1, 3)
        n = len(idx)
        width = 27 if neighbours else 1
        if len(self.keys) == 0 or n == 0:
            return np.full((n, width) if neighbours else n, -1, dtype=np.int64)
        if self._table is not None:
            rel = idx - self._lo
            # voxels in the outer padding ring have no non-empty neighbour
            margin = 1 if neighbours else 0
            inside = np.all((rel >= margin) & (rel < self._shape - margin), axis=1)
            flat = np.where(inside, rel @ self._strides, 0)
            if neighbours:
                rows = self._table[flat[:, None] + (_NEIGHBOURS @ self._strides)[None, :]]
                rows[~inside] = -1
            else:
                rows = np.where(inside, self._table[flat], -1)
            return rows
        if neighbours:
            idx = (idx[:, None, :] + _NEIGHBOURS[None, :, :]).reshape(-1, 3)
        keys = pack_keys(idx)
        pos = np.minimum(np.searchsorted(self.keys, keys), len(self.keys) - 1)
        rows = np.where((self.keys[pos] == keys) & (keys >= 0), pos, -1)
        return rows.reshape(n, 27) if neighbours else rows

    def __len__(self):
        return len(self.keys)

    def __repr__(self):
        return f"NdtGrid(cells={len(self)}, cell_size={self.cell_size})"

    def lookup(self, points: np.ndarray) -> np.ndarray:
        """Cell row per point (-1 where the containing voxel is empty)."""
        if len(points) == 0:
            return np.full(0, -1, dtype=np.int64)
        return self.rows_at(voxel_indices(points, self.cell_size, self.origin))

    def cell(self, row: int) -> NdtCell:
        return NdtCell(
            index=tuple(int(i) for i in self.indices[row]),
            mean=Point3(*self.means[row]),
            covariance=self.covariances[row],
            count=int(self.counts[row]),
            inverse_covariance=self.inverse_covariances[row],
        )

    @property
    def cells(self) -> dict:
        return {tuple(int(i) for i in self.indices[r]): self.cell(r) for r in range(len(self))}

    def to_dict(self) -> dict:
        iu = np.triu_indices(3)
        return {
            "cell_size": self.cell_size,
            "origin": self.origin.tolist(),
            "cells": [
                {
                    "index": self.indices[r].tolist(),
                    "mean": self.means[r].tolist(),
                    "covariance": self.covariances[r][iu].tolist(),
                    "count": int(self.counts[r]),
                }
                for r in range(len(self))
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NdtGrid":
        cells = d["cells"]
        covs = np.zeros((len(cells), 3, 3))
        iu = np.triu_indices(3)
        for r, c in enumerate(cells):
            covs[r][iu] = c["covariance"]
            covs[r] = covs[r] + np.triu(covs[r], 1).T
        return cls(
            d["cell_size"],
            d["origin"],
            [c["index"] for c in cells],
            [c["mean"] for c in cells],
            covs,
            [c["count"] for c in cells],
        )


def save_grid(grid: NdtGrid, path) -> None:
    Path(path).write_text(json.dumps(grid.to_dict()) + "\n")


def load_grid(path) -> NdtGrid:
    with open(path) as fh:
        return NdtGrid.from_dict(json.load(fh))


def _as_points(cloud) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float).reshape(-1, 3)


def build_grid(cloud, cell_size: float = 1.0, min_points: int = 6, origin=(0.0, 0.0, 0.0),
               eps_ratio: float = EPS_RATIO) -> NdtGrid:
    """Voxelise ``cloud`` and fit a regularised Gaussian to each voxel.

    Voxels with fewer than ``min_points`` members, or whose members all
    coincide, get no cell.
    """
    if not cell_size > 0:
        raise InvalidArgumentError(f"cell_size must be positive, got {cell_size!r}")
    if min_points < 4:
        raise InvalidArgumentError(f"min_points must be at least 4, got {min_points}")
    pts = _as_points(cloud)
    empty = NdtGrid(cell_size, origin, np.empty((0, 3)), np.empty((0, 3)), np.empty((0, 3, 3)), [])
    if len(pts) == 0:
        return empty

    idx = voxel_indices(pts, cell_size, origin)
    keys = pack_keys(idx)
    valid = keys >= 0
    pts, idx, keys = pts[valid], idx[valid], keys[valid]
    order = np.argsort(keys, kind="stable")
    pts, idx, keys = pts[order], idx[order], keys[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    counts = np.diff(np.r_[starts, len(keys)])

    sums = np.add.reduceat(pts, starts, axis=0)
    means = sums / counts[:, None]
    centred = pts - np.repeat(means, counts, axis=0)
    outer = centred[:, :, None] * centred[:, None, :]
    scatter = np.add.reduceat(outer.reshape(-1, 9), starts, axis=0).reshape(-1, 3, 3)

    keep = counts >= min_points
    if not np.any(keep):
        return empty
    cov = scatter[keep] / (counts[keep] - 1)[:, None, None]
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
    lam_max = np.linalg.eigvalsh(cov)[:, -1]
    nondegenerate = lam_max > 1e-12 * cell_size ** 2
    cov = regularize_covariance(cov[nondegenerate], eps_ratio)
    rows = np.flatnonzero(keep)[nondegenerate]
    return NdtGrid(cell_size, origin, idx[starts[rows]], means[rows], cov, counts[rows])


def cell_density(cell: NdtCell, x) -> float:
    """Trivariate normal density of ``cell`` at ``x``."""
    v = x.as_array() if isinstance(x, Point3) else np.asarray(x, dtype=float)
    q = v - cell.mean.as_array()
    d2 = float(q @ cell.inverse_covariance @ q)
    return _GAUSS_NORM / math.sqrt(np.linalg.det(cell.covariance)) * math.exp(-0.5 * d2)


class _Terms:
    """Per-point quantities of one pose evaluation, computed lazily."""

    def __init__(self, grid: NdtGrid, pts: np.ndarray, pose: Pose6):
        self.pts = pts
        self.pose = pose
        t = pose_to_transform(pose)
        xt = pts @ t[:3, :3].T + t[:3, 3]
        rows = grid.lookup(xt)
        m = rows >= 0
        self.mask = m
        self.rows = rows[m]
        self.x = pts[m]
        self.q = xt[m] - grid.means[self.rows]
        self.inv = grid.inverse_covariances[self.rows]
        self.u = np.einsum("nij,nj->ni", self.inv, self.q)
        self.d2 = np.einsum("ni,ni->n", self.q, self.u)
        self.norm = grid.norms[self.rows]
        self._jac = None

    @property
    def density(self) -> np.ndarray:
        return self.norm * np.exp(-0.5 * self.d2)

    def jacobian(self):
        """(N, 3, 6) d(transformed point)/d(x, y, z, roll, pitch, yaw), plus second-order terms."""
        if self._jac is None:
            p = self.pose
            d1, d2 = euler_rotation_derivatives(p.roll, p.pitch, p.yaw)
            n = len(self.x)
            jac = np.zeros((n, 3, 6))
            jac[:, 0, 0] = jac[:, 1, 1] = jac[:, 2, 2] = 1.0
            for a in range(3):
                jac[:, :, 3 + a] = self.x @ d1[a].T
            second = {(a, b): self.x @ d2[a][b].T for a in range(3) for b in range(a, 3)}
            self._jac = (jac, second)
        return self._jac


def score(grid: NdtGrid, cloud, pose: Pose6) -> float:
    pts = _as_points(cloud)
    if len(pts) == 0 or len(grid) == 0:
        return 0.0
    return float(np.sum(_Terms(grid, pts, pose).density))


def _score_derivatives(terms: _Terms, hessian: bool):
    w = terms.density
    jac, second = terms.jacobian()
    uj = np.einsum("ni,nia->na", terms.u, jac)
    grad = -np.einsum("n,na->a", w, uj)
    if not hessian:
        return grad, None
    sj = np.einsum("nij,njb->nib", terms.inv, jac)
    jsj = np.einsum("nia,nib->nab", jac, sj)
    h = np.einsum("n,na,nb->ab", w, uj, uj) - np.einsum("n,nab->ab", w, jsj)
    for (a, b), xs in second.items():
        v = -np.einsum("n,ni,ni->", w, terms.u, xs)
        h[3 + a, 3 + b] += v
        if a != b:
            h[3 + b, 3 + a] += v
    return grad, h


def score_gradient(grid: NdtGrid, cloud, pose: Pose6) -> np.ndarray:
    """Analytic gradient of ``score`` w.r.t. (x, y, z, roll, pitch, yaw)."""
    pts = _as_points(cloud)
    if len(pts) == 0 or len(grid) == 0:
        return np.zeros(6)
    return _score_derivatives(_Terms(grid, pts, pose), hessian=False)[0]


def score_hessian(grid: NdtGrid, cloud, pose: Pose6) -> np.ndarray:
    pts = _as_points(cloud)
    if len(pts) == 0 or len(grid) == 0:
        return np.zeros((6, 6))
    return _score_derivatives(_Terms(grid, pts, pose), hessian=True)[1]


def _pack_cells(grid: NdtGrid, inv_r: np.ndarray) -> np.ndarray:
    """(M, 9) rows of mean and inverse-covariance upper triangle, for one gather per pair."""
    return np.ascontiguousarray(np.hstack([grid.means, inv_r[:, _TRIU[0], _TRIU[1]]]))


class _SmoothedTerms:
    """Coarse-stage association: each point takes the best of its 27 neighbour cells.

    Distances use covariances inflated by ``radius**2 * I``; the per-point
    cost is ``min(d2, cap) / 2`` and points with no candidate cell cost the cap.
    """

    def __init__(self, grid: NdtGrid, pts: np.ndarray, pose: Pose6, inv_r: np.ndarray, cap: float,
                 packed: np.ndarray | None = None):
        if packed is None:
            packed = _pack_cells(grid, inv_r)
        self.pts = pts
        self.pose = pose
        self.cap = cap
        t = pose_to_transform(pose)
        xt = pts @ t[:3, :3].T + t[:3, 3]
        rows_all = grid.rows_at(voxel_indices(xt, grid.cell_size, grid.origin), neighbours=True)
        pi, ni = np.nonzero(rows_all >= 0)
        rows = rows_all[pi, ni]
        c = packed[rows]
        q = xt[pi] - c[:, :3]
        q0, q1, q2 = q.T
        d2 = (c[:, 3] * q0 * q0 + c[:, 4] * q1 * q1 + c[:, 5] * q2 * q2
              + 2.0 * (c[:, 6] * q0 * q1 + c[:, 7] * q0 * q2 + c[:, 8] * q1 * q2))
        best = np.full(len(pts), np.inf)
        np.minimum.at(best, pi, d2)
        # first candidate achieving the per-point minimum
        sel = np.flatnonzero(d2 == best[pi])
        sel = sel[np.r_[True, pi[sel][1:] != pi[sel][:-1]]] if len(sel) else sel
        inl = d2[sel] < cap
        sel = sel[inl]
        self.value = 0.5 * (float(np.sum(d2[sel])) + (len(pts) - len(sel)) * cap)
        self.n_inliers = len(sel)
        self.x = pts[pi[sel]]
        self.q = q[sel]
        self.inv = inv_r[rows[sel]]
        self.u = np.einsum("nij,nj->ni", self.inv, self.q)

    def derivatives(self):
        p = self.pose
        d1, d2 = euler_rotation_derivatives(p.roll, p.pitch, p.yaw)
        n = len(self.x)
        jac = np.zeros((n, 3, 6))
        jac[:, 0, 0] = jac[:, 1, 1] = jac[:, 2, 2] = 1.0
        for a in range(3):
            jac[:, :, 3 + a] = self.x @ d1[a].T
        grad = np.einsum("ni,nia->a", self.u, jac)
        sj = np.einsum("nij,njb->nib", self.inv, jac)
        h = np.einsum("nia,nib->ab", jac, sj)
        for a in range(3):
            for b in range(a, 3):
                v = np.einsum("ni,ni->", self.u, self.x @ d2[a][b].T)
                h[3 + a, 3 + b] += v
                if a != b:
                    h[3 + b, 3 + a] += v
        return grad, h


def smoothed_objective(grid: NdtGrid, cloud, pose: Pose6, radius: float, cap: float = 9.0) -> float:
    """Coarse-stage registration cost (negative log of inflated, capped Gaussians)."""
    inv_r = np.linalg.inv(grid.covariances + radius ** 2 * np.eye(3))
    return _SmoothedTerms(grid, _as_points(cloud), pose, inv_r, cap).value


@dataclass
class RegistrationParams:
    max_iterations: int = 50
    tol_translation: float = 1e-4
    tol_rotation: float = 1e-5
    # coarse stage: covariance inflation radii (fractions of cell_size), largest first
    smoothing_radii: tuple = (0.5, 0.25, 0.12, 0.05)
    iterations_per_level: int = 6
    coarse_tol_translation: float = 1e-3
    coarse_tol_rotation: float = 1e-4
    # squared Mahalanobis cap of the coarse cost
    outlier_d2: float = 9.0
    max_halvings: int = 30
    # gradient fallback: initial step length (mixed units)
    gradient_step: float = 0.05
    min_points: int = 10


@dataclass
class ScanMatchResult:
    pose: Pose6
    score: float
    iterations: int
    converged: bool
    # (translation norm in m, rotation norm in rad) of the last accepted step
    final_step_norm: tuple
    initial_score: float = 0.0
    matched_fraction: float = 0.0


def _step_norms(step) -> tuple:
    return float(np.linalg.norm(step[:3])), float(np.linalg.norm(step[3:]))


def _descent_step(grad, hess, gradient_step):
    """Newton step for minimisation, or a fixed-length gradient step if ``hess`` is not PD."""
    try:
        np.linalg.cholesky(hess)
        return -np.linalg.solve(hess, grad), True
    except np.linalg.LinAlgError:
        gn = float(np.linalg.norm(grad))
        if gn == 0.0:
            return np.zeros(6), False
        return -grad * (gradient_step / gn), False


def _minimise(evaluate, pose, value_and_state, budget, tol_t, tol_r, params):
    """Damped Newton with step halving on a cost ``evaluate(pose) -> (value, state)``.

    ``state.derivatives()`` must return (gradient, hessian) of the cost. The
    line search halves until the trial step is inside the tolerance box; if no
    trial decreases the cost the iterate is optimal at that resolution and the
    run counts as converged.
    Returns (pose, value, state, iterations used, last step norms, converged).
    """
    value, state = value_and_state
    used = 0
    last = (math.inf, math.inf)
    while used < budget:
        used += 1
        grad, hess = state.derivatives()
        step, _ = _descent_step(grad, hess, params.gradient_step)
        if not np.any(step):
            return pose, value, state, used, (0.0, 0.0), True
        alpha = 1.0
        accepted = None
        for _ in range(params.max_halvings + 1):
            cand = Pose6.from_vector(pose.as_vector() + alpha * step)
            cand_value, cand_state = evaluate(cand)
            if cand_value < value:
                accepted = (cand, cand_value, cand_state)
                break
            trial = _step_norms(alpha * step)
            if trial[0] < tol_t and trial[1] < tol_r:
                break
            alpha *= 0.5
        if accepted is None:
            trial = _step_norms(alpha * step)
            return pose, value, state, used, (0.0, 0.0), trial[0] < tol_t and trial[1] < tol_r
        pose, value, state = accepted
        last = _step_norms(alpha * step)
        if last[0] < tol_t and last[1] < tol_r:
            return pose, value, state, used, last, True
    return pose, value, state, used, last, False


class _ScoreState:
    def __init__(self, terms: _Terms):
        self.terms = terms

    def derivatives(self):
        g, h = _score_derivatives(self.terms, hessian=True)
        return -g, -h


def register(grid: NdtGrid, cloud, initial_guess: Pose6 = Pose6(), params: RegistrationParams | None = None
             ) -> ScanMatchResult:
    """Estimate the pose that maps ``cloud`` into the grid's frame.

    Returns the pose maximising ``score``; the coarse smoothed stages only
    serve to bring the estimate into the density's basin.
    """
    params = params or RegistrationParams()
    if len(grid) == 0:
        raise InvalidArgumentError("cannot register against an empty grid")
    pts = _as_points(cloud)
    if len(pts) < params.min_points:
        raise DegenerateInputError(f"need at least {params.min_points} points to register, got {len(pts)}")

    init_terms = _Terms(grid, pts, initial_guess)
    initial_score = float(np.sum(init_terms.density))
    pose = initial_guess
    used = 0
    eye = np.eye(3)

    for frac in params.smoothing_radii:
        if used >= params.max_iterations:
            break
        inv_r = np.linalg.inv(grid.covariances + (frac * grid.cell_size) ** 2 * eye)
        packed = _pack_cells(grid, inv_r)

        def evaluate(p, inv_r=inv_r, packed=packed):
            st = _SmoothedTerms(grid, pts, p, inv_r, params.outlier_d2, packed)
            return st.value, st

        first = evaluate(pose)
        if first[1].n_inliers == 0:
            continue
        budget = min(params.iterations_per_level, params.max_iterations - used)
        pose, _, _, n, _, _ = _minimise(evaluate, pose, first, budget, params.coarse_tol_translation,
                                        params.coarse_tol_rotation, params)
        used += n

    def evaluate_score(p):
        t = _Terms(grid, pts, p)
        return -float(np.sum(t.density)), _ScoreState(t)

    def refine(p, start, budget):
        return _minimise(evaluate_score, p, start, max(budget, 1), params.tol_translation,
                         params.tol_rotation, params)

    start = evaluate_score(pose)
    guess_start = (-initial_score, _ScoreState(init_terms))
    if not np.any(start[1].terms.mask):
        if not np.any(init_terms.mask):
            # nothing overlaps the map: the score is flat around the estimate
            return ScanMatchResult(pose, 0.0, params.max_iterations, False, (math.inf, math.inf),
                                   initial_score, 0.0)
        best = refine(initial_guess, guess_start, params.max_iterations - used)
    else:
        # refine from the coarse optimum so the answer does not hinge on tiny
        # changes of the guess; the guess is only used if that ends lower
        best = refine(pose, start, params.max_iterations - used)
        if -best[1] < initial_score:
            used += best[3]
            alt = refine(initial_guess, guess_start, params.max_iterations - used)
            if alt[1] <= best[1]:
                best = alt
    pose, value, state, n, last, converged = best
    used += n
    return ScanMatchResult(pose, -value, used, converged, last, initial_score, float(np.mean(state.terms.mask)))
