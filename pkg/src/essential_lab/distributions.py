"""Random generators for poses, image points, linear spaces and z-vectors.

Three distributions of codimension-5 linear spaces are provided:

* ``sample_unifG`` -- rotation-invariant spaces (i.i.d. Gaussian rows; the
  row span is then invariant under the full orthogonal group of R^9);
* ``sample_psi`` -- spaces cut out by five random point correspondences,
  each image point uniform on the projective plane;
* ``sample_box`` -- correspondences drawn uniformly from pixel boxes in
  the affine chart, the distribution used for camera-like experiments.

The module also samples the 5-dimensional z-vector whose determinant
ensemble reproduces the correspondence average, and runs the
independence-proposal Metropolis-Hastings chain for box targets.

Every sampler takes an explicit ``numpy.random.Generator``.  For
scheduling-independent parallel runs, derive one generator per sample
index with :func:`rng_for`, which keys a counter-based Philox stream by
``(seed, index)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartSingularity, RankDeficient
from .geometry import E0, EssentialMatrix, ProjectivePoint2, Rotation
from .solver import LinearSpace

VOL_RP2 = 2.0 * np.pi   # Riemannian area of the projective plane


def rng_for(seed: int, index: int) -> np.random.Generator:
    """Independent generator for one sample: Philox keyed by (seed, index)."""
    mask = (1 << 64) - 1
    key = np.array([seed & mask, index & mask], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class BoxSpec:
    """Axis-aligned rectangle [a, b] x [c, d] in the affine chart."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a < self.b and self.c < self.d):
            raise ValueError("box needs a < b and c < d")

    @property
    def area(self) -> float:
        return (self.b - self.a) * (self.d - self.c)


@dataclass(frozen=True)
class Correspondences5:
    """Five image-point pairs (u_i, v_i), unit representatives."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(
            (u if isinstance(u, ProjectivePoint2) else ProjectivePoint2(u),
             v if isinstance(v, ProjectivePoint2) else ProjectivePoint2(v))
            for u, v in self.pairs
        )
        if len(pairs) != 5:
            raise ValueError("need exactly five correspondences")
        object.__setattr__(self, "pairs", pairs)


@dataclass(frozen=True, eq=False)
class ZVector:
    """The 5-vector (b r sin, b r cos, a s sin, a s cos, r s)."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).reshape(5)
        if not np.all(np.isfinite(z)):
            raise ValueError("z-vector must be finite")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)


def _rotations(rng: np.random.Generator, n: int) -> np.ndarray:
    """Stack of n Haar rotations: Gaussian matrices -> orthogonal factor."""
    q, r = np.linalg.qr(rng.standard_normal((n, 3, 3)))
    q = q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]
    flip = np.linalg.det(q) < 0
    q[flip, :, 2] *= -1.0
    return q


def sample_rotation(rng: np.random.Generator) -> Rotation:
    """Haar-distributed rotation (QR of a Gaussian matrix, det-corrected)."""
    return Rotation(_rotations(rng, 1)[0])


def sample_rp2(rng: np.random.Generator) -> ProjectivePoint2:
    """Uniform point of the projective plane (normalized Gaussian vector)."""
    return ProjectivePoint2(_rp2_batch(rng, 1)[0])


def _rp2_batch(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms < 1e-12):
        bad = norms < 1e-12
        v[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(v, axis=1)
    v /= norms[:, None]
    # canonical sign: first component of largest magnitude made positive
    lead = np.argmax(np.abs(v), axis=1)
    signs = np.sign(v[np.arange(n), lead])
    return v * signs[:, None]


def sample_unifG(rng: np.random.Generator) -> LinearSpace:
    """Rotation-invariant random linear space: i.i.d. Gaussian rows."""
    while True:
        try:
            return LinearSpace(rng.standard_normal((5, 9)))
        except RankDeficient:  # pragma: no cover - probability zero
            continue


def linear_space_from_correspondences(corr: Correspondences5) -> LinearSpace:
    """Linear space with rows vec(u_i v_i^T), so row . vec(E) = u_i^T E v_i."""
    if not isinstance(corr, Correspondences5):
        corr = Correspondences5(tuple(corr))
    rows = np.stack([np.outer(u.v, v.v).ravel() for u, v in corr.pairs])
    return LinearSpace(rows)


def sample_psi(rng: np.random.Generator):
    """Five correspondences of i.i.d. uniform projective points, plus the space."""
    while True:
        pts = _rp2_batch(rng, 10)
        corr = Correspondences5(tuple((pts[2 * i], pts[2 * i + 1]) for i in range(5)))
        try:
            return corr, linear_space_from_correspondences(corr)
        except RankDeficient:  # pragma: no cover - probability zero
            continue


def sample_box(rng: np.random.Generator, boxes):
    """Correspondences uniform in pixel boxes, embedded as [y1 : y2 : 1].

    ``boxes`` holds ten :class:`BoxSpec` (or 4-tuples), ordered
    u1, v1, u2, v2, ..., u5, v5.  Representatives have positive third
    coordinate.  Rank deficiency (possible for degenerate boxes) is
    propagated, not resampled.
    """
    boxes = [b if isinstance(b, BoxSpec) else BoxSpec(*b) for b in boxes]
    if len(boxes) != 10:
        raise ValueError("need ten boxes (u and v for each of five pairs)")
    pts = []
    for box in boxes:
        y1 = rng.uniform(box.a, box.b)
        y2 = rng.uniform(box.c, box.d)
        pts.append(ProjectivePoint2(np.array([y1, y2, 1.0])))
    corr = Correspondences5(tuple((pts[2 * i], pts[2 * i + 1]) for i in range(5)))
    return corr, linear_space_from_correspondences(corr)


def density_g(u) -> float:
    """Chart density factor of a box-uniform point relative to the plane.

    For a representative u this is ``(|u|^2 / u3^2) / cos(alpha)`` with
    ``alpha`` the angle between u and the chart axis e3; scale-invariant,
    and equal to ``1 / |u3|^3`` for unit representatives.
    """
    v = u.v if isinstance(u, ProjectivePoint2) else np.asarray(u, dtype=float).reshape(3)
    norm = np.linalg.norm(v)
    if abs(v[2]) <= 1e-12 * norm:
        raise ChartSingularity("point lies on the chart boundary u3 = 0")
    return float((norm ** 2 / v[2] ** 2) * (norm / abs(v[2])))


def _z_batch(rng: np.random.Generator, n: int) -> np.ndarray:
    a, b, r, s = rng.standard_normal((4, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    sin, cos = np.sin(theta), np.cos(theta)
    return np.stack([b * r * sin, b * r * cos, a * s * sin, a * s * cos, r * s], axis=1)


def sample_z(rng: np.random.Generator) -> ZVector:
    """One z-vector draw: a, b, r, s standard normal, theta uniform."""
    return ZVector(_z_batch(rng, 1)[0])


def sample_z_matrices(rng: np.random.Generator, n: int) -> np.ndarray:
    """n matrices (n, 5, 5) with i.i.d. z-vector columns."""
    return _z_batch(rng, 5 * n).reshape(n, 5, 5).transpose(0, 2, 1)


def sample_essential_uniform(rng: np.random.Generator):
    """Uniform point of the unit essential variety with its witnesses.

    Draws Haar rotations (U, V) and returns ``(U E0 V^T, U, V)``; the
    transitive two-sided rotation action makes the pushforward the
    invariant probability measure.
    """
    u, v = _rotations(rng, 2)
    e = EssentialMatrix(u @ E0 @ v.T)
    return e, Rotation(u), Rotation(v)


def quadric_param(a5: np.ndarray) -> np.ndarray:
    """Map (a, b, r, s, theta) per point to correspondence vectors.

    Input shape (5, 5) (one row per correspondence); output (5, 2, 3)
    with u = (a, r cos, r sin) and v = (b, s cos, s sin), which satisfy
    u^T E0 v = 0 by construction.
    """
    a5 = np.asarray(a5, dtype=float).reshape(5, 5)
    a, b, r, s, theta = a5.T
    cos, sin = np.cos(theta), np.sin(theta)
    u = np.stack([a, r * cos, r * sin], axis=1)
    v = np.stack([b, s * cos, s * sin], axis=1)
    return np.stack([u, v], axis=1)


def box_weight(points: np.ndarray, boxes) -> float:
    """Density of a correspondence tuple under the box law, per uniform law.

    ``points`` has shape (5, 2, 3).  The weight is the product over all
    ten image points of ``vol(RP^2) * g(point) / area(box)`` when every
    point lies in its box chart region, else 0.  Densities are taken with
    respect to the uniform probability measure, which is what the
    integral-formula estimators expect.
    """
    points = np.asarray(points, dtype=float).reshape(10, 3)
    boxes = [b if isinstance(b, BoxSpec) else BoxSpec(*b) for b in boxes]
    weight = 1.0
    for p, box in zip(points, boxes):
        norm = np.linalg.norm(p)
        if abs(p[2]) <= 1e-12 * norm:
            return 0.0
        y1, y2 = p[0] / p[2], p[1] / p[2]
        if not (box.a <= y1 <= box.b and box.c <= y2 <= box.d):
            return 0.0
        weight *= VOL_RP2 * (norm ** 2 / p[2] ** 2) * (norm / abs(p[2])) / box.area
    return weight


def _box_weights_batch(points: np.ndarray, boxes) -> np.ndarray:
    """Vectorized :func:`box_weight` for stacked (n, 5, 2, 3) points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 10, 3)
    boxes = [b if isinstance(b, BoxSpec) else BoxSpec(*b) for b in boxes]
    lo1 = np.array([b.a for b in boxes])
    hi1 = np.array([b.b for b in boxes])
    lo2 = np.array([b.c for b in boxes])
    hi2 = np.array([b.d for b in boxes])
    areas = np.array([b.area for b in boxes])

    norms = np.linalg.norm(pts, axis=2)
    w3 = pts[:, :, 2]
    safe = np.abs(w3) > 1e-12 * norms
    w3s = np.where(safe, w3, 1.0)
    y1 = pts[:, :, 0] / w3s
    y2 = pts[:, :, 1] / w3s
    inside = safe & (y1 >= lo1) & (y1 <= hi1) & (y2 >= lo2) & (y2 <= hi2)
    g = (norms ** 2 / w3s ** 2) * (norms / np.abs(w3s))
    factors = np.where(inside, VOL_RP2 * g / areas, 0.0)
    return np.prod(factors, axis=1)


def mh_box_chain(rng: np.random.Generator, n: int, boxes, psi=None):
    """Independence-proposal Metropolis-Hastings chain for a box target.

    Proposals are pairs of a uniform essential matrix (through its Haar
    witnesses U, V) and a fresh base draw of (a, b, r, s, theta) per
    correspondence; the target density over the proposal measure is
    ``psi`` evaluated on the rotated correspondences (default: the box
    density).  Since proposals are independent, only the density values
    enter the accept/reject scan.  Returns the accepted states (with
    their first chain position and density) and the acceptance count.
    """
    if psi is None:
        def psi(points):
            return box_weight(points, boxes)

    batch = 4096
    states = []          # (chain_index, points, density) of accepted proposals
    accepted = 0
    current_density = 0.0
    produced = 0
    while produced < n:
        m = min(batch, n - produced)
        us = _rotations(rng, m)
        vs = _rotations(rng, m)
        base = rng.standard_normal((m, 5, 4))
        thetas = rng.uniform(0.0, 2.0 * np.pi, (m, 5))
        for i in range(m):
            a5 = np.concatenate([base[i], thetas[i][:, None]], axis=1)
            pts = quadric_param(a5)
            pts = np.stack([pts[:, 0] @ us[i].T, pts[:, 1] @ vs[i].T], axis=1)
            density = psi(pts)
            take = False
            if density > 0.0:
                if current_density == 0.0:
                    take = True
                else:
                    ratio = density / current_density
                    take = ratio >= 1.0 or rng.uniform() < ratio
            elif current_density == 0.0:
                # chain not yet started; stay unstarted
                pass
            if take:
                states.append((produced + i, pts, density))
                current_density = density
                accepted += 1
        produced += m
    return states, accepted
