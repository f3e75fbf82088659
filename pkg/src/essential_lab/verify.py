"""Numerical certification of the differential-geometric constants.

Finite-difference normal Jacobians of the pose map (constant 1/4), of the
two-sided rotation action (1/(2 sqrt 2)), and of the quadric
parametrization (sqrt(r^2 + s^2)); the block determinant identity of the
incidence Jacobian; and a Monte Carlo computation of the variety volume
(4 pi^3 for the unit-sphere variety, ratio 4 against projective 5-space).

All matrix frames are orthonormal for the half-trace inner product; the
printed constants depend on that convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import distributions as dists
from .errors import AssertionFailure, DegenerateInput
from .geometry import (
    E0,
    cross_matrix,
    half_trace_inner,
    so3_basis,
    tangent_basis_E0,
)
from .montecarlo import StreamStats

DEFAULT_STEP = 1e-5

VOL_SO3 = 8.0 * math.pi ** 2
VOL_S2 = 4.0 * math.pi
VOL_RP5 = math.pi ** 3 / 2.0


def finite_diff_normal_jacobian(fn, curves, frame_out, inner=None, h: float = DEFAULT_STEP) -> float:
    """Normal Jacobian of a map between manifolds by central differences.

    ``curves[l]`` is a callable ``s -> domain point`` passing through the
    base point with velocity equal to the l-th input frame vector;
    ``frame_out`` lists orthonormal ambient vectors spanning (at least)
    the tangent space of the target.  The Jacobian entry (k, l) is the
    inner product of the central difference of ``fn`` along curve l with
    output frame k.  Returns the square root of the Gram determinant of
    the smaller side, i.e. ``sqrt(det J J^T)`` when the output frame is
    not larger than the input frame and ``sqrt(det J^T J)`` otherwise.
    """
    if not 1e-7 <= h <= 1e-4:
        raise ValueError("step size must lie in [1e-7, 1e-4]")
    if inner is None:
        inner = lambda a, b: float(np.sum(np.asarray(a) * np.asarray(b)))
    jac = np.empty((len(frame_out), len(curves)))
    for l, curve in enumerate(curves):
        diff = (np.asarray(fn(curve(h)), dtype=float)
                - np.asarray(fn(curve(-h)), dtype=float)) / (2.0 * h)
        for k, out in enumerate(frame_out):
            jac[k, l] = inner(diff, out)
    if jac.shape[0] <= jac.shape[1]:
        gram = jac @ jac.T
    else:
        gram = jac.T @ jac
    return float(np.sqrt(max(np.linalg.det(gram), 0.0)))


def _rodrigues(f: np.ndarray, s: float) -> np.ndarray:
    """Rotation exp(s F) for a skew matrix F with unit half-trace norm."""
    axis = np.array([f[2, 1], f[0, 2], f[1, 0]])
    angle = s * np.linalg.norm(axis)
    if angle == 0.0:
        return np.eye(3)
    k = cross_matrix(axis / np.linalg.norm(axis))
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _witnesses(r: np.ndarray, t: np.ndarray):
    """Rotations (U, V) with U E0 V^T equal to the essential matrix of (R, t)."""
    # U maps e1 to t; complete the frame by Gram-Schmidt
    u = np.empty((3, 3))
    u[:, 0] = t
    pick = np.eye(3)[np.argmin(np.abs(t))]
    u[:, 1] = pick - (pick @ t) * t
    u[:, 1] /= np.linalg.norm(u[:, 1])
    u[:, 2] = np.cross(t, u[:, 1])
    v = r.T @ u
    return u, v


def nj_pose_map_at(r, t, h: float = DEFAULT_STEP) -> float:
    """Finite-difference normal Jacobian of ``(R, t) -> [t]_x R`` at (R, t).

    Frames: the left-translated skew basis on the rotation factor and a
    tangent frame of the sphere at t (inputs); the rotated tangent basis
    of the variety at the image (outputs).  Input validity is enforced.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float).reshape(3)
    if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-12 or abs(np.linalg.det(r) - 1) > 1e-12:
        raise DegenerateInput("rotation input violates its invariant")
    if abs(np.linalg.norm(t) - 1.0) > 1e-12:
        raise DegenerateInput("translation must be a unit vector")

    u, v = _witnesses(r, t)
    fs = so3_basis()
    curves = []
    for f in fs:
        rot_dir = u @ f @ u.T
        curves.append(lambda s, d=rot_dir: (_rodrigues(d, s) @ r, t))
    for j in (1, 2):
        axis = u[:, j]
        curves.append(lambda s, a=axis: (r, math.cos(s) * t + math.sin(s) * a))
    frame_out = [u @ b @ v.T for b in tangent_basis_E0()]

    def pose_map(point):
        rr, tt = point
        return cross_matrix(tt) @ rr

    return finite_diff_normal_jacobian(pose_map, curves, frame_out,
                                       inner=half_trace_inner, h=h)


@dataclass
class CheckReport:
    name: str
    passed: bool
    value: float
    expected: float
    worst_deviation: float
    samples: int = 1

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": self.value,
                "expected": self.expected, "worst_deviation": self.worst_deviation,
                "samples": self.samples}


def verify_nj_E(samples: int = 100, seed: int = 0, h: float = DEFAULT_STEP,
                tol: float = 1e-6) -> CheckReport:
    """The pose-map normal Jacobian equals 1/4 at every sampled point."""
    worst = 0.0
    value = nj_pose_map_at(np.eye(3), np.array([1.0, 0.0, 0.0]), h=h)
    worst = abs(value - 0.25)
    for index in range(samples):
        rng = dists.rng_for(seed, index)
        r = dists._rotations(rng, 1)[0]
        t = rng.standard_normal(3)
        t /= np.linalg.norm(t)
        worst = max(worst, abs(nj_pose_map_at(r, t, h=h) - 0.25))
    report = CheckReport("nj_pose_map", worst <= tol, value, 0.25, worst, samples + 1)
    if not report.passed:
        raise AssertionFailure(f"pose-map normal Jacobian off by {worst:.3e}", report.to_dict())
    return report


def nj_rotation_action_at(u0: np.ndarray, v0: np.ndarray, h: float = DEFAULT_STEP) -> float:
    """Normal Jacobian of ``(U, V) -> U E0 V^T`` at (U0, V0)."""
    fs = so3_basis()
    curves = []
    for f in fs:
        curves.append(lambda s, ff=f: (u0, v0 @ _rodrigues(ff, s)))
    for f in fs:
        curves.append(lambda s, ff=f: (u0 @ _rodrigues(ff, s), v0))
    frame_out = [u0 @ b @ v0.T for b in tangent_basis_E0()]

    def action(point):
        uu, vv = point
        return uu @ E0 @ vv.T

    return finite_diff_normal_jacobian(action, curves, frame_out,
                                       inner=half_trace_inner, h=h)


def verify_nj_gamma(seed: int = 0, h: float = DEFAULT_STEP, tol: float = 1e-5,
                    samples: int = 10) -> CheckReport:
    """The two-sided action has normal Jacobian 1/sqrt(8), everywhere."""
    expected = 1.0 / math.sqrt(8.0)
    value = nj_rotation_action_at(np.eye(3), np.eye(3), h=h)
    worst = abs(value - expected)
    for index in range(samples):
        rng = dists.rng_for(seed, index)
        u0, v0 = dists._rotations(rng, 2)
        worst = max(worst, abs(nj_rotation_action_at(u0, v0, h=h) - expected))
    report = CheckReport("nj_rotation_action", worst <= tol, value, expected, worst,
                         samples + 1)
    if not report.passed:
        raise AssertionFailure(f"action normal Jacobian off by {worst:.3e}", report.to_dict())
    return report


def verify_quadric_param_nj(samples: int = 50, seed: int = 0, h: float = DEFAULT_STEP,
                            tol: float = 1e-6) -> CheckReport:
    """The quadric parametrization scales volume by sqrt(r^2 + s^2)."""

    def param(p):
        a, b, r, s, theta = p
        return np.array([a, r * math.cos(theta), r * math.sin(theta),
                         b, s * math.cos(theta), s * math.sin(theta)])

    frame_out = list(np.eye(6))
    worst = 0.0
    value = None
    for index in range(samples):
        rng = dists.rng_for(seed, index)
        point = rng.standard_normal(5)
        point[4] = rng.uniform(0.0, 2.0 * math.pi)
        expected = math.hypot(point[2], point[3])
        curves = [
            (lambda s, i=i, p=point.copy(): p + s * np.eye(5)[i])
            for i in range(5)
        ]
        got = finite_diff_normal_jacobian(param, curves, frame_out, h=h)
        if value is None:
            value = got
        worst = max(worst, abs(got - expected))
    report = CheckReport("nj_quadric_param", worst <= tol, value, float("nan"), worst, samples)
    if not report.passed:
        raise AssertionFailure(f"quadric parametrization Jacobian off by {worst:.3e}",
                               report.to_dict())
    return report


def mc_volume_essential(n: int = 10_000, seed: int = 0, h: float = DEFAULT_STEP) -> float:
    """Monte Carlo volume of the unit-sphere essential variety.

    Averages the pose-map normal Jacobian over Haar-random poses and
    multiplies by half the product of the rotation-group and sphere
    volumes (the map is 2:1).  The Jacobian is constant, so the estimate
    is essentially exact: 4 pi^3.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    stats = StreamStats()
    for index in range(n):
        rng = dists.rng_for(seed, index)
        r = dists._rotations(rng, 1)[0]
        t = rng.standard_normal(3)
        t /= np.linalg.norm(t)
        stats.update(nj_pose_map_at(r, t, h=h))
    return 0.5 * VOL_SO3 * VOL_S2 * stats.mean


def incidence_jacobian_blocks(points: np.ndarray) -> np.ndarray:
    """The 5x30 block matrix of quadric gradients at five correspondences.

    Row i is the gradient of ``u^T E0 v`` at (u_i, v_i), i.e.
    ``[0, -v3, v2, 0, u3, -u2]``, placed in block-diagonal position.
    """
    points = np.asarray(points, dtype=float).reshape(5, 2, 3)
    out = np.zeros((5, 30))
    for i, (u, v) in enumerate(points):
        out[i, 6 * i: 6 * i + 6] = [0.0, -v[2], v[1], 0.0, u[2], -u[1]]
    return out


def verify_detAAT_identity(samples: int = 200, seed: int = 0,
                           tol: float = 1e-10) -> CheckReport:
    """det(A A^T) equals the product of u2^2 + u3^2 + v2^2 + v3^2."""
    worst = 0.0
    value = None
    for index in range(samples):
        rng = dists.rng_for(seed, index)
        pts = rng.standard_normal((5, 2, 3))
        a = incidence_jacobian_blocks(pts)
        lhs = np.linalg.det(a @ a.T)
        rhs = float(np.prod([
            u[1] ** 2 + u[2] ** 2 + v[1] ** 2 + v[2] ** 2 for u, v in pts
        ]))
        rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
        if value is None:
            value = lhs
        worst = max(worst, rel)
    report = CheckReport("det_AAT_identity", worst <= tol, value, float("nan"), worst, samples)
    if not report.passed:
        raise AssertionFailure(f"block determinant identity off by {worst:.3e}",
                               report.to_dict())
    return report


def correspondence_matrix(points: np.ndarray) -> np.ndarray:
    """5x5 matrix of tangent-basis pairings u_i^T B_j v_i."""
    points = np.asarray(points, dtype=float).reshape(5, 2, 3)
    basis = tangent_basis_E0()
    return np.array([[u @ b @ v for b in basis] for u, v in points])


def verify_detB_identity(n: int = 100_000, seed: int = 0) -> dict:
    """E|det B| over quadric samples equals 4 E|det Z|, within 3 sigma.

    B pairs the tangent basis with correspondences on the base quadric;
    its rows are componentwise sqrt(2)-scalings of z-vectors except the
    last coordinate, so the absolute determinants match up to a factor 4.
    """
    rng = dists.rng_for(seed, 0)
    m = n
    base = rng.standard_normal((m, 5, 4))
    thetas = rng.uniform(0.0, 2.0 * math.pi, (m, 5))
    a, b, r, s = (base[..., k] for k in range(4))
    sin, cos = np.sin(thetas), np.cos(thetas)
    # rows of B for u=(a, r w), v=(b, s w): sqrt2*(br sin, br cos, as sin, as cos), rs
    root2 = math.sqrt(2.0)
    bmat = np.stack([root2 * b * r * sin, root2 * b * r * cos,
                     root2 * a * s * sin, root2 * a * s * cos, r * s], axis=2)
    det_b = np.abs(np.linalg.det(bmat))

    rng2 = dists.rng_for(seed, 1)
    det_z = np.abs(np.linalg.det(dists.sample_z_matrices(rng2, n)))
    lhs = StreamStats.from_values(det_b)
    rhs = StreamStats.from_values(4.0 * det_z)
    gap = abs(lhs.mean - rhs.mean)
    tol = 3.0 * (lhs.stderr + rhs.stderr)
    return {"mean_detB": lhs.mean, "mean_4detZ": rhs.mean, "gap": gap,
            "tolerance": tol, "passed": gap <= tol}


def run_suite(suite: str = "all", seed: int = 0, nj_samples: int = 100,
              volume_samples: int = 10_000) -> dict:
    """Run the requested verification checks and report pass/fail."""
    if suite not in ("all", "nj", "volumes", "identities"):
        raise ValueError(f"unknown suite {suite!r}")
    checks = {}
    passed = True
    if suite in ("all", "nj"):
        for fn in (lambda: verify_nj_E(nj_samples, seed),
                   lambda: verify_nj_gamma(seed),
                   lambda: verify_quadric_param_nj(50, seed)):
            try:
                rep = fn()
            except AssertionFailure as exc:
                rep_dict = exc.args[1]
                checks[rep_dict["name"]] = rep_dict
                passed = False
                continue
            checks[rep.name] = rep.to_dict()
    if suite in ("all", "volumes"):
        vol_sphere = mc_volume_essential(volume_samples, seed)
        expected = 4.0 * math.pi ** 3
        rel = abs(vol_sphere - expected) / expected
        ratio = (0.5 * vol_sphere) / VOL_RP5
        ok = rel <= 0.01 and abs(ratio - 4.0) <= 0.04
        passed = passed and ok
        checks["volume_essential"] = {
            "name": "volume_essential", "passed": ok,
            "value": vol_sphere, "expected": expected,
            "projective_ratio": ratio, "samples": volume_samples,
        }
    if suite in ("all", "identities"):
        try:
            rep = verify_detAAT_identity(200, seed)
            checks[rep.name] = rep.to_dict()
        except AssertionFailure as exc:
            checks["det_AAT_identity"] = exc.args[1]
            passed = False
        det_b = verify_detB_identity(100_000, seed)
        checks["detB_identity"] = det_b
        passed = passed and det_b["passed"]
    passed = passed and all(c.get("passed", False) for c in checks.values())
    return {"suite": suite, "passed": passed, "checks": checks}
