"""Count the real solutions of the five-point relative-pose problem.

Given five linear equations on the space of 3x3 matrices, the solutions of
the pose problem are the points of the essential variety cut out by them.
The pipeline below parametrizes the 4-dimensional nullspace of the linear
equations, expands the ten cubic equations of the variety over that chart,
performs a Gauss-Jordan reduction to a 10x10 multiplication ("action")
matrix, reads candidate solutions off its eigenvectors, and validates the
real ones by Gauss-Newton refinement.  Ten complex solutions exist for
generic input, so the real count is an even number between 0 and 10.

The module also counts real roots of determinant pencils ``det(s*A + t*B)``
of 3x3 matrices, used for the rank-two (uncalibrated-camera) average.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DegeneratePencil,
    EigenNoConvergence,
    EliminationFailed,
    RankDeficient,
)
from .geometry import EssentialMatrix

REAL_IMAG_TOL = 1e-6      # |Im| threshold before refinement
ACCEPT_RESIDUAL = 1e-8    # max residual after refinement
DEDUP_TOL = 1e-6          # projective distance identifying duplicates
COND_LIMIT = 1e12         # condition ceiling for the elimination block

# Monomial bases.  Degree-1 basis is [x, y, z, 1]; the degree-2 basis
# doubles as the quotient basis of the action matrix; the degree-3 basis
# orders the constraint-matrix columns.
_LIN_EXPS = ((1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0))
_QUAD_EXPS = (
    (2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1),
    (0, 0, 2), (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0),
)
_CUB_EXPS = (
    (3, 0, 0), (2, 1, 0), (2, 0, 1), (1, 2, 0), (1, 1, 1),
    (1, 0, 2), (0, 3, 0), (0, 2, 1), (0, 1, 2), (0, 0, 3),
) + _QUAD_EXPS

MONOMIAL_EXPONENTS = np.array(_CUB_EXPS)


def _product_tensor(left_exps, right_exps, target_exps):
    index = {e: i for i, e in enumerate(target_exps)}
    out = np.zeros((len(target_exps), len(left_exps), len(right_exps)))
    for a, ea in enumerate(left_exps):
        for b, eb in enumerate(right_exps):
            s = tuple(x + y for x, y in zip(ea, eb))
            out[index[s], a, b] = 1.0
    return out


_P2 = _product_tensor(_LIN_EXPS, _LIN_EXPS, _QUAD_EXPS)     # lin*lin -> quad
_P3 = _product_tensor(_QUAD_EXPS, _LIN_EXPS, _CUB_EXPS)     # quad*lin -> cubic
_P2_FLAT = _P2.reshape(10, 16).T.copy()                     # (4*4, 10)
_P3_FLAT = _P3.reshape(20, 40).T.copy()                     # (10*4, 20)

_DET_PERMS = ((0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1), (1, 0, 2), (2, 1, 0))
_DET_SIGNS = np.array([1.0, 1.0, 1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True, eq=False)
class LinearSpace:
    """Five linear functionals on 3x3 matrices (row-major vectorization).

    The row span must have numerical rank 5: the smallest singular value
    has to be at least 1e-10 times the largest.
    """

    rows: np.ndarray
    rows_unit: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.shape != (5, 9) or not np.all(np.isfinite(rows)):
            raise RankDeficient("need a finite 5x9 coefficient matrix")
        svals = np.linalg.svd(rows, compute_uv=False)
        if svals[-1] < 1e-10 * svals[0]:
            raise RankDeficient("rows are numerically rank deficient")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        unit = rows / np.linalg.norm(rows, axis=1, keepdims=True)
        unit.setflags(write=False)
        object.__setattr__(self, "rows_unit", unit)


@dataclass(frozen=True)
class CountResult:
    """Validated real-solution count for one instance.

    ``status`` is "ok", "retried" (with ``retries`` re-randomizations of the
    nullspace chart) or "failed" (``reason`` set, no solutions reported).
    """

    real_count: int
    solutions: tuple
    status: str
    retries: int = 0
    reason: str = ""
    residual_max: float = 0.0

    @property
    def failed(self) -> bool:
        return self.status == "failed"


def nullspace_basis(space: LinearSpace) -> np.ndarray:
    """Orthonormal basis (4x9) of the common kernel of the five rows."""
    if not isinstance(space, LinearSpace):
        space = LinearSpace(np.asarray(space))
    _, _, vt = np.linalg.svd(space.rows)
    return vt[5:]


def build_constraint_matrix(basis) -> np.ndarray:
    """Coefficients of the ten cubic equations over the nullspace chart.

    ``basis`` holds four independent 9-vectors E1..E4 (rows of a 4x9
    array).  Row k of the result holds the coefficients of the k-th cubic
    residual of ``E(x,y,z) = x*E1 + y*E2 + z*E3 + E4`` over the fixed
    degree-3 monomial basis (row 0 is the determinant, rows 1..9 the
    matrix equation).
    """
    basis = np.asarray(basis, dtype=float)
    # lin[i, j, :] = coefficients of entry (i, j) over [x, y, z, 1]
    lin = basis.reshape(4, 3, 3).transpose(1, 2, 0)

    # E E^T entries as degree-2 polynomials, then trace.
    outer = np.tensordot(lin, lin, axes=([1], [1]))          # (i, a, j, b)
    quad = outer.transpose(0, 2, 1, 3).reshape(9, 16) @ _P2_FLAT
    quad = quad.reshape(3, 3, 10)
    tr = quad[0, 0] + quad[1, 1] + quad[2, 2]

    # 2 E E^T E - tr(E E^T) E, entrywise degree 3.
    prod = np.tensordot(quad, lin, axes=([1], [0]))          # (i, q, j, a)
    cub_eete = prod.transpose(0, 2, 1, 3).reshape(9, 40) @ _P3_FLAT
    cub_tre = (tr[None, :, None] * lin.reshape(9, 1, 4)).reshape(9, 40) @ _P3_FLAT
    mat_rows = 2.0 * cub_eete - cub_tre

    # Determinant via signed permutation products.
    first = lin[0, [p[0] for p in _DET_PERMS]]               # (6, 4)
    second = lin[1, [p[1] for p in _DET_PERMS]]
    third = lin[2, [p[2] for p in _DET_PERMS]]
    pair = (first[:, :, None] * second[:, None, :]).reshape(6, 16) @ _P2_FLAT
    terms = (pair[:, :, None] * third[:, None, :]).reshape(6, 40) @ _P3_FLAT
    det_row = _DET_SIGNS @ terms

    out = np.empty((10, 20))
    out[0] = det_row
    out[1:] = mat_rows
    return out


def action_matrix(m: np.ndarray) -> np.ndarray:
    """Multiplication-by-x operator on the quotient basis.

    Gauss-Jordan reduces the 10x20 constraint matrix to ``[1 | B]`` (the
    left block is indexed by the ten degree-3 monomials) and assembles the
    10x10 matrix of multiplication by x on the quotient basis
    [x^2, xy, xz, y^2, yz, z^2, x, y, z, 1]: products that leave the basis
    are rewritten through B, the rest are basis inclusions.
    """
    m = np.asarray(m, dtype=float)
    block = m[:, :10]
    svals = np.linalg.svd(block, compute_uv=False)
    if svals[-1] <= svals[0] / COND_LIMIT:
        raise EliminationFailed("leading 10x10 block is too ill-conditioned")
    reduced = np.linalg.solve(block, m[:, 10:])

    t = np.zeros((10, 10))
    # x * {x^2, xy, xz, y^2, yz, z^2} = {x^3, x^2y, x^2z, xy^2, xyz, xz^2}
    t[:, :6] = -reduced[:6].T
    t[0, 6] = 1.0   # x * x = x^2
    t[1, 7] = 1.0   # x * y = xy
    t[2, 8] = 1.0   # x * z = xz
    t[6, 9] = 1.0   # x * 1 = x
    return t


class EigenCandidates(NamedTuple):
    values: np.ndarray    # 10 complex eigenvalues
    triples: np.ndarray   # (10, 3) complex (x, y, z) read off the eigenvectors


def eigen_candidates(t: np.ndarray) -> EigenCandidates:
    """Eigen-decompose the action matrix and extract candidate solutions.

    Evaluation at a solution point is a left eigenvector of the
    multiplication operator, so the monomial vectors are eigenvectors of
    the transpose; (x, y, z) are the coordinate ratios of the monomials
    x, y, z against the monomial 1.  Complex candidates come in conjugate
    pairs.
    """
    t = np.asarray(t, dtype=float)
    try:
        values, vectors = np.linalg.eig(t.T)
    except np.linalg.LinAlgError as exc:
        raise EigenNoConvergence(str(exc)) from exc
    with np.errstate(divide="ignore", invalid="ignore"):
        triples = (vectors[6:9] / vectors[9]).T
    return EigenCandidates(values, triples)


def _haar_o4(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((4, 4)))
    return q * np.sign(np.diag(r))


def _monomials_and_gradients(w: np.ndarray):
    """Degree<=3 monomial values (k,20) and gradients (k,20,3) at chart points."""
    k = w.shape[0]
    powers = np.ones((k, 3, 4))
    for e in range(1, 4):
        powers[:, :, e] = powers[:, :, e - 1] * w
    ex = MONOMIAL_EXPONENTS
    mon = (powers[:, 0, ex[:, 0]] * powers[:, 1, ex[:, 1]] * powers[:, 2, ex[:, 2]])
    grad = np.empty((k, 20, 3))
    for v in range(3):
        e = ex[:, v]
        down = powers[:, v, np.maximum(e - 1, 0)]
        o1, o2 = [u for u in range(3) if u != v]
        others = powers[:, o1, ex[:, o1]] * powers[:, o2, ex[:, o2]]
        grad[:, :, v] = e * down * others
    return mon, grad


def _refine_on_chart(w: np.ndarray, constraint: np.ndarray, iters: int = 10):
    """Gauss-Newton on the ten cubic residuals over the chart coordinates.

    The five linear residuals vanish identically on the chart, so this is
    the 15-residual refinement restricted to the solution chart.
    """
    w = w.copy()
    for _ in range(iters):
        mon, grad = _monomials_and_gradients(w)
        r = mon @ constraint.T                      # (k, 10)
        if np.max(np.abs(r), initial=0.0) < 1e-13:
            break
        j = constraint @ grad                       # (k, 10, 3)
        jt = j.transpose(0, 2, 1)
        h = jt @ j
        g = jt @ r[..., None]
        h += 1e-14 * np.trace(h, axis1=1, axis2=2)[:, None, None] * np.eye(3)
        try:
            step = np.linalg.solve(h, g)[..., 0]
        except np.linalg.LinAlgError:
            step = (np.linalg.pinv(h) @ g)[..., 0]
        bad = ~np.all(np.isfinite(step), axis=1)
        step[bad] = 0.0
        w -= step
    return w


def _batch_demazure(mats: np.ndarray) -> np.ndarray:
    """Stacked version of :func:`essential_lab.geometry.demazure_residuals`."""
    eet = mats @ mats.transpose(0, 2, 1)
    tr = np.trace(eet, axis1=1, axis2=2)
    cubic = 2.0 * (eet @ mats) - tr[:, None, None] * mats
    out = np.empty((mats.shape[0], 10))
    out[:, 0] = np.linalg.det(mats)
    out[:, 1:] = cubic.reshape(-1, 9)
    return out


def validate_and_count(candidates, space: LinearSpace, basis, constraint=None,
                       retries: int = 0) -> CountResult:
    """Filter, refine and deduplicate candidate solutions.

    Keeps candidates whose imaginary parts are below 1e-6, refines them by
    Gauss-Newton, and accepts a solution when the unit-normalized matrix
    satisfies the five (unit-row) linear equations and the ten cubics to
    1e-8.  Duplicates closer than 1e-6 in the projective metric are merged.
    An odd surviving count is reported as status "failed" with reason
    "parity" so the caller can re-randomize the chart and retry.
    """
    triples = np.asarray(candidates.triples if isinstance(candidates, EigenCandidates)
                         else candidates, dtype=complex).reshape(-1, 3)
    basis = np.asarray(basis, dtype=float)
    if constraint is None:
        constraint = build_constraint_matrix(basis)

    finite = np.all(np.isfinite(triples), axis=1)
    realish = finite & (np.max(np.abs(triples.imag), axis=1) <= REAL_IMAG_TOL)
    w = triples.real[realish]

    solutions = []
    vectors = []
    residual_max = 0.0
    if w.shape[0]:
        w = _refine_on_chart(w, constraint)
        coords = np.concatenate([w, np.ones((w.shape[0], 1))], axis=1)
        evecs = coords @ basis                          # (k, 9)
        norms = np.linalg.norm(evecs, axis=1)
        keepers = np.isfinite(norms) & (norms > 1e-12)
        units = evecs[keepers] / norms[keepers, None]
        mats = (units * np.sqrt(2.0)).reshape(-1, 3, 3)  # half-trace norm 1
        residuals = np.maximum(
            np.max(np.abs(units @ space.rows_unit.T), axis=1),
            np.max(np.abs(_batch_demazure(mats)), axis=1),
        )
        for unit, mat, res in zip(units, mats, residuals):
            if res > ACCEPT_RESIDUAL:
                continue
            duplicate = any(
                min(np.linalg.norm(unit - p), np.linalg.norm(unit + p)) <= DEDUP_TOL
                for p in vectors
            )
            if duplicate:
                continue
            vectors.append(unit)
            if res <= 1e-9:
                solutions.append(EssentialMatrix.trusted(mat, res))
            else:
                solutions.append(EssentialMatrix(mat))
            residual_max = max(residual_max, res)

    count = len(solutions)
    if count % 2:
        return CountResult(count, (), "failed", retries, "parity", residual_max)
    status = "retried" if retries else "ok"
    return CountResult(count, tuple(solutions), status, retries, "", residual_max)


def solve_five_point(space: LinearSpace, retries: int = 5, rng=None) -> CountResult:
    """Full solve: nullspace chart, action matrix, eigen candidates, validation.

    On elimination or eigen-iteration failure the nullspace basis is
    recombined by a random orthogonal 4x4 mixing (a new chart) and the
    solve is retried, up to ``retries`` times; a parity failure earns one
    extra re-randomized attempt.  Deterministic for a fixed ``rng`` seed.
    """
    if not isinstance(space, LinearSpace):
        space = LinearSpace(np.asarray(space))
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    basis0 = nullspace_basis(space)

    mixes = 0
    parity_used = False
    last_reason = "elimination"
    while True:
        basis = basis0 if mixes == 0 else _haar_o4(rng) @ basis0
        try:
            constraint = build_constraint_matrix(basis)
            op = action_matrix(constraint)
            cands = eigen_candidates(op)
        except (EliminationFailed, EigenNoConvergence):
            if mixes >= retries:
                return CountResult(0, (), "failed", mixes, "elimination", 0.0)
            mixes += 1
            continue
        result = validate_and_count(cands, space, basis, constraint, retries=mixes)
        if not result.failed:
            return result
        last_reason = result.reason
        if parity_used or mixes >= retries:
            return CountResult(0, (), "failed", mixes, last_reason, 0.0)
        parity_used = True
        mixes += 1


def _pencil_coefficients(a: np.ndarray, b: np.ndarray):
    """Coefficients of det(s*A + t*B) over [s^3, s^2 t, s t^2, t^3] (batched)."""
    c0 = np.linalg.det(a)
    c3 = np.linalg.det(b)
    splus = np.linalg.det(a + b)
    sminus = np.linalg.det(a - b)
    c1 = 0.5 * (splus - sminus) - c3
    c2 = 0.5 * (splus + sminus) - c0
    return np.stack([c0, c1, c2, c3], axis=-1)


def pencil_real_root_counts(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Real projective roots of det(s*A + t*B) for stacked 3x3 pencils.

    Roots are counted without multiplicity via the binary-cubic
    discriminant on max-normalized coefficients; the count is 3, 2 or 1.
    Pencils whose determinant vanishes identically raise
    :class:`DegeneratePencil` (the four interpolation points are four
    distinct evaluation directions, so all-zero values force an
    identically zero cubic).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    coeff = _pencil_coefficients(a, b)
    scale = np.max(np.abs(coeff), axis=-1)
    mats_scale = np.maximum(
        (np.max(np.abs(a), axis=(-2, -1)) + np.max(np.abs(b), axis=(-2, -1))) ** 3,
        1.0,
    )
    if np.any(scale <= 1e-13 * mats_scale):
        raise DegeneratePencil("det(s*A + t*B) vanishes identically")
    c0, c1, c2, c3 = np.moveaxis(coeff / scale[..., None], -1, 0)
    disc = (
        18.0 * c0 * c1 * c2 * c3
        - 4.0 * c1 ** 3 * c3
        + c1 ** 2 * c2 ** 2
        - 4.0 * c0 * c2 ** 3
        - 27.0 * c0 ** 2 * c3 ** 2
    )
    counts = np.where(disc > tol, 3, 1)
    degenerate = np.abs(disc) <= tol
    if np.any(degenerate):
        # repeated roots: double+simple gives 2 distinct, triple gives 1
        d0 = c1 ** 2 - 3.0 * c0 * c2
        d1 = c2 ** 2 - 3.0 * c1 * c3
        triple = (np.abs(d0) <= tol) & (np.abs(d1) <= tol)
        counts = np.where(degenerate, np.where(triple, 1, 2), counts)
    return counts


def count_real_cubic_pencil(a: np.ndarray, b: np.ndarray) -> int:
    """Real projective roots of det(s*A + t*B) for a single 3x3 pencil."""
    return int(pencil_real_root_counts(np.asarray(a)[None], np.asarray(b)[None])[0])
