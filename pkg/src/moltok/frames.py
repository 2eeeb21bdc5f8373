"""Local spherical frames: reference selection, exact encode/decode.

Every atom after the first is described by (d, theta, phi) in a frame built
from a focal atom f and two references c1, c2 drawn from earlier atoms.
Three selection strategies are provided:

* ``SEQ1D``     f, c1, c2 = the three preceding sequence positions
* ``TOPO2D``    f = latest preceding bonded atom, then the same rule chained
* ``SPATIAL3D`` f as in TOPO2D, c1/c2 = the two spatially nearest earlier atoms

Unavailable slots are VIRTUAL and get replaced by fixed phantom points

    v1 = x_f + (-1, 0, 0)      v2 = x_f + (0, -1, 0)

Encoding first moves the conformer into a canonical gauge pose (atom 0 at the
origin, atom 1 on +x, first off-axis atom in the z=0, y>=0 half plane), which
makes every extracted value a rigid-motion invariant of the input while
keeping decode(encode(x)) an exact inverse: the decoder replays the identical
frame constructions and reproduces the gauge pose coordinate by coordinate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CoincidentAtomsError, DegenerateFrameError, MoltokError
from .lineno import identity_order
from .molgraph import Conformer, Molecule

log = logging.getLogger(__name__)

VIRTUAL = -1

# Norm / collinearity tolerance for all degeneracy checks.
DEGENERACY_EPS = 1e-8

# Spherical coordinate stored for atom 0, which has no frame.  The values are
# pure gauge: decode places atom 0 at the origin unconditionally.
GAUGE_COORD_D = 1.0


class FrameStrategy(Enum):
    SEQ1D = "1d"
    TOPO2D = "2d"
    SPATIAL3D = "3d"


@dataclass(frozen=True)
class FrameRefs:
    """Focal and reference positions (sequence positions, or VIRTUAL)."""

    f: int
    c1: int
    c2: int


@dataclass(frozen=True)
class FrameBasis:
    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    n: np.ndarray


@dataclass(frozen=True)
class SphericalCoord:
    """d > 0 in Angstrom, theta in [0, pi], phi in (-pi, pi]."""

    d: float
    theta: float
    phi: float


def gauge_coord() -> SphericalCoord:
    return SphericalCoord(GAUGE_COORD_D, math.pi / 2.0, math.pi)


# ---------------------------------------------------------------------------
# reference selection
# ---------------------------------------------------------------------------


def _line_adjacency(mol: Molecule, order: np.ndarray) -> list[list[int]]:
    """Neighbor lists expressed in sequence positions."""
    pos = np.empty(mol.n_atoms, dtype=np.int64)
    pos[np.asarray(order)] = np.arange(mol.n_atoms)
    adj = [[] for _ in range(mol.n_atoms)]
    for b in mol.bonds:
        pi, pj = int(pos[b.i]), int(pos[b.j])
        adj[pi].append(pj)
        adj[pj].append(pi)
    for lst in adj:
        lst.sort()
    return adj


def _topo_focal(adj, i):
    """Latest preceding topological neighbor, or VIRTUAL if none."""
    best = VIRTUAL
    for j in adj[i]:
        if j < i and j > best:
            best = j
    return best


def select_frame(
    mol: Molecule,
    order,
    i: int,
    strategy: FrameStrategy,
    coords=None,
    _adj=None,
) -> FrameRefs:
    """Choose (f, c1, c2) for the atom at sequence position ``i``.

    ``coords`` holds the positions of sequence positions < i and is required
    by SPATIAL3D; the other strategies are purely combinatorial.
    """
    if i < 0 or i >= mol.n_atoms:
        raise MoltokError(f"atom position {i} out of range")
    if strategy == FrameStrategy.SEQ1D:
        return FrameRefs(
            i - 1 if i >= 1 else VIRTUAL,
            i - 2 if i >= 2 else VIRTUAL,
            i - 3 if i >= 3 else VIRTUAL,
        )

    adj = _adj if _adj is not None else _line_adjacency(mol, np.asarray(order))
    if i == 0:
        return FrameRefs(VIRTUAL, VIRTUAL, VIRTUAL)
    f = _topo_focal(adj, i)
    if f == VIRTUAL:
        raise MoltokError(
            f"disconnected prefix: atom at position {i} has no preceding "
            "bonded atom"
        )

    if strategy == FrameStrategy.TOPO2D:
        c1 = _topo_focal(adj, f)
        c2 = _topo_focal(adj, c1) if c1 != VIRTUAL else VIRTUAL
        return FrameRefs(f, c1, c2)

    if strategy == FrameStrategy.SPATIAL3D:
        candidates = [j for j in range(i) if j != f]
        if not candidates:
            return FrameRefs(f, VIRTUAL, VIRTUAL)
        if coords is None:
            raise MoltokError("SPATIAL3D selection requires prefix coordinates")
        pts = np.asarray(coords)
        dist = np.linalg.norm(pts[candidates] - pts[f], axis=1)
        # ties broken by the smaller sequence position
        ranked = sorted(zip(dist.tolist(), candidates))
        c1 = ranked[0][1]
        c2 = ranked[1][1] if len(ranked) > 1 else VIRTUAL
        return FrameRefs(f, c1, c2)

    raise MoltokError(f"unknown strategy {strategy!r}")


# ---------------------------------------------------------------------------
# basis construction
# ---------------------------------------------------------------------------


def build_basis(origin, p_c1, p_c2) -> FrameBasis:
    """Gram-Schmidt basis from three concrete points; raises on degeneracy."""
    origin = np.asarray(origin, dtype=np.float64)
    v1 = np.asarray(p_c1, dtype=np.float64) - origin
    n1 = np.linalg.norm(v1)
    if n1 < DEGENERACY_EPS:
        raise DegenerateFrameError("c1 reference coincides with the focal atom")
    e1 = v1 / n1
    v2 = np.asarray(p_c2, dtype=np.float64) - origin
    w = v2 - np.dot(v2, e1) * e1
    n2 = np.linalg.norm(w)
    if n2 < DEGENERACY_EPS:
        raise DegenerateFrameError("collinear frame references")
    e2 = w / n2
    n = np.cross(e1, e2)
    return FrameBasis(origin, e1, e2, n)


def _phantom_c1(origin):
    return origin + np.array([-1.0, 0.0, 0.0])


def _phantom_c2(origin):
    return origin + np.array([0.0, -1.0, 0.0])


def frame_basis(points, refs: FrameRefs, atom_index=None) -> FrameBasis:
    """Resolve VIRTUAL references to phantom points and build the basis.

    On collinear references the phantom c2 is substituted and nudged by
    (0, 0, 1e-3); both encode and decode apply the identical deterministic
    rule, so round trips stay exact.
    """
    pts = np.asarray(points, dtype=np.float64)
    if refs.f == VIRTUAL:
        raise DegenerateFrameError("focal reference is virtual", atom_index=atom_index)
    origin = pts[refs.f]
    p1 = pts[refs.c1] if refs.c1 != VIRTUAL else _phantom_c1(origin)
    base2 = pts[refs.c2] if refs.c2 != VIRTUAL else _phantom_c2(origin)
    fallbacks = (
        base2,
        _phantom_c2(origin) + np.array([0.0, 0.0, 1e-3]),
        _phantom_c1(origin) + np.array([0.0, 0.0, 1e-3]),
    )
    last_err = None
    for attempt, p2 in enumerate(fallbacks):
        try:
            basis = build_basis(origin, p1, p2)
        except DegenerateFrameError as err:
            if "coincides" in str(err):
                raise DegenerateFrameError(str(err), atom_index=atom_index) from None
            last_err = err
            continue
        if attempt > 0:
            log.warning(
                "collinear frame references at atom %s; using perturbed phantom c2",
                atom_index,
            )
        return basis
    raise DegenerateFrameError(str(last_err), atom_index=atom_index)


# ---------------------------------------------------------------------------
# spherical extraction / placement
# ---------------------------------------------------------------------------


def extract_spherical(x, basis: FrameBasis) -> SphericalCoord:
    """Spherical coordinates of point ``x`` in ``basis``.

    theta is measured from the plane normal; phi is the in-plane azimuth from
    e1 with sign(phi) = sign(proj . e2), the unique convention that makes
    :func:`place_atom` a two-sided inverse.
    """
    rel = np.asarray(x, dtype=np.float64) - basis.origin
    d = float(np.linalg.norm(rel))
    if d < DEGENERACY_EPS:
        raise CoincidentAtomsError("atom coincides with the frame origin")
    theta = math.acos(min(1.0, max(-1.0, float(np.dot(rel, basis.n)) / d)))
    proj = rel - np.dot(rel, basis.n) * basis.n
    pn = float(np.linalg.norm(proj))
    if pn < DEGENERACY_EPS:
        phi = 0.0
    else:
        phi = math.acos(min(1.0, max(-1.0, float(np.dot(proj, basis.e1)) / pn)))
        if float(np.dot(proj, basis.e2)) < 0.0 and 0.0 < phi < math.pi:
            phi = -phi
    return SphericalCoord(d, theta, phi)


def place_atom(basis: FrameBasis, s: SphericalCoord) -> np.ndarray:
    """Global position of the spherical coordinate ``s`` in ``basis``."""
    ct, st = math.cos(s.theta), math.sin(s.theta)
    cp, sp = math.cos(s.phi), math.sin(s.phi)
    return basis.origin + s.d * (ct * basis.n + st * (cp * basis.e1 + sp * basis.e2))


# ---------------------------------------------------------------------------
# gauge pose
# ---------------------------------------------------------------------------


def _rotation_aligning(u, v):
    """Proper rotation taking unit vector u to unit vector v."""
    c = float(np.dot(u, v))
    if c < -1.0 + 1e-12:
        # antipodal: rotate half a turn about any axis perpendicular to u
        axis = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
        axis = axis - np.dot(axis, u) * u
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    w = np.cross(u, v)
    K = np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
    )
    return np.eye(3) + K + K @ K / (1.0 + c)


def gauge_pose(X) -> np.ndarray:
    """Rigid motion of the conformer into the canonical pose.

    Atom 0 goes to the origin, atom 1 to the +x axis, and the first atom with
    an off-axis component into the z=0, y>0 half plane.  The result is an
    SE(3) invariant of the input (mirror images map to different poses).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = X - X[0]
    n = len(Y)
    if n < 2:
        return Y
    r1 = np.linalg.norm(Y[1])
    if r1 < DEGENERACY_EPS:
        raise CoincidentAtomsError("atoms 0 and 1 coincide")
    R1 = _rotation_aligning(Y[1] / r1, np.array([1.0, 0.0, 0.0]))
    Y = Y @ R1.T
    for k in range(2, n):
        rho = math.hypot(Y[k, 1], Y[k, 2])
        if rho > DEGENERACY_EPS:
            gamma = math.atan2(Y[k, 2], Y[k, 1])
            cg, sg = math.cos(gamma), math.sin(gamma)
            Rx = np.array([[1.0, 0.0, 0.0], [0.0, cg, sg], [0.0, -sg, cg]])
            Y = Y @ Rx.T
            break
    return Y


# ---------------------------------------------------------------------------
# whole-molecule encode / decode
# ---------------------------------------------------------------------------


def encode_molecule(
    mol: Molecule, order=None, strategy: FrameStrategy = FrameStrategy.TOPO2D
) -> list[SphericalCoord]:
    """Per-atom spherical coordinates under sequentially built local frames."""
    if mol.conformer is None:
        raise MoltokError("encoding requires a conformer")
    mol.require_connected()
    order = np.asarray(order) if order is not None else identity_order(mol.n_atoms)
    P = gauge_pose(mol.conformer.coords[order])
    adj = _line_adjacency(mol, order)
    out = [gauge_coord()]
    for i in range(1, mol.n_atoms):
        refs = select_frame(mol, order, i, strategy, coords=P[:i], _adj=adj)
        basis = frame_basis(P, refs, atom_index=i)
        out.append(extract_spherical(P[i], basis))
    return out


def decode_molecule(
    mol_graph: Molecule,
    order,
    coords: list[SphericalCoord],
    strategy: FrameStrategy = FrameStrategy.TOPO2D,
) -> Conformer:
    """Sequential placement; exact inverse of :func:`encode_molecule`.

    Returns the conformer in graph atom order (the inverse of ``order``).
    """
    n = mol_graph.n_atoms
    if len(coords) != n:
        raise MoltokError(f"got {len(coords)} coordinates for {n} atoms")
    order = np.asarray(order) if order is not None else identity_order(n)
    adj = _line_adjacency(mol_graph, order)
    Q = np.zeros((n, 3), dtype=np.float64)
    for i in range(1, n):
        refs = select_frame(mol_graph, order, i, strategy, coords=Q[:i], _adj=adj)
        try:
            basis = frame_basis(Q, refs, atom_index=i)
        except DegenerateFrameError as err:
            raise DegenerateFrameError(
                f"decode failed at sequence position {i}: {err}", atom_index=i
            ) from err
        Q[i] = place_atom(basis, coords[i])
    out = np.empty_like(Q)
    out[order] = Q
    return Conformer(out)
