"""Per-atom descriptors: generation (spherical) + understanding (environment).

The full descriptor of an atom is a fixed-order 14-vector

    [d, theta, |phi|, sign(phi), l1..l4, a12, a13, a14, a23, a24, a34]

where l1..l4 are distances to the four spatially nearest atoms (sorted
ascending) and the a's are the pairwise angles at the atom between those
neighbor directions, in lexicographic pair order.  Molecules with fewer than
five atoms pad the missing slots with sentinel values before normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentAtomsError, MoltokError
from .frames import FrameStrategy, SphericalCoord, encode_molecule
from .lineno import identity_order
from .molgraph import Molecule

DESCRIPTOR_DIM = 14

# feature layout
D_IDX = 0
THETA_IDX = 1
ABS_PHI_IDX = 2
SIGN_IDX = 3
NN_LENGTH_IDX = (4, 5, 6, 7)
NN_ANGLE_IDX = (8, 9, 10, 11, 12, 13)

LENGTH_FEATURES = (D_IDX,) + NN_LENGTH_IDX
ANGLE_FEATURES = (THETA_IDX, ABS_PHI_IDX) + NN_ANGLE_IDX

# regression targets for the quantizer: everything except the sign channel
REGRESSION_FEATURES = tuple(k for k in range(DESCRIPTOR_DIM) if k != SIGN_IDX)

SENTINEL_LENGTH = 10.0
SENTINEL_ANGLE = 0.0

LOG_LENGTH = "log_length"
UNIT_ANGLE = "unit_angle"
PASSTHROUGH_SIGN = "passthrough_sign"

TRANSFORMS = tuple(
    LOG_LENGTH
    if k in LENGTH_FEATURES
    else (PASSTHROUGH_SIGN if k == SIGN_IDX else UNIT_ANGLE)
    for k in range(DESCRIPTOR_DIM)
)


@dataclass(frozen=True)
class GenerationDescriptor:
    """(d, theta, |phi|, sign phi); the four values that place an atom."""

    d: float
    theta: float
    abs_phi: float
    sign_phi: float

    @classmethod
    def from_spherical(cls, s: SphericalCoord) -> "GenerationDescriptor":
        return cls(s.d, s.theta, abs(s.phi), -1.0 if s.phi < 0.0 else 1.0)

    def to_spherical(self) -> SphericalCoord:
        return SphericalCoord(self.d, self.theta, self.sign_phi * self.abs_phi)


@dataclass(frozen=True)
class UnderstandingDescriptor:
    """Distances to the four nearest atoms plus their pairwise angles."""

    lengths: tuple[float, float, float, float]
    angles: tuple[float, float, float, float, float, float]


def understanding_descriptor(mol: Molecule, i: int) -> UnderstandingDescriptor:
    """Local-environment descriptor of atom ``i`` (graph index)."""
    if mol.conformer is None:
        raise MoltokError("understanding descriptors require a conformer")
    X = mol.conformer.coords
    row = _understanding_matrix(X)[i]
    return UnderstandingDescriptor(tuple(row[:4]), tuple(row[4:]))


def _understanding_matrix(X: np.ndarray) -> np.ndarray:
    """(n, 10) matrix of understanding descriptors for all atoms at once."""
    n = len(X)
    delta = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(delta * delta, axis=-1))
    out = np.empty((n, 10), dtype=np.float64)
    order_cols = np.argsort(dist, axis=1, kind="stable")  # ties -> smaller index
    for i in range(n):
        neigh = [j for j in order_cols[i] if j != i][:4]
        if any(dist[i, j] < 1e-8 for j in neigh):
            raise CoincidentAtomsError(f"atoms coincide near atom {i}")
        lengths = [float(dist[i, j]) for j in neigh]
        while len(lengths) < 4:
            lengths.append(SENTINEL_LENGTH)
        angles = []
        for a in range(4):
            for b in range(a + 1, 4):
                if a < len(neigh) and b < len(neigh):
                    va = X[neigh[a]] - X[i]
                    vb = X[neigh[b]] - X[i]
                    c = float(np.dot(va, vb)) / (dist[i, neigh[a]] * dist[i, neigh[b]])
                    angles.append(math.acos(min(1.0, max(-1.0, c))))
                else:
                    angles.append(SENTINEL_ANGLE)
        out[i, :4] = lengths
        out[i, 4:] = angles
    return out


def build_descriptor(g: GenerationDescriptor, u: UnderstandingDescriptor) -> np.ndarray:
    """Concatenate into the fixed-order 14-vector."""
    v = np.array(
        [g.d, g.theta, g.abs_phi, g.sign_phi, *u.lengths, *u.angles],
        dtype=np.float64,
    )
    if not np.all(np.isfinite(v)):
        raise MoltokError("descriptor contains non-finite values")
    return v


def split_descriptor(v) -> tuple[GenerationDescriptor, UnderstandingDescriptor]:
    v = np.asarray(v, dtype=np.float64)
    g = GenerationDescriptor(float(v[0]), float(v[1]), float(v[2]), float(v[3]))
    u = UnderstandingDescriptor(tuple(v[4:8]), tuple(v[8:14]))
    return g, u


def molecule_descriptors(
    mol: Molecule, order=None, strategy: FrameStrategy = FrameStrategy.TOPO2D
) -> np.ndarray:
    """(n, 14) descriptor matrix in sequence order."""
    order = np.asarray(order) if order is not None else identity_order(mol.n_atoms)
    coords = encode_molecule(mol, order, strategy)
    U = _understanding_matrix(mol.conformer.coords)
    rows = []
    for pos, s in enumerate(coords):
        g = GenerationDescriptor.from_spherical(s)
        u_row = U[order[pos]]
        rows.append(
            np.concatenate(([g.d, g.theta, g.abs_phi, g.sign_phi], u_row))
        )
    return np.asarray(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormStats:
    """Per-feature normalization: log+standardize lengths, angles to [0, 1].

    ``mean``/``std`` apply to the log of length features only; angle and sign
    channels carry the fixed maps x/pi and identity.  Sentinel constants are
    recorded so that encode and decode agree on padding.
    """

    mean: np.ndarray
    std: np.ndarray
    transforms: tuple[str, ...] = TRANSFORMS
    sentinel_length: float = SENTINEL_LENGTH
    sentinel_angle: float = SENTINEL_ANGLE

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != (DESCRIPTOR_DIM,) or self.std.shape != (DESCRIPTOR_DIM,):
            raise MoltokError("normalization stats must have 14 entries")
        for k in LENGTH_FEATURES:
            if not self.std[k] > 0:
                raise MoltokError(f"normalized feature {k} has std <= 0")

    def normalize(self, V) -> np.ndarray:
        V = np.atleast_2d(np.asarray(V, dtype=np.float64))
        out = V.copy()
        lf = list(LENGTH_FEATURES)
        if np.any(V[:, lf] <= 0.0):
            raise MoltokError("length features must be positive before normalization")
        out[:, lf] = (np.log(V[:, lf]) - self.mean[lf]) / self.std[lf]
        af = list(ANGLE_FEATURES)
        out[:, af] = V[:, af] / math.pi
        return out

    def denormalize(self, V) -> np.ndarray:
        V = np.atleast_2d(np.asarray(V, dtype=np.float64))
        out = V.copy()
        lf = list(LENGTH_FEATURES)
        out[:, lf] = np.exp(V[:, lf] * self.std[lf] + self.mean[lf])
        af = list(ANGLE_FEATURES)
        out[:, af] = V[:, af] * math.pi
        return out


def _merge_moments(a, b):
    """Chan's parallel update; order-independent up to float roundoff."""
    n1, m1, s1 = a
    n2, m2, s2 = b
    if n1 == 0:
        return b
    if n2 == 0:
        return a
    n = n1 + n2
    delta = m2 - m1
    mean = m1 + delta * (n2 / n)
    s = s1 + s2 + delta * delta * (n1 * n2 / n)
    return n, mean, s


def fit_norm_stats(corpus, chunk: int = 4096) -> NormStats:
    """Fit mean/std of log-length channels by pairwise moment merging."""
    Z = np.atleast_2d(np.asarray(corpus, dtype=np.float64))
    if len(Z) < 2:
        raise MoltokError("need at least two descriptors to fit statistics")
    lf = list(LENGTH_FEATURES)
    if np.any(Z[:, lf] <= 0.0):
        raise MoltokError("length features must be positive")
    logs = np.log(Z[:, lf])
    parts = [
        (
            len(block),
            block.mean(axis=0),
            ((block - block.mean(axis=0)) ** 2).sum(axis=0),
        )
        for block in np.array_split(logs, max(1, math.ceil(len(logs) / chunk)))
        if len(block)
    ]
    while len(parts) > 1:
        merged = []
        for k in range(0, len(parts) - 1, 2):
            merged.append(_merge_moments(parts[k], parts[k + 1]))
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    n, mean_l, s_l = parts[0]
    std_l = np.sqrt(s_l / n)
    std_l = np.maximum(std_l, 1e-8)  # constant channels stay harmless
    mean = np.zeros(DESCRIPTOR_DIM)
    std = np.ones(DESCRIPTOR_DIM)
    mean[lf] = mean_l
    std[lf] = std_l
    return NormStats(mean, std)
