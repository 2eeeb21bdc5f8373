"""Synthetic organic-like molecules for benchmarks and tests.

Real training corpora are external; the studies in this repo run on generated
molecules instead: random acyclic CHONF graphs with idealized sp3 geometry,
random torsions, and a little Gaussian jitter.  The resulting descriptor
distribution is clustered the way equilibrium structures are (a handful of
bond-length modes, near-tetrahedral angles, continuous azimuths), which is
what the quantizer and the noise study care about.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .molgraph import Bond, BondOrder, Conformer, Molecule, atom

# idealized single-bond lengths in Angstrom by element pair
BOND_LENGTHS = {
    ("C", "C"): 1.54, ("C", "H"): 1.09, ("C", "N"): 1.47, ("C", "O"): 1.43,
    ("C", "F"): 1.35, ("H", "N"): 1.01, ("H", "O"): 0.96, ("N", "N"): 1.45,
    ("N", "O"): 1.40, ("O", "O"): 1.48, ("F", "N"): 1.36, ("F", "O"): 1.42,
    ("H", "H"): 0.74, ("F", "H"): 0.92, ("F", "F"): 1.41,
}

VALENCE = {"C": 4, "N": 3, "O": 2, "F": 1, "H": 1}

TETRAHEDRAL = math.acos(-1.0 / 3.0)


@dataclass(frozen=True)
class CorpusConfig:
    n_molecules: int
    seed: int = 0
    min_heavy: int = 3
    max_heavy: int = 7
    length_jitter: float = 0.01   # Angstrom, per bond
    angle_jitter: float = 0.02    # radians, per direction slot
    phase_jitter: float = 0.05    # radians around each staggered rotamer
    # probabilities of the three staggered wells (anti strongly favored, the
    # way equilibrium conformers are distributed)
    rotamer_probs: tuple[float, float, float] = (0.8, 0.1, 0.1)


def bond_length(a: str, b: str) -> float:
    return BOND_LENGTHS[tuple(sorted((a, b)))]


_FIRST_ELEMENTS = ("C", "N", "O")
_FIRST_WEIGHTS = (0.8, 0.1, 0.1)
_GROW_ELEMENTS = ("C", "N", "O", "F")
_GROW_WEIGHTS = (0.82, 0.08, 0.07, 0.03)


def _random_heavy_graph(rng: np.random.Generator, n_heavy: int):
    """Random tree over heavy atoms respecting valences; returns (elems, edges)."""
    first = rng.choice(_FIRST_ELEMENTS, p=_FIRST_WEIGHTS)
    elems = [str(first)]
    free = [VALENCE[first]]
    edges = []
    while len(elems) < n_heavy:
        open_sites = [k for k, f in enumerate(free) if f > 0]
        if not open_sites:
            break
        parent = int(open_sites[rng.integers(len(open_sites))])
        elem = str(rng.choice(_GROW_ELEMENTS, p=_GROW_WEIGHTS))
        idx = len(elems)
        elems.append(elem)
        free.append(VALENCE[elem] - 1)
        free[parent] -= 1
        edges.append((parent, idx))
    return elems, edges


def _tet_bank(d0, u, phase):
    """Slot 0 = d0, slots 1-3 at the tetrahedral angle, azimuths 120 deg apart
    starting at ``phase`` measured from ``u`` in the plane normal to d0."""
    w = np.cross(d0, u)
    bank = [d0]
    for k in range(3):
        az = phase + k * (2.0 * math.pi / 3.0)
        bank.append(
            math.cos(TETRAHEDRAL) * d0
            + math.sin(TETRAHEDRAL) * (math.cos(az) * u + math.sin(az) * w)
        )
    return bank


def _perp_component(r, d0):
    w = r - np.dot(r, d0) * d0
    n = np.linalg.norm(w)
    if n < 1e-6:
        fallback = np.array([0.0, 0.0, 1.0]) if abs(d0[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
        w = fallback - np.dot(fallback, d0) * d0
        n = np.linalg.norm(w)
    return w / n


def _place(rng, elems, edges, cfg: CorpusConfig):
    """Idealized coordinates with staggered rotamers.

    Each new atom occupies a slot of its parent's tetrahedral direction bank;
    its own bank is phased at 60 degrees (plus a rotamer pick and jitter)
    against one of the parent's substituent directions, so torsions populate
    the discrete anti/gauche wells that equilibrium structures favor.
    """
    n = len(elems)
    children = [[] for _ in range(n)]
    parent_of = {b: a for a, b in edges}
    for a, b in edges:
        children[a].append(b)
    pos = np.zeros((n, 3))
    banks: dict[int, list] = {}
    cursor: dict[int, int] = {}

    order = [0]
    queue = [0]
    while queue:
        v = queue.pop(0)
        for w in children[v]:
            order.append(w)
            queue.append(w)

    d0_root = np.array([1.0, 0.0, 0.0])
    u_root = np.array([0.0, 1.0, 0.0])
    # the root's phase only sets the global pose, which descriptors ignore
    banks[0] = _tet_bank(d0_root, u_root, rng.uniform(0.0, 2.0 * math.pi))
    cursor[0] = 0

    for v in order[1:]:
        p = parent_of[v]
        slot = cursor[p]
        cursor[p] += 1
        dirn = np.asarray(banks[p][slot % 4], dtype=np.float64).copy()
        dirn += rng.normal(0.0, cfg.angle_jitter, size=3)
        dirn /= np.linalg.norm(dirn)
        length = bond_length(elems[p], elems[v]) + rng.normal(0.0, cfg.length_jitter)
        pos[v] = pos[p] + length * dirn

        d0 = pos[p] - pos[v]
        d0 /= np.linalg.norm(d0)
        ref = banks[p][1 if slot % 4 == 0 else 0]
        u = _perp_component(np.asarray(ref, dtype=np.float64), d0)
        well = rng.choice(3, p=cfg.rotamer_probs)
        phase = (
            math.pi / 3.0
            + well * (2.0 * math.pi / 3.0)
            + rng.normal(0.0, cfg.phase_jitter)
        )
        banks[v] = _tet_bank(d0, u, phase)
        cursor[v] = 1  # slot 0 points back to the parent
    return pos, children, cursor, banks


def random_molecule(rng: np.random.Generator, cfg: CorpusConfig | None = None) -> Molecule:
    """One random tree molecule with explicit hydrogens and a 3D conformer."""
    cfg = cfg or CorpusConfig(n_molecules=1)
    n_heavy = int(rng.integers(cfg.min_heavy, cfg.max_heavy + 1))
    elems, edges = _random_heavy_graph(rng, n_heavy)
    pos, children, cursor, banks = _place(rng, elems, edges, cfg)

    # hydrogen fill on remaining valence slots
    all_elems = list(elems)
    all_pos = [p for p in pos]
    all_edges = list(edges)
    degree = [0] * len(elems)
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    for k, elem in enumerate(elems):
        for _ in range(VALENCE[elem] - degree[k]):
            bank = banks[k]
            slot = cursor[k]
            cursor[k] += 1
            dirn = np.asarray(bank[slot % 4], dtype=np.float64).copy()
            dirn += rng.normal(0.0, cfg.angle_jitter, size=3)
            dirn /= np.linalg.norm(dirn)
            length = bond_length(elem, "H") + rng.normal(0.0, cfg.length_jitter)
            h_idx = len(all_elems)
            all_elems.append("H")
            all_pos.append(all_pos[k] + length * dirn)
            all_edges.append((k, h_idx))

    atoms = tuple(atom(e) for e in all_elems)
    bonds = tuple(Bond(a, b, BondOrder.SINGLE) for a, b in all_edges)
    return Molecule(atoms, bonds, Conformer(np.asarray(all_pos)))


def _has_clash(mol: Molecule, min_dist: float = 1.3) -> bool:
    X = mol.conformer.coords
    bonded = {(b.i, b.j) for b in mol.bonds}
    n = len(X)
    delta = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(delta * delta, axis=-1))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in bonded and dist[i, j] < min_dist:
                return True
    return False


def make_corpus(n_molecules: int, seed: int = 0, **kwargs) -> list[Molecule]:
    """Deterministic list of clash-free random molecules."""
    cfg = CorpusConfig(n_molecules=n_molecules, seed=seed, **kwargs)
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n_molecules:
        mol = random_molecule(rng, cfg)
        if not _has_clash(mol):
            out.append(mol)
    return out


def corpus_to_xyz(mols) -> str:
    from .molgraph import write_xyz

    return "".join(write_xyz(m, comment=f"mol {k}") for k, m in enumerate(mols))
