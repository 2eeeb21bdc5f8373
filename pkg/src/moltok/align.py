"""Optimal rigid superposition (Kabsch) and RMSD helpers."""

from __future__ import annotations

import numpy as np


def kabsch_rotation(P, Q):
    """Proper rotation R minimizing ||R P_centered - Q_centered||."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    H = P.T @ Q
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    return Vt.T @ D @ U.T


def rmsd_raw(P, Q) -> float:
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    return float(np.sqrt(np.mean(np.sum((P - Q) ** 2, axis=1))))


def rmsd_aligned(P, Q) -> float:
    """RMSD after optimal translation + proper rotation of P onto Q."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    Pc = P - P.mean(axis=0)
    Qc = Q - Q.mean(axis=0)
    R = kabsch_rotation(Pc, Qc)
    return rmsd_raw(Pc @ R.T, Qc)
