"""Shared test utilities: independent oracles and small builders.

The oracles here deliberately avoid the formulations used by the
package: the dihedral oracle works by projecting onto the plane normal
to the central bond, the superposition oracle minimizes numerically
over rotation vectors instead of using an SVD.
"""

from __future__ import annotations

import math

import numpy as np

from torsionmine.geometry import BackboneModel, build_backbone
from torsionmine.pdbfile import ChainModel, Residue
from torsionmine.store import StoredChain


def oracle_torsion(p1, p2, p3, p4) -> float:
    """Dihedral via perpendicular projections onto the central axis.

    Both bond vectors are stripped of their component along p2->p3;
    the signed angle between the remainders is the dihedral.  Sign
    convention fixed by the package's documented examples.
    """
    p1, p2, p3, p4 = (np.asarray(p, dtype=float) for p in (p1, p2, p3, p4))
    axis = p3 - p2
    axis = axis / np.linalg.norm(axis)
    v = (p1 - p2) - np.dot(p1 - p2, axis) * axis
    w = (p4 - p3) - np.dot(p4 - p3, axis) * axis
    x = float(np.dot(v, w))
    y = float(np.dot(np.cross(w, v), axis))
    angle = math.degrees(math.atan2(y, x))
    if angle <= -180.0:
        angle += 360.0
    return angle


def oracle_min_rmsd(a, b, restarts: int = 12, seed: int = 0) -> float:
    """Best superposition RMSD by direct minimization over rotations."""
    from scipy.optimize import minimize
    from scipy.spatial.transform import Rotation

    pa = np.asarray(a, float)
    pb = np.asarray(b, float)
    pa = pa - pa.mean(axis=0)
    pb = pb - pb.mean(axis=0)

    def cost(rotvec):
        rot = Rotation.from_rotvec(rotvec).as_matrix()
        d = pa @ rot.T - pb
        return float((d * d).sum() / len(pa))

    rng = np.random.default_rng(seed)
    best = math.inf
    starts = [np.zeros(3)] + [rng.uniform(-math.pi, math.pi, 3) for _ in range(restarts)]
    for start in starts:
        res = minimize(cost, start, method="BFGS",
                       options={"gtol": 1e-12, "maxiter": 500})
        best = min(best, res.fun)
    return math.sqrt(best)


def circular_delta(a: float, b: float) -> float:
    """Absolute shortest angular distance in degrees."""
    d = math.fmod(a - b, 360.0)
    if d <= -180.0:
        d += 360.0
    elif d > 180.0:
        d -= 360.0
    return abs(d)


def chain_from_backbone(model: BackboneModel, sequence: str | None = None,
                        structure_id: str = "TEST", chain: str = "A",
                        model_no: int = 1) -> ChainModel:
    """Wrap built coordinates as a parsed-chain object, full precision."""
    n = len(model.residues)
    seq = sequence or "A" * n
    residues = []
    for i, res in enumerate(model.residues):
        residues.append(Residue(
            res_seq=i + 1, insertion_code=None,
            res_name="ALA", code=seq[i],
            atoms={"N": tuple(res.n), "CA": tuple(res.ca), "C": tuple(res.c)},
        ))
    return ChainModel(structure_id=structure_id, model=model_no,
                      chain=chain, residues=residues)


def chain_from_angles(angles, sequence: str | None = None, **kwargs) -> ChainModel:
    return chain_from_backbone(build_backbone(angles), sequence, **kwargs)


def stored_from_chain(cm: ChainModel) -> StoredChain:
    from torsionmine.geometry import extract_torsions

    rows = extract_torsions(cm)
    return StoredChain(
        structure_id=cm.structure_id, chain=cm.chain, model=cm.model,
        sequence=cm.sequence,
        phi=np.array([r.phi for r in rows], dtype=np.float32),
        psi=np.array([r.psi for r in rows], dtype=np.float32),
        omega=np.array([r.omega for r in rows], dtype=np.float32),
    )


def stored_sequence_only(structure_id: str, chain: str, model: int,
                         sequence: str) -> StoredChain:
    """A stored chain whose angles are all zero: good enough for k-mer tests."""
    zeros = np.zeros(len(sequence), dtype=np.float32)
    return StoredChain(structure_id=structure_id, chain=chain, model=model,
                       sequence=sequence, phi=zeros.copy(), psi=zeros.copy(),
                       omega=zeros.copy())


def helix_angles(n: int, phi: float = -57.0, psi: float = -47.0):
    rows = [(math.nan, psi, math.nan)]
    rows += [(phi, psi, 180.0) for _ in range(n - 2)]
    rows.append((phi, math.nan, 180.0))
    return rows


def random_angle_rows(rng: np.random.Generator, n: int):
    """Uniform angles on (-180, 180] for every slot."""
    vals = 180.0 - rng.uniform(0.0, 360.0, size=(n, 3))
    return [tuple(row) for row in vals]


def oracle_density(obs, bandwidth: float, resolution: float):
    """Direct per-cell evaluation of the wrapped-Gaussian product KDE.

    Deliberately written as plain loops over cells and observations so it
    shares no code path with the estimator under test.  Returns a nested
    list normalized to unit torus integral (radian measure).
    """
    n = round(360.0 / resolution)
    centers = [-180.0 + (i + 0.5) * resolution for i in range(n)]

    def kernel(delta: float) -> float:
        acc = 0.0
        for turn in (-2, -1, 0, 1, 2):
            z = (delta + 360.0 * turn) / bandwidth
            acc += math.exp(-0.5 * z * z)
        return acc / (bandwidth * math.sqrt(2.0 * math.pi))

    values = [[0.0] * n for _ in range(n)]
    for phi, psi in obs:
        kphi = [kernel(circular_delta(phi, c)) for c in centers]
        kpsi = [kernel(circular_delta(psi, c)) for c in centers]
        for i in range(n):
            row = values[i]
            kp = kphi[i]
            for j in range(n):
                row[j] += kp * kpsi[j]
    cell_area = (resolution * math.pi / 180.0) ** 2
    mass = sum(sum(row) for row in values) * cell_area
    return [[v / mass for v in row] for row in values]


def oracle_grid_argmax(values):
    """Exhaustive scan; ties resolved to the smallest index pair."""
    best = (0, 0)
    for i, row in enumerate(values):
        for j, v in enumerate(row):
            if v > values[best[0]][best[1]]:
                best = (i, j)
    return best
