"""Torsion-angle mathematics for protein backbones.

Four-point signed dihedrals, phi/psi/omega extraction along a chain,
sequential backbone construction from internal coordinates, and
optimal-superposition RMSD.  All angles are degrees in (-180, 180];
undefined angles are represented as NaN and never fabricated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, LengthMismatch, TooFewPoints, UndefinedAngle
from .pdbfile import (
    BACKBONE_ATOMS,
    CHAIN_BREAK_CN_DISTANCE,
    AtomRecord,
    ChainModel,
    format_atom_line,
)

_COLLINEAR_TOL = 1e-9

ONE_TO_THREE = {
    "A": "ALA", "R": "ARG", "N": "ASN", "D": "ASP", "C": "CYS",
    "Q": "GLN", "E": "GLU", "G": "GLY", "H": "HIS", "I": "ILE",
    "L": "LEU", "K": "LYS", "M": "MET", "F": "PHE", "P": "PRO",
    "S": "SER", "T": "THR", "W": "TRP", "Y": "TYR", "V": "VAL",
    "X": "UNK",
}


def is_defined(angle: float) -> bool:
    """True when an angle value is a real number rather than the NaN sentinel."""
    return not math.isnan(angle)


def wrap_degrees(angle: float) -> float:
    """Wrap any angle into (-180, 180], with -180 reported as +180."""
    wrapped = math.fmod(angle, 360.0)
    if wrapped <= -180.0:
        wrapped += 360.0
    elif wrapped > 180.0:
        wrapped -= 360.0
    return wrapped


def angle_difference(a: float, b: float) -> float:
    """Shortest signed angular difference a - b on the circle, degrees."""
    return wrap_degrees(a - b)


def _sub(p, q):
    return (p[0] - q[0], p[1] - q[1], p[2] - q[2])


def _cross(u, v):
    return (
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    )


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _norm(u):
    return math.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2])


def torsion(p1, p2, p3, p4) -> float:
    """Signed dihedral of four points, degrees in (-180, 180].

    The angle is measured about the p2-p3 axis between the plane of
    (p1, p2, p3) and the plane of (p2, p3, p4), by the atan2 convention;
    -180 is reported as +180.  Raises DegenerateGeometry when p2 and p3
    coincide or either point triple is collinear.
    """
    b1 = _sub(p2, p1)
    b2 = _sub(p3, p2)
    b3 = _sub(p4, p3)
    nb2 = _norm(b2)
    if nb2 < _COLLINEAR_TOL:
        raise DegenerateGeometry("central points coincide")
    n1 = _cross(b1, b2)
    n2 = _cross(b2, b3)
    if _norm(n1) < _COLLINEAR_TOL or _norm(n2) < _COLLINEAR_TOL:
        raise DegenerateGeometry("collinear points give no dihedral plane")
    b2u = (b2[0] / nb2, b2[1] / nb2, b2[2] / nb2)
    m1 = _cross(n1, b2u)
    angle = math.degrees(math.atan2(_dot(m1, n2), _dot(n1, n2)))
    if angle <= -180.0:
        angle += 360.0
    return angle


@dataclass
class ResidueTorsion:
    """Backbone torsions of one residue plus the identifiers of where it came from."""

    structure_id: str
    chain: str
    model: int
    position_in_chain: int
    one_letter_code: str
    phi: float
    psi: float
    omega: float


def _distance(p, q) -> float:
    return _norm(_sub(p, q))


def _bonded(c_prev, n_next) -> bool:
    if c_prev is None or n_next is None:
        return False
    return _distance(c_prev, n_next) <= CHAIN_BREAK_CN_DISTANCE


def _safe_torsion(*points) -> float:
    if any(p is None for p in points):
        return math.nan
    try:
        return torsion(*points)
    except DegenerateGeometry:
        return math.nan


def torsion_rows(atom_triples, codes) -> list[tuple[float, float, float]]:
    """Compute (phi, psi, omega) for each residue of a backbone.

    atom_triples holds one (N, CA, C) tuple per residue; missing atoms
    are None.  An angle is NaN at the termini, where an atom is missing,
    where the peptide bond it crosses is broken (C-N farther than the
    chain-break threshold), or where it crosses an X residue.
    """
    n = len(atom_triples)
    rows: list[tuple[float, float, float]] = []
    for i in range(n):
        ni, cai, ci = atom_triples[i]
        phi = psi = omega = math.nan
        if codes[i] != "X":
            if i > 0 and codes[i - 1] != "X":
                _, ca_prev, c_prev = atom_triples[i - 1]
                if _bonded(c_prev, ni):
                    phi = _safe_torsion(c_prev, ni, cai, ci)
                    omega = _safe_torsion(ca_prev, c_prev, ni, cai)
            if i < n - 1 and codes[i + 1] != "X":
                n_next = atom_triples[i + 1][0]
                if _bonded(ci, n_next):
                    psi = _safe_torsion(ni, cai, ci, n_next)
        rows.append((phi, psi, omega))
    return rows


def extract_torsions(chain: ChainModel) -> list[ResidueTorsion]:
    """Compute phi/psi/omega for every residue of a parsed chain.

    Never raises on missing data: any angle whose atoms are absent,
    whose peptide bond is broken, or which crosses an X residue comes
    back as NaN.
    """
    triples = [
        tuple(res.atoms.get(name) for name in BACKBONE_ATOMS)
        for res in chain.residues
    ]
    codes = [res.code for res in chain.residues]
    rows = torsion_rows(triples, codes)
    return [
        ResidueTorsion(
            structure_id=chain.structure_id,
            chain=chain.chain,
            model=chain.model,
            position_in_chain=i,
            one_letter_code=codes[i],
            phi=row[0], psi=row[1], omega=row[2],
        )
        for i, row in enumerate(rows)
    ]


@dataclass(frozen=True)
class BackboneGeometry:
    """Fixed internal geometry used when placing backbone atoms."""

    bond_n_ca: float = 1.458
    bond_ca_c: float = 1.525
    bond_c_n: float = 1.329
    angle_n_ca_c: float = 111.2
    angle_ca_c_n: float = 116.2
    angle_c_n_ca: float = 121.7


IDEAL_GEOMETRY = BackboneGeometry()


def place_atom(a, b, c, bond_length: float, bond_angle: float, torsion_angle: float):
    """Place a new atom from three reference positions.

    The new atom sits bond_length from c, forming the given b-c-new bond
    angle (degrees), with the given a-b-c-new dihedral (degrees, same
    sign convention as torsion()).
    """
    theta = math.radians(bond_angle)
    chi = math.radians(torsion_angle)
    ab = _sub(b, a)
    bc = _sub(c, b)
    nbc = _norm(bc)
    if nbc < _COLLINEAR_TOL:
        raise DegenerateGeometry("reference points b and c coincide")
    bcu = (bc[0] / nbc, bc[1] / nbc, bc[2] / nbc)
    n = _cross(ab, bcu)
    nn = _norm(n)
    if nn < _COLLINEAR_TOL:
        raise DegenerateGeometry("collinear reference points")
    nu = (n[0] / nn, n[1] / nn, n[2] / nn)
    mu = _cross(nu, bcu)
    d_bc = -bond_length * math.cos(theta)
    d_m = bond_length * math.sin(theta) * math.cos(chi)
    d_n = -bond_length * math.sin(theta) * math.sin(chi)
    return (
        c[0] + d_bc * bcu[0] + d_m * mu[0] + d_n * nu[0],
        c[1] + d_bc * bcu[1] + d_m * mu[1] + d_n * nu[1],
        c[2] + d_bc * bcu[2] + d_m * mu[2] + d_n * nu[2],
    )


@dataclass
class BackboneResidue:
    """N, CA and C positions of one constructed residue."""

    n: tuple[float, float, float]
    ca: tuple[float, float, float]
    c: tuple[float, float, float]

    def atom(self, name: str):
        return {"N": self.n, "CA": self.ca, "C": self.c}[name]


@dataclass
class BackboneModel:
    """An ordered backbone built from torsion angles."""

    residues: list[BackboneResidue]

    def torsions(self) -> list[tuple[float, float, float]]:
        triples = [(r.n, r.ca, r.c) for r in self.residues]
        codes = [""] * len(self.residues)
        return torsion_rows(triples, codes)

    def coordinates(self, atom_names=BACKBONE_ATOMS) -> list[tuple[float, float, float]]:
        return [r.atom(name) for r in self.residues for name in atom_names]

    def to_pdb(self, sequence: str | None = None, chain: str = "A",
               structure_id: str = "MODL") -> str:
        """Serialize to PDB ATOM lines (occupancy 1.00, B-factor 0.00)."""
        lines = []
        serial = 1
        for i, res in enumerate(self.residues):
            code = sequence[i] if sequence and i < len(sequence) else "A"
            res_name = ONE_TO_THREE.get(code.upper(), "UNK")
            for name in BACKBONE_ATOMS:
                rec = AtomRecord(
                    structure_id=structure_id, model=1, chain=chain,
                    res_seq=i + 1, insertion_code=None, res_name=res_name,
                    atom_name=name, alt_loc=None, occupancy=1.0,
                    position=res.atom(name), het=False,
                )
                lines.append(format_atom_line(rec, serial=serial))
                serial += 1
        lines.append("TER".ljust(80))
        lines.append("END".ljust(80))
        return "\n".join(lines) + "\n"


def build_backbone(angles, geometry: BackboneGeometry = IDEAL_GEOMETRY) -> BackboneModel:
    """Build backbone coordinates from per-residue (phi, psi, omega).

    Atoms are placed sequentially in a natural-extension reference
    frame with fixed bond lengths and angles; the first three atoms
    seed a canonical frame (N at the origin, CA on +x, C in the
    xy-plane with positive y).  The first phi, first omega and last psi
    are never used and may be NaN; any other NaN raises UndefinedAngle.
    """
    angles = [(float(p), float(s), float(o)) for p, s, o in angles]
    n = len(angles)
    if n == 0:
        raise ValueError("cannot build an empty backbone")
    for i, (phi, psi, omega) in enumerate(angles):
        if i > 0 and (math.isnan(phi) or math.isnan(omega)):
            raise UndefinedAngle(f"residue {i}: interior phi/omega undefined")
        if i < n - 1 and math.isnan(psi):
            raise UndefinedAngle(f"residue {i}: interior psi undefined")

    g = geometry
    alpha = math.radians(g.angle_n_ca_c)
    n0 = (0.0, 0.0, 0.0)
    ca0 = (g.bond_n_ca, 0.0, 0.0)
    c0 = (
        ca0[0] + g.bond_ca_c * -math.cos(alpha),
        g.bond_ca_c * math.sin(alpha),
        0.0,
    )
    residues = [BackboneResidue(n0, ca0, c0)]
    for i in range(1, n):
        prev = residues[-1]
        psi_prev = angles[i - 1][1]
        phi_i, _, omega_i = angles[i]
        n_i = place_atom(prev.n, prev.ca, prev.c, g.bond_c_n, g.angle_ca_c_n, psi_prev)
        ca_i = place_atom(prev.ca, prev.c, n_i, g.bond_n_ca, g.angle_c_n_ca, omega_i)
        c_i = place_atom(prev.c, n_i, ca_i, g.bond_ca_c, g.angle_n_ca_c, phi_i)
        residues.append(BackboneResidue(n_i, ca_i, c_i))
    return BackboneModel(residues)


def kabsch_rmsd(a, b) -> float:
    """Minimal RMSD of point list a onto b over rotations and translations.

    Uses centroid subtraction and the optimal rotation from the SVD of
    the cross-covariance, with the determinant sign corrected so that
    reflections are excluded.
    """
    pa = np.asarray(a, dtype=np.float64)
    pb = np.asarray(b, dtype=np.float64)
    if pa.shape != pb.shape:
        raise LengthMismatch(f"point counts differ: {pa.shape[0]} vs {pb.shape[0]}")
    if pa.ndim != 2 or pa.shape[1] != 3:
        raise ValueError("expected (n, 3) coordinate arrays")
    if pa.shape[0] < 3:
        raise TooFewPoints("RMSD needs at least 3 point pairs")
    ca = pa - pa.mean(axis=0)
    cb = pb - pb.mean(axis=0)
    cov = ca.T @ cb
    u, _, vt = np.linalg.svd(cov)
    sign = np.sign(np.linalg.det(vt.T @ u.T))
    correction = np.diag([1.0, 1.0, sign if sign != 0 else 1.0])
    rot = vt.T @ correction @ u.T
    diff = ca @ rot.T - cb
    return float(np.sqrt((diff * diff).sum() / pa.shape[0]))
