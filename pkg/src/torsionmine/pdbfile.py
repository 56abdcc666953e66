"""Reading and writing the legacy fixed-column PDB coordinate format.

Parsing turns raw file bytes into per-chain residue lists with backbone
atom positions, plus experiment metadata and a report of every entity
that was skipped or repaired along the way.  Only the records needed for
torsion mining are consumed: ATOM, HETATM, MODEL, ENDMDL, TER, EXPDTA
and HEADER.  Everything else is ignored.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import EmptyStructure, MalformedCoordinate, UnreadableFile

log = logging.getLogger(__name__)

THREE_TO_ONE = {
    "ALA": "A", "ARG": "R", "ASN": "N", "ASP": "D", "CYS": "C",
    "GLN": "Q", "GLU": "E", "GLY": "G", "HIS": "H", "ILE": "I",
    "LEU": "L", "LYS": "K", "MET": "M", "PHE": "F", "PRO": "P",
    "SER": "S", "THR": "T", "TRP": "W", "TYR": "Y", "VAL": "V",
}

STANDARD_CODES = frozenset(THREE_TO_ONE.values())

# Residue names that can never be treated as amino acids: nucleotides,
# water and a few common solvent/ion names seen in coordinate files.
NON_AMINO_ACID_NAMES = frozenset({
    "A", "C", "G", "U", "I", "N",
    "DA", "DC", "DG", "DT", "DI", "DU",
    "HOH", "WAT", "DOD", "H2O", "SOL",
    "NA", "CL", "K", "MG", "CA", "ZN", "MN", "FE", "CU", "SO4", "PO4",
    "GOL", "EDO", "ACT", "PEG",
})

BACKBONE_ATOMS = ("N", "CA", "C")

# A peptide bond is ~1.33 A; anything past this C-N distance is a gap.
CHAIN_BREAK_CN_DISTANCE = 2.5


class Method(Enum):
    """How a deposited structure was determined."""

    XRAY = "XRAY"
    NMR = "NMR"
    EM = "EM"
    OTHER = "OTHER"


def three_to_one(res_name: str) -> str:
    """Map a 3-letter residue name to its 1-letter code, or X if unknown."""
    return THREE_TO_ONE.get(res_name.strip().upper(), "X")


@dataclass(frozen=True)
class AtomRecord:
    """One parsed ATOM/HETATM line."""

    structure_id: str
    model: int
    chain: str
    res_seq: int
    insertion_code: str | None
    res_name: str
    atom_name: str
    alt_loc: str | None
    occupancy: float
    position: tuple[float, float, float]
    het: bool = False


@dataclass(frozen=True)
class ExperimentMeta:
    """Determination method and (optional) resolution of one structure."""

    structure_id: str
    method: Method = Method.OTHER
    resolution: float | None = None


@dataclass
class Residue:
    """One residue of a chain with whatever backbone atoms it carries."""

    res_seq: int
    insertion_code: str | None
    res_name: str
    code: str  # 1-letter code, X for anything nonstandard
    atoms: dict[str, tuple[float, float, float]]
    het: bool = False


@dataclass
class ChainModel:
    """All kept residues of one (model, chain) pair, in file order."""

    structure_id: str
    model: int
    chain: str
    residues: list[Residue]

    @property
    def sequence(self) -> str:
        return "".join(r.code for r in self.residues)


@dataclass(frozen=True)
class Anomaly:
    """One skipped or repaired entity, with a machine-readable reason."""

    model: int
    chain: str
    res_seq: int
    insertion_code: str | None
    res_name: str
    record_type: str  # "ATOM" or "HETATM"
    reason: str
    dropped: bool


@dataclass
class AnomalyReport:
    """Everything the parser skipped or repaired in one file."""

    entries: list[Anomaly] = field(default_factory=list)
    malformed_lines: int = 0

    def add(self, **kw) -> None:
        self.entries.append(Anomaly(**kw))

    def dropped(self) -> list[Anomaly]:
        return [e for e in self.entries if e.dropped]

    def __len__(self) -> int:
        return len(self.entries)


def _pad(line: str) -> str:
    """Logically pad a record to 80 columns so fixed slices always exist."""
    return line.ljust(80) if len(line) < 80 else line


def _parse_coord(text: str, what: str, line: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedCoordinate(f"bad {what} field {text.strip()!r} in line: {line.rstrip()!r}")
    if not math.isfinite(value):
        raise MalformedCoordinate(f"non-finite {what} in line: {line.rstrip()!r}")
    return value


def parse_atom_line(line: str, structure_id: str = "", model: int = 1) -> AtomRecord:
    """Parse one 80-column ATOM/HETATM record.

    Fields are read from the fixed columns of the legacy format; the
    caller supplies structure identity and model number.  Raises
    MalformedCoordinate when a numeric field cannot be read.
    """
    line = _pad(line)
    record = line[0:6]
    atom_name = line[12:16].strip()
    if not atom_name:
        raise MalformedCoordinate(f"empty atom name in line: {line.rstrip()!r}")
    alt_loc = line[16].strip() or None
    res_name = line[17:20].strip()
    chain = line[21]
    try:
        res_seq = int(line[22:26])
    except ValueError:
        raise MalformedCoordinate(f"bad residue number {line[22:26].strip()!r} in line: {line.rstrip()!r}")
    icode = line[26].strip() or None
    x = _parse_coord(line[30:38], "x", line)
    y = _parse_coord(line[38:46], "y", line)
    z = _parse_coord(line[46:54], "z", line)
    occ_text = line[54:60].strip()
    try:
        occupancy = float(occ_text) if occ_text else 1.0
    except ValueError:
        occupancy = 1.0
    occupancy = min(max(occupancy, 0.0), 1.0)
    return AtomRecord(
        structure_id=structure_id,
        model=model,
        chain=chain,
        res_seq=res_seq,
        insertion_code=icode,
        res_name=res_name,
        atom_name=atom_name,
        alt_loc=alt_loc,
        occupancy=occupancy,
        position=(x, y, z),
        het=record.startswith("HETATM"),
    )


def format_atom_line(rec: AtomRecord, serial: int = 1, bfactor: float = 0.0) -> str:
    """Serialize an AtomRecord back into the 80-column layout.

    Inverse of parse_atom_line: re-parsing the output yields an equal
    record (serial and B-factor are not part of the record).
    """
    record = "HETATM" if rec.het else "ATOM  "
    name = rec.atom_name
    name_field = name[:4] if len(name) >= 4 else " " + name.ljust(3)
    element = next((c for c in name if c.isalpha()), " ")
    x, y, z = rec.position
    return (
        f"{record}{serial:>5} {name_field}{rec.alt_loc or ' '}{rec.res_name:>3} "
        f"{rec.chain}{rec.res_seq:>4}{rec.insertion_code or ' '}   "
        f"{x:8.3f}{y:8.3f}{z:8.3f}{rec.occupancy:6.2f}{bfactor:6.2f}"
        f"          {element:>2}  "
    )


def resolve_altloc(records: list[AtomRecord]) -> list[AtomRecord]:
    """Collapse alternate locations within one residue.

    For each atom name with several variants keep the highest occupancy;
    ties go to the lexicographically smallest altLoc, and a blank altLoc
    always wins.
    """
    by_name: dict[str, list[AtomRecord]] = {}
    order: list[str] = []
    for rec in records:
        if rec.atom_name not in by_name:
            order.append(rec.atom_name)
        by_name.setdefault(rec.atom_name, []).append(rec)

    def rank(rec: AtomRecord) -> tuple:
        blank = rec.alt_loc is None
        return (0 if blank else 1, -rec.occupancy, rec.alt_loc or "")

    return [min(by_name[name], key=rank) for name in order]


def _method_from_expdta(text: str) -> Method:
    text = text.upper()
    if "X-RAY" in text:
        return Method.XRAY
    if "NMR" in text:
        return Method.NMR
    if "ELECTRON MICROSCOPY" in text:
        return Method.EM
    return Method.OTHER


class _Group:
    """Atoms of one (res_seq, icode, res_name) within a model/chain."""

    __slots__ = ("res_seq", "icode", "res_name", "atoms", "malformed", "has_atom_record")

    def __init__(self, res_seq, icode, res_name):
        self.res_seq = res_seq
        self.icode = icode
        self.res_name = res_name
        self.atoms: list[AtomRecord] = []
        self.malformed = 0
        self.has_atom_record = False

    @property
    def record_type(self) -> str:
        return "ATOM" if self.has_atom_record else "HETATM"


def parse_pdb(data: bytes | str, default_id: str = "XXXX"):
    """Parse a PDB file into chains, experiment metadata and anomalies.

    Returns (list of ChainModel, ExperimentMeta, AnomalyReport).  One
    ChainModel is produced per (model, chain) pair that contains at
    least one standard amino-acid residue.  Unusable residues never
    abort the parse; they are skipped and reported.

    Raises UnreadableFile for binary input and EmptyStructure when the
    file carries no standard amino-acid residues at all.
    """
    if isinstance(data, bytes):
        if b"\x00" in data:
            raise UnreadableFile("input contains NUL bytes; not a text PDB file")
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            text = data.decode("latin-1")
    else:
        text = data

    structure_id = default_id.upper()
    expdta_parts: list[str] = []
    model = 1
    report = AnomalyReport()
    # (model, chain) -> {(res_seq, icode, res_name) -> _Group}, insertion ordered
    groups: dict[tuple[int, str], dict[tuple, _Group]] = {}

    for raw in text.splitlines():
        if not raw.strip():
            continue
        line = _pad(raw)
        record = line[0:6]
        if record in ("ATOM  ", "HETATM"):
            chain_key = (model, line[21])
            res_key = (line[22:26].strip(), line[26].strip(), line[17:20].strip())
            chain_groups = groups.setdefault(chain_key, {})
            if res_key not in chain_groups:
                try:
                    seq = int(res_key[0])
                except ValueError:
                    seq = 0
                chain_groups[res_key] = _Group(seq, res_key[1] or None, res_key[2])
            group = chain_groups[res_key]
            if record == "ATOM  ":
                group.has_atom_record = True
            try:
                rec = parse_atom_line(line, structure_id=structure_id, model=model)
            except MalformedCoordinate as exc:
                log.warning("%s: skipped line: %s", structure_id, exc)
                group.malformed += 1
                report.malformed_lines += 1
                continue
            group.atoms.append(rec)
        elif record == "MODEL ":
            try:
                model = int(line[10:14])
            except ValueError:
                parts = line.split()
                model = int(parts[1]) if len(parts) > 1 and parts[1].isdigit() else model + 1
        elif record == "ENDMDL":
            pass
        elif record == "TER   " or record.startswith("TER"):
            pass
        elif record == "EXPDTA":
            expdta_parts.append(line[10:].strip())
        elif record == "HEADER":
            accession = line[62:66].strip()
            if len(accession) == 4 and accession.isalnum():
                structure_id = accession.upper()

    chains: list[ChainModel] = []
    for (chain_model, chain_id), chain_groups in groups.items():
        residues: list[Residue] = []
        seen_numbers: set[tuple] = set()
        for group in chain_groups.values():
            entity = dict(
                model=chain_model, chain=chain_id, res_seq=group.res_seq,
                insertion_code=group.icode, res_name=group.res_name,
                record_type=group.record_type,
            )
            if not group.atoms:
                report.add(**entity, reason="malformed_coordinate", dropped=True)
                continue
            res_name = group.res_name.upper()
            code = three_to_one(res_name)
            standard = code in STANDARD_CODES
            if res_name in NON_AMINO_ACID_NAMES:
                report.add(**entity, reason="non_amino_acid_residue", dropped=True)
                continue
            is_het = group.record_type == "HETATM"
            if is_het and not standard:
                report.add(**entity, reason="hetatm_non_standard", dropped=True)
                continue
            if is_het and standard and not residues:
                report.add(**entity, reason="hetatm_orphan", dropped=True)
                continue
            atoms = resolve_altloc(group.atoms)
            if len(atoms) < len(group.atoms):
                report.add(**entity, reason="altloc_resolved", dropped=False)
            backbone = {a.atom_name: a.position for a in atoms if a.atom_name in BACKBONE_ATOMS}
            if not standard:
                # Nonstandard amino acids hold their sequence position as X
                # but only when they look like residues at all.
                if all(name in backbone for name in BACKBONE_ATOMS):
                    report.add(**entity, reason="nonstandard_residue", dropped=False)
                    code = "X"
                else:
                    report.add(**entity, reason="non_amino_acid_residue", dropped=True)
                    continue
            number = (group.res_seq, group.icode)
            if number in seen_numbers:
                report.add(**entity, reason="duplicate_residue_number", dropped=True)
                continue
            seen_numbers.add(number)
            residues.append(Residue(
                res_seq=group.res_seq, insertion_code=group.icode,
                res_name=res_name, code=code, atoms=backbone, het=is_het,
            ))
        if any(r.code in STANDARD_CODES for r in residues):
            chains.append(ChainModel(structure_id, chain_model, chain_id, residues))
        else:
            for r in residues:
                report.add(
                    model=chain_model, chain=chain_id, res_seq=r.res_seq,
                    insertion_code=r.insertion_code, res_name=r.res_name,
                    record_type="HETATM" if r.het else "ATOM",
                    reason="chain_without_standard_residues", dropped=True,
                )

    if not chains:
        raise EmptyStructure(f"{structure_id}: no standard amino-acid ATOM records")

    meta = ExperimentMeta(
        structure_id=structure_id,
        method=_method_from_expdta(" ".join(expdta_parts)) if expdta_parts else Method.OTHER,
        resolution=None,
    )
    return chains, meta, report


def parse_pdb_file(path, default_id: str | None = None):
    """Parse a PDB file from disk; accession falls back to the file stem.

    Gzip-compressed files (by magic bytes, regardless of extension) are
    decompressed transparently.
    """
    from pathlib import Path

    path = Path(path)
    if default_id is None:
        stem = path.name
        for suffix in (".gz", ".pdb", ".ent"):
            if stem.lower().endswith(suffix):
                stem = stem[: -len(suffix)]
        default_id = stem.upper()
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(str(exc))
    if data[:2] == b"\x1f\x8b":
        import gzip

        try:
            data = gzip.decompress(data)
        except OSError as exc:
            raise UnreadableFile(f"bad gzip data in {path}: {exc}")
    return parse_pdb(data, default_id=default_id)
