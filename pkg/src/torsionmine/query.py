"""Rolling-window sequence queries against a torsion store.

A query sequence of length n is dissected into its n - k + 1 overlapping
k-mers.  Every store occurrence of every window contributes one row per
window offset; rows with defined angles are then consolidated per query
residue, each residue drawing from every window that covers it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidKmer, InvalidSequence, IoFailure, SequenceTooShort
from .pdbfile import STANDARD_CODES, three_to_one
from .store import MAX_K, TorsionStore

CSV_HEADER = ["pdb_id", "chain", "model", "offset", "residue", "phi", "psi"]


@dataclass(frozen=True)
class WindowQuery:
    """One rolling-window k-mer: window i covers residues i .. i+k-1."""

    query_index: int
    kmer: str

    @property
    def residue_span(self) -> range:
        return range(self.query_index, self.query_index + len(self.kmer))


@dataclass(frozen=True)
class WindowRow:
    """One store hit residue for one window, angles possibly NaN."""

    structure_id: str
    chain: str
    model: int
    offset: int
    residue: str
    phi: float
    psi: float
    residue_position: int


@dataclass
class WindowResult:
    """All store rows of one window, in deterministic store order."""

    window: WindowQuery
    rows: list[WindowRow]


@dataclass(frozen=True)
class DihedralObservation:
    """A defined (phi, psi) pair attributed to a query residue."""

    phi: float
    psi: float
    structure_id: str
    chain: str
    model: int
    residue_position: int
    window: int
    offset: int


def parse_sequence_input(text: str, triplet_mode: bool = False) -> str:
    """Normalize user sequence input to a 1-letter string.

    Single-letter mode strips whitespace and uppercases.  Triplet mode
    splits on whitespace and maps 3-letter names; tokens that do not
    name one of the 20 standard residues are rejected (a query may not
    contain unknowns).
    """
    if triplet_mode:
        letters = []
        for token in text.split():
            code = three_to_one(token)
            if code == "X":
                raise InvalidSequence(f"unknown residue name: {token}")
            letters.append(code)
        return "".join(letters)
    seq = "".join(text.split()).upper()
    bad = set(seq) - STANDARD_CODES
    if bad:
        raise InvalidSequence(f"invalid sequence letters: {''.join(sorted(bad))}")
    return seq


def dissect(sequence: str, k: int) -> list[WindowQuery]:
    """The n - k + 1 rolling-window k-mers of a sequence, in order."""
    if k < 1 or k > MAX_K:
        raise InvalidKmer(f"window size must be in [1, {MAX_K}], got {k}")
    bad = set(sequence) - STANDARD_CODES
    if bad:
        raise InvalidSequence(f"invalid sequence letters: {''.join(sorted(bad))}")
    if len(sequence) < k:
        raise SequenceTooShort(
            f"sequence length {len(sequence)} is shorter than window size {k}")
    return [WindowQuery(i, sequence[i:i + k]) for i in range(len(sequence) - k + 1)]


def run_windows(sequence: str, k: int, store: TorsionStore,
                methods=None, exclude=()) -> list[WindowResult]:
    """Query every window against the store.

    Every occurrence yields k rows (one per offset), NaN angles
    included; rows follow the store's deterministic occurrence order.
    Structures named in exclude are dropped from the hits.
    """
    excluded = set(exclude)
    results = []
    for window in dissect(sequence, k):
        rows = []
        for occ in store.find_kmer(window.kmer, methods=methods):
            if occ.structure_id in excluded:
                continue
            pairs = store.get_torsions(occ, k)
            for offset, (phi, psi) in enumerate(pairs):
                rows.append(WindowRow(
                    structure_id=occ.structure_id,
                    chain=occ.chain,
                    model=occ.model,
                    offset=offset,
                    residue=window.kmer[offset],
                    phi=phi,
                    psi=psi,
                    residue_position=occ.start + offset,
                ))
        results.append(WindowResult(window, rows))
    return results


def consolidate(sequence: str, k: int, store: TorsionStore,
                methods=None, exclude=(), dedup: bool = False,
                window_results: list[WindowResult] | None = None,
                ) -> list[list[DihedralObservation]]:
    """Per-residue observation lists aggregated over covering windows.

    Residue r receives, from every window w in
    [max(0, r-k+1), min(r, n-k)], the (phi, psi) of each store match at
    offset r - w, skipping pairs where either angle is undefined.  With
    dedup, repeats of the same source residue reached through different
    windows keep only their first appearance.
    """
    if window_results is None:
        window_results = run_windows(sequence, k, store,
                                     methods=methods, exclude=exclude)
    per_residue: list[list[DihedralObservation]] = [[] for _ in sequence]
    for result in window_results:
        w = result.window.query_index
        for row in result.rows:
            if math.isnan(row.phi) or math.isnan(row.psi):
                continue
            per_residue[w + row.offset].append(DihedralObservation(
                phi=row.phi, psi=row.psi,
                structure_id=row.structure_id, chain=row.chain,
                model=row.model, residue_position=row.residue_position,
                window=w, offset=row.offset,
            ))
    if dedup:
        deduped = []
        for obs_list in per_residue:
            seen = set()
            kept = []
            for obs in obs_list:
                source = (obs.structure_id, obs.chain, obs.model, obs.residue_position)
                if source in seen:
                    continue
                seen.add(source)
                kept.append(obs)
            deduped.append(kept)
        per_residue = deduped
    return per_residue


def format_angle(value: float) -> str:
    """Angles print with 4 decimals; undefined prints as an empty field."""
    return "" if math.isnan(value) else f"{value:.4f}"


def emit_csv(window_results: list[WindowResult], directory) -> list[Path]:
    """Write one window_<i>_<kmer>.csv per window; returns the paths."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {directory}: {exc}") from exc
    paths = []
    for result in window_results:
        name = f"window_{result.window.query_index}_{result.window.kmer}.csv"
        path = directory / name
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_HEADER)
                for row in result.rows:
                    writer.writerow([
                        row.structure_id, row.chain, row.model, row.offset,
                        row.residue, format_angle(row.phi), format_angle(row.psi),
                    ])
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        paths.append(path)
    return paths
