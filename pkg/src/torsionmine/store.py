"""Flat-file store of per-residue torsions, sequences and metadata.

A store is a directory of three files:

* ``manifest`` — line-oriented, tab-separated header written last, so its
  presence marks a completely built store.  Carries format version,
  chain/residue totals, build timestamp, and one line per structure with
  its experiment method, resolution and source path.
* ``sequences.txt`` — one line per stored chain:
  ``structure_id <TAB> chain <TAB> model <TAB> sequence``.  Line order is
  the canonical chain order used by every reader.
* ``torsions.bin`` — little-endian float32 triples (phi, psi, omega),
  one triple per residue, concatenated in chain order.  NaN means the
  angle is undefined.

After the manifest exists the store is immutable; rebuilds go through a
temporary directory and a rename.
"""

from __future__ import annotations

import datetime as _dt
import logging
import os
import shutil
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InvalidKmer,
    StaleOccurrence,
    StoreCorrupt,
    StoreNotFound,
    UnreadableFile,
    EmptyStructure,
)
from .geometry import extract_torsions
from .pdbfile import STANDARD_CODES, ExperimentMeta, Method, parse_pdb_file

log = logging.getLogger("torsionmine.store")

FORMAT_VERSION = 1
MAX_K = 20

MANIFEST_NAME = "manifest"
SEQUENCES_NAME = "sequences.txt"
TORSIONS_NAME = "torsions.bin"

_MAGIC = "torsionmine-store"
_INDEX_GRAM = 3


@dataclass
class StoredChain:
    """One chain of one model: its sequence and float32 torsion arrays."""

    structure_id: str
    chain: str
    model: int
    sequence: str
    phi: np.ndarray
    psi: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        n = len(self.sequence)
        for name in ("phi", "psi", "omega"):
            arr = np.asarray(getattr(self, name), dtype=np.float32)
            if arr.shape != (n,):
                raise ValueError(f"{name} length {arr.shape} != sequence length {n}")
            setattr(self, name, arr)

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.structure_id, self.chain, self.model)

    def __len__(self) -> int:
        return len(self.sequence)


@dataclass
class StoreManifest:
    """Summary header of a store."""

    version: int = FORMAT_VERSION
    chain_count: int = 0
    residue_count: int = 0
    created: str = ""
    structures: dict[str, ExperimentMeta] = field(default_factory=dict)
    sources: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True, order=True)
class KmerOccurrence:
    """A position where a k-mer matches: chain reference plus 0-based start."""

    structure_id: str
    chain: str
    model: int
    start: int


def _validate_kmer(kmer: str) -> None:
    if not kmer:
        raise InvalidKmer("empty k-mer")
    if len(kmer) > MAX_K:
        raise InvalidKmer(f"k-mer length {len(kmer)} exceeds maximum {MAX_K}")
    bad = set(kmer) - STANDARD_CODES
    if bad:
        raise InvalidKmer(f"non-standard letters in k-mer: {''.join(sorted(bad))}")


def chains_from_file(path) -> tuple[list[StoredChain], ExperimentMeta]:
    """Parse one PDB file into StoredChains (float32 quantization happens here)."""
    models, meta, report = parse_pdb_file(path)
    if len(report):
        log.info("%s: %d anomalies handled", path, len(report))
    out = []
    for cm in models:
        rows = extract_torsions(cm)
        out.append(StoredChain(
            structure_id=cm.structure_id,
            chain=cm.chain,
            model=cm.model,
            sequence=cm.sequence,
            phi=np.array([r.phi for r in rows], dtype=np.float32),
            psi=np.array([r.psi for r in rows], dtype=np.float32),
            omega=np.array([r.omega for r in rows], dtype=np.float32),
        ))
    return out, meta


class TorsionStore:
    """Read-only view over stored chains with k-mer search."""

    def __init__(self, chains: list[StoredChain], manifest: StoreManifest,
                 path: Path | None = None):
        self._chains = sorted(chains, key=lambda c: c.key)
        self._by_key = {c.key: c for c in self._chains}
        self.manifest = manifest
        self.path = path
        self._gram_index: dict[str, list[tuple[int, int]]] | None = None

    # -- construction ------------------------------------------------

    @classmethod
    def from_chains(cls, chains, metas=None, sources=None) -> "TorsionStore":
        """Build an in-memory store (no files touched)."""
        chains = list(chains)
        metas = dict(metas or {})
        for c in chains:
            metas.setdefault(c.structure_id, ExperimentMeta(structure_id=c.structure_id))
        manifest = StoreManifest(
            chain_count=len(chains),
            residue_count=sum(len(c) for c in chains),
            created=_now(),
            structures=metas,
            sources=dict(sources or {}),
        )
        return cls(chains, manifest)

    @classmethod
    def open(cls, path) -> "TorsionStore":
        path = Path(path)
        manifest_path = path / MANIFEST_NAME
        if not manifest_path.is_file():
            raise StoreNotFound(f"no store at {path} (manifest missing)")
        manifest = _read_manifest(manifest_path)
        chains = _read_chains(path)
        if len(chains) != manifest.chain_count:
            raise StoreCorrupt(
                f"manifest says {manifest.chain_count} chains, found {len(chains)}")
        total = sum(len(c) for c in chains)
        if total != manifest.residue_count:
            raise StoreCorrupt(
                f"manifest says {manifest.residue_count} residues, found {total}")
        return cls(chains, manifest, path=path)

    # -- queries -----------------------------------------------------

    def chains(self) -> list[StoredChain]:
        return list(self._chains)

    def get_chain(self, structure_id: str, chain: str, model: int) -> StoredChain:
        try:
            return self._by_key[(structure_id, chain, model)]
        except KeyError:
            raise StaleOccurrence(
                f"chain {structure_id}/{chain}/model {model} not in store") from None

    def _index(self) -> dict[str, list[tuple[int, int]]]:
        if self._gram_index is None:
            index: dict[str, list[tuple[int, int]]] = {}
            for ci, sc in enumerate(self._chains):
                seq = sc.sequence
                for p in range(len(seq) - _INDEX_GRAM + 1):
                    gram = seq[p:p + _INDEX_GRAM]
                    if "X" in gram:
                        continue
                    index.setdefault(gram, []).append((ci, p))
            self._gram_index = index
        return self._gram_index

    def find_kmer(self, kmer: str, methods=None) -> list[KmerOccurrence]:
        """All exact occurrences of kmer, in (structure, chain, model, start) order.

        The 3-gram index narrows candidates for k >= 3; every candidate
        is still verified by direct string comparison, so results are
        always identical to a plain scan.
        """
        _validate_kmer(kmer)
        allowed = _method_set(methods)
        k = len(kmer)
        hits: list[KmerOccurrence] = []
        if k >= _INDEX_GRAM:
            for ci, p in self._index().get(kmer[:_INDEX_GRAM], ()):
                sc = self._chains[ci]
                if allowed is not None and not self._method_ok(sc, allowed):
                    continue
                if sc.sequence[p:p + k] == kmer:
                    hits.append(KmerOccurrence(sc.structure_id, sc.chain, sc.model, p))
        else:
            for sc in self._chains:
                if allowed is not None and not self._method_ok(sc, allowed):
                    continue
                pos = sc.sequence.find(kmer)
                while pos != -1:
                    hits.append(KmerOccurrence(sc.structure_id, sc.chain, sc.model, pos))
                    pos = sc.sequence.find(kmer, pos + 1)
        hits.sort()
        return hits

    def _method_ok(self, sc: StoredChain, allowed: set[Method]) -> bool:
        meta = self.manifest.structures.get(sc.structure_id)
        method = meta.method if meta else Method.OTHER
        return method in allowed

    def get_torsions(self, occ: KmerOccurrence, k: int) -> list[tuple[float, float]]:
        """(phi, psi) pairs for the k residues at an occurrence, NaN preserved."""
        sc = self.get_chain(occ.structure_id, occ.chain, occ.model)
        if occ.start < 0 or occ.start + k > len(sc):
            raise StaleOccurrence(
                f"occurrence {occ} out of range for chain of length {len(sc)}")
        stop = occ.start + k
        return [
            (float(sc.phi[i]), float(sc.psi[i])) for i in range(occ.start, stop)
        ]

    def count_kmers(self, k: int) -> dict[str, tuple[int, float]]:
        """Frequency table of all 20^k k-mers: sequence -> (count, percent).

        Windows containing X are skipped.  The table always has every
        combination, zero counts included, in lexicographic order;
        percentages are over the nonzero total and sum to 100 when any
        window exists.
        """
        if k not in (1, 2, 3):
            raise ValueError("k-mer statistics support k in {1, 2, 3}")
        counts: dict[str, int] = {}
        for sc in self._chains:
            seq = sc.sequence
            for p in range(len(seq) - k + 1):
                window = seq[p:p + k]
                if "X" in window:
                    continue
                counts[window] = counts.get(window, 0) + 1
        total = sum(counts.values())
        letters = sorted(STANDARD_CODES)
        table: dict[str, tuple[int, float]] = {}
        for combo in _product_strings(letters, k):
            c = counts.get(combo, 0)
            pct = (100.0 * c / total) if total else 0.0
            table[combo] = (c, pct)
        return table


def _product_strings(letters: list[str], k: int):
    if k == 1:
        yield from letters
        return
    for head in letters:
        for tail in _product_strings(letters, k - 1):
            yield head + tail


def _method_set(methods) -> set[Method] | None:
    if methods is None:
        return None
    out = set()
    for m in methods:
        out.add(m if isinstance(m, Method) else Method(str(m).upper()))
    return out


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# -- serialization ---------------------------------------------------


def _write_store(directory: Path, chains: list[StoredChain],
                 manifest: StoreManifest) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    chains = sorted(chains, key=lambda c: c.key)
    with open(directory / TORSIONS_NAME, "wb") as fh:
        for sc in chains:
            triples = np.stack([sc.phi, sc.psi, sc.omega], axis=1)
            fh.write(triples.astype("<f4").tobytes())
    with open(directory / SEQUENCES_NAME, "w", encoding="utf-8") as fh:
        for sc in chains:
            fh.write(f"{sc.structure_id}\t{sc.chain}\t{sc.model}\t{sc.sequence}\n")
    # manifest last: its presence marks a complete store
    lines = [
        f"{_MAGIC}\t{manifest.version}",
        f"created\t{manifest.created}",
        f"chains\t{manifest.chain_count}",
        f"residues\t{manifest.residue_count}",
    ]
    for sid in sorted(manifest.structures):
        meta = manifest.structures[sid]
        res = "-" if meta.resolution is None else f"{meta.resolution:g}"
        src = manifest.sources.get(sid, "-") or "-"
        lines.append(f"structure\t{sid}\t{meta.method.value}\t{res}\t{src}")
    with open(directory / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_manifest(path: Path) -> StoreManifest:
    manifest = StoreManifest()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StoreCorrupt(f"cannot read manifest: {exc}") from exc
    first = True
    for raw in text.splitlines():
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if first:
            if parts[0] != _MAGIC or len(parts) < 2:
                raise StoreCorrupt("not a torsion store manifest")
            try:
                manifest.version = int(parts[1])
            except ValueError:
                raise StoreCorrupt("bad manifest version") from None
            if manifest.version != FORMAT_VERSION:
                raise StoreCorrupt(f"unsupported store version {manifest.version}")
            first = False
            continue
        tag = parts[0]
        try:
            if tag == "created":
                manifest.created = parts[1] if len(parts) > 1 else ""
            elif tag == "chains":
                manifest.chain_count = int(parts[1])
            elif tag == "residues":
                manifest.residue_count = int(parts[1])
            elif tag == "structure":
                sid, method, res = parts[1], parts[2], parts[3]
                src = parts[4] if len(parts) > 4 else "-"
                manifest.structures[sid] = ExperimentMeta(
                    structure_id=sid,
                    method=Method(method),
                    resolution=None if res == "-" else float(res),
                )
                if src != "-":
                    manifest.sources[sid] = src
        except (IndexError, ValueError) as exc:
            raise StoreCorrupt(f"bad manifest line: {raw!r}") from exc
    if first:
        raise StoreCorrupt("empty manifest")
    return manifest


def _read_chains(directory: Path) -> list[StoredChain]:
    seq_path = directory / SEQUENCES_NAME
    bin_path = directory / TORSIONS_NAME
    try:
        seq_text = seq_path.read_text(encoding="utf-8")
        blob = bin_path.read_bytes()
    except OSError as exc:
        raise StoreCorrupt(f"store file unreadable: {exc}") from exc
    records = []
    for raw in seq_text.splitlines():
        if not raw:
            continue
        parts = raw.split("\t")
        if len(parts) != 4:
            raise StoreCorrupt(f"bad sequence line: {raw!r}")
        records.append((parts[0], parts[1], int(parts[2]), parts[3]))
    total = sum(len(seq) for _, _, _, seq in records)
    if len(blob) != total * 3 * 4:
        raise StoreCorrupt(
            f"torsion file holds {len(blob)} bytes, expected {total * 12}")
    flat = np.frombuffer(blob, dtype="<f4").reshape(-1, 3)
    chains = []
    offset = 0
    for sid, ch, model, seq in records:
        n = len(seq)
        block = flat[offset:offset + n]
        chains.append(StoredChain(
            structure_id=sid, chain=ch, model=model, sequence=seq,
            phi=block[:, 0].copy(), psi=block[:, 1].copy(),
            omega=block[:, 2].copy(),
        ))
        offset += n
    return chains


def ingest(paths, destination) -> StoreManifest:
    """Build or extend the store at destination from PDB files.

    Files that cannot be parsed are logged and skipped; the run
    continues.  If a store already exists, its chains are kept except
    those whose structure_id is re-ingested (replacement, not
    duplication).  The new store is assembled in a temporary directory
    and renamed into place, so readers never see a half-written store.
    """
    destination = Path(destination)
    existing_chains: list[StoredChain] = []
    existing = None
    if (destination / MANIFEST_NAME).is_file():
        existing = TorsionStore.open(destination)
        existing_chains = existing.chains()

    new_chains: list[StoredChain] = []
    metas: dict[str, ExperimentMeta] = dict(existing.manifest.structures) if existing else {}
    sources: dict[str, str] = dict(existing.manifest.sources) if existing else {}
    ingested_ids: set[str] = set()
    for path in paths:
        try:
            chains, meta = chains_from_file(path)
        except (UnreadableFile, EmptyStructure) as exc:
            log.warning("skipping %s: %s", path, exc)
            continue
        sid = meta.structure_id
        ingested_ids.add(sid)
        new_chains = [c for c in new_chains if c.structure_id != sid]
        new_chains.extend(chains)
        metas[sid] = meta
        sources[sid] = str(path)

    kept = [c for c in existing_chains if c.structure_id not in ingested_ids]
    all_chains = kept + new_chains
    live_ids = {c.structure_id for c in all_chains}
    metas = {sid: m for sid, m in metas.items() if sid in live_ids}
    sources = {sid: s for sid, s in sources.items() if sid in live_ids}

    manifest = StoreManifest(
        chain_count=len(all_chains),
        residue_count=sum(len(c) for c in all_chains),
        created=_now(),
        structures=metas,
        sources=sources,
    )

    parent = destination.parent if destination.parent != Path("") else Path(".")
    parent.mkdir(parents=True, exist_ok=True)
    tmp = parent / f".{destination.name}.build-{uuid.uuid4().hex[:8]}"
    try:
        _write_store(tmp, all_chains, manifest)
        if destination.exists():
            old = parent / f".{destination.name}.old-{uuid.uuid4().hex[:8]}"
            os.replace(destination, old)
            os.replace(tmp, destination)
            shutil.rmtree(old)
        else:
            os.replace(tmp, destination)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)
    return manifest
