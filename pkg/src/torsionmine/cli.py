"""Command-line pipeline: ingest, stats, query, rama, predict, build, rmsd.

Conventions shared by every subcommand: data goes to standard output or
to --out files, diagnostics go to standard error; exit code 0 means
success, 1 a usage problem, 2 a data problem.  A JSON config file can
supply any flag's value (flags win over the file); the default store
location may also come from the TORSIONMINE_STORE environment variable.
Precedence: flag, then config file, then environment.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import geometry, kde, query, store
from .errors import LengthMismatch, TorsionMineError
from .pdbfile import Method, parse_pdb_file

ENV_STORE = "TORSIONMINE_STORE"


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Validated knobs shared across subcommands."""

    store_path: str | None = None
    k: int = 3
    bandwidth: float = kde.DEFAULT_BANDWIDTH
    resolution: float = kde.DEFAULT_RESOLUTION
    methods: set | None = None
    exclude: tuple = ()
    out: str | None = None
    triplet: bool = False
    dedup: bool = False
    rmsd_atoms: tuple = ("N", "CA", "C")

    def validate(self):
        if not 1 <= self.k <= store.MAX_K:
            raise UsageError(f"k must be in [1, {store.MAX_K}], got {self.k}")
        if self.bandwidth <= 0:
            raise UsageError("bandwidth must be positive")
        if self.resolution <= 0:
            raise UsageError("resolution must be positive")
        return self

    def predict_config(self) -> kde.PredictConfig:
        return kde.PredictConfig(
            bandwidth=self.bandwidth, resolution=self.resolution,
            methods=self.methods, exclude=self.exclude, dedup=self.dedup,
        )


def _parse_methods(text) -> set | None:
    if text is None:
        return None
    if isinstance(text, (list, tuple, set)):
        items = list(text)
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    out = set()
    for item in items:
        try:
            out.add(Method(str(item).strip().upper()))
        except ValueError:
            raise UsageError(f"unknown method: {item}") from None
    return out or None


def _parse_list(text) -> tuple:
    if text is None:
        return ()
    if isinstance(text, (list, tuple)):
        return tuple(str(t) for t in text)
    return tuple(t.strip() for t in str(text).split(",") if t.strip())


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


def _merged(args, key, fallback=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    return args._config_data.get(key, fallback)


def _run_config(args) -> RunConfig:
    store_path = _merged(args, "store") or os.environ.get(ENV_STORE)
    cfg = RunConfig(
        store_path=store_path,
        k=int(_merged(args, "k", 3)),
        bandwidth=float(_merged(args, "bandwidth", kde.DEFAULT_BANDWIDTH)),
        resolution=float(_merged(args, "resolution", kde.DEFAULT_RESOLUTION)),
        methods=_parse_methods(_merged(args, "methods")),
        exclude=_parse_list(_merged(args, "exclude")),
        out=_merged(args, "out"),
        triplet=bool(_merged(args, "triplet", False)),
        dedup=bool(_merged(args, "dedup", False)),
        rmsd_atoms=("CA",) if _merged(args, "ca_only", False) else ("N", "CA", "C"),
    )
    return cfg.validate()


def _open_store(cfg: RunConfig) -> store.TorsionStore:
    if not cfg.store_path:
        raise UsageError(
            f"no store given (use --store, a config file, or ${ENV_STORE})")
    return store.TorsionStore.open(cfg.store_path)


def _require_out(cfg: RunConfig, why: str) -> Path:
    if not cfg.out:
        raise UsageError(f"--out is required {why}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plural(n: int, word: str) -> str:
    return f"{n} {word}{'' if n == 1 else 's'}"


# -- subcommands -----------------------------------------------------


def _expand_paths(paths) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(
                q for q in p.rglob("*")
                if q.is_file() and (q.name.endswith(".pdb") or q.name.endswith(".pdb.gz"))
            ))
        else:
            files.append(p)
    return files


def _tree_bytes(root: Path) -> int:
    return sum(p.stat().st_size for p in root.rglob("*") if p.is_file())


def cmd_ingest(args) -> int:
    cfg = _run_config(args)
    if not cfg.store_path:
        raise UsageError(
            f"no store given (use --store, a config file, or ${ENV_STORE})")
    files = _expand_paths(args.paths)
    if not files:
        print("warning: no input files; building an empty store", file=sys.stderr)
    manifest = store.ingest(files, cfg.store_path)
    print(", ".join([
        _plural(len(manifest.structures), "structure"),
        _plural(manifest.chain_count, "chain"),
        _plural(manifest.residue_count, "residue"),
    ]))
    source_bytes = sum(f.stat().st_size for f in files if f.is_file())
    store_bytes = _tree_bytes(Path(cfg.store_path))
    if source_bytes and store_bytes:
        print(
            f"store size {store_bytes} bytes vs source {source_bytes} bytes "
            f"(ratio {source_bytes / store_bytes:.1f}x)",
            file=sys.stderr,
        )
    return 0


def cmd_stats(args) -> int:
    cfg = _run_config(args)
    if _merged(args, "k") is None:
        raise UsageError("--k is required for stats")
    if cfg.k not in (1, 2, 3):
        raise UsageError("stats supports only k of 1, 2 or 3")
    st = _open_store(cfg)
    table = st.count_kmers(cfg.k)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["kmer", "count", "percent"])
    for kmer, (count, pct) in table.items():
        writer.writerow([kmer, count, f"{pct:.6f}"])
    return 0


def cmd_query(args) -> int:
    cfg = _run_config(args)
    st = _open_store(cfg)
    seq = query.parse_sequence_input(args.sequence, triplet_mode=cfg.triplet)
    out = _require_out(cfg, "to hold the per-window CSV files")
    results = query.run_windows(seq, cfg.k, st,
                                methods=cfg.methods, exclude=cfg.exclude)
    paths = query.emit_csv(results, out)
    print(f"wrote {_plural(len(paths), 'window file')} to {out}", file=sys.stderr)
    return 0


PREDICTION_HEADER = ["index", "residue", "phi", "psi", "peak_density", "n_obs", "flags"]


def _write_predictions(predictions, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(PREDICTION_HEADER)
    for p in predictions:
        writer.writerow([
            p.index, p.residue,
            query.format_angle(p.phi_star), query.format_angle(p.psi_star),
            "" if math.isnan(p.density_at_peak) else f"{p.density_at_peak:.12g}",
            p.observation_count, p.flags,
        ])


def cmd_predict(args) -> int:
    cfg = _run_config(args)
    st = _open_store(cfg)
    seq = query.parse_sequence_input(args.sequence, triplet_mode=cfg.triplet)
    if args.grids and not cfg.out:
        raise UsageError("--grids needs --out to hold the grid files")
    out = Path(cfg.out) if cfg.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    grid_sink = None
    if args.grids:
        def grid_sink(index, grid):
            kde.write_grid_csv(grid, out / f"grid_{index}.csv")
    predictions = kde.predict_sequence(seq, cfg.k, st, cfg.predict_config(),
                                       grid_sink=grid_sink)
    if out:
        with open(out / "predictions.csv", "w", encoding="utf-8", newline="") as fh:
            _write_predictions(predictions, fh)
        print(f"wrote predictions for {_plural(len(predictions), 'residue')} "
              f"to {out / 'predictions.csv'}", file=sys.stderr)
    else:
        _write_predictions(predictions, sys.stdout)
    missing = sum(1 for p in predictions if p.no_data)
    if missing:
        print(f"warning: {_plural(missing, 'residue')} had no observations",
              file=sys.stderr)
    return 0


def cmd_rama(args) -> int:
    cfg = _run_config(args)
    st = _open_store(cfg)
    kmer = args.kmer.strip().upper()
    out = _require_out(cfg, "to hold the R-space files")
    rspace = kde.export_rspace(kmer, args.offset, st, cfg.predict_config())
    stem = f"rspace_{kmer}_{args.offset}"
    kde.write_grid_csv(rspace.grid, out / f"{stem}_grid.csv")
    kde.write_observations_csv(rspace, out / f"{stem}_obs.csv")
    print(f"{_plural(len(rspace.observations), 'observation')} of {kmer}"
          f" at offset {args.offset}; files under {out}", file=sys.stderr)
    return 0


def _read_predictions_csv(path) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
    except OSError as exc:
        raise TorsionMineError(f"cannot read angles file: {exc}") from exc
    required = {"index", "residue", "phi", "psi"}
    if not rows or not required.issubset(rows[0].keys()):
        raise TorsionMineError(
            "angles file needs at least the columns index,residue,phi,psi")
    return rows


def cmd_build(args) -> int:
    rows = _read_predictions_csv(args.angles)
    rows.sort(key=lambda r: int(r["index"]))
    fallback = None
    if args.fallback:
        try:
            phi_s, psi_s = args.fallback.split(",")
            fallback = (float(phi_s), float(psi_s))
        except ValueError:
            raise UsageError("--fallback takes PHI,PSI (two numbers)") from None

    n = len(rows)
    sequence = []
    angles = []
    for i, row in enumerate(rows):
        sequence.append((row.get("residue") or "A").strip() or "A")
        flags = (row.get("flags") or "")
        no_data = "no_data" in flags
        phi = _angle_field(row.get("phi"))
        psi = _angle_field(row.get("psi"))
        if no_data:
            phi = psi = math.nan
        if math.isnan(phi) and i > 0:
            if fallback is None:
                print(f"residue {i} has no phi (no_data); supply --fallback "
                      "to build anyway", file=sys.stderr)
                return 2
            phi = fallback[0]
        if math.isnan(psi) and i < n - 1:
            if fallback is None:
                print(f"residue {i} has no psi (no_data); supply --fallback "
                      "to build anyway", file=sys.stderr)
                return 2
            psi = fallback[1]
        angles.append((phi, psi, args.omega if i > 0 else math.nan))

    model = geometry.build_backbone(angles)
    text = model.to_pdb(sequence="".join(sequence))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    print(f"wrote {_plural(len(rows), 'residue')} backbone to {out}",
          file=sys.stderr)
    return 0


def _angle_field(text) -> float:
    text = (text or "").strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise TorsionMineError(f"bad angle value: {text!r}") from None


def _backbone_points(path, atom_names) -> list:
    models, _, _ = parse_pdb_file(path)
    if not models:
        raise TorsionMineError(f"no chains in {path}")
    first_model = min(cm.model for cm in models)
    points = []
    for cm in models:
        if cm.model != first_model:
            continue
        for res in cm.residues:
            points.append(tuple(res.atoms.get(name) for name in atom_names))
    return points


def cmd_rmsd(args) -> int:
    cfg = _run_config(args)
    a = _backbone_points(args.model, cfg.rmsd_atoms)
    b = _backbone_points(args.reference, cfg.rmsd_atoms)
    if len(a) != len(b):
        raise LengthMismatch(
            f"residue counts differ: {len(a)} vs {len(b)}")
    pa, pb = [], []
    for i, (ra, rb) in enumerate(zip(a, b)):
        for j, name in enumerate(cfg.rmsd_atoms):
            if ra[j] is None and rb[j] is None:
                continue
            if ra[j] is None or rb[j] is None:
                raise LengthMismatch(
                    f"residue {i}: atom {name} present in only one structure")
            pa.append(ra[j])
            pb.append(rb[j])
    value = geometry.kabsch_rmsd(pa, pb)
    print(f"{value:.3f}")
    return 0


# -- wiring ----------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, with_kde=False, with_filters=False):
    p.add_argument("--store", help=f"store directory (default ${ENV_STORE})")
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    if with_filters:
        p.add_argument("--methods",
                       help="comma list of experiment methods to keep "
                            "(xray,nmr,em,other)")
        p.add_argument("--exclude", help="comma list of structure ids to drop")
    if with_kde:
        p.add_argument("--bandwidth", type=float,
                       help=f"KDE kernel width in degrees "
                            f"(default {kde.DEFAULT_BANDWIDTH:g})")
        p.add_argument("--resolution", type=float,
                       help=f"grid cell size in degrees "
                            f"(default {kde.DEFAULT_RESOLUTION:g})")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="torsionmine",
        description="Mine backbone torsions from PDB files: build a store, "
                    "query k-mers, estimate angle densities, predict and "
                    "rebuild backbones.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("ingest", help="parse PDB files into a store")
    p.add_argument("paths", nargs="*", help="PDB files or directories")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="k-mer frequency table (k = 1, 2 or 3)")
    p.add_argument("--k", type=int, help="k-mer size")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("query", help="per-window k-mer hits as CSV files")
    p.add_argument("sequence", help="query sequence")
    p.add_argument("--k", type=int, help="window size")
    p.add_argument("--triplet", action="store_true", default=None,
                   help="sequence uses 3-letter names separated by spaces")
    p.add_argument("--out", help="output directory for window CSV files")
    _add_common(p, with_filters=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("predict", help="most-likely phi/psi per residue")
    p.add_argument("sequence", help="query sequence")
    p.add_argument("--k", type=int, help="window size")
    p.add_argument("--triplet", action="store_true", default=None,
                   help="sequence uses 3-letter names separated by spaces")
    p.add_argument("--dedup", action="store_true", default=None,
                   help="count each source residue once per query residue")
    p.add_argument("--out", help="directory for predictions.csv")
    p.add_argument("--grids", action="store_true",
                   help="also dump each residue's density grid (needs --out)")
    _add_common(p, with_kde=True, with_filters=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("rama", help="density and observations of one k-mer offset")
    p.add_argument("kmer", help="k-mer to extract")
    p.add_argument("--offset", type=int, default=0,
                   help="position within the k-mer (default 0)")
    p.add_argument("--out", help="output directory")
    _add_common(p, with_kde=True, with_filters=True)
    p.set_defaults(func=cmd_rama)

    p = sub.add_parser("build", help="backbone PDB from a predictions CSV")
    p.add_argument("angles", help="CSV with index,residue,phi,psi columns")
    p.add_argument("--out", required=True, help="output PDB path")
    p.add_argument("--omega", type=float, default=180.0,
                   help="peptide-bond torsion used for every residue "
                        "(default 180)")
    p.add_argument("--fallback",
                   help="PHI,PSI used for residues without a prediction")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("rmsd", help="optimal-superposition backbone RMSD")
    p.add_argument("model", help="model PDB file")
    p.add_argument("reference", help="reference PDB file")
    p.add_argument("--ca-only", dest="ca_only", action="store_true", default=None,
                   help="use alpha-carbons only")
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    p.set_defaults(func=cmd_rmsd)

    return parser


def main(argv=None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                            format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        args._config_data = (
            _load_config_file(args.config) if getattr(args, "config", None) else {}
        )
        return args.func(args)
    except UsageError as exc:
        print(f"torsionmine: {exc}", file=sys.stderr)
        return 1
    except TorsionMineError as exc:
        print(f"torsionmine: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"torsionmine: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
