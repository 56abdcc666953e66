"""torsionmine: mine, query and predict protein backbone torsion angles.

The pipeline in one breath: parse PDB coordinate files (pdbfile),
compute phi/psi/omega per residue (geometry), persist them in a compact
flat-file store with k-mer search (store), turn query sequences into
rolling-window lookups (query), estimate periodic angle densities and
pick maxima (kde), and drive it all from one executable (cli).
"""

from .errors import (
    DegenerateGeometry,
    EmptyObservations,
    EmptyStructure,
    InvalidKmer,
    InvalidSequence,
    IoFailure,
    LengthMismatch,
    MalformedCoordinate,
    NoMatches,
    SequenceTooShort,
    StaleOccurrence,
    StoreCorrupt,
    StoreNotFound,
    TooFewPoints,
    TorsionMineError,
    UndefinedAngle,
    UnreadableFile,
)
from .geometry import (
    BackboneGeometry,
    BackboneModel,
    IDEAL_GEOMETRY,
    ResidueTorsion,
    build_backbone,
    extract_torsions,
    kabsch_rmsd,
    place_atom,
    torsion,
    wrap_degrees,
)
from .kde import (
    AnglePrediction,
    DensityGrid,
    PredictConfig,
    argmax,
    estimate_density,
    export_rspace,
    predict_sequence,
)
from .pdbfile import (
    AnomalyReport,
    AtomRecord,
    ChainModel,
    ExperimentMeta,
    Method,
    parse_atom_line,
    parse_pdb,
    parse_pdb_file,
    resolve_altloc,
    three_to_one,
)
from .query import (
    DihedralObservation,
    WindowQuery,
    consolidate,
    dissect,
    emit_csv,
    parse_sequence_input,
    run_windows,
)
from .store import (
    KmerOccurrence,
    StoredChain,
    StoreManifest,
    TorsionStore,
    ingest,
)

__version__ = "0.1.0"

__all__ = [
    "AnglePrediction",
    "AnomalyReport",
    "AtomRecord",
    "BackboneGeometry",
    "BackboneModel",
    "ChainModel",
    "DegenerateGeometry",
    "DensityGrid",
    "DihedralObservation",
    "EmptyObservations",
    "EmptyStructure",
    "ExperimentMeta",
    "IDEAL_GEOMETRY",
    "InvalidKmer",
    "InvalidSequence",
    "IoFailure",
    "KmerOccurrence",
    "LengthMismatch",
    "MalformedCoordinate",
    "Method",
    "NoMatches",
    "PredictConfig",
    "ResidueTorsion",
    "SequenceTooShort",
    "StaleOccurrence",
    "StoreCorrupt",
    "StoreManifest",
    "StoreNotFound",
    "StoredChain",
    "TooFewPoints",
    "TorsionMineError",
    "TorsionStore",
    "UndefinedAngle",
    "UnreadableFile",
    "WindowQuery",
    "argmax",
    "build_backbone",
    "consolidate",
    "dissect",
    "emit_csv",
    "estimate_density",
    "export_rspace",
    "extract_torsions",
    "ingest",
    "kabsch_rmsd",
    "parse_atom_line",
    "parse_pdb",
    "parse_pdb_file",
    "parse_sequence_input",
    "place_atom",
    "predict_sequence",
    "resolve_altloc",
    "run_windows",
    "three_to_one",
    "torsion",
    "wrap_degrees",
]
