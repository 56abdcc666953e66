"""Periodic kernel density estimation over (phi, psi) pairs.

Densities live on the 2-torus: the kernel is a product of wrapped
Gaussians (wrapping summed over +/-2 turns, ample for bandwidths up to
60 degrees), evaluated at the centers of a square grid and normalized
so the torus integral is exactly 1 in radian measure.

phi and psi are estimated jointly in 2D, not as two marginals; that is
an assumption of this implementation, made because the density plots it
feeds are themselves two-dimensional.  The bandwidth (default 10
degrees) is the main tuning knob and is configurable everywhere the
estimate is exposed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyObservations, IoFailure, NoMatches
from .query import CSV_HEADER, DihedralObservation, consolidate, format_angle
from .store import TorsionStore

DEFAULT_BANDWIDTH = 10.0
DEFAULT_RESOLUTION = 1.0

_WRAP_TURNS = 2


@dataclass(frozen=True)
class DensityGrid:
    """Normalized density over the (phi, psi) torus.

    values[i, j] is the density at the cell centered on
    (-180 + (i + 0.5) * resolution, -180 + (j + 0.5) * resolution).
    """

    resolution: float
    bandwidth: float
    observation_count: int
    values: np.ndarray

    @property
    def cells_per_axis(self) -> int:
        return self.values.shape[0]

    def centers(self) -> np.ndarray:
        n = self.cells_per_axis
        return -180.0 + (np.arange(n) + 0.5) * self.resolution

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (
            -180.0 + (i + 0.5) * self.resolution,
            -180.0 + (j + 0.5) * self.resolution,
        )

    def integral(self) -> float:
        cell_area = (self.resolution * math.pi / 180.0) ** 2
        return float(self.values.sum() * cell_area)


def wrapped_difference(a, b):
    """Shortest signed difference a - b in [-180, 180), elementwise."""
    return (np.asarray(a) - np.asarray(b) + 180.0) % 360.0 - 180.0


def _wrapped_gaussian(delta: np.ndarray, h: float) -> np.ndarray:
    """Wrapped-Gaussian kernel, degree measure, normalized on the circle."""
    scale = 1.0 / (h * math.sqrt(2.0 * math.pi))
    total = np.zeros_like(delta, dtype=np.float64)
    for turn in range(-_WRAP_TURNS, _WRAP_TURNS + 1):
        shifted = (delta + 360.0 * turn) / h
        total += np.exp(-0.5 * shifted * shifted)
    return scale * total


def estimate_density(observations, bandwidth: float = DEFAULT_BANDWIDTH,
                     resolution: float = DEFAULT_RESOLUTION) -> DensityGrid:
    """KDE of (phi, psi) observations on the torus.

    value(cell) = (1/N) * sum over observations of K_h(dphi) * K_h(dpsi)
    with K_h a wrapped Gaussian of standard deviation
    bandwidth degrees, followed by a global normalization making the
    torus integral 1.  The kernel matrix formulation used here is
    algebraically the same sum as the per-cell loop.
    """
    obs = np.asarray(list(observations), dtype=np.float64)
    if obs.size == 0:
        raise EmptyObservations("density estimation needs at least one observation")
    if obs.ndim != 2 or obs.shape[1] != 2:
        raise ValueError("observations must be (phi, psi) pairs")
    if np.isnan(obs).any():
        raise ValueError("observations must be defined angles, got NaN")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    cells = 360.0 / resolution
    if abs(cells - round(cells)) > 1e-9:
        raise ValueError("resolution must evenly divide 360 degrees")
    n = int(round(cells))
    centers = -180.0 + (np.arange(n) + 0.5) * resolution
    kphi = _wrapped_gaussian(wrapped_difference(obs[:, 0][None, :], centers[:, None]), bandwidth)
    kpsi = _wrapped_gaussian(wrapped_difference(obs[:, 1][None, :], centers[:, None]), bandwidth)
    values = (kphi @ kpsi.T) / obs.shape[0]
    cell_area = (resolution * math.pi / 180.0) ** 2
    mass = values.sum() * cell_area
    if mass <= 0.0:
        raise ValueError("bandwidth too narrow for the grid resolution")
    values = values / mass
    values.flags.writeable = False
    return DensityGrid(
        resolution=resolution, bandwidth=bandwidth,
        observation_count=obs.shape[0], values=values,
    )


def argmax(grid: DensityGrid) -> tuple[float, float]:
    """Center of the maximal cell; ties go to the smallest phi index,
    then the smallest psi index."""
    flat = int(np.argmax(grid.values))
    n = grid.cells_per_axis
    return grid.cell_center(flat // n, flat % n)


@dataclass(frozen=True)
class AnglePrediction:
    """Most-likely (phi, psi) for one query residue.

    no_data marks residues whose covering windows matched nothing: the
    angles are NaN and nothing downstream may invent them.  terminus
    marks the first and last residue, whose phi (respectively psi) has
    no physical counterpart in a built structure.
    """

    index: int
    residue: str
    phi_star: float
    psi_star: float
    density_at_peak: float
    observation_count: int
    window_size_used: int
    terminus: bool = False
    no_data: bool = False

    @property
    def flags(self) -> str:
        parts = []
        if self.terminus:
            parts.append("terminus")
        if self.no_data:
            parts.append("no_data")
        return ";".join(parts)


@dataclass
class PredictConfig:
    """Tuning for sequence prediction: KDE shape plus store filtering."""

    bandwidth: float = DEFAULT_BANDWIDTH
    resolution: float = DEFAULT_RESOLUTION
    methods: set | None = None
    exclude: tuple = ()
    dedup: bool = False


def predict_sequence(sequence: str, k: int, store: TorsionStore,
                     config: PredictConfig | None = None,
                     grid_sink=None) -> list[AnglePrediction]:
    """Consolidate, estimate, and take the peak for every residue.

    Residues with zero defined observations come back flagged no_data
    with NaN angles.  grid_sink, when given, is called with
    (residue_index, DensityGrid) for every residue that has one.
    """
    cfg = config or PredictConfig()
    per_residue = consolidate(sequence, k, store, methods=cfg.methods,
                              exclude=cfg.exclude, dedup=cfg.dedup)
    last = len(sequence) - 1
    predictions = []
    for i, obs_list in enumerate(per_residue):
        terminus = i == 0 or i == last
        if not obs_list:
            predictions.append(AnglePrediction(
                index=i, residue=sequence[i],
                phi_star=math.nan, psi_star=math.nan,
                density_at_peak=math.nan, observation_count=0,
                window_size_used=k, terminus=terminus, no_data=True,
            ))
            continue
        grid = estimate_density(
            [(o.phi, o.psi) for o in obs_list],
            bandwidth=cfg.bandwidth, resolution=cfg.resolution,
        )
        phi_star, psi_star = argmax(grid)
        if grid_sink is not None:
            grid_sink(i, grid)
        predictions.append(AnglePrediction(
            index=i, residue=sequence[i],
            phi_star=phi_star, psi_star=psi_star,
            density_at_peak=float(grid.values.max()),
            observation_count=len(obs_list),
            window_size_used=k, terminus=terminus,
        ))
    return predictions


@dataclass
class RSpace:
    """Density plus the raw observations behind it for one k-mer offset."""

    kmer: str
    offset: int
    grid: DensityGrid
    observations: list  # DihedralObservation, store order


def export_rspace(kmer: str, offset: int, store: TorsionStore,
                  config: PredictConfig | None = None) -> RSpace:
    """Observation density of one k-mer position across the whole store.

    Raises NoMatches when the k-mer never occurs; offsets whose angles
    are all undefined raise EmptyObservations.
    """
    cfg = config or PredictConfig()
    k = len(kmer)
    if not 0 <= offset < k:
        raise ValueError(f"offset must be in [0, {k}), got {offset}")
    occurrences = store.find_kmer(kmer, methods=cfg.methods)
    occurrences = [o for o in occurrences if o.structure_id not in set(cfg.exclude)]
    if not occurrences:
        raise NoMatches(f"k-mer {kmer} not found in store")
    observations = []
    for occ in occurrences:
        phi, psi = store.get_torsions(occ, k)[offset]
        if math.isnan(phi) or math.isnan(psi):
            continue
        observations.append(DihedralObservation(
            phi=phi, psi=psi,
            structure_id=occ.structure_id, chain=occ.chain, model=occ.model,
            residue_position=occ.start + offset, window=0, offset=offset,
        ))
    grid = estimate_density(
        [(o.phi, o.psi) for o in observations],
        bandwidth=cfg.bandwidth, resolution=cfg.resolution,
    )
    return RSpace(kmer=kmer, offset=offset, grid=grid, observations=observations)


def write_grid_csv(grid: DensityGrid, path) -> None:
    """Dump a grid as phi,psi,density rows, row-major phi then psi."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["phi", "psi", "density"])
            centers = grid.centers()
            for i in range(grid.cells_per_axis):
                for j in range(grid.cells_per_axis):
                    writer.writerow([
                        f"{centers[i]:.4f}", f"{centers[j]:.4f}",
                        f"{grid.values[i, j]:.12g}",
                    ])
    except OSError as exc:
        raise IoFailure(f"cannot write grid file {path}: {exc}") from exc


def write_observations_csv(rspace: RSpace, path) -> None:
    """Dump an R-space's raw observations in the window-CSV format."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for o in rspace.observations:
                writer.writerow([
                    o.structure_id, o.chain, o.model, o.offset,
                    rspace.kmer[o.offset], format_angle(o.phi), format_angle(o.psi),
                ])
    except OSError as exc:
        raise IoFailure(f"cannot write observation file {path}: {exc}") from exc
