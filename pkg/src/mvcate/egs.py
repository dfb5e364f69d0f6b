"""Semi-synthetic geothermal-well benchmark.

A well delivers ``Q_well = Q_frac * L / d * eta(d)``: per-fracture heat
output ``Q_frac`` times the number of fractures ``L / d`` (lateral length
over fracture spacing) times a spacing efficiency. The treatment is the
lateral length on a 13-point grid, normalised to [0, 1]; the outcome is
``log Q_well``. Because ``Q_well`` is linear in ``L``, the true CATE of
moving from ``L_0`` to ``L_k`` is the constant ``log(L_k / L_0)``.

Fracture tables are read from CSV or built from a smooth power-law
surrogate over the full factorial parameter grid. The surrogate is a
stand-in for an external reservoir simulator and makes no claim to match
its values.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .core import GroundTruth, ObservationalSample, TreatmentLevels

FRACTURE_COLUMNS = (
    "frac_length_ft",
    "frac_height_ft",
    "frac_width_in",
    "frac_perm_md",
    "k_min_md",
    "k_max_md",
    "por_min",
    "por_max",
    "pore_pressure_psi",
    "q_fracture",
)
COVARIATE_NAMES = FRACTURE_COLUMNS[:-1] + ("spacing_ft", "efficiency")

# closed ranges accepted at ingestion
COLUMN_RANGES = {
    "frac_length_ft": (100.0, 1000.0),
    "frac_height_ft": (50.0, 500.0),
    "frac_width_in": (0.1, 0.2),
    "frac_perm_md": (19000.0, 85000.0),
    "k_min_md": (0.0054, 0.314),
    "k_max_md": (0.0054, 0.314),
    "por_min": (0.0054, 0.314),
    "por_max": (0.0054, 0.314),
    "pore_pressure_psi": (5000.0, 9000.0),
    "q_fracture": (0.0, np.inf),
}

LATERAL_LENGTHS = tuple(float(v) for v in range(2000, 14001, 1000))
SPACINGS = (100.0, 200.0, 300.0, 400.0, 500.0)

GRID_LENGTHS = tuple(float(v) for v in range(100, 1001, 100))
GRID_HEIGHTS = tuple(float(v) for v in range(50, 501, 50))
GRID_WIDTHS = (0.1, 0.2)
GRID_FRAC_PERMS = (30000.0, 85000.0, 19000.0)
GRID_RESERVOIR_PAIRS = ((0.0054, 0.0157), (0.054, 0.157), (0.109, 0.314))
GRID_PRESSURES = (5000.0, 7000.0, 9000.0)


class SchemaError(ValueError):
    pass


# --------------------------------------------------------------------------
# fracture tables
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FractureTable:
    """Rows of fracture/reservoir parameters with their heat output."""

    values: np.ndarray  # (rows, 10), columns as FRACTURE_COLUMNS

    def __post_init__(self):
        V = np.array(self.values, dtype=float)
        if V.ndim != 2 or V.shape[1] != len(FRACTURE_COLUMNS):
            raise SchemaError(f"expected {len(FRACTURE_COLUMNS)} columns")
        if V.shape[0] == 0:
            raise SchemaError("table has no rows")
        for j, name in enumerate(FRACTURE_COLUMNS):
            lo, hi = COLUMN_RANGES[name]
            bad = np.flatnonzero(~np.isfinite(V[:, j]) | (V[:, j] < lo) | (V[:, j] > hi))
            if name == "q_fracture":
                bad = np.flatnonzero(~np.isfinite(V[:, j]) | (V[:, j] <= 0))
            if bad.size:
                raise SchemaError(f"row {bad[0] + 1}: {name} = {V[bad[0], j]} outside [{lo}, {hi}]")
        V.setflags(write=False)
        object.__setattr__(self, "values", V)

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, FRACTURE_COLUMNS.index(name)]

    @property
    def features(self) -> np.ndarray:
        return self.values[:, :-1]

    @property
    def q_fracture(self) -> np.ndarray:
        return self.values[:, -1]

    @property
    def fracture_area(self) -> np.ndarray:
        return self.column("frac_length_ft") * self.column("frac_height_ft")

    def lookup(self) -> dict:
        """Map from the nine parameter values to ``q_fracture``."""
        return {tuple(row[:-1]): row[-1] for row in self.values.tolist()}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(FRACTURE_COLUMNS)
        for row in self.values.tolist():
            writer.writerow([repr(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text

    def __eq__(self, other) -> bool:
        return isinstance(other, FractureTable) and np.array_equal(self.values, other.values)

    __hash__ = None


def _parse_rows(text: str, columns: tuple[str, ...]) -> np.ndarray:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise SchemaError("empty file: header row required")
    header = [h.strip() for h in header]
    missing = [c for c in columns if c not in header]
    if missing:
        raise SchemaError(f"missing columns {missing}")
    idx = [header.index(c) for c in columns]
    rows = []
    for line_no, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise SchemaError(f"row {line_no}: expected {len(header)} cells, got {len(rec)}")
        try:
            rows.append([float(rec[i]) for i in idx])
        except ValueError:
            raise SchemaError(f"row {line_no}: non-numeric cell") from None
    if not rows:
        raise SchemaError("no data rows")
    return np.asarray(rows, dtype=float)


def ingest_csv(path_or_text) -> FractureTable:
    """Read a fracture table (header required; columns as FRACTURE_COLUMNS)."""
    text = _read_text(path_or_text)
    values = _parse_rows(text, FRACTURE_COLUMNS)
    try:
        return FractureTable(values)
    except SchemaError as err:
        # report file line numbers (header is line 1)
        msg = str(err)
        if msg.startswith("row "):
            n, rest = msg[4:].split(":", 1)
            msg = f"row {int(n) + 1}:{rest}"
        raise SchemaError(msg) from None


def _read_text(path_or_text) -> str:
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        return Path(path_or_text).read_text()
    return str(path_or_text)


def surrogate_q_fracture(params) -> np.ndarray:
    """Smooth positive heat output for rows of the nine fracture parameters.

    A product of power laws in fracture length, height, width and
    permeability, mean reservoir permeability and porosity, and pore
    pressure, scaled to single-fracture magnitudes.
    """
    P = np.atleast_2d(np.asarray(params, dtype=float))
    length, height, width, kf, kmin, kmax, pmin, pmax, pressure = P.T
    return (
        50.0
        * (length / 500.0) ** 0.6
        * (height / 250.0) ** 0.4
        * (width / 0.15) ** 0.2
        * (kf / 30000.0) ** 0.1
        * (0.5 * (kmin + kmax) / 0.1) ** 0.15
        * (0.5 * (pmin + pmax) / 0.1) ** 0.2
        * (pressure / 7000.0) ** 0.3
    )


def surrogate_fracture_model(seed: int | None = None) -> FractureTable:
    """Full factorial parameter grid with surrogate heat outputs.

    The grid is deterministic; ``seed`` is accepted for interface symmetry
    and, when given, adds 1% multiplicative log-normal jitter to the outputs.
    """
    rows = []
    for length, height, width, kf, (kmin, kmax), (pmin, pmax), pressure in itertools.product(
        GRID_LENGTHS, GRID_HEIGHTS, GRID_WIDTHS, GRID_FRAC_PERMS,
        GRID_RESERVOIR_PAIRS, GRID_RESERVOIR_PAIRS, GRID_PRESSURES,
    ):
        rows.append((length, height, width, kf, kmin, kmax, pmin, pmax, pressure))
    P = np.asarray(rows, dtype=float)
    q = surrogate_q_fracture(P)
    if seed is not None:
        q = q * np.exp(0.01 * np.random.default_rng(seed).standard_normal(q.size))
    return FractureTable(np.column_stack([P, q]))


# --------------------------------------------------------------------------
# spacing efficiency and well output
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EfficiencyCurve:
    """Piecewise-linear efficiency in fracture spacing, clamped outside the knots."""

    spacings: tuple[float, ...]
    efficiencies: tuple[float, ...]

    def __post_init__(self):
        s = np.asarray(self.spacings, dtype=float)
        e = np.asarray(self.efficiencies, dtype=float)
        if s.shape != e.shape or s.size == 0:
            raise ValueError("need matching, non-empty spacing and efficiency knots")
        if np.any(np.diff(s) <= 0):
            raise ValueError("spacings must be strictly increasing")
        if np.any(np.diff(e) < 0):
            raise ValueError("efficiency must be non-decreasing in spacing")
        if np.any(e <= 0) or np.any(e > 1):
            raise ValueError("efficiency must lie in (0, 1]")
        object.__setattr__(self, "spacings", tuple(s.tolist()))
        object.__setattr__(self, "efficiencies", tuple(e.tolist()))

    def __call__(self, spacing) -> np.ndarray:
        return np.interp(np.asarray(spacing, dtype=float), self.spacings, self.efficiencies)

    @classmethod
    def from_csv(cls, path_or_text) -> "EfficiencyCurve":
        vals = _parse_rows(_read_text(path_or_text), ("spacing_ft", "efficiency"))
        order = np.argsort(vals[:, 0])
        return cls(tuple(vals[order, 0]), tuple(vals[order, 1]))


# Illustrative monotone knots; replace with measured values via from_csv.
DEFAULT_EFFICIENCY = EfficiencyCurve(SPACINGS, (0.45, 0.7, 0.85, 0.95, 1.0))


@dataclass(frozen=True)
class WellDesign:
    lateral_length: float
    spacing: float

    def __post_init__(self):
        if self.lateral_length <= 0 or self.spacing <= 0:
            raise ValueError("lateral length and spacing must be positive")
        if self.lateral_length / self.spacing < 1:
            raise ValueError("lateral length must be at least one spacing")


def q_well(q_fracture, design: WellDesign, curve: EfficiencyCurve = DEFAULT_EFFICIENCY):
    """Well heat output from per-fracture output, design and spacing efficiency."""
    q = np.asarray(q_fracture, dtype=float)
    if np.any(q <= 0):
        raise ValueError("q_fracture must be positive")
    out = q * design.lateral_length / design.spacing * curve(design.spacing)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# observational sample
# --------------------------------------------------------------------------


class EgsDesign(str, Enum):
    RCT = "rct"
    PREFERENTIAL = "preferential"


@dataclass(frozen=True)
class EgsConfig:
    """Sampling settings.

    Under the preferential design a fraction ``selection_weight`` of the rows
    is split evenly over the 13 lateral lengths, level j drawing its wells
    from the j-th fracture-area stratum, so long wells get large fractures.
    The remaining rows pair a uniformly drawn table row with a uniformly
    drawn length.
    """

    n: int = 10_000
    seed: int = 0
    sigma: float = 0.05
    design: EgsDesign = EgsDesign.PREFERENTIAL
    selection_weight: float = 0.5
    lateral_lengths: tuple[float, ...] = LATERAL_LENGTHS
    spacings: tuple[float, ...] = SPACINGS

    def __post_init__(self):
        object.__setattr__(self, "design", EgsDesign(self.design))
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not 0 <= self.selection_weight < 1:
            raise ValueError("selection_weight must lie in [0, 1)")
        L = np.asarray(self.lateral_lengths, dtype=float)
        if L.size < 2 or np.any(np.diff(L) <= 0) or L[0] <= 0:
            raise ValueError("lateral lengths must be positive and strictly increasing")

    @property
    def K(self) -> int:
        return len(self.lateral_lengths) - 1

    @property
    def levels(self) -> TreatmentLevels:
        L = np.asarray(self.lateral_lengths, dtype=float)
        return TreatmentLevels(tuple(((L - L[0]) / (L[-1] - L[0])).tolist()))

    def length_of(self, t) -> np.ndarray:
        L = self.lateral_lengths
        return L[0] + np.asarray(t, dtype=float) * (L[-1] - L[0])


def area_strata(table: FractureTable, n_strata: int) -> tuple[np.ndarray, np.ndarray]:
    """Interior cut points on fracture area and the table share of each stratum."""
    area = table.fracture_area
    edges = np.quantile(area, np.arange(1, n_strata) / n_strata)
    s = np.searchsorted(edges, area, side="right")
    share = np.bincount(s, minlength=n_strata) / area.size
    return edges, share


def egs_gps(X, edges, share, K: int, w: float, design: EgsDesign) -> np.ndarray:
    """Exact (n, K+1) propensities given fracture-area strata.

    With stratum shares ``p_s`` the joint law of (row, level) mixes the
    uniform pairing with the stratum-matched one, giving
    ``r_j(x) = [(1 - w) + w 1{s(x) = j} / p_j] / [(1 - w)(K + 1) + w / p_s(x)]``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if EgsDesign(design) is EgsDesign.RCT or w == 0:
        return np.full((n, K + 1), 1.0 / (K + 1))
    s = np.searchsorted(edges, X[:, 0] * X[:, 1], side="right")
    num = np.full((n, K + 1), 1.0 - w)
    num[np.arange(n), s] += w / share[s]
    return num / num.sum(axis=1, keepdims=True)


def egs_mu(cfg: EgsConfig, q_lookup, curve: EfficiencyCurve, t: float, X) -> np.ndarray:
    """``log Q_well`` at normalised length ``t`` for covariate rows ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    q = q_lookup(X[:, :9])
    spacing = X[:, 9]
    return np.log(q) + np.log(cfg.length_of(t) / spacing) + np.log(curve(spacing))


def biased_sample(
    table: FractureTable,
    cfg: EgsConfig = EgsConfig(),
    curve: EfficiencyCurve = DEFAULT_EFFICIENCY,
) -> tuple[ObservationalSample, GroundTruth]:
    """Draw an observational well sample with exact nuisances.

    Covariates are the nine fracture/reservoir parameters, the spacing and
    its efficiency (11 columns, see COVARIATE_NAMES).
    """
    K = cfg.K
    if cfg.n > len(table) * len(cfg.spacings) * (K + 1):
        raise ValueError("n exceeds the number of distinct (row, spacing, length) combinations")
    rng = np.random.default_rng(cfg.seed)
    edges, share = area_strata(table, K + 1)
    if cfg.design is EgsDesign.PREFERENTIAL and np.any(share == 0):
        raise ValueError("fracture-area strata are degenerate for this table")
    strata = np.searchsorted(edges, table.fracture_area, side="right")

    w = cfg.selection_weight if cfg.design is EgsDesign.PREFERENTIAL else 0.0
    per_level = int(np.floor(w * cfg.n / (K + 1)))
    n_rand = cfg.n - (K + 1) * per_level
    rows = [rng.integers(0, len(table), size=n_rand)]
    levels = [rng.integers(0, K + 1, size=n_rand)]
    for j in range(K + 1 if per_level else 0):
        pool = np.flatnonzero(strata == j)
        rows.append(pool[rng.integers(0, pool.size, size=per_level)])
        levels.append(np.full(per_level, j))
    rows = np.concatenate(rows)
    T = np.concatenate(levels).astype(np.int64)
    perm = rng.permutation(cfg.n)
    rows, T = rows[perm], T[perm]
    spacing = np.asarray(cfg.spacings, dtype=float)[rng.integers(0, len(cfg.spacings), size=cfg.n)]

    X = np.column_stack([table.features[rows], spacing, curve(spacing)])
    q = table.q_fracture[rows]
    lengths = np.asarray(cfg.lateral_lengths, dtype=float)[T]
    signal = np.log(q) + np.log(lengths / spacing) + np.log(curve(spacing))
    noise = rng.normal(0.0, cfg.sigma, size=cfg.n) if cfg.sigma > 0 else np.zeros(cfg.n)
    lv = cfg.levels
    sample = ObservationalSample(X, T, signal + noise, lv)

    lookup = table.lookup()

    def q_lookup(P):
        try:
            return np.array([lookup[tuple(r)] for r in P.tolist()])
        except KeyError as err:
            raise ValueError(f"fracture parameters {err.args[0]} not in the table") from None

    truth = GroundTruth(
        levels=lv,
        outcome_fn=lambda t, Z: egs_mu(cfg, q_lookup, curve, t, Z),
        gps_fn=lambda Z: egs_gps(Z, edges, share, K, w, cfg.design),
        sigma=cfg.sigma,
        r_min=float(egs_gps(X, edges, share, K, w, cfg.design).min()),
        name=f"egs-{cfg.design.value}",
    )
    return sample, truth


def constant_log_ratio(cfg: EgsConfig) -> np.ndarray:
    """True CATEs ``log(L_k / L_0)`` for k = 1..K."""
    L = np.asarray(cfg.lateral_lengths, dtype=float)
    return np.log(L[1:] / L[0])
