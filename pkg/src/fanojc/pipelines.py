"""Figure-style sweep pipelines with deterministic CSV + manifest outputs.

Each pipeline runs the simulation engine over a configured grid, re-runs it
at n_max + 5 (the convergence gate), and packages the results as a labeled
table plus a manifest holding every physical constant that influenced the
run.  Sweep points are independent; with ``workers > 1`` they run on a
thread pool and are reassembled in grid order, so the output does not depend
on the worker count.
"""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, homodyne, liouville
from .config import RunConfig, serialize_config
from .jc_model import collapse_operators, gamma_eff, hamiltonian, ladder_spectrum

__all__ = [
    "SweepResult",
    "pipeline_ladder",
    "pipeline_spectrum",
    "pipeline_power_sweep",
    "pipeline_g2tau",
    "pipeline_bundling",
    "pipeline_detuning",
    "find_resonance",
    "run_pipeline",
    "PIPELINES",
]

CONVERGENCE_TOL = 1e-4
GATE_STEP = 5


@dataclass(frozen=True)
class SweepResult:
    """Labeled table of swept observables plus the manifest that produced it."""

    columns: tuple[str, ...]
    rows: np.ndarray
    manifest: dict

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.columns.index(name)
        except ValueError as exc:
            raise KeyError(f"no column {name!r}; have {self.columns}") from exc
        return self.rows[:, idx]

    def to_csv_text(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def write(self, base_path) -> tuple[Path, Path]:
        """Write ``<base>.csv`` and ``<base>.manifest.json`` side by side."""
        base = Path(base_path)
        if base.suffix == ".csv":
            base = base.with_suffix("")
        csv_path = base.with_suffix(".csv")
        manifest_path = base.with_suffix(".manifest.json")
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(self.to_csv_text(), encoding="utf-8")
        manifest_path.write_text(
            json.dumps(self.manifest, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        return csv_path, manifest_path


# -- shared machinery --------------------------------------------------------


def _map_ordered(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _run_points(point_fn, items, workers: int):
    """Run one function per grid point; failures become NaN rows + error notes."""

    def safe(indexed):
        i, item = indexed
        try:
            return i, point_fn(item), None
        except Exception as exc:  # noqa: BLE001 - failed points must be recorded
            return i, None, f"{type(exc).__name__}: {exc}"

    outcomes = _map_ordered(safe, list(enumerate(items)), workers)
    width = None
    for _, row, _ in outcomes:
        if row is not None:
            width = len(row)
            break
    if width is None:
        raise RuntimeError(
            f"every sweep point failed; first error: {outcomes[0][2]}"
        )
    rows, errors = [], []
    for i, row, message in outcomes:
        if row is None:
            rows.append([float("nan")] * width)
            errors.append({"row": i, "message": message})
        else:
            rows.append([float(v) for v in row])
    return rows, errors


def _max_drift(a: np.ndarray, b: np.ndarray) -> float:
    """Worst relative cell drift, with near-zero cells judged on column scale."""
    if a.shape != b.shape:
        return float("inf")
    drift = 0.0
    for j in range(a.shape[1]):
        col_a, col_b = a[:, j], b[:, j]
        nan_a, nan_b = np.isnan(col_a), np.isnan(col_b)
        if np.any(nan_a != nan_b):
            return float("inf")
        ok = ~nan_a
        if not np.any(ok):
            continue
        scale = max(float(np.max(np.abs(col_a[ok]))),
                    float(np.max(np.abs(col_b[ok]))), 1e-300)
        denom = np.maximum(np.maximum(np.abs(col_a[ok]), np.abs(col_b[ok])),
                           1e-6 * scale)
        drift = max(drift, float(np.max(np.abs(col_a[ok] - col_b[ok]) / denom)))
    return drift


def _gated(cfg: RunConfig, build, workers: int):
    """Run ``build(n_max)`` and, when gated, compare against n_max + GATE_STEP."""
    rows, errors = build(cfg.n_max, workers)
    convergence = {
        "enabled": bool(cfg.convergence_gate),
        "tolerance": CONVERGENCE_TOL,
        "n_max": cfg.n_max,
        "n_max_check": cfg.n_max + GATE_STEP,
        "max_relative_drift": None,
        "converged": None,
    }
    if cfg.convergence_gate:
        rows_check, _ = build(cfg.n_max + GATE_STEP, workers)
        dr = _max_drift(np.asarray(rows, dtype=float),
                        np.asarray(rows_check, dtype=float))
        convergence["max_relative_drift"] = dr
        convergence["converged"] = bool(dr < CONVERGENCE_TOL)
    return np.asarray(rows, dtype=float), errors, convergence


def _filter_columns(cfg: RunConfig, columns, rows, groups):
    """Drop columns whose mode/statistic group the config deselects."""
    tokens = cfg.statistic_tokens()
    keep = []
    for i, name in enumerate(columns):
        mode_tag, stat_tag = groups.get(name, (None, None))
        if mode_tag is not None and cfg.mode != "both" and mode_tag != cfg.mode:
            continue
        if stat_tag is not None and tokens and stat_tag not in tokens:
            continue
        keep.append(i)
    return tuple(columns[i] for i in keep), rows[:, keep]


def _manifest(pipeline: str, cfg: RunConfig, resolved: dict, columns, rows,
              convergence: dict, errors: list) -> dict:
    cfg_map = asdict(cfg)
    cfg_map["drives_over_gamma_eff"] = list(cfg.drives_over_gamma_eff)
    return {
        "pipeline": pipeline,
        "engine_version": __version__,
        "config": cfg_map,
        "config_sha256": hashlib.sha256(serialize_config(cfg).encode()).hexdigest(),
        "resolved": resolved,
        "columns": list(columns),
        "row_count": int(rows.shape[0]),
        "convergence": convergence,
        "errors": errors,
    }


def _laser_on_up1(cfg: RunConfig, delta: float) -> float:
    """Laser placement on the higher-energy polariton of the first manifold."""
    params = cfg.system_params(delta=delta, laser_detuning=0.0, drive=0.0)
    return ladder_spectrum(params, 1).energy("UP", 1)


def _steady(params):
    lv = liouville.liouvillian(hamiltonian(params), collapse_operators(params))
    return lv, liouville.steady_state(lv)


# -- pipelines ----------------------------------------------------------------


def pipeline_ladder(cfg: RunConfig, workers: int = 1) -> SweepResult:
    """Polariton energies, linewidths, and climb energies over a detuning grid."""
    cfg.validate()
    if cfg.sweep != "delta":
        raise ValueError("ladder pipeline sweeps the emitter-cavity detuning")
    n_top = min(3, cfg.n_manifolds)
    grid = cfg.grid_values()
    columns = ["delta_over_g"]
    for n in range(1, n_top + 1):
        columns += [
            f"up{n}_energy_over_g",
            f"lp{n}_energy_over_g",
            f"up{n}_fwhm_over_g",
            f"lp{n}_fwhm_over_g",
        ]
    for branch in ("up", "lp"):
        columns += [f"{branch}{n}_climb_over_g" for n in range(1, n_top + 1)]

    def build(n_max, workers_):
        def point(dg):
            params = cfg.system_params(
                delta=dg * cfg.g, laser_detuning=0.0, drive=0.0, n_max=n_max
            )
            spec = ladder_spectrum(params, n_top)
            row = [dg]
            for n in range(1, n_top + 1):
                row += [
                    spec.energy("UP", n) / cfg.g,
                    spec.energy("LP", n) / cfg.g,
                    spec.fwhm("UP", n) / cfg.g,
                    spec.fwhm("LP", n) / cfg.g,
                ]
            for branch in ("UP", "LP"):
                prev = 0.0
                for n in range(1, n_top + 1):
                    energy = spec.energy(branch, n)
                    row.append((energy - prev) / cfg.g)
                    prev = energy
            return row

        return _run_points(point, grid, workers_)

    rows, errors, convergence = _gated(cfg, build, workers)
    resolved = {
        "g": cfg.g,
        "kappa": cfg.kappa,
        "gamma": cfg.gamma,
        "n_manifolds": n_top,
        "energy_reference": "per excitation relative to the bare cavity",
    }
    manifest = _manifest("ladder", cfg, resolved, columns, rows, convergence, errors)
    return SweepResult(columns=tuple(columns), rows=rows, manifest=manifest)


def pipeline_spectrum(cfg: RunConfig, workers: int = 1) -> SweepResult:
    """Weak-drive transmission versus laser detuning, with and without homodyne."""
    cfg.validate()
    if cfg.sweep != "laser_detuning":
        raise ValueError("spectrum pipeline sweeps the laser detuning")
    geff = cfg.gamma_eff_value()
    drive = cfg.drive_over_gamma_eff * geff
    grid = cfg.grid_values()
    columns = ("laser_detuning_over_g", "t_blocking", "t_fano")
    groups = {"t_blocking": ("blocking", "transmission"),
              "t_fano": ("fano", "transmission")}

    def build(n_max, workers_):
        def point(dlg):
            params = cfg.system_params(
                laser_detuning=dlg * cfg.g, drive=drive, n_max=n_max
            )
            _, ss = _steady(params)
            t_b = homodyne.transmission(ss, homodyne.blocking_output_field(params))
            t_f = homodyne.transmission(ss, homodyne.optimal_output_field(params))
            return [dlg, t_b, t_f]

        return _run_points(point, grid, workers_)

    rows, errors, convergence = _gated(cfg, build, workers)
    kept_columns, kept_rows = _filter_columns(cfg, columns, rows, groups)
    resolved = {
        "g": cfg.g,
        "kappa": cfg.kappa,
        "gamma": cfg.gamma,
        "delta": cfg.delta,
        "gamma_eff": geff,
        "drive": drive,
        "flux_units": "photons/ns with prefactor scale^2 = output_fraction*kappa",
    }
    manifest = _manifest(
        "spectrum", cfg, resolved, kept_columns, kept_rows, convergence, errors
    )
    return SweepResult(columns=kept_columns, rows=kept_rows, manifest=manifest)


def pipeline_power_sweep(cfg: RunConfig, workers: int = 1) -> SweepResult:
    """Coherent/incoherent decomposition and g2(0) versus drive on the polariton.

    The laser sits on the first upper polariton; drives and fluxes are
    normalized by the effective polariton loss rate, and a two-level-system
    reference at the matched normalized drive is emitted alongside.
    """
    cfg.validate()
    if cfg.sweep != "drive":
        raise ValueError("power pipeline sweeps the drive strength")
    if cfg.grid != "log":
        raise ValueError("power pipeline requires a log drive grid")
    geff = cfg.gamma_eff_value()
    laser = _laser_on_up1(cfg, cfg.delta)
    grid = cfg.grid_values()
    columns = (
        "drive_over_gamma_eff",
        "i_coh_blocking",
        "i_inc_blocking",
        "i_coh_fano",
        "i_inc_fano",
        "i_coh_tls",
        "i_inc_tls",
        "g2_blocking",
        "g2_fano",
        "g2_tls",
    )
    groups = {
        "i_coh_blocking": ("blocking", "decomposition"),
        "i_inc_blocking": ("blocking", "decomposition"),
        "i_coh_fano": ("fano", "decomposition"),
        "i_inc_fano": ("fano", "decomposition"),
        "i_coh_tls": (None, "decomposition"),
        "i_inc_tls": (None, "decomposition"),
        "g2_blocking": ("blocking", "g2"),
        "g2_fano": ("fano", "g2"),
        "g2_tls": (None, "g2"),
    }

    def build(n_max, workers_):
        def point(m):
            drive = m * geff
            params = cfg.system_params(
                laser_detuning=laser, drive=drive, n_max=n_max
            )
            _, ss = _steady(params)
            f_blk = homodyne.blocking_output_field(params)
            f_fan = homodyne.optimal_output_field(params)
            dec_b = homodyne.decompose(ss, f_blk)
            dec_f = homodyne.decompose(ss, f_fan)
            tls = homodyne.tls_reference(drive, geff)
            return [
                m,
                dec_b.coherent / geff,
                dec_b.incoherent / geff,
                dec_f.coherent / geff,
                dec_f.incoherent / geff,
                tls.decomposition.coherent / geff,
                tls.decomposition.incoherent / geff,
                homodyne.g2_zero(ss, f_blk),
                homodyne.g2_zero(ss, f_fan),
                tls.g2_zero,
            ]

        return _run_points(point, grid, workers_)

    rows, errors, convergence = _gated(cfg, build, workers)
    kept_columns, kept_rows = _filter_columns(cfg, columns, rows, groups)
    resolved = {
        "g": cfg.g,
        "kappa": cfg.kappa,
        "gamma": cfg.gamma,
        "delta": cfg.delta,
        "gamma_eff": geff,
        "laser_detuning": laser,
        "laser_placement": "real part of the UP1 eigenvalue",
        "tls_reference": "decay gamma_eff, drive matched in units of its decay",
        "flux_units": "scale^2 units divided by gamma_eff",
    }
    manifest = _manifest(
        "power", cfg, resolved, kept_columns, kept_rows, convergence, errors
    )
    return SweepResult(columns=kept_columns, rows=kept_rows, manifest=manifest)


def pipeline_g2tau(cfg: RunConfig, workers: int = 1) -> SweepResult:
    """Delayed second-order coherence curves at fixed drives on a shared tau grid.

    The tau grid is configured in units of the polariton amplitude lifetime
    2/Gamma_eff; curves for blocking, homodyned, and two-level-reference
    fields are emitted per drive.
    """
    cfg.validate()
    if cfg.sweep != "tau":
        raise ValueError("g2tau pipeline sweeps the delay tau")
    if cfg.grid != "linear":
        raise ValueError("g2tau pipeline requires a linear tau grid")
    if cfg.start < 0:
        raise ValueError("tau grid must be non-negative")
    drives = cfg.drives_over_gamma_eff or (0.4, 5.0)
    geff = cfg.gamma_eff_value()
    laser = _laser_on_up1(cfg, cfg.delta)
    lifetime = 2.0 / geff
    taus_lt = cfg.grid_values()
    taus = taus_lt * lifetime
    columns = ["tau_lifetimes", "tau_ns"]
    groups = {}
    for i in range(1, len(drives) + 1):
        for mode, tag in (("blocking", "blocking"), ("fano", "fano"), ("tls", None)):
            name = f"g2_{mode}_drive{i}"
            columns.append(name)
            groups[name] = (tag, "g2")

    def build(n_max, workers_):
        def curve(task):
            mode, m = task
            drive = m * geff
            if mode == "tls":
                return homodyne.tls_reference(drive, geff, tau_grid=taus).g2_curve
            params = cfg.system_params(
                laser_detuning=laser, drive=drive, n_max=n_max
            )
            lv, ss = _steady(params)
            field = (
                homodyne.blocking_output_field(params)
                if mode == "blocking"
                else homodyne.optimal_output_field(params)
            )
            return liouville.g2_tau(lv, ss, field.matrix(), taus)

        tasks = [(mode, m) for m in drives for mode in ("blocking", "fano", "tls")]
        curves = _map_ordered(curve, tasks, workers_)
        rows = []
        for k, (t_lt, t_ns) in enumerate(zip(taus_lt, taus)):
            rows.append([t_lt, t_ns] + [float(c[k]) for c in curves])
        return rows, []

    rows, errors, convergence = _gated(cfg, build, workers)
    kept_columns, kept_rows = _filter_columns(cfg, tuple(columns), rows, groups)
    resolved = {
        "g": cfg.g,
        "kappa": cfg.kappa,
        "gamma": cfg.gamma,
        "delta": cfg.delta,
        "gamma_eff": geff,
        "laser_detuning": laser,
        "amplitude_lifetime_ns": lifetime,
        "drives_over_gamma_eff": list(drives),
        "drives_abs": [m * geff for m in drives],
    }
    manifest = _manifest(
        "g2tau", cfg, resolved, kept_columns, kept_rows, convergence, errors
    )
    return SweepResult(columns=kept_columns, rows=kept_rows, manifest=manifest)


def pipeline_bundling(cfg: RunConfig, workers: int = 1) -> SweepResult:
    """Transmission and two-photon bundle statistics over a laser-detuning scan.

    One column set per configured strong drive; the zero-linewidth two-photon
    resonance position (half the ground-to-second-manifold energy) is
    reported in the manifest as an analytic baseline.
    """
    cfg.validate()
    if cfg.sweep != "laser_detuning":
        raise ValueError("bundling pipeline sweeps the laser detuning")
    drives = cfg.drives_over_gamma_eff or (2.5, 5.0, 10.0)
    geff = cfg.gamma_eff_value()
    grid = cfg.grid_values()
    columns = ["laser_detuning_over_g"]
    groups = {}
    for i in range(1, len(drives) + 1):
        for stat, tag in (("t", "transmission"), ("g2n2", "g2n")):
            for mode in ("blocking", "fano"):
                name = f"{stat}_{mode}_drive{i}"
                columns.append(name)
                groups[name] = (mode, tag)

    def build(n_max, workers_):
        def point(dlg):
            row = [dlg]
            for m in drives:
                params = cfg.system_params(
                    laser_detuning=dlg * cfg.g, drive=m * geff, n_max=n_max
                )
                _, ss = _steady(params)
                f_blk = homodyne.blocking_output_field(params)
                f_fan = homodyne.optimal_output_field(params)
                row += [
                    homodyne.transmission(ss, f_blk),
                    homodyne.transmission(ss, f_fan),
                ]
                row += [
                    homodyne.bundling_g2n(ss, f_blk, 2, n_max=n_max),
                    homodyne.bundling_g2n(ss, f_fan, 2, n_max=n_max),
                ]
            return row

        return _run_points(point, grid, workers_)

    rows, errors, convergence = _gated(cfg, build, workers)
    kept_columns, kept_rows = _filter_columns(cfg, tuple(columns), rows, groups)
    baseline = (cfg.delta / 2 + np.sqrt(2 * cfg.g**2 + cfg.delta**2 / 4)) / 2
    resolved = {
        "g": cfg.g,
        "kappa": cfg.kappa,
        "gamma": cfg.gamma,
        "delta": cfg.delta,
        "gamma_eff": geff,
        "drives_over_gamma_eff": list(drives),
        "drives_abs": [m * geff for m in drives],
        "two_photon_baseline_over_g": float(baseline / cfg.g),
        "flux_units": "photons/ns with prefactor scale^2 = output_fraction*kappa",
    }
    manifest = _manifest(
        "bundling", cfg, resolved, kept_columns, kept_rows, convergence, errors
    )
    return SweepResult(columns=kept_columns, rows=kept_rows, manifest=manifest)


def pipeline_detuning(cfg: RunConfig, workers: int = 1) -> SweepResult:
    """Weak-excitation g2(0) and polariton transmission versus detuning.

    At each detuning the laser sits on the emitter-like (upper) polariton and
    the drive is the configured multiple of that polariton's loss rate, so
    the g2 columns are the weak-excitation plateau (minimum-over-drive)
    values.
    """
    cfg.validate()
    if cfg.sweep != "delta":
        raise ValueError("detuning pipeline sweeps the emitter-cavity detuning")
    grid = cfg.grid_values()
    columns = (
        "delta_over_g",
        "min_g2_blocking",
        "min_g2_fano",
        "transmission_blocking",
        "transmission_fano",
        "transmission_blocking_over_drive_sq",
        "transmission_fano_over_drive_sq",
    )
    groups = {
        "min_g2_blocking": ("blocking", "g2"),
        "min_g2_fano": ("fano", "g2"),
        "transmission_blocking": ("blocking", "transmission"),
        "transmission_fano": ("fano", "transmission"),
        "transmission_blocking_over_drive_sq": ("blocking", "transmission"),
        "transmission_fano_over_drive_sq": ("fano", "transmission"),
    }

    def build(n_max, workers_):
        def point(dg):
            delta = dg * cfg.g
            geff = cfg.gamma_eff_value(delta)
            laser = _laser_on_up1(cfg, delta)
            drive = cfg.drive_over_gamma_eff * geff
            params = cfg.system_params(
                delta=delta, laser_detuning=laser, drive=drive, n_max=n_max
            )
            _, ss = _steady(params)
            f_blk = homodyne.blocking_output_field(params)
            f_fan = homodyne.optimal_output_field(params)
            t_b = homodyne.transmission(ss, f_blk)
            t_f = homodyne.transmission(ss, f_fan)
            return [
                dg,
                homodyne.g2_zero(ss, f_blk),
                homodyne.g2_zero(ss, f_fan),
                t_b,
                t_f,
                t_b / drive**2,
                t_f / drive**2,
            ]

        return _run_points(point, grid, workers_)

    rows, errors, convergence = _gated(cfg, build, workers)
    kept_columns, kept_rows = _filter_columns(cfg, columns, rows, groups)
    resolved = {
        "g": cfg.g,
        "kappa": cfg.kappa,
        "gamma": cfg.gamma,
        "drive_over_gamma_eff": cfg.drive_over_gamma_eff,
        "laser_placement": "real part of the UP1 eigenvalue at each detuning",
        "drive_convention": "drive scales with gamma_eff(delta); raw fluxes "
        "inherit that scaling, *_over_drive_sq columns remove it",
    }
    manifest = _manifest(
        "detuning", cfg, resolved, kept_columns, kept_rows, convergence, errors
    )
    return SweepResult(columns=kept_columns, rows=kept_rows, manifest=manifest)


def find_resonance(
    result: SweepResult,
    column: str,
    kind: str,
    window: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """Locate a peak or dip of a swept column with parabolic refinement.

    The extremum must be interior to the (optionally windowed) grid; a
    boundary extremum raises, since the feature is not localized.
    """
    if kind not in ("peak", "dip"):
        raise ValueError("kind must be 'peak' or 'dip'")
    x = result.rows[:, 0]
    y = result.column(column)
    if window is not None:
        lo, hi = window
        mask = (x >= lo) & (x <= hi)
        if np.count_nonzero(mask) < 3:
            raise ValueError("window contains fewer than 3 grid points")
        x, y = x[mask], y[mask]
    if np.any(~np.isfinite(y)):
        raise ValueError(f"column {column!r} contains non-finite values")
    idx = int(np.argmax(y)) if kind == "peak" else int(np.argmin(y))
    if idx == 0 or idx == len(y) - 1:
        raise ValueError(
            f"{kind} of {column!r} sits on the grid boundary at x = {x[idx]!r}; "
            "widen the sweep"
        )
    xs = x[idx - 1 : idx + 2] - x[idx]
    ys = y[idx - 1 : idx + 2]
    a, b, c = np.polyfit(xs, ys, 2)
    if a == 0:
        return float(x[idx]), float(y[idx])
    x_ref = -b / (2 * a)
    y_ref = c - b * b / (4 * a)
    return float(x[idx] + x_ref), float(y_ref)


PIPELINES = {
    "ladder": pipeline_ladder,
    "spectrum": pipeline_spectrum,
    "power": pipeline_power_sweep,
    "g2tau": pipeline_g2tau,
    "bundling": pipeline_bundling,
    "detuning": pipeline_detuning,
}


def run_pipeline(name: str, cfg: RunConfig, workers: int = 1) -> SweepResult:
    if name not in PIPELINES:
        raise ValueError(f"unknown pipeline {name!r}; have {sorted(PIPELINES)}")
    return PIPELINES[name](cfg, workers=workers)
