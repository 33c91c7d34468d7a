"""Declarative scenario execution and the ``nlint-sim`` command line tool.

A scenario is a flat INI-style text file with sections crystal / pump /
geometry / sample / grid / scan / tasks / output. Parsing validates every
key, unit conversions happen once at the boundary, and a run writes one or
more data files per task plus a run manifest with convergence diagnostics.
Identical scenario text always produces bit-identical data files.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import biphoton, coherence, oct_scan
from .optics_model import (
    AnalysisError,
    BilayerSample,
    C_NM_FS,
    CrystalParams,
    GridResolutionError,
    InterferometerGeometry,
    NumericalConsistencyError,
    PumpPulse,
    SampleModel,
    TabulatedSample,
    UniformSample,
    make_frequency_grid,
    mgo_linbo3_crystal,
)

TASK_NAMES = ("joint_spectrum", "schmidt", "g1_scan", "oct_scan", "spectrum")
CONVERGENCE_GATE = 1e-4
WORKERS_ENV = "NLINT_SIM_WORKERS"

CRYSTAL_PRESETS = {
    "mgo_linbo3": mgo_linbo3_crystal,
}


class ScenarioError(ValueError):
    """Scenario text is syntactically or semantically invalid."""


@dataclass(frozen=True)
class ScanSpec:
    delta_z_min_mm: float | None = None
    delta_z_max_mm: float | None = None
    points: int | None = None
    fringes: bool = True


@dataclass(frozen=True)
class Scenario:
    crystal: CrystalParams
    pump: PumpPulse
    geometry: InterferometerGeometry
    synchronize: bool
    sample: SampleModel
    sample_file: str | None
    grid_points: int
    grid_half_width: float | None
    kernel: str
    scan: ScanSpec
    tasks: tuple
    output_dir: str
    output_format: str
    jsi_stride: int

    def effective_geometry(self) -> InterferometerGeometry:
        if self.synchronize:
            return coherence.synchronize_pump_path(self.geometry, self.crystal)
        return self.geometry


@dataclass(frozen=True)
class RunManifest:
    scenario_digest: str
    digest: str
    grid_points: int
    files: dict
    seconds: dict
    convergence: dict
    extras: dict

    @property
    def convergence_ok(self) -> bool:
        return not any(entry["flagged"] for entry in self.convergence.values())


# ---------------------------------------------------------------------------
# parsing

_SECTION_KEYS = {
    "crystal": {
        "preset", "length_mm", "sigma",
        "d_fs_per_mm", "d_plus_fs_per_mm", "n_i_fs_per_mm",
        "lambda_p_nm", "lambda_s_nm", "lambda_i_nm",
    },
    "pump": {"t0_fs", "t0_ps"},
    "geometry": {"z1_mm", "z2_mm", "z3_mm", "zp1_mm", "zp2_mm", "synchronize"},
    "sample": {
        "type", "r_abs", "r_phase_rad",
        "r0", "r1", "thickness_um", "n_slab", "n_before", "n_after",
        "file",
    },
    "grid": {"points", "half_width_rad_fs", "kernel"},
    "scan": {"delta_z_min_mm", "delta_z_max_mm", "points", "fringes"},
    "tasks": {"run"},
    "output": {"directory", "format", "jsi_stride"},
}

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _as_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: not a number: {raw!r}") from None


def _as_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: not an integer: {raw!r}") from None


def _as_bool(section: str, key: str, raw: str) -> bool:
    try:
        return _BOOL[raw.strip().lower()]
    except KeyError:
        raise ScenarioError(f"[{section}] {key}: not a boolean: {raw!r}") from None


def parse_scenario(text: str, base_dir: str | Path | None = None) -> Scenario:
    """Parse and validate scenario text into a Scenario.

    Unknown sections or keys are rejected; invariant violations are reported
    with their field path. ``base_dir`` anchors relative tabulated-sample
    paths.
    """
    cp = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"scenario syntax error: {exc}") from exc

    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ScenarioError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in _SECTION_KEYS[section]:
                raise ScenarioError(f"unknown key [{section}] {key}")

    def get(section, key, default=None):
        if cp.has_section(section) and key in cp[section]:
            return cp[section][key].strip()
        return default

    # crystal
    if not cp.has_section("crystal"):
        raise ScenarioError("missing required section [crystal]")
    preset = get("crystal", "preset")
    try:
        if preset is not None:
            if preset not in CRYSTAL_PRESETS:
                raise ScenarioError(
                    f"[crystal] preset: unknown preset {preset!r}; "
                    f"available: {', '.join(sorted(CRYSTAL_PRESETS))}"
                )
            length = _as_float("crystal", "length_mm", get("crystal", "length_mm", "5.0"))
            crystal = CRYSTAL_PRESETS[preset](length_mm=length)
            if get("crystal", "sigma") is not None:
                crystal = dataclasses.replace(
                    crystal, sigma=_as_float("crystal", "sigma", get("crystal", "sigma"))
                )
        else:
            required = (
                "length_mm", "d_fs_per_mm", "d_plus_fs_per_mm", "n_i_fs_per_mm",
                "lambda_p_nm", "lambda_s_nm", "lambda_i_nm",
            )
            missing = [k for k in required if get("crystal", k) is None]
            if missing:
                raise ScenarioError(
                    f"[crystal] missing keys without preset: {', '.join(missing)}"
                )
            crystal = CrystalParams(
                length_mm=_as_float("crystal", "length_mm", get("crystal", "length_mm")),
                D=_as_float("crystal", "d_fs_per_mm", get("crystal", "d_fs_per_mm")),
                D_plus=_as_float(
                    "crystal", "d_plus_fs_per_mm", get("crystal", "d_plus_fs_per_mm")
                ),
                N_i=_as_float("crystal", "n_i_fs_per_mm", get("crystal", "n_i_fs_per_mm")),
                lambda_p_nm=_as_float("crystal", "lambda_p_nm", get("crystal", "lambda_p_nm")),
                lambda_s_nm=_as_float("crystal", "lambda_s_nm", get("crystal", "lambda_s_nm")),
                lambda_i_nm=_as_float("crystal", "lambda_i_nm", get("crystal", "lambda_i_nm")),
                sigma=_as_float("crystal", "sigma", get("crystal", "sigma", "0.01")),
            )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"[crystal] invalid parameters: {exc}") from exc

    # pump
    if not cp.has_section("pump"):
        raise ScenarioError("missing required section [pump]")
    t0_fs = get("pump", "t0_fs")
    t0_ps = get("pump", "t0_ps")
    if (t0_fs is None) == (t0_ps is None):
        raise ScenarioError("[pump] give exactly one of t0_fs or t0_ps")
    try:
        if t0_fs is not None:
            pump = PumpPulse(t0_fs=_as_float("pump", "t0_fs", t0_fs))
        else:
            pump = PumpPulse.from_ps(_as_float("pump", "t0_ps", t0_ps))
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"[pump] invalid parameters: {exc}") from exc

    # geometry
    zp2_raw = get("geometry", "zp2_mm")
    sync_raw = get("geometry", "synchronize")
    if zp2_raw is not None and sync_raw is not None and _as_bool(
        "geometry", "synchronize", sync_raw
    ):
        raise ScenarioError("[geometry] zp2_mm conflicts with synchronize = true")
    synchronize = (
        _as_bool("geometry", "synchronize", sync_raw)
        if sync_raw is not None
        else zp2_raw is None
    )
    try:
        geometry = InterferometerGeometry(
            z1_mm=_as_float("geometry", "z1_mm", get("geometry", "z1_mm", "0.0")),
            z2_mm=_as_float("geometry", "z2_mm", get("geometry", "z2_mm", "0.0")),
            z3_mm=_as_float("geometry", "z3_mm", get("geometry", "z3_mm", "0.0")),
            zp1_mm=_as_float("geometry", "zp1_mm", get("geometry", "zp1_mm", "0.0")),
            zp2_mm=_as_float("geometry", "zp2_mm", zp2_raw or "0.0"),
        )
    except ValueError as exc:
        raise ScenarioError(f"[geometry] invalid parameters: {exc}") from exc

    # sample
    sample_file = None
    stype = get("sample", "type", "uniform")
    try:
        if stype == "uniform":
            r_abs = _as_float("sample", "r_abs", get("sample", "r_abs", "1.0"))
            r_phase = _as_float("sample", "r_phase_rad", get("sample", "r_phase_rad", "0.0"))
            sample: SampleModel = UniformSample(r=r_abs * np.exp(1j * r_phase))
        elif stype == "bilayer":
            thickness = get("sample", "thickness_um")
            n_slab = get("sample", "n_slab")
            if thickness is None or n_slab is None:
                raise ScenarioError("[sample] bilayer needs thickness_um and n_slab")
            d0 = _as_float("sample", "thickness_um", thickness)
            n0 = _as_float("sample", "n_slab", n_slab)
            if get("sample", "r0") is not None:
                if get("sample", "r1") is None:
                    raise ScenarioError("[sample] bilayer with r0 also needs r1")
                sample = BilayerSample(
                    r0=_as_float("sample", "r0", get("sample", "r0")),
                    r1=_as_float("sample", "r1", get("sample", "r1")),
                    d0_um=d0,
                    n0=n0,
                    omega_carrier=crystal.omega_i0,
                )
            else:
                n_before = _as_float("sample", "n_before", get("sample", "n_before", "1.0"))
                n_after = get("sample", "n_after")
                if n_after is None:
                    raise ScenarioError(
                        "[sample] bilayer needs either (r0, r1) or n_after"
                    )
                sample = BilayerSample.from_fresnel(
                    n_before=n_before,
                    n_slab=n0,
                    n_after=_as_float("sample", "n_after", n_after),
                    d0_um=d0,
                    omega_carrier=crystal.omega_i0,
                )
        elif stype == "tabulated":
            sample_file = get("sample", "file")
            if sample_file is None:
                raise ScenarioError("[sample] tabulated needs file")
            path = Path(base_dir or ".") / sample_file
            if not path.exists():
                raise ScenarioError(f"[sample] file: no such file: {path}")
            table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
            if table.shape[1] < 3:
                raise ScenarioError(
                    "[sample] file must have columns omega_rad_fs, r_real, r_imag"
                )
            sample = TabulatedSample(
                omega=tuple(table[:, 0]),
                r=tuple(table[:, 1] + 1j * table[:, 2]),
            )
        else:
            raise ScenarioError(
                f"[sample] type: unknown type {stype!r} "
                "(expected uniform, bilayer or tabulated)"
            )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"[sample] invalid parameters: {exc}") from exc

    # grid
    grid_points = _as_int("grid", "points", get("grid", "points", "2048"))
    if grid_points < 256:
        raise ScenarioError("[grid] points must be at least 256")
    hw = get("grid", "half_width_rad_fs")
    grid_half_width = _as_float("grid", "half_width_rad_fs", hw) if hw else None
    kernel = get("grid", "kernel", "exact")
    if kernel not in ("exact", "gaussian"):
        raise ScenarioError(f"[grid] kernel: expected exact or gaussian, got {kernel!r}")

    # scan
    lo_raw, hi_raw = get("scan", "delta_z_min_mm"), get("scan", "delta_z_max_mm")
    if (lo_raw is None) != (hi_raw is None):
        raise ScenarioError("[scan] give both delta_z_min_mm and delta_z_max_mm or neither")
    lo = _as_float("scan", "delta_z_min_mm", lo_raw) if lo_raw else None
    hi = _as_float("scan", "delta_z_max_mm", hi_raw) if hi_raw else None
    if lo is not None and lo >= hi:
        raise ScenarioError("[scan] delta_z_min_mm must be below delta_z_max_mm")
    pts_raw = get("scan", "points")
    scan = ScanSpec(
        delta_z_min_mm=lo,
        delta_z_max_mm=hi,
        points=_as_int("scan", "points", pts_raw) if pts_raw else None,
        fringes=_as_bool("scan", "fringes", get("scan", "fringes", "true")),
    )

    # tasks
    run_raw = get("tasks", "run")
    if not run_raw:
        raise ScenarioError("missing [tasks] run = <task, ...>")
    tasks = tuple(t.strip() for t in run_raw.split(",") if t.strip())
    if not tasks:
        raise ScenarioError("[tasks] run: at least one task required")
    for t in tasks:
        if t not in TASK_NAMES:
            raise ScenarioError(
                f"[tasks] run: unknown task {t!r} (expected one of {', '.join(TASK_NAMES)})"
            )
    if len(set(tasks)) != len(tasks):
        raise ScenarioError("[tasks] run: duplicate task names")

    # output
    fmt = get("output", "format", "csv")
    if fmt not in ("csv", "json"):
        raise ScenarioError(f"[output] format: expected csv or json, got {fmt!r}")
    stride = _as_int("output", "jsi_stride", get("output", "jsi_stride", "1"))
    if stride < 1:
        raise ScenarioError("[output] jsi_stride must be >= 1")

    return Scenario(
        crystal=crystal,
        pump=pump,
        geometry=geometry,
        synchronize=synchronize,
        sample=sample,
        sample_file=sample_file,
        grid_points=grid_points,
        grid_half_width=grid_half_width,
        kernel=kernel,
        scan=scan,
        tasks=tasks,
        output_dir=get("output", "directory", "out"),
        output_format=fmt,
        jsi_stride=stride,
    )


def render_scenario(scenario: Scenario) -> str:
    """Canonical scenario text; parse(render(s)) == s."""
    c = scenario.crystal
    lines = [
        "[crystal]",
        f"length_mm = {c.length_mm!r}",
        f"d_fs_per_mm = {c.D!r}",
        f"d_plus_fs_per_mm = {c.D_plus!r}",
        f"n_i_fs_per_mm = {c.N_i!r}",
        f"lambda_p_nm = {c.lambda_p_nm!r}",
        f"lambda_s_nm = {c.lambda_s_nm!r}",
        f"lambda_i_nm = {c.lambda_i_nm!r}",
        f"sigma = {c.sigma!r}",
        "",
        "[pump]",
        f"t0_fs = {scenario.pump.t0_fs!r}",
        "",
        "[geometry]",
        f"z1_mm = {scenario.geometry.z1_mm!r}",
        f"z2_mm = {scenario.geometry.z2_mm!r}",
        f"z3_mm = {scenario.geometry.z3_mm!r}",
        f"zp1_mm = {scenario.geometry.zp1_mm!r}",
    ]
    if scenario.synchronize:
        lines.append("synchronize = true")
    else:
        lines.append(f"zp2_mm = {scenario.geometry.zp2_mm!r}")
        lines.append("synchronize = false")
    lines.append("")
    lines.append("[sample]")
    s = scenario.sample
    if isinstance(s, UniformSample):
        lines += [
            "type = uniform",
            f"r_abs = {float(abs(s.r))!r}",
            f"r_phase_rad = {float(np.angle(s.r))!r}",
        ]
    elif isinstance(s, BilayerSample):
        lines += [
            "type = bilayer",
            f"r0 = {s.r0!r}",
            f"r1 = {s.r1!r}",
            f"thickness_um = {s.d0_um!r}",
            f"n_slab = {s.n0!r}",
        ]
    else:
        if scenario.sample_file is None:
            raise ScenarioError("tabulated sample has no source file to render")
        lines += ["type = tabulated", f"file = {scenario.sample_file}"]
    lines += [
        "",
        "[grid]",
        f"points = {scenario.grid_points}",
        f"kernel = {scenario.kernel}",
    ]
    if scenario.grid_half_width is not None:
        lines.append(f"half_width_rad_fs = {scenario.grid_half_width!r}")
    lines += ["", "[scan]"]
    if scenario.scan.delta_z_min_mm is not None:
        lines.append(f"delta_z_min_mm = {scenario.scan.delta_z_min_mm!r}")
        lines.append(f"delta_z_max_mm = {scenario.scan.delta_z_max_mm!r}")
    if scenario.scan.points is not None:
        lines.append(f"points = {scenario.scan.points}")
    lines.append(f"fringes = {'true' if scenario.scan.fringes else 'false'}")
    lines += [
        "",
        "[tasks]",
        f"run = {', '.join(scenario.tasks)}",
        "",
        "[output]",
        f"directory = {scenario.output_dir}",
        f"format = {scenario.output_format}",
        f"jsi_stride = {scenario.jsi_stride}",
        "",
    ]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# exports

def _fmt9(x) -> str:
    return format(float(x), ".9g")


def export_series(columns: list[str], rows, fmt: str) -> str:
    """Serialize a column-oriented series; CSV header row or a JSON object.

    Floats carry 9 significant digits; an empty series yields just the header.
    """
    if fmt == "csv":
        out = [",".join(columns)]
        for row in rows:
            out.append(",".join(_fmt9(v) for v in row))
        return "\n".join(out) + "\n"
    if fmt == "json":
        payload = {
            "columns": list(columns),
            "rows": [[float(_fmt9(v)) for v in row] for row in rows],
        }
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"unknown export format {fmt!r}")


def _series_name(base: str, fmt: str) -> str:
    return f"{base}.{fmt}"


def _jsi_csv(js: biphoton.JointSpectrum, stride: int) -> str:
    ws = js.grid.omega_s[::stride]
    wi = js.grid.omega_i[::stride]
    inten = js.intensity[::stride, ::stride]
    lines = ["omega_s\\omega_i," + ",".join(_fmt9(v) for v in wi)]
    for k, row in enumerate(inten):
        lines.append(_fmt9(ws[k]) + "," + ",".join(_fmt9(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# task execution

def _scan_window(scenario: Scenario) -> tuple[float, float] | None:
    if scenario.scan.delta_z_min_mm is None:
        return None
    return (scenario.scan.delta_z_min_mm, scenario.scan.delta_z_max_mm)


def _grid(scenario: Scenario, points: int):
    return make_frequency_grid(
        scenario.crystal, scenario.pump, points, half_width=scenario.grid_half_width
    )


def _task_joint_spectrum(scenario: Scenario, points: int):
    js = biphoton.joint_spectral_intensity(
        scenario.kernel, scenario.crystal, scenario.pump, _grid(scenario, points)
    )
    files = {"joint_spectrum.csv": _jsi_csv(js, scenario.jsi_stride)}
    # convergence: coarsen the grid when still resolvable, otherwise compare the
    # grid marginal bandwidth against the pump-adaptive reference quadrature
    m_fine = biphoton.marginal_spectrum(js, scenario.crystal).fwhm_nm
    try:
        coarse = biphoton.joint_spectral_intensity(
            scenario.kernel, scenario.crystal, scenario.pump,
            _grid(scenario, max(256, points // 2)),
        )
        m_coarse = biphoton.marginal_spectrum(coarse, scenario.crystal).fwhm_nm
        delta = abs(m_fine - m_coarse) / m_fine
        method = "coarsen"
    except GridResolutionError:
        ref = biphoton.signal_spectrum(scenario.crystal, scenario.pump, scenario.kernel)
        delta = abs(m_fine - ref.fwhm_nm) / ref.fwhm_nm
        method = "reference"
    extras = {"marginal_fwhm_nm": float(m_fine)}
    return files, {"delta": float(delta), "method": method}, extras


def _task_schmidt(scenario: Scenario, points: int):
    js = biphoton.joint_spectral_intensity(
        scenario.kernel, scenario.crystal, scenario.pump, _grid(scenario, points)
    )
    report = biphoton.schmidt_analysis(js)
    coeffs = [float(v) for v in report.coefficients if v > 1e-12]
    payload = {
        "coefficients": coeffs,
        "schmidt_number_K": float(report.schmidt_number_K),
        "entropy_bits": float(report.entropy_bits),
    }
    files = {"schmidt.json": json.dumps(payload, indent=2) + "\n"}
    try:
        coarse = biphoton.schmidt_analysis(
            biphoton.joint_spectral_intensity(
                scenario.kernel, scenario.crystal, scenario.pump,
                _grid(scenario, max(256, points // 2)),
            )
        )
        delta = abs(report.schmidt_number_K - coarse.schmidt_number_K) / report.schmidt_number_K
        method = "coarsen"
    except GridResolutionError:
        delta = float("nan")
        method = "unavailable"
    flagged_extra = {"schmidt_number_K": float(report.schmidt_number_K)}
    return files, {"delta": float(delta), "method": method}, flagged_extra


def _task_g1_scan(scenario: Scenario, points: int):
    crystal, pump = scenario.crystal, scenario.pump
    geometry = scenario.effective_geometry()
    window = _scan_window(scenario)
    dz = oct_scan.scan_axis(
        crystal, scenario.sample, fringes=False,
        n_points=scenario.scan.points or 401, window_mm=window,
    )
    resolution = points / 2048.0
    g = coherence.g1_scan(
        crystal, pump, geometry, scenario.sample, dz,
        resolution=resolution, include_carrier=True,
    )
    rows = list(zip(dz, np.abs(g), np.angle(g)))
    name = _series_name("g1_scan", scenario.output_format)
    files = {name: export_series(["delta_z_mm", "g1_abs", "g1_phase"], rows, scenario.output_format)}
    sub = dz[:: max(1, dz.size // 64)]
    g_half = coherence.g1_scan(
        crystal, pump, geometry, scenario.sample, sub,
        resolution=resolution / 2.0, include_carrier=False,
    )
    g_sub = coherence.g1_scan(
        crystal, pump, geometry, scenario.sample, sub,
        resolution=resolution, include_carrier=False,
    )
    delta = float(np.max(np.abs(np.abs(g_sub) - np.abs(g_half))))
    return files, {"delta": delta, "method": "halved-resolution"}, {}


def _task_oct_scan(scenario: Scenario, points: int):
    crystal, pump = scenario.crystal, scenario.pump
    geometry = scenario.effective_geometry()
    window = _scan_window(scenario)
    dz = oct_scan.scan_axis(
        crystal, scenario.sample, fringes=scenario.scan.fringes,
        n_points=scenario.scan.points, window_mm=window,
    )
    if isinstance(scenario.sample, BilayerSample):
        ifg = oct_scan.interferogram_bilayer(
            crystal, pump, geometry, scenario.sample, dz, fringes=scenario.scan.fringes
        )
        conv = {"delta": 0.0, "method": "analytic"}
    else:
        resolution = points / 2048.0
        ifg = oct_scan.interferogram_numeric(
            crystal, pump, geometry, scenario.sample, dz,
            fringes=scenario.scan.fringes, resolution=resolution,
        )
        sub = dz[:: max(1, dz.size // 64)]
        a = oct_scan.interferogram_numeric(
            crystal, pump, geometry, scenario.sample, sub,
            fringes=False, resolution=resolution,
        )
        b = oct_scan.interferogram_numeric(
            crystal, pump, geometry, scenario.sample, sub,
            fringes=False, resolution=resolution / 2.0,
        )
        conv = {
            "delta": float(np.max(np.abs(a.flux - b.flux)) / ifg.n_signal),
            "method": "halved-resolution",
        }
    flux_norm = ifg.flux / ifg.n_signal
    rows = list(zip(ifg.delta_z_mm, flux_norm, ifg.envelope))
    name = _series_name("interferogram", scenario.output_format)
    files = {
        name: export_series(
            ["delta_z_mm", "flux_norm", "envelope"], rows, scenario.output_format
        )
    }
    report = oct_scan.envelope_peaks(ifg)
    files["peaks.json"] = json.dumps(
        {
            "positions_mm": list(report.positions_mm),
            "separations_um": list(report.separations_um),
            "fwhm_um": list(report.fwhm_um),
            "resolved": report.resolved,
        },
        indent=2,
    ) + "\n"
    extras = {
        "n_peaks": len(report.positions_mm),
        "resolved": report.resolved,
    }
    return files, conv, extras


def _task_spectrum(scenario: Scenario, points: int):
    crystal = scenario.crystal
    spectrum = biphoton.signal_spectrum(crystal, scenario.pump, kernel=scenario.kernel)
    omega_s0 = crystal.omega_s0
    lam_nm = 2.0 * np.pi * C_NM_FS / (omega_s0 + spectrum.omega_s)
    rows = list(zip(spectrum.omega_s, lam_nm, spectrum.density))
    name = _series_name("spectrum", scenario.output_format)
    files = {
        name: export_series(
            ["omega_s_rad_fs", "wavelength_nm", "density"], rows, scenario.output_format
        )
    }
    half = biphoton.signal_spectrum(
        crystal, scenario.pump, kernel=scenario.kernel, resolution=0.5
    )
    delta = abs(spectrum.fwhm_nm - half.fwhm_nm) / spectrum.fwhm_nm
    return (
        files,
        {"delta": float(delta), "method": "halved-resolution"},
        {"fwhm_nm": float(spectrum.fwhm_nm)},
    )


_TASK_FN = {
    "joint_spectrum": _task_joint_spectrum,
    "schmidt": _task_schmidt,
    "g1_scan": _task_g1_scan,
    "oct_scan": _task_oct_scan,
    "spectrum": _task_spectrum,
}


def run_scenario(
    scenario: Scenario,
    out_dir: str | Path | None = None,
    grid_points: int | None = None,
) -> RunManifest:
    """Execute every task of a scenario and write its outputs plus manifest.

    Deterministic: identical scenario text yields bit-identical data files and
    an identical manifest digest. Tasks run concurrently when the
    NLINT_SIM_WORKERS environment variable is above 1. On task failure its
    partial outputs are removed and the error is re-raised annotated with the
    task name.
    """
    points = grid_points if grid_points is not None else scenario.grid_points
    target = Path(out_dir) if out_dir is not None else Path(scenario.output_dir)
    try:
        target.mkdir(parents=True, exist_ok=True)
        probe = target / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ScenarioError(f"output directory not writable: {target}: {exc}") from exc

    def run_one(task: str):
        t0 = time.perf_counter()
        try:
            files, conv, extras = _TASK_FN[task](scenario, points)
        except Exception as exc:
            raise type(exc)(f"task {task}: {exc}") from exc
        return task, files, conv, extras, time.perf_counter() - t0

    workers = int(os.environ.get(WORKERS_ENV, "1") or "1")
    results = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for task, files, conv, extras, secs in pool.map(run_one, scenario.tasks):
                results[task] = (files, conv, extras, secs)
    else:
        for task in scenario.tasks:
            task, files, conv, extras, secs = run_one(task)
            results[task] = (files, conv, extras, secs)

    manifest_files: dict = {}
    seconds: dict = {}
    convergence: dict = {}
    extras_all: dict = {}
    hashes = []
    for task in scenario.tasks:
        files, conv, extras, secs = results[task]
        written = []
        tmp = None
        try:
            for name, content in sorted(files.items()):
                tmp = target / (name + ".tmp")
                tmp.write_text(content)
                os.replace(tmp, target / name)
                tmp = None
                written.append(name)
                hashes.append((name, hashlib.sha256(content.encode()).hexdigest()))
        except OSError:
            if tmp is not None:
                tmp.unlink(missing_ok=True)
            for name in written:
                (target / name).unlink(missing_ok=True)
            raise
        manifest_files[task] = written
        seconds[task] = round(secs, 6)
        conv["flagged"] = bool(
            np.isfinite(conv["delta"]) and conv["delta"] > CONVERGENCE_GATE
        )
        conv["gate"] = CONVERGENCE_GATE
        convergence[task] = conv
        extras_all[task] = extras

    canonical = render_scenario(scenario)
    scen_digest = hashlib.sha256(canonical.encode()).hexdigest()
    h = hashlib.sha256(canonical.encode())
    for name, digest in sorted(hashes):
        h.update(f"{name}:{digest}".encode())
    manifest = RunManifest(
        scenario_digest=scen_digest,
        digest=h.hexdigest(),
        grid_points=points,
        files=manifest_files,
        seconds=seconds,
        convergence=convergence,
        extras=extras_all,
    )
    payload = dataclasses.asdict(manifest)
    (target / "run_manifest.json").write_text(json.dumps(payload, indent=2) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# command line

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlint-sim",
        description="Induced-coherence nonlinear interferometer simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario", help="path to scenario text file")
    p_run.add_argument("--out", default=None, help="output directory override")
    p_run.add_argument("--grid-points", type=int, default=None, help="grid size override")
    p_run.add_argument("--format", choices=("csv", "json"), default=None,
                       help="series format override")
    sub.add_parser("presets", help="list built-in crystal presets")
    args = parser.parse_args(argv)

    if args.command == "presets":
        for name in sorted(CRYSTAL_PRESETS):
            c = CRYSTAL_PRESETS[name](length_mm=1.0)
            print(
                f"{name}: pump {c.lambda_p_nm:g} nm -> {c.lambda_s_nm:g} + "
                f"{c.lambda_i_nm:g} nm, D = {c.D:g} fs/mm, D+ = {c.D_plus:g} fs/mm"
            )
        return 0

    path = Path(args.scenario)
    if not path.exists():
        print(f"error: no such scenario file: {path}", file=sys.stderr)
        return 1
    try:
        scenario = parse_scenario(path.read_text(), base_dir=path.parent)
        if args.format:
            scenario = dataclasses.replace(scenario, output_format=args.format)
        manifest = run_scenario(
            scenario, out_dir=args.out, grid_points=args.grid_points
        )
    except (ScenarioError, GridResolutionError, AnalysisError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalConsistencyError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out) if args.out else Path(scenario.output_dir)
    for task in scenario.tasks:
        entry = manifest.convergence[task]
        state = "FLAGGED" if entry["flagged"] else "ok"
        print(
            f"{task}: {', '.join(manifest.files[task])} "
            f"(convergence {entry['delta']:.3g}, {entry['method']}, {state})"
        )
    print(f"manifest: {out / 'run_manifest.json'} digest {manifest.digest[:16]}")
    if not manifest.convergence_ok:
        print("error: grid convergence gate exceeded", file=sys.stderr)
        return 2
    return 0


def cli_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    cli_entry()
