"""Biphoton wavefunction on a frequency grid, marginals and Schmidt analysis.

Two kernels are provided. The exact kernel keeps the sinc phase matching and
the pump walk-off D_plus; the Gaussian kernel replaces sinc(x) by
exp(-(alpha x)^2) and sets D_plus = 0, which makes the two-mode structure
analytically Gaussian. Separable unit-modulus phase factors are omitted from
both since they drop out of every intensity and Schmidt observable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optics_model import (
    AnalysisError,
    C_NM_FS,
    CrystalParams,
    FrequencyGrid,
    NumericalConsistencyError,
    PumpPulse,
    SINC_GAUSS_ALPHA,
    TWO_PI,
    pump_amplitude,
    sinc,
)

NORMALIZATION_TOL = 1e-6


def biphoton_exact(
    crystal: CrystalParams,
    pump: PumpPulse,
    omega_s,
    omega_i,
    include_phase: bool = False,
):
    """Sinc-kernel pair amplitude i sigma L F(ws + wi) sinc(dk L / 2).

    ``include_phase`` multiplies in the separable first-order propagation
    phase exp[i (N_p wp + N_s ws + N_i wi) L] (detuning part only; the
    constant carrier phase is omitted). It cancels in |.|^2 and in Schmidt
    spectra and is off by default.
    """
    ws = np.asarray(omega_s, dtype=float)
    wi = np.asarray(omega_i, dtype=float)
    sig_l = crystal.sigma * crystal.length_mm
    amp = (
        1j
        * sig_l
        * pump_amplitude(pump, ws + wi)
        * sinc(crystal.phase_mismatch(ws, wi) * crystal.length_mm / 2.0)
    )
    if include_phase:
        n_s = crystal.N_i - crystal.D
        n_p = crystal.D_plus + (n_s + crystal.N_i) / 2.0
        amp = amp * np.exp(
            1j * (n_p * (ws + wi) + n_s * ws + crystal.N_i * wi) * crystal.length_mm
        )
    return amp


def biphoton_gaussian(crystal: CrystalParams, pump: PumpPulse, omega_s, omega_i):
    """Gaussian-approximated pair amplitude, analytically unit-normalized.

    (alpha T0 |D| L / (sqrt(2) pi))^(1/2)
        * exp[-(ws+wi)^2 T0^2 / 2] * exp[-alpha^2 (D L)^2 (ws-wi)^2 / 16]

    D_plus is ignored by construction.
    """
    ws = np.asarray(omega_s, dtype=float)
    wi = np.asarray(omega_i, dtype=float)
    t0 = pump.t0_fs
    dl = crystal.dl
    pref = np.sqrt(SINC_GAUSS_ALPHA * t0 * dl / (np.sqrt(2.0) * np.pi))
    return pref * np.exp(
        -0.5 * ((ws + wi) * t0) ** 2
        - (SINC_GAUSS_ALPHA * dl / 4.0) ** 2 * (ws - wi) ** 2
    )


@dataclass(frozen=True)
class JointSpectrum:
    """Discretized pair amplitude on a FrequencyGrid (signal rows, idler columns)."""

    grid: FrequencyGrid
    amplitude: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.amplitude.setflags(write=False)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def quadrature_norm(self) -> float:
        """Sum |amplitude|^2 dws dwi over the grid."""
        w = np.outer(self.grid.weights_s, self.grid.weights_i)
        return float(np.sum(self.intensity * w))


def joint_spectral_intensity(
    kernel: str,
    crystal: CrystalParams,
    pump: PumpPulse,
    grid: FrequencyGrid,
) -> JointSpectrum:
    """Pair amplitude on ``grid``, normalized to unit quadrature sum.

    ``kernel`` is "exact" or "gaussian".
    """
    ws = grid.omega_s[:, None]
    wi = grid.omega_i[None, :]
    if kernel == "exact":
        amp = biphoton_exact(crystal, pump, ws, wi)
    elif kernel == "gaussian":
        amp = biphoton_gaussian(crystal, pump, ws, wi).astype(complex)
    else:
        raise ValueError(f"unknown kernel {kernel!r}, expected 'exact' or 'gaussian'")
    w = np.outer(grid.weights_s, grid.weights_i)
    norm = np.sum(np.abs(amp) ** 2 * w)
    if norm <= 0:
        raise NumericalConsistencyError("joint spectrum has zero quadrature norm")
    return JointSpectrum(grid=grid, amplitude=amp / np.sqrt(norm), normalized=True)


@dataclass(frozen=True)
class SignalSpectrum:
    """Normalized signal marginal S(ws) with its measured bandwidth."""

    omega_s: np.ndarray
    density: np.ndarray
    fwhm_rad_fs: float
    fwhm_nm: float

    def __post_init__(self):
        self.omega_s.setflags(write=False)
        self.density.setflags(write=False)


def fwhm_interpolated(x: np.ndarray, y: np.ndarray) -> float:
    """Full width at half maximum with linear interpolation at the crossings.

    Raises AnalysisError when the peak sits at a grid edge or a half-maximum
    crossing is missing.
    """
    i = int(np.argmax(y))
    if i == 0 or i == y.size - 1:
        raise AnalysisError("peak at grid edge, FWHM undefined")
    half = y[i] / 2.0
    j = i
    while j > 0 and y[j] > half:
        j -= 1
    if y[j] > half:
        raise AnalysisError("left half-maximum crossing outside grid")
    xl = x[j] + (x[j + 1] - x[j]) * (half - y[j]) / (y[j + 1] - y[j])
    k = i
    while k < y.size - 1 and y[k] > half:
        k += 1
    if y[k] > half:
        raise AnalysisError("right half-maximum crossing outside grid")
    xr = x[k - 1] + (x[k] - x[k - 1]) * (half - y[k - 1]) / (y[k] - y[k - 1])
    return float(xr - xl)


def bandwidth_nm(fwhm_rad_fs: float, lambda0_nm: float) -> float:
    """Angular frequency FWHM [rad/fs] to wavelength FWHM [nm] about lambda0."""
    return lambda0_nm ** 2 * fwhm_rad_fs / (TWO_PI * C_NM_FS)


def marginal_spectrum(js: JointSpectrum, crystal: CrystalParams) -> SignalSpectrum:
    """Signal marginal S(ws) = sum_i |amp|^2 dwi of a normalized JointSpectrum."""
    if not js.normalized:
        raise ValueError("marginal_spectrum requires a normalized JointSpectrum")
    dens = js.intensity @ js.grid.weights_i
    width = fwhm_interpolated(js.grid.omega_s, dens)
    return SignalSpectrum(
        omega_s=js.grid.omega_s.copy(),
        density=dens,
        fwhm_rad_fs=width,
        fwhm_nm=bandwidth_nm(width, crystal.lambda_s_nm),
    )


def signal_spectrum(
    crystal: CrystalParams,
    pump: PumpPulse,
    kernel: str = "exact",
    n_signal: int = 4097,
    n_pump: int | None = None,
    resolution: float = 1.0,
) -> SignalSpectrum:
    """Signal marginal by direct quadrature in pump-centered variables.

    Integrates |amp(ws, wi)|^2 over wi after substituting u = ws + wi, which
    keeps the pump Gaussian resolved for arbitrarily narrowband pumps. This is
    the production marginal; ``marginal_spectrum`` on a square grid matches it
    wherever that grid is resolvable. ``resolution`` scales both axis
    densities at fixed spans.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    t0 = pump.t0_fs
    dl = crystal.dl
    if kernel == "exact":
        ridge = abs(1.0 - 2.0 * crystal.D_plus / crystal.D) / 2.0
        d_plus = crystal.D_plus
    elif kernel == "gaussian":
        ridge = 0.5
        d_plus = 0.0
    else:
        raise ValueError(f"unknown kernel {kernel!r}, expected 'exact' or 'gaussian'")
    half_s = max(24.0 / dl, 6.0 / t0) + ridge * 8.0 / t0
    n_signal = max(257, int(n_signal * resolution) | 1)
    ws = np.linspace(-half_s, half_s, n_signal)

    # pump-axis step: resolve both the Gaussian and the sinc variation in u
    b_u = abs(d_plus - crystal.D / 2.0) * crystal.length_mm / 2.0
    h_u = (min(0.5 / t0, np.pi / (8.0 * b_u)) if b_u > 0 else 0.5 / t0) / resolution
    half_u = 8.0 / t0
    if n_pump is None:
        n_pump = max(33, int(np.ceil(2.0 * half_u / h_u)) | 1)
    u = np.linspace(-half_u, half_u, n_pump)
    w_u = np.full(n_pump, u[1] - u[0])
    w_u[0] *= 0.5
    w_u[-1] *= 0.5
    gauss = (t0 / np.sqrt(np.pi)) * np.exp(-((u * t0) ** 2))

    dens = np.empty(n_signal)
    chunk = max(1, int(4e6 / n_pump))
    for a in range(0, n_signal, chunk):
        b = min(a + chunk, n_signal)
        wm = 2.0 * ws[a:b, None] - u[None, :]  # ws - wi
        arg = (d_plus * u[None, :] + crystal.D * wm / 2.0) * crystal.length_mm / 2.0
        if kernel == "exact":
            pm = sinc(arg) ** 2
        else:
            pm = np.exp(-2.0 * (SINC_GAUSS_ALPHA * arg) ** 2)
        dens[a:b] = pm @ (gauss * w_u)
    w_s = np.full(n_signal, ws[1] - ws[0])
    w_s[0] *= 0.5
    w_s[-1] *= 0.5
    dens = dens / np.sum(dens * w_s)
    width = fwhm_interpolated(ws, dens)
    return SignalSpectrum(
        omega_s=ws,
        density=dens,
        fwhm_rad_fs=width,
        fwhm_nm=bandwidth_nm(width, crystal.lambda_s_nm),
    )


@dataclass(frozen=True)
class SchmidtReport:
    """Squared Schmidt coefficients (descending), mode count K and entropy."""

    coefficients: np.ndarray
    schmidt_number_K: float
    entropy_bits: float

    def __post_init__(self):
        self.coefficients.setflags(write=False)

    @property
    def total(self) -> float:
        return float(np.sum(self.coefficients))


def schmidt_analysis(js: JointSpectrum) -> SchmidtReport:
    """Schmidt decomposition of the quadrature-weighted amplitude matrix.

    The amplitude is scaled by sqrt(dws dwi) so the singular values converge
    with grid refinement; lambda_n are the squared singular values,
    K = 1 / sum lambda^2, E = -sum lambda log2 lambda.
    """
    if not js.normalized:
        raise ValueError("schmidt_analysis requires a normalized JointSpectrum")
    m = js.amplitude * np.sqrt(
        np.outer(js.grid.weights_s, js.grid.weights_i)
    )
    try:
        svals = np.linalg.svd(m, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalConsistencyError(
            f"Schmidt decomposition failed on a {m.shape[0]}x{m.shape[1]} grid "
            f"(step_s={js.grid.step_s:.3e}, step_i={js.grid.step_i:.3e}): {exc}"
        ) from exc
    lam = svals ** 2
    lam = lam[lam > 1e-18]
    k = 1.0 / float(np.sum(lam ** 2))
    entropy = -float(np.sum(lam * np.log2(lam)))
    return SchmidtReport(
        coefficients=lam,
        schmidt_number_K=k,
        entropy_bits=max(entropy, 0.0),
    )
