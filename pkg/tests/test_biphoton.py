import numpy as np
import pytest

from nlintsim.biphoton import (
    JointSpectrum,
    biphoton_exact,
    biphoton_gaussian,
    bandwidth_nm,
    fwhm_interpolated,
    joint_spectral_intensity,
    marginal_spectrum,
    schmidt_analysis,
    signal_spectrum,
)
from nlintsim.optics_model import (
    AnalysisError,
    CrystalParams,
    PumpPulse,
    SINC_GAUSS_ALPHA,
    make_frequency_grid,
    mgo_linbo3_crystal,
)

CRYSTAL = mgo_linbo3_crystal(5.0)


def no_walkoff_crystal(length_mm):
    return CrystalParams(
        length_mm=length_mm, D=-263.5, D_plus=0.0, N_i=7300.0,
        lambda_p_nm=532.0, lambda_s_nm=810.0, lambda_i_nm=1550.0,
    )


def separable_pump(crystal):
    # pump duration at which the Gaussian kernel factorizes exactly
    return PumpPulse(SINC_GAUSS_ALPHA * crystal.dl / (2.0 * np.sqrt(2.0)))


def weighted_correlation(js):
    w = np.outer(js.grid.weights_s, js.grid.weights_i)
    p = js.intensity * w
    p /= p.sum()
    ws = js.grid.omega_s[:, None]
    wi = js.grid.omega_i[None, :]
    ms, mi = (p * ws).sum(), (p * wi).sum()
    cov = (p * (ws - ms) * (wi - mi)).sum()
    vs = (p * (ws - ms) ** 2).sum()
    vi = (p * (wi - mi) ** 2).sum()
    return cov / np.sqrt(vs * vi)


# ---------------------------------------------------------------- kernels

def test_exact_kernel_peak():
    pump = PumpPulse(212.0)
    amp = biphoton_exact(CRYSTAL, pump, 0.0, 0.0)
    expected = CRYSTAL.sigma * CRYSTAL.length_mm * np.sqrt(212.0) / np.pi ** 0.25
    assert abs(amp) == pytest.approx(expected, rel=1e-12)
    assert amp.real == pytest.approx(0.0, abs=1e-15)  # leading factor is i


def test_exact_kernel_first_zero():
    pump = PumpPulse(212.0)
    w0 = 2.0 * np.pi / CRYSTAL.dl  # anti-diagonal first zero
    peak = abs(biphoton_exact(CRYSTAL, pump, 0.0, 0.0))
    assert abs(biphoton_exact(CRYSTAL, pump, w0, -w0)) < 1e-12 * peak


def test_exact_kernel_correlation_regimes():
    # pump walk-off set to zero: long pulses anti-correlate the pair,
    # ultrashort pulses correlate it
    crystal = no_walkoff_crystal(5.0)
    grid_cw = make_frequency_grid(crystal, PumpPulse(2119.0), 1024)
    corr_cw = weighted_correlation(
        joint_spectral_intensity("exact", crystal, PumpPulse(2119.0), grid_cw)
    )
    grid_fs = make_frequency_grid(crystal, PumpPulse(10.0), 1024)
    corr_fs = weighted_correlation(
        joint_spectral_intensity("exact", crystal, PumpPulse(10.0), grid_fs)
    )
    assert corr_cw < -0.8
    # sinc^2 side lobes dilute the coefficient relative to the Gaussian kernel
    assert corr_fs > 0.5


def test_gaussian_kernel_normalized_on_grid():
    pump = PumpPulse(212.0)
    grid = make_frequency_grid(CRYSTAL, pump, 1024)
    amp = biphoton_gaussian(CRYSTAL, pump, grid.omega_s[:, None], grid.omega_i[None, :])
    total = np.sum(np.abs(amp) ** 2 * np.outer(grid.weights_s, grid.weights_i))
    assert abs(total - 1.0) < 1e-4


def test_gaussian_kernel_factorizes_at_unit_gamma():
    pump = separable_pump(CRYSTAL)
    ws = np.linspace(-0.02, 0.02, 9)[:, None]
    wi = np.linspace(-0.02, 0.02, 9)[None, :]
    lhs = biphoton_gaussian(CRYSTAL, pump, ws, wi) * biphoton_gaussian(CRYSTAL, pump, 0.0, 0.0)
    rhs = biphoton_gaussian(CRYSTAL, pump, ws, 0.0) * biphoton_gaussian(CRYSTAL, pump, 0.0, wi)
    assert np.allclose(lhs, rhs, rtol=1e-12)


def test_exact_kernel_phase_flag_is_observable_free():
    # the optional separable propagation phase moves no intensity and no
    # Schmidt weight
    pump = PumpPulse(212.0)
    grid = make_frequency_grid(CRYSTAL, pump, 512)
    ws, wi = grid.omega_s[:, None], grid.omega_i[None, :]
    plain = biphoton_exact(CRYSTAL, pump, ws, wi)
    phased = biphoton_exact(CRYSTAL, pump, ws, wi, include_phase=True)
    assert np.allclose(np.abs(phased), np.abs(plain), rtol=1e-12)
    w = np.outer(grid.weights_s, grid.weights_i)

    def k_of(amp):
        m = amp * np.sqrt(w)
        m = m / np.linalg.norm(m)
        s = np.linalg.svd(m, compute_uv=False)
        lam = s ** 2
        return 1.0 / np.sum(lam ** 2)

    assert k_of(phased) == pytest.approx(k_of(plain), rel=1e-9)


def test_kernel_ratio_at_unit_mismatch():
    # peak-normalized Gaussian/exact ratio where dk L/2 = 1: exp(-alpha^2)/sinc(1)
    pump = PumpPulse(212.0)
    w = 2.0 / CRYSTAL.dl  # ws = -wi = w puts dk L/2 at exactly 1
    exact = abs(biphoton_exact(CRYSTAL, pump, w, -w)) / abs(
        biphoton_exact(CRYSTAL, pump, 0.0, 0.0)
    )
    gauss = biphoton_gaussian(CRYSTAL, pump, w, -w) / biphoton_gaussian(
        CRYSTAL, pump, 0.0, 0.0
    )
    ratio = gauss / exact
    expected = np.exp(-SINC_GAUSS_ALPHA ** 2) / (np.sin(1.0) / 1.0)
    assert ratio == pytest.approx(expected, rel=1e-9)
    assert ratio == pytest.approx(0.9662, abs=2e-3)


# ---------------------------------------------------------------- joint spectrum

def test_jsi_unit_quadrature_sum():
    pump = PumpPulse(212.0)
    grid = make_frequency_grid(CRYSTAL, pump, 512)
    for kernel in ("exact", "gaussian"):
        js = joint_spectral_intensity(kernel, CRYSTAL, pump, grid)
        assert js.normalized
        assert abs(js.quadrature_norm() - 1.0) < 1e-6


def test_jsi_swap_symmetry_gaussian():
    pump = PumpPulse(500.0)
    grid = make_frequency_grid(CRYSTAL, pump, 512)
    js = joint_spectral_intensity("gaussian", CRYSTAL, pump, grid)
    assert np.array_equal(js.intensity, js.intensity.T)


def test_jsi_orientation_regimes():
    # anti-diagonal ridge for quasi-CW, isotropic at the separable point,
    # diagonal ridge for ultrashort pumping
    crystal = CRYSTAL
    cases = [
        (PumpPulse.from_ps(100.0), 4096, lambda c: c < -0.9),
        (PumpPulse(212.0), 1024, lambda c: abs(c) < 0.05),
        (PumpPulse(10.0), 1024, lambda c: c > 0.9),
    ]
    for pump, n, check in cases:
        grid = make_frequency_grid(crystal, pump, n)
        corr = weighted_correlation(joint_spectral_intensity("gaussian", crystal, pump, grid))
        assert check(corr), f"T0={pump.t0_fs}: correlation {corr}"


def test_jsi_rejects_unknown_kernel():
    grid = make_frequency_grid(CRYSTAL, PumpPulse(212.0), 512)
    with pytest.raises(ValueError):
        joint_spectral_intensity("sinc2", CRYSTAL, PumpPulse(212.0), grid)


# ---------------------------------------------------------------- marginals

def test_marginal_matches_direct_quadrature():
    pump = PumpPulse(212.0)
    grid = make_frequency_grid(CRYSTAL, pump, 2048)
    js = joint_spectral_intensity("exact", CRYSTAL, pump, grid)
    from_grid = marginal_spectrum(js, CRYSTAL)
    direct = signal_spectrum(CRYSTAL, pump, kernel="exact")
    assert from_grid.fwhm_nm == pytest.approx(direct.fwhm_nm, rel=2e-3)


def test_marginal_requires_normalized():
    grid = make_frequency_grid(CRYSTAL, PumpPulse(212.0), 512)
    js = JointSpectrum(grid=grid, amplitude=np.ones((512, 512), dtype=complex))
    with pytest.raises(ValueError):
        marginal_spectrum(js, CRYSTAL)


def test_fwhm_requires_interior_peak():
    x = np.linspace(0.0, 1.0, 64)
    with pytest.raises(AnalysisError):
        fwhm_interpolated(x, x)  # monotone, peak at edge


def test_bandwidth_conversion():
    # 1 rad/fs about 810 nm
    assert bandwidth_nm(1.0, 810.0) == pytest.approx(
        810.0 ** 2 / (2 * np.pi * 299.792458), rel=1e-12
    )


def test_kernel_agreement_on_marginals():
    # Gaussian stand-in tracks the sinc marginal width to within 12 percent
    crystal = no_walkoff_crystal(5.0)
    pump = PumpPulse(100.0)
    f_exact = signal_spectrum(crystal, pump, kernel="exact").fwhm_nm
    f_gauss = signal_spectrum(crystal, pump, kernel="gaussian").fwhm_nm
    assert abs(f_gauss / f_exact - 1.0) <= 0.12


# ---------------------------------------------------------------- Schmidt

def test_schmidt_rank_one_input():
    grid = make_frequency_grid(CRYSTAL, PumpPulse(212.0), 512)
    f = np.exp(-((grid.omega_s / 0.01) ** 2))
    amp = np.outer(f, f).astype(complex)
    w = np.outer(grid.weights_s, grid.weights_i)
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2 * w))
    report = schmidt_analysis(JointSpectrum(grid=grid, amplitude=amp, normalized=True))
    assert report.schmidt_number_K == pytest.approx(1.0, abs=1e-9)
    assert report.entropy_bits == pytest.approx(0.0, abs=1e-9)


def test_schmidt_coefficients_sum_to_one():
    pump = PumpPulse(400.0)
    grid = make_frequency_grid(CRYSTAL, pump, 1024)
    report = schmidt_analysis(joint_spectral_intensity("gaussian", CRYSTAL, pump, grid))
    assert report.total == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.diff(report.coefficients) <= 0)
    assert report.schmidt_number_K >= 1.0


def test_schmidt_number_tracks_analytic_form():
    # two-Gaussian mode count: K = (gamma + 1/gamma)/2
    for gamma in (0.5, 2.0):
        t0 = SINC_GAUSS_ALPHA * CRYSTAL.dl / (2.0 * np.sqrt(2.0) * gamma)
        pump = PumpPulse(t0)
        grid = make_frequency_grid(CRYSTAL, pump, 512)
        report = schmidt_analysis(joint_spectral_intensity("gaussian", CRYSTAL, pump, grid))
        expected = (gamma + 1.0 / gamma) / 2.0
        assert report.schmidt_number_K == pytest.approx(expected, rel=1e-2)


def test_schmidt_scale_invariance():
    # (T0, L) -> (3 T0, 3 L) leaves gamma and hence K unchanged
    r1 = schmidt_analysis(
        joint_spectral_intensity(
            "gaussian", CRYSTAL, PumpPulse(400.0),
            make_frequency_grid(CRYSTAL, PumpPulse(400.0), 512),
        )
    )
    crystal3 = mgo_linbo3_crystal(15.0)
    r3 = schmidt_analysis(
        joint_spectral_intensity(
            "gaussian", crystal3, PumpPulse(1200.0),
            make_frequency_grid(crystal3, PumpPulse(1200.0), 512),
        )
    )
    assert r3.schmidt_number_K == pytest.approx(r1.schmidt_number_K, rel=1e-9)


def test_schmidt_near_unity_iff_numerically_rank_one():
    pump = separable_pump(CRYSTAL)
    grid = make_frequency_grid(CRYSTAL, pump, 512)
    report = schmidt_analysis(joint_spectral_intensity("gaussian", CRYSTAL, pump, grid))
    assert abs(report.schmidt_number_K - 1.0) < 1e-3
    lam = report.coefficients
    assert lam[1] / lam[0] < 1e-3 if lam.size > 1 else True
    assert report.entropy_bits < 0.02
    # converse: an entangled configuration has weighty higher modes
    t0 = SINC_GAUSS_ALPHA * CRYSTAL.dl / (2.0 * np.sqrt(2.0) * 2.0)  # gamma = 2
    pump2 = PumpPulse(t0)
    grid2 = make_frequency_grid(CRYSTAL, pump2, 512)
    rep2 = schmidt_analysis(joint_spectral_intensity("gaussian", CRYSTAL, pump2, grid2))
    assert abs(rep2.schmidt_number_K - 1.0) > 1e-3
    assert rep2.coefficients[1] / rep2.coefficients[0] > 1e-3
