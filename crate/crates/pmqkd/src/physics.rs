//! Closed-form SPDC biphoton correlation functions, width formulas and
//! pixel/physical unit conversions.
//!
//! The biphoton state is modelled as a double Gaussian in each plane: a
//! narrow width on the correlated coordinate (difference of positions, sum
//! of transverse momenta) and a broad width on the conjugate coordinate.
//! All widths stored in [`CorrelationWidths`] are amplitude-level widths;
//! squared-modulus densities are normalized so their 4D integral is 1,
//! which makes the pair rate `P` the single scale for all rates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{lit, Real};

/// Measurement plane: near field (position) or far field (momentum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    Position,
    Momentum,
}

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("alpha_const must lie in (0, 1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("entangled regime requires {narrow} < {broad}")]
    NotEntangled {
        narrow: &'static str,
        broad: &'static str,
    },
}

/// Physical description of the SPDC source.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SourceParams<T> {
    /// Pump beam width sigma_p at the crystal plane, in micrometers.
    pub pump_width_um: T,
    /// Nonlinear crystal length, in millimeters.
    pub crystal_length_mm: T,
    /// Pump wavelength, in nanometers.
    pub pump_wavelength_nm: T,
    /// Total SPDC pair rate per matched-plane configuration, pairs/s.
    pub pair_rate_per_s: T,
    /// Constant from the Gaussian approximation of the sinc phase matching.
    pub alpha_const: T,
}

impl<T: Real> SourceParams<T> {
    pub fn new(
        pump_width_um: T,
        crystal_length_mm: T,
        pump_wavelength_nm: T,
        pair_rate_per_s: T,
    ) -> Self {
        Self {
            pump_width_um,
            crystal_length_mm,
            pump_wavelength_nm,
            pair_rate_per_s,
            alpha_const: lit(0.455),
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let positives: [(&'static str, T); 4] = [
            ("pump_width_um", self.pump_width_um),
            ("crystal_length_mm", self.crystal_length_mm),
            ("pump_wavelength_nm", self.pump_wavelength_nm),
            ("pair_rate_per_s", self.pair_rate_per_s),
        ];
        for (name, value) in positives {
            if !(value > T::zero()) {
                return Err(PhysicsError::NonPositive {
                    name,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if !(self.alpha_const > T::zero() && self.alpha_const < T::one()) {
            return Err(PhysicsError::AlphaOutOfRange(
                self.alpha_const.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    }
}

/// The four amplitude-level Gaussian widths of the biphoton state.
///
/// Intensity-level histograms of the paired coordinates have per-axis
/// standard deviation `width / sqrt(2)`; the orthonormal quadrature axes
/// (sum and difference divided by sqrt(2)) have standard deviation
/// `width / 2`. That single convention is relied on by the event sampler
/// and the histogram fitters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrelationWidths<T> {
    /// Position correlation width delta_r, micrometers.
    pub delta_r_um: T,
    /// Position marginal width sigma_r, micrometers.
    pub sigma_r_um: T,
    /// Momentum correlation width delta_k, inverse micrometers.
    pub delta_k_inv_um: T,
    /// Momentum marginal width sigma_k, inverse micrometers.
    pub sigma_k_inv_um: T,
}

impl<T: Real> CorrelationWidths<T> {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let positives: [(&'static str, T); 4] = [
            ("delta_r_um", self.delta_r_um),
            ("sigma_r_um", self.sigma_r_um),
            ("delta_k_inv_um", self.delta_k_inv_um),
            ("sigma_k_inv_um", self.sigma_k_inv_um),
        ];
        for (name, value) in positives {
            if !(value > T::zero()) {
                return Err(PhysicsError::NonPositive {
                    name,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if !(self.delta_r_um < self.sigma_r_um) {
            return Err(PhysicsError::NotEntangled {
                narrow: "delta_r",
                broad: "sigma_r",
            });
        }
        if !(self.delta_k_inv_um < self.sigma_k_inv_um) {
            return Err(PhysicsError::NotEntangled {
                narrow: "delta_k",
                broad: "sigma_k",
            });
        }
        Ok(())
    }

    /// Narrow (correlated-coordinate) width for a plane.
    pub fn narrow(&self, plane: Plane) -> T {
        match plane {
            Plane::Position => self.delta_r_um,
            Plane::Momentum => self.delta_k_inv_um,
        }
    }

    /// Broad (marginal-coordinate) width for a plane.
    pub fn broad(&self, plane: Plane) -> T {
        match plane {
            Plane::Position => self.sigma_r_um,
            Plane::Momentum => self.sigma_k_inv_um,
        }
    }

    /// Widths reconstructed from fitted pixel-domain histogram widths,
    /// e.g. the measured 0.90 / 36.8 / 0.65 / 34.5 px values.
    pub fn from_pixel_fits(
        diff_r_px: T,
        sum_r_px: T,
        sum_k_px: T,
        diff_k_px: T,
        optics: &OpticsParams<T>,
    ) -> Self {
        Self {
            delta_r_um: px_to_position_width(diff_r_px, optics),
            sigma_r_um: px_to_position_width(sum_r_px, optics),
            delta_k_inv_um: px_to_momentum_width(sum_k_px, optics),
            sigma_k_inv_um: px_to_momentum_width(diff_k_px, optics),
        }
    }

    /// The measured correlation widths of the reference experiment.
    pub fn measured(optics: &OpticsParams<T>) -> Self {
        Self::from_pixel_fits(lit(0.90), lit(36.8), lit(0.65), lit(34.5), optics)
    }
}

/// Camera and imaging-system parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OpticsParams<T> {
    /// Camera pixel pitch, micrometers.
    pub pixel_pitch_um: T,
    /// Imaging magnification from the crystal plane onto the camera.
    pub magnification: T,
    /// Fourier lens focal length, millimeters.
    pub focal_length_mm: T,
    /// Down-converted photon wavelength, nanometers.
    pub spdc_wavelength_nm: T,
    /// Camera timing resolution (FWHM), nanoseconds.
    pub timing_resolution_ns: T,
}

impl<T: Real> Default for OpticsParams<T> {
    fn default() -> Self {
        Self {
            pixel_pitch_um: lit(55.0),
            magnification: lit(5.0),
            focal_length_mm: lit(300.0),
            spdc_wavelength_nm: lit(810.0),
            timing_resolution_ns: lit(8.0),
        }
    }
}

impl<T: Real> OpticsParams<T> {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let positives: [(&'static str, T); 5] = [
            ("pixel_pitch_um", self.pixel_pitch_um),
            ("magnification", self.magnification),
            ("focal_length_mm", self.focal_length_mm),
            ("spdc_wavelength_nm", self.spdc_wavelength_nm),
            ("timing_resolution_ns", self.timing_resolution_ns),
        ];
        for (name, value) in positives {
            if !(value > T::zero()) {
                return Err(PhysicsError::NonPositive {
                    name,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    /// Physical position per camera pixel at the crystal plane, µm/px.
    pub fn position_scale(&self) -> T {
        self.pixel_pitch_um / self.magnification
    }

    /// Transverse momentum per camera pixel at the far field, µm⁻¹/px.
    ///
    /// The far-field plane is demagnified onto the camera, so one pixel
    /// spans `pitch * M` at the lens focal plane; momentum follows from
    /// k = 2π/λ and the focal length.
    pub fn momentum_scale(&self) -> T {
        let two_pi = T::PI() * lit(2.0);
        let wave_number = two_pi / (self.spdc_wavelength_nm * lit(1e-3)); // µm⁻¹
        let focal_um = self.focal_length_mm * lit(1e3);
        self.pixel_pitch_um * self.magnification * wave_number / focal_um
    }

    /// Scale for a plane: µm/px (position) or µm⁻¹/px (momentum).
    pub fn plane_scale(&self, plane: Plane) -> T {
        match plane {
            Plane::Position => self.position_scale(),
            Plane::Momentum => self.momentum_scale(),
        }
    }
}

/// Theoretical correlation widths from the source parameters.
///
/// delta_k = 1/(2 sigma_p), delta_r = sqrt(2 alpha L lambda_p / pi), and the
/// Fourier relations sigma_k = 2/delta_r, sigma_r = 1/(2 delta_k).
pub fn compute_widths<T: Real>(src: &SourceParams<T>) -> Result<CorrelationWidths<T>, PhysicsError> {
    src.validate()?;
    let two = lit::<T>(2.0);
    let length_um = src.crystal_length_mm * lit(1e3);
    let lambda_um = src.pump_wavelength_nm * lit(1e-3);

    let delta_k = (two * src.pump_width_um).recip();
    let delta_r = (two * src.alpha_const * length_um * lambda_um / T::PI()).sqrt();
    let sigma_k = two / delta_r;
    let sigma_r = (two * delta_k).recip();

    let widths = CorrelationWidths {
        delta_r_um: delta_r,
        sigma_r_um: sigma_r,
        delta_k_inv_um: delta_k,
        sigma_k_inv_um: sigma_k,
    };
    widths.validate()?;
    Ok(widths)
}

/// Amplitude width in micrometers from a fitted pixel histogram width.
///
/// Fitted intensity widths convert to amplitude widths by sqrt(2); a pixel
/// maps to `pitch / M` at the crystal plane.
pub fn px_to_position_width<T: Real>(width_px: T, optics: &OpticsParams<T>) -> T {
    width_px * optics.position_scale() * lit::<T>(2.0).sqrt()
}

/// Amplitude width in inverse micrometers from a fitted pixel histogram width.
pub fn px_to_momentum_width<T: Real>(width_px: T, optics: &OpticsParams<T>) -> T {
    width_px * optics.momentum_scale() * lit::<T>(2.0).sqrt()
}

#[inline]
fn norm_sq<T: Real>(v: [T; 2]) -> T {
    v[0] * v[0] + v[1] * v[1]
}

/// |psi(r_s, r_i)|²: squared-modulus position-space biphoton density,
/// normalized so its 4D integral is 1 (units µm⁻⁴).
pub fn biphoton_intensity_position<T: Real>(
    r_s: [T; 2],
    r_i: [T; 2],
    w: &CorrelationWidths<T>,
) -> T {
    let diff = [r_s[0] - r_i[0], r_s[1] - r_i[1]];
    let sum = [r_s[0] + r_i[0], r_s[1] + r_i[1]];
    let delta2 = w.delta_r_um * w.delta_r_um;
    let sigma2 = w.sigma_r_um * w.sigma_r_um;
    let norm = lit::<T>(4.0) / (T::PI() * T::PI() * delta2 * sigma2);
    norm * (-norm_sq(diff) / delta2 - norm_sq(sum) / sigma2).exp()
}

/// |phi(k_s, k_i)|²: squared-modulus momentum-space biphoton density with
/// the narrow width on the anticorrelated sum coordinate (units µm⁴).
pub fn biphoton_intensity_momentum<T: Real>(
    k_s: [T; 2],
    k_i: [T; 2],
    w: &CorrelationWidths<T>,
) -> T {
    let sum = [k_s[0] + k_i[0], k_s[1] + k_i[1]];
    let diff = [k_s[0] - k_i[0], k_s[1] - k_i[1]];
    let delta2 = w.delta_k_inv_um * w.delta_k_inv_um;
    let sigma2 = w.sigma_k_inv_um * w.sigma_k_inv_um;
    let norm = lit::<T>(4.0) / (T::PI() * T::PI() * delta2 * sigma2);
    norm * (-norm_sq(sum) / delta2 - norm_sq(diff) / sigma2).exp()
}

/// Single-beam SPDC rate density p(chi) for one plane, normalized so the
/// integral over the plane equals the total pair rate P.
///
/// The density is Gaussian with 1/e² structure exp(-4|chi|²/(sigma²+delta²));
/// its per-axis intensity standard deviation is sqrt(sigma²+delta²)/(2 sqrt 2).
pub fn marginal_pair_rate<T: Real>(
    chi: [T; 2],
    plane: Plane,
    src: &SourceParams<T>,
    w: &CorrelationWidths<T>,
) -> T {
    let width_sq = marginal_width_sq(plane, w);
    let four = lit::<T>(4.0);
    let norm = four / (T::PI() * width_sq);
    src.pair_rate_per_s * norm * (-four * norm_sq(chi) / width_sq).exp()
}

/// sigma² + delta² for the requested plane.
pub fn marginal_width_sq<T: Real>(plane: Plane, w: &CorrelationWidths<T>) -> T {
    let (narrow, broad) = (w.narrow(plane), w.broad(plane));
    narrow * narrow + broad * broad
}
