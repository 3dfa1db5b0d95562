//! Two-point functions of the free scalar field.
//!
//! `dplus_quadrature` evaluates the mass-shell integral directly and is the
//! defining route; `dplus_closed_form` evaluates the Bessel-function layout
//! and carries an overall calibration constant measured against quadrature
//! (`measure_calibration`, a pure -1 in these conventions). The positive-
//! and negative-frequency parts are complex conjugates, so their sum, the
//! commutator function, is twice the real part and must vanish at spacelike
//! separation; that cancellation is the main correctness witness here.
//!
//! Points within `LIGHT_CONE_GUARD` of the cone are refused: the functions
//! are distribution-valued there and no finite sample is meaningful.

use num_complex::Complex64;

use crate::conventions::Conventions;
use crate::numerics::bessel;
use crate::numerics::fit::{fit_line, FitError, LineFit};
use crate::numerics::quadrature::{
    integrate_with, semi_infinite_oscillatory, AccuracyGoal, QuadratureError,
};
use crate::states::{gaussian_radial_integral, GaussianPacket, StatesError};

/// Smallest |t^2 - r^2| at which pointwise values are served.
pub const LIGHT_CONE_GUARD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct FourVector {
    pub t: f64,
    pub x: Vec<f64>,
}

impl FourVector {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        FourVector { t, x }
    }

    /// Purely radial separation along the first axis.
    pub fn radial(t: f64, r: f64, dims: u32) -> Self {
        let mut x = vec![0.0; dims as usize];
        x[0] = r;
        FourVector { t, x }
    }

    pub fn spatial_norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Invariant interval t^2 - |x|^2 in the (+,-,-,-) metric.
    pub fn interval(&self) -> f64 {
        self.t * self.t - self.x.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn negate(&self) -> FourVector {
        FourVector {
            t: -self.t,
            x: self.x.iter().map(|v| -v).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Spacelike,
    Timelike,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Quadrature,
    ClosedForm,
}

#[derive(Clone, Copy, Debug)]
pub struct PropagatorValue {
    pub value: Complex64,
    pub est_error: f64,
    pub branch: Branch,
}

#[derive(Clone, Copy, Debug)]
pub struct SmearedValue {
    pub value: Complex64,
    pub est_error: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum PropagatorError {
    #[error(
        "separation is within {guard:e} of the light cone (interval {interval:e}); \
         pointwise values are distribution-valued there"
    )]
    LightCone { interval: f64, guard: f64 },
    #[error("unsupported spatial dimension {0}; only 1 and 3 are implemented")]
    UnsupportedDimension(u32),
    #[error("vector has {got} spatial components but conventions fix {expected}")]
    DimensionMismatch { got: usize, expected: u32 },
    #[error("inputs must be finite")]
    NonFinite,
    #[error("closed form requires three spatial dimensions, got {0}")]
    ClosedFormDimension(u32),
    #[error("decay-fit samples must lie in [2/m, 8/m] = [{lo}, {hi}], got {got}")]
    DecayWindow { lo: f64, hi: f64, got: f64 },
    #[error("calibration ratio has an unexpectedly large imaginary part {0:e}")]
    CalibrationImaginary(f64),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error("fit failed: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    States(#[from] StatesError),
}

fn classify(x: &FourVector, conv: &Conventions) -> Result<(Branch, f64), PropagatorError> {
    if !x.t.is_finite() || x.x.iter().any(|v| !v.is_finite()) {
        return Err(PropagatorError::NonFinite);
    }
    if x.x.len() != conv.spatial_dims as usize {
        return Err(PropagatorError::DimensionMismatch {
            got: x.x.len(),
            expected: conv.spatial_dims,
        });
    }
    if conv.spatial_dims != 1 && conv.spatial_dims != 3 {
        return Err(PropagatorError::UnsupportedDimension(conv.spatial_dims));
    }
    let lambda = x.interval();
    if lambda.abs() < LIGHT_CONE_GUARD {
        return Err(PropagatorError::LightCone {
            interval: lambda,
            guard: LIGHT_CONE_GUARD,
        });
    }
    Ok(if lambda > 0.0 {
        (Branch::Timelike, lambda)
    } else {
        (Branch::Spacelike, lambda)
    })
}

/// Mass-shell integral I(t, r) = int d^Dk/(2 omega) e^{-i omega t + i k.x}
/// for t >= 0, reduced to radial form. Returns (value, error estimate).
fn radial_integral(
    t: f64,
    r: f64,
    conv: &Conventions,
    goal: AccuracyGoal,
) -> Result<(Complex64, f64), QuadratureError> {
    debug_assert!(t >= 0.0);
    let m = conv.mass;
    let cv = *conv;
    // stationary point of the outgoing phase k r - omega t, present when
    // the separation is timelike
    let lambda = t * t - r * r;
    let kstar = if t > r && lambda > 0.0 {
        m * r / lambda.sqrt()
    } else {
        0.0
    };
    match conv.spatial_dims {
        1 => {
            if r == 0.0 {
                // substitute omega = m + v^2: smooth amplitude, clean
                // quadratic phase
                let f = move |v: f64| {
                    Complex64::from_polar(2.0 / (v * v + 2.0 * m).sqrt(), -(m + v * v) * t)
                };
                let phase = move |v: f64| -(m + v * v) * t;
                let core = (24.0 * std::f64::consts::PI / t).sqrt() + (2.0 * m).sqrt();
                let q = semi_infinite_oscillatory(f, phase, core, &[], goal)?;
                return Ok((q.value, q.est_error));
            }
            // cos(kx) split into outgoing/ingoing exponentials, each with
            // its full phase
            let mut value = Complex64::new(0.0, 0.0);
            let mut est = 0.0;
            for sign in [1.0f64, -1.0] {
                let f = move |k: f64| {
                    Complex64::from_polar(1.0 / cv.omega(k), sign * k * r - cv.omega(k) * t)
                };
                let phase = move |k: f64| sign * k * r - cv.omega(k) * t;
                let core = 2.0 * kstar + 6.0 * m + 4.0 / (r + t);
                let q = semi_infinite_oscillatory(f, phase, core, &[], goal)?;
                value += q.value;
                est += q.est_error;
            }
            Ok((value / 2.0, est / 2.0))
        }
        3 => {
            let four_pi = 4.0 * std::f64::consts::PI;
            if r == 0.0 {
                // omega = m + v^2 again; amplitude v^2 sqrt(v^2 + 2m)
                let f = move |v: f64| {
                    Complex64::from_polar(
                        four_pi * v * v * (v * v + 2.0 * m).sqrt(),
                        -(m + v * v) * t,
                    )
                };
                let phase = move |v: f64| -(m + v * v) * t;
                let core = (24.0 * std::f64::consts::PI / t).sqrt() + (2.0 * m).sqrt();
                let q = semi_infinite_oscillatory(f, phase, core, &[], goal)?;
                return Ok((q.value, q.est_error));
            }
            // (2 pi / r) int k sin(kr)/omega e^{-i omega t} dk, sine split
            // into exponentials: I = -i (pi / r)(A - B)
            let mut diff = Complex64::new(0.0, 0.0);
            let mut est = 0.0;
            for sign in [1.0f64, -1.0] {
                let f = move |k: f64| {
                    Complex64::from_polar(k / cv.omega(k), sign * k * r - cv.omega(k) * t)
                };
                let phase = move |k: f64| sign * k * r - cv.omega(k) * t;
                let core = 2.0 * kstar + 6.0 * m + 4.0 / (r + t);
                let q = semi_infinite_oscillatory(f, phase, core, &[], goal)?;
                diff += sign * q.value;
                est += q.est_error;
            }
            let pref = std::f64::consts::PI / r;
            Ok((
                Complex64::new(0.0, -pref) * diff,
                pref * est,
            ))
        }
        _ => unreachable!(),
    }
}

/// Positive-frequency two-point function by direct mass-shell quadrature.
pub fn dplus_quadrature(
    x: &FourVector,
    conv: &Conventions,
) -> Result<PropagatorValue, PropagatorError> {
    let (branch, _) = classify(x, conv)?;
    let goal = AccuracyGoal::default();
    let r = x.spatial_norm();
    let (i_val, est) = radial_integral(x.t.abs(), r, conv, goal)?;
    let i_val = if x.t < 0.0 { i_val.conj() } else { i_val };
    let c = conv.contraction_norm;
    Ok(PropagatorValue {
        value: Complex64::new(0.0, -c) * i_val,
        est_error: c * est,
        branch,
    })
}

/// Bessel-function layout before calibration. Spacelike: i m K1(m sbar) /
/// (4 pi^2 sbar). Timelike: the sign variant of the Y1/J1 pair that keeps
/// the quadrature ratio constant across both branches.
fn closed_form_raw(x: &FourVector, conv: &Conventions) -> Result<(Complex64, Branch), PropagatorError> {
    let (branch, lambda) = classify(x, conv)?;
    if conv.spatial_dims != 3 {
        return Err(PropagatorError::ClosedFormDimension(conv.spatial_dims));
    }
    let m = conv.mass;
    let pi = std::f64::consts::PI;
    let value = match branch {
        Branch::Spacelike => {
            let sbar = (-lambda).sqrt();
            Complex64::new(0.0, m * bessel::k1(m * sbar) / (4.0 * pi * pi * sbar))
        }
        Branch::Timelike => {
            let tau = lambda.sqrt();
            let pref = m / (8.0 * pi * tau);
            let eps = if x.t >= 0.0 { 1.0 } else { -1.0 };
            // i * pref * (Y1 + i eps J1)
            Complex64::new(-eps * pref * bessel::j1(m * tau), pref * bessel::y1(m * tau))
        }
    };
    Ok((value, branch))
}

/// Positive-frequency two-point function from the closed-form layout,
/// scaled by the conventions' calibration constant.
pub fn dplus_closed_form(
    x: &FourVector,
    conv: &Conventions,
) -> Result<PropagatorValue, PropagatorError> {
    let (raw, branch) = closed_form_raw(x, conv)?;
    let value = raw * conv.closed_form_calibration;
    Ok(PropagatorValue {
        value,
        est_error: 1e-13 * value.norm(),
        branch,
    })
}

/// Negative-frequency part: the complex conjugate of the positive part.
pub fn dminus(
    x: &FourVector,
    conv: &Conventions,
    route: Route,
) -> Result<PropagatorValue, PropagatorError> {
    let d = match route {
        Route::Quadrature => dplus_quadrature(x, conv)?,
        Route::ClosedForm => dplus_closed_form(x, conv)?,
    };
    Ok(PropagatorValue {
        value: d.value.conj(),
        ..d
    })
}

/// Commutator function: sum of both frequency parts, twice the real part
/// of the positive one. Vanishes identically at spacelike separation.
pub fn pauli_jordan(
    x: &FourVector,
    conv: &Conventions,
    route: Route,
) -> Result<PropagatorValue, PropagatorError> {
    let d = match route {
        Route::Quadrature => dplus_quadrature(x, conv)?,
        Route::ClosedForm => dplus_closed_form(x, conv)?,
    };
    Ok(PropagatorValue {
        value: Complex64::new(2.0 * d.value.re, 0.0),
        est_error: 2.0 * d.est_error,
        branch: d.branch,
    })
}

/// Closed 1+1-dimensional contraction kernel C * I(t, x): K0 at spacelike
/// separation, the Y0/J0 pair inside the cone. Light-cone guarded.
pub fn two_point_kernel_1p1(
    t: f64,
    x: f64,
    conv: &Conventions,
) -> Result<PropagatorValue, PropagatorError> {
    let v = FourVector::new(t, vec![x]);
    let (branch, _) = classify(&v, conv)?;
    if conv.spatial_dims != 1 {
        return Err(PropagatorError::DimensionMismatch {
            got: 1,
            expected: conv.spatial_dims,
        });
    }
    let value = kernel_1p1_raw(t, x, conv.mass) * (2.0 * std::f64::consts::PI)
        * conv.contraction_norm;
    Ok(PropagatorValue {
        value,
        est_error: 1e-13 * value.norm(),
        branch,
    })
}

/// Unguarded 1+1 kernel including the contraction normalization; used as
/// the integrand of position-route overlaps where quadrature nodes may sit
/// arbitrarily close to the cone (the log singularity is integrable).
pub(crate) fn kernel_1p1_raw(t: f64, x: f64, m: f64) -> Complex64 {
    let lambda = t * t - x * x;
    let pi = std::f64::consts::PI;
    if lambda.abs() < 1e-300 {
        return Complex64::new(0.0, 0.0);
    }
    let i2 = if lambda < 0.0 {
        Complex64::new(bessel::k0(m * (-lambda).sqrt()), 0.0)
    } else {
        let tau = lambda.sqrt();
        let eps = if t >= 0.0 { 1.0 } else { -1.0 };
        Complex64::new(bessel::y0(m * tau), eps * bessel::j0(m * tau)) * (-pi / 2.0)
    };
    i2 / (2.0 * pi)
}

/// Overlap -i C int d^Dk/(2 omega) conj(f(k)) g(k) e^{-i omega (t_g - t_f)}
/// of two packets through the two-point function.
pub fn smeared_two_point(
    f: &GaussianPacket,
    g: &GaussianPacket,
    conv: &Conventions,
) -> Result<SmearedValue, PropagatorError> {
    if f.dims() != conv.spatial_dims || g.dims() != conv.spatial_dims {
        return Err(PropagatorError::DimensionMismatch {
            got: f.dims().max(g.dims()) as usize,
            expected: conv.spatial_dims,
        });
    }
    let goal = AccuracyGoal::default();
    let dt = g.t0 - f.t0;
    let c = conv.contraction_norm;
    let cv = *conv;
    match conv.spatial_dims {
        1 => {
            let lo = (f.k_center[0] - 20.0 * f.sigma_k).min(g.k_center[0] - 20.0 * g.sigma_k);
            let hi = (f.k_center[0] + 20.0 * f.sigma_k).max(g.k_center[0] + 20.0 * g.sigma_k);
            let (fc, gc) = (f.clone(), g.clone());
            let dxc = f.x_center[0] - g.x_center[0];
            let integrand = move |k: f64| {
                fc.amplitude(&[k]).conj() * gc.amplitude(&[k])
                    * Complex64::from_polar(1.0 / (2.0 * cv.omega(k)), -cv.omega(k) * dt)
            };
            let phase = move |k: f64| k * dxc - cv.omega(k) * dt;
            let q = integrate_with(&integrand, lo, hi, &[], Some(&phase), goal, 4000)?;
            Ok(SmearedValue {
                value: Complex64::new(0.0, -c) * q.value,
                est_error: c * q.est_error,
            })
        }
        3 => {
            // conj(f) g e^{-i omega dt} = Nf Ng exp(-a|k|^2 + k.w - beta) h(k)
            let sf2 = 4.0 * f.sigma_k * f.sigma_k;
            let sg2 = 4.0 * g.sigma_k * g.sigma_k;
            let a = 1.0 / sf2 + 1.0 / sg2;
            let mut ww = Complex64::new(0.0, 0.0);
            for i in 0..3 {
                let wi = Complex64::new(
                    2.0 * f.k_center[i] / sf2 + 2.0 * g.k_center[i] / sg2,
                    f.x_center[i] - g.x_center[i],
                );
                ww += wi * wi;
            }
            let s = ww.sqrt();
            let beta = f.k_center.iter().map(|v| v * v).sum::<f64>() / sf2
                + g.k_center.iter().map(|v| v * v).sum::<f64>() / sg2;
            let pref = f.norm_const * g.norm_const;
            let h = move |k: f64| {
                Complex64::from_polar(pref / (2.0 * cv.omega(k)), -cv.omega(k) * dt)
            };
            let phase = move |k: f64| -cv.omega(k) * dt;
            let v = gaussian_radial_integral(a, s, beta, &h, Some(&phase), goal)?;
            Ok(SmearedValue {
                value: Complex64::new(0.0, -c) * v,
                est_error: 1e-10 * v.norm(),
            })
        }
        d => Err(PropagatorError::UnsupportedDimension(d)),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DecayFit {
    pub slope: f64,
    pub expected: f64,
    pub rel_gap: f64,
    pub fit: LineFit,
}

/// Fit ln |D+(0, s)| + (3/4) ln s^2 against s at spacelike separation; the
/// reduced-log slope recovers -m because the power prefactors cancel.
pub fn decay_fit(conv: &Conventions, s_values: &[f64]) -> Result<DecayFit, PropagatorError> {
    if conv.spatial_dims != 3 {
        return Err(PropagatorError::ClosedFormDimension(conv.spatial_dims));
    }
    let m = conv.mass;
    let (lo, hi) = (2.0 / m, 8.0 / m);
    let mut ys = Vec::with_capacity(s_values.len());
    for &s in s_values {
        if !(lo - 1e-12..=hi + 1e-12).contains(&s) {
            return Err(PropagatorError::DecayWindow { lo, hi, got: s });
        }
        let v = dplus_quadrature(&FourVector::radial(0.0, s, 3), conv)?;
        ys.push(v.value.norm().ln() + 0.75 * (s * s).ln());
    }
    let fit = fit_line(s_values, &ys)?;
    let expected = -m;
    Ok(DecayFit {
        slope: fit.slope,
        expected,
        rel_gap: (fit.slope - expected).abs() / m,
        fit,
    })
}

/// Reference spacelike point for the calibration measurement.
pub const CALIBRATION_REFERENCE_SCALE: f64 = 1.5;

/// Ratio of the quadrature value to the raw closed-form layout at the
/// reference spacelike point s = 1.5/m. Real by construction; -1 in these
/// conventions.
pub fn measure_calibration(conv: &Conventions) -> Result<f64, PropagatorError> {
    let x = FourVector::radial(0.0, CALIBRATION_REFERENCE_SCALE / conv.mass, 3);
    let quad = dplus_quadrature(&x, conv)?;
    let (raw, _) = closed_form_raw(&x, conv)?;
    let ratio = quad.value / raw;
    if ratio.im.abs() > 1e-6 * ratio.norm() {
        return Err(PropagatorError::CalibrationImaginary(ratio.im));
    }
    Ok(ratio.re)
}
