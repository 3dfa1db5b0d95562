//! Wave-packet and pair-state models.
//!
//! Continuum packets are Gaussian in momentum with an explicit position
//! phase; norms are taken with the mass-shell measure d^Dk / (2 omega), so
//! `normalize` is exact for the inner product the field operators induce.
//! Lattice packets ([`NRPacket`]) carry flat weights and feed the
//! nonrelativistic teleportation checks.
//!
//! Spherical integrals in three dimensions reduce to a radial integral
//! through the complex shift axis: angular integration of exp(k.w) gives
//! 4 pi sinh(ks)/(ks) with s^2 = w.w, and each exponential branch keeps the
//! full Gaussian exponent folded in so nothing overflows even for packets
//! far from the origin.

use num_complex::Complex64;

use crate::conventions::Conventions;
use crate::measurement::{MeasurementError, MomentumGrid, Outcome};
use crate::numerics::quadrature::{
    integrate_with, AccuracyGoal, QuadratureError,
};
use crate::numerics::sum::{kbn, kbn_complex};

#[derive(Debug, thiserror::Error)]
pub enum StatesError {
    #[error("width must be finite and positive, got {0}")]
    BadWidth(f64),
    #[error("vector length {got} does not match spatial dimension {dims}")]
    DimensionMismatch { got: usize, dims: u32 },
    #[error("unsupported spatial dimension {0}; only 1 and 3 are implemented")]
    UnsupportedDimension(u32),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Grid(#[from] MeasurementError),
}

/// Gaussian momentum amplitude N exp(-|k - kc|^2 / 4 sigma^2) exp(-i k.xc).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPacket {
    pub k_center: Vec<f64>,
    pub sigma_k: f64,
    pub x_center: Vec<f64>,
    pub t0: f64,
    pub norm_const: f64,
}

impl GaussianPacket {
    pub fn new(
        k_center: Vec<f64>,
        sigma_k: f64,
        x_center: Vec<f64>,
        t0: f64,
    ) -> Result<Self, StatesError> {
        if !(sigma_k.is_finite() && sigma_k > 0.0) {
            return Err(StatesError::BadWidth(sigma_k));
        }
        if k_center.len() != x_center.len() || k_center.is_empty() {
            return Err(StatesError::DimensionMismatch {
                got: x_center.len(),
                dims: k_center.len() as u32,
            });
        }
        Ok(GaussianPacket {
            k_center,
            sigma_k,
            x_center,
            t0,
            norm_const: 1.0,
        })
    }

    pub fn dims(&self) -> u32 {
        self.k_center.len() as u32
    }

    pub fn amplitude(&self, k: &[f64]) -> Complex64 {
        let d2: f64 = k
            .iter()
            .zip(&self.k_center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let phase: f64 = k.iter().zip(&self.x_center).map(|(a, b)| a * b).sum();
        Complex64::from_polar(
            self.norm_const * (-d2 / (4.0 * self.sigma_k * self.sigma_k)).exp(),
            -phase,
        )
    }

    /// Mass-shell norm: integral of |f|^2 d^Dk / (2 omega).
    pub fn massshell_norm(&self, conv: &Conventions) -> Result<f64, StatesError> {
        self.weighted_norm(conv, true)
    }

    /// Flat norm: integral of |f|^2 d^Dk.
    pub fn flat_norm(&self, conv: &Conventions) -> Result<f64, StatesError> {
        self.weighted_norm(conv, false)
    }

    fn weighted_norm(&self, conv: &Conventions, mass_shell: bool) -> Result<f64, StatesError> {
        check_dims(self.dims(), conv)?;
        let n2 = self.norm_const * self.norm_const;
        let s2 = 2.0 * self.sigma_k * self.sigma_k;
        let goal = AccuracyGoal::default();
        match self.dims() {
            1 => {
                let kc = self.k_center[0];
                let lo = kc - 16.0 * self.sigma_k;
                let hi = kc + 16.0 * self.sigma_k;
                let conv = *conv;
                let f = move |k: f64| {
                    let w = if mass_shell { 2.0 * conv.omega(k) } else { 1.0 };
                    Complex64::new(n2 * (-(k - kc) * (k - kc) / s2).exp() / w, 0.0)
                };
                let r =
                    integrate_with(&f, lo, hi, &[], None::<&fn(f64) -> f64>, goal, 2000)?;
                Ok(r.value.re)
            }
            3 => {
                // |f|^2 = N^2 exp(-a|k|^2 + k.w - c), a = 1/(2 sigma^2),
                // w = 2 a kc, c = a |kc|^2
                let a = 1.0 / s2;
                let kc_norm = vec_norm(&self.k_center);
                let s = Complex64::new(2.0 * a * kc_norm, 0.0);
                let c = a * kc_norm * kc_norm;
                let conv = *conv;
                let h = move |k: f64| {
                    let w = if mass_shell { 2.0 * conv.omega(k) } else { 1.0 };
                    Complex64::new(n2 / w, 0.0)
                };
                let v = gaussian_radial_integral(a, s, c, &h, None, goal)?;
                Ok(v.re)
            }
            _ => unreachable!(),
        }
    }

    /// Rescale so the mass-shell norm is one; idempotent.
    pub fn normalize(&self, conv: &Conventions) -> Result<GaussianPacket, StatesError> {
        let n = self.massshell_norm(conv)?;
        let mut out = self.clone();
        out.norm_const = self.norm_const / n.sqrt();
        Ok(out)
    }

    /// Position profile (2 pi)^-D integral of f(k) e^{-i omega (t - t0)}
    /// e^{+i k.x} d^Dk. A bump near `x_center` at t = t0 that drifts with
    /// the group velocity.
    pub fn position_shape(
        &self,
        t: f64,
        x: &[f64],
        conv: &Conventions,
    ) -> Result<Complex64, StatesError> {
        check_dims(self.dims(), conv)?;
        if x.len() != self.k_center.len() {
            return Err(StatesError::DimensionMismatch {
                got: x.len(),
                dims: self.dims(),
            });
        }
        let tau = t - self.t0;
        let goal = AccuracyGoal::default();
        let two_pi = 2.0 * std::f64::consts::PI;
        match self.dims() {
            1 => {
                let kc = self.k_center[0];
                let lo = kc - 24.0 * self.sigma_k;
                let hi = kc + 24.0 * self.sigma_k;
                let packet = self.clone();
                let conv = *conv;
                let xx = x[0];
                let f = move |k: f64| {
                    packet.amplitude(&[k])
                        * Complex64::from_polar(1.0, k * xx - conv.omega(k) * tau)
                };
                let phase = move |k: f64| k * xx - conv.omega(k) * tau;
                let r = integrate_with(&f, lo, hi, &[], Some(&phase), goal, 4000)?;
                Ok(r.value / two_pi)
            }
            3 => {
                // f e^{ik.x} = N exp(-a|k|^2 + k.w - c) with a = 1/(4 s^2),
                // w = kc/(2 s^2) + i(x - xc), c = |kc|^2/(4 s^2)
                let a = 1.0 / (4.0 * self.sigma_k * self.sigma_k);
                let mut ww = Complex64::new(0.0, 0.0);
                for i in 0..3 {
                    let wi = Complex64::new(
                        self.k_center[i] * 2.0 * a,
                        x[i] - self.x_center[i],
                    );
                    ww += wi * wi;
                }
                let s = ww.sqrt();
                let c = a * vec_norm(&self.k_center).powi(2);
                let n = self.norm_const;
                let conv = *conv;
                let h = move |k: f64| Complex64::from_polar(n, -conv.omega(k) * tau);
                let phase = move |k: f64| -conv.omega(k) * tau;
                let v = gaussian_radial_integral(a, s, c, &h, Some(&phase), goal)?;
                Ok(v / two_pi.powi(3))
            }
            _ => unreachable!(),
        }
    }
}

fn check_dims(dims: u32, conv: &Conventions) -> Result<(), StatesError> {
    if dims != conv.spatial_dims {
        return Err(StatesError::DimensionMismatch {
            got: dims as usize,
            dims: conv.spatial_dims,
        });
    }
    if dims != 1 && dims != 3 {
        return Err(StatesError::UnsupportedDimension(dims));
    }
    Ok(())
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Two-particle source family, Gaussian-correlated in the total momentum
/// and symmetric under exchange of the legs.
#[derive(Clone, Debug, PartialEq)]
pub struct EPRFamily {
    pub sigma_epr: f64,
    pub q_total: Vec<f64>,
    pub pair_time: f64,
    pub norm_const: f64,
}

impl EPRFamily {
    pub fn new(sigma_epr: f64, q_total: Vec<f64>, pair_time: f64) -> Result<Self, StatesError> {
        if !(sigma_epr.is_finite() && sigma_epr > 0.0) {
            return Err(StatesError::BadWidth(sigma_epr));
        }
        Ok(EPRFamily {
            sigma_epr,
            q_total,
            pair_time,
            norm_const: 1.0,
        })
    }

    /// F(k1, k2) = M exp(-|k1 + k2 - q|^2 / 4 sigma^2) e^{-i(w1 + w2) t}.
    pub fn amplitude(&self, k1: &[f64], k2: &[f64], conv: &Conventions) -> Complex64 {
        let d2: f64 = k1
            .iter()
            .zip(k2)
            .zip(&self.q_total)
            .map(|((a, b), q)| (a + b - q) * (a + b - q))
            .sum();
        let energy = conv.omega(vec_norm(k1)) + conv.omega(vec_norm(k2));
        Complex64::from_polar(
            self.norm_const * (-d2 / (4.0 * self.sigma_epr * self.sigma_epr)).exp(),
            -energy * self.pair_time,
        )
    }
}

/// Overlap of the pair family with one measurement-outcome state on the
/// lattice. Measurement outcomes resolve the momentum difference of the
/// pair, so the grid profile correlates k2 - k1 around the family offset;
/// the overlap then factorizes into a Gaussian in P and a dual-lattice
/// Dirichlet sum in X that vanishes identically off X = 0 when P = 0.
pub fn epr_overlap_with_povm_state(
    family: &EPRFamily,
    outcome: &Outcome,
    grid: &MomentumGrid,
    conv: &Conventions,
) -> Result<Complex64, StatesError> {
    if grid.dims() != 1 {
        return Err(StatesError::UnsupportedDimension(grid.dims()));
    }
    let p_idx = grid.momentum_index(outcome.p[0])?;
    let h = grid.half();
    let ks = grid.momenta();
    let q = family.q_total[0];
    let sig = family.sigma_epr;
    let mut terms = Vec::new();
    for i in -h..=h {
        let j = i + p_idx;
        if !(-h..=h).contains(&j) {
            continue;
        }
        let (ui, uj) = ((i + h) as usize, (j + h) as usize);
        let diff = ks[uj] - ks[ui];
        let gauss = family.norm_const * (-(diff - q) * (diff - q) / (4.0 * sig * sig)).exp();
        let phase =
            -ks[ui] * outcome.x[0] - (conv.omega(ks[ui]) + conv.omega(ks[uj])) * family.pair_time;
        terms.push(Complex64::from_polar(gauss * grid.dk(), phase));
    }
    Ok(kbn_complex(terms))
}

/// A lattice wave packet with flat measure.
#[derive(Clone, Debug, PartialEq)]
pub struct NRPacket {
    pub grid: MomentumGrid,
    pub values: Vec<Complex64>,
}

impl NRPacket {
    pub fn from_values(grid: MomentumGrid, values: Vec<Complex64>) -> Result<Self, StatesError> {
        if values.len() != grid.n_points() {
            return Err(StatesError::DimensionMismatch {
                got: values.len(),
                dims: grid.n_points() as u32,
            });
        }
        Ok(NRPacket { grid, values })
    }

    /// Gaussian sample on the grid, flat-normalized.
    pub fn gaussian(
        grid: MomentumGrid,
        k_center: f64,
        sigma_k: f64,
        x_center: f64,
    ) -> Result<Self, StatesError> {
        if !(sigma_k.is_finite() && sigma_k > 0.0) {
            return Err(StatesError::BadWidth(sigma_k));
        }
        let values = grid
            .momenta()
            .iter()
            .map(|&k| {
                Complex64::from_polar(
                    (-(k - k_center) * (k - k_center) / (4.0 * sigma_k * sigma_k)).exp(),
                    -k * x_center,
                )
            })
            .collect();
        let p = NRPacket { grid, values };
        Ok(p.normalized())
    }

    pub fn flat_norm(&self) -> f64 {
        kbn(self.values.iter().map(|z| z.norm_sqr())) * self.grid.dk()
    }

    pub fn normalized(&self) -> NRPacket {
        let n = self.flat_norm().sqrt();
        NRPacket {
            grid: self.grid,
            values: self.values.iter().map(|z| z / n).collect(),
        }
    }

    /// Position-lattice profile via the unitary grid transform
    /// psi[l] = dk / sqrt(2 pi) * sum_j f[j] e^{i k_j x_l}.
    pub fn to_position(&self) -> Vec<Complex64> {
        let xs = self.grid.x_lattice();
        let ks = self.grid.momenta();
        let scale = self.grid.dk() / (2.0 * std::f64::consts::PI).sqrt();
        xs.iter()
            .map(|&x| {
                kbn_complex(
                    ks.iter()
                        .zip(&self.values)
                        .map(|(&k, v)| v * Complex64::from_polar(scale, k * x)),
                )
            })
            .collect()
    }
}

/// Radial evaluation of a spherical Gaussian integral:
/// integral over R^3 of exp(-a |k|^2 + k.w - c) h(|k|) d^3k
/// = 4 pi * int_0^inf k^2 exp(-a k^2 - c) sinhc(k s) h(k) dk, s^2 = w.w.
///
/// The caller guarantees c >= Re(s)^2 / (4a) (true for every packet overlap
/// by the Cauchy-Schwarz inequality), so both split exponents stay
/// nonpositive and nothing overflows.
pub(crate) fn gaussian_radial_integral(
    a: f64,
    s: Complex64,
    c: f64,
    h: &dyn Fn(f64) -> Complex64,
    h_phase: Option<&dyn Fn(f64) -> f64>,
    goal: AccuracyGoal,
) -> Result<Complex64, QuadratureError> {
    let four_pi = 4.0 * std::f64::consts::PI;
    let kmax = (s.re.max(0.0) / (2.0 * a)) + 12.0 / a.sqrt();
    if s.norm() * kmax < 1e-3 {
        // sinhc(z) ~ 1 + z^2/6 + z^4/120
        let f = move |k: f64| {
            let z2 = (k * s) * (k * s);
            let sinhc = Complex64::new(1.0, 0.0) + z2 / 6.0 + z2 * z2 / 120.0;
            four_pi * k * k * (-a * k * k - c).exp() * sinhc * h(k)
        };
        let r = integrate_with(&f, 0.0, kmax, &[], h_phase, goal, 4000)?;
        return Ok(r.value);
    }
    // sinhc(ks) = (e^{ks} - e^{-ks}) / (2 k s); fold the Gaussian exponent
    // into each branch
    let mut total = Complex64::new(0.0, 0.0);
    for sign in [1.0f64, -1.0] {
        let f = move |k: f64| {
            let expo = Complex64::new(-a * k * k - c, 0.0) + sign * k * s;
            four_pi * (k / (2.0 * s)) * expo.exp() * h(k)
        };
        let phase = move |k: f64| sign * k * s.im + h_phase.map_or(0.0, |p| p(k));
        let r = integrate_with(&f, 0.0, kmax, &[], Some(&phase), goal, 4000)?;
        total += sign * r.value;
    }
    Ok(total)
}
