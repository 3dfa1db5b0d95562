//! Full transition amplitude for teleporting a one-particle packet on a
//! line: the six-operator vacuum average expanded into pairings, weighed,
//! and evaluated numerically along two independent routes.
//!
//! The operator word has three absorbing legs (the two measurement points
//! xi and xi - X on the slice xi0, and the free output point x at t_out)
//! and three creating legs (the pair source doubled at one point, and the
//! packet). Expansion gives six pairings that collapse to three channels:
//! two teleporting ones, where the packet is absorbed by one measurement
//! leg while a pair leg reaches the output point, and a parasitic one,
//! where the packet propagates freely and the measurement sees only the
//! pair. Channel weights are (2, 2, 4): the collapsed multiplicities
//! (2, 2, 2) with the parasitic channel doubled for the two equivalent
//! intra-pair assignments its symmetric source admits, which is what makes
//! the parasitic share exactly one half.
//!
//! Every contraction of a creating leg c with an absorbing leg a carries
//! -i D+(a - c), with the separation taken absorber minus creator.
//!
//! The momentum route is the production evaluator: the spatial integrals
//! collapse analytically (the measurement slice gives one momentum delta,
//! the Gaussian profiles transform in closed form), leaving a two-level
//! adaptive quadrature per teleporting channel and fully factorized
//! one-dimensional integrals for the parasitic one. The position route
//! nests adaptive quadratures over the three spatial coordinates with the
//! closed 1+1 kernel as integrand; it is slower and exists as an
//! independent cross-check.

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::Ratio;

use crate::conventions::Conventions;
use crate::measurement::Outcome;
use crate::numerics::quadrature::{
    integrate_with, semi_infinite_oscillatory, AccuracyGoal, QuadratureError,
};
use crate::numerics::sum::kbn;
use crate::propagator::kernel_1p1_raw;
use crate::states::{EPRFamily, GaussianPacket, StatesError};
use crate::wick::{
    classify_terms, collapse_repeated_labels, vacuum_expectation_symbolic, OperatorFactor,
    OperatorWord, PairingTerm, PointLabel, Tag, WickError, WickExpansion,
};

#[derive(Debug, thiserror::Error)]
pub enum AmplitudeError {
    #[error("amplitude evaluation supports one spatial dimension, got {0}")]
    UnsupportedDimension(u32),
    #[error("packet ({packet}D), pair source ({epr}D) and conventions ({conv}D) disagree")]
    MismatchedDims { packet: u32, epr: u32, conv: u32 },
    #[error("scenario times must be finite")]
    NonFiniteTime,
    #[error("term is untagged; only classified pairing terms can be evaluated")]
    UntaggedTerm,
    #[error("x grid needs at least 3 strictly increasing, evenly spaced points")]
    BadXGrid,
    #[error(
        "x grid does not cover the amplitude support: boundary density {boundary:e} \
         exceeds 1e-6 of the peak {peak:e}"
    )]
    Coverage { boundary: f64, peak: f64 },
    #[error(transparent)]
    Wick(#[from] WickError),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    States(#[from] StatesError),
}

/// Fixed configuration of one teleportation run: who sits where in time.
/// The typical ordering pair_time <= packet.t0 <= xi0 <= t_out is what the
/// fields are named for but is not enforced.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub packet: GaussianPacket,
    pub epr: EPRFamily,
    /// Measurement slice time.
    pub xi0: f64,
    /// Output observation time.
    pub t_out: f64,
    pub conv: Conventions,
}

impl Scenario {
    pub fn new(
        packet: GaussianPacket,
        epr: EPRFamily,
        xi0: f64,
        t_out: f64,
        conv: Conventions,
    ) -> Result<Self, AmplitudeError> {
        let pd = packet.dims();
        let ed = epr.q_total.len() as u32;
        if pd != conv.spatial_dims || ed != conv.spatial_dims {
            return Err(AmplitudeError::MismatchedDims {
                packet: pd,
                epr: ed,
                conv: conv.spatial_dims,
            });
        }
        if !(xi0.is_finite() && t_out.is_finite()) {
            return Err(AmplitudeError::NonFiniteTime);
        }
        Ok(Scenario {
            packet,
            epr,
            xi0,
            t_out,
            conv,
        })
    }

    fn require_1d(&self) -> Result<(), AmplitudeError> {
        if self.conv.spatial_dims != 1 {
            return Err(AmplitudeError::UnsupportedDimension(self.conv.spatial_dims));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TermValue {
    pub tag: Tag,
    pub weight: u64,
    pub value: Complex64,
    /// Approximate bound from the quadrature error estimates; nested
    /// levels are combined conservatively, not propagated exactly.
    pub est_error: f64,
}

#[derive(Clone, Debug)]
pub struct AmplitudeBreakdown {
    pub terms: Vec<TermValue>,
    /// Weighted sum over the terms.
    pub total: Complex64,
    pub est_error: f64,
}

fn labels(sc: &Scenario) -> (PointLabel, PointLabel, PointLabel, PointLabel, PointLabel) {
    // the displaced measurement leg carries a unit marker offset standing
    // for one unit of -X; numeric evaluation substitutes the outcome
    (
        PointLabel::new("x_packet", sc.packet.t0),
        PointLabel::new("x_epr", sc.epr.pair_time),
        PointLabel::new("x_out", sc.t_out),
        PointLabel::with_offset("xi", &[-1.0], sc.xi0),
        PointLabel::new("xi", sc.xi0),
    )
}

/// Expansion of the full word with the pair source at one repeated point:
/// three channels with weights (2, 2, 4).
pub fn symbolic_amplitude(sc: &Scenario) -> Result<WickExpansion, AmplitudeError> {
    let (packet, epr, out, meas_disp, meas_plain) = labels(sc);
    let word = OperatorWord::new(vec![
        OperatorFactor::annihilation(meas_plain.clone()),
        OperatorFactor::annihilation(meas_disp.clone()),
        OperatorFactor::annihilation(out.clone()),
        OperatorFactor::creation(epr.clone()),
        OperatorFactor::creation(epr.clone()),
        OperatorFactor::creation(packet.clone()),
    ]);
    let exp = vacuum_expectation_symbolic(&word)?;
    let collapsed = collapse_repeated_labels(&exp);
    let classified = classify_terms(
        &collapsed,
        &packet,
        &[epr.clone(), epr],
        &out,
        &[meas_disp, meas_plain],
    )?;
    let mut terms = classified.terms;
    for t in &mut terms {
        // intra-pair exchange doubling: both measurement legs land on the
        // symmetric pair source
        if t.tag == Tag::Parasitic {
            t.multiplicity *= 2;
        }
    }
    Ok(WickExpansion {
        terms,
        source_word: classified.source_word,
    })
}

/// Same word with the two pair legs kept at distinct labels: no collapse,
/// six pairings of unit weight.
pub fn symbolic_amplitude_distinct_pair(sc: &Scenario) -> Result<WickExpansion, AmplitudeError> {
    let (packet, _, out, meas_disp, meas_plain) = labels(sc);
    let epr_a = PointLabel::new("x_epr_a", sc.epr.pair_time);
    let epr_b = PointLabel::new("x_epr_b", sc.epr.pair_time);
    let word = OperatorWord::new(vec![
        OperatorFactor::annihilation(meas_plain.clone()),
        OperatorFactor::annihilation(meas_disp.clone()),
        OperatorFactor::annihilation(out.clone()),
        OperatorFactor::creation(epr_a.clone()),
        OperatorFactor::creation(epr_b.clone()),
        OperatorFactor::creation(packet.clone()),
    ]);
    let exp = vacuum_expectation_symbolic(&word)?;
    Ok(classify_terms(
        &exp,
        &packet,
        &[epr_a, epr_b],
        &out,
        &[meas_disp, meas_plain],
    )?)
}

/// Weighted share of parasitic pairings, reduced.
pub fn parasitic_fraction(exp: &WickExpansion) -> Ratio<u64> {
    let total: u64 = exp.terms.iter().map(|t| t.multiplicity).sum();
    let parasitic: u64 = exp
        .terms
        .iter()
        .filter(|t| t.tag == Tag::Parasitic)
        .map(|t| t.multiplicity)
        .sum();
    Ratio::new(parasitic, total.max(1))
}

/// Packet's spatial profile at its own time, in closed form:
/// N (sigma/sqrt(pi)) e^{i kc (x - xc)} e^{-sigma^2 (x - xc)^2}.
fn packet_profile(p: &GaussianPacket, x: f64) -> Complex64 {
    let s = p.sigma_k;
    let d = x - p.x_center[0];
    Complex64::from_polar(
        p.norm_const * s / PI.sqrt() * (-s * s * d * d).exp(),
        p.k_center[0] * d,
    )
}

/// Pair source's spatial profile at pair_time: the transform of the
/// total-momentum Gaussian, broad of width 1/sigma_epr.
fn epr_profile(e: &EPRFamily, x1: f64) -> Complex64 {
    let s = e.sigma_epr;
    Complex64::from_polar(
        e.norm_const * s / PI.sqrt() * (-s * s * x1 * x1).exp(),
        e.q_total[0] * x1,
    )
}

/// Total-momentum Gaussian of the pair source, no time phase.
fn epr_sum_profile(e: &EPRFamily, ksum: f64) -> f64 {
    let d = ksum - e.q_total[0];
    e.norm_const * (-d * d / (4.0 * e.sigma_epr * e.sigma_epr)).exp()
}

/// Contraction factor of one (creator, absorber) pair at separation
/// (dt, dx) = absorber - creator: -C * I(dt, dx) via the closed kernel.
fn pair_factor(dt: f64, dx: f64, conv: &Conventions) -> Complex64 {
    -2.0 * PI * conv.contraction_norm * kernel_1p1_raw(dt, dx, conv.mass)
}

/// Coordinate window half-width around a light cone of time extent dt: the
/// invariant distance at the window edge is 8.5/m, where the spacelike
/// tail has fallen to ~2e-4 of its cone value. Good to ~1e-5 relative
/// after integration, far inside the cross-check tolerance.
fn cone_reach(dt: f64, m: f64) -> f64 {
    let s = 8.5 / m;
    (dt * dt + s * s).sqrt()
}

fn require_tag(term: &PairingTerm) -> Result<Tag, AmplitudeError> {
    match term.tag {
        Tag::Untagged => Err(AmplitudeError::UntaggedTerm),
        t => Ok(t),
    }
}

/// Uniformly sampled complex function with cubic (Catmull-Rom)
/// interpolation, zero outside the sampled range. Used for the innermost
/// position-route integral, which is a Gaussian-smeared kernel and hence
/// band-limited by the packet spectrum: sampling well past that band makes
/// the interpolation error negligible against the quadrature goals.
struct CubicTable {
    x0: f64,
    dx: f64,
    vals: Vec<Complex64>,
}

impl CubicTable {
    fn build<F: FnMut(f64) -> Result<Complex64, AmplitudeError>>(
        lo: f64,
        hi: f64,
        step: f64,
        mut f: F,
    ) -> Result<CubicTable, AmplitudeError> {
        let n = ((hi - lo) / step).ceil() as usize + 4;
        let mut vals = Vec::with_capacity(n);
        for i in 0..n {
            vals.push(f(lo + i as f64 * step)?);
        }
        Ok(CubicTable {
            x0: lo,
            dx: step,
            vals,
        })
    }

    fn eval(&self, x: f64) -> Complex64 {
        let u = (x - self.x0) / self.dx;
        let n = self.vals.len();
        if u < 1.0 || u >= (n - 3) as f64 {
            // the sampled range covers the function's support with margin;
            // beyond it the true value is negligible
            return Complex64::new(0.0, 0.0);
        }
        let i = u.floor() as usize;
        let t = u - i as f64;
        let (p0, p1, p2, p3) = (
            self.vals[i - 1],
            self.vals[i],
            self.vals[i + 1],
            self.vals[i + 2],
        );
        0.5 * (2.0 * p1
            + (p2 - p0) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t)
    }
}

/// Collects failures and the worst error estimate from quadratures that
/// run inside an enclosing integrand, where `?` cannot reach.
struct NestGuard {
    fail: RefCell<Option<QuadratureError>>,
    est: Cell<f64>,
}

impl NestGuard {
    fn new() -> Self {
        NestGuard {
            fail: RefCell::new(None),
            est: Cell::new(0.0),
        }
    }

    fn run(
        &self,
        r: Result<crate::numerics::quadrature::QuadResult, QuadratureError>,
    ) -> Complex64 {
        match r {
            Ok(q) => {
                self.est.set(self.est.get().max(q.est_error));
                q.value
            }
            Err(e) => {
                if self.fail.borrow().is_none() {
                    *self.fail.borrow_mut() = Some(e);
                }
                Complex64::new(0.0, 0.0)
            }
        }
    }

    fn check(self) -> Result<f64, AmplitudeError> {
        match self.fail.into_inner() {
            Some(e) => Err(e.into()),
            None => Ok(self.est.get()),
        }
    }
}

const NO_PHASE: Option<&fn(f64) -> f64> = None;

/// Production evaluator: the channel as a reduced momentum quadrature.
/// Teleporting channels are a two-level nest over the output-leg momentum
/// and the packet-leg momentum; the parasitic channel factorizes into a
/// free packet integral, the source gate at total momentum -P, and a
/// whole-line measurement-pair integral with accelerated oscillatory
/// tails.
pub fn term_value_momentum(
    term: &PairingTerm,
    sc: &Scenario,
    outcome: &Outcome,
    x: f64,
) -> Result<TermValue, AmplitudeError> {
    sc.require_1d()?;
    let tag = require_tag(term)?;
    let cv = sc.conv;
    let m = cv.mass;
    let (xx, pp) = (outcome.x[0], outcome.p[0]);
    let q = sc.epr.q_total[0];
    let (t1, tp, xi0, tout) = (sc.epr.pair_time, sc.packet.t0, sc.xi0, sc.t_out);
    let (kcf, sk) = (sc.packet.k_center[0], sc.packet.sigma_k);
    let se = sc.epr.sigma_epr;
    // overall constant: (-C)^3 from the three contractions, 2 pi from the
    // measurement-slice momentum delta
    let scale = -cv.contraction_norm.powi(3) * 2.0 * PI;
    // absolute floors scale with the integrand's natural magnitude so that
    // near-cancelled integrals settle at their noise level instead of
    // demanding unreachable precision
    let unit = sc.packet.norm_const * sc.epr.norm_const / (m * m);
    let goal_outer = AccuracyGoal::new(1e-11 * unit * se / m, 1e-8);
    let goal_inner = AccuracyGoal::new(1e-12 * unit * se, 1e-9);

    let (value, est) = match tag {
        Tag::TeleportDirect | Tag::TeleportExchange => {
            let wf = 13.0 * sk;
            let we = 13.0 * se;
            let packet = sc.packet.clone();
            let epr = sc.epr.clone();
            let guard = NestGuard::new();
            let outer = |kc: f64| -> Complex64 {
                let inner = |ka: f64| -> Complex64 {
                    let kb = -pp - ka;
                    let (wa, wb) = (cv.omega(ka), cv.omega(kb));
                    let xphase = match tag {
                        Tag::TeleportDirect => -ka * xx,
                        _ => -kb * xx,
                    };
                    let phase = xphase - wa * (xi0 - tp) - wb * (xi0 - t1);
                    packet.amplitude(&[ka])
                        * epr_sum_profile(&epr, kb + kc)
                        * Complex64::from_polar(1.0 / (4.0 * wa * wb), phase)
                };
                // the packet Gaussian supports ka near kcf, the source
                // Gaussian ka near kc - P - q; outside the overlap the
                // product is below e^{-42} and the contribution is dropped
                let ecen = kc - pp - q;
                let lo = (kcf - wf).max(ecen - 14.0 * se);
                let hi = (kcf + wf).min(ecen + 14.0 * se);
                if lo >= hi {
                    return Complex64::new(0.0, 0.0);
                }
                let bump = ecen.clamp(lo, hi);
                let r = integrate_with(&inner, lo, hi, &[bump], NO_PHASE, goal_inner, 1500);
                let wc = cv.omega(kc);
                guard.run(r) * Complex64::from_polar(1.0 / (2.0 * wc), kc * x - wc * (tout - t1))
            };
            let lo_c = q + pp + kcf - (wf + we);
            let hi_c = q + pp + kcf + (wf + we);
            let r = integrate_with(&outer, lo_c, hi_c, &[], NO_PHASE, goal_outer, 2000)?;
            let inner_est = guard.check()?;
            (
                r.value * scale,
                (r.est_error + (hi_c - lo_c) * inner_est / (2.0 * m)) * scale.abs(),
            )
        }
        Tag::Parasitic => {
            // free propagation of the packet to the output point
            let packet = sc.packet.clone();
            let free = |ka: f64| {
                let wa = cv.omega(ka);
                packet.amplitude(&[ka])
                    * Complex64::from_polar(1.0 / (2.0 * wa), ka * x - wa * (tout - tp))
            };
            let goal_free = AccuracyGoal::new(1e-12 * sc.packet.norm_const * sk / m, 1e-9);
            let fr = integrate_with(
                &free,
                kcf - 13.0 * sk,
                kcf + 13.0 * sk,
                &[],
                NO_PHASE,
                goal_free,
                1500,
            )?;
            // measurement pair against the source: the relative momentum
            // runs over the whole line, split at zero, each side with an
            // accelerated tail; the core covers any stationary point of
            // the X-vs-time phase
            let dt = xi0 - t1;
            let srat = (xx.abs() / (2.0 * dt.abs().max(1e-3))).min(0.95);
            let kstar = m * srat / (1.0 - srat * srat).sqrt();
            let core = 2.0 * kstar + 6.0 * m + 2.0 * pp.abs() + 4.0 / (0.3 + dt.abs());
            let goal_pair = AccuracyGoal::new(1e-12 / (m * m), 1e-9);
            let mut pair_sum = Complex64::new(0.0, 0.0);
            let mut pair_est = 0.0;
            for side in [1.0f64, -1.0] {
                let f = move |u: f64| {
                    let kb = side * u;
                    let kc = -pp - kb;
                    let (wb, wc) = (cv.omega(kb), cv.omega(kc));
                    Complex64::from_polar(1.0 / (4.0 * wb * wc), -kc * xx - (wb + wc) * dt)
                };
                let phase = move |u: f64| {
                    let kb = side * u;
                    let kc = -pp - kb;
                    -kc * xx - (cv.omega(kb) + cv.omega(kc)) * dt
                };
                let r = semi_infinite_oscillatory(f, phase, core, &[], goal_pair)?;
                pair_sum += r.value;
                pair_est += r.est_error;
            }
            let gate = epr_sum_profile(&sc.epr, -pp);
            let value = fr.value * gate * pair_sum * scale;
            let est = (fr.est_error * gate * pair_sum.norm() + fr.value.norm() * gate * pair_est)
                * scale.abs();
            (value, est)
        }
        Tag::Untagged => unreachable!(),
    };
    Ok(TermValue {
        tag,
        weight: term.multiplicity,
        value,
        est_error: est,
    })
}

/// Cross-check evaluator: nested adaptive quadrature over the three
/// spatial coordinates with the closed 1+1 kernel, windows pruned to the
/// light cones plus a Compton-scale margin. The parasitic channel uses its
/// exact translation-invariant factorization instead of the full nest.
pub fn term_value_position(
    term: &PairingTerm,
    sc: &Scenario,
    outcome: &Outcome,
    x: f64,
) -> Result<TermValue, AmplitudeError> {
    sc.require_1d()?;
    let tag = require_tag(term)?;
    let cv = sc.conv;
    let m = cv.mass;
    let (xx, pp) = (outcome.x[0], outcome.p[0]);
    let (t1, tp, xi0, tout) = (sc.epr.pair_time, sc.packet.t0, sc.xi0, sc.t_out);
    let (dt_a, dt_b, dt_c) = (xi0 - tp, xi0 - t1, tout - t1);
    let xc = sc.packet.x_center[0];
    let (kcf, sk) = (sc.packet.k_center[0], sc.packet.sigma_k);
    let half_support = 5.0 / sk;
    let packet_window = (xc - half_support, xc + half_support);
    // absolute floors follow the profile normalizations so that windows
    // that only catch a Gaussian tail settle cheaply
    let (nf, ne) = (sc.packet.norm_const, sc.epr.norm_const);
    let goal_inner = AccuracyGoal::new(1e-12 * nf, 3e-6);
    let goal_mid = AccuracyGoal::new(1e-11 * nf, 1e-5);
    let goal_outer = AccuracyGoal::new(1e-12 * nf * ne, 3e-5);

    let (value, est) = match tag {
        Tag::TeleportDirect | Tag::TeleportExchange => {
            // absorber minus creator separations per channel:
            //   direct:   packet -> (xi - X), pair -> xi, pair -> output
            //   exchange: packet -> xi, pair -> (xi - X), pair -> output
            let mid_shift = match tag {
                Tag::TeleportDirect => 0.0,
                _ => xx,
            };
            let inner_shift = match tag {
                Tag::TeleportDirect => xx,
                _ => 0.0,
            };
            let packet = sc.packet.clone();
            let epr = sc.epr.clone();
            let r_a = cone_reach(dt_a, m);
            let r_b = cone_reach(dt_b, m);
            let r_c = cone_reach(dt_c, m);
            // innermost layer: the packet profile smeared by the first
            // kernel, as a function of the absorbing point. Tabulated once
            // because the nest evaluates it millions of times and it is
            // band-limited by the packet spectrum (|k| within kcf +- 13
            // sigma), so dense uniform samples interpolate it to below the
            // quadrature goals.
            let band = kcf.abs() + 13.0 * sk + 0.5;
            let step = 2.0 * PI / (86.0 * band);
            let h_lo = packet_window.0 - r_a;
            let h_hi = packet_window.1 + r_a;
            let mut h_est = 0.0f64;
            let smeared = CubicTable::build(h_lo, h_hi, step, |partner| {
                let lo = packet_window.0.max(partner - r_a);
                let hi = packet_window.1.min(partner + r_a);
                if lo >= hi {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let inner =
                    |xp: f64| packet_profile(&packet, xp) * pair_factor(dt_a, partner - xp, &cv);
                let bps = [partner - dt_a.abs(), partner + dt_a.abs()];
                let r = integrate_with(&inner, lo, hi, &bps, NO_PHASE, goal_inner, 900)?;
                h_est = h_est.max(r.est_error);
                Ok(r.value)
            })?;
            let guard_mid = NestGuard::new();
            let outer = |x1: f64| -> Complex64 {
                let mid_center = x1 + mid_shift;
                let mid = |xi: f64| -> Complex64 {
                    smeared.eval(xi - inner_shift)
                        * pair_factor(dt_b, xi - mid_shift - x1, &cv)
                        * Complex64::from_polar(1.0, pp * xi)
                };
                let bps = [mid_center - dt_b.abs(), mid_center + dt_b.abs()];
                let s = guard_mid.run(integrate_with(
                    &mid,
                    mid_center - r_b,
                    mid_center + r_b,
                    &bps,
                    NO_PHASE,
                    goal_mid,
                    1200,
                ));
                s * epr_profile(&epr, x1) * pair_factor(dt_c, x - x1, &cv)
            };
            let (lo1, hi1) = (x - r_c, x + r_c);
            let bps = [x - dt_c.abs(), x + dt_c.abs()];
            let r = integrate_with(&outer, lo1, hi1, &bps, NO_PHASE, goal_outer, 1200)?;
            let mid_est = guard_mid.check()?;
            let est = r.est_error + (hi1 - lo1) * (mid_est + 2.0 * r_b * h_est) * 2.0;
            (r.value, est)
        }
        Tag::Parasitic => {
            // packet -> output factor
            let packet = sc.packet.clone();
            let r_f = cone_reach(tout - tp, m);
            let lo = packet_window.0.max(x - r_f);
            let hi = packet_window.1.min(x + r_f);
            if lo >= hi {
                return Ok(TermValue {
                    tag,
                    weight: term.multiplicity,
                    value: Complex64::new(0.0, 0.0),
                    est_error: 0.0,
                });
            }
            let free = |xp: f64| packet_profile(&packet, xp) * pair_factor(tout - tp, x - xp, &cv);
            let bps = [x - (tout - tp).abs(), x + (tout - tp).abs()];
            let fr = integrate_with(&free, lo, hi, &bps, NO_PHASE, goal_mid, 1200)?;
            // measurement legs: translation invariance along the slice
            // leaves the source gate at total momentum -P times a relative
            // integral of the two kernels
            let r_b = cone_reach(dt_b, m);
            let (ulo, uhi) = ((-r_b).min(xx - r_b), r_b.max(xx + r_b));
            let corr = |u: f64| {
                pair_factor(dt_b, u, &cv)
                    * pair_factor(dt_b, u - xx, &cv)
                    * Complex64::from_polar(1.0, pp * u)
            };
            let bps = [-dt_b.abs(), dt_b.abs(), xx - dt_b.abs(), xx + dt_b.abs()];
            let cr = integrate_with(&corr, ulo, uhi, &bps, NO_PHASE, goal_mid, 1200)?;
            let gate = epr_sum_profile(&sc.epr, -pp);
            let value = fr.value * gate * cr.value;
            let est = fr.est_error * gate * cr.value.norm() + fr.value.norm() * gate * cr.est_error;
            (value, est)
        }
        Tag::Untagged => unreachable!(),
    };
    Ok(TermValue {
        tag,
        weight: term.multiplicity,
        value,
        est_error: est,
    })
}

/// All channels through the momentum route, weighted sum formed.
pub fn total_amplitude(
    sc: &Scenario,
    outcome: &Outcome,
    x: f64,
) -> Result<AmplitudeBreakdown, AmplitudeError> {
    let exp = symbolic_amplitude(sc)?;
    let mut terms = Vec::with_capacity(exp.terms.len());
    let mut total = Complex64::new(0.0, 0.0);
    let mut est = 0.0;
    for t in &exp.terms {
        let v = term_value_momentum(t, sc, outcome, x)?;
        total += v.value * v.weight as f64;
        est += v.est_error * v.weight as f64;
        terms.push(v);
    }
    Ok(AmplitudeBreakdown {
        terms,
        total,
        est_error: est,
    })
}

/// Probability density of the outcome per unit dX dP: the x integral of
/// |total|^2 as a Riemann sum over an evenly spaced grid. The grid must
/// cover the support: the boundary density has to sit below 1e-6 of the
/// peak, otherwise the sum is refused rather than silently truncated.
pub fn outcome_probability_density(
    sc: &Scenario,
    outcome: &Outcome,
    x_grid: &[f64],
) -> Result<f64, AmplitudeError> {
    if x_grid.len() < 3 {
        return Err(AmplitudeError::BadXGrid);
    }
    let dx = x_grid[1] - x_grid[0];
    if !(dx > 0.0)
        || x_grid
            .windows(2)
            .any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx)
    {
        return Err(AmplitudeError::BadXGrid);
    }
    let mut dens = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        dens.push(total_amplitude(sc, outcome, x)?.total.norm_sqr());
    }
    let peak = dens.iter().fold(0.0f64, |a, &b| a.max(b));
    let boundary = dens[0].max(*dens.last().unwrap());
    if peak > 0.0 && boundary > 1e-6 * peak {
        return Err(AmplitudeError::Coverage { boundary, peak });
    }
    Ok(kbn(dens) * dx)
}
