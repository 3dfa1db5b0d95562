//! Cylinder functions J0, J1, Y0, Y1 and modified functions K0, K1.
//!
//! Self-contained implementations validated against a frozen reference table
//! (`assets/bessel_reference.csv`, generated at 50-digit working precision)
//! to 1e-12 relative. Power series are accumulated in double-double to absorb
//! the cancellation near the series/asymptotic crossover at x = 13.

use super::ddouble::Dd;

// Euler-Mascheroni constant, split so hi + lo carries ~32 digits.
const EULER_GAMMA_HI: f64 = 0.5772156649015329;
const EULER_GAMMA_LO: f64 = -4.942915152430645e-18;

const SERIES_CUTOFF: f64 = 13.0;

fn euler_gamma_dd() -> Dd {
    Dd::from(EULER_GAMMA_HI).add(Dd::from(EULER_GAMMA_LO))
}

/// Sum of (-q)^m / (m!)^2 with q = x^2/4; returns the J0 series in Dd.
fn j0_series(x: f64) -> Dd {
    let q = Dd::from(x * 0.5).mul(Dd::from(x * 0.5));
    let mut term = Dd::from(1.0);
    let mut sum = term;
    for m in 1..200 {
        term = term.mul(q).neg().div_f((m * m) as f64);
        sum = sum.add(term);
        if term.value().abs() < 1e-25 * sum.value().abs().max(1e-30) {
            break;
        }
    }
    sum
}

/// Sum of (-q)^m / (m! (m+1)!); J1 = (x/2) * this.
fn j1_series_core(x: f64) -> Dd {
    let q = Dd::from(x * 0.5).mul(Dd::from(x * 0.5));
    let mut term = Dd::from(1.0);
    let mut sum = term;
    for m in 1..200u64 {
        term = term.mul(q).neg().div_f((m * (m + 1)) as f64);
        sum = sum.add(term);
        if term.value().abs() < 1e-25 * sum.value().abs().max(1e-30) {
            break;
        }
    }
    sum
}

/// Hankel asymptotic amplitude/phase series P, Q for order nu at large x.
fn hankel_pq(mu: f64, x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut prev_mag = f64::INFINITY;
    for k in 0..40u32 {
        if k > 0 {
            let j = (2 * k - 1) as f64;
            term *= (mu - j * j) / (8.0 * k as f64 * x);
        }
        let mag = term.abs();
        if mag > prev_mag {
            break; // divergent tail reached; truncate at the minimal term
        }
        prev_mag = mag;
        let signed = if (k / 2) % 2 == 0 { term } else { -term };
        if k % 2 == 0 {
            p += signed;
        } else {
            q += signed;
        }
        if mag < 1e-18 {
            break;
        }
    }
    (p, q)
}

pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_CUTOFF {
        j0_series(x).value()
    } else {
        let (p, q) = hankel_pq(0.0, x);
        let chi = x - std::f64::consts::FRAC_PI_4;
        (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

pub fn j1(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    if x <= SERIES_CUTOFF {
        sign * j1_series_core(x).mul_f(x * 0.5).value()
    } else {
        let (p, q) = hankel_pq(4.0, x);
        let chi = x - 3.0 * std::f64::consts::FRAC_PI_4;
        sign * (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

pub fn y0(x: f64) -> f64 {
    assert!(x > 0.0, "y0 requires a positive argument");
    if x <= SERIES_CUTOFF {
        // (2/pi) [ (ln(x/2)+gamma) J0(x) + sum_{k>=1} (-1)^{k+1} H_k q^k/(k!)^2 ]
        let q = Dd::from(x * 0.5).mul(Dd::from(x * 0.5));
        let mut term = Dd::from(1.0);
        let mut harmonic = Dd::ZERO;
        let mut series = Dd::ZERO;
        for k in 1..200 {
            let kf = k as f64;
            term = term.mul(q).div_f(kf * kf);
            harmonic = harmonic.add(Dd::from(1.0).div_f(kf));
            let contrib = term.mul(harmonic);
            series = if k % 2 == 1 {
                series.add(contrib)
            } else {
                series.add(contrib.neg())
            };
            if contrib.value().abs() < 1e-25 * series.value().abs().max(1e-30) {
                break;
            }
        }
        let log_part = Dd::from((x * 0.5).ln()).add(euler_gamma_dd());
        let inner = log_part.mul(j0_series(x)).add(series);
        inner.mul_f(std::f64::consts::FRAC_2_PI).value()
    } else {
        let (p, q) = hankel_pq(0.0, x);
        let chi = x - std::f64::consts::FRAC_PI_4;
        (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.sin() + q * chi.cos())
    }
}

pub fn y1(x: f64) -> f64 {
    assert!(x > 0.0, "y1 requires a positive argument");
    if x <= SERIES_CUTOFF {
        // -(2/(pi x)) + (2/pi) ln(x/2) J1(x)
        //   - (x/(2 pi)) sum_k (psi(k+1)+psi(k+2)) (-q)^k / (k!(k+1)!)
        let q = Dd::from(x * 0.5).mul(Dd::from(x * 0.5));
        let mut term = Dd::from(1.0);
        // psi(1) + psi(2) = -2 gamma + 1
        let mut psi_sum = euler_gamma_dd().mul_f(-2.0).add(Dd::from(1.0));
        let mut series = term.mul(psi_sum);
        for k in 1..200u64 {
            term = term.mul(q).neg().div_f((k * (k + 1)) as f64);
            let inc = Dd::from(1.0)
                .div_f(k as f64)
                .add(Dd::from(1.0).div_f((k + 1) as f64));
            psi_sum = psi_sum.add(inc);
            let contrib = term.mul(psi_sum);
            series = series.add(contrib);
            if contrib.value().abs() < 1e-25 * series.value().abs().max(1e-30) {
                break;
            }
        }
        let log_part = Dd::from((x * 0.5).ln())
            .mul(j1_series_core(x).mul_f(x * 0.5))
            .mul_f(std::f64::consts::FRAC_2_PI);
        let sing = -2.0 / (std::f64::consts::PI * x);
        let tail = series.mul_f(-x / (2.0 * std::f64::consts::PI));
        Dd::from(sing).add(log_part).add(tail).value()
    } else {
        let (p, q) = hankel_pq(4.0, x);
        let chi = x - 3.0 * std::f64::consts::FRAC_PI_4;
        (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.sin() + q * chi.cos())
    }
}

/// Trapezoid evaluation of int_0^inf exp(-x cosh t) cosh(nu t) dt at step h.
/// The integrand is even and analytic, so the trapezoid rule converges
/// geometrically as h shrinks.
fn k_trapezoid(nu: f64, x: f64, h: f64) -> f64 {
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    let mut sum = 0.5 * f(0.0);
    let mut prev = f64::INFINITY;
    for j in 1..100_000 {
        let term = f(j as f64 * h);
        sum += term;
        if term < prev && term < sum * 1e-19 {
            break;
        }
        prev = term;
    }
    sum * h
}

fn k_nu(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "modified Bessel K requires a positive argument");
    let mut h = 0.5;
    let mut prev = k_trapezoid(nu, x, h);
    for _ in 0..4 {
        h *= 0.5;
        let cur = k_trapezoid(nu, x, h);
        if (cur - prev).abs() <= 5e-15 * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

pub fn k0(x: f64) -> f64 {
    k_nu(0.0, x)
}

pub fn k1(x: f64) -> f64 {
    k_nu(1.0, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    J0,
    J1,
    Y0,
    Y1,
    K0,
    K1,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("Bessel {kind:?} requires a positive argument, got {arg}")]
pub struct NonPositiveArgument {
    pub kind: Kind,
    pub arg: f64,
}

/// Checked entry point over the positive half-line; sign branches for
/// negative arguments are the caller's responsibility.
pub fn eval(kind: Kind, arg: f64) -> Result<f64, NonPositiveArgument> {
    if !(arg > 0.0) {
        return Err(NonPositiveArgument { kind, arg });
    }
    Ok(match kind {
        Kind::J0 => j0(arg),
        Kind::J1 => j1(arg),
        Kind::Y0 => y0(arg),
        Kind::Y1 => y1(arg),
        Kind::K0 => k0(arg),
        Kind::K1 => k1(arg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = include_str!("../../assets/bessel_reference.csv");

    #[test]
    fn reference_table_to_1e12() {
        let mut checked = 0;
        for line in REFERENCE.lines().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let kind = parts.next().unwrap();
            let arg: f64 = parts.next().unwrap().parse().unwrap();
            let expected: f64 = parts.next().unwrap().parse().unwrap();
            let got = match kind {
                "j0" => j0(arg),
                "j1" => j1(arg),
                "y0" => y0(arg),
                "y1" => y1(arg),
                "k0" => k0(arg),
                "k1" => k1(arg),
                other => panic!("unknown kind {other}"),
            };
            let rel = (got - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
            assert!(
                rel <= 1e-12,
                "{kind}({arg}): got {got:e}, expected {expected:e}, rel err {rel:e}"
            );
            checked += 1;
        }
        assert!(checked >= 25, "reference table too small: {checked} rows");
    }

    #[test]
    fn small_argument_limits() {
        // J0 -> 1, J1 -> x/2, Y0 ~ (2/pi) ln x, K0 ~ -ln x, K1 ~ 1/x
        assert!((j0(1e-8) - 1.0).abs() < 1e-15);
        assert!((j1(1e-8) - 5e-9).abs() < 1e-22);
        assert!(y0(1e-6) < -8.0);
        assert!(k1(1e-4) * 1e-4 - 1.0 < 1e-6);
    }

    #[test]
    fn wronskian_identity() {
        // J_{1}(x) Y_0(x) - J_0(x) Y_1(x) = 2/(pi x)
        for &x in &[0.3, 1.7, 6.2, 12.9, 13.1, 27.0] {
            let w = j1(x) * y0(x) - j0(x) * y1(x);
            let expected = 2.0 / (std::f64::consts::PI * x);
            assert!(
                (w - expected).abs() < 1e-13 * expected.abs(),
                "wronskian at {x}: {w} vs {expected}"
            );
        }
    }

    #[test]
    fn j1_odd_j0_even() {
        assert_eq!(j0(-3.2), j0(3.2));
        assert_eq!(j1(-3.2), -j1(3.2));
    }

    #[test]
    fn checked_entry_point() {
        assert_eq!(eval(Kind::J0, 1.0), Ok(j0(1.0)));
        assert_eq!(
            eval(Kind::K1, 0.0),
            Err(NonPositiveArgument {
                kind: Kind::K1,
                arg: 0.0
            })
        );
        assert!(eval(Kind::Y1, -2.0).is_err());
    }
}
