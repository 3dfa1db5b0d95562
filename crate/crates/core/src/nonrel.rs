//! Nonrelativistic teleportation: finite qudits and lattice packets.
//!
//! The qudit protocol uses the shift-and-phase Bell family; every outcome
//! fires with probability 1/d^2 and the labeled correction restores the
//! input exactly, so fidelities here are limited only by roundoff.
//!
//! On the momentum lattice the same protocol teleports a packet into the
//! cyclically shifted and phased copy f(x - X) e^{iP(x - X)}; the outcome
//! phase is attached to the measured total momentum so that form holds
//! exactly, with no residual outcome-dependent global phase. The limit
//! expansion keeps the three contraction channels of the relativistic
//! calculation, weights (2, 2, 4): two equivalent teleporting channels
//! differing by a global phase, and a parasitic channel that returns the
//! unshifted input gated by the source/measurement overlap, hence only the
//! zero outcome is contaminated.

use num_complex::Complex64;
use rand::Rng;

use crate::measurement::{MeasurementError, MomentumGrid, Outcome};
use crate::numerics::sum::{kbn, kbn_complex};
use crate::states::NRPacket;
use crate::wick::Tag;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NonrelError {
    #[error("qudit dimension must be in 2..=16, got {0}")]
    BadQuditDimension(usize),
    #[error("state has {got} amplitudes, expected {expected}")]
    StateLength { got: usize, expected: usize },
    #[error("state norm is zero")]
    ZeroState,
    #[error(transparent)]
    Grid(#[from] MeasurementError),
}

/// Normalized state of a d-level system.
#[derive(Clone, Debug, PartialEq)]
pub struct QuditState {
    pub amplitudes: Vec<Complex64>,
}

impl QuditState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, NonrelError> {
        let d = amplitudes.len();
        if !(2..=16).contains(&d) {
            return Err(NonrelError::BadQuditDimension(d));
        }
        let n = kbn(amplitudes.iter().map(|z| z.norm_sqr())).sqrt();
        if n == 0.0 {
            return Err(NonrelError::ZeroState);
        }
        Ok(QuditState {
            amplitudes: amplitudes.into_iter().map(|z| z / n).collect(),
        })
    }

    pub fn random<R: Rng>(d: usize, rng: &mut R) -> Result<Self, NonrelError> {
        let amps = (0..d)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        QuditState::new(amps)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn overlap(&self, other: &QuditState) -> Complex64 {
        kbn_complex(
            self.amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a.conj() * b),
        )
    }
}

/// Bell-family label: cyclic shift a and phase winding b.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BellOutcome {
    pub shift: usize,
    pub phase: usize,
}

#[derive(Clone, Debug)]
pub struct TeleportRecord {
    pub outcome: BellOutcome,
    pub probability: f64,
    /// Receiver state conditioned on the outcome, before correction.
    pub post_state: QuditState,
    /// After the inverse shift-and-phase labeled by the outcome.
    pub corrected: QuditState,
    pub fidelity: f64,
}

/// Run the d-level protocol over every Bell outcome.
pub fn teleport_qudit(input: &QuditState) -> Result<Vec<TeleportRecord>, NonrelError> {
    let d = input.dim();
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    let mut records = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            // <B_ab| (psi x B_00): component m of the receiver is
            // (1/d) omega^{-(m-a) b} c_{m-a}
            let mut post = vec![Complex64::new(0.0, 0.0); d];
            for (m, slot) in post.iter_mut().enumerate() {
                let j = (m + d - a) % d;
                *slot = input.amplitudes[j]
                    * Complex64::from_polar(1.0 / d as f64, -omega * (j * b) as f64);
            }
            let probability = kbn(post.iter().map(|z| z.norm_sqr()));
            // correction: undo the shift, rewind the phase
            let corrected: Vec<Complex64> = (0..d)
                .map(|j| {
                    post[(j + a) % d] * Complex64::from_polar(d as f64, omega * (j * b) as f64)
                })
                .collect();
            let post_state = QuditState {
                amplitudes: post.iter().map(|z| z * d as f64).collect(),
            };
            let corrected = QuditState {
                amplitudes: corrected,
            };
            let fidelity = input.overlap(&corrected).norm_sqr();
            records.push(TeleportRecord {
                outcome: BellOutcome { shift: a, phase: b },
                probability,
                post_state,
                corrected,
                fidelity,
            });
        }
    }
    Ok(records)
}

/// Teleported lattice packet for one outcome: cyclic momentum shift by P
/// with the phase e^{-i k X} on the shifted total, the momentum form of
/// f(x - X) e^{iP(x - X)}. X must sit on the dual lattice for the cyclic
/// identity to be exact.
pub fn nr_teleport_amplitude(
    packet: &NRPacket,
    outcome: &Outcome,
) -> Result<NRPacket, NonrelError> {
    let grid = packet.grid;
    let p_idx = grid.momentum_index(outcome.p[0])?;
    grid.position_index(outcome.x[0])?;
    let n = grid.n_points() as i64;
    let ks = grid.momenta();
    let values = (0..n)
        .map(|j| {
            let src = (j - p_idx).rem_euclid(n) as usize;
            // phase on the output momentum: with X on the dual lattice the
            // wrap multiples of n dk drop out of every position sample, so
            // the shifted-packet form is an exact cyclic identity
            packet.values[src] * Complex64::from_polar(1.0, -ks[j as usize] * outcome.x[0])
        })
        .collect();
    Ok(NRPacket {
        grid,
        values,
    })
}

/// Born weight of one outcome against the ideal difference-correlated
/// source, normalized to the packet's flat norm: the hard-truncated sum of
/// |f|^2 over momenta the shift keeps on the grid. Flat in (X, P) for
/// packets supported away from the grid edge, and quadratic in any overall
/// amplitude scale.
pub fn nr_outcome_probability(
    packet: &NRPacket,
    outcome: &Outcome,
) -> Result<f64, NonrelError> {
    let grid = packet.grid;
    let p_idx = grid.momentum_index(outcome.p[0])?;
    grid.position_index(outcome.x[0])?;
    let n = grid.n_points() as i64;
    let mass = kbn((0..n).filter_map(|j| {
        let src = j - p_idx;
        if (0..n).contains(&src) {
            Some(packet.values[src as usize].norm_sqr())
        } else {
            None
        }
    }));
    Ok(mass * grid.dk())
}

/// Overlap of the ideal lattice pair state with fixed momentum difference
/// q against one measurement outcome: a Kronecker delta in P = q times the
/// dual-lattice Dirichlet sum in X, so for q = 0 only the zero outcome
/// survives.
pub fn nr_epr_overlap(
    q: f64,
    outcome: &Outcome,
    grid: &MomentumGrid,
) -> Result<Complex64, NonrelError> {
    let p_idx = grid.momentum_index(outcome.p[0])?;
    let q_idx = grid.momentum_index(q)?;
    grid.position_index(outcome.x[0])?;
    if p_idx != q_idx {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let h = grid.half();
    let ks = grid.momenta();
    let terms = (-h..=h).filter_map(|i| {
        let j = i + p_idx;
        if (-h..=h).contains(&j) {
            Some(Complex64::from_polar(1.0, -ks[(i + h) as usize] * outcome.x[0]))
        } else {
            None
        }
    });
    Ok(kbn_complex(terms))
}

/// Count of outcomes with a nonvanishing ideal-pair overlap, over the full
/// outcome lattice. For q = 0 exactly one in n^2 survives.
pub fn nr_epr_overlap_fraction(
    q: f64,
    grid: &MomentumGrid,
) -> Result<(usize, usize, f64), NonrelError> {
    let h = grid.half();
    let mut max_mag = 0.0f64;
    let mut mags = Vec::new();
    for l in -h..=h {
        for p in -h..=h {
            let o = Outcome::new_1d(l as f64 * grid.dx(), p as f64 * grid.dk());
            let v = nr_epr_overlap(q, &o, grid)?.norm();
            max_mag = max_mag.max(v);
            mags.push(v);
        }
    }
    let nonzero = mags.iter().filter(|&&v| v > 1e-10 * max_mag).count();
    let total = mags.len();
    Ok((nonzero, total, nonzero as f64 / total as f64))
}

/// One channel of the nonrelativistic limit of the full contraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NRTermForm {
    /// Shifted, phased packet: f(x - X) e^{iP(x - X)}.
    Direct,
    /// Same packet with the extra outcome phase e^{iPX}.
    Exchange,
    /// Unshifted input gated by the ideal pair/measurement overlap.
    Parasitic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NRLimitTerm {
    pub tag: Tag,
    pub weight: u64,
    pub form: NRTermForm,
}

/// The three-channel structure with its contraction multiplicities.
pub fn nr_limit_expansion() -> [NRLimitTerm; 3] {
    [
        NRLimitTerm {
            tag: Tag::TeleportDirect,
            weight: 2,
            form: NRTermForm::Direct,
        },
        NRLimitTerm {
            tag: Tag::TeleportExchange,
            weight: 2,
            form: NRTermForm::Exchange,
        },
        NRLimitTerm {
            tag: Tag::Parasitic,
            weight: 4,
            form: NRTermForm::Parasitic,
        },
    ]
}

/// Lattice evaluation of one limit channel: a scalar gate times a packet.
/// Weights are not applied here; the caller sums weight * scalar * state.
pub fn evaluate_nr_term(
    term: &NRLimitTerm,
    packet: &NRPacket,
    outcome: &Outcome,
) -> Result<(Complex64, NRPacket), NonrelError> {
    match term.form {
        NRTermForm::Direct => Ok((
            Complex64::new(1.0, 0.0),
            nr_teleport_amplitude(packet, outcome)?,
        )),
        NRTermForm::Exchange => Ok((
            Complex64::from_polar(1.0, outcome.p[0] * outcome.x[0]),
            nr_teleport_amplitude(packet, outcome)?,
        )),
        NRTermForm::Parasitic => {
            let gate = nr_epr_overlap(0.0, outcome, &packet.grid)?;
            Ok((gate, packet.clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, dk: f64) -> MomentumGrid {
        MomentumGrid::new(1, n, dk).unwrap()
    }

    #[test]
    fn qudit_probabilities_flat_and_fidelity_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [2usize, 3, 5] {
            for _ in 0..5 {
                let input = QuditState::random(d, &mut rng).unwrap();
                let records = teleport_qudit(&input).unwrap();
                assert_eq!(records.len(), d * d);
                let expected = 1.0 / (d * d) as f64;
                for r in &records {
                    assert!(
                        (r.probability - expected).abs() <= 1e-14,
                        "d={d}: p={} vs {expected}",
                        r.probability
                    );
                    assert!(
                        r.fidelity >= 1.0 - 1e-13,
                        "d={d} outcome {:?}: fidelity {}",
                        r.outcome,
                        r.fidelity
                    );
                }
                let total: f64 = records.iter().map(|r| r.probability).sum();
                assert!((total - 1.0).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn qudit_correction_is_necessary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let input = QuditState::random(3, &mut rng).unwrap();
        let records = teleport_qudit(&input).unwrap();
        let nontrivial = records
            .iter()
            .filter(|r| r.outcome != (BellOutcome { shift: 0, phase: 0 }))
            .filter(|r| input.overlap(&r.post_state).norm_sqr() < 1.0 - 1e-6)
            .count();
        assert!(nontrivial > 0, "post-measurement states should need fixing");
    }

    #[test]
    fn qudit_dimension_bounds() {
        assert!(matches!(
            QuditState::new(vec![Complex64::new(1.0, 0.0)]),
            Err(NonrelError::BadQuditDimension(1))
        ));
        assert!(matches!(
            QuditState::new(vec![Complex64::new(1.0, 0.0); 17]),
            Err(NonrelError::BadQuditDimension(17))
        ));
    }

    #[test]
    fn teleported_packet_is_shifted_and_phased() {
        let g = grid(17, 0.5);
        let f = NRPacket::gaussian(g, 0.3, 0.6, 0.4).unwrap();
        let (x_step, p_step) = (g.dx(), g.dk());
        let outcome = Outcome::new_1d(2.0 * x_step, 3.0 * p_step);
        let out = nr_teleport_amplitude(&f, &outcome).unwrap();
        let n = g.n_points() as i64;
        let ks = g.momenta();
        for j in 0..n {
            let src = (j - 3).rem_euclid(n) as usize;
            let expected = f.values[src]
                * Complex64::from_polar(1.0, -ks[j as usize] * outcome.x[0]);
            assert!((out.values[j as usize] - expected).norm() < 1e-14);
        }
        // position space: out(x) = f(x - X) e^{iP(x - X)} on the cyclic
        // lattice; packet tails make wrap effects negligible
        let fpos = f.to_position();
        let opos = out.to_position();
        let xs = g.x_lattice();
        for (l, &x) in xs.iter().enumerate() {
            let shifted = x - outcome.x[0];
            // locate shifted point on the lattice, cyclically
            let idx = ((shifted / g.dx()).round() as i64 + g.half()).rem_euclid(n) as usize;
            let expected =
                fpos[idx] * Complex64::from_polar(1.0, outcome.p[0] * (x - outcome.x[0]));
            let got = opos[l];
            assert!(
                (got - expected).norm() <= 1e-8,
                "site {l}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn off_lattice_outcomes_rejected() {
        let g = grid(9, 0.5);
        let f = NRPacket::gaussian(g, 0.0, 0.5, 0.0).unwrap();
        assert!(nr_teleport_amplitude(&f, &Outcome::new_1d(0.3 * g.dx(), 0.0)).is_err());
        assert!(nr_teleport_amplitude(&f, &Outcome::new_1d(0.0, 0.7)).is_err());
    }

    #[test]
    fn outcome_probability_flat_and_quadratic_in_scale() {
        let g = grid(33, 0.5);
        let f = NRPacket::gaussian(g, 0.0, g.cutoff() / 14.0, 1.3).unwrap();
        let h = g.half();
        let mut probs = Vec::new();
        for l in [-3i64, 0, 5] {
            for p in -h / 2..=h / 2 {
                let o = Outcome::new_1d(l as f64 * g.dx(), p as f64 * g.dk());
                probs.push(nr_outcome_probability(&f, &o).unwrap());
            }
        }
        let (lo, hi) = probs
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(
            hi / lo - 1.0 <= 1e-10,
            "probability spread {:e}",
            hi / lo - 1.0
        );
        // |c|^2 scaling
        let c = Complex64::new(0.7, 0.2);
        let scaled = NRPacket::from_values(
            g,
            f.values.iter().map(|v| v * c).collect(),
        )
        .unwrap();
        let o = Outcome::new_1d(0.0, g.dk());
        let p0 = nr_outcome_probability(&f, &o).unwrap();
        let p1 = nr_outcome_probability(&scaled, &o).unwrap();
        assert!((p1 / p0 - c.norm_sqr()).abs() <= 1e-12);
    }

    #[test]
    fn epr_overlap_only_zero_outcome_and_scaling() {
        for n in [9usize, 13, 17] {
            let g = grid(n, 0.5);
            let (nonzero, total, fraction) = nr_epr_overlap_fraction(0.0, &g).unwrap();
            assert_eq!(nonzero, 1, "n={n}");
            assert_eq!(total, n * n);
            assert!((fraction - 1.0 / (n * n) as f64).abs() < 1e-15);
            let peak = nr_epr_overlap(0.0, &Outcome::new_1d(0.0, 0.0), &g).unwrap();
            assert!((peak.re - n as f64).abs() < 1e-10 && peak.im.abs() < 1e-10);
        }
    }

    #[test]
    fn limit_expansion_weights_and_mixing() {
        let terms = nr_limit_expansion();
        let weights: Vec<u64> = terms.iter().map(|t| t.weight).collect();
        assert_eq!(weights, vec![2, 2, 4]);
        assert_eq!(terms[0].tag, Tag::TeleportDirect);
        assert_eq!(terms[1].tag, Tag::TeleportExchange);
        assert_eq!(terms[2].tag, Tag::Parasitic);

        let g = grid(9, 0.5);
        let f = NRPacket::gaussian(g, 0.0, 0.6, 0.0).unwrap();
        // away from the zero outcome the parasitic gate vanishes and the
        // two teleporting channels differ by the global phase e^{iPX}
        let o = Outcome::new_1d(g.dx(), 2.0 * g.dk());
        let (s_dir, v_dir) = evaluate_nr_term(&terms[0], &f, &o).unwrap();
        let (s_exc, v_exc) = evaluate_nr_term(&terms[1], &f, &o).unwrap();
        let (s_par, _) = evaluate_nr_term(&terms[2], &f, &o).unwrap();
        assert_eq!(v_dir.values, v_exc.values);
        let phase = s_exc / s_dir;
        assert!((phase.norm() - 1.0).abs() < 1e-14);
        assert!((phase.arg() - o.p[0] * o.x[0]).abs() < 1e-12);
        assert_eq!(s_par, Complex64::new(0.0, 0.0));
        // at the zero outcome all three channels mix and the parasitic
        // gate equals the full lattice count
        let o0 = Outcome::new_1d(0.0, 0.0);
        let (s_par0, v_par0) = evaluate_nr_term(&terms[2], &f, &o0).unwrap();
        assert!((s_par0.re - g.n_points() as f64).abs() < 1e-10);
        assert_eq!(v_par0.values, f.values);
        let (s_dir0, v_dir0) = evaluate_nr_term(&terms[0], &f, &o0).unwrap();
        assert_eq!(s_dir0, Complex64::new(1.0, 0.0));
        assert_eq!(v_dir0.values, f.values);
    }
}
