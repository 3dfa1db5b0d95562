//! Acceptance battery: the headline guarantees, one test each, printing one
//! verdict line apiece. The tolerances are the contract; never loosen them.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fieldport_core::amplitude::{
    parasitic_fraction, symbolic_amplitude, symbolic_amplitude_distinct_pair, term_value_momentum,
    term_value_position, Scenario,
};
use fieldport_core::conventions::Conventions;
use fieldport_core::measurement::{
    completeness_defect, refinement_study, MomentumGrid, Outcome, PovmFamily,
};
use fieldport_core::nonrel::{
    nr_epr_overlap, nr_epr_overlap_fraction, nr_limit_expansion, nr_teleport_amplitude,
    teleport_qudit, QuditState,
};
use fieldport_core::propagator::{
    decay_fit, dplus_closed_form, dplus_quadrature, measure_calibration, pauli_jordan, FourVector,
    Route,
};
use fieldport_core::states::{EPRFamily, GaussianPacket, NRPacket};
use fieldport_core::wick::{
    brute_force_vev, evaluate_expansion_discrete, vacuum_expectation_symbolic, ModeAssignment,
    OperatorFactor, OperatorWord, PointLabel, Tag,
};

fn pass(no: u32, what: &str, started: Instant) {
    println!(
        "ACCEPTANCE {no} ({what}): PASS [{:.2}s]",
        started.elapsed().as_secs_f64()
    );
}

fn teleport_scenario() -> Scenario {
    let conv = Conventions::new(2.0, 1).unwrap();
    let packet = GaussianPacket::new(vec![0.0], 0.4, vec![0.0], 0.25).unwrap();
    let epr = EPRFamily::new(0.1, vec![0.0], 0.0).unwrap();
    Scenario::new(packet, epr, 1.0, 2.0, conv).unwrap()
}

#[test]
fn acceptance_01_wick_matches_fock_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for trial in 0..22u32 {
        // two of the words are unbalanced and must vanish on both sides
        let n_c = rng.gen_range(1..=3usize);
        let n_a = if trial < 2 { (n_c % 3) + 1 } else { n_c };
        let modes = rng.gen_range(1..=3usize);
        let mut factors = Vec::new();
        let mut assignment = ModeAssignment::new();
        for i in 0..n_a {
            let label = PointLabel::new(format!("a{trial}_{i}"), i as f64 * 0.3);
            assignment.insert(
                label.clone(),
                (0..modes)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect(),
            );
            factors.push(OperatorFactor::annihilation(label));
        }
        for i in 0..n_c {
            let label = PointLabel::new(format!("c{trial}_{i}"), i as f64 * 0.7);
            assignment.insert(
                label.clone(),
                (0..modes)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect(),
            );
            factors.push(OperatorFactor::creation(label));
        }
        let word = OperatorWord::new(factors);
        let exp = vacuum_expectation_symbolic(&word).unwrap();
        let symbolic = evaluate_expansion_discrete(&exp, &assignment).unwrap();
        let oracle = brute_force_vev(&word, modes, 4, &assignment).unwrap();
        assert!(!oracle.truncation_overflow, "trial {trial} overflowed");
        let gap = (symbolic - oracle.value).norm();
        let scale = oracle.value.norm().max(1.0);
        assert!(
            gap <= 1e-10 * scale,
            "trial {trial}: symbolic {symbolic} vs oracle {} (gap {gap:e})",
            oracle.value
        );
        if n_a != n_c {
            assert_eq!(symbolic, Complex64::new(0.0, 0.0));
            assert_eq!(oracle.value, Complex64::new(0.0, 0.0));
        }
        checked += 1;
    }
    assert!(checked >= 20);
    pass(1, "symbolic pairing equals truncated-Fock oracle", t0);
}

#[test]
fn acceptance_02_pairing_structure() {
    let t0 = Instant::now();
    let sc = teleport_scenario();
    let distinct = symbolic_amplitude_distinct_pair(&sc).unwrap();
    assert_eq!(distinct.terms.len(), 6, "expected six pairings");
    let collapsed = symbolic_amplitude(&sc).unwrap();
    let mut weights: Vec<u64> = collapsed.terms.iter().map(|t| t.multiplicity).collect();
    weights.sort_unstable();
    assert_eq!(weights, vec![2, 2, 4]);
    let share = parasitic_fraction(&collapsed);
    assert_eq!(*share.numer(), 1);
    assert_eq!(*share.denom(), 2);
    pass(2, "six pairings, weights (2,2,4), non-teleporting share 1/2", t0);
}

#[test]
fn acceptance_03_microcausality() {
    let t0 = Instant::now();
    let conv = Conventions::new(1.0, 3).unwrap();
    let calibrated = conv.with_calibration(measure_calibration(&conv).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for i in 0..50 {
        let t: f64 = rng.gen_range(-2.0..2.0);
        let s: f64 = 0.15 + rng.gen_range(0.0..2.5);
        let r = (t * t + s * s).sqrt();
        let x = FourVector::radial(t, r, 3);
        let dp = dplus_closed_form(&x, &calibrated).unwrap();
        let pj = pauli_jordan(&x, &calibrated, Route::ClosedForm).unwrap();
        assert!(
            pj.value.norm() <= 1e-12 * dp.value.norm(),
            "point {i} closed form: |D+ + D-| = {:e} vs |D+| = {:e}",
            pj.value.norm(),
            dp.value.norm()
        );
        let pjq = pauli_jordan(&x, &calibrated, Route::Quadrature).unwrap();
        assert!(
            pjq.value.norm() <= 10.0 * pjq.est_error,
            "point {i} quadrature: |D+ + D-| = {:e} vs est {:e}",
            pjq.value.norm(),
            pjq.est_error
        );
    }
    pass(3, "commutator vanishes at 50 spacelike points", t0);
}

#[test]
fn acceptance_04_compton_decay_rate() {
    let t0 = Instant::now();
    for m in [1.0, 2.0] {
        let conv = Conventions::new(m, 3).unwrap();
        let s: Vec<f64> = (0..13)
            .map(|i| 2.0 / m + (4.0 / m) * i as f64 / 12.0)
            .collect();
        let fit = decay_fit(&conv, &s).unwrap();
        assert!(
            fit.rel_gap <= 0.05,
            "m = {m}: slope {} vs expected {} (rel gap {})",
            fit.slope,
            fit.expected,
            fit.rel_gap
        );
    }
    pass(4, "spacelike decay rate within 5% of the mass", t0);
}

#[test]
fn acceptance_05_calibration_ratio_constant() {
    let t0 = Instant::now();
    // raw layout: calibration is 1 by construction until measured
    let conv = Conventions::new(1.0, 3).unwrap();
    assert_eq!(conv.closed_form_calibration, 1.0);
    let mut points = Vec::new();
    for i in 0..10 {
        let t = -1.5 + 0.31 * i as f64;
        points.push(FourVector::radial(t, (t * t + 1.1 + 0.2 * i as f64).sqrt(), 3));
    }
    for i in 0..10 {
        let r = 0.2 + 0.12 * i as f64;
        points.push(FourVector::radial((r * r + 1.0 + 0.15 * i as f64).sqrt(), r, 3));
    }
    let ratios: Vec<Complex64> = points
        .iter()
        .map(|x| {
            let quad = dplus_quadrature(x, &conv).unwrap();
            let raw = dplus_closed_form(x, &conv).unwrap();
            quad.value / raw.value
        })
        .collect();
    let mean = ratios.iter().sum::<Complex64>() / ratios.len() as f64;
    for (i, r) in ratios.iter().enumerate() {
        assert!(
            (r - mean).norm() <= 1e-6 * mean.norm(),
            "point {i}: ratio {r} drifts from mean {mean}"
        );
    }
    let measured = measure_calibration(&conv).unwrap();
    assert!((measured - mean.re).abs() <= 1e-6);
    pass(5, "closed-form/quadrature ratio constant across 20 points", t0);
}

#[test]
fn acceptance_06_povm_completeness() {
    let t0 = Instant::now();
    let conv = Conventions::new(1.0, 1).unwrap();
    let grid = MomentumGrid::new(1, 33, 0.35).unwrap();
    let nr = completeness_defect(PovmFamily::NonRelativistic, &grid, &conv).unwrap();
    assert!(nr <= 1e-10, "flat-measure interior defect {nr:e}");
    let rel_family = PovmFamily::Relativistic { xi0: 1.0 };
    let rel = completeness_defect(rel_family, &grid, &conv).unwrap();
    assert!(rel <= 1e-10, "mass-shell interior defect {rel:e}");
    let study = refinement_study(rel_family, &grid, &conv).unwrap();
    assert!(
        study.ratio >= 1.8,
        "refinement ratio {} (coarse {:e}, fine {:e})",
        study.ratio,
        study.coarse,
        study.fine
    );
    pass(6, "lattice completeness: roundoff interior defect, refinement helps", t0);
}

#[test]
fn acceptance_07_qudit_teleportation() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for d in [2usize, 3, 5] {
        let uniform = 1.0 / (d * d) as f64;
        for trial in 0..100 {
            let state = QuditState::random(d, &mut rng).unwrap();
            let records = teleport_qudit(&state).unwrap();
            assert_eq!(records.len(), d * d);
            for r in &records {
                assert!(
                    (r.probability - uniform).abs() <= 1e-12,
                    "d = {d} trial {trial}: outcome probability {} vs {uniform}",
                    r.probability
                );
                assert!(
                    r.fidelity >= 1.0 - 1e-12,
                    "d = {d} trial {trial}: corrected fidelity {}",
                    r.fidelity
                );
            }
        }
    }
    pass(7, "qudit outcomes uniform 1/d^2, corrected fidelity 1", t0);
}

#[test]
fn acceptance_08_nr_limit() {
    let t0 = Instant::now();
    let terms = nr_limit_expansion();
    let weights: Vec<u64> = terms.iter().map(|t| t.weight).collect();
    assert_eq!(weights, vec![2, 2, 4]);
    assert_eq!(terms[0].tag, Tag::TeleportDirect);

    // exact shifted-packet form of the direct channel on the cyclic grid
    let grid = MomentumGrid::new(1, 33, 0.5).unwrap();
    let f = NRPacket::gaussian(grid, 0.0, grid.cutoff() / 14.0, 1.3).unwrap();
    let outcome = Outcome::new_1d(4.0 * grid.dx(), 3.0 * grid.dk());
    let shifted = nr_teleport_amplitude(&f, &outcome).unwrap();
    let fpos = f.to_position();
    let opos = shifted.to_position();
    let n = grid.n_points() as i64;
    for (l, &x) in grid.x_lattice().iter().enumerate() {
        let idx =
            (((x - outcome.x[0]) / grid.dx()).round() as i64 + grid.half()).rem_euclid(n) as usize;
        let expected = fpos[idx] * Complex64::from_polar(1.0, outcome.p[0] * (x - outcome.x[0]));
        assert!(
            (opos[l] - expected).norm() <= 1e-12,
            "lattice point {l}: {} vs {expected}",
            opos[l]
        );
    }

    // flat probability map on the interior momentum window
    let h = grid.half();
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for l in [-3i64, 0, 5] {
        for p in -h / 2..=h / 2 {
            let o = Outcome::new_1d(l as f64 * grid.dx(), p as f64 * grid.dk());
            let prob = fieldport_core::nonrel::nr_outcome_probability(&f, &o).unwrap();
            lo = lo.min(prob);
            hi = hi.max(prob);
        }
    }
    assert!(hi / lo - 1.0 <= 1e-10, "probability spread {:e}", hi / lo - 1.0);
    pass(8, "limit channels (2,2,4), exact lattice shift, flat map", t0);
}

#[test]
fn acceptance_09_epr_zero_measure() {
    let t0 = Instant::now();
    for n in [9usize, 17, 33] {
        let grid = MomentumGrid::new(1, n, 0.5).unwrap();
        let (nonzero, total, fraction) = nr_epr_overlap_fraction(0.0, &grid).unwrap();
        assert_eq!(nonzero, 1, "n = {n}: support beyond the zero outcome");
        assert_eq!(total, n * n);
        assert!((fraction * (n * n) as f64 - 1.0).abs() <= 1e-12);
        // and the surviving point is (0, 0)
        let zero = nr_epr_overlap(0.0, &Outcome::new_1d(0.0, 0.0), &grid).unwrap();
        assert!(zero.norm() > 0.0);
        let off = nr_epr_overlap(0.0, &Outcome::new_1d(0.0, grid.dk()), &grid).unwrap();
        assert_eq!(off, Complex64::new(0.0, 0.0));
    }
    pass(9, "pair overlap supported only at (0,0), fraction 1/N", t0);
}

#[test]
fn acceptance_10_dual_route_amplitude() {
    let t0 = Instant::now();
    let sc = teleport_scenario();
    assert!((sc.epr.sigma_epr - sc.packet.sigma_k / 4.0).abs() < 1e-15);
    let exp = symbolic_amplitude(&sc).unwrap();
    for bx in [-0.6, 0.0, 0.6] {
        for bp in [-0.3, 0.0, 0.3] {
            for x in [-0.8, 0.4, 1.5] {
                let outcome = Outcome::new_1d(bx, bp);
                let mut total_m = Complex64::new(0.0, 0.0);
                let mut total_p = Complex64::new(0.0, 0.0);
                let mut pairs = Vec::new();
                for term in &exp.terms {
                    let vm = term_value_momentum(term, &sc, &outcome, x).unwrap();
                    let vp = term_value_position(term, &sc, &outcome, x).unwrap();
                    total_m += vm.value * vm.weight as f64;
                    total_p += vp.value * vp.weight as f64;
                    pairs.push((vm, vp));
                }
                let leading = pairs
                    .iter()
                    .map(|(a, b)| a.value.norm().max(b.value.norm()))
                    .fold(0.0f64, f64::max);
                for (vm, vp) in &pairs {
                    let denom = vm.value.norm().max(vp.value.norm());
                    if denom > 1e-6 * leading {
                        let rel = (vm.value - vp.value).norm() / denom;
                        assert!(
                            rel <= 1e-3,
                            "term {:?} at (X={bx}, P={bp}, x={x}): momentum {} vs position {} (rel {rel:e})",
                            vm.tag,
                            vm.value,
                            vp.value
                        );
                    }
                }
                let rel_total =
                    (total_m - total_p).norm() / total_m.norm().max(total_p.norm());
                assert!(
                    rel_total <= 1e-3,
                    "total at (X={bx}, P={bp}, x={x}): {total_m} vs {total_p} (rel {rel_total:e})"
                );
            }
        }
    }
    pass(10, "momentum and position routes agree on 27 probes", t0);
}

#[test]
fn acceptance_11_reproducibility() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg_path = dir.path().join("scenario.json");
    let cfg = serde_json::json!({
        "conventions": {"mass": 2.0, "spatial_dims": 1},
        "packet": {"k_center": [0.0], "sigma_k": 0.4, "x_center": [0.0], "t0": 0.25},
        "epr": {"sigma": 0.1, "q_total": [0.0], "pair_time": 0.0},
        "times": {"t_pair": 0.0, "t_packet": 0.25, "t_meas": 1.0, "t_out": 2.0},
        "grid": {
            "lattice": {"n_points": 33, "dk": 0.35},
            "spacetime": {"t_min": -1.5, "t_max": 1.5, "t_steps": 5,
                          "r_min": 0.2, "r_max": 3.0, "r_steps": 5},
            "outcome": {"x_half": 0.5, "x_steps": 2, "p_half": 0.3, "p_steps": 1},
            "observation": {"half_width": 4.0, "points": 5}
        },
        "output": {"dir": out.to_str().unwrap(), "formats": ["csv", "json"]}
    });
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let bin = env!("CARGO_BIN_EXE_fieldport");

    let run = |args: &[&str]| {
        let status = std::process::Command::new(bin)
            .args(args)
            .status()
            .expect("binary runs");
        assert!(status.success(), "{args:?} exited {status}");
    };
    let grab = |names: &[&str]| -> Vec<Vec<u8>> {
        names
            .iter()
            .map(|n| std::fs::read(out.join(n)).expect("artifact exists"))
            .collect()
    };

    let cfg_arg = cfg_path.to_str().unwrap();
    run(&["amplitude-scan", "--config", cfg_arg, "--threads", "1"]);
    run(&["nr-limit", "--config", cfg_arg, "--threads", "1"]);
    let first = grab(&[
        "amplitude_scan.csv",
        "amplitude_scan.json",
        "nr_limit.csv",
        "nr_limit.json",
    ]);
    run(&["amplitude-scan", "--config", cfg_arg, "--threads", "4"]);
    run(&["nr-limit", "--config", cfg_arg, "--threads", "4"]);
    let second = grab(&[
        "amplitude_scan.csv",
        "amplitude_scan.json",
        "nr_limit.csv",
        "nr_limit.json",
    ]);
    assert_eq!(first, second, "artifacts differ across thread counts");

    let outq = dir.path().join("outq");
    let outq_arg = outq.to_str().unwrap();
    run(&["teleport-qudit", "--dim", "2", "--trials", "10", "--seed", "7", "--out-dir", outq_arg]);
    let q1 = std::fs::read(outq.join("teleport_qudit.json")).unwrap();
    run(&["teleport-qudit", "--dim", "2", "--trials", "10", "--seed", "7", "--out-dir", outq_arg]);
    let q2 = std::fs::read(outq.join("teleport_qudit.json")).unwrap();
    assert_eq!(q1, q2, "seeded qudit summaries differ between runs");
    pass(11, "byte-identical artifacts across thread counts and reruns", t0);
}
