//! Adaptive Gauss-Kronrod quadrature with phase-aware panel control and an
//! accelerated driver for semi-infinite oscillatory integrals.
//!
//! Mass-shell integrands look like A(k) e^{i phi(k)} where the amplitude may
//! decay slowly (or not at all, in the Abel-summed sense) while the phase
//! grows without bound. Finite cores are handled by adaptive G7-K15 panels
//! that are also forced below a fixed phase increment; tails are summed as
//! half-period panels and accelerated by repeated averaging of partial sums,
//! which converges precisely when the panel sequence is (eventually)
//! alternating, including the growing-amplitude Abel cases.
//!
//! All refinement is deterministic: the panel queue breaks ties by insertion
//! order and final sums run over panels sorted by left endpoint with
//! compensated accumulation, so results are independent of thread count and
//! identical run to run.

use num_complex::Complex64;

use super::sum;

// G7-K15 nodes and weights (positive half, descending; last entry is the
// center node). Gauss nodes are the odd-indexed Kronrod nodes plus center.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Phase increment above which a panel is split regardless of its error
/// estimate, keeping the rule well inside its resolution for oscillations.
const PHASE_SPAN_LIMIT: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Clone, Copy, Debug)]
pub struct AccuracyGoal {
    pub abs: f64,
    pub rel: f64,
}

impl AccuracyGoal {
    pub fn new(abs: f64, rel: f64) -> Self {
        AccuracyGoal { abs, rel }
    }

    pub fn target_for(&self, scale: f64) -> f64 {
        self.abs.max(self.rel * scale)
    }
}

impl Default for AccuracyGoal {
    fn default() -> Self {
        AccuracyGoal {
            abs: 1e-13,
            rel: 1e-11,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: Complex64,
    pub est_error: f64,
    pub evals: usize,
    /// Number of panels in the final subdivision (finite part) plus
    /// half-period panels consumed by a tail.
    pub panels: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum QuadratureError {
    #[error(
        "quadrature did not converge on [{a}, {b}]: estimated error {est_error:e} \
         exceeds target {target:e} after {evals} integrand evaluations"
    )]
    NonConvergent {
        a: f64,
        b: f64,
        est_error: f64,
        target: f64,
        evals: usize,
    },
    #[error("invalid integration domain [{a}, {b}]")]
    InvalidDomain { a: f64, b: f64 },
    #[error(
        "oscillatory tail from {start} did not stabilize: estimated error {est_error:e} \
         exceeds target {target:e} after {panels} half-period panels"
    )]
    TailNotStabilized {
        start: f64,
        est_error: f64,
        target: f64,
        panels: usize,
    },
}

/// One G7-K15 application; the error estimate follows the QUADPACK rescaling
/// so nearly-singular panels are not reported as falsely converged.
fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let mut pairs = [[Complex64::new(0.0, 0.0); 2]; 7];
    for (j, pair) in pairs.iter_mut().enumerate() {
        pair[0] = f(c - h * XGK[j]);
        pair[1] = f(c + h * XGK[j]);
    }
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for j in 0..7 {
        let s = pairs[j][0] + pairs[j][1];
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }

    let err_component = |part: fn(&Complex64) -> f64| -> f64 {
        let reskh = 0.5 * part(&resk);
        let mut resasc = WGK[7] * (part(&fc) - reskh).abs();
        let mut resabs = WGK[7] * part(&fc).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((part(&pairs[j][0]) - reskh).abs() + (part(&pairs[j][1]) - reskh).abs());
            resabs += WGK[j] * (part(&pairs[j][0]).abs() + part(&pairs[j][1]).abs());
        }
        resasc *= h.abs();
        resabs *= h.abs();
        let mut err = ((part(&resk) - part(&resg)) * h).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * 1.0_f64.min((200.0 * err / resasc).powf(1.5));
        }
        err.max(50.0 * f64::EPSILON * resabs)
    };

    let err = err_component(|z| z.re) + err_component(|z| z.im);
    (resk * h, err)
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
    seq: u64,
}

/// Adaptive integration over a finite interval. `breakpoints` are interior
/// points where the integrand is allowed to be non-smooth; `phase`, when
/// given, bounds the per-panel phase increment during seeding and refinement.
pub fn integrate_with<F, P>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    phase: Option<&P>,
    goal: AccuracyGoal,
    max_segments: usize,
) -> Result<QuadResult, QuadratureError>
where
    F: Fn(f64) -> Complex64,
    P: Fn(f64) -> f64 + ?Sized,
{
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadratureError::InvalidDomain { a, b });
    }
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            est_error: 0.0,
            evals: 0,
            panels: 0,
        });
    }

    // Seed edges: endpoints, sorted interior breakpoints, then recursive
    // splitting until each seed is below the phase-span limit.
    let mut edges = vec![a];
    let mut pts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| *p > a && *p < b)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    edges.extend(pts);
    edges.push(b);

    let phase_span = |lo: f64, hi: f64| -> f64 {
        match phase {
            Some(p) => {
                let mid = 0.5 * (lo + hi);
                (p(mid) - p(lo)).abs() + (p(hi) - p(mid)).abs()
            }
            None => 0.0,
        }
    };

    let mut seeds = Vec::new();
    for w in edges.windows(2) {
        let mut stack = vec![(w[0], w[1], 0u32)];
        while let Some((lo, hi, depth)) = stack.pop() {
            if depth < 40 && phase_span(lo, hi) > PHASE_SPAN_LIMIT {
                let mid = 0.5 * (lo + hi);
                // push right first so the left child is processed first
                stack.push((mid, hi, depth + 1));
                stack.push((lo, mid, depth + 1));
            } else {
                seeds.push((lo, hi));
            }
        }
    }

    let mut evals = 0usize;
    let mut seq = 0u64;
    let mut heap: std::collections::BinaryHeap<HeapEntry> = std::collections::BinaryHeap::new();
    let mut total_value = Complex64::new(0.0, 0.0);
    let mut total_err = 0.0f64;
    let mut segments: Vec<Segment> = Vec::new();

    let push_segment = |lo: f64,
                            hi: f64,
                            heap: &mut std::collections::BinaryHeap<HeapEntry>,
                            segments: &mut Vec<Segment>,
                            total_value: &mut Complex64,
                            total_err: &mut f64,
                            evals: &mut usize,
                            seq: &mut u64| {
        let (value, err) = gk15(&f, lo, hi);
        *evals += 15;
        let s = Segment {
            a: lo,
            b: hi,
            value,
            err,
            seq: *seq,
        };
        *seq += 1;
        *total_value += value;
        *total_err += err;
        let idx = segments.len();
        segments.push(s);
        heap.push(HeapEntry {
            err,
            seq: s.seq,
            idx,
        });
    };

    for &(lo, hi) in &seeds {
        push_segment(
            lo,
            hi,
            &mut heap,
            &mut segments,
            &mut total_value,
            &mut total_err,
            &mut evals,
            &mut seq,
        );
    }

    let mut alive = vec![true; segments.len()];
    while total_err > goal.target_for(total_value.norm()) {
        if segments.len() >= max_segments {
            break;
        }
        let Some(top) = heap.pop() else { break };
        if !alive[top.idx] {
            continue;
        }
        alive[top.idx] = false;
        let seg = segments[top.idx];
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval at floating-point resolution; cannot refine further
            alive[top.idx] = true;
            heap.push(HeapEntry {
                err: 0.0,
                seq: seg.seq,
                idx: top.idx,
            });
            continue;
        }
        total_value -= seg.value;
        total_err -= seg.err;
        for (lo, hi) in [(seg.a, mid), (mid, seg.b)] {
            push_segment(
                lo,
                hi,
                &mut heap,
                &mut segments,
                &mut total_value,
                &mut total_err,
                &mut evals,
                &mut seq,
            );
            alive.push(true);
        }
    }

    // Deterministic final reduction: order by position, compensated sums.
    let mut live: Vec<&Segment> = segments
        .iter()
        .enumerate()
        .filter(|(i, _)| alive[*i])
        .map(|(_, s)| s)
        .collect();
    live.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = sum::kbn_complex(live.iter().map(|s| s.value));
    let est_error = sum::kbn(live.iter().map(|s| s.err));

    let target = goal.target_for(value.norm());
    if est_error > target {
        return Err(QuadratureError::NonConvergent {
            a,
            b,
            est_error,
            target,
            evals,
        });
    }
    Ok(QuadResult {
        value,
        est_error,
        evals,
        panels: live.len(),
    })
}

#[derive(PartialEq)]
struct HeapEntry {
    err: f64,
    seq: u64,
    idx: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err
            .total_cmp(&other.err)
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    goal: AccuracyGoal,
) -> Result<QuadResult, QuadratureError> {
    integrate_with::<F, fn(f64) -> f64>(f, a, b, &[], None, goal, 5000)
}

/// Find the next point past `x0` where |phase - phase(x0)| reaches pi.
/// `width_hint` seeds the bracketing step; phase must be monotone here.
fn next_half_period<P: Fn(f64) -> f64>(phase: &P, x0: f64, width_hint: f64) -> f64 {
    let p0 = phase(x0);
    let mut step = width_hint.max(1e-12);
    let mut hi = x0 + step;
    let mut guard = 0;
    while (phase(hi) - p0).abs() < std::f64::consts::PI {
        step *= 2.0;
        hi = x0 + step;
        guard += 1;
        assert!(guard < 200, "phase failed to advance past {x0}");
    }
    let mut lo = x0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (phase(mid) - p0).abs() < std::f64::consts::PI {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Integral over [start, inf) of an oscillatory integrand whose phase is
/// strictly monotone past `start`. Half-period panels are accumulated and the
/// partial-sum sequence is contracted by repeated pairwise averaging; the
/// procedure sums Abel-convergent tails (bounded or polynomially growing
/// amplitude) as well as ordinary decaying ones.
pub fn oscillatory_tail<F, P>(
    f: F,
    phase: P,
    start: f64,
    goal: AccuracyGoal,
) -> Result<QuadResult, QuadratureError>
where
    F: Fn(f64) -> Complex64,
    P: Fn(f64) -> f64,
{
    const MAX_PANELS: usize = 400;
    const WINDOW: usize = 28;

    let panel_goal = AccuracyGoal {
        abs: (goal.abs / 16.0).max(1e-300),
        rel: 1e-13,
    };

    let mut evals = 0usize;
    let mut panel_err_sum = 0.0f64;
    let mut partials: Vec<Complex64> = Vec::new();
    let mut running = Complex64::new(0.0, 0.0);
    let mut lo = start;
    let mut width_hint = {
        let e = 1e-4 * (1.0 + start.abs());
        let slope = ((phase(start + e) - phase(start)) / e).abs();
        std::f64::consts::PI / slope.max(1e-12)
    };

    let mut last_estimate: Option<Complex64> = None;
    let mut last_diff = f64::INFINITY;
    let mut stable_hits = 0u32;

    for _panel in 0..MAX_PANELS {
        let hi = next_half_period(&phase, lo, width_hint);
        width_hint = hi - lo;
        let r = integrate_with::<&F, fn(f64) -> f64>(&f, lo, hi, &[], None, panel_goal, 64)
            .unwrap_or_else(|_| {
                // keep the panel value even if its local goal was missed;
                // its error estimate still enters the total below
                let (value, err) = gk15(&&f, lo, hi);
                QuadResult {
                    value,
                    est_error: err,
                    evals: 15,
                    panels: 1,
                }
            });
        evals += r.evals;
        panel_err_sum += r.est_error;
        running += r.value;
        partials.push(running);
        lo = hi;

        if partials.len() >= 6 {
            let w = partials.len().min(WINDOW);
            let mut avg: Vec<Complex64> = partials[partials.len() - w..].to_vec();
            for level in 1..w {
                for i in 0..w - level {
                    avg[i] = 0.5 * (avg[i] + avg[i + 1]);
                }
            }
            let estimate = avg[0];
            if let Some(prev) = last_estimate {
                let diff = (estimate - prev).norm();
                let target = goal.target_for(estimate.norm());
                if diff <= 0.5 * target && last_diff <= 0.5 * target {
                    stable_hits += 1;
                } else {
                    stable_hits = 0;
                }
                last_diff = diff;
                if stable_hits >= 2 {
                    let est_error = diff + last_diff + panel_err_sum;
                    return Ok(QuadResult {
                        value: estimate,
                        est_error,
                        evals,
                        panels: partials.len(),
                    });
                }
            }
            last_estimate = Some(estimate);
        }
    }

    let est_error = last_diff + panel_err_sum;
    Err(QuadratureError::TailNotStabilized {
        start,
        est_error,
        target: goal.target_for(last_estimate.map(|e| e.norm()).unwrap_or(0.0)),
        panels: MAX_PANELS,
    })
}

/// Finite core with breakpoints plus accelerated oscillatory tail.
pub fn semi_infinite_oscillatory<F, P>(
    f: F,
    phase: P,
    core_end: f64,
    breakpoints: &[f64],
    goal: AccuracyGoal,
) -> Result<QuadResult, QuadratureError>
where
    F: Fn(f64) -> Complex64,
    P: Fn(f64) -> f64,
{
    let core = integrate_with(&f, 0.0, core_end, breakpoints, Some(&phase), goal, 5000)?;
    let tail = oscillatory_tail(&f, &phase, core_end, goal)?;
    Ok(QuadResult {
        value: core.value + tail.value,
        est_error: core.est_error + tail.est_error,
        evals: core.evals + tail.evals,
        panels: core.panels + tail.panels,
    })
}

/// General entry point: finite or semi-infinite domain, with or without a
/// phase hint. Semi-infinite domains without a phase are handled by window
/// doubling, which fails loudly (never silently) on divergent integrands.
pub fn integrate_oscillatory<F>(
    f: F,
    a: f64,
    b: f64,
    phase: Option<&(dyn Fn(f64) -> f64 + '_)>,
    goal: AccuracyGoal,
) -> Result<QuadResult, QuadratureError>
where
    F: Fn(f64) -> Complex64,
{
    if b.is_finite() {
        return integrate_with(&f, a, b, &[], phase, goal, 5000);
    }
    if let Some(p) = phase {
        // core spanning a handful of periods, then the accelerated tail
        let e = 1e-4 * (1.0 + a.abs());
        let slope = ((p(a + e) - p(a)) / e).abs().max(1e-6);
        let core_end = a + (20.0 * std::f64::consts::PI / slope).max(1.0);
        let core = integrate_with(&f, a, core_end, &[], phase, goal, 5000)?;
        let tail = oscillatory_tail(&f, p, core_end, goal)?;
        return Ok(QuadResult {
            value: core.value + tail.value,
            est_error: core.est_error + tail.est_error,
            evals: core.evals + tail.evals,
            panels: core.panels + tail.panels,
        });
    }
    // no phase information: progressively doubled windows
    let mut lo = a;
    let mut len = 1.0f64.max(1e-3 * (1.0 + a.abs()));
    let mut total = Complex64::new(0.0, 0.0);
    let mut err_sum = 0.0f64;
    let mut evals = 0usize;
    let mut panels = 0usize;
    let mut quiet_windows = 0u32;
    let window_goal = AccuracyGoal {
        abs: goal.abs / 4.0,
        rel: goal.rel / 4.0,
    };
    for _ in 0..60 {
        let hi = lo + len;
        let w = integrate_with::<&F, fn(f64) -> f64>(&f, lo, hi, &[], None, window_goal, 5000)?;
        total += w.value;
        err_sum += w.est_error;
        evals += w.evals;
        panels += w.panels;
        let target = goal.target_for(total.norm());
        if w.value.norm() <= 0.25 * target {
            quiet_windows += 1;
            if quiet_windows >= 2 {
                return Ok(QuadResult {
                    value: total,
                    est_error: err_sum + w.value.norm(),
                    evals,
                    panels,
                });
            }
        } else {
            quiet_windows = 0;
        }
        lo = hi;
        len *= 2.0;
    }
    Err(QuadratureError::NonConvergent {
        a,
        b,
        est_error: err_sum + total.norm(),
        target: goal.target_for(total.norm()),
        evals,
    })
}
