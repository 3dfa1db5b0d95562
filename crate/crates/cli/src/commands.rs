//! The eight subcommands. Each one loads the validated config, runs its
//! scan or check through the core crate, writes artifacts atomically into
//! the configured output directory, and returns the overall verdict.
//!
//! Heavy point loops go through [`par::map_slice`], which keeps results in
//! input order, so CSV and JSON bytes do not depend on the thread count.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use serde_json::{json, Value};

use fieldport_core::amplitude::{
    parasitic_fraction, symbolic_amplitude, symbolic_amplitude_distinct_pair, total_amplitude,
    Scenario,
};
use fieldport_core::conventions::Conventions;
use fieldport_core::measurement::{
    completeness_defect, refinement_study, truncation_deficit, MomentumGrid, Outcome, PovmFamily,
};
use fieldport_core::nonrel::{
    nr_limit_expansion, nr_outcome_probability, nr_teleport_amplitude, teleport_qudit, NRTermForm,
    QuditState,
};
use fieldport_core::par;
use fieldport_core::propagator::{
    decay_fit, dplus_closed_form, dplus_quadrature, measure_calibration, two_point_kernel_1p1,
    Branch, FourVector, PropagatorValue, Route,
};
use fieldport_core::states::{EPRFamily, GaussianPacket, NRPacket};
use fieldport_core::wick::{
    vacuum_expectation_symbolic, OperatorFactor, OperatorWord, PointLabel, Tag,
};

use crate::artifacts::{self, fmt_f64, Check};
use crate::config::{self, linspace, symmetric, ScenarioConfig};

#[derive(Debug)]
pub enum RunError {
    /// Exit 2: the config did not parse or validate.
    Config(String),
    /// Exit 3: a numerical routine or an artifact write failed mid-run.
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(s) | RunError::Runtime(s) => write!(f, "{s}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Runtime(_) => 3,
        }
    }
}

pub struct Ctx {
    pub cfg: ScenarioConfig,
    pub conv: Conventions,
    pub config_sha256: String,
    pub out_dir: PathBuf,
}

pub fn load_ctx(config_path: &Path) -> Result<Ctx, RunError> {
    let (cfg, bytes) = config::load(config_path).map_err(|e| RunError::Config(e.to_string()))?;
    let mut conv = Conventions::new(cfg.conventions.mass, cfg.conventions.spatial_dims)
        .map_err(|e| RunError::Config(format!("config field `conventions`: {e}")))?;
    // the closed-form calibration constant is measured, never assumed; the
    // 1+1 kernel carries its own normalization and needs none
    if conv.spatial_dims == 3 {
        let cal = measure_calibration(&conv)
            .map_err(|e| RunError::Runtime(format!("calibration measurement: {e}")))?;
        conv = conv.with_calibration(cal);
    }
    // schema validation pinned these on the raw document; re-check the typed
    // view so the two paths cannot drift apart silently
    if cfg.times.t_pair != cfg.epr.pair_time || cfg.times.t_packet != cfg.packet.t0 {
        return Err(RunError::Config(
            "config: times block disagrees with the packet/epr time stamps".into(),
        ));
    }
    let out_dir = PathBuf::from(&cfg.output.dir);
    Ok(Ctx {
        config_sha256: artifacts::sha256_hex(&bytes),
        cfg,
        conv,
        out_dir,
    })
}

impl Ctx {
    fn require_dims(&self, dims: u32, why: &str) -> Result<(), RunError> {
        if self.conv.spatial_dims != dims {
            return Err(RunError::Config(format!(
                "config field `conventions.spatial_dims`: {why} requires {dims}, got {}",
                self.conv.spatial_dims
            )));
        }
        Ok(())
    }

    fn emit(&self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = artifacts::write_atomic(&self.out_dir, name, bytes)
            .map_err(|e| RunError::Runtime(format!("writing {name}: {e}")))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    /// JSON summary is unconditional; CSV and SVG honor output.formats.
    fn finish(
        &self,
        command: &str,
        checks: &[Check],
        extra: Value,
        csv: Option<Vec<u8>>,
        svg: Option<String>,
    ) -> Result<bool, RunError> {
        let stem = command.replace('-', "_");
        if let Some(bytes) = csv {
            if self.cfg.output.wants("csv") {
                self.emit(&format!("{stem}.csv"), &bytes)?;
            }
        }
        if let Some(text) = svg {
            if self.cfg.output.wants("svg") {
                self.emit(&format!("{stem}.svg"), text.as_bytes())?;
            }
        }
        let (doc, pass) = artifacts::summary(command, &self.conv, &self.config_sha256, checks, extra);
        self.emit(&format!("{stem}.json"), &artifacts::json_bytes(&doc))?;
        for c in checks {
            println!("check {}: {}", c.name, if c.pass { "pass" } else { "FAIL" });
        }
        Ok(pass)
    }
}

fn collect<T>(rows: Vec<Result<T, String>>) -> Result<Vec<T>, RunError> {
    rows.into_iter()
        .collect::<Result<Vec<T>, String>>()
        .map_err(RunError::Runtime)
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Spacelike => "spacelike",
        Branch::Timelike => "timelike",
    }
}

pub fn route_default() -> Route {
    Route::ClosedForm
}

/// D+ at radial separation through either route. In 1+1 the closed route is
/// the Bessel kernel C*I, rotated by -i into the two-point function.
fn dplus_any(t: f64, r: f64, conv: &Conventions, route: Route) -> Result<PropagatorValue, String> {
    let res = match (conv.spatial_dims, route) {
        (1, Route::ClosedForm) => two_point_kernel_1p1(t, r, conv).map(|k| PropagatorValue {
            value: Complex64::new(0.0, -1.0) * k.value,
            ..k
        }),
        (_, Route::ClosedForm) => {
            dplus_closed_form(&FourVector::radial(t, r, conv.spatial_dims), conv)
        }
        (_, Route::Quadrature) => {
            dplus_quadrature(&FourVector::radial(t, r, conv.spatial_dims), conv)
        }
    };
    res.map_err(|e| format!("propagator at (t = {t}, r = {r}): {e}"))
}

fn route_name(route: Route) -> &'static str {
    match route {
        Route::ClosedForm => "closed-form",
        Route::Quadrature => "quadrature",
    }
}

/// Keep scans clear of the light-cone guard band where neither route is
/// defined; much wider than the guard itself so quadrature stays cheap.
const CONE_SKIP: f64 = 1e-3;

// -- propagator-scan -------------------------------------------------------

pub fn propagator_scan(ctx: &Ctx, route: Option<Route>) -> Result<bool, RunError> {
    let route = route.unwrap_or_else(route_default);
    let st = &ctx.cfg.grid.spacetime;
    let ts = linspace(st.t_min, st.t_max, st.t_steps);
    let rs = linspace(st.r_min, st.r_max, st.r_steps);
    let mut pts = Vec::new();
    let mut skipped = 0usize;
    for &t in &ts {
        for &r in &rs {
            if (t * t - r * r).abs() < CONE_SKIP {
                skipped += 1;
            } else {
                pts.push((t, r));
            }
        }
    }
    let conv = ctx.conv;
    let rows = collect(par::map_slice(&pts, move |&(t, r)| {
        dplus_any(t, r, &conv, route).map(|v| (t, r, v))
    }))?;

    let mut w = artifacts::csv_writer();
    w.write_record(["t", "r", "interval", "branch", "re", "im", "abs", "est_error"])
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    let mut max_est = 0.0f64;
    let mut all_finite = true;
    for (t, r, v) in &rows {
        max_est = max_est.max(v.est_error);
        all_finite &= v.value.is_finite();
        w.write_record([
            fmt_f64(*t),
            fmt_f64(*r),
            fmt_f64(t * t - r * r),
            branch_name(v.branch).to_string(),
            fmt_f64(v.value.re),
            fmt_f64(v.value.im),
            fmt_f64(v.value.norm()),
            fmt_f64(v.est_error),
        ])
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    }
    let csv = artifacts::csv_bytes(w).map_err(|e| RunError::Runtime(e.to_string()))?;

    // heatmap of |D+| on the full (t, r) window, skipped cells at the floor
    let mut cells = vec![f64::NAN; ts.len() * rs.len()];
    let mut it = rows.iter();
    for (i, &t) in ts.iter().enumerate() {
        for (j, &r) in rs.iter().enumerate() {
            if (t * t - r * r).abs() >= CONE_SKIP {
                cells[i * rs.len() + j] = it.next().map(|(_, _, v)| v.value.norm()).unwrap_or(f64::NAN);
            }
        }
    }
    let svg = artifacts::heatmap(
        "two-point function magnitude",
        "r",
        "t",
        rs.len(),
        ts.len(),
        (rs[0], *rs.last().unwrap()),
        (ts[0], *ts.last().unwrap()),
        &cells,
    );

    let checks = [Check::new(
        "finite_values",
        all_finite,
        json!({"points": rows.len()}),
    )];
    ctx.finish(
        "propagator-scan",
        &checks,
        json!({
            "route": route_name(route),
            "points": rows.len(),
            "skipped_near_cone": skipped,
            "max_est_error": max_est,
        }),
        Some(csv),
        Some(svg),
    )
}

// -- microcausality --------------------------------------------------------

pub fn microcausality(ctx: &Ctx, route: Option<Route>) -> Result<bool, RunError> {
    let route = route.unwrap_or_else(route_default);
    let st = &ctx.cfg.grid.spacetime;
    let ts = linspace(st.t_min, st.t_max, st.t_steps);
    let rs = linspace(st.r_min, st.r_max, st.r_steps);
    let mut pts = Vec::new();
    for &t in &ts {
        for &r in &rs {
            if t * t - r * r < -CONE_SKIP {
                pts.push((t, r));
            }
        }
    }
    if pts.is_empty() {
        return Err(RunError::Config(
            "config field `grid.spacetime`: window contains no spacelike points".into(),
        ));
    }
    let conv = ctx.conv;
    let rows = collect(par::map_slice(&pts, move |&(t, r)| {
        dplus_any(t, r, &conv, route).map(|d| {
            // commutator = D+ + D- = 2 Re D+
            let comm = 2.0 * d.value.re.abs();
            (t, r, comm, d.value.norm(), 2.0 * d.est_error)
        })
    }))?;

    const REL: f64 = 1e-12;
    let mut w = artifacts::csv_writer();
    w.write_record(["t", "r", "interval", "abs_commutator", "abs_dplus", "ratio", "pass"])
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    let mut max_ratio = 0.0f64;
    let mut all_pass = true;
    for &(t, r, comm, dplus, est) in &rows {
        let ratio = comm / dplus;
        max_ratio = max_ratio.max(ratio);
        let pass = match route {
            Route::ClosedForm => ratio <= REL,
            Route::Quadrature => comm <= 10.0 * est,
        };
        all_pass &= pass;
        w.write_record([
            fmt_f64(t),
            fmt_f64(r),
            fmt_f64(t * t - r * r),
            fmt_f64(comm),
            fmt_f64(dplus),
            fmt_f64(ratio),
            pass.to_string(),
        ])
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    }
    let csv = artifacts::csv_bytes(w).map_err(|e| RunError::Runtime(e.to_string()))?;

    let checks = [Check::new(
        "commutator_vanishes_spacelike",
        all_pass,
        json!({
            "points": rows.len(),
            "max_ratio": max_ratio,
            "rule": match route {
                Route::ClosedForm => format!("|D+ + D-| <= {REL:e} |D+|"),
                Route::Quadrature => "|D+ + D-| <= 10 est_error".to_string(),
            },
        }),
    )];
    ctx.finish(
        "microcausality",
        &checks,
        json!({
            "route": route_name(route),
            "points": rows.len(),
            "max_ratio": max_ratio,
        }),
        Some(csv),
        None,
    )
}

// -- decay-fit -------------------------------------------------------------

pub fn decay_fit_cmd(ctx: &Ctx) -> Result<bool, RunError> {
    ctx.require_dims(3, "the closed-form decay fit")?;
    let conv = ctx.conv;
    let m = conv.mass;
    let s_values = linspace(2.0 / m, 6.0 / m, 13);
    let ys = collect(par::map_slice(&s_values, move |&s| {
        dplus_quadrature(&FourVector::radial(0.0, s, 3), &conv)
            .map(|v| v.value.norm().ln() + 0.75 * (s * s).ln())
            .map_err(|e| format!("decay sample at s = {s}: {e}"))
    }))?;
    let fit = decay_fit(&conv, &s_values).map_err(|e| RunError::Runtime(e.to_string()))?;

    let mut w = artifacts::csv_writer();
    w.write_record(["s", "log_reduced", "fit"])
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    for (&s, &y) in s_values.iter().zip(&ys) {
        w.write_record([
            fmt_f64(s),
            fmt_f64(y),
            fmt_f64(fit.fit.intercept + fit.fit.slope * s),
        ])
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    }
    let csv = artifacts::csv_bytes(w).map_err(|e| RunError::Runtime(e.to_string()))?;
    let svg = artifacts::line_plot(
        "spacelike decay, reduced log magnitude",
        "s",
        "ln|D+| + (3/4) ln s^2",
        &s_values.iter().copied().zip(ys.iter().copied()).collect::<Vec<_>>(),
    );

    let checks = [Check::new(
        "decay_rate_matches_mass",
        fit.rel_gap <= 0.05,
        json!({"slope": fit.slope, "expected": fit.expected, "rel_gap": fit.rel_gap}),
    )];
    ctx.finish(
        "decay-fit",
        &checks,
        json!({
            "slope": fit.slope,
            "expected": fit.expected,
            "rel_gap": fit.rel_gap,
            "intercept": fit.fit.intercept,
            "rms_residual": fit.fit.rms_residual,
            "window": [2.0 / m, 6.0 / m],
            "samples": s_values.len(),
        }),
        Some(csv),
        Some(svg),
    )
}

// -- povm-check ------------------------------------------------------------

pub fn povm_check(ctx: &Ctx) -> Result<bool, RunError> {
    ctx.require_dims(1, "the lattice measurement family")?;
    let grid = MomentumGrid::new(1, ctx.cfg.grid.lattice.n_points, ctx.cfg.grid.lattice.dk)
        .map_err(|e| RunError::Config(format!("config field `grid.lattice`: {e}")))?;
    let conv = ctx.conv;
    let families = [
        ("nonrelativistic", PovmFamily::NonRelativistic),
        (
            "relativistic",
            PovmFamily::Relativistic {
                xi0: ctx.cfg.times.t_meas,
            },
        ),
    ];
    let mut fam_json = serde_json::Map::new();
    let mut checks = Vec::new();
    for (name, family) in families {
        let interior = completeness_defect(family, &grid, &conv)
            .map_err(|e| RunError::Runtime(format!("{name} interior defect: {e}")))?;
        let full = truncation_deficit(family, &grid, &conv)
            .map_err(|e| RunError::Runtime(format!("{name} truncation deficit: {e}")))?;
        let study = refinement_study(family, &grid, &conv)
            .map_err(|e| RunError::Runtime(format!("{name} refinement study: {e}")))?;
        fam_json.insert(
            name.to_string(),
            json!({
                "defect_interior": interior,
                "defect_full": full,
                "refinement_coarse": study.coarse,
                "refinement_fine": study.fine,
                "refinement_ratio": study.ratio,
            }),
        );
        checks.push(Check::new(
            &format!("{name}_interior_defect_roundoff"),
            interior <= 1e-10,
            json!({"defect_interior": interior, "threshold": 1e-10}),
        ));
        if matches!(family, PovmFamily::Relativistic { .. }) {
            checks.push(Check::new(
                "relativistic_refinement_improves",
                study.ratio >= 1.8,
                json!({"refinement_ratio": study.ratio, "threshold": 1.8}),
            ));
        }
    }
    let n = grid.n_points();
    ctx.finish(
        "povm-check",
        &checks,
        json!({
            "grid": {
                "n_points": n,
                "dk": grid.dk(),
                "dx": grid.dx(),
                "cutoff": grid.cutoff(),
            },
            "lattice_sizes": [n, 2 * n - 1],
            "families": Value::Object(fam_json),
        }),
        None,
        None,
    )
}

// -- amplitude-scan --------------------------------------------------------

fn scenario_from(ctx: &Ctx) -> Result<Scenario, RunError> {
    // the times block is the protocol clock; validation already pinned
    // packet.t0 and epr.pair_time to it
    let p = &ctx.cfg.packet;
    let packet = GaussianPacket::new(
        p.k_center.clone(),
        p.sigma_k,
        p.x_center.clone(),
        ctx.cfg.times.t_packet,
    )
    .map_err(|e| RunError::Config(format!("config field `packet`: {e}")))?;
    let e = &ctx.cfg.epr;
    let epr = EPRFamily::new(e.sigma, e.q_total.clone(), ctx.cfg.times.t_pair)
        .map_err(|e| RunError::Config(format!("config field `epr`: {e}")))?;
    Scenario::new(packet, epr, ctx.cfg.times.t_meas, ctx.cfg.times.t_out, ctx.conv)
        .map_err(|e| RunError::Config(format!("config: {e}")))
}

pub fn amplitude_scan(ctx: &Ctx, p_fixed: Option<f64>) -> Result<bool, RunError> {
    ctx.require_dims(1, "the amplitude scan")?;
    let sc = scenario_from(ctx)?;
    let oc = &ctx.cfg.grid.outcome;
    let ob = &ctx.cfg.grid.observation;
    let shifts_x = symmetric(oc.x_half, oc.x_steps);
    let shifts_p = match p_fixed {
        Some(p) => vec![p],
        None => symmetric(oc.p_half, oc.p_steps),
    };
    let x0 = sc.packet.x_center[0];
    let obs = linspace(x0 - ob.half_width, x0 + ob.half_width, ob.points);
    let mut triples = Vec::with_capacity(shifts_x.len() * shifts_p.len() * obs.len());
    for &bx in &shifts_x {
        for &bp in &shifts_p {
            for &x in &obs {
                triples.push((bx, bp, x));
            }
        }
    }

    struct ARow {
        shift_x: f64,
        shift_p: f64,
        x: f64,
        total: Complex64,
        direct: Complex64,
        exchange: Complex64,
        parasitic: Complex64,
        est: f64,
    }
    let sc_ref = &sc;
    let rows = collect(par::map_slice(&triples, move |&(bx, bp, x)| {
        let b = total_amplitude(sc_ref, &Outcome::new_1d(bx, bp), x)
            .map_err(|e| format!("amplitude at (X = {bx}, P = {bp}, x = {x}): {e}"))?;
        let mut row = ARow {
            shift_x: bx,
            shift_p: bp,
            x,
            total: b.total,
            direct: Complex64::default(),
            exchange: Complex64::default(),
            parasitic: Complex64::default(),
            est: b.est_error,
        };
        for t in &b.terms {
            let v = t.value * t.weight as f64;
            match t.tag {
                Tag::TeleportDirect => row.direct = v,
                Tag::TeleportExchange => row.exchange = v,
                Tag::Parasitic => row.parasitic = v,
                Tag::Untagged => return Err(format!("untagged channel at (X = {bx}, P = {bp})")),
            }
        }
        Ok(row)
    }))?;

    let mut w = artifacts::csv_writer();
    w.write_record([
        "X", "P", "x", "re_total", "im_total", "re_t1", "im_t1", "re_t2", "im_t2", "re_par",
        "im_par", "est_error",
    ])
    .map_err(|e| RunError::Runtime(e.to_string()))?;
    let mut max_abs = 0.0f64;
    let mut max_est = 0.0f64;
    for r in &rows {
        max_abs = max_abs.max(r.total.norm());
        max_est = max_est.max(r.est);
        w.write_record([
            fmt_f64(r.shift_x),
            fmt_f64(r.shift_p),
            fmt_f64(r.x),
            fmt_f64(r.total.re),
            fmt_f64(r.total.im),
            fmt_f64(r.direct.re),
            fmt_f64(r.direct.im),
            fmt_f64(r.exchange.re),
            fmt_f64(r.exchange.im),
            fmt_f64(r.parasitic.re),
            fmt_f64(r.parasitic.im),
            fmt_f64(r.est),
        ])
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    }
    let csv = artifacts::csv_bytes(w).map_err(|e| RunError::Runtime(e.to_string()))?;

    // |total| over (x, X) at the first P of the scan
    let p0 = shifts_p[0];
    let cells: Vec<f64> = shifts_x
        .iter()
        .flat_map(|&bx| {
            let rows = &rows;
            obs.iter().map(move |&x| {
                rows.iter()
                    .find(|r| r.shift_x == bx && r.shift_p == p0 && r.x == x)
                    .map(|r| r.total.norm())
                    .unwrap_or(f64::NAN)
            })
        })
        .collect();
    let svg = artifacts::heatmap(
        &format!("amplitude magnitude at P = {p0}"),
        "x",
        "X",
        obs.len(),
        shifts_x.len(),
        (obs[0], *obs.last().unwrap()),
        (shifts_x[0], *shifts_x.last().unwrap()),
        &cells,
    );

    let checks = [Check::new(
        "quadrature_errors_bounded",
        max_est <= 1e-3 * max_abs.max(f64::MIN_POSITIVE),
        json!({"max_est_error": max_est, "max_abs_total": max_abs}),
    )];
    ctx.finish(
        "amplitude-scan",
        &checks,
        json!({
            "rows": rows.len(),
            "n_X": shifts_x.len(),
            "n_P": shifts_p.len(),
            "n_obs": obs.len(),
            "P_fixed": p_fixed,
            "max_abs_total": max_abs,
            "max_est_error": max_est,
            "columns": {
                "t1": "teleport_direct, weight folded in",
                "t2": "teleport_exchange, weight folded in",
                "par": "parasitic, weight folded in",
            },
        }),
        Some(csv),
        Some(svg),
    )
}

// -- nr-limit --------------------------------------------------------------

fn form_desc(form: NRTermForm) -> &'static str {
    match form {
        NRTermForm::Direct => "f(x - X) e^{iP(x - X)}",
        NRTermForm::Exchange => "f(x - X) e^{iP(x - X)} e^{iPX}",
        NRTermForm::Parasitic => "f(x) gated by the pair overlap, supported at (X, P) = (0, 0)",
    }
}

pub fn nr_limit(ctx: &Ctx) -> Result<bool, RunError> {
    ctx.require_dims(1, "the lattice limit")?;
    let grid = MomentumGrid::new(1, ctx.cfg.grid.lattice.n_points, ctx.cfg.grid.lattice.dk)
        .map_err(|e| RunError::Config(format!("config field `grid.lattice`: {e}")))?;
    let p = &ctx.cfg.packet;
    let packet = NRPacket::gaussian(grid, p.k_center[0], p.sigma_k, p.x_center[0])
        .map_err(|e| RunError::Config(format!("config field `packet`: {e}")))?;

    let terms = nr_limit_expansion();
    let weights: Vec<u64> = terms.iter().map(|t| t.weight).collect();

    let h = grid.half();
    let dx = grid.dx();
    let dk = grid.dk();
    let mut outcomes = Vec::with_capacity(grid.n_points() * grid.n_points());
    for l in -h..=h {
        for q in -h..=h {
            outcomes.push((l as f64 * dx, q as f64 * dk, q));
        }
    }
    let pk = &packet;
    let rows = collect(par::map_slice(&outcomes, move |&(bx, bp, _)| {
        nr_outcome_probability(pk, &Outcome::new_1d(bx, bp))
            .map(|prob| (bx, bp, prob))
            .map_err(|e| format!("outcome (X = {bx}, P = {bp}): {e}"))
    }))?;

    let mut w = artifacts::csv_writer();
    w.write_record(["X", "P", "prob"])
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    for &(bx, bp, prob) in &rows {
        w.write_record([fmt_f64(bx), fmt_f64(bp), fmt_f64(prob)])
            .map_err(|e| RunError::Runtime(e.to_string()))?;
    }
    let csv = artifacts::csv_bytes(w).map_err(|e| RunError::Runtime(e.to_string()))?;

    // flat on the interior momentum window; edge outcomes truncate the
    // shifted support and honestly lose mass
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for (&(_, _, q), &(_, _, prob)) in outcomes.iter().zip(&rows) {
        if q.abs() <= h / 2 {
            lo = lo.min(prob);
            hi = hi.max(prob);
        }
    }
    let spread = hi / lo - 1.0;

    let checks = [
        Check::new(
            "three_channel_weights",
            weights == [2, 2, 4],
            json!({"weights": weights}),
        ),
        Check::new(
            "interior_map_flat",
            spread <= 1e-10,
            json!({"rel_spread": spread, "threshold": 1e-10, "window": "|P| <= cutoff / 2"}),
        ),
    ];
    ctx.finish(
        "nr-limit",
        &checks,
        json!({
            "expansion": terms.iter().map(|t| json!({
                "tag": t.tag.as_str(),
                "weight": t.weight,
                "form": form_desc(t.form),
            })).collect::<Vec<_>>(),
            "lattice": {
                "n_points": grid.n_points(),
                "dk": dk,
                "dx": dx,
                "cutoff": grid.cutoff(),
            },
            "interior_rel_spread": spread,
            "sigma_over_flat_limit": p.sigma_k / (grid.cutoff() / 14.0),
        }),
        Some(csv),
        None,
    )
}

// -- teleport-qudit --------------------------------------------------------

pub fn teleport_qudit_cmd(
    dim: usize,
    trials: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<bool, RunError> {
    if trials == 0 {
        return Err(RunError::Config("--trials must be >= 1".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut prob_sum = vec![0.0f64; dim * dim];
    let mut max_dev = 0.0f64;
    let mut min_fid = f64::MAX;
    let mut fid_sum = 0.0f64;
    let uniform = 1.0 / (dim * dim) as f64;
    for _ in 0..trials {
        let state = QuditState::random(dim, &mut rng)
            .map_err(|e| RunError::Config(format!("--dim: {e}")))?;
        let records = teleport_qudit(&state).map_err(|e| RunError::Runtime(e.to_string()))?;
        for (i, r) in records.iter().enumerate() {
            prob_sum[i] += r.probability;
            max_dev = max_dev.max((r.probability - uniform).abs());
            min_fid = min_fid.min(r.fidelity);
            fid_sum += r.fidelity;
        }
    }
    let mean_fid = fid_sum / (trials * dim * dim) as f64;

    let checks = [
        Check::new(
            "uniform_outcome_probabilities",
            max_dev <= 1e-12,
            json!({"max_abs_deviation": max_dev, "uniform": uniform, "threshold": 1e-12}),
        ),
        Check::new(
            "corrected_fidelity_unit",
            min_fid >= 1.0 - 1e-12,
            json!({"min_fidelity": min_fid, "threshold": 1.0 - 1e-12}),
        ),
    ];
    // no field scenario behind this command: the protocol is dimensionless,
    // so the envelope hashes the parameter line instead of a config file
    let params = format!("dim={dim}&seed={seed}&trials={trials}");
    let pass = checks.iter().all(|c| c.pass);
    let doc = json!({
        "command": "teleport-qudit",
        "conventions": Value::Null,
        "config_sha256": artifacts::sha256_hex(params.as_bytes()),
        "parameters": {"dim": dim, "trials": trials, "seed": seed},
        "outcome_probabilities": (0..dim * dim).map(|i| json!({
            "shift": i / dim,
            "phase": i % dim,
            "mean_probability": prob_sum[i] / trials as f64,
        })).collect::<Vec<_>>(),
        "max_probability_deviation": max_dev,
        "min_fidelity": min_fid,
        "mean_fidelity": mean_fid,
        "checks": checks.iter().map(|c| json!({
            "name": c.name, "pass": c.pass, "detail": c.detail,
        })).collect::<Vec<_>>(),
        "pass": pass,
    });
    let path = artifacts::write_atomic(out_dir, "teleport_qudit.json", &artifacts::json_bytes(&doc))
        .map_err(|e| RunError::Runtime(format!("writing teleport_qudit.json: {e}")))?;
    println!("wrote {}", path.display());
    for c in &checks {
        println!("check {}: {}", c.name, if c.pass { "pass" } else { "FAIL" });
    }
    Ok(pass)
}

// -- conformance-report ----------------------------------------------------

struct Finding {
    id: &'static str,
    statement: String,
    verified: bool,
    measure: Value,
}

fn probe_scenario() -> Result<Scenario, RunError> {
    let conv = Conventions::new(1.0, 1).map_err(|e| RunError::Runtime(e.to_string()))?;
    let packet = GaussianPacket::new(vec![0.0], 0.2, vec![0.0], 0.25)
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    let epr =
        EPRFamily::new(0.05, vec![0.0], 0.0).map_err(|e| RunError::Runtime(e.to_string()))?;
    Scenario::new(packet, epr, 1.0, 2.0, conv).map_err(|e| RunError::Runtime(e.to_string()))
}

/// Checks that back each statement run on fixed probes, independent of the
/// scenario in the config; the config still supplies the output directory
/// and the summary envelope.
pub fn conformance_report(ctx: &Ctx) -> Result<bool, RunError> {
    let mut findings = Vec::new();
    let rt = |e: &dyn std::fmt::Display, what: &str| RunError::Runtime(format!("{what}: {e}"));

    // channel multiplicities and the non-teleporting share
    let sc = probe_scenario()?;
    let collapsed = symbolic_amplitude(&sc).map_err(|e| rt(&e, "collapsed expansion"))?;
    let distinct =
        symbolic_amplitude_distinct_pair(&sc).map_err(|e| rt(&e, "distinct-pair expansion"))?;
    let mut weights: Vec<u64> = collapsed.terms.iter().map(|t| t.multiplicity).collect();
    weights.sort_unstable();
    let share = parasitic_fraction(&collapsed);
    let share_distinct = parasitic_fraction(&distinct);
    findings.push(Finding {
        id: "channel-multiplicities",
        statement: "The full matrix element expands into six creator-absorber pairings; \
                    collapsing the pair source to a single repeated point leaves three \
                    channels with multiplicities (2, 2, 4), and the weighted share of the \
                    non-teleporting channel is exactly 1/2. With distinguishable pair legs \
                    the share drops to 1/3."
            .into(),
        verified: distinct.terms.len() == 6
            && weights == [2, 2, 4]
            && *share.numer() == 1
            && *share.denom() == 2
            && *share_distinct.numer() == 1
            && *share_distinct.denom() == 3,
        measure: json!({
            "pairings": distinct.terms.len(),
            "collapsed_weights": weights,
            "share": format!("{share}"),
            "share_distinct_pair": format!("{share_distinct}"),
        }),
    });

    // like-typed groupings vanish; the realized pairing is creator-absorber
    let u = PointLabel::new("u", 0.0);
    let v = PointLabel::new("v", 0.0);
    let likes = OperatorWord::new(vec![
        OperatorFactor::creation(u),
        OperatorFactor::creation(v),
    ]);
    let like_terms = vacuum_expectation_symbolic(&likes)
        .map_err(|e| rt(&e, "like-typed word"))?
        .terms
        .len();
    let roles_ok = collapsed.terms.iter().all(|t| {
        t.pairs.iter().all(|(c, a)| {
            collapsed.source_word.creators().iter().any(|l| *l == c)
                && collapsed.source_word.annihilators().iter().any(|l| *l == a)
        })
    });
    findings.push(Finding {
        id: "printed-grouping",
        statement: "The conventional printed factorization groups like-typed ladder legs; \
                    taken literally those factors have vanishing vacuum expectation. The \
                    evaluated expansion pairs each creator with an absorber, which matches \
                    the surrounding interpretation and yields the channel structure above."
            .into(),
        verified: like_terms == 0 && roles_ok,
        measure: json!({"like_typed_pairings": like_terms}),
    });

    // absorber-minus-creator argument order; the alternate order conjugates
    let c1 = Conventions::new(1.0, 1).map_err(|e| rt(&e, "conventions"))?;
    let k_fwd = two_point_kernel_1p1(1.3, 0.4, &c1).map_err(|e| rt(&e, "kernel forward"))?;
    let k_rev = two_point_kernel_1p1(-1.3, 0.4, &c1).map_err(|e| rt(&e, "kernel reversed"))?;
    let conj_gap = (k_rev.value - k_fwd.value.conj()).norm() / k_fwd.value.norm();
    findings.push(Finding {
        id: "contraction-argument-order",
        statement: "Contractions are evaluated at absorber time minus creator time. The \
                    alternate argument order conjugates the positive-frequency kernel: \
                    K(-t, x) = conj K(t, x), verified on the 1+1 kernel."
            .into(),
        verified: conj_gap <= 1e-12,
        measure: json!({"relative_conjugation_gap": conj_gap}),
    });

    // timelike sign variant fixed by the cross-route ratio, after applying
    // the measured calibration
    let c3 = Conventions::new(1.0, 3).map_err(|e| rt(&e, "conventions"))?;
    let cal = measure_calibration(&c3).map_err(|e| rt(&e, "calibration"))?;
    let c3cal = c3.with_calibration(cal);
    let mut max_route_gap = 0.0f64;
    for (t, r) in [(0.0, 1.5), (0.5, 1.4), (2.0, 0.5), (1.8, 0.9)] {
        let x = FourVector::radial(t, r, 3);
        let quad = dplus_quadrature(&x, &c3cal).map_err(|e| rt(&e, "route comparison"))?;
        let closed = dplus_closed_form(&x, &c3cal).map_err(|e| rt(&e, "route comparison"))?;
        max_route_gap = max_route_gap
            .max((closed.value - quad.value).norm() / quad.value.norm());
    }
    findings.push(Finding {
        id: "timelike-sign-variant",
        statement: "On the timelike branch the closed form realizes the lower sign of the \
                    printed oscillatory pair; the variant is selected by requiring a \
                    constant ratio against direct momentum-shell quadrature on both sides \
                    of the cone."
            .into(),
        verified: max_route_gap <= 1e-6,
        measure: json!({"max_cross_route_relative_gap": max_route_gap}),
    });

    // the measured calibration constant
    findings.push(Finding {
        id: "calibration-constant",
        statement: "The measured normalization between the quadrature route and the raw \
                    closed-form layout is -1, real to 1e-6; it is applied through the \
                    conventions' calibration hook before any closed-form evaluation."
            .into(),
        verified: (cal + 1.0).abs() <= 1e-6 && c3cal.closed_form_calibration == cal,
        measure: json!({"measured": cal, "applied": c3cal.closed_form_calibration}),
    });

    // outcome displacement rides on the measurement leg; lattice limit shifts
    let grid = MomentumGrid::new(1, 17, 0.4).map_err(|e| rt(&e, "lattice"))?;
    let f = NRPacket::gaussian(grid, 0.3, 0.5, 0.7).map_err(|e| rt(&e, "lattice packet"))?;
    let o = Outcome::new_1d(3.0 * grid.dx(), 2.0 * grid.dk());
    let shifted = nr_teleport_amplitude(&f, &o).map_err(|e| rt(&e, "lattice shift"))?;
    let fpos = f.to_position();
    let opos = shifted.to_position();
    let n = grid.n_points() as i64;
    let mut max_shift_dev = 0.0f64;
    for (l, &x) in grid.x_lattice().iter().enumerate() {
        let idx = (((x - o.x[0]) / grid.dx()).round() as i64 + grid.half()).rem_euclid(n) as usize;
        let expected = fpos[idx] * Complex64::from_polar(1.0, o.p[0] * (x - o.x[0]));
        max_shift_dev = max_shift_dev.max((opos[l] - expected).norm());
    }
    findings.push(Finding {
        id: "displaced-leg-shift",
        statement: "The teleporting channel attaches the outcome displacement to the \
                    measurement leg; in the lattice limit the direct channel is exactly \
                    the input packet shifted by X and phased by P, cyclically on the grid."
            .into(),
        verified: max_shift_dev <= 1e-12,
        measure: json!({"max_lattice_deviation": max_shift_dev}),
    });

    let checks: Vec<Check> = findings
        .iter()
        .map(|f| Check::new(f.id, f.verified, f.measure.clone()))
        .collect();
    ctx.finish(
        "conformance-report",
        &checks,
        json!({
            "findings": findings.iter().map(|f| json!({
                "id": f.id,
                "statement": f.statement,
                "verified": f.verified,
                "measure": f.measure,
            })).collect::<Vec<_>>(),
        }),
        None,
        None,
    )
}
