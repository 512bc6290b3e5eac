//! The six experiment commands. Each validates its configuration first, writes
//! its artifacts into the output directory and returns a run record whose
//! checks decide the exit code.

use std::path::Path;
use std::time::Instant;

use fracnls_core::dynamics::{
    bootstrap_check, integrate, monitor_long_time_controlled, plane_wave, EffectiveStepper, MonitorSpec, RunOptions,
};
use fracnls_core::fourier::{mass, momentum, FourierField, ZERO};
use fracnls_core::mourre::{
    a_band, a_functional_banded, build_setup, build_wellprepared, check_positive_commutator, check_upper_bound,
    growth_experiment, growth_k_max, min_k_max, mourre_radius, symbol_positivity,
};
use fracnls_core::normalform::{
    g2_residual_decay, strong_lambda_check, verify_block_diagonalization, verify_transport_identity,
};
use fracnls_core::resonance::{audit_lower_bounds, in_resonant_class, proj_x3_closed_form, x3_table};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Command, DataSpec, ExperimentConfig};
use crate::record::{input_hash, Check, OutDir, RunRecord};
use crate::CliError;

/// Lowest `ξ` used in the `g₂` residual fit.
const RESIDUAL_XI_MIN: f64 = 8.0;
/// Relative conservation tolerance for `simulate`.
const CONSERVATION_TOL: f64 = 1e-9;
/// Required growth of `‖u‖_s` over the well-prepared run.
const SOBOLEV_GROWTH_FACTOR: f64 = 1.5;

struct Outcome {
    checks: Vec<Check>,
    summary: serde_json::Value,
    steps: u64,
}

/// Validates `cfg` for `cmd`, runs it and writes `record.json` next to its
/// other outputs.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<RunRecord, CliError> {
    cfg.validate(cmd)?;
    let inputs = match (&cmd, &cfg.simulate.data) {
        (Command::Simulate, DataSpec::File { path }) => vec![std::fs::read(path)?],
        _ => Vec::new(),
    };
    let hash = input_hash(cmd.name(), cfg, &inputs);
    let mut dir = OutDir::create(out)?;
    let start = Instant::now();
    let outcome = match cmd {
        Command::Simulate => simulate(cfg, &mut dir)?,
        Command::Effective => effective(cfg, &mut dir)?,
        Command::ResonanceAudit => resonance_audit(cfg, &mut dir)?,
        Command::NormalFormVerify => normalform_verify(cfg, &mut dir)?,
        Command::MourreCheck => mourre_check(cfg, &mut dir)?,
        Command::MakeData => make_data(cfg, &mut dir)?,
    };
    let mut record = RunRecord {
        command: cmd.name().into(),
        config: cfg.clone(),
        input_hash: hash,
        outputs: dir.written.clone(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        steps: outcome.steps,
        checks: outcome.checks,
        summary: outcome.summary,
    };
    record.outputs.push("record.json".into());
    dir.write_json("record.json", &record)?;
    Ok(record)
}

fn two_mode(k_max: usize, a: f64) -> FourierField {
    FourierField::from_modes(k_max, &[(0, Complex64::new(a, 0.0)), (1, Complex64::new(0.0, a))])
}

fn initial_data(cfg: &ExperimentConfig) -> Result<FourierField, CliError> {
    let k = cfg.k_max;
    Ok(match &cfg.simulate.data {
        DataSpec::Zero => FourierField::zeros(k),
        DataSpec::PlaneWave { k: mode, a } => {
            if mode.unsigned_abs() as usize > k {
                return Err(CliError::Config(format!("plane-wave mode {mode} outside K = {k}")));
            }
            plane_wave(k, cfg.simulate.rhs, *mode, *a, cfg.alpha, 0.0)
        }
        DataSpec::Random { norm } => FourierField::random(k, cfg.seed, 1.0, cfg.s0, *norm),
        DataSpec::WellPrepared => {
            build_wellprepared(cfg.epsilon, cfg.theta, cfg.alpha, cfg.s, cfg.rho1, cfg.rho_m1, cfg.rho, k)?.0.field
        }
        DataSpec::File { path } => FourierField::from_json(&std::fs::read_to_string(path)?)?.resized(k),
    })
}

fn relative_drift(values: impl Iterator<Item = f64>, v0: f64) -> f64 {
    let d = values.map(|v| (v - v0).abs()).fold(0.0, f64::max);
    if v0 == 0.0 {
        d
    } else {
        d / v0.abs()
    }
}

fn simulate(cfg: &ExperimentConfig, dir: &mut OutDir) -> Result<Outcome, CliError> {
    let u0 = initial_data(cfg)?;
    let t_final = cfg.t_final();
    let mut opts = RunOptions::new(cfg.dt, t_final);
    opts.stride = cfg.simulate.stride.max(1);
    opts.spec = MonitorSpec { s0: cfg.s0, s: cfg.s };
    let rhs = cfg.simulate.rhs;
    let traj = integrate(rhs, &u0, cfg.alpha, &opts)?;
    dir.write_with("trajectory.csv", |w| traj.write_csv(w))?;
    let steps = (t_final / cfg.dt - 1e-9).ceil() as u64;
    let mut checks = vec![Check::at_most("abort_count", traj.abort.is_some() as u8 as f64, 0.0)];
    let mut summary =
        json!({ "t_final": t_final, "abort": traj.abort.as_ref().map(|a| json!({ "t": a.t, "reason": a.reason })) });
    match &cfg.simulate.data {
        DataSpec::PlaneWave { k, a } => {
            let err = traj
                .times
                .iter()
                .zip(&traj.states)
                .map(|(t, u)| {
                    let exact = plane_wave(cfg.k_max, rhs, *k, *a, cfg.alpha, *t);
                    u.sub_field(&exact).sobolev_norm(0.0) / exact.sobolev_norm(0.0)
                })
                .fold(0.0, f64::max);
            checks.push(Check::at_most("plane_wave_relative_l2_error", err, cfg.simulate.plane_wave_tol));
        }
        DataSpec::Zero => {
            let size = traj.states.iter().map(|u| u.sobolev_norm(0.0)).fold(0.0, f64::max);
            checks.push(Check::at_most("zero_data_max_l2", size, 0.0));
        }
        DataSpec::WellPrepared => {
            let boot = bootstrap_check(&traj, cfg.epsilon, cfg.theta)?;
            let long = monitor_long_time_controlled(&traj, cfg.epsilon, cfg.theta)?;
            for (name, b) in [
                ("bootstrap_ztop_l2", &boot.top_l2),
                ("bootstrap_zperp_l2", &boot.perp_l2),
                ("bootstrap_z_s0", &boot.full_s0),
                ("bootstrap_zperp_s0", &boot.perp_s0),
            ] {
                checks.push(Check::at_most(name, b.sup, b.limit));
            }
            let hs0 = traj.monitors[0].hs;
            let growth = traj.monitors.iter().map(|m| m.hs).fold(0.0, f64::max) / hs0;
            checks.push(Check::at_least("hs_growth_factor", growth, SOBOLEV_GROWTH_FACTOR));
            summary["bootstrap"] = json!(boot);
            summary["long_time"] = json!(long);
            summary["hs_growth_factor"] = json!(growth);
        }
        DataSpec::Random { .. } | DataSpec::File { .. } => {
            let dm = relative_drift(traj.states.iter().map(mass), mass(&u0));
            // |P| ≤ Σ|k||u_k|², which stays meaningful when P(u0) ≈ 0.
            let p_scale: f64 = u0.modes().map(|(k, c)| k.abs() as f64 * c.norm_sqr()).sum();
            let p0 = momentum(&u0);
            let dp = traj.states.iter().map(|u| (momentum(u) - p0).abs()).fold(0.0, f64::max);
            let dp = if p_scale > 0.0 { dp / p_scale } else { dp };
            checks.push(Check::at_most("mass_relative_drift", dm, CONSERVATION_TOL));
            checks.push(Check::at_most("momentum_drift_over_h_half_norm", dp, CONSERVATION_TOL));
        }
    }
    Ok(Outcome { checks, summary, steps })
}

fn effective(cfg: &ExperimentConfig, dir: &mut OutDir) -> Result<Outcome, CliError> {
    let (data, setup) =
        build_wellprepared(cfg.epsilon, cfg.theta, cfg.alpha, cfg.s, cfg.rho1, cfg.rho_m1, cfg.rho, cfg.k_max)?;
    dir.write_json("wellprepared.json", &data)?;
    let t_final = cfg.t_final();
    if cfg.effective.control {
        return effective_control(cfg, &data.normal_part(), data.z1(), t_final, dir);
    }
    let k = cfg.effective.growth_k.unwrap_or_else(|| growth_k_max(&setup, t_final));
    let g = growth_experiment(&setup, &data.normal_part(), cfg.dt, t_final, k, cfg.effective.stride.max(1))?;
    dir.write_with("growth.csv", |w| g.write_csv(w))?;
    dir.write_json("growth.json", &g)?;
    let checks = vec![
        Check::at_least("rate_fit", g.rate_fit, 0.5 * g.lower_rate),
        Check::at_least("growth_factor", g.growth_factor, 4.0),
        Check::at_least("gronwall_fraction", g.gronwall_fraction, 0.95),
    ];
    Ok(Outcome { checks, summary: json!(g), steps: g.steps as u64 })
}

/// `z₋1 = 0` switches off `𝔳` and `𝔄` together, so `𝒜` must stay flat.
fn effective_control(
    cfg: &ExperimentConfig,
    zeta0: &FourierField,
    z1: Complex64,
    t_final: f64,
    dir: &mut OutDir,
) -> Result<Outcome, CliError> {
    let setup = build_setup(cfg.epsilon, cfg.theta, cfg.alpha, cfg.s, z1, ZERO, cfg.k_max)?;
    let steps = (t_final / cfg.dt - 1e-9).ceil() as usize;
    let stepper = EffectiveStepper::new(z1, ZERO, cfg.alpha, cfg.k_max, t_final / steps as f64)?;
    let a_op = a_band(&setup, cfg.k_max);
    let mut zeta = zeta0.clone();
    let a0 = a_functional_banded(&a_op, &zeta);
    let mut csv = format!("t,A\n{:.16e},{:.16e}\n", 0.0, a0);
    let mut deviation: f64 = 0.0;
    let stride = cfg.effective.stride.max(1);
    for i in 1..=steps {
        zeta = stepper.step(&zeta);
        let a = a_functional_banded(&a_op, &zeta);
        deviation = deviation.max((a - a0).abs());
        if i % stride == 0 || i == steps {
            csv.push_str(&format!("{:.16e},{:.16e}\n", i as f64 * t_final / steps as f64, a));
        }
    }
    dir.write("control.csv", csv.as_bytes())?;
    let checks = vec![Check::at_most("control_a_deviation", deviation, 1e-12 * a0.abs().max(1.0))];
    Ok(Outcome { checks, summary: json!({ "a0": a0, "max_deviation": deviation }), steps: steps as u64 })
}

fn resonance_audit(cfg: &ExperimentConfig, dir: &mut OutDir) -> Result<Outcome, CliError> {
    let r = &cfg.resonance;
    let alphas = if r.alphas.is_empty() { vec![cfg.alpha] } else { r.alphas.clone() };
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let mut steps = 0;
    for &alpha in &alphas {
        let audit = audit_lower_bounds(r.j_max, alpha)?;
        steps += audit.counts.iter().sum::<u64>();
        let tag = |name: &str| format!("{name}[alpha={alpha}]");
        checks.push(Check::at_most(&tag("weak_resonances_p1"), audit.resonant_counts[1] as f64, 0.0));
        checks.push(Check::at_most(&tag("numeric_resonances_p1"), audit.numeric_resonances_p1 as f64, 0.0));
        checks.push(Check::at_least(&tag("min_p1"), audit.min_p1.value, audit.proof_constant_p1));
        let w = audit.min_p2_weighted.value;
        checks.push(Check { name: tag("min_p2_weighted"), value: w, limit: 0.0, passed: w > 0.0 });
        let half = if r.j_max >= 2 { Some(audit_lower_bounds(r.j_max / 2, alpha)?) } else { None };
        if let Some(h) = &half {
            let m = audit.min_p2_weighted.value;
            let change = if m.is_finite() { (m - h.min_p2_weighted.value).abs() / m } else { 0.0 };
            checks.push(Check::at_most(&tag("min_p2_weighted_change_from_half_J"), change, 0.02));
        }
        dir.write_json(&format!("audit_alpha_{alpha}.json"), &audit)?;
        reports.push(json!({ "audit": audit, "half_J": half }));
    }
    let table = x3_table(r.projection_j);
    let mut proj = Vec::new();
    for n in 0..=2u8 {
        let diff =
            table.project(|t| in_resonant_class(t, n, cfg.alpha)).max_abs_diff(&proj_x3_closed_form(n, r.projection_j));
        checks.push(Check::at_most(&format!("projection_identity_n{n}"), diff, 1e-13));
        proj.push(diff);
    }
    Ok(Outcome { checks, summary: json!({ "audits": reports, "projection_residuals": proj }), steps })
}

fn normalform_verify(cfg: &ExperimentConfig, dir: &mut OutDir) -> Result<Outcome, CliError> {
    let n = &cfg.normalform;
    let amp = n.amplitude;
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    let mut fields: Vec<FourierField> = (0..n.transport_samples)
        .map(|i| FourierField::random(n.transport_k, cfg.seed.wrapping_add(i), 1.0, 1.0, 1.0).scale(amp / 0.1))
        .collect();
    fields.push(two_mode(n.transport_k, amp));
    for u in &fields {
        let t = verify_transport_identity(u, cfg.alpha);
        worst = worst.max(if t.scale > 0.0 { t.residual / t.scale } else { t.residual });
    }
    checks.push(Check::at_most("transport_identity_relative_residual", worst, 1e-12));

    let mut decay_csv = String::from("rho,kind,shell_center,norm\n");
    let mut residual_csv = String::from("rho,xi,sup_residual\n");
    let mut decay = Vec::new();
    let mut residual = Vec::new();
    for &rho in &n.rhos {
        let d = verify_block_diagonalization(&two_mode(n.decay_k, amp), cfg.alpha, rho, n.decay_k)?;
        for (kind, shells) in [("conjugated", &d.conjugated), ("baseline", &d.baseline)] {
            for s in shells.iter() {
                decay_csv.push_str(&format!("{rho:.16e},{kind},{:.16e},{:.16e}\n", s.shell_center, s.norm));
            }
        }
        if d.conjugated.iter().all(|s| s.norm == 0.0) {
            checks.push(Check::at_most(&format!("outdiag_block_max[rho={rho}]"), 0.0, 0.0));
        } else {
            checks.push(Check::at_most(&format!("outdiag_decay_slope[rho={rho}]"), d.conjugated_slope, -0.7));
        }
        let r = g2_residual_decay(&two_mode(n.residual_k, amp), cfg.alpha, rho, n.residual_k, RESIDUAL_XI_MIN)?;
        for (xi, v) in &r.profile {
            residual_csv.push_str(&format!("{rho:.16e},{xi:.16e},{v:.16e}\n"));
        }
        if r.profile.is_empty() {
            checks.push(Check::at_most(&format!("g2_residual_max[rho={rho}]"), 0.0, 0.0));
        } else {
            checks.push(Check::at_most(&format!("g2_residual_slope[rho={rho}]"), r.slope, -rho + 0.2));
        }
        decay.push(json!({ "rho": rho, "conjugated_slope": d.conjugated_slope, "baseline_slope": d.baseline_slope, "plateau_start": d.plateau_start }));
        residual.push(json!({ "rho": rho, "p": r.p, "slope": r.slope }));
    }
    dir.write("decay.csv", decay_csv.as_bytes())?;
    dir.write("g2_residual.csv", residual_csv.as_bytes())?;

    let j = n.strong_lambda_j;
    let scale = amp / 0.1;
    let z_top =
        FourierField::from_modes(j, &[(1, Complex64::new(0.6, 0.3)), (-1, Complex64::new(-0.2, 0.5))]).scale(scale);
    let mut z_perp = FourierField::random(j, cfg.seed.wrapping_add(21), 1.0, 1.0, 0.6).scale(scale);
    z_perp.set(1, ZERO);
    z_perp.set(-1, ZERO);
    let sl = strong_lambda_check(j, cfg.alpha, &z_top, &z_perp)?;
    let budget = sl.after.extraction_error;
    checks.push(Check::at_most("strong_lambda_p0_residual", sl.after.p0_residual, budget));
    checks.push(Check::at_most("strong_lambda_p1", sl.after.p1, budget));
    checks.push(Check::at_most("strong_lambda_p2", sl.after.p2, budget));

    let summary = json!({ "transport_worst": worst, "decay": decay, "g2_residual": residual, "strong_lambda": sl });
    Ok(Outcome { checks, summary, steps: fields.len() as u64 })
}

fn mourre_check(cfg: &ExperimentConfig, dir: &mut OutDir) -> Result<Outcome, CliError> {
    let z1 = Complex64::new(cfg.epsilon * cfg.rho1, 0.0);
    let zm1 = Complex64::new(cfg.epsilon * cfg.rho_m1, 0.0);
    let setup = build_setup(cfg.epsilon, cfg.theta, cfg.alpha, cfg.s, z1, zm1, cfg.k_max)?;
    let pc = check_positive_commutator(&setup)?;
    let ub = check_upper_bound(&setup)?;
    let sp = symbol_positivity(z1, zm1, cfg.s, cfg.symbol_resolution());
    let mut checks = vec![
        Check::at_most("c_epsilon", pc.c_epsilon, cfg.mourre.c_limit),
        Check::at_most("commutator_hermitian_defect", pc.commutator_hermitian_defect, 1e-12),
        Check::at_most("a_self_adjoint_defect", setup.a_self_adjoint_defect(), 1e-12),
        Check::at_least("symbol_min_a1", sp.min_a1, -1e-13),
        Check::at_least("symbol_min_a2", sp.min_a2, -1e-13),
    ];
    if pc.scale == 0.0 {
        checks.push(Check::at_most("zero_data_min_gap", pc.min_gap.abs(), 0.0));
    }
    let sweep: Vec<_> = cfg
        .mourre
        .epsilon_sweep
        .par_iter()
        .map(|&eps| -> Result<_, CliError> {
            let r = mourre_radius(eps, cfg.theta, cfg.alpha);
            let k = cfg.k_max.max(min_k_max(r));
            let (a, b) = (Complex64::new(eps * cfg.rho1, 0.0), Complex64::new(eps * cfg.rho_m1, 0.0));
            let s = build_setup(eps, cfg.theta, cfg.alpha, cfg.s, a, b, k)?;
            Ok((eps, r, k, check_positive_commutator(&s)?))
        })
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("epsilon,R,K,min_gap,c_measured,c_epsilon\n");
    for (eps, r, k, p) in &sweep {
        csv.push_str(&format!(
            "{eps:.16e},{r:.16e},{k},{:.16e},{:.16e},{:.16e}\n",
            p.min_gap, p.c_measured, p.c_epsilon
        ));
        checks.push(Check::at_most(&format!("c_epsilon[epsilon={eps}]"), p.c_epsilon, cfg.mourre.c_limit));
    }
    dir.write("c_sweep.csv", csv.as_bytes())?;
    let summary = json!({
        "R": setup.r, "N": setup.n, "K": setup.k_max, "J1": setup.j1, "I1": setup.i1, "nu0": setup.nu0,
        "positive_commutator": pc, "upper_bound": ub, "symbol_positivity": sp,
    });
    Ok(Outcome { checks, summary, steps: 1 + sweep.len() as u64 })
}

fn make_data(cfg: &ExperimentConfig, dir: &mut OutDir) -> Result<Outcome, CliError> {
    let (data, _) =
        build_wellprepared(cfg.epsilon, cfg.theta, cfg.alpha, cfg.s, cfg.rho1, cfg.rho_m1, cfg.rho, cfg.k_max)?;
    dir.write("field.json", data.field.to_json().as_bytes())?;
    dir.write_json("wellprepared.json", &data)?;
    let checks = vec![Check::at_least("a0_over_b2_threshold", data.a0, data.b2_threshold)];
    Ok(Outcome { checks, summary: json!(data), steps: 0 })
}
