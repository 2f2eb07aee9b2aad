//! Command implementations. Every command is a pure function of its
//! configuration: outputs are deterministic, full-precision text files plus
//! a human-readable report on stdout.

use crate::config::RunConfig;
use anyhow::{anyhow, bail, Context, Result};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;
use toruskit::bundles;
use toruskit::continuation::{
    continue_torus, estimate_breakdown, existence_region_scan, Continuation, EstimateMethod,
};
use toruskit::dynamics::{self, BasinWindow, SamplingMode};
use toruskit::greene::{greene_estimate, trace_tongue};
use toruskit::io;
use toruskit::models::CylinderState;
use toruskit::newton::{solve, verify_residual, FailureReason, Seed, Solved};

/// Process exit codes: 0 success, 1 config error, 2 numerical
/// non-convergence, 3 resource cap.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;
pub const EXIT_RESOURCE_CAP: i32 = 3;

pub struct Outcome {
    pub code: i32,
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create output directory {}", path.display()))
}

fn torus_file_from(
    solved: &Solved,
    m_set: &[f64],
    bundle: Option<io::BundleSummary>,
) -> io::TorusFile {
    let sobolev = solved
        .torus
        .sobolev_norms(m_set)
        .into_iter()
        .zip(m_set)
        .map(|(v, &m)| (m, v))
        .collect();
    io::TorusFile {
        sup_error: solved.report.final_error,
        sobolev,
        bundle,
        torus: solved.torus.clone(),
    }
}

/// Solve for one torus at the configured ε: cold start when ε is small,
/// otherwise a continuation walk from ε = 0 seeds the final solve.
pub fn cmd_solve(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.build_model()?;
    let omega = cfg.build_omega()?;
    ensure_dir(&cfg.out_dir)?;
    let eps = model.epsilon();

    let solved = if eps <= cfg.solver.cold_eps_threshold {
        solve(&model, &omega, &cfg.solver, Seed::Cold)?
    } else {
        let mut line = Continuation::new(model.clone(), omega.clone(), cfg.continuation_policy());
        line.run(eps)?;
        let reached = line.trace().last_converged_epsilon;
        if (reached - eps).abs() > 1e-12 {
            let reason = line.trace().failure_reason.clone().unwrap_or_else(|| "unknown".into());
            println!(
                "non-convergence: continuation stopped at ε = {reached:.6} (target {eps}, reason {reason})"
            );
            let code = if reason == "resource_cap" { EXIT_RESOURCE_CAP } else { EXIT_NO_CONVERGENCE };
            return Ok(Outcome { code });
        }
        let torus = line.current().expect("converged line has a torus").clone();
        solve(&model, &omega, &cfg.solver, Seed::Warm(torus))?
    };

    if !solved.report.converged {
        let reason = match solved.report.failure {
            Some(FailureReason::ResourceCap) => "resource_cap",
            Some(FailureReason::MaxIterations) => "max_iterations",
            Some(FailureReason::Stalled) => "stalled",
            Some(FailureReason::Diverged) => "diverged",
            None => "unknown",
        };
        println!("non-convergence: {reason} (sup error {:.3e})", solved.report.final_error);
        let code = if solved.report.failure == Some(FailureReason::ResourceCap) {
            EXIT_RESOURCE_CAP
        } else {
            EXIT_NO_CONVERGENCE
        };
        return Ok(Outcome { code });
    }

    let bundle_summary = if cfg.with_bundle && !model.is_conservative() {
        let data = bundles::analyze(&solved.torus).map_err(|e| anyhow!("{e}"))?;
        let multipliers = bundles::lyapunov_multipliers(&solved.torus, cfg.bundle_n_iter);
        Some(io::BundleSummary::from_data(&data, multipliers))
    } else {
        None
    };

    let m_set = cfg.continuation.m_set.clone();
    let file = torus_file_from(&solved, &m_set, bundle_summary.clone());
    io::write_torus(&cfg.out_dir.join("torus.txt"), &file).map_err(|e| anyhow!("{e}"))?;

    let mut report = String::from("# toruskit solve report\n");
    let _ = writeln!(report, "family = {}", model.family_name());
    let _ = writeln!(
        report,
        "omega = {:.17e}  (rotation {:.17e})",
        omega.omega(),
        omega.rotation()
    );
    let _ = writeln!(report, "epsilon = {:.17e}", eps);
    let _ = writeln!(report, "converged = true");
    let _ = writeln!(report, "iterations = {}", solved.report.iterations.len());
    let _ = writeln!(report, "n_modes = {}", solved.torus.n_modes());
    let _ = writeln!(report, "mu = {:.17e}", solved.torus.mu());
    let _ = writeln!(report, "mu / 2pi = {:.17e}", solved.torus.mu() / TAU);
    let _ = writeln!(report, "sup_error = {:.3e}", solved.report.final_error);
    let fine = verify_residual(&solved.torus, 4)?;
    let _ = writeln!(report, "sup_error_fine_grid_4x = {:.3e}", fine);
    for ((m, v), _) in file.sobolev.iter().zip(0..) {
        let _ = writeln!(report, "h{m} = {:.17e}", v);
    }
    if let Some(r) = solved.report.iterations.iter().rev().find(|r| r.nondegeneracy_det.is_finite())
    {
        let _ = writeln!(report, "nondegeneracy_det = {:.17e}", r.nondegeneracy_det);
    }
    let _ = writeln!(report, "min_dk_norm = {:.6e}", solved.torus.min_dk_norm());
    if let Some(b) = &bundle_summary {
        let _ = writeln!(report, "min_bundle_angle = {:.17e}", b.min_angle);
        let _ = writeln!(report, "argmin_theta = {:.17e}", b.argmin_theta);
        let _ = writeln!(
            report,
            "lyapunov_multipliers = {:.12e} {:.12e}",
            b.multipliers.0, b.multipliers.1
        );
        let _ = writeln!(report, "bundle_reducibility_residual = {:.3e}", b.reducibility_residual);
    }
    print!("{report}");
    std::fs::write(cfg.out_dir.join("report.txt"), &report)?;
    Ok(Outcome { code: EXIT_OK })
}

/// Continuation in ε with a trace file and a final checkpoint torus.
pub fn cmd_continue(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.build_model()?;
    let omega = cfg.build_omega()?;
    ensure_dir(&cfg.out_dir)?;
    let policy = cfg.continuation_policy();
    let (trace, torus) =
        continue_torus(&model, &omega, cfg.continuation.eps_start, cfg.continuation.eps_end, &policy)?;
    io::write_trace(&cfg.out_dir.join("trace.txt"), &trace, None).map_err(|e| anyhow!("{e}"))?;
    if let Some(t) = &torus {
        let file = io::TorusFile {
            sup_error: trace.records.last().map(|r| r.sup_error).unwrap_or(f64::NAN),
            sobolev: torus
                .as_ref()
                .map(|t| {
                    t.sobolev_norms(&policy.m_set)
                        .into_iter()
                        .zip(&policy.m_set)
                        .map(|(v, &m)| (m, v))
                        .collect()
                })
                .unwrap_or_default(),
            bundle: None,
            torus: t.clone(),
        };
        io::write_torus(&cfg.out_dir.join("torus.txt"), &file).map_err(|e| anyhow!("{e}"))?;
    }
    println!(
        "continued to ε = {:.6} over {} records (reason: {})",
        trace.last_converged_epsilon,
        trace.records.len(),
        trace.failure_reason.as_deref().unwrap_or("reached target")
    );
    let code = match trace.failure_reason.as_deref() {
        Some("resource_cap") => EXIT_RESOURCE_CAP,
        _ => EXIT_OK,
    };
    Ok(Outcome { code })
}

/// Continuation toward breakdown plus the Sobolev blow-up fit.
pub fn cmd_breakdown(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.build_model()?;
    let omega = cfg.build_omega()?;
    ensure_dir(&cfg.out_dir)?;
    let policy = cfg.continuation_policy();
    let (trace, _) =
        continue_torus(&model, &omega, cfg.continuation.eps_start, cfg.continuation.eps_end, &policy)?;
    let estimate = estimate_breakdown(&trace, cfg.breakdown_m).map_err(|e| anyhow!("{e}"))?;
    io::write_trace(&cfg.out_dir.join("trace.txt"), &trace, Some(&estimate))
        .map_err(|e| anyhow!("{e}"))?;
    match estimate.method {
        EstimateMethod::SobolevFit => {
            println!(
                "epsilon_crit = {:.6}  (H^{} fit: beta = {:.3}, window [{:.4}, {:.4}], residual {:.2e})",
                estimate.epsilon_crit,
                cfg.breakdown_m,
                estimate.beta,
                estimate.fit_window.0,
                estimate.fit_window.1,
                estimate.fit_residual
            );
            // stability cross-check at the next index up, when tracked
            if trace.m_set.iter().any(|&m| (m - cfg.breakdown_m - 1.0).abs() < 1e-9) {
                if let Ok(alt) = estimate_breakdown(&trace, cfg.breakdown_m + 1.0) {
                    if alt.method == EstimateMethod::SobolevFit {
                        println!(
                            "epsilon_crit (H^{} cross-check) = {:.6}",
                            cfg.breakdown_m + 1.0,
                            alt.epsilon_crit
                        );
                    }
                }
            }
        }
        EstimateMethod::LastConverged => {
            println!(
                "warning: no Sobolev blow-up inside the continued range; falling back to last converged ε"
            );
            println!("epsilon_crit = {:.6}  (method last_converged)", estimate.epsilon_crit);
        }
    }
    Ok(Outcome { code: EXIT_OK })
}

/// Greene-style estimate from periodic-orbit stability.
pub fn cmd_greene(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.build_model()?;
    let omega = cfg.build_omega()?;
    ensure_dir(&cfg.out_dir)?;
    let estimate = greene_estimate(&model, &omega, &cfg.greene.eps_grid, &cfg.greene_config())
        .map_err(|e| anyhow!("{e}"))?;
    let mut buf = String::from("# toruskit greene estimate\n");
    let _ = writeln!(buf, "epsilon_crit = {:.6}", estimate.epsilon_crit);
    let _ = writeln!(buf, "bracket = {:.6} {:.6}", estimate.bracket.0, estimate.bracket.1);
    let kind = if model.is_conservative() { "residue |R|" } else { "eigenvalue defect" };
    let _ = writeln!(buf, "# per-probe diagnostics ({kind} per q)");
    for d in &estimate.diagnostics {
        let _ = write!(buf, "eps {:.6} destabilized {}", d.epsilon, d.destabilized);
        for (q, v) in &d.per_q {
            let _ = write!(buf, " q{q}:{v:.4e}");
        }
        buf.push('\n');
    }
    std::fs::write(cfg.out_dir.join("greene.txt"), &buf)?;
    println!(
        "epsilon_crit = {:.6}  (periodic-orbit criterion, bracket [{:.4}, {:.4}])",
        estimate.epsilon_crit, estimate.bracket.0, estimate.bracket.1
    );
    Ok(Outcome { code: EXIT_OK })
}

/// Basin-of-attraction map on a grid of initial conditions.
pub fn cmd_basins(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.build_model()?;
    ensure_dir(&cfg.out_dir)?;
    let mode = match cfg.basins.mode.as_str() {
        "deterministic" => SamplingMode::Deterministic,
        "random" => SamplingMode::Random { seed: cfg.seed },
        other => bail!("unknown basins mode `{other}`"),
    };
    let map = dynamics::classify_basins(
        &model,
        BasinWindow {
            x_min: cfg.basins.x_min,
            x_max: cfg.basins.x_max,
            y_min: cfg.basins.y_min,
            y_max: cfg.basins.y_max,
        },
        cfg.basins.nx,
        cfg.basins.ny,
        cfg.basins.transient,
        cfg.basins.kept,
        mode,
    );
    let (pgm, legend) = io::basins_to_pgm(&map);
    std::fs::write(cfg.out_dir.join("basins.pgm"), pgm)?;
    std::fs::write(cfg.out_dir.join("basins-legend.txt"), legend)?;
    println!(
        "{} attractor bucket(s) over {}×{} cells; legend in basins-legend.txt",
        map.buckets.len(),
        cfg.basins.nx,
        cfg.basins.ny
    );
    Ok(Outcome { code: EXIT_OK })
}

/// Invariant-bundle analysis of a torus (from file or a fresh solve).
pub fn cmd_bundle(cfg: &RunConfig) -> Result<Outcome> {
    ensure_dir(&cfg.out_dir)?;
    let (torus, torus_path) = match &cfg.bundle_torus {
        Some(path) => {
            let file = io::read_torus(path).map_err(|e| anyhow!("{e}"))?;
            (file.torus, path.clone())
        }
        None => {
            let model = cfg.build_model()?;
            let omega = cfg.build_omega()?;
            let solved = solve(&model, &omega, &cfg.solver, Seed::Cold)?;
            if !solved.report.converged {
                println!("non-convergence while building the torus for bundle analysis");
                return Ok(Outcome { code: EXIT_NO_CONVERGENCE });
            }
            let path = cfg.out_dir.join("torus.txt");
            io::write_torus(&path, &torus_file_from(&solved, &cfg.continuation.m_set, None))
                .map_err(|e| anyhow!("{e}"))?;
            (solved.torus, path)
        }
    };
    let data = bundles::analyze(&torus).map_err(|e| anyhow!("{e}"))?;
    let multipliers = bundles::lyapunov_multipliers(&torus, cfg.bundle_n_iter);

    // α(θ) curve: formula and direct geometry side by side
    let mut curve = String::from("# theta alpha alpha_direct\n");
    let n = data.alpha.n_modes();
    for j in 0..n {
        let theta = TAU * j as f64 / n as f64;
        let _ = writeln!(
            curve,
            "{theta:.17e} {:.17e} {:.17e}",
            data.alpha.samples()[j],
            data.alpha_direct.samples()[j]
        );
    }
    std::fs::write(cfg.out_dir.join("alpha.txt"), curve)?;

    // append the bundle block to the torus file
    let mut file = io::read_torus(&torus_path).map_err(|e| anyhow!("{e}"))?;
    file.bundle = Some(io::BundleSummary::from_data(&data, multipliers));
    io::write_torus(&torus_path, &file).map_err(|e| anyhow!("{e}"))?;

    println!("min_angle = {:.12e} at theta = {:.12e}", data.min_angle, data.argmin_theta);
    println!("lyapunov_multipliers = {:.10e} {:.10e}", multipliers.0, multipliers.1);
    println!("reducibility_residual = {:.3e}", data.reducibility_residual);
    Ok(Outcome { code: EXIT_OK })
}

/// ρ(a) scan of the non-twist family.
pub fn cmd_rotation_scan(cfg: &RunConfig) -> Result<Outcome> {
    ensure_dir(&cfg.out_dir)?;
    let potential = match cfg.model.potential.as_str() {
        "single_harmonic" | "single" => toruskit::models::Potential::SingleHarmonic,
        "two_harmonic" => toruskit::models::Potential::TwoHarmonic {
            eps1: cfg.model.eps1,
            eps2: cfg.model.eps2,
        },
        other => bail!("unknown potential `{other}`"),
    };
    let a_grid: Vec<f64> = (0..cfg.scan.n_samples)
        .map(|i| {
            cfg.scan.a_min
                + (cfg.scan.a_max - cfg.scan.a_min) * i as f64
                    / (cfg.scan.n_samples - 1).max(1) as f64
        })
        .collect();
    let curve = dynamics::rotation_vs_parameter(
        cfg.model.lambda,
        cfg.model.mu,
        cfg.model.epsilon,
        potential,
        &a_grid,
        CylinderState::new(cfg.scan.y0, cfg.scan.x0),
        cfg.scan.transient,
        cfg.scan.kept,
    );
    std::fs::write(
        cfg.out_dir.join("rotation_vs_a.txt"),
        io::curve_to_string("a rotation_number", &curve),
    )?;
    let violations = dynamics::monotonicity_violations(&curve, 1e-9);
    println!(
        "scanned {} parameter values; {} monotonicity violation(s)",
        curve.len(),
        violations.len()
    );
    for &i in violations.iter().take(10) {
        println!("  rho decreases across a = {:.6} -> {:.6}", curve[i].0, curve[i + 1].0);
    }
    Ok(Outcome { code: EXIT_OK })
}

/// Deterministic regeneration of a named quantitative artifact.
pub fn cmd_reproduce(cfg: &RunConfig, artifact: &str) -> Result<Outcome> {
    let dir = cfg.out_dir.join(artifact);
    ensure_dir(&dir)?;
    let code = match artifact {
        "table1" => reproduce_table1(cfg, &dir)?,
        "fig_basins" => reproduce_fig_basins(cfg, &dir)?,
        "fig_tongues" => reproduce_fig_tongues(cfg, &dir)?,
        "fig_existence" => reproduce_fig_existence(cfg, &dir)?,
        "fig_rotnum" => reproduce_fig_rotnum(cfg, &dir)?,
        "fig_drift_mu" => reproduce_fig_drift_mu(cfg, &dir)?,
        other => bail!(
            "unknown artifact `{other}` (expected table1, fig_basins, fig_tongues, fig_existence, fig_rotnum, fig_drift_mu)"
        ),
    };
    Ok(Outcome { code })
}

fn write_manifest(dir: &Path, artifact: &str, cfg: &RunConfig, extra: &str) -> Result<()> {
    let mut buf = format!("# toruskit reproduce {artifact}\n");
    buf.push_str(extra);
    buf.push_str(&cfg.manifest());
    std::fs::write(dir.join("manifest.txt"), buf)?;
    Ok(())
}

fn reproduce_table1(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let omega = toruskit::fourier::DiophantineFrequency::golden();
    // the march must reach the blow-up window: tolerance at the working
    // noise floor, headroom above the default mode cap, dense trailing steps
    let mut policy = cfg.continuation_policy();
    policy.m_set = vec![1.0, 2.0, 3.0];
    policy.solver.tol = policy.solver.tol.max(1e-10);
    policy.solver.mode_cap = policy.solver.mode_cap.max(1 << 16);
    policy.step_floor = policy.step_floor.max(1e-4);
    let runs = [("conservative", 1.0_f64), ("dissipative", 0.9), ("dissipative", 0.5)];
    let policy_ref = &policy;
    let omega_ref = &omega;
    let rows: Vec<String> = toruskit::par::map_collect(runs.to_vec(), move |(kind, lambda)| {
        let model = if kind == "conservative" {
            toruskit::models::MapModel::conservative_standard(
                0.0,
                toruskit::models::Potential::SingleHarmonic,
            )
        } else {
            toruskit::models::MapModel::dissipative_standard(
                lambda,
                0.0,
                0.0,
                toruskit::models::Potential::SingleHarmonic,
            )
        };
        let result = continue_torus(&model, omega_ref, 0.0, 1.05, policy_ref)
            .map_err(|e| format!("{e}"))
            .and_then(|(trace, _)| {
                estimate_breakdown(&trace, 2.0).map_err(|e| format!("{e}")).map(|est| (trace, est))
            });
        match result {
            Ok((trace, est)) => format!(
                "{kind} lambda={lambda} epsilon_crit={:.4} beta={:.3} last_converged={:.4}",
                est.epsilon_crit, est.beta, trace.last_converged_epsilon
            ),
            Err(e) => format!("{kind} lambda={lambda} FAILED: {e}"),
        }
    });
    let mut table = String::from("# breakdown of the golden-mean curve, Sobolev blow-up method\n");
    for row in &rows {
        table.push_str(row);
        table.push('\n');
    }
    std::fs::write(dir.join("table1.txt"), &table)?;
    print!("{table}");
    write_manifest(dir, "table1", cfg, "# golden-mean rotation, H^2 fit\n")?;
    Ok(EXIT_OK)
}

fn reproduce_fig_basins(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let lambda = 0.91;
    let rho = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mu = TAU * (1.0 - lambda) * rho;
    let model = toruskit::models::MapModel::dissipative_standard(
        lambda,
        mu,
        0.9,
        toruskit::models::Potential::SingleHarmonic,
    );
    let map = dynamics::classify_basins(
        &model,
        BasinWindow { x_min: 0.0, x_max: TAU, y_min: 2.8, y_max: 4.8 },
        cfg.basins.nx.min(250),
        cfg.basins.ny.min(250),
        cfg.basins.transient,
        cfg.basins.kept,
        SamplingMode::Deterministic,
    );
    let (pgm, legend) = io::basins_to_pgm(&map);
    std::fs::write(dir.join("basins.pgm"), pgm)?;
    std::fs::write(dir.join("legend.txt"), legend)?;
    println!("fig_basins: {} attractor bucket(s)", map.buckets.len());
    write_manifest(dir, "fig_basins", cfg, "# lambda=0.91 eps=0.9 mu=2pi(1-lambda)golden\n")?;
    Ok(EXIT_OK)
}

fn reproduce_fig_tongues(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let lambda = 0.9;
    let pairs: [(i64, u64); 3] = [(1, 3), (1, 2), (2, 3)];
    let eps_grid: Vec<f64> = (1..=9).map(|i| 0.05 * i as f64).collect();
    let mut tongues = Vec::new();
    for &(p, q) in &pairs {
        let rot = TAU * p as f64 / q as f64;
        let mut seed = (rot, (1.0 - lambda) * rot);
        for &eps in &eps_grid {
            let model = toruskit::models::MapModel::dissipative_standard(
                lambda,
                0.0,
                eps,
                toruskit::models::Potential::SingleHarmonic,
            );
            match trace_tongue(&model, p, q, cfg.greene.sweep_samples.max(12), seed) {
                Ok(t) => {
                    let c = t.center_orbit();
                    seed = (c.points[0].y, c.mu);
                    tongues.push(t);
                }
                Err(e) => {
                    println!("fig_tongues: {p}/{q} at eps {eps}: {e}");
                    break;
                }
            }
        }
    }
    std::fs::write(dir.join("tongues.txt"), io::tongue_table_to_string(&tongues))?;
    // full per-orbit table alongside the interval summary
    let mut orbit_rows = String::new();
    for t in &tongues {
        orbit_rows.push_str(&io::orbit_table_to_string(&t.orbits, t.epsilon, t.lambda));
    }
    std::fs::write(dir.join("orbits.txt"), orbit_rows)?;
    println!("fig_tongues: {} (p/q, eps) tongue rows", tongues.len());
    write_manifest(dir, "fig_tongues", cfg, "# lambda=0.9, periods 1/3, 1/2, 2/3\n")?;
    Ok(EXIT_OK)
}

fn reproduce_fig_existence(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let omega = toruskit::fourier::DiophantineFrequency::golden();
    // desk-scale policy: coarse but honest continuation per ray
    let mut policy = cfg.continuation_policy();
    policy.solver.mode_cap = policy.solver.mode_cap.min(1 << 10);
    policy.solver.tol = policy.solver.tol.max(1e-10);
    policy.step_floor = policy.step_floor.max(2e-3);
    let scan = existence_region_scan(
        0.9,
        &omega,
        cfg.region.resolution,
        cfg.region.extent,
        cfg.region.full_plane,
        cfg.region.n_rays,
        &policy,
    );
    let (pgm, boundary) = io::region_to_string(&scan);
    std::fs::write(dir.join("region.pgm"), pgm)?;
    std::fs::write(dir.join("boundary.txt"), boundary)?;
    println!(
        "fig_existence: {} rays, {} star-shape violation(s)",
        scan.boundary.len(),
        scan.violations.len()
    );
    write_manifest(dir, "fig_existence", cfg, "# lambda=0.9, two-harmonic potential plane\n")?;
    Ok(EXIT_OK)
}

fn reproduce_fig_rotnum(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let a_grid: Vec<f64> = (0..121).map(|i| -1.2 + 0.02 * i as f64).collect();
    let curve = dynamics::rotation_vs_parameter(
        0.9,
        0.0,
        0.3,
        toruskit::models::Potential::SingleHarmonic,
        &a_grid,
        CylinderState::new(0.3, 1.0),
        3000,
        3000,
    );
    std::fs::write(dir.join("rotation_vs_a.txt"), io::curve_to_string("a rho", &curve))?;
    let violations = dynamics::monotonicity_violations(&curve, 1e-9);
    println!("fig_rotnum: {} samples, {} non-monotone step(s)", curve.len(), violations.len());
    write_manifest(dir, "fig_rotnum", cfg, "# non-twist family, lambda=0.9 eps=0.3 mu=0\n")?;
    Ok(EXIT_OK)
}

fn reproduce_fig_drift_mu(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let omega = toruskit::fourier::DiophantineFrequency::golden();
    let mut lambdas: Vec<f64> = (1..=18).map(|i| 0.05 * i as f64).collect();
    lambdas.extend([0.95, 0.99, 0.999]);
    let solver = cfg.solver.clone();
    let omega_ref = &omega;
    let solver_ref = &solver;
    let curve: Vec<(f64, f64)> = toruskit::par::map_collect(lambdas, move |lambda| {
        let model = toruskit::models::MapModel::dissipative_standard(
            lambda,
            0.0,
            0.1,
            toruskit::models::Potential::SingleHarmonic,
        );
        let mu = solve(&model, omega_ref, solver_ref, Seed::Cold)
            .ok()
            .filter(|s| s.report.converged)
            .map(|s| s.torus.mu())
            .unwrap_or(f64::NAN);
        (lambda, mu)
    });
    std::fs::write(dir.join("mu_vs_lambda.txt"), io::curve_to_string("lambda mu", &curve))?;
    let last = curve.last().unwrap();
    println!(
        "fig_drift_mu: mu({:.2}) = {:.6e} (drift vanishes toward the conservative limit)",
        last.0, last.1
    );
    write_manifest(dir, "fig_drift_mu", cfg, "# golden-mean torus at eps=0.1\n")?;
    Ok(EXIT_OK)
}

