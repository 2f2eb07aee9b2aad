//! Plain-text file formats: torus checkpoints, continuation traces with
//! breakdown estimates, periodic-orbit and tongue tables, basin maps as
//! PGM images, and two-column curves. Everything is written in full double
//! precision so downstream fits lose no digits, and torus files round-trip
//! losslessly.

use crate::bundles::BundleData;
use crate::continuation::{BreakdownEstimate, ContinuationTrace, EstimateMethod, RegionScan};
use crate::dynamics::BasinMap;
use crate::fourier::{DiophantineFrequency, PeriodicGridFunction};
use crate::greene::{ArnoldTongue, PeriodicOrbit};
use crate::models::{MapModel, NonTwistMapParams, Potential, SpinOrbitMap, SpinOrbitParams, StandardMapParams};
use crate::newton::TorusEmbedding;
use num_complex::Complex64;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

/// One `[name]` block of a structured text file, with raw numbered lines.
#[derive(Debug, Clone)]
pub struct Section {
    pub name: String,
    pub lines: Vec<(usize, String)>,
}

/// Split a file into sections; full-line comments (#) and blanks are dropped.
pub fn parse_sections(text: &str) -> Result<Vec<Section>, IoError> {
    let mut out: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line_no, "unterminated section header"))?;
            out.push(Section { name: name.trim().to_string(), lines: Vec::new() });
        } else if let Some(section) = out.last_mut() {
            section.lines.push((line_no, line.to_string()));
        } else {
            return Err(parse_err(line_no, "content before the first [section]"));
        }
    }
    Ok(out)
}

/// Interpret a section's lines as `key = value` pairs; unknown keys are the
/// caller's to reject.
pub fn section_kv(section: &Section) -> Result<Vec<(usize, String, String)>, IoError> {
    section
        .lines
        .iter()
        .map(|(line, text)| {
            let (k, v) = text
                .split_once('=')
                .ok_or_else(|| parse_err(*line, "expected `key = value`"))?;
            Ok((*line, k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn get_f64(kv: &[(usize, String, String)], key: &str) -> Result<f64, IoError> {
    let (line, _, v) = kv
        .iter()
        .find(|(_, k, _)| k == key)
        .ok_or_else(|| parse_err(0, format!("missing key `{key}`")))?;
    v.parse::<f64>()
        .map_err(|e| parse_err(*line, format!("bad float for `{key}`: {e}")))
}

fn get_usize(kv: &[(usize, String, String)], key: &str) -> Result<usize, IoError> {
    let (line, _, v) = kv
        .iter()
        .find(|(_, k, _)| k == key)
        .ok_or_else(|| parse_err(0, format!("missing key `{key}`")))?;
    v.parse::<usize>()
        .map_err(|e| parse_err(*line, format!("bad integer for `{key}`: {e}")))
}

fn get_str<'a>(kv: &'a [(usize, String, String)], key: &str) -> Result<&'a str, IoError> {
    kv.iter()
        .find(|(_, k, _)| k == key)
        .map(|(_, _, v)| v.as_str())
        .ok_or_else(|| parse_err(0, format!("missing key `{key}`")))
}

fn f(v: f64) -> String {
    format!("{v:.17e}")
}

fn write_potential(buf: &mut String, potential: &Potential) {
    match potential {
        Potential::SingleHarmonic => {
            let _ = writeln!(buf, "potential = single_harmonic");
        }
        Potential::TwoHarmonic { eps1, eps2 } => {
            let _ = writeln!(buf, "potential = two_harmonic");
            let _ = writeln!(buf, "eps1 = {}", f(*eps1));
            let _ = writeln!(buf, "eps2 = {}", f(*eps2));
        }
    }
}

fn read_potential(kv: &[(usize, String, String)]) -> Result<Potential, IoError> {
    match get_str(kv, "potential")? {
        "single_harmonic" => Ok(Potential::SingleHarmonic),
        "two_harmonic" => Ok(Potential::TwoHarmonic {
            eps1: get_f64(kv, "eps1")?,
            eps2: get_f64(kv, "eps2")?,
        }),
        other => Err(parse_err(0, format!("unknown potential `{other}`"))),
    }
}

/// Serialize the model block of a torus or config file.
pub fn model_block(model: &MapModel) -> String {
    let mut buf = String::from("[model]\n");
    let _ = writeln!(buf, "family = {}", model.family_name());
    match model {
        MapModel::Standard(p) => {
            let _ = writeln!(buf, "lambda = {}", f(p.lambda));
            let _ = writeln!(buf, "mu = {}", f(p.mu));
            let _ = writeln!(buf, "epsilon = {}", f(p.epsilon));
            write_potential(&mut buf, &p.potential);
        }
        MapModel::NonTwist(p) => {
            let _ = writeln!(buf, "lambda = {}", f(p.lambda));
            let _ = writeln!(buf, "mu = {}", f(p.mu));
            let _ = writeln!(buf, "epsilon = {}", f(p.epsilon));
            let _ = writeln!(buf, "a = {}", f(p.a));
            write_potential(&mut buf, &p.potential);
        }
        MapModel::SpinOrbit(m) => {
            let p = m.params();
            let _ = writeln!(buf, "eccentricity = {}", f(p.eccentricity));
            let _ = writeln!(buf, "epsilon = {}", f(p.epsilon));
            let _ = writeln!(buf, "k_d = {}", f(p.k_d));
            let _ = writeln!(buf, "mu = {}", f(m.mu()));
            let _ = writeln!(buf, "n_substeps = {}", p.n_substeps);
            let _ = writeln!(buf, "averaged = {}", p.averaged);
        }
    }
    buf
}

/// Rebuild a model from its serialized block.
pub fn model_from_kv(kv: &[(usize, String, String)]) -> Result<MapModel, IoError> {
    match get_str(kv, "family")? {
        "conservative_standard" => Ok(MapModel::Standard(StandardMapParams::conservative(
            get_f64(kv, "epsilon")?,
            read_potential(kv)?,
        ))),
        "dissipative_standard" => Ok(MapModel::Standard(StandardMapParams::dissipative(
            get_f64(kv, "lambda")?,
            get_f64(kv, "mu")?,
            get_f64(kv, "epsilon")?,
            read_potential(kv)?,
        ))),
        "nontwist_standard" => Ok(MapModel::NonTwist(NonTwistMapParams {
            lambda: get_f64(kv, "lambda")?,
            mu: get_f64(kv, "mu")?,
            epsilon: get_f64(kv, "epsilon")?,
            a: get_f64(kv, "a")?,
            potential: read_potential(kv)?,
        })),
        name @ ("spin_orbit_conservative" | "spin_orbit_dissipative") => {
            let k_d = if name == "spin_orbit_conservative" { 0.0 } else { get_f64(kv, "k_d")? };
            let params = SpinOrbitParams {
                eccentricity: get_f64(kv, "eccentricity")?,
                epsilon: get_f64(kv, "epsilon")?,
                k_d,
                mu_override: get_f64(kv, "mu").ok(),
                n_substeps: get_usize(kv, "n_substeps")?,
                averaged: get_str(kv, "averaged").map(|v| v == "true").unwrap_or(true),
            };
            let map = SpinOrbitMap::new(params)
                .map_err(|e| parse_err(0, format!("invalid spin-orbit block: {e}")))?;
            Ok(MapModel::SpinOrbit(map))
        }
        other => Err(parse_err(0, format!("unknown family `{other}`"))),
    }
}

#[derive(Debug, Clone)]
pub struct BundleSummary {
    pub min_angle: f64,
    pub argmin_theta: f64,
    pub multipliers: (f64, f64),
    pub reducibility_residual: f64,
}

impl BundleSummary {
    pub fn from_data(data: &BundleData, multipliers: (f64, f64)) -> Self {
        Self {
            min_angle: data.min_angle,
            argmin_theta: data.argmin_theta,
            multipliers,
            reducibility_residual: data.reducibility_residual,
        }
    }
}

#[derive(Debug)]
pub struct TorusFile {
    pub torus: TorusEmbedding,
    pub sup_error: f64,
    /// (m, ‖K‖_{H^m}) pairs
    pub sobolev: Vec<(f64, f64)>,
    pub bundle: Option<BundleSummary>,
}

fn write_coeff_section(buf: &mut String, name: &str, g: &PeriodicGridFunction) {
    let _ = writeln!(buf, "[{name}]");
    let n = g.n_modes();
    for k in 0..=(n / 2) as i64 {
        let c = g.coeff(k);
        if c.norm() > 0.0 {
            let _ = writeln!(buf, "{k} {} {}", f(c.re), f(c.im));
        }
    }
}

fn read_coeff_section(section: &Section, n: usize) -> Result<PeriodicGridFunction, IoError> {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (line, text) in &section.lines {
        let mut it = text.split_whitespace();
        let k: i64 = it
            .next()
            .ok_or_else(|| parse_err(*line, "empty coefficient record"))?
            .parse()
            .map_err(|e| parse_err(*line, format!("bad mode index: {e}")))?;
        let re: f64 = it
            .next()
            .ok_or_else(|| parse_err(*line, "missing real part"))?
            .parse()
            .map_err(|e| parse_err(*line, format!("bad real part: {e}")))?;
        let im: f64 = it
            .next()
            .ok_or_else(|| parse_err(*line, "missing imaginary part"))?
            .parse()
            .map_err(|e| parse_err(*line, format!("bad imaginary part: {e}")))?;
        if !(0..=(n / 2) as i64).contains(&k) {
            return Err(parse_err(*line, format!("mode {k} outside 0..={}", n / 2)));
        }
        coeffs[k as usize] = Complex64::new(re, im);
        if k > 0 && (k as usize) < n / 2 {
            coeffs[n - k as usize] = Complex64::new(re, -im);
        }
    }
    PeriodicGridFunction::from_coeffs(coeffs)
        .map_err(|e| parse_err(0, format!("bad coefficient grid: {e}")))
}

pub fn torus_to_string(file: &TorusFile) -> String {
    let t = &file.torus;
    let mut buf = String::from("# toruskit torus v1\n");
    buf.push_str(&model_block(t.model()));
    buf.push_str("[torus]\n");
    let _ = writeln!(buf, "omega = {}", f(t.omega().omega()));
    let _ = writeln!(buf, "mu = {}", f(t.mu()));
    let _ = writeln!(buf, "n_modes = {}", t.n_modes());
    let _ = writeln!(buf, "sup_error = {}", f(file.sup_error));
    for (m, v) in &file.sobolev {
        let _ = writeln!(buf, "h{m} = {}", f(*v));
    }
    write_coeff_section(&mut buf, "ky", &t.ky);
    write_coeff_section(&mut buf, "kx", &t.kx_periodic);
    if let Some(b) = &file.bundle {
        buf.push_str("[bundle]\n");
        let _ = writeln!(buf, "min_angle = {}", f(b.min_angle));
        let _ = writeln!(buf, "argmin_theta = {}", f(b.argmin_theta));
        let _ = writeln!(buf, "multiplier_1 = {}", f(b.multipliers.0));
        let _ = writeln!(buf, "multiplier_2 = {}", f(b.multipliers.1));
        let _ = writeln!(buf, "reducibility_residual = {}", f(b.reducibility_residual));
    }
    buf
}

pub fn write_torus(path: &Path, file: &TorusFile) -> Result<(), IoError> {
    std::fs::write(path, torus_to_string(file))?;
    Ok(())
}

pub fn torus_from_string(text: &str) -> Result<TorusFile, IoError> {
    let sections = parse_sections(text)?;
    let find = |name: &str| sections.iter().find(|s| s.name == name);
    let model_kv = section_kv(find("model").ok_or_else(|| parse_err(0, "missing [model]"))?)?;
    let model = model_from_kv(&model_kv)?;
    let torus_kv = section_kv(find("torus").ok_or_else(|| parse_err(0, "missing [torus]"))?)?;
    let omega = DiophantineFrequency::from_omega(get_f64(&torus_kv, "omega")?);
    let mu = get_f64(&torus_kv, "mu")?;
    let n = get_usize(&torus_kv, "n_modes")?;
    let sup_error = get_f64(&torus_kv, "sup_error")?;
    let mut sobolev = Vec::new();
    for (_, k, v) in &torus_kv {
        if let Some(m) = k.strip_prefix('h') {
            if let (Ok(m), Ok(val)) = (m.parse::<f64>(), v.parse::<f64>()) {
                sobolev.push((m, val));
            }
        }
    }
    let ky = read_coeff_section(find("ky").ok_or_else(|| parse_err(0, "missing [ky]"))?, n)?;
    let kx = read_coeff_section(find("kx").ok_or_else(|| parse_err(0, "missing [kx]"))?, n)?;
    let bundle = match find("bundle") {
        None => None,
        Some(s) => {
            let kv = section_kv(s)?;
            Some(BundleSummary {
                min_angle: get_f64(&kv, "min_angle")?,
                argmin_theta: get_f64(&kv, "argmin_theta")?,
                multipliers: (get_f64(&kv, "multiplier_1")?, get_f64(&kv, "multiplier_2")?),
                reducibility_residual: get_f64(&kv, "reducibility_residual")?,
            })
        }
    };
    Ok(TorusFile {
        torus: TorusEmbedding::from_parts(model, omega, mu, ky, kx),
        sup_error,
        sobolev,
        bundle,
    })
}

pub fn read_torus(path: &Path) -> Result<TorusFile, IoError> {
    torus_from_string(&std::fs::read_to_string(path)?)
}

pub fn trace_to_string(trace: &ContinuationTrace, estimate: Option<&BreakdownEstimate>) -> String {
    let mut buf = String::from("# toruskit continuation trace v1\n");
    let _ = write!(buf, "# columns: epsilon mu n_modes sup_error");
    for m in &trace.m_set {
        let _ = write!(buf, " h{m}");
    }
    buf.push_str(" min_bundle_angle wall_time\n");
    for r in &trace.records {
        let _ = write!(buf, "{} {} {} {}", f(r.epsilon), f(r.mu), r.n_modes, f(r.sup_error));
        for v in &r.sobolev_norms {
            let _ = write!(buf, " {}", f(*v));
        }
        match r.min_bundle_angle {
            Some(a) => {
                let _ = write!(buf, " {}", f(a));
            }
            None => buf.push_str(" -"),
        }
        let _ = writeln!(buf, " {:.3}", r.wall_time);
    }
    let _ = writeln!(
        buf,
        "# last_converged_epsilon = {} failure = {}",
        f(trace.last_converged_epsilon),
        trace.failure_reason.as_deref().unwrap_or("none")
    );
    if let Some(e) = estimate {
        buf.push_str("[estimate]\n");
        let _ = writeln!(buf, "epsilon_crit = {}", f(e.epsilon_crit));
        let _ = writeln!(buf, "beta = {}", f(e.beta));
        let _ = writeln!(buf, "window = {} {}", f(e.fit_window.0), f(e.fit_window.1));
        let _ = writeln!(buf, "residual = {}", f(e.fit_residual));
        let _ = writeln!(
            buf,
            "method = {}",
            match e.method {
                EstimateMethod::SobolevFit => "sobolev_fit",
                EstimateMethod::LastConverged => "last_converged",
            }
        );
    }
    buf
}

pub fn write_trace(
    path: &Path,
    trace: &ContinuationTrace,
    estimate: Option<&BreakdownEstimate>,
) -> Result<(), IoError> {
    std::fs::write(path, trace_to_string(trace, estimate))?;
    Ok(())
}

pub fn orbit_table_to_string(orbits: &[PeriodicOrbit], epsilon: f64, lambda: f64) -> String {
    let mut buf =
        String::from("# p q epsilon lambda x0 y0 mu re_l1 im_l1 re_l2 im_l2 residue\n");
    for o in orbits {
        let z0 = o.points[0];
        let _ = writeln!(
            buf,
            "{} {} {} {} {} {} {} {} {} {} {} {}",
            o.p,
            o.q,
            f(epsilon),
            f(lambda),
            f(z0.x),
            f(z0.y),
            f(o.mu),
            f(o.eigenvalues[0].re),
            f(o.eigenvalues[0].im),
            f(o.eigenvalues[1].re),
            f(o.eigenvalues[1].im),
            f(o.residue),
        );
    }
    buf
}

pub fn tongue_table_to_string(tongues: &[ArnoldTongue]) -> String {
    let mut buf = String::from("# p q epsilon lambda mu_min mu_max width\n");
    for t in tongues {
        let _ = writeln!(
            buf,
            "{} {} {} {} {} {} {}",
            t.p,
            t.q,
            f(t.epsilon),
            f(t.lambda),
            f(t.mu_min),
            f(t.mu_max),
            f(t.width()),
        );
    }
    buf
}

/// ASCII PGM (P2) of bucket assignments, plus a legend mapping gray levels
/// to attractor rotation numbers.
pub fn basins_to_pgm(map: &BasinMap) -> (String, String) {
    let levels = map.buckets.len().max(1);
    let mut pgm = format!("P2\n# toruskit basin map\n{} {}\n{}\n", map.nx, map.ny, levels);
    for row in 0..map.ny {
        let mut line = String::new();
        for col in 0..map.nx {
            let a = map.assignment[row * map.nx + col];
            let gray = if a < 0 { 0 } else { a as usize + 1 };
            if col > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{gray}");
        }
        pgm.push_str(&line);
        pgm.push('\n');
    }
    let mut legend = String::from("# gray rotation_number cells\n0 unresolved ");
    let unresolved = map.assignment.iter().filter(|&&a| a < 0).count();
    let _ = writeln!(legend, "{unresolved}");
    for (i, b) in map.buckets.iter().enumerate() {
        let count = map.assignment.iter().filter(|&&a| a == i as i32).count();
        let _ = writeln!(legend, "{} {} {count}", i + 1, f(*b));
    }
    (pgm, legend)
}

pub fn region_to_string(scan: &RegionScan) -> (String, String) {
    let mut pgm = format!(
        "P2\n# toruskit existence region\n{0} {0}\n1\n",
        scan.resolution
    );
    for row in 0..scan.resolution {
        let mut line = String::new();
        for col in 0..scan.resolution {
            if col > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{}", scan.exists[row * scan.resolution + col] as u8);
        }
        pgm.push_str(&line);
        pgm.push('\n');
    }
    let mut boundary = String::from("# angle radius eps1 eps2\n");
    for &(phi, r) in &scan.boundary {
        let _ = writeln!(boundary, "{} {} {} {}", f(phi), f(r), f(r * phi.cos()), f(r * phi.sin()));
    }
    for &(phi, r) in &scan.violations {
        let _ = writeln!(boundary, "# star-shape violation at angle {} radius {}", f(phi), f(r));
    }
    (pgm, boundary)
}

pub fn curve_to_string(header: &str, curve: &[(f64, f64)]) -> String {
    let mut buf = format!("# {header}\n");
    for &(a, b) in curve {
        let _ = writeln!(buf, "{} {}", f(a), f(b));
    }
    buf
}
