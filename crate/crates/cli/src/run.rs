use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use semiper::forcing::{duhamel_ft, gain_of_derivatives, DuhamelOptions, PeriodicForcing};
use semiper::io::{to_json, Table};
use semiper::linalg::{c64, re, CMat, CVec, ONE};
use semiper::models::{
    build_boundary_forced_wave, build_damped_wave_circle, build_damped_wave_interval, build_heat_wave_1d, build_sphere_schrodinger, DampingProfile, SphereBlockModel,
};
use semiper::periodic::{
    boundary_periodic_solve, convergence_gap, periodic_w0_direct, periodic_w0_harmonic_balance, periodic_w0_series, picard_epsilon_sweep, verify_orbit, windowed_ratio,
    NonlinearCoupling, PeriodicSolveReport, PicardOptions, SolveMethod, SolverOptions,
};
use semiper::resonance::{concentration_scan, detuned_period, growth_experiment};
use semiper::stability::{self, BtOptions, ResolventScanOptions, ScanResult};
use semiper::{Layout, Model};

use crate::config::{Experiment, ExperimentConfig, ForcingSpec, Method, ModelSpec, Profile, RunSpec, Shape, Slot};
use crate::plot;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Core(#[from] semiper::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

impl CliError {
    pub fn name(&self) -> String {
        match self {
            Self::InvalidConfig(_) => "cli::InvalidConfig".into(),
            Self::Core(e) => e.name(),
            Self::Write { .. } => "io::File".into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::InvalidConfig(_) => 2,
            Self::Core(e) if e.is_validation() => 2,
            _ => 3,
        }
    }
}

macro_rules! core_err {
    ($e:expr) => {
        $e.map_err(|e| CliError::Core(e.into()))
    };
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct StageTime {
    pub run: String,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub stages: Vec<StageTime>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Collects emitted files below the output root.
struct Emitter {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl Emitter {
    fn write(&mut self, rel: &Path, contents: &str) -> Result<()> {
        let path = self.root.join(rel);
        let err = |source| CliError::Write { path: path.display().to_string(), source };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(err)?;
        }
        std::fs::write(&path, contents).map_err(err)?;
        self.files.push(FileEntry { path: rel.to_string_lossy().replace('\\', "/"), bytes: contents.len() as u64, sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &Path, value: &T) -> Result<()> {
        let text = core_err!(to_json(value))?;
        self.write(rel, &(text + "\n"))
    }
}

struct Built {
    model: Model,
    sphere: Option<SphereBlockModel>,
    damping: Option<DampingProfile>,
}

fn build_model(spec: &ModelSpec) -> Result<Built> {
    let plain = |model| Built { model, sphere: None, damping: None };
    Ok(match spec {
        ModelSpec::Scalar { a } => plain(Model::scalar(re(*a))),
        ModelSpec::DampedWaveInterval { n, length, damping } => Built { damping: Some(damping.clone()), ..plain(core_err!(build_damped_wave_interval(*n, *length, damping))?) },
        ModelSpec::DampedWaveCircle { n, length, damping } => Built { damping: Some(damping.clone()), ..plain(core_err!(build_damped_wave_circle(*n, *length, damping))?) },
        ModelSpec::HeatWave { n_heat, n_wave } => plain(core_err!(build_heat_wave_1d(*n_heat, *n_wave))?),
        ModelSpec::Sphere { jmax, m, damping, nodes } => {
            let block = core_err!(build_sphere_schrodinger(*jmax, *m, damping, *nodes))?;
            Built { model: block.model.clone(), sphere: Some(block), damping: Some(damping.clone()) }
        }
        ModelSpec::BoundaryWave { n, length, damping, region, eta } => Built { damping: Some(damping.clone()), ..plain(core_err!(build_boundary_forced_wave(*n, *length, damping, *region, *eta))?) },
        ModelSpec::SyntheticResolvent { alpha, modes } => plain(core_err!(stability::synthetic_resolvent_model(*alpha, *modes))?),
    })
}

fn profile_vector(model: &Model, profile: &Profile, rng: &mut ChaCha8Rng) -> Result<CVec> {
    let dim = model.dim();
    Ok(match profile {
        Profile::Ones => CVec::from_element(dim, ONE),
        Profile::Smooth => CVec::from_iterator(dim, (0..dim).map(|i| re((PI * (i as f64 + 0.5) / dim as f64).sin()))),
        Profile::Random => CVec::from_iterator(dim, (0..dim).map(|_| c64(rng.gen_range(-1.0..1.0), 0.0))),
        Profile::Trig { offset, terms, slot } => {
            let (nodes, range) = match model.layout() {
                Layout::Wave { nodes, displacement, velocity, .. } => (nodes.clone(), if *slot == Slot::Velocity { velocity.clone() } else { displacement.clone() }),
                Layout::HeatWave { wave_nodes, displacement, velocity, .. } => (wave_nodes.clone(), if *slot == Slot::Velocity { velocity.clone() } else { displacement.clone() }),
                _ => return Err(CliError::InvalidConfig("trig profile needs a wave layout".into())),
            };
            let mut v = CVec::zeros(dim);
            for (i, x) in range.zip(&nodes) {
                let s: f64 = terms.iter().map(|t| t.amplitude * if t.cosine { (t.frequency * PI * x).cos() } else { (t.frequency * PI * x).sin() }).sum();
                v[i] = re(offset + s);
            }
            v
        }
    })
}

fn build_forcing(model: &Model, spec: &ForcingSpec, rng: &mut ChaCha8Rng) -> Result<PeriodicForcing> {
    let mut parts = Vec::new();
    for c in &spec.components {
        let v = profile_vector(model, &c.profile, rng)?;
        let f = match c.shape {
            Shape::Constant => PeriodicForcing::constant(spec.period, v),
            Shape::Cosine { k } => PeriodicForcing::cosine(spec.period, k, &v),
            Shape::Sine { k } => PeriodicForcing::sine(spec.period, k, &v),
            Shape::Bump { p } => PeriodicForcing::bump(spec.period, p, &v),
        };
        parts.push((re(c.scale), core_err!(f)?));
    }
    if parts.len() == 1 && parts[0].0 == ONE {
        return Ok(parts.pop().unwrap().1);
    }
    core_err!(PeriodicForcing::linear_combination(parts))
}

fn solve(model: &Model, f: &PeriodicForcing, method: Method, opts: &SolverOptions) -> Result<PeriodicSolveReport> {
    Ok(match method {
        Method::Series => core_err!(periodic_w0_series(model, f, opts))?,
        Method::Direct => core_err!(periodic_w0_direct(model, f, opts))?,
        Method::HarmonicBalance => core_err!(periodic_w0_harmonic_balance(model, f, opts))?.0,
    })
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Series => "series",
        Method::Direct => "direct",
        Method::HarmonicBalance => "harmonic_balance",
    }
}

fn emit_scan(em: &mut Emitter, dir: &Path, stem: &str, scan: &ScanResult, log_log: bool) -> Result<()> {
    let csv = format!("{stem}.csv");
    em.write(&dir.join(&csv), &scan.to_table().to_csv())?;
    em.json(&dir.join(format!("{stem}.json")), scan)?;
    em.write(&dir.join(format!("{stem}.gp")), &plot::scan_script(&csv, stem, scan, log_log))
}

/// Executes every run; returns the manifest (already written).
pub fn run(config_path: &Path, config_bytes: &[u8], config: &ExperimentConfig, out: &Path, seed: u64) -> Result<RunManifest> {
    let mut em = Emitter { root: out.to_path_buf(), files: Vec::new() };
    let mut stages = Vec::new();
    for spec in &config.runs {
        run_one(spec, seed, &mut em, &mut stages)?;
    }
    let mut versions = BTreeMap::new();
    versions.insert("semiper".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert("config_schema".to_string(), "1".to_string());
    let manifest = RunManifest {
        config: config_path.display().to_string(),
        config_sha256: sha256_hex(config_bytes),
        seed,
        versions,
        stages,
        files: std::mem::take(&mut em.files),
    };
    let text = core_err!(to_json(&manifest))? + "\n";
    let path = out.join("manifest.json");
    std::fs::write(&path, text).map_err(|source| CliError::Write { path: path.display().to_string(), source })?;
    Ok(manifest)
}

fn run_one(spec: &RunSpec, seed: u64, em: &mut Emitter, stages: &mut Vec<StageTime>) -> Result<()> {
    let dir = PathBuf::from(&spec.label);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock = Instant::now();
    let built = build_model(&spec.model)?;
    let model = &built.model;
    let forcing = spec.forcing.as_ref().map(|f| build_forcing(model, f, &mut rng)).transpose()?;
    stages.push(StageTime { run: spec.label.clone(), stage: "build".into(), seconds: clock.elapsed().as_secs_f64() });
    for exp in &spec.experiments {
        let clock = Instant::now();
        let stage = experiment(spec, &built, forcing.as_ref(), exp, &dir, em, &mut rng)?;
        stages.push(StageTime { run: spec.label.clone(), stage: stage.into(), seconds: clock.elapsed().as_secs_f64() });
    }
    Ok(())
}

fn need_sphere(built: &Built) -> Result<&SphereBlockModel> {
    built.sphere.as_ref().ok_or_else(|| CliError::InvalidConfig("experiment needs a sphere model".into()))
}

fn experiment(spec: &RunSpec, built: &Built, forcing: Option<&PeriodicForcing>, exp: &Experiment, dir: &Path, em: &mut Emitter, rng: &mut ChaCha8Rng) -> Result<&'static str> {
    let model = &built.model;
    let f = || forcing.ok_or_else(|| CliError::InvalidConfig(format!("run {} has no forcing", spec.label)));
    let duhamel = DuhamelOptions::default();
    match exp {
        Experiment::PeriodicSolve { methods, tol, n_max, n_periods } => {
            let f = f()?;
            let mut opts = SolverOptions::default();
            if let Some(t) = tol {
                opts.tol = *t;
            }
            if let Some(n) = n_max {
                opts.n_max = *n;
            }
            let mut reports = BTreeMap::new();
            for m in methods {
                reports.insert(method_name(*m), solve(model, f, *m, &opts)?);
            }
            let first = reports.values().next().expect("methods nonempty");
            let mut agreement: f64 = 0.0;
            for a in reports.values() {
                for b in reports.values() {
                    agreement = agreement.max(model.norm(&(&a.w0 - &b.w0)) / model.norm(&b.w0).max(f64::MIN_POSITIVE));
                }
            }
            let check = core_err!(verify_orbit(model, f, &first.w0, *n_periods, &duhamel))?;
            let l1 = f.l1_norm(model.space());
            let out = json!({
                "reports": reports,
                "pairwise_agreement": agreement,
                "agreement_tolerance": 1e-8 * (1.0 + first.condition),
                "forcing_l1_norm": l1,
                "orbit": check,
                "relative_residual": check.residuals[0] / l1.max(f64::MIN_POSITIVE),
            });
            em.json(&dir.join("periodic_report.json"), &out)?;
            Ok("periodic_solve")
        }
        Experiment::KernelProjector { nodes } => {
            let p = model.kernel_projector();
            let c = model.contour_kernel_projector(*nodes);
            let diff = (&p - &c).norm() / c.norm().max(1.0);
            let idem = (&p * &p - &p).norm();
            em.json(&dir.join("kernel_projector.json"), &json!({ "has_kernel": model.has_kernel(), "contour_difference": diff, "idempotence": idem, "nodes": nodes }))?;
            Ok("kernel_projector")
        }
        Experiment::Convergence { starts, n_periods, window } => {
            let f = f()?;
            let w0 = core_err!(periodic_w0_direct(model, f, &SolverOptions::default()))?.w0;
            let rho = model.deflated_spectral_radius(f.period());
            let names: Vec<String> = std::iter::once("n".to_string()).chain((0..*starts).map(|i| format!("gap_{i}"))).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let mut table = Table::new(&refs, &vec!["X"; refs.len()]);
            let mut columns = Vec::new();
            let mut ratios = Vec::new();
            for _ in 0..*starts {
                let v0 = CVec::from_iterator(model.dim(), (0..model.dim()).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
                let gaps = core_err!(convergence_gap(model, f, &w0, &v0, *n_periods, &duhamel))?;
                ratios.push(windowed_ratio(&gaps, window.0, window.1));
                columns.push(gaps);
            }
            for n in 0..=*n_periods {
                let mut row = vec![n as f64];
                row.extend(columns.iter().map(|c| c[n]));
                table.push(row);
            }
            em.write(&dir.join("convergence.csv"), &table.to_csv())?;
            let worst = ratios.iter().map(|r| (r - rho).abs() / rho).fold(0.0, f64::max);
            em.json(&dir.join("convergence.json"), &json!({ "spectral_radius": rho, "windowed_ratios": ratios, "window": window, "worst_relative_deviation": worst }))?;
            em.write(&dir.join("convergence.gp"), &plot::convergence_script("convergence.csv", *starts))?;
            Ok("convergence")
        }
        Experiment::Gain { k_max } => {
            let f = f()?;
            let mut table = Table::new(&["k", "relative_error", "corrected_error", "endpoint_norm"], &["1", "1", "1", "X"]);
            for k in 1..=*k_max {
                let r = core_err!(gain_of_derivatives(model, f, k, &duhamel))?;
                table.push(vec![k as f64, r.relative_error, r.corrected_error, r.endpoint_norm]);
            }
            em.write(&dir.join("gain.csv"), &table.to_csv())?;
            Ok("gain")
        }
        Experiment::DecayEnvelope { alpha, grid, window } => {
            let mut scan = core_err!(stability::decay_envelope(model, *alpha, &grid.points()))?;
            scan.fit = stability::fit_decay_exponent(&scan, *window).ok();
            emit_scan(em, dir, "decay_envelope", &scan, true)?;
            Ok("decay_envelope")
        }
        Experiment::InverseDecay { grid, window, band } => {
            let mut scan = core_err!(stability::inverse_decay(model, &grid.points(), *band))?;
            scan.fit = stability::fit_decay_exponent(&scan, *window).ok();
            emit_scan(em, dir, "inverse_decay", &scan, true)?;
            Ok("inverse_decay")
        }
        Experiment::ResolventScan { grid, window } => {
            let scan = core_err!(stability::resolvent_scan(model, &grid.points(), &ResolventScanOptions { window: *window, include_eigen_frequencies: true }))?;
            emit_scan(em, dir, "resolvent", &scan, false)?;
            Ok("resolvent_scan")
        }
        Experiment::BtCrosscheck { eta_grid, eta_window, t_grid, t_window, band, mlog } => {
            let opts = BtOptions { eta_grid: eta_grid.points(), eta_window: *eta_window, t_grid: t_grid.points(), t_window: *t_window, band: *band };
            let (rec, res, dec) = core_err!(stability::bt_crosscheck(model, &opts))?;
            emit_scan(em, dir, "resolvent", &res, true)?;
            emit_scan(em, dir, "inverse_decay", &dec, true)?;
            em.json(&dir.join("bt.json"), &rec)?;
            if *mlog {
                let ml = core_err!(stability::mlog_bound_curve(&res, &dec))?;
                let mut table = Table::new(&["t", "measured", "bound"], &["time", "X", "X"]);
                for i in 0..ml.times.len() {
                    table.push(vec![ml.times[i], ml.measured[i], ml.bound[i]]);
                }
                em.write(&dir.join("mlog.csv"), &table.to_csv())?;
                em.json(&dir.join("mlog.json"), &json!({ "constant": ml.constant, "fraction": ml.fraction, "validation_start": ml.validation_start }))?;
                em.write(&dir.join("mlog.gp"), &plot::overlay_script("mlog.csv", "mlog", "measured", "bound", true))?;
            }
            Ok("bt_crosscheck")
        }
        Experiment::Interpolation { alpha, grids } => {
            let mut results = Vec::new();
            for (i, g) in grids.iter().enumerate() {
                let c = core_err!(stability::interpolation_check(model, *alpha, &g.points()))?;
                let mut table = Table::new(&["t", "ratio"], &["time", "1"]);
                for (t, r) in c.times.iter().zip(&c.ratios) {
                    table.push(vec![*t, *r]);
                }
                em.write(&dir.join(format!("interpolation_{i}.csv")), &table.to_csv())?;
                results.push(json!({ "grid": g, "sup": c.sup, "argmax": c.argmax }));
            }
            let sups: Vec<f64> = results.iter().map(|r| r["sup"].as_f64().unwrap_or(f64::NAN)).collect();
            let change = sups.iter().map(|s| (s - sups[0]).abs() / sups[0]).fold(0.0, f64::max);
            em.json(&dir.join("interpolation.json"), &json!({ "alpha": alpha, "grids": results, "max_relative_change": change }))?;
            Ok("interpolation")
        }
        Experiment::Concentration { j_list, extra_degrees } => {
            let damping = built.damping.as_ref().ok_or_else(|| CliError::InvalidConfig("concentration needs a damped model".into()))?;
            let scan = core_err!(concentration_scan(*extra_degrees, damping, j_list))?;
            let mut table = Table::new(&["j", "norm", "block_norm", "refinement_change"], &["1", "L2", "L2", "1"]);
            for r in &scan.rows {
                table.push(vec![r.j as f64, r.norm, r.block_norm, r.refinement_change]);
            }
            em.write(&dir.join("concentration.csv"), &table.to_csv())?;
            em.json(&dir.join("concentration.json"), &json!({ "slope": scan.slope, "c": scan.c, "r2": scan.r2, "predicted_rate": scan.predicted_rate }))?;
            Ok("concentration")
        }
        Experiment::ResonanceGrowth { j, k, n_max, period, detuned } => {
            let block = need_sphere(built)?;
            let period = if *detuned { detuned_period(*j) } else { period.unwrap_or(2.0 * PI) };
            let g = core_err!(growth_experiment(block, *j, *k, *n_max, period, None))?;
            em.write(&dir.join("growth.csv"), &g.to_table().to_csv())?;
            em.json(&dir.join("growth.json"), &g)?;
            em.write(&dir.join("growth.gp"), &plot::overlay_script("growth.csv", "growth", "norm", "lower_bound", false))?;
            Ok("resonance_growth")
        }
        Experiment::Picard { coefficients, epsilons, nodes, max_iter } => {
            let f = f()?;
            let g = match model.layout() {
                Layout::Wave { .. } => core_err!(NonlinearCoupling::wave(model, coefficients.clone()))?,
                _ => core_err!(NonlinearCoupling::scalar(coefficients.clone()))?,
            };
            let mut opts = PicardOptions::default();
            if let Some(n) = nodes {
                opts.nodes = *n;
            }
            if let Some(m) = max_iter {
                opts.max_iter = *m;
            }
            let sweep = core_err!(picard_epsilon_sweep(model, f, &g, epsilons, &opts))?;
            let mut table = Table::new(&["epsilon", "converged", "iterations", "max_ratio", "lipschitz_estimate", "periodic_residual"], &["1", "bool", "count", "1", "1", "1"]);
            for e in &sweep.entries {
                table.push(vec![e.epsilon, e.converged as u8 as f64, e.iterations as f64, e.max_ratio, e.lipschitz_estimate.unwrap_or(f64::NAN), e.periodic_residual.unwrap_or(f64::NAN)]);
            }
            em.write(&dir.join("picard.csv"), &table.to_csv())?;
            em.json(&dir.join("picard.json"), &sweep)?;
            Ok("picard")
        }
        Experiment::Boundary { periods, p, method } => {
            let solve_method = match method {
                Method::Series => SolveMethod::Series { n_used: 0 },
                Method::Direct => SolveMethod::Direct,
                Method::HarmonicBalance => SolveMethod::HarmonicBalance,
            };
            let mut table = Table::new(&["period", "residual", "input_norm", "ratio", "admissibility"], &["time", "X", "L2", "1", "1"]);
            for period in periods {
                let g = core_err!(PeriodicForcing::bump(*period, *p, &CVec::from_element(1, ONE)))?;
                let rep = core_err!(boundary_periodic_solve(model, &g, solve_method.clone(), &SolverOptions::default()))?;
                table.push(vec![*period, rep.report.residual_per_period[0], rep.input_norm, rep.ratio, rep.admissibility]);
            }
            em.write(&dir.join("boundary.csv"), &table.to_csv())?;
            Ok("boundary")
        }
        Experiment::Invariants { times, exponents } => {
            let x = CVec::from_iterator(model.dim(), (0..model.dim()).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
            let y = CVec::from_iterator(model.dim(), (0..model.dim()).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
            let mut semigroup: f64 = 0.0;
            for t in times {
                for s in times {
                    let lhs = core_err!(model.propagate(t + s, &x))?;
                    let rhs = core_err!(model.propagate(*t, &core_err!(model.propagate(*s, &x))?))?;
                    semigroup = semigroup.max(model.norm(&(lhs - rhs)) / model.norm(&x));
                }
            }
            let mut powers: f64 = 0.0;
            for a in exponents {
                for b in exponents {
                    let prod: CMat = core_err!(model.deflated_power(*a))? * core_err!(model.deflated_power(*b))?;
                    let direct = core_err!(model.deflated_power(a + b))?;
                    powers = powers.max((&prod - &direct).norm() / direct.norm().max(f64::MIN_POSITIVE));
                }
            }
            let p = model.kernel_projector();
            let projector = (&p * &p - &p).norm();
            let fx = core_err!(PeriodicForcing::bump(1.0, 2, &x))?;
            let fy = core_err!(PeriodicForcing::cosine(1.0, 1, &y))?;
            let h = core_err!(PeriodicForcing::linear_combination(vec![(re(2.0), fx.clone()), (re(-0.5), fy.clone())]))?;
            let (a, b) = (core_err!(duhamel_ft(model, &fx, &duhamel))?, core_err!(duhamel_ft(model, &fy, &duhamel))?);
            let lin = core_err!(duhamel_ft(model, &h, &duhamel))? - (&a * re(2.0) - &b * re(0.5));
            let linearity = model.norm(&lin) / (model.norm(&a) + model.norm(&b)).max(f64::MIN_POSITIVE);
            let value: Value = json!({ "semigroup": semigroup, "fractional_powers": powers, "projector_idempotence": projector, "duhamel_linearity": linearity });
            em.json(&dir.join("invariants.json"), &value)?;
            Ok("invariants")
        }
    }
}
