use serde::{Deserialize, Serialize};

use semiper::models::DampingProfile;

/// Top-level experiment file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: String,
    pub runs: Vec<RunSpec>,
}

fn default_output() -> String {
    "out".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub label: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    pub experiments: Vec<Experiment>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Scalar { a: f64 },
    DampedWaveInterval { n: usize, #[serde(default = "one")] length: f64, damping: DampingProfile },
    DampedWaveCircle { n: usize, #[serde(default = "one")] length: f64, damping: DampingProfile },
    HeatWave { n_heat: usize, n_wave: usize },
    Sphere { jmax: usize, m: usize, damping: DampingProfile, #[serde(default)] nodes: Option<usize> },
    BoundaryWave { n: usize, #[serde(default = "one")] length: f64, damping: DampingProfile, region: (f64, f64), eta: f64 },
    SyntheticResolvent { alpha: f64, modes: usize },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub period: f64,
    pub components: Vec<ForcingComponent>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingComponent {
    pub shape: Shape,
    pub profile: Profile,
    #[serde(default = "one")]
    pub scale: f64,
}

/// Time dependence of a forcing component.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Constant,
    Cosine { k: i64 },
    Sine { k: i64 },
    /// `sin^{2p}(πt/T)`.
    Bump { p: usize },
}

/// Spatial profile of a forcing component.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// Every coordinate equal to one.
    Ones,
    /// `sin(π(i + 1/2)/n)` on every coordinate.
    Smooth,
    /// Uniform entries in `[-1, 1]` from the run seed.
    Random,
    /// `offset + Σ a sin(fπx)` (or `cos`) on the nodes of one field of a wave layout.
    Trig {
        #[serde(default)]
        offset: f64,
        terms: Vec<TrigTerm>,
        #[serde(default)]
        slot: Slot,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub frequency: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub cosine: bool,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Displacement,
    #[default]
    Velocity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Grid {
    Uniform { start: f64, end: f64, points: usize },
    Geometric { start: f64, end: f64, points: usize },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    Direct,
    HarmonicBalance,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    PeriodicSolve {
        methods: Vec<Method>,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        n_max: Option<usize>,
        #[serde(default = "one_usize")]
        n_periods: usize,
    },
    KernelProjector {
        #[serde(default = "contour_nodes")]
        nodes: usize,
    },
    Convergence { starts: usize, n_periods: usize, window: (usize, usize) },
    Gain { k_max: usize },
    DecayEnvelope { alpha: f64, grid: Grid, #[serde(default)] window: Option<(f64, f64)> },
    InverseDecay { grid: Grid, #[serde(default)] window: Option<(f64, f64)>, #[serde(default)] band: Option<f64> },
    ResolventScan { grid: Grid, #[serde(default)] window: Option<(f64, f64)> },
    BtCrosscheck {
        eta_grid: Grid,
        #[serde(default)]
        eta_window: Option<(f64, f64)>,
        t_grid: Grid,
        #[serde(default)]
        t_window: Option<(f64, f64)>,
        #[serde(default)]
        band: Option<f64>,
        #[serde(default)]
        mlog: bool,
    },
    Interpolation { alpha: f64, grids: Vec<Grid> },
    Concentration { j_list: Vec<usize>, #[serde(default = "truncation")] extra_degrees: usize },
    ResonanceGrowth {
        j: usize,
        #[serde(default)]
        k: f64,
        n_max: usize,
        #[serde(default)]
        period: Option<f64>,
        #[serde(default)]
        detuned: bool,
    },
    Picard {
        coefficients: Vec<f64>,
        epsilons: Vec<f64>,
        #[serde(default)]
        nodes: Option<usize>,
        #[serde(default)]
        max_iter: Option<usize>,
    },
    Boundary { periods: Vec<f64>, #[serde(default = "one_usize")] p: usize, #[serde(default = "direct")] method: Method },
    Invariants { times: Vec<f64>, exponents: Vec<f64> },
}

fn one_usize() -> usize {
    1
}

fn contour_nodes() -> usize {
    256
}

fn truncation() -> usize {
    semiper::resonance::DEFAULT_TRUNCATION
}

fn direct() -> Method {
    Method::Direct
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            Grid::Uniform { start, end, points } => semiper::stability::uniform_grid(start, end, points),
            Grid::Geometric { start, end, points } => semiper::stability::geometric_grid(start, end, points),
        }
    }

    fn check(&self, what: &str) -> Result<(), String> {
        let (start, end, points, geometric) = match *self {
            Grid::Uniform { start, end, points } => (start, end, points, false),
            Grid::Geometric { start, end, points } => (start, end, points, true),
        };
        if points < 2 || !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(format!("{what}: grid needs at least two points and end > start"));
        }
        if geometric && start <= 0.0 {
            return Err(format!("{what}: geometric grid must start above zero"));
        }
        Ok(())
    }
}

fn positive(x: f64, what: &str) -> Result<(), String> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(format!("{what} must be positive, got {x}"))
    }
}

fn window(w: &Option<(f64, f64)>, what: &str) -> Result<(), String> {
    match w {
        Some((a, b)) if !(b > a) => Err(format!("{what}: window needs hi > lo")),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    /// Structural checks that serde cannot express.
    pub fn validate(&self) -> Result<(), String> {
        if self.runs.is_empty() {
            return Err("at least one run is required".into());
        }
        let mut labels = std::collections::BTreeSet::new();
        for run in &self.runs {
            if run.label.is_empty() || run.label.contains(['/', '\\']) || run.label.starts_with('.') {
                return Err(format!("run label {:?} is not a plain directory name", run.label));
            }
            if !labels.insert(run.label.as_str()) {
                return Err(format!("duplicate run label {:?}", run.label));
            }
            run.validate().map_err(|e| format!("run {}: {e}", run.label))?;
        }
        Ok(())
    }
}

impl RunSpec {
    fn validate(&self) -> Result<(), String> {
        if let Some(f) = &self.forcing {
            positive(f.period, "forcing period")?;
            if f.components.is_empty() {
                return Err("forcing needs at least one component".into());
            }
        }
        if self.experiments.is_empty() {
            return Err("no experiments".into());
        }
        let needs_forcing = |e: &Experiment| matches!(e, Experiment::PeriodicSolve { .. } | Experiment::Convergence { .. } | Experiment::Gain { .. } | Experiment::Picard { .. });
        for e in &self.experiments {
            if needs_forcing(e) && self.forcing.is_none() {
                return Err("experiment requires a forcing".into());
            }
            match e {
                Experiment::PeriodicSolve { methods, tol, n_max, n_periods } => {
                    if methods.is_empty() {
                        return Err("periodic_solve: no methods".into());
                    }
                    if let Some(t) = tol {
                        positive(*t, "tol")?;
                    }
                    if *n_max == Some(0) || *n_periods == 0 {
                        return Err("periodic_solve: n_max and n_periods must be positive".into());
                    }
                }
                Experiment::KernelProjector { nodes } if *nodes < 8 => return Err("kernel_projector: at least 8 nodes".into()),
                Experiment::Convergence { starts, n_periods, window: (lo, hi) } => {
                    if *starts == 0 || lo >= hi || hi > n_periods {
                        return Err("convergence: need starts > 0 and lo < hi <= n_periods".into());
                    }
                }
                Experiment::Gain { k_max } if *k_max == 0 => return Err("gain: k_max must be positive".into()),
                Experiment::DecayEnvelope { alpha, grid, window: w } => {
                    positive(*alpha, "alpha")?;
                    grid.check("decay_envelope")?;
                    window(w, "decay_envelope")?;
                }
                Experiment::InverseDecay { grid, window: w, band } => {
                    grid.check("inverse_decay")?;
                    window(w, "inverse_decay")?;
                    if let Some(b) = band {
                        positive(*b, "band")?;
                    }
                }
                Experiment::ResolventScan { grid, window: w } => {
                    grid.check("resolvent_scan")?;
                    window(w, "resolvent_scan")?;
                }
                Experiment::BtCrosscheck { eta_grid, eta_window, t_grid, t_window, band, .. } => {
                    eta_grid.check("bt_crosscheck eta")?;
                    t_grid.check("bt_crosscheck t")?;
                    window(eta_window, "bt_crosscheck eta")?;
                    window(t_window, "bt_crosscheck t")?;
                    if let Some(b) = band {
                        positive(*b, "band")?;
                    }
                }
                Experiment::Interpolation { alpha, grids } => {
                    positive(*alpha, "alpha")?;
                    if grids.is_empty() {
                        return Err("interpolation: no grids".into());
                    }
                    for g in grids {
                        g.check("interpolation")?;
                    }
                }
                Experiment::Concentration { j_list, .. } if j_list.len() < 2 => return Err("concentration: need at least two degrees".into()),
                Experiment::ResonanceGrowth { n_max, period, .. } => {
                    if *n_max == 0 {
                        return Err("resonance_growth: n_max must be positive".into());
                    }
                    if let Some(p) = period {
                        positive(*p, "period")?;
                    }
                }
                Experiment::Picard { epsilons, nodes, max_iter, .. } => {
                    if epsilons.is_empty() {
                        return Err("picard: no epsilons".into());
                    }
                    for e in epsilons {
                        positive(*e, "epsilon")?;
                    }
                    if *nodes == Some(0) || *max_iter == Some(0) {
                        return Err("picard: nodes and max_iter must be positive".into());
                    }
                }
                Experiment::Boundary { periods, p, .. } => {
                    if periods.is_empty() || *p == 0 {
                        return Err("boundary: need periods and p > 0".into());
                    }
                    for t in periods {
                        positive(*t, "period")?;
                    }
                }
                Experiment::Invariants { times, exponents } => {
                    if times.is_empty() || exponents.is_empty() {
                        return Err("invariants: need times and exponents".into());
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}
