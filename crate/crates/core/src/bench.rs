//! Benchmark harness: dataset generation, per-cell kernel timing, inverse
//! quality and conditioning measurements, and the fastest-method grid.
//!
//! A cell is one (s, k, method) triple. For each cell the harness fits the
//! moment matrix on the first N = S − k dataset rows, then times only the
//! rank-k correction kernel — dataset generation, fitting, and the 1/N
//! normalization are excluded, and one untimed warm-up execution runs
//! first. The warm-up output also provides the Frobenius residual
//! e = ‖I − M_updated·M̃⁻¹‖_F and drives adaptive rep reduction when a cell
//! is predicted to blow the per-rep time budget.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{basis_size, MonomialBasis};
use crate::eigen::symmetric_eigenvalues;
use crate::error::{Error, Result};
use crate::mat::{identity_residual, Mat};
use crate::moment::accumulate_gram;
use crate::update::{di_update, ism_update, wmi_update, FlopLedger, UpdateMethod};

/// How dataset rows are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DataMode {
    /// Rows are i.i.d. standard-normal vectors of width s, standing in for
    /// already-vectorized samples. Mean-zero entries give the fitted matrix
    /// the Marchenko-Pastur conditioning ((1+√(s/N))/(1−√(s/N)))² that the
    /// reference error/conditioning tables exhibit (≈ 84 at s = 1287,
    /// N = 1999); a nonzero mean would inflate it by three orders.
    RandomDesign,
    /// Rows are monomial vectors of points sampled uniformly on [−1,1]^d.
    Embedded,
}

/// Deterministic Box-Muller source over a seeded ChaCha stream.
struct NormalSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSource {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 − u keeps the log argument in (0, 1]
        let u1: f64 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * sin);
        r * cos
    }
}

/// A matrix size, given either directly or through basis parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeSpec {
    Width(usize),
    DimDeg { d: usize, n: usize },
}

impl SizeSpec {
    pub fn width(&self) -> Result<usize> {
        match *self {
            SizeSpec::Width(s) => {
                if s == 0 {
                    Err(Error::InvalidInput("size must be >= 1".to_string()))
                } else {
                    Ok(s)
                }
            }
            SizeSpec::DimDeg { d, n } => basis_size(d, n),
        }
    }
}

fn default_samples() -> usize {
    2000
}
fn default_sizes() -> Vec<SizeSpec> {
    vec![SizeSpec::DimDeg { d: 8, n: 5 }]
}
fn default_ks() -> Vec<usize> {
    vec![
        1, 2, 3, 4, 5, 10, 20, 30, 40, 50, 100, 200, 300, 400, 500, 750, 1000,
    ]
}
fn default_reps() -> usize {
    200
}
fn default_seed() -> u64 {
    42
}
fn default_data_mode() -> DataMode {
    DataMode::RandomDesign
}
fn default_methods() -> Vec<UpdateMethod> {
    vec![UpdateMethod::Di, UpdateMethod::Ism, UpdateMethod::Wmi]
}
fn default_lambda() -> f64 {
    0.0
}
fn default_time_budget() -> f64 {
    0.25
}
fn default_rep_reduction() -> usize {
    4
}

/// Experiment description. Deserializes from JSON with every field
/// optional; the defaults reproduce the reference protocol (S = 2000
/// samples, s = 1287 via d = 8, n = 5, the standard k ladder, ns = 200).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    #[serde(rename = "S", default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<SizeSpec>,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    /// Repetitions per cell.
    #[serde(rename = "ns", default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_data_mode")]
    pub data_mode: DataMode,
    #[serde(default = "default_methods")]
    pub methods: Vec<UpdateMethod>,
    /// Ridge added at fit time (normalized scale).
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Per-rep budget in seconds; a cell whose warm-up exceeds it runs
    /// reps / rep_reduction_factor repetitions instead.
    #[serde(default = "default_time_budget")]
    pub time_budget_per_rep_s: f64,
    #[serde(default = "default_rep_reduction")]
    pub rep_reduction_factor: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            sizes: default_sizes(),
            ks: default_ks(),
            reps: default_reps(),
            seed: default_seed(),
            data_mode: default_data_mode(),
            methods: default_methods(),
            lambda: default_lambda(),
            time_budget_per_rep_s: default_time_budget(),
            rep_reduction_factor: default_rep_reduction(),
        }
    }
}

impl BenchConfig {
    /// Fastest-method grid protocol: widths 10..1000 with the standard
    /// k ladder.
    pub fn grid_default() -> Self {
        Self {
            sizes: [10, 20, 50, 100, 250, 500, 750, 1000]
                .into_iter()
                .map(SizeSpec::Width)
                .collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() {
            return Err(Error::InvalidInput("empty k list".to_string()));
        }
        if self.sizes.is_empty() {
            return Err(Error::InvalidInput("empty size list".to_string()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("empty method list".to_string()));
        }
        if self.methods.contains(&UpdateMethod::Auto) {
            return Err(Error::InvalidInput(
                "benchmark methods must be concrete (DI, ISM, WMI)".to_string(),
            ));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("ns must be >= 1".to_string()));
        }
        if self.rep_reduction_factor == 0 {
            return Err(Error::InvalidInput(
                "rep_reduction_factor must be >= 1".to_string(),
            ));
        }
        if self.ks.iter().any(|&k| k == 0) {
            return Err(Error::InvalidInput("k values must be >= 1".to_string()));
        }
        if self.ks.iter().any(|&k| k >= self.samples) {
            return Err(Error::InvalidInput(
                "every k must be < S so that N = S - k >= 1".to_string(),
            ));
        }
        for size in &self.sizes {
            size.width()?;
        }
        Ok(())
    }

    /// Cells that run with N = S − k ≤ s and no ridge. They are attempted
    /// anyway (failures land in the record), but deserve a heads-up.
    pub fn soft_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda != 0.0 {
            return out;
        }
        for size in &self.sizes {
            if let Ok(s) = size.width() {
                for &k in &self.ks {
                    if self.samples.saturating_sub(k) <= s {
                        out.push(format!(
                            "cell s={s}, k={k}: N = {} <= s; the fit is singular in exact arithmetic",
                            self.samples - k
                        ));
                    }
                }
            }
        }
        out
    }
}

/// One measured cell.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRecord {
    pub s: usize,
    pub k: usize,
    pub method: UpdateMethod,
    /// Repetitions actually timed (after adaptive reduction).
    pub reps: usize,
    pub mean_time_s: f64,
    pub median_time_s: f64,
    /// e = ‖I − M_updated·M̃⁻¹‖_F.
    pub error_frobenius: f64,
    /// Condition number of the fitted normalized moment matrix.
    pub cond: f64,
    /// Populated when the cell could not be measured; numeric fields are
    /// NaN in that case.
    pub failure: Option<String>,
}

impl BenchRecord {
    fn failed(s: usize, k: usize, method: UpdateMethod, cond: f64, message: String) -> Self {
        Self {
            s,
            k,
            method,
            reps: 0,
            mean_time_s: f64::NAN,
            median_time_s: f64::NAN,
            error_frobenius: f64::NAN,
            cond,
            failure: Some(message),
        }
    }
}

/// Generate the S×s dataset for one size. Deterministic per seed.
pub fn gen_dataset(samples: usize, size: &SizeSpec, seed: u64, mode: DataMode) -> Result<Mat> {
    match mode {
        DataMode::RandomDesign => {
            let s = size.width()?;
            let mut source = NormalSource::new(seed);
            let data = (0..samples * s).map(|_| source.next()).collect();
            Mat::from_vec(samples, s, data)
        }
        DataMode::Embedded => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (d, n) = match *size {
                SizeSpec::DimDeg { d, n } => (d, n),
                SizeSpec::Width(_) => {
                    return Err(Error::InvalidInput(
                        "embedded mode needs (d, n) sizes, not raw widths".to_string(),
                    ))
                }
            };
            let basis = MonomialBasis::new(d, n)?;
            let s = basis.size();
            let mut design = Mat::zeros(samples, s);
            for i in 0..samples {
                let point: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
                let v = basis.vectorize(&point)?;
                design.row_mut(i).copy_from_slice(&v);
            }
            Ok(design)
        }
    }
}

/// λ_max / λ_min of an SPD matrix, by full symmetric eigendecomposition.
/// Magnitudes are used so that matrices that have gone numerically
/// indefinite still report their (enormous) conditioning.
pub fn condition_number(m: &Mat) -> Result<f64> {
    let eig = symmetric_eigenvalues(m)?;
    if eig.is_empty() {
        return Err(Error::ConditioningFailure("empty matrix".to_string()));
    }
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for v in eig {
        let a = v.abs();
        min = min.min(a);
        max = max.max(a);
    }
    if min == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

/// Permissive inversion for the harness fit: Gauss-Jordan with partial
/// pivoting, matching the general-purpose inverse the reference protocol
/// uses. On a numerically singular fit it produces a huge-but-finite
/// inverse (and the cell records a correspondingly huge error) instead of
/// refusing to run; only an exactly zero pivot fails. The timed kernels and
/// the library fit keep the strict Cholesky path.
fn lu_invert(a: &Mat) -> Result<Mat> {
    let n = a.rows();
    let mut work = a.clone();
    let mut inv = Mat::identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                work[(i, col)]
                    .abs()
                    .partial_cmp(&work[(j, col)].abs())
                    .unwrap()
            })
            .unwrap();
        if work[(pivot_row, col)] == 0.0 {
            return Err(Error::ConditioningFailure(format!(
                "fit matrix is exactly singular at pivot {col}"
            )));
        }
        if pivot_row != col {
            for j in 0..n {
                let t = work[(col, j)];
                work[(col, j)] = work[(pivot_row, j)];
                work[(pivot_row, j)] = t;
                let t = inv[(col, j)];
                inv[(col, j)] = inv[(pivot_row, j)];
                inv[(pivot_row, j)] = t;
            }
        }
        let p = work[(col, col)];
        for j in 0..n {
            work[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = work[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                work[(i, j)] -= f * work[(col, j)];
                inv[(i, j)] -= f * inv[(col, j)];
            }
        }
    }
    Ok(inv)
}

/// Everything one (s, k) cell needs, shared by its method runs.
struct CellInputs {
    s: usize,
    k: usize,
    /// N·M, the denormalized fitted matrix (DI input).
    m_raw: Mat,
    /// M⁻¹/N, the denormalized fitted inverse (ISM/WMI input); None when
    /// the fit inversion failed.
    raw_inv: Option<Mat>,
    fit_failure: Option<String>,
    /// The last k dataset rows.
    batch: Mat,
    /// Reference updated matrix for the error residual.
    m_updated: Mat,
    cond: f64,
}

fn build_cell(dataset: &Mat, gram_prefix: &Mat, gram_total: &Mat, k: usize, lambda: f64) -> CellInputs {
    let s = dataset.cols();
    let samples = dataset.rows();
    let n = samples - k;
    let nf = n as f64;

    let mut m_raw = gram_prefix.clone();
    if lambda != 0.0 {
        m_raw.add_diagonal(lambda * nf);
    }
    let normalized = m_raw.scaled(1.0 / nf);

    let cond = condition_number(&normalized).unwrap_or(f64::NAN);

    let (raw_inv, fit_failure) = match lu_invert(&normalized) {
        Ok(inv) => (Some(inv.scaled(1.0 / nf)), None),
        Err(e) => (None, Some(format!("fit inversion failed: {e}"))),
    };

    let mut batch = Mat::zeros(k, s);
    for (i, row) in (n..samples).enumerate() {
        batch.row_mut(i).copy_from_slice(dataset.row(row));
    }

    let mut m_updated = gram_total.clone();
    if lambda != 0.0 {
        m_updated.add_diagonal(lambda * nf);
    }

    CellInputs {
        s,
        k,
        m_raw,
        raw_inv,
        fit_failure,
        batch,
        m_updated,
        cond,
    }
}

fn measure_method(cell: &CellInputs, method: UpdateMethod, config: &BenchConfig) -> BenchRecord {
    let run = |ledger: &mut FlopLedger| -> Result<Mat> {
        match method {
            UpdateMethod::Di => di_update(&cell.m_raw, &cell.batch, ledger),
            UpdateMethod::Ism => {
                let inv = cell.raw_inv.as_ref().expect("checked before running");
                ism_update(inv, &cell.batch, ledger)
            }
            UpdateMethod::Wmi => {
                let inv = cell.raw_inv.as_ref().expect("checked before running");
                wmi_update(inv, &cell.batch, ledger)
            }
            UpdateMethod::Auto => unreachable!("benchmark methods are concrete"),
        }
    };

    if method != UpdateMethod::Di && cell.raw_inv.is_none() {
        let msg = cell
            .fit_failure
            .clone()
            .unwrap_or_else(|| "fit inversion unavailable".to_string());
        return BenchRecord::failed(cell.s, cell.k, method, cell.cond, msg);
    }

    // Warm-up: untimed for reporting purposes, but measured to predict the
    // cell cost; its output also provides the error residual.
    let warm_start = Instant::now();
    let warm = match run(&mut FlopLedger::new()) {
        Ok(out) => out,
        Err(e) => {
            return BenchRecord::failed(cell.s, cell.k, method, cell.cond, e.to_string());
        }
    };
    let warm_time = warm_start.elapsed().as_secs_f64();
    let error = identity_residual(&cell.m_updated, &warm);
    drop(warm);

    let reps = if warm_time > config.time_budget_per_rep_s {
        (config.reps / config.rep_reduction_factor).max(1)
    } else {
        config.reps
    };

    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let out = run(&mut FlopLedger::new());
        let elapsed = start.elapsed().as_secs_f64();
        match out {
            Ok(_) => times.push(elapsed),
            Err(e) => {
                return BenchRecord::failed(cell.s, cell.k, method, cell.cond, e.to_string());
            }
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if times.len() % 2 == 1 {
        times[times.len() / 2]
    } else {
        0.5 * (times[times.len() / 2 - 1] + times[times.len() / 2])
    };
    let mean = times.iter().sum::<f64>() / times.len() as f64;

    BenchRecord {
        s: cell.s,
        k: cell.k,
        method,
        reps,
        mean_time_s: mean,
        median_time_s: median,
        error_frobenius: error,
        cond: cell.cond,
        failure: None,
    }
}

/// Run one cell in isolation. Equivalent (bit-for-bit on everything except
/// times) to the corresponding cell of [`run_suite`].
pub fn run_cell(
    config: &BenchConfig,
    size: &SizeSpec,
    k: usize,
    method: UpdateMethod,
) -> Result<BenchRecord> {
    if k == 0 || k >= config.samples {
        return Err(Error::InvalidInput(format!(
            "k must satisfy 1 <= k < S (got k={k}, S={})",
            config.samples
        )));
    }
    let dataset = gen_dataset(config.samples, size, config.seed, config.data_mode)?;
    let n = config.samples - k;
    let mut gram_prefix = Mat::zeros(dataset.cols(), dataset.cols());
    accumulate_gram(&mut gram_prefix, &dataset, 0..n);
    let mut gram_total = gram_prefix.clone();
    accumulate_gram(&mut gram_total, &dataset, n..config.samples);
    let cell = build_cell(&dataset, &gram_prefix, &gram_total, k, config.lambda);
    Ok(measure_method(&cell, method, config))
}

fn run_size(config: &BenchConfig, size: &SizeSpec) -> Result<Vec<BenchRecord>> {
    let dataset = gen_dataset(config.samples, size, config.seed, config.data_mode)?;
    let s = dataset.cols();
    let samples = dataset.rows();

    // Largest k first = smallest prefix first; the Gram matrix then grows
    // row by row, bitwise identical to a from-scratch accumulation.
    let mut ks_desc: Vec<usize> = config.ks.clone();
    ks_desc.sort_unstable_by(|a, b| b.cmp(a));
    ks_desc.dedup();

    let mut gram = Mat::zeros(s, s);
    let mut covered = 0usize;
    let mut gram_total = Mat::zeros(s, s);
    accumulate_gram(&mut gram_total, &dataset, 0..samples);

    let mut by_cell: std::collections::HashMap<(usize, UpdateMethod), BenchRecord> =
        std::collections::HashMap::new();
    for &k in &ks_desc {
        let n = samples - k;
        accumulate_gram(&mut gram, &dataset, covered..n);
        covered = n;
        let cell = build_cell(&dataset, &gram, &gram_total, k, config.lambda);
        for &method in &config.methods {
            let record = measure_method(&cell, method, config);
            by_cell.insert((k, method), record);
        }
    }

    // Emit in the order the config asked for.
    let mut out = Vec::with_capacity(config.ks.len() * config.methods.len());
    let mut seen = std::collections::HashSet::new();
    for &k in &config.ks {
        if !seen.insert(k) {
            continue;
        }
        for &method in &config.methods {
            if let Some(r) = by_cell.remove(&(k, method)) {
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Run the full suite. With `parallel` set, sizes are distributed across
/// threads; each timed kernel execution stays single-threaded either way,
/// and serial execution is the mode to use when timings matter.
pub fn run_suite(config: &BenchConfig, parallel: bool) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    if !parallel || config.sizes.len() == 1 {
        let mut records = Vec::new();
        for size in &config.sizes {
            records.extend(run_size(config, size)?);
        }
        return Ok(records);
    }

    let results: Vec<Result<Vec<BenchRecord>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .sizes
            .iter()
            .map(|size| scope.spawn(move || run_size(config, size)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("benchmark worker panicked"))
            .collect()
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    Ok(records)
}

/// Winner map of a grid run.
#[derive(Clone, Debug, Serialize)]
pub struct GridOutcome {
    pub records: Vec<BenchRecord>,
    /// Per (s, k): the method with the smallest median time.
    pub winners: Vec<(usize, usize, UpdateMethod)>,
}

impl GridOutcome {
    /// Reduce measured records to the fastest method per (s, k) pair.
    /// Cells whose every method failed get no winner.
    pub fn from_records(records: Vec<BenchRecord>) -> Self {
        let mut keys = Vec::new();
        for r in &records {
            let key = (r.s, r.k);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut winners = Vec::new();
        for (s, k) in keys {
            let best = records
                .iter()
                .filter(|r| r.s == s && r.k == k && r.failure.is_none())
                .min_by(|a, b| a.median_time_s.partial_cmp(&b.median_time_s).unwrap());
            if let Some(r) = best {
                winners.push((s, k, r.method));
            }
        }
        Self { records, winners }
    }
}

/// Run the suite and reduce it to the fastest method per (s, k) pair.
pub fn fastest_grid(config: &BenchConfig, parallel: bool) -> Result<GridOutcome> {
    Ok(GridOutcome::from_records(run_suite(config, parallel)?))
}

/// CSV header used by [`write_csv`].
pub const CSV_HEADER: &str = "s,k,method,reps,mean_time_s,median_time_s,error_frobenius,cond";

/// Write records as CSV, doubles with 9 significant digits.
pub fn write_csv<W: Write>(records: &[BenchRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{:.8e},{:.8e},{:.8e},{:.8e}",
            r.s, r.k, r.method, r.reps, r.mean_time_s, r.median_time_s, r.error_frobenius, r.cond
        )?;
    }
    Ok(())
}

/// Render the winner grid as a standalone SVG heatmap (categorical axes,
/// one colored cell per (s, k) pair).
pub fn write_svg_heatmap<W: Write>(outcome: &GridOutcome, mut w: W) -> std::io::Result<()> {
    let mut sizes: Vec<usize> = outcome.winners.iter().map(|&(s, _, _)| s).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut ks: Vec<usize> = outcome.winners.iter().map(|&(_, k, _)| k).collect();
    ks.sort_unstable();
    ks.dedup();

    const CELL: usize = 34;
    const MARGIN_LEFT: usize = 70;
    const MARGIN_BOTTOM: usize = 50;
    const MARGIN_TOP: usize = 40;
    let width = MARGIN_LEFT + CELL * sizes.len() + 20;
    let height = MARGIN_TOP + CELL * ks.len() + MARGIN_BOTTOM;

    let color = |m: UpdateMethod| match m {
        UpdateMethod::Ism => "#2ca02c",
        UpdateMethod::Wmi => "#1f77b4",
        UpdateMethod::Di => "#d62728",
        UpdateMethod::Auto => "#999999",
    };

    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    )?;
    writeln!(
        w,
        "  <text x=\"{MARGIN_LEFT}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">fastest method per (s, k) — \
         <tspan fill=\"#2ca02c\">ISM</tspan> / <tspan fill=\"#1f77b4\">WMI</tspan> / <tspan fill=\"#d62728\">DI</tspan></text>"
    )?;
    for (si, s) in sizes.iter().enumerate() {
        for (ki, k) in ks.iter().enumerate() {
            if let Some(&(_, _, m)) = outcome
                .winners
                .iter()
                .find(|&&(ws, wk, _)| ws == *s && wk == *k)
            {
                // k grows upward
                let x = MARGIN_LEFT + si * CELL;
                let y = MARGIN_TOP + (ks.len() - 1 - ki) * CELL;
                writeln!(
                    w,
                    "  <rect x=\"{x}\" y=\"{y}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"white\"/>",
                    CELL - 2,
                    CELL - 2,
                    color(m)
                )?;
            }
        }
    }
    for (si, s) in sizes.iter().enumerate() {
        let x = MARGIN_LEFT + si * CELL + CELL / 2;
        let y = MARGIN_TOP + ks.len() * CELL + 16;
        writeln!(
            w,
            "  <text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{s}</text>"
        )?;
    }
    for (ki, k) in ks.iter().enumerate() {
        let x = MARGIN_LEFT - 8;
        let y = MARGIN_TOP + (ks.len() - 1 - ki) * CELL + CELL / 2 + 4;
        writeln!(
            w,
            "  <text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{k}</text>"
        )?;
    }
    writeln!(
        w,
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">s</text>",
        MARGIN_LEFT + sizes.len() * CELL / 2,
        height - 10
    )?;
    writeln!(
        w,
        "  <text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">k</text>",
        MARGIN_TOP + ks.len() * CELL / 2
    )?;
    writeln!(w, "</svg>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Mat;

    fn tiny_config() -> BenchConfig {
        BenchConfig {
            samples: 60,
            sizes: vec![SizeSpec::Width(8)],
            ks: vec![1, 2, 5],
            reps: 3,
            seed: 7,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn dataset_is_deterministic_per_seed() {
        let spec = SizeSpec::Width(6);
        let a = gen_dataset(10, &spec, 99, DataMode::RandomDesign).unwrap();
        let b = gen_dataset(10, &spec, 99, DataMode::RandomDesign).unwrap();
        assert_eq!(a, b);
        let c = gen_dataset(10, &spec, 100, DataMode::RandomDesign).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_design_entries_are_standard_normal() {
        let m = gen_dataset(500, &SizeSpec::Width(20), 1, DataMode::RandomDesign).unwrap();
        let vals = m.as_slice();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
        assert!(vals.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn embedded_rows_start_with_one() {
        let spec = SizeSpec::DimDeg { d: 2, n: 2 };
        let m = gen_dataset(12, &spec, 3, DataMode::Embedded).unwrap();
        assert_eq!(m.cols(), 6);
        for i in 0..m.rows() {
            assert_eq!(m.row(i)[0], 1.0);
        }
    }

    #[test]
    fn embedded_needs_dim_deg() {
        let err = gen_dataset(12, &SizeSpec::Width(6), 3, DataMode::Embedded).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn identity_input_keeps_errors_at_machine_level() {
        use crate::update::{di_update, ism_update, spd_invert, wmi_update};
        let s = 20;
        let m = Mat::identity(s);
        let m_inv = spd_invert(&m, &mut FlopLedger::new()).unwrap();
        let x = gen_dataset(3, &SizeSpec::Width(s), 11, DataMode::RandomDesign).unwrap();
        let mut m_updated = m.clone();
        accumulate_gram(&mut m_updated, &x, 0..3);
        for out in [
            di_update(&m, &x, &mut FlopLedger::new()).unwrap(),
            ism_update(&m_inv, &x, &mut FlopLedger::new()).unwrap(),
            wmi_update(&m_inv, &x, &mut FlopLedger::new()).unwrap(),
        ] {
            let e = identity_residual(&m_updated, &out);
            assert!(e <= 1e-12, "error {e}");
        }
    }

    #[test]
    fn condition_number_basics() {
        assert!((condition_number(&Mat::identity(5)).unwrap() - 1.0).abs() < 1e-12);
        let mut d = Mat::zeros(2, 2);
        d[(0, 0)] = 1.0;
        d[(1, 1)] = 100.0;
        assert!((condition_number(&d).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn suite_produces_clean_records_on_easy_cells() {
        let config = tiny_config();
        let records = run_suite(&config, false).unwrap();
        assert_eq!(records.len(), 3 * 3);
        for r in &records {
            assert!(r.failure.is_none(), "{:?}", r.failure);
            assert!(r.median_time_s > 0.0);
            assert!(r.mean_time_s > 0.0);
            assert!(r.error_frobenius < 1e-10, "error {}", r.error_frobenius);
            assert!(r.cond >= 1.0);
            assert_eq!(r.reps, 3);
        }
    }

    #[test]
    fn run_cell_matches_suite_measurements() {
        let config = tiny_config();
        let records = run_suite(&config, false).unwrap();
        let lone = run_cell(&config, &config.sizes[0], 2, UpdateMethod::Wmi).unwrap();
        let from_suite = records
            .iter()
            .find(|r| r.k == 2 && r.method == UpdateMethod::Wmi)
            .unwrap();
        assert_eq!(lone.error_frobenius.to_bits(), from_suite.error_frobenius.to_bits());
        assert_eq!(lone.cond.to_bits(), from_suite.cond.to_bits());
    }

    #[test]
    fn deficient_cells_are_recorded_not_dropped() {
        // N = S − k ≤ s: singular in exact arithmetic. Whatever the
        // numerical outcome, every cell must produce a record.
        let config = BenchConfig {
            samples: 12,
            sizes: vec![SizeSpec::Width(10)],
            ks: vec![4],
            reps: 1,
            seed: 5,
            ..BenchConfig::default()
        };
        assert_eq!(config.soft_warnings().len(), 1);
        let records = run_suite(&config, false).unwrap();
        assert_eq!(records.len(), 3);
        for r in &records {
            assert!(r.failure.is_some() || r.error_frobenius.is_finite());
        }
    }

    #[test]
    fn empty_k_list_is_rejected() {
        let config = BenchConfig {
            ks: vec![],
            ..tiny_config()
        };
        assert!(matches!(
            run_suite(&config, false),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn single_method_config_wins_everywhere() {
        let config = BenchConfig {
            methods: vec![UpdateMethod::Wmi],
            ..tiny_config()
        };
        let outcome = fastest_grid(&config, false).unwrap();
        assert_eq!(outcome.winners.len(), 3);
        assert!(outcome
            .winners
            .iter()
            .all(|&(_, _, m)| m == UpdateMethod::Wmi));
    }

    #[test]
    fn csv_has_exact_header_and_parses() {
        let config = tiny_config();
        let records = run_suite(&config, false).unwrap();
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let mut rows = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 8);
            fields[4].parse::<f64>().unwrap();
            fields[7].parse::<f64>().unwrap();
            rows += 1;
        }
        assert_eq!(rows, records.len());
    }

    #[test]
    fn svg_heatmap_is_well_formed() {
        let outcome = GridOutcome {
            records: vec![],
            winners: vec![
                (10, 1, UpdateMethod::Ism),
                (10, 2, UpdateMethod::Di),
                (20, 1, UpdateMethod::Ism),
                (20, 2, UpdateMethod::Wmi),
            ],
        };
        let mut buf = Vec::new();
        write_svg_heatmap(&outcome, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.trim_end().ends_with("</svg>"));
        assert_eq!(text.matches("<rect").count(), 4);
    }

    #[test]
    fn config_json_roundtrip_with_partial_fields() {
        let json = r#"{"S": 100, "sizes": [16, {"d": 2, "n": 3}], "ks": [1, 4]}"#;
        let config: BenchConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.samples, 100);
        assert_eq!(config.sizes.len(), 2);
        assert_eq!(config.sizes[0].width().unwrap(), 16);
        assert_eq!(config.sizes[1].width().unwrap(), 10);
        assert_eq!(config.reps, 200);
        assert_eq!(config.methods.len(), 3);
    }
}
