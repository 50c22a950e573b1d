//! Correlated synthetic tables with known ground truth and controlled
//! missingness.
//!
//! Values are `offset + factors * loadings + noise_sd * noise`, with standard
//! normal factors, loadings, and noise drawn from separate seeded streams.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Table, VariableKind, VariableMeta};
use crate::error::{Error, Result};
use crate::{rng, stats};

/// Attempts at drawing a mask before giving up on a fully masked column.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    pub latent_rank: usize,
    pub noise_sd: f64,
    /// Added to every value so column means sit away from zero.
    #[serde(default = "default_offset")]
    pub offset: f64,
    /// Per-column kinds; empty means all continuous.
    #[serde(default)]
    pub kinds: Vec<VariableKind>,
    #[serde(default)]
    pub seed: u64,
}

fn default_offset() -> f64 {
    10.0
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Config("n and p must be positive".into()));
        }
        if self.latent_rank == 0 || self.latent_rank > self.p {
            return Err(Error::Config(format!(
                "latent_rank must be in 1..={}, got {}",
                self.p, self.latent_rank
            )));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) || !self.offset.is_finite() {
            return Err(Error::Config("noise_sd must be finite and >= 0".into()));
        }
        if !self.kinds.is_empty() && self.kinds.len() != self.p {
            return Err(Error::Config(format!("{} variable kinds for {} columns", self.kinds.len(), self.p)));
        }
        Ok(())
    }

    fn kind(&self, j: usize) -> VariableKind {
        self.kinds.get(j).copied().unwrap_or_default()
    }
}

/// Everything needed to check a generated table against its construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorManifest {
    pub rng: String,
    pub config: SynthConfig,
    /// `n x latent_rank`, row-major.
    pub factors: Vec<f64>,
    /// `latent_rank x p`, row-major.
    pub loadings: Vec<f64>,
}

/// Label of row `i` in generated tables.
pub fn participant_id(i: usize) -> String {
    format!("P{i:04}")
}

/// Name of column `j` in generated tables.
pub fn variable_name(j: usize) -> String {
    format!("x{:02}", j + 1)
}

fn normals(r: &mut rng::Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(r)).collect()
}

/// Generates a complete table.
pub fn generate(cfg: &SynthConfig) -> Result<(Table, GeneratorManifest)> {
    cfg.validate()?;
    let (n, p, r) = (cfg.n, cfg.p, cfg.latent_rank);
    let factors = normals(&mut rng::stream(cfg.seed, 0), n * r);
    let loadings = normals(&mut rng::stream(cfg.seed, 1), r * p);
    let noise = normals(&mut rng::stream(cfg.seed, 2), n * p);

    let mut values = vec![0.0; n * p];
    for i in 0..n {
        for j in 0..p {
            let signal: f64 = (0..r).map(|k| factors[i * r + k] * loadings[k * p + j]).sum();
            values[i * p + j] = cfg.offset + signal + cfg.noise_sd * noise[i * p + j];
        }
    }
    for j in 0..p {
        match cfg.kind(j) {
            VariableKind::Continuous => {}
            VariableKind::Integer => {
                for i in 0..n {
                    values[i * p + j] = values[i * p + j].round();
                }
            }
            VariableKind::Categorical => discretize_quartiles(&mut values, n, p, j),
        }
    }

    let data = DataMatrix::complete(n, p, values)?;
    let vars = (0..p)
        .map(|j| VariableMeta { name: variable_name(j), kind: cfg.kind(j), predictor_allowed: true })
        .collect();
    let table = Table::new((0..n).map(participant_id).collect(), vars, data)?;
    let manifest =
        GeneratorManifest { rng: rng::ALGORITHM.to_string(), config: cfg.clone(), factors, loadings };
    Ok((table, manifest))
}

/// Replaces column `j` by its quartile index 0..=3.
fn discretize_quartiles(values: &mut [f64], n: usize, p: usize, j: usize) {
    let mut col: Vec<f64> = (0..n).map(|i| values[i * p + j]).collect();
    col.sort_by(f64::total_cmp);
    let cuts = [0.25, 0.5, 0.75].map(|q| stats::quantile_sorted(&col, q));
    for i in 0..n {
        let v = values[i * p + j];
        values[i * p + j] = cuts.iter().filter(|&&c| v > c).count() as f64;
    }
}

/// Study-design availability: row groups by size, column groups by size,
/// and whether each (row group, column group) block was acquired at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockTemplate {
    pub row_groups: Vec<usize>,
    pub column_groups: Vec<usize>,
    /// `available[row_group][column_group]`.
    pub available: Vec<Vec<bool>>,
}

impl BlockTemplate {
    fn validate(&self, n: usize, p: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.row_groups.iter().sum::<usize>() != n {
            return bad(format!("row groups do not sum to {n}"));
        }
        if self.column_groups.iter().sum::<usize>() != p {
            return bad(format!("column groups do not sum to {p}"));
        }
        if self.available.len() != self.row_groups.len()
            || self.available.iter().any(|r| r.len() != self.column_groups.len())
        {
            return bad("availability grid does not match the groups".into());
        }
        Ok(())
    }

    fn expand(groups: &[usize]) -> Vec<usize> {
        groups.iter().enumerate().flat_map(|(g, &size)| std::iter::repeat_n(g, size)).collect()
    }

    /// Whether cell `(i, j)` lies in an acquired block, as an `n x p` grid.
    pub fn availability(&self) -> Vec<Vec<bool>> {
        let rows = Self::expand(&self.row_groups);
        let cols = Self::expand(&self.column_groups);
        rows.iter().map(|&g| cols.iter().map(|&h| self.available[g][h]).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum Mechanism {
    /// Each cell independently with probability `rate`.
    Mcar { rate: f64 },
    /// Non-driver cells with log-odds `a + slope * z_i`, where `z_i` is the
    /// standardized mean of the standardized driver columns and `a` is solved
    /// so the expected rate is `rate`. Drivers are never masked.
    Mar {
        rate: f64,
        drivers: Vec<usize>,
        #[serde(default = "default_slope")]
        slope: f64,
    },
    /// Unacquired blocks are removed, then MCAR at `rate` within acquired ones.
    Block { rate: f64, template: BlockTemplate },
}

fn default_slope() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessConfig {
    #[serde(flatten)]
    pub mechanism: Mechanism,
    #[serde(default)]
    pub seed: u64,
}

/// A value removed from the complete table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovedCell {
    pub row: usize,
    pub column: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Masked {
    pub data: DataMatrix,
    pub removed: Vec<RemovedCell>,
    /// Draws used, counting the accepted one.
    pub attempts: usize,
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("missing rate must be in [0, 1], got {rate}")))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intercept giving a mean masking probability of `rate` over scores `z`.
fn solve_intercept(z: &[f64], slope: f64, rate: f64) -> f64 {
    let mean_prob = |a: f64| z.iter().map(|&v| sigmoid(a + slope * v)).sum::<f64>() / z.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_prob(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standardized mean of standardized driver columns, per row.
fn driver_scores(data: &DataMatrix, drivers: &[usize]) -> Vec<f64> {
    let n = data.n();
    let z_cols: Vec<Vec<f64>> = drivers.iter().map(|&d| standardize(&data.observed_values(d))).collect();
    let avg: Vec<f64> =
        (0..n).map(|i| z_cols.iter().map(|c| c[i]).sum::<f64>() / z_cols.len() as f64).collect();
    standardize(&avg)
}

fn standardize(xs: &[f64]) -> Vec<f64> {
    let m = stats::mean(xs);
    let s = match stats::pop_std(xs) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    xs.iter().map(|x| (x - m) / s).collect()
}

/// Per-cell masking probabilities, row-major.
fn probabilities(data: &DataMatrix, mech: &Mechanism) -> Result<Vec<f64>> {
    let (n, p) = (data.n(), data.p());
    match mech {
        Mechanism::Mcar { rate } => {
            check_rate(*rate)?;
            Ok(vec![*rate; n * p])
        }
        Mechanism::Mar { rate, drivers, slope } => {
            check_rate(*rate)?;
            if drivers.is_empty() {
                return Err(Error::Config("MAR needs at least one driver column".into()));
            }
            if let Some(&d) = drivers.iter().find(|&&d| d >= p) {
                return Err(Error::Config(format!("driver column {d} out of range")));
            }
            if !slope.is_finite() {
                return Err(Error::Config("MAR slope must be finite".into()));
            }
            let z = driver_scores(data, drivers);
            let row_prob: Vec<f64> = if *rate == 0.0 || *rate == 1.0 {
                vec![*rate; n]
            } else {
                let a = solve_intercept(&z, *slope, *rate);
                z.iter().map(|&v| sigmoid(a + slope * v)).collect()
            };
            let mut probs = vec![0.0; n * p];
            for i in 0..n {
                for j in (0..p).filter(|j| !drivers.contains(j)) {
                    probs[i * p + j] = row_prob[i];
                }
            }
            Ok(probs)
        }
        Mechanism::Block { rate, template } => {
            check_rate(*rate)?;
            template.validate(n, p)?;
            Ok(template
                .availability()
                .into_iter()
                .flatten()
                .map(|avail| if avail { *rate } else { 1.0 })
                .collect())
        }
    }
}

/// Masks cells of a complete matrix and records what was removed. A draw
/// that leaves some column without observations is repeated with a fresh
/// stream, up to [`MAX_REDRAWS`] times.
pub fn apply_missingness(data: &DataMatrix, cfg: &MissingnessConfig) -> Result<Masked> {
    if data.missing_count() != 0 {
        return Err(Error::Contract("missingness applies to a complete matrix".into()));
    }
    let (n, p) = (data.n(), data.p());
    let probs = probabilities(data, &cfg.mechanism)?;
    for attempt in 0..MAX_REDRAWS {
        let mut r = rng::stream(cfg.seed, attempt as u64);
        let mask: Vec<bool> = probs
            .iter()
            .map(|&q| match q {
                q if q <= 0.0 => false,
                q if q >= 1.0 => true,
                q => r.random::<f64>() < q,
            })
            .collect();
        let full_column = (0..p).any(|j| (0..n).all(|i| mask[i * p + j]));
        if full_column {
            continue;
        }
        let removed = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(k, _)| RemovedCell { row: k / p, column: k % p, value: data.raw_values()[k] })
            .collect();
        let masked = DataMatrix::new(n, p, data.raw_values().to_vec(), mask)?;
        return Ok(Masked { data: masked, removed, attempts: attempt + 1 });
    }
    Err(Error::Simulation(format!("every one of {MAX_REDRAWS} draws left a column fully masked")))
}

/// Overlays removed values on a masked matrix.
pub fn restore(masked: &DataMatrix, removed: &[RemovedCell]) -> Result<DataMatrix> {
    let p = masked.p();
    let mut values = masked.raw_values().to_vec();
    let mut mask = masked.mask().to_vec();
    for c in removed {
        let k = c.row * p + c.column;
        values[k] = c.value;
        mask[k] = false;
    }
    DataMatrix::new(masked.n(), p, values, mask)
}
