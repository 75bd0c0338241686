//! Example streams: CSV files described by a sidecar schema, and synthetic
//! generators.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use fwboost::geometry::DecisionSet;
use fwboost::losses::{sphere_sample, ConvexLoss};
use fwboost::{seeded_rng, Point};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::config::{Coupling, DataSource, DatasetSpec, Normalization, SyntheticKind, SyntheticParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Point,
    pub label: Point,
}

/// How a label turns into a loss on predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossFamily {
    /// `‖y − label‖²`.
    Squared,
    /// `label · y`.
    Linear,
}

/// A prepared stream: normalized features, shifted labels and the label set
/// in the shifted coordinates.
#[derive(Debug, Clone)]
pub struct Stream {
    pub examples: Vec<Example>,
    pub family: LossFamily,
    pub label_set: DecisionSet,
    /// Added to a shifted label to recover original units.
    pub label_shift: Point,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.examples[0].features.len()
    }

    pub fn label_dim(&self) -> usize {
        self.label_set.dim()
    }

    /// The loss of example `t` on predictions in `set`.
    pub fn loss(&self, t: usize, set: &DecisionSet) -> fwboost::Result<ConvexLoss> {
        let label = self.examples[t].label.clone();
        match self.family {
            LossFamily::Squared => ConvexLoss::squared_distance(label, set),
            LossFamily::Linear => ConvexLoss::linear(label, set),
        }
    }

    pub fn truncate(&mut self, horizon: usize) -> Result<()> {
        ensure!(
            horizon <= self.len(),
            "horizon {horizon} exceeds the {} available examples",
            self.len()
        );
        self.examples.truncate(horizon);
        Ok(())
    }
}

/// Sidecar description of a CSV file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    /// Every column, in file order.
    pub columns: Vec<String>,
    /// Name of the label column.
    pub label: String,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default = "comma")]
    pub delimiter: char,
    /// Columns expanded to one-hot indicators.
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Category order per categorical column; discovered (sorted) if absent.
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<String>>,
    /// Columns dropped entirely.
    #[serde(default)]
    pub ignore: Vec<String>,
    /// Maps textual labels to numbers.
    #[serde(default)]
    pub label_map: BTreeMap<String, f64>,
    /// Where `fetch-data` downloads the file from.
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub file: Option<String>,
    #[serde(default)]
    pub expected_rows: Option<usize>,
}

fn comma() -> char {
    ','
}

impl CsvSchema {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading schema {}", path.display()))?;
        let schema: Self =
            toml::from_str(&text).with_context(|| format!("parsing schema {}", path.display()))?;
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let known: BTreeSet<&str> = self.columns.iter().map(String::as_str).collect();
        ensure!(known.len() == self.columns.len(), "schema lists a column twice");
        for name in std::iter::once(&self.label).chain(&self.categorical).chain(&self.ignore) {
            ensure!(known.contains(name.as_str()), "schema names unknown column {name:?}");
        }
        Ok(())
    }
}

/// Raw feature rows and scalar labels from a CSV file.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(u8::try_from(schema.delimiter).context("delimiter must be ASCII")?)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != schema.columns.len() {
            bail!(
                "{}:{line}: schema mismatch, expected {} fields but found {}",
                path.display(),
                schema.columns.len(),
                record.len()
            );
        }
        records.push((line, record));
    }
    ensure!(!records.is_empty(), "{}: no examples", path.display());

    let index = |name: &str| schema.columns.iter().position(|c| c == name).unwrap();
    let mut categories: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for name in &schema.categorical {
        let col = index(name);
        let levels = match schema.categories.get(name) {
            Some(levels) => levels.clone(),
            None => records
                .iter()
                .map(|(_, r)| r[col].to_owned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        categories.insert(col, levels);
    }
    let label_col = index(&schema.label);
    let ignored: BTreeSet<usize> = schema.ignore.iter().map(|n| index(n)).collect();

    let mut rows = Vec::with_capacity(records.len());
    for (line, record) in &records {
        let mut features = Vec::new();
        for (col, field) in record.iter().enumerate() {
            if col == label_col || ignored.contains(&col) {
                continue;
            }
            if let Some(levels) = categories.get(&col) {
                let hit = levels.iter().position(|l| l == field).ok_or_else(|| {
                    anyhow!(
                        "{}:{line}: unknown category {field:?} in column {:?}",
                        path.display(),
                        schema.columns[col]
                    )
                })?;
                features.extend((0..levels.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
            } else {
                features.push(parse_number(field).ok_or_else(|| {
                    anyhow!(
                        "{}:{line}: malformed value {field:?} in column {:?}",
                        path.display(),
                        schema.columns[col]
                    )
                })?);
            }
        }
        let raw = &record[label_col];
        let label = if schema.label_map.is_empty() {
            parse_number(raw)
        } else {
            schema.label_map.get(raw).copied()
        }
        .ok_or_else(|| anyhow!("{}:{line}: malformed label {raw:?}", path.display()))?;
        rows.push((features, label));
    }
    if let Some(n) = schema.expected_rows {
        if n != rows.len() {
            log::warn!("{}: expected {n} rows, read {}", path.display(), rows.len());
        }
    }
    Ok(rows)
}

fn parse_number(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Fits the normalization on the first half of `rows` and applies it to all.
/// Min-max output is clamped to `[0, 1]`; constant columns map to 0.
pub fn normalize(rows: &mut [Vec<f64>], method: Normalization) {
    if rows.is_empty() || method == Normalization::None {
        return;
    }
    let fit_len = (rows.len() / 2).max(1);
    let dim = rows[0].len();
    for j in 0..dim {
        let fit = rows[..fit_len].iter().map(|r| r[j]);
        let map: Box<dyn Fn(f64) -> f64> = match method {
            Normalization::Minmax => {
                let (lo, hi) = fit.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
                let width = hi - lo;
                Box::new(move |v| if width > 0.0 { ((v - lo) / width).clamp(0.0, 1.0) } else { 0.0 })
            }
            Normalization::Zscore => {
                let n = fit_len as f64;
                let mean = fit.sum::<f64>() / n;
                let var = rows[..fit_len].iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                Box::new(move |v| if sd > 0.0 { (v - mean) / sd } else { 0.0 })
            }
            Normalization::None => unreachable!(),
        };
        for r in rows.iter_mut() {
            r[j] = map(r[j]);
        }
    }
}

/// Builds the stream for `spec`. `stream_seed` drives synthetic generators.
pub fn load_stream(spec: &DatasetSpec, horizon: Option<usize>, stream_seed: u64) -> Result<Stream> {
    let [lo, hi] = spec.label_range;
    let mut stream = match &spec.source {
        DataSource::Csv { path, schema } => {
            let schema = CsvSchema::load(schema)?;
            let rows = ingest_csv(path, &schema)?;
            let (mut features, labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            normalize(&mut features, spec.normalization);
            let examples = features
                .into_iter()
                .zip(labels)
                .map(|(f, l)| Example {
                    features: with_bias(f, spec.bias),
                    label: Point::from_element(1, l),
                })
                .collect();
            finish(examples, LossFamily::Squared, 1, spec)?
        }
        DataSource::Synthetic {
            kind,
            params,
            stream_seed: fixed,
        } => {
            let t = horizon.ok_or_else(|| anyhow!("synthetic streams need a horizon"))?;
            let seed = fixed.unwrap_or(stream_seed);
            let (examples, family) = synthetic_examples(*kind, params, spec, t, seed)?;
            let dim = examples[0].label.len();
            finish(examples, family, dim, spec)?
        }
    };
    if let Some(t) = horizon {
        stream.truncate(t)?;
    }
    ensure!(lo < hi, "empty label range");
    Ok(stream)
}

fn with_bias(mut f: Vec<f64>, bias: bool) -> Point {
    if bias {
        f.insert(0, 1.0);
    }
    Point::from_vec(f)
}

fn finish(
    mut examples: Vec<Example>,
    family: LossFamily,
    label_dim: usize,
    spec: &DatasetSpec,
) -> Result<Stream> {
    ensure!(!examples.is_empty(), "no examples");
    let [lo, hi] = spec.label_range;
    for (t, e) in examples.iter().enumerate() {
        ensure!(e.features.iter().all(|v| v.is_finite()), "example {t} has non-finite features");
        ensure!(
            e.label.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9),
            "example {t} has label {:?} outside [{lo}, {hi}]",
            e.label.as_slice()
        );
    }
    let shift = if spec.center_labels && family == LossFamily::Squared {
        Point::from_element(label_dim, 0.5 * (lo + hi))
    } else {
        Point::zeros(label_dim)
    };
    for e in &mut examples {
        e.label -= &shift;
    }
    let label_set = DecisionSet::hyperbox(
        Point::from_element(label_dim, 0.5 * (lo + hi)) - &shift,
        Point::from_element(label_dim, 0.5 * (hi - lo)),
    )?;
    Ok(Stream {
        examples,
        family,
        label_set,
        label_shift: shift,
    })
}

/// Generating maps of the realizable mixture for `seed`. With `bias`, the
/// first column multiplies the constant feature.
pub fn mixture_maps(params: &SyntheticParams, input_dim: usize, bias: bool, seed: u64) -> [DMatrix<f64>; 2] {
    let mut rng = seeded_rng(seed, 0x6d617073);
    let mut draw = || {
        DMatrix::from_fn(params.label_dim, input_dim, |_, _| {
            params.scale * rng.sample::<f64, _>(StandardNormal)
        })
    };
    let first = draw();
    let second = match params.coupling {
        Coupling::Independent => draw(),
        Coupling::Mirrored => {
            // Opposite slopes with independent offsets: a tent (or valley)
            // along the first map's direction.
            let mut m = -&first;
            if bias {
                m.set_column(0, &draw().column(0));
            }
            m
        }
    };
    [first, second]
}

fn synthetic_examples(
    kind: SyntheticKind,
    params: &SyntheticParams,
    spec: &DatasetSpec,
    horizon: usize,
    seed: u64,
) -> Result<(Vec<Example>, LossFamily)> {
    let [lo, hi] = spec.label_range;
    let mid = 0.5 * (lo + hi);
    let mut rng = seeded_rng(seed, 0x73747265616d);
    let mut raw: Vec<Vec<f64>> = (0..horizon)
        .map(|_| (0..params.feature_dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    normalize(&mut raw, spec.normalization);
    let features: Vec<Point> = raw.into_iter().map(|f| with_bias(f, spec.bias)).collect();
    let k = params.label_dim;
    Ok(match kind {
        SyntheticKind::RealizableLinearMixture => {
            ensure!(
                params.clip > 0.0 && params.clip <= 0.5 * (hi - lo),
                "dataset.params.clip must lie in (0, half the label range]"
            );
            let [a1, a2] = mixture_maps(params, features[0].len(), spec.bias, seed);
            let clip = |v: Point| v.map(|z| z.clamp(-params.clip, params.clip));
            let examples = features
                .into_iter()
                .map(|x| {
                    let target = clip(&a1 * &x) * params.mixture
                        + clip(&a2 * &x) * (1.0 - params.mixture);
                    Example {
                        label: target.add_scalar(mid),
                        features: x,
                    }
                })
                .collect();
            (examples, LossFamily::Squared)
        }
        SyntheticKind::FixedQuadratic => {
            let target = match &params.target {
                Some(t) => Point::from_column_slice(t),
                None => Point::from_element(k, mid + 0.3 * (hi - lo) / 2.0),
            };
            let examples = features
                .into_iter()
                .map(|x| Example {
                    features: x,
                    label: target.clone(),
                })
                .collect();
            (examples, LossFamily::Squared)
        }
        SyntheticKind::RandomLinear => {
            let mean = match &params.mean {
                Some(m) => Point::from_column_slice(m),
                None => Point::zeros(k),
            };
            let examples = features
                .into_iter()
                .map(|x| Example {
                    features: x,
                    label: &mean + sphere_sample(mean.len(), &mut rng) * params.spread,
                })
                .collect();
            (examples, LossFamily::Linear)
        }
    })
}
