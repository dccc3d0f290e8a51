//! Walk outcomes turned into texture descriptors.
//!
//! For one `(rule, mu)` configuration the walks over all selected start
//! points form a joint distribution of transient and attractor sizes. The
//! descriptor keeps, per configuration, the first `m` entries of the
//! trajectory-length histogram `h(l)` with `l = tau + rho`, starting at
//! `l = mu + 1` because no attractor is shorter than `mu + 1`. Slices are
//! concatenated rule-major (`min` first), ascending `mu`.
//!
//! Values stay exact rationals (walk counts over start counts) until they
//! are serialized as fixed 9-digit decimals, so feature CSVs are
//! bit-reproducible across platforms and worker counts.

use std::collections::BTreeMap;
use std::io::Write;

use crate::image::{GrayImage, LabeledDataset};
use crate::sampling::{select_starts, KSpec};
use crate::walk::{run_batch, Rule, WalkConfig};
use crate::{Error, Rational, Result};

/// Normalized counts of `(tau, rho)` outcomes for one `(mu, rule)`
/// configuration. Walks that found no attractor sit in `(tau, 0)` buckets;
/// they stay in the denominator but never enter the histogram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointDistribution {
    counts: BTreeMap<(usize, usize), u64>,
    total: u64,
    mu: usize,
    rule: Rule,
}

impl JointDistribution {
    pub fn new(mu: usize, rule: Rule) -> Self {
        JointDistribution {
            counts: BTreeMap::new(),
            total: 0,
            mu,
            rule,
        }
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    /// Number of walks accumulated; the normalization denominator.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn record(&mut self, tau: usize, rho: usize) {
        debug_assert!(rho == 0 || rho > self.mu);
        *self.counts.entry((tau, rho)).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &JointDistribution) {
        debug_assert_eq!((self.mu, self.rule), (other.mu, other.rule));
        for (&key, &count) in &other.counts {
            *self.counts.entry(key).or_insert(0) += count;
        }
        self.total += other.total;
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), u64)> + '_ {
        self.counts.iter().map(|(&k, &v)| (k, v))
    }

    /// Normalized mass of one `(tau, rho)` bucket.
    pub fn mass(&self, tau: usize, rho: usize) -> Rational {
        let count = self.counts.get(&(tau, rho)).copied().unwrap_or(0);
        Rational::new(count, self.total.max(1))
    }

    /// Total normalized mass over all buckets (1 whenever `total > 0`).
    pub fn mass_sum(&self) -> Rational {
        Rational::new(self.counts.values().sum(), self.total.max(1))
    }

    /// Mass of walks that found an attractor.
    pub fn attractor_mass(&self) -> Rational {
        let sum = self
            .counts
            .iter()
            .filter(|((_, rho), _)| *rho > 0)
            .map(|(_, &c)| c)
            .sum();
        Rational::new(sum, self.total.max(1))
    }

    /// Frequency of trajectories of size `l = tau + rho`, summed over all
    /// splits with `rho >= 1`.
    pub fn histogram(&self, l: usize) -> Rational {
        debug_assert!(l >= 1, "trajectory sizes start at 1");
        let sum = self
            .counts
            .iter()
            .filter(|(&(tau, rho), _)| rho >= 1 && tau + rho == l)
            .map(|(_, &c)| c)
            .sum();
        Rational::new(sum, self.total.max(1))
    }

    /// Largest observed trajectory size with an attractor, if any.
    pub fn max_trajectory_size(&self) -> Option<usize> {
        self.counts
            .keys()
            .filter(|(_, rho)| *rho > 0)
            .map(|&(tau, rho)| tau + rho)
            .max()
    }
}

/// The `m` histogram entries describing one `(rule, mu)` configuration:
/// `[h(mu+1), ..., h(mu+m)]`.
pub fn feature_slice(dist: &JointDistribution, mu: usize, m: usize) -> Result<Vec<Rational>> {
    if dist.mu() != mu {
        return Err(Error::Invalid(format!(
            "distribution was built with mu = {}, not mu = {}",
            dist.mu(),
            mu
        )));
    }
    Ok((1..=m).map(|i| dist.histogram(mu + i)).collect())
}

/// Where one feature value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureId {
    pub rule: Rule,
    pub mu: usize,
    /// Trajectory size `l` of the histogram entry.
    pub l: usize,
}

/// Concatenated histogram descriptor with a layout describing each position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureVector {
    values: Vec<Rational>,
    layout: Vec<FeatureId>,
}

impl FeatureVector {
    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn layout(&self) -> &[FeatureId] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.to_f64()).collect()
    }
}

/// Everything [`extract`] needs: memory sizes, rules, slice width and the
/// start-point spec.
#[derive(Clone, Debug)]
pub struct ExtractionConfig {
    mu_list: Vec<usize>,
    rules: Vec<Rule>,
    m: usize,
    k_spec: KSpec,
}

impl ExtractionConfig {
    /// Validates and normalizes a configuration: `mu_list` is sorted and
    /// deduplicated, rules are canonicalized to `min` before `max`.
    pub fn new(
        mu_list: impl IntoIterator<Item = usize>,
        rules: impl IntoIterator<Item = Rule>,
        m: usize,
        k_spec: KSpec,
    ) -> Result<Self> {
        let mut mu_list: Vec<usize> = mu_list.into_iter().collect();
        mu_list.sort_unstable();
        mu_list.dedup();
        if mu_list.is_empty() {
            return Err(Error::Invalid("memory-size list must be nonempty".into()));
        }
        let mut rules: Vec<Rule> = rules.into_iter().collect();
        rules.sort_unstable();
        rules.dedup();
        if rules.is_empty() {
            return Err(Error::Invalid("rule list must be nonempty".into()));
        }
        if m == 0 {
            return Err(Error::Invalid(
                "slice width m must be at least 1".into(),
            ));
        }
        Ok(ExtractionConfig {
            mu_list,
            rules,
            m,
            k_spec,
        })
    }

    pub fn with_k_spec(mut self, k_spec: KSpec) -> Self {
        self.k_spec = k_spec;
        self
    }

    pub fn mu_list(&self) -> &[usize] {
        &self.mu_list
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k_spec(&self) -> &KSpec {
        &self.k_spec
    }

    /// Total descriptor length `|rules| * |mu_list| * m`.
    pub fn dimension(&self) -> usize {
        self.rules.len() * self.mu_list.len() * self.m
    }
}

impl Default for ExtractionConfig {
    /// `mu = 0..=6`, both rules, `m = 4`, all pixels as start points.
    fn default() -> Self {
        ExtractionConfig::new(0..=6, [Rule::Min, Rule::Max], 4, KSpec::all())
            .expect("default configuration is valid")
    }
}

/// Full descriptor of one image: for each rule (min first) and each `mu`
/// (ascending), walk the selected start points and append the histogram
/// slice.
pub fn extract(image: &GrayImage, config: &ExtractionConfig) -> Result<FeatureVector> {
    let starts = select_starts(image, &config.k_spec);
    let mut values = Vec::with_capacity(config.dimension());
    let mut layout = Vec::with_capacity(config.dimension());
    for &rule in &config.rules {
        for &mu in &config.mu_list {
            let dist = run_batch(image, &starts, &WalkConfig::new(mu, rule))?;
            for (i, v) in feature_slice(&dist, mu, config.m)?.into_iter().enumerate() {
                values.push(v);
                layout.push(FeatureId {
                    rule,
                    mu,
                    l: mu + 1 + i,
                });
            }
        }
    }
    Ok(FeatureVector { values, layout })
}

/// One labeled descriptor, ready for CSV serialization.
#[derive(Clone, Debug)]
pub struct FeatureRow {
    pub class: String,
    pub sample: String,
    pub vector: FeatureVector,
}

/// Extracts every dataset sample, in dataset order, fanning the samples out
/// over a rayon pool. `threads = 0` uses the default pool; any worker count
/// produces identical rows.
pub fn extract_dataset(
    dataset: &LabeledDataset,
    config: &ExtractionConfig,
    threads: usize,
) -> Result<Vec<FeatureRow>> {
    use rayon::prelude::*;

    let work = || -> Result<Vec<FeatureRow>> {
        dataset
            .samples
            .par_iter()
            .map(|sample| {
                Ok(FeatureRow {
                    class: dataset.classes[sample.class].clone(),
                    sample: sample.id.clone(),
                    vector: extract(&sample.image, config)?,
                })
            })
            .collect()
    };
    if threads == 0 {
        work()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(work)
    }
}

/// Writes rows as `class,sample,f1..fD` with fixed 9-digit decimals.
pub fn write_feature_csv<W: Write>(rows: &[FeatureRow], out: &mut W) -> Result<()> {
    let dim = match rows.first() {
        Some(row) => row.vector.len(),
        None => return Err(Error::Invalid("no feature rows to write".into())),
    };
    let mut buf = String::new();
    buf.push_str("class,sample");
    for i in 1..=dim {
        buf.push_str(&format!(",f{i}"));
    }
    buf.push('\n');
    for row in rows {
        if row.vector.len() != dim {
            return Err(Error::Invalid(format!(
                "feature row '{}/{}' has {} values, expected {}",
                row.class,
                row.sample,
                row.vector.len(),
                dim
            )));
        }
        buf.push_str(&row.class);
        buf.push(',');
        buf.push_str(&row.sample);
        for v in row.vector.values() {
            buf.push(',');
            buf.push_str(&v.format_decimal9());
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::Internal(format!("write feature csv: {e}")))
}
