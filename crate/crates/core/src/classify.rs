//! Linear discriminant classification with stratified k-fold
//! cross-validation.
//!
//! The discriminant is the standard shared-covariance linear rule: class
//! means, pooled within-class covariance regularized with a small ridge
//! (descriptor dimension can exceed per-class sample counts), empirical
//! priors, and `argmax_c x'P m_c - m_c'P m_c / 2 + log pi_c` at prediction
//! time. Fold assignment is a seeded per-class shuffle dealt round-robin,
//! so a report is reproducible from its seed.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::FeatureRow;
use crate::{Error, Result};

const RIDGE: f64 = 1e-4;

/// One labeled sample: dense class index, sample id, feature values.
#[derive(Clone, Debug)]
pub struct MatrixRow {
    pub class: usize,
    pub sample: String,
    pub features: Vec<f64>,
}

/// A labeled feature table with at least two classes and a uniform
/// dimension.
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    class_names: Vec<String>,
    rows: Vec<MatrixRow>,
    dim: usize,
}

impl FeatureMatrix {
    pub fn new(class_names: Vec<String>, rows: Vec<MatrixRow>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::Invalid(format!(
                "need at least 2 classes, found {}",
                class_names.len()
            )));
        }
        let dim = match rows.first() {
            Some(r) => r.features.len(),
            None => return Err(Error::Invalid("feature matrix has no rows".into())),
        };
        for row in &rows {
            if row.features.len() != dim {
                return Err(Error::Invalid(format!(
                    "sample '{}' has {} features, expected {}",
                    row.sample,
                    row.features.len(),
                    dim
                )));
            }
            if row.class >= class_names.len() {
                return Err(Error::Invalid(format!(
                    "sample '{}' has class index {} out of range",
                    row.sample, row.class
                )));
            }
        }
        Ok(FeatureMatrix {
            class_names,
            rows,
            dim,
        })
    }

    /// Builds a matrix from extraction output. Class indices follow the
    /// lexicographic order of class names.
    pub fn from_feature_rows(rows: &[FeatureRow]) -> Result<Self> {
        let mut names: Vec<String> = rows.iter().map(|r| r.class.clone()).collect();
        names.sort();
        names.dedup();
        let matrix_rows = rows
            .iter()
            .map(|r| MatrixRow {
                class: names.binary_search(&r.class).expect("name collected above"),
                sample: r.sample.clone(),
                features: r.vector.to_f64(),
            })
            .collect();
        FeatureMatrix::new(names, matrix_rows)
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn rows(&self) -> &[MatrixRow] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            class_names: self.class_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            dim: self.dim,
        }
    }
}

/// Reads a `class,sample,f1..fD` CSV produced by the extractor.
pub fn read_feature_csv(path: &Path) -> Result<FeatureMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |line: usize, msg: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_err(1, "empty file".into()))?;
    let head: Vec<&str> = header.split(',').collect();
    if head.len() < 3 || head[0] != "class" || head[1] != "sample" {
        return Err(csv_err(
            1,
            "expected header 'class,sample,f1..fD'".into(),
        ));
    }
    let dim = head.len() - 2;

    let mut class_names = Vec::new();
    let mut raw_rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(csv_err(
                lineno,
                format!("expected {} fields, found {}", dim + 2, fields.len()),
            ));
        }
        let mut features = Vec::with_capacity(dim);
        for f in &fields[2..] {
            features.push(f.parse::<f64>().map_err(|_| {
                csv_err(lineno, format!("bad feature value '{f}'"))
            })?);
        }
        class_names.push(fields[0].to_string());
        raw_rows.push((fields[0].to_string(), fields[1].to_string(), features));
    }
    class_names.sort();
    class_names.dedup();
    let rows = raw_rows
        .into_iter()
        .map(|(class, sample, features)| MatrixRow {
            class: class_names
                .binary_search(&class)
                .expect("collected above"),
            sample,
            features,
        })
        .collect();
    FeatureMatrix::new(class_names, rows)
}

/// A fitted shared-covariance linear discriminant.
#[derive(Clone, Debug)]
pub struct LdaModel {
    class_means: Vec<DVector<f64>>,
    pooled_precision: DMatrix<f64>,
    log_priors: Vec<f64>,
    // cached discriminant weights: w_c = P m_c, b_c = -m_c'w_c/2 + log pi_c
    weights: Vec<DVector<f64>>,
    biases: Vec<f64>,
}

impl LdaModel {
    pub fn class_means(&self) -> &[DVector<f64>] {
        &self.class_means
    }

    pub fn pooled_precision(&self) -> &DMatrix<f64> {
        &self.pooled_precision
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn dim(&self) -> usize {
        self.class_means.first().map_or(0, |m| m.len())
    }

    /// Class index with the highest discriminant score; ties go to the
    /// lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::Invalid(format!(
                "feature vector has {} values, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (c, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let score: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
            if score > best_score {
                best = c;
                best_score = score;
            }
        }
        Ok(best)
    }

    fn from_parts(
        class_means: Vec<DVector<f64>>,
        pooled_precision: DMatrix<f64>,
        log_priors: Vec<f64>,
    ) -> Self {
        let weights: Vec<DVector<f64>> = class_means
            .iter()
            .map(|m| &pooled_precision * m)
            .collect();
        let biases: Vec<f64> = class_means
            .iter()
            .zip(&weights)
            .zip(&log_priors)
            .map(|((m, w), lp)| -0.5 * m.dot(w) + lp)
            .collect();
        LdaModel {
            class_means,
            pooled_precision,
            log_priors,
            weights,
            biases,
        }
    }
}

/// Fits class means, regularized pooled within-class covariance and
/// empirical priors.
pub fn fit_lda(train: &FeatureMatrix) -> Result<LdaModel> {
    let d = train.dim();
    let classes = train.class_count();
    let n = train.rows().len();

    let mut counts = vec![0usize; classes];
    for row in train.rows() {
        counts[row.class] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c < 2) {
        return Err(Error::Invalid(format!(
            "class '{}' has {} sample(s); LDA needs at least 2 per class",
            train.class_names()[empty],
            counts[empty]
        )));
    }

    let mut means = vec![DVector::zeros(d); classes];
    for row in train.rows() {
        for (i, &v) in row.features.iter().enumerate() {
            means[row.class][i] += v;
        }
    }
    for (mean, &count) in means.iter_mut().zip(&counts) {
        *mean /= count as f64;
    }

    let mut cov = DMatrix::zeros(d, d);
    let mut centered = DVector::zeros(d);
    for row in train.rows() {
        for (i, &v) in row.features.iter().enumerate() {
            centered[i] = v - means[row.class][i];
        }
        cov.ger(1.0, &centered, &centered, 1.0);
    }
    cov /= (n - classes) as f64;

    // Zero-variance data would zero the ridge too; fall back to unit scale
    // so the model stays positive definite. NaN also lands here.
    let mut scale = cov.trace() / d as f64;
    if !scale.is_finite() || scale <= 0.0 {
        scale = 1.0;
    }
    for i in 0..d {
        cov[(i, i)] += RIDGE * scale;
    }

    let chol = nalgebra::linalg::Cholesky::new(cov).ok_or_else(|| {
        Error::Internal(
            "pooled covariance is not positive definite after regularization \
             (non-finite features?)"
                .into(),
        )
    })?;
    let precision = chol.inverse();

    let log_priors = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).ln())
        .collect();
    Ok(LdaModel::from_parts(means, precision, log_priors))
}

/// Seeded stratified fold assignment: per class, shuffle that class's rows
/// and deal them round-robin, so per-class fold sizes differ by at most one.
/// Errors when a class has fewer samples than folds.
pub fn stratified_folds(data: &FeatureMatrix, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Invalid(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.class_count()];
    for (i, row) in data.rows().iter().enumerate() {
        by_class[row.class].push(i);
    }
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() < folds {
            return Err(Error::Invalid(format!(
                "class '{}' has {} sample(s); {folds}-fold stratification needs at least {folds}",
                data.class_names()[c],
                rows.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; data.rows().len()];
    for rows in &mut by_class {
        rows.shuffle(&mut rng);
        for (i, &row) in rows.iter().enumerate() {
            assignment[row] = i % folds;
        }
    }
    Ok(assignment)
}

/// Per-fold outcome counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FoldStats {
    pub correct: usize,
    pub total: usize,
}

impl FoldStats {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Cross-validation outcome: per-fold accuracy, confusion counts, seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CvReport {
    pub folds: Vec<FoldStats>,
    /// `confusion[true_class][predicted_class]` over all test folds.
    pub confusion: Vec<Vec<usize>>,
    pub seed: u64,
}

impl CvReport {
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(FoldStats::accuracy).collect()
    }

    pub fn correct(&self) -> usize {
        self.folds.iter().map(|f| f.correct).sum()
    }

    pub fn total(&self) -> usize {
        self.folds.iter().map(|f| f.total).sum()
    }

    /// Overall correct classification rate.
    pub fn ccr(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    /// CCR as a percentage with two decimals, e.g. `89.72`, rounded half-up
    /// in exact integer arithmetic.
    pub fn ccr_percent_label(&self) -> String {
        let correct = self.correct() as u128;
        let total = self.total() as u128;
        let scaled = (20000 * correct + total) / (2 * total);
        format!("{}.{:02}", scaled / 100, scaled % 100)
    }

    /// `fold,accuracy` rows plus a final `overall,ccr` row. Accuracies are
    /// exact ratios rendered as 9-digit decimals.
    pub fn write_report_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut buf = String::from("fold,accuracy\n");
        for (i, fold) in self.folds.iter().enumerate() {
            let r = crate::Rational::new(fold.correct as u64, fold.total as u64);
            buf.push_str(&format!("{},{}\n", i + 1, r.format_decimal9()));
        }
        let overall = crate::Rational::new(self.correct() as u64, self.total() as u64);
        buf.push_str(&format!("overall,{}\n", overall.format_decimal9()));
        out.write_all(buf.as_bytes())
            .map_err(|e| Error::Internal(format!("write report csv: {e}")))
    }

    /// Confusion counts, one row per true class.
    pub fn write_confusion_csv<W: Write>(&self, class_names: &[String], out: &mut W) -> Result<()> {
        let mut buf = String::from("class");
        for name in class_names {
            buf.push(',');
            buf.push_str(name);
        }
        buf.push('\n');
        for (c, row) in self.confusion.iter().enumerate() {
            buf.push_str(&class_names[c]);
            for &count in row {
                buf.push_str(&format!(",{count}"));
            }
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())
            .map_err(|e| Error::Internal(format!("write confusion csv: {e}")))
    }
}

/// Stratified k-fold cross-validation of the LDA classifier.
pub fn cross_validate(data: &FeatureMatrix, folds: usize, seed: u64) -> Result<CvReport> {
    let assignment = stratified_folds(data, folds, seed)?;
    let classes = data.class_count();
    let mut fold_stats = Vec::with_capacity(folds);
    let mut confusion = vec![vec![0usize; classes]; classes];
    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..data.rows().len())
            .filter(|&i| assignment[i] != fold)
            .collect();
        let test_idx: Vec<usize> = (0..data.rows().len())
            .filter(|&i| assignment[i] == fold)
            .collect();
        let model = fit_lda(&data.subset(&train_idx))?;
        let mut correct = 0;
        for &i in &test_idx {
            let row = &data.rows()[i];
            let pred = model.predict(&row.features)?;
            confusion[row.class][pred] += 1;
            if pred == row.class {
                correct += 1;
            }
        }
        fold_stats.push(FoldStats {
            correct,
            total: test_idx.len(),
        });
    }
    Ok(CvReport {
        folds: fold_stats,
        confusion,
        seed,
    })
}
