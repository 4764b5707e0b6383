//! Stratified cross-validation, ROC analysis and coefficient ranking.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elasticnet::{fit_path, lambda_grid, predict, Coefficients, Design, ElasticNetPath, Family, SolverOptions};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::stats;

const DEGENERATE_STD_RTOL: f64 = 1e-10;

/// Fold index per patient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Shuffles each class with a seeded generator and deals it round-robin to
/// the folds; the positive class continues dealing where the negative class
/// stopped, so overall fold sizes also differ by at most one.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > labels.len() {
        return Err(Error::InvalidArgument(format!(
            "fold count {k} must be between 2 and the number of patients ({})",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, seed, folds })
}

/// Empirical ROC curve; point 0 is (0, 0) at an infinite threshold and each
/// further point groups all patients sharing one score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub n_pos: u64,
    pub n_neg: u64,
}

impl RocCurve {
    pub fn len(&self) -> usize {
        self.tp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tp.is_empty()
    }

    pub fn tpr(&self, i: usize) -> f64 {
        self.tp[i] as f64 / self.n_pos as f64
    }

    pub fn fpr(&self, i: usize) -> f64 {
        self.fp[i] as f64 / self.n_neg as f64
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| (self.fpr(i), self.tpr(i))).collect()
    }
}

fn check_scores(scores: &[f64], labels: &[u8]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("label {l} is not 0 or 1")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Sweeps thresholds over the distinct scores in descending order; a
/// patient is called positive when its score is at or above the threshold.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let (n_pos, n_neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut curve = RocCurve {
        thresholds: vec![f64::INFINITY],
        tp: vec![0],
        fp: vec![0],
        n_pos,
        n_neg,
    };
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.thresholds.push(s);
        curve.tp.push(tp);
        curve.fp.push(fp);
    }
    Ok(curve)
}

/// Trapezoidal area, evaluated on integer counts so it equals the
/// Mann-Whitney statistic exactly.
pub fn auc(curve: &RocCurve) -> f64 {
    let twice: u128 = (1..curve.len())
        .map(|i| {
            let dx = (curve.fp[i] - curve.fp[i - 1]) as u128;
            dx * (curve.tp[i] + curve.tp[i - 1]) as u128
        })
        .sum();
    twice as f64 / (2 * curve.n_pos as u128 * curve.n_neg as u128) as f64
}

pub fn auc_of(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(auc(&roc_curve(scores, labels)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub sensitivity: f64,
    pub specificity: f64,
    pub threshold: f64,
    pub youden_j: f64,
}

/// Point maximising sensitivity + specificity − 1; ties go to the higher
/// sensitivity.
pub fn youden_point(curve: &RocCurve) -> OperatingPoint {
    let (p, n) = (curve.n_pos as i128, curve.n_neg as i128);
    // J·P·N = tp·N − fp·P, compared exactly
    let score = |i: usize| curve.tp[i] as i128 * n - curve.fp[i] as i128 * p;
    let best = (0..curve.len())
        .max_by(|&a, &b| score(a).cmp(&score(b)).then(curve.tp[a].cmp(&curve.tp[b])))
        .expect("curve has at least one point");
    let sensitivity = curve.tpr(best);
    let specificity = 1.0 - curve.fpr(best);
    OperatingPoint {
        sensitivity,
        specificity,
        threshold: curve.thresholds[best],
        youden_j: sensitivity + specificity - 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Z-score statistics from the training rows of each fold only.
    FoldLocal,
    /// Z-score the whole matrix once before splitting.
    Paper,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvConfig {
    pub alpha: f64,
    pub k: usize,
    pub seed: u64,
    pub n_lambda: usize,
    pub eps: f64,
    pub normalization: Normalization,
    pub solver: SolverOptions,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            k: 10,
            seed: 0,
            n_lambda: 100,
            eps: 0.01,
            normalization: Normalization::FoldLocal,
            solver: SolverOptions::default(),
        }
    }
}

/// One fold's path and held-out probabilities (`scores[lambda][row]`).
#[derive(Clone, Debug)]
pub struct FoldFit {
    pub test: Vec<usize>,
    pub path: ElasticNetPath,
    pub scores: Vec<Vec<f64>>,
}

/// Column-wise z-scoring with statistics from `train` rows only. Columns
/// that are constant on the training rows become all-zero.
fn fold_standardize(values: &[f64], p: usize, train: &[usize], test: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut xtr = vec![0.0; train.len() * p];
    let mut xte = vec![0.0; test.len() * p];
    let mut col = Vec::with_capacity(train.len());
    for j in 0..p {
        col.clear();
        col.extend(train.iter().map(|&i| values[i * p + j]));
        let mean = stats::mean(&col);
        let sd = stats::sample_std(&col);
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(sd > DEGENERATE_STD_RTOL * scale.max(f64::MIN_POSITIVE)) {
            continue;
        }
        for (r, &i) in train.iter().enumerate() {
            xtr[r * p + j] = (values[i * p + j] - mean) / sd;
        }
        for (r, &i) in test.iter().enumerate() {
            xte[r * p + j] = (values[i * p + j] - mean) / sd;
        }
    }
    (xtr, xte)
}

/// Fits a binomial path on the `train` rows of a row-major `values` matrix
/// and scores the `test` rows at every grid value. With
/// [`Normalization::FoldLocal`] the z-scoring uses training rows only.
pub fn fit_fold(
    values: &[f64],
    labels: &[u8],
    p: usize,
    train: &[usize],
    test: &[usize],
    grid: &[f64],
    cfg: &CvConfig,
) -> Result<FoldFit> {
    let (xtr, xte) = match cfg.normalization {
        Normalization::FoldLocal => fold_standardize(values, p, train, test),
        Normalization::Paper => {
            let rows = |idx: &[usize]| idx.iter().flat_map(|&i| values[i * p..(i + 1) * p].to_vec()).collect();
            (rows(train), rows(test))
        }
    };
    let design = Design::from_rows(train.len(), p, &xtr)?;
    let y: Vec<f64> = train.iter().map(|&i| f64::from(labels[i])).collect();
    let path = fit_path(&design, &y, Family::Binomial, cfg.alpha, grid, &cfg.solver)?;
    let scores = path
        .fits
        .iter()
        .map(|c| predict(Family::Binomial, c, &xte, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldFit {
        test: test.to_vec(),
        path,
        scores,
    })
}

/// Everything produced by [`cv_evaluate`].
#[derive(Clone, Debug)]
pub struct CvResult {
    pub config: CvConfig,
    /// Columns entering the model (zero-variance columns removed).
    pub feature_names: Vec<String>,
    pub dropped: Vec<String>,
    pub folds: FoldAssignment,
    pub lambdas: Vec<f64>,
    pub auc_by_lambda: Vec<f64>,
    pub best_index: usize,
    pub labels: Vec<u8>,
    /// Pooled out-of-fold probabilities at the best lambda, in row order.
    pub scores: Vec<f64>,
    pub roc: RocCurve,
    pub operating_point: OperatingPoint,
    pub fold_paths: Vec<ElasticNetPath>,
    /// Path fitted on all rows (standardised with all-row statistics).
    pub full_path: ElasticNetPath,
}

impl CvResult {
    pub fn best_lambda(&self) -> f64 {
        self.lambdas[self.best_index]
    }

    pub fn best_auc(&self) -> f64 {
        self.auc_by_lambda[self.best_index]
    }

    pub fn fold_coefficients(&self) -> Vec<&Coefficients> {
        self.fold_paths.iter().map(|p| &p.fits[self.best_index]).collect()
    }

    /// Nonzero coefficients of the all-rows fit at the best lambda.
    pub fn nonzero_count(&self) -> usize {
        self.full_path.fits[self.best_index].nonzero_count()
    }

    /// Features nonzero in at least one fold at the best lambda.
    pub fn nonzero_union(&self) -> usize {
        let mut set = BTreeSet::new();
        for c in self.fold_coefficients() {
            set.extend(c.beta.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j));
        }
        set.len()
    }

    pub fn unconverged_fits(&self) -> usize {
        self.fold_paths
            .iter()
            .chain(std::iter::once(&self.full_path))
            .map(|p| p.converged.iter().filter(|c| !**c).count())
            .sum()
    }

    pub fn record(&self) -> CvRecord {
        CvRecord {
            feature_names: self.feature_names.clone(),
            best_index: self.best_index,
            fold_paths: self.fold_paths.clone(),
            full_path: self.full_path.clone(),
        }
    }
}

/// Stratified k-fold evaluation of the binomial elastic net on a raw
/// feature matrix, over one lambda grid shared by all folds.
pub fn cv_evaluate(m: &FeatureMatrix, cfg: &CvConfig) -> Result<CvResult> {
    let labels = m.labels().to_vec();
    let folds = stratified_folds(&labels, cfg.k, cfg.seed)?;
    let (z, params) = crate::matrix::zscore_normalize(m)?;
    let p = z.n_cols();
    if p == 0 {
        return Err(Error::ZeroSignal);
    }
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let full = Design::from_rows(z.n_rows(), p, z.values())?;
    let grid = lambda_grid(&full, &y, Family::Binomial, cfg.alpha, cfg.n_lambda, cfg.eps)?;

    let raw;
    let values: &[f64] = match cfg.normalization {
        Normalization::Paper => z.values(),
        Normalization::FoldLocal => {
            let idx: Vec<usize> = params
                .columns
                .iter()
                .map(|c| m.column_index(c).expect("fitted on m"))
                .collect();
            raw = m.select_columns(&idx);
            raw.values()
        }
    };

    let fold_ids: Vec<usize> = (0..cfg.k).collect();
    let fold_fits: Vec<FoldFit> = fold_ids
        .par_iter()
        .map(|&f| {
            let train = folds.train_indices(f);
            let test = folds.test_indices(f);
            fit_fold(values, &labels, p, &train, &test, &grid, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let full_path = fit_path(&full, &y, Family::Binomial, cfg.alpha, &grid, &cfg.solver)?;

    let n = labels.len();
    let mut pooled = vec![vec![0.0; n]; grid.len()];
    for f in &fold_fits {
        for (l, scores) in f.scores.iter().enumerate() {
            for (&i, &s) in f.test.iter().zip(scores) {
                pooled[l][i] = s;
            }
        }
    }
    let auc_by_lambda = pooled.iter().map(|s| auc_of(s, &labels)).collect::<Result<Vec<_>>>()?;
    let mut best_index = 0;
    for (l, &a) in auc_by_lambda.iter().enumerate() {
        if a > auc_by_lambda[best_index] {
            best_index = l;
        }
    }
    let scores = pooled.swap_remove(best_index);
    let roc = roc_curve(&scores, &labels)?;
    let operating_point = youden_point(&roc);
    Ok(CvResult {
        config: cfg.clone(),
        feature_names: params.columns.clone(),
        dropped: params.dropped.clone(),
        folds,
        lambdas: grid,
        auc_by_lambda,
        best_index,
        labels,
        scores,
        roc,
        operating_point,
        fold_paths: fold_fits.into_iter().map(|f| f.path).collect(),
        full_path,
    })
}

/// Saved fold paths from which a ranking can be re-derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub feature_names: Vec<String>,
    pub best_index: usize,
    pub fold_paths: Vec<ElasticNetPath>,
    pub full_path: ElasticNetPath,
}

impl CvRecord {
    pub fn fold_coefficients(&self, lambda_index: usize) -> Result<Vec<&Coefficients>> {
        self.fold_paths
            .iter()
            .map(|p| {
                p.fits
                    .get(lambda_index)
                    .ok_or_else(|| Error::InvalidArgument(format!("lambda index {lambda_index} out of range")))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub name: String,
    pub mean_coef: f64,
    pub rank: usize,
    pub frequency: f64,
}

/// Features ordered by |mean fold coefficient|, rank 1 first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub entries: Vec<RankEntry>,
}

impl FeatureRanking {
    /// The top `n` features that have a nonzero mean coefficient.
    pub fn digest(&self, n: usize) -> Vec<&RankEntry> {
        self.entries.iter().take(n).filter(|e| e.mean_coef != 0.0).collect()
    }

    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.rank)
    }
}

/// Ranks features by the absolute mean of their fold coefficients; ties keep
/// column order. Frequency is the fraction of folds with a nonzero value.
pub fn rank_features<S: AsRef<str>>(coefs: &[&Coefficients], names: &[S]) -> Result<FeatureRanking> {
    if coefs.is_empty() {
        return Err(Error::InvalidArgument("no coefficient vectors to rank".into()));
    }
    let p = names.len();
    if let Some(c) = coefs.iter().find(|c| c.beta.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: c.beta.len(),
        });
    }
    let k = coefs.len() as f64;
    let mut entries: Vec<RankEntry> = (0..p)
        .map(|j| RankEntry {
            name: names[j].as_ref().to_string(),
            mean_coef: coefs.iter().map(|c| c.beta[j]).sum::<f64>() / k,
            rank: 0,
            frequency: coefs.iter().filter(|c| c.beta[j] != 0.0).count() as f64 / k,
        })
        .collect();
    entries.sort_by(|a, b| b.mean_coef.abs().total_cmp(&a.mean_coef.abs()));
    for (r, e) in entries.iter_mut().enumerate() {
        e.rank = r + 1;
    }
    Ok(FeatureRanking { entries })
}

pub fn rank_cv(cv: &CvResult) -> Result<FeatureRanking> {
    rank_features(&cv.fold_coefficients(), &cv.feature_names)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub lambda: f64,
    pub feature: String,
    pub coefficient: f64,
}

/// Long-format (lambda, feature, coefficient) rows for every nonzero entry.
pub fn trace_data<S: AsRef<str>>(path: &ElasticNetPath, names: &[S]) -> Result<Vec<TraceRow>> {
    if path.n_features() != names.len() {
        return Err(Error::DimensionMismatch {
            expected: path.n_features(),
            actual: names.len(),
        });
    }
    let mut rows = Vec::new();
    for (c, &lambda) in path.fits.iter().zip(&path.lambdas) {
        for (j, &b) in c.beta.iter().enumerate().filter(|(_, b)| **b != 0.0) {
            rows.push(TraceRow {
                lambda,
                feature: names[j].as_ref().to_string(),
                coefficient: b,
            });
        }
    }
    Ok(rows)
}

/// Run summary written as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub threshold: f64,
    pub best_lambda: f64,
    pub best_lambda_index: usize,
    pub nonzero_count: usize,
    pub nonzero_union_folds: usize,
    pub n_patients: usize,
    pub n_features: usize,
    pub n_dropped_features: usize,
    pub alpha: f64,
    pub k: usize,
    pub seed: u64,
    pub n_lambda: usize,
    pub eps: f64,
    pub normalization: Normalization,
    pub flags: Vec<String>,
}

pub fn summarize(cv: &CvResult) -> Summary {
    let mut flags = Vec::new();
    let unconverged = cv.unconverged_fits();
    if unconverged > 0 {
        flags.push(format!("not_converged:{unconverged}"));
    }
    if !cv.dropped.is_empty() {
        flags.push(format!("zero_variance_columns:{}", cv.dropped.len()));
    }
    let threshold = cv.operating_point.threshold;
    Summary {
        auc: cv.best_auc(),
        sensitivity: cv.operating_point.sensitivity,
        specificity: cv.operating_point.specificity,
        // JSON has no infinity; the (0,0) point is reported as 1.0
        threshold: if threshold.is_finite() { threshold } else { 1.0 },
        best_lambda: cv.best_lambda(),
        best_lambda_index: cv.best_index,
        nonzero_count: cv.nonzero_count(),
        nonzero_union_folds: cv.nonzero_union(),
        n_patients: cv.labels.len(),
        n_features: cv.feature_names.len(),
        n_dropped_features: cv.dropped.len(),
        alpha: cv.config.alpha,
        k: cv.config.k,
        seed: cv.config.seed,
        n_lambda: cv.config.n_lambda,
        eps: cv.config.eps,
        normalization: cv.config.normalization,
        flags,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Writes roc.csv, auc_by_lambda.csv, ranking.csv, trace.csv, summary.json
/// and cv_paths.json into `dir`.
pub fn write_outputs(dir: &Path, cv: &CvResult, ranking: &FeatureRanking) -> Result<Summary> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv_writer(&dir.join("roc.csv"))?;
    w.write_record(["fpr", "tpr", "threshold"])?;
    for i in 0..cv.roc.len() {
        let t = cv.roc.thresholds[i];
        let t = if t.is_finite() { num(t) } else { "inf".into() };
        w.write_record([num(cv.roc.fpr(i)), num(cv.roc.tpr(i)), t])?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("auc_by_lambda.csv"))?;
    w.write_record(["lambda_index", "lambda", "auc", "nonzero_count"])?;
    for (l, (&lambda, &a)) in cv.lambdas.iter().zip(&cv.auc_by_lambda).enumerate() {
        let nz = cv.full_path.fits[l].nonzero_count();
        w.write_record([l.to_string(), num(lambda), num(a), nz.to_string()])?;
    }
    w.flush()?;

    write_ranking(&dir.join("ranking.csv"), ranking)?;

    let mut w = csv_writer(&dir.join("trace.csv"))?;
    w.write_record(["lambda", "feature", "coefficient"])?;
    for r in trace_data(&cv.full_path, &cv.feature_names)? {
        w.write_record([num(r.lambda), r.feature, num(r.coefficient)])?;
    }
    w.flush()?;

    let summary = summarize(cv);
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("cv_paths.json"), &cv.record())?;
    Ok(summary)
}

pub fn write_ranking(path: &Path, ranking: &FeatureRanking) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["name", "mean_coef", "rank", "frequency"])?;
    for e in &ranking.entries {
        w.write_record([e.name.clone(), num(e.mean_coef), e.rank.to_string(), num(e.frequency)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let (mut twice, mut pairs) = (0u128, 0u128);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        twice += 2;
                    } else if scores[i] == scores[j] {
                        twice += 1;
                    }
                }
            }
        }
        twice as f64 / (2 * pairs) as f64
    }

    #[test]
    fn folds_stratify() {
        let labels: Vec<u8> = (0..79).map(|i| u8::from(i < 40)).collect();
        let f = stratified_folds(&labels, 10, 42).unwrap();
        for fold in 0..10 {
            let test = f.test_indices(fold);
            let pos = test.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!(pos, 4);
            assert!((3..=4).contains(&(test.len() - pos)));
        }
        assert_eq!(f, stratified_folds(&labels, 10, 42).unwrap());
        assert_ne!(f, stratified_folds(&labels, 10, 43).unwrap());

        let loo: Vec<u8> = (0..8).map(|i| u8::from(i % 2 == 0)).collect();
        let f = stratified_folds(&loo, 8, 1).unwrap();
        for fold in 0..8 {
            assert_eq!(f.test_indices(fold).len(), 1);
        }
        assert!(matches!(
            stratified_folds(&[0, 0, 0, 1], 2, 0),
            Err(Error::ClassTooSmall { class: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn stratification_bound(n0 in 10usize..60, n1 in 10usize..60, seed in 0u64..1000) {
            let labels: Vec<u8> = (0..n0 + n1).map(|i| u8::from(i >= n0)).collect();
            let f = stratified_folds(&labels, 10, seed).unwrap();
            for class in [0u8, 1] {
                let counts: Vec<usize> = (0..10)
                    .map(|k| f.test_indices(k).iter().filter(|&&i| labels[i] == class).count())
                    .collect();
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }

        #[test]
        fn auc_matches_pair_counting(seed in 0u64..10_000, n in 2usize..60, ties in 1u32..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..ties)) / 7.0).collect();
            let a = auc_of(&scores, &labels).unwrap();
            prop_assert_eq!(a, pair_count_auc(&scores, &labels));
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert!((a - (1.0 - auc_of(&neg, &labels).unwrap())).abs() <= 1e-12);
        }
    }

    #[test]
    fn roc_examples() {
        let labels = [1, 0, 1, 0];
        let c = roc_curve(&[0.8, 0.7, 0.6, 0.5], &labels).unwrap();
        let pts = c.points();
        assert_eq!(pts[0], (0.0, 0.0));
        assert_eq!(pts[1], (0.0, 0.5));
        assert_eq!(pts[2], (0.5, 0.5));
        assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        assert_eq!(auc(&c), 0.75);
        let op = youden_point(&c);
        assert_eq!((op.sensitivity, op.specificity, op.threshold), (1.0, 0.5, 0.6));

        let perfect = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert!(perfect.points().contains(&(0.0, 1.0)));
        assert_eq!(auc(&perfect), 1.0);
        let op = youden_point(&perfect);
        assert_eq!((op.sensitivity, op.specificity), (1.0, 1.0));

        let flat = roc_curve(&[0.3; 6], &[1, 0, 1, 0, 1, 0]).unwrap();
        assert_eq!(flat.points(), vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(auc(&flat), 0.5);
        let op = youden_point(&flat);
        assert_eq!((op.sensitivity, op.specificity), (1.0, 0.0));

        assert!(matches!(roc_curve(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    fn noise_matrix(seed: u64, n: usize, p: usize, oracle: bool) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let mut values = Vec::with_capacity(n * p);
        for &l in &labels {
            for j in 0..p {
                values.push(if oracle && j == 3 {
                    f64::from(l)
                } else {
                    rng.random_range(-1.0..1.0)
                });
            }
        }
        FeatureMatrix::new(
            (0..n).map(|i| format!("p{i}")).collect(),
            labels,
            (0..p).map(|j| format!("f{j}")).collect(),
            values,
        )
        .unwrap()
    }

    #[test]
    fn oracle_feature_is_found() {
        let m = noise_matrix(1, 60, 40, true);
        let cfg = CvConfig {
            n_lambda: 30,
            ..CvConfig::default()
        };
        let cv = cv_evaluate(&m, &cfg).unwrap();
        assert!(cv.best_auc() >= 0.99);
        let ranking = rank_cv(&cv).unwrap();
        assert_eq!(ranking.entries[0].name, "f3");
        assert_eq!(ranking.entries[0].frequency, 1.0);
        let mut ranks: Vec<usize> = ranking.entries.iter().map(|e| e.rank).collect();
        ranks.sort();
        assert_eq!(ranks, (1..=40).collect::<Vec<_>>());
    }

    #[test]
    fn zero_coefficients_give_empty_digest() {
        let zero = Coefficients::zeros(3);
        let r = rank_features(&[&zero, &zero], &["a", "b", "c"]).unwrap();
        assert!(r.digest(5).is_empty());
        assert!(r.entries.iter().all(|e| e.frequency == 0.0));
        assert_eq!(
            r.entries.iter().map(|e| e.name.as_str()).collect::<Vec<_>>(),
            ["a", "b", "c"]
        );
    }

    #[test]
    fn held_out_rows_do_not_affect_fold_fit() {
        let m = noise_matrix(5, 40, 12, true);
        let cfg = CvConfig {
            n_lambda: 20,
            ..CvConfig::default()
        };
        let folds = stratified_folds(m.labels(), 5, 0).unwrap();
        let (train, test) = (folds.train_indices(0), folds.test_indices(0));
        let grid: Vec<f64> = (0..20).map(|i| 0.3 * 0.85f64.powi(i)).collect();
        let a = fit_fold(m.values(), m.labels(), 12, &train, &test, &grid, &cfg).unwrap();
        let mut perturbed = m.values().to_vec();
        for &i in &test {
            for j in 0..12 {
                perturbed[i * 12 + j] += 100.0 * (j as f64 + 1.0);
            }
        }
        let b = fit_fold(&perturbed, m.labels(), 12, &train, &test, &grid, &cfg).unwrap();
        assert_eq!(a.path, b.path);
    }

    #[test]
    fn trace_rows() {
        let m = noise_matrix(2, 40, 10, true);
        let cfg = CvConfig {
            n_lambda: 15,
            k: 5,
            ..CvConfig::default()
        };
        let cv = cv_evaluate(&m, &cfg).unwrap();
        let rows = trace_data(&cv.full_path, &cv.feature_names).unwrap();
        let total: usize = cv.full_path.nonzero_counts().iter().sum();
        assert_eq!(rows.len(), total);
        assert!(rows.iter().all(|r| r.lambda != cv.lambdas[0]));
        let keys: BTreeSet<(u64, &str)> = rows.iter().map(|r| (r.lambda.to_bits(), r.feature.as_str())).collect();
        assert_eq!(keys.len(), rows.len());
    }

    #[test]
    fn outputs_are_written() {
        let m = noise_matrix(3, 40, 8, true);
        let cfg = CvConfig {
            n_lambda: 10,
            k: 4,
            ..CvConfig::default()
        };
        let cv = cv_evaluate(&m, &cfg).unwrap();
        let ranking = rank_cv(&cv).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let s = write_outputs(dir.path(), &cv, &ranking).unwrap();
        assert!(s.auc >= 0.99);
        for f in [
            "roc.csv",
            "auc_by_lambda.csv",
            "ranking.csv",
            "trace.csv",
            "summary.json",
            "cv_paths.json",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let rec: CvRecord =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("cv_paths.json")).unwrap()).unwrap();
        let again = rank_features(&rec.fold_coefficients(rec.best_index).unwrap(), &rec.feature_names).unwrap();
        assert_eq!(again, ranking);
    }
}
