//! Elastic-net penalised gaussian and logistic regression by cyclic
//! coordinate descent, with warm-started lambda paths.
//!
//! Objective: `loss + λ·(α‖β‖₁ + (1 − α)/2·‖β‖²)` where the loss is
//! `(1/2n)‖y − b₀ − Xβ‖²` (gaussian) or the mean negative log-likelihood
//! (binomial). The intercept is never penalised.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_CLAMP: f64 = 1e-5;
const MAX_HALVINGS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Binomial,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub alpha: f64,
    pub lambda: f64,
}

impl PenaltyConfig {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must be in (0, 1], got {alpha}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { alpha, lambda })
    }

    pub fn penalty(&self, beta: &[f64]) -> f64 {
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        self.lambda * (self.alpha * l1 + 0.5 * (1.0 - self.alpha) * l2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the largest coefficient change in a cycle.
    pub tol: f64,
    /// Coordinate cycles allowed per fit (summed over IRLS iterations).
    pub max_cycles: usize,
    /// IRLS iterations allowed for the binomial family.
    pub max_outer: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_cycles: 100_000,
            max_outer: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub intercept: f64,
    pub beta: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(p: usize) -> Self {
        Self {
            intercept: 0.0,
            beta: vec![0.0; p],
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }

    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.beta).map(|(x, b)| x * b).sum::<f64>()
    }
}

/// A fitted solution plus solver diagnostics. Failing to converge is
/// reported here rather than as an error; the last iterate is returned.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub coef: Coefficients,
    pub converged: bool,
    pub cycles: usize,
    pub outer_iterations: usize,
}

/// Column-major design matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    n: usize,
    p: usize,
    cols: Vec<f64>,
}

impl Design {
    pub fn from_rows(n: usize, p: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                actual: rows.len(),
            });
        }
        let mut cols = vec![0.0; n * p];
        for i in 0..n {
            for j in 0..p {
                cols[j * n + i] = rows[i * p + j];
            }
        }
        Ok(Self { n, p, cols })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: c.len(),
            });
        }
        Ok(Self {
            n,
            p: columns.len(),
            cols: columns.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cols[j * self.n + i]
    }

    /// Rows `rows` in order, as a new design.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut cols = Vec::with_capacity(rows.len() * self.p);
        for j in 0..self.p {
            let c = self.column(j);
            cols.extend(rows.iter().map(|&i| c[i]));
        }
        Self {
            n: rows.len(),
            p: self.p,
            cols,
        }
    }

    pub fn linear_predictor(&self, coef: &Coefficients) -> Vec<f64> {
        let mut eta = vec![coef.intercept; self.n];
        for (j, &b) in coef.beta.iter().enumerate() {
            if b != 0.0 {
                for (e, x) in eta.iter_mut().zip(self.column(j)) {
                    *e += x * b;
                }
            }
        }
        eta
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^η)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_inputs(x: &Design, y: &[f64], family: Family) -> Result<()> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            actual: y.len(),
        });
    }
    if x.n() == 0 {
        return Err(Error::TooFewRows(0));
    }
    if family == Family::Binomial {
        if let Some(v) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "binomial response must be 0/1, got {v}"
            )));
        }
        let ones = y.iter().filter(|v| **v == 1.0).count();
        if ones == 0 || ones == y.len() {
            return Err(Error::SingleClass);
        }
    }
    Ok(())
}

/// Intercept-only fit and the loss gradient `(1/n)·xⱼᵀ(y − μ)` at it.
fn null_model(x: &Design, y: &[f64], family: Family) -> (f64, Vec<f64>) {
    let n = x.n() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let intercept = match family {
        Family::Gaussian => ybar,
        Family::Binomial => (ybar / (1.0 - ybar)).ln(),
    };
    let grad = (0..x.p())
        .map(|j| x.column(j).iter().zip(y).map(|(xi, yi)| xi * (yi - ybar)).sum::<f64>() / n)
        .collect();
    (intercept, grad)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Smallest lambda with an all-zero solution, for the given alpha.
pub fn lambda_max(x: &Design, y: &[f64], family: Family, alpha: f64) -> Result<f64> {
    check_inputs(x, y, family)?;
    PenaltyConfig::new(alpha, 0.0)?;
    let (_, grad) = null_model(x, y, family);
    let lmax = max_abs(&grad) / alpha;
    if !(lmax > 0.0 && lmax.is_finite()) {
        return Err(Error::ZeroSignal);
    }
    Ok(lmax)
}

/// `n_lambda` log-spaced values from lambda_max down to `eps·lambda_max`.
pub fn lambda_grid(x: &Design, y: &[f64], family: Family, alpha: f64, n_lambda: usize, eps: f64) -> Result<Vec<f64>> {
    if n_lambda == 0 {
        return Err(Error::InvalidArgument("n_lambda must be >= 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must be in (0, 1), got {eps}")));
    }
    let lmax = lambda_max(x, y, family, alpha)?;
    if n_lambda == 1 {
        return Ok(vec![lmax]);
    }
    let step = eps.ln() / (n_lambda - 1) as f64;
    Ok((0..n_lambda).map(|i| lmax * (step * i as f64).exp()).collect())
}

/// Penalised objective value for `coef`.
pub fn objective(x: &Design, y: &[f64], family: Family, cfg: PenaltyConfig, coef: &Coefficients) -> f64 {
    let eta = x.linear_predictor(coef);
    let n = x.n() as f64;
    let loss = match family {
        Family::Gaussian => eta.iter().zip(y).map(|(e, yi)| (yi - e).powi(2)).sum::<f64>() / (2.0 * n),
        Family::Binomial => eta.iter().zip(y).map(|(e, yi)| softplus(*e) - yi * e).sum::<f64>() / n,
    };
    loss + cfg.penalty(&coef.beta)
}

/// Largest violation of the optimality conditions (including the intercept).
pub fn kkt_residual(x: &Design, y: &[f64], family: Family, cfg: PenaltyConfig, coef: &Coefficients) -> f64 {
    let eta = x.linear_predictor(coef);
    let resid: Vec<f64> = eta
        .iter()
        .zip(y)
        .map(|(e, yi)| match family {
            Family::Gaussian => yi - e,
            Family::Binomial => yi - sigmoid(*e),
        })
        .collect();
    let n = x.n() as f64;
    let mut worst = (resid.iter().sum::<f64>() / n).abs();
    let (l1, l2) = (cfg.lambda * cfg.alpha, cfg.lambda * (1.0 - cfg.alpha));
    for (j, &b) in coef.beta.iter().enumerate() {
        let g = x.column(j).iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n;
        let v = if b == 0.0 {
            (g.abs() - l1).max(0.0)
        } else {
            (g - l1 * b.signum() - l2 * b).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Weighted penalised least squares on the working residual `r`, updated in
/// place together with `coef`. Returns the number of cycles used and whether
/// the tolerance was reached.
struct Inner<'a> {
    x: &'a Design,
    w: &'a [f64],
    v: Vec<f64>,
    w_sum: f64,
    l1: f64,
    l2: f64,
}

impl Inner<'_> {
    fn new<'a>(x: &'a Design, w: &'a [f64], cfg: PenaltyConfig) -> Inner<'a> {
        let n = x.n() as f64;
        let v = (0..x.p())
            .map(|j| x.column(j).iter().zip(w).map(|(a, wi)| wi * a * a).sum::<f64>() / n)
            .collect();
        Inner {
            x,
            w,
            v,
            w_sum: w.iter().sum(),
            l1: cfg.lambda * cfg.alpha,
            l2: cfg.lambda * (1.0 - cfg.alpha),
        }
    }

    fn quadratic(&self, r: &[f64], beta: &[f64]) -> f64 {
        let n = self.x.n() as f64;
        let loss = r.iter().zip(self.w).map(|(ri, wi)| wi * ri * ri).sum::<f64>() / (2.0 * n);
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        loss + self.l1 * l1 + 0.5 * self.l2 * l2
    }

    /// One pass over `coords` followed by an intercept update; returns the
    /// largest absolute change.
    fn cycle(&self, coords: impl Iterator<Item = usize>, coef: &mut Coefficients, r: &mut [f64]) -> f64 {
        let n = self.x.n() as f64;
        let mut dmax = 0.0f64;
        for j in coords {
            let vj = self.v[j];
            if vj == 0.0 {
                continue;
            }
            let col = self.x.column(j);
            let old = coef.beta[j];
            let grad = col
                .iter()
                .zip(r.iter())
                .zip(self.w)
                .map(|((a, ri), wi)| wi * a * ri)
                .sum::<f64>()
                / n;
            let new = soft_threshold(grad + vj * old, self.l1) / (vj + self.l2);
            let d = new - old;
            if d != 0.0 {
                coef.beta[j] = new;
                for (ri, a) in r.iter_mut().zip(col) {
                    *ri -= a * d;
                }
                dmax = dmax.max(d.abs());
            }
        }
        let shift = r.iter().zip(self.w).map(|(ri, wi)| wi * ri).sum::<f64>() / self.w_sum;
        if shift != 0.0 {
            coef.intercept += shift;
            for ri in r.iter_mut() {
                *ri -= shift;
            }
            dmax = dmax.max(shift.abs());
        }
        dmax
    }

    /// Full cycles alternate with active-set cycles until a full cycle
    /// changes nothing by more than `tol`.
    fn solve(&self, coef: &mut Coefficients, r: &mut [f64], opts: &SolverOptions, budget: usize) -> (usize, bool) {
        let p = self.x.p();
        let mut cycles = 0;
        let mut last = self.quadratic(r, &coef.beta);
        let mut check = |r: &[f64], beta: &[f64]| {
            if cfg!(debug_assertions) {
                let now = self.quadratic(r, beta);
                debug_assert!(
                    now <= last + 1e-10 * last.abs().max(1.0),
                    "coordinate descent objective increased: {last} -> {now}"
                );
                last = now;
            }
        };
        while cycles < budget {
            let dmax = self.cycle(0..p, coef, r);
            cycles += 1;
            check(r, &coef.beta);
            if dmax <= opts.tol {
                return (cycles, true);
            }
            let active: Vec<usize> = (0..p).filter(|&j| coef.beta[j] != 0.0).collect();
            while cycles < budget {
                let dmax = self.cycle(active.iter().copied(), coef, r);
                cycles += 1;
                check(r, &coef.beta);
                if dmax <= opts.tol {
                    break;
                }
            }
        }
        (cycles, false)
    }
}

fn null_fit(x: &Design, y: &[f64], family: Family, cfg: PenaltyConfig) -> Option<Fit> {
    let (intercept, grad) = null_model(x, y, family);
    (max_abs(&grad) / cfg.alpha <= cfg.lambda).then(|| Fit {
        coef: Coefficients {
            intercept,
            beta: vec![0.0; x.p()],
        },
        converged: true,
        cycles: 0,
        outer_iterations: 0,
    })
}

fn start(x: &Design, warm: Option<&Coefficients>) -> Result<Coefficients> {
    match warm {
        Some(c) if c.beta.len() != x.p() => Err(Error::DimensionMismatch {
            expected: x.p(),
            actual: c.beta.len(),
        }),
        Some(c) => Ok(c.clone()),
        None => Ok(Coefficients::zeros(x.p())),
    }
}

/// Gaussian elastic net with an unpenalised intercept.
pub fn fit_gaussian(
    x: &Design,
    y: &[f64],
    cfg: PenaltyConfig,
    warm: Option<&Coefficients>,
    opts: &SolverOptions,
) -> Result<Fit> {
    check_inputs(x, y, Family::Gaussian)?;
    let cfg = PenaltyConfig::new(cfg.alpha, cfg.lambda)?;
    if let Some(f) = null_fit(x, y, Family::Gaussian, cfg) {
        return Ok(f);
    }
    let mut coef = start(x, warm)?;
    let eta = x.linear_predictor(&coef);
    let mut r: Vec<f64> = y.iter().zip(&eta).map(|(yi, e)| yi - e).collect();
    let w = vec![1.0; x.n()];
    let inner = Inner::new(x, &w, cfg);
    let (cycles, converged) = inner.solve(&mut coef, &mut r, opts, opts.max_cycles);
    Ok(Fit {
        coef,
        converged,
        cycles,
        outer_iterations: 1,
    })
}

/// Logistic elastic net by iteratively reweighted least squares with an
/// inner coordinate-descent solve and step halving on the true objective.
pub fn fit_binomial(
    x: &Design,
    y: &[f64],
    cfg: PenaltyConfig,
    warm: Option<&Coefficients>,
    opts: &SolverOptions,
) -> Result<Fit> {
    check_inputs(x, y, Family::Binomial)?;
    let cfg = PenaltyConfig::new(cfg.alpha, cfg.lambda)?;
    if let Some(f) = null_fit(x, y, Family::Binomial, cfg) {
        return Ok(f);
    }
    let mut coef = match warm {
        Some(_) => start(x, warm)?,
        None => {
            let (intercept, _) = null_model(x, y, Family::Binomial);
            Coefficients {
                intercept,
                beta: vec![0.0; x.p()],
            }
        }
    };
    let n = x.n();
    let mut obj = objective(x, y, Family::Binomial, cfg, &coef);
    let mut cycles = 0;
    let mut w = vec![0.0; n];
    let mut r = vec![0.0; n];
    for outer in 1..=opts.max_outer {
        let eta = x.linear_predictor(&coef);
        for i in 0..n {
            let p = sigmoid(eta[i]);
            let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            w[i] = pc * (1.0 - pc);
            r[i] = (y[i] - p) / w[i];
        }
        let old = coef.clone();
        let inner = Inner::new(x, &w, cfg);
        let (used, inner_ok) = inner.solve(&mut coef, &mut r, opts, opts.max_cycles.saturating_sub(cycles));
        cycles += used;

        let mut new_obj = objective(x, y, Family::Binomial, cfg, &coef);
        let mut halvings = 0;
        while new_obj > obj && halvings < MAX_HALVINGS {
            coef.intercept = 0.5 * (coef.intercept + old.intercept);
            for (b, o) in coef.beta.iter_mut().zip(&old.beta) {
                *b = 0.5 * (*b + o);
            }
            new_obj = objective(x, y, Family::Binomial, cfg, &coef);
            halvings += 1;
        }
        obj = new_obj;
        let change = coef
            .beta
            .iter()
            .zip(&old.beta)
            .map(|(a, b)| (a - b).abs())
            .fold((coef.intercept - old.intercept).abs(), f64::max);
        if !inner_ok || cycles >= opts.max_cycles {
            return Ok(Fit {
                coef,
                converged: false,
                cycles,
                outer_iterations: outer,
            });
        }
        if change <= opts.tol {
            return Ok(Fit {
                coef,
                converged: true,
                cycles,
                outer_iterations: outer,
            });
        }
    }
    Ok(Fit {
        coef,
        converged: false,
        cycles,
        outer_iterations: opts.max_outer,
    })
}

pub fn fit(
    x: &Design,
    y: &[f64],
    family: Family,
    cfg: PenaltyConfig,
    warm: Option<&Coefficients>,
    opts: &SolverOptions,
) -> Result<Fit> {
    match family {
        Family::Gaussian => fit_gaussian(x, y, cfg, warm, opts),
        Family::Binomial => fit_binomial(x, y, cfg, warm, opts),
    }
}

/// Linear predictor (gaussian) or probability (binomial) for row-major `rows`.
pub fn predict(family: Family, coef: &Coefficients, rows: &[f64], n_features: usize) -> Result<Vec<f64>> {
    if n_features != coef.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: coef.beta.len(),
            actual: n_features,
        });
    }
    if n_features == 0 || !rows.len().is_multiple_of(n_features) {
        return Err(Error::DimensionMismatch {
            expected: n_features,
            actual: rows.len(),
        });
    }
    Ok(rows
        .chunks(n_features)
        .map(|row| {
            let eta = coef.linear_predictor(row);
            match family {
                Family::Gaussian => eta,
                Family::Binomial => sigmoid(eta),
            }
        })
        .collect())
}

/// Solutions along a descending lambda grid. Serialised sparsely: only
/// nonzero coefficients are stored, as `(index, value)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PathJson", try_from = "PathJson")]
pub struct ElasticNetPath {
    pub family: Family,
    pub alpha: f64,
    pub lambdas: Vec<f64>,
    pub fits: Vec<Coefficients>,
    pub converged: Vec<bool>,
}

impl ElasticNetPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.fits.first().map_or(0, |c| c.beta.len())
    }

    pub fn nonzero_counts(&self) -> Vec<usize> {
        self.fits.iter().map(Coefficients::nonzero_count).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl From<ElasticNetPath> for PathJson {
    fn from(path: ElasticNetPath) -> Self {
        PathJson {
            family: path.family,
            alpha: path.alpha,
            n_features: path.n_features(),
            fits: path
                .fits
                .iter()
                .zip(&path.lambdas)
                .zip(&path.converged)
                .map(|((c, &lambda), &converged)| SparseFit {
                    lambda,
                    intercept: c.intercept,
                    nonzero_count: c.nonzero_count(),
                    converged,
                    beta: c
                        .beta
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| **b != 0.0)
                        .map(|(j, b)| (j, *b))
                        .collect(),
                })
                .collect(),
            lambdas: path.lambdas,
        }
    }
}

impl TryFrom<PathJson> for ElasticNetPath {
    type Error = String;

    fn try_from(doc: PathJson) -> std::result::Result<Self, String> {
        if doc.fits.len() != doc.lambdas.len() {
            return Err("fits and lambdas differ in length".into());
        }
        let mut fits = Vec::with_capacity(doc.fits.len());
        for f in &doc.fits {
            let mut beta = vec![0.0; doc.n_features];
            for &(j, b) in &f.beta {
                *beta
                    .get_mut(j)
                    .ok_or_else(|| format!("coefficient index {j} out of range"))? = b;
            }
            fits.push(Coefficients {
                intercept: f.intercept,
                beta,
            });
        }
        Ok(Self {
            family: doc.family,
            alpha: doc.alpha,
            lambdas: doc.lambdas,
            converged: doc.fits.iter().map(|f| f.converged).collect(),
            fits,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PathJson {
    family: Family,
    alpha: f64,
    n_features: usize,
    lambdas: Vec<f64>,
    fits: Vec<SparseFit>,
}

#[derive(Serialize, Deserialize)]
struct SparseFit {
    lambda: f64,
    intercept: f64,
    nonzero_count: usize,
    converged: bool,
    beta: Vec<(usize, f64)>,
}

/// Fits every grid value in order, warm-starting from the previous solution.
pub fn fit_path(
    x: &Design,
    y: &[f64],
    family: Family,
    alpha: f64,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<ElasticNetPath> {
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("lambda grid must be strictly descending".into()));
    }
    let mut fits: Vec<Coefficients> = Vec::with_capacity(grid.len());
    let mut converged = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let cfg = PenaltyConfig::new(alpha, lambda)?;
        let f = fit(x, y, family, cfg, fits.last(), opts)?;
        converged.push(f.converged);
        fits.push(f.coef);
    }
    Ok(ElasticNetPath {
        family,
        alpha,
        lambdas: grid.to_vec(),
        fits,
        converged,
    })
}
