//! Acceptance criteria. Run with `--nocapture` to see one line per criterion.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use radiomics_core::elasticnet::{
    fit, fit_binomial, fit_gaussian, fit_path, kkt_residual, lambda_grid, Coefficients, Design, Family, PenaltyConfig,
    SolverOptions,
};
use radiomics_core::evaluation::{auc_of, cv_evaluate, rank_cv, CvConfig};
use radiomics_core::features::shape::{compactness, eccentricity, radial_signature, roughness, signature_center};
use radiomics_core::features::texture::glcm::glcm_matrix;
use radiomics_core::features::texture::rlm::run_length_matrix;
use radiomics_core::features::texture::wavelet::{
    db4_decompose, db4_reconstruct, haar2d_forward, haar2d_inverse, Plane,
};
use radiomics_core::imaging::{trace_boundary, QuantizedPatch, RoiMask};
use radiomics_core::matrix::{extract_sequence_features, zscore_normalize, FeatureMatrix, FeatureProfile, Sequence};
use radiomics_core::synth::{phantom_matrix, phantom_patient, EffectSize, EffectTable, PhantomConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_columns(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..p).map(|_| (0..n).map(|_| normal(rng)).collect()).collect()
}

fn max_diff(a: &Coefficients, b: &Coefficients) -> f64 {
    a.beta
        .iter()
        .zip(&b.beta)
        .map(|(x, y)| (x - y).abs())
        .fold((a.intercept - b.intercept).abs(), f64::max)
}

fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

fn solver_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let opts = SolverOptions::default();
    let (n, p) = (30, 10);
    let mut ols_err = 0.0f64;
    let mut soft_err = 0.0f64;
    for _ in 0..50 {
        let cols = random_columns(&mut rng, n, p);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                1.5 + cols
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c[i] * (j as f64 - 4.5) * 0.3)
                    .sum::<f64>()
                    + normal(&mut rng)
            })
            .collect();

        let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
        let oracle = a
            .clone()
            .svd(true, true)
            .solve(&DVector::from_vec(y.clone()), 1e-14)
            .unwrap();
        let x = Design::from_columns(&cols).unwrap();
        let got = fit_gaussian(&x, &y, PenaltyConfig::new(1.0, 0.0).unwrap(), None, &opts).unwrap();
        ols_err = ols_err.max((got.coef.intercept - oracle[0]).abs());
        for j in 0..p {
            ols_err = ols_err.max((got.coef.beta[j] - oracle[j + 1]).abs());
        }

        let centred = DMatrix::from_fn(n, p, |i, j| {
            let m = cols[j].iter().sum::<f64>() / n as f64;
            cols[j][i] - m
        });
        let q = centred.qr().q() * (n as f64).sqrt();
        let ortho: Vec<Vec<f64>> = (0..p).map(|j| q.column(j).iter().copied().collect()).collect();
        let x = Design::from_columns(&ortho).unwrap();
        let z: Vec<f64> = ortho
            .iter()
            .map(|c| c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64)
            .collect();
        let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lambda = rng.random_range(0.05..0.9) * zmax;
        let got = fit_gaussian(&x, &y, PenaltyConfig::new(1.0, lambda).unwrap(), None, &opts).unwrap();
        let ybar = y.iter().sum::<f64>() / n as f64;
        soft_err = soft_err.max((got.coef.intercept - ybar).abs());
        for (b, zj) in got.coef.beta.iter().zip(&z) {
            soft_err = soft_err.max((b - soft(*zj, lambda)).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ols_err <= 1e-6 && soft_err <= 1e-8 && secs < 5.0,
        format!("max |b - ols| = {ols_err:.2e} (tol 1e-6), max |b - soft-threshold| = {soft_err:.2e} (tol 1e-8), {secs:.2} s"),
    )
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Proximal gradient (FISTA with adaptive restart) on the penalised mean deviance.
fn logistic_oracle(cols: &[Vec<f64>], y: &[f64], alpha: f64, lambda: f64) -> Coefficients {
    let (n, p) = (y.len(), cols.len());
    let nf = n as f64;
    let lip = (1.0 + cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / nf) / 4.0
        + lambda * (1.0 - alpha);
    let step = 1.0 / lip;
    let grad = |w: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; p + 1];
        for i in 0..n {
            let eta = w[0] + (0..p).map(|j| cols[j][i] * w[j + 1]).sum::<f64>();
            let r = sigmoid(eta) - y[i];
            g[0] += r / nf;
            for j in 0..p {
                g[j + 1] += r * cols[j][i] / nf;
            }
        }
        for j in 0..p {
            g[j + 1] += lambda * (1.0 - alpha) * w[j + 1];
        }
        g
    };
    let mut w = vec![0.0; p + 1];
    let mut v = w.clone();
    let mut t = 1.0f64;
    for _ in 0..500_000 {
        let g = grad(&v);
        let mut next: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        for b in next.iter_mut().skip(1) {
            *b = soft(*b, step * lambda * alpha);
        }
        let restart = next
            .iter()
            .zip(&w)
            .zip(&v)
            .map(|((a, b), c)| (c - a) * (a - b))
            .sum::<f64>()
            > 0.0;
        let change = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let t_next = if restart {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let momentum = if restart { 0.0 } else { (t - 1.0) / t_next };
        v = next.iter().zip(&w).map(|(a, b)| a + momentum * (a - b)).collect();
        w = next;
        t = t_next;
        if change < 1e-14 {
            break;
        }
    }
    Coefficients {
        intercept: w[0],
        beta: w[1..].to_vec(),
    }
}

fn binomial_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, p, alpha) = (40, 5, 0.5);
    let opts = SolverOptions::default();
    let mut coef_err = 0.0f64;
    let mut kkt = 0.0f64;
    for _ in 0..20 {
        let cols = random_columns(&mut rng, n, p);
        let truth: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let eta = 0.3 + (0..p).map(|j| cols[j][i] * truth[j]).sum::<f64>();
                f64::from(rng.random::<f64>() < sigmoid(eta))
            })
            .collect();
        let x = Design::from_columns(&cols).unwrap();
        for lambda in [0.01, 0.1] {
            let cfg = PenaltyConfig::new(alpha, lambda).unwrap();
            let got = fit_binomial(&x, &y, cfg, None, &opts).unwrap();
            let oracle = logistic_oracle(&cols, &y, alpha, lambda);
            coef_err = coef_err.max(max_diff(&got.coef, &oracle));
            kkt = kkt.max(kkt_residual(&x, &y, Family::Binomial, cfg, &got.coef));
        }
    }
    outcome(
        coef_err <= 1e-4 && kkt <= 1e-5,
        format!("max |b - proximal-gradient oracle| = {coef_err:.2e} (tol 1e-4), max KKT = {kkt:.2e} (tol 1e-5)"),
    )
}

fn path_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SolverOptions::default();
    let (n, p, alpha) = (60, 25, 0.5);
    let cols = random_columns(&mut rng, n, p);
    let yb: Vec<f64> = (0..n)
        .map(|i| f64::from(cols[0][i] - 0.7 * cols[1][i] + normal(&mut rng) > 0.0))
        .collect();
    let yg: Vec<f64> = (0..n)
        .map(|i| 2.0 * cols[2][i] + cols[3][i] + normal(&mut rng))
        .collect();
    let x = Design::from_columns(&cols).unwrap();
    let mut worst = 0.0f64;
    let mut zero_at_max = true;
    let mut steps = 0;
    for (family, y) in [(Family::Binomial, &yb), (Family::Gaussian, &yg)] {
        let grid = lambda_grid(&x, y, family, alpha, 100, 0.01).unwrap();
        let path = fit_path(&x, y, family, alpha, &grid, &opts).unwrap();
        zero_at_max &= path.fits[0].beta.iter().all(|b| *b == 0.0);
        for (lambda, warm) in grid.iter().zip(&path.fits) {
            let cold = fit(&x, y, family, PenaltyConfig::new(alpha, *lambda).unwrap(), None, &opts).unwrap();
            worst = worst.max(max_diff(warm, &cold.coef));
            steps += 1;
        }
    }
    outcome(
        worst <= 1e-5 && zero_at_max && steps == 200,
        format!(
            "max |warm - cold| = {worst:.2e} over {steps} lambdas (tol 1e-5), beta == 0 at lambda_max: {zero_at_max}"
        ),
    )
}

fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let (mut pos, mut neg) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        pos += 1.0;
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] == 0 {
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    for &l in labels {
        if l == 0 {
            neg += 1.0;
        }
    }
    wins / (pos * neg)
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    for set in 0..1000 {
        let n = rng.random_range(2..80);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        labels[0] = 0;
        labels[1] = 1;
        let tied = set % 2 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if tied {
                    f64::from(rng.random_range(0..5u8)) / 4.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let got = auc_of(&scores, &labels).unwrap();
        let want = pair_count_auc(&scores, &labels);
        if got != want {
            mismatches += 1;
            worst = worst.max((got - want).abs());
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches}/1000 score sets differ from pair counting (max diff {worst:.1e})"),
    )
}

fn patch(width: usize, height: usize, codes: Vec<u16>) -> QuantizedPatch {
    QuantizedPatch::from_codes(2, codes, RoiMask::from_fn(width, height, |_, _| true)).unwrap()
}

fn texture_goldens() -> Outcome {
    // energy, contrast, correlation, entropy
    let pick = |h: [f64; 13]| [h[0], h[1], h[2], h[8]];
    let two = glcm_matrix(&patch(2, 2, vec![0, 0, 1, 1]), (1, 0)).unwrap();
    let board = glcm_matrix(
        &patch(4, 4, (0..16).map(|i| ((i % 4 + i / 4) % 2) as u16).collect()),
        (1, 0),
    )
    .unwrap();
    let ln2 = std::f64::consts::LN_2;
    let mut err = 0.0f64;
    for (got, want) in two.as_slice().iter().zip([0.5, 0.0, 0.0, 0.5]) {
        err = err.max((got - want).abs());
    }
    for (got, want) in board.as_slice().iter().zip([0.0, 0.5, 0.5, 0.0]) {
        err = err.max((got - want).abs());
    }
    let h2 = pick(two.haralick());
    for (got, want) in [(h2[0], 0.5), (h2[1], 0.0), (h2[3], ln2)] {
        err = err.max((got - want).abs());
    }
    let hb = pick(board.haralick());
    for (got, want) in hb.iter().zip([0.5, 1.0, -1.0, ln2]) {
        err = err.max((got - want).abs());
    }
    let sre = run_length_matrix(&patch(5, 1, vec![0, 0, 1, 1, 1]), (1, 0)).statistics()[0];
    let sre_err = (sre - 0.1806).abs();
    outcome(
        err <= 1e-9 && sre_err <= 1e-4,
        format!("max GLCM/Haralick error {err:.1e} (tol 1e-9), RLM SRE = {sre:.6} (0.1806 +- 1e-4)"),
    )
}

fn shape_analytics() -> Outcome {
    let size = 128;
    let c = 63.5;
    let disc = RoiMask::from_fn(size, size, |x, y| {
        (x as f64 - c).powi(2) + (y as f64 - c).powi(2) <= 50.0 * 50.0
    });
    let square = RoiMask::from_fn(size, size, |x, y| (24..104).contains(&x) && (24..104).contains(&y));
    let ellipse = RoiMask::from_fn(size, size, |x, y| {
        ((x as f64 - c) / 50.0).powi(2) + ((y as f64 - c) / 25.0).powi(2) <= 1.0
    });

    let comp = |m: &RoiMask| compactness(m, &trace_boundary(m).unwrap()).unwrap();
    let disc_comp = comp(&disc);
    let disc_ecc = eccentricity(&disc).unwrap();
    let (center, _) = signature_center(&disc).unwrap();
    let disc_rough = roughness(&radial_signature(&disc, center, 360)).unwrap();
    let square_comp = comp(&square);
    let ell_ecc = eccentricity(&ellipse).unwrap();
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    let pass = (disc_comp - 1.0).abs() <= 0.05
        && disc_ecc < 0.1
        && disc_rough <= 0.02
        && (square_comp - quarter_pi).abs() <= 0.05 * quarter_pi
        && (ell_ecc - 0.8660).abs() <= 0.02;
    outcome(
        pass,
        format!(
            "disc: compactness {disc_comp:.4}, eccentricity {disc_ecc:.4}, roughness {disc_rough:.4}; \
             square compactness {square_comp:.4}; ellipse eccentricity {ell_ecc:.4}"
        ),
    )
}

fn matrix_contract() -> Outcome {
    let profile = FeatureProfile::paper_488();
    let cfg = PhantomConfig {
        n_patients: 24,
        seed: 11,
        ..PhantomConfig::default()
    };
    let patient = phantom_patient(&cfg, 0).unwrap();
    let per_sequence: Vec<usize> = patient
        .images
        .iter()
        .zip(&patient.rois)
        .map(|(img, roi)| extract_sequence_features(img, roi, &profile).unwrap().len())
        .collect();
    let m = phantom_matrix(&cfg, &profile).unwrap();
    let blocks: Vec<usize> = Sequence::ALL
        .iter()
        .map(|s| m.columns().iter().filter(|c| c.starts_with(s.prefix())).count())
        .collect();
    let (z, _) = zscore_normalize(&m).unwrap();
    let (mean_err, std_err) = column_moments(&z);
    let pass = profile.len() == 488
        && per_sequence.iter().all(|&k| k == 488)
        && m.n_cols() == 1464
        && blocks.iter().all(|&k| k == 488)
        && z.n_cols() > 0
        && mean_err <= 1e-9
        && std_err <= 1e-9;
    outcome(
        pass,
        format!(
            "profile {} features, per sequence {per_sequence:?}, assembled {} columns {blocks:?}; \
             z-scored ({} kept): max |mean| {mean_err:.1e}, max |std - 1| {std_err:.1e}",
            profile.len(),
            m.n_cols(),
            z.n_cols()
        ),
    )
}

fn column_moments(m: &FeatureMatrix) -> (f64, f64) {
    let n = m.n_rows() as f64;
    let mut mean_err = 0.0f64;
    let mut std_err = 0.0f64;
    for j in 0..m.n_cols() {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        mean_err = mean_err.max(mean.abs());
        std_err = std_err.max((var.sqrt() - 1.0).abs());
    }
    (mean_err, std_err)
}

fn wavelet_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let plane = Plane::new(64, 48, (0..64 * 48).map(|_| 100.0 * normal(&mut rng)).collect());
    let first = haar2d_forward(&plane);
    let second = haar2d_forward(&first.ll);
    let mut rebuilt_first = first.clone();
    rebuilt_first.ll = haar2d_inverse(&second);
    let rebuilt = haar2d_inverse(&rebuilt_first);
    let haar_rt = rebuilt
        .data
        .iter()
        .zip(&plane.data)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let energy = plane.sum_squares();
    let haar_energy = second.ll.sum_squares()
        + [&second.lh, &second.hl, &second.hh, &first.lh, &first.hl, &first.hh]
            .iter()
            .map(|p| p.sum_squares())
            .sum::<f64>();
    let haar_parseval = (haar_energy - energy).abs() / energy;

    let signal: Vec<f64> = (0..128).map(|_| normal(&mut rng)).collect();
    let (details, approx) = db4_decompose(&signal, 3);
    let back = db4_reconstruct(&details, &approx);
    let db4_rt = back.iter().zip(&signal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let db4_energy = sq(&approx) + details.iter().map(|d| sq(d)).sum::<f64>();
    let db4_parseval = (db4_energy - sq(&signal)).abs() / sq(&signal);
    let (const_details, _) = db4_decompose(&[3.7; 128], 3);
    let const_energy: f64 = const_details.iter().map(|d| sq(d)).sum();

    let pass =
        haar_rt <= 1e-9 && db4_rt <= 1e-9 && haar_parseval <= 1e-9 && db4_parseval <= 1e-9 && const_energy <= 1e-12;
    outcome(
        pass,
        format!(
            "round trip haar {haar_rt:.1e} db4 {db4_rt:.1e}; Parseval haar {haar_parseval:.1e} db4 {db4_parseval:.1e}; \
             constant detail energy {const_energy:.1e}"
        ),
    )
}

fn end_to_end() -> Outcome {
    let profile = FeatureProfile::paper_488();
    let start = Instant::now();
    let mut large_ok = 0;
    let mut null_ok = 0;
    let mut large_aucs = Vec::new();
    let mut null_aucs = Vec::new();
    for seed in 0..10u64 {
        for effect in [EffectSize::Large, EffectSize::None] {
            let effects = EffectTable::preset(effect);
            let cfg = PhantomConfig {
                n_patients: 200,
                effects,
                seed,
                ..PhantomConfig::default()
            };
            let m = phantom_matrix(&cfg, &profile).unwrap();
            let cv = cv_evaluate(
                &m,
                &CvConfig {
                    seed,
                    ..CvConfig::default()
                },
            )
            .unwrap();
            let auc = cv.best_auc();
            if effect == EffectSize::Large {
                let ranking = rank_cv(&cv).unwrap();
                let top5 = effects.target_features().iter().all(|prefix| {
                    ranking
                        .entries
                        .iter()
                        .any(|e| e.name.starts_with(prefix) && e.mean_coef != 0.0 && e.rank <= 5)
                });
                large_ok += usize::from(auc >= 0.85 && top5);
                large_aucs.push(format!("{auc:.3}{}", if top5 { "" } else { "*" }));
            } else {
                null_ok += usize::from((0.35..=0.65).contains(&auc));
                null_aucs.push(format!("{auc:.3}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        large_ok >= 9 && null_ok >= 9 && secs < 600.0,
        format!(
            "large {large_ok}/10 (AUC >= 0.85, targets top-5) [{}]; null {null_ok}/10 in [0.35, 0.65] [{}]; {secs:.0} s",
            large_aucs.join(" "),
            null_aucs.join(" ")
        ),
    )
}

fn performance_floor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (n, p) = (79, 1464);
    let values: Vec<f64> = (0..n * p).map(|_| normal(&mut rng)).collect();
    let labels: Vec<u8> = (0..n)
        .map(|i| u8::from(values[i * p] + 0.5 * values[i * p + 1] + normal(&mut rng) > 0.0))
        .collect();
    let m = FeatureMatrix::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        labels,
        (0..p).map(|j| format!("f{j}")).collect(),
        values,
    )
    .unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let cv = pool.install(|| cv_evaluate(&m, &CvConfig::default())).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        secs < 10.0 && cv.lambdas.len() == 100 && cv.fold_paths.len() == 10,
        format!(
            "79x1464, 10 folds + full fit, 100 lambdas, 1 thread: {secs:.2} s (AUC {:.3})",
            cv.best_auc()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        (
            "1 gaussian solver vs least squares and soft threshold",
            solver_correctness,
        ),
        ("2 binomial solver vs independent minimiser", binomial_oracle),
        ("3 warm path equals cold fits", path_consistency),
        ("4 AUC equals pair counting", auc_oracle),
        ("5 texture golden values", texture_goldens),
        ("6 shape analytics", shape_analytics),
        ("7 matrix contract", matrix_contract),
        ("8 wavelet identities", wavelet_identities),
        ("9 end-to-end phantom cohorts", end_to_end),
        ("10 performance floor", performance_floor),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {name} ({:.1} s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
