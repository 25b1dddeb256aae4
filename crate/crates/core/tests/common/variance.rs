//! Independent re-implementations of the variance pieces on random small instances.
//! Each check returns the largest relative discrepancy over its instances.

use propweight::data::{CohortSample, DesignInfo, SurveySample};
use propweight::linalg::Matrix;
use propweight::variance::{
    compute_b_hat, design_total_covariance, design_variance_poisson, design_variance_stratified, scaled_survey_rows,
    variance_cohort_component,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `|a - b|` relative to the larger of `|a|`, `|b|` and `floor`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs()).max(floor)
    }
}

/// Entrywise error of two matrices, with entries small against the whole matrix judged
/// relative to `1e-6` of its largest entry.
fn matrix_err(got: &[f64], expected: &[f64]) -> f64 {
    let scale = expected.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    got.iter()
        .zip(expected)
        .map(|(g, e)| rel_err(*g, *e, 1e-6 * scale))
        .fold(0.0, f64::max)
}

fn random_row(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    let mut r = vec![1.0];
    r.extend((1..p).map(|_| rng.random_range(-2.0..2.0)));
    r
}

fn random_cohort(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (CohortSample<f64>, Vec<f64>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_row(rng, p)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..5.0)).collect();
    let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..0.6)).collect();
    let w: Vec<f64> = probs.iter().map(|p| (1.0 - p) / p).collect();
    (
        CohortSample::new(y, Matrix::from_rows(&rows).unwrap()).unwrap(),
        probs,
        w,
    )
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Linearization coefficient, unweighted and pseudo-weighted, against a dense solve.
pub fn b_hat_error(instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..instances {
        let p = rng.random_range(1..=4);
        let n = rng.random_range(p + 2..=10);
        let (c, probs, w) = random_cohort(&mut rng, n, p);
        let mu = rng.random_range(0.0..2.0);
        for weights in [None, Some(w.as_slice())] {
            let mut a = vec![vec![0.0; p]; p];
            let mut rhs = vec![0.0; p];
            for i in 0..n {
                let wi = weights.map_or(1.0, |w| w[i]);
                let x = c.x().row(i);
                for r in 0..p {
                    rhs[r] += wi * (c.y()[i] - mu) * x[r];
                    for s in 0..p {
                        a[r][s] += wi * probs[i] * x[r] * x[s];
                    }
                }
            }
            let expected = dense_solve(a, rhs);
            let got = compute_b_hat(&c, &probs, weights, mu).unwrap();
            worst = worst.max(matrix_err(&got, &expected));
        }
    }
    worst
}

/// Cohort component against the square expanded term by term.
pub fn cohort_component_error(instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0_f64;
    for _ in 0..instances {
        let p = rng.random_range(1..=3);
        let (c, probs, w) = random_cohort(&mut rng, 10, p);
        let mu = rng.random_range(0.0..2.0);
        let b: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mut s_aa, mut s_ac, mut s_cc) = (0.0, 0.0, 0.0);
        for i in 0..10 {
            let k = (1.0 - probs[i]) * (1.0 - 2.0 * probs[i]);
            let a = (c.y()[i] - mu) / probs[i];
            let bx: f64 = c.x().row(i).iter().zip(&b).map(|(x, b)| x * b).sum();
            s_aa += k * a * a;
            s_ac += k * a * bx;
            s_cc += k * bx * bx;
        }
        let n_hat: f64 = w.iter().sum();
        let expected = (s_aa - 2.0 * s_ac + s_cc) / (n_hat * n_hat);
        let got = variance_cohort_component(&c, &probs, &w, mu, &b);
        worst = worst.max(rel_err(got, expected, 0.0));
    }
    worst
}

fn random_units(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let rows = (0..n).map(|_| random_row(rng, p)).collect();
    let pi: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let ph: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.5)).collect();
    (rows, pi, ph)
}

/// Enumerates every Poisson sample of a population of at most 10 units: the expected
/// design covariance estimate must equal the variance of the weighted total.
pub fn poisson_enumeration_error(instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0_f64;
    for _ in 0..instances {
        let n = rng.random_range(3..=10);
        let p = rng.random_range(1..=3);
        let (rows, pi, ph) = random_units(&mut rng, n, p);
        let u: Vec<Vec<f64>> = rows
            .iter()
            .zip(&ph)
            .map(|(r, q)| r.iter().map(|x| q * x).collect())
            .collect();
        let total: Vec<f64> = (0..p).map(|k| u.iter().map(|v| v[k]).sum()).collect();
        let mut true_var = vec![0.0; p * p];
        let mut mean_est = vec![0.0; p * p];
        for mask in 0_u32..(1 << n) {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let prob: f64 = (0..n)
                .map(|i| if mask & (1 << i) != 0 { pi[i] } else { 1.0 - pi[i] })
                .product();
            let mut t_hat = vec![0.0; p];
            for &i in &idx {
                for k in 0..p {
                    t_hat[k] += u[i][k] / pi[i];
                }
            }
            for r in 0..p {
                for s in 0..p {
                    true_var[r * p + s] += prob * (t_hat[r] - total[r]) * (t_hat[s] - total[s]);
                }
            }
            if idx.is_empty() {
                continue;
            }
            let x = Matrix::from_rows(&idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()).unwrap();
            let d: Vec<f64> = idx.iter().map(|&i| 1.0 / pi[i]).collect();
            let survey = SurveySample::new(x, d.clone(), DesignInfo::poisson()).unwrap();
            let coef: Vec<f64> = idx.iter().zip(&d).map(|(&i, di)| di * ph[i]).collect();
            let cov = design_total_covariance(&survey, &scaled_survey_rows(&survey, &coef)).unwrap();
            for (m, v) in mean_est.iter_mut().zip(cov.as_slice()) {
                *m += prob * v;
            }
        }
        worst = worst.max(matrix_err(&mean_est, &true_var));
    }
    worst
}

/// Normalized Poisson matrix against `N_p^-2 sum d(d - 1) p^2 x x'`.
pub fn poisson_closed_form_error(instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0_f64;
    for _ in 0..instances {
        let n = rng.random_range(2..=10);
        let p = rng.random_range(1..=3);
        let (rows, pi, ph) = random_units(&mut rng, n, p);
        let d: Vec<f64> = pi.iter().map(|v| 1.0 / v).collect();
        let survey = SurveySample::new(Matrix::from_rows(&rows).unwrap(), d.clone(), DesignInfo::poisson()).unwrap();
        let got = design_variance_poisson(&survey, &d, &ph).unwrap();
        let n_hat: f64 = d.iter().sum();
        let mut expected = vec![0.0; p * p];
        for r in 0..p {
            for s in 0..p {
                expected[r * p + s] = (0..n)
                    .map(|i| d[i] * (d[i] - 1.0) * ph[i] * ph[i] * rows[i][r] * rows[i][s])
                    .sum::<f64>()
                    / (n_hat * n_hat);
            }
        }
        worst = worst.max(matrix_err(got.as_slice(), &expected));
    }
    worst
}

/// Stratified matrix against the computational form `a/(a-1) [sum z z' - a zbar zbar']`.
pub fn stratified_error(instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst = 0.0_f64;
    for _ in 0..instances {
        let p = rng.random_range(1..=3);
        let n_strata = 3;
        let (mut strata, mut psus, mut rows, mut d, mut ph, mut layout) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for h in 0..n_strata {
            let a = rng.random_range(2..=4);
            for l in 0..a {
                for _ in 0..rng.random_range(1..=3) {
                    strata.push(format!("s{h}"));
                    psus.push(format!("c{l}"));
                    rows.push(random_row(&mut rng, p));
                    d.push(rng.random_range(1.0..30.0));
                    ph.push(rng.random_range(0.01..0.5));
                    layout.push((h, l));
                }
            }
        }
        let survey = SurveySample::new(
            Matrix::from_rows(&rows).unwrap(),
            d.clone(),
            DesignInfo::stratified(strata, psus),
        )
        .unwrap();
        let got = design_variance_stratified(&survey, &d, &ph).unwrap();

        let n_hat: f64 = d.iter().sum();
        let mut expected = vec![0.0; p * p];
        for h in 0..n_strata {
            let a = layout.iter().filter(|(hh, _)| *hh == h).map(|(_, l)| *l).max().unwrap() + 1;
            let mut totals = vec![vec![0.0; p]; a];
            for (i, &(hh, l)) in layout.iter().enumerate() {
                if hh == h {
                    for k in 0..p {
                        totals[l][k] += d[i] * ph[i] * rows[i][k];
                    }
                }
            }
            let af = a as f64;
            let mean: Vec<f64> = (0..p).map(|k| totals.iter().map(|t| t[k]).sum::<f64>() / af).collect();
            for r in 0..p {
                for s in 0..p {
                    let ss: f64 = totals.iter().map(|t| t[r] * t[s]).sum();
                    expected[r * p + s] += af / (af - 1.0) * (ss - af * mean[r] * mean[s]) / (n_hat * n_hat);
                }
            }
        }
        worst = worst.max(matrix_err(got.as_slice(), &expected));
    }
    worst
}
