//! (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and
//! rank-one plus rank-mu covariance updates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::OptimizerError;

#[derive(Debug, Clone, PartialEq)]
pub struct CmaesOptions {
    pub sigma0: f64,
    /// Maximum objective evaluations, including the one at `x0`.
    pub budget: usize,
    /// Defaults to `4 + floor(3 ln D)`.
    pub population: Option<usize>,
    pub seed: u64,
    /// Stop once the step size times the largest axis falls below this.
    pub tol_x: f64,
}

impl Default for CmaesOptions {
    fn default() -> Self {
        Self { sigma0: 0.1, budget: 1500, population: None, seed: 0, tol_x: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaesOutcome {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub evaluations: usize,
    pub generations: usize,
}

pub fn default_population(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

/// Minimizes `f` from `x0`, returning the best point ever evaluated.
///
/// Non-finite objective values after the first evaluation rank last.
pub fn cmaes_minimize<F>(mut f: F, x0: &[f64], opts: &CmaesOptions) -> Result<CmaesOutcome, OptimizerError>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(OptimizerError::ZeroDimension);
    }
    if !(opts.sigma0 > 0.0) {
        return Err(OptimizerError::NonPositiveSigma);
    }
    let lambda = opts.population.unwrap_or_else(|| default_population(n)).max(2);
    if opts.budget < lambda {
        return Err(OptimizerError::BudgetTooSmall { budget: opts.budget, population: lambda });
    }
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(OptimizerError::NonFiniteStart);
    }
    let mut best = CmaesOutcome { x_best: x0.to_vec(), f_best: f0, evaluations: 1, generations: 0 };

    let nf = n as f64;
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = opts.sigma0;
    let mut pc = DVector::zeros(n);
    let mut ps = DVector::zeros(n);
    let mut cov = DMatrix::identity(n, n);
    let mut basis = DMatrix::identity(n, n);
    let mut scales = DVector::from_element(n, 1.0);

    let mut xs: Vec<DVector<f64>> = vec![DVector::zeros(n); lambda];
    let mut fs: Vec<f64> = vec![0.0; lambda];
    let mut order: Vec<usize> = (0..lambda).collect();

    while best.evaluations + lambda <= opts.budget {
        for k in 0..lambda {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let y = &basis * z.component_mul(&scales);
            xs[k] = &mean + sigma * y;
            let v = f(xs[k].as_slice());
            fs[k] = if v.is_finite() { v } else { f64::INFINITY };
            if fs[k] < best.f_best {
                best.f_best = fs[k];
                best.x_best = xs[k].as_slice().to_vec();
            }
        }
        best.evaluations += lambda;
        best.generations += 1;

        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]).then(a.cmp(&b)));
        let old = mean.clone();
        mean = DVector::zeros(n);
        for (w, &k) in weights.iter().zip(&order) {
            mean += *w * &xs[k];
        }
        let y_w = (&mean - &old) / sigma;

        // C^(-1/2) = B D^-1 B^T
        let inv_sqrt = &basis * DMatrix::from_diagonal(&scales.map(|d| 1.0 / d)) * basis.transpose();
        ps = (1.0 - cs) * &ps + (cs * (2.0 - cs) * mueff).sqrt() * (&inv_sqrt * &y_w);
        let gen = best.generations as i32;
        let hsig_norm = ps.norm() / (1.0 - (1.0 - cs).powi(2 * gen)).sqrt() / chi_n;
        let hsig = if hsig_norm < 1.4 + 2.0 / (nf + 1.0) { 1.0 } else { 0.0 };
        pc = (1.0 - cc) * &pc + hsig * (cc * (2.0 - cc) * mueff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, &k) in weights.iter().zip(&order) {
            let yk = (&xs[k] - &old) / sigma;
            rank_mu += *w * &yk * yk.transpose();
        }
        let decay = 1.0 - c1 - cmu + (1.0 - hsig) * c1 * cc * (2.0 - cc);
        cov = decay * &cov + c1 * &pc * pc.transpose() + cmu * rank_mu;
        cov = (&cov + cov.transpose()) * 0.5;

        sigma *= ((cs / damps) * (ps.norm() / chi_n - 1.0)).exp();

        let eig = SymmetricEigen::new(cov.clone());
        basis = eig.eigenvectors;
        scales = eig.eigenvalues.map(|e| e.max(1e-20).sqrt());

        let spread = sigma * scales.max();
        if !spread.is_finite() || spread < opts.tol_x {
            break;
        }
    }
    Ok(best)
}
