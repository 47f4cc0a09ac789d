//! Beta regression with a logit mean link and constant precision, fit by
//! Fisher scoring with step halving. Standard errors come from the inverse
//! observed information at the optimum; confidence intervals are Wald at
//! 95%.
//!
//! The response must lie strictly inside (0, 1);
//! [`squeeze_to_open_interval`] maps a [-1, 1] score into the open unit
//! interval first.

use crate::error::{Error, Result};
use crate::stats::design::DesignMatrix;
use crate::stats::linalg::Mat;
use crate::stats::special::{digamma, ln_gamma, logistic, logit, normal_two_sided_p, trigamma};
use serde::{Deserialize, Serialize};

const GRADIENT_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 200;
const MU_CLAMP: f64 = 1e-10;

/// Map y in [-1, 1] to the open unit interval: rescale to [0, 1], then
/// apply the boundary squeeze (y * (N - 1) + 0.5) / N.
pub fn squeeze_to_open_interval(y: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Stats(format!("squeeze needs a sample count of at least 2, got {n}")));
    }
    if !(-1.0..=1.0).contains(&y) {
        return Err(Error::Stats(format!("squeeze input {y} outside [-1, 1]")));
    }
    let unit = (y + 1.0) / 2.0;
    Ok((unit * (n as f64 - 1.0) + 0.5) / n as f64)
}

/// One fitted coefficient with Wald inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: f64,
}

/// Result of a beta-regression fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub coefficients: Vec<Coefficient>,
    pub phi: f64,
    pub phi_std_error: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Log-likelihood after each accepted scoring step (non-decreasing).
    pub ll_trace: Vec<f64>,
}

impl BetaFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

struct Workspace<'a> {
    x: &'a Mat,
    y_star: Vec<f64>,
    ln_one_minus_y: Vec<f64>,
    y: &'a [f64],
}

impl<'a> Workspace<'a> {
    fn new(x: &'a Mat, y: &'a [f64]) -> Self {
        let y_star = y.iter().map(|&v| logit(v)).collect();
        let ln_one_minus_y = y.iter().map(|&v| (1.0 - v).ln()).collect();
        Workspace { x, y_star, ln_one_minus_y, y }
    }

    fn mus(&self, beta: &[f64]) -> Vec<f64> {
        self.x
            .mv(beta)
            .into_iter()
            .map(|eta| logistic(eta).clamp(MU_CLAMP, 1.0 - MU_CLAMP))
            .collect()
    }

    fn log_likelihood(&self, beta: &[f64], phi: f64) -> f64 {
        let mus = self.mus(beta);
        let mut ll = 0.0;
        for (i, &mu) in mus.iter().enumerate() {
            let a = mu * phi;
            let b = (1.0 - mu) * phi;
            ll += ln_gamma(phi) - ln_gamma(a) - ln_gamma(b)
                + (a - 1.0) * self.y[i].ln()
                + (b - 1.0) * self.ln_one_minus_y[i];
        }
        ll
    }

    /// Score vector for (beta..., phi).
    fn score(&self, beta: &[f64], phi: f64) -> Vec<f64> {
        let mus = self.mus(beta);
        let p = self.x.ncols;
        let mut grad = vec![0.0; p + 1];
        for (i, &mu) in mus.iter().enumerate() {
            let mu_star = digamma(mu * phi) - digamma((1.0 - mu) * phi);
            let resid = self.y_star[i] - mu_star;
            let t = mu * (1.0 - mu);
            for j in 0..p {
                grad[j] += phi * resid * t * self.x.get(i, j);
            }
            grad[p] += mu * resid + self.ln_one_minus_y[i] - digamma((1.0 - mu) * phi)
                + digamma(phi);
        }
        grad
    }

    /// Expected (Fisher) information for (beta..., phi).
    fn expected_information(&self, beta: &[f64], phi: f64) -> Mat {
        let mus = self.mus(beta);
        let p = self.x.ncols;
        let mut info = Mat::zeros(p + 1, p + 1);
        for (i, &mu) in mus.iter().enumerate() {
            let psi_a = trigamma(mu * phi);
            let psi_b = trigamma((1.0 - mu) * phi);
            let t = mu * (1.0 - mu);
            let w = phi * phi * (psi_a + psi_b) * t * t;
            let c = phi * (psi_a * mu - psi_b * (1.0 - mu)) * t;
            for j in 0..p {
                let xj = self.x.get(i, j);
                for k in j..p {
                    let v = info.get(j, k) + w * xj * self.x.get(i, k);
                    info.set(j, k, v);
                }
                info.set(j, p, info.get(j, p) + c * xj);
            }
            info.set(
                p,
                p,
                info.get(p, p) + psi_a * mu * mu + psi_b * (1.0 - mu) * (1.0 - mu)
                    - trigamma(phi),
            );
        }
        for j in 0..=p {
            for k in 0..j {
                info.set(j, k, info.get(k, j));
            }
        }
        info
    }

    /// Observed information (negative Hessian) for (beta..., phi).
    fn observed_information(&self, beta: &[f64], phi: f64) -> Mat {
        let mus = self.mus(beta);
        let p = self.x.ncols;
        let mut info = Mat::zeros(p + 1, p + 1);
        for (i, &mu) in mus.iter().enumerate() {
            let psi_a = trigamma(mu * phi);
            let psi_b = trigamma((1.0 - mu) * phi);
            let mu_star = digamma(mu * phi) - digamma((1.0 - mu) * phi);
            let resid = self.y_star[i] - mu_star;
            let t = mu * (1.0 - mu);
            let t_prime = t * (1.0 - 2.0 * mu);
            let w_obs = phi * phi * (psi_a + psi_b) * t * t - phi * resid * t_prime;
            let c_obs = (phi * (psi_a * mu - psi_b * (1.0 - mu)) - resid) * t;
            for j in 0..p {
                let xj = self.x.get(i, j);
                for k in j..p {
                    let v = info.get(j, k) + w_obs * xj * self.x.get(i, k);
                    info.set(j, k, v);
                }
                info.set(j, p, info.get(j, p) + c_obs * xj);
            }
            info.set(
                p,
                p,
                info.get(p, p) + psi_a * mu * mu + psi_b * (1.0 - mu) * (1.0 - mu)
                    - trigamma(phi),
            );
        }
        for j in 0..=p {
            for k in 0..j {
                info.set(j, k, info.get(k, j));
            }
        }
        info
    }
}

fn check_full_rank(design: &DesignMatrix) -> Result<Mat> {
    let weights = vec![1.0; design.x.nrows];
    let xtx = design.x.xtwx(&weights);
    match xtx.inverse() {
        Ok(_) => Ok(xtx),
        Err(sing) => Err(Error::Stats(format!(
            "design matrix is rank deficient; column `{}` is collinear with earlier columns",
            design.column_names.get(sing.0).map_or("?", String::as_str)
        ))),
    }
}

/// Starting values: OLS on the logit scale, method-of-moments precision.
fn initial_values(design: &DesignMatrix, y: &[f64], xtx: &Mat) -> Result<(Vec<f64>, f64)> {
    let z: Vec<f64> = y.iter().map(|&v| logit(v)).collect();
    let xtz = design.x.xtv(&z);
    let beta = xtx
        .solve(&xtz)
        .map_err(|_| Error::Stats("singular normal equations in initialization".to_string()))?;
    let mus: Vec<f64> = design.x.mv(&beta).into_iter().map(logistic).collect();
    let n = y.len();
    let p = design.x.ncols;
    let dof = (n.saturating_sub(p)).max(1) as f64;
    let sigma2 = y
        .iter()
        .zip(&mus)
        .map(|(&yi, &mi)| (yi - mi).powi(2))
        .sum::<f64>()
        / dof;
    let phi = if sigma2 > 0.0 {
        let est = mus.iter().map(|&m| m * (1.0 - m) / sigma2 - 1.0).sum::<f64>() / n as f64;
        est.max(0.5)
    } else {
        100.0
    };
    Ok((beta, phi))
}

/// Maximum-likelihood beta regression of `y` (strictly inside (0,1)) on the
/// design matrix.
pub fn fit_beta_regression(design: &DesignMatrix, y: &[f64]) -> Result<BetaFit> {
    let n = design.x.nrows;
    let p = design.x.ncols;
    if y.len() != n {
        return Err(Error::Stats(format!("{n} design rows but {} responses", y.len())));
    }
    if n <= p {
        return Err(Error::Stats(format!("{n} rows cannot identify {p} coefficients")));
    }
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::Stats(format!(
            "response value {bad} outside the open interval (0,1); \
             apply squeeze_to_open_interval first"
        )));
    }

    let xtx = check_full_rank(design)?;
    let ws = Workspace::new(&design.x, y);
    let (mut beta, mut phi) = initial_values(design, y, &xtx)?;
    let mut ll = ws.log_likelihood(&beta, phi);
    let mut ll_trace = vec![ll];
    let mut gradient_norm = f64::INFINITY;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        let grad = ws.score(&beta, phi);
        gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gradient_norm < GRADIENT_TOL {
            iterations = iter - 1;
            break;
        }
        // Fisher scoring far from the optimum; Newton steps with the
        // observed information close to it (scoring alone converges only
        // linearly and can stall just above the tolerance).
        let direction = if gradient_norm < 1e-3 {
            ws.observed_information(&beta, phi).solve(&grad).ok()
        } else {
            None
        };
        let direction = match direction {
            Some(d) => d,
            None => {
                let info = ws.expected_information(&beta, phi);
                info.solve(&grad).map_err(|_| {
                    Error::Stats(format!(
                        "Fisher information singular at iteration {iter} (phi = {phi:.4})"
                    ))
                })?
            }
        };

        // Near the optimum, the true likelihood gain of a full step falls
        // below what f64 can resolve at |ll|'s magnitude; the monotonicity
        // check would reject it on rounding noise and freeze the gradient.
        // The quadratic model predicts gain g'd/2: when that is under the
        // noise floor, take the step unchecked.
        let predicted_gain: f64 =
            grad.iter().zip(&direction).map(|(g, d)| g * d).sum::<f64>() / 2.0;
        let noise_floor = 1e-12 * (1.0 + ll.abs());
        if gradient_norm < 1e-3 && predicted_gain >= 0.0 && predicted_gain <= noise_floor {
            let cand_phi = phi + direction[p];
            if cand_phi > 1e-8 {
                for (b, d) in beta.iter_mut().zip(&direction) {
                    *b += d;
                }
                phi = cand_phi;
                ll = ws.log_likelihood(&beta, phi);
                ll_trace.push(ll);
                continue;
            }
        }

        // Step halving: accept the first step that does not decrease the
        // log-likelihood and keeps phi positive.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand_beta: Vec<f64> =
                beta.iter().zip(&direction).map(|(b, d)| b + step * d).collect();
            let cand_phi = phi + step * direction[p];
            if cand_phi > 1e-8 {
                let cand_ll = ws.log_likelihood(&cand_beta, cand_phi);
                if cand_ll >= ll - 1e-12 {
                    beta = cand_beta;
                    phi = cand_phi;
                    ll = cand_ll;
                    accepted = true;
                    break;
                }
            }
            step /= 2.0;
        }
        if !accepted {
            return Err(Error::Stats(format!(
                "beta regression failed to improve at iteration {iter}; \
                 gradient norm {gradient_norm:.3e}, trace: {ll_trace:?}"
            )));
        }
        ll_trace.push(ll);
    }

    if gradient_norm >= GRADIENT_TOL {
        // One final check: the last accepted step may have landed on the
        // optimum without a follow-up gradient evaluation.
        let grad = ws.score(&beta, phi);
        gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gradient_norm >= GRADIENT_TOL {
            return Err(Error::Stats(format!(
                "beta regression did not converge in {MAX_ITERATIONS} iterations; \
                 gradient norm {gradient_norm:.3e}, trace tail: {:?}",
                &ll_trace[ll_trace.len().saturating_sub(5)..]
            )));
        }
    }

    let observed = ws.observed_information(&beta, phi);
    let cov = observed.inverse().map_err(|_| {
        Error::Stats("observed information singular at the optimum".to_string())
    })?;
    let diag = cov.diag();
    if diag.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::Stats(
            "observed information is not positive definite at the optimum".to_string(),
        ));
    }

    let coefficients = design
        .column_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let estimate = beta[j];
            let std_error = diag[j].sqrt();
            Coefficient {
                name: name.clone(),
                estimate,
                std_error,
                ci_lo: estimate - 1.96 * std_error,
                ci_hi: estimate + 1.96 * std_error,
                p_value: normal_two_sided_p(estimate / std_error),
            }
        })
        .collect();

    Ok(BetaFit {
        coefficients,
        phi,
        phi_std_error: diag[p].sqrt(),
        log_likelihood: ll,
        iterations,
        gradient_norm,
        ll_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn sample_beta(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
        let ga = Gamma::new(a, 1.0).unwrap().sample(rng);
        let gb = Gamma::new(b, 1.0).unwrap().sample(rng);
        (ga / (ga + gb)).clamp(1e-9, 1.0 - 1e-9)
    }

    pub(crate) fn simulate(
        seed: u64,
        n: usize,
        beta: &[f64],
        phi: f64,
    ) -> (DesignMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = beta.len();
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = vec![1.0];
            for _ in 1..p {
                row.push(rng.random::<f64>() * 2.0 - 1.0);
            }
            let eta: f64 = row.iter().zip(beta).map(|(x, b)| x * b).sum();
            let mu = logistic(eta);
            y.push(sample_beta(&mut rng, mu * phi, (1.0 - mu) * phi));
            rows.push(row);
        }
        let names = (0..p)
            .map(|j| if j == 0 { "(intercept)".to_string() } else { format!("x{j}") })
            .collect();
        (DesignMatrix { column_names: names, x: Mat::from_rows(&rows) }, y)
    }

    #[test]
    fn squeeze_examples() {
        assert!((squeeze_to_open_interval(-1.0, 100).unwrap() - 0.005).abs() < 1e-15);
        assert!((squeeze_to_open_interval(1.0, 100).unwrap() - 0.995).abs() < 1e-15);
        for n in [2, 10, 100, 7919] {
            assert!((squeeze_to_open_interval(0.0, n).unwrap() - 0.5).abs() < 1e-15);
        }
        assert!(squeeze_to_open_interval(0.0, 1).is_err());
        assert!(squeeze_to_open_interval(1.5, 10).is_err());
    }

    #[test]
    fn recovers_simulated_coefficients() {
        let (design, y) = simulate(42, 2000, &[0.5, -0.3], 20.0);
        let fit = fit_beta_regression(&design, &y).unwrap();
        let intercept = fit.coefficient("(intercept)").unwrap();
        let slope = fit.coefficient("x1").unwrap();
        assert!((intercept.estimate - 0.5).abs() < 2.0 * intercept.std_error);
        assert!((slope.estimate + 0.3).abs() < 2.0 * slope.std_error);
        assert!((fit.phi - 20.0).abs() < 4.0 * fit.phi_std_error);
        assert!(fit.gradient_norm < GRADIENT_TOL);
    }

    #[test]
    fn intercept_only_fit() {
        let (design, y) = simulate(7, 1500, &[0.0], 15.0);
        let fit = fit_beta_regression(&design, &y).unwrap();
        let intercept = fit.coefficient("(intercept)").unwrap();
        assert!(
            intercept.estimate.abs() < 2.0 * intercept.std_error,
            "estimate {} se {}",
            intercept.estimate,
            intercept.std_error
        );
    }

    #[test]
    fn boundary_response_is_rejected_with_pointer() {
        let (design, mut y) = simulate(3, 50, &[0.2], 10.0);
        y[10] = 1.0;
        let err = fit_beta_regression(&design, &y).unwrap_err();
        assert!(err.to_string().contains("squeeze_to_open_interval"), "{err}");
    }

    #[test]
    fn score_matches_finite_differences() {
        let (design, y) = simulate(11, 60, &[0.3, -0.2, 0.1], 8.0);
        let ws = Workspace::new(&design.x, &y);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let beta: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
            let phi = 2.0 + rng.random::<f64>() * 20.0;
            let analytic = ws.score(&beta, phi);
            let h = 1e-5;
            for j in 0..=3 {
                let mut plus_beta = beta.clone();
                let mut minus_beta = beta.clone();
                let mut plus_phi = phi;
                let mut minus_phi = phi;
                if j < 3 {
                    plus_beta[j] += h;
                    minus_beta[j] -= h;
                } else {
                    plus_phi += h;
                    minus_phi -= h;
                }
                let fd = (ws.log_likelihood(&plus_beta, plus_phi)
                    - ws.log_likelihood(&minus_beta, minus_phi))
                    / (2.0 * h);
                let denom = analytic[j].abs().max(1.0);
                assert!(
                    ((analytic[j] - fd) / denom).abs() < 1e-5,
                    "component {j}: analytic {} vs fd {fd}",
                    analytic[j]
                );
            }
        }
    }

    #[test]
    fn observed_information_matches_score_derivative() {
        let (design, y) = simulate(13, 40, &[0.4, 0.2], 12.0);
        let ws = Workspace::new(&design.x, &y);
        let beta = vec![0.3, -0.1];
        let phi = 9.0;
        let info = ws.observed_information(&beta, phi);
        let h = 1e-6;
        for j in 0..=2 {
            let mut plus_beta = beta.clone();
            let mut minus_beta = beta.clone();
            let mut plus_phi = phi;
            let mut minus_phi = phi;
            if j < 2 {
                plus_beta[j] += h;
                minus_beta[j] -= h;
            } else {
                plus_phi += h;
                minus_phi -= h;
            }
            let grad_plus = ws.score(&plus_beta, plus_phi);
            let grad_minus = ws.score(&minus_beta, minus_phi);
            for k in 0..=2 {
                let fd = -(grad_plus[k] - grad_minus[k]) / (2.0 * h);
                assert!(
                    (info.get(k, j) - fd).abs() < 1e-3 * info.get(k, j).abs().max(1.0),
                    "info[{k},{j}] = {} vs fd {fd}",
                    info.get(k, j)
                );
            }
        }
    }

    #[test]
    fn log_likelihood_non_decreasing() {
        let (design, y) = simulate(21, 400, &[0.5, -0.3], 20.0);
        let fit = fit_beta_regression(&design, &y).unwrap();
        for pair in fit.ll_trace.windows(2) {
            // Slack scales with |ll|: unchecked steps at the optimum may
            // wobble the recorded value by rounding noise.
            let slack = 1e-11 * (1.0 + pair[0].abs());
            assert!(pair[1] >= pair[0] - slack, "trace decreased: {:?}", fit.ll_trace);
        }
    }

    #[test]
    fn fit_invariant_to_row_permutation() {
        let (design, y) = simulate(31, 300, &[0.2, 0.4], 10.0);
        let fit_a = fit_beta_regression(&design, &y).unwrap();

        let n = y.len();
        let perm: Vec<usize> = {
            let mut idx: Vec<usize> = (0..n).collect();
            // Deterministic shuffle.
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                idx.swap(i, j);
            }
            idx
        };
        let rows: Vec<Vec<f64>> = perm
            .iter()
            .map(|&i| (0..design.x.ncols).map(|j| design.x.get(i, j)).collect())
            .collect();
        let y_perm: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let permuted =
            DesignMatrix { column_names: design.column_names.clone(), x: Mat::from_rows(&rows) };
        let fit_b = fit_beta_regression(&permuted, &y_perm).unwrap();
        for (a, b) in fit_a.coefficients.iter().zip(&fit_b.coefficients) {
            assert!((a.estimate - b.estimate).abs() < 1e-7);
        }
        assert!((fit_a.phi - fit_b.phi).abs() < 1e-6);
    }

    #[test]
    fn collinear_column_is_named() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let x = i as f64 / 50.0;
                vec![1.0, x, 2.0 * x]
            })
            .collect();
        let design = DesignMatrix {
            column_names: vec!["(intercept)".into(), "a".into(), "b_dup".into()],
            x: Mat::from_rows(&rows),
        };
        let y = vec![0.4; 50];
        let err = fit_beta_regression(&design, &y).unwrap_err();
        assert!(err.to_string().contains("rank deficient"), "{err}");
        assert!(err.to_string().contains("b_dup"), "{err}");
    }
}
