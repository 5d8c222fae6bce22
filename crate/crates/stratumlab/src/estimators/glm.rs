//! Shared regression machinery: weighted logistic regression by iteratively
//! reweighted least squares, and a soft-label multinomial logistic fit used
//! by the mixture M-step.

use nalgebra::{DMatrix, DVector};

use crate::core::{CovariateSchema, ObservedRecord};
use crate::error::{Error, Result};
use crate::util::expit;

/// Probabilities predicted for weighting are clipped into this open interval
/// so that no subject can receive an infinite weight. Clipping is reported in
/// diagnostics when it fires.
pub const PROPENSITY_CLIP: (f64, f64) = (1e-6, 1.0 - 1e-6);

const IRLS_MAX_ITER: usize = 100;
const IRLS_TOL: f64 = 1e-8;
/// A coefficient beyond this size on a standardized column is taken as a
/// diverging fit, i.e. separation.
const SEPARATION_BOUND: f64 = 30.0;

/// Design matrix with intercept column first.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DesignMatrix {
    /// Builds intercept + expanded covariate rows for `records` under a
    /// shared schema.
    pub fn build(
        schema: &CovariateSchema,
        records: &[&ObservedRecord],
        covariates: &[String],
    ) -> Result<Self> {
        let mut column_names = vec!["(intercept)".to_string()];
        column_names.extend(schema.expanded_names(covariates)?);
        let mut rows = Vec::with_capacity(records.len());
        for r in records {
            let mut row = Vec::with_capacity(column_names.len());
            row.push(1.0);
            row.extend(schema.design_row(&r.x, covariates)?);
            rows.push(row);
        }
        Ok(DesignMatrix { column_names, rows })
    }

    pub fn width(&self) -> usize {
        self.column_names.len()
    }
}

/// Fitted logistic model for an intercurrent-status propensity.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    /// Coefficients aligned to the intercept-first expanded design.
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    /// Arm the model was fitted on.
    pub fitted_on: String,
    pub converged: bool,
    pub iterations: usize,
    /// Inverse observed information at the fit; the asymptotic covariance
    /// used for drawing coefficients in multiple imputation.
    pub covariance: Vec<Vec<f64>>,
}

impl PropensityModel {
    pub fn linear_predictor(&self, design_row: &[f64]) -> f64 {
        design_row
            .iter()
            .zip(&self.coefficients)
            .map(|(x, b)| x * b)
            .sum()
    }

    /// Raw predicted probability.
    pub fn predict(&self, design_row: &[f64]) -> f64 {
        expit(self.linear_predictor(design_row))
    }

    /// Probability clipped away from 0 and 1; the flag reports whether the
    /// clip fired.
    pub fn predict_clipped(&self, design_row: &[f64]) -> (f64, bool) {
        let p = self.predict(design_row);
        if p < PROPENSITY_CLIP.0 {
            (PROPENSITY_CLIP.0, true)
        } else if p > PROPENSITY_CLIP.1 {
            (PROPENSITY_CLIP.1, true)
        } else {
            (p, false)
        }
    }
}

/// Maximizes the (weighted) Bernoulli log-likelihood by IRLS.
///
/// Convergence is declared when the largest absolute coefficient change falls
/// below 1e-8; after 100 iterations the fit is returned with
/// `converged == false` rather than failing. Diverging coefficients on
/// standardized columns are reported as separation.
pub fn fit_logistic(
    design: &DesignMatrix,
    labels: &[f64],
    weights: Option<&[f64]>,
) -> Result<PropensityModel> {
    let n = design.rows.len();
    let p = design.width();
    if labels.len() != n {
        return Err(Error::invalid("labels and design rows differ in length"));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::invalid("weights and design rows differ in length"));
        }
        if w.iter().any(|wi| !wi.is_finite() || *wi < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);

    let mut pos = 0.0;
    let mut neg = 0.0;
    for (i, y) in labels.iter().enumerate() {
        if *y != 0.0 && *y != 1.0 {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        if *y == 1.0 {
            pos += weight(i);
        } else {
            neg += weight(i);
        }
    }
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::invalid(
            "logistic fit requires both label classes among positive-weight rows",
        ));
    }

    // Column scales for the separation check: sd of each non-intercept column.
    let mut scales = vec![1.0; p];
    for j in 1..p {
        let mean = design.rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = design.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        scales[j] = var.sqrt().max(f64::MIN_POSITIVE);
    }

    let x = DMatrix::from_fn(n, p, |i, j| design.rows[i][j]);
    let mut beta: DVector<f64> = DVector::zeros(p);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=IRLS_MAX_ITER {
        iterations = iter;
        let eta = &x * &beta;
        let mut grad: DVector<f64> = DVector::zeros(p);
        let mut info: DMatrix<f64> = DMatrix::zeros(p, p);
        for i in 0..n {
            let mu = expit(eta[i]);
            let wi = weight(i);
            let resid = wi * (labels[i] - mu);
            let curv = (wi * mu * (1.0 - mu)).max(1e-12);
            for j in 0..p {
                grad[j] += x[(i, j)] * resid;
                for k in j..p {
                    info[(j, k)] += curv * x[(i, j)] * x[(i, k)];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                info[(j, k)] = info[(k, j)];
            }
        }
        let chol = info
            .clone()
            .cholesky()
            .ok_or(Error::SingularDesign)?;
        let delta = chol.solve(&grad);
        beta += &delta;

        for j in 0..p {
            let standardized = if j == 0 { beta[j] } else { beta[j] * scales[j] };
            if standardized.abs() > SEPARATION_BOUND {
                return Err(Error::Separation);
            }
        }
        if delta.amax() < IRLS_TOL {
            converged = true;
            break;
        }
    }

    // Observed information (and its inverse) at the final coefficients.
    let eta = &x * &beta;
    let mut info: DMatrix<f64> = DMatrix::zeros(p, p);
    for i in 0..n {
        let mu = expit(eta[i]);
        let curv = (weight(i) * mu * (1.0 - mu)).max(1e-12);
        for j in 0..p {
            for k in j..p {
                info[(j, k)] += curv * x[(i, j)] * x[(i, k)];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            info[(j, k)] = info[(k, j)];
        }
    }
    let covariance = info.cholesky().ok_or(Error::SingularDesign)?.inverse();
    let covariance = (0..p)
        .map(|j| (0..p).map(|k| covariance[(j, k)]).collect())
        .collect();

    Ok(PropensityModel {
        coefficients: beta.iter().copied().collect(),
        column_names: design.column_names.clone(),
        fitted_on: String::new(),
        converged,
        iterations,
        covariance,
    })
}

// ---------------------------------------------------------------------------
// Soft-label multinomial logistic regression
// ---------------------------------------------------------------------------

/// Multinomial logistic model over `k` categories with the last category as
/// reference; fitted against fractional ("soft") category labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMultinomial {
    /// One coefficient vector per non-reference category.
    pub coefficients: Vec<Vec<f64>>,
    pub categories: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl SoftMultinomial {
    /// Category probabilities for one design row, via a stabilized softmax.
    pub fn probabilities(&self, design_row: &[f64]) -> Vec<f64> {
        let mut logits: Vec<f64> = self
            .coefficients
            .iter()
            .map(|beta| design_row.iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect();
        logits.push(0.0);
        softmax(&logits)
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Expected multinomial log-likelihood of soft labels under coefficients.
fn soft_objective(rows: &[Vec<f64>], soft: &[Vec<f64>], model: &SoftMultinomial) -> f64 {
    let mut total = 0.0;
    for (row, q) in rows.iter().zip(soft) {
        let probs = model.probabilities(row);
        for (qk, pk) in q.iter().zip(&probs) {
            if *qk > 0.0 {
                total += qk * pk.max(1e-300).ln();
            }
        }
    }
    total
}

/// Fits the soft-label multinomial model by damped Newton steps.
///
/// Each step is halved until the objective does not decrease, so the fit
/// never lowers the expected log-likelihood of its starting point; the
/// mixture M-step relies on that.
pub fn fit_multinomial_soft(
    rows: &[Vec<f64>],
    soft: &[Vec<f64>],
    categories: usize,
    warm_start: Option<&SoftMultinomial>,
    max_iter: usize,
    tol: f64,
) -> Result<SoftMultinomial> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid("multinomial fit requires rows"));
    }
    let p = rows[0].len();
    if categories < 2 {
        return Err(Error::invalid("multinomial fit requires >= 2 categories"));
    }
    if soft.len() != n || soft.iter().any(|q| q.len() != categories) {
        return Err(Error::invalid("soft labels must be n x categories"));
    }
    let k1 = categories - 1;
    let dim = k1 * p;

    let mut model = match warm_start {
        Some(m) if m.categories == categories && m.coefficients.len() == k1 => m.clone(),
        _ => SoftMultinomial {
            coefficients: vec![vec![0.0; p]; k1],
            categories,
            converged: false,
            iterations: 0,
        },
    };

    let mut converged = false;
    let mut iterations = 0;
    let mut objective = soft_objective(rows, soft, &model);

    for iter in 1..=max_iter {
        iterations = iter;
        let mut grad: DVector<f64> = DVector::zeros(dim);
        let mut hess: DMatrix<f64> = DMatrix::zeros(dim, dim);
        for (row, q) in rows.iter().zip(soft) {
            let probs = model.probabilities(row);
            for a in 0..k1 {
                let resid = q[a] - probs[a];
                for j in 0..p {
                    grad[a * p + j] += row[j] * resid;
                }
                for b in a..k1 {
                    let w = if a == b {
                        probs[a] * (1.0 - probs[a])
                    } else {
                        -probs[a] * probs[b]
                    };
                    for j in 0..p {
                        for m in 0..p {
                            hess[(a * p + j, b * p + m)] += w * row[j] * row[m];
                        }
                    }
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
            hess[(a, a)] += 1e-10;
        }
        let chol = hess.cholesky().ok_or(Error::SingularDesign)?;
        let delta = chol.solve(&grad);

        // Damped update: halve the step until the objective does not drop.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let mut candidate = model.clone();
            for a in 0..k1 {
                for j in 0..p {
                    candidate.coefficients[a][j] += step * delta[a * p + j];
                }
            }
            let cand_obj = soft_objective(rows, soft, &candidate);
            if cand_obj >= objective - 1e-12 {
                model = candidate;
                objective = cand_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if step * delta.amax() < tol {
            converged = true;
            break;
        }
    }

    model.converged = converged;
    model.iterations = iterations;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Arm, CovariateSchema, CovariateValue, CovariateVector, ObservedRecord, Outcome};
    use crate::rng::substream;
    use crate::util::logit;
    use rand::Rng;

    fn design_from_values(values: &[Vec<f64>]) -> DesignMatrix {
        let p = values.first().map_or(0, |v| v.len());
        DesignMatrix {
            column_names: std::iter::once("(intercept)".to_string())
                .chain((0..p).map(|j| format!("x{j}")))
                .collect(),
            rows: values
                .iter()
                .map(|v| std::iter::once(1.0).chain(v.iter().copied()).collect())
                .collect(),
        }
    }

    #[test]
    fn intercept_only_fit_is_logit_of_rate() {
        let design = design_from_values(&vec![vec![]; 10]);
        let labels = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let model = fit_logistic(&design, &labels, None).unwrap();
        assert!(model.converged);
        assert!((model.coefficients[0] - logit(0.7)).abs() < 1e-7);
    }

    #[test]
    fn null_slopes_stay_within_three_standard_errors() {
        // Labels independent of x: slope estimates should sit within 3 SEs of 0.
        let mut rng = substream(31, 0);
        let values: Vec<Vec<f64>> = (0..4000)
            .map(|_| vec![rng.random::<f64>() * 2.0 - 1.0])
            .collect();
        let labels: Vec<f64> = (0..4000)
            .map(|_| if rng.random_bool(0.4) { 1.0 } else { 0.0 })
            .collect();
        let design = design_from_values(&values);
        let model = fit_logistic(&design, &labels, None).unwrap();
        let se = model.covariance[1][1].sqrt();
        assert!(
            model.coefficients[1].abs() < 3.0 * se,
            "slope {} vs se {}",
            model.coefficients[1],
            se
        );
    }

    #[test]
    fn planted_coefficients_are_recovered() {
        let truth = [-0.5, 1.0];
        let mut rng = substream(17, 0);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..5000 {
            let x: f64 = rng.random::<f64>() * 2.0 - 1.0;
            let p = expit(truth[0] + truth[1] * x);
            values.push(vec![x]);
            labels.push(if rng.random_bool(p) { 1.0 } else { 0.0 });
        }
        let design = design_from_values(&values);
        let model = fit_logistic(&design, &labels, None).unwrap();
        for j in 0..2 {
            let se = model.covariance[j][j].sqrt();
            assert!(
                (model.coefficients[j] - truth[j]).abs() < 3.0 * se,
                "coefficient {j}: {} vs {} (se {se})",
                model.coefficients[j],
                truth[j]
            );
        }
    }

    #[test]
    fn perfect_separation_is_detected() {
        let values: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0]).collect();
        let labels: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
        let design = design_from_values(&values);
        match fit_logistic(&design, &labels, None) {
            Err(Error::Separation) => {}
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn single_class_labels_rejected() {
        let design = design_from_values(&vec![vec![]; 5]);
        assert!(fit_logistic(&design, &[1.0; 5], None).is_err());
    }

    #[test]
    fn design_matrix_uses_schema_encoding() {
        let mut x1 = CovariateVector::empty();
        x1.push("site", CovariateValue::Categorical("b".into())).unwrap();
        let mut x2 = CovariateVector::empty();
        x2.push("site", CovariateValue::Categorical("a".into())).unwrap();
        let records = [
            ObservedRecord {
                id: "1".into(),
                z: Arm::Test,
                s: Some(true),
                y: Outcome::binary(true),
                x: x1,
            },
            ObservedRecord {
                id: "2".into(),
                z: Arm::Test,
                s: Some(false),
                y: Outcome::binary(false),
                x: x2,
            },
        ];
        let refs: Vec<&ObservedRecord> = records.iter().collect();
        let schema = CovariateSchema::infer(refs.iter().map(|r| &r.x)).unwrap();
        let design = DesignMatrix::build(&schema, &refs, &["site".into()]).unwrap();
        assert_eq!(design.column_names, vec!["(intercept)", "site=b"]);
        assert_eq!(design.rows, vec![vec![1.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn soft_multinomial_recovers_hard_label_shares() {
        // Intercept-only, hard labels with shares 0.5 / 0.3 / 0.2.
        let rows = vec![vec![1.0]; 100];
        let mut soft = Vec::new();
        for i in 0..100 {
            let mut q = vec![0.0; 3];
            let cat = if i < 50 {
                0
            } else if i < 80 {
                1
            } else {
                2
            };
            q[cat] = 1.0;
            soft.push(q);
        }
        let model = fit_multinomial_soft(&rows, &soft, 3, None, 200, 1e-10).unwrap();
        let probs = model.probabilities(&[1.0]);
        assert!((probs[0] - 0.5).abs() < 1e-6);
        assert!((probs[1] - 0.3).abs() < 1e-6);
        assert!((probs[2] - 0.2).abs() < 1e-6);
    }

    #[test]
    fn damped_newton_does_not_decrease_the_objective() {
        let mut rng = substream(5, 0);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![1.0, rng.random::<f64>() * 2.0 - 1.0])
            .collect();
        let soft: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let a: f64 = rng.random();
                let b: f64 = rng.random::<f64>() * (1.0 - a);
                vec![a, b, 1.0 - a - b]
            })
            .collect();
        let start = SoftMultinomial {
            coefficients: vec![vec![0.3, -0.2], vec![-0.1, 0.4]],
            categories: 3,
            converged: false,
            iterations: 0,
        };
        let before = soft_objective(&rows, &soft, &start);
        let fitted = fit_multinomial_soft(&rows, &soft, 3, Some(&start), 100, 1e-9).unwrap();
        let after = soft_objective(&rows, &soft, &fitted);
        assert!(after >= before - 1e-9, "objective fell: {before} -> {after}");
    }
}
