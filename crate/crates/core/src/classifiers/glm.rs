//! Logistic regression fitted by damped Newton iterations on the
//! L2-penalized Bernoulli log-likelihood. The intercept is not penalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{sigmoid, ClassifierError, ModelSpec, Result};
use crate::data::{Dataset, Standardizer};

/// Key of the intercept in exported coefficient maps.
pub const INTERCEPT_NAME: &str = "(Intercept)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    /// `[intercept, beta_1, ..., beta_d]`.
    pub coefficients: Vec<f64>,
    pub feature_names: Vec<String>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the tolerance was met.
    pub converged: bool,
}

impl GlmModel {
    pub fn from_coefficients(coefficients: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if coefficients.len() != feature_names.len() + 1 {
            return Err(ClassifierError::InvalidCoefficients(format!(
                "{} coefficients for {} features",
                coefficients.len(),
                feature_names.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(ClassifierError::InvalidCoefficients(
                "non-finite coefficient".into(),
            ));
        }
        Ok(Self {
            coefficients,
            feature_names,
            iterations: 0,
            converged: true,
        })
    }

    /// Equivalent model on the raw scale of a model fitted to rows
    /// standardized with `s`.
    pub fn unstandardized(&self, s: &Standardizer) -> Self {
        let mut coefficients = self.coefficients.clone();
        for (j, b) in coefficients[1..].iter_mut().enumerate() {
            let scale = if s.stds[j] > 0.0 { s.stds[j] } else { 1.0 };
            *b /= scale;
        }
        let shift: f64 = coefficients[1..].iter().zip(&s.means).map(|(b, m)| b * m).sum();
        coefficients[0] -= shift;
        Self {
            coefficients,
            ..self.clone()
        }
    }

    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(row))
    }

    /// Ordered `name -> value` map with the intercept first.
    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        map.insert(INTERCEPT_NAME.into(), Value::from(self.coefficients[0]));
        for (name, c) in self.feature_names.iter().zip(&self.coefficients[1..]) {
            map.insert(name.clone(), Value::from(*c));
        }
        Value::Object(map)
    }

    /// Reads a map produced by [`GlmModel::to_json`]; feature order follows
    /// the map order after the intercept.
    pub fn from_json(value: &Value) -> Result<Self> {
        let map = value.as_object().ok_or_else(|| {
            ClassifierError::InvalidCoefficients("expected a JSON object".into())
        })?;
        let intercept = map
            .get(INTERCEPT_NAME)
            .and_then(Value::as_f64)
            .ok_or_else(|| {
                ClassifierError::InvalidCoefficients(format!("missing numeric '{INTERCEPT_NAME}'"))
            })?;
        let mut coefficients = vec![intercept];
        let mut names = Vec::new();
        for (k, v) in map.iter().filter(|(k, _)| k.as_str() != INTERCEPT_NAME) {
            let c = v.as_f64().ok_or_else(|| {
                ClassifierError::InvalidCoefficients(format!("'{k}' is not a number"))
            })?;
            names.push(k.clone());
            coefficients.push(c);
        }
        Self::from_coefficients(coefficients, names)
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

struct Problem<'a> {
    train: &'a Dataset,
    ridge: f64,
}

impl Problem<'_> {
    fn eta(&self, beta: &[f64], i: usize) -> f64 {
        beta[0]
            + beta[1..]
                .iter()
                .zip(self.train.row(i))
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }

    /// Penalized log-likelihood.
    fn objective(&self, beta: &[f64]) -> f64 {
        let ll: f64 = (0..self.train.len())
            .map(|i| {
                let eta = self.eta(beta, i);
                f64::from(self.train.label(i)) * eta - softplus(eta)
            })
            .sum();
        ll - 0.5 * self.ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
    }

    fn gradient_hessian(&self, beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = beta.len();
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        let mut x = vec![1.0; p];
        for i in 0..self.train.len() {
            x[1..].copy_from_slice(self.train.row(i));
            let mu = sigmoid(self.eta(beta, i));
            let resid = f64::from(self.train.label(i)) - mu;
            let w = mu * (1.0 - mu);
            for a in 0..p {
                g[a] += resid * x[a];
                let wa = w * x[a];
                for b in 0..=a {
                    h[(a, b)] += wa * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        for a in 1..p {
            g[a] -= self.ridge * beta[a];
            h[(a, a)] += self.ridge;
        }
        (g, h)
    }
}

/// Gradient of the penalized log-likelihood at `beta`; zero at the optimum.
pub fn penalized_gradient(train: &Dataset, beta: &[f64], ridge: f64) -> Vec<f64> {
    Problem { train, ridge }
        .gradient_hessian(beta)
        .0
        .iter()
        .copied()
        .collect()
}

/// Penalized log-likelihood at `beta`.
pub fn penalized_log_likelihood(train: &Dataset, beta: &[f64], ridge: f64) -> f64 {
    Problem { train, ridge }.objective(beta)
}

pub fn fit_glm(train: &Dataset, spec: &ModelSpec) -> Result<GlmModel> {
    let positives = train.minority_count();
    if positives == 0 || positives == train.len() {
        return Err(ClassifierError::SingleClassTrainingSet {
            label: u8::from(positives > 0),
        });
    }
    let params = &spec.glm;
    let problem = Problem {
        train,
        ridge: params.l2_ridge,
    };
    let p = train.n_features() + 1;
    let mut beta = vec![0.0; p];
    let mut current = problem.objective(&beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let (g, mut h) = problem.gradient_hessian(&beta);
        // Newton direction solves H d = g (H is the negative Hessian).
        let step = loop {
            if let Some(chol) = h.clone().cholesky() {
                break chol.solve(&g);
            }
            for a in 0..p {
                h[(a, a)] += 1e-8 * (1.0 + h[(a, a)].abs());
            }
        };
        let mut t = 1.0;
        let mut next;
        let mut next_value;
        loop {
            next = beta.iter().zip(step.iter()).map(|(b, d)| b + t * d).collect::<Vec<_>>();
            next_value = problem.objective(&next);
            if next_value >= current - 1e-12 * current.abs() || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        let change = step.iter().map(|d| (t * d).abs()).fold(0.0, f64::max);
        beta = next;
        current = next_value;
        if change <= params.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("glm: iteration cap {} reached before convergence", params.max_iterations);
    }
    Ok(GlmModel {
        coefficients: beta,
        feature_names: train.feature_names().to_vec(),
        iterations,
        converged,
    })
}
