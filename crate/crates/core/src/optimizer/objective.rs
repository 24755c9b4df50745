use std::fmt;
use std::sync::Arc;

use super::{OptimizerConfig, OptimizerError};
use crate::energy::green_capacity;
use crate::scenario::BaseStation;

/// M/G/1 processor-sharing latency indicator `vartheta * rho / (1 - rho)`.
pub fn latency_indicator(rho: f64, vartheta: f64) -> Result<f64, OptimizerError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(OptimizerError::Domain { index: 0, value: rho });
    }
    Ok(vartheta * rho / (1.0 - rho))
}

/// Latency weight `exp(kappa * theta * (rho - rho_hat))`.
pub fn weight(rho: f64, theta: f64, rho_hat: f64, kappa: f64) -> f64 {
    (kappa * theta * (rho - rho_hat)).exp()
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied performance model `f` with its derivative.
///
/// Accepted only if, on a grid over `[0, 1 - epsilon]`, `f` is non-negative (strictly
/// positive away from zero), non-decreasing and convex, and `df` agrees with a
/// finite difference of `f`.
#[derive(Clone)]
pub struct CustomModel {
    name: String,
    f: ScalarFn,
    df: ScalarFn,
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomModel").field("name", &self.name).finish_non_exhaustive()
    }
}

const CHECK_POINTS: usize = 2000;

impl CustomModel {
    pub fn register(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        epsilon: f64,
    ) -> Result<Self, OptimizerError> {
        let model = Self {
            name: name.into(),
            f: Arc::new(f),
            df: Arc::new(df),
        };
        model.check(epsilon)?;
        Ok(model)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn check(&self, epsilon: f64) -> Result<(), OptimizerError> {
        let hi = 1.0 - epsilon;
        let grid: Vec<f64> = (0..=CHECK_POINTS).map(|i| hi * i as f64 / CHECK_POINTS as f64).collect();
        let reject = |rho: f64, reason: String| Err(OptimizerError::ModelRejected { rho, reason });
        let vals: Vec<f64> = grid.iter().map(|&r| (self.f)(r)).collect();
        let ders: Vec<f64> = grid.iter().map(|&r| (self.df)(r)).collect();
        for (i, (&r, (&v, &d))) in grid.iter().zip(vals.iter().zip(&ders)).enumerate() {
            if !v.is_finite() || !d.is_finite() {
                return reject(r, "f or f' is not finite".into());
            }
            if v < 0.0 || (i > 0 && v <= 0.0) {
                return reject(r, format!("f = {v} is not positive"));
            }
            let scale = 1.0 + d.abs();
            if d < -1e-12 * scale {
                return reject(r, format!("f' = {d} is negative"));
            }
            if i > 0 && ders[i] < ders[i - 1] - 1e-9 * scale {
                return reject(r, format!("f' decreases from {} to {}", ders[i - 1], d));
            }
            if i > 0 && i < CHECK_POINTS {
                let h = grid[1] - grid[0];
                let fd = (vals[i + 1] - vals[i - 1]) / (2.0 * h);
                let curvature = (vals[i + 1] - 2.0 * v + vals[i - 1]) / (h * h);
                if (fd - d).abs() > 1e-3 * (1.0 + d.abs()) + curvature.abs() * h {
                    return reject(r, format!("f' = {d} disagrees with finite difference {fd}"));
                }
            }
        }
        Ok(())
    }
}

/// Per-station performance model `f(rho)`.
#[derive(Debug, Clone, Default)]
pub enum PerformanceModel {
    #[default]
    Mg1Latency,
    Custom(CustomModel),
}

impl PerformanceModel {
    #[inline]
    pub fn value(&self, rho: f64, vartheta: f64) -> f64 {
        match self {
            Self::Mg1Latency => vartheta * rho / (1.0 - rho),
            Self::Custom(m) => (m.f)(rho),
        }
    }

    #[inline]
    pub fn derivative(&self, rho: f64, vartheta: f64) -> f64 {
        match self {
            Self::Mg1Latency => {
                let g = 1.0 - rho;
                vartheta / (g * g)
            }
            Self::Custom(m) => (m.df)(rho),
        }
    }

    pub fn second_derivative(&self, rho: f64, vartheta: f64) -> f64 {
        match self {
            Self::Mg1Latency => {
                let g = 1.0 - rho;
                2.0 * vartheta / (g * g * g)
            }
            Self::Custom(m) => {
                let h = 1e-6;
                let (a, b) = if rho < h { (rho, rho + 2.0 * h) } else { (rho - h, rho + h) };
                ((m.df)(b) - (m.df)(a)) / (b - a)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationTerm {
    pub theta: f64,
    pub rho_hat: f64,
    pub vartheta: f64,
}

/// Separable objective `psi(rho) = sum_j w_j(rho_j) f(rho_j)` and its derivatives.
#[derive(Debug, Clone)]
pub struct Objective {
    kappa: f64,
    epsilon: f64,
    terms: Vec<StationTerm>,
    model: PerformanceModel,
}

impl Objective {
    pub fn new(kappa: f64, epsilon: f64, terms: Vec<StationTerm>) -> Self {
        Self {
            kappa,
            epsilon,
            terms,
            model: PerformanceModel::Mg1Latency,
        }
    }

    /// Objective for a station roster: green capacities from the energy model,
    /// `theta` and `vartheta` from each station.
    pub fn for_stations(stations: &[BaseStation], config: &OptimizerConfig) -> Self {
        let terms = stations
            .iter()
            .map(|bs| StationTerm {
                theta: bs.theta,
                rho_hat: green_capacity(bs, config.epsilon),
                vartheta: bs.vartheta,
            })
            .collect();
        Self::new(config.kappa, config.epsilon, terms)
    }

    pub fn with_model(mut self, model: PerformanceModel) -> Self {
        self.model = model;
        self
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn terms(&self) -> &[StationTerm] {
        &self.terms
    }

    pub fn model(&self) -> &PerformanceModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_domain(&self, rho: &[f64]) -> Result<(), OptimizerError> {
        if rho.len() != self.terms.len() {
            return Err(OptimizerError::Shape(format!(
                "load vector has {} entries, objective has {} stations",
                rho.len(),
                self.terms.len()
            )));
        }
        // convex combinations of values in [0, 1 - eps] may land an ulp outside
        let hi = 1.0 - self.epsilon + 1e-12;
        for (index, &value) in rho.iter().enumerate() {
            if !(0.0..=hi).contains(&value) {
                return Err(OptimizerError::Domain { index, value });
            }
        }
        Ok(())
    }

    #[inline]
    fn slope(&self, j: usize) -> f64 {
        self.kappa * self.terms[j].theta
    }

    /// The `j`-th summand `w_j(rho) f(rho)`.
    #[inline]
    pub fn term(&self, j: usize, rho: f64) -> f64 {
        let t = &self.terms[j];
        weight(rho, t.theta, t.rho_hat, self.kappa) * self.model.value(rho, t.vartheta)
    }

    /// `d/drho` of the `j`-th summand: `w (kappa theta f + f')`.
    #[inline]
    pub fn term_derivative(&self, j: usize, rho: f64) -> f64 {
        let t = &self.terms[j];
        let a = self.slope(j);
        weight(rho, t.theta, t.rho_hat, self.kappa) * (a * self.model.value(rho, t.vartheta) + self.model.derivative(rho, t.vartheta))
    }

    /// `d^2/drho^2` of the `j`-th summand: `w (a^2 f + 2 a f' + f'')`.
    pub fn term_second_derivative(&self, j: usize, rho: f64) -> f64 {
        let t = &self.terms[j];
        let a = self.slope(j);
        let m = &self.model;
        weight(rho, t.theta, t.rho_hat, self.kappa)
            * (a * a * m.value(rho, t.vartheta) + 2.0 * a * m.derivative(rho, t.vartheta) + m.second_derivative(rho, t.vartheta))
    }

    pub fn psi(&self, rho: &[f64]) -> Result<f64, OptimizerError> {
        self.check_domain(rho)?;
        Ok(rho.iter().enumerate().map(|(j, &r)| self.term(j, r)).sum())
    }

    /// Operation status `phi = grad psi`.
    pub fn status(&self, rho: &[f64]) -> Result<Vec<f64>, OptimizerError> {
        self.check_domain(rho)?;
        Ok(rho.iter().enumerate().map(|(j, &r)| self.term_derivative(j, r)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(kappa: f64, theta: f64, rho_hat: f64, vartheta: f64) -> Objective {
        Objective::new(kappa, 1e-3, vec![StationTerm { theta, rho_hat, vartheta }])
    }

    #[test]
    fn latency_examples() {
        assert_eq!(latency_indicator(0.0, 1.0).unwrap(), 0.0);
        assert!((latency_indicator(0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((latency_indicator(0.9, 2.0).unwrap() - 18.0).abs() < 1e-12);
        assert!(matches!(latency_indicator(1.0, 1.0), Err(OptimizerError::Domain { .. })));
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight(0.3, 0.8, 0.3, 4.0), 1.0);
        assert_eq!(weight(0.9, 0.8, 0.1, 0.0), 1.0);
        assert!((weight(0.5, 1.0, 0.25, 4.0) - std::f64::consts::E).abs() < 1e-12);
        assert!(weight(0.2, 1.0, 0.5, 4.0) < 1.0);
    }

    #[test]
    fn psi_examples() {
        let o = Objective::new(
            4.0,
            1e-3,
            vec![StationTerm { theta: 0.8, rho_hat: 0.2, vartheta: 1.0 }; 3],
        );
        assert_eq!(o.psi(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((obj(0.0, 0.8, 0.3, 1.0).psi(&[0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(o.psi(&[0.0, 0.9995, 0.0]), Err(OptimizerError::Domain { index: 1, .. })));
        assert!(matches!(o.psi(&[0.0, -0.1, 0.0]), Err(OptimizerError::Domain { .. })));
    }

    #[test]
    fn psi_matches_reverse_order_recomputation() {
        let terms = vec![
            StationTerm { theta: 0.8, rho_hat: 0.1, vartheta: 1.0 },
            StationTerm { theta: 0.3, rho_hat: 0.7, vartheta: 0.5 },
            StationTerm { theta: 1.0, rho_hat: 0.999, vartheta: 2.0 },
        ];
        let o = Objective::new(5.5, 1e-3, terms.clone());
        let rho = [0.42, 0.13, 0.77];
        let mut expected = 0.0;
        for j in (0..3).rev() {
            let t = terms[j];
            expected += (5.5 * t.theta * (rho[j] - t.rho_hat)).exp() * t.vartheta * rho[j] / (1.0 - rho[j]);
        }
        let got = o.psi(&rho).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn status_examples() {
        assert!((obj(0.0, 0.8, 0.3, 1.0).status(&[0.0]).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((obj(0.0, 0.8, 0.3, 1.0).status(&[0.5]).unwrap()[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn status_matches_closed_form() {
        // vartheta e^{a(rho - rho_hat)} (a rho (1 - rho) + 1) / (1 - rho)^2
        for &(kappa, theta, rho_hat, vartheta, rho) in &[
            (4.0, 0.8, 0.3, 1.0, 0.2),
            (8.0, 1.0, 0.001, 2.0, 0.9),
            (0.5, 0.2, 0.999, 0.7, 0.0),
        ] {
            let a: f64 = kappa * theta;
            let closed = vartheta * (a * (rho - rho_hat)).exp() * (a * rho * (1.0 - rho) + 1.0) / ((1.0 - rho) * (1.0 - rho));
            let got = obj(kappa, theta, rho_hat, vartheta).status(&[rho]).unwrap()[0];
            assert!(((got - closed) / closed).abs() < 1e-13, "{got} vs {closed}");
        }
    }

    #[test]
    fn second_derivative_matches_finite_difference_of_status() {
        let o = obj(6.0, 0.7, 0.4, 1.3);
        for &r in &[0.0, 0.1, 0.5, 0.9] {
            let h = 1e-6;
            let lo = if r < h { r } else { r - h };
            let fd = (o.term_derivative(0, r + h) - o.term_derivative(0, lo)) / (r + h - lo);
            let an = o.term_second_derivative(0, r);
            assert!(((fd - an) / an).abs() < 1e-5, "{r}: {fd} vs {an}");
        }
    }

    #[test]
    fn custom_latency_model_reproduces_default_bit_for_bit() {
        let custom = CustomModel::register(
            "latency",
            |r| latency_indicator(r, 1.0).unwrap(),
            |r| 1.0 / ((1.0 - r) * (1.0 - r)),
            1e-3,
        )
        .unwrap();
        let terms = vec![StationTerm { theta: 0.8, rho_hat: 0.25, vartheta: 1.0 }; 2];
        let base = Objective::new(4.0, 1e-3, terms.clone());
        let generalized = Objective::new(4.0, 1e-3, terms).with_model(PerformanceModel::Custom(custom));
        let rho = [0.31, 0.77];
        assert_eq!(base.psi(&rho).unwrap().to_bits(), generalized.psi(&rho).unwrap().to_bits());
        let (a, b) = (base.status(&rho).unwrap(), generalized.status(&rho).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn identity_model_accepted() {
        CustomModel::register("linear", |r| r, |_| 1.0, 1e-3).unwrap();
    }

    #[test]
    fn decreasing_model_rejected() {
        let err = CustomModel::register("neg", |r| -r, |_| -1.0, 1e-3).unwrap_err();
        assert!(matches!(err, OptimizerError::ModelRejected { .. }));
    }

    #[test]
    fn concave_model_rejected() {
        let err = CustomModel::register("sqrt", |r: f64| 1.0 + r.sqrt(), |r: f64| 0.5 / r.max(1e-12).sqrt(), 1e-3)
            .unwrap_err();
        assert!(matches!(err, OptimizerError::ModelRejected { .. }));
    }

    #[test]
    fn wrong_derivative_rejected() {
        let err = CustomModel::register("sq", |r| 1.0 + r * r, |r| r, 1e-3).unwrap_err();
        match err {
            OptimizerError::ModelRejected { reason, .. } => assert!(reason.contains("finite difference"), "{reason}"),
            e => panic!("{e}"),
        }
    }
}
