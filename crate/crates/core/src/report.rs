//! Serializable measurement records shared by the verification modules.

use serde::{Deserialize, Serialize};

use crate::grid::DiscGrid;

/// Residual of one law on one grid: `{law, norm_max, norm_l1, h, order_estimate}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub law: String,
    pub norm_max: f64,
    pub norm_l1: f64,
    pub h: f64,
    pub order_estimate: Option<f64>,
}

impl ResidualReport {
    /// Max and weighted-L¹ norms of a multi-component field over the nodes
    /// selected by `keep`.
    pub fn measure(law: &str, grid: &DiscGrid, comps: &[&[f64]], keep: impl Fn(usize) -> bool) -> Self {
        let mut norm_max = 0.0f64;
        let mut norm_l1 = 0.0;
        for p in (0..grid.len()).filter(|&p| keep(p)) {
            let m = comps.iter().map(|c| c[p].abs()).fold(0.0, f64::max);
            norm_max = norm_max.max(m);
            norm_l1 += grid.weight(p) * m;
        }
        Self {
            law: law.to_string(),
            norm_max,
            norm_l1,
            h: grid.h(),
            order_estimate: None,
        }
    }

    /// Fills `order_estimate` from a coarser report of the same law.
    pub fn with_order_from(mut self, coarser: &ResidualReport) -> Self {
        self.order_estimate = Some(observed_order(coarser.h, coarser.norm_max, self.h, self.norm_max));
        self
    }
}

/// `log(e1/e2) / log(h1/h2)`.
pub fn observed_order(h1: f64, e1: f64, h2: f64, e2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    least_squares_slope(&xs, &ys)
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// One named check with its tolerance, as written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tol`.
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            pass: value <= tol,
        }
    }

    /// Passes when `value >= tol`.
    pub fn at_least(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            pass: value >= tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders() {
        assert!((observed_order(0.1, 1e-2, 0.05, 2.5e-3) - 2.0).abs() < 1e-12);
        let hs = [0.1, 0.05, 0.025];
        let es: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powf(1.5)).collect();
        assert!((fitted_order(&hs, &es) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn checks() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::at_least("b", 0.5, 0.9).pass);
        let json = serde_json::to_string(&Check::at_most("c", 0.25, 1.0)).unwrap();
        assert_eq!(json, r#"{"name":"c","value":0.25,"tol":1.0,"pass":true}"#);
    }
}
