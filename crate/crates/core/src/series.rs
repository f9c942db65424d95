use serde::{Deserialize, Serialize};

/// A uniformly sampled scalar observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub label: String,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, t: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(t.len(), values.len(), "time and value columns differ in length");
        Self { label: label.into(), t, values }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Values with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.t
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= t0 && **t <= t1)
            .map(|(_, v)| *v)
            .collect()
    }

    pub fn map(&self, label: impl Into<String>, f: impl Fn(f64) -> f64) -> Self {
        Self::new(label, self.t.clone(), self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn mean_over(&self, t0: f64, t1: f64) -> Option<f64> {
        let w = self.window(t0, t1);
        (!w.is_empty()).then(|| w.iter().sum::<f64>() / w.len() as f64)
    }
}
