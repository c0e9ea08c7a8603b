//! Uniformly sampled vector-valued paths.

use crate::error::{invalid, Error, Result};

/// A path sampled on `t0, t0 + dt, ..., t0 + n*dt`. Values are stored
/// point-major: the `dim` coordinates of point `k` are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    t0: f64,
    dt: f64,
    dim: usize,
    data: Vec<f64>,
}

impl SampledPath {
    pub fn new(t0: f64, dt: f64, dim: usize, data: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("grid step must be positive, got {dt}")));
        }
        if dim == 0 {
            return Err(invalid("path dimension must be positive"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!(
                "{} values do not form whole points of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { t0, dt, dim, data })
    }

    pub fn scalar(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(t0, dt, 1, values)
    }

    pub fn zeros(t0: f64, dt: f64, n_steps: usize, dim: usize) -> Self {
        Self {
            t0,
            dt,
            dim,
            data: vec![0.0; (n_steps + 1) * dim],
        }
    }

    pub fn from_fn(t0: f64, dt: f64, n_steps: usize, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut p = Self::zeros(t0, dt, n_steps, dim);
        for k in 0..=n_steps {
            let t = t0 + k as f64 * dt;
            f(t, &mut p.data[k * dim..(k + 1) * dim]);
        }
        p
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Number of sample points (steps + 1).
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn n_steps(&self) -> usize {
        self.len() - 1
    }
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
    pub fn end_time(&self) -> f64 {
        self.time(self.n_steps())
    }
    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }
    pub fn value(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }
    pub fn value_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    pub fn last(&self) -> &[f64] {
        self.value(self.n_steps())
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.data.iter().skip(i).step_by(self.dim).copied().collect()
    }

    /// Index of the grid point closest to `t`, if `t` lies on the grid span.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if k < -1e-9 || k > self.n_steps() as f64 + 1e-9 || (x - k).abs() > 1e-6 {
            return None;
        }
        Some(k as usize)
    }

    /// Linear interpolation at an arbitrary time inside the span.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        let x = ((t - self.t0) / self.dt).clamp(0.0, self.n_steps() as f64);
        let k = (x.floor() as usize).min(self.n_steps().saturating_sub(1));
        let w = x - k as f64;
        if self.n_steps() == 0 {
            out.copy_from_slice(self.value(0));
            return;
        }
        let (a, b) = (self.value(k), self.value(k + 1));
        for i in 0..self.dim {
            out[i] = (1.0 - w) * a[i] + w * b[i];
        }
    }

    /// Sub-path on grid indices `lo..=hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> Self {
        Self {
            t0: self.time(lo),
            dt: self.dt,
            dim: self.dim,
            data: self.data[lo * self.dim..(hi + 1) * self.dim].to_vec(),
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.len() == other.len()
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-12 * self.dt.max(self.t0.abs())
    }

    /// `self + c * other` on a common grid.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::Dimension("paths live on different grids".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + c * b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&x| f(x)).collect(),
            ..*self
        }
    }

    /// Increments `x_{k+1} - x_k`, point-major, `n_steps * dim` values.
    pub fn increments(&self) -> Vec<f64> {
        let d = self.dim;
        (0..self.n_steps() * d)
            .map(|i| self.data[i + d] - self.data[i])
            .collect()
    }

    /// Rebuild a path from its initial value and increments.
    pub fn from_increments(t0: f64, dt: f64, start: &[f64], incr: &[f64]) -> Result<Self> {
        let dim = start.len();
        if dim == 0 || !incr.len().is_multiple_of(dim) {
            return Err(Error::Dimension("increments do not match start point".into()));
        }
        let mut data = Vec::with_capacity(start.len() + incr.len());
        data.extend_from_slice(start);
        for (i, d) in incr.iter().enumerate() {
            let prev = data[i];
            data.push(prev + d);
        }
        Self::new(t0, dt, dim, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_round_trip() {
        let p = SampledPath::from_fn(0.0, 0.1, 10, 2, |t, x| {
            x[0] = t.sin();
            x[1] = t * t;
        });
        let q = SampledPath::from_increments(0.0, 0.1, p.value(0), &p.increments()).unwrap();
        for (a, b) in p.data().iter().zip(q.data()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(p.index_of(0.5), Some(5));
        assert_eq!(p.index_of(0.55), None);
    }

    #[test]
    fn interpolation_is_linear() {
        let p = SampledPath::scalar(1.0, 0.5, vec![0.0, 1.0, 3.0]).unwrap();
        let mut out = [0.0];
        p.interpolate(1.75, &mut out);
        assert!((out[0] - 2.0).abs() < 1e-15);
        p.interpolate(5.0, &mut out);
        assert_eq!(out[0], 3.0);
    }
}
