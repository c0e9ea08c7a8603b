//! Monte-Carlo accumulators with an order-independent merge.

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.mean - target).abs() / self.stderr
        } else if self.mean == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAcc {
    pub n: usize,
    pub sum: f64,
    pub sumsq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
        self
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean(),
            stderr: (self.variance() / self.n as f64).sqrt(),
            n: self.n,
        }
    }
}

impl FromIterator<f64> for MeanAcc {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Mean of `values` with its standard error (pairwise-free two-pass form).
pub fn mean_stderr(values: &[f64]) -> Estimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        f64::NAN
    };
    Estimate {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
    }
}
