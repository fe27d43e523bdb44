//! Running sample statistics for Monte Carlo estimates.

use serde::Serialize;

/// Welford accumulator for mean and sample variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl SampleStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    /// `(mean - target) / stderr`; zero when both sides are exact.
    pub fn z_score(&self, target: f64) -> f64 {
        let se = self.stderr();
        let diff = self.mean - target;
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            }
        } else {
            diff / se
        }
    }
}

impl FromIterator<f64> for SampleStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = SampleStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

impl Extend<f64> for SampleStats {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

/// Complex number as an explicit `(re, im)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ONE: Complex = Complex { re: 1.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    /// `e^{-real_part - i * phase}`.
    pub fn exp_neg(real_part: f64, phase: f64) -> Self {
        let m = (-real_part).exp();
        Complex {
            re: m * phase.cos(),
            im: -m * phase.sin(),
        }
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn conj(&self) -> Self {
        Complex {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn sub(&self, other: &Complex) -> Complex {
        Complex {
            re: self.re - other.re,
            im: self.im - other.im,
        }
    }
}

/// Componentwise statistics of a complex-valued sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexStats {
    pub re: SampleStats,
    pub im: SampleStats,
}

impl ComplexStats {
    pub fn push(&mut self, z: Complex) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    pub fn mean(&self) -> Complex {
        Complex::new(self.re.mean(), self.im.mean())
    }

    /// Standard error of the complex mean in modulus,
    /// `sqrt(se_re² + se_im²)`.
    pub fn stderr(&self) -> f64 {
        self.re.stderr().hypot(self.im.stderr())
    }

    pub fn count(&self) -> u64 {
        self.re.count()
    }
}

impl FromIterator<Complex> for ComplexStats {
    fn from_iter<I: IntoIterator<Item = Complex>>(iter: I) -> Self {
        let mut s = ComplexStats::default();
        for z in iter {
            s.push(z);
        }
        s
    }
}
