//! Order-fixed summation.
//!
//! Every reduction in the engine goes through [`stable_sum`], which adds the
//! input slice in index order with a pairwise tree whose leaves are
//! Neumaier-compensated blocks. The tree shape depends only on the slice
//! length, so results are bitwise reproducible no matter how many workers
//! produced the terms.

const LEAF: usize = 64;

/// Neumaier (improved Kahan) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for Compensated {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Pairwise sum with compensated leaves.
pub fn stable_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut acc = Compensated::new();
        acc.extend(xs.iter().copied());
        return acc.value();
    }
    let mid = xs.len() / 2;
    let mut acc = Compensated::new();
    acc.add(stable_sum(&xs[..mid]));
    acc.add(stable_sum(&xs[mid..]));
    acc.value()
}

pub fn stable_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    stable_sum(xs) / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancels_catastrophic_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(stable_sum(&xs), 2.0);
    }

    #[test]
    fn long_harmonic_series_matches_reference() {
        let xs: Vec<f64> = (1..=100_000).map(|i| 1.0 / i as f64).collect();
        // H_n = ln n + gamma + 1/(2n) - 1/(12 n^2) + ...
        let n = 100_000f64;
        let reference = n.ln() + 0.577_215_664_901_532_9 + 0.5 / n - 1.0 / (12.0 * n * n);
        assert!((stable_sum(&xs) - reference).abs() < 1e-14);
    }

    #[test]
    fn empty_mean_is_zero() {
        assert_eq!(stable_mean(&[]), 0.0);
    }
}
