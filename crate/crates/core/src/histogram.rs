use serde::{Deserialize, Serialize};

/// Fixed-edge histogram with under/overflow counters. Mergeable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
    log_spaced: bool,
}

impl Histogram {
    /// `bins` equal-width bins on `[lo, hi)`.
    pub fn linear(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(hi > lo && bins > 0, "invalid histogram range");
        let w = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + w * i as f64).collect();
        edges[bins] = hi;
        Self::from_edges_inner(edges, false)
    }

    /// `bins` bins with logarithmically spaced edges on `[lo, hi)`, `lo > 0`.
    pub fn logarithmic(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(lo > 0.0 && hi > lo && bins > 0, "invalid histogram range");
        let (a, b) = (lo.ln(), hi.ln());
        let mut edges: Vec<f64> = (0..=bins).map(|i| (a + (b - a) * i as f64 / bins as f64).exp()).collect();
        edges[0] = lo;
        edges[bins] = hi;
        Self::from_edges_inner(edges, true)
    }

    pub fn from_edges(edges: Vec<f64>) -> Self {
        assert!(edges.len() >= 2 && edges.windows(2).all(|w| w[1] > w[0]), "edges must increase");
        Self::from_edges_inner(edges, false)
    }

    fn from_edges_inner(edges: Vec<f64>, log_spaced: bool) -> Self {
        let n = edges.len() - 1;
        Histogram { edges, counts: vec![0; n], underflow: 0, overflow: 0, log_spaced }
    }

    pub fn add(&mut self, v: f64) {
        self.add_n(v, 1)
    }

    pub fn add_n(&mut self, v: f64, n: u64) {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        if v.is_nan() || v < lo {
            self.underflow += n;
            return;
        }
        if v >= hi {
            self.overflow += n;
            return;
        }
        // first edge strictly greater than v
        let idx = self.edges.partition_point(|&e| e <= v) - 1;
        let last = self.counts.len() - 1;
        self.counts[idx.min(last)] += n;
    }

    /// Panics if the binning differs.
    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.edges, other.edges, "cannot merge histograms with different edges");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
    pub fn underflow(&self) -> u64 {
        self.underflow
    }
    pub fn overflow(&self) -> u64 {
        self.overflow
    }
    pub fn is_log_spaced(&self) -> bool {
        self.log_spaced
    }
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Counts inside the range.
    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Every value ever added, including under/overflow.
    pub fn total(&self) -> u64 {
        self.in_range() + self.underflow + self.overflow
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// Geometric centre for log bins, arithmetic otherwise.
    pub fn center(&self, i: usize) -> f64 {
        if self.log_spaced {
            (self.edges[i] * self.edges[i + 1]).sqrt()
        } else {
            0.5 * (self.edges[i] + self.edges[i + 1])
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins()).map(|i| self.center(i)).collect()
    }

    /// Probability density per unit of the binned variable, normalised by `norm` counts.
    pub fn density_with(&self, norm: f64) -> Vec<f64> {
        self.counts.iter().enumerate().map(|(i, &c)| c as f64 / (norm * self.width(i))).collect()
    }

    /// Density normalised to unit mass over the in-range bins.
    pub fn density(&self) -> Vec<f64> {
        self.density_with(self.in_range().max(1) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_land_in_the_right_bins() {
        let mut h = Histogram::linear(0.0, 4.0, 4);
        for v in [0.0, 0.5, 1.0, 3.999, 4.0, -0.1, f64::NAN] {
            h.add(v);
        }
        assert_eq!(h.counts(), &[2, 1, 0, 1]);
        assert_eq!((h.underflow(), h.overflow(), h.total()), (2, 1, 7));
    }

    #[test]
    fn log_bins_have_constant_ratio() {
        let h = Histogram::logarithmic(1.0, 1000.0, 3);
        let e = h.edges();
        assert!((e[1] - 10.0).abs() < 1e-9 && (e[2] - 100.0).abs() < 1e-9);
        assert!((h.center(0) - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        let mut h = Histogram::logarithmic(0.1, 50.0, 17);
        for i in 0..1000 {
            h.add(0.1 + i as f64 * 0.04);
        }
        let mass: f64 = h.density().iter().enumerate().map(|(i, d)| d * h.width(i)).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = Histogram::linear(0.0, 1.0, 2);
        let mut b = a.clone();
        a.add(0.1);
        b.add(0.9);
        b.add(2.0);
        a.merge(&b);
        assert_eq!(a.counts(), &[1, 1]);
        assert_eq!(a.overflow(), 1);
    }
}
