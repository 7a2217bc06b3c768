/// Batch-means accumulator for a ratio estimate `sum(num) / sum(den)`.
///
/// The measured slots are split into equal consecutive batches; the
/// standard error is the spread of per-batch ratios over `sqrt(batches)`.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_len: u64,
    num: Vec<f64>,
    den: Vec<f64>,
}

impl BatchMeans {
    pub fn new(slots: u64, batches: usize) -> Self {
        let batches = batches.max(1);
        BatchMeans {
            batch_len: (slots / batches as u64).max(1),
            num: vec![0.0; batches],
            den: vec![0.0; batches],
        }
    }

    /// Record `num / den` mass observed in measured slot `k` (0-based).
    #[inline]
    pub fn add(&mut self, k: u64, num: f64, den: f64) {
        // the remainder of an uneven split goes into the last batch
        let b = ((k / self.batch_len) as usize).min(self.num.len() - 1);
        self.num[b] += num;
        self.den[b] += den;
    }

    pub fn total_den(&self) -> f64 {
        self.den.iter().sum()
    }

    /// Point estimate, `None` when nothing was observed.
    pub fn mean(&self) -> Option<f64> {
        let den = self.total_den();
        (den > 0.0).then(|| self.num.iter().sum::<f64>() / den)
    }

    /// Standard error from batch ratios; zero with fewer than two usable batches.
    pub fn std_error(&self) -> f64 {
        let ratios: Vec<f64> = self
            .num
            .iter()
            .zip(&self.den)
            .filter(|(_, &d)| d > 0.0)
            .map(|(&n, &d)| n / d)
            .collect();
        let b = ratios.len();
        if b < 2 {
            return 0.0;
        }
        let mean = ratios.iter().sum::<f64>() / b as f64;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    }
}
