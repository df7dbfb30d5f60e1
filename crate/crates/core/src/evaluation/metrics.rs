use super::{EvalError, Result};

/// Counts indexed `[truth][prediction]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_predictions(truth: &[usize], pred: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(EvalError::Input(format!(
                "{} labels but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(pred) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(EvalError::Input(format!(
                "{} counts for {classes} classes",
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.classes || pred >= self.classes {
            return Err(EvalError::Input(format!(
                "class ({truth}, {pred}) out of range for {} classes",
                self.classes
            )));
        }
        self.counts[truth * self.classes + pred] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn nonempty(&self) -> Result<f64> {
        match self.total() {
            0 => Err(EvalError::Input("confusion matrix is empty".into())),
            t => Ok(t as f64),
        }
    }

    pub fn accuracy(&self) -> Result<f64> {
        let total = self.nonempty()?;
        let hits: u64 = (0..self.classes).map(|c| self.get(c, c)).sum();
        Ok(hits as f64 / total)
    }

    /// `(f1, support)` per class; 0/0 precision or recall counts as 0.
    pub fn per_class_f1(&self) -> Vec<(f64, u64)> {
        (0..self.classes)
            .map(|c| {
                let tp = self.get(c, c) as f64;
                let support: u64 = (0..self.classes).map(|p| self.get(c, p)).sum();
                let predicted: u64 = (0..self.classes).map(|t| self.get(t, c)).sum();
                let denom = support as f64 + predicted as f64;
                let f1 = if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
                (f1, support)
            })
            .collect()
    }

    /// Unweighted mean of per-class F1 over every class of the vocabulary.
    pub fn macro_f1(&self) -> Result<f64> {
        self.nonempty()?;
        if self.classes == 0 {
            return Ok(0.0);
        }
        Ok(self.per_class_f1().iter().map(|(f, _)| f).sum::<f64>() / self.classes as f64)
    }

    pub fn weighted_f1(&self) -> Result<f64> {
        let total = self.nonempty()?;
        Ok(self
            .per_class_f1()
            .iter()
            .map(|&(f, s)| f * s as f64)
            .sum::<f64>()
            / total)
    }
}
