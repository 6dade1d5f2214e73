use std::io::Write;

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Mlp;
use crate::train::zero_based;

/// Counts with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    /// From one-based class labels.
    pub fn from_labels(truth: &[u8], predicted: &[u8], classes: usize) -> Result<Self> {
        let mut m = Self::new(classes);
        let t = zero_based(truth, classes)?;
        let p = zero_based(predicted, classes)?;
        for (a, b) in t.into_iter().zip(p) {
            m.counts[a][b] += 1;
        }
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    /// Diagonal over row sum; `None` for classes absent from the truth.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect()
    }

    /// Header `true\predicted,1,2,...` then one row per true class.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = out;
        let header: Vec<String> = (1..=self.classes()).map(|c| c.to_string()).collect();
        writeln!(w, "true\\predicted,{}", header.join(","))?;
        for (i, row) in self.counts.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{}", i + 1, cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
}

/// Predicted classes of all rows, `chunk` rows per forward pass.
pub fn predict_all(model: &Mlp<f32>, x: ArrayView2<f32>, chunk: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(x.nrows());
    for block in x.axis_chunks_iter(Axis(0), chunk.max(1)) {
        out.extend(model.predict(block)?);
    }
    Ok(out)
}

pub fn evaluate(model: &Mlp<f32>, x: ArrayView2<f32>, labels: &[u8]) -> Result<Evaluation> {
    if x.nrows() == 0 {
        return Err(Error::Empty);
    }
    let predicted = predict_all(model, x, 256)?;
    let confusion = ConfusionMatrix::from_labels(labels, &predicted, model.num_classes())?;
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        per_class_accuracy: confusion.per_class_accuracy(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_predictors() {
        let truth = [1, 2, 3, 4, 4, 1, 1];
        let m = ConfusionMatrix::from_labels(&truth, &truth, 4).unwrap();
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.counts[3][3], 2);
        assert_eq!(m.total(), 7);
        let c = ConfusionMatrix::from_labels(&truth, &[1; 7], 4).unwrap();
        assert!((c.accuracy() - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(c.per_class_accuracy(), vec![Some(1.0), Some(0.0), Some(0.0), Some(0.0)]);
    }

    #[test]
    fn csv_layout() {
        let m = ConfusionMatrix::from_labels(&[1, 2], &[2, 2], 2).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "true\\predicted,1,2\n1,0,1\n2,0,1\n");
    }

    #[test]
    fn rejects_out_of_range_labels() {
        assert!(ConfusionMatrix::from_labels(&[0], &[1], 4).is_err());
        assert!(ConfusionMatrix::from_labels(&[5], &[1], 4).is_err());
    }

    #[test]
    fn absent_class_has_no_accuracy() {
        let m = ConfusionMatrix::from_labels(&[1, 1], &[1, 2], 3).unwrap();
        assert_eq!(m.per_class_accuracy(), vec![Some(0.5), None, None]);
    }
}
