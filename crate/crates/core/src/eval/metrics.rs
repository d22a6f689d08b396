use std::io::Write;

use crate::error::{Error, Result};
use crate::model::EmbeddingStore;
use crate::schema::LabeledCell;

/// `1` iff `score >= threshold`.
pub fn classify(score: f64, threshold: f64) -> u8 {
    u8::from(score >= threshold)
}

/// Confusion counts at a fixed threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, prediction: u8, label: u8) {
        match (prediction != 0, label != 0) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

/// Confusion counts of binary predictions against labels.
pub fn f1_report(predictions: &[u8], labels: &[u8]) -> Result<Confusion> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    let mut c = Confusion::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        c.add(p, l);
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MicroReport {
    pub pooled: Confusion,
    /// Unweighted mean of the per-dataset F1 scores.
    pub mean_f1: f64,
}

impl MicroReport {
    pub fn f1(&self) -> f64 {
        self.pooled.f1()
    }
}

/// Pools confusion counts across datasets before taking ratios.
pub fn micro_f1(reports: &[Confusion]) -> Result<MicroReport> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("micro F1 needs at least one report".into()));
    }
    let pooled = reports.iter().fold(Confusion::default(), |acc, c| acc.merge(c));
    let mean_f1 = reports.iter().map(Confusion::f1).sum::<f64>() / reports.len() as f64;
    Ok(MicroReport { pooled, mean_f1 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
}

/// One point per distinct score, by descending threshold. Each point
/// classifies every example scoring at or above its threshold as positive.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<PrPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument("scores and labels differ in length".into()));
    }
    let positives = labels.iter().filter(|&&l| l != 0).count() as u64;
    if positives == 0 || positives == labels.len() as u64 {
        return Err(Error::InvalidArgument(
            "precision/recall curve needs both positive and negative labels".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, positives),
            threshold: t,
        });
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetReport {
    pub name: String,
    pub confusion: Confusion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub threshold: f64,
    pub datasets: Vec<DatasetReport>,
    pub micro: MicroReport,
    /// Empty when every pooled label is the same.
    pub pr_curve: Vec<PrPoint>,
}

impl EvalReport {
    pub fn f1(&self) -> f64 {
        self.micro.f1()
    }

    /// `dataset \t tp \t fp \t tn \t fn \t precision \t recall \t f1`, one row
    /// per dataset followed by a pooled `micro` row.
    pub fn write_tsv(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "dataset\ttp\tfp\ttn\tfn\tprecision\trecall\tf1")?;
        let rows = self
            .datasets
            .iter()
            .map(|d| (d.name.as_str(), &d.confusion))
            .chain(std::iter::once(("micro", &self.micro.pooled)));
        for (name, c) in rows {
            writeln!(
                w,
                "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                c.precision(),
                c.recall(),
                c.f1()
            )?;
        }
        Ok(())
    }
}

pub fn write_pr_curve(points: &[PrPoint], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "threshold\tprecision\trecall")?;
    for p in points {
        writeln!(w, "{}\t{}\t{}", p.threshold, p.precision, p.recall)?;
    }
    Ok(())
}

/// Scores several named test sets against one model.
pub fn evaluate_datasets(
    model: &EmbeddingStore,
    datasets: &[(&str, &[LabeledCell])],
    threshold: f64,
) -> Result<EvalReport> {
    let mut reports = Vec::with_capacity(datasets.len());
    let mut all_scores = Vec::new();
    let mut all_labels = Vec::new();
    for (name, cells) in datasets {
        if cells.is_empty() {
            return Err(Error::InvalidArgument(format!("test set `{name}` is empty")));
        }
        let scores: Vec<f64> = cells.iter().map(|c| model.score_cell(c)).collect();
        let labels: Vec<u8> = cells.iter().map(|c| c.label).collect();
        let preds: Vec<u8> = scores.iter().map(|&s| classify(s, threshold)).collect();
        reports.push(DatasetReport {
            name: name.to_string(),
            confusion: f1_report(&preds, &labels)?,
        });
        all_scores.extend(scores);
        all_labels.extend(labels);
    }
    let confusions: Vec<Confusion> = reports.iter().map(|r| r.confusion).collect();
    let micro = micro_f1(&confusions)?;
    let pr = pr_curve(&all_scores, &all_labels).unwrap_or_default();
    Ok(EvalReport {
        threshold,
        datasets: reports,
        micro,
        pr_curve: pr,
    })
}

/// Scores one test set; see [`evaluate_datasets`].
pub fn evaluate(model: &EmbeddingStore, test: &[LabeledCell], threshold: f64) -> Result<EvalReport> {
    evaluate_datasets(model, &[("test", test)], threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(classify(0.7, 0.5), 1);
        assert_eq!(classify(0.5, 0.5), 1);
        assert_eq!(classify(0.49, 0.5), 0);
    }

    #[test]
    fn f1_examples() {
        let c = f1_report(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(c, Confusion { tp: 1, fp: 1, tn: 1, fn_: 1 });
        let c = Confusion { tp: 1, fp: 1, tn: 0, fn_: 0 };
        assert_eq!(c.precision(), 0.5);
        assert_eq!(c.recall(), 1.0);
        assert!((c.f1() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_report(&[1, 0, 1], &[1, 0, 1]).unwrap().f1(), 1.0);
        assert_eq!(f1_report(&[0, 0], &[1, 0]).unwrap().f1(), 0.0);
        assert!(f1_report(&[0], &[1, 0]).is_err());
        assert!(f1_report(&[], &[]).is_err());
    }

    #[test]
    fn micro_examples() {
        let a = Confusion { tp: 1, fp: 1, tn: 0, fn_: 0 };
        let b = Confusion { tp: 1, fp: 0, tn: 0, fn_: 1 };
        let m = micro_f1(&[a, b]).unwrap();
        assert!((m.pooled.precision() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.pooled.recall() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(micro_f1(&[a]).unwrap().f1(), a.f1());
        assert_eq!(micro_f1(&[a, a]).unwrap().f1(), a.f1());
        assert!(micro_f1(&[]).is_err());
    }

    #[test]
    fn pr_examples() {
        let p = pr_curve(&[0.9, 0.1], &[1, 0]).unwrap();
        assert_eq!(p[0], PrPoint { precision: 1.0, recall: 1.0, threshold: 0.9 });
        assert_eq!(p.len(), 2);

        let p = pr_curve(&[0.1, 0.2, 0.8, 0.9], &[1, 1, 0, 0]).unwrap();
        let last = p.last().unwrap();
        assert_eq!(last.recall, 1.0);
        assert_eq!(last.precision, 0.5);
        assert_eq!(p[0].recall, 0.0);

        let p = pr_curve(&[0.5, 0.5, 0.2], &[1, 0, 0]).unwrap();
        assert_eq!(p.len(), 2);
        assert!(pr_curve(&[0.5, 0.4], &[1, 1]).is_err());
    }
}
