use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::model::Classifier;
use super::QuantError;
use crate::classes::ClassLabel;
use crate::exec::Exec;
use crate::gru::decide;
use crate::pipeline::Window;

/// Agreement of a candidate model with the reference on one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    /// Class name, or `all` for the summary row.
    pub class: String,
    pub windows: usize,
    /// Fraction of windows on which both models decide the same label.
    pub agreement: Option<f64>,
    /// Mean and max absolute logit difference over both heads.
    pub mean_abs_logit_dev: Option<f64>,
    pub max_abs_logit_dev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub candidate: String,
    /// One row per class in reporting order, then the summary row.
    pub rows: Vec<AgreementRow>,
    pub reference_weight_bytes: usize,
    pub candidate_weight_bytes: usize,
    pub weight_ratio: f64,
}

impl AgreementReport {
    pub fn summary(&self) -> &AgreementRow {
        self.rows.last().expect("summary row")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}%", 100.0 * v));
        let num = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        let mut s = String::new();
        let _ = writeln!(s, "agreement of {} with fp32", self.candidate);
        let _ = writeln!(
            s,
            "{:<10} {:>7} {:>10} {:>10} {:>10}",
            "class", "windows", "agree", "mean|dl|", "max|dl|"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<10} {:>7} {:>10} {:>10} {:>10}",
                r.class,
                r.windows,
                pct(r.agreement),
                num(r.mean_abs_logit_dev),
                num(r.max_abs_logit_dev)
            );
        }
        let _ = writeln!(
            s,
            "weight payload: {} B vs {} B (ratio {:.4})",
            self.candidate_weight_bytes, self.reference_weight_bytes, self.weight_ratio
        );
        s
    }
}

#[derive(Default)]
struct Tally {
    windows: usize,
    agree: usize,
    dev_sum: f64,
    dev_count: usize,
    dev_max: f64,
}

impl Tally {
    fn add(&mut self, agree: bool, devs: &[f64]) {
        self.windows += 1;
        self.agree += usize::from(agree);
        self.dev_sum += devs.iter().sum::<f64>();
        self.dev_count += devs.len();
        self.dev_max = devs.iter().copied().fold(self.dev_max, f64::max);
    }

    fn row(&self, class: &str) -> AgreementRow {
        let some = |v: f64| (self.windows > 0).then_some(v);
        AgreementRow {
            class: class.to_string(),
            windows: self.windows,
            agreement: some(self.agree as f64 / self.windows.max(1) as f64),
            mean_abs_logit_dev: some(self.dev_sum / self.dev_count.max(1) as f64),
            max_abs_logit_dev: some(self.dev_max),
        }
    }
}

/// Runs both models over `data` and compares gated decisions and raw logits.
/// Unlabelled windows count only towards the summary row.
pub fn agreement_report(
    reference: &dyn Classifier,
    candidate: &dyn Classifier,
    candidate_name: &str,
    data: &[Window],
    threshold: f64,
    exec: Exec,
) -> Result<AgreementReport, QuantError> {
    if reference.config() != candidate.config() {
        return Err(QuantError::Shape(
            "models have different architectures".into(),
        ));
    }
    let outcomes = exec.map(data, |w| -> Result<(bool, Vec<f64>), QuantError> {
        let (ra, rp) = reference.logits(&w.features)?;
        let (ca, cp) = candidate.logits(&w.features)?;
        let agree = decide(&ra, &rp, threshold).label == decide(&ca, &cp, threshold).label;
        let devs = ra
            .iter()
            .chain(&rp)
            .zip(ca.iter().chain(&cp))
            .map(|(a, b)| f64::from((a - b).abs()))
            .collect();
        Ok((agree, devs))
    });
    let mut per_class: Vec<Tally> = ClassLabel::ALL.iter().map(|_| Tally::default()).collect();
    let mut all = Tally::default();
    for (w, o) in data.iter().zip(outcomes) {
        let (agree, devs) = o?;
        if let Some(label) = w.label {
            per_class[label.id()].add(agree, &devs);
        }
        all.add(agree, &devs);
    }
    let mut rows: Vec<AgreementRow> = ClassLabel::ALL
        .iter()
        .zip(&per_class)
        .map(|(c, t)| t.row(c.name()))
        .collect();
    rows.push(all.row("all"));
    let reference_weight_bytes = reference.weight_payload_bytes();
    let candidate_weight_bytes = candidate.weight_payload_bytes();
    Ok(AgreementReport {
        candidate: candidate_name.to_string(),
        rows,
        reference_weight_bytes,
        candidate_weight_bytes,
        weight_ratio: candidate_weight_bytes as f64 / reference_weight_bytes as f64,
    })
}
