use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::model::Classifier;
use super::QuantError;
use crate::classes::ClassLabel;
use crate::exec::Exec;
use crate::gru::decide;
use crate::pipeline::Window;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub class: String,
    pub windows: usize,
    pub correct: usize,
    /// `None` when the class has no windows.
    pub accuracy: Option<f64>,
}

impl AccuracyRow {
    fn new(class: &str, windows: usize, correct: usize) -> Self {
        Self {
            class: class.to_string(),
            windows,
            correct,
            accuracy: (windows > 0).then(|| correct as f64 / windows as f64),
        }
    }
}

/// Test-set accuracy laid out like a per-class results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Every class in reporting order, empty room last.
    pub classes: Vec<AccuracyRow>,
    /// Person-present versus empty-room decision over all windows.
    pub presence: AccuracyRow,
    /// Unweighted mean over the activity classes that have windows.
    pub mean_activity: Option<f64>,
}

impl AccuracyReport {
    pub fn class(&self, class: ClassLabel) -> &AccuracyRow {
        &self.classes[class.id()]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}%", 100.0 * v));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:>7} {:>8} {:>9}",
            "class", "windows", "correct", "accuracy"
        );
        for r in self.classes.iter().chain([&self.presence]) {
            let _ = writeln!(
                s,
                "{:<10} {:>7} {:>8} {:>9}",
                r.class,
                r.windows,
                r.correct,
                pct(r.accuracy)
            );
        }
        let _ = writeln!(
            s,
            "{:<10} {:>7} {:>8} {:>9}",
            "mean",
            "",
            "",
            pct(self.mean_activity)
        );
        s
    }
}

/// Scores gated decisions of `model` against the labels of `data`.
/// Unlabelled windows are skipped.
pub fn accuracy_report(
    model: &dyn Classifier,
    data: &[Window],
    threshold: f64,
    exec: Exec,
) -> Result<AccuracyReport, QuantError> {
    let labelled: Vec<(&Window, ClassLabel)> = data
        .iter()
        .filter_map(|w| w.label.map(|l| (w, l)))
        .collect();
    let decided = exec.map(&labelled, |(w, _)| -> Result<ClassLabel, QuantError> {
        let (a, p) = model.logits(&w.features)?;
        Ok(decide(&a, &p, threshold).label)
    });
    let mut windows = [0usize; ClassLabel::ALL.len()];
    let mut correct = [0usize; ClassLabel::ALL.len()];
    let mut presence_ok = 0;
    for ((_, truth), got) in labelled.iter().zip(decided) {
        let got = got?;
        windows[truth.id()] += 1;
        correct[truth.id()] += usize::from(got == *truth);
        presence_ok +=
            usize::from((got == ClassLabel::NoPerson) == (*truth == ClassLabel::NoPerson));
    }
    let classes: Vec<AccuracyRow> = ClassLabel::ALL
        .iter()
        .map(|c| AccuracyRow::new(c.name(), windows[c.id()], correct[c.id()]))
        .collect();
    let activity: Vec<f64> = classes
        .iter()
        .zip(ClassLabel::ALL)
        .filter(|(_, c)| c.activity_index().is_some())
        .filter_map(|(r, _)| r.accuracy)
        .collect();
    Ok(AccuracyReport {
        classes,
        presence: AccuracyRow::new("presence", labelled.len(), presence_ok),
        mean_activity: (!activity.is_empty())
            .then(|| activity.iter().sum::<f64>() / activity.len() as f64),
    })
}
