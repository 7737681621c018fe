use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AnswerRecord, CiThresholds, DatasetError};
use crate::questions::{Category, Question, QuestionType, TemplateSet};

pub const WRONG_ANSWER: &str = "wrong_answer";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Accuracy {
    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += usize::from(ok);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Accuracy,
    pub per_type: BTreeMap<String, Accuracy>,
    /// Factual questions split by the property they ask about.
    pub factual: BTreeMap<String, Accuracy>,
    pub errors: BTreeMap<String, usize>,
}

/// Scores answers against the dataset's questions. Every question needs
/// exactly one answer and vice versa.
pub fn evaluate_answers(questions: &[Question], answers: &[AnswerRecord]) -> Result<EvalReport, DatasetError> {
    let mut by_id: BTreeMap<&str, &AnswerRecord> = BTreeMap::new();
    for a in answers {
        if by_id.insert(a.question_id.as_str(), a).is_some() {
            return Err(DatasetError::Invalid(format!("duplicate answer for {}", a.question_id)));
        }
    }
    let ids: BTreeSet<&str> = questions.iter().map(|q| q.question_id.as_str()).collect();
    if let Some(extra) = by_id.keys().find(|k| !ids.contains(*k)) {
        return Err(DatasetError::Invalid(format!("answer for unknown question {extra}")));
    }
    let templates = TemplateSet::builtin();
    let mut report = EvalReport {
        overall: Accuracy::default(),
        per_type: QuestionType::ALL.iter().map(|t| (t.name().to_string(), Accuracy::default())).collect(),
        factual: BTreeMap::new(),
        errors: BTreeMap::new(),
    };
    for q in questions {
        let a = by_id
            .get(q.question_id.as_str())
            .ok_or_else(|| DatasetError::Invalid(format!("no answer for question {}", q.question_id)))?;
        let ok = a.answer.as_deref() == Some(q.answer.as_str());
        if !ok {
            let class = a.error.clone().unwrap_or_else(|| WRONG_ANSWER.to_string());
            *report.errors.entry(class).or_default() += 1;
        }
        report.overall.add(ok);
        report.per_type.entry(q.qtype.name().to_string()).or_default().add(ok);
        if q.qtype == QuestionType::Factual {
            let category = templates.get(&q.template).map_or("other", |t| t.category.name());
            report.factual.entry(category.to_string()).or_default().add(ok);
        }
    }
    Ok(report)
}

impl EvalReport {
    /// Thresholds the report falls below, as readable lines.
    pub fn failures(&self, ci: &CiThresholds) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(min) = ci.min_overall {
            if self.overall.accuracy < min {
                out.push(format!("overall accuracy {:.4} < {min}", self.overall.accuracy));
            }
        }
        for (t, min) in &ci.min_per_type {
            let acc = self.per_type.get(t).map_or(0.0, |a| a.accuracy);
            if acc < *min {
                out.push(format!("{t} accuracy {acc:.4} < {min}"));
            }
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = |f: &mut fmt::Formatter<'_>, name: &str, a: &Accuracy| {
            writeln!(f, "{name:<24} {:>7.2}%  {:>6}/{:<6}", 100.0 * a.accuracy, a.correct, a.total)
        };
        writeln!(f, "{:<24} {:>8}  {:>13}", "split", "accuracy", "correct/total")?;
        row(f, "all", &self.overall)?;
        for (t, a) in &self.per_type {
            row(f, t, a)?;
        }
        for c in [Category::Velocity, Category::Acceleration, Category::Collision, Category::Attribute] {
            if let Some(a) = self.factual.get(c.name()) {
                row(f, &format!("  factual/{}", c.name()), a)?;
            }
        }
        if !self.errors.is_empty() {
            writeln!(f, "errors:")?;
            for (k, n) in &self.errors {
                writeln!(f, "  {k:<22} {n}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Program;

    fn q(id: &str, qtype: QuestionType, template: &str, answer: &str) -> Question {
        Question {
            scene_id: "s".into(),
            question_id: id.into(),
            qtype,
            template: template.into(),
            text: String::new(),
            program: Program::default(),
            answer: answer.into(),
            observed_frames: 120,
        }
    }

    fn a(id: &str, answer: Option<&str>, error: Option<&str>) -> AnswerRecord {
        AnswerRecord {
            question_id: id.into(),
            scene_id: "s".into(),
            answer: answer.map(Into::into),
            error: error.map(Into::into),
            detail: None,
        }
    }

    fn fixture() -> Vec<Question> {
        vec![
            q("1", QuestionType::Factual, "velocity_fast", "true"),
            q("2", QuestionType::Factual, "collision_pair", "false"),
            q("3", QuestionType::Predictive, "predict_any", "true"),
            q("4", QuestionType::Factual, "acceleration_is", "false"),
        ]
    }

    #[test]
    fn all_correct() {
        let qs = fixture();
        let ans: Vec<_> = qs.iter().map(|q| a(&q.question_id, Some(&q.answer), None)).collect();
        let r = evaluate_answers(&qs, &ans).unwrap();
        assert_eq!(r.overall.accuracy, 1.0);
        assert!(r.per_type.values().filter(|a| a.total > 0).all(|a| a.accuracy == 1.0));
        assert!(r.errors.is_empty());
    }

    #[test]
    fn one_of_four_wrong() {
        let qs = fixture();
        let ans = [
            a("1", Some("true"), None),
            a("2", Some("true"), None),
            a("3", Some("true"), None),
            a("4", None, Some("unique_violation")),
        ];
        let ans = [&ans[..1], &ans[2..]].concat();
        let r = evaluate_answers(&qs, &[ans, vec![a("2", Some("false"), None)]].concat()).unwrap();
        assert_eq!(r.overall.accuracy, 0.75);
        assert_eq!(r.errors["unique_violation"], 1);
    }

    #[test]
    fn subtypes_aggregate_to_factual() {
        let qs = fixture();
        let ans = vec![a("1", Some("false"), None), a("2", Some("false"), None), a("3", None, Some("parse_failure")), a("4", Some("false"), None)];
        let r = evaluate_answers(&qs, &ans).unwrap();
        let f = r.per_type["factual"];
        let (c, t) = r.factual.values().fold((0, 0), |(c, t), a| (c + a.correct, t + a.total));
        assert_eq!((c, t), (f.correct, f.total));
        let weighted: f64 = r.factual.values().map(|a| a.accuracy * a.total as f64).sum::<f64>() / t as f64;
        assert!((weighted - f.accuracy).abs() < 1e-12);
        let per_type_total: usize = r.per_type.values().map(|a| a.total).sum();
        assert_eq!(per_type_total, r.overall.total);
        assert_eq!(r.errors[WRONG_ANSWER], 1);
        assert_eq!(r.errors["parse_failure"], 1);
    }

    #[test]
    fn id_mismatch_is_fatal() {
        let qs = fixture();
        let ans: Vec<_> = qs.iter().skip(1).map(|q| a(&q.question_id, Some(&q.answer), None)).collect();
        assert!(evaluate_answers(&qs, &ans).is_err());
        let mut extra: Vec<_> = qs.iter().map(|q| a(&q.question_id, Some(&q.answer), None)).collect();
        extra.push(a("99", Some("true"), None));
        assert!(evaluate_answers(&qs, &extra).is_err());
    }

    #[test]
    fn ci_thresholds() {
        let qs = fixture();
        let ans = vec![a("1", Some("false"), None), a("2", Some("false"), None), a("3", Some("true"), None), a("4", Some("false"), None)];
        let r = evaluate_answers(&qs, &ans).unwrap();
        let ci = CiThresholds { min_overall: Some(0.8), min_per_type: [("predictive".to_string(), 1.0)].into() };
        assert_eq!(r.failures(&ci).len(), 1);
        assert!(r.failures(&CiThresholds::default()).is_empty());
        assert!(r.to_string().contains("factual/velocity"));
    }
}
