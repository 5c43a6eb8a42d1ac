use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A named point estimate, with its standard error when it has one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub description: String,
    pub observed: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Parameters, statistics and verdicts of one experiment run.
///
/// `invocation` and `wall_clock_seconds` are filled by callers that want
/// them; both are omitted from the JSON when absent, which keeps reports
/// byte-identical across runs by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub version: String,
    pub seed: u64,
    pub params: Value,
    pub statistics: Vec<Statistic>,
    pub criteria: Vec<Criterion>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invocation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl ExperimentReport {
    pub fn new(name: &str, seed: u64, params: impl Serialize) -> Self {
        Self {
            name: name.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            params: serde_json::to_value(params).unwrap_or(Value::Null),
            statistics: Vec::new(),
            criteria: Vec::new(),
            pass: true,
            invocation: None,
            wall_clock_seconds: None,
        }
    }

    pub fn stat(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.statistics.push(Statistic {
            name: name.into(),
            value,
            se: None,
        });
        self
    }

    pub fn stat_se(&mut self, name: impl Into<String>, value: f64, se: f64) -> &mut Self {
        self.statistics.push(Statistic {
            name: name.into(),
            value,
            se: Some(se),
        });
        self
    }

    pub fn criterion(
        &mut self,
        description: impl Into<String>,
        observed: f64,
        threshold: f64,
        pass: bool,
    ) -> &mut Self {
        self.pass &= pass;
        self.criteria.push(Criterion {
            description: description.into(),
            observed,
            threshold,
            pass,
        });
        self
    }

    /// Passes iff `observed <= threshold` (a NaN fails).
    pub fn at_most(
        &mut self,
        description: impl Into<String>,
        observed: f64,
        threshold: f64,
    ) -> &mut Self {
        self.criterion(description, observed, threshold, observed <= threshold)
    }

    /// Passes iff `observed < threshold` (a NaN fails).
    pub fn below(&mut self, description: impl Into<String>, observed: f64, threshold: f64) -> &mut Self {
        self.criterion(description, observed, threshold, observed < threshold)
    }

    pub fn statistic(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_is_conjunction() {
        let mut r = ExperimentReport::new("t", 1, serde_json::json!({"n": 3}));
        r.below("a", 1.0, 2.0);
        assert!(r.pass);
        r.below("b", f64::NAN, 2.0);
        assert!(!r.pass);
        r.below("c", 0.0, 1.0);
        assert!(!r.pass);
    }

    #[test]
    fn optional_fields_are_omitted() {
        let r = ExperimentReport::new("t", 1, ());
        let json = r.to_json();
        assert!(!json.contains("wall_clock") && !json.contains("invocation"));
        let back: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
