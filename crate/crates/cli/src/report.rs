//! JSON shape of a test report.
//!
//! Field order is the declaration order below and never changes, so
//! fixed-seed reports are byte-identical. Non-finite floats serialize as
//! JSON null (the multiplicative-factor statistic is +inf at u = 0).

use normtest_core::testkit::TestReport;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct JsonNorm {
    pub norm: String,
    pub gamma: f64,
}

#[derive(Debug, Serialize)]
pub struct JsonSelected {
    pub index: usize,
    pub norm: String,
}

#[derive(Debug, Serialize)]
pub struct JsonComparators {
    pub bonferroni_p: f64,
    pub cauchy_p: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct JsonSeed {
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Serialize)]
pub struct JsonReport {
    pub u_n: Vec<f64>,
    pub z_n: f64,
    pub per_norm: Vec<JsonNorm>,
    pub selected: JsonSelected,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub comparators: Option<JsonComparators>,
    pub seed: JsonSeed,
    pub family: Vec<String>,
}

impl JsonReport {
    pub fn from_report(r: &TestReport) -> JsonReport {
        JsonReport {
            u_n: r.u_n.clone(),
            z_n: r.z_n,
            per_norm: r
                .per_norm_gamma
                .iter()
                .map(|(spec, gamma)| JsonNorm {
                    norm: spec.name(),
                    gamma: *gamma,
                })
                .collect(),
            selected: JsonSelected {
                index: r.selected_norm,
                norm: r.family[r.selected_norm].name(),
            },
            p_value: r.p_value,
            reject: r.reject,
            alpha: r.alpha,
            comparators: r.comparators.as_ref().map(|c| JsonComparators {
                bonferroni_p: c.bonferroni_p,
                cauchy_p: c.cauchy_p,
            }),
            seed: JsonSeed {
                seed: r.seed.seed,
                stream: r.seed.stream,
            },
            family: r.family.iter().map(|spec| spec.name()).collect(),
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_pretty(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self).map(|mut s| {
            s.push('\n');
            s
        })
    }
}
