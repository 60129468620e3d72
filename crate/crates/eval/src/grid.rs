//! The evaluation grid: every manifest entry explained by every method.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hexar::baselines::{explain_all_components, explain_end_to_end};
use hexar::reasoner::TextReasoner;
use hexar::scenario::{generate_trace, grid_query, scenario, ManifestEntry};
use hexar::{explain_hexar_with_decision, ExplainerRegistry, Explanation, Trace};

use crate::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Hexar,
    EndToEnd,
    AllComponents,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Hexar, Method::EndToEnd, Method::AllComponents];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Hexar => "hexar",
            Method::EndToEnd => "end_to_end",
            Method::AllComponents => "all_components",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    /// Accepts both `end_to_end` and `end-to-end` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| format!("unknown method `{s}` (expected hexar, end_to_end or all_components)"))
    }
}

/// One explanation produced on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: String,
    pub scenario_id: u8,
    pub task_variant: u8,
    pub query_index: u8,
    pub method: Method,
    pub explanation_text: String,
    /// Producer ids joined with `+`.
    pub produced_by: String,
    pub reasoner_calls: usize,
    pub wall_time: f64,
    /// HEXAR only: whether the selected explainer is the one mapped to the
    /// scenario's relevant module.
    pub selected_ok: Option<bool>,
    /// HEXAR only: `failure_heuristic` or `query_classifier`.
    pub selection_stage: Option<String>,
    /// Empty unless the method failed on this sample.
    pub error: String,
}

pub const RESULTS_HEADER: [&str; 12] = [
    "sample_id",
    "scenario_id",
    "task_variant",
    "query_index",
    "method",
    "explanation_text",
    "produced_by",
    "reasoner_calls",
    "wall_time",
    "selected_ok",
    "selection_stage",
    "error",
];

pub fn sample_id(entry: &ManifestEntry, method: Method) -> String {
    format!(
        "s{:02}-v{}-q{}-{}",
        entry.scenario_id, entry.task_variant, entry.query_index, method
    )
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub jobs: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            methods: Method::ALL.to_vec(),
            seed: 0,
            jobs: 0,
        }
    }
}

fn explain(
    method: Method,
    entry: &ManifestEntry,
    trace: &Trace,
    registry: &ExplainerRegistry,
    reasoner: &dyn TextReasoner,
) -> Result<EvalRecord, EvalError> {
    let spec = scenario(entry.scenario_id as u32)?;
    let query = grid_query(&spec, entry.query_index, trace)?;
    let mut record = EvalRecord {
        sample_id: sample_id(entry, method),
        scenario_id: entry.scenario_id,
        task_variant: entry.task_variant,
        query_index: entry.query_index,
        method,
        explanation_text: String::new(),
        produced_by: String::new(),
        reasoner_calls: 0,
        wall_time: 0.0,
        selected_ok: None,
        selection_stage: None,
        error: String::new(),
    };
    let fill = |record: &mut EvalRecord, x: Explanation| {
        record.explanation_text = x.text.split_whitespace().collect::<Vec<_>>().join(" ");
        record.produced_by = x.produced_by_label();
        record.reasoner_calls = x.reasoner_calls;
        record.wall_time = x.wall_time;
    };
    match method {
        Method::Hexar => {
            let expected = registry
                .primary_for(spec.relevant_module)
                .map(str::to_owned)
                .unwrap_or_default();
            match explain_hexar_with_decision(&query, trace, registry, reasoner) {
                Ok((x, decision)) => {
                    record.selected_ok = Some(decision.chosen.first() == Some(&expected));
                    record.selection_stage = Some(decision.stage.as_str().to_owned());
                    fill(&mut record, x);
                }
                Err(e) => {
                    record.selected_ok = Some(false);
                    record.error = e.to_string();
                }
            }
        }
        Method::EndToEnd => match explain_end_to_end(&query, trace, registry, reasoner) {
            Ok(x) => fill(&mut record, x),
            Err(e) => record.error = e.to_string(),
        },
        Method::AllComponents => match explain_all_components(&query, trace, registry, reasoner) {
            Ok(x) => fill(&mut record, x),
            Err(e) => record.error = e.to_string(),
        },
    }
    Ok(record)
}

/// Explains every manifest entry with every configured method. Each
/// (scenario, variant) trace is generated once and shared by all methods and
/// queries. Records come back grouped by method, in manifest order.
pub fn run_grid(
    manifest: &[ManifestEntry],
    config: &GridConfig,
    registry: &ExplainerRegistry,
    reasoner: &dyn TextReasoner,
) -> Result<Vec<EvalRecord>, EvalError> {
    let mut traces: BTreeMap<(u8, u8), Trace> = BTreeMap::new();
    for e in manifest {
        if let std::collections::btree_map::Entry::Vacant(slot) = traces.entry((e.scenario_id, e.task_variant)) {
            slot.insert(generate_trace(e.scenario_id as u32, e.task_variant as u32, config.seed)?);
        }
    }
    let jobs: Vec<(Method, &ManifestEntry)> = config
        .methods
        .iter()
        .flat_map(|&m| manifest.iter().map(move |e| (m, e)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(m, e)| explain(*m, e, &traces[&(e.scenario_id, e.task_variant)], registry, reasoner))
            .collect()
    })
}

pub fn write_results<W: Write>(records: &[EvalRecord], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record([
            r.sample_id.clone(),
            r.scenario_id.to_string(),
            r.task_variant.to_string(),
            r.query_index.to_string(),
            r.method.to_string(),
            r.explanation_text.clone(),
            r.produced_by.clone(),
            r.reasoner_calls.to_string(),
            format!("{:.6}", r.wall_time),
            r.selected_ok.map(|b| b.to_string()).unwrap_or_default(),
            r.selection_stage.clone().unwrap_or_default(),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<EvalRecord>, EvalError> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != RESULTS_HEADER {
        return Err(EvalError::Schema(format!(
            "results header must be `{}`",
            RESULTS_HEADER.join(",")
        )));
    }
    let mut records: Vec<EvalRecord> = Vec::new();
    for row in reader.deserialize() {
        let r: EvalRecord = row.map_err(|e| EvalError::Schema(e.to_string()))?;
        if records.iter().any(|x| x.sample_id == r.sample_id) {
            return Err(EvalError::Schema(format!("duplicate sample id `{}`", r.sample_id)));
        }
        records.push(r);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_parse_both_spellings() {
        assert_eq!("end-to-end".parse::<Method>(), Ok(Method::EndToEnd));
        assert_eq!("all_components".parse::<Method>(), Ok(Method::AllComponents));
        assert!("oracle".parse::<Method>().is_err());
    }

    #[test]
    fn sample_ids_are_zero_padded() {
        let e = ManifestEntry::new(7, 1, 2).unwrap();
        assert_eq!(sample_id(&e, Method::Hexar), "s07-v1-q2-hexar");
    }

    #[test]
    fn csv_round_trip() {
        let r = EvalRecord {
            sample_id: "s01-v1-q1-hexar".into(),
            scenario_id: 1,
            task_variant: 1,
            query_index: 1,
            method: Method::Hexar,
            explanation_text: "A, \"quoted\" text.".into(),
            produced_by: "planner".into(),
            reasoner_calls: 1,
            wall_time: 0.25,
            selected_ok: Some(true),
            selection_stage: Some("failure_heuristic".into()),
            error: String::new(),
        };
        let mut e2e = r.clone();
        e2e.sample_id = "s01-v1-q1-end_to_end".into();
        e2e.method = Method::EndToEnd;
        e2e.selected_ok = None;
        e2e.selection_stage = None;
        let mut buf = Vec::new();
        write_results(&[r.clone(), e2e.clone()], &mut buf).unwrap();
        assert_eq!(read_results(buf.as_slice()).unwrap(), vec![r, e2e]);
    }

    #[test]
    fn wrong_header_is_a_schema_error() {
        assert!(matches!(read_results("a,b\n1,2\n".as_bytes()), Err(EvalError::Schema(_))));
    }
}
