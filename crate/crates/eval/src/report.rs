//! Aggregates records and merged metrics into a [`StatsReport`] and renders
//! it as Markdown and as a long-format CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use hexar::scenario::scenario;
use hexar::Source;

use crate::annotate::MetricRow;
use crate::grid::{EvalRecord, Method};
use crate::stats::{self, cochran_q, holm_adjust, mcnemar, CochranResult, McNemarMethod};
use crate::EvalError;

pub const METRICS: [&str; 3] = ["root_cause_identified", "incorrect_facts_present", "explanation_accuracy"];

/// Short module label used for grouping.
pub fn module_label(source: Source) -> &'static str {
    match source {
        Source::Planner => "planner",
        Source::Navigation => "navigation",
        Source::AskHumanForHelp => "help",
        Source::TextToSpeech => "tts",
        Source::PizzaRecommender => "pizza",
        Source::System => "system",
    }
}

const MODULE_ORDER: [&str; 5] = ["planner", "navigation", "help", "tts", "pizza"];

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub n: usize,
    /// Indexed like [`METRICS`].
    pub means: [f64; 3],
    pub variances: [f64; 3],
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTest {
    pub metric: &'static str,
    pub first: Method,
    pub second: Method,
    pub b: u64,
    pub c: u64,
    pub statistic: f64,
    pub p: f64,
    pub p_holm: f64,
    pub test: McNemarMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleRow {
    pub module: &'static str,
    pub method: Method,
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    pub method: Method,
    pub mean: f64,
    pub variance: f64,
    pub mean_calls: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub correct: usize,
    pub total: usize,
    /// (stage, correct, total), stage names sorted.
    pub by_stage: Vec<(String, usize, usize)>,
}

impl Selection {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub summaries: Vec<MethodSummary>,
    /// One entry per metric; `None` when fewer than two methods are matched.
    pub cochran: Vec<(&'static str, Option<CochranResult>)>,
    /// Pairwise tests, Holm-adjusted within each metric.
    pub mcnemar: Vec<PairTest>,
    pub selection: Option<Selection>,
    pub runtime: Vec<RuntimeRow>,
    pub modules: Vec<ModuleRow>,
    pub disagreement_rate: f64,
    /// Queries answered by every method, the rows of the matched tests.
    pub matched_queries: usize,
}

fn metric_value(m: &MetricRow, i: usize) -> u8 {
    match i {
        0 => m.root_cause_identified,
        1 => m.incorrect_facts_present,
        _ => m.explanation_accuracy,
    }
}

/// Builds the report. Record and metric ids must coincide exactly.
pub fn build_report(
    records: &[EvalRecord],
    metrics: &[MetricRow],
    disagreement_rate: f64,
) -> Result<StatsReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let by_id: BTreeMap<&str, &MetricRow> = metrics.iter().map(|m| (m.sample_id.as_str(), m)).collect();
    let record_ids: BTreeSet<&str> = records.iter().map(|r| r.sample_id.as_str()).collect();
    if record_ids.len() != records.len() {
        return Err(EvalError::IdMismatch("duplicate sample ids in results".into()));
    }
    if let Some(id) = record_ids.iter().find(|id| !by_id.contains_key(*id)) {
        return Err(EvalError::IdMismatch(format!("`{id}` has results but no annotations")));
    }
    if let Some(id) = by_id.keys().find(|id| !record_ids.contains(*id)) {
        return Err(EvalError::IdMismatch(format!("`{id}` has annotations but no results")));
    }

    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| records.iter().any(|r| r.method == *m))
        .collect();

    let mut summaries = Vec::new();
    let mut runtime = Vec::new();
    for &method in &methods {
        let rows: Vec<&EvalRecord> = records.iter().filter(|r| r.method == method).collect();
        let mut means = [0.0; 3];
        let mut variances = [0.0; 3];
        for (i, (mean, var)) in means.iter_mut().zip(variances.iter_mut()).enumerate() {
            let values: Vec<f64> = rows
                .iter()
                .map(|r| metric_value(by_id[r.sample_id.as_str()], i) as f64)
                .collect();
            *mean = stats::mean(&values);
            *var = stats::sample_variance(&values);
        }
        summaries.push(MethodSummary {
            method,
            n: rows.len(),
            means,
            variances,
            failures: rows.iter().filter(|r| !r.error.is_empty()).count(),
        });
        let times: Vec<f64> = rows.iter().map(|r| r.wall_time).collect();
        let calls: Vec<f64> = rows.iter().map(|r| r.reasoner_calls as f64).collect();
        runtime.push(RuntimeRow {
            method,
            mean: stats::mean(&times),
            variance: stats::sample_variance(&times),
            mean_calls: stats::mean(&calls),
        });
    }

    // Matched design: one row per query answered by every method.
    let mut matched: BTreeMap<(u8, u8, u8), BTreeMap<Method, &MetricRow>> = BTreeMap::new();
    for r in records {
        matched
            .entry((r.scenario_id, r.task_variant, r.query_index))
            .or_default()
            .insert(r.method, by_id[r.sample_id.as_str()]);
    }
    let complete: Vec<&BTreeMap<Method, &MetricRow>> =
        matched.values().filter(|m| m.len() == methods.len()).collect();

    let mut cochran = Vec::new();
    let mut pair_tests = Vec::new();
    for (i, &metric) in METRICS.iter().enumerate() {
        let table: Vec<Vec<u8>> = complete
            .iter()
            .map(|row| methods.iter().map(|m| metric_value(row[m], i)).collect())
            .collect();
        let q = if methods.len() >= 2 && !table.is_empty() {
            Some(cochran_q(&table)?)
        } else {
            None
        };
        cochran.push((metric, q));

        let mut tests = Vec::new();
        for a in 0..methods.len() {
            for b in a + 1..methods.len() {
                let pairs: Vec<(u8, u8)> = table.iter().map(|row| (row[a], row[b])).collect();
                let r = mcnemar(&pairs)?;
                tests.push(PairTest {
                    metric,
                    first: methods[a],
                    second: methods[b],
                    b: r.b,
                    c: r.c,
                    statistic: r.statistic,
                    p: r.p,
                    p_holm: r.p,
                    test: r.method,
                });
            }
        }
        let raw: Vec<f64> = tests.iter().map(|t| t.p).collect();
        for (t, adj) in tests.iter_mut().zip(holm_adjust(&raw)?) {
            t.p_holm = adj;
        }
        pair_tests.extend(tests);
    }

    let hexar_rows: Vec<&EvalRecord> = records.iter().filter(|r| r.selected_ok.is_some()).collect();
    let selection = (!hexar_rows.is_empty()).then(|| {
        let mut stages: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for r in &hexar_rows {
            let stage = r.selection_stage.clone().unwrap_or_else(|| "none".into());
            let slot = stages.entry(stage).or_default();
            slot.0 += usize::from(r.selected_ok == Some(true));
            slot.1 += 1;
        }
        Selection {
            correct: hexar_rows.iter().filter(|r| r.selected_ok == Some(true)).count(),
            total: hexar_rows.len(),
            by_stage: stages.into_iter().map(|(s, (c, t))| (s, c, t)).collect(),
        }
    });

    let mut groups: BTreeMap<(usize, Method), (usize, usize)> = BTreeMap::new();
    for r in records {
        let label = module_label(scenario(r.scenario_id as u32)?.relevant_module);
        let pos = MODULE_ORDER.iter().position(|m| *m == label).unwrap_or(MODULE_ORDER.len());
        let slot = groups.entry((pos, r.method)).or_default();
        slot.0 += by_id[r.sample_id.as_str()].explanation_accuracy as usize;
        slot.1 += 1;
    }
    let modules = groups
        .into_iter()
        .map(|((pos, method), (ok, n))| ModuleRow {
            module: MODULE_ORDER.get(pos).copied().unwrap_or("system"),
            method,
            n,
            accuracy: ok as f64 / n as f64,
        })
        .collect();

    Ok(StatsReport {
        summaries,
        cochran,
        mcnemar: pair_tests,
        selection,
        runtime,
        modules,
        disagreement_rate,
        matched_queries: complete.len(),
    })
}

fn test_name(t: McNemarMethod) -> &'static str {
    match t {
        McNemarMethod::Exact => "exact",
        McNemarMethod::ChiSquare => "chi_square",
    }
}

pub fn render_markdown(report: &StatsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Evaluation report\n");

    let _ = writeln!(s, "## Metrics by method\n");
    let _ = writeln!(s, "| metric | method | n | mean | variance¹ |");
    let _ = writeln!(s, "|---|---|---:|---:|---:|");
    for (i, metric) in METRICS.iter().enumerate() {
        for m in &report.summaries {
            let _ = writeln!(
                s,
                "| {metric} | {} | {} | {:.6} | {:.6} |",
                m.method, m.n, m.means[i], m.variances[i]
            );
        }
    }
    let failures: Vec<String> = report
        .summaries
        .iter()
        .filter(|m| m.failures > 0)
        .map(|m| format!("{} {}", m.method, m.failures))
        .collect();
    if !failures.is_empty() {
        let _ = writeln!(s, "\nFailed samples (scored as empty explanations): {}", failures.join(", "));
    }
    let _ = writeln!(s, "\nAnnotator disagreement rate: {:.6}", report.disagreement_rate);

    let _ = writeln!(s, "\n## Explanation accuracy by relevant module\n");
    let _ = writeln!(s, "| module | method | n | accuracy |");
    let _ = writeln!(s, "|---|---|---:|---:|");
    for r in &report.modules {
        let _ = writeln!(s, "| {} | {} | {} | {:.6} |", r.module, r.method, r.n, r.accuracy);
    }

    let _ = writeln!(s, "\n## Selection accuracy\n");
    match &report.selection {
        Some(sel) => {
            let _ = writeln!(s, "Overall: {}/{} ({:.6})\n", sel.correct, sel.total, sel.accuracy());
            let _ = writeln!(s, "| stage | correct | total |");
            let _ = writeln!(s, "|---|---:|---:|");
            for (stage, c, t) in &sel.by_stage {
                let _ = writeln!(s, "| {stage} | {c} | {t} |");
            }
        }
        None => {
            let _ = writeln!(s, "No hexar records.");
        }
    }

    let _ = writeln!(s, "\n## Statistical tests\n");
    let _ = writeln!(s, "Matched queries: {}\n", report.matched_queries);
    let _ = writeln!(s, "| metric | Q | df | p |");
    let _ = writeln!(s, "|---|---:|---:|---:|");
    for (metric, q) in &report.cochran {
        match q {
            Some(q) => {
                let _ = writeln!(s, "| {metric} | {:.6} | {} | {:.6} |", q.q, q.df, q.p);
            }
            None => {
                let _ = writeln!(s, "| {metric} | n/a | n/a | n/a |");
            }
        }
    }
    let _ = writeln!(s, "\n| metric | pair | b | c | test | statistic | p | p (Holm) |");
    let _ = writeln!(s, "|---|---|---:|---:|---|---:|---:|---:|");
    for t in &report.mcnemar {
        let _ = writeln!(
            s,
            "| {} | {} vs {} | {} | {} | {} | {:.6} | {:.6} | {:.6} |",
            t.metric,
            t.first,
            t.second,
            t.b,
            t.c,
            test_name(t.test),
            t.statistic,
            t.p,
            t.p_holm
        );
    }

    let _ = writeln!(s, "\n## Runtime\n");
    let _ = writeln!(s, "| method | mean wall time (s) | variance | mean reasoner calls |");
    let _ = writeln!(s, "|---|---:|---:|---:|");
    for r in &report.runtime {
        let _ = writeln!(s, "| {} | {:.6} | {:.6} | {:.6} |", r.method, r.mean, r.variance, r.mean_calls);
    }

    let _ = writeln!(
        s,
        "\n¹ Sample variance (n − 1 denominator) of the 0/1 values. For a binary \
         metric with mean p this is about p(1 − p), so it never exceeds roughly 0.25; \
         variances quoted elsewhere for similar metrics that exceed that bound are \
         not comparable with these."
    );
    s
}

/// Long-format CSV: `section,method,metric,key,value`.
pub fn render_csv(report: &StatsReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut row = |section: &str, method: &str, metric: &str, key: &str, value: String| {
        w.write_record([section, method, metric, key, &value]).expect("in-memory write");
    };
    row("section", "method", "metric", "key", "value".into());
    for m in &report.summaries {
        let method = m.method.as_str();
        row("summary", method, "", "n", m.n.to_string());
        row("summary", method, "", "failures", m.failures.to_string());
        for (i, metric) in METRICS.iter().enumerate() {
            row("summary", method, metric, "mean", format!("{:.6}", m.means[i]));
            row("summary", method, metric, "variance", format!("{:.6}", m.variances[i]));
        }
    }
    row("agreement", "", "", "disagreement_rate", format!("{:.6}", report.disagreement_rate));
    for r in &report.modules {
        row("module", r.method.as_str(), r.module, "n", r.n.to_string());
        row("module", r.method.as_str(), r.module, "accuracy", format!("{:.6}", r.accuracy));
    }
    if let Some(sel) = &report.selection {
        row("selection", "hexar", "", "correct", sel.correct.to_string());
        row("selection", "hexar", "", "total", sel.total.to_string());
        row("selection", "hexar", "", "accuracy", format!("{:.6}", sel.accuracy()));
        for (stage, c, t) in &sel.by_stage {
            row("selection", "hexar", stage, "correct", c.to_string());
            row("selection", "hexar", stage, "total", t.to_string());
        }
    }
    for (metric, q) in &report.cochran {
        if let Some(q) = q {
            row("cochran_q", "", metric, "q", format!("{:.6}", q.q));
            row("cochran_q", "", metric, "df", q.df.to_string());
            row("cochran_q", "", metric, "p", format!("{:.6}", q.p));
        }
    }
    for t in &report.mcnemar {
        let pair = format!("{}:{}", t.first, t.second);
        row("mcnemar", &pair, t.metric, "b", t.b.to_string());
        row("mcnemar", &pair, t.metric, "c", t.c.to_string());
        row("mcnemar", &pair, t.metric, "test", test_name(t.test).into());
        row("mcnemar", &pair, t.metric, "statistic", format!("{:.6}", t.statistic));
        row("mcnemar", &pair, t.metric, "p", format!("{:.6}", t.p));
        row("mcnemar", &pair, t.metric, "p_holm", format!("{:.6}", t.p_holm));
    }
    for r in &report.runtime {
        row("runtime", r.method.as_str(), "", "mean", format!("{:.6}", r.mean));
        row("runtime", r.method.as_str(), "", "variance", format!("{:.6}", r.variance));
        row("runtime", r.method.as_str(), "", "mean_calls", format!("{:.6}", r.mean_calls));
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(s: u8, method: Method) -> EvalRecord {
        EvalRecord {
            sample_id: format!("s{s:02}-v1-q1-{method}"),
            scenario_id: s,
            task_variant: 1,
            query_index: 1,
            method,
            explanation_text: String::new(),
            produced_by: String::new(),
            reasoner_calls: 1,
            wall_time: 0.5,
            selected_ok: (method == Method::Hexar).then_some(true),
            selection_stage: (method == Method::Hexar).then(|| "failure_heuristic".into()),
            error: String::new(),
        }
    }

    fn metric(id: &str, rc: u8) -> MetricRow {
        MetricRow {
            sample_id: id.into(),
            root_cause_identified: rc,
            incorrect_facts_present: 0,
            explanation_accuracy: rc,
        }
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(build_report(&[], &[], 0.0), Err(EvalError::Empty)));
    }

    #[test]
    fn ids_must_match() {
        let r = vec![record(1, Method::Hexar)];
        let m = vec![metric("other", 1)];
        assert!(matches!(build_report(&r, &m, 0.0), Err(EvalError::IdMismatch(_))));
        let m = vec![metric(&r[0].sample_id, 1), metric("extra", 0)];
        assert!(matches!(build_report(&r, &m, 0.0), Err(EvalError::IdMismatch(_))));
    }

    #[test]
    fn holm_within_each_metric() {
        let mut records = Vec::new();
        let mut metrics = Vec::new();
        for s in 1..=12u8 {
            for m in Method::ALL {
                let r = record(s, m);
                let ok = u8::from(m == Method::Hexar || s % 3 == 0);
                metrics.push(metric(&r.sample_id, ok));
                records.push(r);
            }
        }
        let report = build_report(&records, &metrics, 0.0).unwrap();
        assert_eq!(report.matched_queries, 12);
        assert_eq!(report.mcnemar.len(), 9);
        for t in &report.mcnemar {
            assert!(t.p_holm >= t.p && (0.0..=1.0).contains(&t.p_holm));
        }
        let q = report.cochran[0].1.unwrap();
        assert_eq!(q.df, 2);
        assert!(q.q > 0.0);
        assert_eq!(report.selection.as_ref().unwrap().accuracy(), 1.0);
        assert!(render_markdown(&report).contains("## Runtime"));
        assert!(render_csv(&report).starts_with("section,method,metric,key,value\n"));
    }
}
