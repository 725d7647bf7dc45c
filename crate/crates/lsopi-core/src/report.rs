//! Report rendering: a canonical machine-readable JSON document (sorted
//! keys, LF newlines, byte-stable for a fixed seed) and a human-readable
//! step trace.

use serde_json::{json, Map, Value};

use crate::funlinalg::Sampler;
use crate::lsopi::{RunReport, StepRecord, Verdict};

fn opt_usize(v: Option<usize>) -> Value {
    match v {
        Some(x) => json!(x),
        None => Value::Null,
    }
}

fn step_value(s: &StepRecord) -> Value {
    // `Map` is backed by a sorted map, so key order in the output is
    // alphabetical regardless of insertion order here.
    let mut m = Map::new();
    m.insert("index".into(), json!(s.index));
    m.insert("n".into(), json!(s.n));
    m.insert("state_names".into(), json!(s.state_names));
    m.insert("k".into(), opt_usize(s.k));
    m.insert("case".into(), json!(s.case.as_str()));
    m.insert("r".into(), opt_usize(s.r));
    m.insert("r_II".into(), opt_usize(s.r_ii));
    m.insert(
        "growth_vector".into(),
        match &s.growth {
            Some(g) => json!(g),
            None => Value::Null,
        },
    );
    m.insert("closure_rank".into(), opt_usize(s.closure_rank));
    m.insert("filtration_ranks".into(), json!(s.filtration_ranks));
    m.insert(
        "H_generators".into(),
        match &s.h_generators {
            Some(h) => json!(h),
            None => Value::Null,
        },
    );
    m.insert(
        "beta_column".into(),
        match &s.beta_column {
            Some((a, b)) => json!([a, b]),
            None => Value::Null,
        },
    );
    m.insert(
        "prolonged_control".into(),
        match &s.prolonged_control {
            Some(c) => json!(c),
            None => Value::Null,
        },
    );
    m.insert("notes".into(), json!(s.notes));
    Value::Object(m)
}

fn report_value(rep: &RunReport, smp: &Sampler) -> Value {
    let mut m = Map::new();
    m.insert("system".into(), json!(rep.system_name));
    m.insert("verdict".into(), json!(rep.verdict.as_str()));
    m.insert("ell".into(), opt_usize(rep.verdict.ell()));
    m.insert("conclusive".into(), json!(rep.conclusive));
    m.insert(
        "reason".into(),
        match rep.verdict.reason() {
            Some(r) => json!(r),
            None => Value::Null,
        },
    );
    m.insert(
        "failing_step".into(),
        match &rep.verdict {
            Verdict::NotLsopi { failing_step, .. } => json!(failing_step),
            _ => Value::Null,
        },
    );
    m.insert(
        "fallback_steps".into(),
        match &rep.verdict {
            Verdict::Inconclusive { fallback_steps, .. } => json!(fallback_steps),
            _ => json!([]),
        },
    );
    m.insert(
        "steps".into(),
        Value::Array(rep.steps.iter().map(step_value).collect()),
    );
    m.insert("seed".into(), json!(smp.seed()));
    m.insert("samples".into(), json!(smp.samples()));
    Value::Object(m)
}

/// Canonical machine report: pretty-printed JSON with sorted keys and LF
/// line endings, ending in a newline. Byte-identical across runs with the
/// same seed and sample count.
pub fn report_to_json(rep: &RunReport, smp: &Sampler) -> String {
    let mut s = serde_json::to_string_pretty(&report_value(rep, smp))
        .expect("report serialization cannot fail");
    s.push('\n');
    s
}

fn fmt_list(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Human-readable step trace.
pub fn report_to_text(rep: &RunReport, smp: &Sampler) -> String {
    let mut out = String::new();
    out.push_str(&format!("system: {}\n", rep.system_name));
    let verdict = match &rep.verdict {
        Verdict::Lsopi { ell } => format!("LSOPI with ell = {}", ell),
        Verdict::NotLsopi { failing_step, .. } => {
            format!("NOT_LSOPI (failing at step {})", failing_step)
        }
        Verdict::NotFlat { .. } => "NOT_FLAT".to_string(),
        Verdict::Inconclusive { fallback_steps, .. } => format!(
            "INCONCLUSIVE (non-forced choices at steps {})",
            fmt_list(fallback_steps)
        ),
    };
    out.push_str(&format!(
        "verdict: {}{}\n",
        verdict,
        if rep.conclusive { " [conclusive]" } else { " [not conclusive]" }
    ));
    if let Some(reason) = rep.verdict.reason() {
        out.push_str(&format!("reason: {}\n", reason));
    }
    out.push_str(&format!("seed: {}   samples: {}\n", smp.seed(), smp.samples()));
    for s in &rep.steps {
        out.push('\n');
        out.push_str(&format!(
            "step {}: n = {}   states: {}\n",
            s.index,
            s.n,
            s.state_names.join(", ")
        ));
        match s.k {
            Some(k) => out.push_str(&format!("  k = {}   case {}", k, s.case)),
            None => out.push_str(&format!("  k = none   case {}", s.case)),
        }
        if let Some(r) = s.r {
            out.push_str(&format!("   r = {}", r));
        }
        if let Some(r2) = s.r_ii {
            out.push_str(&format!("   r_II = {}", r2));
        }
        out.push('\n');
        out.push_str(&format!(
            "  filtration ranks: {}\n",
            fmt_list(&s.filtration_ranks)
        ));
        if let Some(g) = &s.growth {
            out.push_str(&format!("  growth vector: {}\n", fmt_list(g)));
        }
        if let Some(c) = s.closure_rank {
            out.push_str(&format!("  closure rank: {}\n", c));
        }
        if let Some(h) = &s.h_generators {
            out.push_str("  H generators:\n");
            for g in h {
                out.push_str(&format!("    {}\n", g));
            }
        }
        if let Some((a, b)) = &s.beta_column {
            out.push_str(&format!("  beta column: ({}, {})\n", a, b));
        }
        if let Some(c) = &s.prolonged_control {
            out.push_str(&format!("  prolonged control: {}\n", c));
        }
        for n in &s.notes {
            out.push_str(&format!("  note: {}\n", n));
        }
    }
    out
}
