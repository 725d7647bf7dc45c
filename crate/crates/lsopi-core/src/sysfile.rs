//! System description files: a small TOML format declaring either a
//! control-affine system (`f`, `g1`, `g2` per-state expression lists) or a
//! general two-input system (`controls` plus `F`), which is converted to
//! affine form by adding the controls as integrator states.
//!
//! ```toml
//! name = "chained"
//! states = ["x1", "x2", "x3", "x4"]
//! f  = ["0", "0", "0", "0"]
//! g1 = ["1", "x3", "x4", "0"]
//! g2 = ["0", "0", "0", "1"]
//! ```
//!
//! Errors carry the line of the offending entry where possible.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::funlinalg::Sampler;
use crate::geometry::{ControlAffineSystem, VectorField};
use crate::lsopi::affinize;
use crate::symcore::{parse_expr, Expr, Vars};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    states: Vec<String>,
    #[serde(default)]
    f: Option<Vec<Spanned<String>>>,
    #[serde(default)]
    g1: Option<Vec<Spanned<String>>>,
    #[serde(default)]
    g2: Option<Vec<Spanned<String>>>,
    #[serde(default)]
    controls: Option<Vec<String>>,
    #[serde(default, rename = "F")]
    general_f: Option<Vec<Spanned<String>>>,
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

/// Parse one expression list, anchoring errors to the field name, the
/// state it belongs to, and the source line.
fn parse_field(
    text: &str,
    label: &str,
    entries: &[Spanned<String>],
    states: &[String],
    vars: &Vars,
) -> Result<Vec<Expr>> {
    if entries.len() != states.len() {
        return Err(validation(format!(
            "field `{}` has {} entries for {} states",
            label,
            entries.len(),
            states.len()
        )));
    }
    let mut out = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let line = line_of(text, entry.span().start);
        match parse_expr(entry.get_ref(), vars) {
            Ok(e) => out.push(e),
            Err(err) => {
                return Err(validation(format!(
                    "line {}: `{}` entry for state `{}`: {}",
                    line, label, states[i], err
                )))
            }
        }
    }
    Ok(out)
}

/// Parse and validate a system description from TOML text. The control
/// fields' generic rank-two condition is checked with the given sampler.
pub fn parse_system_text(text: &str, smp: &Sampler) -> Result<ControlAffineSystem> {
    let raw: RawSpec = toml::from_str(text)
        .map_err(|e| validation(format!("system file: {}", e.message())))?;
    if raw.states.is_empty() {
        return Err(validation("no states declared"));
    }
    let mut seen = HashSet::new();
    for s in &raw.states {
        if !seen.insert(s.as_str()) {
            return Err(validation(format!("duplicate state name `{}`", s)));
        }
    }

    match (&raw.f, &raw.g1, &raw.g2, &raw.controls, &raw.general_f) {
        (Some(f), Some(g1), Some(g2), None, None) => {
            let vars = Vars::new(raw.states.clone());
            let fe = parse_field(text, "f", f, &raw.states, &vars)?;
            let g1e = parse_field(text, "g1", g1, &raw.states, &vars)?;
            let g2e = parse_field(text, "g2", g2, &raw.states, &vars)?;
            let sys = ControlAffineSystem::new(
                raw.name,
                vars.clone(),
                VectorField::from_exprs(vars.clone(), &fe)?,
                VectorField::from_exprs(vars.clone(), &g1e)?,
                VectorField::from_exprs(vars, &g2e)?,
            )?;
            sys.validate_input_rank(smp)?;
            Ok(sys)
        }
        (None, None, None, Some(controls), Some(general)) => {
            if controls.len() != 2 {
                return Err(validation(format!(
                    "general form needs exactly 2 controls, got {}",
                    controls.len()
                )));
            }
            for c in controls {
                if seen.contains(c.as_str()) {
                    return Err(validation(format!(
                        "control `{}` collides with a state name",
                        c
                    )));
                }
            }
            if controls[0] == controls[1] {
                return Err(validation("duplicate control name"));
            }
            let mut all = raw.states.clone();
            all.extend(controls.iter().cloned());
            let vars = Vars::new(all);
            let rhs = parse_field(text, "F", general, &raw.states, &vars)?;
            let ctrl: [String; 2] = [controls[0].clone(), controls[1].clone()];
            affinize(raw.name, &raw.states, &ctrl, &rhs, smp)
        }
        _ => Err(validation(
            "declare either all of `f`, `g1`, `g2` (affine form) or both \
             `controls` and `F` (general form), not a mixture",
        )),
    }
}

/// Load a system description from a file.
pub fn load_system(path: &Path, smp: &Sampler) -> Result<ControlAffineSystem> {
    let text = fs::read_to_string(path)
        .map_err(|e| validation(format!("cannot read {}: {}", path.display(), e)))?;
    parse_system_text(&text, smp)
}
