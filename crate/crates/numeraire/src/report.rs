//! Report documents: a deterministic JSON body plus an optional CSV grid
//! dump. Byte-identical output for identical inputs is part of the CLI
//! contract, so numbers are printed through one fixed-width formatter
//! instead of serde's shortest-round-trip rendering.

use crate::verify::{AppendixBFlags, Certificate, TriState};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits; non-finite values become JSON strings.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A JSON tree with stable key order (insertion order, no map).
pub enum Json {
    Null,
    Bool(bool),
    UInt(u64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj(pairs: Vec<(&str, Json)>) -> Json {
        Json::Obj(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::UInt(n) => out.push_str(&n.to_string()),
            Json::Num(v) => {
                if v.is_finite() {
                    out.push_str(&fmt_f64(*v));
                } else {
                    out.push('"');
                    out.push_str(&fmt_f64(*v));
                    out.push('"');
                }
            }
            Json::Str(s) => {
                out.push('"');
                escape_into(s, out);
                out.push('"');
            }
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    item.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
            Json::Obj(pairs) => {
                if pairs.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (k, v)) in pairs.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    out.push('"');
                    escape_into(k, out);
                    out.push_str("\": ");
                    v.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
    }
}

fn push_indent(out: &mut String, levels: usize) {
    for _ in 0..levels {
        out.push_str("  ");
    }
}

fn escape_into(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
}

fn opt_num(v: Option<f64>) -> Json {
    match v {
        Some(v) => Json::Num(v),
        None => Json::Null,
    }
}

/// One grid point of the wealth and projection dump. `dpstar_dq` is the
/// derivative paired with the wealth by pricing: `1/X*` for the
/// log-optimal tasks, the projection ratio `p*/q` for the power tasks.
#[derive(Clone, Copy, Debug)]
pub struct GridRow {
    pub z: f64,
    pub x_star: f64,
    pub dpstar_dq: f64,
    pub ripr_density: f64,
    pub x_ui: Option<f64>,
}

/// Task-dependent headline numbers; absent fields are skipped in JSON.
#[derive(Clone, Debug, Default)]
pub struct SolutionSummary {
    pub lambda_star: Option<f64>,
    pub log_wealth: Option<f64>,
    pub entropy: Option<f64>,
    pub conditional_log_wealth: Option<f64>,
    pub conditional_entropy: Option<f64>,
    pub duality_gap: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub parameter: Option<f64>,
    pub gamma: Option<f64>,
    pub power_mean: Option<f64>,
    pub normalizer: Option<f64>,
    pub utility: Option<f64>,
    pub divergence: Option<f64>,
    pub candidate: Option<String>,
    pub is_evariable: Option<bool>,
    pub min_gap: Option<f64>,
    pub strict_mass: Option<f64>,
    pub log_wealth_gain: Option<f64>,
    pub iterations: Option<u64>,
    pub residual: Option<f64>,
    pub notes: Vec<String>,
}

impl SolutionSummary {
    fn to_json(&self) -> Json {
        let mut pairs: Vec<(String, Json)> = Vec::new();
        let mut put = |k: &str, v: Json| pairs.push((k.to_string(), v));
        if let Some(v) = self.lambda_star {
            put("lambda_star", Json::Num(v));
        }
        if let Some(v) = self.log_wealth {
            put("log_wealth", Json::Num(v));
        }
        if let Some(v) = self.entropy {
            put("entropy", Json::Num(v));
        }
        if let Some(v) = self.conditional_log_wealth {
            put("conditional_log_wealth", Json::Num(v));
        }
        if let Some(v) = self.conditional_entropy {
            put("conditional_entropy", Json::Num(v));
        }
        if let Some(v) = self.duality_gap {
            put("duality_gap", Json::Num(v));
        }
        if let Some(w) = &self.weights {
            put("weights", Json::Arr(w.iter().map(|&v| Json::Num(v)).collect()));
        }
        if let Some(v) = self.parameter {
            put("parameter", Json::Num(v));
        }
        if let Some(v) = self.gamma {
            put("gamma", Json::Num(v));
        }
        if let Some(v) = self.power_mean {
            put("power_mean", Json::Num(v));
        }
        if let Some(v) = self.normalizer {
            put("normalizer", Json::Num(v));
        }
        if let Some(v) = self.utility {
            put("utility", Json::Num(v));
        }
        if let Some(v) = self.divergence {
            put("divergence", Json::Num(v));
        }
        if let Some(s) = &self.candidate {
            put("candidate", Json::Str(s.clone()));
        }
        if let Some(b) = self.is_evariable {
            put("is_evariable", Json::Bool(b));
        }
        if let Some(v) = self.min_gap {
            put("min_gap", Json::Num(v));
        }
        if let Some(v) = self.strict_mass {
            put("strict_mass", Json::Num(v));
        }
        if let Some(v) = self.log_wealth_gain {
            put("log_wealth_gain", Json::Num(v));
        }
        if let Some(v) = self.iterations {
            put("iterations", Json::UInt(v));
        }
        if let Some(v) = self.residual {
            put("residual", Json::Num(v));
        }
        put(
            "notes",
            Json::Arr(self.notes.iter().map(|s| Json::Str(s.clone())).collect()),
        );
        Json::Obj(pairs)
    }
}

#[derive(Clone, Debug)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub tol: f64,
    pub cert_tol: f64,
    pub grid_points: u64,
}

#[derive(Debug)]
pub struct Report {
    pub task: String,
    pub summary: SolutionSummary,
    pub grid: Vec<GridRow>,
    pub certificates: Vec<(String, Certificate)>,
    pub appendix_b_flags: Option<AppendixBFlags>,
    pub overall_pass: bool,
    pub provenance: Provenance,
}

fn tristate_str(t: TriState) -> &'static str {
    match t {
        TriState::Yes => "yes",
        TriState::No => "no",
        TriState::Undetermined => "undetermined",
    }
}

fn flags_json(f: &AppendixBFlags) -> Json {
    Json::obj(vec![
        ("q_ac_wrt_null", Json::Str(tristate_str(f.q_ac_wrt_null).into())),
        (
            "numeraire_finite",
            Json::Str(tristate_str(f.numeraire_finite).into()),
        ),
        ("ripr_ac_wrt_q", Json::Bool(f.ripr_ac_wrt_q)),
        ("q_ac_wrt_ripr", Json::Str(tristate_str(f.q_ac_wrt_ripr).into())),
        (
            "entropy_finite",
            Json::Str(tristate_str(f.entropy_finite).into()),
        ),
    ])
}

fn certificate_json(c: &Certificate) -> Json {
    Json::obj(vec![
        (
            "checks",
            Json::Arr(
                c.checks
                    .iter()
                    .map(|ck| {
                        Json::obj(vec![
                            ("name", Json::Str(ck.name.clone())),
                            ("residual", Json::Num(ck.residual)),
                            ("tol", Json::Num(ck.tol)),
                            ("pass", Json::Bool(ck.pass)),
                            ("witness", Json::Str(ck.witness.clone())),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("overall_pass", Json::Bool(c.overall_pass)),
        ("appendix_b_flags", flags_json(&c.appendix_b_flags)),
    ])
}

impl Report {
    pub fn to_json(&self) -> String {
        let grid = Json::Arr(
            self.grid
                .iter()
                .map(|r| {
                    let mut pairs = vec![
                        ("z", Json::Num(r.z)),
                        ("x_star", Json::Num(r.x_star)),
                        ("dpstar_dq", Json::Num(r.dpstar_dq)),
                        ("ripr_density", Json::Num(r.ripr_density)),
                    ];
                    if let Some(u) = r.x_ui {
                        pairs.push(("x_ui", Json::Num(u)));
                    }
                    Json::obj(pairs)
                })
                .collect(),
        );
        let certs = Json::Arr(
            self.certificates
                .iter()
                .map(|(name, c)| {
                    Json::obj(vec![
                        ("name", Json::Str(name.clone())),
                        ("certificate", certificate_json(c)),
                    ])
                })
                .collect(),
        );
        let flags = match &self.appendix_b_flags {
            Some(f) => flags_json(f),
            None => Json::Null,
        };
        Json::obj(vec![
            ("task", Json::Str(self.task.clone())),
            ("solution", self.summary.to_json()),
            ("grid", grid),
            ("certificates", certs),
            ("appendix_b_flags", flags),
            ("overall_pass", Json::Bool(self.overall_pass)),
            (
                "provenance",
                Json::obj(vec![
                    ("version", Json::Str(self.provenance.version.clone())),
                    ("seed", Json::UInt(self.provenance.seed)),
                    ("tol", Json::Num(self.provenance.tol)),
                    ("cert_tol", Json::Num(self.provenance.cert_tol)),
                    ("grid_points", Json::UInt(self.provenance.grid_points)),
                ]),
            ),
        ])
        .render()
    }

    /// Columns `z,x_star,ripr_density` plus `x_ui` when any row carries it.
    pub fn grid_csv(&self) -> String {
        let ui = self.grid.iter().any(|r| r.x_ui.is_some());
        let mut out = String::new();
        out.push_str(if ui {
            "z,x_star,ripr_density,x_ui\n"
        } else {
            "z,x_star,ripr_density\n"
        });
        for r in &self.grid {
            out.push_str(&fmt_f64(r.z));
            out.push(',');
            out.push_str(&fmt_f64(r.x_star));
            out.push(',');
            out.push_str(&fmt_f64(r.ripr_density));
            if ui {
                out.push(',');
                out.push_str(&fmt_f64(r.x_ui.unwrap_or(f64::NAN)));
            }
            out.push('\n');
        }
        out
    }

    /// Worst `|x_star * dpstar_dq - 1|` over rows with finite positive
    /// wealth. The log-optimal tasks must keep this within 1e-9.
    pub fn grid_invariant_residual(&self) -> f64 {
        self.grid
            .iter()
            .filter(|r| r.x_star.is_finite() && r.x_star > 0.0)
            .map(|r| (r.x_star * r.dpstar_dq - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
