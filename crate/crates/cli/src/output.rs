//! Rendering of command results. Every command produces a text form and a
//! structured form; structured mode prints one JSON document per invocation.

use aspfun_core::properties::Verdict;
use aspfun_core::typecheck::{ConfigType, ObjType, TypeError};
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

pub fn emit(format: Format, text: &str, doc: &Value) {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    // A closed pipe downstream is not our error; drop the output quietly.
    let _ = match format {
        Format::Text => writeln!(out, "{text}"),
        Format::Structured => {
            let pretty =
                serde_json::to_string_pretty(doc).expect("serializable");
            writeln!(out, "{pretty}")
        }
    };
}

pub fn obj_type_text(t: &ObjType) -> String {
    let ass: Vec<String> =
        t.ass.iter().map(|(l, lv)| format!("{l}: {lv}")).collect();
    let glob: Vec<String> = t.glob.iter().map(|a| a.to_string()).collect();
    format!("({{{}}}, {{{}}})", ass.join(", "), glob.join(", "))
}

pub fn obj_type_json(t: &ObjType) -> Value {
    let ass: Map<String, Value> = t
        .ass
        .iter()
        .map(|(l, lv)| (l.clone(), Value::String(lv.to_string())))
        .collect();
    let glob: Vec<Value> =
        t.glob.iter().map(|a| Value::String(a.to_string())).collect();
    json!({ "ass": ass, "glob": glob })
}

pub fn config_type_text(ct: &ConfigType) -> String {
    let mut lines = Vec::new();
    for (alpha, t) in &ct.gamma_act {
        lines.push(format!("activity {alpha}: {}", obj_type_text(t)));
    }
    for (f, t) in &ct.gamma_fut {
        let origin = match ct.fut_label.get(f) {
            Some(Some(l)) => format!(" from {l}"),
            _ => String::new(),
        };
        lines.push(format!("future {f}{origin}: {}", obj_type_text(t)));
    }
    lines.join("\n")
}

pub fn config_type_json(ct: &ConfigType) -> Value {
    let acts: Map<String, Value> = ct
        .gamma_act
        .iter()
        .map(|(a, t)| (a.to_string(), obj_type_json(t)))
        .collect();
    let futs: Map<String, Value> = ct
        .gamma_fut
        .iter()
        .map(|(f, t)| {
            let mut v = obj_type_json(t);
            if let Some(Some(l)) = ct.fut_label.get(f) {
                v["from"] = Value::String(l.clone());
            }
            (f.to_string(), v)
        })
        .collect();
    json!({ "activities": acts, "futures": futs })
}

pub fn type_error_json(e: &TypeError) -> Value {
    json!({
        "message": e.message,
        "rendered": e.to_string(),
        "chain": e.chain,
    })
}

pub fn verdict_json(v: &Verdict) -> Value {
    match v {
        Verdict::Holds => json!({ "verdict": "holds" }),
        Verdict::FailsWith(cx) => json!({
            "verdict": "fails",
            "trace0": cx.trace0,
            "trace1": cx.trace1,
            "observation": cx.observation,
        }),
        Verdict::Inconclusive(why) => {
            json!({ "verdict": "inconclusive", "why": why })
        }
    }
}
