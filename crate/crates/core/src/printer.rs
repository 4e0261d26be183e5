//! Concrete-syntax printing. `parse(print(x))` is the identity on terms and
//! on configurations whose counters are tight (as parsed ones always are).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::Configuration;
use crate::secmodel::SecAssignment;
use crate::term::Term;

pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    write_term(&mut out, t);
    out
}

fn write_term(out: &mut String, t: &Term) {
    match t {
        Term::Var(x) => out.push_str(x),
        Term::This => out.push_str("this"),
        Term::ActRef(a) => out.push_str(&a.name),
        Term::FutRef(f) => out.push_str(&format!("{f}")),
        Term::Object(ms) => {
            out.push('[');
            for (i, m) in ms.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&format!("{} = sigma({}) ", m.label, m.binder));
                write_term(out, &m.body);
            }
            out.push(']');
        }
        Term::Call { target, label, arg } => {
            write_postfix_target(out, target);
            out.push_str(&format!(".{label}("));
            write_term(out, arg);
            out.push(')');
        }
        Term::Update { target, label, binder, body } => {
            // The update body extends as far right as possible, so an update
            // is only ever a postfix target when parenthesized.
            write_postfix_target(out, target);
            out.push_str(&format!(".{label} := sigma({binder}) "));
            write_term(out, body);
        }
        Term::Activate(inner) => {
            out.push_str("Active(");
            write_term(out, inner);
            out.push(')');
        }
    }
}

fn write_postfix_target(out: &mut String, t: &Term) {
    if matches!(t, Term::Update { .. }) {
        out.push('(');
        write_term(out, t);
        out.push(')');
    } else {
        write_term(out, t);
    }
}

/// Prints a configuration together with its security assignment. Request
/// origins are kept in an optional annotation, `#f3 (lab) -> t` for a local
/// call on method `lab` and `#f3 (lab!) -> t` for a remote one, so printing
/// loses no structure.
pub fn print_configuration(config: &Configuration, sec: &SecAssignment) -> String {
    let mut out = String::new();
    for (id, act) in &config.activities {
        out.push_str(&format!("activity {} [", id.name));
        for (i, r) in act.queue.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push(' ');
            out.push_str(&format!("{}", r.future));
            if let Some(l) = &r.origin_label {
                let bang = if r.origin_remote { "!" } else { "" };
                out.push_str(&format!(" ({l}{bang})"));
            }
            out.push_str(" -> ");
            write_term(&mut out, &r.term);
        }
        out.push_str(" | ");
        write_term(&mut out, &act.active_object);
        out.push_str(" ]\n");
    }
    if !sec.is_empty() {
        out.push_str("sec {");
        let listed: Vec<String> =
            sec.listed().map(|(l, lv)| format!(" {l}: {lv}")).collect();
        out.push_str(&listed.join(","));
        out.push_str(" }\n");
    }
    out
}
