//! Textual campaign reports.
//!
//! Rendering is a pure function of the finalized result and the UBRM: per
//! input function a header with the generated/mismatching counts, an error
//! type summary with one example call per UB type, and one detected-error
//! block per UB type whose sections (`Trace`, `Call POI Info`, `Stack`,
//! `History`) appear exactly when the type's UBRM field list selects them.

use std::fmt::Write as _;

use crate::compare::Ubrm;
use crate::testgen::CampaignResult;

pub fn render_report(result: &CampaignResult, ubrm: &Ubrm) -> String {
    let mut out = String::new();
    for (i, fr) in result.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "Function: {}/{}", fr.name, fr.arity);
        let _ = writeln!(out, "----------------------------");
        let _ = writeln!(out, "Generated test cases: {}", fr.generated);
        let pct = if fr.generated == 0 {
            0.0
        } else {
            fr.mismatching as f64 * 100.0 / fr.generated as f64
        };
        let _ = writeln!(out, "Mismatching test cases: {} ({:.2}%)", fr.mismatching, pct);
        if !fr.groups.is_empty() {
            let _ = writeln!(out, "  Error Types:");
            for g in &fr.groups {
                let _ = writeln!(out, "    + {} => {} Errors", g.ub_type, g.count);
                let _ = writeln!(out, "        Example call: {}", g.example_itc);
            }
        }
        for g in &fr.groups {
            out.push('\n');
            let _ = writeln!(out, "------ Detected Error ------");
            let _ = writeln!(out, "Call: {}", g.example_itc);
            let _ = writeln!(out, "Error Type: {}", g.ub_type);
            let _ = writeln!(out, "- - - - - - - - - - - - - -");
            out.push_str(&g.example.render(ubrm));
        }
        let _ = writeln!(out, "----------------------------");
    }
    out
}
