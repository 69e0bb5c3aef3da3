//! Table layout shared by `report`: one row per (report, domain), with
//! retain/forget BF and AF side by side and the MIA gap last.

use std::fmt::Write as _;

use nullspace_unlearn::EvaluationReport;

pub const TABLE_HEADER: &str =
    "mode,unlearn_domains,domain,targeted,retain_bf,retain_af,forget_bf,forget_af,overall_bf,overall_af,mia";

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

pub fn table(reports: &[EvaluationReport]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in reports {
        let scope = r.unlearn_domains.join(";");
        for d in &r.domains {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.mode,
                scope,
                d.domain,
                d.targeted,
                cell(d.retain.bf),
                cell(d.retain.af),
                cell(d.forget.bf),
                cell(d.forget.af),
                cell(d.overall.bf),
                cell(d.overall.af),
                cell(d.mia),
            );
        }
    }
    out
}

/// Fixed-width lines for the terminal.
pub fn summary(r: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode {} | forget {}", r.mode, r.forget_classes.join(", "));
    let width = r.domains.iter().map(|d| d.domain.len()).max().unwrap_or(0);
    let pct = |v: Option<f64>| v.map(|x| format!("{x:6.2}")).unwrap_or_else(|| "     -".into());
    for d in &r.domains {
        let _ = writeln!(
            out,
            "{:width$}  {}  retain {} -> {}  forget {} -> {}  mia {}",
            d.domain,
            if d.targeted { "targeted  " } else { "untargeted" },
            pct(d.retain.bf),
            pct(d.retain.af),
            pct(d.forget.bf),
            pct(d.forget.af),
            pct(d.mia),
        );
    }
    out
}
