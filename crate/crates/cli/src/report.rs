//! Report structures and their text rendering.

use std::fmt::Write;

use serde::Serialize;
use zipbf_core::rank_deficient::Selection;
use zipbf_core::{Backend, BfResult, IntegrabilityReport, Method, RecommendedPrior};

pub const M1_LABEL: &str = "zero-inflated Poisson";
pub const M0_LABEL: &str = "Poisson";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Models {
    pub m1: &'static str,
    pub m0: &'static str,
}

impl Default for Models {
    fn default() -> Self {
        Self { m1: M1_LABEL, m0: M0_LABEL }
    }
}

/// Output of `test` and `test-reg`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BfReport {
    pub command: &'static str,
    pub models: Models,
    pub prior: String,
    pub log_bf10: f64,
    pub bf10: f64,
    pub post_prob_m1: f64,
    pub post_prob_m0: f64,
    pub prior_odds: f64,
    pub method: Method,
    pub rel_se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrability: Option<IntegrabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_deficient: Option<RankDeficientBlock>,
    pub seed: u64,
    pub notices: Vec<String>,
    pub warnings: Vec<String>,
}

impl BfReport {
    pub fn new(command: &'static str, prior: String, bf: BfResult, seed: u64) -> Self {
        let post_prob_m0 = bf.post_prob_m0();
        Self {
            command,
            models: Models::default(),
            prior,
            log_bf10: bf.log_bf10,
            bf10: bf.bf10,
            post_prob_m1: bf.post_prob_m1,
            post_prob_m0,
            prior_odds: bf.prior_odds,
            method: bf.method,
            rel_se: bf.rel_se,
            n: None,
            k: None,
            s: None,
            backend: None,
            integrability: None,
            rank_deficient: None,
            seed,
            notices: Vec::new(),
            warnings: bf.warnings,
        }
    }
}

/// Per-selection table for designs whose positive-count rows are rank deficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankDeficientBlock {
    pub t: usize,
    pub r: usize,
    pub deficiency: usize,
    /// Input rows (zero-based) carrying the Jeffreys part of the prior.
    pub j_rows: Vec<usize>,
    pub selections: Vec<Selection>,
    pub arithmetic_mean_bf: f64,
    pub geometric_mean_bf: f64,
}

/// Output of `check`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub command: &'static str,
    pub integrability: IntegrabilityReport,
    pub verdicts: Vec<String>,
}

impl CheckReport {
    pub fn new(report: IntegrabilityReport) -> Self {
        let verdicts = verdict_lines(&report);
        Self { command: "check", integrability: report, verdicts }
    }
}

pub fn recommended_name(r: RecommendedPrior) -> &'static str {
    match r {
        RecommendedPrior::J1 => "j1",
        RecommendedPrior::J0 => "j0",
        RecommendedPrior::Partial => "partial",
        RecommendedPrior::None => "none",
    }
}

/// Human-readable finiteness verdicts. Rows are numbered from 1.
pub fn verdict_lines(r: &IntegrabilityReport) -> Vec<String> {
    let mut out = Vec::new();
    if r.j1_condition_ok {
        out.push("j1: finite (positive-count rows have full column rank)".to_string());
    } else {
        out.push(format!(
            "j1: not usable (positive-count rows have rank {} < q = {})",
            r.rank_a_plus, r.q
        ));
    }
    let failures = r.cone_failures();
    if r.j0_condition_ok {
        out.push("j0: finite (every zero-count row is in the cone of the positive-count rows)".to_string());
    } else {
        let rows: Vec<String> = failures.iter().map(|i| (i + 1).to_string()).collect();
        let noun = if rows.len() == 1 { "row" } else { "rows" };
        out.push(format!(
            "j0: cone condition violated at {noun} {}; finiteness unknown, a forced run is at your own risk",
            rows.join(", ")
        ));
    }
    let rec = match r.recommended_prior {
        RecommendedPrior::Partial => "recommended: partial prior (positive-count rows are rank deficient)".to_string(),
        RecommendedPrior::None => "recommended: none (no available prior is known to give a finite marginal)".to_string(),
        p => format!("recommended: {}", recommended_name(p)),
    };
    out.push(rec);
    out
}

fn integrability_text(out: &mut String, r: &IntegrabilityReport) {
    let _ = writeln!(
        out,
        "rows n = {}, coefficients q = {}, zero counts k = {}, rank(A) = {}, rank(A+) = {}",
        r.n, r.q, r.k, r.rank_a, r.rank_a_plus
    );
    for line in verdict_lines(r) {
        let _ = writeln!(out, "  {line}");
    }
}

/// Six significant figures without trailing zeros; scientific outside [1e-4, 1e6).
fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e6).contains(&a) {
        format!("{x:.6e}")
    } else {
        let digits = if a == 0.0 { 0 } else { (5 - a.log10().floor() as i32).max(0) as usize };
        let s = format!("{x:.digits$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

pub fn bf_text(r: &BfReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "M1: {}    M0: {}    prior: {}", r.models.m1, r.models.m0, r.prior);
    if let (Some(n), Some(k), Some(s)) = (r.n, r.k, r.s) {
        let _ = writeln!(out, "n = {n}, zero counts k = {k}, sum of counts s = {s}");
    }
    if let Some(rep) = &r.integrability {
        integrability_text(&mut out, rep);
    }
    let _ = writeln!(out, "B10 = {}    (ln B10 = {})", num(r.bf10), num(r.log_bf10));
    if r.rel_se > 0.0 {
        let _ = writeln!(out, "relative standard error = {}", num(r.rel_se));
    }
    let _ = writeln!(out, "prior odds Pr(M1)/Pr(M0) = {}", num(r.prior_odds));
    let _ = writeln!(out, "Pr(M1 | x) = {}    Pr(M0 | x) = {}", num(r.post_prob_m1), num(r.post_prob_m0));
    let backend = r.backend.map(|b| format!(", backend {}", backend_name(b))).unwrap_or_default();
    let _ = writeln!(out, "method: {}{backend}, seed {}", r.method, r.seed);
    if let Some(rd) = &r.rank_deficient {
        let rows: Vec<String> = rd.j_rows.iter().map(|i| (i + 1).to_string()).collect();
        let _ = writeln!(
            out,
            "partial prior: rank(A+) = {}, deficiency {}, Jeffreys rows {}",
            rd.t,
            rd.deficiency,
            rows.join(",")
        );
        let _ = writeln!(out, "  {:<16} {:>14} {:>12}", "proper rows", "B10", "rel. s.e.");
        for sel in &rd.selections {
            let rows: Vec<String> = sel.l_rows.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "  {:<16} {:>14} {:>12}", rows.join(","), num(sel.log_bf10.exp()), num(sel.rel_se));
        }
        let _ = writeln!(out, "  arithmetic mean B10 = {}", num(rd.arithmetic_mean_bf));
        let _ = writeln!(out, "  geometric mean B10  = {}", num(rd.geometric_mean_bf));
    }
    for n in &r.notices {
        let _ = writeln!(out, "note: {n}");
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn check_text(r: &CheckReport) -> String {
    let mut out = String::new();
    integrability_text(&mut out, &r.integrability);
    out
}

pub fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::Auto => "auto",
        Backend::Quadrature => "quadrature",
        Backend::ImportanceSampling => "importance_sampling",
    }
}
