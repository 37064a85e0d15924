//! CSV, JSON and plain-text renderings.
//!
//! Floats are written in Rust's shortest round-trip form, so output is
//! byte-stable and parses back to the same value.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::analysis::GameClassReport;
use crate::calculus::DecompositionBundle;
use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::harness::sweep::SweepResult;
use crate::typed::TypedDecomposition;

pub const SWEEP_COLUMNS: [&str; 9] = [
    "algorithm",
    "lambda",
    "align",
    "eta",
    "trial",
    "verdict",
    "steps",
    "final_avg_abs_loss",
    "final_w_norm",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn trajectory_header(dim: usize, n_players: usize) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    h.extend((0..dim).map(|i| format!("w_{i}")));
    h.extend((0..n_players).map(|i| format!("loss_{i}")));
    h.push("H".into());
    h.push("xi_norm".into());
    h
}

pub fn write_trajectory_csv<W: Write>(out: W, t: &Trajectory) -> Result<()> {
    let first = &t.states[0];
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(first.w.len(), first.losses.len()))?;
    for s in &t.states {
        let mut rec = vec![s.step.to_string()];
        rec.extend(s.w.iter().map(|v| fmt_f64(*v)));
        rec.extend(s.losses.iter().map(|v| fmt_f64(*v)));
        rec.push(fmt_f64(s.hamiltonian));
        rec.push(fmt_f64(s.xi_norm));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(out: W, r: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for row in &r.rows {
        w.write_record([
            row.algorithm.as_str().to_string(),
            fmt_f64(row.lambda),
            row.align.to_string(),
            fmt_f64(row.eta),
            row.trial.to_string(),
            row.verdict.name().to_string(),
            row.steps.to_string(),
            fmt_f64(row.final_avg_abs_loss),
            fmt_f64(row.final_w_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_json<W: Write>(out: W, r: &SweepResult) -> Result<()> {
    serde_json::to_writer_pretty(out, r)?;
    Ok(())
}

fn vector(v: &DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("({})", items.join(", "))
}

fn matrix(name: &str, m: &DMatrix<f64>, out: &mut String) {
    let _ = writeln!(out, "{name} =");
    for r in 0..m.nrows() {
        let items: Vec<String> = m.row(r).iter().map(|x| format!("{:>12}", fmt_f64(*x))).collect();
        let _ = writeln!(out, "  [{}]", items.join(" "));
    }
}

pub fn render_decomposition(b: &DecompositionBundle, class: &GameClassReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "w = {}", vector(b.w.values()));
    let _ = writeln!(out, "xi = {}", vector(&b.xi));
    matrix("J", &b.jacobian, &mut out);
    matrix("S", &b.symmetric, &mut out);
    matrix("A", &b.antisymmetric, &mut out);
    let _ = writeln!(out, "H = {}", fmt_f64(b.hamiltonian));
    let _ = writeln!(out, "grad_H = {}", vector(&b.grad_hamiltonian));
    let _ = writeln!(out, "A^T xi = {}", vector(&b.adjustment));
    let _ = writeln!(
        out,
        "class = {} (max |S|_F = {}, max |A|_F = {}, {} samples)",
        class.class.as_str(),
        fmt_f64(class.s_norm),
        fmt_f64(class.a_norm),
        class.sample_points
    );
    out
}

pub fn render_typed(t: &TypedDecomposition, typed: &DVector<f64>, untyped: &DVector<f64>) -> String {
    let mut out = String::new();
    matrix("A12", &t.a12, &mut out);
    matrix("C21", &t.c21, &mut out);
    matrix("omega_tau", &t.omega_tau, &mut out);
    let _ = writeln!(out, "typed adjustment = {}", vector(typed));
    let _ = writeln!(out, "untyped A^T xi = {}", vector(untyped));
    out
}
