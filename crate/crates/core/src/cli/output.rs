use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::StudyRow;
use crate::geom::extrinsic_states;
use crate::hchart::{Grid, ScalarField};
use crate::solver::{assemble_residual, ProblemSpec};
use crate::Result;

pub const FIELD_COLUMNS: [&str; 9] =
    ["rho", "theta", "u", "v", "lambda1", "lambda2", "sigma_k", "theta_support", "residual"];

/// One CSV row, in the order of [`FIELD_COLUMNS`].
pub type FieldRow = [f64; 9];

/// Per-node fields of a solution, in node order (`theta` fastest).
pub fn fields_table(u: &ScalarField, spec: &ProblemSpec) -> Result<Vec<FieldRow>> {
    let grid = &spec.grid;
    let states = extrinsic_states(u, grid)?;
    let residual = assemble_residual(u, 1.0, spec)?;
    Ok(states
        .iter()
        .enumerate()
        .map(|(node, st)| {
            let (rho, theta) = grid.position(node);
            [
                rho,
                theta,
                st.u,
                st.v,
                st.lambda[0],
                st.lambda[1],
                st.sigma_k(spec.k),
                st.support,
                residual.values()[node],
            ]
        })
        .collect())
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn write_fields_csv<W: Write>(w: &mut W, rows: &[FieldRow]) -> io::Result<()> {
    writeln!(w, "{}", FIELD_COLUMNS.join(","))?;
    for row in rows {
        let mut first = true;
        for x in row {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            write!(w, "{x:.16e}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// SHA-256 over the sizes, radius and node coordinates of each grid.
pub fn grid_hash(grids: &[Grid]) -> String {
    let mut h = Sha256::new();
    for g in grids {
        h.update((g.n_rho() as u64).to_le_bytes());
        h.update((g.n_theta() as u64).to_le_bytes());
        h.update(g.chart().rho_max().to_le_bytes());
        for node in 0..g.len() {
            let (r, t) = g.position(node);
            h.update(r.to_le_bytes());
            h.update(t.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Writes to a sibling temporary file and renames it into place.
pub(super) fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut w = BufWriter::new(File::create(&tmp)?);
    body(&mut w)?;
    let f = w.into_inner().map_err(|e| e.into_error())?;
    f.sync_all()?;
    drop(f);
    std::fs::rename(&tmp, path)
}

/// First non-finite number in the fields or the report, if any.
pub(super) fn non_finite(report: &impl Serialize, fields: Option<&[FieldRow]>) -> Option<String> {
    if let Some(rows) = fields {
        for (node, row) in rows.iter().enumerate() {
            if let Some(c) = row.iter().position(|x| !x.is_finite()) {
                return Some(format!("non-finite {} at node {node}", super::FIELD_COLUMNS[c]));
            }
        }
    }
    // Optional fields are skipped when absent, so `null` only comes from NaN or infinity.
    let value = serde_json::to_value(report).ok()?;
    find_null(&value, String::new()).map(|p| format!("non-finite value in report at {p}"))
}

fn find_null(v: &serde_json::Value, path: String) -> Option<String> {
    match v {
        serde_json::Value::Null => Some(path),
        serde_json::Value::Array(a) => a.iter().enumerate().find_map(|(i, x)| find_null(x, format!("{path}[{i}]"))),
        serde_json::Value::Object(m) => m.iter().find_map(|(k, x)| find_null(x, format!("{path}.{k}"))),
        _ => None,
    }
}

pub(super) fn study_table(rows: &[StudyRow]) -> String {
    let fmt = |x: Option<f64>, prec: usize| x.map(|v| format!("{v:.prec$}")).unwrap_or_else(|| "-".into());
    let mut s = format!(
        "{:>6} {:>10} {:>6} {:>12} {:>12} {:>7} {:>8} {:>10} {:>12} {:>12} {:>7}",
        "grid", "h", "iters", "error", "mean_u", "order", "gap", "ratio", "eta_l1", "support", "order"
    );
    for r in rows {
        s.push('\n');
        s.push_str(&format!(
            "{:>6} {:>10.3e} {:>6} {:>12} {:>12.9} {:>7} {:>8.5} {:>10.7} {:>12.5e} {:>12.5e} {:>7}",
            r.n,
            r.h,
            r.newton_iterations,
            r.error.map(|e| format!("{e:.5e}")).unwrap_or_else(|| "-".into()),
            r.mean_u,
            fmt(r.order, 3),
            r.spacelike_gap,
            r.curvature_ratio,
            r.sup_eta_lambda1,
            r.support_residual,
            fmt(r.support_order, 3),
        ));
    }
    s
}
