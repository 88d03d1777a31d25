//! CSV and VTK emitters.

use std::io::Write;
use std::path::Path;

use crate::harness::{BenchRecord, RunStatus};
use crate::space::FESpace;
use crate::Result;

/// Header of the benchmark CSV; the column set is part of the tool's
/// contract and is emitted exactly as listed.
pub const CSV_HEADER: &str =
    "variant,p,levels,ndof,iters,setup_s,solve_s,apply_s,total_s,flops,bytes_model,op_intensity,mdof_per_s,operator_bytes";

/// Writes one record per row; floats use Rust's shortest round-trip
/// decimal formatting (plain decimal point, no separators).
pub fn emit_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&record_row(r));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

pub fn record_row(r: &BenchRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.variant,
        r.p,
        r.levels,
        r.ndof,
        r.iters,
        r.setup_s,
        r.solve_s,
        r.apply_s,
        r.total_s,
        r.flops,
        r.bytes_model,
        r.op_intensity,
        r.mdof_per_s,
        r.operator_bytes
    )
}

/// Parses a row back into a record (used by the round-trip tests and the
/// determinism checks).
pub fn parse_row(line: &str) -> Result<BenchRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 14 {
        return Err(crate::Error::invalid(format!(
            "expected 14 CSV fields, got {}",
            fields.len()
        )));
    }
    let f = |i: usize| -> Result<f64> {
        fields[i]
            .parse()
            .map_err(|e| crate::Error::invalid(format!("field {i}: {e}")))
    };
    let u = |i: usize| -> Result<u64> {
        fields[i]
            .parse()
            .map_err(|e| crate::Error::invalid(format!("field {i}: {e}")))
    };
    Ok(BenchRecord {
        variant: fields[0].to_string(),
        p: u(1)? as usize,
        levels: u(2)? as usize,
        ndof: u(3)? as usize,
        iters: u(4)? as usize,
        setup_s: f(5)?,
        solve_s: f(6)?,
        apply_s: f(7)?,
        total_s: f(8)?,
        flops: u(9)?,
        bytes_model: u(10)?,
        op_intensity: f(11)?,
        mdof_per_s: f(12)?,
        operator_bytes: u(13)?,
        status: RunStatus::Completed,
    })
}

/// Legacy ASCII structured-grid file with the displacement as a
/// 3-component point field on the p-lattice nodes.
pub fn emit_vtk(space: &FESpace, solution: &[f64], path: &Path) -> Result<()> {
    let [nx, ny, nz] = space.dofs_per_axis();
    let ns = space.scalar_ndof();
    debug_assert_eq!(solution.len(), 3 * ns);
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("displacement field\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_GRID\n");
    out.push_str(&format!("DIMENSIONS {nx} {ny} {nz}\n"));
    out.push_str(&format!("POINTS {ns} double\n"));
    for node in 0..ns {
        let [x, y, z] = space.node_coords(node);
        out.push_str(&format!("{x} {y} {z}\n"));
    }
    out.push_str(&format!("POINT_DATA {ns}\n"));
    out.push_str("VECTORS displacement double\n");
    for node in 0..ns {
        out.push_str(&format!(
            "{} {} {}\n",
            solution[node],
            solution[ns + node],
            solution[2 * ns + node]
        ));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
