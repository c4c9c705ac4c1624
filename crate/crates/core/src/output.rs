//! Trajectory CSV and whitespace-separated plot data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::sim::Trajectory;

const AXES: [&str; 3] = ["x", "y", "z"];

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header(traj: &Trajectory) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for name in ["p", "v"] {
        for i in 1..=traj.agents {
            for axis in &AXES[..traj.dim] {
                h.push(format!("{name}[{i}].{axis}"));
            }
        }
    }
    h.extend((1..=traj.edges).map(|k| format!("e[{k}]")));
    if traj.mu_hat.is_some() {
        h.extend((1..=traj.edges).map(|k| format!("mu_hat[{k}]")));
    }
    h.extend((1..=traj.agents).map(|i| format!("s[{i}]")));
    h
}

pub fn write_trajectory_csv<W: std::io::Write>(traj: &Trajectory, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(csv_header(traj))?;
    for j in 0..traj.len() {
        let mut row = vec![format_float(traj.times[j])];
        row.extend(traj.p[j].iter().map(|x| format_float(*x)));
        row.extend(traj.v[j].iter().map(|x| format_float(*x)));
        row.extend(traj.e[j].iter().map(|x| format_float(*x)));
        if let Some(m) = &traj.mu_hat {
            row.extend(m[j].iter().map(|x| format_float(*x)));
        }
        row.extend(traj.speeds[j].iter().map(|x| format_float(*x)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory_csv(traj, BufWriter::new(File::create(path)?))
}

/// Reads a file written by [`write_trajectory_csv`], inferring the layout
/// from the header.
pub fn read_trajectory_csv<R: std::io::Read>(r: R) -> Result<Trajectory> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
    let agents = count("s[");
    let edges = count("e[");
    let estimates = count("mu_hat[");
    if agents == 0 || header.first().map(String::as_str) != Some("t") {
        return invalid("trajectory header lacks time or speed columns");
    }
    let dim = count("p[") / agents;
    if dim * agents != count("p[") || count("v[") != dim * agents {
        return invalid("trajectory header has inconsistent position columns");
    }
    if estimates != 0 && estimates != edges {
        return invalid("trajectory header has inconsistent estimate columns");
    }
    let expected = 1 + 2 * dim * agents + edges + estimates + agents;
    if header.len() != expected {
        return invalid(format!("trajectory header has {} columns, expected {expected}", header.len()));
    }
    let nm = dim * agents;
    let mut traj = Trajectory {
        dim,
        agents,
        edges,
        times: Vec::new(),
        p: Vec::new(),
        v: Vec::new(),
        e: Vec::new(),
        mu_hat: (estimates > 0).then(Vec::new),
        speeds: Vec::new(),
    };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("row {}: cannot parse '{s}'", line + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != expected {
            return invalid(format!("row {} has {} fields, expected {expected}", line + 2, row.len()));
        }
        let mut at = 1;
        let mut take = |k: usize| {
            let s = row[at..at + k].to_vec();
            at += k;
            s
        };
        traj.times.push(row[0]);
        traj.p.push(take(nm));
        traj.v.push(take(nm));
        traj.e.push(take(edges));
        if let Some(m) = &mut traj.mu_hat {
            m.push(take(edges));
        }
        traj.speeds.push(take(agents));
    }
    Ok(traj)
}

pub fn load_trajectory_csv(path: &Path) -> Result<Trajectory> {
    read_trajectory_csv(File::open(path)?)
}

/// Writes `# name ...` followed by whitespace-separated rows.
pub fn write_columns(path: &Path, names: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# {}", names.join(" "))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| format!("{x:.10e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}
