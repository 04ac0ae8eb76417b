//! CSV and text serialization of results.
//!
//! Propagator text format:
//!
//! ```text
//! # propagator
//! dim <n>
//! re
//! <n rows of n whitespace-separated numbers>
//! im
//! <n rows of n whitespace-separated numbers>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::io::Write;

use crate::dynamics::PopulationSample;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::protocols::{FringeRecord, GateTimeResult, SpectroscopyMap, TransitionLine, ZetaComparison};
use crate::tomography::{Ptm, QptResult, PAULI_LABELS};
use crate::units::{to_ghz, to_mhz, to_ns};

/// Largest propagator dimension accepted by the parser.
pub const MAX_PROPAGATOR_DIM: usize = 1024;

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Rounds to 12 significant digits, removing unit-conversion noise.
pub fn tidy(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn flush<W: Write>(mut wr: csv::Writer<W>) -> Result<()> {
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// time_ns, P00, P01, P10, P11, leak_total.
pub fn write_populations_csv<W: Write>(w: W, samples: &[PopulationSample]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["time_ns", "P00", "P01", "P10", "P11", "leak_total"]).map_err(csv_err)?;
    for s in samples {
        wr.write_record([
            tidy(to_ns(s.time)).to_string(),
            s.p[0].to_string(),
            s.p[1].to_string(),
            s.p[2].to_string(),
            s.p[3].to_string(),
            s.leak.to_string(),
        ])
        .map_err(csv_err)?;
    }
    flush(wr)
}

/// One row per drive time of a Ramsey fringe.
pub fn write_fringe_csv<W: Write>(w: W, rec: &FringeRecord) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["dt_ns", "total_time_ns", "p1", "phase_rad", "P00", "P01", "P10", "P11", "leak_total"]).map_err(csv_err)?;
    for i in 0..rec.dt.len() {
        let pop = &rec.populations[i];
        wr.write_record([
            tidy(to_ns(rec.dt[i])).to_string(),
            tidy(to_ns(rec.total_time[i])).to_string(),
            rec.p1[i].to_string(),
            rec.phase[i].to_string(),
            pop.p[0].to_string(),
            pop.p[1].to_string(),
            pop.p[2].to_string(),
            pop.p[3].to_string(),
            pop.leak.to_string(),
        ])
        .map_err(csv_err)?;
    }
    flush(wr)
}

pub fn write_spectroscopy_csv<W: Write>(w: W, map: &SpectroscopyMap) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["drive_GHz", "Omega_MHz", "P_excited"]).map_err(csv_err)?;
    for (a, row) in map.amps.iter().zip(&map.excited) {
        for (f, p) in map.freqs.iter().zip(row) {
            wr.write_record([tidy(to_ghz(*f)).to_string(), tidy(to_mhz(*a)).to_string(), p.to_string()]).map_err(csv_err)?;
        }
    }
    flush(wr)
}

pub fn write_lines_csv<W: Write>(w: W, lines: &[TransitionLine]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["qubit", "photons", "predicted_GHz", "fitted_GHz", "peak"]).map_err(csv_err)?;
    for l in lines {
        wr.write_record([
            format!("{:?}", l.qubit),
            l.photons.to_string(),
            tidy(to_ghz(l.predicted)).to_string(),
            opt(l.fitted.map(|x| tidy(to_ghz(x)))),
            l.peak.to_string(),
        ])
        .map_err(csv_err)?;
    }
    flush(wr)
}

/// omega_d_GHz, Omega_MHz, phase_diff_rad, t_zzpi_ns, diverged.
pub fn write_sweep_csv<W: Write>(w: W, results: &[GateTimeResult]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["omega_d_GHz", "Omega_MHz", "phase_diff_rad", "t_zzpi_ns", "diverged"]).map_err(csv_err)?;
    for r in results {
        wr.write_record([
            tidy(to_ghz(r.omega_d)).to_string(),
            tidy(to_mhz(r.amplitude)).to_string(),
            r.phase_diff().to_string(),
            opt(r.t_zzpi.map(|x| tidy(to_ns(x)))),
            r.diverged.to_string(),
        ])
        .map_err(csv_err)?;
    }
    flush(wr)
}

/// omega_d_GHz, Omega_MHz, zeta_pert_MHz, zeta_numeric_MHz, flagged.
pub fn write_pert_compare_csv<W: Write>(w: W, rows: &[ZetaComparison]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["omega_d_GHz", "Omega_MHz", "zeta_pert_MHz", "zeta_numeric_MHz", "flagged"]).map_err(csv_err)?;
    for r in rows {
        wr.write_record([
            tidy(to_ghz(r.omega_d)).to_string(),
            tidy(to_mhz(r.amplitude)).to_string(),
            opt(r.zeta_pert.map(|x| tidy(to_mhz(x)))),
            opt(r.zeta_numeric.map(|x| tidy(to_mhz(x)))),
            r.flagged.to_string(),
        ])
        .map_err(csv_err)?;
    }
    flush(wr)
}

/// 16×16 PTM with Pauli labels on the header row and first column.
pub fn write_ptm_csv<W: Write>(w: W, r: &Ptm) -> Result<()> {
    let mut wr = csv_writer(w);
    let mut header = vec![String::new()];
    header.extend(PAULI_LABELS.iter().map(|s| s.to_string()));
    wr.write_record(&header).map_err(csv_err)?;
    for (k, label) in PAULI_LABELS.iter().enumerate() {
        let mut row = vec![label.to_string()];
        row.extend((0..16).map(|l| r[(k, l)].to_string()));
        wr.write_record(&row).map_err(csv_err)?;
    }
    flush(wr)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| parse_err(line, format!("not a number: {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

/// Parses the output of [`write_ptm_csv`]. Labels must match II…ZZ in order.
pub fn parse_ptm_csv(text: &str) -> Result<Ptm> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut r = Ptm::zeros(16, 16);
    let mut rows = 0;
    for (i, rec) in rd.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != 17 {
            return Err(parse_err(line, format!("expected 17 fields, found {}", rec.len())));
        }
        if i == 0 {
            for (l, label) in PAULI_LABELS.iter().enumerate() {
                if rec[l + 1].trim() != *label {
                    return Err(parse_err(line, format!("column {} should be {label}, found {:?}", l + 1, &rec[l + 1])));
                }
            }
            continue;
        }
        let k = i - 1;
        if k >= 16 {
            return Err(parse_err(line, "more than 16 data rows"));
        }
        if rec[0].trim() != PAULI_LABELS[k] {
            return Err(parse_err(line, format!("row label should be {}, found {:?}", PAULI_LABELS[k], &rec[0])));
        }
        for l in 0..16 {
            r[(k, l)] = parse_f64(&rec[l + 1], line)?;
        }
        rows += 1;
    }
    if rows != 16 {
        return Err(parse_err(rows + 1, format!("expected 16 data rows, found {rows}")));
    }
    Ok(r)
}

/// Complex matrix as re_0.., im_0.. columns, one row per matrix row.
pub fn write_complex_csv<W: Write>(w: W, m: &CMat) -> Result<()> {
    let mut wr = csv_writer(w);
    let n = m.ncols();
    let mut header: Vec<String> = (0..n).map(|j| format!("re_{j}")).collect();
    header.extend((0..n).map(|j| format!("im_{j}")));
    wr.write_record(&header).map_err(csv_err)?;
    for i in 0..m.nrows() {
        let mut row: Vec<String> = (0..n).map(|j| m[(i, j)].re.to_string()).collect();
        row.extend((0..n).map(|j| m[(i, j)].im.to_string()));
        wr.write_record(&row).map_err(csv_err)?;
    }
    flush(wr)
}

pub fn write_propagator<W: Write>(mut w: W, u: &CMat) -> Result<()> {
    let n = u.nrows();
    writeln!(w, "# propagator")?;
    writeln!(w, "dim {n}")?;
    for (name, part) in [("re", 0), ("im", 1)] {
        writeln!(w, "{name}")?;
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| if part == 0 { u[(i, j)].re } else { u[(i, j)].im }.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    Ok(())
}

pub fn parse_propagator(text: &str) -> Result<CMat> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, first) = lines.next().ok_or_else(|| parse_err(1, "empty propagator"))?;
    let n: usize = first
        .strip_prefix("dim")
        .map(str::trim)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(ln, format!("expected `dim <n>`, found {first:?}")))?;
    if n == 0 || n > MAX_PROPAGATOR_DIM {
        return Err(parse_err(ln, format!("dimension {n} outside 1..={MAX_PROPAGATOR_DIM}")));
    }
    let mut parts = [Vec::with_capacity(n * n), Vec::with_capacity(n * n)];
    for (idx, name) in ["re", "im"].iter().enumerate() {
        let (ln, head) = lines.next().ok_or_else(|| parse_err(ln, format!("missing `{name}` block")))?;
        if head != *name {
            return Err(parse_err(ln, format!("expected `{name}`, found {head:?}")));
        }
        for _ in 0..n {
            let (ln, row) = lines.next().ok_or_else(|| parse_err(ln, format!("`{name}` block has fewer than {n} rows")))?;
            let vals = row.split_whitespace().map(|t| parse_f64(t, ln)).collect::<Result<Vec<f64>>>()?;
            if vals.len() != n {
                return Err(parse_err(ln, format!("expected {n} values, found {}", vals.len())));
            }
            parts[idx].extend(vals);
        }
    }
    if let Some((ln, extra)) = lines.next() {
        return Err(parse_err(ln, format!("trailing content {extra:?}")));
    }
    Ok(CMat::from_fn(n, n, |i, j| c(parts[0][i * n + j], parts[1][i * n + j])))
}

/// Human-readable summary of a tomography run.
pub fn write_qpt_report<W: Write>(mut w: W, r: &QptResult, header: &[(String, String)]) -> Result<()> {
    writeln!(w, "process tomography report")?;
    for (k, v) in header {
        writeln!(w, "{k}: {v}")?;
    }
    writeln!(w, "F_avg_raw: {:.6}", r.fidelity_raw.average)?;
    writeln!(w, "F_avg_proj: {:.6}", r.fidelity.average)?;
    writeln!(w, "F_pro_raw: {:.6}", r.fidelity_raw.process)?;
    writeln!(w, "F_pro_proj: {:.6}", r.fidelity.process)?;
    writeln!(w, "eta: {:.6e}", r.eta)?;
    writeln!(w, "max_leakage: {:.6e}", r.max_leakage)?;
    writeln!(w, "warnings: {}", r.warnings.len())?;
    for warn in &r.warnings {
        writeln!(w, "  {warn}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::ptm_from_unitary;
    use proptest::prelude::*;

    #[test]
    fn ptm_csv_round_trip() {
        let u = CMat::from_fn(4, 4, |i, j| if i + j == 3 { c(0.0, 1.0) } else { c(0.0, 0.0) });
        let r = ptm_from_unitary(&u);
        let mut buf = Vec::new();
        write_ptm_csv(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(",II,IX"));
        assert_eq!(parse_ptm_csv(&text).unwrap(), r);
    }

    #[test]
    fn ptm_csv_rejects_bad_label() {
        let mut buf = Vec::new();
        write_ptm_csv(&mut buf, &Ptm::identity(16, 16)).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("\nXY,", "\nYX,", 1);
        match parse_ptm_csv(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn propagator_errors_carry_line() {
        let bad = "dim 2\nre\n1 0\n0 1\nim\n0 x\n0 0\n";
        match parse_propagator(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
        assert!(parse_propagator("dim 0\n").is_err());
        assert!(parse_propagator("dim 99999999\n").is_err());
    }

    proptest! {
        #[test]
        fn propagator_round_trip(n in 1usize..6, vals in proptest::collection::vec(-1e3f64..1e3, 72)) {
            let m = CMat::from_fn(n, n, |i, j| c(vals[(i * n + j) % 72], vals[(i * n + j + 36) % 72]));
            let mut buf = Vec::new();
            write_propagator(&mut buf, &m).unwrap();
            let back = parse_propagator(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn parsers_never_panic(s in "\\PC{0,200}") {
            let _ = parse_propagator(&s);
            let _ = parse_ptm_csv(&s);
        }
    }
}
