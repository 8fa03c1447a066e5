//! CSV writers for observables and the full-state snapshot format.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::cumulant_state::CumulantState;
use crate::error::{Error, Result};
use crate::observables::{Correlations, Ellipse, SpectrumPoint, SqueezedThermal};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// File name for observable `stem` at scaled time `t`, e.g. `intensity_t2.5.csv`.
pub fn file_name(stem: &str, t: f64) -> String {
    format!("{stem}_t{t}.csv")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_intensity<W: Write>(w: W, x: &[f64], intensity: &Array1<f64>) -> std::io::Result<()> {
    let mut wr = writer(w);
    wr.write_record(["j", "x", "intensity"]).map_err(io)?;
    for (j, (xj, i)) in x.iter().zip(intensity).enumerate() {
        wr.write_record([j.to_string(), fmt_f64(*xj), fmt_f64(*i)]).map_err(io)?;
    }
    wr.flush()
}

pub fn write_ellipse<W: Write>(w: W, x: &[f64], ellipses: &[Ellipse]) -> std::io::Result<()> {
    let mut wr = writer(w);
    wr.write_record(["j", "x", "B", "b", "phi"]).map_err(io)?;
    for (j, (xj, e)) in x.iter().zip(ellipses).enumerate() {
        wr.write_record([j.to_string(), fmt_f64(*xj), fmt_f64(e.major), fmt_f64(e.minor), fmt_f64(e.phi)])
            .map_err(io)?;
    }
    wr.flush()
}

pub fn write_squeezed_thermal<W: Write>(w: W, x: &[f64], params: &[SqueezedThermal]) -> std::io::Result<()> {
    let mut wr = writer(w);
    wr.write_record(["j", "x", "n", "r", "theta", "margin"]).map_err(io)?;
    for (j, (xj, p)) in x.iter().zip(params).enumerate() {
        wr.write_record([
            j.to_string(),
            fmt_f64(*xj),
            fmt_f64(p.n),
            fmt_f64(p.r),
            fmt_f64(p.theta),
            fmt_f64(p.squeezing_margin),
        ])
        .map_err(io)?;
    }
    wr.flush()
}

pub fn write_spectrum<W: Write>(w: W, points: &[SpectrumPoint]) -> std::io::Result<()> {
    let mut wr = writer(w);
    wr.write_record(["omega", "S", "S_min", "phi_opt"]).map_err(io)?;
    for p in points {
        wr.write_record([fmt_f64(p.omega), fmt_f64(p.s), fmt_f64(p.s_min), fmt_f64(p.phi_opt)])
            .map_err(io)?;
    }
    wr.flush()
}

/// Long form `omega1, omega2, eta`; missing values are left empty.
pub fn write_eta<W: Write>(w: W, c: &Correlations) -> std::io::Result<()> {
    let mut wr = writer(w);
    wr.write_record(["omega1", "omega2", "eta"]).map_err(io)?;
    for (a, w1) in c.omegas.iter().enumerate() {
        for (b, w2) in c.omegas.iter().enumerate() {
            let eta = c.eta[[a, b]].map(fmt_f64).unwrap_or_default();
            wr.write_record([fmt_f64(*w1), fmt_f64(*w2), eta]).map_err(io)?;
        }
    }
    wr.flush()
}

pub fn write_photons<W: Write>(w: W, c: &Correlations) -> std::io::Result<()> {
    let mut wr = writer(w);
    wr.write_record(["omega", "N"]).map_err(io)?;
    for (w1, n) in c.omegas.iter().zip(&c.photons) {
        wr.write_record([fmt_f64(*w1), fmt_f64(*n)]).map_err(io)?;
    }
    wr.flush()
}

/// Full state, one row per cell:
/// `j, x, t, s, cu, cv, intensity, cuu_0.., cuv_0.., cvv_0..`.
pub fn write_snapshot<W: Write>(w: W, st: &CumulantState, x: &[f64]) -> std::io::Result<()> {
    let m = st.m();
    let mut wr = writer(w);
    let mut header: Vec<String> = ["j", "x", "t", "s", "cu", "cv", "intensity"].iter().map(|s| s.to_string()).collect();
    for blk in ["cuu", "cuv", "cvv"] {
        header.extend((0..m).map(|k| format!("{blk}_{k}")));
    }
    wr.write_record(&header).map_err(io)?;
    let intensity = crate::observables::intensity(st);
    for j in 0..m {
        let mut row = vec![
            j.to_string(),
            fmt_f64(x[j]),
            fmt_f64(st.t),
            fmt_f64(st.s),
            fmt_f64(st.cu[j]),
            fmt_f64(st.cv[j]),
            fmt_f64(intensity[j]),
        ];
        for blk in [&st.cuu, &st.cuv, &st.cvv] {
            row.extend(blk.row(j).iter().map(|v| fmt_f64(*v)));
        }
        wr.write_record(&row).map_err(io)?;
    }
    wr.flush()
}

/// Snapshot contents: the state and the cell positions it was written with.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: CumulantState,
    pub x: Vec<f64>,
}

fn snap_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Snapshot { line, reason: reason.into() }
}

/// Reads a file produced by [`write_snapshot`].
pub fn load_snapshot<R: Read>(r: R) -> Result<Snapshot> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(r);
    let header = rd.headers().map_err(|e| snap_err(1, e.to_string()))?.clone();
    let width = header.len();
    if width < 10 || (width - 7) % 3 != 0 {
        return Err(snap_err(1, format!("unexpected column count {width}")));
    }
    let m = (width - 7) / 3;
    let expect_fixed = ["j", "x", "t", "s", "cu", "cv", "intensity"];
    for (i, name) in expect_fixed.iter().enumerate() {
        if &header[i] != *name {
            return Err(snap_err(1, format!("column {i} should be `{name}`")));
        }
    }
    for (b, blk) in ["cuu", "cuv", "cvv"].iter().enumerate() {
        for k in 0..m {
            if header[7 + b * m + k] != format!("{blk}_{k}") {
                return Err(snap_err(1, format!("column {} should be `{blk}_{k}`", 7 + b * m + k)));
            }
        }
    }
    let mut st = CumulantState {
        s: 0.0,
        t: 0.0,
        cu: Array1::zeros(m),
        cv: Array1::zeros(m),
        cuu: Array2::zeros((m, m)),
        cuv: Array2::zeros((m, m)),
        cvv: Array2::zeros((m, m)),
    };
    let mut x = Vec::with_capacity(m);
    let mut rows = 0usize;
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| snap_err(line, e.to_string()))?;
        if rows >= m {
            return Err(snap_err(line, format!("more than {m} rows")));
        }
        if rec.len() != width {
            return Err(snap_err(line, format!("expected {width} fields, got {}", rec.len())));
        }
        let num = |c: usize| -> Result<f64> {
            rec[c].trim().parse::<f64>().map_err(|_| snap_err(line, format!("bad number `{}` in column {c}", &rec[c])))
        };
        let j: usize = rec[0].trim().parse().map_err(|_| snap_err(line, "bad cell index"))?;
        if j != rows {
            return Err(snap_err(line, format!("cell index {j} out of order")));
        }
        x.push(num(1)?);
        let (t, s) = (num(2)?, num(3)?);
        if rows == 0 {
            st.t = t;
            st.s = s;
        } else if t.to_bits() != st.t.to_bits() || s.to_bits() != st.s.to_bits() {
            return Err(snap_err(line, "t and s must be the same on every row"));
        }
        st.cu[j] = num(4)?;
        st.cv[j] = num(5)?;
        for k in 0..m {
            st.cuu[[j, k]] = num(7 + k)?;
            st.cuv[[j, k]] = num(7 + m + k)?;
            st.cvv[[j, k]] = num(7 + 2 * m + k)?;
        }
        rows += 1;
    }
    if rows != m {
        return Err(snap_err(rows + 2, format!("expected {m} rows, got {rows}")));
    }
    crate::cumulant_state::check_ordering(st.s).map_err(|e| snap_err(2, e.to_string()))?;
    Ok(Snapshot { state: st, x })
}
