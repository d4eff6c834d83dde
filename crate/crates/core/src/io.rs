//! On-disk formats: the diagnostics time series (CSV) and binary field
//! snapshots.
//!
//! Snapshot layout, all little-endian:
//!
//! ```text
//! "PITV"  version:u8 = 1  d:u8
//! n[d]:u64  len[d]:f64  t:f64
//! params: Λ μ ν m M ε δ γ as f64
//! ρ[N]:f64  u_0[N]:f64 .. u_{d-1}[N]:f64  ψ[N]:(re:f64, im:f64)
//! ```
//!
//! Arrays are row-major with axis 0 slowest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField, VectorField};
use crate::integrator::Observer;
use crate::model::{Params, State};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"PITV";
pub const SNAPSHOT_VERSION: u8 = 1;

pub fn timeseries_header() -> String {
    DiagnosticsRecord::COLUMNS.join(",")
}

/// One CSV row, 17 significant digits per value.
pub fn timeseries_row(record: &DiagnosticsRecord) -> String {
    record.values().iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
}

pub fn write_timeseries_to<W: Write>(records: &[DiagnosticsRecord], mut w: W) -> Result<()> {
    writeln!(w, "{}", timeseries_header())?;
    for r in records {
        writeln!(w, "{}", timeseries_row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timeseries(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    write_timeseries_to(records, BufWriter::new(File::create(path)?))
}

pub fn read_timeseries(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let bad = |line: usize, reason: String| {
        Error::MissingData(format!("{}: line {line}: {reason}", path.display()))
    };
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != timeseries_header() {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(i + 2, e.to_string()))?;
        let arr: [f64; 19] = vals
            .try_into()
            .map_err(|v: Vec<f64>| bad(i + 2, format!("expected 19 columns, got {}", v.len())))?;
        out.push(DiagnosticsRecord::from_values(&arr));
    }
    Ok(out)
}

/// Streams every `every`-th record (and the last one seen) to a CSV file.
pub struct CsvObserver<W: Write> {
    out: W,
    every: usize,
    last_written: Option<usize>,
    pending: Option<(usize, DiagnosticsRecord)>,
}

impl CsvObserver<BufWriter<File>> {
    pub fn create(path: &Path, every: usize) -> Result<Self> {
        CsvObserver::new(BufWriter::new(File::create(path)?), every)
    }
}

impl<W: Write> CsvObserver<W> {
    pub fn new(mut out: W, every: usize) -> Result<Self> {
        writeln!(out, "{}", timeseries_header())?;
        Ok(CsvObserver { out, every: every.max(1), last_written: None, pending: None })
    }

    /// Write the final record if the cadence skipped it, flush and return the writer.
    pub fn finish(mut self) -> Result<W> {
        if let Some((step, rec)) = self.pending.take() {
            if self.last_written != Some(step) {
                writeln!(self.out, "{}", timeseries_row(&rec))?;
            }
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Observer for CsvObserver<W> {
    fn observe(&mut self, step: usize, _: &State, record: &DiagnosticsRecord) -> Result<()> {
        if step % self.every == 0 {
            writeln!(self.out, "{}", timeseries_row(record))?;
            self.last_written = Some(step);
        }
        self.pending = Some((step, record.clone()));
        Ok(())
    }
}

/// A state together with the parameters it was produced with.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: State,
    pub params: Params,
}

pub fn write_snapshot_to<W: Write>(state: &State, params: &Params, mut w: W) -> Result<()> {
    let grid = state.grid();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&[SNAPSHOT_VERSION, grid.dim() as u8])?;
    for &n in grid.n() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    let mut put = |v: f64| w.write_all(&v.to_le_bytes());
    for &l in grid.len() {
        put(l)?;
    }
    put(state.t)?;
    for v in [
        params.lambda,
        params.mu,
        params.nu,
        params.m,
        params.big_m,
        params.epsilon,
        params.delta,
        params.gamma,
    ] {
        put(v)?;
    }
    for &v in state.rho.values() {
        put(v)?;
    }
    for c in state.u.components() {
        for &v in c.values() {
            put(v)?;
        }
    }
    for z in state.psi.values() {
        put(z.re)?;
        put(z.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshot(state: &State, params: &Params, path: &Path) -> Result<()> {
    write_snapshot_to(state, params, BufWriter::new(File::create(path)?))
}

struct SnapshotReader<R> {
    inner: R,
    path: PathBuf,
}

impl<R: Read> SnapshotReader<R> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::CorruptSnapshot { path: self.path.clone(), reason: reason.into() }
    }

    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        match self.inner.read_exact(&mut buf) {
            Ok(()) => Ok(buf),
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Err(self.corrupt(format!("truncated while reading {what}")))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>(what)?))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        (0..count).map(|_| self.f64(what)).collect()
    }
}

pub fn read_snapshot_from<R: Read>(inner: R, path: &Path) -> Result<Snapshot> {
    let mut r = SnapshotReader { inner, path: path.to_path_buf() };
    let magic = r.bytes::<4>("magic")?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(r.corrupt("bad magic"));
    }
    let [version, dim] = r.bytes::<2>("header")?;
    if version != SNAPSHOT_VERSION {
        return Err(r.corrupt(format!("unsupported version {version}")));
    }
    if !(1..=3).contains(&dim) {
        return Err(r.corrupt(format!("invalid dimension {dim}")));
    }
    let dim = dim as usize;
    let mut n = Vec::with_capacity(dim);
    for _ in 0..dim {
        let v = u64::from_le_bytes(r.bytes::<8>("grid size")?);
        n.push(usize::try_from(v).map_err(|_| r.corrupt("grid size overflows"))?);
    }
    let len = r.f64s(dim, "domain lengths")?;
    let grid = Grid::new(&n, &len).map_err(|e| r.corrupt(e.to_string()))?;
    let t = r.f64("time")?;
    let p = r.f64s(8, "parameters")?;
    let params = Params {
        lambda: p[0],
        mu: p[1],
        nu: p[2],
        m: p[3],
        big_m: p[4],
        epsilon: p[5],
        delta: p[6],
        gamma: p[7],
    };
    let count = grid.point_count();
    let rho = RealField::from_vec(&grid, r.f64s(count, "density")?)?;
    let comps = (0..dim)
        .map(|_| r.f64s(count, "velocity").and_then(|v| RealField::from_vec(&grid, v)))
        .collect::<Result<Vec<_>>>()?;
    let raw = r.f64s(2 * count, "wavefunction")?;
    let psi = ComplexField::from_vec(
        &grid,
        raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
    )?;
    let mut tail = [0u8; 1];
    if r.inner.read(&mut tail)? != 0 {
        return Err(r.corrupt("trailing bytes after the wavefunction"));
    }
    let state = State::new(t, psi, VectorField::from_components(comps)?, rho)?;
    Ok(Snapshot { state, params })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    read_snapshot_from(BufReader::new(File::open(path)?), path)
}

/// Read a snapshot and require it to live on `grid`.
pub fn read_snapshot_on(path: &Path, grid: &Arc<Grid>) -> Result<Snapshot> {
    let snap = read_snapshot(path)?;
    let g = snap.state.grid();
    if g.n() != grid.n() || g.len() != grid.len() {
        return Err(Error::CorruptSnapshot {
            path: path.to_path_buf(),
            reason: format!("grid {:?} x {:?} does not match the expected {:?} x {:?}", g.n(), g.len(), grid.n(), grid.len()),
        });
    }
    Ok(snap)
}
