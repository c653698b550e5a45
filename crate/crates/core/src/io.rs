//! File formats: JSON for matrices, eigensystems and results, CSV for
//! spectra. All numbers are written as `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BerryResult;
use crate::linalg::{CMatrix, EigenSystem, Hamiltonian};
use crate::response::{Campaign, CampaignMode, ResponseSpectrum};
use crate::retrieval::{Method, RetrievedMode};
use crate::scalar::{Real, C};

pub const SCHEMA_VERSION: &str = "v1";
pub const SPECTRUM_HEADER: [&str; 5] = ["omega_rad_s", "re_amp", "im_amp", "source_idx", "probe_idx"];
pub const BERRY_CSV_HEADER: [&str; 4] = ["step", "arg_proj_rev", "arg_proj_lev", "cum_phase"];

fn pack<T: Real>(z: &C<T>) -> [f64; 2] {
    [z.re.as_f64(), z.im.as_f64()]
}

fn unpack<T: Real>(z: &[f64; 2]) -> C<T> {
    C::new(T::lit(z[0]), T::lit(z[1]))
}

fn pack_matrix<T: Real>(m: &CMatrix<T>) -> Vec<[f64; 2]> {
    m.as_slice().iter().map(pack).collect()
}

fn unpack_matrix<T: Real>(n: usize, data: &[[f64; 2]], what: &str) -> Result<CMatrix<T>> {
    if data.len() != n * n {
        return Err(Error::schema(
            what,
            format!("expected {} entries for dim {n}, found {}", n * n, data.len()),
        ));
    }
    CMatrix::from_row_major(n, n, data.iter().map(unpack).collect())
        .ok_or_else(|| Error::schema(what, "malformed matrix"))
}

fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn from_json<'a, D: Deserialize<'a>>(text: &'a str, what: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::schema(format!("{what}:{}:{}", e.line(), e.column()), e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct HamiltonianDoc {
    dim: usize,
    entries: Vec<[f64; 2]>,
    label: String,
}

pub fn hamiltonian_to_json<T: Real>(h: &Hamiltonian<T>) -> String {
    to_json(&HamiltonianDoc {
        dim: h.dim(),
        entries: pack_matrix(h.entries()),
        label: h.label().to_string(),
    })
}

pub fn hamiltonian_from_json<T: Real>(text: &str) -> Result<Hamiltonian<T>> {
    let doc: HamiltonianDoc = from_json(text, "hamiltonian")?;
    let m = unpack_matrix(doc.dim, &doc.entries, "hamiltonian.entries")?;
    Hamiltonian::new(m, doc.label).map_err(|e| Error::schema("hamiltonian", e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct EigenSystemDoc {
    schema: String,
    dim: usize,
    eigenvalues: Vec<[f64; 2]>,
    /// Right eigenvectors as columns, row-major.
    rev: Vec<[f64; 2]>,
    /// Left eigenvectors as rows, row-major.
    lev: Vec<[f64; 2]>,
    condition: Vec<f64>,
}

pub fn eigensystem_to_json<T: Real>(es: &EigenSystem<T>) -> String {
    to_json(&EigenSystemDoc {
        schema: SCHEMA_VERSION.into(),
        dim: es.dim(),
        eigenvalues: es.eigenvalues.iter().map(pack).collect(),
        rev: pack_matrix(&es.rev),
        lev: pack_matrix(&es.lev),
        condition: es.condition.iter().map(|c| c.as_f64()).collect(),
    })
}

pub fn eigensystem_from_json<T: Real>(text: &str) -> Result<EigenSystem<T>> {
    let doc: EigenSystemDoc = from_json(text, "eigensystem")?;
    if doc.schema != SCHEMA_VERSION {
        return Err(Error::schema("eigensystem.schema", format!("unsupported version {:?}", doc.schema)));
    }
    let n = doc.dim;
    if doc.eigenvalues.len() != n || doc.condition.len() != n {
        return Err(Error::schema("eigensystem", format!("expected {n} eigenvalues and condition numbers")));
    }
    Ok(EigenSystem {
        eigenvalues: doc.eigenvalues.iter().map(unpack).collect(),
        rev: unpack_matrix(n, &doc.rev, "eigensystem.rev")?,
        lev: unpack_matrix(n, &doc.lev, "eigensystem.lev")?,
        condition: doc.condition.iter().map(|&c| T::lit(c)).collect(),
    })
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_spectrum_csv<T: Real, W: Write>(s: &ResponseSpectrum<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(format!("writing spectrum: {e}"));
    w.write_record(SPECTRUM_HEADER).map_err(io)?;
    let (src, probe) = (s.source_idx.to_string(), s.probe_idx.to_string());
    for (&omega, a) in s.omega_grid.iter().zip(&s.amplitudes) {
        w.write_record([
            fmt17(omega.as_f64()),
            fmt17(a.re.as_f64()),
            fmt17(a.im.as_f64()),
            src.clone(),
            probe.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("writing spectrum: {e}")))?;
    Ok(())
}

pub fn spectrum_csv_string<T: Real>(s: &ResponseSpectrum<T>) -> String {
    let mut buf = Vec::new();
    write_spectrum_csv(s, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Parses a spectrum CSV. `name` prefixes error locations.
pub fn read_spectrum_csv<T: Real, R: Read>(input: R, name: &str) -> Result<ResponseSpectrum<T>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd
        .headers()
        .map_err(|e| Error::schema(format!("{name}:1"), e.to_string()))?
        .clone();
    if header.iter().map(str::trim).ne(SPECTRUM_HEADER.iter().copied()) {
        return Err(Error::schema(
            format!("{name}:1"),
            format!("header must be {}", SPECTRUM_HEADER.join(",")),
        ));
    }
    let mut grid = Vec::new();
    let mut amps = Vec::new();
    let mut ids: Option<(usize, usize)> = None;
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::schema(format!("{name}:{line}"), e.to_string()))?;
        if rec.len() != SPECTRUM_HEADER.len() {
            return Err(Error::schema(
                format!("{name}:{line}"),
                format!("expected {} columns, found {}", SPECTRUM_HEADER.len(), rec.len()),
            ));
        }
        let real = |col: usize| -> Result<f64> {
            let v: f64 = rec[col].trim().parse().map_err(|_| {
                Error::schema(
                    format!("{name}:{line}:{}", SPECTRUM_HEADER[col]),
                    format!("not a number: {:?}", &rec[col]),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::schema(format!("{name}:{line}:{}", SPECTRUM_HEADER[col]), "non-finite value"));
            }
            Ok(v)
        };
        let index = |col: usize| -> Result<usize> {
            match rec[col].trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(Error::schema(
                    format!("{name}:{line}:{}", SPECTRUM_HEADER[col]),
                    format!("expected a 1-based site index, found {:?}", &rec[col]),
                )),
            }
        };
        let omega = real(0)?;
        let a = C::new(T::lit(real(1)?), T::lit(real(2)?));
        let pair = (index(3)?, index(4)?);
        match ids {
            None => ids = Some(pair),
            Some(p) if p != pair => {
                return Err(Error::schema(
                    format!("{name}:{line}"),
                    "source_idx/probe_idx change within one spectrum",
                ))
            }
            _ => {}
        }
        if let Some(&prev) = grid.last() {
            if !(T::lit(omega) > prev) {
                return Err(Error::schema(
                    format!("{name}:{line}:omega_rad_s"),
                    "frequency grid must be strictly ascending",
                ));
            }
        }
        grid.push(T::lit(omega));
        amps.push(a);
    }
    let (src, probe) = ids.ok_or_else(|| Error::schema(name, "no data rows"))?;
    ResponseSpectrum::new(grid, amps, src, probe, C::new(T::one(), T::zero()))
        .map_err(|e| Error::schema(name, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub mode: CampaignMode,
    pub fixed_idx: usize,
    /// Spectrum CSVs, relative to the manifest's directory.
    pub files: Vec<String>,
}

/// Writes one CSV per spectrum plus `<stem>.json` into `dir`; returns the
/// manifest path.
pub fn write_campaign<T: Real>(c: &Campaign<T>, dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::InvalidInput(format!("creating {}: {e}", dir.display())))?;
    let mut files = Vec::with_capacity(c.dim());
    for s in &c.spectra {
        let name = format!("{stem}_s{}_p{}.csv", s.source_idx, s.probe_idx);
        write_file(&dir.join(&name), spectrum_csv_string(s).as_bytes())?;
        files.push(name);
    }
    let manifest = CampaignManifest {
        mode: c.mode,
        fixed_idx: c.fixed_idx,
        files,
    };
    let path = dir.join(format!("{stem}.json"));
    write_file(&path, to_json(&manifest).as_bytes())?;
    Ok(path)
}

pub fn read_campaign<T: Real>(manifest: &Path) -> Result<Campaign<T>> {
    let mname = manifest.display().to_string();
    let text = fs::read_to_string(manifest).map_err(|e| Error::schema(&mname, e.to_string()))?;
    let m: CampaignManifest = from_json(&text, &mname)?;
    if m.files.is_empty() {
        return Err(Error::schema(format!("{mname}:files"), "manifest lists no files"));
    }
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut spectra = Vec::with_capacity(m.files.len());
    for (i, f) in m.files.iter().enumerate() {
        let path = base.join(f);
        let file = fs::File::open(&path)
            .map_err(|e| Error::schema(format!("{mname}:files[{i}]"), format!("{}: {e}", path.display())))?;
        spectra.push(read_spectrum_csv(file, f)?);
    }
    Campaign::new(spectra, m.mode, m.fixed_idx).map_err(|e| Error::schema(mname, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedModeDoc {
    pub kind: CampaignMode,
    pub mode_idx: usize,
    /// Imaginary part is null for peak-sampled modes.
    pub omega_n: (f64, Option<f64>),
    pub entries: Vec<[f64; 2]>,
    pub method: Method,
    pub quality: f64,
}

impl<T: Real> From<&RetrievedMode<T>> for RetrievedModeDoc {
    fn from(m: &RetrievedMode<T>) -> Self {
        Self {
            kind: m.kind,
            mode_idx: m.mode_idx,
            omega_n: (m.omega_re.as_f64(), m.omega_im.map(|x| x.as_f64())),
            entries: m.entries.iter().map(pack).collect(),
            method: m.method,
            quality: m.quality.as_f64(),
        }
    }
}

impl RetrievedModeDoc {
    pub fn to_mode<T: Real>(&self) -> RetrievedMode<T> {
        RetrievedMode {
            mode_idx: self.mode_idx,
            omega_re: T::lit(self.omega_n.0),
            omega_im: self.omega_n.1.map(T::lit),
            entries: self.entries.iter().map(unpack).collect(),
            kind: self.kind,
            method: self.method,
            quality: T::lit(self.quality),
        }
    }
}

pub fn retrieved_mode_to_json<T: Real>(m: &RetrievedMode<T>) -> String {
    to_json(&RetrievedModeDoc::from(m))
}

pub fn retrieved_mode_from_json<T: Real>(text: &str) -> Result<RetrievedMode<T>> {
    let doc: RetrievedModeDoc = from_json(text, "retrieved_mode")?;
    Ok(doc.to_mode())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerryDoc {
    pub theta: f64,
    pub cumulative: Vec<f64>,
    /// `<Ref|R_k>` per point.
    pub projections: Vec<[f64; 2]>,
    /// `<L_k|Ref>` per point.
    pub projections_lev: Vec<[f64; 2]>,
    pub steps: usize,
    pub cycles: usize,
}

impl<T: Real> From<&BerryResult<T>> for BerryDoc {
    fn from(b: &BerryResult<T>) -> Self {
        Self {
            theta: b.theta.as_f64(),
            cumulative: b.cumulative.iter().map(|x| x.as_f64()).collect(),
            projections: b.projections_rev.iter().map(pack).collect(),
            projections_lev: b.projections_lev.iter().map(pack).collect(),
            steps: b.steps,
            cycles: b.cycles,
        }
    }
}

pub fn berry_to_json<T: Real>(b: &BerryResult<T>) -> String {
    to_json(&BerryDoc::from(b))
}

pub fn berry_from_json(text: &str) -> Result<BerryDoc> {
    from_json(text, "berry")
}

pub fn berry_csv_string<T: Real>(b: &BerryResult<T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BERRY_CSV_HEADER).expect("writing to memory");
    for k in 0..b.cumulative.len() {
        w.write_record([
            k.to_string(),
            fmt17(b.projections_rev[k].arg().as_f64()),
            fmt17(b.projections_lev[k].arg().as_f64()),
            fmt17(b.cumulative[k].as_f64()),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("ascii output")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::InvalidInput(format!("writing {}: {e}", path.display())))
}
