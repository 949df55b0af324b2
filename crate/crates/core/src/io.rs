//! CSV and JSON persistence.
//!
//! Dataset schema: `id`, `y_1..y_K`, `d_1..d_{n_d}`, then `a{k}_{alt}_{cov}`
//! for `k = 1..K`, `alt = 0..J_k`, `cov = 1..n_a`. Floats are written in
//! shortest round-trip form, so a write/read cycle is exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{MvmnpError, Result};
use crate::mcmc::McmcChain;
use crate::model::covariance::xi_from_kappa;
use crate::model::{ChoiceStructure, Dataset};

pub fn dataset_header(structure: &ChoiceStructure) -> Vec<String> {
    let mut h = vec!["id".to_string()];
    h.extend((1..=structure.num_choices()).map(|k| format!("y_{k}")));
    h.extend((1..=structure.n_individual).map(|d| format!("d_{d}")));
    for k in 0..structure.num_choices() {
        for alt in 0..=structure.alternatives(k) {
            for c in 1..=structure.n_alternative {
                h.push(format!("a{}_{alt}_{c}", k + 1));
            }
        }
    }
    h
}

fn csv_err(e: csv::Error) -> MvmnpError {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    MvmnpError::Parse { row, detail: e.to_string() }
}

pub fn write_dataset<W: Write>(data: &Dataset, structure: &ChoiceStructure, writer: W) -> Result<()> {
    data.check_structure(structure)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset_header(structure)).map_err(csv_err)?;
    let mut rec: Vec<String> = Vec::new();
    for i in 0..data.len() {
        rec.clear();
        rec.push((i + 1).to_string());
        rec.extend(data.choices(i).iter().map(|y| y.to_string()));
        rec.extend(data.individual(i).iter().map(|v| v.to_string()));
        for k in 0..structure.num_choices() {
            rec.extend(data.alternative_slice(i, k).iter().map(|v| v.to_string()));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| MvmnpError::Parse { row: 0, detail: e.to_string() })?;
    Ok(())
}

/// Parses a dataset; errors report the file line (header is line 1).
pub fn read_dataset<R: Read>(reader: R, structure: &ChoiceStructure) -> Result<Dataset> {
    structure.validate()?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    let expected = dataset_header(structure);
    let mut columns = Vec::with_capacity(expected.len());
    for name in &expected {
        match header.iter().position(|h| h.trim() == name) {
            Some(pos) => columns.push(pos),
            None => return Err(MvmnpError::Parse { row: 1, detail: format!("missing column `{name}`") }),
        }
    }
    let kc = structure.num_choices();
    let (mut choices, mut individual, mut alternative) = (Vec::new(), Vec::new(), Vec::new());
    let mut n = 0;
    for (idx, record) in r.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(csv_err)?;
        let field = |c: usize| record.get(columns[c]).unwrap_or("").trim();
        for k in 0..kc {
            let raw = field(1 + k);
            let y: usize = raw.parse().map_err(|_| MvmnpError::Parse {
                row: line,
                detail: format!("choice y_{} = `{raw}` is not a non-negative integer", k + 1),
            })?;
            if y > structure.alternatives(k) {
                return Err(MvmnpError::Parse {
                    row: line,
                    detail: format!("choice y_{} = {y} outside 0..={}", k + 1, structure.alternatives(k)),
                });
            }
            choices.push(y);
        }
        for c in 1 + kc..expected.len() {
            let raw = field(c);
            let v: f64 = raw.parse().map_err(|_| MvmnpError::Parse {
                row: line,
                detail: format!("column `{}` = `{raw}` is not a number", expected[c]),
            })?;
            if !v.is_finite() {
                return Err(MvmnpError::Parse { row: line, detail: format!("column `{}` is not finite", expected[c]) });
            }
            if c < 1 + kc + structure.n_individual {
                individual.push(v);
            } else {
                alternative.push(v);
            }
        }
        n += 1;
    }
    Dataset::from_flat(structure, n, choices, individual, alternative)
}

pub fn write_csv(path: &Path, data: &Dataset, structure: &ChoiceStructure) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(data, structure, &mut buf)?;
    write_atomic(path, &buf)
}

pub fn load_csv(path: &Path, structure: &ChoiceStructure) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| MvmnpError::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), structure)
}

/// Chain columns: `beta_*`, `xi_*`, then the lower triangle `sigma_{r}_{c}`.
pub fn write_chain<W: Write>(chain: &McmcChain, writer: W) -> Result<()> {
    let s = &chain.structure;
    let j = s.total_alternatives();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=s.coef_total()).map(|v| format!("beta_{v}")).collect();
    header.extend((1..=s.angle_total()).map(|v| format!("xi_{v}")));
    for r in 0..j {
        for c in 0..=r {
            header.push(format!("sigma_{}_{}", r + 1, c + 1));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for d in 0..chain.len() {
        let mut rec: Vec<String> = chain.beta_draw(d).iter().map(|v| v.to_string()).collect();
        rec.extend(xi_from_kappa(s, chain.kappa_draw(d))?.iter().map(|v| v.to_string()));
        let sigma = chain.sigma_draw(d)?;
        for r in 0..j {
            for c in 0..=r {
                rec.push(sigma[(r, c)].to_string());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| MvmnpError::Parse { row: 0, detail: e.to_string() })?;
    Ok(())
}

/// Reads the `θ = (β, ξ)` draws back from a chain file.
pub fn read_chain<R: Read>(reader: R, structure: &ChoiceStructure) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    let names: Vec<String> = (1..=structure.coef_total())
        .map(|v| format!("beta_{v}"))
        .chain((1..=structure.angle_total()).map(|v| format!("xi_{v}")))
        .collect();
    let columns: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| MvmnpError::Parse { row: 1, detail: format!("missing column `{n}`") })
        })
        .collect::<Result<_>>()?;
    let mut draws = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let theta = columns
            .iter()
            .map(|&c| {
                record.get(c).unwrap_or("").parse::<f64>().map_err(|e| MvmnpError::Parse { row: idx + 2, detail: e.to_string() })
            })
            .collect::<Result<Vec<f64>>>()?;
        draws.push(theta);
    }
    Ok(draws)
}

/// Writes CSV rows given as string vectors.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| MvmnpError::io(path, e))?;
    }
    write_atomic(path, &buf)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| MvmnpError::Config(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| MvmnpError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| MvmnpError::Parse { row: e.line(), detail: format!("{}: {e}", path.display()) })
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| MvmnpError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| MvmnpError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| MvmnpError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| MvmnpError::io(path, e))?))
}
