//! On-disk formats. Every output file opens with a provenance header: the
//! first line of JSONL files, a `# provenance ` comment line in CSV and text
//! files, and a leading `provenance` field in JSON files.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use summrank_core::features::{DocumentFeatures, FeatureMatrix, FeatureSpec, Normalization};
use summrank_core::pseudo::PseudoTarget;
use summrank_core::rerank::{CoefficientSet, Selection};
use summrank_core::selftrain::PseudoLabelRecord;
use summrank_core::semantic::ScorerId;
use summrank_core::Document;

use crate::config::{invalid, RunConfig};

pub const TOOL: &str = "summrank";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub config_digest: String,
    pub inputs: Vec<InputDigest>,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(stage: &str, config: &RunConfig, inputs: Vec<InputDigest>) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            stage: stage.to_string(),
            config_digest: config.digest(),
            inputs,
            config: config.canonical_json(),
        }
    }

    fn comment_line(&self) -> String {
        format!("# provenance {}\n", serde_json::to_string(self).expect("provenance serializes"))
    }
}

/// Digest of the raw bytes of an input file.
pub fn file_digest(role: &str, path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputDigest { role: role.to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
}

/// Writes through a temporary sibling and renames, so a failed stage never
/// leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = PathBuf::from(path);
    tmp.as_mut_os_string().push(".partial");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {}", tmp.display()))?;
    Ok(())
}

fn json_line<T: Serialize>(out: &mut Vec<u8>, value: &T) {
    serde_json::to_writer(&mut *out, value).expect("records serialize");
    out.push(b'\n');
}

/// Reads JSON lines; line numbers in errors are 1-based.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    Ok(lines)
}

fn parse_line<T: DeserializeOwned>(path: &Path, line_no: usize, line: &str) -> Result<T> {
    serde_json::from_str(line).map_err(|e| invalid(format!("{}:{line_no}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
struct Header<H> {
    provenance: Provenance,
    #[serde(flatten)]
    extra: H,
}

#[derive(Serialize, Deserialize)]
struct NoExtra {}

fn read_with_header<H: DeserializeOwned, T: DeserializeOwned>(path: &Path) -> Result<(Provenance, H, Vec<T>)> {
    let lines = read_lines(path)?;
    let Some(((first_no, first), rest)) = lines.split_first() else {
        return Err(invalid(format!("{}: empty file, expected a provenance header", path.display())));
    };
    let header: Header<H> = parse_line(path, *first_no, first)?;
    let records = rest.iter().map(|(no, line)| parse_line(path, *no, line)).collect::<Result<Vec<T>>>()?;
    Ok((header.provenance, header.extra, records))
}

fn write_with_header<H: Serialize, T: Serialize>(
    path: &Path,
    provenance: &Provenance,
    extra: H,
    records: &[T],
) -> Result<()> {
    let mut out = Vec::new();
    json_line(&mut out, &Header { provenance: provenance.clone(), extra });
    for r in records {
        json_line(&mut out, r);
    }
    write_atomic(path, &out)
}

/// Corpus JSONL: one document per line, no header. Errors name the line
/// and, when known, the document id.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (no, line) in read_lines(path)? {
        let doc: Document = parse_line(path, no, &line)?;
        doc.validate().map_err(|e| invalid(format!("{}:{no}: {e}", path.display())))?;
        if !seen.insert(doc.id.clone()) {
            return Err(invalid(format!("{}:{no}: document `{}`: duplicate document id", path.display(), doc.id)));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    let mut out = Vec::new();
    for d in docs {
        json_line(&mut out, d);
    }
    write_atomic(path, &out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatureHeader {
    features: Vec<String>,
    normalization: Normalization,
    mu_len: f64,
    scorers: Vec<ScorerId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureRecord {
    id: String,
    raw: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

pub fn write_features(
    path: &Path,
    provenance: &Provenance,
    matrix: &FeatureMatrix,
    scorers: &[ScorerId],
) -> Result<()> {
    let header = FeatureHeader {
        features: matrix.spec.names().into_iter().map(String::from).collect(),
        normalization: matrix.normalization,
        mu_len: matrix.mu_len,
        scorers: scorers.to_vec(),
    };
    let records: Vec<FeatureRecord> = matrix
        .documents
        .iter()
        .map(|d| FeatureRecord { id: d.id.clone(), raw: d.raw.clone(), values: d.values.clone() })
        .collect();
    write_with_header(path, provenance, header, &records)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let (_, header, records): (_, FeatureHeader, Vec<FeatureRecord>) = read_with_header(path)?;
    let spec = FeatureSpec::from_names(&header.features).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let matrix = FeatureMatrix {
        spec,
        normalization: header.normalization,
        mu_len: header.mu_len,
        documents: records.into_iter().map(|r| DocumentFeatures { id: r.id, raw: r.raw, values: r.values }).collect(),
    };
    matrix.check_shape().map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(matrix)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoTargetRecord {
    pub id: String,
    #[serde(flatten)]
    pub target: PseudoTarget,
}

pub fn write_pseudo_targets(path: &Path, provenance: &Provenance, records: &[PseudoTargetRecord]) -> Result<()> {
    write_with_header(path, provenance, NoExtra {}, records)
}

pub fn read_pseudo_targets(path: &Path) -> Result<Vec<PseudoTargetRecord>> {
    let (_, _, records): (_, NoExtra, _) = read_with_header(path)?;
    Ok(records)
}

#[derive(Serialize, Deserialize)]
struct CoefficientFile {
    provenance: Provenance,
    #[serde(flatten)]
    set: CoefficientSet,
}

/// Coefficient weights are stored rounded to this many decimals.
pub const COEFFICIENT_DECIMALS: i32 = 6;

pub fn write_coefficients(path: &Path, provenance: &Provenance, set: &CoefficientSet) -> Result<()> {
    let file = CoefficientFile { provenance: provenance.clone(), set: set.rounded(COEFFICIENT_DECIMALS) };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("coefficients serialize");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Rounded files satisfy the factorization to about 1e-6, not 1e-9.
pub const STORED_TOLERANCE: f64 = 1e-5;

pub fn read_coefficients(path: &Path) -> Result<CoefficientSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: CoefficientFile = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    file.set.check_invariants(STORED_TOLERANCE).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(file.set)
}

pub fn write_selections(path: &Path, provenance: &Provenance, selections: &[Selection]) -> Result<()> {
    write_with_header(path, provenance, NoExtra {}, selections)
}

pub fn read_selections(path: &Path) -> Result<Vec<Selection>> {
    let (_, _, records): (_, NoExtra, _) = read_with_header(path)?;
    Ok(records)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSummary {
    pub share: f64,
    pub flagged: usize,
    pub records: usize,
    pub mean_extractiveness: f64,
    pub extractiveness: String,
}

pub fn write_labels(
    path: &Path,
    provenance: &Provenance,
    summary: LabelSummary,
    records: &[PseudoLabelRecord],
) -> Result<()> {
    write_with_header(path, provenance, summary, records)
}

pub fn read_labels(path: &Path) -> Result<(LabelSummary, Vec<PseudoLabelRecord>)> {
    let (_, summary, records) = read_with_header(path)?;
    Ok((summary, records))
}

/// CSV with a provenance comment line.
pub fn write_csv<R: Serialize>(path: &Path, provenance: &Provenance, rows: &[R]) -> Result<()> {
    let mut out = provenance.comment_line().into_bytes();
    {
        let mut writer = csv::Writer::from_writer(&mut out);
        for row in rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
    }
    write_atomic(path, &out)
}

/// Reads a CSV written by [`write_csv`].
pub fn read_csv<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    reader.deserialize().map(|r| r.map_err(|e| invalid(format!("{}: {e}", path.display())))).collect()
}

pub fn write_text(path: &Path, provenance: &Provenance, body: &str) -> Result<()> {
    let mut out = provenance.comment_line();
    out.push_str(body);
    write_atomic(path, out.as_bytes())
}

pub fn write_plants(path: &Path, plants: &[summrank_core::synth::PlantRecord]) -> Result<()> {
    let mut out = Vec::new();
    for p in plants {
        json_line(&mut out, p);
    }
    write_atomic(path, &out)
}
