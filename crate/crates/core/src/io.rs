//! File formats: the versioned noise-model document, JSON-lines observation
//! and posterior streams, and the label sidecar written next to simulated
//! datasets. Class labels are one-based in every external format.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter};

use crate::error::{Error, Result};
use crate::sampler::{ChainConfig, ChainDiagnostics, NoiseModel, NoiseSample};
use crate::types::{ClassLabel, ClassPrior, ProbVec};

pub const SCHEMA_VERSION: u32 = 1;

/// Compact JSON that writes every float with 17 significant digits.
struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        CompactFormatter.write_f32(writer, value)
    }
}

fn to_string_17<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// On-disk layout of a noise model. Each sample row is `[θ_1 … θ_M, κ, γ]`.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    #[serde(rename = "M")]
    classes: usize,
    pi: ClassPrior,
    samples: Vec<Vec<f64>>,
    config_echo: ChainConfig,
    #[serde(default)]
    diagnostics: Option<ChainDiagnostics>,
}

pub fn model_to_json(model: &NoiseModel, diagnostics: Option<&ChainDiagnostics>) -> Result<String> {
    let doc = ModelDocument {
        version: SCHEMA_VERSION,
        classes: model.classes,
        pi: model.pi.clone(),
        samples: model
            .samples
            .iter()
            .map(|s| {
                let mut row = s.thetas.clone();
                row.push(s.kappa);
                row.push(s.gamma);
                row
            })
            .collect(),
        config_echo: model.config.clone(),
        diagnostics: diagnostics.cloned(),
    };
    to_string_17(&doc)
}

pub fn model_from_json(json: &str) -> Result<(NoiseModel, Option<ChainDiagnostics>)> {
    let doc: ModelDocument = serde_json::from_str(json)?;
    if doc.version != SCHEMA_VERSION {
        return Err(Error::Data(format!("unsupported model version {}", doc.version)));
    }
    if doc.pi.classes() != doc.classes {
        return Err(Error::DimensionMismatch {
            expected: doc.classes,
            actual: doc.pi.classes(),
        });
    }
    let width = doc.classes + 2;
    let samples = doc
        .samples
        .into_iter()
        .map(|row| {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: row.len(),
                });
            }
            Ok(NoiseSample {
                thetas: row[..doc.classes].to_vec(),
                kappa: row[doc.classes],
                gamma: row[doc.classes + 1],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = NoiseModel::new(doc.pi, samples, doc.config_echo)?;
    Ok((model, doc.diagnostics))
}

/// One input frame: `{"t": <int>, "probs": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub t: u64,
    pub probs: Vec<f64>,
}

/// One output frame: `{"t", "posterior", "label", "mode"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub t: u64,
    pub posterior: Vec<f64>,
    pub label: usize,
    pub mode: String,
}

impl PosteriorRecord {
    pub fn new(t: u64, posterior: &ProbVec, label: ClassLabel, mode: &str) -> Self {
        Self {
            t,
            posterior: posterior.as_slice().to_vec(),
            label: label.one_based(),
            mode: mode.to_string(),
        }
    }
}

/// Reads a JSON-lines observation stream. Blank lines are skipped; each
/// probability vector is renormalized within the file-input tolerance.
pub fn read_observations<R: BufRead>(reader: R) -> Result<Vec<(u64, ProbVec)>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ObservationRecord =
            serde_json::from_str(&line).map_err(|e| Error::Data(format!("line {}: {e}", lineno + 1)))?;
        let x = ProbVec::from_io(&rec.probs).map_err(|e| Error::Data(format!("line {}: {e}", lineno + 1)))?;
        if let Some((_, first)) = out.first() {
            let first: &ProbVec = first;
            if first.len() != x.len() {
                return Err(Error::Data(format!(
                    "line {}: expected {} probabilities, got {}",
                    lineno + 1,
                    first.len(),
                    x.len()
                )));
            }
        }
        out.push((rec.t, x));
    }
    Ok(out)
}

pub fn write_observations<W: Write>(mut writer: W, obs: &[ProbVec]) -> Result<()> {
    for (t, x) in obs.iter().enumerate() {
        let rec = ObservationRecord {
            t: t as u64,
            probs: x.as_slice().to_vec(),
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_posterior_line<W: Write>(mut writer: W, rec: &PosteriorRecord) -> Result<()> {
    serde_json::to_writer(&mut writer, rec)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Sidecar holding the true (one-based) class of every simulated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFile {
    pub version: u32,
    pub labels: Vec<usize>,
}

impl LabelFile {
    pub fn new(labels: &[ClassLabel]) -> Self {
        Self {
            version: SCHEMA_VERSION,
            labels: labels.iter().map(|c| c.one_based()).collect(),
        }
    }

    pub fn to_labels(&self, classes: usize) -> Result<Vec<ClassLabel>> {
        self.labels
            .iter()
            .map(|&l| ClassLabel::from_one_based(l, classes))
            .collect()
    }
}
