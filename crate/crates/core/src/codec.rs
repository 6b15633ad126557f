//! Conversion between value-space samples and the network-facing binary
//! representation.
//!
//! Variables are encoded as unsigned fixed point (default Q20.12: 20 integer
//! bits, 12 fraction bits, 32 total) with round-to-nearest-even, most
//! significant bit first. Directive settings pack as 4-bit ordinal codes,
//! one nibble per option from the top of the row, zero-padded. One row per
//! variable/directive, concatenated into a 2-D bit matrix.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::dataset::{Directive, DirectiveSchema, HlsSample, VarKind, VariableSchema};
use crate::error::{Error, Result};

/// Unsigned fixed-point layout for one 32-bit row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointFormat {
    pub total_bits: u32,
    pub integer_bits: u32,
    pub fraction_bits: u32,
}

impl Default for FixedPointFormat {
    fn default() -> Self {
        FixedPointFormat {
            total_bits: 32,
            integer_bits: 20,
            fraction_bits: 12,
        }
    }
}

impl FixedPointFormat {
    pub fn new(integer_bits: u32, fraction_bits: u32) -> Result<Self> {
        let total = integer_bits + fraction_bits;
        if integer_bits == 0 || fraction_bits == 0 || total > 63 {
            return Err(Error::Config(format!(
                "unsupported fixed-point format Q{integer_bits}.{fraction_bits}"
            )));
        }
        Ok(FixedPointFormat {
            total_bits: total,
            integer_bits,
            fraction_bits,
        })
    }

    /// Largest representable value: 2^integer_bits - 2^-fraction_bits.
    pub fn max_value(&self) -> f64 {
        let scale = (1u64 << self.fraction_bits) as f64;
        let max_raw = if self.total_bits == 63 {
            u64::MAX >> 1
        } else {
            (1u64 << self.total_bits) - 1
        };
        max_raw as f64 / scale
    }

    /// Resolution of the fractional part: 2^-fraction_bits.
    pub fn resolution(&self) -> f64 {
        1.0 / (1u64 << self.fraction_bits) as f64
    }
}

/// Row-major binary matrix; rows are variables/directives, columns are bit
/// positions with column 0 the most significant bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
    row_labels: Vec<String>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize, row_labels: Vec<String>) -> Self {
        assert_eq!(row_labels.len(), rows, "one label per row");
        BitMatrix {
            rows,
            cols,
            bits: vec![0; rows * cols],
            row_labels,
        }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<u8>, row_labels: Vec<String>) -> Self {
        assert_eq!(bits.len(), rows * cols, "bit count must be rows * cols");
        assert_eq!(row_labels.len(), rows, "one label per row");
        debug_assert!(bits.iter().all(|&b| b <= 1));
        BitMatrix {
            rows,
            cols,
            bits,
            row_labels,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, bit: u8) {
        debug_assert!(bit <= 1);
        self.bits[row * self.cols + col] = bit;
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.bits[row * self.cols..(row + 1) * self.cols]
    }

    /// Flattened bits as 0.0/1.0 values for network input.
    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }

    /// Bits packed 64 per word (row-major order) for fast Hamming distances.
    pub fn packed_words(&self) -> Vec<u64> {
        let nwords = self.bits.len().div_ceil(64);
        let mut words = vec![0u64; nwords];
        for (i, &b) in self.bits.iter().enumerate() {
            if b != 0 {
                words[i / 64] |= 1u64 << (i % 64);
            }
        }
        words
    }
}

fn quantize(v: f64, fmt: &FixedPointFormat) -> Result<u64> {
    if v.is_nan() || v.is_infinite() {
        return Err(Error::InvalidValue(format!(
            "cannot encode non-finite value {v}"
        )));
    }
    if v < 0.0 || v > fmt.max_value() {
        return Err(Error::Overflow {
            value: v,
            int_bits: fmt.integer_bits,
            frac_bits: fmt.fraction_bits,
        });
    }
    let scaled = v * (1u64 << fmt.fraction_bits) as f64;
    Ok(scaled.round_ties_even() as u64)
}

fn raw_to_row(raw: u64, fmt: &FixedPointFormat) -> Vec<u8> {
    let n = fmt.total_bits as usize;
    let mut row = vec![0u8; n];
    for (col, slot) in row.iter_mut().enumerate() {
        // column 0 holds the most significant bit
        *slot = ((raw >> (n - 1 - col)) & 1) as u8;
    }
    row
}

fn row_to_raw(row: &[u8]) -> u64 {
    let mut raw = 0u64;
    for &b in row {
        raw = (raw << 1) | b as u64;
    }
    raw
}

/// Encode one value as a fixed-point bit row, MSB first.
pub fn encode_value(v: f64, fmt: &FixedPointFormat) -> Result<Vec<u8>> {
    Ok(raw_to_row(quantize(v, fmt)?, fmt))
}

/// Decode a fixed-point bit row back to a value.
pub fn decode_value(row: &[u8], fmt: &FixedPointFormat) -> f64 {
    assert_eq!(row.len(), fmt.total_bits as usize, "row width");
    row_to_raw(row) as f64 / (1u64 << fmt.fraction_bits) as f64
}

/// Encode one directive's option settings as ordinal nibbles, option 0 in
/// the top nibble.
pub fn encode_directive(
    settings: &BTreeMap<String, String>,
    directive: &Directive,
    fmt: &FixedPointFormat,
) -> Result<Vec<u8>> {
    let n = fmt.total_bits as usize;
    let mut row = vec![0u8; n];
    for (i, option) in directive.options.iter().enumerate() {
        let value = settings.get(&option.name).ok_or_else(|| {
            Error::Schema(format!(
                "directive {} missing option {}",
                directive.name, option.name
            ))
        })?;
        let ordinal = option
            .domain
            .iter()
            .position(|d| d == value)
            .ok_or_else(|| {
                Error::Schema(format!(
                    "value {value:?} not in domain of {}.{}",
                    directive.name, option.name
                ))
            })?;
        for bit in 0..4 {
            row[i * 4 + bit] = ((ordinal >> (3 - bit)) & 1) as u8;
        }
    }
    for (name, _) in settings.iter() {
        if !directive.options.iter().any(|o| &o.name == name) {
            return Err(Error::Schema(format!(
                "unknown option {name} for directive {}",
                directive.name
            )));
        }
    }
    Ok(row)
}

/// Encode a full sample: variable rows in schema order, then directive rows.
pub fn encode_sample(
    sample: &HlsSample,
    variables: &[VariableSchema],
    directives: Option<&DirectiveSchema>,
    fmt: &FixedPointFormat,
) -> Result<BitMatrix> {
    let dir_count = directives.map_or(0, |d| d.directives.len());
    let rows = variables.len() + dir_count;
    let cols = fmt.total_bits as usize;
    let mut bits = Vec::with_capacity(rows * cols);
    let mut labels = Vec::with_capacity(rows);
    for var in variables {
        let v = sample.values.get(&var.name).ok_or_else(|| {
            Error::Schema(format!("sample missing variable {}", var.name))
        })?;
        bits.extend_from_slice(&encode_value(*v, fmt)?);
        labels.push(var.name.clone());
    }
    if let Some(schema) = directives {
        let empty = BTreeMap::new();
        for directive in &schema.directives {
            let settings = sample
                .directives
                .as_ref()
                .and_then(|d| d.get(&directive.name))
                .unwrap_or(&empty);
            bits.extend_from_slice(&encode_directive(settings, directive, fmt)?);
            labels.push(directive.name.clone());
        }
    }
    Ok(BitMatrix::from_bits(rows, cols, bits, labels))
}

/// Encode every sample of a corpus, preserving order.
pub fn encode_corpus(
    corpus: &crate::dataset::Corpus,
    fmt: &FixedPointFormat,
) -> Result<Vec<BitMatrix>> {
    corpus
        .samples
        .iter()
        .map(|s| encode_sample(s, &corpus.variables, corpus.directive_schema.as_ref(), fmt))
        .collect()
}

/// How to treat bit patterns a generative model emitted that no valid sample
/// produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Clamp out-of-domain ordinals and out-of-range variable values, and
    /// report how many rows were clamped. Keeps decoding total for synthetic
    /// data while validity stays observable.
    #[default]
    Lenient,
    /// Error on any out-of-domain ordinal; variable values pass through as
    /// decoded.
    Strict,
}

/// Per-sample record of what lenient decoding had to fix up.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeReport {
    pub clamped_variables: usize,
    pub clamped_directives: usize,
}

impl DecodeReport {
    pub fn is_clean(&self) -> bool {
        self.clamped_variables == 0 && self.clamped_directives == 0
    }
}

/// Decode a bit matrix back into a value-space sample (inverse of
/// [`encode_sample`] up to fixed-point rounding).
pub fn decode_sample(
    matrix: &BitMatrix,
    variables: &[VariableSchema],
    directives: Option<&DirectiveSchema>,
    fmt: &FixedPointFormat,
    mode: DecodeMode,
) -> Result<(HlsSample, DecodeReport)> {
    let dir_count = directives.map_or(0, |d| d.directives.len());
    if matrix.rows() != variables.len() + dir_count {
        return Err(Error::Shape(format!(
            "matrix has {} rows, schema expects {}",
            matrix.rows(),
            variables.len() + dir_count
        )));
    }
    if matrix.cols() != fmt.total_bits as usize {
        return Err(Error::Shape(format!(
            "matrix has {} cols, format needs {}",
            matrix.cols(),
            fmt.total_bits
        )));
    }
    let mut report = DecodeReport::default();
    let mut values = BTreeMap::new();
    for (i, var) in variables.iter().enumerate() {
        let mut v = decode_value(matrix.row(i), fmt);
        if mode == DecodeMode::Lenient {
            let mut adjusted = v;
            if var.kind == VarKind::Integer {
                adjusted = adjusted.round();
            }
            adjusted = adjusted.clamp(var.min, var.max);
            if adjusted != v {
                report.clamped_variables += 1;
            }
            v = adjusted;
        }
        values.insert(var.name.clone(), v);
    }
    let mut dir_settings: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    if let Some(schema) = directives {
        for (di, directive) in schema.directives.iter().enumerate() {
            let row = matrix.row(variables.len() + di);
            let mut settings = BTreeMap::new();
            for (oi, option) in directive.options.iter().enumerate() {
                let mut ordinal = 0usize;
                for bit in 0..4 {
                    ordinal = (ordinal << 1) | row[oi * 4 + bit] as usize;
                }
                if ordinal >= option.domain.len() {
                    match mode {
                        DecodeMode::Strict => {
                            return Err(Error::Decode(format!(
                                "ordinal {ordinal} out of domain for {}.{} (size {})",
                                directive.name,
                                option.name,
                                option.domain.len()
                            )));
                        }
                        DecodeMode::Lenient => {
                            ordinal = option.domain.len() - 1;
                            report.clamped_directives += 1;
                        }
                    }
                }
                settings.insert(option.name.clone(), option.domain[ordinal].clone());
            }
            dir_settings.insert(directive.name.clone(), settings);
        }
    }
    let sample = HlsSample {
        project_id: "synthetic".to_string(),
        benchmark: None,
        values,
        directives: if dir_settings.is_empty() {
            None
        } else {
            Some(dir_settings)
        },
    };
    Ok((sample, report))
}

const FILE_MAGIC: &[u8; 4] = b"HLSB";

/// Append one matrix record to a byte buffer: magic, rows (u32 LE), cols
/// (u32 LE), row-major bits packed MSB-first per byte, then a
/// length-prefixed UTF-8 label block.
fn write_record(buf: &mut Vec<u8>, m: &BitMatrix) {
    buf.extend_from_slice(FILE_MAGIC);
    buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    let nbytes = (m.rows() * m.cols()).div_ceil(8);
    let mut packed = vec![0u8; nbytes];
    for (i, &b) in m.bits().iter().enumerate() {
        if b != 0 {
            packed[i / 8] |= 1 << (7 - (i % 8));
        }
    }
    buf.extend_from_slice(&packed);
    let mut block: Vec<u8> = Vec::new();
    for label in m.row_labels() {
        block.extend_from_slice(&(label.len() as u32).to_le_bytes());
        block.extend_from_slice(label.as_bytes());
    }
    buf.extend_from_slice(&(block.len() as u32).to_le_bytes());
    buf.extend_from_slice(&block);
}

/// Write a set of equally shaped matrices as concatenated records.
pub fn write_bitmatrices(path: &Path, matrices: &[BitMatrix]) -> Result<()> {
    let mut buf = Vec::new();
    for m in matrices {
        write_record(&mut buf, m);
    }
    fs::write(path, &buf).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read all matrix records from a file.
pub fn read_bitmatrices(path: &Path) -> Result<Vec<BitMatrix>> {
    let buf = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    let mut pos = 0usize;
    while pos < buf.len() {
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > buf.len() {
                return Err(Error::Format("truncated bit-matrix file".into()));
            }
            let s = &buf[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 4)? != FILE_MAGIC {
            return Err(Error::Format("not a bit-matrix file (bad magic)".into()));
        }
        let rows = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let nbits = rows * cols;
        let packed = take(&mut pos, nbits.div_ceil(8))?;
        let mut bits = vec![0u8; nbits];
        for (i, slot) in bits.iter_mut().enumerate() {
            *slot = (packed[i / 8] >> (7 - (i % 8))) & 1;
        }
        let block_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let block = take(&mut pos, block_len)?;
        let mut labels = Vec::with_capacity(rows);
        let mut bp = 0usize;
        for _ in 0..rows {
            if bp + 4 > block.len() {
                return Err(Error::Format("truncated label block".into()));
            }
            let len = u32::from_le_bytes(block[bp..bp + 4].try_into().unwrap()) as usize;
            bp += 4;
            if bp + len > block.len() {
                return Err(Error::Format("truncated label block".into()));
            }
            labels.push(
                String::from_utf8(block[bp..bp + len].to_vec())
                    .map_err(|_| Error::Format("invalid UTF-8 label".into()))?,
            );
            bp += len;
        }
        if bp != block.len() {
            return Err(Error::Format("trailing bytes in label block".into()));
        }
        out.push(BitMatrix::from_bits(rows, cols, bits, labels));
    }
    Ok(out)
}
