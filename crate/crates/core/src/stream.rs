//! Data-stream sources: a two-feature Gaussian hyperplane classification
//! generator, a sudden-switch schedule composing two of its concepts, and CSV
//! ingestion for external streams.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::model::{sigmoid, FeatureVector, ModelError, StreamRecord};
use crate::seed;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("failed to open `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}: cannot parse column `{column}` value `{value}` as a number")]
    Parse {
        row: u64,
        column: String,
        value: String,
    },
    #[error("row {row}: value `{value}` in column `{column}` is not in the binary value map")]
    UnmappedValue {
        row: u64,
        column: String,
        value: String,
    },
    #[error("row {row}: {source}")]
    InvalidRecord {
        row: u64,
        #[source]
        source: ModelError,
    },
    #[error("invalid type map entry `{0}` (expected `name:numeric` or `name:binary(a=0,b=1)`)")]
    InvalidTypeSpec(String),
    #[error("feature variance {0} must be positive")]
    InvalidVariance(f64),
    #[error("noise variance {0} must be non-negative")]
    InvalidNoiseVariance(f64),
    #[error("threshold {0} must be in (0, 1)")]
    InvalidThreshold(f64),
    #[error("concept parameter {0} is not finite")]
    NonFiniteParameter(f64),
    #[error("switch time must be at least 1")]
    InvalidSwitch,
}

/// Parameters of one linear-boundary classification concept over two
/// Gaussian features.
///
/// A draw takes `x1 ~ N(mu1, sigma1_sq)`, `x2 ~ N(mu2, sigma2_sq)` and noise
/// `eps ~ N(mu_eps, sigma_eps_sq)`; the label is 1 when the squashed score
/// `sigmoid(beta1 x1 + beta2 x2 + eps)` reaches `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperplaneConcept {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub mu_eps: f64,
    pub sigma_eps_sq: f64,
    pub tau: f64,
}

impl HyperplaneConcept {
    /// First concept of the drifting classification stream.
    pub fn concept_a() -> Self {
        Self {
            mu1: 100.0,
            mu2: 200.0,
            sigma1_sq: 20.0,
            sigma2_sq: 40.0,
            beta1: 1.0,
            beta2: -0.5,
            mu_eps: 0.0,
            sigma_eps_sq: 1.0,
            tau: 0.1,
        }
    }

    /// Second concept: swapped feature means and variances, flipped scalings.
    pub fn concept_b() -> Self {
        Self {
            mu1: 200.0,
            mu2: 100.0,
            sigma1_sq: 40.0,
            sigma2_sq: 20.0,
            beta1: -0.5,
            beta2: 1.0,
            mu_eps: 0.0,
            sigma_eps_sq: 1.0,
            tau: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        for p in [
            self.mu1,
            self.mu2,
            self.beta1,
            self.beta2,
            self.mu_eps,
        ] {
            if !p.is_finite() {
                return Err(StreamError::NonFiniteParameter(p));
            }
        }
        for v in [self.sigma1_sq, self.sigma2_sq] {
            if !(v.is_finite() && v > 0.0) {
                return Err(StreamError::InvalidVariance(v));
            }
        }
        if !(self.sigma_eps_sq.is_finite() && self.sigma_eps_sq >= 0.0) {
            return Err(StreamError::InvalidNoiseVariance(self.sigma_eps_sq));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(StreamError::InvalidThreshold(self.tau));
        }
        Ok(())
    }

    /// Linear score before thresholding.
    pub fn score(&self, x1: f64, x2: f64, eps: f64) -> f64 {
        self.beta1 * x1 + self.beta2 * x2 + eps
    }

    /// Label rule for a concrete draw.
    pub fn label(&self, x1: f64, x2: f64, eps: f64) -> f64 {
        if sigmoid(self.score(x1, x2, eps)) >= self.tau {
            1.0
        } else {
            0.0
        }
    }
}

/// Feature names emitted by the hyperplane generators.
pub const HYPERPLANE_SCHEMA: [&str; 2] = ["x1", "x2"];

/// Seeded record generator for one hyperplane concept.
///
/// Each random variable draws from its own sub-generator, so replaying a seed
/// reproduces the draw sequences independently of the concept parameters.
#[derive(Debug, Clone)]
pub struct HyperplaneGenerator {
    concept: HyperplaneConcept,
    t: u64,
    rng_x1: ChaCha12Rng,
    rng_x2: ChaCha12Rng,
    rng_eps: ChaCha12Rng,
}

impl HyperplaneGenerator {
    pub fn new(concept: HyperplaneConcept, seed: u64) -> Result<Self, StreamError> {
        concept.validate()?;
        Ok(Self {
            concept,
            t: 0,
            rng_x1: ChaCha12Rng::seed_from_u64(seed::derive(seed, 1)),
            rng_x2: ChaCha12Rng::seed_from_u64(seed::derive(seed, 2)),
            rng_eps: ChaCha12Rng::seed_from_u64(seed::derive(seed, 3)),
        })
    }

    pub fn concept(&self) -> &HyperplaneConcept {
        &self.concept
    }

    /// Replaces the concept parameters without touching the draw sequences.
    pub fn set_concept(&mut self, concept: HyperplaneConcept) -> Result<(), StreamError> {
        concept.validate()?;
        self.concept = concept;
        Ok(())
    }

    pub fn schema(&self) -> Vec<String> {
        HYPERPLANE_SCHEMA.iter().map(|s| s.to_string()).collect()
    }

    /// Next record plus the noise draw that produced its label.
    pub fn next_with_noise(&mut self) -> (StreamRecord, f64) {
        self.t += 1;
        let z1: f64 = StandardNormal.sample(&mut self.rng_x1);
        let z2: f64 = StandardNormal.sample(&mut self.rng_x2);
        let z_eps: f64 = StandardNormal.sample(&mut self.rng_eps);
        let c = &self.concept;
        let x1 = c.mu1 + c.sigma1_sq.sqrt() * z1;
        let x2 = c.mu2 + c.sigma2_sq.sqrt() * z2;
        let eps = c.mu_eps + c.sigma_eps_sq.sqrt() * z_eps;
        let y = c.label(x1, x2, eps);
        let x = FeatureVector::from_pairs([("x1", x1), ("x2", x2)]).expect("finite draws");
        (StreamRecord { x, y, t: self.t }, eps)
    }
}

impl Iterator for HyperplaneGenerator {
    type Item = StreamRecord;

    fn next(&mut self) -> Option<StreamRecord> {
        Some(self.next_with_noise().0)
    }
}

/// Emits one concept until the switch time, then the other (sudden drift).
///
/// Record `t` is 1-based; records with `t < switch_at` come from the first
/// concept. The switch changes parameters only, never the draw sequences, so
/// the pre-switch records equal those of a pure first-concept generator with
/// the same seed.
#[derive(Debug, Clone)]
pub struct DriftSchedule {
    generator: HyperplaneGenerator,
    concept_b: HyperplaneConcept,
    switch_at: u64,
    switched: bool,
}

impl DriftSchedule {
    pub fn new(
        concept_a: HyperplaneConcept,
        concept_b: HyperplaneConcept,
        switch_at: u64,
        seed: u64,
    ) -> Result<Self, StreamError> {
        if switch_at < 1 {
            return Err(StreamError::InvalidSwitch);
        }
        concept_b.validate()?;
        Ok(Self {
            generator: HyperplaneGenerator::new(concept_a, seed)?,
            concept_b,
            switch_at,
            switched: false,
        })
    }

    pub fn switch_at(&self) -> u64 {
        self.switch_at
    }

    pub fn schema(&self) -> Vec<String> {
        self.generator.schema()
    }

    /// Concept active for the record at time `t`.
    pub fn concept_at(&self, t: u64) -> &HyperplaneConcept {
        if t < self.switch_at {
            self.generator.concept()
        } else {
            &self.concept_b
        }
    }

    pub fn next_with_noise(&mut self) -> (StreamRecord, f64) {
        if !self.switched && self.generator.t + 1 >= self.switch_at {
            self.generator
                .set_concept(self.concept_b)
                .expect("validated at construction");
            self.switched = true;
        }
        self.generator.next_with_noise()
    }
}

impl Iterator for DriftSchedule {
    type Item = StreamRecord;

    fn next(&mut self) -> Option<StreamRecord> {
        Some(self.next_with_noise().0)
    }
}

/// Declared parsing rule for one CSV column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnType {
    Numeric,
    /// Two-valued categorical column mapped onto {0, 1}.
    Binary { zero: String, one: String },
}

/// Parses `name:numeric` or `name:binary(a=0,b=1)` into a column type entry.
pub fn parse_type_spec(spec: &str) -> Result<(String, ColumnType), StreamError> {
    let bad = || StreamError::InvalidTypeSpec(spec.to_owned());
    let (name, ty) = spec.split_once(':').ok_or_else(bad)?;
    if name.is_empty() {
        return Err(bad());
    }
    if ty == "numeric" {
        return Ok((name.to_owned(), ColumnType::Numeric));
    }
    let inner = ty
        .strip_prefix("binary(")
        .and_then(|rest| rest.strip_suffix(')'))
        .ok_or_else(bad)?;
    let mut zero = None;
    let mut one = None;
    for pair in inner.split(',') {
        let (label, digit) = pair.split_once('=').ok_or_else(bad)?;
        match digit {
            "0" if zero.is_none() => zero = Some(label.to_owned()),
            "1" if one.is_none() => one = Some(label.to_owned()),
            _ => return Err(bad()),
        }
    }
    match (zero, one) {
        (Some(zero), Some(one)) => Ok((name.to_owned(), ColumnType::Binary { zero, one })),
        _ => Err(bad()),
    }
}

/// Streams records from a CSV file with a header row.
///
/// Columns default to numeric; the type map overrides individual columns.
/// All columns except the target become features, in header order.
pub struct CsvSource {
    reader: csv::Reader<BufReader<File>>,
    header: Vec<String>,
    schema: Vec<String>,
    target_index: usize,
    column_types: Vec<ColumnType>,
    row: u64,
}

impl CsvSource {
    pub fn open(
        path: impl AsRef<Path>,
        target_column: &str,
        types: &BTreeMap<String, ColumnType>,
    ) -> Result<Self, StreamError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| StreamError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(BufReader::new(file));
        let header: Vec<String> = reader
            .headers()?
            .iter()
            .map(|h| h.to_owned())
            .collect();
        let target_index = header
            .iter()
            .position(|h| h == target_column)
            .ok_or_else(|| StreamError::MissingColumn(target_column.to_owned()))?;
        for name in types.keys() {
            if !header.contains(name) {
                return Err(StreamError::MissingColumn(name.clone()));
            }
        }
        let column_types = header
            .iter()
            .map(|h| types.get(h).cloned().unwrap_or(ColumnType::Numeric))
            .collect();
        let schema = header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_index)
            .map(|(_, h)| h.clone())
            .collect();
        Ok(Self {
            reader,
            header,
            schema,
            target_index,
            column_types,
            row: 0,
        })
    }

    /// Feature columns in header order (target excluded).
    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    fn parse_cell(&self, raw: &str, index: usize) -> Result<f64, StreamError> {
        let column = &self.header[index];
        match &self.column_types[index] {
            ColumnType::Numeric => {
                let parsed: f64 = raw.parse().map_err(|_| StreamError::Parse {
                    row: self.row,
                    column: column.clone(),
                    value: raw.to_owned(),
                })?;
                if !parsed.is_finite() {
                    return Err(StreamError::Parse {
                        row: self.row,
                        column: column.clone(),
                        value: raw.to_owned(),
                    });
                }
                Ok(parsed)
            }
            ColumnType::Binary { zero, one } => {
                if raw == zero {
                    Ok(0.0)
                } else if raw == one {
                    Ok(1.0)
                } else {
                    Err(StreamError::UnmappedValue {
                        row: self.row,
                        column: column.clone(),
                        value: raw.to_owned(),
                    })
                }
            }
        }
    }
}

impl Iterator for CsvSource {
    type Item = Result<StreamRecord, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut record = csv::StringRecord::new();
        match self.reader.read_record(&mut record) {
            Ok(false) => None,
            Err(e) => Some(Err(e.into())),
            Ok(true) => {
                self.row += 1;
                let mut x = FeatureVector::new();
                let mut y = 0.0;
                for (index, raw) in record.iter().enumerate() {
                    if index >= self.header.len() {
                        break;
                    }
                    let value = match self.parse_cell(raw, index) {
                        Ok(v) => v,
                        Err(e) => return Some(Err(e)),
                    };
                    if index == self.target_index {
                        y = value;
                    } else if let Err(source) = x.insert(self.header[index].clone(), value) {
                        return Some(Err(StreamError::InvalidRecord {
                            row: self.row,
                            source,
                        }));
                    }
                }
                Some(Ok(StreamRecord { x, y, t: self.row }))
            }
        }
    }
}

/// Writes records as CSV: the schema columns followed by the target column.
///
/// Values use the shortest decimal form that parses back to the same float,
/// so a write/ingest round trip reproduces the records exactly.
pub fn write_records_csv(
    path: impl AsRef<Path>,
    schema: &[String],
    target_name: &str,
    records: &[StreamRecord],
) -> Result<(), StreamError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| StreamError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<&str> = schema.iter().map(String::as_str).collect();
    header.push(target_name);
    writer.write_record(&header)?;
    for record in records {
        let mut fields: Vec<String> = Vec::with_capacity(schema.len() + 1);
        for name in schema {
            let v = record.x.get(name).ok_or_else(|| StreamError::MissingColumn(name.clone()))?;
            fields.push(format!("{v}"));
        }
        fields.push(format!("{}", record.y));
        writer.write_record(&fields)?;
    }
    writer.flush().map_err(|source| StreamError::Io {
        path: path.display().to_string(),
        source,
    })?;
    writer
        .into_inner()
        .map_err(|e| StreamError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        })?
        .flush()
        .map_err(|source| StreamError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concept_a_matches_the_documented_parameters() {
        let c = HyperplaneConcept::concept_a();
        assert_eq!(
            (c.tau, c.mu1, c.mu2, c.sigma1_sq, c.sigma2_sq, c.beta1, c.beta2),
            (0.1, 100.0, 200.0, 20.0, 40.0, 1.0, -0.5)
        );
        let b = HyperplaneConcept::concept_b();
        assert_eq!(
            (b.mu1, b.mu2, b.sigma1_sq, b.sigma2_sq, b.beta1, b.beta2),
            (200.0, 100.0, 40.0, 20.0, -0.5, 1.0)
        );
    }

    #[test]
    fn saturated_score_always_labels_class_one() {
        let concept = HyperplaneConcept {
            mu1: 100.0,
            mu2: 0.0,
            sigma1_sq: 1e-12,
            sigma2_sq: 1.0,
            beta1: 1.0,
            beta2: 0.0,
            mu_eps: 0.0,
            sigma_eps_sq: 0.0,
            tau: 0.1,
        };
        let mut gen = HyperplaneGenerator::new(concept, 5).unwrap();
        for _ in 0..1_000 {
            let (record, _) = gen.next_with_noise();
            assert_eq!(record.y, 1.0);
        }
    }

    #[test]
    fn same_seed_reproduces_the_stream() {
        let mut a = HyperplaneGenerator::new(HyperplaneConcept::concept_a(), 42).unwrap();
        let mut b = HyperplaneGenerator::new(HyperplaneConcept::concept_a(), 42).unwrap();
        for _ in 0..200 {
            assert_eq!(a.next_with_noise(), b.next_with_noise());
        }
    }

    #[test]
    fn labels_recompute_from_draws_and_parameters() {
        let mut schedule = DriftSchedule::new(
            HyperplaneConcept::concept_a(),
            HyperplaneConcept::concept_b(),
            50,
            3,
        )
        .unwrap();
        for _ in 0..120 {
            let (record, eps) = schedule.next_with_noise();
            let concept = *schedule.concept_at(record.t);
            let x1 = record.x.get("x1").unwrap();
            let x2 = record.x.get("x2").unwrap();
            assert_eq!(concept.label(x1, x2, eps), record.y, "t = {}", record.t);
        }
    }

    #[test]
    fn pre_switch_records_equal_the_pure_concept_stream() {
        let seed = 99;
        let mut pure = HyperplaneGenerator::new(HyperplaneConcept::concept_a(), seed).unwrap();
        let mut schedule = DriftSchedule::new(
            HyperplaneConcept::concept_a(),
            HyperplaneConcept::concept_b(),
            60,
            seed,
        )
        .unwrap();
        for _ in 0..59 {
            let (a, eps_a) = pure.next_with_noise();
            let (b, eps_b) = schedule.next_with_noise();
            assert_eq!(a, b);
            assert_eq!(eps_a.to_bits(), eps_b.to_bits());
        }
        // and the record at the switch differs in distribution parameters
        let (a, _) = pure.next_with_noise();
        let (b, _) = schedule.next_with_noise();
        assert_eq!(a.t, b.t);
        assert_ne!(a.x, b.x);
    }

    #[test]
    fn switch_at_one_is_pure_second_concept() {
        let seed = 7;
        let mut schedule = DriftSchedule::new(
            HyperplaneConcept::concept_a(),
            HyperplaneConcept::concept_b(),
            1,
            seed,
        )
        .unwrap();
        let mut pure_b = HyperplaneGenerator::new(HyperplaneConcept::concept_b(), seed).unwrap();
        for _ in 0..50 {
            assert_eq!(schedule.next_with_noise(), pure_b.next_with_noise());
        }
        assert!(DriftSchedule::new(
            HyperplaneConcept::concept_a(),
            HyperplaneConcept::concept_b(),
            0,
            seed
        )
        .is_err());
    }

    #[test]
    fn type_spec_parsing() {
        assert_eq!(
            parse_type_spec("age:numeric").unwrap(),
            ("age".to_owned(), ColumnType::Numeric)
        );
        assert_eq!(
            parse_type_spec("label:binary(UP=1,DOWN=0)").unwrap(),
            (
                "label".to_owned(),
                ColumnType::Binary {
                    zero: "DOWN".to_owned(),
                    one: "UP".to_owned()
                }
            )
        );
        for bad in [
            "nocolon",
            "x:binary(a=1)",
            "x:binary(a=1,b=2)",
            "x:binary(a=1,b=1)",
            "x:integer",
            ":numeric",
        ] {
            assert!(parse_type_spec(bad).is_err(), "{bad}");
        }
    }

    fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn well_formed_file_yields_records_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "s.csv", "a,b,y\n1,2,0\n3,4,1\n5,6,0\n");
        let source = CsvSource::open(&path, "y", &BTreeMap::new()).unwrap();
        let records: Vec<_> = source.map(Result::unwrap).collect();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].t, 1);
        assert_eq!(records[1].x.get("a"), Some(3.0));
        assert_eq!(records[2].y, 0.0);
    }

    #[test]
    fn bad_cell_errors_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "s.csv", "a,y\n1,0\noops,1\n");
        let mut source = CsvSource::open(&path, "y", &BTreeMap::new()).unwrap();
        assert!(source.next().unwrap().is_ok());
        match source.next().unwrap() {
            Err(StreamError::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "a", "oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn binary_columns_map_and_reject_unmapped_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "s.csv", "a,y\n1,UP\n2,DOWN\n3,SIDEWAYS\n");
        let mut types = BTreeMap::new();
        types.insert(
            "y".to_owned(),
            ColumnType::Binary {
                zero: "DOWN".to_owned(),
                one: "UP".to_owned(),
            },
        );
        let mut source = CsvSource::open(&path, "y", &types).unwrap();
        assert_eq!(source.next().unwrap().unwrap().y, 1.0);
        assert_eq!(source.next().unwrap().unwrap().y, 0.0);
        assert!(matches!(
            source.next().unwrap(),
            Err(StreamError::UnmappedValue { row: 3, .. })
        ));
    }

    #[test]
    fn missing_columns_are_rejected_at_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "s.csv", "a,y\n1,0\n");
        assert!(matches!(
            CsvSource::open(&path, "target", &BTreeMap::new()),
            Err(StreamError::MissingColumn(_))
        ));
        let mut types = BTreeMap::new();
        types.insert("ghost".to_owned(), ColumnType::Numeric);
        assert!(matches!(
            CsvSource::open(&path, "y", &types),
            Err(StreamError::MissingColumn(_))
        ));
    }

    #[test]
    fn csv_round_trip_reproduces_hyperplane_records_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stream.csv");
        let gen = HyperplaneGenerator::new(HyperplaneConcept::concept_a(), 21).unwrap();
        let records: Vec<StreamRecord> = gen.take(1_000).collect();
        let schema = vec!["x1".to_owned(), "x2".to_owned()];
        write_records_csv(&path, &schema, "y", &records).unwrap();
        let source = CsvSource::open(&path, "y", &BTreeMap::new()).unwrap();
        let read: Vec<StreamRecord> = source.map(Result::unwrap).collect();
        assert_eq!(records, read);
    }
}
