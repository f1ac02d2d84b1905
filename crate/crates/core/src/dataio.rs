//! Tables, volumes, and cohort curation.
//!
//! Feature and outcome tables are UTF-8 CSV with a header row, `.` decimal
//! separator, and empty cells meaning "missing". Volumes use a JSON header
//! (`dims`, `spacing_mm`, `dtype`, `data`) next to a little-endian raw payload
//! in x-fastest order.
//!
//! Missing feature cells are stored as NaN inside the value matrix. Loaders
//! reject non-numeric text, so a NaN can only mean "missing"; downstream
//! fitting code refuses tables that still contain NaNs.

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

/// A named numeric column carried alongside the feature matrix (biological
/// covariates for ComBat).
#[derive(Debug, Clone, PartialEq)]
pub struct Covariate {
    pub name: String,
    pub values: Vec<f64>,
}

/// Per-subject numeric feature matrix with optional batch labels and
/// covariates. Rows are subjects, columns are features.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    subject_ids: Vec<String>,
    feature_names: Vec<String>,
    values: Array2<f64>,
    batch: Option<Vec<String>>,
    covariates: Vec<Covariate>,
}

impl FeatureTable {
    pub fn new(
        subject_ids: Vec<String>,
        feature_names: Vec<String>,
        values: Array2<f64>,
        batch: Option<Vec<String>>,
        covariates: Vec<Covariate>,
    ) -> Result<Self> {
        if subject_ids.is_empty() || feature_names.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut seen = HashSet::new();
        for id in &subject_ids {
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateSubjectId(id.clone()));
            }
        }
        if values.nrows() != subject_ids.len() || values.ncols() != feature_names.len() {
            return Err(Error::ShapeMismatch(format!(
                "value matrix is {}x{}, expected {}x{}",
                values.nrows(),
                values.ncols(),
                subject_ids.len(),
                feature_names.len()
            )));
        }
        if let Some(b) = &batch {
            if b.len() != subject_ids.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} batch labels for {} subjects",
                    b.len(),
                    subject_ids.len()
                )));
            }
        }
        for c in &covariates {
            if c.values.len() != subject_ids.len() {
                return Err(Error::ShapeMismatch(format!(
                    "covariate `{}` has {} values for {} subjects",
                    c.name,
                    c.values.len(),
                    subject_ids.len()
                )));
            }
        }
        Ok(Self {
            subject_ids,
            feature_names,
            values,
            batch,
            covariates,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn batch(&self) -> Option<&[String]> {
        self.batch.as_deref()
    }

    pub fn covariates(&self) -> &[Covariate] {
        &self.covariates
    }

    /// Number of missing (NaN) cells in the feature matrix.
    pub fn n_missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.values[[row, col]].is_nan()
    }

    /// Dense view of the matrix, failing if any cell is still missing.
    pub fn complete_values(&self) -> Result<ArrayView2<'_, f64>> {
        if self.n_missing() > 0 {
            return Err(Error::MissingValues("complete_values"));
        }
        Ok(self.values.view())
    }

    /// New table with the same subjects restricted to `names` (in the given order).
    pub fn select_features(&self, names: &[String]) -> Result<FeatureTable> {
        let mut cols = Vec::with_capacity(names.len());
        for n in names {
            let j = self
                .feature_names
                .iter()
                .position(|f| f == n)
                .ok_or_else(|| Error::MissingColumn(n.clone()))?;
            cols.push(j);
        }
        let mut values = Array2::zeros((self.n_subjects(), cols.len()));
        for (jj, &j) in cols.iter().enumerate() {
            values.column_mut(jj).assign(&self.values.column(j));
        }
        FeatureTable::new(
            self.subject_ids.clone(),
            names.to_vec(),
            values,
            self.batch.clone(),
            self.covariates.clone(),
        )
    }

    /// New table with rows restricted to `rows` (in the given order).
    pub fn select_subjects(&self, rows: &[usize]) -> Result<FeatureTable> {
        let mut values = Array2::zeros((rows.len(), self.n_features()));
        let mut ids = Vec::with_capacity(rows.len());
        for (ii, &i) in rows.iter().enumerate() {
            ids.push(self.subject_ids[i].clone());
            values.row_mut(ii).assign(&self.values.row(i));
        }
        let batch = self
            .batch
            .as_ref()
            .map(|b| rows.iter().map(|&i| b[i].clone()).collect());
        let covariates = self
            .covariates
            .iter()
            .map(|c| Covariate {
                name: c.name.clone(),
                values: rows.iter().map(|&i| c.values[i]).collect(),
            })
            .collect();
        FeatureTable::new(ids, self.feature_names.clone(), values, batch, covariates)
    }

    /// Replace the value matrix, keeping ids/names/batch/covariates.
    pub fn with_values(&self, values: Array2<f64>) -> Result<FeatureTable> {
        FeatureTable::new(
            self.subject_ids.clone(),
            self.feature_names.clone(),
            values,
            self.batch.clone(),
            self.covariates.clone(),
        )
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.subject_ids.iter().position(|s| s == id)
    }
}

/// Per-subject survival time (months) and event indicator (1 = death,
/// 0 = censored at that time).
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    subject_ids: Vec<String>,
    time_months: Vec<f64>,
    event: Vec<u8>,
}

impl OutcomeTable {
    pub fn new(subject_ids: Vec<String>, time_months: Vec<f64>, event: Vec<u8>) -> Result<Self> {
        if subject_ids.is_empty() {
            return Err(Error::EmptyTable);
        }
        if time_months.len() != subject_ids.len() || event.len() != subject_ids.len() {
            return Err(Error::ShapeMismatch(
                "outcome columns differ in length".into(),
            ));
        }
        let mut seen = HashSet::new();
        for id in &subject_ids {
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateSubjectId(id.clone()));
            }
        }
        for (i, &t) in time_months.iter().enumerate() {
            if !(t > 0.0) {
                return Err(Error::NonPositiveTime {
                    subject: subject_ids[i].clone(),
                    time: t,
                });
            }
        }
        for (i, &e) in event.iter().enumerate() {
            if e > 1 {
                return Err(Error::InvalidEvent {
                    subject: subject_ids[i].clone(),
                    value: e.to_string(),
                });
            }
        }
        Ok(Self {
            subject_ids,
            time_months,
            event,
        })
    }

    pub fn len(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subject_ids.is_empty()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn times(&self) -> &[f64] {
        &self.time_months
    }

    pub fn events(&self) -> &[u8] {
        &self.event
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e == 1).count()
    }

    pub fn select(&self, rows: &[usize]) -> Result<OutcomeTable> {
        OutcomeTable::new(
            rows.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            rows.iter().map(|&i| self.time_months[i]).collect(),
            rows.iter().map(|&i| self.event[i]).collect(),
        )
    }
}

/// Column-role mapping for feature CSV files: one id column, an optional batch
/// column, optional covariate columns; every remaining column is a feature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSchema {
    pub id_column: String,
    #[serde(default)]
    pub batch_column: Option<String>,
    #[serde(default)]
    pub covariate_columns: Vec<String>,
}

impl TableSchema {
    pub fn with_id(id_column: &str) -> Self {
        Self {
            id_column: id_column.to_string(),
            batch_column: None,
            covariate_columns: Vec::new(),
        }
    }

    pub fn with_batch(mut self, batch_column: &str) -> Self {
        self.batch_column = Some(batch_column.to_string());
        self
    }
}

fn parse_cell(raw: &str, column: &str, row: usize) -> Result<f64> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|_| Error::NonNumericCell {
        column: column.to_string(),
        row,
        value: raw.to_string(),
    })
}

/// Load a feature table from CSV using `schema` to assign column roles.
pub fn load_feature_table(path: impl AsRef<Path>, schema: &TableSchema) -> Result<FeatureTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let id_idx = headers
        .iter()
        .position(|h| *h == schema.id_column)
        .ok_or_else(|| Error::MissingColumn(schema.id_column.clone()))?;
    let batch_idx = match &schema.batch_column {
        Some(b) => Some(
            headers
                .iter()
                .position(|h| h == b)
                .ok_or_else(|| Error::MissingColumn(b.clone()))?,
        ),
        None => None,
    };
    let mut covariate_idx = Vec::new();
    for c in &schema.covariate_columns {
        let idx = headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| Error::MissingColumn(c.clone()))?;
        covariate_idx.push(idx);
    }

    let special: HashSet<usize> = std::iter::once(id_idx)
        .chain(batch_idx)
        .chain(covariate_idx.iter().copied())
        .collect();
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|i| !special.contains(i)).collect();
    let feature_names: Vec<String> = feature_idx.iter().map(|&i| headers[i].clone()).collect();

    let mut subject_ids = Vec::new();
    let mut batch: Vec<String> = Vec::new();
    let mut covariate_values: Vec<Vec<f64>> = vec![Vec::new(); covariate_idx.len()];
    let mut flat: Vec<f64> = Vec::new();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        subject_ids.push(record.get(id_idx).unwrap_or("").trim().to_string());
        if let Some(bi) = batch_idx {
            batch.push(record.get(bi).unwrap_or("").trim().to_string());
        }
        for (k, &ci) in covariate_idx.iter().enumerate() {
            covariate_values[k].push(parse_cell(
                record.get(ci).unwrap_or(""),
                &headers[ci],
                row,
            )?);
        }
        for &fi in &feature_idx {
            flat.push(parse_cell(record.get(fi).unwrap_or(""), &headers[fi], row)?);
        }
    }
    if subject_ids.is_empty() || feature_names.is_empty() {
        return Err(Error::EmptyTable);
    }

    let values = Array2::from_shape_vec((subject_ids.len(), feature_names.len()), flat)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let covariates = schema
        .covariate_columns
        .iter()
        .zip(covariate_values)
        .map(|(name, values)| Covariate {
            name: name.clone(),
            values,
        })
        .collect();
    FeatureTable::new(
        subject_ids,
        feature_names,
        values,
        if batch_idx.is_some() { Some(batch) } else { None },
        covariates,
    )
}

/// Write a feature table back to CSV (missing cells become empty fields).
pub fn save_feature_table(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["id".to_string()];
    if table.batch().is_some() {
        header.push("batch".to_string());
    }
    for c in table.covariates() {
        header.push(c.name.clone());
    }
    header.extend(table.feature_names().iter().cloned());
    writer.write_record(&header)?;
    for i in 0..table.n_subjects() {
        let mut record = vec![table.subject_ids()[i].clone()];
        if let Some(b) = table.batch() {
            record.push(b[i].clone());
        }
        for c in table.covariates() {
            record.push(format_cell(c.values[i]));
        }
        for j in 0..table.n_features() {
            record.push(format_cell(table.values()[[i, j]]));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

fn format_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        // Display for f64 is the shortest representation that round-trips.
        format!("{v}")
    }
}

/// Load an outcome table (columns `id`, `time_months`, `event`).
pub fn load_outcomes(path: impl AsRef<Path>) -> Result<OutcomeTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (id_idx, time_idx, event_idx) = (find("id")?, find("time_months")?, find("event")?);

    let mut ids = Vec::new();
    let mut times = Vec::new();
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id = record.get(id_idx).unwrap_or("").trim().to_string();
        let time_raw = record.get(time_idx).unwrap_or("").trim().to_string();
        let time = time_raw.parse::<f64>().map_err(|_| Error::NonNumericCell {
            column: "time_months".into(),
            row: ids.len(),
            value: time_raw.clone(),
        })?;
        let ev_raw = record.get(event_idx).unwrap_or("").trim().to_string();
        let event = match ev_raw.as_str() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::InvalidEvent {
                    subject: id,
                    value: other.to_string(),
                })
            }
        };
        ids.push(id);
        times.push(time);
        events.push(event);
    }
    OutcomeTable::new(ids, times, events)
}

pub fn save_outcomes(outcomes: &OutcomeTable, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["id", "time_months", "event"])?;
    for i in 0..outcomes.len() {
        writer.write_record([
            outcomes.subject_ids()[i].clone(),
            format_cell(outcomes.times()[i]),
            outcomes.events()[i].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// On-disk element type of a volume payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoxelType {
    #[serde(rename = "i16")]
    I16,
    #[serde(rename = "f32")]
    F32,
}

/// 3-D voxel grid in Hounsfield units. Axis order is fixed: x fastest,
/// then y, with z the axial slice index.
#[derive(Debug, Clone)]
pub struct Volume {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub voxels: Vec<f64>,
    pub dtype: VoxelType,
}

impl Volume {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], voxels: Vec<f64>) -> Result<Self> {
        Self::with_dtype(dims, spacing_mm, voxels, VoxelType::F32)
    }

    pub fn with_dtype(
        dims: [usize; 3],
        spacing_mm: [f64; 3],
        voxels: Vec<f64>,
        dtype: VoxelType,
    ) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if voxels.len() != n {
            return Err(Error::PayloadSizeMismatch {
                expected: n,
                actual: voxels.len(),
            });
        }
        if spacing_mm.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::ShapeMismatch(format!(
                "spacing must be strictly positive, got {spacing_mm:?}"
            )));
        }
        Ok(Self {
            dims,
            spacing_mm,
            voxels,
            dtype,
        })
    }

    pub fn n_voxels(&self) -> usize {
        self.voxels.len()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.voxels[self.index(x, y, z)]
    }

    /// Grid compatibility: same dims, spacing equal within 1e-6 relative.
    pub fn grid_matches(&self, dims: [usize; 3], spacing_mm: [f64; 3]) -> bool {
        self.dims == dims
            && self
                .spacing_mm
                .iter()
                .zip(&spacing_mm)
                .all(|(&a, &b)| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()))
    }
}

/// Binary region mask on the same grid as its paired volume.
#[derive(Debug, Clone)]
pub struct Mask {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub voxels: Vec<bool>,
}

impl Mask {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], voxels: Vec<bool>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if voxels.len() != n {
            return Err(Error::PayloadSizeMismatch {
                expected: n,
                actual: voxels.len(),
            });
        }
        Ok(Self {
            dims,
            spacing_mm,
            voxels,
        })
    }

    pub fn n_set(&self) -> usize {
        self.voxels.iter().filter(|&&v| v).count()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn check_compatible(&self, volume: &Volume) -> Result<()> {
        if !volume.grid_matches(self.dims, self.spacing_mm) {
            return Err(Error::GridMismatch(format!(
                "volume {:?}/{:?} vs mask {:?}/{:?}",
                volume.dims, volume.spacing_mm, self.dims, self.spacing_mm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct VolumeHeader {
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    dtype: VoxelType,
    data: String,
}

/// Load a volume from its JSON header; the raw payload path is resolved
/// relative to the header file.
pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let header: VolumeHeader = serde_json::from_reader(std::fs::File::open(path)?)?;
    let payload_path = sibling(path, &header.data);
    let bytes = std::fs::read(&payload_path)?;
    let n = header.dims[0] * header.dims[1] * header.dims[2];
    let voxels = match header.dtype {
        VoxelType::I16 => {
            if bytes.len() != n * 2 {
                return Err(Error::PayloadSizeMismatch {
                    expected: n,
                    actual: bytes.len() / 2,
                });
            }
            bytes
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64)
                .collect()
        }
        VoxelType::F32 => {
            if bytes.len() != n * 4 {
                return Err(Error::PayloadSizeMismatch {
                    expected: n,
                    actual: bytes.len() / 4,
                });
            }
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect()
        }
    };
    Volume::with_dtype(header.dims, header.spacing_mm, voxels, header.dtype)
}

/// Save a volume: JSON header at `path`, raw payload next to it with a
/// `.raw` extension. i16 payloads require every voxel to be an integer in
/// the i16 range.
pub fn save_volume(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let data_name = payload_name(path);
    let header = VolumeHeader {
        dims: volume.dims,
        spacing_mm: volume.spacing_mm,
        dtype: volume.dtype,
        data: data_name.clone(),
    };
    let mut bytes = Vec::with_capacity(volume.n_voxels() * 4);
    match volume.dtype {
        VoxelType::I16 => {
            for (i, &v) in volume.voxels.iter().enumerate() {
                if !v.is_finite() || v.fract() != 0.0 || v < i16::MIN as f64 || v > i16::MAX as f64
                {
                    return Err(Error::UnrepresentableVoxel {
                        value: v,
                        index: i,
                        dtype: "i16".into(),
                    });
                }
                bytes.extend_from_slice(&(v as i16).to_le_bytes());
            }
        }
        VoxelType::F32 => {
            for &v in &volume.voxels {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    std::fs::write(sibling(path, &data_name), bytes)?;
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, &header)?;
    Ok(())
}

/// Load a 0/1 volume file as a Mask.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let volume = load_volume(path)?;
    let mut voxels = Vec::with_capacity(volume.n_voxels());
    for &v in &volume.voxels {
        if v == 0.0 {
            voxels.push(false);
        } else if v == 1.0 {
            voxels.push(true);
        } else {
            return Err(Error::NonBinaryMask(v));
        }
    }
    Mask::new(volume.dims, volume.spacing_mm, voxels)
}

pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let volume = Volume::with_dtype(
        mask.dims,
        mask.spacing_mm,
        mask.voxels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        VoxelType::I16,
    )?;
    save_volume(&volume, path)
}

fn payload_name(header_path: &Path) -> String {
    let stem = header_path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "volume".to_string());
    format!("{stem}.raw")
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    match path.parent() {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    }
}

/// Result of aligning a feature table with an outcome table.
#[derive(Debug, Clone)]
pub struct AlignedCohort {
    pub features: FeatureTable,
    pub outcomes: OutcomeTable,
    /// IDs present only in the feature table.
    pub dropped_from_features: Vec<String>,
    /// IDs present only in the outcome table.
    pub dropped_from_outcomes: Vec<String>,
}

/// Restrict both tables to their ID intersection with identical row order
/// (the feature table's order).
pub fn align_cohort(features: &FeatureTable, outcomes: &OutcomeTable) -> Result<AlignedCohort> {
    let outcome_index: BTreeMap<&str, usize> = outcomes
        .subject_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut feature_rows = Vec::new();
    let mut outcome_rows = Vec::new();
    let mut dropped_from_features = Vec::new();
    for (i, id) in features.subject_ids().iter().enumerate() {
        match outcome_index.get(id.as_str()) {
            Some(&j) => {
                feature_rows.push(i);
                outcome_rows.push(j);
            }
            None => dropped_from_features.push(id.clone()),
        }
    }
    if feature_rows.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let kept: HashSet<&str> = feature_rows
        .iter()
        .map(|&i| features.subject_ids()[i].as_str())
        .collect();
    let dropped_from_outcomes = outcomes
        .subject_ids()
        .iter()
        .filter(|id| !kept.contains(id.as_str()))
        .cloned()
        .collect();

    Ok(AlignedCohort {
        features: features.select_subjects(&feature_rows)?,
        outcomes: outcomes.select(&outcome_rows)?,
        dropped_from_features,
        dropped_from_outcomes,
    })
}

/// Per-axis mean and population SD of training-set voxel spacings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpacingStats {
    pub mean: [f64; 3],
    pub sd: [f64; 3],
}

impl SpacingStats {
    /// Compute from training subjects only (population SD).
    pub fn from_training(spacings: &[[f64; 3]]) -> Result<Self> {
        if spacings.is_empty() {
            return Err(Error::EmptyTable);
        }
        let n = spacings.len() as f64;
        let mut mean = [0.0; 3];
        for s in spacings {
            for a in 0..3 {
                mean[a] += s[a];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut sd = [0.0; 3];
        for s in spacings {
            for a in 0..3 {
                sd[a] += (s[a] - mean[a]).powi(2);
            }
        }
        for v in &mut sd {
            *v = (*v / n).sqrt();
        }
        Ok(Self { mean, sd })
    }

    /// Exclusion threshold per axis: mean + 2 * SD.
    pub fn thresholds(&self) -> [f64; 3] {
        [
            self.mean[0] + 2.0 * self.sd[0],
            self.mean[1] + 2.0 * self.sd[1],
            self.mean[2] + 2.0 * self.sd[2],
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpacingFilterResult {
    pub kept: Vec<String>,
    pub excluded: Vec<String>,
    pub thresholds: [f64; 3],
}

/// Exclude a subject iff any axis spacing strictly exceeds mean + 2*SD for
/// that axis. A spacing exactly at the threshold is kept.
pub fn spacing_filter(
    subjects: &[(String, [f64; 3])],
    reference: &SpacingStats,
) -> SpacingFilterResult {
    let thresholds = reference.thresholds();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (id, spacing) in subjects {
        let over = spacing.iter().zip(&thresholds).any(|(&s, &t)| s > t);
        if over {
            excluded.push(id.clone());
        } else {
            kept.push(id.clone());
        }
    }
    SpacingFilterResult {
        kept,
        excluded,
        thresholds,
    }
}
