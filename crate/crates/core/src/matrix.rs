//! Per-sequence feature vectors, the multiparametric matrix and z-scores.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::firstorder::{self, edge_names, histogram_names, intensity_names, lbp_names};
use crate::features::shape::{shape_features, shape_names};
use crate::features::texture::gabor::{gabor_features, gabor_names, GaborBank};
use crate::features::texture::glcm::{haralick_features, haralick_names};
use crate::features::texture::rlm::{rlm_features, rlm_names};
use crate::features::texture::wavelet::{daubechies_histogram_features, daubechies_names, haar_features, haar_names};
use crate::features::texture::TEXTURE_LEVELS;
use crate::features::{FeatureGroup, Quality};
use crate::imaging::{quantize, rasterize_polygon, trace_boundary, Image2D, RoiMask, RoiPolygon};
use crate::stats;

pub const PAPER_PROFILE: &str = "paper-488";
pub const PAPER_FEATURE_COUNT: usize = 488;
const RANGE_PERCENTILES: (f64, f64) = (1.0, 99.0);
const ZERO_VARIANCE_RTOL: f64 = 1e-10;

/// A named per-sequence feature vector with quality flags.
pub type FeatureVector = FeatureGroup;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Intensity,
    Histogram,
    Lbp,
    Haralick,
    Gabor,
    Rlm,
    Haar,
    Daubechies,
    Edge,
    Shape,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::Intensity,
        Family::Histogram,
        Family::Lbp,
        Family::Haralick,
        Family::Gabor,
        Family::Rlm,
        Family::Haar,
        Family::Daubechies,
        Family::Edge,
        Family::Shape,
    ];

    pub fn feature_names(self) -> Vec<String> {
        match self {
            Family::Intensity => intensity_names(),
            Family::Histogram => histogram_names(),
            Family::Lbp => lbp_names(),
            Family::Haralick => haralick_names(),
            Family::Gabor => gabor_names(GaborBank::standard()),
            Family::Rlm => rlm_names(),
            Family::Haar => haar_names(),
            Family::Daubechies => daubechies_names(),
            Family::Edge => edge_names(),
            Family::Shape => shape_names(),
        }
    }

    fn params(self) -> &'static str {
        match self {
            Family::Intensity => "entropy_bins=128;pixvalue=image p50/p75/p90;diff_widths=w,2w,3w",
            Family::Histogram => "bins=128;range=image p1-p99",
            Family::Lbp => "neighbors=8;bins=59 uniform",
            Family::Haralick => "levels=32;range=lesion p1-p99;distances=1,2;angles=0,45,90,135",
            Family::Gabor => "wavelengths=2,4,8;angles=0,45,90,135;bandwidth=1;aspect=0.5",
            Family::Rlm => "levels=32;range=lesion p1-p99;angles=0,45,90,135",
            Family::Haar => "levels=2;fill=lesion mean",
            Family::Daubechies => "wavelet=db4;levels=3;input=lesion histogram",
            Family::Edge => "gradient=sobel;band=2;bins=32",
            Family::Shape => "signature=360;laii=0.1-0.4 r_eq",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Intensity => "intensity",
            Family::Histogram => "histogram",
            Family::Lbp => "lbp",
            Family::Haralick => "haralick",
            Family::Gabor => "gabor",
            Family::Rlm => "rlm",
            Family::Haar => "haar",
            Family::Daubechies => "daubechies",
            Family::Edge => "edge",
            Family::Shape => "shape",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub family: Family,
    pub name: String,
    pub params: String,
}

/// Ordered registry of the features extracted from every sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    name: String,
    entries: Vec<ProfileEntry>,
}

impl FeatureProfile {
    /// The default 488-feature profile.
    pub fn paper_488() -> Self {
        let entries: Vec<ProfileEntry> = Family::ALL
            .iter()
            .flat_map(|&family| {
                family.feature_names().into_iter().map(move |name| ProfileEntry {
                    family,
                    name,
                    params: family.params().to_string(),
                })
            })
            .collect();
        assert_eq!(entries.len(), PAPER_FEATURE_COUNT, "default profile size");
        Self {
            name: PAPER_PROFILE.to_string(),
            entries,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            PAPER_PROFILE => Ok(Self::paper_488()),
            other => Err(Error::InvalidArgument(format!("unknown feature profile {other:?}"))),
        }
    }

    /// Keeps only the named entries of `self`, in the given order.
    pub fn subset<S: AsRef<str>>(&self, name: &str, features: &[S]) -> Result<Self> {
        let entries = features
            .iter()
            .map(|f| {
                self.entries
                    .iter()
                    .find(|e| e.name == f.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown feature {:?}", f.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.to_string(),
            entries,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &[ProfileEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn count(&self, family: Family) -> usize {
        self.entries.iter().filter(|e| e.family == family).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sequence {
    #[serde(rename = "ADC")]
    Adc,
    #[serde(rename = "DWI")]
    Dwi,
    #[serde(rename = "T2")]
    T2,
}

impl Sequence {
    /// Column-block order of the multiparametric matrix.
    pub const ALL: [Sequence; 3] = [Sequence::Adc, Sequence::Dwi, Sequence::T2];

    pub fn prefix(self) -> &'static str {
        match self {
            Sequence::Adc => "ADC",
            Sequence::Dwi => "DWI",
            Sequence::T2 => "T2",
        }
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

/// Names of per-sequence features whose values change when image intensities
/// are multiplied by a constant. All other features are computed from
/// quantised codes, proportions, ratios or geometry and are scale-free.
pub fn is_scale_sensitive(feature: &str) -> bool {
    feature == "Mean"
        || feature == "InsM"
        || feature.starts_with("Diff-")
        || feature.starts_with("EdgeSharp-")
        || (feature.starts_with("Gabor-") && !feature.ends_with("-entropy"))
        || (feature.starts_with("Haar-") && feature.ends_with("-energy"))
}

/// Strips a sequence prefix (`ADC-`, `DWI-`, `T2-`) from a matrix column name.
pub fn base_feature_name(column: &str) -> &str {
    Sequence::ALL
        .iter()
        .find_map(|s| column.strip_prefix(s.prefix())?.strip_prefix('-'))
        .unwrap_or(column)
}

fn robust_range(values: &[f64]) -> (f64, f64, bool) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = stats::percentile_sorted(&sorted, RANGE_PERCENTILES.0);
    let hi = stats::percentile_sorted(&sorted, RANGE_PERCENTILES.1);
    if lo < hi {
        (lo, hi, false)
    } else {
        (lo, lo + 1.0, true)
    }
}

fn failure_flag(e: &Error) -> Quality {
    match e {
        Error::RoiTooSmall(_) => Quality::RoiTooSmall,
        Error::DegenerateShape(_) => Quality::DegenerateShape,
        _ => Quality::FamilyFailed,
    }
}

struct Lesion<'a> {
    img: &'a Image2D,
    mask: RoiMask,
    contour: crate::imaging::ContourPath,
    image_range: (f64, f64, bool),
    lesion_range: (f64, f64, bool),
}

impl Lesion<'_> {
    fn histogram(&self) -> Result<FeatureGroup> {
        let (lo, hi, degenerate) = self.image_range;
        let mut g = firstorder::histogram_features(self.img, &self.mask, lo, hi)?;
        if degenerate {
            g.flag_all(Quality::DegenerateRange);
        }
        Ok(g)
    }

    fn quantized(&self) -> Result<crate::imaging::QuantizedPatch> {
        let (lo, hi, _) = self.lesion_range;
        quantize(self.img, &self.mask, TEXTURE_LEVELS, lo, hi)
    }

    fn family(&self, family: Family) -> Result<FeatureGroup> {
        let mut g = match family {
            Family::Intensity => firstorder::intensity_features(self.img, &self.mask)?,
            Family::Histogram => self.histogram()?,
            Family::Lbp => firstorder::lbp_features(self.img, &self.mask)?,
            Family::Haralick => haralick_features(&self.quantized()?)?,
            Family::Gabor => gabor_features(self.img, &self.mask, GaborBank::standard())?,
            Family::Rlm => rlm_features(&self.quantized()?)?,
            Family::Haar => haar_features(self.img, &self.mask)?,
            Family::Daubechies => {
                let hist = self.histogram()?;
                let mut g = daubechies_histogram_features(hist.values());
                if self.image_range.2 {
                    g.flag_all(Quality::DegenerateRange);
                }
                g
            }
            Family::Edge => {
                let (lo, hi, degenerate) = self.image_range;
                let mut g = firstorder::edge_features(self.img, &self.mask, &self.contour, lo, hi)?;
                if degenerate {
                    g.flag_all(Quality::DegenerateRange);
                }
                g
            }
            Family::Shape => shape_features(&self.mask, &self.contour)?,
        };
        if matches!(family, Family::Haralick | Family::Rlm) && self.lesion_range.2 {
            g.flag_all(Quality::DegenerateRange);
        }
        Ok(g)
    }
}

/// Evaluates every profile entry on the lesion given as a mask. Only the
/// largest 8-connected component is used; families that cannot be computed
/// are imputed with 0 and flagged.
pub fn extract_from_mask(img: &Image2D, mask: &RoiMask, profile: &FeatureProfile) -> Result<FeatureVector> {
    img.check_same_size(mask)?;
    let components = mask.components();
    let multiple = components.len() > 1;
    let mask = components.into_iter().next().ok_or(Error::EmptyRoi)?;
    let contour = trace_boundary(&mask)?;
    let lesion = Lesion {
        img,
        image_range: robust_range(img.data()),
        lesion_range: robust_range(&img.masked_values(&mask)),
        mask,
        contour,
    };

    let families: HashSet<Family> = profile.entries().iter().map(|e| e.family).collect();
    let mut values: HashMap<String, (f64, Quality)> = HashMap::new();
    for family in Family::ALL.into_iter().filter(|f| families.contains(f)) {
        let g = lesion
            .family(family)
            .unwrap_or_else(|e| FeatureGroup::imputed(&family.feature_names(), failure_flag(&e)));
        for ((n, v), q) in g.names().iter().zip(g.values()).zip(g.flags()) {
            values.insert(n.clone(), (*v, *q));
        }
    }

    let mut out = FeatureGroup::new();
    for entry in profile.entries() {
        let (v, q) = values.get(&entry.name).copied().unwrap_or((0.0, Quality::FamilyFailed));
        out.push_flagged(entry.name.clone(), v, q);
    }
    if multiple {
        out.flag_all(Quality::MultipleComponents);
    }
    Ok(out)
}

/// Rasterises the outline on the image grid and extracts the profile.
pub fn extract_sequence_features(img: &Image2D, roi: &RoiPolygon, profile: &FeatureProfile) -> Result<FeatureVector> {
    let mask = rasterize_polygon(roi, img.width(), img.height())?;
    extract_from_mask(img, &mask, profile)
}

/// One patient's three sequence vectors.
#[derive(Clone, Debug)]
pub struct PatientFeatures {
    pub id: String,
    pub label: u8,
    pub sequences: HashMap<Sequence, FeatureVector>,
}

/// Patients × named columns, row-major, with a quality flag per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    ids: Vec<String>,
    labels: Vec<u8>,
    columns: Vec<String>,
    values: Vec<f64>,
    flags: Vec<Quality>,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<String>, labels: Vec<u8>, columns: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        if values.len() != n * columns.len() {
            return Err(Error::DimensionMismatch {
                expected: n * columns.len(),
                actual: values.len(),
            });
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!("label {l} is not 0 or 1")));
        }
        let mut seen = HashSet::new();
        if let Some(c) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::InvalidArgument(format!("duplicate column {c:?}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix contains non-finite values".into()));
        }
        let flags = vec![Quality::Ok; values.len()];
        Ok(Self {
            ids,
            labels,
            columns,
            values,
            flags,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> &[Quality] {
        &self.flags
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn flag(&self, i: usize, j: usize) -> Quality {
        self.flags[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// New matrix with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let p = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut flags = Vec::with_capacity(rows.len() * p);
        for &i in rows {
            values.extend_from_slice(self.row(i));
            flags.extend_from_slice(&self.flags[i * p..(i + 1) * p]);
        }
        Self {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            columns: self.columns.clone(),
            values,
            flags,
        }
    }

    /// New matrix with the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.n_rows() * cols.len());
        let mut flags = Vec::with_capacity(self.n_rows() * cols.len());
        for i in 0..self.n_rows() {
            for &j in cols {
                values.push(self.get(i, j));
                flags.push(self.flag(i, j));
            }
        }
        Self {
            ids: self.ids.clone(),
            labels: self.labels.clone(),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            values,
            flags,
        }
    }

    /// CSV with header `patient_id,label,<columns>`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["patient_id".to_string(), "label".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        let mut buf: Vec<String> = Vec::new();
        for i in 0..self.n_rows() {
            buf.clear();
            buf.push(self.ids[i].clone());
            buf.push(self.labels[i].to_string());
            buf.extend(self.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads the CSV layout of [`FeatureMatrix::write_csv`]. A `gleason`
    /// column may stand in place of (or alongside) `label`; it takes
    /// precedence and maps scores ≥ 7 to 1.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let id_col = header
            .iter()
            .position(|h| h == "patient_id")
            .ok_or_else(|| Error::MalformedCsv("missing patient_id column".into()))?;
        let label_col = header.iter().position(|h| h == "label");
        let gleason_col = header.iter().position(|h| h == "gleason");
        if label_col.is_none() && gleason_col.is_none() {
            return Err(Error::MalformedCsv("missing label or gleason column".into()));
        }
        let feature_cols: Vec<usize> = (0..header.len())
            .filter(|&j| j != id_col && Some(j) != label_col && Some(j) != gleason_col)
            .collect();
        let columns = feature_cols.iter().map(|&j| header[j].clone()).collect();
        let (mut ids, mut labels, mut values) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = line + 2;
            let field = |j: usize| rec.get(j).map(str::trim).unwrap_or("");
            ids.push(field(id_col).to_string());
            let label = match gleason_col {
                Some(j) => {
                    let g: f64 = field(j)
                        .parse()
                        .map_err(|_| Error::MalformedCsv(format!("row {row}: bad gleason {:?}", field(j))))?;
                    u8::from(g >= 7.0)
                }
                None => {
                    let j = label_col.expect("checked");
                    match field(j) {
                        "0" => 0,
                        "1" => 1,
                        other => return Err(Error::MalformedCsv(format!("row {row}: bad label {other:?}"))),
                    }
                }
            };
            labels.push(label);
            for &j in &feature_cols {
                let v: f64 = field(j).parse().map_err(|_| {
                    Error::MalformedCsv(format!("row {row}, column {}: bad value {:?}", header[j], field(j)))
                })?;
                if !v.is_finite() {
                    return Err(Error::MalformedCsv(format!(
                        "row {row}, column {}: non-finite",
                        header[j]
                    )));
                }
                values.push(v);
            }
        }
        Self::new(ids, labels, columns, values).map_err(|e| Error::MalformedCsv(e.to_string()))
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Concatenates ADC, DWI and T2 vectors per patient into one row each.
pub fn assemble_matrix(patients: &[PatientFeatures]) -> Result<FeatureMatrix> {
    let first = patients
        .first()
        .ok_or_else(|| Error::InvalidArgument("no patients to assemble".into()))?;
    let mut columns = Vec::new();
    for s in Sequence::ALL {
        let v = first
            .sequences
            .get(&s)
            .ok_or_else(|| Error::MissingSequence(format!("{} for patient {}", s, first.id)))?;
        columns.extend(v.names().iter().map(|n| format!("{}-{n}", s.prefix())));
    }
    let width = columns.len();
    let mut values = Vec::with_capacity(patients.len() * width);
    let mut flags = Vec::with_capacity(patients.len() * width);
    for p in patients {
        for s in Sequence::ALL {
            let v = p
                .sequences
                .get(&s)
                .ok_or_else(|| Error::MissingSequence(format!("{} for patient {}", s, p.id)))?;
            let reference = &first.sequences[&s];
            if v.names() != reference.names() {
                return Err(Error::InvalidArgument(format!(
                    "patient {} has a different {s} feature layout",
                    p.id
                )));
            }
            values.extend_from_slice(v.values());
            flags.extend_from_slice(v.flags());
        }
    }
    let mut m = FeatureMatrix::new(
        patients.iter().map(|p| p.id.clone()).collect(),
        patients.iter().map(|p| p.label).collect(),
        columns,
        values,
    )?;
    m.flags = flags;
    Ok(m)
}

/// Per-column centring and scaling fitted on one matrix and applicable to others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub dropped: Vec<String>,
}

impl NormParams {
    /// Fits on `m`: sample mean and (n − 1) standard deviation per column;
    /// columns whose std is negligible relative to their magnitude are dropped.
    pub fn fit(m: &FeatureMatrix) -> Result<Self> {
        let n = m.n_rows();
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        let mut params = NormParams {
            columns: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
            dropped: Vec::new(),
        };
        for (j, name) in m.columns().iter().enumerate() {
            let col = m.column(j);
            let mean = stats::mean(&col);
            let std = stats::sample_std(&col);
            let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if std > ZERO_VARIANCE_RTOL * scale.max(f64::MIN_POSITIVE) {
                params.columns.push(name.clone());
                params.mean.push(mean);
                params.std.push(std);
            } else {
                params.dropped.push(name.clone());
            }
        }
        Ok(params)
    }

    /// Applies the fitted transform to the retained columns of `m`.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let idx = self
            .columns
            .iter()
            .map(|c| {
                m.column_index(c)
                    .ok_or_else(|| Error::InvalidArgument(format!("column {c:?} missing from matrix")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = m.select_columns(&idx);
        let p = out.n_cols();
        for (k, v) in out.values.iter_mut().enumerate() {
            let j = k % p;
            *v = (*v - self.mean[j]) / self.std[j];
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Z-scores every column with sample statistics; zero-variance columns are
/// dropped and listed in the returned parameters.
pub fn zscore_normalize(m: &FeatureMatrix) -> Result<(FeatureMatrix, NormParams)> {
    let params = NormParams::fit(m)?;
    let out = params.apply(m)?;
    Ok((out, params))
}
