//! Dataset manifests and parallel cohort extraction.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::Quality;
use crate::imaging::io::{read_image, read_roi_json};
use crate::matrix::{
    assemble_matrix, extract_sequence_features, FeatureMatrix, FeatureProfile, FeatureVector, PatientFeatures, Sequence,
};

const SEQUENCE_COLUMNS: [(&str, &str); 3] = [
    ("adc_image", "adc_roi"),
    ("dwi_image", "dwi_roi"),
    ("t2_image", "t2_roi"),
];

/// One patient: label plus image and outline paths in ADC, DWI, T2 order.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub label: u8,
    pub images: [PathBuf; 3],
    pub rois: [PathBuf; 3],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    /// Reads `manifest.csv`. Relative paths are resolved against the
    /// manifest's directory. A `gleason` column, when present, supersedes
    /// `label`: scores ≥ 7 are labelled 1.
    pub fn read(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let malformed = |msg: String| Error::Malformed {
            path: path.to_path_buf(),
            msg,
        };
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let col = |name: &str| header.iter().position(|h| h == name);
        let id_col = col("patient_id").ok_or_else(|| malformed("missing patient_id column".into()))?;
        let (label_col, gleason_col) = (col("label"), col("gleason"));
        if label_col.is_none() && gleason_col.is_none() {
            return Err(malformed("missing label or gleason column".into()));
        }
        let mut seq_cols = Vec::new();
        for (img, roi) in SEQUENCE_COLUMNS {
            let i = col(img).ok_or_else(|| malformed(format!("missing {img} column")))?;
            let r = col(roi).ok_or_else(|| malformed(format!("missing {roi} column")))?;
            seq_cols.push((i, r));
        }

        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = line + 2;
            let field = |j: usize| rec.get(j).map(str::trim).unwrap_or("");
            let id = field(id_col).to_string();
            if id.is_empty() {
                return Err(malformed(format!("row {row}: empty patient_id")));
            }
            if !seen.insert(id.clone()) {
                return Err(malformed(format!("row {row}: duplicate patient_id {id:?}")));
            }
            let label = match (gleason_col, label_col) {
                (Some(j), _) => {
                    let g: f64 = field(j)
                        .parse()
                        .map_err(|_| malformed(format!("row {row}: bad gleason {:?}", field(j))))?;
                    u8::from(g >= 7.0)
                }
                (None, Some(j)) => match field(j) {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(malformed(format!("row {row}: bad label {other:?}"))),
                },
                (None, None) => unreachable!(),
            };
            let resolve = |j: usize| base.join(field(j));
            rows.push(ManifestRow {
                id,
                label,
                images: [0, 1, 2].map(|k| resolve(seq_cols[k].0)),
                rois: [0, 1, 2].map(|k| resolve(seq_cols[k].1)),
            });
        }
        Ok(Self { rows })
    }

    /// Writes the manifest with paths relative to `dir` where possible.
    pub fn write(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or(Path::new(""));
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["patient_id", "label"];
        for (img, roi) in SEQUENCE_COLUMNS {
            header.push(img);
            header.push(roi);
        }
        w.write_record(&header)?;
        let rel = |p: &Path| p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned();
        for row in &self.rows {
            let mut rec = vec![row.id.clone(), row.label.to_string()];
            for k in 0..3 {
                rec.push(rel(&row.images[k]));
                rec.push(rel(&row.rois[k]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatientFailure {
    pub patient_id: String,
    pub sequence: Option<Sequence>,
    pub error: String,
}

/// Outcome of extracting a whole manifest.
#[derive(Clone, Debug)]
pub struct CohortExtraction {
    /// Assembled matrix of the patients that succeeded (None if none did).
    pub matrix: Option<FeatureMatrix>,
    pub failures: Vec<PatientFailure>,
    pub n_patients: usize,
}

impl CohortExtraction {
    pub fn failed_patients(&self) -> usize {
        self.failures
            .iter()
            .map(|f| f.patient_id.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Counts of non-`Ok` quality flags over all cells.
    pub fn flag_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        if let Some(m) = &self.matrix {
            for q in m.flags().iter().filter(|q| **q != Quality::Ok) {
                let key = serde_json::to_value(q)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts
    }
}

fn extract_one(row: &ManifestRow, k: usize, profile: &FeatureProfile) -> Result<FeatureVector> {
    let img = read_image(&row.images[k])?;
    let roi = read_roi_json(&row.rois[k])?;
    extract_sequence_features(&img, &roi, profile)
}

/// Extracts every (patient, sequence) pair in parallel on the current rayon
/// pool. Patients with any failing sequence are reported and left out of the
/// matrix; row order follows the manifest.
pub fn extract_cohort(manifest: &Manifest, profile: &FeatureProfile) -> CohortExtraction {
    let jobs: Vec<(usize, usize)> = (0..manifest.rows.len())
        .flat_map(|i| (0..3).map(move |k| (i, k)))
        .collect();
    let results: Vec<Result<FeatureVector>> = jobs
        .par_iter()
        .map(|&(i, k)| extract_one(&manifest.rows[i], k, profile))
        .collect();

    let mut failures = Vec::new();
    let mut per_patient: Vec<HashMap<Sequence, FeatureVector>> = vec![HashMap::new(); manifest.rows.len()];
    for ((i, k), r) in jobs.into_iter().zip(results) {
        match r {
            Ok(v) => {
                per_patient[i].insert(Sequence::ALL[k], v);
            }
            Err(e) => failures.push(PatientFailure {
                patient_id: manifest.rows[i].id.clone(),
                sequence: Some(Sequence::ALL[k]),
                error: e.to_string(),
            }),
        }
    }
    let patients: Vec<PatientFeatures> = manifest
        .rows
        .iter()
        .zip(per_patient)
        .filter(|(_, seqs)| seqs.len() == 3)
        .map(|(row, sequences)| PatientFeatures {
            id: row.id.clone(),
            label: row.label,
            sequences,
        })
        .collect();
    let matrix = if patients.is_empty() {
        None
    } else {
        match assemble_matrix(&patients) {
            Ok(m) => Some(m),
            Err(e) => {
                failures.push(PatientFailure {
                    patient_id: String::new(),
                    sequence: None,
                    error: e.to_string(),
                });
                None
            }
        }
    };
    CohortExtraction {
        matrix,
        failures,
        n_patients: manifest.rows.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_gleason_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        std::fs::write(
            &path,
            "patient_id,gleason,adc_image,adc_roi,dwi_image,dwi_roi,t2_image,t2_roi\n\
             a,6,a.pgm,a.json,b.pgm,b.json,c.pgm,c.json\n\
             b,7,a.pgm,a.json,b.pgm,b.json,c.pgm,c.json\n",
        )
        .unwrap();
        let m = Manifest::read(&path).unwrap();
        assert_eq!(m.rows.iter().map(|r| r.label).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(m.rows[0].images[1], dir.path().join("b.pgm"));

        let out = dir.path().join("copy.csv");
        m.write(&out).unwrap();
        let back = Manifest::read(&out).unwrap();
        assert_eq!(back, m);

        std::fs::write(
            &path,
            "patient_id,label,adc_image,adc_roi,dwi_image,dwi_roi,t2_image,t2_roi\n\
             a,0,x,x,x,x,x,x\na,1,x,x,x,x,x,x\n",
        )
        .unwrap();
        assert!(matches!(Manifest::read(&path), Err(Error::Malformed { .. })));
    }
}
