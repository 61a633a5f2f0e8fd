//! Synthetic patient cohorts and the CSV dataset format.
//!
//! Every patient has one class and one manifestation offset; each of its
//! samples is `class center + patient offset + noise`. Patients are split
//! into train and test whole, so no patient ever appears on both sides.
//!
//! CSV layout: header `sample_id,patient_id,label,f0,...,f{D-1}`, one row per
//! sample, LF line endings, no quoting. Features are written with Rust's
//! shortest round-trip formatting, so reloading a file reproduces every
//! `f64` bit for bit.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::pool::{Dataset, PatientId, Sample};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub num_classes: usize,
    pub num_patients: usize,
    pub feature_dim: usize,
    /// Distance of each class center from the origin.
    pub class_separation: f64,
    /// Standard deviation of the per-patient manifestation offset.
    pub patient_offset_scale: f64,
    /// Standard deviation of per-sample noise.
    pub noise_scale: f64,
    /// Exponent of the truncated power law over samples per patient.
    pub size_alpha: f64,
    pub min_samples_per_patient: usize,
    pub max_samples_per_patient: usize,
    pub test_patient_fraction: f64,
    /// Relative share of patients per class; empty means balanced.
    pub class_weights: Vec<f64>,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            num_classes: 3,
            num_patients: 60,
            feature_dim: 8,
            class_separation: 3.0,
            patient_offset_scale: 1.5,
            noise_scale: 0.5,
            size_alpha: 1.5,
            min_samples_per_patient: 2,
            max_samples_per_patient: 40,
            test_patient_fraction: 0.3,
            class_weights: Vec::new(),
            seed: 0,
        }
    }
}

impl CohortSpec {
    /// Class weights in the proportions of a strongly imbalanced three-class
    /// retinal OCT cohort (DME, CNV, Drusen).
    pub fn oct_class_weights() -> Vec<f64> {
        vec![10488.0, 36345.0, 7756.0]
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.num_classes < 2 {
            return fail(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if self.num_patients < 2 * self.num_classes {
            return fail(format!(
                "num_patients ({}) must be at least twice num_classes ({}) so every class has a train and a test patient",
                self.num_patients, self.num_classes
            ));
        }
        if self.feature_dim == 0 {
            return fail("feature_dim must be at least 1".into());
        }
        if self.min_samples_per_patient == 0 || self.max_samples_per_patient < self.min_samples_per_patient {
            return fail(format!(
                "need 1 <= min_samples_per_patient ({}) <= max_samples_per_patient ({})",
                self.min_samples_per_patient, self.max_samples_per_patient
            ));
        }
        for (name, v) in [
            ("class_separation", self.class_separation),
            ("patient_offset_scale", self.patient_offset_scale),
            ("noise_scale", self.noise_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.size_alpha.is_finite() && self.size_alpha > 0.0) {
            return fail(format!("size_alpha must be positive, got {}", self.size_alpha));
        }
        if !(self.test_patient_fraction > 0.0 && self.test_patient_fraction < 1.0) {
            return fail(format!(
                "test_patient_fraction must lie in (0, 1), got {}",
                self.test_patient_fraction
            ));
        }
        if !self.class_weights.is_empty() {
            if self.class_weights.len() != self.num_classes {
                return fail(format!(
                    "class_weights has {} entries for {} classes",
                    self.class_weights.len(),
                    self.num_classes
                ));
            }
            if self.class_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return fail("class_weights must be positive".into());
            }
        }
        Ok(())
    }
}

/// A generated cohort. Patient ids are global, so train and test patient
/// sets can be compared directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub train: Dataset,
    pub test: Dataset,
    /// Class of every patient, indexed by patient id.
    pub patient_classes: Vec<usize>,
}

/// Splits `total` into integer shares proportional to `weights` using the
/// largest-remainder rule (ties to the lower index).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

fn class_centers(spec: &CohortSpec, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let (c, d) = (spec.num_classes, spec.feature_dim);
    if c <= d {
        return (0..c)
            .map(|k| {
                let mut v = vec![0.0; d];
                v[k] = spec.class_separation;
                v
            })
            .collect();
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..c)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm * spec.class_separation).collect();
            }
        })
        .collect()
}

/// Generates a cohort from `spec`, seeded by `spec.seed`.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let (c, n, d) = (spec.num_classes, spec.num_patients, spec.feature_dim);

    let centers = class_centers(spec, &mut rng);

    // two patients per class up front so each class reaches both splits
    let weights = if spec.class_weights.is_empty() {
        vec![1.0; c]
    } else {
        spec.class_weights.clone()
    };
    let extra = apportion(n - 2 * c, &weights);
    let mut patient_classes: Vec<usize> = extra
        .iter()
        .enumerate()
        .flat_map(|(class, &e)| std::iter::repeat_n(class, 2 + e))
        .collect();
    patient_classes.shuffle(&mut rng);

    let mut is_test = vec![false; n];
    for class in 0..c {
        let members: Vec<usize> = (0..n).filter(|&p| patient_classes[p] == class).collect();
        let wanted = (spec.test_patient_fraction * members.len() as f64).round() as usize;
        let n_test = wanted.clamp(1, members.len() - 1);
        for i in rand::seq::index::sample(&mut rng, members.len(), n_test) {
            is_test[members[i]] = true;
        }
    }

    let sizes: Vec<usize> = (spec.min_samples_per_patient..=spec.max_samples_per_patient).collect();
    let size_weights: Vec<f64> = sizes.iter().map(|&s| (s as f64).powf(-spec.size_alpha)).collect();
    let size_dist = WeightedIndex::new(&size_weights)
        .map_err(|e| Error::InvalidSpec(format!("patient size distribution: {e}")))?;
    let offset_dist = Normal::new(0.0, spec.patient_offset_scale)
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let noise_dist = Normal::new(0.0, spec.noise_scale).map_err(|e| Error::InvalidSpec(e.to_string()))?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    for patient in 0..n {
        let class = patient_classes[patient];
        let size = sizes[size_dist.sample(&mut rng)];
        let offset: Vec<f64> = (0..d).map(|_| offset_dist.sample(&mut rng)).collect();
        let split = if is_test[patient] { &mut test } else { &mut train };
        for _ in 0..size {
            let features = centers[class]
                .iter()
                .zip(&offset)
                .map(|(m, o)| m + o + noise_dist.sample(&mut rng))
                .collect();
            split.push(Sample {
                id: split.len(),
                patient_id: patient as PatientId,
                features,
                label: class,
            });
        }
    }

    Ok(Cohort {
        train: Dataset::new(train, c, d)?,
        test: Dataset::new(test, c, d)?,
        patient_classes,
    })
}

/// Writes `dataset` in the CSV layout described in the module docs.
pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    out.write_all(csv_string(dataset).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn csv_string(dataset: &Dataset) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(Vec::new());
    let mut header = vec!["sample_id".to_string(), "patient_id".into(), "label".into()];
    header.extend((0..dataset.feature_dim()).map(|i| format!("f{i}")));
    wtr.write_record(&header).expect("in-memory write");
    for s in dataset.samples() {
        let mut row = vec![s.id.to_string(), s.patient_id.to_string(), s.label.to_string()];
        row.extend(s.features.iter().map(|f| f.to_string()));
        wtr.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Loads a dataset written by [`write_dataset_csv`].
///
/// With `num_classes = None` the class count is one more than the largest
/// label seen. Otherwise labels at or above `num_classes` are rejected.
pub fn load_dataset_csv(path: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(File::open(path)?);

    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.len() < 4 {
        return Err(parse_err(1, "header needs sample_id,patient_id,label and at least one feature".into()));
    }
    let feature_dim = header.len() - 3;
    for (i, name) in header.iter().enumerate() {
        let expected = match i {
            0 => "sample_id".to_string(),
            1 => "patient_id".to_string(),
            2 => "label".to_string(),
            _ => format!("f{}", i - 3),
        };
        if name != expected {
            return Err(parse_err(1, format!("unknown header column `{name}` (expected `{expected}`)")));
        }
    }

    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let id: usize = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad sample_id `{}`", &record[0])))?;
        if id != samples.len() {
            return Err(parse_err(line, format!("sample_id {id} out of sequence, expected {}", samples.len())));
        }
        let patient_id: PatientId = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad patient_id `{}`", &record[1])))?;
        let label: usize = record[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad label `{}`", &record[2])))?;
        if let Some(c) = num_classes {
            if label >= c {
                return Err(parse_err(line, format!("label {label} is not below num_classes {c}")));
            }
        }
        let features = record
            .iter()
            .skip(3)
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_err(line, format!("bad feature value `{f}`"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        samples.push(Sample {
            id,
            patient_id,
            features,
            label,
        });
    }

    let classes = match num_classes {
        Some(c) => c,
        None => samples.iter().map(|s| s.label + 1).max().unwrap_or(0).max(2),
    };
    Dataset::new(samples, classes, feature_dim)
}
