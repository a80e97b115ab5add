//! On-disk dataset layout.
//!
//! ```text
//! <dataset>/
//!   manifest.json            ordered epoch ids, channel names, applied stages
//!   ratings.csv              annotator ratings (see `stats::RatingTable`)
//!   epochs/<id>.csv          header `t,<ch1>,...,<chN>`; baseline rows have t < 0
//!   epochs/<id>.meta.json    {subject_id, ad_id, sample_rate_hz, label}
//! ```
//!
//! Samples are written with 9 significant digits; reading a file back and
//! writing it again reproduces it byte for byte.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ChannelLayout, Epoch, Label};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RATINGS_FILE: &str = "ratings.csv";
pub const EPOCH_DIR: &str = "epochs";

/// Processing stages already applied to the epochs of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    NoisyRejection,
    Bandpass,
    Ica,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_fingerprint: String,
    pub channels: ChannelLayout,
    pub epochs: Vec<String>,
    #[serde(default)]
    pub applied_stages: Vec<Stage>,
}

impl Manifest {
    pub fn has_stage(&self, stage: Stage) -> bool {
        self.applied_stages.contains(&stage)
    }

    pub fn load(dataset_dir: &Path) -> Result<Self> {
        read_json(&dataset_dir.join(MANIFEST_FILE))
    }

    pub fn save(&self, dataset_dir: &Path) -> Result<()> {
        write_json(&dataset_dir.join(MANIFEST_FILE), self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMeta {
    pub subject_id: String,
    pub ad_id: String,
    pub sample_rate_hz: f64,
    pub label: Option<Label>,
}

/// Text form of one sample (9 significant digits).
pub fn format_sample(v: f64) -> String {
    format!("{v:.8e}")
}

/// The value a sample takes after a write/read cycle.
pub fn quantize_sample(v: f64) -> f64 {
    format_sample(v).parse().expect("formatted float parses")
}

fn epoch_paths(dataset_dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    let dir = dataset_dir.join(EPOCH_DIR);
    (dir.join(format!("{id}.csv")), dir.join(format!("{id}.meta.json")))
}

pub fn write_epoch(dataset_dir: &Path, epoch: &Epoch) -> Result<()> {
    let id = epoch.id();
    let (csv_path, meta_path) = epoch_paths(dataset_dir, &id);
    if let Some(parent) = csv_path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let file = File::create(&csv_path)
        .map_err(|e| Error::io(format!("creating {}", csv_path.display()), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| Error::io(format!("writing {}", csv_path.display()), e);

    write!(out, "t").map_err(io_err)?;
    for name in epoch.layout.names() {
        write!(out, ",{name}").map_err(io_err)?;
    }
    writeln!(out).map_err(io_err)?;

    let fs_hz = epoch.sample_rate_hz;
    let b = epoch.baseline_samples() as i64;
    let mut line = String::with_capacity(16 * (epoch.layout.count() + 1));
    let windows = [(&epoch.baseline, -b), (&epoch.stimulus, 0)];
    for (m, offset) in windows {
        for j in 0..m.ncols() {
            line.clear();
            line.push_str(&((j as i64 + offset) as f64 / fs_hz).to_string());
            for v in m.column(j) {
                line.push(',');
                line.push_str(&format_sample(*v));
            }
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)?;

    let meta = EpochMeta {
        subject_id: epoch.subject_id.clone(),
        ad_id: epoch.ad_id.clone(),
        sample_rate_hz: epoch.sample_rate_hz,
        label: epoch.label,
    };
    write_json(&meta_path, &meta)
}

pub fn read_epoch(dataset_dir: &Path, id: &str) -> Result<Epoch> {
    let (csv_path, meta_path) = epoch_paths(dataset_dir, id);
    let meta: EpochMeta = read_json(&meta_path)?;
    let file =
        File::open(&csv_path).map_err(|e| Error::io(format!("opening {}", csv_path.display()), e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: csv_path.clone(),
        line,
        message,
    };

    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(|e| Error::io(format!("reading {}", csv_path.display()), e))?;
    let mut cols = header.split(',');
    if cols.next() != Some("t") {
        return Err(parse_err(1, "header must start with `t`".into()));
    }
    let layout = ChannelLayout::new(cols.map(str::to_string))
        .map_err(|e| parse_err(1, e.to_string()))?;
    let n_ch = layout.count();

    let mut times = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::io(format!("reading {}", csv_path.display()), e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t: f64 = fields
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad time value: {e}")))?;
        times.push(t);
        let before = values.len();
        for f in fields {
            values.push(
                f.parse()
                    .map_err(|e| parse_err(line_no, format!("bad sample {f:?}: {e}")))?,
            );
        }
        if values.len() - before != n_ch {
            return Err(parse_err(
                line_no,
                format!("expected {n_ch} samples, found {}", values.len() - before),
            ));
        }
    }

    let n = times.len();
    let b = times.iter().take_while(|t| **t < 0.0).count();
    if times[b..].iter().any(|t| *t < 0.0) {
        return Err(parse_err(0, "baseline rows (t < 0) must precede stimulus rows".into()));
    }
    // rows are samples; transpose into [channels × samples]
    let by_sample = Array2::from_shape_vec((n, n_ch), values)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let data = by_sample.t();
    Ok(Epoch {
        layout,
        sample_rate_hz: meta.sample_rate_hz,
        baseline: data.slice(ndarray::s![.., ..b]).to_owned(),
        stimulus: data.slice(ndarray::s![.., b..]).to_owned(),
        subject_id: meta.subject_id,
        ad_id: meta.ad_id,
        label: meta.label,
    })
}

/// Writes every epoch plus the manifest. Epoch files are written in parallel.
pub fn save_dataset(dataset_dir: &Path, manifest: &Manifest, epochs: &[Epoch]) -> Result<()> {
    fs::create_dir_all(dataset_dir.join(EPOCH_DIR))
        .map_err(|e| Error::io(format!("creating {}", dataset_dir.display()), e))?;
    epochs
        .par_iter()
        .map(|e| write_epoch(dataset_dir, e))
        .collect::<Result<Vec<_>>>()?;
    manifest.save(dataset_dir)
}

/// Loads the manifest and every epoch it lists, in manifest order.
pub fn load_dataset(dataset_dir: &Path) -> Result<(Manifest, Vec<Epoch>)> {
    let manifest = Manifest::load(dataset_dir)?;
    let epochs = manifest
        .epochs
        .par_iter()
        .map(|id| read_epoch(dataset_dir, id))
        .collect::<Result<Vec<_>>>()?;
    for e in &epochs {
        if e.layout != manifest.channels {
            return Err(Error::InvalidData(format!(
                "epoch {} channel layout differs from the manifest",
                e.id()
            )));
        }
    }
    Ok((manifest, epochs))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::json(format!("serializing {}", path.display()), e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn epoch_from(baseline: Array2<f64>, stimulus: Array2<f64>) -> Epoch {
        let layout = ChannelLayout::new(["A", "B", "C"]).unwrap();
        Epoch {
            layout,
            sample_rate_hz: 128.0,
            baseline,
            stimulus,
            subject_id: "s01".into(),
            ad_id: "ad003".into(),
            label: Some(Label::Low),
        }
    }

    #[test]
    fn csv_layout_has_negative_baseline_times() {
        let dir = tempfile::tempdir().unwrap();
        let e = epoch_from(Array2::zeros((3, 2)), Array2::ones((3, 3)));
        write_epoch(dir.path(), &e).unwrap();
        let text = fs::read_to_string(dir.path().join("epochs/s01_ad003.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,A,B,C");
        assert!(lines[1].starts_with("-0.015625,"));
        assert!(lines[3].starts_with("0,"));
        assert_eq!(lines.len(), 6);
        let meta = fs::read_to_string(dir.path().join("epochs/s01_ad003.meta.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&meta).unwrap();
        assert_eq!(v["label"], 0);
        assert_eq!(v["sample_rate_hz"], 128.0);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            config_fingerprint: "abc".into(),
            channels: ChannelLayout::default(),
            epochs: vec!["s01_ad001".into()],
            applied_stages: vec![Stage::Bandpass],
        };
        m.save(dir.path()).unwrap();
        assert_eq!(Manifest::load(dir.path()).unwrap(), m);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn epoch_round_trip_is_exact_at_text_precision(
            vals in proptest::collection::vec(-1e4f64..1e4, 3 * 7),
            label in proptest::option::of(any::<bool>()),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let baseline = Array2::from_shape_vec((3, 2), vals[..6].to_vec()).unwrap();
            let stimulus = Array2::from_shape_vec((3, 5), vals[6..21].to_vec()).unwrap();
            let mut e = epoch_from(baseline, stimulus);
            e.label = label.map(Label::from_bool);
            write_epoch(dir.path(), &e).unwrap();
            let back = read_epoch(dir.path(), &e.id()).unwrap();

            let expected = Epoch {
                baseline: e.baseline.mapv(quantize_sample),
                stimulus: e.stimulus.mapv(quantize_sample),
                ..e.clone()
            };
            prop_assert_eq!(&back, &expected);

            let first = fs::read(dir.path().join("epochs/s01_ad003.csv")).unwrap();
            write_epoch(dir.path(), &back).unwrap();
            let second = fs::read(dir.path().join("epochs/s01_ad003.csv")).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
