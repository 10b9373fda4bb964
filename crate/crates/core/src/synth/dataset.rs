//! Dataset generation and the line-delimited JSON manifest.
//!
//! The manifest's first line is a header carrying the seed, the count and
//! both configurations; each following line describes one PGM image. Image
//! paths are relative to the manifest's directory, so identical generation
//! runs produce identical manifest bytes wherever they are written.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::label::LabelFnConfig;
use super::render::{stream_rng, LineSynthesizer, Script, SynthConfig, TextLineSample};
use crate::error::{Error, Result};
use crate::imgproc::{encode_pgm, read_pgm, GrayImage};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ManifestHeader {
    kind: String,
    version: u32,
    seed: u64,
    count: usize,
    config: SynthConfig,
    label_fn: LabelFnConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub sigma: f64,
    pub label: f64,
    pub text: String,
    pub font: String,
    pub font_size: u32,
    pub background: u8,
    pub angle: f64,
    pub script: Script,
    pub ink: u8,
}

impl ManifestRecord {
    fn from_sample(path: String, s: &TextLineSample) -> Self {
        ManifestRecord {
            path,
            sigma: s.sigma,
            label: s.label,
            text: s.text.clone(),
            font: s.font.clone(),
            font_size: s.font_size,
            background: s.background,
            angle: s.angle,
            script: s.script,
            ink: s.ink,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub config: SynthConfig,
    pub label_fn: LabelFnConfig,
    pub records: Vec<ManifestRecord>,
    /// Directory that record paths are relative to.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn image_path(&self, record: &ManifestRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    pub fn load_image(&self, record: &ManifestRecord) -> Result<GrayImage> {
        read_pgm(self.image_path(record))
    }

    pub fn to_jsonl(&self) -> String {
        let header = ManifestHeader {
            kind: "header".into(),
            version: MANIFEST_VERSION,
            seed: self.seed,
            count: self.records.len(),
            config: self.config.clone(),
            label_fn: self.label_fn,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::data(format!("{} is empty", path.display())))?
            .map_err(|e| Error::io(path, e))?;
        let header: ManifestHeader = serde_json::from_str(&first)
            .map_err(|e| Error::data(format!("{}: bad manifest header: {e}", path.display())))?;
        if header.kind != "header" || header.version != MANIFEST_VERSION {
            return Err(Error::data(format!(
                "{}: unsupported manifest header",
                path.display()
            )));
        }
        let mut records = Vec::with_capacity(header.count);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| {
                Error::data(format!("{}: record {}: {e}", path.display(), i + 1))
            })?;
            records.push(rec);
        }
        if records.len() != header.count {
            return Err(Error::data(format!(
                "{}: header announces {} records, found {}",
                path.display(),
                header.count,
                records.len()
            )));
        }
        Ok(DatasetManifest {
            seed: header.seed,
            config: header.config,
            label_fn: header.label_fn,
            records,
            root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    /// Checks that every image exists, decodes, and has the configured size.
    pub fn verify(&self) -> Result<()> {
        let (w, h) = self.config.image_size;
        for r in &self.records {
            let img = self.load_image(r)?;
            if (img.width(), img.height()) != (w, h) {
                return Err(Error::data(format!(
                    "{} is {}x{}, manifest says {w}x{h}",
                    r.path,
                    img.width(),
                    img.height()
                )));
            }
        }
        Ok(())
    }
}

fn image_name(index: usize) -> String {
    format!("line_{index:06}.pgm")
}

/// Renders sample `index` of the dataset seeded by `seed`.
pub fn dataset_sample(synth: &LineSynthesizer, seed: u64, index: usize) -> Result<TextLineSample> {
    let recipe = synth.sample_recipe(&mut stream_rng(seed, index as u64 + 1))?;
    synth.realize(&recipe)
}

/// Writes `n` labelled lines and a manifest into `out_dir`.
///
/// Each sample draws from its own RNG stream derived from `(seed, index)`, so
/// the output does not depend on `jobs`. On failure every file written so far
/// is removed.
pub fn generate_dataset(
    out_dir: impl AsRef<Path>,
    n: usize,
    cfg: &SynthConfig,
    label_fn: &LabelFnConfig,
    seed: u64,
    jobs: usize,
) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    if n == 0 {
        return Err(Error::param("dataset size must be at least 1"));
    }
    let synth = LineSynthesizer::new(cfg.clone(), *label_fn)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::param(format!("cannot build worker pool: {e}")))?;
    let results: Vec<Result<ManifestRecord>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let sample = dataset_sample(&synth, seed, i)?;
                let name = image_name(i);
                let path = out_dir.join(&name);
                fs::write(&path, encode_pgm(&sample.image)).map_err(|e| Error::io(&path, e))?;
                Ok(ManifestRecord::from_sample(name, &sample))
            })
            .collect()
    });

    let cleanup = || {
        for i in 0..n {
            let _ = fs::remove_file(out_dir.join(image_name(i)));
        }
        let _ = fs::remove_file(out_dir.join(MANIFEST_FILE));
    };

    let records = match results.into_iter().collect::<Result<Vec<_>>>() {
        Ok(r) => r,
        Err(e) => {
            cleanup();
            return Err(e);
        }
    };
    let manifest = DatasetManifest {
        seed,
        config: cfg.clone(),
        label_fn: *label_fn,
        records,
        root: out_dir.to_path_buf(),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let write = || -> std::io::Result<()> {
        let tmp = out_dir.join(format!("{MANIFEST_FILE}.tmp"));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(manifest.to_jsonl().as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, &manifest_path)
    };
    if let Err(e) = write() {
        cleanup();
        let _ = fs::remove_file(out_dir.join(format!("{MANIFEST_FILE}.tmp")));
        return Err(Error::io(manifest_path, e));
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_bytes_are_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = SynthConfig::default();
        let lf = LabelFnConfig::default();
        let ma = generate_dataset(a.path(), 10, &cfg, &lf, 42, 1).unwrap();
        let mb = generate_dataset(b.path(), 10, &cfg, &lf, 42, 2).unwrap();
        let bytes_a = fs::read(a.path().join(MANIFEST_FILE)).unwrap();
        let bytes_b = fs::read(b.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(bytes_a, bytes_b);
        for (ra, rb) in ma.records.iter().zip(&mb.records) {
            assert_eq!(
                fs::read(ma.image_path(ra)).unwrap(),
                fs::read(mb.image_path(rb)).unwrap()
            );
        }
    }

    #[test]
    fn manifest_reads_back_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(
            dir.path(),
            5,
            &SynthConfig::default(),
            &LabelFnConfig::default(),
            7,
            1,
        )
        .unwrap();
        let back = DatasetManifest::read(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.count(), 5);
        back.verify().unwrap();

        fs::remove_file(dir.path().join("line_000002.pgm")).unwrap();
        assert!(back.verify().is_err());
    }

    #[test]
    fn zero_count_is_rejected_without_writing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("never");
        assert!(generate_dataset(&out, 0, &SynthConfig::default(), &LabelFnConfig::default(), 1, 1)
            .is_err());
        assert!(!out.exists());
    }

    #[test]
    fn render_failure_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("emoji.txt");
        fs::write(&corpus, "\u{1F600}\n").unwrap();
        let cfg = SynthConfig {
            chinese_probability: 1.0,
            chinese_corpus: Some(corpus),
            ..SynthConfig::default()
        };
        let out = dir.path().join("set");
        let err = generate_dataset(&out, 4, &cfg, &LabelFnConfig::default(), 1, 1);
        assert!(err.is_err());
        assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
    }
}
