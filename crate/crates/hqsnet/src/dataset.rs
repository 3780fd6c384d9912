//! Synthetic phantom datasets on disk.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hqsnet_core::forward::{forward_model, Measurements};
use hqsnet_core::net::TrainSample;
use hqsnet_core::phantom::{phantoms, split_of, Split};
use hqsnet_core::sampling::generate_mask;
use hqsnet_core::{Mask, RealGrid};

use crate::error::{io_err, HarnessError, Result};
use crate::io;

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: usize,
    /// Relative to the dataset root.
    pub path: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    /// Relative to the dataset root.
    pub mask: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn manifest_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Format(format!("manifest: {}", msg.into())))
}

impl DatasetManifest {
    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn mask_path(&self) -> PathBuf {
        self.root.join(&self.mask)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "height = {}", self.height).unwrap();
        writeln!(s, "width = {}", self.width).unwrap();
        writeln!(s, "mask = {}", self.mask.display()).unwrap();
        for e in &self.entries {
            writeln!(s, "entry = {},{},{}", e.id, e.split.as_str(), e.path.display()).unwrap();
        }
        s
    }

    pub fn parse(root: &Path, text: &str) -> Result<Self> {
        let mut m = DatasetManifest {
            root: root.to_path_buf(),
            height: 0,
            width: 0,
            seed: 0,
            mask: PathBuf::new(),
            entries: Vec::new(),
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let Some((k, v)) = line.split_once('=') else { return manifest_err(format!("bad line {line:?}")) };
            let v = v.trim();
            let parse_num = |v: &str| v.parse::<u64>().or_else(|_| manifest_err(format!("bad number {v:?}")));
            match k.trim() {
                "seed" => m.seed = parse_num(v)?,
                "height" => m.height = parse_num(v)? as usize,
                "width" => m.width = parse_num(v)? as usize,
                "mask" => m.mask = PathBuf::from(v),
                "entry" => {
                    let parts: Vec<&str> = v.splitn(3, ',').collect();
                    let [id, split, path] = parts[..] else { return manifest_err(format!("bad entry {v:?}")) };
                    let Some(split) = Split::parse(split) else { return manifest_err(format!("bad split {split:?}")) };
                    m.entries.push(ManifestEntry { id: parse_num(id)? as usize, path: PathBuf::from(path), split });
                }
                other => return manifest_err(format!("unknown key {other:?}")),
            }
        }
        let mut ids = HashSet::new();
        if !m.entries.iter().all(|e| ids.insert(e.id)) {
            return manifest_err("duplicate ids");
        }
        if m.height == 0 || m.width == 0 {
            return manifest_err("missing shape");
        }
        Ok(m)
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_NAME);
        let m = Self::parse(root, &std::fs::read_to_string(&path).map_err(io_err(&path))?)?;
        for p in m.entries.iter().map(|e| m.root.join(&e.path)).chain([m.mask_path()]) {
            if !p.exists() {
                return manifest_err(format!("referenced file {} is missing", p.display()));
            }
        }
        Ok(m)
    }

    pub fn save(&self) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let path = self.root.join(MANIFEST_NAME);
        std::fs::write(&path, self.render()).map_err(io_err(&path))
    }

    pub fn read_truth(&self, e: &ManifestEntry) -> Result<RealGrid> {
        let g = io::read_grid(&self.root.join(&e.path))?.into_real()?;
        if g.shape() != (self.height, self.width) {
            return manifest_err(format!("entry {} has shape {:?}", e.id, g.shape()));
        }
        Ok(g)
    }

    pub fn read_mask(&self) -> Result<Mask> {
        let m = io::read_mask(&self.mask_path())?;
        if m.shape() != (self.height, self.width) {
            return manifest_err(format!("mask shape {:?} differs from images", m.shape()));
        }
        Ok(m)
    }
}

fn check_shape(height: usize, width: usize) -> Result<()> {
    let ok = |n: usize| n.is_power_of_two() && n.is_multiple_of(4);
    if !(ok(height) && ok(width)) {
        return Err(HarnessError::Config(format!("image size {height}x{width} must be powers of two, at least 4")));
    }
    Ok(())
}

/// Generates phantoms and the shared mask under `root` and writes the manifest.
pub fn gen_phantoms(
    root: &Path,
    count: usize,
    height: usize,
    width: usize,
    seed: u64,
    mask: &Mask,
) -> Result<DatasetManifest> {
    check_shape(height, width)?;
    if mask.shape() != (height, width) {
        return Err(HarnessError::Config(format!("mask shape {:?} differs from {height}x{width}", mask.shape())));
    }
    let images = phantoms(count, height, width, seed);
    let mut entries = Vec::with_capacity(count);
    for (id, img) in images.iter().enumerate() {
        let path = PathBuf::from(format!("gt_{id:05}.grd"));
        io::write_real_grid(&root.join(&path), img)?;
        entries.push(ManifestEntry { id, path, split: split_of(id, count) });
    }
    let mask_rel = PathBuf::from("mask.msk");
    io::write_mask(&root.join(&mask_rel), mask)?;
    let m = DatasetManifest { root: root.to_path_buf(), height, width, seed, mask: mask_rel, entries };
    m.save()?;
    Ok(m)
}

/// Mask for a dataset: generated from the mask parameters.
pub fn make_mask(height: usize, width: usize, accel: f32, order: u8, seed: u64) -> Result<Mask> {
    Ok(generate_mask(height, width, accel, order, seed)?)
}

/// Ground truth and noiseless measurements of every entry in `split`, in id order.
pub fn load_split(m: &DatasetManifest, mask: &Arc<Mask>, split: Split) -> Result<Vec<(usize, RealGrid, Measurements)>> {
    m.entries_in(split)
        .map(|e| {
            let truth = m.read_truth(e)?;
            let y = forward_model(&truth, mask)?;
            Ok((e.id, truth, y))
        })
        .collect()
}

pub fn train_samples(items: &[(usize, RealGrid, Measurements)]) -> Vec<TrainSample> {
    items.iter().map(|(_, t, y)| TrainSample { y: y.clone(), truth: Some(t.clone()) }).collect()
}
