//! Stereo dataset layout, loading and train/val/test splitting.
//!
//! A dataset root holds one directory per scene. Inside, frame `N` of a
//! scene is stored as
//!
//! ```text
//! <scene>/<NNNN>_left.png      left view (distorted, for triplets)
//! <scene>/<NNNN>_left_gt.png   undistorted left view (triplets only)
//! <scene>/<NNNN>_right.png     right view, the color reference
//! ```
//!
//! Frames with all three files form a TRIPLET dataset; frames with only
//! `left` and `right` form a PAIR dataset. Mixing both is an error.
//! Incomplete frames are skipped with a warning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::Config;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Triplet,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown split `{s}`")))
    }
}

/// `(scene id, frame number)`.
pub type FrameKey = (String, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameEntry {
    pub scene: String,
    pub frame: u32,
    pub left: PathBuf,
    pub right: PathBuf,
    pub left_gt: Option<PathBuf>,
}

impl FrameEntry {
    pub fn key(&self) -> FrameKey {
        (self.scene.clone(), self.frame)
    }

    /// `scene/NNNN`.
    pub fn label(&self) -> String {
        format!("{}/{:04}", self.scene, self.frame)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneInfo {
    pub scene_id: String,
    pub frame_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub layout: Layout,
    pub scenes: Vec<SceneInfo>,
    /// Complete frames ordered by scene, then frame number.
    pub frames: Vec<FrameEntry>,
    /// Empty until [`split_dataset`] or [`DatasetManifest::assign_all`] runs.
    pub split: BTreeMap<FrameKey, Split>,
    /// Incomplete frames that were skipped.
    pub warnings: Vec<String>,
}

/// Path of one frame file under `root`.
pub fn frame_path(root: &Path, scene: &str, frame: u32, role: &str) -> PathBuf {
    root.join(scene).join(format!("{frame:04}_{role}.png"))
}

fn parse_frame_file(name: &str) -> Option<(u32, &'static str)> {
    let stem = name.strip_suffix(".png")?;
    let (num, role) = stem.split_once('_')?;
    if num.len() < 4 || !num.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let role = match role {
        "left" => "left",
        "left_gt" => "left_gt",
        "right" => "right",
        _ => return None,
    };
    Some((num.parse().ok()?, role))
}

/// Scans `root` for scenes and frames.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let mut scene_dirs: Vec<(String, PathBuf)> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.file_type().is_ok_and(|t| t.is_dir()))
        .filter_map(|entry| {
            let name = entry.file_name().into_string().ok()?;
            (!name.starts_with('.')).then(|| (name, entry.path()))
        })
        .collect();
    scene_dirs.sort();

    let mut frames = Vec::new();
    let mut warnings = Vec::new();
    let mut saw_triplet = false;
    let mut saw_pair = false;
    for (scene, dir) in &scene_dirs {
        let mut roles: BTreeMap<u32, BTreeSet<&'static str>> = BTreeMap::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            if let Some((frame, role)) = entry.file_name().to_str().and_then(parse_frame_file) {
                roles.entry(frame).or_default().insert(role);
            }
        }
        for (frame, have) in roles {
            let (left, right, gt) = (
                have.contains("left"),
                have.contains("right"),
                have.contains("left_gt"),
            );
            if left && right {
                if gt {
                    saw_triplet = true;
                } else {
                    saw_pair = true;
                }
                frames.push(FrameEntry {
                    scene: scene.clone(),
                    frame,
                    left: frame_path(root, scene, frame, "left"),
                    right: frame_path(root, scene, frame, "right"),
                    left_gt: gt.then(|| frame_path(root, scene, frame, "left_gt")),
                });
            } else {
                let missing: Vec<&str> = ["left", "left_gt", "right"]
                    .into_iter()
                    .filter(|r| !have.contains(r) && (*r != "left_gt" || !(left && right)))
                    .collect();
                let msg = format!(
                    "{scene}/{frame:04}: incomplete frame, missing {}",
                    missing.join(", ")
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    if frames.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    if saw_triplet && saw_pair {
        return Err(Error::MixedLayout(root.to_path_buf()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &frames {
        *counts.entry(f.scene.as_str()).or_default() += 1;
    }
    let scenes = counts
        .into_iter()
        .map(|(scene_id, frame_count)| SceneInfo {
            scene_id: scene_id.to_string(),
            frame_count,
        })
        .collect();
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        layout: if saw_triplet {
            Layout::Triplet
        } else {
            Layout::Pair
        },
        scenes,
        frames,
        split: BTreeMap::new(),
        warnings,
    })
}

impl DatasetManifest {
    pub fn frames_in(&self, split: Split) -> impl Iterator<Item = &FrameEntry> {
        self.frames
            .iter()
            .filter(move |f| self.split.get(&f.key()) == Some(&split))
    }

    /// Puts every frame into `split`.
    pub fn assign_all(&mut self, split: Split) {
        self.split = self.frames.iter().map(|f| (f.key(), split)).collect();
    }

    /// Split listing as `scene/NNNN = split` lines.
    pub fn split_to_text(&self) -> String {
        let mut c = Config::new();
        for f in &self.frames {
            if let Some(s) = self.split.get(&f.key()) {
                c.set(f.label(), s);
            }
        }
        c.to_text()
    }

    /// Applies a listing written by [`DatasetManifest::split_to_text`].
    /// Frames absent from the listing stay unassigned.
    pub fn apply_split_text(&mut self, text: &str) -> Result<()> {
        let c = Config::parse(text)?;
        let mut split = BTreeMap::new();
        for f in &self.frames {
            if let Some(s) = c.get::<Split>(&f.label())? {
                split.insert(f.key(), s);
            }
        }
        self.split = split;
        Ok(())
    }
}

/// Train/val/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.75,
            val: 0.125,
            test: 0.125,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    /// Reads `split.train`, `split.val` and `split.test`.
    pub fn from_config(config: &Config) -> Result<Self> {
        let d = Self::default();
        Self::new(
            config.get_or("split.train", d.train)?,
            config.get_or("split.val", d.val)?,
            config.get_or("split.test", d.test)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(
                "split ratios must be non-negative".into(),
            ));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("split ratios must sum to 1".into()));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    /// Largest-remainder apportionment of `n` units.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let ratios = self.as_array();
        let exact = ratios.map(|r| r * n as f64);
        let mut counts = exact.map(|e| e.floor() as usize);
        let mut left = n - counts.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            if ratios[i] > 0.0 {
                counts[i] += 1;
                left -= 1;
            }
        }
        counts
    }
}

/// Seeded 64-bit FNV-1a with a SplitMix64 finalizer; stable across
/// platforms and releases.
pub fn stable_hash(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(key.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
    h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^ (h >> 31)
}

/// Deterministic split.
///
/// TRIPLET datasets split by scene so no scene straddles two parts; PAIR
/// datasets split by frame. Units are ordered by a seeded hash of their id
/// and cut into consecutive blocks sized by [`SplitRatios::counts`].
pub fn split_dataset(manifest: &DatasetManifest, ratios: SplitRatios, seed: u64) -> Result<DatasetManifest> {
    ratios.validate()?;
    let units: Vec<String> = match manifest.layout {
        Layout::Triplet => manifest.scenes.iter().map(|s| s.scene_id.clone()).collect(),
        Layout::Pair => manifest.frames.iter().map(FrameEntry::label).collect(),
    };
    let needed = ratios.as_array().iter().filter(|r| **r > 0.0).count();
    if units.len() < needed {
        return Err(Error::TooFewScenes {
            scenes: units.len(),
            needed,
        });
    }
    let mut ranked: Vec<(u64, &String)> = units.iter().map(|u| (stable_hash(seed, u), u)).collect();
    ranked.sort();
    let [n_train, n_val, _] = ratios.counts(units.len());
    let assignment: BTreeMap<&str, Split> = ranked
        .iter()
        .enumerate()
        .map(|(rank, (_, unit))| {
            let split = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            (unit.as_str(), split)
        })
        .collect();
    let mut out = manifest.clone();
    out.split = manifest
        .frames
        .iter()
        .map(|f| {
            let unit = match manifest.layout {
                Layout::Triplet => f.scene.clone(),
                Layout::Pair => f.label(),
            };
            (f.key(), assignment[unit.as_str()])
        })
        .collect();
    Ok(out)
}
