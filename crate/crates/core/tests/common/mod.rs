#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stereocolor::dataset::frame_path;
use stereocolor::testimage;
use stereocolor::{ImageBuffer, Stereopair};

pub fn fixture_pair(i: usize) -> Stereopair {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    Stereopair::new(
        ImageBuffer::load_png(dir.join(format!("pair{i}_left.png"))).unwrap(),
        ImageBuffer::load_png(dir.join(format!("pair{i}_right.png"))).unwrap(),
    )
    .unwrap()
}

pub fn frame_seed(scene: usize, frame: usize) -> u64 {
    1000 + 100 * scene as u64 + frame as u64
}

pub fn scene_name(scene: usize) -> String {
    format!("scene{scene:02}")
}

/// Clean PAIR dataset of synthetic stereo frames.
pub fn write_pair_dataset(root: &Path, scenes: usize, frames: usize, width: usize, height: usize) {
    for s in 0..scenes {
        fs::create_dir_all(root.join(scene_name(s))).unwrap();
        for f in 0..frames {
            let (l, r) = testimage::stereo_pair(width, height, frame_seed(s, f));
            l.save_png(frame_path(root, &scene_name(s), f as u32, "left"))
                .unwrap();
            r.save_png(frame_path(root, &scene_name(s), f as u32, "right"))
                .unwrap();
        }
    }
}

/// TRIPLET dataset whose distorted left view is `distort(left_gt)`.
pub fn write_triplet_dataset(
    root: &Path,
    scenes: usize,
    frames: usize,
    width: usize,
    height: usize,
    distort: impl Fn(&ImageBuffer) -> ImageBuffer,
) {
    for s in 0..scenes {
        fs::create_dir_all(root.join(scene_name(s))).unwrap();
        for f in 0..frames {
            let (l, r) = testimage::stereo_pair(width, height, frame_seed(s, f));
            let scene = scene_name(s);
            distort(&l)
                .save_png(frame_path(root, &scene, f as u32, "left"))
                .unwrap();
            l.save_png(frame_path(root, &scene, f as u32, "left_gt")).unwrap();
            r.save_png(frame_path(root, &scene, f as u32, "right")).unwrap();
        }
    }
}

/// Config file that puts every frame into the TEST split.
pub fn all_test_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("all_test.conf");
    fs::write(
        &path,
        format!("split.train = 0\nsplit.val = 0\nsplit.test = 1\n{extra}"),
    )
    .unwrap();
    path
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stereocolor"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `root` with its bytes, sorted by relative path.
pub fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).unwrap();
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

/// Summary CSV rows as (method, type, time_ms, psnr, ssim, frames, failed).
pub fn parse_summary_csv(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "dataset,method,type,time_ms,psnr_db,ssim,frames,failed"
    );
    lines
        .map(|l| {
            l.rsplitn(8, ',')
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .skip(1)
                .map(str::to_string)
                .collect()
        })
        .collect()
}
