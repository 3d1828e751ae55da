use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use spinekit::volume::nifti::write_nifti;
use spinekit::{Volume, Voxel};

// Sibling temp path that keeps the full file name, so `.nii.gz` still
// selects compression.
fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".tmp-{}-{name}", std::process::id()))
}

fn commit(tmp: &Path, path: &Path) -> Result<()> {
    fs::rename(tmp, path).with_context(|| format!("cannot move {} into place", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_path(path);
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    commit(&tmp, path)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn write_volume<T: Voxel>(path: &Path, vol: &Volume<T>) -> Result<()> {
    let tmp = temp_path(path);
    write_nifti(vol, &tmp)?;
    commit(&tmp, path)
}

/// Provenance written next to every command's outputs.
#[derive(Serialize)]
pub struct RunRecord<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub config: &'a C,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl<'a, C: Serialize> RunRecord<'a, C> {
    pub fn new(command: &'a str, config: &'a C) -> Self {
        RunRecord {
            tool: "spinekit",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: None,
            threads: None,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }
}

/// `eval.json` → `eval.run.json`, for commands whose output is one file.
pub fn run_record_beside(output: &Path) -> PathBuf {
    let name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(".nii.gz")
        .or_else(|| name.rsplit_once('.').map(|(s, _)| s))
        .unwrap_or(&name)
        .to_string();
    output.with_file_name(format!("{stem}.run.json"))
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_record_names() {
        assert_eq!(
            run_record_beside(Path::new("d/eval.json")),
            Path::new("d/eval.run.json")
        );
        assert_eq!(
            run_record_beside(Path::new("fused.nii.gz")),
            Path::new("fused.run.json")
        );
        assert_eq!(run_record_beside(Path::new("out")), Path::new("out.run.json"));
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_json(&p, &[1, 2]).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.json")]);
    }
}
