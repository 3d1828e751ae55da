//! Predictors running as external processes that exchange NIfTI files.
//!
//! For each request the input is written to `in_<uuid>.nii.gz` in the
//! exchange directory and the command is run with the input path and the
//! output path `out_<uuid>.nii.gz`. The process writes either that label
//! file or one score file per class, `out_<uuid>_c<k>.nii.gz`. A nonzero
//! exit status is a failure.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use uuid::Uuid;

use super::predictor::{CutoutPredictor, PatchPrediction, SemanticPredictor, NUM_CLASSES};
use crate::assembly::Cutout;
use crate::error::{Error, Result};
use crate::volume::nifti::{read_nifti, write_nifti};
use crate::volume::{reorient, Volume, Voxel};

#[derive(Debug)]
pub struct ExternalPredictor {
    /// Shell command; `{input}` and `{output}` are replaced by the quoted
    /// paths, which are appended when the placeholders are absent.
    pub command: String,
    pub exchange_dir: PathBuf,
    pub timeout: Duration,
    /// Allows several requests in flight at once.
    pub reentrant: bool,
    pub keep_files: bool,
    lock: Mutex<()>,
}

impl ExternalPredictor {
    pub fn new(command: impl Into<String>, exchange_dir: impl Into<PathBuf>, timeout: Duration) -> Self {
        ExternalPredictor {
            command: command.into(),
            exchange_dir: exchange_dir.into(),
            timeout,
            reentrant: false,
            keep_files: false,
            lock: Mutex::new(()),
        }
    }

    pub fn reentrant(mut self, yes: bool) -> Self {
        self.reentrant = yes;
        self
    }

    fn render(&self, input: &Path, output: &Path) -> String {
        let (i, o) = (shell_quote(input), shell_quote(output));
        if self.command.contains("{input}") || self.command.contains("{output}") {
            self.command.replace("{input}", &i).replace("{output}", &o)
        } else {
            format!("{} {i} {o}", self.command)
        }
    }

    // Writes the input, runs the command, then lets `read` collect the output.
    fn exchange<T: Voxel, R>(&self, input: &Volume<T>, read: impl FnOnce(&Path, &str) -> Result<R>) -> Result<R> {
        let _guard = if self.reentrant {
            None
        } else {
            Some(self.lock.lock().unwrap_or_else(|e| e.into_inner()))
        };
        std::fs::create_dir_all(&self.exchange_dir).map_err(|e| Error::io(&self.exchange_dir, e))?;
        let id = Uuid::new_v4().simple().to_string();
        let in_path = self.exchange_dir.join(format!("in_{id}.nii.gz"));
        let out_path = self.exchange_dir.join(format!("out_{id}.nii.gz"));
        write_nifti(input, &in_path)?;
        let result = run(&self.render(&in_path, &out_path), self.timeout).and_then(|()| read(&self.exchange_dir, &id));
        if !self.keep_files {
            let _ = std::fs::remove_file(&in_path);
            if let Ok(entries) = std::fs::read_dir(&self.exchange_dir) {
                let prefix = format!("out_{id}");
                for e in entries.flatten() {
                    if e.file_name().to_string_lossy().starts_with(&prefix) {
                        let _ = std::fs::remove_file(e.path());
                    }
                }
            }
        }
        result
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn run(command: &str, timeout: Duration) -> Result<()> {
    log::debug!("running predictor: {command}");
    let mut cmd = Command::new("sh");
    cmd.arg("-c")
        .arg(command)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let mut child = cmd
        .spawn()
        .map_err(|e| Error::Predictor(format!("cannot start `{command}`: {e}")))?;
    let drain = |mut r: Box<dyn Read + Send>| {
        std::thread::spawn(move || {
            let mut s = String::new();
            let _ = r.read_to_string(&mut s);
            s
        })
    };
    let out = drain(Box::new(child.stdout.take().expect("piped stdout")));
    let err = drain(Box::new(child.stderr.take().expect("piped stderr")));
    let start = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(s)) => break Some(s),
            Ok(None) if start.elapsed() >= timeout => {
                // Children of the shell hold the pipes open; end the whole group.
                #[cfg(unix)]
                unsafe {
                    libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
                }
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(Error::Predictor(format!("waiting for `{command}`: {e}"))),
        }
    };
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let tail = |s: &str| {
        let s = s.trim();
        let cut = s.char_indices().rev().nth(2000).map(|(i, _)| i).unwrap_or(0);
        s[cut..].to_string()
    };
    match status {
        None => Err(Error::Predictor(format!(
            "`{command}` timed out after {:.1} s; stderr: {}",
            timeout.as_secs_f64(),
            tail(&stderr)
        ))),
        Some(s) if !s.success() => Err(Error::Predictor(format!(
            "`{command}` failed with {s}; stderr: {}; stdout: {}",
            tail(&stderr),
            tail(&stdout)
        ))),
        Some(_) => Ok(()),
    }
}

fn read_matching<T: Voxel>(path: &Path, like: &Volume<impl Voxel>) -> Result<Volume<T>> {
    let mut v: Volume<T> = read_nifti(path)?;
    if v.orientation() != like.orientation() {
        v = reorient(&v, like.orientation());
    }
    if v.dims() != like.dims() {
        return Err(Error::Predictor(format!(
            "{} has dims {:?}, expected {:?}",
            path.display(),
            v.dims(),
            like.dims()
        )));
    }
    Volume::with_grid(*like.grid(), v.into_data())
}

impl SemanticPredictor for ExternalPredictor {
    fn name(&self) -> String {
        format!("exec:{}", self.command)
    }

    fn predict_patch(&self, patch: &Volume<f32>, _origin: [usize; 3]) -> Result<PatchPrediction> {
        self.exchange(patch, |dir, id| {
            let labels = dir.join(format!("out_{id}.nii.gz"));
            if labels.exists() {
                return Ok(PatchPrediction::Labels(read_matching(&labels, patch)?));
            }
            let first = dir.join(format!("out_{id}_c0.nii.gz"));
            if !first.exists() {
                return Err(Error::Predictor(format!("`{}` wrote no output for {id}", self.command)));
            }
            let scores = (0..NUM_CLASSES)
                .map(|k| read_matching(&dir.join(format!("out_{id}_c{k}.nii.gz")), patch))
                .collect::<Result<Vec<Volume<f32>>>>()?;
            Ok(PatchPrediction::Scores(scores))
        })
    }
}

impl CutoutPredictor for ExternalPredictor {
    fn name(&self) -> String {
        format!("exec:{}", self.command)
    }

    fn predict_cutout(&self, semantic: &Volume<u16>, _cutout: &Cutout) -> Result<Volume<u8>> {
        self.exchange(semantic, |dir, id| {
            let path = dir.join(format!("out_{id}.nii.gz"));
            if !path.exists() {
                return Err(Error::Predictor(format!("`{}` wrote no output for {id}", self.command)));
            }
            let v: Volume<u16> = read_matching(&path, semantic)?;
            if let Some(x) = v.data().iter().find(|&&x| x > 3) {
                return Err(Error::Predictor(format!("cutout prediction contains label {x}")));
            }
            Ok(v.map(|x| x as u8))
        })
    }
}
