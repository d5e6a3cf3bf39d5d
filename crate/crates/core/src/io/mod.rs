//! On-disk formats: rasters, `key = value` configs, dataset trees, model
//! and likelihood CSVs, and input manifests. Every write goes through a
//! temporary file and a rename so readers never see partial output.

mod dataset;
pub mod kv;
mod raster;

pub use dataset::{
    class_likelihood_csv, frame_stem, parse_class_likelihood, parse_pu_classifier, parse_softmax,
    parse_trav_likelihood, poses_csv, pu_classifier_csv, read_csv_model, read_masks, read_predictions, read_split,
    softmax_csv, trav_likelihood_csv, write_masks, write_predictions, write_split, SplitOnDisk,
};
pub use kv::{load_pipeline_config, load_scenario, pipeline_config_text, scenario_text, KvFile};
pub use raster::{read_raster, write_raster, Raster, RasterData, HEADER_LEN, MAGIC, VERSION};

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reads a file, mapping a missing path to [`Error::MissingInput`].
pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    match fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingInput(path.to_path_buf())),
        Err(e) => Err(e.into()),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_input(path)?).map_err(|_| Error::parse(path, "not UTF-8"))
}

/// Writes via a sibling temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hashes of the inputs a command read, keyed by a stable label rather than
/// an absolute path so that manifests compare across directories.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn add_bytes(&mut self, label: impl Into<String>, bytes: &[u8]) {
        self.entries.push((label.into(), sha256_hex(bytes)));
    }

    pub fn add_file(&mut self, label: impl Into<String>, path: &Path) -> Result<()> {
        let bytes = read_input(path)?;
        self.add_bytes(label, &bytes);
        Ok(())
    }

    /// Adds every regular file under `dir`, labeled `prefix/relative/path`.
    pub fn add_tree(&mut self, prefix: &str, dir: &Path) -> Result<()> {
        if !dir.is_dir() {
            return Err(Error::MissingInput(dir.to_path_buf()));
        }
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let rel = p.strip_prefix(dir).unwrap_or(&p);
                    let label = format!("{prefix}/{}", rel.to_string_lossy().replace('\\', "/"));
                    self.add_file(label, &p)?;
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sha256  label` lines sorted by label.
    pub fn to_text(&self) -> String {
        let mut e = self.entries.clone();
        e.sort();
        e.iter().map(|(l, h)| format!("{h}  {l}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_creates_dirs_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/out.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn missing_input_is_reported() {
        assert!(matches!(read_input(Path::new("/nonexistent/x")), Err(Error::MissingInput(_))));
    }

    #[test]
    fn manifest_is_order_independent() {
        let dir = tempfile::tempdir().unwrap();
        atomic_write(&dir.path().join("x/1.txt"), b"a").unwrap();
        atomic_write(&dir.path().join("2.txt"), b"b").unwrap();
        let mut m = Manifest::default();
        m.add_tree("in", dir.path()).unwrap();
        let mut n = Manifest::default();
        n.add_bytes("in/x/1.txt", b"a");
        n.add_bytes("in/2.txt", b"b");
        assert_eq!(m.to_text(), n.to_text());
        assert!(m.to_text().starts_with(&sha256_hex(b"b")));
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
