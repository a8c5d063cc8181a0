//! Source tree collection.

use std::fs;
use std::path::{Path, PathBuf};

use cca_core::SourceFile;

use crate::Error;

#[derive(Debug, Clone, Default)]
pub struct SourceSet {
    /// `file_id` equals the position in this list.
    pub files: Vec<SourceFile>,
    pub warnings: Vec<String>,
    pub total_bytes: u64,
}

fn is_php(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("php"))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), Error> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else if is_php(&p) {
            out.push(p);
        }
    }
    Ok(())
}

/// Every `.php` file under `root` (or `root` itself), in sorted path order.
/// Paths are recorded relative to `root`; files that are not UTF-8 are
/// skipped with a warning.
pub fn collect_sources(root: &Path) -> Result<SourceSet, Error> {
    let mut paths = Vec::new();
    let base = if root.is_file() {
        paths.push(root.to_path_buf());
        root.parent().unwrap_or(Path::new("")).to_path_buf()
    } else if root.is_dir() {
        walk(root, &mut paths)?;
        root.to_path_buf()
    } else {
        return Err(Error::Usage(format!("{}: no such file or directory", root.display())));
    };
    let mut set = SourceSet::default();
    for p in paths {
        let rel = p.strip_prefix(&base).unwrap_or(&p);
        let name = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        match String::from_utf8(bytes) {
            Ok(text) => {
                set.total_bytes += text.len() as u64;
                let id = set.files.len() as u32;
                set.files.push(SourceFile::new(&name, &text, id));
            }
            Err(_) => set.warnings.push(format!("{name}: not valid UTF-8, skipped")),
        }
    }
    if set.files.is_empty() {
        set.warnings.push(format!("{}: no PHP sources found", root.display()));
    }
    Ok(set)
}
