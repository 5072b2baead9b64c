pub mod decay;
pub mod dlt;
pub mod eval;
pub mod serve;
pub mod stimuli;
pub mod storage;
pub mod verify;

use std::path::{Path, PathBuf};

use crate::manifest::OutputSink;

pub(crate) fn sink(path: Option<&Path>) -> OutputSink {
    OutputSink(path.map(|p| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())))
}

pub(crate) fn abs(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}
