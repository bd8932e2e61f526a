//! File formats: MOTChallenge text records, binary PPM patches, JSON run configs and
//! CSV/SVG reports. Parsers return structured errors and never panic on bad input.

pub mod config;
pub mod mot;
pub mod ppm;
pub mod report;

use std::path::Path;

use crate::error::{Error, Result};

pub use config::{load_config, parse_config, InputSection, RunConfig, ScenarioSection};
pub use mot::{
    detection_records, detections_from_records, ground_truth_from_records, gt_records, parse_mot, track_records,
    tracking_result_from_records, write_mot, MotRecord,
};
pub use ppm::{load_patch, quantize, save_patch};
pub use report::{parse_ledger, svg_line_plot, write_ledger, write_reports, write_trace, Series};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes a file, creating its parent directories.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
