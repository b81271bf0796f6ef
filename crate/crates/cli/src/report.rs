//! Report rendering and replay. A report is plain text: an echoed config
//! line, a delimited result section, and a wall-clock footer. Only the
//! result section is covered by the replay guarantee; the footer is not.

use crate::RunConfig;
use listlab::error::{Error, Result};
use std::path::Path;
use std::time::Duration;

pub const RESULTS_BEGIN: &str = "== results ==";
pub const RESULTS_END: &str = "== end results ==";

pub fn render(config: &RunConfig, result_section: &str, elapsed: Duration) -> String {
    let config_json = serde_json::to_string(config).expect("config serialization");
    let mut out = String::new();
    out.push_str("# listlab run report\n");
    out.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("config = {config_json}\n"));
    out.push_str(RESULTS_BEGIN);
    out.push('\n');
    out.push_str(result_section);
    if !result_section.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(RESULTS_END);
    out.push('\n');
    out.push_str(&format!("wall_clock_ms = {}\n", elapsed.as_millis()));
    out
}

/// Accepts a full report (the `config =` line is extracted) or a bare
/// config JSON document.
pub fn config_from_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let json = text
        .lines()
        .find_map(|l| l.strip_prefix("config = "))
        .unwrap_or(text.trim());
    serde_json::from_str(json).map_err(|e| Error::Parse {
        line: e.line(),
        col: e.column(),
        msg: format!("config: {e}"),
    })
}

/// The replay-covered slice of a report.
#[cfg(test)]
pub fn result_section(report: &str) -> Option<&str> {
    let start = report.find(RESULTS_BEGIN)?;
    let end = report.find(RESULTS_END)?;
    Some(&report[start..end + RESULTS_END.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DimArgs;
    use std::time::Duration;

    #[test]
    fn rendered_reports_round_trip_their_config() {
        let config = RunConfig::Dim(DimArgs {
            class_file: "c.json".into(),
            kind: "littlestone".into(),
            k: 2,
            budget: None,
        });
        let text = render(&config, "value = 1\n", Duration::from_millis(3));
        let section = result_section(&text).unwrap();
        assert!(section.starts_with(RESULTS_BEGIN));
        assert!(section.ends_with(RESULTS_END));
        assert!(section.contains("value = 1"));

        let dir = std::env::temp_dir().join("listlab-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("report.txt");
        std::fs::write(&path, &text).unwrap();
        let back = config_from_file(&path).unwrap();
        let again = render(&back, "value = 1\n", Duration::from_millis(99));
        assert_eq!(result_section(&again), Some(section));
    }
}
