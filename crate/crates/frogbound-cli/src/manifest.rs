//! Run manifests and deterministic serialization helpers.
//!
//! Every output file is paired with `<out>.manifest.json` recording the tool
//! version, the fully resolved configuration, and the root seed. Data files
//! are byte-identical across re-runs with the same seed; the manifest is too,
//! except for its `wall_clock_seconds` field. `frogbound replay --manifest`
//! re-executes the recorded command.

use std::fs;
use std::io::Write;
use std::path::Path;

/// Format a float with 17 significant digits (exact f64 round-trip).
pub fn ff(x: f64) -> String {
    if x.is_finite() {
        // +0.0 and -0.0 must render identically.
        let x = if x == 0.0 { 0.0 } else { x };
        format!("{:.16e}", x)
    } else {
        "null".to_string()
    }
}

/// JSON string escaping for the hand-rendered outputs.
pub fn json_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn json_opt_num(x: Option<f64>) -> String {
    match x {
        Some(v) => ff(v),
        None => "null".to_string(),
    }
}

pub fn json_opt_str(s: &Option<String>) -> String {
    match s {
        Some(v) => json_str(v),
        None => "null".to_string(),
    }
}

/// Write a manifest next to `out_path`.
pub fn write_manifest(
    out_path: &str,
    command: &str,
    config_json: &str,
    root_seed: u64,
    wall_clock_seconds: f64,
) -> std::io::Result<()> {
    let manifest_path = format!("{out_path}.manifest.json");
    let body = format!(
        "{{\n  \"tool\": \"frogbound\",\n  \"version\": {},\n  \"command\": {},\n  \"config\": {},\n  \"root_seed\": {},\n  \"wall_clock_seconds\": {},\n  \"outputs\": [{}]\n}}\n",
        json_str(env!("CARGO_PKG_VERSION")),
        json_str(command),
        config_json,
        root_seed,
        ff(wall_clock_seconds),
        json_str(out_path),
    );
    fs::write(manifest_path, body)
}

/// Buffered writer for a data file, creating parent directories.
pub fn open_out(path: &str) -> std::io::Result<std::io::BufWriter<fs::File>> {
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

pub fn write_text(path: &str, body: &str) -> std::io::Result<()> {
    let mut w = open_out(path)?;
    w.write_all(body.as_bytes())?;
    w.flush()
}
