pub mod evaluate;
pub mod fuse;
pub mod phantom;
pub mod report;
pub mod segment;

use crate::usage;

/// Parses `a,b,c` into three values.
pub fn triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got `{s}`"));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| format!("cannot parse `{p}`"))?);
    }
    out.try_into().map_err(|_| unreachable!())
}

/// The explicit seed, or a fresh one that the caller must record.
pub fn resolve_seed(explicit: Option<u64>) -> u64 {
    explicit.unwrap_or_else(rand::random)
}

/// Reads a JSON config file, reporting parse errors as usage errors.
pub fn read_config(path: &std::path::Path) -> anyhow::Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}
