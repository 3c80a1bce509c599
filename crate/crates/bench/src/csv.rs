use std::time::{SystemTime, UNIX_EPOCH};

use crate::scenario::Scenario;

/// Decimal rendering with 9 significant digits; `nan`/`inf` pass through.
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    // exponent after rounding to 9 digits
    let sci = format!("{x:.8e}");
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// `#` comment lines recording the command and every scenario value.
/// The timestamp line is omitted when `deterministic`.
pub fn metadata_header(command: &str, sc: &Scenario, deterministic: bool) -> String {
    let mut out = format!("# densebf {command}\n");
    if !deterministic {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        out.push_str(&format!("# generated_unix={secs}\n"));
    }
    for line in sc.render().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}
