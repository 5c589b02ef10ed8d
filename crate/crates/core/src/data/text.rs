//! Number formatting for the delimited text formats.

/// Formats `v` with 9 significant digits. Plain decimal notation is used for
/// exponents in `-5..9`, scientific notation otherwise. The exponent is taken
/// after rounding, so reformatting a parsed value reproduces the same text.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.8e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}
