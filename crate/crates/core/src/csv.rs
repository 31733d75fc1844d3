//! Tiny CSV helpers shared by the trajectory, sheet and ray serializers.
//!
//! Floats are written with Rust's default `Display` for `f64`, which picks
//! the shortest decimal string that round-trips to the same bits, so
//! re-serializing a parsed file is lossless and reruns are byte-identical.

/// Shortest round-trip decimal form of a float; negative zero is folded
/// into plain zero.
pub fn float(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

/// Append one comma-separated row terminated by a newline.
pub fn push_row<I, S>(buf: &mut String, fields: I)
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut first = true;
    for field in fields {
        if !first {
            buf.push(',');
        }
        buf.push_str(field.as_ref());
        first = false;
    }
    buf.push('\n');
}

/// Column labels `prefix1..prefixn`.
pub fn indexed_labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}
