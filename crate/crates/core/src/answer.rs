//! Answer canonicalization.

/// Canonical form used for voting and grading: surrounding whitespace
/// trimmed, case folded, and a zero fractional part dropped from plain
/// decimal numbers (`"12.0"` and `"12.00"` become `"12"`).
pub fn canonicalize(answer: &str) -> String {
    let folded = answer.trim().to_lowercase();
    if let Some((int, frac)) = folded.split_once('.') {
        let digits = int.strip_prefix('-').unwrap_or(int);
        let is_numeric = !digits.is_empty()
            && digits.bytes().all(|b| b.is_ascii_digit())
            && !frac.is_empty()
            && frac.bytes().all(|b| b.is_ascii_digit());
        if is_numeric && frac.bytes().all(|b| b == b'0') {
            return int.to_owned();
        }
    }
    folded
}

#[cfg(test)]
mod tests {
    use super::canonicalize;

    #[test]
    fn surface_variants_collapse() {
        assert_eq!(canonicalize("  12 "), "12");
        assert_eq!(canonicalize("12.0"), "12");
        assert_eq!(canonicalize("-3.00"), "-3");
        assert_eq!(canonicalize("Yes"), "yes");
        assert_eq!(canonicalize("\tB\n"), "b");
    }

    #[test]
    fn meaningful_decimals_are_kept() {
        assert_eq!(canonicalize("12.5"), "12.5");
        assert_eq!(canonicalize("12.50"), "12.50");
        assert_eq!(canonicalize("1.0.0"), "1.0.0");
        assert_eq!(canonicalize(".0"), ".0");
        assert_eq!(canonicalize("x.0"), "x.0");
    }

    #[test]
    fn idempotent() {
        for s in ["12.0", " A ", "3.14", "-0.0", "abc"] {
            let once = canonicalize(s);
            assert_eq!(canonicalize(&once), once);
        }
    }
}
