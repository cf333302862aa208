/// Three significant figures, keeping trailing zeros: `1.05`, `0.983`,
/// `-4.12`, `0.0406`.
pub fn format_sig3(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00".into();
    }
    let decimals = |v: f64| (2 - v.abs().log10().floor() as i32).max(0) as usize;
    let mut d = decimals(x);
    let mut s = format!("{x:.d$}");
    // rounding can carry into a new leading digit (9.996 -> 10.00)
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded != 0.0 && decimals(rounded) < d {
        d = decimals(rounded);
        s = format!("{x:.d$}");
    }
    if s.starts_with("-") && s[1..].chars().all(|c| c == '0' || c == '.') {
        s.remove(0);
    }
    s
}

/// `estimate [lower, upper]`.
pub fn format_cell(mean: f64, lower: f64, upper: f64) -> String {
    format!("{} [{}, {}]", format_sig3(mean), format_sig3(lower), format_sig3(upper))
}
