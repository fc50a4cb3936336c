//! Lightweight suffix stripping, enabled per protocol.

/// Strips one common English inflectional suffix.
pub fn stem(word: &str) -> String {
    let n = word.chars().count();
    if !word.is_ascii() || n < 4 {
        return word.to_string();
    }
    if n >= 5 && word.ends_with("ies") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if word.ends_with("sses") {
        return word[..word.len() - 2].to_string();
    }
    if n >= 6 && word.ends_with("ing") {
        return word[..word.len() - 3].to_string();
    }
    if n >= 5 && word.ends_with("ed") {
        return word[..word.len() - 2].to_string();
    }
    if word.ends_with('s') && !(word.ends_with("ss") || word.ends_with("us") || word.ends_with("is")) {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}
