//! Bundled English stopword list.

pub const ENGLISH: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "almost", "also", "am", "an",
    "and", "any", "are", "aren", "around", "as", "at", "be", "because", "been", "before",
    "being", "below", "between", "both", "but", "by", "can", "cannot", "could", "couldn", "did",
    "didn", "do", "does", "doesn", "doing", "don", "done", "down", "during", "each", "either",
    "else", "enough", "etc", "even", "ever", "every", "few", "for", "from", "further", "get",
    "gets", "getting", "got", "had", "hadn", "has", "hasn", "have", "haven", "having", "he",
    "her", "here", "hers", "herself", "him", "himself", "his", "how", "however", "i", "if",
    "in", "into", "is", "isn", "it", "its", "itself", "just", "let", "like", "ll", "may", "me",
    "might", "mine", "more", "most", "much", "must", "mustn", "my", "myself", "neither", "no",
    "nor", "not", "now", "of", "off", "often", "on", "once", "one", "only", "or", "other",
    "others", "our", "ours", "ourselves", "out", "over", "own", "per", "quite", "rather", "re",
    "really", "same", "say", "says", "she", "should", "shouldn", "since", "so", "some", "still",
    "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "though", "through", "thus", "to", "too", "under",
    "until", "up", "upon", "us", "use", "used", "using", "ve", "very", "via", "was", "wasn",
    "way", "we", "well", "were", "weren", "what", "when", "where", "whether", "which", "while",
    "who", "whom", "whose", "why", "will", "with", "within", "without", "won", "would",
    "wouldn", "yes", "yet", "you", "your", "yours", "yourself", "yourselves", "many", "another",
    "make", "made",
];

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn two_hundred_unique_lowercase_words() {
        let set: HashSet<_> = ENGLISH.iter().collect();
        assert_eq!(set.len(), ENGLISH.len());
        assert_eq!(ENGLISH.len(), 200);
        assert!(ENGLISH.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
    }
}
