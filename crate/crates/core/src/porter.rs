//! Classic Porter suffix-stripping stemmer (the 1980 rule tables).
//!
//! Operates on lowercase words. Words of length <= 2 are returned unchanged.
//! Within each rule block the longest matching suffix wins; if its condition
//! fails no shorter suffix is tried.

fn is_consonant(word: &[u8], i: usize) -> bool {
    match word[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(word, i - 1),
        _ => true,
    }
}

/// The measure m of a stem: the number of VC sequences in [C](VC)^m[V].
fn measure(stem: &[u8]) -> usize {
    let n = stem.len();
    let mut i = 0;
    while i < n && is_consonant(stem, i) {
        i += 1;
    }
    let mut m = 0;
    loop {
        while i < n && !is_consonant(stem, i) {
            i += 1;
        }
        if i == n {
            return m;
        }
        while i < n && is_consonant(stem, i) {
            i += 1;
        }
        m += 1;
    }
}

fn has_vowel(stem: &[u8]) -> bool {
    (0..stem.len()).any(|i| !is_consonant(stem, i))
}

fn ends_double_consonant(word: &[u8]) -> bool {
    let n = word.len();
    n >= 2 && word[n - 1] == word[n - 2] && is_consonant(word, n - 1)
}

/// *o: stem ends consonant-vowel-consonant where the final consonant is not w, x or y.
fn ends_cvc(word: &[u8]) -> bool {
    let n = word.len();
    n >= 3
        && is_consonant(word, n - 3)
        && !is_consonant(word, n - 2)
        && is_consonant(word, n - 1)
        && !matches!(word[n - 1], b'w' | b'x' | b'y')
}

fn ends_with(word: &[u8], suffix: &str) -> bool {
    word.len() >= suffix.len() && &word[word.len() - suffix.len()..] == suffix.as_bytes()
}

/// Longest matching suffix from `rules` wins; the rewrite fires only when
/// `cond` holds for the stem.
fn apply_rules(word: &mut Vec<u8>, rules: &[(&str, &str)], cond: impl Fn(&[u8]) -> bool) {
    let mut best: Option<(&str, &str)> = None;
    for &(suffix, replacement) in rules {
        if ends_with(word, suffix) && best.is_none_or(|(s, _)| suffix.len() > s.len()) {
            best = Some((suffix, replacement));
        }
    }
    if let Some((suffix, replacement)) = best {
        let stem_len = word.len() - suffix.len();
        if cond(&word[..stem_len]) {
            word.truncate(stem_len);
            word.extend_from_slice(replacement.as_bytes());
        }
    }
}

fn step1a(word: &mut Vec<u8>) {
    apply_rules(
        word,
        &[("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")],
        |_| true,
    );
}

fn step1b(word: &mut Vec<u8>) {
    if ends_with(word, "eed") {
        if measure(&word[..word.len() - 3]) > 0 {
            word.pop();
        }
        return;
    }
    let stripped = if ends_with(word, "ed") && has_vowel(&word[..word.len() - 2]) {
        word.truncate(word.len() - 2);
        true
    } else if ends_with(word, "ing") && has_vowel(&word[..word.len() - 3]) {
        word.truncate(word.len() - 3);
        true
    } else {
        false
    };
    if stripped {
        if ends_with(word, "at") || ends_with(word, "bl") || ends_with(word, "iz") {
            word.push(b'e');
        } else if ends_double_consonant(word) && !matches!(word[word.len() - 1], b'l' | b's' | b'z')
        {
            word.pop();
        } else if measure(word) == 1 && ends_cvc(word) {
            word.push(b'e');
        }
    }
}

fn step1c(word: &mut [u8]) {
    if ends_with(word, "y") && has_vowel(&word[..word.len() - 1]) {
        let n = word.len();
        word[n - 1] = b'i';
    }
}

const STEP2: &[(&str, &str)] = &[
    ("ational", "ate"),
    ("tional", "tion"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("izer", "ize"),
    ("abli", "able"),
    ("alli", "al"),
    ("entli", "ent"),
    ("eli", "e"),
    ("ousli", "ous"),
    ("ization", "ize"),
    ("ation", "ate"),
    ("ator", "ate"),
    ("alism", "al"),
    ("iveness", "ive"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("aliti", "al"),
    ("iviti", "ive"),
    ("biliti", "ble"),
];

const STEP3: &[(&str, &str)] = &[
    ("icate", "ic"),
    ("ative", ""),
    ("alize", "al"),
    ("iciti", "ic"),
    ("ical", "ic"),
    ("ful", ""),
    ("ness", ""),
];

const STEP4: &[&str] = &[
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou",
    "ism", "ate", "iti", "ous", "ive", "ize",
];

fn step4(word: &mut Vec<u8>) {
    let mut best: Option<&str> = None;
    for &suffix in STEP4 {
        if ends_with(word, suffix) && best.is_none_or(|s| suffix.len() > s.len()) {
            best = Some(suffix);
        }
    }
    if let Some(suffix) = best {
        let stem_len = word.len() - suffix.len();
        let stem = &word[..stem_len];
        if suffix == "ion" && !(stem.ends_with(b"s") || stem.ends_with(b"t")) {
            return;
        }
        if measure(stem) > 1 {
            word.truncate(stem_len);
        }
    }
}

fn step5a(word: &mut Vec<u8>) {
    if ends_with(word, "e") {
        let stem = &word[..word.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            word.pop();
        }
    }
}

fn step5b(word: &mut Vec<u8>) {
    if measure(word) > 1 && ends_double_consonant(word) && word[word.len() - 1] == b'l' {
        word.pop();
    }
}

/// Stem one lowercase word.
pub fn stem(word: &str) -> String {
    if word.len() <= 2 || !word.is_ascii() {
        return word.to_string();
    }
    let mut w = word.as_bytes().to_vec();
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    apply_rules(&mut w, STEP2, |stem| measure(stem) > 0);
    apply_rules(&mut w, STEP3, |stem| measure(stem) > 0);
    step4(&mut w);
    step5a(&mut w);
    step5b(&mut w);
    String::from_utf8(w).expect("stemming preserves ascii")
}
