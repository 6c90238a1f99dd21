//! Byte-pair-encoding subword tokenizer with a shared vocabulary.
//!
//! Pre-tokenization is whitespace-based with `\n` kept as an explicit
//! standalone symbol (line boundaries carry meaning downstream). Each
//! word gets a trailing end-of-word symbol `</w>` so decoding can
//! rebuild word boundaries by plain whitespace joining. Special tokens
//! occupy the lowest ids; `[CLS]` and `<sep>` are recognized as atomic
//! words during encoding.

use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

pub const END_OF_WORD: &str = "</w>";
pub const NEWLINE_SYM: &str = "\n";
pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";
pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "<sep>";

/// Languages registered by default, mirroring the multilingual corpus.
pub const DEFAULT_LANGUAGES: [&str; 5] = ["java", "python", "javascript", "csharp", "cpp"];

const FILE_HEADER: &str = "patchnote-bpe v1";

#[derive(Debug, Clone)]
pub struct Specials {
    pub pad: u32,
    pub bos: u32,
    pub eos: u32,
    pub unk: u32,
    pub cls: u32,
    pub sep: u32,
    /// language name (e.g. "java") → tag token id for "<java>"
    pub languages: BTreeMap<String, u32>,
}

#[derive(Debug, Clone)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    vocab: BTreeMap<String, u32>,
    tokens: Vec<String>,
    pub specials: Specials,
    merge_rank: HashMap<(String, String), u32>,
    special_count: u32,
    alphabet_len: usize,
}

enum Pretoken {
    Word(String),
    Newline,
}

fn pretokenize(text: &str) -> Vec<Pretoken> {
    let mut out = Vec::new();
    let mut lines = text.split('\n').peekable();
    while let Some(line) = lines.next() {
        for word in line.split_whitespace() {
            out.push(Pretoken::Word(word.to_string()));
        }
        if lines.peek().is_some() {
            out.push(Pretoken::Newline);
        }
    }
    out
}

fn word_symbols(word: &str) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
    symbols.push(END_OF_WORD.to_string());
    symbols
}

/// Merge every left-to-right occurrence of `pair` in `symbols`.
fn apply_merge(symbols: &mut Vec<String>, pair: &(String, String)) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            let joined = format!("{}{}", symbols[i], symbols[i + 1]);
            symbols[i] = joined;
            symbols.remove(i + 1);
        } else {
            i += 1;
        }
    }
}

/// Learn a BPE model. Merge selection is deterministic: highest pair
/// frequency wins, ties broken by lexicographically smallest pair.
/// Candidate pairs whose concatenation collides with an existing token
/// are never merged, which keeps vocabulary growth exactly one token
/// per merge.
pub fn learn_bpe(corpus: &[String], num_merges: usize, languages: &[String]) -> Result<BpeModel> {
    if corpus.is_empty() {
        return Err(Error::Input("cannot learn BPE from an empty corpus".into()));
    }

    let mut word_freq: BTreeMap<String, u64> = BTreeMap::new();
    let mut alphabet: BTreeSet<String> = BTreeSet::new();
    let mut saw_newline = false;
    for text in corpus {
        for pre in pretokenize(text) {
            match pre {
                Pretoken::Word(w) => {
                    for c in w.chars() {
                        alphabet.insert(c.to_string());
                    }
                    *word_freq.entry(w).or_insert(0) += 1;
                }
                Pretoken::Newline => saw_newline = true,
            }
        }
    }
    if word_freq.is_empty() {
        return Err(Error::Input("corpus contains no tokens to learn from".into()));
    }
    alphabet.insert(END_OF_WORD.to_string());
    if saw_newline {
        alphabet.insert(NEWLINE_SYM.to_string());
    }

    // id space: specials, then alphabet (sorted), then merge outputs.
    let mut tokens: Vec<String> = Vec::new();
    for t in [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN] {
        tokens.push(t.to_string());
    }
    let mut language_ids = BTreeMap::new();
    for lang in languages {
        language_ids.insert(lang.clone(), tokens.len() as u32);
        tokens.push(format!("<{lang}>"));
    }
    let special_count = tokens.len() as u32;
    for sym in &alphabet {
        tokens.push(sym.clone());
    }

    let mut vocab: BTreeMap<String, u32> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    if vocab.len() != tokens.len() {
        return Err(Error::Contract("special token collides with alphabet symbol".into()));
    }

    let mut words: Vec<(Vec<String>, u64)> = word_freq
        .into_iter()
        .map(|(w, f)| (word_symbols(&w), f))
        .collect();

    let mut merges: Vec<(String, String)> = Vec::new();
    for _ in 0..num_merges {
        let mut pair_counts: HashMap<(String, String), u64> = HashMap::new();
        for (symbols, freq) in &words {
            for window in symbols.windows(2) {
                *pair_counts
                    .entry((window[0].clone(), window[1].clone()))
                    .or_insert(0) += freq;
            }
        }
        let mut best: Option<((String, String), u64)> = None;
        for (pair, count) in pair_counts {
            let joined = format!("{}{}", pair.0, pair.1);
            if vocab.contains_key(&joined) {
                continue; // collision: merging would not add a new token
            }
            best = match best {
                None => Some((pair, count)),
                Some((bp, bc)) => {
                    if count > bc || (count == bc && pair < bp) {
                        Some((pair, count))
                    } else {
                        Some((bp, bc))
                    }
                }
            };
        }
        let Some((pair, _)) = best else {
            break; // corpus exhausted
        };
        let joined = format!("{}{}", pair.0, pair.1);
        vocab.insert(joined.clone(), tokens.len() as u32);
        tokens.push(joined);
        for (symbols, _) in words.iter_mut() {
            apply_merge(symbols, &pair);
        }
        merges.push(pair);
    }

    let merge_rank = merges
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i as u32))
        .collect();
    Ok(BpeModel {
        merges,
        vocab,
        tokens,
        specials: Specials {
            pad: 0,
            bos: 1,
            eos: 2,
            unk: 3,
            cls: 4,
            sep: 5,
            languages: language_ids,
        },
        merge_rank,
        special_count,
        alphabet_len: alphabet.len(),
    })
}

impl BpeModel {
    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    pub fn alphabet_len(&self) -> usize {
        self.alphabet_len
    }

    pub fn special_count(&self) -> u32 {
        self.special_count
    }

    pub fn is_special(&self, id: u32) -> bool {
        id < self.special_count
    }

    pub fn token_text(&self, id: u32) -> Result<&str> {
        self.tokens
            .get(id as usize)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Index(format!("token id {id} out of vocabulary ({})", self.tokens.len())))
    }

    pub fn language_tag(&self, language: &str) -> Result<u32> {
        self.specials
            .languages
            .get(language)
            .copied()
            .ok_or_else(|| Error::Input(format!("unknown language tag: {language}")))
    }

    fn encode_word(&self, word: &str, out: &mut Vec<u32>) {
        // [CLS] and <sep> are structural and must stay atomic.
        if word == CLS_TOKEN {
            out.push(self.specials.cls);
            return;
        }
        if word == SEP_TOKEN {
            out.push(self.specials.sep);
            return;
        }
        let mut symbols = word_symbols(word);
        // Repeatedly apply the present pair with the lowest merge rank;
        // equivalent to replaying the merge list in learned order.
        loop {
            let mut best: Option<(u32, usize)> = None;
            for i in 0..symbols.len() - 1 {
                if let Some(&rank) = self
                    .merge_rank
                    .get(&(symbols[i].clone(), symbols[i + 1].clone()))
                {
                    if best.map_or(true, |(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((rank, _)) = best else { break };
            let pair = self.merges[rank as usize].clone();
            apply_merge(&mut symbols, &pair);
        }
        for sym in symbols {
            match self.vocab.get(&sym) {
                Some(&id) => out.push(id),
                None => out.push(self.specials.unk),
            }
        }
    }

    /// Encode text into token ids. With a language, the sequence starts
    /// with that language's tag id; the rest is unchanged.
    pub fn encode(&self, text: &str, language: Option<&str>) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        if let Some(lang) = language {
            out.push(self.language_tag(lang)?);
        }
        for pre in pretokenize(text) {
            match pre {
                Pretoken::Word(w) => self.encode_word(&w, &mut out),
                Pretoken::Newline => match self.vocab.get(NEWLINE_SYM) {
                    Some(&id) => out.push(id),
                    None => out.push(self.specials.unk),
                },
            }
        }
        Ok(out)
    }

    /// Decode ids back into text. Specials are dropped except `[CLS]`,
    /// which carries line structure and is kept as a word. Words are
    /// joined by single spaces; newline symbols bind without spaces.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        let mut word = String::new();
        let mut needs_space = false;

        fn flush(word: &mut String, out: &mut String, needs_space: &mut bool) {
            if word.is_empty() {
                return;
            }
            if *needs_space {
                out.push(' ');
            }
            out.push_str(word);
            word.clear();
            *needs_space = true;
        }

        for &id in ids {
            let token = self.token_text(id)?.to_string();
            if self.is_special(id) {
                if token == CLS_TOKEN {
                    flush(&mut word, &mut out, &mut needs_space);
                    if needs_space {
                        out.push(' ');
                    }
                    out.push_str(CLS_TOKEN);
                    needs_space = true;
                }
                continue;
            }
            if token == NEWLINE_SYM {
                flush(&mut word, &mut out, &mut needs_space);
                out.push('\n');
                needs_space = false;
                continue;
            }
            if let Some(stripped) = token.strip_suffix(END_OF_WORD) {
                word.push_str(stripped);
                flush(&mut word, &mut out, &mut needs_space);
            } else if token == END_OF_WORD {
                flush(&mut word, &mut out, &mut needs_space);
            } else {
                word.push_str(&token);
            }
        }
        flush(&mut word, &mut out, &mut needs_space);
        Ok(out)
    }

    fn escape(s: &str) -> String {
        s.replace('\\', "\\\\").replace('\n', "\\n").replace('\t', "\\t")
    }

    fn unescape(s: &str) -> String {
        let mut out = String::new();
        let mut chars = s.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                match chars.next() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('\\') => out.push('\\'),
                    Some(other) => {
                        out.push('\\');
                        out.push(other);
                    }
                    None => out.push('\\'),
                }
            } else {
                out.push(c);
            }
        }
        out
    }

    /// Plain-text model file: header, specials block, ordered merges,
    /// and the full vocabulary map.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = String::new();
        buf.push_str(FILE_HEADER);
        buf.push('\n');
        let langs: Vec<&str> = self.specials.languages.keys().map(|s| s.as_str()).collect();
        buf.push_str(&format!("languages\t{}\n", langs.join(",")));
        buf.push_str(&format!("alphabet_len\t{}\n", self.alphabet_len));
        buf.push_str("[specials]\n");
        for id in 0..self.special_count {
            buf.push_str(&format!("{}\t{}\n", Self::escape(&self.tokens[id as usize]), id));
        }
        buf.push_str("[merges]\n");
        for (a, b) in &self.merges {
            buf.push_str(&format!("{}\t{}\n", Self::escape(a), Self::escape(b)));
        }
        buf.push_str("[vocab]\n");
        for (id, token) in self.tokens.iter().enumerate() {
            buf.push_str(&format!("{}\t{}\n", Self::escape(token), id));
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some(FILE_HEADER) {
            return Err(Error::Input(format!("{}: not a patchnote BPE model file", path.display())));
        }
        let mut languages: Vec<String> = Vec::new();
        let mut alphabet_len = 0usize;
        let mut section = String::new();
        let mut merges: Vec<(String, String)> = Vec::new();
        let mut vocab_entries: Vec<(String, u32)> = Vec::new();
        let mut special_entries: Vec<(String, u32)> = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') && !line.contains('\t') {
                section = line.to_string();
                continue;
            }
            let mut parts = line.split('\t');
            match section.as_str() {
                "" => {
                    let key = parts.next().unwrap_or("");
                    let value = parts.next().unwrap_or("");
                    match key {
                        "languages" => {
                            languages = value
                                .split(',')
                                .filter(|s| !s.is_empty())
                                .map(|s| s.to_string())
                                .collect();
                        }
                        "alphabet_len" => {
                            alphabet_len = value
                                .parse()
                                .map_err(|_| Error::Input(format!("{}: bad alphabet_len", path.display())))?;
                        }
                        _ => {}
                    }
                }
                "[specials]" => {
                    let token = Self::unescape(parts.next().unwrap_or(""));
                    let id: u32 = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Input(format!("{}: bad specials line", path.display())))?;
                    special_entries.push((token, id));
                }
                "[merges]" => {
                    let a = Self::unescape(parts.next().unwrap_or(""));
                    let b = Self::unescape(
                        parts
                            .next()
                            .ok_or_else(|| Error::Input(format!("{}: bad merge line", path.display())))?,
                    );
                    merges.push((a, b));
                }
                "[vocab]" => {
                    let token = Self::unescape(parts.next().unwrap_or(""));
                    let id: u32 = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Input(format!("{}: bad vocab line", path.display())))?;
                    vocab_entries.push((token, id));
                }
                _ => return Err(Error::Input(format!("{}: unknown section {section}", path.display()))),
            }
        }

        vocab_entries.sort_by_key(|(_, id)| *id);
        let tokens: Vec<String> = vocab_entries.iter().map(|(t, _)| t.clone()).collect();
        if tokens.is_empty() {
            return Err(Error::Input(format!("{}: empty vocabulary", path.display())));
        }
        for (i, (_, id)) in vocab_entries.iter().enumerate() {
            if *id != i as u32 {
                return Err(Error::Input(format!("{}: vocabulary ids are not contiguous", path.display())));
            }
        }
        let special_count = special_entries.len() as u32;
        let mut language_ids = BTreeMap::new();
        for lang in &languages {
            let tag = format!("<{lang}>");
            let id = special_entries
                .iter()
                .find(|(t, _)| *t == tag)
                .map(|(_, id)| *id)
                .ok_or_else(|| Error::Input(format!("{}: language {lang} missing from specials", path.display())))?;
            language_ids.insert(lang.clone(), id);
        }

        let vocab: BTreeMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        // Closure check: replaying the merges over specials+alphabet must
        // reproduce the stored vocabulary exactly.
        if (special_count as usize + alphabet_len + merges.len()) != tokens.len() {
            return Err(Error::Input(format!(
                "{}: vocabulary size does not match specials+alphabet+merges",
                path.display()
            )));
        }
        let mut derived: Vec<String> = tokens[..special_count as usize + alphabet_len].to_vec();
        for (a, b) in &merges {
            derived.push(format!("{a}{b}"));
        }
        if derived != tokens {
            return Err(Error::Input(format!(
                "{}: merges do not reproduce the stored vocabulary",
                path.display()
            )));
        }

        let merge_rank = merges
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();
        Ok(BpeModel {
            merges,
            vocab,
            tokens,
            specials: Specials {
                pad: 0,
                bos: 1,
                eos: 2,
                unk: 3,
                cls: 4,
                sep: 5,
                languages: language_ids,
            },
            merge_rank,
            special_count,
            alphabet_len,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn owned(texts: &[&str]) -> Vec<String> {
        texts.iter().map(|s| s.to_string()).collect()
    }

    fn default_langs() -> Vec<String> {
        DEFAULT_LANGUAGES.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn first_merge_on_repeated_pairs() {
        // Exhaustive pair count over "aaab" twice: (a,a)=4, (a,b)=2, (b,</w>)=2.
        let model = learn_bpe(&owned(&["aaab", "aaab"]), 1, &default_langs()).unwrap();
        assert_eq!(model.merges, vec![("a".to_string(), "a".to_string())]);
    }

    #[test]
    fn zero_merges_gives_character_vocab() {
        let model = learn_bpe(&owned(&["ab ba"]), 0, &default_langs()).unwrap();
        assert_eq!(model.num_merges(), 0);
        // alphabet = {a, b, </w>}
        assert_eq!(model.vocab_size(), model.special_count() as usize + 3);
    }

    #[test]
    fn learning_is_order_invariant() {
        let a = learn_bpe(&owned(&["x yz", "zz xy", "yy"]), 5, &default_langs()).unwrap();
        let b = learn_bpe(&owned(&["yy", "zz xy", "x yz"]), 5, &default_langs()).unwrap();
        assert_eq!(a.merges, b.merges);
        assert_eq!(a.tokens, b.tokens);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(learn_bpe(&[], 3, &default_langs()), Err(Error::Input(_))));
        assert!(matches!(
            learn_bpe(&owned(&["", "  "]), 3, &default_langs()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn vocab_size_identity() {
        let corpus = owned(&["int x = 0 ;", "int y = x + x ;", "return y ;"]);
        let model = learn_bpe(&corpus, 10, &default_langs()).unwrap();
        assert_eq!(
            model.vocab_size(),
            model.special_count() as usize + model.alphabet_len() + model.num_merges()
        );
    }

    #[test]
    fn encode_roundtrips_code_line() {
        let corpus = owned(&["int x ;", "int y ;"]);
        let model = learn_bpe(&corpus, 6, &default_langs()).unwrap();
        let ids = model.encode("int x ;", None).unwrap();
        assert_eq!(model.decode(&ids).unwrap(), "int x ;");
    }

    #[test]
    fn encode_empty_is_empty() {
        let model = learn_bpe(&owned(&["ab"]), 0, &default_langs()).unwrap();
        assert!(model.encode("", None).unwrap().is_empty());
        assert_eq!(model.decode(&[]).unwrap(), "");
    }

    #[test]
    fn language_tag_prefix() {
        let model = learn_bpe(&owned(&["ab"]), 0, &default_langs()).unwrap();
        let tag = model.language_tag("java").unwrap();
        let ids = model.encode("ab", Some("java")).unwrap();
        assert_eq!(ids[0], tag);
        assert_eq!(&ids[1..], model.encode("ab", None).unwrap().as_slice());
        assert!(matches!(model.encode("ab", Some("cobol")), Err(Error::Input(_))));
    }

    #[test]
    fn specials_are_low_ids_and_atomic() {
        let model = learn_bpe(&owned(&["a b"]), 2, &default_langs()).unwrap();
        let cls = model.specials.cls;
        assert!(model.is_special(cls));
        let ids = model.encode("[CLS] a b", None).unwrap();
        assert_eq!(ids[0], cls);
        for id in model.special_count()..model.vocab_size() as u32 {
            assert!(!model.is_special(id));
        }
    }

    #[test]
    fn decode_strips_specials_except_cls() {
        let model = learn_bpe(&owned(&["ab cd"]), 4, &default_langs()).unwrap();
        let core = model.encode("ab", None).unwrap();
        let mut wrapped = vec![model.specials.bos];
        wrapped.extend_from_slice(&core);
        wrapped.push(model.specials.eos);
        assert_eq!(model.decode(&wrapped).unwrap(), model.decode(&core).unwrap());

        let tagged = model.encode("[CLS] ab", None).unwrap();
        assert_eq!(model.decode(&tagged).unwrap(), "[CLS] ab");
    }

    #[test]
    fn decode_out_of_vocab_id_is_index_error() {
        let model = learn_bpe(&owned(&["ab"]), 0, &default_langs()).unwrap();
        let bad = model.vocab_size() as u32 + 7;
        assert!(matches!(model.decode(&[bad]), Err(Error::Index(_))));
    }

    #[test]
    fn unknown_char_maps_to_unk() {
        let model = learn_bpe(&owned(&["abc"]), 0, &default_langs()).unwrap();
        let ids = model.encode("aqc", None).unwrap();
        assert!(ids.contains(&model.specials.unk));
    }

    #[test]
    fn newlines_are_explicit_symbols() {
        let model = learn_bpe(&owned(&["a\nb"]), 0, &default_langs()).unwrap();
        let ids = model.encode("a\nb", None).unwrap();
        assert_eq!(model.decode(&ids).unwrap(), "a\nb");
        let blank_line = model.encode("a\n\nb", None).unwrap();
        assert_eq!(model.decode(&blank_line).unwrap(), "a\n\nb");
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bpe.model");
        let corpus = owned(&["int x = 0 ;\nreturn x ;", "fix the loop"]);
        let model = learn_bpe(&corpus, 20, &default_langs()).unwrap();
        model.save(&path).unwrap();
        let loaded = BpeModel::load(&path).unwrap();
        assert_eq!(loaded.tokens, model.tokens);
        assert_eq!(loaded.merges, model.merges);
        assert_eq!(loaded.specials.languages, model.specials.languages);
        let text = "int x = 0 ;\nreturn x ;";
        assert_eq!(
            loaded.encode(text, Some("java")).unwrap(),
            model.encode(text, Some("java")).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Roundtrip over canonical whitespace texts drawn from the
        /// learned alphabet.
        #[test]
        fn roundtrip_canonical_texts(
            lines in proptest::collection::vec(
                proptest::collection::vec("[abcxy]{1,6}", 0..4),
                1..4,
            )
        ) {
            let corpus = owned(&["abc xy ca\nyx bba", "aa bb cc xx yy"]);
            let model = learn_bpe(&corpus, 12, &default_langs()).unwrap();
            let text = lines
                .iter()
                .map(|words| words.join(" "))
                .collect::<Vec<_>>()
                .join("\n");
            let ids = model.encode(&text, None).unwrap();
            prop_assert_eq!(model.decode(&ids).unwrap(), text);
        }

        /// Language tagging is a pure prefix.
        #[test]
        fn tag_prefix_stability(words in proptest::collection::vec("[abc]{1,5}", 0..6)) {
            let model = learn_bpe(&owned(&["abc ab c"]), 6, &default_langs()).unwrap();
            let text = words.join(" ");
            let untagged = model.encode(&text, None).unwrap();
            let tagged = model.encode(&text, Some("python")).unwrap();
            prop_assert_eq!(tagged[0], model.language_tag("python").unwrap());
            prop_assert_eq!(&tagged[1..], untagged.as_slice());
        }
    }
}
