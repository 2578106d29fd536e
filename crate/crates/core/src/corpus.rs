//! Corpus ingestion: JSON-lines inventory listings, the vowel universe with
//! mean formants, feature preprocessing, and cross-validation folds.
//!
//! One listing per line:
//!
//! ```text
//! {"language": "L1", "vowels": [{"ipa": "i", "formants": [280, 2250]}, ...]}
//! ```
//!
//! `formants` holds F1..F5 in Hz. It may be empty when a source gives the
//! symbol without measurements; otherwise F1 and F2 are required.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::rng::{self, streams};
use crate::vowelset::{VowelSet, MAX_UNIVERSE};

/// Number of formants fed to the models (F1, F2).
pub const FEATURE_DIM: usize = 2;

/// Formant values are divided by this after centering.
pub const FEATURE_SCALE: f64 = 1000.0;

/// One vowel as listed by one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VowelRecord {
    pub ipa: String,
    #[serde(default)]
    pub formants: Vec<f64>,
}

impl VowelRecord {
    /// `(F1, F2)` when measured.
    pub fn f1_f2(&self) -> Option<[f64; 2]> {
        match self.formants.as_slice() {
            [f1, f2, ..] => Some([*f1, *f2]),
            _ => None,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.ipa.is_empty() {
            return Err("empty IPA symbol".into());
        }
        let f = &self.formants;
        if f.len() > 5 {
            return Err(format!("vowel {:?} lists {} formants (at most 5)", self.ipa, f.len()));
        }
        if f.len() == 1 {
            return Err(format!("vowel {:?} has F1 but no F2", self.ipa));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(format!("vowel {:?} has a non-finite formant", self.ipa));
        }
        if let [f1, f2, ..] = f.as_slice() {
            if *f1 <= 0.0 {
                return Err(format!("vowel {:?}: F1 must be positive", self.ipa));
            }
            if f2 <= f1 {
                return Err(format!("vowel {:?}: F2 must exceed F1", self.ipa));
            }
        }
        Ok(())
    }
}

/// One language's listing as it appears in the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageListing {
    pub language: String,
    pub vowels: Vec<VowelRecord>,
}

/// A language's vowel set, indexed into a [`VowelTable`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inventory {
    pub language: String,
    pub vowels: VowelSet,
}

impl Inventory {
    pub fn new(language: impl Into<String>, vowels: VowelSet) -> Self {
        Inventory { language: language.into(), vowels }
    }
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// Parse a JSON-lines corpus. Blank lines are ignored.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<LanguageListing>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut listing: LanguageListing = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        listing.language = nfc(listing.language.trim());
        if listing.language.is_empty() {
            return Err(Error::Parse { line: line_no, message: "empty language id".into() });
        }
        if listing.vowels.is_empty() {
            return Err(Error::Parse { line: line_no, message: "inventory lists no vowels".into() });
        }
        let mut seen = std::collections::HashSet::new();
        for v in &mut listing.vowels {
            v.ipa = nfc(v.ipa.trim());
            v.validate().map_err(|message| Error::Parse { line: line_no, message })?;
            if !seen.insert(v.ipa.clone()) {
                return Err(Error::DuplicateVowel {
                    language: listing.language.clone(),
                    symbol: v.ipa.clone(),
                });
            }
        }
        out.push(listing);
    }
    Ok(out)
}

pub fn parse_corpus_str(text: &str) -> Result<Vec<LanguageListing>> {
    parse_corpus(text.as_bytes())
}

/// Write listings back out in the JSON-lines format.
pub fn write_corpus<W: Write>(listings: &[LanguageListing], mut w: W) -> Result<()> {
    for l in listings {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Keep one listing per language id, chosen uniformly at random.
///
/// Groups keep the order in which their ids first appear.
pub fn dedupe_languages(listings: Vec<LanguageListing>, seed: u64) -> Vec<LanguageListing> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<LanguageListing>> = HashMap::new();
    for l in listings {
        let entry = groups.entry(l.language.clone()).or_default();
        if entry.is_empty() {
            order.push(l.language.clone());
        }
        entry.push(l);
    }
    let mut rng = rng::stream(seed, streams::DEDUPE);
    order
        .into_iter()
        .map(|id| {
            let mut group = groups.remove(&id).expect("group exists");
            if group.len() == 1 {
                group.pop().unwrap()
            } else {
                let pick = rng.random_range(0..group.len());
                group.swap_remove(pick)
            }
        })
        .collect()
}

/// The vowel universe: sorted distinct symbols with mean formants and
/// preprocessed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VowelTable {
    pub symbols: Vec<String>,
    pub mean_formants: Vec<[f64; FEATURE_DIM]>,
    pub features: Vec<[f64; FEATURE_DIM]>,
}

impl VowelTable {
    /// Table from explicit symbols and mean formants; features are computed.
    pub fn from_means(symbols: Vec<String>, mean_formants: Vec<[f64; FEATURE_DIM]>) -> Result<Self> {
        if symbols.len() != mean_formants.len() {
            return Err(Error::Dimension { expected: symbols.len(), got: mean_formants.len() });
        }
        if symbols.len() > MAX_UNIVERSE {
            return Err(Error::UniverseTooLarge(symbols.len()));
        }
        let mut pairs: Vec<(String, [f64; 2])> =
            symbols.into_iter().map(|s| nfc(&s)).zip(mean_formants).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("vowel symbols must be distinct".into()));
        }
        let (symbols, mean_formants) = pairs.into_iter().unzip();
        let mut t = VowelTable { symbols, mean_formants, features: Vec::new() };
        preprocess_features(&mut t);
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        let key = nfc(symbol);
        self.symbols.binary_search(&key).ok()
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    /// Resolve a list of symbols into a set.
    pub fn set_of<S: AsRef<str>>(&self, symbols: &[S]) -> Result<VowelSet> {
        symbols
            .iter()
            .map(|s| self.index_of(s.as_ref()).ok_or_else(|| Error::UnknownSymbol(s.as_ref().to_string())))
            .collect()
    }

    pub fn symbols_of(&self, set: VowelSet) -> Vec<&str> {
        set.iter().map(|i| self.symbols[i].as_str()).collect()
    }

    /// Map listings onto this universe.
    pub fn inventories(&self, listings: &[LanguageListing]) -> Result<Vec<Inventory>> {
        listings
            .iter()
            .map(|l| {
                let syms: Vec<&str> = l.vowels.iter().map(|v| v.ipa.as_str()).collect();
                Ok(Inventory::new(l.language.clone(), self.set_of(&syms)?))
            })
            .collect()
    }

    /// TSV with columns `symbol, F1_mean, F2_mean, feat1, feat2`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "symbol\tF1_mean\tF2_mean\tfeat1\tfeat2")?;
        for i in 0..self.len() {
            let m = self.mean_formants[i];
            let f = self.features[i];
            writeln!(w, "{}\t{}\t{}\t{}\t{}", self.symbols[i], m[0], m[1], f[0], f[1])?;
        }
        Ok(())
    }
}

/// Build the universe from listings. Each symbol's mean formants are the
/// unweighted mean of `(F1, F2)` over the languages that measured it.
pub fn build_vowel_table(listings: &[LanguageListing]) -> Result<VowelTable> {
    let mut measured: BTreeMap<&str, Vec<[f64; 2]>> = BTreeMap::new();
    for l in listings {
        for v in &l.vowels {
            let entry = measured.entry(v.ipa.as_str()).or_default();
            if let Some(f) = v.f1_f2() {
                entry.push(f);
            }
        }
    }
    if measured.len() > MAX_UNIVERSE {
        return Err(Error::UniverseTooLarge(measured.len()));
    }
    let mut symbols = Vec::with_capacity(measured.len());
    let mut means = Vec::with_capacity(measured.len());
    for (sym, mut obs) in measured {
        if obs.is_empty() {
            return Err(Error::NoFormants(sym.to_string()));
        }
        // summation order fixed so the mean does not depend on language order
        obs.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let n = obs.len() as f64;
        let f1 = obs.iter().map(|f| f[0]).sum::<f64>() / n;
        let f2 = obs.iter().map(|f| f[1]).sum::<f64>() / n;
        symbols.push(sym.to_string());
        means.push([f1, f2]);
    }
    VowelTable::from_means(symbols, means)
}

/// Center the mean formants over the universe and scale by 1/1000.
pub fn preprocess_features(table: &mut VowelTable) {
    let n = table.mean_formants.len();
    if n == 0 {
        table.features.clear();
        return;
    }
    let mut center = [0.0; FEATURE_DIM];
    for m in &table.mean_formants {
        for d in 0..FEATURE_DIM {
            center[d] += m[d];
        }
    }
    for c in &mut center {
        *c /= n as f64;
    }
    table.features = table
        .mean_formants
        .iter()
        .map(|m| {
            let mut f = [0.0; FEATURE_DIM];
            for d in 0..FEATURE_DIM {
                f[d] = (m[d] - center[d]) / FEATURE_SCALE;
            }
            f
        })
        .collect();
    // remove the residual rounding so each column sums to zero
    for d in 0..FEATURE_DIM {
        let resid = table.features.iter().map(|f| f[d]).sum::<f64>() / n as f64;
        for f in &mut table.features {
            f[d] -= resid;
        }
    }
}

/// A deduplicated corpus mapped onto its vowel universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub table: VowelTable,
    pub inventories: Vec<Inventory>,
}

/// Deduplicate languages, build the universe, and map every listing onto it.
pub fn ingest(listings: Vec<LanguageListing>, seed: u64) -> Result<Corpus> {
    let listings = dedupe_languages(listings, seed);
    let table = build_vowel_table(&listings)?;
    let inventories = table.inventories(&listings)?;
    Ok(Corpus { table, inventories })
}

/// Languages assigned to `k` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub fold_of_language: BTreeMap<String, usize>,
}

/// Train/dev/test partition for one test fold.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Inventory>,
    pub dev: Vec<Inventory>,
    pub test: Vec<Inventory>,
}

impl FoldAssignment {
    /// The fold held out for model selection when `test` is the test fold.
    pub fn dev_fold(&self, test: usize) -> usize {
        (test + 1) % self.k
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.fold_of_language.values() {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn split(&self, inventories: &[Inventory], test: usize) -> Split {
        let dev = self.dev_fold(test);
        let mut s = Split { train: Vec::new(), dev: Vec::new(), test: Vec::new() };
        for inv in inventories {
            match self.fold_of_language.get(&inv.language) {
                Some(&f) if f == test => s.test.push(inv.clone()),
                Some(&f) if f == dev => s.dev.push(inv.clone()),
                Some(_) => s.train.push(inv.clone()),
                None => {}
            }
        }
        s
    }

    /// Languages outside fold `test` (train plus dev).
    pub fn outside(&self, inventories: &[Inventory], test: usize) -> Vec<Inventory> {
        inventories
            .iter()
            .filter(|i| self.fold_of_language.get(&i.language).is_some_and(|&f| f != test))
            .cloned()
            .collect()
    }

    pub fn fold(&self, inventories: &[Inventory], fold: usize) -> Vec<Inventory> {
        inventories
            .iter()
            .filter(|i| self.fold_of_language.get(&i.language) == Some(&fold))
            .cloned()
            .collect()
    }
}

/// Random balanced partition of languages into `k` folds.
pub fn make_folds(inventories: &[Inventory], k: usize, seed: u64) -> Result<FoldAssignment> {
    let mut ids: Vec<&str> = inventories.iter().map(|i| i.language.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    if k < 2 || k > ids.len() {
        return Err(Error::Config(format!(
            "fold count {k} must lie in [2, {}] (number of languages)",
            ids.len()
        )));
    }
    let mut rng = rng::stream(seed, streams::FOLDS);
    ids.shuffle(&mut rng);
    let fold_of_language = ids.iter().enumerate().map(|(pos, id)| (id.to_string(), pos % k)).collect();
    Ok(FoldAssignment { k, seed, fold_of_language })
}

/// Corpus summary: per-vowel frequency and inventory-size histogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusStats {
    pub languages: usize,
    pub universe: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub mean_size: f64,
    pub mode_size: usize,
    /// `(size, count)` for every attested size.
    pub size_histogram: Vec<(usize, usize)>,
    /// `(symbol, percent of languages containing it)`, most frequent first.
    pub vowel_frequency: Vec<(String, f64)>,
}

pub fn corpus_stats(table: &VowelTable, inventories: &[Inventory]) -> CorpusStats {
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    let mut counts = vec![0usize; table.len()];
    for inv in inventories {
        *hist.entry(inv.vowels.len()).or_default() += 1;
        for i in inv.vowels {
            counts[i] += 1;
        }
    }
    let total = inventories.len();
    let mean_size = if total == 0 {
        0.0
    } else {
        inventories.iter().map(|i| i.vowels.len()).sum::<usize>() as f64 / total as f64
    };
    // smallest size among the most common
    let mode_size = hist
        .iter()
        .fold((0, 0), |best, (&size, &c)| if c > best.1 { (size, c) } else { best })
        .0;
    let mut vowel_frequency: Vec<(String, f64)> = table
        .symbols
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (s.clone(), if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 }))
        .collect();
    vowel_frequency.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    CorpusStats {
        languages: total,
        universe: table.len(),
        min_size: hist.keys().next().copied().unwrap_or(0),
        max_size: hist.keys().next_back().copied().unwrap_or(0),
        mean_size,
        mode_size,
        size_histogram: hist.into_iter().collect(),
        vowel_frequency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_dedupes_and_maps() {
        let listings = vec![
            listing("A", vec![rec("i", &[280.0, 2250.0]), rec("a", &[800.0, 1450.0])]),
            listing("B", vec![rec("u", &[300.0, 750.0])]),
            listing("A", vec![rec("i", &[290.0, 2200.0]), rec("u", &[])]),
        ];
        let c = ingest(listings, 0).unwrap();
        assert_eq!(c.inventories.len(), 2);
        assert_eq!(c.inventories[0].language, "A");
        assert_eq!(c.inventories[1].vowels, c.table.set_of(&["u"]).unwrap());
        assert!(c.table.len() >= 2);
    }

    fn rec(ipa: &str, f: &[f64]) -> VowelRecord {
        VowelRecord { ipa: ipa.into(), formants: f.to_vec() }
    }

    fn listing(lang: &str, vowels: Vec<VowelRecord>) -> LanguageListing {
        LanguageListing { language: lang.into(), vowels }
    }

    #[test]
    fn parses_single_record() {
        let c = parse_corpus_str(r#"{"language":"L1","vowels":[{"ipa":"i","formants":[280,2250]}]}"#).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].vowels.len(), 1);
        assert_eq!(c[0].vowels[0].formants, vec![280.0, 2250.0]);
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        assert!(parse_corpus_str("").unwrap().is_empty());
        assert!(parse_corpus_str("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"language\":\"A\",\"vowels\":[{\"ipa\":\"a\",\"formants\":[700,1200]}]}\n{oops\n";
        match parse_corpus_str(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let bad_f2 = r#"{"language":"A","vowels":[{"ipa":"a","formants":[700,600]}]}"#;
        assert!(matches!(parse_corpus_str(bad_f2), Err(Error::Parse { line: 1, .. })));
        let only_f1 = r#"{"language":"A","vowels":[{"ipa":"a","formants":[700]}]}"#;
        assert!(matches!(parse_corpus_str(only_f1), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn duplicate_vowel_in_language_is_rejected() {
        let text = r#"{"language":"A","vowels":[{"ipa":"a","formants":[700,1200]},{"ipa":"a","formants":[710,1250]}]}"#;
        assert!(matches!(parse_corpus_str(text), Err(Error::DuplicateVowel { .. })));
    }

    #[test]
    fn symbols_are_nfc_normalized() {
        // e + combining tilde vs precomposed ẽ
        let text = "{\"language\":\"A\",\"vowels\":[{\"ipa\":\"e\u{0303}\",\"formants\":[400,2000]}]}\n\
                    {\"language\":\"B\",\"vowels\":[{\"ipa\":\"\u{1ebd}\",\"formants\":[500,2100]}]}";
        let c = parse_corpus_str(text).unwrap();
        let t = build_vowel_table(&c).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.mean_formants[0], [450.0, 2050.0]);
    }

    #[test]
    fn dedupe_is_deterministic_and_identity_without_duplicates() {
        let ls = vec![
            listing("Swahili", vec![rec("a", &[700.0, 1200.0])]),
            listing("Swahili", vec![rec("i", &[300.0, 2200.0])]),
            listing("Hausa", vec![rec("u", &[300.0, 800.0])]),
        ];
        let a = dedupe_languages(ls.clone(), 7);
        let b = dedupe_languages(ls.clone(), 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].language, "Swahili");

        let unique = vec![ls[0].clone(), ls[2].clone()];
        assert_eq!(dedupe_languages(unique.clone(), 3), unique);
    }

    #[test]
    fn means_are_unweighted_per_language() {
        let ls = vec![
            listing("A", vec![rec("o", &[400.0, 800.0]), rec("i", &[300.0, 2200.0])]),
            listing("B", vec![rec("o", &[600.0, 1000.0])]),
        ];
        let t = build_vowel_table(&ls).unwrap();
        assert_eq!(t.symbols, vec!["i", "o"]);
        assert_eq!(t.mean_formants[t.index_of("o").unwrap()], [500.0, 900.0]);
        assert_eq!(t.mean_formants[t.index_of("i").unwrap()], [300.0, 2200.0]);
    }

    #[test]
    fn symbol_without_measurements_is_an_error() {
        let ls = vec![listing("A", vec![rec("ə", &[])])];
        match build_vowel_table(&ls) {
            Err(Error::NoFormants(s)) => assert_eq!(s, "ə"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn preprocessing_centers_and_scales() {
        let t = VowelTable::from_means(
            vec!["a".into(), "b".into()],
            vec![[500.0, 700.0], [500.0, 2300.0]],
        )
        .unwrap();
        // column means (500, 1500)
        assert!((t.features[0][0] - 0.0).abs() < 1e-15);
        assert!((t.features[0][1] + 0.8).abs() < 1e-15);

        let single = VowelTable::from_means(vec!["a".into()], vec![[321.0, 1234.0]]).unwrap();
        assert_eq!(single.features[0], [0.0, 0.0]);
    }

    #[test]
    fn fold_sizes_are_balanced() {
        let invs: Vec<Inventory> =
            (0..223).map(|i| Inventory::new(format!("L{i}"), VowelSet::EMPTY.with(0))).collect();
        let f = make_folds(&invs, 10, 1).unwrap();
        assert!(f.fold_sizes().iter().all(|&s| s == 22 || s == 23));
        assert_eq!(f, make_folds(&invs, 10, 1).unwrap());

        let ten = &invs[..10];
        let f = make_folds(ten, 10, 5).unwrap();
        assert_eq!(f.fold_sizes(), vec![1; 10]);

        assert!(make_folds(ten, 1, 0).is_err());
        assert!(make_folds(ten, 11, 0).is_err());
    }

    #[test]
    fn split_uses_next_fold_as_dev() {
        let invs: Vec<Inventory> =
            (0..9).map(|i| Inventory::new(format!("L{i}"), VowelSet::EMPTY.with(0))).collect();
        let f = make_folds(&invs, 3, 2).unwrap();
        let s = f.split(&invs, 2);
        assert_eq!(f.dev_fold(2), 0);
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (3, 3, 3));
        assert!(s.dev.iter().all(|i| f.fold_of_language[&i.language] == 0));
    }

    #[test]
    fn stats_histogram_and_frequencies() {
        let ls = vec![
            listing("A", vec![rec("a", &[700.0, 1200.0]), rec("i", &[300.0, 2200.0])]),
            listing("B", vec![rec("a", &[710.0, 1250.0])]),
        ];
        let t = build_vowel_table(&ls).unwrap();
        let inv = t.inventories(&ls).unwrap();
        let s = corpus_stats(&t, &inv);
        assert_eq!(s.size_histogram, vec![(1, 1), (2, 1)]);
        assert_eq!(s.vowel_frequency[0], ("a".to_string(), 100.0));
        assert_eq!(s.vowel_frequency[1], ("i".to_string(), 50.0));
        assert_eq!(s.mean_size, 1.5);
    }
}
