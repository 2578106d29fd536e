use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use vowelpp::corpus::{build_vowel_table, make_folds, parse_corpus_str, write_corpus, LanguageListing, VowelRecord};
use vowelpp::synthetic;
use vowelpp::VowelSet;

fn listings(seed: u64, languages: usize) -> Vec<LanguageListing> {
    let table = synthetic::vowel_table(12, 0).unwrap();
    let mut g = vowelpp::rng::stream(seed, 0);
    let sets: Vec<VowelSet> = synthetic::sample_bpp(&[1.5; 12], languages, &mut g)
        .unwrap()
        .into_iter()
        .map(|v| if v.is_empty() { v.with(0) } else { v })
        .collect();
    synthetic::as_listings(&table, &sets, &mut g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>(), m in 1usize..30) {
        let original = listings(seed, m);
        let mut buf = Vec::new();
        write_corpus(&original, &mut buf).unwrap();
        let parsed = parse_corpus_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(&parsed, &original);
        let mut again = Vec::new();
        write_corpus(&parsed, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn table_ignores_language_order(seed in any::<u64>(), m in 1usize..30) {
        let original = listings(seed, m);
        let mut shuffled = original.clone();
        shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        prop_assert_eq!(build_vowel_table(&original).unwrap(), build_vowel_table(&shuffled).unwrap());
    }

    #[test]
    fn feature_differences_are_scaled_formant_differences(seed in any::<u64>()) {
        let table = build_vowel_table(&listings(seed, 20)).unwrap();
        for i in 0..table.len() {
            for j in 0..table.len() {
                for d in 0..2 {
                    let feat = table.features[i][d] - table.features[j][d];
                    let formant = (table.mean_formants[i][d] - table.mean_formants[j][d]) / 1000.0;
                    prop_assert!((feat - formant).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn folds_cover_every_language_once(m in 3usize..80, k in 3usize..11, seed in any::<u64>()) {
        prop_assume!(k <= m);
        let table = synthetic::vowel_table(12, 0).unwrap();
        let inv = table.inventories(&listings(seed, m)).unwrap();
        let inv: Vec<_> = inv.into_iter().enumerate().map(|(i, mut v)| { v.language = format!("L{i}"); v }).collect();
        let folds = make_folds(&inv, k, seed).unwrap();
        let mut seen: Vec<String> = (0..k).flat_map(|f| folds.fold(&inv, f)).map(|i| i.language).collect();
        seen.sort();
        let mut all: Vec<String> = inv.iter().map(|i| i.language.clone()).collect();
        all.sort();
        prop_assert_eq!(seen, all);
        let sizes = folds.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(make_folds(&inv, k, seed).unwrap(), folds);
    }
}

#[test]
fn listings_with_extra_formants_keep_them() {
    let text = r#"{"language":"x","vowels":[{"ipa":"a","formants":[800,1450,2500,3500,4500]}]}"#;
    let parsed = parse_corpus_str(text).unwrap();
    assert_eq!(parsed[0].vowels[0], VowelRecord { ipa: "a".into(), formants: vec![800.0, 1450.0, 2500.0, 3500.0, 4500.0] });
}
