//! Synthetic manifesto-corpus exports for tests and demos.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOPICS: [&str; 10] = [
    "public healthcare funding",
    "market regulation",
    "lower corporate taxes",
    "renewable energy investment",
    "border enforcement",
    "social housing programs",
    "balanced budgets",
    "community policing",
    "international cooperation",
    "school curriculum reform",
];

/// Codes that assign cleanly to a leaning under both approaches, plus some
/// neutral/uncovered ones.
const CODES: [&str; 12] =
    ["401", "403", "414", "504", "505", "501", "605", "601", "107", "402", "000", "305"];

const COUNTRIES: [&str; 8] = [
    "United States",
    "Canada",
    "United Kingdom",
    "South Africa",
    "Australia",
    "New Zealand",
    "Ireland",
    "Germany",
];

/// Generate a CSV manifesto export with `rows` quasi-sentences. Includes a
/// sprinkling of short rows, non-English rows, and out-of-scope countries
/// so ingest filtering has something to do.
pub fn manifesto_csv(rows: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("text,cmp_code,country,language,manifesto_id\n");
    for i in 0..rows {
        let code = CODES.choose(&mut rng).unwrap();
        let country_idx = if rng.random::<f64>() < 0.05 { 7 } else { rng.random_range(0..7) };
        let country = COUNTRIES[country_idx];
        let language = if country == "Germany" { "german" } else { "english" };
        let topic = TOPICS.choose(&mut rng).unwrap();
        let text = match rng.random_range(0..20) {
            0 => format!("Investing in {topic}"), // header-like fragment
            1 => "Our plan.".to_string(),         // too short
            _ => format!(
                "Our party will {} {topic} over the next {} years.",
                if rng.random::<bool>() { "strengthen" } else { "reform" },
                rng.random_range(2..10)
            ),
        };
        let manifesto_id = format!("{}-{}", country.replace(' ', ""), 1950 + (i % 30));
        out.push_str(&format!("\"{text}\",{code},{country},{language},{manifesto_id}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aligndata::{ingest_manifestos_from_reader, ENGLISH_OFFICIAL_COUNTRIES};

    #[test]
    fn synthetic_corpus_survives_ingest() {
        let csv = manifesto_csv(2000, 3);
        let countries: Vec<String> =
            ENGLISH_OFFICIAL_COUNTRIES.iter().map(|s| s.to_string()).collect();
        let (sentences, report) =
            ingest_manifestos_from_reader(csv.as_bytes(), &countries).unwrap();
        assert!(report.accepted > 1500, "{report:?}");
        assert!(report.skipped_language > 0);
        assert!(report.skipped_short > 0);
        assert_eq!(sentences.len(), report.accepted);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(manifesto_csv(100, 1), manifesto_csv(100, 1));
        assert_ne!(manifesto_csv(100, 1), manifesto_csv(100, 2));
    }
}
