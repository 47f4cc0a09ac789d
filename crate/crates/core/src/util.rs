//! Small shared helpers: stable hashing for seed derivation and provenance.

use sha2::{Digest, Sha256};

/// FNV-1a, 64-bit. Used to derive per-condition RNG seeds; stable across
/// platforms and releases, unlike `std::hash`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Mix a base seed with a string key into a new seed.
pub fn derive_seed(base: u64, key: &str) -> u64 {
    let mut buf = Vec::with_capacity(8 + key.len());
    buf.extend_from_slice(&base.to_le_bytes());
    buf.extend_from_slice(key.as_bytes());
    fnv1a64(&buf)
}

/// Hex-encoded SHA-256 of arbitrary bytes, for config/corpus provenance.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Mean of a slice; NaN on empty input.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n-1 denominator); NaN for fewer than 2 values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Normal-approximation 95% CI of the mean over `values`.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, m);
    }
    let half = 1.96 * sample_sd(values) / (values.len() as f64).sqrt();
    (m - half, m + half)
}
