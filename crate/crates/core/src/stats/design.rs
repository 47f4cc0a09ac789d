//! Treatment-coded design matrices for the opinion regressions: language and
//! model main effects, their interactions, and the two statement controls.

use crate::error::{Error, Result};
use crate::lang::Language;
use crate::stats::linalg::Mat;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// One observation entering the regression design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRecord {
    pub model: String,
    pub language: Language,
    pub country_specific: Option<bool>,
    pub translated: Option<bool>,
}

/// Named design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub column_names: Vec<String>,
    pub x: Mat,
}

/// Build a treatment-coded design: intercept, language indicators against
/// the reference language, model indicators against the reference model,
/// language x model interactions, and the country-specific / translated
/// controls.
pub fn build_design(
    records: &[RegressionRecord],
    reference_model: &str,
    reference_language: Language,
) -> Result<DesignMatrix> {
    if records.is_empty() {
        return Err(Error::Stats("no records to build a design from".to_string()));
    }
    let models: BTreeSet<&str> = records.iter().map(|r| r.model.as_str()).collect();
    if !models.contains(reference_model) {
        return Err(Error::Stats(format!(
            "reference model `{reference_model}` not present in the records"
        )));
    }
    let languages: BTreeSet<Language> = records.iter().map(|r| r.language).collect();
    if !languages.contains(&reference_language) {
        return Err(Error::Stats(format!(
            "reference language `{reference_language}` not present in the records"
        )));
    }
    let nonref_langs: Vec<Language> =
        languages.iter().copied().filter(|&l| l != reference_language).collect();
    let nonref_models: Vec<&str> =
        models.iter().copied().filter(|&m| m != reference_model).collect();

    let mut column_names = vec!["(intercept)".to_string()];
    column_names.extend(nonref_langs.iter().map(|l| format!("lang[{l}]")));
    column_names.extend(nonref_models.iter().map(|m| format!("model[{m}]")));
    for &lang in &nonref_langs {
        for &model in &nonref_models {
            column_names.push(format!("lang[{lang}]:model[{model}]"));
        }
    }
    column_names.push("country_specific".to_string());
    column_names.push("translated".to_string());

    let mut rows = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let country_specific = record.country_specific.ok_or_else(|| {
            Error::Stats(format!("record {i}: missing country_specific flag"))
        })?;
        let translated = record
            .translated
            .ok_or_else(|| Error::Stats(format!("record {i}: missing translated flag")))?;
        let mut row = Vec::with_capacity(column_names.len());
        row.push(1.0);
        let lang_ind: Vec<f64> = nonref_langs
            .iter()
            .map(|&l| if record.language == l { 1.0 } else { 0.0 })
            .collect();
        let model_ind: Vec<f64> = nonref_models
            .iter()
            .map(|&m| if record.model == m { 1.0 } else { 0.0 })
            .collect();
        row.extend(&lang_ind);
        row.extend(&model_ind);
        for &li in &lang_ind {
            for &mi in &model_ind {
                row.push(li * mi);
            }
        }
        row.push(if country_specific { 1.0 } else { 0.0 });
        row.push(if translated { 1.0 } else { 0.0 });
        rows.push(row);
    }

    Ok(DesignMatrix { column_names, x: Mat::from_rows(&rows) })
}
