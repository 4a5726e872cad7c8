//! Selection of pre-produced assets (hair, garments, glasses, ...) by cosine
//! similarity between query embeddings and the catalog's label embeddings.
//! Embeddings are computed offline by any text encoder and shipped in the
//! catalog file; no inference happens here.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetCategory {
    Hair,
    Garment,
    Hat,
    Moustache,
    Glasses,
    Eyelashes,
    Iris,
    Body,
}

impl AssetCategory {
    pub fn name(&self) -> &'static str {
        match self {
            AssetCategory::Hair => "hair",
            AssetCategory::Garment => "garment",
            AssetCategory::Hat => "hat",
            AssetCategory::Moustache => "moustache",
            AssetCategory::Glasses => "glasses",
            AssetCategory::Eyelashes => "eyelashes",
            AssetCategory::Iris => "iris",
            AssetCategory::Body => "body",
        }
    }
}

/// One catalog asset: a label embedding plus human-auditable attributes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AssetEntry {
    pub id: String,
    pub category: AssetCategory,
    pub label_text: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AssetCatalog {
    pub embedding_dim: usize,
    pub entries: Vec<AssetEntry>,
}

impl AssetCatalog {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if e.id.is_empty() {
                return Err(Error::InvalidCatalog("empty asset id".into()));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::InvalidCatalog(format!("duplicate asset id '{}'", e.id)));
            }
            if e.embedding.len() != self.embedding_dim {
                return Err(Error::EmbeddingDim {
                    expected: self.embedding_dim,
                    got: e.embedding.len(),
                });
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let catalog: AssetCatalog = crate::mesh::read_json(path.as_ref())?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::mesh::write_json(path.as_ref(), self)
    }
}

/// Cosine similarity a.b / (|a||b|); errors on zero-norm input.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::EmbeddingDim { expected: a.len(), got: b.len() });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNormVector);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Highest-similarity entry of a category; exact ties go to the
/// lexicographically smallest id, so selection is total and deterministic.
pub fn match_asset<'a>(
    query_embedding: &[f64],
    catalog: &'a AssetCatalog,
    category: AssetCategory,
) -> Result<&'a AssetEntry> {
    if query_embedding.len() != catalog.embedding_dim {
        return Err(Error::EmbeddingDim {
            expected: catalog.embedding_dim,
            got: query_embedding.len(),
        });
    }
    let mut best: Option<(f64, &AssetEntry)> = None;
    for entry in catalog.entries.iter().filter(|e| e.category == category) {
        let sim = cosine_similarity(query_embedding, &entry.embedding)?;
        best = match best {
            None => Some((sim, entry)),
            Some((bs, be)) => {
                if sim > bs || (sim == bs && entry.id < be.id) {
                    Some((sim, entry))
                } else {
                    Some((bs, be))
                }
            }
        };
    }
    best.map(|(_, e)| e).ok_or_else(|| Error::EmptyCategory(category.name().into()))
}

/// Independent [`match_asset`] per requested category. Fails (naming the
/// category) if any requested category has no catalog entries.
pub fn match_all<'a>(
    attribute_embeddings: &BTreeMap<AssetCategory, Vec<f64>>,
    catalog: &'a AssetCatalog,
) -> Result<BTreeMap<AssetCategory, &'a AssetEntry>> {
    let mut out = BTreeMap::new();
    for (category, query) in attribute_embeddings {
        out.insert(*category, match_asset(query, catalog, *category)?);
    }
    Ok(out)
}

/// Query document: category name -> embedding.
pub fn load_query(path: impl AsRef<Path>) -> Result<BTreeMap<AssetCategory, Vec<f64>>> {
    crate::mesh::read_json(path.as_ref())
}
