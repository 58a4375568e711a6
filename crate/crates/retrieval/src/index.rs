//! The searchable photo index and its on-disk directory layout.
//!
//! ```text
//! index.json       manifest: items, labels, skipped items
//! embeddings.sqne  learned embeddings
//! shape.sqne       shape-only embeddings (baselines)
//! grid.sqch        2x2 grid histograms (baselines)
//! fg.sqch          foreground histograms (baselines)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sqnet_core::colorfeat::{
    build_color_corpus_index, read_histogram_store, write_histogram_store, ColorHistogram, CorpusColorIndex, HistLayout,
};
use sqnet_core::{Catalog, CatalogItem, RasterImage};

use crate::error::{Result, RetrievalError};
use crate::query::{Encoder, PhotoFeatures};
use crate::store::EmbeddingIndex;

pub const MANIFEST_FILE: &str = "index.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.sqne";
pub const SHAPE_FILE: &str = "shape.sqne";
pub const GRID_FILE: &str = "grid.sqch";
pub const FOREGROUND_FILE: &str = "fg.sqch";

const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedItem {
    pub id: u64,
    pub class_label: u32,
    pub image_path: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub id: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub version: u32,
    pub embed_dim: usize,
    pub with_baselines: bool,
    pub hist_side: u32,
    pub items: Vec<IndexedItem>,
    pub skipped: Vec<SkippedItem>,
}

/// Features the histogram baselines need, aligned with the index order.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineFeatures {
    pub shape: EmbeddingIndex,
    pub grid: Vec<ColorHistogram>,
    pub foreground: Vec<ColorHistogram>,
    pub corpus: CorpusColorIndex,
}

/// Immutable after construction; searches only read it.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalIndex {
    manifest: IndexManifest,
    embeddings: EmbeddingIndex,
    baselines: Option<BaselineFeatures>,
}

impl RetrievalIndex {
    pub fn manifest(&self) -> &IndexManifest {
        &self.manifest
    }

    pub fn embeddings(&self) -> &EmbeddingIndex {
        &self.embeddings
    }

    pub fn baselines(&self) -> Option<&BaselineFeatures> {
        self.baselines.as_ref()
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        self.embeddings.ids()
    }

    pub fn embed_dim(&self) -> usize {
        self.manifest.embed_dim
    }

    pub fn items(&self) -> &[IndexedItem] {
        &self.manifest.items
    }

    pub fn item(&self, id: u64) -> Option<&IndexedItem> {
        self.manifest.items.iter().find(|it| it.id == id)
    }

    /// Class label per indexed item, in index order.
    pub fn labels(&self) -> Vec<u32> {
        self.manifest.items.iter().map(|it| it.class_label).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut json = serde_json::to_string_pretty(&self.manifest)?;
        json.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), json)?;
        self.embeddings.save(&dir.join(EMBEDDINGS_FILE))?;
        if let Some(b) = &self.baselines {
            b.shape.save(&dir.join(SHAPE_FILE))?;
            let pair = |hs: &[ColorHistogram]| self.ids().iter().copied().zip(hs.iter().cloned()).collect::<Vec<_>>();
            write_histogram_store(&dir.join(GRID_FILE), HistLayout::Grid2x2, &pair(&b.grid))?;
            write_histogram_store(&dir.join(FOREGROUND_FILE), HistLayout::Single, &pair(&b.foreground))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: IndexManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(RetrievalError::Store(format!("unsupported index version {}", manifest.version)));
        }
        let embeddings = EmbeddingIndex::load(&dir.join(EMBEDDINGS_FILE))?;
        let baselines = if manifest.with_baselines {
            let shape = EmbeddingIndex::load(&dir.join(SHAPE_FILE))?;
            let grid = read_aligned(&dir.join(GRID_FILE), HistLayout::Grid2x2, embeddings.ids())?;
            let foreground = read_aligned(&dir.join(FOREGROUND_FILE), HistLayout::Single, embeddings.ids())?;
            if shape.ids() != embeddings.ids() {
                return Err(RetrievalError::Store("shape store ids disagree with embeddings".into()));
            }
            let corpus = corpus_for(&foreground)?;
            Some(BaselineFeatures {
                shape,
                grid,
                foreground,
                corpus,
            })
        } else {
            None
        };
        let item_ids: Vec<u64> = manifest.items.iter().map(|it| it.id).collect();
        if item_ids != embeddings.ids() || embeddings.dim() != manifest.embed_dim {
            return Err(RetrievalError::Store("manifest disagrees with embedding store".into()));
        }
        Ok(Self {
            manifest,
            embeddings,
            baselines,
        })
    }
}

fn read_aligned(path: &Path, layout: HistLayout, ids: &[u64]) -> Result<Vec<ColorHistogram>> {
    let (got, records) = read_histogram_store(path)?;
    if got != layout || records.len() != ids.len() || records.iter().zip(ids).any(|((a, _), b)| a != b) {
        return Err(RetrievalError::Store(format!("{} disagrees with embeddings", path.display())));
    }
    Ok(records.into_iter().map(|(_, h)| h).collect())
}

/// Document frequencies over the photo corpus. An empty corpus gets an
/// all-zero index.
fn corpus_for(foreground: &[ColorHistogram]) -> Result<CorpusColorIndex> {
    if foreground.is_empty() {
        let empty = ColorHistogram::from_counts(HistLayout::Single, vec![0; HistLayout::Single.len()])?;
        return Ok(build_color_corpus_index(&[empty])?);
    }
    Ok(build_color_corpus_index(foreground)?)
}

impl RetrievalIndex {
    /// Assembles an index from precomputed features. Either every entry
    /// carries baseline features or none does; the first entry decides.
    pub fn from_features(
        entries: Vec<(IndexedItem, PhotoFeatures)>,
        embed_dim: usize,
        hist_side: u32,
        skipped: Vec<SkippedItem>,
    ) -> Result<Self> {
        let with_baselines = entries.first().is_some_and(|(_, f)| f.shape.is_some());
        let mut embeddings = EmbeddingIndex::new(embed_dim);
        let shape_dim = entries.first().and_then(|(_, f)| f.shape.as_ref()).map_or(0, Vec::len);
        let mut shape = EmbeddingIndex::new(shape_dim);
        let (mut grid, mut foreground) = (Vec::new(), Vec::new());
        let mut items = Vec::with_capacity(entries.len());
        for (item, f) in entries {
            embeddings.push(item.id, &f.qnet)?;
            if with_baselines {
                let missing = || RetrievalError::Store(format!("item {} lacks baseline features", item.id));
                shape.push(item.id, f.shape.as_deref().ok_or_else(missing)?)?;
                grid.push(f.grid.ok_or_else(missing)?);
                foreground.push(f.foreground.ok_or_else(missing)?);
            }
            items.push(item);
        }
        let baselines = if with_baselines {
            let corpus = corpus_for(&foreground)?;
            Some(BaselineFeatures {
                shape,
                grid,
                foreground,
                corpus,
            })
        } else {
            None
        };
        let mut skipped = skipped;
        skipped.sort_by_key(|s| s.id);
        Ok(Self {
            manifest: IndexManifest {
                version: MANIFEST_VERSION,
                embed_dim,
                with_baselines,
                hist_side,
                items,
                skipped,
            },
            embeddings,
            baselines,
        })
    }
}

/// Embeds every catalog photo that `load` can read. Items whose image
/// fails to load or encode are left out and listed in the manifest.
pub fn build_index(
    catalog: &Catalog,
    mut load: impl FnMut(&CatalogItem) -> std::result::Result<RasterImage, String>,
    encoder: &Encoder<'_>,
) -> Result<RetrievalIndex> {
    const CHUNK: usize = 256;
    let mut entries = Vec::with_capacity(catalog.len());
    let mut skipped = Vec::new();
    for chunk in catalog.items.chunks(CHUNK) {
        let mut ok = Vec::new();
        for it in chunk {
            match load(it) {
                Ok(img) => ok.push((it, img)),
                Err(reason) => skipped.push(SkippedItem { id: it.id, reason }),
            }
        }
        let refs: Vec<&RasterImage> = ok.iter().map(|(_, img)| img).collect();
        let feats = match encoder.encode_photos(&refs) {
            Ok(f) => ok.iter().map(|(it, _)| *it).zip(f).collect::<Vec<_>>(),
            // one at a time, so a single bad image is isolated
            Err(_) => {
                let mut f = Vec::new();
                for (it, img) in &ok {
                    match encoder.encode_photos(&[img]) {
                        Ok(mut one) => f.push((*it, one.remove(0))),
                        Err(e) => skipped.push(SkippedItem {
                            id: it.id,
                            reason: e.to_string(),
                        }),
                    }
                }
                f
            }
        };
        for (it, f) in feats {
            let item = IndexedItem {
                id: it.id,
                class_label: it.class_label,
                image_path: it.image_path.to_string_lossy().into_owned(),
            };
            entries.push((item, f));
        }
    }
    if !encoder.with_baselines() || entries.is_empty() {
        // keep the layout decision with the encoder, not the first entry
        let mut idx = RetrievalIndex::from_features(entries, encoder.embed_dim(), encoder.hist_side, skipped)?;
        if encoder.with_baselines() {
            idx.baselines = Some(BaselineFeatures {
                shape: EmbeddingIndex::new(encoder.shape.map_or(0, |m| m.config().embed_dim)),
                grid: Vec::new(),
                foreground: Vec::new(),
                corpus: corpus_for(&[])?,
            });
            idx.manifest.with_baselines = true;
        }
        return Ok(idx);
    }
    RetrievalIndex::from_features(entries, encoder.embed_dim(), encoder.hist_side, skipped)
}
