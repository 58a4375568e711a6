//! Photo and sketch catalogs and their manifest files.
//!
//! A manifest is tab-separated text: a version line carrying the class
//! count, a column header, then one record per item in the fixed order
//! `id, path, class_label, instance_id, color_group, origin`. Image paths
//! are stored relative to the manifest's directory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MANIFEST_MAGIC: &str = "# sqnet-catalog v1";
const MANIFEST_COLUMNS: &str = "id\tpath\tclass_label\tinstance_id\tcolor_group\torigin";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Original,
    HueVariant,
    GrayVariant,
    Sketch,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::HueVariant => "hue_variant",
            Origin::GrayVariant => "gray_variant",
            Origin::Sketch => "sketch",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "original" => Ok(Origin::Original),
            "hue_variant" => Ok(Origin::HueVariant),
            "gray_variant" => Ok(Origin::GrayVariant),
            "sketch" => Ok(Origin::Sketch),
            other => Err(format!("unknown origin {other:?}")),
        }
    }
}

/// Identity of an item's dominant coloring.
///
/// Chromatic groups are keyed by the rounded hue in degrees, gray groups by
/// their brightness level offset by [`ColorGroup::GRAY_BASE`]. Two items with
/// the same coloring therefore share a group regardless of how they were
/// produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColorGroup(pub u32);

impl ColorGroup {
    pub const GRAY_BASE: u32 = 1000;

    pub fn hue(degrees: f64) -> Self {
        let d = degrees.rem_euclid(360.0).round() as u32 % 360;
        ColorGroup(d)
    }

    pub fn gray(level: u32) -> Self {
        ColorGroup(Self::GRAY_BASE + level)
    }

    pub fn is_gray(self) -> bool {
        self.0 >= Self::GRAY_BASE
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogItem {
    pub id: u64,
    pub image_path: PathBuf,
    pub class_label: u32,
    pub instance_id: u64,
    pub color_group: ColorGroup,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Catalog {
    pub items: Vec<CatalogItem>,
    pub class_count: u32,
}

impl Catalog {
    /// Builds a catalog, checking id uniqueness and label range.
    pub fn new(items: Vec<CatalogItem>, class_count: u32) -> Result<Self> {
        let cat = Self { items, class_count };
        cat.validate()?;
        Ok(cat)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.items.len());
        for item in &self.items {
            if !seen.insert(item.id) {
                return Err(Error::DuplicateId(item.id));
            }
            if item.class_label >= self.class_count {
                return Err(Error::Config(format!(
                    "item {} has class_label {} >= class_count {}",
                    item.id, item.class_label, self.class_count
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Map from item id to position in `items`.
    pub fn index_by_id(&self) -> HashMap<u64, usize> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.id, i))
            .collect()
    }

    /// Item positions grouped by instance, in ascending instance order.
    pub fn instances(&self) -> BTreeMap<u64, Vec<usize>> {
        let mut map: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, it) in self.items.iter().enumerate() {
            map.entry(it.instance_id).or_default().push(i);
        }
        map
    }

    /// Keeps the items for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&CatalogItem) -> bool) -> Catalog {
        Catalog {
            items: self.items.iter().filter(|it| keep(it)).cloned().collect(),
            class_count: self.class_count,
        }
    }

    /// Writes the manifest. Image files are not touched.
    pub fn persist(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(64 * (self.items.len() + 2));
        writeln!(out, "{MANIFEST_MAGIC} class_count={}", self.class_count)?;
        writeln!(out, "{MANIFEST_COLUMNS}")?;
        for it in &self.items {
            let p = it.image_path.to_str().ok_or_else(|| {
                Error::Format(format!("item {} has a non UTF-8 path", it.id))
            })?;
            if p.contains('\t') || p.contains('\n') {
                return Err(Error::Format(format!(
                    "item {} path contains a tab or newline",
                    it.id
                )));
            }
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                it.id, p, it.class_label, it.instance_id, it.color_group.0, it.origin
            )?;
        }
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Parses a manifest and checks that every referenced image exists.
    pub fn load(path: &Path) -> Result<Self> {
        let cat = Self::load_manifest_only(path)?;
        let root = manifest_root(path);
        for it in &cat.items {
            let full = root.join(&it.image_path);
            if !full.is_file() {
                return Err(Error::MissingImage {
                    id: it.id,
                    path: full,
                });
            }
        }
        Ok(cat)
    }

    /// Parses a manifest without touching the referenced images.
    pub fn load_manifest_only(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        parse_manifest(&text, path)
    }
}

/// Directory against which manifest image paths resolve.
pub fn manifest_root(manifest: &Path) -> PathBuf {
    manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn parse_manifest(text: &str, path: &Path) -> Result<Catalog> {
    let err = |line: usize, reason: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, first) = lines.next().ok_or_else(|| err(1, "empty manifest".into()))?;
    let class_count = first
        .strip_prefix(MANIFEST_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("class_count="))
        .ok_or_else(|| err(1, format!("bad version line {first:?}")))?
        .parse::<u32>()
        .map_err(|e| err(1, format!("bad class_count: {e}")))?;

    match lines.next() {
        Some((_, cols)) if cols == MANIFEST_COLUMNS => {}
        Some((n, cols)) => return Err(err(n, format!("bad column header {cols:?}"))),
        None => return Err(err(2, "missing column header".into())),
    }

    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(err(n, format!("expected 6 fields, found {}", fields.len())));
        }
        let num = |i: usize, name: &str| -> Result<u64> {
            fields[i]
                .parse::<u64>()
                .map_err(|e| err(n, format!("bad {name} {:?}: {e}", fields[i])))
        };
        let id = num(0, "id")?;
        let class_label = u32::try_from(num(2, "class_label")?)
            .map_err(|_| err(n, "class_label out of range".into()))?;
        let instance_id = num(3, "instance_id")?;
        let color_group = u32::try_from(num(4, "color_group")?)
            .map_err(|_| err(n, "color_group out of range".into()))?;
        let origin = fields[5].parse::<Origin>().map_err(|e| err(n, e))?;
        if !seen.insert(id) {
            return Err(err(n, format!("duplicate id {id}")));
        }
        if class_label >= class_count {
            return Err(err(
                n,
                format!("class_label {class_label} >= class_count {class_count}"),
            ));
        }
        items.push(CatalogItem {
            id,
            image_path: PathBuf::from(fields[1]),
            class_label,
            instance_id,
            color_group: ColorGroup(color_group),
            origin,
        });
    }
    Ok(Catalog { items, class_count })
}

/// Splits a catalog into (train, eval) by instance, so all color variants
/// of one instance land on the same side.
pub fn split_train_eval(catalog: &Catalog, eval_fraction: f64, seed: u64) -> Result<(Catalog, Catalog)> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::Split(format!(
            "eval_fraction must lie in (0, 1), got {eval_fraction}"
        )));
    }
    let mut instances: Vec<u64> = catalog.instances().into_keys().collect();
    let n_eval = (eval_fraction * instances.len() as f64).round() as usize;
    if n_eval == 0 || n_eval >= instances.len() {
        return Err(Error::Split(format!(
            "eval_fraction {eval_fraction} over {} instances leaves one side empty",
            instances.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    instances.shuffle(&mut rng);
    let eval_set: HashSet<u64> = instances[..n_eval].iter().copied().collect();
    let train = catalog.filtered(|it| !eval_set.contains(&it.instance_id));
    let eval = catalog.filtered(|it| eval_set.contains(&it.instance_id));
    Ok((train, eval))
}
