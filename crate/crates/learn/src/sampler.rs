//! Quadruplet formation over a photo catalog.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use sqnet_core::{Catalog, CatalogItem};

use crate::error::{LearnError, Result};

/// Item ids of one training quadruplet. The anchor is the synthesized
/// sketch of the positive and carries the positive's id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Quadruplet {
    pub anchor_sketch: u64,
    pub positive: u64,
    pub positive_negative: u64,
    pub negative: u64,
}

/// Precomputed lookups for drawing quadruplets from one catalog.
#[derive(Clone, Debug)]
pub struct QuadrupletSampler<'a> {
    catalog: &'a Catalog,
    by_id: HashMap<u64, usize>,
    by_instance: BTreeMap<u64, Vec<usize>>,
    /// Positions of every item not in class `c`, for each class present.
    complement: BTreeMap<u32, Vec<usize>>,
}

impl<'a> QuadrupletSampler<'a> {
    pub fn new(catalog: &'a Catalog) -> Result<Self> {
        let mut classes: Vec<u32> = catalog.items.iter().map(|it| it.class_label).collect();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(LearnError::SingleClass);
        }
        let complement = classes
            .iter()
            .map(|&c| {
                let others = (0..catalog.items.len()).filter(|&i| catalog.items[i].class_label != c).collect();
                (c, others)
            })
            .collect();
        Ok(Self {
            catalog,
            by_id: catalog.index_by_id(),
            by_instance: catalog.instances(),
            complement,
        })
    }

    pub fn catalog(&self) -> &Catalog {
        self.catalog
    }

    fn siblings(&self, item: &CatalogItem) -> Vec<usize> {
        self.by_instance[&item.instance_id]
            .iter()
            .copied()
            .filter(|&i| self.catalog.items[i].color_group != item.color_group)
            .collect()
    }

    /// True when `id` has at least one recolored sibling.
    pub fn has_sibling(&self, id: u64) -> bool {
        self.by_id
            .get(&id)
            .is_some_and(|&i| !self.siblings(&self.catalog.items[i]).is_empty())
    }

    /// Ids usable as positives, in catalog order.
    pub fn eligible_positives(&self) -> Vec<u64> {
        self.catalog
            .items
            .iter()
            .filter(|it| self.has_sibling(it.id))
            .map(|it| it.id)
            .collect()
    }

    /// Draws the recolored positive uniformly among same-instance items of a
    /// different color group, and the negative uniformly among items of
    /// other classes.
    pub fn form<R: Rng>(&self, positive: u64, rng: &mut R) -> Result<Quadruplet> {
        let &pi = self
            .by_id
            .get(&positive)
            .ok_or_else(|| LearnError::Config(format!("item {positive} is not in the catalog")))?;
        let item = &self.catalog.items[pi];
        let sibs = self.siblings(item);
        if sibs.is_empty() {
            return Err(LearnError::NoColorSibling {
                item: positive,
                instance: item.instance_id,
            });
        }
        let pn = sibs[rng.random_range(0..sibs.len())];
        let others = &self.complement[&item.class_label];
        let neg = others[rng.random_range(0..others.len())];
        Ok(Quadruplet {
            anchor_sketch: positive,
            positive,
            positive_negative: self.catalog.items[pn].id,
            negative: self.catalog.items[neg].id,
        })
    }
}

/// Convenience wrapper building a sampler for a single draw.
pub fn form_quadruplet<R: Rng>(catalog: &Catalog, positive: u64, rng: &mut R) -> Result<Quadruplet> {
    QuadrupletSampler::new(catalog)?.form(positive, rng)
}

/// Checks the quadruplet type invariants against `catalog`. Returns a
/// description of the first violation.
pub fn check_quadruplet(catalog: &Catalog, q: &Quadruplet) -> std::result::Result<(), String> {
    let idx = catalog.index_by_id();
    let get = |id: u64| {
        idx.get(&id)
            .map(|&i| &catalog.items[i])
            .ok_or_else(|| format!("id {id} missing"))
    };
    let (a, p, pn, n) = (get(q.anchor_sketch)?, get(q.positive)?, get(q.positive_negative)?, get(q.negative)?);
    if a.id != p.id {
        return Err("anchor is not the sketch of the positive".into());
    }
    if !(a.class_label == p.class_label && p.class_label == pn.class_label) {
        return Err("anchor, positive and recolored positive differ in class".into());
    }
    if n.class_label == p.class_label {
        return Err("negative shares the positive's class".into());
    }
    if p.instance_id != pn.instance_id {
        return Err("recolored positive is a different instance".into());
    }
    if p.color_group == pn.color_group {
        return Err("recolored positive has the same color group".into());
    }
    Ok(())
}
