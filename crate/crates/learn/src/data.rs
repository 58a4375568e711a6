//! Network-ready images keyed by item id.

use std::collections::BTreeMap;

use sqnet_core::imageproc::{augment, AugmentConfig};
use sqnet_core::RasterImage;
use sqnet_nnet::input::{batch_tensor, prepare};
use sqnet_nnet::{Branch, Model, Tensor};

use crate::error::{LearnError, Result};

/// Photos and sketches already normalized to the model's input side.
/// A sketch shares the id of the photo it was drawn from.
#[derive(Clone, Debug, Default)]
pub struct ImageBank {
    side: usize,
    photos: BTreeMap<u64, RasterImage>,
    sketches: BTreeMap<u64, RasterImage>,
}

impl ImageBank {
    pub fn new(side: usize) -> Self {
        Self {
            side,
            ..Self::default()
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn insert(&mut self, branch: Branch, id: u64, raw: &RasterImage) -> Result<()> {
        let img = prepare(raw, branch, self.side)?;
        self.insert_prepared(branch, id, img)
    }

    /// Stores an image that is already `side` x `side`.
    pub fn insert_prepared(&mut self, branch: Branch, id: u64, img: RasterImage) -> Result<()> {
        if img.width() as usize != self.side || img.height() as usize != self.side {
            return Err(LearnError::Config(format!(
                "prepared image for {id} is {}x{}, expected side {}",
                img.width(),
                img.height(),
                self.side
            )));
        }
        match branch {
            Branch::Photo => self.photos.insert(id, img),
            Branch::Sketch => self.sketches.insert(id, img),
        };
        Ok(())
    }

    pub fn get(&self, branch: Branch, id: u64) -> Result<&RasterImage> {
        let map = match branch {
            Branch::Photo => &self.photos,
            Branch::Sketch => &self.sketches,
        };
        map.get(&id).ok_or(LearnError::MissingImage(id))
    }

    pub fn contains(&self, branch: Branch, id: u64) -> bool {
        self.get(branch, id).is_ok()
    }

    pub fn len(&self, branch: Branch) -> usize {
        match branch {
            Branch::Photo => self.photos.len(),
            Branch::Sketch => self.sketches.len(),
        }
    }

    pub fn tensor(&self, branch: Branch, ids: &[u64]) -> Result<Tensor> {
        let imgs = ids.iter().map(|&id| self.get(branch, id)).collect::<Result<Vec<_>>>()?;
        Ok(batch_tensor(&imgs, self.side)?)
    }

    /// Batch of sketches, each augmented with its own seed.
    pub fn augmented_sketch_tensor(&self, ids: &[u64], config: &AugmentConfig, seeds: &[u64]) -> Result<Tensor> {
        let imgs = ids
            .iter()
            .zip(seeds)
            .map(|(&id, &seed)| Ok(augment(self.get(Branch::Sketch, id)?, config, seed)?.0))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&RasterImage> = imgs.iter().collect();
        Ok(batch_tensor(&refs, self.side)?)
    }
}

/// Embeddings of `ids` through `branch`, in `batch`-sized chunks.
pub fn embed(model: &Model, bank: &ImageBank, branch: Branch, ids: &[u64], batch: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(ids.len());
    for chunk in ids.chunks(batch.max(1)) {
        let (e, _) = model.forward(branch, &bank.tensor(branch, chunk)?)?;
        out.extend((0..chunk.len()).map(|i| e.row(i).to_vec()));
    }
    Ok(out)
}
