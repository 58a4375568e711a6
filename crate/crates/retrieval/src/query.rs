//! Encoders turning raw photos and sketches into searchable features.

use sqnet_core::colorfeat::{foreground_color_histogram, grid_color_histogram, stroke_color_histogram, ColorHistogram};
use sqnet_core::imageproc::canvas::BackgroundClassifier;
use sqnet_core::imageproc::{normalize_canvas, CanvasKind};
use sqnet_core::RasterImage;
use sqnet_nnet::input::{batch_tensor, prepare};
use sqnet_nnet::{Branch, Model};

use crate::error::{Result, RetrievalError};

/// Canvas side used for histogram features of both photos and sketches.
pub const DEFAULT_HIST_SIDE: u32 = 64;

const BATCH: usize = 64;

/// Color features of a sketch query.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryHistograms {
    pub grid: ColorHistogram,
    pub stroke: ColorHistogram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryFeatures {
    pub qnet: Vec<f64>,
    pub shape: Option<Vec<f64>>,
    pub hist: Option<QueryHistograms>,
    /// The sketch had no strokes.
    pub blank: bool,
}

impl QueryFeatures {
    pub fn baseline(&self) -> Option<(&[f64], &QueryHistograms)> {
        Some((self.shape.as_deref()?, self.hist.as_ref()?))
    }
}

/// Features of one indexed photo.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotoFeatures {
    pub qnet: Vec<f64>,
    pub shape: Option<Vec<f64>>,
    pub grid: Option<ColorHistogram>,
    pub foreground: Option<ColorHistogram>,
}

/// The learned model plus, for the baselines, the shape-only model.
#[derive(Clone, Copy, Debug)]
pub struct Encoder<'a> {
    pub qnet: &'a Model,
    pub shape: Option<&'a Model>,
    pub hist_side: u32,
}

impl<'a> Encoder<'a> {
    pub fn new(qnet: &'a Model, shape: Option<&'a Model>) -> Self {
        Self {
            qnet,
            shape,
            hist_side: DEFAULT_HIST_SIDE,
        }
    }

    pub fn with_baselines(&self) -> bool {
        self.shape.is_some()
    }

    pub fn embed_dim(&self) -> usize {
        self.qnet.config().embed_dim
    }

    pub fn encode_photos(&self, photos: &[&RasterImage]) -> Result<Vec<PhotoFeatures>> {
        let qnet = embed(self.qnet, Branch::Photo, photos)?;
        let shape = self.shape.map(|m| embed(m, Branch::Photo, photos)).transpose()?;
        let bg = BackgroundClassifier::default();
        let mut out = Vec::with_capacity(photos.len());
        for (i, (img, q)) in photos.iter().zip(qnet).enumerate() {
            let mut f = PhotoFeatures {
                qnet: q,
                shape: None,
                grid: None,
                foreground: None,
            };
            if let Some(shape) = &shape {
                let canvas = normalize_canvas(img, CanvasKind::Photo, self.hist_side)?.image;
                f.shape = Some(shape[i].clone());
                f.grid = Some(grid_color_histogram(&canvas)?);
                f.foreground = Some(foreground_color_histogram(&canvas, &bg));
            }
            out.push(f);
        }
        Ok(out)
    }

    pub fn encode_sketches(&self, sketches: &[&RasterImage]) -> Result<Vec<QueryFeatures>> {
        let qnet = embed(self.qnet, Branch::Sketch, sketches)?;
        let shape = self.shape.map(|m| embed(m, Branch::Sketch, sketches)).transpose()?;
        let mut out = Vec::with_capacity(sketches.len());
        for (i, (img, q)) in sketches.iter().zip(qnet).enumerate() {
            let canvas = normalize_canvas(img, CanvasKind::Sketch, self.hist_side)?;
            let hist = match &shape {
                Some(_) => Some(QueryHistograms {
                    grid: grid_color_histogram(&canvas.image)?,
                    stroke: stroke_color_histogram(&canvas.image),
                }),
                None => None,
            };
            out.push(QueryFeatures {
                qnet: q,
                shape: shape.as_ref().map(|s| s[i].clone()),
                hist,
                blank: canvas.blank,
            });
        }
        Ok(out)
    }

    pub fn encode_sketch(&self, sketch: &RasterImage) -> Result<QueryFeatures> {
        Ok(self.encode_sketches(&[sketch])?.remove(0))
    }
}

fn embed(model: &Model, branch: Branch, images: &[&RasterImage]) -> Result<Vec<Vec<f64>>> {
    let side = model.config().input_side;
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(BATCH) {
        let prepared = chunk
            .iter()
            .map(|img| prepare(img, branch, side))
            .collect::<sqnet_nnet::Result<Vec<_>>>()?;
        let refs: Vec<&RasterImage> = prepared.iter().collect();
        let (e, _) = model.forward(branch, &batch_tensor(&refs, side)?)?;
        out.extend((0..chunk.len()).map(|i| e.row(i).to_vec()));
    }
    if let Some(bad) = out.iter().find(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(RetrievalError::Store(format!("non-finite embedding {bad:?}")));
    }
    Ok(out)
}
