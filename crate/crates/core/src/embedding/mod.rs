//! Latent-space analysis: 2-D t-SNE projection and silhouette scoring.

mod silhouette;
mod tsne;

pub use silhouette::silhouette;
pub use tsne::{conditional_distribution, tsne, TsneConfig, TsneResult};

use serde::{Deserialize, Serialize};

/// A latent code tagged with the ordinal properties of the object that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledLatent {
    pub object_id: u32,
    pub stiffness_level: u8,
    pub friction_level: u8,
    pub z: Vec<f64>,
}

/// Silhouettes of a labelled latent set grouped by stiffness and by friction level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertySilhouettes {
    pub stiffness: f64,
    pub friction: f64,
}

pub fn property_silhouettes(latents: &[LabeledLatent]) -> crate::Result<PropertySilhouettes> {
    let pts: Vec<Vec<f64>> = latents.iter().map(|l| l.z.clone()).collect();
    let s: Vec<u8> = latents.iter().map(|l| l.stiffness_level).collect();
    let f: Vec<u8> = latents.iter().map(|l| l.friction_level).collect();
    Ok(PropertySilhouettes {
        stiffness: silhouette(&pts, &s)?,
        friction: silhouette(&pts, &f)?,
    })
}

/// One row of the embedding export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub object_id: u32,
    pub stiffness_level: u8,
    pub friction_level: u8,
    pub dim1: f64,
    pub dim2: f64,
}

/// Project labelled latents to 2-D, keeping their labels.
pub fn embed(latents: &[LabeledLatent], cfg: &TsneConfig) -> crate::Result<Vec<EmbeddingRow>> {
    let pts: Vec<Vec<f64>> = latents.iter().map(|l| l.z.clone()).collect();
    let res = tsne(&pts, cfg)?;
    Ok(latents
        .iter()
        .zip(res.embedding)
        .map(|(l, [d1, d2])| EmbeddingRow {
            object_id: l.object_id,
            stiffness_level: l.stiffness_level,
            friction_level: l.friction_level,
            dim1: d1,
            dim2: d2,
        })
        .collect())
}
