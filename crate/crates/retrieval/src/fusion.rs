//! Score fusion for the two histogram baselines.

/// `(1 - gamma) * shape_d + gamma * color_d`.
///
/// Both inputs are expected in [0, 1]: the shape distance is the embedding
/// distance halved, the color distance is [`histogram_distance`].
///
/// [`histogram_distance`]: sqnet_core::colorfeat::histogram_distance
pub fn fused_distance(shape_d: f64, color_d: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return shape_d;
    }
    if gamma == 1.0 {
        return color_d;
    }
    (1.0 - gamma) * shape_d + gamma * color_d
}

/// `sim_c^omega * max(0, cos)^(1 - omega)`.
pub fn fused_similarity_geometric(sim_c: f64, cosine: f64, omega: f64) -> f64 {
    let cos = cosine.max(0.0);
    sim_c.max(0.0).powf(omega) * cos.powf(1.0 - omega)
}
