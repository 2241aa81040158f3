use super::schema::UtilityConfig;

/// Benefit-risk utility `g - b * r`.
pub fn compute_utility(g: f64, r: f64, cfg: &UtilityConfig) -> f64 {
    g - cfg.tradeoff * r
}
