//! Model parameters for the divide-and-color construction.
//!
//! A parameter set is `(p, q, a_1..a_s)`: bond configurations are drawn
//! from the random-cluster measure with parameters `p` and `q`, then every
//! FK cluster independently receives color `i` with probability `a_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for deciding whether `a_i` equals `1/q` exactly, and for
/// validating that the color probabilities sum to one.
pub const PROB_TOL: f64 = 1e-12;

/// Colors are 1-based, matching the single-spin space `{1, ..., s}`.
pub type Color = u16;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub q: f64,
    /// Color probabilities; `a.len()` is the number of colors `s`.
    pub a: Vec<f64>,
}

impl ModelParams {
    pub fn new(p: f64, q: f64, a: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::InvalidParams(format!("p = {p} not in [0, 1]")));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidParams(format!("q = {q} must be positive")));
        }
        if a.len() < 2 {
            return Err(Error::InvalidParams("need at least two colors".into()));
        }
        if a.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::InvalidParams("all a_i must lie in (0, 1)".into()));
        }
        let total: f64 = a.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidParams(format!(
                "color probabilities sum to {total}, not 1"
            )));
        }
        Ok(ModelParams { p, q, a })
    }

    /// Number of colors `s`.
    pub fn s(&self) -> usize {
        self.a.len()
    }

    /// Probability of the given 1-based color.
    #[inline]
    pub fn color_prob(&self, color: Color) -> f64 {
        self.a[color as usize - 1]
    }

    /// Whether `a_i = 1/q` (within [`PROB_TOL`]). Edges inside clusters of
    /// such colors are discarded by the hat transform.
    #[inline]
    pub fn color_is_neutral(&self, color: Color) -> bool {
        (self.color_prob(color) - 1.0 / self.q).abs() <= PROB_TOL
    }

    /// The set `S_{1/q}` of colors with `a_i = 1/q`, as 1-based colors.
    pub fn neutral_colors(&self) -> Vec<Color> {
        (1..=self.s() as Color).filter(|&c| self.color_is_neutral(c)).collect()
    }

    /// True in the Potts specialization, where every color has `a_i = 1/q`
    /// (forcing `s = q` and uniform `a`).
    pub fn is_potts(&self) -> bool {
        (1..=self.s() as Color).all(|c| self.color_is_neutral(c))
    }

    /// The distinguished color: smallest index minimizing `a_i` among
    /// colors with `a_i != 1/q`. `None` exactly in the Potts case.
    pub fn distinguished_color(&self) -> Option<Color> {
        let mut best: Option<(Color, f64)> = None;
        for c in 1..=self.s() as Color {
            if self.color_is_neutral(c) {
                continue;
            }
            let p = self.color_prob(c);
            match best {
                Some((_, bp)) if bp <= p => {}
                _ => best = Some((c, p)),
            }
        }
        best.map(|(c, _)| c)
    }

    /// Uniform nonnullness floor: every conditional single-site color
    /// probability is at least
    /// `(min_i a_i) * min{1-p, 1 - p/(p + (1-p) q min_i a_i)}^(2d)`,
    /// obtained by isolating the site and coloring it independently.
    pub fn nonnull_floor_bound(&self, d: usize) -> f64 {
        let a_min = self.a.iter().cloned().fold(f64::INFINITY, f64::min);
        let q_min = self.q * a_min;
        let iso_open = self.p / (self.p + (1.0 - self.p) * q_min);
        let base = (1.0 - self.p).min(1.0 - iso_open);
        a_min * base.powi(2 * d as i32)
    }
}
