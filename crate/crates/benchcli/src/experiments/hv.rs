use serde_json::json;

use beyondq::hvmodels::{
    additivity_defect, ensemble_statistics, exact_statistics, transition_sets, two_state_transmission, Density1d, HvDistribution, Rect,
    Setting, SingletModel,
};
use beyondq::rng;

use super::{numerical, to_json, Output, Table};
use crate::manifest::Params;
use crate::units::Dimension::Angle;
use crate::BenchError;

#[derive(Clone, Debug, PartialEq)]
pub struct HvSinglet {
    pub angles: Vec<f64>,
    pub samples: usize,
    /// `[x0, x1, y0, y1, weight]` per rectangle; empty means uniform.
    pub pieces: Vec<[f64; 5]>,
    pub setting_a: f64,
    pub transition_b: f64,
    pub transition_b_new: f64,
}

impl HvSinglet {
    pub(super) fn parse(p: &mut Params) -> Self {
        let angles = p.quantity_list("angles", Angle);
        p.require(!angles.is_empty(), "angles", "needs at least one angle");
        let samples = p.count("samples");
        p.require(samples >= 2, "samples", "must be at least 2");
        let rows = p.rows_or("distribution", Vec::new());
        let mut pieces = Vec::new();
        for r in &rows {
            match <[f64; 5]>::try_from(r.as_slice()) {
                Ok(piece) => pieces.push(piece),
                Err(_) => p.error("distribution", "each rectangle is [x0, x1, y0, y1, weight]"),
            }
        }
        if !pieces.is_empty() {
            if let Err(e) = distribution(&pieces) {
                p.error("distribution", e.to_string());
            }
        }
        let setting_a = p.quantity_or("setting_a", Angle, 0.0);
        let transition_b = p.quantity_or("transition_b", Angle, 30f64.to_radians());
        let transition_b_new = p.quantity_or("transition_b_new", Angle, 60f64.to_radians());
        Self { angles, samples, pieces, setting_a, transition_b, transition_b_new }
    }

    pub(super) fn run(&self, seed: u64) -> Result<Output, BenchError> {
        let rho = if self.pieces.is_empty() {
            HvDistribution::uniform()
        } else {
            distribution(&self.pieces).map_err(numerical("distribution"))?
        };
        let model = SingletModel;
        let a = Setting::in_plane(self.setting_a);
        let mut table = Table::new("correlations", &["theta_deg", "correlation", "sigma", "exact", "quantum", "z_quantum"]);
        for (i, &theta) in self.angles.iter().enumerate() {
            let b = Setting::in_plane(self.setting_a + theta);
            let s =
                ensemble_statistics(&model, &rho, &a, &b, self.samples, rng::derive_seed(seed, i as u64)).map_err(numerical("sampling"))?;
            let exact = exact_statistics(&model, &rho, &a, &b);
            let quantum = -theta.cos();
            let z = if s.sigma_correlation > 0.0 { (s.correlation - quantum) / s.sigma_correlation } else { 0.0 };
            table.push_numbers(&[theta.to_degrees(), s.correlation, s.sigma_correlation, exact.correlation, quantum, z]);
        }

        let b = Setting::in_plane(self.setting_a + self.transition_b);
        let b_new = Setting::in_plane(self.setting_a + self.transition_b_new);
        let sets = transition_sets(&model, &a, &b, &b_new, &rho);
        let n = self.angles.len() as u64;
        let before = ensemble_statistics(&model, &rho, &a, &b, self.samples, rng::derive_seed(seed, n)).map_err(numerical("sampling"))?;
        let after =
            ensemble_statistics(&model, &rho, &a, &b_new, self.samples, rng::derive_seed(seed, n + 1)).map_err(numerical("sampling"))?;
        let sampled_shift = after.p_plus_a - before.p_plus_a;
        let sigma_shift = (before.sigma_p_a.powi(2) + after.sigma_p_a.powi(2)).sqrt();
        let summary = json!({
            "samples": self.samples,
            "transition_sets": to_json(&sets),
            "sampled_marginal_shift": sampled_shift,
            "sigma_marginal_shift": sigma_shift,
            "shift_z": if sigma_shift > 0.0 { (sampled_shift - sets.marginal_shift) / sigma_shift } else { 0.0 },
        });
        Ok(Output { tables: vec![table], summary })
    }
}

fn distribution(pieces: &[[f64; 5]]) -> Result<HvDistribution<f64>, beyondq::hvmodels::HvError> {
    HvDistribution::new(pieces.iter().map(|p| (Rect::new(p[0], p[1], p[2], p[3]), p[4])).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HvPhoton {
    pub density: Density1d<f64>,
    pub bloch: f64,
    pub points: usize,
    pub additivity: [f64; 2],
}

impl HvPhoton {
    pub(super) fn parse(p: &mut Params) -> Self {
        let density = match p.text_or("density", "uniform").as_str() {
            "uniform" => Density1d::Uniform,
            "power" => Density1d::Power { exponent: p.float("exponent") },
            "piecewise" => Density1d::Piecewise { edges: p.float_list("edges"), values: p.float_list("values") },
            other => {
                p.error("density", format!("{other:?} is not one of uniform, power, piecewise"));
                Density1d::Uniform
            }
        };
        if let Err(e) = density.validate() {
            p.error("density", e.to_string());
        }
        let bloch = p.float_or("bloch", 1.0);
        p.require((0.0..=1.0).contains(&bloch), "bloch", "must lie in [0, 1]");
        let points = p.count_or("points", 181);
        p.require(points >= 3, "points", "must be at least 3");
        let additivity = [p.quantity_or("theta1", Angle, 0.0), p.quantity_or("theta2", Angle, 30f64.to_radians())];
        Self { density, bloch, points, additivity }
    }

    pub(super) fn run(&self) -> Result<Output, BenchError> {
        let theta: Vec<f64> = (0..self.points).map(|k| std::f64::consts::PI * k as f64 / (self.points - 1) as f64).collect();
        let curve = two_state_transmission(&self.density, &theta, self.bloch).map_err(numerical("transmission"))?;
        let mut table = Table::new("transmission", &["theta_rad", "p_plus", "p_quantum"]);
        for k in 0..theta.len() {
            table.push_numbers(&[theta[k], curve.p_plus[k], curve.p_quantum[k]]);
        }
        let summary = json!({
            "density": to_json(&self.density),
            "max_deviation": curve.max_deviation,
            "fit": to_json(&curve.fit),
            "additivity_defect": additivity_defect(&self.density, self.bloch, self.additivity[0], self.additivity[1]),
        });
        Ok(Output { tables: vec![table], summary })
    }
}
