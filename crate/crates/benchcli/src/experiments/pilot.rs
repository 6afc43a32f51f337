use num_complex::Complex;
use serde_json::json;

use beyondq::pilotwave::{DistributionSpec, Tolerances};
use beyondq::relaxation::{relaxation_experiment, tau_estimate, CoarseGraining, RelaxationConfig};
use beyondq::subquantum::{
    distinguish_nonorthogonal, signaling_experiment, subq_measure, DistinguishConfig, InitialEnsemble, Quench, SignalingConfig,
    SubqMeasurementConfig,
};
use beyondq::wavefield::{build_box_superposition, EigenmodeWaveFunction, Phases};

use super::{numerical, to_json, Output, Table};
use crate::manifest::Params;
use crate::units::Dimension::{Angle, Natural};
use crate::BenchError;

#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    BoxMode(Vec<u32>),
    Equilibrium,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relax {
    pub dims: usize,
    pub modes_per_axis: u32,
    pub box_side: f64,
    pub phase_seed: u64,
    pub initial: Initial,
    pub cells: [usize; 2],
    pub samples: usize,
    pub times: Vec<f64>,
    pub rtol: f64,
}

impl Relax {
    pub(super) fn parse(p: &mut Params, seed: u64) -> Self {
        let dims = p.count_or("dims", 2);
        p.require(dims == 1 || dims == 2, "dims", "must be 1 or 2");
        let modes_per_axis = p.count_or("modes_per_axis", 4);
        p.require((1..=64).contains(&modes_per_axis), "modes_per_axis", "must lie in 1..=64");
        let box_side = p.quantity_or("box_side", Natural, 1.0);
        p.positive(box_side, "box_side");
        let phase_seed = p.count_or("phase_seed", seed as usize) as u64;
        let initial = match p.text_or("initial", "box-mode").as_str() {
            "equilibrium" => Initial::Equilibrium,
            "box-mode" => {
                let mode = p.count_list_or("initial_mode", &vec![1; dims.clamp(1, 2)]);
                p.require(mode.len() == dims && mode.iter().all(|&n| n >= 1), "initial_mode", "needs one index >= 1 per dimension");
                Initial::BoxMode(mode.iter().map(|&n| n as u32).collect())
            }
            other => {
                p.error("initial", format!("{other:?} is not one of box-mode, equilibrium"));
                Initial::Equilibrium
            }
        };
        let cells_list = p.count_list_or("cells", if dims == 1 { &[32] } else { &[32, 32] });
        p.require(cells_list.len() == dims && cells_list.iter().all(|&c| c >= 1), "cells", "needs one positive count per dimension");
        let cells = [cells_list.first().copied().unwrap_or(1), if dims == 2 { cells_list.get(1).copied().unwrap_or(1) } else { 1 }];
        let samples = p.count("samples");
        p.require(samples >= 2, "samples", "must be at least 2");
        let times: Vec<f64> = if p.has("times") {
            let times = p.quantity_list("times", Natural);
            let increasing = times.windows(2).all(|w| w[1] > w[0]);
            p.require(times.len() >= 2 && increasing && times[0] >= 0.0, "times", "needs at least two increasing non-negative times");
            times
        } else {
            let t_end = p.quantity("t_end", Natural);
            p.positive(t_end, "t_end");
            let probes = p.count_or("probes", 21);
            p.require(probes >= 2, "probes", "must be at least 2");
            (0..probes.max(2)).map(|k| t_end * k as f64 / (probes.max(2) - 1) as f64).collect()
        };
        let rtol = p.float_or("rtol", 1e-6);
        p.require(rtol > 0.0 && rtol < 1e-2, "rtol", "must lie in (0, 1e-2)");
        Self { dims, modes_per_axis: modes_per_axis as u32, box_side, phase_seed, initial, cells, samples, times, rtol }
    }

    pub(super) fn run(&self, seed: u64) -> Result<Output, BenchError> {
        let wf = EigenmodeWaveFunction::equal_weight_grid(self.dims, self.modes_per_axis, self.box_side, self.phase_seed)
            .map_err(numerical("wave function"))?;
        let noneq = match &self.initial {
            Initial::Equilibrium => DistributionSpec::Equilibrium,
            Initial::BoxMode(n) => DistributionSpec::BoxMode(n.clone()),
        };
        let cfg = RelaxationConfig {
            noneq,
            cells: self.cells,
            times: self.times.clone(),
            n_samples: self.samples,
            seed,
            tolerances: Tolerances::default().with_rtol(self.rtol),
        };
        let series = relaxation_experiment(&wf, &cfg).map_err(numerical("relaxation"))?;
        let graining = CoarseGraining::for_field(&wf, self.cells).map_err(numerical("coarse graining"))?;
        let spectrum = wf.spectrum_stats();
        let tau = tau_estimate(spectrum.energy_spread, 1.0, graining.epsilon(), 1.0).map_err(numerical("tau estimate"))?;

        let mut table = Table::new("h_series", &["t", "h_bar", "sigma", "chi2", "dof", "p_value"]);
        for (k, t) in series.times.iter().enumerate() {
            let b = &series.born_test[k];
            table.push_numbers(&[*t, series.h[k], series.sigma[k], b.statistic, b.dof as f64, b.p_value]);
        }
        let t_span = self.times[self.times.len() - 1] - self.times[0];
        let summary = json!({
            "samples": self.samples,
            "cells": self.cells,
            "mean_energy": spectrum.mean_energy,
            "energy_spread": spectrum.energy_spread,
            "tau_estimate": tau,
            "fit": series.fit.map(|f| json!({"h0": f.h0, "t_c": f.t_c, "r2": f.r2, "points": f.points, "t_c_over_tau": f.t_c / tau})),
            "within_noise_of_h0": series.within_noise_of_h0,
            "bias_bound": series.bias_bound,
            "max_f_drift": series.max_f_drift,
            "max_f_drift_per_unit_time": series.max_f_drift.map(|d| if t_span > 0.0 { d / t_span } else { 0.0 }),
            "born_chi_square_passes_1pct": series.born_test.iter().all(|b| b.passes(0.01)),
            "failed_trajectories": series.failed_trajectories,
        });
        Ok(Output { tables: vec![table], summary })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subq {
    pub config: SubqMeasurementConfig<f64>,
}

impl Subq {
    pub(super) fn parse(p: &mut Params) -> Self {
        let system_width = p.quantity_or("system_width", Natural, 1.0);
        let pointer_width = p.quantity_or("pointer_width", Natural, 1.0);
        let w = p.quantity("w", Natural);
        let coupling = p.quantity("coupling", Natural);
        let duration = p.quantity_or("duration", Natural, 1.0);
        let runs = p.count("runs");
        for (v, n) in
            [(system_width, "system_width"), (pointer_width, "pointer_width"), (w, "w"), (coupling, "coupling"), (duration, "duration")]
        {
            p.positive(v, n);
        }
        p.require(w <= pointer_width, "w", "must not exceed pointer_width");
        p.require(runs >= 1, "runs", "must be at least 1");
        Self { config: SubqMeasurementConfig { system_width, pointer_width, w, coupling, duration, runs, seed: 0 } }
    }

    pub(super) fn run(&self, seed: u64) -> Result<Output, BenchError> {
        let cfg = SubqMeasurementConfig { seed, ..self.config.clone() };
        let s = subq_measure(&cfg).map_err(numerical("measurement"))?;
        let mut table = Table::new("runs", &["x0", "y0", "y_measured", "estimate", "error"]);
        for r in &s.runs {
            table.push_numbers(&[r.x0, r.y0, r.y_meas, r.estimate, (r.estimate - r.x0).abs()]);
        }
        let summary = json!({
            "runs": s.runs.len(),
            "max_error": s.max_error,
            "error_bound": s.error_bound,
            "all_within_bound": s.all_within_bound,
            "disturbance": s.disturbance,
        });
        Ok(Output { tables: vec![table], summary })
    }
}

/// Two equal-weight superpositions of the first two box modes that differ
/// only in the relative phase of the second mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Distinguish {
    pub phases: [f64; 2],
    pub box_side: f64,
    pub config: DistinguishConfig<f64>,
}

impl Distinguish {
    pub(super) fn parse(p: &mut Params) -> Self {
        let phase1 = p.quantity_or("phase1", Angle, 0.0);
        let phase2 = p.quantity("phase2", Angle);
        let box_side = p.quantity_or("box_side", Natural, 1.0);
        let w = p.quantity("w", Natural);
        let a_t = p.quantity("a_t", Natural);
        let segment = p.quantity("segment", Natural);
        let runs = p.count("runs");
        let rtol = p.float_or("rtol", 1e-7);
        let allow_degenerate = p.flag_or("allow_degenerate", false);
        for (v, n) in [(box_side, "box_side"), (w, "w"), (a_t, "a_t"), (segment, "segment"), (rtol, "rtol")] {
            p.positive(v, n);
        }
        p.require(runs >= 1, "runs", "must be at least 1");
        let config =
            DistinguishConfig { w, a_t, segment, runs, seed: 0, tolerances: Tolerances::default().with_rtol(rtol), allow_degenerate };
        Self { phases: [phase1, phase2], box_side, config }
    }

    fn state(&self, phase: f64) -> Result<EigenmodeWaveFunction<f64>, BenchError> {
        let s = 0.5f64.sqrt();
        build_box_superposition(
            &[(vec![1], Complex::new(s, 0.0)), (vec![2], Complex::from_polar(s, phase))],
            self.box_side,
            Phases::Explicit,
        )
        .map_err(numerical("state"))
    }

    pub(super) fn run(&self, seed: u64) -> Result<Output, BenchError> {
        let (a, b) = (self.state(self.phases[0])?, self.state(self.phases[1])?);
        let cfg = DistinguishConfig { seed, ..self.config.clone() };
        let rep = distinguish_nonorthogonal(&a, &b, &cfg).map_err(numerical("discrimination"))?;
        let overlap = 0.5 * (1.0 + (self.phases[1] - self.phases[0]).cos());
        let mut table = Table::new("accuracy", &["w", "a_t", "segment", "runs", "accuracy", "ties", "resolution"]);
        table.push_numbers(&[cfg.w, cfg.a_t, cfg.segment, rep.runs as f64, rep.accuracy, rep.ties as f64, rep.resolution]);
        let summary = json!({
            "report": to_json(&rep),
            "state_overlap": overlap,
            "helstrom_bound": 0.5 * (1.0 + (1.0 - overlap).sqrt()),
        });
        Ok(Output { tables: vec![table], summary })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub config: SignalingConfig<f64>,
}

impl Signal {
    pub(super) fn parse(p: &mut Params) -> Self {
        let initial = match p.text_or("initial", "shifted-b").as_str() {
            "equilibrium" => InitialEnsemble::Equilibrium,
            "shifted-b" => InitialEnsemble::ShiftedB { shift: p.quantity("shift", Natural) },
            other => {
                p.error("initial", format!("{other:?} is not one of equilibrium, shifted-b"));
                InitialEnsemble::Equilibrium
            }
        };
        let quench = match p.text_or("quench", "mass").as_str() {
            "none" => Quench::None,
            "mass" => {
                let mass_b = p.quantity("mass_b", Natural);
                p.positive(mass_b, "mass_b");
                Quench::Mass { mass_b }
            }
            "linear-potential" => Quench::LinearPotential { slope: p.quantity("slope", Natural) },
            other => {
                p.error("quench", format!("{other:?} is not one of none, mass, linear-potential"));
                Quench::None
            }
        };
        let samples = p.count("samples");
        p.require(samples >= 2, "samples", "must be at least 2");
        let mut config = SignalingConfig::standard(initial, quench, samples, 0);
        config.gamma = p.float_or("gamma", config.gamma);
        p.require(config.gamma.abs() < 1.0, "gamma", "must satisfy |gamma| < 1");
        config.grid_points = p.count_or("grid_points", config.grid_points);
        p.require(config.grid_points >= 16 && config.grid_points.is_power_of_two(), "grid_points", "must be a power of two >= 16");
        if let Some(times) = p_probe_times(p) {
            config.probe_times = times;
        }
        Self { config }
    }

    pub(super) fn run(&self, seed: u64) -> Result<Output, BenchError> {
        let cfg = SignalingConfig { seed, ..self.config.clone() };
        let rep = signaling_experiment(&cfg).map_err(numerical("signaling"))?;
        let mut table = Table::new("delta_p", &["t", "bin_center", "delta_p", "sigma"]);
        for probe in &rep.probes {
            for k in 0..probe.centers.len() {
                table.push_numbers(&[probe.t, probe.centers[k], probe.delta_p[k], probe.sigma[k]]);
            }
        }
        let probes: Vec<_> = rep
            .probes
            .iter()
            .map(|q| {
                json!({
                    "t": q.t, "norm": q.norm, "chi2": q.chi2, "dof": q.dof, "integral": q.integral,
                    "mean_shift_a": q.mean_shift_a, "consistent_with_zero": q.consistent_with_zero,
                })
            })
            .collect();
        let summary = json!({
            "probes": probes,
            "exponent": rep.exponent,
            "exponent_stderr": rep.exponent_stderr,
            "all_consistent_with_zero": rep.all_consistent_with_zero,
            "failed": rep.failed,
        });
        Ok(Output { tables: vec![table], summary })
    }
}

fn p_probe_times(p: &mut Params) -> Option<Vec<f64>> {
    let (lo, hi) = (p.quantity_or("t_first", Natural, f64::NAN), p.quantity_or("t_last", Natural, f64::NAN));
    let n = p.count_or("probes", 5);
    if lo.is_nan() && hi.is_nan() {
        return None;
    }
    if !(lo > 0.0 && hi > lo && n >= 2) {
        p.error("t_first", "t_first and t_last must satisfy 0 < t_first < t_last with probes >= 2");
        return None;
    }
    Some((0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect())
}
