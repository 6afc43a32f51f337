use num_complex::Complex;
use serde_json::json;

use beyondq::collapse::{
    clump_collapse, collapse_kernel, constants, density_matrix_csl, energy_gain_rate, energy_gain_rate_ev, gambler_ruin,
    interference_criterion, kinetic_energy, martingale_diagnostics, particle_master_equation, random_walk_predictions,
    simulate_csl_ensemble, sl_ensemble, sphere_nucleons, ClumpConfig, CollapseOperatorSet, CslConfig, CslParams, GridDensityMatrix,
    NoiseScheme, SlConfig, UnitSystem,
};
use beyondq::linalg::CMatrix;
use beyondq::rng;
use beyondq::wavefield::{Boundary, GridAxis};

use super::{num, numerical, to_json, Output, Table};
use crate::manifest::Params;
use crate::units::Dimension::{Angle, Length, MassDensity, Natural, Rate, Time};
use crate::BenchError;

fn normalized(p: &mut Params, name: &str, amps: &[f64]) {
    let n: f64 = amps.iter().map(|a| a * a).sum();
    p.require((n - 1.0).abs() <= 1e-9, name, "squared moduli must sum to 1");
}

#[derive(Clone, Debug, PartialEq)]
pub struct CslRun {
    pub spectrum: Vec<f64>,
    pub amplitudes: Vec<Complex<f64>>,
    pub hamiltonian: Option<Vec<Vec<f64>>>,
    pub lambda: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub runs: usize,
    pub scheme: NoiseScheme,
    pub record_every: usize,
    pub trace_runs: usize,
}

impl CslRun {
    pub(super) fn parse(p: &mut Params) -> Self {
        let spectrum = p.float_list("spectrum");
        p.require(!spectrum.is_empty() && spectrum.len() <= 64, "spectrum", "needs 1 to 64 eigenvalues");
        let moduli = p.float_list("amplitudes");
        p.require(moduli.len() == spectrum.len(), "amplitudes", "needs one amplitude per eigenvalue");
        normalized(p, "amplitudes", &moduli);
        let phases = if p.has("phases") { p.quantity_list("phases", Angle) } else { vec![0.0; moduli.len()] };
        p.require(phases.len() == moduli.len(), "phases", "needs one phase per amplitude");
        let amplitudes =
            moduli.iter().zip(phases.iter().chain(std::iter::repeat(&0.0))).map(|(r, ph)| Complex::from_polar(*r, *ph)).collect();
        let rows = p.rows_or("hamiltonian", Vec::new());
        let hamiltonian = if rows.is_empty() {
            None
        } else {
            let scale = p.quantity("energy_scale", Natural);
            p.require(
                rows.len() == spectrum.len() && rows.iter().all(|r| r.len() == spectrum.len()),
                "hamiltonian",
                "must be square with the spectrum's dimension",
            );
            Some(rows.iter().map(|r| r.iter().map(|h| h * scale).collect()).collect())
        };
        let lambda = p.quantity("lambda", Natural);
        p.require(lambda >= 0.0, "lambda", "must be non-negative");
        let t_end = p.quantity("t_end", Natural);
        p.positive(t_end, "t_end");
        let dt = p.quantity_or("dt", Natural, f64::NAN);
        let dt = if dt.is_nan() {
            None
        } else {
            p.positive(dt, "dt");
            Some(dt)
        };
        let runs = p.count("runs");
        p.require(runs >= 2, "runs", "must be at least 2");
        let scheme = match p.text_or("scheme", "cooked").as_str() {
            "cooked" => NoiseScheme::Cooked,
            "raw" => NoiseScheme::Raw,
            other => {
                p.error("scheme", format!("{other:?} is not one of raw, cooked"));
                NoiseScheme::Cooked
            }
        };
        let record_every = p.count_or("record_every", 100);
        p.require(record_every >= 1, "record_every", "must be at least 1");
        let trace_runs = p.count_or("trace_runs", 10);
        Self { spectrum, amplitudes, hamiltonian, lambda, t_end, dt, runs, scheme, record_every, trace_runs }
    }

    pub(super) fn run(&self, seed: u64) -> Result<Output, BenchError> {
        let op = CMatrix::from_diagonal(&self.spectrum);
        let ops = CollapseOperatorSet::new(vec![op], self.hamiltonian.as_ref().map(|h| CMatrix::from_real_rows(h)))
            .map_err(numerical("operators"))?;
        let dt = self.dt.unwrap_or_else(|| ops.default_dt(self.lambda));
        let cfg = CslConfig { record_every: self.record_every, ..CslConfig::new(self.lambda, dt, self.t_end, seed, self.scheme) };
        let ens = simulate_csl_ensemble(&ops, &self.amplitudes, &cfg, self.runs).map_err(numerical("simulation"))?;
        let dim = self.spectrum.len();
        let times = ens.runs.first().map(|r| r.times.clone()).unwrap_or_default();

        let mut header = vec!["run".to_string(), "t".to_string()];
        header.extend((0..dim).map(|n| format!("x_{n}")));
        header.push("norm".into());
        let mut traces = Table::with_header("trajectories", header);
        for run in ens.runs.iter().take(self.trace_runs) {
            for (k, t) in run.times.iter().enumerate() {
                let mut row = vec![run.run_index as f64, *t];
                row.extend(&run.x[k]);
                row.push(run.states[k].iter().map(|z| z.norm_sqr()).sum());
                traces.push_numbers(&row);
            }
        }

        let rho0 = CMatrix::outer(&self.amplitudes, &self.amplitudes);
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|n| format!("mean_x_{n}")));
        if dim >= 2 {
            header.extend(["coherence_01_re", "coherence_01_sigma", "coherence_01_exact"].map(String::from));
        }
        let mut ensemble = Table::with_header("ensemble", header);
        let weights = ens.weights();
        for (k, t) in times.iter().enumerate() {
            let mut row = vec![*t];
            for n in 0..dim {
                let xs: Vec<f64> = ens.runs.iter().map(|r| r.x[k][n]).collect();
                row.push(beyondq::collapse::weighted_mean(&xs, weights.as_deref()).0);
            }
            if dim >= 2 {
                let (m, s) = ens.mean_coherence(&ops, k, 0, 1);
                let exact = density_matrix_csl(&rho0, &ops, self.lambda, *t).map_err(numerical("density matrix"))?;
                row.extend([m.re, s.re, exact.rho[(0, 1)].re]);
            }
            ensemble.push_numbers(&row);
        }

        let freq = ens.outcome_frequencies();
        let born: Vec<f64> = self.amplitudes.iter().map(|c| c.norm_sqr()).collect();
        let martingale = martingale_diagnostics(&ens).map_err(numerical("martingale"))?;
        let outcomes: Vec<_> = freq
            .iter()
            .zip(&born)
            .map(|((f, s), b)| json!({"frequency": f, "sigma": s, "born": b, "z": if *s > 0.0 { (f - b) / s } else { 0.0 }}))
            .collect();
        let summary = json!({
            "runs": ens.runs.len(),
            "excluded": ens.excluded,
            "dt": dt,
            "effective_size": ens.effective_size(),
            "outcomes": outcomes,
            "martingale": to_json(&martingale),
        });
        Ok(Output { tables: vec![ensemble, traces], summary })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CslMaster {
    pub half_width: f64,
    pub points: usize,
    pub centers: Vec<f64>,
    pub sigma: f64,
    pub params: CslParams<f64>,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
}

impl CslMaster {
    pub(super) fn parse(p: &mut Params) -> Self {
        let half_width = p.quantity("half_width", Natural);
        p.positive(half_width, "half_width");
        let points = p.count("points");
        p.require(points >= 8 && points.is_power_of_two(), "points", "must be a power of two >= 8");
        let centers = p.quantity_list("centers", Natural);
        p.require(
            !centers.is_empty() && centers.iter().all(|c| c.abs() < half_width),
            "centers",
            "needs at least one centre inside the grid",
        );
        let sigma = p.quantity("sigma", Natural);
        p.positive(sigma, "sigma");
        let lambda = p.quantity("lambda", Natural);
        p.require(lambda >= 0.0, "lambda", "must be non-negative");
        let a = p.quantity("a", Natural);
        p.positive(a, "a");
        let mass = p.quantity_or("mass", Natural, 1.0);
        p.positive(mass, "mass");
        let coupling = p.float_or("coupling", f64::NAN);
        let dt = p.quantity("dt", Natural);
        p.positive(dt, "dt");
        let steps = p.count("steps");
        p.require(steps >= 1, "steps", "must be at least 1");
        let record_every = p.count_or("record_every", 10);
        p.require(record_every >= 1, "record_every", "must be at least 1");
        let params = CslParams {
            lambda,
            a,
            masses: vec![mass],
            reference_mass: 1.0,
            couplings: if coupling.is_nan() { None } else { Some(vec![coupling]) },
            units: UnitSystem::Natural,
        };
        Self { half_width, points, centers, sigma, params, dt, steps, record_every }
    }

    fn initial(&self, axis: &GridAxis<f64>) -> Vec<Complex<f64>> {
        let h = axis.spacing(Boundary::Periodic);
        let mut psi: Vec<Complex<f64>> = (0..axis.n)
            .map(|i| {
                let x = axis.coord(i, Boundary::Periodic);
                let v: f64 = self.centers.iter().map(|c| (-(x - c) * (x - c) / (4.0 * self.sigma * self.sigma)).exp()).sum();
                Complex::new(v, 0.0)
            })
            .collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
        for z in psi.iter_mut() {
            *z /= norm.sqrt();
        }
        psi
    }

    pub(super) fn run(&self) -> Result<Output, BenchError> {
        let axis = GridAxis::new(-self.half_width, self.half_width, self.points);
        let psi = self.initial(&axis);
        let index = |x: f64| ((x - axis.lower) / axis.spacing(Boundary::Periodic)).round() as usize % axis.n;
        let (il, ir) = (index(self.centers[0]), index(*self.centers.last().expect("validated")));
        let mass = self.params.masses[0];
        let free = CslParams { lambda: 0.0, ..self.params.clone() };
        let mut rho = GridDensityMatrix::pure(axis, &psi);
        let mut reference = rho.clone();
        let mut table = Table::new("master", &["t", "coherence", "coherence_free", "kinetic_energy", "trace"]);
        let record = |t: f64, rho: &GridDensityMatrix<f64>, reference: &GridDensityMatrix<f64>, table: &mut Table| {
            table.push_numbers(&[t, rho.get(il, ir).norm(), reference.get(il, ir).norm(), kinetic_energy(rho, mass, 1.0), rho.trace()]);
        };
        record(0.0, &rho, &reference, &mut table);
        let e0 = kinetic_energy(&rho, mass, 1.0);
        let mut done = 0;
        while done < self.steps {
            let chunk = self.record_every.min(self.steps - done);
            particle_master_equation(&mut rho, 0, &self.params, None, self.dt, chunk).map_err(numerical("master equation"))?;
            particle_master_equation(&mut reference, 0, &free, None, self.dt, chunk).map_err(numerical("master equation"))?;
            done += chunk;
            record(done as f64 * self.dt, &rho, &reference, &mut table);
        }
        let t_end = self.steps as f64 * self.dt;
        let ratio = rho.get(il, ir).norm() / reference.get(il, ir).norm();
        let separation = (self.centers.last().expect("validated") - self.centers[0]).abs();
        let g = self.params.coupling(0);
        let predicted_rate = collapse_kernel(self.params.lambda, g, self.params.a, separation);
        let slope = (kinetic_energy(&rho, mass, 1.0) - e0) / t_end;
        // One dimension carries a third of the three-dimensional gain.
        let predicted_slope = energy_gain_rate(&self.params).map_err(numerical("energy gain"))? / 3.0;
        let summary = json!({
            "separation": separation,
            "decay_rate": if il != ir { -ratio.ln() / t_end } else { 0.0 },
            "predicted_decay_rate": predicted_rate,
            "energy_slope": slope,
            "predicted_energy_slope": predicted_slope,
            "trace_error": (rho.trace() - 1.0).abs(),
        });
        Ok(Output { tables: vec![table], summary })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlHits {
    pub amplitudes: [f64; 2],
    pub separation: f64,
    pub sigma: f64,
    pub a: f64,
    pub lambda_hit: f64,
    pub t_end: f64,
    pub runs: usize,
    pub half_width: f64,
    pub points: usize,
    pub clump_particles: Vec<usize>,
    pub clump_runs: usize,
    pub clump_probes: usize,
}

impl SlHits {
    pub(super) fn parse(p: &mut Params) -> Self {
        let amps = p.float_list("amplitudes");
        p.require(amps.len() == 2, "amplitudes", "needs two amplitudes");
        normalized(p, "amplitudes", &amps);
        let amplitudes = [amps.first().copied().unwrap_or(0.0), amps.get(1).copied().unwrap_or(0.0)];
        let separation = p.quantity("separation", Natural);
        let sigma = p.quantity("sigma", Natural);
        let a = p.quantity("a", Natural);
        let lambda_hit = p.quantity("lambda_hit", Natural);
        let t_end = p.quantity("t_end", Natural);
        for (v, n) in [(separation, "separation"), (sigma, "sigma"), (a, "a"), (lambda_hit, "lambda_hit"), (t_end, "t_end")] {
            p.positive(v, n);
        }
        let runs = p.count("runs");
        p.require(runs >= 2, "runs", "must be at least 2");
        let half_width = p.quantity_or("half_width", Natural, 1.2 * separation + 10.0 * sigma);
        p.require(half_width > separation / 2.0 + 5.0 * sigma, "half_width", "grid must hold both packets");
        let points = p.count_or("points", 256);
        p.require(points >= 16 && points.is_power_of_two(), "points", "must be a power of two >= 16");
        let clump_particles = p.count_list_or("clump_particles", &[1, 2, 4, 8]);
        p.require(clump_particles.iter().all(|&n| n >= 1), "clump_particles", "entries must be >= 1");
        let clump_runs = p.count_or("clump_runs", runs);
        p.require(clump_runs >= 2, "clump_runs", "must be at least 2");
        let clump_probes = p.count_or("clump_probes", 8);
        p.require(clump_probes >= 2, "clump_probes", "must be at least 2");
        Self { amplitudes, separation, sigma, a, lambda_hit, t_end, runs, half_width, points, clump_particles, clump_runs, clump_probes }
    }

    fn two_packets(&self, axis: &GridAxis<f64>) -> Vec<Complex<f64>> {
        let s = self.sigma;
        let g = |x: f64, c: f64| (-(x - c) * (x - c) / (4.0 * s * s)).exp();
        let d = self.separation / 2.0;
        let mut psi: Vec<Complex<f64>> = (0..axis.n)
            .map(|i| {
                let x = axis.coord(i, Boundary::Periodic);
                Complex::new(self.amplitudes[0] * g(x, -d) + self.amplitudes[1] * g(x, d), 0.0)
            })
            .collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * axis.spacing(Boundary::Periodic);
        for z in psi.iter_mut() {
            *z /= norm.sqrt();
        }
        psi
    }

    pub(super) fn run(&self, seed: u64) -> Result<Output, BenchError> {
        let axis = GridAxis::new(-self.half_width, self.half_width, self.points);
        let psi = self.two_packets(&axis);
        let cfg = SlConfig { lambda_hit: self.lambda_hit, a: self.a, t_end: self.t_end, seed };
        let runs = sl_ensemble(&axis, &psi, &cfg, self.runs).map_err(numerical("hits"))?;
        let h = axis.spacing(Boundary::Periodic);
        let mut outcomes = Table::new("outcomes", &["run", "hits", "left_weight"]);
        let mut left = 0usize;
        for (i, r) in runs.iter().enumerate() {
            let w: f64 = r
                .final_state
                .iter()
                .enumerate()
                .filter(|(j, _)| axis.coord(*j, Boundary::Periodic) < 0.0)
                .map(|(_, z)| z.norm_sqr())
                .sum::<f64>()
                * h;
            left += (w > 0.5) as usize;
            outcomes.push_numbers(&[i as f64, r.hits.len() as f64, w]);
        }
        let n = runs.len() as f64;
        let p_left = self.amplitudes[0].powi(2);
        let freq = left as f64 / n;
        let sigma = (p_left * (1.0 - p_left) / n).sqrt();

        let mut clump = Table::new("clump", &["particles", "t", "coherence", "sigma"]);
        let mut fits = Vec::new();
        for (k, &particles) in self.clump_particles.iter().enumerate() {
            let horizon = 2.0 / (self.lambda_hit * particles as f64);
            let cfg = ClumpConfig {
                particles,
                amplitudes: self.amplitudes,
                separation: self.separation,
                a: self.a,
                lambda_hit: self.lambda_hit,
                times: (0..=self.clump_probes).map(|j| horizon * j as f64 / self.clump_probes as f64).collect(),
                runs: self.clump_runs,
                seed: rng::derive_seed(seed, k as u64),
            };
            let rep = clump_collapse(&cfg).map_err(numerical("clump"))?;
            for j in 0..rep.times.len() {
                clump.push_numbers(&[particles as f64, rep.times[j], rep.coherence[j], rep.sigma[j]]);
            }
            let expected = self.lambda_hit * particles as f64;
            fits.push(json!({"particles": particles, "fitted_rate": rep.fitted_rate, "expected_rate": expected, "relative_error": rep.fitted_rate / expected - 1.0}));
        }
        let summary = json!({
            "runs": runs.len(),
            "left_frequency": freq,
            "sigma": sigma,
            "born_left": p_left,
            "z": (freq - p_left) / sigma,
            "clump": fits,
        });
        Ok(Output { tables: vec![outcomes, clump], summary })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gambler {
    pub x0: f64,
    pub stake: f64,
    pub runs: usize,
    pub record_steps: Vec<usize>,
}

impl Gambler {
    pub(super) fn parse(p: &mut Params) -> Self {
        let x0 = p.float("x0");
        p.require((0.0..=1.0).contains(&x0), "x0", "must lie in [0, 1]");
        let stake = p.float("stake");
        p.require(stake > 0.0 && stake <= 1.0, "stake", "must lie in (0, 1]");
        let runs = p.count("runs");
        p.require(runs >= 2, "runs", "must be at least 2");
        let record_steps = p.count_list_or("record_steps", &[0, 10, 100, 1000]);
        Self { x0, stake, runs, record_steps }
    }

    pub(super) fn run(&self, seed: u64) -> Result<Output, BenchError> {
        let rep = gambler_ruin(self.x0, self.stake, self.runs, &self.record_steps, seed).map_err(numerical("gambler's ruin"))?;
        let mut table = Table::new("fractions", &["step", "mean_fraction", "sigma_fraction"]);
        for k in 0..rep.steps.len() {
            table.push_numbers(&[rep.steps[k] as f64, rep.mean_fraction[k], rep.sigma_fraction[k]]);
        }
        let summary = json!({
            "runs": rep.runs,
            "win_frequency": rep.win_frequency,
            "sigma": rep.sigma,
            "x0": self.x0,
            "z": if rep.sigma > 0.0 { (rep.win_frequency - self.x0) / rep.sigma } else { 0.0 },
            "max_abs_z": rep.max_abs_z,
        });
        Ok(Output { tables: vec![table], summary })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Predict {
    pub lambda: f64,
    pub a: f64,
    pub radius: f64,
    pub density: f64,
    pub time: f64,
    pub interference_nucleons: f64,
    pub interference_time: f64,
}

impl Predict {
    pub(super) fn parse(p: &mut Params) -> Self {
        let c = constants();
        let lambda = p.quantity_or("lambda", Rate, c.sl.lambda);
        let a = p.quantity_or("a", Length, c.sl.a);
        let radius = p.quantity("radius", Length);
        let density = p.quantity("density", MassDensity);
        let time = p.quantity("time", Time);
        let interference_nucleons = p.float("interference_nucleons");
        let interference_time = p.quantity("interference_time", Time);
        for (v, n) in [
            (lambda, "lambda"),
            (a, "a"),
            (radius, "radius"),
            (density, "density"),
            (interference_nucleons, "interference_nucleons"),
            (interference_time, "interference_time"),
        ] {
            p.positive(v, n);
        }
        p.require(time >= 0.0, "time", "must be non-negative");
        Self { lambda, a, radius, density, time, interference_nucleons, interference_time }
    }

    pub(super) fn run(&self) -> Result<Output, BenchError> {
        let params = CslParams { lambda: self.lambda, a: self.a, ..CslParams::<f64>::sl_nucleons(1) };
        let n = sphere_nucleons(self.radius, self.density);
        let walk = random_walk_predictions(n, &params, self.time).map_err(numerical("random walk"))?;
        let verdict =
            interference_criterion(self.interference_nucleons, self.interference_time, self.lambda).map_err(numerical("interference"))?;
        let gain = energy_gain_rate_ev(&params).map_err(numerical("energy gain"))?;
        let mut table = Table::new("predictions", &["quantity", "value", "unit"]);
        for (q, v, u) in [
            ("nucleons", n, "1"),
            ("packet_size", walk.size, "m"),
            ("settle_time", walk.settle_time, "s"),
            ("delta_q_scale", walk.delta_q_scale, "m"),
            ("rms_displacement", walk.rms_displacement, "m"),
            ("interference_decay_factor", verdict.decay_factor, "1"),
            ("interference_threshold", verdict.threshold, "s"),
            ("energy_gain_per_nucleon", gain, "eV/s"),
        ] {
            table.rows.push(vec![q.to_string(), num(v), u.to_string()]);
        }
        let summary = json!({
            "nucleons": n,
            "walk": to_json(&walk),
            "interference": to_json(&verdict),
            "energy_gain_ev_per_s": gain,
        });
        Ok(Output { tables: vec![table], summary })
    }
}
