use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Relax,
    Subq,
    Distinguish,
    Signal,
    HvSinglet,
    HvPhoton,
    CslRun,
    CslMaster,
    SlHits,
    Gambler,
    Predict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub description: &'static str,
    /// The physical relation the experiment exercises.
    pub reference: &'static str,
}

impl Kind {
    pub const ALL: [Kind; 11] = [
        Kind::Relax,
        Kind::Subq,
        Kind::Distinguish,
        Kind::Signal,
        Kind::HvSinglet,
        Kind::HvPhoton,
        Kind::CslRun,
        Kind::CslMaster,
        Kind::SlHits,
        Kind::Gambler,
        Kind::Predict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Relax => "relax",
            Kind::Subq => "subq",
            Kind::Distinguish => "distinguish",
            Kind::Signal => "signal",
            Kind::HvSinglet => "hv-singlet",
            Kind::HvPhoton => "hv-photon",
            Kind::CslRun => "csl-run",
            Kind::CslMaster => "csl-master",
            Kind::SlHits => "sl-hits",
            Kind::Gambler => "gambler",
            Kind::Predict => "predict",
        }
    }

    pub fn from_name(name: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn entry(self) -> CatalogEntry {
        let (description, reference) = match self {
            Kind::Relax => (
                "coarse-grained H-function of a box ensemble carried by de Broglie trajectories, with Born chi-square per probe",
                "H-theorem for H = ∫ P ln(P/|Ψ|²); equivariance of f = P/|Ψ|²",
            ),
            Kind::Subq => {
                ("impulsive pointer measurement with a narrow nonequilibrium pointer", "guidance flow of H = a x p_y; error bound w/(2at)")
            }
            Kind::Distinguish => (
                "telling two nonorthogonal box states apart from two subquantum position readings",
                "trajectory velocity fields differ for distinct ψ",
            ),
            Kind::Signal => (
                "change of A's position distribution after a quench at B in an entangled pair",
                "nonlocal signal Δp_A ∝ t² for nonequilibrium ensembles",
            ),
            Kind::HvSinglet => (
                "threshold hidden-variable model of the singlet: correlations and transition sets",
                "⟨σ_A σ_B⟩ = −cos θ; detailed balance of transition sets",
            ),
            Kind::HvPhoton => {
                ("transmission curve of a two-state system with a hidden variable in [0, 1)", "p⁺ = ½(1 + P cos 2Θ) in equilibrium")
            }
            Kind::CslRun => (
                "stochastic collapse of a finite-dimensional state with raw or cooked noise",
                "norm-altering linear SSE with the noise probability rule; martingale of |c_n|²",
            ),
            Kind::CslMaster => {
                ("one-particle position master equation on a periodic grid", "Lindblad decay λg²(1 − e^{−d²/4a²}) and energy gain")
            }
            Kind::SlHits => (
                "Poisson-timed Gaussian hits on a two-location superposition and on an N-particle clump",
                "hit rate λ per particle; collapse rate λN",
            ),
            Kind::Gambler => (
                "fair-coin gambler's ruin as a classical model of collapse statistics",
                "martingale fortune; win probability equals initial share",
            ),
            Kind::Predict => (
                "SI predictions for localization: packet size, settling time, random walk, interference, energy gain",
                "s = (a²ħ/λ m_p N³)^{1/4}, τ_s = N m_p s²/ħ, ΔQ ∝ t^{3/2}, λN²ΔT",
            ),
        };
        CatalogEntry { kind: self.name(), description, reference }
    }
}

pub fn list_experiments() -> Vec<CatalogEntry> {
    Kind::ALL.iter().map(|k| k.entry()).collect()
}
