use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::CostWeights;
use crate::error::{MltError, Result};
use crate::rng;
use crate::transport::LatentState;

/// Which layers take part in the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    ScOnly,
    FcOnly,
    #[default]
    ScFc,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::ScOnly, Ablation::FcOnly, Ablation::ScFc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Ablation::ScOnly => "sc_only",
            Ablation::FcOnly => "fc_only",
            Ablation::ScFc => "sc_fc",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = MltError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sc" | "sc_only" => Ok(Ablation::ScOnly),
            "fc" | "fc_only" => Ok(Ablation::FcOnly),
            "scfc" | "sc_fc" | "sc+fc" => Ok(Ablation::ScFc),
            other => Err(MltError::Validation(format!("unknown ablation '{other}'"))),
        }
    }
}

/// Where the feedback gain comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GainSource {
    /// Per-region gains on each layer, trained with the rest of the model.
    /// The layer's feedback term is `M diag(k)`.
    Learned { k_s: Vec<f64>, k_f: Vec<f64> },
    /// `K = R̃⁻¹ Mᵀ P` with `P` from the quadratic Riccati equation.
    Riccati,
}

impl GainSource {
    pub fn name(&self) -> &'static str {
        match self {
            GainSource::Learned { .. } => "learned",
            GainSource::Riccati => "riccati",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportParameters {
    pub h_s: Vec<f64>,
    pub h_f: Vec<f64>,
    pub gate: Vec<f64>,
    pub m_s: DMatrix<f64>,
    pub m_f: DMatrix<f64>,
    pub lambda_s: f64,
    pub lambda_f: f64,
    pub c: f64,
    pub k_source: GainSource,
    pub cost: CostWeights,
    pub ablation: Ablation,
}

impl TransportParameters {
    /// Default starting point: unit potential scale split evenly, couplings
    /// near the identity, zero learned gain.
    pub fn initial(n: usize, seed: u64) -> Self {
        let normal = Normal::new(0.0, 1e-2).expect("valid normal");
        let mut rs = rng::stream(seed, &[0x4d5f_73]);
        let mut rf = rng::stream(seed, &[0x4d5f_66]);
        let eye = DMatrix::<f64>::identity(n, n);
        let m_s = &eye + DMatrix::from_fn(n, n, |_, _| normal.sample(&mut rs));
        let m_f = &eye + DMatrix::from_fn(n, n, |_, _| normal.sample(&mut rf));
        TransportParameters {
            h_s: vec![0.5; n],
            h_f: vec![0.5; n],
            gate: vec![0.5; n],
            m_s,
            m_f,
            lambda_s: 0.1,
            lambda_f: 0.1,
            c: 0.1,
            k_source: GainSource::Learned {
                k_s: vec![0.0; n],
                k_f: vec![0.0; n],
            },
            cost: CostWeights::uniform(n, 1.0, 1.0).expect("positive weights"),
            ablation: Ablation::ScFc,
        }
    }

    pub fn n(&self) -> usize {
        self.h_s.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        for (what, len) in [
            ("h_f", self.h_f.len()),
            ("gate", self.gate.len()),
            ("m_s rows", self.m_s.nrows()),
            ("m_s cols", self.m_s.ncols()),
            ("m_f rows", self.m_f.nrows()),
            ("m_f cols", self.m_f.ncols()),
            ("cost weights", self.cost.n()),
        ] {
            if len != n {
                return Err(MltError::Dimension {
                    what: what.into(),
                    expected: n,
                    got: len,
                });
            }
        }
        if let GainSource::Learned { k_s, k_f } = &self.k_source {
            if k_s.len() != n || k_f.len() != n {
                return Err(MltError::Dimension {
                    what: "learned gains".into(),
                    expected: n,
                    got: k_s.len().min(k_f.len()),
                });
            }
            if !k_s.iter().chain(k_f).all(|v| v.is_finite()) {
                return Err(MltError::Invariant("learned gains must be finite".into()));
            }
        }
        if let Some(v) = self.h_s.iter().chain(&self.h_f).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(MltError::Invariant(format!("potential scale must be positive, found {v}")));
        }
        if let Some(v) = self.gate.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(MltError::Invariant(format!("gate must lie in (0,1), found {v}")));
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(MltError::Invariant(format!("diffusivity must be nonnegative, got {}", self.c)));
        }
        if !(self.lambda_s.is_finite() && self.lambda_f.is_finite()) {
            return Err(MltError::Invariant("coupling weights must be finite".into()));
        }
        if !self.m_s.iter().chain(self.m_f.iter()).all(|v| v.is_finite()) {
            return Err(MltError::Invariant("coupling matrices must be finite".into()));
        }
        self.cost.validate()
    }

    /// Composite potential scale `h_s + h_f`.
    pub fn scale(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.h_s.iter().zip(&self.h_f).map(|(a, b)| a + b))
    }
}

/// `u = h ⊙ x`
pub fn phi(x: &DVector<f64>, params: &TransportParameters) -> DVector<f64> {
    x.component_mul(&params.scale())
}

/// `x = u ⊘ h`
pub fn phi_inverse(u: &DVector<f64>, params: &TransportParameters) -> DVector<f64> {
    u.component_div(&params.scale())
}

/// Split `φ(x0)` between the layers by the gate.
pub fn init_latent(x0: &DVector<f64>, params: &TransportParameters) -> Result<LatentState> {
    if x0.len() != params.n() {
        return Err(MltError::Dimension {
            what: "baseline SUVR length".into(),
            expected: params.n(),
            got: x0.len(),
        });
    }
    let u = phi(x0, params);
    let u_s = DVector::from_fn(u.len(), |i, _| params.gate[i] * u[i]);
    let u_f = &u - &u_s;
    LatentState::new(u_s, u_f)
}
