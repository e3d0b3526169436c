//! Classical pitch/roll estimators the network is compared against. Each is
//! a step function over [`ImuSample`]s; [`FilterParams`] and [`run_filter`]
//! wrap them for whole sequences.

mod complementary;
mod ekf;
mod madgwick;
mod mahony;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use complementary::{adaptive_gamma, complementary_step, ComplementaryParams, ComplementaryState};
pub use ekf::{ekf_step, EkfParams, P0_SCALE};
pub use madgwick::{gravity_jacobian, madgwick_gradient, madgwick_step, MadgwickParams};
pub use mahony::{mahony_error, mahony_step, MahonyParams};

use crate::domain::{EulerAngles, ImuSample, Quaternion, Sequence, Vec3};
use crate::error::{Error, Result};

/// First-order quaternion integration of a body rate, renormalized:
/// `q + ½ q ⊗ p(ω) Δt`.
pub fn gyro_propagate(q: &Quaternion, gyro: Vec3, dt: f64) -> Quaternion {
    let qdot = q.hamilton(&Quaternion::pure(gyro)).scale(0.5);
    q.add(&qdot.scale(dt)).normalized()
}

/// Pitch/roll trace of pure gyro integration from `init`.
pub fn gyro_integrate(seq: &Sequence, init: InitialState) -> Vec<EulerAngles> {
    let mut q = init.quaternion(seq);
    seq.samples()
        .iter()
        .map(|s| {
            q = gyro_propagate(&q, s.gyro, seq.dt());
            quat_angles(&q)
        })
        .collect()
}

fn quat_angles(q: &Quaternion) -> EulerAngles {
    let (roll, pitch, _) = q.to_euler_zyx();
    EulerAngles::new(pitch, roll)
}

/// What a filter knows about the attitude at the first sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitialState {
    /// Level, zero bias, `P = 0.5·I`.
    #[default]
    Uninformed,
    /// Start from the ground truth of the first sample.
    Truth,
    Known(EulerAngles),
}

impl InitialState {
    pub fn angles(&self, seq: &Sequence) -> EulerAngles {
        match self {
            InitialState::Uninformed => EulerAngles::zero(),
            InitialState::Truth => seq.truth().first().copied().unwrap_or_default(),
            InitialState::Known(a) => *a,
        }
    }

    fn quaternion(&self, seq: &Sequence) -> Quaternion {
        Quaternion::from_euler(self.angles(seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Complementary,
    Mahony,
    Madgwick,
    Ekf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [
        FilterKind::Complementary,
        FilterKind::Mahony,
        FilterKind::Madgwick,
        FilterKind::Ekf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Complementary => "complementary",
            FilterKind::Mahony => "mahony",
            FilterKind::Madgwick => "madgwick",
            FilterKind::Ekf => "ekf",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown filter `{s}`")))
    }
}

/// Tunable scalars of one filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FilterParams {
    Complementary(ComplementaryParams),
    Mahony(MahonyParams),
    Madgwick(MadgwickParams),
    Ekf(EkfParams),
}

impl FilterParams {
    pub fn default_for(kind: FilterKind) -> Self {
        match kind {
            FilterKind::Complementary => FilterParams::Complementary(Default::default()),
            FilterKind::Mahony => FilterParams::Mahony(Default::default()),
            FilterKind::Madgwick => FilterParams::Madgwick(Default::default()),
            FilterKind::Ekf => FilterParams::Ekf(Default::default()),
        }
    }

    pub fn kind(&self) -> FilterKind {
        match self {
            FilterParams::Complementary(_) => FilterKind::Complementary,
            FilterParams::Mahony(_) => FilterKind::Mahony,
            FilterParams::Madgwick(_) => FilterKind::Madgwick,
            FilterParams::Ekf(_) => FilterKind::Ekf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FilterParams::Complementary(p) => p.validate(),
            FilterParams::Mahony(p) => p.validate(),
            FilterParams::Madgwick(p) => p.validate(),
            FilterParams::Ekf(p) => p.validate(),
        }
    }

    /// `key=value` pairs in file order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![("filter", self.kind().name().to_string())];
        match self {
            FilterParams::Complementary(p) => {
                v.push(("gamma", p.gamma.to_string()));
                v.push(("adaptive", p.adaptive.to_string()));
                v.push(("k_a", p.k_a.to_string()));
                v.push(("omega_gate", p.omega_gate.to_string()));
            }
            FilterParams::Mahony(p) => {
                v.push(("k_p", p.k_p.to_string()));
                v.push(("k_i", p.k_i.to_string()));
            }
            FilterParams::Madgwick(p) => v.push(("beta", p.beta.to_string())),
            FilterParams::Ekf(p) => {
                v.push(("q_proc", p.q_proc.to_string()));
                v.push(("r_meas", p.r_meas.to_string()));
            }
        }
        v
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Parses a flat `key=value` file. Blank lines and `#` comments are
    /// ignored. Keys missing from the file keep their defaults; `filter`
    /// may be omitted when `kind` is given.
    pub fn parse(text: &str, kind: Option<FilterKind>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key=value", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let declared = pairs
            .iter()
            .find(|(k, _)| k == "filter")
            .map(|(_, v)| v.parse::<FilterKind>())
            .transpose()?;
        let kind = match (declared, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Format(format!("parameter file is for {a}, expected {b}")))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Format("parameter file does not name its filter".into())),
        };
        let mut params = FilterParams::default_for(kind);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "filter") {
            params.set(k, v)?;
        }
        params.validate()?;
        Ok(params)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("`{key}`: `{value}` is not a number")))
        };
        match (self, key) {
            (FilterParams::Complementary(p), "gamma") => p.gamma = num()?,
            (FilterParams::Complementary(p), "k_a") => p.k_a = num()?,
            (FilterParams::Complementary(p), "omega_gate") => p.omega_gate = num()?,
            (FilterParams::Complementary(p), "adaptive") => {
                p.adaptive = value
                    .parse()
                    .map_err(|_| Error::Format(format!("`adaptive`: `{value}` is not a boolean")))?
            }
            (FilterParams::Mahony(p), "k_p") => p.k_p = num()?,
            (FilterParams::Mahony(p), "k_i") => p.k_i = num()?,
            (FilterParams::Madgwick(p), "beta") => p.beta = num()?,
            (FilterParams::Ekf(p), "q_proc") => p.q_proc = num()?,
            (FilterParams::Ekf(p), "r_meas") => p.r_meas = num()?,
            (p, k) => return Err(Error::Format(format!("unknown key `{k}` for {}", p.kind()))),
        }
        Ok(())
    }

    pub fn load(path: &Path, kind: Option<FilterKind>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, kind)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Running state of any filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterState {
    Complementary(ComplementaryParams, ComplementaryState),
    Mahony(MahonyParams, Quaternion),
    Madgwick(MadgwickParams, Quaternion),
    Ekf(EkfParams, Quaternion),
}

impl FilterState {
    /// Fresh state: bias zeroed and `P` reset regardless of what `params` carries.
    pub fn new(params: &FilterParams, init: EulerAngles) -> Self {
        let q = Quaternion::from_euler(init);
        match *params {
            FilterParams::Complementary(p) => FilterState::Complementary(p, ComplementaryState::new(init)),
            FilterParams::Mahony(mut p) => {
                p.bias = [0.0; 3];
                FilterState::Mahony(p, q)
            }
            FilterParams::Madgwick(p) => FilterState::Madgwick(p, q),
            FilterParams::Ekf(mut p) => {
                p.reset_covariance();
                FilterState::Ekf(p, q)
            }
        }
    }

    pub fn step(&mut self, sample: &ImuSample, dt: f64) -> EulerAngles {
        match self {
            FilterState::Complementary(p, s) => {
                *s = complementary_step(*s, p, sample, dt);
                s.angles
            }
            FilterState::Mahony(p, q) => {
                *q = mahony_step(q, p, sample, dt);
                quat_angles(q)
            }
            FilterState::Madgwick(p, q) => {
                *q = madgwick_step(q, p, sample, dt);
                quat_angles(q)
            }
            FilterState::Ekf(p, q) => {
                let (nq, np) = ekf_step(q, p, sample, dt);
                *q = nq;
                *p = np;
                quat_angles(q)
            }
        }
    }

    pub fn quaternion(&self) -> Quaternion {
        match self {
            FilterState::Complementary(_, s) => Quaternion::from_euler_zyx(s.angles.roll, s.angles.pitch, s.yaw),
            FilterState::Mahony(_, q) | FilterState::Madgwick(_, q) | FilterState::Ekf(_, q) => *q,
        }
    }
}

/// Runs a filter over a whole sequence and returns one estimate per sample.
pub fn run_filter(params: &FilterParams, seq: &Sequence, init: InitialState) -> Result<Vec<EulerAngles>> {
    params.validate()?;
    let mut st = FilterState::new(params, init.angles(seq));
    Ok(seq.samples().iter().map(|s| st.step(s, seq.dt())).collect())
}
