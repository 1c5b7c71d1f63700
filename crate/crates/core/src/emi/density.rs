//! Density models over residuals: Gaussian KDE for continuous values,
//! Laplace-smoothed frequencies for discrete states, and their joint forms.

use std::f64::consts::PI;

use super::residual::ResidualSeries;
use crate::error::{Error, Result};

/// Lower bound applied to every density before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-12;
pub const MIN_BANDWIDTH: f64 = 1e-6;

fn sample_stddev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Silverman's rule `1.06 * sigma * n^(-1/5)`, floored.
pub fn silverman_bandwidth(sigma: f64, n: usize) -> f64 {
    (1.06 * sigma * (n as f64).powf(-0.2)).max(MIN_BANDWIDTH)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    pub points: Vec<f64>,
    pub bandwidth: f64,
}

impl Kde {
    pub fn fit(points: &[f64]) -> Self {
        let bw = silverman_bandwidth(sample_stddev(points), points.len());
        Kde::with_bandwidth(points, bw)
    }

    pub fn with_bandwidth(points: &[f64], bandwidth: f64) -> Self {
        Kde {
            points: points.to_vec(),
            bandwidth: bandwidth.max(MIN_BANDWIDTH),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.points.len() as f64 * h * (2.0 * PI).sqrt());
        let s: f64 = self
            .points
            .iter()
            .map(|p| {
                let u = (x - p) / h;
                (-0.5 * u * u).exp()
            })
            .sum();
        (s * norm).max(DENSITY_FLOOR)
    }
}

/// Product-kernel 2-D KDE with independent per-axis bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde2 {
    pub points: Vec<(f64, f64)>,
    pub bandwidth: (f64, f64),
}

impl Kde2 {
    pub fn fit(a: &[f64], b: &[f64]) -> Self {
        let n = a.len();
        Kde2 {
            points: a.iter().copied().zip(b.iter().copied()).collect(),
            bandwidth: (
                silverman_bandwidth(sample_stddev(a), n),
                silverman_bandwidth(sample_stddev(b), n),
            ),
        }
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        let (ha, hb) = self.bandwidth;
        let norm = 1.0 / (self.points.len() as f64 * ha * hb * 2.0 * PI);
        let s: f64 = self
            .points
            .iter()
            .map(|(pa, pb)| {
                let u = (x - pa) / ha;
                let v = (y - pb) / hb;
                (-0.5 * u * u).exp() * (-0.5 * v * v).exp()
            })
            .sum();
        (s * norm).max(DENSITY_FLOOR)
    }
}

/// Add-one smoothed state frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequency {
    pub counts: Vec<usize>,
    pub total: usize,
}

impl Frequency {
    pub fn fit(states: &[usize], alphabet: usize) -> Self {
        let mut counts = vec![1usize; alphabet];
        for &s in states {
            counts[s] += 1;
        }
        Frequency {
            total: states.len() + alphabet,
            counts,
        }
    }

    pub fn probability(&self, state: usize) -> f64 {
        self.counts
            .get(state)
            .map_or(DENSITY_FLOOR, |&c| c as f64 / self.total as f64)
            .max(DENSITY_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    Kde(Kde),
    Frequency(Frequency),
    Joint2dKde(Kde2),
    /// Discrete-discrete pair: frequency over the product alphabet.
    JointFrequency {
        freq: Frequency,
        alphabet_b: usize,
    },
    /// Continuous-discrete pair: p(c, d) = p(c | d) p(d).
    MixedConditional {
        per_state: Vec<Option<Kde>>,
        states: Frequency,
    },
}

/// A residual observation fed to [`DensityModel::density`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obs {
    Value(f64),
    State(usize),
}

impl DensityModel {
    pub fn density(&self, obs: &[Obs]) -> f64 {
        match (self, obs) {
            (DensityModel::Kde(k), [Obs::Value(x)]) => k.density(*x),
            (DensityModel::Frequency(f), [Obs::State(s)]) => f.probability(*s),
            (DensityModel::Joint2dKde(k), [Obs::Value(a), Obs::Value(b)]) => k.density(*a, *b),
            (DensityModel::JointFrequency { freq, alphabet_b }, [Obs::State(a), Obs::State(b)]) => {
                freq.probability(a * alphabet_b + b)
            }
            (DensityModel::MixedConditional { per_state, states }, [Obs::Value(c), Obs::State(d)])
            | (DensityModel::MixedConditional { per_state, states }, [Obs::State(d), Obs::Value(c)]) => {
                let cond = per_state
                    .get(*d)
                    .and_then(Option::as_ref)
                    .map_or(DENSITY_FLOOR, |k| k.density(*c));
                (cond * states.probability(*d)).max(DENSITY_FLOOR)
            }
            _ => panic!("observation shape does not match density model"),
        }
    }
}

pub fn estimate_density(residuals: &ResidualSeries) -> Result<DensityModel> {
    if residuals.len() < 2 {
        return Err(Error::TooFewObservations(residuals.len()));
    }
    Ok(match residuals {
        ResidualSeries::Continuous(v) => DensityModel::Kde(Kde::fit(v)),
        ResidualSeries::Discrete { states, alphabet } => DensityModel::Frequency(Frequency::fit(states, *alphabet)),
    })
}

pub fn estimate_joint_density(a: &ResidualSeries, b: &ResidualSeries) -> Result<DensityModel> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::TooFewObservations(a.len()));
    }
    Ok(match (a, b) {
        (ResidualSeries::Continuous(x), ResidualSeries::Continuous(y)) => DensityModel::Joint2dKde(Kde2::fit(x, y)),
        (
            ResidualSeries::Discrete {
                states: sa,
                alphabet: na,
            },
            ResidualSeries::Discrete {
                states: sb,
                alphabet: nb,
            },
        ) => {
            let joint: Vec<usize> = sa.iter().zip(sb).map(|(x, y)| x * nb + y).collect();
            DensityModel::JointFrequency {
                freq: Frequency::fit(&joint, na * nb),
                alphabet_b: *nb,
            }
        }
        (ResidualSeries::Continuous(c), ResidualSeries::Discrete { states, alphabet })
        | (ResidualSeries::Discrete { states, alphabet }, ResidualSeries::Continuous(c)) => {
            mixed_conditional(c, states, *alphabet)
        }
    })
}

/// Per-state KDEs. States with fewer than two observations (or no spread)
/// borrow the pooled standard deviation for their bandwidth.
fn mixed_conditional(c: &[f64], states: &[usize], alphabet: usize) -> DensityModel {
    let pooled = sample_stddev(c);
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); alphabet];
    for (&v, &s) in c.iter().zip(states) {
        groups[s].push(v);
    }
    let per_state = groups
        .into_iter()
        .map(|g| {
            if g.is_empty() {
                return None;
            }
            let sd = sample_stddev(&g);
            let sigma = if g.len() < 2 || sd <= 0.0 { pooled } else { sd };
            Some(Kde::with_bandwidth(&g, silverman_bandwidth(sigma, g.len())))
        })
        .collect();
    DensityModel::MixedConditional {
        per_state,
        states: Frequency::fit(states, alphabet),
    }
}
