//! Graph-convolutional variational autoencoder and the two per-sample
//! anomalous-degree measures it yields: the element-wise reconstruction
//! error `d` of the latent-mean decode and the latent standard deviation.

mod model;

use std::fmt::Write as _;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Activation;

pub use model::{ReconData, ReconModel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Static,
    /// Windows of `k` past steps reconstruct the following step.
    TimeSeries { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconConfig {
    pub gcn_order: usize,
    /// Encoder widths after the input layer; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub latent: usize,
    /// KL weight.
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// `false` replaces both graph convolutions with the identity.
    pub use_gcn: bool,
    pub lstm_layers: usize,
    /// Defaults to the encoded width `m`.
    pub lstm_hidden: Option<usize>,
    pub variant: Variant,
    /// Activation of the last decoder layer, ahead of the output graph
    /// convolution. Identity by default: a ReLU here confines outputs to a
    /// pointed cone, which cannot cover sign-symmetric z-scored inputs.
    pub decoder_output: Activation,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            gcn_order: 2,
            hidden: vec![60, 30, 10],
            latent: 5,
            lambda: 1.0,
            epochs: 100,
            batch_size: 256,
            lr: 1e-3,
            use_gcn: true,
            lstm_layers: 2,
            lstm_hidden: None,
            variant: Variant::Static,
            decoder_output: Activation::Identity,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("recon: {m}")));
        if self.hidden.contains(&0) || self.latent == 0 {
            return bad("layer widths must be positive");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        if self.batch_size == 0 || self.gcn_order == 0 {
            return bad("batch_size and gcn_order must be >= 1");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be > 0");
        }
        if let Variant::TimeSeries { k } = self.variant {
            if k == 0 || self.lstm_layers == 0 || self.lstm_hidden == Some(0) {
                return bad("window, lstm_layers and lstm_hidden must be >= 1");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

pub fn history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,total,recon,kl\n");
    for e in history {
        let _ = writeln!(out, "{},{},{},{}", e.epoch, e.total, e.recon, e.kl);
    }
    out
}

/// Mean over the batch of `‖x - x̂‖²` and of the closed-form
/// `KL(N(μ, σ²) ‖ N(0, I))`; returns `(total, recon, kl)`.
pub fn vae_loss(
    x: &Array2<f64>,
    x_hat: &Array2<f64>,
    mu: &Array2<f64>,
    sigma: &Array2<f64>,
    lambda: f64,
) -> (f64, f64, f64) {
    let n = x.nrows().max(1) as f64;
    let recon = (x - x_hat).mapv(|v| v * v).sum() / n;
    let kl = gaussian_kl(mu, sigma).sum() / n;
    (recon + lambda * kl, recon, kl)
}

/// Per-sample KL divergence to the standard normal prior.
pub fn gaussian_kl(mu: &Array2<f64>, sigma: &Array2<f64>) -> ndarray::Array1<f64> {
    let mut terms = mu.clone();
    ndarray::Zip::from(&mut terms).and(sigma).for_each(|t, &s| {
        let m = *t;
        *t = -0.5 * (1.0 + (s * s).ln() - m * m - s * s);
    });
    terms.sum_axis(Axis(1))
}

/// `z = μ + σ ⊙ η` with `η ~ N(0, I)` drawn row-major from `rng`.
pub fn reparameterize<R: rand::Rng>(mu: &Array2<f64>, sigma: &Array2<f64>, rng: &mut R) -> Array2<f64> {
    let eta = Array2::from_shape_simple_fn(mu.dim(), || rng.sample::<f64, _>(rand_distr::StandardNormal));
    mu + &(sigma * &eta)
}

/// Per-sample measures, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMeasures {
    /// Squared reconstruction error per encoded dimension, `n×m`.
    pub d: Array2<f64>,
    pub mu: Array2<f64>,
    /// Latent standard deviation, `n×latent`, strictly positive.
    pub sigma: Array2<f64>,
}

fn row_norms(a: &Array2<f64>) -> Vec<f64> {
    a.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

impl AnomalyMeasures {
    pub fn len(&self) -> usize {
        self.d.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_norms(&self) -> Vec<f64> {
        row_norms(&self.d)
    }

    pub fn sigma_norms(&self) -> Vec<f64> {
        row_norms(&self.sigma)
    }

    pub fn select_rows(&self, rows: &[usize]) -> AnomalyMeasures {
        AnomalyMeasures {
            d: self.d.select(Axis(0), rows),
            mu: self.mu.select(Axis(0), rows),
            sigma: self.sigma.select(Axis(0), rows),
        }
    }

    /// `id,d_norm,sigma_norm,d:<dim>...,mu_<j>...,sigma_<j>...`.
    pub fn to_csv(&self, ids: &[usize], dim_names: &[String]) -> String {
        assert_eq!(ids.len(), self.len());
        assert_eq!(dim_names.len(), self.d.ncols());
        let mut out = String::from("id,d_norm,sigma_norm");
        for n in dim_names {
            let _ = write!(out, ",d:{n}");
        }
        for j in 0..self.mu.ncols() {
            let _ = write!(out, ",mu_{j}");
        }
        for j in 0..self.sigma.ncols() {
            let _ = write!(out, ",sigma_{j}");
        }
        out.push('\n');
        let (dn, sn) = (self.d_norms(), self.sigma_norms());
        for (i, &id) in ids.iter().enumerate() {
            let _ = write!(out, "{id},{},{}", dn[i], sn[i]);
            for v in self.d.row(i).iter().chain(self.mu.row(i)).chain(self.sigma.row(i)) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`AnomalyMeasures::to_csv`]; returns ids and measures.
    pub fn from_csv(text: &str) -> Result<(Vec<usize>, AnomalyMeasures)> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        let count = |p: &str| {
            header
                .iter()
                .filter(|h| {
                    h.strip_prefix(p)
                        .is_some_and(|r| p == "d:" || r.parse::<usize>().is_ok())
                })
                .count()
        };
        let (m, latent) = (count("d:"), count("sigma_"));
        if header.len() != 3 + m + 2 * latent || count("mu_") != latent {
            return Err(Error::InvalidConfig("measures file has an unexpected header".into()));
        }
        let mut ids = Vec::new();
        let mut flat = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |j: usize| -> Result<f64> {
                rec[j].parse().map_err(|_| Error::UnparsableNumber {
                    row,
                    column: header[j].to_string(),
                    value: rec[j].to_string(),
                })
            };
            ids.push(rec[0].parse().map_err(|_| Error::UnparsableNumber {
                row,
                column: "id".into(),
                value: rec[0].to_string(),
            })?);
            for j in 3..header.len() {
                flat.push(num(j)?);
            }
        }
        let n = ids.len();
        let all = Array2::from_shape_vec((n, m + 2 * latent), flat).expect("row widths checked by csv");
        Ok((
            ids,
            AnomalyMeasures {
                d: all.slice(ndarray::s![.., ..m]).to_owned(),
                mu: all.slice(ndarray::s![.., m..m + latent]).to_owned(),
                sigma: all.slice(ndarray::s![.., m + latent..]).to_owned(),
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kl_closed_form_examples() {
        assert_eq!(gaussian_kl(&array![[0.0, 0.0]], &array![[1.0, 1.0]])[0], 0.0);
        assert_eq!(gaussian_kl(&array![[1.0]], &array![[1.0]])[0], 0.5);
        let x = array![[1.0, 2.0]];
        let (total, recon, kl) = vae_loss(&x, &x, &array![[1.0]], &array![[1.0]], 2.0);
        assert_eq!((total, recon, kl), (1.0, 0.0, 0.5));
    }

    #[test]
    fn reparameterize_limits() {
        let mu = array![[0.5, -2.0]];
        let z = reparameterize(&mu, &Array2::zeros((1, 2)), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(z, mu);
        let a = reparameterize(&mu, &array![[1.0, 2.0]], &mut ChaCha8Rng::seed_from_u64(4));
        let b = reparameterize(&mu, &array![[1.0, 2.0]], &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn reparameterize_sample_mean() {
        let n = 100_000;
        let mu = Array2::from_shape_fn((n, 2), |(_, j)| [1.5, -0.3][j]);
        let sigma = Array2::from_shape_fn((n, 2), |(_, j)| [0.4, 2.0][j]);
        let z = reparameterize(&mu, &sigma, &mut ChaCha8Rng::seed_from_u64(9));
        let mean = z.mean_axis(Axis(0)).unwrap();
        for j in 0..2 {
            let se = sigma[[0, j]] / (n as f64).sqrt();
            assert!((mean[j] - mu[[0, j]]).abs() < 3.0 * se, "{j}: {}", mean[j]);
        }
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(mu in -5.0..5.0f64, sigma in 1e-3..10.0f64) {
            prop_assert!(gaussian_kl(&array![[mu]], &array![[sigma]])[0] >= 0.0);
        }
    }

    #[test]
    fn measures_csv_round_trip() {
        let m = AnomalyMeasures {
            d: array![[0.1, 2.0], [0.0, 1e-300]],
            mu: array![[1.0], [-3.5]],
            sigma: array![[0.25], [1.0 / 3.0]],
        };
        let names = vec!["a".to_string(), "b=x".to_string()];
        let text = m.to_csv(&[4, 9], &names);
        let (ids, back) = AnomalyMeasures::from_csv(&text).unwrap();
        assert_eq!(ids, vec![4, 9]);
        assert_eq!(back, m);
    }
}
