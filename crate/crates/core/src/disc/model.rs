use std::collections::HashMap;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DiscConfig, TrainingSelection};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, Activation, Adam, AdamConfig, BatchNorm, Linear, Mode, ParamStore, Tape, Var};
use crate::recon::AnomalyMeasures;

const INFERENCE_CHUNK: usize = 1024;

/// `BN(width)` followed by elu, then a chain of elu layers.
#[derive(Debug, Clone, PartialEq)]
struct Stack {
    bn: BatchNorm,
    layers: Vec<Linear>,
}

impl Stack {
    fn new(store: &mut ParamStore, name: &str, widths: &[usize], last: Activation, rng: &mut ChaCha8Rng) -> Self {
        let bn = BatchNorm::new(store, &format!("{name}.bn"), widths[0]);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 2 == widths.len() { last } else { Activation::Elu };
                Linear::new(store, &format!("{name}.fc{i}"), w[0], w[1], act, rng)
            })
            .collect();
        Stack { bn, layers }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.bn.dim];
        w.extend(self.layers.iter().map(|l| l.out_dim));
        w
    }

    fn forward(&self, t: &mut Tape, store: &mut ParamStore, x: Var, mode: Mode) -> Result<Var> {
        let h = self.bn.forward(t, store, x, mode)?;
        self.chain(t, store, h)
    }

    fn forward_eval(&self, t: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.bn.forward_eval(t, store, x)?;
        self.chain(t, store, h)
    }

    fn chain(&self, t: &mut Tape, store: &ParamStore, normalized: Var) -> Result<Var> {
        let mut h = t.elu(normalized)?;
        for l in &self.layers {
            h = l.forward(t, store, h)?;
        }
        Ok(h)
    }
}

fn half(w: usize) -> usize {
    (w / 2).max(1)
}

#[derive(Serialize, Deserialize)]
struct Header {
    m: usize,
    m_sigma: usize,
    seed: u64,
    config: DiscConfig,
}

/// Two compression stacks over `d` and `σ_z`, concatenated into a
/// two-class head. Class 1 is the anomaly class.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscModel {
    pub config: DiscConfig,
    m: usize,
    m_sigma: usize,
    seed: u64,
    store: ParamStore,
    d_stack: Stack,
    sigma_stack: Option<Stack>,
    /// The last layer emits logits; softmax is applied by the caller.
    head: Stack,
    /// Weighted cross-entropy per epoch.
    pub history: Vec<f64>,
}

struct Batch {
    d: Array2<f64>,
    sigma: Array2<f64>,
}

impl DiscModel {
    pub fn build(config: &DiscConfig, m: usize, m_sigma: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if m < 4 {
            return Err(Error::InvalidConfig(format!("disc: encoded width {m} is below 4")));
        }
        if config.use_sigma && m_sigma == 0 {
            return Err(Error::InvalidConfig("disc: latent width must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d_widths = [m, half(m), half(half(m)), 10, 5];
        let d_stack = Stack::new(&mut store, "d", &d_widths, Activation::Elu, &mut rng);
        let sigma_stack = config.use_sigma.then(|| {
            Stack::new(
                &mut store,
                "sigma",
                &[m_sigma, half(m_sigma), 2],
                Activation::Elu,
                &mut rng,
            )
        });
        let joint = if config.use_sigma { 7 } else { 5 };
        let head = Stack::new(&mut store, "head", &[joint, 4, 2], Activation::Identity, &mut rng);
        Ok(DiscModel {
            config: config.clone(),
            m,
            m_sigma,
            seed,
            store,
            d_stack,
            sigma_stack,
            head,
            history: Vec::new(),
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn d_widths(&self) -> Vec<usize> {
        self.d_stack.widths()
    }

    pub fn sigma_widths(&self) -> Option<Vec<usize>> {
        self.sigma_stack.as_ref().map(Stack::widths)
    }

    pub fn head_widths(&self) -> Vec<usize> {
        self.head.widths()
    }

    fn check(&self, measures: &AnomalyMeasures) -> Result<()> {
        let (dw, sw) = (measures.d.ncols(), measures.sigma.ncols());
        if dw != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: dw,
            });
        }
        if self.sigma_stack.is_some() && sw != self.m_sigma {
            return Err(Error::DimensionMismatch {
                expected: self.m_sigma,
                actual: sw,
            });
        }
        Ok(())
    }

    fn logits(&self, t: &mut Tape, store: &mut ParamStore, b: &Batch, mode: Mode) -> Result<Var> {
        let d = t.constant(b.d.clone());
        let hd = self.d_stack.forward(t, store, d, mode)?;
        let joint = match &self.sigma_stack {
            Some(s) => {
                let sigma = t.constant(b.sigma.clone());
                let hs = s.forward(t, store, sigma, mode)?;
                t.concat_cols(&[hd, hs])?
            }
            None => hd,
        };
        self.head.forward(t, store, joint, mode)
    }

    fn logits_eval(&self, t: &mut Tape, b: &Batch) -> Result<Var> {
        let s = &self.store;
        let d = t.constant(b.d.clone());
        let hd = self.d_stack.forward_eval(t, s, d)?;
        let joint = match &self.sigma_stack {
            Some(stack) => {
                let sigma = t.constant(b.sigma.clone());
                let hs = stack.forward_eval(t, s, sigma)?;
                t.concat_cols(&[hd, hs])?
            }
            None => hd,
        };
        self.head.forward_eval(t, s, joint)
    }

    /// Class-weighted cross-entropy on the selected samples only, with
    /// weights `N / (2 N_c)` so both classes contribute equally. `ids[i]`
    /// names row `i` of `measures`.
    pub fn train(
        &mut self,
        measures: &AnomalyMeasures,
        ids: &[usize],
        selection: &TrainingSelection,
    ) -> Result<&[f64]> {
        self.check(measures)?;
        if ids.len() != measures.len() {
            return Err(Error::LengthMismatch(ids.len(), measures.len()));
        }
        if selection.positives.is_empty() {
            return Err(Error::EmptyClass("positive"));
        }
        if selection.negatives.is_empty() {
            return Err(Error::EmptyClass("negative"));
        }
        let row_of: HashMap<usize, usize> = ids.iter().enumerate().map(|(r, &id)| (id, r)).collect();
        let lookup = |id: usize| {
            row_of
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidPolicy(format!("selected sample {id} has no measures")))
        };
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for &id in &selection.positives {
            rows.push(lookup(id)?);
            labels.push(0usize);
        }
        for id in selection.negative_ids() {
            rows.push(lookup(id)?);
            labels.push(1);
        }
        let n = rows.len() as f64;
        let n_neg = selection.negatives.len() as f64;
        let weight = [n / (2.0 * (n - n_neg)), n / (2.0 * n_neg)];

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x6469_7363);
        let mut adam = Adam::new(AdamConfig {
            lr: self.config.lr,
            ..AdamConfig::default()
        });
        let mut order: Vec<usize> = (0..rows.len()).collect();
        self.history.clear();
        for epoch in 0..self.config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (batch, chunk) in order.chunks(self.config.batch_size).enumerate() {
                // a single-row batch has no variance to normalize by
                if chunk.len() < 2 {
                    continue;
                }
                let picked: Vec<usize> = chunk.iter().map(|&i| rows[i]).collect();
                let b = Batch {
                    d: measures.d.select(Axis(0), &picked),
                    sigma: measures.sigma.select(Axis(0), &picked),
                };
                let bn = chunk.len() as f64;
                let mut coef = Array2::zeros((chunk.len(), 2));
                for (r, &i) in chunk.iter().enumerate() {
                    coef[[r, labels[i]]] = -weight[labels[i]] / bn;
                }
                let mut t = Tape::new();
                let mut store = std::mem::take(&mut self.store);
                let logits = self.logits(&mut t, &mut store, &b, Mode::Train);
                self.store = store;
                let lsm = t.log_softmax(logits?)?;
                let coef = t.constant(coef);
                let terms = t.mul(lsm, coef)?;
                let loss = t.sum(terms)?;
                let lv = t.value(loss)[[0, 0]];
                if !lv.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch,
                        total: lv,
                        recon: f64::NAN,
                        kl: f64::NAN,
                    });
                }
                let grads = t.backward(loss)?;
                adam.step(&mut self.store, &grads)?;
                total += lv * bn;
            }
            log::debug!("disc epoch {epoch}: loss {:.5}", total / n);
            self.history.push(total / n);
        }
        Ok(&self.history)
    }

    fn predict_chunk(&self, b: &Batch) -> Result<Vec<f64>> {
        let mut t = Tape::new();
        let logits = self.logits_eval(&mut t, b)?;
        let p = t.softmax(logits)?;
        let col = t.value(p).column(1).to_vec();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivation("discriminator output"));
        }
        Ok(col)
    }

    /// Anomaly-class probability per sample, using frozen batch statistics.
    pub fn predict(&self, measures: &AnomalyMeasures) -> Result<Vec<f64>> {
        self.check(measures)?;
        let n = measures.len();
        let starts: Vec<usize> = (0..n).step_by(INFERENCE_CHUNK).collect();
        let parts = starts
            .par_iter()
            .map(|&s| {
                let e = (s + INFERENCE_CHUNK).min(n);
                let b = Batch {
                    d: measures.d.slice(ndarray::s![s..e, ..]).to_owned(),
                    sigma: measures.sigma.slice(ndarray::s![s..e, ..]).to_owned(),
                };
                self.predict_chunk(&b)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.concat())
    }

    pub fn to_checkpoint(&self) -> String {
        let header = Header {
            m: self.m,
            m_sigma: self.m_sigma,
            seed: self.seed,
            config: self.config.clone(),
        };
        let meta = serde_json::to_string(&header).expect("config serializes");
        checkpoint::to_text(&self.store, Some(&meta))
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let ck = checkpoint::parse(text)?;
        let meta = ck
            .meta
            .ok_or_else(|| Error::Checkpoint("discriminator checkpoint lacks a config header".into()))?;
        let h: Header =
            serde_json::from_str(&meta).map_err(|e| Error::Checkpoint(format!("bad config header: {e}")))?;
        let mut model = DiscModel::build(&h.config, h.m, h.m_sigma, h.seed)?;
        checkpoint::load_into(&mut model.store, text)?;
        Ok(model)
    }
}
