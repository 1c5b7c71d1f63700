use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnomalyMeasures, EpochLoss, ReconConfig, Variant};
use crate::data::WindowedSeries;
use crate::error::{Error, Result};
use crate::graph::CorrelationGraph;
use crate::nn::gradcheck::{check_param_gradients, GradCheckReport};
use crate::nn::{checkpoint, Activation, Adam, AdamConfig, GraphConv, Linear, Lstm, ParamStore, Tape, Var};

/// Rows per inference chunk. Fixed so results never depend on thread count.
const INFERENCE_CHUNK: usize = 1024;

/// Model inputs in step-major layout: `steps[s]` holds step `s` of every
/// sample. Static data has one step; `target` is what the decoder must
/// reproduce.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconData {
    pub steps: Vec<Array2<f64>>,
    pub target: Array2<f64>,
}

impl ReconData {
    pub fn from_static(x: &Array2<f64>) -> Self {
        ReconData {
            steps: vec![x.clone()],
            target: x.clone(),
        }
    }

    pub fn from_windows(w: &WindowedSeries) -> Self {
        let width = w.width();
        let steps = (0..w.k)
            .map(|s| {
                let mut a = Array2::zeros((w.len(), width));
                for (i, win) in w.windows.iter().enumerate() {
                    a.row_mut(i).assign(&win.row(s));
                }
                a
            })
            .collect();
        ReconData {
            steps,
            target: w.targets.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.target.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.target.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        ReconData {
            steps: self.steps.iter().map(|s| s.select(Axis(0), rows)).collect(),
            target: self.target.select(Axis(0), rows),
        }
    }

    fn range(&self, start: usize, end: usize) -> Self {
        let rows: Vec<usize> = (start..end).collect();
        self.select_rows(&rows)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    m: usize,
    seed: u64,
    config: ReconConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconModel {
    pub config: ReconConfig,
    m: usize,
    seed: u64,
    store: ParamStore,
    gcn_in: Option<GraphConv>,
    lstm: Option<Lstm>,
    encoder: Vec<Linear>,
    mu_head: Linear,
    logvar_head: Linear,
    decoder: Vec<Linear>,
    gcn_out: Option<GraphConv>,
    pub history: Vec<EpochLoss>,
}

struct Forward {
    mu: Var,
    logvar: Var,
    x_hat: Var,
}

impl ReconModel {
    pub fn build(config: &ReconConfig, graph: &CorrelationGraph, seed: u64) -> Result<Self> {
        config.validate()?;
        let m = graph.dim();
        if m == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let l = &graph.laplacian;
        let order = config.gcn_order;
        let gcn_in = match config.use_gcn {
            true => Some(GraphConv::new(
                &mut store,
                "gcn_in",
                l,
                order,
                Activation::Relu,
                &mut rng,
            )?),
            false => None,
        };
        let (lstm, mut width) = match config.variant {
            Variant::Static => (None, m),
            Variant::TimeSeries { .. } => {
                let h = config.lstm_hidden.unwrap_or(m);
                (
                    Some(Lstm::new(&mut store, "lstm", m, h, config.lstm_layers, &mut rng)),
                    h,
                )
            }
        };
        let mut encoder = Vec::new();
        for (i, &w) in config.hidden.iter().enumerate() {
            encoder.push(Linear::new(
                &mut store,
                &format!("enc{i}"),
                width,
                w,
                Activation::Relu,
                &mut rng,
            ));
            width = w;
        }
        let z = config.latent;
        let mu_head = Linear::new(&mut store, "mu", width, z, Activation::Identity, &mut rng);
        let logvar_head = Linear::new(&mut store, "logvar", width, z, Activation::Identity, &mut rng);
        let mut decoder = Vec::new();
        let mut width = z;
        let widths: Vec<usize> = config.hidden.iter().rev().copied().chain([m]).collect();
        for (i, &w) in widths.iter().enumerate() {
            let act = if i + 1 == widths.len() {
                config.decoder_output
            } else {
                Activation::Relu
            };
            decoder.push(Linear::new(&mut store, &format!("dec{i}"), width, w, act, &mut rng));
            width = w;
        }
        let gcn_out = match config.use_gcn {
            true => Some(GraphConv::new(
                &mut store,
                "gcn_out",
                l,
                order,
                Activation::Identity,
                &mut rng,
            )?),
            false => None,
        };
        Ok(ReconModel {
            config: config.clone(),
            m,
            seed,
            store,
            gcn_in,
            lstm,
            encoder,
            mu_head,
            logvar_head,
            decoder,
            gcn_out,
            history: Vec::new(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Widths of the encoder from input to the latent heads.
    pub fn encoder_widths(&self) -> Vec<usize> {
        let mut w = vec![self.encoder.first().map_or(self.mu_head.in_dim, |l| l.in_dim)];
        w.extend(self.encoder.iter().map(|l| l.out_dim));
        w.push(self.mu_head.out_dim);
        w
    }

    pub fn decoder_widths(&self) -> Vec<usize> {
        let mut w = vec![self.mu_head.out_dim];
        w.extend(self.decoder.iter().map(|l| l.out_dim));
        w
    }

    fn check_input(&self, data: &ReconData) -> Result<()> {
        let steps = match self.config.variant {
            Variant::Static => 1,
            Variant::TimeSeries { k } => k,
        };
        if data.steps.len() != steps {
            return Err(Error::DimensionMismatch {
                expected: steps,
                actual: data.steps.len(),
            });
        }
        for a in data.steps.iter().chain([&data.target]) {
            if a.ncols() != self.m {
                return Err(Error::DimensionMismatch {
                    expected: self.m,
                    actual: a.ncols(),
                });
            }
        }
        Ok(())
    }

    /// Encoder output `(μ, logvar)` for the given steps.
    fn encode_vars(&self, t: &mut Tape, steps: &[Var]) -> Result<(Var, Var)> {
        let s = &self.store;
        let mut convolved = Vec::with_capacity(steps.len());
        for &x in steps {
            convolved.push(match &self.gcn_in {
                Some(g) => g.forward(t, s, x)?,
                None => x,
            });
        }
        let mut h = match &self.lstm {
            Some(lstm) => {
                let last = lstm.forward(t, s, &convolved)?;
                t.relu(last)?
            }
            None => convolved[0],
        };
        for layer in &self.encoder {
            h = layer.forward(t, s, h)?;
        }
        Ok((self.mu_head.forward(t, s, h)?, self.logvar_head.forward(t, s, h)?))
    }

    fn decode_var(&self, t: &mut Tape, z: Var) -> Result<Var> {
        let mut h = z;
        for layer in &self.decoder {
            h = layer.forward(t, &self.store, h)?;
        }
        match &self.gcn_out {
            Some(g) => g.forward(t, &self.store, h),
            None => Ok(h),
        }
    }

    /// With `noise`, decodes `μ + exp(logvar / 2) ⊙ noise`; otherwise `μ`.
    fn forward(&self, t: &mut Tape, data: &ReconData, noise: Option<Array2<f64>>) -> Result<Forward> {
        let steps: Vec<Var> = data.steps.iter().map(|s| t.constant(s.clone())).collect();
        let (mu, logvar) = self.encode_vars(t, &steps)?;
        let z = match noise {
            Some(eta) => {
                let half = t.scale(logvar, 0.5)?;
                let sigma = t.exp(half)?;
                let eta = t.constant(eta);
                let spread = t.mul(sigma, eta)?;
                t.add(mu, spread)?
            }
            None => mu,
        };
        let x_hat = self.decode_var(t, z)?;
        Ok(Forward { mu, logvar, x_hat })
    }

    /// Returns `(loss, recon, kl)` variables for a batch.
    fn loss_vars(&self, t: &mut Tape, data: &ReconData, f: &Forward) -> Result<(Var, Var, Var)> {
        let n = data.len() as f64;
        let target = t.constant(data.target.clone());
        let diff = t.sub(target, f.x_hat)?;
        let sq = t.square(diff)?;
        let sse = t.sum(sq)?;
        let recon = t.scale(sse, 1.0 / n)?;
        // -1/2 sum(1 + logvar - mu^2 - exp(logvar)) / n
        let mu2 = t.square(f.mu)?;
        let var = t.exp(f.logvar)?;
        let inner = t.sub(f.logvar, mu2)?;
        let inner = t.sub(inner, var)?;
        let inner = t.add_scalar(inner, 1.0)?;
        let s = t.sum(inner)?;
        let kl = t.scale(s, -0.5 / n)?;
        let total = if self.config.lambda == 0.0 {
            recon
        } else {
            let weighted = t.scale(kl, self.config.lambda)?;
            t.add(recon, weighted)?
        };
        Ok((total, recon, kl))
    }

    /// Finite-difference check of the training loss with respect to every
    /// parameter, with the reparameterization noise fixed to `eta`.
    pub fn check_loss_gradients(&mut self, data: &ReconData, eta: &Array2<f64>) -> Result<GradCheckReport> {
        self.check_input(data)?;
        let frozen = self.clone();
        check_param_gradients(&mut self.store, |t, store| {
            let mut m = frozen.clone();
            m.store = store.clone();
            let f = m.forward(t, data, Some(eta.clone()))?;
            Ok(m.loss_vars(t, data, &f)?.0)
        })
    }

    /// Latent mean and standard deviation `σ = exp(logvar / 2)`.
    pub fn encode(&self, data: &ReconData) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_input(data)?;
        let mut t = Tape::new();
        let steps: Vec<Var> = data.steps.iter().map(|s| t.constant(s.clone())).collect();
        let (mu, logvar) = self.encode_vars(&mut t, &steps)?;
        let mu = t.value(mu).clone();
        let sigma = t.value(logvar).mapv(|v| (0.5 * v).exp());
        if !mu.iter().chain(sigma.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFiniteActivation("latent heads"));
        }
        Ok((mu, sigma))
    }

    pub fn decode(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.config.latent {
            return Err(Error::DimensionMismatch {
                expected: self.config.latent,
                actual: z.ncols(),
            });
        }
        let mut t = Tape::new();
        let zv = t.constant(z.clone());
        let x = self.decode_var(&mut t, zv)?;
        Ok(t.value(x).clone())
    }

    fn measures_chunk(&self, data: &ReconData) -> Result<AnomalyMeasures> {
        let mut t = Tape::new();
        let f = self.forward(&mut t, data, None)?;
        let mu = t.value(f.mu).clone();
        let sigma = t.value(f.logvar).mapv(|v| (0.5 * v).exp());
        let d = (&data.target - t.value(f.x_hat)).mapv(|v| v * v);
        if !d.iter().chain(mu.iter()).chain(sigma.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFiniteActivation("anomaly measures"));
        }
        Ok(AnomalyMeasures { d, mu, sigma })
    }

    /// Deterministic measures from the latent-mean decode; read-only.
    pub fn anomaly_measures(&self, data: &ReconData) -> Result<AnomalyMeasures> {
        self.check_input(data)?;
        let n = data.len();
        let chunks: Vec<(usize, usize)> = (0..n)
            .step_by(INFERENCE_CHUNK)
            .map(|s| (s, (s + INFERENCE_CHUNK).min(n)))
            .collect();
        let parts = chunks
            .par_iter()
            .map(|&(s, e)| self.measures_chunk(&data.range(s, e)))
            .collect::<Result<Vec<_>>>()?;
        let cat = |f: fn(&AnomalyMeasures) -> &Array2<f64>, width: usize| -> Array2<f64> {
            if parts.is_empty() {
                return Array2::zeros((0, width));
            }
            let views: Vec<_> = parts.iter().map(|p| f(p).view()).collect();
            ndarray::concatenate(Axis(0), &views).expect("chunk widths agree")
        };
        Ok(AnomalyMeasures {
            d: cat(|p| &p.d, self.m),
            mu: cat(|p| &p.mu, self.config.latent),
            sigma: cat(|p| &p.sigma, self.config.latent),
        })
    }

    /// Mini-batch Adam on `recon + λ·KL`. The shuffling and noise stream is
    /// seeded from the model seed.
    pub fn train(&mut self, data: &ReconData) -> Result<&[EpochLoss]> {
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        self.check_input(data)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x7265_636f_6e00);
        let mut adam = Adam::new(AdamConfig {
            lr: self.config.lr,
            ..AdamConfig::default()
        });
        let n = data.len();
        let mut order: Vec<usize> = (0..n).collect();
        self.history.clear();
        for epoch in 0..self.config.epochs {
            order.shuffle(&mut rng);
            let mut sums = (0.0, 0.0, 0.0);
            for (batch, rows) in order.chunks(self.config.batch_size).enumerate() {
                let b = data.select_rows(rows);
                let eta = Array2::from_shape_simple_fn((rows.len(), self.config.latent), || {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                });
                let mut t = Tape::new();
                let f = self.forward(&mut t, &b, Some(eta))?;
                let (loss, recon, kl) = self.loss_vars(&mut t, &b, &f)?;
                let (lv, rv, kv) = (t.value(loss)[[0, 0]], t.value(recon)[[0, 0]], t.value(kl)[[0, 0]]);
                if !(lv.is_finite() && rv.is_finite() && kv.is_finite()) {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch,
                        total: lv,
                        recon: rv,
                        kl: kv,
                    });
                }
                let grads = t.backward(loss)?;
                adam.step(&mut self.store, &grads)?;
                let w = rows.len() as f64;
                sums = (sums.0 + lv * w, sums.1 + rv * w, sums.2 + kv * w);
            }
            let n = n as f64;
            let e = EpochLoss {
                epoch,
                total: sums.0 / n,
                recon: sums.1 / n,
                kl: sums.2 / n,
            };
            log::debug!(
                "recon epoch {epoch}: total {:.5} recon {:.5} kl {:.5}",
                e.total,
                e.recon,
                e.kl
            );
            self.history.push(e);
        }
        Ok(&self.history)
    }

    pub fn to_checkpoint(&self) -> String {
        let header = Header {
            m: self.m,
            seed: self.seed,
            config: self.config.clone(),
        };
        let meta = serde_json::to_string(&header).expect("config serializes");
        checkpoint::to_text(&self.store, Some(&meta))
    }

    /// Rebuilds the architecture recorded in the checkpoint over `graph`
    /// and loads its weights.
    pub fn from_checkpoint(text: &str, graph: &CorrelationGraph) -> Result<Self> {
        let ck = checkpoint::parse(text)?;
        let meta = ck
            .meta
            .ok_or_else(|| Error::Checkpoint("reconstruction checkpoint lacks a config header".into()))?;
        let header: Header =
            serde_json::from_str(&meta).map_err(|e| Error::Checkpoint(format!("bad config header: {e}")))?;
        if header.m != graph.dim() {
            return Err(Error::DimensionMismatch {
                expected: header.m,
                actual: graph.dim(),
            });
        }
        let mut model = ReconModel::build(&header.config, graph, header.seed)?;
        checkpoint::load_into(&mut model.store, text)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CorrelationGraph;
    use crate::recon::{gaussian_kl, vae_loss};
    use ndarray::array;

    fn graph(m: usize) -> CorrelationGraph {
        let names = (0..m).map(|i| format!("f{i}")).collect();
        let a = Array2::from_shape_fn((m, m), |(i, j)| if i != j { 0.5 } else { 0.0 });
        CorrelationGraph::from_adjacency(names, a).unwrap()
    }

    fn correlated(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 2));
        for mut row in x.rows_mut() {
            let a: f64 = rng.sample(rand_distr::StandardNormal);
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            row[0] = a;
            row[1] = 0.9 * a + 0.3 * e;
        }
        x
    }

    #[test]
    fn thyroid_sized_stack() {
        let model = ReconModel::build(&ReconConfig::default(), &graph(13), 0).unwrap();
        assert_eq!(model.encoder_widths(), vec![13, 60, 30, 10, 5]);
        assert_eq!(model.decoder_widths(), vec![5, 10, 30, 60, 13]);
        let again = ReconModel::build(&ReconConfig::default(), &graph(13), 0).unwrap();
        assert_eq!(model.params(), again.params());
    }

    #[test]
    fn wrong_graph_size_is_rejected() {
        let model = ReconModel::build(&ReconConfig::default(), &graph(3), 0).unwrap();
        let data = ReconData::from_static(&Array2::zeros((2, 4)));
        assert!(matches!(
            model.encode(&data),
            Err(Error::DimensionMismatch { expected: 3, actual: 4 })
        ));
        let ck = model.to_checkpoint();
        assert!(matches!(
            ReconModel::from_checkpoint(&ck, &graph(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn encode_properties() {
        let mut model = ReconModel::build(&ReconConfig::default(), &graph(3), 1).unwrap();
        let x = array![[0.3, -1.0, 2.0], [0.3, -1.0, 2.0], [5.0, 1.0, 0.0]];
        let (mu, sigma) = model.encode(&ReconData::from_static(&x)).unwrap();
        assert!(sigma.iter().all(|&s| s > 0.0));
        assert_eq!(mu.row(0), mu.row(1));
        assert_eq!(sigma.row(0), sigma.row(1));
        // zero logvar head gives unit sigma
        let head = model.logvar_head.clone();
        model.params_mut().get_mut(head.w).fill(0.0);
        model.params_mut().get_mut(head.b).fill(0.0);
        let (_, sigma) = model.encode(&ReconData::from_static(&x)).unwrap();
        assert!(sigma.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn tape_loss_matches_closed_form() {
        let model = ReconModel::build(&ReconConfig::default(), &graph(3), 2).unwrap();
        let x = array![[0.3, -1.0, 2.0], [1.0, 0.0, -0.5]];
        let data = ReconData::from_static(&x);
        let mut t = Tape::new();
        let f = model.forward(&mut t, &data, None).unwrap();
        let (total, recon, kl) = model.loss_vars(&mut t, &data, &f).unwrap();
        let mu = t.value(f.mu).clone();
        let sigma = t.value(f.logvar).mapv(|v| (0.5 * v).exp());
        let expect = vae_loss(&x, t.value(f.x_hat), &mu, &sigma, 1.0);
        for (got, want) in [(total, expect.0), (recon, expect.1), (kl, expect.2)] {
            assert!((t.value(got)[[0, 0]] - want).abs() < 1e-12);
        }
        assert!(gaussian_kl(&mu, &sigma).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn full_model_gradients() {
        for variant in [Variant::Static, Variant::TimeSeries { k: 2 }] {
            let config = ReconConfig {
                hidden: vec![4, 3],
                latent: 2,
                variant,
                ..ReconConfig::default()
            };
            let mut model = ReconModel::build(&config, &graph(3), 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            // move every unit off the ReLU kink that zero biases sit on
            let ids: Vec<_> = model.params().ids().collect();
            for id in ids {
                model
                    .params_mut()
                    .get_mut(id)
                    .mapv_inplace(|v| v + rng.gen_range(-0.3..0.3));
            }
            let steps = match variant {
                Variant::Static => 1,
                Variant::TimeSeries { k } => k,
            };
            let data = ReconData {
                steps: (0..steps)
                    .map(|_| Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0)))
                    .collect(),
                target: Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0)),
            };
            let eta = Array2::from_shape_fn((4, 2), |_| rng.gen_range(-1.0..1.0));
            let report = model.check_loss_gradients(&data, &eta).unwrap();
            assert!(report.max_rel_error < 1e-4, "{variant:?}: {report:?}");
        }
    }

    #[test]
    fn training_reduces_reconstruction_error() {
        let config = ReconConfig {
            epochs: 50,
            batch_size: 16,
            lr: 3e-3,
            ..ReconConfig::default()
        };
        let mut model = ReconModel::build(&config, &graph(2), 0).unwrap();
        let x = correlated(500, 1);
        let history = model.train(&ReconData::from_static(&x)).unwrap().to_vec();
        assert_eq!(history.len(), 50);
        let (first, last) = (history[0], history[49]);
        assert!(last.total <= first.total);
        assert!(last.recon < 0.5 * first.recon, "{first:?} -> {last:?}");
    }

    #[test]
    fn measures_separate_decorrelated_samples() {
        let config = ReconConfig {
            epochs: 60,
            batch_size: 64,
            ..ReconConfig::default()
        };
        let mut model = ReconModel::build(&config, &graph(2), 4).unwrap();
        model.train(&ReconData::from_static(&correlated(1000, 2))).unwrap();
        let normal = correlated(100, 3);
        let mut broken = correlated(100, 4);
        // pair each first coordinate with an unrelated sample's second
        let shifted: Vec<f64> = (0..100).map(|i| broken[[(i + 37) % 100, 1]]).collect();
        for (i, v) in shifted.into_iter().enumerate() {
            broken[[i, 1]] = -v;
        }
        let mean_norm = |x: &Array2<f64>| {
            let m = model.anomaly_measures(&ReconData::from_static(x)).unwrap();
            m.d_norms().iter().sum::<f64>() / 100.0
        };
        let (a, b) = (mean_norm(&normal), mean_norm(&broken));
        assert!(a < b, "normal {a} vs decorrelated {b}");
    }

    #[test]
    fn measures_are_pure_and_deterministic() {
        let model = ReconModel::build(&ReconConfig::default(), &graph(3), 8).unwrap();
        let x = array![[0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [-1.0, 0.0, 1.0]];
        let before = model.params().clone();
        let a = model.anomaly_measures(&ReconData::from_static(&x)).unwrap();
        let b = model.anomaly_measures(&ReconData::from_static(&x)).unwrap();
        assert_eq!(a, b);
        assert_eq!(model.params(), &before);
        assert_eq!(a.d.row(0), a.d.row(1));
        assert!(a.d.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn identity_reconstruction_gives_zero_error() {
        // 1-dim graph without convolution: decoder output = relu(...)
        let config = ReconConfig {
            hidden: vec![1],
            latent: 1,
            use_gcn: false,
            ..ReconConfig::default()
        };
        let mut model = ReconModel::build(&config, &graph(1), 0).unwrap();
        let ids: Vec<_> = model.params().ids().collect();
        for id in ids {
            let name = model.params().name(id).to_string();
            let v = if name.ends_with(".w") { 1.0 } else { 0.0 };
            model.params_mut().get_mut(id).fill(v);
        }
        let x = array![[0.5], [2.0], [0.0]];
        let m = model.anomaly_measures(&ReconData::from_static(&x)).unwrap();
        assert!(m.d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lambda_zero_ignores_kl() {
        let x = correlated(64, 5);
        let data = ReconData::from_static(&x);
        // with lambda = 0 the total-loss gradient equals the recon-term gradient
        let total_matches_recon = |lambda: f64| {
            let config = ReconConfig {
                lambda,
                ..ReconConfig::default()
            };
            let model = ReconModel::build(&config, &graph(2), 9).unwrap();
            let eta = Array2::from_elem((64, 5), 0.3);
            let grad_of = |pick_total: bool| {
                let mut t = Tape::new();
                let f = model.forward(&mut t, &data, Some(eta.clone())).unwrap();
                let (total, recon, _) = model.loss_vars(&mut t, &data, &f).unwrap();
                t.backward(if pick_total { total } else { recon }).unwrap()
            };
            let (g_total, g_recon) = (grad_of(true), grad_of(false));
            let same = model
                .params()
                .trainable_ids()
                .all(|id| g_total.param(id) == g_recon.param(id));
            same
        };
        assert!(total_matches_recon(0.0));
        assert!(!total_matches_recon(1.0));
        let train = |lambda: f64| {
            let config = ReconConfig {
                epochs: 3,
                batch_size: 16,
                lambda,
                ..ReconConfig::default()
            };
            let mut model = ReconModel::build(&config, &graph(2), 9).unwrap();
            model.train(&data).unwrap();
            model.params().clone()
        };
        assert_ne!(train(0.0), train(1.0));
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let mut model = ReconModel::build(&ReconConfig::default(), &graph(2), 0).unwrap();
        let data = ReconData::from_static(&Array2::zeros((0, 2)));
        assert!(matches!(model.train(&data), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn checkpoint_round_trip() {
        let config = ReconConfig {
            epochs: 1,
            ..ReconConfig::default()
        };
        let g = graph(3);
        let mut model = ReconModel::build(&config, &g, 12).unwrap();
        model
            .train(&ReconData::from_static(
                &correlated(20, 1).dot(&array![[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]]),
            ))
            .unwrap();
        let back = ReconModel::from_checkpoint(&model.to_checkpoint(), &g).unwrap();
        assert_eq!(back.params(), model.params());
    }
}
