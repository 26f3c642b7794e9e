use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::graph::{Activations, Graph, Op};
use super::{ParamStore, Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Unet,
    Uwdsr,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::Unet => "unet",
            Arch::Uwdsr => "uwdsr",
        })
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unet" => Ok(Arch::Unet),
            "uwdsr" => Ok(Arch::Uwdsr),
            _ => Err(Error::InvalidArgument(format!("unknown architecture `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub arch: Arch,
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_channels: usize,
    /// Number of pooling steps.
    pub depth: usize,
    /// Residual blocks per level (U-WDSR only).
    pub wdsr_blocks: usize,
    /// Width multiplier of the activated features inside a block.
    pub wdsr_expansion: usize,
}

impl ArchConfig {
    pub fn unet() -> Self {
        Self {
            arch: Arch::Unet,
            in_channels: 3,
            out_channels: 2,
            base_channels: 16,
            depth: 3,
            wdsr_blocks: 4,
            wdsr_expansion: 4,
        }
    }

    pub fn uwdsr() -> Self {
        Self {
            arch: Arch::Uwdsr,
            base_channels: 8,
            ..Self::unet()
        }
    }

    pub fn for_arch(arch: Arch) -> Self {
        match arch {
            Arch::Unet => Self::unet(),
            Arch::Uwdsr => Self::uwdsr(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.base_channels == 0 {
            return Err(Error::InvalidArgument("channel counts must be positive".into()));
        }
        if self.depth > 8 {
            return Err(Error::InvalidArgument(format!("depth {} is unreasonably large", self.depth)));
        }
        if self.arch == Arch::Uwdsr && (self.wdsr_expansion == 0 || self.base_channels * 4 / 5 == 0) {
            return Err(Error::InvalidArgument("U-WDSR needs base_channels >= 2 and expansion >= 1".into()));
        }
        Ok(())
    }

    /// Spatial sides must be multiples of this.
    pub fn side_multiple(&self) -> usize {
        1 << self.depth
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    HeNormal { fan_in: usize },
    Uniform { fan_in: usize },
    Zero,
}

struct Builder<T> {
    graph: Graph,
    params: ParamStore<T>,
    inits: Vec<Init>,
}

impl<T: Real> Builder<T> {
    fn param(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.inits.push(init);
        self.params.add(name, shape)
    }

    fn conv3(&mut self, x: usize, cin: usize, cout: usize, name: &str, init: Init) -> usize {
        let weight = self.param(format!("{name}.weight"), vec![cout, cin, 3, 3], init);
        let bias = self.param(format!("{name}.bias"), vec![cout], Init::Zero);
        self.graph.push(Op::Conv3 { input: x, weight, bias, cout })
    }

    fn conv1(&mut self, x: usize, cin: usize, cout: usize, name: &str, init: Init) -> usize {
        let weight = self.param(format!("{name}.weight"), vec![cout, cin], init);
        let bias = self.param(format!("{name}.bias"), vec![cout], Init::Zero);
        self.graph.push(Op::Conv1 { input: x, weight, bias, cout })
    }

    fn convt(&mut self, x: usize, cin: usize, cout: usize, name: &str) -> usize {
        let weight = self.param(format!("{name}.weight"), vec![cin, cout, 2, 2], Init::HeNormal { fan_in: cin });
        let bias = self.param(format!("{name}.bias"), vec![cout], Init::Zero);
        self.graph.push(Op::ConvT2 { input: x, weight, bias, cout })
    }

    fn relu(&mut self, x: usize) -> usize {
        self.graph.push(Op::Relu { input: x })
    }

    fn double_conv(&mut self, x: usize, cin: usize, c: usize, name: &str) -> usize {
        let a = self.conv3(x, cin, c, &format!("{name}.conv0"), Init::HeNormal { fan_in: cin * 9 });
        let a = self.relu(a);
        let b = self.conv3(a, c, c, &format!("{name}.conv1"), Init::HeNormal { fan_in: c * 9 });
        self.relu(b)
    }

    /// Wide-activation block: 1x1 expand, ReLU, 1x1 narrow, 3x3 back to `c`, plus identity.
    fn wdsr_block(&mut self, x: usize, c: usize, expansion: usize, name: &str) -> usize {
        let wide = c * expansion;
        let narrow = c * 4 / 5;
        let a = self.conv1(x, c, wide, &format!("{name}.expand"), Init::Uniform { fan_in: c });
        let a = self.relu(a);
        let a = self.conv1(a, wide, narrow, &format!("{name}.narrow"), Init::Uniform { fan_in: wide });
        let a = self.conv3(a, narrow, c, &format!("{name}.spatial"), Init::Uniform { fan_in: narrow * 9 });
        self.graph.push(Op::Add { a: x, b: a })
    }

    fn level(&mut self, cfg: &ArchConfig, x: usize, cin: usize, c: usize, name: &str) -> usize {
        match cfg.arch {
            Arch::Unet => self.double_conv(x, cin, c, name),
            Arch::Uwdsr => {
                let mut h = self.conv3(x, cin, c, &format!("{name}.head"), Init::HeNormal { fan_in: cin * 9 });
                for k in 0..cfg.wdsr_blocks {
                    h = self.wdsr_block(h, c, cfg.wdsr_expansion, &format!("{name}.block{k}"));
                }
                h
            }
        }
    }
}

/// A network graph with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub config: ArchConfig,
    pub graph: Graph,
    pub params: ParamStore<T>,
    inits: Vec<Init>,
}

/// Build the graph for `config` and initialize parameters from `seed`.
///
/// Convolutions get He-normal weights, the WDSR residual bodies keep a
/// plain `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` draw, biases start at zero
/// and the final 1x1 layer is zero, so a fresh network outputs zeros.
pub fn build<T: Real>(config: &ArchConfig, seed: u64) -> Result<Network<T>> {
    config.validate()?;
    let mut b = Builder {
        graph: Graph::new(),
        params: ParamStore::default(),
        inits: Vec::new(),
    };
    let c0 = config.base_channels;
    let mut x = 0;
    let mut cin = config.in_channels;
    let mut skips = Vec::new();
    for lvl in 0..config.depth {
        let c = c0 << lvl;
        x = b.level(config, x, cin, c, &format!("enc{lvl}"));
        skips.push((x, c));
        x = b.graph.push(Op::AvgPool2 { input: x });
        cin = c;
    }
    let cb = c0 << config.depth;
    x = b.level(config, x, cin, cb, "bottleneck");
    cin = cb;
    for lvl in (0..config.depth).rev() {
        let (skip, c) = skips[lvl];
        x = b.convt(x, cin, c, &format!("up{lvl}"));
        x = b.graph.push(Op::Concat { a: x, b: skip });
        x = b.level(config, x, 2 * c, c, &format!("dec{lvl}"));
        cin = c;
    }
    b.conv1(x, cin, config.out_channels, "final", Init::Zero);
    let mut net = Network {
        config: config.clone(),
        graph: b.graph,
        params: b.params,
        inits: b.inits,
    };
    net.reinitialize(seed);
    Ok(net)
}

impl<T: Real> Network<T> {
    pub fn reinitialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, init) in self.inits.iter().enumerate() {
            let data = self.params.get_mut(i);
            match *init {
                Init::HeNormal { fan_in } => {
                    let d = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
                    data.iter_mut().for_each(|v| *v = T::from_f64(d.sample(&mut rng)));
                }
                Init::Uniform { fan_in } => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    data.iter_mut().for_each(|v| *v = T::from_f64(rng.random_range(-bound..bound)));
                }
                Init::Zero => data.iter_mut().for_each(|v| *v = T::zero()),
            }
        }
    }

    /// Index of the final layer's weight tensor.
    pub fn final_weight(&self) -> usize {
        self.params.len() - 2
    }

    /// Zero the final layer so the network outputs zeros for any input.
    pub fn zero_final_layer(&mut self) {
        let n = self.params.len();
        for i in [n - 2, n - 1] {
            self.params.get_mut(i).iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    /// Side length (in input pixels) of the region that influences one output pixel.
    pub fn receptive_field(&self) -> usize {
        let nodes = self.graph.nodes();
        let mut rf = vec![(1.0f64, 1.0f64); nodes.len()];
        for (id, op) in nodes.iter().enumerate().skip(1) {
            rf[id] = match *op {
                Op::Input => (1.0, 1.0),
                Op::Conv3 { input, .. } => (rf[input].0 + 2.0 * rf[input].1, rf[input].1),
                Op::Conv1 { input, .. } | Op::Relu { input } => rf[input],
                Op::AvgPool2 { input } => (rf[input].0 + rf[input].1, 2.0 * rf[input].1),
                Op::ConvT2 { input, .. } => (rf[input].0, rf[input].1 / 2.0),
                Op::Concat { a, b } | Op::Add { a, b } => (rf[a].0.max(rf[b].0), rf[a].1),
            };
        }
        rf[self.graph.output_node()].0.round() as usize
    }

    pub fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let m = self.config.side_multiple();
        if x.c != self.config.in_channels {
            return Err(Error::SizeMismatch {
                context: "network input channels",
                expected: self.config.in_channels,
                actual: x.c,
            });
        }
        if x.h == 0 || !x.h.is_multiple_of(m) || !x.w.is_multiple_of(m) || x.w == 0 {
            return Err(Error::InvalidArgument(format!(
                "input {}x{} is not divisible by 2^depth = {m}",
                x.h, x.w
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_with_activations(x)?.into_output())
    }

    pub fn forward_with_activations(&self, x: Tensor<T>) -> Result<Activations<T>> {
        self.check_input(&x)?;
        Ok(self.graph.forward(&self.params, x))
    }

    /// Accumulate gradients of `<dout, output>` into `grads`; returns the input gradient.
    pub fn backward(&self, acts: &Activations<T>, dout: Tensor<T>, grads: &mut ParamStore<T>) -> Result<Tensor<T>> {
        self.graph.backward(&self.params, acts, dout, grads)
    }

    /// Copy parameter values from a network with the identical layout.
    pub fn load_params(&mut self, params: ParamStore<T>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "parameter tensor count {} differs from architecture's {}",
                params.len(),
                self.params.len()
            )));
        }
        for (a, b) in self.params.tensors.iter().zip(&params.tensors) {
            if a.name != b.name || a.shape != b.shape || b.data.len() != a.data.len() {
                return Err(Error::InvalidArgument(format!("parameter `{}` does not match `{}`", b.name, a.name)));
            }
        }
        self.params = params;
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            graph: self.graph.clone(),
            params: self.params.cast(),
            inits: self.inits.clone(),
        }
    }
}
