//! The component networks: shared encoder, content and style heads, the
//! `[CLS]` decoder and the three discriminators.
//!
//! Every network is a stack of [`LayerSpec`]s. The full-width preset is
//! the default ([`ArchConfig::full`]); [`ArchConfig::desk`] keeps the same
//! layer structure at reduced widths for single-core runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{stream, ParamId, ParamStore, RngState, Tape, Tensor2, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub encoder_width: usize,
    pub content_hidden: usize,
    pub style_dim: usize,
    pub decoder_width: usize,
    pub disc_content_widths: Vec<usize>,
    pub disc_style_widths: Vec<usize>,
    pub disc_cls_widths: Vec<usize>,
    /// Leaky-ReLU slope for encoder, content head and decoder.
    pub slope: f64,
    /// Leaky-ReLU slope inside discriminators.
    pub disc_slope: f64,
    pub dropout: f64,
    /// Insert leaky-ReLU between the linear layers of the content and style
    /// discriminators, whose source tables list none.
    pub disc_inserted_activations: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl ArchConfig {
    pub fn full() -> Self {
        ArchConfig {
            encoder_width: 8000,
            content_hidden: 1024,
            style_dim: 100,
            decoder_width: 2560,
            disc_content_widths: vec![500, 500],
            disc_style_widths: vec![50, 500],
            disc_cls_widths: vec![128, 64, 32],
            slope: 0.01,
            disc_slope: 0.02,
            dropout: 0.3,
            disc_inserted_activations: true,
        }
    }

    /// Same topology, slopes and dropout as [`ArchConfig::full`] at widths
    /// small enough for CPU sweeps.
    pub fn desk() -> Self {
        ArchConfig {
            encoder_width: 256,
            content_hidden: 128,
            decoder_width: 256,
            disc_content_widths: vec![64, 64],
            disc_style_widths: vec![50, 64],
            disc_cls_widths: vec![128, 64, 32],
            ..Self::full()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Config(format!("unknown architecture preset `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Linear { out: usize },
    LeakyRelu { slope: f64 },
    Dropout { p: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub name: String,
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    /// Indices into `layers` that have no counterpart in the source tables.
    pub inserted: Vec<usize>,
}

impl NetSpec {
    fn new(name: &str, input_dim: usize) -> Self {
        NetSpec {
            name: name.to_string(),
            input_dim,
            layers: Vec::new(),
            inserted: Vec::new(),
        }
    }

    fn linear(mut self, out: usize) -> Self {
        self.layers.push(LayerSpec::Linear { out });
        self
    }

    fn lrelu(mut self, slope: f64) -> Self {
        self.layers.push(LayerSpec::LeakyRelu { slope });
        self
    }

    fn inserted_lrelu(mut self, slope: f64) -> Self {
        self.inserted.push(self.layers.len());
        self.lrelu(slope)
    }

    fn dropout(mut self, p: f64) -> Self {
        self.layers.push(LayerSpec::Dropout { p });
        self
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                LayerSpec::Linear { out } => Some(*out),
                _ => None,
            })
            .unwrap_or(self.input_dim)
    }

    /// Widths after each linear layer, in order.
    pub fn linear_widths(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Linear { out } => Some(*out),
                _ => None,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Parameter(format!("{}: input width must be positive", self.name)));
        }
        for layer in &self.layers {
            match *layer {
                LayerSpec::Linear { out: 0 } => {
                    return Err(Error::Parameter(format!("{}: zero-width linear layer", self.name)))
                }
                LayerSpec::LeakyRelu { slope } if !(slope > 0.0 && slope < 1.0) => {
                    return Err(Error::Parameter(format!("{}: slope {slope} outside (0, 1)", self.name)))
                }
                LayerSpec::Dropout { p } if !(0.0..1.0).contains(&p) => {
                    return Err(Error::Parameter(format!("{}: dropout {p} outside [0, 1)", self.name)))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn shared_encoder(cls_dim: usize, arch: &ArchConfig) -> Self {
        NetSpec::new("shared_encoder", cls_dim)
            .linear(arch.encoder_width)
            .lrelu(arch.slope)
            .dropout(arch.dropout)
    }

    pub fn content_head(num_classes: usize, arch: &ArchConfig) -> Self {
        NetSpec::new("content_head", arch.encoder_width)
            .linear(arch.content_hidden)
            .lrelu(arch.slope)
            .linear(num_classes)
    }

    pub fn style_head(arch: &ArchConfig) -> Self {
        NetSpec::new("style_head", arch.encoder_width).linear(arch.style_dim)
    }

    /// Input is `[content | style]`.
    pub fn decoder(num_classes: usize, cls_dim: usize, arch: &ArchConfig) -> Self {
        NetSpec::new("decoder", num_classes + arch.style_dim)
            .linear(arch.decoder_width)
            .lrelu(arch.slope)
            .dropout(arch.dropout)
            .linear(arch.decoder_width)
            .lrelu(arch.slope)
            .dropout(arch.dropout)
            .linear(cls_dim)
    }

    pub fn disc_content(num_classes: usize, arch: &ArchConfig) -> Self {
        Self::plain_disc("disc_content", num_classes, &arch.disc_content_widths, arch)
    }

    pub fn disc_style(arch: &ArchConfig) -> Self {
        Self::plain_disc("disc_style", arch.style_dim, &arch.disc_style_widths, arch)
    }

    pub fn disc_cls(cls_dim: usize, arch: &ArchConfig) -> Self {
        let mut spec = NetSpec::new("disc_cls", cls_dim);
        for &w in &arch.disc_cls_widths {
            spec = spec.linear(w).lrelu(arch.disc_slope);
        }
        spec.linear(1)
    }

    fn plain_disc(name: &str, input: usize, widths: &[usize], arch: &ArchConfig) -> Self {
        let mut spec = NetSpec::new(name, input);
        for &w in widths {
            spec = spec.linear(w);
            if arch.disc_inserted_activations {
                spec = spec.inserted_lrelu(arch.disc_slope);
            }
        }
        spec.linear(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Encoder,
    Content,
    Style,
    Decoder,
    DiscContent,
    DiscStyle,
    DiscCls,
}

impl Group {
    pub const COMPONENTS: [Group; 4] = [Group::Encoder, Group::Content, Group::Style, Group::Decoder];
    pub const DISCRIMINATORS: [Group; 3] = [Group::DiscContent, Group::DiscStyle, Group::DiscCls];
    pub const SUPERVISED: [Group; 2] = [Group::Encoder, Group::Content];
}

/// A [`NetSpec`] bound to parameters in a store.
#[derive(Clone, Debug, PartialEq)]
pub struct Net {
    pub spec: NetSpec,
    pub group: Group,
    /// `(weight, bias)` per linear layer.
    linears: Vec<(ParamId, ParamId)>,
}

impl Net {
    /// Registers the parameters of `spec` in `store`: Kaiming-uniform
    /// weights with fan-in scaling, zero biases.
    pub fn init(spec: NetSpec, group: Group, store: &mut ParamStore, rng: &mut RngState) -> Result<Net> {
        spec.validate()?;
        let mut linears = Vec::new();
        let mut fan_in = spec.input_dim;
        for (i, layer) in spec.layers.iter().enumerate() {
            if let LayerSpec::Linear { out } = *layer {
                let next_slope = match spec.layers.get(i + 1) {
                    Some(LayerSpec::LeakyRelu { slope }) => Some(*slope),
                    _ => None,
                };
                let bound = init_bound(fan_in, next_slope);
                let data = (0..fan_in * out)
                    .map(|_| rng.inner().random_range(-bound..=bound))
                    .collect();
                let n = linears.len();
                let w = store.add(format!("{}.{n}.weight", spec.name), Tensor2::from_vec(fan_in, out, data)?);
                let b = store.add(format!("{}.{n}.bias", spec.name), Tensor2::zeros(1, out));
                linears.push((w, b));
                fan_in = out;
            }
        }
        Ok(Net { spec, group, linears })
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn params(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.linears.iter().flat_map(|&(w, b)| [w, b])
    }

    pub fn linear_params(&self) -> &[(ParamId, ParamId)] {
        &self.linears
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, training: bool, rng: &mut RngState) -> Result<Var> {
        self.forward_layers(tape, x, self.spec.layers.len(), training, rng)
    }

    /// Runs the first `n_layers` layers only.
    pub fn forward_layers(
        &self,
        tape: &mut Tape<'_>,
        x: Var,
        n_layers: usize,
        training: bool,
        rng: &mut RngState,
    ) -> Result<Var> {
        let width = tape.value(x).cols();
        if width != self.spec.input_dim {
            return Err(Error::dim(
                "network input",
                tape.value(x).shape(),
                (tape.value(x).rows(), self.spec.input_dim),
            ));
        }
        let mut h = x;
        let mut linear = 0;
        for layer in &self.spec.layers[..n_layers] {
            h = match *layer {
                LayerSpec::Linear { .. } => {
                    let (w, b) = self.linears[linear];
                    linear += 1;
                    let (w, b) = (tape.param(w), tape.param(b));
                    tape.linear(h, w, b)?
                }
                LayerSpec::LeakyRelu { slope } => tape.leaky_relu(h, slope)?,
                LayerSpec::Dropout { p } => tape.dropout(h, p, training, rng)?,
            };
        }
        Ok(h)
    }
}

/// Kaiming-uniform bound `√(6 / ((1 + a²)·fan_in))`, with `a` the slope of a
/// following leaky ReLU, or `√(3 / fan_in)` for layers not followed by one.
pub fn init_bound(fan_in: usize, next_slope: Option<f64>) -> f64 {
    let gain2 = match next_slope {
        Some(a) => 2.0 / (1.0 + a * a),
        None => 1.0,
    };
    (3.0 * gain2 / fan_in as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disc {
    Content,
    Style,
    Cls,
}

/// All trainable pieces of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentBundle {
    pub arch: ArchConfig,
    pub cls_dim: usize,
    pub num_classes: usize,
    pub store: ParamStore,
    groups: Vec<Group>,
    pub encoder: Net,
    pub content: Net,
    pub style: Net,
    pub decoder: Net,
    pub disc_content: Net,
    pub disc_style: Net,
    pub disc_cls: Net,
}

impl ComponentBundle {
    /// Builds and initialises every network. `seed` drives a dedicated
    /// initialisation stream.
    pub fn build(cls_dim: usize, num_classes: usize, arch: &ArchConfig, seed: u64) -> Result<Self> {
        if cls_dim == 0 {
            return Err(Error::Parameter("cls_dim must be at least 1".into()));
        }
        if num_classes < 2 {
            return Err(Error::Parameter(format!("need at least 2 classes, got {num_classes}")));
        }
        if arch.style_dim == 0 || arch.encoder_width == 0 || arch.content_hidden == 0 || arch.decoder_width == 0 {
            return Err(Error::Parameter("architecture widths must be positive".into()));
        }
        let mut rng = RngState::new(seed, stream::INIT);
        let mut store = ParamStore::new();
        let mut groups = Vec::new();
        let mut make = |spec: NetSpec, group: Group, store: &mut ParamStore| -> Result<Net> {
            let net = Net::init(spec, group, store, &mut rng)?;
            groups.resize(store.len(), group);
            Ok(net)
        };
        let encoder = make(NetSpec::shared_encoder(cls_dim, arch), Group::Encoder, &mut store)?;
        let content = make(NetSpec::content_head(num_classes, arch), Group::Content, &mut store)?;
        let style = make(NetSpec::style_head(arch), Group::Style, &mut store)?;
        let decoder = make(NetSpec::decoder(num_classes, cls_dim, arch), Group::Decoder, &mut store)?;
        let disc_content = make(NetSpec::disc_content(num_classes, arch), Group::DiscContent, &mut store)?;
        let disc_style = make(NetSpec::disc_style(arch), Group::DiscStyle, &mut store)?;
        let disc_cls = make(NetSpec::disc_cls(cls_dim, arch), Group::DiscCls, &mut store)?;
        Ok(ComponentBundle {
            arch: arch.clone(),
            cls_dim,
            num_classes,
            store,
            groups,
            encoder,
            content,
            style,
            decoder,
            disc_content,
            disc_style,
            disc_cls,
        })
    }

    pub fn style_dim(&self) -> usize {
        self.arch.style_dim
    }

    pub fn nets(&self) -> [&Net; 7] {
        [
            &self.encoder,
            &self.content,
            &self.style,
            &self.decoder,
            &self.disc_content,
            &self.disc_style,
            &self.disc_cls,
        ]
    }

    pub fn group_of(&self, id: ParamId) -> Group {
        self.groups[id.0]
    }

    pub fn params_in(&self, groups: &[Group]) -> Vec<ParamId> {
        self.store.ids().filter(|&id| groups.contains(&self.group_of(id))).collect()
    }

    pub fn param_count(&self, group: Group) -> usize {
        self.params_in(&[group]).iter().map(|&id| self.store.get(id).len()).sum()
    }

    /// A tape on which only parameters of `groups` accumulate gradient.
    pub fn tape(&self, groups: &[Group]) -> Tape<'_> {
        Tape::with_trainable(&self.store, |id| groups.contains(&self.group_of(id)))
    }

    pub fn disc(&self, which: Disc) -> &Net {
        match which {
            Disc::Content => &self.disc_content,
            Disc::Style => &self.disc_style,
            Disc::Cls => &self.disc_cls,
        }
    }

    /// One shared-encoder pass feeding both heads: `(content logits, style)`.
    pub fn encode_on(&self, tape: &mut Tape<'_>, y: Var, training: bool, rng: &mut RngState) -> Result<(Var, Var)> {
        let h = self.encoder.forward(tape, y, training, rng)?;
        let c = self.content.forward(tape, h, training, rng)?;
        let s = self.style.forward(tape, h, training, rng)?;
        Ok((c, s))
    }

    /// Decodes `[content | style]` back to a `[CLS]` embedding.
    pub fn decode_on(&self, tape: &mut Tape<'_>, c: Var, s: Var, training: bool, rng: &mut RngState) -> Result<Var> {
        let (cs, ss) = (tape.value(c).shape(), tape.value(s).shape());
        if cs.1 != self.num_classes {
            return Err(Error::dim("decode content", cs, (cs.0, self.num_classes)));
        }
        if ss.1 != self.style_dim() {
            return Err(Error::dim("decode style", ss, (ss.0, self.style_dim())));
        }
        let z = tape.concat(c, s)?;
        self.decoder.forward(tape, z, training, rng)
    }

    /// Raw discriminator logits (`b×1`); the sigmoid lives in the loss.
    pub fn discriminate_on(&self, tape: &mut Tape<'_>, which: Disc, v: Var) -> Result<Var> {
        // Discriminators carry no dropout, so the rng is never consumed.
        let mut unused = RngState::new(0, 0);
        self.disc(which).forward(tape, v, false, &mut unused)
    }

    /// Post-activation hidden layer of the content head.
    pub fn content_features_on(&self, tape: &mut Tape<'_>, y: Var) -> Result<Var> {
        let mut unused = RngState::new(0, 0);
        let h = self.encoder.forward(tape, y, false, &mut unused)?;
        let n = self.content.spec.layers.len() - 1;
        self.content.forward_layers(tape, h, n, false, &mut unused)
    }

    pub fn encode(&self, y: &Tensor2, training: bool, rng: &mut RngState) -> Result<(Tensor2, Tensor2)> {
        let mut tape = Tape::inference(&self.store);
        let yv = tape.input(y.clone())?;
        let (c, s) = self.encode_on(&mut tape, yv, training, rng)?;
        Ok((tape.value(c).clone(), tape.value(s).clone()))
    }

    pub fn decode(&self, c: &Tensor2, s: &Tensor2, training: bool, rng: &mut RngState) -> Result<Tensor2> {
        let mut tape = Tape::inference(&self.store);
        let (cv, sv) = (tape.input(c.clone())?, tape.input(s.clone())?);
        let out = self.decode_on(&mut tape, cv, sv, training, rng)?;
        Ok(tape.value(out).clone())
    }

    pub fn discriminate(&self, which: Disc, v: &Tensor2) -> Result<Tensor2> {
        let mut tape = Tape::inference(&self.store);
        let vv = tape.input(v.clone())?;
        let out = self.discriminate_on(&mut tape, which, vv)?;
        Ok(tape.value(out).clone())
    }

    /// Content logits with dropout disabled.
    pub fn predict_logits(&self, y: &Tensor2) -> Result<Tensor2> {
        let mut unused = RngState::new(0, 0);
        let mut tape = Tape::inference(&self.store);
        let yv = tape.input(y.clone())?;
        let h = self.encoder.forward(&mut tape, yv, false, &mut unused)?;
        let c = self.content.forward(&mut tape, h, false, &mut unused)?;
        Ok(tape.value(c).clone())
    }

    pub fn content_features(&self, y: &Tensor2) -> Result<Tensor2> {
        let mut tape = Tape::inference(&self.store);
        let yv = tape.input(y.clone())?;
        let f = self.content_features_on(&mut tape, yv)?;
        Ok(tape.value(f).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ArchConfig {
        ArchConfig {
            encoder_width: 24,
            content_hidden: 16,
            style_dim: 100,
            decoder_width: 20,
            disc_content_widths: vec![12, 12],
            disc_style_widths: vec![6, 12],
            disc_cls_widths: vec![8, 6, 4],
            ..ArchConfig::full()
        }
    }

    #[test]
    fn full_encoder_parameter_count() {
        let spec = NetSpec::shared_encoder(768, &ArchConfig::full());
        assert_eq!(spec.linear_widths(), vec![8000]);
        let params: usize = 768 * 8000 + 8000;
        assert_eq!(params, 6_152_000);
        assert_eq!(spec.input_dim * spec.output_dim() + spec.output_dim(), params);
    }

    #[test]
    fn decoder_input_is_content_plus_style() {
        let spec = NetSpec::decoder(10, 768, &ArchConfig::full());
        assert_eq!(spec.input_dim, 110);
        assert_eq!(spec.output_dim(), 768);
        assert_eq!(NetSpec::content_head(4, &ArchConfig::full()).output_dim(), 4);
    }

    #[test]
    fn build_rejects_bad_dims() {
        assert!(matches!(ComponentBundle::build(0, 10, &tiny(), 1), Err(Error::Parameter(_))));
        assert!(matches!(ComponentBundle::build(8, 1, &tiny(), 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let a = ComponentBundle::build(12, 3, &tiny(), 99).unwrap();
        let b = ComponentBundle::build(12, 3, &tiny(), 99).unwrap();
        assert_eq!(a.store, b.store);
        let c = ComponentBundle::build(12, 3, &tiny(), 100).unwrap();
        assert_ne!(a.store, c.store);
        for net in a.nets() {
            for &(_, bias) in net.linear_params() {
                assert!(a.store.get(bias).data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn init_bound_respected_for_wide_layer() {
        let arch = ArchConfig {
            encoder_width: 8000,
            ..tiny()
        };
        let mut store = ParamStore::new();
        let mut rng = RngState::new(5, stream::INIT);
        let net = Net::init(NetSpec::content_head(10, &arch), Group::Content, &mut store, &mut rng).unwrap();
        let (w, _) = net.linear_params()[0];
        let bound = (6.0f64 / 8000.0).sqrt();
        let weights = store.get(w);
        assert_eq!(weights.shape(), (8000, 16));
        assert!(weights.data().iter().all(|v| v.abs() <= bound));
        // Fills most of the interval rather than collapsing near zero.
        assert!(weights.max_abs() > 0.9 * init_bound(8000, Some(0.01)));
    }

    #[test]
    fn encode_decode_shapes() {
        let bundle = ComponentBundle::build(12, 3, &tiny(), 1).unwrap();
        let mut rng = RngState::new(1, stream::DROPOUT);
        let y = Tensor2::filled(1, 12, 0.5);
        let (c, s) = bundle.encode(&y, false, &mut rng).unwrap();
        assert_eq!((c.shape(), s.shape()), ((1, 3), (1, 100)));
        let y3 = Tensor2::filled(3, 12, -0.25);
        let (c, s) = bundle.encode(&y3, true, &mut rng).unwrap();
        let out = bundle.decode(&c, &s, false, &mut rng).unwrap();
        assert_eq!(out.shape(), (3, 12));
        assert!(out.is_finite());
    }

    #[test]
    fn inference_is_repeatable() {
        let bundle = ComponentBundle::build(12, 3, &tiny(), 1).unwrap();
        let mut rng = RngState::new(1, stream::DROPOUT);
        let y = Tensor2::from_vec(2, 12, (0..24).map(|i| i as f64 * 0.1 - 1.0).collect()).unwrap();
        let first = bundle.encode(&y, false, &mut rng).unwrap();
        let second = bundle.encode(&y, false, &mut rng).unwrap();
        assert_eq!(first, second);
        let c = Tensor2::zeros(2, 3);
        let s = Tensor2::zeros(2, 100);
        let d1 = bundle.decode(&c, &s, false, &mut rng).unwrap();
        let d2 = bundle.decode(&c, &s, false, &mut rng).unwrap();
        assert_eq!(d1, d2);
        // Zero weights-in, zero biases: only the bias path remains, which is zero.
        assert!(d1.is_finite());
    }

    #[test]
    fn decode_rejects_wrong_widths() {
        let bundle = ComponentBundle::build(12, 3, &tiny(), 1).unwrap();
        let mut rng = RngState::new(1, stream::DROPOUT);
        let err = bundle
            .decode(&Tensor2::zeros(1, 4), &Tensor2::zeros(1, 100), false, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn discriminators_emit_single_logit() {
        let bundle = ComponentBundle::build(12, 10, &tiny(), 1).unwrap();
        let out = bundle.discriminate(Disc::Content, &Tensor2::zeros(4, 10)).unwrap();
        assert_eq!(out.shape(), (4, 1));
        assert!(bundle.discriminate(Disc::Style, &Tensor2::zeros(2, 100)).is_ok());
        let err = bundle.discriminate(Disc::Style, &Tensor2::zeros(2, 99)).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        assert_eq!(bundle.discriminate(Disc::Cls, &Tensor2::zeros(3, 12)).unwrap().shape(), (3, 1));
    }

    #[test]
    fn heads_share_one_encoder_pass() {
        let bundle = ComponentBundle::build(12, 3, &tiny(), 1).unwrap();
        let mut rng = RngState::new(1, stream::DROPOUT);
        let mut tape = bundle.tape(&Group::COMPONENTS);
        let y = tape.input(Tensor2::filled(2, 12, 1.0)).unwrap();
        let before = tape.len();
        bundle.encode_on(&mut tape, y, true, &mut rng).unwrap();
        // encoder: w, b, linear, lrelu, dropout; content: 2×(w, b, linear) + lrelu; style: w, b, linear
        assert_eq!(tape.len() - before, 5 + 7 + 3);
    }

    #[test]
    fn content_features_width() {
        let bundle = ComponentBundle::build(12, 3, &tiny(), 1).unwrap();
        let f = bundle.content_features(&Tensor2::filled(5, 12, 0.3)).unwrap();
        assert_eq!(f.shape(), (5, 16));
    }
}
