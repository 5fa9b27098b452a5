//! Versioned binary checkpoints.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! magic "NAVGAITC" | version u32
//! config text | observation layout text          (u64 length + UTF-8)
//! actor spec | actor params | log_std            (spec: u32 count, u32 sizes, u8 acts)
//! critic spec | critic params
//! adam actor | adam log_std | adam critic        (lr, beta1, beta2, eps, t, m, v)
//! seed u64 | updates u64 | env_steps u64
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::config::ExperimentConfig;
use crate::env::ObservationLayout;
use crate::error::{Error, Result};
use crate::nnet::{Activation, AdamConfig, AdamState, MlpSpec, ParameterSet};
use crate::ppo::{AdamStates, GaussianPolicy};

const MAGIC: &[u8; 8] = b"NAVGAITC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub obs_layout: ObservationLayout,
    pub policy: GaussianPolicy,
    pub critic: ParameterSet,
    pub adam: AdamStates,
    /// Master seed; with `updates` this fixes every future random stream.
    pub seed: u64,
    pub updates: u64,
    pub env_steps: u64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn reals(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }
    fn text(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn spec(&mut self, spec: &MlpSpec) {
        self.u32(spec.layer_sizes().len() as u32);
        spec.layer_sizes().iter().for_each(|&n| self.u32(n as u32));
        self.u8(act_code(spec.hidden_activation()));
        self.u8(act_code(spec.output_activation()));
    }
    fn adam(&mut self, a: &AdamState) {
        let c = a.config;
        [c.lr, c.beta1, c.beta2, c.eps].iter().for_each(|&v| self.f64(v));
        self.u64(a.t);
        self.reals(&a.m);
        self.reals(&a.v);
    }
}

fn act_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Identity => 2,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()? as usize;
        if n > self.buf.len() - self.pos {
            return Err(Error::Checkpoint(format!("length {} exceeds file", n)));
        }
        Ok(n)
    }
    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn text(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("text field is not UTF-8".into()))
    }
    fn spec(&mut self) -> Result<MlpSpec> {
        let n = self.u32()? as usize;
        if n > 64 {
            return Err(Error::Checkpoint(format!("{} layer sizes", n)));
        }
        let sizes = (0..n).map(|_| self.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let act = |c: u8| match c {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::Identity),
            _ => Err(Error::Checkpoint(format!("activation code {}", c))),
        };
        let hidden = act(self.u8()?)?;
        let output = act(self.u8()?)?;
        MlpSpec::new(sizes, hidden, output).map_err(|e| Error::Checkpoint(e.to_string()))
    }
    fn params(&mut self, spec: MlpSpec) -> Result<ParameterSet> {
        let data = self.reals()?;
        ParameterSet::from_flat(spec, data).map_err(|e| Error::Checkpoint(e.to_string()))
    }
    fn adam(&mut self, len: usize) -> Result<AdamState> {
        let config = AdamConfig {
            lr: self.f64()?,
            beta1: self.f64()?,
            beta2: self.f64()?,
            eps: self.f64()?,
        };
        let t = self.u64()?;
        let m = self.reals()?;
        let v = self.reals()?;
        if m.len() != len || v.len() != len {
            return Err(Error::Checkpoint("optimizer state does not match parameters".into()));
        }
        Ok(AdamState { config, m, v, t })
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.text(&self.config.to_text());
        w.text(&self.obs_layout.to_text());
        w.spec(self.policy.mean_net.spec());
        w.reals(self.policy.mean_net.as_slice());
        w.reals(&self.policy.log_std);
        w.spec(self.critic.spec());
        w.reals(self.critic.as_slice());
        w.adam(&self.adam.actor);
        w.adam(&self.adam.log_std);
        w.adam(&self.adam.critic);
        w.u64(self.seed);
        w.u64(self.updates);
        w.u64(self.env_steps);
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {}", version)));
        }
        let config = ExperimentConfig::parse(&r.text()?)?;
        let obs_layout = ObservationLayout::from_text(&r.text()?)?;
        let actor_spec = r.spec()?;
        let mean_net = r.params(actor_spec)?;
        let log_std = r.reals()?;
        let policy = GaussianPolicy::from_parts(mean_net, log_std)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let critic_spec = r.spec()?;
        let critic = r.params(critic_spec)?;
        let adam = AdamStates {
            actor: r.adam(policy.mean_net.len())?,
            log_std: r.adam(policy.log_std.len())?,
            critic: r.adam(critic.len())?,
        };
        let seed = r.u64()?;
        let updates = r.u64()?;
        let env_steps = r.u64()?;
        if r.pos != buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        if obs_layout.dim() != policy.obs_dim() || critic.spec().input_dim() != policy.obs_dim() {
            return Err(Error::Checkpoint("network input does not match observation layout".into()));
        }
        Ok(Self {
            config,
            obs_layout,
            policy,
            critic,
            adam,
            seed,
            updates,
            env_steps,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // write-then-rename so an interrupted save keeps the previous file
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    /// Rejects environments whose observation layout or action size differ
    /// from the ones the policy was trained on.
    pub fn check_compatible(&self, obs_layout: &ObservationLayout, action_dim: usize) -> Result<()> {
        if *obs_layout != self.obs_layout {
            return Err(Error::Incompatible(format!(
                "checkpoint expects observation layout '{}', environment has '{}'",
                self.obs_layout.to_text(),
                obs_layout.to_text()
            )));
        }
        if action_dim != self.policy.action_dim() {
            return Err(Error::Incompatible(format!(
                "checkpoint acts in {} dimensions, environment in {}",
                self.policy.action_dim(),
                action_dim
            )));
        }
        Ok(())
    }

    /// Human-readable dump for diffing; not read back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let reals = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(s, "format_version {}", FORMAT_VERSION).unwrap();
        writeln!(s, "seed {}", self.seed).unwrap();
        writeln!(s, "updates {}", self.updates).unwrap();
        writeln!(s, "env_steps {}", self.env_steps).unwrap();
        writeln!(s, "observation_layout {}", self.obs_layout.to_text()).unwrap();
        writeln!(s, "[config]").unwrap();
        s.push_str(&self.config.to_text());
        for (name, net) in [("actor", &self.policy.mean_net), ("critic", &self.critic)] {
            let spec = net.spec();
            writeln!(
                s,
                "[{}] sizes {:?} hidden {} output {}",
                name,
                spec.layer_sizes(),
                spec.hidden_activation().name(),
                spec.output_activation().name()
            )
            .unwrap();
            for l in 0..spec.num_layers() {
                writeln!(s, "layer {} weights {}", l, reals(net.weights(l))).unwrap();
                writeln!(s, "layer {} bias {}", l, reals(net.bias(l))).unwrap();
            }
        }
        writeln!(s, "log_std {}", reals(&self.policy.log_std)).unwrap();
        for (name, a) in [
            ("actor", &self.adam.actor),
            ("log_std", &self.adam.log_std),
            ("critic", &self.adam.critic),
        ] {
            writeln!(s, "[adam {}] t {} lr {}", name, a.t, a.config.lr).unwrap();
            writeln!(s, "m {}", reals(&a.m)).unwrap();
            writeln!(s, "v {}", reals(&a.v)).unwrap();
        }
        s
    }
}
