//! Named parameter store shared by all models: deterministic
//! initialization, per-step graph binding, and Adam updates.

use crate::checkpoint::TensorMap;
use crate::error::{Error, Result};
use crate::tensor::{Graph, TensorId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Mix a label into a base seed. Used everywhere a component needs its
/// own reproducible random stream (per-parameter init, per-step dropout,
/// per-epoch shuffles), so streams never interfere across components.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ base.wrapping_mul(0x9e3779b97f4a7c15);
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    // splitmix finalizer
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58476d1ce4e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d049bb133111eb);
    h ^ (h >> 31)
}

pub fn derive_seed2(base: u64, label: &str, index: u64) -> u64 {
    derive_seed(derive_seed(base, label), &index.to_string())
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Ones,
    /// Glorot uniform over ±sqrt(6 / (fan_in + fan_out)).
    Xavier,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// All learnable weights of one model, keyed by unique name.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    pub adam_t: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter. Initial values come from a ChaCha stream
    /// derived from `(init_seed, name)`, so initialization depends only
    /// on the name and shape, never on registration order.
    pub fn register(&mut self, name: &str, shape: Vec<usize>, init: Init, init_seed: u64) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::Contract(format!("duplicate parameter name {name}")));
        }
        let numel: usize = shape.iter().product();
        let values = match init {
            Init::Zeros => vec![0.0; numel],
            Init::Ones => vec![1.0; numel],
            Init::Xavier => {
                let (fan_in, fan_out) = match shape.as_slice() {
                    [rows, cols] => (*rows, *cols),
                    [n] => (*n, *n),
                    _ => (numel, numel),
                };
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(init_seed, name));
                (0..numel).map(|_| rng.gen_range(-bound..bound)).collect()
            }
        };
        self.params.insert(
            name.to_string(),
            Param { shape, values, m: vec![0.0; numel], v: vec![0.0; numel] },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        self.params
            .get(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name}")))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(|s| s.as_str())
    }

    /// Insert every parameter as a gradient-tracked leaf on `graph`.
    pub fn bind(&self, graph: &mut Graph) -> Result<Bound> {
        let mut ids = BTreeMap::new();
        for (name, param) in &self.params {
            let id = graph.leaf(param.shape.clone(), param.values.clone(), true)?;
            ids.insert(name.clone(), id);
        }
        Ok(Bound { ids })
    }

    /// One Adam step from the gradients accumulated on `graph`.
    /// `lr == 0` leaves parameter values bit-identical (moments still
    /// advance, as a step did happen).
    pub fn adam_step(&mut self, graph: &Graph, bound: &Bound, lr: f64) -> Result<()> {
        self.adam_t += 1;
        let t = self.adam_t;
        let bias1 = 1.0 - ADAM_BETA1.powi(t as i32);
        let bias2 = 1.0 - ADAM_BETA2.powi(t as i32);
        for (name, param) in self.params.iter_mut() {
            let id = bound
                .ids
                .get(name)
                .ok_or_else(|| Error::Contract(format!("parameter {name} not bound to graph")))?;
            let grad = graph.grad(*id);
            for i in 0..param.values.len() {
                let g = grad[i];
                param.m[i] = ADAM_BETA1 * param.m[i] + (1.0 - ADAM_BETA1) * g;
                param.v[i] = ADAM_BETA2 * param.v[i] + (1.0 - ADAM_BETA2) * g * g;
                if lr != 0.0 {
                    let m_hat = param.m[i] / bias1;
                    let v_hat = param.v[i] / bias2;
                    param.values[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
        Ok(())
    }

    /// Export weights. With `with_opt_state`, Adam moments and the step
    /// counter ride along under reserved prefixes.
    pub fn to_tensor_map(&self, with_opt_state: bool) -> TensorMap {
        let mut map = TensorMap::new();
        for (name, param) in &self.params {
            map.insert(format!("param/{name}"), (param.shape.clone(), param.values.clone()));
            if with_opt_state {
                map.insert(format!("adam_m/{name}"), (param.shape.clone(), param.m.clone()));
                map.insert(format!("adam_v/{name}"), (param.shape.clone(), param.v.clone()));
            }
        }
        if with_opt_state {
            map.insert("meta/adam_t".into(), (vec![1], vec![self.adam_t as f64]));
        }
        map
    }

    pub fn from_tensor_map(map: &TensorMap) -> Result<Self> {
        let mut store = ParamStore::new();
        for (key, (shape, values)) in map {
            if let Some(name) = key.strip_prefix("param/") {
                store.params.insert(
                    name.to_string(),
                    Param {
                        shape: shape.clone(),
                        values: values.clone(),
                        m: vec![0.0; values.len()],
                        v: vec![0.0; values.len()],
                    },
                );
            }
        }
        if store.params.is_empty() {
            return Err(Error::Input("checkpoint holds no parameters".into()));
        }
        for (key, (_, values)) in map {
            if let Some(name) = key.strip_prefix("adam_m/") {
                if let Some(p) = store.params.get_mut(name) {
                    p.m = values.clone();
                }
            } else if let Some(name) = key.strip_prefix("adam_v/") {
                if let Some(p) = store.params.get_mut(name) {
                    p.v = values.clone();
                }
            } else if key == "meta/adam_t" {
                store.adam_t = values[0] as u64;
            }
        }
        Ok(store)
    }
}

/// Name → graph node mapping for one bound step.
pub struct Bound {
    ids: BTreeMap<String, TensorId>,
}

impl Bound {
    pub fn id(&self, name: &str) -> Result<TensorId> {
        self.ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::Contract(format!("parameter {name} not bound")))
    }
}
