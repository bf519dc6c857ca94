use crate::config::KeyValues;
use crate::nn::Hyperparams;
use crate::{Error, Result};

/// Hyperparameter grid, seeds and the number of models kept per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub filters: Vec<usize>,
    pub kernels: Vec<usize>,
    pub dropouts: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub top_m: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            filters: vec![50, 150, 250, 350, 450, 550],
            kernels: vec![2, 4, 6, 8, 10],
            dropouts: vec![0.2, 0.4, 0.6, 0.8],
            learning_rates: vec![0.0003, 0.0001, 0.003, 0.001],
            seeds: vec![1337, 1331, 42],
            top_m: 5,
        }
    }
}

impl GridSpec {
    /// Reads `d_c`, `k`, `q`, `eta`, `seeds` and `top_m`; absent keys keep
    /// their defaults.
    pub fn from_config(kv: &KeyValues) -> Result<GridSpec> {
        let d = GridSpec::default();
        let spec = GridSpec {
            filters: kv.list("d_c")?.unwrap_or(d.filters),
            kernels: kv.list("k")?.unwrap_or(d.kernels),
            dropouts: kv.list("q")?.unwrap_or(d.dropouts),
            learning_rates: kv.list("eta")?.unwrap_or(d.learning_rates),
            seeds: kv.list("seeds")?.unwrap_or(d.seeds),
            top_m: kv.parsed("top_m")?.unwrap_or(d.top_m),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_config(&self) -> KeyValues {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let mut kv = KeyValues::new();
        kv.set("d_c", join(&self.filters));
        kv.set("k", join(&self.kernels));
        kv.set("q", join(&self.dropouts));
        kv.set("eta", join(&self.learning_rates));
        kv.set("seeds", join(&self.seeds));
        kv.set("top_m", self.top_m.to_string());
        kv
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("d_c", self.filters.len()),
            ("k", self.kernels.len()),
            ("q", self.dropouts.len()),
            ("eta", self.learning_rates.len()),
            ("seeds", self.seeds.len()),
        ];
        for (name, n) in lists {
            if n == 0 {
                return Err(Error::invalid(format!("grid list `{name}` is empty")));
            }
        }
        if self.top_m == 0 {
            return Err(Error::invalid("top_m must be at least 1"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::invalid("grid seeds must be distinct"));
        }
        for hp in enumerate_grid(self)? {
            hp.validate()?;
        }
        Ok(())
    }

    pub fn num_combinations(&self) -> usize {
        self.filters.len() * self.kernels.len() * self.dropouts.len() * self.learning_rates.len()
    }
}

/// Cartesian product with `d_c` outermost, then `k`, `q` and `eta`.
pub fn enumerate_grid(spec: &GridSpec) -> Result<Vec<Hyperparams>> {
    if spec.filters.is_empty()
        || spec.kernels.is_empty()
        || spec.dropouts.is_empty()
        || spec.learning_rates.is_empty()
    {
        return Err(Error::invalid("every grid list needs at least one value"));
    }
    let mut out = Vec::with_capacity(spec.num_combinations());
    for &filters in &spec.filters {
        for &kernel in &spec.kernels {
            for &dropout in &spec.dropouts {
                for &learning_rate in &spec.learning_rates {
                    out.push(Hyperparams {
                        filters,
                        kernel,
                        dropout,
                        learning_rate,
                    });
                }
            }
        }
    }
    Ok(out)
}
