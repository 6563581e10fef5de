use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Labels};
use crate::kv::KeyValues;
use crate::nn::{sample_sparse_network, Network, NetworkSpec};
use crate::seed::{self, stream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputDist {
    /// Uniform on `[-1, 1]^p`.
    Uniform,
    /// Standard normal in every coordinate.
    Normal,
}

impl std::str::FromStr for InputDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InputDist::Uniform),
            "normal" => Ok(InputDist::Normal),
            _ => Err(Error::Config(format!("unknown input distribution {s:?}"))),
        }
    }
}

/// Regression task `y = f*(x) + N(0, noise_std²)` with a known teacher `f*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub teacher: Network,
    pub input: InputDist,
    pub noise_std: f64,
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub data: Dataset,
    /// Teacher values at the sampled inputs.
    pub f_star: Array2<f64>,
    pub noise_var: f64,
}

impl SyntheticSpec {
    pub fn new(teacher: Network, input: InputDist, noise_std: f64) -> Result<Self> {
        if teacher.spec.output_dim() != 1 {
            return Err(Error::InvalidArgument(
                "teacher must have a single output".into(),
            ));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_std {noise_std} must be >= 0"
            )));
        }
        Ok(SyntheticSpec {
            teacher,
            input,
            noise_std,
        })
    }

    /// Teacher drawn from the sparse bounded class: `U[-1, 1]` entries at
    /// `sparsity` random positions (all positions when `None`).
    pub fn with_sampled_teacher(
        widths: Vec<usize>,
        teacher_seed: u64,
        sparsity: Option<usize>,
        input: InputDist,
        noise_std: f64,
    ) -> Result<Self> {
        let spec = NetworkSpec::new(widths)?;
        let s = sparsity.unwrap_or(spec.param_count());
        let params = sample_sparse_network(&spec, s, &mut seed::rng(teacher_seed))?;
        Self::new(Network::new(spec, params)?, input, noise_std)
    }

    /// Keys: `widths`, `teacher_seed`, optional `sparsity`, `input`
    /// (`uniform` or `normal`, default uniform), `noise_std`.
    pub fn from_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.reject_unknown(&["widths", "teacher_seed", "sparsity", "input", "noise_std"])?;
        let widths = kv
            .list::<usize>("widths")?
            .ok_or_else(|| Error::Config("missing required key \"widths\"".into()))?;
        Self::with_sampled_teacher(
            widths,
            kv.get_or("teacher_seed", 0)?,
            kv.get("sparsity")?,
            kv.get_or("input", InputDist::Uniform)?,
            kv.get_or("noise_std", 0.0)?,
        )
    }

    pub fn sample_inputs(&self, n: usize, rng: &mut dyn rand::RngCore) -> Array2<f64> {
        let p = self.teacher.spec.input_dim();
        match self.input {
            InputDist::Uniform => Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..=1.0)),
            InputDist::Normal => Array2::from_shape_fn((n, p), |_| StandardNormal.sample(rng)),
        }
    }

    pub fn f_star(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.teacher.predict(x.view())
    }
}

/// `n` samples; inputs and noise come from separate streams of `seed`.
pub fn synthetic_regression(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<SyntheticData> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let x = spec.sample_inputs(n, &mut seed::rng(seed::child(seed, stream::INPUTS)));
    let f_star = spec.f_star(&x)?;
    let mut noise_rng = seed::rng(seed::child(seed, stream::NOISE));
    let y = f_star.mapv(|f| {
        let e: f64 = StandardNormal.sample(&mut noise_rng);
        f + spec.noise_std * e
    });
    let mut data = Dataset::new(x, Labels::Real(y))?;
    let p = data.n_features();
    data.feature_names = Some((0..p).map(|j| format!("x{j}")).collect());
    data.target_name = Some("y".into());
    Ok(SyntheticData {
        data,
        f_star,
        noise_var: spec.noise_std * spec.noise_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_targets_equal_teacher() {
        let spec =
            SyntheticSpec::with_sampled_teacher(vec![3, 8, 1], 1, None, InputDist::Uniform, 0.0)
                .unwrap();
        let s = synthetic_regression(&spec, 50, 2).unwrap();
        assert_eq!(s.noise_var, 0.0);
        let Labels::Real(y) = &s.data.y else {
            unreachable!()
        };
        assert_eq!(y, &s.f_star);
        assert!(s.data.x.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn spec_text() {
        let spec = SyntheticSpec::from_text(
            "widths = 2, 4, 1\nteacher_seed = 7\nsparsity = 5\ninput = normal\nnoise_std = 0.5\n",
        )
        .unwrap();
        assert_eq!(spec.input, InputDist::Normal);
        assert_eq!(spec.noise_std, 0.5);
        assert!(crate::nn::sparsity_count(&spec.teacher.params, 0.0) <= 5);
        assert!(SyntheticSpec::from_text("widths = 2, 4, 2").is_err());
        assert!(SyntheticSpec::from_text("widths = 2, 1\nbogus = 1").is_err());
    }
}
