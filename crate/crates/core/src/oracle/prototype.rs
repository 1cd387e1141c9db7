use super::{check_range, Oracle};
use crate::data::Dataset;
use crate::error::{Error, OracleError, Result};
use crate::numeric::Tensor;

/// `logistic(cos(x, p_l) / temperature + bias)`.
#[derive(Clone, Debug)]
pub struct PrototypeOracle {
    prototypes: Tensor,
    norms: Vec<f64>,
    temperature: f64,
    bias: f64,
}

impl PrototypeOracle {
    pub const DEFAULT_TEMPERATURE: f64 = 0.25;
    pub const DEFAULT_BIAS: f64 = -2.0;

    pub fn new(prototypes: Tensor, temperature: f64, bias: f64) -> Result<Self> {
        if !(temperature > 0.0) || !bias.is_finite() {
            return Err(Error::Config(format!("temperature must be > 0 (got {temperature}), bias finite")));
        }
        if prototypes.shape().len() != 2 || prototypes.rows() == 0 {
            return Err(Error::Dimension("prototypes must be a non-empty [K, d] matrix".into()));
        }
        let norms = (0..prototypes.rows()).map(|k| norm(prototypes.row(k))).collect();
        Ok(Self { prototypes, norms, temperature, bias })
    }

    /// Uses the per-class mean of `ds` as each concept's prototype.
    pub fn from_class_means(ds: &Dataset, temperature: f64, bias: f64) -> Result<Self> {
        let k = ds.num_classes();
        let d = ds.dim();
        let mut sums = Tensor::zeros(vec![k, d]);
        let mut counts = vec![0usize; k];
        for (i, &y) in ds.labels.iter().enumerate() {
            counts[y] += 1;
            for (s, v) in sums.row_mut(y).iter_mut().zip(ds.inputs.row(i)) {
                *s += v;
            }
        }
        for (c, &n) in counts.iter().enumerate() {
            if n == 0 {
                return Err(Error::Task(format!("class {c} has no samples to form a prototype")));
            }
            sums.row_mut(c).iter_mut().for_each(|v| *v /= n as f64);
        }
        Self::new(sums, temperature, bias)
    }

    pub fn num_concepts(&self) -> usize {
        self.prototypes.rows()
    }

    pub fn similarity(&self, instance: &[f64], concept: usize) -> Result<f64, OracleError> {
        let k = self.num_concepts();
        if concept >= k {
            return Err(OracleError::Concept { concept, classes: k });
        }
        let p = self.prototypes.row(concept);
        let denom = norm(instance) * self.norms[concept];
        let cos = if denom > 0.0 { instance.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() / denom } else { 0.0 };
        check_range(logistic(cos / self.temperature + self.bias))
    }
}

impl Oracle for PrototypeOracle {
    fn query(&self, instance: &[f64], _instance_id: u64, concept: usize) -> Result<f64, OracleError> {
        self.similarity(instance, concept)
    }

    fn kind(&self) -> &str {
        "prototype"
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_axes(t: f64, b: f64) -> PrototypeOracle {
        PrototypeOracle::new(Tensor::new(vec![2, 3], vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0]).unwrap(), t, b).unwrap()
    }

    #[test]
    fn self_similarity_tends_to_one() {
        let o = two_axes(1e-3, PrototypeOracle::DEFAULT_BIAS);
        let s = o.query(&[3.0, 0.0, 0.0], 0, 0).unwrap();
        assert!(s > 1.0 - 1e-12, "{s}");
    }

    #[test]
    fn orthogonal_instance() {
        assert_eq!(two_axes(0.25, 0.0).query(&[0.0, 0.0, 5.0], 0, 0).unwrap(), 0.5);
        // 1 / (1 + e^2)
        let expected = 0.119_202_922_022_117_58;
        let got = two_axes(0.25, -2.0).query(&[0.0, 0.0, 5.0], 0, 1).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn concept_out_of_range() {
        assert!(matches!(two_axes(0.25, -2.0).query(&[1.0, 0.0, 0.0], 0, 2), Err(OracleError::Concept { .. })));
    }
}
