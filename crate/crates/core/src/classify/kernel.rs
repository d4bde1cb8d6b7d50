use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simeval::dot;

/// Serializable kernel choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Kernel>> {
        KernelRegistry::with_builtin().build(self)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Rbf { gamma } => write!(f, "rbf(gamma={gamma})"),
        }
    }
}

/// A kernel expressible through inner products, so a Gram matrix of plain
/// dot products can be turned into any kernel's Gram matrix elementwise.
pub trait Kernel: Send + Sync {
    fn spec(&self) -> KernelSpec;

    /// k(x, z) given ⟨x,z⟩, ⟨x,x⟩ and ⟨z,z⟩.
    fn eval_inner(&self, xz: f64, xx: f64, zz: f64) -> f64;

    fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        self.eval_inner(dot(x, z), dot(x, x), dot(z, z))
    }
}

pub struct LinearKernel;

impl Kernel for LinearKernel {
    fn spec(&self) -> KernelSpec {
        KernelSpec::Linear
    }

    fn eval_inner(&self, xz: f64, _xx: f64, _zz: f64) -> f64 {
        xz
    }
}

/// exp(−γ‖x − z‖²)
pub struct RbfKernel {
    gamma: f64,
}

impl RbfKernel {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "rbf gamma must be positive, got {gamma}"
            )));
        }
        Ok(RbfKernel { gamma })
    }
}

impl Kernel for RbfKernel {
    fn spec(&self) -> KernelSpec {
        KernelSpec::Rbf { gamma: self.gamma }
    }

    fn eval_inner(&self, xz: f64, xx: f64, zz: f64) -> f64 {
        let sq = (xx + zz - 2.0 * xz).max(0.0);
        (-self.gamma * sq).exp()
    }
}

pub type KernelFactory = fn(&KernelSpec) -> Result<Box<dyn Kernel>>;

/// Name → constructor table for SVM kernels.
pub struct KernelRegistry {
    factories: BTreeMap<&'static str, KernelFactory>,
}

impl KernelRegistry {
    pub fn with_builtin() -> Self {
        let mut factories: BTreeMap<&'static str, KernelFactory> = BTreeMap::new();
        factories.insert("linear", |_| Ok(Box::new(LinearKernel)));
        factories.insert("rbf", |spec| match spec {
            KernelSpec::Rbf { gamma } => Ok(Box::new(RbfKernel::new(*gamma)?)),
            other => Err(Error::InvalidInput(format!("rbf factory given {other}"))),
        });
        KernelRegistry { factories }
    }

    pub fn register(&mut self, name: &'static str, factory: KernelFactory) {
        self.factories.insert(name, factory);
    }

    pub fn build(&self, spec: &KernelSpec) -> Result<Box<dyn Kernel>> {
        let factory = self
            .factories
            .get(spec.name())
            .ok_or_else(|| Error::InvalidInput(format!("unknown kernel {:?}", spec.name())))?;
        factory(spec)
    }
}

/// Dense symmetric Gram matrix over a fixed point set.
#[derive(Debug, Clone)]
pub struct Gram {
    n: usize,
    values: Vec<f64>,
}

impl Gram {
    /// Plain inner products ⟨xᵢ, xⱼ⟩.
    pub fn inner_products(points: &[Vec<f64>]) -> Self {
        use rayon::prelude::*;
        let n = points.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| dot(&points[i], &points[j])).collect())
            .collect();
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            debug_assert_eq!(row.len(), n, "row {i}");
            values.extend(row);
        }
        // force exact symmetry
        for i in 0..n {
            for j in 0..i {
                values[i * n + j] = values[j * n + i];
            }
        }
        Gram { n, values }
    }

    /// Applies `kernel` to an inner-product Gram matrix.
    pub fn apply(&self, kernel: &dyn Kernel) -> Self {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            let xx = self.values[i * n + i];
            for j in 0..n {
                let zz = self.values[j * n + j];
                values[i * n + j] = kernel.eval_inner(self.values[i * n + j], xx, zz);
            }
        }
        Gram { n, values }
    }

    pub fn of(points: &[Vec<f64>], kernel: &dyn Kernel) -> Self {
        Self::inner_products(points).apply(kernel)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}
