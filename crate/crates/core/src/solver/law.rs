use crate::error::{Error, Result};
use crate::hmm::HmmModel;
use crate::info::{entropy, CompensatedSum};

/// Joint law `p(y_d, y, x) = pi(y_d) w_d(y|y_d) q(x|y)` on finite alphabets,
/// stored with `x` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteJointLaw {
    yd_size: usize,
    y_size: usize,
    x_size: usize,
    table: Vec<f64>,
}

impl FiniteJointLaw {
    pub fn new(yd_size: usize, y_size: usize, x_size: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != yd_size * y_size * x_size || table.is_empty() {
            return Err(Error::Validation(format!(
                "joint table has {} entries, expected {yd_size}x{y_size}x{x_size}",
                table.len()
            )));
        }
        if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Validation(
                "joint table has a negative or non-finite entry".into(),
            ));
        }
        let total: f64 = table.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("joint table sums to {total}")));
        }
        Ok(Self {
            yd_size,
            y_size,
            x_size,
            table,
        })
    }

    /// The law of `(Y_{i-d}, Y_i, X_i)` under `model`.
    pub fn from_model(model: &HmmModel, d: u32) -> Self {
        let (ny, nx) = (model.y_size(), model.x_size());
        let wd = model.chain().delay_kernel(d);
        let pi = model.chain().stationary();
        let mut table = Vec::with_capacity(ny * ny * nx);
        for yd in 0..ny {
            for y in 0..ny {
                for x in 0..nx {
                    table.push(pi.get(yd) * wd.get(yd, y) * model.emission().get(y, x));
                }
            }
        }
        Self {
            yd_size: ny,
            y_size: ny,
            x_size: nx,
            table,
        }
    }

    /// Law of `(Y_d, X)` alone, with a one-letter `Y`.
    pub fn without_y(&self) -> Self {
        let mut table = vec![0.0; self.yd_size * self.x_size];
        for yd in 0..self.yd_size {
            for y in 0..self.y_size {
                for x in 0..self.x_size {
                    table[yd * self.x_size + x] += self.get(yd, y, x);
                }
            }
        }
        Self {
            yd_size: self.yd_size,
            y_size: 1,
            x_size: self.x_size,
            table,
        }
    }

    /// Law with `Y_d` replaced by a constant (no delayed side information).
    pub fn without_delayed(&self) -> Self {
        let block = self.y_size * self.x_size;
        let mut table = vec![0.0; block];
        for chunk in self.table.chunks(block) {
            for (acc, p) in table.iter_mut().zip(chunk) {
                *acc += p;
            }
        }
        Self {
            yd_size: 1,
            y_size: self.y_size,
            x_size: self.x_size,
            table,
        }
    }

    #[inline]
    pub fn get(&self, yd: usize, y: usize, x: usize) -> f64 {
        self.table[(yd * self.y_size + y) * self.x_size + x]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn yd_size(&self) -> usize {
        self.yd_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    /// Number of source states `(y_d, y, x)`.
    pub fn states(&self) -> usize {
        self.table.len()
    }

    /// `H(X | Y_d)` in bits.
    pub fn conditional_entropy_x_given_delayed(&self) -> f64 {
        let law = self.without_y();
        let marginal: Vec<f64> = law
            .table
            .chunks(law.x_size)
            .map(|c| c.iter().copied().collect::<CompensatedSum>().value())
            .collect();
        entropy(&law.table) - entropy(&marginal)
    }
}

/// Per-letter distortion `d(x, y, z)` with values in `[0, d_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMetric {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    table: Vec<f64>,
}

impl DistortionMetric {
    pub fn from_fn(
        x_size: usize,
        y_size: usize,
        z_size: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut table = Vec::with_capacity(x_size * y_size * z_size);
        for x in 0..x_size {
            for y in 0..y_size {
                for z in 0..z_size {
                    table.push(f(x, y, z));
                }
            }
        }
        if z_size == 0 || table.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation(
                "distortion entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            x_size,
            y_size,
            z_size,
            table,
        })
    }

    /// `1(x != z)` with `Z = X`.
    pub fn hamming_x(x_size: usize, y_size: usize) -> Self {
        Self::from_fn(x_size, y_size, x_size, |x, _, z| (x != z) as u8 as f64).expect("hamming entries are valid")
    }

    /// `1(y != z)` with `Z = Y`.
    pub fn hamming_y(x_size: usize, y_size: usize) -> Self {
        Self::from_fn(x_size, y_size, y_size, |_, y, z| (y != z) as u8 as f64).expect("hamming entries are valid")
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.table[(x * self.y_size + y) * self.z_size + z]
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    pub fn d_max(&self) -> f64 {
        self.table.iter().copied().fold(0.0, f64::max)
    }

    pub fn depends_on_y(&self) -> bool {
        (0..self.x_size)
            .any(|x| (0..self.z_size).any(|z| (1..self.y_size).any(|y| self.get(x, y, z) != self.get(x, 0, z))))
    }

    pub(crate) fn check_against(&self, law: &FiniteJointLaw, name: &str) -> Result<()> {
        if self.x_size != law.x_size() || (self.y_size != law.y_size() && self.y_size != 1) {
            return Err(Error::Validation(format!(
                "{name} is defined on |X|={}, |Y|={} but the law has |X|={}, |Y|={}",
                self.x_size,
                self.y_size,
                law.x_size(),
                law.y_size()
            )));
        }
        Ok(())
    }

    /// Lookup that tolerates a metric given on a one-letter `Y`.
    #[inline]
    pub(crate) fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        let y = if self.y_size == 1 { 0 } else { y };
        self.get(x, y, z)
    }
}

/// Dense joint probability table over named-by-position variables, used to
/// evaluate information quantities of a solved channel from scratch.
#[derive(Debug, Clone)]
pub struct JointTable {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), probs.len());
        Self { dims, probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Marginal over the listed variables (in the listed order).
    pub fn marginal(&self, keep: &[usize]) -> Vec<f64> {
        let size: usize = keep.iter().map(|&v| self.dims[v]).product();
        let mut out = vec![0.0; size];
        let mut digits = vec![0usize; self.dims.len()];
        for &p in &self.probs {
            if p != 0.0 {
                let mut idx = 0;
                for &v in keep {
                    idx = idx * self.dims[v] + digits[v];
                }
                out[idx] += p;
            }
            for v in (0..digits.len()).rev() {
                digits[v] += 1;
                if digits[v] < self.dims[v] {
                    break;
                }
                digits[v] = 0;
            }
        }
        out
    }

    pub fn entropy_of(&self, vars: &[usize]) -> f64 {
        if vars.is_empty() {
            return 0.0;
        }
        entropy(&self.marginal(vars))
    }

    /// `I(A; B | C)` in bits.
    pub fn conditional_mi(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let join = |parts: &[&[usize]]| parts.iter().flat_map(|p| p.iter().copied()).collect::<Vec<_>>();
        self.entropy_of(&join(&[a, c])) + self.entropy_of(&join(&[b, c]))
            - self.entropy_of(&join(&[a, b, c]))
            - self.entropy_of(c)
    }

    /// `E[f(digits)]`.
    pub fn expectation(&self, f: impl Fn(&[usize]) -> f64) -> f64 {
        let mut digits = vec![0usize; self.dims.len()];
        let mut acc = CompensatedSum::new();
        for &p in &self.probs {
            if p != 0.0 {
                acc.add(p * f(&digits));
            }
            for v in (0..digits.len()).rev() {
                digits[v] += 1;
                if digits[v] < self.dims[v] {
                    break;
                }
                digits[v] = 0;
            }
        }
        acc.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_law_marginals() {
        let m = HmmModel::binary(0.1, 0.1).unwrap();
        let law = FiniteJointLaw::from_model(&m, 1);
        assert!((law.table().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let xd = law.without_y();
        // P(X != Y_d) = eps * q = 0.18
        let flip = xd.get(0, 0, 1) + xd.get(1, 0, 0);
        assert!((flip - 0.18).abs() < 1e-15);
        // d = 0: Y_d = Y
        let law0 = FiniteJointLaw::from_model(&m, 0);
        assert_eq!(law0.get(0, 1, 0), 0.0);
    }

    #[test]
    fn joint_table_mi() {
        // X uniform bit, Z = X: I(X;Z) = 1, I(X;Z|X) = 0
        let t = JointTable::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]);
        assert!((t.conditional_mi(&[0], &[1], &[]) - 1.0).abs() < 1e-15);
        assert!(t.conditional_mi(&[0], &[1], &[0]).abs() < 1e-15);
        assert_eq!(t.marginal(&[1]), vec![0.5, 0.5]);
    }

    #[test]
    fn metric_y_dependence() {
        assert!(!DistortionMetric::hamming_x(2, 2).depends_on_y());
        assert!(DistortionMetric::hamming_y(2, 2).depends_on_y());
        assert_eq!(DistortionMetric::hamming_x(3, 1).d_max(), 1.0);
    }
}
