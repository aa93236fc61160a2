//! Seeded Gaussian dictionaries and exactly m-sparse test signals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, Support};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Coefficients below this magnitude are redrawn so instances stay exactly m-sparse.
pub const MIN_COEFFICIENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub dict_seed: u64,
    pub signal_seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(Error::InvalidConfig(format!(
                "d = {} and n = {} must be positive",
                self.d, self.n
            )));
        }
        if self.m > self.n {
            return Err(Error::InvalidConfig(format!(
                "sparsity m = {} exceeds atom count n = {}",
                self.m, self.n
            )));
        }
        Ok(())
    }
}

/// An exactly m-sparse signal `y = Phi x*` with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance {
    pub coefficients: DVector<f64>,
    pub support: Support,
    pub signal: DVector<f64>,
    pub l1_coeff_norm: f64,
    pub l2_signal_norm: f64,
    pub dict_seed: Option<u64>,
    pub signal_seed: Option<u64>,
}

impl SparseInstance {
    /// Builds an instance from dense ground-truth coefficients; the
    /// support is their nonzero pattern.
    pub fn from_coefficients(dict: &Dictionary, coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.len() != dict.n() {
            return Err(Error::DimensionMismatch {
                expected: dict.n(),
                got: coefficients.len(),
            });
        }
        let nz: Vec<usize> = (0..coefficients.len())
            .filter(|&i| coefficients[i] != 0.0)
            .collect();
        let support = Support::new(nz, dict.n())?;
        let signal = dict.apply_sparse(support.indices().iter().map(|&i| (i, coefficients[i])));
        Ok(Self {
            l1_coeff_norm: coefficients.lp_norm(1),
            l2_signal_norm: signal.norm(),
            coefficients,
            support,
            signal,
            dict_seed: None,
            signal_seed: None,
        })
    }

    pub fn m(&self) -> usize {
        self.support.len()
    }

    pub fn n(&self) -> usize {
        self.coefficients.len()
    }

    pub fn d(&self) -> usize {
        self.signal.len()
    }
}

/// `d x n` matrix of i.i.d. standard normals, columns normalized.
///
/// Entry `(i, j)` is draw `j * d + i` of the stream keyed by `dict_seed`
/// (column-major order).
pub fn gen_dictionary(cfg: &SynthConfig) -> Result<Dictionary> {
    cfg.validate()?;
    let mut rng = CounterRng::new(cfg.dict_seed);
    let values: Vec<f64> = (0..cfg.d * cfg.n).map(|_| rng.next_normal()).collect();
    Dictionary::normalized(DMatrix::from_vec(cfg.d, cfg.n, values))
}

/// Draws an m-sparse instance on `dict` from the stream keyed by `signal_seed`.
///
/// The support is the first `m` positions of a Fisher-Yates shuffle of
/// `0..n` (swap position `t` with `t + below(n - t)`); the `j`-th drawn
/// index then receives the `j`-th accepted normal coefficient.
pub fn gen_instance(dict: &Dictionary, cfg: &SynthConfig) -> Result<SparseInstance> {
    cfg.validate()?;
    if cfg.n != dict.n() || cfg.d != dict.d() {
        return Err(Error::DimensionMismatch {
            expected: cfg.d * cfg.n,
            got: dict.d() * dict.n(),
        });
    }
    let mut rng = CounterRng::new(cfg.signal_seed);
    let n = dict.n();
    let mut perm: Vec<usize> = (0..n).collect();
    for t in 0..cfg.m {
        let j = t + rng.next_below(n - t);
        perm.swap(t, j);
    }
    let mut coefficients = DVector::zeros(n);
    for &idx in &perm[..cfg.m] {
        let mut v = rng.next_normal();
        while v.abs() < MIN_COEFFICIENT {
            v = rng.next_normal();
        }
        coefficients[idx] = v;
    }
    let mut inst = SparseInstance::from_coefficients(dict, coefficients)?;
    inst.dict_seed = Some(cfg.dict_seed);
    inst.signal_seed = Some(cfg.signal_seed);
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize, n: usize, m: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            d,
            n,
            m,
            dict_seed: seed,
            signal_seed: seed ^ 0xABCD,
        }
    }

    #[test]
    fn dictionary_is_deterministic() {
        let a = gen_dictionary(&cfg(4, 4, 1, 0)).unwrap();
        let b = gen_dictionary(&cfg(4, 4, 1, 0)).unwrap();
        let bits = |d: &Dictionary| d.atoms().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = gen_dictionary(&cfg(4, 4, 1, 1)).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn columns_are_unit_norm() {
        for seed in 0..5 {
            let d = gen_dictionary(&cfg(17, 40, 3, seed)).unwrap();
            for c in d.atoms().column_iter() {
                assert!((c.norm() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(gen_dictionary(&cfg(0, 4, 0, 0)).is_err());
        assert!(cfg(4, 4, 5, 0).validate().is_err());
    }

    #[test]
    fn zero_sparsity_gives_zero_signal() {
        let c = cfg(6, 10, 0, 3);
        let d = gen_dictionary(&c).unwrap();
        let inst = gen_instance(&d, &c).unwrap();
        assert!(inst.support.is_empty());
        assert_eq!(inst.signal.norm(), 0.0);
    }

    #[test]
    fn orthonormal_single_atom() {
        let d = Dictionary::identity(5).unwrap();
        let c = SynthConfig {
            d: 5,
            n: 5,
            m: 1,
            dict_seed: 0,
            signal_seed: 11,
        };
        let inst = gen_instance(&d, &c).unwrap();
        let k = inst.support.indices()[0];
        let coeff = inst.coefficients[k];
        let expected = d.atom(k) * coeff;
        assert_eq!(inst.signal, expected);
    }

    #[test]
    fn instance_invariants_and_determinism() {
        let c = cfg(30, 60, 7, 21);
        let d = gen_dictionary(&c).unwrap();
        let a = gen_instance(&d, &c).unwrap();
        let b = gen_instance(&d, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.support.len(), 7);
        let nnz = a.coefficients.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nnz, 7);
        let recon = d.apply(&a.coefficients);
        assert!((&recon - &a.signal).norm() <= 1e-12 * a.signal.norm());
        assert!((a.l1_coeff_norm - a.coefficients.lp_norm(1)).abs() <= 1e-12 * a.l1_coeff_norm);
        assert!((a.l2_signal_norm - a.signal.norm()).abs() <= 1e-12 * a.l2_signal_norm);
    }

    #[test]
    fn support_is_uniform() {
        let d = Dictionary::identity(20).unwrap();
        let mut counts = [0usize; 20];
        let draws = 10_000;
        for s in 0..draws {
            let c = SynthConfig {
                d: 20,
                n: 20,
                m: 3,
                dict_seed: 0,
                signal_seed: s,
            };
            for &i in gen_instance(&d, &c).unwrap().support.indices() {
                counts[i] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let f = c as f64 / draws as f64;
            assert!((f - 0.15).abs() <= 0.02, "index {i}: {f}");
        }
    }
}
