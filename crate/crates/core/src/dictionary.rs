//! Dictionaries of unit-norm atoms and their conditioning metrics.
//!
//! A [`Dictionary`] is a `d x n` matrix whose columns (atoms) have unit
//! Euclidean norm. [`DictionaryMetrics`] caches the Gram matrix once and
//! derives the coherence, the Babel function, the recoverable sparsity
//! `m*`, the exact recovery statistic and singular-value lower bounds from
//! that single copy, so all of them agree bit for bit.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum deviation of a column norm from 1 accepted on construction.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Columns below this norm cannot be normalized.
pub const ZERO_COLUMN_TOL: f64 = 1e-12;

/// Support atoms whose smallest singular value falls below this are
/// treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
}

impl Dictionary {
    /// Wraps `data`, rejecting columns that are not unit norm.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(data, false)
    }

    /// Divides every column by its norm before wrapping.
    pub fn normalized(data: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(data, true)
    }

    pub fn from_matrix(mut data: DMatrix<f64>, normalize: bool) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Empty);
        }
        for col in 0..data.ncols() {
            for row in 0..data.nrows() {
                if !data[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        for (col, mut column) in data.column_iter_mut().enumerate() {
            let norm = column.norm();
            if normalize {
                if norm < ZERO_COLUMN_TOL {
                    return Err(Error::ZeroColumn { col, norm });
                }
                column /= norm;
            } else if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm {
                    col,
                    norm,
                    tol: UNIT_NORM_TOL,
                });
            }
        }
        Ok(Self { atoms: data })
    }

    /// Builds a dictionary from a list of atoms, each of length `d`.
    pub fn from_columns(columns: &[Vec<f64>], normalize: bool) -> Result<Self> {
        let n = columns.len();
        let d = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        let data = DMatrix::from_fn(d, n, |i, j| columns[j][i]);
        Self::from_matrix(data, normalize)
    }

    /// The canonical basis of R^n.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    /// Signal dimension (rows).
    pub fn d(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms (columns).
    pub fn n(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> DVectorView<'_, f64> {
        self.atoms.column(i)
    }

    /// All inner products `<phi_i, r>`, i.e. `Phi^t r`.
    pub fn correlations(&self, r: &DVector<f64>) -> DVector<f64> {
        self.atoms.tr_mul(r)
    }

    /// `Phi x` for a dense coefficient vector.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.atoms * x
    }

    /// `Phi x` for a coefficient vector given by its nonzero entries.
    pub fn apply_sparse<I>(&self, entries: I) -> DVector<f64>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut out = DVector::zeros(self.d());
        for (i, v) in entries {
            out.axpy(v, &self.atoms.column(i), 1.0);
        }
        out
    }

    /// Columns indexed by `support`, in support order.
    pub fn submatrix(&self, support: &Support) -> DMatrix<f64> {
        self.atoms.select_columns(support.indices())
    }
}

/// A strictly increasing set of atom indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Support(Vec<usize>);

impl Support {
    /// Sorts `indices` and checks them against the atom count `n`.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSupport(format!("duplicate index {}", w[0])));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::InvalidSupport(format!(
                    "index {last} out of range for {n} atoms"
                )));
            }
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Indices in `0..n` not in the support, increasing.
    pub fn complement(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        (0..n).filter(move |&i| !self.contains(i))
    }
}

/// Gram-derived conditioning numbers of a dictionary.
#[derive(Debug, Clone)]
pub struct DictionaryMetrics {
    gram: DMatrix<f64>,
    coherence: Option<f64>,
    babel: Vec<f64>,
    m_star: usize,
}

impl DictionaryMetrics {
    /// Computes every metric with the Babel function tabulated up to `n - 1`.
    pub fn new(dict: &Dictionary) -> Self {
        let depth = dict.n() - 1;
        Self::with_babel_depth(dict, depth).expect("n - 1 is always a valid depth")
    }

    /// Same as [`DictionaryMetrics::new`] but only tabulates `mu1(0..=m_max)`.
    pub fn with_babel_depth(dict: &Dictionary, m_max: usize) -> Result<Self> {
        let n = dict.n();
        if m_max > n - 1 {
            return Err(Error::Range {
                what: "m_max",
                value: m_max,
                lo: 0,
                hi: n - 1,
            });
        }
        let gram = gram_matrix(dict);
        let coherence = (n >= 2).then(|| max_off_diagonal(&gram));
        let babel = babel_from_gram(&gram, m_max);
        let m_star = match coherence {
            None => n,
            Some(mu) => match recoverable_sparsity(mu) {
                Ok(m) => m.min(n),
                Err(_) => n,
            },
        };
        Ok(Self {
            gram,
            coherence,
            babel,
            m_star,
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn n(&self) -> usize {
        self.gram.ncols()
    }

    /// `mu = max_{j != k} |<phi_j, phi_k>|`.
    pub fn coherence(&self) -> Result<f64> {
        self.coherence.ok_or(Error::SingleAtom)
    }

    /// `[mu1(0), ..., mu1(m_max)]`.
    pub fn babel(&self, m_max: usize) -> Result<&[f64]> {
        if m_max >= self.babel.len() {
            return Err(Error::Range {
                what: "m_max",
                value: m_max,
                lo: 0,
                hi: self.babel.len() - 1,
            });
        }
        Ok(&self.babel[..=m_max])
    }

    pub fn babel_at(&self, m: usize) -> Result<f64> {
        self.babel(m).map(|b| b[m])
    }

    /// Deepest tabulated Babel index.
    pub fn babel_depth(&self) -> usize {
        self.babel.len() - 1
    }

    /// Largest `m` with `m < (1/mu + 1) / 2`, capped at `n`.
    ///
    /// A zero-coherence (orthonormal) dictionary and a single-atom
    /// dictionary both report `n`: every support is recoverable.
    pub fn m_star(&self) -> usize {
        self.m_star
    }

    /// Whether sparsity `m` satisfies `m < (1/mu + 1) / 2`.
    pub fn recovery_condition(&self, m: usize) -> bool {
        match self.coherence {
            None => m <= 1,
            Some(mu) => sparsity_condition(mu, m),
        }
    }

    /// Exact recovery statistic `max_{i not in support} ||Phi_S^+ phi_i||_1`.
    ///
    /// The pseudoinverse is applied through the normal equations
    /// `G_SS z = G_Si`, factored once by Cholesky, using the cached Gram
    /// entries. Callers compare the result against 1.
    pub fn erc(&self, dict: &Dictionary, support: &Support) -> Result<f64> {
        let n = self.n();
        if dict.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: dict.n(),
            });
        }
        if let Some(&last) = support.indices().last() {
            if last >= n {
                return Err(Error::InvalidSupport(format!("index {last} >= {n}")));
            }
        }
        if support.is_empty() {
            return Ok(0.0);
        }
        let sigma_min = smallest_singular_value(dict, support);
        if sigma_min <= RANK_TOL {
            return Err(Error::RankDeficientSupport { sigma_min });
        }
        let idx = support.indices();
        let g_ss = self.gram.select_rows(idx).select_columns(idx);
        let chol = g_ss
            .cholesky()
            .ok_or(Error::RankDeficientSupport { sigma_min })?;
        let mut worst: f64 = 0.0;
        for i in support.complement(n) {
            let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&j| self.gram[(j, i)]));
            let z = chol.solve(&rhs);
            worst = worst.max(z.lp_norm(1));
        }
        Ok(worst)
    }

    /// `sqrt(1 - mu1(m-1))`, a lower bound on the smallest singular value
    /// of any `m` atoms.
    pub fn lambda_min_lower_bound(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Err(Error::Range {
                what: "m",
                value: 0,
                lo: 1,
                hi: self.babel.len(),
            });
        }
        let mu1 = self.babel_at(m - 1)?;
        if mu1 >= 1.0 {
            return Err(Error::BoundVacuous { mu1 });
        }
        Ok((1.0 - mu1).sqrt())
    }
}

/// Coherence of `dict` (computes the Gram matrix).
pub fn coherence(dict: &Dictionary) -> Result<f64> {
    if dict.n() < 2 {
        return Err(Error::SingleAtom);
    }
    DictionaryMetrics::with_babel_depth(dict, 1)?.coherence()
}

/// Babel function `[mu1(0), ..., mu1(m_max)]` of `dict`.
pub fn babel(dict: &Dictionary, m_max: usize) -> Result<Vec<f64>> {
    Ok(DictionaryMetrics::with_babel_depth(dict, m_max)?
        .babel
        .clone())
}

/// `m < (1/mu + 1) / 2`, evaluated as `(2m - 1) mu < 1` to avoid the reciprocal.
pub fn sparsity_condition(mu: f64, m: usize) -> bool {
    if m == 0 {
        return true;
    }
    (2 * m - 1) as f64 * mu < 1.0
}

/// Largest integer `m` with `m < (1/mu + 1) / 2`.
///
/// Searches downward from just above `ceil((1/mu + 1) / 2)` and tests the
/// inequality directly, so no ceiling formula decides the boundary.
pub fn recoverable_sparsity(mu: f64) -> Result<usize> {
    if mu <= 0.0 {
        return Err(Error::ZeroCoherence);
    }
    let start = (0.5 * (1.0 / mu + 1.0)).ceil() as usize + 1;
    Ok((1..=start)
        .rev()
        .find(|&m| sparsity_condition(mu, m))
        .unwrap_or(0))
}

/// Smallest singular value of the atoms indexed by `support`
/// (zero when the support has more atoms than the signal dimension).
pub fn smallest_singular_value(dict: &Dictionary, support: &Support) -> f64 {
    if support.is_empty() {
        return f64::INFINITY;
    }
    if support.len() > dict.d() {
        return 0.0;
    }
    let sub = dict.submatrix(support);
    sub.singular_values().min()
}

fn gram_matrix(dict: &Dictionary) -> DMatrix<f64> {
    let mut gram = dict.atoms().tr_mul(dict.atoms());
    // mirror the upper triangle so G[i][j] and G[j][i] are the same bits
    let n = gram.ncols();
    for j in 0..n {
        for i in (j + 1)..n {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    gram
}

fn max_off_diagonal(gram: &DMatrix<f64>) -> f64 {
    let n = gram.ncols();
    let mut best: f64 = 0.0;
    for j in 1..n {
        for i in 0..j {
            best = best.max(gram[(i, j)].abs());
        }
    }
    best
}

fn descending(a: &f64, b: &f64) -> Ordering {
    b.partial_cmp(a).unwrap_or(Ordering::Equal)
}

/// Babel function from a Gram matrix.
///
/// For a fixed outside atom `i`, the sum over `|Lambda| = m` of
/// `|<phi_i, phi_j>|` is maximized by taking the `m` largest off-diagonal
/// magnitudes of row `i`: every term is nonnegative, so swapping any chosen
/// entry for a larger unchosen one cannot decrease the sum. Hence
/// `mu1(m) = max_i (sum of the m largest |G_ij|, j != i)`, and the prefix
/// sums of each row sorted in decreasing order give every `m` at once.
fn babel_from_gram(gram: &DMatrix<f64>, m_max: usize) -> Vec<f64> {
    let n = gram.ncols();
    let mut out = vec![0.0; m_max + 1];
    if m_max == 0 {
        return out;
    }
    let mut row = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        row.clear();
        // column i equals row i (the Gram matrix is exactly symmetric)
        row.extend(
            gram.column(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.abs()),
        );
        if m_max < row.len() {
            row.select_nth_unstable_by(m_max - 1, descending);
            row.truncate(m_max);
        }
        row.sort_unstable_by(descending);
        let mut acc = 0.0;
        for (k, v) in row.iter().enumerate() {
            acc += v;
            if acc > out[k + 1] {
                out[k + 1] = acc;
            }
        }
    }
    out
}
