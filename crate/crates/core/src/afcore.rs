//! Finite sums of matrix algebras and block-diagonal embeddings between them.
//!
//! An embedding `φ: ⊕_i M_{n_i} → ⊕_j M_{m_j}` is described by its multiplicity
//! matrix `α_{ji}` and is always kept in standard form: inside target block `j`
//! the copies of `M_{n_1}` come first, then those of `M_{n_2}`, …, and the zero
//! pad of size `n₀(j)` sits last on the diagonal.

use serde::{Deserialize, Serialize};

use crate::matalg::{CMatrix, ONE};
use crate::{Error, Result};

/// Ordered list of matrix sizes `(n_1, …, n_r)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AlgebraProfile {
    dims: Vec<usize>,
}

impl AlgebraProfile {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument(
                "algebra profile needs at least one summand".into(),
            ));
        }
        if let Some(k) = dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!("summand {k} has size 0")));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    /// `Σ_i n_i`, the trace of the unit.
    pub fn total_size(&self) -> usize {
        self.dims.iter().sum()
    }

    fn check_element(&self, a: &[CMatrix]) -> Result<()> {
        if a.len() != self.rank() {
            return Err(Error::DimensionMismatch(format!(
                "element has {} blocks, algebra has {}",
                a.len(),
                self.rank()
            )));
        }
        for (i, (m, &n)) in a.iter().zip(&self.dims).enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "block {i} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Identity element, block by block.
    pub fn identity(&self) -> Vec<CMatrix> {
        self.dims.iter().map(|&n| CMatrix::identity(n, n)).collect()
    }
}

impl TryFrom<Vec<usize>> for AlgebraProfile {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<AlgebraProfile> for Vec<usize> {
    fn from(p: AlgebraProfile) -> Self {
        p.dims
    }
}

impl std::fmt::Display for AlgebraProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| format!("M{n}")).collect();
        f.write_str(&parts.join("+"))
    }
}

/// A normalized embedding `φ` between two algebra profiles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    source: AlgebraProfile,
    target: AlgebraProfile,
    /// `mult[j][i] = α_{ji}`.
    mult: Vec<Vec<usize>>,
    /// `pad[j] = n₀(j)`.
    pad: Vec<usize>,
}

/// Checks `Σ_i α_{ji} n_i ≤ m_j` for every target block and fills in the pads.
pub fn validate_embedding(
    source: AlgebraProfile,
    target: AlgebraProfile,
    mult: Vec<Vec<usize>>,
) -> Result<EmbeddingSpec> {
    if mult.len() != target.rank() {
        return Err(Error::DimensionMismatch(format!(
            "multiplicity matrix has {} rows, target has {} blocks",
            mult.len(),
            target.rank()
        )));
    }
    let mut pad = Vec::with_capacity(target.rank());
    for (j, row) in mult.iter().enumerate() {
        if row.len() != source.rank() {
            return Err(Error::DimensionMismatch(format!(
                "multiplicity row {j} has {} entries, source has {} summands",
                row.len(),
                source.rank()
            )));
        }
        let used: usize = row.iter().zip(source.dims()).map(|(a, n)| a * n).sum();
        let available = target.dim(j);
        if used > available {
            return Err(Error::InfeasibleEmbedding {
                block: j,
                required: used,
                available,
            });
        }
        pad.push(available - used);
    }
    Ok(EmbeddingSpec {
        source,
        target,
        mult,
        pad,
    })
}

impl EmbeddingSpec {
    /// The identity embedding of a profile into itself.
    pub fn identity(profile: AlgebraProfile) -> Self {
        let r = profile.rank();
        let mult = (0..r)
            .map(|j| (0..r).map(|i| usize::from(i == j)).collect())
            .collect();
        Self {
            source: profile.clone(),
            target: profile,
            mult,
            pad: vec![0; r],
        }
    }

    pub fn source(&self) -> &AlgebraProfile {
        &self.source
    }

    pub fn target(&self) -> &AlgebraProfile {
        &self.target
    }

    pub fn mult(&self) -> &[Vec<usize>] {
        &self.mult
    }

    pub fn multiplicity(&self, j: usize, i: usize) -> usize {
        self.mult[j][i]
    }

    pub fn pad(&self) -> &[usize] {
        &self.pad
    }

    pub fn is_unital(&self) -> bool {
        self.pad.iter().all(|&p| p == 0)
    }

    /// Row offset of the enveloping block of summand `i` inside target block `j`.
    pub fn envelope_offset(&self, j: usize, i: usize) -> usize {
        (0..i).map(|k| self.mult[j][k] * self.source.dim(k)).sum()
    }

    /// Size `α_{ji} n_i` of the enveloping block of summand `i` in target block `j`.
    pub fn envelope_size(&self, j: usize, i: usize) -> usize {
        self.mult[j][i] * self.source.dim(i)
    }

    /// Row offset of copy `copy` (0-based) of summand `i` in target block `j`.
    pub fn slot_offset(&self, j: usize, i: usize, copy: usize) -> usize {
        self.envelope_offset(j, i) + copy * self.source.dim(i)
    }

    /// Row offset of the zero pad in target block `j`.
    pub fn pad_offset(&self, j: usize) -> usize {
        self.target.dim(j) - self.pad[j]
    }

    /// `φ^j(a)`, the image of `a` in every target block.
    pub fn apply(&self, a: &[CMatrix]) -> Result<Vec<CMatrix>> {
        phi_apply(self, a)
    }
}

/// `φ(a)`: block `j` is `diag(a_1⊗1_{α_{j1}}, …, a_r⊗1_{α_{jr}}, 0_{n₀})`.
pub fn phi_apply(spec: &EmbeddingSpec, a: &[CMatrix]) -> Result<Vec<CMatrix>> {
    spec.source.check_element(a)?;
    Ok(embed_blocks(spec, a, false))
}

/// `t̃φ(u)`: like [`phi_apply`] but with the identity in the pad.
pub fn hat_phi(spec: &EmbeddingSpec, u: &[CMatrix]) -> Result<Vec<CMatrix>> {
    spec.source.check_element(u)?;
    for (i, ui) in u.iter().enumerate() {
        let det = ui.clone().determinant();
        let scale = ui.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
        if !(det.norm() > 1e-12 * scale.powi(ui.nrows() as i32)) {
            return Err(Error::SingularElement(i));
        }
    }
    Ok(embed_blocks(spec, u, true))
}

fn embed_blocks(spec: &EmbeddingSpec, a: &[CMatrix], unit_pad: bool) -> Vec<CMatrix> {
    (0..spec.target.rank())
        .map(|j| {
            let m = spec.target.dim(j);
            let mut out = CMatrix::zeros(m, m);
            for (i, ai) in a.iter().enumerate() {
                let n = ai.nrows();
                for copy in 0..spec.mult[j][i] {
                    let off = spec.slot_offset(j, i, copy);
                    out.view_mut((off, off), (n, n)).copy_from(ai);
                }
            }
            if unit_pad {
                for k in spec.pad_offset(j)..m {
                    out[(k, k)] = ONE;
                }
            }
            out
        })
        .collect()
}

/// `φ_i^{j,ℓ}(a_i)`: `a_i` placed at copy slot `copy` (0-based) of summand `i`
/// inside target block `j`, zero elsewhere.
pub fn phi_block_inject(
    spec: &EmbeddingSpec,
    i: usize,
    j: usize,
    copy: usize,
    a: &CMatrix,
) -> Result<CMatrix> {
    if i >= spec.source.rank() || j >= spec.target.rank() {
        return Err(Error::InvalidArgument(format!(
            "summand {i} or block {j} out of range"
        )));
    }
    let multiplicity = spec.mult[j][i];
    if copy >= multiplicity {
        return Err(Error::InvalidSlot {
            summand: i,
            block: j,
            copy,
            multiplicity,
        });
    }
    let n = spec.source.dim(i);
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "injected matrix is {}x{}, expected {n}x{n}",
            a.nrows(),
            a.ncols()
        )));
    }
    let m = spec.target.dim(j);
    let off = spec.slot_offset(j, i, copy);
    let mut out = CMatrix::zeros(m, m);
    out.view_mut((off, off), (n, n)).copy_from(a);
    Ok(out)
}

/// `second ∘ first`, with multiplicity matrix `second.mult · first.mult`.
pub fn compose_embeddings(first: &EmbeddingSpec, second: &EmbeddingSpec) -> Result<EmbeddingSpec> {
    if first.target != second.source {
        return Err(Error::ProfileMismatch(format!(
            "first target {} differs from second source {}",
            first.target, second.source
        )));
    }
    let p = second.target.rank();
    let m = second.source.rank();
    let r = first.source.rank();
    let mult: Vec<Vec<usize>> = (0..p)
        .map(|k| {
            (0..r)
                .map(|i| (0..m).map(|j| second.mult[k][j] * first.mult[j][i]).sum())
                .collect()
        })
        .collect();
    validate_embedding(first.source.clone(), second.target.clone(), mult)
}

/// Dimension vector `(α_1, …, α_r)` of a module `⊕ C^{n_i}⊗C^{α_i}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DimensionVector(pub Vec<usize>);

impl DimensionVector {
    pub fn entries(&self) -> &[usize] {
        &self.0
    }
}

/// `β_j = Σ_i α_{ji} v_i`.
pub fn k0_pushforward(spec: &EmbeddingSpec, v: &DimensionVector) -> Result<DimensionVector> {
    if v.0.len() != spec.source.rank() {
        return Err(Error::DimensionMismatch(format!(
            "dimension vector has length {}, source has {} summands",
            v.0.len(),
            spec.source.rank()
        )));
    }
    Ok(DimensionVector(
        spec.mult
            .iter()
            .map(|row| row.iter().zip(&v.0).map(|(a, x)| a * x).sum())
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::{max_abs, random_matrix, random_unitary};
    use nalgebra::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prof(d: &[usize]) -> AlgebraProfile {
        AlgebraProfile::new(d.to_vec()).unwrap()
    }

    #[test]
    fn paper_case_pads() {
        let s = validate_embedding(prof(&[2]), prof(&[3]), vec![vec![1]]).unwrap();
        assert_eq!(s.pad(), &[1]);
        let s = validate_embedding(prof(&[2, 2]), prof(&[4]), vec![vec![1, 1]]).unwrap();
        assert_eq!(s.pad(), &[0]);
        assert!(s.is_unital());
    }

    #[test]
    fn infeasible_embedding() {
        let e = validate_embedding(prof(&[2, 2]), prof(&[3]), vec![vec![1, 1]]).unwrap_err();
        assert_eq!(
            e,
            Error::InfeasibleEmbedding {
                block: 0,
                required: 4,
                available: 3
            }
        );
    }

    #[test]
    fn bad_profiles() {
        assert!(AlgebraProfile::new(vec![]).is_err());
        assert!(AlgebraProfile::new(vec![2, 0]).is_err());
        assert!(validate_embedding(prof(&[2]), prof(&[3]), vec![vec![1, 1]]).is_err());
    }

    #[test]
    fn identity_and_pad_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(2, &mut rng);
        let id = EmbeddingSpec::identity(prof(&[2]));
        assert_eq!(phi_apply(&id, std::slice::from_ref(&a)).unwrap()[0], a);

        let s = validate_embedding(prof(&[2]), prof(&[3]), vec![vec![1]]).unwrap();
        let out = &phi_apply(&s, std::slice::from_ref(&a)).unwrap()[0];
        assert_eq!(out.view((0, 0), (2, 2)), a.view((0, 0), (2, 2)));
        for k in 0..3 {
            assert_eq!(out[(2, k)], Complex::new(0.0, 0.0));
            assert_eq!(out[(k, 2)], Complex::new(0.0, 0.0));
        }
        let inj = phi_block_inject(&s, 0, 0, 0, &a).unwrap();
        assert_eq!(&inj, out);
    }

    #[test]
    fn morphism_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s =
            validate_embedding(prof(&[2, 3]), prof(&[9, 5]), vec![vec![2, 1], vec![1, 1]]).unwrap();
        let a: Vec<CMatrix> = vec![random_matrix(2, &mut rng), random_matrix(3, &mut rng)];
        let b: Vec<CMatrix> = vec![random_matrix(2, &mut rng), random_matrix(3, &mut rng)];
        let ab: Vec<CMatrix> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let fa = phi_apply(&s, &a).unwrap();
        let fb = phi_apply(&s, &b).unwrap();
        let fab = phi_apply(&s, &ab).unwrap();
        for j in 0..2 {
            assert!(max_abs(&(&fab[j] - &fa[j] * &fb[j])) <= 1e-13);
            let tr: Complex<f64> = (0..2)
                .map(|i| a[i].trace() * (s.multiplicity(j, i) as f64))
                .sum();
            assert!((fa[j].trace() - tr).norm() <= 1e-13);
        }
    }

    #[test]
    fn injection_delta_law_m2m2_to_m5() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = validate_embedding(prof(&[2, 2]), prof(&[5]), vec![vec![1, 1]]).unwrap();
        let a = random_matrix(2, &mut rng);
        let b = random_matrix(2, &mut rng);
        for i1 in 0..2 {
            for i2 in 0..2 {
                let lhs = phi_block_inject(&s, i1, 0, 0, &a).unwrap()
                    * phi_block_inject(&s, i2, 0, 0, &b).unwrap();
                let rhs = if i1 == i2 {
                    phi_block_inject(&s, i1, 0, 0, &(&a * &b)).unwrap()
                } else {
                    CMatrix::zeros(5, 5)
                };
                assert!(max_abs(&(lhs - rhs)) <= 1e-14);
            }
        }
    }

    #[test]
    fn distinct_copies_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = validate_embedding(prof(&[2]), prof(&[4]), vec![vec![2]]).unwrap();
        let a = random_matrix(2, &mut rng);
        let b = random_matrix(2, &mut rng);
        let p =
            phi_block_inject(&s, 0, 0, 0, &a).unwrap() * phi_block_inject(&s, 0, 0, 1, &b).unwrap();
        assert_eq!(max_abs(&p), 0.0);
        assert!(matches!(
            phi_block_inject(&s, 0, 0, 2, &a),
            Err(Error::InvalidSlot { .. })
        ));
    }

    #[test]
    fn hat_phi_pad_and_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = validate_embedding(prof(&[2]), prof(&[3]), vec![vec![1]]).unwrap();
        let u = random_unitary(2, &mut rng);
        let hu = &hat_phi(&s, std::slice::from_ref(&u)).unwrap()[0];
        assert_eq!(hu[(2, 2)], ONE);
        let uinv = u.adjoint();
        let hinv = &hat_phi(&s, &[uinv]).unwrap()[0];
        assert!(max_abs(&(hinv - hu.clone().try_inverse().unwrap())) <= 1e-13);

        let one = &hat_phi(&s, &s.source().identity()).unwrap()[0];
        assert_eq!(one, &CMatrix::identity(3, 3));

        let singular = CMatrix::zeros(2, 2);
        assert_eq!(
            hat_phi(&s, &[singular]).unwrap_err(),
            Error::SingularElement(0)
        );
    }

    #[test]
    fn compose_paper_chain() {
        let a = validate_embedding(prof(&[2]), prof(&[4]), vec![vec![2]]).unwrap();
        let b = validate_embedding(prof(&[4]), prof(&[8]), vec![vec![2]]).unwrap();
        let c = compose_embeddings(&a, &b).unwrap();
        assert_eq!(c.mult(), &[vec![4]]);
        assert_eq!(c.pad(), &[0]);
        let id = EmbeddingSpec::identity(prof(&[2]));
        assert_eq!(compose_embeddings(&id, &a).unwrap(), a);
        assert!(compose_embeddings(&b, &a).is_err());
    }

    #[test]
    fn composite_pad_accumulates() {
        let a = validate_embedding(prof(&[2]), prof(&[3]), vec![vec![1]]).unwrap();
        let b = validate_embedding(prof(&[3]), prof(&[7]), vec![vec![2]]).unwrap();
        let c = compose_embeddings(&a, &b).unwrap();
        // 7 − (2·1)·2 = 3
        assert_eq!(c.pad(), &[3]);
    }

    #[test]
    fn k0_examples() {
        let s = validate_embedding(prof(&[2, 3]), prof(&[5]), vec![vec![1, 1]]).unwrap();
        let v = k0_pushforward(&s, &DimensionVector(vec![1, 2])).unwrap();
        assert_eq!(v, DimensionVector(vec![3]));
        let id = EmbeddingSpec::identity(prof(&[2, 3]));
        assert_eq!(
            k0_pushforward(&id, &DimensionVector(vec![4, 7])).unwrap().0,
            vec![4, 7]
        );
        assert!(k0_pushforward(&s, &DimensionVector(vec![1])).is_err());
    }
}
