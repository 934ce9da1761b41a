//! Dense complex matrices and orthonormal anti-Hermitian bases of sl(n).
//!
//! Generators are normalized so that `tr(E_a E_b) = -δ_ab`. With that choice the
//! Frobenius norm of every generator is one and index raising with the trace
//! metric only flips signs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `tr(a† b)`.
pub fn frobenius_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `max|M + M†| ≤ tol·max(1, ‖M‖)`.
pub fn is_anti_hermitian(m: &CMatrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = frobenius_norm(m).max(1.0);
    let defect = max_abs(&(m + m.adjoint()));
    defect <= tol * scale
}

/// `‖u u† − 1‖_max`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u * u.adjoint() - CMatrix::identity(n, n)))
}

/// Matrix unit `e_pq` of size `n`.
pub fn unit(n: usize, p: usize, q: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(p, q)] = ONE;
    m
}

/// Real rank-3 tensor `C^g_{ab}`, stored densely as `data[(a*dim + b)*dim + g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    data: Vec<f64>,
}

impl StructureConstants {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, g: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + g]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, g: usize, v: f64) {
        self.data[(a * self.dim + b) * self.dim + g] = v;
    }

    /// Components with `|C| > tol`, as `(a, b, g, value)`.
    pub fn nonzero(&self, tol: f64) -> Vec<(usize, usize, usize, f64)> {
        let d = self.dim;
        let mut out = Vec::new();
        for a in 0..d {
            for b in 0..d {
                for g in 0..d {
                    let v = self.get(a, b, g);
                    if v.abs() > tol {
                        out.push((a, b, g, v));
                    }
                }
            }
        }
        out
    }

    /// Max over index triples of the cyclic Jacobi sum
    /// `C^d_{ab} C^e_{dc} + C^d_{bc} C^e_{da} + C^d_{ca} C^e_{db}`.
    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut s = 0.0;
                        for m in 0..d {
                            s += self.get(a, b, m) * self.get(m, c, e)
                                + self.get(b, c, m) * self.get(m, a, e)
                                + self.get(c, a, m) * self.get(m, b, e);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Max deviation of `C_{abc} = g_{cd} C^d_{ab}` from complete antisymmetry.
    pub fn lowered_antisymmetry_residual(&self, gram: &DMatrix<f64>) -> f64 {
        let d = self.dim;
        let mut low = vec![0.0; d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    low[(a * d + b) * d + c] =
                        (0..d).map(|k| gram[(c, k)] * self.get(a, b, k)).sum();
                }
            }
        }
        let at = |a: usize, b: usize, c: usize| low[(a * d + b) * d + c];
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    worst = worst
                        .max((at(a, b, c) + at(b, a, c)).abs())
                        .max((at(a, b, c) + at(a, c, b)).abs());
                }
            }
        }
        worst
    }
}

/// Ordered generator family of sl(n) with its trace metric and structure constants.
#[derive(Debug, Clone)]
pub struct SlBasis {
    n: usize,
    generators: Vec<CMatrix>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    structconst: StructureConstants,
}

impl SlBasis {
    /// Builds the metric and structure constants for an arbitrary generator list.
    pub fn from_generators(n: usize, generators: Vec<CMatrix>) -> Result<Self> {
        for (k, g) in generators.iter().enumerate() {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "generator {k} is {}x{}, expected {n}x{n}",
                    g.nrows(),
                    g.ncols()
                )));
            }
        }
        let gram = gram_metric(&generators);
        let gram_inv = invert_gram(&gram)?;
        let structconst = structure_constants_with(&generators, &gram_inv);
        Ok(Self {
            n,
            generators,
            gram,
            gram_inv,
            structconst,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn generator(&self, k: usize) -> &CMatrix {
        &self.generators[k]
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn structure_constants(&self) -> &StructureConstants {
        &self.structconst
    }

    /// True when `gram = -I` within `tol`.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|a| {
            (0..d).all(|b| {
                let expect = if a == b { -1.0 } else { 0.0 };
                (self.gram[(a, b)] - expect).abs() <= tol
            })
        })
    }

    /// Real coordinates of `x` on the generators, via the Gram inverse.
    pub fn coordinates(&self, x: &CMatrix) -> Vec<f64> {
        expand_on(&self.generators, &self.gram_inv, x)
    }

    /// `Σ_g coeffs[g] E_g`.
    pub fn combine(&self, coeffs: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.n, self.n);
        for (c, e) in coeffs.iter().zip(&self.generators) {
            if *c != 0.0 {
                out += e * Complex64::new(*c, 0.0);
            }
        }
        out
    }

    /// Max over pairs of `‖[E_a,E_b] − C^g_{ab} E_g‖_max`.
    pub fn commutator_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let lhs = commutator(&self.generators[a], &self.generators[b]);
                let coeffs: Vec<f64> = (0..d).map(|g| self.structconst.get(a, b, g)).collect();
                worst = worst.max(max_abs(&(lhs - self.combine(&coeffs))));
            }
        }
        worst
    }
}

/// Generalized Gell-Mann basis of sl(n), anti-Hermitian with `tr(E_a E_b) = -δ_ab`.
///
/// Ordering: for each pair `p < q` in lexicographic order the real antisymmetric
/// generator `(e_pq − e_qp)/√2` followed by `i(e_pq + e_qp)/√2`; then the `n−1`
/// diagonal generators `i·diag(1,…,1,−k,0,…)/√(k(k+1))`.
pub fn gellmann_basis(n: usize) -> Result<SlBasis> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "sl(n) needs n >= 2, got {n}"
        )));
    }
    SlBasis::from_generators(n, gellmann_generators(n))
}

pub(crate) fn gellmann_generators(n: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut gens = Vec::with_capacity(n * n - 1);
    for p in 0..n {
        for q in (p + 1)..n {
            gens.push((unit(n, p, q) - unit(n, q, p)) * Complex64::new(s, 0.0));
            gens.push((unit(n, p, q) + unit(n, q, p)) * Complex64::new(0.0, s));
        }
    }
    for k in 1..n {
        let norm = 1.0 / ((k * (k + 1)) as f64).sqrt();
        let mut d = CMatrix::zeros(n, n);
        for i in 0..k {
            d[(i, i)] = Complex64::new(0.0, norm);
        }
        d[(k, k)] = Complex64::new(0.0, -(k as f64) * norm);
        gens.push(d);
    }
    gens
}

/// `(tr(E_a E_b))_{ab}`; imaginary parts are discarded.
pub fn gram_metric(generators: &[CMatrix]) -> DMatrix<f64> {
    let d = generators.len();
    DMatrix::from_fn(d, d, |a, b| {
        trace_product(&generators[a], &generators[b]).re
    })
}

/// Max imaginary part of `tr(E_a E_b)` over all pairs.
pub fn gram_imaginary_defect(generators: &[CMatrix]) -> f64 {
    let d = generators.len();
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            worst = worst.max(trace_product(&generators[a], &generators[b]).im.abs());
        }
    }
    worst
}

/// Expands each commutator `[E_a, E_b]` on the generators through the Gram inverse.
pub fn structure_constants(
    generators: &[CMatrix],
    gram: &DMatrix<f64>,
) -> Result<StructureConstants> {
    let inv = invert_gram(gram)?;
    Ok(structure_constants_with(generators, &inv))
}

/// Inverse of a Gram matrix, rejecting numerically singular ones.
pub fn invert_gram(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if gram.nrows() == 0 {
        return Ok(gram.clone());
    }
    let sv = gram.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > 0.0) || smin <= 1e-12 * smax {
        return Err(Error::DegenerateMetric);
    }
    gram.clone().try_inverse().ok_or(Error::DegenerateMetric)
}

fn structure_constants_with(generators: &[CMatrix], gram_inv: &DMatrix<f64>) -> StructureConstants {
    let d = generators.len();
    let mut c = StructureConstants::zeros(d);
    for a in 0..d {
        for b in (a + 1)..d {
            let comm = commutator(&generators[a], &generators[b]);
            let coords = expand_on(generators, gram_inv, &comm);
            for (g, v) in coords.into_iter().enumerate() {
                c.set(a, b, g, v);
                c.set(b, a, g, -v);
            }
        }
    }
    c
}

fn expand_on(generators: &[CMatrix], gram_inv: &DMatrix<f64>, x: &CMatrix) -> Vec<f64> {
    let d = generators.len();
    let proj: Vec<f64> = generators.iter().map(|e| trace_product(e, x).re).collect();
    (0..d)
        .map(|g| (0..d).map(|k| gram_inv[(g, k)] * proj[k]).sum())
        .collect()
}

/// Matrix with entries uniform in the unit square of the complex plane, centered at 0.
pub fn random_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_anti_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let m = random_matrix(n, rng);
    (&m - m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let m = random_matrix(n, rng);
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Unitary factor of the QR decomposition of a random matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    random_matrix(n, rng).qr().q()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_commutator_coeff(gens: &[CMatrix], a: usize, b: usize, g: usize) -> f64 {
        // with tr(E E) = -1, the coefficient on E_g is -tr(E_g [E_a,E_b])
        let comm = commutator(&gens[a], &gens[b]);
        -trace_product(&gens[g], &comm).re
    }

    #[test]
    fn sl2_gram_is_minus_identity() {
        let b = gellmann_basis(2).unwrap();
        assert_eq!(b.dim(), 3);
        for x in 0..3 {
            for y in 0..3 {
                let direct = trace_product(b.generator(x), b.generator(y));
                let expect = if x == y { -1.0 } else { 0.0 };
                assert!((direct.re - expect).abs() < 1e-15);
                assert!(direct.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sl2_structure_constants_match_commutator_oracle() {
        let b = gellmann_basis(2).unwrap();
        let gens = b.generators();
        // brute force: C^3_12 = +√2 for (x-pair, y-pair, diagonal)
        let oracle = brute_commutator_coeff(gens, 0, 1, 2);
        assert!((oracle - std::f64::consts::SQRT_2).abs() < 1e-14);
        let c = b.structure_constants();
        for x in 0..3 {
            for y in 0..3 {
                for z in 0..3 {
                    let eps = levi_civita(x, y, z) as f64;
                    assert!((c.get(x, y, z) - std::f64::consts::SQRT_2 * eps).abs() < 1e-14);
                    assert!((c.get(x, y, z) - brute_commutator_coeff(gens, x, y, z)).abs() < 1e-14);
                }
            }
        }
    }

    fn levi_civita(a: usize, b: usize, c: usize) -> i32 {
        match (a, b, c) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1,
            _ => 0,
        }
    }

    #[test]
    fn gram_is_minus_identity_for_larger_n() {
        for n in 3..=5 {
            let b = gellmann_basis(n).unwrap();
            assert_eq!(b.dim(), n * n - 1);
            assert!(b.is_orthonormal(1e-14));
        }
    }

    #[test]
    fn scaled_basis_scales_gram() {
        let gens: Vec<CMatrix> = gellmann_generators(2)
            .into_iter()
            .map(|g| g * Complex64::new(2.0, 0.0))
            .collect();
        let gram = gram_metric(&gens);
        for x in 0..3 {
            for y in 0..3 {
                let expect = if x == y { -4.0 } else { 0.0 };
                assert!((gram[(x, y)] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn generators_are_traceless_anti_hermitian() {
        for n in 2..=5 {
            let b = gellmann_basis(n).unwrap();
            for g in b.generators() {
                assert!(g.trace().norm() < 1e-15);
                assert!(is_anti_hermitian(g, 1e-12));
            }
            assert!(gram_imaginary_defect(b.generators()) < 1e-12);
        }
    }

    #[test]
    fn structure_constants_reconstruct_commutators() {
        for n in 2..=4 {
            let b = gellmann_basis(n).unwrap();
            assert!(b.commutator_residual() < 1e-12);
            let c = b.structure_constants();
            for a in 0..b.dim() {
                for g in 0..b.dim() {
                    assert_eq!(c.get(a, a, g), 0.0);
                }
            }
            assert!(c.lowered_antisymmetry_residual(b.gram()) < 1e-10);
        }
    }

    #[test]
    fn sl3_jacobi() {
        let b = gellmann_basis(3).unwrap();
        assert!(b.structure_constants().jacobi_residual() < 1e-10);
    }

    #[test]
    fn rejects_small_n() {
        assert!(matches!(gellmann_basis(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(gellmann_basis(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn singular_gram_is_reported() {
        let g = gellmann_generators(2);
        let dup = vec![g[0].clone(), g[0].clone(), g[1].clone()];
        assert!(matches!(
            SlBasis::from_generators(2, dup),
            Err(Error::DegenerateMetric)
        ));
    }
}
