//! Derivation-based differential forms on a sum of matrix algebras.
//!
//! A [`Frame`] fixes, for one summand, a family of inner derivations
//! `∂_a = ad_{E_a}` together with the trace metric `g_ab = tr(E_a E_b)`. A
//! [`Form`] stores, per summand, its components `ω_I` on strictly increasing
//! multi-indices `I` (encoded as bit masks), with matrix values. Evaluation on an
//! arbitrary index tuple applies the permutation sign.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::matalg::{
    commutator, invert_gram, max_abs, trace_product, unitarity_defect, CMatrix, SlBasis,
    StructureConstants, ZERO,
};
use crate::{Error, Result};

/// Largest derivation space for which [`hodge_star`] materializes forms.
pub const MAX_HODGE_DIM: usize = 8;

const CLOSURE_TOL: f64 = 1e-10;

/// Derivation directions of one summand with their metric.
#[derive(Debug, Clone)]
pub struct Frame {
    matrix_dim: usize,
    generators: Vec<CMatrix>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    sqrt_abs_det: f64,
    /// Present only when the span of the generators is closed under commutators.
    structconst: Option<StructureConstants>,
}

impl Frame {
    pub fn new(matrix_dim: usize, generators: Vec<CMatrix>) -> Result<Self> {
        if generators.len() > 64 {
            return Err(Error::Unsupported(format!(
                "{} derivation directions exceed the 64-direction form encoding",
                generators.len()
            )));
        }
        for g in &generators {
            if g.nrows() != matrix_dim || g.ncols() != matrix_dim {
                return Err(Error::DimensionMismatch(format!(
                    "frame generator is {}x{}, expected {matrix_dim}x{matrix_dim}",
                    g.nrows(),
                    g.ncols()
                )));
            }
        }
        let gram = crate::matalg::gram_metric(&generators);
        let gram_inv = invert_gram(&gram)?;
        let sqrt_abs_det = gram.determinant().abs().sqrt();
        let structconst = closed_structure_constants(&generators, &gram_inv);
        Ok(Self {
            matrix_dim,
            generators,
            gram,
            gram_inv,
            sqrt_abs_det,
            structconst,
        })
    }

    pub fn from_basis(basis: &SlBasis) -> Self {
        Self {
            matrix_dim: basis.n(),
            generators: basis.generators().to_vec(),
            gram: basis.gram().clone(),
            gram_inv: basis.gram_inverse().clone(),
            sqrt_abs_det: basis.gram().determinant().abs().sqrt(),
            structconst: Some(basis.structure_constants().clone()),
        }
    }

    /// Sub-frame spanned by the listed generators, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let gens = indices
            .iter()
            .map(|&k| {
                self.generators
                    .get(k)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("frame index {k} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.matrix_dim, gens)
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn matrix_dim(&self) -> usize {
        self.matrix_dim
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// `√|det g|`.
    pub fn sqrt_abs_det(&self) -> f64 {
        self.sqrt_abs_det
    }

    pub fn structure_constants(&self) -> Option<&StructureConstants> {
        self.structconst.as_ref()
    }

    fn expand(&self, x: &CMatrix) -> Vec<f64> {
        let d = self.dim();
        let proj: Vec<f64> = self
            .generators
            .iter()
            .map(|e| trace_product(e, x).re)
            .collect();
        (0..d)
            .map(|g| (0..d).map(|k| self.gram_inv[(g, k)] * proj[k]).sum())
            .collect()
    }

    fn reconstruct(&self, coeffs: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.matrix_dim, self.matrix_dim);
        for (c, e) in coeffs.iter().zip(&self.generators) {
            if *c != 0.0 {
                out += e * Complex64::new(*c, 0.0);
            }
        }
        out
    }
}

fn closed_structure_constants(
    gens: &[CMatrix],
    gram_inv: &DMatrix<f64>,
) -> Option<StructureConstants> {
    let d = gens.len();
    let mut c = StructureConstants::zeros(d);
    for a in 0..d {
        for b in (a + 1)..d {
            let comm = commutator(&gens[a], &gens[b]);
            let proj: Vec<f64> = gens.iter().map(|e| trace_product(e, &comm).re).collect();
            let mut rebuilt = CMatrix::zeros(comm.nrows(), comm.ncols());
            for g in 0..d {
                let v: f64 = (0..d).map(|k| gram_inv[(g, k)] * proj[k]).sum();
                c.set(a, b, g, v);
                c.set(b, a, g, -v);
                rebuilt += &gens[g] * Complex64::new(v, 0.0);
            }
            let scale = max_abs(&comm).max(1.0);
            if max_abs(&(comm - rebuilt)) > CLOSURE_TOL * scale {
                return None;
            }
        }
    }
    Some(c)
}

/// Graded form with matrix coefficients, block-decomposed over the summands.
#[derive(Debug, Clone)]
pub struct Form {
    frames: Vec<Arc<Frame>>,
    parts: Vec<BTreeMap<u64, CMatrix>>,
}

impl Form {
    pub fn zero(frames: &[Arc<Frame>]) -> Self {
        Self {
            frames: frames.to_vec(),
            parts: vec![BTreeMap::new(); frames.len()],
        }
    }

    /// 0-form with the given value in each summand.
    pub fn scalar(frames: &[Arc<Frame>], values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != frames.len() {
            return Err(Error::ProfileMismatch(format!(
                "{} values for {} summands",
                values.len(),
                frames.len()
            )));
        }
        let mut f = Self::zero(frames);
        for (i, v) in values.into_iter().enumerate() {
            f.set_component(i, &[], v)?;
        }
        Ok(f)
    }

    /// `θ^a` in summand `i`, i.e. `1 ⊗ θ^a`.
    pub fn theta(frames: &[Arc<Frame>], i: usize, a: usize) -> Result<Self> {
        let n = frames[i].matrix_dim();
        let mut f = Self::zero(frames);
        f.set_component(i, &[a], CMatrix::identity(n, n))?;
        Ok(f)
    }

    /// `ω_vol = ⊕_i √|g_i| θ^1∧…∧θ^N`.
    pub fn volume(frames: &[Arc<Frame>]) -> Self {
        let mut f = Self::zero(frames);
        for (i, fr) in frames.iter().enumerate() {
            let n = fr.matrix_dim();
            f.parts[i].insert(
                full_mask(fr.dim()),
                CMatrix::identity(n, n) * Complex64::new(fr.sqrt_abs_det(), 0.0),
            );
        }
        f
    }

    pub fn frames(&self) -> &[Arc<Frame>] {
        &self.frames
    }

    pub fn summands(&self) -> usize {
        self.frames.len()
    }

    /// Stored components of summand `i`: multi-index mask to coefficient.
    pub fn components(&self, i: usize) -> &BTreeMap<u64, CMatrix> {
        &self.parts[i]
    }

    /// Sets `ω(∂_{a_1},…,∂_{a_p}) = value` for summand `i`, adjusting for the order of `indices`.
    pub fn set_component(&mut self, i: usize, indices: &[usize], value: CMatrix) -> Result<()> {
        let fr = &self.frames[i];
        if value.nrows() != fr.matrix_dim() || value.ncols() != fr.matrix_dim() {
            return Err(Error::DimensionMismatch(format!(
                "component is {}x{}, summand {i} has matrix size {}",
                value.nrows(),
                value.ncols(),
                fr.matrix_dim()
            )));
        }
        let (mask, sign) = sort_indices(indices, fr.dim())?;
        match sign {
            0 => Err(Error::InvalidArgument(
                "repeated index in form component".into(),
            )),
            s => {
                self.parts[i].insert(mask, value * Complex64::new(s as f64, 0.0));
                Ok(())
            }
        }
    }

    /// Adds `value` to the component at `indices`.
    pub fn add_component(&mut self, i: usize, indices: &[usize], value: CMatrix) -> Result<()> {
        let (mask, sign) = sort_indices(indices, self.frames[i].dim())?;
        if sign == 0 {
            return Err(Error::InvalidArgument(
                "repeated index in form component".into(),
            ));
        }
        accumulate(
            &mut self.parts[i],
            mask,
            value * Complex64::new(sign as f64, 0.0),
        );
        Ok(())
    }

    /// `ω(∂_{a_1},…,∂_{a_p})` in summand `i`.
    pub fn eval(&self, i: usize, indices: &[usize]) -> CMatrix {
        let fr = &self.frames[i];
        let n = fr.matrix_dim();
        match sort_indices(indices, fr.dim()) {
            Ok((mask, s)) if s != 0 => match self.parts[i].get(&mask) {
                Some(c) => c * Complex64::new(s as f64, 0.0),
                None => CMatrix::zeros(n, n),
            },
            _ => CMatrix::zeros(n, n),
        }
    }

    /// Degree of summand `i` if it is homogeneous and non-zero.
    pub fn degree(&self, i: usize) -> Option<usize> {
        let mut degs = self.parts[i].keys().map(|m| m.count_ones() as usize);
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    /// Keeps only the components of degree `p`.
    pub fn homogeneous_part(&self, p: usize) -> Self {
        let parts = self
            .parts
            .iter()
            .map(|m| {
                m.iter()
                    .filter(|(k, _)| k.count_ones() as usize == p)
                    .map(|(k, v)| (*k, v.clone()))
                    .collect()
            })
            .collect();
        Self {
            frames: self.frames.clone(),
            parts,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_frames(self, other)?;
        let mut out = self.clone();
        for (i, part) in other.parts.iter().enumerate() {
            for (k, v) in part {
                accumulate(&mut out.parts[i], *k, v.clone());
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Largest entry over all components.
    pub fn max_abs(&self) -> f64 {
        self.parts
            .iter()
            .flat_map(|p| p.values())
            .map(max_abs)
            .fold(0.0, f64::max)
    }

    /// `max_abs(self − other)`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Left and right multiplication of every coefficient: `l ω r`, per summand.
    pub fn sandwich(&self, left: &[CMatrix], right: &[CMatrix]) -> Result<Self> {
        if left.len() != self.summands() || right.len() != self.summands() {
            return Err(Error::ProfileMismatch(
                "sandwich factors do not match summands".into(),
            ));
        }
        let parts = self
            .parts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.iter()
                    .map(|(k, v)| (*k, &left[i] * v * &right[i]))
                    .collect()
            })
            .collect();
        Ok(Self {
            frames: self.frames.clone(),
            parts,
        })
    }

    /// Componentwise `u⁻¹ ω u` for unitary `u`.
    pub fn conjugate(&self, u: &[CMatrix]) -> Result<Self> {
        check_unitary(u)?;
        let inv: Vec<CMatrix> = u.iter().map(|x| x.adjoint()).collect();
        self.sandwich(&inv, u)
    }

    fn map_values(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let parts = self
            .parts
            .iter()
            .map(|p| p.iter().map(|(k, v)| (*k, f(v))).collect())
            .collect();
        Self {
            frames: self.frames.clone(),
            parts,
        }
    }
}

fn check_same_frames(a: &Form, b: &Form) -> Result<()> {
    if a.frames.len() != b.frames.len()
        || a.frames
            .iter()
            .zip(&b.frames)
            .any(|(x, y)| !Arc::ptr_eq(x, y) && x.generators != y.generators)
    {
        return Err(Error::ProfileMismatch(
            "forms live on different frames".into(),
        ));
    }
    Ok(())
}

fn check_unitary(u: &[CMatrix]) -> Result<()> {
    for x in u {
        let d = unitarity_defect(x);
        if d > 1e-10 {
            return Err(Error::InvalidGaugeElement(d));
        }
    }
    Ok(())
}

fn accumulate(map: &mut BTreeMap<u64, CMatrix>, key: u64, value: CMatrix) {
    match map.get_mut(&key) {
        Some(v) => *v += value,
        None => {
            map.insert(key, value);
        }
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Sorted mask of `indices` and the sign of the sorting permutation (0 on repeats).
fn sort_indices(indices: &[usize], dim: usize) -> Result<(u64, i32)> {
    let mut mask = 0u64;
    let mut inversions = 0usize;
    for (k, &a) in indices.iter().enumerate() {
        if a >= dim {
            return Err(Error::InvalidArgument(format!(
                "derivation index {a} out of range ({dim})"
            )));
        }
        if mask & (1u64 << a) != 0 {
            return Ok((0, 0));
        }
        mask |= 1u64 << a;
        inversions += indices[..k].iter().filter(|&&b| b > a).count();
    }
    Ok((mask, if inversions.is_multiple_of(2) { 1 } else { -1 }))
}

fn mask_indices(mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

/// Sign of the shuffle placing the sorted indices of `a` before those of `b`.
fn shuffle_sign(a: u64, b: u64) -> f64 {
    let mut inversions = 0u32;
    let mut m = a;
    while m != 0 {
        let i = m.trailing_zeros();
        // elements of b smaller than i must move past i
        inversions += (b & ((1u64 << i) - 1)).count_ones();
        m &= m - 1;
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// All masks with `k` bits set among the lowest `n`.
fn subsets(n: usize, k: usize) -> Vec<u64> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut s: u64 = (1u64 << k) - 1;
    let limit = full_mask(n);
    loop {
        out.push(s);
        let c = s & s.wrapping_neg();
        let r = s.wrapping_add(c);
        if r == 0 || r > limit {
            break;
        }
        s = (((r ^ s) >> 2) / c) | r;
        if s > limit {
            break;
        }
    }
    out
}

fn minor(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    if k == 0 {
        return 1.0;
    }
    DMatrix::from_fn(k, k, |a, b| m[(rows[a], cols[b])]).determinant()
}

fn scalar(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Graded product, summand by summand.
pub fn wedge(omega: &Form, eta: &Form) -> Result<Form> {
    check_same_frames(omega, eta)?;
    let mut out = Form::zero(&omega.frames);
    for i in 0..omega.summands() {
        for (ka, va) in &omega.parts[i] {
            for (kb, vb) in &eta.parts[i] {
                if ka & kb != 0 {
                    continue;
                }
                let s = shuffle_sign(*ka, *kb);
                accumulate(&mut out.parts[i], ka | kb, va * vb * scalar(s));
            }
        }
    }
    Ok(out)
}

/// Koszul differential for inner derivations: `(da)(∂_a) = [E_a, a]`,
/// `[∂_a, ∂_b] = C^g_{ab} ∂_g`.
pub fn koszul_d(omega: &Form) -> Result<Form> {
    let mut out = Form::zero(&omega.frames);
    for (i, fr) in omega.frames.iter().enumerate() {
        if omega.parts[i].is_empty() {
            continue;
        }
        let c = fr.structure_constants().ok_or_else(|| {
            Error::Precondition("frame is not closed under commutators; d is undefined".into())
        })?;
        let n_dir = fr.dim();
        let mut degrees: Vec<usize> = omega.parts[i]
            .keys()
            .map(|k| k.count_ones() as usize)
            .collect();
        degrees.sort_unstable();
        degrees.dedup();
        for p in degrees {
            let part = omega.homogeneous_part(p);
            for k_mask in subsets(n_dir, p + 1) {
                let idx = mask_indices(k_mask);
                let mut acc = CMatrix::zeros(fr.matrix_dim(), fr.matrix_dim());
                for (pos, &a) in idx.iter().enumerate() {
                    let rest: Vec<usize> = idx
                        .iter()
                        .enumerate()
                        .filter(|(q, _)| *q != pos)
                        .map(|(_, &x)| x)
                        .collect();
                    let val = part.eval(i, &rest);
                    if max_abs(&val) == 0.0 {
                        continue;
                    }
                    let s = if pos % 2 == 0 { 1.0 } else { -1.0 };
                    acc += commutator(&fr.generators()[a], &val) * scalar(s);
                }
                for x in 0..idx.len() {
                    for y in (x + 1)..idx.len() {
                        let s = if (x + y) % 2 == 0 { 1.0 } else { -1.0 };
                        let rest: Vec<usize> = idx
                            .iter()
                            .enumerate()
                            .filter(|(q, _)| *q != x && *q != y)
                            .map(|(_, &v)| v)
                            .collect();
                        for g in 0..n_dir {
                            let cg = c.get(idx[x], idx[y], g);
                            if cg == 0.0 {
                                continue;
                            }
                            let mut args = Vec::with_capacity(p);
                            args.push(g);
                            args.extend_from_slice(&rest);
                            let val = part.eval(i, &args);
                            acc += val * scalar(s * cg);
                        }
                    }
                }
                if max_abs(&acc) > 0.0 {
                    accumulate(&mut out.parts[i], k_mask, acc);
                }
            }
        }
    }
    Ok(out)
}

/// Curvature `dω − ω∧ω` of a connection 1-form.
pub fn curvature(omega: &Form) -> Result<Form> {
    koszul_d(omega)?.sub(&wedge(omega, omega)?)
}

/// Hodge star `⋆θ^I = √|g| Σ_K det(g⁻¹[I,K]) ε_{K,K^c} θ^{K^c}`, extended linearly.
pub fn hodge_star(omega: &Form) -> Result<Form> {
    let mut out = Form::zero(&omega.frames);
    for (i, fr) in omega.frames.iter().enumerate() {
        if omega.parts[i].is_empty() {
            continue;
        }
        let n_dir = fr.dim();
        if n_dir > MAX_HODGE_DIM {
            return Err(Error::UnsupportedDimension {
                dim: n_dir,
                max: MAX_HODGE_DIM,
            });
        }
        let full = full_mask(n_dir);
        for (i_mask, val) in &omega.parts[i] {
            let rows = mask_indices(*i_mask);
            for k_mask in subsets(n_dir, rows.len()) {
                let det = minor(fr.gram_inverse(), &rows, &mask_indices(k_mask));
                if det.abs() < 1e-15 {
                    continue;
                }
                let comp = full & !k_mask;
                let coef = fr.sqrt_abs_det() * det * shuffle_sign(k_mask, comp);
                accumulate(&mut out.parts[i], comp, val * scalar(coef));
            }
        }
    }
    Ok(out)
}

/// Noncommutative integral: `Σ_i tr(a_i)` where `a_i √|g_i| θ^1∧…∧θ^N` is the top
/// component of summand `i`.
pub fn integral(omega: &Form) -> Complex64 {
    omega
        .frames
        .iter()
        .enumerate()
        .filter_map(|(i, fr)| {
            omega.parts[i]
                .get(&full_mask(fr.dim()))
                .map(|a| a.trace() / scalar(fr.sqrt_abs_det()))
        })
        .sum()
}

/// `(ω, ω′) = ∫ ω∧⋆ω′` evaluated in closed form as
/// `Σ_i Σ_{I,K} det(g_i⁻¹[I,K]) tr(ω_I ω′_K)`, without building `⋆ω′`.
pub fn scalar_product(omega: &Form, other: &Form) -> Result<Complex64> {
    check_same_frames(omega, other)?;
    let mut total = ZERO;
    for (i, fr) in omega.frames.iter().enumerate() {
        let (a, b) = (&omega.parts[i], &other.parts[i]);
        if a.is_empty() || b.is_empty() {
            continue;
        }
        match (omega.degree(i), other.degree(i)) {
            (Some(p), Some(q)) if p == q => {}
            _ => {
                return Err(Error::DegreeMismatch(format!(
                    "summand {i}: scalar product needs homogeneous forms of equal degree"
                )))
            }
        }
        let ginv = fr.gram_inverse();
        for (ka, va) in a {
            let rows = mask_indices(*ka);
            for (kb, vb) in b {
                let det = minor(ginv, &rows, &mask_indices(*kb));
                if det != 0.0 {
                    total += trace_product(va, vb) * scalar(det);
                }
            }
        }
    }
    Ok(total)
}

/// How a gauge element acts in [`gauge_transform_form`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeAction {
    /// Connection 1-form: `ω ↦ u⁻¹ωu − u⁻¹(du)`.
    Connection,
    /// Tensorial form such as a curvature: `Ω ↦ u⁻¹Ωu`.
    Tensorial,
    /// Transport by the automorphism `a ↦ u⁻¹au`, moving derivations as well.
    Transport,
}

pub fn gauge_transform_form(omega: &Form, u: &[CMatrix], action: GaugeAction) -> Result<Form> {
    if u.len() != omega.summands() {
        return Err(Error::ProfileMismatch(
            "gauge element does not match summands".into(),
        ));
    }
    check_unitary(u)?;
    match action {
        GaugeAction::Tensorial => omega.conjugate(u),
        GaugeAction::Transport => {
            let inv: Vec<CMatrix> = u.iter().map(|x| x.adjoint()).collect();
            transport_inner(omega, &inv)
        }
        GaugeAction::Connection => {
            for i in 0..omega.summands() {
                if omega.parts[i].keys().any(|k| k.count_ones() != 1) {
                    return Err(Error::DegreeMismatch("connection must be a 1-form".into()));
                }
            }
            let conj = omega.conjugate(u)?;
            let mut out = conj;
            for (i, fr) in omega.frames.iter().enumerate() {
                let uinv = u[i].adjoint();
                for (a, e) in fr.generators().iter().enumerate() {
                    let du = commutator(e, &u[i]);
                    let term = &uinv * du * scalar(-1.0);
                    accumulate(&mut out.parts[i], 1u64 << a, term);
                }
            }
            Ok(out)
        }
    }
}

/// `Ψ(ω)` for the inner automorphism `Ψ(a) = w a w⁻¹`:
/// `Ψ(ω)(∂_{a_1},…) = w ω(Ψ_Der⁻¹∂_{a_1},…) w⁻¹` with `Ψ_Der⁻¹(∂_a) = ad_{w⁻¹E_a w}`.
pub fn transport_inner(omega: &Form, w: &[CMatrix]) -> Result<Form> {
    if w.len() != omega.summands() {
        return Err(Error::ProfileMismatch(
            "automorphism does not match summands".into(),
        ));
    }
    let mut out = Form::zero(&omega.frames);
    for (i, fr) in omega.frames.iter().enumerate() {
        if omega.parts[i].is_empty() {
            continue;
        }
        let winv = w[i]
            .clone()
            .try_inverse()
            .ok_or(Error::SingularElement(i))?;
        let d = fr.dim();
        // U_a^b from w⁻¹ E_a w = U_a^b E_b
        let mut umat = DMatrix::<f64>::zeros(d, d);
        for (a, e) in fr.generators().iter().enumerate() {
            let moved = &winv * e * &w[i];
            let coords = fr.expand(&moved);
            if max_abs(&(&moved - fr.reconstruct(&coords))) > CLOSURE_TOL * max_abs(&moved).max(1.0)
            {
                return Err(Error::Precondition(
                    "frame is not invariant under the automorphism".into(),
                ));
            }
            for (b, v) in coords.into_iter().enumerate() {
                umat[(a, b)] = v;
            }
        }
        let mut degrees: Vec<usize> = omega.parts[i]
            .keys()
            .map(|k| k.count_ones() as usize)
            .collect();
        degrees.sort_unstable();
        degrees.dedup();
        for p in degrees {
            for i_mask in subsets(d, p) {
                let rows = mask_indices(i_mask);
                let mut acc = CMatrix::zeros(fr.matrix_dim(), fr.matrix_dim());
                for (k_mask, val) in omega.parts[i]
                    .iter()
                    .filter(|(k, _)| k.count_ones() as usize == p)
                {
                    let det = minor(&umat, &rows, &mask_indices(*k_mask));
                    if det.abs() > 1e-15 {
                        acc += val * scalar(det);
                    }
                }
                if max_abs(&acc) > 0.0 {
                    accumulate(&mut out.parts[i], i_mask, &w[i] * acc * &winv);
                }
            }
        }
    }
    Ok(out)
}

/// Connection 1-form `Σ_a (E_a − B_a) θ^a` from per-summand field lists.
pub fn connection_from_fields(frames: &[Arc<Frame>], fields: &[Vec<CMatrix>]) -> Result<Form> {
    if fields.len() != frames.len() {
        return Err(Error::ProfileMismatch(
            "field blocks do not match summands".into(),
        ));
    }
    let mut f = Form::zero(frames);
    for (i, fr) in frames.iter().enumerate() {
        if fields[i].len() != fr.dim() {
            return Err(Error::DimensionMismatch(format!(
                "summand {i}: {} fields for {} directions",
                fields[i].len(),
                fr.dim()
            )));
        }
        for (a, b) in fields[i].iter().enumerate() {
            f.set_component(i, &[a], &fr.generators()[a] - b)?;
        }
    }
    Ok(f)
}

/// Shared frames for a list of bases, one per summand.
pub fn frames_for(bases: &[SlBasis]) -> Vec<Arc<Frame>> {
    bases
        .iter()
        .map(|b| Arc::new(Frame::from_basis(b)))
        .collect()
}

/// `1_n` in every summand, as a 0-form value list.
pub fn unit_values(frames: &[Arc<Frame>]) -> Vec<CMatrix> {
    frames
        .iter()
        .map(|f| CMatrix::identity(f.matrix_dim(), f.matrix_dim()))
        .collect()
}
