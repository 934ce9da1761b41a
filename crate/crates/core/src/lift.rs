//! The φ-adapted basis of each target block: inherited generators `φ_i^{j,ℓ}(E_α)`
//! followed by a five-family complement, Gram-Schmidt-orthonormalized.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::afcore::{phi_apply, phi_block_inject, EmbeddingSpec};
use crate::forms::{Form, Frame};
use crate::matalg::{frobenius_inner, gellmann_generators, max_abs, CMatrix, SlBasis, I};
use crate::{Error, Result};

/// Inherited index `(i, ℓ, α)`, all 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InheritedIndex {
    pub summand: usize,
    pub copy: usize,
    pub alpha: usize,
}

/// Complement families, in construction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PadBlock,
    OffEnvelope,
    IntraEnvelopeOffdiag,
    CopyDifference,
    CrossEnvelopeDiagonal,
}

/// Direction class of a basis index. `A` and `C` carry the 0-based summand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DirectionClass {
    A(usize),
    B,
    C(usize),
    D,
    E,
    /// The `i·1/√m` probe direction, not part of sl(m).
    Trace,
}

impl fmt::Display for DirectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::A(i) => write!(f, "a{}", i + 1),
            Self::B => f.write_str("b"),
            Self::C(i) => write!(f, "c{}", i + 1),
            Self::D => f.write_str("d"),
            Self::E => f.write_str("e"),
            Self::Trace => f.write_str("trace"),
        }
    }
}

impl std::str::FromStr for DirectionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown direction class '{s}'"));
        match s {
            "b" => Ok(Self::B),
            "d" => Ok(Self::D),
            "e" => Ok(Self::E),
            "trace" => Ok(Self::Trace),
            _ => {
                let (head, tail) = s.split_at(1);
                let k: usize = tail.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(bad());
                }
                match head {
                    "a" => Ok(Self::A(k - 1)),
                    "c" => Ok(Self::C(k - 1)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

impl Serialize for DirectionClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DirectionClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Role of one index of a lifted block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Inherited(InheritedIndex),
    Complement(Family),
}

/// Lifted basis of one target block `sl(m_j)`.
#[derive(Debug, Clone)]
pub struct LiftedBlock {
    kinds: Vec<IndexKind>,
    basis: SlBasis,
}

impl LiftedBlock {
    pub fn m(&self) -> usize {
        self.basis.n()
    }

    pub fn basis(&self) -> &SlBasis {
        &self.basis
    }

    pub fn kinds(&self) -> &[IndexKind] {
        &self.kinds
    }

    pub fn inherited_count(&self) -> usize {
        self.kinds
            .iter()
            .take_while(|k| matches!(k, IndexKind::Inherited(_)))
            .count()
    }

    pub fn complement_count(&self) -> usize {
        self.kinds.len() - self.inherited_count()
    }

    /// Positions of the complement indices in the block basis.
    pub fn complement_indices(&self) -> std::ops::Range<usize> {
        self.inherited_count()..self.kinds.len()
    }

    /// Position of `(i, ℓ, α)` in the block basis.
    pub fn position_of(&self, idx: InheritedIndex) -> Option<usize> {
        self.kinds
            .iter()
            .position(|k| *k == IndexKind::Inherited(idx))
    }

    pub fn family_sizes(&self) -> BTreeMap<Family, usize> {
        let mut out = BTreeMap::new();
        for k in &self.kinds {
            if let IndexKind::Complement(f) = k {
                *out.entry(*f).or_insert(0) += 1;
            }
        }
        out
    }
}

/// φ-adapted bases of all target blocks.
#[derive(Debug, Clone)]
pub struct LiftedBasis {
    spec: EmbeddingSpec,
    source: Vec<SlBasis>,
    blocks: Vec<LiftedBlock>,
}

impl LiftedBasis {
    pub fn spec(&self) -> &EmbeddingSpec {
        &self.spec
    }

    pub fn source_bases(&self) -> &[SlBasis] {
        &self.source
    }

    pub fn blocks(&self) -> &[LiftedBlock] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> &LiftedBlock {
        &self.blocks[j]
    }

    /// One form frame per target block.
    pub fn target_frames(&self) -> Vec<Arc<Frame>> {
        self.blocks
            .iter()
            .map(|b| Arc::new(Frame::from_basis(&b.basis)))
            .collect()
    }

    /// One form frame per source summand.
    pub fn source_frames(&self) -> Vec<Arc<Frame>> {
        crate::forms::frames_for(&self.source)
    }
}

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Builds the lifted basis of every target block.
pub fn build_lifted_basis(spec: &EmbeddingSpec, source_bases: &[SlBasis]) -> Result<LiftedBasis> {
    let src = spec.source();
    if source_bases.len() != src.rank() {
        return Err(Error::ProfileMismatch(format!(
            "{} source bases for {} summands",
            source_bases.len(),
            src.rank()
        )));
    }
    for (i, b) in source_bases.iter().enumerate() {
        if b.n() != src.dim(i) {
            return Err(Error::ProfileMismatch(format!(
                "source basis {i} is for sl({}), summand is M{}",
                b.n(),
                src.dim(i)
            )));
        }
        if !b.is_orthonormal(ORTHONORMAL_TOL) {
            return Err(Error::Precondition(format!(
                "source basis {i} is not orthonormal"
            )));
        }
    }
    let blocks = (0..spec.target().rank())
        .map(|j| build_block(spec, source_bases, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(LiftedBasis {
        spec: spec.clone(),
        source: source_bases.to_vec(),
        blocks,
    })
}

/// Row ranges of one target block: the envelope of each summand and the pad.
struct Layout {
    /// `(summand, start, len)` for summands with `α_{ji} > 0`.
    envelopes: Vec<(usize, usize, usize)>,
    pad_start: usize,
    m: usize,
}

impl Layout {
    fn new(spec: &EmbeddingSpec, j: usize) -> Self {
        let envelopes = (0..spec.source().rank())
            .filter(|&i| spec.multiplicity(j, i) > 0)
            .map(|i| (i, spec.envelope_offset(j, i), spec.envelope_size(j, i)))
            .collect();
        Self {
            envelopes,
            pad_start: spec.pad_offset(j),
            m: spec.target().dim(j),
        }
    }

    /// Region of a row: `Some(summand)` inside an envelope, `None` in the pad.
    fn region(&self, p: usize) -> Option<usize> {
        self.envelopes
            .iter()
            .find(|(_, s, l)| p >= *s && p < s + l)
            .map(|(i, _, _)| *i)
    }
}

fn off_diagonal_pair(m: usize, p: usize, q: usize) -> [CMatrix; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut re = CMatrix::zeros(m, m);
    re[(p, q)] = Complex64::new(s, 0.0);
    re[(q, p)] = Complex64::new(-s, 0.0);
    let mut im = CMatrix::zeros(m, m);
    im[(p, q)] = Complex64::new(0.0, s);
    im[(q, p)] = Complex64::new(0.0, s);
    [re, im]
}

/// `i` times the identity on rows `start..start+len`.
fn block_unit(m: usize, start: usize, len: usize) -> CMatrix {
    let mut out = CMatrix::zeros(m, m);
    for k in start..start + len {
        out[(k, k)] = I;
    }
    out
}

fn build_block(spec: &EmbeddingSpec, source: &[SlBasis], j: usize) -> Result<LiftedBlock> {
    let layout = Layout::new(spec, j);
    let m = layout.m;
    let mut kinds = Vec::with_capacity(m * m - 1);
    let mut gens = Vec::with_capacity(m * m - 1);

    for (i, basis) in source.iter().enumerate() {
        for copy in 0..spec.multiplicity(j, i) {
            for (alpha, e) in basis.generators().iter().enumerate() {
                gens.push(phi_block_inject(spec, i, j, copy, e)?);
                kinds.push(IndexKind::Inherited(InheritedIndex {
                    summand: i,
                    copy,
                    alpha,
                }));
            }
        }
    }

    let mut raw: Vec<(Family, CMatrix)> = Vec::new();
    let n0 = m - layout.pad_start;

    if n0 >= 2 {
        for g in gellmann_generators(n0) {
            let mut x = CMatrix::zeros(m, m);
            x.view_mut((layout.pad_start, layout.pad_start), (n0, n0))
                .copy_from(&g);
            raw.push((Family::PadBlock, x));
        }
    }
    for p in 0..m {
        for q in (p + 1)..m {
            if layout.region(p) != layout.region(q) {
                for x in off_diagonal_pair(m, p, q) {
                    raw.push((Family::OffEnvelope, x));
                }
            }
        }
    }
    for &(i, start, _) in &layout.envelopes {
        let n = spec.source().dim(i);
        let copy_of = |p: usize| (p - start) / n;
        for p in start..start + spec.envelope_size(j, i) {
            for q in (p + 1)..start + spec.envelope_size(j, i) {
                if copy_of(p) != copy_of(q) {
                    for x in off_diagonal_pair(m, p, q) {
                        raw.push((Family::IntraEnvelopeOffdiag, x));
                    }
                }
            }
        }
    }
    for &(i, _, _) in &layout.envelopes {
        let n = spec.source().dim(i);
        for copy in 0..spec.multiplicity(j, i).saturating_sub(1) {
            let x = block_unit(m, spec.slot_offset(j, i, copy), n)
                - block_unit(m, spec.slot_offset(j, i, copy + 1), n);
            raw.push((Family::CopyDifference, x));
        }
    }
    // source-source terms first, the pad pseudo-block term last
    for w in layout.envelopes.windows(2) {
        let (i, si, _) = w[0];
        let (k, sk, _) = w[1];
        let (ni, nk) = (spec.source().dim(i), spec.source().dim(k));
        let x = block_unit(m, si, ni) * Complex64::new(nk as f64, 0.0)
            - block_unit(m, sk, nk) * Complex64::new(ni as f64, 0.0);
        raw.push((Family::CrossEnvelopeDiagonal, x));
    }
    if n0 > 0 {
        if let Some(&(i, si, _)) = layout.envelopes.first() {
            let ni = spec.source().dim(i);
            let x = block_unit(m, layout.pad_start, n0) * Complex64::new(ni as f64, 0.0)
                - block_unit(m, si, ni) * Complex64::new(n0 as f64, 0.0);
            raw.push((Family::CrossEnvelopeDiagonal, x));
        }
    }

    let complement_start = gens.len();
    for (family, x) in raw {
        let mut v = x;
        for prev in &gens[complement_start..] {
            let c = frobenius_inner(prev, &v);
            v -= prev * c;
        }
        let norm = frobenius_inner(&v, &v).re.sqrt();
        if norm < 1e-10 {
            return Err(Error::NumericalFailure(format!(
                "complement family {family:?} is linearly dependent in block {j}"
            )));
        }
        gens.push(v / Complex64::new(norm, 0.0));
        kinds.push(IndexKind::Complement(family));
    }

    if gens.len() != m * m - 1 {
        return Err(Error::NumericalFailure(format!(
            "block {j}: built {} generators, expected {}",
            gens.len(),
            m * m - 1
        )));
    }
    Ok(LiftedBlock {
        kinds,
        basis: SlBasis::from_generators(m, gens)?,
    })
}

/// Direction classes for every index of the single target block.
pub fn classify_directions(
    basis: &LiftedBasis,
    spec: &EmbeddingSpec,
) -> Result<Vec<DirectionClass>> {
    if spec.target().rank() != 1 {
        return Err(Error::Unsupported(
            "direction classes are defined for single-block targets only".into(),
        ));
    }
    let block = &basis.blocks[0];
    let layout = Layout::new(spec, 0);
    let tol = 1e-12;
    let out = block
        .kinds
        .iter()
        .zip(block.basis.generators())
        .map(|(kind, x)| {
            if let IndexKind::Inherited(idx) = kind {
                return DirectionClass::A(idx.summand);
            }
            let mut touches_pad = false;
            let mut off_diagonal = false;
            let mut summands: Vec<usize> = Vec::new();
            for p in 0..layout.m {
                for q in 0..layout.m {
                    if x[(p, q)].norm() <= tol {
                        continue;
                    }
                    off_diagonal |= p != q;
                    for r in [layout.region(p), layout.region(q)] {
                        match r {
                            None => touches_pad = true,
                            Some(i) if !summands.contains(&i) => summands.push(i),
                            _ => {}
                        }
                    }
                }
            }
            match (touches_pad, off_diagonal) {
                (false, true) => DirectionClass::B,
                (false, false) => DirectionClass::D,
                (true, true) if summands.len() == 1 => DirectionClass::C(summands[0]),
                (true, true) if summands.is_empty() => DirectionClass::E,
                (true, true) => DirectionClass::B,
                (true, false) => DirectionClass::E,
            }
        })
        .collect();
    Ok(out)
}

/// Class cardinalities, keyed by class.
pub fn class_counts(labels: &[DirectionClass]) -> BTreeMap<DirectionClass, usize> {
    let mut out = BTreeMap::new();
    for l in labels {
        *out.entry(*l).or_insert(0) += 1;
    }
    out
}

/// `(n_idof, n_ndof, r_dof)`.
pub fn dof_counts(basis: &LiftedBasis) -> Result<(usize, usize, f64)> {
    let idof: usize = basis.blocks.iter().map(LiftedBlock::inherited_count).sum();
    let ndof: usize = basis.blocks.iter().map(LiftedBlock::complement_count).sum();
    if idof == 0 {
        return Err(Error::UndefinedRatio);
    }
    Ok((idof, ndof, ndof as f64 / idof as f64))
}

/// The φ-compatible form on the target: components on inherited indices of a single
/// `(i, ℓ)` are `φ_i^{j,ℓ}(ω_{α…})`; all other components vanish. Degree-0 parts map
/// through `φ`.
pub fn lift_form(basis: &LiftedBasis, omega: &Form) -> Result<Form> {
    let spec = &basis.spec;
    if omega.summands() != spec.source().rank() {
        return Err(Error::ProfileMismatch(
            "form does not live on the source".into(),
        ));
    }
    let frames = basis.target_frames();
    let mut out = Form::zero(&frames);

    let zero_forms: Vec<CMatrix> = (0..omega.summands())
        .map(|i| {
            let n = spec.source().dim(i);
            omega
                .components(i)
                .get(&0)
                .cloned()
                .unwrap_or_else(|| CMatrix::zeros(n, n))
        })
        .collect();
    if zero_forms.iter().any(|a| max_abs(a) > 0.0) {
        for (j, v) in phi_apply(spec, &zero_forms)?.into_iter().enumerate() {
            out.add_component(j, &[], v)?;
        }
    }

    for (j, block) in basis.blocks.iter().enumerate() {
        for i in 0..omega.summands() {
            for copy in 0..spec.multiplicity(j, i) {
                for (mask, val) in omega.components(i) {
                    if *mask == 0 {
                        continue;
                    }
                    let idx: Vec<usize> = (0..64)
                        .filter(|b| mask & (1u64 << b) != 0)
                        .map(|alpha| {
                            block
                                .position_of(InheritedIndex {
                                    summand: i,
                                    copy,
                                    alpha,
                                })
                                .ok_or_else(|| {
                                    Error::ProfileMismatch(
                                        "form index outside the source basis".into(),
                                    )
                                })
                        })
                        .collect::<Result<_>>()?;
                    out.add_component(j, &idx, phi_block_inject(spec, i, j, copy, val)?)?;
                }
            }
        }
    }
    Ok(out)
}

/// Source bases of Gell-Mann type for every summand of the spec.
pub fn default_source_bases(spec: &EmbeddingSpec) -> Result<Vec<SlBasis>> {
    spec.source()
        .dims()
        .iter()
        .map(|&n| crate::matalg::gellmann_basis(n))
        .collect()
}
