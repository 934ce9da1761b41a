//! Curvature, Higgs potential and gradient, gauge-boson mass form.
//!
//! Field conventions: in target block `j` the B-field of an inherited index
//! `(i, ℓ, α)` is `λ_i E_{(i,ℓ,α)}`; complement fields are free and expanded on the
//! orthonormal `u(m_j)` probe basis (the lifted generators, then `i·1/√m_j`).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::afcore::phi_block_inject;
use crate::lift::{classify_directions, DirectionClass, IndexKind, LiftedBasis};
use crate::matalg::{
    commutator, frobenius_inner, frobenius_norm, max_abs, unitarity_defect, CMatrix, SlBasis, I,
};
use crate::{Error, Result};

/// Inherited parameters plus free complement coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfiguration {
    pub lambdas: Vec<f64>,
    /// `free[j][c][k]`: coefficient of probe `k` in the `c`-th complement field of block `j`.
    pub free: Vec<Vec<Vec<f64>>>,
}

impl FieldConfiguration {
    /// All complement fields zero.
    pub fn zeros(basis: &LiftedBasis, lambdas: &[f64]) -> Self {
        let free = basis
            .blocks()
            .iter()
            .map(|b| vec![vec![0.0; b.m() * b.m()]; b.complement_count()])
            .collect();
        Self {
            lambdas: lambdas.to_vec(),
            free,
        }
    }

    /// Complement fields equal to their generators: `B_β = E_β`.
    pub fn basis_configuration(basis: &LiftedBasis, lambdas: &[f64]) -> Self {
        let mut cfg = Self::zeros(basis, lambdas);
        for (j, b) in basis.blocks().iter().enumerate() {
            for (c, pos) in b.complement_indices().enumerate() {
                cfg.free[j][c][pos] = 1.0;
            }
        }
        cfg
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.free.iter().flatten().flatten().copied().collect()
    }

    pub fn from_flat(basis: &LiftedBasis, lambdas: &[f64], x: &[f64]) -> Result<Self> {
        let mut cfg = Self::zeros(basis, lambdas);
        let n: usize = cfg.free.iter().flatten().map(Vec::len).sum();
        if x.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} free coefficients, expected {n}",
                x.len()
            )));
        }
        let mut it = x.iter();
        for v in cfg.free.iter_mut().flatten().flatten() {
            *v = *it.next().unwrap();
        }
        Ok(cfg)
    }

    fn check(&self, basis: &LiftedBasis) -> Result<()> {
        if self.lambdas.len() != basis.spec().source().rank() {
            return Err(Error::DimensionMismatch(format!(
                "{} lambdas for {} source summands",
                self.lambdas.len(),
                basis.spec().source().rank()
            )));
        }
        if self.free.len() != basis.blocks().len() {
            return Err(Error::DimensionMismatch(
                "free fields do not match target blocks".into(),
            ));
        }
        for (j, b) in basis.blocks().iter().enumerate() {
            if self.free[j].len() != b.complement_count()
                || self.free[j].iter().any(|v| v.len() != b.m() * b.m())
            {
                return Err(Error::DimensionMismatch(format!(
                    "free fields of block {j} have the wrong shape"
                )));
            }
        }
        Ok(())
    }
}

/// Orthonormal `u(m)` probes of block `j`: lifted generators then `i·1/√m`.
pub fn probe_basis(basis: &LiftedBasis, j: usize) -> Vec<CMatrix> {
    let b = basis.block(j);
    let m = b.m();
    let mut out = b.basis().generators().to_vec();
    out.push(CMatrix::identity(m, m) * (I / (m as f64).sqrt()));
    out
}

/// Full B-field list of every target block, in lifted-basis order.
pub fn materialize(basis: &LiftedBasis, config: &FieldConfiguration) -> Result<Vec<Vec<CMatrix>>> {
    config.check(basis)?;
    Ok(basis
        .blocks()
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let probes = probe_basis(basis, j);
            let m = b.m();
            let mut c = 0;
            b.kinds()
                .iter()
                .zip(b.basis().generators())
                .map(|(kind, e)| match kind {
                    IndexKind::Inherited(idx) => {
                        e * Complex64::new(config.lambdas[idx.summand], 0.0)
                    }
                    IndexKind::Complement(_) => {
                        let mut out = CMatrix::zeros(m, m);
                        for (x, p) in config.free[j][c].iter().zip(&probes) {
                            if *x != 0.0 {
                                out += p * Complex64::new(*x, 0.0);
                            }
                        }
                        c += 1;
                        out
                    }
                })
                .collect()
        })
        .collect())
}

fn check_fields(basis: &LiftedBasis, fields: &[Vec<CMatrix>]) -> Result<()> {
    if fields.len() != basis.blocks().len()
        || fields.iter().zip(basis.blocks()).any(|(f, b)| {
            f.len() != b.basis().dim() || f.iter().any(|x| x.nrows() != b.m() || x.ncols() != b.m())
        })
    {
        return Err(Error::DimensionMismatch(
            "fields do not match the lifted basis".into(),
        ));
    }
    Ok(())
}

/// `R_ab = [B_a, B_b] − C^g_{ab} B_g` for one basis.
fn curvature_defect(basis: &SlBasis, fields: &[CMatrix], a: usize, b: usize) -> CMatrix {
    let c = basis.structure_constants();
    let mut r = commutator(&fields[a], &fields[b]);
    for (g, f) in fields.iter().enumerate() {
        let cg = c.get(a, b, g);
        if cg != 0.0 {
            r -= f * Complex64::new(cg, 0.0);
        }
    }
    r
}

/// `Θ^j_{ab} = −([B_a, B_b] − C^g_{ab} B_g)` for materialized fields.
pub fn curvature_of_fields(
    basis: &LiftedBasis,
    fields: &[Vec<CMatrix>],
) -> Result<Vec<Vec<Vec<CMatrix>>>> {
    check_fields(basis, fields)?;
    Ok(basis
        .blocks()
        .iter()
        .zip(fields)
        .map(|(b, f)| {
            let d = b.basis().dim();
            (0..d)
                .map(|x| {
                    (0..d)
                        .map(|y| -curvature_defect(b.basis(), f, x, y))
                        .collect()
                })
                .collect()
        })
        .collect())
}

pub fn curvature_components(
    basis: &LiftedBasis,
    config: &FieldConfiguration,
) -> Result<Vec<Vec<Vec<CMatrix>>>> {
    curvature_of_fields(basis, &materialize(basis, config)?)
}

/// `V = Σ_j ½ Σ_{a,b} ‖Θ^j_{ab}‖²_F` for materialized fields.
pub fn potential_of_fields(basis: &LiftedBasis, fields: &[Vec<CMatrix>]) -> Result<f64> {
    check_fields(basis, fields)?;
    let mut v = 0.0;
    for (b, f) in basis.blocks().iter().zip(fields) {
        let d = b.basis().dim();
        for x in 0..d {
            for y in (x + 1)..d {
                v += frobenius_norm(&curvature_defect(b.basis(), f, x, y)).powi(2);
            }
        }
    }
    Ok(v)
}

pub fn higgs_potential(basis: &LiftedBasis, config: &FieldConfiguration) -> Result<f64> {
    potential_of_fields(basis, &materialize(basis, config)?)
}

/// Gradient of [`higgs_potential`] over the free coefficients, in [`FieldConfiguration::to_flat`] order.
pub fn higgs_gradient(basis: &LiftedBasis, config: &FieldConfiguration) -> Result<Vec<f64>> {
    config.check(basis)?;
    let model = HiggsModel::new(basis);
    let mut grad = vec![0.0; model.n_free()];
    model.value_and_gradient(&config.lambdas, &config.to_flat(), &mut grad)?;
    Ok(grad)
}

/// Allocation-free evaluator of the potential and its gradient, used by the minimizer.
#[derive(Debug, Clone)]
pub struct HiggsModel {
    blocks: Vec<BlockModel>,
    n_free: usize,
    rank: usize,
}

#[derive(Debug, Clone)]
struct BlockModel {
    m: usize,
    /// Lifted generators, row-major.
    gens: Vec<Vec<Complex64>>,
    /// Probe basis, row-major.
    probes: Vec<Vec<Complex64>>,
    /// Summand of each inherited index.
    inherited: Vec<usize>,
    /// Non-zero `C^g_{ab}` per pair `a < b`, in pair order.
    sc: Vec<Vec<(usize, f64)>>,
    free_offset: usize,
}

fn flat(m: &CMatrix) -> Vec<Complex64> {
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

/// `out = a b − b a` for row-major `m × m` buffers.
fn comm_into(m: usize, a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
    for r in 0..m {
        for c in 0..m {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..m {
                s += a[r * m + k] * b[k * m + c] - b[r * m + k] * a[k * m + c];
            }
            out[r * m + c] = s;
        }
    }
}

/// `out += s·(r h† − h† r)`, i.e. `s·[r, h†]`.
fn add_comm_adj(m: usize, s: f64, r: &[Complex64], h: &[Complex64], out: &mut [Complex64]) {
    for i in 0..m {
        for j in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                // (h†)_{kj} = conj(h_{jk})
                acc += r[i * m + k] * h[j * m + k].conj() - h[k * m + i].conj() * r[k * m + j];
            }
            out[i * m + j] += acc * s;
        }
    }
}

impl HiggsModel {
    pub fn new(basis: &LiftedBasis) -> Self {
        let mut offset = 0;
        let blocks = basis
            .blocks()
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let d = b.basis().dim();
                let c = b.basis().structure_constants();
                let mut sc = Vec::with_capacity(d * (d - 1) / 2);
                for x in 0..d {
                    for y in (x + 1)..d {
                        sc.push(
                            (0..d)
                                .filter_map(|g| {
                                    let v = c.get(x, y, g);
                                    (v.abs() > 1e-14).then_some((g, v))
                                })
                                .collect(),
                        );
                    }
                }
                let inherited = b
                    .kinds()
                    .iter()
                    .filter_map(|k| match k {
                        IndexKind::Inherited(idx) => Some(idx.summand),
                        IndexKind::Complement(_) => None,
                    })
                    .collect();
                let bm = BlockModel {
                    m: b.m(),
                    gens: b.basis().generators().iter().map(flat).collect(),
                    probes: probe_basis(basis, j).iter().map(flat).collect(),
                    inherited,
                    sc,
                    free_offset: offset,
                };
                offset += b.complement_count() * b.m() * b.m();
                bm
            })
            .collect();
        Self {
            blocks,
            n_free: offset,
            rank: basis.spec().source().rank(),
        }
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Potential at `(lambdas, x)`; writes the gradient over `x` into `grad`.
    pub fn value_and_gradient(&self, lambdas: &[f64], x: &[f64], grad: &mut [f64]) -> Result<f64> {
        if lambdas.len() != self.rank || x.len() != self.n_free || grad.len() != self.n_free {
            return Err(Error::DimensionMismatch(
                "model arguments have the wrong length".into(),
            ));
        }
        let mut v = 0.0;
        for blk in &self.blocks {
            v += blk.eval(lambdas, x, Some(grad));
        }
        Ok(v)
    }

    pub fn value(&self, lambdas: &[f64], x: &[f64]) -> Result<f64> {
        if lambdas.len() != self.rank || x.len() != self.n_free {
            return Err(Error::DimensionMismatch(
                "model arguments have the wrong length".into(),
            ));
        }
        Ok(self.blocks.iter().map(|b| b.eval(lambdas, x, None)).sum())
    }
}

impl BlockModel {
    fn fields(&self, lambdas: &[f64], x: &[f64]) -> Vec<Vec<Complex64>> {
        let mm = self.m * self.m;
        let n_inh = self.inherited.len();
        let mut out = Vec::with_capacity(self.gens.len());
        for (a, g) in self.gens.iter().enumerate().take(n_inh) {
            let l = lambdas[self.inherited[a]];
            out.push(g.iter().map(|z| z * l).collect());
        }
        for c in 0..self.gens.len() - n_inh {
            let coeffs = &x[self.free_offset + c * mm..self.free_offset + (c + 1) * mm];
            let mut b = vec![Complex64::new(0.0, 0.0); mm];
            for (k, &w) in coeffs.iter().enumerate() {
                if w != 0.0 {
                    for (o, p) in b.iter_mut().zip(&self.probes[k]) {
                        *o += p * w;
                    }
                }
            }
            out.push(b);
        }
        out
    }

    fn eval(&self, lambdas: &[f64], x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let m = self.m;
        let mm = m * m;
        let d = self.gens.len();
        let n_inh = self.inherited.len();
        let b = self.fields(lambdas, x);
        let want_grad = grad.is_some();
        let mut g_acc = if want_grad {
            vec![vec![Complex64::new(0.0, 0.0); mm]; d - n_inh]
        } else {
            Vec::new()
        };
        let mut r = vec![Complex64::new(0.0, 0.0); mm];
        let mut v = 0.0;
        let mut pair = 0;
        for a in 0..d {
            for c in (a + 1)..d {
                comm_into(m, &b[a], &b[c], &mut r);
                for &(g, k) in &self.sc[pair] {
                    for (o, bg) in r.iter_mut().zip(&b[g]) {
                        *o -= bg * k;
                    }
                }
                pair += 1;
                v += r.iter().map(|z| z.norm_sqr()).sum::<f64>();
                if !want_grad {
                    continue;
                }
                // ordered-pair sum: G_a += 2[R_ac, B_c†], G_c −= 2[R_ac, B_a†], G_g −= 2 C^g_{ac} R_ac
                if a >= n_inh {
                    add_comm_adj(m, 2.0, &r, &b[c], &mut g_acc[a - n_inh]);
                }
                if c >= n_inh {
                    add_comm_adj(m, -2.0, &r, &b[a], &mut g_acc[c - n_inh]);
                }
                for &(g, k) in &self.sc[pair - 1] {
                    if g >= n_inh {
                        for (o, z) in g_acc[g - n_inh].iter_mut().zip(&r) {
                            *o -= z * (2.0 * k);
                        }
                    }
                }
            }
        }
        if let Some(grad) = grad {
            for (c, gc) in g_acc.iter().enumerate() {
                for (k, p) in self.probes.iter().enumerate() {
                    let s: f64 = gc.iter().zip(p).map(|(g, u)| (g.conj() * u).re).sum();
                    grad[self.free_offset + c * mm + k] = s;
                }
            }
        }
        v
    }
}

/// `M²_{γγ′} = Σ_j Σ_β Re⟨[G_γ, B_β], [G_γ′, B_β]⟩_F`, block-diagonal over the target
/// blocks, probes ordered block by block.
pub fn mass_form_of_fields(basis: &LiftedBasis, fields: &[Vec<CMatrix>]) -> Result<DMatrix<f64>> {
    check_fields(basis, fields)?;
    let total: usize = basis.blocks().iter().map(|b| b.m() * b.m()).sum();
    let mut out = DMatrix::zeros(total, total);
    let mut off = 0;
    for (j, f) in fields.iter().enumerate() {
        let probes = probe_basis(basis, j);
        let np = probes.len();
        for bfield in f {
            let xs: Vec<CMatrix> = probes.iter().map(|p| commutator(p, bfield)).collect();
            for a in 0..np {
                for c in a..np {
                    let v = frobenius_inner(&xs[a], &xs[c]).re;
                    out[(off + a, off + c)] += v;
                    if a != c {
                        out[(off + c, off + a)] += v;
                    }
                }
            }
        }
        off += np;
    }
    Ok(out)
}

pub fn mass_form(basis: &LiftedBasis, config: &FieldConfiguration) -> Result<DMatrix<f64>> {
    mass_form_of_fields(basis, &materialize(basis, config)?)
}

/// Class of every probe direction, with the trace probe last in each block.
pub fn probe_labels(basis: &LiftedBasis) -> Result<Vec<DirectionClass>> {
    let mut labels = classify_directions(basis, basis.spec())?;
    labels.push(DirectionClass::Trace);
    Ok(labels)
}

/// A group of (nearly) equal eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassCluster {
    pub mass_sq: f64,
    pub mass: f64,
    pub degeneracy: usize,
    /// Most frequent member label.
    pub label: DirectionClass,
    pub labels: BTreeMap<DirectionClass, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSpectrum {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub masses: Vec<f64>,
    pub labels: Vec<DirectionClass>,
    pub clusters: Vec<MassCluster>,
}

impl MassSpectrum {
    /// Clusters carrying `label` as their majority label.
    pub fn clusters_with(&self, label: DirectionClass) -> impl Iterator<Item = &MassCluster> {
        self.clusters.iter().filter(move |c| c.label == label)
    }

    pub fn degeneracies(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.degeneracy).collect()
    }

    /// Degeneracies of the clusters that are not pure trace directions.
    pub fn sl_degeneracies(&self) -> Vec<usize> {
        self.clusters
            .iter()
            .filter(|c| c.labels.keys().any(|l| *l != DirectionClass::Trace))
            .map(|c| c.degeneracy)
            .collect()
    }
}

pub const CLUSTER_REL_TOL: f64 = 1e-3;
const CLUSTER_ABS_FLOOR: f64 = 1e-9;

/// Eigen-decomposes a mass form, clusters eigenvalues and labels each eigenvector by
/// the class carrying its largest squared weight.
///
/// Trace probes whose rows vanish decouple exactly; they are reported as a separate
/// massless cluster at the end rather than mixed into other zero modes.
pub fn mass_spectrum(form: &DMatrix<f64>, labels: &[DirectionClass]) -> Result<MassSpectrum> {
    let n = form.nrows();
    if form.ncols() != n || labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "mass form is {}x{} with {} labels",
            n,
            form.ncols(),
            labels.len()
        )));
    }
    let scale = form.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    let asym = (form - form.transpose())
        .iter()
        .fold(0.0f64, |a, x| a.max(x.abs()));
    if asym > 1e-9 * scale {
        return Err(Error::NumericalFailure(format!(
            "mass form is not symmetric ({asym:.3e})"
        )));
    }
    let decoupled: Vec<bool> = (0..n)
        .map(|k| {
            labels[k] == DirectionClass::Trace
                && form.row(k).iter().all(|x| x.abs() <= 1e-12 * scale)
        })
        .collect();
    let keep: Vec<usize> = (0..n).filter(|&k| !decoupled[k]).collect();
    let reduced = DMatrix::from_fn(keep.len(), keep.len(), |a, b| form[(keep[a], keep[b])]);
    let kept_labels: Vec<DirectionClass> = keep.iter().map(|&k| labels[k]).collect();

    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    if let Some(&last) = order.last() {
        if eig.eigenvalues[last] < -1e-9 * scale {
            return Err(Error::NumericalFailure(format!(
                "mass form is not positive semidefinite (eigenvalue {:.3e})",
                eig.eigenvalues[last]
            )));
        }
    }
    let mut classes = kept_labels.clone();
    classes.sort();
    classes.dedup();

    let mut eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    // squared weight of each sorted eigenvector on each class
    let weights: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let col = eig.eigenvectors.column(k);
            classes
                .iter()
                .map(|c| {
                    kept_labels
                        .iter()
                        .zip(col.iter())
                        .filter(|(l, _)| *l == c)
                        .map(|(_, x)| x * x)
                        .sum()
                })
                .collect()
        })
        .collect();

    let mut clusters: Vec<MassCluster> = Vec::new();
    let mut vec_labels = Vec::with_capacity(n);
    let mut start = 0;
    let m = eigenvalues.len();
    while start < m {
        let head = eigenvalues[start];
        let mut end = start + 1;
        while end < m && head - eigenvalues[end] <= CLUSTER_REL_TOL * head.abs() + CLUSTER_ABS_FLOOR
        {
            end += 1;
        }
        vec_labels.extend(label_cluster(&classes, &weights[start..end]));
        let mean = eigenvalues[start..end].iter().sum::<f64>() / (end - start) as f64;
        clusters.push(cluster(mean, &vec_labels[start..end]));
        start = end;
    }
    let n_trace = decoupled.iter().filter(|d| **d).count();
    if n_trace > 0 {
        eigenvalues.extend(std::iter::repeat_n(0.0, n_trace));
        vec_labels.extend(std::iter::repeat_n(DirectionClass::Trace, n_trace));
        clusters.push(cluster(0.0, &vec_labels[m..]));
    }

    Ok(MassSpectrum {
        masses: eigenvalues.iter().map(|v| v.sqrt()).collect(),
        eigenvalues,
        labels: vec_labels,
        clusters,
    })
}

/// Labels the eigenvectors of one cluster.
///
/// The class weights summed over the cluster are those of its eigenspace projector, so
/// they do not depend on how a degenerate eigenspace was split into vectors. Each class
/// gets a quota from those sums (largest remainder), then vectors take the class with
/// the largest own weight among those with quota left.
fn label_cluster(classes: &[DirectionClass], weights: &[Vec<f64>]) -> Vec<DirectionClass> {
    let size = weights.len();
    let totals: Vec<f64> = (0..classes.len())
        .map(|c| weights.iter().map(|w| w[c]).sum())
        .collect();
    let mut quota: Vec<usize> = totals.iter().map(|t| t.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..classes.len()).collect();
    rest.sort_by(|&a, &b| {
        (totals[b] - totals[b].floor())
            .total_cmp(&(totals[a] - totals[a].floor()))
            .then(a.cmp(&b))
    });
    let deficit = size.saturating_sub(quota.iter().sum());
    for &c in rest.iter().take(deficit) {
        quota[c] += 1;
    }
    weights
        .iter()
        .map(|w| {
            let pick = (0..classes.len())
                .filter(|&c| quota[c] > 0)
                .max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            quota[pick] = quota[pick].saturating_sub(1);
            classes.get(pick).copied().unwrap_or(DirectionClass::Trace)
        })
        .collect()
}

fn cluster(mass_sq: f64, labels: &[DirectionClass]) -> MassCluster {
    let mut counts = BTreeMap::new();
    for l in labels {
        *counts.entry(*l).or_insert(0) += 1;
    }
    let mut label = DirectionClass::Trace;
    let mut best = 0;
    for (l, c) in &counts {
        if *c > best {
            best = *c;
            label = *l;
        }
    }
    MassCluster {
        mass_sq,
        mass: mass_sq.sqrt(),
        degeneracy: labels.len(),
        label,
        labels: counts,
    }
}

/// `B ↦ u⁻¹ B u` per target block.
pub fn gauge_transform_fields(fields: &[Vec<CMatrix>], u: &[CMatrix]) -> Result<Vec<Vec<CMatrix>>> {
    if fields.len() != u.len() {
        return Err(Error::ProfileMismatch(
            "gauge element does not match blocks".into(),
        ));
    }
    for x in u {
        let d = unitarity_defect(x);
        if d > 1e-10 {
            return Err(Error::InvalidGaugeElement(d));
        }
    }
    Ok(fields
        .iter()
        .zip(u)
        .map(|(f, x)| {
            let inv = x.adjoint();
            f.iter().map(|b| &inv * b * x).collect()
        })
        .collect())
}

/// Max over inherited indices of `‖B^j_{(i,ℓ,α)} − φ_i^{j,ℓ}(B^i_α)‖_max`.
pub fn compatibility_residual(
    basis: &LiftedBasis,
    source_fields: &[Vec<CMatrix>],
    target_fields: &[Vec<CMatrix>],
) -> Result<f64> {
    check_fields(basis, target_fields)?;
    let spec = basis.spec();
    if source_fields.len() != spec.source().rank() {
        return Err(Error::ProfileMismatch(
            "source fields do not match summands".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for (j, blk) in basis.blocks().iter().enumerate() {
        for (pos, kind) in blk.kinds().iter().enumerate() {
            if let IndexKind::Inherited(idx) = kind {
                let src = source_fields[idx.summand].get(idx.alpha).ok_or_else(|| {
                    Error::DimensionMismatch("source field list is too short".into())
                })?;
                let lifted = phi_block_inject(spec, idx.summand, j, idx.copy, src)?;
                worst = worst.max(max_abs(&(&target_fields[j][pos] - lifted)));
            }
        }
    }
    Ok(worst)
}

/// Target fields whose inherited part is `φ_i^{j,ℓ}(B^i_α)` and whose complement
/// part is taken from `complement[j]` (or zero).
pub fn lift_fields(
    basis: &LiftedBasis,
    source_fields: &[Vec<CMatrix>],
    complement: Option<&[Vec<CMatrix>]>,
) -> Result<Vec<Vec<CMatrix>>> {
    let spec = basis.spec();
    if source_fields.len() != spec.source().rank() {
        return Err(Error::ProfileMismatch(
            "source fields do not match summands".into(),
        ));
    }
    basis
        .blocks()
        .iter()
        .enumerate()
        .map(|(j, blk)| {
            let m = blk.m();
            let mut c = 0;
            blk.kinds()
                .iter()
                .map(|kind| match kind {
                    IndexKind::Inherited(idx) => phi_block_inject(
                        spec,
                        idx.summand,
                        j,
                        idx.copy,
                        &source_fields[idx.summand][idx.alpha],
                    ),
                    IndexKind::Complement(_) => {
                        let out = complement
                            .and_then(|cs| cs.get(j))
                            .and_then(|cs| cs.get(c))
                            .cloned()
                            .unwrap_or_else(|| CMatrix::zeros(m, m));
                        c += 1;
                        Ok(out)
                    }
                })
                .collect()
        })
        .collect()
}

/// Source action per summand, inherited-sector action per `(j, i)`, and their ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InheritedAction {
    /// `S_A,i = ½ Σ_{αβ} ‖Θ^i_{αβ}‖²`.
    pub source: Vec<f64>,
    /// `sector[j][i]`: the same sum over pairs of inherited indices of summand `i` in block `j`.
    pub sector: Vec<Vec<f64>>,
    /// Sum over pairs of inherited indices from different summands.
    pub mixed: f64,
    /// `sector[j][i] / source[i]`, absent when the source action vanishes.
    pub weights: Vec<Vec<Option<f64>>>,
}

/// Splits the inherited part of the target action into per-summand copies of the
/// source action. `target_fields` must be φ-compatible with `source_fields`.
pub fn inherited_action_terms(
    basis: &LiftedBasis,
    source_fields: &[Vec<CMatrix>],
    target_fields: &[Vec<CMatrix>],
) -> Result<InheritedAction> {
    let res = compatibility_residual(basis, source_fields, target_fields)?;
    if res > 1e-10 {
        return Err(Error::Precondition(format!(
            "target fields are not φ-compatible (residual {res:.3e})"
        )));
    }
    let source: Vec<f64> = basis
        .source_bases()
        .iter()
        .zip(source_fields)
        .map(|(b, f)| {
            let d = b.dim();
            let mut s = 0.0;
            for x in 0..d {
                for y in (x + 1)..d {
                    s += frobenius_norm(&curvature_defect(b, f, x, y)).powi(2);
                }
            }
            s
        })
        .collect();
    let r = source.len();
    let mut sector = vec![vec![0.0; r]; basis.blocks().len()];
    let mut mixed = 0.0;
    for (j, blk) in basis.blocks().iter().enumerate() {
        let n_inh = blk.inherited_count();
        let summand = |p: usize| match blk.kinds()[p] {
            IndexKind::Inherited(idx) => idx.summand,
            IndexKind::Complement(_) => unreachable!(),
        };
        for x in 0..n_inh {
            for y in (x + 1)..n_inh {
                let v =
                    frobenius_norm(&curvature_defect(blk.basis(), &target_fields[j], x, y)).powi(2);
                if summand(x) == summand(y) {
                    sector[j][summand(x)] += v;
                } else {
                    mixed += v;
                }
            }
        }
    }
    let weights = sector
        .iter()
        .map(|row| {
            row.iter()
                .zip(&source)
                .map(|(s, a)| (a.abs() > 1e-300).then(|| s / a))
                .collect()
        })
        .collect();
    Ok(InheritedAction {
        source,
        sector,
        mixed,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afcore::{validate_embedding, AlgebraProfile, EmbeddingSpec};
    use crate::lift::{build_lifted_basis, default_source_bases};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_cluster_keeps_class_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let form = DMatrix::identity(5, 5) * 2.0 + (&noise + noise.transpose()) * 1e-7;
        let labels = [
            DirectionClass::A(0),
            DirectionClass::A(0),
            DirectionClass::C(0),
            DirectionClass::C(0),
            DirectionClass::C(0),
        ];
        let s = mass_spectrum(&form, &labels).unwrap();
        assert_eq!(s.degeneracies(), vec![5]);
        let counts = &s.clusters[0].labels;
        assert_eq!(counts[&DirectionClass::A(0)], 2);
        assert_eq!(counts[&DirectionClass::C(0)], 3);
    }

    fn spec(src: &[usize], tgt: &[usize], mult: Vec<Vec<usize>>) -> EmbeddingSpec {
        validate_embedding(
            AlgebraProfile::new(src.to_vec()).unwrap(),
            AlgebraProfile::new(tgt.to_vec()).unwrap(),
            mult,
        )
        .unwrap()
    }

    fn lifted(s: &EmbeddingSpec) -> LiftedBasis {
        build_lifted_basis(s, &default_source_bases(s).unwrap()).unwrap()
    }

    /// M_n seen as the identity embedding, so every direction is inherited.
    fn plain(n: usize) -> LiftedBasis {
        lifted(&spec(&[n], &[n], vec![vec![1]]))
    }

    #[test]
    fn potential_on_m2_scaled_path() {
        let b = plain(2);
        for lam in [0.0, 0.5, 1.0, -0.7, 2.0] {
            let cfg = FieldConfiguration::zeros(&b, &[lam]);
            let v = higgs_potential(&b, &cfg).unwrap();
            let expect = 6.0 * (lam * lam - lam) * (lam * lam - lam);
            assert!((v - expect).abs() < 1e-12, "{lam}: {v} vs {expect}");
        }
    }

    #[test]
    fn scaled_fields_give_scaled_structure_constants() {
        let b = plain(3);
        let lam = 0.3;
        let theta = curvature_components(&b, &FieldConfiguration::zeros(&b, &[lam])).unwrap();
        let basis = b.block(0).basis();
        for x in 0..8 {
            for y in 0..8 {
                let coeffs: Vec<f64> = (0..8)
                    .map(|g| -(lam * lam - lam) * basis.structure_constants().get(x, y, g))
                    .collect();
                assert!(max_abs(&(&theta[0][x][y] - basis.combine(&coeffs))) < 1e-13);
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_critical_points() {
        let s = spec(&[2], &[3], vec![vec![1]]);
        let b = lifted(&s);
        let null = FieldConfiguration::zeros(&b, &[0.0]);
        assert!(higgs_gradient(&b, &null)
            .unwrap()
            .iter()
            .all(|g| g.abs() < 1e-14));
        let full = FieldConfiguration::basis_configuration(&b, &[1.0]);
        assert!(higgs_potential(&b, &full).unwrap() < 1e-24);
        assert!(higgs_gradient(&b, &full)
            .unwrap()
            .iter()
            .all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = spec(&[2, 2], &[5], vec![vec![1, 1]]);
        let b = lifted(&s);
        let model = HiggsModel::new(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..model.n_free())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let lam = [0.4, -0.3];
        let mut g = vec![0.0; x.len()];
        model.value_and_gradient(&lam, &x, &mut g).unwrap();
        let h = 1e-5;
        for k in (0..x.len()).step_by(17) {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            let fd =
                (model.value(&lam, &xp).unwrap() - model.value(&lam, &xm).unwrap()) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()),
                "{k}: {fd} vs {}",
                g[k]
            );
        }
        let cfg = FieldConfiguration::from_flat(&b, &lam, &x).unwrap();
        let v = higgs_potential(&b, &cfg).unwrap();
        assert!((v - model.value(&lam, &x).unwrap()).abs() < 1e-10 * v.max(1.0));
    }

    #[test]
    fn mass_lemma_on_m2() {
        let b = plain(2);
        let form = mass_form(&b, &FieldConfiguration::zeros(&b, &[1.0])).unwrap();
        let spec = mass_spectrum(&form, &probe_labels(&b).unwrap()).unwrap();
        let expect = [4.0, 4.0, 4.0, 0.0];
        for (v, e) in spec.eigenvalues.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
        assert_eq!(spec.degeneracies(), vec![3, 1]);
        assert_eq!(spec.clusters[1].label, DirectionClass::Trace);
    }

    #[test]
    fn zero_fields_give_zero_form() {
        let b = plain(3);
        let form = mass_form(&b, &FieldConfiguration::zeros(&b, &[0.0])).unwrap();
        assert_eq!(form.iter().fold(0.0f64, |a, x| a.max(x.abs())), 0.0);
        let s = mass_spectrum(&form, &probe_labels(&b).unwrap()).unwrap();
        assert_eq!(s.degeneracies(), vec![8, 1]);
        assert_eq!(s.sl_degeneracies(), vec![8]);
    }

    #[test]
    fn non_psd_form_is_rejected() {
        let form = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -0.5]));
        let labels = [DirectionClass::B, DirectionClass::D];
        assert!(matches!(
            mass_spectrum(&form, &labels),
            Err(Error::NumericalFailure(_))
        ));
    }

    #[test]
    fn action_copies_for_double_inclusion() {
        let s = spec(&[2], &[4], vec![vec![2]]);
        let b = lifted(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let src: Vec<Vec<CMatrix>> = vec![(0..3)
            .map(|_| crate::matalg::random_anti_hermitian(2, &mut rng))
            .collect()];
        let tgt = lift_fields(&b, &src, None).unwrap();
        let terms = inherited_action_terms(&b, &src, &tgt).unwrap();
        assert!((terms.weights[0][0].unwrap() - 2.0).abs() < 1e-10);
        assert!(terms.mixed < 1e-20);
    }
}
