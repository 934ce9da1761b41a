//! Fast self-check suite behind the `check` subcommand.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use ncgft::afcore::{
    compose_embeddings, hat_phi, k0_pushforward, validate_embedding, AlgebraProfile,
    DimensionVector,
};
use ncgft::forms::{koszul_d, wedge, Form, Frame};
use ncgft::gauge::{
    compatibility_residual, gauge_transform_fields, inherited_action_terms, lift_fields, mass_form,
    mass_form_of_fields, mass_spectrum, probe_labels, FieldConfiguration, HiggsModel,
};
use ncgft::lift::{
    build_lifted_basis, class_counts, classify_directions, default_source_bases, dof_counts,
    LiftedBasis,
};
use ncgft::matalg::{
    gellmann_basis, random_anti_hermitian, random_matrix, random_unitary, CMatrix,
};
use ncgft::presets::{case_spec, CASE_NAMES};
use ncgft::ssbm::{minimize_at, ScanOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, value: f64, tol: f64) -> Outcome {
    Outcome {
        name: name.into(),
        passed: value <= tol,
        detail: format!("{value:.3e} (tol {tol:.0e})"),
    }
}

fn failed(name: &str, err: impl std::fmt::Display) -> Outcome {
    Outcome {
        name: name.into(),
        passed: false,
        detail: format!("error: {err}"),
    }
}

fn case_basis(name: &str) -> ncgft::Result<LiftedBasis> {
    let spec = case_spec(name)?;
    build_lifted_basis(&spec, &default_source_bases(&spec)?)
}

fn random_form(frames: &[Arc<Frame>], degree: usize, rng: &mut ChaCha8Rng) -> ncgft::Result<Form> {
    let mut f = Form::zero(frames);
    for (i, fr) in frames.iter().enumerate() {
        let d = fr.dim();
        for mask in 0u64..(1 << d) {
            if mask.count_ones() as usize == degree && rng.random_bool(0.5) {
                let idx: Vec<usize> = (0..d).filter(|k| mask >> k & 1 == 1).collect();
                f.set_component(i, &idx, random_matrix(fr.matrix_dim(), rng))?;
            }
        }
    }
    Ok(f)
}

fn jacobi() -> ncgft::Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        worst = worst.max(gellmann_basis(n)?.structure_constants().jacobi_residual());
    }
    Ok(worst)
}

/// `d² = 0` and graded Leibniz over sl₂ ⊕ sl₃.
fn differential(rng: &mut ChaCha8Rng, trials: usize) -> ncgft::Result<f64> {
    let frames = vec![
        Arc::new(Frame::from_basis(&gellmann_basis(2)?)),
        Arc::new(Frame::from_basis(&gellmann_basis(3)?)),
    ];
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let p = rng.random_range(0..3);
        let q = rng.random_range(0..3);
        let a = random_form(&frames, p, rng)?;
        let b = random_form(&frames, q, rng)?;
        worst = worst.max(koszul_d(&koszul_d(&a)?)?.max_abs());
        let lhs = koszul_d(&wedge(&a, &b)?)?;
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = wedge(&koszul_d(&a)?, &b)?
            .add(&wedge(&a, &koszul_d(&b)?)?.scale(Complex64::new(sign, 0.0)))?;
        worst = worst.max(lhs.distance(&rhs)?);
    }
    Ok(worst)
}

fn counts() -> ncgft::Result<bool> {
    let expected = [
        ((3, 5), vec![3, 4, 1]),
        ((6, 9), vec![3, 3, 8, 1]),
        ((6, 18), vec![3, 3, 8, 4, 4, 1, 1]),
        ((11, 13), vec![3, 8, 12, 1]),
    ];
    let mut ok = true;
    for (name, ((ni, nn), classes)) in CASE_NAMES.iter().zip(expected) {
        let b = case_basis(name)?;
        let (i, n, _) = dof_counts(&b)?;
        let labels = classify_directions(&b, b.spec())?;
        let mut got: Vec<usize> = class_counts(&labels).into_values().collect();
        let mut want = classes;
        got.sort_unstable();
        want.sort_unstable();
        ok &= (i, n) == (ni, nn) && got == want;
    }
    Ok(ok)
}

/// Identity embedding `M_n → M_n` at λ = 1: every sl mass is `√(2n)`.
fn mass_lemma() -> ncgft::Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        let spec = validate_embedding(
            AlgebraProfile::new(vec![n])?,
            AlgebraProfile::new(vec![n])?,
            vec![vec![1]],
        )?;
        let b = build_lifted_basis(&spec, &default_source_bases(&spec)?)?;
        let cfg = FieldConfiguration::basis_configuration(&b, &[1.0]);
        let s = mass_spectrum(&mass_form(&b, &cfg)?, &probe_labels(&b)?)?;
        let target = (2.0 * n as f64).sqrt();
        for (m, l) in s.masses.iter().zip(&s.labels) {
            let want = if *l == ncgft::lift::DirectionClass::Trace {
                0.0
            } else {
                target
            };
            worst = worst.max((m - want).abs());
        }
    }
    Ok(worst)
}

fn gradient(rng: &mut ChaCha8Rng, trials: usize) -> ncgft::Result<f64> {
    let mut worst: f64 = 0.0;
    for name in CASE_NAMES {
        let b = case_basis(name)?;
        let model = HiggsModel::new(&b);
        let n = model.n_free();
        let rank = b.spec().source().rank();
        for _ in 0..trials {
            let lam: Vec<f64> = (0..rank).map(|_| rng.random_range(-1.0..2.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut g = vec![0.0; n];
            model.value_and_gradient(&lam, &x, &mut g)?;
            let h = 1e-5;
            let mut xp = x.clone();
            for k in 0..n {
                xp[k] = x[k] + h;
                let fp = model.value(&lam, &xp)?;
                xp[k] = x[k] - h;
                let fm = model.value(&lam, &xp)?;
                xp[k] = x[k];
                let fd = (fp - fm) / (2.0 * h);
                worst = worst.max((fd - g[k]).abs() / g[k].abs().max(1.0));
            }
        }
    }
    Ok(worst)
}

fn sorted_masses(b: &LiftedBasis, fields: &[Vec<CMatrix>]) -> ncgft::Result<Vec<f64>> {
    let mut ev: Vec<f64> = SymmetricEigen::new(mass_form_of_fields(b, fields)?)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Compatibility is preserved by `hat φ(u)` and the mass spectrum is invariant.
fn gauge_invariance(rng: &mut ChaCha8Rng, trials: usize) -> ncgft::Result<(f64, f64)> {
    let (mut compat, mut spec_diff) = (0.0f64, 0.0f64);
    for name in CASE_NAMES {
        let b = case_basis(name)?;
        let spec = b.spec();
        for _ in 0..trials {
            let src: Vec<Vec<CMatrix>> = b
                .source_bases()
                .iter()
                .map(|sb| {
                    (0..sb.dim())
                        .map(|_| random_anti_hermitian(sb.n(), rng))
                        .collect()
                })
                .collect();
            let comp: Vec<Vec<CMatrix>> = b
                .blocks()
                .iter()
                .map(|blk| {
                    (0..blk.complement_count())
                        .map(|_| random_anti_hermitian(blk.m(), rng))
                        .collect()
                })
                .collect();
            let fields = lift_fields(&b, &src, Some(&comp))?;
            let u: Vec<CMatrix> = spec
                .source()
                .dims()
                .iter()
                .map(|&n| random_unitary(n, rng))
                .collect();
            let hu = hat_phi(spec, &u)?;
            let src_t = gauge_transform_fields(&src, &u)?;
            let tgt_t = gauge_transform_fields(&fields, &hu)?;
            compat = compat.max(compatibility_residual(&b, &src_t, &tgt_t)?);
            let before = sorted_masses(&b, &fields)?;
            let after = sorted_masses(&b, &tgt_t)?;
            let scale = before.first().copied().unwrap_or(1.0).max(1.0);
            for (x, y) in before.iter().zip(&after) {
                spec_diff = spec_diff.max((x - y).abs() / scale);
            }
        }
    }
    Ok((compat, spec_diff))
}

/// Inherited-sector action equals `α_ji` copies of the source action.
fn action_copies(rng: &mut ChaCha8Rng, trials: usize) -> ncgft::Result<f64> {
    let mut specs: Vec<_> = CASE_NAMES
        .iter()
        .map(|c| case_spec(c))
        .collect::<ncgft::Result<_>>()?;
    specs.push(validate_embedding(
        AlgebraProfile::new(vec![2])?,
        AlgebraProfile::new(vec![5])?,
        vec![vec![2]],
    )?);
    specs.push(validate_embedding(
        AlgebraProfile::new(vec![2, 3])?,
        AlgebraProfile::new(vec![7, 3])?,
        vec![vec![2, 1], vec![0, 1]],
    )?);
    let mut worst: f64 = 0.0;
    for spec in &specs {
        let b = build_lifted_basis(spec, &default_source_bases(spec)?)?;
        for _ in 0..trials {
            let src: Vec<Vec<CMatrix>> = b
                .source_bases()
                .iter()
                .map(|sb| {
                    (0..sb.dim())
                        .map(|_| random_anti_hermitian(sb.n(), rng))
                        .collect()
                })
                .collect();
            let fields = lift_fields(&b, &src, None)?;
            let act = inherited_action_terms(&b, &src, &fields)?;
            for (j, row) in act.sector.iter().enumerate() {
                for (i, s) in row.iter().enumerate() {
                    let want = spec.multiplicity(j, i) as f64 * act.source[i];
                    worst = worst.max((s - want).abs() / act.source[i].max(1.0));
                }
            }
        }
    }
    Ok(worst)
}

fn endpoint() -> ncgft::Result<(f64, f64)> {
    let (mut v, mut dm) = (0.0f64, 0.0f64);
    for name in CASE_NAMES {
        let b = case_basis(name)?;
        let model = HiggsModel::new(&b);
        let rank = b.spec().source().rank();
        let opts = ScanOptions {
            restarts: 4,
            ..Default::default()
        };
        let warm = vec![FieldConfiguration::basis_configuration(&b, &vec![1.0; rank]).to_flat()];
        let r = minimize_at(&b, &model, &vec![1.0; rank], &warm, &opts, 0)?;
        v = v.max(r.v_min);
        let s = mass_spectrum(&mass_form(&b, &r.minimizer)?, &probe_labels(&b)?)?;
        let m = b.block(0).m() as f64;
        for (x, l) in s.masses.iter().zip(&s.labels) {
            if *l != ncgft::lift::DirectionClass::Trace {
                dm = dm.max((x - (2.0 * m).sqrt()).abs());
            }
        }
    }
    Ok((v, dm))
}

fn random_spec(
    dims: Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> ncgft::Result<ncgft::afcore::EmbeddingSpec> {
    let targets = rng.random_range(1..=3);
    let mut mult = Vec::new();
    let mut tdims = Vec::new();
    for _ in 0..targets {
        let row: Vec<usize> = dims.iter().map(|_| rng.random_range(0..=2)).collect();
        let used: usize = row.iter().zip(&dims).map(|(a, n)| a * n).sum();
        tdims.push((used + rng.random_range(0..=2)).max(1));
        mult.push(row);
    }
    validate_embedding(
        AlgebraProfile::new(dims)?,
        AlgebraProfile::new(tdims)?,
        mult,
    )
}

/// `K₀(g∘f) = K₀(g)∘K₀(f)` on random three-step chains.
fn k0_chains(rng: &mut ChaCha8Rng, trials: usize) -> ncgft::Result<bool> {
    for _ in 0..trials {
        let r = rng.random_range(1..=3);
        let dims: Vec<usize> = (0..r).map(|_| rng.random_range(1..=3)).collect();
        let f = random_spec(dims, rng)?;
        let g = random_spec(f.target().dims().to_vec(), rng)?;
        let h = random_spec(g.target().dims().to_vec(), rng)?;
        let v = DimensionVector((0..r).map(|_| rng.random_range(0..=4)).collect());
        let stepwise = k0_pushforward(&h, &k0_pushforward(&g, &k0_pushforward(&f, &v)?)?)?;
        let composed = k0_pushforward(&compose_embeddings(&compose_embeddings(&f, &g)?, &h)?, &v)?;
        if stepwise != composed {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs every check with randomness drawn from `seed`.
pub fn run_checks(seed: u64) -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![match jacobi() {
        Ok(v) => outcome("jacobi sl2..sl5", v, 1e-10),
        Err(e) => failed("jacobi sl2..sl5", e),
    }];
    out.push(match differential(&mut rng, 100) {
        Ok(v) => outcome("d^2 = 0 and Leibniz", v, 1e-11),
        Err(e) => failed("d^2 = 0 and Leibniz", e),
    });
    out.push(match counts() {
        Ok(ok) => Outcome {
            name: "dof and class counts".into(),
            passed: ok,
            detail: String::new(),
        },
        Err(e) => failed("dof and class counts", e),
    });
    out.push(match mass_lemma() {
        Ok(v) => outcome("mass lemma n=2..5", v, 1e-8),
        Err(e) => failed("mass lemma n=2..5", e),
    });
    out.push(match gradient(&mut rng, 5) {
        Ok(v) => outcome("analytic gradient", v, 1e-5),
        Err(e) => failed("analytic gradient", e),
    });
    match gauge_invariance(&mut rng, 5) {
        Ok((c, s)) => {
            out.push(outcome("compatibility under gauge", c, 1e-10));
            out.push(outcome("mass spectrum under gauge", s, 1e-9));
        }
        Err(e) => out.push(failed("gauge invariance", e)),
    }
    out.push(match action_copies(&mut rng, 5) {
        Ok(v) => outcome("inherited action copies", v, 1e-10),
        Err(e) => failed("inherited action copies", e),
    });
    match endpoint() {
        Ok((v, m)) => {
            out.push(outcome("V_min at lambda=1", v, 1e-8));
            out.push(outcome("masses at lambda=1", m, 1e-6));
        }
        Err(e) => out.push(failed("lambda=1 endpoint", e)),
    }
    out.push(match k0_chains(&mut rng, 100) {
        Ok(ok) => Outcome {
            name: "K0 functoriality".into(),
            passed: ok,
            detail: String::new(),
        },
        Err(e) => failed("K0 functoriality", e),
    });
    out
}
