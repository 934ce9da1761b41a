use std::sync::Arc;

use ncgft::afcore::{
    compose_embeddings, k0_pushforward, phi_apply, validate_embedding, AlgebraProfile,
    DimensionVector, EmbeddingSpec,
};
use ncgft::forms::{koszul_d, wedge, Form, Frame};
use ncgft::gauge::{
    gauge_transform_fields, lift_fields, mass_form_of_fields, mass_spectrum, potential_of_fields,
    probe_labels,
};
use ncgft::lift::{build_lifted_basis, default_source_bases, LiftedBasis};
use ncgft::matalg::{
    gellmann_basis, max_abs, random_anti_hermitian, random_matrix, random_unitary, CMatrix,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec_strategy() -> impl Strategy<Value = EmbeddingSpec> {
    (prop::collection::vec(2usize..=3, 1..=2), 0usize..=2)
        .prop_flat_map(|(dims, pad)| {
            let r = dims.len();
            (Just(dims), Just(pad), prop::collection::vec(0usize..=2, r))
        })
        .prop_filter_map("empty embedding", |(dims, pad, row)| {
            let used: usize = row.iter().zip(&dims).map(|(a, n)| a * n).sum();
            let m = used + pad;
            (m >= 2 && used > 0).then(|| {
                validate_embedding(
                    AlgebraProfile::new(dims).unwrap(),
                    AlgebraProfile::new(vec![m]).unwrap(),
                    vec![row],
                )
                .unwrap()
            })
        })
}

fn lifted(spec: &EmbeddingSpec) -> LiftedBasis {
    build_lifted_basis(spec, &default_source_bases(spec).unwrap()).unwrap()
}

fn random_target_fields(b: &LiftedBasis, rng: &mut ChaCha8Rng) -> Vec<Vec<CMatrix>> {
    let src: Vec<Vec<CMatrix>> = b
        .source_bases()
        .iter()
        .map(|s| {
            (0..s.dim())
                .map(|_| random_anti_hermitian(s.n(), rng))
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
    lift_fields(b, &src, Some(&comp)).unwrap()
}

fn random_form(frames: &[Arc<Frame>], degree: usize, rng: &mut ChaCha8Rng) -> Form {
    let mut f = Form::zero(frames);
    for (i, fr) in frames.iter().enumerate() {
        let d = fr.dim();
        for mask in 0u64..(1 << d) {
            if mask.count_ones() as usize == degree && rng.random_bool(0.5) {
                let idx: Vec<usize> = (0..d).filter(|k| mask >> k & 1 == 1).collect();
                f.set_component(i, &idx, random_matrix(fr.matrix_dim(), rng))
                    .unwrap();
            }
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lifted_basis_is_orthonormal_and_complete(spec in spec_strategy()) {
        let b = lifted(&spec);
        let blk = b.block(0);
        prop_assert_eq!(blk.basis().dim(), blk.m() * blk.m() - 1);
        prop_assert!(blk.basis().is_orthonormal(1e-10));
        prop_assert_eq!(blk.inherited_count() + blk.complement_count(), blk.m() * blk.m() - 1);
    }

    #[test]
    fn embedding_is_multiplicative(spec in spec_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<CMatrix> = spec.source().dims().iter().map(|&n| random_matrix(n, &mut rng)).collect();
        let c: Vec<CMatrix> = spec.source().dims().iter().map(|&n| random_matrix(n, &mut rng)).collect();
        let ac: Vec<CMatrix> = a.iter().zip(&c).map(|(x, y)| x * y).collect();
        let lhs = phi_apply(&spec, &ac).unwrap();
        let (pa, pc) = (phi_apply(&spec, &a).unwrap(), phi_apply(&spec, &c).unwrap());
        for (l, (x, y)) in lhs.iter().zip(pa.iter().zip(&pc)) {
            prop_assert!(max_abs(&(l - x * y)) < 1e-12);
        }
    }

    #[test]
    fn potential_and_spectrum_are_unitarily_invariant(spec in spec_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = lifted(&spec);
        let fields = random_target_fields(&b, &mut rng);
        let u = vec![random_unitary(b.block(0).m(), &mut rng)];
        let moved = gauge_transform_fields(&fields, &u).unwrap();
        let (v0, v1) = (potential_of_fields(&b, &fields).unwrap(), potential_of_fields(&b, &moved).unwrap());
        prop_assert!((v0 - v1).abs() <= 1e-10 * v0.max(1.0));
        let labels = probe_labels(&b).unwrap();
        let s0 = mass_spectrum(&mass_form_of_fields(&b, &fields).unwrap(), &labels).unwrap();
        let s1 = mass_spectrum(&mass_form_of_fields(&b, &moved).unwrap(), &labels).unwrap();
        let top = s0.masses[0].max(1.0);
        for (x, y) in s0.masses.iter().zip(&s1.masses) {
            prop_assert!((x - y).abs() <= 1e-8 * top);
        }
    }

    #[test]
    fn potential_is_nonnegative(spec in spec_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = lifted(&spec);
        prop_assert!(potential_of_fields(&b, &random_target_fields(&b, &mut rng)).unwrap() >= 0.0);
    }

    #[test]
    fn differential_squares_to_zero(seed in any::<u64>(), p in 0usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = vec![Arc::new(Frame::from_basis(&gellmann_basis(3).unwrap()))];
        let f = random_form(&frames, p, &mut rng);
        prop_assert!(koszul_d(&koszul_d(&f).unwrap()).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn wedge_is_associative(seed in any::<u64>(), p in 0usize..=2, q in 0usize..=2, r in 0usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = vec![Arc::new(Frame::from_basis(&gellmann_basis(2).unwrap()))];
        let (a, b, c) = (random_form(&frames, p, &mut rng), random_form(&frames, q, &mut rng), random_form(&frames, r, &mut rng));
        let left = wedge(&wedge(&a, &b).unwrap(), &c).unwrap();
        let right = wedge(&a, &wedge(&b, &c).unwrap()).unwrap();
        prop_assert!(left.distance(&right).unwrap() < 1e-11);
    }

    #[test]
    fn scalar_forms_commute_with_the_unit(seed in any::<u64>(), p in 0usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = vec![Arc::new(Frame::from_basis(&gellmann_basis(2).unwrap()))];
        let a = random_form(&frames, p, &mut rng);
        let one = Form::scalar(&frames, vec![CMatrix::identity(2, 2)]).unwrap();
        prop_assert!(wedge(&one, &a).unwrap().distance(&a).unwrap() < 1e-14);
        prop_assert!(wedge(&a, &one).unwrap().distance(&a.scale(Complex64::new(1.0, 0.0))).unwrap() < 1e-14);
    }

    #[test]
    fn k0_is_additive_and_functorial(a in spec_strategy(), v in prop::collection::vec(0usize..5, 2), w in prop::collection::vec(0usize..5, 2)) {
        let r = a.source().rank();
        let (v, w) = (DimensionVector(v[..r].to_vec()), DimensionVector(w[..r].to_vec()));
        let sum = DimensionVector(v.0.iter().zip(&w.0).map(|(x, y)| x + y).collect());
        let lhs = k0_pushforward(&a, &sum).unwrap();
        let (pv, pw) = (k0_pushforward(&a, &v).unwrap(), k0_pushforward(&a, &w).unwrap());
        prop_assert_eq!(lhs.0, pv.0.iter().zip(&pw.0).map(|(x, y)| x + y).collect::<Vec<_>>());
        let id = EmbeddingSpec::identity(a.target().clone());
        let composed = compose_embeddings(&a, &id).unwrap();
        prop_assert_eq!(k0_pushforward(&composed, &v).unwrap(), pv);
    }
}
