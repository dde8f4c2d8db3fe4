//! Cross-module invariants as property tests over random seeds.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tropsheaf::base::{cube, is_trivial_gluing, random_closed_gluing, random_potential, square, validate_closed_gluing, ClosedGluing, OpenGluing};
use tropsheaf::cover::MultiSection;
use tropsheaf::extract::{check_covering_morphism_to_source, roundtrip_check};
use tropsheaf::fixtures::{boundary_section, fan_section, plain_brane};
use tropsheaf::glue::{apply_gauge, assemble_sheaf, find_gauge};
use tropsheaf::lattice::{det, mat_mul, smith_decompose};
use tropsheaf::mult::{q, qf, Q};
use tropsheaf::obstruction::{cech_differential, obstruction_cochain, solve_coboundary};

fn cube_boundary() -> MultiSection {
    boundary_section(&cube(), &[""], &[vec![1; 8]]).unwrap()
}

fn cube_fan() -> MultiSection {
    fan_section(&cube(), &[""], &[vec![1; 8]]).unwrap().ms
}

fn square_two_sheets() -> MultiSection {
    boundary_section(&square(), &["a", "b"], &[vec![1, 1, 1, 1], vec![3, 1, 3, 1]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smith_form_is_a_unimodular_diagonalization(m in proptest::collection::vec(proptest::collection::vec(-6i64..7, 3), 3)) {
        let (u, d, v) = smith_decompose(&m);
        prop_assert_eq!(mat_mul(&mat_mul(&u, &m), &v), d.clone());
        prop_assert_eq!(det(&u).abs(), 1);
        prop_assert_eq!(det(&v).abs(), 1);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    prop_assert_eq!(d[i][j], 0);
                }
            }
        }
        for i in 0..2 {
            let (a, b) = (d[i][i], d[i + 1][i + 1]);
            let divides = if a == 0 { b == 0 } else { b % a == 0 };
            prop_assert!(divides);
        }
    }

    #[test]
    fn random_closed_gluings_are_cocycles(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for ms in [cube_boundary(), cube_fan()] {
            let s = random_closed_gluing(&ms.base, &mut rng, 2);
            prop_assert!(validate_closed_gluing(&ms.base, &s).unwrap().is_empty());
        }
    }

    #[test]
    fn gluings_of_potentials_are_trivial_and_glue(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ms = cube_boundary();
        let t = random_potential(&ms.base, &mut rng);
        let s = ClosedGluing::from_potential(&ms.base, &t);
        let open = OpenGluing { values: s.values.clone() };
        prop_assert!(is_trivial_gluing(&ms.base, &open).is_some());
        let c = obstruction_cochain(&ms, &s).unwrap();
        prop_assert!(solve_coboundary(&ms, &c).unwrap().is_some());
    }

    #[test]
    fn obstruction_is_closed_and_solver_matches_assembly(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ms = cube_boundary();
        let s = random_closed_gluing(&ms.base, &mut rng, 2);
        let c = obstruction_cochain(&ms, &s).unwrap();
        prop_assert!(cech_differential(&ms, &c).is_one());
        let k = solve_coboundary(&ms, &c).unwrap();
        if let Some(k) = &k {
            let dk = cech_differential(&ms, k);
            prop_assert!(c.values.keys().chain(dk.values.keys()).all(|f| dk.get(f) == c.get(f)));
        }
        let d = plain_brane(&ms, s).unwrap();
        prop_assert_eq!(k.is_some(), assemble_sheaf(&ms, &d).is_ok());
    }

    #[test]
    fn every_gluing_on_a_fan_base_glues(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ms = cube_fan();
        let s = random_closed_gluing(&ms.base, &mut rng, 2);
        let c = obstruction_cochain(&ms, &s).unwrap();
        prop_assert!(solve_coboundary(&ms, &c).unwrap().is_some());
    }

    #[test]
    fn gauge_rescaling_is_detected(seed in any::<u64>(), scales in proptest::collection::vec((1i64..9, 1i64..9, any::<bool>()), 2)) {
        let ms = square_two_sheets();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_closed_gluing(&ms.base, &mut rng, 1);
        let sd = assemble_sheaf(&ms, &plain_brane(&ms, s).unwrap()).unwrap();
        let names: Vec<String> = sd.frames.values().flatten().cloned().collect();
        let lambda: BTreeMap<String, Q> = names.iter().enumerate().map(|(i, n)| {
            let (a, b, neg) = scales[i % scales.len()];
            (n.clone(), if neg { -qf(a, b) } else { qf(a, b) } * q(i as i64 + 1))
        }).collect();
        let moved = apply_gauge(&sd, &lambda);
        let found = find_gauge(&sd, &moved);
        prop_assert!(found.is_some());
        prop_assert_eq!(apply_gauge(&sd, &found.unwrap()).transitions, moved.transitions);
    }

    #[test]
    fn roundtrip_is_gauge_equivalent_with_a_fold(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ms = cube_fan();
        let s = random_closed_gluing(&ms.base, &mut rng, 2);
        let d = plain_brane(&ms, s).unwrap();
        prop_assert!(roundtrip_check(&ms, &d).unwrap().gauge_equivalent);
        prop_assert!(check_covering_morphism_to_source(&ms, &d).unwrap().is_empty());
    }
}
