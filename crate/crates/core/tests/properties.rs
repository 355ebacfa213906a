//! Randomized invariants across the core modules.

use std::collections::BTreeMap;

use affistack::evaluate::{
    mann_whitney_u, pearson, precision_at_actives, spearman, synergy_partition, topk_recall, ScoreOrientation,
    ScoredLigand, SynergyGroup, UMethod,
};
use affistack::ingest::{molecular_weight, parse_sdf, write_sdf, Atom, Molecule};
use affistack::learners::{fit_elasticnet_cv, fit_lasso_cd, fit_ols, CdSettings, Protocol};
use affistack::pca::{fit_pca, project, PcaSource};
use affistack::pose_rmsd::symmetric_rmsd;
use nalgebra::DMatrix;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

type LinearFit = fn(&DMatrix<f64>, &[f64]) -> affistack::Result<affistack::learners::LinearModel>;

const ELEMENTS: [&str; 5] = ["C", "N", "O", "S", "H"];

fn atom() -> impl Strategy<Value = Atom> {
    (0..ELEMENTS.len(), prop::array::uniform3(-8.0f64..8.0))
        .prop_map(|(e, pos)| Atom::new(ELEMENTS[e], pos).unwrap())
}

/// Molecule whose heavy atoms cover every heavy element in `ELEMENTS`.
fn molecule() -> impl Strategy<Value = Molecule> {
    (prop::collection::vec(atom(), 0..20), prop::array::uniform4(prop::array::uniform3(-8.0f64..8.0))).prop_map(
        |(mut atoms, anchors)| {
            for (el, pos) in ["C", "N", "O", "S"].iter().zip(anchors) {
                atoms.push(Atom::new(el, pos).unwrap());
            }
            Molecule::new("m", atoms).unwrap()
        },
    )
}

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = DMatrix<f64>> {
    (rows, cols).prop_flat_map(|(n, p)| {
        prop::collection::vec(-10.0f64..10.0, n * p).prop_map(move |v| DMatrix::from_vec(n, p, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rmsd_is_symmetric_and_translation_invariant(a in molecule(), b in molecule(), shift in prop::array::uniform3(-20.0f64..20.0)) {
        let ab = symmetric_rmsd(&a, &b).unwrap();
        prop_assert_eq!(ab, symmetric_rmsd(&b, &a).unwrap());
        prop_assert_eq!(symmetric_rmsd(&a, &a).unwrap(), 0.0);
        let moved = symmetric_rmsd(&a.translated(shift), &b.translated(shift)).unwrap();
        prop_assert!((moved - ab).abs() < 1e-9);
    }

    #[test]
    fn sdf_round_trip_keeps_heavy_atoms(m in molecule()) {
        let back = parse_sdf(&write_sdf(std::slice::from_ref(&m))).unwrap();
        prop_assert_eq!(back.len(), 1);
        let heavy = |x: &Molecule| x.heavy_atoms().map(|a| (a.element.clone(), a.position)).collect::<Vec<_>>();
        let (orig, read) = (heavy(&m), heavy(&back[0]));
        prop_assert_eq!(orig.len(), read.len());
        for ((e1, p1), (e2, p2)) in orig.iter().zip(&read) {
            prop_assert_eq!(e1, e2);
            for k in 0..3 {
                // Coordinates are written with four decimals.
                prop_assert!((p1[k] - p2[k]).abs() <= 5e-5 + 1e-12);
            }
        }
    }

    #[test]
    fn molecular_weight_is_permutation_invariant_and_additive(m in molecule(), extra in molecule(), seed in any::<u64>()) {
        let mut atoms = m.atoms().to_vec();
        let n = atoms.len();
        for i in (1..n).rev() {
            atoms.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
        }
        let shuffled = Molecule::new("s", atoms.clone()).unwrap();
        let w = molecular_weight(&m).unwrap();
        prop_assert!((molecular_weight(&shuffled).unwrap() - w).abs() < 1e-9);
        let mut joined = atoms;
        joined.extend(extra.atoms().iter().cloned());
        let sum = molecular_weight(&Molecule::new("j", joined).unwrap()).unwrap();
        prop_assert!((sum - w - molecular_weight(&extra).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn pca_is_row_permutation_invariant(x in matrix(4..30, 1..8), seed in any::<u64>()) {
        let ids: Vec<String> = (0..x.ncols()).map(|j| format!("c{j}")).collect();
        let a = fit_pca(&x, ids.clone(), PcaSource::DAP).unwrap();
        let n = x.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, (seed.wrapping_mul(i as u64 + 3) % (i as u64 + 1)) as usize);
        }
        let permuted = DMatrix::from_fn(n, x.ncols(), |i, j| x[(order[i], j)]);
        let b = fit_pca(&permuted, ids, PcaSource::DAP).unwrap();
        let var_a = a.explained_variance();
        let var_b = b.explained_variance();
        let scale = var_a.first().copied().unwrap_or(0.0).max(1e-12);
        for (k, (va, vb)) in var_a.iter().zip(&var_b).enumerate() {
            prop_assert!((va - vb).abs() <= 1e-9 * scale);
            // Components are only defined up to sign when variances are
            // distinct; compare when the spectrum gap is clear.
            let distinct = var_a.iter().enumerate().all(|(m, v)| m == k || (v - va).abs() > 1e-6 * scale);
            if distinct && *va > 1e-9 * scale {
                for (ca, cb) in a.components[k].iter().zip(&b.components[k]) {
                    prop_assert!((ca - cb).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn pca_variance_and_prefix_projection(x in matrix(3..25, 1..7)) {
        let ids: Vec<String> = (0..x.ncols()).map(|j| format!("c{j}")).collect();
        let basis = fit_pca(&x, ids, PcaSource::D3P).unwrap();
        let n = x.nrows() as f64;
        let total: f64 = x.column_iter().map(|c| { let m = c.mean(); c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) }).sum();
        let explained: f64 = basis.explained_variance().iter().sum();
        prop_assert!((explained - total).abs() <= 1e-8 * total.max(1.0));
        let kmax = basis.n_components();
        for k in 1..kmax {
            let small = project(&basis, &x, k).unwrap();
            let big = project(&basis, &x, k + 1).unwrap();
            prop_assert_eq!(small, big.columns(0, k).into_owned());
        }
    }

    #[test]
    fn linear_predictions_ignore_affine_feature_rescaling(
        x in matrix(12..40, 1..5),
        coef in prop::collection::vec(-3.0f64..3.0, 5),
        scale in 0.01f64..100.0,
        shift in -50.0f64..50.0,
        col in 0usize..5,
    ) {
        let p = x.ncols();
        let col = col % p;
        let y: Vec<f64> = (0..x.nrows()).map(|i| (0..p).map(|j| x[(i, j)] * coef[j]).sum::<f64>() + (i as f64 * 0.37).sin()).collect();
        let mut moved = x.clone();
        moved.column_mut(col).iter_mut().for_each(|v| *v = *v * scale + shift);
        let fits: [(&str, LinearFit); 2] = [
            ("ols", fit_ols),
            ("lasso", |x, y| fit_lasso_cd(x, y, 0.05, CdSettings::default())),
        ];
        for (name, fit) in fits {
            let a = fit(&x, &y).unwrap().predict(&x).unwrap();
            let b = fit(&moved, &y).unwrap().predict(&moved).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-8 * (1.0 + u.abs()), "{}: {} vs {}", name, u, v);
            }
        }
    }

    #[test]
    fn orthonormal_lasso_support_nests(
        raw in matrix(30..60, 2..6),
        y in prop::collection::vec(-5.0f64..5.0, 60),
        a1 in 0.01f64..1.0,
        a2 in 0.01f64..1.0,
    ) {
        let n = raw.nrows();
        let mut centered = raw.clone();
        for mut c in centered.column_iter_mut() {
            let m = c.mean();
            c.add_scalar_mut(-m);
        }
        let q = centered.qr().q() * (n as f64).sqrt();
        let y = &y[..n];
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let support = |alpha: f64| {
            fit_lasso_cd(&q, y, alpha, CdSettings::default()).unwrap().coefficients.iter().map(|b| *b != 0.0).collect::<Vec<_>>()
        };
        let (s_lo, s_hi) = (support(lo), support(hi));
        for (l, h) in s_lo.iter().zip(&s_hi) {
            prop_assert!(!h || *l);
        }
    }

    #[test]
    fn correlations_respect_transforms(
        v in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
        a in 0.1f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let x: Vec<f64> = v.iter().map(|p| p.0).collect();
        let y: Vec<f64> = v.iter().map(|p| p.1).collect();
        if let Ok(r) = pearson(&x, &y) {
            let ax: Vec<f64> = x.iter().map(|t| a * t + b).collect();
            prop_assert!((pearson(&ax, &y).unwrap() - r).abs() < 1e-9);
        }
        if let Ok(rho) = spearman(&x, &y) {
            let cubed: Vec<f64> = x.iter().map(|t| t.powi(3) + t).collect();
            prop_assert!((spearman(&cubed, &y).unwrap() - rho).abs() < 1e-12);
        }
    }

    #[test]
    fn screening_metrics_ignore_monotone_transforms(
        scores in prop::collection::vec(-50.0f64..50.0, 1..40),
        active in prop::collection::vec(any::<bool>(), 40),
        k in 1usize..10,
    ) {
        let ligands: Vec<ScoredLigand> = scores.iter().enumerate().map(|(i, s)| ScoredLigand { id: format!("L{i:02}"), score: *s, active: active[i] }).collect();
        let warped: Vec<ScoredLigand> = ligands.iter().map(|l| ScoredLigand { score: 3.0 * l.score + 0.01 * l.score.powi(3) - 1.0, ..l.clone() }).collect();
        let k = k.min(ligands.len());
        for o in [ScoreOrientation::Ascending, ScoreOrientation::Descending] {
            prop_assert_eq!(topk_recall(&ligands, k, o).ok(), topk_recall(&warped, k, o).ok());
            prop_assert_eq!(precision_at_actives(&ligands, o).ok(), precision_at_actives(&warped, o).ok());
        }
    }

    #[test]
    fn mann_whitney_normal_tracks_exact(
        a in prop::collection::hash_set(0u32..10_000, 5..=12),
        b in prop::collection::hash_set(10_000u32..20_000, 5..=12),
        interleave in any::<u64>(),
    ) {
        // Tie-free samples with controllable overlap.
        let a: Vec<f64> = a.into_iter().map(|v| v as f64).collect();
        let shift = (interleave % 10_000) as f64;
        let b: Vec<f64> = b.into_iter().map(|v| v as f64 - shift + 0.5).collect();
        let exact = mann_whitney_u(&a, &b).unwrap();
        prop_assert_eq!(exact.method, UMethod::Exact);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let mean = na * nb / 2.0;
        let sd = (na * nb * (na + nb + 1.0) / 12.0).sqrt();
        let z = ((exact.u - mean).abs() - 0.5).max(0.0) / sd;
        let approx = (2.0 * Normal::standard().cdf(-z)).min(1.0);
        prop_assert!((approx - exact.p).abs() <= 0.02, "exact {} normal {}", exact.p, approx);
    }

    #[test]
    fn synergy_counts_ignore_iteration_order(errors in prop::collection::vec(prop::array::uniform3(0.0f64..5.0), 1..30)) {
        let build = |rev: bool| {
            let mut map = BTreeMap::new();
            let idx: Vec<usize> = if rev { (0..errors.len()).rev().collect() } else { (0..errors.len()).collect() };
            for i in idx {
                let e = errors[i];
                // Keys sort differently from insertion order when reversed.
                let key = if rev { format!("z{:03}", errors.len() - i) } else { format!("a{i:03}") };
                map.insert(key, BTreeMap::from([(SynergyGroup::Meta, e[0]), (SynergyGroup::Dl, e[1]), (SynergyGroup::Dock, e[2])]));
            }
            synergy_partition(&map).unwrap().counts
        };
        prop_assert_eq!(build(false), build(true));
    }
}

#[test]
fn elasticnet_cv_is_deterministic_and_affine_invariant() {
    let n = 60;
    let x = DMatrix::from_fn(n, 3, |i, j| ((i * (j + 2)) as f64 * 0.713).sin() * (j + 1) as f64);
    let y: Vec<f64> = (0..n).map(|i| 2.0 * x[(i, 0)] - x[(i, 2)] + (i as f64 * 1.1).cos() * 0.2).collect();
    let protocol = Protocol {
        enet_repeats_per_ratio: 2,
        ..Protocol::default()
    };
    let a = fit_elasticnet_cv(&x, &y, &protocol, 5).unwrap();
    let b = fit_elasticnet_cv(&x, &y, &protocol, 5).unwrap();
    assert_eq!(a, b);
    let mut moved = x.clone();
    moved.column_mut(1).iter_mut().for_each(|v| *v = *v * 40.0 - 3.0);
    let c = fit_elasticnet_cv(&moved, &y, &protocol, 5).unwrap();
    for (u, v) in a.predict(&x).unwrap().iter().zip(c.predict(&moved).unwrap()) {
        assert!((u - v).abs() < 1e-8, "{u} vs {v}");
    }
}
