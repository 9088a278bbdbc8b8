use proptest::prelude::*;

use levytree::exploration::{discrete_masses, exploration_at_brownian, exploration_at_discrete, height_brownian, height_discrete, prune};
use levytree::exponents::{eval_psi, eval_psi_prime, invert_psi, Atom};
use levytree::pathsim::{excursions_above_infimum, running_infimum, sample_brownian_levy, sample_stable_levy};
use levytree::rtree::{detach_right_subtrees, embedded_tree, reattach, spine, subordinate_distance_idx, tree_distance_idx};
use levytree::snake::{exit_local_time, grow_snake, DomainSpec, SpatialMotion};
use levytree::{ExplorationMeasure, LatticePath, LevyMeasure, LevyTriplet, WalkSkeleton};

fn triplet() -> impl Strategy<Value = LevyTriplet> {
    let measure = prop_oneof![
        Just(LevyMeasure::None),
        (1.05f64..1.95, 0.1f64..3.0).prop_map(|(index, scale)| LevyMeasure::Stable { index, scale }),
        prop::collection::vec((0.05f64..3.0, 0.05f64..2.0), 1..4)
            .prop_map(|v| LevyMeasure::Atomic { atoms: v.into_iter().map(|(x, w)| Atom { x, w }).collect() }),
    ];
    (0.0f64..2.0, 0.1f64..2.0, measure).prop_map(|(a, b, m)| LevyTriplet::new(a, b, m).unwrap())
}

fn integer_excursion() -> impl Strategy<Value = LatticePath> {
    prop::collection::vec(prop::bool::ANY, 1..40).prop_map(|ups| {
        let mut v = vec![0.0];
        let mut h = 0.0f64;
        for up in ups {
            h = if up || h == 0.0 { h + 1.0 } else { h - 1.0 };
            v.push(h);
        }
        while h > 0.0 {
            h -= 1.0;
            v.push(h);
        }
        LatticePath::new(1.0, v).unwrap()
    })
}

fn lukasiewicz() -> impl Strategy<Value = WalkSkeleton> {
    prop::collection::vec(0i64..4, 1..60).prop_map(|kids| WalkSkeleton::from_steps(kids.into_iter().map(|k| k - 1).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_monotone_and_convex(t in triplet(), mut grid in prop::collection::vec(0.0f64..50.0, 3..12)) {
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let v: Vec<f64> = grid.iter().map(|&l| eval_psi(&t, l).unwrap()).collect();
        for w in v.windows(2) {
            prop_assert!(w[0] <= w[1] * (1.0 + 1e-12) + 1e-12);
        }
        for i in 0..grid.len().saturating_sub(2) {
            let s1 = (v[i + 1] - v[i]) / (grid[i + 1] - grid[i]);
            let s2 = (v[i + 2] - v[i]) / (grid[i + 2] - grid[i]);
            prop_assert!(s1 <= s2 * (1.0 + 1e-9) + 1e-9);
        }
    }

    #[test]
    fn invert_after_eval_is_identity(t in triplet(), lambda in 0.0f64..100.0) {
        let tol = 1e-9;
        let y = eval_psi(&t, lambda).unwrap();
        let back = invert_psi(&t, y, tol).unwrap();
        prop_assert!((back - lambda).abs() <= 2.0 * tol * lambda.max(1.0));
    }

    #[test]
    fn psi_prime_matches_central_differences(t in triplet(), lambda in 0.5f64..20.0) {
        let h = 1e-4;
        let fd = (eval_psi(&t, lambda + h).unwrap() - eval_psi(&t, lambda - h).unwrap()) / (2.0 * h);
        let d = eval_psi_prime(&t, lambda).unwrap();
        prop_assert!((fd - d).abs() <= 1e-5 * d.abs().max(1.0));
    }

    #[test]
    fn infimum_and_excursion_slices(seed in 0u64..10_000, stable in prop::bool::ANY) {
        let x = if stable {
            sample_stable_levy(1.5, 1.0, 1.0, 1e-3, seed).unwrap()
        } else {
            sample_brownian_levy(1.0, 1.0, 1e-3, seed).unwrap()
        };
        let inf = running_infimum(&x);
        for (a, i) in x.values.iter().zip(&inf.values) {
            prop_assert!(a - i >= 0.0);
        }
        for w in inf.values.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        let slices = excursions_above_infimum(&x);
        let mut covered = vec![false; x.len()];
        for s in &slices {
            for c in covered.iter_mut().take(s.end_index).skip(s.start_index + 1) {
                *c = true;
            }
        }
        for k in 0..x.len() {
            prop_assert_eq!(covered[k], x.values[k] - inf.values[k] > 0.0);
        }
        for w in slices.windows(2) {
            prop_assert!(w[0].local_time_mark <= w[1].local_time_mark);
        }
    }

    #[test]
    fn brownian_exploration_mass_and_top(seed in 0u64..10_000, k in 0usize..1000) {
        let x = sample_brownian_levy(1.0, 1.0, 1e-3, seed).unwrap();
        let h = height_brownian(&x, 1.0).unwrap();
        let inf = running_infimum(&x);
        let rho = exploration_at_brownian(&h, 1.0, k).unwrap();
        prop_assert!((rho.total_mass() - (x.values[k] - inf.values[k])).abs() <= 1e-12);
        prop_assert_eq!(rho.top(), h.base.values[k]);
    }

    #[test]
    fn discrete_exploration_mass(w in lukasiewicz()) {
        let h = height_discrete(&w);
        let s = &w.partial_sums;
        for k in 0..w.steps.len() {
            let rho = exploration_at_discrete(&w, &h, k).unwrap();
            let (r, _) = discrete_masses(&w, k);
            prop_assert_eq!(rho.total_mass(), r);
            let inf = s[..=k].iter().copied().min().unwrap();
            prop_assert_eq!(r, (s[k] - inf) as f64);
        }
    }

    #[test]
    fn prune_mass(atoms in prop::collection::vec((0.0f64..5.0, 0.0f64..2.0), 0..5), dens in 0.0f64..2.0, top in 0.0f64..5.0, a in 0.0f64..10.0) {
        let mut atoms = atoms;
        atoms.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let m = ExplorationMeasure { atoms, continuous_density: dens, density_top: top };
        let p = prune(&m, a).unwrap();
        prop_assert!((p.total_mass() - (m.total_mass() - a).max(0.0)).abs() <= 1e-9);
    }

    #[test]
    fn coded_distance_is_a_tree_metric(e in integer_excursion(), picks in prop::collection::vec(0usize..1000, 4)) {
        let n = e.len();
        let p: Vec<usize> = picks.iter().map(|i| i % n).collect();
        let d = |i: usize, j: usize| tree_distance_idx(&e, i, j);
        let (x, y, z, w) = (p[0], p[1], p[2], p[3]);
        prop_assert_eq!(d(x, y), d(y, x));
        prop_assert!(d(x, z) <= d(x, y) + d(y, z));
        let mut sums = [d(x, y) + d(z, w), d(x, z) + d(y, w), d(x, w) + d(y, z)];
        sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(sums[1], sums[2]);
    }

    #[test]
    fn subordinate_distance_is_a_pseudometric(incs in prop::collection::vec(0u8..3, 2..40), picks in prop::collection::vec(0usize..1000, 3)) {
        let mut g = vec![0.0];
        for i in incs {
            g.push(g.last().unwrap() + i as f64);
        }
        let g = LatticePath::new(1.0, g).unwrap();
        let n = g.len();
        let (x, y, z) = (picks[0] % n, picks[1] % n, picks[2] % n);
        let d = |i: usize, j: usize| subordinate_distance_idx(&g, i, j);
        prop_assert_eq!(d(x, x), 0.0);
        prop_assert!(d(x, y) >= 0.0);
        prop_assert_eq!(d(x, y), d(y, x));
        prop_assert!(d(x, z) <= d(x, y) + d(y, z));
    }

    #[test]
    fn embedded_tree_labels_and_mrca(e in integer_excursion(), raw in prop::collection::btree_set(0usize..1000, 1..7)) {
        let n = e.len();
        let mut idx: Vec<usize> = raw.into_iter().map(|i| i % n).collect();
        idx.sort();
        idx.dedup();
        let marks: Vec<f64> = idx.iter().map(|&i| i as f64).collect();
        let t = embedded_tree(&e, &marks).unwrap();
        let leaves: Vec<f64> = idx.iter().map(|&i| e.values[i]).collect();
        prop_assert_eq!(t.leaf_labels(), leaves);
        for i in 0..idx.len() {
            for j in i + 1..idx.len() {
                let m = e.values[idx[i]..=idx[j]].iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert_eq!(t.mrca_label(i, j), Some(m));
            }
        }
        let sp = spine(&t);
        let back = reattach(&sp.entries, &detach_right_subtrees(&t)).unwrap();
        prop_assert_eq!(back, t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn snake_structure(seed in 0u64..10_000, r in 0.01f64..0.2) {
        let x = sample_brownian_levy(1.0, 0.2, 1e-4, seed).unwrap();
        let h = height_brownian(&x, 1.0).unwrap();
        let dh = 0.01f64.powi(2);
        let m = SpatialMotion::bridge_exact(dh).unwrap();
        let st = grow_snake(&h, m, seed).unwrap();
        let hv = &h.base.values;
        let n = st.len();
        prop_assert_eq!(n, hv.len());
        for s in (0..n).step_by(97) {
            let ps = st.path_at(s);
            prop_assert_eq!(ps.xi.len() - 1, m.depth_of(hv[s]));
            for w in ps.loc.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            let u = (s + 1 + (seed as usize % 300)).min(n - 1);
            let mh = hv[s..=u].iter().cloned().fold(f64::INFINITY, f64::min);
            let pu = st.path_at(u);
            let d = m.depth_of(mh);
            prop_assert_eq!(&ps.xi[..=d], &pu.xi[..=d]);
            prop_assert_eq!(&ps.loc[..=d], &pu.loc[..=d]);
        }
        let dom = DomainSpec::PuncturedLevel { r };
        let l = exit_local_time(&st, &dom, 10.0 * dh).unwrap();
        let tau = st.exit_heights(&dom);
        for k in 1..n {
            if st.tip_values(k).1 < r {
                prop_assert!(tau[k].is_infinite());
                prop_assert_eq!(l.values[k], l.values[k - 1]);
            }
        }
    }
}
