use homprog_core::{CellularSheaf, Cochain0, Cochain1, Graph, LaplacianContext, PotentialAssignment};
use homprog_testkit as tk;
use nalgebra::DVector;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn random_x(rng: &mut tk::TestRng, sheaf: &CellularSheaf<f64>) -> Cochain0<f64> {
    Cochain0::from_blocks(sheaf.node_dims().iter().map(|&d| tk::random_vector(rng, d, 2.0)).collect())
}

fn random_y(rng: &mut tk::TestRng, sheaf: &CellularSheaf<f64>) -> Cochain1<f64> {
    Cochain1::from_blocks(sheaf.edge_dims().iter().map(|&d| tk::random_vector(rng, d, 2.0)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjointness(seed in any::<u64>()) {
        let mut rng = tk::rng(seed);
        let sheaf = tk::random_sheaf(&mut rng, 6, 4);
        for _ in 0..10 {
            let x = random_x(&mut rng, &sheaf);
            let y = random_y(&mut rng, &sheaf);
            let lhs = sheaf.coboundary(&x).unwrap().dot(&y);
            let rhs = x.dot(&sheaf.coboundary_transpose(&y).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn coboundary_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let mut rng = tk::rng(seed);
        let sheaf = tk::random_sheaf(&mut rng, 6, 3);
        let x = random_x(&mut rng, &sheaf);
        let x2 = random_x(&mut rng, &sheaf);
        let combo = &x.scaled(a) + &x2.scaled(b);
        let lhs = sheaf.coboundary(&combo).unwrap();
        let rhs = &sheaf.coboundary(&x).unwrap().scaled(a) + &sheaf.coboundary(&x2).unwrap().scaled(b);
        prop_assert!((&lhs - &rhs).norm_inf() <= 1e-12);
    }

    #[test]
    fn assembled_matrix_matches_operator_and_dense_oracle(seed in any::<u64>()) {
        let mut rng = tk::rng(seed);
        let sheaf = tk::random_sheaf(&mut rng, 6, 3);
        let d = sheaf.assemble_coboundary_matrix();
        prop_assert!((&d - tk::dense_coboundary(&sheaf)).amax() <= 1e-15);
        for _ in 0..10 {
            let x = random_x(&mut rng, &sheaf);
            let via_matrix = &d * x.flatten();
            let via_operator = sheaf.coboundary(&x).unwrap().flatten();
            prop_assert!((via_matrix - via_operator).amax() <= 1e-12);
        }
    }

    #[test]
    fn local_laplacian_matches_global(seed in any::<u64>()) {
        let mut rng = tk::rng(seed);
        let sheaf = tk::random_sheaf(&mut rng, 6, 3);
        let pots = PotentialAssignment::quadratic(&sheaf);
        let ctx = LaplacianContext::new(&sheaf, &pots).unwrap();
        let x = random_x(&mut rng, &sheaf);
        let global = ctx.apply(&x).unwrap();
        for i in 0..sheaf.graph().node_count() {
            let neighbors: BTreeMap<usize, DVector<f64>> = sheaf
                .graph()
                .neighbors(i)
                .iter()
                .map(|inc| (inc.neighbor, x.block(inc.neighbor).clone()))
                .collect();
            let local = ctx.apply_local(i, x.block(i), &neighbors).unwrap();
            prop_assert!((local - global.block(i)).amax() <= 1e-12);
        }
    }

    #[test]
    fn min_norm_preimage_is_exact_and_orthogonal_to_kernel(seed in any::<u64>()) {
        let mut rng = tk::rng(seed);
        let sheaf = tk::random_sheaf(&mut rng, 6, 3);
        let x0 = random_x(&mut rng, &sheaf);
        let b = sheaf.coboundary(&x0).unwrap();
        let pre = sheaf.min_norm_preimage(&b, 1e-9).unwrap();
        prop_assert!(pre.in_image);
        prop_assert!((&sheaf.coboundary(&pre.x).unwrap() - &b).norm_inf() <= 1e-8);
        let kernel = tk::kernel_basis(&tk::dense_coboundary(&sheaf), 1e-12);
        if kernel.ncols() > 0 {
            let overlap = kernel.transpose() * pre.x.flatten();
            prop_assert!(overlap.amax() <= 1e-8, "overlap {}", overlap.amax());
        }
        let oracle = tk::pinv(&tk::dense_coboundary(&sheaf)) * b.flatten();
        prop_assert!((pre.x.flatten() - oracle).amax() <= 1e-7);
    }
}

#[test]
fn quadratic_laplacian_on_constant_sheaf_is_kronecker_graph_laplacian() {
    let mut rng = tk::rng(7);
    for k in 1..=3 {
        for _ in 0..10 {
            let graph = tk::random_graph(&mut rng, 7);
            let oracle = tk::kron_identity(&tk::graph_laplacian(&graph), k);
            let sheaf = CellularSheaf::constant(graph, k).unwrap();
            let pots = PotentialAssignment::quadratic(&sheaf);
            let ctx = LaplacianContext::new(&sheaf, &pots).unwrap();
            for _ in 0..5 {
                let x = random_x(&mut rng, &sheaf);
                let lx = ctx.apply(&x).unwrap().flatten();
                assert!((lx - &oracle * x.flatten()).amax() <= 1e-10);
            }
        }
    }
}

#[test]
fn constant_sheaf_matrix_is_kronecker_incidence() {
    let mut rng = tk::rng(11);
    for k in 1..=4 {
        let graph = tk::random_graph(&mut rng, 6);
        let oracle = tk::kron_identity(&tk::incidence(&graph), k);
        let sheaf = CellularSheaf::constant(graph, k).unwrap();
        assert_eq!(sheaf.assemble_coboundary_matrix(), oracle);
    }
}

#[test]
fn constant_sheaf_kernel_dimension_counts_components() {
    let mut rng = tk::rng(3);
    for _ in 0..30 {
        let graph = tk::random_graph(&mut rng, 7);
        let k = rng_dim(&mut rng);
        let n = graph.node_count();
        let comps = graph.component_count();
        let sheaf = CellularSheaf::constant(graph.clone(), k).unwrap();
        let rank = tk::rank(&sheaf.assemble_coboundary_matrix(), 1e-10);
        assert_eq!(n * k - rank, comps * k);

        // Per-component consensus vectors are sections.
        let labels = component_labels(&graph);
        let x = Cochain0::from_blocks(
            labels.iter().map(|&c| DVector::from_element(k, c as f64 + 0.5)).collect(),
        );
        assert!(sheaf.is_global_section(&x, 1e-9).unwrap());
    }
}

fn rng_dim(rng: &mut tk::TestRng) -> usize {
    use rand::Rng;
    rng.random_range(1..=3)
}

fn component_labels(graph: &Graph) -> Vec<usize> {
    let n = graph.node_count();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        label[s] = next;
        while let Some(v) = stack.pop() {
            for inc in graph.neighbors(v) {
                if label[inc.neighbor] == usize::MAX {
                    label[inc.neighbor] = next;
                    stack.push(inc.neighbor);
                }
            }
        }
        next += 1;
    }
    label
}

#[test]
fn adjointness_on_small_sheaves_is_tight() {
    let mut rng = tk::rng(5);
    let sheaf = tk::random_sheaf(&mut rng, 5, 3);
    for _ in 0..100 {
        let x = random_x(&mut rng, &sheaf);
        let y = random_y(&mut rng, &sheaf);
        let gap = sheaf.coboundary(&x).unwrap().dot(&y) - x.dot(&sheaf.coboundary_transpose(&y).unwrap());
        assert!(gap.abs() <= 1e-12);
    }
}
