use homprog_core::solver::{
    admm_solve, x_update, y_update, z_update_projection, z_update_relaxed, AdmmParams, BoxQuadraticObjective,
    HomologicalProgram, NodeObjective, QuadraticObjective, ZUpdateMode, ZeroObjective,
};
use homprog_core::{
    CellularSheaf, Cochain0, DiffusionParams, EdgePotential, Graph, LaplacianContext, PotentialAssignment,
};
use homprog_testkit as tk;
use nalgebra::{dvector, DMatrix, DVector};
use rand::Rng;

struct Instance {
    prog: HomologicalProgram<f64>,
    h: DMatrix<f64>,
    g: DVector<f64>,
    d: DMatrix<f64>,
    b: DVector<f64>,
}

fn random_program(rng: &mut tk::TestRng) -> Instance {
    let sheaf = tk::random_sheaf(rng, 4, 2);
    let x_hat = Cochain0::from_blocks(sheaf.node_dims().iter().map(|&d| tk::random_vector(rng, d, 2.0)).collect());
    let targets = sheaf.coboundary(&x_hat).unwrap();
    let pots = targets
        .blocks()
        .iter()
        .map(|t| {
            if rng.random_bool(0.3) {
                EdgePotential::quadratic(t.len())
            } else {
                EdgePotential::displacement(t.clone())
            }
        })
        .collect::<Vec<_>>();
    let b = DVector::from_iterator(
        sheaf.edge_total_dim(),
        pots.iter().flat_map(|p| p.minimizer().unwrap().iter().copied().collect::<Vec<_>>()),
    );
    let pots = PotentialAssignment::new(&sheaf, pots).unwrap();

    let mut hs = Vec::new();
    let mut gs = Vec::new();
    let mut objectives: Vec<Box<dyn NodeObjective<f64>>> = Vec::new();
    for &dim in sheaf.node_dims() {
        let h = tk::random_spd(rng, dim, 0.2);
        let g = tk::random_vector(rng, dim, 2.0);
        objectives.push(Box::new(QuadraticObjective::new(h.clone(), g.clone(), 0.0).unwrap()));
        hs.push(h);
        gs.push(g);
    }
    let d = tk::dense_coboundary(&sheaf);
    let h = tk::block_diag(&hs);
    let g = DVector::from_iterator(h.nrows(), gs.iter().flat_map(|g| g.iter().copied().collect::<Vec<_>>()));
    let prog = HomologicalProgram::new(sheaf, pots, objectives).unwrap();
    Instance { prog, h, g, d, b }
}

#[test]
fn admm_matches_dense_kkt_on_random_convex_programs() {
    let mut rng = tk::rng(101);
    let params = AdmmParams::default();
    assert_eq!(params.max_iters, 500);
    for case in 0..10 {
        let inst = random_program(&mut rng);
        assert!(inst.prog.check_convexity().projection_ready());
        let kkt = tk::equality_qp(&inst.h, &inst.g, &inst.d, &inst.b);
        let out = admm_solve(&inst.prog, &params, None, None).unwrap();
        assert!(out.report.converged(), "case {case}: {:?}", out.report.status);
        assert_eq!(out.report.mode, ZUpdateMode::Projection);
        let primal = out.report.final_primal_residual().unwrap();
        assert!(primal <= 1e-4, "case {case}: primal residual {primal:e}");
        let objective = inst.prog.objective_value(&out.z).unwrap();
        assert!((objective - kkt.value).abs() <= 1e-3, "case {case}: {objective} vs {}", kkt.value);

        // z stays in C = ker L.
        let ctx = LaplacianContext::new(inst.prog.sheaf(), inst.prog.potentials()).unwrap();
        assert!(ctx.apply(&out.z).unwrap().norm_inf() <= 10.0 * params.eps2);

        // ρ·y is the multiplier term Dᵀλ of the KKT system, up to sign.
        let dual = inst.d.transpose() * &kkt.multiplier;
        let scaled = out.y.flatten() * params.rho;
        let err = (&scaled - &dual).amax().min((&scaled + &dual).amax());
        assert!(err <= 1e-2, "case {case}: dual mismatch {err:e}");
    }
}

#[test]
fn scaled_dual_tracks_rho() {
    let mut rng = tk::rng(103);
    let inst = random_program(&mut rng);
    let kkt = tk::equality_qp(&inst.h, &inst.g, &inst.d, &inst.b);
    let dual = inst.d.transpose() * &kkt.multiplier;
    for rho in [0.5, 2.0] {
        let params = AdmmParams { rho, ..Default::default() };
        let out = admm_solve(&inst.prog, &params, None, None).unwrap();
        assert!(out.report.converged());
        let scaled = out.y.flatten() * rho;
        let err = (&scaled - &dual).amax().min((&scaled + &dual).amax());
        assert!(err <= 1e-2, "rho {rho}: {err:e}");
    }
}

fn two_node_consensus() -> HomologicalProgram<f64> {
    let sheaf = CellularSheaf::constant(Graph::path(2).unwrap(), 1).unwrap();
    let pots = PotentialAssignment::quadratic(&sheaf);
    let objectives: Vec<Box<dyn NodeObjective<f64>>> = vec![
        Box::new(QuadraticObjective::tracking(dvector![0.0])),
        Box::new(QuadraticObjective::tracking(dvector![4.0])),
    ];
    HomologicalProgram::new(sheaf, pots, objectives).unwrap()
}

#[test]
fn two_node_consensus_reaches_the_mean() {
    let out = admm_solve(&two_node_consensus(), &AdmmParams::default(), None, None).unwrap();
    assert!(out.report.converged());
    assert!((out.z.block(0)[0] - 2.0).abs() <= 1e-3);
    assert!((out.z.block(1)[0] - 2.0).abs() <= 1e-3);
}

#[test]
fn feasibility_only_program_lands_in_c() {
    let mut rng = tk::rng(107);
    for _ in 0..5 {
        let inst = random_program(&mut rng);
        let objectives: Vec<Box<dyn NodeObjective<f64>>> = inst
            .prog
            .sheaf()
            .node_dims()
            .iter()
            .map(|&d| Box::new(ZeroObjective { dim: d }) as Box<dyn NodeObjective<f64>>)
            .collect();
        let prog =
            HomologicalProgram::new(inst.prog.sheaf().clone(), inst.prog.potentials().clone(), objectives).unwrap();
        let out = admm_solve(&prog, &AdmmParams::default(), None, None).unwrap();
        assert!(out.report.converged());
        let ctx = LaplacianContext::new(prog.sheaf(), prog.potentials()).unwrap();
        assert!(ctx.apply(&out.z).unwrap().norm_inf() <= 1e-5);
    }
}

#[test]
fn x_update_closed_forms_and_locality() {
    let prog = two_node_consensus();
    let z = Cochain0::from_slices(&[[1.0], [-2.0]]);
    let y = Cochain0::from_slices(&[[0.5], [0.25]]);
    let rho = 3.0;
    let x = x_update(&prog, &z, &y, rho).unwrap();
    let a = [0.0, 4.0];
    for i in 0..2 {
        let expected = (a[i] + rho * (z.block(i)[0] - y.block(i)[0])) / (1.0 + rho);
        assert!((x.block(i)[0] - expected).abs() <= 1e-12);
    }
    // perturbing node 1's inputs leaves node 0's block alone
    let z2 = Cochain0::from_slices(&[[1.0], [10.0]]);
    let y2 = Cochain0::from_slices(&[[0.5], [-7.0]]);
    let x2 = x_update(&prog, &z2, &y2, rho).unwrap();
    assert_eq!(x.block(0), x2.block(0));
    let yy = y_update(&y, &x, &z);
    let yy2 = y_update(&y, &x2, &z2);
    assert_eq!(yy.block(0), yy2.block(0));
}

#[test]
fn x_update_of_zero_objectives_is_z_minus_y() {
    let sheaf = CellularSheaf::constant(Graph::path(3).unwrap(), 2).unwrap();
    let pots = PotentialAssignment::quadratic(&sheaf);
    let objectives: Vec<Box<dyn NodeObjective<f64>>> =
        (0..3).map(|_| Box::new(ZeroObjective { dim: 2 }) as Box<dyn NodeObjective<f64>>).collect();
    let prog = HomologicalProgram::new(sheaf, pots, objectives).unwrap();
    let mut rng = tk::rng(109);
    let z = Cochain0::from_blocks((0..3).map(|_| tk::random_vector(&mut rng, 2, 1.0)).collect());
    let y = Cochain0::from_blocks((0..3).map(|_| tk::random_vector(&mut rng, 2, 1.0)).collect());
    let x = x_update(&prog, &z, &y, 1.7).unwrap();
    assert!((&x - &(&z - &y)).norm_inf() <= 1e-15);
}

#[test]
fn box_constrained_prox_is_kkt_stationary() {
    let mut rng = tk::rng(113);
    for _ in 0..50 {
        let n = rng.random_range(1..=4);
        let h = tk::random_spd(&mut rng, n, 0.1);
        let g = tk::random_vector(&mut rng, n, 3.0);
        let lo = DVector::from_element(n, -0.5);
        let hi = DVector::from_element(n, 0.5);
        let obj = BoxQuadraticObjective::new(QuadraticObjective::new(h.clone(), g.clone(), 0.0).unwrap(), lo.clone(), hi.clone())
            .unwrap();
        let v = tk::random_vector(&mut rng, n, 2.0);
        let rho = rng.random_range(0.1..5.0);
        let x = obj.prox(&v, rho).unwrap();
        // independent projected-gradient residual on f(x) + ρ/2‖x − v‖²
        let grad = &h * &x + &g + (&x - &v) * rho;
        let stepped = (&x - &grad).zip_zip_map(&lo, &hi, |p, l, u| p.clamp(l, u));
        assert!((&x - stepped).amax() <= 1e-6);
        assert!(x.iter().all(|&c| (-0.5..=0.5).contains(&c)));
    }
}

#[test]
fn y_update_recurrence() {
    let y0 = Cochain0::from_slices(&[[0.0]]);
    let x = Cochain0::from_slices(&[[1.0]]);
    let z = Cochain0::from_slices(&[[0.0]]);
    assert_eq!(y_update(&y0, &x, &z).block(0)[0], 1.0);
    assert_eq!(y_update(&y0, &x, &x), y0);
    let mut y = Cochain0::from_slices(&[[0.25, -1.0]]);
    let x = Cochain0::from_slices(&[[2.0, 1.0]]);
    let z = Cochain0::from_slices(&[[0.5, 3.0]]);
    for k in 1..=10 {
        y = y_update(&y, &x, &z);
        let expected = dvector![0.25 + 1.5 * k as f64, -1.0 - 2.0 * k as f64];
        assert!((y.block(0) - expected).amax() <= 1e-12);
    }
}

#[test]
fn projection_z_update_fixes_c_and_matches_oracle() {
    let sheaf = CellularSheaf::constant(Graph::path(3).unwrap(), 1).unwrap();
    let pots = PotentialAssignment::quadratic(&sheaf);
    let objectives: Vec<Box<dyn NodeObjective<f64>>> =
        (0..3).map(|_| Box::new(ZeroObjective { dim: 1 }) as Box<dyn NodeObjective<f64>>).collect();
    let prog = HomologicalProgram::new(sheaf, pots, objectives).unwrap();
    let params = DiffusionParams { tol: 1e-10, ..Default::default() };
    let v = Cochain0::from_slices(&[[0.0], [3.0], [6.0]]);
    let z = z_update_projection(&prog, &v, &params).unwrap().x_final;
    assert!((z.flatten() - dvector![3.0, 3.0, 3.0]).amax() <= 1e-6);
    let again = z_update_projection(&prog, &z, &params).unwrap().x_final;
    assert!((&again - &z).norm_inf() <= 1e-9);

    let mut rng = tk::rng(127);
    for _ in 0..5 {
        let inst = random_program(&mut rng);
        let ctx = LaplacianContext::new(inst.prog.sheaf(), inst.prog.potentials()).unwrap();
        let v = Cochain0::from_blocks(inst.prog.sheaf().node_dims().iter().map(|&d| tk::random_vector(&mut rng, d, 2.0)).collect());
        let z = z_update_projection(&inst.prog, &v, &params).unwrap().x_final;
        let oracle = ctx.harmonic_projection_oracle(&v).unwrap();
        assert!((&z - &oracle).norm_inf() <= 1e-5);
    }
}

#[test]
fn relaxed_z_update_solves_the_linear_system_for_quadratics() {
    let mut rng = tk::rng(131);
    for _ in 0..10 {
        let sheaf = tk::random_sheaf(&mut rng, 5, 3);
        let pots = PotentialAssignment::quadratic(&sheaf);
        let objectives: Vec<Box<dyn NodeObjective<f64>>> = sheaf
            .node_dims()
            .iter()
            .map(|&d| Box::new(ZeroObjective { dim: d }) as Box<dyn NodeObjective<f64>>)
            .collect();
        let d = tk::dense_coboundary(&sheaf);
        let v = Cochain0::from_blocks(sheaf.node_dims().iter().map(|&k| tk::random_vector(&mut rng, k, 2.0)).collect());
        let prog = HomologicalProgram::new(sheaf, pots, objectives).unwrap();
        let rho = rng.random_range(0.2..3.0);
        let r = z_update_relaxed(&prog, &v, rho, 1e-10, 100_000).unwrap();
        assert!(r.converged);
        let n = d.ncols();
        let system = d.transpose() * &d + DMatrix::identity(n, n) * rho;
        let oracle = system.lu().solve(&(v.flatten() * rho)).unwrap();
        assert!((r.z.flatten() - oracle).amax() <= 1e-8);
    }
}

#[test]
fn relaxed_z_update_is_stationary_for_fixed_distance_edges() {
    let graph = Graph::complete(3).unwrap();
    let sheaf = CellularSheaf::constant(graph, 2).unwrap();
    let pots = PotentialAssignment::new(&sheaf, vec![EdgePotential::fixed_distance_sq(2, 5f64.sqrt()); 3]).unwrap();
    let objectives: Vec<Box<dyn NodeObjective<f64>>> =
        (0..3).map(|_| Box::new(ZeroObjective { dim: 2 }) as Box<dyn NodeObjective<f64>>).collect();
    let prog = HomologicalProgram::new(sheaf, pots, objectives).unwrap();
    let v = Cochain0::from_slices(&[[0.0, 0.0], [1.0, 0.3], [0.2, 1.4]]);
    let rho = 1.0;
    let r = z_update_relaxed(&prog, &v, rho, 1e-6, 100_000).unwrap();
    assert!(r.converged);
    let ctx = LaplacianContext::new(prog.sheaf(), prog.potentials()).unwrap();
    let grad = &ctx.apply(&r.z).unwrap() + &(&r.z - &v).scaled(rho);
    assert!(grad.norm_inf() <= 1e-6);

    let report = prog.check_convexity();
    assert!(!report.is_convex_program());
    assert_eq!(report.nonconvex_edges, vec![0, 1, 2]);
    assert_eq!(report.recommended_mode(), ZUpdateMode::Relaxed);
    let out = admm_solve(&prog, &AdmmParams::default(), None, None).unwrap();
    assert_eq!(out.report.mode, ZUpdateMode::Relaxed);
}

#[test]
fn relaxed_z_update_with_zero_potentials_is_identity() {
    let sheaf = CellularSheaf::constant(Graph::path(3).unwrap(), 2).unwrap();
    let pots = PotentialAssignment::new(&sheaf, vec![EdgePotential::zero(2); 2]).unwrap();
    let objectives: Vec<Box<dyn NodeObjective<f64>>> =
        (0..3).map(|_| Box::new(ZeroObjective { dim: 2 }) as Box<dyn NodeObjective<f64>>).collect();
    let prog = HomologicalProgram::new(sheaf, pots, objectives).unwrap();
    let v = Cochain0::from_slices(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
    let r = z_update_relaxed(&prog, &v, 1.0, 1e-9, 1000).unwrap();
    assert!((&r.z - &v).norm_inf() <= 1e-12);
}

#[test]
fn convexity_diagnostic_names_offending_edges() {
    let sheaf = CellularSheaf::constant(Graph::path(3).unwrap(), 1).unwrap();
    let objectives = || -> Vec<Box<dyn NodeObjective<f64>>> {
        (0..3).map(|_| Box::new(QuadraticObjective::tracking(dvector![0.0])) as Box<dyn NodeObjective<f64>>).collect()
    };
    let quad = HomologicalProgram::new(sheaf.clone(), PotentialAssignment::quadratic(&sheaf), objectives()).unwrap();
    let report = quad.check_convexity();
    assert!(report.is_convex_program());
    assert_eq!(report.recommended_mode(), ZUpdateMode::Projection);

    let mixed = PotentialAssignment::new(&sheaf, vec![EdgePotential::quadratic(1), EdgePotential::dissensus(1)]).unwrap();
    let prog = HomologicalProgram::new(sheaf.clone(), mixed, objectives()).unwrap();
    let report = prog.check_convexity();
    assert!(!report.is_convex_program());
    assert_eq!(report.nonconvex_edges, vec![1]);
    assert!(report.to_string().contains("[1]"));
    assert!(prog.potentials().minimizer_cochain().is_err());
}
