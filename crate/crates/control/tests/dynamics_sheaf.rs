use homprog_control::{
    admissibility_residual, build_dynamics_sheaf, is_admissible, DynamicsSheafSpec, LtiSystem, RolloutMap,
};
use homprog_core::LaplacianContext;
use homprog_testkit as tk;
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::Rng;

struct Instance {
    spec: DynamicsSheafSpec,
    controls: Vec<DVector<f64>>,
}

fn random_instance(rng: &mut tk::TestRng) -> Instance {
    let n = rng.random_range(1..=3);
    let m = rng.random_range(1..=3);
    let horizon = rng.random_range(2..=6);
    let a = tk::random_matrix(rng, n, n, 1.0);
    let b = tk::random_matrix(rng, n, m, 1.0);
    let c = tk::random_vector(rng, n, 2.0);
    let controls = (1..horizon).map(|_| tk::random_vector(rng, m, 1.0)).collect();
    let spec = DynamicsSheafSpec::new(LtiSystem::new(a, b).unwrap(), horizon, c).unwrap();
    Instance { spec, controls }
}

/// Stacks `(x(1), u(1), …, x(T))` by hand.
fn stack(states: &[DVector<f64>], controls: &[DVector<f64>]) -> DVector<f64> {
    let mut out = Vec::new();
    for (t, x) in states.iter().enumerate() {
        out.extend(x.iter().copied());
        if let Some(u) = controls.get(t) {
            out.extend(u.iter().copied());
        }
    }
    DVector::from_vec(out)
}

/// Checks `x(1) = c` and `x(t+1) = A x(t) + B u(t)` directly on the stacked vector.
fn recurrence_gap(spec: &DynamicsSheafSpec, w: &DVector<f64>) -> f64 {
    let (a, b) = (spec.system.a(), spec.system.b());
    let (n, m) = (a.nrows(), b.ncols());
    let stride = n + m;
    let x = |t: usize| w.rows((t - 1) * stride, n).into_owned();
    let u = |t: usize| w.rows((t - 1) * stride + n, m).into_owned();
    let mut gap = (x(1) - &spec.initial_state).amax();
    for t in 1..spec.horizon {
        gap = gap.max((x(t + 1) - (a * x(t) + b * u(t))).amax());
    }
    gap
}

#[test]
fn rollouts_are_exactly_the_global_sections() {
    let mut rng = tk::rng(7);
    for case in 0..50 {
        let inst = random_instance(&mut rng);
        let states = tk::simulate_lti(inst.spec.system.a(), inst.spec.system.b(), &inst.spec.initial_state, &inst.controls);
        let w = stack(&states, &inst.controls);
        assert!(recurrence_gap(&inst.spec, &w) <= 1e-12);
        assert!(is_admissible(&inst.spec, &w, 1e-9).unwrap(), "case {case}: rollout rejected");

        // zero of the Laplacian with the displacement potential on the first edge
        let (sheaf, pots) = build_dynamics_sheaf(&inst.spec).unwrap();
        let ctx = LaplacianContext::new(&sheaf, &pots).unwrap();
        let x = inst.spec.layout().to_cochain(&w).unwrap();
        assert!(ctx.apply(&x).unwrap().norm_inf() <= 1e-9, "case {case}");

        let k = rng.random_range(0..w.len());
        let mut bad = w.clone();
        bad[k] += if rng.random_bool(0.5) { 1e-3 } else { -1e-3 };
        assert!(recurrence_gap(&inst.spec, &bad) > 1e-9);
        assert!(!is_admissible(&inst.spec, &bad, 1e-9).unwrap(), "case {case}: perturbed entry {k} accepted");
    }
}

#[test]
fn sections_satisfy_the_recurrence() {
    // the converse direction, on vectors that were not built as rollouts
    let mut rng = tk::rng(8);
    for case in 0..50 {
        let inst = random_instance(&mut rng);
        let dim = inst.spec.layout().dim();
        let w = tk::random_vector(&mut rng, dim, 2.0);
        let section = is_admissible(&inst.spec, &w, 1e-9).unwrap();
        assert_eq!(section, recurrence_gap(&inst.spec, &w) <= 1e-9, "case {case}");
        assert!(!section);

        // projecting onto the admissible set through the rollout map gives a section
        let rollout = RolloutMap::new(&inst.spec);
        let u = inst.spec.layout();
        let controls = DVector::from_iterator(
            u.m * (u.horizon - 1),
            (1..u.horizon).flat_map(|t| u.control(&w, t).iter().copied().collect::<Vec<_>>()),
        );
        let fixed = rollout.trajectory(&controls);
        assert!(is_admissible(&inst.spec, &fixed, 1e-9).unwrap());
        assert!(recurrence_gap(&inst.spec, &fixed) <= 1e-9);
    }
}

#[test]
fn scalar_integrator_by_hand() {
    let sys = LtiSystem::new(dmatrix![1.0], dmatrix![1.0]).unwrap();
    let spec = DynamicsSheafSpec::new(sys, 3, dvector![0.0]).unwrap();
    // x = 0, 1, 2 under u = 1, 1
    let w = dvector![0.0, 1.0, 1.0, 1.0, 2.0];
    assert!(is_admissible(&spec, &w, 1e-12).unwrap());
    let w = dvector![0.0, 1.0, 1.0, 1.0, 2.5];
    assert!((admissibility_residual(&spec, &w).unwrap() - 0.5).abs() < 1e-12);
    let w = dvector![1.0, 1.0, 2.0, 1.0, 3.0];
    assert!((admissibility_residual(&spec, &w).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn double_integrator_rollout_by_hand() {
    let sys = LtiSystem::double_integrator(1, 0.5).unwrap();
    assert_eq!(sys.a(), &dmatrix![1.0, 0.5; 0.0, 1.0]);
    assert_eq!(sys.b(), &dmatrix![0.0; 0.5]);
    let spec = DynamicsSheafSpec::new(sys, 3, dvector![1.0, 2.0]).unwrap();
    // p, v: (1, 2) -u=2-> (2, 3) -u=-2-> (3.5, 2)
    let w = dvector![1.0, 2.0, 2.0, 2.0, 3.0, -2.0, 3.5, 2.0];
    assert!(is_admissible(&spec, &w, 1e-12).unwrap());
}

#[test]
fn sheaf_shape() {
    let sys = LtiSystem::new(DMatrix::identity(2, 2), DMatrix::from_element(2, 1, 1.0)).unwrap();
    let spec = DynamicsSheafSpec::new(sys, 4, dvector![0.0, 0.0]).unwrap();
    let (sheaf, _) = build_dynamics_sheaf(&spec).unwrap();
    assert_eq!(sheaf.node_dims(), &[0, 3, 3, 3, 2]);
    assert_eq!(sheaf.edge_dims(), &[2, 2, 2, 2]);
    assert_eq!(spec.layout().dim(), 11);
    assert!(DynamicsSheafSpec::new(LtiSystem::double_integrator(1, 0.1).unwrap(), 1, dvector![0.0, 0.0]).is_err());
}
