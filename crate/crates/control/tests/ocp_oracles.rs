use homprog_control::{AgentObjective, AgentOcp, DynamicsSheafSpec, LtiSystem, StageCost};
use homprog_core::solver::NodeObjective;
use homprog_testkit as tk;
use nalgebra::{dmatrix, dvector, DMatrix, DVector};

/// Dense `D w = b` encoding `x(1) = c` and `x(t+1) = A x(t) + B u(t)`.
fn dynamics_constraints(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DVector<f64>, horizon: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (n, m) = (a.nrows(), b.ncols());
    let stride = n + m;
    let dim = (horizon - 1) * stride + n;
    let rows = horizon * n;
    let mut d = DMatrix::zeros(rows, dim);
    let mut rhs = DVector::zeros(rows);
    for k in 0..n {
        d[(k, k)] = 1.0;
        rhs[k] = c[k];
    }
    for t in 0..horizon - 1 {
        let r = (t + 1) * n;
        let x = t * stride;
        d.view_mut((r, x), (n, n)).copy_from(a);
        d.view_mut((r, x + n), (n, m)).copy_from(b);
        d.view_mut((r, x + stride), (n, n)).copy_from(&(-DMatrix::identity(n, n)));
    }
    (d, rhs)
}

/// Hessian and linear term of `Σ_{t<T} ½(x−x_ref)ᵀQ(x−x_ref) + ½uᵀRu` on the stacked vector.
fn stage_quadratic(cost: &StageCost, horizon: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (n, m) = (cost.q.nrows(), cost.r.nrows());
    let mut blocks = Vec::new();
    let mut g = Vec::new();
    for _ in 1..horizon {
        blocks.push(cost.q.clone());
        blocks.push(cost.r.clone());
        g.extend((-(&cost.q * &cost.x_ref)).iter().copied());
        g.extend(std::iter::repeat_n(0.0, m));
    }
    blocks.push(DMatrix::zeros(n, n));
    g.extend(std::iter::repeat_n(0.0, n));
    (tk::block_diag(&blocks), DVector::from_vec(g))
}

fn ocp(sys: LtiSystem, horizon: usize, c: DVector<f64>, cost: StageCost, bound: f64) -> AgentOcp {
    let m = sys.control_dim();
    let spec = DynamicsSheafSpec::new(sys, horizon, c).unwrap();
    AgentOcp::uniform(spec, cost, DVector::from_element(m, -bound), DVector::from_element(m, bound)).unwrap()
}

#[test]
fn scalar_tracking_prox_matches_dense_kkt() {
    let mut rng = tk::rng(21);
    for _ in 0..10 {
        let a = tk::random_matrix(&mut rng, 1, 1, 1.2);
        let b = tk::random_matrix(&mut rng, 1, 1, 1.0);
        let c = tk::random_vector(&mut rng, 1, 2.0);
        let cost = StageCost::new(dmatrix![1.0], dmatrix![0.1], tk::random_vector(&mut rng, 1, 3.0)).unwrap();
        let horizon = 5;
        let obj = AgentObjective::new(ocp(LtiSystem::new(a.clone(), b.clone()).unwrap(), horizon, c.clone(), cost.clone(), 1e6));
        let v = tk::random_vector(&mut rng, obj.dim(), 2.0);
        let rho = 0.7;

        let (h, g) = stage_quadratic(&cost, horizon);
        let (d, rhs) = dynamics_constraints(&a, &b, &c, horizon);
        let n = h.nrows();
        let kkt = tk::equality_qp(&(&h + DMatrix::identity(n, n) * rho), &(g - &v * rho), &d, &rhs);
        let w = obj.prox(&v, rho).unwrap();
        assert!((&w - &kkt.x).amax() <= 1e-5, "{w} vs {}", kkt.x);
    }
}

#[test]
fn double_integrator_prox_matches_dense_kkt() {
    let mut rng = tk::rng(22);
    let sys = LtiSystem::double_integrator(2, 0.1).unwrap();
    let q = DMatrix::from_diagonal(&dvector![1.0, 0.5, 0.2, 0.1]);
    let cost = StageCost::new(q, DMatrix::identity(2, 2) * 0.1, dvector![1.0, -2.0, 0.0, 0.5]).unwrap();
    let c = tk::random_vector(&mut rng, 4, 3.0);
    let horizon = 6;
    let obj = AgentObjective::new(ocp(sys.clone(), horizon, c.clone(), cost.clone(), 1e6));
    let (h, g) = stage_quadratic(&cost, horizon);
    let (d, rhs) = dynamics_constraints(sys.a(), sys.b(), &c, horizon);
    for rho in [0.1, 1.0, 10.0] {
        let v = tk::random_vector(&mut rng, obj.dim(), 3.0);
        let n = h.nrows();
        let kkt = tk::equality_qp(&(&h + DMatrix::identity(n, n) * rho), &(&g - &v * rho), &d, &rhs);
        let w = obj.prox(&v, rho).unwrap();
        assert!((&w - &kkt.x).amax() <= 1e-5);
        assert!(obj.evaluate(&w).is_finite());
    }
}

#[test]
fn zero_cost_prox_is_the_affine_projection() {
    let mut rng = tk::rng(23);
    for _ in 0..10 {
        let a = tk::random_matrix(&mut rng, 2, 2, 1.0);
        let b = tk::random_matrix(&mut rng, 2, 1, 1.0);
        let c = tk::random_vector(&mut rng, 2, 1.0);
        let horizon = 4;
        let cost = StageCost::new(DMatrix::zeros(2, 2), DMatrix::zeros(1, 1), DVector::zeros(2)).unwrap();
        let obj = AgentObjective::new(ocp(LtiSystem::new(a.clone(), b.clone()).unwrap(), horizon, c.clone(), cost, 1e6));
        let v = tk::random_vector(&mut rng, obj.dim(), 2.0);
        let (d, rhs) = dynamics_constraints(&a, &b, &c, horizon);
        let projected = &v - tk::pinv(&d) * (&d * &v - &rhs);
        let w = obj.prox(&v, 2.0).unwrap();
        assert!((&w - &projected).amax() <= 1e-6);
    }
}

#[test]
fn unreachable_target_saturates_the_controls() {
    // x(t+1) = x(t) + u(t) chasing 100 from 0 with |u| ≤ 2: full throttle until the last
    // control, which no stage cost sees.
    let cost = StageCost::new(dmatrix![1.0], dmatrix![0.01], dvector![100.0]).unwrap();
    let sys = LtiSystem::new(dmatrix![1.0], dmatrix![1.0]).unwrap();
    let obj = AgentObjective::new(ocp(sys, 4, dvector![0.0], cost, 2.0));
    let w = obj.solve().unwrap();
    let u = obj.controls(&w);
    assert!((&u - dvector![2.0, 2.0, 0.0]).amax() <= 1e-9, "{u}");
    assert!(obj.evaluate(&w).is_finite());

    let v = DVector::from_element(obj.dim(), 50.0);
    let u = obj.controls(&obj.prox(&v, 1.0).unwrap());
    assert!(u.iter().all(|&x| (-2.0..=2.0).contains(&x)));
    assert!((u[0] - 2.0).abs() <= 1e-9);
}

#[test]
fn evaluate_is_infinite_off_the_feasible_set() {
    let sys = LtiSystem::double_integrator(1, 0.1).unwrap();
    let obj = AgentObjective::new(ocp(sys, 3, dvector![0.0, 0.0], StageCost::control_effort(2, 1, 1.0), 2.0));
    let w = obj.solve().unwrap();
    assert_eq!(obj.evaluate(&w), 0.0);
    let mut bad = w.clone();
    bad[0] += 1e-3;
    assert_eq!(obj.evaluate(&bad), f64::INFINITY);
    // u(1) = 3 breaks the box even along a rollout
    let fast = obj.rollout_map().trajectory(&dvector![3.0, 0.0]);
    assert_eq!(obj.evaluate(&fast), f64::INFINITY);
}
